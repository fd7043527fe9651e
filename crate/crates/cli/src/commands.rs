use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use coat_core::search::oracle_solve_with;
use coat_core::training::{self, curriculum_round, evaluate::solve_one, Dataset, EvalRecord, Provenance, Solver, TrainReport};
use coat_core::{build_model, generate, oracle_solve, DomainTag, GenParams, Instance, Model, SearchBudget, State};

use crate::checkpoint;
use crate::config::{ExperimentConfig, Preset};
use crate::error::{usage, CliError, Result};
use crate::files::{self, read_instances, read_plan, read_text, write_atomic, write_instance, PLAN_EXT};
use crate::pddl;
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "coat", version, about = "Learned heuristics for grid planning")]
pub struct Cli {
    /// Directory that default output paths are resolved against.
    #[arg(long, global = true, env = "COAT_OUT", default_value = ".")]
    out_root: PathBuf,
    /// Worker threads for instance-level parallelism.
    #[arg(long, global = true, env = "COAT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate seeded instances.
    Generate(GenerateArgs),
    /// Solve instances optimally and write plan files.
    Oracle(OracleArgs),
    /// Build an imitation dataset from instances and their plans.
    Dataset(DatasetArgs),
    /// Train a fresh model on a dataset.
    Train(TrainArgs),
    /// Run A* with one or more heuristics and write an evaluation CSV.
    Evaluate(EvaluateArgs),
    /// Run the curriculum rounds listed in a config file.
    Curriculum(CurriculumArgs),
    /// Write PDDL domain and problem files.
    ExportPddl(ExportArgs),
    /// Render evaluation CSVs as aligned text tables.
    Report(ReportArgs),
    /// Summarize an instance, plan, dataset, checkpoint or CSV.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    domain: DomainTag,
    /// `N` for a square grid or `HxW`.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    #[arg(long, default_value_t = 10)]
    count: u64,
    /// Instance `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Teleport pairs (maze).
    #[arg(long, default_value_t = 4)]
    pairs: usize,
    /// Boxes (Sokoban).
    #[arg(long, default_value_t = 2)]
    boxes: usize,
    /// Tier label stored in each instance; defaults to the generator name.
    #[arg(long)]
    tier: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Instance file or directory.
    #[arg(long)]
    instances: PathBuf,
    /// Expansion cap per instance.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    #[arg(long)]
    instances: PathBuf,
    /// Directory holding `<instance name>.plan` files.
    #[arg(long)]
    plans: PathBuf,
    /// Leave out the goal-state sample of each plan.
    #[arg(long)]
    no_goal_samples: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Experiment config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Checkpoint directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    instances: PathBuf,
    /// Needed when `coat` is among the solvers.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comma-separated: coat, blind, oracle.
    #[arg(long, default_value = "coat,blind", value_delimiter = ',')]
    solvers: Vec<String>,
    /// Expansion cap per search.
    #[arg(long)]
    budget: Option<u64>,
    /// Seconds per search.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurriculumArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Config file defining `tier.*` and `curriculum`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Evaluation CSV files.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    path: PathBuf,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let parse = |t: &str| t.parse::<usize>().map_err(|_| format!("invalid size {s:?}"));
    match s.split_once('x') {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 when the work failed, 2 on usage
/// errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage("--threads must be positive");
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let root = cli.out_root;
    let out = |given: Option<PathBuf>, default: &str| given.unwrap_or_else(|| root.join(default));
    match cli.command {
        Command::Generate(a) => {
            let dir = out(a.out.clone(), "instances");
            cmd_generate(a, &dir)
        }
        Command::Oracle(a) => {
            let dir = out(a.out.clone(), "plans");
            cmd_oracle(a, &dir)
        }
        Command::Dataset(a) => {
            let path = out(a.out.clone(), "dataset.jsonl");
            cmd_dataset(a, &path)
        }
        Command::Train(a) => {
            let dir = out(a.out.clone(), "checkpoint");
            cmd_train(a, &dir)
        }
        Command::Evaluate(a) => {
            let path = out(a.out.clone(), "eval.csv");
            cmd_evaluate(a, &path)
        }
        Command::Curriculum(a) => {
            let dir = out(a.out.clone(), "curriculum");
            cmd_curriculum(a, &dir)
        }
        Command::ExportPddl(a) => {
            let dir = out(a.out.clone(), "pddl");
            cmd_export(a, &dir)
        }
        Command::Report(a) => {
            let path = out(a.out.clone(), "report.txt");
            cmd_report(a, &path)
        }
        Command::Inspect(a) => cmd_inspect(&a.path),
    }
}

fn cmd_generate(a: GenerateArgs, dir: &Path) -> Result<()> {
    let (h, w) = a.size;
    let params = match a.domain {
        DomainTag::Maze => GenParams::maze(h, w, a.pairs),
        DomainTag::Sokoban => GenParams::sokoban(h, w, a.boxes),
        DomainTag::FloorTile => GenParams::floortile(h, w),
    };
    let tier = a.tier.unwrap_or_else(|| params.to_string());
    let instances = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let mut inst = generate(&params, a.seed + i)?;
            inst.meta.tier = Some(tier.clone());
            Ok(inst)
        })
        .collect::<Result<Vec<Instance>>>()?;
    for (i, inst) in instances.iter().enumerate() {
        write_instance(dir, &format!("{tier}-s{:06}", a.seed + i as u64), inst)?;
    }
    println!("wrote {} {tier} instances to {}", instances.len(), dir.display());
    Ok(())
}

fn cmd_oracle(a: OracleArgs, dir: &Path) -> Result<()> {
    let instances = read_instances(&a.instances)?;
    let plans: Vec<_> = instances
        .par_iter()
        .map(|(_, inst)| match a.budget {
            Some(b) => oracle_solve_with(inst, SearchBudget::expansions(b)),
            None => oracle_solve(inst),
        })
        .collect();
    let mut failed = Vec::new();
    let mut total = 0;
    for ((name, _), plan) in instances.iter().zip(plans) {
        match plan {
            Ok(p) => {
                total += p.len();
                write_atomic(&dir.join(format!("{name}.{PLAN_EXT}")), files::plan_text(&p.actions).as_bytes())?;
            }
            Err(e) => failed.push(format!("{name}: {e}")),
        }
    }
    let solved = instances.len() - failed.len();
    println!(
        "solved {solved}/{} instances, total plan length {total}; plans in {}",
        instances.len(),
        dir.display()
    );
    if !failed.is_empty() {
        return Err(coat_core::CoatError::Oracle(failed.join("; ")).into());
    }
    Ok(())
}

/// Difficulty rank of a single instance: box count for Sokoban, cell count
/// otherwise. Matches the rank of the generator tier it came from.
pub fn instance_rank(inst: &Instance) -> usize {
    match &inst.initial {
        State::Sokoban(s) => s.boxes().len(),
        _ => inst.dims().cells(),
    }
}

fn cmd_dataset(a: DatasetArgs, path: &Path) -> Result<()> {
    let instances = read_instances(&a.instances)?;
    let mut plans = Vec::with_capacity(instances.len());
    for (name, inst) in instances {
        let plan = read_plan(&a.plans.join(format!("{name}.{PLAN_EXT}")), inst.domain())?;
        let prov = Provenance {
            tier: inst.meta.tier.clone().unwrap_or_else(|| "-".into()),
            rank: instance_rank(&inst),
            seed: inst.meta.seed,
        };
        plans.push((inst, plan, prov));
    }
    let ds = Dataset::build(plans, !a.no_goal_samples)?;
    write_atomic(path, ds.to_jsonl().as_bytes())?;
    println!("{} plans, {} samples -> {}", ds.records().len(), ds.len(), path.display());
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_jsonl(&read_text(path)?).map_err(|e| CliError::from(e).in_file(path))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::parse(&read_text(p)?).map_err(|e| e.in_file(p)),
        None => Ok(ExperimentConfig::default()),
    }
}

fn dataset_domain(ds: &Dataset) -> Result<DomainTag> {
    ds.records()
        .first()
        .map(|r| r.instance.domain())
        .ok_or_else(|| CliError::Usage("dataset is empty".into()))
}

fn train_log(report: &TrainReport) -> String {
    let mut s = format!(
        "# format=coat-train-log version=1\ninitial_loss={:.6}\nepoch,steps,train_loss,train_mae,val_loss,val_mae\n",
        report.initial_loss
    );
    for m in &report.history {
        let (vl, vm) = m
            .validation
            .map_or((String::new(), String::new()), |v| (format!("{:.6}", v.loss), format!("{:.6}", v.mae)));
        let _ = writeln!(s, "{},{},{:.6},{:.6},{vl},{vm}", m.epoch, m.steps, m.train.loss, m.train.mae);
    }
    s
}

fn cmd_train(a: TrainArgs, dir: &Path) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    if let Some(p) = &a.preset {
        cfg.preset = p.parse::<Preset>()?;
    }
    let t = &mut cfg.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.lr = a.lr.unwrap_or(t.lr);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.max_steps = a.max_steps.or(t.max_steps);
    cfg.validate()?;
    let ds = load_dataset(&a.dataset)?;
    let domain = dataset_domain(&ds)?;
    if cfg.domain.is_some_and(|d| d != domain) {
        return usage(format!("config is for {} but the dataset holds {domain}", cfg.domain.unwrap_or(domain)));
    }
    let mut model: Model = build_model(&cfg.model_config(domain)?, cfg.seed)?;
    let report = training::train(&mut model, &ds, &cfg.train)?;
    let last = report.history.last();
    checkpoint::save(
        dir,
        &model,
        &[
            ("seed", cfg.seed.to_string()),
            ("steps", report.steps.to_string()),
            ("train_samples", report.train_samples.to_string()),
            ("train_mae", last.map_or(String::new(), |m| format!("{:.6}", m.train.mae))),
        ],
    )?;
    write_atomic(&dir.join("train-log.csv"), train_log(&report).as_bytes())?;
    println!(
        "trained {} parameters for {} steps; train mae {}; checkpoint in {}",
        model.config.parameter_count(),
        report.steps,
        last.map_or("-".into(), |m| format!("{:.4}", m.train.mae)),
        dir.display()
    );
    Ok(())
}

fn solver_for<'m>(name: &str, model: Option<&'m Model>) -> Result<Solver<'m, f32>> {
    match name {
        "coat" => model
            .map(Solver::Model)
            .ok_or_else(|| CliError::Usage("solver coat needs --checkpoint".into())),
        "blind" => Ok(Solver::Blind),
        "oracle" => Ok(Solver::Oracle),
        other => usage(format!("unknown solver {other:?} (expected coat, blind or oracle)")),
    }
}

fn cmd_evaluate(a: EvaluateArgs, path: &Path) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let mut budget = cfg.budget;
    if a.budget.is_some() || a.time_limit.is_some() {
        budget = SearchBudget::new(
            a.budget.or(budget.max_expansions),
            a.time_limit.map(Duration::from_secs_f64).or(budget.time_limit),
        )?;
    }
    let model = a
        .checkpoint
        .as_deref()
        .map(checkpoint::load)
        .transpose()?
        .map(|c| c.model);
    let instances = read_instances(&a.instances)?;
    if let Some(m) = &model {
        if let Some((name, _)) = instances.iter().find(|(_, i)| i.domain() != m.config.domain) {
            return usage(format!("{name} is not a {} instance", m.config.domain));
        }
    }
    let solvers = a
        .solvers
        .iter()
        .map(|s| solver_for(s.trim(), model.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<EvalRecord> = Vec::new();
    for solver in &solvers {
        let batch: Vec<EvalRecord> = instances
            .par_iter()
            .map(|(_, inst)| {
                let mut r = solve_one(inst, *solver, budget).record;
                if r.tier.is_empty() {
                    r.tier = "-".into();
                }
                r
            })
            .collect();
        records.extend(batch);
    }
    write_atomic(path, report::to_csv(&records)?.as_bytes())?;
    for row in report::rows(&records) {
        println!(
            "{:<16} {:<8} coverage {:.2} ({} instances)",
            row.tier, row.solver, row.coverage, row.attempted
        );
    }
    println!("records in {}", path.display());
    Ok(())
}

fn cmd_curriculum(a: CurriculumArgs, dir: &Path) -> Result<()> {
    let cfg = load_config(Some(&a.config))?;
    if cfg.curriculum.is_empty() {
        return usage("config lists no curriculum tiers");
    }
    let mut model = checkpoint::load(&a.checkpoint)?.model;
    let mut ds = load_dataset(&a.dataset)?;
    let mut log = String::from(
        "# format=coat-curriculum-log version=1\n\
         round,tier,attempted,solved,coverage_before,coverage_after,dataset_before,dataset_after,initial_loss\n",
    );
    for (i, tier) in cfg.curriculum_tiers().iter().enumerate() {
        let r = curriculum_round(&mut model, tier, &mut ds, &cfg.train)?;
        let _ = writeln!(
            log,
            "{},{},{},{},{:.4},{:.4},{},{},{:.6}",
            i + 1,
            r.tier,
            r.attempted,
            r.solved,
            r.coverage_before,
            r.coverage_after,
            r.dataset_before,
            r.dataset_after,
            r.training.initial_loss
        );
        println!(
            "round {} ({}): solved {}/{}, coverage {:.2} -> {:.2}, dataset {} -> {}",
            i + 1,
            r.tier,
            r.solved,
            r.attempted,
            r.coverage_before,
            r.coverage_after,
            r.dataset_before,
            r.dataset_after
        );
        // persist after every round so a later failure keeps earlier progress
        checkpoint::save(&dir.join("checkpoint"), &model, &[("rounds", (i + 1).to_string())])?;
        write_atomic(&dir.join("dataset.jsonl"), ds.to_jsonl().as_bytes())?;
        write_atomic(&dir.join("rounds.csv"), log.as_bytes())?;
    }
    Ok(())
}

fn cmd_export(a: ExportArgs, dir: &Path) -> Result<()> {
    let instances = read_instances(&a.instances)?;
    for (name, inst) in &instances {
        let pair = pddl::export(inst, name);
        write_atomic(&dir.join(format!("{name}-domain.pddl")), pair.domain.as_bytes())?;
        write_atomic(&dir.join(format!("{name}-problem.pddl")), pair.problem.as_bytes())?;
    }
    println!("exported {} instances to {}", instances.len(), dir.display());
    Ok(())
}

fn cmd_report(a: ReportArgs, path: &Path) -> Result<()> {
    let mut records = Vec::new();
    for p in &a.csv {
        records.extend(report::from_csv(&read_text(p)?).map_err(|e| e.in_file(p))?);
    }
    let text = report::text_report(&records)?;
    write_atomic(path, text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<()> {
    if path.join("manifest.txt").is_file() {
        let ck = checkpoint::load(path)?;
        println!("checkpoint, {} parameters", ck.model.config.parameter_count());
        for (k, v) in ck.model.config.to_pairs() {
            println!("  {k} = {v}");
        }
        for (k, v) in &ck.meta {
            println!("  meta.{k} = {v}");
        }
        return Ok(());
    }
    if path.is_dir() {
        let instances = read_instances(path)?;
        println!("{} instances", instances.len());
        for (name, inst) in &instances {
            let d = inst.dims();
            println!("  {name}: {} {}x{}", inst.domain(), d.h, d.w);
        }
        return Ok(());
    }
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_default();
    match ext.as_str() {
        files::INSTANCE_EXT => {
            let inst = files::read_instance(path)?;
            let d = inst.dims();
            println!("{} {}x{}, tier {:?}, seed {:?}", inst.domain(), d.h, d.w, inst.meta.tier, inst.meta.seed);
            print!("{}", coat_core::serialize_instance(&inst));
        }
        "jsonl" => {
            let ds = load_dataset(path)?;
            println!(
                "dataset: {} plans, {} samples, max rank {:?}",
                ds.records().len(),
                ds.len(),
                ds.max_rank()
            );
        }
        "csv" => {
            let records = report::from_csv(&read_text(path)?).map_err(|e| e.in_file(path))?;
            print!("{}", report::text_report(&records)?);
        }
        PLAN_EXT => {
            // action names are checked against every domain
            let text = read_text(path)?;
            let found = DomainTag::ALL
                .into_iter()
                .find_map(|d| files::parse_plan(d, &text).ok().map(|p| (d, p)));
            match found {
                Some((d, p)) => println!("{d} plan of length {}", p.len()),
                None => return Err(files::parse_plan(DomainTag::Maze, &text).unwrap_err().in_file(path)),
            }
        }
        _ => return usage(format!("cannot tell what {} is", path.display())),
    }
    Ok(())
}
