//! Evaluation CSV and the aligned text tables derived from it.
//!
//! The CSV starts with a `# format=coat-eval version=1` line, then the
//! header `instance_id,tier,solver,solved,plan_length,expansions,elapsed_ms,seed`,
//! one row per (instance, solver) and one `summary` row per solver. In a
//! summary row `solved` holds `k/n`, `plan_length` and `expansions` hold
//! means and `elapsed_ms` the total.
//!
//! `elapsed_ms` is the only wall-clock column.

use std::time::Duration;

use coat_core::training::EvalRecord;
use coat_core::CoatError;

use crate::error::{CliError, Result};

pub const EVAL_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const COLUMNS: [&str; 8] = [
    "instance_id",
    "tier",
    "solver",
    "solved",
    "plan_length",
    "expansions",
    "elapsed_ms",
    "seed",
];
const SUMMARY_ID: &str = "summary";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub tier: String,
    pub solver: String,
    pub attempted: usize,
    pub coverage: f64,
    /// Mean over solved instances only.
    pub avg_plan_length: Option<f64>,
    pub avg_expansions: f64,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

fn summarize<'a>(tier: &str, solver: &str, recs: impl Iterator<Item = &'a EvalRecord>) -> Option<ReportRow> {
    let recs: Vec<&EvalRecord> = recs.collect();
    if recs.is_empty() {
        return None;
    }
    let n = recs.len() as f64;
    let lengths: Vec<usize> = recs.iter().filter(|r| r.solved).filter_map(|r| r.plan_length).collect();
    Some(ReportRow {
        tier: tier.to_string(),
        solver: solver.to_string(),
        attempted: recs.len(),
        coverage: recs.iter().filter(|r| r.solved).count() as f64 / n,
        avg_plan_length: (!lengths.is_empty()).then(|| lengths.iter().sum::<usize>() as f64 / lengths.len() as f64),
        avg_expansions: recs.iter().map(|r| r.expansions as f64).sum::<f64>() / n,
    })
}

/// One row per (tier, solver) present, tiers and solvers in first-seen order.
pub fn rows(records: &[EvalRecord]) -> Vec<ReportRow> {
    let tiers = first_seen(records.iter().map(|r| r.tier.as_str()));
    let solvers = first_seen(records.iter().map(|r| r.solver.as_str()));
    let mut out = Vec::new();
    for t in &tiers {
        for s in &solvers {
            out.extend(summarize(t, s, records.iter().filter(|r| &r.tier == t && &r.solver == s)));
        }
    }
    out
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

pub fn to_csv(records: &[EvalRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            r.instance_id.clone(),
            r.tier.clone(),
            r.solver.clone(),
            r.solved.to_string(),
            r.plan_length.map(|l| l.to_string()).unwrap_or_default(),
            r.expansions.to_string(),
            format!("{:.3}", r.elapsed.as_secs_f64() * 1e3),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    for solver in first_seen(records.iter().map(|r| r.solver.as_str())) {
        let mine: Vec<&EvalRecord> = records.iter().filter(|r| r.solver == solver).collect();
        let row = summarize("", &solver, mine.iter().copied()).expect("solver has records");
        let solved = mine.iter().filter(|r| r.solved).count();
        let elapsed: Duration = mine.iter().map(|r| r.elapsed).sum();
        w.write_record([
            SUMMARY_ID.to_string(),
            String::new(),
            solver,
            format!("{solved}/{}", mine.len()),
            fmt_opt(row.avg_plan_length, 3),
            format!("{:.3}", row.avg_expansions),
            format!("{:.3}", elapsed.as_secs_f64() * 1e3),
            String::new(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| CliError::Format(e.to_string()))?;
    let mut out = format!("# format=coat-eval version={EVAL_FORMAT_VERSION}\n");
    out.push_str(&String::from_utf8(body).map_err(|e| CliError::Format(e.to_string()))?);
    Ok(out)
}

fn version_line(text: &str, format: &str, expected: u32) -> Result<()> {
    let first = text.lines().next().unwrap_or_default();
    let rest = first
        .strip_prefix(&format!("# format={format} version="))
        .ok_or_else(|| CliError::Format(format!("missing `# format={format} version=` line")))?;
    let found: u32 = rest
        .trim()
        .parse()
        .map_err(|_| CliError::Format(format!("unreadable version {rest:?}")))?;
    if found != expected {
        return Err(CoatError::Version { found, expected }.into());
    }
    Ok(())
}

/// Per-instance records of an evaluation CSV; summary rows are skipped.
pub fn from_csv(text: &str) -> Result<Vec<EvalRecord>> {
    version_line(text, "coat-eval", EVAL_FORMAT_VERSION)?;
    let body = text.split_once('\n').map(|(_, b)| b).unwrap_or_default();
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    if rd.headers()?.iter().ne(COLUMNS) {
        return Err(CliError::Format(format!("expected columns {}", COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        if &row[0] == SUMMARY_ID {
            continue;
        }
        let bad = |col: &str| CliError::Format(format!("row {}: bad {col} {:?}", i + 1, &row[COLUMNS.iter().position(|c| *c == col).unwrap_or(0)]));
        out.push(EvalRecord {
            instance_id: row[0].to_string(),
            tier: row[1].to_string(),
            solver: row[2].to_string(),
            solved: row[3].parse().map_err(|_| bad("solved"))?,
            plan_length: non_empty(&row[4]).map(str::parse).transpose().map_err(|_| bad("plan_length"))?,
            expansions: row[5].parse().map_err(|_| bad("expansions"))?,
            elapsed: Duration::from_secs_f64(row[6].parse::<f64>().map_err(|_| bad("elapsed_ms"))?.max(0.0) / 1e3),
            seed: non_empty(&row[7]).map(str::parse).transpose().map_err(|_| bad("seed"))?,
        });
    }
    Ok(out)
}

fn non_empty(s: &str) -> Option<&str> {
    (!s.is_empty()).then_some(s)
}

fn table(title: &str, tiers: &[String], solvers: &[String], cell: impl Fn(&str, &str) -> String) -> String {
    let mut grid = vec![std::iter::once("tier".to_string()).chain(solvers.iter().cloned()).collect::<Vec<_>>()];
    for t in tiers {
        grid.push(
            std::iter::once(if t.is_empty() { "-".to_string() } else { t.clone() })
                .chain(solvers.iter().map(|s| cell(t, s)))
                .collect(),
        );
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = format!("{title}\n");
    for (i, r) in grid.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}

/// Coverage, average plan length and average expansions, each as a table
/// with tiers as rows and solvers as columns. Timing is left out, so the
/// text depends only on the non-timing CSV columns.
pub fn text_report(records: &[EvalRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(CliError::Usage("no evaluation records to report".into()));
    }
    let rows = rows(records);
    let tiers = first_seen(records.iter().map(|r| r.tier.as_str()));
    let solvers = first_seen(records.iter().map(|r| r.solver.as_str()));
    let find = |t: &str, s: &str| rows.iter().find(|r| r.tier == t && r.solver == s);
    let mut out = format!("# format=coat-report version={REPORT_FORMAT_VERSION}\n\n");
    out.push_str(&table("coverage", &tiers, &solvers, |t, s| {
        find(t, s).map(|r| format!("{:.2}", r.coverage)).unwrap_or_default()
    }));
    out.push('\n');
    out.push_str(&table("average plan length (solved only)", &tiers, &solvers, |t, s| {
        find(t, s)
            .map(|r| r.avg_plan_length.map_or("-".into(), |l| format!("{l:.2}")))
            .unwrap_or_default()
    }));
    out.push('\n');
    out.push_str(&table("average expansions", &tiers, &solvers, |t, s| {
        find(t, s).map(|r| format!("{:.1}", r.avg_expansions)).unwrap_or_default()
    }));
    Ok(out)
}
