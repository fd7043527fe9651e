//! Bootstrap rounds: solve harder instances with the current heuristic, add
//! the validated plans to the dataset, fine-tune at a reduced rate.

use rayon::prelude::*;

use super::dataset::{Dataset, Provenance};
use super::evaluate::{solve_one, EvalSummary, Solver};
use super::train::{train_with, TrainConfig, TrainReport};
use crate::domains::{generate, GenParams, Instance};
use crate::error::{CoatError, Result};
use crate::model::Model;
use crate::search::SearchBudget;
use crate::tensor::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumTier {
    pub label: String,
    pub params: GenParams,
    pub count: usize,
    /// Instances use seeds `first_seed .. first_seed + count`.
    pub first_seed: u64,
    pub budget: SearchBudget,
}

impl CurriculumTier {
    pub fn rank(&self) -> usize {
        self.params.difficulty()
    }

    pub fn instances(&self) -> Result<Vec<Instance>> {
        (0..self.count as u64)
            .into_par_iter()
            .map(|i| {
                let seed = self.first_seed + i;
                let mut inst = generate(&self.params, seed)?;
                inst.meta.tier = Some(self.label.clone());
                Ok(inst)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub tier: String,
    pub attempted: usize,
    pub solved: usize,
    /// Coverage of the incoming model on the tier instances.
    pub coverage_before: f64,
    /// Coverage of the fine-tuned model on the same instances.
    pub coverage_after: f64,
    pub dataset_before: usize,
    pub dataset_after: usize,
    pub training: TrainReport,
}

/// One curriculum round. On success `model` and `dataset` are updated in
/// place; on failure both are left untouched.
pub fn curriculum_round<T: Real>(
    model: &mut Model<T>,
    tier: &CurriculumTier,
    dataset: &mut Dataset,
    config: &TrainConfig,
) -> Result<RoundReport> {
    config.validate()?;
    if tier.params.domain() != model.config.domain {
        return Err(CoatError::Config(format!(
            "{} tier given to a {} model",
            tier.params.domain(),
            model.config.domain
        )));
    }
    if let Some(max) = dataset.max_rank() {
        if tier.rank() <= max {
            return Err(CoatError::Curriculum(format!(
                "tier {} has difficulty {} but the dataset already holds difficulty {max}",
                tier.label,
                tier.rank()
            )));
        }
    }
    let instances = tier.instances()?;
    let shared: &Model<T> = model;
    let attempts: Vec<_> = instances
        .par_iter()
        .map(|inst| solve_one(inst, Solver::Model(shared), tier.budget))
        .collect();
    let before = EvalSummary::from_records(attempts.iter().map(|a| a.record.clone()).collect());
    let plans: Vec<_> = instances
        .iter()
        .zip(attempts)
        .filter_map(|(inst, a)| {
            a.plan.map(|p| {
                let prov = Provenance {
                    tier: tier.label.clone(),
                    rank: tier.rank(),
                    seed: inst.meta.seed,
                };
                (inst.clone(), p.actions, prov)
            })
        })
        .collect();
    if plans.is_empty() {
        return Err(no_solutions(tier, &before));
    }
    let solved = plans.len();
    let dataset_before = dataset.len();
    let mut grown = dataset.clone();
    grown.extend(plans)?;
    let mut tuned = model.clone();
    let training = train_with(&mut tuned, &grown, config, config.curriculum_lr, config.curriculum_epochs)?;
    let after = super::evaluate::evaluate_solver(&instances, Solver::Model(&tuned), tier.budget);
    *model = tuned;
    *dataset = grown;
    Ok(RoundReport {
        tier: tier.label.clone(),
        attempted: instances.len(),
        solved,
        coverage_before: before.coverage,
        coverage_after: after.coverage,
        dataset_before,
        dataset_after: dataset.len(),
        training,
    })
}

fn no_solutions(tier: &CurriculumTier, before: &EvalSummary) -> CoatError {
    CoatError::Curriculum(format!(
        "none of {} instances of tier {} solved within {:?} expansions (mean expansions {:.0}); \
         raise the budget or add an intermediate tier",
        tier.count, tier.label, tier.budget.max_expansions, before.avg_expansions
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DomainTag;
    use crate::model::{build_model, ModelConfig};
    use crate::search::oracle_solve;

    fn base() -> (Model<f32>, Dataset) {
        let plans = (0..6)
            .map(|seed| {
                let inst = generate(&GenParams::maze(5, 5, 1), seed).unwrap();
                let plan = oracle_solve(&inst).unwrap();
                let prov = Provenance {
                    tier: "maze-5".into(),
                    rank: 25,
                    seed: Some(seed),
                };
                (inst, plan.actions, prov)
            })
            .collect();
        let cfg = ModelConfig {
            preconv_layers: 1,
            preconv_filters: 6,
            blocks_per_branch: 1,
            block_filters: 6,
            attention_heads: 1,
            d_e: 4,
            fc1_width: 8,
            ..ModelConfig::desk(DomainTag::Maze)
        };
        (build_model(&cfg, 0).unwrap(), Dataset::build(plans, true).unwrap())
    }

    fn tier(size: usize, budget: u64) -> CurriculumTier {
        CurriculumTier {
            label: format!("maze-{size}"),
            params: GenParams::maze(size, size, 1),
            count: 4,
            first_seed: 100,
            budget: SearchBudget::expansions(budget),
        }
    }

    #[test]
    fn round_grows_dataset() {
        let (mut model, mut ds) = base();
        let cfg = TrainConfig {
            curriculum_epochs: 1,
            ..TrainConfig::default()
        };
        let report = curriculum_round(&mut model, &tier(6, 5_000), &mut ds, &cfg).unwrap();
        assert!(report.dataset_after > report.dataset_before);
        assert_eq!(ds.len(), report.dataset_after);
        assert!(report.solved > 0);
    }

    #[test]
    fn easier_tier_rejected() {
        let (mut model, mut ds) = base();
        let err = curriculum_round(&mut model, &tier(5, 5_000), &mut ds, &TrainConfig::default());
        assert!(matches!(err, Err(CoatError::Curriculum(_))));
    }

    #[test]
    fn nothing_solved_leaves_state_unchanged() {
        let (mut model, mut ds) = base();
        let (m0, n0) = (model.clone(), ds.len());
        let err = curriculum_round(&mut model, &tier(9, 1), &mut ds, &TrainConfig::default());
        assert!(matches!(err, Err(CoatError::Curriculum(_))));
        assert_eq!(model, m0);
        assert_eq!(ds.len(), n0);
    }
}
