//! Coverage and plan-length evaluation of heuristics inside A*.

use std::time::Duration;

use rayon::prelude::*;

use super::dataset::instance_id;
use crate::domains::{Action, Instance, State};
use crate::model::Model;
use crate::search::{astar, oracle_heuristic, validate_plan, Plan, SearchBudget};
use crate::tensor::Real;

/// Heuristic plugged into A* for an evaluation run.
#[derive(Clone, Copy)]
pub enum Solver<'m, T: Real> {
    /// Learned heuristic `max(0, h)`.
    Model(&'m Model<T>),
    /// `h ≡ 0`, i.e. uniform-cost search.
    Blind,
    /// The admissible per-domain oracle heuristic.
    Oracle,
}

impl<T: Real> Solver<'_, T> {
    pub fn label(&self) -> &'static str {
        match self {
            Solver::Model(_) => "coat",
            Solver::Blind => "blind",
            Solver::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub instance_id: String,
    pub tier: String,
    pub solver: String,
    pub solved: bool,
    pub plan_length: Option<usize>,
    pub expansions: u64,
    pub elapsed: Duration,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub coverage: f64,
    /// Mean over solved instances only.
    pub avg_plan_length: Option<f64>,
    pub avg_expansions: f64,
    pub records: Vec<EvalRecord>,
}

impl EvalSummary {
    pub fn from_records(records: Vec<EvalRecord>) -> Self {
        let n = records.len().max(1) as f64;
        let solved: Vec<usize> = records.iter().filter_map(|r| r.plan_length).collect();
        Self {
            coverage: solved.len() as f64 / n,
            avg_plan_length: (!solved.is_empty()).then(|| solved.iter().sum::<usize>() as f64 / solved.len() as f64),
            avg_expansions: records.iter().map(|r| r.expansions as f64).sum::<f64>() / n,
            records,
        }
    }

    pub fn solved(&self) -> usize {
        self.records.iter().filter(|r| r.solved).count()
    }
}

/// Result of one search with its plan (when solved and valid).
pub struct Solved {
    pub record: EvalRecord,
    pub plan: Option<Plan<State, Action>>,
}

pub fn solve_one<T: Real>(instance: &Instance, solver: Solver<'_, T>, budget: SearchBudget) -> Solved {
    let result = match solver {
        Solver::Model(model) => astar(
            instance,
            |s: &State| model.heuristic_value(s).unwrap_or(f64::INFINITY),
            budget,
        ),
        Solver::Blind => astar(instance, |_: &State| 0.0, budget),
        Solver::Oracle => astar(instance, oracle_heuristic(instance), budget),
    };
    // a plan only counts if it replays to the goal
    let plan = result
        .plan
        .filter(|p| validate_plan(instance, &p.actions).valid);
    Solved {
        record: EvalRecord {
            instance_id: instance_id(instance),
            tier: instance.meta.tier.clone().unwrap_or_default(),
            solver: solver.label().to_string(),
            solved: plan.is_some(),
            plan_length: plan.as_ref().map(Plan::len),
            expansions: result.stats.expanded,
            elapsed: result.stats.elapsed,
            seed: instance.meta.seed,
        },
        plan,
    }
}

/// Runs A* with `solver` on every instance (in parallel, results in input
/// order).
pub fn evaluate_solver<T: Real>(instances: &[Instance], solver: Solver<'_, T>, budget: SearchBudget) -> EvalSummary {
    let records = instances
        .par_iter()
        .map(|inst| solve_one(inst, solver, budget).record)
        .collect();
    EvalSummary::from_records(records)
}

/// Coverage of the learned heuristic.
pub fn evaluate<T: Real>(model: &Model<T>, instances: &[Instance], budget: SearchBudget) -> EvalSummary {
    evaluate_solver(instances, Solver::Model(model), budget)
}
