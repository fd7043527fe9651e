//! Imitation datasets, training, evaluation, and curriculum rounds.

pub mod curriculum;
pub mod dataset;
pub mod evaluate;
pub mod train;

pub use curriculum::{curriculum_round, CurriculumTier, RoundReport};
pub use dataset::{instance_id, Dataset, PlanRecord, Provenance, Sample};
pub use evaluate::{evaluate, evaluate_solver, EvalRecord, EvalSummary, Solver};
pub use train::{evaluate_loss, train, train_with, EpochMetrics, LossSummary, TrainConfig, TrainReport, Trainer};
