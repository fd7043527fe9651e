//! Learned heuristics for grid planning: a small tensor library with
//! reverse-mode differentiation, the CoAt network, three grid domains, A*,
//! and imitation/curriculum training.

pub mod adam;
pub mod domains;
pub mod error;
pub mod layers;
pub mod model;
pub mod ops;
pub mod search;
pub mod tape;
pub mod tensor;
pub mod training;

pub use adam::{adam_step, AdamState};
pub use domains::{
    encode_pair, generate, parse_instance, serialize_instance, Action, DomainTag, Encoded, GenParams, GoalCondition,
    Instance, State,
};
pub use error::{CoatError, Result};
pub use model::{build_model, HeadMode, Model, ModelConfig};
pub use search::{astar, oracle_solve, validate_plan, Outcome, SearchBudget, SearchResult};
pub use tensor::{Gradients, ParamStore, Precision, Real, Tensor};
