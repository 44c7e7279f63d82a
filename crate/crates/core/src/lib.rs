//! Discrete Bayesian belief updating, one-step lookahead and hybrid
//! uniform-then-lookahead sample allocation for selecting the best of several
//! multi-attribute alternatives under an additive or Euclidean value model.

pub mod allocation;
pub mod belief;
pub mod error;
pub mod instances;
pub mod pmf;
pub mod preference;
pub mod sim;

pub use allocation::{lookahead_scores, next_pair, run_policy, uniform_schedule, PolicyConfig};
pub use belief::{BeliefState, DecisionRule};
pub use error::{Error, Result};
pub use instances::{generate_cell, generate_instance, instance_seed, Instance, InstanceId, ProblemSet, UtilityKind};
pub use pmf::{ErrorModel, Pmf};
pub use preference::{Preference, UtilityFunctionSpec, ValueFunctionSpec, ValueKind};
