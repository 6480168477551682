//! Planner-actor-critic learning: symbolic plans over policy-sampled action
//! availability, refined by tabular actor-critic updates driven by
//! environment reward and human feedback.

pub mod action_lang;
pub mod actor_critic;
pub mod baselines;
pub mod envs;
pub mod feedback;
pub mod harness;
pub mod ids;
pub mod planner;
pub mod session;

pub use ids::{ActionId, StateId};
