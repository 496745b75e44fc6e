//! Anytime synthesis of task-and-motion policies.
//!
//! An abstract stochastic shortest-path problem is solved over a predicate
//! abstraction of a hybrid planning domain. The resulting contingent plan is
//! then refined path by path with sampled motion plans, most probable and
//! cheapest paths first, and geometric failures are fed back into the
//! abstract model by replanning.

pub mod abstraction;
pub mod anytime;
pub mod geom;
pub mod lang;
pub mod ssp;
