//! Action-smoothness regularization lab.
//!
//! Dense networks with a hand-written reverse-mode tape, CAPS and Grad-CAPS
//! smoothness penalties, SAC/TD3 agents that take those penalties into their
//! actor objective, small control environments, evaluation metrics, and the
//! experiment runner that ties them together.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agents;
pub mod envs;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod runner;
pub mod smoothness;
pub mod tensor;

pub use error::{Error, Result};
pub use nn::{Activation, DenseNet, GradTape, OutputActivation};
pub use smoothness::{ActionBounds, ActionVector, Aggregation, RegularizerKind, RegularizerSpec};
pub use tensor::Tensor2;
