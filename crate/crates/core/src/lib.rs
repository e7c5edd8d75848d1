//! Reward functions as points in Wasserstein space.
//!
//! Reward tables of tabular MDPs are embedded as probability measures over
//! state-action pairs (a temperature softmax), and compared with exact and
//! entropic optimal transport under a gridworld ground metric. On top of that
//! sit centroid computations (medoid and fixed-support barycenter), a
//! maximum-entropy IRL learner, and experiment drivers that measure reward
//! ambiguity as trajectory counts, demonstration noise and dimension vary.

pub mod cli;
pub mod error;
pub mod io;
pub mod irl;
pub mod lab;
pub mod manifest;
pub mod mdp;
pub mod oracle;
pub mod ot;
pub mod reward;
pub mod selftest;

pub use error::{Error, Result};
pub use mdp::{Policy, QTable, TabularMdp, Trajectory};
pub use ot::{GroundMetric, OtConfig, TransportPlan};
pub use reward::{DiscreteMeasure, RewardTable};
