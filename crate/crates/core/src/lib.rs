//! Finite-horizon Dec-POMDP planning by memory-bounded dynamic programming.
//!
//! Policies are built bottom-up one stage at a time. Each stage backs up the
//! kept trees of the next stage and reduces the result with one of four
//! operators: exact LP dominance pruning, MBDP point selection, PBIP
//! branch-and-bound, or PSMBDP greedy selection over sampled beliefs.

pub mod belief;
pub mod bench;
pub mod bnb;
pub mod dp;
pub mod error;
pub mod experiment;
mod lp;
pub mod mdp;
pub mod model;
pub mod policy;
pub mod psmbdp;
pub mod stage;

pub use belief::{Belief, HeuristicPolicy, HeuristicSpace, PointSets};
pub use bench::{build as build_benchmark, list_benchmarks, BenchmarkSpec};
pub use error::{Error, Result};
pub use mdp::{mdp_value_at, value_iteration, StageValues};
pub use model::{parse_model, serialize_model, DecPomdp, JointAction, JointObservation};
pub use policy::{evaluate, rollout, value_at, AlphaVector, JointPolicy, PolicyTree, TreePool};
