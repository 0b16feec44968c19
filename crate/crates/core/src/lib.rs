//! Unconstrained influence diagrams: modelling, GS-DAG construction,
//! exact solution by reverse elimination, and exhaustive oracles.
//!
//! A typical pipeline parses a model, builds the skeleton of the
//! strategy search space, expands it into a normal-form S-DAG and solves:
//!
//! ```
//! use gsdag::{fixtures, solve_uid, SolveOptions};
//!
//! let uid = fixtures::coin_match();
//! let strategy = solve_uid(&uid, SolveOptions::default()).unwrap();
//! assert_eq!(strategy.meu, 1.0);
//! ```

pub mod bundle;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod oracle;
pub mod order;
pub mod potential;
pub mod relevance;
pub mod sdag;
pub mod skeleton;
pub mod solver;

pub use bundle::StrategyBundle;
pub use error::{Error, Result};
pub use model::{parse_uid, serialize_uid, validate, ModelBuilder, Uid, VarId, VarKind};
pub use order::{is_admissible, temporal_order, PartialOrder};
pub use sdag::{expand_normal_form, NodeId, NodeKind, SDag};
pub use skeleton::{build_skeleton, BuildOptions, Skeleton};
pub use solver::{solve, solve_uid, PolicyTable, SolveOptions, StepPolicy, Strategy};
