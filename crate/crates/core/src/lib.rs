//! Dynamic movement primitives whose weights are re-solved online as a
//! recursive constrained least-squares problem.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! command line tool and wall-clock measurements live in `dmpp-cli`.
//!
//! Conventions used throughout:
//! * weights are stored `K x n` (one column per degree of freedom),
//! * constraint regressors are stored `K x l` and their targets `n x l`,
//! * the phase `s` runs from 0 to 1 for forward execution and from 1 to 0
//!   for reverse execution.
#![no_std]
// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod adaptation;
pub mod baselines;
pub mod basis;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod linalg;
pub mod model;
pub mod quaternion;

pub use adaptation::{
    AdaptationConfig, AdaptationState, BatchMethod, BatchProblem, ConstraintBlock, EpsilonProfile,
    HistoryMode, RecursionScheme, ViaPoint,
};
pub use basis::{BasisModel, BasisValues};
pub use dynamics::{ExecutionState, PhaseState};
pub use error::{Error, Result};
pub use model::{Demonstration, Direction, DmpModel, Gains, Space, StateTriplet};
pub use quaternion::UnitQuaternion;
