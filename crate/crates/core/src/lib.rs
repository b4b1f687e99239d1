//! Competitive online decisions for binary outcomes by kernel defensive
//! forecasting.
//!
//! A [`forecaster`] roots a defensive function on the lexicographic square, a
//! [`game`]'s canonical choice function turns the forecast into a decision,
//! and the [`protocol`] engine certifies the regret bound and the
//! large-number inequalities behind it on every run.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod forecaster;
pub mod game;
pub mod kernel;
pub mod numeric;
pub mod protocol;
pub mod registry;

pub use error::{Error, Result};
pub use forecaster::{Branch, ForecasterState, RootReport, SolverConfig};
pub use game::{Constant, Decision, Forecast, Game};
pub use kernel::{Datum, Kernel, KernelExpansion};
pub use protocol::{Comparator, Engine};
