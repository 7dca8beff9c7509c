//! Bell tests with a parametric down-conversion pair source that does not
//! herald its pairs.
//!
//! A type-II pair `|1x>_a |1y>_b` passes a half-wave rotator in one arm and
//! a symmetric beamsplitter. The output state is a superposition of a
//! polarization singlet shared between two stations and a component with
//! both photons at the same station. Time-binned counting assigns every bin
//! an outcome, including "nothing arrived", so no post-selection is needed
//! and vacuum bins only dilute the violation towards the local bound.
//!
//! ```
//! use pdc_bell::{bell, optics};
//!
//! let state = optics::build_experiment_state();
//! let r = bell::chsh_decomposition(&state, &bell::ChshSettings::optimal()).unwrap();
//! assert!((r.total - (1.0 + 2f64.sqrt())).abs() < 1e-12);
//! ```

pub mod bell;
pub mod error;
pub mod fock;
pub mod lhv;
pub mod measurement;
pub mod montecarlo;
pub mod optics;

pub use bell::{ChshResult, ChshSettings};
pub use error::{Error, Result};
pub use fock::{FockBasisState, ModeUnitary, StateVector};
pub use lhv::{LhvModel, LhvVerdict, TableSet};
pub use measurement::{JointDistribution, OutcomeClass, PolarizerAngle};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fock-space.md")]
    mod fock_space {}
    #[doc = include_str!("../../../book/src/optics.md")]
    mod optics {}
    #[doc = include_str!("../../../book/src/measurement.md")]
    mod measurement {}
    #[doc = include_str!("../../../book/src/chsh.md")]
    mod chsh {}
    #[doc = include_str!("../../../book/src/lhv.md")]
    mod lhv {}
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
