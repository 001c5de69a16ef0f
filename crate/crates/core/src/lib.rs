//! State-vector simulation of a 1->2 universal quantum cloning machine built
//! from three Lambda-type SQUID qutrits coupled to a single cavity mode.
//!
//! * [`hilbert`]: basis indexing, states, partial trace, fidelities.
//! * [`dynamics`]: closed-form pulse primitives and their generator-based oracle.
//! * [`protocol`]: composite gates and the ten-step cloning schedule.
//! * [`verify`]: target states, clone fidelities, universality sweeps.
//! * [`validate`]: the self-check suite behind `clone-sim validate`.
//! * [`cli`]: config parsing and command implementations for `clone-sim`.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod protocol;
pub mod validate;
pub mod verify;

pub use dynamics::{CouplingConfig, PulseKind, PulseOp};
pub use error::{Error, Result};
pub use hilbert::{BasisSpec, DensityMatrix, Level, PureState, Qubit, Subsystem, C64};
pub use protocol::{InputQubit, Schedule, StepTrace};
pub use verify::CloneReport;

/// Rounds to 12 significant digits, the precision of every number this crate prints.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}
