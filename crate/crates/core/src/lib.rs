//! Spectral-Galerkin reduction of the 2-D advection-diffusion equation on the
//! unit square to a bilinear ODE control system
//!
//! ```text
//! da/dt = -D a - A(alpha) a
//! ```
//!
//! together with a time integrator, mixing diagnostics, velocity optimizers,
//! entrywise bounds on `A`, and the two reference flows (a fixed shear and a
//! time-periodic switching flow).

pub mod basis;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod integrals;
pub mod operator;
pub mod optimizer;
pub mod scenarios;
pub mod simulator;
pub mod tensors;
pub mod velocity;

pub use basis::{BasisKind, MassWeights, ModeSet};
pub use error::{Error, Result};
pub use field::SpectralField;
pub use operator::{BilinearForm, OdeOperator};
pub use tensors::{CouplingEntry, CouplingTensors, TensorKey};
pub use velocity::{Constraint, VelocityCoefficients};

/// Float formatting shared by every CSV writer: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}
