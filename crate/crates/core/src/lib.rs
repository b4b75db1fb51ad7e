//! Probe-state preparation by two non-selective generalized measurements and
//! single-parameter metrology of the generalized amplitude damping (GAD)
//! channel.
//!
//! Units: `hbar = k_B = 1`, the probe transition frequency `omega` sets the
//! energy scale, and time is measured in units of `1/omega`. The qubit
//! Hamiltonian is `H = -(omega/2) sigma_z`, so `|0>` is the ground state and
//! thermal polarizations are positive.
//!
//! Module map:
//!
//! * [`state`]: Bloch-vector qubit states and their density-matrix view.
//! * [`preparation`]: the two measurement channels and the prepared polarization.
//! * [`channel`]: GAD dynamics (closed form, Kraus, Lindblad RK4).
//! * [`metrology`]: quantum and classical Fisher information, Cramér–Rao bound.
//! * [`thermo`]: energy change, susceptibilities, Hamiltonian variance.
//! * [`circuit`]: a small dense density-matrix simulator for channel dilations.
//! * [`estimation`]: shot sampling, maximum-likelihood inversion, CRB experiments.
//! * [`commands`]: table-producing scans behind the `qprobe` binary.

pub mod channel;
pub mod circuit;
pub mod commands;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod metrology;
pub mod preparation;
pub mod state;
pub mod thermo;

pub use channel::{GadParams, Interrogation, LindbladConfig};
pub use error::{Error, Result};
pub use metrology::ParameterTag;
pub use preparation::{KrausSet, MeasurementStrengths};
pub use state::QubitState;
