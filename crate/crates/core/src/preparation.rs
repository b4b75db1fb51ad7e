//! Probe preparation by two consecutive non-selective generalized
//! measurements applied to a thermal qubit.
//!
//! The first measurement (strength `p`) pushes population from `|0>` into
//! `|1>`; the second (strength `q`) pushes it back from `|1>` into `|0>`.
//! The two channels do not commute, and the order is fixed: first, then
//! second.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, max_abs_diff, Mat2, ONE, ZERO};
use crate::state::QubitState;

pub const COMPLETENESS_TOLERANCE: f64 = 1e-12;

/// Strengths `(p, q)` of the two generalized measurements, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStrengths {
    p: f64,
    q: f64,
}

impl MeasurementStrengths {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        check_strength("p", p)?;
        check_strength("q", q)?;
        Ok(Self { p, q })
    }

    /// No measurement at all: the probe stays thermal.
    pub fn none() -> Self {
        Self { p: 0.0, q: 0.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Strengths reaching a target polarization from a thermal probe at `y0`.
    ///
    /// Polarizations below `tanh(y0)` use only the first measurement, those
    /// above use only the second. Requires `y0` finite and `|target| <= 1`.
    pub fn for_polarization(target: f64, y0: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&target) {
            return Err(Error::domain(format!(
                "target polarization {target} outside [-1, 1]"
            )));
        }
        if !y0.is_finite() {
            return Err(Error::domain(format!("y0 must be finite, got {y0}")));
        }
        let thermal = y0.tanh();
        if target <= thermal {
            let p = if thermal + 1.0 == 0.0 {
                0.0
            } else {
                ((thermal - target) / (1.0 + thermal)).clamp(0.0, 1.0)
            };
            Self::new(p, 0.0)
        } else {
            let q = ((target - thermal) / (1.0 - thermal)).clamp(0.0, 1.0);
            Self::new(0.0, q)
        }
    }
}

fn check_strength(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::domain(format!(
            "measurement strength {name} = {value} outside [0, 1]"
        )));
    }
    Ok(())
}

/// A completeness-checked list of single-qubit Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    ops: Vec<Mat2>,
}

impl KrausSet {
    pub fn new(ops: Vec<Mat2>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::contract("empty Kraus set"));
        }
        let sum: Mat2 = ops.iter().map(|k| k.adjoint() * k).sum();
        let defect = max_abs_diff(&sum, &Mat2::identity());
        if defect > COMPLETENESS_TOLERANCE {
            return Err(Error::contract(format!(
                "Kraus set is not trace preserving (defect {defect:e})"
            )));
        }
        Ok(Self { ops })
    }

    pub fn ops(&self) -> &[Mat2] {
        &self.ops
    }

    /// `sum_i K_i rho K_i^dagger` on a density matrix.
    pub fn apply_to_density(&self, rho: &Mat2) -> Mat2 {
        self.ops.iter().map(|k| k * rho * k.adjoint()).sum()
    }

    /// The non-selective channel acting on a qubit state.
    pub fn apply(&self, state: &QubitState) -> Result<QubitState> {
        QubitState::from_density(&self.apply_to_density(&state.to_density()))
    }
}

/// `{M1 = sqrt(1-p)|0><0| + |1><1|, M2 = sqrt(p)|1><0|}`.
pub fn kraus_first(p: f64) -> Result<KrausSet> {
    check_strength("p", p)?;
    let m1 = Mat2::new(c((1.0 - p).sqrt()), ZERO, ZERO, ONE);
    let m2 = Mat2::new(ZERO, ZERO, c(p.sqrt()), ZERO);
    KrausSet::new(vec![m1, m2])
}

/// `{N1 = |0><0| + sqrt(1-q)|1><1|, N2 = sqrt(q)|0><1|}`.
pub fn kraus_second(q: f64) -> Result<KrausSet> {
    check_strength("q", q)?;
    let n1 = Mat2::new(ONE, ZERO, ZERO, c((1.0 - q).sqrt()));
    let n2 = Mat2::new(ZERO, c(q.sqrt()), ZERO, ZERO);
    KrausSet::new(vec![n1, n2])
}

pub fn apply_channel(kraus: &KrausSet, state: &QubitState) -> Result<QubitState> {
    kraus.apply(state)
}

/// Polarization of the prepared probe,
/// `R_z = q(1+p) - p + (1-p)(1-q) tanh(y0)`.
pub fn rz_preparation(ms: MeasurementStrengths, y0: f64) -> f64 {
    let (p, q) = (ms.p, ms.q);
    q * (1.0 + p) - p + (1.0 - p) * (1.0 - q) * y0.tanh()
}

/// The prepared probe state `(0, 0, R_z)`.
pub fn prepare_probe(ms: MeasurementStrengths, y0: f64) -> Result<QubitState> {
    if !y0.is_finite() {
        return Err(Error::domain(format!("y0 must be finite, got {y0}")));
    }
    QubitState::diagonal(rz_preparation(ms, y0).clamp(-1.0, 1.0))
}

/// The same protocol evaluated by applying the two Kraus channels in order.
pub fn prepare_probe_kraus(ms: MeasurementStrengths, y0: f64) -> Result<QubitState> {
    let thermal = QubitState::thermal(y0)?;
    let after_first = kraus_first(ms.p)?.apply(&thermal)?;
    kraus_second(ms.q)?.apply(&after_first)
}
