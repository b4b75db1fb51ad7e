//! Single-qubit states stored as Bloch vectors.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat2};

/// Slack allowed on `|r| <= 1` and on negative eigenvalues.
pub const PSD_TOLERANCE: f64 = 1e-12;

const TRACE_TOLERANCE: f64 = 1e-10;
const HERMITICITY_TOLERANCE: f64 = 1e-10;

/// A single-qubit mixed state `rho = (I + r.sigma)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    r: Vector3<f64>,
}

impl QubitState {
    pub fn new(r: Vector3<f64>) -> Result<Self> {
        if !r.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidState(format!(
                "non-finite Bloch vector {r:?}"
            )));
        }
        let norm = r.norm();
        if norm > 1.0 + PSD_TOLERANCE {
            return Err(Error::NonPhysicalState {
                min_eigenvalue: (1.0 - norm) / 2.0,
            });
        }
        Ok(Self { r })
    }

    pub fn from_components(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vector3::new(x, y, z))
    }

    /// A state diagonal in the `sigma_z` basis with polarization `rz`.
    pub fn diagonal(rz: f64) -> Result<Self> {
        Self::from_components(0.0, 0.0, rz)
    }

    pub fn maximally_mixed() -> Self {
        Self {
            r: Vector3::zeros(),
        }
    }

    /// Gibbs state of `H = -(omega/2) sigma_z` at `y0 = omega / (2 T0)`.
    ///
    /// `y0 < 0` describes a population-inverted (negative temperature) probe.
    pub fn thermal(y0: f64) -> Result<Self> {
        if !y0.is_finite() {
            return Err(Error::domain(format!(
                "thermal state needs finite y0, got {y0}"
            )));
        }
        Ok(Self {
            r: Vector3::new(0.0, 0.0, y0.tanh()),
        })
    }

    pub fn bloch(&self) -> Vector3<f64> {
        self.r
    }

    pub fn rx(&self) -> f64 {
        self.r.x
    }

    pub fn ry(&self) -> f64 {
        self.r.y
    }

    pub fn rz(&self) -> f64 {
        self.r.z
    }

    /// `<sigma_z>`; the energy is `-(omega/2)` times this.
    pub fn sigma_z_expectation(&self) -> f64 {
        self.r.z
    }

    pub fn purity(&self) -> f64 {
        (1.0 + self.r.norm_squared()) / 2.0
    }

    pub fn is_diagonal(&self) -> bool {
        self.r.x == 0.0 && self.r.y == 0.0
    }

    /// Eigenvalues `(1 - |r|)/2` and `(1 + |r|)/2`.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let n = self.r.norm();
        [(1.0 - n) / 2.0, (1.0 + n) / 2.0]
    }

    pub fn to_density(&self) -> Mat2 {
        let r = &self.r;
        (linalg::identity2()
            + linalg::sigma_x() * c(r.x)
            + linalg::sigma_y() * c(r.y)
            + linalg::sigma_z() * c(r.z))
            * c(0.5)
    }

    pub fn from_density(rho: &Mat2) -> Result<Self> {
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > TRACE_TOLERANCE || trace.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {trace} is not 1")));
        }
        let defect = linalg::hermiticity_defect(rho);
        if defect > HERMITICITY_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "Hermiticity defect {defect:e}"
            )));
        }
        let x = rho[(0, 1)].re + rho[(1, 0)].re;
        let y = rho[(1, 0)].im - rho[(0, 1)].im;
        let z = (rho[(0, 0)] - rho[(1, 1)]).re;
        let mut r = Vector3::new(x, y, z);
        let norm = r.norm();
        let min_eigenvalue = (trace.re - norm) / 2.0;
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(Error::NonPhysicalState { min_eigenvalue });
        }
        if norm > 1.0 {
            r /= norm;
        }
        Ok(Self { r })
    }
}
