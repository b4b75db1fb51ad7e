//! Quantum and classical Fisher information for the decay rate and the
//! bath temperature of the GAD channel.
//!
//! Three independent routes compute the same number:
//!
//! * closed forms written directly in terms of the channel parameters;
//! * the Bloch-vector formula `|dr|^2 + (r.dr)^2 / (1 - |r|^2)` fed with a
//!   Richardson-extrapolated central difference of the evolved Bloch vector;
//! * the spectral symmetric-logarithmic-derivative formula applied to the
//!   Kraus-channel density matrix and its finite-difference derivative.
//!
//! Temperature derivatives hold the decay rate fixed and vary
//! `y_eq = omega_bar / T` with `omega_bar = omega / 2`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::channel::{kraus_for_time, GadParams, Interrogation};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat2, MatN};

/// `1 - |r|^2` at or below this is treated as a pure state.
pub const PURE_STATE_TOLERANCE: f64 = 1e-14;

/// SLD terms with `rho_i + rho_j` at or below this are skipped.
pub const SLD_EIGEN_TOLERANCE: f64 = 1e-14;

/// Outcome probabilities at or below this count as deterministic.
pub const OUTCOME_TOLERANCE: f64 = 1e-14;

/// Relative change allowed when halving the finite-difference step.
pub const RICHARDSON_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParameterTag {
    #[serde(rename = "gamma")]
    DecayRate,
    #[serde(rename = "temperature")]
    Temperature,
}

impl ParameterTag {
    pub fn name(self) -> &'static str {
        match self {
            ParameterTag::DecayRate => "gamma",
            ParameterTag::Temperature => "temperature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QfiRoute {
    ClosedForm,
    BlochFiniteDiff,
    SldSpectral,
}

/// How the closed-form temperature QFI is evaluated.
///
/// `SelfConsistent` is `(d r_z / dT)^2 / (1 - r_z^2)`, which carries
/// `sech^4(omega_bar / T)`. `AsPrinted` keeps a single `sech^2` in the
/// numerator and is larger by `1 / sech^2(omega_bar / T)`; it does not
/// satisfy the susceptibility identity and is kept for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TemperatureVariant {
    #[default]
    SelfConsistent,
    AsPrinted,
}

/// Variance lower bound `1 / (N I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CrbBound {
    Finite(f64),
    /// Zero information: no unbiased estimator has finite variance.
    Unbounded,
}

impl CrbBound {
    pub fn value(self) -> Option<f64> {
        match self {
            CrbBound::Finite(v) => Some(v),
            CrbBound::Unbounded => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QfiReport {
    pub tag: ParameterTag,
    pub route: QfiRoute,
    pub qfi: f64,
    pub crb_single_shot: CrbBound,
}

/// QFI of a qubit from its Bloch vector and the vector's parameter derivative.
pub fn qfi_bloch(r: &Vector3<f64>, dr: &Vector3<f64>) -> Result<f64> {
    let norm_sq = r.norm_squared();
    if norm_sq.sqrt() > 1.0 + crate::state::PSD_TOLERANCE {
        return Err(Error::domain(format!(
            "Bloch vector length {} exceeds 1",
            norm_sq.sqrt()
        )));
    }
    let dot = r.dot(dr);
    let denom = 1.0 - norm_sq;
    if denom <= PURE_STATE_TOLERANCE {
        if dot.abs() <= 1e-12 * dr.norm().max(1.0) {
            return Ok(dr.norm_squared());
        }
        return Err(Error::singular(format!(
            "pure state with radial derivative {dot:e}: information diverges"
        )));
    }
    Ok(dr.norm_squared() + dot * dot / denom)
}

/// Spectral decomposition of the SLD: the classical (eigenvalue) term and
/// the quantum (eigenvector rotation) term of the QFI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SldTerms {
    pub classical: f64,
    pub quantum: f64,
}

impl SldTerms {
    pub fn total(&self) -> f64 {
        self.classical + self.quantum
    }
}

/// `Tr[rho L^2]` with `L_ij = 2 <i|d rho|j> / (rho_i + rho_j)` in the
/// eigenbasis of `rho`. Pairs with `rho_i + rho_j <= 1e-14` are skipped.
pub fn qfi_sld(rho: &Mat2, drho: &Mat2) -> f64 {
    let (values, d) = eigenbasis_derivative(rho, drho);
    let n = values.len();
    let mut l = MatN::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let sum = values[i] + values[j];
            if sum > SLD_EIGEN_TOLERANCE {
                l[(i, j)] = d[(i, j)] * c(2.0 / sum);
            }
        }
    }
    let l2 = &l * &l;
    (0..n).map(|i| values[i] * l2[(i, i)].re).sum()
}

/// The same quantity split into the classical and quantum sums.
pub fn qfi_sld_terms(rho: &Mat2, drho: &Mat2) -> SldTerms {
    let (values, d) = eigenbasis_derivative(rho, drho);
    let n = values.len();
    let mut classical = 0.0;
    let mut quantum = 0.0;
    for i in 0..n {
        if values[i] > SLD_EIGEN_TOLERANCE / 2.0 {
            classical += d[(i, i)].re.powi(2) / values[i];
        }
        for j in 0..n {
            let sum = values[i] + values[j];
            if i != j && sum > SLD_EIGEN_TOLERANCE {
                // (rho_i - rho_j)^2 |<i|d j>|^2 = |d_ij|^2 away from degeneracy;
                // inside a degenerate block the pair is an eigenvalue derivative
                let term = 2.0 * d[(i, j)].norm_sqr() / sum;
                if (values[i] - values[j]).abs() > 1e-12 {
                    quantum += term;
                } else {
                    classical += term;
                }
            }
        }
    }
    SldTerms { classical, quantum }
}

fn eigenbasis_derivative(rho: &Mat2, drho: &Mat2) -> (Vec<f64>, MatN) {
    let (values, vectors) = linalg::hermitian_eigen(&linalg::to_dynamic(rho));
    let d = vectors.adjoint() * linalg::to_dynamic(drho) * &vectors;
    (values, d)
}

/// Exact derivative of the evolved Bloch vector with respect to the tagged
/// parameter.
pub fn analytic_derivative(it: &Interrogation, tag: ParameterTag) -> Result<Vector3<f64>> {
    let r0 = it.probe.bloch();
    let t = it.time;
    let gp = &it.channel;
    match tag {
        ParameterTag::DecayRate => {
            let decay = it.decay_factor();
            let transverse = (-gp.gamma() * t / 2.0).exp();
            Ok(Vector3::new(
                -0.5 * t * transverse * r0.x,
                -0.5 * t * transverse * r0.y,
                it.detuning() * t * decay,
            ))
        }
        ParameterTag::Temperature => {
            let temperature = gp.temperature()?;
            let y = gp.y_eq();
            let sech2 = sech(y).powi(2);
            let gain = -(-gp.gamma() * t).exp_m1();
            Ok(Vector3::new(
                0.0,
                0.0,
                -gain * sech2 * gp.omega_bar() / (temperature * temperature),
            ))
        }
    }
}

pub(crate) fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Central-difference settings for parameter derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FiniteDifference {
    /// Explicit step; `None` uses `1e-5 * max(1, |lambda|)`.
    pub step: Option<f64>,
}

impl FiniteDifference {
    pub fn with_step(step: f64) -> Self {
        Self { step: Some(step) }
    }

    fn step_for(&self, value: f64) -> Result<f64> {
        let h = self.step.unwrap_or(1e-5 * value.abs().max(1.0));
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config(format!(
                "finite-difference step must be > 0, got {h}"
            )));
        }
        if h <= 64.0 * f64::EPSILON * value.abs().max(f64::MIN_POSITIVE) || h < 1e-300 {
            return Err(Error::config(format!(
                "finite-difference step {h:e} underflows against parameter {value}"
            )));
        }
        Ok(h)
    }
}

fn tagged_value(gp: &GadParams, tag: ParameterTag) -> Result<f64> {
    match tag {
        ParameterTag::DecayRate => Ok(gp.gamma()),
        ParameterTag::Temperature => gp.temperature(),
    }
}

fn shifted(gp: &GadParams, tag: ParameterTag, value: f64) -> Result<GadParams> {
    let out = match tag {
        ParameterTag::DecayRate => gp.with_gamma(value),
        ParameterTag::Temperature => gp.with_temperature(value),
    };
    out.map_err(|e| {
        Error::config(format!(
            "central difference leaves the parameter domain: {e}"
        ))
    })
}

/// Richardson-checked central difference of `f` around the tagged parameter.
fn central_difference<F, V>(
    gp: &GadParams,
    tag: ParameterTag,
    fd: &FiniteDifference,
    f: F,
) -> Result<V>
where
    F: Fn(&GadParams) -> V,
    V: Copy + std::ops::Sub<Output = V> + std::ops::Add<Output = V> + Norm,
{
    let lambda = tagged_value(gp, tag)?;
    let h = fd.step_for(lambda)?;
    let diff = |h: f64| -> Result<V> {
        let up = f(&shifted(gp, tag, lambda + h)?);
        let down = f(&shifted(gp, tag, lambda - h)?);
        Ok((up - down).scaled(1.0 / (2.0 * h)))
    };
    let coarse = diff(h)?;
    let fine = diff(h / 2.0)?;
    let change = (fine - coarse).norm_value();
    let scale = fine.norm_value();
    if change > RICHARDSON_TOLERANCE * scale + 1e-12 {
        return Err(Error::config(format!(
            "finite difference not converged: halving the step changed the result by {change:e} (scale {scale:e})"
        )));
    }
    Ok(fine.scaled(4.0 / 3.0) + coarse.scaled(-1.0 / 3.0))
}

trait Norm {
    fn norm_value(&self) -> f64;
    fn scaled(self, k: f64) -> Self;
}

impl Norm for Vector3<f64> {
    fn norm_value(&self) -> f64 {
        self.norm()
    }

    fn scaled(self, k: f64) -> Self {
        self * k
    }
}

impl Norm for Mat2 {
    fn norm_value(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn scaled(self, k: f64) -> Self {
        self * c(k)
    }
}

/// Finite-difference derivative of the evolved Bloch vector.
pub fn param_derivative_bloch(
    it: &Interrogation,
    tag: ParameterTag,
    fd: &FiniteDifference,
) -> Result<Vector3<f64>> {
    central_difference(&it.channel, tag, fd, |gp| {
        it.with_channel(*gp).evolved().bloch()
    })
}

/// Finite-difference derivative of the Kraus-channel output density matrix.
pub fn param_derivative_density(
    it: &Interrogation,
    tag: ParameterTag,
    fd: &FiniteDifference,
) -> Result<Mat2> {
    let rho0 = it.probe.to_density();
    let t = it.time;
    central_difference(&it.channel, tag, fd, |gp| {
        kraus_for_time(gp, t)
            .expect("interrogation time is validated")
            .apply_to_density(&rho0)
    })
}

fn require_diagonal_probe(it: &Interrogation) -> Result<()> {
    if !it.probe.is_diagonal() {
        return Err(Error::contract(
            "closed-form QFI assumes a sigma_z-diagonal probe",
        ));
    }
    Ok(())
}

fn closed_ratio(numerator: f64, rz: f64) -> Result<f64> {
    let denom = 1.0 - rz * rz;
    if denom <= PURE_STATE_TOLERANCE {
        if numerator == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::singular(format!(
            "evolved state is pure (r_z = {rz}): information diverges"
        )));
    }
    Ok(numerator / denom)
}

/// `t^2 D^2 exp(-2 gamma t) / (1 - [tanh(y_eq) - D exp(-gamma t)]^2)`, with
/// `D = tanh(y_eq) - R_z`.
pub fn qfi_gamma_closed(it: &Interrogation) -> Result<f64> {
    require_diagonal_probe(it)?;
    let t = it.time;
    let delta = it.detuning();
    let decay = it.decay_factor();
    let rz = it.channel.equilibrium_rz() - delta * decay;
    closed_ratio(t * t * delta * delta * decay * decay, rz)
}

/// Closed-form temperature QFI.
pub fn qfi_temperature_closed(it: &Interrogation, variant: TemperatureVariant) -> Result<f64> {
    require_diagonal_probe(it)?;
    let gp = &it.channel;
    let temperature = gp.temperature()?;
    let wbar = gp.omega_bar();
    let decay = it.decay_factor();
    let gain = -(-gp.gamma() * it.time).exp_m1();
    let x = wbar / temperature;
    let sech2 = sech(x).powi(2);
    let weight = match variant {
        TemperatureVariant::SelfConsistent => sech2 * sech2,
        TemperatureVariant::AsPrinted => sech2,
    };
    let numerator = wbar * wbar * gain * gain * weight / temperature.powi(4);
    let rz = decay * it.probe.rz() + gain * x.tanh();
    closed_ratio(numerator, rz)
}

/// Closed-form QFI for either parameter (self-consistent temperature form).
pub fn qfi_closed(it: &Interrogation, tag: ParameterTag) -> Result<f64> {
    match tag {
        ParameterTag::DecayRate => qfi_gamma_closed(it),
        ParameterTag::Temperature => qfi_temperature_closed(it, TemperatureVariant::SelfConsistent),
    }
}

/// Bloch-formula QFI with a finite-difference derivative.
pub fn qfi_bloch_route(
    it: &Interrogation,
    tag: ParameterTag,
    fd: &FiniteDifference,
) -> Result<f64> {
    let dr = param_derivative_bloch(it, tag, fd)?;
    qfi_bloch(&it.evolved().bloch(), &dr)
}

/// Spectral SLD QFI on the Kraus-channel output.
pub fn qfi_sld_route(it: &Interrogation, tag: ParameterTag, fd: &FiniteDifference) -> Result<f64> {
    let rho = kraus_for_time(&it.channel, it.time)?.apply_to_density(&it.probe.to_density());
    let drho = param_derivative_density(it, tag, fd)?;
    Ok(qfi_sld(&rho, &drho))
}

pub fn qfi(it: &Interrogation, tag: ParameterTag, route: QfiRoute) -> Result<QfiReport> {
    let fd = FiniteDifference::default();
    let value = match route {
        QfiRoute::ClosedForm => qfi_closed(it, tag)?,
        QfiRoute::BlochFiniteDiff => qfi_bloch_route(it, tag, &fd)?,
        QfiRoute::SldSpectral => qfi_sld_route(it, tag, &fd)?,
    };
    let qfi = value.max(0.0);
    Ok(QfiReport {
        tag,
        route,
        qfi,
        crb_single_shot: crb_bound(qfi, 1)?,
    })
}

/// Classical Fisher information of a projective `sigma_z` readout.
pub fn cfi_sigma_z(it: &Interrogation, tag: ParameterTag) -> Result<f64> {
    let rz = it.evolved().rz();
    let drz = analytic_derivative(it, tag)?.z;
    cfi_from_polarization(rz, drz)
}

/// `sum_k (d p_k)^2 / p_k` for outcome probabilities `(1 +- r_z)/2`.
pub fn cfi_from_polarization(rz: f64, drz: f64) -> Result<f64> {
    let p0 = (1.0 + rz) / 2.0;
    let p1 = (1.0 - rz) / 2.0;
    if p0 <= OUTCOME_TOLERANCE || p1 <= OUTCOME_TOLERANCE {
        return Err(Error::singular(format!(
            "sigma_z outcome is deterministic (r_z = {rz})"
        )));
    }
    let dp0 = drz / 2.0;
    let dp1 = -drz / 2.0;
    Ok(dp0 * dp0 / p0 + dp1 * dp1 / p1)
}

/// `1 / (N I)`.
pub fn crb_bound(qfi: f64, n_shots: u64) -> Result<CrbBound> {
    if n_shots == 0 {
        return Err(Error::domain("number of shots must be at least 1"));
    }
    if !(qfi.is_finite() && qfi >= 0.0) {
        return Err(Error::domain(format!(
            "Fisher information must be finite and >= 0, got {qfi}"
        )));
    }
    if qfi == 0.0 {
        return Ok(CrbBound::Unbounded);
    }
    Ok(CrbBound::Finite(1.0 / (n_shots as f64 * qfi)))
}

/// Density-matrix view of a Bloch-vector derivative, `dr.sigma / 2`.
pub fn density_derivative(dr: &Vector3<f64>) -> Mat2 {
    (linalg::sigma_x() * c(dr.x) + linalg::sigma_y() * c(dr.y) + linalg::sigma_z() * c(dr.z))
        * c(0.5)
}
