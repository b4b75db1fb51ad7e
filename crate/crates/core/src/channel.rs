//! Generalized amplitude damping dynamics.
//!
//! Three routes to the same map are provided and cross-checked in tests:
//! the closed-form Bloch solution, the four-operator Kraus form, and RK4
//! integration of the Lindblad master equation.
//!
//! The channel's decay rate `gamma` is the rate at which the longitudinal
//! polarization relaxes, `r_z(t) - tanh(y_eq) ~ exp(-gamma t)`. The master
//! equation is written with a microscopic rate `gamma_m`, and the two are
//! related by `gamma = gamma_m (2 n + 1)` with `n` the bath occupation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat2, I, ZERO};
use crate::preparation::{prepare_probe, KrausSet, MeasurementStrengths};
use crate::state::QubitState;

/// Channel parameters: decay rate, inverse bath temperature `y_eq =
/// omega / (2 T)`, and probe frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GadParams {
    gamma: f64,
    y_eq: f64,
    omega: f64,
}

impl GadParams {
    pub fn new(gamma: f64, y_eq: f64, omega: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::domain(format!(
                "decay rate must be finite and >= 0, got {gamma}"
            )));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::domain(format!(
                "frequency must be finite and > 0, got {omega}"
            )));
        }
        if !y_eq.is_finite() {
            return Err(Error::domain(format!("y_eq must be finite, got {y_eq}")));
        }
        Ok(Self { gamma, y_eq, omega })
    }

    /// Parameters from a bath temperature instead of `y_eq`.
    pub fn from_temperature(gamma: f64, temperature: f64, omega: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::domain(format!(
                "temperature must be > 0, got {temperature}"
            )));
        }
        Self::new(gamma, omega / (2.0 * temperature), omega)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn y_eq(&self) -> f64 {
        self.y_eq
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `omega / 2`, so that `y_eq = omega_bar / T`.
    pub fn omega_bar(&self) -> f64 {
        self.omega / 2.0
    }

    /// Bath temperature `omega_bar / y_eq`; only defined for `y_eq > 0`.
    pub fn temperature(&self) -> Result<f64> {
        if self.y_eq <= 0.0 {
            return Err(Error::domain(format!(
                "temperature is not positive and finite for y_eq = {}",
                self.y_eq
            )));
        }
        Ok(self.omega_bar() / self.y_eq)
    }

    /// Stationary polarization `tanh(y_eq)`.
    pub fn equilibrium_rz(&self) -> f64 {
        self.y_eq.tanh()
    }

    /// Mean bath occupation `1 / (exp(2 y_eq) - 1)`.
    pub fn mean_occupation(&self) -> f64 {
        1.0 / (2.0 * self.y_eq).exp_m1()
    }

    /// Ground-state weight of the bath, `exp(y_eq) / (2 cosh y_eq)`.
    pub fn ground_weight(&self) -> f64 {
        1.0 / (1.0 + (-2.0 * self.y_eq).exp())
    }

    /// Microscopic rate `gamma / (2 n + 1)` for the master equation.
    pub fn microscopic_rate(&self) -> f64 {
        self.gamma * self.y_eq.tanh()
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(gamma, self.y_eq, self.omega)
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::from_temperature(self.gamma, temperature, self.omega)
    }
}

/// A probe state exposed to the channel for an interrogation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interrogation {
    pub probe: QubitState,
    pub channel: GadParams,
    pub time: f64,
}

impl Interrogation {
    pub fn new(probe: QubitState, channel: GadParams, time: f64) -> Result<Self> {
        check_time(time)?;
        Ok(Self {
            probe,
            channel,
            time,
        })
    }

    /// Probe prepared by measurements of strength `ms` on a thermal state at `y0`.
    pub fn prepared(
        ms: MeasurementStrengths,
        y0: f64,
        channel: GadParams,
        time: f64,
    ) -> Result<Self> {
        Self::new(prepare_probe(ms, y0)?, channel, time)
    }

    /// A `sigma_z`-diagonal probe with polarization `rz`.
    pub fn with_polarization(rz: f64, channel: GadParams, time: f64) -> Result<Self> {
        Self::new(QubitState::diagonal(rz)?, channel, time)
    }

    /// `tanh(y_eq) - R_z`: distance of the probe polarization from the
    /// channel's fixed point.
    pub fn detuning(&self) -> f64 {
        self.channel.equilibrium_rz() - self.probe.rz()
    }

    pub fn decay_factor(&self) -> f64 {
        (-self.channel.gamma * self.time).exp()
    }

    pub fn evolved(&self) -> QubitState {
        evolve_unchecked(&self.probe, &self.channel, self.time)
    }

    pub fn with_channel(&self, channel: GadParams) -> Self {
        Self { channel, ..*self }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!(
            "interrogation time must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

/// Closed-form evolution: `r_z` relaxes to `tanh(y_eq)` as `exp(-gamma t)`
/// and the transverse components shrink by `exp(-gamma t / 2)`.
///
/// The result is expressed in the frame co-rotating with the probe
/// Hamiltonian, so there is no precession about `z`.
pub fn evolve_analytic(state: &QubitState, gp: &GadParams, t: f64) -> Result<QubitState> {
    check_time(t)?;
    Ok(evolve_unchecked(state, gp, t))
}

pub(crate) fn evolve_unchecked(state: &QubitState, gp: &GadParams, t: f64) -> QubitState {
    let r = state.bloch();
    let decay = (-gp.gamma * t).exp();
    let transverse = (-gp.gamma * t / 2.0).exp();
    let eq = gp.equilibrium_rz();
    let rz = eq + (r.z - eq) * decay;
    QubitState::new(nalgebra::Vector3::new(
        r.x * transverse,
        r.y * transverse,
        rz,
    ))
    .expect("the channel maps the Bloch ball into itself")
}

/// The four GAD Kraus operators for damping `gamma_d` and bath ground
/// weight `lambda_pop`.
pub fn kraus_gad(gamma_d: f64, lambda_pop: f64) -> Result<KrausSet> {
    if !(0.0..=1.0).contains(&gamma_d) {
        return Err(Error::domain(format!("damping {gamma_d} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&lambda_pop) {
        return Err(Error::domain(format!(
            "population {lambda_pop} outside [0, 1]"
        )));
    }
    let a = lambda_pop.sqrt();
    let b = (1.0 - lambda_pop).sqrt();
    let keep = (1.0 - gamma_d).sqrt();
    let jump = gamma_d.sqrt();
    KrausSet::new(vec![
        Mat2::new(c(a), ZERO, ZERO, c(a * keep)),
        Mat2::new(ZERO, c(a * jump), ZERO, ZERO),
        Mat2::new(c(b * keep), ZERO, ZERO, c(b)),
        Mat2::new(ZERO, ZERO, c(b * jump), ZERO),
    ])
}

/// Kraus form of the channel after time `t`: `gamma_d = 1 - exp(-gamma t)`.
pub fn kraus_for_time(gp: &GadParams, t: f64) -> Result<KrausSet> {
    check_time(t)?;
    kraus_gad(-(-gp.gamma * t).exp_m1(), gp.ground_weight())
}

/// Which frame the master equation is integrated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Frame {
    /// Frame co-rotating with `H`; the commutator term drops out and the
    /// result is directly comparable with [`evolve_analytic`].
    #[default]
    Rotating,
    /// Laboratory frame, including `-i[H, rho]`.
    Lab,
}

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladConfig {
    pub dt: f64,
    #[serde(default)]
    pub frame: Frame,
}

impl LindbladConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            frame: Frame::Rotating,
        }
    }

    pub fn lab_frame(mut self) -> Self {
        self.frame = Frame::Lab;
        self
    }

    /// The step must resolve the fastest rate in the generator:
    /// `dt * gamma_m (2 n + 1) < 0.1`, plus `dt * omega < 0.1` in the lab frame.
    pub fn validate(&self, gp: &GadParams) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!(
                "time step must be > 0, got {}",
                self.dt
            )));
        }
        let mut fastest = gp.gamma;
        if self.frame == Frame::Lab {
            fastest = fastest.max(gp.omega);
        }
        if self.dt * fastest >= 0.1 {
            return Err(Error::config(format!(
                "time step {} too large for rate {fastest} (need dt * rate < 0.1)",
                self.dt
            )));
        }
        Ok(())
    }
}

fn dissipator(a: &Mat2, rho: &Mat2) -> Mat2 {
    let ad = a.adjoint();
    a * rho * ad - linalg::anticommutator(&(ad * a), rho) * c(0.5)
}

/// `-i[H, rho] + down D[sigma_-] rho + up D[sigma_+] rho`, with
/// `H = -(omega/2) sigma_z`.
fn generator(rho: &Mat2, omega: f64, down: f64, up: f64) -> Mat2 {
    let mut out = dissipator(&linalg::sigma_minus(), rho) * c(down)
        + dissipator(&linalg::sigma_plus(), rho) * c(up);
    if omega != 0.0 {
        let h = linalg::sigma_z() * c(-omega / 2.0);
        out += linalg::commutator(&h, rho) * (-I);
    }
    out
}

/// Right-hand side of the master equation for microscopic rate `gamma_micro`.
///
/// The bath occupation comes from `gp.y_eq`, so `y_eq > 0` is needed for
/// finite rates.
pub fn lindblad_rhs(rho: &Mat2, gp: &GadParams, gamma_micro: f64) -> Mat2 {
    let n = gp.mean_occupation();
    generator(rho, gp.omega, gamma_micro * (n + 1.0), gamma_micro * n)
}

/// Integrate the master equation with `gamma_m = gamma / (2 n + 1)` using
/// classical fixed-step RK4.
///
/// The emission and absorption rates are evaluated as `gamma * lambda` and
/// `gamma * (1 - lambda)`, which equal `gamma_m (n + 1)` and `gamma_m n`
/// and stay finite at `y_eq = 0`.
pub fn integrate_lindblad(
    state: &QubitState,
    gp: &GadParams,
    t: f64,
    cfg: &LindbladConfig,
) -> Result<QubitState> {
    let rho = integrate_density(&state.to_density(), gp, t, cfg, |_| {})?;
    QubitState::from_density(&rho)
}

/// Same as [`integrate_lindblad`] on a density matrix; `observe` sees the
/// state after every step.
pub fn integrate_density(
    rho0: &Mat2,
    gp: &GadParams,
    t: f64,
    cfg: &LindbladConfig,
    mut observe: impl FnMut(&Mat2),
) -> Result<Mat2> {
    check_time(t)?;
    cfg.validate(gp)?;
    let lambda = gp.ground_weight();
    let down = gp.gamma * lambda;
    let up = gp.gamma * (1.0 - lambda);
    let omega = match cfg.frame {
        Frame::Rotating => 0.0,
        Frame::Lab => gp.omega,
    };
    let f = |rho: &Mat2| generator(rho, omega, down, up);

    let steps = (t / cfg.dt).ceil() as usize;
    let mut rho = *rho0;
    if steps == 0 {
        return Ok(rho);
    }
    let h = t / steps as f64;
    let half = c(h / 2.0);
    let sixth = c(h / 6.0);
    for _ in 0..steps {
        let k1 = f(&rho);
        let k2 = f(&(rho + k1 * half));
        let k3 = f(&(rho + k2 * half));
        let k4 = f(&(rho + k3 * c(h)));
        rho += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * sixth;
        observe(&rho);
    }
    Ok(rho)
}

/// Free precession under `H = -(omega/2) sigma_z` for time `t`: maps a
/// rotating-frame state to the lab frame.
pub fn precess(state: &QubitState, omega: f64, t: f64) -> QubitState {
    let r = state.bloch();
    // rho_01 = (r_x - i r_y)/2 picks up exp(i omega t)
    let (s, co) = (omega * t).sin_cos();
    let x = r.x * co + r.y * s;
    let y = r.y * co - r.x * s;
    QubitState::new(nalgebra::Vector3::new(x, y, r.z)).expect("rotation keeps the norm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gp(gamma: f64, y_eq: f64) -> GadParams {
        GadParams::new(gamma, y_eq, 1.0).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng) -> QubitState {
        loop {
            let v = nalgebra::Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() <= 1.0 {
                return QubitState::new(v).unwrap();
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(GadParams::new(-0.1, 1.0, 1.0).is_err());
        assert!(GadParams::new(0.1, 1.0, 0.0).is_err());
        assert!(GadParams::new(0.1, f64::NAN, 1.0).is_err());
        let p = GadParams::from_temperature(0.05, 1.0, 1.0).unwrap();
        assert_eq!(p.y_eq(), 0.5);
        assert_eq!(p.temperature().unwrap(), 1.0);
        assert!(gp(0.05, 0.0).temperature().is_err());
        let n = gp(0.05, 1.0).mean_occupation();
        assert_abs_diff_eq!(1.0 / (2.0 * n + 1.0), 1f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            2.0 * gp(0.05, 1.0).ground_weight() - 1.0,
            1f64.tanh(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn analytic_examples() {
        let p = gp(0.05, 1.0);
        let s = QubitState::from_components(0.2, 0.1, -0.5).unwrap();
        assert_eq!(evolve_analytic(&s, &p, 0.0).unwrap(), s);
        let late = evolve_analytic(&s, &p, 1e4).unwrap();
        assert_abs_diff_eq!(late.rz(), 1f64.tanh(), epsilon = 1e-15);

        let south = QubitState::diagonal(-1.0).unwrap();
        let out = evolve_analytic(&south, &p, 10.0).unwrap();
        let expected = 1f64.tanh() - (1.0 + 1f64.tanh()) * (-0.5f64).exp();
        assert_abs_diff_eq!(out.rz(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(out.rz(), -0.3068667096, epsilon = 1e-9);
        assert!(evolve_analytic(&south, &p, -1.0).is_err());
    }

    #[test]
    fn gad_kraus_limits() {
        let id = kraus_gad(0.0, 0.3).unwrap();
        let s = QubitState::from_components(0.3, -0.4, 0.2).unwrap();
        let out = id.apply(&s).unwrap();
        assert!((out.bloch() - s.bloch()).amax() < 1e-15);

        let full = kraus_gad(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(full.apply(&s).unwrap().rz(), 1.0, epsilon = 1e-15);
        assert!(kraus_gad(1.2, 0.5).is_err());
        assert!(kraus_gad(0.5, -0.5).is_err());

        for lambda in [0.0, 0.2, 0.9] {
            let k = kraus_gad(1.0, lambda).unwrap();
            assert_abs_diff_eq!(
                k.apply(&s).unwrap().rz(),
                2.0 * lambda - 1.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn kraus_matches_analytic_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = gp(rng.random_range(0.0..0.2), rng.random_range(-1.0..3.0));
            let t = rng.random_range(0.0..40.0);
            let s = random_state(&mut rng);
            let a = evolve_analytic(&s, &p, t).unwrap();
            let k = kraus_for_time(&p, t).unwrap().apply(&s).unwrap();
            assert!((a.bloch() - k.bloch()).amax() < 1e-12);
        }
    }

    #[test]
    fn rhs_examples() {
        let p = gp(0.05, 1.0);
        let thermal = QubitState::thermal(1.0).unwrap().to_density();
        let rhs = lindblad_rhs(&thermal, &p, p.microscopic_rate());
        assert!(rhs.iter().all(|z| z.norm() < 1e-14));

        let excited = QubitState::diagonal(-1.0).unwrap().to_density();
        let cold = gp(0.05, 40.0);
        assert!(cold.mean_occupation() < 1e-30);
        let g = 0.3;
        let d = lindblad_rhs(&excited, &cold, g);
        let drz = (d[(0, 0)] - d[(1, 1)]).re;
        assert_abs_diff_eq!(drz, 2.0 * g, epsilon = 1e-15);
        assert!(d.trace().norm() < 1e-15);

        // zero occupation leaves only the emission term
        let s = QubitState::from_components(0.3, 0.2, 0.1)
            .unwrap()
            .to_density();
        let ad = dissipator(&linalg::sigma_minus(), &s) * c(g)
            + linalg::commutator(&(linalg::sigma_z() * c(-0.5)), &s) * (-I);
        assert!(linalg::max_abs_diff(&lindblad_rhs(&s, &cold, g), &ad) < 1e-16);
    }

    #[test]
    fn integrator_examples() {
        let p = gp(0.05, 1.0);
        let cfg = LindbladConfig::new(1e-3 / p.gamma());
        let south = QubitState::diagonal(-1.0).unwrap();
        assert_eq!(integrate_lindblad(&south, &p, 0.0, &cfg).unwrap(), south);
        let out = integrate_lindblad(&south, &p, 10.0, &cfg).unwrap();
        assert_abs_diff_eq!(out.rz(), -0.3068667096, epsilon = 1e-9);
        assert_abs_diff_eq!(
            out.rz(),
            evolve_analytic(&south, &p, 10.0).unwrap().rz(),
            epsilon = 1e-8
        );

        let long = integrate_lindblad(&south, &p, 400.0, &LindbladConfig::new(0.5)).unwrap();
        assert_abs_diff_eq!(long.rz(), 1f64.tanh(), epsilon = 1e-6);
    }

    #[test]
    fn integrator_guard() {
        let p = gp(0.05, 1.0);
        assert!(matches!(
            integrate_lindblad(
                &QubitState::maximally_mixed(),
                &p,
                1.0,
                &LindbladConfig::new(2.0)
            ),
            Err(Error::Config(_))
        ));
        assert!(LindbladConfig::new(0.0).validate(&p).is_err());
        assert!(LindbladConfig::new(0.5).lab_frame().validate(&p).is_err());
        assert!(LindbladConfig::new(0.05).lab_frame().validate(&p).is_ok());
    }

    #[test]
    fn lab_frame_is_precessed_rotating_frame() {
        let p = gp(0.1, 0.7);
        let s = QubitState::from_components(0.6, -0.2, 0.3).unwrap();
        let t = 3.0;
        let lab = integrate_lindblad(&s, &p, t, &LindbladConfig::new(1e-3).lab_frame()).unwrap();
        let rot = evolve_analytic(&s, &p, t).unwrap();
        let expect = precess(&rot, p.omega(), t);
        assert!((lab.bloch() - expect.bloch()).amax() < 1e-10);
    }

    #[test]
    fn trajectories_stay_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = gp(0.2, 0.4);
        let cfg = LindbladConfig::new(0.05);
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let mut worst_trace = 0.0_f64;
            let mut worst_herm = 0.0_f64;
            let mut worst_eig = 0.0_f64;
            integrate_density(&s.to_density(), &p, 10.0, &cfg, |rho| {
                worst_trace = worst_trace.max((rho.trace() - c(1.0)).norm());
                worst_herm = worst_herm.max(linalg::hermiticity_defect(rho));
                worst_eig = worst_eig.min(linalg::min_eigenvalue(&linalg::to_dynamic(rho)));
            })
            .unwrap();
            assert!(worst_trace < 1e-12);
            assert!(worst_herm < 1e-12);
            assert!(worst_eig >= -1e-10);
        }
    }

    proptest! {
        #[test]
        fn semigroup(
            rz in -1.0..=1.0f64, rx in -0.5..0.5f64,
            g in 0.0..0.3f64, y in -1.0..2.0f64,
            t1 in 0.0..20.0f64, t2 in 0.0..20.0f64,
        ) {
            let rz = rz * (1.0 - rx * rx).sqrt();
            let s = QubitState::from_components(rx, 0.0, rz).unwrap();
            let p = gp(g, y);
            let two = evolve_analytic(&evolve_analytic(&s, &p, t1).unwrap(), &p, t2).unwrap();
            let one = evolve_analytic(&s, &p, t1 + t2).unwrap();
            prop_assert!((two.bloch() - one.bloch()).amax() <= 1e-12);
        }

        #[test]
        fn contracts_toward_fixed_point(
            rz in -1.0..=1.0f64, g in 0.0..0.3f64, y in 0.0..2.0f64,
            t1 in 0.0..30.0f64, dt in 0.0..30.0f64,
        ) {
            let s = QubitState::diagonal(rz).unwrap();
            let p = gp(g, y);
            let eq = p.equilibrium_rz();
            let a = (evolve_analytic(&s, &p, t1).unwrap().rz() - eq).abs();
            let b = (evolve_analytic(&s, &p, t1 + dt).unwrap().rz() - eq).abs();
            prop_assert!(b <= a + 1e-15);
        }
    }
}
