//! Projective `sigma_z` readout, maximum-likelihood inversion of the
//! evolved polarization, and Monte Carlo Cramér–Rao experiments.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(master_seed)` and split into independent streams with
//! `set_stream`. Replica `r` of experiment point `i` uses stream
//! `(i << 32) | r`. Shot counts are drawn with the `rand_distr` binomial
//! sampler, so a given (seed, stream, crate versions) triple always yields
//! the same record.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{GadParams, Interrogation};
use crate::error::{Error, Result};
use crate::metrology::{crb_bound, qfi_closed, ParameterTag};
use crate::preparation::{rz_preparation, MeasurementStrengths};
use crate::state::QubitState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub n_shots: u64,
    /// Number of `|1>` outcomes.
    pub n_excited: u64,
    pub seed: u64,
    pub stream: u64,
}

impl ShotRecord {
    /// `1 - 2k/N`, the maximum-likelihood polarization.
    pub fn rz_hat(&self) -> f64 {
        1.0 - 2.0 * self.n_excited as f64 / self.n_shots as f64
    }
}

pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Measure `sigma_z` on `n` copies of `state`.
pub fn sample_shots(state: &QubitState, n: u64, seed: u64, stream: u64) -> Result<ShotRecord> {
    if n == 0 {
        return Err(Error::domain("at least one shot is required"));
    }
    let p_excited = ((1.0 - state.rz()) / 2.0).clamp(0.0, 1.0);
    let dist =
        Binomial::new(n, p_excited).map_err(|e| Error::domain(format!("binomial sampler: {e}")))?;
    let n_excited = dist.sample(&mut replica_rng(seed, stream));
    Ok(ShotRecord {
        n_shots: n,
        n_excited,
        seed,
        stream,
    })
}

/// Invert `r_z(t) = tanh(y_eq) - D exp(-gamma t)` for the decay rate.
pub fn gamma_from_polarization(rz_hat: f64, probe_rz: f64, y_eq: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!(
            "interrogation time must be > 0, got {t}"
        )));
    }
    let detuning = y_eq.tanh() - probe_rz;
    if detuning == 0.0 {
        return Err(Error::domain(
            "probe sits at the channel fixed point: the decay rate is unidentifiable",
        ));
    }
    let ratio = (y_eq.tanh() - rz_hat) / detuning;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::OutOfModel(format!(
            "decay factor {ratio} outside (0, 1] for observed r_z = {rz_hat}"
        )));
    }
    Ok(-ratio.ln() / t)
}

/// Invert `r_z(t) = e R_z + (1 - e) tanh(omega_bar / T)` for the temperature.
pub fn temperature_from_polarization(
    rz_hat: f64,
    probe_rz: f64,
    gamma: f64,
    omega: f64,
    t: f64,
) -> Result<f64> {
    let decay = (-gamma * t).exp();
    let gain = -(-gamma * t).exp_m1();
    if gain.is_nan() || gain <= 0.0 {
        return Err(Error::domain(
            "no thermalization has happened: 1 - exp(-gamma t) = 0",
        ));
    }
    let arg = (rz_hat - decay * probe_rz) / gain;
    if !(arg > 0.0 && arg < 1.0) {
        return Err(Error::OutOfModel(format!(
            "tanh(omega_bar / T) = {arg} outside (0, 1) for observed r_z = {rz_hat}"
        )));
    }
    Ok((omega / 2.0) / arg.atanh())
}

pub fn mle_gamma(
    rec: &ShotRecord,
    ms: MeasurementStrengths,
    y0: f64,
    y_eq: f64,
    t: f64,
) -> Result<f64> {
    gamma_from_polarization(rec.rz_hat(), rz_preparation(ms, y0), y_eq, t)
}

pub fn mle_temperature(
    rec: &ShotRecord,
    ms: MeasurementStrengths,
    y0: f64,
    gamma: f64,
    omega: f64,
    t: f64,
) -> Result<f64> {
    temperature_from_polarization(rec.rz_hat(), rz_preparation(ms, y0), gamma, omega, t)
}

/// One parameter point of a Cramér–Rao experiment: the true channel, the
/// probe polarization, and the interrogation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPoint {
    pub probe_rz: f64,
    pub channel: GadParams,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbConfig {
    pub tag: ParameterTag,
    pub points: Vec<ExperimentPoint>,
    pub n_shots: u64,
    pub replicas: usize,
    pub master_seed: u64,
    /// Replace sampled frequencies by the exact outcome probability.
    #[serde(default)]
    pub noiseless: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub point: ExperimentPoint,
    pub true_value: f64,
    /// Mean of the in-model estimates.
    pub estimate: f64,
    pub sample_variance: f64,
    pub bias: f64,
    pub qfi: f64,
    /// `1 / (N I)`, absent when the information vanishes.
    pub crb: Option<f64>,
    /// `sample_variance / crb`.
    pub crb_ratio: Option<f64>,
    pub n_valid: usize,
    pub n_out_of_model: usize,
}

fn estimate_one(tag: ParameterTag, point: &ExperimentPoint, rz_hat: f64) -> Result<f64> {
    let gp = &point.channel;
    match tag {
        ParameterTag::DecayRate => {
            gamma_from_polarization(rz_hat, point.probe_rz, gp.y_eq(), point.time)
        }
        ParameterTag::Temperature => temperature_from_polarization(
            rz_hat,
            point.probe_rz,
            gp.gamma(),
            gp.omega(),
            point.time,
        ),
    }
}

/// Run `replicas` independent shot records per point and summarize the
/// estimator against the Cramér–Rao bound. Out-of-model replicas are
/// counted and left out of the statistics.
pub fn crb_experiment(cfg: &CrbConfig) -> Result<Vec<EstimationResult>> {
    if cfg.replicas == 0 {
        return Ok(Vec::new());
    }
    if cfg.n_shots == 0 {
        return Err(Error::config("number of shots must be at least 1"));
    }
    if cfg.points.len() as u64 > u32::MAX as u64 || cfg.replicas as u64 > u32::MAX as u64 {
        return Err(Error::config(
            "too many points or replicas for the stream layout",
        ));
    }
    cfg.points
        .iter()
        .enumerate()
        .map(|(index, point)| run_point(cfg, index as u64, point))
        .collect()
}

fn run_point(cfg: &CrbConfig, index: u64, point: &ExperimentPoint) -> Result<EstimationResult> {
    let it = Interrogation::with_polarization(point.probe_rz, point.channel, point.time)?;
    let state = it.evolved();
    let true_value = match cfg.tag {
        ParameterTag::DecayRate => point.channel.gamma(),
        ParameterTag::Temperature => point.channel.temperature()?,
    };
    let outcomes: Vec<Result<f64>> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let rz_hat = if cfg.noiseless {
                state.rz()
            } else {
                sample_shots(
                    &state,
                    cfg.n_shots,
                    cfg.master_seed,
                    (index << 32) | replica,
                )?
                .rz_hat()
            };
            estimate_one(cfg.tag, point, rz_hat)
        })
        .collect();

    let mut estimates = Vec::with_capacity(outcomes.len());
    let mut n_out_of_model = 0;
    for outcome in outcomes {
        match outcome {
            Ok(v) => estimates.push(v),
            Err(Error::OutOfModel(_)) => n_out_of_model += 1,
            Err(e) => return Err(e),
        }
    }
    let n_valid = estimates.len();
    let (mean, variance) = mean_and_variance(&estimates);
    let qfi = qfi_closed(&it, cfg.tag)?;
    let crb = crb_bound(qfi, cfg.n_shots)?.value();
    Ok(EstimationResult {
        point: *point,
        true_value,
        estimate: mean,
        sample_variance: variance,
        bias: mean - true_value,
        qfi,
        crb,
        crb_ratio: crb.map(|b| variance / b),
        n_valid,
        n_out_of_model,
    })
}

/// Mean and unbiased sample variance; the variance of fewer than two
/// samples is zero.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gamma_point() -> ExperimentPoint {
        ExperimentPoint {
            probe_rz: -1.0,
            channel: GadParams::new(0.05, 1.0, 1.0).unwrap(),
            time: 10.0,
        }
    }

    #[test]
    fn deterministic_outcomes() {
        let up = QubitState::diagonal(1.0).unwrap();
        let down = QubitState::diagonal(-1.0).unwrap();
        for seed in 0..20 {
            assert_eq!(sample_shots(&up, 1000, seed, 0).unwrap().n_excited, 0);
            assert_eq!(sample_shots(&down, 1000, seed, 0).unwrap().n_excited, 1000);
        }
        assert!(sample_shots(&up, 0, 1, 0).is_err());
    }

    #[test]
    fn fair_coin_frequency() {
        let rec = sample_shots(&QubitState::maximally_mixed(), 1_000_000, 2024, 0).unwrap();
        let f = rec.n_excited as f64 / rec.n_shots as f64;
        assert!((0.4985..=0.5015).contains(&f), "frequency {f}");
    }

    #[test]
    fn same_seed_same_record() {
        let s = QubitState::diagonal(0.2).unwrap();
        let a = sample_shots(&s, 10_000, 99, 5).unwrap();
        let b = sample_shots(&s, 10_000, 99, 5).unwrap();
        let c = sample_shots(&s, 10_000, 99, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.n_excited, c.n_excited);
    }

    #[test]
    fn noiseless_inversions() {
        let p = gamma_point();
        let it = Interrogation::with_polarization(p.probe_rz, p.channel, p.time).unwrap();
        let g = gamma_from_polarization(it.evolved().rz(), -1.0, 1.0, 10.0).unwrap();
        assert_abs_diff_eq!(g, 0.05, epsilon = 1e-12);

        let gp = GadParams::from_temperature(0.05, 1.0, 1.0).unwrap();
        let it = Interrogation::with_polarization(1.0, gp, 20.0).unwrap();
        let t = temperature_from_polarization(it.evolved().rz(), 1.0, 0.05, 1.0, 20.0).unwrap();
        assert_abs_diff_eq!(t, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn record_based_estimators() {
        // 600 of 1000 excited: r_z = -0.2
        let rec = ShotRecord {
            n_shots: 1000,
            n_excited: 600,
            seed: 0,
            stream: 0,
        };
        let ms = MeasurementStrengths::new(1.0, 0.0).unwrap();
        let g = mle_gamma(&rec, ms, 1.0, 1.0, 10.0).unwrap();
        let expected = -((1f64.tanh() + 0.2) / (1f64.tanh() + 1.0)).ln() / 10.0;
        assert_abs_diff_eq!(g, expected, epsilon = 1e-15);

        let rec = ShotRecord {
            n_shots: 1000,
            n_excited: 200,
            seed: 0,
            stream: 0,
        };
        let ms = MeasurementStrengths::new(0.0, 1.0).unwrap();
        let t = mle_temperature(&rec, ms, 1.0, 0.05, 1.0, 20.0).unwrap();
        let e = (-1.0f64).exp();
        let expected = 0.5 / ((0.6 - e) / (1.0 - e)).atanh();
        assert_abs_diff_eq!(t, expected, epsilon = 1e-14);
    }

    #[test]
    fn estimator_errors() {
        assert!(matches!(
            gamma_from_polarization(0.3, 1f64.tanh(), 1.0, 10.0),
            Err(Error::Domain(_))
        ));
        assert!(gamma_from_polarization(0.3, -1.0, 1.0, 0.0).is_err());
        // observed polarization beyond the fixed point
        assert!(matches!(
            gamma_from_polarization(0.9, -1.0, 1.0, 10.0),
            Err(Error::OutOfModel(_))
        ));
        assert!(matches!(
            temperature_from_polarization(1.0, 1.0, 0.05, 1.0, 20.0),
            Err(Error::OutOfModel(_))
        ));
        assert!(matches!(
            temperature_from_polarization(0.2, 1.0, 0.05, 1.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn inversion_maps_are_monotone() {
        let mut last = f64::NEG_INFINITY;
        for k in 0..200 {
            let rz = -0.99 + k as f64 * 0.0088;
            if let Ok(g) = gamma_from_polarization(rz, -1.0, 1.0, 10.0) {
                assert!(g > last);
                last = g;
            }
        }
        let mut last = f64::INFINITY;
        for k in 0..200 {
            let rz = 0.37 + k as f64 * 0.003;
            if let Ok(t) = temperature_from_polarization(rz, 1.0, 0.05, 1.0, 20.0) {
                assert!(t < last);
                last = t;
            }
        }
    }

    #[test]
    fn empty_and_noiseless_experiments() {
        let mut cfg = CrbConfig {
            tag: ParameterTag::DecayRate,
            points: vec![gamma_point()],
            n_shots: 1000,
            replicas: 0,
            master_seed: 1,
            noiseless: false,
        };
        assert!(crb_experiment(&cfg).unwrap().is_empty());
        cfg.replicas = 1;
        cfg.noiseless = true;
        let res = crb_experiment(&cfg).unwrap();
        assert_eq!(res.len(), 1);
        assert_abs_diff_eq!(res[0].bias, 0.0, epsilon = 1e-12);
        assert_eq!(res[0].sample_variance, 0.0);
    }

    #[test]
    fn bias_shrinks_with_shots() {
        let run = |n| {
            let cfg = CrbConfig {
                tag: ParameterTag::DecayRate,
                points: vec![gamma_point()],
                n_shots: n,
                replicas: 4000,
                master_seed: 77,
                noiseless: false,
            };
            crb_experiment(&cfg).unwrap()[0]
        };
        let small = run(1_000);
        let large = run(100_000);
        assert!(large.bias.abs() * 2.0 <= small.bias.abs());
        assert_eq!(small.n_out_of_model, 0);
    }

    #[test]
    fn experiments_are_reproducible() {
        let cfg = CrbConfig {
            tag: ParameterTag::DecayRate,
            points: vec![
                gamma_point(),
                ExperimentPoint {
                    time: 20.0,
                    ..gamma_point()
                },
            ],
            n_shots: 5000,
            replicas: 300,
            master_seed: 4242,
            noiseless: false,
        };
        let a = crb_experiment(&cfg).unwrap();
        let b = crb_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].estimate, a[1].estimate);
    }

    #[test]
    fn variance_helper() {
        assert_eq!(mean_and_variance(&[2.0]), (2.0, 0.0));
        let (m, v) = mean_and_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_abs_diff_eq!(v, 5.0 / 3.0, epsilon = 1e-15);
    }
}
