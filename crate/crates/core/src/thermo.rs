//! Energy change during interrogation, the kinetic and thermal
//! susceptibilities, and their link to the QFI through the Hamiltonian
//! variance: `I = chi^2 / Var(H)`.

use serde::{Deserialize, Serialize};

use crate::channel::Interrogation;
use crate::error::{Error, Result};
use crate::metrology::{sech, ParameterTag};
use crate::state::QubitState;

/// Variance at or below this is treated as a pure evolved state.
pub const VARIANCE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    pub delta_u: f64,
    pub chi_t: f64,
    pub chi_gamma: f64,
    pub var_h: f64,
    /// `chi^2 / Var(H)` for the decay rate; `None` at a pure evolved state.
    pub qfi_gamma_from_identity: Option<f64>,
    /// Same for the temperature.
    pub qfi_t_from_identity: Option<f64>,
}

/// `-(omega/2) D (1 - exp(-gamma t))` with `D = tanh(y_eq) - R_z`.
pub fn energy_change(it: &Interrogation) -> f64 {
    let gain = -(-it.channel.gamma() * it.time).exp_m1();
    -(it.channel.omega() / 2.0) * it.detuning() * gain
}

/// `<H>` of a state for `H = -(omega/2) sigma_z`.
pub fn mean_energy(state: &QubitState, omega: f64) -> f64 {
    -(omega / 2.0) * state.sigma_z_expectation()
}

/// Derivative of [`energy_change`] with respect to the tagged parameter.
///
/// The temperature susceptibility `(omega/2)(1 - e^{-gamma t}) sech^2(omega_bar/T)
/// omega_bar / T^2` does not depend on the prepared probe.
pub fn susceptibility(it: &Interrogation, tag: ParameterTag) -> Result<f64> {
    let gp = &it.channel;
    let t = it.time;
    let half_omega = gp.omega() / 2.0;
    match tag {
        ParameterTag::DecayRate => Ok(-half_omega * it.detuning() * t * it.decay_factor()),
        ParameterTag::Temperature => {
            let temperature = gp.temperature()?;
            let wbar = gp.omega_bar();
            let gain = -(-gp.gamma() * t).exp_m1();
            Ok(half_omega * gain * sech(wbar / temperature).powi(2) * wbar
                / (temperature * temperature))
        }
    }
}

/// Equilibrium heat capacity `(omega_bar omega / 2 T^2) sech^2(omega_bar / T)`,
/// the long-time limit of the temperature susceptibility.
pub fn equilibrium_heat_capacity(omega: f64, temperature: f64) -> f64 {
    let wbar = omega / 2.0;
    wbar * omega / (2.0 * temperature * temperature) * sech(wbar / temperature).powi(2)
}

/// `<H^2> - <H>^2 = (omega^2 / 4)(1 - r_z^2)`.
pub fn hamiltonian_variance(state: &QubitState, omega: f64) -> f64 {
    let rz = state.rz();
    omega * omega / 4.0 * (1.0 - rz * rz)
}

/// QFI recovered from the susceptibility and the energy variance of the
/// evolved state.
pub fn qfi_identity(it: &Interrogation, tag: ParameterTag) -> Result<f64> {
    let var = hamiltonian_variance(&it.evolved(), it.channel.omega());
    if var <= VARIANCE_TOLERANCE {
        return Err(Error::singular(format!(
            "energy variance {var:e} vanishes at a pure evolved state"
        )));
    }
    let chi = susceptibility(it, tag)?;
    Ok(chi * chi / var)
}

pub fn thermo_report(it: &Interrogation) -> Result<ThermoReport> {
    let var_h = hamiltonian_variance(&it.evolved(), it.channel.omega());
    Ok(ThermoReport {
        delta_u: energy_change(it),
        chi_t: susceptibility(it, ParameterTag::Temperature)?,
        chi_gamma: susceptibility(it, ParameterTag::DecayRate)?,
        var_h,
        qfi_gamma_from_identity: qfi_identity(it, ParameterTag::DecayRate).ok(),
        qfi_t_from_identity: qfi_identity(it, ParameterTag::Temperature).ok(),
    })
}
