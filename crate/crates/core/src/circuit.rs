//! Dense density-matrix simulation of the four-qubit preparation and
//! interrogation circuit.
//!
//! Qubit 0 is the probe, qubits 1 and 2 are the ancillas that realize the
//! first and second generalized measurements, and qubit 3 is a thermal
//! ancilla standing in for the bath. Each non-selective operation is a
//! unitary on (probe, ancilla) followed by discarding the ancilla, so the
//! probe's reduced state must reproduce the Kraus channels exactly.
//!
//! Qubit `k` of an `n`-qubit register is bit `n - 1 - k` of the basis index
//! (qubit 0 is the most significant).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::channel::GadParams;
use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat2, MatN, ONE, ZERO};
use crate::preparation::MeasurementStrengths;
use crate::state::QubitState;

pub const MAX_QUBITS: usize = 4;

const STATE_TOLERANCE: f64 = 1e-12;
const EIGEN_TOLERANCE: f64 = 1e-10;
const UNITARY_TOLERANCE: f64 = 1e-12;
const FRESHNESS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiQubitState {
    n_qubits: usize,
    rho: MatN,
}

impl MultiQubitState {
    pub fn new(n_qubits: usize, rho: MatN) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::domain(format!(
                "register size {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let dim = 1 << n_qubits;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::InvalidState(format!(
                "expected a {dim}x{dim} matrix, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let state = Self { n_qubits, rho };
        state.validate()?;
        Ok(state)
    }

    /// Tensor product of single-qubit density matrices, qubit 0 first.
    pub fn product(qubits: &[Mat2]) -> Result<Self> {
        let mut rho = MatN::from_element(1, 1, ONE);
        for q in qubits {
            rho = rho.kronecker(&linalg::to_dynamic(q));
        }
        Self::new(qubits.len(), rho)
    }

    pub fn from_qubits(qubits: &[QubitState]) -> Result<Self> {
        let mats: Vec<Mat2> = qubits.iter().map(QubitState::to_density).collect();
        Self::product(&mats)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn density(&self) -> &MatN {
        &self.rho
    }

    /// Trace 1, Hermitian, and eigenvalues at least `-1e-10`.
    pub fn validate(&self) -> Result<()> {
        let trace = self.rho.trace();
        if (trace - ONE).norm() > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {trace} is not 1")));
        }
        let defect = linalg::hermiticity_defect(&self.rho);
        if defect > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "Hermiticity defect {defect:e}"
            )));
        }
        let min_eigenvalue = linalg::min_eigenvalue(&self.rho);
        if min_eigenvalue < -EIGEN_TOLERANCE {
            return Err(Error::NonPhysicalState { min_eigenvalue });
        }
        Ok(())
    }

    /// The single-qubit state of a one-qubit register.
    pub fn to_qubit(&self) -> Result<QubitState> {
        if self.n_qubits != 1 {
            return Err(Error::contract(format!(
                "expected a single qubit, register has {}",
                self.n_qubits
            )));
        }
        let m = Mat2::new(
            self.rho[(0, 0)],
            self.rho[(0, 1)],
            self.rho[(1, 0)],
            self.rho[(1, 1)],
        );
        QubitState::from_density(&m)
    }
}

fn bit(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// Gates on qubit indices of a register.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    X {
        target: usize,
    },
    Rx {
        target: usize,
        theta: f64,
    },
    Ry {
        target: usize,
        theta: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// `R_y(theta)` on `target` when `control` is in `|control_value>`.
    ControlledRy {
        control: usize,
        control_value: u8,
        target: usize,
        theta: f64,
    },
    /// An arbitrary matrix on `targets`, `targets[0]` most significant.
    Unitary {
        targets: Vec<usize>,
        matrix: MatN,
    },
}

fn rx(theta: f64) -> MatN {
    let (s, co) = (theta / 2.0).sin_cos();
    MatN::from_row_slice(2, 2, &[c(co), -linalg::I * s, -linalg::I * s, c(co)])
}

fn ry(theta: f64) -> MatN {
    let (s, co) = (theta / 2.0).sin_cos();
    MatN::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

fn controlled(u: &MatN, control_value: u8) -> MatN {
    let mut m = MatN::identity(4, 4);
    let offset = if control_value == 0 { 0 } else { 2 };
    for i in 0..2 {
        for j in 0..2 {
            m[(offset + i, offset + j)] = u[(i, j)];
        }
    }
    m
}

impl Gate {
    /// Qubits the gate acts on and its local matrix.
    pub fn local(&self) -> Result<(Vec<usize>, MatN)> {
        Ok(match self {
            Gate::X { target } => (
                vec![*target],
                MatN::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            ),
            Gate::Rx { target, theta } => (vec![*target], rx(*theta)),
            Gate::Ry { target, theta } => (vec![*target], ry(*theta)),
            Gate::Cnot { control, target } => {
                let x = MatN::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
                (vec![*control, *target], controlled(&x, 1))
            }
            Gate::ControlledRy {
                control,
                control_value,
                target,
                theta,
            } => {
                if *control_value > 1 {
                    return Err(Error::contract(format!(
                        "control value {control_value} is not 0 or 1"
                    )));
                }
                (
                    vec![*control, *target],
                    controlled(&ry(*theta), *control_value),
                )
            }
            Gate::Unitary { targets, matrix } => (targets.clone(), matrix.clone()),
        })
    }

    /// Same gate with qubit indices mapped through `map`.
    pub fn relabel(&self, map: &[usize]) -> Gate {
        match self.clone() {
            Gate::X { target } => Gate::X {
                target: map[target],
            },
            Gate::Rx { target, theta } => Gate::Rx {
                target: map[target],
                theta,
            },
            Gate::Ry { target, theta } => Gate::Ry {
                target: map[target],
                theta,
            },
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map[control],
                target: map[target],
            },
            Gate::ControlledRy {
                control,
                control_value,
                target,
                theta,
            } => Gate::ControlledRy {
                control: map[control],
                control_value,
                target: map[target],
                theta,
            },
            Gate::Unitary { targets, matrix } => Gate::Unitary {
                targets: targets.into_iter().map(|t| map[t]).collect(),
                matrix,
            },
        }
    }
}

/// Embed a gate on `targets` into the full register.
fn embed(n: usize, targets: &[usize], local: &MatN) -> MatN {
    let dim = 1 << n;
    let m = targets.len();
    let sub = |index: usize| -> usize {
        targets
            .iter()
            .fold(0, |acc, &q| (acc << 1) | bit(index, q, n))
    };
    let mask: usize = targets.iter().map(|&q| 1 << (n - 1 - q)).sum();
    let mut full = MatN::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if i & !mask == j & !mask {
                full[(i, j)] = local[(sub(i), sub(j))];
            }
        }
    }
    debug_assert_eq!(local.nrows(), 1 << m);
    full
}

/// `rho -> U rho U^dagger`.
pub fn apply_gate(state: &MultiQubitState, gate: &Gate) -> Result<MultiQubitState> {
    let n = state.n_qubits;
    let (targets, local) = gate.local()?;
    if targets.is_empty() || targets.iter().any(|&q| q >= n) {
        return Err(Error::contract(format!(
            "gate targets {targets:?} invalid for a {n}-qubit register"
        )));
    }
    let mut seen = targets.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != targets.len() {
        return Err(Error::contract(format!(
            "gate targets {targets:?} repeat a qubit"
        )));
    }
    if local.nrows() != 1 << targets.len() || !linalg::is_unitary(&local, UNITARY_TOLERANCE) {
        return Err(Error::contract("gate matrix is not unitary on its targets"));
    }
    let u = embed(n, &targets, &local);
    let rho = &u * &state.rho * u.adjoint();
    Ok(MultiQubitState { n_qubits: n, rho })
}

/// Reduced state on `keep` (kept qubits in increasing order).
pub fn partial_trace(state: &MultiQubitState, keep: &[usize]) -> Result<MultiQubitState> {
    let n = state.n_qubits;
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::domain("partial trace must keep at least one qubit"));
    }
    if keep.iter().any(|&q| q >= n) {
        return Err(Error::domain(format!(
            "qubits {keep:?} invalid for a {n}-qubit register"
        )));
    }
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let k = keep.len();
    let compose = |kept: usize, env: usize| -> usize {
        let mut index = 0;
        for (pos, &q) in keep.iter().enumerate() {
            index |= ((kept >> (k - 1 - pos)) & 1) << (n - 1 - q);
        }
        for (pos, &q) in traced.iter().enumerate() {
            index |= ((env >> (traced.len() - 1 - pos)) & 1) << (n - 1 - q);
        }
        index
    };
    let dk = 1 << k;
    let de = 1 << traced.len();
    let mut out = MatN::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            out[(a, b)] = (0..de)
                .map(|e| state.rho[(compose(a, e), compose(b, e))])
                .sum();
        }
    }
    Ok(MultiQubitState {
        n_qubits: k,
        rho: out,
    })
}

/// `theta = arccos(1 - 2p)` for strength `p` in `[0, 1]`.
pub fn strength_to_angle(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("strength {p} outside [0, 1]")));
    }
    Ok((1.0 - 2.0 * p).acos())
}

/// `p = sin^2(theta / 2)` for `theta` in `[0, pi]`.
pub fn angle_to_strength(theta: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::domain(format!("angle {theta} outside [0, pi]")));
    }
    Ok((theta / 2.0).sin().powi(2))
}

/// `s = arccos(exp(-gamma t / 2))`, so that the damping is `sin^2(s)`.
pub fn time_to_s(gamma: f64, t: f64) -> Result<f64> {
    let gt = gamma * t;
    if gt.is_nan() || gt < 0.0 {
        return Err(Error::domain(format!("gamma * t must be >= 0, got {gt}")));
    }
    Ok((-gt / 2.0).exp().acos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub s: f64,
}

impl CircuitAngles {
    pub fn new(theta1: f64, theta2: f64, s: f64) -> Result<Self> {
        for (name, v) in [("theta1", theta1), ("theta2", theta2)] {
            if !(0.0..=PI).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} outside [0, pi]")));
            }
        }
        if !(0.0..=FRAC_PI_2).contains(&s) {
            return Err(Error::domain(format!("s = {s} outside [0, pi/2]")));
        }
        Ok(Self { theta1, theta2, s })
    }

    pub fn from_protocol(ms: MeasurementStrengths, gamma: f64, t: f64) -> Result<Self> {
        Self::new(
            strength_to_angle(ms.p())?,
            strength_to_angle(ms.q())?,
            time_to_s(gamma, t)?,
        )
    }

    pub fn strengths(&self) -> Result<MeasurementStrengths> {
        MeasurementStrengths::new(
            angle_to_strength(self.theta1)?,
            angle_to_strength(self.theta2)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementKind {
    First,
    Second,
}

/// A gate sequence on (probe = 0, ancilla = 1) together with the state the
/// ancilla must start in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    pub gates: Vec<Gate>,
    pub ancilla_init: Mat2,
}

impl Dilation {
    /// Run the dilation on a lone probe and discard the ancilla.
    pub fn apply_to(&self, probe: &QubitState) -> Result<QubitState> {
        let mut reg = Register::new(vec![probe.to_density(), self.ancilla_init])?;
        reg.apply_dilation(self, 0, 1)?;
        reg.reduce_to(0)
    }
}

/// Controlled rotation of a fresh ancilla by `theta = arccos(1 - 2 strength)`
/// conditioned on the probe level the measurement acts on, then a CNOT from
/// the ancilla back onto the probe.
pub fn dilate_measurement(which: MeasurementKind, strength: f64) -> Result<Dilation> {
    let theta = strength_to_angle(strength)?;
    let control_value = match which {
        MeasurementKind::First => 0,
        MeasurementKind::Second => 1,
    };
    Ok(Dilation {
        gates: vec![
            Gate::ControlledRy {
                control: 0,
                control_value,
                target: 1,
                theta,
            },
            Gate::Cnot {
                control: 1,
                target: 0,
            },
        ],
        ancilla_init: QubitState::diagonal(1.0)?.to_density(),
    })
}

/// Partial swap by angle `s` between the probe and a thermal ancilla at
/// `y_eq`: `|10> -> cos s |10> + sin s |01>`, `|01> -> cos s |01> - sin s |10>`.
///
/// The ground-state branch of the ancilla damps the probe toward `|0>` and
/// the excited branch toward `|1>`, each with damping `sin^2(s)`.
pub fn dilate_gad(s: f64, y_eq: f64) -> Result<Dilation> {
    if !(0.0..=FRAC_PI_2).contains(&s) {
        return Err(Error::domain(format!("s = {s} outside [0, pi/2]")));
    }
    Ok(Dilation {
        gates: vec![
            Gate::Cnot {
                control: 0,
                target: 1,
            },
            Gate::ControlledRy {
                control: 1,
                control_value: 1,
                target: 0,
                theta: -2.0 * s,
            },
            Gate::Cnot {
                control: 0,
                target: 1,
            },
        ],
        ancilla_init: QubitState::thermal(y_eq)?.to_density(),
    })
}

/// A register whose ancillas may each be used by exactly one dilation.
#[derive(Debug, Clone)]
pub struct Register {
    state: MultiQubitState,
    consumed: Vec<bool>,
}

impl Register {
    pub fn new(qubits: Vec<Mat2>) -> Result<Self> {
        let n = qubits.len();
        Ok(Self {
            state: MultiQubitState::product(&qubits)?,
            consumed: vec![false; n],
        })
    }

    pub fn state(&self) -> &MultiQubitState {
        &self.state
    }

    /// Apply `d` with local probe/ancilla mapped to `probe` and `ancilla`.
    ///
    /// The ancilla must be unused, in `d.ancilla_init`, and uncorrelated
    /// with the rest of the register.
    pub fn apply_dilation(&mut self, d: &Dilation, probe: usize, ancilla: usize) -> Result<()> {
        let n = self.state.n_qubits;
        if probe >= n || ancilla >= n || probe == ancilla {
            return Err(Error::contract(format!(
                "invalid probe/ancilla pair ({probe}, {ancilla}) on {n} qubits"
            )));
        }
        if self.consumed[ancilla] {
            return Err(Error::contract(format!(
                "ancilla {ancilla} was already used and discarded"
            )));
        }
        self.check_fresh(ancilla, &d.ancilla_init)?;
        let map = [probe, ancilla];
        let mut state = self.state.clone();
        for g in &d.gates {
            state = apply_gate(&state, &g.relabel(&map))?;
        }
        self.state = state;
        self.consumed[ancilla] = true;
        Ok(())
    }

    fn check_fresh(&self, ancilla: usize, expected: &Mat2) -> Result<()> {
        let n = self.state.n_qubits;
        let reduced = partial_trace(&self.state, &[ancilla])?;
        let expected = linalg::to_dynamic(expected);
        if linalg::max_abs_diff(reduced.density(), &expected) > FRESHNESS_TOLERANCE {
            return Err(Error::contract(format!(
                "ancilla {ancilla} is not in its initial state"
            )));
        }
        let rest: Vec<usize> = (0..n).filter(|&q| q != ancilla).collect();
        let rest_state = partial_trace(&self.state, &rest)?;
        let joined = insert_factor(rest_state.density(), n, ancilla, &expected);
        if linalg::max_abs_diff(&joined, self.state.density()) > FRESHNESS_TOLERANCE {
            return Err(Error::contract(format!(
                "ancilla {ancilla} is correlated with the rest of the register"
            )));
        }
        Ok(())
    }

    /// Trace out everything except `qubit`.
    pub fn reduce_to(&self, qubit: usize) -> Result<QubitState> {
        partial_trace(&self.state, &[qubit])?.to_qubit()
    }
}

/// `rest (x) factor` with the factor placed at position `pos` of `n` qubits.
fn insert_factor(rest: &MatN, n: usize, pos: usize, factor: &MatN) -> MatN {
    let dim = 1 << n;
    let split = |index: usize| -> (usize, usize) {
        let mut r = 0;
        for q in 0..n {
            if q != pos {
                r = (r << 1) | bit(index, q, n);
            }
        }
        (r, bit(index, pos, n))
    };
    MatN::from_fn(dim, dim, |i, j| {
        let (ri, ai) = split(i);
        let (rj, aj) = split(j);
        rest[(ri, rj)] * factor[(ai, aj)]
    })
}

/// Thermal probe, both measurement dilations, and the thermal-ancilla
/// channel dilation on four qubits; returns the probe's reduced state.
pub fn run_full_pipeline(
    y0: f64,
    ms: MeasurementStrengths,
    gp: &GadParams,
    t: f64,
) -> Result<QubitState> {
    let angles = CircuitAngles::from_protocol(ms, gp.gamma(), t)?;
    run_pipeline_angles(y0, &angles, gp.y_eq())
}

/// Same pipeline driven directly by gate angles.
pub fn run_pipeline_angles(y0: f64, angles: &CircuitAngles, y_eq: f64) -> Result<QubitState> {
    let ms = angles.strengths()?;
    let first = dilate_measurement(MeasurementKind::First, ms.p())?;
    let second = dilate_measurement(MeasurementKind::Second, ms.q())?;
    let bath = dilate_gad(angles.s, y_eq)?;
    let mut reg = Register::new(vec![
        QubitState::thermal(y0)?.to_density(),
        first.ancilla_init,
        second.ancilla_init,
        bath.ancilla_init,
    ])?;
    reg.apply_dilation(&first, 0, 1)?;
    reg.apply_dilation(&second, 0, 2)?;
    reg.apply_dilation(&bath, 0, 3)?;
    reg.reduce_to(0)
}
