//! Table-producing scans behind the `qprobe` binary.
//!
//! Every command takes a [`RunConfig`], fills the fields it needs from its
//! own defaults, and returns a [`Report`]: the effective configuration, a
//! column list, rows in grid order, and the outcome of any internal
//! cross-checks. Grid points are evaluated in parallel and collected by
//! index, so output does not depend on the thread count.

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::json;

use crate::channel::{evolve_analytic, GadParams, Interrogation};
use crate::circuit::{run_full_pipeline, run_pipeline_angles, time_to_s, CircuitAngles};
use crate::error::{Error, Result};
use crate::estimation::{crb_experiment, CrbConfig, ExperimentPoint};
use crate::metrology::{
    qfi_bloch_route, qfi_closed, qfi_sld_route, qfi_temperature_closed, FiniteDifference,
    ParameterTag, TemperatureVariant,
};
use crate::preparation::{
    prepare_probe, prepare_probe_kraus, rz_preparation, MeasurementStrengths,
};
use crate::state::QubitState;
use crate::thermo::{hamiltonian_variance, susceptibility};

/// Largest relative disagreement tolerated between QFI routes.
pub const ROUTE_TOLERANCE: f64 = 1e-6;
/// Largest residual tolerated in `chi^2 / Var(H) = QFI`.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
/// Largest Bloch-vector deviation tolerated between circuit and closed form.
pub const CIRCUIT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PrepScan,
    QfiScan,
    Thermo,
    CircuitVerify,
    Crb,
    Optimize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PrepScan => "prep-scan",
            Command::QfiScan => "qfi-scan",
            Command::Thermo => "thermo",
            Command::CircuitVerify => "circuit-verify",
            Command::Crb => "crb",
            Command::Optimize => "optimize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// `steps` evenly spaced values from `min` to `max`; a single step yields `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RangeSpec")]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RangeSpec {
    Value(f64),
    Span { min: f64, max: f64, steps: usize },
}

impl TryFrom<RangeSpec> for Range {
    type Error = Error;

    fn try_from(spec: RangeSpec) -> Result<Self> {
        match spec {
            RangeSpec::Value(v) => Range::new(v, v, 1),
            RangeSpec::Span { min, max, steps } => Range::new(min, max, steps),
        }
    }
}

impl Range {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::config(format!(
                "range bounds must be finite, got [{min}, {max}]"
            )));
        }
        if steps == 0 {
            return Err(Error::config("range needs at least one step"));
        }
        if min > max {
            return Err(Error::config(format!(
                "range is not ordered: min {min} > max {max}"
            )));
        }
        Ok(Self { min, max, steps })
    }

    pub fn single(v: f64) -> Self {
        Self {
            min: v,
            max: v,
            steps: 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == last {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / last as f64
                }
            })
            .collect()
    }
}

impl FromStr for Range {
    type Err = Error;

    /// `VALUE` or `MIN:MAX:STEPS`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::config(format!(
                "cannot parse range {s:?}; expected VALUE or MIN:MAX:STEPS"
            ))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => {
                let v: f64 = v.trim().parse().map_err(|_| bad())?;
                Range::new(v, v, 1)
            }
            [a, b, n] => Range::new(
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
                n.trim().parse().map_err(|_| bad())?,
            ),
            _ => Err(bad()),
        }
    }
}

/// Run configuration as read from a JSON file or command-line flags. Unset
/// fields take the command's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<ParameterTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rz: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_eq: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noiseless: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    /// Fields set in `top` win over fields set in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay_fields!(base, top; command, tag, p, q, t, rz, y0, y_eq, gamma, omega,
            shots, replicas, seed, noiseless, out, format)
    }

    fn grid(&self, name: &str, range: Option<Range>) -> Result<Vec<f64>> {
        range
            .map(|r| r.values())
            .ok_or_else(|| Error::config(format!("{name} is not set")))
    }

    /// A parameter that is not a table column must be single-valued.
    fn scalar(&self, name: &str, range: Option<Range>) -> Result<f64> {
        let values = self.grid(name, range)?;
        match values.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::config(format!(
                "{name} must be a single value for {}",
                self.command.as_deref().unwrap_or("this command")
            ))),
        }
    }

    fn channel(&self) -> Result<GadParams> {
        GadParams::new(
            self.scalar("gamma", self.gamma)?,
            self.scalar("y_eq", self.y_eq)?,
            self.scalar("omega", self.omega)?,
        )
        .map_err(as_config)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn check_unit_interval(name: &str, values: &[f64], lo: f64) -> Result<()> {
    match values.iter().find(|v| !(lo..=1.0).contains(*v)) {
        Some(v) => Err(Error::config(format!("{name} = {v} outside [{lo}, 1]"))),
        None => Ok(()),
    }
}

fn check_nonnegative(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| v.is_nan() || **v < 0.0) {
        Some(v) => Err(Error::config(format!("{name} = {v} must be >= 0"))),
        None => Ok(()),
    }
}

/// Defaults: `omega = 1`, `gamma = 0.05`, `y0 = 1`, and `y_eq = 1` for the
/// decay rate or `0.5` (`T = 1`) for the temperature and `thermo`.
pub fn defaults(command: Command, tag: ParameterTag) -> RunConfig {
    let y_eq = match (command, tag) {
        (Command::Thermo, _) => 0.5,
        (_, ParameterTag::DecayRate) => 1.0,
        (_, ParameterTag::Temperature) => 0.5,
    };
    let mut cfg = RunConfig {
        command: Some(command.name().to_string()),
        y0: Some(Range::single(1.0)),
        y_eq: Some(Range::single(y_eq)),
        gamma: Some(Range::single(0.05)),
        omega: Some(Range::single(1.0)),
        seed: Some(0),
        format: Some(OutputFormat::Csv),
        ..RunConfig::default()
    };
    let span = |min, max, steps| Some(Range { min, max, steps });
    match command {
        Command::PrepScan => {
            cfg.p = span(0.0, 1.0, 21);
            cfg.q = span(0.0, 1.0, 21);
        }
        Command::QfiScan => {
            cfg.tag = Some(tag);
            cfg.t = span(0.0, 100.0, 101);
            cfg.rz = span(-1.0, 1.0, 21);
        }
        Command::Thermo => {
            cfg.t = span(0.0, 100.0, 101);
            cfg.rz = span(-1.0, 1.0, 5);
        }
        Command::CircuitVerify => {
            cfg.p = span(0.0, 1.0, 5);
            cfg.q = span(0.0, 1.0, 5);
            cfg.t = span(0.0, 100.0, 5);
        }
        Command::Crb => {
            cfg.tag = Some(tag);
            let (t, rz, shots) = match tag {
                ParameterTag::DecayRate => (10.0, -1.0, 100_000),
                ParameterTag::Temperature => (20.0, 1.0, 1_000_000),
            };
            cfg.t = Some(Range::single(t));
            cfg.rz = Some(Range::single(rz));
            cfg.shots = Some(shots);
            cfg.replicas = Some(2000);
            cfg.noiseless = Some(false);
        }
        Command::Optimize => {
            cfg.tag = Some(tag);
            cfg.p = span(0.0, 1.0, 11);
            cfg.q = span(0.0, 1.0, 11);
            cfg.t = span(0.0, 200.0, 201);
        }
    }
    cfg
}

/// One table cell. Singular points are written as the text `singular`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Count(u64),
    Singular,
    Unbounded,
}

impl Cell {
    fn from_result(r: &Result<f64>) -> Cell {
        match r {
            Ok(v) => Cell::Num(*v),
            Err(_) => Cell::Singular,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Count(n) => Some(*n as f64),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{:.16e}", v + 0.0),
            Cell::Count(n) => write!(f, "{n}"),
            Cell::Singular => f.write_str("singular"),
            Cell::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Num(v) => s.serialize_f64(v + 0.0),
            Cell::Count(n) => s.serialize_u64(*n),
            Cell::Singular => s.serialize_str("singular"),
            Cell::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.to_string(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config_echo: RunConfig,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let j = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Header, one line per row, then one `# error:` line per failed check.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        for c in self.checks.iter().filter(|c| !c.passed) {
            writeln!(
                w,
                "# error: check {} failed: {:e} > {:e}",
                c.name, c.value, c.threshold
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "config_echo": self.config_echo,
            "columns": self.columns,
            "rows": self.rows,
            "checks": self.checks,
        })
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.to_json())?;
        writeln!(w)
    }

    pub fn write<W: Write>(&self, format: OutputFormat, w: W) -> io::Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => self.write_json(w),
        }
    }
}

/// Resolve defaults under `user` and run `command`.
pub fn run(command: Command, user: &RunConfig) -> Result<Report> {
    let tag = user.tag.unwrap_or(ParameterTag::DecayRate);
    let mut cfg = defaults(command, tag).overlay(user.clone());
    cfg.command = Some(command.name().to_string());
    match command {
        Command::PrepScan => prep_scan(&cfg),
        Command::QfiScan => qfi_scan(&cfg, tag),
        Command::Thermo => thermo(&cfg),
        Command::CircuitVerify => circuit_verify(&cfg),
        Command::Crb => crb(&cfg, tag),
        Command::Optimize => optimize(&cfg, tag),
    }
}

fn pairs(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| (x, y)))
        .collect()
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn prep_scan(cfg: &RunConfig) -> Result<Report> {
    let ps = cfg.grid("p", cfg.p)?;
    let qs = cfg.grid("q", cfg.q)?;
    check_unit_interval("p", &ps, 0.0)?;
    check_unit_interval("q", &qs, 0.0)?;
    let y0 = cfg.scalar("y0", cfg.y0)?;
    QubitState::thermal(y0).map_err(as_config)?;

    let points = pairs(&ps, &qs);
    let evaluated: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&(p, q)| {
            let ms = MeasurementStrengths::new(p, q)?;
            let rz = rz_preparation(ms, y0);
            let kraus = prepare_probe_kraus(ms, y0)?.rz();
            Ok((rz, (rz - kraus).abs()))
        })
        .collect::<Result<_>>()?;

    let mut worst_drop = 0.0f64;
    for (i, _) in ps.iter().enumerate() {
        for j in 1..qs.len() {
            let k = i * qs.len() + j;
            worst_drop = worst_drop.max(evaluated[k - 1].0 - evaluated[k].0);
        }
    }
    let kraus_gap = evaluated.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(Report {
        config_echo: cfg.clone(),
        columns: vec!["p", "q", "R_z"],
        rows: points
            .iter()
            .zip(&evaluated)
            .map(|(&(p, q), e)| vec![Cell::Num(p), Cell::Num(q), Cell::Num(e.0)])
            .collect(),
        checks: vec![
            Check::at_most("kraus_agreement", kraus_gap, 1e-12),
            Check::at_most("monotone_in_q", worst_drop, 1e-14),
        ],
    })
}

struct QfiPoint {
    closed: Result<f64>,
    as_printed: Option<Result<f64>>,
    bloch: Result<f64>,
    sld: Result<f64>,
}

pub fn qfi_scan(cfg: &RunConfig, tag: ParameterTag) -> Result<Report> {
    let ts = cfg.grid("t", cfg.t)?;
    let rzs = cfg.grid("rz", cfg.rz)?;
    check_nonnegative("t", &ts)?;
    check_unit_interval("rz", &rzs, -1.0)?;
    let gp = cfg.channel()?;
    if tag == ParameterTag::Temperature {
        gp.temperature().map_err(as_config)?;
    }
    let fd = FiniteDifference::default();

    let points = pairs(&ts, &rzs);
    let evaluated: Vec<QfiPoint> = points
        .par_iter()
        .map(|&(t, rz)| {
            let it = Interrogation::with_polarization(rz, gp, t)?;
            Ok(QfiPoint {
                closed: qfi_closed(&it, tag),
                as_printed: (tag == ParameterTag::Temperature)
                    .then(|| qfi_temperature_closed(&it, TemperatureVariant::AsPrinted)),
                bloch: qfi_bloch_route(&it, tag, &fd),
                sld: qfi_sld_route(&it, tag, &fd),
            })
        })
        .collect::<Result<_>>()?;

    let mut argmax = vec![false; points.len()];
    for (i, _) in ts.iter().enumerate() {
        let block = i * rzs.len()..(i + 1) * rzs.len();
        let mut best: Option<(usize, f64)> = None;
        for k in block {
            if let Ok(v) = evaluated[k].closed {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
        }
        if let Some((k, _)) = best {
            argmax[k] = true;
        }
    }

    let mut worst = 0.0f64;
    for e in &evaluated {
        if let (Ok(c), Ok(b), Ok(s)) = (&e.closed, &e.bloch, &e.sld) {
            worst = worst.max(relative_gap(*c, *b)).max(relative_gap(*c, *s));
        }
    }

    let mut columns = vec!["t", "R_z", "qfi_closed"];
    if tag == ParameterTag::Temperature {
        columns.push("qfi_closed_as_printed");
    }
    columns.extend(["qfi_bloch", "qfi_sld", "argmax_R_z"]);
    let rows = points
        .iter()
        .zip(&evaluated)
        .zip(&argmax)
        .map(|((&(t, rz), e), &flag)| {
            let mut row = vec![Cell::Num(t), Cell::Num(rz), Cell::from_result(&e.closed)];
            if let Some(ap) = &e.as_printed {
                row.push(Cell::from_result(ap));
            }
            row.extend([
                Cell::from_result(&e.bloch),
                Cell::from_result(&e.sld),
                Cell::Count(flag as u64),
            ]);
            row
        })
        .collect();
    Ok(Report {
        config_echo: cfg.clone(),
        columns,
        rows,
        checks: vec![Check::at_most("route_agreement", worst, ROUTE_TOLERANCE)],
    })
}

pub fn thermo(cfg: &RunConfig) -> Result<Report> {
    let ts = cfg.grid("t", cfg.t)?;
    let rzs = cfg.grid("rz", cfg.rz)?;
    check_nonnegative("t", &ts)?;
    check_unit_interval("rz", &rzs, -1.0)?;
    let gp = cfg.channel()?;
    gp.temperature().map_err(as_config)?;

    let points = pairs(&ts, &rzs);
    let rows: Vec<(Vec<Cell>, f64)> = points
        .par_iter()
        .map(|&(t, rz)| {
            let it = Interrogation::with_polarization(rz, gp, t)?;
            let chi_gamma = susceptibility(&it, ParameterTag::DecayRate)?;
            let chi_t = susceptibility(&it, ParameterTag::Temperature)?;
            let var = hamiltonian_variance(&it.evolved(), gp.omega());
            let mut worst = 0.0f64;
            let mut residual = |chi: f64, tag| -> Cell {
                if var <= crate::thermo::VARIANCE_TOLERANCE {
                    return Cell::Singular;
                }
                match qfi_closed(&it, tag) {
                    Ok(qfi) => {
                        let r = relative_gap(chi * chi / var, qfi);
                        worst = worst.max(r);
                        Cell::Num(r)
                    }
                    Err(_) => Cell::Singular,
                }
            };
            let id_gamma = residual(chi_gamma, ParameterTag::DecayRate);
            let id_t = residual(chi_t, ParameterTag::Temperature);
            let row = vec![
                Cell::Num(t),
                Cell::Num(rz),
                Cell::Num(chi_gamma),
                Cell::Num(chi_t),
                Cell::Num(var.max(0.0).sqrt()),
                id_gamma,
                id_t,
            ];
            Ok((row, worst))
        })
        .collect::<Result<_>>()?;

    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(Report {
        config_echo: cfg.clone(),
        columns: vec![
            "t",
            "R_z",
            "chi_gamma",
            "chi_T",
            "delta_h",
            "identity_gamma",
            "identity_T",
        ],
        rows: rows.into_iter().map(|r| r.0).collect(),
        checks: vec![Check::at_most(
            "identity_residual",
            worst,
            IDENTITY_TOLERANCE,
        )],
    })
}

pub fn circuit_verify(cfg: &RunConfig) -> Result<Report> {
    let ps = cfg.grid("p", cfg.p)?;
    let qs = cfg.grid("q", cfg.q)?;
    let ts = cfg.grid("t", cfg.t)?;
    check_unit_interval("p", &ps, 0.0)?;
    check_unit_interval("q", &qs, 0.0)?;
    check_nonnegative("t", &ts)?;
    let y0 = cfg.scalar("y0", cfg.y0)?;
    QubitState::thermal(y0).map_err(as_config)?;
    let gp = cfg.channel()?;

    let points: Vec<(f64, f64, f64)> = pairs(&ps, &qs)
        .into_iter()
        .flat_map(|(p, q)| ts.iter().map(move |&t| (p, q, t)))
        .collect();
    let rows: Vec<(Vec<Cell>, f64)> = points
        .par_iter()
        .map(|&(p, q, t)| {
            let ms = MeasurementStrengths::new(p, q)?;
            let circuit = run_full_pipeline(y0, ms, &gp, t)?;
            let closed = evolve_analytic(&prepare_probe(ms, y0)?, &gp, t)?;
            let dev = (circuit.bloch() - closed.bloch()).amax();
            let row = vec![
                Cell::Num(p),
                Cell::Num(q),
                Cell::Num(t),
                Cell::Num(time_to_s(gp.gamma(), t)?),
                Cell::Num(circuit.rz()),
                Cell::Num(closed.rz()),
                Cell::Num(dev),
            ];
            Ok((row, dev))
        })
        .collect::<Result<_>>()?;

    // full damping (s = pi/2) must return the bath state for every preparation
    let thermal = QubitState::thermal(gp.y_eq())?;
    let equilibrium = pairs(&ps, &qs)
        .par_iter()
        .map(|&(p, q)| {
            let ms = MeasurementStrengths::new(p, q)?;
            let angles = CircuitAngles::from_protocol(ms, 0.0, 0.0)?;
            let angles =
                CircuitAngles::new(angles.theta1, angles.theta2, std::f64::consts::FRAC_PI_2)?;
            let out = run_pipeline_angles(y0, &angles, gp.y_eq())?;
            Ok((out.bloch() - thermal.bloch()).amax())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(Report {
        config_echo: cfg.clone(),
        columns: vec!["p", "q", "t", "s", "rz_circuit", "rz_closed", "deviation"],
        rows: rows.into_iter().map(|r| r.0).collect(),
        checks: vec![
            Check::at_most("max_deviation", worst, CIRCUIT_TOLERANCE),
            Check::at_most("equilibrium_limit", equilibrium, CIRCUIT_TOLERANCE),
        ],
    })
}

pub fn crb(cfg: &RunConfig, tag: ParameterTag) -> Result<Report> {
    let ts = cfg.grid("t", cfg.t)?;
    let rzs = cfg.grid("rz", cfg.rz)?;
    check_nonnegative("t", &ts)?;
    check_unit_interval("rz", &rzs, -1.0)?;
    let gp = cfg.channel()?;
    let points = pairs(&ts, &rzs)
        .into_iter()
        .map(|(time, probe_rz)| ExperimentPoint {
            probe_rz,
            channel: gp,
            time,
        })
        .collect();
    let experiment = CrbConfig {
        tag,
        points,
        n_shots: cfg.shots.ok_or_else(|| Error::config("shots is not set"))?,
        replicas: cfg
            .replicas
            .ok_or_else(|| Error::config("replicas is not set"))?,
        master_seed: cfg.seed.unwrap_or(0),
        noiseless: cfg.noiseless.unwrap_or(false),
    };
    let results = crb_experiment(&experiment).map_err(|e| match e {
        Error::Domain(_) => as_config(e),
        other => other,
    })?;
    let opt = |v: Option<f64>| v.map_or(Cell::Unbounded, Cell::Num);
    let num_or_singular = |v: f64| {
        if v.is_nan() {
            Cell::Singular
        } else {
            Cell::Num(v)
        }
    };
    Ok(Report {
        config_echo: cfg.clone(),
        columns: vec![
            "t",
            "R_z",
            "true_value",
            "estimate",
            "sample_variance",
            "bias",
            "crb",
            "crb_ratio",
            "n_valid",
            "n_out_of_model",
        ],
        rows: results
            .iter()
            .map(|r| {
                vec![
                    Cell::Num(r.point.time),
                    Cell::Num(r.point.probe_rz),
                    Cell::Num(r.true_value),
                    num_or_singular(r.estimate),
                    Cell::Num(r.sample_variance),
                    num_or_singular(r.bias),
                    opt(r.crb),
                    opt(r.crb_ratio),
                    Cell::Count(r.n_valid as u64),
                    Cell::Count(r.n_out_of_model as u64),
                ]
            })
            .collect(),
        checks: Vec::new(),
    })
}

/// Maximize `f` on `[a, b]` by golden-section search.
fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub p: f64,
    pub q: f64,
    pub t: f64,
    pub rz: f64,
    pub qfi: f64,
}

/// Best `(p, q)` on the grid with `t` refined around the best coarse time.
/// Ties keep the earliest grid point.
pub fn optimize_probe(cfg: &RunConfig, tag: ParameterTag) -> Result<Optimum> {
    let ps = cfg.grid("p", cfg.p)?;
    let qs = cfg.grid("q", cfg.q)?;
    let ts = cfg.grid("t", cfg.t)?;
    check_unit_interval("p", &ps, 0.0)?;
    check_unit_interval("q", &qs, 0.0)?;
    check_nonnegative("t", &ts)?;
    let y0 = cfg.scalar("y0", cfg.y0)?;
    QubitState::thermal(y0).map_err(as_config)?;
    let gp = cfg.channel()?;
    if tag == ParameterTag::Temperature {
        gp.temperature().map_err(as_config)?;
    }

    let candidates: Vec<Option<Optimum>> = pairs(&ps, &qs)
        .par_iter()
        .map(|&(p, q)| {
            let ms = MeasurementStrengths::new(p, q).ok()?;
            let value = |t: f64| {
                Interrogation::prepared(ms, y0, gp, t)
                    .and_then(|it| qfi_closed(&it, tag))
                    .unwrap_or(f64::NEG_INFINITY)
            };
            let coarse: Vec<f64> = ts.iter().map(|&t| value(t)).collect();
            let (k, &best) = coarse.iter().enumerate().fold(
                None,
                |acc: Option<(usize, &f64)>, (i, v)| match acc {
                    Some((_, b)) if *v <= *b => acc,
                    _ => Some((i, v)),
                },
            )?;
            if best == f64::NEG_INFINITY {
                return None;
            }
            let (t, qfi) = if ts.len() > 1 {
                let lo = ts[k.saturating_sub(1)];
                let hi = ts[(k + 1).min(ts.len() - 1)];
                let (t, v) = golden_section(value, lo, hi);
                if v >= best {
                    (t, v)
                } else {
                    (ts[k], best)
                }
            } else {
                (ts[0], best)
            };
            Some(Optimum {
                p,
                q,
                t,
                rz: rz_preparation(ms, y0),
                qfi,
            })
        })
        .collect();

    candidates
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<Optimum>, c| match acc {
            Some(b) if c.qfi <= b.qfi => Some(b),
            _ => Some(c),
        })
        .ok_or_else(|| Error::singular("no grid point has a finite quantum Fisher information"))
}

pub fn optimize(cfg: &RunConfig, tag: ParameterTag) -> Result<Report> {
    let best = optimize_probe(cfg, tag)?;
    Ok(Report {
        config_echo: cfg.clone(),
        columns: vec!["p", "q", "t", "R_z", "qfi"],
        rows: vec![vec![
            Cell::Num(best.p),
            Cell::Num(best.q),
            Cell::Num(best.t),
            Cell::Num(best.rz),
            Cell::Num(best.qfi),
        ]],
        checks: Vec::new(),
    })
}
