use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qprobe::commands::{self, Command, OutputFormat, Range, RunConfig};
use qprobe::ParameterTag;

#[derive(Parser)]
#[command(
    name = "qprobe",
    version,
    about = "Probe preparation and GAD-channel metrology scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tag {
    Gamma,
    Temperature,
}

/// Ranges are `VALUE` or `MIN:MAX:STEPS`.
#[derive(Args, Default)]
struct Params {
    #[arg(long, allow_hyphen_values = true)]
    p: Option<Range>,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<Range>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<Range>,
    #[arg(long = "rz", allow_hyphen_values = true)]
    rz: Option<Range>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<Range>,
    #[arg(long = "y-eq", allow_hyphen_values = true)]
    y_eq: Option<Range>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<Range>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<Range>,
}

#[derive(Args)]
struct Tagged {
    #[arg(long, value_enum)]
    tag: Option<Tag>,
    #[command(flatten)]
    params: Params,
}

#[derive(Subcommand)]
enum Cmd {
    /// Prepared polarization over a (p, q) grid
    PrepScan(Params),
    /// QFI over (t, R_z) by three routes
    QfiScan(Tagged),
    /// Susceptibilities, energy spread, and identity residuals over (t, R_z)
    Thermo(Params),
    /// Four-qubit dilation against the closed-form pipeline
    CircuitVerify(Params),
    /// Monte Carlo maximum-likelihood estimation against the Cramér–Rao bound
    Crb {
        #[command(flatten)]
        tagged: Tagged,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        noiseless: bool,
    },
    /// Best preparation and interrogation time for one parameter
    Optimize(Tagged),
}

fn flag_config(cli: &Cli) -> (Command, RunConfig) {
    let mut cfg = RunConfig {
        seed: cli.common.seed,
        out: cli.common.out.clone(),
        format: cli.common.format.map(|f| match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }),
        ..RunConfig::default()
    };
    let set_params = |cfg: &mut RunConfig, p: &Params| {
        cfg.p = p.p;
        cfg.q = p.q;
        cfg.t = p.t;
        cfg.rz = p.rz;
        cfg.y0 = p.y0;
        cfg.y_eq = p.y_eq;
        cfg.gamma = p.gamma;
        cfg.omega = p.omega;
    };
    let tag = |t: Option<Tag>| {
        t.map(|t| match t {
            Tag::Gamma => ParameterTag::DecayRate,
            Tag::Temperature => ParameterTag::Temperature,
        })
    };
    let command = match &cli.command {
        Cmd::PrepScan(p) => {
            set_params(&mut cfg, p);
            Command::PrepScan
        }
        Cmd::QfiScan(t) => {
            set_params(&mut cfg, &t.params);
            cfg.tag = tag(t.tag);
            Command::QfiScan
        }
        Cmd::Thermo(p) => {
            set_params(&mut cfg, p);
            Command::Thermo
        }
        Cmd::CircuitVerify(p) => {
            set_params(&mut cfg, p);
            Command::CircuitVerify
        }
        Cmd::Crb {
            tagged,
            shots,
            replicas,
            noiseless,
        } => {
            set_params(&mut cfg, &tagged.params);
            cfg.tag = tag(tagged.tag);
            cfg.shots = *shots;
            cfg.replicas = *replicas;
            cfg.noiseless = noiseless.then_some(true);
            Command::Crb
        }
        Cmd::Optimize(t) => {
            set_params(&mut cfg, &t.params);
            cfg.tag = tag(t.tag);
            Command::Optimize
        }
    };
    (command, cfg)
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building thread pool")?;
    }
    let file_cfg = match &cli.common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    let (command, flags) = flag_config(cli);
    let cfg = file_cfg.overlay(flags);
    let report = commands::run(command, &cfg)?;
    let format = cfg.format.unwrap_or_default();
    match &cfg.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            report.write(format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            report.write(format, &mut w)?;
        }
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("check {} failed: {:e} > {:e}", c.name, c.value, c.threshold);
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
