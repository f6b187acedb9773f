//! `pencil`: forward and inverse spectral maps for the quadratic pencil
//! `-y'' + q y + 2 lambda p y = lambda² y` on `[0, 1]`, `q = r'`.
//!
//! Every subcommand reads and writes JSON. Exit codes: 0 success, 2 invalid
//! input or data, 3 solver failure, 4 gauge or quantization failure,
//! 5 `alpha0`-independence violation.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pencil_core::akns::{GlMethod, TailModel};
use pencil_core::error::{Error, Result};
use pencil_core::pipeline::{self, PipelineConfig};
use pencil_core::spectral::{self, SpectralData};
use pencil_core::synth::{self, SynthConfig};
use pencil_core::{io, Grid, PencilPotentials};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "pencil",
    version,
    about = "Direct and inverse spectral problems for an energy-dependent Sturm-Liouville pencil"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral data of a potential file.
    Forward {
        potentials: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Reconstruct (p, r) from a spectral data file.
    Inverse {
        data: PathBuf,
        #[command(flatten)]
        opts: Opts,
        /// Where to write the run report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Skip the forward solve that measures the round-trip mismatch.
        #[arg(long)]
        no_round_trip: bool,
    },
    /// Screen a spectral data file; exit 0 if it passes, 2 otherwise.
    Validate {
        data: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Reconstruct with two values of alpha0 and compare the results.
    Commute {
        data: PathBuf,
        #[command(flatten)]
        opts: Opts,
        /// Second alpha0; the first is --alpha0.
        #[arg(long, default_value_t = 0.5)]
        alpha0_b: f64,
    },
    /// Write a seeded random smooth potential pair.
    Synth {
        #[command(flatten)]
        opts: Opts,
        /// Number of Fourier modes.
        #[arg(long, default_value_t = 4)]
        modes: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Tail {
    Free,
    Matched,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Separable,
    Nystrom,
}

#[derive(Args, Debug)]
struct Opts {
    /// Grid intervals; defaults to the input file's grid (1024 for synth).
    #[arg(short = 'm', long = "grid")]
    grid: Option<usize>,
    /// Index pairs ±1..±N; defaults to all pairs in the data (32 for forward).
    #[arg(short = 'N', long = "pairs")]
    pairs: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol_lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol_alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol_quant: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol_independence: f64,
    /// Gauss-Newton polish of the reconstructed potential.
    #[arg(long)]
    refine: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Commit this shift h instead of estimating it.
    #[arg(long, allow_negative_numbers = true)]
    shift: Option<f64>,
    #[arg(long, value_enum, default_value_t = Tail::Matched)]
    tail: Tail,
    #[arg(long, value_enum, default_value_t = Method::Separable)]
    method: Method,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl Opts {
    fn config(&self, grid: Grid, pairs: usize) -> PipelineConfig {
        PipelineConfig {
            m: grid.intervals(),
            pairs,
            alpha0: self.alpha0,
            tol_lambda: self.tol_lambda,
            tol_alpha: self.tol_alpha,
            tol_quant: self.tol_quant,
            tol_independence: self.tol_independence,
            refine: self.refine,
            seed: self.seed,
            shift: self.shift,
            method: match self.method {
                Method::Separable => GlMethod::Separable,
                Method::Nystrom => GlMethod::Nystrom,
            },
            tail: match self.tail {
                Tail::Free => TailModel::Free,
                Tail::Matched => TailModel::Matched,
            },
            ..PipelineConfig::default()
        }
    }

    fn grid_or(&self, default: usize) -> Result<Grid> {
        Grid::new(self.grid.unwrap_or(default))
    }
}

fn emit<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => io::write_json(path, value),
        None => {
            let text = io::to_json(value)?;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

/// Keeps pairs `|n| <= n_max` (and the zero mode).
fn truncate(sd: &SpectralData, n_max: Option<usize>) -> Result<SpectralData> {
    let Some(n_max) = n_max else {
        return Ok(sd.clone());
    };
    if n_max > sd.max_index() {
        return Err(Error::Domain(format!(
            "requested N = {n_max} but the data have N = {}",
            sd.max_index()
        )));
    }
    let pairs = sd
        .pairs()
        .iter()
        .filter(|p| p.n.unsigned_abs() as usize <= n_max)
        .copied()
        .collect();
    let mut out = SpectralData::new(pairs, sd.h())?;
    if let Some(z) = sd.zero_mode() {
        out = out.with_zero_mode(z.alpha)?;
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Forward { potentials, opts } => {
            let pp: PencilPotentials = io::read_json(&potentials)?;
            let grid = opts.grid_or(pp.grid().intervals())?;
            let pp = if grid == pp.grid() {
                pp
            } else {
                PencilPotentials::new(pp.p().resample(grid), pp.r().resample(grid))?
            };
            let fr = pipeline::forward(&pp, opts.pairs.unwrap_or(32))?;
            emit(opts.out.as_deref(), &fr.data)?;
        }
        Command::Inverse {
            data,
            opts,
            report,
            no_round_trip,
        } => {
            let sd = truncate(&io::read_json(&data)?, opts.pairs)?;
            let cfg = opts.config(opts.grid_or(pencil_core::grid::DEFAULT_INTERVALS)?, sd.max_index());
            let res = pipeline::inverse(&sd, &cfg, !no_round_trip)?;
            log::info!(
                "h = {}, theta(1) = {} (n = {}), GL condition {:e}",
                res.report.h,
                res.report.theta_end,
                res.report.quantization_n,
                res.report.gl_condition
            );
            emit(opts.out.as_deref(), &res.potentials)?;
            if let Some(path) = report {
                io::write_json(path, &res.report)?;
            }
        }
        Command::Validate { data, opts } => {
            let sd = truncate(&io::read_json(&data)?, opts.pairs)?;
            let cfg = PipelineConfig::default();
            let rep = spectral::validate(&sd, &cfg.validation);
            emit(
                opts.out.as_deref(),
                &json!({ "passed": rep.passed(), "failures": rep.failures(), "report": rep }),
            )?;
            if !rep.passed() {
                eprintln!("validation failed: {}", rep.failures().join("; "));
                return Ok(ExitCode::from(2));
            }
        }
        Command::Commute { data, opts, alpha0_b } => {
            let sd = truncate(&io::read_json(&data)?, opts.pairs)?;
            let cfg = opts.config(opts.grid_or(pencil_core::grid::DEFAULT_INTERVALS)?, sd.max_index());
            let rep = pipeline::verify_alpha0_independence(&sd, opts.alpha0, alpha0_b, &cfg)?;
            emit(opts.out.as_deref(), &rep)?;
            rep.ensure()?;
        }
        Command::Synth { opts, modes } => {
            let grid = opts.grid_or(pencil_core::grid::DEFAULT_INTERVALS)?;
            let cfg = SynthConfig {
                modes,
                ..SynthConfig::default()
            };
            emit(opts.out.as_deref(), &synth::random_pencil(grid, opts.seed, &cfg)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
