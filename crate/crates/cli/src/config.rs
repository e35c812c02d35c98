use clap::{Parser, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use toeplitz_spectra::formats::{parse_perturbation, parse_symbol, parse_vector};
use toeplitz_spectra::lattice::PerturbationSpec;
use toeplitz_spectra::symbol::MatrixSymbol;
use toeplitz_spectra::LatticeModel;

pub const MAX_HALF_LENGTH: usize = 8192;
pub const MAX_GRID: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Bands,
    Spectrum,
    GapEigs,
    MourreCheck,
    LapSweep,
    Classify,
    Propagate,
    WaveOp,
    FullReport,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Bands => "bands",
            Task::Spectrum => "spectrum",
            Task::GapEigs => "gap-eigs",
            Task::MourreCheck => "mourre-check",
            Task::LapSweep => "lap-sweep",
            Task::Classify => "classify",
            Task::Propagate => "propagate",
            Task::WaveOp => "wave-op",
            Task::FullReport => "full-report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// One-sided compression to nonnegative sites.
    Toeplitz,
    /// Two-sided convolution operator.
    Laurent,
}

/// Spectral and scattering analysis of block Toeplitz and Laurent operators.
#[derive(Debug, Parser)]
#[command(name = "toeplitz-spectra", version)]
pub struct Cli {
    /// Symbol file (TOML).
    #[arg(long)]
    pub symbol: PathBuf,
    /// Perturbation file (TOML).
    #[arg(long)]
    pub perturbation: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Operator for spectral tasks; Mourre, propagation and wave-operator
    /// tasks always use the two-sided operator.
    #[arg(long, value_enum, default_value = "toeplitz")]
    pub operator: Operator,
    /// Window half-length.
    #[arg(long = "L", default_value_t = 1024)]
    pub half_length: usize,
    /// Band grid size (power of two).
    #[arg(long = "K", default_value_t = 2048)]
    pub grid: usize,
    /// Resolvent weight exponent.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Propagation weight exponent.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Energy interval LO:HI.
    #[arg(long, value_parser = parse_interval)]
    pub delta: Option<(f64, f64)>,
    /// Spectral gap LO:HI.
    #[arg(long, value_parser = parse_interval)]
    pub gap: Option<(f64, f64)>,
    /// Energies for the resolvent sweep (repeatable).
    #[arg(long = "energy")]
    pub energies: Vec<f64>,
    /// Largest propagation time.
    #[arg(long, default_value_t = 100.0)]
    pub tmax: f64,
    /// Largest wave-operator time.
    #[arg(long = "Tmax", default_value_t = 200.0)]
    pub big_tmax: f64,
    /// Largest dyadic exponent for the classification.
    #[arg(long, default_value_t = 14)]
    pub kmax: u32,
    /// Initial state for propagation (vector records); defaults to e_0.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Random seed (hexadecimal).
    #[arg(long, value_parser = parse_hex, default_value = "5EED")]
    pub seed: u64,
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("need finite LO < HI, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_hex(s: &str) -> Result<u64, String> {
    u64::from_str_radix(s.trim_start_matches("0x"), 16).map_err(|e| e.to_string())
}

/// Fully resolved run configuration, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub task: Task,
    pub symbol_path: PathBuf,
    pub perturbation_path: Option<PathBuf>,
    pub operator: Operator,
    pub half_length: usize,
    pub grid: usize,
    pub s: f64,
    pub sigma: f64,
    pub delta: Option<(f64, f64)>,
    pub gap: Option<(f64, f64)>,
    pub energies: Vec<f64>,
    pub tmax: f64,
    pub big_tmax: f64,
    pub kmax: u32,
    pub state_path: Option<PathBuf>,
    // left out of the report so reruns into another directory match byte for byte
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: String,
    #[serde(skip)]
    pub seed_value: u64,
    #[serde(skip)]
    pub symbol: MatrixSymbol,
    #[serde(skip)]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(skip)]
    pub state: Option<Vec<(i64, Vec<toeplitz_spectra::C64>)>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toeplitz_spectra::Error,
    },
    #[error("{0}")]
    Range(String),
}

fn read(path: &PathBuf) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.clone(),
        source,
    })
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<Self, ConfigError> {
        let range = |ok: bool, msg: String| if ok { Ok(()) } else { Err(ConfigError::Range(msg)) };
        range(
            (1..=MAX_HALF_LENGTH).contains(&cli.half_length),
            format!("--L {} outside 1..={MAX_HALF_LENGTH}", cli.half_length),
        )?;
        range(
            cli.grid.is_power_of_two() && (16..=MAX_GRID).contains(&cli.grid),
            format!("--K {} must be a power of two in 16..={MAX_GRID}", cli.grid),
        )?;
        range(cli.s.is_finite() && cli.s > 0.5, format!("--s {} must exceed 1/2", cli.s))?;
        range(cli.sigma.is_finite() && cli.sigma >= 0.0, format!("--sigma {} must be nonnegative", cli.sigma))?;
        range(cli.tmax.is_finite() && cli.tmax > 0.0, format!("--tmax {} must be positive", cli.tmax))?;
        range(cli.big_tmax.is_finite() && cli.big_tmax > 0.0, format!("--Tmax {} must be positive", cli.big_tmax))?;
        range((4..=20).contains(&cli.kmax), format!("--kmax {} outside 4..=20", cli.kmax))?;
        range(cli.energies.iter().all(|e| e.is_finite()), "--energy must be finite".into())?;

        let symbol = parse_symbol(&read(&cli.symbol)?).map_err(|source| ConfigError::Parse {
            path: cli.symbol.clone(),
            source,
        })?;
        range(
            cli.grid >= 4 * symbol.cutoff() + 4,
            format!("--K {} too small for cutoff {}", cli.grid, symbol.cutoff()),
        )?;
        let perturbation = match &cli.perturbation {
            Some(p) => Some(
                parse_perturbation(&read(p)?, symbol.block_size()).map_err(|source| ConfigError::Parse {
                    path: p.clone(),
                    source,
                })?,
            ),
            None => None,
        };
        let state = match &cli.state {
            Some(p) => Some(parse_vector(&read(p)?, symbol.block_size()).map_err(|source| ConfigError::Parse {
                path: p.clone(),
                source,
            })?),
            None => None,
        };
        if matches!(cli.task, Task::Classify) && perturbation.is_none() {
            return Err(ConfigError::Range("task classify needs --perturbation".into()));
        }
        Ok(RunConfig {
            task: cli.task,
            symbol_path: cli.symbol,
            perturbation_path: cli.perturbation,
            operator: cli.operator,
            half_length: cli.half_length,
            grid: cli.grid,
            s: cli.s,
            sigma: cli.sigma,
            delta: cli.delta,
            gap: cli.gap,
            energies: cli.energies,
            tmax: cli.tmax,
            big_tmax: cli.big_tmax,
            kmax: cli.kmax,
            state_path: cli.state,
            out: cli.out,
            seed: format!("{:X}", cli.seed),
            seed_value: cli.seed,
            symbol,
            perturbation,
            state,
        })
    }

    /// The operator named by `--operator`, with the perturbation if any.
    pub fn model(&self) -> LatticeModel {
        let base = match self.operator {
            Operator::Toeplitz => LatticeModel::toeplitz(self.symbol.clone()),
            Operator::Laurent => LatticeModel::laurent(self.symbol.clone()),
        };
        match &self.perturbation {
            Some(v) => base.with_perturbation(v.clone()),
            None => base,
        }
    }

    /// The two-sided operator, with the perturbation if any.
    pub fn laurent_model(&self) -> LatticeModel {
        let m = LatticeModel::laurent(self.symbol.clone());
        match &self.perturbation {
            Some(v) => m.with_perturbation(v.clone()),
            None => m,
        }
    }
}
