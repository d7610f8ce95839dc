//! Solver settings shared by the commands: built-in defaults, then the `--config` file, then flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fnls_core::solver::{Scheme, Start};
use fnls_core::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SHIFT: f64 = 0.2;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Explicit,
    SemiImplicit,
    Lbfgs,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Explicit => Scheme::Explicit,
            SchemeArg::SemiImplicit => Scheme::SemiImplicit,
            SchemeArg::Lbfgs => Scheme::Lbfgs,
        }
    }
}

/// Every field optional so that file and flag layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Exponent p
    #[arg(long)]
    pub p: Option<f64>,
    /// Half width L of the domain [-L, L] (default: sizing rule)
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub half_width: Option<f64>,
    /// Grid spacing
    #[arg(long)]
    pub h: Option<f64>,
    /// Residual tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Initial flow step
    #[arg(long)]
    pub tau: Option<f64>,
    /// Shift c of the implicit operator -D_xx + c
    #[arg(long = "c")]
    #[serde(rename = "c")]
    pub shift: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Initial bump distance
    #[arg(long)]
    pub xn_seed: Option<f64>,
    /// Rotation applied to the start pair
    #[arg(long)]
    pub mixing_angle: Option<f64>,
    /// Start from a random pair with this seed instead of the two-soliton ansatz
    #[arg(long)]
    pub random_start: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($lo:expr, $hi:expr, $($f:ident),*) => {
        Settings { $($f: $hi.$f.clone().or_else(|| $lo.$f.clone())),* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }

    /// Fields of `self` win over `lower`.
    pub fn over(&self, lower: &Settings) -> Settings {
        overlay!(
            lower,
            self,
            p,
            half_width,
            h,
            tol,
            tau,
            shift,
            scheme,
            max_iterations,
            xn_seed,
            mixing_angle,
            random_start,
            out_dir
        )
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn require_p(&self) -> Result<f64, CliError> {
        self.p.ok_or_else(|| CliError::Usage("--p is required (flag or config file)".into()))
    }

    pub fn solver_config(&self, p: f64) -> SolverConfig {
        let mut c = SolverConfig::new(p);
        c.shift = DEFAULT_SHIFT;
        c.tol = DEFAULT_TOL;
        c.scheme = Scheme::Lbfgs;
        c.half_width = self.half_width;
        c.xn_seed = self.xn_seed;
        if let Some(v) = self.h {
            c.h = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.shift {
            c.shift = v;
        }
        if let Some(v) = self.scheme {
            c.scheme = v.into();
        }
        if let Some(v) = self.max_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = self.mixing_angle {
            c.mixing_angle = v;
        }
        if let Some(seed) = self.random_start {
            c.start = Start::Random { seed };
        }
        c
    }
}

/// Final settings for a command.
pub fn resolve(config_file: Option<&Path>, flags: &Settings) -> Result<Settings, CliError> {
    let file = match config_file {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    Ok(flags.over(&file))
}
