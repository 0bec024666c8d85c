//! Run configuration shared by the config file and the command line.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use flagint::exponents::ExponentConfig;
use flagint::quadrature::{Method, QuadratureSpec};
use flagint::rational::{format_rational, parse_rational};
use flagint::Rational;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Check,
    Kernel,
    Apply,
    AtomValidate,
    Shells,
    Dilate,
    Counterexample,
    Frontier,
    Hls,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::Kernel => "kernel",
            Self::Apply => "apply",
            Self::AtomValidate => "atom-validate",
            Self::Shells => "shells",
            Self::Dilate => "dilate",
            Self::Counterexample => "counterexample",
            Self::Frontier => "frontier",
            Self::Hls => "hls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Grid,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionArg {
    /// Smooth bump centred at the origin with half widths 1/2.
    Bump,
    /// Indicator of `[-1/2, 1/2]^{n+m}`.
    Box,
}

/// Every field is optional so file and flags can be merged; flags win.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Only read from config files; subcommands fix it on the command line.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    /// Exact rational such as `9/10`; decimals are converted exactly.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,

    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodArg>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_axis: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rel_error: Option<f64>,

    /// Point `x` for `kernel` and `apply`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<String>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_extra: Option<u32>,
    /// Cube scale `L` (side `2^L`) for generated atoms.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<i32>,
    /// `signum`, `signum-style`, `random`, `bump`, or a path to an atom JSON file.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<String>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionArg>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_hi: Option<Vec<f64>>,
    /// Directory for the CSV and JSON artifacts.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Problem with the configuration, reported with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn field_err(field: &str, e: impl std::fmt::Display) -> UsageError {
    UsageError(format!("field `{field}`: {e}"))
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

pub const SEED_ENV: &str = "FLAGINT_SEED";

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    /// Copies every field set in `other` over `self`.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(self, other; experiment, n, m, alpha, beta, rho, p, q, method, samples, points_per_axis,
            seed, target_rel_error, x, y, deltas, lambdas, radii, alphas, betas, k_max, l_extra, scale,
            atom, function, window_lo, window_hi, output);
    }

    /// `file`, then `FLAGINT_SEED`, then flags.
    pub fn merged(file: Option<RunConfig>, env_seed: Option<&str>, flags: &RunConfig) -> Result<Self, UsageError> {
        let mut cfg = file.unwrap_or_default();
        if let Some(s) = env_seed {
            cfg.seed = Some(s.trim().parse().map_err(|e| field_err(SEED_ENV, e))?);
        }
        cfg.overlay(flags);
        Ok(cfg)
    }

    /// Rewrites rational fields in canonical `p/q` form.
    pub fn canonical(&self) -> Result<Self, UsageError> {
        let mut c = self.clone();
        for (name, v) in [("alpha", &mut c.alpha), ("beta", &mut c.beta), ("rho", &mut c.rho), ("p", &mut c.p), ("q", &mut c.q)] {
            if let Some(s) = v {
                *s = format_rational(&rational(name, s)?);
            }
        }
        for (name, v) in [("alphas", &mut c.alphas), ("betas", &mut c.betas), ("deltas", &mut c.deltas), ("lambdas", &mut c.lambdas), ("radii", &mut c.radii)] {
            if let Some(list) = v {
                for s in list.iter_mut() {
                    *s = format_rational(&rational(name, s)?);
                }
            }
        }
        Ok(c)
    }

    pub fn require<T: Clone>(v: &Option<T>, field: &str) -> Result<T, UsageError> {
        v.clone().ok_or_else(|| UsageError(format!("field `{field}` is required")))
    }

    pub fn exact(&self, field: &str) -> Result<Option<Rational>, UsageError> {
        let v = match field {
            "alpha" => &self.alpha,
            "beta" => &self.beta,
            "rho" => &self.rho,
            "p" => &self.p,
            "q" => &self.q,
            _ => unreachable!("not a rational field"),
        };
        v.as_deref().map(|s| rational(field, s)).transpose()
    }

    fn exact_required(&self, field: &str) -> Result<Rational, UsageError> {
        self.exact(field)?.ok_or_else(|| UsageError(format!("field `{field}` is required")))
    }

    /// `(n, m, alpha, beta, rho)` plus whichever of `p`, `q` are present.
    pub fn exponents(&self) -> Result<ExponentConfig<Rational>, UsageError> {
        let n = Self::require(&self.n, "n")?;
        let m = Self::require(&self.m, "m")?;
        let alpha = self.exact_required("alpha")?;
        let beta = self.exact_required("beta")?;
        let rho = self.exact_required("rho")?;
        let mut cfg = ExponentConfig::new(n, m, alpha, beta, rho).map_err(|e| UsageError(e.to_string()))?;
        if let Some(q) = self.exact("q")? {
            cfg = cfg.with_q(q).map_err(|e| field_err("q", e))?;
        }
        if let Some(p) = self.exact("p")? {
            cfg = cfg.with_p(p).map_err(|e| field_err("p", e))?;
        }
        Ok(cfg)
    }

    pub fn spec(&self) -> Result<QuadratureSpec, UsageError> {
        let mut s = QuadratureSpec::default();
        if let Some(m) = self.method {
            s.method = match m {
                MethodArg::Grid => Method::Grid,
                MethodArg::MonteCarlo => Method::MonteCarlo,
            };
        }
        if let Some(v) = self.samples {
            s.samples = v;
        }
        if let Some(v) = self.points_per_axis {
            s.points_per_axis = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.target_rel_error {
            s.target_rel_error = v;
        }
        s.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(s)
    }

    pub fn floats(list: &Option<Vec<String>>, field: &str, default: &[f64]) -> Result<Vec<f64>, UsageError> {
        match list {
            None => Ok(default.to_vec()),
            Some(v) => v.iter().map(|s| rational(field, s).map(|r| flagint::scalar::ExactScalar::to_f64(&r))).collect(),
        }
    }

    pub fn rationals(list: &Option<Vec<String>>, field: &str) -> Result<Option<Vec<Rational>>, UsageError> {
        list.as_ref().map(|v| v.iter().map(|s| rational(field, s)).collect()).transpose()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("flagint-out"))
    }
}

fn rational(field: &str, s: &str) -> Result<Rational, UsageError> {
    parse_rational(s).map_err(|e| field_err(field, e))
}
