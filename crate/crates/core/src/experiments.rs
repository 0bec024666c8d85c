//! Scans that set measured masses and norms against the exponent predictions.
//!
//! Every scan returns a [`ScanResult`] whose rows are a pure function of the
//! inputs and the quadrature spec. Rows are computed in parallel and collected
//! in parameter order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::atoms::{make_signum_atom, Atom};
use crate::domain::Shell;
use crate::error::{Error, Result};
use crate::exponents::ExponentConfig;
use crate::kernel::FlagKernel;
use crate::quadrature::{
    lp_norm, lq_mass, lq_mass_with, lq_norm_from_mass, Estimate, KernelShape, QuadratureSpec, Region, TestFunction,
};
use crate::rational::format_rational;
use crate::scalar::{compensated_sum, ExactScalar};

type Cfg = ExponentConfig<BigRational>;

/// One measured cell of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub params: Vec<f64>,
    pub value: f64,
    pub err: f64,
    pub label: String,
    pub case: String,
    /// Secondary measurements, JSON only.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub const UNRESOLVED: &str = "UNRESOLVED";

impl ScanRow {
    pub fn new(params: Vec<f64>, est: Estimate<f64>) -> Self {
        Self {
            params,
            value: est.value,
            err: est.error,
            label: String::new(),
            case: String::new(),
            extra: BTreeMap::new(),
            note: None,
        }
    }

    pub fn unresolved(params: Vec<f64>, e: &Error) -> Self {
        Self {
            params,
            value: f64::NAN,
            err: f64::NAN,
            label: UNRESOLVED.into(),
            case: String::new(),
            extra: BTreeMap::new(),
            note: Some(e.to_string()),
        }
    }

    pub fn is_unresolved(&self) -> bool {
        self.label == UNRESOLVED
    }

    fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn with_extra(mut self, key: &str, v: f64) -> Self {
        self.extra.insert(key.into(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub config: Value,
    pub spec: QuadratureSpec,
    pub seed: u64,
    pub wall_time_s: f64,
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub experiment: String,
    pub param_names: Vec<String>,
    pub rows: Vec<ScanRow>,
    pub summary: Value,
    pub metadata: Metadata,
}

/// Shortest round-trip decimal; scientific outside `[1e-4, 1e16)`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl ScanResult {
    pub fn new(experiment: &str, param_names: &[&str], rows: Vec<ScanRow>, config: Value, spec: &QuadratureSpec, started: Instant) -> Self {
        Self {
            experiment: experiment.into(),
            param_names: param_names.iter().map(|s| s.to_string()).collect(),
            rows,
            summary: Value::Null,
            metadata: Metadata {
                config,
                spec: spec.clone(),
                seed: spec.seed,
                wall_time_s: started.elapsed().as_secs_f64(),
                timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            },
        }
    }

    pub fn unresolved_count(&self) -> usize {
        self.rows.iter().filter(|r| r.is_unresolved()).count()
    }

    /// CSV with columns `params..., value, err, label, case`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.param_names.iter().map(String::as_str).collect();
        header.extend(["value", "err", "label", "case"]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.params.iter().map(|&p| format_number(p)).collect();
            rec.push(format_number(r.value));
            rec.push(format_number(r.err));
            rec.push(r.label.clone());
            rec.push(r.case.clone());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `{experiment}-{seed}.csv` and `.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let stem = format!("{}-{}", self.experiment, self.metadata.seed);
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        std::fs::write(&csv_path, self.to_csv()?)?;
        std::fs::write(&json_path, self.to_json()?)?;
        Ok((csv_path, json_path))
    }
}

pub fn config_json(cfg: &Cfg) -> Value {
    let opt = |v: Option<&BigRational>| v.map(format_rational);
    json!({
        "n": cfg.n(),
        "m": cfg.m(),
        "alpha": format_rational(cfg.alpha()),
        "beta": format_rational(cfg.beta()),
        "rho": format_rational(cfg.rho()),
        "p": opt(cfg.p()),
        "q": opt(cfg.q()),
    })
}

/// Least-squares line through `log2` data with the first point dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    /// Linear propagation of the per-point errors into the slope.
    pub slope_err: f64,
    /// Half-open index range of the points used.
    pub window: (usize, usize),
}

impl DecayFit {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::fit_with_errors(xs, ys, &vec![0.0; ys.len()])
    }

    pub fn fit_with_errors(xs: &[f64], ys: &[f64], yerr: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || ys.len() != yerr.len() {
            return Err(Error::InvalidConfig("fit inputs differ in length".into()));
        }
        let window = (1.min(xs.len()), xs.len());
        let len = window.1 - window.0;
        if len < 4 {
            return Err(Error::FitWindow(len));
        }
        let (x, y, e) = (&xs[window.0..], &ys[window.0..], &yerr[window.0..]);
        let (slope, intercept, residual) = least_squares(x, y);
        let xm = x.iter().sum::<f64>() / len as f64;
        let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
        let slope_err = x.iter().zip(e).map(|(v, e)| ((v - xm) / sxx).abs() * e).sum();
        Ok(Self { slope, intercept, residual, slope_err, window })
    }
}

/// `(slope, intercept, rms residual)`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - slope * xm;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, (ss / n).sqrt())
}

fn f64_of(r: &BigRational) -> f64 {
    r.to_f64()
}

fn require_q(cfg: &Cfg) -> Result<BigRational> {
    cfg.q().cloned().ok_or(Error::Incomplete("q"))
}

fn dilate_box(lo: &[f64], hi: &[f64], n: usize, delta: f64, rho: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let s = |i: usize| if i < n { delta } else { delta.powf(rho) * lambda };
    (
        lo.iter().enumerate().map(|(i, v)| v * s(i)).collect(),
        hi.iter().enumerate().map(|(i, v)| v * s(i)).collect(),
    )
}

/// Bounding box of `f` doubled about its centre.
fn default_window(f: &TestFunction<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = f.bounding_box().ok_or_else(|| Error::Precondition("test function is zero".into()))?;
    let c: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok((
        lo.iter().zip(&c).map(|(a, c)| c - 2.0 * (c - a)).collect(),
        hi.iter().zip(&c).map(|(b, c)| c + 2.0 * (b - c)).collect(),
    ))
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

// ---------------------------------------------------------------- dilation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilationSummary {
    /// `(alpha + rho beta) + (n + rho m)(1/q - 1/p)`
    pub predicted_delta_slope: f64,
    pub delta_fit: Option<DecayFit>,
    pub lambda_fit: Option<DecayFit>,
    /// `alpha + rho beta + (n + rho m)/q`
    pub delta_exponent: f64,
    /// `beta + m/q`
    pub lambda_exponent: f64,
    /// Largest `|ratio/predicted - 1|` over the `lambda = 1` rows.
    pub identity_max_rel_dev: f64,
    pub lower_bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilationScan {
    pub scan: ScanResult,
    pub summary: DilationSummary,
}

/// `r(delta, lambda) = ||I f_{delta,lambda}||_{q, W_{delta,lambda}} / ||f_{delta,lambda}||_p`
/// where `W` is dilated with the function. Rows cover `({1} u deltas) x ({1} u lambdas)`.
pub fn dilation_scan(
    cfg: &Cfg,
    f: &TestFunction<f64>,
    deltas: &[f64],
    lambdas: &[f64],
    window: Option<(Vec<f64>, Vec<f64>)>,
    spec: &QuadratureSpec,
) -> Result<DilationScan> {
    let started = Instant::now();
    let p = cfg.p().cloned().ok_or(Error::Incomplete("p"))?;
    let q = require_q(cfg)?;
    if !f.is_nonnegative() || f.is_zero() {
        return Err(Error::Precondition("dilation scans need a nonzero nonnegative function".into()));
    }
    if deltas.iter().chain(lambdas).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidConfig("dilation factors must be positive and finite".into()));
    }
    let (wlo, whi) = match window {
        Some(w) => w,
        None => default_window(f)?,
    };
    let (n, m) = (cfg.n() as usize, cfg.m() as usize);
    if wlo.len() != n + m || whi.len() != n + m {
        return Err(Error::InvalidConfig("window has wrong dimension".into()));
    }
    let rho = f64_of(cfg.rho());
    let (alpha, beta) = (f64_of(cfg.alpha()), f64_of(cfg.beta()));
    let (pf, qf) = (f64_of(&p), f64_of(&q));
    let (nf, mf) = (n as f64, m as f64);
    let delta_exponent = alpha + rho * beta + (nf + rho * mf) / qf;
    let lambda_exponent = beta + mf / qf;
    let predicted_delta_slope = alpha + rho * beta + (nf + rho * mf) * (1.0 / qf - 1.0 / pf);

    let ds = sorted_unique(deltas.iter().copied().chain([1.0]).collect());
    let ls = sorted_unique(lambdas.iter().copied().chain([1.0]).collect());
    let pairs: Vec<(f64, f64)> = ds.iter().flat_map(|&d| ls.iter().map(move |&l| (d, l))).collect();

    let measure = |d: f64, l: f64| -> Result<(Estimate<f64>, Estimate<f64>)> {
        let fd = f.dilated(d, rho, l);
        let (lo, hi) = dilate_box(&wlo, &whi, n, d, rho, l);
        let mass = lq_mass(cfg, &fd, &Region::Box { lo, hi }, &q, spec)?;
        Ok((lq_norm_from_mass(mass, qf), lp_norm(&fd, &p, spec)?))
    };
    let measured: Vec<Result<(Estimate<f64>, Estimate<f64>)>> = pairs.par_iter().map(|&(d, l)| measure(d, l)).collect();
    let base = pairs
        .iter()
        .position(|&pr| pr == (1.0, 1.0))
        .and_then(|i| measured[i].as_ref().ok())
        .map(|(qn, _)| *qn);

    let mut rows = Vec::with_capacity(pairs.len());
    let mut identity_max_rel_dev = 0.0f64;
    let mut lower_bound_ok = true;
    for (&(d, l), res) in pairs.iter().zip(&measured) {
        let (qn, pn) = match res {
            Ok(v) => *v,
            Err(e) => {
                rows.push(ScanRow::unresolved(vec![d, l], e));
                lower_bound_ok = false;
                identity_max_rel_dev = f64::NAN;
                continue;
            }
        };
        let r = qn.value / pn.value;
        let r_err = r * (qn.error / qn.value + pn.error / pn.value);
        let mut row = ScanRow::new(vec![d, l], Estimate { value: r, error: r_err })
            .with_extra("q_norm", qn.value)
            .with_extra("q_norm_err", qn.error)
            .with_extra("p_norm", pn.value);
        if let Some(b) = base {
            let ratio = qn.value / b.value;
            let ratio_err = ratio * (qn.error / qn.value + b.error / b.value);
            let predicted = d.powf(delta_exponent) * l.powf(lambda_exponent);
            row = row.with_extra("q_ratio", ratio).with_extra("q_ratio_err", ratio_err).with_extra("predicted", predicted);
            if (d, l) == (1.0, 1.0) {
                row = row.with_label("baseline");
            } else if l == 1.0 {
                let dev = (ratio / predicted - 1.0).abs();
                identity_max_rel_dev = identity_max_rel_dev.max(dev);
                row = row.with_extra("rel_dev", dev).with_label("identity");
            } else {
                let ok = l < 1.0 || ratio >= predicted - ratio_err;
                lower_bound_ok &= ok;
                row = row.with_label(if ok { "lower-bound:ok" } else { "lower-bound:VIOLATED" });
            }
        }
        rows.push(row);
    }

    let fit_along = |select: &dyn Fn(f64, f64) -> Option<f64>| -> Option<DecayFit> {
        let mut pts: Vec<(f64, f64, f64)> = Vec::new();
        for r in &rows {
            if let Some(t) = select(r.params[0], r.params[1]) {
                if r.is_unresolved() {
                    return None;
                }
                pts.push((t.log2(), r.value.log2(), r.err / r.value / std::f64::consts::LN_2));
            }
        }
        let (x, y, e): (Vec<f64>, Vec<f64>, Vec<f64>) =
            pts.into_iter().fold((vec![], vec![], vec![]), |(mut a, mut b, mut c), (u, v, w)| {
                a.push(u);
                b.push(v);
                c.push(w);
                (a, b, c)
            });
        DecayFit::fit_with_errors(&x, &y, &e).ok()
    };
    let delta_fit = fit_along(&|d, l| (l == 1.0).then_some(d));
    let lambda_fit = fit_along(&|d, l| (d == 1.0).then_some(l));

    let summary = DilationSummary {
        predicted_delta_slope,
        delta_fit,
        lambda_fit,
        delta_exponent,
        lambda_exponent,
        identity_max_rel_dev,
        lower_bound_ok,
    };
    let config = json!({
        "exponents": config_json(cfg),
        "deltas": deltas,
        "lambdas": lambdas,
        "window": {"lo": wlo, "hi": whi},
    });
    let mut scan = ScanResult::new("dilate", &["delta", "lambda"], rows, config, spec, started);
    scan.summary = serde_json::to_value(&summary)?;
    Ok(DilationScan { scan, summary })
}

// ---------------------------------------------------------------- counterexample

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSummary {
    pub increments: Vec<f64>,
    pub strictly_increasing: bool,
    /// `max/min - 1` over the per-radius increments after the first radius.
    pub increment_spread: f64,
    /// Least-squares `F ~ c log10 R + d`.
    pub log_rate: f64,
    pub log_intercept: f64,
    /// RMS residual of that fit over the range of `F`.
    pub log_residual_fraction: f64,
    /// Last increment over the final `F`.
    pub last_increment_fraction: f64,
    pub growth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthScan {
    pub scan: ScanResult,
    pub summary: GrowthSummary,
}

/// Increments below this fraction of `F` count as convergence.
pub const GROWTH_FRACTION: f64 = 0.05;

/// `F(R) = int_{U x {|y| <= R}} |I a|^q` with `U = [2, 4]^n`, accumulated over
/// the annuli between consecutive radii.
pub fn counterexample_growth(cfg: &Cfg, atom: &Atom<f64>, radii: &[f64], spec: &QuadratureSpec) -> Result<GrowthScan> {
    let started = Instant::now();
    let q = require_q(cfg)?;
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("radii must be positive and strictly increasing".into()));
    }
    let n = cfg.n() as usize;
    let bounds: Vec<(f64, f64)> = std::iter::once(0.0).chain(radii.iter().copied()).zip(radii.iter().copied()).collect();
    let pieces: Vec<Result<Estimate<f64>>> = bounds
        .par_iter()
        .map(|&(inner, outer)| {
            let region = Region::BoxAnnulus { lo: vec![2.0; n], hi: vec![4.0; n], inner, outer };
            lq_mass(cfg, &atom.payload, &region, &q, spec)
        })
        .collect();

    let mut rows = Vec::with_capacity(radii.len());
    let mut acc: Vec<f64> = Vec::new();
    let mut err = 0.0;
    let mut broken = false;
    for (&r, res) in radii.iter().zip(&pieces) {
        match res {
            Ok(e) if !broken => {
                acc.push(e.value);
                err += e.error;
                let f = compensated_sum(acc.iter().copied());
                rows.push(ScanRow::new(vec![r], Estimate { value: f, error: err }).with_extra("increment", e.value));
            }
            Ok(_) => rows.push(ScanRow::unresolved(vec![r], &Error::Precondition("earlier annulus unresolved".into()))),
            Err(e) => {
                broken = true;
                rows.push(ScanRow::unresolved(vec![r], e));
            }
        }
    }
    let fs: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let increments: Vec<f64> = fs.windows(2).map(|w| w[1] - w[0]).collect();
    let strictly_increasing = !broken && increments.iter().all(|&d| d > 0.0);
    let (mn, mx) = increments.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let increment_spread = if increments.is_empty() || mn <= 0.0 { f64::NAN } else { mx / mn - 1.0 };
    let x: Vec<f64> = radii.iter().map(|r| r.log10()).collect();
    let (log_rate, log_intercept, res) = least_squares(&x, &fs);
    let range = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - fs.iter().copied().fold(f64::INFINITY, f64::min);
    let log_residual_fraction = if range > 0.0 { res / range } else { 0.0 };
    let last = *fs.last().unwrap_or(&f64::NAN);
    let last_increment_fraction = increments.last().map_or(f64::NAN, |d| d / last);
    let growth = strictly_increasing && last_increment_fraction >= GROWTH_FRACTION;
    for (row, frac) in rows.iter_mut().skip(1).zip(increments.iter().map(|d| d / last)) {
        if !row.is_unresolved() {
            row.label = if frac >= GROWTH_FRACTION { "growing" } else { "settled" }.into();
        }
    }
    let summary = GrowthSummary {
        increments,
        strictly_increasing,
        increment_spread,
        log_rate,
        log_intercept,
        log_residual_fraction,
        last_increment_fraction,
        growth,
    };
    let config = json!({
        "exponents": config_json(cfg),
        "radii": radii,
        "atom": atom.to_json().ok(),
    });
    let mut scan = ScanResult::new("counterexample", &["R"], rows, config, spec, started);
    scan.summary = serde_json::to_value(&summary)?;
    Ok(GrowthScan { scan, summary })
}

// ---------------------------------------------------------------- shells

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellSummary {
    pub l_max: u32,
    pub burn_in: u32,
    /// Mass over `k`-th shells summed over all `l`, with a geometric `l` tail.
    pub k_masses: Vec<f64>,
    /// The same restricted to `l >= 1` (Case 2), `k >= 1`; index 0 unused.
    pub case2_masses: Vec<f64>,
    pub total_fit: Option<DecayFit>,
    pub case2_fit: Option<DecayFit>,
    pub core_mass: f64,
    pub gap_mass: f64,
    pub total: f64,
    /// Geometric tail beyond `k_max` from the fitted slope.
    pub tail_estimate: f64,
    pub tail_fraction: f64,
    pub slope_ok: bool,
    pub cauchy_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShellScan {
    pub scan: ScanResult,
    pub summary: ShellSummary,
}

pub const SHELL_BURN_IN: u32 = 3;
pub const SHELL_SLOPE_SLACK: f64 = 0.5;
pub const CAUCHY_TAIL: f64 = 0.01;

/// Geometric tail of a decreasing sequence from its last two terms.
fn geometric_tail(v: &[f64]) -> f64 {
    match v {
        [.., a, b] if *a > 0.0 && *b > 0.0 && b < a => {
            let r = b / a;
            b * r / (1.0 - r)
        }
        [.., _, b] => *b * 1e30,
        _ => 0.0,
    }
}

/// Masses over `Q_{kl}`, `0 <= k <= k_max`, `0 <= l <= ceil(rho (k_max + L)) + l_extra`,
/// with `Q_{00}` the cube itself, plus the gap between the cube and the core.
pub fn shell_decay_profile(cfg: &Cfg, atom: &Atom<f64>, k_max: u32, l_extra: u32, spec: &QuadratureSpec) -> Result<ShellScan> {
    let started = Instant::now();
    let q = require_q(cfg)?;
    let scale = atom.scale();
    let rho = f64_of(cfg.rho());
    let l_max = (rho * (k_max as f64 + scale as f64)).ceil().max(0.0) as u32 + l_extra;
    let mut shells = vec![Shell::new(0, 0, scale)?];
    shells.extend(Shell::grid(k_max, l_max, scale));
    let masses: Vec<Result<Estimate<f64>>> = shells
        .par_iter()
        .map(|s| {
            let region = if s.k() == 0 && s.l() == 0 { Region::Cube(atom.cube) } else { Region::Shell(*s) };
            lq_mass(cfg, &atom.payload, &region, &q, spec)
        })
        .collect();
    let gap = lq_mass(cfg, &atom.payload, &Region::Gap { scale }, &q, spec);

    let mut rows = Vec::with_capacity(shells.len());
    let mut grid = vec![vec![f64::NAN; l_max as usize + 1]; k_max as usize + 1];
    let mut unresolved = false;
    for (s, res) in shells.iter().zip(&masses) {
        let params = vec![s.k() as f64, s.l() as f64];
        let row = match res {
            Ok(e) => {
                grid[s.k() as usize][s.l() as usize] = e.value;
                ScanRow::new(params, *e)
            }
            Err(e) => {
                unresolved = true;
                ScanRow::unresolved(params, e)
            }
        };
        rows.push(ScanRow { case: s.case(cfg).to_string(), ..row });
    }
    let gap_mass = match &gap {
        Ok(e) => e.value,
        Err(_) => {
            unresolved = true;
            f64::NAN
        }
    };

    let k_masses: Vec<f64> = grid.iter().map(|ls| compensated_sum(ls.iter().copied()) + geometric_tail(ls)).collect();
    let case2_masses: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(k, ls)| if k == 0 { 0.0 } else { compensated_sum(ls[1..].iter().copied()) + geometric_tail(&ls[1..]) })
        .collect();
    let fit = |v: &[f64]| -> Option<DecayFit> {
        let ks: Vec<f64> = (SHELL_BURN_IN..=k_max).map(f64::from).collect();
        let ys: Vec<f64> = (SHELL_BURN_IN..=k_max).map(|k| v[k as usize].log2()).collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return None;
        }
        DecayFit::fit(&ks, &ys).ok()
    };
    let total_fit = if unresolved { None } else { fit(&k_masses) };
    let case2_fit = if unresolved { None } else { fit(&case2_masses) };
    let qf = f64_of(&q);
    let slope_ok = total_fit.is_some_and(|f| f.slope <= -qf + SHELL_SLOPE_SLACK);
    let core_mass = grid[0][0];
    let total = compensated_sum(k_masses.iter().copied().chain([gap_mass]));
    let tail_estimate = match total_fit {
        Some(f) if f.slope < 0.0 => {
            let r = f.slope.exp2();
            k_masses[k_max as usize] * r / (1.0 - r)
        }
        _ => f64::INFINITY,
    };
    let tail_fraction = tail_estimate / total;
    let cauchy_ok = tail_fraction < CAUCHY_TAIL;
    let summary = ShellSummary {
        l_max,
        burn_in: SHELL_BURN_IN,
        k_masses,
        case2_masses,
        total_fit,
        case2_fit,
        core_mass,
        gap_mass,
        total,
        tail_estimate,
        tail_fraction,
        slope_ok,
        cauchy_ok,
    };
    let config = json!({
        "exponents": config_json(cfg),
        "k_max": k_max,
        "l_extra": l_extra,
        "atom": atom.to_json().ok(),
    });
    let mut scan = ScanResult::new("shells", &["k", "l"], rows, config, spec, started);
    scan.summary = serde_json::to_value(&summary)?;
    Ok(ShellScan { scan, summary })
}

// ---------------------------------------------------------------- frontier

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierOptions {
    pub deltas: Vec<f64>,
    pub radii: Vec<f64>,
    /// `|delta-slope|` above this is read as a broken scaling law.
    pub slope_tolerance: f64,
}

impl Default for FrontierOptions {
    fn default() -> Self {
        Self {
            deltas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            radii: vec![10.0, 100.0, 1000.0, 10000.0],
            slope_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierSummary {
    /// `confusion[theorem][empirical]`, index 0 bounded, 1 unbounded.
    pub confusion: [[usize; 2]; 2],
    pub unresolved: usize,
    pub diagonal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierScan {
    pub scan: ScanResult,
    pub summary: FrontierSummary,
}

/// Theorem label from the exact `H^1 -> L^q` region and empirical label from a
/// `delta`-slope scan with `p = 1`, followed on the homogeneity line by the
/// signum-atom growth scan.
pub fn frontier_map(
    n: u32,
    m: u32,
    rho: &BigRational,
    q: &BigRational,
    alphas: &[BigRational],
    betas: &[BigRational],
    opts: &FrontierOptions,
    spec: &QuadratureSpec,
) -> Result<FrontierScan> {
    let started = Instant::now();
    let mut cells = Vec::new();
    for a in alphas {
        for b in betas {
            cells.push(ExponentConfig::new(n, m, a.clone(), b.clone(), rho.clone())?.with_pq(BigRational::from_int(1), q.clone())?);
        }
    }
    let d = (n + m) as usize;
    let f = TestFunction::indicator_box(n as usize, vec![-0.5; d], vec![0.5; d], 1.0)?;
    let atom = make_signum_atom::<f64>(n as usize, m as usize)?;

    let classify = |cfg: &Cfg| -> (ScanRow, Option<(bool, bool)>) {
        let params = vec![f64_of(cfg.alpha()), f64_of(cfg.beta())];
        let theorem = match cfg.check_formula_two() {
            Ok(v) => v,
            Err(e) => return (ScanRow::unresolved(params, &e), None),
        };
        let dil = match dilation_scan(cfg, &f, &opts.deltas, &[], None, spec) {
            Ok(s) => s,
            Err(e) => return (ScanRow::unresolved(params, &e), None),
        };
        let Some(fit) = dil.summary.delta_fit else {
            let e = Error::Accuracy { reason: "delta-slope fit unavailable".into(), estimate: f64::NAN, error: f64::NAN };
            return (ScanRow::unresolved(params, &e), None);
        };
        let mut row = ScanRow::new(params.clone(), Estimate { value: fit.slope, error: fit.slope_err })
            .with_extra("predicted_slope", dil.summary.predicted_delta_slope);
        let bounded = if fit.slope.abs() > opts.slope_tolerance {
            row.case = "dilation".into();
            false
        } else {
            let g = match counterexample_growth(cfg, &atom, &opts.radii, spec) {
                Ok(g) => g,
                Err(e) => return (ScanRow::unresolved(params, &e), None),
            };
            if g.scan.unresolved_count() > 0 {
                let e = Error::Accuracy { reason: "growth scan unresolved".into(), estimate: f64::NAN, error: f64::NAN };
                return (ScanRow::unresolved(params, &e), None);
            }
            row = row.with_extra("last_increment_fraction", g.summary.last_increment_fraction);
            row.case = "growth".into();
            !g.summary.growth
        };
        let word = |b: bool| if b { "BOUNDED" } else { "UNBOUNDED" };
        row.label = format!("THEOREM-{}/EMPIRICAL-{}", word(theorem), word(bounded));
        (row, Some((theorem, bounded)))
    };
    let results: Vec<(ScanRow, Option<(bool, bool)>)> = cells.par_iter().map(classify).collect();
    let mut confusion = [[0usize; 2]; 2];
    let mut unresolved = 0;
    let mut rows = Vec::with_capacity(results.len());
    for (row, lab) in results {
        match lab {
            Some((t, e)) => confusion[usize::from(!t)][usize::from(!e)] += 1,
            None => unresolved += 1,
        }
        rows.push(row);
    }
    let summary = FrontierSummary { confusion, unresolved, diagonal: confusion[0][1] == 0 && confusion[1][0] == 0 };
    let config = json!({
        "n": n,
        "m": m,
        "rho": format_rational(rho),
        "q": format_rational(q),
        "alphas": alphas.iter().map(format_rational).collect::<Vec<_>>(),
        "betas": betas.iter().map(format_rational).collect::<Vec<_>>(),
        "options": opts,
    });
    let mut scan = ScanResult::new("frontier", &["alpha", "beta"], rows, config, spec, started);
    scan.summary = serde_json::to_value(&summary)?;
    Ok(FrontierScan { scan, summary })
}

/// Text table of a confusion matrix.
pub fn format_confusion(c: &[[usize; 2]; 2]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>20} {:>10} {:>10}", "", "emp-bdd", "emp-unbdd");
    let _ = writeln!(s, "{:>20} {:>10} {:>10}", "theorem-bounded", c[0][0], c[0][1]);
    let _ = write!(s, "{:>20} {:>10} {:>10}", "theorem-unbounded", c[1][0], c[1][1]);
    s
}

// ---------------------------------------------------------------- product kernel

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HlsReport {
    pub a: f64,
    pub b: f64,
    /// `||I f||_{q, W}`
    pub left: Estimate<f64>,
    /// `||P f||_{q, W}` for the dominating product kernel.
    pub right: Estimate<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HlsScan {
    pub scan: ScanResult,
    pub report: HlsReport,
}

/// Compares the flag operator with its dominating product operator on a window.
pub fn hls_iteration_check(
    cfg: &Cfg,
    f: &TestFunction<f64>,
    window: Option<(Vec<f64>, Vec<f64>)>,
    spec: &QuadratureSpec,
) -> Result<HlsScan> {
    let started = Instant::now();
    if !cfg.check_formula_one()? {
        return Err(Error::Region("the L^p -> L^q conditions do not hold".into()));
    }
    if cfg.n() + cfg.m() > 3 {
        return Err(Error::Precondition("the product-kernel comparison is limited to n + m <= 3".into()));
    }
    if !f.is_nonnegative() {
        return Err(Error::Precondition("the comparison needs a nonnegative function".into()));
    }
    let q = require_q(cfg)?;
    let qf = f64_of(&q);
    let ab = cfg.derive_ab()?;
    let flag = FlagKernel::<f64>::new(cfg);
    let product = KernelShape::Product(flag.product_kernel(&ab));
    let (a, b) = (f64_of(&ab.a), f64_of(&ab.b));
    let (lo, hi) = match window {
        Some(w) => w,
        None if f.is_zero() => {
            let d = (cfg.n() + cfg.m()) as usize;
            (vec![-1.0; d], vec![1.0; d])
        }
        None => default_window(f)?,
    };
    let region = Region::Box { lo: lo.clone(), hi: hi.clone() };
    let left = lq_norm_from_mass(lq_mass(cfg, f, &region, &q, spec)?, qf);
    let right = lq_norm_from_mass(lq_mass_with(&product, f, &region, qf, spec)?, qf);
    let holds = left.value <= right.value + left.error + right.error;
    let report = HlsReport { a, b, left, right, holds };
    let row = ScanRow::new(vec![f64_of(cfg.alpha()), f64_of(cfg.beta()), a, b], left)
        .with_extra("right", right.value)
        .with_extra("right_err", right.error)
        .with_label(if holds { "holds" } else { "VIOLATED" });
    let config = json!({"exponents": config_json(cfg), "window": {"lo": lo, "hi": hi}});
    let mut scan = ScanResult::new("hls", &["alpha", "beta", "a", "b"], vec![row], config, spec, started);
    scan.summary = serde_json::to_value(&report)?;
    Ok(HlsScan { scan, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn r(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn fit_drops_first_point_and_needs_four() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [10.0, -2.0, -4.0, -6.0, -8.0];
        let f = DecayFit::fit(&xs, &ys).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert_eq!(f.window, (1, 5));
        assert_eq!(DecayFit::fit(&xs[..4], &ys[..4]), Err(Error::FitWindow(3)));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, 0.1, 1e-7, 123456.789, 3.0e20, -2.5e-9] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_number(f64::NAN), "NaN");
    }

    #[test]
    fn hls_zero_function() {
        let cfg = ExponentConfig::new(1, 1, r("1/2"), r("1/2"), r("2")).unwrap().with_pq(r("1"), r("2")).unwrap();
        let z = TestFunction::<f64>::zero(1, 1);
        let out = hls_iteration_check(&cfg, &z, None, &QuadratureSpec::default()).unwrap();
        assert_eq!(out.report.left.value, 0.0);
        assert_eq!(out.report.right.value, 0.0);
        assert!(out.report.holds);
    }

    #[test]
    fn csv_layout() {
        let cfg = ExponentConfig::new(1, 1, r("1/2"), r("1/2"), r("2")).unwrap().with_q(r("2")).unwrap();
        let atom = make_signum_atom::<f64>(1, 1).unwrap();
        let g = counterexample_growth(&cfg, &atom, &[10.0, 10.0], &QuadratureSpec::default());
        assert!(g.is_err());
        let g = counterexample_growth(&cfg, &atom, &[2.0, 4.0], &QuadratureSpec::default()).unwrap();
        let csv = g.scan.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("R,value,err,label,case"));
        assert_eq!(csv.lines().count(), 3);
        assert!(g.summary.strictly_increasing);
    }
}
