//! Experiment dispatch.

use std::time::Instant;

use flagint::atoms::{make_bump_control, make_random_atom, make_signum_atom, make_signum_style_atom, Atom};
use flagint::domain::Cube;
use flagint::experiments::{
    self, config_json, counterexample_growth, dilation_scan, frontier_map, hls_iteration_check, shell_decay_profile,
    FrontierOptions, ScanResult, ScanRow,
};
use flagint::exponents::ExponentConfig;
use flagint::kernel::{FlagKernel, PointPair};
use flagint::quadrature::{apply_operator, QuadratureSpec, TestFunction};
use flagint::rational::format_rational;
use flagint::scalar::ExactScalar;
use flagint::{Error, Rational};
use serde_json::json;

use crate::config::{Experiment, FunctionArg, RunConfig, UsageError};

/// Result of one run: the printed summary, the artifact and the verdict.
#[derive(Debug)]
pub struct Outcome {
    pub summary: String,
    pub pass: bool,
    pub scan: ScanResult,
}

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    /// Numerical failure with no artifact to write.
    Numeric(Error),
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Accuracy { .. } | Error::Singular => RunError::Numeric(e),
            other => RunError::Usage(UsageError(other.to_string())),
        }
    }
}

type Cfg = ExponentConfig<Rational>;

pub fn run(exp: Experiment, rc: &RunConfig) -> Result<Outcome, RunError> {
    let spec = rc.spec()?;
    let mut out = match exp {
        Experiment::Check => check(rc, &spec)?,
        Experiment::Kernel => kernel(rc, &spec)?,
        Experiment::Apply => apply(rc, &spec)?,
        Experiment::AtomValidate => atom_validate(rc, &spec)?,
        Experiment::Shells => shells(rc, &spec)?,
        Experiment::Dilate => dilate(rc, &spec)?,
        Experiment::Counterexample => counterexample(rc, &spec)?,
        Experiment::Frontier => frontier(rc, &spec)?,
        Experiment::Hls => hls(rc, &spec)?,
    };
    let effective = RunConfig { experiment: Some(exp), ..rc.canonical()? };
    let resolved = std::mem::take(&mut out.scan.metadata.config);
    out.scan.metadata.config = json!({ "run": effective, "resolved": resolved });
    Ok(out)
}

fn verdict(b: bool) -> &'static str {
    if b {
        "SATISFIED"
    } else {
        "VIOLATED"
    }
}

fn pass_word(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn check(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let started = Instant::now();
    let cfg = rc.exponents()?;
    let mut lines = Vec::new();
    let one = match (cfg.p(), cfg.q()) {
        (Some(_), Some(_)) => Some(cfg.check_formula_one()?),
        _ => None,
    };
    let two = cfg.q().map(|_| cfg.check_formula_two()).transpose()?;
    lines.push(format!("formula-one: {}", one.map_or("N/A (needs p and q)", verdict)));
    lines.push(format!("formula-two: {}", two.map_or("N/A (needs q)", verdict)));
    lines.push(format!("homogeneity: {}", format_rational(&cfg.homogeneity())));
    let mut row = ScanRow::new(
        vec![f64::from(cfg.n()), f64::from(cfg.m()), cfg.alpha().to_f64(), cfg.beta().to_f64(), cfg.rho().to_f64()],
        flagint::quadrature::Estimate { value: cfg.homogeneity().to_f64(), error: 0.0 },
    );
    row.label = format!(
        "one:{};two:{}",
        one.map_or("NA", |b| if b { "T" } else { "F" }),
        two.map_or("NA", |b| if b { "T" } else { "F" })
    );
    if let Ok(ab) = cfg.derive_ab() {
        lines.push(format!("derived: a = {}, b = {}", format_rational(&ab.a), format_rational(&ab.b)));
    }
    if two == Some(true) {
        let (s1, s2) = cfg.strict_consequences()?;
        lines.push(format!("strict: alpha/n > 1-1/q {s1}, beta/m < 1-1/q {s2}"));
    }
    let scan = ScanResult::new("check", &["n", "m", "alpha", "beta", "rho"], vec![row], config_json(&cfg), spec, started);
    Ok(Outcome { summary: lines.join("\n"), pass: true, scan })
}

fn point(rc: &RunConfig, n: usize, m: usize) -> Result<PointPair<f64>, UsageError> {
    let x = RunConfig::require(&rc.x, "x")?;
    let y = RunConfig::require(&rc.y, "y")?;
    if x.len() != n || y.len() != m {
        return Err(UsageError(format!("fields `x`, `y`: need {n} and {m} coordinates")));
    }
    Ok(PointPair::new(x, y))
}

fn kernel(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let started = Instant::now();
    let cfg = rc.exponents()?;
    let k = FlagKernel::<f64>::new(&cfg);
    let pt = point(rc, cfg.n() as usize, cfg.m() as usize)?;
    let omega = k.eval(&pt)?;
    let mut row = ScanRow::new(pt.joined(), flagint::quadrature::Estimate { value: omega, error: 0.0 });
    let mut pass = true;
    let mut summary = format!("kernel = {omega:e}");
    if let Ok(ab) = cfg.derive_ab() {
        let dom = k.dominating_eval(&ab, &pt)?;
        let ok = omega <= dom * (1.0 + 1e-12);
        pass &= ok;
        row.extra.insert("product_kernel".into(), dom);
        summary.push_str(&format!("; product kernel = {dom:e}; domination {}", pass_word(ok)));
    }
    if let Ok(g) = k.gradient_bound_ratio_checked(&pt) {
        row.extra.insert("gradient_ratio".into(), g);
        summary.push_str(&format!("; gradient ratio = {g:.6}"));
    }
    row.label = pass_word(pass).into();
    let names: Vec<String> = (0..pt.x.len()).map(|i| format!("x{i}")).chain((0..pt.y.len()).map(|i| format!("y{i}"))).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let scan = ScanResult::new("kernel", &names, vec![row], config_json(&cfg), spec, started);
    Ok(Outcome { summary, pass, scan })
}

fn test_function(rc: &RunConfig, n: usize, m: usize) -> Result<TestFunction<f64>, RunError> {
    let d = n + m;
    Ok(match rc.function.unwrap_or(FunctionArg::Bump) {
        FunctionArg::Bump => TestFunction::smooth_bump(n, vec![0.0; d], vec![0.5; d], 1.0)?,
        FunctionArg::Box => TestFunction::indicator_box(n, vec![-0.5; d], vec![0.5; d], 1.0)?,
    })
}

fn window(rc: &RunConfig) -> Result<Option<(Vec<f64>, Vec<f64>)>, UsageError> {
    match (&rc.window_lo, &rc.window_hi) {
        (Some(lo), Some(hi)) => Ok(Some((lo.clone(), hi.clone()))),
        (None, None) => Ok(None),
        _ => Err(UsageError("fields `window_lo` and `window_hi` go together".into())),
    }
}

fn apply(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let started = Instant::now();
    let cfg = rc.exponents()?;
    let (n, m) = (cfg.n() as usize, cfg.m() as usize);
    let pt = point(rc, n, m)?;
    let f = test_function(rc, n, m)?;
    let names: Vec<String> = (0..n).map(|i| format!("x{i}")).chain((0..m).map(|i| format!("y{i}"))).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let (row, summary, pass) = match apply_operator(&cfg, &f, &pt, spec) {
        Ok(e) => (ScanRow::new(pt.joined(), e), format!("I f = {e}"), true),
        Err(e @ Error::Accuracy { .. }) => (ScanRow::unresolved(pt.joined(), &e), format!("UNRESOLVED: {e}"), false),
        Err(e) => return Err(e.into()),
    };
    let scan = ScanResult::new("apply", &names, vec![row], config_json(&cfg), spec, started);
    Ok(Outcome { summary, pass, scan })
}

fn load_atom(rc: &RunConfig, n: usize, m: usize, default: &str) -> Result<Atom<f64>, RunError> {
    let scale = rc.scale.unwrap_or(0);
    let seed = rc.seed.unwrap_or(0);
    let which = rc.atom.clone().unwrap_or_else(|| default.to_string());
    Ok(match which.as_str() {
        "signum" => make_signum_atom(n, m)?,
        "signum-style" => make_signum_style_atom(n, m, scale)?,
        "random" => make_random_atom(Cube::new(n, m, scale), seed)?,
        "bump" => make_bump_control(n, m, scale)?,
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("field `atom`: cannot read {path}: {e}")))?;
            let a = Atom::from_json_str(&text).map_err(|e| UsageError(format!("field `atom`: {e}")))?;
            if a.cube.n != n || a.cube.m != m {
                return Err(UsageError(format!("field `atom`: atom lives on R^{} x R^{}, config on R^{n} x R^{m}", a.cube.n, a.cube.m)).into());
            }
            a
        }
    })
}

fn atom_validate(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let started = Instant::now();
    let n = RunConfig::require(&rc.n, "n")? as usize;
    let m = RunConfig::require(&rc.m, "m")? as usize;
    let atom = load_atom(rc, n, m, "signum-style")?;
    let rep = atom.validate(spec);
    let mut row = ScanRow::new(
        vec![atom.scale() as f64],
        flagint::quadrature::Estimate { value: atom.payload.integral(), error: 0.0 },
    );
    row.extra.insert("sup".into(), atom.payload.sup_abs());
    row.extra.insert("sup_bound".into(), atom.sup_bound());
    row.label = format!("support:{};bound:{};mean:{}", rep.support_ok, rep.bound_ok, rep.mean_ok);
    let summary = format!(
        "atom: support {} bound {} mean {} => {}",
        pass_word(rep.support_ok),
        pass_word(rep.bound_ok),
        pass_word(rep.mean_ok),
        if rep.is_valid() { "VALID" } else { "INVALID" }
    );
    let scan = ScanResult::new("atom-validate", &["L"], vec![row], json!({"atom": atom.to_json().ok()}), spec, started);
    Ok(Outcome { summary, pass: rep.is_valid(), scan })
}

fn require_q(cfg: &Cfg) -> Result<(), UsageError> {
    cfg.q().map(|_| ()).ok_or_else(|| UsageError("field `q` is required".into()))
}

fn shells(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let cfg = rc.exponents()?;
    require_q(&cfg)?;
    if !cfg.check_formula_two()? {
        return Err(UsageError("shell profiles need the H^1 -> L^q conditions to hold".into()).into());
    }
    let atom = load_atom(rc, cfg.n() as usize, cfg.m() as usize, "signum-style")?;
    let s = shell_decay_profile(&cfg, &atom, rc.k_max.unwrap_or(8), rc.l_extra.unwrap_or(24), spec)?;
    let slope = s.summary.total_fit.map_or(f64::NAN, |f| f.slope);
    let case2 = s.summary.case2_fit.map_or(f64::NAN, |f| f.slope);
    let pass = s.summary.slope_ok && s.summary.cauchy_ok && s.scan.unresolved_count() == 0;
    let summary = format!(
        "k-slope = {slope:.4} (case 2: {case2:.4}), tail fraction = {:.2e}: {}",
        s.summary.tail_fraction,
        pass_word(pass)
    );
    Ok(Outcome { summary, pass, scan: s.scan })
}

fn dilate(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let cfg = rc.exponents()?;
    if cfg.p().is_none() || cfg.q().is_none() {
        return Err(UsageError("fields `p` and `q` are required".into()).into());
    }
    let f = test_function(rc, cfg.n() as usize, cfg.m() as usize)?;
    let deltas = RunConfig::floats(&rc.deltas, "deltas", &[0.25, 0.5, 2.0, 4.0])?;
    let lambdas = RunConfig::floats(&rc.lambdas, "lambdas", &[])?;
    let d = dilation_scan(&cfg, &f, &deltas, &lambdas, window(rc)?, spec)?;
    let s = &d.summary;
    let slope_ok = s.delta_fit.map_or(true, |fit| {
        (fit.slope - s.predicted_delta_slope).abs() <= (3.0 * fit.slope_err).max(0.05)
    });
    let identity_ok = !(s.identity_max_rel_dev > 0.01);
    let pass = slope_ok && identity_ok && s.lower_bound_ok && d.scan.unresolved_count() == 0;
    let summary = format!(
        "delta-slope = {} (predicted {:.4}), identity deviation = {:.2e}, lambda bound {}: {}",
        s.delta_fit.map_or("n/a".to_string(), |f| format!("{:.4}", f.slope)),
        s.predicted_delta_slope,
        s.identity_max_rel_dev,
        pass_word(s.lower_bound_ok),
        pass_word(pass)
    );
    Ok(Outcome { summary, pass, scan: d.scan })
}

fn counterexample(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let n = RunConfig::require(&rc.n, "n")?;
    let m = RunConfig::require(&rc.m, "m")?;
    let rho = rc.exact("rho")?.ok_or_else(|| UsageError("field `rho` is required".into()))?;
    let q = rc.exact("q")?.ok_or_else(|| UsageError("field `q` is required".into()))?;
    let cfg = if rc.alpha.is_none() && rc.beta.is_none() {
        flagint::exponents::critical_line_config(n, m, rho, q).map_err(|e| UsageError(e.to_string()))?
    } else {
        rc.exponents()?
    };
    let atom = load_atom(rc, n as usize, m as usize, "signum")?;
    let radii = RunConfig::floats(&rc.radii, "radii", &[10.0, 100.0, 1000.0, 10000.0])?;
    let g = counterexample_growth(&cfg, &atom, &radii, spec)?;
    let critical = cfg.alpha_ratio() == cfg.beta_ratio() && cfg.homogeneity() == Rational::from_int(1) - cfg.q().unwrap().recip();
    let expect = if critical {
        "growth"
    } else if cfg.check_formula_two()? {
        "convergence"
    } else {
        "none"
    };
    let pass = g.scan.unresolved_count() == 0
        && match expect {
            "growth" => g.summary.strictly_increasing,
            "convergence" => !g.summary.growth,
            _ => true,
        };
    let summary = format!(
        "F(R_max) = {:.6}, rate per decade = {:.4}, last increment fraction = {:.3e}, expected {expect}: {}",
        g.scan.rows.last().map_or(f64::NAN, |r| r.value),
        g.summary.log_rate,
        g.summary.last_increment_fraction,
        pass_word(pass)
    );
    Ok(Outcome { summary, pass, scan: g.scan })
}

fn frontier(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let n = RunConfig::require(&rc.n, "n")?;
    let m = RunConfig::require(&rc.m, "m")?;
    let rho = rc.exact("rho")?.ok_or_else(|| UsageError("field `rho` is required".into()))?;
    let q = rc.exact("q")?.ok_or_else(|| UsageError("field `q` is required".into()))?;
    let grid = |d: u32| -> Vec<Rational> { (0..5).map(|i| Rational::from_frac(2 * i + 1, 10) * Rational::from_int(d as i64)).collect() };
    let alphas = RunConfig::rationals(&rc.alphas, "alphas")?.unwrap_or_else(|| grid(n));
    let betas = RunConfig::rationals(&rc.betas, "betas")?.unwrap_or_else(|| grid(m));
    let mut opts = FrontierOptions::default();
    if rc.deltas.is_some() {
        opts.deltas = RunConfig::floats(&rc.deltas, "deltas", &[])?;
    }
    if rc.radii.is_some() {
        opts.radii = RunConfig::floats(&rc.radii, "radii", &[])?;
    }
    let fr = frontier_map(n, m, &rho, &q, &alphas, &betas, &opts, spec)?;
    let pass = fr.summary.diagonal && fr.summary.unresolved <= 2;
    let summary = format!(
        "{}\nunresolved cells: {}; confusion matrix diagonal: {}",
        experiments::format_confusion(&fr.summary.confusion),
        fr.summary.unresolved,
        pass_word(pass)
    );
    Ok(Outcome { summary, pass, scan: fr.scan })
}

fn hls(rc: &RunConfig, spec: &QuadratureSpec) -> Result<Outcome, RunError> {
    let cfg = rc.exponents()?;
    let f = test_function(rc, cfg.n() as usize, cfg.m() as usize)?;
    let h = hls_iteration_check(&cfg, &f, window(rc)?, spec)?;
    let r = &h.report;
    let summary = format!(
        "flag = {:.6e} <= product = {:.6e} (a = {:.4}, b = {:.4}): {}",
        r.left.value,
        r.right.value,
        r.a,
        r.b,
        pass_word(r.holds)
    );
    Ok(Outcome { summary, pass: r.holds, scan: h.scan })
}
