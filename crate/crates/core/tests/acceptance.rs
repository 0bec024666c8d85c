//! Acceptance criteria, one line per criterion.
//!
//! Runs as a plain binary so the lines reach the terminal uncaptured. Each
//! criterion is measured literally; the process fails when a criterion that is
//! not listed in `KNOWN_FAILURES` fails, or when a listed one starts passing.

use std::process::ExitCode;
use std::time::Instant;

use flagint::atoms::{make_bump_control, make_signum_atom, make_signum_style_atom};
use flagint::experiments::{
    counterexample_growth, dilation_scan, frontier_map, hls_iteration_check, shell_decay_profile, FrontierOptions,
};
use flagint::exponents::{critical_line_config, ExponentConfig};
use flagint::kernel::{FlagKernel, PointPair};
use flagint::quadrature::{apply_riesz_1d, QuadratureSpec, TestFunction};
use flagint::Rational;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose literal threshold is not met; see the project notes.
const KNOWN_FAILURES: &[u32] = &[6];

/// Wall-clock budget per criterion in seconds; 7 and 8 share one run.
const TIME_LIMITS: &[(u32, f64)] = &[(1, 1.0), (2, 1.0), (3, 10.0), (4, 120.0), (5, 120.0), (6, 600.0), (7, 900.0), (8, 900.0), (9, 3600.0)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn cfg(alpha: Rational, beta: Rational, p: Option<Rational>, q: Rational) -> ExponentConfig {
    let c = ExponentConfig::new(1, 1, alpha, beta, rat(2, 1)).unwrap();
    match p {
        Some(p) => c.with_pq(p, q).unwrap(),
        None => c.with_q(q).unwrap(),
    }
}

fn good(p: Option<Rational>) -> ExponentConfig {
    cfg(rat(9, 10), rat(3, 10), p, rat(2, 1))
}

/// Independent least squares through `(x, y)`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
    let sxx: f64 = xs.iter().map(|a| a * a).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

// ---------------------------------------------------------------- 1

/// Fractions as `(num, den)` pairs of i128, den > 0.
#[derive(Clone, Copy)]
struct Frac(i128, i128);

impl Frac {
    fn norm(self) -> Frac {
        fn gcd(a: i128, b: i128) -> i128 {
            if b == 0 { a.abs() } else { gcd(b, a % b) }
        }
        let g = gcd(self.0, self.1).max(1);
        let s = if self.1 < 0 { -1 } else { 1 };
        Frac(s * self.0 / g, s * self.1 / g)
    }
    fn add(self, o: Frac) -> Frac {
        Frac(self.0 * o.1 + o.0 * self.1, self.1 * o.1).norm()
    }
    fn sub(self, o: Frac) -> Frac {
        self.add(Frac(-o.0, o.1))
    }
    fn mul(self, o: Frac) -> Frac {
        Frac(self.0 * o.0, self.1 * o.1).norm()
    }
    fn div(self, o: Frac) -> Frac {
        Frac(self.0 * o.1, self.1 * o.0).norm()
    }
    fn cmp(self, o: Frac) -> std::cmp::Ordering {
        (self.0 * o.1).cmp(&(o.0 * self.1))
    }
    fn big(self) -> Rational {
        Rational::new(BigInt::from(self.0), BigInt::from(self.1))
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rhos = [Frac(1, 1), Frac(3, 2), Frac(2, 1), Frac(3, 1)];
    let mut checked = 0;
    let mut one_true = 0;
    let mut two_true = 0;
    let mut mismatches = Vec::new();
    while checked < 500 {
        let n = rng.gen_range(1..=3i128);
        let m = rng.gen_range(1..=3i128);
        let den = rng.gen_range(2..=12i128);
        let alpha = Frac(rng.gen_range(1..n * den), den).norm();
        let beta = Frac(rng.gen_range(1..m * den), den).norm();
        let rho = rhos[rng.gen_range(0..rhos.len())];
        let h = alpha.add(rho.mul(beta)).div(Frac(n, 1).add(rho.mul(Frac(m, 1))));
        let q = Frac(rng.gen_range(2..=9), rng.gen_range(1..=3)).norm();
        let one = Frac(1, 1);
        // samples cycle through the L^p line, the H^1 line and free (p, q)
        let (p, q) = match checked % 3 {
            0 if h.add(one.div(q)).cmp(one).is_le() => (one.div(h.add(one.div(q))), q),
            1 if h.cmp(one).is_lt() => (Frac(1, 1), one.div(one.sub(h))),
            _ => (Frac(rng.gen_range(1..=4), 1), q),
        };
        if !(p.cmp(one).is_ge() && p.cmp(q).is_lt() && q.cmp(one).is_gt()) {
            continue;
        }
        let c = ExponentConfig::new(n as u32, m as u32, alpha.big(), beta.big(), rho.big())
            .and_then(|c| c.with_pq(p.big(), q.big()))
            .unwrap();
        checked += 1;

        let am = alpha.div(Frac(n, 1)).cmp(beta.div(Frac(m, 1)));
        let gap = one.div(p).sub(one.div(q));
        let want_one = am.is_ge() && h.cmp(gap).is_eq();
        let want_two = am.is_gt() && h.cmp(one.sub(one.div(q))).is_eq();
        one_true += usize::from(want_one);
        two_true += usize::from(want_two);
        if c.check_formula_one().unwrap() != want_one || c.check_formula_two().unwrap() != want_two {
            mismatches.push(format!("formula labels at {c:?}"));
        }
        match c.derive_ab() {
            Ok(ab) => {
                // a/n = b/m = (alpha + rho beta)/(n + rho m)
                let a_want = Frac(n, 1).mul(h).big();
                let b_want = Frac(m, 1).mul(h).big();
                let s = alpha.add(rho.mul(beta)).big();
                let exact = ab.a.clone() * rat(m as i64, 1) == ab.b.clone() * rat(n as i64, 1)
                    && ab.a.clone() + rho.big() * ab.b.clone() == s;
                if !exact || ab.a != a_want || ab.b != b_want || am.is_lt() {
                    mismatches.push(format!("derive_ab at {c:?}"));
                }
            }
            Err(_) if am.is_lt() => {}
            Err(e) => mismatches.push(format!("derive_ab refused {c:?}: {e}")),
        }
    }
    Outcome {
        pass: mismatches.is_empty() && one_true > 0 && two_true > 0,
        detail: format!(
            "{checked} configs, {one_true} in the L^p region, {two_true} in the H^1 region, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|s| format!(" (first: {s})")).unwrap_or_default()
        ),
    }
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut dominated = 0;
    let samples = 10_000;
    let mut taken = 0;
    while taken < samples {
        let n = rng.gen_range(1..=3usize);
        let m = rng.gen_range(1..=3usize);
        let den = 20i64;
        let bn = rng.gen_range(1..m as i64 * den);
        // keep alpha/n >= beta/m so the dominating kernel exists
        let lo_a = (bn * n as i64 + m as i64 - 1) / m as i64;
        if lo_a >= n as i64 * den {
            continue;
        }
        let an = rng.gen_range(lo_a.max(1)..n as i64 * den);
        let rho_n = rng.gen_range(2..=6i64);
        let c = ExponentConfig::new(n as u32, m as u32, rat(an, den), rat(bn, den), rat(rho_n, 2)).unwrap();
        let k = FlagKernel::<f64>::new(&c);
        let pt = PointPair::new(
            (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        );
        let delta: f64 = 2f64.powf(rng.gen_range(-3.0..3.0));
        let rho_f = rho_n as f64 / 2.0;
        let degree = -(n as f64 - an as f64 / den as f64) - rho_f * (m as f64 - bn as f64 / den as f64);
        let dil = PointPair::new(pt.x.iter().map(|v| v * delta).collect(), pt.y.iter().map(|v| v * delta.powf(rho_f)).collect());
        let (Ok(lhs), Ok(base)) = (k.eval(&dil), k.eval(&pt)) else {
            continue;
        };
        taken += 1;
        let rhs = delta.powf(degree) * base;
        worst = worst.max((lhs / rhs - 1.0).abs());
        let ab = c.derive_ab().unwrap();
        if base <= k.dominating_eval(&ab, &pt).unwrap() * (1.0 + 1e-12) {
            dominated += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-12 && dominated == samples,
        detail: format!("{samples} samples, max relative homogeneity defect {worst:.2e}, dominated {dominated}/{samples}"),
    }
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let spec = QuadratureSpec::default();
    let chi = TestFunction::indicator_box(1, vec![0.0], vec![1.0], 1.0).unwrap();
    let half = rat(1, 2);
    // int_0^1 |x - u|^{-1/2} du
    let exact = |x: f64| if x < 1.0 { 2.0 * (x.sqrt() + (1.0 - x).sqrt()) } else { 2.0 * (x.sqrt() - (x - 1.0).sqrt()) };
    let ext = apply_riesz_1d(&half, &chi, 2.0, &spec).unwrap().value;
    let int = apply_riesz_1d(&half, &chi, 0.5, &spec).unwrap().value;
    let (e_ext, e_int) = (2.0 * (2f64.sqrt() - 1.0), exact(0.5));
    let r_ext = (ext / e_ext - 1.0).abs();
    let r_int = (int / e_int - 1.0).abs();
    Outcome {
        pass: r_ext <= 1e-3 && r_int <= 1e-3,
        detail: format!("x=2: {ext:.9} vs {e_ext:.9} (rel {r_ext:.1e}); x=1/2: {int:.9} vs {e_int:.9} (rel {r_int:.1e})"),
    }
}

// ---------------------------------------------------------------- 4, 5

fn bump() -> TestFunction<f64> {
    TestFunction::smooth_bump(1, vec![0.0, 0.0], vec![0.5, 0.5], 1.0).unwrap()
}

fn criterion_4() -> Outcome {
    let spec = QuadratureSpec::default();
    let deltas = [0.25, 0.5, 2.0, 4.0];
    let s = dilation_scan(&good(Some(rat(1, 1))), &bump(), &deltas, &[], None, &spec).unwrap();
    // alpha + rho beta + (n + rho m)/q
    let expo = 0.9 + 2.0 * 0.3 + 3.0 / 2.0;
    let mut worst: f64 = 0.0;
    let mut seen = 0;
    for row in &s.scan.rows {
        let d = row.params[0];
        if d == 1.0 {
            continue;
        }
        seen += 1;
        let ratio = row.extra.get("q_ratio").copied().unwrap_or(f64::NAN);
        let dev = (ratio / d.powf(expo) - 1.0).abs();
        worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
    }
    Outcome {
        pass: seen == deltas.len() && worst <= 0.01,
        detail: format!("max |ratio/delta^{expo} - 1| = {worst:.2e} over {seen} dilations"),
    }
}

fn criterion_5() -> Outcome {
    let spec = QuadratureSpec::default();
    let lambdas = [2.0, 4.0, 8.0];
    let s = dilation_scan(&good(Some(rat(1, 1))), &bump(), &[], &lambdas, None, &spec).unwrap();
    // beta + m/q
    let expo = 0.3 + 0.5;
    let mut ok = 0;
    let mut margins = Vec::new();
    for row in s.scan.rows.iter().filter(|r| r.params[1] > 1.0) {
        let l = row.params[1];
        let ratio = row.extra["q_ratio"];
        let err = row.extra["q_ratio_err"];
        let bound = l.powf(expo);
        if ratio >= bound - err {
            ok += 1;
        }
        margins.push(format!("lambda={l}: {ratio:.4} >= {bound:.4}"));
    }
    Outcome {
        pass: ok == lambdas.len(),
        detail: margins.join(", "),
    }
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let spec = QuadratureSpec::default();
    let radii = [10.0, 100.0, 1000.0, 10000.0];
    let atom = make_signum_atom::<f64>(1, 1).unwrap();
    let crit = critical_line_config(1, 1, rat(2, 1), rat(2, 1)).unwrap();
    let g = counterexample_growth(&crit, &atom, &radii, &spec).unwrap();
    let fs: Vec<f64> = g.scan.rows.iter().map(|r| r.value).collect();
    let inc: Vec<f64> = fs.windows(2).map(|w| w[1] - w[0]).collect();
    let increasing = inc.iter().all(|&d| d > 0.0);
    let (mn, mx) = inc.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &d| (a.min(d), b.max(d)));
    let spread = mx / mn - 1.0;
    let late = inc[1..].iter().fold(0.0f64, |b, &d| b.max(d)) / inc[1..].iter().fold(f64::INFINITY, |a, &d| a.min(d)) - 1.0;

    let ctrl = counterexample_growth(&good(None), &atom, &radii, &spec).unwrap();
    let cf: Vec<f64> = ctrl.scan.rows.iter().map(|r| r.value).collect();
    let last_frac = (cf[3] - cf[2]) / cf[3];
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(", ");
    Outcome {
        pass: increasing && spread <= 0.25 && last_frac < 0.05,
        detail: format!(
            "critical F = [{}], increments [{}], spread {spread:.3} (limit 0.25, last two decades {late:.3}); control last-decade fraction {last_frac:.4}",
            fmt(&fs),
            fmt(&inc)
        ),
    }
}

// ---------------------------------------------------------------- 7, 8

fn criteria_7_8() -> (Outcome, Outcome) {
    let spec = QuadratureSpec::default();
    let c = good(None);
    let atom = make_signum_style_atom::<f64>(1, 1, 0).unwrap();
    let a = shell_decay_profile(&c, &atom, 8, 24, &spec).unwrap();
    let ks: Vec<f64> = (4..=8).map(f64::from).collect();
    let log_fit = |v: &[f64]| slope(&ks, &ks.iter().map(|&k| v[k as usize].log2()).collect::<Vec<_>>());
    let s_total = log_fit(&a.summary.k_masses);
    // geometric tail beyond k = 8 at the fitted rate
    let r = s_total.exp2();
    let total: f64 = a.summary.k_masses.iter().sum::<f64>() + a.summary.gap_mass;
    let tail = a.summary.k_masses[8] * r / (1.0 - r) / total;
    let seven = Outcome {
        pass: s_total <= -1.5 && tail < 0.01 && a.scan.unresolved_count() == 0,
        detail: format!("k-slope {s_total:.4} (limit -1.5), tail fraction {tail:.2e}, {} shells", a.scan.rows.len()),
    };

    let b = make_bump_control::<f64>(1, 1, 0).unwrap();
    let bs = shell_decay_profile(&c, &b, 8, 24, &spec).unwrap();
    let s_atom = log_fit(&a.summary.case2_masses);
    let s_bump = log_fit(&bs.summary.case2_masses);
    let eight = Outcome {
        pass: s_bump - s_atom >= 0.5,
        detail: format!("case-2 slope: atom {s_atom:.4}, bump {s_bump:.4}, difference {:.4} (limit 0.5)", s_bump - s_atom),
    };
    (seven, eight)
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let spec = QuadratureSpec::default();
    let tenths = [1i64, 3, 5, 7, 9];
    let vals: Vec<Rational> = tenths.iter().map(|&t| rat(t, 10)).collect();
    let f = frontier_map(1, 1, &rat(2, 1), &rat(2, 1), &vals, &vals, &FrontierOptions::default(), &spec).unwrap();
    let mut agree = 0;
    let mut unresolved = 0;
    for row in &f.scan.rows {
        if row.is_unresolved() {
            unresolved += 1;
            continue;
        }
        let (a, b) = ((row.params[0] * 10.0).round() as i64, (row.params[1] * 10.0).round() as i64);
        // alpha > beta and alpha + 2 beta = 3/2, in tenths
        let bounded = a > b && a + 2 * b == 15;
        let word = if bounded { "BOUNDED" } else { "UNBOUNDED" };
        if row.label == format!("THEOREM-{word}/EMPIRICAL-{word}") {
            agree += 1;
        }
    }
    Outcome {
        pass: agree + unresolved == 25 && unresolved <= 2 && f.summary.diagonal,
        detail: format!("{agree}/25 cells agree, {unresolved} unresolved, confusion {:?}", f.summary.confusion),
    }
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let spec = QuadratureSpec::default();
    let mc = QuadratureSpec { points_per_axis: 4, ..QuadratureSpec::monte_carlo(64, 7) };
    let atom = make_signum_atom::<f64>(1, 1).unwrap();
    let style = make_signum_style_atom::<f64>(1, 1, 0).unwrap();
    let crit = critical_line_config(1, 1, rat(2, 1), rat(2, 1)).unwrap();
    let small = FrontierOptions { radii: vec![10.0, 100.0], ..FrontierOptions::default() };
    let frontier_vals = [rat(1, 2), rat(9, 10)];
    let hls_cfg = cfg(rat(1, 2), rat(1, 2), Some(rat(1, 1)), rat(2, 1));
    let square = TestFunction::indicator_box(1, vec![-0.5, -0.5], vec![0.5, 0.5], 1.0).unwrap();
    type Job<'a> = (&'a str, Box<dyn Fn() -> String + 'a>);
    let jobs: Vec<Job> = vec![
        ("dilate", Box::new(|| dilation_scan(&good(Some(rat(1, 1))), &bump(), &[0.25, 0.5, 2.0, 4.0], &[], None, &spec).unwrap().scan.to_csv().unwrap())),
        ("dilate-mc", Box::new(|| dilation_scan(&good(Some(rat(1, 1))), &square, &[2.0], &[], None, &mc).unwrap().scan.to_csv().unwrap())),
        ("counterexample", Box::new(|| counterexample_growth(&crit, &atom, &[10.0, 100.0, 1000.0], &spec).unwrap().scan.to_csv().unwrap())),
        ("shells", Box::new(|| shell_decay_profile(&good(None), &style, 4, 8, &spec).unwrap().scan.to_csv().unwrap())),
        ("frontier", Box::new(|| {
            frontier_map(1, 1, &rat(2, 1), &rat(2, 1), &frontier_vals, &frontier_vals, &small, &spec).unwrap().scan.to_csv().unwrap()
        })),
        ("hls", Box::new(|| hls_iteration_check(&hls_cfg, &square, None, &spec).unwrap().scan.to_csv().unwrap())),
    ];
    let mut same = Vec::new();
    let mut differ = Vec::new();
    for (name, job) in &jobs {
        let t = Instant::now();
        let tag = if job() == job() { &mut same } else { &mut differ };
        tag.push(format!("{name} {:.0}s", t.elapsed().as_secs_f64()));
    }
    Outcome {
        pass: differ.is_empty(),
        detail: format!("identical: [{}]; differing: [{}]", same.join(", "), differ.join(", ")),
    }
}

fn main() -> ExitCode {
    let mut failures = Vec::new();
    let mut report = |id: u32, started: Instant, mut o: Outcome| {
        let secs = started.elapsed().as_secs_f64();
        if let Some(&(_, limit)) = TIME_LIMITS.iter().find(|(c, _)| *c == id) {
            if secs >= limit {
                o.pass = false;
                o.detail.push_str(&format!("; over the {limit} s budget"));
            }
        }
        let word = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id}: {word} [{secs:.1}s] {}", o.detail);
        let known = KNOWN_FAILURES.contains(&id);
        if o.pass == known {
            failures.push(id);
        }
    };
    // ACCEPTANCE_ONLY=4,10 restricts the run to those criteria
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|c| c.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().map_or(true, |o| o.contains(&id));
    let singles: [(u32, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (9, criterion_9),
        (10, criterion_10),
    ];
    for (id, run) in singles {
        if id == 9 && (wanted(7) || wanted(8)) {
            let t = Instant::now();
            let (seven, eight) = criteria_7_8();
            report(7, t, seven);
            report(8, t, eight);
        }
        if wanted(id) {
            let t = Instant::now();
            report(id, t, run());
        }
    }

    if failures.is_empty() {
        println!("acceptance: all criteria as recorded (known failures: {KNOWN_FAILURES:?})");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcome for criteria {failures:?}");
        ExitCode::FAILURE
    }
}
