use flagint::atoms::{make_bump_control, make_random_atom, make_signum_style_atom, Atom};
use flagint::domain::Cube;
use flagint::experiments::{counterexample_growth, dilation_scan, shell_decay_profile};
use flagint::exponents::ExponentConfig;
use flagint::kernel::{FlagKernel, PointPair};
use flagint::quadrature::{apply_operator, QuadratureSpec, TestFunction};
use flagint::{Error, Rational};
use num_bigint::BigInt;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn good() -> ExponentConfig {
    ExponentConfig::new(1, 1, rat(9, 10), rat(3, 10), rat(2, 1)).unwrap().with_pq(rat(1, 1), rat(2, 1)).unwrap()
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn legendre(order: usize) -> Vec<(f64, f64)> {
    (1..=order)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `int a(u) [K(pt - u) - K(pt)] du` by tensor Gauss-Legendre over the
/// pieces, each split into `split^2` squares.
fn cancelled_oracle(k: &FlagKernel<f64>, atom: &Atom<f64>, pt: &PointPair<f64>) -> f64 {
    let nodes = legendre(12);
    let split = 4;
    let k0 = k.eval(pt).unwrap();
    let mut total = 0.0;
    for p in atom.payload.pieces() {
        let hx = (p.hi[0] - p.lo[0]) / split as f64;
        let hy = (p.hi[1] - p.lo[1]) / split as f64;
        for i in 0..split {
            for j in 0..split {
                let (cx, cy) = (p.lo[0] + (i as f64 + 0.5) * hx, p.lo[1] + (j as f64 + 0.5) * hy);
                for (tx, wx) in &nodes {
                    for (ty, wy) in &nodes {
                        let u = PointPair::scalar(pt.x[0] - (cx + 0.5 * hx * tx), pt.y[0] - (cy + 0.5 * hy * ty));
                        total += wx * wy * 0.25 * hx * hy * p.value * (k.eval(&u).unwrap() - k0);
                    }
                }
            }
        }
    }
    total
}

#[test]
fn far_field_of_an_atom_matches_the_cancelled_form() {
    let cfg = good();
    let k = FlagKernel::<f64>::new(&cfg);
    let spec = QuadratureSpec::default();
    for seed in [1u64, 2, 3] {
        let atom = make_random_atom::<f64>(Cube::new(1, 1, 0), seed).unwrap();
        assert!(atom.validate(&spec).is_valid());
        for (x, y) in [(3.0, 0.4), (2.5, -4.0), (-6.0, 10.0)] {
            let pt = PointPair::scalar(x, y);
            let got = apply_operator(&cfg, &atom.payload, &pt, &spec).unwrap();
            let want = cancelled_oracle(&k, &atom, &pt);
            assert!((got.value - want).abs() <= 1e-6 * want.abs() + 1e-12, "seed {seed} at ({x}, {y}): {got} vs {want}");
        }
    }
}

#[test]
fn control_fails_only_the_mean_condition() {
    let spec = QuadratureSpec::default();
    let r = make_bump_control::<f64>(1, 1, 0).unwrap().validate(&spec);
    assert!(r.support_ok && r.bound_ok && !r.mean_ok);
    let r = make_signum_style_atom::<f64>(2, 1, -1).unwrap().validate(&spec);
    assert!(r.is_valid());
}

#[test]
fn random_atom_json_round_trips_through_a_file() {
    let atom = make_random_atom::<f64>(Cube::new(1, 2, 1), 42).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("atom.json");
    std::fs::write(&path, atom.to_json_string().unwrap()).unwrap();
    let back = Atom::<f64>::from_json_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, atom);
}

#[test]
fn box_dilation_follows_the_scaling_law() {
    let spec = QuadratureSpec::default();
    let f = TestFunction::indicator_box(1, vec![-0.5, -0.5], vec![0.5, 0.5], 1.0).unwrap();
    let s = dilation_scan(&good(), &f, &[0.5, 2.0], &[2.0], None, &spec).unwrap();
    assert!(s.summary.identity_max_rel_dev < 1e-6, "{:?}", s.summary);
    assert!(s.summary.lower_bound_ok);
    // ({1} u deltas) x ({1} u lambdas)
    assert_eq!(s.scan.rows.len(), 6);
    let csv = s.scan.to_csv().unwrap();
    assert_eq!(csv.lines().next().unwrap(), "delta,lambda,value,err,label,case");
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn artifacts_are_named_by_experiment_and_seed() {
    let spec = QuadratureSpec { seed: 17, ..QuadratureSpec::default() };
    let f = TestFunction::indicator_box(1, vec![-0.5, -0.5], vec![0.5, 0.5], 1.0).unwrap();
    let s = dilation_scan(&good(), &f, &[2.0], &[], None, &spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = s.scan.write(&dir.path().join("artifacts")).unwrap();
    assert_eq!(csv.file_name().unwrap(), "dilate-17.csv");
    assert_eq!(json.file_name().unwrap(), "dilate-17.json");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(meta["metadata"]["seed"], 17);
    assert_eq!(meta["metadata"]["config"]["exponents"]["alpha"], "9/10");
}

#[test]
fn growth_scan_rejects_bad_radii() {
    let atom = make_signum_style_atom::<f64>(1, 1, 0).unwrap();
    let spec = QuadratureSpec::default();
    for radii in [vec![], vec![10.0, 5.0], vec![-1.0, 2.0]] {
        assert!(matches!(counterexample_growth(&good(), &atom, &radii, &spec), Err(Error::InvalidConfig(_))));
    }
}

#[test]
fn small_shell_profile_accounts_for_every_cell() {
    let atom = make_signum_style_atom::<f64>(1, 1, 0).unwrap();
    let s = shell_decay_profile(&good(), &atom, 2, 2, &QuadratureSpec::default()).unwrap();
    // l_max = ceil(rho (k_max + L)) + l_extra
    assert_eq!(s.summary.l_max, 6);
    assert_eq!(s.scan.rows.len(), 3 * 7);
    assert!(s.scan.rows[0].case.starts_with("case1:"));
    assert!(s.summary.core_mass > 0.0 && s.summary.gap_mass > 0.0);
    let sum: f64 = s.scan.rows.iter().map(|r| r.value).sum::<f64>() + s.summary.gap_mass;
    assert!(sum <= s.summary.total * (1.0 + 1e-12));
    // too few k for a fit
    assert!(s.summary.total_fit.is_none());
}
