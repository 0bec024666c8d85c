//! Outer integrals: `L^q` mass of `I f` over bounded regions and `L^p` norms of `f`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{CounterexampleRegion, Cube, Shell};
use crate::error::{Error, Result};
use crate::kernel::PointPair;
use crate::scalar::{CompensatedSum, Real};

use super::function::{bump_1d, Profile, TestFunction};
use super::gauss::{self, LOW};
use super::inner::{self, KernelShape};
use super::mc::{self, stratum_seed};
use super::{Estimate, Method, QuadratureSpec};

/// Bounded integration region in `R^n x R^m`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region<T> {
    /// Axis-parallel box with joined corners.
    Box { lo: Vec<T>, hi: Vec<T> },
    Cube(Cube),
    Shell(Shell),
    Counterexample(CounterexampleRegion<T>),
    /// `{|x| < 2^L, |y| < 2^L}` minus the cube `Q` of side `2^L`.
    Gap { scale: i32 },
    /// `x` in the box `[lo, hi)`, `inner <= |y| < outer`.
    BoxAnnulus { lo: Vec<T>, hi: Vec<T>, inner: T, outer: T },
}

/// One factor of a product region, centred at the origin for annuli.
#[derive(Debug, Clone, PartialEq)]
enum FactorSet<T> {
    Box { lo: Vec<T>, hi: Vec<T> },
    Annulus { inner: T, outer: T },
}

/// Integration cell of one factor.
#[derive(Debug, Clone, PartialEq)]
enum FactorCell<T> {
    Box { lo: Vec<T>, hi: Vec<T> },
    Polar2 { r: (T, T), t: (T, T) },
    Polar3 { r: (T, T), z: (T, T), p: (T, T) },
}

const EDGE_GRADING: i32 = 6;
const ANGLE_PANELS: usize = 16;
const POLAR_PANELS: usize = 8;
const BUMP_PANELS: usize = 4;

impl<T: Real> FactorCell<T> {
    fn nodes(&self, order: usize) -> Vec<(Vec<T>, T)> {
        match self {
            Self::Box { lo, hi } => gauss::tensor(order, lo, hi),
            Self::Polar2 { r, t } => {
                let mut out = Vec::new();
                for (rr, wr) in gauss::mapped(order, r.0, r.1) {
                    for (th, wt) in gauss::mapped(order, t.0, t.1) {
                        out.push((vec![rr * th.cos(), rr * th.sin()], wr * wt * rr));
                    }
                }
                out
            }
            Self::Polar3 { r, z, p } => {
                let mut out = Vec::new();
                for (rr, wr) in gauss::mapped(order, r.0, r.1) {
                    for (zz, wz) in gauss::mapped(order, z.0, z.1) {
                        let rho = (T::one() - zz * zz).max(T::zero()).sqrt();
                        for (ph, wp) in gauss::mapped(order, p.0, p.1) {
                            out.push((vec![rr * rho * ph.cos(), rr * rho * ph.sin(), rr * zz], wr * wz * wp * rr * rr));
                        }
                    }
                }
                out
            }
        }
    }

    fn measure(&self) -> T {
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        match self {
            Self::Box { lo, hi } => lo.iter().zip(hi).fold(T::one(), |v, (&a, &b)| v * (b - a)),
            Self::Polar2 { r, t } => (r.1 * r.1 - r.0 * r.0) / two * (t.1 - t.0),
            Self::Polar3 { r, z, p } => (r.1.powi(3) - r.0.powi(3)) / three * (z.1 - z.0) * (p.1 - p.0),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        let mut u = || T::lit(rng.gen::<f64>());
        match self {
            Self::Box { lo, hi } => lo.iter().zip(hi).map(|(&a, &b)| a + (b - a) * u()).collect(),
            Self::Polar2 { r, t } => {
                let rr = (r.0 * r.0 + u() * (r.1 * r.1 - r.0 * r.0)).sqrt();
                let th = t.0 + u() * (t.1 - t.0);
                vec![rr * th.cos(), rr * th.sin()]
            }
            Self::Polar3 { r, z, p } => {
                let rr = (r.0.powi(3) + u() * (r.1.powi(3) - r.0.powi(3))).cbrt();
                let zz = z.0 + u() * (z.1 - z.0);
                let ph = p.0 + u() * (p.1 - p.0);
                let rho = (T::one() - zz * zz).max(T::zero()).sqrt();
                vec![rr * rho * ph.cos(), rr * rho * ph.sin(), rr * zz]
            }
        }
    }
}

/// Panels of `[a, b]` split at jump `edges` (graded toward each) and at the
/// smooth `breaks`, graded dyadically away from the support range `supp`.
fn axis_panels<T: Real>(a: T, b: T, edges: &[T], breaks: &[T], supp: Option<(T, T)>) -> Vec<(T, T)> {
    let two = T::lit(2.0);
    let mut pts = vec![a, b];
    let inside = |p: T| p > a && p < b;
    pts.extend(breaks.iter().copied().filter(|&p| inside(p)));
    if let Some((s0, s1)) = supp {
        let w = (s1 - s0).max(T::min_positive_value());
        let mut knots: Vec<T> = edges.iter().chain(breaks).copied().collect();
        knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let spacing = knots
            .windows(2)
            .map(|e| e[1] - e[0])
            .filter(|&d| d > T::zero())
            .fold(w, T::min);
        for &e in edges {
            if inside(e) {
                pts.push(e);
            }
            let mut h = spacing / two;
            for _ in 0..EDGE_GRADING {
                for c in [e - h, e + h] {
                    if inside(c) {
                        pts.push(c);
                    }
                }
                h = h / two;
            }
        }
        let mut h = w;
        while s1 + h < b || s0 - h > a {
            for c in [s1 + h, s0 - h] {
                if inside(c) {
                    pts.push(c);
                }
            }
            h = h * two;
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = (b - a) * T::lit(1e-12);
    pts.dedup_by(|x, y| (*x - *y).abs() <= tol);
    pts.windows(2).map(|p| (p[0], p[1])).collect()
}

fn radial_breaks<T: Real>(inner: T, outer: T) -> Vec<T> {
    let two = T::lit(2.0);
    let mut r = vec![inner];
    if inner == T::zero() {
        let mut s = outer / T::lit(64.0);
        while s < outer {
            r.push(s);
            s = s * two;
        }
    } else {
        let mut s = inner * two;
        while s < outer {
            r.push(s);
            s = s * two;
        }
    }
    r.push(outer);
    r
}

struct AxisInfo<T> {
    edges: Vec<Vec<T>>,
    breaks: Vec<Vec<T>>,
    supp: Vec<Option<(T, T)>>,
}

fn factor_cells<T: Real>(set: &FactorSet<T>, axes: &AxisInfo<T>) -> Vec<FactorCell<T>> {
    let d = axes.edges.len();
    let pi = T::PI();
    match set {
        FactorSet::Box { lo, hi } => {
            let per_axis: Vec<Vec<(T, T)>> = (0..d).map(|i| axis_panels(lo[i], hi[i], &axes.edges[i], &axes.breaks[i], axes.supp[i])).collect();
            let mut cells = vec![(Vec::new(), Vec::new())];
            for panels in &per_axis {
                let mut next = Vec::new();
                for (l, h) in &cells {
                    for &(a, b) in panels {
                        let mut l2: Vec<T> = l.clone();
                        let mut h2: Vec<T> = h.clone();
                        l2.push(a);
                        h2.push(b);
                        next.push((l2, h2));
                    }
                }
                cells = next;
            }
            cells.into_iter().map(|(lo, hi)| FactorCell::Box { lo, hi }).collect()
        }
        FactorSet::Annulus { inner, outer } => match d {
            0 => vec![FactorCell::Box { lo: vec![], hi: vec![] }],
            1 => {
                let mut out = Vec::new();
                let spans = if *inner == T::zero() {
                    vec![(-*outer, *outer)]
                } else {
                    vec![(-*outer, -*inner), (*inner, *outer)]
                };
                for (a, b) in spans {
                    for (l, h) in axis_panels(a, b, &axes.edges[0], &axes.breaks[0], axes.supp[0]) {
                        out.push(FactorCell::Box { lo: vec![l], hi: vec![h] });
                    }
                }
                out
            }
            2 => {
                let rb = radial_breaks(*inner, *outer);
                let mut out = Vec::new();
                for r in rb.windows(2) {
                    for k in 0..ANGLE_PANELS {
                        let t0 = T::lit(2.0) * pi * T::lit(k as f64 / ANGLE_PANELS as f64);
                        let t1 = T::lit(2.0) * pi * T::lit((k + 1) as f64 / ANGLE_PANELS as f64);
                        out.push(FactorCell::Polar2 { r: (r[0], r[1]), t: (t0, t1) });
                    }
                }
                out
            }
            3 => {
                let rb = radial_breaks(*inner, *outer);
                let mut out = Vec::new();
                for r in rb.windows(2) {
                    for i in 0..POLAR_PANELS {
                        let z0 = T::lit(-1.0 + 2.0 * i as f64 / POLAR_PANELS as f64);
                        let z1 = T::lit(-1.0 + 2.0 * (i + 1) as f64 / POLAR_PANELS as f64);
                        for k in 0..ANGLE_PANELS {
                            let p0 = T::lit(2.0) * pi * T::lit(k as f64 / ANGLE_PANELS as f64);
                            let p1 = T::lit(2.0) * pi * T::lit((k + 1) as f64 / ANGLE_PANELS as f64);
                            out.push(FactorCell::Polar3 { r: (r[0], r[1]), z: (z0, z1), p: (p0, p1) });
                        }
                    }
                }
                out
            }
            _ => unreachable!("annuli above dimension 3 are rejected earlier"),
        },
    }
}

impl<T: Real> Region<T> {
    /// Signed product decomposition `(sign, x-factor, y-factor)`.
    fn products(&self, n: usize, m: usize) -> Result<Vec<(T, FactorSet<T>, FactorSet<T>)>> {
        let cube = |c: &Cube| {
            let h: T = c.half_side();
            (
                FactorSet::Box { lo: vec![-h; n], hi: vec![h; n] },
                FactorSet::Box { lo: vec![-h; m], hi: vec![h; m] },
            )
        };
        let one = T::one();
        Ok(match self {
            Region::Box { lo, hi } => {
                if lo.len() != n + m || hi.len() != n + m {
                    return Err(Error::InvalidConfig("region box has wrong dimension".into()));
                }
                vec![(
                    one,
                    FactorSet::Box { lo: lo[..n].to_vec(), hi: hi[..n].to_vec() },
                    FactorSet::Box { lo: lo[n..].to_vec(), hi: hi[n..].to_vec() },
                )]
            }
            Region::Cube(c) => {
                let (x, y) = cube(c);
                vec![(one, x, y)]
            }
            Region::Shell(s) => {
                if s.is_core() {
                    let (x, y) = cube(&s.cube(n, m));
                    vec![(one, x, y)]
                } else {
                    let xr = s.x_range::<T>();
                    let yr = s.y_range::<T>();
                    vec![(
                        one,
                        FactorSet::Annulus { inner: xr.inner, outer: xr.outer },
                        FactorSet::Annulus { inner: yr.inner, outer: yr.outer },
                    )]
                }
            }
            Region::Counterexample(r) => vec![(
                one,
                FactorSet::Box { lo: vec![T::lit(2.0); n], hi: vec![T::lit(4.0); n] },
                FactorSet::Annulus { inner: T::zero(), outer: r.radius },
            )],
            Region::BoxAnnulus { lo, hi, inner, outer } => {
                if lo.len() != n || hi.len() != n || !(*inner >= T::zero() && inner < outer) {
                    return Err(Error::InvalidConfig("malformed box-annulus region".into()));
                }
                vec![(
                    one,
                    FactorSet::Box { lo: lo.clone(), hi: hi.clone() },
                    FactorSet::Annulus { inner: *inner, outer: *outer },
                )]
            }
            Region::Gap { scale } => {
                let big = T::lit(2.0).powi(*scale);
                let (x, y) = cube(&Cube::new(n, m, *scale));
                vec![
                    (
                        one,
                        FactorSet::Annulus { inner: T::zero(), outer: big },
                        FactorSet::Annulus { inner: T::zero(), outer: big },
                    ),
                    (-one, x, y),
                ]
            }
        })
    }
}

fn axis_info<T: Real>(f: &TestFunction<T>, range: std::ops::Range<usize>) -> AxisInfo<T> {
    let bb = f.bounding_box();
    let mut edges = Vec::new();
    let mut breaks = Vec::new();
    let mut supp = Vec::new();
    let sort = |v: &mut Vec<T>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
    };
    for i in range {
        // `I f` is smooth across the support of a bump, so its knots are not graded
        let mut e = Vec::new();
        let mut br = Vec::new();
        for p in f.pieces() {
            match p.profile {
                Profile::Constant => e.extend([p.lo[i], p.hi[i]]),
                Profile::Bump => br.extend((0..=BUMP_PANELS).map(|k| p.lo[i] + (p.hi[i] - p.lo[i]) * T::lit(k as f64 / BUMP_PANELS as f64))),
            }
        }
        sort(&mut e);
        sort(&mut br);
        edges.push(e);
        breaks.push(br);
        supp.push(bb.as_ref().map(|(lo, hi)| (lo[i], hi[i])));
    }
    AxisInfo { edges, breaks, supp }
}

fn check_q<T: Real>(q: T) -> Result<()> {
    if !(q > T::one()) || !q.is_finite() {
        return Err(Error::Precondition(format!("q = {q} must exceed 1")));
    }
    Ok(())
}

/// `int_region |I f|^q` with inner and outer error estimates combined.
pub fn lq_mass_with<T: Real>(
    shape: &KernelShape<T>,
    f: &TestFunction<T>,
    region: &Region<T>,
    q: T,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    spec.validate()?;
    check_q(q)?;
    let (n, m) = (shape.n(), shape.m());
    if f.n() != n || f.m() != m {
        return Err(Error::InvalidConfig("test function dimensions differ from the kernel".into()));
    }
    if n > 3 || m > 3 {
        return Err(Error::Precondition("outer regions are implemented for n, m <= 3".into()));
    }
    if spec.method == Method::Grid && n + m > 4 {
        return Err(Error::Precondition("grid quadrature needs n + m <= 4; use monte-carlo".into()));
    }
    if f.is_zero() {
        return Ok(Estimate { value: T::zero(), error: T::zero() });
    }
    let xa = axis_info(f, 0..n);
    let ya = axis_info(f, n..n + m);
    let mut value = CompensatedSum::new();
    let mut error = T::zero();
    let mut stratum = 0u64;
    for (sign, xs, ys) in region.products(n, m)? {
        let xc = factor_cells(&xs, &xa);
        let yc = factor_cells(&ys, &ya);
        let est = match spec.method {
            Method::Grid => grid_mass(shape, f, &xc, &yc, q, spec)?,
            Method::MonteCarlo => mc_mass(shape, f, &xc, &yc, q, spec, &mut stratum)?,
        };
        value.add(sign * est.value);
        error = error + est.error;
    }
    Ok(Estimate { value: value.value(), error })
}

fn product_nodes<T: Real>(xc: &[FactorCell<T>], yc: &[FactorCell<T>], order: usize) -> Vec<(Vec<T>, Vec<T>, T)> {
    let xn: Vec<Vec<(Vec<T>, T)>> = xc.iter().map(|c| c.nodes(order)).collect();
    let yn: Vec<Vec<(Vec<T>, T)>> = yc.iter().map(|c| c.nodes(order)).collect();
    let mut out = Vec::new();
    for xs in &xn {
        for ys in &yn {
            for (x, wx) in xs {
                for (y, wy) in ys {
                    out.push((x.clone(), y.clone(), *wx * *wy));
                }
            }
        }
    }
    out
}

fn grid_mass<T: Real>(
    shape: &KernelShape<T>,
    f: &TestFunction<T>,
    xc: &[FactorCell<T>],
    yc: &[FactorCell<T>],
    q: T,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    let hi_order = spec.points_per_axis;
    let lo_order = spec.points_per_axis * LOW / gauss::HIGH;
    let run = |order: usize| -> Result<(T, T)> {
        let nodes = product_nodes(xc, yc, order);
        let vals: Vec<Result<Estimate<T>>> = nodes.par_iter().map(|(x, y, _)| inner::grid(shape, f, x, y, spec)).collect();
        let mut sum = CompensatedSum::new();
        let mut prop = T::zero();
        for ((_, _, w), v) in nodes.iter().zip(vals) {
            let e = v?;
            let a = e.value.abs();
            sum.add(*w * a.powf(q));
            prop = prop + *w * q * a.powf(q - T::one()) * e.error;
        }
        Ok((sum.value(), prop))
    };
    let (hi, prop) = run(hi_order)?;
    let (lo, _) = run(lo_order.max(2))?;
    Ok(Estimate { value: hi, error: (hi - lo).abs() + prop })
}

fn mc_mass<T: Real>(
    shape: &KernelShape<T>,
    f: &TestFunction<T>,
    xc: &[FactorCell<T>],
    yc: &[FactorCell<T>],
    q: T,
    spec: &QuadratureSpec,
    stratum: &mut u64,
) -> Result<Estimate<T>> {
    let per = spec.points_per_axis * spec.points_per_axis;
    let mut jobs = Vec::new();
    for cx in xc {
        for cy in yc {
            jobs.push((cx, cy, *stratum));
            *stratum += 1;
        }
    }
    let results: Vec<Result<(T, T, T)>> = jobs
        .par_iter()
        .map(|(cx, cy, idx)| {
            let seed = stratum_seed(spec.seed, *idx);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vol = cx.measure() * cy.measure();
            let mut s = T::zero();
            let mut s2 = T::zero();
            let mut prop = T::zero();
            for k in 0..per {
                let x = cx.sample(&mut rng);
                let y = cy.sample(&mut rng);
                let e = mc::inner(shape, f, &x, &y, spec, stratum_seed(seed, k as u64 + 1))?;
                let a = e.value.abs();
                let g = a.powf(q);
                s = s + g;
                s2 = s2 + g * g;
                prop = prop + q * a.powf(q - T::one()) * e.error;
            }
            let nn = T::lit(per as f64);
            let mean = s / nn;
            let var = ((s2 / nn - mean * mean) * nn / (nn - T::one())).max(T::zero());
            Ok((vol * mean, vol * vol * var / nn, vol * prop / nn))
        })
        .collect();
    let mut value = CompensatedSum::new();
    let mut var = T::zero();
    let mut prop = T::zero();
    for r in results {
        let (v, s, p) = r?;
        value.add(v);
        var = var + s;
        prop = prop + p;
    }
    Ok(Estimate {
        value: value.value(),
        error: T::lit(2.0) * var.sqrt() + prop,
    })
}

/// `||f||_p` over its support.
///
/// Pieces are disjoint, so `int |f|^p` splits over pieces; constant pieces are
/// exact and bump pieces factor into one-dimensional Gauss-Legendre integrals.
pub fn lp_norm_value<T: Real>(f: &TestFunction<T>, p: T) -> Result<Estimate<T>> {
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::Precondition(format!("p = {p} must be at least 1")));
    }
    let panels = 64;
    let mut hi_b = T::zero();
    let mut lo_b = T::zero();
    for k in 0..panels {
        let a = T::lit(-1.0 + 2.0 * k as f64 / panels as f64);
        let b = T::lit(-1.0 + 2.0 * (k + 1) as f64 / panels as f64);
        let (h, l) = gauss::pair(a, b, |t| bump_1d(t).powf(p));
        hi_b = hi_b + h;
        lo_b = lo_b + l;
    }
    let mut hi = CompensatedSum::new();
    let mut lo = CompensatedSum::new();
    for pc in f.pieces() {
        let base = pc.value.abs().powf(p);
        match pc.profile {
            Profile::Constant => {
                let v = base * pc.volume();
                hi.add(v);
                lo.add(v);
            }
            Profile::Bump => {
                let halves = pc.lo.iter().zip(&pc.hi).fold(T::one(), |v, (&a, &b)| v * (b - a) / T::lit(2.0));
                let d = pc.lo.len() as i32;
                hi.add(base * halves * hi_b.powi(d));
                lo.add(base * halves * lo_b.powi(d));
            }
        }
    }
    let (mh, ml) = (hi.value(), lo.value());
    let inv = T::one() / p;
    let value = mh.powf(inv);
    let error = if mh > T::zero() { value * inv * (mh - ml).abs() / mh } else { T::zero() };
    Ok(Estimate { value, error })
}

/// `I f` at one point; dispatches on the quadrature method.
pub(crate) fn point<T: Real>(shape: &KernelShape<T>, f: &TestFunction<T>, pt: &PointPair<T>, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    match spec.method {
        Method::Grid => {
            if shape.n() + shape.m() > 4 {
                return Err(Error::Precondition("grid quadrature needs n + m <= 4; use monte-carlo".into()));
            }
            inner::grid(shape, f, &pt.x, &pt.y, spec)
        }
        Method::MonteCarlo => mc::inner(shape, f, &pt.x, &pt.y, spec, spec.seed),
    }
}
