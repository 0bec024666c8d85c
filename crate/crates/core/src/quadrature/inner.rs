//! The inner convolution integral `int f(u, v) K(x - u, y - v) du dv`.
//!
//! In one `u`-dimension the substitution `w = s^mu` (`s = |x - u|`, `mu` the
//! order of the `u`-factor) absorbs the singular weight `s^{mu-1} ds = dw/mu`
//! exactly, and the remaining integral is taken by adaptive Gauss-Legendre on
//! panels graded at the dyadic annuli `s = 2^{-j} S` down to the inner cutoff.
//!
//! In higher dimensions the box is split at `x` and cells are bisected until
//! `dist(x, cell) >= diam(cell)`; cells still touching `x` at the cutoff are
//! bounded analytically and refined further while their bound dominates.
//!
//! For `m = 1` the `v`-integral of a constant piece is closed form, and bump
//! pieces subtract their value at the nearest point to `y` before integrating
//! on panels graded away from `y`.

use crate::error::{Error, Result};
use crate::kernel::{euclid, FlagKernel, ProductKernel};
use crate::scalar::{sphere_area, CompensatedSum, Real};

use super::function::{bump_1d, Piece, Profile, TestFunction};
use super::gauss::{self, HIGH, LOW};
use super::{Estimate, QuadratureSpec};

const GRADING_LEVELS: i32 = 10;
const BUMP_V_LEVELS: i32 = 12;
/// Bisection budget of one adaptive call; a noisy integrand otherwise splits
/// exponentially.
const MAX_SPLITS: usize = 20_000;

/// Which convolution kernel to integrate against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelShape<T> {
    /// `|x|^{-(n-alpha)} (|x|^rho + |y|)^{-(m-beta)}`
    Flag(FlagKernel<T>),
    /// `|x|^{-(n-a)} |y|^{-(m-b)}`
    Product(ProductKernel<T>),
    /// `|x|^{-(n-alpha)}` on `R^n` alone.
    Riesz { n: usize, alpha: T },
}

impl<T: Real> KernelShape<T> {
    pub fn n(&self) -> usize {
        match self {
            Self::Flag(k) => k.n(),
            Self::Product(k) => k.n(),
            Self::Riesz { n, .. } => *n,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Flag(k) => k.m(),
            Self::Product(k) => k.m(),
            Self::Riesz { .. } => 0,
        }
    }

    /// `mu` with `u`-factor `s^{mu - n}`.
    pub fn order(&self) -> T {
        match self {
            Self::Flag(k) => k.alpha(),
            Self::Product(k) => k.a(),
            Self::Riesz { alpha, .. } => *alpha,
        }
    }

    /// `gamma` with `v`-factor `(A + t)^{-gamma}`.
    pub fn gamma(&self) -> T {
        match self {
            Self::Flag(k) => k.y_exponent(),
            Self::Product(k) => k.y_exponent(),
            Self::Riesz { .. } => T::zero(),
        }
    }

    /// The shift `A = s^rho` couples the factors only for the flag kernel.
    pub fn shift(&self, s: T) -> T {
        match self {
            Self::Flag(k) => s.powf(k.rho()),
            _ => T::zero(),
        }
    }

    /// Kernel value from `s = |x - u|` and `t = |y - v|`.
    pub fn eval_radial(&self, s: T, t: T) -> T {
        let nf = T::lit(self.n() as f64);
        let uf = s.powf(self.order() - nf);
        if self.m() == 0 {
            return uf;
        }
        uf * (self.shift(s) + t).powf(-self.gamma())
    }
}

/// Running value, error and absolute mass.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc<T> {
    pub value: T,
    pub err: T,
    pub abs: T,
    pub exhausted: bool,
}

impl<T: Real> Acc<T> {
    fn zero() -> Self {
        Self {
            value: T::zero(),
            err: T::zero(),
            abs: T::zero(),
            exhausted: false,
        }
    }
}

/// `int_0^t (A + |r|)^{-gamma} dr` with sign of `t`, for `0 < gamma < 1`.
pub(crate) fn shifted_power_antiderivative<T: Real>(t: T, a: T, gamma: T) -> T {
    if t == T::zero() {
        return T::zero();
    }
    let e = T::one() - gamma;
    let at = t.abs();
    let v = if a > T::zero() && at < a {
        a.powf(e) * (e * (at / a).ln_1p()).exp_m1()
    } else {
        (a + at).powf(e) - a.powf(e)
    };
    t.signum() * v / e
}

/// Adaptive Gauss-Legendre over consecutive panels `breaks[i]..breaks[i+1]`.
///
/// A panel is accepted when `|G8 - G5|` is below `eps` times the larger of its
/// own absolute mass and its width share of the first-pass absolute mass.
pub(crate) fn adaptive_panels<T: Real>(breaks: &[T], f: &mut dyn FnMut(T) -> T, eps: T, max_depth: u32) -> Acc<T> {
    let mut out = Acc::zero();
    if breaks.len() < 2 {
        return out;
    }
    let width = breaks[breaks.len() - 1] - breaks[0];
    if !(width > T::zero()) {
        return out;
    }
    let mut eval = |a: T, b: T| -> (T, T, T) {
        let mut hi = CompensatedSum::new();
        let mut ab = CompensatedSum::new();
        for (x, w) in gauss::mapped(HIGH, a, b) {
            let v = f(x);
            hi.add(w * v);
            ab.add(w * v.abs());
        }
        let mut lo = CompensatedSum::new();
        for (x, w) in gauss::mapped(LOW, a, b) {
            lo.add(w * f(x));
        }
        (hi.value(), lo.value(), ab.value())
    };
    let first: Vec<_> = breaks.windows(2).map(|p| (p[0], p[1], eval(p[0], p[1]))).collect();
    let abs0 = first.iter().fold(T::zero(), |s, p| s + p.2 .2);
    let mut value = CompensatedSum::new();
    let mut err = T::zero();
    let mut abs = T::zero();
    let mut stack: Vec<(T, T, (T, T, T), u32)> = Vec::new();
    for p in first.into_iter().rev() {
        stack.push((p.0, p.1, p.2, 0));
    }
    let mut splits = 0usize;
    while let Some((a, b, (hi, lo, ab), depth)) = stack.pop() {
        let e = (hi - lo).abs();
        let tol = eps * ab.max(abs0 * (b - a) / width);
        let mid = a + (b - a) / T::lit(2.0);
        if e <= tol || depth >= max_depth || splits >= MAX_SPLITS || !(mid > a && mid < b) {
            if e > tol {
                out.exhausted = true;
            }
            value.add(hi);
            err = err + e;
            abs = abs + ab;
        } else {
            splits += 1;
            let right = eval(mid, b);
            let left = eval(a, mid);
            stack.push((mid, b, right, depth + 1));
            stack.push((a, mid, left, depth + 1));
        }
    }
    out.value = value.value();
    out.err = err;
    out.abs = abs;
    out
}

fn dist_point_box<T: Real>(c: &[T], lo: &[T], hi: &[T]) -> T {
    let d: Vec<T> = c
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(&x, (&a, &b))| if x < a { a - x } else if x > b { x - b } else { T::zero() })
        .collect();
    euclid(&d)
}

fn diam<T: Real>(lo: &[T], hi: &[T]) -> T {
    let d: Vec<T> = lo.iter().zip(hi).map(|(&a, &b)| b - a).collect();
    euclid(&d)
}

/// Splits a box at the coordinates of `c` lying strictly inside it.
pub(crate) fn split_at<T: Real>(lo: &[T], hi: &[T], c: &[T]) -> Vec<(Vec<T>, Vec<T>)> {
    let mut boxes = vec![(lo.to_vec(), hi.to_vec())];
    for i in 0..lo.len() {
        let mut next = Vec::with_capacity(boxes.len() * 2);
        for (l, h) in boxes {
            if c[i] > l[i] && c[i] < h[i] {
                let mut h1 = h.clone();
                h1[i] = c[i];
                let mut l2 = l.clone();
                l2[i] = c[i];
                next.push((l, h1));
                next.push((l2, h));
            } else {
                next.push((l, h));
            }
        }
        boxes = next;
    }
    boxes
}

pub(crate) fn bisect<T: Real>(lo: &[T], hi: &[T]) -> Vec<(Vec<T>, Vec<T>)> {
    let mid: Vec<T> = lo.iter().zip(hi).map(|(&a, &b)| a + (b - a) / T::lit(2.0)).collect();
    split_at(lo, hi, &mid)
}

/// Box integral of `f` whose only singular point is `center`.
pub(crate) struct CellJob<'a, T> {
    pub center: &'a [T],
    /// Cells are accepted once `shift + dist >= diam`.
    pub shift: T,
    /// Bound on the integral over a cell of the given diameter touching `center`.
    pub tail: &'a dyn Fn(T) -> T,
    pub f: &'a dyn Fn(&[T]) -> T,
    pub eps: T,
    pub cutoff: T,
    pub floor: T,
    pub max_depth: u32,
}

struct TailCell<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    bound: T,
    diam: T,
}

impl<'a, T: Real> CellJob<'a, T> {
    pub fn run(&self, lo: &[T], hi: &[T]) -> Acc<T> {
        let mut acc = Vec::new();
        let mut tails = Vec::new();
        let mut exhausted = false;
        for (l, h) in split_at(lo, hi, self.center) {
            self.process(&l, &h, 0, &mut acc, &mut tails, &mut exhausted);
        }
        let mut rounds = 0usize;
        loop {
            rounds += 1;
            let abs_total = acc.iter().fold(T::zero(), |s, a: &(T, T, T)| s + a.2);
            let tail_total = tails.iter().fold(T::zero(), |s, t: &TailCell<T>| s + t.bound);
            if tails.is_empty() || tail_total <= self.eps * abs_total {
                break;
            }
            let (idx, _) = tails
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |best, (i, t)| if t.bound > best.1 { (i, t.bound) } else { best });
            if tails[idx].diam <= self.floor || rounds > 100_000 {
                exhausted = true;
                break;
            }
            let cell = tails.remove(idx);
            for (l, h) in bisect(&cell.lo, &cell.hi) {
                self.process(&l, &h, 0, &mut acc, &mut tails, &mut exhausted);
            }
        }
        let mut value = CompensatedSum::new();
        let mut out = Acc::zero();
        for (v, e, a) in &acc {
            value.add(*v);
            out.err = out.err + *e;
            out.abs = out.abs + *a;
        }
        out.value = value.value();
        out.err = out.err + tails.iter().fold(T::zero(), |s, t| s + t.bound);
        out.exhausted = exhausted;
        out
    }

    fn process(&self, lo: &[T], hi: &[T], depth: u32, acc: &mut Vec<(T, T, T)>, tails: &mut Vec<TailCell<T>>, exhausted: &mut bool) {
        let dm = diam(lo, hi);
        let dist = dist_point_box(self.center, lo, hi);
        if self.shift + dist >= dm {
            let mut hi_v = CompensatedSum::new();
            let mut ab = CompensatedSum::new();
            for (p, w) in gauss::tensor(HIGH, lo, hi) {
                let v = (self.f)(&p);
                hi_v.add(w * v);
                ab.add(w * v.abs());
            }
            let mut lo_v = CompensatedSum::new();
            for (p, w) in gauss::tensor(LOW, lo, hi) {
                lo_v.add(w * (self.f)(&p));
            }
            let (h, l, a) = (hi_v.value(), lo_v.value(), ab.value());
            let e = (h - l).abs();
            if e <= self.eps * a || depth >= self.max_depth {
                if e > self.eps * a {
                    *exhausted = true;
                }
                acc.push((h, e, a));
                return;
            }
        } else if dist == T::zero() && dm <= self.cutoff {
            tails.push(TailCell {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
                bound: (self.tail)(dm),
                diam: dm,
            });
            return;
        }
        for (l, h) in bisect(lo, hi) {
            self.process(&l, &h, depth + 1, acc, tails, exhausted);
        }
    }
}

/// `int_{t - w}^{t} (A + |r|)^{-gamma} dr` for `w >= 0`, without the
/// cancellation of differencing two antiderivative values far from the origin.
pub(crate) fn shifted_power_span<T: Real>(t: T, w: T, a: T, gamma: T) -> T {
    let lo = t - w;
    if lo < T::zero() && t > T::zero() {
        return shifted_power_antiderivative(t, a, gamma) - shifted_power_antiderivative(lo, a, gamma);
    }
    // one-signed span; by symmetry measure it on the positive side
    let far = if t > T::zero() { t } else { -lo };
    if !(w > T::zero()) {
        return T::zero();
    }
    let e = T::one() - gamma;
    let x = a + far;
    -x.powf(e) * (e * (-(w / x).min(T::one())).ln_1p()).exp_m1() / e
}

/// Grid-mode inner integral at `(x, y)`.
pub(crate) struct Inner<'a, T> {
    pub shape: &'a KernelShape<T>,
    pub x: &'a [T],
    pub y: &'a [T],
    pub eps: T,
    pub cutoff_exp: i32,
    pub max_refine: u32,
}

impl<'a, T: Real> Inner<'a, T> {
    pub fn new(shape: &'a KernelShape<T>, x: &'a [T], y: &'a [T], spec: &QuadratureSpec) -> Self {
        Self {
            shape,
            x,
            y,
            eps: T::lit(0.1 * spec.target_rel_error),
            cutoff_exp: spec.inner_cutoff,
            max_refine: spec.max_refinement,
        }
    }

    pub fn function(&self, f: &TestFunction<T>) -> Acc<T> {
        let mut out = Acc::zero();
        let mut value = CompensatedSum::new();
        for p in f.pieces() {
            if p.value == T::zero() {
                continue;
            }
            let a = self.piece(p);
            value.add(a.value);
            out.err = out.err + a.err;
            out.abs = out.abs + a.abs;
            out.exhausted |= a.exhausted;
        }
        out.value = value.value();
        out
    }

    fn n(&self) -> usize {
        self.shape.n()
    }

    fn cutoff(&self, p: &Piece<T>) -> T {
        let n = self.n();
        diam(&p.lo[..n], &p.hi[..n]) * T::lit(2.0).powi(self.cutoff_exp)
    }

    fn piece(&self, p: &Piece<T>) -> Acc<T> {
        if self.n() == 1 {
            self.piece_1d(p)
        } else {
            self.piece_cells(p)
        }
    }

    fn piece_1d(&self, p: &Piece<T>) -> Acc<T> {
        let x = self.x[0];
        let (u0, u1) = (p.lo[0], p.hi[0]);
        let mu = self.shape.order();
        let cutoff = self.cutoff(p);
        let two = T::lit(2.0);
        let mut out = Acc::zero();
        let mut value = CompensatedSum::new();
        for side in [T::one(), -T::one()] {
            let (sa, sb) = if side > T::zero() {
                if u1 <= x {
                    continue;
                }
                ((u0 - x).max(T::zero()), u1 - x)
            } else {
                if u0 >= x {
                    continue;
                }
                ((x - u1).max(T::zero()), x - u0)
            };
            let mut s_breaks = Vec::new();
            if sa == T::zero() {
                // the substitution removes the endpoint singularity; deeper
                // grading is left to the adaptive bisection
                let floor = cutoff.max(sb * T::lit(2.0f64.powi(-GRADING_LEVELS)));
                let mut s = sb;
                while s > floor {
                    s_breaks.push(s);
                    s = s / two;
                }
                s_breaks.push(s);
                s_breaks.push(T::zero());
                s_breaks.reverse();
            } else {
                let mut s = sa;
                while s < sb {
                    s_breaks.push(s);
                    s = s * two;
                }
                s_breaks.push(sb);
            }
            let w_breaks: Vec<T> = s_breaks.iter().map(|&s| s.powf(mu)).collect();
            let inv = T::one() / mu;
            let mut integrand = |w: T| -> T {
                let s = w.powf(inv);
                let u = [x + side * s];
                self.v_part(p, &u, s) * inv
            };
            let a = adaptive_panels(&w_breaks, &mut integrand, self.eps, self.max_refine);
            value.add(a.value);
            out.err = out.err + a.err;
            out.abs = out.abs + a.abs;
            out.exhausted |= a.exhausted;
        }
        out.value = value.value();
        out
    }

    fn piece_cells(&self, p: &Piece<T>) -> Acc<T> {
        let n = self.n();
        let mu = self.shape.order();
        let nf = T::lit(n as f64);
        let vmax = p.value.abs() * self.v_bound(p);
        let area = T::lit(sphere_area(n));
        let tail = move |r: T| vmax * area * r.powf(mu) / mu;
        let f = |u: &[T]| -> T {
            let d: Vec<T> = u.iter().zip(self.x).map(|(&a, &b)| a - b).collect();
            let s = euclid(&d);
            s.powf(mu - nf) * self.v_part(p, u, s)
        };
        let cutoff = self.cutoff(p);
        let job = CellJob {
            center: self.x,
            shift: T::zero(),
            tail: &tail,
            f: &f,
            eps: self.eps,
            cutoff,
            floor: cutoff * T::lit(2.0).powi(-(self.max_refine.min(1000) as i32)),
            max_depth: self.max_refine,
        };
        job.run(&p.lo[..n], &p.hi[..n])
    }

    /// Upper bound of `int |profile_v| K_v dv` over the piece, uniform in `u`.
    fn v_bound(&self, p: &Piece<T>) -> T {
        let n = self.n();
        let m = self.shape.m();
        let gamma = self.shape.gamma();
        match m {
            0 => T::one(),
            1 => {
                let y = self.y[0];
                shifted_power_span(y - p.lo[n], p.hi[n] - p.lo[n], T::zero(), gamma)
            }
            _ => {
                let mut r2 = T::zero();
                for j in 0..m {
                    let d = (self.y[j] - p.lo[n + j]).abs().max((self.y[j] - p.hi[n + j]).abs());
                    r2 = r2 + d * d;
                }
                let e = T::lit(m as f64) - gamma;
                T::lit(sphere_area(m)) * r2.sqrt().powf(e) / e
            }
        }
    }

    /// `int f(u, v) K_v(s, y - v) dv` for the piece, excluding the `u`-power.
    fn v_part(&self, p: &Piece<T>, u: &[T], s: T) -> T {
        let n = self.n();
        let uf = p.value * p.partial_factor(0, u);
        if uf == T::zero() {
            return T::zero();
        }
        let m = self.shape.m();
        if m == 0 {
            return uf;
        }
        let a = self.shape.shift(s);
        let gamma = self.shape.gamma();
        if m == 1 {
            let y = self.y[0];
            let (v0, v1) = (p.lo[n], p.hi[n]);
            return match p.profile {
                Profile::Constant => {
                    uf * shifted_power_span(y - v0, v1 - v0, a, gamma)
                }
                Profile::Bump => uf * self.bump_v_1d(a, y, v0, v1),
            };
        }
        let lo = &p.lo[n..];
        let hi = &p.hi[n..];
        let mf = T::lit(m as f64);
        let e = mf - gamma;
        let area = T::lit(sphere_area(m));
        let tail = move |r: T| area * r.powf(e) / e;
        let f = |v: &[T]| -> T {
            let d: Vec<T> = v.iter().zip(self.y).map(|(&a, &b)| a - b).collect();
            let t = euclid(&d);
            let prof = match p.profile {
                Profile::Constant => T::one(),
                Profile::Bump => p.partial_factor(n, v),
            };
            prof * (a + t).powf(-gamma)
        };
        let cutoff = diam(lo, hi) * T::lit(2.0).powi(self.cutoff_exp);
        let job = CellJob {
            center: self.y,
            shift: a,
            tail: &tail,
            f: &f,
            eps: self.eps * T::lit(0.1),
            cutoff,
            floor: cutoff * T::lit(2.0).powi(-(self.max_refine.min(1000) as i32)),
            max_depth: self.max_refine,
        };
        let r = job.run(lo, hi);
        uf * r.value
    }

    /// `int_{v0}^{v1} psi(v) (A + |y - v|)^{-gamma} dv` for the normalised bump `psi` on `[v0, v1]`.
    fn bump_v_1d(&self, a: T, y: T, v0: T, v1: T) -> T {
        let gamma = self.shape.gamma();
        let two = T::lit(2.0);
        let half = (v1 - v0) / two;
        let c = v0 + half;
        let psi = |v: T| bump_1d((v - c) / half);
        let ys = y.max(v0).min(v1);
        let p_star = psi(ys);
        let mut total = CompensatedSum::new();
        total.add(p_star * shifted_power_span(y - v0, v1 - v0, a, gamma));
        let b = a + (y - ys).abs();
        for (dir, tmax) in [(T::one(), v1 - ys), (-T::one(), ys - v0)] {
            if !(tmax > T::zero()) {
                continue;
            }
            let mut breaks = vec![T::zero()];
            let mut t = b.max(tmax * T::lit(2.0f64.powi(-BUMP_V_LEVELS)));
            let cap = half / T::lit(4.0);
            while t < tmax {
                breaks.push(t);
                t = if t < cap { t * two } else { t + cap };
            }
            breaks.push(tmax);
            let mut f = |tau: T| (psi(ys + dir * tau) - p_star) * (b + tau).powf(-gamma);
            let r = adaptive_panels(&breaks, &mut f, self.eps * T::lit(0.01), 60);
            total.add(r.value);
        }
        total.value()
    }
}

/// Grid-mode inner integral; see the module docs.
pub(crate) fn grid<T: Real>(shape: &KernelShape<T>, f: &TestFunction<T>, x: &[T], y: &[T], spec: &QuadratureSpec) -> Result<Estimate<T>> {
    let inner = Inner::new(shape, x, y, spec);
    let acc = inner.function(f);
    let target = T::lit(spec.target_rel_error);
    if acc.exhausted && acc.err > target * acc.abs {
        return Err(Error::Accuracy {
            reason: "singularity not resolved within the refinement limit".into(),
            estimate: acc.value.as_f64(),
            error: acc.err.as_f64(),
        });
    }
    Ok(Estimate {
        value: acc.value,
        error: acc.err,
    })
}
