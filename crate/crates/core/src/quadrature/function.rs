//! Bounded, compactly supported test functions built from box pieces.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::kernel::PointPair;
use crate::scalar::Real;

use super::gauss;

/// Shape of a piece on its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Constant on the box.
    Constant,
    /// `prod_i phi(t_i)` with `phi(t) = exp(1 - 1/(1 - t^2))` in box-normalised coordinates.
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    IndicatorBox,
    SmoothBump,
    Atom,
    CustomSampled,
}

/// `value * profile` on the half-open box `[lo, hi)` of `R^{n+m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub value: T,
    pub profile: Profile,
}

/// One-dimensional bump `exp(1 - 1/(1 - t^2))` on `(-1, 1)`, with `phi(0) = 1`.
pub fn bump_1d<T: Real>(t: T) -> T {
    let one = T::one();
    let s = one - t * t;
    if s <= T::zero() {
        return T::zero();
    }
    (one - one / s).exp()
}

/// `int_{-1}^{1} bump_1d`.
pub fn bump_1d_integral() -> f64 {
    static I: OnceLock<f64> = OnceLock::new();
    *I.get_or_init(|| {
        let panels = 256;
        let mut s = 0.0;
        for k in 0..panels {
            let a = -1.0 + 2.0 * k as f64 / panels as f64;
            let b = a + 2.0 / panels as f64;
            s += gauss::mapped(gauss::HIGH, a, b).map(|(x, w)| w * bump_1d(x)).sum::<f64>();
        }
        s
    })
}

impl<T: Real> Piece<T> {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn axis_factor(&self, i: usize, c: T) -> T {
        if c < self.lo[i] || c >= self.hi[i] {
            return T::zero();
        }
        match self.profile {
            Profile::Constant => T::one(),
            Profile::Bump => {
                let half = (self.hi[i] - self.lo[i]) / T::lit(2.0);
                bump_1d((c - self.lo[i] - half) / half)
            }
        }
    }

    /// Product of the profile factors over the axes `range` evaluated at `p`.
    pub fn partial_factor(&self, offset: usize, p: &[T]) -> T {
        let mut acc = T::one();
        for (j, &c) in p.iter().enumerate() {
            acc = acc * self.axis_factor(offset + j, c);
            if acc == T::zero() {
                break;
            }
        }
        acc
    }

    pub fn eval(&self, p: &[T]) -> T {
        self.value * self.partial_factor(0, p)
    }

    pub fn volume(&self) -> T {
        self.lo.iter().zip(&self.hi).fold(T::one(), |v, (&a, &b)| v * (b - a))
    }

    pub fn integral(&self) -> T {
        match self.profile {
            Profile::Constant => self.value * self.volume(),
            Profile::Bump => {
                let c = T::lit(bump_1d_integral() / 2.0);
                self.value * self.lo.iter().zip(&self.hi).fold(T::one(), |v, (&a, &b)| v * (b - a) * c)
            }
        }
    }

    fn overlaps(&self, other: &Piece<T>) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((&a0, &a1), (&b0, &b1))| a0 < b1 && b0 < a1)
    }
}

/// Sum of non-overlapping pieces on `R^n x R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T> {
    n: usize,
    m: usize,
    kind: FunctionKind,
    pieces: Vec<Piece<T>>,
}

impl<T: Real> TestFunction<T> {
    /// Validates dimensions, box orientation, finiteness and disjointness.
    pub fn from_pieces(n: usize, m: usize, kind: FunctionKind, pieces: Vec<Piece<T>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.lo.len() != n + m || p.hi.len() != n + m {
                return Err(Error::InvalidConfig(format!("piece {i}: box has wrong dimension")));
            }
            if p.lo.iter().zip(&p.hi).any(|(&a, &b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                return Err(Error::InvalidConfig(format!("piece {i}: box must satisfy lo < hi with finite corners")));
            }
            if !p.value.is_finite() {
                return Err(Error::InvalidConfig(format!("piece {i}: value must be finite")));
            }
        }
        for i in 0..pieces.len() {
            for j in 0..i {
                if pieces[i].overlaps(&pieces[j]) {
                    return Err(Error::InvalidConfig(format!("pieces {j} and {i} overlap")));
                }
            }
        }
        Ok(Self { n, m, kind, pieces })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            kind: FunctionKind::IndicatorBox,
            pieces: Vec::new(),
        }
    }

    /// `value * chi_[lo, hi)` with `lo`, `hi` given as joined `(x, y)` corners.
    pub fn indicator_box(n: usize, lo: Vec<T>, hi: Vec<T>, value: T) -> Result<Self> {
        let m = lo.len().saturating_sub(n);
        Self::from_pieces(
            n,
            m,
            FunctionKind::IndicatorBox,
            vec![Piece {
                lo,
                hi,
                value,
                profile: Profile::Constant,
            }],
        )
    }

    /// Product bump of height `amplitude` centred at `center` with per-axis half widths.
    pub fn smooth_bump(n: usize, center: Vec<T>, half_widths: Vec<T>, amplitude: T) -> Result<Self> {
        if center.len() != half_widths.len() {
            return Err(Error::InvalidConfig("center and half widths differ in length".into()));
        }
        let m = center.len().saturating_sub(n);
        let lo = center.iter().zip(&half_widths).map(|(&c, &h)| c - h).collect();
        let hi = center.iter().zip(&half_widths).map(|(&c, &h)| c + h).collect();
        Self::from_pieces(
            n,
            m,
            FunctionKind::SmoothBump,
            vec![Piece {
                lo,
                hi,
                value: amplitude,
                profile: Profile::Bump,
            }],
        )
    }

    /// Piecewise-constant cells `(lo, hi, value)`.
    pub fn from_cells(n: usize, m: usize, kind: FunctionKind, cells: Vec<(Vec<T>, Vec<T>, T)>) -> Result<Self> {
        let pieces = cells
            .into_iter()
            .map(|(lo, hi, value)| Piece {
                lo,
                hi,
                value,
                profile: Profile::Constant,
            })
            .collect();
        Self::from_pieces(n, m, kind, pieces)
    }

    /// Piecewise-constant function sampled on a regular `shape` grid over `[lo, hi)`,
    /// `values` in row-major order (last axis fastest). Zero samples are dropped.
    pub fn sampled(n: usize, lo: Vec<T>, hi: Vec<T>, shape: &[usize], values: &[T]) -> Result<Self> {
        let d = lo.len();
        if shape.len() != d || hi.len() != d {
            return Err(Error::InvalidConfig("sample grid shape does not match box dimension".into()));
        }
        let count: usize = shape.iter().product();
        if count != values.len() || count == 0 {
            return Err(Error::InvalidConfig(format!("expected {count} samples, got {}", values.len())));
        }
        let mut cells = Vec::new();
        for (flat, &v) in values.iter().enumerate() {
            if v == T::zero() {
                continue;
            }
            let mut rest = flat;
            let mut idx = vec![0usize; d];
            for a in (0..d).rev() {
                idx[a] = rest % shape[a];
                rest /= shape[a];
            }
            let cl = (0..d)
                .map(|a| lo[a] + (hi[a] - lo[a]) * T::lit(idx[a] as f64 / shape[a] as f64))
                .collect();
            let ch = (0..d)
                .map(|a| lo[a] + (hi[a] - lo[a]) * T::lit((idx[a] + 1) as f64 / shape[a] as f64))
                .collect();
            cells.push((cl, ch, v));
        }
        Self::from_cells(n, d - n, FunctionKind::CustomSampled, cells)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn kind(&self) -> FunctionKind {
        self.kind
    }
    pub fn pieces(&self) -> &[Piece<T>] {
        &self.pieces
    }

    pub fn with_kind(mut self, kind: FunctionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.value == T::zero())
    }

    pub fn eval_joined(&self, p: &[T]) -> T {
        self.pieces.iter().map(|pc| pc.eval(p)).fold(T::zero(), |a, b| a + b)
    }

    pub fn eval(&self, pt: &PointPair<T>) -> T {
        self.eval_joined(&pt.joined())
    }

    /// Exact supremum of `|f|` (pieces do not overlap and bumps peak at 1).
    pub fn sup_abs(&self) -> T {
        self.pieces.iter().map(|p| p.value.abs()).fold(T::zero(), T::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.pieces.iter().all(|p| p.value >= T::zero())
    }

    /// Exact integral of `f`.
    pub fn integral(&self) -> T {
        self.pieces.iter().map(|p| p.integral()).fold(T::zero(), |a, b| a + b)
    }

    /// Smallest box containing the support, or `None` for the zero function.
    pub fn bounding_box(&self) -> Option<(Vec<T>, Vec<T>)> {
        let first = self.pieces.first()?;
        let mut lo = first.lo.clone();
        let mut hi = first.hi.clone();
        for p in &self.pieces[1..] {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(p.lo[i]);
                hi[i] = hi[i].max(p.hi[i]);
            }
        }
        Some((lo, hi))
    }

    /// Sorted distinct piece edges along joined axis `axis`.
    pub fn edges(&self, axis: usize) -> Vec<T> {
        let mut e: Vec<T> = self.pieces.iter().flat_map(|p| [p.lo[axis], p.hi[axis]]).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e.dedup();
        e
    }

    pub fn has_bump(&self) -> bool {
        self.pieces.iter().any(|p| p.profile == Profile::Bump)
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        for p in &mut out.pieces {
            p.value = p.value * c;
        }
        out
    }

    /// `f(. - h)`.
    pub fn translated(&self, h: &PointPair<T>) -> Self {
        let shift = h.joined();
        let mut out = self.clone();
        for p in &mut out.pieces {
            for i in 0..shift.len() {
                p.lo[i] = p.lo[i] + shift[i];
                p.hi[i] = p.hi[i] + shift[i];
            }
        }
        out
    }

    /// `f(u / delta, v / (delta^rho lambda))`.
    pub fn dilated(&self, delta: T, rho: T, lambda: T) -> Self {
        let sy = delta.powf(rho) * lambda;
        let mut out = self.clone();
        for p in &mut out.pieces {
            for i in 0..p.lo.len() {
                let s = if i < self.n { delta } else { sy };
                p.lo[i] = p.lo[i] * s;
                p.hi[i] = p.hi[i] * s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_integral_value() {
        // int_{-1}^{1} exp(-1/(1-t^2)) dt = 0.443993816168...
        assert!((bump_1d_integral() / std::f64::consts::E - 0.443_993_816_168_079_4).abs() < 1e-12);
        assert_eq!(bump_1d(1.0f64), 0.0);
        assert_eq!(bump_1d(0.0f64), 1.0);
    }

    #[test]
    fn indicator_and_transforms() {
        let f = TestFunction::indicator_box(1, vec![-1.0, -1.0], vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(f.integral(), 4.0);
        assert_eq!(f.eval(&PointPair::scalar(0.0, 0.5)), 1.0);
        assert_eq!(f.eval(&PointPair::scalar(1.0, 0.5)), 0.0);
        let g = f.dilated(2.0, 2.0, 1.0);
        assert_eq!(g.integral(), 4.0 * 2.0 * 4.0);
        let t = f.translated(&PointPair::scalar(3.0, 0.0));
        assert_eq!(t.eval(&PointPair::scalar(3.5, 0.0)), 1.0);
        assert_eq!(f.scaled(2.0).sup_abs(), 2.0);
    }

    #[test]
    fn rejects_overlap_and_bad_boxes() {
        let cells = vec![(vec![0.0, 0.0], vec![1.0, 1.0], 1.0), (vec![0.5, 0.5], vec![2.0, 2.0], 1.0)];
        assert!(TestFunction::from_cells(1, 1, FunctionKind::Atom, cells).is_err());
        assert!(TestFunction::indicator_box(1, vec![1.0, 0.0], vec![0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn sampled_grid_layout() {
        let f = TestFunction::sampled(1, vec![0.0, 0.0], vec![2.0, 1.0], &[2, 1], &[1.0, -2.0]).unwrap();
        assert_eq!(f.eval(&PointPair::scalar(0.5, 0.5)), 1.0);
        assert_eq!(f.eval(&PointPair::scalar(1.5, 0.5)), -2.0);
        assert_eq!(f.integral(), -1.0);
        assert_eq!(f.edges(0), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn bump_integral_matches_product() {
        let f = TestFunction::smooth_bump(1, vec![0.0, 0.0], vec![1.0, 2.0], 3.0).unwrap();
        let c = bump_1d_integral();
        assert!((f.integral() - 3.0 * c * 2.0 * c).abs() < 1e-12);
        assert_eq!(f.sup_abs(), 3.0);
    }
}
