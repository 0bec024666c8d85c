//! Cubes, dyadic shells and the counterexample region.
//!
//! `Q` is the max-norm cube of side `2^L` centred at the origin. For
//! `(k, l) != (0, 0)` the shell `Q_{kl}` is the product of a Euclidean
//! annulus in `x` and one in `y`:
//!
//! * `k > 0`: `2^{L+k-1} <= |x| < 2^{L+k}`, and `|x| < 2^L` when `k = 0`;
//! * `l > 0`: `2^{L+l-1} <= |y| < 2^{L+l}`, and `|y| < 2^L` when `l = 0`.
//!
//! The shells are pairwise disjoint and cover `{|x| >= 2^L or |y| >= 2^L}`.
//! What is left of `{|x| < 2^L, |y| < 2^L}` outside `Q` is the gap region.

use std::fmt;

use crate::error::{Error, Result};
use crate::exponents::ExponentConfig;
use crate::kernel::PointPair;
use crate::scalar::{ball_volume, ExactScalar, Real};

fn pow2<T: Real>(e: i32) -> T {
    T::lit(2.0).powi(e)
}

/// Max-norm cube of side `2^scale` centred at the origin of `R^{n+m}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cube {
    pub n: usize,
    pub m: usize,
    pub scale: i32,
}

impl Cube {
    pub fn new(n: usize, m: usize, scale: i32) -> Self {
        Self { n, m, scale }
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn side<T: Real>(&self) -> T {
        pow2(self.scale)
    }

    pub fn half_side<T: Real>(&self) -> T {
        pow2(self.scale - 1)
    }

    pub fn volume<T: Real>(&self) -> T {
        self.side::<T>().powi(self.dim() as i32)
    }

    /// The co-centred cube of half the side.
    pub fn half(&self) -> Cube {
        Cube { scale: self.scale - 1, ..*self }
    }

    /// The co-centred cube of twice the side.
    pub fn double(&self) -> Cube {
        Cube { scale: self.scale + 1, ..*self }
    }

    /// Corners `(lo, hi)` as joined `(x, y)` coordinates.
    pub fn bounds<T: Real>(&self) -> (Vec<T>, Vec<T>) {
        let h = self.half_side::<T>();
        (vec![-h; self.dim()], vec![h; self.dim()])
    }

    pub fn contains<T: Real>(&self, pt: &PointPair<T>) -> bool {
        let h = self.half_side::<T>();
        pt.x.iter().chain(pt.y.iter()).all(|c| c.abs() <= h)
    }
}

/// Radial range `inner <= |.| < outer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialRange<T> {
    pub inner: T,
    pub outer: T,
}

impl<T: Real> RadialRange<T> {
    pub fn contains(&self, r: T) -> bool {
        r >= self.inner && r < self.outer
    }

    /// Lebesgue measure of the annulus in `R^d`.
    pub fn measure(&self, d: usize) -> T {
        let v = T::lit(ball_volume(d));
        v * (self.outer.powi(d as i32) - self.inner.powi(d as i32))
    }
}

/// Dyadic shell `Q_{kl}` at scale `L`; `(0, 0)` is `Q` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shell {
    k: u32,
    l: u32,
    scale: i32,
}

impl Shell {
    pub fn new(k: i64, l: i64, scale: i32) -> Result<Self> {
        if k < 0 || l < 0 {
            return Err(Error::InvalidConfig(format!(
                "shell indices must be non-negative, got (k, l) = ({k}, {l})"
            )));
        }
        Ok(Self {
            k: k as u32,
            l: l as u32,
            scale,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn l(&self) -> u32 {
        self.l
    }
    pub fn scale(&self) -> i32 {
        self.scale
    }

    /// `(0, 0)`, the cube `Q`.
    pub fn is_core(&self) -> bool {
        self.k == 0 && self.l == 0
    }

    fn range<T: Real>(&self, idx: u32) -> RadialRange<T> {
        if idx == 0 {
            RadialRange {
                inner: T::zero(),
                outer: pow2(self.scale),
            }
        } else {
            let e = self.scale + idx as i32;
            RadialRange {
                inner: pow2(e - 1),
                outer: pow2(e),
            }
        }
    }

    /// Range of `|x|` (meaningless for the core shell).
    pub fn x_range<T: Real>(&self) -> RadialRange<T> {
        self.range(self.k)
    }

    /// Range of `|y|` (meaningless for the core shell).
    pub fn y_range<T: Real>(&self) -> RadialRange<T> {
        self.range(self.l)
    }

    pub fn cube(&self, n: usize, m: usize) -> Cube {
        Cube::new(n, m, self.scale)
    }

    pub fn contains<T: Real>(&self, pt: &PointPair<T>) -> bool {
        if self.is_core() {
            return self.cube(pt.x.len(), pt.y.len()).contains(pt);
        }
        self.x_range().contains(pt.x_norm()) && self.y_range().contains(pt.y_norm())
    }

    /// Lebesgue measure of the shell in `R^n x R^m`.
    pub fn measure<T: Real>(&self, n: usize, m: usize) -> T {
        if self.is_core() {
            return self.cube(n, m).volume();
        }
        self.x_range::<T>().measure(n) * self.y_range::<T>().measure(m)
    }

    /// The non-core shell containing `pt`, if any.
    pub fn locate<T: Real>(pt: &PointPair<T>, scale: i32) -> Option<Shell> {
        let k = radial_index(pt.x_norm(), scale);
        let l = radial_index(pt.y_norm(), scale);
        if k == 0 && l == 0 {
            return None;
        }
        Some(Shell { k, l, scale })
    }

    /// All non-core shells with `k <= k_max`, `l <= l_max`, in `(k, l)` order.
    pub fn grid(k_max: u32, l_max: u32, scale: i32) -> Vec<Shell> {
        let mut out = Vec::new();
        for k in 0..=k_max {
            for l in 0..=l_max {
                if k != 0 || l != 0 {
                    out.push(Shell { k, l, scale });
                }
            }
        }
        out
    }

    /// Case label and branch predicates used to tag experiment rows.
    pub fn case<R: ExactScalar>(&self, cfg: &ExponentConfig<R>) -> ShellCase {
        let case = match (self.k, self.l) {
            (0, 0) => Case::Case1,
            (k, l) if k > 0 && l > 0 => Case::Case2,
            (_, 0) => Case::Case3,
            _ => Case::Case4,
        };
        let big_l = R::from_int(self.scale as i64);
        let k = R::from_int(self.k as i64);
        let l = R::from_int(self.l as i64);
        let rho = cfg.rho().clone();
        let flags = CaseFlags {
            rho_k_ge_l: rho.clone() * (k.clone() + big_l.clone()) >= l.clone() + big_l.clone(),
            k_plus_scale_nonneg: k.clone() + big_l.clone() >= R::zero(),
            l_ge_k: l.clone() >= k,
            l_ge_rho_minus_one_scale: l >= (rho - R::one()) * big_l,
        };
        ShellCase { case, flags }
    }
}

/// Index `k` with `2^{L+k-1} <= r < 2^{L+k}`, or 0 when `r < 2^L`.
fn radial_index<T: Real>(r: T, scale: i32) -> u32 {
    if r < pow2(scale) {
        return 0;
    }
    let mut k = (r.log2().floor().to_i64().unwrap_or(0) - scale as i64 + 1).max(1) as u32;
    // correct for rounding in log2 at the dyadic boundaries
    while r < pow2(scale + k as i32 - 1) {
        k -= 1;
    }
    while r >= pow2(scale + k as i32) {
        k += 1;
    }
    k
}

impl fmt::Display for Shell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q[{},{}]@L={}", self.k, self.l, self.scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// `k = l = 0`
    Case1,
    /// `k > 0, l > 0`
    Case2,
    /// `k > 0, l = 0`
    Case3,
    /// `k = 0, l > 0`
    Case4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseFlags {
    /// `rho (k + L) >= l + L`
    pub rho_k_ge_l: bool,
    /// `k + L >= 0`
    pub k_plus_scale_nonneg: bool,
    /// `l >= k`
    pub l_ge_k: bool,
    /// `l >= (rho - 1) L`
    pub l_ge_rho_minus_one_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShellCase {
    pub case: Case,
    pub flags: CaseFlags,
}

impl fmt::Display for ShellCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.case {
            Case::Case1 => "case1",
            Case::Case2 => "case2",
            Case::Case3 => "case3",
            Case::Case4 => "case4",
        };
        let b = |v: bool| if v { 'T' } else { 'F' };
        let fl = self.flags;
        write!(
            f,
            "{name}:{}{}{}{}",
            b(fl.rho_k_ge_l),
            b(fl.k_plus_scale_nonneg),
            b(fl.l_ge_k),
            b(fl.l_ge_rho_minus_one_scale)
        )
    }
}

/// `U x {|y| <= R}` with `U = [2, 4]^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleRegion<T> {
    pub n: usize,
    pub m: usize,
    pub radius: T,
}

impl<T: Real> CounterexampleRegion<T> {
    pub fn new(n: usize, m: usize, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidConfig(format!("truncation radius {radius} must be positive")));
        }
        Ok(Self { n, m, radius })
    }

    pub fn contains(&self, pt: &PointPair<T>) -> bool {
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        pt.x.iter().all(|&c| c >= two && c <= four) && pt.y_norm() <= self.radius
    }

    pub fn measure(&self) -> T {
        T::lit(2.0).powi(self.n as i32) * T::lit(ball_volume(self.m)) * self.radius.powi(self.m as i32)
    }
}
