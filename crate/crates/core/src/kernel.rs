//! Pointwise evaluation of the flag kernel
//! `|x|^{-(n-alpha)} (|x|^rho + |y|)^{-(m-beta)}` and of its dominating
//! product kernel `|x|^{-(n-a)} |y|^{-(m-b)}`.
//!
//! Norms are Euclidean on each factor.

use crate::error::{Error, Result};
use crate::exponents::{DerivedExponents, ExponentConfig};
use crate::scalar::{ExactScalar, Real};

/// A point `(x, y)` of `R^n x R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPair<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> PointPair<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Self {
        Self { x, y }
    }

    /// Scalar point in `R^1 x R^1`.
    pub fn scalar(x: T, y: T) -> Self {
        Self { x: vec![x], y: vec![y] }
    }

    pub fn x_norm(&self) -> T {
        euclid(&self.x)
    }

    pub fn y_norm(&self) -> T {
        euclid(&self.y)
    }

    /// Image under `(x, y) -> (delta x, delta^rho lambda y)`.
    pub fn dilated(&self, delta: T, rho: T, lambda: T) -> Self {
        let sy = delta.powf(rho) * lambda;
        Self {
            x: self.x.iter().map(|&v| v * delta).collect(),
            y: self.y.iter().map(|&v| v * sy).collect(),
        }
    }

    /// Coordinates concatenated as one vector of length `n + m`.
    pub fn joined(&self) -> Vec<T> {
        self.x.iter().chain(self.y.iter()).copied().collect()
    }

    pub fn from_joined(v: &[T], n: usize) -> Self {
        Self {
            x: v[..n].to_vec(),
            y: v[n..].to_vec(),
        }
    }
}

/// Overflow/underflow-safe Euclidean norm.
pub fn euclid<T: Real>(v: &[T]) -> T {
    match v.len() {
        0 => T::zero(),
        1 => v[0].abs(),
        _ => {
            let scale = v.iter().fold(T::zero(), |acc, c| acc.max(c.abs()));
            if scale == T::zero() || !scale.is_finite() {
                return scale;
            }
            let s: T = v.iter().map(|&c| (c / scale) * (c / scale)).sum();
            scale * s.sqrt()
        }
    }
}

/// The flag kernel for a fixed exponent tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlagKernel<T> {
    n: usize,
    m: usize,
    alpha: T,
    beta: T,
    rho: T,
}

impl<T: Real> FlagKernel<T> {
    pub fn new<R: ExactScalar>(cfg: &ExponentConfig<R>) -> Self {
        Self {
            n: cfg.n() as usize,
            m: cfg.m() as usize,
            alpha: T::lit(cfg.alpha().to_f64()),
            beta: T::lit(cfg.beta().to_f64()),
            rho: T::lit(cfg.rho().to_f64()),
        }
    }

    /// Builds from floating parameters, checking the standing hypotheses.
    pub fn from_parts(n: usize, m: usize, alpha: T, beta: T, rho: T) -> Result<Self> {
        let ok = n > 0
            && m > 0
            && alpha > T::zero()
            && alpha < T::lit(n as f64)
            && beta > T::zero()
            && beta < T::lit(m as f64)
            && rho >= T::one();
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "need 0 < alpha < n, 0 < beta < m, rho >= 1 (n={n} m={m} alpha={alpha} beta={beta} rho={rho})"
            )));
        }
        Ok(Self { n, m, alpha, beta, rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn rho(&self) -> T {
        self.rho
    }

    /// `n - alpha`.
    pub fn x_exponent(&self) -> T {
        T::lit(self.n as f64) - self.alpha
    }

    /// `m - beta`.
    pub fn y_exponent(&self) -> T {
        T::lit(self.m as f64) - self.beta
    }

    /// Degree under `(x, y) -> (delta x, delta^rho y)`: `-(n-alpha) - rho (m-beta)`.
    pub fn homogeneity_degree(&self) -> T {
        -self.x_exponent() - self.rho * self.y_exponent()
    }

    fn check_dims(&self, pt: &PointPair<T>) -> Result<()> {
        if pt.x.len() != self.n || pt.y.len() != self.m {
            return Err(Error::InvalidConfig(format!(
                "point has dimensions ({}, {}), kernel expects ({}, {})",
                pt.x.len(),
                pt.y.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    pub fn eval(&self, pt: &PointPair<T>) -> Result<T> {
        self.check_dims(pt)?;
        self.eval_norms(pt.x_norm(), pt.y_norm())
    }

    /// Kernel value as a function of `|x|` and `|y|`.
    #[inline]
    pub fn eval_norms(&self, xn: T, yn: T) -> Result<T> {
        if !(xn >= T::singular_floor()) {
            return Err(Error::Singular);
        }
        Ok(self.eval_norms_unchecked(xn, yn))
    }

    #[inline]
    pub(crate) fn eval_norms_unchecked(&self, xn: T, yn: T) -> T {
        xn.powf(-self.x_exponent()) * (xn.powf(self.rho) + yn).powf(-self.y_exponent())
    }

    /// The dominating product kernel for the derived exponents `(a, b)`.
    pub fn product_kernel<R: ExactScalar>(&self, ab: &DerivedExponents<R>) -> ProductKernel<T> {
        ProductKernel {
            n: self.n,
            m: self.m,
            a: T::lit(ab.a.to_f64()),
            b: T::lit(ab.b.to_f64()),
        }
    }

    /// `|x|^{-(n-a)} |y|^{-(m-b)}` at `pt`.
    pub fn dominating_eval<R: ExactScalar>(&self, ab: &DerivedExponents<R>, pt: &PointPair<T>) -> Result<T> {
        self.product_kernel(ab).eval(pt)
    }

    /// `|grad Omega| / (Omega max{1/|x|, 1/(|x|^rho + |y|)})` by central
    /// differences with step `h`.
    pub fn gradient_bound_ratio(&self, pt: &PointPair<T>, h: T) -> Result<T> {
        self.check_dims(pt)?;
        let xn = pt.x_norm();
        let two = T::lit(2.0);
        if !(h > T::zero() && xn > two * h) {
            return Err(Error::Accuracy {
                reason: format!("step {h} too large for |x| = {xn}; need |x| > 2h > 0"),
                estimate: f64::NAN,
                error: f64::NAN,
            });
        }
        let (gx, gy) = self.fd_gradient(pt, h)?;
        let grad = (gx + gy).sqrt();
        let yn = pt.y_norm();
        let omega = self.eval_norms(xn, yn)?;
        let scale = (T::one() / xn).max(T::one() / (xn.powf(self.rho) + yn));
        Ok(grad / (omega * scale))
    }

    /// As [`gradient_bound_ratio`](Self::gradient_bound_ratio) with the default
    /// step `1e-5 max(|x|, 1)`, rejecting results that move by more than
    /// `1e-4` (relative) when the step is halved.
    pub fn gradient_bound_ratio_checked(&self, pt: &PointPair<T>) -> Result<T> {
        let h = T::lit(1e-5) * pt.x_norm().max(T::one());
        let r1 = self.gradient_bound_ratio(pt, h)?;
        let r2 = self.gradient_bound_ratio(pt, h / T::lit(2.0))?;
        if (r1 - r2).abs() > T::lit(1e-4) * r2.abs() {
            return Err(Error::Accuracy {
                reason: "finite-difference gradient not converged under step halving".into(),
                estimate: r2.as_f64(),
                error: (r1 - r2).abs().as_f64(),
            });
        }
        Ok(r2)
    }

    /// Separate ratios for the sharper per-factor bounds:
    /// `|grad_x Omega| / (Omega max{1/|x|, |x|^{rho-1}/(|x|^rho+|y|)})` and
    /// `|grad_y Omega| / (Omega / (|x|^rho+|y|))`.
    pub fn sharp_gradient_ratios(&self, pt: &PointPair<T>, h: T) -> Result<(T, T)> {
        self.check_dims(pt)?;
        let xn = pt.x_norm();
        if !(h > T::zero() && xn > T::lit(2.0) * h) {
            return Err(Error::Accuracy {
                reason: format!("step {h} too large for |x| = {xn}"),
                estimate: f64::NAN,
                error: f64::NAN,
            });
        }
        let (gx, gy) = self.fd_gradient(pt, h)?;
        let yn = pt.y_norm();
        let omega = self.eval_norms(xn, yn)?;
        let d = xn.powf(self.rho) + yn;
        let sx = (T::one() / xn).max(xn.powf(self.rho - T::one()) / d);
        Ok((gx.sqrt() / (omega * sx), gy.sqrt() * d / omega))
    }

    /// Squared norms of the x- and y-parts of the central-difference gradient.
    fn fd_gradient(&self, pt: &PointPair<T>, h: T) -> Result<(T, T)> {
        let two_h = T::lit(2.0) * h;
        let mut p = pt.clone();
        let mut gx = T::zero();
        for i in 0..self.n {
            let c = p.x[i];
            p.x[i] = c + h;
            let fp = self.eval(&p)?;
            p.x[i] = c - h;
            let fm = self.eval(&p)?;
            p.x[i] = c;
            let d = (fp - fm) / two_h;
            gx = gx + d * d;
        }
        let mut gy = T::zero();
        for j in 0..self.m {
            let c = p.y[j];
            p.y[j] = c + h;
            let fp = self.eval(&p)?;
            p.y[j] = c - h;
            let fm = self.eval(&p)?;
            p.y[j] = c;
            let d = (fp - fm) / two_h;
            gy = gy + d * d;
        }
        Ok((gx, gy))
    }
}

/// `|x|^{-(n-a)} |y|^{-(m-b)}`, singular on both coordinate subspaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductKernel<T> {
    n: usize,
    m: usize,
    a: T,
    b: T,
}

impl<T: Real> ProductKernel<T> {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn a(&self) -> T {
        self.a
    }
    pub fn b(&self) -> T {
        self.b
    }
    pub fn x_exponent(&self) -> T {
        T::lit(self.n as f64) - self.a
    }
    pub fn y_exponent(&self) -> T {
        T::lit(self.m as f64) - self.b
    }

    pub fn eval(&self, pt: &PointPair<T>) -> Result<T> {
        let (xn, yn) = (pt.x_norm(), pt.y_norm());
        if !(xn >= T::singular_floor()) || !(yn >= T::singular_floor()) {
            return Err(Error::Singular);
        }
        Ok(xn.powf(-self.x_exponent()) * yn.powf(-self.y_exponent()))
    }
}
