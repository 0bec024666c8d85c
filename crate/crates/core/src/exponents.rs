//! Exact exponent algebra for the flag-kernel operator.
//!
//! Every predicate here is decided in exact rational arithmetic. The two
//! boundedness regions are
//!
//! * L^p -> L^q:  `alpha/n >= beta/m`  and  `(alpha + rho beta)/(n + rho m) = 1/p - 1/q`
//! * H^1 -> L^q:  `alpha/n >  beta/m`  and  `(alpha + rho beta)/(n + rho m) = 1 - 1/q`

use std::fmt;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::scalar::ExactScalar;

/// Exponent tuple `(n, m, alpha, beta, rho, p, q)`.
///
/// Invariants enforced on construction: `0 < alpha < n`, `0 < beta < m`,
/// `rho >= 1`, and when present `1 <= p < q < inf`, `q > 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentConfig<R = BigRational> {
    n: u32,
    m: u32,
    alpha: R,
    beta: R,
    rho: R,
    p: Option<R>,
    q: Option<R>,
}

/// Exponents `a`, `b` with `a/n = b/m` and `a + rho b = alpha + rho beta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedExponents<R = BigRational> {
    pub a: R,
    pub b: R,
}

impl<R: ExactScalar> ExponentConfig<R> {
    pub fn new(n: u32, m: u32, alpha: R, beta: R, rho: R) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidConfig("dimensions n and m must be positive".into()));
        }
        let zero = R::zero();
        if !(alpha > zero && alpha < R::from_int(n as i64)) {
            return Err(Error::InvalidConfig(format!("alpha = {alpha} must lie in (0, {n})")));
        }
        if !(beta > zero && beta < R::from_int(m as i64)) {
            return Err(Error::InvalidConfig(format!("beta = {beta} must lie in (0, {m})")));
        }
        if rho < R::one() {
            return Err(Error::InvalidConfig(format!("rho = {rho} must be >= 1")));
        }
        Ok(Self {
            n,
            m,
            alpha,
            beta,
            rho,
            p: None,
            q: None,
        })
    }

    pub fn with_p(mut self, p: R) -> Result<Self> {
        self.p = Some(p);
        self.check_pq()?;
        Ok(self)
    }

    pub fn with_q(mut self, q: R) -> Result<Self> {
        self.q = Some(q);
        self.check_pq()?;
        Ok(self)
    }

    pub fn with_pq(self, p: R, q: R) -> Result<Self> {
        self.with_q(q)?.with_p(p)
    }

    /// Sets `q` and solves the homogeneity equation for `p`.
    pub fn with_q_derived_p(self, q: R) -> Result<Self> {
        let inv_p = q.recip_checked()? + self.homogeneity();
        if inv_p > R::one() {
            return Err(Error::Region(format!(
                "homogeneity forces 1/p = {inv_p} > 1 for q = {q}"
            )));
        }
        let p = R::one() / inv_p;
        self.with_pq(p, q)
    }

    /// Sets `p` and solves the homogeneity equation for `q`.
    pub fn with_p_derived_q(self, p: R) -> Result<Self> {
        let inv_q = p.recip_checked()? - self.homogeneity();
        if inv_q <= R::zero() {
            return Err(Error::Region(format!(
                "homogeneity forces 1/q = {inv_q} <= 0 for p = {p}"
            )));
        }
        let q = R::one() / inv_q;
        self.with_pq(p, q)
    }

    /// Sets `q` so that `(alpha + rho beta)/(n + rho m) = 1 - 1/q`.
    pub fn with_formula_two_q(self) -> Result<Self> {
        let h = self.homogeneity();
        if h >= R::one() {
            return Err(Error::Region(format!("homogeneity index {h} >= 1 admits no q")));
        }
        let q = R::one() / (R::one() - h);
        self.with_q(q)
    }

    fn check_pq(&self) -> Result<()> {
        if let Some(p) = &self.p {
            if *p < R::one() {
                return Err(Error::InvalidConfig(format!("p = {p} must be >= 1")));
            }
        }
        if let Some(q) = &self.q {
            if *q <= R::one() {
                return Err(Error::InvalidConfig(format!("q = {q} must be > 1")));
            }
        }
        if let (Some(p), Some(q)) = (&self.p, &self.q) {
            if p >= q {
                return Err(Error::InvalidConfig(format!("need p < q, got p = {p}, q = {q}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn alpha(&self) -> &R {
        &self.alpha
    }
    pub fn beta(&self) -> &R {
        &self.beta
    }
    pub fn rho(&self) -> &R {
        &self.rho
    }
    pub fn p(&self) -> Option<&R> {
        self.p.as_ref()
    }
    pub fn q(&self) -> Option<&R> {
        self.q.as_ref()
    }

    fn n_r(&self) -> R {
        R::from_int(self.n as i64)
    }
    fn m_r(&self) -> R {
        R::from_int(self.m as i64)
    }

    /// `(alpha + rho beta) / (n + rho m)`.
    pub fn homogeneity(&self) -> R {
        (self.alpha.clone() + self.rho.clone() * self.beta.clone())
            / (self.n_r() + self.rho.clone() * self.m_r())
    }

    /// `alpha / n`.
    pub fn alpha_ratio(&self) -> R {
        self.alpha.clone() / self.n_r()
    }

    /// `beta / m`.
    pub fn beta_ratio(&self) -> R {
        self.beta.clone() / self.m_r()
    }

    fn require_p(&self) -> Result<&R> {
        self.p.as_ref().ok_or(Error::Incomplete("p"))
    }
    fn require_q(&self) -> Result<&R> {
        self.q.as_ref().ok_or(Error::Incomplete("q"))
    }

    /// L^p -> L^q region: `alpha/n >= beta/m` and homogeneity `= 1/p - 1/q`.
    pub fn check_formula_one(&self) -> Result<bool> {
        let p = self.require_p()?;
        let q = self.require_q()?;
        let gap = R::one() / p.clone() - R::one() / q.clone();
        Ok(self.alpha_ratio() >= self.beta_ratio() && self.homogeneity() == gap)
    }

    /// H^1 -> L^q region: `alpha/n > beta/m` and homogeneity `= 1 - 1/q`.
    pub fn check_formula_two(&self) -> Result<bool> {
        let q = self.require_q()?;
        let gap = R::one() - R::one() / q.clone();
        Ok(self.alpha_ratio() > self.beta_ratio() && self.homogeneity() == gap)
    }

    /// Solves `a/n = b/m`, `a + rho b = alpha + rho beta`.
    pub fn derive_ab(&self) -> Result<DerivedExponents<R>> {
        if self.alpha_ratio() < self.beta_ratio() {
            return Err(Error::Region(format!(
                "alpha/n = {} < beta/m = {}",
                self.alpha_ratio(),
                self.beta_ratio()
            )));
        }
        let s = self.alpha.clone() + self.rho.clone() * self.beta.clone();
        let n = self.n_r();
        let m = self.m_r();
        let a = s.clone() / (R::one() + self.rho.clone() * m.clone() / n.clone());
        let b = s / (n / m + self.rho.clone());
        Ok(DerivedExponents { a, b })
    }

    /// The strict pair `(alpha/n > 1 - 1/q, beta/m < 1 - 1/q)` implied by the
    /// H^1 region.
    pub fn strict_consequences(&self) -> Result<(bool, bool)> {
        if !self.check_formula_two()? {
            return Err(Error::Precondition(
                "strict consequences need the H^1 region to hold".into(),
            ));
        }
        let t = R::one() - R::one() / self.require_q()?.clone();
        let out = (self.alpha_ratio() > t, self.beta_ratio() < t);
        debug_assert!(out.0 && out.1);
        Ok(out)
    }

    /// Copy without `p` and `q`.
    pub fn base(&self) -> Self {
        Self {
            p: None,
            q: None,
            ..self.clone()
        }
    }

    pub fn to_big(&self) -> ExponentConfig<BigRational> {
        ExponentConfig {
            n: self.n,
            m: self.m,
            alpha: self.alpha.to_big(),
            beta: self.beta.to_big(),
            rho: self.rho.to_big(),
            p: self.p.as_ref().map(|v| v.to_big()),
            q: self.q.as_ref().map(|v| v.to_big()),
        }
    }
}

impl<R: ExactScalar> fmt::Display for ExponentConfig<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} m={} alpha={} beta={} rho={}",
            self.n, self.m, self.alpha, self.beta, self.rho
        )?;
        if let Some(p) = &self.p {
            write!(f, " p={p}")?;
        }
        if let Some(q) = &self.q {
            write!(f, " q={q}")?;
        }
        Ok(())
    }
}

trait RecipChecked: Sized {
    fn recip_checked(&self) -> Result<Self>;
}

impl<R: ExactScalar> RecipChecked for R {
    fn recip_checked(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::InvalidConfig("division by zero exponent".into()));
        }
        Ok(R::one() / self.clone())
    }
}

/// Heisenberg-group example `L^{-a} T^{-b}` on `R^{2d+1}`: `n = 2d`, `m = 1`,
/// `alpha = 2a`, `beta = b`, `rho = 2`.
pub fn heisenberg_map<R: ExactScalar>(d: u32, a: R, b: R) -> Result<ExponentConfig<R>> {
    if d == 0 {
        return Err(Error::InvalidConfig("d must be positive".into()));
    }
    if !(a > R::zero() && a < R::from_int(d as i64)) {
        return Err(Error::InvalidConfig(format!("a = {a} must lie in (0, {d})")));
    }
    if !(b > R::zero() && b < R::one()) {
        return Err(Error::InvalidConfig(format!("b = {b} must lie in (0, 1)")));
    }
    ExponentConfig::new(2 * d, 1, R::from_int(2) * a, b, R::from_int(2))
}

/// Config on the critical line `alpha/n = beta/m` with homogeneity `1 - 1/q`,
/// which forces `beta = m - m/q` and `alpha = n - n/q`.
pub fn critical_line_config<R: ExactScalar>(n: u32, m: u32, rho: R, q: R) -> Result<ExponentConfig<R>> {
    let t = R::one() - R::one() / q.clone();
    let alpha = R::from_int(n as i64) * t.clone();
    let beta = R::from_int(m as i64) * t;
    ExponentConfig::new(n, m, alpha, beta, rho)?.with_q(q)
}

/// The `beta` that puts `(alpha, beta)` on the homogeneity line `1 - 1/q`.
pub fn homogeneity_line_beta<R: ExactScalar>(n: u32, m: u32, rho: &R, q: &R, alpha: &R) -> R {
    let t = R::one() - R::one() / q.clone();
    (t * (R::from_int(n as i64) + rho.clone() * R::from_int(m as i64)) - alpha.clone()) / rho.clone()
}
