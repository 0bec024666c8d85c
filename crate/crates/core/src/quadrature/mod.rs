//! Singular convolution quadrature.
//!
//! [`apply_operator`] evaluates `I f(x, y) = int f(u, v) Omega(x - u, y - v) du dv`
//! with an a-posteriori error estimate; [`lq_mass`] integrates `|I f|^q` over
//! bounded regions; [`lp_norm`] measures test functions.

mod function;
pub mod gauss;
mod inner;
mod mc;
mod outer;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentConfig;
use crate::kernel::{FlagKernel, PointPair};
use crate::scalar::{ExactScalar, Real};

pub use function::{bump_1d, bump_1d_integral, FunctionKind, Piece, Profile, TestFunction};
pub use inner::KernelShape;
pub use mc::stratum_seed;
pub use outer::{lq_mass_with, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Grid,
    MonteCarlo,
}

/// Quadrature controls shared by every integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub method: Method,
    /// Outer Gauss-Legendre order per panel (grid) or `points_per_axis^2`
    /// samples per outer stratum (Monte Carlo).
    pub points_per_axis: usize,
    /// Inner Monte Carlo budget per evaluation point.
    pub samples: u64,
    pub seed: u64,
    /// Dyadic exponent `c`: the innermost resolved scale is `2^c` times the
    /// diameter of each piece.
    pub inner_cutoff: i32,
    pub target_rel_error: f64,
    /// Dyadic levels of refinement allowed below the cutoff.
    pub max_refinement: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: Method::Grid,
            points_per_axis: 8,
            samples: 4096,
            seed: 0,
            inner_cutoff: -20,
            target_rel_error: 1e-3,
            max_refinement: 256,
        }
    }
}

impl QuadratureSpec {
    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        Self {
            method: Method::MonteCarlo,
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be positive".into()));
        }
        if !(4..=16).contains(&self.points_per_axis) {
            return Err(Error::InvalidConfig(format!(
                "points_per_axis = {} must lie in 4..=16",
                self.points_per_axis
            )));
        }
        if !(self.target_rel_error > 0.0) || !self.target_rel_error.is_finite() {
            return Err(Error::InvalidConfig("target_rel_error must be positive".into()));
        }
        Ok(())
    }
}

/// A value with an a-posteriori error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

impl<T: Real> Estimate<T> {
    /// `|self - other| <= k (err_self + err_other)`.
    pub fn agrees_with(&self, other: &Self, k: T) -> bool {
        (self.value - other.value).abs() <= k * (self.error + other.error)
    }

    pub fn rel_error(&self) -> T {
        self.error / self.value.abs()
    }
}

impl<T: Real> fmt::Display for Estimate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9e} +/- {:.2e}", self.value.as_f64(), self.error.as_f64())
    }
}

fn flag_shape<R: ExactScalar, T: Real>(cfg: &ExponentConfig<R>) -> KernelShape<T> {
    KernelShape::Flag(FlagKernel::new(cfg))
}

/// `I f` at `pt` for the flag kernel of `cfg`.
pub fn apply_operator<R: ExactScalar, T: Real>(
    cfg: &ExponentConfig<R>,
    f: &TestFunction<T>,
    pt: &PointPair<T>,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    apply_with(&flag_shape(cfg), f, pt, spec)
}

/// `I f` at `pt` for an arbitrary kernel shape.
pub fn apply_with<T: Real>(
    shape: &KernelShape<T>,
    f: &TestFunction<T>,
    pt: &PointPair<T>,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    spec.validate()?;
    if f.n() != shape.n() || f.m() != shape.m() || pt.x.len() != shape.n() || pt.y.len() != shape.m() {
        return Err(Error::InvalidConfig(format!(
            "dimension mismatch: kernel on R^{} x R^{}, function on R^{} x R^{}, point on R^{} x R^{}",
            shape.n(),
            shape.m(),
            f.n(),
            f.m(),
            pt.x.len(),
            pt.y.len()
        )));
    }
    outer::point(shape, f, pt, spec)
}

/// `int f(u) |x - u|^{alpha - 1} du` on the line.
pub fn apply_riesz_1d<R: ExactScalar, T: Real>(alpha: &R, f: &TestFunction<T>, x: T, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    if !(*alpha > R::zero() && *alpha < R::one()) {
        return Err(Error::Precondition(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if f.n() != 1 || f.m() != 0 {
        return Err(Error::InvalidConfig("the one-dimensional Riesz potential needs a function on R".into()));
    }
    let shape = KernelShape::Riesz { n: 1, alpha: T::lit(alpha.to_f64()) };
    apply_with(&shape, f, &PointPair::new(vec![x], vec![]), spec)
}

/// `int_region |I f|^q` for the flag kernel of `cfg`.
pub fn lq_mass<R: ExactScalar, T: Real>(
    cfg: &ExponentConfig<R>,
    f: &TestFunction<T>,
    region: &Region<T>,
    q: &R,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    lq_mass_with(&flag_shape(cfg), f, region, T::lit(q.to_f64()), spec)
}

/// `||f||_p`.
pub fn lp_norm<R: ExactScalar, T: Real>(f: &TestFunction<T>, p: &R, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    spec.validate()?;
    outer::lp_norm_value(f, T::lit(p.to_f64()))
}

/// `q`-norm of `I f` over a region: `mass^{1/q}` with the error propagated.
pub fn lq_norm_from_mass<T: Real>(mass: Estimate<T>, q: T) -> Estimate<T> {
    let inv = T::one() / q;
    let value = mass.value.max(T::zero()).powf(inv);
    let error = if mass.value > T::zero() { value * inv * mass.error / mass.value } else { mass.error.powf(inv) };
    Estimate { value, error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shell;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_frac(n, d)
    }

    fn unit_interval() -> TestFunction<f64> {
        TestFunction::indicator_box(1, vec![0.0], vec![1.0], 1.0).unwrap()
    }

    #[test]
    fn riesz_exterior_point() {
        let r = apply_riesz_1d(&q(1, 2), &unit_interval(), 2.0, &QuadratureSpec::default()).unwrap();
        let exact = 2.0 * (2f64.sqrt() - 1.0);
        assert!((r.value - exact).abs() < 1e-3 * exact, "{r}");
        assert!((r.value - exact).abs() <= r.error + 1e-12, "{r}");
    }

    #[test]
    fn riesz_interior_point() {
        let r = apply_riesz_1d(&q(1, 2), &unit_interval(), 0.5, &QuadratureSpec::default()).unwrap();
        let exact = 2.0 * 2f64.sqrt();
        assert!((r.value - exact).abs() < 1e-3 * exact, "{r}");
        let small = apply_riesz_1d(&q(1, 10), &unit_interval(), 0.5, &QuadratureSpec::default()).unwrap();
        let exact = 2.0 * 0.5f64.powf(0.1) / 0.1;
        assert!((small.value - exact).abs() < 1e-3 * exact, "{small}");
    }

    #[test]
    fn riesz_of_zero_and_bad_alpha() {
        let z = TestFunction::<f64>::zero(1, 0);
        assert_eq!(apply_riesz_1d(&q(1, 2), &z, 0.3, &QuadratureSpec::default()).unwrap().value, 0.0);
        assert!(apply_riesz_1d(&q(1, 1), &unit_interval(), 0.3, &QuadratureSpec::default()).is_err());
    }

    fn square() -> TestFunction<f64> {
        TestFunction::indicator_box(1, vec![-1.0, -1.0], vec![1.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn far_point_sandwich_and_monte_carlo() {
        let cfg = ExponentConfig::new(1, 1, q(1, 2), q(1, 2), q(2, 1)).unwrap();
        let k = FlagKernel::<f64>::new(&cfg);
        let pt = PointPair::scalar(10.0, 0.0);
        let g = apply_operator(&cfg, &square(), &pt, &QuadratureSpec::default()).unwrap();
        let near = k.eval(&PointPair::scalar(9.0, 0.0)).unwrap();
        let far = k.eval(&PointPair::scalar(11.0, 1.0)).unwrap();
        assert!(g.value <= 4.0 * near && g.value >= 4.0 * far, "{g}");
        let m = apply_operator(&cfg, &square(), &pt, &QuadratureSpec::monte_carlo(20_000, 3)).unwrap();
        assert!(g.agrees_with(&m, 1.0), "{g} vs {m}");
    }

    #[test]
    fn interior_point_matches_monte_carlo_and_linearity() {
        let cfg = ExponentConfig::new(1, 1, q(1, 2), q(1, 2), q(2, 1)).unwrap();
        let pt = PointPair::scalar(0.3, -0.2);
        let spec = QuadratureSpec::default();
        let g = apply_operator(&cfg, &square(), &pt, &spec).unwrap();
        let g2 = apply_operator(&cfg, &square().scaled(2.0), &pt, &spec).unwrap();
        assert_eq!(g2.value, 2.0 * g.value);
        let m = apply_operator(&cfg, &square(), &pt, &QuadratureSpec::monte_carlo(200_000, 1)).unwrap();
        assert!(g.agrees_with(&m, 1.0), "{g} vs {m}");
    }

    #[test]
    fn halving_cutoff_is_within_error() {
        let cfg = ExponentConfig::new(1, 1, q(9, 10), q(3, 10), q(2, 1)).unwrap();
        let f = TestFunction::<f64>::smooth_bump(1, vec![0.0, 0.0], vec![1.0, 1.0], 1.0).unwrap();
        let pt = PointPair::scalar(0.2, 0.1);
        let a = apply_operator(&cfg, &f, &pt, &QuadratureSpec::default()).unwrap();
        let spec = QuadratureSpec { inner_cutoff: -21, ..QuadratureSpec::default() };
        let b = apply_operator(&cfg, &f, &pt, &spec).unwrap();
        assert!((a.value - b.value).abs() <= a.error, "{a} vs {b}");
    }

    #[test]
    fn two_dimensional_x_against_monte_carlo() {
        let cfg = ExponentConfig::new(2, 1, q(1, 1), q(1, 2), q(2, 1)).unwrap();
        let f = TestFunction::indicator_box(2, vec![-1.0, -1.0, -1.0], vec![1.0, 1.0, 1.0], 1.0).unwrap();
        let pt = PointPair::new(vec![0.2, 0.1], vec![0.0]);
        let g = apply_operator(&cfg, &f, &pt, &QuadratureSpec::default()).unwrap();
        let m = apply_operator(&cfg, &f, &pt, &QuadratureSpec::monte_carlo(100_000, 5)).unwrap();
        assert!(g.agrees_with(&m, 1.0), "{g} vs {m}");
        assert!(g.rel_error() < 1e-3, "{g}");
    }

    #[test]
    fn lp_norms() {
        let spec = QuadratureSpec::default();
        let n2: Estimate<f64> = lp_norm(&square(), &q(2, 1), &spec).unwrap();
        assert!((n2.value - 2.0).abs() < 1e-14);
        let b = TestFunction::<f64>::smooth_bump(1, vec![0.0, 0.0], vec![1.0, 1.0], 1.0).unwrap();
        let n1 = lp_norm(&b, &q(1, 1), &spec).unwrap();
        let n2 = lp_norm(&b, &q(2, 1), &spec).unwrap();
        assert!((n1.value - b.integral()).abs() < 1e-10);
        assert!(n1.value <= n2.value * 2.0 + 1e-12);
        assert!(lp_norm(&b, &q(1, 2), &spec).is_err());
    }

    #[test]
    fn mass_nonnegative_and_q_checked() {
        let cfg = ExponentConfig::new(1, 1, q(9, 10), q(3, 10), q(2, 1)).unwrap();
        let atom = TestFunction::from_cells(
            1,
            1,
            FunctionKind::Atom,
            vec![(vec![-0.25, -0.25], vec![0.0, 0.25], -1.0), (vec![0.0, -0.25], vec![0.25, 0.25], 1.0)],
        )
        .unwrap();
        let spec = QuadratureSpec::default();
        let region = Region::Shell(Shell::new(2, 1, 0).unwrap());
        let m: Estimate<f64> = lq_mass(&cfg, &atom, &region, &q(2, 1), &spec).unwrap();
        assert!(m.value > 0.0 && m.error < 1e-2 * m.value, "{m}");
        assert!(lq_mass(&cfg, &atom, &region, &q(1, 1), &spec).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec { points_per_axis: 3, ..Default::default() }.validate().is_err());
        assert!(QuadratureSpec { samples: 0, ..Default::default() }.validate().is_err());
        assert!(QuadratureSpec { target_rel_error: 0.0, ..Default::default() }.validate().is_err());
        let s: QuadratureSpec = serde_json::from_str(r#"{"method":"monte-carlo","seed":4}"#).unwrap();
        assert_eq!(s.method, Method::MonteCarlo);
        assert!(serde_json::from_str::<QuadratureSpec>(r#"{"bogus":1}"#).is_err());
    }
}
