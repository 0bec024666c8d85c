//! H^1 atoms: bounded, mean-zero, cube-supported piecewise-constant functions.
//!
//! The atom's cube `Q` is the origin-centred cube of side `2^L`. Support may be
//! required in `(1/2) Q` ([`SupportConvention::HalfCube`], the default) or in
//! `Q` itself, and the sup bound is either the strict `1/vol(Q)` or the lenient
//! `2^{n+m}/vol(Q)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Cube;
use crate::error::{Error, Result};
use crate::quadrature::{FunctionKind, Profile, QuadratureSpec, TestFunction};
use crate::scalar::{CompensatedSum, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SupportConvention {
    #[default]
    HalfCube,
    FullCube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `|a| <= 1/vol(Q)`
    #[default]
    Strict,
    /// `|a| <= 2^{n+m}/vol(Q)`
    PaperLenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom<T> {
    pub cube: Cube,
    pub support: SupportConvention,
    pub normalization: Normalization,
    pub payload: TestFunction<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AtomReport {
    pub support_ok: bool,
    pub bound_ok: bool,
    pub mean_ok: bool,
}

impl AtomReport {
    pub fn is_valid(&self) -> bool {
        self.support_ok && self.bound_ok && self.mean_ok
    }
}

impl<T: Real> Atom<T> {
    pub fn new(cube: Cube, support: SupportConvention, normalization: Normalization, payload: TestFunction<T>) -> Result<Self> {
        if payload.n() != cube.n || payload.m() != cube.m {
            return Err(Error::InvalidConfig("payload dimensions differ from the cube".into()));
        }
        Ok(Self { cube, support, normalization, payload })
    }

    pub fn scale(&self) -> i32 {
        self.cube.scale
    }

    /// Half side of the box the support must lie in.
    pub fn support_half_side(&self) -> T {
        match self.support {
            SupportConvention::HalfCube => self.cube.half().half_side(),
            SupportConvention::FullCube => self.cube.half_side(),
        }
    }

    pub fn sup_bound(&self) -> T {
        let v: T = self.cube.volume();
        match self.normalization {
            Normalization::Strict => T::one() / v,
            Normalization::PaperLenient => T::lit(2.0).powi(self.cube.dim() as i32) / v,
        }
    }

    /// The three atom conditions. The mean is summed exactly over pieces, so
    /// the quadrature spec is not consulted for piecewise-constant payloads.
    pub fn validate(&self, _spec: &QuadratureSpec) -> AtomReport {
        let h = self.support_half_side();
        let support_ok = self
            .payload
            .pieces()
            .iter()
            .all(|p| p.value == T::zero() || p.lo.iter().chain(&p.hi).all(|c| c.abs() <= h));
        let sup = self.payload.sup_abs();
        let bound_ok = sup <= self.sup_bound();
        let mut mean = CompensatedSum::new();
        for p in self.payload.pieces() {
            mean.add(p.integral());
        }
        let vol: T = self.cube.volume();
        let mean_ok = mean.value().abs() <= T::lit(1e-10) * vol * sup;
        AtomReport { support_ok, bound_ok, mean_ok }
    }
}

fn signum_cells<T: Real>(n: usize, m: usize, h: T, value: T) -> Vec<(Vec<T>, Vec<T>, T)> {
    let d = n + m;
    let lo = vec![-h; d];
    let hi = vec![h; d];
    let mut neg_hi = hi.clone();
    neg_hi[0] = T::zero();
    let mut pos_lo = lo.clone();
    pos_lo[0] = T::zero();
    vec![(lo, neg_hi, -value), (pos_lo, hi, value)]
}

/// `sgn(x_1)` on `Q_o = [-1, 1]^{n+m}`; its cube has `L = 1`, full-cube
/// support and lenient normalisation.
pub fn make_signum_atom<T: Real>(n: usize, m: usize) -> Result<Atom<T>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("signum atom needs n, m >= 1".into()));
    }
    let payload = TestFunction::from_cells(n, m, FunctionKind::Atom, signum_cells(n, m, T::one(), T::one()))?;
    Atom::new(Cube::new(n, m, 1), SupportConvention::FullCube, Normalization::PaperLenient, payload)
}

/// `sgn(x_1)/vol(Q)` on `(1/2) Q`, strict normalisation.
pub fn make_signum_style_atom<T: Real>(n: usize, m: usize, scale: i32) -> Result<Atom<T>> {
    if n == 0 {
        return Err(Error::InvalidConfig("atom needs n >= 1".into()));
    }
    let cube = Cube::new(n, m, scale);
    let v: T = cube.volume();
    let h: T = cube.half().half_side();
    let payload = TestFunction::from_cells(n, m, FunctionKind::Atom, signum_cells(n, m, h, T::one() / v))?;
    Atom::new(cube, SupportConvention::HalfCube, Normalization::Strict, payload)
}

/// Non-cancelling control `chi_{(1/2)Q}/vol(Q)`; fails the mean condition.
pub fn make_bump_control<T: Real>(n: usize, m: usize, scale: i32) -> Result<Atom<T>> {
    let cube = Cube::new(n, m, scale);
    let v: T = cube.volume();
    let h: T = cube.half().half_side();
    let d = n + m;
    let payload = TestFunction::indicator_box(n, vec![-h; d], vec![h; d], T::one() / v)?;
    Atom::new(cube, SupportConvention::HalfCube, Normalization::Strict, payload)
}

/// Piecewise constant on the `2 x ... x 2` split of `(1/2) Q`.
///
/// Integer draws have their mean removed exactly (the cell count is a power of
/// two) and are scaled by a power of two below `1/vol(Q)`, so every value is a
/// dyadic rational and the mean is exactly zero.
pub fn make_random_atom<T: Real>(cube: Cube, seed: u64) -> Result<Atom<T>> {
    let d = cube.dim();
    if cube.n == 0 || d > 16 {
        return Err(Error::InvalidConfig("random atoms need 1 <= n and n + m <= 16".into()));
    }
    let cells = 1usize << d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<i64> = (0..cells).map(|_| rng.gen_range(-1024..=1024)).collect();
    let sum: i64 = draws.iter().sum();
    let mut c: Vec<i64> = draws.iter().map(|&v| v * cells as i64 - sum).collect();
    if c.iter().all(|&v| v == 0) {
        for (i, v) in c.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 1 } else { -1 };
        }
    }
    let max = c.iter().map(|v| v.unsigned_abs()).max().unwrap_or(1);
    let e = 64 - (max - 1).leading_zeros() as i32; // 2^e >= max
    let vol: T = cube.volume();
    let unit = T::lit(2.0).powi(-e) / vol;
    let h: T = cube.half().half_side();
    let mut out = Vec::with_capacity(cells);
    for (idx, &v) in c.iter().enumerate() {
        if v == 0 {
            continue;
        }
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for a in 0..d {
            if (idx >> a) & 1 == 0 {
                lo.push(-h);
                hi.push(T::zero());
            } else {
                lo.push(T::zero());
                hi.push(h);
            }
        }
        out.push((lo, hi, T::lit(v as f64) * unit));
    }
    let payload = TestFunction::from_cells(cube.n, cube.m, FunctionKind::Atom, out)?;
    Atom::new(cube, SupportConvention::HalfCube, Normalization::Strict, payload)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellJson {
    #[serde(rename = "box")]
    pub cell: CellBox,
    pub value: f64,
}

/// Serialised form `{n, m, L, cells: [{box: {lo, hi}, value}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomJson {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "L")]
    pub scale: i32,
    pub cells: Vec<CellJson>,
    #[serde(default)]
    pub support: SupportConvention,
    #[serde(default)]
    pub normalization: Normalization,
}

impl<T: Real> Atom<T> {
    pub fn to_json(&self) -> Result<AtomJson> {
        let mut cells = Vec::new();
        for p in self.payload.pieces() {
            if p.profile != Profile::Constant {
                return Err(Error::InvalidConfig("only piecewise-constant atoms serialise".into()));
            }
            cells.push(CellJson {
                cell: CellBox {
                    lo: p.lo.iter().map(|v| v.as_f64()).collect(),
                    hi: p.hi.iter().map(|v| v.as_f64()).collect(),
                },
                value: p.value.as_f64(),
            });
        }
        Ok(AtomJson {
            n: self.cube.n,
            m: self.cube.m,
            scale: self.cube.scale,
            cells,
            support: self.support,
            normalization: self.normalization,
        })
    }

    pub fn from_json(j: &AtomJson) -> Result<Self> {
        let cells = j
            .cells
            .iter()
            .map(|c| {
                (
                    c.cell.lo.iter().map(|&v| T::lit(v)).collect(),
                    c.cell.hi.iter().map(|&v| T::lit(v)).collect(),
                    T::lit(c.value),
                )
            })
            .collect();
        let payload = TestFunction::from_cells(j.n, j.m, FunctionKind::Atom, cells)?;
        Atom::new(Cube::new(j.n, j.m, j.scale), j.support, j.normalization, payload)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json()?)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: AtomJson = serde_json::from_str(s)?;
        Self::from_json(&j)
    }
}
