//! Group backends: the cyclic group `Z_N` and the affine group `R ⋊ R_+`.
//!
//! Affine points are written `(b, a)` with product
//! `(b, a)(b', a') = (a b' + b, a a')`, left Haar measure `a^{-2} db da` and
//! modular function `Δ(b, a) = 1/a`.  Grids are uniform in `b` and geometric
//! in `a` with ratio `r`, so every dilation between two grid rows is an exact
//! integer shift of the `a`-exponent.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Below this magnitude the singular branches of exp/log/θ use series.
const SERIES_CUTOFF: f64 = 1e-4;

/// Relative tolerance used to recognise a dilation as a lattice power.
const LATTICE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Cyclic,
    Affine,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Cyclic => "cyclic",
            Backend::Affine => "affine",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A point of one of the two groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupPoint {
    /// `k mod n`.
    Cyclic { k: usize, n: usize },
    /// `(b, a)` with `a > 0`.
    Affine { b: f64, a: f64 },
}

impl GroupPoint {
    pub fn cyclic(k: usize, n: usize) -> Result<Self> {
        if n == 0 || k >= n {
            return Err(Error::InvalidPoint(format!("cyclic index {k} not in Z_{n}")));
        }
        Ok(GroupPoint::Cyclic { k, n })
    }

    pub fn affine(b: f64, a: f64) -> Result<Self> {
        if !(b.is_finite() && a.is_finite() && a > 0.0) {
            return Err(Error::InvalidPoint(format!("affine point ({b}, {a}) needs a > 0")));
        }
        Ok(GroupPoint::Affine { b, a })
    }

    pub fn backend(&self) -> Backend {
        match self {
            GroupPoint::Cyclic { .. } => Backend::Cyclic,
            GroupPoint::Affine { .. } => Backend::Affine,
        }
    }

    /// The unit `e` of the same group as `self`.
    pub fn identity_like(&self) -> GroupPoint {
        match *self {
            GroupPoint::Cyclic { n, .. } => GroupPoint::Cyclic { k: 0, n },
            GroupPoint::Affine { .. } => GroupPoint::Affine { b: 0.0, a: 1.0 },
        }
    }

    pub fn affine_coords(&self) -> Option<(f64, f64)> {
        match *self {
            GroupPoint::Affine { b, a } => Some((b, a)),
            GroupPoint::Cyclic { .. } => None,
        }
    }
}

impl fmt::Display for GroupPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupPoint::Cyclic { k, n } => write!(f, "{k} mod {n}"),
            GroupPoint::Affine { b, a } => write!(f, "({b}, {a})"),
        }
    }
}

/// Group product `x · y`.
pub fn multiply(x: &GroupPoint, y: &GroupPoint) -> Result<GroupPoint> {
    match (*x, *y) {
        (GroupPoint::Cyclic { k, n }, GroupPoint::Cyclic { k: l, n: m }) if n == m => {
            Ok(GroupPoint::Cyclic { k: (k + l) % n, n })
        }
        (GroupPoint::Affine { b, a }, GroupPoint::Affine { b: b2, a: a2 }) => Ok(GroupPoint::Affine {
            b: a * b2 + b,
            a: a * a2,
        }),
        _ => Err(Error::BackendMismatch(format!("cannot multiply {x} and {y}"))),
    }
}

pub fn inverse(x: &GroupPoint) -> GroupPoint {
    match *x {
        GroupPoint::Cyclic { k, n } => GroupPoint::Cyclic { k: (n - k) % n, n },
        GroupPoint::Affine { b, a } => GroupPoint::Affine { b: -b / a, a: 1.0 / a },
    }
}

/// Value of the modular function, always strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ModularValue(pub f64);

impl ModularValue {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn powf(self, p: f64) -> f64 {
        self.0.powf(p)
    }
}

pub fn modular(x: &GroupPoint) -> ModularValue {
    match *x {
        GroupPoint::Cyclic { .. } => ModularValue(1.0),
        GroupPoint::Affine { a, .. } => ModularValue(1.0 / a),
    }
}

/// Element `(β, α)` of the affine Lie algebra, bracket
/// `[(β,α),(β',α')] = (αβ' − α'β, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieVector {
    pub beta: f64,
    pub alpha: f64,
}

impl LieVector {
    pub fn new(beta: f64, alpha: f64) -> Self {
        LieVector { beta, alpha }
    }
}

/// `(e^α − 1)/α`, continuous at 0.
fn expm1_over(alpha: f64) -> f64 {
    if alpha.abs() < SERIES_CUTOFF {
        1.0 + alpha / 2.0 + alpha * alpha / 6.0 + alpha * alpha * alpha / 24.0
    } else {
        alpha.exp_m1() / alpha
    }
}

/// `u/(e^u − 1)`, continuous at 0.
fn over_expm1(u: f64) -> f64 {
    if u.abs() < SERIES_CUTOFF {
        let u2 = u * u;
        1.0 - u / 2.0 + u2 / 12.0 - u2 * u2 / 720.0
    } else {
        u / u.exp_m1()
    }
}

pub fn exp_map(x: &LieVector) -> GroupPoint {
    GroupPoint::Affine {
        b: x.beta * expm1_over(x.alpha),
        a: x.alpha.exp(),
    }
}

pub fn log_map(x: &GroupPoint) -> Result<LieVector> {
    match *x {
        GroupPoint::Affine { b, a } => {
            let u = a.ln();
            Ok(LieVector {
                beta: b * over_expm1(u),
                alpha: u,
            })
        }
        GroupPoint::Cyclic { .. } => Err(Error::Unsupported {
            backend: "cyclic",
            op: "log_map",
        }),
    }
}

/// Density of the pulled-back Haar measure in exponential coordinates,
/// `θ(β, α) = (1 − e^{−α})/α`.
pub fn theta(x: &LieVector) -> f64 {
    let a = x.alpha;
    if a.abs() < SERIES_CUTOFF {
        1.0 - a / 2.0 + a * a / 6.0 - a * a * a / 24.0
    } else {
        -(-a).exp_m1() / a
    }
}

/// Kernel factor `[q/(q−1) · ln q]^{1/2}` of the affine scalar calculus,
/// where `q = a/a₁`; equals `θ(ln q)^{-1/2}` and tends to 1 as `q → 1`.
pub fn affine_kernel_factor(q: f64) -> f64 {
    let u = q.ln();
    if u.abs() < SERIES_CUTOFF {
        let u2 = u * u;
        (1.0 + u / 2.0 + u2 / 12.0 - u2 * u2 / 720.0).sqrt()
    } else {
        (q / (q - 1.0) * u).sqrt()
    }
}

/// Grid parameters, as read from JSON.
///
/// Cyclic grids only need `N`; affine grids need `h_b`, `r`, `b_halfwidth`,
/// `j_min`, `j_max`.  The representation-space grid (`s0`, `m_min`, `m_max`)
/// is optional and defaults to the nodes `r^m`, `m ∈ [m_max − (j_max − j_min), m_max)`
/// with `r^{m_max}` the first power at or above the `b`-Nyquist frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub backend: Backend,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_halfwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_min: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_min: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<i32>,
}

impl GridConfig {
    pub fn cyclic(n: usize) -> Self {
        GridConfig {
            backend: Backend::Cyclic,
            n: Some(n),
            h_b: None,
            r: None,
            b_halfwidth: None,
            j_min: None,
            j_max: None,
            s0: None,
            m_min: None,
            m_max: None,
        }
    }

    pub fn affine(h_b: f64, r: f64, b_halfwidth: f64, j_min: i32, j_max: i32) -> Self {
        GridConfig {
            backend: Backend::Affine,
            n: None,
            h_b: Some(h_b),
            r: Some(r),
            b_halfwidth: Some(b_halfwidth),
            j_min: Some(j_min),
            j_max: Some(j_max),
            s0: None,
            m_min: None,
            m_max: None,
        }
    }

    /// 32 × 32 nodes on `[-8, 8) × [2^{-4}, 2^{4})`, `r = 2^{1/4}`.
    pub fn affine_baseline() -> Self {
        GridConfig::affine(0.5, 2f64.powf(0.25), 8.0, -16, 16)
    }

    pub fn with_rep_grid(mut self, s0: f64, m_min: i32, m_max: i32) -> Self {
        self.s0 = Some(s0);
        self.m_min = Some(m_min);
        self.m_max = Some(m_max);
        self
    }

    /// One refinement step: `h_b → h_b/2`, `r → r^{1/2}`, same physical
    /// extents.  The representation grid keeps its nodes and gains one
    /// octave on each side.
    pub fn refined(&self) -> Result<GridConfig> {
        match self.backend {
            Backend::Cyclic => {
                let n = self.n.ok_or_else(|| Error::Config("cyclic grid needs N".into()))?;
                Ok(GridConfig {
                    n: Some(2 * n),
                    ..self.clone()
                })
            }
            Backend::Affine => {
                let p = AffineParams::from_config(self)?;
                let r = p.r.sqrt();
                let octave = (2f64.ln() / r.ln()).round() as i32;
                Ok(GridConfig {
                    h_b: Some(p.h_b / 2.0),
                    r: Some(r),
                    j_min: Some(2 * p.j_min),
                    j_max: Some(2 * p.j_max),
                    s0: Some(p.s0),
                    m_min: Some(2 * p.m_min - octave.max(1)),
                    m_max: Some(2 * p.m_max + octave.max(1)),
                    ..self.clone()
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct AffineParams {
    h_b: f64,
    r: f64,
    b_halfwidth: f64,
    j_min: i32,
    j_max: i32,
    s0: f64,
    m_min: i32,
    m_max: i32,
}

impl AffineParams {
    fn from_config(c: &GridConfig) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("affine grid needs `{name}`")));
        let h_b = need(c.h_b, "h_b")?;
        let r = need(c.r, "r")?;
        let b_halfwidth = need(c.b_halfwidth, "b_halfwidth")?;
        let j_min = c
            .j_min
            .ok_or_else(|| Error::Config("affine grid needs `j_min`".into()))?;
        let j_max = c
            .j_max
            .ok_or_else(|| Error::Config("affine grid needs `j_max`".into()))?;
        if !(h_b.is_finite() && h_b > 0.0) {
            return Err(Error::Config(format!("h_b must be > 0, got {h_b}")));
        }
        if !(r.is_finite() && r > 1.0) {
            return Err(Error::Config(format!("r must be > 1, got {r}")));
        }
        if !(b_halfwidth.is_finite() && b_halfwidth >= h_b) {
            return Err(Error::Config(format!("b_halfwidth must be >= h_b, got {b_halfwidth}")));
        }
        if j_max <= j_min {
            return Err(Error::Config(format!("empty a-exponent range [{j_min}, {j_max})")));
        }
        let s0 = c.s0.unwrap_or(1.0);
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(Error::Config(format!("s0 must be > 0, got {s0}")));
        }
        let (m_min, m_max) = match (c.m_min, c.m_max) {
            (Some(lo), Some(hi)) => (lo, hi),
            (None, None) => {
                let nyquist = 0.5 / h_b;
                let hi = ((nyquist / s0).ln() / r.ln() - LATTICE_TOL).ceil() as i32;
                (hi - (j_max - j_min), hi)
            }
            _ => return Err(Error::Config("m_min and m_max must be given together".into())),
        };
        if m_max <= m_min {
            return Err(Error::Config(format!("empty s-exponent range [{m_min}, {m_max})")));
        }
        Ok(AffineParams {
            h_b,
            r,
            b_halfwidth,
            j_min,
            j_max,
            s0,
            m_min,
            m_max,
        })
    }
}

/// Uniform-in-`b`, geometric-in-`a` lattice of the affine group.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLattice {
    pub h_b: f64,
    pub r: f64,
    pub ln_r: f64,
    pub b_min: f64,
    pub n_b: usize,
    pub j_min: i32,
    pub j_max: i32,
}

impl AffineLattice {
    pub fn n_a(&self) -> usize {
        (self.j_max - self.j_min) as usize
    }

    pub fn len(&self) -> usize {
        self.n_a() * self.n_b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn b(&self, ib: usize) -> f64 {
        self.b_min + ib as f64 * self.h_b
    }

    pub fn b_max(&self) -> f64 {
        self.b(self.n_b - 1)
    }

    pub fn a(&self, j: i32) -> f64 {
        self.r.powi(j)
    }

    /// Node index of `(ib, j)`, `j` the absolute `a`-exponent.
    pub fn index(&self, ib: usize, j: i32) -> usize {
        (j - self.j_min) as usize * self.n_b + ib
    }

    /// `(ib, j)` of a node index.
    pub fn split(&self, idx: usize) -> (usize, i32) {
        (idx % self.n_b, (idx / self.n_b) as i32 + self.j_min)
    }

    pub fn contains_exponent(&self, j: i32) -> bool {
        j >= self.j_min && j < self.j_max
    }

    /// The integer `k` with `a = r^k`, if `a` is a lattice power.
    pub fn exponent_of(&self, a: f64) -> Option<i32> {
        let t = a.ln() / self.ln_r;
        let k = t.round();
        if (t - k).abs() <= LATTICE_TOL * (1.0 + t.abs()) {
            Some(k as i32)
        } else {
            None
        }
    }

    pub fn weight(&self, j: i32) -> f64 {
        self.h_b * self.ln_r / self.a(j)
    }

    /// Fractional `b`-position `(b − b_min)/h_b`, snapped to an integer
    /// when within rounding of one.
    pub fn b_position(&self, b: f64) -> f64 {
        let t = (b - self.b_min) / self.h_b;
        let k = t.round();
        if (t - k).abs() <= LATTICE_TOL * (1.0 + t.abs()) {
            k
        } else {
            t
        }
    }

    /// Whether `b` lies within half a cell of the sampled range.
    pub fn b_in_range(&self, b: f64) -> bool {
        let t = (b - self.b_min) / self.h_b;
        t >= -0.5 && t <= self.n_b as f64 - 0.5
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridKind {
    Cyclic { n: usize },
    Affine(AffineLattice),
}

/// Rep-space grid parameters carried along with the group grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepGridParams {
    pub s0: f64,
    pub ratio: f64,
    pub m_min: i32,
    pub m_max: i32,
}

/// Quadrature model of a group: nodes with strictly positive left-Haar weights.
#[derive(Clone, Debug)]
pub struct GroupGrid {
    config: GridConfig,
    kind: GridKind,
    nodes: Vec<GroupPoint>,
    weights: Vec<f64>,
    rep: Option<RepGridParams>,
}

impl PartialEq for GroupGrid {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.rep == other.rep
    }
}

pub fn build_grid(config: &GridConfig) -> Result<GroupGrid> {
    match config.backend {
        Backend::Cyclic => {
            let n = config.n.ok_or_else(|| Error::Config("cyclic grid needs N".into()))?;
            if n < 2 {
                return Err(Error::Config(format!("cyclic grid needs N >= 2, got {n}")));
            }
            let nodes = (0..n).map(|k| GroupPoint::Cyclic { k, n }).collect();
            Ok(GroupGrid {
                config: config.clone(),
                kind: GridKind::Cyclic { n },
                nodes,
                weights: vec![1.0; n],
                rep: None,
            })
        }
        Backend::Affine => {
            let p = AffineParams::from_config(config)?;
            let n_b = (2.0 * p.b_halfwidth / p.h_b).round() as usize;
            let lat = AffineLattice {
                h_b: p.h_b,
                r: p.r,
                ln_r: p.r.ln(),
                b_min: -p.b_halfwidth,
                n_b,
                j_min: p.j_min,
                j_max: p.j_max,
            };
            let mut nodes = Vec::with_capacity(lat.len());
            let mut weights = Vec::with_capacity(lat.len());
            for j in lat.j_min..lat.j_max {
                let a = lat.a(j);
                let w = lat.weight(j);
                for ib in 0..n_b {
                    nodes.push(GroupPoint::Affine { b: lat.b(ib), a });
                    weights.push(w);
                }
            }
            Ok(GroupGrid {
                config: config.clone(),
                kind: GridKind::Affine(lat),
                nodes,
                weights,
                rep: Some(RepGridParams {
                    s0: p.s0,
                    ratio: p.r,
                    m_min: p.m_min,
                    m_max: p.m_max,
                }),
            })
        }
    }
}

impl GroupGrid {
    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn backend(&self) -> Backend {
        self.config.backend
    }

    pub fn kind(&self) -> &GridKind {
        &self.kind
    }

    pub fn affine(&self) -> Option<&AffineLattice> {
        match &self.kind {
            GridKind::Affine(l) => Some(l),
            GridKind::Cyclic { .. } => None,
        }
    }

    pub fn cyclic_order(&self) -> Option<usize> {
        match self.kind {
            GridKind::Cyclic { n } => Some(n),
            GridKind::Affine(_) => None,
        }
    }

    pub fn rep_params(&self) -> Option<RepGridParams> {
        self.rep
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GroupPoint] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> GroupPoint {
        self.nodes[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn identity(&self) -> GroupPoint {
        self.nodes[0].identity_like()
    }

    /// Node index of the identity; affine grids must contain `(0, 1)`.
    pub fn identity_index(&self) -> Option<usize> {
        self.locate(&self.identity())
    }

    pub fn modular_at(&self, i: usize) -> f64 {
        modular(&self.nodes[i]).0
    }

    /// Node index of `x` if `x` is (within rounding) a grid node.
    pub fn locate(&self, x: &GroupPoint) -> Option<usize> {
        match (&self.kind, *x) {
            (GridKind::Cyclic { n }, GroupPoint::Cyclic { k, n: m }) if *n == m => Some(k),
            (GridKind::Affine(lat), GroupPoint::Affine { b, a }) => {
                let j = lat.exponent_of(a)?;
                if !lat.contains_exponent(j) {
                    return None;
                }
                let t = lat.b_position(b);
                if t.fract() != 0.0 || t < 0.0 || t >= lat.n_b as f64 {
                    return None;
                }
                Some(lat.index(t as usize, j))
            }
            _ => None,
        }
    }

    /// Whether `x` lies inside the grid's sampled region (half-cell margin).
    pub fn covers(&self, x: &GroupPoint) -> bool {
        match (&self.kind, *x) {
            (GridKind::Cyclic { n }, GroupPoint::Cyclic { n: m, .. }) => *n == m,
            (GridKind::Affine(lat), GroupPoint::Affine { b, a }) => {
                let t = a.ln() / lat.ln_r;
                t >= lat.j_min as f64 - 0.5 && t <= lat.j_max as f64 - 0.5 && lat.b_in_range(b)
            }
            _ => false,
        }
    }

    /// Whether two grids have identical nodes and rep-grid parameters.
    pub fn same_as(&self, other: &GroupGrid) -> bool {
        std::ptr::eq(self, other) || self == other
    }

    /// Interpolation stencil of `x`: node indices with their weights.
    ///
    /// Cyclic grids return the node itself.  Affine grids use bilinear
    /// weights in `(b, ln a)`; neighbours outside the grid are dropped, and a
    /// point beyond the node hull gets an empty stencil (value zero).
    pub fn stencil(&self, x: &GroupPoint) -> Vec<(usize, f64)> {
        match (&self.kind, *x) {
            (GridKind::Cyclic { n }, GroupPoint::Cyclic { k, n: m }) if *n == m => vec![(k, 1.0)],
            (GridKind::Affine(lat), GroupPoint::Affine { b, a }) => {
                let (ja, wa): (i32, f64) = match lat.exponent_of(a) {
                    Some(j) => (j, 0.0),
                    None => {
                        let t = a.ln() / lat.ln_r;
                        (t.floor() as i32, t - t.floor())
                    }
                };
                let tb = lat.b_position(b);
                if tb < 0.0 || tb > (lat.n_b - 1) as f64 {
                    return Vec::new();
                }
                let ib = (tb.floor() as usize).min(lat.n_b - 1);
                let wb = tb - ib as f64;
                let mut out = Vec::with_capacity(4);
                for (j, wj) in [(ja, 1.0 - wa), (ja + 1, wa)] {
                    if wj == 0.0 || !lat.contains_exponent(j) {
                        continue;
                    }
                    out.push((lat.index(ib, j), wj * (1.0 - wb)));
                    if wb != 0.0 {
                        out.push((lat.index(ib + 1, j), wj * wb));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Interpolate nodal values at an arbitrary point (see [`GroupGrid::stencil`]).
    pub fn interpolate(&self, values: &[C64], x: &GroupPoint) -> C64 {
        self.stencil(x).into_iter().map(|(i, w)| values[i] * w).sum()
    }
}

/// Haar-weighted sum of nodal values: the quadrature of `∫_G f dμ`.
pub fn haar_integral(grid: &GroupGrid, values: &[C64]) -> Result<C64> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    Ok(values.iter().zip(grid.weights()).map(|(v, w)| v * *w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aff(b: f64, a: f64) -> GroupPoint {
        GroupPoint::affine(b, a).unwrap()
    }

    #[test]
    fn product_law_examples() {
        assert_eq!(multiply(&aff(1.0, 2.0), &aff(3.0, 4.0)).unwrap(), aff(7.0, 8.0));
        assert_eq!(multiply(&aff(0.0, 1.0), &aff(-2.5, 0.3)).unwrap(), aff(-2.5, 0.3));
        let x = aff(1.0, 2.0);
        assert_eq!(inverse(&x), aff(-0.5, 0.5));
        assert_eq!(multiply(&x, &inverse(&x)).unwrap(), aff(0.0, 1.0));
        assert_eq!(inverse(&aff(0.0, 1.0)), aff(0.0, 1.0));
    }

    #[test]
    fn cyclic_inverse_and_mismatch() {
        let x = GroupPoint::cyclic(3, 8).unwrap();
        assert_eq!(inverse(&x), GroupPoint::cyclic(5, 8).unwrap());
        assert_eq!(
            inverse(&GroupPoint::cyclic(0, 8).unwrap()),
            GroupPoint::cyclic(0, 8).unwrap()
        );
        assert!(matches!(multiply(&x, &aff(0.0, 1.0)), Err(Error::BackendMismatch(_))));
        assert!(multiply(&x, &GroupPoint::cyclic(1, 5).unwrap()).is_err());
        assert!(GroupPoint::cyclic(8, 8).is_err());
        assert!(GroupPoint::affine(0.0, 0.0).is_err());
    }

    #[test]
    fn modular_values() {
        assert_eq!(modular(&aff(3.0, 4.0)).value(), 0.25);
        assert_eq!(modular(&aff(0.0, 1.0)).value(), 1.0);
        assert_eq!(modular(&GroupPoint::cyclic(5, 7).unwrap()).value(), 1.0);
    }

    #[test]
    fn exp_log_theta_examples() {
        assert_eq!(exp_map(&LieVector::new(0.7, 0.0)), aff(0.7, 1.0));
        let e1 = exp_map(&LieVector::new(0.0, 1.0));
        assert_eq!(e1, aff(0.0, std::f64::consts::E));
        let back = log_map(&exp_map(&LieVector::new(0.3, -0.7))).unwrap();
        assert!((back.beta - 0.3).abs() < 1e-12 && (back.alpha + 0.7).abs() < 1e-12);

        assert_eq!(theta(&LieVector::new(4.0, 0.0)), 1.0);
        assert!((theta(&LieVector::new(0.0, 1.0)) - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!((theta(&LieVector::new(5.0, -1.0)) - 1.718_281_828_459_045).abs() < 1e-14);
        assert!(log_map(&GroupPoint::cyclic(1, 4).unwrap()).is_err());
    }

    #[test]
    fn singular_branches_are_continuous() {
        for &eps in &[1e-10, -1e-10, 0.99e-4, -0.99e-4, 1.01e-4, -1.01e-4] {
            let x = LieVector::new(1.3, eps);
            let direct = eps.exp_m1() / eps;
            assert!((expm1_over(eps) - direct).abs() < 1e-12);
            let back = log_map(&exp_map(&x)).unwrap();
            assert!((back.beta - x.beta).abs() < 1e-12);
            assert!((back.alpha - x.alpha).abs() < 1e-12);
        }
        for &a in &[0.999_999e-4f64, -0.999_999e-4, 1e-10] {
            let direct = -(-a).exp_m1() / a;
            assert!((theta(&LieVector::new(0.0, a)) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_factor_limit() {
        assert_eq!(affine_kernel_factor(1.0), 1.0);
        for &q in &[1.0 + 1e-8, 1.0 - 1e-8] {
            assert!((affine_kernel_factor(q) - 1.0).abs() <= 1e-6);
        }
        let q: f64 = 3.0;
        let direct = (q / (q - 1.0) * q.ln()).sqrt();
        assert_eq!(affine_kernel_factor(q), direct);
        let th = theta(&LieVector::new(0.0, q.ln()));
        assert!((affine_kernel_factor(q) - th.powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn cyclic_grid() {
        let g = build_grid(&GridConfig::cyclic(8)).unwrap();
        assert_eq!(g.len(), 8);
        assert!(g.weights().iter().all(|&w| w == 1.0));
        assert!(build_grid(&GridConfig::cyclic(1)).is_err());
        let ones = vec![C64::new(1.0, 0.0); 8];
        assert_eq!(haar_integral(&g, &ones).unwrap(), C64::new(8.0, 0.0));
    }

    #[test]
    fn affine_grid_weights_and_ratio() {
        let g = build_grid(&GridConfig::affine(0.5, 2f64.powf(0.25), 8.0, -16, 16)).unwrap();
        let lat = g.affine().unwrap();
        assert_eq!(g.len(), 32 * 32);
        let idx = lat.index(5, 8);
        let expected = 0.5 * 2f64.ln() / 4.0 * 0.25;
        assert!((g.weight(idx) - expected).abs() < 1e-15);
        for j in lat.j_min..lat.j_max - 1 {
            let ratio = lat.a(j + 1) / lat.a(j);
            assert!((ratio - lat.r).abs() <= 4.0 * f64::EPSILON * lat.r);
        }
        assert_eq!(g.identity_index().map(|i| g.node(i)), Some(aff(0.0, 1.0)));
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(build_grid(&GridConfig::affine(0.5, 1.0, 8.0, -4, 4)).is_err());
        assert!(build_grid(&GridConfig::affine(-0.5, 1.2, 8.0, -4, 4)).is_err());
        assert!(build_grid(&GridConfig::affine(0.5, 1.2, 8.0, 4, 4)).is_err());
    }

    #[test]
    fn default_rep_grid_sits_below_nyquist() {
        let g = build_grid(&GridConfig::affine_baseline()).unwrap();
        let p = g.rep_params().unwrap();
        assert_eq!(p.m_max - p.m_min, 32);
        let top = p.s0 * p.ratio.powi(p.m_max - 1);
        assert!(top < 1.0 && top * p.ratio >= 1.0 - 1e-12);
    }

    #[test]
    fn refinement_halves_spacings() {
        let c = GridConfig::affine_baseline();
        let f = c.refined().unwrap();
        let g = build_grid(&f).unwrap();
        let lat = g.affine().unwrap();
        assert_eq!(lat.n_b, 64);
        assert_eq!(lat.n_a(), 64);
        assert!((lat.a(lat.j_min) - 1.0 / 16.0).abs() < 1e-14);
        let p = g.rep_params().unwrap();
        assert_eq!(p.m_max - p.m_min, 80);
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_linear_between() {
        let g = build_grid(&GridConfig::affine(0.5, 2f64.powf(0.25), 2.0, -2, 2)).unwrap();
        let vals: Vec<C64> = g
            .nodes()
            .iter()
            .map(|p| {
                let (b, a) = p.affine_coords().unwrap();
                C64::new(2.0 * b + a.ln(), 0.0)
            })
            .collect();
        for (i, p) in g.nodes().iter().enumerate() {
            assert_eq!(g.interpolate(&vals, p), vals[i]);
        }
        let v = g.interpolate(&vals, &aff(0.25, 1.0));
        assert!((v.re - 0.5).abs() < 1e-14);
        assert_eq!(g.interpolate(&vals, &aff(5.0, 1.0)), C64::new(0.0, 0.0));
    }
}
