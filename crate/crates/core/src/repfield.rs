//! Unitary duals, irreducible representations, Duflo–Moore operators and
//! Hilbert–Schmidt operator fields.
//!
//! The cyclic dual is the set of characters `ξ_m(k) = e^{−2πimk/N}` with
//! Plancherel weight `1/N`; every representation space is one-dimensional.
//!
//! The affine dual has two points `π_±` realised on `L²(R_±, ds)` by
//! `[π_±(b,a)φ](s) = a^{1/2} e^{2πibs} φ(as)`, with Duflo–Moore operator
//! `Dφ(s) = |s|φ(s)` and Plancherel weight 1.  The half-line is sampled on
//! the log lattice `s_m = ±s₀ r^m` with quadrature weights `|s_m| ln r`.
//!
//! Operators on a sampled half-line are stored in the orthonormal basis
//! `e_m = δ_m / √w_m`.  In that basis the Hilbert–Schmidt inner product is the
//! Frobenius inner product, the adjoint is the conjugate transpose, and
//! `π(b, r^k)` is a unimodular diagonal followed by a shift of `k` places.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{modular, Backend, GroupGrid, GroupPoint};
use crate::C64;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// A point of the unitary dual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DualPoint {
    /// Character `m` of `Z_n`.
    Character { m: usize, n: usize },
    /// One of the two infinite-dimensional affine representations.
    Affine(Sign),
}

impl DualPoint {
    pub fn label(&self) -> String {
        match self {
            DualPoint::Character { m, .. } => format!("chi{m}"),
            DualPoint::Affine(s) => match s {
                Sign::Plus => "plus".to_string(),
                Sign::Minus => "minus".to_string(),
            },
        }
    }
}

/// Log lattice on one half-line.
#[derive(Clone, Debug)]
pub struct RepGrid {
    pub sign: Sign,
    pub s0: f64,
    pub ratio: f64,
    pub ln_ratio: f64,
    pub m_min: i32,
    pub m_max: i32,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PartialEq for RepGrid {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign
            && self.s0 == other.s0
            && self.ratio == other.ratio
            && self.m_min == other.m_min
            && self.m_max == other.m_max
    }
}

impl RepGrid {
    pub fn new(sign: Sign, s0: f64, ratio: f64, m_min: i32, m_max: i32) -> Result<Self> {
        if !(ratio > 1.0 && s0 > 0.0 && m_max > m_min) {
            return Err(Error::Config(format!(
                "rep grid needs ratio > 1, s0 > 0, m_min < m_max (got {ratio}, {s0}, [{m_min}, {m_max}))"
            )));
        }
        let ln_ratio = ratio.ln();
        let nodes: Vec<f64> = (m_min..m_max).map(|m| sign.factor() * s0 * ratio.powi(m)).collect();
        let weights = nodes.iter().map(|s| s.abs() * ln_ratio).collect();
        Ok(RepGrid {
            sign,
            s0,
            ratio,
            ln_ratio,
            m_min,
            m_max,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Signed node values `s_m`, indexed from `m_min`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Signed node value for an arbitrary (possibly off-grid) exponent.
    pub fn s_at(&self, m: i32) -> f64 {
        self.sign.factor() * self.s0 * self.ratio.powi(m)
    }

    /// The integer `k` with `a = r^k`.
    pub fn shift_of(&self, a: f64) -> Result<i32> {
        let t = a.ln() / self.ln_ratio;
        let k = t.round();
        if (t - k).abs() <= 1e-9 * (1.0 + t.abs()) {
            Ok(k as i32)
        } else {
            Err(Error::OffLatticeDilation { a, ratio: self.ratio })
        }
    }
}

/// The Hilbert space a dual point acts on.
#[derive(Clone, Debug)]
pub enum RepSpace {
    Scalar,
    Line(Arc<RepGrid>),
}

impl PartialEq for RepSpace {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (RepSpace::Scalar, RepSpace::Scalar) => true,
            (RepSpace::Line(a), RepSpace::Line(b)) => Arc::ptr_eq(a, b) || **a == **b,
            _ => false,
        }
    }
}

impl RepSpace {
    pub fn dim(&self) -> usize {
        match self {
            RepSpace::Scalar => 1,
            RepSpace::Line(g) => g.len(),
        }
    }

    pub fn grid(&self) -> Option<&RepGrid> {
        match self {
            RepSpace::Scalar => None,
            RepSpace::Line(g) => Some(g),
        }
    }
}

/// The sampled unitary dual of a group grid, with Plancherel weights.
#[derive(Clone, Debug)]
pub struct Dual {
    backend: Backend,
    points: Vec<DualPoint>,
    weights: Vec<f64>,
    spaces: Vec<RepSpace>,
}

impl PartialEq for Dual {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.spaces == other.spaces
    }
}

impl Dual {
    pub fn for_grid(grid: &GroupGrid) -> Result<Self> {
        match grid.backend() {
            Backend::Cyclic => {
                let n = grid.cyclic_order().ok_or(Error::GridMismatch)?;
                Ok(Dual {
                    backend: Backend::Cyclic,
                    points: (0..n).map(|m| DualPoint::Character { m, n }).collect(),
                    weights: vec![1.0 / n as f64; n],
                    spaces: vec![RepSpace::Scalar; n],
                })
            }
            Backend::Affine => {
                let p = grid.rep_params().ok_or(Error::GridMismatch)?;
                let mut spaces = Vec::with_capacity(2);
                for sign in [Sign::Plus, Sign::Minus] {
                    let g = RepGrid::new(sign, p.s0, p.ratio, p.m_min, p.m_max)?;
                    spaces.push(RepSpace::Line(Arc::new(g)));
                }
                Ok(Dual {
                    backend: Backend::Affine,
                    points: vec![DualPoint::Affine(Sign::Plus), DualPoint::Affine(Sign::Minus)],
                    weights: vec![1.0, 1.0],
                    spaces,
                })
            }
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DualPoint] {
        &self.points
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn space(&self, i: usize) -> &RepSpace {
        &self.spaces[i]
    }

    fn check_point(&self, i: usize, x: &GroupPoint) -> Result<()> {
        if i >= self.len() {
            return Err(Error::ShapeMismatch(format!("dual index {i} out of {}", self.len())));
        }
        match (self.points[i], *x) {
            (DualPoint::Character { n, .. }, GroupPoint::Cyclic { n: m, .. }) if n == m => Ok(()),
            (DualPoint::Affine(_), GroupPoint::Affine { .. }) => Ok(()),
            _ => Err(Error::BackendMismatch(format!(
                "{x} is not in the group of {:?}",
                self.points[i]
            ))),
        }
    }

    /// Matrix of `π_ξ(x)` in the orthonormal basis of the rep space.
    pub fn rep_matrix(&self, i: usize, x: &GroupPoint) -> Result<RepOperator> {
        self.check_point(i, x)?;
        match (self.points[i], &self.spaces[i], *x) {
            (DualPoint::Character { m, n }, _, GroupPoint::Cyclic { k, .. }) => {
                let z = C64::from_polar(1.0, -TWO_PI * ((m * k) % n) as f64 / n as f64);
                Ok(RepOperator::scalar(z))
            }
            (DualPoint::Affine(_), RepSpace::Line(g), GroupPoint::Affine { b, a }) => {
                let k = g.shift_of(a)?;
                let n = g.len();
                let mut mat = DMatrix::zeros(n, n);
                for (row, &s) in g.nodes().iter().enumerate() {
                    let col = row as i64 + k as i64;
                    if col >= 0 && (col as usize) < n {
                        mat[(row, col as usize)] = C64::from_polar(1.0, TWO_PI * b * s);
                    }
                }
                Ok(RepOperator {
                    space: self.spaces[i].clone(),
                    matrix: mat,
                })
            }
            _ => unreachable!("checked above"),
        }
    }

    /// Apply `π_ξ(x)` to sampled values `φ(s_m)`.
    pub fn rep_apply(&self, i: usize, x: &GroupPoint, phi: &RepVector) -> Result<RepVector> {
        self.check_point(i, x)?;
        if phi.space != self.spaces[i] {
            return Err(Error::GridMismatch);
        }
        match (self.points[i], &self.spaces[i], *x) {
            (DualPoint::Character { m, n }, _, GroupPoint::Cyclic { k, .. }) => {
                let z = C64::from_polar(1.0, -TWO_PI * ((m * k) % n) as f64 / n as f64);
                Ok(RepVector {
                    space: RepSpace::Scalar,
                    values: vec![z * phi.values[0]],
                })
            }
            (DualPoint::Affine(_), RepSpace::Line(g), GroupPoint::Affine { b, a }) => {
                let k = g.shift_of(a)?;
                let amp = a.sqrt();
                let n = g.len() as i64;
                let values = g
                    .nodes()
                    .iter()
                    .enumerate()
                    .map(|(row, &s)| {
                        let src = row as i64 + k as i64;
                        if (0..n).contains(&src) {
                            C64::from_polar(amp, TWO_PI * b * s) * phi.values[src as usize]
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                Ok(RepVector {
                    space: phi.space.clone(),
                    values,
                })
            }
            _ => unreachable!("checked above"),
        }
    }

    /// `D_ξ^power`: diagonal `|s_m|^power` (identity on characters).
    pub fn duflo_moore(&self, i: usize, power: f64) -> RepOperator {
        match &self.spaces[i] {
            RepSpace::Scalar => RepOperator::scalar(C64::new(1.0, 0.0)),
            RepSpace::Line(g) => {
                let diag: Vec<C64> = g.nodes().iter().map(|s| C64::new(s.abs().powf(power), 0.0)).collect();
                RepOperator {
                    space: self.spaces[i].clone(),
                    matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)),
                }
            }
        }
    }

    /// Max-modulus entry of `π(x) D π(x)* − Δ(x)^{-1} D` over the interior
    /// block that stays at least `|k|` nodes away from both ends.
    pub fn semi_invariance_residual(&self, i: usize, x: &GroupPoint) -> Result<f64> {
        let p = self.rep_matrix(i, x)?;
        let d = self.duflo_moore(i, 1.0);
        let lhs = p.mul(&d)?.mul(&p.adjoint())?;
        let rhs = d.scale(C64::new(1.0 / modular(x).value(), 0.0));
        let margin = match (&self.spaces[i], *x) {
            (RepSpace::Line(g), GroupPoint::Affine { a, .. }) => g.shift_of(a)?.unsigned_abs() as usize,
            _ => 0,
        };
        let n = p.dim();
        let mut worst = 0.0f64;
        for r in margin..n.saturating_sub(margin) {
            for c in margin..n.saturating_sub(margin) {
                worst = worst.max((lhs.matrix[(r, c)] - rhs.matrix[(r, c)]).norm());
            }
        }
        Ok(worst)
    }
}

/// Sampled vector `φ(s_m)` of a representation space.
#[derive(Clone, Debug, PartialEq)]
pub struct RepVector {
    pub space: RepSpace,
    pub values: Vec<C64>,
}

impl RepVector {
    pub fn new(space: RepSpace, values: Vec<C64>) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for dimension {}",
                values.len(),
                space.dim()
            )));
        }
        Ok(RepVector { space, values })
    }

    /// `(Σ_m w_m |φ_m|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        match &self.space {
            RepSpace::Scalar => self.values[0].norm(),
            RepSpace::Line(g) => self
                .values
                .iter()
                .zip(g.weights())
                .map(|(v, w)| v.norm_sqr() * w)
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Operator on a representation space, stored in the orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct RepOperator {
    pub space: RepSpace,
    pub matrix: DMatrix<C64>,
}

impl RepOperator {
    pub fn scalar(z: C64) -> Self {
        RepOperator {
            space: RepSpace::Scalar,
            matrix: DMatrix::from_element(1, 1, z),
        }
    }

    pub fn zeros(space: &RepSpace) -> Self {
        let n = space.dim();
        RepOperator {
            space: space.clone(),
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(space: &RepSpace) -> Self {
        let n = space.dim();
        RepOperator {
            space: space.clone(),
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn from_matrix(space: &RepSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let n = space.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix on a {n}-dimensional space",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(RepOperator {
            space: space.clone(),
            matrix,
        })
    }

    /// Build from an integral kernel `K(s_m, s_n)` acting as `Σ_n K w_n φ_n`.
    pub fn from_kernel(space: &RepSpace, kernel: DMatrix<C64>) -> Result<Self> {
        let mut op = RepOperator::from_matrix(space, kernel)?;
        if let RepSpace::Line(g) = space {
            let w = g.weights();
            for c in 0..op.dim() {
                for r in 0..op.dim() {
                    op.matrix[(r, c)] *= (w[r] * w[c]).sqrt();
                }
            }
        }
        Ok(op)
    }

    /// Integral kernel `K(s_m, s_n)` with respect to the weights `|s| ln r`.
    pub fn kernel(&self) -> DMatrix<C64> {
        let mut k = self.matrix.clone();
        if let RepSpace::Line(g) = &self.space {
            let w = g.weights();
            for c in 0..self.dim() {
                for r in 0..self.dim() {
                    k[(r, c)] /= (w[r] * w[c]).sqrt();
                }
            }
        }
        k
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn same_space(&self, other: &RepOperator) -> Result<()> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn mul(&self, other: &RepOperator) -> Result<RepOperator> {
        self.same_space(other)?;
        Ok(RepOperator {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn add(&self, other: &RepOperator) -> Result<RepOperator> {
        self.same_space(other)?;
        Ok(RepOperator {
            space: self.space.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &RepOperator) -> Result<RepOperator> {
        self.same_space(other)?;
        Ok(RepOperator {
            space: self.space.clone(),
            matrix: &self.matrix - &other.matrix,
        })
    }

    pub fn scale(&self, z: C64) -> RepOperator {
        RepOperator {
            space: self.space.clone(),
            matrix: &self.matrix * z,
        }
    }

    pub fn adjoint(&self) -> RepOperator {
        RepOperator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hs_norm_sqr(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sqr().sqrt()
    }

    /// Write `row,col,re,im` for every entry of the stored matrix.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row", "col", "re", "im"])?;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let z = self.matrix[(r, c)];
                w.write_record(&[r.to_string(), c.to_string(), z.re.to_string(), z.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(space: &RepSpace, path: &Path) -> Result<RepOperator> {
        let n = space.dim();
        let mut mat = DMatrix::zeros(n, n);
        let mut rdr = csv::Reader::from_path(path)?;
        for rec in rdr.deserialize() {
            let (r, c, re, im): (usize, usize, f64, f64) = rec?;
            if r >= n || c >= n {
                return Err(Error::ShapeMismatch(format!("entry ({r}, {c}) outside {n}x{n}")));
            }
            mat[(r, c)] = C64::new(re, im);
        }
        Ok(RepOperator {
            space: space.clone(),
            matrix: mat,
        })
    }
}

/// `Tr(T S*)`.
pub fn hs_inner(t: &RepOperator, s: &RepOperator) -> Result<C64> {
    t.same_space(s)?;
    Ok(t.matrix.iter().zip(s.matrix.iter()).map(|(a, b)| a * b.conj()).sum())
}

/// A field `ξ ↦ F(ξ)` over the sampled dual.
#[derive(Clone, Debug)]
pub struct OperatorField {
    pub dual: Arc<Dual>,
    pub ops: Vec<RepOperator>,
}

impl OperatorField {
    pub fn new(dual: Arc<Dual>, ops: Vec<RepOperator>) -> Result<Self> {
        if ops.len() != dual.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} operators for {} dual points",
                ops.len(),
                dual.len()
            )));
        }
        for (i, op) in ops.iter().enumerate() {
            if op.space != *dual.space(i) {
                return Err(Error::GridMismatch);
            }
        }
        Ok(OperatorField { dual, ops })
    }

    pub fn zeros(dual: Arc<Dual>) -> Self {
        let ops = (0..dual.len()).map(|i| RepOperator::zeros(dual.space(i))).collect();
        OperatorField { dual, ops }
    }

    pub fn identity(dual: Arc<Dual>) -> Self {
        let ops = (0..dual.len()).map(|i| RepOperator::identity(dual.space(i))).collect();
        OperatorField { dual, ops }
    }

    fn zip_with(
        &self,
        other: &OperatorField,
        f: impl Fn(&RepOperator, &RepOperator) -> Result<RepOperator>,
    ) -> Result<Self> {
        if self.dual != other.dual {
            return Err(Error::GridMismatch);
        }
        let ops = self
            .ops
            .iter()
            .zip(&other.ops)
            .map(|(a, b)| f(a, b))
            .collect::<Result<_>>()?;
        Ok(OperatorField {
            dual: self.dual.clone(),
            ops,
        })
    }

    pub fn add(&self, other: &OperatorField) -> Result<Self> {
        self.zip_with(other, RepOperator::add)
    }

    pub fn sub(&self, other: &OperatorField) -> Result<Self> {
        self.zip_with(other, RepOperator::sub)
    }

    /// Pointwise product `F(ξ) G(ξ)`.
    pub fn mul(&self, other: &OperatorField) -> Result<Self> {
        self.zip_with(other, RepOperator::mul)
    }

    pub fn scale(&self, z: C64) -> Self {
        OperatorField {
            dual: self.dual.clone(),
            ops: self.ops.iter().map(|o| o.scale(z)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(usize, &RepOperator) -> RepOperator) -> Self {
        let ops = self.ops.iter().enumerate().map(|(i, o)| f(i, o)).collect();
        OperatorField {
            dual: self.dual.clone(),
            ops,
        }
    }

    /// `Σ_ξ ν(ξ) Tr(F(ξ) G(ξ)*)`.
    pub fn inner(&self, other: &OperatorField) -> Result<C64> {
        if self.dual != other.dual {
            return Err(Error::GridMismatch);
        }
        let mut acc = C64::new(0.0, 0.0);
        for (i, (a, b)) in self.ops.iter().zip(&other.ops).enumerate() {
            acc += hs_inner(a, b)? * self.dual.weight(i);
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.ops
            .iter()
            .enumerate()
            .map(|(i, o)| self.dual.weight(i) * o.hs_norm_sqr())
            .sum()
    }

    /// One CSV per dual point plus `manifest.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for (i, op) in self.ops.iter().enumerate() {
            let file = format!("{}.csv", self.dual.points()[i].label());
            op.write_csv(&dir.join(&file))?;
            entries.push(FieldManifestEntry {
                point: self.dual.points()[i],
                plancherel_weight: self.dual.weight(i),
                file,
                s_nodes: op.space.grid().map(|g| g.nodes().to_vec()),
                s_weights: op.space.grid().map(|g| g.weights().to_vec()),
            });
        }
        let manifest = FieldManifest {
            basis: "orthonormal: e_m = delta_m / sqrt(w_m)".into(),
            points: entries,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

/// `(Σ_ξ ν(ξ) ‖F(ξ)‖²_{HS})^{1/2}`.
pub fn hs_norm(field: &OperatorField) -> f64 {
    field.norm_sqr().sqrt()
}

#[derive(Serialize, Deserialize)]
struct FieldManifest {
    basis: String,
    points: Vec<FieldManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct FieldManifestEntry {
    point: DualPoint,
    plancherel_weight: f64,
    file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_nodes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_weights: Option<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_grid, inverse, multiply, GridConfig};

    fn affine_dual() -> Dual {
        Dual::for_grid(&build_grid(&GridConfig::affine_baseline()).unwrap()).unwrap()
    }

    fn aff(b: f64, a: f64) -> GroupPoint {
        GroupPoint::Affine { b, a }
    }

    #[test]
    fn dual_shapes() {
        let d = affine_dual();
        assert_eq!(d.len(), 2);
        assert_eq!(d.weights(), &[1.0, 1.0]);
        assert_eq!(d.space(0).dim(), 32);
        let c = Dual::for_grid(&build_grid(&GridConfig::cyclic(8)).unwrap()).unwrap();
        assert_eq!(c.len(), 8);
        assert!(c.weights().iter().all(|&w| w == 0.125));
    }

    #[test]
    fn identity_and_modulation() {
        let d = affine_dual();
        for i in 0..2 {
            let e = d.rep_matrix(i, &aff(0.0, 1.0)).unwrap();
            assert_eq!(e.matrix, DMatrix::identity(32, 32));
            let g = d.space(i).grid().unwrap().clone();
            let phi = RepVector::new(d.space(i).clone(), (0..32).map(|m| C64::new(m as f64, 1.0)).collect()).unwrap();
            let out = d.rep_apply(i, &aff(0.7, 1.0), &phi).unwrap();
            for m in 0..32 {
                let want = C64::from_polar(1.0, TWO_PI * 0.7 * g.nodes()[m]) * phi.values[m];
                assert!((out.values[m] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn interior_unitarity() {
        let d = affine_dual();
        let r = d.space(0).grid().unwrap().ratio;
        let mut vals: Vec<C64> = (0..32).map(|m| C64::new((m as f64).sin(), (m as f64).cos())).collect();
        vals[0] = C64::new(0.0, 0.0);
        vals[1] = C64::new(0.0, 0.0);
        let phi = RepVector::new(d.space(0).clone(), vals).unwrap();
        let out = d.rep_apply(0, &aff(1.3, r * r), &phi).unwrap();
        assert!((out.norm() - phi.norm()).abs() <= 1e-14 * phi.norm());
    }

    #[test]
    fn off_lattice_dilation_rejected() {
        let d = affine_dual();
        assert!(matches!(
            d.rep_matrix(0, &aff(0.0, 1.1)),
            Err(Error::OffLatticeDilation { .. })
        ));
    }

    #[test]
    fn shift_pattern_and_adjoint() {
        let d = affine_dual();
        let r = d.space(0).grid().unwrap().ratio;
        let x = aff(0.4, r.powi(3));
        let p = d.rep_matrix(0, &x).unwrap();
        for row in 0..32 {
            for col in 0..32 {
                let nz = p.matrix[(row, col)] != C64::new(0.0, 0.0);
                assert_eq!(nz, col == row + 3);
            }
        }
        let q = d.rep_matrix(0, &inverse(&x)).unwrap();
        let pa = p.adjoint();
        for row in 3..32 {
            for col in 0..32 {
                assert!((pa.matrix[(row, col)] - q.matrix[(row, col)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn homomorphism_on_interior() {
        let d = affine_dual();
        let r = d.space(1).grid().unwrap().ratio;
        let x = aff(0.3, r.powi(2));
        let y = aff(-1.1, r.powi(-1));
        let lhs = d.rep_matrix(1, &multiply(&x, &y).unwrap()).unwrap();
        let rhs = d.rep_matrix(1, &x).unwrap().mul(&d.rep_matrix(1, &y).unwrap()).unwrap();
        for row in 0..30 {
            for col in 0..32 {
                assert!((lhs.matrix[(row, col)] - rhs.matrix[(row, col)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn duflo_moore_powers() {
        let g = build_grid(&GridConfig::affine_baseline().with_rep_grid(1.0, 0, 4)).unwrap();
        let d = Dual::for_grid(&g).unwrap();
        assert_eq!(d.duflo_moore(0, 0.0).matrix, DMatrix::identity(4, 4));
        let grid = build_grid(&GridConfig::affine(0.5, 2.0, 8.0, -2, 2).with_rep_grid(1.0, 0, 4)).unwrap();
        let d2 = Dual::for_grid(&grid).unwrap();
        let half = d2.duflo_moore(0, 0.5);
        assert_eq!(half.matrix[(2, 2)], C64::new(2.0, 0.0));
        let full = d2.duflo_moore(0, 1.0);
        let sq = half.mul(&half).unwrap();
        for i in 0..4 {
            assert!((sq.matrix[(i, i)] - full.matrix[(i, i)]).norm() <= 1e-15 * full.matrix[(i, i)].norm());
        }
    }

    #[test]
    fn semi_invariance_examples() {
        let d = affine_dual();
        let r = d.space(0).grid().unwrap().ratio;
        assert_eq!(d.semi_invariance_residual(0, &aff(0.0, 1.0)).unwrap(), 0.0);
        assert!(d.semi_invariance_residual(0, &aff(0.0, r)).unwrap() <= 1e-12);
        let c = Dual::for_grid(&build_grid(&GridConfig::cyclic(8)).unwrap()).unwrap();
        for m in 0..8 {
            for k in 0..8 {
                assert_eq!(
                    c.semi_invariance_residual(m, &GroupPoint::Cyclic { k, n: 8 }).unwrap(),
                    0.0
                );
            }
        }
    }

    #[test]
    fn hs_inner_identity_counts_nodes() {
        let d = affine_dual();
        let id = RepOperator::identity(d.space(0));
        assert_eq!(hs_inner(&id, &id).unwrap(), C64::new(32.0, 0.0));
        let z = OperatorField::zeros(Arc::new(d));
        assert_eq!(hs_norm(&z), 0.0);
    }

    #[test]
    fn kernel_roundtrip() {
        let d = affine_dual();
        let m = DMatrix::from_fn(32, 32, |r, c| C64::new(r as f64 - c as f64, (r * c) as f64 * 0.01));
        let op = RepOperator::from_matrix(d.space(0), m.clone()).unwrap();
        let back = RepOperator::from_kernel(d.space(0), op.kernel()).unwrap();
        assert!((back.matrix - m).norm() < 1e-10);
    }
}
