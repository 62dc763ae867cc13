//! Operator-valued symbols and their quantizations.
//!
//! A symbol is a field `A(x, ξ)` over the group grid and the sampled dual.
//! `Op(A)` has kernel `(𝒫₂⁻¹A)(x, xy⁻¹) Δ(y)^{-1/2}`, where the inverse
//! Plancherel transform acts in the dual slot for each fixed `x`.
//!
//! Symbols are sparse in `x`: a node without a slice carries the zero field.
//! A slice is stored as a short linear combination of shared fields, so a
//! separable symbol `c(x) F(ξ)` costs one field however fine the grid is.
//!
//! Kernel rows are produced one node at a time.  Norms, traces and
//! applications to a function have row-wise versions that never hold the
//! whole kernel.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{inverse, modular, multiply, GridConfig, GroupGrid, GroupPoint};
use crate::lspace::{DenseOperator, SampledFunction};
use crate::plancherel::{band_coefficients, PlancherelPair};
use crate::repfield::{Dual, DualPoint, OperatorField, RepOperator};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Default acceptance threshold for the fit residual of [`inverse_op`].
pub const INVERSE_TOLERANCE: f64 = 1e-8;

/// Singular values below this fraction of the block maximum are dropped by
/// the affine solve.  Smaller cutoffs keep singular triplets that the SVD
/// resolves only to rounding accuracy, and the fit gets worse, not better.
pub const SINGULAR_CUTOFF: f64 = 1e-8;

#[derive(Clone, Debug)]
struct Slice {
    terms: Vec<(C64, Arc<OperatorField>)>,
}

impl Slice {
    fn single(field: OperatorField) -> Self {
        Slice {
            terms: vec![(C64::new(1.0, 0.0), Arc::new(field))],
        }
    }

    fn materialize(&self) -> OperatorField {
        let (c0, f0) = &self.terms[0];
        let mut out = f0.scale(*c0);
        for (c, f) in &self.terms[1..] {
            for (o, op) in out.ops.iter_mut().zip(&f.ops) {
                o.matrix += &op.matrix * *c;
            }
        }
        out
    }

    fn scaled(&self, z: C64) -> Self {
        Slice {
            terms: self.terms.iter().map(|(c, f)| (c * z, f.clone())).collect(),
        }
    }
}

/// A symbol `A(x, ξ)` on a group grid and its sampled dual.
#[derive(Clone, Debug)]
pub struct Symbol {
    pair: PlancherelPair,
    slices: Vec<Option<Slice>>,
}

impl Symbol {
    pub fn zeros(pair: PlancherelPair) -> Self {
        let n = pair.grid().len();
        Symbol {
            pair,
            slices: vec![None; n],
        }
    }

    pub fn from_fields(pair: PlancherelPair, fields: Vec<Option<OperatorField>>) -> Result<Self> {
        if fields.len() != pair.grid().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} slices for {} nodes",
                fields.len(),
                pair.grid().len()
            )));
        }
        let mut sym = Symbol::zeros(pair);
        for (i, f) in fields.into_iter().enumerate() {
            if let Some(f) = f {
                sym.set(i, f)?;
            }
        }
        Ok(sym)
    }

    pub fn from_fn(pair: PlancherelPair, f: impl Fn(usize, &GroupPoint) -> Option<OperatorField>) -> Result<Self> {
        let fields = pair.grid().nodes().iter().enumerate().map(|(i, x)| f(i, x)).collect();
        Symbol::from_fields(pair, fields)
    }

    /// `A(x, ξ) = c(x) F(ξ)`.
    pub fn separable(pair: PlancherelPair, coeffs: &[C64], field: OperatorField) -> Result<Self> {
        if coeffs.len() != pair.grid().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for {} nodes",
                coeffs.len(),
                pair.grid().len()
            )));
        }
        check_dual(&pair, &field)?;
        let field = Arc::new(field);
        let slices = coeffs
            .iter()
            .map(|c| {
                (*c != ZERO).then(|| Slice {
                    terms: vec![(*c, field.clone())],
                })
            })
            .collect();
        Ok(Symbol { pair, slices })
    }

    /// The same field at every node.
    pub fn constant(pair: PlancherelPair, field: OperatorField) -> Result<Self> {
        let n = pair.grid().len();
        Symbol::separable(pair, &vec![C64::new(1.0, 0.0); n], field)
    }

    /// `A(x, ξ) = 1`; on the cyclic backend `Op(A)` is the identity.
    pub fn identity(pair: PlancherelPair) -> Self {
        let field = OperatorField::identity(pair.dual().clone());
        Symbol::constant(pair, field).expect("dual of the pair")
    }

    pub fn pair(&self) -> &PlancherelPair {
        &self.pair
    }

    pub fn grid(&self) -> &Arc<GroupGrid> {
        self.pair.grid()
    }

    pub fn dual(&self) -> &Arc<Dual> {
        self.pair.dual()
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Nodes that carry a (possibly zero) field.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.slices
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|_| i))
    }

    pub fn set(&mut self, i: usize, field: OperatorField) -> Result<()> {
        check_dual(&self.pair, &field)?;
        self.slices[i] = Some(Slice::single(field));
        Ok(())
    }

    pub fn clear(&mut self, i: usize) {
        self.slices[i] = None;
    }

    pub(crate) fn set_terms(&mut self, i: usize, terms: Vec<(C64, Arc<OperatorField>)>) {
        self.slices[i] = if terms.is_empty() { None } else { Some(Slice { terms }) };
    }

    /// `A(x_i, ·)`, or `None` for the zero field.
    pub fn slice(&self, i: usize) -> Option<OperatorField> {
        self.slices[i].as_ref().map(Slice::materialize)
    }

    pub fn slice_or_zero(&self, i: usize) -> OperatorField {
        self.slice(i)
            .unwrap_or_else(|| OperatorField::zeros(self.dual().clone()))
    }

    fn check(&self, other: &Symbol) -> Result<()> {
        if self.grid().same_as(other.grid()) && self.dual() == other.dual() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `⟨A, B⟩ = Σ_x w(x) Σ_ξ ν(ξ) Tr(A(x,ξ) B(x,ξ)*)`.
    pub fn inner(&self, other: &Symbol) -> Result<C64> {
        self.check(other)?;
        let mut acc = ZERO;
        for i in 0..self.len() {
            if let (Some(a), Some(b)) = (self.slice(i), other.slice(i)) {
                acc += a.inner(&b)? * self.grid().weight(i);
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        (0..self.len())
            .filter_map(|i| self.slice(i).map(|f| f.norm_sqr() * self.grid().weight(i)))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn combine(&self, other: &Symbol, sign: f64) -> Result<Symbol> {
        self.check(other)?;
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| match (a, b) {
                (None, None) => None,
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.scaled(C64::new(sign, 0.0))),
                (Some(a), Some(b)) => {
                    let mut terms = a.terms.clone();
                    terms.extend(b.scaled(C64::new(sign, 0.0)).terms);
                    Some(Slice { terms })
                }
            })
            .collect();
        Ok(Symbol {
            pair: self.pair.clone(),
            slices,
        })
    }

    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Symbol) -> Result<Symbol> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, z: C64) -> Symbol {
        let slices = self.slices.iter().map(|s| s.as_ref().map(|s| s.scaled(z))).collect();
        Symbol {
            pair: self.pair.clone(),
            slices,
        }
    }

    /// `‖A − B‖ / ‖B‖`.
    pub fn relative_distance(&self, reference: &Symbol) -> Result<f64> {
        Ok(self.sub(reference)?.norm() / reference.norm())
    }

    /// Apply `F ↦ h(x_i, F)` to every stored slice.
    pub fn map_slices(&self, h: impl Fn(usize, &OperatorField) -> Result<OperatorField>) -> Result<Symbol> {
        let mut out = Symbol::zeros(self.pair.clone());
        for i in self.support().collect::<Vec<_>>() {
            out.set(i, h(i, &self.slice(i).expect("in support"))?)?;
        }
        Ok(out)
    }

    /// Directory layout: `manifest.json` plus `x{node}_{point}.csv` per stored slice.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let labels: Vec<String> = self.dual().points().iter().map(DualPoint::label).collect();
        let mut nodes = Vec::new();
        for i in self.support().collect::<Vec<_>>() {
            let f = self.slice(i).expect("in support");
            let mut files = Vec::with_capacity(labels.len());
            for (op, label) in f.ops.iter().zip(&labels) {
                let file = format!("x{i}_{label}.csv");
                op.write_csv(&dir.join(&file))?;
                files.push(file);
            }
            nodes.push(SymbolNode {
                index: i,
                point: self.grid().node(i),
                files,
            });
        }
        let manifest = SymbolManifest {
            grid: self.grid().config().clone(),
            dual_points: self.dual().points().to_vec(),
            plancherel_weights: self.dual().weights().to_vec(),
            basis: "orthonormal: e_m = delta_m / sqrt(w_m)".into(),
            nodes,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn read_dir(pair: PlancherelPair, dir: &Path) -> Result<Symbol> {
        let manifest: SymbolManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.grid != *pair.grid().config() || manifest.dual_points != pair.dual().points() {
            return Err(Error::GridMismatch);
        }
        let mut sym = Symbol::zeros(pair.clone());
        for node in manifest.nodes {
            if node.index >= sym.len() || node.files.len() != pair.dual().len() {
                return Err(Error::ShapeMismatch(format!(
                    "bad manifest entry for node {}",
                    node.index
                )));
            }
            let ops = node
                .files
                .iter()
                .enumerate()
                .map(|(k, f)| RepOperator::read_csv(pair.dual().space(k), &dir.join(f)))
                .collect::<Result<Vec<_>>>()?;
            sym.set(node.index, OperatorField::new(pair.dual().clone(), ops)?)?;
        }
        Ok(sym)
    }
}

#[derive(Serialize, Deserialize)]
struct SymbolManifest {
    grid: GridConfig,
    dual_points: Vec<DualPoint>,
    plancherel_weights: Vec<f64>,
    basis: String,
    nodes: Vec<SymbolNode>,
}

#[derive(Serialize, Deserialize)]
struct SymbolNode {
    index: usize,
    point: GroupPoint,
    files: Vec<String>,
}

fn check_dual(pair: &PlancherelPair, field: &OperatorField) -> Result<()> {
    if *field.dual == **pair.dual() {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn modular_powers(grid: &GroupGrid, p: f64) -> Vec<f64> {
    (0..grid.len()).map(|i| grid.modular_at(i).powf(p)).collect()
}

/// Row `y ↦ ker_A(x_i, y) = (𝒫₂⁻¹A)(x_i, x_i y⁻¹) Δ(y)^{-1/2}`.
pub fn op_left_row(a: &Symbol, xi: usize) -> Vec<C64> {
    let n = a.grid().len();
    match a.slice(xi) {
        None => vec![ZERO; n],
        Some(f) => {
            let mut row = a.pair.left_pullback_row(&f, xi);
            for (v, d) in row.iter_mut().zip(modular_powers(a.grid(), -0.5)) {
                *v *= d;
            }
            row
        }
    }
}

/// Row `y ↦ (𝒫₂⁻¹A)(x_i, y⁻¹x_i) Δ(x_i y⁻¹)^{1/2}`.
pub fn op_right_row(a: &Symbol, xi: usize) -> Vec<C64> {
    let n = a.grid().len();
    match a.slice(xi) {
        None => vec![ZERO; n],
        Some(f) => {
            let mut row = a.pair.right_pullback_row(&f, xi);
            let dx = a.grid().modular_at(xi).sqrt();
            for (v, d) in row.iter_mut().zip(modular_powers(a.grid(), -0.5)) {
                *v *= dx * d;
            }
            row
        }
    }
}

fn dense_from_rows(grid: &Arc<GroupGrid>, row: impl Fn(usize) -> Vec<C64>) -> DenseOperator {
    let n = grid.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in row(i).into_iter().enumerate() {
            if v != ZERO {
                k[(i, j)] = v;
            }
        }
    }
    DenseOperator::from_kernel(grid.clone(), k).expect("square kernel")
}

/// `Op(A) = Op_L(A)`.
pub fn op_left(a: &Symbol) -> DenseOperator {
    let grid = a.grid().clone();
    dense_from_rows(&grid, |i| op_left_row(a, i))
}

/// `Op_R(A)`.
pub fn op_right(a: &Symbol) -> DenseOperator {
    let grid = a.grid().clone();
    dense_from_rows(&grid, |i| op_right_row(a, i))
}

/// `‖Op(A)‖²_HS`, accumulated one kernel row at a time.
pub fn op_left_hs_norm_sqr(a: &Symbol) -> f64 {
    let w = a.grid().weights();
    a.support()
        .map(|i| {
            let row = op_left_row(a, i);
            w[i] * row.iter().zip(w).map(|(v, wy)| v.norm_sqr() * wy).sum::<f64>()
        })
        .sum()
}

/// `|‖Op(A)‖_HS − ‖A‖| / ‖A‖`.
pub fn isometry_residual(a: &Symbol) -> f64 {
    let lhs = op_left_hs_norm_sqr(a).sqrt();
    let rhs = a.norm();
    (lhs - rhs).abs() / rhs
}

/// `Tr Op(A) = Σ_x w(x) (𝒫₂⁻¹A)(x, e) Δ(x)^{-1/2}`.
pub fn op_left_trace(a: &Symbol) -> C64 {
    let e = a.grid().identity();
    a.support()
        .map(|i| {
            let f = a.slice(i).expect("in support");
            a.pair.eval_inverse(&f, &e) * (a.grid().weight(i) / a.grid().modular_at(i).sqrt())
        })
        .sum()
}

/// `Op(A)u` without forming the kernel.
///
/// On the affine grid the sum over `y` is split into the partial transforms
/// `U_±(n, j) = Σ_b e^{±2πi b s_n} w Δ^{-1/2} u(b, r^j)`, after which each
/// output node costs one pass over the symbol's bands.
pub fn op_left_apply(a: &Symbol, u: &SampledFunction) -> Result<SampledFunction> {
    let grid = a.grid().clone();
    if !grid.same_as(u.grid()) {
        return Err(Error::GridMismatch);
    }
    let n = grid.len();
    let mut out = vec![ZERO; n];
    let Some(t) = a.pair.tables() else {
        let w = grid.weights();
        for i in a.support().collect::<Vec<_>>() {
            let row = op_left_row(a, i);
            out[i] = row.iter().zip(u.values()).zip(w).map(|((k, v), wy)| k * v * *wy).sum();
        }
        return SampledFunction::new(grid, out);
    };
    let lat = &t.lat;
    let ns = t.n_s;
    let na = lat.n_a();
    let mut up = vec![ZERO; na * ns];
    let mut um = vec![ZERO; na * ns];
    for (jl, j) in (lat.j_min..lat.j_max).enumerate() {
        let scale = lat.weight(j) * lat.a(j).sqrt();
        for ib in 0..lat.n_b {
            let v = u.values()[lat.index(ib, j)] * scale;
            if v == ZERO {
                continue;
            }
            for rho in 0..ns {
                let e = t.e(ib, t.m_min + rho as i32);
                up[jl * ns + rho] += v * e;
                um[jl * ns + rho] += v * e.conj();
            }
        }
    }
    for i in a.support().collect::<Vec<_>>() {
        let f = a.slice(i).expect("in support");
        let (ibx, jx) = lat.split(i);
        let mut acc = ZERO;
        for (jl, jy) in (lat.j_min..lat.j_max).enumerate() {
            let k = jx - jy;
            for (m, cp, cm) in band_coefficients(t, &f, k) {
                let e = t.e(ibx, m);
                let col = jl * ns + (m + k - t.m_min) as usize;
                acc += cp * e.conj() * up[col] + cm * e * um[col];
            }
        }
        out[i] = acc;
    }
    SampledFunction::new(grid, out)
}

/// `Ã(x, ξ) = π_ξ(x)* A(x, ξ) π_ξ(x)`, so that `Op_L(A) = Op_R(Ã)`.
pub fn tilde_symbol(a: &Symbol) -> Result<Symbol> {
    let dual = a.dual().clone();
    let grid = a.grid().clone();
    a.map_slices(|i, f| {
        let x = grid.node(i);
        let ops = f
            .ops
            .iter()
            .enumerate()
            .map(|(k, op)| {
                let p = dual.rep_matrix(k, &x)?;
                p.adjoint().mul(op)?.mul(&p)
            })
            .collect::<Result<Vec<_>>>()?;
        OperatorField::new(dual.clone(), ops)
    })
}

/// Wigner transform `𝒱_{u,v}(x, ·) = v(x) 𝒫(h_x)` with
/// `h_x(y) = Δ(y⁻¹x)^{1/2} conj(u(y⁻¹x))`; `Op(𝒱_{u,v}) w = ⟨w, u⟩ v`.
pub fn wigner(u: &SampledFunction, v: &SampledFunction, pair: &PlancherelPair) -> Result<Symbol> {
    let grid = pair.grid().clone();
    if !grid.same_as(u.grid()) || !grid.same_as(v.grid()) {
        return Err(Error::GridMismatch);
    }
    let nodes = grid.nodes().to_vec();
    let inv: Vec<GroupPoint> = nodes.iter().map(inverse).collect();
    let mut sym = Symbol::zeros(pair.clone());
    for (i, x) in nodes.iter().enumerate() {
        let vx = v.values()[i];
        if vx == ZERO {
            continue;
        }
        let dx = grid.modular_at(i);
        let h: Vec<C64> = inv
            .iter()
            .enumerate()
            .map(|(j, yinv)| {
                let z = multiply(yinv, x).expect("same backend");
                u.eval(&z).conj() * (dx / grid.modular_at(j)).sqrt()
            })
            .collect();
        let field = pair.plancherel_fwd(&SampledFunction::new(grid.clone(), h)?)?;
        sym.set(i, field.scale(vx))?;
    }
    Ok(sym)
}

/// Conditioning and fit of the discrete inverse of `Op`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InverseReport {
    /// `‖Op(A) − T‖_HS / ‖T‖_HS` for the returned symbol `A`.
    pub residual: f64,
    pub tolerance: f64,
    pub min_singular: f64,
    pub max_singular: f64,
    /// Blocks whose numerical rank is below their smaller dimension.
    pub deficient_blocks: usize,
    pub blocks: usize,
}

/// Symbol `A` with `Op(A) = T`; see [`inverse_op_report`].
pub fn inverse_op(t: &DenseOperator, pair: &PlancherelPair) -> Result<Symbol> {
    inverse_op_report(t, pair, INVERSE_TOLERANCE).map(|(s, _)| s)
}

/// Invert `A ↦ Op(A)`.
///
/// On the cyclic backend the inverse is exact: `A(x, ·)` is the Fourier
/// transform of `z ↦ K(x, z⁻¹x)`.
///
/// On the affine backend the forward map is block diagonal.  For a fixed
/// node `(b_x, r^{j_x})` and band `k = j_x − j_y` the kernel row over the
/// `b_y` nodes depends linearly on the entries `A_±(x)[m, m+k]` through a
/// matrix that depends only on `(b_x, k)`.  Each block is solved in the
/// minimum-norm least-squares sense through its SVD, truncated at
/// [`SINGULAR_CUTOFF`].  When the kernel is not
/// reproduced to `tolerance` the call fails with the conditioning report.
pub fn inverse_op_report(t: &DenseOperator, pair: &PlancherelPair, tolerance: f64) -> Result<(Symbol, InverseReport)> {
    let grid = pair.grid().clone();
    if !grid.same_as(t.grid()) {
        return Err(Error::GridMismatch);
    }
    let dual = pair.dual().clone();
    let n = grid.len();
    let kern = t.kernel();
    let Some(tab) = pair.tables() else {
        let mut sym = Symbol::zeros(pair.clone());
        let order = grid.cyclic_order().ok_or(Error::GridMismatch)?;
        for xi in 0..n {
            let g: Vec<C64> = (0..n).map(|z| kern[(xi, (xi + order - z) % order)]).collect();
            sym.set(xi, pair.fourier(&SampledFunction::new(grid.clone(), g)?)?)?;
        }
        let residual = op_left(&sym).relative_distance(t)?;
        let report = InverseReport {
            residual,
            tolerance,
            min_singular: 1.0,
            max_singular: 1.0,
            deficient_blocks: 0,
            blocks: n,
        };
        return finish(sym, report);
    };
    let lat = &tab.lat;
    let ns = tab.n_s;
    let w = grid.weights();
    let mut mats: Vec<[DMatrix<C64>; 2]> = (0..n)
        .map(|_| [DMatrix::zeros(ns, ns), DMatrix::zeros(ns, ns)])
        .collect();
    let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
    let (mut deficient, mut blocks) = (0usize, 0usize);
    let mut err_sqr = 0.0;
    let tnorm_sqr = t.hs_norm_sqr();
    for ibx in 0..lat.n_b {
        for k in (lat.j_min - lat.j_max + 1)..(lat.j_max - lat.j_min) {
            let rows: Vec<usize> = tab.band(k).collect();
            let nr = rows.len();
            let targets: Vec<i32> = (lat.j_min..lat.j_max)
                .filter(|jx| lat.contains_exponent(jx - k))
                .collect();
            if nr == 0 || targets.is_empty() {
                continue;
            }
            blocks += 1;
            // Columns: (+, ρ) then (−, ρ); entry d_{ρ+k} ν e^{∓2πi b_x s_m} e^{±2πi b_y s_{m+k}}.
            let mmat = DMatrix::from_fn(lat.n_b, 2 * nr, |iby, c| {
                let rho = rows[c % nr];
                let m = tab.m_min + rho as i32;
                let d = tab.d_half[(rho as i32 + k) as usize];
                let z = tab.e(ibx, m).conj() * tab.e(iby, m + k);
                let sign = c / nr;
                (if sign == 0 { z } else { z.conj() }) * (d * dual.weight(sign))
            });
            let svd = mmat.clone().svd(true, true);
            let sv = &svd.singular_values;
            let top = sv.max();
            let cut = SINGULAR_CUTOFF * top;
            smax = smax.max(top);
            smin = smin.min(sv.iter().copied().filter(|s| *s > cut).fold(f64::INFINITY, f64::min));
            if sv.iter().filter(|s| **s > cut).count() < lat.n_b.min(2 * nr) {
                deficient += 1;
            }
            let pinv = svd
                .pseudo_inverse(cut)
                .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
            for jx in targets {
                let jy = jx - k;
                let xi = lat.index(ibx, jx);
                let ay_half = lat.a(jy).sqrt();
                let rhs = DVector::from_fn(lat.n_b, |iby, _| kern[(xi, lat.index(iby, jy))] / ay_half);
                if rhs.iter().all(|z| *z == ZERO) {
                    continue;
                }
                let sol = &pinv * &rhs;
                let fit = &mmat * &sol - &rhs;
                let wy = lat.weight(jy);
                err_sqr += w[xi] * wy * fit.norm_squared() * ay_half * ay_half;
                for (c, z) in sol.iter().enumerate() {
                    let rho = rows[c % nr];
                    mats[xi][c / nr][(rho, (rho as i32 + k) as usize)] = *z;
                }
            }
        }
    }
    let mut sym = Symbol::zeros(pair.clone());
    for (xi, [p, m]) in mats.into_iter().enumerate() {
        if p.iter().all(|z| *z == ZERO) && m.iter().all(|z| *z == ZERO) {
            continue;
        }
        let ops = vec![
            RepOperator::from_matrix(dual.space(0), p)?,
            RepOperator::from_matrix(dual.space(1), m)?,
        ];
        sym.set(xi, OperatorField::new(dual.clone(), ops)?)?;
    }
    let residual = if tnorm_sqr == 0.0 {
        err_sqr.sqrt()
    } else {
        (err_sqr / tnorm_sqr).sqrt()
    };
    let report = InverseReport {
        residual,
        tolerance,
        min_singular: if smin.is_finite() { smin } else { 0.0 },
        max_singular: smax,
        deficient_blocks: deficient,
        blocks,
    };
    finish(sym, report)
}

fn finish(sym: Symbol, report: InverseReport) -> Result<(Symbol, InverseReport)> {
    if report.residual <= report.tolerance {
        Ok((sym, report))
    } else {
        Err(Error::Solver {
            residual: report.residual,
            tolerance: report.tolerance,
            min_singular: report.min_singular,
            max_singular: report.max_singular,
            deficient_blocks: report.deficient_blocks,
        })
    }
}

/// `A # B` with `Op(A # B) = Op(A) Op(B)`.
pub fn moyal_product(a: &Symbol, b: &Symbol) -> Result<Symbol> {
    a.check(b)?;
    inverse_op(&op_left(a).compose(&op_left(b))?, a.pair())
}

/// `A^#` with `Op(A^#) = Op(A)*`.
pub fn moyal_involution(a: &Symbol) -> Result<Symbol> {
    inverse_op(&op_left(a).adjoint(), a.pair())
}

/// Points used by the `b`-interpolation of translated data.
const TRANSLATION_STENCIL: usize = 6;

/// Sparse rows of `λ_y`, `(λ_y u)(x) = u(y⁻¹x)`.  The dilation of `y` must be
/// a lattice power, so `y⁻¹x` lies on a row of nodes; along that row the
/// value is a Lagrange interpolant through the nearest
/// [`TRANSLATION_STENCIL`] nodes.  Points outside the `b`-range get an empty
/// row.
fn translation_stencils(grid: &GroupGrid, y: &GroupPoint) -> Result<Vec<Vec<(usize, f64)>>> {
    let yinv = inverse(y);
    let Some(lat) = grid.affine() else {
        return grid
            .nodes()
            .iter()
            .map(|x| Ok(grid.stencil(&multiply(&yinv, x)?)))
            .collect();
    };
    let p = TRANSLATION_STENCIL.min(lat.n_b);
    grid.nodes()
        .iter()
        .map(|x| {
            let Some((b, a)) = multiply(&yinv, x)?.affine_coords() else {
                return Ok(Vec::new());
            };
            let Some(j) = lat.exponent_of(a).filter(|j| lat.contains_exponent(*j)) else {
                return Ok(Vec::new());
            };
            let t = lat.b_position(b);
            if t < 0.0 || t > (lat.n_b - 1) as f64 {
                return Ok(Vec::new());
            }
            if (t - t.round()).abs() < 1e-12 {
                return Ok(vec![(lat.index(t.round() as usize, j), 1.0)]);
            }
            let first = (t.floor() as i64 - (p as i64 / 2 - 1)).clamp(0, (lat.n_b - p) as i64) as usize;
            Ok((first..first + p)
                .map(|m| {
                    let w = (first..first + p)
                        .filter(|&q| q != m)
                        .map(|q| (t - q as f64) / (m as f64 - q as f64))
                        .product::<f64>();
                    (lat.index(m, j), w)
                })
                .collect())
        })
        .collect()
}

fn check_lattice_dilation(grid: &GroupGrid, y: &GroupPoint) -> Result<()> {
    if let (Some(lat), Some((_, a))) = (grid.affine(), y.affine_coords()) {
        if lat.exponent_of(a).is_none() {
            return Err(Error::OffLatticeDilation { a, ratio: lat.a(1) });
        }
    }
    Ok(())
}

/// The left translation `λ_y` as an integral operator.
pub fn left_translation(grid: &Arc<GroupGrid>, y: &GroupPoint) -> Result<DenseOperator> {
    check_lattice_dilation(grid, y)?;
    let n = grid.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, st) in translation_stencils(grid, y)?.into_iter().enumerate() {
        for (j, c) in st {
            m[(i, j)] = C64::new(c, 0.0);
        }
    }
    DenseOperator::from_matrix(grid.clone(), m)
}

/// `λ_y T λ_y*`, using the sparsity of `λ_y`: the kernel is `L K Lᴴ` where
/// `L` is the nodal matrix of `λ_y`.
pub fn conjugate_by_translation(t: &DenseOperator, y: &GroupPoint) -> Result<DenseOperator> {
    let grid = t.grid().clone();
    check_lattice_dilation(&grid, y)?;
    let st = translation_stencils(&grid, y)?;
    let n = grid.len();
    let k = t.kernel();
    let mut half = DMatrix::<C64>::zeros(n, n);
    for (i, row) in st.iter().enumerate() {
        for &(p, c) in row {
            for col in 0..n {
                half[(i, col)] += k[(p, col)] * c;
            }
        }
    }
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (j, row) in st.iter().enumerate() {
        for &(q, c) in row {
            for r in 0..n {
                out[(r, j)] += half[(r, q)] * c;
            }
        }
    }
    DenseOperator::from_kernel(grid, out)
}

/// `(y.A)(x, ξ) = π_ξ(y) A(y⁻¹x, ξ) π_ξ(y)*`, with `A(y⁻¹x)` interpolated
/// from the grid as in `λ_y` (exact in the dilation, zero outside).
pub fn translate_symbol(y: &GroupPoint, a: &Symbol) -> Result<Symbol> {
    let grid = a.grid().clone();
    check_lattice_dilation(&grid, y)?;
    let dual = a.dual().clone();
    let reps = (0..dual.len())
        .map(|k| dual.rep_matrix(k, y))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Symbol::zeros(a.pair.clone());
    for (i, st) in translation_stencils(&grid, y)?.into_iter().enumerate() {
        let mut terms = Vec::new();
        for (j, c) in st {
            if let Some(s) = &a.slices[j] {
                terms.extend(s.scaled(C64::new(c, 0.0)).terms);
            }
        }
        if terms.is_empty() {
            continue;
        }
        let f = Slice { terms }.materialize();
        let ops = f
            .ops
            .iter()
            .zip(&reps)
            .map(|(op, p)| p.mul(op)?.mul(&p.adjoint()))
            .collect::<Result<Vec<_>>>()?;
        out.set(i, OperatorField::new(dual.clone(), ops)?)?;
    }
    Ok(out)
}

/// `‖Op(y.A) − λ_y Op(A) λ_y*‖_HS / ‖λ_y Op(A) λ_y*‖_HS`, one kernel row at a time.
pub fn covariance_residual(y: &GroupPoint, a: &Symbol) -> Result<f64> {
    let ya = translate_symbol(y, a)?;
    let grid = a.grid().clone();
    let st = translation_stencils(&grid, y)?;
    let w = grid.weights();
    let n = grid.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (xi, row_st) in st.iter().enumerate() {
        let mut rhs = vec![ZERO; n];
        for &(p, c) in row_st {
            if a.slices[p].is_none() {
                continue;
            }
            let row = op_left_row(a, p);
            for (v, col_st) in rhs.iter_mut().zip(&st) {
                *v += col_st.iter().map(|&(q, d)| row[q] * d).sum::<C64>() * c;
            }
        }
        let lhs = op_left_row(&ya, xi);
        for ((l, r), wy) in lhs.iter().zip(&rhs).zip(w) {
            num += w[xi] * wy * (l - r).norm_sqr();
            den += w[xi] * wy * r.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

/// `A(x, ξ) = (Δ^{-1/2} f)(x) 𝒫(Δ^{1/2} g)(ξ)`, so that `Op(A)u = f·(g∗u)`.
pub fn mult_conv_symbol(f: &SampledFunction, g: &SampledFunction, pair: &PlancherelPair) -> Result<Symbol> {
    let grid = pair.grid();
    if !grid.same_as(f.grid()) || !grid.same_as(g.grid()) {
        return Err(Error::GridMismatch);
    }
    let field = pair.plancherel_fwd(&g.modular_scaled(0.5))?;
    let coeffs: Vec<C64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v / grid.modular_at(i).sqrt())
        .collect();
    Symbol::separable(pair.clone(), &coeffs, field)
}

/// A function `F(z, x)` on `G × G`, stored as one row `x ↦ F(z, x)` per node `z`.
#[derive(Clone, Debug)]
pub struct CrossedKernel {
    grid: Arc<GroupGrid>,
    rows: Vec<SampledFunction>,
}

impl CrossedKernel {
    pub fn from_rows(grid: Arc<GroupGrid>, rows: Vec<SampledFunction>) -> Result<Self> {
        if rows.len() != grid.len() || rows.iter().any(|r| !r.grid().same_as(&grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(CrossedKernel { grid, rows })
    }

    /// Nodal values `F(z_i, x_j)`.
    pub fn from_fn(grid: Arc<GroupGrid>, f: impl Fn(&GroupPoint, &GroupPoint) -> C64) -> Self {
        let rows = grid
            .nodes()
            .iter()
            .map(|z| {
                let v = grid.nodes().iter().map(|x| f(z, x)).collect();
                SampledFunction::new(grid.clone(), v).expect("length matches")
            })
            .collect();
        CrossedKernel { grid, rows }
    }

    /// `F(z, ·) = (𝒫⁻¹A)(z, ·)`, each row evaluated by the trace formula.
    pub fn from_symbol(a: &Symbol) -> Result<Self> {
        let grid = a.grid().clone();
        let rows = (0..grid.len())
            .map(|i| match a.slice(i) {
                Some(f) => a.pair().plancherel_inv(&f),
                None => Ok(SampledFunction::zeros(grid.clone())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CrossedKernel { grid, rows })
    }

    pub fn grid(&self) -> &Arc<GroupGrid> {
        &self.grid
    }

    pub fn row(&self, zi: usize) -> &SampledFunction {
        &self.rows[zi]
    }

    pub fn value(&self, zi: usize, xi: usize) -> C64 {
        self.rows[zi].values()[xi]
    }

    /// `F(z, x)` at arbitrary points: rows are interpolated in `z`, each row
    /// is evaluated at `x` by its own rule.
    pub fn eval(&self, z: &GroupPoint, x: &GroupPoint) -> C64 {
        self.grid
            .stencil(z)
            .into_iter()
            .map(|(i, c)| self.rows[i].eval(x) * c)
            .sum()
    }

    fn check(&self, other: &CrossedKernel) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `(F ⋆ G)(z, x) = Σ_y w(y) F(z, y) G(y⁻¹z, y⁻¹x)` on the nodes.
    pub fn star(&self, other: &CrossedKernel) -> Result<CrossedKernel> {
        self.check(other)?;
        let nodes = self.grid.nodes();
        let inv: Vec<GroupPoint> = nodes.iter().map(inverse).collect();
        let w = self.grid.weights();
        let mut rows = Vec::with_capacity(nodes.len());
        for (zi, z) in nodes.iter().enumerate() {
            let shifted: Vec<GroupPoint> = inv.iter().map(|yi| multiply(yi, z)).collect::<Result<_>>()?;
            let vals = nodes
                .iter()
                .map(|x| {
                    let mut acc = ZERO;
                    for (yi, yinv) in inv.iter().enumerate() {
                        let f = self.value(zi, yi);
                        if f == ZERO {
                            continue;
                        }
                        let yx = multiply(yinv, x).expect("same backend");
                        acc += f * other.eval(&shifted[yi], &yx) * w[yi];
                    }
                    acc
                })
                .collect();
            rows.push(SampledFunction::new(self.grid.clone(), vals)?);
        }
        Ok(CrossedKernel {
            grid: self.grid.clone(),
            rows,
        })
    }

    /// `F^⋆(z, x) = Δ(x)^{-1} conj(F(x⁻¹z, x⁻¹))`.
    pub fn involution(&self) -> CrossedKernel {
        CrossedKernel::from_fn(self.grid.clone(), |z, x| {
            let xinv = inverse(x);
            let p = multiply(&xinv, z).expect("same backend");
            self.eval(&p, &xinv).conj() / modular(x).value()
        })
    }
}

/// Schrödinger representation: kernel `L_F(x, y) = F(x, xy⁻¹) Δ(y)^{-1}`.
pub fn schrodinger(f: &CrossedKernel) -> DenseOperator {
    let grid = f.grid.clone();
    let nodes = grid.nodes().to_vec();
    let inv: Vec<GroupPoint> = nodes.iter().map(inverse).collect();
    DenseOperator::from_fn(grid.clone(), |r, c| {
        let z = multiply(&nodes[r], &inv[c]).expect("same backend");
        f.rows[r].eval(&z) / grid.modular_at(c)
    })
}

/// `𝔒𝔭(A) = Sch(𝒫₂⁻¹A)`.
pub fn frak_op(a: &Symbol) -> Result<DenseOperator> {
    Ok(schrodinger(&CrossedKernel::from_symbol(a)?))
}

/// `Op(A) ∘ Mult_{Δ^{-1/2}}`, the second construction of `𝔒𝔭(A)`.
pub fn frak_op_via_op_left(a: &Symbol) -> DenseOperator {
    let d: Vec<C64> = modular_powers(a.grid(), -0.5)
        .into_iter()
        .map(|v| C64::new(v, 0.0))
        .collect();
    op_left(a).right_scaled(&d)
}
