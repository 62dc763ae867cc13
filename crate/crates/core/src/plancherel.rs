//! Operator-valued Fourier transform, Plancherel transform and inversion.
//!
//! With `π_ξ(f) = ∫ f(y) π_ξ(y) dy` the Fourier transform, the Plancherel
//! transform is `𝒫f(ξ) = π_ξ(f) D_ξ^{1/2}` and its inverse is the trace formula
//! `f(x) = Σ_ξ ν(ξ) Tr(F(ξ) D_ξ^{1/2} π_ξ(x)*)`.
//!
//! On the affine grid `π(b, r^k)` has the single nonzero band `[m, m+k]` with
//! entries `e^{2πi b s_m}`, so every transform reduces to sums over phase
//! tables `e^{2πi b_i s_n}` that are built once per grid.  The trace formula
//! is evaluated literally, including at points that are not grid nodes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{AffineLattice, Backend, GridConfig, GroupGrid, GroupPoint};
use crate::lspace::{convolve, involution_p, Evaluator, SampledFunction};
use crate::repfield::{hs_norm, Dual, OperatorField, RepOperator};
use crate::C64;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One JSON diagnostic line.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticRecord {
    pub test: String,
    pub backend: Backend,
    pub grid: GridConfig,
    pub residual: f64,
    pub refinement_level: usize,
}

/// Outcome of comparing the trace-formula inverse against a least-squares
/// inverse of the materialised forward map.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LeastSquaresDiagnostic {
    /// `‖f_lsq − f_trace‖ / ‖f_trace‖`.
    pub relative_difference: f64,
    /// `‖𝒫 f_lsq − F‖ / ‖F‖`.
    pub fit_residual: f64,
    pub min_singular: f64,
    pub max_singular: f64,
}

#[derive(Debug)]
pub(crate) struct AffineTables {
    pub lat: AffineLattice,
    pub n_s: usize,
    pub m_min: i32,
    /// `|s_m|^{1/2}` on the rep grid.
    pub d_half: Vec<f64>,
    /// Positive-sign node values `s0 r^n` for `n ∈ [n_lo, n_lo + n_ext)`.
    pub s_ext: Vec<f64>,
    pub n_lo: i32,
    pub n_ext: usize,
    /// `e^{2πi b_i s0 r^n}`, row `i`, column `n − n_lo`.
    pub phase: Vec<C64>,
}

impl AffineTables {
    fn new(grid: &GroupGrid, dual: &Dual) -> Result<Self> {
        let lat = grid.affine().ok_or(Error::GridMismatch)?.clone();
        let rg = dual.space(0).grid().ok_or(Error::GridMismatch)?;
        let n_s = rg.len();
        let n_lo = rg.m_min - lat.j_max;
        let n_hi = rg.m_max - lat.j_min;
        let n_ext = (n_hi - n_lo) as usize;
        let s_ext: Vec<f64> = (n_lo..n_hi).map(|n| rg.s0 * rg.ratio.powi(n)).collect();
        let mut phase = Vec::with_capacity(lat.n_b * n_ext);
        for ib in 0..lat.n_b {
            let b = lat.b(ib);
            phase.extend(s_ext.iter().map(|s| C64::from_polar(1.0, TWO_PI * b * s)));
        }
        Ok(AffineTables {
            d_half: rg.nodes().iter().map(|s| s.abs().sqrt()).collect(),
            n_s,
            m_min: rg.m_min,
            s_ext,
            n_lo,
            n_ext,
            phase,
            lat,
        })
    }

    /// Column of the extended table for absolute exponent `n`.
    #[inline]
    pub fn col(&self, n: i32) -> usize {
        (n - self.n_lo) as usize
    }

    /// `e^{2πi b_i s⁺_n}`.
    #[inline]
    pub fn e(&self, ib: usize, n: i32) -> C64 {
        self.phase[ib * self.n_ext + self.col(n)]
    }

    /// Valid local row range for band offset `k`: rows `ρ` with `ρ + k` in range.
    #[inline]
    pub fn band(&self, k: i32) -> std::ops::Range<usize> {
        let n = self.n_s as i32;
        let lo = (-k).max(0);
        let hi = (n - k).min(n);
        if hi <= lo {
            0..0
        } else {
            lo as usize..hi as usize
        }
    }
}

#[derive(Debug)]
struct Inner {
    grid: Arc<GroupGrid>,
    dual: Arc<Dual>,
    tables: Option<AffineTables>,
}

/// Transform engine bound to one group grid and its sampled dual.
#[derive(Clone, Debug)]
pub struct PlancherelPair {
    inner: Arc<Inner>,
}

impl PlancherelPair {
    pub fn new(grid: Arc<GroupGrid>) -> Result<Self> {
        let dual = Arc::new(Dual::for_grid(&grid)?);
        let tables = match grid.backend() {
            Backend::Affine => Some(AffineTables::new(&grid, &dual)?),
            Backend::Cyclic => None,
        };
        Ok(PlancherelPair {
            inner: Arc::new(Inner { grid, dual, tables }),
        })
    }

    pub fn grid(&self) -> &Arc<GroupGrid> {
        &self.inner.grid
    }

    pub fn dual(&self) -> &Arc<Dual> {
        &self.inner.dual
    }

    pub(crate) fn tables(&self) -> Option<&AffineTables> {
        self.inner.tables.as_ref()
    }

    fn check_fn(&self, f: &SampledFunction) -> Result<()> {
        if self.inner.grid.same_as(f.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn check_field(&self, f: &OperatorField) -> Result<()> {
        if *f.dual == *self.inner.dual {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `ℱf(ξ) = Σ_y w(y) f(y) π_ξ(y)`.
    pub fn fourier(&self, f: &SampledFunction) -> Result<OperatorField> {
        self.check_fn(f)?;
        let dual = self.inner.dual.clone();
        match &self.inner.tables {
            None => {
                let n = self.inner.grid.len();
                let ops = (0..n)
                    .map(|m| {
                        let z: C64 = f.values().iter().enumerate().map(|(k, v)| v * character(m, k, n)).sum();
                        RepOperator::scalar(z)
                    })
                    .collect();
                OperatorField::new(dual, ops)
            }
            Some(t) => {
                let mut mats = [DMatrix::zeros(t.n_s, t.n_s), DMatrix::zeros(t.n_s, t.n_s)];
                let lat = &t.lat;
                let vals = f.values();
                for j in lat.j_min..lat.j_max {
                    let rows = t.band(j);
                    if rows.is_empty() {
                        continue;
                    }
                    let w = lat.weight(j);
                    let slice = &vals[lat.index(0, j)..lat.index(0, j) + lat.n_b];
                    if slice.iter().all(|v| *v == C64::new(0.0, 0.0)) {
                        continue;
                    }
                    for rho in rows {
                        let m = t.m_min + rho as i32;
                        let mut plus = C64::new(0.0, 0.0);
                        let mut minus = C64::new(0.0, 0.0);
                        for (ib, v) in slice.iter().enumerate() {
                            let e = t.e(ib, m);
                            plus += v * e;
                            minus += v * e.conj();
                        }
                        let col = (rho as i32 + j) as usize;
                        mats[0][(rho, col)] = plus * w;
                        mats[1][(rho, col)] = minus * w;
                    }
                }
                let [p, q] = mats;
                let ops = vec![
                    RepOperator::from_matrix(dual.space(0), p)?,
                    RepOperator::from_matrix(dual.space(1), q)?,
                ];
                OperatorField::new(dual, ops)
            }
        }
    }

    /// `𝒫f(ξ) = ℱf(ξ) D_ξ^{1/2}`.
    pub fn plancherel_fwd(&self, f: &SampledFunction) -> Result<OperatorField> {
        Ok(self.right_duflo_moore(&self.fourier(f)?))
    }

    /// `F(ξ) ↦ F(ξ) D_ξ^{1/2}` (column scaling by `|s_n|^{1/2}`).
    pub fn right_duflo_moore(&self, f: &OperatorField) -> OperatorField {
        match &self.inner.tables {
            None => f.clone(),
            Some(t) => f.map(|_, op| {
                let mut m = op.matrix.clone();
                for (c, mut col) in m.column_iter_mut().enumerate() {
                    col.iter_mut().for_each(|z| *z *= t.d_half[c]);
                }
                RepOperator {
                    space: op.space.clone(),
                    matrix: m,
                }
            }),
        }
    }

    /// Literal trace formula at one point.
    pub fn eval_inverse(&self, f: &OperatorField, x: &GroupPoint) -> C64 {
        eval_trace_formula(&self.inner, f, x)
    }

    /// Inverse Plancherel transform.  The result carries an evaluator that
    /// applies the trace formula at arbitrary points.
    pub fn plancherel_inv(&self, f: &OperatorField) -> Result<SampledFunction> {
        self.check_field(f)?;
        let grid = self.inner.grid.clone();
        let values = match &self.inner.tables {
            None => {
                let n = grid.len();
                (0..n)
                    .map(|k| {
                        (0..n)
                            .map(|m| f.ops[m].matrix[(0, 0)] * character(m, k, n).conj() / n as f64)
                            .sum()
                    })
                    .collect()
            }
            Some(t) => {
                let lat = &t.lat;
                let mut out = vec![C64::new(0.0, 0.0); grid.len()];
                for j in lat.j_min..lat.j_max {
                    let coeffs = band_coefficients(t, f, j);
                    if coeffs.is_empty() {
                        continue;
                    }
                    for ib in 0..lat.n_b {
                        let mut acc = C64::new(0.0, 0.0);
                        for &(m, cp, cm) in &coeffs {
                            let e = t.e(ib, m).conj();
                            acc += cp * e + cm * e.conj();
                        }
                        out[lat.index(ib, j)] = acc;
                    }
                }
                out
            }
        };
        let field = f.clone();
        let inner = self.inner.clone();
        let rule: Evaluator = Arc::new(move |x: &GroupPoint| eval_trace_formula(&inner, &field, x));
        Ok(SampledFunction::new(grid, values)?.with_evaluator(rule))
    }

    /// `𝒫̇f(ξ) = D_ξ^{1/2} Σ_x w(x) f(x) π_ξ(x)*`.
    pub fn alt_plancherel(&self, f: &SampledFunction) -> Result<OperatorField> {
        self.check_fn(f)?;
        let dual = self.inner.dual.clone();
        match &self.inner.tables {
            None => {
                let n = self.inner.grid.len();
                let ops = (0..n)
                    .map(|m| {
                        let z: C64 = f
                            .values()
                            .iter()
                            .enumerate()
                            .map(|(k, v)| v * character(m, k, n).conj())
                            .sum();
                        RepOperator::scalar(z)
                    })
                    .collect();
                OperatorField::new(dual, ops)
            }
            Some(t) => {
                let fw = self.fourier(&f.conj())?;
                // Σ f π(x)* = (Σ conj(f) π(x))*, then scale rows by |s|^{1/2}.
                let ops = fw
                    .ops
                    .iter()
                    .map(|op| {
                        let mut m = op.matrix.adjoint();
                        for (r, mut row) in m.row_iter_mut().enumerate() {
                            row.iter_mut().for_each(|z| *z *= t.d_half[r]);
                        }
                        RepOperator {
                            space: op.space.clone(),
                            matrix: m,
                        }
                    })
                    .collect();
                OperatorField::new(dual, ops)
            }
        }
    }

    /// Residual of `𝒫̇(f) = 𝒫(conj(f*))`, relative to `‖𝒫̇(f)‖`.
    pub fn alt_identity_residual(&self, f: &SampledFunction) -> Result<f64> {
        let lhs = self.alt_plancherel(f)?;
        let rhs = self.plancherel_fwd(&involution_p(f, 2.0)?.conj())?;
        Ok(hs_norm(&lhs.sub(&rhs)?) / hs_norm(&lhs))
    }

    /// `‖𝒫(g∗u) − ℱ(g)·𝒫(u)‖ / ‖𝒫(g∗u)‖`.
    pub fn conv_diag_check(&self, g: &SampledFunction, u: &SampledFunction) -> Result<f64> {
        let lhs = self.plancherel_fwd(&convolve(g, u)?)?;
        let rhs = self.fourier(g)?.mul(&self.plancherel_fwd(u)?)?;
        let denom = hs_norm(&lhs);
        let num = hs_norm(&lhs.sub(&rhs)?);
        Ok(if denom == 0.0 { num } else { num / denom })
    }

    /// `max_ξ ‖ℱg(ξ)‖` in operator norm.  This is the quantity whose
    /// essential supremum decides boundedness of left convolution by `g`; on
    /// a finite grid it is always finite, so it is reported as a diagnostic.
    pub fn fourier_sup_norm(&self, g: &SampledFunction) -> Result<f64> {
        let field = self.fourier(g)?;
        Ok(field
            .ops
            .iter()
            .map(|op| op.matrix.clone().singular_values().max())
            .fold(0.0, f64::max))
    }

    /// Relative Parseval defect `|‖𝒫f‖² − ‖f‖²| / ‖f‖²`.
    pub fn parseval_residual(&self, f: &SampledFunction) -> Result<f64> {
        let lhs = self.plancherel_fwd(f)?.norm_sqr();
        let rhs = f.norm().powi(2);
        Ok((lhs - rhs).abs() / rhs)
    }

    /// Relative `L²` error of `𝒫⁻¹𝒫f` against `f` on the grid.
    pub fn roundtrip_residual(&self, f: &SampledFunction) -> Result<f64> {
        let back = self.plancherel_inv(&self.plancherel_fwd(f)?)?;
        crate::lspace::relative_l2(&back.without_evaluator(), &f.without_evaluator())
    }

    /// Compare the trace-formula inverse of `F` with the minimum-norm
    /// least-squares solution of `𝒫 f = F`, block by block in the dilation.
    pub fn least_squares_diagnostic(&self, field: &OperatorField) -> Result<LeastSquaresDiagnostic> {
        self.check_field(field)?;
        let trace = self.plancherel_inv(field)?;
        let grid = &self.inner.grid;
        let mut lsq = vec![C64::new(0.0, 0.0); grid.len()];
        let mut fit_num = 0.0;
        let mut smin = f64::INFINITY;
        let mut smax = 0.0f64;
        match &self.inner.tables {
            None => {
                let n = grid.len();
                let a = DMatrix::from_fn(n, n, |m, k| character(m, k, n));
                let rhs = DVector::from_iterator(n, field.ops.iter().map(|o| o.matrix[(0, 0)]));
                let svd = a.clone().svd(true, true);
                smin = svd.singular_values.min();
                smax = svd.singular_values.max();
                let sol = svd
                    .solve(&rhs, 1e-12 * smax)
                    .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
                fit_num += (&a * &sol - &rhs).norm_squared() / n as f64;
                lsq.copy_from_slice(sol.as_slice());
            }
            Some(t) => {
                let lat = &t.lat;
                for j in lat.j_min..lat.j_max {
                    let rows: Vec<usize> = t.band(j).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    let w = lat.weight(j);
                    let nr = rows.len();
                    let a = DMatrix::from_fn(2 * nr, lat.n_b, |r, ib| {
                        let rho = rows[r % nr];
                        let m = t.m_min + rho as i32;
                        let d = t.d_half[(rho as i32 + j) as usize];
                        let e = t.e(ib, m);
                        let e = if r < nr { e } else { e.conj() };
                        e * (w * d)
                    });
                    let rhs = DVector::from_fn(2 * nr, |r, _| {
                        let rho = rows[r % nr];
                        field.ops[r / nr].matrix[(rho, (rho as i32 + j) as usize)]
                    });
                    let svd = a.clone().svd(true, true);
                    smin = smin.min(svd.singular_values.min());
                    smax = smax.max(svd.singular_values.max());
                    let tol = 1e-12 * svd.singular_values.max();
                    let sol = svd.solve(&rhs, tol).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
                    fit_num += (&a * &sol - &rhs).norm_squared();
                    for ib in 0..lat.n_b {
                        lsq[lat.index(ib, j)] = sol[ib];
                    }
                }
            }
        }
        let lsq = SampledFunction::new(grid.clone(), lsq)?;
        let tr = trace.without_evaluator();
        Ok(LeastSquaresDiagnostic {
            relative_difference: crate::lspace::relative_l2(&lsq, &tr)?,
            fit_residual: fit_num.sqrt() / field.norm_sqr().sqrt(),
            min_singular: smin,
            max_singular: smax,
        })
    }

    /// Row `y ↦ g(x y⁻¹)` of a left kernel pullback, where `g = 𝒫⁻¹F` and
    /// `x` is grid node `xi`.
    pub fn left_pullback_row(&self, field: &OperatorField, xi: usize) -> Vec<C64> {
        let grid = &self.inner.grid;
        match &self.inner.tables {
            None => {
                let n = grid.len();
                let g = cyclic_inverse_values(field, n);
                (0..n).map(|ky| g[(xi + n - ky) % n]).collect()
            }
            Some(t) => {
                let lat = &t.lat;
                let (ibx, jx) = lat.split(xi);
                let mut row = vec![C64::new(0.0, 0.0); grid.len()];
                for jy in lat.j_min..lat.j_max {
                    let k = jx - jy;
                    let coeffs = band_coefficients(t, field, k);
                    if coeffs.is_empty() {
                        continue;
                    }
                    // g(b_x − r^k b_y, r^k) = Σ_m c_m e^{−2πi b_x s_m} e^{2πi b_y s_{m+k}}
                    let v: Vec<(i32, C64, C64)> = coeffs
                        .iter()
                        .map(|&(m, cp, cm)| {
                            let e = t.e(ibx, m);
                            (m + k, cp * e.conj(), cm * e)
                        })
                        .collect();
                    let base = lat.index(0, jy);
                    for iby in 0..lat.n_b {
                        let mut acc = C64::new(0.0, 0.0);
                        for &(n, vp, vm) in &v {
                            let e = t.e(iby, n);
                            acc += vp * e + vm * e.conj();
                        }
                        row[base + iby] = acc;
                    }
                }
                row
            }
        }
    }

    /// Row `y ↦ g(y⁻¹ x)` of a right kernel pullback, `g = 𝒫⁻¹F`.
    pub fn right_pullback_row(&self, field: &OperatorField, xi: usize) -> Vec<C64> {
        let grid = &self.inner.grid;
        match &self.inner.tables {
            None => {
                let n = grid.len();
                let g = cyclic_inverse_values(field, n);
                (0..n).map(|ky| g[(xi + n - ky) % n]).collect()
            }
            Some(t) => {
                let lat = &t.lat;
                let (ibx, jx) = lat.split(xi);
                let mut row = vec![C64::new(0.0, 0.0); grid.len()];
                for jy in lat.j_min..lat.j_max {
                    let k = jx - jy;
                    let coeffs = band_coefficients(t, field, k);
                    if coeffs.is_empty() {
                        continue;
                    }
                    // y⁻¹x = ((b_x − b_y)/a_y, r^k); s_m / a_y = s_{m − j_y}.
                    let v: Vec<(i32, C64, C64)> = coeffs
                        .iter()
                        .map(|&(m, cp, cm)| {
                            let n = m - jy;
                            let e = t.e(ibx, n);
                            (n, cp * e.conj(), cm * e)
                        })
                        .collect();
                    let base = lat.index(0, jy);
                    for iby in 0..lat.n_b {
                        let mut acc = C64::new(0.0, 0.0);
                        for &(n, vp, vm) in &v {
                            let e = t.e(iby, n);
                            acc += vp * e + vm * e.conj();
                        }
                        row[base + iby] = acc;
                    }
                }
                row
            }
        }
    }
}

/// `e^{−2πimk/N}`.
#[inline]
pub fn character(m: usize, k: usize, n: usize) -> C64 {
    C64::from_polar(1.0, -TWO_PI * ((m * k) % n) as f64 / n as f64)
}

fn cyclic_inverse_values(field: &OperatorField, n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| {
            (0..n)
                .map(|m| field.ops[m].matrix[(0, 0)] * character(m, k, n).conj() / n as f64)
                .sum()
        })
        .collect()
}

/// Coefficients `(m, c⁺_m, c⁻_m)` with `c_m = F[m, m+k] |s_{m+k}|^{1/2}` for
/// both signs; the inverse at `(b, r^k)` is `Σ c⁺ e^{−2πibs_m} + c⁻ e^{+2πibs_m}`.
pub(crate) fn band_coefficients(t: &AffineTables, f: &OperatorField, k: i32) -> Vec<(i32, C64, C64)> {
    let mut out = Vec::new();
    for rho in t.band(k) {
        let col = (rho as i32 + k) as usize;
        let d = t.d_half[col];
        let cp = f.ops[0].matrix[(rho, col)] * d * f.dual.weight(0);
        let cm = f.ops[1].matrix[(rho, col)] * d * f.dual.weight(1);
        if cp != C64::new(0.0, 0.0) || cm != C64::new(0.0, 0.0) {
            out.push((t.m_min + rho as i32, cp, cm));
        }
    }
    out
}

fn eval_trace_formula(inner: &Inner, f: &OperatorField, x: &GroupPoint) -> C64 {
    match (&inner.tables, *x) {
        (None, GroupPoint::Cyclic { k, n }) => (0..n)
            .map(|m| f.ops[m].matrix[(0, 0)] * character(m, k, n).conj() / n as f64)
            .sum(),
        (Some(t), GroupPoint::Affine { b, a }) => {
            let u = a.ln() / t.lat.ln_r;
            let k0 = u.round();
            let at_k = |k: i32| -> C64 {
                band_coefficients(t, f, k)
                    .iter()
                    .map(|&(m, cp, cm)| {
                        let e = C64::from_polar(1.0, -TWO_PI * b * t.s_ext[t.col(m)]);
                        cp * e + cm * e.conj()
                    })
                    .sum()
            };
            if (u - k0).abs() <= 1e-9 * (1.0 + u.abs()) {
                at_k(k0 as i32)
            } else {
                let lo = u.floor();
                let frac = u - lo;
                at_k(lo as i32) * (1.0 - frac) + at_k(lo as i32 + 1) * frac
            }
        }
        _ => C64::new(0.0, 0.0),
    }
}
