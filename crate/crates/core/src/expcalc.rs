//! Scalar quantization of the cotangent bundle `G × 𝔤*` of the affine group.
//!
//! Exponential coordinates `X = (β, α) = log(b, a)` identify the group with
//! its Lie algebra, and `𝒳 = (𝔶, 𝔵) ∈ 𝔤*` pairs as `⟨X|𝒳⟩ = β𝔶 + α𝔵`.
//!
//! The dual lattice is uniform and centred at 0, with `2 N_b` nodes spaced
//! `d𝔶 = 2π/(2 N_b h_b)` and `2 N_a` nodes spaced `d𝔵 = 2π/(2 N_a ln r)`.
//! The measure is `d𝒳 = d𝔶 d𝔵 / (2π)²`.  With these choices the sum
//! `Σ_𝒳 d𝒳 e^{i⟨log(xy⁻¹)|𝒳⟩}` over the whole lattice vanishes for every pair
//! of distinct grid nodes, so `op(f ⊗ 1) = Mult_{Δ^{1/2} f}` holds exactly on
//! the grid.  Refining the group grid doubles both node counts and keeps the
//! spacings.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{log_map, theta, AffineLattice, GroupGrid, GroupPoint, LieVector};
use crate::lspace::{mult_op, DenseOperator, SampledFunction};
use crate::plancherel::PlancherelPair;
use crate::quantizer::{op_left_row, Symbol};
use crate::repfield::OperatorField;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `𝒳 = (𝔶, 𝔵) ∈ 𝔤*`; `𝔶` pairs with `β`, `𝔵` with `α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CotangentVector {
    pub y: f64,
    pub x: f64,
}

/// `⟨X|𝒳⟩ = β𝔶 + α𝔵`.
pub fn pairing(v: &LieVector, c: &CotangentVector) -> f64 {
    v.beta * c.y + v.alpha * c.x
}

/// Uniform rectangular lattice on `𝔤*`, `𝔶_k = (k − n_y/2) d_y`, `𝔵_l = (l − n_x/2) d_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualLattice {
    pub n_y: usize,
    pub d_y: f64,
    pub n_x: usize,
    pub d_x: f64,
}

impl DualLattice {
    /// Lattice paired with an affine grid by the rule in the module docs.
    pub fn for_grid(grid: &GroupGrid) -> Result<Self> {
        let lat = grid.affine().ok_or(Error::Unsupported {
            backend: "cyclic",
            op: "dual lattice",
        })?;
        let n_y = 2 * lat.n_b;
        let n_x = 2 * lat.n_a();
        Ok(DualLattice {
            n_y,
            d_y: 2.0 * PI / (n_y as f64 * lat.h_b),
            n_x,
            d_x: 2.0 * PI / (n_x as f64 * lat.ln_r),
        })
    }

    pub fn len(&self) -> usize {
        self.n_y * self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn y(&self, k: usize) -> f64 {
        (k as f64 - (self.n_y / 2) as f64) * self.d_y
    }

    pub fn x(&self, l: usize) -> f64 {
        (l as f64 - (self.n_x / 2) as f64) * self.d_x
    }

    pub fn index(&self, k: usize, l: usize) -> usize {
        k * self.n_x + l
    }

    pub fn point(&self, idx: usize) -> CotangentVector {
        CotangentVector {
            y: self.y(idx / self.n_x),
            x: self.x(idx % self.n_x),
        }
    }

    /// `d𝒳 = d𝔶 d𝔵 / (2π)²`.
    pub fn measure(&self) -> f64 {
        self.d_y * self.d_x / (4.0 * PI * PI)
    }
}

/// Values on the nodes of a [`DualLattice`].
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFunction {
    pub lattice: DualLattice,
    pub values: Vec<C64>,
}

impl LatticeFunction {
    pub fn zeros(lattice: DualLattice) -> Self {
        LatticeFunction {
            lattice,
            values: vec![ZERO; lattice.len()],
        }
    }

    pub fn from_fn(lattice: DualLattice, f: impl Fn(&CotangentVector) -> C64) -> Self {
        let values = (0..lattice.len()).map(|i| f(&lattice.point(i))).collect();
        LatticeFunction { lattice, values }
    }

    /// `(Σ_𝒳 d𝒳 |w(𝒳)|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (self.lattice.measure() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    fn check(&self, other: &LatticeFunction) -> Result<()> {
        if self.lattice == other.lattice {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn sub(&self, other: &LatticeFunction) -> Result<LatticeFunction> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(LatticeFunction {
            lattice: self.lattice,
            values,
        })
    }

    /// `Q[k, i] = Σ_l w[k, l] e^{iα_i 𝔵_l}` for each `α_i`, row-major in `i`.
    fn partial_x(&self, alphas: &[f64]) -> Vec<C64> {
        let lat = &self.lattice;
        let mut q = vec![ZERO; alphas.len() * lat.n_y];
        for (i, &alpha) in alphas.iter().enumerate() {
            let phases: Vec<C64> = (0..lat.n_x).map(|l| C64::from_polar(1.0, alpha * lat.x(l))).collect();
            for k in 0..lat.n_y {
                let row = &self.values[k * lat.n_x..(k + 1) * lat.n_x];
                q[i * lat.n_y + k] = row.iter().zip(&phases).map(|(w, p)| w * p).sum();
            }
        }
        q
    }
}

/// `Σ_k q[k] e^{iβ𝔶_k}`, by a phase recurrence.
fn sum_y(lat: &DualLattice, q: &[C64], beta: f64) -> C64 {
    let step = C64::from_polar(1.0, beta * lat.d_y);
    let mut p = C64::from_polar(1.0, beta * lat.y(0));
    let mut acc = ZERO;
    for v in q {
        acc += v * p;
        p *= step;
    }
    acc
}

fn affine_lattice(grid: &GroupGrid) -> Result<&AffineLattice> {
    grid.affine().ok_or(Error::Unsupported {
        backend: "cyclic",
        op: "exponential calculus",
    })
}

fn check_lattice(grid: &GroupGrid, lattice: &DualLattice) -> Result<()> {
    if DualLattice::for_grid(grid)? == *lattice {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `ℱ_{G𝔤*}u(𝒳) = Σ_x w(x) e^{−i⟨log x|𝒳⟩} u(x) θ(log x)^{-1/2}`.
pub fn fourier_exp(u: &SampledFunction, lattice: &DualLattice) -> Result<LatticeFunction> {
    let grid = u.grid();
    let lat = affine_lattice(grid)?;
    check_lattice(grid, lattice)?;
    let mut out = LatticeFunction::zeros(*lattice);
    for j in lat.j_min..lat.j_max {
        let logs: Vec<LieVector> = (0..lat.n_b)
            .map(|ib| {
                log_map(&GroupPoint::Affine {
                    b: lat.b(ib),
                    a: lat.a(j),
                })
            })
            .collect::<Result<_>>()?;
        let alpha = logs[0].alpha;
        let amp = lat.weight(j) / theta(&logs[0]).sqrt();
        let mut r = vec![ZERO; lattice.n_y];
        for (ib, x) in logs.iter().enumerate() {
            let v = u.values()[lat.index(ib, j)] * amp;
            if v == ZERO {
                continue;
            }
            let step = C64::from_polar(1.0, -x.beta * lattice.d_y);
            let mut p = C64::from_polar(1.0, -x.beta * lattice.y(0));
            for rk in r.iter_mut() {
                *rk += v * p;
                p *= step;
            }
        }
        let phases: Vec<C64> = (0..lattice.n_x)
            .map(|l| C64::from_polar(1.0, -alpha * lattice.x(l)))
            .collect();
        for (k, rk) in r.iter().enumerate() {
            if *rk == ZERO {
                continue;
            }
            for (l, p) in phases.iter().enumerate() {
                out.values[lattice.index(k, l)] += rk * p;
            }
        }
    }
    Ok(out)
}

/// `ℱ_{G𝔤*}⁻¹w(x) = θ(log x)^{-1/2} Σ_𝒳 d𝒳 e^{i⟨log x|𝒳⟩} w(𝒳)` at one point.
pub fn eval_fourier_exp_inv(w: &LatticeFunction, x: &GroupPoint) -> Result<C64> {
    let v = log_map(x)?;
    let q = w.partial_x(&[v.alpha]);
    Ok(sum_y(&w.lattice, &q, v.beta) * (w.lattice.measure() / theta(&v).sqrt()))
}

/// Inverse of [`fourier_exp`] on the grid nodes; the result evaluates the
/// same formula at arbitrary points.
pub fn fourier_exp_inv(w: &LatticeFunction, grid: &Arc<GroupGrid>) -> Result<SampledFunction> {
    let lat = affine_lattice(grid)?;
    check_lattice(grid, &w.lattice)?;
    let alphas: Vec<f64> = (lat.j_min..lat.j_max).map(|j| j as f64 * lat.ln_r).collect();
    let q = w.partial_x(&alphas);
    let dm = w.lattice.measure();
    let mut values = vec![ZERO; grid.len()];
    for (jl, j) in (lat.j_min..lat.j_max).enumerate() {
        let qj = &q[jl * w.lattice.n_y..(jl + 1) * w.lattice.n_y];
        for ib in 0..lat.n_b {
            let v = log_map(&GroupPoint::Affine {
                b: lat.b(ib),
                a: lat.a(j),
            })?;
            values[lat.index(ib, j)] = sum_y(&w.lattice, qj, v.beta) * (dm / theta(&v).sqrt());
        }
    }
    let wf = w.clone();
    let rule = Arc::new(move |x: &GroupPoint| eval_fourier_exp_inv(&wf, x).unwrap_or(ZERO));
    Ok(SampledFunction::new(grid.clone(), values)?.with_evaluator(rule))
}

/// `‖ℱ⁻¹ℱu − u‖ / ‖u‖` on the grid.
pub fn fourier_exp_roundtrip_residual(u: &SampledFunction) -> Result<f64> {
    let lattice = DualLattice::for_grid(u.grid())?;
    let back = fourier_exp_inv(&fourier_exp(u, &lattice)?, u.grid())?;
    crate::lspace::relative_l2(&back.without_evaluator(), &u.without_evaluator())
}

/// `ℒ = 𝒫 ∘ ℱ_{G𝔤*}⁻¹`.
pub fn l_map(w: &LatticeFunction, pair: &PlancherelPair) -> Result<OperatorField> {
    pair.plancherel_fwd(&fourier_exp_inv(w, pair.grid())?)
}

/// `ℒ⁻¹ = ℱ_{G𝔤*} ∘ 𝒫⁻¹`.
pub fn l_inv(v: &OperatorField, pair: &PlancherelPair) -> Result<LatticeFunction> {
    let lattice = DualLattice::for_grid(pair.grid())?;
    fourier_exp(&pair.plancherel_inv(v)?.without_evaluator(), &lattice)
}

/// A scalar symbol `B(x, 𝒳) = Σ_q c_q(x) W_q(𝒳)` built from shared windows
/// on the dual lattice.  Nodes without coefficients carry `B(x, ·) = 0`.
#[derive(Clone, Debug)]
pub struct ScalarSymbol {
    grid: Arc<GroupGrid>,
    lattice: DualLattice,
    windows: Vec<Arc<LatticeFunction>>,
    coeffs: Vec<Vec<(usize, C64)>>,
}

impl ScalarSymbol {
    pub fn zeros(grid: Arc<GroupGrid>) -> Result<Self> {
        let lattice = DualLattice::for_grid(&grid)?;
        let n = grid.len();
        Ok(ScalarSymbol {
            grid,
            lattice,
            windows: Vec::new(),
            coeffs: vec![Vec::new(); n],
        })
    }

    /// `B(x, 𝒳) = Σ_q c[q][x] W_q(𝒳)`.
    pub fn from_windows(grid: Arc<GroupGrid>, windows: Vec<LatticeFunction>, coeffs: &[Vec<C64>]) -> Result<Self> {
        let mut sym = ScalarSymbol::zeros(grid)?;
        if windows.len() != coeffs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} windows, {} coefficient sets",
                windows.len(),
                coeffs.len()
            )));
        }
        for (q, (w, c)) in windows.into_iter().zip(coeffs).enumerate() {
            if w.lattice != sym.lattice {
                return Err(Error::GridMismatch);
            }
            if c.len() != sym.grid.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} coefficients for {} nodes",
                    c.len(),
                    sym.grid.len()
                )));
            }
            sym.windows.push(Arc::new(w));
            for (i, z) in c.iter().enumerate() {
                if *z != ZERO {
                    sym.coeffs[i].push((q, *z));
                }
            }
        }
        Ok(sym)
    }

    /// `B(x, 𝒳) = f(x) W(𝒳)`.
    pub fn separable(f: &SampledFunction, window: LatticeFunction) -> Result<Self> {
        ScalarSymbol::from_windows(f.grid().clone(), vec![window], &[f.values().to_vec()])
    }

    /// Pointwise values; each node gets its own window.
    pub fn from_fn(grid: Arc<GroupGrid>, f: impl Fn(&GroupPoint, &CotangentVector) -> C64) -> Result<Self> {
        let mut sym = ScalarSymbol::zeros(grid)?;
        for i in 0..sym.grid.len() {
            let x = sym.grid.node(i);
            let w = LatticeFunction::from_fn(sym.lattice, |c| f(&x, c));
            if w.values.iter().any(|v| *v != ZERO) {
                sym.coeffs[i].push((sym.windows.len(), C64::new(1.0, 0.0)));
                sym.windows.push(Arc::new(w));
            }
        }
        Ok(sym)
    }

    pub fn grid(&self) -> &Arc<GroupGrid> {
        &self.grid
    }

    pub fn lattice(&self) -> &DualLattice {
        &self.lattice
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter_map(|(i, c)| (!c.is_empty()).then_some(i))
    }

    /// `B(x_i, ·)`.
    pub fn slice(&self, i: usize) -> LatticeFunction {
        let mut out = LatticeFunction::zeros(self.lattice);
        for &(q, c) in &self.coeffs[i] {
            for (o, v) in out.values.iter_mut().zip(&self.windows[q].values) {
                *o += v * c;
            }
        }
        out
    }

    pub fn value(&self, i: usize, k: usize, l: usize) -> C64 {
        let idx = self.lattice.index(k, l);
        self.coeffs[i]
            .iter()
            .map(|&(q, c)| self.windows[q].values[idx] * c)
            .sum()
    }

    /// `(Σ_x w(x) Σ_𝒳 d𝒳 |B(x, 𝒳)|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.support()
            .map(|i| self.grid.weight(i) * self.slice(i).norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, z: C64) -> ScalarSymbol {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            c.iter_mut().for_each(|(_, v)| *v *= z);
        }
        out
    }

    pub fn add(&self, other: &ScalarSymbol) -> Result<ScalarSymbol> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let mut out = self.clone();
        let base = out.windows.len();
        out.windows.extend(other.windows.iter().cloned());
        for (c, oc) in out.coeffs.iter_mut().zip(&other.coeffs) {
            c.extend(oc.iter().map(|&(q, v)| (q + base, v)));
        }
        Ok(out)
    }

    /// `𝐋B`: the operator-valued symbol `x ↦ ℒ(B(x, ·))`.
    pub fn l_symbol(&self, pair: &PlancherelPair) -> Result<Symbol> {
        if !pair.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let fields: Vec<OperatorField> = self.windows.iter().map(|w| l_map(w, pair)).collect::<Result<_>>()?;
        let mut out = Symbol::zeros(pair.clone());
        for i in self.support().collect::<Vec<_>>() {
            let mut f = fields[self.coeffs[i][0].0].scale(self.coeffs[i][0].1);
            for &(q, c) in &self.coeffs[i][1..] {
                f = f.add(&fields[q].scale(c))?;
            }
            out.set(i, f)?;
        }
        Ok(out)
    }

    /// CSV with columns `b,a,y,x,re,im` (`y` is `𝔶`, `x` is `𝔵`), one line
    /// per supported node and lattice point.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["b", "a", "y", "x", "re", "im"])?;
        for i in self.support().collect::<Vec<_>>() {
            let (b, a) = self.grid.node(i).affine_coords().expect("affine grid");
            let s = self.slice(i);
            for (idx, v) in s.values.iter().enumerate() {
                let c = self.lattice.point(idx);
                w.write_record([b, a, c.y, c.x, v.re, v.im].map(|t| format!("{t:e}")))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Lattice manifest, including the normalization of `d𝒳`.
    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let m = LatticeManifest {
            grid: self.grid.config().clone(),
            lattice: self.lattice,
            measure: self.lattice.measure(),
            normalization: "dX = dy dx / (2 pi)^2".into(),
            y_range: [self.lattice.y(0), self.lattice.y(self.lattice.n_y - 1)],
            x_range: [self.lattice.x(0), self.lattice.x(self.lattice.n_x - 1)],
        };
        fs::write(path, serde_json::to_string_pretty(&m)?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct LatticeManifest {
    grid: crate::group::GridConfig,
    lattice: DualLattice,
    measure: f64,
    normalization: String,
    y_range: [f64; 2],
    x_range: [f64; 2],
}

/// Per-window tables `Q_q[Δj][k] = Σ_l W_q[k, l] e^{iΔj ln r 𝔵_l}` for every
/// dilation difference `Δj` on the grid.
struct RowEngine<'a> {
    sym: &'a ScalarSymbol,
    lat: &'a AffineLattice,
    tables: Vec<Vec<C64>>,
    span: i32,
}

impl<'a> RowEngine<'a> {
    fn new(sym: &'a ScalarSymbol) -> Result<Self> {
        let lat = affine_lattice(&sym.grid)?;
        let span = lat.j_max - lat.j_min - 1;
        let alphas: Vec<f64> = (-span..=span).map(|d| d as f64 * lat.ln_r).collect();
        let tables = sym.windows.iter().map(|w| w.partial_x(&alphas)).collect();
        Ok(RowEngine { sym, lat, tables, span })
    }

    /// Row `y ↦ θ(X)^{-1/2} Σ_𝒳 d𝒳 e^{i⟨X|𝒳⟩} B(x, 𝒳) Δ(y)^{-1/2}`, `X = log(x y⁻¹)`.
    fn row(&self, xi: usize) -> Vec<C64> {
        let n = self.sym.grid.len();
        let mut row = vec![ZERO; n];
        let terms = &self.sym.coeffs[xi];
        if terms.is_empty() {
            return row;
        }
        let lat = self.lat;
        let dl = &self.sym.lattice;
        let ny = dl.n_y;
        let (ibx, jx) = lat.split(xi);
        let bx = lat.b(ibx);
        let mut q = vec![ZERO; ny];
        for jy in lat.j_min..lat.j_max {
            let d = jx - jy;
            let off = (d + self.span) as usize * ny;
            q.iter_mut().for_each(|v| *v = ZERO);
            for &(w, c) in terms {
                for (qk, t) in q.iter_mut().zip(&self.tables[w][off..off + ny]) {
                    *qk += t * c;
                }
            }
            let v = LieVector::new(0.0, d as f64 * lat.ln_r);
            let ratio = lat.a(jx) / lat.a(jy);
            let amp = dl.measure() / theta(&v).sqrt() * lat.a(jy).sqrt();
            for iby in 0..lat.n_b {
                let p = GroupPoint::Affine {
                    b: bx - ratio * lat.b(iby),
                    a: ratio,
                };
                let beta = log_map(&p).expect("affine point").beta;
                row[lat.index(iby, jy)] = sum_y(dl, &q, beta) * amp;
            }
        }
        row
    }
}

/// One kernel row of `op(B)`.
pub fn op_scalar_row(b: &ScalarSymbol, xi: usize) -> Result<Vec<C64>> {
    Ok(RowEngine::new(b)?.row(xi))
}

/// `op(B)` with kernel `θ(log xy⁻¹)^{-1/2} Σ_𝒳 d𝒳 e^{i⟨log xy⁻¹|𝒳⟩} B(x, 𝒳) Δ(y)^{-1/2}`.
pub fn op_scalar(b: &ScalarSymbol) -> Result<DenseOperator> {
    let engine = RowEngine::new(b)?;
    let n = b.grid.len();
    let mut k = nalgebra::DMatrix::zeros(n, n);
    for i in b.support().collect::<Vec<_>>() {
        for (j, v) in engine.row(i).into_iter().enumerate() {
            k[(i, j)] = v;
        }
    }
    DenseOperator::from_kernel(b.grid.clone(), k)
}

/// `‖op(B) − Op(𝐋B)‖_HS / ‖Op(𝐋B)‖_HS`, accumulated row by row.
pub fn consistency_residual(b: &ScalarSymbol, pair: &PlancherelPair) -> Result<f64> {
    let engine = RowEngine::new(b)?;
    let a = b.l_symbol(pair)?;
    let w = b.grid.weights();
    let (mut num, mut den) = (0.0, 0.0);
    for i in b.support().collect::<Vec<_>>() {
        let direct = engine.row(i);
        let via = op_left_row(&a, i);
        for ((d, v), wy) in direct.iter().zip(&via).zip(w) {
            num += w[i] * wy * (d - v).norm_sqr();
            den += w[i] * wy * v.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

/// `‖op(f ⊗ W) − Mult_{Δ^{1/2} f}‖_HS / ‖Mult_{Δ^{1/2} f}‖_HS`.
pub fn limit_residual(f: &SampledFunction, window: LatticeFunction) -> Result<f64> {
    let sym = ScalarSymbol::separable(f, window)?;
    let engine = RowEngine::new(&sym)?;
    let target = mult_op(&f.modular_scaled(0.5));
    let w = f.grid().weights();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..f.grid().len() {
        let row = engine.row(i);
        for (j, (v, wy)) in row.iter().zip(w).enumerate() {
            let t = target.kernel()[(i, j)];
            num += w[i] * wy * (v - t).norm_sqr();
            den += w[i] * wy * t.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

/// Gaussian window `exp(−(𝔶−𝔶_c)²/(2σ_𝔶²) − (𝔵−𝔵_c)²/(2σ_𝔵²))`.
pub fn gaussian_window(lattice: DualLattice, center: CotangentVector, sigma_y: f64, sigma_x: f64) -> LatticeFunction {
    LatticeFunction::from_fn(lattice, |c| {
        let e = -(c.y - center.y).powi(2) / (2.0 * sigma_y * sigma_y)
            - (c.x - center.x).powi(2) / (2.0 * sigma_x * sigma_x);
        C64::new(e.exp(), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{affine_kernel_factor, build_grid, GridConfig};
    use crate::samples::WavePacket;

    fn baseline() -> Arc<GroupGrid> {
        Arc::new(build_grid(&GridConfig::affine_baseline()).unwrap())
    }

    #[test]
    fn lattice_follows_grid() {
        let g = baseline();
        let l = DualLattice::for_grid(&g).unwrap();
        assert_eq!((l.n_y, l.n_x), (64, 64));
        assert!((l.y(32)).abs() < 1e-15 && (l.x(32)).abs() < 1e-15);
        let g1 = build_grid(&GridConfig::affine_baseline().refined().unwrap()).unwrap();
        let l1 = DualLattice::for_grid(&g1).unwrap();
        assert_eq!((l1.n_y, l1.n_x), (128, 128));
        assert!((l1.d_y - l.d_y).abs() < 1e-14 && (l1.d_x - l.d_x).abs() < 1e-14);
        let c = GridConfig::cyclic(4);
        assert!(DualLattice::for_grid(&build_grid(&c).unwrap()).is_err());
    }

    #[test]
    fn single_node_is_plane_wave() {
        let g = baseline();
        let l = DualLattice::for_grid(&g).unwrap();
        let lat = g.affine().unwrap();
        let i = lat.index(20, 3);
        let x = g.node(i);
        let u = SampledFunction::delta(g.clone(), i);
        let f = fourier_exp(&u, &l).unwrap();
        let v = log_map(&x).unwrap();
        for idx in (0..l.len()).step_by(97) {
            let c = l.point(idx);
            let want = C64::from_polar(theta(&v).powf(-0.5), -pairing(&v, &c));
            assert!((f.values[idx] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_on_bump() {
        let g = baseline();
        let u = WavePacket::gaussian(0.3, 0.1, 1.5, 0.3).sample(&g);
        let r = fourier_exp_roundtrip_residual(&u).unwrap();
        assert!(r < 1e-3, "roundtrip {r}");
        let w = fourier_exp(&u, &DualLattice::for_grid(&g).unwrap()).unwrap();
        let back = fourier_exp_inv(&w, &g).unwrap();
        let x = g.node(300);
        assert!((back.eval(&x) - back.values()[300]).norm() < 1e-12);
    }

    #[test]
    fn wide_window_gives_multiplication() {
        let g = baseline();
        let l = DualLattice::for_grid(&g).unwrap();
        let f = WavePacket::gaussian(0.0, 0.0, 1.5, 0.4).sample(&g);
        let flat = LatticeFunction::from_fn(l, |_| C64::new(1.0, 0.0));
        assert!(limit_residual(&f, flat).unwrap() < 1e-12);
    }

    #[test]
    fn zero_symbol_gives_zero() {
        let g = baseline();
        let pair = PlancherelPair::new(g.clone()).unwrap();
        let l = DualLattice::for_grid(&g).unwrap();
        let z = LatticeFunction::zeros(l);
        assert_eq!(l_map(&z, &pair).unwrap().norm_sqr(), 0.0);
        let b = ScalarSymbol::zeros(g.clone()).unwrap();
        assert_eq!(op_scalar(&b).unwrap().hs_norm(), 0.0);
    }

    #[test]
    fn kernel_matches_explicit_affine_display() {
        // Explicit (b, a) form of op(B) against the row engine.
        let g = baseline();
        let l = DualLattice::for_grid(&g).unwrap();
        let lat = g.affine().unwrap().clone();
        let f = WavePacket::gaussian(0.0, 0.0, 1.0, 0.3).sample(&g);
        let win = gaussian_window(l, CotangentVector { y: -1.2, x: 0.0 }, 0.6, 3.0);
        let sym = ScalarSymbol::separable(&f, win.clone()).unwrap();
        let xi = lat.index(16, 1);
        let row = op_scalar_row(&sym, xi).unwrap();
        let (b, a) = g.node(xi).affine_coords().unwrap();
        for yi in (0..g.len()).step_by(41) {
            let (b1, a1) = g.node(yi).affine_coords().unwrap();
            let lq = (a / a1).ln();
            let geom = if (a - a1).abs() < 1e-14 {
                b - b1
            } else {
                (a1 * b - a * b1) / (a - a1) * lq
            };
            let mut acc = C64::new(0.0, 0.0);
            for idx in 0..l.len() {
                let c = l.point(idx);
                acc += C64::from_polar(1.0, lq * c.x + geom * c.y) * win.values[idx];
            }
            // Haar weight a₁^{-2} is carried by the quadrature, leaving a₁^{1/2}.
            let want = acc * f.values()[xi] * l.measure() * affine_kernel_factor(a / a1) * a1.sqrt();
            assert!((row[yi] - want).norm() < 1e-10 * (1.0 + want.norm()), "{yi}");
        }
    }

    #[test]
    fn linear_in_symbol() {
        let g = baseline();
        let l = DualLattice::for_grid(&g).unwrap();
        let f1 = WavePacket::gaussian(0.0, 0.0, 1.0, 0.3).sample(&g);
        let f2 = WavePacket::gaussian(0.5, 0.1, 1.0, 0.3).sample(&g);
        let b1 =
            ScalarSymbol::separable(&f1, gaussian_window(l, CotangentVector { y: -1.0, x: 0.0 }, 0.5, 3.0)).unwrap();
        let b2 =
            ScalarSymbol::separable(&f2, gaussian_window(l, CotangentVector { y: 1.0, x: 1.0 }, 0.5, 3.0)).unwrap();
        let z = C64::new(0.3, -1.1);
        let lhs = op_scalar(&b1.add(&b2.scale(z)).unwrap()).unwrap();
        let rhs = op_scalar(&b1).unwrap().add(&op_scalar(&b2).unwrap().scale(z)).unwrap();
        assert!(lhs.relative_distance(&rhs).unwrap() < 1e-13);
    }
}
