//! Sampled `L²(G)` functions and integral operators on a group grid.
//!
//! A [`SampledFunction`] holds nodal values and, optionally, an evaluator
//! that can be called at any group point.  Operations that need values off
//! the grid (convolution, involutions, kernel pullbacks) use the evaluator
//! when present and fall back to [`GroupGrid::interpolate`] otherwise.
//!
//! A [`DenseOperator`] stores its integral kernel `K(x, y)`; the Haar weights
//! are implicit, so `(Tu)(x) = Σ_y K(x, y) w(y) u(y)`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::group::{inverse, modular, multiply, GroupGrid, GroupPoint};
use crate::C64;

/// Closed-form rule for evaluating a function anywhere on the group.
pub type Evaluator = Arc<dyn Fn(&GroupPoint) -> C64 + Send + Sync>;

#[derive(Clone)]
pub struct SampledFunction {
    grid: Arc<GroupGrid>,
    values: Vec<C64>,
    evaluator: Option<Evaluator>,
}

impl fmt::Debug for SampledFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledFunction")
            .field("backend", &self.grid.backend())
            .field("len", &self.values.len())
            .field("has_evaluator", &self.evaluator.is_some())
            .finish()
    }
}

impl SampledFunction {
    pub fn new(grid: Arc<GroupGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values on a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        Ok(SampledFunction {
            grid,
            values,
            evaluator: None,
        })
    }

    pub fn zeros(grid: Arc<GroupGrid>) -> Self {
        let n = grid.len();
        SampledFunction {
            grid,
            values: vec![C64::new(0.0, 0.0); n],
            evaluator: None,
        }
    }

    /// Sample a closed form on the grid and keep it as the evaluator.
    pub fn from_fn(grid: Arc<GroupGrid>, f: impl Fn(&GroupPoint) -> C64 + Send + Sync + 'static) -> Self {
        let values = grid.nodes().iter().map(&f).collect();
        SampledFunction {
            grid,
            values,
            evaluator: Some(Arc::new(f)),
        }
    }

    pub fn from_evaluator(grid: Arc<GroupGrid>, f: Evaluator) -> Self {
        let values = grid.nodes().iter().map(|x| f(x)).collect();
        SampledFunction {
            grid,
            values,
            evaluator: Some(f),
        }
    }

    /// Unit mass at node `i`: value `1/w_i` there, zero elsewhere.
    pub fn delta(grid: Arc<GroupGrid>, i: usize) -> Self {
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        values[i] = C64::new(1.0 / grid.weight(i), 0.0);
        SampledFunction {
            grid,
            values,
            evaluator: None,
        }
    }

    pub fn grid(&self) -> &Arc<GroupGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn evaluator(&self) -> Option<&Evaluator> {
        self.evaluator.as_ref()
    }

    /// Attach an evaluator; it must agree with the nodal values.
    pub fn with_evaluator(mut self, f: Evaluator) -> Self {
        self.evaluator = Some(f);
        self
    }

    pub fn without_evaluator(&self) -> Self {
        SampledFunction {
            grid: self.grid.clone(),
            values: self.values.clone(),
            evaluator: None,
        }
    }

    /// Value at an arbitrary point.
    pub fn eval(&self, x: &GroupPoint) -> C64 {
        match &self.evaluator {
            Some(f) => f(x),
            None => match self.grid.locate(x) {
                Some(i) => self.values[i],
                None => self.grid.interpolate(&self.values, x),
            },
        }
    }

    /// A callable that evaluates this function anywhere.
    pub fn to_evaluator(&self) -> Evaluator {
        match &self.evaluator {
            Some(f) => f.clone(),
            None => {
                let this = self.without_evaluator();
                Arc::new(move |x| this.eval(x))
            }
        }
    }

    fn check_grid(&self, other: &SampledFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Pointwise `h(f(x), x)`, keeping an evaluator if there is one.
    pub fn map_pointwise(&self, h: impl Fn(C64, &GroupPoint) -> C64 + Send + Sync + 'static) -> Self {
        let h = Arc::new(h);
        let values = self
            .values
            .iter()
            .zip(self.grid.nodes())
            .map(|(v, x)| h(*v, x))
            .collect();
        let evaluator = self.evaluator.clone().map(|f| {
            let h = h.clone();
            Arc::new(move |x: &GroupPoint| h(f(x), x)) as Evaluator
        });
        SampledFunction {
            grid: self.grid.clone(),
            values,
            evaluator,
        }
    }

    /// `Δ^power · f`.
    pub fn modular_scaled(&self, power: f64) -> Self {
        self.map_pointwise(move |v, x| v * modular(x).powf(power))
    }

    pub fn scale(&self, z: C64) -> Self {
        self.map_pointwise(move |v, _| v * z)
    }

    pub fn conj(&self) -> Self {
        self.map_pointwise(|v, _| v.conj())
    }

    fn zip_with(&self, other: &SampledFunction, op: fn(C64, C64) -> C64) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| op(*a, *b)).collect();
        let evaluator = match (&self.evaluator, &other.evaluator) {
            (Some(f), Some(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Some(Arc::new(move |x: &GroupPoint| op(f(x), g(x))) as Evaluator)
            }
            _ => None,
        };
        Ok(SampledFunction {
            grid: self.grid.clone(),
            values,
            evaluator,
        })
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Write `node_index,b,a,re,im` (affine) or `node_index,k,re,im` (cyclic).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let affine = self.grid.affine().is_some();
        if affine {
            w.write_record(["node_index", "b", "a", "re", "im"])?;
        } else {
            w.write_record(["node_index", "k", "re", "im"])?;
        }
        for (i, (x, v)) in self.grid.nodes().iter().zip(&self.values).enumerate() {
            match *x {
                GroupPoint::Affine { b, a } => w.write_record(&[
                    i.to_string(),
                    b.to_string(),
                    a.to_string(),
                    v.re.to_string(),
                    v.im.to_string(),
                ])?,
                GroupPoint::Cyclic { k, .. } => {
                    w.write_record(&[i.to_string(), k.to_string(), v.re.to_string(), v.im.to_string()])?
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a file written by [`SampledFunction::write_csv`]; coordinates are
    /// checked against the grid.
    pub fn read_csv(grid: Arc<GroupGrid>, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        let mut seen = vec![false; grid.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::ShapeMismatch(format!("bad csv field {i} in {rec:?}")))
            };
            let idx = field(0)? as usize;
            if idx >= grid.len() {
                return Err(Error::ShapeMismatch(format!("node index {idx} out of range")));
            }
            let (re, im) = match grid.node(idx) {
                GroupPoint::Affine { b, a } => {
                    let (fb, fa) = (field(1)?, field(2)?);
                    if (fb - b).abs() > 1e-9 * (1.0 + b.abs()) || (fa - a).abs() > 1e-9 * a {
                        return Err(Error::GridMismatch);
                    }
                    (field(3)?, field(4)?)
                }
                GroupPoint::Cyclic { k, .. } => {
                    if field(1)? as usize != k {
                        return Err(Error::GridMismatch);
                    }
                    (field(2)?, field(3)?)
                }
            };
            values[idx] = C64::new(re, im);
            seen[idx] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::ShapeMismatch("csv does not cover every node".into()));
        }
        SampledFunction::new(grid, values)
    }
}

/// `⟨u, v⟩ = Σ_x w(x) u(x) conj(v(x))`, linear in the first argument.
pub fn inner(u: &SampledFunction, v: &SampledFunction) -> Result<C64> {
    u.check_grid(v)?;
    Ok(u.values
        .iter()
        .zip(&v.values)
        .zip(u.grid.weights())
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum())
}

/// `(f ∗ g)(x) = Σ_y w(y) f(y) g(y⁻¹x)`.
///
/// The result carries an evaluator that performs the same quadrature at any
/// point, so it can be fed into further off-grid operations.
pub fn convolve(f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    f.check_grid(g)?;
    let grid = f.grid.clone();
    let terms: Arc<Vec<(GroupPoint, C64)>> = Arc::new(
        grid.nodes()
            .iter()
            .zip(&f.values)
            .zip(grid.weights())
            .filter(|((_, v), _)| v.norm_sqr() > 0.0)
            .map(|((y, v), w)| (inverse(y), v * *w))
            .collect(),
    );
    let ge = g.to_evaluator();
    let rule: Evaluator = Arc::new(move |x: &GroupPoint| {
        terms
            .iter()
            .map(|(yinv, c)| c * ge(&multiply(yinv, x).expect("same backend")))
            .sum()
    });
    Ok(SampledFunction::from_evaluator(grid, rule))
}

/// `f*(x) = Δ(x)^{-1/p} conj(f(x⁻¹))`.
pub fn involution_p(f: &SampledFunction, p: f64) -> Result<SampledFunction> {
    if !(p >= 1.0) {
        return Err(Error::Config(format!("involution exponent p must be >= 1, got {p}")));
    }
    let fe = f.to_evaluator();
    let rule: Evaluator = Arc::new(move |x: &GroupPoint| modular(x).powf(-1.0 / p) * fe(&inverse(x)).conj());
    Ok(SampledFunction::from_evaluator(f.grid.clone(), rule))
}

/// `g♭(x) = conj(g(x⁻¹))`.
pub fn flat(g: &SampledFunction) -> SampledFunction {
    let ge = g.to_evaluator();
    let rule: Evaluator = Arc::new(move |x: &GroupPoint| ge(&inverse(x)).conj());
    SampledFunction::from_evaluator(g.grid.clone(), rule)
}

/// Integral operator with kernel `K(x, y)` against the Haar weights.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    grid: Arc<GroupGrid>,
    kernel: DMatrix<C64>,
}

impl DenseOperator {
    pub fn from_kernel(grid: Arc<GroupGrid>, kernel: DMatrix<C64>) -> Result<Self> {
        let n = grid.len();
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} kernel on {n} nodes",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        Ok(DenseOperator { grid, kernel })
    }

    pub fn from_fn(grid: Arc<GroupGrid>, k: impl Fn(usize, usize) -> C64) -> Self {
        let n = grid.len();
        DenseOperator {
            grid,
            kernel: DMatrix::from_fn(n, n, k),
        }
    }

    pub fn zeros(grid: Arc<GroupGrid>) -> Self {
        let n = grid.len();
        DenseOperator {
            grid,
            kernel: DMatrix::zeros(n, n),
        }
    }

    /// Kernel `δ_{xy} / w(x)`.
    pub fn identity(grid: Arc<GroupGrid>) -> Self {
        let n = grid.len();
        let mut kernel = DMatrix::zeros(n, n);
        for i in 0..n {
            kernel[(i, i)] = C64::new(1.0 / grid.weight(i), 0.0);
        }
        DenseOperator { grid, kernel }
    }

    /// Operator with matrix `M` acting on nodal values, `(Tu)_i = Σ_j M_ij u_j`.
    pub fn from_matrix(grid: Arc<GroupGrid>, mut m: DMatrix<C64>) -> Result<Self> {
        let n = grid.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::ShapeMismatch("matrix does not match grid".into()));
        }
        for j in 0..n {
            let w = grid.weight(j);
            m.column_mut(j).iter_mut().for_each(|z| *z /= w);
        }
        Ok(DenseOperator { grid, kernel: m })
    }

    /// Matrix acting on nodal values: `K · diag(w)`.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let mut m = self.kernel.clone();
        for j in 0..self.dim() {
            let w = self.grid.weight(j);
            m.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        m
    }

    pub fn grid(&self) -> &Arc<GroupGrid> {
        &self.grid
    }

    pub fn kernel(&self) -> &DMatrix<C64> {
        &self.kernel
    }

    pub fn into_kernel(self) -> DMatrix<C64> {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.kernel.nrows()
    }

    fn check(&self, other: &DenseOperator) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn apply(&self, u: &SampledFunction) -> Result<SampledFunction> {
        if !self.grid.same_as(u.grid()) {
            return Err(Error::GridMismatch);
        }
        let wu: Vec<C64> = u
            .values()
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v * *w)
            .collect();
        let out = &self.kernel * nalgebra::DVector::from_vec(wu);
        SampledFunction::new(self.grid.clone(), out.data.into())
    }

    fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|c| (0..n).all(|r| r == c || self.kernel[(r, c)] == C64::new(0.0, 0.0)))
    }

    /// `S ∘ T`, kernel `Σ_y S(x,y) w(y) T(y,z)`.
    pub fn compose(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.check(other)?;
        let n = self.dim();
        if self.is_diagonal() {
            let d: Vec<C64> = (0..n).map(|i| self.kernel[(i, i)] * self.grid.weight(i)).collect();
            return Ok(other.left_scaled(&d));
        }
        if other.is_diagonal() {
            let d: Vec<C64> = (0..n).map(|i| other.kernel[(i, i)] * self.grid.weight(i)).collect();
            return Ok(self.right_scaled(&d));
        }
        let rhs = DenseOperator::from_kernel(self.grid.clone(), other.kernel.clone())?.left_scaled(
            &self
                .grid
                .weights()
                .iter()
                .map(|w| C64::new(*w, 0.0))
                .collect::<Vec<_>>(),
        );
        Ok(DenseOperator {
            grid: self.grid.clone(),
            kernel: &self.kernel * rhs.kernel,
        })
    }

    /// Kernel `d(x) K(x, y)`: composition with a multiplication operator on the left.
    pub fn left_scaled(&self, d: &[C64]) -> DenseOperator {
        let mut k = self.kernel.clone();
        for (r, mut row) in k.row_iter_mut().enumerate() {
            row.iter_mut().for_each(|z| *z *= d[r]);
        }
        DenseOperator {
            grid: self.grid.clone(),
            kernel: k,
        }
    }

    /// Kernel `K(x, y) d(y)`: composition with a multiplication operator on the right.
    pub fn right_scaled(&self, d: &[C64]) -> DenseOperator {
        let mut k = self.kernel.clone();
        for (c, mut col) in k.column_iter_mut().enumerate() {
            col.iter_mut().for_each(|z| *z *= d[c]);
        }
        DenseOperator {
            grid: self.grid.clone(),
            kernel: k,
        }
    }

    /// Kernel `conj(K(y, x))`.
    pub fn adjoint(&self) -> DenseOperator {
        DenseOperator {
            grid: self.grid.clone(),
            kernel: self.kernel.adjoint(),
        }
    }

    pub fn add(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.check(other)?;
        Ok(DenseOperator {
            grid: self.grid.clone(),
            kernel: &self.kernel + &other.kernel,
        })
    }

    pub fn sub(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.check(other)?;
        Ok(DenseOperator {
            grid: self.grid.clone(),
            kernel: &self.kernel - &other.kernel,
        })
    }

    pub fn scale(&self, z: C64) -> DenseOperator {
        DenseOperator {
            grid: self.grid.clone(),
            kernel: &self.kernel * z,
        }
    }

    /// `Σ_x w(x) K(x, x)`.
    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.kernel[(i, i)] * self.grid.weight(i)).sum()
    }

    /// `⟨S, T⟩ = Σ_{x,y} w(x) w(y) S(x,y) conj(T(x,y))`.
    pub fn hs_inner(&self, other: &DenseOperator) -> Result<C64> {
        self.check(other)?;
        let w = self.grid.weights();
        let mut acc = C64::new(0.0, 0.0);
        for c in 0..self.dim() {
            let mut col = C64::new(0.0, 0.0);
            for r in 0..self.dim() {
                col += self.kernel[(r, c)] * other.kernel[(r, c)].conj() * w[r];
            }
            acc += col * w[c];
        }
        Ok(acc)
    }

    pub fn hs_norm_sqr(&self) -> f64 {
        let w = self.grid.weights();
        let mut acc = 0.0;
        for c in 0..self.dim() {
            let col: f64 = self
                .kernel
                .column(c)
                .iter()
                .zip(w)
                .map(|(z, wr)| z.norm_sqr() * wr)
                .sum();
            acc += col * w[c];
        }
        acc
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sqr().sqrt()
    }

    /// `‖S − T‖_HS / ‖T‖_HS`.
    pub fn relative_distance(&self, reference: &DenseOperator) -> Result<f64> {
        Ok(self.sub(reference)?.hs_norm() / reference.hs_norm())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row", "col", "re", "im"])?;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let z = self.kernel[(r, c)];
                if z != C64::new(0.0, 0.0) {
                    w.write_record(&[r.to_string(), c.to_string(), z.re.to_string(), z.im.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `Mult_f`, kernel `f(x) δ_{xy} / w(x)`.
pub fn mult_op(f: &SampledFunction) -> DenseOperator {
    let grid = f.grid().clone();
    let n = grid.len();
    let mut kernel = DMatrix::zeros(n, n);
    for i in 0..n {
        kernel[(i, i)] = f.values()[i] / grid.weight(i);
    }
    DenseOperator { grid, kernel }
}

/// `Conv^L_g u = g ∗ u`, kernel `g(xy⁻¹) Δ(y)^{-1}`.
pub fn conv_op_left(g: &SampledFunction) -> DenseOperator {
    let grid = g.grid().clone();
    let nodes = grid.nodes().to_vec();
    let inv: Vec<GroupPoint> = nodes.iter().map(inverse).collect();
    let ge = g.to_evaluator();
    DenseOperator::from_fn(grid.clone(), |r, c| {
        let z = multiply(&nodes[r], &inv[c]).expect("same backend");
        ge(&z) / modular(&nodes[c]).value()
    })
}

/// `Conv^R_g u = u ∗ g`, kernel `g(y⁻¹x)`.
pub fn conv_op_right(g: &SampledFunction) -> DenseOperator {
    let grid = g.grid().clone();
    let nodes = grid.nodes().to_vec();
    let inv: Vec<GroupPoint> = nodes.iter().map(inverse).collect();
    let ge = g.to_evaluator();
    DenseOperator::from_fn(grid.clone(), |r, c| {
        ge(&multiply(&inv[c], &nodes[r]).expect("same backend"))
    })
}

/// `‖u − v‖ / ‖v‖`.
pub fn relative_l2(u: &SampledFunction, reference: &SampledFunction) -> Result<f64> {
    Ok(u.sub(reference)?.norm() / reference.norm())
}
