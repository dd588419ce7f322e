//! Elastic-net self-representation.
//!
//! Each point `x_j` is expressed through the remaining points by minimizing
//!
//! ```text
//! (γ/2)‖x_j − X c‖² + λ‖c‖₁ + ((1−λ)/2)‖c‖²    with c_j = 0
//! ```
//!
//! independently per column. The problem is strongly convex for `λ < 1`, so
//! each column has a unique minimizer. We solve it with monotone accelerated
//! proximal gradient (FISTA momentum, adaptive restart, backtracking) on the
//! Gram matrix `XᵀX`; variable `j` is never part of column `j`'s problem, so
//! the diagonal of `C` is zero by construction.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped from the sparse output.
pub const DROP_TOLERANCE: f64 = 1e-12;

const POWER_ITERATIONS: usize = 30;

/// How the data-fidelity weight γ is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    /// Same γ for every column.
    Fixed(f64),
    /// Per-column `γ_j = α·λ / max_{i≠j} |x_iᵀ x_j|`, so the soft threshold
    /// sits at `1/α` of the strongest correlation.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticNetConfig {
    /// ℓ1/ℓ2 mixing weight, in `[0, 1)`.
    pub lambda: f64,
    pub gamma_mode: GammaMode,
    pub max_iters: usize,
    /// Relative KKT tolerance.
    pub tol: f64,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        Self {
            lambda: 0.9,
            gamma_mode: GammaMode::Relative(5.0),
            max_iters: 2000,
            tol: 1e-6,
        }
    }
}

impl ElasticNetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::config(format!("lambda must lie in [0, 1), got {}", self.lambda)));
        }
        match self.gamma_mode {
            GammaMode::Fixed(g) if !(g > 0.0 && g.is_finite()) => {
                return Err(Error::config(format!("fixed gamma must be > 0, got {g}")))
            }
            GammaMode::Relative(a) if !(a > 1.0 && a.is_finite()) => {
                return Err(Error::config(format!("relative alpha must be > 1, got {a}")))
            }
            _ => {}
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::config(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseColumn {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseColumn {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.indices.binary_search(&i) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    fn from_dense(dense: &Array1<f64>) -> Self {
        let mut out = SparseColumn::default();
        for (i, &v) in dense.iter().enumerate() {
            if v.abs() >= DROP_TOLERANCE {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    pub fn to_dense(&self, n: usize) -> Array1<f64> {
        let mut d = Array1::zeros(n);
        for (i, v) in self.iter() {
            d[i] = v;
        }
        d
    }
}

/// Outcome of one column's solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSolution {
    pub coeffs: SparseColumn,
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
    pub gamma: f64,
    /// Relative KKT residual at the returned iterate.
    pub kkt_residual: f64,
}

/// `N x N` coefficient matrix `C` stored by column, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfRepresentation {
    n: usize,
    columns: Vec<SparseColumn>,
    pub per_column_objective: Vec<f64>,
    pub per_column_iters: Vec<usize>,
    pub per_column_converged: Vec<bool>,
    pub per_column_gamma: Vec<f64>,
}

impl SelfRepresentation {
    /// Assembles a representation from columns, rejecting diagonal entries,
    /// out-of-range or unsorted indices, and non-finite values.
    pub fn from_columns(columns: Vec<SparseColumn>) -> Result<Self> {
        let n = columns.len();
        for (j, col) in columns.iter().enumerate() {
            if col.indices.len() != col.values.len() {
                return Err(Error::parse(format!("column {j}: index/value length mismatch")));
            }
            if col.indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::parse(format!("column {j}: indices not strictly increasing")));
            }
            if col.indices.iter().any(|&i| i >= n) {
                return Err(Error::Dimension(format!("column {j}: row index out of range")));
            }
            if col.indices.contains(&j) {
                return Err(Error::parse(format!("column {j}: nonzero diagonal entry")));
            }
            if col.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(format!("column {j}: non-finite coefficient")));
            }
        }
        Ok(Self {
            n,
            columns,
            per_column_objective: vec![f64::NAN; n],
            per_column_iters: vec![0; n],
            per_column_converged: vec![true; n],
            per_column_gamma: vec![f64::NAN; n],
        })
    }

    /// The all-zero representation on `n` points.
    pub fn zeros(n: usize) -> Self {
        Self::from_columns(vec![SparseColumn::default(); n]).expect("empty columns are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, j: usize) -> &SparseColumn {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[SparseColumn] {
        &self.columns
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j].get(i)
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(SparseColumn::nnz).sum()
    }

    /// `(row, col, value)` triplets sorted by `(col, row)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |(i, v)| (i, j, v)))
            .collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.n));
        for (i, j, v) in self.triplets() {
            d[[i, j]] = v;
        }
        d
    }

    pub fn non_converged(&self) -> Vec<usize> {
        self.per_column_converged
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn all_converged(&self) -> bool {
        self.per_column_converged.iter().all(|ok| *ok)
    }
}

/// Shared state for all column problems on one data matrix: the Gram matrix
/// and its spectral norm estimate.
pub struct SelfExpression {
    gram: Array2<f64>,
    gram_norm: f64,
    cfg: ElasticNetConfig,
}

impl SelfExpression {
    pub fn new(x: &DataMatrix, cfg: &ElasticNetConfig) -> Result<Self> {
        Self::from_values(x.values(), cfg)
    }

    pub(crate) fn from_values(x: ArrayView2<'_, f64>, cfg: &ElasticNetConfig) -> Result<Self> {
        cfg.validate()?;
        let gram = x.t().dot(&x);
        let gram_norm = largest_eigenvalue(&gram);
        Ok(Self {
            gram,
            gram_norm,
            cfg: *cfg,
        })
    }

    pub fn n(&self) -> usize {
        self.gram.nrows()
    }

    /// Largest eigenvalue of `XᵀX` estimated by power iteration.
    pub fn spectral_estimate(&self) -> f64 {
        self.gram_norm
    }

    /// `max_{i≠j} |x_iᵀ x_j|`.
    pub fn max_correlation(&self, j: usize) -> f64 {
        self.gram
            .row(j)
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    pub fn gamma(&self, j: usize) -> f64 {
        match self.cfg.gamma_mode {
            GammaMode::Fixed(g) => g,
            GammaMode::Relative(alpha) => relative_gamma(alpha, self.cfg.lambda, self.max_correlation(j)),
        }
    }

    pub fn solve_column(&self, j: usize) -> ColumnSolution {
        self.solve_column_traced(j, None)
    }

    pub fn solve_all(&self) -> SelfRepresentation {
        let n = self.n();
        let sols: Vec<ColumnSolution> = (0..n).into_par_iter().map(|j| self.solve_column(j)).collect();
        let mut rep = SelfRepresentation {
            n,
            columns: Vec::with_capacity(n),
            per_column_objective: Vec::with_capacity(n),
            per_column_iters: Vec::with_capacity(n),
            per_column_converged: Vec::with_capacity(n),
            per_column_gamma: Vec::with_capacity(n),
        };
        for s in sols {
            rep.columns.push(s.coeffs);
            rep.per_column_objective.push(s.objective);
            rep.per_column_iters.push(s.iters);
            rep.per_column_converged.push(s.converged);
            rep.per_column_gamma.push(s.gamma);
        }
        let failed = rep.non_converged().len();
        if failed > 0 {
            log::warn!("{failed} of {n} columns did not reach the KKT tolerance");
        }
        rep
    }

    /// Objective of column `j`'s problem at a dense coefficient vector.
    pub fn objective(&self, j: usize, c: ArrayView1<'_, f64>) -> f64 {
        let col = ColumnProblem::new(self, j);
        let supp = support(c);
        col.smooth(c, &supp) + self.cfg.lambda * c.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Relative KKT residual of column `j`'s problem at `c` (entry `j` ignored).
    pub fn kkt_residual(&self, j: usize, c: ArrayView1<'_, f64>) -> f64 {
        let col = ColumnProblem::new(self, j);
        let supp = support(c);
        let g = col.gradient(c, &supp);
        col.kkt(c, &g)
    }

    pub(crate) fn solve_column_traced(&self, j: usize, mut trace: Option<&mut Vec<f64>>) -> ColumnSolution {
        let prob = ColumnProblem::new(self, j);
        let n = self.n();
        let lambda = self.cfg.lambda;
        let ridge = 1.0 - lambda;

        let mut x = Array1::<f64>::zeros(n);
        let mut y = x.clone();
        let mut supp_x: Vec<usize> = Vec::new();
        let mut supp_y: Vec<usize> = Vec::new();
        let mut f_x = prob.smooth(x.view(), &supp_x);
        let mut g_x;
        let mut t = 1.0_f64;
        let mut lip = prob.gamma * self.gram_norm + ridge;
        let mut converged = false;
        let mut iters = 0;
        let mut kkt = f64::INFINITY;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(f_x);
        }

        let mut z = Array1::<f64>::zeros(n);
        while iters < self.cfg.max_iters {
            g_x = prob.gradient(x.view(), &supp_x);
            kkt = prob.kkt(x.view(), &g_x);
            if kkt <= self.cfg.tol {
                converged = true;
                break;
            }
            iters += 1;

            // objective changes use the exact quadratic expansion, which
            // avoids the cancellation in ‖x_j − Xc‖² near an exact fit
            let g_y = prob.gradient(y.view(), &supp_y);
            let supp_z = loop {
                let step = 1.0 / lip;
                let thresh = lambda * step;
                for i in 0..n {
                    z[i] = if i == j {
                        0.0
                    } else {
                        soft_threshold(y[i] - step * g_y[i], thresh)
                    };
                }
                let supp_z = support(z.view());
                let (curv, sq) = prob.curvature(&z, &y, &union(&supp_z, &supp_y));
                if curv <= lip * sq * (1.0 + 1e-12) {
                    break supp_z;
                }
                lip *= 2.0;
            };

            // monotone variant: only accept z if it does not increase the objective
            let x_prev = x.clone();
            let moved = union(&supp_z, &supp_x);
            let (curv, _) = prob.curvature(&z, &x, &moved);
            let mut delta = 0.5 * curv;
            for &i in &moved {
                delta += g_x[i] * (z[i] - x[i]) + lambda * (z[i].abs() - x[i].abs());
            }
            let accept = delta <= 0.0;
            if accept {
                x.assign(&z);
                supp_x = supp_z.clone();
                f_x += delta;
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(f_x);
            }

            // adaptive restart when the momentum direction opposes the step
            let restart = !accept || {
                let mut dot = 0.0;
                for i in union(&supp_z, &union(&supp_y, &support(x_prev.view()))) {
                    dot += (y[i] - z[i]) * (z[i] - x_prev[i]);
                }
                dot > 0.0
            };
            if restart {
                t = 1.0;
                y.assign(&x);
                supp_y = supp_x.clone();
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let a = t / t_next;
                let b = (t - 1.0) / t_next;
                for i in 0..n {
                    y[i] = x[i] + a * (z[i] - x[i]) + b * (x[i] - x_prev[i]);
                }
                y[j] = 0.0;
                supp_y = support(y.view());
                t = t_next;
            }
        }

        ColumnSolution {
            coeffs: SparseColumn::from_dense(&x),
            objective: f_x,
            iters,
            converged,
            gamma: prob.gamma,
            kkt_residual: kkt,
        }
    }
}

fn relative_gamma(alpha: f64, lambda: f64, mu: f64) -> f64 {
    if mu <= 0.0 {
        alpha
    } else if lambda > 0.0 {
        alpha * lambda / mu
    } else {
        alpha / mu
    }
}

/// Column `j`'s subproblem: smooth part `(γ/2)‖x_j − Xc‖² + ((1−λ)/2)‖c‖²`
/// evaluated through the Gram matrix.
struct ColumnProblem<'a> {
    gram: &'a Array2<f64>,
    j: usize,
    gamma: f64,
    lambda: f64,
}

impl<'a> ColumnProblem<'a> {
    fn new(se: &'a SelfExpression, j: usize) -> Self {
        Self {
            gram: &se.gram,
            j,
            gamma: se.gamma(j),
            lambda: se.cfg.lambda,
        }
    }

    fn smooth(&self, c: ArrayView1<'_, f64>, supp: &[usize]) -> f64 {
        let g = self.gram;
        let j = self.j;
        let mut quad = 0.0;
        let mut cross = 0.0;
        let mut sq = 0.0;
        for &k in supp {
            let ck = c[k];
            let row = g.row(k);
            let mut acc = 0.0;
            for &l in supp {
                acc += row[l] * c[l];
            }
            quad += ck * acc;
            cross += ck * row[j];
            sq += ck * ck;
        }
        // ‖x_j − Xc‖² can round slightly negative near an exact fit
        let fit = (quad - 2.0 * cross + g[[j, j]]).max(0.0);
        0.5 * self.gamma * fit + 0.5 * (1.0 - self.lambda) * sq
    }

    fn gradient(&self, c: ArrayView1<'_, f64>, supp: &[usize]) -> Array1<f64> {
        let g = self.gram;
        let mut out = g.row(self.j).mapv(|v| -v);
        for &k in supp {
            out.scaled_add(c[k], &g.row(k));
        }
        out.mapv_inplace(|v| self.gamma * v);
        for &k in supp {
            out[k] += (1.0 - self.lambda) * c[k];
        }
        out[self.j] = 0.0;
        out
    }

    /// `(dᵀHd, ‖d‖²)` for `d = a − b` restricted to `idx`, where `H` is the
    /// Hessian of the smooth part.
    fn curvature(&self, a: &Array1<f64>, b: &Array1<f64>, idx: &[usize]) -> (f64, f64) {
        let g = self.gram;
        let mut quad = 0.0;
        let mut sq = 0.0;
        for &k in idx {
            let dk = a[k] - b[k];
            if dk == 0.0 {
                continue;
            }
            let row = g.row(k);
            let mut acc = 0.0;
            for &l in idx {
                acc += row[l] * (a[l] - b[l]);
            }
            quad += dk * acc;
            sq += dk * dk;
        }
        (self.gamma * quad.max(0.0) + (1.0 - self.lambda) * sq, sq)
    }

    /// Worst violation of the optimality conditions divided by `1 + λ`.
    fn kkt(&self, c: ArrayView1<'_, f64>, g: &Array1<f64>) -> f64 {
        let lambda = self.lambda;
        let mut worst = 0.0_f64;
        for (i, (&ci, &gi)) in c.iter().zip(g.iter()).enumerate() {
            if i == self.j {
                continue;
            }
            let v = if ci != 0.0 {
                (gi + lambda * ci.signum()).abs()
            } else {
                (gi.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
        worst / (1.0 + lambda)
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn support(c: ArrayView1<'_, f64>) -> Vec<usize> {
    c.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Sorted union of two sorted index lists.
fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() && k < b.len() {
        match a[i].cmp(&b[k]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[k]);
                k += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                k += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[k..]);
    out
}

/// Power iteration for the largest eigenvalue of a symmetric PSD matrix,
/// started from the all-ones vector.
fn largest_eigenvalue(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = m.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        est = v.dot(&w);
        v = w / norm;
    }
    est.max(0.0)
}

/// Solves column `j`'s elastic-net problem.
pub fn solve_column(x: &DataMatrix, j: usize, cfg: &ElasticNetConfig) -> Result<ColumnSolution> {
    if j >= x.num_points() {
        return Err(Error::Dimension(format!(
            "column {j} out of range for N={}",
            x.num_points()
        )));
    }
    Ok(SelfExpression::new(x, cfg)?.solve_column(j))
}

/// Solves every column, in parallel. Per-column results do not depend on
/// the thread schedule.
pub fn solve_all(x: &DataMatrix, cfg: &ElasticNetConfig) -> Result<SelfRepresentation> {
    Ok(SelfExpression::new(x, cfg)?.solve_all())
}

/// Data-fidelity weight used for column `j`.
pub fn effective_gamma(x: &DataMatrix, j: usize, cfg: &ElasticNetConfig) -> f64 {
    match cfg.gamma_mode {
        GammaMode::Fixed(g) => g,
        GammaMode::Relative(alpha) => {
            let xj = x.column(j);
            let mu = (0..x.num_points())
                .filter(|&i| i != j)
                .fold(0.0_f64, |m, i| m.max(x.column(i).dot(&xj).abs()));
            relative_gamma(alpha, cfg.lambda, mu)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn fixed(lambda: f64, gamma: f64) -> ElasticNetConfig {
        ElasticNetConfig {
            lambda,
            gamma_mode: GammaMode::Fixed(gamma),
            max_iters: 5000,
            tol: 1e-9,
        }
    }

    /// Dense grid search of the one-variable problem for column 0 of a
    /// two-point dataset.
    fn grid_one_variable(xtx: f64, lambda: f64, gamma: f64, lo: f64, hi: f64) -> f64 {
        // both columns are unit norm
        let f = |c: f64| 0.5 * gamma * (1.0 - 2.0 * c * xtx + c * c) + lambda * c.abs() + 0.5 * (1.0 - lambda) * c * c;
        let steps = ((hi - lo) / 1e-6).round() as usize;
        let mut best = (f64::INFINITY, lo);
        for k in 0..=steps {
            let c = lo + k as f64 * 1e-6;
            let v = f(c);
            if v < best.0 {
                best = (v, c);
            }
        }
        best.1
    }

    #[test]
    fn duplicate_columns_match_grid_oracle() {
        let oracle = grid_one_variable(1.0, 0.5, 10.0, 0.0, 1.0);
        assert!((oracle - 9.5 / 10.5).abs() < 2e-6);
        let x = DataMatrix::new(array![[1.0, 1.0], [0.0, 0.0]]).unwrap();
        let sol = solve_column(&x, 0, &fixed(0.5, 10.0)).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.coeffs.indices, vec![1]);
        assert!((sol.coeffs.values[0] - oracle).abs() < 2e-6);
        assert!((sol.coeffs.values[0] - 0.904_761_904_761_904_8).abs() < 1e-8);
    }

    #[test]
    fn weak_correlation_is_thresholded_away() {
        let s = (1.0_f64 - 0.09).sqrt();
        let x = DataMatrix::new(array![[1.0, 0.3], [0.0, s]]).unwrap();
        assert!(grid_one_variable(0.3, 0.9, 1.0, -1.0, 1.0).abs() < 1e-6);
        let sol = solve_column(&x, 0, &fixed(0.9, 1.0)).unwrap();
        assert!(sol.coeffs.is_empty());
        assert!(sol.converged);
    }

    #[test]
    fn orthogonal_columns_give_zero() {
        let x = DataMatrix::new(Array2::eye(4)).unwrap();
        for cfg in [fixed(0.5, 3.0), ElasticNetConfig::default()] {
            let rep = solve_all(&x, &cfg).unwrap();
            assert_eq!(rep.nnz(), 0);
            assert!(rep.all_converged());
        }
    }

    #[test]
    fn duplicate_pair_is_symmetric() {
        let x = DataMatrix::new(array![[0.6, 0.6], [0.8, 0.8]]).unwrap();
        let rep = solve_all(&x, &fixed(0.5, 10.0)).unwrap();
        let d = rep.to_dense();
        assert_eq!(d[[0, 0]], 0.0);
        assert_eq!(d[[1, 1]], 0.0);
        assert!((d[[0, 1]] - 9.5 / 10.5).abs() < 1e-8);
        assert!((d[[1, 0]] - 9.5 / 10.5).abs() < 1e-8);
    }

    #[test]
    fn zero_budget_flags_every_column() {
        let x = DataMatrix::new(array![[1.0, 0.5, 0.2], [0.0, 0.5, 0.9]]).unwrap();
        let cfg = ElasticNetConfig {
            max_iters: 0,
            ..Default::default()
        };
        let rep = solve_all(&x, &cfg).unwrap();
        assert_eq!(rep.nnz(), 0);
        assert_eq!(rep.non_converged(), vec![0, 1, 2]);
    }

    #[test]
    fn relative_gamma_arithmetic() {
        assert_eq!(relative_gamma(5.0, 0.9, 0.5), 9.0);
        assert_eq!(relative_gamma(5.0, 0.9, 0.0), 5.0);
        let x = DataMatrix::new(array![[1.0, 0.5, 0.0], [0.0, 0.866, 1.0]]).unwrap();
        let cfg = ElasticNetConfig::default();
        let g = effective_gamma(&x, 0, &cfg);
        assert!((g - 9.0).abs() < 1e-12);
        let se = SelfExpression::new(&x, &cfg).unwrap();
        assert!((se.gamma(0) - g).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let bad = [
            ElasticNetConfig {
                lambda: 1.0,
                ..Default::default()
            },
            ElasticNetConfig {
                lambda: -0.1,
                ..Default::default()
            },
            ElasticNetConfig {
                gamma_mode: GammaMode::Relative(1.0),
                ..Default::default()
            },
            ElasticNetConfig {
                gamma_mode: GammaMode::Fixed(0.0),
                ..Default::default()
            },
            ElasticNetConfig {
                tol: 0.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
        assert!(ElasticNetConfig {
            lambda: 0.0,
            ..Default::default()
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn from_columns_rejects_diagonal() {
        let col = SparseColumn {
            indices: vec![0],
            values: vec![1.0],
        };
        assert!(SelfRepresentation::from_columns(vec![col, SparseColumn::default()]).is_err());
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let m = Array2::from_diag(&array![1.0, 4.0, 2.0]);
        assert!((largest_eigenvalue(&m) - 4.0).abs() < 1e-6);
    }

    fn random_data(seed: u64, d: usize, n: usize) -> DataMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = Array2::from_shape_fn((d, n), |_| rng.random_range(-1.0..1.0));
        crate::data::normalize_columns(&DataMatrix::new(v).unwrap()).data
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn objective_never_increases(seed in 0u64..10_000, d in 2usize..8, n in 2usize..10, j in 0usize..10) {
            let x = random_data(seed, d, n);
            let j = j % n;
            let se = SelfExpression::new(&x, &fixed(0.7, 20.0)).unwrap();
            let mut trace = Vec::new();
            se.solve_column_traced(j, Some(&mut trace));
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
            }
        }

        #[test]
        fn kkt_certificate_holds(seed in 0u64..10_000, d in 2usize..10, n in 2usize..12) {
            let x = random_data(seed, d, n);
            let cfg = ElasticNetConfig::default();
            let rep = solve_all(&x, &cfg).unwrap();
            prop_assert!(rep.all_converged());
            let se = SelfExpression::new(&x, &cfg).unwrap();
            for j in 0..n {
                let c = rep.column(j).to_dense(n);
                prop_assert_eq!(c[j], 0.0);
                prop_assert!(se.kkt_residual(j, c.view()) <= cfg.tol * 1.0001);
            }
        }

        #[test]
        fn permutation_equivariance(seed in 0u64..10_000, d in 2usize..8, n in 3usize..9, shift in 1usize..8) {
            let x = random_data(seed, d, n);
            let perm: Vec<usize> = (0..n).map(|k| (k + shift) % n).collect();
            let mut pv = Array2::zeros((d, n));
            for (new, &old) in perm.iter().enumerate() {
                pv.column_mut(new).assign(&x.column(old));
            }
            let px = DataMatrix::new(pv).unwrap();
            let cfg = ElasticNetConfig { tol: 1e-10, max_iters: 20_000, ..Default::default() };
            let a = solve_all(&x, &cfg).unwrap().to_dense();
            let b = solve_all(&px, &cfg).unwrap().to_dense();
            for p in 0..n {
                for q in 0..n {
                    prop_assert!((b[[p, q]] - a[[perm[p], perm[q]]]).abs() < 1e-7);
                }
            }
        }
    }
}
