//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use odcsr_core::SelfRepresentation;

/// Objective of one column's problem computed directly from the data.
pub fn direct_objective(x: &Array2<f64>, j: usize, c: &Array1<f64>, lambda: f64, gamma: f64) -> f64 {
    let fit = &x.column(j) - &x.dot(c);
    0.5 * gamma * fit.dot(&fit) + lambda * c.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * (1.0 - lambda) * c.dot(c)
}

/// Projected gradient on the nonnegative split `c = u − v`, fixed step
/// `1 / (2γ‖X‖_F² + 1)`, at most 10⁶ iterations.
pub fn projected_gradient_oracle(x: &Array2<f64>, j: usize, lambda: f64, gamma: f64) -> Array1<f64> {
    let n = x.ncols();
    let gram = x.t().dot(x);
    let frob2: f64 = x.iter().map(|v| v * v).sum();
    let step = 1.0 / (2.0 * gamma * frob2 + 1.0);
    let mut u = Array1::<f64>::zeros(n);
    let mut v = Array1::<f64>::zeros(n);
    for _ in 0..1_000_000 {
        let c = &u - &v;
        let mut shared = gram.dot(&c) - gram.column(j);
        shared.mapv_inplace(|s| gamma * s);
        let mut changed = false;
        for i in 0..n {
            if i == j {
                continue;
            }
            let gu = shared[i] + lambda + (1.0 - lambda) * u[i];
            let gv = -shared[i] + lambda + (1.0 - lambda) * v[i];
            let nu = (u[i] - step * gu).max(0.0);
            let nv = (v[i] - step * gv).max(0.0);
            changed |= nu != u[i] || nv != v[i];
            u[i] = nu;
            v[i] = nv;
        }
        if !changed {
            break;
        }
    }
    &u - &v
}

/// Independent KKT check: returns the worst violation relative to the
/// certificate bounds (≤ 0 means the certificate holds).
pub fn kkt_violation(x: &Array2<f64>, j: usize, c: &Array1<f64>, lambda: f64, gamma: f64, tol: f64) -> f64 {
    let g = (x.t().dot(&(x.dot(c) - x.column(j)))).mapv(|v| gamma * v) + c.mapv(|v| (1.0 - lambda) * v);
    let bound = tol * (1.0 + lambda);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..c.len() {
        if i == j {
            continue;
        }
        let v = if c[i] != 0.0 {
            (g[i] + lambda * c[i].signum()).abs() - bound
        } else {
            g[i].abs() - (lambda + bound)
        };
        worst = worst.max(v);
    }
    worst
}

/// Dense transition matrix: row `i` is column `i` of `|C|`, normalized; empty rows are uniform.
pub fn dense_transition(c: &SelfRepresentation) -> Array2<f64> {
    let n = c.n();
    let a = c.to_dense().t().mapv(f64::abs);
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        let d: f64 = a.row(i).sum();
        if d <= 1e-12 {
            p.row_mut(i).fill(1.0 / n as f64);
        } else {
            p.row_mut(i).assign(&(&a.row(i) / d));
        }
    }
    p
}

/// `(1/T) Σ π₀ Pᵗ` with every power `Pᵗ` materialized.
pub fn matrix_power_oracle(p: &Array2<f64>, pi0: &Array1<f64>, steps: usize) -> Array1<f64> {
    let n = p.nrows();
    let mut power = Array2::<f64>::eye(n);
    let mut acc = Array1::<f64>::zeros(n);
    for _ in 0..steps {
        power = power.dot(p);
        acc += &pi0.dot(&power);
    }
    acc / steps as f64
}
