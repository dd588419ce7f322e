//! Random walks on the self-representation graph.
//!
//! Point `i` links to point `j` with weight `|C_ji|`, i.e. the adjacency is
//! `A = |C|ᵀ`. Inliers are only represented by inliers, so a walker that
//! reaches the inlier set stays there and the walk's mass drains from the
//! outliers. Powers of a directed transition matrix need not converge, so we
//! score with the Cesàro average of the first `T` step distributions.

use crate::data::{Label, LabelVector};
use crate::error::{Error, Result};
use crate::solver::SelfRepresentation;

/// Row sums at or below this are treated as zero out-degree.
pub const DANGLING_TOLERANCE: f64 = 1e-12;

/// Row-stochastic transition matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    probs: Vec<f64>,
    /// Rows that had no outgoing weight and were replaced by the uniform row.
    pub dangling: Vec<usize>,
}

impl TransitionMatrix {
    /// Builds `P` from a dense list of rows. Rows whose sum is at or below
    /// the dangling tolerance become uniform.
    pub fn from_weights(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        let mut dangling = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::parse(format!("row {i}: weights must be finite and >= 0")));
            }
            let entries: Vec<(usize, f64)> = row.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect();
            push_row(&mut cols, &mut probs, &mut dangling, i, &entries);
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            probs,
            dangling,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Stored entries of row `i` (empty for dangling rows).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.probs[span].iter().copied())
    }

    pub fn is_dangling(&self, i: usize) -> bool {
        self.dangling.binary_search(&i).is_ok()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.is_dangling(i) {
            return 1.0 / self.n as f64;
        }
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, p)| p)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// One step of the chain: returns `π P`.
    pub fn step(&self, pi: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.n];
        self.step_into(pi, &mut next);
        next
    }

    fn step_into(&self, pi: &[f64], next: &mut [f64]) {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut spread = 0.0;
        for (i, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            if span.is_empty() {
                spread += mass;
                continue;
            }
            for (&j, &p) in self.cols[span.clone()].iter().zip(&self.probs[span]) {
                next[j] += mass * p;
            }
        }
        if spread != 0.0 {
            let share = spread / self.n as f64;
            next.iter_mut().for_each(|v| *v += share);
        }
    }
}

fn push_row(
    cols: &mut Vec<usize>,
    probs: &mut Vec<f64>,
    dangling: &mut Vec<usize>,
    i: usize,
    entries: &[(usize, f64)],
) {
    let total: f64 = entries.iter().map(|(_, w)| w).sum();
    if total <= DANGLING_TOLERANCE {
        dangling.push(i);
        return;
    }
    for &(j, w) in entries {
        cols.push(j);
        probs.push(w / total);
    }
}

/// Probability vector over the points. Low mass marks outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    /// Validates non-negativity and unit sum (within 1e-10).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Dimension("empty score vector".into()));
        }
        if let Some(v) = probs.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::parse(format!("score entry {v} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::parse(format!("scores sum to {sum}, expected 1")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Rescales nonnegative weights onto the simplex.
    pub(crate) fn renormalized(mut probs: Vec<f64>) -> Self {
        for v in probs.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            probs.iter_mut().for_each(|v| *v /= sum);
        }
        Self(probs)
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Forms `P` from `A = |C|ᵀ`: row `i` of `P` is column `i` of `|C|`
/// normalized to sum 1.
pub fn build_transition(c: &SelfRepresentation) -> TransitionMatrix {
    let n = c.n();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut cols = Vec::with_capacity(c.nnz());
    let mut probs = Vec::with_capacity(c.nnz());
    let mut dangling = Vec::new();
    let mut entries = Vec::new();
    for i in 0..n {
        entries.clear();
        entries.extend(c.column(i).iter().map(|(j, v)| (j, v.abs())));
        push_row(&mut cols, &mut probs, &mut dangling, i, &entries);
        row_ptr.push(cols.len());
    }
    TransitionMatrix {
        n,
        row_ptr,
        cols,
        probs,
        dangling,
    }
}

/// `(1/T) Σ_{t=1..T} π⁽⁰⁾ Pᵗ` by repeated vector-matrix products.
pub fn averaged_walk(p: &TransitionMatrix, pi0: &ScoreVector, steps: usize) -> Result<ScoreVector> {
    if pi0.len() != p.n() {
        return Err(Error::LengthMismatch {
            expected: p.n(),
            actual: pi0.len(),
        });
    }
    if steps == 0 {
        return Err(Error::config("walk steps must be at least 1"));
    }
    let mut current = pi0.as_slice().to_vec();
    let mut next = vec![0.0; p.n()];
    let mut acc = vec![0.0; p.n()];
    for _ in 0..steps {
        p.step_into(&current, &mut next);
        std::mem::swap(&mut current, &mut next);
        for (a, v) in acc.iter_mut().zip(&current) {
            *a += v;
        }
    }
    let scale = steps as f64;
    let out = acc
        .into_iter()
        .map(|v| {
            let v = v / scale;
            if v < 0.0 {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(ScoreVector::from_raw(out))
}

/// Label a point as an outlier iff its score is at most `epsilon`.
pub fn classify(scores: &ScoreVector, epsilon: f64) -> LabelVector {
    scores
        .as_slice()
        .iter()
        .map(|&s| if s <= epsilon { Label::Outlier } else { Label::Inlier })
        .collect()
}
