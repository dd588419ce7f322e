//! Dataset containers, column normalization and a synthetic union-of-subspaces
//! generator.
//!
//! Points are stored as columns: a `DataMatrix` with `D` rows and `N` columns
//! holds `N` points of dimension `D`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Column-major dataset, one point per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    point_ids: Option<Vec<String>>,
}

impl DataMatrix {
    /// Wraps a `D x N` matrix. Fails on non-finite entries or fewer than two
    /// points.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 points, got N={}",
                values.ncols()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::Dimension("feature dimension is zero".into()));
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Dimension(format!("non-finite entry {v} at row {r}, column {c}")));
        }
        Ok(Self {
            values,
            point_ids: None,
        })
    }

    /// Builds a matrix from a list of points (each inner vector is one point).
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(Error::Dimension(format!(
                "point {i} has {} features, expected {dim}",
                p.len()
            )));
        }
        let mut values = Array2::zeros((dim, points.len()));
        for (j, p) in points.iter().enumerate() {
            for (i, &v) in p.iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        Self::new(values)
    }

    pub fn with_point_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.num_points() {
            return Err(Error::LengthMismatch {
                expected: self.num_points(),
                actual: ids.len(),
            });
        }
        self.point_ids = Some(ids);
        Ok(self)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn point_ids(&self) -> Option<&[String]> {
        self.point_ids.as_deref()
    }

    /// Identifier of point `j`: the supplied id, or its index.
    pub fn point_id(&self, j: usize) -> String {
        match &self.point_ids {
            Some(ids) => ids[j].clone(),
            None => j.to_string(),
        }
    }

    /// Feature dimension `D`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of points `N`.
    pub fn num_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(self.values.view())
    }
}

pub(crate) fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Inlier,
    Outlier,
}

impl Label {
    pub fn is_outlier(self) -> bool {
        matches!(self, Label::Outlier)
    }
}

/// Ground-truth or predicted labels, one per point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVector(pub Vec<Label>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn num_outliers(&self) -> usize {
        self.0.iter().filter(|l| l.is_outlier()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        self.0.iter().copied()
    }

    pub fn check_matches(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: self.len(),
            });
        }
        Ok(())
    }
}

impl FromIterator<Label> for LabelVector {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        LabelVector(iter.into_iter().collect())
    }
}

/// Result of column normalization.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub data: DataMatrix,
    /// Indices of all-zero columns that were left untouched.
    pub zero_columns: Vec<usize>,
}

/// Scales every nonzero column to unit Euclidean norm. Zero columns stay zero
/// and are reported.
pub fn normalize_columns(x: &DataMatrix) -> Normalized {
    let mut values = x.values.clone();
    let zero_columns = normalize_in_place(&mut values);
    for &j in &zero_columns {
        log::warn!("column {} ({}) is all zeros; left unnormalized", j, x.point_id(j));
    }
    Normalized {
        data: DataMatrix {
            values,
            point_ids: x.point_ids.clone(),
        },
        zero_columns,
    }
}

/// Normalizes the columns of `m` in place and returns the indices of zero
/// columns.
pub(crate) fn normalize_in_place(m: &mut Array2<f64>) -> Vec<usize> {
    let mut zeros = Vec::new();
    for (j, mut col) in m.axis_iter_mut(Axis(1)).enumerate() {
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            zeros.push(j);
        } else if norm != 1.0 {
            col.mapv_inplace(|v| v / norm);
        }
    }
    zeros
}

/// Parameters of a synthetic union-of-subspaces dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub ambient_dim: usize,
    pub num_subspaces: usize,
    pub subspace_dim: usize,
    pub inliers_per_subspace: usize,
    pub num_outliers: usize,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_subspaces < 1 {
            return Err(Error::config("need at least one subspace"));
        }
        if self.subspace_dim < 1 || self.inliers_per_subspace < 1 || self.num_outliers < 1 {
            return Err(Error::config(
                "subspace dimension, inlier count and outlier count must be positive",
            ));
        }
        if self.subspace_dim >= self.ambient_dim {
            return Err(Error::config(format!(
                "subspace dimension {} must be below ambient dimension {}",
                self.subspace_dim, self.ambient_dim
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise sigma must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.num_subspaces * self.inliers_per_subspace + self.num_outliers
    }
}

/// A generated dataset together with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub data: DataMatrix,
    pub labels: LabelVector,
    /// Orthonormal `D x d` basis of each subspace.
    pub bases: Vec<Array2<f64>>,
    /// Generating subspace of each point, `None` for outliers.
    pub membership: Vec<Option<usize>>,
}

/// Draws inliers from `K` random `d`-dimensional subspaces followed by
/// outliers uniform on the unit sphere. Inliers of subspace `k` occupy
/// columns `k*m .. (k+1)*m`; outliers are the trailing columns.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let dim = spec.ambient_dim;
    let n = spec.num_points();
    let mut values = Array2::zeros((dim, n));
    let mut labels = Vec::with_capacity(n);
    let mut membership = Vec::with_capacity(n);
    let mut bases = Vec::with_capacity(spec.num_subspaces);

    let mut col = 0;
    for k in 0..spec.num_subspaces {
        let basis = random_orthonormal(dim, spec.subspace_dim, &mut rng);
        for _ in 0..spec.inliers_per_subspace {
            let mut coef = gaussian_vector(spec.subspace_dim, &mut rng);
            normalize_vec(&mut coef);
            let mut point = basis.dot(&coef);
            if spec.noise_sigma > 0.0 {
                let noise = gaussian_vector(dim, &mut rng);
                point.scaled_add(spec.noise_sigma, &noise);
                normalize_vec(&mut point);
            }
            values.column_mut(col).assign(&point);
            labels.push(Label::Inlier);
            membership.push(Some(k));
            col += 1;
        }
        bases.push(basis);
    }
    for _ in 0..spec.num_outliers {
        let mut point = gaussian_vector(dim, &mut rng);
        normalize_vec(&mut point);
        values.column_mut(col).assign(&point);
        labels.push(Label::Outlier);
        membership.push(None);
        col += 1;
    }

    Ok(SyntheticData {
        data: DataMatrix::new(values)?,
        labels: LabelVector(labels),
        bases,
        membership,
    })
}

fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| StandardNormal.sample(rng))
}

fn normalize_vec(v: &mut Array1<f64>) {
    let norm = v.dot(v).sqrt();
    if norm > 0.0 {
        v.mapv_inplace(|x| x / norm);
    }
}

/// Gaussian matrix orthonormalized by modified Gram-Schmidt (with one
/// reorthogonalization pass).
fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut q = Array2::<f64>::zeros((rows, cols));
    let mut k = 0;
    while k < cols {
        let mut v = gaussian_vector(rows, rng);
        for _ in 0..2 {
            for i in 0..k {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v.scaled_add(-proj, &qi);
            }
        }
        let norm = v.dot(&v).sqrt();
        // a near-degenerate draw is simply redrawn
        if norm < 1e-8 {
            continue;
        }
        v.mapv_inplace(|x| x / norm);
        q.column_mut(k).assign(&v);
        k += 1;
    }
    q
}
