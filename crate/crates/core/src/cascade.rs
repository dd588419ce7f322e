//! Multi-stage detector: each stage self-represents the residual left by the
//! previous stages, scores it with a walk seeded by the previous stage's
//! scores, and the per-stage scores are fused at the end.
//!
//! With `X̂⁰ = 0`, stage `i` sees `R^{i−1} = X − Σ_{j<i} X̂^j`, solves for
//! `C^i`, and reconstructs `X̂^i = R^{i−1} C^i`.
//!
//! By default the residual columns are scaled to unit norm before the solve
//! (`U = R D⁻¹`). Raw residuals of inliers are much shorter than those of
//! outliers, so without rescaling inliers get cheaply expressed through
//! outlier residuals and the walk mass drains into the outliers. The graph
//! is built from the coefficients solved on `U`; the reconstruction is
//! `X̂ = U C D = R (D⁻¹ C D)`, so the telescoping identity is unchanged.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;

use crate::data::{frobenius, normalize_in_place, DataMatrix};
use crate::error::{Error, Result};
use crate::solver::{ElasticNetConfig, GammaMode, SelfExpression, SelfRepresentation, SparseColumn};
use crate::walk::{averaged_walk, build_transition, ScoreVector};

/// A residual at or below this fraction of `‖X‖_F` counts as fully
/// reconstructed.
pub const ZERO_RESIDUAL_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Fusion {
    UniformMean,
    Weighted(Vec<f64>),
}

impl Fusion {
    fn validate(&self, stages: usize) -> Result<()> {
        if let Fusion::Weighted(w) = self {
            if w.len() != stages {
                return Err(Error::config(format!("{} fusion weights for {stages} stages", w.len())));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::config("fusion weights must be non-negative"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("fusion weights sum to {sum}, expected 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub num_stages: usize,
    pub walk_steps: usize,
    pub en_config: ElasticNetConfig,
    pub fusion: Fusion,
    /// Unit-normalize residual columns before the solve of every stage after
    /// the first (stage one always sees the input as given).
    pub renormalize_residuals: bool,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            num_stages: 3,
            walk_steps: 1000,
            en_config: ElasticNetConfig::default(),
            fusion: Fusion::UniformMean,
            renormalize_residuals: true,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_stages < 1 {
            return Err(Error::config("number of stages must be at least 1"));
        }
        if self.walk_steps < 1 {
            return Err(Error::config("walk steps must be at least 1"));
        }
        self.en_config.validate()?;
        self.fusion.validate(self.num_stages)
    }

    /// `key=value` lines describing every hyperparameter. Floats use the
    /// shortest representation that round-trips exactly.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let en = &self.en_config;
        let _ = writeln!(out, "stages={}", self.num_stages);
        let _ = writeln!(out, "walk_steps={}", self.walk_steps);
        let _ = writeln!(out, "lambda={:?}", en.lambda);
        match en.gamma_mode {
            GammaMode::Fixed(g) => {
                let _ = writeln!(out, "gamma_mode=fixed");
                let _ = writeln!(out, "gamma={g:?}");
            }
            GammaMode::Relative(a) => {
                let _ = writeln!(out, "gamma_mode=relative");
                let _ = writeln!(out, "alpha={a:?}");
            }
        }
        let _ = writeln!(out, "max_iters={}", en.max_iters);
        let _ = writeln!(out, "tol={:?}", en.tol);
        match &self.fusion {
            Fusion::UniformMean => {
                let _ = writeln!(out, "fusion=mean");
            }
            Fusion::Weighted(w) => {
                let _ = writeln!(out, "fusion=weighted");
                let list: Vec<String> = w.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "fusion_weights={}", list.join(","));
            }
        }
        let _ = writeln!(out, "renormalize_residuals={}", self.renormalize_residuals);
        out
    }

    /// Parses the keys written by [`CascadeConfig::to_manifest`]; unrelated
    /// keys are ignored so a full run manifest can be fed back in.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::parse(format!("manifest is missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> { get(k)?.parse::<f64>().map_err(|e| Error::parse(format!("`{k}`: {e}"))) };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse::<usize>()
                .map_err(|e| Error::parse(format!("`{k}`: {e}")))
        };
        let gamma_mode = match get("gamma_mode")? {
            "fixed" => GammaMode::Fixed(num("gamma")?),
            "relative" => GammaMode::Relative(num("alpha")?),
            other => return Err(Error::parse(format!("unknown gamma_mode `{other}`"))),
        };
        let fusion = match get("fusion")? {
            "mean" => Fusion::UniformMean,
            "weighted" => Fusion::Weighted(
                get("fusion_weights")?
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::parse(format!("fusion_weights: {e}")))
                    })
                    .collect::<Result<_>>()?,
            ),
            other => return Err(Error::parse(format!("unknown fusion `{other}`"))),
        };
        let renormalize_residuals = match get("renormalize_residuals")? {
            "true" => true,
            "false" => false,
            other => return Err(Error::parse(format!("renormalize_residuals: `{other}`"))),
        };
        Ok(Self {
            num_stages: int("stages")?,
            walk_steps: int("walk_steps")?,
            en_config: ElasticNetConfig {
                lambda: num("lambda")?,
                gamma_mode,
                max_iters: int("max_iters")?,
                tol: num("tol")?,
            },
            fusion,
            renormalize_residuals,
        })
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {}: expected key=value", lineno + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub coeffs: SelfRepresentation,
    /// This stage's reconstruction `X̂^i`.
    pub reconstruction: Array2<f64>,
    pub scores: ScoreVector,
    /// `‖X − Σ_{j≤i} X̂^j‖_F`.
    pub residual_norm: f64,
    /// True when the stage was skipped because the residual had vanished.
    pub skipped: bool,
    /// Norms of the residual columns the coefficients were solved on, when
    /// residuals were rescaled.
    pub column_scales: Option<Vec<f64>>,
}

impl StageResult {
    /// Coefficients `C'` with `X̂ = R C'` on the unscaled residual `R`.
    pub fn reconstruction_coeffs(&self) -> SelfRepresentation {
        let Some(scales) = &self.column_scales else {
            return self.coeffs.clone();
        };
        let columns = self
            .coeffs
            .columns()
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let mut out = SparseColumn::default();
                for (i, v) in col.iter() {
                    if scales[i] > 0.0 {
                        out.indices.push(i);
                        out.values.push(v * scales[j] / scales[i]);
                    }
                }
                out
            })
            .collect();
        SelfRepresentation::from_columns(columns).expect("rescaling keeps the sparsity pattern")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    pub stages: Vec<StageResult>,
    pub fused_scores: ScoreVector,
    pub config: CascadeConfig,
}

impl CascadeResult {
    /// `(stage, column)` pairs whose solve missed the KKT tolerance.
    pub fn non_converged(&self) -> Vec<(usize, usize)> {
        self.stages
            .iter()
            .enumerate()
            .flat_map(|(s, st)| st.coeffs.non_converged().into_iter().map(move |j| (s, j)))
            .collect()
    }

    pub fn stage_scores(&self) -> Vec<ScoreVector> {
        self.stages.iter().map(|s| s.scores.clone()).collect()
    }
}

/// `X − Σ X̂^j` over the given stages, recomputed from scratch.
pub fn residual(x: &DataMatrix, stages: &[StageResult]) -> Array2<f64> {
    let mut r = x.values().to_owned();
    for s in stages {
        r -= &s.reconstruction;
    }
    r
}

/// Combines per-stage scores into one probability vector.
pub fn fuse_scores(scores: &[ScoreVector], fusion: &Fusion) -> Result<ScoreVector> {
    let first = scores.first().ok_or_else(|| Error::config("no stage scores to fuse"))?;
    let n = first.len();
    if let Some(s) = scores.iter().find(|s| s.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: s.len(),
        });
    }
    fusion.validate(scores.len())?;
    let mut acc = vec![0.0; n];
    match fusion {
        Fusion::UniformMean => {
            for s in scores {
                for (a, v) in acc.iter_mut().zip(s.as_slice()) {
                    *a += v;
                }
            }
            let k = scores.len() as f64;
            acc.iter_mut().for_each(|a| *a /= k);
        }
        Fusion::Weighted(w) => {
            for (s, &wi) in scores.iter().zip(w) {
                for (a, v) in acc.iter_mut().zip(s.as_slice()) {
                    *a += wi * v;
                }
            }
        }
    }
    Ok(ScoreVector::renormalized(acc))
}

/// `R C` for a dense `R` and sparse `C`.
pub fn reconstruct(r: &Array2<f64>, c: &SelfRepresentation) -> Array2<f64> {
    let mut out = Array2::zeros(r.raw_dim());
    for (j, col) in c.columns().iter().enumerate() {
        let mut target = out.column_mut(j);
        for (i, v) in col.iter() {
            target.scaled_add(v, &r.column(i));
        }
    }
    out
}

/// Runs the full cascade on `x` (no input normalization is applied here).
pub fn run_cascade(x: &DataMatrix, cfg: &CascadeConfig) -> Result<CascadeResult> {
    cfg.validate()?;
    let n = x.num_points();
    let x_norm = x.frobenius_norm();
    let mut resid = x.values().to_owned();
    let mut stages: Vec<StageResult> = Vec::with_capacity(cfg.num_stages);
    let mut seed = ScoreVector::uniform(n);

    for stage in 0..cfg.num_stages {
        let resid_norm = frobenius(resid.view());
        if stage > 0 && resid_norm <= ZERO_RESIDUAL_RATIO * x_norm {
            log::info!("stage {}: residual vanished, reusing previous scores", stage + 1);
            stages.push(StageResult {
                coeffs: SelfRepresentation::zeros(n),
                reconstruction: Array2::zeros(resid.raw_dim()),
                scores: seed.clone(),
                residual_norm: resid_norm,
                skipped: true,
                column_scales: None,
            });
            continue;
        }

        let (coeffs, reconstruction, column_scales) = if cfg.renormalize_residuals && stage > 0 {
            let scales: Vec<f64> = resid.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
            let mut unit = resid.clone();
            normalize_in_place(&mut unit);
            let coeffs = SelfExpression::from_values(unit.view(), &cfg.en_config)?.solve_all();
            let mut rec = reconstruct(&unit, &coeffs);
            for (mut col, &d) in rec.columns_mut().into_iter().zip(&scales) {
                col.mapv_inplace(|v| v * d);
            }
            (coeffs, rec, Some(scales))
        } else {
            let coeffs = SelfExpression::from_values(resid.view(), &cfg.en_config)?.solve_all();
            let rec = reconstruct(&resid, &coeffs);
            (coeffs, rec, None)
        };

        let transition = build_transition(&coeffs);
        let scores = averaged_walk(&transition, &seed, cfg.walk_steps)?;
        resid -= &reconstruction;
        let residual_norm = frobenius(resid.view());
        log::debug!(
            "stage {}: nnz={} dangling={} residual={residual_norm:.3e}",
            stage + 1,
            coeffs.nnz(),
            transition.dangling.len()
        );
        seed = ScoreVector::renormalized(scores.as_slice().to_vec());
        stages.push(StageResult {
            coeffs,
            reconstruction,
            scores,
            residual_norm,
            skipped: false,
            column_scales,
        });
    }

    let fused_scores = fuse_scores(
        &stages.iter().map(|s| s.scores.clone()).collect::<Vec<_>>(),
        &cfg.fusion,
    )?;
    Ok(CascadeResult {
        stages,
        fused_scores,
        config: cfg.clone(),
    })
}
