//! Runs the cascade, the single-stage detector and ℓ1-thresholding on a
//! few synthetic datasets and prints their AUCs.

use std::time::Instant;

use odcsr_core::{
    auc, generate_synthetic, l1_preset, l1_thresholding_scores, normalize_columns, run_cascade, CascadeConfig,
    Polarity, SyntheticSpec,
};

fn main() -> odcsr_core::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    for seed in 1..=seeds {
        let synth = generate_synthetic(&SyntheticSpec {
            ambient_dim: 50,
            num_subspaces: 3,
            subspace_dim: 4,
            inliers_per_subspace: 64,
            num_outliers: 34,
            noise_sigma: 0.01,
            rng_seed: seed,
        })?;
        let x = normalize_columns(&synth.data).data;
        let start = Instant::now();
        let res = run_cascade(
            &x,
            &CascadeConfig {
                renormalize_residuals: std::env::var("RAW_RESIDUALS").is_err(),
                ..Default::default()
            },
        )?;
        let elapsed = start.elapsed();
        let stage_aucs: Vec<f64> = res
            .stages
            .iter()
            .map(|s| auc(s.scores.as_slice(), &synth.labels, Polarity::LowIsOutlier))
            .collect::<Result<_, _>>()?;
        let fused = auc(res.fused_scores.as_slice(), &synth.labels, Polarity::LowIsOutlier)?;
        let l1 = l1_thresholding_scores(&x, &l1_preset())?;
        let l1_auc = auc(&l1.scores, &synth.labels, Polarity::HighIsOutlier)?;
        let norms: Vec<f64> = res.stages.iter().map(|s| s.residual_norm).collect();
        let iters: Vec<usize> = res
            .stages
            .iter()
            .map(|s| s.coeffs.per_column_iters.iter().max().copied().unwrap_or(0))
            .collect();
        println!(
            "seed {seed}: fused {fused:.4} stages {stage_aucs:.4?} l1 {l1_auc:.4} residuals {norms:.3?} max_iters {iters:?} nonconv {} ({:.2?})",
            res.non_converged().len(),
            elapsed
        );
    }
    Ok(())
}
