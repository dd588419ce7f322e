//! Reference detectors.

use crate::cascade::{CascadeConfig, Fusion};
use crate::data::DataMatrix;
use crate::error::Result;
use crate::solver::{solve_all, ElasticNetConfig};

/// λ used by the ℓ1-thresholding preset; close to a pure ℓ1 program.
pub const L1_PRESET_LAMBDA: f64 = 0.99;

/// ℓ1 norm of each point's representation plus the solver flags. Higher
/// means more outlier-like.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Scores {
    pub scores: Vec<f64>,
    pub non_converged: Vec<usize>,
}

pub fn l1_thresholding_scores(x: &DataMatrix, en_cfg: &ElasticNetConfig) -> Result<L1Scores> {
    let rep = solve_all(x, en_cfg)?;
    Ok(L1Scores {
        scores: rep.columns().iter().map(|c| c.l1_norm()).collect(),
        non_converged: rep.non_converged(),
    })
}

/// Elastic-net settings for the ℓ1-thresholding baseline.
pub fn l1_preset() -> ElasticNetConfig {
    ElasticNetConfig {
        lambda: L1_PRESET_LAMBDA,
        ..ElasticNetConfig::default()
    }
}

/// Single-stage walk detector: one self-representation, one averaged walk.
pub fn rgraph_preset() -> CascadeConfig {
    CascadeConfig {
        num_stages: 1,
        walk_steps: 1000,
        en_config: ElasticNetConfig::default(),
        fusion: Fusion::UniformMean,
        renormalize_residuals: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::GammaMode;
    use ndarray::{array, Array2};

    #[test]
    fn orthogonal_columns_score_zero() {
        let x = DataMatrix::new(Array2::eye(5)).unwrap();
        let s = l1_thresholding_scores(&x, &l1_preset()).unwrap();
        assert_eq!(s.scores, vec![0.0; 5]);
        assert!(s.non_converged.is_empty());
    }

    #[test]
    fn duplicate_pair_scores() {
        let x = DataMatrix::new(array![[1.0, 1.0], [0.0, 0.0]]).unwrap();
        let cfg = ElasticNetConfig {
            lambda: 0.5,
            gamma_mode: GammaMode::Fixed(10.0),
            tol: 1e-10,
            ..Default::default()
        };
        let s = l1_thresholding_scores(&x, &cfg).unwrap();
        for v in s.scores {
            assert!((v - 9.5 / 10.5).abs() < 1e-8);
        }
    }

    #[test]
    fn rgraph_preset_values() {
        let p = rgraph_preset();
        assert_eq!(p.num_stages, 1);
        assert_eq!(p.walk_steps, 1000);
        assert_eq!(CascadeConfig::from_manifest(&p.to_manifest()).unwrap(), p);
    }
}
