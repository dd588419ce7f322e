use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use odcsr_core::io::{self, MatrixFormat, RunInfo};
use odcsr_core::{
    classify, f1_at_count, fuse_scores, generate_synthetic, l1_preset, l1_thresholding_scores, normalize_columns,
    run_cascade, CascadeConfig, CascadeResult, DataMatrix, ElasticNetConfig, Error, EvalReport, Fusion, GammaMode,
    LabelVector, Polarity, SyntheticSpec,
};

use crate::{BenchArgs, DetectArgs, FusionArg, InputArgs, SolverArgs, SynthArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Config(_)) => 2,
            CliError::Core(_) => 1,
            CliError::NotConverged(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn en_config(s: &SolverArgs) -> ElasticNetConfig {
    ElasticNetConfig {
        lambda: s.lambda,
        gamma_mode: match s.gamma {
            Some(g) => GammaMode::Fixed(g),
            None => GammaMode::Relative(s.alpha),
        },
        max_iters: s.max_iters,
        tol: s.tol,
    }
}

fn cascade_config(s: &SolverArgs, stages: usize, fusion: Fusion) -> Result<CascadeConfig> {
    let cfg = CascadeConfig {
        num_stages: stages,
        walk_steps: s.walk_steps,
        en_config: en_config(s),
        fusion,
        renormalize_residuals: !s.raw_residuals,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Loads the matrix as D×N with points as columns, normalized unless asked
/// otherwise.
fn load_input(a: &InputArgs) -> Result<(DataMatrix, RunInfo)> {
    let format = MatrixFormat::from_path(&a.input, a.header);
    let rows_are_points = if a.cols_are_points {
        false
    } else if a.rows_are_points {
        true
    } else {
        matches!(format, MatrixFormat::Csv { .. })
    };
    let raw = io::load_matrix(&a.input, format, rows_are_points)?;
    info!("loaded {} points of dimension {}", raw.num_points(), raw.dim());
    let mut run = RunInfo {
        input: Some(a.input.display().to_string()),
        normalized_input: !a.no_normalize,
        ..Default::default()
    };
    if a.no_normalize {
        return Ok((raw, run));
    }
    let n = normalize_columns(&raw);
    run.zero_columns = n.zero_columns.len();
    Ok((n.data, run))
}

fn load_labels(path: &Path, n: usize) -> Result<LabelVector> {
    let labels = io::load_labels(path)?;
    labels.check_matches(n)?;
    Ok(labels)
}

fn point_ids(x: &DataMatrix) -> Vec<String> {
    (0..x.num_points()).map(|j| x.point_id(j)).collect()
}

fn check_convergence(what: &str, missed: usize, strict: bool) -> Result<()> {
    if missed == 0 {
        return Ok(());
    }
    let msg = format!("{what}: {missed} column(s) did not reach the solver tolerance");
    if strict {
        return Err(CliError::NotConverged(msg));
    }
    warn!("{msg}");
    Ok(())
}

fn cascade_missed(res: &CascadeResult) -> usize {
    res.non_converged().len()
}

pub fn detect(a: &DetectArgs) -> Result<()> {
    let fusion = match a.fusion {
        FusionArg::Mean if !a.fusion_weights.is_empty() => {
            return Err(Error::Config("--fusion-weights needs --fusion weighted".into()).into())
        }
        FusionArg::Mean => Fusion::UniformMean,
        FusionArg::Weighted => Fusion::Weighted(a.fusion_weights.clone()),
    };
    let cfg = cascade_config(&a.solver, a.stages, fusion)?;
    if let Some(eps) = a.epsilon {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("epsilon must be a finite non-negative number, got {eps}")).into());
        }
    }

    let (x, run) = load_input(&a.input)?;
    let labels = a
        .labels
        .as_deref()
        .map(|p| load_labels(p, x.num_points()))
        .transpose()?;

    let start = Instant::now();
    let res = run_cascade(&x, &cfg)?;
    info!("cascade finished in {:.2?}", start.elapsed());
    check_convergence("detect", cascade_missed(&res), a.solver.strict)?;

    let ids = point_ids(&x);
    io::save_cascade(&a.out, &res, &ids, &run)?;

    let epsilon = a.epsilon.unwrap_or(1e-4 / x.num_points() as f64);
    let predicted = classify(&res.fused_scores, epsilon);
    io::save_labels(a.out.join("predicted.txt"), &predicted)?;
    let manifest = a.out.join("manifest.txt");
    let mut text = fs::read_to_string(&manifest).map_err(|e| Error::Io {
        path: manifest.clone(),
        source: e,
    })?;
    let _ = writeln!(text, "epsilon={epsilon:?}");
    let _ = writeln!(text, "solver_strict={}", a.solver.strict);
    if let Some(p) = &a.labels {
        let _ = writeln!(text, "labels={}", p.display());
    }
    write_file(&manifest, &text)?;

    println!(
        "{} points, {} flagged at epsilon {epsilon:e}; results in {}",
        x.num_points(),
        predicted.num_outliers(),
        a.out.display()
    );
    if let Some(labels) = labels {
        let report = f1_at_count(res.fused_scores.as_slice(), &labels, Polarity::LowIsOutlier)?;
        write_file(&a.out.join("eval.txt"), &report.to_key_values())?;
        println!("auc={:.6} f1={:.6}", report.auc, report.f1);
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        ambient_dim: a.dim,
        num_subspaces: a.subspaces,
        subspace_dim: a.subdim,
        inliers_per_subspace: a.inliers,
        num_outliers: a.outliers,
        noise_sigma: a.noise,
        rng_seed: a.seed,
    };
    let data = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let matrix = if a.binary {
        let p = a.out.join("X.odcm");
        io::save_matrix_binary(&p, &data.data)?;
        p
    } else {
        let p = a.out.join("X.csv");
        io::save_matrix_csv(&p, &data.data)?;
        p
    };
    io::save_labels(a.out.join("labels.txt"), &data.labels)?;
    let manifest = format!(
        "dim={}\nsubspaces={}\nsubdim={}\ninliers_per_subspace={}\noutliers={}\nnoise={:?}\nseed={}\n",
        a.dim, a.subspaces, a.subdim, a.inliers, a.outliers, a.noise, a.seed
    );
    write_file(&a.out.join("synth.txt"), &manifest)?;
    println!("{} points written to {}", spec.num_points(), matrix.display());
    Ok(())
}

struct BenchRow {
    method: &'static str,
    stages: Option<usize>,
    report: EvalReport,
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let cfg = cascade_config(&a.solver, a.stages, Fusion::UniformMean)?;
    let single_cfg = cascade_config(&a.solver, 1, Fusion::UniformMean)?;
    let l1_cfg = ElasticNetConfig {
        lambda: l1_preset().lambda,
        ..en_config(&a.solver)
    };
    l1_cfg.validate()?;

    let (x, run) = load_input(&a.input)?;
    let labels = load_labels(&a.labels, x.num_points())?;
    let mut rows = Vec::new();

    let start = Instant::now();
    let cascade = run_cascade(&x, &cfg)?;
    info!("cascade ({} stages) finished in {:.2?}", a.stages, start.elapsed());
    check_convergence("odcsr", cascade_missed(&cascade), a.solver.strict)?;
    let stage_scores = cascade.stage_scores();
    let mut prefix_scores = Vec::new();
    for k in 1..=a.stages {
        let fused = fuse_scores(&stage_scores[..k], &Fusion::UniformMean)?;
        rows.push(BenchRow {
            method: "odcsr",
            stages: Some(k),
            report: f1_at_count(fused.as_slice(), &labels, Polarity::LowIsOutlier)?,
        });
        prefix_scores.push(fused);
    }

    let start = Instant::now();
    let single = run_cascade(&x, &single_cfg)?;
    info!("single-stage detector finished in {:.2?}", start.elapsed());
    check_convergence("rgraph", cascade_missed(&single), a.solver.strict)?;
    rows.push(BenchRow {
        method: "rgraph",
        stages: Some(1),
        report: f1_at_count(single.fused_scores.as_slice(), &labels, Polarity::LowIsOutlier)?,
    });

    let start = Instant::now();
    let l1 = l1_thresholding_scores(&x, &l1_cfg)?;
    info!("l1-thresholding finished in {:.2?}", start.elapsed());
    check_convergence("l1th", l1.non_converged.len(), a.solver.strict)?;
    rows.push(BenchRow {
        method: "l1th",
        stages: None,
        report: f1_at_count(&l1.scores, &labels, Polarity::HighIsOutlier)?,
    });

    let mut csv = format!("method,stages,{}\n", EvalReport::CSV_HEADER);
    for r in &rows {
        let stages = r.stages.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{stages},{}", r.method, r.report.to_csv_row());
    }
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }

    if let Some(dir) = &a.scores_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let ids = point_ids(&x);
        for (k, s) in prefix_scores.iter().enumerate() {
            io::save_scores(dir.join(format!("odcsr_n{}_scores.csv", k + 1)), s.as_slice(), &ids)?;
        }
        write_file(&dir.join("odcsr_manifest.txt"), &io::manifest_text(&cascade, &run))?;
        io::save_scores(dir.join("rgraph_scores.csv"), single.fused_scores.as_slice(), &ids)?;
        write_file(&dir.join("rgraph_manifest.txt"), &io::manifest_text(&single, &run))?;
        io::save_scores(dir.join("l1th_scores.csv"), &l1.scores, &ids)?;
        write_file(
            &dir.join("l1th_manifest.txt"),
            &l1_manifest(&l1_cfg, &run, l1.non_converged.len()),
        )?;
    }
    Ok(())
}

fn l1_manifest(cfg: &ElasticNetConfig, run: &RunInfo, missed: usize) -> String {
    let mut out = String::from("# odcsr l1-thresholding scores\nmethod=l1th\n");
    let _ = writeln!(out, "lambda={:?}", cfg.lambda);
    match cfg.gamma_mode {
        GammaMode::Fixed(g) => {
            let _ = writeln!(out, "gamma_mode=fixed\ngamma={g:?}");
        }
        GammaMode::Relative(a) => {
            let _ = writeln!(out, "gamma_mode=relative\nalpha={a:?}");
        }
    }
    let _ = writeln!(out, "max_iters={}\ntol={:?}", cfg.max_iters, cfg.tol);
    let _ = writeln!(out, "normalize_input={}", run.normalized_input);
    if let Some(input) = &run.input {
        let _ = writeln!(out, "input={input}");
    }
    let _ = writeln!(out, "non_converged={missed}");
    let _ = writeln!(out, "polarity={}", Polarity::HighIsOutlier);
    out
}
