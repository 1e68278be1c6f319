//! Command-line front end: `fit`, `score`, `evaluate`, `verify`, `spectra`
//! and `bench`.
//!
//! Exit codes: 0 success, 2 flag or validation error, 3 data error,
//! 4 numerical failure (including failed verification checks).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::bench::{bench_csv, run_bench, BenchParams};
use crate::embedding::Strategy;
use crate::error::{Error, ErrorKind, Result};
use crate::features::{
    concat_multiscale, finalize_scores, read_score_map, write_score_map, LayerManifest, MaskManifest,
};
use crate::heatmap::write_pgm;
use crate::metrics::{evaluate, write_curve_csv, DEFAULT_FPR_LIMIT, DEFAULT_THRESHOLDS};
use crate::model::{load_model, save_model, GaussianModel, RunConfig};
use crate::verify::{rank_collapse_report, run_suite, spectra_experiment, SpectraParams, Suite};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "somd", version, about = "Low-rank Mahalanobis anomaly segmentation")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "SOMD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit per-location Gaussians to a training feature manifest.
    Fit(FitArgs),
    /// Score a test feature manifest; writes score NPYs and PGM heatmaps.
    Score(ScoreArgs),
    /// PRO and ROC-AUC of a score directory against ground-truth masks.
    Evaluate(EvaluateArgs),
    /// Run the numerical verification suites.
    Verify(VerifyArgs),
    /// Eigenvalue spectra of embedded covariances with duplicated features.
    Spectra(SpectraArgs),
    /// Time fit, score and batched Cholesky over an (F, k) sweep.
    Bench(BenchArgs),
}

/// `HxW` or a single number for a square grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid(pub usize, pub usize);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        let grid = match s.split_once(['x', 'X']) {
            Some((h, w)) => Grid(parse(h)?, parse(w)?),
            None => {
                let n = parse(s)?;
                Grid(n, n)
            }
        };
        if grid.0 == 0 || grid.1 == 0 {
            return Err("grid dimensions must be positive".into());
        }
        Ok(grid)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "k", default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value = "semi-orthogonal")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smoothing sigma stored in the model for scoring.
    #[arg(long, default_value_t = 4.0)]
    pub sigma: f64,
    /// Score map output size stored in the model for scoring.
    #[arg(long, default_value = "256")]
    pub output_size: Grid,
    /// Feature grid all layers are resized to (default: the largest layer grid).
    #[arg(long)]
    pub grid: Option<Grid>,
    /// Write a JSON summary here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the model's smoothing sigma.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Override the model's output size.
    #[arg(long)]
    pub output_size: Option<Grid>,
    #[arg(long)]
    pub no_heatmaps: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FPR_LIMIT)]
    pub fpr_limit: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLDS)]
    pub thresholds: usize,
    /// Directory for `curve.csv` and `summary.json` (default: the scores directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// all, expectation, invariance, bounds, flat, optimality, interlacing or rank.
    #[arg(long, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[arg(long = "f", default_value_t = 32)]
    pub f: usize,
    #[arg(long = "l", default_value_t = 16)]
    pub l: usize,
    #[arg(long = "k", default_value_t = 12)]
    pub k: usize,
    #[arg(long = "n", default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "f", value_delimiter = ',', default_value = "448")]
    pub f: Vec<usize>,
    #[arg(long = "k", value_delimiter = ',', default_value = "1,25,50,100")]
    pub k: Vec<usize>,
    #[arg(long, default_value = "16")]
    pub grid: Grid,
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2048)]
    pub memory_budget_mb: usize,
    /// CSV path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Verification ran but at least one check failed.
    ChecksFailed,
}

pub fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let mut cfg = RunConfig::new(args.strategy, args.k)
        .with_epsilon(args.epsilon)
        .with_seed(args.seed);
    cfg.smoothing_sigma = args.sigma;
    cfg.output_size = (args.output_size.0, args.output_size.1);

    let loaded = LayerManifest::load(&args.manifest)?;
    let f = loaded.manifest.total_features();
    // Check the configuration against the declared shapes before touching tensors.
    cfg.validate(f)?;
    let (h, w) = match args.grid {
        Some(Grid(h, w)) => (h, w),
        None => loaded.manifest.largest_grid(),
    };
    let train = concat_multiscale(&loaded, (h, w))?;

    let start = Instant::now();
    let model = GaussianModel::fit_with_digest(&train, &cfg, Some(loaded.digest.clone()))?;
    let elapsed = start.elapsed().as_secs_f64();
    save_model(&model, &args.out)?;

    println!(
        "fit: F={f} k={} strategy={} grid={h}x{w} samples={} time={elapsed:.3}s -> {}",
        args.k,
        args.strategy,
        train.samples(),
        args.out.display()
    );
    if let Some(path) = &args.summary {
        write_json(
            path,
            &json!({
                "schema_version": SUMMARY_SCHEMA_VERSION,
                "command": "fit",
                "features": f,
                "k": args.k,
                "strategy": args.strategy,
                "epsilon": args.epsilon,
                "seed": args.seed,
                "grid": [h, w],
                "samples": train.samples(),
                "fit_seconds": elapsed,
                "manifest_digest": loaded.digest,
                "model": args.out,
            }),
        )?;
    }
    Ok(())
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let mut model = load_model(&args.model)?;
    if let Some(sigma) = args.sigma {
        model.config_mut().smoothing_sigma = sigma;
    }
    if let Some(Grid(h, w)) = args.output_size {
        model.config_mut().output_size = (h, w);
    }
    let loaded = LayerManifest::load(&args.manifest)?;
    let f = loaded.manifest.total_features();
    if f != model.features() {
        return Err(Error::ModelMismatch(format!(
            "manifest has F={f}, model expects F={}",
            model.features()
        )));
    }
    let test = concat_multiscale(&loaded, (model.height(), model.width()))?;
    let ids = loaded.manifest.image_ids();

    create_dir(&args.out)?;
    let start = Instant::now();
    let raw = model.score_all(&test)?;
    let mut max_score = 0.0f64;
    for (id, map) in ids.iter().zip(&raw) {
        let fin = finalize_scores(map, model.config());
        max_score = max_score.max(fin.max());
        write_score_map(args.out.join(format!("{id}.npy")), &fin)?;
        if !args.no_heatmaps {
            write_pgm(args.out.join(format!("{id}.pgm")), &fin)?;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "score: {} images, F={} k={} time={elapsed:.3}s -> {}",
        ids.len(),
        model.features(),
        model.k(),
        args.out.display()
    );
    write_json(
        &args.out.join("score_summary.json"),
        &json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "command": "score",
            "images": ids,
            "features": model.features(),
            "k": model.k(),
            "strategy": model.embedding().strategy(),
            "output_size": model.config().output_size,
            "sigma": model.config().smoothing_sigma,
            "max_score": max_score,
            "score_seconds": elapsed,
        }),
    )
}

/// Pairs score files `<id>.npy` in `dir` with the mask ids; the two id sets
/// must be identical.
fn paired_score_paths(dir: &Path, ids: &[String]) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = BTreeSet::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "npy") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                found.insert(stem.to_string());
            }
        }
    }
    let wanted: BTreeSet<String> = ids.iter().cloned().collect();
    if wanted.len() != ids.len() {
        return Err(Error::PairingError("mask manifest repeats an image id".into()));
    }
    if found != wanted {
        let missing: Vec<_> = wanted.difference(&found).take(5).collect();
        let extra: Vec<_> = found.difference(&wanted).take(5).collect();
        return Err(Error::PairingError(format!(
            "score files do not match mask ids (missing {missing:?}, unexpected {extra:?})"
        )));
    }
    Ok(ids.iter().map(|id| dir.join(format!("{id}.npy"))).collect())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    if !(args.fpr_limit > 0.0 && args.fpr_limit <= 1.0) {
        return Err(Error::InvalidConfig(format!("fpr limit {} not in (0, 1]", args.fpr_limit)));
    }
    if args.thresholds < 2 {
        return Err(Error::InvalidConfig("need at least 2 thresholds".into()));
    }
    let pairs = MaskManifest::load(&args.masks)?;
    let ids: Vec<String> = pairs.iter().map(|(id, _)| id.clone()).collect();
    let paths = paired_score_paths(&args.scores, &ids)?;
    let scores = paths.iter().map(read_score_map).collect::<Result<Vec<_>>>()?;
    let masks: Vec<_> = pairs.into_iter().map(|(_, m)| m).collect();

    let result = evaluate(&scores, &masks, args.fpr_limit, args.thresholds)?;
    println!(
        "PRO@{:.2} = {:.4}  ROC-AUC = {:.4}  ({} images, {} regions)",
        args.fpr_limit,
        result.pro,
        result.roc_auc,
        scores.len(),
        result.regions
    );
    let out = args.out.clone().unwrap_or_else(|| args.scores.clone());
    create_dir(&out)?;
    write_curve_csv(out.join("curve.csv"), &result.curve)?;
    write_json(
        &out.join("summary.json"),
        &json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "command": "evaluate",
            "pro": result.pro,
            "roc_auc": result.roc_auc,
            "fpr_limit": args.fpr_limit,
            "thresholds": args.thresholds,
            "images": scores.len(),
            "regions": result.regions,
        }),
    )
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome> {
    let reports = run_suite(args.suite, args.seed);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", reports.len());
    if let Some(path) = &args.json {
        write_json(
            path,
            &json!({
                "schema_version": SUMMARY_SCHEMA_VERSION,
                "command": "verify",
                "suite": args.suite,
                "seed": args.seed,
                "reports": reports,
            }),
        )?;
    }
    Ok(if failed == 0 {
        Outcome::Success
    } else {
        Outcome::ChecksFailed
    })
}

pub fn cmd_spectra(args: &SpectraArgs) -> Result<()> {
    let params = SpectraParams {
        f: args.f,
        l: args.l,
        k: args.k,
        n: args.n,
        seeds: args.seeds,
        seed: args.seed,
    };
    let summary = spectra_experiment(params, Some(&args.out))?;
    for s in &summary.strategies {
        let mean_rank = s.ranks.iter().sum::<usize>() as f64 / s.ranks.len().max(1) as f64;
        println!(
            "{:<17} full rank in {:5.1}% of seeds, mean rank {mean_rank:.2}",
            s.strategy.name(),
            100.0 * s.full_rank_fraction(args.k)
        );
    }
    println!("{}", rank_collapse_report(&summary));
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let params = BenchParams {
        f_list: args.f.clone(),
        k_list: args.k.clone(),
        height: args.grid.0,
        width: args.grid.1,
        samples: args.samples,
        reps: args.reps,
        seed: args.seed,
        memory_budget: args.memory_budget_mb << 20,
    };
    eprintln!("bench config: {}", serde_json::to_string(&params).unwrap_or_default());
    let csv = bench_csv(&run_bench(&params)?);
    match &args.out {
        Some(path) => fs::write(path, csv).map_err(|e| Error::io(path, e)),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a).map(|_| Outcome::Success),
        Command::Score(a) => cmd_score(a).map(|_| Outcome::Success),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| Outcome::Success),
        Command::Verify(a) => cmd_verify(a),
        Command::Spectra(a) => cmd_spectra(a).map(|_| Outcome::Success),
        Command::Bench(a) => cmd_bench(a).map(|_| Outcome::Success),
    }
}

/// Parses `args`, runs the command and maps the result to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
