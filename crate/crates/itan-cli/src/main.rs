//! `itan`: command-line driver for the itan-core stack.
//!
//! Subcommands: `gen-data` (synthetic dataset), `train` (checkpoint + loss
//! log), `eval` (report JSON), `bench` (scaling CSVs + JSON), `grad-check`
//! (pass/fail table). All behavior is controlled by one JSON config plus
//! dotted-path `--set` overrides; given the same config and seed, every
//! artifact is byte-identical across invocations.

use clap::{Args, Parser, Subcommand, ValueEnum};
use itan_core::bench::{
    analytic_match_cost, census_match_cost, measure_scaling, CostModel, MatchMethod, ScalingReport,
};
use itan_core::checkpoint::Checkpoint;
use itan_core::config::{apply_overrides, RunConfig, SplitMode};
use itan_core::data::{
    generate_synthetic, load_manifest, synthetic_provider, ClassId, DatasetManifest,
    FeatureProvider,
};
use itan_core::episodes::split_classes;
use itan_core::error::{Error, Result};
use itan_core::gradcheck::{battery, GradCheckReport, DEFAULT_TOL};
use itan_core::model::{evaluate, full_loss_grad_check, train_loop, ItanModel, SgdMomentum};
use itan_core::rng::{derive_seed, Rng};
use itan_core::tape::ParamSet;
use itan_core::tensor::{Precision, Real};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "itan",
    version,
    about = "Few-shot video matching with implicit temporal alignment"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON config file (defaults are used when omitted).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed override: replaces the dataset seed for gen-data and the run
    /// seed for every other subcommand.
    #[arg(long)]
    seed: Option<u64>,

    /// Directory artifacts are written into.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,

    /// Scalar precision override.
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,

    /// Overwrite existing artifacts instead of refusing.
    #[arg(long)]
    force: bool,

    /// Dotted-path config override, repeatable: --set train.lr=0.01
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic twin-class dataset (manifest + FVF1 files).
    GenData(Common),
    /// Train episodically; writes checkpoint.itan and train_log.csv.
    Train(Common),
    /// Evaluate over seeded episode runs; writes eval_report.json.
    Eval(Common),
    /// Measure matching-stage scaling; writes per-stage CSVs and a JSON report.
    Bench(Common),
    /// Run the gradient-check battery (always 64-bit) and print a table.
    GradCheck(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Precision {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<ExitCode> {
    let common = match &cmd {
        Cmd::GenData(c) | Cmd::Train(c) | Cmd::Eval(c) | Cmd::Bench(c) | Cmd::GradCheck(c) => c,
    };
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg = apply_overrides(&cfg, &common.set)?;
    if let Some(seed) = common.seed {
        match cmd {
            Cmd::GenData(_) => cfg.synthetic.seed = seed,
            _ => cfg.seed = seed,
        }
    }
    if let Some(p) = common.precision {
        cfg.precision = p.into();
    }
    cfg.validate()?;

    match &cmd {
        Cmd::GenData(c) => cmd_gen_data(&cfg, c),
        Cmd::Train(c) => match cfg.precision {
            Precision::F32 => cmd_train::<f32>(&cfg, c),
            Precision::F64 => cmd_train::<f64>(&cfg, c),
        },
        Cmd::Eval(c) => match cfg.precision {
            Precision::F32 => cmd_eval::<f32>(&cfg, c),
            Precision::F64 => cmd_eval::<f64>(&cfg, c),
        },
        Cmd::Bench(c) => cmd_bench(&cfg, c),
        Cmd::GradCheck(c) => cmd_grad_check(&cfg, c),
    }
}

/// Refuses to clobber existing artifacts unless --force was given.
fn ensure_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} already exists (use --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

/// Dataset resolution shared by train and eval: an on-disk manifest when
/// configured, otherwise in-memory synthesis from the `synthetic` section.
fn load_dataset<R: Real>(cfg: &RunConfig) -> Result<(DatasetManifest, FeatureProvider<R>)> {
    match &cfg.data.manifest {
        Some(path) => {
            let path = Path::new(path);
            let manifest = load_manifest(path)?;
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            let provider = FeatureProvider::load(&manifest, base)?;
            Ok((manifest, provider))
        }
        None => synthetic_provider(&cfg.synthetic, cfg.precision),
    }
}

/// Class pools `(train, eval)` under the configured split.
fn class_pools(
    cfg: &RunConfig,
    manifest: &DatasetManifest,
) -> Result<(Vec<ClassId>, Vec<ClassId>)> {
    match cfg.data.split {
        SplitMode::Shared => {
            let all = manifest.class_ids();
            Ok((all.clone(), all))
        }
        SplitMode::Disjoint { train, val, test } => {
            let split = split_classes(
                &manifest.class_ids(),
                (train, val, test),
                derive_seed(cfg.seed, "split"),
            )?;
            Ok((split.train_classes, split.test_classes))
        }
    }
}

fn cmd_gen_data(cfg: &RunConfig, common: &Common) -> Result<ExitCode> {
    std::fs::create_dir_all(&common.out_dir)?;
    let manifest =
        generate_synthetic(&cfg.synthetic, cfg.precision, &common.out_dir, common.force)?;
    println!(
        "wrote {} classes / {} videos to {}",
        manifest.classes.len(),
        manifest.videos.len(),
        common.out_dir.join("manifest.json").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_train<R: Real>(cfg: &RunConfig, common: &Common) -> Result<ExitCode> {
    std::fs::create_dir_all(&common.out_dir)?;
    let ckpt_path = common.out_dir.join("checkpoint.itan");
    let log_path = common.out_dir.join("train_log.csv");
    ensure_writable(&ckpt_path, common.force)?;
    ensure_writable(&log_path, common.force)?;

    let (manifest, provider) = load_dataset::<R>(cfg)?;
    let (train_pool, _) = class_pools(cfg, &manifest)?;
    let mut set = ParamSet::new();
    let model = ItanModel::<R>::init(
        manifest.dims,
        cfg.model,
        train_pool.clone(),
        cfg.seed,
        &mut set,
    )?;
    let mut opt = SgdMomentum::new(cfg.train.lr, cfg.train.momentum);
    let mut rng = Rng::new(derive_seed(cfg.seed, "train"));
    let tc = cfg.train;
    let log = train_loop(
        &model,
        &mut set,
        &mut opt,
        &manifest,
        &provider,
        &train_pool,
        tc.shape(),
        tc.episodes,
        &|i| tc.mode_of(i),
        tc.tau,
        &mut rng,
        0,
    )?;

    let mut csv = String::from("episode,L_meta,L_sem,L_all\n");
    for (i, s) in log.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", s.meta, s.sem, s.total));
    }
    std::fs::write(&log_path, csv)?;
    Checkpoint::from_params(&set, cfg.to_json(), tc.episodes, rng.state()).save(&ckpt_path)?;

    let last = log.last().expect("episodes >= 1");
    println!(
        "trained {} episodes (final L_meta={:.4} L_sem={:.4} L_all={:.4})",
        log.len(),
        last.meta,
        last.sem,
        last.total
    );
    println!("wrote {} and {}", ckpt_path.display(), log_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval<R: Real>(cfg: &RunConfig, common: &Common) -> Result<ExitCode> {
    std::fs::create_dir_all(&common.out_dir)?;
    let report_path = common.out_dir.join("eval_report.json");
    ensure_writable(&report_path, common.force)?;

    let (manifest, provider) = load_dataset::<R>(cfg)?;
    let (train_pool, eval_pool) = class_pools(cfg, &manifest)?;
    let mut set = ParamSet::new();
    let model = ItanModel::<R>::init(manifest.dims, cfg.model, train_pool, cfg.seed, &mut set)?;
    if let Some(ckpt) = &cfg.eval.checkpoint {
        Checkpoint::load(Path::new(ckpt))?.apply_to(&mut set)?;
    }
    let report = evaluate(
        &model,
        &set,
        &manifest,
        &provider,
        &eval_pool,
        &cfg.eval.to_eval_config(),
        cfg.seed,
    )?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    std::fs::write(&report_path, json)?;
    println!(
        "accuracy {:.4} +/- {:.4} ({} runs x {} episodes, {:?})",
        report.mean,
        report.ci95,
        report.runs.len(),
        report.episodes_per_run,
        report.metric
    );
    println!("wrote {}", report_path.display());
    Ok(ExitCode::SUCCESS)
}

/// Analytic-vs-census comparison row emitted with the scaling report.
#[derive(serde::Serialize)]
struct CensusRow {
    method: MatchMethod,
    frames: usize,
    analytic: u64,
    census: u64,
    ratio: f64,
}

#[derive(serde::Serialize)]
struct BenchArtifact {
    scaling: Vec<ScalingReport>,
    census: Vec<CensusRow>,
}

fn cmd_bench(cfg: &RunConfig, common: &Common) -> Result<ExitCode> {
    std::fs::create_dir_all(&common.out_dir)?;
    let json_path = common.out_dir.join("bench_report.json");
    ensure_writable(&json_path, common.force)?;
    let csv_paths: Vec<PathBuf> = cfg
        .bench
        .stages
        .iter()
        .map(|s| common.out_dir.join(format!("bench_{}.csv", s.name())))
        .collect();
    for p in &csv_paths {
        ensure_writable(p, common.force)?;
    }

    let mut scaling = Vec::new();
    for (stage, csv_path) in cfg.bench.stages.iter().zip(&csv_paths) {
        let report = measure_scaling(*stage, &cfg.bench.t_values, &cfg.bench.cost_model, cfg.seed)?;
        std::fs::write(csv_path, report.to_csv())?;
        let (lo, hi) = stage.expected_slope();
        println!(
            "{}: slope {:.3} (expected {lo:.1}..{hi:.1}), residual {:.3}",
            stage.name(),
            report.slope,
            report.residual
        );
        scaling.push(report);
    }

    let mut census = Vec::new();
    for method in [MatchMethod::Implicit, MatchMethod::ExplicitDtw] {
        for &t in &cfg.bench.t_values {
            let cm = CostModel {
                frames: t,
                ..cfg.bench.cost_model
            };
            let analytic = analytic_match_cost(method, &cm);
            let counted = census_match_cost(method, &cm, cfg.seed)?;
            census.push(CensusRow {
                method,
                frames: t,
                analytic,
                census: counted,
                ratio: counted as f64 / analytic as f64,
            });
        }
    }
    let artifact = BenchArtifact { scaling, census };
    let mut json = serde_json::to_string_pretty(&artifact).expect("report serializes");
    json.push('\n');
    std::fs::write(&json_path, json)?;
    println!("wrote {}", json_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_grad_check(cfg: &RunConfig, _common: &Common) -> Result<ExitCode> {
    let mut reports: Vec<GradCheckReport> = battery(cfg.seed)?;
    reports.push(full_loss_grad_check(cfg.seed)?);
    println!(
        "{:<28} {:>14} {:>8}  status",
        "check", "max_rel_error", "coords"
    );
    let mut failures = 0;
    for r in &reports {
        let status = if r.passes() { "pass" } else { "FAIL" };
        if !r.passes() {
            failures += 1;
        }
        println!(
            "{:<28} {:>14.3e} {:>8}  {status}",
            r.name, r.max_rel_error, r.coords
        );
    }
    println!(
        "{} checks, {failures} failures (tolerance {DEFAULT_TOL:.0e}, 64-bit central differences)",
        reports.len()
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
