//! The four commands: prepare, train, attack, report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use loss01::dataset;
use loss01::rng::derive_seed;
use loss01::{
    load_container, load_model, run_attack, save_container, save_model, select_svm_c, train_mlp,
    train_mlp01, train_scd01, train_vote, AttackConfig, AttackTrace, BinaryDataset, EnsembleBlob,
    Mlp01Config, ScdConfig, SgdConfig, SubstituteSpec, SvmConfig, TargetOracle,
};

use crate::config::{parse_vote_mode, ExperimentConfig, ModelChoice, TrainPlan};

#[derive(Args)]
pub(crate) struct PrepareArgs {
    /// Raw source kind: mnist | cifar10 | container
    #[arg(long)]
    pub(crate) source: String,
    /// Directory holding the raw source files (mnist: train-images-idx3-ubyte
    /// etc.; cifar10: data_batch_1..5.bin and test_batch.bin)
    #[arg(long, visible_alias = "dataset")]
    pub(crate) dir: Option<PathBuf>,
    /// Existing train container (source = container)
    #[arg(long)]
    pub(crate) train: Option<PathBuf>,
    /// Existing test container (source = container)
    #[arg(long)]
    pub(crate) test: Option<PathBuf>,
    /// The two raw class labels to keep: first maps to +1, second to -1
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub(crate) classes: Option<Vec<u8>>,
    /// Output directory for train.bds / test.bds
    #[arg(long)]
    pub(crate) out: PathBuf,
}

#[derive(Args)]
pub(crate) struct TrainArgs {
    /// Training container (BDS1)
    #[arg(long, visible_alias = "dataset")]
    pub(crate) train: PathBuf,
    /// Optional test container for the report
    #[arg(long)]
    pub(crate) test: Option<PathBuf>,
    /// Model kind: scd01 | mlp01 | svm | mlp
    #[arg(long)]
    pub(crate) model: Option<String>,
    /// Ensemble size (1 = single model)
    #[arg(long)]
    pub(crate) votes: Option<usize>,
    /// restart | bootstrap (default: restart for 01-loss, bootstrap for convex)
    #[arg(long)]
    pub(crate) vote_mode: Option<String>,
    /// Coordinate-descent iterations
    #[arg(long)]
    pub(crate) iters: Option<usize>,
    /// Coordinate-descent step size
    #[arg(long)]
    pub(crate) eta: Option<f64>,
    /// Coordinates sampled per descent step
    #[arg(long)]
    pub(crate) k_features: Option<usize>,
    /// Batch fraction per descent step
    #[arg(long)]
    pub(crate) batch_frac: Option<f64>,
    /// Threshold line-search subsample cap
    #[arg(long)]
    pub(crate) threshold_cap: Option<usize>,
    /// Hidden nodes of the dual-layer models
    #[arg(long)]
    pub(crate) hidden: Option<usize>,
    /// Sigmoid-MLP SGD epochs
    #[arg(long)]
    pub(crate) sgd_epochs: Option<usize>,
    /// Sigmoid-MLP SGD mini-batch size
    #[arg(long)]
    pub(crate) sgd_batch: Option<usize>,
    /// Sigmoid-MLP SGD learning rate
    #[arg(long)]
    pub(crate) sgd_lr: Option<f64>,
    /// Sigmoid-MLP SGD momentum
    #[arg(long)]
    pub(crate) sgd_momentum: Option<f64>,
    /// SVM regularization grid (comma-separated)
    #[arg(long, value_delimiter = ',')]
    pub(crate) c_grid: Option<Vec<f64>>,
    /// SVM cross-validation folds
    #[arg(long)]
    pub(crate) folds: Option<usize>,
    /// SVM subgradient epochs
    #[arg(long)]
    pub(crate) svm_epochs: Option<usize>,
    /// JSON experiment config; flags override its values
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    /// Global seed; every random choice derives from it
    #[arg(long)]
    pub(crate) seed: Option<u64>,
    /// Worker thread cap
    #[arg(long)]
    pub(crate) jobs: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub(crate) out: PathBuf,
}

#[derive(Args)]
pub(crate) struct AttackArgs {
    /// Target model blob (M01V)
    #[arg(long)]
    pub(crate) target: PathBuf,
    /// Evaluation pool container (BDS1)
    #[arg(long)]
    pub(crate) eval: PathBuf,
    /// Substitute kind: mlp | scd01
    #[arg(long)]
    pub(crate) substitute: Option<String>,
    /// Hidden widths of the sigmoid substitute (comma-separated)
    #[arg(long, value_delimiter = ',')]
    pub(crate) sub_hidden: Option<Vec<usize>>,
    /// SGD epochs per substitute retraining round
    #[arg(long)]
    pub(crate) sub_sgd_epochs: Option<usize>,
    /// Coordinate-descent iterations of the scd01 substitute
    #[arg(long)]
    pub(crate) sub_iters: Option<usize>,
    /// Coordinates per step of the scd01 substitute
    #[arg(long)]
    pub(crate) sub_k_features: Option<usize>,
    /// Per-pixel max-norm budget
    #[arg(long)]
    pub(crate) epsilon: Option<f64>,
    /// Substitute training epochs (adversary rounds)
    #[arg(long)]
    pub(crate) epochs: Option<usize>,
    /// Substitute training-set cap as a multiple of the pool size
    #[arg(long)]
    pub(crate) max_set_multiple: Option<usize>,
    /// Disjoint substitute seed pool (default: the eval pool itself)
    #[arg(long)]
    pub(crate) substitute_pool: Option<PathBuf>,
    /// JSON experiment config; flags override its values
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    /// Global seed
    #[arg(long)]
    pub(crate) seed: Option<u64>,
    /// Worker thread cap
    #[arg(long)]
    pub(crate) jobs: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub(crate) out: PathBuf,
}

#[derive(Args)]
pub(crate) struct ReportArgs {
    /// Attack trace CSVs to merge
    #[arg(long, num_args = 1.., required = true)]
    pub(crate) traces: Vec<PathBuf>,
    /// Series names (default: trace file stems)
    #[arg(long, num_args = 1..)]
    pub(crate) names: Option<Vec<String>>,
    /// Write the merged per-epoch table here (stdout otherwise)
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default coordinate sample size, scaled to the input width (64 for
/// 784-dim inputs, 128 for 3072-dim, 256 beyond).
fn default_k_features(d: usize) -> usize {
    let k = if d <= 1024 {
        64
    } else if d <= 8192 {
        128
    } else {
        256
    };
    k.min(d)
}

fn configure_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // ignore the error if a pool already exists (tests, repeated calls)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn describe(ds: &BinaryDataset) -> String {
    format!(
        "n={} d={} (+1: {}, -1: {})",
        ds.n(),
        ds.dim(),
        ds.pos_count(),
        ds.neg_count()
    )
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("file not found: {}", path.display());
    }
    Ok(())
}

pub(crate) fn prepare(args: PrepareArgs) -> Result<()> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    match args.source.as_str() {
        "mnist" => {
            let dir = args.dir.context("--dir is required for --source mnist")?;
            let classes = args
                .classes
                .context("--classes A B is required for --source mnist")?;
            let (a, b) = (classes[0], classes[1]);
            let splits = [
                (
                    "train.bds",
                    "train-images-idx3-ubyte",
                    "train-labels-idx1-ubyte",
                ),
                (
                    "test.bds",
                    "t10k-images-idx3-ubyte",
                    "t10k-labels-idx1-ubyte",
                ),
            ];
            for (out_name, images, labels) in splits {
                let image_path = dir.join(images);
                let label_path = dir.join(labels);
                require_file(&image_path)?;
                require_file(&label_path)?;
                let raw = dataset::load_idx(&image_path, &label_path)?;
                let ds = dataset::select_binary(&raw, a, b)?;
                if ds.is_single_class() {
                    eprintln!("warning: {out_name} holds a single class");
                }
                let out = args.out.join(out_name);
                save_container(&ds, &out)?;
                println!("wrote {}: {}", out.display(), describe(&ds));
            }
        }
        "cifar10" => {
            let dir = args.dir.context("--dir is required for --source cifar10")?;
            let classes = args
                .classes
                .context("--classes A B is required for --source cifar10")?;
            let (a, b) = (classes[0], classes[1]);
            let train_bins: Vec<PathBuf> = (1..=5)
                .map(|i| dir.join(format!("data_batch_{i}.bin")))
                .collect();
            for p in &train_bins {
                require_file(p)?;
            }
            let test_bin = dir.join("test_batch.bin");
            require_file(&test_bin)?;
            let jobs: [(&str, Vec<PathBuf>); 2] =
                [("train.bds", train_bins), ("test.bds", vec![test_bin])];
            for (out_name, paths) in jobs {
                let raw = dataset::load_cifar10_bin(&paths)?;
                let ds = dataset::select_binary(&raw, a, b)?;
                if ds.is_single_class() {
                    eprintln!("warning: {out_name} holds a single class");
                }
                let out = args.out.join(out_name);
                save_container(&ds, &out)?;
                println!("wrote {}: {}", out.display(), describe(&ds));
            }
        }
        "container" => {
            let pairs = [
                ("train.bds", args.train.as_ref()),
                ("test.bds", args.test.as_ref()),
            ];
            let mut wrote = 0;
            for (out_name, source) in pairs {
                let Some(source) = source else { continue };
                require_file(source)?;
                let bytes = fs::read(source)?;
                // validate, then copy the original bytes verbatim
                let ds = dataset::parse_container(&bytes)?;
                let out = args.out.join(out_name);
                fs::write(&out, &bytes)?;
                println!("wrote {}: {}", out.display(), describe(&ds));
                wrote += 1;
            }
            if wrote == 0 {
                bail!("--source container needs --train and/or --test");
            }
        }
        other => bail!("unknown source {other:?} (expected mnist|cifar10|container)"),
    }
    Ok(())
}

fn merged_train_plan(args: &TrainArgs, file: &ExperimentConfig, d: usize) -> Result<TrainPlan> {
    let t = &file.train;
    let model_name = args
        .model
        .clone()
        .or_else(|| t.model.clone())
        .context("--model is required (scd01|mlp01|svm|mlp)")?;
    let model = ModelChoice::parse(&model_name)?;
    let global_seed = args.seed.or(file.seed).unwrap_or(0);
    let base_seed = derive_seed(global_seed, &format!("train:{}", model.name()));

    let scd_defaults = ScdConfig::default();
    let scd = ScdConfig {
        iterations: args.iters.or(t.iters).unwrap_or(scd_defaults.iterations),
        features_per_step: args
            .k_features
            .or(t.k_features)
            .unwrap_or_else(|| default_k_features(d)),
        step_size: args.eta.or(t.eta).unwrap_or(scd_defaults.step_size),
        batch_fraction: args
            .batch_frac
            .or(t.batch_frac)
            .unwrap_or(scd_defaults.batch_fraction),
        threshold_cap: args
            .threshold_cap
            .or(t.threshold_cap)
            .unwrap_or(scd_defaults.threshold_cap),
        seed: base_seed,
    };
    let mlp01 = Mlp01Config {
        scd: scd.clone(),
        hidden_k: args.hidden.or(t.hidden).unwrap_or(20),
    };
    let sgd_defaults = SgdConfig::default();
    let sgd = SgdConfig {
        batch: args.sgd_batch.or(t.sgd_batch).unwrap_or(sgd_defaults.batch),
        momentum: args
            .sgd_momentum
            .or(t.sgd_momentum)
            .unwrap_or(sgd_defaults.momentum),
        learning_rate: args
            .sgd_lr
            .or(t.sgd_lr)
            .unwrap_or(sgd_defaults.learning_rate),
        epochs: args
            .sgd_epochs
            .or(t.sgd_epochs)
            .unwrap_or(sgd_defaults.epochs),
        seed: base_seed,
    };
    let svm_defaults = SvmConfig::default();
    let svm = SvmConfig {
        c_grid: args
            .c_grid
            .clone()
            .or_else(|| t.c_grid.clone())
            .unwrap_or(svm_defaults.c_grid),
        folds: args.folds.or(t.folds).unwrap_or(svm_defaults.folds),
        epochs: args
            .svm_epochs
            .or(t.svm_epochs)
            .unwrap_or(svm_defaults.epochs),
        seed: base_seed,
    };
    let vote_mode = match args.vote_mode.clone().or_else(|| t.vote_mode.clone()) {
        Some(s) => parse_vote_mode(&s)?,
        None => model.default_vote_mode(),
    };
    Ok(TrainPlan {
        model,
        votes: args.votes.or(t.votes).unwrap_or(1),
        vote_mode,
        base_seed,
        scd,
        mlp01,
        sgd,
        svm,
    })
}

fn blob_accuracy(blob: &EnsembleBlob, ds: &BinaryDataset) -> f64 {
    use rayon::prelude::*;
    let hits = (0..ds.n())
        .into_par_iter()
        .filter(|&i| blob.predict(ds.row(i)) == ds.label(i))
        .count();
    hits as f64 / ds.n() as f64
}

#[derive(Serialize)]
struct TrainManifest {
    command: &'static str,
    version: &'static str,
    global_seed: u64,
    train_path: String,
    test_path: Option<String>,
    train_shape: (usize, usize),
    config: crate::config::EffectiveTrain,
    member_seeds: Vec<u64>,
    chosen_svm_c: Option<f64>,
    clean_train_accuracy: f64,
    clean_test_accuracy: Option<f64>,
    wall_clock_seconds: f64,
    model_file: String,
}

pub(crate) fn train(args: TrainArgs) -> Result<()> {
    configure_jobs(args.jobs);
    let file_cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    require_file(&args.train)?;
    let train_ds = load_container(&args.train)?;
    let test_ds = match &args.test {
        Some(p) => {
            require_file(p)?;
            Some(load_container(p)?)
        }
        None => None,
    };
    if let Some(test) = &test_ds {
        if test.dim() != train_ds.dim() {
            bail!(
                "dimension mismatch: train d={} vs test d={}",
                train_ds.dim(),
                test.dim()
            );
        }
    }
    let plan = merged_train_plan(&args, &file_cfg, train_ds.dim())?;
    let global_seed = args.seed.or(file_cfg.seed).unwrap_or(0);

    let started = Instant::now();
    let mut chosen_svm_c = None;
    let blob = match plan.model {
        ModelChoice::Scd01 => {
            let scd = plan.scd.clone();
            let e = train_vote(
                |ds, seed| {
                    let cfg = ScdConfig {
                        seed,
                        ..scd.clone()
                    };
                    Ok(train_scd01(ds, &cfg)?.model)
                },
                &train_ds,
                plan.votes,
                plan.base_seed,
                plan.vote_mode,
            )?;
            EnsembleBlob::Scd01(e)
        }
        ModelChoice::Mlp01 => {
            let cfg0 = plan.mlp01.clone();
            let e = train_vote(
                |ds, seed| {
                    let cfg = Mlp01Config {
                        scd: ScdConfig {
                            seed,
                            ..cfg0.scd.clone()
                        },
                        hidden_k: cfg0.hidden_k,
                    };
                    Ok(train_mlp01(ds, &cfg)?.model)
                },
                &train_ds,
                plan.votes,
                plan.base_seed,
                plan.vote_mode,
            )?;
            EnsembleBlob::Mlp01(e)
        }
        ModelChoice::Svm => {
            // cross-validate the regularization once on the full training
            // set, then fit every ensemble member at the chosen value
            let c = select_svm_c(&train_ds, &plan.svm)?;
            chosen_svm_c = Some(c);
            let fixed = SvmConfig {
                c_grid: vec![c],
                ..plan.svm.clone()
            };
            let e = train_vote(
                |ds, seed| {
                    loss01::train_svm(
                        ds,
                        &SvmConfig {
                            seed,
                            ..fixed.clone()
                        },
                    )
                },
                &train_ds,
                plan.votes,
                plan.base_seed,
                plan.vote_mode,
            )?;
            EnsembleBlob::Svm(e)
        }
        ModelChoice::Mlp => {
            let sgd0 = plan.sgd.clone();
            let hidden = vec![plan.mlp01.hidden_k];
            let e = train_vote(
                |ds, seed| {
                    train_mlp(
                        ds,
                        &hidden,
                        &SgdConfig {
                            seed,
                            ..sgd0.clone()
                        },
                    )
                },
                &train_ds,
                plan.votes,
                plan.base_seed,
                plan.vote_mode,
            )?;
            EnsembleBlob::Mlp(e)
        }
    };
    let wall = started.elapsed().as_secs_f64();

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let model_path = args.out.join("model.m01v");
    save_model(&blob, &model_path)?;

    let clean_train = blob_accuracy(&blob, &train_ds);
    let clean_test = test_ds.as_ref().map(|ds| blob_accuracy(&blob, ds));
    let manifest = TrainManifest {
        command: "train",
        version: VERSION,
        global_seed,
        train_path: args.train.display().to_string(),
        test_path: args.test.as_ref().map(|p| p.display().to_string()),
        train_shape: (train_ds.n(), train_ds.dim()),
        config: plan.echo(),
        member_seeds: blob.member_seeds().to_vec(),
        chosen_svm_c,
        clean_train_accuracy: clean_train,
        clean_test_accuracy: clean_test,
        wall_clock_seconds: wall,
        model_file: model_path.display().to_string(),
    };
    fs::write(
        args.out.join("train_report.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    println!(
        "trained {} x{} ({}): clean train acc {:.4}{}  [{}]",
        plan.model.name(),
        plan.votes,
        manifest.config.vote_mode,
        clean_train,
        clean_test
            .map(|a| format!(", clean test acc {a:.4}"))
            .unwrap_or_default(),
        model_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AttackManifest {
    command: &'static str,
    version: &'static str,
    global_seed: u64,
    attack_seed: u64,
    target_path: String,
    target_kind: String,
    target_members: usize,
    eval_path: String,
    eval_shape: (usize, usize),
    substitute: String,
    sub_hidden: Option<Vec<usize>>,
    sub_sgd_epochs: Option<usize>,
    sub_iters: Option<usize>,
    epsilon: f64,
    epochs: usize,
    max_set_multiple: usize,
    substitute_pool: Option<String>,
    total_queries: u64,
    clean_accuracy: f64,
    final_adversarial_accuracy: f64,
    wall_clock_seconds: f64,
    trace_file: String,
}

/// SGD epochs per substitute retraining round. Smaller than the baseline
/// training budget: the substitute refits every round on an easy two-class
/// task.
const DEFAULT_SUB_SGD_EPOCHS: usize = 10;

pub(crate) fn attack(args: AttackArgs) -> Result<()> {
    configure_jobs(args.jobs);
    let file_cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let a = &file_cfg.attack;
    require_file(&args.target)?;
    require_file(&args.eval)?;
    let blob = load_model(&args.target)?;
    let eval = load_container(&args.eval)?;
    if blob.dim() != eval.dim() {
        bail!(
            "dimension mismatch: target d={} vs eval d={}",
            blob.dim(),
            eval.dim()
        );
    }
    let seed_pool = match &args.substitute_pool {
        Some(p) => {
            require_file(p)?;
            Some(load_container(p)?)
        }
        None => None,
    };

    let global_seed = args.seed.or(file_cfg.seed).unwrap_or(0);
    let attack_seed = derive_seed(global_seed, "attack");
    let substitute = args
        .substitute
        .clone()
        .or_else(|| a.substitute.clone())
        .unwrap_or_else(|| "mlp".to_string());
    let sub_hidden = args
        .sub_hidden
        .clone()
        .or_else(|| a.sub_hidden.clone())
        .unwrap_or_else(|| vec![200, 200]);
    let sub_sgd_epochs = args.sub_sgd_epochs.or(a.sub_sgd_epochs);
    let sub_iters = args.sub_iters.or(a.sub_iters);
    let spec = match substitute.as_str() {
        "mlp" => SubstituteSpec::Mlp {
            hidden: sub_hidden.clone(),
            sgd: SgdConfig {
                epochs: sub_sgd_epochs.unwrap_or(DEFAULT_SUB_SGD_EPOCHS),
                ..SgdConfig::default()
            },
        },
        "scd01" => SubstituteSpec::Scd01(ScdConfig {
            iterations: sub_iters.unwrap_or(1000),
            features_per_step: args
                .sub_k_features
                .or(a.sub_k_features)
                .unwrap_or_else(|| default_k_features(eval.dim())),
            ..ScdConfig::default()
        }),
        other => bail!("unknown substitute {other:?} (expected mlp|scd01)"),
    };
    let cfg = AttackConfig {
        epsilon: args
            .epsilon
            .or(a.epsilon)
            .unwrap_or(AttackConfig::default().epsilon),
        epochs: args.epochs.or(a.epochs).unwrap_or(20),
        max_set_multiple: args.max_set_multiple.or(a.max_set_multiple).unwrap_or(8),
        seed: attack_seed,
    };

    let started = Instant::now();
    let target = TargetOracle::new(|x| blob.predict(x));
    let trace = run_attack(&target, &eval, seed_pool.as_ref(), &spec, &cfg)?;
    let wall = started.elapsed().as_secs_f64();

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let trace_path = args.out.join("trace.csv");
    fs::write(&trace_path, trace.to_csv())?;
    let manifest = AttackManifest {
        command: "attack",
        version: VERSION,
        global_seed,
        attack_seed,
        target_path: args.target.display().to_string(),
        target_kind: blob.kind().name().to_string(),
        target_members: blob.len(),
        eval_path: args.eval.display().to_string(),
        eval_shape: (eval.n(), eval.dim()),
        substitute,
        sub_hidden: matches!(spec, SubstituteSpec::Mlp { .. }).then_some(sub_hidden),
        sub_sgd_epochs,
        sub_iters,
        epsilon: cfg.epsilon,
        epochs: cfg.epochs,
        max_set_multiple: cfg.max_set_multiple,
        substitute_pool: args
            .substitute_pool
            .as_ref()
            .map(|p| p.display().to_string()),
        total_queries: target.query_count(),
        clean_accuracy: trace.clean_acc(),
        final_adversarial_accuracy: trace.final_adv_acc(),
        wall_clock_seconds: wall,
        trace_file: trace_path.display().to_string(),
    };
    fs::write(
        args.out.join("attack_manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    println!(
        "attacked {} x{}: clean acc {:.4}, epoch-{} adversarial acc {:.4}  [{}]",
        manifest.target_kind,
        manifest.target_members,
        trace.clean_acc(),
        cfg.epochs,
        trace.final_adv_acc(),
        trace_path.display()
    );
    Ok(())
}

pub(crate) fn report(args: ReportArgs) -> Result<()> {
    let names: Vec<String> = match &args.names {
        Some(names) => {
            if names.len() != args.traces.len() {
                bail!("{} names for {} traces", names.len(), args.traces.len());
            }
            names.clone()
        }
        None => args
            .traces
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string())
            })
            .collect(),
    };
    let mut traces = Vec::new();
    for path in &args.traces {
        require_file(path)?;
        let text = fs::read_to_string(path)?;
        let trace = AttackTrace::from_csv(&text)
            .with_context(|| format!("parsing trace {}", path.display()))?;
        traces.push(trace);
    }
    let epochs = traces[0].records.len();
    for (trace, path) in traces.iter().zip(&args.traces) {
        if trace.records.len() != epochs {
            bail!(
                "trace {} has {} epochs, expected {} (traces must align)",
                path.display(),
                trace.records.len() - 1,
                epochs - 1
            );
        }
    }

    let mut merged = String::from("epoch");
    for name in &names {
        merged.push_str(&format!(",{name}_adv_acc"));
    }
    merged.push('\n');
    for e in 0..epochs {
        merged.push_str(&traces[0].records[e].epoch.to_string());
        for trace in &traces {
            merged.push_str(&format!(",{}", trace.records[e].adv_acc));
        }
        merged.push('\n');
    }

    let mut summary = String::from("model,clean_acc,final_adv_acc\n");
    for (name, trace) in names.iter().zip(&traces) {
        summary.push_str(&format!(
            "{name},{},{}\n",
            trace.clean_acc(),
            trace.final_adv_acc()
        ));
    }

    match &args.out {
        Some(path) => {
            fs::write(path, &merged)?;
            println!("wrote {}", path.display());
        }
        None => print!("{merged}"),
    }
    print!("{summary}");
    Ok(())
}
