//! Substitute-model black-box attacks against a label-only oracle.
//!
//! The attacker sees a target only as `x -> {+1, -1}`. It trains a
//! substitute on target-labeled data, crafts white-box adversaries against
//! the substitute (FGSM for the sigmoid MLP, the sign-of-weights move for a
//! linear substitute), measures them on the target, and grows its training
//! set with the adversaries labeled by fresh target queries - repeating for
//! a fixed number of epochs. The per-epoch record of target accuracy on
//! adversaries, together with substitute agreement rates, is the harness's
//! primary output.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::convex::{input_gradient, train_mlp, SgdConfig, SigmoidMlpModel};
use crate::dataset::{sample_distinct, BinaryDataset};
use crate::error::{Error, Result};
use crate::loss::{sign01, LinearModel};
use crate::rng::{derive_seed, seeded_rng};
use crate::scd::{train_scd01, ScdConfig};
use crate::vote::Classifier;

type LabelFn<'a> = Box<dyn Fn(&[f32]) -> i8 + Send + Sync + 'a>;

/// A target model exposed only through its output labels, with an exact
/// cumulative query counter (atomic, so adversary batches may query
/// concurrently).
pub struct TargetOracle<'a> {
    label_fn: LabelFn<'a>,
    queries: AtomicU64,
}

impl<'a> TargetOracle<'a> {
    pub fn new(f: impl Fn(&[f32]) -> i8 + Send + Sync + 'a) -> Self {
        TargetOracle {
            label_fn: Box::new(f),
            queries: AtomicU64::new(0),
        }
    }

    pub fn from_classifier<C: Classifier>(model: &'a C) -> Self {
        TargetOracle::new(move |x| model.predict(x))
    }

    /// Queries the target for one label.
    pub fn label(&self, x: &[f32]) -> i8 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        (self.label_fn)(x)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

/// Attack hyperparameters. Typical distortions: 0.2 on 28x28 digit data,
/// 0.0625 on 32x32x3 natural images, 0.03125 on street-sign crops.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// Per-pixel max-norm budget in fractional units.
    pub epsilon: f64,
    /// Substitute training epochs (one adversary generation round each).
    pub epochs: usize,
    /// Substitute training set cap, as a multiple of the initial pool size.
    pub max_set_multiple: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.0625,
            epochs: 20,
            max_set_multiple: 8,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        // epsilon = 0 is allowed as a diagnostic (the adversaries equal the
        // clean rows and the curve stays flat at clean accuracy)
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::config(format!(
                "epsilon {} outside [0, 1)",
                self.epsilon
            )));
        }
        if self.epochs == 0 {
            return Err(Error::config("attack epochs must be >= 1"));
        }
        if self.max_set_multiple == 0 {
            return Err(Error::config("max_set_multiple must be >= 1"));
        }
        Ok(())
    }
}

/// The substitute the attacker trains each epoch.
#[derive(Debug, Clone)]
pub enum SubstituteSpec {
    /// Sigmoid MLP with the given hidden widths, FGSM adversaries.
    Mlp { hidden: Vec<usize>, sgd: SgdConfig },
    /// Single linear 01-loss run, sign-of-weights adversaries.
    Scd01(ScdConfig),
}

impl SubstituteSpec {
    /// The standard convex substitute: two 200-node sigmoid hidden layers.
    pub fn default_mlp() -> Self {
        SubstituteSpec::Mlp {
            hidden: vec![200, 200],
            sgd: SgdConfig::default(),
        }
    }
}

/// One row of an attack trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u32,
    /// Target accuracy on this epoch's adversaries (clean accuracy at
    /// epoch 0).
    pub adv_acc: f64,
    /// Substitute/target label match rate on clean eval rows.
    pub match_clean: f64,
    /// Substitute/target label match rate on this epoch's adversaries.
    pub match_adv: f64,
    /// Substitute accuracy on its own (target-labeled) training set.
    pub sub_train_acc: f64,
    /// Cumulative target queries.
    pub queries: u64,
}

/// Per-epoch attack record: `epochs + 1` rows, epoch 0 holding the target's
/// clean accuracy (substitute columns are zero there - no substitute exists
/// yet).
#[derive(Debug, Clone, PartialEq)]
pub struct AttackTrace {
    pub records: Vec<EpochRecord>,
}

pub const TRACE_CSV_HEADER: &str = "epoch,adv_acc,match_clean,match_adv,sub_train_acc,queries";

impl AttackTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.adv_acc, r.match_clean, r.match_adv, r.sub_train_acc, r.queries
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<AttackTrace> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == TRACE_CSV_HEADER => {}
            other => {
                return Err(Error::format(format!(
                    "trace header {:?}, expected {TRACE_CSV_HEADER:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::format(format!(
                    "trace line {} has {} fields, expected 6",
                    i + 2,
                    fields.len()
                )));
            }
            let parse_f = |s: &str, what: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::format(format!("bad {what} value {s:?}")))
            };
            records.push(EpochRecord {
                epoch: fields[0]
                    .trim()
                    .parse()
                    .map_err(|_| Error::format(format!("bad epoch value {:?}", fields[0])))?,
                adv_acc: parse_f(fields[1], "adv_acc")?,
                match_clean: parse_f(fields[2], "match_clean")?,
                match_adv: parse_f(fields[3], "match_adv")?,
                sub_train_acc: parse_f(fields[4], "sub_train_acc")?,
                queries: fields[5]
                    .trim()
                    .parse()
                    .map_err(|_| Error::format(format!("bad queries value {:?}", fields[5])))?,
            });
        }
        if records.is_empty() {
            return Err(Error::format("trace has no records"));
        }
        Ok(AttackTrace { records })
    }

    /// Adversarial accuracy at the final epoch.
    pub fn final_adv_acc(&self) -> f64 {
        self.records.last().unwrap().adv_acc
    }

    /// Clean accuracy (the epoch-0 row).
    pub fn clean_acc(&self) -> f64 {
        self.records[0].adv_acc
    }
}

/// Rounds `target` to f32 while guaranteeing the result stays inside
/// `[max(0, x - eps), min(1, x + eps)]`; f32 rounding never leaks budget.
fn budget_round(x: f32, target: f64, eps: f64) -> f32 {
    let lo = (f64::from(x) - eps).max(0.0);
    let hi = (f64::from(x) + eps).min(1.0);
    let mut v = target.clamp(0.0, 1.0) as f32;
    while f64::from(v) > hi {
        v = v.next_down();
    }
    while f64::from(v) < lo {
        v = v.next_up();
    }
    v
}

/// True when `adv` stays within the max-norm budget of `clean` and in
/// `[0, 1]`.
pub fn adversary_within_budget(clean: &[f32], adv: &[f32], eps: f64) -> bool {
    clean.len() == adv.len()
        && clean
            .iter()
            .zip(adv.iter())
            .all(|(&c, &a)| (f64::from(a) - f64::from(c)).abs() <= eps && (0.0..=1.0).contains(&a))
}

/// FGSM against a sigmoid substitute: perturb each pixel by `epsilon` times
/// the sign of the input gradient of the logistic loss at the target-queried
/// label, then clamp to `[0, 1]`.
pub fn fgsm(m: &SigmoidMlpModel, x: &[f32], y_target_label: i8, epsilon: f64) -> Vec<f32> {
    let y = if y_target_label > 0 { 1.0 } else { 0.0 };
    let grad = input_gradient(m, x, y);
    x.iter()
        .zip(grad.iter())
        .map(|(&xi, &g)| {
            let step = epsilon * f64::from(sign01(g));
            budget_round(xi, f64::from(xi) + step, epsilon)
        })
        .collect()
}

/// Adversary from a linear substitute: `x' = clamp(x - eps * y * sign(w))`.
pub fn linear_adversary(m: &LinearModel, x: &[f32], y: i8, epsilon: f64) -> Vec<f32> {
    assert_eq!(m.w.len(), x.len(), "feature dimension mismatch");
    x.iter()
        .zip(m.w.iter())
        .map(|(&xi, &wi)| {
            let step = -epsilon * f64::from(y) * f64::from(sign01(wi));
            budget_round(xi, f64::from(xi) + step, epsilon)
        })
        .collect()
}

/// Fraction of rows labeled identically by the two labelers.
pub fn label_match_rate<F, G>(a: F, b: G, rows: &BinaryDataset) -> f64
where
    F: Fn(&[f32]) -> i8,
    G: Fn(&[f32]) -> i8,
{
    let matches = (0..rows.n())
        .filter(|&i| a(rows.row(i)) == b(rows.row(i)))
        .count();
    matches as f64 / rows.n() as f64
}

enum SubstituteModel {
    Mlp(SigmoidMlpModel),
    Linear(LinearModel),
}

impl SubstituteModel {
    fn predict(&self, x: &[f32]) -> i8 {
        match self {
            SubstituteModel::Mlp(m) => m.predict(x),
            SubstituteModel::Linear(m) => crate::loss::predict_linear(m, x),
        }
    }

    fn adversary(&self, x: &[f32], y_target: i8, eps: f64) -> Vec<f32> {
        match self {
            SubstituteModel::Mlp(m) => fgsm(m, x, y_target, eps),
            SubstituteModel::Linear(m) => linear_adversary(m, x, y_target, eps),
        }
    }
}

fn fit_substitute(
    spec: &SubstituteSpec,
    set: &BinaryDataset,
    seed: u64,
) -> Result<SubstituteModel> {
    match spec {
        SubstituteSpec::Mlp { hidden, sgd } => {
            let cfg = SgdConfig {
                seed,
                ..sgd.clone()
            };
            Ok(SubstituteModel::Mlp(train_mlp(set, hidden, &cfg)?))
        }
        SubstituteSpec::Scd01(scd) => {
            let cfg = ScdConfig {
                seed,
                ..scd.clone()
            };
            Ok(SubstituteModel::Linear(train_scd01(set, &cfg)?.model))
        }
    }
}

/// Runs the iterative substitute attack and records one row per epoch.
///
/// The substitute's first training set is the evaluation pool itself
/// (labeled by target queries) unless `seed_pool` supplies a disjoint set.
/// Each epoch retrains the substitute from a fresh seeded initialization,
/// generates one adversary per eval row using the target's label for that
/// row, measures the target on the adversaries, and augments the training
/// set with the adversaries labeled by those same fresh target queries,
/// subsampling back to the cap when the union outgrows it.
pub fn run_attack(
    target: &TargetOracle,
    eval_pool: &BinaryDataset,
    seed_pool: Option<&BinaryDataset>,
    spec: &SubstituteSpec,
    cfg: &AttackConfig,
) -> Result<AttackTrace> {
    cfg.validate()?;
    if let Some(pool) = seed_pool {
        if pool.dim() != eval_pool.dim() {
            return Err(Error::DimMismatch {
                expected: eval_pool.dim(),
                got: pool.dim(),
            });
        }
    }
    let n = eval_pool.n();
    let true_labels = eval_pool.labels();

    // One query pass over the clean rows serves the epoch-0 measurement,
    // the FGSM label source, and (without a separate seed pool) the
    // substitute's first training labels.
    let clean_target_labels: Vec<i8> = (0..n).map(|i| target.label(eval_pool.row(i))).collect();
    let clean_acc = accuracy_of(&clean_target_labels, true_labels);

    let mut sub_set = match seed_pool {
        None => BinaryDataset::new(
            eval_pool.features().to_vec(),
            clean_target_labels.clone(),
            eval_pool.dim(),
        )?,
        Some(pool) => {
            let labels: Vec<i8> = (0..pool.n()).map(|i| target.label(pool.row(i))).collect();
            BinaryDataset::new(pool.features().to_vec(), labels, pool.dim())?
        }
    };
    let max_set = cfg.max_set_multiple * sub_set.n();

    let mut records = Vec::with_capacity(cfg.epochs + 1);
    records.push(EpochRecord {
        epoch: 0,
        adv_acc: clean_acc,
        match_clean: 0.0,
        match_adv: 0.0,
        sub_train_acc: 0.0,
        queries: target.query_count(),
    });

    for epoch in 1..=cfg.epochs {
        let sub = fit_substitute(
            spec,
            &sub_set,
            derive_seed(cfg.seed, &format!("substitute-{epoch}")),
        )?;
        let sub_train_acc = {
            let hits = (0..sub_set.n())
                .into_par_iter()
                .filter(|&i| sub.predict(sub_set.row(i)) == sub_set.label(i))
                .count();
            hits as f64 / sub_set.n() as f64
        };

        let adversaries: Vec<Vec<f32>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let adv = sub.adversary(eval_pool.row(i), clean_target_labels[i], cfg.epsilon);
                assert!(
                    adversary_within_budget(eval_pool.row(i), &adv, cfg.epsilon),
                    "adversary violated budget or range at row {i}"
                );
                adv
            })
            .collect();

        let adv_target_labels: Vec<i8> = adversaries
            .par_iter()
            .map(|adv| target.label(adv))
            .collect();
        let adv_acc = accuracy_of(&adv_target_labels, true_labels);

        let match_clean = {
            let hits = (0..n)
                .into_par_iter()
                .filter(|&i| sub.predict(eval_pool.row(i)) == clean_target_labels[i])
                .count();
            hits as f64 / n as f64
        };
        let match_adv = {
            let hits = (0..n)
                .into_par_iter()
                .filter(|&i| sub.predict(&adversaries[i]) == adv_target_labels[i])
                .count();
            hits as f64 / n as f64
        };

        records.push(EpochRecord {
            epoch: epoch as u32,
            adv_acc,
            match_clean,
            match_adv,
            sub_train_acc,
            queries: target.query_count(),
        });

        // Augment with the adversaries (already labeled by fresh queries);
        // cap by uniform subsampling of the union.
        let mut features = sub_set.features().to_vec();
        let mut labels = sub_set.labels().to_vec();
        for (adv, &label) in adversaries.iter().zip(adv_target_labels.iter()) {
            features.extend_from_slice(adv);
            labels.push(label);
        }
        let union = BinaryDataset::new(features, labels, eval_pool.dim())?;
        sub_set = if union.n() > max_set {
            let mut rng = seeded_rng(derive_seed(cfg.seed, &format!("augment-{epoch}")));
            let idx = sample_distinct(&mut rng, union.n(), max_set);
            union.subset(&idx)?
        } else {
            union
        };
    }
    Ok(AttackTrace { records })
}

fn accuracy_of(predicted: &[i8], truth: &[i8]) -> f64 {
    let hits = predicted
        .iter()
        .zip(truth.iter())
        .filter(|(p, t)| p == t)
        .count();
    hits as f64 / truth.len() as f64
}

/// The convex-substitute attack: a sigmoid MLP substitute (default two
/// 200-node layers) with FGSM adversaries.
pub fn run_substitute_attack(
    target: &TargetOracle,
    eval_pool: &BinaryDataset,
    spec: &SubstituteSpec,
    cfg: &AttackConfig,
) -> Result<AttackTrace> {
    run_attack(target, eval_pool, None, spec, cfg)
}

/// The linear-01-loss-substitute attack: a single coordinate-descent run
/// retrained each epoch, with sign-of-weights adversaries.
pub fn scd01_substitute_attack(
    target: &TargetOracle,
    eval_pool: &BinaryDataset,
    scd: &ScdConfig,
    cfg: &AttackConfig,
) -> Result<AttackTrace> {
    run_attack(
        target,
        eval_pool,
        None,
        &SubstituteSpec::Scd01(scd.clone()),
        cfg,
    )
}
