//! Stochastic coordinate descent on the 01 loss for linear models.
//!
//! Each step samples a batch and a set of coordinates, perturbs one weight
//! at a time by the step size in both directions, re-optimizes the threshold
//! with the capped line search, and ranks the candidates by batch loss. The
//! standalone [`coordinate_step`] applies the winner only on a strict
//! improvement; the trainer instead walks to the winner every iteration
//! (ties broken at random), letting the search drift across the plateaus of
//! the piecewise-constant loss, while an incumbent tracked on the full
//! training set keeps the best parameters ever seen and is what the run
//! returns.

use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{sample_distinct, BinaryDataset};
use crate::error::{Error, Result};
use crate::loss::{sign01, threshold_search, LinearModel, SweepRow};
use crate::rng::{derive_seed, seeded_rng, Rng};

/// Hyperparameters of the coordinate-descent search.
#[derive(Debug, Clone)]
pub struct ScdConfig {
    /// Batch update steps to run.
    pub iterations: usize,
    /// Coordinates sampled per step (64 suits 784-dim inputs, 128 suits
    /// 3072-dim, 256 larger).
    pub features_per_step: usize,
    /// Magnitude of each coordinate perturbation.
    pub step_size: f64,
    /// Batch size as a fraction of the training rows.
    pub batch_fraction: f64,
    /// Threshold line-search subsample cap.
    pub threshold_cap: usize,
    pub seed: u64,
}

impl Default for ScdConfig {
    fn default() -> Self {
        ScdConfig {
            iterations: 1000,
            features_per_step: 64,
            step_size: 0.17,
            batch_fraction: 0.25,
            threshold_cap: 1000,
            seed: 0,
        }
    }
}

impl ScdConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::config(format!(
                "batch_fraction {} outside (0, 1]",
                self.batch_fraction
            )));
        }
        if self.step_size <= 0.0 || self.step_size.is_nan() {
            return Err(Error::config(format!(
                "step_size {} must be positive",
                self.step_size
            )));
        }
        if self.features_per_step == 0 || self.features_per_step > d {
            return Err(Error::config(format!(
                "features_per_step {} outside 1..={d}",
                self.features_per_step
            )));
        }
        if self.threshold_cap < 2 {
            return Err(Error::config("threshold_cap must be >= 2"));
        }
        Ok(())
    }

    pub(crate) fn batch_size(&self, n: usize) -> usize {
        ((self.batch_fraction * n as f64).ceil() as usize).clamp(1, n)
    }
}

/// A finished training run: the incumbent model and its bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainedRun<M> {
    pub model: M,
    /// 01 loss of `model` on the full training set.
    pub best_full_loss: f64,
    pub seed: u64,
    /// Iteration at which the incumbent was last improved (0 = the initial
    /// random model).
    pub iteration_of_best: usize,
}

/// Draws a model with all parameters i.i.d. standard normal.
pub fn init_linear(d: usize, seed: u64) -> LinearModel {
    assert!(d >= 1, "dimension must be >= 1");
    let mut rng = seeded_rng(seed);
    let w = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let w0 = StandardNormal.sample(&mut rng);
    LinearModel::new(w, w0)
}

/// The move a coordinate step settled on.
#[derive(Debug, Clone, Copy)]
pub(crate) enum StepMove {
    /// Perturb one coordinate and adopt its re-optimized threshold.
    Coordinate {
        coord: usize,
        delta: f64,
        new_w0: f64,
    },
    /// Keep the weights; only re-optimize the threshold.
    ThresholdOnly { new_w0: f64 },
}

/// Ranked outcome of one candidate scan.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CoreStep {
    /// The best-ranked candidate, whether or not it improves.
    pub mv: StepMove,
    /// Batch error count of `mv`.
    pub move_errors: usize,
    /// Batch error count of the incoming model, threshold as-is.
    pub current_errors: usize,
}

impl CoreStep {
    pub fn improves(&self) -> bool {
        self.move_errors < self.current_errors
    }
}

/// How the candidate scan breaks ties between equal-loss moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TieRule {
    /// First candidate in visit order wins: lowest coordinate, `+step`
    /// before `-step`.
    First,
    /// A uniformly random candidate among the minima wins (seeded). The
    /// training walk uses this so that plateau steps diffuse over
    /// directions instead of piling onto the first coordinate.
    Uniform,
}

/// Shared candidate loop of the linear and output-node coordinate steps.
///
/// `base_proj` holds `w . x` per batch row (threshold excluded), `get_col`
/// fills a coordinate's batch column, and the sweep-row factory turns a
/// projection into error flags (identity for the linear case, end-to-end
/// for the dual-layer hidden step).
///
/// Every candidate — one coordinate perturbed by `+step` or `-step` — gets
/// its threshold re-optimized by the capped line search and is ranked by
/// its batch error count. The unperturbed weights with a re-optimized
/// threshold join the pool as the zero candidate; it never loses to the
/// incoming threshold, so the winner's batch loss never exceeds the current
/// one. Fewer errors rank first, then coordinate moves over the zero
/// candidate (so the direction search keeps exploring on ties), then the
/// given tie rule. The winner is returned even when it does not strictly
/// improve; callers decide whether to take non-improving moves.
#[allow(clippy::too_many_arguments)]
pub(crate) fn coordinate_step_core(
    base_proj: &[f64],
    current_w0: f64,
    coords: &[usize],
    get_col: &mut dyn FnMut(usize, &mut [f64]),
    make_row: &dyn Fn(f64, usize) -> SweepRow,
    step_size: f64,
    cap: usize,
    tie: TieRule,
    rng: &mut Rng,
) -> CoreStep {
    use rand::Rng as _;

    let b = base_proj.len();
    let rows: Vec<SweepRow> = base_proj
        .iter()
        .enumerate()
        .map(|(i, &p)| make_row(p, i))
        .collect();
    let current_errors = rows.iter().filter(|r| r.errs(current_w0)).count();
    let baseline = threshold_search(&rows, cap, rng, Some(current_w0));

    let mut col = vec![0.0f64; b];
    let mut cand_rows = rows.clone();
    let mut best: Option<StepMove> = None;
    let mut best_errors = usize::MAX;
    let mut ties = 0u64; // minima seen at best_errors, for reservoir choice

    for &coord in coords {
        get_col(coord, &mut col);
        for delta in [step_size, -step_size] {
            for i in 0..b {
                cand_rows[i] = make_row(base_proj[i] + delta * col[i], i);
            }
            let res = threshold_search(&cand_rows, cap, rng, Some(current_w0));
            let candidate = StepMove::Coordinate {
                coord,
                delta,
                new_w0: res.w0,
            };
            if res.errors < best_errors {
                best_errors = res.errors;
                best = Some(candidate);
                ties = 1;
            } else if res.errors == best_errors && tie == TieRule::Uniform {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best = Some(candidate);
                }
            }
        }
    }
    match best {
        Some(mv) if best_errors <= baseline.errors => CoreStep {
            mv,
            move_errors: best_errors,
            current_errors,
        },
        _ => CoreStep {
            mv: StepMove::ThresholdOnly {
                new_w0: baseline.w0,
            },
            move_errors: baseline.errors,
            current_errors,
        },
    }
}

pub(crate) fn label_row(proj: f64, y: i8) -> SweepRow {
    SweepRow {
        proj,
        err_plus: y != 1,
        err_minus: y != -1,
    }
}

/// One coordinate-descent step on a batch.
///
/// Returns the updated model and whether any candidate strictly improved on
/// the incumbent's batch loss (incumbent threshold re-optimized for
/// fairness). Without improvement the input model is returned unchanged.
pub fn coordinate_step(
    m: &LinearModel,
    batch: &BinaryDataset,
    cfg: &ScdConfig,
    rng: &mut Rng,
) -> Result<(LinearModel, bool)> {
    let d = batch.dim();
    if m.dim() != d {
        return Err(Error::DimMismatch {
            expected: m.dim(),
            got: d,
        });
    }
    if cfg.features_per_step > d {
        return Err(Error::config(format!(
            "features_per_step {} > dimension {d}",
            cfg.features_per_step
        )));
    }

    let base_proj: Vec<f64> = (0..batch.n()).map(|i| m.projection(batch.row(i))).collect();
    let mut coords = sample_distinct(rng, d, cfg.features_per_step);
    coords.sort_unstable();

    let labels = batch.labels();
    let step = coordinate_step_core(
        &base_proj,
        m.w0,
        &coords,
        &mut |c, out| {
            for (k, v) in out.iter_mut().enumerate() {
                *v = f64::from(batch.row(k)[c]);
            }
        },
        &|proj, i| label_row(proj, labels[i]),
        cfg.step_size,
        cfg.threshold_cap,
        TieRule::First,
        rng,
    );

    if !step.improves() {
        return Ok((m.clone(), false));
    }
    let mut next = m.clone();
    match step.mv {
        StepMove::Coordinate {
            coord,
            delta,
            new_w0,
        } => {
            next.w[coord] += delta;
            next.w0 = new_w0;
        }
        StepMove::ThresholdOnly { new_w0 } => next.w0 = new_w0,
    }
    Ok((next, true))
}

fn degenerate_single_class(ds: &BinaryDataset, seed: u64) -> TrainedRun<LinearModel> {
    let sign = if ds.pos_count() > 0 { 1.0 } else { -1.0 };
    TrainedRun {
        model: LinearModel::new(vec![0.0; ds.dim()], sign),
        best_full_loss: 0.0,
        seed,
        iteration_of_best: 0,
    }
}

/// Trains a linear 01-loss model by stochastic coordinate descent and
/// returns the incumbent with the lowest full-set loss, together with the
/// incumbent loss after each iteration.
///
/// Each iteration samples a fresh batch, scans the candidate moves, and
/// walks to the best-ranked one whether or not it improves that batch; the
/// full training set is consulted only when a batch improvement occurs, and
/// the best full-set parameters seen are what the run returns.
///
/// Single-class data degenerates to a threshold-only model that always emits
/// the present class.
pub fn train_scd01_traced(
    train: &BinaryDataset,
    cfg: &ScdConfig,
) -> Result<(TrainedRun<LinearModel>, Vec<f64>)> {
    let d = train.dim();
    let n = train.n();
    cfg.validate(d)?;
    if train.is_single_class() {
        let run = degenerate_single_class(train, cfg.seed);
        return Ok((run, vec![0.0; cfg.iterations]));
    }

    let mut model = init_linear(d, cfg.seed);
    let mut rng = seeded_rng(derive_seed(cfg.seed, "scd-batches"));
    let batch_n = cfg.batch_size(n);
    let features = train.features();
    let labels = train.labels();

    // Full-set projections, maintained incrementally across accepted steps.
    let mut q: Vec<f64> = (0..n).map(|i| model.projection(train.row(i))).collect();
    let full_errors = |q: &[f64], w0: f64| -> usize {
        q.iter()
            .zip(labels.iter())
            .filter(|(&p, &y)| sign01(p + w0) != y)
            .count()
    };

    let mut best = TrainedRun {
        model: model.clone(),
        best_full_loss: full_errors(&q, model.w0) as f64 / n as f64,
        seed: cfg.seed,
        iteration_of_best: 0,
    };
    let mut trace = Vec::with_capacity(cfg.iterations);

    let mut batch_proj = vec![0.0f64; batch_n];
    let mut batch_labels = vec![0i8; batch_n];

    for iter in 1..=cfg.iterations {
        let batch_idx = sample_distinct(&mut rng, n, batch_n);
        for (k, &r) in batch_idx.iter().enumerate() {
            batch_proj[k] = q[r];
            batch_labels[k] = labels[r];
        }
        let mut coords = sample_distinct(&mut rng, d, cfg.features_per_step);
        coords.sort_unstable();

        let step = coordinate_step_core(
            &batch_proj,
            model.w0,
            &coords,
            &mut |c, out| {
                for (k, &r) in batch_idx.iter().enumerate() {
                    out[k] = f64::from(features[r * d + c]);
                }
            },
            &|proj, i| label_row(proj, batch_labels[i]),
            cfg.step_size,
            cfg.threshold_cap,
            TieRule::Uniform,
            &mut rng,
        );

        // The walking point always takes the ranked move, improving or not;
        // batches vary, so the search drifts across plateaus instead of
        // freezing. The incumbent below is what protects the result.
        match step.mv {
            StepMove::Coordinate {
                coord,
                delta,
                new_w0,
            } => {
                model.w[coord] += delta;
                model.w0 = new_w0;
                for (r, qi) in q.iter_mut().enumerate() {
                    *qi += delta * f64::from(features[r * d + coord]);
                }
            }
            StepMove::ThresholdOnly { new_w0 } => model.w0 = new_w0,
        }
        if step.improves() {
            let loss = full_errors(&q, model.w0) as f64 / n as f64;
            if loss < best.best_full_loss {
                best.model = model.clone();
                best.best_full_loss = loss;
                best.iteration_of_best = iter;
            }
        }
        trace.push(best.best_full_loss);
    }
    Ok((best, trace))
}

/// [`train_scd01_traced`] without the per-iteration incumbent record.
pub fn train_scd01(train: &BinaryDataset, cfg: &ScdConfig) -> Result<TrainedRun<LinearModel>> {
    train_scd01_traced(train, cfg).map(|(run, _)| run)
}
