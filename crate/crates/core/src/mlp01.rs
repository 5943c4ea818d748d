//! The dual-layer 01-loss network and its coordinate-descent trainer.
//!
//! The model is `sign(w . sign(Wt x + W0) + w0)`: a hidden layer of `k`
//! sign-activation nodes feeding one sign output. Training alternates two
//! coordinate updates per iteration on a fresh batch: first the output node
//! (treating the batch's hidden activations as its inputs), then one
//! randomly chosen hidden node. A hidden node's bias plays the role of the
//! threshold in the line search, except that candidate biases are scored by
//! the end-to-end batch loss through the output layer - the loss is still
//! piecewise constant in that bias, with breakpoints at the node's
//! projections, so the same sweep applies.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{sample_distinct, BinaryDataset};
use crate::error::{Error, Result};
use crate::loss::{sign01, SweepRow};
use crate::rng::{derive_seed, seeded_rng, Rng};
use crate::scd::{coordinate_step_core, label_row, ScdConfig, StepMove, TieRule, TrainedRun};

/// Dual-layer sign-activation model. Hidden weights are stored column-major:
/// column `j` holds the `d` input weights of hidden node `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp01Model {
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
    pub d: usize,
    pub k: usize,
}

impl Mlp01Model {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn hidden_nodes(&self) -> usize {
        self.k
    }

    /// Input weights of hidden node `j`.
    pub fn hidden_col(&self, j: usize) -> &[f64] {
        &self.hidden_w[j * self.d..(j + 1) * self.d]
    }

    /// `column_j . x` without the node bias.
    pub(crate) fn node_projection(&self, j: usize, x: &[f32]) -> f64 {
        self.hidden_col(j)
            .iter()
            .zip(x.iter())
            .map(|(&w, &xi)| w * f64::from(xi))
            .sum()
    }
}

/// Draws a dual-layer model with all parameters i.i.d. standard normal.
/// Draw order: hidden columns, hidden biases, output weights, output bias.
pub fn init_mlp01(d: usize, k: usize, seed: u64) -> Mlp01Model {
    assert!(d >= 1 && k >= 1, "dimensions must be >= 1");
    let mut rng = seeded_rng(seed);
    let hidden_w = (0..d * k)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let hidden_b = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
    let out_w = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
    let out_b = StandardNormal.sample(&mut rng);
    Mlp01Model {
        hidden_w,
        hidden_b,
        out_w,
        out_b,
        d,
        k,
    }
}

/// Component-wise `sign01(Wt x + W0)`.
pub fn hidden_activations(m: &Mlp01Model, x: &[f32]) -> Vec<i8> {
    assert_eq!(m.d, x.len(), "feature dimension mismatch");
    (0..m.k)
        .map(|j| sign01(m.node_projection(j, x) + m.hidden_b[j]))
        .collect()
}

/// `sign01(w . h + w0)` with `h` the hidden activations.
pub fn predict_mlp01(m: &Mlp01Model, x: &[f32]) -> i8 {
    assert_eq!(m.d, x.len(), "feature dimension mismatch");
    let mut pre = m.out_b;
    for j in 0..m.k {
        let h = sign01(m.node_projection(j, x) + m.hidden_b[j]);
        pre += m.out_w[j] * f64::from(h);
    }
    sign01(pre)
}

/// Fraction of rows misclassified by `m`.
pub fn loss01_mlp(m: &Mlp01Model, ds: &BinaryDataset) -> f64 {
    let errors = ds.rows().filter(|&(x, y)| predict_mlp01(m, x) != y).count();
    errors as f64 / ds.n() as f64
}

/// Training configuration: the coordinate-descent settings plus the hidden
/// width.
#[derive(Debug, Clone)]
pub struct Mlp01Config {
    pub scd: ScdConfig,
    /// Hidden node count; the dual-layer experiments use 20.
    pub hidden_k: usize,
}

impl Default for Mlp01Config {
    fn default() -> Self {
        Mlp01Config {
            scd: ScdConfig::default(),
            hidden_k: 20,
        }
    }
}

impl Mlp01Config {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.hidden_k == 0 {
            return Err(Error::config(
                "hidden_k must be >= 1 (a zero-hidden-node model is linear)",
            ));
        }
        self.scd.validate(d)
    }
}

/// Batch state shared by the two step kinds: per-row hidden projections
/// (bias excluded), gathered labels, and the rows' source indices.
struct BatchView<'a> {
    idx: &'a [usize],
    labels: Vec<i8>,
}

/// Applies the output-node candidate scan. The hidden layer is frozen; the
/// scan acts on `(out_w, out_b)` with the batch's hidden activations as
/// inputs, at most `k` coordinates sampled.
fn output_step_core(
    m: &mut Mlp01Model,
    h: &[i8], // batch-major: row r occupies [r*k .. (r+1)*k]
    labels: &[i8],
    cfg: &ScdConfig,
    tie: TieRule,
    rng: &mut Rng,
) -> (bool, bool) {
    let k = m.k;
    let b = labels.len();
    let base_proj: Vec<f64> = (0..b)
        .map(|r| {
            let hr = &h[r * k..(r + 1) * k];
            m.out_w
                .iter()
                .zip(hr.iter())
                .map(|(&w, &a)| w * f64::from(a))
                .sum()
        })
        .collect();
    let mut coords = sample_distinct(rng, k, cfg.features_per_step.min(k));
    coords.sort_unstable();

    let step = coordinate_step_core(
        &base_proj,
        m.out_b,
        &coords,
        &mut |c, out| {
            for (r, v) in out.iter_mut().enumerate() {
                *v = f64::from(h[r * k + c]);
            }
        },
        &|proj, i| label_row(proj, labels[i]),
        cfg.step_size,
        cfg.threshold_cap,
        tie,
        rng,
    );
    let improves = step.improves();
    match step.mv {
        StepMove::Coordinate {
            coord,
            delta,
            new_w0,
        } => {
            m.out_w[coord] += delta;
            m.out_b = new_w0;
            (true, improves)
        }
        StepMove::ThresholdOnly { new_w0 } => {
            let changed = new_w0 != m.out_b;
            m.out_b = new_w0;
            (changed, improves)
        }
    }
}

/// Applies the hidden-node candidate scan for node `j`. Candidate biases are
/// ranked by end-to-end batch loss: with the other nodes frozen, each row's
/// output is determined by `base +/- out_w[j]`, giving per-row error flags
/// for the two states of `h_j`.
#[allow(clippy::too_many_arguments)]
fn hidden_step_core(
    m: &mut Mlp01Model,
    j: usize,
    node_proj: &[f64],
    base: &[f64], // w.h + w0 - out_w[j]*h_j per batch row
    labels: &[i8],
    get_col: &mut dyn FnMut(usize, &mut [f64]),
    coords: &[usize],
    cfg: &ScdConfig,
    tie: TieRule,
    rng: &mut Rng,
) -> (Option<(usize, f64)>, bool, bool) {
    let wj = m.out_w[j];
    let err_flags: Vec<(bool, bool)> = base
        .iter()
        .zip(labels.iter())
        .map(|(&s, &y)| (sign01(s + wj) != y, sign01(s - wj) != y))
        .collect();

    let step = coordinate_step_core(
        node_proj,
        m.hidden_b[j],
        coords,
        get_col,
        &|proj, i| SweepRow {
            proj,
            err_plus: err_flags[i].0,
            err_minus: err_flags[i].1,
        },
        cfg.step_size,
        cfg.threshold_cap,
        tie,
        rng,
    );
    let improves = step.improves();
    match step.mv {
        StepMove::Coordinate {
            coord,
            delta,
            new_w0,
        } => {
            m.hidden_w[j * m.d + coord] += delta;
            m.hidden_b[j] = new_w0;
            (Some((coord, delta)), true, improves)
        }
        StepMove::ThresholdOnly { new_w0 } => {
            let changed = new_w0 != m.hidden_b[j];
            m.hidden_b[j] = new_w0;
            (None, changed, improves)
        }
    }
}

/// One coordinate step on the output node `(w, w0)` with the hidden layer
/// frozen. Strict: without an improving candidate the model is unchanged.
pub fn output_node_step(
    m: &Mlp01Model,
    batch: &BinaryDataset,
    cfg: &ScdConfig,
    rng: &mut Rng,
) -> Result<(Mlp01Model, bool)> {
    check_dims(m, batch)?;
    let b = batch.n();
    let mut h = vec![0i8; b * m.k];
    for r in 0..b {
        let acts = hidden_activations(m, batch.row(r));
        h[r * m.k..(r + 1) * m.k].copy_from_slice(&acts);
    }
    let mut next = m.clone();
    let (_, improved) = output_step_core(&mut next, &h, batch.labels(), cfg, TieRule::First, rng);
    if improved {
        Ok((next, true))
    } else {
        Ok((m.clone(), false))
    }
}

/// One coordinate step on a uniformly chosen hidden node: perturbs sampled
/// coordinates of that node's column and re-optimizes its bias against the
/// end-to-end batch loss. Strict: without an improving candidate the model
/// is unchanged.
pub fn hidden_node_step(
    m: &Mlp01Model,
    batch: &BinaryDataset,
    cfg: &ScdConfig,
    rng: &mut Rng,
) -> Result<(Mlp01Model, bool)> {
    check_dims(m, batch)?;
    if cfg.features_per_step > m.d {
        return Err(Error::config(format!(
            "features_per_step {} > dimension {}",
            cfg.features_per_step, m.d
        )));
    }
    let b = batch.n();
    let j = rng.random_range(0..m.k);
    let mut coords = sample_distinct(rng, m.d, cfg.features_per_step);
    coords.sort_unstable();

    let node_proj: Vec<f64> = (0..b).map(|r| m.node_projection(j, batch.row(r))).collect();
    let base: Vec<f64> = (0..b)
        .map(|r| {
            let x = batch.row(r);
            let mut pre = m.out_b;
            for i in 0..m.k {
                let hi = sign01(m.node_projection(i, x) + m.hidden_b[i]);
                pre += m.out_w[i] * f64::from(hi);
            }
            let hj = sign01(node_proj[r] + m.hidden_b[j]);
            pre - m.out_w[j] * f64::from(hj)
        })
        .collect();

    let mut next = m.clone();
    let (_, _, improved) = hidden_step_core(
        &mut next,
        j,
        &node_proj,
        &base,
        batch.labels(),
        &mut |c, out| {
            for (r, v) in out.iter_mut().enumerate() {
                *v = f64::from(batch.row(r)[c]);
            }
        },
        &coords,
        cfg,
        TieRule::First,
        rng,
    );
    if improved {
        Ok((next, true))
    } else {
        Ok((m.clone(), false))
    }
}

fn check_dims(m: &Mlp01Model, ds: &BinaryDataset) -> Result<()> {
    if m.d != ds.dim() {
        return Err(Error::DimMismatch {
            expected: m.d,
            got: ds.dim(),
        });
    }
    Ok(())
}

fn degenerate_single_class(ds: &BinaryDataset, cfg: &Mlp01Config) -> TrainedRun<Mlp01Model> {
    let sign = if ds.pos_count() > 0 { 1.0 } else { -1.0 };
    let mut model = init_mlp01(ds.dim(), cfg.hidden_k, cfg.scd.seed);
    model.out_w.iter_mut().for_each(|w| *w = 0.0);
    model.out_b = sign;
    TrainedRun {
        model,
        best_full_loss: 0.0,
        seed: cfg.scd.seed,
        iteration_of_best: 0,
    }
}

/// Trains the dual-layer model: per iteration, a fresh batch, one output-node
/// update, then one hidden-node update, walking to the ranked move of each
/// scan; the returned model is the incumbent with the lowest full-set loss.
/// Also returns the incumbent loss after each iteration.
pub fn train_mlp01_traced(
    train: &BinaryDataset,
    cfg: &Mlp01Config,
) -> Result<(TrainedRun<Mlp01Model>, Vec<f64>)> {
    let d = train.dim();
    let n = train.n();
    cfg.validate(d)?;
    if train.is_single_class() {
        let run = degenerate_single_class(train, cfg);
        return Ok((run, vec![0.0; cfg.scd.iterations]));
    }

    let k = cfg.hidden_k;
    let scd = &cfg.scd;
    let mut model = init_mlp01(d, k, scd.seed);
    let mut rng = seeded_rng(derive_seed(scd.seed, "mlp01-batches"));
    let batch_n = scd.batch_size(n);
    let features = train.features();
    let labels = train.labels();

    // Full-set node projections (bias excluded), row-major n x k, maintained
    // incrementally across accepted hidden moves.
    let mut proj = vec![0.0f64; n * k];
    for r in 0..n {
        let x = train.row(r);
        for j in 0..k {
            proj[r * k + j] = model.node_projection(j, x);
        }
    }

    let full_loss = |proj: &[f64], m: &Mlp01Model| -> f64 {
        let mut errors = 0usize;
        for r in 0..n {
            let mut pre = m.out_b;
            for j in 0..k {
                let h = sign01(proj[r * k + j] + m.hidden_b[j]);
                pre += m.out_w[j] * f64::from(h);
            }
            if sign01(pre) != labels[r] {
                errors += 1;
            }
        }
        errors as f64 / n as f64
    };

    let mut best = TrainedRun {
        model: model.clone(),
        best_full_loss: full_loss(&proj, &model),
        seed: scd.seed,
        iteration_of_best: 0,
    };
    let mut trace = Vec::with_capacity(scd.iterations);

    let mut batch_h = vec![0i8; batch_n * k];
    let mut node_proj = vec![0.0f64; batch_n];
    let mut base = vec![0.0f64; batch_n];

    for iter in 1..=scd.iterations {
        let batch_idx = sample_distinct(&mut rng, n, batch_n);
        let view = BatchView {
            idx: &batch_idx,
            labels: batch_idx.iter().map(|&r| labels[r]).collect(),
        };

        // Output node first: hidden activations are fixed inputs.
        for (r, &row) in view.idx.iter().enumerate() {
            for j in 0..k {
                batch_h[r * k + j] = sign01(proj[row * k + j] + model.hidden_b[j]);
            }
        }
        let (_, out_improved) = output_step_core(
            &mut model,
            &batch_h,
            &view.labels,
            scd,
            TieRule::Uniform,
            &mut rng,
        );
        if out_improved {
            let loss = full_loss(&proj, &model);
            if loss < best.best_full_loss {
                best.model = model.clone();
                best.best_full_loss = loss;
                best.iteration_of_best = iter;
            }
        }

        // Then one randomly selected hidden node.
        let j = rng.random_range(0..k);
        let mut coords = sample_distinct(&mut rng, d, scd.features_per_step);
        coords.sort_unstable();
        for (r, &row) in view.idx.iter().enumerate() {
            node_proj[r] = proj[row * k + j];
            let mut pre = model.out_b;
            for i in 0..k {
                let h = sign01(proj[row * k + i] + model.hidden_b[i]);
                pre += model.out_w[i] * f64::from(h);
            }
            let hj = sign01(node_proj[r] + model.hidden_b[j]);
            base[r] = pre - model.out_w[j] * f64::from(hj);
        }
        let (col_move, _, hid_improved) = hidden_step_core(
            &mut model,
            j,
            &node_proj,
            &base,
            &view.labels,
            &mut |c, out| {
                for (r, &row) in view.idx.iter().enumerate() {
                    out[r] = f64::from(features[row * d + c]);
                }
            },
            &coords,
            scd,
            TieRule::Uniform,
            &mut rng,
        );
        if let Some((coord, delta)) = col_move {
            for r in 0..n {
                proj[r * k + j] += delta * f64::from(features[r * d + coord]);
            }
        }
        if hid_improved {
            let loss = full_loss(&proj, &model);
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

/// [`train_mlp01_traced`] without the per-iteration incumbent record.
pub fn train_mlp01(train: &BinaryDataset, cfg: &Mlp01Config) -> Result<TrainedRun<Mlp01Model>> {
    train_mlp01_traced(train, cfg).map(|(run, _)| run)
}
