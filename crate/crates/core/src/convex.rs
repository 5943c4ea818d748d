//! Convex counterparts: a sigmoid MLP trained with momentum SGD on the
//! logistic loss, and a linear SVM trained by hinge-loss subgradient descent
//! with a cross-validated regularization parameter.
//!
//! The MLP exposes exact input gradients, which the black-box attack needs
//! to craft FGSM adversaries against substitute models. All arithmetic is
//! f64; datasets hand in f32 rows, converted losslessly at the boundary.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::loss::{sign01, LinearModel};
use crate::rng::{seeded_rng, Rng};

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One dense layer: row-major `(out_dim, in_dim)` weights plus biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

/// Feed-forward network with sigmoid activations on every layer and a single
/// logistic output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidMlpModel {
    pub layers: Vec<DenseLayer>,
}

impl SigmoidMlpModel {
    pub fn dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Forward pass over an f64 input; returns the output probability.
    pub fn forward_f64(&self, x: &[f64]) -> f64 {
        assert_eq!(self.dim(), x.len(), "feature dimension mismatch");
        let mut a = x.to_vec();
        for layer in &self.layers {
            let mut next = Vec::with_capacity(layer.out_dim);
            for o in 0..layer.out_dim {
                let z: f64 = layer
                    .row(o)
                    .iter()
                    .zip(a.iter())
                    .map(|(&w, &v)| w * v)
                    .sum::<f64>()
                    + layer.biases[o];
                next.push(sigmoid(z));
            }
            a = next;
        }
        a[0]
    }

    pub fn forward(&self, x: &[f32]) -> f64 {
        let x64: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        self.forward_f64(&x64)
    }

    /// `+1` iff the output probability exceeds 1/2 (zero pre-activation
    /// classifies `-1`, matching the sign convention).
    pub fn predict(&self, x: &[f32]) -> i8 {
        sign01(self.forward(x) - 0.5)
    }
}

/// Output probability of the network on one input.
pub fn mlp_forward(m: &SigmoidMlpModel, x: &[f32]) -> f64 {
    m.forward(x)
}

/// Exact gradient of the logistic loss at `(x, y)` with respect to `x`,
/// where `y` is the `{0, 1}` encoding of the label.
pub fn input_gradient(m: &SigmoidMlpModel, x: &[f32], y: f64) -> Vec<f64> {
    let x64: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
    input_gradient_f64(m, &x64, y)
}

/// [`input_gradient`] over an f64 input (the finite-difference oracle needs
/// perturbations finer than f32 resolution).
pub fn input_gradient_f64(m: &SigmoidMlpModel, x: &[f64], y: f64) -> Vec<f64> {
    assert_eq!(m.dim(), x.len(), "feature dimension mismatch");
    // Forward, keeping every activation.
    let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
    for layer in &m.layers {
        let a = acts.last().unwrap();
        let mut next = Vec::with_capacity(layer.out_dim);
        for o in 0..layer.out_dim {
            let z: f64 = layer
                .row(o)
                .iter()
                .zip(a.iter())
                .map(|(&w, &v)| w * v)
                .sum::<f64>()
                + layer.biases[o];
            next.push(sigmoid(z));
        }
        acts.push(next);
    }
    // d loss / d z_last for logistic loss with sigmoid output.
    let p = acts.last().unwrap()[0];
    let mut delta = vec![p - y];
    for (l, layer) in m.layers.iter().enumerate().rev() {
        let mut da = vec![0.0f64; layer.in_dim];
        for (o, &dz) in delta.iter().enumerate() {
            for (i, v) in layer.row(o).iter().enumerate() {
                da[i] += dz * v;
            }
        }
        if l == 0 {
            return da;
        }
        let a = &acts[l];
        delta = da
            .iter()
            .zip(a.iter())
            .map(|(&g, &av)| g * av * (1.0 - av))
            .collect();
    }
    unreachable!("network has at least one layer");
}

/// Mini-batch SGD settings for the sigmoid MLP.
#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub batch: usize,
    pub momentum: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            batch: 200,
            momentum: 0.9,
            learning_rate: 0.01,
            epochs: 100,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::config("batch must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::config("learning_rate must be >= 0"));
        }
        Ok(())
    }
}

/// `C[b*out + o] = sum_i a[b*in + i] * w[o*in + i]  (+ bias[o])`, i.e. the
/// batch-by-weightsT product both operands read row-contiguously. Rows are
/// computed independently, so parallelism cannot change the result.
fn forward_layer(a: &[f64], rows: usize, layer: &DenseLayer, out: &mut [f64]) {
    let (in_dim, out_dim) = (layer.in_dim, layer.out_dim);
    out[..rows * out_dim]
        .par_chunks_mut(out_dim)
        .zip(a[..rows * in_dim].par_chunks(in_dim))
        .for_each(|(out_row, a_row)| {
            for (o, out) in out_row.iter_mut().enumerate() {
                let z: f64 = layer
                    .row(o)
                    .iter()
                    .zip(a_row.iter())
                    .map(|(&w, &v)| w * v)
                    .sum::<f64>()
                    + layer.biases[o];
                *out = sigmoid(z);
            }
        });
}

/// Accumulates `dw[o*in + i] = sum_b delta[b*out + o] * a[b*in + i]` and
/// `db[o] = sum_b delta[b*out + o]`, each output row summed in batch order.
fn weight_gradients(
    a: &[f64],
    delta: &[f64],
    rows: usize,
    in_dim: usize,
    out_dim: usize,
    dw: &mut [f64],
    db: &mut [f64],
) {
    dw.par_chunks_mut(in_dim)
        .zip(db.par_iter_mut())
        .enumerate()
        .for_each(|(o, (dw_row, db_o))| {
            dw_row.fill(0.0);
            *db_o = 0.0;
            for b in 0..rows {
                let dz = delta[b * out_dim + o];
                if dz == 0.0 {
                    continue;
                }
                let a_row = &a[b * in_dim..b * in_dim + in_dim];
                for (w, &v) in dw_row.iter_mut().zip(a_row.iter()) {
                    *w += dz * v;
                }
                *db_o += dz;
            }
        });
}

/// `prev[b*in + i] = (sum_o delta[b*out + o] * w[o*in + i]) * a * (1 - a)`.
fn backprop_delta(
    delta: &[f64],
    layer: &DenseLayer,
    a_prev: &[f64],
    rows: usize,
    prev: &mut [f64],
) {
    let (in_dim, out_dim) = (layer.in_dim, layer.out_dim);
    prev[..rows * in_dim]
        .par_chunks_mut(in_dim)
        .enumerate()
        .for_each(|(b, prev_row)| {
            prev_row.fill(0.0);
            for o in 0..out_dim {
                let dz = delta[b * out_dim + o];
                if dz == 0.0 {
                    continue;
                }
                for (p, &w) in prev_row.iter_mut().zip(layer.row(o).iter()) {
                    *p += dz * w;
                }
            }
            let a_row = &a_prev[b * in_dim..b * in_dim + in_dim];
            for (p, &av) in prev_row.iter_mut().zip(a_row.iter()) {
                *p *= av * (1.0 - av);
            }
        });
}

fn init_layers(dims: &[usize], rng: &mut Rng) -> Vec<DenseLayer> {
    dims.windows(2)
        .map(|pair| {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let scale = 1.0 / (in_dim as f64).sqrt();
            let weights = (0..in_dim * out_dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * scale
                })
                .collect();
            DenseLayer {
                weights,
                biases: vec![0.0; out_dim],
                in_dim,
                out_dim,
            }
        })
        .collect()
}

/// Trains a sigmoid MLP with the given hidden widths by mini-batch SGD with
/// momentum on the mean logistic loss. Labels map `{+1 -> 1, -1 -> 0}`
/// internally. Deterministic per seed.
pub fn train_mlp(
    train: &BinaryDataset,
    hidden: &[usize],
    cfg: &SgdConfig,
) -> Result<SigmoidMlpModel> {
    cfg.validate()?;
    if hidden.contains(&0) {
        return Err(Error::config("hidden widths must be >= 1"));
    }
    let n = train.n();
    let d = train.dim();
    let mut dims = vec![d];
    dims.extend_from_slice(hidden);
    dims.push(1);

    let mut rng = seeded_rng(cfg.seed);
    let mut layers = init_layers(&dims, &mut rng);
    let targets: Vec<f64> = train
        .labels()
        .iter()
        .map(|&y| if y > 0 { 1.0 } else { 0.0 })
        .collect();

    let batch = cfg.batch.min(n);
    // Reusable buffers sized for a full batch.
    let mut acts: Vec<Vec<f64>> = dims.iter().map(|&w| vec![0.0; batch * w]).collect();
    let mut deltas: Vec<Vec<f64>> = dims.iter().map(|&w| vec![0.0; batch * w]).collect();
    let mut vel_w: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
    let mut vel_b: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.biases.len()]).collect();
    let mut grad_w: Vec<Vec<f64>> = vel_w.clone();
    let mut grad_b: Vec<Vec<f64>> = vel_b.clone();

    let mut order: Vec<usize> = (0..n).collect();
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let rows = chunk.len();
            for (r, &idx) in chunk.iter().enumerate() {
                for (dst, &src) in acts[0][r * d..(r + 1) * d]
                    .iter_mut()
                    .zip(train.row(idx).iter())
                {
                    *dst = f64::from(src);
                }
            }
            for (l, layer) in layers.iter().enumerate() {
                let (head, tail) = acts.split_at_mut(l + 1);
                forward_layer(&head[l], rows, layer, &mut tail[0]);
            }
            // Mean logistic loss: d loss / d z_out = (p - y) / rows.
            let last = layers.len();
            for (r, &idx) in chunk.iter().enumerate() {
                let p = acts[last][r];
                deltas[last][r] = (p - targets[idx]) / rows as f64;
            }
            for l in (0..layers.len()).rev() {
                weight_gradients(
                    &acts[l],
                    &deltas[l + 1],
                    rows,
                    layers[l].in_dim,
                    layers[l].out_dim,
                    &mut grad_w[l],
                    &mut grad_b[l],
                );
                if l > 0 {
                    let (head, tail) = deltas.split_at_mut(l + 1);
                    backprop_delta(&tail[0], &layers[l], &acts[l], rows, &mut head[l]);
                    // convert d loss / d a into d loss / d z done in
                    // backprop_delta via the sigmoid derivative
                }
                let lr = cfg.learning_rate;
                let mom = cfg.momentum;
                for (v, &g) in vel_w[l].iter_mut().zip(grad_w[l].iter()) {
                    *v = mom * *v - lr * g;
                }
                for (w, &v) in layers[l].weights.iter_mut().zip(vel_w[l].iter()) {
                    *w += v;
                }
                for (v, &g) in vel_b[l].iter_mut().zip(grad_b[l].iter()) {
                    *v = mom * *v - lr * g;
                }
                for (b, &v) in layers[l].biases.iter_mut().zip(vel_b[l].iter()) {
                    *b += v;
                }
            }
        }
    }
    Ok(SigmoidMlpModel { layers })
}

/// Classification accuracy of the network on a dataset.
pub fn mlp_accuracy(m: &SigmoidMlpModel, ds: &BinaryDataset) -> f64 {
    let correct = ds.rows().filter(|&(x, y)| m.predict(x) == y).count();
    correct as f64 / ds.n() as f64
}

/// SVM training settings: the regularization grid and its cross-validation,
/// plus the subgradient-descent budget (full-batch passes with a 1/t step
/// schedule).
#[derive(Debug, Clone)]
pub struct SvmConfig {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            folds: 5,
            epochs: 200,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() {
            return Err(Error::config("C grid must be nonempty"));
        }
        if self.c_grid.iter().any(|&c| c <= 0.0) {
            return Err(Error::config("C values must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::config("folds must be >= 2"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Full-batch hinge + L2 subgradient descent at a fixed `C`; the bias is
/// unregularized. Objective: `1/(2C) |w|^2 + mean hinge`.
///
/// Features are mean-centered internally (better conditioning for the
/// subgradient walk; the shift folds back into the returned threshold) and
/// the step schedule is `1/(lambda * (t + 1))`, which keeps the `w`
/// contraction stable for every `lambda` on the grid.
fn svm_fit_fixed(
    features: &[f32],
    labels: &[i8],
    n: usize,
    d: usize,
    c: f64,
    epochs: usize,
) -> LinearModel {
    let lambda = 1.0 / c;
    let inv_n = 1.0 / n as f64;
    let mut mean = vec![0.0f64; d];
    for r in 0..n {
        for (m, &xi) in mean.iter_mut().zip(features[r * d..(r + 1) * d].iter()) {
            *m += f64::from(xi);
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);

    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut margins = vec![0.0f64; n];
    for t in 1..=epochs {
        let w_ref = &w;
        let mean_ref = &mean;
        margins.par_iter_mut().enumerate().for_each(|(r, m)| {
            let x = &features[r * d..(r + 1) * d];
            let proj: f64 = w_ref
                .iter()
                .zip(x.iter())
                .zip(mean_ref.iter())
                .map(|((&wi, &xi), &mu)| wi * (f64::from(xi) - mu))
                .sum();
            *m = f64::from(labels[r]) * (proj + b);
        });
        let eta = 1.0 / (lambda * (t + 1) as f64);
        let mut gw = vec![0.0f64; d];
        let mut gb = 0.0f64;
        for r in 0..n {
            if margins[r] < 1.0 {
                let y = f64::from(labels[r]);
                let x = &features[r * d..(r + 1) * d];
                for ((g, &xi), &mu) in gw.iter_mut().zip(x.iter()).zip(mean.iter()) {
                    *g += y * (f64::from(xi) - mu);
                }
                gb += y;
            }
        }
        for (wi, &g) in w.iter_mut().zip(gw.iter()) {
            *wi -= eta * (lambda * *wi - g * inv_n);
        }
        b += eta * gb * inv_n;
    }
    // undo the centering: w . (x - mean) + b = w . x + (b - w . mean)
    let shift: f64 = w.iter().zip(mean.iter()).map(|(&wi, &mu)| wi * mu).sum();
    LinearModel::new(w, b - shift)
}

/// Stratified fold assignment: shuffles each class separately (seeded) and
/// deals indices round-robin, so every fold sees both classes whenever each
/// class has at least `folds` members.
fn stratified_folds(ds: &BinaryDataset, folds: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut pos: Vec<usize> = (0..ds.n()).filter(|&i| ds.label(i) > 0).collect();
    let mut neg: Vec<usize> = (0..ds.n()).filter(|&i| ds.label(i) < 0).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let mut assignment = vec![Vec::new(); folds];
    for (i, &idx) in pos.iter().chain(neg.iter()).enumerate() {
        assignment[i % folds].push(idx);
    }
    assignment
}

/// Picks the hinge-loss regularization parameter by stratified k-fold
/// cross-validation accuracy; ties prefer the smaller `C`. Degenerate data
/// (a class with fewer members than folds) skips the scan and returns the
/// smallest grid value.
pub fn select_svm_c(train: &BinaryDataset, cfg: &SvmConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.c_grid.len() == 1 {
        return Ok(cfg.c_grid[0]);
    }
    let mut grid = cfg.c_grid.clone();
    grid.sort_unstable_by(f64::total_cmp);
    let min_class = train.pos_count().min(train.neg_count());
    if min_class < cfg.folds {
        return Ok(grid[0]);
    }
    let mut rng = seeded_rng(crate::rng::derive_seed(cfg.seed, "svm-folds"));
    let assignment = stratified_folds(train, cfg.folds, &mut rng);

    let n = train.n();
    let d = train.dim();
    // folds are independent; evaluate each one's whole grid in parallel
    let fold_counts: Result<Vec<Vec<usize>>> = (0..cfg.folds)
        .into_par_iter()
        .map(|fold| {
            let hold: &[usize] = &assignment[fold];
            let fit_idx: Vec<usize> = (0..cfg.folds)
                .filter(|&f| f != fold)
                .flat_map(|f| assignment[f].iter().copied())
                .collect();
            let fit = train.subset(&fit_idx)?;
            Ok(grid
                .iter()
                .map(|&c| {
                    let m = svm_fit_fixed(fit.features(), fit.labels(), fit.n(), d, c, cfg.epochs);
                    hold.iter()
                        .filter(|&&i| {
                            crate::loss::predict_linear(&m, train.row(i)) == train.label(i)
                        })
                        .count()
                })
                .collect())
        })
        .collect();
    let fold_counts = fold_counts?;

    let mut best_c = grid[0];
    let mut best_acc = -1.0f64;
    for (ci, &c) in grid.iter().enumerate() {
        let correct: usize = fold_counts.iter().map(|counts| counts[ci]).sum();
        let acc = correct as f64 / n as f64;
        // strict comparison: ties keep the earlier (smaller) C
        if acc > best_acc {
            best_acc = acc;
            best_c = c;
        }
    }
    Ok(best_c)
}

/// Trains the linear SVM: cross-validates `C` over the grid, then refits on
/// the full data at the chosen value. Deterministic per seed.
pub fn train_svm(train: &BinaryDataset, cfg: &SvmConfig) -> Result<LinearModel> {
    let c = select_svm_c(train, cfg)?;
    Ok(svm_fit_fixed(
        train.features(),
        train.labels(),
        train.n(),
        train.dim(),
        c,
        cfg.epochs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{loss01_linear, predict_linear};
    use rand::Rng as _;

    fn single_unit(w: Vec<f64>, b: f64) -> SigmoidMlpModel {
        let in_dim = w.len();
        SigmoidMlpModel {
            layers: vec![DenseLayer {
                weights: w,
                biases: vec![b],
                in_dim,
                out_dim: 1,
            }],
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let m = SigmoidMlpModel {
            layers: vec![
                DenseLayer {
                    weights: vec![0.0; 6],
                    biases: vec![0.0; 2],
                    in_dim: 3,
                    out_dim: 2,
                },
                DenseLayer {
                    weights: vec![0.0; 2],
                    biases: vec![0.0],
                    in_dim: 2,
                    out_dim: 1,
                },
            ],
        };
        assert_eq!(mlp_forward(&m, &[0.3, 0.7, 0.1]), 0.5);
        assert!(input_gradient(&m, &[0.3, 0.7, 0.1], 1.0)
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn output_is_monotone_in_final_bias() {
        let mut m = single_unit(vec![0.4, -0.2], 0.0);
        let x = [0.5f32, 0.5];
        let mut last = 0.0;
        for b in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            m.layers[0].biases[0] = b;
            let p = mlp_forward(&m, &x);
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn single_unit_matches_closed_form() {
        let m = single_unit(vec![1.0], 0.0);
        for x in [-1.0f32, 0.0, 1.0] {
            let expected = 1.0 / (1.0 + (-f64::from(x)).exp());
            assert!((mlp_forward(&m, &[x]) - expected).abs() < 1e-15);
        }
        // gradient of the logistic loss through a single unit: (p - y) * w
        let w = vec![1.7, -0.4, 0.9];
        let m = single_unit(w.clone(), 0.3);
        let x = [0.2f32, 0.8, 0.5];
        let p = mlp_forward(&m, &x);
        for y in [0.0, 1.0] {
            let grad = input_gradient(&m, &x, y);
            for (g, wi) in grad.iter().zip(w.iter()) {
                assert!((g - (p - y) * wi).abs() < 1e-12);
            }
        }
    }

    fn random_net(dims: &[usize], seed: u64) -> SigmoidMlpModel {
        let mut rng = seeded_rng(seed);
        SigmoidMlpModel {
            layers: init_layers(dims, &mut rng),
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(99);
        for trial in 0..100 {
            let m = random_net(&[5, 4, 1], 5000 + trial);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let y = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            let loss = |x: &[f64]| -> f64 {
                let p = m.forward_f64(x);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            };
            let grad = input_gradient_f64(&m, &x, y);
            let h = 1e-5;
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
                let denom = fd.abs().max(grad[i].abs()).max(1e-8);
                assert!(
                    (fd - grad[i]).abs() / denom < 1e-4,
                    "trial {trial} coord {i}: fd {fd} vs analytic {}",
                    grad[i]
                );
            }
        }
    }

    fn xor_dataset() -> BinaryDataset {
        BinaryDataset::new(
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0],
            vec![-1, 1, 1, -1],
            2,
        )
        .unwrap()
    }

    #[test]
    fn mlp_learns_xor_for_most_seeds() {
        let ds = xor_dataset();
        let mut solved = 0;
        for seed in 0..10 {
            let cfg = SgdConfig {
                batch: 4,
                learning_rate: 0.5,
                epochs: 2000,
                seed,
                ..SgdConfig::default()
            };
            let m = train_mlp(&ds, &[4], &cfg).unwrap();
            if mlp_accuracy(&m, &ds) == 1.0 {
                solved += 1;
            }
        }
        assert!(solved > 5, "only {solved}/10 seeds learned XOR");
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let ds = xor_dataset();
        let cfg = SgdConfig {
            batch: 2,
            learning_rate: 0.0,
            epochs: 3,
            seed: 7,
            ..SgdConfig::default()
        };
        let trained = train_mlp(&ds, &[3], &cfg).unwrap();
        let mut rng = seeded_rng(cfg.seed);
        let init = SigmoidMlpModel {
            layers: init_layers(&[2, 3, 1], &mut rng),
        };
        assert_eq!(trained, init);
    }

    #[test]
    fn tiny_gradient_step_never_increases_batch_loss() {
        let ds = crate::scd::tests::random_separable(32, 3, 55);
        let batch_loss = |m: &SigmoidMlpModel| -> f64 {
            ds.rows()
                .map(|(x, y)| {
                    let p = m.forward(x);
                    let t = if y > 0 { 1.0 } else { 0.0 };
                    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / ds.n() as f64
        };
        for seed in 0..10 {
            // one full-batch step at lr 1e-4 without momentum is exactly a
            // small step along the negative gradient
            let before = {
                let mut rng = seeded_rng(seed);
                let init = SigmoidMlpModel {
                    layers: init_layers(&[3, 4, 1], &mut rng),
                };
                batch_loss(&init)
            };
            let cfg = SgdConfig {
                batch: ds.n(),
                momentum: 0.0,
                learning_rate: 1e-4,
                epochs: 1,
                seed,
            };
            let after = batch_loss(&train_mlp(&ds, &[4], &cfg).unwrap());
            assert!(after <= before, "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn train_mlp_is_deterministic() {
        let ds = crate::scd::tests::random_separable(40, 3, 66);
        let cfg = SgdConfig {
            batch: 8,
            epochs: 5,
            seed: 3,
            ..SgdConfig::default()
        };
        let a = train_mlp(&ds, &[6, 3], &cfg).unwrap();
        let b = train_mlp(&ds, &[6, 3], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn svm_separates_two_points_for_every_c() {
        let ds = BinaryDataset::new(vec![0.1, 0.9], vec![-1, 1], 1).unwrap();
        for c in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let cfg = SvmConfig {
                c_grid: vec![c],
                ..SvmConfig::default()
            };
            let m = train_svm(&ds, &cfg).unwrap();
            assert_eq!(loss01_linear(&m, &ds), 0.0, "C = {c}");
        }
    }

    #[test]
    fn svm_predictions_invariant_under_positive_rescale() {
        let ds = crate::scd::tests::random_separable(50, 3, 21);
        let m = train_svm(&ds, &SvmConfig::default()).unwrap();
        let scaled = LinearModel::new(m.w.iter().map(|v| v * 37.5).collect(), m.w0 * 37.5);
        for i in 0..ds.n() {
            assert_eq!(
                predict_linear(&m, ds.row(i)),
                predict_linear(&scaled, ds.row(i))
            );
        }
    }

    /// Two Gaussian blobs at +/- e1 (unit variance), affinely squashed from
    /// [-4, 4] into [0, 1]. The Bayes accuracy of this pair is about 0.84;
    /// the empirical SVM accuracy on a fixed-seed held-out set lands near
    /// it, and the pinned bound sits safely below.
    fn gaussian_blobs(n: usize, seed: u64) -> BinaryDataset {
        let mut rng = seeded_rng(seed);
        let mut features = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y: i8 = if i % 2 == 0 { 1 } else { -1 };
            let mean = f64::from(y);
            for coord in 0..2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let raw = if coord == 0 { mean + z } else { z };
                let squashed = ((raw + 4.0) / 8.0).clamp(0.0, 1.0) as f32;
                features.push(squashed);
            }
            labels.push(y);
        }
        BinaryDataset::new(features, labels, 2).unwrap()
    }

    #[test]
    fn svm_reaches_near_bayes_accuracy_on_blobs() {
        let train = gaussian_blobs(200, 1);
        let test = gaussian_blobs(2000, 2);
        let m = train_svm(&train, &SvmConfig::default()).unwrap();
        let acc = 1.0 - loss01_linear(&m, &test);
        assert!(acc >= 0.78, "held-out accuracy {acc}");
    }

    #[test]
    fn svm_cv_is_deterministic() {
        let ds = gaussian_blobs(120, 9);
        let c1 = select_svm_c(&ds, &SvmConfig::default()).unwrap();
        let c2 = select_svm_c(&ds, &SvmConfig::default()).unwrap();
        assert_eq!(c1, c2);
        let a = train_svm(&ds, &SvmConfig::default()).unwrap();
        let b = train_svm(&ds, &SvmConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
