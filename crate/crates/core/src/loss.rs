//! The 01 loss for linear models and the optimal-threshold line search.
//!
//! The loss of a hyperplane `(w, w0)` on labeled data is the fraction of
//! rows with `sign(w . x + w0) != y`. It is piecewise constant in `w0`, with
//! breakpoints exactly at the projection values `w . x`, so the best
//! threshold for a fixed `w` is found by scanning midpoints of consecutive
//! distinct sorted projections plus one candidate beyond each extreme. That
//! scan — capped to a uniform subsample for large inputs — is the inner step
//! of every coordinate-descent update in this crate.

use crate::dataset::{sample_distinct, BinaryDataset};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// `+1` if `z > 0`, else `-1`. Zero maps to `-1`, so a zero-margin example
/// with label `+1` counts as an error.
#[inline]
pub fn sign01(z: f64) -> i8 {
    if z > 0.0 {
        1
    } else {
        -1
    }
}

/// A hyperplane classifier: weight vector `w` and threshold `w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub w0: f64,
}

impl LinearModel {
    pub fn new(w: Vec<f64>, w0: f64) -> Self {
        LinearModel { w, w0 }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `w . x` without the threshold.
    #[inline]
    pub fn projection(&self, x: &[f32]) -> f64 {
        assert_eq!(self.w.len(), x.len(), "feature dimension mismatch");
        self.w
            .iter()
            .zip(x.iter())
            .map(|(&wi, &xi)| wi * f64::from(xi))
            .sum()
    }
}

/// `sign01(w . x + w0)`.
#[inline]
pub fn predict_linear(m: &LinearModel, x: &[f32]) -> i8 {
    sign01(m.projection(x) + m.w0)
}

/// Fraction of rows misclassified by `m`; always in `[0, 1]`.
pub fn loss01_linear(m: &LinearModel, ds: &BinaryDataset) -> f64 {
    let errors = ds
        .rows()
        .filter(|&(x, y)| predict_linear(m, x) != y)
        .count();
    errors as f64 / ds.n() as f64
}

/// Outcome of a threshold line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSearchResult {
    /// The chosen threshold.
    pub w0: f64,
    /// Loss of `w0` on the full projection vector.
    pub loss: f64,
    /// Error count behind `loss`.
    pub errors: usize,
}

/// One sample in threshold space: its projection value and whether it is
/// misclassified when the threshold assigns it `+1` / `-1`.
///
/// For a plain linear model the assignment *is* the prediction
/// (`err_plus = (y != +1)`). The dual-layer hidden-node search reuses the
/// same sweep with end-to-end error flags computed through the output layer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SweepRow {
    pub proj: f64,
    pub err_plus: bool,
    pub err_minus: bool,
}

impl SweepRow {
    #[inline]
    pub fn errs(&self, w0: f64) -> bool {
        if self.proj + w0 > 0.0 {
            self.err_plus
        } else {
            self.err_minus
        }
    }
}

fn count_errors(rows: &[SweepRow], w0: f64) -> usize {
    rows.iter().filter(|r| r.errs(w0)).count()
}

/// Scans every candidate threshold over `sorted` rows (ascending by
/// projection) and returns the minimizer, breaking ties toward the smallest
/// `w0`. Candidates are the negated midpoints of consecutive distinct
/// values plus one candidate classifying everything `+1` and one
/// classifying everything `-1`.
fn sweep(sorted: &[SweepRow]) -> (f64, usize) {
    debug_assert!(!sorted.is_empty());
    // Boundary b = -w0: a row is assigned +1 iff proj > b. Start below the
    // minimum (everything +1), then move b past each distinct value.
    let mut err: usize = sorted.iter().filter(|r| r.err_plus).count();
    let mut best_err = err;
    let mut best_w0 = -(sorted[0].proj - 1.0);

    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].proj;
        while i < sorted.len() && sorted[i].proj == v {
            err = err - usize::from(sorted[i].err_plus) + usize::from(sorted[i].err_minus);
            i += 1;
        }
        let b = if i == sorted.len() {
            v + 1.0
        } else {
            (v + sorted[i].proj) / 2.0
        };
        let w0 = -b;
        // w0 decreases as the sweep advances, so on ties the later (smaller)
        // candidate wins.
        if err < best_err || (err == best_err && w0 < best_w0) {
            best_err = err;
            best_w0 = w0;
        }
    }
    (best_w0, best_err)
}

/// Exhaustive threshold search over all candidate breakpoints.
pub(crate) fn threshold_search_exact(rows: &[SweepRow]) -> ThresholdSearchResult {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable_by(|a, b| a.proj.total_cmp(&b.proj));
    let (w0, _) = sweep(&sorted);
    let errors = count_errors(rows, w0);
    ThresholdSearchResult {
        w0,
        loss: errors as f64 / rows.len() as f64,
        errors,
    }
}

/// Capped threshold search: when `rows.len() > cap` the candidate scan runs
/// on a uniform subsample of size `cap`, but the returned loss is always
/// measured on the full rows. `current_w0`, when given, joins the candidate
/// set (compared at full-vector level), so the search never does worse than
/// the incumbent threshold.
pub(crate) fn threshold_search(
    rows: &[SweepRow],
    cap: usize,
    rng: &mut Rng,
    current_w0: Option<f64>,
) -> ThresholdSearchResult {
    let mut searched: Vec<SweepRow> = if rows.len() > cap {
        sample_distinct(rng, rows.len(), cap)
            .into_iter()
            .map(|i| rows[i])
            .collect()
    } else {
        rows.to_vec()
    };
    searched.sort_unstable_by(|a, b| a.proj.total_cmp(&b.proj));

    let (mut best_w0, _) = sweep(&searched);
    let mut errors = count_errors(rows, best_w0);
    if let Some(cur) = current_w0 {
        let cur_errors = count_errors(rows, cur);
        if cur_errors < errors || (cur_errors == errors && cur < best_w0) {
            best_w0 = cur;
            errors = cur_errors;
        }
    }
    ThresholdSearchResult {
        w0: best_w0,
        loss: errors as f64 / rows.len() as f64,
        errors,
    }
}

fn label_rows(projections: &[f64], labels: &[i8]) -> Result<Vec<SweepRow>> {
    if projections.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if projections.len() != labels.len() {
        return Err(Error::Consistency(format!(
            "{} projections vs {} labels",
            projections.len(),
            labels.len()
        )));
    }
    Ok(projections
        .iter()
        .zip(labels.iter())
        .map(|(&proj, &y)| SweepRow {
            proj,
            err_plus: y != 1,
            err_minus: y != -1,
        })
        .collect())
}

/// Finds the threshold minimizing the 01 loss of `sign01(proj + w0)` against
/// `labels`, searching a subsample of at most `cap` projections and
/// reporting the chosen threshold's loss on the full vector.
pub fn best_threshold(
    projections: &[f64],
    labels: &[i8],
    cap: usize,
    rng: &mut Rng,
    current_w0: Option<f64>,
) -> Result<ThresholdSearchResult> {
    if cap < 2 {
        return Err(Error::config(format!("threshold cap {cap} < 2")));
    }
    let rows = label_rows(projections, labels)?;
    Ok(threshold_search(&rows, cap, rng, current_w0))
}

/// Uncapped threshold search; the global optimum over all thresholds for
/// these projections. Serves as the oracle for [`best_threshold`].
pub fn best_threshold_exact(projections: &[f64], labels: &[i8]) -> Result<ThresholdSearchResult> {
    let rows = label_rows(projections, labels)?;
    Ok(threshold_search_exact(&rows))
}
