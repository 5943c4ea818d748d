//! Majority-vote ensembles.
//!
//! 01-loss models vote over independent random restarts; convex models vote
//! over bootstrap resamples. Members are seeded `base_seed + i`, trained
//! independently (and in parallel), and kept in member order, so an ensemble
//! is reproducible from its base seed alone.

use rayon::prelude::*;

use crate::convex::SigmoidMlpModel;
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::loss::{predict_linear, LinearModel};
use crate::mlp01::{predict_mlp01, Mlp01Model};
use crate::rng::{derive_seed, seeded_rng};

/// Anything that labels a feature row with `+1` or `-1`.
pub trait Classifier: Send + Sync {
    fn dim(&self) -> usize;
    fn predict(&self, x: &[f32]) -> i8;
}

impl Classifier for LinearModel {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn predict(&self, x: &[f32]) -> i8 {
        predict_linear(self, x)
    }
}

impl Classifier for Mlp01Model {
    fn dim(&self) -> usize {
        self.d
    }

    fn predict(&self, x: &[f32]) -> i8 {
        predict_mlp01(self, x)
    }
}

impl Classifier for crate::convex::SigmoidMlpModel {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn predict(&self, x: &[f32]) -> i8 {
        SigmoidMlpModel::predict(self, x)
    }
}

/// How ensemble members see the training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteMode {
    /// Every member trains on the full set from its own random seed.
    Restart,
    /// Every member trains on `n` rows drawn with replacement (seeded).
    Bootstrap,
}

/// An ordered list of trained models voting by summed predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteEnsemble<M> {
    pub members: Vec<M>,
    pub member_seeds: Vec<u64>,
}

impl<M: Classifier> VoteEnsemble<M> {
    pub fn new(members: Vec<M>, member_seeds: Vec<u64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::config("ensemble needs at least one member"));
        }
        if members.len() != member_seeds.len() {
            return Err(Error::consistency(format!(
                "{} members vs {} seeds",
                members.len(),
                member_seeds.len()
            )));
        }
        let d = members[0].dim();
        if members.iter().any(|m| m.dim() != d) {
            return Err(Error::config("ensemble members disagree on dimension"));
        }
        Ok(VoteEnsemble {
            members,
            member_seeds,
        })
    }

    pub fn single(member: M, seed: u64) -> Self {
        VoteEnsemble {
            members: vec![member],
            member_seeds: vec![seed],
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }
}

impl<M: Classifier> Classifier for VoteEnsemble<M> {
    fn dim(&self) -> usize {
        VoteEnsemble::dim(self)
    }

    fn predict(&self, x: &[f32]) -> i8 {
        predict_vote(self, x)
    }
}

/// Trains `n_votes` members with `trainer(data, seed)`, seeds
/// `base_seed..base_seed + n_votes`. Members are independent; they train in
/// parallel without affecting the result.
pub fn train_vote<M, F>(
    trainer: F,
    train: &BinaryDataset,
    n_votes: usize,
    base_seed: u64,
    mode: VoteMode,
) -> Result<VoteEnsemble<M>>
where
    M: Classifier,
    F: Fn(&BinaryDataset, u64) -> Result<M> + Sync,
{
    if n_votes == 0 {
        return Err(Error::config("n_votes must be >= 1"));
    }
    let seeds: Vec<u64> = (0..n_votes as u64)
        .map(|i| base_seed.wrapping_add(i))
        .collect();
    let members: Result<Vec<M>> = seeds
        .par_iter()
        .map(|&seed| match mode {
            VoteMode::Restart => trainer(train, seed),
            VoteMode::Bootstrap => {
                let mut rng = seeded_rng(derive_seed(seed, "bootstrap"));
                let idx: Vec<usize> = (0..train.n())
                    .map(|_| rand::Rng::random_range(&mut rng, 0..train.n()))
                    .collect();
                trainer(&train.subset(&idx)?, seed)
            }
        })
        .collect();
    VoteEnsemble::new(members?, seeds)
}

/// Majority vote: the sign of the summed member predictions, with an exact
/// tie (possible for even member counts) resolved to `+1`.
pub fn predict_vote<M: Classifier>(e: &VoteEnsemble<M>, x: &[f32]) -> i8 {
    let sum: i64 = e.members.iter().map(|m| i64::from(m.predict(x))).sum();
    if sum >= 0 {
        1
    } else {
        -1
    }
}

/// Fraction of rows where the vote matches the label.
pub fn vote_accuracy<M: Classifier>(e: &VoteEnsemble<M>, ds: &BinaryDataset) -> f64 {
    let correct = ds.rows().filter(|&(x, y)| predict_vote(e, x) == y).count();
    correct as f64 / ds.n() as f64
}
