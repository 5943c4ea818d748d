//! 01-loss classifiers, their convex counterparts, and a substitute-model
//! black-box attack harness for binary image classification.
//!
//! The crate trains linear and dual-layer sign-activation models directly on
//! the 01 loss with stochastic coordinate descent, trains hinge-loss SVM and
//! sigmoid MLP baselines by (sub)gradient descent, aggregates either family
//! into majority-vote ensembles, and attacks any of them through a
//! label-only oracle with substitute-model transfer attacks.

pub mod attack;
pub mod convex;
pub mod dataset;
pub mod error;
pub mod loss;
pub mod mlp01;
pub mod persist;
pub mod rng;
pub mod scd;
pub mod vote;

pub use attack::{
    adversary_within_budget, fgsm, label_match_rate, linear_adversary, run_attack,
    run_substitute_attack, scd01_substitute_attack, AttackConfig, AttackTrace, EpochRecord,
    SubstituteSpec, TargetOracle, TRACE_CSV_HEADER,
};
pub use convex::{
    input_gradient, mlp_accuracy, mlp_forward, select_svm_c, train_mlp, train_svm, DenseLayer,
    SgdConfig, SigmoidMlpModel, SvmConfig,
};
pub use dataset::{
    load_cifar10_bin, load_container, load_idx, parse_container, parse_idx, save_container,
    select_binary, split, BinaryDataset, RawImageSet,
};
pub use error::{Error, Result};
pub use loss::{
    best_threshold, best_threshold_exact, loss01_linear, predict_linear, sign01, LinearModel,
    ThresholdSearchResult,
};
pub use mlp01::{
    hidden_activations, hidden_node_step, init_mlp01, loss01_mlp, output_node_step, predict_mlp01,
    train_mlp01, train_mlp01_traced, Mlp01Config, Mlp01Model,
};
pub use persist::{load_model, parse_model, save_model, EnsembleBlob, ModelKind};
pub use scd::{
    coordinate_step, init_linear, train_scd01, train_scd01_traced, ScdConfig, TrainedRun,
};
pub use vote::{predict_vote, train_vote, vote_accuracy, Classifier, VoteEnsemble, VoteMode};
