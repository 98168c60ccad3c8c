//! Sweeps over slopes, attacks and budgets, plus training.
//!
//! Every grid cell is an independent job. Jobs go through a [`JobRunner`] so
//! callers can fan them out over threads; reports are sorted by key
//! afterwards, so the runner never changes the output.

mod eval;
mod report;
mod sweeps;
mod train;

pub use eval::{eval_clean, eval_under_attack, feature_rows, EvalContext, DEFAULT_EVAL_BATCH};
pub use report::{summarize, EvalRecord, GroupKey, Report, SummaryRow, SweepUnits};
pub use sweeps::{
    activation_swap, bpda_transfer_eval, scaling_experiment, slope_sweep, targeted_sweep, SweepGrid,
    CIFAR_EPSILONS, DEEPFOOL_ITERATIONS, DEFAULT_SLOPES, MNIST_EPSILONS,
};
pub use train::{bpda_train_substitute, train, train_observed, EpochStats, Sgd, Targets, TrainConfig, TrainLog};

use alloc::vec::Vec;

/// Executes independent jobs. Results come back in input order.
pub trait JobRunner: Sync {
    fn map<I, O, F>(&self, items: &[I], f: F) -> Vec<O>
    where
        I: Sync,
        O: Send,
        F: Fn(&I) -> O + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl JobRunner for Sequential {
    fn map<I, O, F>(&self, items: &[I], f: F) -> Vec<O>
    where
        I: Sync,
        O: Send,
        F: Fn(&I) -> O + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}
