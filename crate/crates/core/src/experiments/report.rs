use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// What the `epsilon` column of a record measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepUnits {
    Epsilon,
    /// DeepFool: the column holds the iteration budget.
    Iterations,
}

impl SweepUnits {
    pub fn name(self) -> &'static str {
        match self {
            SweepUnits::Epsilon => "epsilon",
            SweepUnits::Iterations => "iterations",
        }
    }
}

/// One evaluated grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub dataset: String,
    pub model: String,
    pub activation: String,
    pub train_slope: f64,
    pub test_slope: f64,
    pub attack: String,
    pub targeted: bool,
    pub target_class: Option<usize>,
    pub epsilon: f64,
    pub steps: usize,
    pub n_images: usize,
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub attack_success: f64,
    pub seed: u64,
    pub units: SweepUnits,
}

impl EvalRecord {
    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            dataset: self.dataset.clone(),
            model: self.model.clone(),
            activation: self.activation.clone(),
            train_slope: self.train_slope,
            test_slope: self.test_slope,
            attack: self.attack.clone(),
            targeted: self.targeted,
            target_class: self.target_class,
        }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        self.group_key()
            .cmp_key(&other.group_key())
            .then(self.epsilon.total_cmp(&other.epsilon))
    }
}

/// Everything identifying a curve: a record's key minus the sweep value.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupKey {
    pub dataset: String,
    pub model: String,
    pub activation: String,
    pub train_slope: f64,
    pub test_slope: f64,
    pub attack: String,
    pub targeted: bool,
    pub target_class: Option<usize>,
}

impl GroupKey {
    fn cmp_key(&self, o: &Self) -> Ordering {
        self.dataset
            .cmp(&o.dataset)
            .then_with(|| self.model.cmp(&o.model))
            .then_with(|| self.activation.cmp(&o.activation))
            .then(self.train_slope.total_cmp(&o.train_slope))
            .then(self.test_slope.total_cmp(&o.test_slope))
            .then_with(|| self.attack.cmp(&o.attack))
            .then(self.targeted.cmp(&o.targeted))
            .then(self.target_class.cmp(&o.target_class))
    }
}

/// Per-curve aggregates. Means come in two flavours: over the grid without
/// its zero point (canonical) and over the whole grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub key: GroupKey,
    pub units: SweepUnits,
    pub points: usize,
    pub mean_adv_acc: f64,
    pub mean_adv_acc_all: f64,
    pub mean_success: f64,
    pub mean_success_all: f64,
    /// Mean adversarial accuracy minus the baseline curve's, when a baseline exists.
    pub recovery: Option<f64>,
    pub recovery_all: Option<f64>,
}

/// Sorted records plus run metadata and summaries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub records: Vec<EvalRecord>,
    pub summaries: Vec<SummaryRow>,
    pub metadata: Vec<(String, String)>,
}

impl Report {
    /// Sorts records by key and rejects duplicate cells.
    pub fn new(mut records: Vec<EvalRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.cmp_key(b));
        for pair in records.windows(2) {
            if pair[0].cmp_key(&pair[1]) == Ordering::Equal {
                return Err(Error::invalid(
                    "report",
                    alloc::format!(
                        "duplicate cell {} {} slope {} {} {}",
                        pair[0].model,
                        pair[0].activation,
                        pair[0].test_slope,
                        pair[0].attack,
                        pair[0].epsilon
                    ),
                ));
            }
        }
        Ok(Report { records, summaries: Vec::new(), metadata: Vec::new() })
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.push((key.into(), value.into()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Records of one curve, in sweep order.
    pub fn curve<'a>(&'a self, pred: impl Fn(&EvalRecord) -> bool + 'a) -> impl Iterator<Item = &'a EvalRecord> + 'a {
        self.records.iter().filter(move |r| pred(r))
    }

    pub fn find(&self, pred: impl Fn(&GroupKey) -> bool) -> Option<&SummaryRow> {
        self.summaries.iter().find(|s| pred(&s.key))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Groups records into curves and averages over the sweep value. With
/// `pool_targets`, targeted curves of all target classes are merged into one
/// (key `target_class = None`). `baseline` names the curve each row's
/// recovery is measured against.
pub fn summarize(
    records: &[EvalRecord],
    pool_targets: bool,
    baseline: impl Fn(&GroupKey) -> Option<GroupKey>,
) -> Vec<SummaryRow> {
    let key_of = |r: &EvalRecord| {
        let mut k = r.group_key();
        if pool_targets {
            k.target_class = None;
        }
        k
    };
    let mut groups: Vec<(GroupKey, SweepUnits, Vec<&EvalRecord>)> = Vec::new();
    for r in records {
        let k = key_of(r);
        match groups.iter_mut().find(|(g, _, _)| g.cmp_key(&k) == Ordering::Equal) {
            Some((_, _, v)) => v.push(r),
            None => groups.push((k, r.units, alloc::vec![r])),
        }
    }
    groups.sort_by(|a, b| a.0.cmp_key(&b.0));
    let stats: Vec<(f64, f64, f64, f64)> = groups
        .iter()
        .map(|(_, units, rs)| {
            let nonzero = |r: &&&EvalRecord| *units == SweepUnits::Iterations || r.epsilon != 0.0;
            (
                mean(rs.iter().filter(nonzero).map(|r| r.adv_acc)),
                mean(rs.iter().map(|r| r.adv_acc)),
                mean(rs.iter().filter(nonzero).map(|r| r.attack_success)),
                mean(rs.iter().map(|r| r.attack_success)),
            )
        })
        .collect();
    groups
        .iter()
        .zip(&stats)
        .map(|((key, units, rs), &(acc, acc_all, succ, succ_all))| {
            let base = baseline(key)
                .and_then(|b| groups.iter().position(|(g, _, _)| g.cmp_key(&b) == Ordering::Equal))
                .map(|i| stats[i]);
            SummaryRow {
                key: key.clone(),
                units: *units,
                points: rs.len(),
                mean_adv_acc: acc,
                mean_adv_acc_all: acc_all,
                mean_success: succ,
                mean_success_all: succ_all,
                recovery: base.map(|b| acc - b.0),
                recovery_all: base.map(|b| acc_all - b.1),
            }
        })
        .collect()
}
