use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::eval::{eval_deepfool, eval_with_clean, predict_images, predictions, rates, record, EvalContext};
use super::report::{summarize, EvalRecord, GroupKey, Report};
use super::JobRunner;
use crate::attacks::{AttackConfig, AttackKind, ClipRange};
use crate::autodiff::ActivationKind;
use crate::data::LabeledImageSet;
use crate::error::{Error, Result};
use crate::nn::{Model, TestActivation};
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_SLOPES: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 10.0, 100.0];
pub const MNIST_EPSILONS: [f64; 7] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
pub const CIFAR_EPSILONS: [f64; 6] = [0.0, 0.02, 0.04, 0.06, 0.08, 0.1];
pub const DEEPFOOL_ITERATIONS: [usize; 6] = [1, 2, 5, 10, 20, 50];

/// Axes of a sweep. Attack entries are templates: kind, seed, target,
/// overshoot and clip range are kept, `ε`-dependent defaults are recomputed
/// for every grid value.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub slopes: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub attacks: Vec<AttackConfig>,
    /// Sweep values for DeepFool, which is budgeted in iterations.
    pub deepfool_iterations: Vec<usize>,
    /// Evaluate only the first `n` images.
    pub image_budget: Option<usize>,
}

impl SweepGrid {
    pub fn new(slopes: Vec<f64>, epsilons: Vec<f64>, attacks: Vec<AttackConfig>) -> Self {
        SweepGrid { slopes, epsilons, attacks, deepfool_iterations: DEEPFOOL_ITERATIONS.to_vec(), image_budget: None }
    }

    pub fn mnist(attacks: Vec<AttackConfig>) -> Self {
        Self::new(DEFAULT_SLOPES.to_vec(), MNIST_EPSILONS.to_vec(), attacks)
    }

    pub fn cifar(attacks: Vec<AttackConfig>) -> Self {
        Self::new(DEFAULT_SLOPES.to_vec(), CIFAR_EPSILONS.to_vec(), attacks)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slopes.is_empty() || self.slopes.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid("slopes", alloc::format!("{:?} must be non-empty and positive", self.slopes)));
        }
        validate_epsilons(&self.epsilons)?;
        if self.attacks.is_empty() {
            return Err(Error::invalid("attacks", "empty attack list"));
        }
        if self.attacks.iter().any(|a| a.kind == AttackKind::DeepFool)
            && (self.deepfool_iterations.is_empty() || self.deepfool_iterations.contains(&0))
        {
            return Err(Error::invalid("deepfool iterations", "need positive iteration budgets"));
        }
        Ok(())
    }

    fn values(&self, kind: AttackKind) -> Vec<f64> {
        if kind.sweeps_iterations() {
            self.deepfool_iterations.iter().map(|&k| k as f64).collect()
        } else {
            self.epsilons.clone()
        }
    }

    fn subset<T: Scalar>(&self, set: &LabeledImageSet<T>) -> Result<LabeledImageSet<T>> {
        match self.image_budget {
            Some(n) if n < set.len() => set.take_first(n),
            _ => Ok(set.clone()),
        }
    }

    pub fn describe(&self) -> String {
        let attacks: Vec<&str> = self.attacks.iter().map(|a| a.kind.name()).collect();
        alloc::format!(
            "slopes={:?} epsilons={:?} attacks={} deepfool_iterations={:?} images={}",
            self.slopes,
            self.epsilons,
            attacks.join(","),
            self.deepfool_iterations,
            self.image_budget.map_or("all".to_string(), |n| n.to_string())
        )
    }
}

fn validate_epsilons(eps: &[f64]) -> Result<()> {
    if eps.first() != Some(&0.0) {
        return Err(Error::invalid("epsilons", alloc::format!("{eps:?} must start at 0")));
    }
    if eps.windows(2).any(|w| !(w[0] < w[1])) || eps.iter().any(|&e| e > 1.0) {
        return Err(Error::invalid("epsilons", alloc::format!("{eps:?} must ascend within [0, 1]")));
    }
    Ok(())
}

/// Concrete configuration of `template` at sweep value `value`.
fn instantiate(template: &AttackConfig, value: f64) -> AttackConfig {
    AttackConfig {
        rng_seed: template.rng_seed,
        target_class: template.target_class,
        overshoot: template.overshoot,
        clip: template.clip,
        ..AttackConfig::for_kind(template.kind, value)
    }
}

fn collect<T>(results: Vec<Result<Vec<T>>>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn slope_baseline(k: &GroupKey) -> Option<GroupKey> {
    Some(GroupKey { activation: "srelu".into(), test_slope: 1.0, ..k.clone() })
}

const AVERAGING_NOTE: &str = "mean_adv_acc excludes the zero grid point; mean_adv_acc_all includes it";

/// Evaluates every `(α, attack, ε)` cell. DeepFool cells are swept over
/// iteration budgets instead of `ε`. Summaries carry per-curve means and the
/// recovery against `α = 1`.
pub fn slope_sweep<T: Scalar, R: JobRunner>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    grid: &SweepGrid,
    ctx: &EvalContext,
    runner: &R,
) -> Result<Report> {
    grid.validate()?;
    let set = grid.subset(set)?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let models: Vec<Model<T>> = grid.slopes.iter().map(|&a| model.with_test_slope(a)).collect();
    let clean = collect(runner.map(&models, |m| predictions(m, &set, ctx).map(|p| vec![p])))?;

    let mut cells: Vec<(usize, AttackConfig, Vec<f64>)> = Vec::new();
    for s in 0..models.len() {
        for t in &grid.attacks {
            if t.kind.sweeps_iterations() {
                cells.push((s, *t, grid.values(t.kind)));
            } else {
                cells.extend(grid.values(t.kind).into_iter().map(|e| (s, *t, vec![e])));
            }
        }
    }
    let records = collect(runner.map(&cells, |(s, t, values)| {
        let (m, clean) = (&models[*s], &clean[*s]);
        if t.kind.sweeps_iterations() {
            let budgets: Vec<usize> = values.iter().map(|&v| v as usize).collect();
            eval_deepfool(m, &set, t, &budgets, ctx, clean)
        } else {
            eval_with_clean(m, &set, &instantiate(t, values[0]), ctx, clean).map(|r| vec![r])
        }
    }))?;
    let mut report = Report::new(records)?;
    report.summaries = summarize(&report.records, false, slope_baseline);
    Ok(report
        .with_meta("experiment", "slope_sweep")
        .with_meta("grid", grid.describe())
        .with_meta("seed", ctx.seed.to_string())
        .with_meta("averaging", AVERAGING_NOTE))
}

/// Targeted FGSM toward each class `0..10` for every `(α, ε)`. Summaries
/// hold per-target curves and the pooled mean over targets and `ε` per `α`.
pub fn targeted_sweep<T: Scalar, R: JobRunner>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    grid: &SweepGrid,
    ctx: &EvalContext,
    runner: &R,
) -> Result<Report> {
    let template = grid.attacks.first().copied().unwrap_or(AttackConfig::fgsm_targeted(0.0, 0));
    let grid = SweepGrid { attacks: vec![template], ..grid.clone() };
    grid.validate()?;
    let set = grid.subset(set)?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let models: Vec<Model<T>> = grid.slopes.iter().map(|&a| model.with_test_slope(a)).collect();
    let clean = collect(runner.map(&models, |m| predictions(m, &set, ctx).map(|p| vec![p])))?;
    let classes = model.spec().classes();
    let mut cells = Vec::new();
    for s in 0..models.len() {
        for target in 0..classes {
            for &e in &grid.epsilons {
                cells.push((s, target, e));
            }
        }
    }
    let records = collect(runner.map(&cells, |&(s, target, e)| {
        let cfg = AttackConfig::fgsm_targeted(e, target).with_seed(template.rng_seed);
        eval_with_clean(&models[s], &set, &cfg, ctx, &clean[s]).map(|r| vec![r])
    }))?;
    let mut report = Report::new(records)?;
    let mut summaries = summarize(&report.records, false, slope_baseline);
    summaries.extend(summarize(&report.records, true, slope_baseline));
    report.summaries = summaries;
    Ok(report
        .with_meta("experiment", "targeted_sweep")
        .with_meta("grid", grid.describe())
        .with_meta("seed", ctx.seed.to_string())
        .with_meta("averaging", AVERAGING_NOTE))
}

/// FGSM over `epsilons` with each substitute activation in place of every
/// SReLU site at eval time, plus the SReLU(1) baseline.
pub fn activation_swap<T: Scalar, R: JobRunner>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    kinds: &[ActivationKind],
    epsilons: &[f64],
    ctx: &EvalContext,
    runner: &R,
) -> Result<Report> {
    validate_epsilons(epsilons)?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut acts = vec![TestActivation::SRelu(1.0)];
    acts.extend(kinds.iter().map(|&k| TestActivation::Substitute(k)));
    let models: Vec<Model<T>> = acts.iter().map(|&a| model.with_test_activation(a)).collect();
    let clean = collect(runner.map(&models, |m| predictions(m, set, ctx).map(|p| vec![p])))?;
    let cells: Vec<(usize, f64)> = (0..models.len()).flat_map(|m| epsilons.iter().map(move |&e| (m, e))).collect();
    let records = collect(runner.map(&cells, |&(m, e)| {
        eval_with_clean(&models[m], set, &AttackConfig::fgsm(e), ctx, &clean[m]).map(|r| vec![r])
    }))?;
    let mut report = Report::new(records)?;
    report.summaries = summarize(&report.records, false, slope_baseline);
    Ok(report
        .with_meta("experiment", "activation_swap")
        .with_meta("epsilons", alloc::format!("{epsilons:?}"))
        .with_meta("seed", ctx.seed.to_string())
        .with_meta("averaging", AVERAGING_NOTE))
}

fn scaled_label(dataset: &str, factor: f64, clip: bool) -> String {
    alloc::format!("{dataset}_x{factor}{}", if clip { "" } else { "_noclip" })
}

/// FGSM at slope 1 on pixel-scaled copies of `set`. Each factor's records
/// carry the dataset label `<name>_x<factor>` (suffix `_noclip` without
/// clipping). Unclipped runs widen the attack's clip range to
/// `[0, max(1, factor)]` so the attack does not undo the scaling.
pub fn scaling_experiment<T: Scalar, R: JobRunner>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    factors: &[f64],
    clip: bool,
    epsilons: &[f64],
    ctx: &EvalContext,
    runner: &R,
) -> Result<Report> {
    validate_epsilons(epsilons)?;
    if factors.is_empty() || factors.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::invalid("scale factors", alloc::format!("{factors:?} must be non-empty and positive")));
    }
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let model = model.with_test_slope(1.0);
    let sets: Vec<(f64, LabeledImageSet<T>, EvalContext)> = factors
        .iter()
        .map(|&f| {
            let ctx = EvalContext { dataset: scaled_label(&ctx.dataset, f, clip), ..ctx.clone() };
            set.scale_pixels(f, clip).map(|s| (f, s, ctx))
        })
        .collect::<Result<_>>()?;
    let clean = collect(runner.map(&sets, |(_, s, c)| predictions(&model, s, c).map(|p| vec![p])))?;
    let cells: Vec<(usize, f64)> = (0..sets.len()).flat_map(|i| epsilons.iter().map(move |&e| (i, e))).collect();
    let records = collect(runner.map(&cells, |&(i, e)| {
        let (f, s, c) = &sets[i];
        let mut cfg = AttackConfig::fgsm(e);
        if !clip {
            cfg.clip = ClipRange { lo: 0.0, hi: f.max(1.0) };
        }
        eval_with_clean(&model, s, &cfg, c, &clean[i]).map(|r| vec![r])
    }))?;
    let mut report = Report::new(records)?;
    let base = scaled_label(&ctx.dataset, 1.0, clip);
    report.summaries = summarize(&report.records, false, |k| Some(GroupKey { dataset: base.clone(), ..k.clone() }));
    Ok(report
        .with_meta("experiment", "scaling")
        .with_meta("factors", alloc::format!("{factors:?}"))
        .with_meta("clip", clip.to_string())
        .with_meta("epsilons", alloc::format!("{epsilons:?}"))
        .with_meta("seed", ctx.seed.to_string())
        .with_meta("averaging", AVERAGING_NOTE))
}

/// Crafts adversarial images on `substitute` (slope 1) and scores them on
/// `original` at every slope of `grid`. Records are named `bpda_<attack>`.
pub fn bpda_transfer_eval<T: Scalar, R: JobRunner>(
    original: &Model<T>,
    substitute: &Model<T>,
    set: &LabeledImageSet<T>,
    grid: &SweepGrid,
    ctx: &EvalContext,
    runner: &R,
) -> Result<Report> {
    grid.validate()?;
    if original.spec().input_shape != substitute.spec().input_shape {
        return Err(Error::shape(
            "bpda",
            alloc::format!("{:?} vs {:?}", original.spec().input_shape, substitute.spec().input_shape),
        ));
    }
    let set = grid.subset(set)?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let sub = substitute.with_test_slope(1.0);
    let models: Vec<Model<T>> = grid.slopes.iter().map(|&a| original.with_test_slope(a)).collect();
    let clean = collect(runner.map(&models, |m| predictions(m, &set, ctx).map(|p| vec![p])))?;
    let cells: Vec<AttackConfig> = grid
        .attacks
        .iter()
        .flat_map(|t| grid.values(t.kind).into_iter().map(move |v| instantiate(t, v)))
        .collect();
    let records = collect(runner.map(&cells, |cfg| {
        let adv_images = if !cfg.kind.sweeps_iterations() && cfg.epsilon == 0.0 {
            set.images().clone()
        } else {
            let mut parts = Vec::new();
            for (s, e) in ctx.chunks(set.len()) {
                let images = set.images().slice_batch(s, e)?;
                parts.push(cfg.run(&sub, &images, &set.labels()[s..e], s)?.images);
            }
            Tensor::concat_batch(&parts)?
        };
        let name = alloc::format!("bpda_{}", cfg.kind.name());
        models
            .iter()
            .zip(&clean)
            .map(|(m, clean)| {
                let adv = predict_images(m, &adv_images, ctx)?;
                let target = cfg.target_class.filter(|_| cfg.targeted());
                Ok(record(m, ctx, cfg, &name, set.len(), rates(clean, &adv, set.labels(), target)))
            })
            .collect::<Result<Vec<EvalRecord>>>()
    }))?;
    let mut report = Report::new(records)?;
    report.summaries = summarize(&report.records, false, slope_baseline);
    Ok(report
        .with_meta("experiment", "bpda_transfer")
        .with_meta("grid", grid.describe())
        .with_meta("substitute_loss", "soft-label cross entropy against the original's slope-1 softmax")
        .with_meta("seed", ctx.seed.to_string())
        .with_meta("averaging", AVERAGING_NOTE))
}
