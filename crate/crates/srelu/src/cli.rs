//! The `srelu` command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Arg, ArgAction, Command};
use sha2::{Digest, Sha256};
use srelu_core::attacks::{AttackConfig, AttackKind};
use srelu_core::autodiff::ActivationKind;
use srelu_core::data::LabeledImageSet;
use srelu_core::experiments::{
    self, EvalContext, Report, SweepGrid, TrainConfig, CIFAR_EPSILONS, DEFAULT_SLOPES, MNIST_EPSILONS,
};
use srelu_core::nn::{ArchId, ArchitectureSpec, Model, TestActivation};

use crate::config::{Settings, UsageError};
use crate::datasets::Dataset;
use crate::formats::{params, Split};
use crate::report;
use crate::runner::ThreadPoolRunner;

const COMMON: &[(&str, &str)] = &[
    ("config", "key = value file; flags override its entries"),
    ("seed", "seed for initialisation, shuffling and randomised attacks (required)"),
    ("dataset", "mnist or cifar10 [default: mnist]"),
    ("data-dir", "directory holding mnist/ and cifar10/ [default: data]"),
    ("out", "output directory [default: runs/<command>]"),
    ("threads", "worker threads, 0 = all cores [default: 0]"),
];

const MODEL: &[(&str, &str)] = &[("params", "parameter file written by `train` (required)")];
const GRID: &[(&str, &str)] = &[
    ("slopes", "comma-separated test slopes [default: 0.5,1,2,5,10,100]"),
    ("epsilons", "comma-separated budgets starting at 0 [default: per dataset]"),
    ("images", "evaluate only the first N test images"),
];
const TRAINING: &[(&str, &str)] = &[
    ("epochs", "training epochs [default: 5 for mnist, 30 for cifar10]"),
    ("lr", "learning rate [default: 0.01]"),
    ("momentum", "momentum [default: 0.9]"),
    ("batch-size", "minibatch size [default: 64]"),
    ("train-images", "train on the first N training images only"),
];

struct Sub {
    name: &'static str,
    about: &'static str,
    groups: &'static [&'static [(&'static str, &'static str)]],
    flags: &'static [(&'static str, &'static str)],
}

const SUBCOMMANDS: &[Sub] = &[
    Sub {
        name: "train",
        about: "Train a CNN and write model.bin plus train_log.csv",
        groups: &[
            TRAINING,
            &[
                ("arch", "mnist_cnn, cifar10_cnn1 or cifar10_cnn2 [default: per dataset]"),
                ("train-slope", "SReLU slope used while training [default: 1]"),
            ],
        ],
        flags: &[("skip-test-eval", "do not score the test set after each epoch")],
    },
    Sub {
        name: "eval",
        about: "Clean test accuracy at each slope",
        groups: &[
            MODEL,
            &[
                ("slopes", "comma-separated test slopes [default: 1]"),
                ("activation", "srelu or a substitute (sigmoid, tanh, leaky_relu, elu, softplus) [default: srelu]"),
                ("images", "evaluate only the first N test images"),
            ],
        ],
        flags: &[],
    },
    Sub {
        name: "attack",
        about: "One attack at one slope and budget",
        groups: &[
            MODEL,
            &[
                ("attack", "fgsm, fgsm_targeted, bim, rfgsm, stepll, pgd, deepfool, gaussian_noise, salt_pepper"),
                ("epsilon", "budget (iteration count for deepfool)"),
                ("slope", "test slope [default: 1]"),
                ("target", "target class for fgsm_targeted"),
                ("steps", "iterations for bim/pgd"),
                ("step-size", "step size for bim/pgd"),
                ("overshoot", "deepfool overshoot [default: 0.02]"),
                ("images", "evaluate only the first N test images"),
            ],
        ],
        flags: &[],
    },
    Sub {
        name: "sweep",
        about: "Slope × attack × budget sweep",
        groups: &[
            MODEL,
            GRID,
            &[
                ("attacks", "comma-separated attacks [default: fgsm,bim,rfgsm,stepll,pgd,deepfool]"),
                ("deepfool-iters", "deepfool iteration budgets [default: 1,2,5,10,20,50]"),
            ],
        ],
        flags: &[],
    },
    Sub {
        name: "targeted-sweep",
        about: "Targeted FGSM toward every class at each slope and budget",
        groups: &[MODEL, GRID],
        flags: &[],
    },
    Sub {
        name: "swap",
        about: "FGSM with substitute activations in place of SReLU",
        groups: &[
            MODEL,
            &[
                ("activations", "substitutes [default: sigmoid,tanh,leaky_relu,elu,softplus]"),
                ("epsilons", "comma-separated budgets starting at 0 [default: per dataset]"),
                ("images", "evaluate only the first N test images"),
            ],
        ],
        flags: &[],
    },
    Sub {
        name: "scale",
        about: "FGSM at slope 1 on pixel-scaled inputs",
        groups: &[
            MODEL,
            &[
                ("factors", "pixel scale factors [default: 1,2,5,10,100]"),
                ("epsilons", "comma-separated budgets starting at 0 [default: per dataset]"),
                ("images", "evaluate only the first N test images"),
            ],
        ],
        flags: &[("no-clip", "keep scaled pixels above 1")],
    },
    Sub {
        name: "bpda",
        about: "Transfer attacks from a distilled slope-1 substitute",
        groups: &[
            MODEL,
            GRID,
            TRAINING,
            &[
                ("substitute", "existing substitute parameter file (skips distillation)"),
                ("substitute-seed", "initialisation and shuffling seed of the substitute [default: seed + 1]"),
                ("attacks", "comma-separated attacks [default: fgsm]"),
            ],
        ],
        flags: &[],
    },
    Sub {
        name: "export-features",
        about: "Write label plus penultimate features per test image",
        groups: &[
            MODEL,
            &[
                ("slope", "test slope [default: 1]"),
                ("activation", "srelu or a substitute [default: srelu]"),
                ("images", "export only the first N test images"),
            ],
        ],
        flags: &[],
    },
];

fn sub_keys(sub: &Sub) -> Vec<(&'static str, &'static str)> {
    let mut keys: Vec<(&str, &str)> = COMMON.to_vec();
    for g in sub.groups {
        for &(k, h) in g.iter() {
            if !keys.iter().any(|(e, _)| *e == k) {
                keys.push((k, h));
            }
        }
    }
    keys
}

pub fn command() -> Command {
    let mut cmd = Command::new("srelu")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Test-time SReLU slope defense: training, attacks and sweeps")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SUBCOMMANDS {
        let mut c = Command::new(sub.name).about(sub.about);
        for (k, help) in sub_keys(sub) {
            c = c.arg(Arg::new(k).long(k).value_name("VALUE").help(help).action(ArgAction::Set));
        }
        for &(k, help) in sub.flags {
            c = c.arg(
                Arg::new(k)
                    .long(k)
                    .help(help)
                    .num_args(0..=1)
                    .default_missing_value("true")
                    .value_parser(["true", "false"]),
            );
        }
        cmd = cmd.subcommand(c);
    }
    cmd
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code. Errors are printed to stderr.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn run(matches: &clap::ArgMatches) -> anyhow::Result<()> {
    let (name, sub_m) = matches.subcommand().expect("subcommand required");
    let sub = SUBCOMMANDS.iter().find(|s| s.name == name).expect("known subcommand");
    let allowed: Vec<String> = sub_keys(sub).iter().map(|(k, _)| k.to_string()).chain(sub.flags.iter().map(|(k, _)| k.to_string())).collect();
    let mut flags = BTreeMap::new();
    for k in &allowed {
        if let Some(v) = sub_m.get_one::<String>(k) {
            flags.insert(k.clone(), v.clone());
        }
    }
    let config = flags.get("config").map(PathBuf::from);
    let s = Settings::from_file_and_flags(config.as_deref(), flags, &allowed)?;
    let ctx = RunContext::new(name, &s)?;
    match name {
        "train" => cmd_train(&s, &ctx),
        "eval" => cmd_eval(&s, &ctx),
        "attack" => cmd_attack(&s, &ctx),
        "sweep" => cmd_sweep(&s, &ctx),
        "targeted-sweep" => cmd_targeted(&s, &ctx),
        "swap" => cmd_swap(&s, &ctx),
        "scale" => cmd_scale(&s, &ctx),
        "bpda" => cmd_bpda(&s, &ctx),
        "export-features" => cmd_features(&s, &ctx),
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

struct RunContext {
    command: &'static str,
    seed: u64,
    dataset: Dataset,
    data_dir: PathBuf,
    out: PathBuf,
    runner: ThreadPoolRunner,
    inputs: Vec<PathBuf>,
    outputs: std::cell::RefCell<Vec<String>>,
}

impl RunContext {
    fn new(command: &str, s: &Settings) -> anyhow::Result<Self> {
        let command = SUBCOMMANDS.iter().find(|c| c.name == command).expect("known").name;
        let seed = s.require::<u64>("seed")?;
        let dataset: Dataset = s.get_or("dataset", Dataset::Mnist)?;
        let data_dir: PathBuf = s.get_or("data-dir", "data".to_string())?.into();
        let out: PathBuf = s.get_or("out", format!("runs/{command}"))?.into();
        let threads = s.get_or("threads", 0usize)?;
        let runner = ThreadPoolRunner::new(threads).context("starting worker threads")?;
        let inputs = ["params", "substitute"].iter().filter_map(|k| s.raw(k)).map(PathBuf::from).collect();
        Ok(RunContext { command, seed, dataset, data_dir, out, runner, inputs, outputs: Default::default() })
    }

    fn eval_ctx(&self) -> EvalContext {
        EvalContext::new(self.dataset.name(), self.seed)
    }

    fn prepare_out(&self, s: &Settings) -> anyhow::Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating output directory {}", self.out.display()))?;
        // Not hashed into the manifest: it records --out and --threads.
        let path = self.out.join("config.txt");
        fs::write(&path, s.echo(self.command)).with_context(|| format!("writing {}", path.display()))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.borrow_mut().push(name.to_string());
        Ok(())
    }

    fn write_csv(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).with_context(|| format!("rendering {name}"))?;
        self.write(name, &buf)
    }

    fn write_report(&self, stem: &str, report: &Report) -> anyhow::Result<()> {
        self.write_csv(&format!("{stem}.csv"), |b| report::write_records(b, report))?;
        if !report.summaries.is_empty() {
            self.write_csv(&format!("{stem}_summary.csv"), |b| report::write_summaries(b, report))?;
        }
        let meta: String = report.metadata.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        self.write(&format!("{stem}_meta.txt"), meta.as_bytes())
    }

    fn load(&self, split: Split) -> anyhow::Result<LabeledImageSet<f32>> {
        let which = match split {
            Split::Train => "training",
            Split::Test => "test",
        };
        self.dataset
            .load(&self.data_dir, split)
            .with_context(|| format!("loading {} {which} data from {}", self.dataset, self.dataset.dir(&self.data_dir).display()))
    }

    fn load_test(&self, s: &Settings) -> anyhow::Result<LabeledImageSet<f32>> {
        let set = self.load(Split::Test)?;
        budget(set, s.get::<usize>("images")?)
    }

    fn load_model(&self, path: &Path) -> anyhow::Result<Model<f32>> {
        params::load(path).with_context(|| format!("loading parameters from {}", path.display()))
    }

    /// Writes manifest.txt: versions, seed, and SHA-256 of inputs and outputs.
    fn finish(&self) -> anyhow::Result<()> {
        let mut m = String::new();
        m.push_str(&format!("tool=srelu {}\n", env!("CARGO_PKG_VERSION")));
        m.push_str(&format!("command={}\n", self.command));
        m.push_str(&format!("seed={}\n", self.seed));
        m.push_str(&format!("params_format=SRLU v{}\n", params::VERSION));
        m.push_str(&format!("report_format=csv v1 ({})\n", report::REPORT_HEADER.join(",")));
        m.push_str("precision=f32\n");
        for p in &self.inputs {
            let bytes = fs::read(p).with_context(|| format!("hashing {}", p.display()))?;
            m.push_str(&format!("input {} sha256={}\n", p.display(), sha256(&bytes)));
        }
        for name in self.outputs.borrow().iter() {
            let bytes = fs::read(self.out.join(name))?;
            m.push_str(&format!("output {name} bytes={} sha256={}\n", bytes.len(), sha256(&bytes)));
        }
        fs::write(self.out.join("manifest.txt"), m).context("writing manifest")?;
        Ok(())
    }
}

fn sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn budget(set: LabeledImageSet<f32>, n: Option<usize>) -> anyhow::Result<LabeledImageSet<f32>> {
    match n {
        Some(n) if n < set.len() => Ok(set.take_first(n)?),
        _ => Ok(set),
    }
}

fn default_epsilons(d: Dataset) -> String {
    let eps: &[f64] = match d {
        Dataset::Mnist => &MNIST_EPSILONS,
        Dataset::Cifar10 => &CIFAR_EPSILONS,
    };
    join(eps)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn epsilons(s: &Settings, d: Dataset) -> anyhow::Result<Vec<f64>> {
    Ok(s.list("epsilons", Some(&default_epsilons(d)))?.expect("defaulted"))
}

fn slopes(s: &Settings, default: &str) -> anyhow::Result<Vec<f64>> {
    Ok(s.list("slopes", Some(default))?.expect("defaulted"))
}

fn test_activation(s: &Settings, slope: f64) -> anyhow::Result<TestActivation> {
    let name = s.get_or("activation", "srelu".to_string())?;
    if name.eq_ignore_ascii_case("srelu") {
        return Ok(TestActivation::SRelu(slope));
    }
    let kind: ActivationKind = name.parse().map_err(|e| UsageError(format!("--activation: {e}")))?;
    Ok(TestActivation::Substitute(kind))
}

fn attack_templates(s: &Settings, default: &str, seed: u64) -> anyhow::Result<Vec<AttackConfig>> {
    let kinds: Vec<AttackKind> = s.list("attacks", Some(default))?.expect("defaulted");
    Ok(kinds.into_iter().map(|k| AttackConfig::for_kind(k, 0.0).with_seed(seed)).collect())
}

fn train_config(s: &Settings, ctx: &RunContext, train_slope: f64) -> anyhow::Result<TrainConfig> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        epochs: s.get_or("epochs", ctx.dataset.default_epochs())?,
        lr: s.get_or("lr", d.lr)?,
        momentum: s.get_or("momentum", d.momentum)?,
        batch_size: s.get_or("batch-size", d.batch_size)?,
        seed: ctx.seed,
        train_slope,
    })
}

fn cmd_train(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let arch: ArchId = s.get_or("arch", ctx.dataset.default_arch())?;
    let train_slope = s.get_or("train-slope", 1.0f64)?;
    let cfg = train_config(s, ctx, train_slope)?;
    let skip_test = s.flag("skip-test-eval")?;
    let train_images = s.get::<usize>("train-images")?;
    ctx.prepare_out(s)?;
    let train = budget(ctx.load(Split::Train)?, train_images)?;
    let test = if skip_test { None } else { Some(ctx.load(Split::Test)?) };
    let model = Model::build(ArchitectureSpec::from_id(arch)?, ctx.seed).context("building model")?;
    let ectx = ctx.eval_ctx();
    let mut test_acc = Vec::new();
    let mut failure = None;
    let (trained, log) = experiments::train_observed(&model, &train, &cfg, &mut |stats, m| {
        let mut line = format!("epoch {} loss {:.4} train_acc {:.4}", stats.epoch, stats.loss, stats.train_accuracy);
        if let Some(t) = &test {
            match experiments::eval_clean(&m.with_test_slope(train_slope), t, &ectx) {
                Ok(acc) => {
                    line.push_str(&format!(" test_acc {acc:.4}"));
                    test_acc.push(acc);
                }
                Err(e) => failure = Some(e),
            }
        }
        eprintln!("{line}");
    })
    .context("training")?;
    if let Some(e) = failure {
        return Err(anyhow::Error::new(e).context("scoring test set"));
    }
    let bytes = params::encode(&trained)?;
    ctx.write("model.bin", &bytes)?;
    ctx.write_csv("train_log.csv", |b| report::write_train_log(b, &log, &test_acc))?;
    ctx.finish()
}

fn cmd_eval(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let params = s.require::<PathBuf>("params")?;
    let slopes = slopes(s, "1")?;
    let activations = slopes.iter().map(|&a| test_activation(s, a)).collect::<anyhow::Result<Vec<_>>>()?;
    ctx.prepare_out(s)?;
    let model = ctx.load_model(&params)?;
    let set = ctx.load_test(s)?;
    let ectx = ctx.eval_ctx();
    let mut records = Vec::new();
    for act in activations {
        let m = model.with_test_activation(act);
        let acc = experiments::eval_clean(&m, &set, &ectx).context("evaluating")?;
        let mut r = experiments::eval_under_attack(&m, &set, &AttackConfig::fgsm(0.0), &ectx)?;
        r.attack = "none".into();
        debug_assert_eq!(r.clean_acc, acc);
        records.push(r);
    }
    let report = Report::new(records)?;
    ctx.write_report("eval", &report)?;
    ctx.finish()
}

fn cmd_attack(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let params = s.require::<PathBuf>("params")?;
    let kind: AttackKind = s.require("attack")?;
    let value: f64 = s.require("epsilon")?;
    let slope = s.get_or("slope", 1.0f64)?;
    let mut cfg = AttackConfig::for_kind(kind, value).with_seed(ctx.seed);
    if let Some(t) = s.get::<usize>("target")? {
        cfg.target_class = Some(t);
    } else if cfg.targeted() {
        return Err(UsageError("fgsm_targeted needs --target".into()).into());
    }
    if let Some(n) = s.get::<usize>("steps")? {
        cfg.steps = n;
    }
    if let Some(a) = s.get::<f64>("step-size")? {
        cfg.step_size = a;
    }
    if let Some(o) = s.get::<f64>("overshoot")? {
        cfg.overshoot = o;
    }
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    ctx.prepare_out(s)?;
    let model = ctx.load_model(&params)?;
    let set = ctx.load_test(s)?;
    let m = model.with_test_slope(slope);
    let record = experiments::eval_under_attack(&m, &set, &cfg, &ctx.eval_ctx()).context("running attack")?;
    ctx.write_report("attack", &Report::new(vec![record])?)?;
    ctx.finish()
}

fn cmd_sweep(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let params = s.require::<PathBuf>("params")?;
    let attacks = attack_templates(s, "fgsm,bim,rfgsm,stepll,pgd,deepfool", ctx.seed)?;
    let mut grid = SweepGrid::new(slopes(s, &join(&DEFAULT_SLOPES))?, epsilons(s, ctx.dataset)?, attacks);
    grid.deepfool_iterations = s.list("deepfool-iters", Some(&join(&experiments::DEEPFOOL_ITERATIONS)))?.expect("defaulted");
    // Single-step FGSM runs on the full test set, anything heavier on the first 2000 images.
    let heavy = grid.attacks.iter().any(|a| a.kind != AttackKind::Fgsm);
    grid.image_budget = match s.get::<usize>("images")? {
        Some(n) => Some(n),
        None if heavy => Some(s.get_or("images", 2000usize)?),
        None => None,
    };
    grid.validate().map_err(|e| UsageError(e.to_string()))?;
    ctx.prepare_out(s)?;
    let model = ctx.load_model(&params)?;
    let set = ctx.load(Split::Test)?;
    let report = experiments::slope_sweep(&model, &set, &grid, &ctx.eval_ctx(), &ctx.runner).context("running sweep")?;
    ctx.write_report("sweep", &report)?;
    ctx.finish()
}

fn cmd_targeted(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let params = s.require::<PathBuf>("params")?;
    let mut grid = SweepGrid::new(
        slopes(s, &join(&DEFAULT_SLOPES))?,
        epsilons(s, ctx.dataset)?,
        vec![AttackConfig::fgsm_targeted(0.0, 0).with_seed(ctx.seed)],
    );
    grid.image_budget = s.get::<usize>("images")?;
    grid.validate().map_err(|e| UsageError(e.to_string()))?;
    ctx.prepare_out(s)?;
    let model = ctx.load_model(&params)?;
    let set = ctx.load(Split::Test)?;
    let report =
        experiments::targeted_sweep(&model, &set, &grid, &ctx.eval_ctx(), &ctx.runner).context("running targeted sweep")?;
    ctx.write_report("targeted", &report)?;
    ctx.finish()
}

fn cmd_swap(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let params = s.require::<PathBuf>("params")?;
    let default = join(&ActivationKind::SUBSTITUTES.iter().map(|k| k.name()).collect::<Vec<_>>());
    let kinds: Vec<ActivationKind> = s.list("activations", Some(&default))?.expect("defaulted");
    let eps = epsilons(s, ctx.dataset)?;
    ctx.prepare_out(s)?;
    let model = ctx.load_model(&params)?;
    let set = ctx.load_test(s)?;
    let report = experiments::activation_swap(&model, &set, &kinds, &eps, &ctx.eval_ctx(), &ctx.runner)
        .context("running activation swap")?;
    ctx.write_report("swap", &report)?;
    ctx.finish()
}

fn cmd_scale(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let params = s.require::<PathBuf>("params")?;
    let factors: Vec<f64> = s.list("factors", Some("1,2,5,10,100"))?.expect("defaulted");
    let clip = !s.flag("no-clip")?;
    let eps = epsilons(s, ctx.dataset)?;
    ctx.prepare_out(s)?;
    let model = ctx.load_model(&params)?;
    let set = ctx.load_test(s)?;
    let report = experiments::scaling_experiment(&model, &set, &factors, clip, &eps, &ctx.eval_ctx(), &ctx.runner)
        .context("running scaling experiment")?;
    ctx.write_report("scale", &report)?;
    ctx.finish()
}

fn cmd_bpda(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let params = s.require::<PathBuf>("params")?;
    let attacks = attack_templates(s, "fgsm", ctx.seed)?;
    let mut grid = SweepGrid::new(slopes(s, &join(&DEFAULT_SLOPES))?, epsilons(s, ctx.dataset)?, attacks);
    grid.image_budget = s.get::<usize>("images")?;
    grid.validate().map_err(|e| UsageError(e.to_string()))?;
    let existing = s.get::<String>("substitute")?;
    let cfg = match existing {
        Some(_) => None,
        None => Some(TrainConfig {
            seed: s.get_or("substitute-seed", ctx.seed.wrapping_add(1))?,
            ..train_config(s, ctx, 1.0)?
        }),
    };
    let train_images = s.get::<usize>("train-images")?;
    ctx.prepare_out(s)?;
    let model = ctx.load_model(&params)?;
    let substitute = match (existing, cfg) {
        (Some(p), _) => params::load(Path::new(&p)).with_context(|| format!("loading substitute from {p}"))?,
        (None, Some(cfg)) => {
            let train = budget(ctx.load(Split::Train)?, train_images)?;
            let (sub, log) = experiments::bpda_train_substitute(&model, &train, &cfg, &mut |e| {
                eprintln!("substitute epoch {} loss {:.4} train_acc {:.4}", e.epoch, e.loss, e.train_accuracy)
            })
            .context("training substitute")?;
            let bytes = params::encode(&sub)?;
            ctx.write("substitute.bin", &bytes)?;
            ctx.write_csv("substitute_log.csv", |b| report::write_train_log(b, &log, &[]))?;
            sub
        }
        (None, None) => bail!("no substitute"),
    };
    let set = ctx.load(Split::Test)?;
    let report = experiments::bpda_transfer_eval(&model, &substitute, &set, &grid, &ctx.eval_ctx(), &ctx.runner)
        .context("running transfer attacks")?;
    ctx.write_report("bpda", &report)?;
    ctx.finish()
}

fn cmd_features(s: &Settings, ctx: &RunContext) -> anyhow::Result<()> {
    let params = s.require::<PathBuf>("params")?;
    let slope = s.get_or("slope", 1.0f64)?;
    let act = test_activation(s, slope)?;
    ctx.prepare_out(s)?;
    let m = ctx.load_model(&params)?.with_test_activation(act);
    let set = ctx.load_test(s)?;
    let rows = experiments::feature_rows(&m, &set, &ctx.eval_ctx()).context("extracting features")?;
    ctx.write_csv("features.csv", |b| report::write_features(b, &rows))?;
    ctx.finish()
}
