use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use srelu::formats::{idx, Split};
use srelu_core::data::LabeledImageSet;
use srelu_core::Tensor;

const BIN: &str = env!("CARGO_BIN_EXE_srelu");

fn synthetic(n: usize, salt: usize) -> LabeledImageSet<f32> {
    let labels: Vec<usize> = (0..n).map(|i| (i * 7 + salt) % 10).collect();
    let mut data = Vec::with_capacity(n * 784);
    for (i, &l) in labels.iter().enumerate() {
        for p in 0..784 {
            let bar = (p % 28) / 3 == l;
            let v = if bar { 200 } else { (i * 31 + p * 17 + salt) % 60 };
            data.push(v as f32 / 255.0);
        }
    }
    LabeledImageSet::new("mnist", Tensor::new(vec![n, 1, 28, 28], data).unwrap(), labels).unwrap()
}

fn data_dir(root: &Path) -> PathBuf {
    let dir = root.join("data");
    std::fs::create_dir_all(dir.join("mnist")).unwrap();
    idx::save_mnist(&dir.join("mnist"), Split::Train, &synthetic(96, 1)).unwrap();
    idx::save_mnist(&dir.join("mnist"), Split::Test, &synthetic(30, 2)).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn train(root: &Path, data: &Path) -> PathBuf {
    let out = root.join("train");
    let o = run(&[
        "train", "--arch", "mnist", "--epochs", "1", "--seed", "7",
        "--data-dir", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("model.bin")
}

#[test]
fn train_then_sweep_is_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let model = train(tmp.path(), &data);
    for f in ["model.bin", "train_log.csv", "config.txt", "manifest.txt"] {
        assert!(model.parent().unwrap().join(f).exists(), "{f}");
    }
    let log = std::fs::read_to_string(model.parent().unwrap().join("train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,loss,train_acc,test_acc\n1,"), "{log}");

    let sweep = |threads: &str, out: &str| {
        let out = tmp.path().join(out);
        let o = run(&[
            "sweep", "--params", model.to_str().unwrap(), "--seed", "3",
            "--data-dir", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
            "--attacks", "fgsm,pgd,rfgsm,deepfool", "--slopes", "1,10",
            "--epsilons", "0,0.1,0.3", "--deepfool-iters", "1,3", "--images", "12",
            "--threads", threads,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = sweep("1", "a");
    let b = sweep("3", "b");
    for f in ["sweep.csv", "sweep_summary.csv", "sweep_meta.txt"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let csv = std::fs::read_to_string(a.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dataset,model,activation,train_slope,test_slope,attack,targeted,target_class,epsilon,steps,n_images,clean_acc,adv_acc,attack_success,seed"
    );
    // 2 slopes × (3 attacks × 3 ε + 2 DeepFool budgets).
    assert_eq!(lines.count(), 2 * (3 * 3 + 2));
    let manifest = std::fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed=3"));
    assert!(manifest.contains("output sweep.csv"));
    assert!(!manifest.contains("threads"));
}

#[test]
fn other_subcommands_write_their_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let model = train(tmp.path(), &data);
    let m = model.to_str().unwrap();
    let d = data.to_str().unwrap();
    let cases: &[(&[&str], &str)] = &[
        (&["eval", "--slopes", "1,100"], "eval.csv"),
        (&["attack", "--attack", "fgsm_targeted", "--target", "4", "--epsilon", "0.2", "--slope", "10"], "attack.csv"),
        (&["attack", "--attack", "salt_pepper", "--epsilon", "0.1"], "attack.csv"),
        (&["targeted-sweep", "--slopes", "1", "--epsilons", "0,0.2", "--images", "10"], "targeted.csv"),
        (&["swap", "--activations", "tanh,elu", "--epsilons", "0,0.1", "--images", "10"], "swap.csv"),
        (&["scale", "--factors", "1,5", "--epsilons", "0,0.1", "--images", "10", "--no-clip"], "scale.csv"),
        (&["bpda", "--slopes", "1,100", "--epsilons", "0,0.3", "--epochs", "1", "--images", "10"], "bpda.csv"),
        (&["export-features", "--images", "5"], "features.csv"),
    ];
    for (i, (args, file)) in cases.iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--params", m, "--seed", "1", "--data-dir", d, "--out", out.to_str().unwrap()]);
        let o = run(&full);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        assert!(out.join(file).exists(), "{args:?}");
        assert!(out.join("config.txt").exists() && out.join("manifest.txt").exists());
    }
    let eval = std::fs::read_to_string(tmp.path().join("out0/eval.csv")).unwrap();
    assert_eq!(eval.lines().count(), 3);
    assert!(eval.lines().all(|l| l.starts_with("dataset") || l.contains(",none,")));
    let feats = std::fs::read_to_string(tmp.path().join("out7/features.csv")).unwrap();
    assert_eq!(feats.lines().count(), 6);
    assert!(tmp.path().join("out6/substitute.bin").exists());
}

#[test]
fn missing_seed_is_a_usage_error_naming_seed() {
    let o = run(&["train", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn empty_attack_list_is_rejected() {
    let o = run(&["sweep", "--seed", "1", "--params", "x.bin", "--attacks", ","]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("attacks"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_and_flag_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--seed", "1", "--bogus", "3"]).status.code(), Some(2));
    assert_eq!(run(&["attack", "--seed", "1", "--params", "x", "--attack", "nope", "--epsilon", "1"]).status.code(), Some(2));
}

#[test]
fn file_errors_exit_1_naming_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["eval", "--seed", "1", "--params", "/nonexistent/model.bin", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("loading parameters"), "{}", stderr(&o));
    let o = run(&[
        "train", "--seed", "1", "--data-dir", tmp.path().to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("loading mnist training data"), "{}", stderr(&o));
}

#[test]
fn config_file_is_layered_under_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let cfg = tmp.path().join("run.cfg");
    let out = tmp.path().join("o");
    std::fs::write(
        &cfg,
        format!("# training run\nseed = 5\nepochs = 3\nlr = 0.05\ndata_dir = {}\nout = {}\n", data.display(), out.display()),
    )
    .unwrap();
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--epochs", "1", "--skip-test-eval"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echo.contains("epochs=1\n") && echo.contains("lr=0.05\n") && echo.contains("seed=5\n"), "{echo}");
    let log = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);

    std::fs::write(&cfg, "seed = 5\nslopes = 1\n").unwrap();
    let o = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("slopes"));
}
