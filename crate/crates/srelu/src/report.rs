//! CSV renderings of reports, training logs and feature exports.

use std::io::Write;

use srelu_core::experiments::{EvalRecord, Report, SummaryRow, TrainLog};

pub const REPORT_HEADER: [&str; 15] = [
    "dataset",
    "model",
    "activation",
    "train_slope",
    "test_slope",
    "attack",
    "targeted",
    "target_class",
    "epsilon",
    "steps",
    "n_images",
    "clean_acc",
    "adv_acc",
    "attack_success",
    "seed",
];

pub const SUMMARY_HEADER: [&str; 16] = [
    "dataset",
    "model",
    "activation",
    "train_slope",
    "test_slope",
    "attack",
    "targeted",
    "target_class",
    "units",
    "points",
    "mean_adv_acc",
    "mean_adv_acc_all",
    "mean_success",
    "mean_success_all",
    "recovery",
    "recovery_all",
];

/// Six significant digits, trailing zeros trimmed, exponent form outside
/// `[1e-4, 1e6)` (C's `%.6g`).
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_class(c: Option<usize>) -> String {
    c.map(|c| c.to_string()).unwrap_or_default()
}

fn record_row(r: &EvalRecord) -> Vec<String> {
    vec![
        r.dataset.clone(),
        r.model.clone(),
        r.activation.clone(),
        sig6(r.train_slope),
        sig6(r.test_slope),
        r.attack.clone(),
        r.targeted.to_string(),
        opt_class(r.target_class),
        sig6(r.epsilon),
        r.steps.to_string(),
        r.n_images.to_string(),
        sig6(r.clean_acc),
        sig6(r.adv_acc),
        sig6(r.attack_success),
        r.seed.to_string(),
    ]
}

fn summary_row(s: &SummaryRow) -> Vec<String> {
    let k = &s.key;
    let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    vec![
        k.dataset.clone(),
        k.model.clone(),
        k.activation.clone(),
        sig6(k.train_slope),
        sig6(k.test_slope),
        k.attack.clone(),
        k.targeted.to_string(),
        opt_class(k.target_class),
        s.units.name().to_string(),
        s.points.to_string(),
        sig6(s.mean_adv_acc),
        sig6(s.mean_adv_acc_all),
        sig6(s.mean_success),
        sig6(s.mean_success_all),
        opt(s.recovery),
        opt(s.recovery_all),
    ]
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records<W: Write>(out: W, report: &Report) -> csv::Result<()> {
    write_rows(out, &REPORT_HEADER, report.records.iter().map(record_row))
}

pub fn write_summaries<W: Write>(out: W, report: &Report) -> csv::Result<()> {
    write_rows(out, &SUMMARY_HEADER, report.summaries.iter().map(summary_row))
}

/// `epoch,loss,train_acc[,test_acc]`.
pub fn write_train_log<W: Write>(out: W, log: &TrainLog, test_acc: &[f64]) -> csv::Result<()> {
    let mut header = vec!["epoch", "loss", "train_acc"];
    if !test_acc.is_empty() {
        header.push("test_acc");
    }
    let rows = log.epochs.iter().enumerate().map(|(i, e)| {
        let mut row = vec![e.epoch.to_string(), sig6(e.loss), sig6(e.train_accuracy)];
        if let Some(a) = test_acc.get(i) {
            row.push(sig6(*a));
        }
        row
    });
    write_rows(out, &header, rows)
}

/// `label,f0,…,f{k-1}`; values use the shortest representation that
/// round-trips.
pub fn write_features<W: Write>(out: W, rows: &[(usize, Vec<f32>)]) -> csv::Result<()> {
    let width = rows.first().map_or(0, |r| r.1.len());
    let names: Vec<String> = std::iter::once("label".to_string()).chain((0..width).map(|i| format!("f{i}"))).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    write_rows(
        out,
        &header,
        rows.iter().map(|(l, f)| std::iter::once(l.to_string()).chain(f.iter().map(|v| v.to_string())).collect()),
    )
}
