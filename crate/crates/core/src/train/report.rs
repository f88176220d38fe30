//! Plain-text renderings of results. Everything here is deterministic given its
//! inputs; wall-clock timings only ever go through [`timing_csv`].

use std::fmt::Write;

use super::{AblationRow, ConfusionMatrix, EpochLog, F1Summary, FewShotRow, MetricsReport};
use crate::pretrain::PretrainEpoch;

fn class_name(names: &[String], c: usize) -> String {
    names.get(c).cloned().unwrap_or_else(|| format!("class{c}"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("scope,average,f1\n");
    for (scope, s) in [("multiclass", &report.multiclass), ("binary", &report.binary)] {
        writeln!(out, "{scope},weighted,{}", s.weighted).unwrap();
        writeln!(out, "{scope},macro,{}", s.macro_avg).unwrap();
    }
    out
}

pub fn per_class_csv(report: &MetricsReport, names: &[String]) -> String {
    let mut out = String::from("scope,class,name,precision,recall,f1,support\n");
    let binary_names = ["benign".to_string(), "attack".to_string()];
    for (scope, s, names) in [
        ("multiclass", &report.multiclass, names),
        ("binary", &report.binary, &binary_names[..]),
    ] {
        for c in &s.per_class {
            writeln!(
                out,
                "{scope},{},{},{},{},{},{}",
                c.class,
                class_name(names, c.class),
                c.precision,
                c.recall,
                c.f1,
                c.support
            )
            .unwrap();
        }
    }
    out
}

/// Rows are true classes. With `normalized`, each column is divided by its
/// sum and never-predicted columns are left empty.
pub fn confusion_csv(matrix: &ConfusionMatrix, names: &[String], normalized: bool) -> String {
    let k = matrix.classes();
    let mut out = String::from("true\\pred");
    for c in 0..k {
        write!(out, ",{}", class_name(names, c)).unwrap();
    }
    out.push('\n');
    let norm = matrix.normalized_by_prediction();
    for (r, (counts, shares)) in matrix.counts.iter().zip(&norm).enumerate() {
        out.push_str(&class_name(names, r));
        for (count, share) in counts.iter().zip(shares) {
            if normalized {
                write!(out, ",{}", opt(*share)).unwrap();
            } else {
                write!(out, ",{count}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn epoch_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_macro_f1,selected\n");
    for e in log {
        writeln!(
            out,
            "{},{},{},{}",
            e.epoch,
            e.train_loss,
            opt(e.val_macro_f1),
            u8::from(e.selected)
        )
        .unwrap();
    }
    out
}

pub fn pretrain_log_csv(log: &[PretrainEpoch]) -> String {
    let mut out = String::from("epoch,loss,accuracy,negative_shortfall\n");
    for e in log {
        writeln!(out, "{},{},{},{}", e.epoch, e.loss, e.accuracy, e.negative_shortfall).unwrap();
    }
    out
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out =
        String::from("variant,weighted_f1,macro_f1,binary_weighted_f1,binary_macro_f1,test_flows,best_epoch\n");
    for r in rows {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.variant,
            m.multiclass.weighted,
            m.multiclass.macro_avg,
            m.binary.weighted,
            m.binary.macro_avg,
            m.samples,
            r.best_epoch
        )
        .unwrap();
    }
    out
}

pub fn fewshot_csv(reference: &FewShotRow, rows: &[FewShotRow]) -> String {
    let mut out = String::from(
        "mode,fraction,windows,labelled_flows,macro_f1,weighted_f1,binary_f1,loss_pct,violation,best_epoch\n",
    );
    for r in std::iter::once(reference).chain(rows) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.mode,
            r.fraction,
            r.windows,
            r.labelled_flows,
            r.macro_f1,
            r.weighted_f1,
            r.binary_f1,
            opt(r.loss_pct),
            u8::from(r.violation),
            r.best_epoch
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingEntry {
    pub stage: String,
    pub seconds: f64,
}

impl TimingEntry {
    pub fn new(stage: impl Into<String>, seconds: f64) -> Self {
        TimingEntry {
            stage: stage.into(),
            seconds,
        }
    }
}

pub fn timing_csv(entries: &[TimingEntry]) -> String {
    let mut out = String::from("stage,seconds\n");
    for e in entries {
        writeln!(out, "{},{:.6}", e.stage, e.seconds).unwrap();
    }
    out
}

fn summary_block(out: &mut String, title: &str, s: &F1Summary, names: &[String]) {
    writeln!(
        out,
        "{title}: weighted F1 {:.4}, macro F1 {:.4}",
        s.weighted, s.macro_avg
    )
    .unwrap();
    for c in &s.per_class {
        writeln!(
            out,
            "  {:<24} P {:.4}  R {:.4}  F1 {:.4}  n {}",
            class_name(names, c.class),
            c.precision,
            c.recall,
            c.f1,
            c.support
        )
        .unwrap();
    }
}

/// Human-readable summary for the terminal.
pub fn metrics_summary(report: &MetricsReport, names: &[String]) -> String {
    let mut out = format!("{} labelled flows\n", report.samples);
    summary_block(&mut out, "multiclass", &report.multiclass, names);
    summary_block(&mut out, "binary", &report.binary, &["benign".into(), "attack".into()]);
    out
}
