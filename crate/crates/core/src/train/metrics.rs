use std::collections::BTreeSet;

/// Precision, recall and F1 of one class (zero when undefined).
#[derive(Clone, Debug, PartialEq)]
pub struct ClassScore {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct F1Summary {
    /// Mean of per-class F1 weighted by true support.
    pub weighted: f64,
    /// Unweighted mean of per-class F1.
    pub macro_avg: f64,
    pub per_class: Vec<ClassScore>,
}

/// F1 over the union of classes present in `truth` or `pred`; a class with
/// no predictions (or no support) scores 0 for the undefined quantity.
pub fn f1_scores(truth: &[usize], pred: &[usize]) -> F1Summary {
    assert_eq!(truth.len(), pred.len());
    let classes: BTreeSet<usize> = truth.iter().chain(pred).copied().collect();
    let mut per_class = Vec::with_capacity(classes.len());
    for &c in &classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fneg = 0usize;
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fneg += 1,
                _ => {}
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f1 = ratio(2 * tp, 2 * tp + fp + fneg);
        per_class.push(ClassScore {
            class: c,
            precision,
            recall,
            f1,
            support: tp + fneg,
        });
    }
    let n = truth.len();
    let macro_avg = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|s| s.f1).sum::<f64>() / per_class.len() as f64
    };
    let weighted = if n == 0 {
        0.0
    } else {
        per_class.iter().map(|s| s.f1 * s.support as f64).sum::<f64>() / n as f64
    };
    F1Summary {
        weighted,
        macro_avg,
        per_class,
    }
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize, truth: &[usize], pred: &[usize]) -> Self {
        let mut counts = vec![vec![0u64; classes]; classes];
        for (&t, &p) in truth.iter().zip(pred) {
            counts[t][p] += 1;
        }
        ConfusionMatrix { counts }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.classes())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }

    /// Each column divided by its sum (how often a prediction of that class
    /// was each true class); `None` for never-predicted columns.
    pub fn normalized_by_prediction(&self) -> Vec<Vec<Option<f64>>> {
        let cols = self.col_sums();
        self.counts
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&cols)
                    .map(|(&v, &s)| (s > 0).then(|| v as f64 / s as f64))
                    .collect()
            })
            .collect()
    }
}

/// Class 0 is benign; everything else collapses to 1.
pub fn to_binary(labels: &[usize]) -> Vec<usize> {
    labels.iter().map(|&l| usize::from(l != 0)).collect()
}

/// Everything reported for one evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub multiclass: F1Summary,
    pub binary: F1Summary,
    pub confusion: ConfusionMatrix,
    pub binary_confusion: ConfusionMatrix,
    pub samples: usize,
}

impl MetricsReport {
    pub fn new(num_classes: usize, truth: &[usize], pred: &[usize]) -> Self {
        let (bt, bp) = (to_binary(truth), to_binary(pred));
        MetricsReport {
            multiclass: f1_scores(truth, pred),
            binary: f1_scores(&bt, &bp),
            confusion: ConfusionMatrix::new(num_classes, truth, pred),
            binary_confusion: ConfusionMatrix::new(2, &bt, &bp),
            samples: truth.len(),
        }
    }

    pub fn multiclass_macro_f1(&self) -> f64 {
        self.multiclass.macro_avg
    }
}
