mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{flow, naive_f1, random_flows};
use pptgnn::flow::FlowRecord;
use pptgnn::tensor::Rng;
use pptgnn::train::{chronological_split, f1_scores, to_binary, undersample, ConfusionMatrix, MetricsReport};
use pptgnn::window::WindowGrid;
use proptest::prelude::*;

fn labels(classes: usize, max_len: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1..=max_len).prop_flat_map(move |n| {
        (
            prop::collection::vec(0..classes, n),
            prop::collection::vec(0..classes, n),
        )
    })
}

proptest! {
    #[test]
    fn f1_matches_precision_recall_route((truth, pred) in labels(5, 60)) {
        let s = f1_scores(&truth, &pred);
        let (weighted, macro_avg) = naive_f1(&truth, &pred);
        prop_assert!((s.weighted - weighted).abs() < 1e-12);
        prop_assert!((s.macro_avg - macro_avg).abs() < 1e-12);
        prop_assert_eq!(s.per_class.iter().map(|c| c.support).sum::<usize>(), truth.len());
        for c in &s.per_class {
            prop_assert!((0.0..=1.0).contains(&c.f1));
        }
    }

    #[test]
    fn confusion_sums_match_histograms((truth, pred) in labels(4, 80)) {
        let m = ConfusionMatrix::new(4, &truth, &pred);
        let hist = |v: &[usize]| (0..4).map(|c| v.iter().filter(|&&x| x == c).count() as u64).collect::<Vec<_>>();
        prop_assert_eq!(m.row_sums(), hist(&truth));
        prop_assert_eq!(m.col_sums(), hist(&pred));
        let diag: u64 = (0..4).map(|c| m.counts[c][c]).sum();
        prop_assert_eq!(diag as usize, truth.iter().zip(&pred).filter(|(a, b)| a == b).count());
        let norm = m.normalized_by_prediction();
        for c in 0..4 {
            let col: Vec<Option<f64>> = norm.iter().map(|r| r[c]).collect();
            if m.col_sums()[c] == 0 {
                prop_assert!(col.iter().all(Option::is_none));
            } else {
                prop_assert!((col.iter().map(|v| v.unwrap()).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_view_collapses_attacks((truth, pred) in labels(4, 50)) {
        let r = MetricsReport::new(4, &truth, &pred);
        let (bw, bm) = naive_f1(&to_binary(&truth), &to_binary(&pred));
        prop_assert!((r.binary.weighted - bw).abs() < 1e-12 && (r.binary.macro_avg - bm).abs() < 1e-12);
        let b = &r.binary_confusion;
        prop_assert_eq!(b.counts[0][0] as usize, truth.iter().zip(&pred).filter(|(&t, &p)| t == 0 && p == 0).count());
        prop_assert_eq!(b.row_sums().iter().sum::<u64>() as usize, truth.len());
    }

    #[test]
    fn split_is_a_clean_partition(
        seed in any::<u64>(),
        train in 0.1f64..0.9,
        val_share in 0.0f64..1.0,
        ws in prop::sample::select(vec![0.25, 1.0, 3.0]),
    ) {
        let flows = random_flows(&mut Rng::new(seed), 80, 30.0);
        let val = (1.0 - train) * val_share;
        let ratios = [train, val, 1.0 - train - val];
        let s = chronological_split(&flows, ratios, ws).unwrap();
        let ids = |v: &[FlowRecord]| v.iter().map(|f| f.flow_id).collect::<Vec<_>>();
        let mut all = ids(&s.train);
        all.extend(ids(&s.val));
        all.extend(ids(&s.test));
        // complete, disjoint and order preserving
        prop_assert_eq!(all, ids(&flows));
        let grid = WindowGrid { origin: s.origin, size: ws };
        let windows = |v: &[FlowRecord]| v.iter().map(|f| grid.index_of(f.start_time)).collect::<BTreeSet<_>>();
        let (a, b, c) = (windows(&s.train), windows(&s.val), windows(&s.test));
        prop_assert!(a.is_disjoint(&b) && b.is_disjoint(&c) && a.is_disjoint(&c));
        for bound in s.boundaries.iter().filter(|b| b.is_finite()) {
            let k = (bound - s.origin) / ws;
            prop_assert!((k - k.round()).abs() < 1e-9, "boundary {} off the grid", bound);
        }
        prop_assert!(s.boundaries[0] <= s.boundaries[1]);
    }
}

#[test]
fn thousand_random_label_sets_match_naive_f1() {
    let mut rng = Rng::new(2024);
    for case in 0..1000 {
        let n = 1 + rng.below(200);
        let k = 2 + rng.below(8);
        let truth: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if rng.unit() < 0.6 { t } else { rng.below(k) })
            .collect();
        let s = f1_scores(&truth, &pred);
        let (w, m) = naive_f1(&truth, &pred);
        assert!(
            (s.weighted - w).abs() < 1e-12 && (s.macro_avg - m).abs() < 1e-12,
            "case {case}"
        );
    }
}

#[test]
fn class_absent_from_both_sides_is_not_averaged() {
    let s = f1_scores(&[0, 0, 2], &[0, 2, 2]);
    assert_eq!(s.per_class.iter().map(|c| c.class).collect::<Vec<_>>(), vec![0, 2]);
    // class 0: p = 1, r = 0.5; class 2: p = 0.5, r = 1
    assert!((s.macro_avg - 2.0 / 3.0).abs() < 1e-12);
}

/// 300 one-second windows, each dominated by a random class.
fn mixed_capture(seed: u64) -> Vec<FlowRecord> {
    let mut rng = Rng::new(seed);
    let mut flows = Vec::new();
    let mut id = 0;
    for w in 0..300 {
        let main = rng.below(4);
        for _ in 0..1 + rng.below(12) {
            let t = w as f64 + rng.unit() * 0.99;
            let mut f = flow(id, t, t, "a", "b");
            f.label = Some(if rng.unit() < 0.7 { main } else { rng.below(4) });
            flows.push(f);
            id += 1;
        }
    }
    flows
}

fn class_mix(flows: &[FlowRecord], grid: &WindowGrid, windows: Option<&BTreeSet<usize>>) -> Vec<f64> {
    let mut c = [0usize; 4];
    for f in flows {
        if windows.is_none_or(|w| w.contains(&grid.index_of(f.start_time))) {
            c[f.label.unwrap()] += 1;
        }
    }
    let n: usize = c.iter().sum();
    c.iter().map(|&x| x as f64 / n as f64).collect()
}

#[test]
fn undersampled_selections_are_nested_and_keep_every_class() {
    for seed in 0..5 {
        let flows = mixed_capture(seed);
        let grid = WindowGrid { origin: 0.0, size: 1.0 };
        let u = undersample(&flows, grid, 4, seed);
        assert_eq!(u.order.iter().copied().collect::<BTreeSet<_>>().len(), 300);
        assert_eq!(u.total, flows.len());
        let mut previous = BTreeSet::new();
        for f in [0.01, 0.05, 0.1, 0.2, 0.5, 1.0] {
            let (sel, _) = u.select(f);
            assert!(previous.is_subset(&sel), "fraction {f} dropped windows");
            assert!(u.labelled_flows(&sel) as f64 >= f * u.total as f64);
            let mix = class_mix(&flows, &grid, Some(&sel));
            assert!(mix.iter().all(|&p| p > 0.0), "fraction {f} lost a class");
            previous = sel;
        }
        assert_eq!(previous.len(), 300);
        assert_eq!(undersample(&flows, grid, 4, seed), u);
    }
}

#[test]
fn fifth_of_the_data_keeps_the_class_mix() {
    let flows = mixed_capture(9);
    let grid = WindowGrid { origin: 0.0, size: 1.0 };
    let global = class_mix(&flows, &grid, None);
    let (sel, violation) = undersample(&flows, grid, 4, 9).select(0.2);
    let mix = class_mix(&flows, &grid, Some(&sel));
    let worst = global.iter().zip(&mix).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02, "mix {mix:?} vs {global:?}");
    assert!(!violation);
}

#[test]
fn unlabelled_flows_do_not_count() {
    let mut flows = vec![flow(1, 0.5, 0.5, "a", "b"), flow(2, 1.5, 1.5, "a", "b")];
    flows[0].label = Some(1);
    let u = undersample(&flows, WindowGrid { origin: 0.0, size: 1.0 }, 2, 0);
    assert_eq!(u.total, 1);
    assert_eq!(u.order, vec![0]);
    let counts: BTreeMap<usize, Vec<usize>> = BTreeMap::from([(0, vec![0, 1])]);
    assert_eq!(u.counts, counts);
}
