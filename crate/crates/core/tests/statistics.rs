//! Monte Carlo checks of the samplers against their known laws. Seeds are
//! fixed, so each test is deterministic.

use std::collections::BTreeMap;

use selective_core::adversaries::{
    block_adversary, estimate_window_law, exact_window_law, threshold_adversary, GeneratorSpec, LabeledTree,
};
use selective_core::algorithms::{BoundedRecallEw, BoundedRecallParams, Erm, HybridEw, HybridParams, Learner, Rate, WindowLaw};
use selective_core::oracle::{exact_risk, monte_carlo_risk, Source};
use selective_core::rng::{derive_seed, keyed, lane};
use selective_core::{Instance, WindowChoice};

/// Upper 0.1% points of the chi-square distribution, by degrees of freedom.
fn chi2_critical(df: usize) -> f64 {
    [f64::NAN, 10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124][df]
}

fn chi2_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

#[test]
fn hybrid_window_law_matches_uniform_scales_and_starts() {
    let law = HybridEw::<f64>::new(HybridParams::new(1, Rate::Auto).unwrap());
    let mut by_w: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    let trials = 100_000;
    for s in 0..trials {
        let win = law.sample_window(8, &mut keyed(7, lane::ALGORITHM, s)).unwrap();
        *by_w.entry(win.w).or_default().entry(win.t).or_default() += 1;
    }
    assert_eq!(by_w.keys().copied().collect::<Vec<_>>(), vec![1, 2, 4]);
    let scale_counts: Vec<usize> = by_w.values().map(|m| m.values().sum()).collect();
    let sigma = (trials as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for &c in &scale_counts {
        assert!((c as f64 - trials as f64 / 3.0).abs() <= 3.0 * sigma, "{scale_counts:?}");
    }
    assert!(chi2_uniform(&scale_counts) < chi2_critical(2));
    for (w, starts) in &by_w {
        assert_eq!(starts.keys().copied().collect::<Vec<_>>(), (0..8).step_by(*w).collect::<Vec<_>>());
        let counts: Vec<usize> = starts.values().copied().collect();
        assert!(chi2_uniform(&counts) < chi2_critical(counts.len() - 1), "w={w}: {counts:?}");
    }
}

#[test]
fn bounded_recall_window_law_estimate() {
    let k = 8;
    let n = 1 << k;
    let law = BoundedRecallEw::<f64>::new(BoundedRecallParams::default());
    let est = estimate_window_law(&law, n, 100_000, 3).unwrap();
    let exact = exact_window_law(&law, n).unwrap();
    let p = 1.0 / k as f64;
    assert!((exact.unit - p).abs() < 1e-12);
    assert!((est.unit - p).abs() <= 3.0 * est.stderr(p));
    for i in 1..k {
        assert!((exact.interval(i) - p).abs() < 1e-12);
        assert!((est.interval(i) - p).abs() <= 3.0 * est.stderr(p), "I_{i}: {}", est.interval(i));
    }
    assert_eq!(est.full, 0.0);
}

#[test]
fn hybrid_never_uses_windows_beyond_its_support() {
    for delta in 1..=4 {
        let law = HybridEw::<f64>::new(HybridParams::new(delta, Rate::Auto).unwrap());
        let est = estimate_window_law(&law, 256, 20_000, delta as u64).unwrap();
        for i in (8 - delta + 1)..8 {
            assert_eq!(est.interval(i), 0.0, "Δ={delta} I_{i}");
        }
        assert_eq!(est.full, 0.0);
    }
}

#[test]
fn block_entries_are_fair() {
    let (n, m, seeds) = (8, 2, 10_000u64);
    let mut sums = vec![0.0; m * n];
    for s in 0..seeds {
        let inst: Instance = block_adversary(n, m, 8, s).unwrap();
        for i in 0..m {
            for j in 0..n {
                sums[i * n + j] += inst.loss(i, j);
            }
        }
    }
    for s in sums {
        assert!((s / seeds as f64 - 0.5).abs() <= 0.02);
    }
}

#[test]
fn tree_flip_frequency_follows_inverse_level() {
    let trees = 100_000u64;
    let mut flips = [0usize; 4];
    for s in 0..trees {
        let t = LabeledTree::sample(3, derive_seed(11, lane::TREE, s)).unwrap();
        for v in 2..16 {
            if t.is_flip(v) {
                flips[LabeledTree::level(v) as usize] += 1;
            }
        }
    }
    for j in 1..=3usize {
        let freq = flips[j] as f64 / (trees as f64 * (1 << j) as f64);
        let expected = 1.0 / (2.0 * j as f64);
        assert!((freq - expected).abs() <= 0.005, "level {j}: {freq}");
    }
}

#[test]
fn tree_values_form_a_martingale() {
    let (k, trees) = (4u32, 100_000u64);
    // (parent node, parent value) → (sum, sum of squares, count) of child values.
    let mut acc: BTreeMap<(usize, bool), (f64, f64, f64)> = BTreeMap::new();
    for s in 0..trees {
        let t = LabeledTree::sample(k, derive_seed(5, lane::TREE, s)).unwrap();
        assert_eq!(t.value(1), 0.5);
        for v in 2..(1usize << (k + 1)) {
            let j = LabeledTree::level(v) as f64;
            assert!((t.value(v) - 0.5).abs() == j / (4.0 * k as f64));
            let parent = v / 2;
            let e = acc.entry((parent, t.value(parent) > 0.5)).or_default();
            e.0 += t.value(v);
            e.1 += t.value(v).powi(2);
            e.2 += 1.0;
        }
    }
    for ((parent, upper), (sum, sq, count)) in acc {
        let pv = if parent == 1 {
            0.5
        } else {
            let off = LabeledTree::level(parent) as f64 / (4.0 * k as f64);
            if upper {
                0.5 + off
            } else {
                0.5 - off
            }
        };
        let mean = sum / count;
        let sd = ((sq / count - mean * mean).max(0.0) / count).sqrt();
        assert!((mean - pv).abs() <= 3.0 * sd.max(1e-12), "node {parent} upper={upper}: {mean} vs {pv} (sd {sd})");
    }
}

#[test]
fn threshold_labels_are_fair() {
    let (n, seeds) = (16, 5_000u64);
    let mut ones = 0usize;
    for s in 0..seeds {
        ones += threshold_adversary::<f64>(n, s).unwrap().labels.iter().filter(|&&y| y).count();
    }
    assert!((ones as f64 / (n as f64 * seeds as f64) - 0.5).abs() <= 0.02);
}

#[test]
fn monte_carlo_agrees_with_exact_enumeration() {
    let insts: Vec<Instance> = vec![
        GeneratorSpec::Uniform { n: 64, m: 4, seed: 1 }.generate().unwrap(),
        GeneratorSpec::Block { n: 128, m: 8, l: 16, seed: 2 }.generate().unwrap(),
        GeneratorSpec::Tree { k: 6, m: 3, seed: 3 }.generate().unwrap(),
    ];
    let learners: Vec<Box<dyn Fn(&Instance, u64) -> (f64, f64, f64)>> = vec![
        Box::new(|inst, seed| {
            let l = HybridEw::<f64>::new(HybridParams::new(2, Rate::Auto).unwrap());
            let mc = monte_carlo_risk(&l, Source::Fixed(inst), 10_000, seed).unwrap();
            (mc.mean, mc.stderr.unwrap(), exact_risk(&l, inst).unwrap().total)
        }),
        Box::new(|inst, seed| {
            let l = BoundedRecallEw::<f64>::new(BoundedRecallParams::default());
            let mc = monte_carlo_risk(&l, Source::Fixed(inst), 10_000, seed).unwrap();
            (mc.mean, mc.stderr.unwrap(), exact_risk(&l, inst).unwrap().total)
        }),
        Box::new(|inst, seed| {
            let mc = monte_carlo_risk(&Erm, Source::Fixed(inst), 10_000, seed).unwrap();
            (mc.mean, mc.stderr.unwrap(), exact_risk::<f64, _>(&Erm, inst).unwrap().total)
        }),
    ];
    for (i, inst) in insts.iter().enumerate() {
        for (j, run) in learners.iter().enumerate() {
            let (mean, se, exact) = run(inst, (10 * i + j) as u64);
            assert!((mean - exact).abs() <= 4.0 * se, "instance {i} learner {j}: {mean} ± {se} vs {exact}");
        }
    }
}

#[test]
fn erm_is_the_sharp_limit_of_bounded_recall() {
    let inst: Instance = GeneratorSpec::Uniform { n: 64, m: 5, seed: 9 }.generate().unwrap();
    let sharp = BoundedRecallEw::<f64>::new(BoundedRecallParams::new(Rate::Fixed(1e6)).unwrap());
    let mut compared = 0;
    for s in 0..500 {
        let a = Learner::<f64>::run(&Erm, &inst, &mut keyed(s, lane::ALGORITHM, 0)).unwrap();
        let b = sharp.run(&inst, &mut keyed(s, lane::ALGORITHM, 0)).unwrap();
        assert_eq!(a.window, b.window);
        let mut u = inst.window_avgs(observed_of(&a.window)).unwrap();
        u.sort_by(f64::total_cmp);
        if u.len() > 1 && u[1] - u[0] > 1e-4 {
            let tv: f64 = a.model_dist.iter().zip(&b.model_dist).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
            assert!(tv < 1e-6, "seed {s}: {tv}");
            compared += 1;
        }
    }
    assert!(compared > 100);
}

/// The observed window is the block right before the prediction window.
fn observed_of(w: &WindowChoice) -> WindowChoice {
    WindowChoice::new(w.t - w.w, w.w)
}
