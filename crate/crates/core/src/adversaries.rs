//! Hard-instance generators.
//!
//! Every generator is a pure function of its parameters and seed. Binary
//! constructions are built as bit strings and lifted to a loss matrix whose
//! row `i` is string `i`.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::algorithms::WindowLaw;
use crate::error::{arg, Result};
use crate::instance::{floor_log2, Instance, Origin};
use crate::rng::{derive_seed, keyed, lane};
use crate::scalar::Scalar;

/// Serializable description of a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Bitstrings { strings: Vec<String> },
    Block { n: usize, m: usize, l: usize, seed: u64 },
    Tree { k: u32, m: usize, seed: u64 },
    BoundedRecallMix { k: u32, m: usize, indices: Vec<u32>, seed: u64 },
    Threshold { n: usize, seed: u64 },
    RealizableRandom { n: usize, m: usize, density: f64, seed: u64 },
    Zeros { n: usize, m: usize },
    Bernoulli { n: usize, m: usize, p: f64, seed: u64 },
    Uniform { n: usize, m: usize, seed: u64 },
}

impl GeneratorSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            GeneratorSpec::Bitstrings { .. } => "bitstrings",
            GeneratorSpec::Block { .. } => "block",
            GeneratorSpec::Tree { .. } => "tree",
            GeneratorSpec::BoundedRecallMix { .. } => "bounded_recall_mix",
            GeneratorSpec::Threshold { .. } => "threshold",
            GeneratorSpec::RealizableRandom { .. } => "realizable_random",
            GeneratorSpec::Zeros { .. } => "zeros",
            GeneratorSpec::Bernoulli { .. } => "bernoulli",
            GeneratorSpec::Uniform { .. } => "uniform",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            GeneratorSpec::Bitstrings { .. } | GeneratorSpec::Zeros { .. } => None,
            GeneratorSpec::Block { seed, .. }
            | GeneratorSpec::Tree { seed, .. }
            | GeneratorSpec::BoundedRecallMix { seed, .. }
            | GeneratorSpec::Threshold { seed, .. }
            | GeneratorSpec::RealizableRandom { seed, .. }
            | GeneratorSpec::Bernoulli { seed, .. }
            | GeneratorSpec::Uniform { seed, .. } => Some(seed),
        }
    }

    /// The same spec with its seed replaced; seedless kinds are unchanged.
    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            GeneratorSpec::Bitstrings { .. } | GeneratorSpec::Zeros { .. } => {}
            GeneratorSpec::Block { seed, .. }
            | GeneratorSpec::Tree { seed, .. }
            | GeneratorSpec::BoundedRecallMix { seed, .. }
            | GeneratorSpec::Threshold { seed, .. }
            | GeneratorSpec::RealizableRandom { seed, .. }
            | GeneratorSpec::Bernoulli { seed, .. }
            | GeneratorSpec::Uniform { seed, .. } => *seed = new_seed,
        }
        out
    }

    /// Shape `(m, n)` of the generated instance.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            GeneratorSpec::Bitstrings { strings } => (strings.len(), strings.first().map_or(0, String::len)),
            GeneratorSpec::Block { n, m, .. }
            | GeneratorSpec::RealizableRandom { n, m, .. }
            | GeneratorSpec::Zeros { n, m }
            | GeneratorSpec::Bernoulli { n, m, .. }
            | GeneratorSpec::Uniform { n, m, .. } => (*m, *n),
            GeneratorSpec::Tree { k, m, .. } | GeneratorSpec::BoundedRecallMix { k, m, .. } => {
                (*m, 1usize.checked_shl(*k).unwrap_or(0))
            }
            GeneratorSpec::Threshold { n, .. } => (n + 1, *n),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("generator specs always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).or_else(|e| arg(format!("bad generator spec: {e}")))
    }

    pub fn generate<S: Scalar>(&self) -> Result<Instance<S>> {
        let inst = match self {
            GeneratorSpec::Bitstrings { strings } => {
                let refs: Vec<&str> = strings.iter().map(String::as_str).collect();
                from_bitstrings(&refs)?
            }
            GeneratorSpec::Block { n, m, l, seed } => block_adversary(*n, *m, *l, *seed)?,
            GeneratorSpec::Tree { k, m, seed } => tree_adversary(*k, *m, *seed)?,
            GeneratorSpec::BoundedRecallMix { k, m, indices, seed } => {
                bounded_recall_adversary(*k, *m, indices, *seed)?.instance
            }
            GeneratorSpec::Threshold { n, seed } => threshold_adversary(*n, *seed)?.instance,
            GeneratorSpec::RealizableRandom { n, m, density, seed } => {
                realizable_random(*n, *m, *density, *seed)?
            }
            GeneratorSpec::Zeros { n, m } => Instance::zeros(*m, *n)?,
            GeneratorSpec::Bernoulli { n, m, p, seed } => bernoulli(*n, *m, *p, *seed)?,
            GeneratorSpec::Uniform { n, m, seed } => uniform(*n, *m, *seed)?,
        };
        Ok(inst.with_origin(Origin { tag: self.tag().into(), seed: self.seed(), spec: Some(self.to_json()) }))
    }
}

fn bits_to_instance<S: Scalar>(m: usize, n: usize, bits: &[bool]) -> Result<Instance<S>> {
    Instance::from_flat(m, n, bits.iter().map(|&b| if b { S::one() } else { S::zero() }).collect())
}

/// Lifts `m` binary strings of equal length to the instance with
/// `losses[i][j] = a_i[j]`.
pub fn from_bitstrings<S: Scalar>(strings: &[&str]) -> Result<Instance<S>> {
    let n = strings.first().map_or(0, |s| s.len());
    let mut bits = Vec::with_capacity(strings.len() * n);
    for (i, s) in strings.iter().enumerate() {
        if s.len() != n {
            return arg(format!("string {i} has length {}, expected {n}", s.len()));
        }
        for (j, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return arg(format!("string {i} has non-binary character {c:?} at position {j}")),
            }
        }
    }
    bits_to_instance(strings.len(), n, &bits)
}

/// Each model's string is a sequence of independent fair bits, each repeated
/// over a block of `⌊l/4⌋` steps; the last block may be partial.
pub fn block_adversary<S: Scalar>(n: usize, m: usize, l: usize, seed: u64) -> Result<Instance<S>> {
    if l < 4 {
        return arg(format!("block adversary needs l ≥ 4 (got {l})"));
    }
    if m < 2 {
        return arg(format!("block adversary needs m ≥ 2 (got {m})"));
    }
    let len = l / 4;
    let mut rng = keyed(seed, lane::INSTANCE, 0);
    let mut bits = Vec::with_capacity(m * n);
    for _ in 0..m {
        for start in (0..n).step_by(len) {
            let b: bool = rng.gen();
            bits.extend(std::iter::repeat_n(b, len.min(n - start)));
        }
    }
    bits_to_instance(m, n, &bits)
}

/// A full binary tree of depth `k` whose level-`j` nodes carry values
/// `½ ± j/(4k)`. Nodes use heap numbering: the root is `1` and node `v` has
/// children `2v` and `2v + 1`; the leaves are `2^k .. 2^{k+1}` from left to
/// right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree {
    k: u32,
    /// `true` for the upper side `½ + j/(4k)`; indexed by node id.
    upper: Vec<bool>,
}

impl LabeledTree {
    /// Samples top-down. A child stays on its parent's side with probability
    /// `1 − 1/(2j)` and flips otherwise; the root counts as the upper side.
    /// Node `v` draws from its own keyed stream, so the tree does not depend on
    /// visit order.
    pub fn sample(k: u32, seed: u64) -> Result<Self> {
        if k < 1 {
            return arg("tree depth k must be at least 1");
        }
        if k >= usize::BITS - 2 {
            return arg(format!("tree depth k = {k} is too large"));
        }
        let size = 1usize << (k + 1);
        let mut upper = vec![true; size];
        for v in 2..size {
            let j = floor_log2(v);
            let flip = keyed(seed, lane::TREE, v as u64).gen_bool(1.0 / (2.0 * j as f64));
            upper[v] = upper[v / 2] ^ flip;
        }
        Ok(Self { k, upper })
    }

    pub fn depth(&self) -> u32 {
        self.k
    }

    pub fn level(node: usize) -> u32 {
        floor_log2(node)
    }

    pub fn value(&self, node: usize) -> f64 {
        let j = Self::level(node);
        if j == 0 {
            return 0.5;
        }
        let offset = j as f64 / (4.0 * self.k as f64);
        if self.upper[node] {
            0.5 + offset
        } else {
            0.5 - offset
        }
    }

    /// Whether the edge into `node` changes side; level-1 edges compare
    /// against the root's nominal upper side.
    pub fn is_flip(&self, node: usize) -> bool {
        self.upper[node] != self.upper[node / 2]
    }

    /// Leaf values from left to right.
    pub fn leaf_values(&self) -> Vec<f64> {
        let first = 1usize << self.k;
        (first..2 * first).map(|v| self.value(v)).collect()
    }
}

/// `m` independent labeled trees; step `j` of model `i` is a Bernoulli draw
/// with the value of leaf `j` of tree `i`.
pub fn tree_adversary<S: Scalar>(k: u32, m: usize, seed: u64) -> Result<Instance<S>> {
    if m < 1 {
        return arg("tree adversary needs m ≥ 1");
    }
    let n = 1usize << k.min(usize::BITS - 3);
    let mut bits = Vec::new();
    for i in 0..m {
        let tree_seed = derive_seed(seed, lane::TREE, i as u64);
        let tree = LabeledTree::sample(k, tree_seed)?;
        let leaf_seed = derive_seed(tree_seed, lane::INSTANCE, 0);
        for (j, p) in tree.leaf_values().into_iter().enumerate() {
            bits.push(keyed(leaf_seed, lane::INSTANCE, j as u64).gen_bool(p));
        }
    }
    bits_to_instance(m, n, &bits)
}

/// A generated mixture together with the block exponent each row was drawn
/// with (`None` for the all-zero row).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureInstance<S = f64> {
    pub instance: Instance<S>,
    pub sources: Vec<Option<u32>>,
}

/// Appends a string from `D_i`: `n / 2^i` fair bits, each repeated `2^i` times.
fn push_block_string(bits: &mut Vec<bool>, n: usize, i: u32, rng: &mut dyn RngCore) {
    let len = 1usize << i;
    for _ in 0..n / len {
        let b = rng.gen::<bool>();
        bits.extend(std::iter::repeat_n(b, len));
    }
}

/// `m/2` strings from `D_{k_1 − 1}`, `m/4` from `D_{k_2 − 1}`, …, one from
/// `D_{k_{log m} − 1}` and one all-zero string, randomly permuted.
pub fn bounded_recall_adversary<S: Scalar>(
    k: u32,
    m: usize,
    indices: &[u32],
    seed: u64,
) -> Result<MixtureInstance<S>> {
    if m < 2 || !m.is_power_of_two() {
        return arg(format!("mixture adversary needs m a power of two ≥ 2 (got {m})"));
    }
    if !(2..usize::BITS - 2).contains(&k) {
        return arg(format!("mixture adversary needs 2 ≤ k (got {k})"));
    }
    let groups = m.trailing_zeros() as usize;
    if indices.len() != groups {
        return arg(format!("expected log2 m = {groups} interval indices, got {}", indices.len()));
    }
    if indices.iter().any(|&i| i < 1 || i > k - 1) {
        return arg(format!("interval indices {indices:?} must lie in [1, {}]", k - 1));
    }
    if indices.windows(2).any(|p| p[0] >= p[1]) {
        return arg(format!("interval indices {indices:?} must be strictly increasing"));
    }
    let n = 1usize << k;
    let mut rng = keyed(seed, lane::INSTANCE, 0);
    let mut sources: Vec<Option<u32>> = Vec::with_capacity(m);
    for (g, &ki) in indices.iter().enumerate() {
        sources.extend(std::iter::repeat_n(Some(ki - 1), m >> (g + 1)));
    }
    sources.push(None);
    sources.shuffle(&mut rng);
    let mut bits = Vec::with_capacity(m * n);
    for src in &sources {
        match src {
            Some(i) => push_block_string(&mut bits, n, *i, &mut rng),
            None => bits.extend(std::iter::repeat_n(false, n)),
        }
    }
    Ok(MixtureInstance { instance: bits_to_instance(m, n, &bits)?, sources })
}

/// Estimated law of the window length over `{w = 1}`, the intervals
/// `I_i = [2^i, 2^{i+1})` for `i = 1 … k−1`, and `{w ≥ 2^k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLawEstimate {
    pub samples: usize,
    pub unit: f64,
    /// Entry `i − 1` is the mass of `I_i`.
    pub intervals: Vec<f64>,
    pub full: f64,
}

impl WindowLawEstimate {
    fn empty(k: u32, samples: usize) -> Self {
        Self { samples, unit: 0.0, intervals: vec![0.0; k.saturating_sub(1) as usize], full: 0.0 }
    }

    fn add(&mut self, w: usize, p: f64) {
        let j = floor_log2(w.max(1)) as usize;
        if w <= 1 {
            self.unit += p;
        } else if j <= self.intervals.len() {
            self.intervals[j - 1] += p;
        } else {
            self.full += p;
        }
    }

    pub fn interval(&self, i: u32) -> f64 {
        self.intervals[i as usize - 1]
    }

    /// Binomial standard error of an estimated mass `p`.
    pub fn stderr(&self, p: f64) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            (p * (1.0 - p) / self.samples as f64).sqrt()
        }
    }

    /// The `count` heaviest interval indices in increasing order; ties go to
    /// the lower index.
    pub fn heaviest_intervals(&self, count: usize) -> Vec<u32> {
        let mut idx: Vec<u32> = (1..=self.intervals.len() as u32).collect();
        idx.sort_by(|&a, &b| self.interval(b).total_cmp(&self.interval(a)).then(a.cmp(&b)));
        idx.truncate(count);
        idx.sort_unstable();
        idx
    }
}

/// Monte Carlo estimate of a non-adaptive learner's window-length law.
pub fn estimate_window_law<L: WindowLaw + ?Sized>(
    law: &L,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<WindowLawEstimate> {
    let k = floor_log2(n.max(1));
    let mut est = WindowLawEstimate::empty(k, samples);
    let mut rng = keyed(seed, lane::ALGORITHM, 0);
    let p = if samples == 0 { 0.0 } else { 1.0 / samples as f64 };
    for _ in 0..samples {
        est.add(law.sample_window(n, &mut rng)?.w, p);
    }
    Ok(est)
}

/// The same law computed from the learner's atoms.
pub fn exact_window_law<L: WindowLaw + ?Sized>(law: &L, n: usize) -> Result<WindowLawEstimate> {
    let k = floor_log2(n.max(1));
    let mut est = WindowLawEstimate::empty(k, 0);
    law.for_each_atom(n, &mut |p, draw| est.add(law.window(&draw).w, p))?;
    Ok(est)
}

/// An instance over the threshold class, with the bisection data behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdInstance<S = f64> {
    /// Row `b` is the behavior `x ↦ 1{rank(x) ≥ b}` for `b = 0 … n`.
    pub instance: Instance<S>,
    pub labels: Vec<bool>,
    /// Position of each point among all `n` points in increasing order.
    pub ranks: Vec<usize>,
    /// Midpoints of the bisection; exact only while `n` stays within float precision.
    pub points: Vec<f64>,
    /// Row index of the threshold consistent with every label.
    pub consistent: usize,
}

/// Bisection data for the threshold class `f_θ(x) = 1{x ≥ θ}`: `x_i` is the
/// midpoint of the current interval, `y_i` a fair bit, and the interval
/// shrinks to the half that keeps `y_i` consistent (the upper half after a
/// `0`, the lower half after a `1`). The class is discretized to the `n + 1`
/// behaviors it realizes on the points.
pub fn threshold_adversary<S: Scalar>(n: usize, seed: u64) -> Result<ThresholdInstance<S>> {
    if n < 1 {
        return arg("threshold adversary needs n ≥ 1");
    }
    let mut rng = keyed(seed, lane::INSTANCE, 0);
    let labels: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut points = Vec::with_capacity(n);
    for &y in &labels {
        let mid = 0.5 * (lo + hi);
        points.push(mid);
        if y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Later points sit above x_i after a 0 label and below it after a 1.
    let mut zeros_before = 0;
    let ranks: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = zeros_before + if y { n - 1 - i } else { 0 };
            if !y {
                zeros_before += 1;
            }
            r
        })
        .collect();
    let mut bits = Vec::with_capacity((n + 1) * n);
    for b in 0..=n {
        bits.extend(ranks.iter().zip(&labels).map(|(&r, &y)| (r >= b) != y));
    }
    Ok(ThresholdInstance {
        instance: bits_to_instance(n + 1, n, &bits)?,
        labels,
        ranks,
        points,
        consistent: zeros_before,
    })
}

/// One all-zero row and `m − 1` rows of i.i.d. Bernoulli(`density`) losses,
/// in random row order.
pub fn realizable_random<S: Scalar>(n: usize, m: usize, density: f64, seed: u64) -> Result<Instance<S>> {
    if m < 1 || n < 1 {
        return arg(format!("realizable instance needs m, n ≥ 1 (got m={m}, n={n})"));
    }
    if !(0.0..=1.0).contains(&density) {
        return arg(format!("density {density} outside [0, 1]"));
    }
    let mut rng = keyed(seed, lane::INSTANCE, 0);
    let mut rows: Vec<Vec<bool>> = vec![vec![false; n]];
    for _ in 1..m {
        rows.push((0..n).map(|_| rng.gen_bool(density)).collect());
    }
    rows.shuffle(&mut rng);
    bits_to_instance(m, n, &rows.concat())
}

/// i.i.d. Bernoulli(`p`) losses.
pub fn bernoulli<S: Scalar>(n: usize, m: usize, p: f64, seed: u64) -> Result<Instance<S>> {
    if !(0.0..=1.0).contains(&p) {
        return arg(format!("probability {p} outside [0, 1]"));
    }
    let mut rng = keyed(seed, lane::INSTANCE, 0);
    let bits: Vec<bool> = (0..m * n).map(|_| rng.gen_bool(p)).collect();
    bits_to_instance(m, n, &bits)
}

/// i.i.d. uniform losses on `[0, 1)`.
pub fn uniform<S: Scalar>(n: usize, m: usize, seed: u64) -> Result<Instance<S>> {
    let mut rng = keyed(seed, lane::INSTANCE, 0);
    Instance::from_flat(m, n, (0..m * n).map(|_| S::lit(rng.gen::<f64>())).collect())
}
