//! Instances, windows, decisions and the per-timescale learnability profile.
//!
//! An [`Instance`] is the `m × n` loss matrix of a selective-learning problem:
//! entry `(i, j)` is the loss of model `i` on data point `j + 1`. A window
//! `(t, w)` covers data points `t + 1 ..= t + w`, i.e. zero-based columns
//! `t .. t + w`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::scalar::{simplex_tolerance, Scalar};

/// `⌊log2 n⌋` for `n ≥ 1`.
pub fn floor_log2(n: usize) -> u32 {
    assert!(n >= 1, "floor_log2 of zero");
    usize::BITS - 1 - n.leading_zeros()
}

/// A stop time `t` and window length `w` with `t + w ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowChoice {
    pub t: usize,
    pub w: usize,
}

impl WindowChoice {
    pub fn new(t: usize, w: usize) -> Self {
        Self { t, w }
    }

    /// One past the last zero-based column covered by the window.
    pub fn end(&self) -> usize {
        self.t + self.w
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.w == 0 {
            return arg(format!("window length must be positive (t={}, w=0)", self.t));
        }
        if self.t >= n || self.end() > n {
            return arg(format!(
                "window (t={}, w={}) does not fit in n={n} steps",
                self.t, self.w
            ));
        }
        Ok(())
    }
}

/// Where an instance came from, so that it can be regenerated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub tag: String,
    pub seed: Option<u64>,
    /// Serialized generator parameters (JSON), when known.
    pub spec: Option<String>,
}

/// Dense loss matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S = f64> {
    m: usize,
    n: usize,
    losses: Vec<S>,
    origin: Option<Origin>,
}

impl<S: Scalar> Instance<S> {
    /// Builds an instance from row-major data (`m` rows of length `n`).
    pub fn from_flat(m: usize, n: usize, losses: Vec<S>) -> Result<Self> {
        if m == 0 || n == 0 {
            return arg(format!("instance needs m ≥ 1 and n ≥ 1 (got m={m}, n={n})"));
        }
        if losses.len() != m * n {
            return arg(format!(
                "expected {} entries for a {m}×{n} instance, got {}",
                m * n,
                losses.len()
            ));
        }
        for (idx, &x) in losses.iter().enumerate() {
            if !(x >= S::zero() && x <= S::one()) {
                return arg(format!(
                    "loss of model {} at step {} is {x}, outside [0, 1]",
                    idx / n,
                    idx % n
                ));
            }
        }
        Ok(Self { m, n, losses, origin: None })
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return arg(format!("ragged rows: row {i} has length {}, expected {n}", r.len()));
        }
        Self::from_flat(m, n, rows.into_iter().flatten().collect())
    }

    pub fn zeros(m: usize, n: usize) -> Result<Self> {
        Self::from_flat(m, n, vec![S::zero(); m * n])
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn origin(&self) -> Option<&Origin> {
        self.origin.as_ref()
    }

    /// Number of models.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of data points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `k = ⌊log2 n⌋`.
    pub fn k(&self) -> u32 {
        floor_log2(self.n)
    }

    /// `2^k`, the prefix every algorithm operates on.
    pub fn horizon(&self) -> usize {
        1 << self.k()
    }

    pub fn loss(&self, model: usize, step: usize) -> S {
        self.losses[model * self.n + step]
    }

    pub fn row(&self, model: usize) -> &[S] {
        &self.losses[model * self.n..(model + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.losses.chunks(self.n)
    }

    pub fn is_zero_row(&self, model: usize) -> bool {
        self.row(model).iter().all(|x| x.is_zero())
    }

    /// Sum of losses of `model` over zero-based columns `start .. end`.
    pub(crate) fn range_sum(&self, model: usize, start: usize, end: usize) -> S {
        self.row(model)[start..end].iter().copied().sum()
    }

    pub fn window_avg(&self, model: usize, win: WindowChoice) -> Result<S> {
        if model >= self.m {
            return arg(format!("model index {model} out of range (m={})", self.m));
        }
        win.validate(self.n)?;
        Ok(self.range_sum(model, win.t, win.end()) / S::from_count(win.w))
    }

    /// Average loss of every model over `win`.
    pub fn window_avgs(&self, win: WindowChoice) -> Result<Vec<S>> {
        win.validate(self.n)?;
        let w = S::from_count(win.w);
        Ok((0..self.m).map(|i| self.range_sum(i, win.t, win.end()) / w).collect())
    }

    /// Writes the self-describing text format.
    ///
    /// Header lines are `key value`; the body holds one line per data point
    /// with the `m` model losses in 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (tag, seed, spec) = match &self.origin {
            Some(o) => (
                o.tag.clone(),
                o.seed.map_or_else(|| "none".to_string(), |x| x.to_string()),
                o.spec.clone().unwrap_or_else(|| "none".to_string()),
            ),
            None => ("none".to_string(), "none".to_string(), "none".to_string()),
        };
        let _ = writeln!(s, "{FORMAT_MAGIC}");
        let _ = writeln!(s, "m {}", self.m);
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "generator {tag}");
        let _ = writeln!(s, "seed {seed}");
        let _ = writeln!(s, "spec {spec}");
        let _ = writeln!(s, "data");
        for j in 0..self.n {
            for i in 0..self.m {
                if i > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{:.16e}", self.loss(i, j).as_f64());
            }
            s.push('\n');
        }
        s
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::Parse { line: 0, message: format!("unexpected end of input, expected {what}") }),
            }
        };
        let (ln, magic) = next("format line")?;
        if magic.trim_end() != FORMAT_MAGIC {
            return Err(Error::Parse { line: ln, message: format!("expected `{FORMAT_MAGIC}`") });
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (ln, line) = next(key)?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((ln, v.trim_end().to_string())),
                _ => Err(Error::Parse { line: ln, message: format!("expected `{key} <value>`") }),
            }
        };
        let parse_usize = |(ln, v): (usize, String)| -> Result<usize> {
            v.parse().map_err(|_| Error::Parse { line: ln, message: format!("not an integer: {v}") })
        };
        let m = parse_usize(field("m")?)?;
        let n = parse_usize(field("n")?)?;
        let (_, tag) = field("generator")?;
        let (seed_ln, seed) = field("seed")?;
        let (_, spec) = field("spec")?;
        let seed = match seed.as_str() {
            "none" => None,
            s => Some(s.parse::<u64>().map_err(|_| Error::Parse {
                line: seed_ln,
                message: format!("not a seed: {s}"),
            })?),
        };
        let (ln, data) = next("data marker")?;
        if data.trim_end() != "data" {
            return Err(Error::Parse { line: ln, message: "expected `data`".into() });
        }
        let mut losses = vec![S::zero(); m * n];
        for j in 0..n {
            let (ln, line) = next("data row")?;
            let mut count = 0;
            for (i, tok) in line.split_ascii_whitespace().enumerate() {
                if i >= m {
                    return Err(Error::Parse { line: ln, message: format!("more than {m} values") });
                }
                let x: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse { line: ln, message: format!("not a number: {tok}") })?;
                losses[i * n + j] = S::from_f64(x)
                    .ok_or_else(|| Error::Parse { line: ln, message: format!("unrepresentable: {tok}") })?;
                count = i + 1;
            }
            if count != m {
                return Err(Error::Parse { line: ln, message: format!("expected {m} values, got {count}") });
            }
        }
        let inst = Self::from_flat(m, n, losses)?;
        Ok(if tag == "none" {
            inst
        } else {
            inst.with_origin(Origin { tag, seed, spec: (spec != "none").then_some(spec) })
        })
    }
}

const FORMAT_MAGIC: &str = "selective-instance v1";

/// A window plus a distribution over models.
///
/// The model is kept as a distribution so expectations over the model draw
/// can be taken exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision<S = f64> {
    pub window: WindowChoice,
    pub model_dist: Vec<S>,
}

impl<S: Scalar> Decision<S> {
    pub fn new(window: WindowChoice, model_dist: Vec<S>) -> Result<Self> {
        if model_dist.is_empty() {
            return arg("model distribution is empty");
        }
        if let Some((i, p)) = model_dist.iter().enumerate().find(|(_, p)| !(**p >= S::zero())) {
            return arg(format!("model_dist[{i}] = {p} is negative or NaN"));
        }
        let total: S = model_dist.iter().copied().sum();
        if (total - S::one()).abs() > simplex_tolerance::<S>(model_dist.len()) {
            return arg(format!("model distribution sums to {total}, not 1"));
        }
        Ok(Self { window, model_dist })
    }

    pub fn point_mass(m: usize, model: usize, window: WindowChoice) -> Self {
        let mut model_dist = vec![S::zero(); m];
        model_dist[model] = S::one();
        Self { window, model_dist }
    }

    pub fn uniform(m: usize, window: WindowChoice) -> Self {
        Self { window, model_dist: vec![S::one() / S::from_count(m); m] }
    }

    /// Draws a model index from the distribution.
    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = S::lit(rng.gen::<f64>());
        let mut acc = S::zero();
        for (i, &p) in self.model_dist.iter().enumerate() {
            acc = acc + p;
            if u < acc {
                return i;
            }
        }
        // Rounding left u ≥ Σp; return the last model with positive mass.
        self.model_dist.iter().rposition(|p| *p > S::zero()).unwrap_or(0)
    }
}

/// `(1/w) Σ_{j=1..w} losses[model][t + j]`.
pub fn window_avg_loss<S: Scalar>(inst: &Instance<S>, model: usize, win: WindowChoice) -> Result<S> {
    inst.window_avg(model, win)
}

/// Expected loss of the decision's model distribution on its window minus
/// the best single model's loss on that window. Never negative.
pub fn excess_risk<S: Scalar>(inst: &Instance<S>, dec: &Decision<S>) -> Result<S> {
    if dec.model_dist.len() != inst.m() {
        return arg(format!(
            "decision has {} model weights, instance has {} models",
            dec.model_dist.len(),
            inst.m()
        ));
    }
    let avgs = inst.window_avgs(dec.window)?;
    Ok(risk_from_avgs(&dec.model_dist, &avgs))
}

pub(crate) fn risk_from_avgs<S: Scalar>(dist: &[S], avgs: &[S]) -> S {
    let expected: S = dist.iter().zip(avgs).map(|(&p, &a)| p * a).sum();
    let best = avgs.iter().copied().fold(S::infinity(), S::min);
    (expected - best).max(S::zero())
}

/// Per-timescale learnability `(L_0, …, L_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleProfile<S = f64> {
    pub k: u32,
    pub values: Vec<S>,
}

impl<S: Scalar> ScaleProfile<S> {
    pub fn get(&self, i: u32) -> S {
        self.values[i as usize]
    }
}

/// `L_i` = average over the `2^{k-i}` aligned blocks of length `2^i` in the
/// first `2^k` steps of the best model's average loss on that block.
pub fn scale_profile<S: Scalar>(inst: &Instance<S>) -> ScaleProfile<S> {
    let k = inst.k();
    let horizon = inst.horizon();
    let values = (0..=k)
        .map(|i| {
            let len = 1usize << i;
            let blocks = horizon / len;
            let total: S = (0..blocks)
                .map(|b| {
                    (0..inst.m())
                        .map(|model| inst.range_sum(model, b * len, (b + 1) * len))
                        .fold(S::infinity(), S::min)
                        / S::from_count(len)
                })
                .sum();
            total / S::from_count(blocks)
        })
        .collect();
    ScaleProfile { k, values }
}
