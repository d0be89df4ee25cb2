//! Exact expectations for non-adaptive learners, inequality checkers and a
//! Monte Carlo estimator.
//!
//! The exact oracle enumerates every draw of a learner's window law and
//! integrates the model draw analytically, so its output is the expected
//! excess risk up to floating-point summation error. Atoms are visited in a
//! fixed order, which makes results reproducible bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversaries::GeneratorSpec;
use crate::algorithms::{exp_weights, HybridEw, HybridParams, Learner, Rate, WindowLaw};
use crate::convexity::{ConvexSpec, MeanPredictor, PointSequence};
use crate::error::{arg, Error, Result};
use crate::instance::{excess_risk, floor_log2, scale_profile, Instance};
use crate::rng::{derive_seed, keyed, lane};
use crate::scalar::Scalar;

/// Largest number of atoms the exact oracle will enumerate.
pub const ENUMERATION_CAP: u128 = 10_000_000;

/// Tolerance for inequality checks.
pub const INEQUALITY_TOL: f64 = 1e-9;

/// Probability mass and conditional expected risk of one window length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRisk {
    pub prob: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRisk {
    pub total: f64,
    /// Keyed by window length.
    pub by_scale: BTreeMap<usize, ScaleRisk>,
    pub enumeration_size: u128,
}

impl ExactRisk {
    pub fn total_probability(&self) -> f64 {
        self.by_scale.values().map(|s| s.prob).sum()
    }

    /// `Σ_w P(w) · E[risk | w]`, which should reproduce `total`.
    pub fn recombined(&self) -> f64 {
        self.by_scale.values().map(|s| s.prob * s.risk).sum()
    }
}

fn enumerate<D, L>(law: &L, n: usize, mut value: impl FnMut(&D) -> Result<f64>) -> Result<ExactRisk>
where
    L: WindowLaw<Draw = D> + ?Sized,
{
    let atoms = law.atom_count(n)?;
    if atoms > ENUMERATION_CAP {
        return Err(Error::Resource { atoms, cap: ENUMERATION_CAP });
    }
    let mut total = 0.0;
    let mut acc: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut failure = None;
    law.for_each_atom(n, &mut |p, draw| {
        if failure.is_some() {
            return;
        }
        match value(&draw) {
            Ok(r) => {
                total += p * r;
                let e = acc.entry(law.window(&draw).w).or_insert((0.0, 0.0));
                e.0 += p;
                e.1 += p * r;
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let by_scale = acc
        .into_iter()
        .map(|(w, (prob, mass))| (w, ScaleRisk { prob, risk: if prob > 0.0 { mass / prob } else { 0.0 } }))
        .collect();
    Ok(ExactRisk { total, by_scale, enumeration_size: atoms })
}

/// Exact expected excess risk of `learner` on `inst`.
pub fn exact_risk<S: Scalar, L: Learner<S> + ?Sized>(learner: &L, inst: &Instance<S>) -> Result<ExactRisk> {
    learner.check(inst)?;
    enumerate(learner, inst.n(), |draw| Ok(excess_risk(inst, &learner.decide(inst, draw)?)?.as_f64()))
}

/// Exact expected f-loss of the mean predictor on `seq`.
pub fn exact_mean_loss<S: Scalar>(seq: &PointSequence<S>, f: &dyn ConvexSpec<S>) -> Result<ExactRisk> {
    if seq.dim() != f.dim() {
        return arg(format!("sequence dimension {} differs from f's dimension {}", seq.dim(), f.dim()));
    }
    enumerate(&MeanPredictor, seq.len(), |draw| {
        let pred = MeanPredictor.predict(seq, draw)?;
        Ok(MeanPredictor.loss(f, seq, &pred)?.as_f64())
    })
}

/// One side-by-side comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Verdict {
    pub fn le(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs + tol }
    }
}

/// `ln m / (η 2^Δ) + η/8`, the regret of exponential weights over `2^Δ`
/// rounds, with the `m = 1` case taken as `η/8`.
pub fn experts_regret(m: usize, delta: u32, eta: f64) -> f64 {
    let ln_m = (m as f64).ln();
    let first = if ln_m == 0.0 { 0.0 } else { ln_m / (eta * (1u64 << delta) as f64) };
    first + eta / 8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Row {
    pub i: u32,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub delta: u32,
    pub eta: f64,
    pub profile: Vec<f64>,
    pub rows: Vec<Lemma1Row>,
}

impl Lemma1Report {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.verdict.holds)
    }

    pub fn average_rhs(&self) -> f64 {
        self.rows.iter().map(|r| r.verdict.rhs).sum::<f64>() / self.rows.len() as f64
    }

    /// The telescoped average of the right-hand sides,
    /// `(Σ_{i=k−Δ+1}^{k} L_i − Σ_{i=0}^{Δ−1} L_i)/(k−Δ+1)` plus the regret term.
    pub fn telescoped_rhs(&self, m: usize) -> f64 {
        let k = self.profile.len() as u32 - 1;
        let d = self.delta;
        let top: f64 = (k - d + 1..=k).map(|i| self.profile[i as usize]).sum();
        let bottom: f64 = (0..d).map(|i| self.profile[i as usize]).sum();
        (top - bottom) / f64::from(k - d + 1) + experts_regret(m, d, self.eta)
    }
}

/// For each scale `i ∈ {0, …, k−Δ}`, compares the exact conditional excess
/// risk of hybrid exponential weights given `w = 2^i` with
/// `(L_{i+Δ} − L_i) + ln m/(η 2^Δ) + η/8`.
pub fn check_lemma1<S: Scalar>(inst: &Instance<S>, delta: u32, eta: Rate<S>) -> Result<Lemma1Report> {
    let params = HybridParams::new(delta, eta)?;
    if inst.n() < 1usize << delta {
        return arg(format!("n = {} is smaller than 2^Δ = {}", inst.n(), 1u64 << delta));
    }
    let eta = params.eta_for(inst.m()).as_f64();
    let exact = exact_risk(&HybridEw::new(params), inst)?;
    let profile: Vec<f64> = scale_profile(inst).values.iter().map(|v| v.as_f64()).collect();
    let k = inst.k();
    let regret = experts_regret(inst.m(), delta, eta);
    let rows = (0..=k - delta)
        .map(|i| {
            let lhs = exact.by_scale.get(&(1usize << i)).map_or(0.0, |s| s.risk);
            let rhs = profile[(i + delta) as usize] - profile[i as usize] + regret;
            Lemma1Row { i, verdict: Verdict::le(lhs, rhs, INEQUALITY_TOL) }
        })
        .collect();
    Ok(Lemma1Report { delta, eta, profile, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertsCheck {
    pub ew_avg_loss: f64,
    pub min_avg_loss: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Runs exponential weights with rate `η` on the `2^Δ`-round experts problem
/// whose round-`s` losses are the block averages over
/// `[t0 + s·w, t0 + (s+1)·w)`, and compares its average loss with the best
/// expert plus `ln m/(η 2^Δ) + η/8`.
pub fn check_experts_bound<S: Scalar>(
    inst: &Instance<S>,
    w: usize,
    t0: usize,
    delta: u32,
    eta: S,
) -> Result<ExpertsCheck> {
    if w == 0 || delta >= usize::BITS {
        return arg("block length must be positive");
    }
    if !(eta > S::zero()) {
        return arg(format!("η must be positive (got {eta})"));
    }
    let rounds = 1usize << delta;
    let span = w * rounds;
    if !t0.is_multiple_of(span) {
        return arg(format!("t0 = {t0} is not aligned to W = 2^Δ·w = {span}"));
    }
    if t0 + span > inst.horizon() {
        return arg(format!("super-block [{t0}, {}) exceeds the horizon {}", t0 + span, inst.horizon()));
    }
    let m = inst.m();
    let wf = S::from_count(w);
    let mut cumulative = vec![S::zero(); m];
    let mut ew_total = 0.0;
    for s in 0..rounds {
        let start = t0 + s * w;
        let losses: Vec<S> = (0..m).map(|i| inst.range_sum(i, start, start + w) / wf).collect();
        let p = exp_weights(&cumulative, eta);
        ew_total += p.iter().zip(&losses).map(|(&a, &b)| (a * b).as_f64()).sum::<f64>();
        for (c, l) in cumulative.iter_mut().zip(&losses) {
            *c = *c + *l;
        }
    }
    let t = rounds as f64;
    let ew_avg_loss = ew_total / t;
    let min_avg_loss = cumulative.iter().map(|c| c.as_f64()).fold(f64::INFINITY, f64::min) / t;
    let bound = min_avg_loss + experts_regret(m, delta, eta.as_f64());
    Ok(ExpertsCheck { ew_avg_loss, min_avg_loss, bound, holds: ew_avg_loss <= bound + INEQUALITY_TOL })
}

/// Runs [`check_experts_bound`] for every valid `(w, t0)` with `w = 2^i`,
/// `i ∈ {0, …, k−Δ}`; returns the first failure with its `(w, t0)`, if any,
/// and the number of checks made.
pub fn check_experts_all<S: Scalar>(
    inst: &Instance<S>,
    delta: u32,
    eta: S,
) -> Result<(usize, Option<(usize, usize, ExpertsCheck)>)> {
    let k = inst.k();
    if delta > k {
        return arg(format!("Δ = {delta} exceeds ⌊log2 n⌋ = {k}"));
    }
    let mut count = 0;
    for i in 0..=k - delta {
        let w = 1usize << i;
        let span = w << delta;
        for t0 in (0..inst.horizon()).step_by(span) {
            let c = check_experts_bound(inst, w, t0, delta, eta)?;
            count += 1;
            if !c.holds {
                return Ok((count, Some((w, t0, c))));
            }
        }
    }
    Ok((count, None))
}

/// Exact expected f-loss of the mean predictor against
/// `(4c1 + 8)(f_max − f(μ))/k`, `μ` the sequence average.
pub fn check_theorem5<S: Scalar>(seq: &PointSequence<S>, f: &dyn ConvexSpec<S>) -> Result<Verdict> {
    let n = seq.len();
    if n < 2 || !n.is_power_of_two() {
        return arg(format!("sequence length {n} must be a power of two ≥ 2"));
    }
    let k = floor_log2(n) as f64;
    let exact = exact_mean_loss(seq, f)?;
    let mu = seq.average(crate::instance::WindowChoice::new(0, n))?;
    let gap = (f.f_max() - f.value(&mu)).as_f64();
    let bound = (4.0 * f.c1().as_f64() + 8.0) * gap / k;
    Ok(Verdict::le(exact.total, bound, INEQUALITY_TOL))
}

/// Instances fed to [`monte_carlo_risk`].
#[derive(Debug, Clone, Copy)]
pub enum Source<'a, S = f64> {
    Fixed(&'a Instance<S>),
    /// A fresh instance per trial, reseeded from the master seed.
    Generator(&'a GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub mean: f64,
    /// Standard error of the mean; absent for a single trial.
    pub stderr: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl RiskReport {
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let t = samples.len();
        let mean = samples.iter().sum::<f64>() / t as f64;
        let stderr = (t > 1).then(|| {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
            (var / t as f64).sqrt()
        });
        Self { mean, stderr, trials: t, seed }
    }

    /// Half-width of the normal 95% interval.
    pub fn half_width(&self) -> Option<f64> {
        self.stderr.map(|s| 1.96 * s)
    }
}

/// Excess risk of trial `trial`: its own algorithm stream and, for generator
/// sources, its own instance seed. Independent of the order trials run in.
pub fn trial_risk<S: Scalar, L: Learner<S> + ?Sized>(
    learner: &L,
    source: Source<'_, S>,
    seed: u64,
    trial: u64,
) -> Result<f64> {
    let mut rng = keyed(seed, lane::ALGORITHM, trial);
    let risk = match source {
        Source::Fixed(inst) => excess_risk(inst, &learner.run(inst, &mut rng)?)?,
        Source::Generator(spec) => {
            let inst: Instance<S> = spec.with_seed(derive_seed(seed, lane::INSTANCE, trial)).generate()?;
            excess_risk(&inst, &learner.run(&inst, &mut rng)?)?
        }
    };
    Ok(risk.as_f64())
}

/// Mean excess risk over `trials` independent runs. The model draw is
/// integrated analytically; only the window draw and the instance are sampled.
pub fn monte_carlo_risk<S: Scalar, L: Learner<S> + ?Sized>(
    learner: &L,
    source: Source<'_, S>,
    trials: usize,
    seed: u64,
) -> Result<RiskReport> {
    if trials == 0 {
        return arg("Monte Carlo needs at least one trial");
    }
    let samples = (0..trials as u64).map(|t| trial_risk(learner, source, seed, t)).collect::<Result<Vec<_>>>()?;
    Ok(RiskReport::from_samples(&samples, seed))
}
