//! Selective learners.
//!
//! Every learner here is non-adaptive: its randomness (the "draw") fixes the
//! prediction window before any data is seen, and the model is then chosen
//! from a distribution computed from the observed losses. A learner therefore
//! splits into a [`WindowLaw`] (how draws are sampled or enumerated) and a
//! [`Learner::decide`] step that maps a draw plus an instance to a
//! [`Decision`]. The exact oracle enumerates draws; Monte Carlo samples them.

use std::fmt::Debug;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::instance::{floor_log2, risk_from_avgs, Decision, Instance, WindowChoice};
use crate::scalar::Scalar;

/// The data-independent half of a non-adaptive learner.
pub trait WindowLaw {
    type Draw: Copy + Debug;

    fn name(&self) -> &'static str;

    fn sample_draw(&self, n: usize, rng: &mut dyn RngCore) -> Result<Self::Draw>;

    /// Number of atoms [`WindowLaw::for_each_atom`] would visit.
    fn atom_count(&self, n: usize) -> Result<u128>;

    /// Visits every draw with its probability, in a fixed order.
    fn for_each_atom(&self, n: usize, visit: &mut dyn FnMut(f64, Self::Draw)) -> Result<()>;

    fn window(&self, draw: &Self::Draw) -> WindowChoice;

    fn sample_window(&self, n: usize, rng: &mut dyn RngCore) -> Result<WindowChoice> {
        let draw = self.sample_draw(n, rng)?;
        Ok(self.window(&draw))
    }
}

/// A learner that turns a draw into a model distribution.
pub trait Learner<S: Scalar>: WindowLaw {
    /// Instance-level preconditions beyond the horizon checks of the law.
    fn check(&self, _inst: &Instance<S>) -> Result<()> {
        Ok(())
    }

    fn decide(&self, inst: &Instance<S>, draw: &Self::Draw) -> Result<Decision<S>>;

    fn run(&self, inst: &Instance<S>, rng: &mut dyn RngCore) -> Result<Decision<S>> {
        self.check(inst)?;
        let draw = self.sample_draw(inst.n(), rng)?;
        self.decide(inst, &draw)
    }
}

/// A learning-rate style parameter that may be derived from the instance shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate<S = f64> {
    Auto,
    Fixed(S),
}

/// Normalized exponential weights `p_i ∝ exp(-rate · u_i)`.
///
/// `rate = 0` gives the uniform distribution; `rate = ∞` the uniform
/// distribution over the exact minimizers.
pub fn exp_weights<S: Scalar>(u: &[S], rate: S) -> Vec<S> {
    let u_min = u.iter().copied().fold(S::infinity(), S::min);
    if rate.is_infinite() {
        let ties = u.iter().filter(|&&x| x == u_min).count();
        let share = S::one() / S::from_count(ties);
        return u.iter().map(|&x| if x == u_min { share } else { S::zero() }).collect();
    }
    let raw: Vec<S> = u.iter().map(|&x| (-(rate * (x - u_min))).exp()).collect();
    let z: S = raw.iter().copied().sum();
    raw.into_iter().map(|x| x / z).collect()
}

/// Index of the smallest entry, lowest index on ties.
pub fn argmin<S: Scalar>(u: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in u.iter().enumerate().skip(1) {
        if x < u[best] {
            best = i;
        }
    }
    best
}

/// Randomness of the scale-sampling learners: `k' ∈ [k]` and an aligned
/// block start `t ∈ {0, 2^k', …, 2^k − 2^k'}`. The learner observes the first
/// half of the block and predicts on the second half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleDraw {
    pub k_prime: u32,
    pub t: usize,
}

impl ScaleDraw {
    pub fn half(&self) -> usize {
        1 << (self.k_prime - 1)
    }

    /// The window the learner observes, `(t, 2^{k'-1})`.
    pub fn observed(&self) -> WindowChoice {
        WindowChoice::new(self.t, self.half())
    }

    /// The prediction window `(t + 2^{k'-1}, 2^{k'-1})`.
    pub fn predicted(&self) -> WindowChoice {
        WindowChoice::new(self.t + self.half(), self.half())
    }
}

pub(crate) fn scale_k(n: usize) -> Result<u32> {
    if n < 2 {
        return arg(format!("scale sampling needs n ≥ 2 (got n={n})"));
    }
    Ok(floor_log2(n))
}

pub(crate) fn sample_scale(n: usize, rng: &mut dyn RngCore) -> Result<ScaleDraw> {
    let k = scale_k(n)?;
    let k_prime = rng.gen_range(1..=k);
    let blocks = 1usize << (k - k_prime);
    let t = rng.gen_range(0..blocks) << k_prime;
    Ok(ScaleDraw { k_prime, t })
}

pub(crate) fn scale_atom_count(n: usize) -> Result<u128> {
    let k = scale_k(n)?;
    Ok((1..=k).map(|kp| 1u128 << (k - kp)).sum())
}

pub(crate) fn for_each_scale_atom(n: usize, visit: &mut dyn FnMut(f64, ScaleDraw)) -> Result<()> {
    let k = scale_k(n)?;
    for k_prime in 1..=k {
        let blocks = 1usize << (k - k_prime);
        let p = 1.0 / (k as f64 * blocks as f64);
        for b in 0..blocks {
            visit(p, ScaleDraw { k_prime, t: b << k_prime });
        }
    }
    Ok(())
}

/// Parameters of hybrid exponential weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridParams<S = f64> {
    pub delta: u32,
    pub eta: Rate<S>,
}

impl<S: Scalar> HybridParams<S> {
    pub fn new(delta: u32, eta: Rate<S>) -> Result<Self> {
        if delta == 0 {
            return arg("Δ must be at least 1");
        }
        if let Rate::Fixed(e) = eta {
            if !(e > S::zero()) {
                return arg(format!("η must be positive (got {e})"));
            }
        }
        Ok(Self { delta, eta })
    }

    /// `Δ = round(log2 log2 m + log2 log2 n)` clamped to `[1, ⌊log2 n⌋]`.
    pub fn auto_delta(m: usize, n: usize) -> u32 {
        let k = floor_log2(n.max(2));
        let ll = |x: usize| (x.max(2) as f64).log2().log2().max(0.0);
        let d = (ll(m) + ll(n)).round() as u32;
        d.clamp(1, k)
    }

    /// `η`, resolving `Auto` to `√(8 ln m / 2^Δ)`.
    pub fn eta_for(&self, m: usize) -> S {
        match self.eta {
            Rate::Fixed(e) => e,
            Rate::Auto => {
                S::lit((8.0 * (m as f64).ln() / (1u64 << self.delta) as f64).sqrt())
            }
        }
    }
}

/// Hybrid exponential weights.
///
/// Draws `w = 2^i` uniformly with `i ∈ {0, …, k−Δ}`, a super-block of length
/// `W = 2^Δ w` uniformly among the aligned ones, and a sub-block inside it.
/// Models are weighted by their cumulative loss over the sub-blocks of the
/// super-block that precede the prediction window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridEw<S = f64> {
    pub params: HybridParams<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridDraw {
    /// `log2 w`.
    pub scale: u32,
    /// Zero-based super-block index (`i_1 − 1`).
    pub block: usize,
    /// Zero-based sub-block index (`i_2 − 1`).
    pub sub_block: usize,
    pub delta: u32,
}

impl HybridDraw {
    pub fn w(&self) -> usize {
        1 << self.scale
    }

    pub fn super_len(&self) -> usize {
        self.w() << self.delta
    }

    pub fn t0(&self) -> usize {
        self.block * self.super_len()
    }

    pub fn t(&self) -> usize {
        self.t0() + self.sub_block * self.w()
    }
}

impl<S: Scalar> HybridEw<S> {
    pub fn new(params: HybridParams<S>) -> Self {
        Self { params }
    }

    fn k(&self, n: usize) -> Result<u32> {
        if n == 0 {
            return arg("n must be positive");
        }
        let k = floor_log2(n);
        if self.params.delta > k {
            return arg(format!("Δ = {} exceeds ⌊log2 n⌋ = {k}", self.params.delta));
        }
        Ok(k)
    }

    /// Cumulative per-model loss `u_i = (1/w) Σ_{j=t0+1..t} ℓ_i(z_j)`.
    pub fn observed_losses(inst: &Instance<S>, draw: &HybridDraw) -> Vec<S> {
        let w = S::from_count(draw.w());
        (0..inst.m()).map(|i| inst.range_sum(i, draw.t0(), draw.t()) / w).collect()
    }
}

impl<S: Scalar> WindowLaw for HybridEw<S> {
    type Draw = HybridDraw;

    fn name(&self) -> &'static str {
        "hybrid_ew"
    }

    fn sample_draw(&self, n: usize, rng: &mut dyn RngCore) -> Result<HybridDraw> {
        let k = self.k(n)?;
        let delta = self.params.delta;
        let scale = rng.gen_range(0..=k - delta);
        let block = rng.gen_range(0..1usize << (k - delta - scale));
        let sub_block = rng.gen_range(0..1usize << delta);
        Ok(HybridDraw { scale, block, sub_block, delta })
    }

    fn atom_count(&self, n: usize) -> Result<u128> {
        let k = self.k(n)?;
        let delta = self.params.delta;
        Ok((0..=k - delta).map(|s| 1u128 << (k - s)).sum())
    }

    fn for_each_atom(&self, n: usize, visit: &mut dyn FnMut(f64, HybridDraw)) -> Result<()> {
        let k = self.k(n)?;
        let delta = self.params.delta;
        let scales = (k - delta + 1) as f64;
        for scale in 0..=k - delta {
            let blocks = 1usize << (k - delta - scale);
            let subs = 1usize << delta;
            let p = 1.0 / (scales * blocks as f64 * subs as f64);
            for block in 0..blocks {
                for sub_block in 0..subs {
                    visit(p, HybridDraw { scale, block, sub_block, delta });
                }
            }
        }
        Ok(())
    }

    fn window(&self, draw: &HybridDraw) -> WindowChoice {
        WindowChoice::new(draw.t(), draw.w())
    }
}

impl<S: Scalar> Learner<S> for HybridEw<S> {
    fn decide(&self, inst: &Instance<S>, draw: &HybridDraw) -> Result<Decision<S>> {
        let window = self.window(draw);
        window.validate(inst.n())?;
        let u = Self::observed_losses(inst, draw);
        let eta = self.params.eta_for(inst.m());
        Ok(Decision { window, model_dist: exp_weights(&u, eta) })
    }
}

/// Parameters of bounded-recall exponential weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedRecallParams<S = f64> {
    pub alpha: Rate<S>,
    /// Constant in the automatic choice `α = c·√(log2 n · ln m)`.
    pub c: S,
}

impl<S: Scalar> BoundedRecallParams<S> {
    pub fn new(alpha: Rate<S>) -> Result<Self> {
        if let Rate::Fixed(a) = alpha {
            if !(a >= S::zero()) {
                return arg(format!("α must be non-negative (got {a})"));
            }
        }
        Ok(Self { alpha, c: S::one() })
    }

    pub fn with_c(mut self, c: S) -> Self {
        self.c = c;
        self
    }

    pub fn alpha_for(&self, m: usize, n: usize) -> S {
        match self.alpha {
            Rate::Fixed(a) => a,
            Rate::Auto => self.c * S::lit(((n as f64).log2() * (m as f64).ln()).sqrt()),
        }
    }
}

impl<S: Scalar> Default for BoundedRecallParams<S> {
    fn default() -> Self {
        Self { alpha: Rate::Auto, c: S::one() }
    }
}

/// Bounded-recall exponential weights: a softened ERM that weights models by
/// `exp(-α u_i)` where `u` is the average loss on the `2^{k'-1}` points right
/// before the prediction window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedRecallEw<S = f64> {
    pub params: BoundedRecallParams<S>,
}

impl<S: Scalar> BoundedRecallEw<S> {
    pub fn new(params: BoundedRecallParams<S>) -> Self {
        Self { params }
    }
}

impl<S: Scalar> WindowLaw for BoundedRecallEw<S> {
    type Draw = ScaleDraw;

    fn name(&self) -> &'static str {
        "bounded_recall_ew"
    }

    fn sample_draw(&self, n: usize, rng: &mut dyn RngCore) -> Result<ScaleDraw> {
        sample_scale(n, rng)
    }

    fn atom_count(&self, n: usize) -> Result<u128> {
        scale_atom_count(n)
    }

    fn for_each_atom(&self, n: usize, visit: &mut dyn FnMut(f64, ScaleDraw)) -> Result<()> {
        for_each_scale_atom(n, visit)
    }

    fn window(&self, draw: &ScaleDraw) -> WindowChoice {
        draw.predicted()
    }
}

impl<S: Scalar> Learner<S> for BoundedRecallEw<S> {
    fn decide(&self, inst: &Instance<S>, draw: &ScaleDraw) -> Result<Decision<S>> {
        let window = draw.predicted();
        window.validate(inst.n())?;
        let u = inst.window_avgs(draw.observed())?;
        let alpha = self.params.alpha_for(inst.m(), inst.n());
        Ok(Decision { window, model_dist: exp_weights(&u, alpha) })
    }
}

/// Empirical risk minimization over the window right before the prediction
/// window; same window law as [`BoundedRecallEw`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Erm;

impl WindowLaw for Erm {
    type Draw = ScaleDraw;

    fn name(&self) -> &'static str {
        "erm"
    }

    fn sample_draw(&self, n: usize, rng: &mut dyn RngCore) -> Result<ScaleDraw> {
        sample_scale(n, rng)
    }

    fn atom_count(&self, n: usize) -> Result<u128> {
        scale_atom_count(n)
    }

    fn for_each_atom(&self, n: usize, visit: &mut dyn FnMut(f64, ScaleDraw)) -> Result<()> {
        for_each_scale_atom(n, visit)
    }

    fn window(&self, draw: &ScaleDraw) -> WindowChoice {
        draw.predicted()
    }
}

impl<S: Scalar> Learner<S> for Erm {
    fn decide(&self, inst: &Instance<S>, draw: &ScaleDraw) -> Result<Decision<S>> {
        let window = draw.predicted();
        window.validate(inst.n())?;
        let u = inst.window_avgs(draw.observed())?;
        Ok(Decision::point_mass(inst.m(), argmin(&u), window))
    }
}

/// Learner for realizable instances: stop at a uniform `t`, pick uniformly
/// among the models with zero loss so far, predict one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RealizableLearner;

impl WindowLaw for RealizableLearner {
    type Draw = usize;

    fn name(&self) -> &'static str {
        "realizable_learner"
    }

    fn sample_draw(&self, n: usize, rng: &mut dyn RngCore) -> Result<usize> {
        if n == 0 {
            return arg("n must be positive");
        }
        Ok(rng.gen_range(0..n))
    }

    fn atom_count(&self, n: usize) -> Result<u128> {
        Ok(n as u128)
    }

    fn for_each_atom(&self, n: usize, visit: &mut dyn FnMut(f64, usize)) -> Result<()> {
        let p = 1.0 / n as f64;
        for t in 0..n {
            visit(p, t);
        }
        Ok(())
    }

    fn window(&self, t: &usize) -> WindowChoice {
        WindowChoice::new(*t, 1)
    }
}

impl<S: Scalar> Learner<S> for RealizableLearner {
    fn check(&self, inst: &Instance<S>) -> Result<()> {
        if (0..inst.m()).any(|i| inst.is_zero_row(i)) {
            return Ok(());
        }
        let evidence = (0..inst.m())
            .map(|i| {
                let first = inst.row(i).iter().position(|x| !x.is_zero()).unwrap_or(0);
                format!("model {i}: first nonzero loss at step {first}")
            })
            .collect();
        Err(Error::Precondition { message: "no model has zero loss on every step".into(), evidence })
    }

    fn decide(&self, inst: &Instance<S>, t: &usize) -> Result<Decision<S>> {
        let window = WindowChoice::new(*t, 1);
        window.validate(inst.n())?;
        let consistent: Vec<bool> =
            (0..inst.m()).map(|i| inst.row(i)[..*t].iter().all(|x| x.is_zero())).collect();
        let count = consistent.iter().filter(|&&c| c).count();
        if count == 0 {
            return Err(Error::Precondition {
                message: format!("no model is consistent with the first {t} steps"),
                evidence: vec![],
            });
        }
        let share = S::one() / S::from_count(count);
        let model_dist = consistent.iter().map(|&c| if c { share } else { S::zero() }).collect();
        Ok(Decision { window, model_dist })
    }
}

pub fn hybrid_ew<S: Scalar>(
    inst: &Instance<S>,
    params: HybridParams<S>,
    rng: &mut dyn RngCore,
) -> Result<Decision<S>> {
    HybridEw::new(params).run(inst, rng)
}

pub fn bounded_recall_ew<S: Scalar>(
    inst: &Instance<S>,
    params: BoundedRecallParams<S>,
    rng: &mut dyn RngCore,
) -> Result<Decision<S>> {
    BoundedRecallEw::new(params).run(inst, rng)
}

pub fn erm<S: Scalar>(inst: &Instance<S>, rng: &mut dyn RngCore) -> Result<Decision<S>> {
    Learner::<S>::run(&Erm, inst, rng)
}

pub fn realizable_learner<S: Scalar>(inst: &Instance<S>, rng: &mut dyn RngCore) -> Result<Decision<S>> {
    Learner::<S>::run(&RealizableLearner, inst, rng)
}

/// The three-way split of the excess risk used in the bounded-recall analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTerms<S = f64> {
    /// `Σ P(i)(v_i − u_i)`: test minus train loss under the decision.
    pub generalization: S,
    /// `Σ P(i)(u_i − u_min)`: suboptimality on the training window.
    pub optimization: S,
    /// `u_min − v_min`.
    pub learnability_shift: S,
}

impl<S: Scalar> RiskTerms<S> {
    pub fn total(&self) -> S {
        self.generalization + self.optimization + self.learnability_shift
    }
}

/// Splits the excess risk of `dec` with respect to a training window that
/// immediately precedes the prediction window and has the same length.
pub fn decompose_risk<S: Scalar>(
    inst: &Instance<S>,
    dec: &Decision<S>,
    train_window: WindowChoice,
) -> Result<RiskTerms<S>> {
    let test = dec.window;
    if train_window.w != test.w || train_window.end() != test.t {
        return arg(format!(
            "training window (t={}, w={}) must immediately precede prediction window (t={}, w={}) with equal length",
            train_window.t, train_window.w, test.t, test.w
        ));
    }
    if dec.model_dist.len() != inst.m() {
        return arg("decision and instance disagree on the number of models");
    }
    let u = inst.window_avgs(train_window)?;
    let v = inst.window_avgs(test)?;
    let p = &dec.model_dist;
    let u_min = u.iter().copied().fold(S::infinity(), S::min);
    let v_min = v.iter().copied().fold(S::infinity(), S::min);
    let generalization = p.iter().zip(u.iter().zip(&v)).map(|(&p, (&ui, &vi))| p * (vi - ui)).sum();
    let optimization = p.iter().zip(&u).map(|(&p, &ui)| p * (ui - u_min)).sum();
    Ok(RiskTerms { generalization, optimization, learnability_shift: u_min - v_min })
}

/// Expected excess risk of a decision, used by callers that already hold the
/// prediction-window averages.
pub fn decision_risk<S: Scalar>(dist: &[S], window_avgs: &[S]) -> S {
    risk_from_avgs(dist, window_avgs)
}
