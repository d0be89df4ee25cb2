//! Convex functions, Bregman losses and generalized mean prediction.
//!
//! A [`ConvexSpec`] bundles a convex function on a box or simplex with its
//! gradient and two certified constants: `c0 ≥ sup f − inf f` and `c1` such
//! that every segment restriction `g(t) = f(x + t(y − x))` satisfies
//! `|g'''| ≤ c1·g''`. The certifier here checks the second constant
//! numerically; the mean predictor is the scale-sampling estimator whose
//! expected f-loss is bounded in terms of those constants.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::algorithms::{for_each_scale_atom, sample_scale, scale_atom_count, ScaleDraw, WindowLaw};
use crate::error::{arg, Error, Result};
use crate::instance::{Instance, WindowChoice};
use crate::scalar::Scalar;

/// Convex domain of a [`ConvexSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Domain<S = f64> {
    Box { lower: Vec<S>, upper: Vec<S> },
    /// Probability simplex in `R^dim`.
    Simplex { dim: usize },
}

impl<S: Scalar> Domain<S> {
    pub fn unit_box(dim: usize) -> Self {
        Domain::Box { lower: vec![S::zero(); dim], upper: vec![S::one(); dim] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Simplex { dim } => *dim,
        }
    }

    pub fn contains(&self, x: &[S]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
            }
            Domain::Simplex { .. } => {
                let total: S = x.iter().copied().sum();
                x.iter().all(|&v| v >= S::zero()) && (total - S::one()).abs() <= S::lit(1e-9)
            }
        }
    }

    /// A random point, almost surely in the relative interior.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<S> {
        match self {
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&lo, &hi)| lo + S::lit(rng.gen::<f64>()) * (hi - lo))
                .collect(),
            Domain::Simplex { dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let z: f64 = e.iter().sum();
                e.into_iter().map(|v| S::lit(v / z)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexTag {
    Quadratic,
    LogSumExp { alpha: f64 },
    Custom { name: String },
}

/// A differentiable convex function with certified constants.
pub trait ConvexSpec<S: Scalar>: Send + Sync {
    fn domain(&self) -> &Domain<S>;

    fn value(&self, x: &[S]) -> S;

    fn gradient(&self, x: &[S]) -> Vec<S>;

    /// `∇f(x)ᵀ dir`.
    fn directional_derivative(&self, x: &[S], dir: &[S]) -> S {
        dot(&self.gradient(x), dir)
    }

    /// Bound on `sup f − inf f` over the domain.
    fn c0(&self) -> S;

    /// Self-concordance coefficient.
    fn c1(&self) -> S;

    /// `sup f` over the domain.
    fn f_max(&self) -> S;

    fn tag(&self) -> ConvexTag;

    fn dim(&self) -> usize {
        self.domain().dim()
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `½‖x‖²` on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic<S = f64> {
    domain: Domain<S>,
}

impl<S: Scalar> Quadratic<S> {
    /// On `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self { domain: Domain::unit_box(dim) }
    }

    pub fn on_box(lower: Vec<S>, upper: Vec<S>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return arg("box bounds must be non-empty and of equal length");
        }
        if lower.iter().zip(&upper).any(|(lo, hi)| !(lo <= hi)) {
            return arg("box lower bound exceeds upper bound");
        }
        Ok(Self { domain: Domain::Box { lower, upper } })
    }

    fn box_bounds(&self) -> (&[S], &[S]) {
        match &self.domain {
            Domain::Box { lower, upper } => (lower, upper),
            Domain::Simplex { .. } => unreachable!("quadratic is only built on boxes"),
        }
    }

    fn f_min(&self) -> S {
        let (lo, hi) = self.box_bounds();
        let half = S::lit(0.5);
        lo.iter()
            .zip(hi)
            .map(|(&l, &h)| if l <= S::zero() && S::zero() <= h { S::zero() } else { half * (l * l).min(h * h) })
            .sum()
    }
}

impl<S: Scalar> ConvexSpec<S> for Quadratic<S> {
    fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    fn value(&self, x: &[S]) -> S {
        S::lit(0.5) * dot(x, x)
    }

    fn gradient(&self, x: &[S]) -> Vec<S> {
        x.to_vec()
    }

    fn c0(&self) -> S {
        self.f_max() - self.f_min()
    }

    fn c1(&self) -> S {
        S::zero()
    }

    fn f_max(&self) -> S {
        let (lo, hi) = self.box_bounds();
        lo.iter().zip(hi).map(|(&l, &h)| S::lit(0.5) * (l * l).max(h * h)).sum()
    }

    fn tag(&self) -> ConvexTag {
        ConvexTag::Quadratic
    }
}

/// `ln Σ_i exp(−α x_i)` on `[0, 1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSumExp<S = f64> {
    alpha: S,
    domain: Domain<S>,
}

impl<S: Scalar> LogSumExp<S> {
    pub fn new(dim: usize, alpha: S) -> Result<Self> {
        if dim == 0 {
            return arg("log-sum-exp needs dim ≥ 1");
        }
        if !(alpha > S::zero()) || !alpha.is_finite() {
            return arg(format!("log-sum-exp needs finite α > 0 (got {alpha})"));
        }
        Ok(Self { alpha, domain: Domain::unit_box(dim) })
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    /// Softmax weights `P_x(i) ∝ exp(−α x_i)`, computed with max-subtraction.
    pub fn weights(&self, x: &[S]) -> Vec<S> {
        let lo = x.iter().copied().fold(S::infinity(), S::min);
        let a: Vec<S> = x.iter().map(|&v| (-self.alpha * (v - lo)).exp()).collect();
        let z: S = a.iter().copied().sum();
        a.into_iter().map(|v| v / z).collect()
    }

    /// Closed-form `(g', g'', g''')` of the restriction `g(t) = f(x + t(y − x))`,
    /// using the pairwise sums over coordinates.
    pub fn segment_derivatives(&self, x: &[S], y: &[S], t: S) -> (S, S, S) {
        let delta: Vec<S> = y.iter().zip(x).map(|(&b, &a)| b - a).collect();
        let point: Vec<S> = x.iter().zip(&delta).map(|(&a, &d)| a + t * d).collect();
        // Normalized a_i; the derivative ratios are scale-invariant in a.
        let a = self.weights(&point);
        let alpha = self.alpha;
        let d = a.len();
        let g1 = -alpha * dot(&a, &delta);
        let mut pair2 = S::zero();
        let mut pair3 = S::zero();
        for i in 0..d {
            for j in i + 1..d {
                let w = a[i] * a[j] * (delta[i] - delta[j]).powi(2);
                pair2 = pair2 + w;
                let inner: S = (0..d).map(|k| a[k] * (delta[i] + delta[j] - S::lit(2.0) * delta[k])).sum();
                pair3 = pair3 + w * inner;
            }
        }
        (g1, alpha * alpha * pair2, -alpha.powi(3) * pair3)
    }
}

impl<S: Scalar> ConvexSpec<S> for LogSumExp<S> {
    fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    fn value(&self, x: &[S]) -> S {
        let lo = x.iter().copied().fold(S::infinity(), S::min);
        let s: S = x.iter().map(|&v| (-self.alpha * (v - lo)).exp()).sum();
        s.ln() - self.alpha * lo
    }

    fn gradient(&self, x: &[S]) -> Vec<S> {
        self.weights(x).into_iter().map(|p| -self.alpha * p).collect()
    }

    fn c0(&self) -> S {
        self.alpha
    }

    fn c1(&self) -> S {
        S::lit(4.0) * self.alpha
    }

    fn f_max(&self) -> S {
        S::from_count(self.dim()).ln()
    }

    fn tag(&self) -> ConvexTag {
        ConvexTag::LogSumExp { alpha: self.alpha.as_f64() }
    }
}

type ValueFn<S> = Box<dyn Fn(&[S]) -> S + Send + Sync>;
type GradientFn<S> = Box<dyn Fn(&[S]) -> Vec<S> + Send + Sync>;

/// A user-supplied convex function.
pub struct CustomConvex<S = f64> {
    pub name: String,
    pub domain: Domain<S>,
    pub value: ValueFn<S>,
    pub gradient: GradientFn<S>,
    pub c0: S,
    pub c1: S,
    /// Certified `inf f`; `f_max` is taken as `f_inf + c0`.
    pub f_inf: S,
}

impl<S: Scalar> std::fmt::Debug for CustomConvex<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomConvex")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("c0", &self.c0)
            .field("c1", &self.c1)
            .finish_non_exhaustive()
    }
}

impl<S: Scalar> ConvexSpec<S> for CustomConvex<S> {
    fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    fn value(&self, x: &[S]) -> S {
        (self.value)(x)
    }

    fn gradient(&self, x: &[S]) -> Vec<S> {
        (self.gradient)(x)
    }

    fn c0(&self) -> S {
        self.c0
    }

    fn c1(&self) -> S {
        self.c1
    }

    fn f_max(&self) -> S {
        self.f_inf + self.c0
    }

    fn tag(&self) -> ConvexTag {
        ConvexTag::Custom { name: self.name.clone() }
    }
}

fn require_in_domain<S: Scalar>(f: &dyn ConvexSpec<S>, x: &[S], what: &str) -> Result<()> {
    if f.domain().contains(x) {
        Ok(())
    } else {
        arg(format!("{what} = {x:?} lies outside the domain of f"))
    }
}

/// `D_f(x, y) = f(x) − f(y) − ∇f(y)ᵀ(x − y)`.
pub fn bregman<S: Scalar>(f: &dyn ConvexSpec<S>, x: &[S], y: &[S]) -> Result<S> {
    require_in_domain(f, x, "x")?;
    require_in_domain(f, y, "y")?;
    let diff: Vec<S> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    Ok(f.value(x) - f.value(y) - dot(&f.gradient(y), &diff))
}

/// Symmetrized Bregman loss `D_f(x̂, x̄) + D_f(x̄, x̂)`.
///
/// Computed as `(∇f(x̂) − ∇f(x̄))ᵀ(x̂ − x̄)`, the algebraically equal form
/// that is exactly symmetric in floating point.
pub fn f_loss<S: Scalar>(f: &dyn ConvexSpec<S>, xhat: &[S], xbar: &[S]) -> Result<S> {
    require_in_domain(f, xhat, "x̂")?;
    require_in_domain(f, xbar, "x̄")?;
    let ga = f.gradient(xhat);
    let gb = f.gradient(xbar);
    Ok(ga
        .iter()
        .zip(&gb)
        .zip(xhat.iter().zip(xbar))
        .map(|((&p, &q), (&a, &b))| (p - q) * (a - b))
        .sum())
}

/// Both sides of `D_f(u,v) + D_f(v,u) ≤ (2c1 + 4)[f(u) + f(v) − 2f(μ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidePair<S = f64> {
    pub lhs: S,
    pub rhs: S,
}

impl<S: Scalar> SidePair<S> {
    pub fn holds(&self, tol: S) -> bool {
        self.lhs <= self.rhs + tol
    }

    pub fn slack(&self) -> S {
        self.rhs - self.lhs
    }
}

pub fn lemma4_check<S: Scalar>(f: &dyn ConvexSpec<S>, u: &[S], v: &[S]) -> Result<SidePair<S>> {
    let mu: Vec<S> = u.iter().zip(v).map(|(&a, &b)| (a + b) * S::lit(0.5)).collect();
    require_in_domain(f, &mu, "μ")?;
    let lhs = f_loss(f, u, v)?;
    let gap = f.value(u) + f.value(v) - S::lit(2.0) * f.value(&mu);
    Ok(SidePair { lhs, rhs: (S::lit(2.0) * f.c1() + S::lit(4.0)) * gap })
}

/// Settings for [`certify_self_concordance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyConfig {
    pub trials: usize,
    pub grid: usize,
    /// Finite-difference step.
    pub step: f64,
    /// Points with `g'' ≤ threshold` are skipped.
    pub threshold: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { trials: 1000, grid: 50, step: 1e-4, threshold: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<S = f64> {
    /// Largest observed `|g'''| / g''`; zero when no point qualified.
    pub max_ratio: S,
    pub points_used: usize,
    pub points_skipped: usize,
    /// Segment endpoints and `t` where the maximum was attained.
    pub witness: Option<(Vec<S>, Vec<S>, S)>,
}

/// Estimates `sup |g'''(t)| / g''(t)` over random segments inside the domain.
///
/// `g'` is evaluated exactly through the directional derivative; `g''` and
/// `g'''` are its first and second central differences. Grid points keep a
/// margin of one step from the segment ends so that every evaluation stays
/// inside the domain.
pub fn certify_self_concordance<S: Scalar>(
    f: &dyn ConvexSpec<S>,
    cfg: CertifyConfig,
    rng: &mut dyn RngCore,
) -> Result<Certificate<S>> {
    if cfg.trials == 0 || cfg.grid == 0 {
        return arg("certification needs at least one segment and one grid point");
    }
    if !(cfg.step > 0.0 && cfg.step < 0.25) {
        return arg(format!("finite-difference step {} must lie in (0, 0.25)", cfg.step));
    }
    let h = S::lit(cfg.step);
    let threshold = S::lit(cfg.threshold);
    let two = S::lit(2.0);
    let mut cert = Certificate { max_ratio: S::zero(), points_used: 0, points_skipped: 0, witness: None };
    for seg in 0..cfg.trials {
        let x = f.domain().sample(rng);
        let y = f.domain().sample(rng);
        let delta: Vec<S> = y.iter().zip(&x).map(|(&b, &a)| b - a).collect();
        let g1 = |t: S| {
            let p: Vec<S> = x.iter().zip(&delta).map(|(&a, &d)| a + t * d).collect();
            f.directional_derivative(&p, &delta)
        };
        for j in 0..cfg.grid {
            let t = if cfg.grid == 1 {
                S::lit(0.5)
            } else {
                h + (S::one() - two * h) * S::from_count(j) / S::from_count(cfg.grid - 1)
            };
            let (lo, mid, hi) = (g1(t - h), g1(t), g1(t + h));
            let g2 = (hi - lo) / (two * h);
            let g3 = (hi - two * mid + lo) / (h * h);
            if !g2.is_finite() || !g3.is_finite() {
                return Err(Error::Numeric {
                    message: format!("non-finite derivative estimate (g''={g2}, g'''={g3})"),
                    location: format!("segment {seg}, t = {t}, x = {x:?}, y = {y:?}"),
                });
            }
            if g2 <= threshold {
                cert.points_skipped += 1;
                continue;
            }
            cert.points_used += 1;
            let ratio = g3.abs() / g2;
            if ratio > cert.max_ratio {
                cert.max_ratio = ratio;
                cert.witness = Some((x.clone(), y.clone(), t));
            }
        }
    }
    Ok(cert)
}

/// Largest relative error between `∇f` and central differences of `f`
/// (step `h`) over `points` random domain points.
pub fn gradient_consistency<S: Scalar>(
    f: &dyn ConvexSpec<S>,
    points: usize,
    h: f64,
    rng: &mut dyn RngCore,
) -> S {
    let h = S::lit(h);
    let mut worst = S::zero();
    for _ in 0..points {
        let x = f.domain().sample(rng);
        let g = f.gradient(&x);
        for i in 0..x.len() {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] = up[i] + h;
            down[i] = down[i] - h;
            let fd = (f.value(&up) - f.value(&down)) / (S::lit(2.0) * h);
            let err = (fd - g[i]).abs() / g[i].abs().max(S::one());
            worst = worst.max(err);
        }
    }
    worst
}

/// Largest `sup − inf` of `f` observed over `points` random domain points.
pub fn observed_range<S: Scalar>(f: &dyn ConvexSpec<S>, points: usize, rng: &mut dyn RngCore) -> S {
    let mut lo = S::infinity();
    let mut hi = S::neg_infinity();
    for _ in 0..points {
        let v = f.value(&f.domain().sample(rng));
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if points == 0 {
        S::zero()
    } else {
        hi - lo
    }
}

/// A sequence of points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSequence<S = f64> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> PointSequence<S> {
    pub fn new(dim: usize, data: Vec<S>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return arg(format!("cannot split {} values into points of dimension {dim}", data.len()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_points(points: Vec<Vec<S>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return arg("points have differing dimensions");
        }
        Self::new(dim, points.into_iter().flatten().collect())
    }

    pub fn from_scalars(xs: &[S]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    /// Reads step `j` of an instance as the point `(losses[0][j], …, losses[m−1][j])`.
    pub fn from_instance_columns(inst: &Instance<S>) -> Self {
        let (m, n) = (inst.m(), inst.n());
        let data = (0..n).flat_map(|j| (0..m).map(move |i| (i, j))).map(|(i, j)| inst.loss(i, j)).collect();
        Self { dim: m, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, j: usize) -> &[S] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    /// Coordinate-wise average of the points in `win`.
    pub fn average(&self, win: WindowChoice) -> Result<Vec<S>> {
        win.validate(self.len())?;
        let mut acc = vec![S::zero(); self.dim];
        for j in win.t..win.end() {
            for (a, &x) in acc.iter_mut().zip(self.point(j)) {
                *a = *a + x;
            }
        }
        let w = S::from_count(win.w);
        Ok(acc.into_iter().map(|a| a / w).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanPrediction<S = f64> {
    pub draw: ScaleDraw,
    /// The window whose average is predicted.
    pub window: WindowChoice,
    pub estimate: Vec<S>,
}

/// The scale-sampling mean predictor: predict that the next `2^{k'-1}`
/// points average to the average of the previous `2^{k'-1}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeanPredictor;

impl WindowLaw for MeanPredictor {
    type Draw = ScaleDraw;

    fn name(&self) -> &'static str {
        "mean_predict"
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

impl MeanPredictor {
    pub fn predict<S: Scalar>(&self, seq: &PointSequence<S>, draw: &ScaleDraw) -> Result<MeanPrediction<S>> {
        Ok(MeanPrediction { draw: *draw, window: draw.predicted(), estimate: seq.average(draw.observed())? })
    }

    /// f-loss of the prediction against the realized window average.
    pub fn loss<S: Scalar>(
        &self,
        f: &dyn ConvexSpec<S>,
        seq: &PointSequence<S>,
        pred: &MeanPrediction<S>,
    ) -> Result<S> {
        let actual = seq.average(pred.window)?;
        f_loss(f, &pred.estimate, &actual)
    }
}

pub fn mean_predict<S: Scalar>(seq: &PointSequence<S>, rng: &mut dyn RngCore) -> Result<MeanPrediction<S>> {
    if seq.is_empty() {
        return arg("cannot predict on an empty sequence");
    }
    let draw = MeanPredictor.sample_draw(seq.len(), rng)?;
    MeanPredictor.predict(seq, &draw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn affine() -> CustomConvex {
        CustomConvex {
            name: "affine".into(),
            domain: Domain::unit_box(3),
            value: Box::new(|x| 0.5 + x[0] - 2.0 * x[1] + 0.25 * x[2]),
            gradient: Box::new(|_| vec![1.0, -2.0, 0.25]),
            c0: 3.25,
            c1: 0.0,
            f_inf: -1.5,
        }
    }

    #[test]
    fn bregman_examples() {
        let q = Quadratic::<f64>::unit(2);
        assert_eq!(bregman(&q, &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(bregman(&q, &[0.3, 0.6], &[0.3, 0.6]).unwrap(), 0.0);
        let lse = LogSumExp::<f64>::new(1, 1.0).unwrap();
        for (x, y) in [(0.0, 1.0), (0.3, 0.9), (1.0, 0.2)] {
            assert!(bregman(&lse, &[x], &[y]).unwrap().abs() < 1e-15);
        }
        let lse3 = LogSumExp::<f64>::new(3, 2.0).unwrap();
        let x = [0.1, 0.5, 0.9];
        assert!(bregman(&lse3, &x, &x).unwrap().abs() < 1e-15);
        assert!(bregman(&q, &[1.5, 0.0], &[0.0, 0.0]).is_err());
        assert!(bregman(&q, &[0.5], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn f_loss_examples() {
        let q = Quadratic::<f64>::unit(1);
        let l = f_loss(&q, &[0.2], &[0.7]).unwrap();
        assert!((l - 0.25).abs() < 1e-15);
        assert_eq!(f_loss(&q, &[0.4], &[0.4]).unwrap(), 0.0);
        let lse = LogSumExp::<f64>::new(4, 1.5).unwrap();
        let mut rng = seeded(1);
        for _ in 0..100 {
            let a = lse.domain().sample(&mut rng);
            let b = lse.domain().sample(&mut rng);
            let ab = f_loss(&lse, &a, &b).unwrap();
            let ba = f_loss(&lse, &b, &a).unwrap();
            assert!((ab - ba).abs() <= 1e-12);
            let direct = bregman(&lse, &a, &b).unwrap() + bregman(&lse, &b, &a).unwrap();
            assert!((ab - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn builtin_constants() {
        let q = Quadratic::<f64>::unit(1);
        assert_eq!((q.f_max(), q.c0(), q.c1()), (0.5, 0.5, 0.0));
        let q = Quadratic::on_box(vec![-1.0, 0.5], vec![0.5, 2.0]).unwrap();
        assert_eq!(q.f_max(), 0.5 + 2.0);
        assert_eq!(q.c0(), 2.5 - 0.125);
        let lse = LogSumExp::new(4, 2.0).unwrap();
        assert!((lse.f_max() - 4f64.ln()).abs() < 1e-15);
        assert_eq!((lse.c0(), lse.c1()), (2.0, 8.0));
        assert!((lse.value(&[0.0; 4]) - 4f64.ln()).abs() < 1e-15);
        assert!((lse.value(&[1.0; 4]) - (4f64.ln() - 2.0)).abs() < 1e-15);
        assert!(LogSumExp::new(0, 1.0).is_err());
        assert!(LogSumExp::new(2, 0.0).is_err());
    }

    #[test]
    fn log_sum_exp_is_stable_for_large_alpha() {
        let lse = LogSumExp::new(2, 2000.0).unwrap();
        let v = lse.value(&[0.5, 0.75]);
        assert!((v - (-1000.0 + (1.0 + (-500.0f64).exp()).ln())).abs() < 1e-9);
        assert!(lse.gradient(&[0.5, 0.75]).iter().all(|g| g.is_finite()));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(2);
        assert!(gradient_consistency(&Quadratic::<f64>::unit(3), 200, 1e-6, &mut rng) < 1e-5);
        for alpha in [0.5, 1.0, 4.0] {
            let lse = LogSumExp::new(5, alpha).unwrap();
            assert!(gradient_consistency(&lse, 200, 1e-6, &mut rng) < 1e-5);
        }
        assert!(gradient_consistency(&affine(), 50, 1e-6, &mut rng) < 1e-5);
    }

    #[test]
    fn c0_dominates_observed_range() {
        let mut rng = seeded(3);
        let lse = LogSumExp::new(3, 2.0).unwrap();
        assert!(observed_range(&lse, 2000, &mut rng) <= lse.c0());
        let q = Quadratic::<f64>::unit(4);
        assert!(observed_range(&q, 2000, &mut rng) <= q.c0());
        let a = affine();
        assert!(observed_range(&a, 2000, &mut rng) <= a.c0());
    }

    #[test]
    fn certify_degenerate_cases_return_zero() {
        let mut rng = seeded(4);
        let cfg = CertifyConfig { trials: 50, grid: 10, ..Default::default() };
        let q = certify_self_concordance(&Quadratic::<f64>::unit(3), cfg, &mut rng).unwrap();
        assert!(q.max_ratio < 1e-3, "quadratic ratio {}", q.max_ratio);
        let a = certify_self_concordance(&affine(), cfg, &mut rng).unwrap();
        assert_eq!(a.max_ratio, 0.0);
        assert_eq!(a.points_used, 0);
        assert_eq!(a.points_skipped, 500);
    }

    #[test]
    fn certify_log_sum_exp_within_four_alpha() {
        let mut rng = seeded(5);
        let lse = LogSumExp::new(3, 2.0).unwrap();
        let cert = certify_self_concordance(&lse, CertifyConfig::default(), &mut rng).unwrap();
        assert!(cert.max_ratio <= 8.0 * (1.0 + 1e-2), "ratio {}", cert.max_ratio);
        assert!(cert.points_used > 0 && cert.witness.is_some());
    }

    #[test]
    fn certify_reports_non_finite_derivatives() {
        let bad = CustomConvex {
            name: "nan".into(),
            domain: Domain::unit_box(1),
            value: Box::new(|x: &[f64]| x[0]),
            gradient: Box::new(|_: &[f64]| vec![f64::NAN]),
            c0: 1.0,
            c1: 0.0,
            f_inf: 0.0,
        };
        let err = certify_self_concordance(&bad, CertifyConfig { trials: 1, grid: 3, ..Default::default() }, &mut seeded(0));
        assert!(matches!(err, Err(Error::Numeric { .. })));
    }

    #[test]
    fn closed_form_matches_cumulants() {
        // g'' is α² times the P-variance of Δ, g''' is −α³ times its third central moment.
        let lse = LogSumExp::new(4, 1.7).unwrap();
        let mut rng = seeded(6);
        for _ in 0..100 {
            let x = lse.domain().sample(&mut rng);
            let y = lse.domain().sample(&mut rng);
            let t = rng.gen::<f64>();
            let (g1, g2, g3) = lse.segment_derivatives(&x, &y, t);
            let delta: Vec<f64> = y.iter().zip(&x).map(|(b, a)| b - a).collect();
            let p: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            let w = lse.weights(&p);
            let mean: f64 = w.iter().zip(&delta).map(|(a, d)| a * d).sum();
            let var: f64 = w.iter().zip(&delta).map(|(a, d)| a * (d - mean).powi(2)).sum();
            let m3: f64 = w.iter().zip(&delta).map(|(a, d)| a * (d - mean).powi(3)).sum();
            assert!((g1 + 1.7 * mean).abs() < 1e-12);
            assert!((g2 - 1.7f64.powi(2) * var).abs() < 1e-12);
            assert!((g3 + 1.7f64.powi(3) * m3).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma4_examples() {
        let q = Quadratic::<f64>::unit(3);
        let u = [0.1, 0.8, 0.4];
        let v = [0.9, 0.2, 0.4];
        let s = lemma4_check(&q, &u, &v).unwrap();
        let sq: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((s.lhs - sq).abs() < 1e-12 && (s.rhs - sq).abs() < 1e-12);
        let s = lemma4_check(&q, &u, &u).unwrap();
        assert_eq!((s.lhs, s.rhs), (0.0, 0.0));
        let lse = LogSumExp::new(4, 1.0).unwrap();
        let mut rng = seeded(7);
        for _ in 0..1000 {
            let a = lse.domain().sample(&mut rng);
            let b = lse.domain().sample(&mut rng);
            assert!(lemma4_check(&lse, &a, &b).unwrap().holds(1e-9));
        }
    }

    #[test]
    fn mean_predict_examples() {
        let mut rng = seeded(8);
        let constant = PointSequence::from_scalars(&[0.3; 16]).unwrap();
        let q = Quadratic::<f64>::unit(1);
        for _ in 0..50 {
            let p = mean_predict(&constant, &mut rng).unwrap();
            assert_eq!(p.estimate, vec![0.3]);
            assert_eq!(MeanPredictor.loss(&q, &constant, &p).unwrap(), 0.0);
        }
        let two = PointSequence::from_scalars(&[0.2, 0.9]).unwrap();
        for _ in 0..10 {
            let p = mean_predict(&two, &mut rng).unwrap();
            assert_eq!(p.draw, ScaleDraw { k_prime: 1, t: 0 });
            assert_eq!(p.window, WindowChoice::new(1, 1));
            assert_eq!(p.estimate, vec![0.2]);
        }
        assert!(mean_predict(&PointSequence::<f64>::from_scalars(&[0.5]).unwrap(), &mut rng).is_err());
        assert!(PointSequence::<f64>::from_scalars(&[]).is_err());
    }

    #[test]
    fn point_sequence_from_instance_columns() {
        let inst = Instance::<f64>::from_rows(vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]]).unwrap();
        let seq = PointSequence::from_instance_columns(&inst);
        assert_eq!((seq.dim(), seq.len()), (2, 3));
        assert_eq!(seq.point(1), &[0.2, 0.5]);
        let avg = seq.average(WindowChoice::new(0, 2)).unwrap();
        assert!((avg[0] - 0.15).abs() < 1e-15 && (avg[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn simplex_domain_sampling() {
        let d = Domain::<f64>::Simplex { dim: 4 };
        let mut rng = seeded(9);
        for _ in 0..100 {
            assert!(d.contains(&d.sample(&mut rng)));
        }
        assert!(!d.contains(&[0.5, 0.5, 0.5, -0.5]));
    }
}
