//! Sweep execution.
//!
//! Every point gets a seed derived from the master seed and the point's
//! canonical key, and trial `i` of a point uses the instance seed
//! `derive_seed(point_seed, INSTANCE, i)` and the algorithm stream
//! `keyed(point_seed, ALGORITHM, i)`. Jobs run on a worker pool but results
//! are collected in `(point, trial)` order, so output does not depend on
//! scheduling.

use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use selective_core::adversaries::{estimate_window_law, GeneratorSpec};
use selective_core::algorithms::{BoundedRecallEw, BoundedRecallParams, Erm, HybridEw, Learner, RealizableLearner, WindowLaw};
use selective_core::convexity::{mean_predict, MeanPredictor, PointSequence};
use selective_core::instance::excess_risk;
use selective_core::oracle::{check_lemma1, check_theorem5, exact_mean_loss, exact_risk, RiskReport, ENUMERATION_CAP};
use selective_core::rng::{derive_seed, keyed, lane};
use selective_core::{Error, Instance};

use crate::config::{AdversaryKind, AlgKind, ExperimentConfig, Indices, Mode, ResolvedAlg, SweepPoint, WINDOW_LAW_SAMPLES};
use crate::BenchError;

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub algorithm: &'static str,
    pub n: usize,
    pub m: usize,
    pub delta: Option<u32>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub adversary: String,
    pub seed: u64,
    pub mode: &'static str,
    pub excess_risk: f64,
    pub stderr: Option<f64>,
    pub wall_ms: Option<f64>,
}

/// A per-row inequality check recorded in the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowVerdict {
    pub row: usize,
    pub check: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub verdicts: Vec<RowVerdict>,
    /// Wall-clock time per row in milliseconds.
    pub timings_ms: Vec<f64>,
    /// Interval indices chosen for `indices=auto`, per `n`.
    pub resolved_indices: Vec<(usize, Vec<u32>)>,
}

/// 64-bit FNV-1a, used to turn a point key into a stable integer.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub fn point_seed(master: u64, key: &str) -> u64 {
    derive_seed(master, lane::SWEEP, stable_hash(key))
}

/// Indices for the bounded-recall mixture: the `log2 m` heaviest intervals of
/// the bounded-recall window law at horizon `n`, estimated by Monte Carlo.
pub fn auto_indices(master: u64, n: usize, m: usize) -> Result<Vec<u32>, BenchError> {
    let law = BoundedRecallEw::<f64>::new(BoundedRecallParams::default());
    let seed = derive_seed(master, lane::SWEEP, stable_hash(&format!("window_law|n={n}")));
    let est = estimate_window_law(&law, n, WINDOW_LAW_SAMPLES, seed)?;
    Ok(est.heaviest_intervals(m.trailing_zeros() as usize))
}

fn alg_atoms(alg: &ResolvedAlg, n: usize) -> Result<u128, Error> {
    match alg {
        ResolvedAlg::Hybrid(p) => HybridEw::new(*p).atom_count(n),
        ResolvedAlg::BoundedRecall(p) => BoundedRecallEw::new(*p).atom_count(n),
        ResolvedAlg::Erm => Erm.atom_count(n),
        ResolvedAlg::Realizable => RealizableLearner.atom_count(n),
        ResolvedAlg::MeanPredict(_) => MeanPredictor.atom_count(n),
    }
}

fn alg_check(alg: &ResolvedAlg, inst: &Instance) -> Result<(), Error> {
    match alg {
        ResolvedAlg::Hybrid(p) => HybridEw::new(*p).check(inst),
        ResolvedAlg::Realizable => Learner::<f64>::check(&RealizableLearner, inst),
        _ => Ok(()),
    }
}

pub fn exact_value(alg: &ResolvedAlg, inst: &Instance) -> Result<f64, BenchError> {
    Ok(match alg {
        ResolvedAlg::Hybrid(p) => exact_risk(&HybridEw::new(*p), inst)?.total,
        ResolvedAlg::BoundedRecall(p) => exact_risk(&BoundedRecallEw::new(*p), inst)?.total,
        ResolvedAlg::Erm => exact_risk(&Erm, inst)?.total,
        ResolvedAlg::Realizable => exact_risk(&RealizableLearner, inst)?.total,
        ResolvedAlg::MeanPredict(c) => {
            let f = c.build(inst.m())?;
            exact_mean_loss(&PointSequence::from_instance_columns(inst), f.as_ref())?.total
        }
    })
}

pub fn sampled_value(alg: &ResolvedAlg, inst: &Instance, rng: &mut dyn RngCore) -> Result<f64, BenchError> {
    let dec = match alg {
        ResolvedAlg::Hybrid(p) => HybridEw::new(*p).run(inst, rng)?,
        ResolvedAlg::BoundedRecall(p) => BoundedRecallEw::new(*p).run(inst, rng)?,
        ResolvedAlg::Erm => Learner::<f64>::run(&Erm, inst, rng)?,
        ResolvedAlg::Realizable => Learner::<f64>::run(&RealizableLearner, inst, rng)?,
        ResolvedAlg::MeanPredict(c) => {
            let f = c.build(inst.m())?;
            let seq = PointSequence::from_instance_columns(inst);
            let pred = mean_predict(&seq, rng)?;
            return Ok(MeanPredictor.loss(f.as_ref(), &seq, &pred)?);
        }
    };
    Ok(excess_risk(inst, &dec)?)
}

fn row_verdict(alg: &ResolvedAlg, inst: &Instance, risk: f64) -> Result<Option<(&'static str, f64, f64, bool)>, BenchError> {
    Ok(match alg {
        ResolvedAlg::Realizable => {
            let bound = (inst.m() as f64).ln() / inst.n() as f64;
            Some(("realizable_bound", risk, bound, risk <= bound + 1e-12))
        }
        ResolvedAlg::MeanPredict(c) if inst.n() >= 2 && inst.n().is_power_of_two() => {
            let f = c.build(inst.m())?;
            let v = check_theorem5(&PointSequence::from_instance_columns(inst), f.as_ref())?;
            Some(("mean_prediction_bound", v.lhs, v.rhs, v.holds))
        }
        ResolvedAlg::Hybrid(p) => {
            let r = check_lemma1(inst, p.delta, p.eta)?;
            let worst = r
                .rows
                .iter()
                .map(|row| row.verdict.lhs - row.verdict.rhs)
                .fold(f64::NEG_INFINITY, f64::max);
            Some(("per_scale_bound_max_gap", worst, 0.0, r.holds()))
        }
        _ => None,
    })
}

/// A validated point ready to run.
struct Plan {
    point: SweepPoint,
    alg: ResolvedAlg,
    seed: u64,
    spec: Option<GeneratorSpec>,
    label: String,
    jobs: usize,
}

impl Plan {
    fn instance(&self, file: Option<&Instance>, trial: u64) -> Result<Instance, BenchError> {
        match (&self.spec, file) {
            (Some(spec), _) => Ok(spec.with_seed(derive_seed(self.seed, lane::INSTANCE, trial)).generate()?),
            (None, Some(inst)) => Ok(inst.clone()),
            (None, None) => Err(BenchError::Config("no instance source".into())),
        }
    }

    fn instance_seed(&self, trial: u64) -> u64 {
        match &self.spec {
            Some(s) if s.seed().is_some() => derive_seed(self.seed, lane::INSTANCE, trial),
            _ => self.seed,
        }
    }
}

fn thread_count() -> Option<usize> {
    std::env::var("SELECTIVE_BENCH_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&t: &usize| t > 0)
}

fn plan(cfg: &ExperimentConfig, file: Option<&Instance>) -> Result<(Vec<Plan>, Vec<(usize, Vec<u32>)>), BenchError> {
    if cfg.trials == 0 {
        return Err(BenchError::Config("--trials must be at least 1".into()));
    }
    if cfg.alg != AlgKind::MeanPredict && cfg.convex.is_some() {
        return Err(BenchError::Config("--convex only applies to mean_predict".into()));
    }
    let fixed = cfg.adversary.fixed_shape();
    let threshold = matches!(cfg.adversary, AdversaryKind::Threshold);
    if fixed && (!cfg.n.is_empty() || !cfg.m.is_empty()) {
        return Err(BenchError::Config(format!("--n/--m cannot be combined with {}", cfg.adversary.label())));
    }
    if !fixed && cfg.n.is_empty() {
        return Err(BenchError::Config("--n is required".into()));
    }
    if threshold && !cfg.m.is_empty() {
        return Err(BenchError::Config("threshold fixes m = n + 1; drop --m".into()));
    }
    if !fixed && !threshold && cfg.m.is_empty() {
        return Err(BenchError::Config("--m is required".into()));
    }
    let shape = match (&cfg.adversary, file) {
        (AdversaryKind::File { .. }, Some(inst)) => Some((inst.m(), inst.n())),
        (AdversaryKind::Bitstrings { rows }, _) => Some((rows.len(), rows.first().map_or(0, String::len))),
        _ => None,
    };
    let mut points = if threshold {
        ExperimentConfig { m: vec![0], ..cfg.clone() }.points(None)
    } else {
        cfg.points(shape)
    };
    if threshold {
        for p in &mut points {
            p.m = p.n + 1;
        }
    }
    let mut resolved = Vec::new();
    let label = cfg.adversary.label();
    let mut plans = Vec::new();
    for point in points {
        let key = point.key(cfg.alg, &cfg.adversary);
        let fail = |e: &dyn std::fmt::Display| BenchError::Config(format!("point {key}: {e}"));
        if point.n == 0 || point.m == 0 {
            return Err(fail(&"n and m must be positive"));
        }
        let alg = cfg.resolve(&point).map_err(|e| fail(&e))?;
        let seed = point_seed(cfg.seed, &key);
        let indices = match &cfg.adversary {
            AdversaryKind::BoundedRecallMix { indices: Indices::Auto } => {
                if !point.m.is_power_of_two() || point.n < 4 {
                    return Err(fail(&"bounded_recall_mix needs m a power of two and n ≥ 4"));
                }
                let v = match resolved.iter().find(|(n, v): &&(usize, Vec<u32>)| *n == point.n && v.len() == point.m.trailing_zeros() as usize) {
                    Some((_, v)) => v.clone(),
                    None => {
                        let v = auto_indices(cfg.seed, point.n, point.m).map_err(|e| fail(&e))?;
                        resolved.push((point.n, v.clone()));
                        v
                    }
                };
                Some(v)
            }
            _ => None,
        };
        let spec = match &cfg.adversary {
            AdversaryKind::File { .. } => None,
            adv => Some(adv.spec(point.n, point.m, 0, indices.as_deref()).map_err(|e| fail(&e))?),
        };
        if cfg.mode == Mode::Exact {
            let atoms = alg_atoms(&alg, point.n).map_err(|e| fail(&e))?;
            if atoms > ENUMERATION_CAP {
                return Err(fail(&Error::Resource { atoms, cap: ENUMERATION_CAP }));
            }
        }
        let may_fail_realizability = !cfg.adversary.always_realizable() && !cfg.adversary.fixed_shape();
        if alg == ResolvedAlg::Realizable && may_fail_realizability {
            return Err(fail(&format!("realizable_learner needs a realizable adversary, not {label}")));
        }
        let jobs = match (&cfg.mode, &spec) {
            (Mode::Exact, None) => 1,
            (Mode::Exact, Some(s)) if s.seed().is_none() => 1,
            _ => cfg.trials,
        };
        let p = Plan { point, alg, seed, spec, label: label.clone(), jobs };
        let probe = p.instance(file, 0).map_err(|e| fail(&e))?;
        if let ResolvedAlg::MeanPredict(_) = alg {
            if probe.n() < 2 {
                return Err(fail(&"mean_predict needs n ≥ 2"));
            }
        } else {
            alg_atoms(&alg, probe.n()).map_err(|e| fail(&e))?;
        }
        alg_check(&alg, &probe).map_err(|e| fail(&e))?;
        plans.push(p);
    }
    Ok((plans, resolved))
}

type JobResult = (f64, Option<(&'static str, f64, f64, bool)>, f64);

/// Validates every point, then runs the sweep.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, BenchError> {
    let file = cfg.load_file()?;
    let (plans, resolved_indices) = plan(cfg, file.as_ref())?;
    let jobs: Vec<(usize, u64)> =
        plans.iter().enumerate().flat_map(|(i, p)| (0..p.jobs as u64).map(move |t| (i, t))).collect();
    let exec = |&(i, trial): &(usize, u64)| -> Result<JobResult, BenchError> {
        let p = &plans[i];
        let start = Instant::now();
        let inst = p.instance(file.as_ref(), trial)?;
        let (value, verdict) = match cfg.mode {
            Mode::Exact => {
                let v = exact_value(&p.alg, &inst)?;
                (v, row_verdict(&p.alg, &inst, v)?)
            }
            Mode::MonteCarlo => {
                let mut rng = keyed(p.seed, lane::ALGORITHM, trial);
                (sampled_value(&p.alg, &inst, &mut rng)?, None)
            }
        };
        Ok((value, verdict, start.elapsed().as_secs_f64() * 1e3))
    };
    let results: Vec<Result<JobResult, BenchError>> = match thread_count() {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| BenchError::Config(format!("cannot start {t} workers: {e}")))?
            .install(|| jobs.par_iter().map(exec).collect()),
        None => jobs.par_iter().map(exec).collect(),
    };
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut out = RunOutput { rows: vec![], verdicts: vec![], timings_ms: vec![], resolved_indices };
    let mut cursor = 0;
    for p in &plans {
        let chunk = &results[cursor..cursor + p.jobs];
        cursor += p.jobs;
        let (delta, eta, alpha) = match p.alg {
            ResolvedAlg::Hybrid(h) => (Some(h.delta), Some(h.eta_for(p.point.m)), None),
            ResolvedAlg::BoundedRecall(b) => (None, None, Some(b.alpha_for(p.point.m, p.point.n))),
            _ => (None, None, None),
        };
        let base = Row {
            algorithm: cfg.alg.name(),
            n: p.point.n,
            m: p.point.m,
            delta,
            eta,
            alpha,
            adversary: p.label.clone(),
            seed: p.seed,
            mode: cfg.mode.name(),
            excess_risk: 0.0,
            stderr: None,
            wall_ms: None,
        };
        match cfg.mode {
            Mode::Exact => {
                for (t, (value, verdict, ms)) in chunk.iter().enumerate() {
                    let row = out.rows.len();
                    if let Some((check, lhs, rhs, holds)) = *verdict {
                        out.verdicts.push(RowVerdict { row, check, lhs, rhs, holds });
                    }
                    out.rows.push(Row {
                        seed: p.instance_seed(t as u64),
                        excess_risk: *value,
                        wall_ms: cfg.wall_clock.then_some(*ms),
                        ..base.clone()
                    });
                    out.timings_ms.push(*ms);
                }
            }
            Mode::MonteCarlo => {
                let samples: Vec<f64> = chunk.iter().map(|r| r.0).collect();
                let report = RiskReport::from_samples(&samples, p.seed);
                let ms: f64 = chunk.iter().map(|r| r.2).sum();
                out.rows.push(Row {
                    excess_risk: report.mean,
                    stderr: report.stderr,
                    wall_ms: cfg.wall_clock.then_some(ms),
                    ..base
                });
                out.timings_ms.push(ms);
            }
        }
    }
    Ok(out)
}
