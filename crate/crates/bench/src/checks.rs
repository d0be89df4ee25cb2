//! Built-in corpora and the `check` suites.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use selective_core::adversaries::GeneratorSpec;
use selective_core::algorithms::{HybridParams, Rate};
use selective_core::convexity::{
    certify_self_concordance, lemma4_check, CertifyConfig, ConvexSpec, LogSumExp, PointSequence, Quadratic,
};
use selective_core::oracle::{check_experts_all, check_lemma1, check_theorem5, exact_mean_loss, INEQUALITY_TOL};
use selective_core::rng::{derive_seed, keyed, lane};
use selective_core::Instance;

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemma1,
    Experts,
    Theorem5,
    Lemma4,
    Selfconc,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lemma1, Suite::Experts, Suite::Theorem5, Suite::Lemma4, Suite::Selfconc];

    pub fn parse(s: &str) -> Result<Self, BenchError> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown suite '{s}' (expected lemma1, experts, theorem5, lemma4 or selfconc)")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Experts => "experts",
            Suite::Theorem5 => "theorem5",
            Suite::Lemma4 => "lemma4",
            Suite::Selfconc => "selfconc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub case: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub checks: usize,
    pub violations: usize,
    /// The first few violations.
    pub witnesses: Vec<Witness>,
    pub stats: BTreeMap<String, f64>,
}

const MAX_WITNESSES: usize = 20;

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self { suite, cases: 0, checks: 0, violations: 0, witnesses: vec![], stats: BTreeMap::new() }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn record(&mut self, holds: bool, witness: impl FnOnce() -> Witness) {
        self.checks += 1;
        if !holds {
            self.violations += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(witness());
            }
        }
    }

    fn stat_max(&mut self, key: &str, v: f64) {
        let e = self.stats.entry(key.to_string()).or_insert(f64::NEG_INFINITY);
        *e = e.max(v);
    }

    fn merge(&mut self, other: SuiteReport) {
        self.cases += other.cases;
        self.checks += other.checks;
        self.violations += other.violations;
        for w in other.witnesses {
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(w);
            }
        }
        for (k, v) in other.stats {
            self.stat_max(&k, v);
        }
    }
}

/// Random instances with `n ∈ [16, 256]` and `m ∈ [2, 8]`, cycling through
/// uniform, Bernoulli, block, realizable and tree generators.
pub fn instance_corpus(seed: u64, count: usize) -> Result<Vec<(GeneratorSpec, Instance)>, BenchError> {
    (0..count)
        .map(|i| {
            let mut rng = keyed(seed, lane::CORPUS, i as u64);
            let n: usize = rng.gen_range(16..=256);
            let m: usize = rng.gen_range(2..=8);
            let s = derive_seed(seed, lane::INSTANCE, i as u64);
            let spec = match i % 5 {
                0 => GeneratorSpec::Uniform { n, m, seed: s },
                1 => GeneratorSpec::Bernoulli { n, m, p: rng.gen_range(0.1..0.9), seed: s },
                2 => GeneratorSpec::Block { n, m, l: 4 << rng.gen_range(0..5), seed: s },
                3 => GeneratorSpec::RealizableRandom { n, m, density: rng.gen_range(0.05..0.6), seed: s },
                _ => GeneratorSpec::Tree { k: rng.gen_range(4..=8), m, seed: s },
            };
            let inst = spec.generate()?;
            Ok((spec, inst))
        })
        .collect()
}

pub const CORPUS_SIZE: usize = 500;
pub const DELTAS: [u32; 3] = [1, 2, 3];
pub const ETAS: [Rate<f64>; 3] = [Rate::Fixed(0.25), Rate::Auto, Rate::Fixed(2.0)];

fn eta_label(eta: Rate<f64>) -> String {
    match eta {
        Rate::Auto => "auto".into(),
        Rate::Fixed(e) => e.to_string(),
    }
}

fn lemma1_suite(seed: u64) -> Result<SuiteReport, BenchError> {
    let corpus = instance_corpus(seed, CORPUS_SIZE)?;
    let parts: Vec<Result<SuiteReport, BenchError>> = corpus
        .par_iter()
        .map(|(spec, inst)| {
            let mut rep = SuiteReport::new(Suite::Lemma1);
            rep.cases = 1;
            for delta in DELTAS {
                for eta in ETAS {
                    let r = check_lemma1(inst, delta, eta)?;
                    for row in &r.rows {
                        rep.stat_max("max_lhs_minus_rhs", row.verdict.lhs - row.verdict.rhs);
                        rep.record(row.verdict.holds, || Witness {
                            case: format!("{} Δ={delta} η={} i={}", spec.to_json(), eta_label(eta), row.i),
                            lhs: row.verdict.lhs,
                            rhs: row.verdict.rhs,
                        });
                    }
                    let (avg, tele) = (r.average_rhs(), r.telescoped_rhs(inst.m()));
                    rep.stat_max("max_aggregate_identity_error", (avg - tele).abs());
                    rep.record((avg - tele).abs() <= INEQUALITY_TOL, || Witness {
                        case: format!("{} Δ={delta} η={} averaged right-hand side", spec.to_json(), eta_label(eta)),
                        lhs: avg,
                        rhs: tele,
                    });
                }
            }
            Ok(rep)
        })
        .collect();
    collect(Suite::Lemma1, parts)
}

fn experts_suite(seed: u64) -> Result<SuiteReport, BenchError> {
    let corpus = instance_corpus(seed, CORPUS_SIZE)?;
    let parts: Vec<Result<SuiteReport, BenchError>> = corpus
        .par_iter()
        .map(|(spec, inst)| {
            let mut rep = SuiteReport::new(Suite::Experts);
            rep.cases = 1;
            for delta in DELTAS {
                for eta in ETAS {
                    let eta_value = HybridParams::new(delta, eta)?.eta_for(inst.m());
                    let (count, failure) = check_experts_all(inst, delta, eta_value)?;
                    rep.checks += count - usize::from(failure.is_some());
                    if let Some((w, t0, c)) = failure {
                        rep.record(false, || Witness {
                            case: format!("{} Δ={delta} η={} w={w} t0={t0}", spec.to_json(), eta_label(eta)),
                            lhs: c.ew_avg_loss,
                            rhs: c.bound,
                        });
                    }
                }
            }
            Ok(rep)
        })
        .collect();
    collect(Suite::Experts, parts)
}

fn collect(suite: Suite, parts: Vec<Result<SuiteReport, BenchError>>) -> Result<SuiteReport, BenchError> {
    let mut rep = SuiteReport::new(suite);
    for p in parts {
        rep.merge(p?);
    }
    Ok(rep)
}

/// Built-in convex functions for the mean-prediction bound.
pub fn theorem5_functions() -> Vec<(String, Box<dyn ConvexSpec<f64>>)> {
    let mut fs: Vec<(String, Box<dyn ConvexSpec<f64>>)> = vec![("quadratic d=1".into(), Box::new(Quadratic::unit(1)))];
    for alpha in [0.5, 1.0, 2.0] {
        for d in [2, 4] {
            fs.push((format!("lse α={alpha} d={d}"), Box::new(LogSumExp::new(d, alpha).expect("valid"))));
        }
    }
    fs
}

pub const SEQUENCES_PER_SETTING: usize = 100;

/// Random sequences of length `2^k`, `k ∈ [1, 10]`: uniform points, binary
/// points, and every tenth sequence constant.
pub fn sequence_corpus(seed: u64, dim: usize, count: usize) -> Vec<PointSequence<f64>> {
    (0..count)
        .map(|i| {
            let mut rng = keyed(seed, lane::CORPUS, i as u64);
            let k = rng.gen_range(1..=10u32);
            let n = 1usize << k;
            let data: Vec<f64> = if i % 10 == 9 {
                let c: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
                c.iter().copied().cycle().take(n * dim).collect()
            } else if i % 2 == 0 {
                (0..n * dim).map(|_| rng.gen()).collect()
            } else {
                (0..n * dim).map(|_| f64::from(u8::from(rng.gen::<bool>()))).collect()
            };
            PointSequence::new(dim, data).expect("non-empty")
        })
        .collect()
}

fn theorem5_suite(seed: u64) -> Result<SuiteReport, BenchError> {
    let fs = theorem5_functions();
    let parts: Vec<Result<SuiteReport, BenchError>> = fs
        .par_iter()
        .enumerate()
        .map(|(j, (name, f))| {
            let mut rep = SuiteReport::new(Suite::Theorem5);
            for (i, seq) in sequence_corpus(derive_seed(seed, lane::CORPUS, j as u64), f.dim(), SEQUENCES_PER_SETTING)
                .iter()
                .enumerate()
            {
                rep.cases += 1;
                let v = check_theorem5(seq, f.as_ref())?;
                rep.stat_max("max_lhs_minus_rhs", v.lhs - v.rhs);
                if v.rhs > 0.0 {
                    rep.stat_max("max_lhs_over_rhs", v.lhs / v.rhs);
                }
                rep.record(v.holds, || Witness { case: format!("{name} sequence {i} (n={})", seq.len()), lhs: v.lhs, rhs: v.rhs });
                if i % 10 == 9 {
                    let loss = exact_mean_loss(seq, f.as_ref())?.total;
                    rep.stat_max("max_constant_sequence_loss", loss);
                }
            }
            Ok(rep)
        })
        .collect();
    collect(Suite::Theorem5, parts)
}

pub const PAIRS_PER_FUNCTION: usize = 10_000;

/// Built-in functions for the symmetric-Bregman bound.
pub fn lemma4_functions() -> Vec<(String, Box<dyn ConvexSpec<f64>>)> {
    let mut fs: Vec<(String, Box<dyn ConvexSpec<f64>>)> = Vec::new();
    for d in [1, 3, 5] {
        fs.push((format!("quadratic d={d}"), Box::new(Quadratic::unit(d))));
    }
    for alpha in [0.5, 1.0, 2.0, 4.0] {
        for d in [2, 3, 5] {
            fs.push((format!("lse α={alpha} d={d}"), Box::new(LogSumExp::new(d, alpha).expect("valid"))));
        }
    }
    fs
}

fn lemma4_suite(seed: u64) -> Result<SuiteReport, BenchError> {
    let fs = lemma4_functions();
    let parts: Vec<Result<SuiteReport, BenchError>> = fs
        .par_iter()
        .enumerate()
        .map(|(j, (name, f))| {
            let mut rep = SuiteReport::new(Suite::Lemma4);
            rep.cases = 1;
            let mut rng = keyed(seed, lane::CORPUS, j as u64);
            let quadratic = name.starts_with("quadratic");
            for i in 0..PAIRS_PER_FUNCTION {
                let u = f.domain().sample(&mut rng);
                let v = if i % 4 == 3 {
                    // Nearby pairs exercise the small-difference regime.
                    u.iter().map(|&x| (x + rng.gen_range(-1e-3..1e-3)).clamp(0.0, 1.0)).collect()
                } else {
                    f.domain().sample(&mut rng)
                };
                let s = lemma4_check(f.as_ref(), &u, &v)?;
                rep.stat_max("max_lhs_minus_rhs", s.lhs - s.rhs);
                rep.record(s.holds(INEQUALITY_TOL), || Witness { case: format!("{name} u={u:?} v={v:?}"), lhs: s.lhs, rhs: s.rhs });
                if quadratic {
                    let gap = (s.lhs - s.rhs).abs();
                    rep.stat_max("quadratic_max_abs_gap", gap);
                    rep.record(gap <= INEQUALITY_TOL, || Witness {
                        case: format!("{name} equality u={u:?} v={v:?}"),
                        lhs: s.lhs,
                        rhs: s.rhs,
                    });
                }
            }
            Ok(rep)
        })
        .collect();
    collect(Suite::Lemma4, parts)
}

pub const SELFCONC_ALPHAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const SELFCONC_DIMS: [usize; 3] = [2, 3, 5];
pub const SELFCONC_SLACK: f64 = 1e-2;

fn selfconc_suite(seed: u64) -> Result<SuiteReport, BenchError> {
    let settings: Vec<(f64, usize)> =
        SELFCONC_ALPHAS.iter().flat_map(|&a| SELFCONC_DIMS.iter().map(move |&d| (a, d))).collect();
    let parts: Vec<Result<SuiteReport, BenchError>> = settings
        .par_iter()
        .enumerate()
        .map(|(j, &(alpha, d))| {
            let mut rep = SuiteReport::new(Suite::Selfconc);
            rep.cases = 1;
            let f = LogSumExp::new(d, alpha)?;
            let mut rng = keyed(seed, lane::CORPUS, j as u64);
            let cert = certify_self_concordance(&f, CertifyConfig::default(), &mut rng)?;
            let limit = 4.0 * alpha * (1.0 + SELFCONC_SLACK);
            rep.stat_max(&format!("ratio_over_4alpha α={alpha} d={d}"), cert.max_ratio / (4.0 * alpha));
            rep.stat_max("max_ratio_over_4alpha", cert.max_ratio / (4.0 * alpha));
            rep.record(cert.max_ratio <= limit, || Witness {
                case: format!("lse α={alpha} d={d} witness {:?}", cert.witness),
                lhs: cert.max_ratio,
                rhs: limit,
            });
            Ok(rep)
        })
        .collect();
    collect(Suite::Selfconc, parts)
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport, BenchError> {
    match suite {
        Suite::Lemma1 => lemma1_suite(seed),
        Suite::Experts => experts_suite(seed),
        Suite::Theorem5 => theorem5_suite(seed),
        Suite::Lemma4 => lemma4_suite(seed),
        Suite::Selfconc => selfconc_suite(seed),
    }
}
