//! Experiment configuration: algorithm and adversary descriptors, sweep axes,
//! and the plain-text config file.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use selective_core::adversaries::GeneratorSpec;
use selective_core::algorithms::{BoundedRecallParams, HybridParams, Rate};
use selective_core::convexity::{ConvexSpec, LogSumExp, Quadratic};
use selective_core::instance::floor_log2;
use selective_core::Instance;

use crate::BenchError;

fn config_err<T>(msg: impl Into<String>) -> Result<T, BenchError> {
    Err(BenchError::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgKind {
    HybridEw,
    BoundedRecallEw,
    Erm,
    RealizableLearner,
    MeanPredict,
}

impl AlgKind {
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        Ok(match s {
            "hybrid_ew" | "hybrid" => AlgKind::HybridEw,
            "bounded_recall_ew" | "br_ew" => AlgKind::BoundedRecallEw,
            "erm" => AlgKind::Erm,
            "realizable_learner" | "realizable" => AlgKind::RealizableLearner,
            "mean_predict" => AlgKind::MeanPredict,
            _ => {
                return config_err(format!(
                    "unknown algorithm '{s}' (expected hybrid_ew, bounded_recall_ew, erm, realizable_learner or mean_predict)"
                ))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgKind::HybridEw => "hybrid_ew",
            AlgKind::BoundedRecallEw => "bounded_recall_ew",
            AlgKind::Erm => "erm",
            AlgKind::RealizableLearner => "realizable_learner",
            AlgKind::MeanPredict => "mean_predict",
        }
    }
}

/// A sweep value that may be left for the algorithm to derive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Auto<T> {
    Auto,
    Value(T),
}

impl<T: fmt::Display> fmt::Display for Auto<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Auto::Auto => f.write_str("auto"),
            Auto::Value(v) => v.fmt(f),
        }
    }
}

fn parse_auto<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Auto<T>, BenchError> {
    if s == "auto" {
        return Ok(Auto::Auto);
    }
    s.parse().map(Auto::Value).or_else(|_| config_err(format!("--{flag}: cannot parse '{s}'")))
}

pub fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>, BenchError> {
    s.split(',')
        .map(|x| x.trim().parse().or_else(|_| config_err(format!("--{flag}: cannot parse '{x}'"))))
        .collect()
}

pub fn parse_auto_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<Auto<T>>, BenchError> {
    s.split(',').map(|x| parse_auto(flag, x.trim())).collect()
}

/// Convex function for `mean_predict`, instantiated at the instance's `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexChoice {
    Quadratic,
    LogSumExp { alpha: f64 },
}

impl ConvexChoice {
    /// `quadratic` or `lse:<alpha>`.
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        if s == "quadratic" {
            return Ok(ConvexChoice::Quadratic);
        }
        if let Some(a) = s.strip_prefix("lse:") {
            let alpha: f64 = a.parse().or_else(|_| config_err(format!("--convex: bad α '{a}'")))?;
            if !(alpha > 0.0 && alpha.is_finite()) {
                return config_err(format!("--convex: α must be positive (got {alpha})"));
            }
            return Ok(ConvexChoice::LogSumExp { alpha });
        }
        config_err(format!("--convex: expected 'quadratic' or 'lse:<alpha>', got '{s}'"))
    }

    pub fn build(self, dim: usize) -> Result<Box<dyn ConvexSpec<f64>>, BenchError> {
        Ok(match self {
            ConvexChoice::Quadratic => Box::new(Quadratic::unit(dim)),
            ConvexChoice::LogSumExp { alpha } => Box::new(LogSumExp::new(dim, alpha)?),
        })
    }
}

/// How the bounded-recall mixture picks its interval indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Indices {
    /// The `log2 m` heaviest intervals of the bounded-recall window law.
    Auto,
    Fixed(Vec<u32>),
}

/// Adversary descriptor without its shape; `n` and `m` come from the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    Zeros,
    Bernoulli { p: f64 },
    Uniform,
    Block { l: usize },
    Tree,
    BoundedRecallMix { indices: Indices },
    Threshold,
    RealizableRandom { density: f64 },
    Bitstrings { rows: Vec<String> },
    File { path: PathBuf },
}

/// Samples used to estimate the window law for `indices=auto`.
pub const WINDOW_LAW_SAMPLES: usize = 100_000;

impl AdversaryKind {
    /// `kind[:key=value,...]` or `file:<path>`.
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(AdversaryKind::File { path: PathBuf::from(path) });
        }
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params: Vec<(String, String)> = Vec::new();
        for item in rest.split(',').filter(|x| !x.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("--adversary: expected key=value, got '{item}'")))?;
            params.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut take = |key: &str| -> Option<String> {
            let pos = params.iter().position(|(k, _)| k == key)?;
            Some(params.remove(pos).1)
        };
        let num = |key: &str, v: Option<String>| -> Result<Option<f64>, BenchError> {
            v.map(|x| x.parse::<f64>().or_else(|_| config_err(format!("--adversary: bad {key} '{x}'")))).transpose()
        };
        let adv = match kind {
            "zeros" => AdversaryKind::Zeros,
            "uniform" => AdversaryKind::Uniform,
            "tree" => AdversaryKind::Tree,
            "threshold" => AdversaryKind::Threshold,
            "bernoulli" => AdversaryKind::Bernoulli { p: num("p", take("p"))?.unwrap_or(0.5) },
            "realizable_random" => {
                AdversaryKind::RealizableRandom { density: num("density", take("density"))?.unwrap_or(0.5) }
            }
            "block" => {
                let l = take("l").ok_or_else(|| BenchError::Config("--adversary block needs l=<int>".into()))?;
                AdversaryKind::Block { l: l.parse().or_else(|_| config_err(format!("--adversary: bad l '{l}'")))? }
            }
            "bounded_recall_mix" => {
                let indices = match take("indices").as_deref() {
                    None | Some("auto") => Indices::Auto,
                    Some(list) => Indices::Fixed(
                        list.split('/')
                            .map(|x| x.parse().or_else(|_| config_err(format!("--adversary: bad index '{x}'"))))
                            .collect::<Result<_, _>>()?,
                    ),
                };
                AdversaryKind::BoundedRecallMix { indices }
            }
            "bitstrings" => {
                let rows = take("rows").ok_or_else(|| BenchError::Config("--adversary bitstrings needs rows=<bits>/<bits>/...".into()))?;
                AdversaryKind::Bitstrings { rows: rows.split('/').map(str::to_string).collect() }
            }
            _ => return config_err(format!("unknown adversary kind '{kind}'")),
        };
        if let Some((k, _)) = params.first() {
            return config_err(format!("--adversary {kind}: unknown parameter '{k}'"));
        }
        Ok(adv)
    }

    /// Compact label for the CSV `adversary` column.
    pub fn label(&self) -> String {
        match self {
            AdversaryKind::Zeros => "zeros".into(),
            AdversaryKind::Uniform => "uniform".into(),
            AdversaryKind::Tree => "tree".into(),
            AdversaryKind::Threshold => "threshold".into(),
            AdversaryKind::Bernoulli { p } => format!("bernoulli:p={p}"),
            AdversaryKind::RealizableRandom { density } => format!("realizable_random:density={density}"),
            AdversaryKind::Block { l } => format!("block:l={l}"),
            AdversaryKind::BoundedRecallMix { indices: Indices::Auto } => "bounded_recall_mix:indices=auto".into(),
            AdversaryKind::BoundedRecallMix { indices: Indices::Fixed(v) } => format!(
                "bounded_recall_mix:indices={}",
                v.iter().map(u32::to_string).collect::<Vec<_>>().join("/")
            ),
            AdversaryKind::Bitstrings { rows } => format!("bitstrings:rows={}", rows.join("/")),
            AdversaryKind::File { path } => format!("file:{}", path.display()),
        }
    }

    /// Whether every generated instance has an all-zero row.
    pub fn always_realizable(&self) -> bool {
        matches!(self, AdversaryKind::Zeros | AdversaryKind::Threshold | AdversaryKind::RealizableRandom { .. })
    }

    /// Whether the shape is fixed by the adversary itself.
    pub fn fixed_shape(&self) -> bool {
        matches!(self, AdversaryKind::Bitstrings { .. } | AdversaryKind::File { .. })
    }

    /// Builds the generator for an `(n, m)` point; `resolved_indices` is used
    /// for `indices=auto`. Files are handled separately.
    pub fn spec(&self, n: usize, m: usize, seed: u64, resolved_indices: Option<&[u32]>) -> Result<GeneratorSpec, BenchError> {
        let pow2 = |what: &str| -> Result<u32, BenchError> {
            if n >= 2 && n.is_power_of_two() {
                Ok(floor_log2(n))
            } else {
                config_err(format!("{what} needs n a power of two ≥ 2 (got n={n})"))
            }
        };
        Ok(match self {
            AdversaryKind::Zeros => GeneratorSpec::Zeros { n, m },
            AdversaryKind::Uniform => GeneratorSpec::Uniform { n, m, seed },
            AdversaryKind::Bernoulli { p } => GeneratorSpec::Bernoulli { n, m, p: *p, seed },
            AdversaryKind::Block { l } => GeneratorSpec::Block { n, m, l: *l, seed },
            AdversaryKind::Tree => GeneratorSpec::Tree { k: pow2("tree")?, m, seed },
            AdversaryKind::BoundedRecallMix { indices } => {
                let k = pow2("bounded_recall_mix")?;
                let indices = match (indices, resolved_indices) {
                    (Indices::Fixed(v), _) => v.clone(),
                    (Indices::Auto, Some(v)) => v.to_vec(),
                    (Indices::Auto, None) => return config_err("interval indices were not resolved"),
                };
                GeneratorSpec::BoundedRecallMix { k, m, indices, seed }
            }
            AdversaryKind::Threshold => GeneratorSpec::Threshold { n, seed },
            AdversaryKind::RealizableRandom { density } => GeneratorSpec::RealizableRandom { n, m, density: *density, seed },
            AdversaryKind::Bitstrings { rows } => GeneratorSpec::Bitstrings { strings: rows.clone() },
            AdversaryKind::File { .. } => return config_err("file adversaries have no generator"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        match s {
            "exact" => Ok(Mode::Exact),
            "monte_carlo" | "mc" => Ok(Mode::MonteCarlo),
            _ => config_err(format!("--mode: expected exact or monte_carlo, got '{s}'")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::MonteCarlo => "monte_carlo",
        }
    }
}

/// A fully parsed `run` configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub alg: AlgKind,
    pub adversary: AdversaryKind,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub delta: Vec<Auto<u32>>,
    pub eta: Vec<Auto<f64>>,
    pub alpha: Vec<Auto<f64>>,
    /// Constant in the automatic α.
    pub alpha_c: f64,
    pub convex: Option<ConvexChoice>,
    pub mode: Mode,
    /// Monte Carlo trials per point, or instances per point in exact mode.
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub wall_clock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alg: AlgKind::Erm,
            adversary: AdversaryKind::Zeros,
            n: vec![],
            m: vec![],
            delta: vec![Auto::Auto],
            eta: vec![Auto::Auto],
            alpha: vec![Auto::Auto],
            alpha_c: 1.0,
            convex: None,
            mode: Mode::Exact,
            trials: 1,
            seed: 0,
            out: None,
            wall_clock: false,
        }
    }
}

/// Algorithm with its parameters resolved for one instance shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedAlg {
    Hybrid(HybridParams<f64>),
    BoundedRecall(BoundedRecallParams<f64>),
    Erm,
    Realizable,
    MeanPredict(ConvexChoice),
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: usize,
    pub m: usize,
    pub delta: Option<Auto<u32>>,
    pub eta: Option<Auto<f64>>,
    pub alpha: Option<Auto<f64>>,
}

impl SweepPoint {
    /// Canonical text used to derive the point's seed; independent of the
    /// point's position in the grid.
    pub fn key(&self, alg: AlgKind, adversary: &AdversaryKind) -> String {
        let opt = |x: Option<String>| x.unwrap_or_else(|| "-".into());
        format!(
            "{}|{}|n={}|m={}|delta={}|eta={}|alpha={}",
            alg.name(),
            adversary.label(),
            self.n,
            self.m,
            opt(self.delta.map(|d| d.to_string())),
            opt(self.eta.map(|d| d.to_string())),
            opt(self.alpha.map(|d| d.to_string())),
        )
    }
}

impl ExperimentConfig {
    /// Expands the sweep axes into points in canonical order.
    pub fn points(&self, file_shape: Option<(usize, usize)>) -> Vec<SweepPoint> {
        let (ns, ms) = match file_shape {
            Some((m, n)) => (vec![n], vec![m]),
            None => (self.n.clone(), self.m.clone()),
        };
        let deltas: Vec<Option<Auto<u32>>> =
            if self.alg == AlgKind::HybridEw { self.delta.iter().copied().map(Some).collect() } else { vec![None] };
        let etas: Vec<Option<Auto<f64>>> =
            if self.alg == AlgKind::HybridEw { self.eta.iter().copied().map(Some).collect() } else { vec![None] };
        let alphas: Vec<Option<Auto<f64>>> = if self.alg == AlgKind::BoundedRecallEw {
            self.alpha.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut out = Vec::new();
        for &n in &ns {
            for &m in &ms {
                for &delta in &deltas {
                    for &eta in &etas {
                        for &alpha in &alphas {
                            out.push(SweepPoint { n, m, delta, eta, alpha });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn resolve(&self, p: &SweepPoint) -> Result<ResolvedAlg, BenchError> {
        Ok(match self.alg {
            AlgKind::HybridEw => {
                let delta = match p.delta.unwrap_or(Auto::Auto) {
                    Auto::Auto => HybridParams::<f64>::auto_delta(p.m, p.n),
                    Auto::Value(d) => d,
                };
                let eta = match p.eta.unwrap_or(Auto::Auto) {
                    Auto::Auto => Rate::Auto,
                    Auto::Value(e) => Rate::Fixed(e),
                };
                ResolvedAlg::Hybrid(HybridParams::new(delta, eta)?)
            }
            AlgKind::BoundedRecallEw => {
                let alpha = match p.alpha.unwrap_or(Auto::Auto) {
                    Auto::Auto => Rate::Auto,
                    Auto::Value(a) => Rate::Fixed(a),
                };
                ResolvedAlg::BoundedRecall(BoundedRecallParams::new(alpha)?.with_c(self.alpha_c))
            }
            AlgKind::Erm => ResolvedAlg::Erm,
            AlgKind::RealizableLearner => ResolvedAlg::Realizable,
            AlgKind::MeanPredict => ResolvedAlg::MeanPredict(
                self.convex.ok_or_else(|| BenchError::Config("mean_predict needs --convex".into()))?,
            ),
        })
    }

    /// Loads the instance of a `file:` adversary.
    pub fn load_file(&self) -> Result<Option<Instance>, BenchError> {
        match &self.adversary {
            AdversaryKind::File { path } => {
                let f = std::fs::File::open(path)
                    .map_err(|e| BenchError::Config(format!("cannot open instance file {}: {e}", path.display())))?;
                Ok(Some(Instance::read_text(std::io::BufReader::new(f))?))
            }
            _ => Ok(None),
        }
    }
}

/// Config-file keys and whether they take a value.
const CONFIG_KEYS: &[(&str, bool)] = &[
    ("alg", true),
    ("adversary", true),
    ("n", true),
    ("m", true),
    ("delta", true),
    ("eta", true),
    ("alpha", true),
    ("alpha-c", true),
    ("convex", true),
    ("mode", true),
    ("trials", true),
    ("seed", true),
    ("out", true),
    ("wall-clock", false),
];

/// Turns `key = value` lines into command-line flags. Blank lines and lines
/// starting with `#` are skipped; unknown keys are errors.
pub fn config_file_args(text: &str) -> Result<Vec<String>, BenchError> {
    let mut args = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| BenchError::Config(format!("config line {}: expected 'key = value'", lineno + 1)))?;
        let key_norm = key.replace('_', "-");
        let Some(&(_, takes_value)) = CONFIG_KEYS.iter().find(|(k, _)| *k == key_norm) else {
            return config_err(format!("config line {}: unknown key '{key}'", lineno + 1));
        };
        if takes_value {
            args.push(format!("--{key_norm}"));
            args.push(value.to_string());
        } else {
            match value {
                "true" => args.push(format!("--{key_norm}")),
                "false" => {}
                _ => return config_err(format!("config line {}: '{key}' expects true or false", lineno + 1)),
            }
        }
    }
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adversary_parsing() {
        assert_eq!(AdversaryKind::parse("block:l=8").unwrap(), AdversaryKind::Block { l: 8 });
        assert_eq!(
            AdversaryKind::parse("bounded_recall_mix:indices=1/3").unwrap(),
            AdversaryKind::BoundedRecallMix { indices: Indices::Fixed(vec![1, 3]) }
        );
        assert_eq!(AdversaryKind::parse("bernoulli").unwrap(), AdversaryKind::Bernoulli { p: 0.5 });
        assert!(AdversaryKind::parse("block").is_err());
        assert!(AdversaryKind::parse("block:l=8,q=1").is_err());
        assert!(AdversaryKind::parse("nope").is_err());
        let a = AdversaryKind::parse("realizable_random:density=0.25").unwrap();
        assert_eq!(AdversaryKind::parse(&a.label()).unwrap(), a);
    }

    #[test]
    fn config_file_lines() {
        let args = config_file_args("# sweep\nalg = erm\nn = 16,32\nwall_clock = true\n\n").unwrap();
        assert_eq!(args, vec!["--alg", "erm", "--n", "16,32", "--wall-clock"]);
        assert!(config_file_args("algo = erm").is_err());
        assert!(config_file_args("alg erm").is_err());
    }

    #[test]
    fn point_keys_ignore_grid_position() {
        let cfg = ExperimentConfig { alg: AlgKind::Erm, n: vec![16, 32], m: vec![2], ..Default::default() };
        let pts = cfg.points(None);
        assert_eq!(pts.len(), 2);
        let cfg2 = ExperimentConfig { n: vec![32], ..cfg.clone() };
        assert_eq!(pts[1].key(cfg.alg, &cfg.adversary), cfg2.points(None)[0].key(cfg.alg, &cfg.adversary));
    }
}
