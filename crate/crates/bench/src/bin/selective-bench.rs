use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use selective_bench::checks::{run_suite, Suite};
use selective_bench::config::{
    config_file_args, parse_auto_list, parse_list, AdversaryKind, AlgKind, ConvexChoice, ExperimentConfig, Indices,
    Mode,
};
use selective_bench::output::{sidecar_path, write_csv, write_json_sidecar};
use selective_bench::sweep::{auto_indices, run};
use selective_bench::BenchError;
use selective_core::{scale_profile, Instance};

#[derive(Parser)]
#[command(name = "selective-bench", version, about = "Selective-learning experiments and inequality checks")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run an algorithm × adversary sweep and write CSV plus a JSON sidecar.
    Run(Flags),
    /// Run a built-in inequality suite.
    Check {
        /// lemma1, experts, theorem5, lemma4 or selfconc
        suite: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Write one adversary instance in the text format.
    Gen(Flags),
    /// Print the scale profile of an instance.
    Profile(Flags),
}

#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    alg: Option<String>,
    /// kind[:key=value,...] or file:<path>
    #[arg(long)]
    adversary: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated, `auto` allowed.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Constant in the automatic α.
    #[arg(long = "alpha-c")]
    alpha_c: Option<f64>,
    /// quadratic or lse:<alpha>
    #[arg(long)]
    convex: Option<String>,
    /// exact or monte_carlo
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plain-text `key = value` file; flags on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fill the wall_ms column (makes output non-deterministic).
    #[arg(long = "wall-clock")]
    wall_clock: bool,
}

impl Flags {
    fn experiment(&self) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = ExperimentConfig {
            alg: AlgKind::parse(self.alg.as_deref().ok_or_else(|| BenchError::Config("--alg is required".into()))?)?,
            adversary: self.adversary()?,
            ..Default::default()
        };
        if let Some(n) = &self.n {
            cfg.n = parse_list("n", n)?;
        }
        if let Some(m) = &self.m {
            cfg.m = parse_list("m", m)?;
        }
        if let Some(d) = &self.delta {
            cfg.delta = parse_auto_list("delta", d)?;
        }
        if let Some(e) = &self.eta {
            cfg.eta = parse_auto_list("eta", e)?;
        }
        if let Some(a) = &self.alpha {
            cfg.alpha = parse_auto_list("alpha", a)?;
        }
        if let Some(c) = self.alpha_c {
            cfg.alpha_c = c;
        }
        cfg.convex = self.convex.as_deref().map(ConvexChoice::parse).transpose()?;
        if let Some(mode) = &self.mode {
            cfg.mode = Mode::parse(mode)?;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.seed = self.seed.unwrap_or(0);
        cfg.out = self.out.clone();
        cfg.wall_clock = self.wall_clock;
        Ok(cfg)
    }

    fn adversary(&self) -> Result<AdversaryKind, BenchError> {
        AdversaryKind::parse(
            self.adversary.as_deref().ok_or_else(|| BenchError::Config("--adversary is required".into()))?,
        )
    }

    fn single(&self, flag: &str, value: &Option<String>) -> Result<usize, BenchError> {
        let v: Vec<usize> = parse_list(flag, value.as_deref().ok_or_else(|| BenchError::Config(format!("--{flag} is required")))?)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(BenchError::Config(format!("--{flag} takes a single value here"))),
        }
    }

    /// The instance named by `--adversary`, generated at `--n`, `--m`, `--seed`.
    fn instance(&self) -> Result<Instance, BenchError> {
        let adversary = self.adversary()?;
        if let AdversaryKind::File { .. } = adversary {
            let cfg = ExperimentConfig { adversary, ..Default::default() };
            return Ok(cfg.load_file()?.expect("file adversary"));
        }
        let seed = self.seed.unwrap_or(0);
        let (n, m) = match &adversary {
            AdversaryKind::Bitstrings { .. } => (0, 0),
            AdversaryKind::Threshold => {
                let n = self.single("n", &self.n)?;
                (n, n + 1)
            }
            _ => (self.single("n", &self.n)?, self.single("m", &self.m)?),
        };
        let indices = match &adversary {
            AdversaryKind::BoundedRecallMix { indices: Indices::Auto } => Some(auto_indices(seed, n, m)?),
            _ => None,
        };
        Ok(adversary.spec(n, m, seed, indices.as_deref())?.generate()?)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, BenchError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| BenchError::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_run(flags: &Flags) -> Result<bool, BenchError> {
    let cfg = flags.experiment()?;
    let result = run(&cfg)?;
    let mut out = output(&cfg.out)?;
    write_csv(&result.rows, &mut out)?;
    out.flush()?;
    if let Some(path) = &cfg.out {
        let side = sidecar_path(path);
        let f = File::create(&side).map_err(|e| BenchError::Config(format!("cannot create {}: {e}", side.display())))?;
        write_json_sidecar(&cfg, &result, BufWriter::new(f))?;
    }
    for v in result.verdicts.iter().filter(|v| !v.holds) {
        eprintln!("violation: row {} {}: lhs {} > rhs {}", v.row, v.check, v.lhs, v.rhs);
    }
    Ok(result.verdicts.iter().all(|v| v.holds))
}

fn cmd_check(suite: &str, flags: &Flags) -> Result<bool, BenchError> {
    let suite = Suite::parse(suite)?;
    let report = run_suite(suite, flags.seed.unwrap_or(0))?;
    let mut out = output(&flags.out)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    for w in &report.witnesses {
        eprintln!("violation: {}: lhs {} rhs {}", w.case, w.lhs, w.rhs);
    }
    eprintln!(
        "{} {}: {} checks over {} cases, {} violations",
        suite.name(),
        if report.passed() { "PASS" } else { "FAIL" },
        report.checks,
        report.cases,
        report.violations
    );
    Ok(report.passed())
}

fn cmd_gen(flags: &Flags) -> Result<bool, BenchError> {
    let inst = flags.instance()?;
    let mut out = output(&flags.out)?;
    inst.write_text(&mut out)?;
    out.flush()?;
    Ok(true)
}

fn cmd_profile(flags: &Flags) -> Result<bool, BenchError> {
    let inst = flags.instance()?;
    let profile = scale_profile(&inst);
    let mut out = output(&flags.out)?;
    writeln!(out, "i\tL_i")?;
    for (i, v) in profile.values.iter().enumerate() {
        writeln!(out, "{i}\t{v:.16e}")?;
    }
    out.flush()?;
    Ok(true)
}

/// Splices the contents of `--config` files in right after the verb, so that
/// flags given on the command line override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, BenchError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| BenchError::Config(format!("cannot read config {path}: {e}")))?;
    let extra = config_file_args(&text)?;
    // program, verb, [suite], then the file's flags.
    let at = match rest.get(1).map(String::as_str) {
        Some("check") => 3.min(rest.len()),
        Some(_) => 2,
        None => rest.len(),
    };
    rest.splice(at..at, extra);
    Ok(rest)
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    let result = match &cli.verb {
        Verb::Run(f) => cmd_run(f),
        Verb::Check { suite, flags } => cmd_check(suite, flags),
        Verb::Gen(f) => cmd_gen(f),
        Verb::Profile(f) => cmd_profile(f),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
