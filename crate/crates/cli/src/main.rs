//! `oneshot`: command-line front end. Every JSON document carries
//! `"units": "bits"`; scans are CSV with one header row.

#![forbid(unsafe_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use oneshot::bounds::{
    self, approx_eat_terms, classical_eat_preset, eat_preset, GridSpec, ScenarioSpec, Theorem,
};
use oneshot::divergences::{
    max_relative_entropy, petz_renyi, relative_entropy, sandwiched_renyi, sharp_upper_bound,
    DivergenceResult,
};
use oneshot::entropies::{h_down_alpha, h_min, h_up_alpha, vn_conditional, EntropyFamily};
use oneshot::linalg::{DensityOperator, RegisterSpace};
use oneshot::simulate::{counterexample_side_info, counterexample_triangle, quantum_eat_smoke, SmokeParams};
use oneshot::suites::{run_suite, Suite};
use oneshot::{diqkd, random};

const DEFAULT_SEED: u64 = 7;
const SEED_ENV: &str = "ONE_SHOT_SEED";

#[derive(Parser)]
#[command(name = "oneshot", version, about = "Smooth min-entropy bounds for approximation chains")]
struct Cli {
    /// Seed for randomized work; the ONE_SHOT_SEED environment variable overrides it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a randomized property suite; exits 1 if any property fails.
    Verify {
        /// triangle, divergences, entropies, chain-rules, dimension-bounds,
        /// pinching, sharp, counterexamples, eat-smoke or all.
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one theorem-level bound.
    Bound {
        #[arg(long)]
        theorem: String,
        #[arg(long, value_parser = parse_count)]
        n: u64,
        #[arg(long)]
        eps: f64,
        #[arg(long = "dimA")]
        dim_a: usize,
        #[arg(long = "dimB")]
        dim_b: usize,
        /// Per-round entropy shared by all rounds, in bits.
        #[arg(long, conflicts_with = "hk_file")]
        h: Option<f64>,
        /// CSV of per-round entropies: one value, or one per round.
        #[arg(long = "hk-file")]
        hk_file: Option<PathBuf>,
        /// Total smoothing for the EAT bounds.
        #[arg(long, default_value_t = 0.01)]
        smoothing: f64,
        /// Optimize free parameters instead of using the presets.
        #[arg(long)]
        optimize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid scan of one theorem, written as CSV. Every column after `n`, `eps`
    /// and `smoothing` is in bits.
    Scan {
        #[arg(long)]
        theorem: String,
        /// Comma-separated list.
        #[arg(long, value_delimiter = ',', value_parser = parse_count, required = true)]
        n: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.01")]
        smoothing: Vec<f64>,
        #[arg(long = "dimA")]
        dim_a: usize,
        #[arg(long = "dimB")]
        dim_b: usize,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact simulation of one of the constructed processes.
    Simulate {
        #[arg(long, value_enum)]
        scenario: Scenario,
        #[arg(long, value_parser = parse_count)]
        n: u64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        epsp: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DIQKD key-rate bound from the approximately independent registers bound.
    Diqkd {
        #[arg(long)]
        eps: f64,
        #[arg(long, value_parser = parse_count)]
        n: u64,
        #[arg(long = "delta-w", default_value_t = 0.0)]
        delta_w: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Divergence between two states given as JSON files.
    Divergence {
        #[arg(long, value_enum)]
        family: DivFamily,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, visible_alias = "p")]
        rho: PathBuf,
        #[arg(long, visible_alias = "q")]
        sigma: PathBuf,
    },
    /// Conditional entropy of a state given as a JSON file.
    Entropy {
        #[arg(long)]
        state: PathBuf,
        /// Comma-separated register labels.
        #[arg(long, visible_alias = "A", value_delimiter = ',', required = true)]
        a: Vec<String>,
        #[arg(long, visible_alias = "B", value_delimiter = ',')]
        b: Vec<String>,
        #[arg(long, value_enum)]
        kind: EntropyKind,
        #[arg(long)]
        alpha: Option<f64>,
        /// Where to write the optimizing `sigma_B`, for kinds that have one.
        #[arg(long = "optimizer-out")]
        optimizer_out: Option<PathBuf>,
    },
    /// Write a random state (`--regs A=2,B=2`) or re-serialize one (`--input`).
    State {
        #[arg(long, value_delimiter = ',', conflicts_with = "input")]
        regs: Vec<String>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    SideInfo,
    Triangle,
    QuantumSmoke,
}

#[derive(Clone, Copy, ValueEnum)]
enum DivFamily {
    Relative,
    Max,
    Petz,
    Sandwiched,
    Sharp,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntropyKind {
    Vn,
    PetzUp,
    PetzDown,
    SandwichedUp,
    SandwichedDown,
    #[value(alias = "hmin")]
    Min,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Property,
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<oneshot::Error>() {
            Some(oneshot::Error::Domain { .. })
            | Some(oneshot::Error::Precondition(_))
            | Some(oneshot::Error::UnknownLabel(_))
            | Some(oneshot::Error::DuplicateLabel(_))
            | Some(oneshot::Error::Json(_)) => Failure::Usage(e),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<oneshot::Error> for Failure {
    fn from(e: oneshot::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

#[derive(Serialize)]
struct WithUnits<T: Serialize> {
    units: &'static str,
    #[serde(flatten)]
    body: T,
}

fn bits<T: Serialize>(body: T) -> WithUnits<T> {
    WithUnits { units: "bits", body }
}

/// Accepts integers and float notation such as `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if !(f >= 0.0 && f.fract() == 0.0 && f < 1.8e19) {
        return Err(format!("not a nonnegative integer: {s}"));
    }
    Ok(f as u64)
}

fn seed(flag: Option<u64>) -> anyhow::Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v} is not an integer")),
        Err(_) => Ok(flag.unwrap_or(DEFAULT_SEED)),
    }
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(&s, out)
}

fn read_hk(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        for field in rec.iter().filter(|f| !f.is_empty()) {
            match field.parse::<f64>() {
                Ok(v) => out.push(v),
                Err(_) if i == 0 => {}
                Err(_) => bail!("{}: `{field}` is not a number", path.display()),
            }
        }
    }
    if out.is_empty() {
        bail!("{} holds no per-round entropies", path.display());
    }
    Ok(out)
}

fn read_state(path: &Path) -> anyhow::Result<DensityOperator> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(DensityOperator::from_json(&text)?)
}

fn parse_regs(regs: &[String]) -> anyhow::Result<RegisterSpace> {
    let parsed: Vec<(String, usize)> = regs
        .iter()
        .map(|r| {
            let (l, d) = r.split_once('=').ok_or_else(|| anyhow!("register `{r}` is not LABEL=DIM"))?;
            Ok((l.to_string(), d.parse().with_context(|| format!("dimension in `{r}`"))?))
        })
        .collect::<anyhow::Result<_>>()?;
    let refs: Vec<(&str, usize)> = parsed.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    Ok(RegisterSpace::new(&refs)?)
}

fn theorem(s: &str) -> Result<Theorem, Failure> {
    s.parse::<Theorem>().map_err(|e| Failure::Usage(e.into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = seed(cli.seed).map_err(Failure::Usage)?;
    match cli.cmd {
        Cmd::Verify { suite, out } => {
            let suite: Suite = suite.parse().map_err(|e: oneshot::Error| Failure::Usage(e.into()))?;
            let summary = run_suite(suite, seed);
            emit_json(&bits(&summary), out.as_deref())?;
            if !summary.passed {
                return Err(Failure::Property);
            }
        }
        Cmd::Bound { theorem: t, n, eps, dim_a, dim_b, h, hk_file, smoothing, optimize, out } => {
            let t = theorem(&t)?;
            let hk = match (h, hk_file) {
                (Some(h), None) => vec![h],
                (None, Some(p)) => read_hk(&p).map_err(Failure::Usage)?,
                _ => return Err(Failure::Usage(anyhow!("one of --h or --hk-file is required"))),
            };
            let spec = ScenarioSpec { n, dim_a, dim_b, eps, per_round_entropies: hk.clone() };
            spec.validate()?;
            let report = match (t, optimize) {
                (Theorem::ApproxEat, false) => approx_eat_terms(&spec, &hk, &eat_preset(&spec, smoothing)),
                (Theorem::ClassicalEat, false) => classical_eat_preset(&spec, &hk, smoothing)?,
                _ => bounds::evaluate(t, &spec, smoothing)?,
            };
            emit_json(&bits(&report), out.as_deref())?;
        }
        Cmd::Scan { theorem: t, n, eps, smoothing, dim_a, dim_b, h, out } => {
            let grid = GridSpec { n, eps, smoothing, dim_a, dim_b, h };
            let table = bounds::param_scan(theorem(&t)?, &grid)?;
            emit(&table.to_csv()?, out.as_deref())?;
        }
        Cmd::Simulate { scenario, n, eps, epsp, out } => {
            let n = usize::try_from(n).map_err(|e| Failure::Usage(e.into()))?;
            let need = |v: Option<f64>| v.ok_or_else(|| Failure::Usage(anyhow!("--epsp is required")));
            match scenario {
                Scenario::SideInfo => {
                    let r = counterexample_side_info(n, eps, need(epsp)?)?;
                    emit_json(&bits(&r), out.as_deref())?;
                }
                Scenario::Triangle => {
                    let r = counterexample_triangle(n, eps, need(epsp)?)?;
                    emit_json(&bits(&r), out.as_deref())?;
                }
                Scenario::QuantumSmoke => {
                    let p = SmokeParams { n, eps, seed, ..SmokeParams::default() };
                    let r = quantum_eat_smoke(p)?;
                    emit_json(&bits(&r), out.as_deref())?;
                }
            }
        }
        Cmd::Diqkd { eps, n, delta_w, out } => {
            #[derive(Serialize)]
            struct Rate {
                rate_total: f64,
                rate_per_round: f64,
                n_star: Option<u64>,
                omega_required: f64,
                asymptotic_rate: f64,
                smoothing: f64,
            }
            let s = diqkd::diqkd_summary(eps, n, delta_w)?;
            let r = Rate {
                rate_total: s.rate_total,
                rate_per_round: s.rate_per_round,
                n_star: s.n_star,
                omega_required: s.omega_required,
                asymptotic_rate: s.asymptotic_rate,
                smoothing: s.smoothing,
            };
            emit_json(&bits(&r), out.as_deref())?;
        }
        Cmd::Divergence { family, alpha, rho, sigma } => {
            let p = read_state(&rho).map_err(Failure::Usage)?;
            let q = read_state(&sigma).map_err(Failure::Usage)?;
            let need = || alpha.ok_or_else(|| Failure::Usage(anyhow!("--alpha is required for this family")));
            let r: DivergenceResult = match family {
                DivFamily::Relative => relative_entropy(&p, &q)?,
                DivFamily::Max => max_relative_entropy(&p, &q)?,
                DivFamily::Petz => petz_renyi(&p, &q, need()?)?,
                DivFamily::Sandwiched => sandwiched_renyi(&p, &q, need()?)?,
                DivFamily::Sharp => sharp_upper_bound(&p, &q, need()?)?.result,
            };
            #[derive(Serialize)]
            struct Out {
                #[serde(flatten)]
                result: DivergenceResult,
                finite: bool,
            }
            emit_json(&bits(Out { finite: r.value.is_finite(), result: r }), None)?;
        }
        Cmd::Entropy { state, a, b, kind, alpha, optimizer_out } => {
            let rho = read_state(&state).map_err(Failure::Usage)?;
            let a: Vec<&str> = a.iter().map(String::as_str).collect();
            let b: Vec<&str> = b.iter().map(String::as_str).collect();
            let need = || alpha.ok_or_else(|| Failure::Usage(anyhow!("--alpha is required for this entropy")));
            let r = match kind {
                EntropyKind::Vn => vn_conditional(&rho, &a, &b)?,
                EntropyKind::Min => h_min(&rho, &a, &b)?,
                EntropyKind::PetzUp => h_up_alpha(&rho, &a, &b, need()?, EntropyFamily::Petz)?,
                EntropyKind::SandwichedUp => h_up_alpha(&rho, &a, &b, need()?, EntropyFamily::Sandwiched)?,
                EntropyKind::PetzDown => h_down_alpha(&rho, &a, &b, need()?, EntropyFamily::Petz)?,
                EntropyKind::SandwichedDown => h_down_alpha(&rho, &a, &b, need()?, EntropyFamily::Sandwiched)?,
            };
            let optimizer_path = match (&r.optimizer_sigma, optimizer_out) {
                (Some(sigma), Some(path)) => {
                    emit_json(&sigma.to_json(), Some(&path))?;
                    Some(path.display().to_string())
                }
                _ => None,
            };
            #[derive(Serialize)]
            struct Value {
                value: f64,
                optimizer_path: Option<String>,
            }
            emit_json(&bits(Value { value: r.value, optimizer_path }), None)?;
        }
        Cmd::State { regs, rank, input, out } => {
            let rho = match input {
                Some(p) => read_state(&p).map_err(Failure::Usage)?,
                None => {
                    if regs.is_empty() {
                        return Err(Failure::Usage(anyhow!("one of --regs or --input is required")));
                    }
                    let space = parse_regs(&regs).map_err(Failure::Usage)?;
                    random::density(&mut ChaCha8Rng::seed_from_u64(seed), space, rank)?
                }
            };
            emit_json(&rho.to_json(), out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
