//! Thin command-line orchestrator over the `conetest` library: single-test
//! execution on CSV datasets, weight/critical-value tables, and Monte Carlo
//! experiment drivers. Parallelism lives in the library (capped by
//! `CONETEST_THREADS`); outputs are written atomically.
//!
//! Exit codes: 0 success, 2 usage or data error, 3 statistical failure
//! (an experiment's assertion did not hold, or a numerical routine failed).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use conetest::bayesweights::{bayes_weights, bayes_weights_to_csv, critval_bayes, PriorSpec};
use conetest::matkit::{stats_from_rows, SampleStats, SeedSpec, SymPd};
use conetest::mcengine::{
    atomic_write, critical_value, domination_report, equicorrelated, geometry_probe, power_curve,
    report_path, similarity_and_bias, sup_approach, to_json_bytes, validate_null, ConeKind,
    CritMethod, ExperimentSpec, SigmaSpec, SCHEMA_VERSION,
};
use conetest::nulldist::{
    critval_max, fuit_critical, g_tail, mixture_weights, sup_pvalue, t2_critical, weights_to_csv,
};
use conetest::special::{f_cdf, student_cdf};
use conetest::teststats::{fuit_rejects, StatKind};

#[derive(Parser)]
#[command(
    name = "conetest",
    version,
    about = "Tests of a multinormal mean against closed convex cone alternatives with unknown covariance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single test on a CSV dataset and emit a JSON result.
    Test(TestArgs),
    /// Emit weight tables or critical-value tables as CSV.
    Tables(TablesArgs),
    /// Run a named Monte Carlo experiment and write JSON + CSV reports.
    Experiment(ExperimentArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ConeArg {
    Global,
    Orthant,
    Halfspace,
}

impl ConeArg {
    fn kind(self) -> ConeKind {
        match self {
            ConeArg::Global => ConeKind::Global,
            ConeArg::Orthant => ConeKind::Orthant,
            ConeArg::Halfspace => ConeKind::HalfSpace,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum KindArg {
    T2,
    Lrt,
    Uit,
    Fuit,
}

impl KindArg {
    fn kind(self) -> StatKind {
        match self {
            KindArg::T2 => StatKind::T2,
            KindArg::Lrt => StatKind::Lrt,
            KindArg::Uit => StatKind::Uit,
            KindArg::Fuit => StatKind::Fuit,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CritArg {
    Max,
    Bayes,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TableArg {
    /// Face-probability mixture weights for a covariance.
    Mixture,
    /// Prior-averaged face weights.
    Bayes,
    /// Critical values over a list of levels.
    Critval,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ExperimentName {
    /// Empirical null tails against the mixture prediction.
    Null,
    /// Rejection rate over a grid of mean shifts.
    Power,
    /// Orthant statistic versus its half-space envelope.
    Domination,
    /// Half-space similarity across covariances, orthant bias search.
    Similarity,
    /// Null size along the least-favorable covariance sequence.
    Sup,
    /// Acceptance-region convexity, polar-cone rays, Hotelling contrast.
    Geometry,
}

#[derive(Args)]
struct TestArgs {
    /// CSV dataset: n rows of p numeric columns, optional header.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_enum)]
    cone: ConeArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = CritArg::Max)]
    critmethod: CritArg,
    /// Prior for the Bayes critical value, e.g. `invwishart:m=4`.
    #[arg(long)]
    prior: Option<String>,
    /// Monte Carlo replicates for Bayes weight estimation.
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long, value_enum)]
    table: TableArg,
    #[arg(long)]
    p: usize,
    /// Sample size; required for the bayes and critval tables.
    #[arg(long)]
    n: Option<usize>,
    /// Equicorrelation of the covariance for mixture weights (identity when
    /// absent).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = KindArg::Uit)]
    kind: KindArg,
    #[arg(long, value_enum, default_value_t = CritArg::Max)]
    critmethod: CritArg,
    #[arg(long)]
    prior: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated significance levels for the critval table.
    #[arg(long, default_value = "0.01,0.025,0.05,0.1")]
    alphas: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 20_000)]
    reps: u64,
    /// Midpoint probes for the geometry experiment.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = KindArg::Uit)]
    kind: KindArg,
    #[arg(long, value_enum, default_value_t = ConeArg::Orthant)]
    cone: ConeArg,
    #[arg(long, value_enum, default_value_t = CritArg::Max)]
    critmethod: CritArg,
    #[arg(long)]
    prior: Option<String>,
    /// Equicorrelation of the data covariance (identity when absent).
    #[arg(long)]
    rho: Option<f64>,
    /// Mean grid as `a,b;c,d;...`; an experiment-specific default otherwise.
    #[arg(long)]
    theta: Option<String>,
    /// Random covariance draws for the similarity experiment.
    #[arg(long, default_value_t = 10)]
    sigmas: usize,
    /// Covariance levels for the sup experiment.
    #[arg(long, default_value_t = 5)]
    levels: usize,
    /// Output directory for report files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Failure category mapped to the exit-code contract.
enum Failure {
    /// Bad flags, malformed or undersized input data: exit 2.
    Usage(String),
    /// A statistical assertion or numerical routine failed: exit 3.
    Stat(String),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Test(args) => cmd_test(&args),
        Command::Tables(args) => cmd_tables(&args),
        Command::Experiment(args) => cmd_experiment(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Stat(msg)) => {
            eprintln!("statistical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Parses a CSV matrix: `.` radix, scientific notation allowed, `#` comment
/// lines skipped, optional header auto-detected by a non-numeric first row.
fn parse_csv(text: &str) -> Result<(usize, usize, Vec<f64>), Failure> {
    let mut data: Vec<f64> = Vec::new();
    let mut p = 0usize;
    let mut rows = 0usize;
    let mut first_data_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if !first_data_seen && cells.iter().any(|c| c.parse::<f64>().is_err()) {
            // Header row.
            first_data_seen = true;
            continue;
        }
        first_data_seen = true;
        if p == 0 {
            p = cells.len();
        } else if cells.len() != p {
            return Err(usage(format!(
                "line {lineno}: expected {p} columns, found {}",
                cells.len()
            )));
        }
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                usage(format!(
                    "line {lineno}, column {}: invalid number {cell:?}",
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(usage(format!(
                    "line {lineno}, column {}: non-finite value {cell:?}",
                    col + 1
                )));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(usage("no data rows in input"));
    }
    Ok((rows, p, data))
}

fn read_dataset(path: &Path) -> Result<SampleStats<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let (n, p, data) = parse_csv(&text)?;
    if n < p + 2 {
        return Err(usage(format!(
            "need at least p + 2 = {} rows for p = {p} columns, found {n}"
        , p + 2)));
    }
    stats_from_rows(n, p, &data).map_err(|e| usage(format!("invalid dataset: {e}")))
}

/// Parses `invwishart:m=<int>`; `None` falls back to `m = p + 2`.
fn parse_prior(prior: &Option<String>, p: usize) -> Result<usize, Failure> {
    match prior {
        None => Ok(p + 2),
        Some(text) => {
            let m: usize = text
                .strip_prefix("invwishart:m=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| {
                    usage(format!("invalid prior {text:?}; expected invwishart:m=<int>"))
                })?;
            if m < p + 2 {
                return Err(usage(format!("prior needs m >= p + 2 = {}", p + 2)));
            }
            Ok(m)
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random::<u64>)
}

fn write_or_print(out: &Option<PathBuf>, contents: &[u8]) -> Result<(), Failure> {
    match out {
        None => {
            let text = String::from_utf8_lossy(contents);
            print!("{text}");
            Ok(())
        }
        Some(path) => atomic_write(path, contents)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
    }
}

#[derive(Serialize)]
struct TestReport {
    schema: u32,
    kind: StatKind,
    cone: ConeKind,
    n: usize,
    p: usize,
    alpha: f64,
    value: f64,
    face: Vec<usize>,
    critical_value: f64,
    critmethod: String,
    decision: String,
    pvalue: f64,
    /// The p-value is an upper bound (supremum over covariances or a union
    /// bound) rather than exact.
    conservative: bool,
    /// Recorded only when Bayes weighting introduces randomness.
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<SeedSpec>,
    input: String,
}

impl TestReport {
    fn to_csv(&self) -> String {
        let face = self
            .face
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let mut out = String::from("key,value\n");
        for (k, v) in [
            ("schema", self.schema.to_string()),
            ("kind", format!("{:?}", self.kind).to_lowercase()),
            ("cone", format!("{:?}", self.cone).to_lowercase()),
            ("n", self.n.to_string()),
            ("p", self.p.to_string()),
            ("alpha", format!("{:.16e}", self.alpha)),
            ("value", format!("{:.16e}", self.value)),
            ("face", face),
            ("critical_value", format!("{:.16e}", self.critical_value)),
            ("critmethod", self.critmethod.clone()),
            ("decision", self.decision.clone()),
            ("pvalue", format!("{:.16e}", self.pvalue)),
            ("conservative", self.conservative.to_string()),
        ] {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

fn cmd_test(args: &TestArgs) -> Result<(), Failure> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage("alpha must lie in (0, 1)"));
    }
    let kind = args.kind.kind();
    let cone_kind = args.cone.kind();
    if kind == StatKind::Fuit && cone_kind == ConeKind::Global {
        return Err(usage("the coordinatewise test needs --cone orthant or halfspace"));
    }
    let stats = read_dataset(&args.input)?;
    let (n, p) = (stats.n, stats.dim());
    let cone = cone_kind.cone(p);
    let result = conetest::mcengine::compute_statistic(kind, &cone, &stats)
        .map_err(|e| Failure::Stat(e.to_string()))?;

    let (critmethod, crit, seed) = match args.critmethod {
        CritArg::Max => {
            let c = critical_value(kind, cone_kind, CritMethod::Max, args.alpha, n, p, &SeedSpec::new(0))
                .map_err(|e| Failure::Stat(e.to_string()))?;
            ("max".to_string(), c, None)
        }
        CritArg::Bayes => {
            if !matches!(kind, StatKind::Lrt | StatKind::Uit) || cone_kind == ConeKind::Global {
                return Err(usage("--critmethod bayes applies to lrt/uit on orthant or halfspace"));
            }
            if args.reps < 10_000 {
                return Err(usage("Bayes weights need --reps >= 10000"));
            }
            let m = parse_prior(&args.prior, p)?;
            let seed = SeedSpec::new(resolve_seed(args.seed));
            let method = CritMethod::Bayes {
                m,
                weight_reps: args.reps,
            };
            let c = critical_value(kind, cone_kind, method, args.alpha, n, p, &seed)
                .map_err(|e| Failure::Stat(e.to_string()))?;
            (format!("bayes:m={m}"), c, Some(seed))
        }
    };

    let rejects = match kind {
        StatKind::Fuit => fuit_rejects(&result, crit),
        _ => result.value >= crit,
    };
    let (pvalue, conservative) = match kind {
        StatKind::T2 => {
            let f = result.value * (n - p) as f64 / ((n - 1) as f64 * p as f64);
            (1.0 - f_cdf(f, p as f64, (n - p) as f64), false)
        }
        StatKind::Fuit => {
            let tail = 1.0 - student_cdf(result.value, (n - 1) as f64);
            ((p as f64 * tail).min(1.0), true)
        }
        StatKind::Lrt | StatKind::Uit => match cone_kind {
            ConeKind::Global => (g_tail(p as u32, (n - p) as u32, result.value.max(0.0)), false),
            ConeKind::Orthant | ConeKind::HalfSpace => {
                let pv = sup_pvalue(kind, cone_kind == ConeKind::Orthant, result.value, n, p)
                    .map_err(|e| Failure::Stat(e.to_string()))?;
                (pv.pvalue, pv.conservative)
            }
        },
    };

    let report = TestReport {
        schema: SCHEMA_VERSION,
        kind,
        cone: cone_kind,
        n,
        p,
        alpha: args.alpha,
        value: result.value,
        face: result.face.indices().to_vec(),
        critical_value: crit,
        critmethod,
        decision: if rejects { "reject" } else { "accept" }.to_string(),
        pvalue,
        conservative,
        seed,
        input: args.input.display().to_string(),
    };
    let bytes = match args.format {
        FormatArg::Json => to_json_bytes(&report).map_err(|e| Failure::Stat(e.to_string()))?,
        FormatArg::Csv => report.to_csv().into_bytes(),
    };
    write_or_print(&args.out, &bytes)
}

fn parse_alphas(text: &str) -> Result<Vec<f64>, Failure> {
    let alphas: Vec<f64> = text
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| usage(format!("invalid alpha {a:?}"))))
        .collect::<Result<_, _>>()?;
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(usage("alphas must lie in (0, 1)"));
    }
    Ok(alphas)
}

fn cmd_tables(args: &TablesArgs) -> Result<(), Failure> {
    if args.p == 0 {
        return Err(usage("dimension must be at least 1"));
    }
    let p = args.p;
    let sigma = match args.rho {
        None => SymPd::identity(p),
        Some(rho) => equicorrelated(p, rho).map_err(|e| usage(e.to_string()))?,
    };
    let need_n = || {
        args.n
            .ok_or_else(|| usage("this table needs --n"))
            .and_then(|n| {
                if n < p + 2 {
                    Err(usage(format!("need n >= p + 2 = {}", p + 2)))
                } else {
                    Ok(n)
                }
            })
    };
    let csv = match args.table {
        TableArg::Mixture => {
            if args.reps < 10_000 {
                return Err(usage("mixture weights need --reps >= 10000"));
            }
            let seed = resolve_seed(args.seed);
            let w = mixture_weights(&sigma, args.reps, SeedSpec::new(seed))
                .map_err(|e| Failure::Stat(e.to_string()))?;
            format!("# seed={seed}\n{}", weights_to_csv(&w, &sigma))
        }
        TableArg::Bayes => {
            let n = need_n()?;
            if args.reps < 10_000 {
                return Err(usage("Bayes weights need --reps >= 10000"));
            }
            let m = parse_prior(&args.prior, p)?;
            let seed = resolve_seed(args.seed);
            let prior = PriorSpec::<f64>::InvWishart {
                gamma: SymPd::identity(p),
                m,
            };
            let w = bayes_weights(&prior, n, p, None, args.reps, SeedSpec::new(seed))
                .map_err(|e| Failure::Stat(e.to_string()))?;
            format!("# seed={seed}\n{}", bayes_weights_to_csv(&w))
        }
        TableArg::Critval => {
            let n = need_n()?;
            let kind = args.kind.kind();
            let alphas = parse_alphas(&args.alphas)?;
            let mut header = format!(
                "# kind={:?} n={n} p={p} method={}\n",
                kind,
                match args.critmethod {
                    CritArg::Max => "max".to_string(),
                    CritArg::Bayes => "bayes".to_string(),
                }
            )
            .to_lowercase();
            let bayes_weights_cache = if args.critmethod == CritArg::Bayes {
                if !matches!(kind, StatKind::Lrt | StatKind::Uit) {
                    return Err(usage("--critmethod bayes applies to lrt/uit"));
                }
                let m = parse_prior(&args.prior, p)?;
                let seed = resolve_seed(args.seed);
                header = format!("# seed={seed}\n{header}");
                let prior = PriorSpec::InvWishart {
                    gamma: SymPd::identity(p),
                    m,
                };
                Some(
                    bayes_weights(&prior, n, p, None, args.reps.max(10_000), SeedSpec::new(seed))
                        .map_err(|e| Failure::Stat(e.to_string()))?,
                )
            } else {
                None
            };
            let mut out = format!("{header}alpha,critical_value\n");
            for &alpha in &alphas {
                let c = match &bayes_weights_cache {
                    Some(w) => critval_bayes(kind, alpha, w),
                    None => match kind {
                        StatKind::T2 => t2_critical(alpha, n, p),
                        StatKind::Fuit => fuit_critical(alpha, n, p),
                        _ => critval_max(kind, alpha, n, p),
                    },
                }
                .map_err(|e| Failure::Stat(e.to_string()))?;
                out.push_str(&format!("{:.16e},{:.16e}\n", alpha, c));
            }
            out
        }
    };
    write_or_print(&args.out, csv.as_bytes())
}

/// Default mean grid: 20 points along the all-ones ray for power studies, a
/// 20-point arc sweeping from inside the cone to outside it for domination
/// (so strict-domination points are exercised).
fn default_grid(name: ExperimentName, p: usize) -> Vec<Vec<f64>> {
    match name {
        ExperimentName::Domination => (0..20)
            .map(|i| {
                let phi = -std::f64::consts::FRAC_PI_4
                    + i as f64 * (std::f64::consts::PI + std::f64::consts::FRAC_PI_4) / 19.0;
                let mut theta = vec![1.5 * phi.sin() / ((p as f64 - 1.0).max(1.0)).sqrt(); p];
                theta[0] = 1.5 * phi.cos();
                theta
            })
            .collect(),
        ExperimentName::Power => (0..20)
            .map(|i| vec![1.5 * i as f64 / 19.0 / (p as f64).sqrt(); p])
            .collect(),
        _ => vec![],
    }
}

fn parse_theta(text: &str, p: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let grid: Vec<Vec<f64>> = text
        .split(';')
        .map(|point| {
            point
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("invalid theta component {v:?}")))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;
    if grid.iter().any(|t| t.len() != p) {
        return Err(usage(format!("every theta point needs {p} components")));
    }
    Ok(grid)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), Failure> {
    let seed_value = resolve_seed(args.seed);
    let seed = SeedSpec::new(seed_value);
    let cone = match args.name {
        ExperimentName::Domination => ConeKind::Orthant,
        ExperimentName::Similarity => ConeKind::HalfSpace,
        _ => args.cone.kind(),
    };
    let critmethod = match args.critmethod {
        CritArg::Max => CritMethod::Max,
        CritArg::Bayes => CritMethod::Bayes {
            m: parse_prior(&args.prior, args.p)?,
            weight_reps: args.reps.max(10_000),
        },
    };
    let theta_grid = match &args.theta {
        Some(text) => parse_theta(text, args.p)?,
        None => default_grid(args.name, args.p),
    };
    let spec = ExperimentSpec {
        name: format!("{:?}", args.name).to_lowercase(),
        kind: args.kind.kind(),
        cone,
        n: args.n,
        p: args.p,
        alpha: args.alpha,
        reps: args.reps,
        seed,
        critmethod,
        sigma: match args.rho {
            None => SigmaSpec::Identity,
            Some(rho) => SigmaSpec::Equicorrelated { rho },
        },
        theta_grid,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| usage(format!("cannot create {}: {e}", args.out.display())))?;
    let stat = |e: conetest::Error| Failure::Stat(e.to_string());

    // Each arm writes report files and returns the list of failed assertions.
    let fingerprint = spec.fingerprint();
    let (stem, json, csv, problems): (&str, Vec<u8>, String, Vec<String>) = match args.name {
        ExperimentName::Null => {
            let cv = critical_value(
                spec.kind, spec.cone, spec.critmethod, spec.alpha, spec.n, spec.p, &spec.seed,
            )
            .map_err(stat)?;
            let grid: Vec<f64> = (1..=10).map(|i| cv * i as f64 / 5.0).collect();
            let report = validate_null(&spec, &grid).map_err(stat)?;
            let mut problems = vec![];
            if !report.all_within {
                problems.push(format!(
                    "empirical null tail deviates from the mixture (max dev {:.3e})",
                    report.max_abs_dev
                ));
            }
            ("null", to_json_bytes(&report).map_err(stat)?, report.to_csv(), problems)
        }
        ExperimentName::Power => {
            let report = power_curve(&spec).map_err(stat)?;
            ("power", to_json_bytes(&report).map_err(stat)?, report.to_csv(), vec![])
        }
        ExperimentName::Domination => {
            let report = domination_report(&spec).map_err(stat)?;
            let mut problems = vec![];
            if report.pathwise_violations > 0 {
                problems.push(format!("{} pathwise violations", report.pathwise_violations));
            }
            if !report.dominated {
                problems.push("half-space power fell below orthant power".to_string());
            }
            (
                "domination",
                to_json_bytes(&report).map_err(stat)?,
                report.to_csv(),
                problems,
            )
        }
        ExperimentName::Similarity => {
            let report = similarity_and_bias(&spec, args.sigmas).map_err(stat)?;
            let mut problems = vec![];
            if !report.similar {
                problems.push("null rate depends on the covariance".to_string());
            }
            (
                "similarity",
                to_json_bytes(&report).map_err(stat)?,
                report.to_csv(),
                problems,
            )
        }
        ExperimentName::Sup => {
            let report = sup_approach(
                spec.kind, spec.n, spec.p, spec.alpha, args.levels, spec.reps, spec.seed,
            )
            .map_err(stat)?;
            let mut problems = vec![];
            if !report.nondecreasing {
                problems.push("null size not nondecreasing along the sequence".to_string());
            }
            if !report.final_within {
                problems.push("final null size not within 3 SE of alpha".to_string());
            }
            ("sup", to_json_bytes(&report).map_err(stat)?, report.to_csv(), problems)
        }
        ExperimentName::Geometry => {
            let rays = (args.trials / 10).max(100);
            let report = geometry_probe(spec.n, spec.p, spec.alpha, args.trials, rays, spec.seed)
                .map_err(stat)?;
            let mut problems = vec![];
            if report.orthant_violations + report.halfspace_violations + report.t2_violations > 0 {
                problems.push("convexity violations found".to_string());
            }
            if !report.ray_all_accepted || report.ray_max_value > 1e-10 {
                problems.push("polar-cone ray not uniformly accepted at zero".to_string());
            }
            if !report.contrast.t2_rejects || !report.contrast.uit_accepts {
                problems.push("contrast point not separated".to_string());
            }
            (
                "geometry",
                to_json_bytes(&report).map_err(stat)?,
                report.to_csv(),
                problems,
            )
        }
    };

    let json_path = report_path(&args.out, stem, &fingerprint, "json");
    let csv_path = report_path(&args.out, stem, &fingerprint, "csv");
    atomic_write(&json_path, &json)
        .map_err(|e| usage(format!("cannot write {}: {e}", json_path.display())))?;
    atomic_write(&csv_path, csv.as_bytes())
        .map_err(|e| usage(format!("cannot write {}: {e}", csv_path.display())))?;
    println!("seed {seed_value}");
    println!("wrote {}", json_path.display());
    println!("wrote {}", csv_path.display());
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Stat(problems.join("; ")))
    }
}
