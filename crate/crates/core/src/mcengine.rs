//! Monte Carlo experiment harness: reproducible experiment specifications,
//! null-distribution validation, power curves, domination and similarity
//! studies, acceptance-region geometry probes, and the least-favorable
//! covariance approach. Everything here works in `f64` and reduces to integer
//! tallies with per-replicate derived seeds, so results are independent of the
//! worker count.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayesweights::{bayes_weights, critval_bayes, PriorSpec};
use crate::cones::Cone;
use crate::error::{Error, Result};
use crate::matkit::{sample_dataset, stats_from_rows, SampleStats, SeedSpec, SymPd};
use crate::nulldist::{
    critval_max, fuit_critical, g_tail, null_tail, sigma_fingerprint, t2_critical, MixtureWeights,
};
use crate::teststats::{fuit, fuit_rejects, hotelling_t2, lrt, uit, StatKind, StatisticResult};

/// Report schema version stamped into every serialized report.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable capping the rayon worker count for engine operations.
pub const THREADS_ENV: &str = "CONETEST_THREADS";

// Child indices partitioning a spec's seed into independent streams;
// replicate indices live under the derived children, never the root.
const CHILD_SIM: u64 = 1;
const CHILD_WEIGHTS: u64 = 2;
const CHILD_SIGMA: u64 = 3;

/// Serializable cone selector (the dimension lives in the experiment spec).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeKind {
    Global,
    Orthant,
    HalfSpace,
}

impl ConeKind {
    pub fn cone(self, p: usize) -> Cone {
        match self {
            ConeKind::Global => Cone::Global(p),
            ConeKind::Orthant => Cone::Orthant(p),
            ConeKind::HalfSpace => Cone::HalfSpace(p),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConeKind::Global => "global",
            ConeKind::Orthant => "orthant",
            ConeKind::HalfSpace => "halfspace",
        }
    }
}

/// How the critical value is chosen for cone statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CritMethod {
    /// Supremum over covariances (exact for the half-space statistic).
    Max,
    /// Bayes-averaged null tail under an inverted-Wishart prior with identity
    /// scale and `m` degrees of freedom; `weight_reps` Monte Carlo draws.
    Bayes { m: usize, weight_reps: u64 },
}

/// Covariance used for data generation, in a serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaSpec {
    Identity,
    /// Full matrix, row by row.
    Explicit { rows: Vec<Vec<f64>> },
    /// Unit variances, common correlation `rho`.
    Equicorrelated { rho: f64 },
    /// Reproducible random positive-definite draw; distinct indices give
    /// distinct matrices under the same experiment seed.
    RandomPd { index: u64 },
}

impl SigmaSpec {
    pub fn build(&self, p: usize, seed: &SeedSpec) -> Result<SymPd<f64>> {
        match self {
            SigmaSpec::Identity => Ok(SymPd::identity(p)),
            SigmaSpec::Explicit { rows } => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: rows.len(),
                    });
                }
                let data: Vec<f64> = rows.iter().flatten().copied().collect();
                SymPd::new(p, data)
            }
            SigmaSpec::Equicorrelated { rho } => equicorrelated(p, *rho),
            SigmaSpec::RandomPd { index } => {
                let mut rng = seed.derive(CHILD_SIGMA).derive(*index).rng();
                Ok(random_pd(p, &mut rng))
            }
        }
    }
}

/// Unit-variance covariance with common correlation `rho`; positive definite
/// for `-1/(p-1) < rho < 1`.
pub fn equicorrelated(p: usize, rho: f64) -> Result<SymPd<f64>> {
    if p == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let lo = if p > 1 { -1.0 / (p as f64 - 1.0) } else { -1.0 };
    if rho <= lo || rho >= 1.0 {
        return Err(Error::domain(format!(
            "equicorrelation {rho} outside ({lo}, 1)"
        )));
    }
    let mut data = vec![rho; p * p];
    for i in 0..p {
        data[i * p + i] = 1.0;
    }
    SymPd::new(p, data)
}

/// Well-conditioned random positive-definite matrix `B B'` with
/// `B = I + 0.3 N(0,1)` entrywise.
pub fn random_pd<R: Rng + ?Sized>(p: usize, rng: &mut R) -> SymPd<f64> {
    let mut b = vec![0.0f64; p * p];
    for (idx, v) in b.iter_mut().enumerate() {
        let noise = 0.3 * <f64 as crate::scalar::Scalar>::std_normal(rng);
        *v = if idx % (p + 1) == 0 { 1.0 + noise } else { noise };
    }
    let mut data = vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += b[i * p + k] * b[j * p + k];
            }
            data[i * p + j] = acc;
        }
    }
    SymPd::new(p, data).expect("B B' is positive definite by construction")
}

/// Complete description of a Monte Carlo experiment. Serializes canonically;
/// the SHA-256 of the serialized form is the experiment fingerprint embedded
/// in reports and file names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: StatKind,
    pub cone: ConeKind,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub reps: u64,
    pub seed: SeedSpec,
    pub critmethod: CritMethod,
    pub sigma: SigmaSpec,
    /// Mean vectors at which power is evaluated.
    pub theta_grid: Vec<Vec<f64>>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if self.n < self.p + 2 {
            return Err(Error::domain("need n >= p + 2"));
        }
        if self.reps < 1_000 {
            return Err(Error::domain("experiments need at least 1e3 replicates"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("alpha must lie in (0, 1)"));
        }
        if let Some(bad) = self.theta_grid.iter().find(|t| t.len() != self.p) {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: bad.len(),
            });
        }
        if let CritMethod::Bayes { m, weight_reps } = self.critmethod {
            if m < self.p + 2 {
                return Err(Error::domain("prior degrees of freedom need m >= p + 2"));
            }
            if weight_reps < 10_000 {
                return Err(Error::domain("Bayes weights need at least 1e4 replicates"));
            }
        }
        self.build_sigma().map(|_| ())
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialization is infallible");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_sigma(&self) -> Result<SymPd<f64>> {
        self.sigma.build(self.p, &self.seed)
    }

    pub fn cone(&self) -> Cone {
        self.cone.cone(self.p)
    }
}

/// Runs `f` on a rayon pool sized by `CONETEST_THREADS` when that variable is
/// set; otherwise uses the global pool.
pub fn run_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(f()),
        Ok(raw) => {
            let threads: usize = raw
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("{THREADS_ENV}={raw:?} is not an integer")))?;
            if threads == 0 {
                return Err(Error::domain(format!("{THREADS_ENV} must be positive")));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::domain(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Computes the statistic of the requested kind.
pub fn compute_statistic(
    kind: StatKind,
    cone: &Cone,
    stats: &SampleStats<f64>,
) -> Result<StatisticResult<f64>> {
    match kind {
        StatKind::T2 => hotelling_t2(stats),
        StatKind::Lrt => lrt(stats, cone),
        StatKind::Uit => uit(stats, cone),
        StatKind::Fuit => fuit(stats, cone),
    }
}

fn rejects(kind: StatKind, result: &StatisticResult<f64>, crit: f64) -> bool {
    match kind {
        StatKind::Fuit => fuit_rejects(result, crit),
        _ => result.value >= crit,
    }
}

fn bisect_tail(tail: impl Fn(f64) -> Result<f64>, alpha: f64) -> Result<f64> {
    let mut hi = 1.0;
    let mut grow = 0;
    while tail(hi)? > alpha {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::NonConvergence("critical value bracket".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail(mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical value for a `(kind, cone, method)` combination. The Bayes method
/// applies to the cone statistics only; `seed` feeds its weight simulation.
pub fn critical_value(
    kind: StatKind,
    cone: ConeKind,
    method: CritMethod,
    alpha: f64,
    n: usize,
    p: usize,
    seed: &SeedSpec,
) -> Result<f64> {
    match kind {
        StatKind::T2 => t2_critical(alpha, n, p),
        StatKind::Fuit => fuit_critical(alpha, n, p),
        StatKind::Lrt | StatKind::Uit => match cone {
            // Unrestricted alternative: both cone statistics reduce to the
            // full-face ratio with null law G_{p,n-p}.
            ConeKind::Global => {
                bisect_tail(|c| Ok(g_tail(p as u32, (n - p) as u32, c)), alpha)
            }
            ConeKind::Orthant | ConeKind::HalfSpace => match method {
                CritMethod::Max => critval_max(kind, alpha, n, p),
                CritMethod::Bayes { m, weight_reps } => {
                    let prior = PriorSpec::InvWishart {
                        gamma: SymPd::identity(p),
                        m,
                    };
                    let weights = bayes_weights(
                        &prior,
                        n,
                        p,
                        None,
                        weight_reps,
                        seed.derive(CHILD_WEIGHTS),
                    )?;
                    critval_bayes(kind, alpha, &weights)
                }
            },
        },
    }
}

/// Standard error of a Bayes-averaged null tail induced by the Monte Carlo
/// uncertainty of the weights (the component tails are exact).
pub fn bayes_tail_se(
    kind: StatKind,
    c: f64,
    weights: &crate::bayesweights::BayesWeights<f64>,
) -> Result<f64> {
    let (n, p) = (weights.n, weights.p);
    let mut var = 0.0;
    for k in 0..=p {
        let tail_k = crate::nulldist::component_tail(kind, n, p, k, c)?;
        var += (weights.se[k] * tail_k).powi(2);
    }
    Ok(var.sqrt())
}

fn binom_se(hits: u64, reps: u64) -> (f64, f64) {
    let rate = hits as f64 / reps as f64;
    (rate, (rate * (1.0 - rate) / reps as f64).sqrt())
}

fn raw_normals<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Vec<f64> {
    (0..n * p)
        .map(|_| crate::scalar::Scalar::std_normal(rng))
        .collect()
}

fn stats_from_z(n: usize, p: usize, sigma: &SymPd<f64>, z: &[f64]) -> Result<SampleStats<f64>> {
    let mut rows = vec![0.0f64; n * p];
    for i in 0..n {
        let xi = sigma.chol_mul(&z[i * p..(i + 1) * p]);
        rows[i * p..(i + 1) * p].copy_from_slice(&xi);
    }
    stats_from_rows(n, p, &rows)
}

/// Rejection tallies for one statistic over a grid of mean shifts, with
/// common random numbers across the grid (one raw dataset per replicate).
#[allow(clippy::too_many_arguments)]
fn simulate_hits(
    kind: StatKind,
    cone: &Cone,
    n: usize,
    sigma: &SymPd<f64>,
    thetas: &[Vec<f64>],
    crit: f64,
    reps: u64,
    seed: SeedSpec,
) -> Result<Vec<u64>> {
    let p = sigma.dim();
    let m = thetas.len();
    (0..reps)
        .into_par_iter()
        .try_fold(
            || vec![0u64; m],
            |mut acc, rep| -> Result<Vec<u64>> {
                let mut rng = seed.derive(rep).rng();
                let z = raw_normals(n, p, &mut rng);
                let base = stats_from_z(n, p, sigma, &z)?;
                for (t, theta) in thetas.iter().enumerate() {
                    let mean: Vec<f64> =
                        base.mean.iter().zip(theta).map(|(a, b)| a + b).collect();
                    let stats = SampleStats::new(n, mean, base.cov.clone())?;
                    let res = compute_statistic(kind, cone, &stats)?;
                    if rejects(kind, &res, crit) {
                        acc[t] += 1;
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; m],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullPoint {
    pub c: f64,
    pub empirical: f64,
    pub se_empirical: f64,
    pub mixture: f64,
    pub se_mixture: f64,
    pub flagged: bool,
}

/// Empirical null tails against the mixture prediction over a grid of cutoffs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullValidationReport {
    pub schema: u32,
    pub name: String,
    pub fingerprint: String,
    pub seed: SeedSpec,
    pub kind: StatKind,
    pub cone: ConeKind,
    pub n: usize,
    pub p: usize,
    pub reps: u64,
    pub sigma_sha256: String,
    pub weights: Vec<f64>,
    pub weight_se: Vec<f64>,
    pub grid: Vec<NullPoint>,
    pub max_abs_dev: f64,
    pub all_within: bool,
}

/// Exact face-mixture weights where they are known in closed form, otherwise
/// simulated. Half-space: half/half on the two largest faces, for every
/// covariance. Global: all mass on the full face.
fn weights_for(
    cone: ConeKind,
    sigma: &SymPd<f64>,
    weight_reps: u64,
    seed: SeedSpec,
) -> Result<MixtureWeights<f64>> {
    let p = sigma.dim();
    match cone {
        ConeKind::Orthant => crate::nulldist::mixture_weights(sigma, weight_reps, seed),
        ConeKind::HalfSpace => {
            let mut w = vec![0.0; p + 1];
            w[p] = 0.5;
            w[p - 1] = 0.5;
            Ok(MixtureWeights {
                p,
                w,
                se: vec![0.0; p + 1],
                reps: 0,
            })
        }
        ConeKind::Global => {
            let mut w = vec![0.0; p + 1];
            w[p] = 1.0;
            Ok(MixtureWeights {
                p,
                w,
                se: vec![0.0; p + 1],
                reps: 0,
            })
        }
    }
}

/// Simulates the statistic under the null and compares each empirical tail on
/// `c_grid` with the mixture prediction; a point is flagged when the
/// discrepancy exceeds three combined standard errors.
pub fn validate_null(spec: &ExperimentSpec, c_grid: &[f64]) -> Result<NullValidationReport> {
    spec.validate()?;
    if c_grid.is_empty() {
        return Err(Error::domain("empty cutoff grid"));
    }
    if !matches!(spec.kind, StatKind::Lrt | StatKind::Uit) {
        return Err(Error::domain(
            "null mixture validation applies to the LRT and UIT",
        ));
    }
    let sigma = spec.build_sigma()?;
    let (n, p, reps) = (spec.n, spec.p, spec.reps);
    let weight_reps = reps.max(100_000);
    let cone = spec.cone();
    let kind = spec.kind;
    let seed = spec.seed;
    let grid: Vec<f64> = c_grid.to_vec();
    let (weights, counts) = run_pool(move || -> Result<_> {
        let weights = weights_for(spec.cone, &sigma, weight_reps, seed.derive(CHILD_WEIGHTS))?;
        let m = grid.len();
        let sim = seed.derive(CHILD_SIM);
        let counts = (0..reps)
            .into_par_iter()
            .try_fold(
                || vec![0u64; m],
                |mut acc, rep| -> Result<Vec<u64>> {
                    let mut rng = sim.derive(rep).rng();
                    let z = raw_normals(n, p, &mut rng);
                    let stats = stats_from_z(n, p, &sigma, &z)?;
                    let value = compute_statistic(kind, &cone, &stats)?.value;
                    for (i, &c) in grid.iter().enumerate() {
                        if value >= c {
                            acc[i] += 1;
                        }
                    }
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![0u64; m],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    Ok(a)
                },
            )?;
        Ok((weights, counts))
    })??;

    let sigma = spec.build_sigma()?;
    let mut points = Vec::with_capacity(c_grid.len());
    let mut max_abs_dev = 0.0f64;
    for (i, &c) in c_grid.iter().enumerate() {
        let (empirical, se_emp) = binom_se(counts[i], reps);
        let mixture = null_tail(spec.kind, c, n, p, &weights)?;
        // Weight uncertainty propagates linearly through the mixture.
        let se_mix = (0..=p)
            .map(|k| {
                let tail_k = crate::nulldist::component_tail(spec.kind, n, p, k, c).unwrap_or(0.0);
                (weights.se[k] * tail_k).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let dev = (empirical - mixture).abs();
        max_abs_dev = max_abs_dev.max(dev);
        let tol = 3.0 * (se_emp * se_emp + se_mix * se_mix).sqrt();
        points.push(NullPoint {
            c,
            empirical,
            se_empirical: se_emp,
            mixture,
            se_mixture: se_mix,
            flagged: dev > tol,
        });
    }
    let all_within = points.iter().all(|pt| !pt.flagged);
    Ok(NullValidationReport {
        schema: SCHEMA_VERSION,
        name: spec.name.clone(),
        fingerprint: spec.fingerprint(),
        seed: spec.seed,
        kind: spec.kind,
        cone: spec.cone,
        n,
        p,
        reps,
        sigma_sha256: sigma_fingerprint(&sigma),
        weights: weights.w.clone(),
        weight_se: weights.se.clone(),
        grid: points,
        max_abs_dev,
        all_within,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerPoint {
    pub theta: Vec<f64>,
    pub power: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerCurve {
    pub schema: u32,
    pub name: String,
    pub fingerprint: String,
    pub seed: SeedSpec,
    pub kind: StatKind,
    pub cone: ConeKind,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub reps: u64,
    pub critical_value: f64,
    pub points: Vec<PowerPoint>,
}

/// Rejection rate at every mean in the experiment's grid, with common random
/// numbers across the grid.
pub fn power_curve(spec: &ExperimentSpec) -> Result<PowerCurve> {
    spec.validate()?;
    if spec.theta_grid.is_empty() {
        return Err(Error::domain("empty theta grid"));
    }
    let sigma = spec.build_sigma()?;
    let crit = critical_value(
        spec.kind,
        spec.cone,
        spec.critmethod,
        spec.alpha,
        spec.n,
        spec.p,
        &spec.seed,
    )?;
    let cone = spec.cone();
    let hits = run_pool(|| {
        simulate_hits(
            spec.kind,
            &cone,
            spec.n,
            &sigma,
            &spec.theta_grid,
            crit,
            spec.reps,
            spec.seed.derive(CHILD_SIM),
        )
    })??;
    let points = spec
        .theta_grid
        .iter()
        .zip(&hits)
        .map(|(theta, &h)| {
            let (power, se) = binom_se(h, spec.reps);
            PowerPoint {
                theta: theta.clone(),
                power,
                se,
            }
        })
        .collect();
    Ok(PowerCurve {
        schema: SCHEMA_VERSION,
        name: spec.name.clone(),
        fingerprint: spec.fingerprint(),
        seed: spec.seed,
        kind: spec.kind,
        cone: spec.cone,
        n: spec.n,
        p: spec.p,
        alpha: spec.alpha,
        reps: spec.reps,
        critical_value: crit,
        points,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationPoint {
    pub theta: Vec<f64>,
    pub power_orthant: f64,
    pub se_orthant: f64,
    pub power_halfspace: f64,
    pub se_halfspace: f64,
    /// Half-space power exceeds the orthant power by more than three combined
    /// standard errors.
    pub strict: bool,
}

/// Orthant statistic versus its half-space envelope at the shared critical
/// value, replicate by replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub schema: u32,
    pub name: String,
    pub fingerprint: String,
    pub seed: SeedSpec,
    pub kind: StatKind,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub reps: u64,
    pub critical_value: f64,
    /// Replicates where the half-space statistic fell below the orthant one.
    pub pathwise_violations: u64,
    pub points: Vec<DominationPoint>,
    pub strict_points: usize,
    /// Half-space power is at least the orthant power minus three combined
    /// standard errors at every grid point.
    pub dominated: bool,
}

/// Compares the orthant statistic with the dominating half-space statistic on
/// identical replicates: both use the same (maximal) critical value, the
/// pathwise ordering is checked on every draw, and the powers are compared on
/// the experiment's grid.
pub fn domination_report(spec: &ExperimentSpec) -> Result<DominationReport> {
    spec.validate()?;
    if spec.cone != ConeKind::Orthant {
        return Err(Error::domain("domination study starts from the orthant"));
    }
    if !matches!(spec.kind, StatKind::Lrt | StatKind::Uit) {
        return Err(Error::domain("domination study applies to the LRT and UIT"));
    }
    if spec.theta_grid.is_empty() {
        return Err(Error::domain("empty theta grid"));
    }
    let sigma = spec.build_sigma()?;
    // The supremum-based critical value is shared: for the orthant it is the
    // sup over covariances, for the half-space it is exact.
    let crit_a = critical_value(
        spec.kind,
        ConeKind::Orthant,
        CritMethod::Max,
        spec.alpha,
        spec.n,
        spec.p,
        &spec.seed,
    )?;
    let crit_b = critical_value(
        spec.kind,
        ConeKind::HalfSpace,
        CritMethod::Max,
        spec.alpha,
        spec.n,
        spec.p,
        &spec.seed,
    )?;
    if (crit_a - crit_b).abs() > 1e-9 * (1.0 + crit_a.abs()) {
        return Err(Error::IdentityCheck(format!(
            "shared critical value mismatch: {crit_a:e} vs {crit_b:e}"
        )));
    }
    let (n, p, reps) = (spec.n, spec.p, spec.reps);
    let kind = spec.kind;
    let cone_a = Cone::Orthant(p);
    let cone_b = Cone::HalfSpace(p);
    let thetas = spec.theta_grid.clone();
    let m = thetas.len();
    let sim = spec.seed.derive(CHILD_SIM);
    // Layout: hits_a[0..m], hits_b[m..2m], pathwise violations at 2m.
    let tallies = run_pool(move || {
        (0..reps)
            .into_par_iter()
            .try_fold(
                || vec![0u64; 2 * m + 1],
                |mut acc, rep| -> Result<Vec<u64>> {
                    let mut rng = sim.derive(rep).rng();
                    let z = raw_normals(n, p, &mut rng);
                    let base = stats_from_z(n, p, &sigma, &z)?;
                    for (t, theta) in thetas.iter().enumerate() {
                        let mean: Vec<f64> =
                            base.mean.iter().zip(theta).map(|(a, b)| a + b).collect();
                        let stats = SampleStats::new(n, mean, base.cov.clone())?;
                        let va = compute_statistic(kind, &cone_a, &stats)?.value;
                        let vb = compute_statistic(kind, &cone_b, &stats)?.value;
                        if vb < va - 1e-10 * (1.0 + va.abs()) {
                            acc[2 * m] += 1;
                        }
                        if va >= crit_a {
                            acc[t] += 1;
                        }
                        if vb >= crit_a {
                            acc[m + t] += 1;
                        }
                    }
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![0u64; 2 * m + 1],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    Ok(a)
                },
            )
    })??;
    let mut points = Vec::with_capacity(m);
    let mut dominated = true;
    let mut strict_points = 0usize;
    for (t, theta) in spec.theta_grid.iter().enumerate() {
        let (pa, sa) = binom_se(tallies[t], reps);
        let (pb, sb) = binom_se(tallies[m + t], reps);
        let se_comb = (sa * sa + sb * sb).sqrt();
        if pb < pa - 3.0 * se_comb {
            dominated = false;
        }
        let strict = pb > pa + 3.0 * se_comb;
        if strict {
            strict_points += 1;
        }
        points.push(DominationPoint {
            theta: theta.clone(),
            power_orthant: pa,
            se_orthant: sa,
            power_halfspace: pb,
            se_halfspace: sb,
            strict,
        });
    }
    Ok(DominationReport {
        schema: SCHEMA_VERSION,
        name: spec.name.clone(),
        fingerprint: spec.fingerprint(),
        seed: spec.seed,
        kind: spec.kind,
        n,
        p,
        alpha: spec.alpha,
        reps,
        critical_value: crit_a,
        pathwise_violations: tallies[2 * m],
        points,
        strict_points,
        dominated,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityPoint {
    pub sigma_sha256: String,
    pub rate: f64,
    pub se: f64,
    pub within: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasWitness {
    pub theta: Vec<f64>,
    pub power: f64,
    pub se: f64,
    /// Power is below `alpha` by more than three standard errors.
    pub biased: bool,
}

/// Half-space similarity across covariances, plus a bias search for the
/// orthant statistic at the experiment's grid of means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityBiasReport {
    pub schema: u32,
    pub name: String,
    pub fingerprint: String,
    pub seed: SeedSpec,
    pub kind: StatKind,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub reps: u64,
    pub critical_value: f64,
    pub null_rates: Vec<SimilarityPoint>,
    /// Every covariance gave a null rejection rate within three standard
    /// errors of `alpha`.
    pub similar: bool,
    pub bias_witnesses: Vec<BiasWitness>,
    pub any_bias: bool,
}

/// Verifies that the half-space test's null size does not depend on the
/// covariance (simulated over `num_sigma` random draws), and evaluates the
/// orthant test's power at the experiment's means, flagging any below `alpha` —
/// witnesses of bias.
pub fn similarity_and_bias(spec: &ExperimentSpec, num_sigma: usize) -> Result<SimilarityBiasReport> {
    spec.validate()?;
    if !matches!(spec.kind, StatKind::Lrt | StatKind::Uit) {
        return Err(Error::domain(
            "similarity analysis applies to the LRT and UIT",
        ));
    }
    if num_sigma == 0 {
        return Err(Error::domain("need at least one covariance"));
    }
    let crit = critval_max(spec.kind, spec.alpha, spec.n, spec.p)?;
    let (n, p, reps) = (spec.n, spec.p, spec.reps);
    let zero = vec![vec![0.0; p]];
    let mut null_rates = Vec::with_capacity(num_sigma);
    let mut similar = true;
    for i in 0..num_sigma {
        let mut rng = spec.seed.derive(CHILD_SIGMA).derive(1_000 + i as u64).rng();
        let sigma = random_pd(p, &mut rng);
        let cone = Cone::HalfSpace(p);
        let hits = run_pool(|| {
            simulate_hits(
                spec.kind,
                &cone,
                n,
                &sigma,
                &zero,
                crit,
                reps,
                spec.seed.derive(CHILD_SIM).derive(i as u64),
            )
        })??;
        let (rate, se) = binom_se(hits[0], reps);
        let within = (rate - spec.alpha).abs() <= 3.0 * se;
        if !within {
            similar = false;
        }
        null_rates.push(SimilarityPoint {
            sigma_sha256: sigma_fingerprint(&sigma),
            rate,
            se,
            within,
        });
    }
    let mut bias_witnesses = Vec::new();
    let mut any_bias = false;
    if !spec.theta_grid.is_empty() {
        let sigma = spec.build_sigma()?;
        let cone = Cone::Orthant(p);
        let hits = run_pool(|| {
            simulate_hits(
                spec.kind,
                &cone,
                n,
                &sigma,
                &spec.theta_grid,
                crit,
                reps,
                spec.seed.derive(CHILD_SIM).derive(u64::MAX),
            )
        })??;
        for (theta, &h) in spec.theta_grid.iter().zip(&hits) {
            let (power, se) = binom_se(h, reps);
            let biased = power < spec.alpha - 3.0 * se;
            if biased {
                any_bias = true;
            }
            bias_witnesses.push(BiasWitness {
                theta: theta.clone(),
                power,
                se,
                biased,
            });
        }
    }
    Ok(SimilarityBiasReport {
        schema: SCHEMA_VERSION,
        name: spec.name.clone(),
        fingerprint: spec.fingerprint(),
        seed: spec.seed,
        kind: spec.kind,
        n,
        p,
        alpha: spec.alpha,
        reps,
        critical_value: crit,
        null_rates,
        similar,
        bias_witnesses,
        any_bias,
    })
}

/// One contrast instance: a mean in the interior of the negative dual ray
/// that Hotelling's test rejects while the cone test accepts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct T2Contrast {
    pub mean: Vec<f64>,
    pub t2_value: f64,
    pub t2_critical: f64,
    pub uit_value: f64,
    pub uit_critical: f64,
    pub t2_rejects: bool,
    pub uit_accepts: bool,
}

/// Acceptance-region geometry: midpoint convexity of the cone tests in the
/// joint (mean, covariance) statistic space, vanishing of the statistic on
/// the polar cone, and the contrast with Hotelling's test there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryReport {
    pub schema: u32,
    pub seed: SeedSpec,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub midpoint_trials: u64,
    pub orthant_violations: u64,
    pub halfspace_violations: u64,
    pub t2_violations: u64,
    pub ray_trials: u64,
    pub ray_max_value: f64,
    pub ray_all_accepted: bool,
    pub contrast: T2Contrast,
}

fn midpoint_stats(a: &SampleStats<f64>, b: &SampleStats<f64>) -> Result<SampleStats<f64>> {
    let p = a.dim();
    let mean: Vec<f64> = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    let data: Vec<f64> = a
        .cov
        .entries()
        .iter()
        .zip(b.cov.entries())
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    SampleStats::new(a.n, mean, SymPd::new(p, data)?)
}

/// Probes the acceptance regions at level `alpha`: draws pairs of accepted
/// (mean, covariance) instances, checks their midpoints are still accepted
/// (convexity), verifies the union-intersection statistic vanishes on means
/// of the form `-S u`, `u >= 0`, and constructs the Hotelling contrast point.
pub fn geometry_probe(
    n: usize,
    p: usize,
    alpha: f64,
    midpoint_trials: u64,
    ray_trials: u64,
    seed: SeedSpec,
) -> Result<GeometryReport> {
    if p == 0 || n < p + 2 {
        return Err(Error::domain("need p >= 1 and n >= p + 2"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    if midpoint_trials == 0 || ray_trials == 0 {
        return Err(Error::domain("need at least one trial of each type"));
    }
    let crit_cone = critval_max(StatKind::Uit, alpha, n, p)?;
    let crit_t2 = t2_critical(alpha, n, p)?;
    let cone_o = Cone::Orthant(p);
    let cone_h = Cone::HalfSpace(p);
    let zero = vec![0.0f64; p];

    // Draws a (mean, covariance) instance accepted by `value_of`; null draws
    // are accepted with probability >= 1 - alpha so a short retry loop
    // suffices.
    let accepted_instance = |trial_seed: SeedSpec,
                             value_of: &dyn Fn(&SampleStats<f64>) -> Result<f64>,
                             crit: f64|
     -> Result<SampleStats<f64>> {
        for attempt in 0..200u64 {
            let child = trial_seed.derive(attempt);
            let mut rng = child.rng();
            let sigma = random_pd(p, &mut rng);
            let stats = sample_dataset(n, &zero, &sigma, child.derive(1))?;
            if value_of(&stats)? < crit {
                return Ok(stats);
            }
        }
        Err(Error::NonConvergence(
            "no accepted instance in 200 attempts".into(),
        ))
    };

    let midpoints = run_pool(|| -> Result<Vec<u64>> {
        (0..midpoint_trials)
            .into_par_iter()
            .try_fold(
                || vec![0u64; 3],
                |mut acc, trial| -> Result<Vec<u64>> {
                    let ts = seed.derive(CHILD_SIM).derive(trial);
                    type Check<'a> = (&'a dyn Fn(&SampleStats<f64>) -> Result<f64>, f64, usize);
                    let checks: [Check; 3] = [
                        (
                            &|s| Ok(compute_statistic(StatKind::Uit, &cone_o, s)?.value),
                            crit_cone,
                            0,
                        ),
                        (
                            &|s| Ok(compute_statistic(StatKind::Uit, &cone_h, s)?.value),
                            crit_cone,
                            1,
                        ),
                        (&|s| Ok(hotelling_t2(s)?.value), crit_t2, 2),
                    ];
                    for (value_of, crit, slot) in checks {
                        let a = accepted_instance(ts.derive(2 * slot as u64), value_of, crit)?;
                        let b = accepted_instance(ts.derive(2 * slot as u64 + 1), value_of, crit)?;
                        let mid = midpoint_stats(&a, &b)?;
                        if value_of(&mid)? > crit * (1.0 + 1e-9) {
                            acc[slot] += 1;
                        }
                    }
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![0u64; 3],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    Ok(a)
                },
            )
    })??;

    // Polar-cone ray: means of the form -S u with u >= 0 project to the
    // origin, so the statistic must vanish and the test must accept.
    let mut ray_max_value = 0.0f64;
    let mut ray_all_accepted = true;
    let mut contrast_sigma: Option<SymPd<f64>> = None;
    for trial in 0..ray_trials {
        let child = seed.derive(CHILD_SIGMA).derive(trial);
        let mut rng = child.rng();
        let sigma = random_pd(p, &mut rng);
        let u: Vec<f64> = (0..p)
            .map(|_| {
                let v: f64 = crate::scalar::Scalar::std_normal(&mut rng);
                v.abs() + 1e-3
            })
            .collect();
        let su = sigma.mul_vec(&u);
        let mean: Vec<f64> = su.iter().map(|v| -v).collect();
        let stats = SampleStats::new(n, mean, sigma.clone())?;
        let value = compute_statistic(StatKind::Uit, &cone_o, &stats)?.value;
        ray_max_value = ray_max_value.max(value);
        if value >= crit_cone {
            ray_all_accepted = false;
        }
        if contrast_sigma.is_none() {
            contrast_sigma = Some(sigma);
        }
    }

    // Hotelling contrast: walk out along -S 1 until T^2 = 2 * its critical
    // value; the cone statistic stays at zero there.
    let sigma = contrast_sigma.expect("ray_trials >= 1");
    let ones_qf: f64 = sigma.entries().iter().sum();
    let lambda = (2.0 * crit_t2 / (n as f64 * ones_qf)).sqrt();
    let s1 = sigma.mul_vec(&vec![1.0; p]);
    let mean: Vec<f64> = s1.iter().map(|v| -lambda * v).collect();
    let stats = SampleStats::new(n, mean.clone(), sigma)?;
    let t2_value = hotelling_t2(&stats)?.value;
    let uit_value = compute_statistic(StatKind::Uit, &cone_o, &stats)?.value;
    let contrast = T2Contrast {
        mean,
        t2_value,
        t2_critical: crit_t2,
        uit_value,
        uit_critical: crit_cone,
        t2_rejects: t2_value >= crit_t2,
        uit_accepts: uit_value < crit_cone,
    };

    Ok(GeometryReport {
        schema: SCHEMA_VERSION,
        seed,
        n,
        p,
        alpha,
        midpoint_trials,
        orthant_violations: midpoints[0],
        halfspace_violations: midpoints[1],
        t2_violations: midpoints[2],
        ray_trials,
        ray_max_value,
        ray_all_accepted,
        contrast,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupPoint {
    pub rho: f64,
    pub rate: f64,
    pub se: f64,
}

/// Null rejection rates of the orthant test at its supremum-based critical
/// value along an equicorrelated covariance sequence approaching the
/// least-favorable limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupApproachReport {
    pub schema: u32,
    pub seed: SeedSpec,
    pub kind: StatKind,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub reps: u64,
    pub critical_value: f64,
    pub levels: Vec<SupPoint>,
    /// Rates never drop by more than three combined standard errors between
    /// consecutive levels.
    pub nondecreasing: bool,
    /// Final rate lies within three standard errors of `alpha`.
    pub final_within: bool,
}

/// Simulates the orthant test's null size along `Sigma_k` equicorrelated with
/// `rho_k = 1 - 10^{-k}`, `k = 0..levels`, sharing raw normals across levels.
/// The size climbs towards `alpha`, which is attained only in the singular
/// limit.
pub fn sup_approach(
    kind: StatKind,
    n: usize,
    p: usize,
    alpha: f64,
    levels: usize,
    reps: u64,
    seed: SeedSpec,
) -> Result<SupApproachReport> {
    if !matches!(kind, StatKind::Lrt | StatKind::Uit) {
        return Err(Error::domain("supremum approach applies to the LRT and UIT"));
    }
    if levels < 2 {
        return Err(Error::domain("need at least two covariance levels"));
    }
    if reps < 1_000 {
        return Err(Error::domain("experiments need at least 1e3 replicates"));
    }
    let crit = critval_max(kind, alpha, n, p)?;
    let rhos: Vec<f64> = (0..levels)
        .map(|k| 1.0 - 10f64.powi(-(k as i32)))
        .collect();
    let sigmas: Vec<SymPd<f64>> = rhos
        .iter()
        .map(|&rho| equicorrelated(p, rho))
        .collect::<Result<_>>()?;
    let cone = Cone::Orthant(p);
    let sim = seed.derive(CHILD_SIM);
    let counts = run_pool(|| {
        (0..reps)
            .into_par_iter()
            .try_fold(
                || vec![0u64; levels],
                |mut acc, rep| -> Result<Vec<u64>> {
                    let mut rng = sim.derive(rep).rng();
                    let z = raw_normals(n, p, &mut rng);
                    for (k, sigma) in sigmas.iter().enumerate() {
                        let stats = stats_from_z(n, p, sigma, &z)?;
                        let value = compute_statistic(kind, &cone, &stats)?.value;
                        if value >= crit {
                            acc[k] += 1;
                        }
                    }
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![0u64; levels],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    Ok(a)
                },
            )
    })??;
    let points: Vec<SupPoint> = rhos
        .iter()
        .zip(&counts)
        .map(|(&rho, &h)| {
            let (rate, se) = binom_se(h, reps);
            SupPoint { rho, rate, se }
        })
        .collect();
    let nondecreasing = points.windows(2).all(|w| {
        let tol = 3.0 * (w[0].se * w[0].se + w[1].se * w[1].se).sqrt();
        w[1].rate >= w[0].rate - tol
    });
    let last = points.last().expect("levels >= 2");
    let final_within = (last.rate - alpha).abs() <= 3.0 * last.se.max(1e-12);
    Ok(SupApproachReport {
        schema: SCHEMA_VERSION,
        seed,
        kind,
        n,
        p,
        alpha,
        reps,
        critical_value: crit,
        levels: points,
        nondecreasing,
        final_within,
    })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn theta_header(p: usize) -> String {
    (0..p).map(|j| format!("theta_{j}")).collect::<Vec<_>>().join(",")
}

fn theta_row(theta: &[f64]) -> String {
    theta.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(",")
}

impl NullValidationReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={} fingerprint={} seed={}/{}\nc,empirical,se_empirical,mixture,se_mixture,flagged\n",
            self.schema, self.fingerprint, self.seed.master_seed, self.seed.stream_id
        );
        for pt in &self.grid {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt17(pt.c),
                fmt17(pt.empirical),
                fmt17(pt.se_empirical),
                fmt17(pt.mixture),
                fmt17(pt.se_mixture),
                pt.flagged
            ));
        }
        out
    }
}

impl PowerCurve {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={} fingerprint={} seed={}/{} critical_value={}\n{},power,se\n",
            self.schema,
            self.fingerprint,
            self.seed.master_seed,
            self.seed.stream_id,
            fmt17(self.critical_value),
            theta_header(self.p)
        );
        for pt in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                theta_row(&pt.theta),
                fmt17(pt.power),
                fmt17(pt.se)
            ));
        }
        out
    }
}

impl DominationReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={} fingerprint={} seed={}/{} critical_value={} pathwise_violations={}\n{},power_orthant,se_orthant,power_halfspace,se_halfspace,strict\n",
            self.schema,
            self.fingerprint,
            self.seed.master_seed,
            self.seed.stream_id,
            fmt17(self.critical_value),
            self.pathwise_violations,
            theta_header(self.p)
        );
        for pt in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                theta_row(&pt.theta),
                fmt17(pt.power_orthant),
                fmt17(pt.se_orthant),
                fmt17(pt.power_halfspace),
                fmt17(pt.se_halfspace),
                pt.strict
            ));
        }
        out
    }
}

impl SimilarityBiasReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={} fingerprint={} seed={}/{} critical_value={}\nsection,key,rate_or_power,se,flag\n",
            self.schema,
            self.fingerprint,
            self.seed.master_seed,
            self.seed.stream_id,
            fmt17(self.critical_value)
        );
        for pt in &self.null_rates {
            out.push_str(&format!(
                "similarity,{},{},{},{}\n",
                pt.sigma_sha256,
                fmt17(pt.rate),
                fmt17(pt.se),
                pt.within
            ));
        }
        for pt in &self.bias_witnesses {
            out.push_str(&format!(
                "bias,{},{},{},{}\n",
                pt.theta
                    .iter()
                    .map(|v| fmt17(*v))
                    .collect::<Vec<_>>()
                    .join(";"),
                fmt17(pt.power),
                fmt17(pt.se),
                pt.biased
            ));
        }
        out
    }
}

impl SupApproachReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={} seed={}/{} critical_value={} nondecreasing={} final_within={}\nrho,rate,se\n",
            self.schema,
            self.seed.master_seed,
            self.seed.stream_id,
            fmt17(self.critical_value),
            self.nondecreasing,
            self.final_within
        );
        for pt in &self.levels {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt17(pt.rho),
                fmt17(pt.rate),
                fmt17(pt.se)
            ));
        }
        out
    }
}

impl GeometryReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={} seed={}/{}\nkey,value\n",
            self.schema, self.seed.master_seed, self.seed.stream_id
        );
        let rows: Vec<(&str, String)> = vec![
            ("midpoint_trials", self.midpoint_trials.to_string()),
            ("orthant_violations", self.orthant_violations.to_string()),
            ("halfspace_violations", self.halfspace_violations.to_string()),
            ("t2_violations", self.t2_violations.to_string()),
            ("ray_trials", self.ray_trials.to_string()),
            ("ray_max_value", fmt17(self.ray_max_value)),
            ("ray_all_accepted", self.ray_all_accepted.to_string()),
            ("contrast_t2_value", fmt17(self.contrast.t2_value)),
            ("contrast_t2_critical", fmt17(self.contrast.t2_critical)),
            ("contrast_uit_value", fmt17(self.contrast.uit_value)),
            ("contrast_t2_rejects", self.contrast.t2_rejects.to_string()),
            ("contrast_uit_accepts", self.contrast.uit_accepts.to_string()),
        ];
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

/// Writes via a temporary sibling file and an atomic rename, so a crash never
/// leaves a truncated report behind.
pub fn atomic_write(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Report file name embedding a fingerprint prefix: `<stem>-<fp16>.<ext>`.
pub fn report_path(dir: &Path, stem: &str, fingerprint: &str, ext: &str) -> PathBuf {
    let fp = &fingerprint[..fingerprint.len().min(16)];
    dir.join(format!("{stem}-{fp}.{ext}"))
}

/// Serializes a report to pretty JSON (with trailing newline).
pub fn to_json_bytes<T: Serialize>(report: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(report)
        .map_err(|e| Error::domain(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> ExperimentSpec {
        ExperimentSpec {
            name: "test".into(),
            kind: StatKind::Uit,
            cone: ConeKind::Orthant,
            n: 12,
            p: 2,
            alpha: 0.05,
            reps: 20_000,
            seed: SeedSpec::new(0xC0FFEE),
            critmethod: CritMethod::Max,
            sigma: SigmaSpec::Identity,
            theta_grid: vec![vec![0.0, 0.0], vec![0.8, 0.8]],
        }
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let spec = base_spec();
        let fp1 = spec.fingerprint();
        let fp2 = spec.fingerprint();
        assert_eq!(fp1, fp2);
        assert_eq!(fp1.len(), 64);
        let mut other = spec.clone();
        other.reps += 1;
        assert_ne!(fp1, other.fingerprint());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = base_spec();
        let json = serde_json::to_string(&spec).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.fingerprint(), spec.fingerprint());
    }

    #[test]
    fn spec_validation_rejects_bad_fields() {
        let mut spec = base_spec();
        spec.reps = 10;
        assert!(spec.validate().is_err());
        let mut spec = base_spec();
        spec.alpha = 1.5;
        assert!(spec.validate().is_err());
        let mut spec = base_spec();
        spec.theta_grid = vec![vec![0.0; 3]];
        assert!(spec.validate().is_err());
        let mut spec = base_spec();
        spec.n = 3;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn equicorrelated_bounds() {
        assert!(equicorrelated(3, 0.9999).is_ok());
        assert!(equicorrelated(3, -0.49).is_ok());
        assert!(equicorrelated(3, -0.51).is_err());
        assert!(equicorrelated(2, 1.0).is_err());
    }

    // Under the unrestricted alternative the union-intersection statistic is
    // the Hotelling ratio divided by n - 1, so its critical value must be the
    // Hotelling one divided by n - 1.
    #[test]
    fn global_critical_value_matches_hotelling() {
        let (n, p, alpha) = (15, 3, 0.05);
        let seed = SeedSpec::new(1);
        let c = critical_value(StatKind::Uit, ConeKind::Global, CritMethod::Max, alpha, n, p, &seed)
            .unwrap();
        let t2 = t2_critical(alpha, n, p).unwrap();
        assert!(
            (c - t2 / (n as f64 - 1.0)).abs() < 1e-7 * t2,
            "{c} vs {}",
            t2 / (n as f64 - 1.0)
        );
    }

    #[test]
    fn validate_null_identity_matches_mixture() {
        let spec = base_spec();
        let grid = [0.2, 0.5, 1.0, 2.0];
        let report = validate_null(&spec, &grid).unwrap();
        assert!(
            report.all_within,
            "flagged points: {:?}",
            report
                .grid
                .iter()
                .filter(|pt| pt.flagged)
                .collect::<Vec<_>>()
        );
        assert_eq!(report.schema, 1);
        assert_eq!(report.weights.len(), 3);
    }

    #[test]
    fn power_curve_is_monotone_in_shift() {
        let spec = base_spec();
        let curve = power_curve(&spec).unwrap();
        assert_eq!(curve.points.len(), 2);
        let p0 = curve.points[0].power;
        let p1 = curve.points[1].power;
        // Size near alpha at the origin, clearly larger power at the shift.
        assert!((p0 - 0.05).abs() < 0.02, "null size {p0}");
        assert!(p1 > p0 + 0.2, "power {p1} vs size {p0}");
    }

    #[test]
    fn domination_holds_pathwise_and_in_power() {
        let mut spec = base_spec();
        spec.theta_grid = vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]];
        let report = domination_report(&spec).unwrap();
        assert_eq!(report.pathwise_violations, 0);
        assert!(report.dominated);
    }

    #[test]
    fn similarity_holds_for_halfspace() {
        let mut spec = base_spec();
        spec.cone = ConeKind::HalfSpace;
        spec.theta_grid = vec![vec![2.0, -2.0]];
        let report = similarity_and_bias(&spec, 3).unwrap();
        assert!(
            report.similar,
            "rates: {:?}",
            report.null_rates.iter().map(|r| r.rate).collect::<Vec<_>>()
        );
    }

    #[test]
    fn geometry_probe_finds_no_violations() {
        let seed = SeedSpec::new(77);
        let report = geometry_probe(12, 2, 0.05, 300, 50, seed).unwrap();
        assert_eq!(report.orthant_violations, 0);
        assert_eq!(report.halfspace_violations, 0);
        assert_eq!(report.t2_violations, 0);
        assert!(report.ray_max_value <= 1e-10, "{}", report.ray_max_value);
        assert!(report.ray_all_accepted);
        assert!(report.contrast.t2_rejects);
        assert!(report.contrast.uit_accepts);
    }

    #[test]
    fn sup_approach_climbs_to_alpha() {
        let seed = SeedSpec::new(4242);
        let report = sup_approach(StatKind::Uit, 12, 2, 0.05, 5, 40_000, seed).unwrap();
        assert!(report.nondecreasing, "levels: {:?}", report.levels);
        assert!(
            report.final_within,
            "final rate {} vs alpha",
            report.levels.last().unwrap().rate
        );
        // The identity-covariance starting point sits strictly below alpha.
        assert!(report.levels[0].rate < 0.05);
    }

    #[test]
    fn reports_are_identical_across_worker_counts() {
        let spec = base_spec();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| power_curve(&spec).unwrap())
        };
        let a = to_json_bytes(&run(1)).unwrap();
        let b = to_json_bytes(&run(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn atomic_write_and_report_path() {
        let dir = std::env::temp_dir().join(format!("conetest-mc-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = report_path(&dir, "power", &"ab".repeat(32), "json");
        assert!(path.to_string_lossy().ends_with("power-abababababababab.json"));
        atomic_write(&path, b"{}\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"{}\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_outputs_have_headers_and_rows() {
        let spec = base_spec();
        let curve = power_curve(&spec).unwrap();
        let csv = curve.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# schema=1 fingerprint="));
        assert_eq!(lines.next().unwrap(), "theta_0,theta_1,power,se");
        assert_eq!(lines.count(), 2);
    }
}
