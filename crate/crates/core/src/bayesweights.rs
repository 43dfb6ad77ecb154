//! Bayes-weighted significance levels: face-size probabilities under a
//! compound null (covariance drawn from a prior, then a null dataset) and
//! the critical values calibrated against the resulting weighted mixture.

use rand::Rng;
use rayon::prelude::*;

use crate::cones::{find_active_face, Metric};
use crate::error::{Error, Result};
use crate::matkit::{sample_dataset, SeedSpec, SymPd};
use crate::nulldist::component_tail;
use crate::scalar::Scalar;
use crate::teststats::StatKind;

/// Prior on the covariance matrix.
#[derive(Debug, Clone)]
pub enum PriorSpec<T> {
    /// Inverted Wishart with scale `gamma` and `m` degrees of freedom;
    /// the mean `gamma/(m - p - 1)` exists when `m > p + 1`.
    InvWishart { gamma: SymPd<T>, m: usize },
    /// Improper Haar measure; usable only semi-conditionally, with the
    /// covariance statistic fixed at a supplied value.
    Haar,
}

impl<T: Scalar> PriorSpec<T> {
    /// Neutral default: `gamma = I`, `m = p + 2` (smallest integer degrees
    /// of freedom with a finite mean).
    pub fn default_inv_wishart(p: usize) -> Self {
        PriorSpec::InvWishart {
            gamma: SymPd::identity(p),
            m: p + 2,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PriorSpec::InvWishart { m, .. } => format!("invwishart(m={m})"),
            PriorSpec::Haar => "haar".into(),
        }
    }
}

/// Face-size weights under the compound null, with Monte Carlo errors.
#[derive(Debug, Clone)]
pub struct BayesWeights<T> {
    pub b: Vec<T>,
    pub se: Vec<T>,
    pub prior_label: String,
    pub n: usize,
    pub p: usize,
    pub reps: u64,
}

impl<T: Scalar> BayesWeights<T> {
    /// Weight vector from explicit values (no Monte Carlo error); used for
    /// degenerate cross-checks against the max-principle calibration.
    pub fn from_weights(n: usize, p: usize, b: Vec<T>) -> Result<Self> {
        if b.len() != p + 1 {
            return Err(Error::DimensionMismatch {
                expected: p + 1,
                got: b.len(),
            });
        }
        let sum: T = b.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(1e-12) || b.iter().any(|v| *v < T::zero()) {
            return Err(Error::domain("weights must be nonnegative and sum to 1"));
        }
        Ok(BayesWeights {
            se: vec![T::zero(); p + 1],
            b,
            prior_label: "explicit".into(),
            n,
            p,
            reps: 0,
        })
    }

    /// The least-favorable two-point weights (half mass on each of the two
    /// largest face sizes).
    pub fn two_point(n: usize, p: usize) -> Self {
        let mut b = vec![T::zero(); p + 1];
        b[p - 1] = T::of(0.5);
        b[p] = T::of(0.5);
        BayesWeights {
            b,
            se: vec![T::zero(); p + 1],
            prior_label: "two-point".into(),
            n,
            p,
            reps: 0,
        }
    }
}

/// One draw from the inverted Wishart: `W ~ Wishart(gamma^{-1}, m)` via the
/// Bartlett decomposition, then `sigma = W^{-1}`.
pub fn sample_inv_wishart<T: Scalar, R: Rng + ?Sized>(
    gamma: &SymPd<T>,
    m: usize,
    rng: &mut R,
) -> Result<SymPd<T>> {
    let p = gamma.dim();
    if m < p {
        return Err(Error::domain("Wishart degrees of freedom below dimension"));
    }
    let scale = gamma.inverse()?;
    let l = scale.chol_lower();
    // Bartlett factor A: chi on the diagonal, standard normals below
    let mut a = vec![T::zero(); p * p];
    for i in 0..p {
        a[i * p + i] = T::chi_square(T::of((m - i) as f64), rng).sqrt();
        for j in 0..i {
            a[i * p + j] = T::std_normal(rng);
        }
    }
    // B = L A, W = B B'
    let mut bmat = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = T::zero();
            for k in j..=i {
                s += l[i * p + k] * a[k * p + j];
            }
            bmat[i * p + j] = s;
        }
    }
    let mut w = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = T::zero();
            for k in 0..p {
                s += bmat[i * p + k] * bmat[j * p + k];
            }
            w[i * p + j] = s;
            w[j * p + i] = s;
        }
    }
    SymPd::new(p, w)?.inverse()
}

/// Face-size tally under the prior: inverted Wishart draws a covariance and
/// then a null dataset of size `n`; Haar fixes the covariance statistic at
/// `s_fixed` and draws the mean statistic from the conditional law induced by
/// the integrated density (an elliptically-contoured Student law, whose face
/// distribution depends only on its shape matrix).
pub fn bayes_weights<T: Scalar>(
    prior: &PriorSpec<T>,
    n: usize,
    p: usize,
    s_fixed: Option<&SymPd<T>>,
    reps: u64,
    seed: SeedSpec,
) -> Result<BayesWeights<T>> {
    if reps < 10_000 {
        return Err(Error::domain("Bayes weights need at least 1e4 replicates"));
    }
    if n < p + 2 {
        return Err(Error::domain("need n >= p + 2"));
    }
    match prior {
        PriorSpec::InvWishart { gamma, m } => {
            if gamma.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: gamma.dim(),
                });
            }
            if *m <= p + 1 {
                return Err(Error::domain("inverted Wishart needs m > p + 1"));
            }
        }
        PriorSpec::Haar => {
            let s = s_fixed.ok_or_else(|| {
                Error::domain("Haar prior weights need a fixed covariance statistic")
            })?;
            if s.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: s.dim(),
                });
            }
        }
    }
    let theta = vec![T::zero(); p];
    let haar_metric = match prior {
        PriorSpec::Haar => Some(Metric::new(s_fixed.unwrap().clone())?),
        _ => None,
    };
    let counts = (0..reps)
        .into_par_iter()
        .try_fold(
            || vec![0u64; p + 1],
            |mut acc, rep| -> Result<Vec<u64>> {
                let child = seed.derive(rep);
                let size = match prior {
                    PriorSpec::InvWishart { gamma, m } => {
                        let mut rng = child.rng();
                        let sigma = sample_inv_wishart(gamma, *m, &mut rng)?;
                        let stats = sample_dataset(n, &theta, &sigma, child.derive(1))?;
                        let metric = Metric::new(stats.cov.clone())?;
                        find_active_face(&stats.mean, &metric)?.len()
                    }
                    PriorSpec::Haar => {
                        let metric = haar_metric.as_ref().unwrap();
                        let mut rng = child.rng();
                        let z: Vec<T> = (0..p).map(|_| T::std_normal(&mut rng)).collect();
                        let nu = T::of((n - p) as f64);
                        let radial = (nu / T::chi_square(nu, &mut rng)).sqrt();
                        let x: Vec<T> = metric
                            .matrix()
                            .chol_mul(&z)
                            .into_iter()
                            .map(|v| v * radial)
                            .collect();
                        find_active_face(&x, metric)?.len()
                    }
                };
                acc[size] += 1;
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; p + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let rf = T::of(reps as f64);
    let b: Vec<T> = counts.iter().map(|&c| T::of(c as f64) / rf).collect();
    let se: Vec<T> = b
        .iter()
        .map(|&wi| (wi * (T::one() - wi) / rf).sqrt())
        .collect();
    Ok(BayesWeights {
        b,
        se,
        prior_label: prior.label(),
        n,
        p,
        reps,
    })
}

/// Weighted-mixture tail at threshold `c` under the Bayes weights.
pub fn bayes_tail<T: Scalar>(kind: StatKind, c: T, weights: &BayesWeights<T>) -> Result<T> {
    let mut tail = T::zero();
    for (k, &bk) in weights.b.iter().enumerate() {
        tail += bk * component_tail(kind, weights.n, weights.p, k, c)?;
    }
    Ok(tail)
}

/// Critical value with Bayes-weighted level: solves
/// `sum_k b[k] tail_k(c) = alpha` by bisection.
pub fn critval_bayes<T: Scalar>(kind: StatKind, alpha: T, weights: &BayesWeights<T>) -> Result<T> {
    if alpha <= T::zero() || alpha >= T::one() {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    let tail = |c: T| bayes_tail(kind, c, weights);
    let mut hi = T::one();
    let mut grow = 0;
    while tail(hi)? > alpha {
        hi *= T::of(2.0);
        grow += 1;
        if grow > 200 {
            return Err(Error::NonConvergence("Bayes critical value bracket".into()));
        }
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * T::of(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail(mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < T::of(1e-10) * (T::one() + hi) {
            break;
        }
    }
    let c = (lo + hi) * T::of(0.5);
    let resid = (tail(c)? - alpha).abs();
    if resid > T::of(1e-8) {
        return Err(Error::NonConvergence(format!(
            "Bayes critical value residual {:e}",
            resid.f64()
        )));
    }
    Ok(c)
}

/// CSV table in the mixture-weight schema plus a `prior` column.
pub fn bayes_weights_to_csv<T: Scalar>(weights: &BayesWeights<T>) -> String {
    let mut out = format!(
        "# p={} n={} prior={}\nk,w,se,reps,prior\n",
        weights.p, weights.n, weights.prior_label
    );
    for k in 0..=weights.p {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{},{}\n",
            k,
            weights.b[k].f64(),
            weights.se[k].f64(),
            weights.reps,
            weights.prior_label
        ));
    }
    out
}
