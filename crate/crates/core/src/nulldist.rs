//! Chi-bar-square null distribution machinery: the chi-square ratio law
//! `G_{a,b}`, its convolution tail for the union-intersection statistic,
//! Monte Carlo mixture weights, least-favorable critical values and
//! conservative p-values, plus the Student and F critical values used by the
//! coordinatewise and T-squared tests.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cones::{find_active_face, Metric};
use crate::error::{Error, Result};
use crate::matkit::{SeedSpec, SymPd};
use crate::scalar::Scalar;
use crate::special::{
    adaptive_simpson, f_upper_quantile, ln_beta, reg_inc_beta, student_upper_quantile,
};
use crate::teststats::StatKind;

/// `G_{a,b}(u) = P{chi2_a / chi2_b <= u}` with independent numerator and
/// denominator; `a = 0` is the point mass at zero.
pub fn g_cdf<T: Scalar>(a: u32, b: u32, u: T) -> T {
    assert!(b >= 1);
    if a == 0 {
        return if u >= T::zero() { T::one() } else { T::zero() };
    }
    if u <= T::zero() {
        return T::zero();
    }
    let half = T::of(0.5);
    reg_inc_beta(half * T::of(a as f64), half * T::of(b as f64), u / (T::one() + u))
}

pub fn g_tail<T: Scalar>(a: u32, b: u32, u: T) -> T {
    T::one() - g_cdf(a, b, u)
}

/// Tail of the convolution law for the union-intersection statistic:
/// the integral over `t ~ chi2_{p-a}/chi2_{n-p+a}` of the `G_{a,n-p}` tail at
/// `c/(1+t)`.
///
/// Computed on `s = t/(1+t) ~ Beta((p-a)/2, (n-p+a)/2)` with a further
/// `s = v^2` substitution that removes the endpoint singularity when
/// `p - a = 1`.
pub fn gstar_tail<T: Scalar>(n: usize, a: usize, p: usize, c: T) -> Result<T> {
    if a > p || n < p + 2 {
        return Err(Error::domain(format!(
            "need 0 <= a <= p and n - p >= 2, got n={n}, a={a}, p={p}"
        )));
    }
    if c < T::zero() {
        return Err(Error::domain("threshold c must be nonnegative"));
    }
    let m = (n - p) as u32;
    if a == 0 {
        return Ok(if c <= T::zero() { T::one() } else { T::zero() });
    }
    if a == p {
        return Ok(g_tail(p as u32, m, c));
    }
    if c == T::zero() {
        return Ok(T::one());
    }
    let d1 = T::of((p - a) as f64);
    let d2 = T::of((n - p + a) as f64);
    let half = T::of(0.5);
    let ln_b = ln_beta(half * d1, half * d2);
    let au = a as u32;
    // 2/B(d1/2,d2/2) * v^(d1-1) (1-v^2)^(d2/2-1) * Gbar_{a,m}(c (1-v^2)) on [0,1]
    let f = move |v: T| {
        let s = v * v;
        let w = (T::of(2.0).ln() + (d1 - T::one()) * v.max(T::min_positive_value()).ln()
            + (half * d2 - T::one()) * (T::one() - s).max(T::min_positive_value()).ln()
            - ln_b)
            .exp();
        w * g_tail(au, m, c * (T::one() - s))
    };
    let v = adaptive_simpson(&f, T::zero(), T::one(), T::of(1e-8))?;
    Ok(v.max(T::zero()).min(T::one()))
}

/// Monte Carlo face-size probabilities of a centered Gaussian with the given
/// covariance; these are the chi-bar-square mixture weights.
#[derive(Debug, Clone)]
pub struct MixtureWeights<T> {
    pub p: usize,
    pub w: Vec<T>,
    pub se: Vec<T>,
    pub reps: u64,
}

/// Tallies the active face size of `Z ~ N(0, sigma)` over `reps` draws.
/// Deterministic for a fixed seed and independent of the worker count: every
/// replicate derives its own child seed and the merge is an integer sum.
pub fn mixture_weights<T: Scalar>(
    sigma: &SymPd<T>,
    reps: u64,
    seed: SeedSpec,
) -> Result<MixtureWeights<T>> {
    if reps < 10_000 {
        return Err(Error::domain("mixture weights need at least 1e4 replicates"));
    }
    let p = sigma.dim();
    let metric = Metric::new(sigma.clone())?;
    let counts = (0..reps)
        .into_par_iter()
        .try_fold(
            || vec![0u64; p + 1],
            |mut acc, rep| -> Result<Vec<u64>> {
                let mut rng = seed.derive(rep).rng();
                let z: Vec<T> = (0..p).map(|_| T::std_normal(&mut rng)).collect();
                let x = sigma.chol_mul(&z);
                let face = find_active_face(&x, &metric)?;
                acc[face.len()] += 1;
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
    let w: Vec<T> = counts.iter().map(|&c| T::of(c as f64) / rf).collect();
    let se: Vec<T> = w
        .iter()
        .map(|&wi| (wi * (T::one() - wi) / rf).sqrt())
        .collect();
    Ok(MixtureWeights { p, w, se, reps })
}

pub(crate) fn component_tail<T: Scalar>(
    kind: StatKind,
    n: usize,
    p: usize,
    k: usize,
    c: T,
) -> Result<T> {
    match kind {
        StatKind::Lrt => Ok(if k == 0 {
            if c <= T::zero() {
                T::one()
            } else {
                T::zero()
            }
        } else {
            g_tail(k as u32, (n - p) as u32, c)
        }),
        StatKind::Uit => gstar_tail(n, k, p, c),
        _ => Err(Error::domain("mixture tails exist for the LRT and UIT only")),
    }
}

/// Null exceedance probability `P{statistic >= c}` under the mixture
/// representation, for the covariance whose weights are supplied.
pub fn null_tail<T: Scalar>(
    kind: StatKind,
    c: T,
    n: usize,
    p: usize,
    weights: &MixtureWeights<T>,
) -> Result<T> {
    if weights.p != p {
        return Err(Error::domain(format!(
            "weights computed for p={}, requested p={p}",
            weights.p
        )));
    }
    if n < p + 2 {
        return Err(Error::domain("need n - p >= 2"));
    }
    let mut tail = T::zero();
    for (k, &wk) in weights.w.iter().enumerate() {
        tail += wk * component_tail(kind, n, p, k, c)?;
    }
    Ok(tail)
}

/// Least-favorable tail: the supremum over covariances of the null exceedance
/// probability, attained in the limit at the half-mixture of the two largest
/// face sizes. The same expression is the exact Sigma-free null tail of the
/// half-space statistic.
pub fn lf_tail<T: Scalar>(kind: StatKind, n: usize, p: usize, c: T) -> Result<T> {
    if p < 1 || n < p + 2 {
        return Err(Error::domain("need p >= 1 and n - p >= 2"));
    }
    let half = T::of(0.5);
    Ok(half * component_tail(kind, n, p, p - 1, c)? + half * component_tail(kind, n, p, p, c)?)
}

/// Critical value solving `lf_tail(c) = alpha`. By the half-space/orthant
/// equivalence the same value serves the orthant (as the sup over
/// covariances) and the half-space (exactly).
pub fn critval_max<T: Scalar>(kind: StatKind, alpha: T, n: usize, p: usize) -> Result<T> {
    if alpha <= T::zero() || alpha >= T::one() {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    let tail = |c: T| lf_tail(kind, n, p, c);
    let mut hi = T::one();
    let mut grow = 0;
    while tail(hi)? > alpha {
        hi *= T::of(2.0);
        grow += 1;
        if grow > 200 {
            return Err(Error::NonConvergence("critical value bracket".into()));
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
            "critical value residual {:e}",
            resid.f64()
        )));
    }
    Ok(c)
}

/// A p-value together with its interpretation: exact for the half-space,
/// conservative (sup over covariances) for the orthant.
#[derive(Debug, Clone, Copy)]
pub struct SupPValue<T> {
    pub pvalue: T,
    pub conservative: bool,
}

pub fn sup_pvalue<T: Scalar>(
    kind: StatKind,
    orthant: bool,
    value: T,
    n: usize,
    p: usize,
) -> Result<SupPValue<T>> {
    if value < T::zero() {
        return Err(Error::domain("statistic value must be nonnegative"));
    }
    Ok(SupPValue {
        pvalue: lf_tail(kind, n, p, value)?,
        conservative: orthant,
    })
}

/// Bonferroni Student critical value `t_{n-1, alpha/p}` for the FUIT.
pub fn fuit_critical<T: Scalar>(alpha: T, n: usize, p: usize) -> Result<T> {
    if alpha <= T::zero() || alpha >= T::one() {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    let astar = alpha / T::of(p as f64);
    if astar >= T::one() {
        return Err(Error::domain("alpha/p must lie in (0, 1)"));
    }
    student_upper_quantile(astar, T::of((n - 1) as f64))
}

/// Upper-alpha point of the null T-squared law,
/// `(n-1) p / (n-p)` times the `F_{p, n-p}` upper quantile.
pub fn t2_critical<T: Scalar>(alpha: T, n: usize, p: usize) -> Result<T> {
    if n <= p {
        return Err(Error::domain("need n > p"));
    }
    let d1 = T::of(p as f64);
    let d2 = T::of((n - p) as f64);
    let f = f_upper_quantile(alpha, d1, d2)?;
    Ok(T::of((n - 1) as f64) * d1 / d2 * f)
}

/// SHA-256 fingerprint of the canonical decimal serialization of a
/// covariance matrix (rows joined by commas and newlines, 17 significant
/// digits).
pub fn sigma_fingerprint<T: Scalar>(sigma: &SymPd<T>) -> String {
    let p = sigma.dim();
    let mut text = String::new();
    for i in 0..p {
        let row: Vec<String> = (0..p).map(|j| format!("{:.16e}", sigma.get(i, j))).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV table of mixture weights: a comment header naming `p` and the
/// covariance fingerprint, then one row per face size.
pub fn weights_to_csv<T: Scalar>(weights: &MixtureWeights<T>, sigma: &SymPd<T>) -> String {
    let mut out = format!(
        "# p={} sigma_sha256={}\nk,w,se,reps\n",
        weights.p,
        sigma_fingerprint(sigma)
    );
    for k in 0..=weights.p {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{}\n",
            k,
            weights.w[k].f64(),
            weights.se[k].f64(),
            weights.reps
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::Cone;
    use crate::matkit::sample_dataset;
    use crate::teststats::{lrt, uit};
    use rand::Rng;

    fn random_pd(p: usize, rng: &mut impl Rng) -> SymPd<f64> {
        let b: Vec<f64> = (0..p * p).map(|_| f64::std_normal(rng)).collect();
        let mut m = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..p {
                    s += b[i * p + k] * b[j * p + k];
                }
                m[i * p + j] = s + if i == j { 0.3 } else { 0.0 };
            }
        }
        SymPd::new(p, m).unwrap()
    }

    #[test]
    fn g_cdf_trivial_values() {
        assert_eq!(g_cdf(3, 10, 0.0f64), 0.0);
        assert_eq!(g_cdf(0, 10, 0.5f64), 1.0);
        assert_eq!(g_cdf(0, 10, -0.5f64), 0.0);
        // G_{a,a}(1) = 1/2 by exchangeability
        for a in [1u32, 2, 5, 8] {
            assert!((g_cdf(a, a, 1.0f64) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn g_cdf_matches_chi_square_ratio_simulation() {
        let reps: u64 = 10_000_000;
        let seed = SeedSpec::new(101);
        let hits: u64 = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = seed.derive(rep).rng();
                let num = f64::chi_square(2.0, &mut rng);
                let den = f64::chi_square(10.0, &mut rng);
                u64::from(num / den <= 0.5)
            })
            .sum();
        let emp = hits as f64 / reps as f64;
        let v = g_cdf(2, 10, 0.5f64);
        let se = (emp * (1.0 - emp) / reps as f64).sqrt();
        assert!((emp - v).abs() < 3.0 * se, "emp {emp} vs {v} (se {se})");
    }

    #[test]
    fn gstar_degenerate_cases() {
        let n = 20;
        let p = 3;
        assert!((gstar_tail(n, p, p, 1.5f64).unwrap() - g_tail(3, 17, 1.5)).abs() < 1e-10);
        assert_eq!(gstar_tail(n, 0, p, 1.5f64).unwrap(), 0.0);
        assert_eq!(gstar_tail(n, 0, p, 0.0f64).unwrap(), 1.0);
        assert!((gstar_tail(n, 2, p, 0.0f64).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gstar_matches_convolution_simulation() {
        // chi2_2/chi2_17 >= c/(1 + chi2_1/chi2_18), the defining convolution
        // for n=20, p=3, a=2
        let c = 1.5f64;
        let reps: u64 = 10_000_000;
        let seed = SeedSpec::new(103);
        let hits: u64 = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = seed.derive(rep).rng();
                let ratio = f64::chi_square(2.0, &mut rng) / f64::chi_square(17.0, &mut rng);
                let t = f64::chi_square(1.0, &mut rng) / f64::chi_square(18.0, &mut rng);
                u64::from(ratio >= c / (1.0 + t))
            })
            .sum();
        let emp = hits as f64 / reps as f64;
        let v = gstar_tail(20, 2, 3, c).unwrap();
        let se = (emp * (1.0 - emp) / reps as f64).sqrt();
        assert!((emp - v).abs() < 3.0 * se, "emp {emp} vs {v} (se {se})");
    }

    #[test]
    fn tails_are_monotone_and_bounded() {
        let grid: Vec<f64> = (0..60).map(|i| 0.1 * i as f64).collect();
        for a in [1u32, 2, 4] {
            let mut prev = 1.0;
            for &u in &grid {
                let t = g_tail(a, 12, u);
                assert!((0.0..=1.0).contains(&t));
                assert!(t <= prev + 1e-12);
                prev = t;
            }
        }
        let mut prev = 1.0;
        for &c in &grid {
            let t = gstar_tail(16, 2, 4, c).unwrap();
            assert!((0.0..=1.0).contains(&t));
            assert!(t <= prev + 1e-7, "gstar not monotone at {c}");
            prev = t;
        }
    }

    #[test]
    fn identity_weights_are_binomial() {
        let w = mixture_weights(&SymPd::<f64>::identity(2), 200_000, SeedSpec::new(107)).unwrap();
        let expect = [0.25, 0.5, 0.25];
        for (k, &e) in expect.iter().enumerate() {
            assert!(
                (w.w[k] - e).abs() < 4.0 * w.se[k],
                "k={k}: {} vs {e}",
                w.w[k]
            );
        }
        let w = mixture_weights(&SymPd::<f64>::identity(3), 200_000, SeedSpec::new(109)).unwrap();
        let expect = [0.125, 0.375, 0.375, 0.125];
        for (k, &e) in expect.iter().enumerate() {
            assert!((w.w[k] - e).abs() < 4.0 * w.se[k]);
        }
    }

    #[test]
    fn correlated_weights_match_arcsine_formula() {
        let rho: f64 = 0.5;
        let sigma = SymPd::new(2, vec![1.0, rho, rho, 1.0]).unwrap();
        let w = mixture_weights(&sigma, 400_000, SeedSpec::new(113)).unwrap();
        let w2 = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        let expect = [0.5 - w2, 0.5, w2];
        for (k, &e) in expect.iter().enumerate() {
            assert!(
                (w.w[k] - e).abs() < 4.0 * w.se[k].max(1e-6),
                "k={k}: {} vs {e}",
                w.w[k]
            );
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let mut rng = SeedSpec::new(127).rng();
        let sigma = random_pd(3, &mut rng);
        let w = mixture_weights(&sigma, 20_000, SeedSpec::new(131)).unwrap();
        let sum: f64 = w.w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(w.w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn weights_reject_tiny_rep_counts() {
        assert!(mixture_weights(&SymPd::<f64>::identity(2), 100, SeedSpec::new(0)).is_err());
    }

    #[test]
    fn null_tail_closed_form_identity_sigma() {
        let sigma = SymPd::<f64>::identity(2);
        let w = mixture_weights(&sigma, 400_000, SeedSpec::new(137)).unwrap();
        let c = 2.0f64;
        let tail = null_tail(StatKind::Lrt, c, 12, 2, &w).unwrap();
        let exact = 0.5 * g_tail(1, 10, c) + 0.25 * g_tail(2, 10, c);
        let se: f64 = (0..=2)
            .map(|k| {
                let t = if k == 0 { 0.0 } else { g_tail(k as u32, 10, c) };
                (w.se[k] * t).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!((tail - exact).abs() < 4.0 * se.max(1e-6), "{tail} vs {exact}");
        assert!((null_tail(StatKind::Lrt, 0.0, 12, 2, &w).unwrap() - 1.0).abs() < 1e-12);
        assert!(null_tail(StatKind::Lrt, 500.0, 12, 2, &w).unwrap() < 1e-6);
    }

    fn simulate_null_tail(
        kind: StatKind,
        cone: Cone,
        sigma: &SymPd<f64>,
        n: usize,
        c: f64,
        reps: u64,
        seed: SeedSpec,
    ) -> f64 {
        let p = sigma.dim();
        let theta = vec![0.0; p];
        let hits: u64 = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let stats = sample_dataset(n, &theta, sigma, seed.derive(rep)).unwrap();
                let value = match kind {
                    StatKind::Lrt => lrt(&stats, &cone).unwrap().value,
                    StatKind::Uit => uit(&stats, &cone).unwrap().value,
                    _ => unreachable!(),
                };
                u64::from(value >= c)
            })
            .sum();
        hits as f64 / reps as f64
    }

    #[test]
    fn mixture_tail_matches_simulated_statistic() {
        let n = 12;
        let p = 2;
        let mut rng = SeedSpec::new(139).rng();
        let sigma = random_pd(p, &mut rng);
        let w = mixture_weights(&sigma, 200_000, SeedSpec::new(149)).unwrap();
        let reps = 100_000u64;
        for kind in [StatKind::Lrt, StatKind::Uit] {
            for c in [0.5f64, 1.0, 2.0, 4.0] {
                let mix = null_tail(kind, c, n, p, &w).unwrap();
                let emp =
                    simulate_null_tail(kind, Cone::Orthant(p), &sigma, n, c, reps, SeedSpec::new(151));
                let se_emp = (mix * (1.0 - mix) / reps as f64).sqrt();
                let se_mix: f64 = (0..=p)
                    .map(|k| {
                        let t = component_tail(kind, n, p, k, c).unwrap();
                        (w.se[k] * t).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                let tol = 3.0 * (se_emp.powi(2) + se_mix.powi(2)).sqrt();
                assert!(
                    (emp - mix).abs() < tol,
                    "{kind:?} c={c}: emp {emp} vs mix {mix} (tol {tol})"
                );
            }
        }
    }

    #[test]
    fn critval_is_monotone_in_alpha_and_inverts() {
        let n = 12;
        let p = 2;
        for kind in [StatKind::Lrt, StatKind::Uit] {
            let c10 = critval_max(kind, 0.10f64, n, p).unwrap();
            let c05 = critval_max(kind, 0.05f64, n, p).unwrap();
            let c01 = critval_max(kind, 0.01f64, n, p).unwrap();
            assert!(c10 < c05 && c05 < c01);
            let pv = sup_pvalue(kind, true, c05, n, p).unwrap();
            assert!((pv.pvalue - 0.05).abs() < 1e-8);
            assert!(pv.conservative);
            assert!(!sup_pvalue(kind, false, c05, n, p).unwrap().conservative);
        }
    }

    #[test]
    fn sup_pvalue_edge_cases() {
        let pv = sup_pvalue(StatKind::Lrt, true, 0.0f64, 12, 2).unwrap();
        assert!((pv.pvalue - 1.0).abs() < 1e-12);
        let a = sup_pvalue(StatKind::Uit, true, 1.0f64, 12, 2).unwrap().pvalue;
        let b = sup_pvalue(StatKind::Uit, true, 2.0f64, 12, 2).unwrap().pvalue;
        assert!(b < a);
    }

    #[test]
    fn halfspace_null_rejection_at_critval_is_alpha() {
        // the half-space statistic's null law is covariance-free; the
        // rejection rate at the shared critical value must be alpha
        let n = 12;
        let p = 2;
        let alpha = 0.05f64;
        let mut rng = SeedSpec::new(157).rng();
        let sigma = random_pd(p, &mut rng);
        let reps = 200_000u64;
        for kind in [StatKind::Lrt, StatKind::Uit] {
            let c = critval_max(kind, alpha, n, p).unwrap();
            let emp =
                simulate_null_tail(kind, Cone::HalfSpace(p), &sigma, n, c, reps, SeedSpec::new(163));
            let se = (alpha * (1.0 - alpha) / reps as f64).sqrt();
            assert!(
                (emp - alpha).abs() < 3.0 * se,
                "{kind:?}: emp {emp} vs {alpha}"
            );
        }
    }

    #[test]
    fn fuit_critical_matches_student_quantile() {
        let crit = fuit_critical(0.05f64, 20, 5).unwrap();
        let direct = student_upper_quantile(0.01f64, 19.0).unwrap();
        assert!((crit - direct).abs() < 1e-12);
        let one = fuit_critical(0.05f64, 20, 1).unwrap();
        let t = student_upper_quantile(0.05f64, 19.0).unwrap();
        assert!((one - t).abs() < 1e-12);
    }

    #[test]
    fn t2_critical_cases() {
        // p = 1 reduces to the squared two-sided t critical value
        let c = t2_critical(0.05f64, 20, 1).unwrap();
        let t = student_upper_quantile(0.025f64, 19.0).unwrap();
        assert!((c - t * t).abs() < 1e-7);
        assert!(t2_critical(0.01f64, 20, 3).unwrap() > t2_critical(0.05f64, 20, 3).unwrap());
    }

    #[test]
    fn t2_critical_null_simulation() {
        let n = 20;
        let p = 3;
        let alpha = 0.05f64;
        let c = t2_critical(alpha, n, p).unwrap();
        let mut rng = SeedSpec::new(167).rng();
        let sigma = random_pd(p, &mut rng);
        let reps = 200_000u64;
        let seed = SeedSpec::new(173);
        let theta = vec![0.0; p];
        let hits: u64 = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let stats = sample_dataset(n, &theta, &sigma, seed.derive(rep)).unwrap();
                let t2 = crate::teststats::hotelling_t2(&stats).unwrap().value;
                u64::from(t2 >= c)
            })
            .sum();
        let emp = hits as f64 / reps as f64;
        let se = (alpha * (1.0 - alpha) / reps as f64).sqrt();
        assert!((emp - alpha).abs() < 3.0 * se, "emp {emp}");
    }

    #[test]
    fn weights_csv_has_fingerprint_header() {
        let sigma = SymPd::<f64>::identity(2);
        let w = mixture_weights(&sigma, 20_000, SeedSpec::new(179)).unwrap();
        let csv = weights_to_csv(&w, &sigma);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# p=2 sigma_sha256="));
        assert_eq!(header.len(), "# p=2 sigma_sha256=".len() + 64);
        assert_eq!(lines.next().unwrap(), "k,w,se,reps");
        assert_eq!(lines.count(), 3);
        // fingerprint is stable under re-serialization
        assert_eq!(sigma_fingerprint(&sigma), sigma_fingerprint(&SymPd::<f64>::identity(2)));
        assert_ne!(
            sigma_fingerprint(&sigma),
            sigma_fingerprint(&SymPd::<f64>::diagonal(&[2.0, 1.0]).unwrap())
        );
    }
}
