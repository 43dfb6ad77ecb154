//! Test statistics: Hotelling's T-squared, restricted likelihood ratio and
//! union-intersection statistics over a cone, coordinatewise Student
//! statistics (FUIT), and the integrated likelihood ratio.
//!
//! The LRT and UIT values are computed through the active-face formula
//! (regressed mean and Schur complement on the face), which agrees with the
//! metric-projection form; tests assert that equivalence against the
//! exhaustive projection oracle.
//!
//! Normalization: the cone statistics use the sums-of-squares matrix
//! `(n-1) S` (with `S` the sample covariance), so their null laws are the
//! chi-square-ratio mixtures with `chi2_k / chi2_{n-p}` components; the
//! quadratic forms therefore carry the factor `n/(n-1)` rather than `n`.
//! Hotelling's T-squared keeps its conventional sample-covariance form with
//! the F-linked critical value.

use crate::cones::{find_active_face, Cone, Metric};
use crate::error::{Error, Result};
use crate::matkit::{complement_quad, regress_out, PartitionIndex, SampleStats};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    T2,
    Lrt,
    Uit,
    Fuit,
}

/// Audit trail for a computed statistic.
#[derive(Debug, Clone)]
pub enum Components<T> {
    /// Numerator and denominator of a ratio-form statistic; UIT and T2 have
    /// denominator one.
    Quadratic { numerator: T, denominator: T },
    /// Coordinatewise Student statistics (FUIT).
    TVector(Vec<T>),
}

#[derive(Debug, Clone)]
pub struct StatisticResult<T> {
    pub value: T,
    pub face: PartitionIndex,
    pub components: Components<T>,
    pub kind: StatKind,
    pub cone: Cone,
}

/// `T^2 = n xbar' S^{-1} xbar`.
pub fn hotelling_t2<T: Scalar>(stats: &SampleStats<T>) -> Result<StatisticResult<T>> {
    let p = stats.dim();
    let nf = T::of(stats.n as f64);
    let value = nf * stats.cov.inv_quad(&stats.mean);
    Ok(StatisticResult {
        value,
        face: PartitionIndex::full(p),
        components: Components::Quadratic {
            numerator: value,
            denominator: T::one(),
        },
        kind: StatKind::T2,
        cone: Cone::Global(p),
    })
}

/// Active face of the statistic for the given cone. For the half-space the
/// split is on the sign of the last mean coordinate (strictly positive keeps
/// the full face).
fn active_face<T: Scalar>(stats: &SampleStats<T>, cone: &Cone) -> Result<PartitionIndex> {
    let p = stats.dim();
    match cone {
        Cone::Global(_) => Ok(PartitionIndex::full(p)),
        Cone::HalfSpace(_) => {
            if stats.mean[p - 1] > T::zero() {
                Ok(PartitionIndex::full(p))
            } else {
                PartitionIndex::new(p, (0..p - 1).collect())
            }
        }
        Cone::Orthant(_) => {
            let metric = Metric::new(stats.cov.clone())?;
            find_active_face(&stats.mean, &metric)
        }
    }
}

fn check_cone<T: Scalar>(stats: &SampleStats<T>, cone: &Cone) -> Result<()> {
    if cone.dim() != stats.dim() {
        return Err(Error::DimensionMismatch {
            expected: stats.dim(),
            got: cone.dim(),
        });
    }
    Ok(())
}

/// Quadratic-form multiplier `n/(n-1)` turning sample-covariance forms into
/// sums-of-squares forms.
fn eff_n<T: Scalar>(stats: &SampleStats<T>) -> T {
    T::of(stats.n as f64 / (stats.n - 1) as f64)
}

/// Face-restricted quadratic form `n x_{a:a'}' W_{aa:a'}^{-1} x_{a:a'}` with
/// `W = (n-1) S`.
fn face_quad<T: Scalar>(stats: &SampleStats<T>, face: &PartitionIndex) -> Result<T> {
    if face.is_empty() {
        return Ok(T::zero());
    }
    let (xr, sr) = regress_out(&stats.mean, &stats.cov, face)?;
    Ok(eff_n(stats) * sr.inv_quad(&xr))
}

/// Union-intersection statistic: the squared metric norm of the projection of
/// `sqrt(n) xbar` onto the cone under the `W = (n-1) S` geometry.
pub fn uit<T: Scalar>(stats: &SampleStats<T>, cone: &Cone) -> Result<StatisticResult<T>> {
    check_cone(stats, cone)?;
    let face = active_face(stats, cone)?;
    let value = face_quad(stats, &face)?;
    Ok(StatisticResult {
        value,
        face,
        components: Components::Quadratic {
            numerator: value,
            denominator: T::one(),
        },
        kind: StatKind::Uit,
        cone: *cone,
    })
}

/// Likelihood-ratio statistic: the face quadratic form shrunk by the residual,
/// `L = n q_a / (1 + n xbar_{a'}' W_{a'a'}^{-1} xbar_{a'})` with `W = (n-1) S`.
pub fn lrt<T: Scalar>(stats: &SampleStats<T>, cone: &Cone) -> Result<StatisticResult<T>> {
    check_cone(stats, cone)?;
    let face = active_face(stats, cone)?;
    let numerator = face_quad(stats, &face)?;
    let denominator =
        T::one() + eff_n(stats) * complement_quad(&stats.mean, &stats.cov, &face)?;
    Ok(StatisticResult {
        value: numerator / denominator,
        face,
        components: Components::Quadratic {
            numerator,
            denominator,
        },
        kind: StatKind::Lrt,
        cone: *cone,
    })
}

/// Coordinatewise Student statistics `t_j = sqrt(n) xbar_j / sqrt(s_jj)`.
///
/// Orthant: value is `max_j t_j` (may be negative; rejection compares it to
/// the Bonferroni Student critical value). Half-space: the stored vector is
/// `(|t_1|, .., |t_{p-1}|, t_p)` for the mixed two-sided/one-sided region,
/// and the value is its maximum.
pub fn fuit<T: Scalar>(stats: &SampleStats<T>, cone: &Cone) -> Result<StatisticResult<T>> {
    check_cone(stats, cone)?;
    let p = stats.dim();
    if matches!(cone, Cone::Global(_)) {
        return Err(Error::domain("FUIT is defined for the orthant and half-space"));
    }
    let sqrt_n = T::of(stats.n as f64).sqrt();
    let mut t = Vec::with_capacity(p);
    for j in 0..p {
        let s_jj = stats.cov.get(j, j);
        if s_jj <= T::zero() {
            return Err(Error::Conditioning(format!("zero variance at coordinate {j}")));
        }
        t.push(sqrt_n * stats.mean[j] / s_jj.sqrt());
    }
    let stored: Vec<T> = match cone {
        Cone::HalfSpace(_) => t
            .iter()
            .enumerate()
            .map(|(j, v)| if j + 1 < p { v.abs() } else { *v })
            .collect(),
        _ => t,
    };
    let value = stored
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    Ok(StatisticResult {
        value,
        face: PartitionIndex::full(p),
        components: Components::TVector(stored),
        kind: StatKind::Fuit,
        cone: *cone,
    })
}

/// Rejection decision for a FUIT result at the Bonferroni Student critical
/// value; the half-space transformation is already folded into the stored
/// vector, so both cones compare the maximum against `crit`.
pub fn fuit_rejects<T: Scalar>(result: &StatisticResult<T>, crit: T) -> bool {
    result.value >= crit
}

/// Integrated likelihood ratio `sup_{theta in cone} f(xbar,S|theta) / f(xbar,S|0)`,
/// computed directly from the cone-projection residual and cross-checked
/// against the closed form `(1 + L)^{(n-1)/2}`.
pub fn integrated_lr<T: Scalar>(stats: &SampleStats<T>, cone: &Cone) -> Result<T> {
    check_cone(stats, cone)?;
    let n = stats.n;
    let t2 = eff_n(stats) * stats.cov.inv_quad(&stats.mean);
    // inf over theta of n (xbar - theta)' W^{-1} (xbar - theta) is the
    // squared residual of the metric projection onto the cone, computed
    // directly from xbar - pi rather than by subtracting quadratic forms
    // (which cancels catastrophically when the residual is small).
    let metric = Metric::new(stats.cov.clone())?;
    let proj = crate::cones::project(
        &stats.mean,
        &metric,
        cone,
        crate::cones::ProjectionAlgorithm::ActiveSet,
    )?;
    let resid = eff_n(stats) * proj.sq_resid;
    let exponent = T::of((n - 1) as f64 / 2.0);
    // Cross-check the base ratio before exponentiation: the power amplifies
    // machine error by the exponent, so the identity is verified where the
    // tolerance is meaningful. The two sides use independent routes: the
    // residual route subtracts the face form from the full form, the closed
    // form builds the denominator from the partitioned complement.
    let direct_base = (T::one() + t2) / (T::one() + resid);
    let l = lrt(stats, cone)?.value;
    let closed_base = T::one() + l;
    if (direct_base - closed_base).abs() > T::of(1e-8) * direct_base.max(T::one()) {
        return Err(Error::IdentityCheck(format!(
            "integrated likelihood ratio mismatch: direct base {:e} vs closed form base {:e}",
            direct_base.f64(),
            closed_base.f64()
        )));
    }
    Ok(direct_base.powf(exponent))
}
