//! Closed convex cones and orthogonal projection under the metric induced by
//! a positive definite matrix.
//!
//! The inner product is `<u, v>_A = u' A^{-1} v`. Projection onto the
//! positive orthant is available through two routes: exhaustive face
//! enumeration (the exact oracle, capped at p <= 20) and a Lawson-Hanson
//! style active-set solver that scales past that.

use crate::error::{Error, Result};
use crate::matkit::{regress_out, PartitionIndex, SampleStats, SymPd};
use crate::scalar::Scalar;

/// Alternative-hypothesis region. The half-space constrains exactly the last
/// coordinate (`theta_p >= 0`); other cones are assumed reduced to these by a
/// linear transformation upstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Orthant(usize),
    HalfSpace(usize),
    Global(usize),
}

impl Cone {
    #[inline]
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Orthant(p) | Cone::HalfSpace(p) | Cone::Global(p) => p,
        }
    }

    pub fn contains<T: Scalar>(&self, x: &[T]) -> bool {
        match *self {
            Cone::Orthant(_) => x.iter().all(|v| *v >= T::zero()),
            Cone::HalfSpace(p) => x[p - 1] >= T::zero(),
            Cone::Global(_) => true,
        }
    }
}

/// The metric `<u, v>_A = u' A^{-1} v`, with the inverse cached.
#[derive(Debug, Clone)]
pub struct Metric<T> {
    a: SymPd<T>,
    inv: SymPd<T>,
}

impl<T: Scalar> Metric<T> {
    pub fn new(a: SymPd<T>) -> Result<Self> {
        let inv = a.inverse()?;
        Ok(Metric { a, inv })
    }

    pub fn identity(p: usize) -> Self {
        Metric {
            a: SymPd::identity(p),
            inv: SymPd::identity(p),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn matrix(&self) -> &SymPd<T> {
        &self.a
    }

    pub fn inverse_matrix(&self) -> &SymPd<T> {
        &self.inv
    }

    /// `||x||_A^2 = x' A^{-1} x`.
    pub fn norm_sq(&self, x: &[T]) -> T {
        self.a.inv_quad(x)
    }

    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        let av = self.a.solve(v);
        u.iter().zip(av.iter()).map(|(a, b)| *a * *b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionAlgorithm {
    FaceEnumeration,
    ActiveSet,
}

/// Projection output: the projected point, its active face, and the split of
/// `||x||_A^2` into `||pi||_A^2 + ||x - pi||_A^2`.
#[derive(Debug, Clone)]
pub struct ProjectionResult<T> {
    pub point: Vec<T>,
    pub face: PartitionIndex,
    pub sq_norm: T,
    pub sq_resid: T,
}

const FACE_ENUM_MAX_DIM: usize = 20;
const KKT_TOL: f64 = 1e-8;

/// The face indicator `I_na = 1{x_{a:a'} > 0, S_{a'a'}^{-1} x_{a'} <= 0}`.
///
/// Boundary ties resolve downward: a regressed coordinate equal to zero is
/// not strictly positive, so the point falls to a smaller face.
pub fn face_indicator<T: Scalar>(x: &[T], s: &SymPd<T>, a: &PartitionIndex) -> Result<bool> {
    let p = s.dim();
    if x.len() != p || a.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len().max(a.dim()),
        });
    }
    let ac = a.complement();
    if !ac.is_empty() {
        let s_cc = s.principal_submatrix(&ac)?;
        let x_c: Vec<T> = ac.iter().map(|&i| x[i]).collect();
        let v = s_cc.solve(&x_c);
        if v.iter().any(|vi| *vi > T::zero()) {
            return Ok(false);
        }
    }
    if !a.is_empty() {
        let (xr, _) = regress_out(x, s, a)?;
        if xr.iter().any(|vi| *vi <= T::zero()) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn face_indicator_stats<T: Scalar>(stats: &SampleStats<T>, a: &PartitionIndex) -> Result<bool> {
    face_indicator(&stats.mean, &stats.cov, a)
}

/// Orthogonal projection of `x` onto `cone` in the `metric` geometry.
pub fn project<T: Scalar>(
    x: &[T],
    metric: &Metric<T>,
    cone: &Cone,
    algorithm: ProjectionAlgorithm,
) -> Result<ProjectionResult<T>> {
    let p = metric.dim();
    if x.len() != p || cone.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len().max(cone.dim()),
        });
    }
    let result = match cone {
        Cone::Global(_) => ProjectionResult {
            point: x.to_vec(),
            face: PartitionIndex::full(p),
            sq_norm: metric.norm_sq(x),
            sq_resid: T::zero(),
        },
        Cone::HalfSpace(_) => project_halfspace(x, metric)?,
        Cone::Orthant(_) => match algorithm {
            ProjectionAlgorithm::FaceEnumeration => project_orthant_enumerate(x, metric)?,
            ProjectionAlgorithm::ActiveSet => project_orthant_active_set(x, metric)?,
        },
    };
    check_kkt(x, metric, &result)?;
    Ok(result)
}

fn check_kkt<T: Scalar>(x: &[T], metric: &Metric<T>, r: &ProjectionResult<T>) -> Result<()> {
    let total = metric.norm_sq(x);
    if total == T::zero() {
        return Ok(());
    }
    let resid: Vec<T> = x.iter().zip(r.point.iter()).map(|(a, b)| *a - *b).collect();
    let inner = metric.inner(&resid, &r.point);
    // complementarity after scaling x to unit A-norm
    if (inner / total).abs() > T::of(KKT_TOL) {
        return Err(Error::Solver(format!(
            "KKT complementarity violated: <x-pi, pi>_A / ||x||^2 = {:e}",
            (inner / total).f64()
        )));
    }
    Ok(())
}

fn project_halfspace<T: Scalar>(x: &[T], metric: &Metric<T>) -> Result<ProjectionResult<T>> {
    let p = metric.dim();
    if x[p - 1] >= T::zero() {
        return Ok(ProjectionResult {
            point: x.to_vec(),
            face: PartitionIndex::full(p),
            sq_norm: metric.norm_sq(x),
            sq_resid: T::zero(),
        });
    }
    let face = PartitionIndex::new(p, (0..p - 1).collect())?;
    let total = metric.norm_sq(x);
    if p == 1 {
        return Ok(ProjectionResult {
            point: vec![T::zero()],
            face,
            sq_norm: T::zero(),
            sq_resid: total,
        });
    }
    // A-orthogonal projection onto {theta_p = 0}: the free part is the
    // regressed mean x_{a:a'}
    let (xr, sr) = regress_out(x, metric.matrix(), &face)?;
    let sq_norm = sr.inv_quad(&xr);
    let mut point = vec![T::zero(); p];
    for (k, &i) in face.indices().iter().enumerate() {
        point[i] = xr[k];
    }
    let resid: Vec<T> = x.iter().zip(point.iter()).map(|(a, b)| *a - *b).collect();
    Ok(ProjectionResult {
        sq_resid: metric.norm_sq(&resid),
        point,
        face,
        sq_norm,
    })
}

fn project_orthant_enumerate<T: Scalar>(
    x: &[T],
    metric: &Metric<T>,
) -> Result<ProjectionResult<T>> {
    let p = metric.dim();
    if p > FACE_ENUM_MAX_DIM {
        return Err(Error::domain(format!(
            "face enumeration is capped at p <= {FACE_ENUM_MAX_DIM}, got {p}"
        )));
    }
    let scale = x
        .iter()
        .fold(T::zero(), |acc, v| acc.max(v.abs()))
        .max(T::min_positive_value());
    let feas_tol = T::of(1e-10) * scale;
    let mut best_q = T::zero();
    let mut best: Option<(PartitionIndex, Vec<T>)> = None;
    for mask in 1usize..(1 << p) {
        let a = PartitionIndex::from_mask(p, mask);
        let (xr, sr) = regress_out(x, metric.matrix(), &a)?;
        if xr.iter().any(|v| *v < -feas_tol) {
            continue;
        }
        let q = sr.inv_quad(&xr);
        if q > best_q {
            best_q = q;
            best = Some((a, xr));
        }
    }
    let total = metric.norm_sq(x);
    match best {
        None => Ok(ProjectionResult {
            point: vec![T::zero(); p],
            face: PartitionIndex::empty(p),
            sq_norm: T::zero(),
            sq_resid: total,
        }),
        Some((a, xr)) => {
            let mut point = vec![T::zero(); p];
            for (k, &i) in a.indices().iter().enumerate() {
                point[i] = xr[k].max(T::zero());
            }
            let face = PartitionIndex::new(
                p,
                point
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > T::zero())
                    .map(|(i, _)| i)
                    .collect(),
            )?;
            let resid: Vec<T> = x.iter().zip(point.iter()).map(|(a, b)| *a - *b).collect();
            Ok(ProjectionResult {
                sq_resid: metric.norm_sq(&resid),
                point,
                face,
                sq_norm: best_q,
            })
        }
    }
}

/// Lawson-Hanson nonnegative least squares on the factored metric: with
/// `A = L L'`, minimizing `||L^{-1}(x - theta)||^2` over `theta >= 0`.
fn project_orthant_active_set<T: Scalar>(
    x: &[T],
    metric: &Metric<T>,
) -> Result<ProjectionResult<T>> {
    let p = metric.dim();
    let q = metric.inverse_matrix();
    let qx = metric.matrix().solve(x); // A^{-1} x
    let scale = qx
        .iter()
        .fold(T::zero(), |acc, v| acc.max(v.abs()))
        .max(T::min_positive_value());
    let tol = T::of(1e-12) * scale;

    let mut passive = vec![false; p];
    let mut theta = vec![T::zero(); p];
    let max_iter = 100 * p;
    let mut iter = 0usize;

    loop {
        // dual vector w = A^{-1}(x - theta)
        let qtheta = q.mul_vec(&theta);
        let mut best_j = None;
        let mut best_w = tol;
        for j in 0..p {
            if passive[j] {
                continue;
            }
            let w = qx[j] - qtheta[j];
            if w > best_w {
                best_w = w;
                best_j = Some(j);
            }
        }
        let Some(j) = best_j else { break };
        passive[j] = true;

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::Solver(format!(
                    "active-set projection did not converge in {max_iter} iterations"
                )));
            }
            let pset: Vec<usize> = (0..p).filter(|&i| passive[i]).collect();
            let q_pp = q.principal_submatrix(&pset)?;
            let rhs: Vec<T> = pset.iter().map(|&i| qx[i]).collect();
            let z = q_pp.solve(&rhs);
            if z.iter().all(|v| *v > T::zero()) {
                for t in theta.iter_mut() {
                    *t = T::zero();
                }
                for (k, &i) in pset.iter().enumerate() {
                    theta[i] = z[k];
                }
                break;
            }
            // step toward z until the first passive variable hits zero
            let mut alpha = T::one();
            for (k, &i) in pset.iter().enumerate() {
                if z[k] <= T::zero() {
                    let denom = theta[i] - z[k];
                    if denom > T::zero() {
                        alpha = alpha.min(theta[i] / denom);
                    } else {
                        alpha = T::zero();
                    }
                }
            }
            let mut znew = vec![T::zero(); p];
            for (k, &i) in pset.iter().enumerate() {
                znew[i] = z[k];
            }
            for i in 0..p {
                if passive[i] {
                    theta[i] = theta[i] + alpha * (znew[i] - theta[i]);
                    if theta[i] <= tol {
                        theta[i] = T::zero();
                        passive[i] = false;
                    }
                }
            }
            if !passive.iter().any(|&b| b) {
                break;
            }
        }
    }

    let face = PartitionIndex::new(
        p,
        theta
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > T::zero())
            .map(|(i, _)| i)
            .collect(),
    )?;
    let sq_norm = metric.norm_sq(&theta);
    let resid: Vec<T> = x.iter().zip(theta.iter()).map(|(a, b)| *a - *b).collect();
    Ok(ProjectionResult {
        sq_resid: metric.norm_sq(&resid),
        point: theta,
        face,
        sq_norm,
    })
}

/// Membership in the dual cone `{w : <w, v>_A <= 0 for all v in cone}`.
pub fn dual_member<T: Scalar>(w: &[T], metric: &Metric<T>, cone: &Cone) -> bool {
    let p = metric.dim();
    assert_eq!(w.len(), p);
    match cone {
        Cone::Orthant(_) => {
            let v = metric.matrix().solve(w);
            let scale = v
                .iter()
                .fold(T::zero(), |acc, u| acc.max(u.abs()))
                .max(T::min_positive_value());
            v.iter().all(|u| *u <= T::of(1e-10) * scale)
        }
        Cone::HalfSpace(_) => {
            let norm = w.iter().map(|u| *u * *u).sum::<T>().sqrt();
            w[p - 1].abs() <= T::of(1e-10) * norm
        }
        Cone::Global(_) => w.iter().all(|u| u.abs() <= T::of(1e-12)),
    }
}

/// The unique face whose indicator holds at `(x, A)`: found via the
/// active-set projection, then certified with `face_indicator`, falling back
/// to exhaustive search on boundary ties.
pub fn find_active_face<T: Scalar>(x: &[T], metric: &Metric<T>) -> Result<PartitionIndex> {
    let p = metric.dim();
    let proj = project(x, metric, &Cone::Orthant(p), ProjectionAlgorithm::ActiveSet)?;
    if face_indicator(x, metric.matrix(), &proj.face)? {
        return Ok(proj.face);
    }
    if p <= FACE_ENUM_MAX_DIM {
        for mask in 0usize..(1 << p) {
            let a = PartitionIndex::from_mask(p, mask);
            if face_indicator(x, metric.matrix(), &a)? {
                return Ok(a);
            }
        }
    }
    Err(Error::Solver(
        "no face indicator holds (boundary tie)".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{complement_quad, SeedSpec};
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

    fn random_vec(p: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..p).map(|_| 2.0 * f64::std_normal(rng)).collect()
    }

    #[test]
    fn global_cone_is_identity() {
        let m = Metric::<f64>::identity(3);
        let x = vec![1.0, -2.0, 0.5];
        let r = project(&x, &m, &Cone::Global(3), ProjectionAlgorithm::ActiveSet).unwrap();
        assert_eq!(r.point, x);
        assert_eq!(r.sq_resid, 0.0);
    }

    #[test]
    fn orthant_identity_metric_clips() {
        let m = Metric::<f64>::identity(2);
        let x = vec![1.0, -1.0];
        for alg in [
            ProjectionAlgorithm::FaceEnumeration,
            ProjectionAlgorithm::ActiveSet,
        ] {
            let r = project(&x, &m, &Cone::Orthant(2), alg).unwrap();
            assert_eq!(r.point, vec![1.0, 0.0]);
            assert!((r.sq_norm - 1.0).abs() < 1e-12);
            assert!((r.sq_resid - 1.0).abs() < 1e-12);
            assert_eq!(r.face.indices(), &[0]);
        }
    }

    #[test]
    fn halfspace_projection_cases() {
        let m = Metric::<f64>::identity(2);
        let r = project(&[3.0, 0.5], &m, &Cone::HalfSpace(2), ProjectionAlgorithm::ActiveSet)
            .unwrap();
        assert_eq!(r.point, vec![3.0, 0.5]);
        let r = project(&[3.0, -0.5], &m, &Cone::HalfSpace(2), ProjectionAlgorithm::ActiveSet)
            .unwrap();
        assert_eq!(r.point, vec![3.0, 0.0]);
        assert!((r.sq_resid - 0.25).abs() < 1e-12);
    }

    #[test]
    fn face_indicator_trivial_cases() {
        let s = SymPd::<f64>::identity(2);
        let all_pos = vec![1.0, 2.0];
        let all_neg = vec![-1.0, -2.0];
        for mask in 0usize..4 {
            let a = PartitionIndex::from_mask(2, mask);
            assert_eq!(
                face_indicator(&all_pos, &s, &a).unwrap(),
                mask == 3,
                "mask {mask}"
            );
            assert_eq!(
                face_indicator(&all_neg, &s, &a).unwrap(),
                mask == 0,
                "mask {mask}"
            );
        }
    }

    #[test]
    fn face_partition_is_exhaustive_and_exclusive() {
        let mut rng = SeedSpec::new(31).rng();
        let p = 3;
        for trial in 0..10_000 {
            let s = random_pd(p, &mut rng);
            let x = random_vec(p, &mut rng);
            let mut holds = vec![];
            for mask in 0usize..(1 << p) {
                let a = PartitionIndex::from_mask(p, mask);
                if face_indicator(&x, &s, &a).unwrap() {
                    holds.push(mask);
                }
            }
            assert_eq!(holds.len(), 1, "trial {trial}: faces {holds:?}");
            // and it matches the projection's face
            let metric = Metric::new(s).unwrap();
            let face = find_active_face(&x, &metric).unwrap();
            let mask: usize = face.indices().iter().map(|i| 1usize << i).sum();
            assert_eq!(mask, holds[0]);
        }
    }

    #[test]
    fn active_set_agrees_with_enumeration() {
        let mut rng = SeedSpec::new(37).rng();
        let p = 6;
        for _ in 0..300 {
            let metric = Metric::new(random_pd(p, &mut rng)).unwrap();
            let x = random_vec(p, &mut rng);
            let cone = Cone::Orthant(p);
            let e = project(&x, &metric, &cone, ProjectionAlgorithm::FaceEnumeration).unwrap();
            let a = project(&x, &metric, &cone, ProjectionAlgorithm::ActiveSet).unwrap();
            assert!((e.sq_norm - a.sq_norm).abs() < 1e-9 * (1.0 + e.sq_norm));
            for (u, v) in e.point.iter().zip(a.point.iter()) {
                assert!((u - v).abs() < 1e-9, "{:?} vs {:?}", e.point, a.point);
            }
        }
    }

    #[test]
    fn projection_idempotence_and_pythagoras() {
        let mut rng = SeedSpec::new(41).rng();
        let p = 4;
        for _ in 0..500 {
            let metric = Metric::new(random_pd(p, &mut rng)).unwrap();
            let x = random_vec(p, &mut rng);
            let cone = Cone::Orthant(p);
            let r = project(&x, &metric, &cone, ProjectionAlgorithm::ActiveSet).unwrap();
            let total = metric.norm_sq(&x);
            assert!(
                (r.sq_norm + r.sq_resid - total).abs() < 1e-8 * total.max(1.0),
                "pythagoras"
            );
            let r2 = project(&r.point, &metric, &cone, ProjectionAlgorithm::ActiveSet).unwrap();
            for (u, v) in r.point.iter().zip(r2.point.iter()) {
                assert!((u - v).abs() < 1e-9, "idempotence");
            }
        }
    }

    #[test]
    fn nested_cones_have_monotone_norms() {
        let mut rng = SeedSpec::new(43).rng();
        let p = 3;
        for _ in 0..1000 {
            let metric = Metric::new(random_pd(p, &mut rng)).unwrap();
            let x = random_vec(p, &mut rng);
            let o = project(&x, &metric, &Cone::Orthant(p), ProjectionAlgorithm::ActiveSet)
                .unwrap()
                .sq_norm;
            let h = project(&x, &metric, &Cone::HalfSpace(p), ProjectionAlgorithm::ActiveSet)
                .unwrap()
                .sq_norm;
            let g = project(&x, &metric, &Cone::Global(p), ProjectionAlgorithm::ActiveSet)
                .unwrap()
                .sq_norm;
            assert!(o <= h + 1e-10 && h <= g + 1e-10, "o={o} h={h} g={g}");
        }
    }

    #[test]
    fn face_formula_matches_projection_norm() {
        let mut rng = SeedSpec::new(47).rng();
        let p = 4;
        for _ in 0..500 {
            let s = random_pd(p, &mut rng);
            let metric = Metric::new(s.clone()).unwrap();
            let x = random_vec(p, &mut rng);
            let r = project(&x, &metric, &Cone::Orthant(p), ProjectionAlgorithm::ActiveSet)
                .unwrap();
            let q = if r.face.is_empty() {
                0.0
            } else {
                let (xr, sr) = regress_out(&x, &s, &r.face).unwrap();
                sr.inv_quad(&xr)
            };
            assert!((q - r.sq_norm).abs() < 1e-9 * (1.0 + q));
        }
    }

    #[test]
    fn dual_membership_examples() {
        let m = Metric::<f64>::identity(2);
        assert!(dual_member(&[-1.0, -3.0], &m, &Cone::Orthant(2)));
        assert!(!dual_member(&[1.0, -3.0], &m, &Cone::Orthant(2)));
        assert!(dual_member(&[5.0, 0.0], &m, &Cone::HalfSpace(2)));
        assert!(!dual_member(&[5.0, 0.1], &m, &Cone::HalfSpace(2)));
        assert!(dual_member(&[0.0, 0.0], &m, &Cone::Global(2)));
    }

    #[test]
    fn dual_cone_points_project_to_origin() {
        let mut rng = SeedSpec::new(53).rng();
        let p = 3;
        for _ in 0..500 {
            let s = random_pd(p, &mut rng);
            let metric = Metric::new(s.clone()).unwrap();
            // w = -S u with u >= 0 gives S^{-1} w <= 0
            let u: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
            let w: Vec<f64> = s.mul_vec(&u).iter().map(|v| -v).collect();
            assert!(dual_member(&w, &metric, &Cone::Orthant(p)));
            let r = project(&w, &metric, &Cone::Orthant(p), ProjectionAlgorithm::ActiveSet)
                .unwrap();
            assert!(r.sq_norm < 1e-18);
            assert!(r.point.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn complement_quad_consistency() {
        // the LRT denominator term is the full norm minus the face norm
        let mut rng = SeedSpec::new(59).rng();
        let p = 3;
        let s = random_pd(p, &mut rng);
        let x = random_vec(p, &mut rng);
        for mask in 1usize..(1 << p) - 1 {
            let a = PartitionIndex::from_mask(p, mask);
            let (xr, sr) = regress_out(&x, &s, &a).unwrap();
            let q = sr.inv_quad(&xr) + complement_quad(&x, &s, &a).unwrap();
            assert!((q - s.inv_quad(&x)).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = Metric::<f64>::identity(3);
        assert!(project(&[1.0, 2.0], &m, &Cone::Orthant(3), ProjectionAlgorithm::ActiveSet)
            .is_err());
    }
}
