//! Partitioned symmetric-positive-definite linear algebra and reproducible
//! Gaussian sampling.
//!
//! Everything here is small and dense: the dimension `p` is expected to stay
//! below ~20, so Cholesky factorizations and explicit inverses are cheap.
//! All types are immutable values after construction and all operations are
//! pure, so they can be shared freely across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance used for the symmetry check and the Cholesky pivot
/// threshold. Scale-free: the pivot threshold is `PD_TOL * max diagonal`.
const PD_TOL: f64 = 1e-12;

/// A validated symmetric positive definite matrix with its lower Cholesky
/// factor precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPd<T> {
    p: usize,
    data: Vec<T>,  // row-major p x p
    lower: Vec<T>, // lower-triangular Cholesky factor, row-major, zero above
}

impl<T: Scalar> SymPd<T> {
    /// Builds from row-major entries, checking symmetry and positive
    /// definiteness.
    pub fn new(p: usize, data: Vec<T>) -> Result<Self> {
        if p == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if data.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                got: data.len(),
            });
        }
        let scale = data
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
            .max(T::min_positive_value());
        let tol = T::of(PD_TOL) * scale;
        for i in 0..p {
            for j in (i + 1)..p {
                if (data[i * p + j] - data[j * p + i]).abs() > tol {
                    return Err(Error::domain(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let lower = cholesky_lower(p, &data)?;
        Ok(SymPd { p, data, lower })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let p = rows.len();
        let mut data = Vec::with_capacity(p * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        SymPd::new(p, data)
    }

    pub fn identity(p: usize) -> Self {
        let mut data = vec![T::zero(); p * p];
        for i in 0..p {
            data[i * p + i] = T::one();
        }
        SymPd::new(p, data).expect("identity is SPD")
    }

    pub fn diagonal(d: &[T]) -> Result<Self> {
        let p = d.len();
        let mut data = vec![T::zero(); p * p];
        for i in 0..p {
            data[i * p + i] = d[i];
        }
        SymPd::new(p, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.p + j]
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    /// Lower Cholesky factor `L` with `L L' = self`, row-major.
    pub fn chol_lower(&self) -> &[T] {
        &self.lower
    }

    /// Solves `self * x = b` via the Cholesky factor.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let y = self.forward_solve(b);
        self.backward_solve(&y)
    }

    /// `L^{-1} b` (forward substitution).
    pub fn forward_solve(&self, b: &[T]) -> Vec<T> {
        let p = self.p;
        assert_eq!(b.len(), p);
        let mut y = vec![T::zero(); p];
        for i in 0..p {
            let mut s = b[i];
            for (j, &yj) in y.iter().enumerate().take(i) {
                s -= self.lower[i * p + j] * yj;
            }
            y[i] = s / self.lower[i * p + i];
        }
        y
    }

    fn backward_solve(&self, y: &[T]) -> Vec<T> {
        let p = self.p;
        let mut x = vec![T::zero(); p];
        for i in (0..p).rev() {
            let mut s = y[i];
            for (j, &xj) in x.iter().enumerate().take(p).skip(i + 1) {
                s -= self.lower[j * p + i] * xj;
            }
            x[i] = s / self.lower[i * p + i];
        }
        x
    }

    /// Quadratic form `x' self^{-1} x`, always nonnegative.
    pub fn inv_quad(&self, x: &[T]) -> T {
        self.forward_solve(x).iter().map(|v| *v * *v).sum()
    }

    /// `L z` — maps standard normals to `N(0, self)` draws.
    pub fn chol_mul(&self, z: &[T]) -> Vec<T> {
        let p = self.p;
        assert_eq!(z.len(), p);
        (0..p)
            .map(|i| (0..=i).map(|j| self.lower[i * p + j] * z[j]).sum())
            .collect()
    }

    /// Matrix-vector product `self * x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let p = self.p;
        assert_eq!(x.len(), p);
        (0..p)
            .map(|i| (0..p).map(|j| self.data[i * p + j] * x[j]).sum())
            .collect()
    }

    /// Explicit inverse (also SPD).
    pub fn inverse(&self) -> Result<SymPd<T>> {
        let p = self.p;
        let mut inv = vec![T::zero(); p * p];
        for j in 0..p {
            let mut e = vec![T::zero(); p];
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..p {
                inv[i * p + j] = col[i];
            }
        }
        // symmetrize away round-off before revalidating
        for i in 0..p {
            for j in (i + 1)..p {
                let m = (inv[i * p + j] + inv[j * p + i]) * T::of(0.5);
                inv[i * p + j] = m;
                inv[j * p + i] = m;
            }
        }
        SymPd::new(p, inv)
    }

    /// Principal submatrix on the given (sorted, unique) indices.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Result<SymPd<T>> {
        let k = idx.len();
        if k == 0 {
            return Err(Error::domain("empty index set"));
        }
        let mut data = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        SymPd::new(k, data)
    }

    pub fn determinant(&self) -> T {
        let p = self.p;
        let d: T = (0..p).fold(T::one(), |acc, i| acc * self.lower[i * p + i]);
        d * d
    }
}

fn cholesky_lower<T: Scalar>(p: usize, data: &[T]) -> Result<Vec<T>> {
    let max_diag = (0..p)
        .map(|i| data[i * p + i])
        .fold(T::min_positive_value(), T::max);
    let tol = T::of(PD_TOL) * max_diag;
    let mut l = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = data[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= tol {
                    return Err(Error::NotPositiveDefinite {
                        pivot: i,
                        value: s.f64(),
                    });
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Ok(l)
}

/// Sorted subset of coordinate indices `0..p` (possibly empty or full).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionIndex {
    p: usize,
    indices: Vec<usize>,
}

impl PartitionIndex {
    pub fn new(p: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("duplicate indices"));
        }
        if let Some(&max) = indices.last() {
            if max >= p {
                return Err(Error::domain(format!("index {max} out of range 0..{p}")));
            }
        }
        Ok(PartitionIndex { p, indices })
    }

    pub fn full(p: usize) -> Self {
        PartitionIndex {
            p,
            indices: (0..p).collect(),
        }
    }

    pub fn empty(p: usize) -> Self {
        PartitionIndex { p, indices: vec![] }
    }

    /// Subset from a bitmask over `0..p`; handy for face enumeration.
    pub fn from_mask(p: usize, mask: usize) -> Self {
        PartitionIndex {
            p,
            indices: (0..p).filter(|i| mask >> i & 1 == 1).collect(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn is_full(&self) -> bool {
        self.indices.len() == self.p
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn complement(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.p - self.indices.len());
        let mut it = self.indices.iter().peekable();
        for i in 0..self.p {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// Sufficient statistics of one dataset: sample size, mean and covariance.
#[derive(Debug, Clone)]
pub struct SampleStats<T> {
    pub n: usize,
    pub mean: Vec<T>,
    pub cov: SymPd<T>,
}

impl<T: Scalar> SampleStats<T> {
    pub fn new(n: usize, mean: Vec<T>, cov: SymPd<T>) -> Result<Self> {
        let p = cov.dim();
        if mean.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: mean.len(),
            });
        }
        if n < p + 2 {
            return Err(Error::domain(format!(
                "sample size {n} too small; need n >= p + 2 = {}",
                p + 2
            )));
        }
        Ok(SampleStats { n, mean, cov })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// Debug CSV dump: `n=<int>` line, the mean row, then the `p` covariance
    /// rows, 17 significant digits.
    pub fn to_debug_csv(&self) -> String {
        let p = self.dim();
        let fmt = |v: &T| format!("{:.16e}", v);
        let mut out = format!("n={}\n", self.n);
        out.push_str(&self.mean.iter().map(fmt).collect::<Vec<_>>().join(","));
        out.push('\n');
        for i in 0..p {
            let row: Vec<String> = (0..p).map(|j| fmt(&self.cov.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Regressed mean and Schur complement of a partition:
/// `x_{a:a'} = x_a - S_{aa'} S_{a'a'}^{-1} x_{a'}` and
/// `S_{aa:a'} = S_{aa} - S_{aa'} S_{a'a'}^{-1} S_{a'a}`.
///
/// With `a` the full set this is the identity; `a` must be nonempty.
pub fn regress_out<T: Scalar>(
    x: &[T],
    s: &SymPd<T>,
    a: &PartitionIndex,
) -> Result<(Vec<T>, SymPd<T>)> {
    let p = s.dim();
    if x.len() != p || a.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len().max(a.dim()),
        });
    }
    if a.is_empty() {
        return Err(Error::domain("partition index must be nonempty"));
    }
    if a.is_full() {
        return Ok((x.to_vec(), s.clone()));
    }
    let ai = a.indices();
    let ac = a.complement();
    let s_cc = s
        .principal_submatrix(&ac)
        .map_err(|_| Error::Conditioning("complement block is numerically singular".into()))?;
    let x_c: Vec<T> = ac.iter().map(|&i| x[i]).collect();
    let y = s_cc.solve(&x_c); // S_{a'a'}^{-1} x_{a'}
    let k = ai.len();
    let mut mean_reg = Vec::with_capacity(k);
    for &i in ai {
        let mut v = x[i];
        for (cj, &j) in ac.iter().enumerate() {
            v -= s.get(i, j) * y[cj];
        }
        mean_reg.push(v);
    }
    // columns of S_{a'a'}^{-1} S_{a'a}
    let mut w_cols = Vec::with_capacity(k);
    for &j in ai {
        let col: Vec<T> = ac.iter().map(|&i| s.get(i, j)).collect();
        w_cols.push(s_cc.solve(&col));
    }
    let mut schur = vec![T::zero(); k * k];
    for (ri, &i) in ai.iter().enumerate() {
        for (rj, &j) in ai.iter().enumerate() {
            let mut v = s.get(i, j);
            for (ck, &kk) in ac.iter().enumerate() {
                v -= s.get(i, kk) * w_cols[rj][ck];
            }
            schur[ri * k + rj] = v;
        }
    }
    // exact symmetrization; the formula is symmetric up to round-off
    for ri in 0..k {
        for rj in (ri + 1)..k {
            let m = (schur[ri * k + rj] + schur[rj * k + ri]) * T::of(0.5);
            schur[ri * k + rj] = m;
            schur[rj * k + ri] = m;
        }
    }
    let schur = SymPd::new(k, schur)?;
    Ok((mean_reg, schur))
}

/// `x_{a'}' S_{a'a'}^{-1} x_{a'}`; zero when the complement is empty.
pub fn complement_quad<T: Scalar>(x: &[T], s: &SymPd<T>, a: &PartitionIndex) -> Result<T> {
    let ac = a.complement();
    if ac.is_empty() {
        return Ok(T::zero());
    }
    let s_cc = s.principal_submatrix(&ac)?;
    let x_c: Vec<T> = ac.iter().map(|&i| x[i]).collect();
    Ok(s_cc.inv_quad(&x_c))
}

/// Partitioned mean/covariance regression on sufficient statistics.
pub fn schur_stats<T: Scalar>(
    stats: &SampleStats<T>,
    a: &PartitionIndex,
) -> Result<(Vec<T>, SymPd<T>)> {
    regress_out(&stats.mean, &stats.cov, a)
}

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed: distinct `(master_seed, stream_id)` pairs give
/// independent streams; the same pair reproduces the identical sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_id: 0,
        }
    }

    /// Pure counter-based child derivation; injective over `child` for a
    /// fixed parent, independent of evaluation order.
    pub fn derive(&self, child: u64) -> SeedSpec {
        SeedSpec {
            master_seed: splitmix64(self.master_seed ^ splitmix64(self.stream_id ^ 0xA076_1D64_78BD_642F)),
            stream_id: child,
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let k0 = splitmix64(self.master_seed);
        let k1 = splitmix64(k0 ^ self.stream_id);
        let k2 = splitmix64(k1 ^ self.master_seed);
        let k3 = splitmix64(k2 ^ self.stream_id);
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&k0.to_le_bytes());
        seed[8..16].copy_from_slice(&k1.to_le_bytes());
        seed[16..24].copy_from_slice(&k2.to_le_bytes());
        seed[24..32].copy_from_slice(&k3.to_le_bytes());
        ChaCha12Rng::from_seed(seed)
    }
}

/// One `N(theta, sigma)` draw through the Cholesky factor of `sigma`.
pub fn mvn_draw<T: Scalar, R: Rng + ?Sized>(theta: &[T], sigma: &SymPd<T>, rng: &mut R) -> Vec<T> {
    let p = sigma.dim();
    let z: Vec<T> = (0..p).map(|_| T::std_normal(rng)).collect();
    let mut x = sigma.chol_mul(&z);
    for i in 0..p {
        x[i] += theta[i];
    }
    x
}

/// Samples `n` i.i.d. `N(theta, sigma)` vectors and returns their sufficient
/// statistics. Deterministic for a fixed seed.
pub fn sample_dataset<T: Scalar>(
    n: usize,
    theta: &[T],
    sigma: &SymPd<T>,
    seed: SeedSpec,
) -> Result<SampleStats<T>> {
    let p = sigma.dim();
    if theta.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: theta.len(),
        });
    }
    if n < p + 2 {
        return Err(Error::domain(format!(
            "sample size {n} too small; need n >= p + 2 = {}",
            p + 2
        )));
    }
    let mut rng = seed.rng();
    let mut draws = Vec::with_capacity(n * p);
    for _ in 0..n {
        draws.extend(mvn_draw(theta, sigma, &mut rng));
    }
    stats_from_rows(n, p, &draws)
}

/// Sufficient statistics from raw rows (row-major `n x p`).
pub fn stats_from_rows<T: Scalar>(n: usize, p: usize, rows: &[T]) -> Result<SampleStats<T>> {
    assert_eq!(rows.len(), n * p);
    let nf = T::of(n as f64);
    let mut mean = vec![T::zero(); p];
    for r in 0..n {
        for j in 0..p {
            mean[j] += rows[r * p + j];
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut cov = vec![T::zero(); p * p];
    for r in 0..n {
        for i in 0..p {
            let di = rows[r * p + i] - mean[i];
            for j in i..p {
                cov[i * p + j] += di * (rows[r * p + j] - mean[j]);
            }
        }
    }
    let denom = T::of((n - 1) as f64);
    for i in 0..p {
        for j in i..p {
            let v = cov[i * p + j] / denom;
            cov[i * p + j] = v;
            cov[j * p + i] = v;
        }
    }
    let cov = SymPd::new(p, cov)
        .map_err(|_| Error::Conditioning("sample covariance is numerically singular".into()))?;
    SampleStats::new(n, mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn random_pd(p: usize, rng: &mut impl Rng) -> SymPd<f64> {
        // B B' + 0.3 I keeps the spectrum away from zero
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
    fn cholesky_identity_and_diagonal() {
        let id = SymPd::<f64>::identity(3);
        assert_eq!(id.chol_lower(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let d = SymPd::<f64>::diagonal(&[4.0, 9.0]).unwrap();
        assert_eq!(d.chol_lower(), &[2.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn cholesky_reconstruction() {
        let mut rng = SeedSpec::new(7).rng();
        let m = random_pd(5, &mut rng);
        let l = m.chol_lower();
        let p = 5;
        let mut max_err = 0.0f64;
        let mut max_m = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..p {
                    s += l[i * p + k] * l[j * p + k];
                }
                max_err = max_err.max((s - m.get(i, j)).abs());
                max_m = max_m.max(m.get(i, j).abs());
            }
        }
        assert!(max_err < 1e-10 * max_m);
    }

    #[test]
    fn not_pd_is_reported_with_pivot() {
        let err = SymPd::new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap_err();
        match err {
            Error::NotPositiveDefinite { pivot, .. } => assert_eq!(pivot, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn asymmetric_is_rejected() {
        assert!(SymPd::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn schur_full_set_is_identity() {
        let mut rng = SeedSpec::new(3).rng();
        let s = random_pd(3, &mut rng);
        let x = vec![1.0, -2.0, 0.5];
        let a = PartitionIndex::full(3);
        let (xr, sr) = regress_out(&x, &s, &a).unwrap();
        assert_eq!(xr, x);
        assert_eq!(sr.entries(), s.entries());
    }

    #[test]
    fn schur_identity_covariance_decouples() {
        let s = SymPd::<f64>::identity(2);
        let x = vec![1.5, -0.7];
        let a = PartitionIndex::new(2, vec![0]).unwrap();
        let (xr, sr) = regress_out(&x, &s, &a).unwrap();
        assert_eq!(xr, vec![1.5]);
        assert_eq!(sr.entries(), &[1.0]);
    }

    #[test]
    fn schur_matches_block_inverse_oracle() {
        // oracle: S_{aa:a'} equals the inverse of the (a,a) block of S^{-1}
        let mut rng = SeedSpec::new(11).rng();
        let s = random_pd(3, &mut rng);
        let a = PartitionIndex::new(3, vec![0, 2]).unwrap();
        let x = vec![0.3, -1.1, 2.2];
        let (_, schur) = regress_out(&x, &s, &a).unwrap();
        let inv = s.inverse().unwrap();
        let inv_aa = inv.principal_submatrix(&[0, 2]).unwrap();
        let oracle = inv_aa.inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((schur.get(i, j) - oracle.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_form_block_decomposition() {
        // x' S^{-1} x = x_{a:a'}' S_{aa:a'}^{-1} x_{a:a'} + x_{a'}' S_{a'a'}^{-1} x_{a'}
        let mut rng = SeedSpec::new(19).rng();
        for _ in 0..20 {
            let p = 4;
            let s = random_pd(p, &mut rng);
            let x: Vec<f64> = (0..p).map(|_| f64::std_normal(&mut rng)).collect();
            let total = s.inv_quad(&x);
            for mask in 1usize..(1 << p) {
                let a = PartitionIndex::from_mask(p, mask);
                let (xr, sr) = regress_out(&x, &s, &a).unwrap();
                let q = sr.inv_quad(&xr) + complement_quad(&x, &s, &a).unwrap();
                assert!(
                    (q - total).abs() < 1e-10 * total.abs().max(1.0),
                    "mask {mask}: {q} vs {total}"
                );
            }
        }
    }

    #[test]
    fn schur_complement_stays_pd() {
        let mut rng = SeedSpec::new(23).rng();
        for _ in 0..50 {
            let s = random_pd(4, &mut rng);
            let x = vec![0.0; 4];
            for mask in 1usize..16 {
                let a = PartitionIndex::from_mask(4, mask);
                // SymPd construction asserts the Cholesky succeeds
                regress_out(&x, &s, &a).unwrap();
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let sigma = SymPd::<f64>::identity(2);
        let seed = SeedSpec::new(42).derive(5);
        let a = sample_dataset(10, &[0.0, 0.0], &sigma, seed).unwrap();
        let b = sample_dataset(10, &[0.0, 0.0], &sigma, seed).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.cov.entries(), b.cov.entries());
    }

    #[test]
    fn sampling_law_of_large_numbers() {
        let sigma = SymPd::<f64>::identity(2);
        let n = 10_000;
        let stats = sample_dataset(n, &[0.0, 0.0], &sigma, SeedSpec::new(1)).unwrap();
        let bound = 5.0 / (n as f64).sqrt();
        for m in &stats.mean {
            assert!(m.abs() < bound, "mean {m} exceeds {bound}");
        }
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((stats.cov.get(i, j) - target).abs() < 0.1);
            }
        }
    }

    #[test]
    fn univariate_variance_within_chi_square_band() {
        let sigma = SymPd::<f64>::diagonal(&[4.0]).unwrap();
        let n = 10_000;
        let stats = sample_dataset(n, &[0.0], &sigma, SeedSpec::new(2)).unwrap();
        // s^2/sigma^2 ~ chi2_{n-1}/(n-1); 5 sigma band with sd ~ sqrt(2/n)
        let half_width = 5.0 * (2.0 / n as f64).sqrt() * 4.0;
        assert!((stats.cov.get(0, 0) - 4.0).abs() < half_width);
    }

    #[test]
    fn sample_too_small_is_domain_error() {
        let sigma = SymPd::<f64>::identity(3);
        assert!(sample_dataset(4, &[0.0; 3], &sigma, SeedSpec::new(0)).is_err());
    }

    #[test]
    fn derive_is_pure_and_distinct() {
        let s = SeedSpec::new(99);
        assert_ne!(s.derive(0), s.derive(1));
        assert_eq!(s.derive(7), s.derive(7));
    }

    #[test]
    fn derived_streams_do_not_collide() {
        let s = SeedSpec::new(0xDEADBEEF);
        let mut seen = HashSet::with_capacity(1_000_000);
        for child in 0..1_000_000u64 {
            assert!(seen.insert(s.derive(child)), "collision at child {child}");
        }
    }

    #[test]
    fn debug_csv_roundtrip_shape() {
        let sigma = SymPd::<f64>::identity(2);
        let stats = sample_dataset(8, &[1.0, 2.0], &sigma, SeedSpec::new(3)).unwrap();
        let csv = stats.to_debug_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "n=8");
        let mean: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(mean, stats.mean);
    }
}
