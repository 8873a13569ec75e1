//! Dense complex linear algebra kernels used throughout the crate:
//! LU solves, SVD, small dense eigendecomposition, and null-vector
//! extraction, all backed by LAPACK through `ndarray-linalg`.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{
    Eig, Factorize, JobSvd, Norm, ReciprocalConditionNum, Solve, SVDDC,
};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = Array2<Complex64>;
pub type ComplexVector = Array1<Complex64>;

/// Singular value decomposition `A = U diag(sigma) V^H`.
///
/// `sigma` is sorted nonincreasing; `u` and `v` hold the left/right singular
/// vectors as columns (`v` is `V`, not `V^H`).
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Eigendecomposition of a square matrix: eigenvalues with unit-norm right
/// eigenvectors as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub values: Vec<Complex64>,
    pub vectors: ComplexMatrix,
}

/// Which null space `null_vectors` extracts. Left vectors are taken with
/// respect to the transpose (not the conjugate transpose) so that they pair
/// with the nondegenerate bilinear form `<u, v> = u^T v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn check_finite(a: &ComplexMatrix, context: &'static str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

/// Solve `A X = B` with partially pivoted LU.
///
/// Errors with `SingularMatrix` when the factorization is singular to
/// working precision (reciprocal condition number below `~ n * eps`).
pub fn lu_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_finite(a, "lu_solve lhs")?;
    check_finite(b, "lu_solve rhs")?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "lu_solve needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: b.nrows(),
        });
    }
    let f = factorize_checked(a)?;
    let rcond = f.rcond()?;
    if rcond < 10.0 * n as f64 * f64::EPSILON {
        return Err(Error::SingularMatrix {
            pivot: rcond * a.opnorm_one_approx(),
        });
    }
    let mut x = ComplexMatrix::zeros((n, b.ncols()));
    for (j, col) in b.columns().into_iter().enumerate() {
        let xj = f.solve(&col.to_owned())?;
        x.column_mut(j).assign(&xj);
    }
    Ok(x)
}

type Factored = ndarray_linalg::LUFactorized<ndarray::OwnedRepr<Complex64>>;

// zgetrf reports an exactly zero pivot through a positive return code, which
// the generic conversion would misclassify as an iteration failure.
fn factorize_checked(a: &ComplexMatrix) -> Result<Factored> {
    a.factorize().map_err(|e| match Error::from(e) {
        Error::EigNonConvergence { .. } => Error::SingularMatrix { pivot: 0.0 },
        other => other,
    })
}

/// LU factorization handle for repeated solves against one matrix.
pub struct LuFactors {
    inner: Factored,
    pub rcond: f64,
    n: usize,
}

impl LuFactors {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        check_finite(a, "lu factorization")?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "factorization needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let f = factorize_checked(a)?;
        let rcond = f.rcond()?;
        Ok(Self { inner: f, rcond, n })
    }

    pub fn is_numerically_singular(&self) -> bool {
        self.rcond < 10.0 * self.n as f64 * f64::EPSILON
    }

    pub fn solve_vec(&self, b: &ComplexVector) -> Result<ComplexVector> {
        Ok(self.inner.solve(b)?)
    }

    pub fn solve_mat(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut x = ComplexMatrix::zeros((self.n, b.ncols()));
        for (j, col) in b.columns().into_iter().enumerate() {
            x.column_mut(j).assign(&self.inner.solve(&col.to_owned())?);
        }
        Ok(x)
    }
}

trait OpnormApprox {
    fn opnorm_one_approx(&self) -> f64;
}
impl OpnormApprox for ComplexMatrix {
    fn opnorm_one_approx(&self) -> f64 {
        self.columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Full singular value decomposition (divide and conquer).
pub fn svd(a: &ComplexMatrix) -> Result<SvdResult> {
    check_finite(a, "svd input")?;
    let (u, sigma, vt) = a.svddc(JobSvd::Some)?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V^T");
    // zgesdd returns V^H; undo the conjugate transpose.
    let v = vt.t().mapv(|z| z.conj());
    Ok(SvdResult {
        u,
        sigma: sigma.to_vec(),
        v,
    })
}

/// Dense eigendecomposition (right eigenvectors, unit 2-norm columns).
pub fn eig(a: &ComplexMatrix) -> Result<EigResult> {
    check_finite(a, "eig input")?;
    let (values, mut vectors) = a.eig()?;
    for mut col in vectors.columns_mut() {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            col.mapv_inplace(|z| z / nrm);
        }
    }
    Ok(EigResult {
        values: values.to_vec(),
        vectors,
    })
}

/// Matrix size above which null vectors come from LU inverse iteration
/// instead of a full SVD.
pub(crate) const NULLVEC_SVD_LIMIT: usize = 800;

/// The `count` singular vectors of `a` with smallest singular values.
///
/// `Side::Left` returns right null vectors of `A^T` (bilinear-pairing
/// convention, no conjugation).
pub fn null_vectors(a: &ComplexMatrix, side: Side, count: usize) -> Result<Vec<ComplexVector>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(
            "null_vectors needs a square matrix".into(),
        ));
    }
    if count > n {
        return Err(Error::InvalidArgument(format!(
            "requested {count} null vectors from a {n}x{n} matrix"
        )));
    }
    let work = match side {
        Side::Right => a.clone(),
        Side::Left => a.t().to_owned(),
    };
    if n <= NULLVEC_SVD_LIMIT {
        let dec = svd(&work)?;
        let mut out = Vec::with_capacity(count);
        for j in 0..count {
            out.push(dec.v.column(n - 1 - j).to_owned());
        }
        Ok(out)
    } else {
        inverse_iteration_block(&work, count)
    }
}

/// Smallest singular triplet `(sigma_min_estimate, right, left)` of `a`,
/// with the left vector in the transpose (bilinear) convention.
pub fn smallest_singular_triplet(
    a: &ComplexMatrix,
) -> Result<(f64, ComplexVector, ComplexVector)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(
            "smallest_singular_triplet needs a square matrix".into(),
        ));
    }
    if n <= NULLVEC_SVD_LIMIT {
        // One SVD gives all three: A v = sigma u implies
        // A^T conj(u) = sigma conj(v), so the bilinear left vector is the
        // conjugate of the last column of U.
        let dec = svd(a)?;
        let sigma = dec.sigma[n - 1];
        let right = dec.v.column(n - 1).to_owned();
        let left = dec.u.column(n - 1).mapv(|z| z.conj());
        return Ok((sigma, right, left));
    }
    let right = null_vectors(a, Side::Right, 1)?.remove(0);
    let left = null_vectors(a, Side::Left, 1)?.remove(0);
    let sigma = a.dot(&right).norm_l2();
    Ok((sigma, right, left))
}

/// Estimate of the spectral norm of `a` by power iteration on `A^H A`.
pub fn opnorm_two_estimate(a: &ComplexMatrix) -> f64 {
    let n = a.ncols();
    let mut x = ComplexVector::from_shape_fn(n, |i| {
        Complex64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())
    });
    let mut nrm = x.norm_l2();
    x.mapv_inplace(|z| z / nrm);
    let mut sigma = 0.0;
    for _ in 0..5000 {
        let y = a.dot(&x);
        let z = a.mapv(|v| v.conj()).t().dot(&y);
        nrm = z.norm_l2();
        if nrm == 0.0 {
            return 0.0;
        }
        let new_sigma = nrm.sqrt();
        x = z.mapv(|v| v / nrm);
        if (new_sigma - sigma).abs() <= 1e-13 * new_sigma {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}

fn inverse_iteration_block(a: &ComplexMatrix, count: usize) -> Result<Vec<ComplexVector>> {
    let n = a.nrows();
    let f = factorize_checked(a)?;
    // Deterministic pseudo-random starting block.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut basis: Vec<ComplexVector> = (0..count)
        .map(|_| ComplexVector::from_shape_fn(n, |_| Complex64::new(next(), next())))
        .collect();
    for _ in 0..4 {
        for v in basis.iter_mut() {
            *v = f.solve(v)?;
        }
        orthonormalize(&mut basis);
    }
    // Order by residual (ascending singular value estimate).
    basis.sort_by(|x, y| {
        let rx = a.dot(x).norm_l2();
        let ry = a.dot(y).norm_l2();
        rx.partial_cmp(&ry).unwrap()
    });
    Ok(basis)
}

fn orthonormalize(vs: &mut [ComplexVector]) {
    for i in 0..vs.len() {
        for j in 0..i {
            let proj: Complex64 = vs[j]
                .iter()
                .zip(vs[i].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let vj = vs[j].clone();
            vs[i].zip_mut_with(&vj, |x, y| *x -= proj * y);
        }
        let nrm = vs[i].norm_l2();
        if nrm > 0.0 {
            vs[i].mapv_inplace(|z| z / nrm);
        }
    }
}

/// Group eigenvalues into clusters of mutual distance below
/// `tol * (1 + |lambda|)`; returns (center, member indices) pairs.
pub fn cluster_eigenvalues(values: &[Complex64], tol: f64) -> Vec<(Complex64, Vec<usize>)> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = 1.0 + values[i].norm().max(values[j].norm());
            if (values[i] - values[j]).norm() <= tol * scale {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups
        .into_values()
        .map(|members| {
            let center = members.iter().map(|&i| values[i]).sum::<Complex64>()
                / Complex64::new(members.len() as f64, 0.0);
            (center, members)
        })
        .collect()
}

/// Numerical rank: number of singular values at or above `tol * sigma_1`.
pub fn numerical_rank(sigma: &[f64], tol: f64) -> usize {
    match sigma.first() {
        None => 0,
        Some(&s1) if s1 == 0.0 => 0,
        Some(&s1) => sigma.iter().filter(|&&s| s >= tol * s1).count(),
    }
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).norm_l2()
}

/// Identity matrix helper.
pub fn eye(n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros((n, n));
    m.diag_mut().fill(Complex64::new(1.0, 0.0));
    m
}

/// Reconstruction `U diag(sigma) V^H` of an `SvdResult` restricted to the
/// leading `r` singular triplets.
pub fn svd_reconstruct(dec: &SvdResult, r: usize) -> ComplexMatrix {
    let ur = dec.u.slice(s![.., ..r]).to_owned();
    let vr = dec.v.slice(s![.., ..r]).to_owned();
    let mut scaled = ur;
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|z| z * dec.sigma[j]);
    }
    scaled.dot(&vr.t().mapv(|z| z.conj()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(n: usize, m: usize, seed: u64) -> ComplexMatrix {
        let mut s = seed;
        ComplexMatrix::from_shape_fn((n, m), |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            c(a, b)
        })
    }

    #[test]
    fn lu_solve_identity() {
        let a = eye(3);
        let b = random_matrix(3, 2, 7);
        let x = lu_solve(&a, &b).unwrap();
        assert!(frobenius_distance(&x, &b) < 1e-14);
    }

    #[test]
    fn lu_solve_diagonal() {
        let a = array![[c(2.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(3.0, 0.0)]];
        let b = array![[c(2.0, 0.0)], [c(3.0, 0.0)]];
        let x = lu_solve(&a, &b).unwrap();
        assert!((x[[0, 0]] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((x[[1, 0]] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lu_solve_recovers_known_solution() {
        // Well-conditioned 50x50: B constructed from a known X0.
        let n = 50;
        let mut a = random_matrix(n, n, 42);
        for i in 0..n {
            a[[i, i]] += c(10.0, 0.0); // diagonal dominance
        }
        let x0 = random_matrix(n, 3, 99);
        let b = a.dot(&x0);
        let x = lu_solve(&a, &b).unwrap();
        let rel = frobenius_distance(&x, &x0) / x0.norm_l2();
        assert!(rel < 1e-10, "relative error {rel:.3e}");
    }

    #[test]
    fn lu_solve_rejects_singular() {
        let a = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(2.0, 0.0), c(4.0, 0.0)]];
        let b = array![[c(1.0, 0.0)], [c(1.0, 0.0)]];
        match lu_solve(&a, &b) {
            Err(Error::SingularMatrix { .. }) => {}
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn lu_roundtrip_large() {
        let n = 500;
        let mut a = random_matrix(n, n, 3);
        for i in 0..n {
            a[[i, i]] += c(30.0, 5.0);
        }
        let x0 = random_matrix(n, 1, 17);
        let b = a.dot(&x0);
        let x = lu_solve(&a, &b).unwrap();
        let resid = frobenius_distance(&a.dot(&x), &b) / (a.norm_l2() * x.norm_l2());
        assert!(resid < 1e-10, "residual {resid:.3e}");
    }

    #[test]
    fn svd_identity_and_diag() {
        let dec = svd(&eye(2)).unwrap();
        assert!((dec.sigma[0] - 1.0).abs() < 1e-14 && (dec.sigma[1] - 1.0).abs() < 1e-14);
        let a = array![[c(3.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let dec = svd(&a).unwrap();
        assert!((dec.sigma[0] - 3.0).abs() < 1e-14 && dec.sigma[1].abs() < 1e-14);
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        // Independent oracle: sigma^2 are the eigenvalues of A^H A.
        let a = random_matrix(20, 10, 5);
        let dec = svd(&a).unwrap();
        let gram = a.t().mapv(|z| z.conj()).dot(&a);
        let mut gram_eigs: Vec<f64> = eig(&gram).unwrap().values.iter().map(|z| z.re).collect();
        gram_eigs.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (s, g) in dec.sigma.iter().zip(gram_eigs.iter()) {
            assert!((s * s - g).abs() <= 1e-9 * g.abs().max(1.0), "{s} vs {g}");
        }
    }

    #[test]
    fn svd_reconstruction_and_orthogonality() {
        let a = random_matrix(30, 30, 11);
        let dec = svd(&a).unwrap();
        let rec = svd_reconstruct(&dec, 30);
        assert!(frobenius_distance(&rec, &a) <= 1e-10 * a.norm_l2());
        let uhu = dec.u.t().mapv(|z| z.conj()).dot(&dec.u);
        assert!(frobenius_distance(&uhu, &eye(30)) < 1e-10);
        let vhv = dec.v.t().mapv(|z| z.conj()).dot(&dec.v);
        assert!(frobenius_distance(&vhv, &eye(30)) < 1e-10);
    }

    #[test]
    fn svd_sigma1_matches_power_iteration() {
        let a = random_matrix(40, 25, 23);
        let dec = svd(&a).unwrap();
        let est = opnorm_two_estimate(&a);
        assert!((dec.sigma[0] - est).abs() <= 1e-7 * dec.sigma[0]);
    }

    #[test]
    fn eig_diagonal() {
        let a = array![
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]
        ];
        let mut vals: Vec<f64> = eig(&a).unwrap().values.iter().map(|z| z.re).collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eig_companion_matrix_polynomial_roots() {
        // Companion matrix of z^3 - 6z^2 + 11z - 6 = (z-1)(z-2)(z-3).
        let a = array![
            [c(6.0, 0.0), c(-11.0, 0.0), c(6.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]
        ];
        let mut vals: Vec<f64> = eig(&a).unwrap().values.iter().map(|z| z.re).collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (v, expect) in vals.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn eig_residuals_and_similarity() {
        // A = S D S^-1 reproduces diag(D) as a multiset.
        let n = 8;
        let d: Vec<Complex64> = (0..n).map(|i| c(i as f64, (i as f64).sin())).collect();
        let mut s = random_matrix(n, n, 77);
        for i in 0..n {
            s[[i, i]] += c(4.0, 0.0);
        }
        let mut dm = ComplexMatrix::zeros((n, n));
        for i in 0..n {
            dm[[i, i]] = d[i];
        }
        let sinv = lu_solve(&s, &eye(n)).unwrap();
        let a = s.dot(&dm).dot(&sinv);
        let res = eig(&a).unwrap();
        let norm_a = a.norm_l2();
        for (j, &lam) in res.values.iter().enumerate() {
            let v = res.vectors.column(j).to_owned();
            let resid = (a.dot(&v) - v.mapv(|z| z * lam)).norm_l2();
            assert!(resid <= 1e-8 * norm_a, "residual {resid:.3e}");
        }
        let mut got: Vec<Complex64> = res.values.clone();
        got.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        let mut want = d.clone();
        want.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-8, "{g} vs {w}");
        }
    }

    #[test]
    fn null_vectors_diag_both_sides() {
        let a = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        for side in [Side::Right, Side::Left] {
            let v = null_vectors(&a, side, 1).unwrap().remove(0);
            assert!(v[0].norm() < 1e-12 && (v[1].norm() - 1.0).abs() < 1e-12);
        }
        assert!(null_vectors(&a, Side::Right, 3).is_err());
    }

    #[test]
    fn left_null_vectors_equal_transposed_right() {
        let a = random_matrix(12, 12, 9);
        let left = null_vectors(&a, Side::Left, 2).unwrap();
        let right_of_t = null_vectors(&a.t().to_owned(), Side::Right, 2).unwrap();
        for (l, r) in left.iter().zip(right_of_t.iter()) {
            assert!((l - r).norm_l2() < 1e-12);
        }
    }

    #[test]
    fn inverse_iteration_agrees_with_svd() {
        // Build A = U diag(s) V^H with a well-isolated small singular value,
        // as in the near-singular systems the block iteration is used for.
        let n = 60;
        let base = random_matrix(n, n, 13);
        let dec = svd(&base).unwrap();
        let mut s: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / 10.0).collect();
        s[n - 1] = 1e-9;
        let custom = SvdResult {
            u: dec.u.clone(),
            sigma: s.clone(),
            v: dec.v.clone(),
        };
        let a = svd_reconstruct(&custom, n);
        let vs = inverse_iteration_block(&a, 1).unwrap();
        let resid = a.dot(&vs[0]).norm_l2();
        // The attainable floor is sigma_min plus the solver backward error.
        assert!(resid <= 1e-8, "residual {resid:.3e}");
        // The computed vector matches the known singular direction.
        let target = dec.v.column(n - 1).to_owned();
        let overlap: Complex64 = target.iter().zip(vs[0].iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cluster_eigenvalues_groups_close_values() {
        let vals = [c(1.0, 0.0), c(1.0 + 1e-12, 0.0), c(2.0, 0.0)];
        let clusters = cluster_eigenvalues(&vals, 1e-8);
        assert_eq!(clusters.len(), 2);
        let sizes: Vec<usize> = {
            let mut v: Vec<usize> = clusters.iter().map(|(_, m)| m.len()).collect();
            v.sort();
            v
        };
        assert_eq!(sizes, vec![1, 2]);
    }
}
