//! Nystrom discretization of the boundary integral operators for the
//! exterior Neumann Helmholtz problem: assembly of `A_N(k) = I - D_k`, its
//! k-derivative and adjoint, the smooth perturbation operator, scattering
//! solves, and evaluation of the double-layer field.
//!
//! The log singularity of the Hankel kernels on each curve is handled with
//! the Kussmaul-Martensen quadrature: the kernel is split as
//! `K = K_hat + K_tilde log(4 sin^2((t - tau)/2))`, the smooth part gets the
//! `2N`-point trapezoid rule (weight `pi/N` per node) and the log part the
//! spectral weights `R_j`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, Domain};
use crate::linalg::{self, ComplexMatrix, ComplexVector, LuFactors};
use crate::specfun;

/// Density vector: one complex value per node, curve-major ordering.
pub type DensityVector = ComplexVector;

/// Quadrature grid: `2N` uniformly spaced nodes `t_j = j pi / N` on each
/// curve, with cached boundary samples and Kussmaul-Martensen weights.
#[derive(Debug, Clone)]
pub struct NystromGrid {
    domain: Domain,
    n: usize,
    /// `samples[m][j]` is curve `m` at node `t_j`.
    samples: Vec<Vec<BoundarySample>>,
    /// `R(q pi / N)` for `q = 0, ..., 2N - 1`; `R_j(t_i)` depends only on
    /// `(i - j) mod 2N`.
    km_weights: Vec<f64>,
}

impl NystromGrid {
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidArgument(format!(
                "grid needs N >= 4 nodes per half period, got {n}"
            )));
        }
        let two_n = 2 * n;
        let h = std::f64::consts::PI / n as f64;
        let samples = domain
            .curves()
            .iter()
            .map(|c| (0..two_n).map(|j| c.sample(j as f64 * h)).collect())
            .collect();
        let km_weights = (0..two_n).map(|q| km_weight(n, q as f64 * h)).collect();
        Ok(NystromGrid {
            domain,
            n,
            samples,
            km_weights,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nodes per curve.
    pub fn nodes_per_curve(&self) -> usize {
        2 * self.n
    }

    /// Total number of nodes (matrix dimension).
    pub fn size(&self) -> usize {
        2 * self.n * self.domain.len()
    }

    /// Trapezoid spacing in the parameter.
    pub fn h(&self) -> f64 {
        std::f64::consts::PI / self.n as f64
    }

    pub fn sample(&self, curve: usize, node: usize) -> &BoundarySample {
        &self.samples[curve][node]
    }

    /// Quadrature weight `(pi/N) |gamma'|` of a node.
    pub fn weight(&self, curve: usize, node: usize) -> f64 {
        self.h() * self.samples[curve][node].speed
    }

    /// All quadrature weights in curve-major node order.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.size());
        for samples in &self.samples {
            for s in samples {
                w.push(self.h() * s.speed);
            }
        }
        w
    }

    fn km(&self, i: usize, j: usize) -> f64 {
        let two_n = 2 * self.n;
        self.km_weights[(i + two_n - j) % two_n]
    }
}

/// Kussmaul-Martensen weight
/// `R(d) = -(2 pi / N) sum_{m=1}^{N-1} cos(m d)/m - (pi/N^2) cos(N d)`.
fn km_weight(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    let mut sum = 0.0;
    for m in 1..n {
        let mf = m as f64;
        sum += (mf * d).cos() / mf;
    }
    -2.0 * std::f64::consts::PI / nf * sum
        - std::f64::consts::PI / (nf * nf) * (nf * d).cos()
}

/// Which normal enters the double-layer kernel: the source normal gives
/// `D_k`, the target normal its adjoint with respect to the bilinear form
/// `<phi, psi> = int phi psi ds`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KernelSide {
    Direct,
    Adjoint,
}

/// Hankel and Bessel parts of the double-layer kernel between two distinct
/// points: returns `(K, K_tilde)` where
/// `K = (ik/2) H1(k r) (dot/r) |gamma'|` and
/// `K_tilde = -(k/(2 pi)) J1(k r) (dot/r) |gamma'|`.
fn kernel_pair(
    k: Complex64,
    target: &BoundarySample,
    source: &BoundarySample,
    side: KernelSide,
) -> Result<(Complex64, Complex64)> {
    let dx = target.position.0 - source.position.0;
    let dy = target.position.1 - source.position.1;
    let r = dx.hypot(dy);
    let dot = match side {
        KernelSide::Direct => source.normal.0 * dx + source.normal.1 * dy,
        // nu(t) . (gamma(tau) - gamma(t)): target normal against the
        // *reversed* difference, so that discretely D* = W^-1 D^T W.
        KernelSide::Adjoint => -(target.normal.0 * dx + target.normal.1 * dy),
    };
    let (j1, h1) = specfun::bessel_j1h1(k * r)?;
    let geom = dot / r * source.speed;
    let half_ik = Complex64::new(0.0, 0.5) * k;
    let kk = half_ik * h1 * geom;
    let kt = -k / (2.0 * std::f64::consts::PI) * j1 * geom;
    Ok((kk, kt))
}

/// Wavenumber derivative of the kernel split, from the closed forms
/// `d/dk [k H1(k r)] = k r H0(k r)` and `d/dk [k J1(k r)] = k r J0(k r)`:
/// `dK/dk = (ik/2) H0(k r) dot |gamma'|` and
/// `dK_tilde/dk = -(k/(2 pi)) J0(k r) dot |gamma'|` (the `1/r` cancels).
fn kernel_pair_derivative(
    k: Complex64,
    target: &BoundarySample,
    source: &BoundarySample,
) -> Result<(Complex64, Complex64)> {
    let dx = target.position.0 - source.position.0;
    let dy = target.position.1 - source.position.1;
    let r = dx.hypot(dy);
    let dot = source.normal.0 * dx + source.normal.1 * dy;
    let (j0, h0) = specfun::bessel_j0h0(k * r)?;
    let geom = dot * source.speed;
    let kk = Complex64::new(0.0, 0.5) * k * h0 * geom;
    let kt = -k / (2.0 * std::f64::consts::PI) * j0 * geom;
    Ok((kk, kt))
}

/// Diagonal limit of the smooth part:
/// `K_hat(t,t) = (g2' g1'' - g1' g2'') / (2 pi |gamma'|^2)`; the log part
/// vanishes on the diagonal. The same limit holds for the adjoint kernel.
fn kernel_diagonal(s: &BoundarySample) -> f64 {
    (s.tangent.1 * s.second.0 - s.tangent.0 * s.second.1)
        / (2.0 * std::f64::consts::PI * s.speed * s.speed)
}

fn check_wavenumber(k: Complex64) -> Result<()> {
    if k.norm() == 0.0 {
        return Err(Error::InvalidArgument(
            "wavenumber k must be nonzero".into(),
        ));
    }
    Ok(())
}

/// Curve-pair signature under which a Nystrom block is invariant: the two
/// shapes (semi-axes and parametrization phase) and the center offset. The
/// kernel depends on positions only through differences, so congruent pairs
/// share their block bit-for-bit and each class is assembled once.
fn block_key(target: &crate::geometry::Curve, source: &crate::geometry::Curve) -> [u64; 8] {
    let same = std::ptr::eq(target, source);
    let (dx, dy) = if same {
        (0.0, 0.0)
    } else {
        (
            target.center.0 - source.center.0,
            target.center.1 - source.center.1,
        )
    };
    [
        target.a.to_bits(),
        target.b.to_bits(),
        target.phase.to_bits(),
        source.a.to_bits(),
        source.b.to_bits(),
        source.phase.to_bits(),
        dx.to_bits(),
        dy.to_bits(),
    ]
}

/// What a block assembly evaluates: the operator `I - D_k` itself or its
/// wavenumber derivative `-dD_k/dk` (whose diagonal vanishes, since both
/// diagonal kernel limits are independent of `k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Value(KernelSide),
    Derivative,
}

impl BlockKind {
    fn kernels(
        self,
        k: Complex64,
        target: &BoundarySample,
        source: &BoundarySample,
    ) -> Result<(Complex64, Complex64)> {
        match self {
            BlockKind::Value(side) => kernel_pair(k, target, source, side),
            BlockKind::Derivative => kernel_pair_derivative(k, target, source),
        }
    }
}

/// Same-curve block: identity plus the Kussmaul-Martensen split.
fn assemble_diag_block(
    k: Complex64,
    grid: &NystromGrid,
    curve: usize,
    kind: BlockKind,
) -> Result<ComplexMatrix> {
    let two_n = grid.nodes_per_curve();
    let h = grid.h();
    let mut block = Array2::<Complex64>::zeros((two_n, two_n));
    for i in 0..two_n {
        for j in 0..two_n {
            block[[i, j]] = if i == j {
                match kind {
                    BlockKind::Value(_) => {
                        let diag = kernel_diagonal(grid.sample(curve, i));
                        Complex64::new(1.0 - h * diag, 0.0)
                    }
                    BlockKind::Derivative => Complex64::new(0.0, 0.0),
                }
            } else {
                let (kk, kt) = kind.kernels(k, grid.sample(curve, i), grid.sample(curve, j))?;
                let d = (i as f64 - j as f64) * h;
                let log_term = (4.0 * (d / 2.0).sin().powi(2)).ln();
                let k_hat = kk - kt * log_term;
                -(h * k_hat + grid.km(i, j) * kt)
            };
        }
    }
    Ok(block)
}

/// Cross-curve block: plain trapezoid rule on the smooth kernel.
fn assemble_cross_block(
    k: Complex64,
    grid: &NystromGrid,
    target: usize,
    source: usize,
    kind: BlockKind,
) -> Result<ComplexMatrix> {
    let two_n = grid.nodes_per_curve();
    let h = grid.h();
    let mut block = Array2::<Complex64>::zeros((two_n, two_n));
    for i in 0..two_n {
        for j in 0..two_n {
            let (kk, _) = kind.kernels(k, grid.sample(target, i), grid.sample(source, j))?;
            block[[i, j]] = -h * kk;
        }
    }
    Ok(block)
}

fn assemble_side(k: Complex64, grid: &NystromGrid, kind: BlockKind) -> Result<ComplexMatrix> {
    check_wavenumber(k)?;
    let curves = grid.domain().curves();
    let m = curves.len();
    let two_n = grid.nodes_per_curve();
    let size = grid.size();
    let mut a = Array2::<Complex64>::zeros((size, size));

    let mut cache: std::collections::HashMap<[u64; 8], ComplexMatrix> =
        std::collections::HashMap::new();
    for cm in 0..m {
        for cl in 0..m {
            let key = block_key(&curves[cm], if cm == cl { &curves[cm] } else { &curves[cl] });
            if !cache.contains_key(&key) {
                let block = if cm == cl {
                    assemble_diag_block(k, grid, cm, kind)?
                } else {
                    assemble_cross_block(k, grid, cm, cl, kind)?
                };
                cache.insert(key, block);
            }
            let block = &cache[&key];
            a.slice_mut(ndarray::s![
                cm * two_n..(cm + 1) * two_n,
                cl * two_n..(cl + 1) * two_n
            ])
            .assign(block);
        }
    }
    Ok(a)
}

/// Assemble the Nystrom matrix `A_N(k)` discretizing `I - D_k`.
pub fn assemble(k: Complex64, grid: &NystromGrid) -> Result<ComplexMatrix> {
    assemble_side(k, grid, BlockKind::Value(KernelSide::Direct))
}

/// Assemble the adjoint system `I - D*_k` (adjoint with respect to the
/// nondegenerate bilinear pairing, no conjugation).
pub fn assemble_adjoint(k: Complex64, grid: &NystromGrid) -> Result<ComplexMatrix> {
    assemble_side(k, grid, BlockKind::Value(KernelSide::Adjoint))
}

/// `A_N'(k)` from the closed-form kernel derivatives, at the cost of a
/// single assembly. Agrees with [`assemble_derivative`] to quadrature
/// accuracy and is the default differentiation path of the eigensolver.
pub fn assemble_derivative_analytic(k: Complex64, grid: &NystromGrid) -> Result<ComplexMatrix> {
    assemble_side(k, grid, BlockKind::Derivative)
}

/// `A_N'(k)` by Cauchy-integral differentiation on a circle of radius `rho`
/// with `points` trapezoid nodes; spectrally accurate for holomorphic maps.
pub fn assemble_derivative(
    k: Complex64,
    grid: &NystromGrid,
    rho: f64,
    points: usize,
) -> Result<ComplexMatrix> {
    if rho <= 0.0 || points < 4 {
        return Err(Error::InvalidArgument(format!(
            "derivative contour needs rho > 0 and at least 4 points, got rho = {rho}, points = {points}"
        )));
    }
    let size = grid.size();
    let mut acc = Array2::<Complex64>::zeros((size, size));
    for q in 0..points {
        let theta = 2.0 * std::f64::consts::PI * q as f64 / points as f64;
        let phase = Complex64::from_polar(1.0, theta);
        let z = k + rho * phase;
        let a = assemble(z, grid)?;
        let factor = phase.conj(); // e^{-i theta}
        acc.zip_mut_with(&a, |acc_e, &a_e| *acc_e += a_e * factor);
    }
    let scale = 1.0 / (points as f64 * rho);
    acc.mapv_inplace(|v| v * scale);
    Ok(acc)
}

/// Discretization of the smooth perturbation operator
/// `(B phi)(x) = int sin|x - y| phi(y) ds(y)`, so that `A_N(k) + eps B`
/// discretizes `(I - D_k) + eps B`.
pub fn assemble_perturbation(grid: &NystromGrid) -> ComplexMatrix {
    let m = grid.domain().len();
    let two_n = grid.nodes_per_curve();
    let size = grid.size();
    let h = grid.h();
    let mut b = Array2::<Complex64>::zeros((size, size));
    for cm in 0..m {
        for cl in 0..m {
            for i in 0..two_n {
                for j in 0..two_n {
                    let ti = grid.sample(cm, i);
                    let tj = grid.sample(cl, j);
                    let r = (ti.position.0 - tj.position.0)
                        .hypot(ti.position.1 - tj.position.1);
                    b[[cm * two_n + i, cl * two_n + j]] =
                        Complex64::new(h * r.sin() * tj.speed, 0.0);
                }
            }
        }
    }
    b
}

/// Nondegenerate bilinear pairing `<phi, psi> = int phi psi ds` (no
/// conjugation), by the trapezoid rule.
pub fn bilinear(
    phi: &DensityVector,
    psi: &DensityVector,
    grid: &NystromGrid,
) -> Result<Complex64> {
    let size = grid.size();
    if phi.len() != size {
        return Err(Error::LengthMismatch {
            expected: size,
            got: phi.len(),
        });
    }
    if psi.len() != size {
        return Err(Error::LengthMismatch {
            expected: size,
            got: psi.len(),
        });
    }
    let w = grid.weights();
    Ok(phi
        .iter()
        .zip(psi.iter())
        .zip(w.iter())
        .map(|((p, q), &wi)| p * q * wi)
        .sum())
}

/// Quadrature-weighted L2 norm `(sum w |phi_j|^2)^{1/2}`.
pub fn weighted_norm(phi: &DensityVector, grid: &NystromGrid) -> Result<f64> {
    let size = grid.size();
    if phi.len() != size {
        return Err(Error::LengthMismatch {
            expected: size,
            got: phi.len(),
        });
    }
    let w = grid.weights();
    Ok(phi
        .iter()
        .zip(w.iter())
        .map(|(p, &wi)| wi * p.norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Single-layer matrix mapping Neumann data `g` to `S_k g` values at the
/// nodes, with the Kussmaul-Martensen split of `H_0^(1)`.
fn assemble_single_layer(k: Complex64, grid: &NystromGrid) -> Result<ComplexMatrix> {
    check_wavenumber(k)?;
    let m = grid.domain().len();
    let two_n = grid.nodes_per_curve();
    let size = grid.size();
    let h = grid.h();
    let pi = std::f64::consts::PI;
    let mut s_mat = Array2::<Complex64>::zeros((size, size));
    for cm in 0..m {
        for cl in 0..m {
            for i in 0..two_n {
                for j in 0..two_n {
                    let ti = grid.sample(cm, i);
                    let tj = grid.sample(cl, j);
                    let entry = if cm != cl {
                        let r = (ti.position.0 - tj.position.0)
                            .hypot(ti.position.1 - tj.position.1);
                        let (h0, _) = specfun::hankel1_01(k * r)?;
                        h * Complex64::new(0.0, 0.5) * h0 * tj.speed
                    } else if i == j {
                        // Diagonal limit of the smooth part:
                        // (i/2 - gamma_E/pi - ln(k |gamma'|/2)/pi) |gamma'|;
                        // unlike the double-layer case the log factor
                        // M1(t,t) = -|gamma'|/(2 pi) does not vanish.
                        let lg = (k * tj.speed * 0.5).ln();
                        let m2 = (Complex64::new(0.0, 0.5)
                            - Complex64::new(specfun::EULER_GAMMA / pi, 0.0)
                            - lg / pi)
                            * tj.speed;
                        let m1_diag = -tj.speed / (2.0 * pi);
                        h * m2 + grid.km(i, i) * m1_diag
                    } else {
                        let r = (ti.position.0 - tj.position.0)
                            .hypot(ti.position.1 - tj.position.1);
                        let (j0, _, h0, _) = specfun::bessel_all_01(k * r)?;
                        let m_full = Complex64::new(0.0, 0.5) * h0 * tj.speed;
                        let m1 = -j0 * tj.speed / (2.0 * pi);
                        let d = (i as f64 - j as f64) * h;
                        let log_term = (4.0 * (d / 2.0).sin().powi(2)).ln();
                        let m2 = m_full - m1 * log_term;
                        h * m2 + grid.km(i, j) * m1
                    };
                    s_mat[[cm * two_n + i, cl * two_n + j]] = entry;
                }
            }
        }
    }
    Ok(s_mat)
}

/// Solve the scattering problem `(I - D_k) phi = S_k g`.
pub fn solve_scattering(
    k: Complex64,
    g: &DensityVector,
    grid: &NystromGrid,
) -> Result<DensityVector> {
    let a = assemble(k, grid)?;
    let s_mat = assemble_single_layer(k, grid)?;
    let rhs = s_mat.dot(g);
    let lu = LuFactors::new(&a)?;
    if lu.is_numerically_singular() {
        return Err(Error::SingularSystem { k });
    }
    lu.solve_vec(&rhs)
}

/// Evaluate the field of Eq. (sol-formula) at exterior points:
/// the double-layer potential of `phi` minus the single-layer potential of
/// `g` when Neumann data is supplied.
pub fn evaluate_field(
    k: Complex64,
    phi: &DensityVector,
    g: Option<&DensityVector>,
    grid: &NystromGrid,
    points: &[(f64, f64)],
) -> Result<Vec<Complex64>> {
    check_wavenumber(k)?;
    let size = grid.size();
    if phi.len() != size {
        return Err(Error::LengthMismatch {
            expected: size,
            got: phi.len(),
        });
    }
    if let Some(g) = g {
        if g.len() != size {
            return Err(Error::LengthMismatch {
                expected: size,
                got: g.len(),
            });
        }
    }
    let m = grid.domain().len();
    let two_n = grid.nodes_per_curve();
    let h = grid.h();

    // Accuracy of the plain trapezoid rule degrades within a few grid
    // spacings of the boundary.
    for &(x, y) in points {
        for cm in 0..m {
            let spacing = grid.samples[cm]
                .iter()
                .map(|s| s.speed)
                .fold(0.0f64, f64::max)
                * h;
            if grid.domain().distance_to_curve(cm, x, y) < 3.0 * spacing {
                return Err(Error::PointNearCurve { x, y, curve: cm });
            }
        }
    }

    let quarter_i = Complex64::new(0.0, 0.25);
    let mut out = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let mut u = Complex64::new(0.0, 0.0);
        for cm in 0..m {
            for j in 0..two_n {
                let s = grid.sample(cm, j);
                let dx = x - s.position.0;
                let dy = y - s.position.1;
                let r = dx.hypot(dy);
                let (h0, h1) = specfun::hankel1_01(k * r)?;
                let idx = cm * two_n + j;
                // d Phi / d nu(y) = (ik/4) H1(kr) (nu . (x - y))/r
                let dot = s.normal.0 * dx + s.normal.1 * dy;
                u += h * s.speed * quarter_i * k * h1 * (dot / r) * phi[idx];
                if let Some(g) = g {
                    u -= h * s.speed * quarter_i * h0 * g[idx];
                }
            }
        }
        out.push(u);
    }
    Ok(out)
}

/// Smallest singular value of `A_N(k)`; convenience probe used by tests and
/// diagnostics.
pub fn smallest_singular_value(k: Complex64, grid: &NystromGrid) -> Result<f64> {
    let a = assemble(k, grid)?;
    let dec = linalg::svd(&a)?;
    Ok(*dec.sigma.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Curve;
    use crate::linalg::Side;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_circle_grid(n: usize) -> NystromGrid {
        let d = Domain::new(vec![Curve::circle((0.0, 0.0), 1.0).unwrap()]).unwrap();
        NystromGrid::new(d, n).unwrap()
    }

    fn two_disk_grid(n: usize) -> NystromGrid {
        let d = Domain::new(vec![
            Curve::circle((0.0, 1.0), 0.35).unwrap(),
            Curve::circle((0.0, -1.0), 0.28).unwrap(),
        ])
        .unwrap();
        NystromGrid::new(d, n).unwrap()
    }

    /// First zero of `d/dz H_n^(1)(z)` below the positive real axis,
    /// computed independently with 30-digit arithmetic from the series and
    /// asymptotic definitions of the Hankel functions.
    fn disk_resonance(n: usize) -> Complex64 {
        match n {
            1 => c(0.501183508691585013, -0.643545024476895828),
            2 => c(1.43443802318609159, -0.834546174421591128),
            3 => c(2.37385744609750826, -0.967562076132687643),
            _ => panic!("no oracle for order {n}"),
        }
    }

    #[test]
    fn km_weights_integrate_cosines_exactly() {
        // R reproduces int_0^{2pi} log(4 sin^2((t - tau)/2)) cos(m tau) dtau
        // = -(2 pi / m) cos(m t) exactly for trig polynomials of degree < N.
        let n = 16;
        let grid = unit_circle_grid(n);
        let h = grid.h();
        for m in [0usize, 1, 3, 7] {
            let target_t = 0.0;
            let mut quad = 0.0;
            for j in 0..2 * n {
                quad += grid.km(0, j) * (m as f64 * (j as f64 * h)).cos();
            }
            let exact = if m == 0 {
                0.0
            } else {
                -2.0 * std::f64::consts::PI / m as f64 * (m as f64 * target_t).cos()
            };
            assert!((quad - exact).abs() < 1e-12, "m = {m}: {quad} vs {exact}");
        }
    }

    #[test]
    fn diagonal_limit_matches_numerical_kernel_limit() {
        // K_hat(t, t + delta) -> -1/(2 pi) on the unit circle; Richardson in
        // delta^2 since the kernel is even and smooth.
        let circle = Curve::circle((0.0, 0.0), 1.0).unwrap();
        let k = c(2.0, -0.3);
        let t = 0.7;
        let k_hat = |delta: f64| {
            let target = circle.sample(t);
            let source = circle.sample(t + delta);
            let (kk, kt) = kernel_pair(k, &target, &source, KernelSide::Direct).unwrap();
            let log_term = (4.0 * (delta / 2.0).sin().powi(2)).ln();
            kk - kt * log_term
        };
        let f1 = k_hat(1e-3);
        let f2 = k_hat(5e-4);
        let extrapolated = (4.0 * f2 - f1) / 3.0;
        let expect = -1.0 / (2.0 * std::f64::consts::PI);
        assert!(
            (extrapolated - c(expect, 0.0)).norm() < 1e-8,
            "{extrapolated} vs {expect}"
        );
        // And the K_tilde factor vanishes on the diagonal.
        let target = circle.sample(t);
        let source = circle.sample(t + 1e-5);
        let (_, kt) = kernel_pair(k, &target, &source, KernelSide::Direct).unwrap();
        assert!(kt.norm() < 1e-8);
    }

    #[test]
    fn kernel_split_reproduces_full_kernel() {
        let grid = two_disk_grid(12);
        let k = c(3.0, -0.2);
        for (i, j) in [(0usize, 5usize), (1, 20), (7, 8)] {
            let ti = grid.sample(0, i);
            let tj = grid.sample(0, j);
            let (kk, kt) = kernel_pair(k, ti, tj, KernelSide::Direct).unwrap();
            let d = (i as f64 - j as f64) * grid.h();
            let log_term = (4.0 * (d / 2.0).sin().powi(2)).ln();
            let k_hat = kk - kt * log_term;
            let recombined = k_hat + kt * log_term;
            assert!((recombined - kk).norm() <= 1e-12 * kk.norm().max(1.0));
        }
    }

    #[test]
    fn disk_resonance_is_singular_point() {
        // Exterior Neumann resonances of the unit disk are the zeros of
        // H_n^(1)'(k); A_N must be singular there.
        let grid = unit_circle_grid(40);
        for n in [1usize, 2, 3] {
            let k = disk_resonance(n);
            let sigma = smallest_singular_value(k, &grid).unwrap();
            assert!(sigma <= 1e-8, "order {n}: sigma_min = {sigma:.3e}");
            // And clearly nonsingular a bit away from the resonance.
            let off = smallest_singular_value(k + c(0.05, 0.0), &grid).unwrap();
            assert!(off > 1e-3, "order {n}: off-resonance sigma = {off:.3e}");
        }
    }

    #[test]
    fn adjoint_singular_at_same_resonance() {
        let grid = unit_circle_grid(40);
        let k = disk_resonance(1);
        let a_adj = assemble_adjoint(k, &grid).unwrap();
        let dec = linalg::svd(&a_adj).unwrap();
        assert!(*dec.sigma.last().unwrap() <= 1e-8);
    }

    #[test]
    fn phase_invariance_of_singular_values() {
        let k = c(2.7, -0.4);
        let base = {
            let d = Domain::new(vec![Curve::circle((0.0, 0.0), 0.8).unwrap()]).unwrap();
            let grid = NystromGrid::new(d, 16).unwrap();
            linalg::svd(&assemble(k, &grid).unwrap()).unwrap().sigma
        };
        let rotated = {
            let d = Domain::new(vec![
                Curve::ellipse((0.0, 0.0), 0.8, 0.8, 1.234).unwrap(),
            ])
            .unwrap();
            let grid = NystromGrid::new(d, 16).unwrap();
            linalg::svd(&assemble(k, &grid).unwrap()).unwrap().sigma
        };
        for (a, b) in base.iter().zip(rotated.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn derivative_agrees_with_finite_differences() {
        let grid = two_disk_grid(10);
        let k = c(4.0, -0.4);
        let da = assemble_derivative(k, &grid, 1e-2, 16).unwrap();
        let hstep = 1e-4;
        let fd = {
            let plus = assemble(k + c(hstep, 0.0), &grid).unwrap();
            let minus = assemble(k - c(hstep, 0.0), &grid).unwrap();
            (plus - minus) / c(2.0 * hstep, 0.0)
        };
        let rel = linalg::frobenius_distance(&da, &fd)
            / da.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(rel < 1e-7, "relative difference {rel:.3e}");
    }

    #[test]
    fn analytic_derivative_matches_cauchy_contour() {
        let grid = two_disk_grid(10);
        let k = c(4.0, -0.4);
        let analytic = assemble_derivative_analytic(k, &grid).unwrap();
        let cauchy = assemble_derivative(k, &grid, 1e-2, 32).unwrap();
        let rel = linalg::frobenius_distance(&analytic, &cauchy)
            / analytic.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(rel < 1e-9, "relative difference {rel:.3e}");
    }

    #[test]
    fn derivative_contour_self_convergence() {
        let grid = unit_circle_grid(8);
        let k = c(2.0, -0.3);
        let d16 = assemble_derivative(k, &grid, 1e-2, 16).unwrap();
        let d32 = assemble_derivative(k, &grid, 1e-2, 32).unwrap();
        let rel = linalg::frobenius_distance(&d16, &d32)
            / d16.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(rel < 1e-10, "q = 16 vs 32 differ by {rel:.3e}");
    }

    #[test]
    fn derivative_of_constant_matrix_vanishes() {
        // The perturbation operator is k-independent; push it through the
        // same Cauchy formula by hand.
        let grid = unit_circle_grid(8);
        let b = assemble_perturbation(&grid);
        let points = 16;
        let rho = 1e-2;
        let size = grid.size();
        let mut acc = Array2::<Complex64>::zeros((size, size));
        for q in 0..points {
            let theta = 2.0 * std::f64::consts::PI * q as f64 / points as f64;
            let phase = Complex64::from_polar(1.0, theta);
            acc.zip_mut_with(&b, |a, &v| *a += v * phase.conj());
        }
        acc.mapv_inplace(|v| v / c(points as f64 * rho, 0.0));
        let norm = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm < 1e-12);
    }

    #[test]
    fn reciprocity_under_bilinear_pairing() {
        let grid = two_disk_grid(10);
        let k = c(3.3, -0.25);
        let a = assemble(k, &grid).unwrap();
        let a_adj = assemble_adjoint(k, &grid).unwrap();
        let size = grid.size();
        let phi = ComplexVector::from_shape_fn(size, |i| {
            c((i as f64 * 0.37).sin(), (i as f64 * 0.61).cos())
        });
        let psi = ComplexVector::from_shape_fn(size, |i| {
            c((i as f64 * 0.83).cos(), -(i as f64 * 0.19).sin())
        });
        // <D phi, psi> = <phi, D* psi> with D = I - A.
        let d_phi = &phi - &a.dot(&phi);
        let dstar_psi = &psi - &a_adj.dot(&psi);
        let lhs = bilinear(&d_phi, &psi, &grid).unwrap();
        let rhs = bilinear(&phi, &dstar_psi, &grid).unwrap();
        assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn adjoint_matrix_is_weight_conjugated_transpose() {
        // A* = W^-1 A^T W holds exactly at the discrete level, where
        // W = diag((pi/N)|gamma'_j|); speeds differ between the two disks,
        // so the weights are genuinely nonconstant.
        let grid = two_disk_grid(12);
        let k = c(3.1, -0.6);
        let a = assemble(k, &grid).unwrap();
        let a_adj = assemble_adjoint(k, &grid).unwrap();
        let w = grid.weights();
        let mut max_diff = 0.0f64;
        for i in 0..grid.size() {
            for j in 0..grid.size() {
                let conjugated = a[[j, i]] * (w[j] / w[i]);
                max_diff = max_diff.max((a_adj[[i, j]] - conjugated).norm());
            }
        }
        assert!(max_diff < 1e-13, "identity violated by {max_diff:.3e}");
    }

    #[test]
    fn adjoint_null_vectors_give_weighted_left_null_vectors() {
        // The n = 1 disk resonance is doubly degenerate (cos/sin modes), so
        // compare null *spaces*: W psi must annihilate A from the left for
        // every adjoint null vector psi.
        let grid = unit_circle_grid(30);
        let k = disk_resonance(1);
        let a = assemble(k, &grid).unwrap();
        let a_adj = assemble_adjoint(k, &grid).unwrap();
        let w = grid.weights();
        let scale = linalg::opnorm_two_estimate(&a);
        for psi in linalg::null_vectors(&a_adj, Side::Right, 2).unwrap() {
            let weighted: ComplexVector =
                psi.iter().zip(w.iter()).map(|(v, &wi)| v * wi).collect();
            let left_residual = a.t().dot(&weighted);
            let rel = left_residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
                / (scale * weighted.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
            assert!(rel < 1e-8, "left residual {rel:.3e}");
        }
    }

    #[test]
    fn perturbation_matrix_properties() {
        let grid = unit_circle_grid(12);
        let b = assemble_perturbation(&grid);
        for i in 0..grid.size() {
            assert_eq!(b[[i, i]], c(0.0, 0.0));
        }
        // Constant speed on a circle makes B symmetric.
        for i in 0..grid.size() {
            for j in 0..grid.size() {
                assert!((b[[i, j]] - b[[j, i]]).norm() < 1e-14);
            }
        }
        // Row sums approximate int_0^{2pi} sin(2|sin(t/2)|) dt
        // = 2 pi StruveH_0(2); the integrand has a derivative corner at the
        // diagonal, so the trapezoid rule is only second-order here.
        let exact = 4.969112703282220;
        let row_sum = |grid: &NystromGrid| {
            let b = assemble_perturbation(grid);
            let phi = ComplexVector::from_elem(grid.size(), c(1.0, 0.0));
            b.dot(&phi)[0]
        };
        let coarse = row_sum(&grid);
        assert!(coarse.im.abs() < 1e-14);
        let err_coarse = (coarse.re - exact).abs();
        let err_fine = (row_sum(&unit_circle_grid(24)).re - exact).abs();
        assert!(err_coarse < 2e-2, "N = 12 error {err_coarse:.3e}");
        // Doubling the grid should roughly quarter the error.
        assert!(err_fine < 0.35 * err_coarse, "{err_fine:.3e} vs {err_coarse:.3e}");
    }

    #[test]
    fn bilinear_pairing_basics() {
        let grid = unit_circle_grid(20);
        let ones = ComplexVector::from_elem(grid.size(), c(1.0, 0.0));
        let circumference = bilinear(&ones, &ones, &grid).unwrap();
        assert!((circumference - c(2.0 * std::f64::consts::PI, 0.0)).norm() < 1e-12);

        let h = grid.h();
        let cos_t = ComplexVector::from_shape_fn(grid.size(), |j| c((j as f64 * h).cos(), 0.0));
        let sin_t = ComplexVector::from_shape_fn(grid.size(), |j| c((j as f64 * h).sin(), 0.0));
        let ortho = bilinear(&cos_t, &sin_t, &grid).unwrap();
        assert!(ortho.norm() < 1e-12);
        let ab = bilinear(&cos_t, &sin_t, &grid).unwrap();
        let ba = bilinear(&sin_t, &cos_t, &grid).unwrap();
        assert_eq!(ab, ba);

        let short = ComplexVector::zeros(3);
        assert!(bilinear(&short, &ones, &grid).is_err());
    }

    #[test]
    fn resonant_field_matches_disk_mode() {
        // At a disk resonance the double-layer field of the null density is
        // proportional to H_n^(1)(k r) (cos/sin)(n theta).
        let grid = unit_circle_grid(40);
        let n_order = 2usize;
        let k = disk_resonance(n_order);
        let a = assemble(k, &grid).unwrap();
        let phi = linalg::null_vectors(&a, Side::Right, 1).unwrap().remove(0);
        let radius = 2.5;
        let m_pts = 24;
        let pts: Vec<(f64, f64)> = (0..m_pts)
            .map(|q| {
                let th = 2.0 * std::f64::consts::PI * q as f64 / m_pts as f64;
                (radius * th.cos(), radius * th.sin())
            })
            .collect();
        let field = evaluate_field(k, &phi, None, &grid, &pts).unwrap();
        // Projection onto the e^{+-i n theta} subspace captures nearly all
        // of the angular variation.
        let mut power_total = 0.0;
        let mut coef_plus = c(0.0, 0.0);
        let mut coef_minus = c(0.0, 0.0);
        for (q, u) in field.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * q as f64 / m_pts as f64;
            power_total += u.norm_sqr();
            coef_plus += u * Complex64::from_polar(1.0, -(n_order as f64) * th);
            coef_minus += u * Complex64::from_polar(1.0, n_order as f64 * th);
        }
        let power_mode = (coef_plus.norm_sqr() + coef_minus.norm_sqr()) / m_pts as f64;
        let correlation = (power_mode / power_total).sqrt();
        assert!(correlation >= 0.999, "angular correlation {correlation}");
    }

    #[test]
    fn field_of_zero_density_is_zero() {
        let grid = unit_circle_grid(8);
        let phi = ComplexVector::zeros(grid.size());
        let u = evaluate_field(c(1.5, 0.0), &phi, None, &grid, &[(3.0, 0.0)]).unwrap();
        assert_eq!(u[0], c(0.0, 0.0));
    }

    #[test]
    fn field_rejects_near_points() {
        let grid = unit_circle_grid(8);
        let phi = ComplexVector::from_elem(grid.size(), c(1.0, 0.0));
        match evaluate_field(c(1.5, 0.0), &phi, None, &grid, &[(1.01, 0.0)]) {
            Err(Error::PointNearCurve { curve: 0, .. }) => {}
            other => panic!("expected PointNearCurve, got {other:?}"),
        }
    }

    #[test]
    fn scattering_solution_satisfies_helmholtz() {
        let grid = unit_circle_grid(24);
        let k = c(1.0, 1.0);
        let h = grid.h();
        let g = ComplexVector::from_shape_fn(grid.size(), |j| c((j as f64 * h).cos(), 0.0));
        let phi = solve_scattering(k, &g, &grid).unwrap();
        // 5-point Laplacian residual of u at an exterior point.
        let step = 1e-3;
        let (x0, y0) = (2.2, 0.9);
        let pts = [
            (x0, y0),
            (x0 + step, y0),
            (x0 - step, y0),
            (x0, y0 + step),
            (x0, y0 - step),
        ];
        let u = evaluate_field(k, &phi, Some(&g), &grid, &pts).unwrap();
        let lap = (u[1] + u[2] + u[3] + u[4] - 4.0 * u[0]) / c(step * step, 0.0);
        let resid = (lap + k * k * u[0]).norm() / u[0].norm().max(1e-12) / (k * k).norm();
        assert!(resid < 1e-4, "Helmholtz residual {resid:.3e}");
    }

    #[test]
    fn scattering_zero_data_gives_zero_density() {
        let grid = unit_circle_grid(8);
        let g = ComplexVector::zeros(grid.size());
        let phi = solve_scattering(c(1.0, 1.0), &g, &grid).unwrap();
        let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm < 1e-14);
    }

    #[test]
    fn scattering_self_convergence() {
        let k = c(1.0, 1.0);
        let coarse = unit_circle_grid(12);
        let fine = unit_circle_grid(24);
        let g_c = ComplexVector::from_shape_fn(coarse.size(), |j| {
            c((j as f64 * coarse.h()).cos(), 0.0)
        });
        let g_f = ComplexVector::from_shape_fn(fine.size(), |j| {
            c((j as f64 * fine.h()).cos(), 0.0)
        });
        let phi_c = solve_scattering(k, &g_c, &coarse).unwrap();
        let phi_f = solve_scattering(k, &g_f, &fine).unwrap();
        // Shared nodes: fine node 2j coincides with coarse node j.
        let mut max_diff = 0.0f64;
        for j in 0..coarse.size() {
            max_diff = max_diff.max((phi_c[j] - phi_f[2 * j]).norm());
        }
        assert!(max_diff <= 1e-8, "node difference {max_diff:.3e}");
    }
}
