//! Closed-form mechanical models: the damped two-mass system, the circular
//! three-mass chain, the Bloch transfer matrix of the infinite mass-spring
//! chain, and its finite open-boundary truncation. These matrices have
//! hand-computable spectra and Jordan structures and serve as the analytic
//! oracle layer for the eigensolvers.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};

/// Parameters of the two-mass system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoMassParams {
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
}

impl TwoMassParams {
    pub fn new(mass: f64, stiffness: f64, damping: f64) -> Result<Self> {
        if !(mass > 0.0 && stiffness > 0.0 && damping > 0.0)
            || !(mass.is_finite() && stiffness.is_finite() && damping.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "two-mass parameters must be positive and finite, got M = {mass}, G = {stiffness}, gamma = {damping}"
            )));
        }
        Ok(TwoMassParams {
            mass,
            stiffness,
            damping,
        })
    }

    /// The critically damped configuration `gamma = 2 sqrt(G M)` at which
    /// both eigenvalues become defective.
    pub fn critical(mass: f64, stiffness: f64) -> Result<Self> {
        Self::new(mass, stiffness, 2.0 * (stiffness * mass).sqrt())
    }

    pub fn omega0(&self) -> f64 {
        (self.stiffness / self.mass).sqrt()
    }
}

/// Parameters of the diatomic mass-spring chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub m_small: f64,
    pub m_large: f64,
    pub g_small: f64,
    pub g_large: f64,
    pub coupling: f64,
    pub damping: f64,
}

impl ChainParams {
    pub fn new(
        m_small: f64,
        m_large: f64,
        g_small: f64,
        g_large: f64,
        coupling: f64,
        damping: f64,
    ) -> Result<Self> {
        let all = [m_small, m_large, g_small, g_large, coupling, damping];
        if !all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "chain parameters must be positive and finite, got {all:?}"
            )));
        }
        Ok(ChainParams {
            m_small,
            m_large,
            g_small,
            g_large,
            coupling,
            damping,
        })
    }

    /// The parameter set for which the Bloch matrix has the defective pair
    /// `+-1 - i`: `m = g = 1`, `M = 2`, `gamma = 8/3`, `mu = 4 sqrt(5)/9`,
    /// `G = 2(81 + sqrt(5))/149`.
    pub fn defective_example() -> Self {
        let sqrt5 = 5.0f64.sqrt();
        ChainParams {
            m_small: 1.0,
            m_large: 2.0,
            g_small: 1.0,
            g_large: 2.0 * (81.0 + sqrt5) / 149.0,
            coupling: 4.0 * sqrt5 / 9.0,
            damping: 8.0 / 3.0,
        }
    }

    /// The wavenumber `beta = arccos((2 sqrt(5) - 4)/9)` at which the
    /// example parameters produce the defective pair.
    pub fn defective_beta() -> f64 {
        ((2.0 * 5.0f64.sqrt() - 4.0) / 9.0).acos()
    }
}

/// One eigenvalue cluster with its multiplicities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JordanEntry {
    pub eigenvalue: Complex64,
    pub geometric: usize,
    pub algebraic: usize,
}

/// Eigenvalue clusters with geometric and algebraic multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanStructure {
    pub entries: Vec<JordanEntry>,
}

impl JordanStructure {
    /// Entries with geometric multiplicity strictly below algebraic.
    pub fn defective_entries(&self) -> Vec<JordanEntry> {
        self.entries
            .iter()
            .copied()
            .filter(|e| e.geometric < e.algebraic)
            .collect()
    }
}

fn r(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// State-space matrix of the damped two-mass system in the variables
/// `(u1, u2, M u1', M u2')`.
pub fn two_mass_t(p: &TwoMassParams) -> ComplexMatrix {
    let (m, g, gamma) = (p.mass, p.stiffness, p.damping);
    let mut t = Array2::zeros((4, 4));
    t[[0, 2]] = r(1.0 / m);
    t[[1, 3]] = r(1.0 / m);
    t[[2, 0]] = r(-g);
    t[[2, 1]] = r(g);
    t[[3, 0]] = r(g);
    t[[3, 1]] = r(-2.0 * g);
    t[[3, 3]] = r(-gamma / m);
    t
}

/// The rank-one perturbation matrix of the two-mass exceptional-point
/// example: `1/M` in the upper-right corner.
pub fn two_mass_b(p: &TwoMassParams) -> ComplexMatrix {
    let mut b = Array2::zeros((4, 4));
    b[[0, 3]] = r(1.0 / p.mass);
    b
}

/// The resultant identity `Res(P_T, P_T') = (G^3/M^9)(gamma^2 - 4GM)^2 (25GM - 4 gamma^2)`.
pub fn two_mass_discriminant(p: &TwoMassParams) -> f64 {
    let (m, g, gamma) = (p.mass, p.stiffness, p.damping);
    g.powi(3) / m.powi(9)
        * (gamma * gamma - 4.0 * g * m).powi(2)
        * (25.0 * g * m - 4.0 * gamma * gamma)
}

/// Closed-form eigenvalues of `T + eps B` at the critical damping
/// `gamma = 2 sqrt(GM)`, in the order
/// `(lambda_1^+, lambda_1^-, lambda_2^+, lambda_2^-)`:
/// `lambda_{1,2}^± = omega_0 (-1 ± sqrt(eps) ∓ i sqrt(3 - eps ± 2 sqrt(eps)))/2`
/// with the minus (plus) sign on the imaginary part for the first (second)
/// pair.
pub fn two_mass_perturbed_exact(p: &TwoMassParams, eps: Complex64) -> Result<[Complex64; 4]> {
    let critical = 2.0 * (p.stiffness * p.mass).sqrt();
    if (p.damping - critical).abs() > 1e-12 * critical {
        return Err(Error::InvalidArgument(format!(
            "closed-form perturbed eigenvalues require gamma = 2 sqrt(GM) = {critical}, got {}",
            p.damping
        )));
    }
    if !eps.is_finite() || eps.norm() >= 3.0 {
        return Err(Error::InvalidArgument(format!(
            "perturbation eps = {eps} is outside the closed-form neighborhood |eps| < 3"
        )));
    }
    let sqrt_eps = eps.sqrt();
    let omega0 = p.omega0();
    let mut out = [Complex64::default(); 4];
    for (slot, (sign, im_sign)) in [(1.0, -1.0), (-1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .into_iter()
        .enumerate()
    {
        let radicand = r(3.0) - eps + 2.0 * sign * sqrt_eps;
        if radicand.im == 0.0 && radicand.re < 0.0 {
            return Err(Error::BranchCut { z: radicand });
        }
        out[slot] =
            omega0 * (r(-1.0) + sign * sqrt_eps + Complex64::i() * im_sign * radicand.sqrt()) / 2.0;
    }
    Ok(out)
}

/// State-space matrix of the circular three-mass chain together with its
/// exact eigenvalues `(0, (-3 gamma -+ i sqrt(12MG - 9 gamma^2))/(2M))`.
pub fn ring_chain(p: &TwoMassParams) -> (ComplexMatrix, [Complex64; 3]) {
    let (m, g, gamma) = (p.mass, p.stiffness, p.damping);
    let mut t = Array2::zeros((6, 6));
    for i in 0..3 {
        t[[i, i + 3]] = r(1.0 / m);
        for j in 0..3 {
            let coupling = if i == j { -2.0 } else { 1.0 };
            t[[i + 3, j]] = r(coupling * g);
            t[[i + 3, j + 3]] = r(coupling * gamma / m);
        }
    }
    let disc = Complex64::new(12.0 * m * g - 9.0 * gamma * gamma, 0.0).sqrt();
    let lambda2 = (r(-3.0 * gamma) - Complex64::i() * disc) / (2.0 * m);
    let lambda3 = (r(-3.0 * gamma) + Complex64::i() * disc) / (2.0 * m);
    (t, [Complex64::default(), lambda2, lambda3])
}

/// Bloch transfer matrix `T(beta)` of the infinite chain, acting on
/// `(u, U, omega u, omega U)`.
pub fn bloch_t(beta: f64, p: &ChainParams) -> Result<ComplexMatrix> {
    if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "Bloch wavenumber must lie in [-pi, pi], got {beta}"
        )));
    }
    let k_small = 2.0 * p.g_small * (1.0 - beta.cos()) + p.coupling;
    let k_large = 2.0 * p.g_large * (1.0 - beta.cos()) + p.coupling;
    let mut t = Array2::zeros((4, 4));
    t[[0, 2]] = r(1.0);
    t[[1, 3]] = r(1.0);
    t[[2, 0]] = r(k_small / p.m_small);
    t[[2, 1]] = r(-p.coupling / p.m_small);
    t[[2, 2]] = Complex64::new(0.0, -p.damping / p.m_small);
    t[[3, 0]] = r(-p.coupling / p.m_large);
    t[[3, 1]] = r(k_large / p.m_large);
    t[[3, 3]] = Complex64::new(0.0, -p.damping / p.m_large);
    Ok(t)
}

/// Finite open chain of `J` unit cells: the `4J x 4J` matrix `T_J`, or its
/// perturbation `T_J^eps(theta)` with `eps e^{i theta} I` added to the
/// upper-right quarter.
pub fn finite_chain(j: usize, p: &ChainParams, eps: f64, theta: f64) -> Result<ComplexMatrix> {
    if j < 2 {
        return Err(Error::InvalidArgument(format!(
            "finite chain needs at least 2 cells, got {j}"
        )));
    }
    let two_j = 2 * j;
    let n = 4 * j;
    // Stiffness block K_J: two tridiagonal halves coupled by -mu on the
    // off-diagonal identity blocks.
    let mut k = Array2::<Complex64>::zeros((two_j, two_j));
    for i in 0..j {
        k[[i, i]] = r(2.0 * p.g_small + p.coupling);
        k[[j + i, j + i]] = r(2.0 * p.g_large + p.coupling);
        if i + 1 < j {
            k[[i, i + 1]] = r(-p.g_small);
            k[[i + 1, i]] = r(-p.g_small);
            k[[j + i, j + i + 1]] = r(-p.g_large);
            k[[j + i + 1, j + i]] = r(-p.g_large);
        }
        k[[i, j + i]] = r(-p.coupling);
        k[[j + i, i]] = r(-p.coupling);
    }
    let mut t = Array2::<Complex64>::zeros((n, n));
    for i in 0..two_j {
        t[[i, two_j + i]] = r(1.0);
    }
    let inv_mass = |i: usize| {
        if i < j {
            1.0 / p.m_small
        } else {
            1.0 / p.m_large
        }
    };
    for i in 0..two_j {
        for col in 0..two_j {
            t[[two_j + i, col]] = k[[i, col]] * inv_mass(i);
        }
        t[[two_j + i, two_j + i]] = Complex64::new(0.0, -p.damping * inv_mass(i));
    }
    if eps != 0.0 {
        let phase = Complex64::from_polar(eps, theta);
        for i in 0..two_j {
            t[[i, two_j + i]] += phase;
        }
    }
    Ok(t)
}

/// Eigenvalue clustering with geometric/algebraic multiplicities from rank
/// tests at relative tolerance `rank_tol`.
pub fn jordan_structure(
    a: &ComplexMatrix,
    cluster_tol: f64,
    rank_tol: f64,
) -> Result<JordanStructure> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(
            "jordan_structure needs a square matrix".into(),
        ));
    }
    if n > 500 {
        return Err(Error::InvalidArgument(format!(
            "jordan_structure is limited to n <= 500, got {n}"
        )));
    }
    let eig = linalg::eig(a)?;
    let clusters = linalg::cluster_eigenvalues(&eig.values, cluster_tol);
    // Clusters must be clearly separated at the stated tolerance.
    for (i, (ci, members_i)) in clusters.iter().enumerate() {
        for (cj, members_j) in clusters.iter().skip(i + 1) {
            let mut gap = f64::INFINITY;
            for &a_idx in members_i {
                for &b_idx in members_j {
                    gap = gap.min((eig.values[a_idx] - eig.values[b_idx]).norm());
                }
            }
            let scale = 1.0 + ci.norm().max(cj.norm());
            if gap < 10.0 * cluster_tol * scale {
                return Err(Error::IllSeparatedClusters {
                    gap,
                    tol: cluster_tol * scale,
                });
            }
        }
    }
    let mut entries = Vec::with_capacity(clusters.len());
    for (center, members) in clusters {
        let algebraic = members.len();
        let shifted = a - &(linalg::eye(n) * center);
        let sigma = linalg::svd(&shifted)?.sigma;
        let geometric = n - rank_with_scale(&sigma, rank_tol, a);
        if geometric == 0 || geometric > algebraic {
            return Err(Error::InvalidArgument(format!(
                "inconsistent multiplicities at {center}: geometric {geometric}, algebraic {algebraic}; adjust the rank tolerance"
            )));
        }
        // Consistency: the generalized null space of order `algebraic`
        // must have dimension exactly `algebraic`.
        let mut power = shifted.clone();
        for _ in 1..algebraic {
            power = power.dot(&shifted);
        }
        let power_sigma = linalg::svd(&power)?.sigma;
        let general_dim = n - rank_with_scale(&power_sigma, rank_tol, a);
        if general_dim != algebraic {
            return Err(Error::InvalidArgument(format!(
                "generalized null space at {center} has dimension {general_dim}, expected {algebraic}; the cluster or rank tolerance is unreliable here"
            )));
        }
        entries.push(JordanEntry {
            eigenvalue: center,
            geometric,
            algebraic,
        });
    }
    entries.sort_by(|a, b| {
        (a.eigenvalue.re, a.eigenvalue.im)
            .partial_cmp(&(b.eigenvalue.re, b.eigenvalue.im))
            .unwrap()
    });
    Ok(JordanStructure { entries })
}

// Rank of a shifted/powered matrix measured against the scale of the
// original matrix: powers of a nilpotent-plus-small matrix shrink, so the
// relative cutoff must not follow them down.
fn rank_with_scale(sigma: &[f64], rank_tol: f64, original: &ComplexMatrix) -> usize {
    let scale = original
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(1.0);
    sigma.iter().filter(|&&s| s >= rank_tol * scale).count()
}

/// Bloch band `union over beta of sigma(T(beta))` sampled at `samples`
/// uniformly spaced wavenumbers.
pub fn bloch_band(p: &ChainParams, samples: usize) -> Result<Vec<Complex64>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "band sampling needs at least 2 wavenumbers".into(),
        ));
    }
    let mut band = Vec::with_capacity(4 * samples);
    for s in 0..samples {
        let beta = -std::f64::consts::PI
            + 2.0 * std::f64::consts::PI * s as f64 / (samples - 1) as f64;
        let t = bloch_t(beta.clamp(-std::f64::consts::PI, std::f64::consts::PI), p)?;
        band.extend(linalg::eig(&t)?.values);
    }
    Ok(band)
}

/// One-sided Hausdorff distance `sup_a inf_b |a - b|`.
pub fn hausdorff_one_sided(from: &[Complex64], to: &[Complex64]) -> f64 {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| (a - b).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
