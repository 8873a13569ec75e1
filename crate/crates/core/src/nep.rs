//! Contour-integral nonlinear eigensolver in the Sakurai-Sugiura style:
//! probe moments of `A(k)^{-1}` on a circular contour, a block Hankel
//! pencil for the eigenvalues inside, and Newton refinement of each root of
//! `k -> A(k)`.

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bie::{self, DensityVector, NystromGrid};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, LuFactors};

/// Circular integration contour in the complex `k` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub center: Complex64,
    pub radius: f64,
    /// Trapezoid quadrature node count (even, at least 8).
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(center: Complex64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "contour radius must be positive and finite, got {radius}"
            )));
        }
        if nodes < 8 || nodes % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "contour needs an even node count of at least 8, got {nodes}"
            )));
        }
        Ok(ContourSpec {
            center,
            radius,
            nodes,
        })
    }

    /// Quadrature node `k_s = center + radius e^{2 pi i s / nodes}`.
    pub fn node(&self, s: usize) -> Complex64 {
        self.center + self.radius * self.unit_node(s)
    }

    fn unit_node(&self, s: usize) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / self.nodes as f64)
    }

    pub fn contains(&self, k: Complex64) -> bool {
        (k - self.center).norm() < self.radius
    }
}

/// Solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SSParams {
    /// Probe rank `L`: number of columns in each random probe matrix; must
    /// be at least the largest expected algebraic multiplicity.
    pub probe_rank: usize,
    /// Moment span `N`: block count of the Hankel matrices, so moments
    /// `mu_0, ..., mu_{2N-1}` are used.
    pub moment_span: usize,
    /// Relative singular-value cutoff for the Hankel rank decision.
    pub svd_cutoff: f64,
    /// Seed for the probe matrices.
    pub seed: u64,
    /// Acceptance threshold on `sigma_min(A(k)) / sigma_max(A(k))`.
    pub residual_tol: f64,
    /// Eigenvalues closer than this are merged (multiplicity preserved).
    pub dedup_tol: f64,
    /// Run Newton refinement on each Hankel eigenvalue.
    pub refine: bool,
    /// Radius of the Cauchy circle used for `A'(k)`.
    pub derivative_radius: f64,
    /// Node count of the Cauchy circle used for `A'(k)`.
    pub derivative_nodes: usize,
    /// Permit contours that cross into `Im k > -0.05`, where the analytic
    /// continuation of the layer potentials degrades.
    pub allow_shallow_contour: bool,
}

impl Default for SSParams {
    fn default() -> Self {
        SSParams {
            probe_rank: 8,
            moment_span: 8,
            svd_cutoff: 1e-10,
            seed: 42,
            residual_tol: 1e-6,
            dedup_tol: 1e-9,
            refine: true,
            derivative_radius: 1e-2,
            derivative_nodes: 16,
            allow_shallow_contour: false,
        }
    }
}

impl SSParams {
    fn validate(&self) -> Result<()> {
        if self.probe_rank == 0 || self.moment_span == 0 {
            return Err(Error::InvalidArgument(
                "probe rank and moment span must be positive".into(),
            ));
        }
        if !(self.svd_cutoff > 0.0 && self.residual_tol > 0.0 && self.dedup_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One eigenvalue of the nonlinear problem.
#[derive(Debug, Clone)]
pub struct ResonanceEntry {
    pub k: Complex64,
    /// Algebraic multiplicity reported by the Hankel pencil.
    pub multiplicity: usize,
    pub eigenvector: DensityVector,
    /// `sigma_min(A(k)) / sigma_max(A(k))`.
    pub residual: f64,
}

/// Eigenvalues found inside one contour.
#[derive(Debug, Clone, Default)]
pub struct SpectrumResult {
    pub entries: Vec<ResonanceEntry>,
}

impl SpectrumResult {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.k).collect()
    }

    /// Total eigenvalue count with multiplicity.
    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }
}

/// Deterministic probe matrix with entries uniform in `[-1, 1] x i[-1, 1]`.
fn probe_matrix(n: usize, l: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    Array2::from_shape_fn((n, l), |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Probe moments
/// `mu_j = (1/(2 pi i)) int_Gamma z^j U^H A(k)^{-1} V rho dz`
/// in the shifted-and-scaled variable `z = (k - center)/radius`, by the
/// trapezoid rule on the circle. With this normalization a simple scalar
/// pole of residue one contributes exactly `U^H V` to `mu_0`.
pub fn moments<F>(
    a_eval: F,
    contour: &ContourSpec,
    params: &SSParams,
) -> Result<Vec<ComplexMatrix>>
where
    F: Fn(Complex64) -> Result<ComplexMatrix>,
{
    params.validate()?;
    let l = params.probe_rank;
    let count = 2 * params.moment_span;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut mu: Option<Vec<ComplexMatrix>> = None;
    // The probe matrices are fixed across the whole contour; their size is
    // only known after the first evaluation.
    let mut probes: Option<(ComplexMatrix, ComplexMatrix)> = None;

    for s in 0..contour.nodes {
        let k = contour.node(s);
        let a = a_eval(k)?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument(
                "contour solver needs square matrices".into(),
            ));
        }
        let (u, v) = probes.get_or_insert_with(|| {
            (probe_matrix(n, l, &mut rng), probe_matrix(n, l, &mut rng))
        });
        let (u, v) = (u.clone(), v.clone());
        let lu = LuFactors::new(&a).map_err(|_| Error::SingularAtNode { node: s, k })?;
        if lu.is_numerically_singular() {
            return Err(Error::SingularAtNode { node: s, k });
        }
        let x = lu.solve_mat(&v)?;
        let uhx = u.mapv(|z| z.conj()).t().dot(&x);
        let z = contour.unit_node(s);
        let base = contour.radius / contour.nodes as f64;
        let mu = mu.get_or_insert_with(|| vec![Array2::zeros((l, l)); count]);
        let mut zpow = Complex64::new(base, 0.0) * z;
        for m in mu.iter_mut().take(count) {
            m.scaled_add(zpow, &uhx);
            zpow *= z;
        }
    }
    Ok(mu.expect("at least 8 contour nodes"))
}

/// Eigenvalues inside the contour from the block Hankel pencil
/// `(H^<, H)`, with multiplicity. Returns an empty list when the Hankel
/// matrix has numerical rank zero.
pub fn hankel_eigs(
    mu: &[ComplexMatrix],
    contour: &ContourSpec,
    params: &SSParams,
) -> Result<Vec<Complex64>> {
    params.validate()?;
    let l = params.probe_rank;
    let n_span = params.moment_span;
    if mu.len() < 2 * n_span {
        return Err(Error::LengthMismatch {
            expected: 2 * n_span,
            got: mu.len(),
        });
    }
    let dim = n_span * l;
    let mut h = Array2::<Complex64>::zeros((dim, dim));
    let mut h_shift = Array2::<Complex64>::zeros((dim, dim));
    for bi in 0..n_span {
        for bj in 0..n_span {
            h.slice_mut(s![bi * l..(bi + 1) * l, bj * l..(bj + 1) * l])
                .assign(&mu[bi + bj]);
            h_shift
                .slice_mut(s![bi * l..(bi + 1) * l, bj * l..(bj + 1) * l])
                .assign(&mu[bi + bj + 1]);
        }
    }
    let dec = linalg::svd(&h)?;
    let sigma0 = dec.sigma[0];
    if sigma0 == 0.0 {
        return Ok(Vec::new());
    }
    let rank = dec
        .sigma
        .iter()
        .take_while(|&&s| s > params.svd_cutoff * sigma0)
        .count();
    if rank == 0 {
        return Ok(Vec::new());
    }
    let u_r = dec.u.slice(s![.., ..rank]).to_owned();
    let v_r = dec.v.slice(s![.., ..rank]).to_owned();
    // T = Sigma_r^{-1} U_r^H H^< V_r, an r x r dense eigenproblem in the
    // scaled variable z.
    let mut t = u_r.mapv(|z| z.conj()).t().dot(&h_shift).dot(&v_r);
    for (i, mut row) in t.rows_mut().into_iter().enumerate() {
        let inv = 1.0 / dec.sigma[i];
        row.mapv_inplace(|z| z * inv);
    }
    let eig = linalg::eig(&t)?;
    let mut out: Vec<Complex64> = eig
        .values
        .iter()
        .filter(|z| z.norm() < 1.0 - 1e-8)
        .map(|z| contour.center + contour.radius * z)
        .collect();
    out.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    Ok(out)
}

/// Outcome of Newton refinement.
#[derive(Debug, Clone, Copy)]
pub struct RefineOutcome {
    pub k: Complex64,
    /// False when the iteration diverged and the input was returned.
    pub converged: bool,
    pub iterations: usize,
}

/// Newton refinement of a root of `k -> A(k)` using the bordered update
/// `k <- k - (w^T A v) / (w^T A' v)` with `v`, `w` the current smallest
/// right/left singular vectors. Returns the best iterate by residual; a
/// diverging iteration (three consecutive growing steps) returns the input
/// flagged as unconverged.
pub fn refine_generic<F, G>(k0: Complex64, a_eval: F, a_deriv: G) -> Result<RefineOutcome>
where
    F: Fn(Complex64) -> Result<ComplexMatrix>,
    G: Fn(Complex64) -> Result<ComplexMatrix>,
{
    let mut k = k0;
    let mut best = k0;
    let mut best_sigma = f64::INFINITY;
    let mut prev_step = f64::INFINITY;
    let mut growing = 0usize;
    for it in 0..20 {
        let a = a_eval(k)?;
        let (sigma, v, w) = linalg::smallest_singular_triplet(&a)?;
        if sigma < best_sigma {
            best_sigma = sigma;
            best = k;
        }
        let da = a_deriv(k)?;
        let num: Complex64 = w.dot(&a.dot(&v));
        let den: Complex64 = w.dot(&da.dot(&v));
        if den.norm() == 0.0 {
            break;
        }
        let delta = num / den;
        let step = delta.norm();
        if step > prev_step {
            growing += 1;
            if growing >= 3 {
                return Ok(RefineOutcome {
                    k: k0,
                    converged: false,
                    iterations: it,
                });
            }
        } else {
            growing = 0;
        }
        prev_step = step;
        k -= delta;
        if step <= 1e-12 {
            let a = a_eval(k)?;
            let (sigma, _, _) = linalg::smallest_singular_triplet(&a)?;
            if sigma < best_sigma {
                best = k;
            }
            return Ok(RefineOutcome {
                k: best,
                converged: true,
                iterations: it + 1,
            });
        }
    }
    Ok(RefineOutcome {
        k: best,
        converged: true,
        iterations: 20,
    })
}

/// Newton refinement of a resonance of the boundary integral system.
pub fn refine(k0: Complex64, grid: &NystromGrid) -> Result<RefineOutcome> {
    refine_generic(
        k0,
        |k| bie::assemble(k, grid),
        |k| bie::assemble_derivative_analytic(k, grid),
    )
}

/// Merge eigenvalues closer than `tol`, preserving the total multiplicity.
/// Each merged value is the mean of its cluster.
pub fn dedup_eigenvalues(values: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    linalg::cluster_eigenvalues(values, tol)
        .into_iter()
        .map(|(center, members)| (center, members.len()))
        .collect()
}

/// Full solver over a generic holomorphic matrix family: moments, Hankel
/// pencil, optional refinement, deduplication, and residual filtering.
pub fn spectrum_generic<F, G>(
    a_eval: F,
    a_deriv: G,
    contour: &ContourSpec,
    params: &SSParams,
) -> Result<SpectrumResult>
where
    F: Fn(Complex64) -> Result<ComplexMatrix>,
    G: Fn(Complex64) -> Result<ComplexMatrix>,
{
    let mu = moments(&a_eval, contour, params)?;
    let raw = hankel_eigs(&mu, contour, params)?;
    let refined: Vec<Complex64> = if params.refine {
        raw.iter()
            .map(|&k| refine_generic(k, &a_eval, &a_deriv).map(|o| o.k))
            .collect::<Result<_>>()?
    } else {
        raw
    };
    let mut entries = Vec::new();
    for (k, multiplicity) in dedup_eigenvalues(&refined, params.dedup_tol) {
        if !contour.contains(k) {
            continue;
        }
        let a = a_eval(k)?;
        // Beyond the direct-SVD size the smallest singular pair comes from
        // inverse iteration and the largest from a power estimate.
        let (residual, eigenvector) = if a.nrows() <= linalg::NULLVEC_SVD_LIMIT {
            let dec = linalg::svd(&a)?;
            (
                dec.sigma.last().unwrap() / dec.sigma[0],
                dec.v.column(dec.v.ncols() - 1).to_owned(),
            )
        } else {
            let (sigma, v, _) = linalg::smallest_singular_triplet(&a)?;
            (sigma / linalg::opnorm_two_estimate(&a), v)
        };
        if residual > params.residual_tol {
            continue;
        }
        entries.push(ResonanceEntry {
            k,
            multiplicity,
            eigenvector,
            residual,
        });
    }
    entries.sort_by(|a, b| (a.k.re, a.k.im).partial_cmp(&(b.k.re, b.k.im)).unwrap());
    Ok(SpectrumResult { entries })
}

/// Scattering resonances of the discretized boundary integral system
/// inside the contour.
pub fn resonances(
    grid: &NystromGrid,
    contour: &ContourSpec,
    params: &SSParams,
) -> Result<SpectrumResult> {
    if !params.allow_shallow_contour && contour.center.im + contour.radius > -0.05 {
        return Err(Error::InvalidArgument(format!(
            "contour reaches Im k = {:.3e} > -0.05 where the analytic \
             continuation degrades; lower the contour or allow it explicitly",
            contour.center.im + contour.radius
        )));
    }
    spectrum_generic(
        |k| bie::assemble(k, grid),
        |k| bie::assemble_derivative_analytic(k, grid),
        contour,
        params,
    )
}
