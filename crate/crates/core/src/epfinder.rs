//! Exceptional-point workbench.
//!
//! Locates parameter values `(R1, R2)` at which two simple resonances
//! coalesce (Nelder-Mead over the coalescence distance), and provides the
//! diagnostics that distinguish a defective resonance from an accidental
//! near-degeneracy: the singular-value ratio of the two eigenvectors, the
//! Fredholm solvability functional of the Jordan-chain equation, the
//! epsilon-sweep splitting-exponent fit, and eigenvalue trajectory tracking
//! while a perturbation parameter encircles zero.

use ndarray_linalg::Norm;
use num_complex::Complex64;

use crate::bie::{self, DensityVector, NystromGrid};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ComplexVector, Side};
use crate::nep::{self, ContourSpec, SSParams};

/// Nelder-Mead coefficients and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop as soon as the best objective value drops to this level.
    pub objective_tol: f64,
    /// Stop when the simplex diameter collapses below this level.
    pub diameter_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            objective_tol: 1e-7,
            diameter_tol: 1e-12,
            max_evals: 500,
        }
    }
}

/// Result of a Nelder-Mead run: the best point ever evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// False when the run stopped only because the evaluation budget ran out.
    pub converged: bool,
}

/// Configuration of a full exceptional-point search on the disk-grid
/// geometry: two rows of `cols` disks with unit pitch, radii `(R1, R2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EPSearchConfig {
    pub initial: (f64, f64),
    pub cols: usize,
    /// Quadrature parameter: `2N` nodes per disk.
    pub n: usize,
    /// Target contour, fixed across all objective evaluations.
    pub contour: ContourSpec,
    pub nm: NelderMeadConfig,
    pub solver: SSParams,
}

/// Diagnostics of a candidate defective resonance.
#[derive(Debug, Clone, PartialEq)]
pub struct EPReport {
    pub radii: (f64, f64),
    pub k1: Complex64,
    pub k2: Complex64,
    /// `|k1 - k2|`.
    pub distance: f64,
    /// `sigma_2 / sigma_1` of the two-eigenvector matrix.
    pub singular_ratio: f64,
    /// `||A' psi_0|| / ||psi_0||` in the weighted norm.
    pub derivative_ratio: f64,
    /// `|<A' psi_0 / ||psi_0||, psi / ||psi||>|`.
    pub solvability: f64,
    /// Fitted splitting exponent and its standard error.
    pub splitting_slope: f64,
    pub splitting_stderr: f64,
    /// Final-vs-initial eigenvalue assignment after one encircling.
    pub permutation: Vec<usize>,
}

/// Minimizes `f` over `R^d` with the standard Nelder-Mead simplex method.
///
/// The initial simplex is `x0` plus per-coordinate steps of
/// `max(1e-3, 1e-3 |x0_i|)`. Non-finite objective values are treated as
/// `+inf`, so the corresponding vertex is rejected; ties are broken by
/// lexicographic vertex order so the iteration is deterministic. The
/// returned point is the best ever evaluated, which is never worse than any
/// simplex vertex.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], config: &NelderMeadConfig) -> Result<NelderMeadOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    if d == 0 {
        return Err(Error::InvalidArgument(
            "nelder_mead needs at least one coordinate".into(),
        ));
    }
    let mut evals = 0usize;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut eval = |x: &[f64], evals: &mut usize, best: &mut Option<(Vec<f64>, f64)>| -> f64 {
        *evals += 1;
        let raw = f(x);
        let v = if raw.is_finite() { raw } else { f64::INFINITY };
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            *best = Some((x.to_vec(), v));
        }
        v
    };

    let f0 = eval(x0, &mut evals, &mut best);
    if !f0.is_finite() {
        return Err(Error::NonFinite {
            context: "nelder-mead objective at the initial point",
        });
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += (1e-3 * x[i].abs()).max(1e-3);
        let v = eval(&x, &mut evals, &mut best);
        simplex.push((x, v));
    }

    let order = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
    };

    let diameter = |s: &[(Vec<f64>, f64)]| -> f64 {
        let mut diam: f64 = 0.0;
        for a in s {
            for b in s {
                let dist = a
                    .0
                    .iter()
                    .zip(&b.0)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                diam = diam.max(dist);
            }
        }
        diam
    };

    let converged = loop {
        simplex.sort_by(order);
        if simplex[0].1 <= config.objective_tol || diameter(&simplex) <= config.diameter_tol {
            break true;
        }
        if evals >= config.max_evals {
            break false;
        }

        let worst = simplex[d].clone();
        let mut centroid = vec![0.0; d];
        for vertex in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(&vertex.0) {
                *c += x / d as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = along(config.reflection);
        let fr = eval(&xr, &mut evals, &mut best);
        if fr < simplex[0].1 {
            let xe = along(config.expansion);
            let fe = eval(&xe, &mut evals, &mut best);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            // Outside contraction toward the reflected point when it
            // improved on the worst vertex, inside contraction otherwise.
            let xc = if fr < worst.1 {
                along(config.reflection * config.contraction)
            } else {
                along(-config.contraction)
            };
            let fc = eval(&xc, &mut evals, &mut best);
            if fc < fr.min(worst.1) {
                simplex[d] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    for (x, b) in vertex.0.iter_mut().zip(&x0) {
                        *x = b + config.shrink * (*x - b);
                    }
                    vertex.1 = eval(&vertex.0, &mut evals, &mut best);
                }
            }
        }
    };

    let (x, value) = best.unwrap();
    Ok(NelderMeadOutcome {
        x,
        value,
        evals,
        converged,
    })
}

/// Geometry and solver context shared across coalescence-objective
/// evaluations, so the contour and discretization stay fixed while the
/// simplex moves the radii.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescenceContext {
    pub cols: usize,
    pub n: usize,
    pub contour: ContourSpec,
    pub solver: SSParams,
}

/// Minimum pairwise distance of the resonances inside the contour for the
/// two-row disk grid with radii `(r1, r2)`.
///
/// Infeasible radii and solver failures map to `+inf`, and a contour
/// holding fewer than two eigenvalues maps to the finite penalty
/// `10 x contour radius`, so a Nelder-Mead simplex can walk back into the
/// feasible region.
pub fn coalescence_objective(r1: f64, r2: f64, ctx: &CoalescenceContext) -> f64 {
    if !(r1 > 0.0 && r1 < 0.5 && r2 > 0.0 && r2 < 0.5) {
        return f64::INFINITY;
    }
    let spectrum = crate::geometry::grid_domain(ctx.cols, 2, 1.0, 1.0, (r1, r2))
        .and_then(|domain| NystromGrid::new(domain, ctx.n))
        .and_then(|grid| nep::resonances(&grid, &ctx.contour, &ctx.solver));
    let spectrum = match spectrum {
        Ok(s) => s,
        Err(_) => return f64::INFINITY,
    };
    if spectrum.total_multiplicity() < 2 {
        return 10.0 * ctx.contour.radius;
    }
    let ks = spectrum.eigenvalues();
    if ks.len() < 2 {
        // A single entry of multiplicity >= 2: the eigenvalues already
        // merged below the dedup tolerance.
        return 0.0;
    }
    let mut min_dist = f64::INFINITY;
    for i in 0..ks.len() {
        for j in i + 1..ks.len() {
            min_dist = min_dist.min((ks[i] - ks[j]).norm());
        }
    }
    min_dist
}

/// `sigma_2 / sigma_1` of the matrix `[psi1, psi2]` after normalizing each
/// column to unit weighted norm; near zero iff the two densities are
/// numerically proportional, i.e. the geometric multiplicity is one.
pub fn degeneracy_ratio(
    psi1: &DensityVector,
    psi2: &DensityVector,
    grid: &NystromGrid,
) -> Result<f64> {
    let n1 = bie::weighted_norm(psi1, grid)?;
    let n2 = bie::weighted_norm(psi2, grid)?;
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::InvalidArgument(
            "degeneracy_ratio needs two nonzero density vectors".into(),
        ));
    }
    let mut m = ComplexMatrix::zeros((psi1.len(), 2));
    for (i, (a, b)) in psi1.iter().zip(psi2.iter()).enumerate() {
        m[[i, 0]] = a / n1;
        m[[i, 1]] = b / n2;
    }
    let dec = linalg::svd(&m)?;
    Ok(dec.sigma[1] / dec.sigma[0])
}

/// Solvability test of the Jordan-chain equation `(I - D_k0) phi1 = D' phi0`
/// at a candidate defective resonance.
///
/// Returns `(||A' psi0|| / ||psi0||, |<A' psi0 / ||psi0||, psi / ||psi||>|)`
/// in the weighted discrete norm and the nondegenerate bilinear pairing,
/// where `psi` spans the null space of the discrete adjoint `A*`. Since
/// `A = I - D`, the assembled derivative is `-D'`; the modulus of the
/// functional is unaffected. The functional vanishes exactly when the
/// Fredholm alternative makes the chain equation solvable, i.e. when the
/// algebraic multiplicity exceeds one.
pub fn jordan_solvability(
    k0: Complex64,
    psi0: &DensityVector,
    grid: &NystromGrid,
) -> Result<(f64, f64)> {
    let a = bie::assemble(k0, grid)?;
    let a_adj = bie::assemble_adjoint(k0, grid)?;
    let dec = linalg::svd(&a_adj)?;
    let n = dec.sigma.len();
    let last = dec.sigma[n - 1] / dec.sigma[0];
    let second = dec.sigma[n - 2] / dec.sigma[0];
    // The method assumes geometric multiplicity one. A genuinely
    // two-dimensional null space (a symmetry-degenerate resonance) drives
    // the second singular value to machine level, while at a defective
    // point it only drops to the order of the coalescence distance; the
    // dimension guard therefore sits far below the null-vector guard.
    const DEGENERATE_TOL: f64 = 1e-12;
    const NULL_TOL: f64 = 1e-3;
    if second < DEGENERATE_TOL {
        return Err(Error::AdjointNullspace { ratio: second });
    }
    if last > NULL_TOL {
        return Err(Error::AdjointNullspace { ratio: last });
    }
    let psi = dec.v.column(n - 1).to_owned();

    // Cross-check against the weighted left null vector: the discrete
    // adjoint satisfies A* = W^-1 A^T W, so A^T (W psi) must vanish.
    let w = grid.weights();
    let weighted: ComplexVector = psi
        .iter()
        .zip(w.iter())
        .map(|(p, &wi)| p * wi)
        .collect::<Vec<_>>()
        .into();
    let resid = a.t().dot(&weighted).norm_l2()
        / (weighted.norm_l2() * linalg::opnorm_two_estimate(&a));
    if resid > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "adjoint null vector is inconsistent with the weighted left null \
             vector (relative residual {resid:.3e})"
        )));
    }

    let a_prime = bie::assemble_derivative_analytic(k0, grid)?;
    let v = a_prime.dot(psi0);
    let norm0 = bie::weighted_norm(psi0, grid)?;
    let norm_v = bie::weighted_norm(&v, grid)?;
    let norm_psi = bie::weighted_norm(&psi, grid)?;
    if norm0 == 0.0 || norm_psi == 0.0 {
        return Err(Error::InvalidArgument(
            "jordan_solvability needs nonzero eigenvectors".into(),
        ));
    }
    let pairing = bie::bilinear(&v, &psi, grid)? / (norm0 * norm_psi);
    Ok((norm_v / norm0, pairing.norm()))
}

/// Matrix analogue of [`jordan_solvability`] for a family `A(k)` given by a
/// singular matrix `a = A(k0)` and its derivative `a_prime = A'(k0)`, with
/// unit quadrature weights and Euclidean norms.
pub fn jordan_solvability_matrix(
    a: &ComplexMatrix,
    a_prime: &ComplexMatrix,
) -> Result<(f64, f64)> {
    let dec = linalg::svd(a)?;
    let n = dec.sigma.len();
    let second = dec.sigma[n - 2] / dec.sigma[0];
    const NULL_TOL: f64 = 1e-6;
    if second < NULL_TOL {
        return Err(Error::AdjointNullspace { ratio: second });
    }
    let phi0 = dec.v.column(n - 1).to_owned();
    let psi = linalg::null_vectors(a, Side::Left, 1)?.remove(0);
    let v = a_prime.dot(&phi0);
    let pairing: Complex64 = v.iter().zip(psi.iter()).map(|(x, y)| x * y).sum();
    let denom = phi0.norm_l2() * psi.norm_l2();
    Ok((v.norm_l2() / phi0.norm_l2(), pairing.norm() / denom))
}

/// One row of an epsilon-sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub eps: f64,
    /// Splitting `|k1(eps) - k2(eps)|` when two eigenvalues are present,
    /// displacement `|k(eps) - k0|` for a simple resonance.
    pub distance: f64,
    pub eigenvalues: Vec<Complex64>,
}

/// Epsilon-sweep table with the log-log least-squares exponent fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Epsilon values dropped because an eigenvalue escaped the contour or
    /// the solve failed.
    pub dropped: Vec<f64>,
}

/// Runs the splitting sweep for a generic perturbed family
/// `(k, eps) -> A(k) + eps B` and fits `log(distance) = slope log(eps) + c`.
///
/// Points with `eps` below ten times the dedup tolerance are kept in the
/// table but excluded from the fit, since there the splitting is not
/// resolvable above eigensolver noise.
pub fn epsilon_sweep_generic<F, G>(
    a_eval: F,
    a_deriv: G,
    k0: Complex64,
    eps_values: &[f64],
    contour: &ContourSpec,
    params: &SSParams,
) -> Result<SweepResult>
where
    F: Fn(Complex64, Complex64) -> Result<ComplexMatrix>,
    G: Fn(Complex64, Complex64) -> Result<ComplexMatrix>,
{
    let mut eps_sorted: Vec<f64> = eps_values.to_vec();
    eps_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for &eps in &eps_sorted {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sweep epsilon values must be positive and finite, got {eps}"
            )));
        }
        let ec = Complex64::new(eps, 0.0);
        let spectrum = nep::spectrum_generic(
            |k| a_eval(k, ec),
            |k| a_deriv(k, ec),
            contour,
            params,
        );
        let ks = match spectrum {
            Ok(s) => s.eigenvalues(),
            Err(_) => {
                dropped.push(eps);
                continue;
            }
        };
        let distance = match ks.len() {
            1 => (ks[0] - k0).norm(),
            2 => (ks[0] - ks[1]).norm(),
            _ => {
                dropped.push(eps);
                continue;
            }
        };
        points.push(SweepPoint {
            eps,
            distance,
            eigenvalues: ks,
        });
    }

    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.eps >= 10.0 * params.dedup_tol && p.distance > 0.0)
        .map(|p| (p.eps.ln(), p.distance.ln()))
        .collect();
    if fit.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "only {} usable sweep points; widen the epsilon grid",
            fit.len()
        )));
    }
    let n = fit.len() as f64;
    let xbar = fit.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = fit.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = fit.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    let sxy: f64 = fit.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = fit
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let stderr = if fit.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SweepResult {
        points,
        slope,
        intercept,
        stderr,
        dropped,
    })
}

/// Memory ceiling for the sweep/encircle assembly cache; a cached contour
/// of 16 nodes at this size stays around 1 GB.
const ASSEMBLY_CACHE_LIMIT: usize = 2000;

/// Assembler memoized on the exact bit pattern of `k`. The contour nodes
/// repeat for every `eps` of a sweep or `theta` of an encircling loop, so
/// the `k`-dependent part of `A_N(k) + eps B` is assembled once per node.
fn memoized_assembler(grid: &NystromGrid) -> impl Fn(Complex64) -> Result<ComplexMatrix> + '_ {
    let cache: std::cell::RefCell<std::collections::HashMap<(u64, u64), ComplexMatrix>> =
        std::cell::RefCell::new(std::collections::HashMap::new());
    move |k: Complex64| {
        if grid.size() > ASSEMBLY_CACHE_LIMIT {
            return bie::assemble(k, grid);
        }
        let key = (k.re.to_bits(), k.im.to_bits());
        if let Some(a) = cache.borrow().get(&key) {
            return Ok(a.clone());
        }
        let a = bie::assemble(k, grid)?;
        cache.borrow_mut().insert(key, a.clone());
        Ok(a)
    }
}

/// Splitting sweep of the discretized family `A_N(k) + eps B` around a
/// resonance `k0` of the boundary integral system.
pub fn epsilon_sweep(
    grid: &NystromGrid,
    b: &ComplexMatrix,
    k0: Complex64,
    eps_values: &[f64],
    contour: &ContourSpec,
    params: &SSParams,
) -> Result<SweepResult> {
    let assemble = memoized_assembler(grid);
    epsilon_sweep_generic(
        |k, eps| Ok(assemble(k)? + &b.mapv(|v| v * eps)),
        |k, _| bie::assemble_derivative_analytic(k, grid),
        k0,
        eps_values,
        contour,
        params,
    )
}

/// One point of an encircling trajectory: the eigenvalues at angle `theta`,
/// ordered so that index `i` continues the eigenvalue at index `i` of the
/// previous step.
#[derive(Debug, Clone, PartialEq)]
pub struct EncircleStep {
    pub theta: f64,
    pub eigenvalues: Vec<Complex64>,
}

/// Encircling trajectory together with the final permutation: entry `i` is
/// the index of the starting eigenvalue at whose position the continuation
/// of eigenvalue `i` arrives after a full loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EncircleResult {
    pub steps: Vec<EncircleStep>,
    pub permutation: Vec<usize>,
}

impl EncircleResult {
    /// True when the permutation exchanges two eigenvalues.
    pub fn is_swap(&self) -> bool {
        self.permutation.len() == 2 && self.permutation == [1, 0]
    }

    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p)
    }
}

/// Greedy nearest-neighbor assignment of `next` to `prev`; `out[i]` is the
/// index in `next` continuing `prev[i]`. Two candidate matches closer than
/// `1e-12` in competing distance are reported as ambiguous.
fn match_trajectories(prev: &[Complex64], next: &[Complex64], step: usize) -> Result<Vec<usize>> {
    let n = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            pairs.push(((p - q).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| (a.0, a.1, a.2).partial_cmp(&(b.0, b.1, b.2)).unwrap());
    let mut used_prev = vec![false; n];
    let mut used_next = vec![false; n];
    let mut out = vec![usize::MAX; n];
    for (idx, &(d, i, j)) in pairs.iter().enumerate() {
        if used_prev[i] || used_next[j] {
            continue;
        }
        for &(d2, i2, j2) in &pairs[idx + 1..] {
            if d2 - d >= 1e-12 {
                break;
            }
            // A conflicting pair at indistinguishable distance would lead
            // to a different assignment.
            if !used_prev[i2] && !used_next[j2] && ((i2 == i) != (j2 == j)) {
                return Err(Error::AmbiguousMatch { step });
            }
        }
        used_prev[i] = true;
        used_next[j] = true;
        out[i] = j;
    }
    Ok(out)
}

/// Tracks the eigenvalues of `(k, eps) -> A(k) + eps B` while `eps` runs
/// once around the circle of the given radius.
///
/// `reversed` flips the orientation of the loop. The eigenvalue count must
/// stay constant along the path; each step is matched to the previous one
/// by greedy nearest-neighbor assignment.
pub fn encircle_generic<F, G>(
    a_eval: F,
    a_deriv: G,
    radius: f64,
    steps: usize,
    contour: &ContourSpec,
    params: &SSParams,
    reversed: bool,
) -> Result<EncircleResult>
where
    F: Fn(Complex64, Complex64) -> Result<ComplexMatrix>,
    G: Fn(Complex64, Complex64) -> Result<ComplexMatrix>,
{
    if steps < 16 {
        return Err(Error::InvalidArgument(format!(
            "encircling needs at least 16 steps, got {steps}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "encircling radius must be positive and finite, got {radius}"
        )));
    }
    let orientation = if reversed { -1.0 } else { 1.0 };
    let solve = |theta: f64| -> Result<Vec<Complex64>> {
        let eps = Complex64::from_polar(radius, orientation * theta);
        let s = nep::spectrum_generic(
            |k| a_eval(k, eps),
            |k| a_deriv(k, eps),
            contour,
            params,
        )?;
        Ok(s.eigenvalues())
    };

    let start = solve(0.0)?;
    if start.is_empty() {
        return Err(Error::InvalidArgument(
            "no eigenvalue inside the contour at the start of the loop".into(),
        ));
    }
    let mut trajectory = vec![EncircleStep {
        theta: 0.0,
        eigenvalues: start.clone(),
    }];
    let mut current = start.clone();
    for s in 1..=steps {
        let theta = 2.0 * std::f64::consts::PI * s as f64 / steps as f64;
        let next = solve(theta)?;
        if next.len() != current.len() {
            return Err(Error::InvalidArgument(format!(
                "eigenvalue count changed from {} to {} at encircling step {s}; \
                 shrink the loop radius or enlarge the contour",
                current.len(),
                next.len()
            )));
        }
        let assignment = match_trajectories(&current, &next, s)?;
        current = assignment.iter().map(|&j| next[j]).collect();
        trajectory.push(EncircleStep {
            theta,
            eigenvalues: current.clone(),
        });
    }
    // The loop closes at the starting parameter, so the continuations land
    // on the starting eigenvalue set; read off which one each arrived at.
    let permutation = match_trajectories(&current, &start, steps)?;
    Ok(EncircleResult {
        steps: trajectory,
        permutation,
    })
}

/// Encircling experiment for the discretized family `A_N(k) + eps B`.
pub fn encircle(
    grid: &NystromGrid,
    b: &ComplexMatrix,
    radius: f64,
    steps: usize,
    contour: &ContourSpec,
    params: &SSParams,
    reversed: bool,
) -> Result<EncircleResult> {
    let assemble = memoized_assembler(grid);
    encircle_generic(
        |k, eps| Ok(assemble(k)? + &b.mapv(|v| v * eps)),
        |k, _| bie::assemble_derivative_analytic(k, grid),
        radius,
        steps,
        contour,
        params,
        reversed,
    )
}
