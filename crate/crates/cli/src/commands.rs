//! Subcommand implementations. Each one reads its blocks from the run
//! config, drives the library, and writes CSV/JSON artifacts.

use num_complex::Complex64;
use serde_json::json;

use resonex_core::bie::{self, NystromGrid};
use resonex_core::epfinder::{self, CoalescenceContext, NelderMeadConfig};
use resonex_core::linalg::{self, Side};
use resonex_core::mech::{self, ChainParams, TwoMassParams};
use resonex_core::nep::{self, ContourSpec};

use crate::config::{complex, MechExperiment, RunConfig};
use crate::output::{fmt, OutDir};
use crate::CliError;

fn cx_json(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

fn grid_from(config: &RunConfig) -> Result<NystromGrid, CliError> {
    Ok(NystromGrid::new(config.domain()?, config.quadrature_n()?)?)
}

pub fn resonances(config: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let grid = grid_from(config)?;
    let contour = config.contour()?;
    let params = config.solver_params();
    let spectrum = nep::resonances(&grid, &contour, &params)?;
    let rows: Vec<Vec<String>> = spectrum
        .entries
        .iter()
        .map(|e| {
            vec![
                fmt(e.k.re),
                fmt(e.k.im),
                fmt(e.residual),
                e.multiplicity.to_string(),
            ]
        })
        .collect();
    let path = out.write_csv("resonances.csv", &["re", "im", "residual", "multiplicity"], &rows)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

pub fn ep_search(config: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let block = config
        .ep_search
        .as_ref()
        .ok_or_else(|| CliError::config("ep-search needs an `ep_search` block"))?;
    let domain = config
        .domain
        .as_ref()
        .and_then(|d| d.grid.as_ref())
        .ok_or_else(|| CliError::config("ep-search needs a `domain.grid` block"))?;
    if domain.rows != 2 {
        return Err(CliError::config("ep-search needs a two-row disk grid"));
    }
    let ctx = CoalescenceContext {
        cols: domain.cols,
        n: config.quadrature_n()?,
        contour: config.contour()?,
        solver: config.solver_params(),
    };

    let mut nm = NelderMeadConfig::default();
    if let Some(v) = block.objective_tol {
        nm.objective_tol = v;
    }
    if let Some(v) = block.diameter_tol {
        nm.diameter_tol = v;
    }
    if let Some(v) = block.max_evals {
        nm.max_evals = v;
    }

    let mut log: Vec<Vec<String>> = Vec::new();
    let outcome = epfinder::nelder_mead(
        |x| {
            let value = epfinder::coalescence_objective(x[0], x[1], &ctx);
            log.push(vec![
                (log.len() + 1).to_string(),
                fmt(x[0]),
                fmt(x[1]),
                fmt(value),
            ]);
            value
        },
        &block.initial,
        &nm,
    )?;
    let path = out.write_csv(
        "ep_search_iterations.csv",
        &["eval", "r1", "r2", "objective"],
        &log,
    )?;
    println!("wrote {} ({} rows)", path.display(), log.len());

    // Diagnostics at the best radii found. The refined pair (or the merged
    // double eigenvalue) comes from one more contour solve.
    let (r1, r2) = (outcome.x[0], outcome.x[1]);
    let domain = resonex_core::geometry::grid_domain(
        domain.cols,
        2,
        domain.pitch_x,
        domain.pitch_y,
        (r1, r2),
    )?;
    let grid = NystromGrid::new(domain, config.quadrature_n()?)?;
    // The search itself may run unrefined for speed; the reported pair is
    // always Newton-refined.
    let params = config.solver_params();
    let diag_params = nep::SSParams {
        refine: true,
        ..params.clone()
    };
    let spectrum = nep::resonances(&grid, &ctx.contour, &diag_params)?;
    let mut report = json!({
        "radii": [r1, r2],
        "objective": outcome.value,
        "evals": outcome.evals,
        "converged": outcome.converged,
    });
    let pair = closest_pair(&spectrum);
    if let Some((e1, e2)) = pair {
        let (k1, k2) = (e1.k, e2.k);
        let ratio = epfinder::degeneracy_ratio(&e1.eigenvector, &e2.eigenvector, &grid)?;
        let k0 = (k1 + k2) / 2.0;
        let a = bie::assemble(k0, &grid)?;
        let psi0 = linalg::null_vectors(&a, Side::Right, 1)?.remove(0);
        let (derivative_ratio, solvability) = epfinder::jordan_solvability(k0, &psi0, &grid)?;
        report["k1"] = cx_json(k1);
        report["k2"] = cx_json(k2);
        report["distance"] = json!((k1 - k2).norm());
        report["singular_ratio"] = json!(ratio);
        report["derivative_ratio"] = json!(derivative_ratio);
        report["solvability"] = json!(solvability);

        if let Some(sweep) = &config.sweep {
            let b = bie::assemble_perturbation(&grid);
            let result =
                epfinder::epsilon_sweep(&grid, &b, k0, &sweep.eps_values()?, &ctx.contour, &params)?;
            report["splitting_slope"] = json!(result.slope);
            report["splitting_stderr"] = json!(result.stderr);
        }
        if let Some(enc) = &config.encircle {
            let b = bie::assemble_perturbation(&grid);
            let result = epfinder::encircle(
                &grid,
                &b,
                enc.radius,
                enc.steps,
                &ctx.contour,
                &params,
                enc.reversed,
            )?;
            report["permutation"] = json!(result.permutation);
        }
    } else {
        report["note"] =
            json!("fewer than two eigenvalues (with multiplicity) inside the contour");
    }
    let path = out.write_json("ep_report.json", &report)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// The two entries with the smallest pairwise distance, or the merged
/// multiplicity-2 entry twice.
fn closest_pair(
    spectrum: &nep::SpectrumResult,
) -> Option<(&nep::ResonanceEntry, &nep::ResonanceEntry)> {
    if let Some(e) = spectrum.entries.iter().find(|e| e.multiplicity >= 2) {
        return Some((e, e));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..spectrum.entries.len() {
        for j in i + 1..spectrum.entries.len() {
            let d = (spectrum.entries[i].k - spectrum.entries[j].k).norm();
            if best.map_or(true, |(bd, _, _)| d < bd) {
                best = Some((d, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (&spectrum.entries[i], &spectrum.entries[j]))
}

pub fn sweep(config: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let block = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("sweep needs a `sweep` block"))?;
    let grid = grid_from(config)?;
    let contour = config.contour()?;
    let params = config.solver_params();
    let b = bie::assemble_perturbation(&grid);
    let result = epfinder::epsilon_sweep(
        &grid,
        &b,
        complex(block.k0),
        &block.eps_values()?,
        &contour,
        &params,
    )?;
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| vec![fmt(p.eps), fmt(p.distance)])
        .collect();
    let path = out.write_csv("sweep.csv", &["eps", "distance"], &rows)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    let fit = json!({
        "slope": result.slope,
        "intercept": result.intercept,
        "stderr": result.stderr,
        "dropped": result.dropped,
    });
    let path = out.write_json("sweep_fit.json", &fit)?;
    println!("wrote {} (slope {:.4})", path.display(), result.slope);
    Ok(())
}

pub fn encircle(config: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let block = config
        .encircle
        .as_ref()
        .ok_or_else(|| CliError::config("encircle needs an `encircle` block"))?;
    let grid = grid_from(config)?;
    let contour = config.contour()?;
    let params = config.solver_params();
    let b = bie::assemble_perturbation(&grid);
    let result = epfinder::encircle(
        &grid,
        &b,
        block.radius,
        block.steps,
        &contour,
        &params,
        block.reversed,
    )?;
    let count = result.steps[0].eigenvalues.len();
    let names: Vec<String> = std::iter::once("theta".to_string())
        .chain((0..count).flat_map(|i| [format!("k{i}_re"), format!("k{i}_im")]))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = result
        .steps
        .iter()
        .map(|s| {
            std::iter::once(fmt(s.theta))
                .chain(s.eigenvalues.iter().flat_map(|k| [fmt(k.re), fmt(k.im)]))
                .collect()
        })
        .collect();
    let path = out.write_csv("encircle.csv", &header, &rows)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    let summary = json!({
        "permutation": result.permutation,
        "swap": result.is_swap(),
        "identity": result.is_identity(),
    });
    let path = out.write_json("encircle_permutation.json", &summary)?;
    println!(
        "wrote {} (permutation {:?})",
        path.display(),
        result.permutation
    );
    Ok(())
}

pub fn jordan(config: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let block = config
        .jordan
        .as_ref()
        .ok_or_else(|| CliError::config("jordan needs a `jordan` block"))?;
    let grid = grid_from(config)?;
    let k = if block.refine_k {
        nep::refine(complex(block.k0), &grid)?.k
    } else {
        complex(block.k0)
    };
    let a = bie::assemble(k, &grid)?;
    let psi0 = linalg::null_vectors(&a, Side::Right, 1)?.remove(0);
    let (derivative_ratio, solvability) = epfinder::jordan_solvability(k, &psi0, &grid)?;
    let report = json!({
        "k": cx_json(k),
        "refined": block.refine_k,
        "derivative_ratio": derivative_ratio,
        "solvability": solvability,
    });
    let path = out.write_json("jordan.json", &report)?;
    println!(
        "wrote {} (solvability {solvability:.3e})",
        path.display()
    );
    Ok(())
}

pub fn field(config: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let block = config
        .field
        .as_ref()
        .ok_or_else(|| CliError::config("field needs a `field` block"))?;
    let grid = grid_from(config)?;
    let k = if block.refine_k {
        nep::refine(complex(block.k), &grid)?.k
    } else {
        complex(block.k)
    };
    let a = bie::assemble(k, &grid)?;
    let phi = linalg::null_vectors(&a, Side::Right, 1)?.remove(0);

    // The plain trapezoid evaluation degrades within a few grid spacings of
    // a boundary; points inside or near a disk are masked from the map.
    let domain = grid.domain().clone();
    let h = grid.h();
    let mut clearance = Vec::with_capacity(domain.len());
    for c in 0..domain.len() {
        let spacing = (0..grid.nodes_per_curve())
            .map(|j| grid.sample(c, j).speed)
            .fold(0.0f64, f64::max)
            * h;
        clearance.push(3.0 * spacing);
    }
    let keep = |x: f64, y: f64| {
        (0..domain.len()).all(|c| domain.distance_to_curve(c, x, y) >= clearance[c])
    };

    if block.nx < 2 || block.ny < 2 {
        return Err(CliError::config("field needs nx >= 2 and ny >= 2"));
    }
    let mut points = Vec::new();
    for iy in 0..block.ny {
        let y = block.y_range[0]
            + (block.y_range[1] - block.y_range[0]) * iy as f64 / (block.ny - 1) as f64;
        for ix in 0..block.nx {
            let x = block.x_range[0]
                + (block.x_range[1] - block.x_range[0]) * ix as f64 / (block.nx - 1) as f64;
            if keep(x, y) {
                points.push((x, y));
            }
        }
    }
    let mut values = bie::evaluate_field(k, &phi, None, &grid, &points)?;
    if let Some(at) = block.normalize_at {
        if !keep(at[0], at[1]) {
            return Err(CliError::config(
                "the normalization point is inside or too close to an obstacle",
            ));
        }
        let reference = bie::evaluate_field(k, &phi, None, &grid, &[(at[0], at[1])])?[0];
        if reference.norm() == 0.0 {
            return Err(CliError::solver(
                "the resonant state vanishes at the normalization point",
            ));
        }
        for v in &mut values {
            *v /= reference;
        }
    }
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(&values)
        .map(|(&(x, y), v)| vec![fmt(x), fmt(y), fmt(v.re), fmt(v.im), fmt(v.norm())])
        .collect();
    let path = out.write_csv("field.csv", &["x", "y", "re", "im", "abs"], &rows)?;
    println!(
        "wrote {} ({} of {} grid points exterior)",
        path.display(),
        rows.len(),
        block.nx * block.ny
    );
    Ok(())
}

pub fn mech(config: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let block = config
        .mech
        .as_ref()
        .ok_or_else(|| CliError::config("mech needs a `mech` block"))?;
    let params = match block.damping {
        Some(damping) => TwoMassParams::new(block.mass, block.stiffness, damping)?,
        None => TwoMassParams::critical(block.mass, block.stiffness)?,
    };
    match block.experiment {
        MechExperiment::TwoMass => {
            let t = mech::two_mass_t(&params);
            let eig = linalg::eig(&t)?;
            let rows = spectrum_rows(&eig.values);
            let path = out.write_csv("mech_spectrum.csv", &["re", "im"], &rows)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            let summary = json!({
                "omega0": params.omega0(),
                "discriminant": mech::two_mass_discriminant(&params),
            });
            let path = out.write_json("mech_summary.json", &summary)?;
            println!("wrote {}", path.display());
        }
        MechExperiment::Ring => {
            let (t, exact) = mech::ring_chain(&params);
            let eig = linalg::eig(&t)?;
            let rows = spectrum_rows(&eig.values);
            let path = out.write_csv("mech_spectrum.csv", &["re", "im"], &rows)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            let rows = spectrum_rows(&exact);
            let path = out.write_csv("mech_exact.csv", &["re", "im"], &rows)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
        }
        MechExperiment::BlochBand => {
            let chain = ChainParams::defective_example();
            let band = mech::bloch_band(&chain, block.band_samples)?;
            let rows = spectrum_rows(&band);
            let path = out.write_csv("mech_band.csv", &["re", "im"], &rows)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            let finite = mech::finite_chain(block.chain_len, &chain, 0.0, 0.0)?;
            let spectrum = linalg::eig(&finite)?.values;
            let rows = spectrum_rows(&spectrum);
            let path = out.write_csv("mech_chain_spectrum.csv", &["re", "im"], &rows)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            let hausdorff = mech::hausdorff_one_sided(&spectrum, &band);
            let summary = json!({
                "chain_len": block.chain_len,
                "hausdorff": hausdorff,
                "pass": hausdorff <= 0.1,
            });
            let path = out.write_json("mech_band_check.json", &summary)?;
            println!("wrote {} (hausdorff {hausdorff:.3e})", path.display());
        }
        MechExperiment::ChainEncircle => {
            let chain = ChainParams::defective_example();
            let target = Complex64::new(1.0, -1.0);
            let mut current: Option<Vec<Complex64>> = None;
            let mut start: Vec<Complex64> = Vec::new();
            let mut rows = Vec::new();
            for s in 0..=block.theta_steps {
                let theta = 2.0 * std::f64::consts::PI * s as f64 / block.theta_steps as f64;
                let t = mech::finite_chain(block.chain_len, &chain, block.eps, theta)?;
                let mut values = linalg::eig(&t)?.values;
                values.sort_by(|a, b| {
                    (a - target)
                        .norm()
                        .partial_cmp(&(b - target).norm())
                        .unwrap()
                });
                let pair = vec![values[0], values[1]];
                let tracked = match &current {
                    None => {
                        start = pair.clone();
                        pair
                    }
                    Some(prev) => {
                        // Continue each trajectory with the nearest of the
                        // two candidates.
                        if (prev[0] - pair[0]).norm() + (prev[1] - pair[1]).norm()
                            <= (prev[0] - pair[1]).norm() + (prev[1] - pair[0]).norm()
                        {
                            pair
                        } else {
                            vec![pair[1], pair[0]]
                        }
                    }
                };
                rows.push(vec![
                    fmt(theta),
                    fmt(tracked[0].re),
                    fmt(tracked[0].im),
                    fmt(tracked[1].re),
                    fmt(tracked[1].im),
                ]);
                current = Some(tracked);
            }
            let path = out.write_csv(
                "mech_encircle.csv",
                &["theta", "k0_re", "k0_im", "k1_re", "k1_im"],
                &rows,
            )?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            let end = current.unwrap();
            let swapped = (end[0] - start[1]).norm() + (end[1] - start[0]).norm()
                < (end[0] - start[0]).norm() + (end[1] - start[1]).norm();
            let summary = json!({
                "eps": block.eps,
                "swap": swapped,
            });
            let path = out.write_json("mech_encircle_summary.json", &summary)?;
            println!("wrote {} (swap {swapped})", path.display());
        }
    }
    Ok(())
}

fn spectrum_rows(values: &[Complex64]) -> Vec<Vec<String>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    sorted
        .iter()
        .map(|z| vec![fmt(z.re), fmt(z.im)])
        .collect()
}

pub fn selftest() -> Result<(), CliError> {
    let mut failures = 0usize;
    let mut check = |name: &str, pass: bool| {
        println!("{}  {name}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failures += 1;
        }
    };

    // Nelder-Mead on a shifted quadratic.
    let nm = epfinder::nelder_mead(
        |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
        &[0.0, 0.0],
        &NelderMeadConfig {
            objective_tol: 1e-14,
            ..NelderMeadConfig::default()
        },
    )
    .map_err(|e| CliError::solver(e.to_string()))?;
    check(
        "nelder-mead quadratic minimum",
        (nm.x[0] - 1.0).abs() < 1e-6 && (nm.x[1] - 2.0).abs() < 1e-6,
    );

    // Two-mass closed forms: discriminant vanishes at critical damping and
    // the dense spectrum matches the exact double pair.
    let p = TwoMassParams::critical(1.0, 1.0).map_err(|e| CliError::solver(e.to_string()))?;
    check(
        "two-mass critical discriminant",
        mech::two_mass_discriminant(&p).abs() < 1e-12,
    );
    let eig = linalg::eig(&mech::two_mass_t(&p)).map_err(|e| CliError::solver(e.to_string()))?;
    let omega0 = p.omega0();
    let lambda1 = omega0 * Complex64::new(-1.0, -3.0f64.sqrt()) / 2.0;
    let hit = eig
        .values
        .iter()
        .filter(|v| (*v - lambda1).norm() < 1e-6)
        .count();
    check("two-mass defective pair", hit == 2);

    // Single-disk resonance: contour solve against the direct sigma_min
    // probe. The first angular order of the unit disk resonates near
    // 1.43 - 0.83i.
    let domain = resonex_core::geometry::Domain::new(vec![
        resonex_core::geometry::Curve::circle((0.0, 0.0), 1.0)
            .map_err(|e| CliError::solver(e.to_string()))?,
    ])
    .map_err(|e| CliError::solver(e.to_string()))?;
    let grid = NystromGrid::new(domain, 16).map_err(|e| CliError::solver(e.to_string()))?;
    let contour = ContourSpec::new(Complex64::new(1.45, -0.8), 0.3, 16)
        .map_err(|e| CliError::solver(e.to_string()))?;
    let spectrum = nep::resonances(&grid, &contour, &nep::SSParams::default())
        .map_err(|e| CliError::solver(e.to_string()))?;
    let pass = spectrum.entries.iter().any(|e| {
        bie::smallest_singular_value(e.k, &grid).map_or(false, |s| s < 1e-8)
    });
    check("unit-disk resonance inside contour", pass);

    // Encircling the critical two-mass family: the defective pair swaps.
    let t = mech::two_mass_t(&p);
    let b = {
        let mut b = resonex_core::linalg::eye(4);
        b.mapv_inplace(|v| v);
        b
    };
    let family_contour = ContourSpec::new(lambda1, 0.4, 32)
        .map_err(|e| CliError::solver(e.to_string()))?;
    let result = epfinder::encircle_generic(
        |k, eps| {
            let mut a = resonex_core::linalg::eye(4).mapv(|v| v * k);
            a -= &t;
            a -= &b.mapv(|v| v * eps);
            Ok(a)
        },
        |_, _| Ok(resonex_core::linalg::eye(4)),
        1e-3,
        32,
        &family_contour,
        &nep::SSParams {
            probe_rank: 4,
            moment_span: 4,
            ..nep::SSParams::default()
        },
        false,
    )
    .map_err(|e| CliError::solver(e.to_string()))?;
    check("two-mass encircling swap", result.is_swap());

    if failures == 0 {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        Err(CliError::solver(format!(
            "selftest: {failures} check(s) failed"
        )))
    }
}
