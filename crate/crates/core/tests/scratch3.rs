use num_complex::Complex64;
use resonex_core::epfinder::{self, CoalescenceContext, NelderMeadConfig};
use resonex_core::nep::{ContourSpec, SSParams};

fn env_f(k: &str, d: f64) -> f64 {
    std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
}
fn env_u(k: &str, d: usize) -> usize {
    std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
}

#[test]
#[ignore]
fn nm_search() {
    let r1 = env_f("R1", 0.35);
    let r2 = env_f("R2", 0.28);
    let cols = env_u("COLS", 8);
    let n = env_u("NQ", 24);
    let center = Complex64::new(env_f("CRE", 4.594), env_f("CIM", -0.422));
    let radius = env_f("RAD", 0.08);
    let nodes = env_u("NODES", 16);
    let refine = env_u("REFINE", 0) == 1;
    let rtol = env_f("RTOL", 1e-2);
    let max_evals = env_u("MAXEVALS", 60);
    let obj_tol = env_f("OBJTOL", 1e-6);

    let ctx = CoalescenceContext {
        cols,
        n,
        contour: ContourSpec::new(center, radius, nodes).unwrap(),
        solver: SSParams {
            refine,
            residual_tol: rtol,
            ..SSParams::default()
        },
    };
    let mut count = 0usize;
    let t0 = std::time::Instant::now();
    let out = epfinder::nelder_mead(
        |x| {
            count += 1;
            let v = epfinder::coalescence_objective(x[0], x[1], &ctx);
            println!(
                "eval {count}: r = ({:.12}, {:.12})  dist = {v:.6e}  [{:?}]",
                x[0],
                x[1],
                t0.elapsed()
            );
            v
        },
        &[r1, r2],
        &NelderMeadConfig {
            objective_tol: obj_tol,
            max_evals,
            ..NelderMeadConfig::default()
        },
    )
    .unwrap();
    println!(
        "best r = ({:.12}, {:.12})  dist = {:.6e}  evals = {}  converged = {}",
        out.x[0], out.x[1], out.value, out.evals, out.converged
    );
}
