//! JSON run configuration: a versioned schema validated up front, with
//! complex values spelled as `[re, im]` pairs and unknown keys rejected.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use resonex_core::geometry::{self, Curve, Domain};
use resonex_core::nep::{ContourSpec, SSParams};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// `[re, im]` pair in the JSON schema.
pub type Cx = [f64; 2];

pub fn complex(c: Cx) -> Complex64 {
    Complex64::new(c[0], c[1])
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    /// Quadrature parameter: `2N` nodes per curve.
    #[serde(default)]
    pub quadrature_n: Option<usize>,
    #[serde(default)]
    pub contour: Option<ContourConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub ep_search: Option<EpSearchBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub encircle: Option<EncircleBlock>,
    #[serde(default)]
    pub jordan: Option<JordanBlock>,
    #[serde(default)]
    pub field: Option<FieldBlock>,
    #[serde(default)]
    pub mech: Option<MechBlock>,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Rectangular grid of disks (shorthand for the paper geometries).
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Explicit disk list.
    #[serde(default)]
    pub disks: Option<Vec<DiskConfig>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cols: usize,
    pub rows: usize,
    #[serde(default = "one")]
    pub pitch_x: f64,
    #[serde(default = "one")]
    pub pitch_y: f64,
    /// `(top, bottom)` radii; a one-row grid uses only the first.
    pub radii: [f64; 2],
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub center: Cx,
    pub radius: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    16
}

/// Eigensolver knobs; anything omitted falls back to the library default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub probe_rank: Option<usize>,
    pub moment_span: Option<usize>,
    pub svd_cutoff: Option<f64>,
    pub residual_tol: Option<f64>,
    pub dedup_tol: Option<f64>,
    pub refine: Option<bool>,
    pub derivative_radius: Option<f64>,
    pub derivative_nodes: Option<usize>,
    pub allow_shallow_contour: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpSearchBlock {
    pub initial: [f64; 2],
    #[serde(default)]
    pub objective_tol: Option<f64>,
    #[serde(default)]
    pub diameter_tol: Option<f64>,
    #[serde(default)]
    pub max_evals: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Unperturbed resonance used for the single-eigenvalue displacement.
    pub k0: Cx,
    pub eps_min: f64,
    pub eps_max: f64,
    pub count: usize,
}

impl SweepBlock {
    /// Log-spaced epsilon grid from `eps_min` to `eps_max` inclusive.
    pub fn eps_values(&self) -> Result<Vec<f64>, CliError> {
        if !(self.eps_min > 0.0 && self.eps_max > self.eps_min && self.count >= 2) {
            return Err(CliError::config(
                "sweep needs 0 < eps_min < eps_max and at least two points",
            ));
        }
        let (a, b) = (self.eps_min.ln(), self.eps_max.ln());
        Ok((0..self.count)
            .map(|i| (a + (b - a) * i as f64 / (self.count - 1) as f64).exp())
            .collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncircleBlock {
    pub radius: f64,
    pub steps: usize,
    #[serde(default)]
    pub reversed: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanBlock {
    /// Wavenumber at which the chain equation is tested; the defective and
    /// simple candidates are both exercised through this block.
    pub k0: Cx,
    /// Newton-refine `k0` first. Left off for a near-defective point: the
    /// iteration would land on one member of the barely split pair, a
    /// simple resonance, and wash out the solvability contrast.
    #[serde(default)]
    pub refine_k: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub k: Cx,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Point where the resonant state is scaled to one.
    #[serde(default)]
    pub normalize_at: Option<[f64; 2]>,
    /// Refine `k` to the nearest resonance before extracting the state.
    #[serde(default = "yes")]
    pub refine_k: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechBlock {
    pub experiment: MechExperiment,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub stiffness: f64,
    /// Defaults to the critical value `2 sqrt(G M)` when omitted.
    #[serde(default)]
    pub damping: Option<f64>,
    /// Finite-chain length for the Bloch-band experiments.
    #[serde(default = "default_chain_len")]
    pub chain_len: usize,
    #[serde(default = "default_band_samples")]
    pub band_samples: usize,
    /// Perturbation amplitude of the finite-chain encircling experiment.
    #[serde(default = "default_chain_eps")]
    pub eps: f64,
    #[serde(default = "default_theta_steps")]
    pub theta_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechExperiment {
    TwoMass,
    Ring,
    BlochBand,
    ChainEncircle,
}

fn default_chain_len() -> usize {
    80
}
fn default_band_samples() -> usize {
    200
}
fn default_chain_eps() -> f64 {
    8e-3
}
fn default_theta_steps() -> usize {
    64
}

/// A parsed configuration together with the hash of its source bytes,
/// recorded in every output artifact.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
}

pub fn load(path: &Path, seed_override: Option<u64>) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut config: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
    if config.version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "unsupported config version {} (expected {SCHEMA_VERSION})",
            config.version
        )));
    }
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update(config.seed.to_le_bytes());
    let hash = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    Ok(LoadedConfig {
        config,
        hash: hash[..16].to_string(),
    })
}

impl RunConfig {
    pub fn domain(&self) -> Result<Domain, CliError> {
        let spec = self
            .domain
            .as_ref()
            .ok_or_else(|| CliError::config("this subcommand needs a `domain` block"))?;
        let domain = match (&spec.grid, &spec.disks) {
            (Some(grid), None) => geometry::grid_domain(
                grid.cols,
                grid.rows,
                grid.pitch_x,
                grid.pitch_y,
                (grid.radii[0], grid.radii[1]),
            )?,
            (None, Some(disks)) => {
                let curves = disks
                    .iter()
                    .map(|d| Curve::circle((d.center[0], d.center[1]), d.radius))
                    .collect::<Result<Vec<_>, _>>()?;
                Domain::new(curves)?
            }
            _ => {
                return Err(CliError::config(
                    "the `domain` block needs exactly one of `grid` or `disks`",
                ))
            }
        };
        Ok(domain)
    }

    pub fn quadrature_n(&self) -> Result<usize, CliError> {
        self.quadrature_n
            .ok_or_else(|| CliError::config("this subcommand needs `quadrature_n`"))
    }

    pub fn contour(&self) -> Result<ContourSpec, CliError> {
        let c = self
            .contour
            .as_ref()
            .ok_or_else(|| CliError::config("this subcommand needs a `contour` block"))?;
        Ok(ContourSpec::new(complex(c.center), c.radius, c.nodes)?)
    }

    pub fn solver_params(&self) -> SSParams {
        let mut p = SSParams {
            seed: self.seed,
            ..SSParams::default()
        };
        let s = &self.solver;
        if let Some(v) = s.probe_rank {
            p.probe_rank = v;
        }
        if let Some(v) = s.moment_span {
            p.moment_span = v;
        }
        if let Some(v) = s.svd_cutoff {
            p.svd_cutoff = v;
        }
        if let Some(v) = s.residual_tol {
            p.residual_tol = v;
        }
        if let Some(v) = s.dedup_tol {
            p.dedup_tol = v;
        }
        if let Some(v) = s.refine {
            p.refine = v;
        }
        if let Some(v) = s.derivative_radius {
            p.derivative_radius = v;
        }
        if let Some(v) = s.derivative_nodes {
            p.derivative_nodes = v;
        }
        if let Some(v) = s.allow_shallow_contour {
            p.allow_shallow_contour = v;
        }
        p
    }
}
