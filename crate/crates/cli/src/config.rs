use std::path::PathBuf;

use modsg_core::model::{ModelSpec, XiMode};
use modsg_core::modular::ModularParams;
use modsg_core::spectral::SolverOptions;
use modsg_core::thermo::{Density, DensityModel, Grid, ProfileFn};
use modsg_core::Real;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// The whole run description. Every section except `theta` has defaults,
/// and the resolved config (defaults filled in) is echoed in JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub theta: Real,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub thermo: ThermoConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub alpha: Vec<Real>,
    pub beta: Vec<Real>,
    pub tau: Real,
    #[serde(default)]
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_order")]
    pub order: usize,
    /// Replaces the oracle tolerances of `toy` when set.
    #[serde(default)]
    pub tol: Option<Real>,
}

fn default_order() -> usize {
    4
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            order: default_order(),
            tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedKind {
    Quantile,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_solver_tol")]
    pub tol: Real,
    #[serde(default = "default_seed")]
    pub seed: SeedKind,
    #[serde(default)]
    pub roots: Vec<Real>,
}

fn default_max_iter() -> usize {
    SolverOptions::default().max_iter
}

fn default_solver_tol() -> Real {
    SolverOptions::default().tol
}

fn default_seed() -> SeedKind {
    SeedKind::Quantile
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            tol: default_solver_tol(),
            seed: default_seed(),
            roots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub mean: Real,
    pub width: Real,
}

/// External densities for the thermodynamic commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensityConfig {
    /// Equal atoms at the model's α and β.
    Chain,
    Homogeneous {
        mu: Real,
    },
    /// (weight, position) pairs.
    Atoms {
        a: Vec<(Real, Real)>,
        b: Vec<(Real, Real)>,
    },
    Gaussian {
        a: GaussianConfig,
        b: GaussianConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoConfig {
    #[serde(default = "default_density")]
    pub density: DensityConfig,
    #[serde(default = "default_grid")]
    pub grid: Grid,
    #[serde(default = "default_functions")]
    pub functions: Vec<ProfileFn>,
}

fn default_density() -> DensityConfig {
    DensityConfig::Chain
}

fn default_grid() -> Grid {
    Grid {
        min: -3.0,
        max: 3.0,
        step: 0.1,
    }
}

fn default_functions() -> Vec<ProfileFn> {
    ProfileFn::ALL.to_vec()
}

impl Default for ThermoConfig {
    fn default() -> Self {
        Self {
            density: default_density(),
            grid: default_grid(),
            functions: default_functions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn params(&self) -> Result<ModularParams, CliError> {
        Ok(ModularParams::new(self.theta)?)
    }

    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Validation("this command needs a model section".into()))?;
        if m.n != m.alpha.len() {
            return Err(CliError::Validation(format!(
                "N = {} but alpha has {} entries",
                m.n,
                m.alpha.len()
            )));
        }
        let mode = if m.symmetric {
            XiMode::Parity
        } else {
            XiMode::Free
        };
        Ok(ModelSpec::new(
            m.alpha.clone(),
            m.beta.clone(),
            m.tau,
            mode,
        )?)
    }

    pub fn density_model(&self) -> Result<DensityModel, CliError> {
        let model = match &self.thermo.density {
            DensityConfig::Chain => {
                let m = self.model.as_ref().ok_or_else(|| {
                    CliError::Validation("density kind 'chain' needs a model section".into())
                })?;
                DensityModel::new(
                    Density::atoms_uniform(&m.alpha),
                    Density::atoms_uniform(&m.beta),
                )?
            }
            DensityConfig::Homogeneous { mu } => {
                DensityModel::new(Density::single(*mu), Density::single(-*mu))?
            }
            DensityConfig::Atoms { a, b } => {
                DensityModel::new(Density::atoms(a)?, Density::atoms(b)?)?
            }
            DensityConfig::Gaussian { a, b } => DensityModel::new(
                Density::gaussian(a.mean, a.width)?,
                Density::gaussian(b.mean, b.width)?,
            )?,
        };
        Ok(model)
    }
}

/// Parses `min:max:step`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected min:max:step, got '{s}'"));
    }
    let v = parts
        .iter()
        .map(|p| p.trim().parse::<Real>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Grid::new(v[0], v[1], v[2]).map_err(|e| e.to_string())
}
