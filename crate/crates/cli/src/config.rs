//! Run configuration: one TOML file, every table strict.

use std::path::{Path, PathBuf};

use djwave::height::{NewtonOptions, WaveSetup};
use djwave::vorticity::VorticitySpec;
use serde::{Deserialize, Serialize};

/// `p0` giving unit depth for irrotational flow at the bifurcation point.
pub fn unit_depth_flux(g: f64) -> f64 {
    -(g * 1f64.tanh()).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    #[serde(default = "default_g")]
    pub g: f64,
    /// Defaults to [`unit_depth_flux`].
    #[serde(default)]
    pub p0: Option<f64>,
    /// Target half crest-to-trough height in units of the laminar depth.
    pub amplitude: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub p_atm: f64,
}

fn default_g() -> f64 {
    9.81
}

fn default_steps() -> usize {
    5
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nq: usize,
    pub np: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nq: 65, np: 33 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_newton_tol")]
    pub newton: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
}

fn default_newton_tol() -> f64 {
    NewtonOptions::default().tol
}

fn default_max_iter() -> usize {
    NewtonOptions::default().max_iter
}

fn default_halvings() -> usize {
    NewtonOptions::default().max_halvings
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton: default_newton_tol(),
            max_iter: default_max_iter(),
            max_halvings: default_halvings(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub plots: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Seed of the Jacobian spot-check directions.
    #[serde(default)]
    pub seed: u64,
    /// Also solve on the grid with halved spacings and report identity convergence.
    #[serde(default)]
    pub refine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub vorticity: Vec<VorticitySpec>,
    /// In units of the laminar depth of each vorticity.
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: Physics,
    #[serde(default = "VorticitySpec::zero")]
    pub vorticity: VorticitySpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| ConfigError(format!("{}: {e}", origin.display())))?;
        cfg.validate()
            .map_err(|m| ConfigError(format!("{}: {m}", origin.display())))?;
        Ok(cfg)
    }

    /// Applies command-line overrides and re-validates.
    pub fn with_overrides(mut self, grid: Option<GridConfig>, tol: Option<f64>) -> Result<Self, ConfigError> {
        if let Some(g) = grid {
            self.grid = g;
        }
        if let Some(t) = tol {
            self.tolerances.newton = t;
        }
        self.validate().map_err(|m| ConfigError(format!("command line: {m}")))?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn p0(&self) -> f64 {
        self.physics.p0.unwrap_or_else(|| unit_depth_flux(self.physics.g))
    }

    pub fn validate(&self) -> Result<(), String> {
        let ph = &self.physics;
        if !(ph.g > 0.0) {
            return Err(format!("[physics] g = {} must be positive", ph.g));
        }
        if !(self.p0() < 0.0) {
            return Err(format!("[physics] p0 = {} must be negative", self.p0()));
        }
        if !(ph.amplitude > 0.0) {
            return Err(format!("[physics] amplitude = {} must be positive", ph.amplitude));
        }
        if ph.steps == 0 {
            return Err("[physics] steps must be at least 1".into());
        }
        self.vorticity
            .validate()
            .map_err(|e| format!("[vorticity] {e}"))?;
        djwave::grid::Grid::new(self.grid.nq, self.grid.np, self.p0())
            .map_err(|e| format!("[grid] {e}"))?;
        if !(self.tolerances.newton > 0.0) {
            return Err("[tolerances] newton must be positive".into());
        }
        if let Some(s) = &self.sweep {
            if s.vorticity.is_empty() || s.amplitudes.is_empty() {
                return Err("[sweep] vorticity and amplitudes must be nonempty".into());
            }
            for v in &s.vorticity {
                v.validate().map_err(|e| format!("[sweep] {e}"))?;
            }
            if let Some(a) = s.amplitudes.iter().find(|a| !(**a > 0.0)) {
                return Err(format!("[sweep] amplitude {a} must be positive"));
            }
            if s.workers == 0 {
                return Err("[sweep] workers must be at least 1".into());
            }
        }
        Ok(())
    }

    pub fn setup(&self, vorticity: VorticitySpec) -> WaveSetup {
        WaveSetup {
            vorticity,
            g: self.physics.g,
            p0: self.p0(),
            p_atm: self.physics.p_atm,
            nq: self.grid.nq,
            np: self.grid.np,
        }
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.tolerances.newton,
            max_iter: self.tolerances.max_iter,
            max_halvings: self.tolerances.max_halvings,
        }
    }
}

/// Parses `NQxNP`, e.g. `65x33`.
pub fn parse_grid(s: &str) -> Result<GridConfig, String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NQxNP, found {s:?}"))?;
    let nq = a.trim().parse().map_err(|_| format!("bad Nq in {s:?}"))?;
    let np = b.trim().parse().map_err(|_| format!("bad Np in {s:?}"))?;
    Ok(GridConfig { nq, np })
}
