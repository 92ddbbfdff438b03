//! Run configuration: a versioned JSON document merged with command-line
//! flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const RUN_SCHEMA: &str = "arrhenius-rd/run/v1";

/// Radial and time node counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridArg {
    pub nr: usize,
    pub nt: usize,
}

impl std::str::FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected NR,NT, got '{s}'"))?;
        let nr = a.trim().parse().map_err(|e| format!("bad NR '{a}': {e}"))?;
        let nt = b.trim().parse().map_err(|e| format!("bad NT '{b}': {e}"))?;
        Ok(Self { nr, nt })
    }
}

/// θ sampling for tabulated outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// Inputs of `build-diffusivity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildRequest {
    #[serde(rename = "R0")]
    pub r0: f64,
    pub theta_max: f64,
}

impl Default for BuildRequest {
    fn default() -> Self {
        Self { r0: 1.0, theta_max: 20.0 }
    }
}

/// Inputs of `stability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityRequest {
    /// Dimensionless `R0`; when absent the scenario supplies the group.
    #[serde(default, rename = "R0")]
    pub r0: Option<f64>,
    #[serde(default)]
    pub experiment: bool,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_modes")]
    pub modes: Vec<(u32, u32)>,
    #[serde(default = "default_nr")]
    pub nr: usize,
    #[serde(default = "default_nphi")]
    pub nphi: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

fn default_eps() -> f64 {
    1e-3
}
fn default_modes() -> Vec<(u32, u32)> {
    vec![(1, 1), (2, 1)]
}
fn default_nr() -> usize {
    128
}
fn default_nphi() -> usize {
    64
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_end() -> f64 {
    4.0
}

impl Default for StabilityRequest {
    fn default() -> Self {
        Self {
            r0: None,
            experiment: false,
            eps: default_eps(),
            modes: default_modes(),
            nr: default_nr(),
            nphi: default_nphi(),
            dt: default_dt(),
            t_end: default_t_end(),
        }
    }
}

/// The configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default)]
    pub command: Option<String>,
    /// Scenario document; relative paths resolve against the config file.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    /// `N` or `N-variant`.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub grid: Option<GridArg>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub theta: Option<ThetaGrid>,
    #[serde(default)]
    pub build: Option<BuildRequest>,
    /// Also run the method-of-lines oracle in `verify`.
    #[serde(default)]
    pub evolve: bool,
    #[serde(default)]
    pub evolve_tol: Option<f64>,
    /// Multiplies `D`. `solve` then fails the compatibility gate, while
    /// `verify` skips it as a negative control for the residual check.
    #[serde(default)]
    pub perturb_diffusivity: Option<f64>,
    #[serde(default)]
    pub stability: Option<StabilityRequest>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: RUN_SCHEMA.into(),
            command: None,
            scenario: None,
            preset: None,
            grid: None,
            out: None,
            tol: None,
            theta: None,
            build: None,
            evolve: false,
            evolve_tol: None,
            perturb_diffusivity: None,
            stability: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
        if cfg.schema != RUN_SCHEMA {
            return Err(CliError::invalid(format!(
                "config schema '{}' is not '{RUN_SCHEMA}'",
                cfg.schema
            )));
        }
        if let (Some(rel), Some(dir)) = (cfg.scenario.as_ref(), path.parent()) {
            if rel.is_relative() {
                cfg.scenario = Some(dir.join(rel));
            }
        }
        Ok(cfg)
    }

    /// Flags take precedence over the document.
    pub fn merge_flags(&mut self, flags: &Flags) {
        if flags.preset.is_some() {
            self.preset = flags.preset.clone();
            self.scenario = None;
        }
        if flags.grid.is_some() {
            self.grid = flags.grid;
        }
        if flags.out.is_some() {
            self.out = flags.out.clone();
        }
        if flags.tol.is_some() {
            self.tol = flags.tol;
        }
    }

    pub fn validate(&self, command: &str) -> Result<(), CliError> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(CliError::invalid(format!("config is for '{c}', not '{command}'")));
            }
        }
        if self.scenario.is_some() && self.preset.is_some() {
            return Err(CliError::invalid("give either a scenario file or a preset, not both"));
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::invalid(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("tol", self.tol)?;
        positive("evolve_tol", self.evolve_tol)?;
        positive("perturb_diffusivity", self.perturb_diffusivity)?;
        if let Some(g) = self.grid {
            if g.nr < 4 || g.nt < 4 {
                return Err(CliError::invalid("grid needs at least 4 nodes per direction"));
            }
        }
        if let Some(t) = self.theta {
            if !(t.min >= 0.0 && t.max > t.min && t.n >= 2) {
                return Err(CliError::invalid("theta grid needs 0 <= min < max and n >= 2"));
            }
        }
        if let Some(b) = self.build {
            positive("build.R0", Some(b.r0))?;
            positive("build.theta_max", Some(b.theta_max))?;
        }
        if let Some(s) = &self.stability {
            positive("stability.eps", Some(s.eps).filter(|e| *e != 0.0))?;
            positive("stability.dt", Some(s.dt))?;
            positive("stability.t_end", Some(s.t_end))?;
            positive("stability.R0", s.r0)?;
        }
        Ok(())
    }
}

/// Global flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub preset: Option<String>,
    pub grid: Option<GridArg>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
}

/// `N` or `N-variant`.
pub fn parse_preset(s: &str) -> Result<(u8, Option<String>), CliError> {
    let (id, variant) = match s.split_once('-') {
        Some((a, b)) => (a, Some(b.to_string())),
        None => (s, None),
    };
    let id = id
        .parse::<u8>()
        .map_err(|_| CliError::invalid(format!("preset '{s}' is not N or N-variant")))?;
    Ok((id, variant))
}
