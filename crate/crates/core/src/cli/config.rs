//! Run configuration. TOML with a strict schema: unknown keys are
//! rejected and every missing required key is reported at once.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolveConformal,
    SolveHodograph,
    Converge,
    AsymptoticSweep,
    Validate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::SolveConformal => "solve-conformal",
            Mode::SolveHodograph => "solve-hodograph",
            Mode::Converge => "converge",
            Mode::AsymptoticSweep => "asymptotic-sweep",
            Mode::Validate => "validate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must agree with the subcommand when present.
    pub mode: Option<Mode>,
    pub physics: Physics,
    pub domain: Option<DomainConfig>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub converge: Option<ConvergeConfig>,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub nu: f64,
    pub phi: f64,
}

/// Layer geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    /// Wedge family from the minimum thickness and half-angle. Without `l`
    /// the period is chosen for unit mean thickness.
    Wedge { h_min: f64, beta: f64, l: Option<f64> },
    /// Wedge family from raw map parameters.
    WedgeMap { l: f64, epsilon: f64, eta_star: f64 },
    Flat { l: f64, thickness: f64 },
    /// Slowly varying layer (hodograph only).
    Smooth { h_min: f64, a: f64, l: f64 },
    /// Explicit `F(psi)` samples on equispaced nodes of `[-QL/2, QL/2)`
    /// (hodograph only).
    Surface { ql: f64, samples: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Points in the periodic direction (`xi` or `psi`).
    pub n_periodic: usize,
    /// Points in the Chebyshev direction (`eta` or `v`).
    pub n_cheb: usize,
    /// Conformal grid used to derive hodograph inputs from a wedge domain.
    pub reference_n_periodic: Option<usize>,
    pub reference_n_cheb: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub continuation: bool,
    /// Relative tolerance on period and mean thickness for smooth profiles.
    pub calibration_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
            continuation: false,
            calibration_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub fields: bool,
    pub cumulative_samples: usize,
    pub trajectories: usize,
    pub trajectory_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            fields: true,
            cumulative_samples: 101,
            trajectories: 20,
            trajectory_points: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    Conformal,
    Hodograph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Periodic,
    Cheb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub formulation: Formulation,
    /// Direction whose point count varies; the other comes from `[grid]`.
    pub vary: Direction,
    /// Point counts; each also gets a solve at `N + 4` for the difference.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepConfig {
    /// Wedge family at fixed period with free mean thickness.
    Wedge { beta: f64, l: f64, h_min: Vec<f64> },
    /// Slowly varying family at fixed `a`, sampled in `h_min / a`.
    Smooth { a: f64, l: f64, ratios: Vec<f64> },
}

fn required_keys(mode: Mode, v: &toml::Table) -> Vec<String> {
    let mut missing = Vec::new();
    let mut need = |section: &str, keys: &[&str]| match v.get(section).and_then(|s| s.as_table()) {
        Some(t) => {
            for k in keys {
                if !t.contains_key(*k) {
                    missing.push(format!("{section}.{k}"));
                }
            }
        }
        None => {
            if keys.is_empty() {
                missing.push(section.to_string());
            } else {
                missing.extend(keys.iter().map(|k| format!("{section}.{k}")));
            }
        }
    };
    need("physics", &["nu", "phi"]);
    let domain_keys: &[&str] = match v.get("domain").and_then(|d| d.get("kind")).and_then(|k| k.as_str()) {
        Some("wedge") => &["kind", "h_min", "beta"],
        Some("wedge-map") => &["kind", "l", "epsilon", "eta_star"],
        Some("flat") => &["kind", "l", "thickness"],
        Some("smooth") => &["kind", "h_min", "a", "l"],
        Some("surface") => &["kind", "ql", "samples"],
        _ => &["kind"],
    };
    match mode {
        Mode::SolveConformal | Mode::SolveHodograph => {
            need("domain", domain_keys);
            need("grid", &["n_periodic", "n_cheb"]);
        }
        Mode::Converge => {
            need("domain", domain_keys);
            need("grid", &["n_periodic", "n_cheb"]);
            need("converge", &["formulation", "vary", "counts"]);
        }
        Mode::AsymptoticSweep => {
            need("grid", &["n_periodic", "n_cheb"]);
            let family_keys: &[&str] = match v.get("sweep").and_then(|d| d.get("family")).and_then(|k| k.as_str()) {
                Some("wedge") => &["family", "beta", "l", "h_min"],
                Some("smooth") => &["family", "a", "l", "ratios"],
                _ => &["family"],
            };
            need("sweep", family_keys);
        }
        Mode::Validate => {}
    }
    missing
}

impl RunConfig {
    /// Parses and checks a config for `mode`.
    pub fn parse(text: &str, mode: Mode) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let missing = required_keys(mode, &table);
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
        }
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        if let Some(m) = cfg.mode {
            if m != mode {
                return Err(Error::Config(format!("config is for mode {m}, not {mode}")));
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, mode: Mode) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, mode)
    }

    fn check(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {x} must be positive")))
            }
        };
        positive("physics.nu", self.physics.nu)?;
        positive("physics.phi", self.physics.phi)?;
        positive("solver.tol", self.solver.tol)?;
        positive("solver.calibration_tol", self.solver.calibration_tol)?;
        if self.solver.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be at least 1".into()));
        }
        if let Some(g) = &self.grid {
            if g.n_periodic < 2 || g.n_cheb < 3 {
                return Err(Error::Config("grid needs n_periodic >= 2 and n_cheb >= 3".into()));
            }
        }
        if self.output.cumulative_samples < 2 || self.output.trajectory_points < 2 {
            return Err(Error::Config("output sample counts must be at least 2".into()));
        }
        if let Some(c) = &self.converge {
            if c.counts.is_empty() {
                return Err(Error::Config("converge.counts is empty".into()));
            }
        }
        match &self.sweep {
            Some(SweepConfig::Wedge { h_min, .. }) if h_min.len() < 2 => {
                Err(Error::Config("sweep.h_min needs at least two values".into()))
            }
            Some(SweepConfig::Smooth { ratios, .. }) if ratios.is_empty() => {
                Err(Error::Config("sweep.ratios is empty".into()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFORMAL: &str = r#"
[physics]
nu = 0.2
phi = 1.0

[domain]
kind = "wedge-map"
l = 28.2
epsilon = 0.57
eta_star = 0.84

[grid]
n_periodic = 12
n_cheb = 31
"#;

    #[test]
    fn parses_a_minimal_config() {
        let cfg = RunConfig::parse(CONFORMAL, Mode::SolveConformal).unwrap();
        assert_eq!(cfg.grid.unwrap().n_cheb, 31);
        assert_eq!(cfg.solver, SolverConfig::default());
        assert!(matches!(cfg.domain, Some(DomainConfig::WedgeMap { .. })));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{CONFORMAL}\n[solver]\ntolerance = 1e-8\n");
        assert!(matches!(RunConfig::parse(&text, Mode::SolveConformal), Err(Error::Config(_))));
        let text = CONFORMAL.replace("epsilon = 0.57", "epsilon = 0.57\nwidth = 3.0");
        assert!(RunConfig::parse(&text, Mode::SolveConformal).is_err());
    }

    #[test]
    fn missing_keys_are_all_listed() {
        let err = RunConfig::parse("[physics]\nnu = 0.1\n", Mode::SolveConformal).unwrap_err();
        let msg = err.to_string();
        for key in ["physics.phi", "domain.kind", "grid.n_periodic", "grid.n_cheb"] {
            assert!(msg.contains(key), "{msg}");
        }
        let err = RunConfig::parse("[physics]\nnu = 0.1\nphi = 1.0\n[domain]\nkind = \"smooth\"\n", Mode::SolveHodograph)
            .unwrap_err()
            .to_string();
        assert!(err.contains("domain.h_min") && err.contains("domain.a") && err.contains("domain.l"));
    }

    #[test]
    fn mode_must_match() {
        let text = format!("mode = \"converge\"\n{CONFORMAL}");
        assert!(RunConfig::parse(&text, Mode::SolveConformal).is_err());
        let text = format!("mode = \"solve-conformal\"\n{CONFORMAL}");
        assert!(RunConfig::parse(&text, Mode::SolveConformal).is_ok());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let text = CONFORMAL.replace("nu = 0.2", "nu = -0.2");
        assert!(matches!(RunConfig::parse(&text, Mode::SolveConformal), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_config() {
        let text = r#"
[physics]
nu = 0.1
phi = 1.0
[grid]
n_periodic = 32
n_cheb = 33
[sweep]
family = "wedge"
beta = 0.7853981633974483
l = 6.283185307179586
h_min = [0.01, 0.1]
"#;
        let cfg = RunConfig::parse(text, Mode::AsymptoticSweep).unwrap();
        assert!(matches!(cfg.sweep, Some(SweepConfig::Wedge { .. })));
    }
}
