//! Experiment configuration: a flat sectioned key = value file (TOML)
//! with defaults for every knob, so an empty config is a valid run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::DiffScheme;
use crate::grid::{Edge, EdgeSegment, GridDomain};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// worker threads for batch parallelism; 0 keeps the library default
    pub workers: usize,
    pub grid: GridConfig,
    pub model: ModelPaths,
    pub probe: ProbeConfig,
    pub linearize: LinearizeConfig,
    pub recover: RecoverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            workers: 0,
            grid: GridConfig::default(),
            model: ModelPaths::default(),
            probe: ProbeConfig::default(),
            linearize: LinearizeConfig::default(),
            recover: RecoverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// inaccessible segments as `"edge lo hi"`, e.g. `"left 0 1"`
    pub gamma: Vec<String>,
    /// cutoff band width next to the inaccessible edges
    pub margin: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 31,
            gamma: vec!["left 0 1".into()],
            margin: 0.25,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    /// JSON model file of the simulated truth; empty = the built-in
    /// quadratic scalar model
    pub true_path: String,
    /// JSON model file of the reference; empty = zero model
    pub ref_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// scalings of the base null direction `(i, 1)`
    pub tau: Vec<f64>,
    /// semiclassical sequence; empty = the default geometric list
    pub h_list: Vec<f64>,
    /// `"one"`, `"x1"` or `"x2"`
    pub amplitude: String,
    /// decay probe region `{x1 > probe_margin}`
    pub probe_margin: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            tau: vec![1.0, 2.0],
            h_list: Vec::new(),
            amplitude: "one".into(),
            probe_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearizeConfig {
    pub m: usize,
    pub eps: f64,
    /// `"forward"` or `"symmetric"`
    pub scheme: String,
}

impl Default for LinearizeConfig {
    fn default() -> Self {
        LinearizeConfig {
            m: 2,
            eps: 1e-3,
            scheme: "symmetric".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverConfig {
    pub basis_ranks: Vec<usize>,
    pub lambda_rel: f64,
    pub test_count: usize,
    pub cgo_count: usize,
    pub tuple_count: usize,
    /// highest linearization order of the cascade
    pub m_max: usize,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            basis_ranks: vec![0, 1, 2, 3],
            lambda_rel: 1e-8,
            test_count: 16,
            cgo_count: 6,
            tuple_count: 80,
            m_max: 2,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.n < 5 {
            return Err(Error::Config("grid.n must be at least 5".into()));
        }
        if !(0.0..0.5).contains(&self.grid.margin) {
            return Err(Error::Config("grid.margin must lie in (0, 0.5)".into()));
        }
        self.gamma_segments()?;
        match self.probe.amplitude.as_str() {
            "one" | "x1" | "x2" => {}
            other => {
                return Err(Error::Config(format!(
                    "probe.amplitude must be one|x1|x2, got '{other}'"
                )))
            }
        }
        if self.probe.tau.iter().any(|&t| t <= 0.0) {
            return Err(Error::Config("probe.tau entries must be positive".into()));
        }
        match self.linearize.scheme.as_str() {
            "forward" | "symmetric" => {}
            other => {
                return Err(Error::Config(format!(
                    "linearize.scheme must be forward|symmetric, got '{other}'"
                )))
            }
        }
        if !(1..=3).contains(&self.linearize.m) {
            return Err(Error::Config("linearize.m must be 1..=3".into()));
        }
        if self.linearize.eps <= 0.0 {
            return Err(Error::Config("linearize.eps must be positive".into()));
        }
        if self.recover.m_max < 2 || self.recover.m_max > 3 {
            return Err(Error::Config("recover.m_max must be 2 or 3".into()));
        }
        if self.recover.basis_ranks.iter().any(|&r| r > 3) {
            return Err(Error::Config("recover.basis_ranks entries must be <= 3".into()));
        }
        for path in [&self.model.true_path, &self.model.ref_path] {
            if !path.is_empty() && !PathBuf::from(path).exists() {
                return Err(Error::Config(format!("model file '{path}' does not exist")));
            }
        }
        Ok(())
    }

    pub fn gamma_segments(&self) -> Result<Vec<EdgeSegment>> {
        let mut out = Vec::new();
        for s in &self.grid.gamma {
            let parts: Vec<&str> = s.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!(
                    "gamma segment '{s}' must be 'edge lo hi'"
                )));
            }
            let edge = match parts[0] {
                "left" => Edge::Left,
                "right" => Edge::Right,
                "bottom" => Edge::Bottom,
                "top" => Edge::Top,
                other => return Err(Error::Config(format!("unknown edge '{other}'"))),
            };
            let lo: f64 = parts[1]
                .parse()
                .map_err(|_| Error::Config(format!("bad segment bound in '{s}'")))?;
            let hi: f64 = parts[2]
                .parse()
                .map_err(|_| Error::Config(format!("bad segment bound in '{s}'")))?;
            out.push(EdgeSegment { edge, lo, hi });
        }
        Ok(out)
    }

    pub fn build_grid(&self) -> Result<GridDomain> {
        GridDomain::with_gamma(self.grid.n, self.gamma_segments()?)
    }

    pub fn scheme(&self) -> DiffScheme {
        match self.linearize.scheme.as_str() {
            "forward" => DiffScheme::Forward,
            _ => DiffScheme::Symmetric,
        }
    }

    pub fn h_list(&self) -> Vec<f64> {
        if self.probe.h_list.is_empty() {
            crate::cgo::default_h_list()
        } else {
            self.probe.h_list.clone()
        }
    }

    pub fn amplitude(&self) -> crate::cgo::Amplitude {
        match self.probe.amplitude.as_str() {
            "x1" => crate::cgo::Amplitude::Coordinate(0),
            "x2" => crate::cgo::Amplitude::Coordinate(1),
            _ => crate::cgo::Amplitude::One,
        }
    }
}

/// FNV-1a hash of the canonical serialized config, for run manifests.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = cfg.to_toml().into_bytes();
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let grid = cfg.build_grid().unwrap();
        assert_eq!(grid.n_interior(), 31);
    }

    #[test]
    fn toml_round_trip_and_hash_stability() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(config_hash(&cfg), config_hash(&back));
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 11\n[grid]\nn = 15\n").unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.grid.n, 15);
        assert_eq!(cfg.recover.tuple_count, 80);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("[grid]\nn = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("[probe]\namplitude = \"x9\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[grid]\ngamma = [\"diagonal 0 1\"]\n").is_err());
        assert!(ExperimentConfig::from_toml("nonsense_key = 5\n").is_err());
    }
}
