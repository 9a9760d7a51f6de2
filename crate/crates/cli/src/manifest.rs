//! Run manifest: a TOML document naming fixtures, output location and a
//! `[config]` table that mirrors `VqdConfig`.
//!
//! ```toml
//! fixtures = ["../fixtures/lih_bond_+0.00.json"]
//! out = "results"
//!
//! [config]
//! method = ["sfVQD/SSP", "VQD/SSP"]
//! layers = [3, 6]
//! n_states = 3
//!
//! [config.optimizer]
//! kind = "lbfgs"
//! max_evals = 30000
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use sfvqd_core::optim::OptimizerSpec;
use sfvqd_core::spinops::{HalfInt, SpinSector};
use sfvqd_core::vqd::{Method, Mode, OverlapMode, VqdConfig};

/// A single value or a list of them.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub fixtures: Vec<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; all cores when absent.
    pub jobs: Option<usize>,
    #[serde(default)]
    pub emit: Emit,
    #[serde(default)]
    pub config: RunConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emit {
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub plot_data: bool,
    /// Shell command run in the output directory after the CSVs are written.
    pub plot_hook: Option<String>,
}

fn yes() -> bool {
    true
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            csv: true,
            plot_data: true,
            plot_hook: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_method")]
    pub method: OneOrMany<Method>,
    #[serde(default = "default_layers")]
    pub layers: OneOrMany<usize>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_states")]
    pub n_states: usize,
    /// Total spin to target; the fixture's own `|m_z|` when absent.
    pub target_spin: Option<f64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_shots")]
    pub n_shot: usize,
    #[serde(default)]
    pub c_penalty: f64,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub overlap_mode: OverlapMode,
    #[serde(default = "default_ortho")]
    pub ortho_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_method() -> OneOrMany<Method> {
    OneOrMany::One(Method::SfVqdSsp)
}
fn default_layers() -> OneOrMany<usize> {
    OneOrMany::One(6)
}
fn default_restarts() -> usize {
    10
}
fn default_states() -> usize {
    1
}
fn default_shots() -> usize {
    1000
}
fn default_ortho() -> f64 {
    1e-2
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config takes every default")
    }
}

impl RunConfig {
    pub fn sector(&self, n_alpha: usize, n_beta: usize) -> Result<SpinSector> {
        Ok(match self.target_spin {
            Some(s) => SpinSector::for_target_spin(n_alpha + n_beta, HalfInt::try_from(s)?)?,
            None => SpinSector::new(n_alpha, n_beta)?,
        })
    }

    pub fn vqd_config(&self, method: Method, layers: usize, sector: SpinSector) -> VqdConfig {
        let mut cfg = VqdConfig::new(method, sector);
        cfg.layers = layers;
        cfg.restarts = self.restarts;
        cfg.n_states = self.n_states;
        cfg.mode = self.mode;
        cfg.n_shot = self.n_shot;
        cfg.c_penalty = self.c_penalty;
        cfg.optimizer = self.optimizer.clone();
        cfg.overlap_mode = self.overlap_mode;
        cfg.ortho_tol = self.ortho_tol;
        cfg.seed = self.seed;
        cfg
    }
}

impl Manifest {
    /// Reads a manifest; relative paths are taken against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut m: Manifest = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for f in &mut m.fixtures {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        if m.out.is_relative() {
            m.out = base.join(&m.out);
        }
        Ok(m)
    }

    pub fn empty() -> Self {
        Self {
            fixtures: Vec::new(),
            out: default_out(),
            jobs: None,
            emit: Emit::default(),
            config: RunConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_lists() {
        let m: Manifest = toml::from_str(
            r#"
fixtures = ["a.json"]
[config]
method = ["VQD/SP", "sfVQD/SSP"]
layers = 3
[config.optimizer]
kind = "nelder-mead"
max_evals = 100
"#,
        )
        .unwrap();
        assert_eq!(m.config.method.to_vec(), vec![Method::VqdSp, Method::SfVqdSsp]);
        assert_eq!(m.config.layers.to_vec(), vec![3]);
        assert_eq!(m.config.restarts, 10);
        assert_eq!(m.config.optimizer.max_evals(), 100);
        assert!(m.emit.csv && m.emit.plot_data);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Manifest>("fixtures = []\nlayer = 3\n").is_err());
        assert!(toml::from_str::<Manifest>("fixtures = []\n[config]\nlayer = 3\n").is_err());
    }

    #[test]
    fn target_spin_picks_the_high_projection_sector() {
        let mut c = RunConfig::default();
        c.target_spin = Some(1.0);
        let s = c.sector(2, 2).unwrap();
        assert_eq!((s.n_alpha(), s.n_beta()), (3, 1));
    }
}
