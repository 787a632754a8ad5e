//! Declarative run configuration, read from TOML.

use crate::error::{Error, Result};
use crate::geometry::{MetricFamily, MetricSpec};
use crate::study::Resolution;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricConfig {
    Flat,
    /// `φ(x₃) = Σ phi[k] x₃^k`.
    Warped { phi: Vec<f64> },
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig::Flat
    }
}

impl MetricConfig {
    pub fn spec(&self) -> MetricSpec {
        match self {
            MetricConfig::Flat => MetricSpec::flat(),
            MetricConfig::Warped { phi } => MetricSpec::warped(phi.clone()),
        }
    }

    pub fn from_family(family: &MetricFamily) -> Result<MetricConfig> {
        match family {
            MetricFamily::Flat => Ok(MetricConfig::Flat),
            MetricFamily::Warped { phi } => Ok(MetricConfig::Warped { phi: phi.clone() }),
            MetricFamily::Custom(name) => Err(Error::Config(format!("custom metric {name:?} has no declarative form"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub stokes: f64,
    pub green: f64,
    pub green_analytic_factor: f64,
    pub poincare_relative: f64,
    pub projector: f64,
    pub gauge_fix_residual: f64,
    pub gauge_fix_iterations: usize,
    pub vertical: f64,
    pub bct_vanishing: f64,
    pub divergence: f64,
    pub cbc_trace: f64,
    pub interior_factor: f64,
    pub boundary_order: f64,
    pub interior_order: f64,
    pub holonomy_coefficient: f64,
    pub retrace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            stokes: 1e-11,
            green: 1e-9,
            green_analytic_factor: 5.0,
            poincare_relative: 0.02,
            projector: 1e-8,
            gauge_fix_residual: 1e-9,
            gauge_fix_iterations: 10,
            vertical: 1e-6,
            bct_vanishing: 1e-10,
            divergence: 1e-10,
            cbc_trace: 1e-12,
            interior_factor: 10.0,
            boundary_order: 0.9,
            interior_order: 1.8,
            holonomy_coefficient: 0.05,
            retrace: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolonomyConfig {
    /// `[N_lat, N_norm]` of the grid the loops live on.
    pub grid: [usize; 2],
    /// Square sides, descending.
    pub eps: Vec<f64>,
    pub steps: usize,
    pub cg_tolerance: f64,
}

impl Default for HolonomyConfig {
    fn default() -> Self {
        HolonomyConfig { grid: [8, 9], eps: vec![0.2, 0.1, 0.05], steps: 64, cg_tolerance: 1e-11 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebugConfig {
    /// Negate the cached mean curvature (failure-path check for lemma-bct).
    pub flip_tau: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricConfig,
    /// `[N_lat, N_norm]`, ascending.
    pub resolutions: Vec<[usize; 2]>,
    /// Suites to run; empty means all.
    pub suites: Vec<String>,
    pub tolerances: Tolerances,
    pub holonomy: HolonomyConfig,
    /// Number of random fields in the decomposition study.
    pub decompose_fields: usize,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub debug: DebugConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            metric: MetricConfig::Flat,
            resolutions: vec![[8, 33], [16, 65]],
            suites: Vec::new(),
            tolerances: Tolerances::default(),
            holonomy: HolonomyConfig::default(),
            decompose_fields: 5,
            out: None,
            seed: 0,
            debug: DebugConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() {
            return Err(Error::Config("at least one resolution is required".into()));
        }
        for r in &self.resolutions {
            if r[0] < 8 || r[1] < 9 {
                return Err(Error::Config(format!("resolution {r:?}: need N_lat >= 8 and N_norm >= 9")));
            }
        }
        for w in self.resolutions.windows(2) {
            if w[1][0] < w[0][0] || w[1][1] < w[0][1] || w[1] == w[0] {
                return Err(Error::Config(format!("resolutions must be ascending: {:?} then {:?}", w[0], w[1])));
            }
        }
        for s in &self.suites {
            if !crate::suites::SUITES.contains(&s.as_str()) {
                return Err(Error::Config(format!("unknown suite {s:?}")));
            }
        }
        if let MetricConfig::Warped { phi } = &self.metric {
            if phi.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config("warp coefficients must be finite".into()));
            }
        }
        let h = &self.holonomy;
        if h.grid[0] < 8 || h.grid[1] < 9 {
            return Err(Error::Config(format!("holonomy grid {:?}: need N_lat >= 8 and N_norm >= 9", h.grid)));
        }
        if h.eps.is_empty() || h.eps.iter().any(|e| !(*e > 0.0)) || h.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("holonomy eps must be positive and descending".into()));
        }
        if h.steps == 0 || h.steps % 8 != 0 {
            return Err(Error::Config("holonomy steps must be a positive multiple of 8".into()));
        }
        if self.decompose_fields == 0 {
            return Err(Error::Config("decompose_fields must be positive".into()));
        }
        Ok(())
    }

    pub fn resolutions(&self) -> Vec<Resolution> {
        self.resolutions.iter().map(|r| (r[0], r[1])).collect()
    }

    /// Selected suites in canonical order.
    pub fn selected_suites(&self) -> Vec<&'static str> {
        crate::suites::SUITES.iter().copied().filter(|s| self.suites.is_empty() || self.suites.iter().any(|x| x == s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        let c = RunConfig::from_toml(
            "seed = 7\nresolutions = [[8, 17], [16, 33]]\nsuites = [\"lemma-bct\"]\n[metric]\nfamily = \"warped\"\nphi = [0.0, 0.5]\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.selected_suites(), vec!["lemma-bct"]);
        assert!(matches!(c.metric.spec().family, MetricFamily::Warped { .. }));
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "resolutions = [[4, 17]]",
            "resolutions = [[16, 33], [8, 17]]",
            "resolutions = []",
            "suites = [\"nope\"]",
            "bogus = 1",
            "[holonomy]\neps = [0.05, 0.1]",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }
}
