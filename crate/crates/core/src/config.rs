//! JSON experiment configuration: topology, channel parameters, and
//! experiment settings in one file with three sections. Unknown keys are
//! rejected so typos fail loudly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_watt, ChannelParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::Policy;
use crate::topology::{Intersection, NodeLocation, StreetGraph};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub topology: TopologyConfig,
    pub channel: ChannelConfig,
    pub experiment: ExperimentConfigSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub intersections: Vec<IntersectionSpec>,
    pub segments: Vec<SegmentSpec>,
    pub clusters: Vec<ClusterSpec>,
    pub source: LocationSpec,
    pub destination: LocationSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionSpec {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub id: u32,
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub id: u32,
    pub segment: u32,
    pub delta: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationSpec {
    pub segment: u32,
    pub offset: f64,
}

/// Channel parameter block; powers in dBm, converted to linear watts at load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub alpha_l: f64,
    pub alpha_n: f64,
    pub delta_db: f64,
    pub eta2: f64,
    pub gamma: f64,
    pub beta_m: f64,
    pub sigma_xi2: f64,
    pub sigma2: f64,
    pub sigma_d2: f64,
    pub ps_dbm: f64,
    pub pc_dbm: f64,
    pub n_t: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfigSection {
    pub trials: usize,
    /// Number of SAA scenarios (N_S).
    pub scenarios: usize,
    pub seed: u64,
    /// Conditioning window in slots; 0 means unbounded.
    #[serde(default = "default_window")]
    pub window: usize,
    pub policies: Vec<Policy>,
    /// Relay selection is executed every this many slots (beamforming runs
    /// every slot regardless).
    #[serde(default = "default_selection_period")]
    pub selection_period: usize,
    /// Worker threads for trial-level parallelism; 0 picks the rayon default.
    #[serde(default)]
    pub parallelism: usize,
    /// Draw a fresh scenario set per trial instead of sharing one set across
    /// the whole experiment.
    #[serde(default)]
    pub fresh_scenarios_per_trial: bool,
    /// Average per-slot SINR in dB across trials instead of averaging the
    /// linear values and converting once.
    #[serde(default)]
    pub average_in_db: bool,
}

fn default_window() -> usize {
    20
}

fn default_selection_period() -> usize {
    1
}

impl FileConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: FileConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.trials == 0 {
            return Err(Error::Validation("experiment.trials must be at least 1".into()));
        }
        if self.experiment.scenarios == 0 {
            return Err(Error::Validation("experiment.scenarios must be at least 1".into()));
        }
        if self.experiment.policies.is_empty() {
            return Err(Error::Validation("experiment.policies must not be empty".into()));
        }
        if self.experiment.selection_period == 0 {
            return Err(Error::Validation("experiment.selection_period must be at least 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.experiment.policies {
            if !seen.insert(*p) {
                return Err(Error::Validation(format!("policy {p} listed twice")));
            }
        }
        self.channel_params::<f64>().validate()?;
        Ok(())
    }

    /// Build the validated street graph.
    pub fn graph<T: Scalar>(&self) -> Result<StreetGraph<T>> {
        StreetGraph::build(
            self.topology
                .intersections
                .iter()
                .map(|i| Intersection { id: i.id, x: T::of(i.x), y: T::of(i.y) })
                .collect(),
            self.topology.segments.iter().map(|s| (s.id, s.a, s.b)).collect(),
        )
    }

    pub fn source<T: Scalar>(&self) -> NodeLocation<T> {
        NodeLocation { segment: self.topology.source.segment, offset: T::of(self.topology.source.offset) }
    }

    pub fn destination<T: Scalar>(&self) -> NodeLocation<T> {
        NodeLocation {
            segment: self.topology.destination.segment,
            offset: T::of(self.topology.destination.offset),
        }
    }

    pub fn clusters(&self) -> Vec<(u32, u32, usize)> {
        self.topology.clusters.iter().map(|c| (c.id, c.segment, c.delta)).collect()
    }

    /// Channel parameters with powers converted from dBm to linear watts.
    pub fn channel_params<T: Scalar>(&self) -> ChannelParams<T> {
        let c = &self.channel;
        ChannelParams {
            alpha_l: T::of(c.alpha_l),
            alpha_n: T::of(c.alpha_n),
            delta_db: T::of(c.delta_db),
            eta2: T::of(c.eta2),
            gamma: T::of(c.gamma),
            beta_m: T::of(c.beta_m),
            sigma_xi2: T::of(c.sigma_xi2),
            sigma2: T::of(c.sigma2),
            sigma_d2: T::of(c.sigma_d2),
            p_s: dbm_to_watt(T::of(c.ps_dbm)),
            p_c: dbm_to_watt(T::of(c.pc_dbm)),
            n_t: c.n_t,
        }
    }

    /// Conditioning window as an option (`None` = unbounded).
    pub fn window(&self) -> Option<usize> {
        if self.experiment.window == 0 {
            None
        } else {
            Some(self.experiment.window)
        }
    }

    /// Stable short hash of the whole config, used to stamp output files.
    pub fn short_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(4).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
          "topology": {
            "intersections": [
              {"id": 1, "x": 0, "y": 0}, {"id": 2, "x": 100, "y": 0},
              {"id": 3, "x": 100, "y": 100}, {"id": 4, "x": 0, "y": 100}
            ],
            "segments": [
              {"id": 10, "a": 1, "b": 2}, {"id": 11, "a": 2, "b": 3},
              {"id": 12, "a": 3, "b": 4}, {"id": 13, "a": 4, "b": 1}
            ],
            "clusters": [{"id": 1, "segment": 11, "delta": 4}],
            "source": {"segment": 10, "offset": 50.0},
            "destination": {"segment": 12, "offset": 50.0}
          },
          "channel": {
            "alpha_l": 2.1, "alpha_n": 2.1, "delta_db": 10.0, "eta2": 40.0,
            "gamma": 15.0, "beta_m": 10.0, "sigma_xi2": 20.0, "sigma2": 1.0,
            "sigma_d2": 1.0, "ps_dbm": 80.0, "pc_dbm": 100.0, "n_t": 10
          },
          "experiment": {
            "trials": 5, "scenarios": 16, "seed": 7,
            "policies": ["ideal", "saa", "random"]
          }
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_converts_powers() {
        let cfg = FileConfig::from_str(&minimal()).unwrap();
        let p = cfg.channel_params::<f64>();
        assert!((p.p_s - 1e5).abs() < 1e-9);
        assert!((p.p_c - 1e7).abs() < 1e-6);
        assert_eq!(cfg.experiment.window, 20);
        assert_eq!(cfg.experiment.selection_period, 1);
        assert!(!cfg.experiment.fresh_scenarios_per_trial);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = minimal().replace("\"trials\": 5", "\"trials\": 5, \"bogus\": 1");
        assert!(FileConfig::from_str(&text).is_err());
    }

    #[test]
    fn rejects_n_t_below_two() {
        let text = minimal().replace("\"n_t\": 10", "\"n_t\": 1");
        assert!(FileConfig::from_str(&text).is_err());
    }

    #[test]
    fn round_trips_through_serde() {
        let cfg = FileConfig::from_str(&minimal()).unwrap();
        let echo = serde_json::to_string(&cfg).unwrap();
        let again = FileConfig::from_str(&echo).unwrap();
        assert_eq!(cfg.short_hash(), again.short_hash());
    }
}
