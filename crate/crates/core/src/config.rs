//! Detector configuration documents and the built-in presets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::{AfterpulseRecord, DetectorSpec, Undershoot};
use crate::error::{Error, Result};
use crate::mc::PulseSource;
use crate::multiplexer::{build_bin_weights, BinWeights, MultiplexerSpec, Transmission};

pub const PRESET_NAMES: [&str; 2] = ["conventional16", "rapid32"];

/// Everything that determines the click statistics of the instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub multiplexer: MultiplexerSpec,
    pub detector: DetectorSpec,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.multiplexer.validate()?;
        self.detector.validate()
    }

    pub fn bin_weights(&self) -> Result<BinWeights> {
        self.detector.validate()?;
        build_bin_weights(&self.multiplexer)
    }

    pub fn bins(&self) -> usize {
        self.multiplexer.bins()
    }

    /// Guard interval after the last bin; one deadtime unless configured.
    pub fn guard(&self) -> f64 {
        self.multiplexer.guard.unwrap_or(self.detector.deadtime)
    }

    /// Short hex digest of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "conventional16" => Ok(conventional16()),
            "rapid32" => Ok(rapid32()),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (available: {})", PRESET_NAMES.join(", ")),
            )),
        }
    }
}

/// Three kilometre-scale loops (1, 2 and 5 km) in front of two conventionally
/// gated APDs; 16 bins.
pub fn conventional16() -> SystemConfig {
    let gate_width = 20e-9;
    SystemConfig {
        multiplexer: MultiplexerSpec {
            loop_delays: vec![5e-6, 10e-6, 25e-6],
            coupler_ratios: None,
            transmission: Transmission::Uniform { avg_loss_db: 1.44 },
            detector_assignment: Default::default(),
            guard: Some(5e-6),
        },
        detector: DetectorSpec {
            efficiency: 0.10,
            // 8e-6 per ns of gate over a 20 ns gate.
            dark_prob_per_gate: [8e-6 * 20.0, 8e-6 * 20.0],
            gate_width,
            deadtime: 5e-6,
            undershoot: Undershoot::None,
            afterpulse: Some(AfterpulseRecord {
                probability: 0.09,
                note: "20 ns gate immediately following a detection gate".into(),
            }),
        },
    }
}

/// Four metre-scale loops in front of two rapid-gating APDs; 32 bins spaced
/// by one 102.25 MHz coincidence period.
pub fn rapid32() -> SystemConfig {
    SystemConfig {
        multiplexer: MultiplexerSpec {
            loop_delays: vec![9.78e-9, 19.56e-9, 39.12e-9, 78.24e-9],
            coupler_ratios: None,
            transmission: Transmission::Uniform { avg_loss_db: 1.35 },
            detector_assignment: Default::default(),
            guard: None,
        },
        detector: DetectorSpec {
            efficiency: 0.165,
            dark_prob_per_gate: [1e-5, 5e-5],
            gate_width: 200e-12,
            deadtime: 9.78e-9,
            undershoot: Undershoot::GlobalEfficiency { points: vec![(10.0, 0.165), (400.0, 0.145)] },
            afterpulse: Some(AfterpulseRecord {
                probability: 144.0 / 12806.0,
                note: "detections in the 16 empty coincidence gates after the signal gates, mu=100 at 512 kHz".into(),
            }),
        },
    }
}

fn default_shots() -> u64 {
    1_000_000
}

fn default_mu_max() -> usize {
    400
}

fn default_tolerance() -> f64 {
    0.01
}

/// A complete run document as accepted by `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PulseSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_mu_max")]
    pub mu_max: usize,
    #[serde(default = "default_tolerance")]
    pub stability_tolerance: f64,
}

impl RunConfig {
    pub fn from_system(system: SystemConfig) -> Self {
        RunConfig {
            system,
            source: None,
            seed: None,
            shots: default_shots(),
            mu_max: default_mu_max(),
            stability_tolerance: default_tolerance(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if let Some(src) = &self.source {
            src.validate()?;
        }
        if self.shots == 0 {
            return Err(Error::config("shots", "must be at least 1"));
        }
        if self.mu_max == 0 {
            return Err(Error::config("mu_max", "must be at least 1"));
        }
        if !(self.stability_tolerance > 0.0 && self.stability_tolerance < 1.0) {
            return Err(Error::config("stability_tolerance", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Seed required by every Monte Carlo operation.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::config("seed", "a seed is required for Monte Carlo runs"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let cfg = SystemConfig::preset(name).unwrap();
            cfg.validate().unwrap();
        }
        assert_eq!(conventional16().bins(), 16);
        assert_eq!(rapid32().bins(), 32);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = rapid32();
        let mut b = rapid32();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.detector.efficiency = 0.15;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(SystemConfig::preset("nope"), Err(Error::Config { .. })));
    }

    #[test]
    fn run_config_json_roundtrip_with_defaults() {
        let doc = serde_json::json!({
            "multiplexer": { "loop_delays": [1e-9] },
            "detector": {
                "efficiency": 0.2,
                "dark_prob_per_gate": [0.0, 0.0],
                "gate_width": 1e-9,
                "deadtime": 1e-9
            },
            "source": { "coherent": { "mu": 3.0 } },
            "seed": 9
        });
        let rc: RunConfig = serde_json::from_value(doc).unwrap();
        rc.validate().unwrap();
        assert_eq!(rc.mu_max, 400);
        assert_eq!(rc.shots, 1_000_000);
        assert_eq!(rc.require_seed().unwrap(), 9);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&rc).unwrap()).unwrap();
        assert_eq!(back, rc);
    }
}
