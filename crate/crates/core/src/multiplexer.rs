//! Fiber-loop coupler tree.
//!
//! A multiplexer with `m` delay loops is a chain of `m + 1` couplers. Coupler
//! `i < m` either routes a photon into loop `i` (the delayed output, taken with
//! probability `ratio[i]`) or past it; the final coupler picks one of the two
//! APDs. Every photon therefore follows one of `2^(m+1)` binary paths, and each
//! path is one bin.
//!
//! Bin index bits: bit 0 is the final coupler (the APD), bit `i + 1` is set when
//! the path runs through loop `i`. Bins thus interleave across the two APDs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack applied when comparing summed delays against the deadtime.
const TIMING_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transmission {
    /// Bin-averaged loss applied identically to every bin.
    Uniform { avg_loss_db: f64 },
    /// Per-bin linear transmissions, indexed by bin.
    Explicit { values: Vec<f64> },
}

impl Default for Transmission {
    fn default() -> Self {
        Transmission::Uniform { avg_loss_db: 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorAssignment {
    /// The final coupler output selects the APD.
    #[default]
    FinalCoupler,
    /// Explicit APD index (0 or 1) per bin.
    Explicit { apd: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplexerSpec {
    /// Temporal delay added by each loop, in seconds.
    pub loop_delays: Vec<f64>,
    /// `m + 1` splitting ratios (fraction sent to the delayed / second output).
    /// `None` means ideal 50/50 couplers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupler_ratios: Option<Vec<f64>>,
    #[serde(default)]
    pub transmission: Transmission,
    #[serde(default)]
    pub detector_assignment: DetectorAssignment,
    /// Margin appended after the last bin when computing the train length.
    /// `None` uses one detector deadtime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<f64>,
}

impl MultiplexerSpec {
    /// Ideal lossless multiplexer with 50/50 couplers.
    pub fn ideal(loop_delays: Vec<f64>) -> Self {
        MultiplexerSpec {
            loop_delays,
            coupler_ratios: None,
            transmission: Transmission::default(),
            detector_assignment: DetectorAssignment::default(),
            guard: None,
        }
    }

    pub fn loops(&self) -> usize {
        self.loop_delays.len()
    }

    pub fn bins(&self) -> usize {
        1 << (self.loops() + 1)
    }

    pub fn ratios(&self) -> Vec<f64> {
        match &self.coupler_ratios {
            Some(r) => r.clone(),
            None => vec![0.5; self.loops() + 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.loops();
        if m > 20 {
            return Err(Error::config("loop_delays", format!("{m} loops is more than 20")));
        }
        for (i, d) in self.loop_delays.iter().enumerate() {
            if !(d.is_finite() && *d > 0.0) {
                return Err(Error::config(format!("loop_delays[{i}]"), format!("{d} is not a positive delay")));
            }
        }
        if let Some(r) = &self.coupler_ratios {
            if r.len() != m + 1 {
                return Err(Error::config(
                    "coupler_ratios",
                    format!("expected {} ratios for {m} loops, got {}", m + 1, r.len()),
                ));
            }
            for (i, x) in r.iter().enumerate() {
                if !(*x > 0.0 && *x < 1.0) {
                    return Err(Error::config(format!("coupler_ratios[{i}]"), format!("{x} not in (0, 1)")));
                }
            }
        }
        let b = self.bins();
        match &self.transmission {
            Transmission::Uniform { avg_loss_db } => {
                if !(avg_loss_db.is_finite() && *avg_loss_db >= 0.0) {
                    return Err(Error::config(
                        "transmission.avg_loss_db",
                        format!("{avg_loss_db} is not a loss in dB"),
                    ));
                }
            }
            Transmission::Explicit { values } => {
                if values.len() != b {
                    return Err(Error::config(
                        "transmission.values",
                        format!("expected {b} per-bin transmissions, got {}", values.len()),
                    ));
                }
                for (i, t) in values.iter().enumerate() {
                    if !(*t > 0.0 && *t <= 1.0) {
                        return Err(Error::config(format!("transmission.values[{i}]"), format!("{t} not in (0, 1]")));
                    }
                }
            }
        }
        if let DetectorAssignment::Explicit { apd } = &self.detector_assignment {
            if apd.len() != b {
                return Err(Error::config(
                    "detector_assignment.apd",
                    format!("expected {b} entries, got {}", apd.len()),
                ));
            }
            if let Some(i) = apd.iter().position(|&a| a > 1) {
                return Err(Error::config(format!("detector_assignment.apd[{i}]"), "APD index must be 0 or 1"));
            }
            let zeros = apd.iter().filter(|&&a| a == 0).count();
            if zeros != b / 2 {
                return Err(Error::config(
                    "detector_assignment.apd",
                    format!("{zeros} bins on APD 0, expected {}", b / 2),
                ));
            }
        }
        if let Some(g) = self.guard {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::config("guard", format!("{g} is not a non-negative time")));
            }
        }
        Ok(())
    }

    fn transmission_of(&self, bin: usize) -> f64 {
        match &self.transmission {
            Transmission::Uniform { avg_loss_db } => db_to_transmission(*avg_loss_db),
            Transmission::Explicit { values } => values[bin],
        }
    }
}

pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Per-bin detection geometry produced by the coupler tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinWeights {
    /// Probability that a photon lands in bin `b` and survives transmission.
    pub weights: Vec<f64>,
    pub arrival_times: Vec<f64>,
    pub detector_of_bin: Vec<u8>,
}

impl BinWeights {
    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Bins of one APD in arrival order (ties by bin index).
    pub fn apd_sequence(&self, apd: u8) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.bins()).filter(|&b| self.detector_of_bin[b] == apd).collect();
        idx.sort_by(|&a, &b| self.arrival_times[a].total_cmp(&self.arrival_times[b]).then(a.cmp(&b)));
        idx
    }

    pub fn bins_per_apd(&self) -> usize {
        self.bins() / 2
    }
}

pub fn build_bin_weights(spec: &MultiplexerSpec) -> Result<BinWeights> {
    spec.validate()?;
    let m = spec.loops();
    let ratios = spec.ratios();
    let b = spec.bins();

    let mut weights = Vec::with_capacity(b);
    let mut arrival_times = Vec::with_capacity(b);
    let mut detector_of_bin = Vec::with_capacity(b);
    for bin in 0..b {
        let mut w = 1.0;
        let mut t = 0.0;
        for (i, delay) in spec.loop_delays.iter().enumerate() {
            if (bin >> (i + 1)) & 1 == 1 {
                w *= ratios[i];
                t += delay;
            } else {
                w *= 1.0 - ratios[i];
            }
        }
        let last = bin & 1;
        w *= if last == 1 { ratios[m] } else { 1.0 - ratios[m] };
        weights.push(w * spec.transmission_of(bin));
        arrival_times.push(t);
        detector_of_bin.push(match &spec.detector_assignment {
            DetectorAssignment::FinalCoupler => last as u8,
            DetectorAssignment::Explicit { apd } => apd[bin],
        });
    }
    Ok(BinWeights { weights, arrival_times, detector_of_bin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Smallest gap between consecutive bins on the same APD (seconds).
    pub min_spacing: f64,
    pub train_length: f64,
    pub max_rep_rate: f64,
    /// `min_spacing` is shorter than the deadtime.
    pub violation: bool,
}

pub fn validate_timing(weights: &BinWeights, deadtime: f64, guard: f64) -> TimingReport {
    let mut min_spacing = f64::INFINITY;
    for apd in 0..2u8 {
        let seq = weights.apd_sequence(apd);
        for pair in seq.windows(2) {
            let gap = weights.arrival_times[pair[1]] - weights.arrival_times[pair[0]];
            min_spacing = min_spacing.min(gap);
        }
    }
    let last = weights.arrival_times.iter().copied().fold(0.0, f64::max);
    let train_length = last + guard;
    TimingReport {
        min_spacing,
        train_length,
        max_rep_rate: 1.0 / train_length,
        violation: min_spacing < deadtime * (1.0 - TIMING_REL_TOL),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn ideal_four_loops_is_uniform() {
        let w = build_bin_weights(&MultiplexerSpec::ideal(vec![1.0, 2.0, 4.0, 8.0])).unwrap();
        assert_eq!(w.bins(), 32);
        for q in &w.weights {
            assert_eq!(*q, 1.0 / 32.0);
        }
    }

    #[test]
    fn uniform_loss_scales_every_bin() {
        let mut spec = MultiplexerSpec::ideal(vec![1.0, 2.0, 4.0, 8.0]);
        spec.transmission = Transmission::Uniform { avg_loss_db: 1.35 };
        let w = build_bin_weights(&spec).unwrap();
        for q in &w.weights {
            assert_relative_eq!(*q, 0.022_900_766_66, max_relative = 1e-9);
        }
    }

    #[test]
    fn unbalanced_first_coupler() {
        let mut spec = MultiplexerSpec::ideal(vec![1.0]);
        spec.coupler_ratios = Some(vec![0.7, 0.5]);
        let w = build_bin_weights(&spec).unwrap();
        // Hand enumeration of the four paths.
        let expected = sorted(vec![0.35, 0.35, 0.15, 0.15]);
        let got = sorted(w.weights.clone());
        for (a, b) in got.iter().zip(&expected) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn half_the_bins_per_apd() {
        let w = build_bin_weights(&MultiplexerSpec::ideal(vec![1.0, 2.0, 4.0])).unwrap();
        assert_eq!(w.detector_of_bin.iter().filter(|&&a| a == 0).count(), 8);
        assert_eq!(w.apd_sequence(1).len(), 8);
    }

    #[test]
    fn bad_ratio_names_field() {
        let mut spec = MultiplexerSpec::ideal(vec![1.0]);
        spec.coupler_ratios = Some(vec![0.5, 1.0]);
        let err = build_bin_weights(&spec).unwrap_err();
        assert!(err.to_string().contains("coupler_ratios[1]"), "{err}");
    }

    #[test]
    fn bad_transmission_names_field() {
        let mut spec = MultiplexerSpec::ideal(vec![1.0]);
        spec.transmission = Transmission::Explicit { values: vec![1.0, 0.5, 0.0, 1.0] };
        let err = build_bin_weights(&spec).unwrap_err();
        assert!(err.to_string().contains("transmission.values[2]"), "{err}");
    }

    #[test]
    fn unbalanced_assignment_rejected() {
        let mut spec = MultiplexerSpec::ideal(vec![1.0]);
        spec.detector_assignment = DetectorAssignment::Explicit { apd: vec![0, 0, 0, 1] };
        assert!(build_bin_weights(&spec).is_err());
    }

    #[test]
    fn conventional_timing() {
        let w = build_bin_weights(&MultiplexerSpec::ideal(vec![5e-6, 10e-6, 25e-6])).unwrap();
        let r = validate_timing(&w, 5e-6, 5e-6);
        assert!(!r.violation);
        assert_relative_eq!(r.min_spacing, 5e-6, max_relative = 1e-12);
        assert_relative_eq!(r.train_length, 45e-6, max_relative = 1e-12);
        assert_eq!((r.max_rep_rate / 1e3).round(), 22.0);
    }

    #[test]
    fn short_loop_flags_violation() {
        let w = build_bin_weights(&MultiplexerSpec::ideal(vec![3e-6])).unwrap();
        let r = validate_timing(&w, 5e-6, 0.0);
        assert!(r.violation);
    }

    #[test]
    fn no_loops_has_infinite_spacing() {
        let w = build_bin_weights(&MultiplexerSpec::ideal(vec![])).unwrap();
        assert_eq!(w.bins(), 2);
        let r = validate_timing(&w, 1.0, 1.0);
        assert!(r.min_spacing.is_infinite());
        assert!(!r.violation);
    }
}
