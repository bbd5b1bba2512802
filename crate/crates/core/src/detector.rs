//! Gated InGaAs/InP APD click model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rapid-gating undershoot: a strong avalanche lowers the chance of
/// discriminating an avalanche in the next bin of the same APD.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Undershoot {
    #[default]
    None,
    /// μ-dependent single-photon efficiency, linear between `(mu, eta)`
    /// anchors and clamped outside them.
    GlobalEfficiency { points: Vec<(f64, f64)> },
    /// After a bin with two or more detected photons clicks, the next bin on
    /// the same APD loses its click with probability `p_miss_next`.
    Mechanistic { p_miss_next: f64 },
}

/// Measured afterpulse figures. Carried for reference, never simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfterpulseRecord {
    pub probability: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Single-photon detection efficiency η.
    pub efficiency: f64,
    /// Dark-count probability per gate for APD 0 and APD 1.
    pub dark_prob_per_gate: [f64; 2],
    /// Gate width in seconds (metadata).
    pub gate_width: f64,
    /// Seconds.
    pub deadtime: f64,
    #[serde(default)]
    pub undershoot: Undershoot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub afterpulse: Option<AfterpulseRecord>,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::config("efficiency", format!("{} not in (0, 1]", self.efficiency)));
        }
        for (i, d) in self.dark_prob_per_gate.iter().enumerate() {
            if !(*d >= 0.0 && *d < 1.0) {
                return Err(Error::config(format!("dark_prob_per_gate[{i}]"), format!("{d} not in [0, 1)")));
            }
        }
        if !(self.deadtime.is_finite() && self.deadtime >= 0.0) {
            return Err(Error::config("deadtime", format!("{} is not a non-negative time", self.deadtime)));
        }
        if !(self.gate_width.is_finite() && self.gate_width >= 0.0) {
            return Err(Error::config("gate_width", format!("{} is not a non-negative time", self.gate_width)));
        }
        match &self.undershoot {
            Undershoot::None => {}
            Undershoot::GlobalEfficiency { points } => {
                if points.is_empty() {
                    return Err(Error::config("undershoot.points", "at least one anchor is required"));
                }
                for (i, (mu, eta)) in points.iter().enumerate() {
                    if !(mu.is_finite() && *mu >= 0.0) {
                        return Err(Error::config(
                            format!("undershoot.points[{i}].mu"),
                            format!("{mu} is not a mean photon number"),
                        ));
                    }
                    if !(*eta > 0.0 && *eta <= 1.0) {
                        return Err(Error::config(
                            format!("undershoot.points[{i}].eta"),
                            format!("{eta} not in (0, 1]"),
                        ));
                    }
                }
                if let Some(i) = points.windows(2).position(|w| w[1].0 <= w[0].0) {
                    return Err(Error::config(
                        format!("undershoot.points[{}]", i + 1),
                        "anchor mu values must be strictly increasing",
                    ));
                }
            }
            Undershoot::Mechanistic { p_miss_next } => {
                if !(0.0..=1.0).contains(p_miss_next) {
                    return Err(Error::config("undershoot.p_miss_next", format!("{p_miss_next} not in [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn is_mechanistic(&self) -> bool {
        matches!(self.undershoot, Undershoot::Mechanistic { .. })
    }
}

/// Probability that a gate with `photons` incident photons clicks.
/// Equal to `1 - (1 - dark)(1 - eff)^photons`, arranged so that zero photons
/// returns `dark` exactly.
pub fn click_probability(photons: u64, eff: f64, dark: f64) -> f64 {
    if photons == 0 {
        return dark;
    }
    let photon_click = -((photons as f64) * (-eff).ln_1p()).exp_m1();
    dark + (1.0 - dark) * photon_click
}

/// Efficiency in effect for a pulse of mean photon number `mu`.
pub fn effective_efficiency(spec: &DetectorSpec, mu: f64) -> f64 {
    let points = match &spec.undershoot {
        Undershoot::GlobalEfficiency { points } => points,
        _ => return spec.efficiency,
    };
    let (first, last) = (points[0], points[points.len() - 1]);
    if mu <= first.0 {
        return first.1;
    }
    if mu >= last.0 {
        return last.1;
    }
    let k = points.partition_point(|p| p.0 <= mu);
    let (a, b) = (points[k - 1], points[k]);
    a.1 + (b.1 - a.1) * (mu - a.0) / (b.0 - a.0)
}

/// Probability of at least one dark count over a whole shot.
pub fn shot_dark_probability(spec: &DetectorSpec, bins_per_apd: usize) -> f64 {
    let none: f64 = spec.dark_prob_per_gate.iter().map(|d| (1.0 - d).powi(bins_per_apd as i32)).product();
    1.0 - none
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(undershoot: Undershoot) -> DetectorSpec {
        DetectorSpec {
            efficiency: 0.165,
            dark_prob_per_gate: [1e-5, 5e-5],
            gate_width: 200e-12,
            deadtime: 9.78e-9,
            undershoot,
            afterpulse: None,
        }
    }

    fn rapid_anchors() -> Undershoot {
        Undershoot::GlobalEfficiency { points: vec![(10.0, 0.165), (400.0, 0.145)] }
    }

    #[test]
    fn click_probability_examples() {
        assert_eq!(click_probability(0, 0.165, 0.0), 0.0);
        assert_eq!(click_probability(1, 1.0, 0.0), 1.0);
        assert_relative_eq!(click_probability(3, 0.165, 1e-5), 0.417_822_946_83, max_relative = 1e-10);
        assert_eq!(click_probability(0, 0.3, 0.01), 0.01);
    }

    #[test]
    fn click_probability_matches_bernoulli_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 10_000_000u64;
        let mut hits = 0u64;
        for _ in 0..n {
            let dark = rng.random::<f64>() < 1e-5;
            let photon = (0..3).any(|_| rng.random::<f64>() < 0.165);
            hits += (dark || photon) as u64;
        }
        let p = click_probability(3, 0.165, 1e-5);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn effective_efficiency_anchors() {
        let s = spec(rapid_anchors());
        assert_eq!(effective_efficiency(&s, 10.0), 0.165);
        assert_eq!(effective_efficiency(&s, 400.0), 0.145);
        assert_relative_eq!(effective_efficiency(&s, 205.0), 0.155, epsilon = 1e-15);
        assert_eq!(effective_efficiency(&s, 0.0), 0.165);
        assert_eq!(effective_efficiency(&s, 1e4), 0.145);
        assert_eq!(effective_efficiency(&spec(Undershoot::None), 300.0), 0.165);
    }

    #[test]
    fn shot_dark_examples() {
        let p = shot_dark_probability(&spec(Undershoot::None), 16);
        let exact = 1.0 - (1.0f64 - 1e-5).powi(16) * (1.0f64 - 5e-5).powi(16);
        assert_relative_eq!(p, exact, max_relative = 1e-12);
        assert!((9.5e-4..9.7e-4).contains(&p), "{p}");

        let mut s = spec(Undershoot::None);
        s.dark_prob_per_gate = [0.0, 0.0];
        assert_eq!(shot_dark_probability(&s, 16), 0.0);
        s.dark_prob_per_gate = [0.5, 0.0];
        assert_eq!(shot_dark_probability(&s, 1), 0.5);
    }

    #[test]
    fn anchors_must_increase() {
        let s = spec(Undershoot::GlobalEfficiency { points: vec![(10.0, 0.165), (10.0, 0.145)] });
        assert!(s.validate().is_err());
        assert!(spec(rapid_anchors()).validate().is_ok());
    }

    #[test]
    fn dark_of_one_rejected() {
        let mut s = spec(Undershoot::None);
        s.dark_prob_per_gate[1] = 1.0;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("dark_prob_per_gate[1]"));
    }
}
