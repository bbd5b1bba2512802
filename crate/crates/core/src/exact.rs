//! Closed-form click-count distributions.
//!
//! Bins click independently under coherent illumination, so the total count
//! is Poisson-binomial over the per-bin click probabilities. Fock inputs are
//! handled by brute-force enumeration of photon occupancies, which serves as a
//! ground truth for small instances.

use serde::{Deserialize, Serialize};

use crate::detector::{click_probability, effective_efficiency, DetectorSpec};
use crate::error::{Error, Result};
use crate::mc::PulseSource;
use crate::multiplexer::BinWeights;

pub const FOCK_ENUMERATION_MAX_PHOTONS: u64 = 12;

/// Upper bound on the number of occupancy vectors visited by the Fock oracle.
pub const FOCK_ENUMERATION_MAX_STATES: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickDistribution {
    /// `probs[n]` = p(n clicks), n = 0..=B.
    pub probs: Vec<f64>,
    pub source: PulseSource,
}

impl ClickDistribution {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs.iter().enumerate().map(|(n, p)| (n as f64 - m).powi(2) * p).sum()
    }

    /// Most probable click count (smallest on ties).
    pub fn mode(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Total-variation distance; the shorter vector is zero-padded.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|i| (at(a, i) - at(b, i)).abs()).sum::<f64>()
}

/// Distribution of the number of successes among independent Bernoulli
/// trials with the given success probabilities.
pub fn poisson_binomial(p: &[f64]) -> Vec<f64> {
    let mut dist = vec![0.0; p.len() + 1];
    dist[0] = 1.0;
    for (k, &pb) in p.iter().enumerate() {
        for n in (1..=k + 1).rev() {
            dist[n] = dist[n] * (1.0 - pb) + dist[n - 1] * pb;
        }
        dist[0] *= 1.0 - pb;
    }
    dist
}

fn dark_of_bins(weights: &BinWeights, det: &DetectorSpec) -> Vec<f64> {
    weights.detector_of_bin.iter().map(|&a| det.dark_prob_per_gate[a as usize]).collect()
}

fn reject_mechanistic(det: &DetectorSpec) -> Result<()> {
    if det.is_mechanistic() {
        return Err(Error::ModelUnsupported(
            "mechanistic undershoot correlates neighbouring bins; use the Monte Carlo method".into(),
        ));
    }
    Ok(())
}

/// Per-bin click probabilities for a coherent pulse of mean `mu`.
pub fn coherent_bin_click_probabilities(mu: f64, weights: &BinWeights, det: &DetectorSpec) -> Vec<f64> {
    let eta = effective_efficiency(det, mu);
    weights
        .weights
        .iter()
        .zip(dark_of_bins(weights, det))
        .map(|(q, d)| 1.0 - (1.0 - d) * (-mu * q * eta).exp())
        .collect()
}

pub fn coherent_click_distribution(mu: f64, weights: &BinWeights, det: &DetectorSpec) -> Result<ClickDistribution> {
    reject_mechanistic(det)?;
    let source = PulseSource::Coherent { mu };
    source.validate()?;
    let p = coherent_bin_click_probabilities(mu, weights, det);
    Ok(ClickDistribution { probs: poisson_binomial(&p), source })
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact click distribution for `n_photons` photons, summing over every way
/// of distributing them among the bins and the loss channel.
pub fn fock_click_distribution(n_photons: u64, weights: &BinWeights, det: &DetectorSpec) -> Result<ClickDistribution> {
    reject_mechanistic(det)?;
    if n_photons > FOCK_ENUMERATION_MAX_PHOTONS {
        return Err(Error::Input(format!(
            "Fock enumeration supports at most {FOCK_ENUMERATION_MAX_PHOTONS} photons, got {n_photons}"
        )));
    }
    let bins = weights.bins();
    let states = binomial(n_photons + bins as u64, bins as u64);
    if states > FOCK_ENUMERATION_MAX_STATES as f64 {
        return Err(Error::Input(format!(
            "Fock enumeration over {bins} bins with {n_photons} photons visits {states:.3e} states \
             (limit {FOCK_ENUMERATION_MAX_STATES})"
        )));
    }

    let eta = effective_efficiency(det, n_photons as f64);
    let dark = dark_of_bins(weights, det);
    let lost = (1.0 - weights.total_weight()).max(0.0);
    let log_fact: Vec<f64> = (0..=n_photons)
        .scan(0.0, |acc, k| {
            if k > 0 {
                *acc += (k as f64).ln();
            }
            Some(*acc)
        })
        .collect();

    let mut probs = vec![0.0; bins + 1];
    let mut occupancy = vec![0u64; bins];
    let mut click_p = vec![0.0; bins];
    enumerate(0, n_photons, &mut occupancy, &mut |occ, remaining| {
        // remaining photons go to the loss channel
        let mut log_w = log_fact[n_photons as usize] - log_fact[remaining as usize];
        if remaining > 0 {
            if lost == 0.0 {
                return;
            }
            log_w += remaining as f64 * lost.ln();
        }
        for (b, &k) in occ.iter().enumerate() {
            if k > 0 {
                log_w += k as f64 * weights.weights[b].ln() - log_fact[k as usize];
            }
            click_p[b] = click_probability(k, eta, dark[b]);
        }
        let w = log_w.exp();
        for (n, p) in poisson_binomial(&click_p).into_iter().enumerate() {
            probs[n] += w * p;
        }
    });
    Ok(ClickDistribution { probs, source: PulseSource::Fock { n_photons } })
}

fn enumerate(bin: usize, remaining: u64, occ: &mut [u64], visit: &mut impl FnMut(&[u64], u64)) {
    if bin == occ.len() {
        visit(occ, remaining);
        return;
    }
    for k in 0..=remaining {
        occ[bin] = k;
        enumerate(bin + 1, remaining - k, occ, visit);
    }
    occ[bin] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::Undershoot;
    use crate::multiplexer::{build_bin_weights, MultiplexerSpec};
    use approx::assert_relative_eq;

    fn det(eff: f64, dark: [f64; 2]) -> DetectorSpec {
        DetectorSpec {
            efficiency: eff,
            dark_prob_per_gate: dark,
            gate_width: 1e-9,
            deadtime: 1e-9,
            undershoot: Undershoot::None,
            afterpulse: None,
        }
    }

    #[test]
    fn vacuum_is_point_mass() {
        let w = build_bin_weights(&MultiplexerSpec::ideal(vec![1.0, 2.0])).unwrap();
        let d = coherent_click_distribution(0.0, &w, &det(0.5, [0.0, 0.0])).unwrap();
        assert_eq!(d.probs[0], 1.0);
        assert_eq!(d.total(), 1.0);
    }

    #[test]
    fn fair_coins() {
        assert_eq!(poisson_binomial(&[0.5, 0.5]), vec![0.25, 0.5, 0.25]);
        assert_eq!(poisson_binomial(&[]), vec![1.0]);
    }

    #[test]
    fn poisson_binomial_moments() {
        let p = [0.1, 0.7, 0.33, 0.02, 0.9, 0.5];
        let d = ClickDistribution { probs: poisson_binomial(&p), source: PulseSource::Coherent { mu: 0.0 } };
        assert_relative_eq!(d.total(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(d.mean(), p.iter().sum::<f64>(), epsilon = 1e-12);
        assert_relative_eq!(d.variance(), p.iter().map(|x| x * (1.0 - x)).sum::<f64>(), epsilon = 1e-12);
    }

    #[test]
    fn fock_examples() {
        let w1 = build_bin_weights(&MultiplexerSpec::ideal(vec![1.0])).unwrap();
        let d0 = fock_click_distribution(0, &w1, &det(1.0, [0.0, 0.0])).unwrap();
        assert_eq!(d0.probs[0], 1.0);
        let d1 = fock_click_distribution(1, &w1, &det(1.0, [0.0, 0.0])).unwrap();
        assert_relative_eq!(d1.probs[1], 1.0, epsilon = 1e-15);
        // Two photons on four bins share a bin with probability 1/4.
        let d2 = fock_click_distribution(2, &w1, &det(1.0, [0.0, 0.0])).unwrap();
        assert_relative_eq!(d2.probs[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(d2.probs[2], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn fock_limits() {
        let w = build_bin_weights(&MultiplexerSpec::ideal(vec![1.0])).unwrap();
        assert!(matches!(fock_click_distribution(13, &w, &det(1.0, [0.0, 0.0])), Err(Error::Input(_))));
        let big = build_bin_weights(&MultiplexerSpec::ideal(vec![1.0, 2.0, 4.0, 8.0])).unwrap();
        assert!(matches!(fock_click_distribution(12, &big, &det(1.0, [0.0, 0.0])), Err(Error::Input(_))));
    }

    #[test]
    fn mechanistic_rejected() {
        let w = build_bin_weights(&MultiplexerSpec::ideal(vec![1.0])).unwrap();
        let mut d = det(0.5, [0.0, 0.0]);
        d.undershoot = Undershoot::Mechanistic { p_miss_next: 0.2 };
        assert!(matches!(coherent_click_distribution(3.0, &w, &d), Err(Error::ModelUnsupported(_))));
        assert!(matches!(fock_click_distribution(3, &w, &d), Err(Error::ModelUnsupported(_))));
    }

    #[test]
    fn fock_with_loss_and_darks_normalized() {
        let mut spec = MultiplexerSpec::ideal(vec![1.0]);
        spec.transmission = crate::multiplexer::Transmission::Uniform { avg_loss_db: 2.0 };
        let w = build_bin_weights(&spec).unwrap();
        let d = fock_click_distribution(6, &w, &det(0.3, [0.01, 0.02])).unwrap();
        assert_relative_eq!(d.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tv_distance() {
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.25, 0.25]), 0.25);
    }
}
