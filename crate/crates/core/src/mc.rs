//! Seeded Monte Carlo simulation of multiplexed shots.
//!
//! Randomness for shot `i` comes from ChaCha8 stream `i` keyed by the master
//! seed, so a shot's outcome depends only on `(seed, i)`. Batches can be split
//! across any number of workers and still produce identical histograms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{effective_efficiency, DetectorSpec, Undershoot};
use crate::error::{Error, Result};
use crate::multiplexer::BinWeights;

/// Largest Fock photon number accepted by the simulator.
pub const FOCK_PHOTON_CAP: u64 = 1_000_000;

/// Shots per parallel work item.
const CHUNK: u64 = 8192;

/// Means above this use the library sampler instead of inversion.
const INVERSION_MAX_MEAN: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseSource {
    Coherent { mu: f64 },
    Fock { n_photons: u64 },
}

impl PulseSource {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PulseSource::Coherent { mu } if !(mu.is_finite() && mu >= 0.0) => {
                Err(Error::Input(format!("coherent mean photon number {mu} must be finite and non-negative")))
            }
            PulseSource::Fock { n_photons } if n_photons > FOCK_PHOTON_CAP => {
                Err(Error::Input(format!("Fock photon number {n_photons} exceeds the cap of {FOCK_PHOTON_CAP}")))
            }
            _ => Ok(()),
        }
    }

    /// Mean photon number, used to resolve μ-dependent efficiency.
    pub fn mean(&self) -> f64 {
        match *self {
            PulseSource::Coherent { mu } => mu,
            PulseSource::Fock { n_photons } => n_photons as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub pattern: Vec<bool>,
    pub n: usize,
    pub shot_index: u64,
}

/// Histogram of total click counts over a batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickHistogram {
    pub counts: Vec<u64>,
}

impl ClickHistogram {
    pub fn zeros(bins: usize) -> Self {
        ClickHistogram { counts: vec![0; bins + 1] }
    }

    pub fn shots(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.shots() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn mean(&self) -> f64 {
        let total = self.shots() as f64;
        self.counts.iter().enumerate().map(|(n, &c)| n as f64 * c as f64).sum::<f64>() / total
    }

    pub fn merge(mut self, other: &ClickHistogram) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub histogram: ClickHistogram,
    pub records: Option<Vec<ClickRecord>>,
}

enum Photons {
    /// Independent per-bin Poisson means.
    Coherent(Vec<f64>),
    /// Cumulative cell probabilities over (bins..., lost).
    Fock { n: u64, cumulative: Vec<f64> },
}

/// Precomputed per-bin sampling state for one (source, geometry, detector).
pub struct ShotSampler {
    photons: Photons,
    dark: Vec<f64>,
    apd_order: [Vec<usize>; 2],
    p_miss_next: Option<f64>,
    base: ChaCha8Rng,
}

impl ShotSampler {
    pub fn new(source: &PulseSource, weights: &BinWeights, det: &DetectorSpec, seed: u64) -> Result<Self> {
        source.validate()?;
        det.validate()?;
        let eta = effective_efficiency(det, source.mean());
        let photons = match *source {
            PulseSource::Coherent { mu } => Photons::Coherent(weights.weights.iter().map(|q| mu * q * eta).collect()),
            PulseSource::Fock { n_photons } => {
                let mut acc = 0.0;
                let mut cumulative: Vec<f64> = weights
                    .weights
                    .iter()
                    .map(|q| {
                        acc += q * eta;
                        acc
                    })
                    .collect();
                cumulative.push(1.0);
                Photons::Fock { n: n_photons, cumulative }
            }
        };
        let dark = weights.detector_of_bin.iter().map(|&a| det.dark_prob_per_gate[a as usize]).collect();
        let p_miss_next = match det.undershoot {
            Undershoot::Mechanistic { p_miss_next } => Some(p_miss_next),
            _ => None,
        };
        Ok(ShotSampler {
            photons,
            dark,
            apd_order: [weights.apd_sequence(0), weights.apd_sequence(1)],
            p_miss_next,
            base: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn bins(&self) -> usize {
        self.dark.len()
    }

    fn rng_for(&self, shot_index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(shot_index);
        rng.set_word_pos(0);
        rng
    }

    /// Fill `pattern` for shot `shot_index` and return the click count.
    /// `counts` is scratch space of length `bins`.
    fn fill(&self, shot_index: u64, pattern: &mut [bool], counts: &mut [u64]) -> usize {
        let mut rng = self.rng_for(shot_index);
        match &self.photons {
            Photons::Coherent(means) => {
                for (c, &m) in counts.iter_mut().zip(means) {
                    *c = sample_poisson(&mut rng, m);
                }
            }
            Photons::Fock { n, cumulative } => {
                counts.fill(0);
                let bins = counts.len();
                for _ in 0..*n {
                    let u: f64 = rng.random();
                    let cell = cumulative.partition_point(|&c| c <= u);
                    if cell < bins {
                        counts[cell] += 1;
                    }
                }
            }
        }
        for ((p, &c), &d) in pattern.iter_mut().zip(counts.iter()).zip(&self.dark) {
            // Uniform drawn unconditionally so the stream layout is fixed.
            let u: f64 = rng.random();
            *p = c > 0 || u < d;
        }
        // Undershoot draws come last so that enabling it never shifts the
        // photon and dark-count draws of the same shot.
        if let Some(p_miss) = self.p_miss_next {
            for order in &self.apd_order {
                let mut strong_prev = false;
                for &b in order {
                    let u: f64 = rng.random();
                    if strong_prev && pattern[b] && u < p_miss {
                        pattern[b] = false;
                    }
                    strong_prev = pattern[b] && counts[b] >= 2;
                }
            }
        }
        pattern.iter().filter(|&&p| p).count()
    }

    pub fn shot(&self, shot_index: u64) -> ClickRecord {
        let mut pattern = vec![false; self.bins()];
        let mut counts = vec![0; self.bins()];
        let n = self.fill(shot_index, &mut pattern, &mut counts);
        ClickRecord { pattern, n, shot_index }
    }

    /// Total click count of shot `shot_index`.
    pub fn clicks(&self, shot_index: u64) -> usize {
        let mut pattern = vec![false; self.bins()];
        let mut counts = vec![0; self.bins()];
        self.fill(shot_index, &mut pattern, &mut counts)
    }

    fn histogram_range(&self, start: u64, end: u64) -> ClickHistogram {
        let mut hist = ClickHistogram::zeros(self.bins());
        let mut pattern = vec![false; self.bins()];
        let mut counts = vec![0; self.bins()];
        for i in start..end {
            let n = self.fill(i, &mut pattern, &mut counts);
            hist.counts[n] += 1;
        }
        hist
    }
}

fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        // Keep one draw per bin regardless of the mean.
        let _: f64 = rng.random();
        return 0;
    }
    if mean > INVERSION_MAX_MEAN {
        return Poisson::new(mean).expect("finite positive mean").sample(rng) as u64;
    }
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 {
            break;
        }
    }
    k
}

/// Simulate shot `shot_index` of the run keyed by `seed`.
pub fn simulate_shot(
    source: &PulseSource,
    weights: &BinWeights,
    det: &DetectorSpec,
    seed: u64,
    shot_index: u64,
) -> Result<ClickRecord> {
    Ok(ShotSampler::new(source, weights, det, seed)?.shot(shot_index))
}

/// Simulate shots `0..n_shots`. Chunks run in parallel; the result does not
/// depend on the thread count.
pub fn simulate_batch(
    source: &PulseSource,
    weights: &BinWeights,
    det: &DetectorSpec,
    n_shots: u64,
    seed: u64,
    keep_records: bool,
) -> Result<Batch> {
    if n_shots == 0 {
        return Err(Error::Input("n_shots must be at least 1".into()));
    }
    let sampler = ShotSampler::new(source, weights, det, seed)?;
    let chunks = n_shots.div_ceil(CHUNK);
    let histogram = (0..chunks)
        .into_par_iter()
        .map(|c| sampler.histogram_range(c * CHUNK, ((c + 1) * CHUNK).min(n_shots)))
        .reduce(|| ClickHistogram::zeros(sampler.bins()), |a, b| a.merge(&b));
    let records = keep_records.then(|| (0..n_shots).into_par_iter().map(|i| sampler.shot(i)).collect());
    Ok(Batch { histogram, records })
}

/// Mix a master seed with a tag (row index, trial index, ...) into a new seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
