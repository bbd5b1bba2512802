//! Bayesian inversion of the response matrix under a uniform prior on the
//! integer μ grid `0..=mu_max`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::exact::{argmax, total_variation};
use crate::matrix::{build_matrix, Method, ResponseMatrix, Support};
use crate::mc::{derive_seed, PulseSource, ShotSampler};

/// Planck constant, J s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const DEFAULT_LEVEL: f64 = 0.90;
pub const DEFAULT_STABILITY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    /// `probs[mu]` for mu = 0..=mu_max.
    pub probs: Vec<f64>,
    pub mode: usize,
    /// Sum of `probs`; one up to rounding.
    pub norm: f64,
}

impl Posterior {
    fn from_unnormalized(mut probs: Vec<f64>) -> Self {
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        let norm = probs.iter().sum();
        let mode = argmax(&probs);
        Posterior { probs, mode, norm }
    }

    pub fn mu_max(&self) -> usize {
        self.probs.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub level: f64,
    pub mode: usize,
    pub lo: usize,
    pub hi: usize,
    /// Posterior mass inside `lo..=hi`.
    pub mass: f64,
}

impl CredibleInterval {
    /// Extent in μ of the grid cells `lo..=hi`, each cell one photon wide.
    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }
}

pub fn posterior_single(m: &ResponseMatrix, n: usize) -> Result<Posterior> {
    if n > m.bins {
        return Err(Error::Input(format!("click count {n} exceeds the {} bins", m.bins)));
    }
    let column = m.column(n);
    if column.iter().all(|&p| p == 0.0) {
        return Err(Error::DegenerateEvidence(format!("no mu in 0..={} can produce {n} clicks", m.mu_max)));
    }
    Ok(Posterior::from_unnormalized(column))
}

/// Normalized product of single-shot posteriors, accumulated in log space.
pub fn posterior_multi(m: &ResponseMatrix, observations: &[usize]) -> Result<Posterior> {
    if observations.is_empty() {
        return Err(Error::Input("at least one observation is required".into()));
    }
    let mut log_post = vec![0.0; m.mu_max + 1];
    for &n in observations {
        let single = posterior_single(m, n)?;
        for (lp, p) in log_post.iter_mut().zip(&single.probs) {
            *lp += p.ln();
        }
    }
    let peak = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(Error::DegenerateEvidence(format!(
            "observations {observations:?} are jointly impossible for every mu in 0..={}",
            m.mu_max
        )));
    }
    Ok(Posterior::from_unnormalized(log_post.iter().map(|lp| (lp - peak).exp()).collect()))
}

/// Contiguous interval grown greedily from the mode, always adding the
/// neighbour with the larger probability (the smaller μ on ties), until it
/// holds at least `level` of the mass.
pub fn credible_interval(post: &Posterior, level: f64) -> CredibleInterval {
    let p = &post.probs;
    let (mut lo, mut hi) = (post.mode, post.mode);
    let mut mass = p[post.mode];
    while mass < level {
        let left = lo.checked_sub(1).map(|i| p[i]);
        let right = p.get(hi + 1).copied();
        match (left, right) {
            (Some(l), Some(r)) if r > l => {
                hi += 1;
                mass += r;
            }
            (Some(l), _) => {
                lo -= 1;
                mass += l;
            }
            (None, Some(r)) => {
                hi += 1;
                mass += r;
            }
            (None, None) => break,
        }
    }
    CredibleInterval { level, mode: post.mode, lo, hi, mass }
}

/// Energy carried by `width_photons` photons of the given vacuum wavelength.
pub fn interval_to_energy(width_photons: f64, wavelength: f64) -> f64 {
    width_photons * PLANCK * SPEED_OF_LIGHT / wavelength
}

/// Total-variation distance between the posterior for each `n` computed on
/// `0..=mu_max` and on `0..=2 mu_max`. Entries are `None` where no μ in the
/// smaller grid can produce `n` clicks.
pub fn stability_profile(config: &SystemConfig, mu_max: usize, method: Method) -> Result<Vec<Option<f64>>> {
    let wide = build_matrix(config, 2 * mu_max, method, Support::All)?;
    let narrow = ResponseMatrix {
        mu_max,
        rows: wide.rows[..=mu_max].to_vec(),
        provenance: wide.provenance[..=mu_max].to_vec(),
        ..wide.clone()
    };
    (0..=wide.bins)
        .map(|n| match (posterior_single(&narrow, n), posterior_single(&wide, n)) {
            (Ok(a), Ok(b)) => Ok(Some(total_variation(&a.probs, &b.probs))),
            (Err(Error::DegenerateEvidence(_)), _) => Ok(None),
            (Err(e), _) | (_, Err(e)) => Err(e),
        })
        .collect()
}

/// Largest `n` such that every click count `0..=n` has a posterior that moves
/// by less than `tolerance` (total variation) when `mu_max` is doubled.
pub fn stability_max_n(config: &SystemConfig, mu_max: usize, tolerance: f64, method: Method) -> Result<Option<usize>> {
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::Input(format!("tolerance {tolerance} not in (0, 1)")));
    }
    let profile = stability_profile(config, mu_max, method)?;
    Ok(profile.iter().take_while(|tv| tv.is_some_and(|t| t < tolerance)).count().checked_sub(1))
}

/// Single- and multi-shot estimation with the stability rejection rule.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub matrix: ResponseMatrix,
    pub max_admissible_n: Option<usize>,
}

impl Estimator {
    pub fn new(config: &SystemConfig, matrix: ResponseMatrix, tolerance: f64) -> Result<Self> {
        let max_admissible_n = stability_max_n(config, matrix.mu_max, tolerance, matrix.method)?;
        Ok(Estimator { matrix, max_admissible_n })
    }

    pub fn check(&self, n: usize) -> Result<()> {
        match self.max_admissible_n {
            Some(max_n) if n <= max_n => Ok(()),
            max_n => Err(Error::Inadmissible { n, max_n: max_n.unwrap_or(0), mu_max: self.matrix.mu_max }),
        }
    }

    pub fn single(&self, n: usize) -> Result<Posterior> {
        self.check(n)?;
        posterior_single(&self.matrix, n)
    }

    pub fn multi(&self, observations: &[usize]) -> Result<Posterior> {
        for &n in observations {
            self.check(n)?;
        }
        posterior_multi(&self.matrix, observations)
    }
}

/// Relative credible-interval width versus number of shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub mu_true: f64,
    pub level: f64,
    /// `trials[t][k - 1]` = interval width / mu_true after k shots of trial t.
    pub trials: Vec<Vec<f64>>,
    pub median: Vec<f64>,
    /// 10% and 90% quantiles across trials.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ErrorCurve {
    /// First shot count at which each trial reaches `threshold`.
    pub fn shots_to_reach(&self, threshold: f64) -> Vec<Option<usize>> {
        self.trials.iter().map(|t| t.iter().position(|&r| r <= threshold).map(|k| k + 1)).collect()
    }

    /// Median of [`Self::shots_to_reach`]; trials that never reach the
    /// threshold count as infinitely slow.
    pub fn median_shots_to_reach(&self, threshold: f64) -> Option<f64> {
        let mut v: Vec<f64> =
            self.shots_to_reach(threshold).into_iter().map(|k| k.map_or(f64::INFINITY, |k| k as f64)).collect();
        let m = quantile(&mut v, 0.5);
        m.is_finite().then_some(m)
    }
}

fn quantile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if frac == 0.0 {
        v[i]
    } else {
        v[i] + frac * (v[i + 1] - v[i])
    }
}

/// Simulate `n_trials` independent series of `max_shots` shots at `mu_true`
/// and track the multi-shot interval width. Shots above the stability cutoff
/// are discarded and redrawn.
pub fn relative_error_curve(
    config: &SystemConfig,
    estimator: &Estimator,
    mu_true: f64,
    max_shots: usize,
    n_trials: usize,
    seed: u64,
    level: f64,
) -> Result<ErrorCurve> {
    let max_n = estimator
        .max_admissible_n
        .ok_or_else(|| Error::Input("no click count is admissible at this mu_max; increase mu_max".into()))?;
    if !(mu_true > 0.0 && mu_true <= estimator.matrix.mu_max as f64) {
        return Err(Error::Input(format!("mu_true={mu_true} outside (0, {}]", estimator.matrix.mu_max)));
    }
    if max_shots == 0 || n_trials == 0 {
        return Err(Error::Input("max_shots and n_trials must be at least 1".into()));
    }
    let weights = config.bin_weights()?;
    let log_like: Vec<Vec<f64>> = (0..=max_n)
        .map(|n| posterior_single(&estimator.matrix, n).map(|p| p.probs.iter().map(|x| x.ln()).collect()))
        .collect::<Result<_>>()?;

    let trials: Vec<Vec<f64>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let sampler = ShotSampler::new(
                &PulseSource::Coherent { mu: mu_true },
                &weights,
                &config.detector,
                derive_seed(seed, t),
            )?;
            let mut log_post = vec![0.0; estimator.matrix.mu_max + 1];
            let mut shot_index = 0u64;
            let mut widths = Vec::with_capacity(max_shots);
            for _ in 0..max_shots {
                let n = loop {
                    let n = sampler.clicks(shot_index);
                    shot_index += 1;
                    if n <= max_n {
                        break n;
                    }
                    if shot_index > 1000 * max_shots as u64 {
                        return Err(Error::Input(format!(
                            "mu_true={mu_true} almost never yields an admissible click count"
                        )));
                    }
                };
                for (lp, l) in log_post.iter_mut().zip(&log_like[n]) {
                    *lp += l;
                }
                let peak = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let post = Posterior::from_unnormalized(log_post.iter().map(|lp| (lp - peak).exp()).collect());
                widths.push(credible_interval(&post, level).width() as f64 / mu_true);
            }
            Ok(widths)
        })
        .collect::<Result<_>>()?;

    let column = |k: usize| trials.iter().map(|t| t[k]).collect::<Vec<f64>>();
    let (mut median, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..max_shots {
        let mut c = column(k);
        median.push(quantile(&mut c, 0.5));
        lower.push(quantile(&mut c, 0.1));
        upper.push(quantile(&mut c, 0.9));
    }
    Ok(ErrorCurve { mu_true, level, trials, median, lower, upper })
}
