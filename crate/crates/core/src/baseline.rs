//! Single gated APD behind a variable attenuator, the reference estimator.
//!
//! The detection probability per gate fixes μ through
//! `mu = -ln(1 - p) / (eta * alpha)`. The 90% error on μ is propagated from a
//! Poissonian error `sqrt(N_det)` on the number of detections. Under that
//! error model the per-shot relative error factor is minimized near p = 0.5.
//! A binomial error model would instead favour larger p.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::derive_seed;

/// Two-sided 90% standard normal quantile.
pub const Z_90: f64 = 1.645;

/// The baseline is only defined for pulses the attenuator can bring to
/// p = 0.5; weaker pulses are excluded.
pub const MIN_MU: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePixelSpec {
    pub efficiency: f64,
    /// Attenuator transmission α.
    pub attenuation: f64,
}

impl SinglePixelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::config("efficiency", format!("{} not in (0, 1]", self.efficiency)));
        }
        if !(self.attenuation > 0.0 && self.attenuation <= 1.0) {
            return Err(Error::config("attenuation", format!("{} not in (0, 1]", self.attenuation)));
        }
        Ok(())
    }

    /// Spec whose attenuator sets the detection probability of a `mu` pulse
    /// to `p_target`.
    pub fn tuned(efficiency: f64, mu: f64, p_target: f64) -> Result<Self> {
        let spec = SinglePixelSpec { efficiency, attenuation: required_attenuation(mu, p_target, efficiency) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn detection_probability(&self, mu: f64) -> f64 {
        1.0 - (-mu * self.efficiency * self.attenuation).exp()
    }
}

pub fn required_attenuation(mu: f64, p_target: f64, efficiency: f64) -> f64 {
    -(1.0 - p_target).ln() / (efficiency * mu)
}

/// How the 90% error bar is turned into an interval width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthConvention {
    /// `z * sigma`, the one-sided error bar.
    HalfWidth,
    /// `2 z * sigma`, the full two-sided interval, as the multiplexed curve uses.
    FullWidth,
}

impl WidthConvention {
    pub fn factor(self) -> f64 {
        match self {
            WidthConvention::HalfWidth => 1.0,
            WidthConvention::FullWidth => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub mu: f64,
    /// 90% error bar (half width).
    pub delta_mu_90: f64,
}

pub fn estimate_mu(n_det: u64, n_gate: u64, spec: &SinglePixelSpec) -> Result<MuEstimate> {
    spec.validate()?;
    if n_det == 0 || n_det >= n_gate {
        return Err(Error::Input(format!(
            "estimator undefined for {n_det} detections in {n_gate} gates (need 0 < n_det < n_gate)"
        )));
    }
    let ea = spec.efficiency * spec.attenuation;
    let p = n_det as f64 / n_gate as f64;
    let mu = -(-p).ln_1p() / ea;
    let delta_mu_90 = Z_90 * (n_det as f64).sqrt() / n_gate as f64 / ((1.0 - p) * ea);
    Ok(MuEstimate { mu, delta_mu_90 })
}

/// Per-shot relative error factor `sqrt(p) / ((1 - p) ln(1 / (1 - p)))`;
/// the 90% relative error after k gates is `Z_90 * f(p) / sqrt(k)`.
pub fn relative_error_factor(p: f64) -> f64 {
    p.sqrt() / ((1.0 - p) * -(-p).ln_1p())
}

pub fn optimal_detection_probability(grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Input("empty probability grid".into()));
    }
    if let Some(p) = grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::Input(format!("grid point {p} not in (0, 1)")));
    }
    Ok(grid.iter().copied().min_by(|a, b| relative_error_factor(*a).total_cmp(&relative_error_factor(*b))).unwrap())
}

fn check_mu(mu_true: f64) -> Result<()> {
    if mu_true <= MIN_MU {
        return Err(Error::Input(format!("single-pixel baseline is restricted to mu > {MIN_MU} (got {mu_true})")));
    }
    Ok(())
}

/// Analytic relative error `c * Z_90 * f(p) / sqrt(k)` for k = 1..=max_shots.
pub fn baseline_error_curve(
    mu_true: f64,
    spec: &SinglePixelSpec,
    max_shots: usize,
    convention: WidthConvention,
) -> Result<Vec<f64>> {
    check_mu(mu_true)?;
    spec.validate()?;
    let per_shot = convention.factor() * Z_90 * relative_error_factor(spec.detection_probability(mu_true));
    Ok((1..=max_shots).map(|k| per_shot / (k as f64).sqrt()).collect())
}

/// Smallest k whose analytic relative error is at most `threshold`.
pub fn baseline_shots_to_reach(
    mu_true: f64,
    spec: &SinglePixelSpec,
    threshold: f64,
    convention: WidthConvention,
) -> Result<u64> {
    check_mu(mu_true)?;
    spec.validate()?;
    let per_shot = convention.factor() * Z_90 * relative_error_factor(spec.detection_probability(mu_true));
    Ok((per_shot / threshold).powi(2).ceil() as u64)
}

/// Monte Carlo counterpart of [`baseline_error_curve`]: Bernoulli gates,
/// estimate via [`estimate_mu`] after each gate. Returns the mean relative
/// error per k over trials where the estimator is defined, and the number of
/// such trials.
pub fn baseline_error_curve_mc(
    mu_true: f64,
    spec: &SinglePixelSpec,
    max_shots: usize,
    n_trials: usize,
    seed: u64,
    convention: WidthConvention,
) -> Result<(Vec<f64>, Vec<usize>)> {
    check_mu(mu_true)?;
    spec.validate()?;
    let p = spec.detection_probability(mu_true);
    let per_trial: Vec<Vec<Option<f64>>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t));
            let mut n_det = 0u64;
            (1..=max_shots as u64)
                .map(|k| {
                    n_det += (rng.random::<f64>() < p) as u64;
                    estimate_mu(n_det, k, spec).ok().map(|e| convention.factor() * e.delta_mu_90 / mu_true)
                })
                .collect()
        })
        .collect();
    let mut mean = vec![0.0; max_shots];
    let mut valid = vec![0usize; max_shots];
    for trial in &per_trial {
        for (k, r) in trial.iter().enumerate() {
            if let Some(r) = r {
                mean[k] += r;
                valid[k] += 1;
            }
        }
    }
    for (m, &v) in mean.iter_mut().zip(&valid) {
        *m = if v > 0 { *m / v as f64 } else { f64::NAN };
    }
    Ok((mean, valid))
}
