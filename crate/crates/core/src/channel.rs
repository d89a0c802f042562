//! Per-frame simplified channel: coefficient recursion, peak power and capacity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain_medium::MediumParams;
use crate::link_budget::{link_gain_h, LinkPoint, OpticsParams};

/// Receiver noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// One-sided power spectral density, W/Hz.
    pub n0: f64,
}

impl NoiseParams {
    pub fn from_dbm_per_hz(dbm: f64) -> Result<Self> {
        let n0 = 10f64.powf((dbm - 30.0) / 10.0);
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::config("noise_dbm_per_hz", format!("gives unusable density {n0} W/Hz")));
        }
        Ok(NoiseParams { n0 })
    }
}

/// One frame of the simplified channel.
///
/// `f` and `delta` are the carrier and link efficiency at the end of round `k`, which
/// are the values the gain function sees when producing frame `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameChannel {
    pub k: usize,
    pub a_sq: f64,
    pub mu: f64,
    pub delta: f64,
    pub b: f64,
    pub t: f64,
    pub f: f64,
}

/// SNR above which the amplitude-constrained high-SNR expression is used.
pub fn high_snr_threshold() -> f64 {
    let pe = std::f64::consts::PI * std::f64::consts::E;
    let r = 1.0 - 2.0 / pe;
    8.0 / (pe * r * r)
}

/// High-SNR spectral efficiency `log2(1 + sqrt(2 snr / (πe)))`, bits/s/Hz.
pub fn high_snr_efficiency(snr: f64) -> f64 {
    (2.0 * snr / (std::f64::consts::PI * std::f64::consts::E)).sqrt().ln_1p() / std::f64::consts::LN_2
}

/// Low-SNR spectral efficiency `log2(1 + snr) / 2`, bits/s/Hz.
pub fn low_snr_efficiency(snr: f64) -> f64 {
    0.5 * snr.ln_1p() / std::f64::consts::LN_2
}

/// Approximate capacity of the amplitude-constrained channel, bits/s.
pub fn capacity_approx(p: f64, b: f64, n: &NoiseParams) -> f64 {
    let snr = p / (n.n0 * b);
    if snr > high_snr_threshold() {
        b * high_snr_efficiency(snr)
    } else {
        b * low_snr_efficiency(snr)
    }
}

/// Peak received signal power `(1-μ)² α δ A² / 4`.
pub fn peak_power(a_sq: f64, mu: f64, delta: f64, alpha: f64) -> f64 {
    let span = 1.0 - mu;
    span * span * alpha * delta * a_sq / 4.0
}

/// Noiseless received amplitude `sqrt(αδ) A s`.
pub fn received_symbol_mean(a: f64, s: f64, delta: f64, alpha: f64) -> f64 {
    (alpha * delta).sqrt() * a * s
}

/// Largest admissible `A²` for the frame after `prev`; `None` is the first frame.
pub fn max_next_a_sq(prev: Option<&FrameChannel>, p_t: f64, o: &OpticsParams, p: &MediumParams) -> Result<f64> {
    match prev {
        None => Ok(p_t),
        Some(fr) => link_gain_h(LinkPoint { delta: fr.delta, f: fr.f, x_sq: fr.a_sq * fr.mu * fr.mu }, o, p),
    }
}
