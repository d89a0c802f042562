//! Saturated gain of a homogeneously broadened, pumped gain medium.
//!
//! The steady-state power gain `G` at input intensity `I` and carrier `f` is the root of
//!
//! ```text
//! F(G) = S_g I (G - 1) + U(f) S_g I_s(f0) ln sqrt(G) - eta P_in = 0,
//! U(f) = 1 + 4 (f - f0)^2 / df_H^2
//! ```
//!
//! `F` is strictly increasing in `G`, negative at `G = 1` and non-negative at the
//! small-signal gain `exp(2 g0(f) l)`, so the root is unique and bracketed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gain-medium constants. The medium length never appears on its own: the
/// small-signal exponent `g0(f) l` is fixed by the pump and saturation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// Line centre, Hz.
    pub f0: f64,
    /// Saturation intensity at the line centre, W/m².
    pub is0: f64,
    /// Lineshape full width at half maximum, Hz.
    pub df_h: f64,
    /// Effective cross-sectional area, m².
    pub s_g: f64,
    /// Pumping efficiency in (0, 1].
    pub eta: f64,
    /// Pumping power, W.
    pub p_in: f64,
}

impl MediumParams {
    /// Nd:YAG rod constants used throughout the reference link, pumped at `p_in`.
    pub fn nd_yag(p_in: f64) -> Self {
        MediumParams { f0: 281.96e12, is0: 1.2e7, df_h: 120e9, s_g: 12.56e-6, eta: 0.7, p_in }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("f0", self.f0),
            ("is0", self.is0),
            ("df_h", self.df_h),
            ("s_g", self.s_g),
            ("eta", self.eta),
            ("p_in", self.p_in),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(
                    format!("medium.{name}"),
                    format!("must be finite and strictly positive, got {value}"),
                ));
            }
        }
        if self.eta > 1.0 {
            return Err(Error::config("medium.eta", format!("must not exceed 1, got {}", self.eta)));
        }
        Ok(())
    }

    /// Lorentzian detuning factor `1 + 4 (f - f0)^2 / df_H^2`.
    pub fn detuning_factor(&self, f: f64) -> f64 {
        let x = 2.0 * (f - self.f0) / self.df_h;
        1.0 + x * x
    }

    /// Saturation power `S_g I_s(f0)`, W.
    pub fn saturation_power(&self) -> f64 {
        self.s_g * self.is0
    }
}

/// Input intensity and carrier frequency presented to the medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainQuery {
    /// Input intensity, W/m².
    pub i_in: f64,
    /// Carrier frequency, Hz.
    pub f: f64,
}

/// Small-signal exponent `g0(f) l = eta P_in / (U(f) I_s(f0) S_g)`.
pub fn small_signal_exponent(f: f64, p: &MediumParams) -> f64 {
    p.eta * p.p_in / (p.detuning_factor(f) * p.is0 * p.s_g)
}

/// Saturation intensity at carrier `f`, W/m².
pub fn saturation_intensity(f: f64, p: &MediumParams) -> f64 {
    p.is0 * p.detuning_factor(f)
}

/// Residual `F(G)` of the implicit gain equation, in watts.
pub fn gain_residual(g: f64, q: GainQuery, p: &MediumParams) -> f64 {
    p.s_g * q.i_in * (g - 1.0) + p.detuning_factor(q.f) * p.saturation_power() * 0.5 * g.ln() - p.eta * p.p_in
}

const MAX_BISECTIONS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-13;

/// Unique saturated gain `G ∈ [1, exp(2 g0(f) l)]`.
///
/// Bisection runs on `ln G` so that the `G → 1` regime (very strong input) keeps
/// full relative precision in `G - 1`. It stops once `|F| ≤ 1e-13 eta P_in`, when the
/// bracket can no longer be split, or after 200 halvings.
pub fn solve_gain(q: GainQuery, p: &MediumParams) -> Result<f64> {
    if !q.i_in.is_finite() || !q.f.is_finite() {
        return Err(Error::domain(format!("gain query must be finite (I_in = {}, f = {})", q.i_in, q.f)));
    }
    if q.i_in < 0.0 {
        return Err(Error::domain(format!("negative input intensity {}", q.i_in)));
    }
    let upper = 2.0 * small_signal_exponent(q.f, p);
    if !upper.is_finite() {
        return Err(Error::domain("non-finite small-signal gain"));
    }
    if q.i_in == 0.0 {
        return Ok(upper.exp());
    }

    let drive = p.s_g * q.i_in;
    let sat = 0.5 * p.detuning_factor(q.f) * p.saturation_power();
    let pump = p.eta * p.p_in;
    // F written on y = ln G; F(0) = -pump, F(upper) = drive * expm1(upper) >= 0
    let residual = |y: f64| drive * y.exp_m1() + sat * y - pump;
    let tol = RESIDUAL_TOL * pump;

    let (mut lo, mut hi) = (0.0_f64, upper);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = residual(mid);
        if r.abs() <= tol {
            return Ok(mid.exp());
        }
        if r > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
