//! Link loss, the round-trip link gain function, lasing threshold and stable power.
//!
//! `delta` is called a loss but behaves as a transmission efficiency: it multiplies the
//! beam power once per pass, so `delta = 1` is a lossless link.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain_medium::{small_signal_exponent, solve_gain, GainQuery, MediumParams};
use crate::kinematics::Vec3;

/// Free-space optics of the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsParams {
    /// Wavelength, m.
    pub lambda: f64,
    /// Diffraction angle of the beam, rad.
    pub phi: f64,
    /// Effective receiving area, m².
    pub s: f64,
    /// Splitting ratio at the receiver, in (0, 1).
    pub alpha: f64,
}

impl OpticsParams {
    pub fn reference() -> Self {
        OpticsParams { lambda: 1064e-9, phi: 0.2e-3, s: 0.1256, alpha: 0.01 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("lambda", self.lambda), ("phi", self.phi), ("s", self.s), ("alpha", self.alpha)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(
                    format!("optics.{name}"),
                    format!("must be finite and strictly positive, got {value}"),
                ));
            }
        }
        if self.alpha >= 1.0 {
            return Err(Error::config("optics.alpha", format!("must be below 1, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Arguments of the link gain function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPoint {
    pub delta: f64,
    pub f: f64,
    /// Instantaneous symbol power leaving the transmitter, W.
    pub x_sq: f64,
}

/// Link efficiency at receiver position `q`.
pub fn link_loss(q: Vec3, o: &OpticsParams) -> f64 {
    link_loss_at(q.norm(), o)
}

pub fn link_loss_at(distance: f64, o: &OpticsParams) -> f64 {
    let spread = o.lambda * o.lambda / (std::f64::consts::PI * o.phi * o.phi)
        + std::f64::consts::PI * o.phi * o.phi * distance * distance;
    -(-2.0 * o.s / spread).exp_m1()
}

fn check_point(pt: &LinkPoint) -> Result<()> {
    if !(pt.delta > 0.0 && pt.delta <= 1.0) {
        return Err(Error::domain(format!("link efficiency must lie in (0, 1], got {}", pt.delta)));
    }
    if !(pt.x_sq >= 0.0) || !pt.x_sq.is_finite() {
        return Err(Error::domain(format!("symbol power must be finite and non-negative, got {}", pt.x_sq)));
    }
    Ok(())
}

/// Power returned to the modulator after one round: `(1-α)δ²x² G((1-α)δ²x²/S_g, f)`.
pub fn link_gain_h(pt: LinkPoint, o: &OpticsParams, p: &MediumParams) -> Result<f64> {
    check_point(&pt)?;
    let u = (1.0 - o.alpha) * pt.delta * pt.delta * pt.x_sq;
    if u == 0.0 {
        return Ok(0.0);
    }
    let g = solve_gain(GainQuery { i_in: u / p.s_g, f: pt.f }, p)?;
    Ok(u * g)
}

/// Link gain together with its derivative in `x_sq`.
///
/// Implicit differentiation of the gain equation gives
/// `dh/dx = (1-α)δ² (2u + K) G / (2h + K)` with `u = (1-α)δ²x` and `K = U(f) S_g I_s(f0)`.
pub fn link_gain_with_slope(pt: LinkPoint, o: &OpticsParams, p: &MediumParams) -> Result<(f64, f64)> {
    check_point(&pt)?;
    let loss = (1.0 - o.alpha) * pt.delta * pt.delta;
    let u = loss * pt.x_sq;
    let g = solve_gain(GainQuery { i_in: u / p.s_g, f: pt.f }, p)?;
    let k = p.detuning_factor(pt.f) * p.saturation_power();
    let h = u * g;
    Ok((h, loss * (2.0 * u + k) * g / (2.0 * h + k)))
}

/// Small-signal upper bound `exp(2 g0(f) l) (1-α) δ²` on `h(x)/x`.
pub fn small_signal_link_gain(delta: f64, f: f64, o: &OpticsParams, p: &MediumParams) -> f64 {
    (2.0 * small_signal_exponent(f, p)).exp() * (1.0 - o.alpha) * delta * delta
}

/// Pumping power below which no resonant beam forms.
pub fn threshold_power(delta0: f64, o: &OpticsParams, p: &MediumParams) -> f64 {
    -(2.0 * delta0.ln() + (-o.alpha).ln_1p()) * p.saturation_power() / (2.0 * p.eta)
}

/// Detuning beyond which a round can only lose power, `h(x) < (1-α)x`. `None` when the
/// medium cannot compensate the link loss even at the line centre.
pub fn divergence_detuning(delta: f64, p: &MediumParams) -> Option<f64> {
    let r = -p.eta * p.p_in / (p.saturation_power() * delta.ln()) - 1.0;
    (r >= 0.0).then(|| 0.5 * p.df_h * r.sqrt())
}

const STABLE_LOWER: f64 = 1e-12;

/// Stable circulating power `P_t`, the positive fixed point `h(P_t, f, δ0) = P_t`.
///
/// `h(P)/P` decreases strictly in `P`, so bisection on `ln P` finds the unique crossing.
pub fn stable_power(delta0: f64, f: f64, o: &OpticsParams, p: &MediumParams) -> Result<f64> {
    let p_th = threshold_power(delta0, o, p);
    if !(p.p_in > p_th) {
        return Err(Error::BelowThreshold { p_in: p.p_in, p_th });
    }
    let excess = |x: f64| -> Result<f64> {
        let h = link_gain_h(LinkPoint { delta: delta0, f, x_sq: x }, o, p)?;
        Ok(h / x - 1.0)
    };

    let mut lo = STABLE_LOWER;
    while excess(lo)? <= 0.0 {
        lo *= 1e-6;
        if lo < 1e-300 {
            return Err(Error::Solver("stable power below representable range".into()));
        }
    }
    let mut hi = p.saturation_power() * (2.0 * small_signal_exponent(f, p)).exp();
    while excess(hi)? > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Solver("stable power bracket diverged".into()));
        }
    }

    let (mut ln_lo, mut ln_hi) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (ln_lo + ln_hi);
        if mid <= ln_lo || mid >= ln_hi {
            break;
        }
        let r = excess(mid.exp())?;
        if r == 0.0 {
            return Ok(mid.exp());
        }
        if r > 0.0 {
            ln_lo = mid;
        } else {
            ln_hi = mid;
        }
    }
    Ok((0.5 * (ln_lo + ln_hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{advance_position, direction_cosine, next_frequency};
    use proptest::prelude::*;

    fn optics() -> OpticsParams {
        OpticsParams::reference()
    }

    /// Closed-form fixed point: at `G* = 1/((1-α)δ²)` the gain equation is linear in the drive.
    fn stable_power_oracle(delta0: f64, o: &OpticsParams, p: &MediumParams) -> f64 {
        let loss = (1.0 - o.alpha) * delta0 * delta0;
        let g = 1.0 / loss;
        let drive = (p.eta * p.p_in - 0.5 * p.saturation_power() * g.ln()) / (g - 1.0);
        drive / loss
    }

    #[test]
    fn link_loss_examples() {
        let o = optics();
        let d = link_loss_at(1000.0, &o);
        assert!((d - 0.864_508).abs() < 1e-6, "{d}");
        assert_eq!(link_loss(Vec3::new(0.0, 1000.0, 0.0), &o), d);
        assert!(link_loss_at(1e12, &o) < 1e-12);
        let mut prev = 1.0;
        for step in 1..200 {
            let now = link_loss_at(500.0 + step as f64 * 37.0, &o);
            assert!(now < prev && now > 0.0);
            prev = now;
        }
    }

    #[test]
    fn threshold_examples() {
        let o = optics();
        let p = MediumParams::nd_yag(200.0);
        let p_th = threshold_power(link_loss_at(1000.0, &o), &o, &p);
        assert!((p_th - 32.4306).abs() < 1e-3, "{p_th}");
        let lossless = OpticsParams { alpha: 1e-300, ..o };
        assert!(threshold_power(1.0, &lossless, &p).abs() < 1e-290);
        assert!(threshold_power(0.5, &o, &p) > threshold_power(0.6, &o, &p));
    }

    #[test]
    fn stable_power_matches_closed_form() {
        let o = optics();
        let d0 = link_loss_at(1000.0, &o);
        let expected = [(50.0, 47.284), (100.0, 181.848), (200.0, 450.976)];
        let mut prev = 0.0;
        for (p_in, approx) in expected {
            let p = MediumParams::nd_yag(p_in);
            let pt = stable_power(d0, p.f0, &o, &p).unwrap();
            let oracle = stable_power_oracle(d0, &o, &p);
            assert!((pt / oracle - 1.0).abs() < 1e-10, "{pt} vs {oracle}");
            assert!((pt - approx).abs() < 1e-3);
            let h = link_gain_h(LinkPoint { delta: d0, f: p.f0, x_sq: pt }, &o, &p).unwrap();
            assert!((h - pt).abs() / pt < 1e-9);
            assert!(pt > prev);
            prev = pt;
        }
    }

    #[test]
    fn stable_power_near_and_below_threshold() {
        let o = optics();
        let d0 = link_loss_at(1000.0, &o);
        let p_th = threshold_power(d0, &o, &MediumParams::nd_yag(1.0));
        let p = MediumParams::nd_yag(p_th * (1.0 + 1e-6));
        let pt = stable_power(d0, p.f0, &o, &p).unwrap();
        assert!(pt > 0.0 && pt < 1e-3, "{pt}");
        let below = MediumParams::nd_yag(p_th * 0.999);
        assert!(matches!(stable_power(d0, below.f0, &o, &below), Err(Error::BelowThreshold { .. })));
    }

    #[test]
    fn zero_input_gives_zero() {
        let p = MediumParams::nd_yag(200.0);
        let h = link_gain_h(LinkPoint { delta: 0.8, f: p.f0, x_sq: 0.0 }, &optics(), &p).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn slope_matches_finite_difference() {
        let o = optics();
        let p = MediumParams::nd_yag(200.0);
        for x in [1e-6, 1e-2, 1.0, 50.0, 450.0, 5e4] {
            for df in [0.0, 30e9, 150e9] {
                let pt = LinkPoint { delta: 0.86, f: p.f0 + df, x_sq: x };
                let (_, slope) = link_gain_with_slope(pt, &o, &p).unwrap();
                let step = 1e-5 * x;
                let up = link_gain_h(LinkPoint { x_sq: x + step, ..pt }, &o, &p).unwrap();
                let down = link_gain_h(LinkPoint { x_sq: x - step, ..pt }, &o, &p).unwrap();
                let fd = (up - down) / (2.0 * step);
                assert!((fd / slope - 1.0).abs() < 1e-6, "x={x} df={df}: {fd} vs {slope}");
            }
        }
    }

    #[test]
    fn divergence_bound_example() {
        let p = MediumParams::nd_yag(200.0);
        let d0 = link_loss_at(1000.0, &optics());
        let b = divergence_detuning(d0, &p).unwrap();
        assert!(b > 130e9 && b < 150e9, "{b}");
        let beyond = small_signal_link_gain(d0, p.f0 + b * 1.0001, &optics(), &p);
        assert!(beyond < 1.0 - optics().alpha);
        assert!(divergence_detuning(1e-6, &p).is_none());
    }

    #[test]
    fn exponential_decay_past_divergence_bound() {
        let o = optics();
        let p = MediumParams::nd_yag(200.0);
        let v = Vec3::new(5.0, 0.0, 0.0);
        let mut q = Vec3::new(1000.0, 0.0, 0.0);
        let mut f = p.f0;
        let mut delta = link_loss(q, &o);
        let mut x = stable_power(delta, p.f0, &o, &p).unwrap();
        let mut past = false;
        let mut checked = 0;
        for _ in 0..20_000 {
            // round k: x_k = h(x_{k-1}, f_{k-1}, δ_{k-1})
            if let Some(bound) = divergence_detuning(delta, &p) {
                past |= (f - p.f0).abs() > bound;
            } else {
                past = true;
            }
            let next = link_gain_h(LinkPoint { delta, f, x_sq: x }, &o, &p).unwrap();
            if past && x > 0.0 {
                assert!(next / x < 1.0 - o.alpha);
                checked += 1;
            }
            let cos = direction_cosine(q, v).unwrap();
            f = next_frequency(f, v.norm(), cos);
            q = advance_position(q, v).unwrap();
            delta = link_loss(q, &o);
            x = next;
        }
        assert!(checked > 1000, "{checked}");
    }

    proptest! {
        #[test]
        fn h_bounds(x in 1e-9..1e5_f64, delta in 0.05..0.999_f64, df in -300e9..300e9_f64, p_in in 20.0..800.0_f64) {
            let o = optics();
            let p = MediumParams::nd_yag(p_in);
            let f = p.f0 + df;
            let h = link_gain_h(LinkPoint { delta, f, x_sq: x }, &o, &p).unwrap();
            let floor = (1.0 - o.alpha) * delta * delta * x;
            prop_assert!(h > floor);
            prop_assert!(h < small_signal_link_gain(delta, f, &o, &p) * x);
        }

        #[test]
        fn h_monotone(x in 1e-6..1e4_f64, bump in 1.001..3.0_f64, delta in 0.05..0.99_f64,
                      df in 0.0..300e9_f64, extra in 1e8..50e9_f64) {
            let o = optics();
            let p = MediumParams::nd_yag(200.0);
            let base = LinkPoint { delta, f: p.f0 + df, x_sq: x };
            let h0 = link_gain_h(base, &o, &p).unwrap();
            let hx = link_gain_h(LinkPoint { x_sq: x * bump, ..base }, &o, &p).unwrap();
            let hf = link_gain_h(LinkPoint { f: p.f0 - df - extra, ..base }, &o, &p).unwrap();
            let hd = link_gain_h(LinkPoint { delta: (delta * 1.01).min(1.0), ..base }, &o, &p).unwrap();
            prop_assert!(hx > h0);
            prop_assert!(hf <= h0);
            prop_assert!(hd > h0);
            // amplitude ratio falls with x, rises with δ
            prop_assert!(hx.sqrt() / (x * bump).sqrt() < h0.sqrt() / x.sqrt());
            prop_assert!(hd.sqrt() / x.sqrt() > h0.sqrt() / x.sqrt());
        }

        #[test]
        fn stable_power_increasing(p_in in 35.0..2000.0_f64, bump in 1.01..2.0_f64) {
            let o = optics();
            let d0 = link_loss_at(1000.0, &o);
            let a = MediumParams::nd_yag(p_in);
            let b = MediumParams::nd_yag(p_in * bump);
            let pa = stable_power(d0, a.f0, &o, &a).unwrap();
            let pb = stable_power(d0, b.f0, &o, &b).unwrap();
            prop_assert!(pb > pa);
            prop_assert!((pa / stable_power_oracle(d0, &o, &a) - 1.0).abs() < 1e-9);
        }
    }
}
