//! Frame horizon: how many frames stay above the minimum rate before Doppler detuning
//! starves the gain medium.

use serde::{Deserialize, Serialize};

use crate::channel::{capacity_approx, FrameChannel};
use crate::error::{Error, Result};
use crate::kinematics::{symbols_per_frame, Rounds, Vec3};
use crate::link_budget::{link_gain_h, link_loss, stable_power, threshold_power, LinkPoint};
use crate::scenario::Scenario;

/// Idealised frequency reset: the carrier returns to `f0` once it drifts by `trigger`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationPolicy {
    pub enabled: bool,
    /// Hz.
    pub trigger: f64,
}

impl CompensationPolicy {
    pub fn off() -> Self {
        CompensationPolicy { enabled: false, trigger: f64::INFINITY }
    }

    pub fn at(trigger: f64) -> Self {
        CompensationPolicy { enabled: true, trigger }
    }
}

/// State of frame `k`, recorded at the start of its round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    pub k: usize,
    /// Receiver position `q_{k-1}`.
    pub q: Vec3,
    pub cos_theta: f64,
    /// Carrier `f_{k-1}` entering the round.
    pub f: f64,
    /// Link efficiency `δ_k` at the end of the round.
    pub delta: f64,
    /// Duration `T_k`, s.
    pub t: f64,
    /// Bandwidth `B_k`, Hz.
    pub b: f64,
    /// Upper bound on `A_k²`, W.
    pub a_sq: f64,
    /// Approximate capacity at `μ = 0`, bit/s.
    pub capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    CapacityBelowThreshold,
    MaxFramesCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    #[serde(rename = "K0")]
    pub k0: usize,
    pub frames: Vec<FrameState>,
    /// Frame `K0 + 1`, the first one not counted.
    pub probe: FrameState,
    #[serde(rename = "T_up")]
    pub t_up: f64,
    pub moved: f64,
    pub terminated_reason: TerminationReason,
    pub p_th: f64,
    pub p_t: f64,
    pub delta0: f64,
    pub n_symbols: u64,
}

impl HorizonResult {
    /// Simplified-channel view of frame `k` (1-based) with floor `mu`.
    pub fn channel(&self, k: usize, a_sq: f64, mu: f64) -> FrameChannel {
        let fr = &self.frames[k - 1];
        FrameChannel { k, a_sq, mu, delta: fr.delta, b: fr.b, t: fr.t, f: self.next_carrier(k) }
    }

    /// Carrier `f_k` that shapes the gain for frame `k + 1` (after any reset).
    pub fn next_carrier(&self, k: usize) -> f64 {
        self.frames.get(k).unwrap_or(&self.probe).f
    }

    /// First `k` frames, with frame `k + 1` as the probe. Used to build short problems.
    pub fn truncated(&self, k: usize) -> HorizonResult {
        let k = k.min(self.k0);
        let probe = *self.frames.get(k).unwrap_or(&self.probe);
        let frames = self.frames[..k].to_vec();
        let t_up = frames.iter().map(|f| f.t).sum();
        let q0 = self.frames.first().unwrap_or(&self.probe).q;
        HorizonResult {
            k0: k,
            probe,
            t_up,
            moved: (probe.q - q0).norm(),
            terminated_reason: self.terminated_reason,
            frames,
            ..*self
        }
    }
}

/// Runs the frame recursion `A²_{k+1} = h(A²_k, f_k, δ_k)` from `A²_1 = P_t` while the
/// `μ = 0` capacity of the next frame stays above the rate threshold.
pub fn compute_horizon(scn: &Scenario, policy: &CompensationPolicy, max_frames: usize) -> Result<HorizonResult> {
    run(scn, policy, max_frames, true)
}

/// As [`compute_horizon`] but without keeping per-frame state; `frames` is left empty.
pub fn compute_horizon_summary(
    scn: &Scenario,
    policy: &CompensationPolicy,
    max_frames: usize,
) -> Result<HorizonResult> {
    run(scn, policy, max_frames, false)
}

fn run(scn: &Scenario, policy: &CompensationPolicy, max_frames: usize, record: bool) -> Result<HorizonResult> {
    if max_frames == 0 {
        return Err(Error::config("max_frames", "must be at least 1"));
    }
    if policy.enabled && !(policy.trigger > 0.0) {
        return Err(Error::config("compensation.trigger", "must be strictly positive"));
    }
    let o = &scn.optics;
    let p = &scn.medium;
    let noise = scn.noise();
    let delta0 = link_loss(scn.q0, o);
    let p_th = threshold_power(delta0, o, p);
    if !(p.p_in > p_th) {
        return Err(Error::BelowThreshold { p_in: p.p_in, p_th });
    }
    let p_t = stable_power(delta0, p.f0, o, p)?;
    let n_symbols = symbols_per_frame(scn.b1, scn.q0)?;
    let mut rounds = Rounds::new(scn.q0, scn.v, p.f0, n_symbols)?;

    let mut frames = Vec::new();
    let mut k0 = 0usize;
    let mut t_up = 0.0;
    let mut a_sq = p_t;
    let (probe, reason) = loop {
        let geom = rounds.next().expect("rounds never end")?;
        let delta = link_loss(rounds.position(), o);
        let capacity = capacity_approx(o.alpha * delta * a_sq / 4.0, geom.bandwidth, &noise);
        let frame = FrameState {
            k: k0 + 1,
            q: geom.q_prev,
            cos_theta: geom.cos_theta,
            f: geom.f_prev,
            delta,
            t: geom.duration,
            b: geom.bandwidth,
            a_sq,
            capacity,
        };
        if !(capacity > scn.c_th) {
            break (frame, TerminationReason::CapacityBelowThreshold);
        }
        if k0 == max_frames {
            break (frame, TerminationReason::MaxFramesCap);
        }
        k0 += 1;
        t_up += frame.t;
        if record {
            frames.push(frame);
        }

        let mut f = rounds.frequency();
        if policy.enabled && (f - p.f0).abs() >= policy.trigger {
            f = p.f0;
            rounds.reset_frequency(f);
        }
        a_sq = link_gain_h(LinkPoint { delta, f, x_sq: a_sq }, o, p)?;
    };

    Ok(HorizonResult {
        k0,
        moved: (probe.q - scn.q0).norm(),
        frames,
        probe,
        t_up,
        terminated_reason: reason,
        p_th,
        p_t,
        delta0,
        n_symbols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NoiseParams;
    use crate::link_budget::divergence_detuning;

    fn scenario(theta: f64, speed: f64, p_in: f64) -> Scenario {
        Scenario::reference(1000.0, speed, theta, p_in, 1.0)
    }

    #[test]
    fn reference_run_terminates() {
        let scn = scenario(0.0, 5.0, 200.0);
        let h = compute_horizon(&scn, &CompensationPolicy::off(), 10_000_000).unwrap();
        assert_eq!(h.terminated_reason, TerminationReason::CapacityBelowThreshold);
        assert_eq!(h.frames.len(), h.k0);
        assert!(h.k0 > 10_000 && h.k0 < 20_000, "{}", h.k0);
        assert!(h.frames.iter().all(|f| f.capacity >= scn.c_th));
        assert!(h.probe.capacity < scn.c_th);
        let sum: f64 = h.frames.iter().map(|f| f.t).sum();
        assert_eq!(sum, h.t_up);
        assert!((h.moved - 5.0 * h.t_up).abs() <= 1e-9 * h.moved);
        assert_eq!(h.frames[0].a_sq, h.p_t);
        assert_eq!(h.frames[0].f, scn.medium.f0);
        for (i, f) in h.frames.iter().enumerate() {
            assert_eq!(f.k, i + 1);
        }
    }

    #[test]
    fn summary_matches_full_run() {
        let scn = scenario(30.0, 10.0, 100.0);
        let full = compute_horizon(&scn, &CompensationPolicy::off(), 10_000_000).unwrap();
        let summary = compute_horizon_summary(&scn, &CompensationPolicy::off(), 10_000_000).unwrap();
        assert!(summary.frames.is_empty());
        assert_eq!(summary.k0, full.k0);
        assert_eq!(summary.t_up, full.t_up);
        assert_eq!(summary.probe, full.probe);
    }

    #[test]
    fn high_threshold_gives_empty_horizon() {
        let mut scn = scenario(0.0, 5.0, 200.0);
        scn.c_th = 1e12;
        let h = compute_horizon(&scn, &CompensationPolicy::off(), 100).unwrap();
        assert_eq!(h.k0, 0);
        assert_eq!(h.t_up, 0.0);
        assert_eq!(h.moved, 0.0);
        assert_eq!(h.terminated_reason, TerminationReason::CapacityBelowThreshold);
    }

    #[test]
    fn static_receiver_hits_cap() {
        let scn = scenario(0.0, 0.0, 200.0);
        let h = compute_horizon(&scn, &CompensationPolicy::off(), 5000).unwrap();
        assert_eq!(h.terminated_reason, TerminationReason::MaxFramesCap);
        assert_eq!(h.k0, 5000);
        assert!(h.frames.iter().all(|f| f.f == scn.medium.f0 && f.delta == h.delta0));
        assert!(h.frames.iter().all(|f| (f.a_sq / h.p_t - 1.0).abs() < 1e-9));
    }

    #[test]
    fn below_threshold_rejected() {
        let scn = Scenario::reference(2000.0, 5.0, 0.0, 100.0, 1.0);
        assert!(matches!(compute_horizon(&scn, &CompensationPolicy::off(), 10), Err(Error::BelowThreshold { .. })));
    }

    #[test]
    fn angle_and_speed_trends() {
        let k = |theta: f64, speed: f64| {
            compute_horizon_summary(&scenario(theta, speed, 200.0), &CompensationPolicy::off(), 10_000_000).unwrap().k0
        };
        let k0 = k(0.0, 5.0);
        assert!(k(45.0, 5.0) > k0);
        assert!(k(0.0, 10.0) < k0);
        let ratio = k0 as f64 / k(0.0, 10.0) as f64;
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn compensation_prevents_termination() {
        let scn = scenario(0.0, 5.0, 200.0);
        let trigger = scn.medium.df_h / 4.0;
        assert!(trigger < divergence_detuning(link_loss(scn.q0, &scn.optics), &scn.medium).unwrap());
        let h = compute_horizon(&scn, &CompensationPolicy::at(trigger), 100_000).unwrap();
        assert_eq!(h.terminated_reason, TerminationReason::MaxFramesCap);
        assert_eq!(h.k0, 100_000);
        assert!(h.frames.iter().all(|f| (f.f - scn.medium.f0).abs() < trigger + 1e7));
    }

    #[test]
    fn delta_from_end_of_round() {
        let scn = scenario(0.0, 5.0, 200.0);
        let h = compute_horizon(&scn, &CompensationPolicy::off(), 10_000_000).unwrap();
        let d2 = link_loss(h.frames[2].q, &scn.optics);
        assert_eq!(h.frames[1].delta, d2);
        let noise = NoiseParams::from_dbm_per_hz(-174.0).unwrap();
        let last = h.frames.last().unwrap();
        let c = capacity_approx(scn.optics.alpha * last.delta * last.a_sq / 4.0, last.b, &noise);
        assert_eq!(c, last.capacity);
    }

    #[test]
    fn truncation() {
        let scn = scenario(0.0, 5.0, 200.0);
        let h = compute_horizon(&scn, &CompensationPolicy::off(), 10_000_000).unwrap();
        let t = h.truncated(3);
        assert_eq!(t.k0, 3);
        assert_eq!(t.probe, h.frames[3]);
        assert_eq!(t.next_carrier(3), h.frames[3].f);
        assert_eq!(t.next_carrier(1), h.frames[1].f);
    }
}
