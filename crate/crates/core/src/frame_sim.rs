//! Symbol-level simulation of the modulated cavity: per-symbol normalisation weights,
//! the transmitted-symbol recursion and the received samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::NoiseParams;
use crate::error::{Error, Result};
use crate::gain_medium::MediumParams;
use crate::horizon::HorizonResult;
use crate::link_budget::{link_gain_h, LinkPoint, OpticsParams};

/// Weights may exceed one by this much before the amplitude bound counts as violated.
const W_SLACK: f64 = 1e-12;
const NOISE_STREAM: u64 = 1 << 32;

/// Law of the information symbols on `[μ, 1]`.
pub trait SymbolDistribution {
    fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl SymbolDistribution for Uniform {
    fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> f64 {
        mu + (1.0 - mu) * rng.random::<f64>()
    }
}

fn draw_on_stream<D: SymbolDistribution>(n: usize, mu: f64, dist: &D, seed: u64, stream: u64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!("mu must lie in [0, 1], got {mu}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok((0..n).map(|_| dist.sample(mu, &mut rng)).collect())
}

pub fn draw_symbols<D: SymbolDistribution>(n: usize, mu: f64, dist: &D, seed: u64) -> Result<Vec<f64>> {
    draw_on_stream(n, mu, dist, seed, 0)
}

/// What arrives at the modulator before frame `k` is imprinted.
#[derive(Debug, Clone, Copy)]
pub enum Carrier<'a> {
    /// First frame: the stable cavity power.
    Stable { p_t: f64 },
    /// The previous frame's transmitted amplitudes after one more round trip.
    Previous { x: &'a [f64], f: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSymbols {
    /// Frame index, 1-based.
    pub k: usize,
    pub a_target: f64,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    /// Transmitted amplitudes, √W.
    pub x: Vec<f64>,
    /// Received samples, empty until [`transmit_and_receive`] runs.
    pub y: Vec<f64>,
    pub noise: Vec<f64>,
    /// Link efficiency the frame was received through.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-sample variance, W.
    pub variance: f64,
    pub seed: u64,
}

fn carrier_power(carrier: &Carrier, n: usize, o: &OpticsParams, p: &MediumParams) -> Result<f64> {
    match *carrier {
        Carrier::Stable { p_t } => Ok(p_t),
        Carrier::Previous { x, f, delta } => link_gain_h(LinkPoint { delta, f, x_sq: x[n] * x[n] }, o, p),
    }
}

/// Normalises the incoming carrier to `a_target` and imprints `s`.
pub fn modulate_frame(
    carrier: Carrier,
    a_target: f64,
    s: Vec<f64>,
    k: usize,
    o: &OpticsParams,
    p: &MediumParams,
) -> Result<FrameSymbols> {
    if !(a_target > 0.0) || !a_target.is_finite() {
        return Err(Error::domain(format!("A_target must be positive and finite, got {a_target}")));
    }
    if let Carrier::Previous { x, .. } = carrier {
        if x.len() != s.len() {
            return Err(Error::domain(format!("previous frame has {} symbols, this one {}", x.len(), s.len())));
        }
    }
    let mut w = Vec::with_capacity(s.len());
    let mut x = Vec::with_capacity(s.len());
    for (n, &sym) in s.iter().enumerate() {
        let root = carrier_power(&carrier, n, o, p)?.sqrt();
        let wn = a_target / root;
        if !(wn <= 1.0 + W_SLACK) {
            return Err(Error::AmplitudeBound { frame: k, index: n, w: wn });
        }
        let wn = wn.min(1.0);
        w.push(wn);
        x.push(root * wn * sym);
    }
    Ok(FrameSymbols { k, a_target, s, w, x, y: Vec::new(), noise: Vec::new(), delta: f64::NAN })
}

/// Tap `α` of the received beam and add Gaussian noise; fills `frame.y` and `frame.noise`.
pub fn transmit_and_receive<'a>(
    frame: &'a mut FrameSymbols,
    delta: f64,
    alpha: f64,
    noise: &NoiseModel,
) -> Result<&'a [f64]> {
    if !(noise.variance >= 0.0) || !noise.variance.is_finite() {
        return Err(Error::domain(format!("noise variance must be non-negative, got {}", noise.variance)));
    }
    let normal = Normal::new(0.0, noise.variance.sqrt()).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(NOISE_STREAM + frame.k as u64);
    let gain = (alpha * delta).sqrt();
    frame.noise = (0..frame.x.len()).map(|_| normal.sample(&mut rng)).collect();
    frame.y = frame.x.iter().zip(&frame.noise).map(|(x, v)| gain * x + v).collect();
    frame.delta = delta;
    Ok(&frame.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplificationReport {
    /// Largest `|y - ν - √(αδ)As| / (√(αδ)As)` over all symbols.
    pub max_deviation: f64,
    pub min_w: f64,
    pub max_w: f64,
    pub symbols: usize,
    pub holds: bool,
}

/// Checks that every noiseless received sample equals `√(αδ_k) A_k s_k(n)`.
pub fn verify_simplification(frames: &[FrameSymbols], alpha: f64, tol: f64) -> SimplificationReport {
    let mut report = SimplificationReport {
        max_deviation: 0.0,
        min_w: f64::INFINITY,
        max_w: f64::NEG_INFINITY,
        symbols: 0,
        holds: true,
    };
    for fr in frames {
        let gain = (alpha * fr.delta).sqrt();
        for n in 0..fr.s.len() {
            let ideal = gain * fr.a_target * fr.s[n];
            let dev = match (fr.y.get(n), fr.noise.get(n)) {
                (Some(y), Some(v)) if ideal > 0.0 => ((y - v) - ideal).abs() / ideal,
                (Some(y), Some(v)) => ((y - v) - ideal).abs(),
                _ => f64::INFINITY,
            };
            report.max_deviation = report.max_deviation.max(dev);
            report.min_w = report.min_w.min(fr.w[n]);
            report.max_w = report.max_w.max(fr.w[n]);
            report.symbols += 1;
        }
    }
    report.holds = report.max_deviation <= tol && (frames.is_empty() || (report.min_w > 0.0 && report.max_w <= 1.0));
    report
}

/// `min_n h(x²(n))` over a frame next to `h(A² s_min²)`, which it should equal.
pub fn min_gain_identity(
    prev: &FrameSymbols,
    f: f64,
    delta: f64,
    o: &OpticsParams,
    p: &MediumParams,
) -> Result<(f64, f64)> {
    let mut lowest = f64::INFINITY;
    for &x in &prev.x {
        lowest = lowest.min(link_gain_h(LinkPoint { delta, f, x_sq: x * x }, o, p)?);
    }
    let s_min = prev.s.iter().copied().fold(f64::INFINITY, f64::min);
    let a = prev.a_target * s_min;
    Ok((lowest, link_gain_h(LinkPoint { delta, f, x_sq: a * a }, o, p)?))
}

/// Amplitude and symbol floor for one frame of a simulated chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub a_target: f64,
    pub mu: f64,
}

/// Runs a chain of frames over the first `plan.len()` frames of a horizon.
///
/// Frame `k` is driven by frame `k-1`'s amplitudes carried at that round's frequency and
/// efficiency; `noise = None` gives noiseless reception.
#[allow(clippy::too_many_arguments)]
pub fn simulate_chain<D: SymbolDistribution>(
    h: &HorizonResult,
    plan: &[FramePlan],
    n: usize,
    dist: &D,
    noise: Option<&NoiseParams>,
    seed: u64,
    o: &OpticsParams,
    p: &MediumParams,
) -> Result<Vec<FrameSymbols>> {
    if plan.len() > h.frames.len() {
        return Err(Error::domain(format!(
            "plan has {} frames but the horizon records {}",
            plan.len(),
            h.frames.len()
        )));
    }
    let mut out: Vec<FrameSymbols> = Vec::with_capacity(plan.len());
    for (i, step) in plan.iter().enumerate() {
        let s = draw_on_stream(n, step.mu, dist, seed, i as u64)?;
        let carrier = match out.last() {
            None => Carrier::Stable { p_t: h.p_t },
            Some(prev) => Carrier::Previous { x: &prev.x, f: h.frames[i].f, delta: h.frames[i - 1].delta },
        };
        let mut frame = modulate_frame(carrier, step.a_target, s, i + 1, o, p)?;
        let fr = &h.frames[i];
        let variance = noise.map_or(0.0, |nz| nz.n0 * fr.b);
        transmit_and_receive(&mut frame, fr.delta, o.alpha, &NoiseModel { variance, seed })?;
        out.push(frame);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::horizon::{compute_horizon, CompensationPolicy};
    use crate::scenario::Scenario;

    fn setup() -> (Scenario, HorizonResult) {
        let scn = Scenario::reference(1000.0, 5.0, 0.0, 200.0, 1.0);
        let h = compute_horizon(&scn, &CompensationPolicy::off(), 100).unwrap();
        (scn, h)
    }

    fn bound(prev: &FrameSymbols, mu: f64, h: &HorizonResult, k: usize, scn: &Scenario) -> f64 {
        let a = prev.a_target * mu;
        let pt = LinkPoint { delta: h.frames[k - 1].delta, f: h.frames[k].f, x_sq: a * a };
        link_gain_h(pt, &scn.optics, &scn.medium).unwrap().sqrt()
    }

    #[test]
    fn mu_one_gives_ones() {
        let s = draw_symbols(100, 1.0, &Uniform, 3).unwrap();
        assert!(s.iter().all(|&v| v == 1.0));
        assert!(draw_symbols(4, 1.5, &Uniform, 3).is_err());
    }

    #[test]
    fn uniform_mean_within_clt() {
        let n = 20_000;
        let s = draw_symbols(n, 0.0, &Uniform, 11).unwrap();
        let mean = s.iter().sum::<f64>() / n as f64;
        let sigma = (1.0f64 / 12.0).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma / (n as f64).sqrt(), "{mean}");
        assert!(s.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = draw_symbols(64, 0.3, &Uniform, 5).unwrap();
        assert_eq!(a, draw_symbols(64, 0.3, &Uniform, 5).unwrap());
        assert_ne!(a, draw_symbols(64, 0.3, &Uniform, 6).unwrap());
    }

    #[test]
    fn stable_first_frame() {
        let (scn, h) = setup();
        let mut fr =
            modulate_frame(Carrier::Stable { p_t: h.p_t }, h.p_t.sqrt(), vec![1.0; 16], 1, &scn.optics, &scn.medium)
                .unwrap();
        assert!(fr.w.iter().all(|&w| (w - 1.0).abs() < 1e-15));
        assert!(fr.x.iter().all(|&x| (x / h.p_t.sqrt() - 1.0).abs() < 1e-15));
        let delta = h.frames[0].delta;
        transmit_and_receive(&mut fr, delta, scn.optics.alpha, &NoiseModel { variance: 0.0, seed: 0 }).unwrap();
        let expect = (scn.optics.alpha * delta * h.p_t).sqrt();
        assert!(fr.y.iter().all(|&y| (y / expect - 1.0).abs() < 1e-14));
    }

    #[test]
    fn bound_is_tight_at_smallest_symbol() {
        let (scn, h) = setup();
        let mu = 0.6;
        let mut s1 = draw_symbols(256, mu, &Uniform, 1).unwrap();
        s1[17] = mu;
        let a1 = 0.8 * h.p_t.sqrt();
        let f1 = modulate_frame(Carrier::Stable { p_t: h.p_t }, a1, s1, 1, &scn.optics, &scn.medium).unwrap();
        let a2 = bound(&f1, mu, &h, 1, &scn);
        let carrier = Carrier::Previous { x: &f1.x, f: h.frames[1].f, delta: h.frames[0].delta };
        let s2 = draw_symbols(256, 0.2, &Uniform, 2).unwrap();
        let f2 = modulate_frame(carrier, a2, s2.clone(), 2, &scn.optics, &scn.medium).unwrap();
        let argmax = (0..256).max_by(|&i, &j| f2.w[i].total_cmp(&f2.w[j])).unwrap();
        assert_eq!(argmax, 17);
        assert!((f2.w[17] - 1.0).abs() < 1e-12);

        let over = modulate_frame(carrier, a2 * (1.0 + 1e-6), s2, 2, &scn.optics, &scn.medium);
        match over {
            Err(Error::AmplitudeBound { frame: 2, index: 17, w }) => assert!(w > 1.0),
            other => panic!("expected bound violation, got {other:?}"),
        }
    }

    #[test]
    fn previous_symbols_do_not_leak() {
        let (scn, h) = setup();
        let mu = 0.5;
        let s1 = draw_symbols(64, mu, &Uniform, 7).unwrap();
        let s2 = draw_symbols(64, mu, &Uniform, 8).unwrap();
        let a1 = 0.9 * h.p_t.sqrt();
        let run = |s1: Vec<f64>| {
            let f1 = modulate_frame(Carrier::Stable { p_t: h.p_t }, a1, s1, 1, &scn.optics, &scn.medium).unwrap();
            let a2 = 0.99 * bound(&f1, mu, &h, 1, &scn);
            let carrier = Carrier::Previous { x: &f1.x, f: h.frames[1].f, delta: h.frames[0].delta };
            let mut f2 = modulate_frame(carrier, a2, s2.clone(), 2, &scn.optics, &scn.medium).unwrap();
            transmit_and_receive(&mut f2, h.frames[1].delta, scn.optics.alpha, &NoiseModel { variance: 0.0, seed: 0 })
                .unwrap();
            f2
        };
        let base = run(s1.clone());
        let mut bumped = s1;
        bumped[9] = 1.0 - 0.5 * (1.0 - bumped[9]);
        let moved = run(bumped);
        assert_ne!(base.w[9], moved.w[9]);
        for n in 0..64 {
            assert!((base.y[n] / moved.y[n] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_mean_tracks_symbols() {
        let (scn, h) = setup();
        let n = 4096;
        let s = draw_symbols(n, 0.0, &Uniform, 4).unwrap();
        let a = 0.5 * h.p_t.sqrt();
        let delta = h.frames[0].delta;
        let gain = (scn.optics.alpha * delta).sqrt() * a;
        let sd = 0.2 * gain;
        let mut means = Vec::new();
        for seed in [1, 2] {
            let mut fr =
                modulate_frame(Carrier::Stable { p_t: h.p_t }, a, s.clone(), 1, &scn.optics, &scn.medium).unwrap();
            transmit_and_receive(&mut fr, delta, scn.optics.alpha, &NoiseModel { variance: sd * sd, seed }).unwrap();
            means.push((fr.y.clone(), fr.y.iter().map(|y| y / gain).sum::<f64>() / n as f64));
        }
        let s_mean = s.iter().sum::<f64>() / n as f64;
        let tol = 4.0 * 0.2 / (n as f64).sqrt();
        assert!((means[0].1 - s_mean).abs() < tol);
        assert!((means[1].1 - s_mean).abs() < tol);
        assert_ne!(means[0].0, means[1].0);
    }

    #[test]
    fn chain_satisfies_identity() {
        let (scn, h) = setup();
        let mut plan = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..5 {
            let mu = rng.random_range(0.3..0.9);
            let cap = match prev {
                None => h.p_t.sqrt(),
                Some((a, m)) => {
                    let pt = LinkPoint { delta: h.frames[k - 1].delta, f: h.frames[k].f, x_sq: a * a * m * m };
                    link_gain_h(pt, &scn.optics, &scn.medium).unwrap().sqrt()
                }
            };
            let a = 0.99 * cap;
            plan.push(FramePlan { a_target: a, mu });
            prev = Some((a, mu));
        }
        let frames = simulate_chain(&h, &plan, 1024, &Uniform, None, 21, &scn.optics, &scn.medium).unwrap();
        let report = verify_simplification(&frames, scn.optics.alpha, 1e-12);
        assert!(report.holds, "{report:?}");
        assert_eq!(report.symbols, 5 * 1024);
        for k in 1..5 {
            let (lo, at) =
                min_gain_identity(&frames[k - 1], h.frames[k].f, h.frames[k - 1].delta, &scn.optics, &scn.medium)
                    .unwrap();
            assert!((lo / at - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_chain_decays() {
        let (scn, h) = setup();
        let mut a = vec![h.p_t.sqrt()];
        for k in 1..5 {
            let pt = LinkPoint { delta: h.frames[k - 1].delta, f: h.frames[k].f, x_sq: a[k - 1] * a[k - 1] };
            a.push(link_gain_h(pt, &scn.optics, &scn.medium).unwrap().sqrt());
        }
        let plan: Vec<FramePlan> = a.iter().map(|&a_target| FramePlan { a_target, mu: 1.0 }).collect();
        let frames = simulate_chain(&h, &plan, 8, &Uniform, None, 0, &scn.optics, &scn.medium).unwrap();
        assert!(frames.iter().all(|fr| fr.w.iter().all(|&w| (w - 1.0).abs() < 1e-12)));
        for w in a.windows(2) {
            assert!(w[1] < w[0], "{a:?}");
        }
    }

    #[test]
    fn constant_symbols_give_flat_output() {
        let (scn, h) = setup();
        let plan: Vec<FramePlan> =
            (0..3).map(|k| FramePlan { a_target: 0.5f64.powi(k) * h.p_t.sqrt() * 0.5, mu: 1.0 }).collect();
        let frames = simulate_chain(&h, &plan, 32, &Uniform, None, 0, &scn.optics, &scn.medium).unwrap();
        for fr in &frames {
            assert!(fr.y.iter().all(|&y| y == fr.y[0]));
        }
    }
}
