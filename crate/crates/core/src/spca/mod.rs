//! Throughput maximisation over the frame horizon by sequential convex approximation.
//!
//! With `μ_k = e^{ν_k}` and `A_k = e^{a_k/2}` the coupling and peak-power constraints
//! become differences of convex functions. Each outer iteration replaces their concave
//! parts by tangents at the previous solution and solves the resulting convex problem
//! with a log-barrier method.

mod barrier;
mod linearize;
mod problem;

pub use linearize::{
    coupling_concave, linearize_l1, linearize_l1_gradient, linearize_l2, linearize_l2_gradient, power_concave,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{capacity_approx, high_snr_efficiency, low_snr_efficiency, NoiseParams};
use crate::error::{Error, Result};
use crate::gain_medium::{small_signal_exponent, MediumParams};
use crate::horizon::HorizonResult;
use crate::link_budget::{link_gain_h, link_gain_with_slope, LinkPoint, OpticsParams};

use barrier::{BarrierOptions, BarrierProblem};
use problem::{CouplingTerms, FrameTerms, Subproblem};

/// How the gain bound between consecutive frames is linearised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    /// Tangent of the exact `h(e^z)` in `z`. `h(e^z)` is convex, so the tangent is a
    /// lower bound and every iterate satisfies the exact gain bound.
    Exact,
    /// `h(x) ≈ e^{2 g0 l} (1-α) δ² x`, the unsaturated gain. Overstates `h` once the
    /// medium saturates, so iterates may violate the exact bound.
    SmallSignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpcaConfig {
    /// Lower box bound on `ν` and `a`.
    pub beta: f64,
    /// Outer stop on the step length in `(ν, a, P)`.
    pub epsilon: f64,
    pub max_outer: usize,
    pub coupling: CouplingModel,
    /// Barrier gap relative to the objective at which an inner solve stops.
    pub inner_gap: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Randomises the starting floors `μ_k` when set.
    pub seed: Option<u64>,
}

impl Default for SpcaConfig {
    fn default() -> Self {
        SpcaConfig {
            beta: -1000.0,
            epsilon: 0.01,
            max_outer: 200,
            coupling: CouplingModel::Exact,
            inner_gap: 1e-10,
            newton_tol: 1e-10,
            max_newton: 200,
            seed: None,
        }
    }
}

impl SpcaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta < 0.0) || !self.beta.is_finite() {
            return Err(Error::config("spca.beta", "must be finite and negative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("spca.epsilon", "must be positive"));
        }
        if self.max_outer == 0 {
            return Err(Error::config("spca.max_outer", "must be at least 1"));
        }
        if !(self.inner_gap > 0.0) || !(self.newton_tol > 0.0) || self.max_newton == 0 {
            return Err(Error::config("spca", "inner tolerances must be positive"));
        }
        Ok(())
    }
}

/// Optimisation variables in log form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcaVars {
    pub nu: Vec<f64>,
    pub a: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
}

impl SpcaVars {
    pub fn mu(&self) -> Vec<f64> {
        self.nu.iter().map(|v| v.exp()).collect()
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.a.iter().map(|v| (0.5 * v).exp()).collect()
    }

    fn distance(&self, other: &SpcaVars) -> f64 {
        let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        (sq(&self.nu, &other.nu) + sq(&self.a, &other.a) + sq(&self.p, &other.p)).sqrt()
    }
}

/// Worst violations of the original problem's constraints, with `h` evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `max (A_k² - bound_k) / bound_k` over the gain bounds (including `A_1² ≤ P_t`).
    pub gain_bound: f64,
    /// Same for the received-power cap.
    pub power_cap: f64,
    /// Same for `P_k ≤ (1-μ_k)² α δ_k A_k² / 4`.
    pub peak_power: f64,
    pub mu_in_range: bool,
}

impl FeasibilityReport {
    pub fn worst(&self) -> f64 {
        self.gain_bound.max(self.power_cap).max(self.peak_power)
    }

    pub fn holds(&self, rel: f64) -> bool {
        self.mu_in_range && self.worst() <= rel
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcaSolution {
    pub mu_opt: Vec<f64>,
    #[serde(rename = "A_opt")]
    pub a_opt: Vec<f64>,
    #[serde(rename = "P_opt")]
    pub p_opt: Vec<f64>,
    /// bits.
    pub throughput: f64,
    /// bits/J.
    pub omega: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Throughput of the start and of every outer iterate.
    pub history: Vec<f64>,
    pub feasibility: FeasibilityReport,
    pub vars: SpcaVars,
}

/// Everything the optimiser needs besides the horizon.
#[derive(Debug, Clone, Copy)]
pub struct LinkContext<'a> {
    pub optics: &'a OpticsParams,
    pub medium: &'a MediumParams,
    pub noise: &'a NoiseParams,
    pub p_r_max: f64,
}

/// Delivered bits per joule of pump energy.
pub fn energy_efficiency(throughput: f64, p_in: f64, t_up: f64) -> Result<f64> {
    if !(t_up > 0.0) || !(p_in > 0.0) {
        return Err(Error::domain("energy efficiency needs positive pump power and time"));
    }
    Ok(throughput / (p_in * t_up))
}

/// `Σ T_k C(P_k, B_k)`, bits.
pub fn throughput(h: &HorizonResult, p: &[f64], noise: &NoiseParams) -> f64 {
    h.frames.iter().zip(p).map(|(fr, &pk)| fr.t * capacity_approx(pk, fr.b, noise)).sum()
}

fn amplitude_cap(k: usize, h: &HorizonResult, ctx: &LinkContext) -> f64 {
    let fr = &h.frames[k];
    let cap = ctx.p_r_max / (ctx.optics.alpha * fr.delta);
    if k == 0 {
        cap.min(h.p_t)
    } else {
        cap
    }
}

fn gain_point(k: usize, h: &HorizonResult, x_sq: f64) -> LinkPoint {
    // A_k² ≤ h(A²_{k-1} μ²_{k-1}, f_{k-1}, δ_{k-1})
    LinkPoint { delta: h.frames[k - 1].delta, f: h.frames[k].f, x_sq }
}

/// Checks `(μ, A², P)` against the original constraints.
pub fn check_feasibility(
    mu: &[f64],
    a_sq: &[f64],
    p: &[f64],
    h: &HorizonResult,
    ctx: &LinkContext,
) -> Result<FeasibilityReport> {
    let rel = |v: f64, bound: f64| {
        if v <= bound {
            0.0
        } else {
            (v - bound) / bound.abs().max(v.abs()).max(f64::MIN_POSITIVE)
        }
    };
    let mut report =
        FeasibilityReport { mu_in_range: mu.iter().all(|m| (0.0..=1.0).contains(m)), ..Default::default() };
    for k in 0..h.k0 {
        let gain = if k == 0 {
            h.p_t
        } else {
            link_gain_h(gain_point(k, h, a_sq[k - 1] * mu[k - 1] * mu[k - 1]), ctx.optics, ctx.medium)?
        };
        report.gain_bound = report.gain_bound.max(rel(a_sq[k], gain));
        let cap = ctx.p_r_max / (ctx.optics.alpha * h.frames[k].delta);
        report.power_cap = report.power_cap.max(rel(a_sq[k], cap));
        let span = 1.0 - mu[k];
        let peak = span * span * ctx.optics.alpha * h.frames[k].delta * a_sq[k] / 4.0;
        report.peak_power = report.peak_power.max(rel(p[k], peak));
        if p[k] < 0.0 {
            report.peak_power = f64::INFINITY;
        }
    }
    Ok(report)
}

/// Spectral efficiency of the capacity approximation, bits/s/Hz.
fn efficiency(p: f64, b: f64, noise: &NoiseParams) -> f64 {
    let snr = p / (noise.n0 * b);
    high_snr_efficiency(snr).min(low_snr_efficiency(snr))
}

const START_FLOORS: [f64; 8] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999];
const START_GAIN_MARGIN: f64 = 1.0 - 1e-3;
const START_POWER_MARGIN: f64 = 0.9;

/// Strictly feasible point built by running the gain recursion forward with the given
/// floors, keeping each `A_k²` just inside its bound and `P_k` at 90% of the peak power.
fn chain_start(mu: &[f64], h: &HorizonResult, ctx: &LinkContext) -> Result<(SpcaVars, Vec<f64>)> {
    let n = h.k0;
    let mut vars = SpcaVars { nu: Vec::with_capacity(n), a: Vec::with_capacity(n), p: Vec::with_capacity(n) };
    let mut a_sq_prev = 0.0;
    for k in 0..n {
        let bound = if k == 0 {
            amplitude_cap(0, h, ctx)
        } else {
            let g = link_gain_h(gain_point(k, h, a_sq_prev * mu[k - 1] * mu[k - 1]), ctx.optics, ctx.medium)?;
            g.min(amplitude_cap(k, h, ctx))
        };
        let a_sq = START_GAIN_MARGIN * bound;
        let span = 1.0 - mu[k];
        let peak = span * span * ctx.optics.alpha * h.frames[k].delta * a_sq / 4.0;
        vars.nu.push(mu[k].ln());
        vars.a.push(a_sq.ln());
        vars.p.push(START_POWER_MARGIN * peak);
        a_sq_prev = a_sq;
    }
    let t = h.frames.iter().zip(&vars.p).map(|(fr, &p)| efficiency(p, fr.b, ctx.noise) - 0.1).collect();
    Ok((vars, t))
}

fn feasible_start(h: &HorizonResult, ctx: &LinkContext, cfg: &SpcaConfig) -> Result<(SpcaVars, Vec<f64>)> {
    let floor = 0.5 * cfg.beta;
    let acceptable = |v: &SpcaVars| v.a.iter().all(|&a| a.is_finite() && a >= floor);
    if let Some(seed) = cfg.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..64 {
            let mu: Vec<f64> = (0..h.k0).map(|_| rng.random_range(0.5..0.999)).collect();
            let (v, t) = chain_start(&mu, h, ctx)?;
            if acceptable(&v) {
                return Ok((v, t));
            }
        }
    }
    let mut best: Option<(f64, SpcaVars, Vec<f64>)> = None;
    for &m in &START_FLOORS {
        let (v, t) = chain_start(&vec![m; h.k0], h, ctx)?;
        if !acceptable(&v) {
            continue;
        }
        let thr = throughput(h, &v.p, ctx.noise);
        if best.as_ref().is_none_or(|(b, _, _)| thr > *b) {
            best = Some((thr, v, t));
        }
    }
    best.map(|(_, v, t)| (v, t))
        .ok_or_else(|| Error::Infeasible("no starting floor keeps the gain recursion above the lower box bound".into()))
}

fn build_subproblem(
    reference: &SpcaVars,
    h: &HorizonResult,
    ctx: &LinkContext,
    cfg: &SpcaConfig,
) -> Result<Subproblem> {
    let n = h.k0;
    let mean_weight = h.frames.iter().map(|f| f.t * f.b).sum::<f64>() / n as f64;
    let pe = std::f64::consts::PI * std::f64::consts::E;
    let mut frames = Vec::with_capacity(n);
    for (k, fr) in h.frames.iter().enumerate() {
        let c = ctx.optics.alpha * fr.delta / 4.0;
        let mu_ref = reference.nu[k].exp();
        let span_ref = (-reference.nu[k].exp_m1()).max(1e-150);
        let scale = c * reference.a[k].exp() * span_ref * span_ref;
        let nb = ctx.noise.n0 * fr.b;
        frames.push(FrameTerms {
            weight: fr.t * fr.b / mean_weight,
            a_max: amplitude_cap(k, h, ctx).ln(),
            scale,
            kappa: 2.0 * scale / (pe * nb),
            lambda: scale / nb,
            nu_ref: reference.nu[k],
            a_ref: reference.a[k],
            mu_ref,
            span_ref,
        });
    }
    let mut couplings = Vec::with_capacity(n.saturating_sub(1));
    for k in 1..n {
        let z_ref = 2.0 * reference.nu[k - 1] + reference.a[k - 1];
        let pt = gain_point(k, h, z_ref.exp());
        let (rho, sigma) = match cfg.coupling {
            CouplingModel::SmallSignal => {
                let coeff = (2.0 * small_signal_exponent(pt.f, ctx.medium)).exp()
                    * (1.0 - ctx.optics.alpha)
                    * pt.delta
                    * pt.delta;
                (coeff, coeff)
            }
            CouplingModel::Exact => {
                let (gain, slope) = link_gain_with_slope(pt, ctx.optics, ctx.medium)?;
                let loss = (1.0 - ctx.optics.alpha) * pt.delta * pt.delta;
                // h/x from the gain itself so that x → 0 stays finite
                let ratio = if pt.x_sq > 0.0 { gain / pt.x_sq } else { slope.max(loss) };
                (ratio, slope)
            }
        };
        couplings.push(CouplingTerms { rho, sigma, z_ref });
    }
    Ok(Subproblem { beta: cfg.beta, frames, couplings })
}

fn pack(vars: &SpcaVars, t: &[f64], sub: &Subproblem) -> Vec<f64> {
    let mut x = Vec::with_capacity(4 * vars.nu.len());
    for k in 0..vars.nu.len() {
        x.extend_from_slice(&[vars.nu[k], vars.a[k], vars.p[k] / sub.frames[k].scale, t[k]]);
    }
    x
}

fn unpack(x: &[f64], sub: &Subproblem) -> (SpcaVars, Vec<f64>) {
    let n = sub.frames.len();
    let mut vars = SpcaVars { nu: Vec::with_capacity(n), a: Vec::with_capacity(n), p: Vec::with_capacity(n) };
    let mut t = Vec::with_capacity(n);
    for k in 0..n {
        vars.nu.push(x[4 * k]);
        vars.a.push(x[4 * k + 1]);
        vars.p.push(x[4 * k + 2] * sub.frames[k].scale);
        t.push(x[4 * k + 3]);
    }
    (vars, t)
}

fn barrier_options(cfg: &SpcaConfig) -> BarrierOptions {
    BarrierOptions {
        gap_rel: cfg.inner_gap,
        newton_tol: cfg.newton_tol,
        max_newton: cfg.max_newton,
        tau_factor: 100.0,
        initial_gap_rel: 1e-2,
    }
}

/// Solves one convex restriction around `reference`, returning the new point and the
/// spectral-efficiency epigraph values.
pub fn solve_subproblem(
    reference: &SpcaVars,
    t_ref: &[f64],
    h: &HorizonResult,
    ctx: &LinkContext,
    cfg: &SpcaConfig,
) -> Result<(SpcaVars, Vec<f64>)> {
    let sub = build_subproblem(reference, h, ctx, cfg)?;
    let x0 = pack(reference, t_ref, &sub);
    if sub.barrier(&x0).is_none() {
        return Err(Error::Infeasible("reference point violates the convex restriction".into()));
    }
    let (x, _) = barrier::minimize(&sub, x0, &barrier_options(cfg))?;
    Ok(unpack(&x, &sub))
}

/// Maximises throughput over the horizon.
pub fn spca_optimize(h: &HorizonResult, ctx: &LinkContext, cfg: &SpcaConfig) -> Result<SpcaSolution> {
    cfg.validate()?;
    if h.k0 == 0 {
        return Err(Error::domain("horizon has no frames to optimise"));
    }
    if !(ctx.p_r_max > 0.0) {
        return Err(Error::config("p_r_max", "must be positive"));
    }
    let (mut current, mut t) = feasible_start(h, ctx, cfg)?;
    let mut history = vec![throughput(h, &current.p, ctx.noise)];
    let mut best = (history[0], current.clone());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_outer {
        iterations += 1;
        let (next, t_next) = solve_subproblem(&current, &t, h, ctx, cfg)?;
        let step = next.distance(&current);
        let thr = throughput(h, &next.p, ctx.noise);
        history.push(thr);
        if thr >= best.0 {
            best = (thr, next.clone());
        }
        current = next;
        t = t_next;
        if step < cfg.epsilon {
            converged = true;
            break;
        }
    }
    let vars = if converged { current } else { best.1 };
    finish(vars, h, ctx, iterations, converged, history)
}

fn finish(
    vars: SpcaVars,
    h: &HorizonResult,
    ctx: &LinkContext,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
) -> Result<SpcaSolution> {
    let mu = vars.mu();
    let a = vars.amplitude();
    let a_sq: Vec<f64> = vars.a.iter().map(|v| v.exp()).collect();
    let feasibility = check_feasibility(&mu, &a_sq, &vars.p, h, ctx)?;
    let thr = throughput(h, &vars.p, ctx.noise);
    Ok(SpcaSolution {
        mu_opt: mu,
        a_opt: a,
        p_opt: vars.p.clone(),
        throughput: thr,
        omega: energy_efficiency(thr, ctx.medium.p_in, h.t_up)?,
        iterations,
        converged,
        history,
        feasibility,
        vars,
    })
}
