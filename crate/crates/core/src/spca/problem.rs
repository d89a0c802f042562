//! Convex restriction around a reference point, in barrier form.
//!
//! Variables per frame `k` (offset `4k`): `ν`, `a`, scaled power
//! `p̃ = P / (c_k e^{a_ref} (1-μ_ref)²)` and spectral efficiency `t`. Every nonlinear
//! constraint is divided by a positive reference scale so that frames whose power is
//! tens of decades apart stay well conditioned.

use super::barrier::{Banded, BarrierProblem};

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy)]
pub(crate) struct FrameTerms {
    pub weight: f64,
    pub a_max: f64,
    /// Power per unit of `p̃`, W.
    pub scale: f64,
    /// High-SNR constant: `2 scale / (πe n0 B)`.
    pub kappa: f64,
    /// Low-SNR constant: `scale / (n0 B)`.
    pub lambda: f64,
    pub nu_ref: f64,
    pub a_ref: f64,
    /// `μ_ref = e^{ν_ref}` and `1 - μ_ref`, the latter without cancellation.
    pub mu_ref: f64,
    pub span_ref: f64,
}

/// `e^z - 1 - z`.
fn exp_rem(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        z * z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0))))
    } else {
        z.exp_m1() - z
    }
}

/// Tangent of the coupling bound on `e^{a_k}`, divided by `x_ref = e^{2ν_ref+a_ref}` of
/// the previous frame: `e^{a_k - z_ref} ≤ rho + sigma (z - z_ref)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CouplingTerms {
    pub rho: f64,
    pub sigma: f64,
    pub z_ref: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Subproblem {
    pub beta: f64,
    pub frames: Vec<FrameTerms>,
    /// `couplings[k-1]` bounds frame `k`, for `k ≥ 1`.
    pub couplings: Vec<CouplingTerms>,
}

/// One constraint value with its sparse gradient and Hessian (local, at most 3 variables).
struct Term {
    g: f64,
    idx: [usize; 3],
    grad: [f64; 3],
    /// Upper triangle of the local Hessian, row-major over `idx`: (0,0) (1,0) (1,1) (2,0) (2,1) (2,2).
    hess: [f64; 6],
    len: usize,
}

impl Term {
    fn affine(g: f64, i: usize, d: f64) -> Term {
        Term { g, idx: [i, 0, 0], grad: [d, 0.0, 0.0], hess: [0.0; 6], len: 1 }
    }
}

impl Subproblem {
    fn high_rate(fr: &FrameTerms, p: f64) -> (f64, f64, f64) {
        // ψ(p) = ln(1 + r), r = sqrt(κ p), in bits
        let r = (fr.kappa * p).sqrt();
        let v = r.ln_1p() / LN_2;
        let d1 = r / (2.0 * p * (1.0 + r)) / LN_2;
        let d2 = -r * (1.0 + 2.0 * r) / (4.0 * p * p * (1.0 + r) * (1.0 + r)) / LN_2;
        (v, d1, d2)
    }

    fn low_rate(fr: &FrameTerms, p: f64) -> (f64, f64, f64) {
        let q = 1.0 + fr.lambda * p;
        (
            0.5 * (fr.lambda * p).ln_1p() / LN_2,
            0.5 * fr.lambda / q / LN_2,
            -0.5 * fr.lambda * fr.lambda / (q * q) / LN_2,
        )
    }

    /// Visits every constraint; stops early (returning false) if `visit` does.
    fn for_each_term(&self, x: &[f64], mut visit: impl FnMut(&Term) -> bool) -> bool {
        for (k, fr) in self.frames.iter().enumerate() {
            let (iv, ia, ip, it) = (4 * k, 4 * k + 1, 4 * k + 2, 4 * k + 3);
            let (nu, a, p, t) = (x[iv], x[ia], x[ip], x[it]);
            let simple = [
                Term::affine(nu, iv, 1.0),
                Term::affine(self.beta - nu, iv, -1.0),
                Term::affine(self.beta - a, ia, -1.0),
                Term::affine(a - fr.a_max, ia, 1.0),
                Term::affine(-p, ip, -1.0),
            ];
            for term in &simple {
                if !visit(term) {
                    return false;
                }
            }
            if !(p > 0.0) {
                return false;
            }

            // Peak power, divided by c e^{a_ref} (1-μ_ref)². Expanded about the reference
            // so that the O(1) terms cancel analytically: near μ = 1 the slack is
            // (1-μ)² and would otherwise drown in rounding.
            let dn = nu - fr.nu_ref;
            let da = a - fr.a_ref;
            let z = dn + da;
            let curv = 2.0 * fr.mu_ref / (fr.span_ref * fr.span_ref);
            let lin = 2.0 * fr.mu_ref / fr.span_ref;
            let ez = curv * z.exp();
            let em1 = curv * z.exp_m1();
            let power = Term {
                g: curv * exp_rem(z) + lin * dn - da - 1.0 + p,
                idx: [iv, ia, ip],
                grad: [em1 + lin, em1 - 1.0, 1.0],
                hess: [ez, ez, ez, 0.0, 0.0, 0.0],
                len: 3,
            };
            if !visit(&power) {
                return false;
            }

            let (hv, h1, h2) = Self::high_rate(fr, p);
            let (lv, l1, l2) = Self::low_rate(fr, p);
            for (v, d1, d2) in [(hv, h1, h2), (lv, l1, l2)] {
                let rate = Term {
                    g: t - v,
                    idx: [ip, it, 0],
                    grad: [-d1, 1.0, 0.0],
                    hess: [-d2, 0.0, 0.0, 0.0, 0.0, 0.0],
                    len: 2,
                };
                if !visit(&rate) {
                    return false;
                }
            }

            if k >= 1 {
                let cp = &self.couplings[k - 1];
                let (jv, ja) = (4 * (k - 1), 4 * (k - 1) + 1);
                let prev = &self.frames[k - 1];
                let dz = 2.0 * (x[jv] - prev.nu_ref) + (x[ja] - prev.a_ref);
                let ec = (a - cp.z_ref).exp();
                let coupling = Term {
                    g: ec - cp.rho - cp.sigma * dz,
                    idx: [jv, ja, ia],
                    grad: [-2.0 * cp.sigma, -cp.sigma, ec],
                    hess: [0.0, 0.0, 0.0, 0.0, 0.0, ec],
                    len: 3,
                };
                if !visit(&coupling) {
                    return false;
                }
            }
        }
        true
    }
}

impl BarrierProblem for Subproblem {
    fn dim(&self) -> usize {
        4 * self.frames.len()
    }

    fn n_constraints(&self) -> usize {
        8 * self.frames.len() + self.couplings.len()
    }

    fn bandwidth(&self) -> usize {
        5
    }

    fn objective(&self, x: &[f64]) -> f64 {
        -self.frames.iter().enumerate().map(|(k, fr)| fr.weight * x[4 * k + 3]).sum::<f64>()
    }

    fn add_objective_gradient(&self, scale: f64, grad: &mut [f64]) {
        for (k, fr) in self.frames.iter().enumerate() {
            grad[4 * k + 3] -= scale * fr.weight;
        }
    }

    fn barrier(&self, x: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        let ok = self.for_each_term(x, |term| {
            if term.g < 0.0 {
                total -= (-term.g).ln();
                true
            } else {
                false
            }
        });
        (ok && total.is_finite()).then_some(total)
    }

    fn add_barrier_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut Banded) {
        self.for_each_term(x, |term| {
            let inv = 1.0 / -term.g;
            let mut slot = 0;
            for r in 0..term.len {
                grad[term.idx[r]] += term.grad[r] * inv;
                for c in 0..=r {
                    let v = term.grad[r] * term.grad[c] * inv * inv + term.hess[slot] * inv;
                    slot += 1;
                    if v != 0.0 {
                        hess.add(term.idx[r], term.idx[c], v);
                    }
                }
            }
            true
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Subproblem, Vec<f64>) {
        let frames: Vec<FrameTerms> = (0..3)
            .map(|k| {
                let nu_ref: f64 = -0.05 - 0.4 * k as f64;
                FrameTerms {
                    weight: 1.0 + 0.1 * k as f64,
                    a_max: 5.0,
                    scale: 1.0,
                    kappa: 3.0e3,
                    lambda: 2.0e3,
                    nu_ref,
                    a_ref: 1.0 - 0.2 * k as f64,
                    mu_ref: nu_ref.exp(),
                    span_ref: -nu_ref.exp_m1(),
                }
            })
            .collect();
        let couplings = vec![
            CouplingTerms { rho: 1.0, sigma: 0.8, z_ref: 0.9 },
            CouplingTerms { rho: 1.1, sigma: 0.7, z_ref: 0.6 },
        ];
        let sub = Subproblem { beta: -50.0, frames, couplings };
        // strictly interior: small power, modest rate
        let x = vec![-0.06, 1.0, 0.3, 1.0, -0.45, 0.8, 0.2, 1.0, -0.8, 0.55, 0.1, 0.5];
        (sub, x)
    }

    #[test]
    fn sample_point_is_interior() {
        let (sub, x) = sample();
        assert!(sub.barrier(&x).is_some());
    }

    #[test]
    fn barrier_derivatives_match_differences() {
        let (sub, x) = sample();
        let n = x.len();
        let mut grad = vec![0.0; n];
        let mut hess = Banded::new(n, sub.bandwidth());
        sub.add_barrier_derivatives(&x, &mut grad, &mut hess);
        let h = 1e-6;
        let shifted = |i: usize, d: f64| {
            let mut y = x.clone();
            y[i] += d;
            y
        };
        for i in 0..n {
            let fd = (sub.barrier(&shifted(i, h)).unwrap() - sub.barrier(&shifted(i, -h)).unwrap()) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0), "grad {i}: {fd} vs {}", grad[i]);

            let mut gp = vec![0.0; n];
            let mut gm = vec![0.0; n];
            let mut scratch = Banded::new(n, sub.bandwidth());
            sub.add_barrier_derivatives(&shifted(i, h), &mut gp, &mut scratch);
            sub.add_barrier_derivatives(&shifted(i, -h), &mut gm, &mut scratch);
            for j in i.saturating_sub(sub.bandwidth())..=i {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                let an = hess.get(i, j);
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "hess ({i},{j}): {fd} vs {an}");
            }
        }
    }

    #[test]
    fn expansion_remainder_is_smooth() {
        for z in [-0.3f64, -1e-2, -9.99e-3, -1e-4, 0.0, 1e-6, 1e-3, 9.99e-3, 1e-2, 0.5] {
            let (mut term, mut series) = (z, 0.0);
            for n in 2..25 {
                term *= z / n as f64;
                series += term;
            }
            assert!((exp_rem(z) - series).abs() <= 1e-13 * series.abs(), "{z}");
        }
    }
}
