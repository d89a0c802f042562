//! Log-barrier interior-point method for smooth convex problems with banded Hessians.

use crate::error::{Error, Result};

/// Symmetric banded matrix, lower band stored row-major: `data[i*(bw+1)+d] = A[i][i-d]`.
#[derive(Debug, Clone)]
pub(crate) struct Banded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, bw: usize) -> Self {
        Banded { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bw, "entry outside band");
        i * (self.bw + 1) + (i - j)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    /// `D A D` for diagonal `d`.
    fn scale(&mut self, d: &[f64]) {
        for i in 0..self.n {
            for off in 0..=self.bw.min(i) {
                self.data[i * (self.bw + 1) + off] *= d[i] * d[i - off];
            }
        }
    }

    fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.data[i * (self.bw + 1)] += v;
        }
    }

    /// In-place Cholesky `A = L Lᵀ`; false if the matrix is not numerically positive definite.
    pub fn cholesky(&mut self) -> bool {
        let w = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let mut s = self.data[i * w + (i - j)];
                let kmin = lo.max(j.saturating_sub(self.bw));
                for k in kmin..j {
                    s -= self.data[i * w + (i - k)] * self.data[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return false;
                    }
                    self.data[i * w] = s.sqrt();
                } else {
                    self.data[i * w + (i - j)] = s / self.data[j * w];
                }
            }
        }
        true
    }

    /// Solves `L Lᵀ x = b` in place after [`Banded::cholesky`].
    pub fn solve(&self, b: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.data[i * w + (i - k)] * b[k];
            }
            b[i] = s / self.data[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + 1 + self.bw).min(self.n) {
                s -= self.data[k * w + (k - i)] * b[k];
            }
            b[i] = s / self.data[i * w];
        }
    }
}

/// Convex problem `min cᵀx  s.t.  g_j(x) < 0` seen through its log barrier.
pub(crate) trait BarrierProblem {
    fn dim(&self) -> usize;
    fn n_constraints(&self) -> usize;
    fn bandwidth(&self) -> usize;
    /// Linear objective `cᵀx`.
    fn objective(&self, x: &[f64]) -> f64;
    /// Adds `c` to `grad`.
    fn add_objective_gradient(&self, scale: f64, grad: &mut [f64]);
    /// `-Σ ln(-g_j(x))`, or `None` outside the strict interior.
    fn barrier(&self, x: &[f64]) -> Option<f64>;
    /// Adds the barrier gradient and Hessian at a strictly feasible `x`.
    fn add_barrier_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut Banded);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierOptions {
    /// Stop once the barrier gap `m/τ` falls below this fraction of `|cᵀx|`.
    pub gap_rel: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub tau_factor: f64,
    /// Initial gap as a fraction of `|cᵀx0|`.
    pub initial_gap_rel: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct BarrierStats {
    pub newton_steps: usize,
    pub stages: usize,
    pub gap: f64,
}

const MAX_STAGES: usize = 40;
/// Centering tolerance for every stage but the last.
const LOOSE_CENTERING: f64 = 1e-3;
const NOISE_DECREMENT: f64 = 1e-2;

pub(crate) fn minimize<P: BarrierProblem>(
    p: &P,
    x0: Vec<f64>,
    opts: &BarrierOptions,
) -> Result<(Vec<f64>, BarrierStats)> {
    let n = p.dim();
    let m = p.n_constraints() as f64;
    if p.barrier(&x0).is_none() {
        return Err(Error::Infeasible("starting point is not strictly feasible".into()));
    }
    let mut x = x0;
    let mut tau = m / (opts.initial_gap_rel * p.objective(&x).abs().max(1e-300));
    let mut stats = BarrierStats::default();
    let mut grad = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut cost = vec![0.0; n];
    let mut hess = Banded::new(n, p.bandwidth());

    for _ in 0..MAX_STAGES {
        stats.stages += 1;
        // only the last stage has to be centred tightly
        let last = m / tau <= opts.gap_rel * p.objective(&x).abs();
        let centering_tol = if last { opts.newton_tol } else { opts.newton_tol.max(LOOSE_CENTERING) };
        for _ in 0..opts.max_newton {
            grad.iter_mut().for_each(|g| *g = 0.0);
            hess.clear();
            p.add_objective_gradient(tau, &mut grad);
            p.add_barrier_derivatives(&x, &mut grad, &mut hess);

            for i in 0..n {
                let d = hess.get(i, i);
                scale[i] = if d > 0.0 && d.is_finite() { 1.0 / d.sqrt() } else { 1.0 };
            }
            let base = hess.clone();
            let mut reg = 0.0;
            loop {
                hess.clone_from(&base);
                hess.scale(&scale);
                if reg > 0.0 {
                    hess.add_diagonal(reg);
                }
                if hess.cholesky() {
                    break;
                }
                reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
                if reg > 1e6 {
                    return Err(Error::Solver("barrier Hessian is not positive definite".into()));
                }
            }
            for i in 0..n {
                step[i] = -grad[i] * scale[i];
            }
            hess.solve(&mut step);
            for i in 0..n {
                step[i] *= scale[i];
            }
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            if !decrement.is_finite() {
                return Err(Error::Solver("non-finite Newton decrement".into()));
            }
            if decrement / 2.0 <= centering_tol {
                break;
            }

            // τ cᵀx is huge next to the decrement at late stages, so the linear part of
            // the change is taken from the step directly rather than by differencing.
            cost.iter_mut().for_each(|c| *c = 0.0);
            p.add_objective_gradient(tau, &mut cost);
            let linear: f64 = cost.iter().zip(&step).map(|(c, s)| c * s).sum();
            let b0 = p.barrier(&x).expect("iterate stays interior");
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-20 {
                for i in 0..n {
                    trial[i] = x[i] + s * step[i];
                }
                if let Some(b1) = p.barrier(&trial) {
                    if s * linear + (b1 - b0) <= -0.25 * s * decrement {
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            stats.newton_steps += 1;
            if !accepted || trial == x {
                break;
            }
            std::mem::swap(&mut x, &mut trial);
            // Close to the centre a full step is always acceptable in exact arithmetic;
            // refusing it means the barrier differences are down at rounding level.
            if s < 1.0 && decrement < NOISE_DECREMENT {
                break;
            }
        }
        stats.gap = m / tau;
        if stats.gap <= opts.gap_rel * p.objective(&x).abs() {
            break;
        }
        tau *= opts.tau_factor;
    }
    Ok((x, stats))
}
