//! Receiver kinematics across reflection rounds.
//!
//! The transmitter sits at the origin. The receiver starts at `q0` and moves with
//! constant velocity `v`; one frame is carried per transmitter-receiver-transmitter
//! round, and every round shifts the carrier by the two-way Doppler factor.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Cartesian 3-vector. Positions in metres, velocities in metres per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn unit(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Geometry of the k-th reflection round, evaluated at its start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundGeometry {
    pub k: u64,
    pub q_prev: Vec3,
    pub cos_theta: f64,
    pub f_prev: f64,
    pub duration: f64,
    pub bandwidth: f64,
}

fn nonzero_norm(q: Vec3, what: &str) -> Result<f64> {
    let n = q.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::domain(format!("{what} must have a finite non-zero norm")));
    }
    Ok(n)
}

/// Receiver position after one round: `q + 2‖q‖v/c`.
pub fn advance_position(q_prev: Vec3, v: Vec3) -> Result<Vec3> {
    let d = nonzero_norm(q_prev, "receiver position (transmitter and receiver coincide)")?;
    Ok(q_prev + v * (2.0 * d / SPEED_OF_LIGHT))
}

/// Cosine of the angle between the receiver position and its velocity, clamped to [-1, 1].
pub fn direction_cosine(q: Vec3, v: Vec3) -> Result<f64> {
    let nq = nonzero_norm(q, "receiver position")?;
    let nv = nonzero_norm(v, "receiver velocity")?;
    Ok((v.dot(q) / (nv * nq)).clamp(-1.0, 1.0))
}

/// Carrier after one more round of two-way Doppler shift.
pub fn next_frequency(f_prev: f64, speed: f64, cos_theta: f64) -> f64 {
    f_prev * (1.0 - 2.0 * speed * cos_theta / SPEED_OF_LIGHT)
}

/// Round duration `2‖q‖/c`, treating the distance as constant over the round.
pub fn round_duration(q_prev: Vec3) -> f64 {
    2.0 * q_prev.norm() / SPEED_OF_LIGHT
}

/// Nyquist bandwidth for `n` symbols in one round: `n c / (4‖q‖)`.
pub fn frame_bandwidth(n: u64, q_prev: Vec3) -> f64 {
    n as f64 * SPEED_OF_LIGHT / (4.0 * q_prev.norm())
}

/// Symbols per frame, fixed from the first-frame bandwidth and rounded down so the
/// first frame never exceeds `b1`.
pub fn symbols_per_frame(b1: f64, q0: Vec3) -> Result<u64> {
    let d = nonzero_norm(q0, "initial receiver position")?;
    let n = (4.0 * b1 * d / SPEED_OF_LIGHT).floor();
    if !(n >= 1.0) {
        return Err(Error::domain(format!("first-frame bandwidth {b1} Hz at {d} m carries less than one symbol")));
    }
    Ok(n as u64)
}

/// Iterator over successive round geometries for a receiver on a straight line.
///
/// Frequency evolves with the accumulated Doppler factor; callers that model an
/// external frequency reset may overwrite it with [`Rounds::reset_frequency`].
#[derive(Debug, Clone)]
pub struct Rounds {
    k: u64,
    q: Vec3,
    v: Vec3,
    speed: f64,
    f: f64,
    n_symbols: u64,
}

impl Rounds {
    pub fn new(q0: Vec3, v: Vec3, f0: f64, n_symbols: u64) -> Result<Self> {
        nonzero_norm(q0, "initial receiver position")?;
        let speed = v.norm();
        if !(speed < SPEED_OF_LIGHT) {
            return Err(Error::domain("receiver speed must be finite and below c"));
        }
        Ok(Rounds { k: 0, q: q0, v, speed, f: f0, n_symbols })
    }

    /// Position at the start of the next round.
    pub fn position(&self) -> Vec3 {
        self.q
    }

    /// Carrier at the start of the next round.
    pub fn frequency(&self) -> f64 {
        self.f
    }

    pub fn reset_frequency(&mut self, f: f64) {
        self.f = f;
    }

    fn cosine(&self) -> Result<f64> {
        if self.speed == 0.0 {
            // static receiver: no Doppler term regardless of the angle
            return Ok(0.0);
        }
        direction_cosine(self.q, self.v)
    }
}

impl Iterator for Rounds {
    type Item = Result<RoundGeometry>;

    fn next(&mut self) -> Option<Self::Item> {
        let step = (|| {
            let cos_theta = self.cosine()?;
            let geom = RoundGeometry {
                k: self.k + 1,
                q_prev: self.q,
                cos_theta,
                f_prev: self.f,
                duration: round_duration(self.q),
                bandwidth: frame_bandwidth(self.n_symbols, self.q),
            };
            self.q = advance_position(self.q, self.v)?;
            self.f = next_frequency(self.f, self.speed, cos_theta);
            self.k += 1;
            Ok(geom)
        })();
        Some(step)
    }
}
