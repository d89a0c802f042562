//! Link scenario: physical constants, geometry and solver settings, with JSON I/O.
//!
//! A scenario file only needs `p_r_max`; everything else falls back to the reference
//! link (1 km, 5 m/s along the line of sight, 200 W pump).

use serde::{Deserialize, Serialize};

use crate::channel::NoiseParams;
use crate::error::{Error, Result};
use crate::gain_medium::MediumParams;
use crate::horizon::CompensationPolicy;
use crate::kinematics::{Vec3, SPEED_OF_LIGHT};
use crate::link_budget::OpticsParams;
use crate::spca::{LinkContext, SpcaConfig};

pub const DEFAULT_MAX_FRAMES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct Scenario {
    pub optics: OpticsParams,
    pub medium: MediumParams,
    pub q0: Vec3,
    pub v: Vec3,
    /// First-frame bandwidth, Hz.
    pub b1: f64,
    pub n0_dbm_per_hz: f64,
    /// Minimum rate, bit/s.
    pub c_th: f64,
    /// Maximum received signal power, W.
    pub p_r_max: f64,
    pub compensation: CompensationPolicy,
    pub max_frames: usize,
    pub spca: SpcaConfig,
}

impl Scenario {
    /// Reference link with the receiver at `distance` on the x axis moving at `speed`,
    /// `theta0_deg` away from the line of sight within the x-y plane.
    pub fn reference(distance: f64, speed: f64, theta0_deg: f64, p_in: f64, p_r_max: f64) -> Self {
        Scenario {
            optics: OpticsParams::reference(),
            medium: MediumParams::nd_yag(p_in),
            q0: Vec3::new(distance, 0.0, 0.0),
            v: polar_velocity(speed, theta0_deg),
            b1: 1e9,
            n0_dbm_per_hz: -174.0,
            c_th: 0.1,
            p_r_max,
            compensation: CompensationPolicy::off(),
            max_frames: DEFAULT_MAX_FRAMES,
            spca: SpcaConfig::default(),
        }
    }

    pub fn noise(&self) -> NoiseParams {
        NoiseParams { n0: 10f64.powf((self.n0_dbm_per_hz - 30.0) / 10.0) }
    }

    pub fn link_context<'a>(&'a self, noise: &'a NoiseParams) -> LinkContext<'a> {
        LinkContext { optics: &self.optics, medium: &self.medium, noise, p_r_max: self.p_r_max }
    }

    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        self.medium.validate()?;
        self.spca.validate()?;
        let d = self.q0.norm();
        if !(d > 0.0) || !self.q0.is_finite() {
            return Err(Error::config("geometry.q0", "receiver must start away from the transmitter"));
        }
        if !self.v.is_finite() || !(self.v.norm() < SPEED_OF_LIGHT) {
            return Err(Error::config("geometry.v", "speed must be finite and below c"));
        }
        for (field, v) in [("b1", self.b1), ("p_r_max", self.p_r_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(field, format!("must be finite and positive, got {v}")));
            }
        }
        if !(self.c_th >= 0.0) || !self.c_th.is_finite() {
            return Err(Error::config("c_th", format!("must be finite and non-negative, got {}", self.c_th)));
        }
        let n0 = self.noise().n0;
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::config("n0_dbm_per_hz", format!("gives unusable density {n0} W/Hz")));
        }
        if self.max_frames == 0 {
            return Err(Error::config("max_frames", "must be at least 1"));
        }
        if self.compensation.enabled && !(self.compensation.trigger > 0.0) {
            return Err(Error::config("compensation.trigger_hz", "must be positive"));
        }
        Ok(())
    }

    pub fn distance(&self) -> f64 {
        self.q0.norm()
    }

    pub fn speed(&self) -> f64 {
        self.v.norm()
    }

    /// Angle between `q0` and `v` in degrees (0 for a static receiver).
    pub fn theta0_deg(&self) -> f64 {
        match (self.q0.unit(), self.v.unit()) {
            (Some(e), Some(u)) => e.dot(u).clamp(-1.0, 1.0).acos().to_degrees(),
            _ => 0.0,
        }
    }

    /// In-plane basis: `e1` along `q0`, `e2` towards `v` (or a fixed perpendicular).
    fn basis(&self) -> (Vec3, Vec3) {
        let e1 = self.q0.unit().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
        let perp = self.v - e1 * self.v.dot(e1);
        let e2 = match perp.unit() {
            Some(u) if perp.norm() > 1e-12 * self.v.norm() => u,
            _ => {
                let z = Vec3::new(0.0, 0.0, 1.0);
                z.cross(e1).unit().unwrap_or(Vec3::new(0.0, 1.0, 0.0))
            }
        };
        (e1, e2)
    }

    pub fn with_theta0(&self, deg: f64) -> Scenario {
        let (e1, e2) = self.basis();
        let (s, c) = deg.to_radians().sin_cos();
        let mut out = self.clone();
        out.v = (e1 * c + e2 * s) * self.speed();
        out
    }

    pub fn with_speed(&self, speed: f64) -> Scenario {
        let dir = self.v.unit().or_else(|| self.q0.unit()).unwrap_or(Vec3::new(1.0, 0.0, 0.0));
        let mut out = self.clone();
        out.v = dir * speed;
        out
    }

    pub fn with_distance(&self, d: f64) -> Scenario {
        let dir = self.q0.unit().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
        let mut out = self.clone();
        out.q0 = dir * d;
        out
    }

    pub fn with_pin(&self, p_in: f64) -> Scenario {
        let mut out = self.clone();
        out.medium.p_in = p_in;
        out
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // validation errors come back through serde's custom error
            Error::config("scenario", msg)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }
}

fn polar_velocity(speed: f64, theta0_deg: f64) -> Vec3 {
    let (s, c) = theta0_deg.to_radians().sin_cos();
    Vec3::new(speed * c, speed * s, 0.0)
}

impl Default for OpticsParams {
    fn default() -> Self {
        OpticsParams::reference()
    }
}

impl Default for MediumParams {
    fn default() -> Self {
        MediumParams::nd_yag(200.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OpticsFile {
    lambda: f64,
    phi: f64,
    s: f64,
    alpha: f64,
}

impl Default for OpticsFile {
    fn default() -> Self {
        let o = OpticsParams::reference();
        OpticsFile { lambda: o.lambda, phi: o.phi, s: o.s, alpha: o.alpha }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MediumFile {
    f0: f64,
    is0: f64,
    df_h: f64,
    s_g: f64,
    eta: f64,
    p_in: f64,
}

impl Default for MediumFile {
    fn default() -> Self {
        let m = MediumParams::default();
        MediumFile { f0: m.f0, is0: m.is0, df_h: m.df_h, s_g: m.s_g, eta: m.eta, p_in: m.p_in }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum GeometryFile {
    Cartesian {
        q0: Vec3,
        v: Vec3,
    },
    Polar {
        #[serde(default = "default_distance")]
        distance: f64,
        #[serde(default = "default_speed")]
        speed: f64,
        #[serde(default)]
        theta0_deg: f64,
    },
}

fn default_distance() -> f64 {
    1000.0
}

fn default_speed() -> f64 {
    5.0
}

impl Default for GeometryFile {
    fn default() -> Self {
        GeometryFile::Polar { distance: default_distance(), speed: default_speed(), theta0_deg: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum CompensationFile {
    Switch(String),
    Trigger {
        #[serde(default = "yes")]
        enabled: bool,
        trigger_hz: Option<f64>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    optics: OpticsFile,
    #[serde(default)]
    medium: MediumFile,
    #[serde(default)]
    geometry: GeometryFile,
    #[serde(default = "default_b1")]
    b1: f64,
    #[serde(default = "default_n0")]
    n0_dbm_per_hz: f64,
    #[serde(default = "default_c_th")]
    c_th: f64,
    p_r_max: Option<f64>,
    #[serde(default)]
    compensation: Option<CompensationFile>,
    #[serde(default = "default_max_frames")]
    max_frames: usize,
    #[serde(default)]
    spca: SpcaConfig,
}

fn default_b1() -> f64 {
    1e9
}

fn default_n0() -> f64 {
    -174.0
}

fn default_c_th() -> f64 {
    0.1
}

fn default_max_frames() -> usize {
    DEFAULT_MAX_FRAMES
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Scenario> {
        let p_r_max = f.p_r_max.ok_or_else(|| {
            Error::config(
                "p_r_max",
                "required: maximum received signal power in W (no default exists; it bounds A_k² ≤ P_r_max/(αδ_k))",
            )
        })?;
        let medium = MediumParams {
            f0: f.medium.f0,
            is0: f.medium.is0,
            df_h: f.medium.df_h,
            s_g: f.medium.s_g,
            eta: f.medium.eta,
            p_in: f.medium.p_in,
        };
        let (q0, v) = match f.geometry {
            GeometryFile::Cartesian { q0, v } => (q0, v),
            GeometryFile::Polar { distance, speed, theta0_deg } => {
                (Vec3::new(distance, 0.0, 0.0), polar_velocity(speed, theta0_deg))
            }
        };
        let default_trigger = medium.df_h / 4.0;
        let compensation = match f.compensation {
            None => CompensationPolicy::off(),
            Some(CompensationFile::Switch(s)) => match s.as_str() {
                "off" => CompensationPolicy::off(),
                "on" => CompensationPolicy::at(default_trigger),
                other => {
                    return Err(Error::config(
                        "compensation",
                        format!("expected \"on\", \"off\" or an object, got {other:?}"),
                    ))
                }
            },
            Some(CompensationFile::Trigger { enabled: false, .. }) => CompensationPolicy::off(),
            Some(CompensationFile::Trigger { enabled: true, trigger_hz }) => {
                CompensationPolicy::at(trigger_hz.unwrap_or(default_trigger))
            }
        };
        let scn = Scenario {
            optics: OpticsParams { lambda: f.optics.lambda, phi: f.optics.phi, s: f.optics.s, alpha: f.optics.alpha },
            medium,
            q0,
            v,
            b1: f.b1,
            n0_dbm_per_hz: f.n0_dbm_per_hz,
            c_th: f.c_th,
            p_r_max,
            compensation,
            max_frames: f.max_frames,
            spca: f.spca,
        };
        scn.validate()?;
        Ok(scn)
    }
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> ScenarioFile {
        ScenarioFile {
            optics: OpticsFile { lambda: s.optics.lambda, phi: s.optics.phi, s: s.optics.s, alpha: s.optics.alpha },
            medium: MediumFile {
                f0: s.medium.f0,
                is0: s.medium.is0,
                df_h: s.medium.df_h,
                s_g: s.medium.s_g,
                eta: s.medium.eta,
                p_in: s.medium.p_in,
            },
            geometry: GeometryFile::Cartesian { q0: s.q0, v: s.v },
            b1: s.b1,
            n0_dbm_per_hz: s.n0_dbm_per_hz,
            c_th: s.c_th,
            p_r_max: Some(s.p_r_max),
            compensation: Some(if s.compensation.enabled {
                CompensationFile::Trigger { enabled: true, trigger_hz: Some(s.compensation.trigger) }
            } else {
                CompensationFile::Switch("off".into())
            }),
            max_frames: s.max_frames,
            spca: s.spca,
        }
    }
}
