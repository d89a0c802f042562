//! Cartesian parameter sweeps over a base scenario.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rbcom::horizon::{compute_horizon, compute_horizon_summary, HorizonResult};
use rbcom::scenario::Scenario;
use rbcom::spca::spca_optimize;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "theta0")]
    Theta0,
    #[serde(rename = "speed")]
    Speed,
    #[serde(rename = "Pin")]
    Pin,
    #[serde(rename = "q0_norm")]
    Q0Norm,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Theta0 => "theta0",
            Axis::Speed => "speed",
            Axis::Pin => "Pin",
            Axis::Q0Norm => "q0_norm",
        }
    }

    fn apply(self, scn: &Scenario, value: f64) -> Scenario {
        match self {
            Axis::Theta0 => scn.with_theta0(value),
            Axis::Speed => scn.with_speed(value),
            Axis::Pin => scn.with_pin(value),
            Axis::Q0Norm => scn.with_distance(value),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "theta0" => Ok(Axis::Theta0),
            "speed" => Ok(Axis::Speed),
            "Pin" | "pin" | "p_in" => Ok(Axis::Pin),
            "q0_norm" | "distance" => Ok(Axis::Q0Norm),
            _ => Err(format!("unknown sweep axis `{s}` (expected theta0, speed, Pin or q0_norm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Column {
    #[serde(rename = "K0")]
    K0,
    #[serde(rename = "T_up")]
    TUp,
    #[serde(rename = "moved")]
    Moved,
    #[serde(rename = "throughput")]
    Throughput,
    #[serde(rename = "omega")]
    Omega,
}

impl Column {
    pub const HORIZON: [Column; 3] = [Column::K0, Column::TUp, Column::Moved];

    pub fn name(self) -> &'static str {
        match self {
            Column::K0 => "K0",
            Column::TUp => "T_up",
            Column::Moved => "moved",
            Column::Throughput => "throughput",
            Column::Omega => "omega",
        }
    }

    fn needs_optimizer(self) -> bool {
        matches!(self, Column::Throughput | Column::Omega)
    }
}

impl FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "K0" | "k0" => Ok(Column::K0),
            "T_up" | "t_up" => Ok(Column::TUp),
            "moved" => Ok(Column::Moved),
            "throughput" => Ok(Column::Throughput),
            "omega" => Ok(Column::Omega),
            _ => Err(format!("unknown output `{s}` (expected K0, T_up, moved, throughput or omega)")),
        }
    }
}

/// One `axis=v1,v2,...` flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisValues {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl FromStr for AxisValues {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, list) = s.split_once('=').ok_or_else(|| format!("expected axis=v1,v2,..., got `{s}`"))?;
        let axis: Axis = name.trim().parse()?;
        let values = list
            .split(',')
            .map(|v| {
                let v = v.trim();
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| format!("`{v}` is not a finite number for {axis}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AxisValues { axis, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<AxisValues>,
    pub outputs: Vec<Column>,
}

impl SweepSpec {
    pub fn new(axes: Vec<AxisValues>, outputs: &[Column]) -> Result<Self, String> {
        if axes.is_empty() {
            return Err("at least one sweep axis is required".into());
        }
        for (i, a) in axes.iter().enumerate() {
            if a.values.is_empty() {
                return Err(format!("sweep axis {} has no values", a.axis));
            }
            if axes[..i].iter().any(|b| b.axis == a.axis) {
                return Err(format!("sweep axis {} given twice", a.axis));
            }
        }
        let mut outputs = if outputs.is_empty() { Column::HORIZON.to_vec() } else { outputs.to_vec() };
        outputs.sort();
        outputs.dedup();
        Ok(SweepSpec { axes, outputs })
    }

    pub fn needs_optimizer(&self) -> bool {
        self.outputs.iter().any(|c| c.needs_optimizer())
    }

    /// Grid points with the first axis varying slowest.
    pub fn points(&self) -> Vec<Vec<(Axis, f64)>> {
        let mut out = vec![Vec::new()];
        for a in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    a.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((a.axis, v));
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisValue {
    pub axis: Axis,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub point: Vec<AxisValue>,
    #[serde(rename = "K0")]
    pub k0: Option<usize>,
    #[serde(rename = "T_up")]
    pub t_up: Option<f64>,
    pub moved: Option<f64>,
    pub throughput: Option<f64>,
    pub omega: Option<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

fn point_scenario(base: &Scenario, point: &[(Axis, f64)]) -> Scenario {
    // angle last, so it is measured against the final q0 and v
    let mut scn = base.clone();
    for &(axis, v) in point.iter().filter(|(a, _)| *a != Axis::Theta0) {
        scn = axis.apply(&scn, v);
    }
    for &(axis, v) in point.iter().filter(|(a, _)| *a == Axis::Theta0) {
        scn = axis.apply(&scn, v);
    }
    scn
}

fn fill_horizon(row: &mut Row, h: &HorizonResult) {
    row.k0 = Some(h.k0);
    row.t_up = Some(h.t_up);
    row.moved = Some(h.moved);
}

/// Runs a single grid point; failures land in `row.error`.
pub fn run_point(base: &Scenario, point: &[(Axis, f64)], optimize: bool, seed: Option<u64>) -> Row {
    let mut row = Row {
        point: point.iter().map(|&(axis, value)| AxisValue { axis, value }).collect(),
        k0: None,
        t_up: None,
        moved: None,
        throughput: None,
        omega: None,
        converged: None,
        error: None,
    };
    let scn = point_scenario(base, point);
    if let Err(e) = scn.validate() {
        row.error = Some(e.to_string());
        return row;
    }
    if !optimize {
        match compute_horizon_summary(&scn, &scn.compensation, scn.max_frames) {
            Ok(h) => fill_horizon(&mut row, &h),
            Err(e) => row.error = Some(e.to_string()),
        }
        return row;
    }
    let h = match compute_horizon(&scn, &scn.compensation, scn.max_frames) {
        Ok(h) => h,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    fill_horizon(&mut row, &h);
    if h.k0 == 0 {
        row.throughput = Some(0.0);
        row.omega = Some(0.0);
        row.converged = Some(true);
        return row;
    }
    let noise = scn.noise();
    let mut cfg = scn.spca;
    if seed.is_some() {
        cfg.seed = seed;
    }
    match spca_optimize(&h, &scn.link_context(&noise), &cfg) {
        Ok(sol) => {
            row.throughput = Some(sol.throughput);
            row.omega = Some(sol.omega);
            row.converged = Some(sol.converged);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Evaluates every grid point, in parallel, keeping grid order.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec, seed: Option<u64>) -> Vec<Row> {
    let optimize = spec.needs_optimizer();
    spec.points().par_iter().map(|p| run_point(base, p, optimize, seed)).collect()
}
