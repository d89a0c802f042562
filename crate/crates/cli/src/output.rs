//! CSV and JSON emitters. Floats are written with 12 significant digits.

use std::io::Write;

use rbcom::frame_sim::{FrameSymbols, SimplificationReport};
use rbcom::horizon::HorizonResult;
use rbcom::spca::SpcaSolution;
use serde::Serialize;

use crate::sweep::{Column, Row, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn float(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn sweep_header(spec: &SweepSpec) -> Vec<String> {
    let mut h: Vec<String> = spec.axes.iter().map(|a| a.axis.name().to_string()).collect();
    h.extend(spec.outputs.iter().map(|c| c.name().to_string()));
    if spec.needs_optimizer() {
        h.push("converged".into());
    }
    h.push("error".into());
    h
}

pub fn write_sweep_csv<W: Write>(rows: &[Row], spec: &SweepSpec, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sweep_header(spec))?;
    for row in rows {
        let mut rec: Vec<String> = row.point.iter().map(|p| float(p.value)).collect();
        for c in &spec.outputs {
            rec.push(match c {
                Column::K0 => row.k0.map(|k| k.to_string()).unwrap_or_default(),
                Column::TUp => opt_float(row.t_up),
                Column::Moved => opt_float(row.moved),
                Column::Throughput => opt_float(row.throughput),
                Column::Omega => opt_float(row.omega),
            });
        }
        if spec.needs_optimizer() {
            rec.push(row.converged.map(|c| c.to_string()).unwrap_or_default());
        }
        rec.push(row.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut out: W) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub const HORIZON_HEADER: [&str; 10] =
    ["k", "q_norm", "cos_theta", "f", "delta", "T", "B", "A_sq_max", "capacity", "counted"];

/// One row per recorded frame plus the probe frame (`counted = false`).
pub fn write_horizon_csv<W: Write>(h: &HorizonResult, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HORIZON_HEADER)?;
    for (fr, counted) in h.frames.iter().map(|f| (f, true)).chain(std::iter::once((&h.probe, false))) {
        w.write_record([
            fr.k.to_string(),
            float(fr.q.norm()),
            float(fr.cos_theta),
            float(fr.f),
            float(fr.delta),
            float(fr.t),
            float(fr.b),
            float(fr.a_sq),
            float(fr.capacity),
            counted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_solution_csv<W: Write>(h: &HorizonResult, sol: &SpcaSolution, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "mu", "A", "P", "T", "B"])?;
    for k in 0..sol.mu_opt.len() {
        let fr = &h.frames[k];
        w.write_record([
            fr.k.to_string(),
            float(sol.mu_opt[k]),
            float(sol.a_opt[k]),
            float(sol.p_opt[k]),
            float(fr.t),
            float(fr.b),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_symbols_csv<W: Write>(frames: &[FrameSymbols], out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "n", "s", "w", "x", "y"])?;
    for fr in frames {
        for n in 0..fr.s.len() {
            w.write_record([
                fr.k.to_string(),
                n.to_string(),
                float(fr.s[n]),
                float(fr.w[n]),
                float(fr.x[n]),
                float(fr.y[n]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Simulation<'a> {
    pub report: SimplificationReport,
    pub frames: &'a [FrameSymbols],
}

/// Gain curves over a detuning grid, one column per input intensity.
pub fn write_gain_csv<W: Write>(detuning: &[f64], labels: &[String], gains: &[Vec<f64>], out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["detuning_hz".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (i, d) in detuning.iter().enumerate() {
        let mut rec = vec![float(*d)];
        rec.extend(gains.iter().map(|g| float(g[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
