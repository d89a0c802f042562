//! Scenario loading, sweeps and tabular output for the `rbcom` binary.

pub mod output;
pub mod sweep;

use std::path::Path;

use anyhow::Context;
use rbcom::horizon::CompensationPolicy;
use rbcom::scenario::Scenario;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_THRESHOLD: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("loading scenario {}", path.display()))
}

/// `off`, or a trigger detuning in Hz.
pub fn parse_compensation(s: &str) -> Result<CompensationPolicy, String> {
    if s.eq_ignore_ascii_case("off") {
        return Ok(CompensationPolicy::off());
    }
    match s.parse::<f64>() {
        Ok(hz) if hz > 0.0 && hz.is_finite() => Ok(CompensationPolicy::at(hz)),
        _ => Err(format!("expected `off` or a positive trigger in Hz, got `{s}`")),
    }
}

/// Process exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use rbcom::Error;
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::BelowThreshold { .. } => EXIT_THRESHOLD,
            Error::Infeasible(_) | Error::Solver(_) => EXIT_NOT_CONVERGED,
            Error::Config { .. } | Error::Domain(_) | Error::AmplitudeBound { .. } => EXIT_CONFIG,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_CONFIG;
    }
    1
}
