use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rbcom::frame_sim::{simulate_chain, verify_simplification, FramePlan, Uniform};
use rbcom::gain_medium::{solve_gain, GainQuery};
use rbcom::horizon::{compute_horizon, CompensationPolicy};
use rbcom::scenario::Scenario;
use rbcom::spca::spca_optimize;
use rbcom_cli::output::{self, Format, Simulation};
use rbcom_cli::sweep::{run_sweep, AxisValues, Column, SweepSpec};
use rbcom_cli::{exit_code, load_scenario, parse_compensation, EXIT_CONFIG, EXIT_NOT_CONVERGED};

#[derive(Parser)]
#[command(name = "rbcom", version, about = "Mobile resonant-beam link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Seed for randomised starts and symbol draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    max_frames: Option<usize>,
    /// Doppler compensation trigger in Hz, or `off`.
    #[arg(long, global = true, value_parser = parse_compensation)]
    compensate: Option<CompensationPolicy>,
}

#[derive(Subcommand)]
enum Command {
    /// Frame horizon until the rate drops below threshold.
    Horizon,
    /// Throughput-optimal symbol floors and amplitudes over the horizon.
    Optimize,
    /// Symbol-level run over the first frames, driven by an optimised plan.
    Simulate {
        #[arg(long, default_value_t = 5)]
        frames: usize,
        #[arg(long, default_value_t = 1024)]
        symbols: usize,
        #[arg(long)]
        noiseless: bool,
    },
    /// Grid sweep, one row per point.
    Sweep {
        /// `axis=v1,v2,...` with axis one of theta0, speed, Pin, q0_norm; repeat for a grid.
        #[arg(long = "sweep", required = true)]
        axes: Vec<AxisValues>,
        /// Comma-separated subset of K0, T_up, moved, throughput, omega.
        #[arg(long, value_delimiter = ',')]
        outputs: Vec<Column>,
    },
    /// Gain against detuning at I_s/1000, I_s/10 and I_s.
    GainCurve {
        #[arg(long, default_value_t = 300.0)]
        span_ghz: f64,
        #[arg(long, default_value_t = 1.0)]
        step_ghz: f64,
    },
}

fn config_error(field: &str, msg: impl Into<String>) -> anyhow::Error {
    rbcom::Error::Config { field: field.into(), msg: msg.into() }.into()
}

fn scenario(c: &Common) -> anyhow::Result<Scenario> {
    let path = c.scenario.as_ref().ok_or_else(|| config_error("--scenario", "a scenario file is required"))?;
    let mut scn = load_scenario(path)?;
    if let Some(n) = c.max_frames {
        scn.max_frames = n;
    }
    if let Some(p) = c.compensate {
        scn.compensation = p;
    }
    if let Some(s) = c.seed {
        scn.spca.seed = Some(s);
    }
    scn.validate()?;
    Ok(scn)
}

fn sink(c: &Common) -> anyhow::Result<Box<dyn Write>> {
    Ok(match &c.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let c = &cli.common;
    let scn = scenario(c)?;
    match cli.command {
        Command::Horizon => {
            let h = compute_horizon(&scn, &scn.compensation, scn.max_frames)?;
            match c.format {
                Format::Csv => output::write_horizon_csv(&h, sink(c)?)?,
                Format::Json => output::write_json(&h, sink(c)?)?,
            }
        }
        Command::Optimize => {
            let h = compute_horizon(&scn, &scn.compensation, scn.max_frames)?;
            if h.k0 == 0 {
                return Err(config_error(
                    "scenario",
                    "horizon is empty: the first frame already misses the rate threshold",
                ));
            }
            let noise = scn.noise();
            let sol = spca_optimize(&h, &scn.link_context(&noise), &scn.spca)?;
            match c.format {
                Format::Csv => output::write_solution_csv(&h, &sol, sink(c)?)?,
                Format::Json => output::write_json(&sol, sink(c)?)?,
            }
            if !sol.converged {
                eprintln!("warning: outer loop stopped after {} iterations without converging", sol.iterations);
                return Ok(EXIT_NOT_CONVERGED);
            }
        }
        Command::Simulate { frames, symbols, noiseless } => {
            let full = compute_horizon(&scn, &scn.compensation, scn.max_frames.min(frames))?;
            let h = full.truncated(full.k0.min(frames));
            if h.k0 == 0 {
                return Err(config_error("scenario", "horizon is empty"));
            }
            let noise = scn.noise();
            let sol = spca_optimize(&h, &scn.link_context(&noise), &scn.spca)?;
            let plan: Vec<FramePlan> = sol
                .a_opt
                .iter()
                .zip(&sol.mu_opt)
                .map(|(&a_target, &mu)| FramePlan { a_target, mu: mu.clamp(0.0, 1.0) })
                .collect();
            let seed = c.seed.unwrap_or(0);
            let nz = (!noiseless).then_some(&noise);
            let sim = simulate_chain(&h, &plan, symbols, &Uniform, nz, seed, &scn.optics, &scn.medium)?;
            let report = verify_simplification(&sim, scn.optics.alpha, 1e-12);
            eprintln!(
                "{} symbols, max deviation {:e}, w in [{:e}, {:e}]",
                report.symbols, report.max_deviation, report.min_w, report.max_w
            );
            match c.format {
                Format::Csv => output::write_symbols_csv(&sim, sink(c)?)?,
                Format::Json => output::write_json(&Simulation { report, frames: &sim }, sink(c)?)?,
            }
        }
        Command::Sweep { axes, outputs } => {
            let spec = SweepSpec::new(axes, &outputs).map_err(|m| config_error("--sweep", m))?;
            let rows = run_sweep(&scn, &spec, c.seed);
            match c.format {
                Format::Csv => output::write_sweep_csv(&rows, &spec, sink(c)?)?,
                Format::Json => output::write_json(&rows, sink(c)?)?,
            }
        }
        Command::GainCurve { span_ghz, step_ghz } => {
            if !(span_ghz > 0.0 && step_ghz > 0.0) {
                return Err(config_error("--span-ghz/--step-ghz", "must be positive"));
            }
            let p = &scn.medium;
            let steps = (span_ghz / step_ghz).round() as i64;
            let detuning: Vec<f64> = (-steps..=steps).map(|i| i as f64 * step_ghz * 1e9).collect();
            let levels = [("G_Is_1000", 1e-3), ("G_Is_10", 0.1), ("G_Is", 1.0)];
            let mut gains = Vec::new();
            for (_, frac) in levels {
                let g = detuning
                    .iter()
                    .map(|d| solve_gain(GainQuery { i_in: frac * p.is0, f: p.f0 + d }, p))
                    .collect::<rbcom::Result<Vec<_>>>()?;
                gains.push(g);
            }
            let labels: Vec<String> = levels.iter().map(|(l, _)| l.to_string()).collect();
            output::write_gain_csv(&detuning, &labels, &gains, sink(c)?)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
