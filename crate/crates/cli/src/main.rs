//! `qobs`: steady states, sweeps, validation and propagation from a config file.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qobs_core::dynamics::{propagate, steady_state, trace_distance, DensityMatrix};
use qobs_core::error::Error;
use qobs_core::lattice::{parse_config, Config};
use qobs_core::linalg;
use qobs_core::output::{emit_csv, emit_heatmap, emit_provenance, grid_data_path, provenance_path, write_csv};
use qobs_core::sweep::{build_generator, run_steady, run_sweep, SweepOptions, SweepRow};
use qobs_core::thermo::{observe, ObservablesRecord, ObservationInput};
use qobs_core::validate::run_validate;

#[derive(Parser)]
#[command(name = "qobs", version, about = "Heat and particle transport in an observed two-branch device")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one steady state and print its observables as CSV.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve every (gamma_D, kdT) point of the sweep grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Column to render as a heatmap.
        #[arg(long, requires = "img")]
        heatmap: Option<String>,
        #[arg(long, requires = "heatmap")]
        img: Option<PathBuf>,
        #[arg(long, env = "QOBS_WORKERS")]
        workers: Option<usize>,
        /// Write ERR rows for failed points instead of aborting.
        #[arg(long)]
        keep_going: bool,
    },
    /// Run the built-in invariant checks.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Propagate from the maximally mixed state with RK4 and compare with the
    /// null-space steady state.
    Propagate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "t")]
        t: f64,
        #[arg(long)]
        dt: f64,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;

enum Failure {
    Config(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

fn load(path: &Path) -> Result<Config, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_out(out: Option<&Path>, rows: &[SweepRow]) -> Result<(), Failure> {
    let io_fail = |e: &dyn std::fmt::Display| Failure::Solver(format!("cannot write output: {e}"));
    match out {
        Some(p) => {
            let file = fs::File::create(p).map_err(|e| io_fail(&format!("{}: {e}", p.display())))?;
            write_csv(rows, file).map_err(|e| io_fail(&e))
        }
        None => write_csv(rows, io::stdout().lock()).map_err(|e| io_fail(&e)),
    }
}

fn steady(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let config = load(config)?;
    let (record, aux) = run_steady(&config)?;
    write_out(out, &[SweepRow::Ok(record)])?;
    eprintln!("j_p_down = {:e}", aux.j_p_down);
    if let Some(side) = aux.observer {
        eprintln!(
            "observer site {}: j_p before/after = {:e} / {:e}, j_h before/after = {:e} / {:e}",
            side.site, side.j_p_before, side.j_p_after, side.j_h_before, side.j_h_after
        );
    }
    eprintln!("observer entropy flow = {:e}", aux.observer_entropy_flow);
    Ok(())
}

fn sweep(config: &Path, out: &Path, heatmap: Option<(&str, &Path)>, options: SweepOptions) -> Result<(), Failure> {
    let config = load(config)?;
    if let Some((column, _)) = heatmap {
        ObservablesRecord::column_index(column).map_err(|e| Failure::Config(e.to_string()))?;
    }
    let result = run_sweep(&config, options)?;
    if let Some(c) = result.calibration {
        eprintln!("auto-calibrated gamma_max = {:e} (slowest relaxation rate {:e})", c.gamma_max, c.slowest_rate);
    }
    emit_csv(&result, out)?;
    emit_provenance(&result, &provenance_path(out))?;
    let failed = result.rows.iter().filter(|r| r.record().is_none()).count();
    eprintln!("{} points written to {} ({failed} failed)", result.rows.len(), out.display());
    if let Some((column, img)) = heatmap {
        let s = emit_heatmap(&result, column, img)?;
        eprintln!(
            "{column}: range [{:e}, {:e}], sign change: {}; image {}, data {}",
            s.min,
            s.max,
            if s.has_sign_change { "yes" } else { "no" },
            img.display(),
            grid_data_path(img).display()
        );
    }
    Ok(())
}

fn validate(config: &Path) -> Result<bool, Failure> {
    let config = load(config)?;
    let report = run_validate(&config);
    println!("{report}");
    Ok(report.all_passed())
}

fn propagate_cmd(config: &Path, t: f64, dt: f64) -> Result<(), Failure> {
    let config = load(config)?;
    let (h, channels, l) = build_generator(&config.device, &config.params)?;
    let rho0 = DensityMatrix::maximally_mixed(h.dim());
    let rho_t = propagate(&rho0, &l, t, dt)?;
    let ss = steady_state(&l)?;
    let rho = rho_t.matrix();
    let (record, _) = observe(&ObservationInput {
        device: &config.device,
        params: &config.params,
        h: &h,
        channels: &channels,
        rho,
        rho_precise: None,
        top_bond: config.cut.top_bond,
        bottom_bond: config.cut.bottom_bond,
        residual: linalg::frobenius(&l.apply(rho)?),
        min_eig: rho_t.eigenvalues()?[0],
    })?;
    write_out(None, &[SweepRow::Ok(record)])?;
    let distance = trace_distance(rho, ss.rho_ss.matrix())?;
    let deviation = linalg::max_abs_diff(rho, ss.rho_ss.matrix());
    eprintln!("t = {t:e}: trace distance to steady state {distance:e}, largest elementwise deviation {deviation:e}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Steady { config, out } => steady(config, out.as_deref()).map(|_| true),
        Command::Sweep { config, out, heatmap, img, workers, keep_going } => {
            let map = heatmap.as_deref().zip(img.as_deref());
            sweep(config, out, map, SweepOptions { workers: *workers, keep_going: *keep_going }).map(|_| true)
        }
        Command::Validate { config } => validate(config),
        Command::Propagate { config, t, dt } => propagate_cmd(config, *t, *dt).map(|_| true),
    };
    let _ = io::stdout().flush();
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_SOLVER),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}
