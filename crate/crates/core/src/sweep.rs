//! Single steady-state solves and (gamma_D, kdT) sweeps.

use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::bath::{all_channels, DissipatorChannel};
use crate::dynamics::{assemble_liouvillian, slowest_decay_rate, steady_state, SteadyStateReport, Superoperator};
use crate::error::{Error, Result};
use crate::lattice::{Config, DeviceSpec, PhysParams, SweepSpec};
use crate::operators::{assemble_hamiltonian, eigendecompose, HermitianOperator};
use crate::thermo::{observe, AuxObservables, ObservablesRecord, ObservationInput};

/// Everything produced by one steady-state solve.
#[derive(Debug, Clone)]
pub struct PointSolution {
    pub params: PhysParams,
    pub h: HermitianOperator,
    pub channels: Vec<DissipatorChannel>,
    pub liouvillian: Superoperator,
    pub steady: SteadyStateReport,
    pub record: ObservablesRecord,
    pub aux: AuxObservables,
}

/// Builds the generator for `params` on `device`.
pub fn build_generator(device: &DeviceSpec, params: &PhysParams) -> Result<(HermitianOperator, Vec<DissipatorChannel>, Superoperator)> {
    params.validate().map_err(|e| e.in_stage("parameters"))?;
    let h = assemble_hamiltonian(device);
    let spec = eigendecompose(&h).map_err(|e| e.in_stage("hamiltonian"))?;
    let channels = all_channels(device, params, &spec).map_err(|e| e.in_stage("bath channels"))?;
    let l = assemble_liouvillian(&h, &channels, params.mode).map_err(|e| e.in_stage("liouvillian"))?;
    Ok((h, channels, l))
}

/// Device, operators, channels, generator, steady state and observables.
pub fn solve_point(device: &DeviceSpec, params: &PhysParams, top_bond: usize, bottom_bond: usize) -> Result<PointSolution> {
    let (h, channels, liouvillian) = build_generator(device, params)?;
    let steady = steady_state(&liouvillian).map_err(|e| e.in_stage("steady state"))?;
    let (record, aux) = observe(&ObservationInput {
        device,
        params,
        h: &h,
        channels: &channels,
        rho: steady.rho_ss.matrix(),
        rho_precise: Some(&steady.rho_precise),
        top_bond,
        bottom_bond,
        residual: steady.residual,
        min_eig: steady.min_eigenvalue,
    })
    .map_err(|e| e.in_stage("observables"))?;
    Ok(PointSolution { params: params.clone(), h, channels, liouvillian, steady, record, aux })
}

pub fn run_steady(config: &Config) -> Result<(ObservablesRecord, AuxObservables)> {
    let s = solve_point(&config.device, &config.params, config.cut.top_bond, config.cut.bottom_bond)?;
    Ok((s.record, s.aux))
}

/// Observer strength at which `2 gamma^2` is this many times the slowest
/// relaxation rate of the unobserved generator.
pub const GAMMA_SPAN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCalibration {
    pub slowest_rate: f64,
    pub gamma_max: f64,
}

/// Picks `gamma_max` from the slowest decay rate of the generator at
/// `gamma_D = 0`, `kdT = 0`.
pub fn calibrate_gamma_max(device: &DeviceSpec, params: &PhysParams) -> Result<GammaCalibration> {
    let base = PhysParams { gamma_d: 0.0, observer_site: None, kdt: 0.0, ..params.clone() };
    let (_, _, l) = build_generator(device, &base)?;
    let spectrum = l.spectrum().map_err(|e| e.in_stage("calibration spectrum"))?;
    let scale = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let slowest_rate = slowest_decay_rate(&spectrum, 1e-12 * scale).ok_or_else(|| {
        Error::InvalidDevice("generator has no decaying mode to calibrate the observer range against".into())
    })?;
    Ok(GammaCalibration { slowest_rate, gamma_max: (GAMMA_SPAN * slowest_rate / 2.0).sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub gamma_values: Vec<f64>,
    pub kdt_values: Vec<f64>,
    pub observer_site: Option<usize>,
}

fn linspace(max: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![0.0];
    }
    (0..steps).map(|i| max * i as f64 / (steps - 1) as f64).collect()
}

impl SweepGrid {
    /// Grid from the sweep section; `gamma_max` must already be resolved.
    /// Without an observer site the gamma axis collapses to `[0]`.
    pub fn new(spec: &SweepSpec, gamma_max: f64, observer_site: Option<usize>, kt_e: f64) -> Result<Self> {
        if spec.kdt_steps == 0 || spec.gamma_steps == 0 {
            return Err(Error::Domain { what: "sweep steps", value: 0.0, requirement: "at least 1" });
        }
        if !(spec.kdt_max >= 0.0 && spec.kdt_max < kt_e) {
            return Err(Error::Domain { what: "kdT_max", value: spec.kdt_max, requirement: "in [0, kT_E)" });
        }
        if !(gamma_max >= 0.0 && gamma_max.is_finite()) {
            return Err(Error::Domain { what: "gamma_max", value: gamma_max, requirement: "finite and non-negative" });
        }
        let gamma_values = match observer_site {
            Some(_) => linspace(gamma_max, spec.gamma_steps),
            None => vec![0.0],
        };
        Ok(SweepGrid { gamma_values, kdt_values: linspace(spec.kdt_max, spec.kdt_steps), observer_site })
    }

    pub fn len(&self) -> usize {
        self.gamma_values.len() * self.kdt_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(gamma_D, kdT)` of row `index`, kdT outer and gamma_D inner.
    pub fn point(&self, index: usize) -> (f64, f64) {
        let ng = self.gamma_values.len();
        (self.gamma_values[index % ng], self.kdt_values[index / ng])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl Provenance {
    pub fn now(config_hash: &str) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Provenance { config_hash: config_hash.to_string(), version: env!("CARGO_PKG_VERSION").to_string(), timestamp }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepRow {
    Ok(ObservablesRecord),
    Failed { gamma_d: f64, kdt: f64, message: String },
}

impl SweepRow {
    pub fn record(&self) -> Option<&ObservablesRecord> {
        match self {
            SweepRow::Ok(r) => Some(r),
            SweepRow::Failed { .. } => None,
        }
    }

    pub fn coordinates(&self) -> (f64, f64) {
        match self {
            SweepRow::Ok(r) => (r.gamma_d, r.kdt),
            SweepRow::Failed { gamma_d, kdt, .. } => (*gamma_d, *kdt),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub rows: Vec<SweepRow>,
    pub calibration: Option<GammaCalibration>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
    /// Record failed points as error rows instead of aborting.
    pub keep_going: bool,
}

/// Resolves the grid of `config`, calibrating `gamma_max` when unset.
pub fn resolve_grid(config: &Config) -> Result<(SweepGrid, Option<GammaCalibration>)> {
    let observer_site = config.params.observer_site;
    let (gamma_max, calibration) = match (config.sweep.gamma_max, observer_site) {
        (Some(g), _) => (g, None),
        (None, None) => (0.0, None),
        (None, Some(_)) => {
            let c = calibrate_gamma_max(&config.device, &config.params)?;
            log::info!("slowest relaxation rate {:e}, gamma_max = {:e}", c.slowest_rate, c.gamma_max);
            (c.gamma_max, Some(c))
        }
    };
    Ok((SweepGrid::new(&config.sweep, gamma_max, observer_site, config.params.kt_e)?, calibration))
}

/// One solve per grid point. The first failure aborts unless `keep_going`.
pub fn run_sweep(config: &Config, options: SweepOptions) -> Result<SweepResult> {
    let (grid, calibration) = resolve_grid(config)?;
    let rows = run_grid(&config.device, &config.params, &grid, config.cut.top_bond, config.cut.bottom_bond, options)?;
    Ok(SweepResult { grid, rows, calibration, provenance: Provenance::now(&config.source_hash) })
}

/// Solves every point of `grid` with the remaining parameters from `base`.
pub fn run_grid(
    device: &DeviceSpec,
    base: &PhysParams,
    grid: &SweepGrid,
    top_bond: usize,
    bottom_bond: usize,
    options: SweepOptions,
) -> Result<Vec<SweepRow>> {
    let solve = |index: usize| -> Result<ObservablesRecord> {
        let (gamma_d, kdt) = grid.point(index);
        let params = PhysParams { gamma_d, kdt, observer_site: grid.observer_site, ..base.clone() };
        solve_point(device, &params, top_bond, bottom_bond)
            .map(|s| s.record)
            .map_err(|e| Error::SweepPoint { gamma_d, kdt, source: Box::new(e) })
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidDevice(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<ObservablesRecord>> = pool.install(|| (0..grid.len()).into_par_iter().map(solve).collect());
    let mut rows = Vec::with_capacity(outcomes.len());
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => rows.push(SweepRow::Ok(r)),
            Err(e) if options.keep_going => {
                log::error!("{e}");
                let (gamma_d, kdt) = grid.point(index);
                rows.push(SweepRow::Failed { gamma_d, kdt, message: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}
