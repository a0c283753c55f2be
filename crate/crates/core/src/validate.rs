//! Built-in invariant checks for one configuration.

use std::fmt;

use crate::dynamics::{gibbs_state, trace_distance, RESIDUAL_REL_TOL};
use crate::error::Result;
use crate::lattice::{Config, DeviceKind, DeviceSpec, DissipatorMode, NamedSite, PhysParams};
use crate::linalg;
use crate::operators::eigendecompose;
use crate::sweep::{solve_point, PointSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Reported but not counted.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn bound(&mut self, name: &'static str, measured: f64, tolerance: f64, detail: impl Into<String>) {
        let status = if measured <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        self.checks.push(Check { name, status, measured, tolerance, detail: detail.into() });
    }

    fn info(&mut self, name: &'static str, measured: f64, detail: impl Into<String>) {
        self.checks.push(Check { name, status: CheckStatus::Info, measured, tolerance: f64::NAN, detail: detail.into() });
    }

    fn failed(&mut self, name: &'static str, detail: impl Into<String>) {
        self.checks.push(Check { name, status: CheckStatus::Fail, measured: f64::NAN, tolerance: f64::NAN, detail: detail.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Info => "INFO",
            };
            write!(f, "{tag} {:<34} measured={:.3e}", c.name, c.measured)?;
            if c.tolerance.is_finite() {
                write!(f, " tol={:.1e}", c.tolerance)?;
            }
            if !c.detail.is_empty() {
                write!(f, "  {}", c.detail)?;
            }
            writeln!(f)?;
        }
        let failed = self.checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

pub const CONSERVATION_TOL: f64 = 1e-9;
pub const EQUILIBRIUM_TOL: f64 = 1e-9;
pub const GIBBS_DISTANCE_TOL: f64 = 1e-3;
pub const SECOND_LAW_TOL: f64 = 1e-10;
pub const OBSERVER_ENTROPY_TOL: f64 = 1e-12;
pub const MIRROR_TOL: f64 = 1e-8;
pub const STRUCTURE_TOL: f64 = 1e-12;
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Gradient used for the flow checks when the configuration has none.
pub const PROBE_KDT: f64 = 1e-3;
/// Observer strength used when the configuration has no observer.
pub const PROBE_GAMMA: f64 = 0.02;

/// Magnitude below which flows and currents count as numerically zero in
/// relative comparisons.
pub const FLOW_FLOOR: f64 = 1e-20;

/// `defect / max(scale, FLOW_FLOOR)`.
pub fn relative_defect(defect: f64, scale: f64) -> f64 {
    defect / scale.max(FLOW_FLOOR)
}

/// Operating point of the flow checks: the configured point, with a thermal
/// gradient and an observer at beta substituted when absent.
pub fn operating_point(device: &DeviceSpec, params: &PhysParams) -> PhysParams {
    let mut p = params.clone();
    if p.kdt == 0.0 {
        p.kdt = PROBE_KDT;
    }
    if p.observer_site.is_none() || p.gamma_d == 0.0 {
        p.observer_site = Some(p.observer_site.unwrap_or(device.site(NamedSite::Beta)));
        p.gamma_d = PROBE_GAMMA;
    }
    p
}

fn solve(config: &Config, params: &PhysParams) -> Result<PointSolution> {
    solve_point(&config.device, params, config.cut.top_bond, config.cut.bottom_bond)
}

fn equilibrium_checks(config: &Config, report: &mut ValidationReport) {
    let p = PhysParams { kdt: 0.0, gamma_d: 0.0, observer_site: None, ..config.params.clone() };
    let s = match solve(config, &p) {
        Ok(s) => s,
        Err(e) => return report.failed("equilibrium_solve", e.to_string()),
    };
    let gibbs = eigendecompose(&s.h).and_then(|spec| gibbs_state(&spec, p.kt_e));
    match gibbs {
        Ok(g) => {
            let stationary = s.liouvillian.apply(g.matrix()).map(|r| linalg::frobenius(&r));
            match stationary {
                Ok(r) => report.bound("gibbs_stationary", r, RESIDUAL_REL_TOL * s.steady.sigma_max, "|L vec(rho_Gibbs)|"),
                Err(e) => report.failed("gibbs_stationary", e.to_string()),
            }
            match trace_distance(s.steady.rho_ss.matrix(), g.matrix()) {
                Ok(d) => report.bound("gibbs_relaxation", d, GIBBS_DISTANCE_TOL, "trace distance of steady state to Gibbs"),
                Err(e) => report.failed("gibbs_relaxation", e.to_string()),
            }
        }
        Err(e) => report.failed("gibbs_stationary", e.to_string()),
    }
    let r = &s.record;
    let flows = [r.j_p_up, r.j_h_up, r.j_h_down, r.qdot_h, r.qdot_c, r.qdot_d, s.aux.j_p_down];
    let largest = flows.iter().map(|v| v.abs()).fold(0.0, f64::max);
    report.bound("equilibrium_flows", largest, EQUILIBRIUM_TOL, "largest current or heat flow at kdT = 0");
}

fn operating_checks(config: &Config, report: &mut ValidationReport) {
    let p = operating_point(&config.device, &config.params);
    let point = format!("kdT = {:e}, gamma_D = {:e} at site {}", p.kdt, p.gamma_d, p.observer_site.unwrap_or_default());
    let s = match solve(config, &p) {
        Ok(s) => s,
        Err(e) => return report.failed("operating_solve", format!("{point}: {e}")),
    };
    let r = &s.record;
    report.bound("steady_residual", r.residual, RESIDUAL_REL_TOL * s.steady.sigma_max, point.clone());
    let qmax = [r.qdot_h, r.qdot_c, r.qdot_d].iter().map(|v| v.abs()).fold(0.0, f64::max);
    report.bound("energy_conservation", relative_defect((r.qdot_h + r.qdot_c + r.qdot_d).abs(), qmax), CONSERVATION_TOL, "|sum Qdot| / max |Qdot|");
    let jmax = r.j_p_up.abs().max(s.aux.j_p_down.abs());
    report.bound("particle_conservation", relative_defect((r.j_p_up + s.aux.j_p_down).abs(), jmax), CONSERVATION_TOL, "|j_p(top) + j_p(bottom)| / |j_p|");
    match s.aux.observer {
        Some(side) => {
            let scale = side.j_p_before.abs().max(side.j_p_after.abs());
            report.bound("observer_divergence_free", relative_defect((side.j_p_before - side.j_p_after).abs(), scale), CONSERVATION_TOL, "particle current on both sides of the observer");
        }
        None => report.info("observer_divergence_free", f64::NAN, "observer is not on a branch"),
    }
    report.bound("second_law", -r.p_prod, SECOND_LAW_TOL, format!("P_prod = {:e}", r.p_prod));
    report.bound("observer_entropy_flow", s.aux.observer_entropy_flow.abs(), OBSERVER_ENTROPY_TOL, "");
    report.info("positivity", r.min_eig, "smallest eigenvalue of the steady state");
    match config.params.mode {
        DissipatorMode::Hermitian => report.bound("hermiticity", s.steady.hermiticity_defect, HERMITICITY_TOL, "raw null vector"),
        DissipatorMode::Literal => report.info("hermiticity", s.steady.hermiticity_defect, "literal mode does not preserve Hermiticity"),
    }
    match s.liouvillian.spectrum() {
        Ok(spec) => {
            let growth = spec.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            report.info("spectral_stability", growth, "largest real part of the generator spectrum");
        }
        Err(e) => report.info("spectral_stability", f64::NAN, e.to_string()),
    }
}

fn structure_defect(device: &DeviceSpec, vertical: bool) -> Option<f64> {
    let perm = device.mirror_permutation(vertical)?;
    let onsite = device.onsite();
    Some(perm.iter().enumerate().map(|(i, &j)| (onsite[i] - onsite[j]).abs()).fold(0.0, f64::max))
}

fn ring_current(config: &Config, params: &PhysParams, site: NamedSite) -> Result<f64> {
    let p = PhysParams { observer_site: Some(config.device.site(site)), ..params.clone() };
    Ok(solve(config, &p)?.record.j_p_up)
}

fn antisymmetry(config: &Config, params: &PhysParams, a: NamedSite, b: NamedSite) -> Result<(f64, f64, f64)> {
    let ja = ring_current(config, params, a)?;
    let jb = ring_current(config, params, b)?;
    Ok((ja, jb, relative_defect((ja + jb).abs(), ja.abs().max(jb.abs()))))
}

fn mirror_checks(config: &Config, report: &mut ValidationReport) {
    let symmetric = config.device.kind == DeviceKind::Flat;
    let push = |report: &mut ValidationReport, name: &'static str, measured: f64, tol: f64, detail: String| {
        if symmetric {
            report.bound(name, measured, tol, detail);
        } else {
            report.info(name, measured, format!("{detail} (device is asymmetric by design)"));
        }
    };
    for (name, vertical) in [("mirror_structure_top_bottom", true), ("mirror_structure_left_right", false)] {
        match structure_defect(&config.device, vertical) {
            Some(d) => push(report, name, d, STRUCTURE_TOL, "largest on-site mismatch under the reflection".into()),
            None => push(report, name, f64::INFINITY, STRUCTURE_TOL, "geometry has no such reflection".into()),
        }
    }
    let op = operating_point(&config.device, &config.params);
    match antisymmetry(config, &op, NamedSite::Alpha, NamedSite::Gamma) {
        Ok((ja, jg, d)) => push(report, "mirror_ring_current_alpha_gamma", d, MIRROR_TOL, format!("j_p_up = {ja:e} vs {jg:e}")),
        Err(e) => report.failed("mirror_ring_current_alpha_gamma", e.to_string()),
    }
    let eq = PhysParams { kdt: 0.0, ..op };
    match antisymmetry(config, &eq, NamedSite::Alpha, NamedSite::Beta) {
        Ok((ja, jb, d)) => push(report, "mirror_ring_current_alpha_beta", d, MIRROR_TOL, format!("kdT = 0, j_p_up = {ja:e} vs {jb:e}")),
        Err(e) => report.failed("mirror_ring_current_alpha_beta", e.to_string()),
    }
}

/// Runs every check; solver failures are reported as failed checks.
pub fn run_validate(config: &Config) -> ValidationReport {
    let mut report = ValidationReport::default();
    equilibrium_checks(config, &mut report);
    operating_checks(config, &mut report);
    mirror_checks(config, &mut report);
    report
}
