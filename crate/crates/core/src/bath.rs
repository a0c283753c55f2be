//! Thermal baths and the local observer as dissipator channels.
//!
//! Each lead couples to a cavity bath through a masked dipole operator `S`.
//! The bath enters through its spectral weight
//!
//! ```text
//! C(W) = n_B(W) / eps0          floor <  W < omega_c   (absorption)
//!        (n_B(|W|) + 1) / eps0  floor < -W < omega_c   (emission)
//!        0                      otherwise
//! ```
//!
//! sampled at the Bohr frequencies of the device, giving the kernel
//! `K_mn = lambda^2 S_mn C(E_m - E_n)` in the energy eigenbasis.

use std::fmt;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::lattice::{DeviceSpec, DissipatorMode, PhysParams, Region};
use crate::linalg::{self, CMat};
use crate::operators::{dipole_coupling_operator, Axis, HermitianOperator, SpectralDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BathLabel {
    Hot,
    Cold,
}

impl BathLabel {
    pub fn region(self) -> Region {
        match self {
            BathLabel::Hot => Region::HotLead,
            BathLabel::Cold => Region::ColdLead,
        }
    }
}

impl fmt::Display for BathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BathLabel::Hot => "hot",
            BathLabel::Cold => "cold",
        })
    }
}

#[derive(Debug, Clone)]
pub enum DissipatorChannel {
    Thermal { s: HermitianOperator, k: CMat, kt: f64, label: BathLabel, axis: Axis },
    Observer { site: usize, gamma: f64 },
}

impl DissipatorChannel {
    pub fn observer(device: &DeviceSpec, site: usize, gamma: f64) -> Result<Self> {
        device.check_site(site)?;
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain { what: "observer strength", value: gamma, requirement: "finite and non-negative" });
        }
        Ok(DissipatorChannel::Observer { site, gamma })
    }

    pub fn label(&self) -> Option<BathLabel> {
        match self {
            DissipatorChannel::Thermal { label, .. } => Some(*label),
            DissipatorChannel::Observer { .. } => None,
        }
    }

    pub fn is_observer(&self) -> bool {
        matches!(self, DissipatorChannel::Observer { .. })
    }
}

/// `1 / (e^(omega/kT) - 1)`.
pub fn bose_einstein(omega: f64, kt: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain { what: "Bose-Einstein frequency", value: omega, requirement: "positive" });
    }
    if !(kt > 0.0) {
        return Err(Error::Domain { what: "Bose-Einstein temperature", value: kt, requirement: "positive" });
    }
    Ok(1.0 / (omega / kt).exp_m1())
}

/// Bath spectral weight at frequency `omega`. A zero temperature is taken as
/// the `kT -> 0` limit.
pub fn spectral_weight(omega: f64, kt: f64, omega_c: f64, eps0: f64, omega_floor: f64) -> f64 {
    let x = omega.abs();
    if x <= omega_floor || x >= omega_c {
        return 0.0;
    }
    let n = if kt > 0.0 { 1.0 / (x / kt).exp_m1() } else { 0.0 };
    if omega > 0.0 {
        n / eps0
    } else {
        (n + 1.0) / eps0
    }
}

/// Cutoff actually used for a device: the configured value or twice the
/// spectral width of the Hamiltonian.
pub fn effective_omega_c(params: &PhysParams, spec: &SpectralDecomposition) -> f64 {
    params.omega_c.unwrap_or_else(|| 2.0 * spec.bandwidth())
}

pub fn assemble_kernel(
    s: &HermitianOperator,
    spec: &SpectralDecomposition,
    kt: f64,
    lambda: f64,
    omega_c: f64,
    eps0: f64,
    omega_floor: f64,
) -> Result<CMat> {
    if s.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: s.dim() });
    }
    let e = &spec.eigenvalues;
    let lam2 = lambda * lambda;
    let st = spec.to_eigenbasis(s.matrix());
    let kt_eig = Mat::from_fn(st.nrows(), st.ncols(), |m, n| {
        st[(m, n)] * (lam2 * spectral_weight(e[m] - e[n], kt, omega_c, eps0, omega_floor))
    });
    Ok(spec.from_eigenbasis(&kt_eig))
}

/// Hot and cold channels for both in-plane polarizations, in the order
/// (hot x, hot y, cold x, cold y).
pub fn thermal_channels(device: &DeviceSpec, params: &PhysParams, spec: &SpectralDecomposition) -> Result<Vec<DissipatorChannel>> {
    if spec.dim() != device.n_sites() {
        return Err(Error::DimensionMismatch { expected: device.n_sites(), found: spec.dim() });
    }
    let omega_c = effective_omega_c(params, spec);
    let mut out = Vec::with_capacity(4);
    for (label, kt) in [(BathLabel::Hot, params.kt_hot()), (BathLabel::Cold, params.kt_cold())] {
        for axis in [Axis::X, Axis::Y] {
            let s = dipole_coupling_operator(device, label.region(), axis)?;
            let k = assemble_kernel(&s, spec, kt, params.lambda, omega_c, params.eps0, params.omega_floor)?;
            out.push(DissipatorChannel::Thermal { s, k, kt, label, axis });
        }
    }
    Ok(out)
}

/// All channels of a configuration: the four thermal channels plus the
/// observer when one is configured.
pub fn all_channels(device: &DeviceSpec, params: &PhysParams, spec: &SpectralDecomposition) -> Result<Vec<DissipatorChannel>> {
    let mut channels = thermal_channels(device, params, spec)?;
    if let Some(k) = params.observer_site {
        channels.push(DissipatorChannel::observer(device, k, params.gamma_d)?);
    }
    Ok(channels)
}

pub fn apply_dissipator(ch: &DissipatorChannel, rho: &CMat, mode: DissipatorMode) -> Result<CMat> {
    let n = rho.nrows();
    if rho.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.ncols() });
    }
    match ch {
        DissipatorChannel::Thermal { s, k, .. } => {
            if s.dim() != n {
                return Err(Error::DimensionMismatch { expected: s.dim(), found: n });
            }
            let s = s.matrix();
            let kd = match mode {
                DissipatorMode::Hermitian => linalg::adjoint(k),
                DissipatorMode::Literal => k.clone(),
            };
            let k_rho = k * rho;
            let rho_kd = rho * &kd;
            Ok(&k_rho * s + s * &rho_kd - s * &k_rho - &rho_kd * s)
        }
        DissipatorChannel::Observer { site, gamma } => {
            if *site >= n {
                return Err(Error::DimensionMismatch { expected: site + 1, found: n });
            }
            let g2 = gamma * gamma;
            let mut out = linalg::zeros(n);
            for j in 0..n {
                if j != *site {
                    out[(*site, j)] = rho[(*site, j)] * (-g2);
                    out[(j, *site)] = rho[(j, *site)] * (-g2);
                }
            }
            Ok(out)
        }
    }
}

/// `gamma^2 (2 P rho P - P rho - rho P)` evaluated with explicit products.
pub fn observer_dissipator_dense(site: usize, gamma: f64, rho: &CMat) -> CMat {
    let n = rho.nrows();
    let mut p = linalg::zeros(n);
    p[(site, site)] = c64::new(1.0, 0.0);
    let prp = &p * rho * &p;
    let pr = &p * rho;
    let rp = rho * &p;
    Mat::from_fn(n, n, |i, j| (prp[(i, j)] * 2.0 - pr[(i, j)] - rp[(i, j)]) * (gamma * gamma))
}
