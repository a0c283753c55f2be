//! TOML configuration documents.
//!
//! ```toml
//! device = "flat"            # or "ratchet"
//! lattice_spacing = 1.0      # bohr
//! eps0_eV = 1.0              # alternatively eps0_au
//! hopping_eV = 0.5           # alternatively hopping_au; default eps0 / 2
//! lambda_rel = 0.2           # lambda / sqrt(eps0)
//! kT_E_au = 0.008
//! kdT_au = 0.0
//! omega_c_au = 0.2           # default: twice the device bandwidth
//! omega_floor_au = 1e-9
//! mode = "hermitian"         # or "literal"
//!
//! [observer]
//! site = "beta"              # alpha/beta/gamma/delta or a site id
//! gamma = 0.01
//!
//! [sweep]
//! gamma_max = 0.05           # default: calibrated from the slowest relaxation rate
//! gamma_steps = 21
//! kdT_max = 2e-3
//! kdT_steps = 21
//!
//! [cut]
//! top_bond = 3
//! bottom_bond = 3
//!
//! [onsite_au]                # per-site overrides, keyed by id or name
//! "4" = 0.04
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{build_device, resolve_site, units, DeviceKind, DeviceSpec, DissipatorMode, PhysParams, DEFAULT_KT_E, DEFAULT_LAMBDA_REL, DEFAULT_OMEGA_FLOOR};
use crate::error::ConfigError;

pub const DEFAULT_GAMMA_STEPS: usize = 21;
pub const DEFAULT_KDT_MAX: f64 = 2e-3;
pub const DEFAULT_KDT_STEPS: usize = 21;
pub const DEFAULT_CUT_BOND: usize = 3;

/// Which bond along each branch path carries the reported branch currents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutConfig {
    pub top_bond: usize,
    pub bottom_bond: usize,
}

impl Default for CutConfig {
    fn default() -> Self {
        CutConfig { top_bond: DEFAULT_CUT_BOND, bottom_bond: DEFAULT_CUT_BOND }
    }
}

/// Sweep axes as written in the configuration. `gamma_max = None` asks the
/// sweep engine to calibrate the observer axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub gamma_max: Option<f64>,
    pub gamma_steps: usize,
    pub kdt_max: f64,
    pub kdt_steps: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { gamma_max: None, gamma_steps: DEFAULT_GAMMA_STEPS, kdt_max: DEFAULT_KDT_MAX, kdt_steps: DEFAULT_KDT_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub device: DeviceSpec,
    pub params: PhysParams,
    pub sweep: SweepSpec,
    pub cut: CutConfig,
    /// SHA-256 of the source text, hex encoded.
    pub source_hash: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    device: Option<String>,
    lattice_spacing: Option<f64>,
    #[serde(rename = "eps0_eV")]
    eps0_ev: Option<f64>,
    eps0_au: Option<f64>,
    #[serde(rename = "hopping_eV")]
    hopping_ev: Option<f64>,
    hopping_au: Option<f64>,
    lambda_rel: Option<f64>,
    #[serde(rename = "kT_E_au")]
    kt_e_au: Option<f64>,
    #[serde(rename = "kdT_au")]
    kdt_au: Option<f64>,
    omega_c_au: Option<f64>,
    omega_floor_au: Option<f64>,
    mode: Option<String>,
    observer: Option<RawObserver>,
    sweep: Option<RawSweep>,
    cut: Option<RawCut>,
    onsite_au: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObserver {
    site: Option<SiteRef>,
    gamma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SiteRef {
    Id(i64),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    gamma_max: Option<f64>,
    gamma_steps: Option<i64>,
    #[serde(rename = "kdT_max")]
    kdt_max: Option<f64>,
    #[serde(rename = "kdT_steps")]
    kdt_steps: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCut {
    top_bond: Option<i64>,
    bottom_bond: Option<i64>,
}

fn constraint(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Constraint { path: path.to_string(), message: message.into() }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn deserialize(text: &str) -> Result<RawConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().trim().to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().trim().to_string();
        if let Some(rest) = message.strip_prefix("unknown field `") {
            let key = rest.split('`').next().unwrap_or_default();
            let full = if path == "." || path.is_empty() {
                key.to_string()
            } else if path == key || path.ends_with(&format!(".{key}")) {
                path
            } else {
                format!("{path}.{key}")
            };
            ConfigError::UnknownKey { path: full }
        } else if let Some(span) = inner.span() {
            ConfigError::Constraint { path, message: format!("{message} (line {})", line_of(text, span.start)) }
        } else {
            ConfigError::Constraint { path, message }
        }
    })
}

fn positive_count(path: &str, v: Option<i64>, default: usize) -> Result<usize, ConfigError> {
    match v {
        None => Ok(default),
        Some(n) if n >= 1 => Ok(n as usize),
        Some(n) => Err(constraint(path, format!("must be at least 1, got {n}"))),
    }
}

fn finite(path: &str, v: Option<f64>) -> Result<Option<f64>, ConfigError> {
    match v {
        Some(x) if !x.is_finite() => Err(constraint(path, "must be finite")),
        other => Ok(other),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let raw = deserialize(text)?;

    let kind = match raw.device.as_deref().map(str::to_ascii_lowercase).as_deref() {
        Some("flat") => DeviceKind::Flat,
        Some("ratchet") => DeviceKind::Ratchet,
        Some(other) => return Err(constraint("device", format!("expected \"flat\" or \"ratchet\", got \"{other}\""))),
        None => return Err(constraint("device", "missing required key")),
    };

    let eps0 = match (finite("eps0_eV", raw.eps0_ev)?, finite("eps0_au", raw.eps0_au)?) {
        (Some(_), Some(_)) => return Err(constraint("eps0_au", "give either eps0_eV or eps0_au, not both")),
        (Some(ev), None) => units::ev_to_hartree(ev),
        (None, Some(au)) => au,
        (None, None) => units::ev_to_hartree(1.0),
    };
    if !(eps0 > 0.0) {
        return Err(constraint("eps0_eV", "on-site energy must be positive"));
    }
    let hopping = match (finite("hopping_eV", raw.hopping_ev)?, finite("hopping_au", raw.hopping_au)?) {
        (Some(_), Some(_)) => return Err(constraint("hopping_au", "give either hopping_eV or hopping_au, not both")),
        (Some(ev), None) => units::ev_to_hartree(ev),
        (None, Some(au)) => au,
        (None, None) => eps0 / 2.0,
    };
    if !(hopping >= 0.0) {
        return Err(constraint("hopping_eV", "hopping must be non-negative"));
    }
    let lambda_rel = finite("lambda_rel", raw.lambda_rel)?.unwrap_or(DEFAULT_LAMBDA_REL);
    if !(lambda_rel >= 0.0) {
        return Err(constraint("lambda_rel", "bath coupling must be non-negative"));
    }
    let kt_e = finite("kT_E_au", raw.kt_e_au)?.unwrap_or(DEFAULT_KT_E);
    if !(kt_e > 0.0) {
        return Err(constraint("kT_E_au", "mean temperature must be positive"));
    }
    let kdt = finite("kdT_au", raw.kdt_au)?.unwrap_or(0.0);
    if !(kdt >= 0.0) {
        return Err(constraint("kdT_au", "temperature offset must be non-negative"));
    }
    if kdt >= kt_e {
        return Err(constraint("kdT_au", "temperature of cold bath must be positive"));
    }
    let omega_c = finite("omega_c_au", raw.omega_c_au)?;
    if let Some(wc) = omega_c {
        if !(wc > 0.0) {
            return Err(constraint("omega_c_au", "cutoff frequency must be positive"));
        }
    }
    let omega_floor = finite("omega_floor_au", raw.omega_floor_au)?.unwrap_or(DEFAULT_OMEGA_FLOOR);
    if !(omega_floor >= 0.0) {
        return Err(constraint("omega_floor_au", "frequency floor must be non-negative"));
    }
    let mode = match raw.mode.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None | Some("hermitian") => DissipatorMode::Hermitian,
        Some("literal") => DissipatorMode::Literal,
        Some(other) => return Err(constraint("mode", format!("expected \"hermitian\" or \"literal\", got \"{other}\""))),
    };
    let lattice_spacing = finite("lattice_spacing", raw.lattice_spacing)?.unwrap_or(1.0);
    if !(lattice_spacing > 0.0) {
        return Err(constraint("lattice_spacing", "lattice spacing must be positive"));
    }

    let mut params = PhysParams {
        eps0,
        hopping,
        lambda: lambda_rel * eps0.sqrt(),
        kt_e,
        kdt,
        omega_c,
        gamma_d: 0.0,
        observer_site: None,
        omega_floor,
        mode,
        lattice_spacing,
    };
    let mut device = build_device(kind, &params);

    if let Some(overrides) = raw.onsite_au {
        for (key, value) in overrides {
            let path = format!("onsite_au.{key}");
            let id = resolve_site(&device, &key).map_err(|m| constraint(&path, m))?;
            if !value.is_finite() {
                return Err(constraint(&path, "must be finite"));
            }
            device.sites[id].onsite = value;
        }
    }

    if let Some(obs) = raw.observer {
        let gamma = finite("observer.gamma", obs.gamma)?.unwrap_or(0.0);
        if !(gamma >= 0.0) {
            return Err(constraint("observer.gamma", "observer strength must be non-negative"));
        }
        params.gamma_d = gamma;
        params.observer_site = match obs.site {
            None => None,
            Some(SiteRef::Id(id)) => {
                if id < 0 || id as usize >= device.n_sites() {
                    return Err(constraint("observer.site", format!("site id {id} out of range")));
                }
                Some(id as usize)
            }
            Some(SiteRef::Name(name)) => Some(resolve_site(&device, &name).map_err(|m| constraint("observer.site", m))?),
        };
        if params.gamma_d > 0.0 && params.observer_site.is_none() {
            return Err(constraint("observer.site", "an observer strength needs a site"));
        }
    }

    let sweep = match raw.sweep {
        None => SweepSpec::default(),
        Some(s) => {
            let gamma_max = finite("sweep.gamma_max", s.gamma_max)?;
            if let Some(g) = gamma_max {
                if !(g >= 0.0) {
                    return Err(constraint("sweep.gamma_max", "must be non-negative"));
                }
            }
            let kdt_max = finite("sweep.kdT_max", s.kdt_max)?.unwrap_or(DEFAULT_KDT_MAX);
            if !(kdt_max >= 0.0) {
                return Err(constraint("sweep.kdT_max", "must be non-negative"));
            }
            if kdt_max >= kt_e {
                return Err(constraint("sweep.kdT_max", "temperature of cold bath must be positive"));
            }
            SweepSpec {
                gamma_max,
                gamma_steps: positive_count("sweep.gamma_steps", s.gamma_steps, DEFAULT_GAMMA_STEPS)?,
                kdt_max,
                kdt_steps: positive_count("sweep.kdT_steps", s.kdt_steps, DEFAULT_KDT_STEPS)?,
            }
        }
    };
    if sweep.kdt_max >= kt_e {
        return Err(constraint("sweep.kdT_max", "temperature of cold bath must be positive"));
    }

    let cut = match raw.cut {
        None => CutConfig::default(),
        Some(c) => {
            let path_bonds = device.branch_path(super::Branch::Top).len() - 1;
            let check = |path: &str, v: Option<i64>| -> Result<usize, ConfigError> {
                match v {
                    None => Ok(DEFAULT_CUT_BOND),
                    Some(k) if k >= 0 && (k as usize) < path_bonds => Ok(k as usize),
                    Some(k) => Err(constraint(path, format!("bond index {k} outside 0..{path_bonds}"))),
                }
            };
            CutConfig { top_bond: check("cut.top_bond", c.top_bond)?, bottom_bond: check("cut.bottom_bond", c.bottom_bond)? }
        }
    };

    device.validate().map_err(|e| constraint("device", e.to_string()))?;

    let source_hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();

    Ok(Config { device, params, sweep, cut, source_hash })
}

/// Writes a configuration document that parses back to the same device,
/// parameters, sweep and cut. Energies are written in hartree so the round
/// trip is exact.
pub fn emit_config(config: &Config) -> Result<String, ConfigError> {
    let Config { device, params, sweep, cut, .. } = config;
    let mut base_params = params.clone();
    base_params.lattice_spacing = device.lattice_spacing;
    let base = build_device(device.kind, &base_params);
    if base.bonds.len() != device.bonds.len()
        || base.bonds.iter().zip(&device.bonds).any(|(a, b)| (a.i, a.j) != (b.i, b.j) || a.hopping != b.hopping)
    {
        return Err(constraint("device", "bond structure differs from the built-in geometry and cannot be written"));
    }

    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("device = \"{}\"", device.kind.as_str()));
    line(format!("lattice_spacing = {:?}", device.lattice_spacing));
    line(format!("eps0_au = {:?}", params.eps0));
    line(format!("hopping_au = {:?}", params.hopping));
    line(format!("lambda_rel = {:?}", params.lambda / params.eps0.sqrt()));
    line(format!("kT_E_au = {:?}", params.kt_e));
    line(format!("kdT_au = {:?}", params.kdt));
    if let Some(wc) = params.omega_c {
        line(format!("omega_c_au = {wc:?}"));
    }
    line(format!("omega_floor_au = {:?}", params.omega_floor));
    line(format!("mode = \"{}\"", params.mode.as_str()));
    line(String::new());
    line("[observer]".into());
    if let Some(k) = params.observer_site {
        line(format!("site = {k}"));
    }
    line(format!("gamma = {:?}", params.gamma_d));
    line(String::new());
    line("[sweep]".into());
    if let Some(g) = sweep.gamma_max {
        line(format!("gamma_max = {g:?}"));
    }
    line(format!("gamma_steps = {}", sweep.gamma_steps));
    line(format!("kdT_max = {:?}", sweep.kdt_max));
    line(format!("kdT_steps = {}", sweep.kdt_steps));
    line(String::new());
    line("[cut]".into());
    line(format!("top_bond = {}", cut.top_bond));
    line(format!("bottom_bond = {}", cut.bottom_bond));
    let overrides: Vec<_> = device.sites.iter().zip(&base.sites).filter(|(s, b)| s.onsite != b.onsite).collect();
    if !overrides.is_empty() {
        line(String::new());
        line("[onsite_au]".into());
        for (s, _) in overrides {
            line(format!("\"{}\" = {:?}", s.id, s.onsite));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::NamedSite;

    #[test]
    fn minimal_flat_config_uses_defaults() {
        let c = parse_config("device = \"flat\"\n").unwrap();
        assert_eq!(c.device.n_sites(), 28);
        assert_eq!(c.params, PhysParams::default());
        assert_eq!(c.sweep, SweepSpec::default());
        assert_eq!(c.cut, CutConfig::default());
        assert_eq!(c.params.omega_c, None);
        assert_eq!(c.params.omega_floor, 1e-9);
        assert_eq!(c.params.mode, DissipatorMode::Hermitian);
        assert!((c.params.lambda - 0.2 * c.params.eps0.sqrt()).abs() < 1e-15);
        assert_eq!(c.source_hash.len(), 64);
    }

    #[test]
    fn equal_offset_and_mean_temperature_is_rejected() {
        let err = parse_config("device = \"flat\"\nkT_E_au = 0.008\nkdT_au = 0.008\n").unwrap_err();
        match err {
            ConfigError::Constraint { path, message } => {
                assert_eq!(path, "kdT_au");
                assert_eq!(message, "temperature of cold bath must be positive");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_config("device = \"flat\"\n[sweep]\nkdT_max = 0.01\n").unwrap_err();
        assert!(matches!(err, ConfigError::Constraint { ref path, .. } if path == "sweep.kdT_max"));
    }

    #[test]
    fn observer_name_resolves_to_site() {
        let c = parse_config("device = \"flat\"\n[observer]\nsite = \"beta\"\ngamma = 0.01\n").unwrap();
        assert_eq!(c.params.observer_site, Some(c.device.site(NamedSite::Beta)));
        assert_eq!(c.params.gamma_d, 0.01);
        let c = parse_config("device = \"ratchet\"\n[observer]\nsite = 18\n").unwrap();
        assert_eq!(c.params.observer_site, Some(18));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_config("device = \"flat\"\nkT_E_au = = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unknown_keys_report_path() {
        let err = parse_config("device = \"flat\"\ntemperature = 3\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey { path: "temperature".into() });
        let err = parse_config("device = \"flat\"\n[observer]\nsite = \"beta\"\nstrength = 1\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey { path: "observer.strength".into() });
    }

    #[test]
    fn constraint_errors_carry_key_path() {
        for (text, path) in [
            ("device = \"hexagon\"\n", "device"),
            ("mode = \"hermitian\"\n", "device"),
            ("device = \"flat\"\nmode = \"lindblad\"\n", "mode"),
            ("device = \"flat\"\n[observer]\nsite = \"omega\"\n", "observer.site"),
            ("device = \"flat\"\n[cut]\ntop_bond = 6\n", "cut.top_bond"),
            ("device = \"flat\"\n[sweep]\ngamma_steps = 0\n", "sweep.gamma_steps"),
            ("device = \"flat\"\nomega_c_au = -1.0\n", "omega_c_au"),
            ("device = \"flat\"\nkT_E_au = \"hot\"\n", "kT_E_au"),
        ] {
            match parse_config(text) {
                Err(ConfigError::Constraint { path: p, .. }) => assert_eq!(p, path, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn onsite_overrides_apply() {
        let c = parse_config("device = \"flat\"\n[onsite_au]\n\"0\" = 0.05\nalpha = 0.04\n").unwrap();
        assert_eq!(c.device.sites[0].onsite, 0.05);
        assert_eq!(c.device.sites[c.device.site(NamedSite::Alpha)].onsite, 0.04);
    }

    #[test]
    fn emitted_config_round_trips() {
        let texts = [
            "device = \"flat\"\n",
            "device = \"ratchet\"\nlattice_spacing = 1.7\neps0_eV = 1.3\nkdT_au = 0.001\nomega_c_au = 0.3\nmode = \"literal\"\n[observer]\nsite = \"delta\"\ngamma = 0.02\n[sweep]\ngamma_max = 0.1\ngamma_steps = 5\n[cut]\ntop_bond = 2\n[onsite_au]\n\"3\" = 0.041\n",
        ];
        for text in texts {
            let c = parse_config(text).unwrap();
            let emitted = emit_config(&c).unwrap();
            let back = parse_config(&emitted).unwrap();
            assert_eq!(back.device, c.device, "{emitted}");
            assert_eq!(back.params.eps0, c.params.eps0);
            assert_eq!(back.params.observer_site, c.params.observer_site);
            assert!((back.params.lambda - c.params.lambda).abs() <= 1e-15 * c.params.lambda);
            assert_eq!(back.sweep, c.sweep);
            assert_eq!(back.cut, c.cut);
        }
    }
}
