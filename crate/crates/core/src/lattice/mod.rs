//! Device geometry, physical parameters and configuration.
//!
//! The device is a ring of two five-site branches strung between two 3x3
//! square-lattice leads. Sites sit on a unit grid (scaled by the lattice
//! spacing):
//!
//! ```text
//!   y=+1   L L L  a . . . b  R R R
//!   y= 0   L L L             R R R
//!   y=-1   L L L  g . . . d  R R R
//!          x=0..2  x=3..7     x=8..10
//! ```
//!
//! Site ids: left lead 0..9, top branch 9..14, bottom branch 14..19, right
//! lead 19..28. `a`, `b`, `g`, `d` are the named sites alpha, beta, gamma and
//! delta. The nine sites of each lead couple to a thermal bath.

pub mod config;
pub mod units;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};


pub use config::{emit_config, parse_config, Config, CutConfig, SweepSpec};
pub use units::{convert_units, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    HotLead,
    ColdLead,
    TopBranch,
    BottomBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Top,
    Bottom,
}

impl Branch {
    pub fn region(self) -> Region {
        match self {
            Branch::Top => Region::TopBranch,
            Branch::Bottom => Region::BottomBranch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedSite {
    Alpha,
    Beta,
    Gamma,
    Delta,
}

impl NamedSite {
    pub const ALL: [NamedSite; 4] = [NamedSite::Alpha, NamedSite::Beta, NamedSite::Gamma, NamedSite::Delta];

    pub fn as_str(self) -> &'static str {
        match self {
            NamedSite::Alpha => "alpha",
            NamedSite::Beta => "beta",
            NamedSite::Gamma => "gamma",
            NamedSite::Delta => "delta",
        }
    }
}

impl fmt::Display for NamedSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NamedSite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "alpha" | "α" | "a" => Ok(NamedSite::Alpha),
            "beta" | "β" | "b" => Ok(NamedSite::Beta),
            "gamma" | "γ" | "g" => Ok(NamedSite::Gamma),
            "delta" | "δ" | "d" => Ok(NamedSite::Delta),
            other => Err(format!("`{other}` is not one of alpha, beta, gamma, delta")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceKind {
    Flat,
    Ratchet,
}

impl DeviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Flat => "flat",
            DeviceKind::Ratchet => "ratchet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DissipatorMode {
    /// Conjugate-completed thermal dissipator, `K rho S + S rho K^H - S K rho - rho K^H S`.
    #[default]
    Hermitian,
    /// Thermal dissipator exactly as written with `K` in both outer slots.
    Literal,
}

impl DissipatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DissipatorMode::Hermitian => "hermitian",
            DissipatorMode::Literal => "literal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteSpec {
    pub id: usize,
    /// Cartesian position in bohr.
    pub position: [f64; 2],
    /// On-site energy in hartree.
    pub onsite: f64,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    /// Hopping amplitude in hartree; the Hamiltonian element is `-hopping`.
    pub hopping: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub kind: DeviceKind,
    pub sites: Vec<SiteSpec>,
    pub bonds: Vec<Bond>,
    pub named: BTreeMap<NamedSite, usize>,
    /// Bohr.
    pub lattice_spacing: f64,
}

/// Physical parameters, all in hartree atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysParams {
    pub eps0: f64,
    pub hopping: f64,
    /// Bath coupling strength.
    pub lambda: f64,
    /// Mean bath temperature `k_B T_E`.
    pub kt_e: f64,
    /// Temperature offset `k_B dT`; hot and cold baths sit at `kt_e +/- kdt`.
    pub kdt: f64,
    /// Bath cutoff frequency. `None` selects twice the device bandwidth.
    pub omega_c: Option<f64>,
    pub gamma_d: f64,
    pub observer_site: Option<usize>,
    /// Bath spectral weight is zero for |frequency| at or below this.
    pub omega_floor: f64,
    pub mode: DissipatorMode,
    /// Bohr.
    pub lattice_spacing: f64,
}

pub const DEFAULT_LAMBDA_REL: f64 = 0.2;
pub const DEFAULT_KT_E: f64 = 0.008;
pub const DEFAULT_OMEGA_FLOOR: f64 = 1e-9;
/// Energy step of the ratchet ladders, in eV.
pub const RATCHET_STEP_EV: f64 = 0.1;

impl Default for PhysParams {
    fn default() -> Self {
        let eps0 = units::ev_to_hartree(1.0);
        PhysParams {
            eps0,
            hopping: eps0 / 2.0,
            lambda: DEFAULT_LAMBDA_REL * eps0.sqrt(),
            kt_e: DEFAULT_KT_E,
            kdt: 0.0,
            omega_c: None,
            gamma_d: 0.0,
            observer_site: None,
            omega_floor: DEFAULT_OMEGA_FLOOR,
            mode: DissipatorMode::Hermitian,
            lattice_spacing: 1.0,
        }
    }
}

impl PhysParams {
    pub fn kt_hot(&self) -> f64 {
        self.kt_e + self.kdt
    }

    pub fn kt_cold(&self) -> f64 {
        self.kt_e - self.kdt
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| {
            Err(Error::Config(crate::error::ConfigError::Constraint {
                path: path.to_string(),
                message: message.to_string(),
            }))
        };
        if !(self.eps0 > 0.0) {
            return bad("eps0", "on-site energy must be positive");
        }
        if !(self.hopping >= 0.0) {
            return bad("hopping", "hopping must be non-negative");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda", "bath coupling must be non-negative");
        }
        if !(self.kdt >= 0.0) {
            return bad("kdT", "temperature offset must be non-negative");
        }
        if !(self.kt_e > 0.0) {
            return bad("kT_E", "mean temperature must be positive");
        }
        if !(self.kt_e > self.kdt) {
            return bad("kdT", "temperature of cold bath must be positive");
        }
        if let Some(wc) = self.omega_c {
            if !(wc > 0.0) {
                return bad("omega_c", "cutoff frequency must be positive");
            }
        }
        if !(self.gamma_d >= 0.0) {
            return bad("gamma_D", "observer strength must be non-negative");
        }
        if !(self.omega_floor >= 0.0) {
            return bad("omega_floor", "frequency floor must be non-negative");
        }
        if !(self.lattice_spacing > 0.0) {
            return bad("lattice_spacing", "lattice spacing must be positive");
        }
        Ok(())
    }
}

const LEAD_COLS: usize = 3;
const LEAD_ROWS: usize = 3;
const BRANCH_LEN: usize = 5;
/// Grid column of the leftmost right-lead site.
const RIGHT_LEAD_X0: usize = LEAD_COLS + BRANCH_LEN;

fn lead_site(x0: usize, ix: usize, iy: usize, base: usize, spacing: f64, onsite: f64, region: Region) -> SiteSpec {
    let id = base + ix * LEAD_ROWS + iy;
    SiteSpec {
        id,
        position: [(x0 + ix) as f64 * spacing, (1.0 - iy as f64) * spacing],
        onsite,
        region,
    }
}

fn build_geometry(kind: DeviceKind, params: &PhysParams, onsite: impl Fn(Region, usize) -> f64) -> DeviceSpec {
    let a = params.lattice_spacing;
    let t = params.hopping;
    let mut sites = Vec::with_capacity(2 * LEAD_COLS * LEAD_ROWS + 2 * BRANCH_LEN);
    let mut bonds = Vec::new();

    let left_base = 0;
    let top_base = LEAD_COLS * LEAD_ROWS;
    let bottom_base = top_base + BRANCH_LEN;
    let right_base = bottom_base + BRANCH_LEN;

    for ix in 0..LEAD_COLS {
        for iy in 0..LEAD_ROWS {
            let k = ix * LEAD_ROWS + iy;
            sites.push(lead_site(0, ix, iy, left_base, a, onsite(Region::HotLead, k), Region::HotLead));
        }
    }
    for (base, y, region) in [(top_base, 1.0, Region::TopBranch), (bottom_base, -1.0, Region::BottomBranch)] {
        for p in 0..BRANCH_LEN {
            sites.push(SiteSpec {
                id: base + p,
                position: [(LEAD_COLS + p) as f64 * a, y * a],
                onsite: onsite(region, p),
                region,
            });
        }
    }
    for ix in 0..LEAD_COLS {
        for iy in 0..LEAD_ROWS {
            let k = ix * LEAD_ROWS + iy;
            sites.push(lead_site(
                RIGHT_LEAD_X0,
                ix,
                iy,
                right_base,
                a,
                onsite(Region::ColdLead, k),
                Region::ColdLead,
            ));
        }
    }

    for base in [left_base, right_base] {
        for ix in 0..LEAD_COLS {
            for iy in 0..LEAD_ROWS {
                let id = base + ix * LEAD_ROWS + iy;
                if iy + 1 < LEAD_ROWS {
                    bonds.push(Bond { i: id, j: id + 1, hopping: t });
                }
                if ix + 1 < LEAD_COLS {
                    bonds.push(Bond { i: id, j: id + LEAD_ROWS, hopping: t });
                }
            }
        }
    }
    for base in [top_base, bottom_base] {
        for p in 0..BRANCH_LEN - 1 {
            bonds.push(Bond { i: base + p, j: base + p + 1, hopping: t });
        }
    }
    // Lead corners: top row iy = 0, bottom row iy = LEAD_ROWS - 1.
    let left_col = (LEAD_COLS - 1) * LEAD_ROWS;
    bonds.push(Bond { i: left_base + left_col, j: top_base, hopping: t });
    bonds.push(Bond { i: left_base + left_col + LEAD_ROWS - 1, j: bottom_base, hopping: t });
    bonds.push(Bond { i: top_base + BRANCH_LEN - 1, j: right_base, hopping: t });
    bonds.push(Bond { i: bottom_base + BRANCH_LEN - 1, j: right_base + LEAD_ROWS - 1, hopping: t });
    bonds.sort_by_key(|b| (b.i, b.j));

    let named = BTreeMap::from([
        (NamedSite::Alpha, top_base),
        (NamedSite::Beta, top_base + BRANCH_LEN - 1),
        (NamedSite::Gamma, bottom_base),
        (NamedSite::Delta, bottom_base + BRANCH_LEN - 1),
    ]);

    DeviceSpec { kind, sites, bonds, named, lattice_spacing: a }
}

/// Uniform device: every site at `eps0`, every bond at `hopping`.
pub fn build_flat_device(params: &PhysParams) -> DeviceSpec {
    build_geometry(DeviceKind::Flat, params, |_, _| params.eps0)
}

/// Ratchet device: the top branch climbs from `eps0 + 0.1 eV` (alpha) to
/// `eps0 + 0.5 eV` (beta); the bottom branch runs the same ladder right to
/// left, so gamma is the highest site and delta the lowest.
pub fn build_ratchet_device(params: &PhysParams) -> DeviceSpec {
    let step = units::ev_to_hartree(RATCHET_STEP_EV);
    build_geometry(DeviceKind::Ratchet, params, |region, p| match region {
        Region::TopBranch => params.eps0 + (p + 1) as f64 * step,
        Region::BottomBranch => params.eps0 + (BRANCH_LEN - p) as f64 * step,
        Region::HotLead | Region::ColdLead => params.eps0,
    })
}

pub fn build_device(kind: DeviceKind, params: &PhysParams) -> DeviceSpec {
    match kind {
        DeviceKind::Flat => build_flat_device(params),
        DeviceKind::Ratchet => build_ratchet_device(params),
    }
}

impl DeviceSpec {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, name: NamedSite) -> usize {
        self.named[&name]
    }

    pub fn check_site(&self, id: usize) -> Result<()> {
        if id < self.n_sites() {
            Ok(())
        } else {
            Err(Error::InvalidSite { id, n_sites: self.n_sites() })
        }
    }

    pub fn region_sites(&self, region: Region) -> Vec<usize> {
        self.sites.iter().filter(|s| s.region == region).map(|s| s.id).collect()
    }

    pub fn onsite(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.onsite).collect()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.n_sites() as f64;
        let (sx, sy) = self.sites.iter().fold((0.0, 0.0), |(x, y), s| (x + s.position[0], y + s.position[1]));
        [sx / n, sy / n]
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_sites()];
        for b in &self.bonds {
            adj[b.i].push(b.j);
            adj[b.j].push(b.i);
        }
        adj
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.bonds.iter().find(|bd| bd.i == i && bd.j == j)
    }

    /// Branch sites ordered left to right.
    pub fn branch_sites(&self, branch: Branch) -> Vec<usize> {
        let mut ids = self.region_sites(branch.region());
        ids.sort_by(|&a, &b| self.sites[a].position[0].total_cmp(&self.sites[b].position[0]));
        ids
    }

    /// The full path across a branch: the lead site it hangs from on the left,
    /// the branch sites, and the lead site on the right.
    pub fn branch_path(&self, branch: Branch) -> Vec<usize> {
        let inner = self.branch_sites(branch);
        let adj = self.neighbors();
        let attach = |site: usize, lead: Region| adj[site].iter().copied().find(|&n| self.sites[n].region == lead);
        let mut path = Vec::with_capacity(inner.len() + 2);
        if let Some(l) = inner.first().and_then(|&s| attach(s, Region::HotLead)) {
            path.push(l);
        }
        path.extend(&inner);
        if let Some(r) = inner.last().and_then(|&s| attach(s, Region::ColdLead)) {
            path.push(r);
        }
        path
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_sites();
        if n == 0 {
            return true;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Site permutation realizing a mirror through the device centroid, or
    /// `None` if some mirrored position holds no site. `vertical = true`
    /// mirrors top and bottom (y -> -y), otherwise left and right.
    pub fn mirror_permutation(&self, vertical: bool) -> Option<Vec<usize>> {
        let c = self.centroid();
        let tol = 1e-9 * self.lattice_spacing.max(1.0);
        self.sites
            .iter()
            .map(|s| {
                let target = if vertical {
                    [s.position[0], 2.0 * c[1] - s.position[1]]
                } else {
                    [2.0 * c[0] - s.position[0], s.position[1]]
                };
                self.sites
                    .iter()
                    .find(|t| (t.position[0] - target[0]).abs() < tol && (t.position[1] - target[1]).abs() < tol)
                    .map(|t| t.id)
            })
            .collect()
    }

    /// Checks the structural invariants of a device.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        for (k, s) in self.sites.iter().enumerate() {
            if s.id != k {
                return Err(Error::InvalidDevice(format!("site at index {k} has id {}", s.id)));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.bonds {
            if b.i >= n || b.j >= n {
                return Err(Error::InvalidDevice(format!("bond ({}, {}) references a missing site", b.i, b.j)));
            }
            if b.i == b.j {
                return Err(Error::InvalidDevice(format!("self bond on site {}", b.i)));
            }
            if b.i > b.j {
                return Err(Error::InvalidDevice(format!("bond ({}, {}) is not ordered i < j", b.i, b.j)));
            }
            if !seen.insert((b.i, b.j)) {
                return Err(Error::InvalidDevice(format!("duplicate bond ({}, {})", b.i, b.j)));
            }
        }
        if !self.is_connected() {
            return Err(Error::InvalidDevice("bond graph is not connected".into()));
        }
        for region in [Region::HotLead, Region::ColdLead] {
            let count = self.region_sites(region).len();
            if count != 9 {
                return Err(Error::InvalidDevice(format!("{region:?} has {count} sites, expected 9")));
            }
        }
        let adj = self.neighbors();
        for branch in [Branch::Top, Branch::Bottom] {
            let sites = self.branch_sites(branch);
            if sites.is_empty() {
                return Err(Error::InvalidDevice(format!("{branch:?} branch is empty")));
            }
            // Restricted to the branch, the graph must be a simple path in x order.
            let region = branch.region();
            let internal: usize = sites
                .iter()
                .map(|&s| adj[s].iter().filter(|&&m| self.sites[m].region == region).count())
                .sum::<usize>()
                / 2;
            if internal != sites.len() - 1 {
                return Err(Error::InvalidDevice(format!("{branch:?} branch is not a simple path")));
            }
            for w in sites.windows(2) {
                if self.bond_between(w[0], w[1]).is_none() {
                    return Err(Error::InvalidDevice(format!("{branch:?} branch is not a simple path")));
                }
            }
            let (first, last) = (sites[0], sites[sites.len() - 1]);
            let (left_name, right_name) = match branch {
                Branch::Top => (NamedSite::Alpha, NamedSite::Beta),
                Branch::Bottom => (NamedSite::Gamma, NamedSite::Delta),
            };
            if self.named.get(&left_name) != Some(&first) || self.named.get(&right_name) != Some(&last) {
                return Err(Error::InvalidDevice(format!("named sites do not match the {branch:?} branch ends")));
            }
        }
        Ok(())
    }
}

/// Resolves an observer location given either a named site or a numeric id.
pub fn resolve_site(device: &DeviceSpec, spec: &str) -> std::result::Result<usize, String> {
    if let Ok(id) = spec.trim().parse::<usize>() {
        return if id < device.n_sites() {
            Ok(id)
        } else {
            Err(format!("site id {id} out of range (device has {} sites)", device.n_sites()))
        };
    }
    let name: NamedSite = spec.parse()?;
    Ok(device.site(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> DeviceSpec {
        build_flat_device(&PhysParams::default())
    }

    fn permute_bonds(device: &DeviceSpec, perm: &[usize]) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = device
            .bonds
            .iter()
            .map(|b| {
                let (x, y) = (perm[b.i], perm[b.j]);
                (x.min(y), x.max(y))
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn flat_device_has_28_sites_at_eps0() {
        let p = PhysParams::default();
        let d = build_flat_device(&p);
        assert_eq!(d.n_sites(), 28);
        assert!((p.eps0 - 0.036_749).abs() < 1e-6);
        assert!(d.sites.iter().all(|s| s.onsite == p.eps0));
        assert!(d.bonds.iter().all(|b| b.hopping == p.hopping));
        d.validate().unwrap();
    }

    #[test]
    fn flat_device_bond_count() {
        // 12 per lead, 4 per branch interior, 4 attachments.
        assert_eq!(flat().bonds.len(), 12 + 12 + 4 + 4 + 4);
    }

    #[test]
    fn named_sites_are_branch_ends() {
        let d = flat();
        let top = d.branch_sites(Branch::Top);
        let bottom = d.branch_sites(Branch::Bottom);
        assert_eq!(d.site(NamedSite::Alpha), top[0]);
        assert_eq!(d.site(NamedSite::Beta), top[4]);
        assert_eq!(d.site(NamedSite::Gamma), bottom[0]);
        assert_eq!(d.site(NamedSite::Delta), bottom[4]);
        assert_eq!(d.branch_path(Branch::Top).len(), 7);
    }

    #[test]
    fn flat_device_is_mirror_symmetric() {
        let d = flat();
        let mut bonds: Vec<_> = d.bonds.iter().map(|b| (b.i, b.j)).collect();
        bonds.sort();
        for vertical in [true, false] {
            let perm = d.mirror_permutation(vertical).expect("mirror exists");
            assert_eq!(permute_bonds(&d, &perm), bonds);
            for s in &d.sites {
                assert_eq!(d.sites[perm[s.id]].onsite, s.onsite);
            }
        }
        let tb = d.mirror_permutation(true).unwrap();
        assert_eq!(tb[d.site(NamedSite::Alpha)], d.site(NamedSite::Gamma));
        let lr = d.mirror_permutation(false).unwrap();
        assert_eq!(lr[d.site(NamedSite::Alpha)], d.site(NamedSite::Beta));
    }

    #[test]
    fn ratchet_ladders() {
        let p = PhysParams::default();
        let d = build_ratchet_device(&p);
        let top: Vec<f64> = d.branch_sites(Branch::Top).iter().map(|&s| units::hartree_to_ev(d.sites[s].onsite)).collect();
        let bottom: Vec<f64> =
            d.branch_sites(Branch::Bottom).iter().map(|&s| units::hartree_to_ev(d.sites[s].onsite)).collect();
        for (k, e) in top.iter().enumerate() {
            assert!((e - (1.1 + 0.1 * k as f64)).abs() < 1e-12, "{top:?}");
        }
        let mut rev = top.clone();
        rev.reverse();
        for (a, b) in bottom.iter().zip(&rev) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(d.bonds, flat().bonds);
        for s in d.region_sites(Region::HotLead).into_iter().chain(d.region_sites(Region::ColdLead)) {
            assert_eq!(d.sites[s].onsite, p.eps0);
        }
    }

    #[test]
    fn ratchet_left_right_mirror_swaps_ladders() {
        let d = build_ratchet_device(&PhysParams::default());
        let lr = d.mirror_permutation(false).unwrap();
        let top = d.branch_sites(Branch::Top);
        let bottom = d.branch_sites(Branch::Bottom);
        for (k, &s) in top.iter().enumerate() {
            assert_eq!(d.sites[lr[s]].onsite, d.sites[bottom[k]].onsite);
        }
    }

    #[test]
    fn connectivity_and_validation_failures() {
        let mut d = flat();
        assert!(d.is_connected());
        d.bonds.retain(|b| !(d.sites[b.i].region == Region::HotLead && d.sites[b.j].region == Region::TopBranch));
        d.bonds.retain(|b| !(d.sites[b.i].region == Region::HotLead && d.sites[b.j].region == Region::BottomBranch));
        assert!(!d.is_connected());
        assert!(d.validate().is_err());

        let mut d = flat();
        let b = d.bonds[0];
        d.bonds.push(b);
        assert!(matches!(d.validate(), Err(Error::InvalidDevice(_))));
    }

    #[test]
    fn site_name_resolution() {
        let d = flat();
        assert_eq!(resolve_site(&d, "beta").unwrap(), d.site(NamedSite::Beta));
        assert_eq!(resolve_site(&d, "β").unwrap(), d.site(NamedSite::Beta));
        assert_eq!(resolve_site(&d, "5").unwrap(), 5);
        assert!(resolve_site(&d, "28").is_err());
        assert!(resolve_site(&d, "epsilon").is_err());
    }

    #[test]
    fn params_reject_non_positive_cold_temperature() {
        let p = PhysParams { kdt: DEFAULT_KT_E, ..Default::default() };
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("temperature of cold bath must be positive"));
    }
}
