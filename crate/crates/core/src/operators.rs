//! Single-particle operators on the site basis.

use std::collections::BTreeSet;

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};
use crate::lattice::{Branch, DeviceSpec, Region};
use crate::linalg::{self, CMat, I};

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMat);

impl HermitianOperator {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let defect = linalg::hermiticity_defect(&m);
        if defect > HERMITIAN_TOL * linalg::max_abs(&m).max(1.0) {
            return Err(Error::NotHermitian { defect });
        }
        Ok(HermitianOperator(m))
    }

    /// Hermitizes `m` before wrapping; for values Hermitian by construction.
    pub(crate) fn from_hermitian_part(m: CMat) -> Self {
        HermitianOperator(linalg::hermitian_part(&m))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        HermitianOperator(linalg::diag_real(values))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.0)
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[(i, j)]
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V^H A V`
    pub fn to_eigenbasis(&self, a: &CMat) -> CMat {
        self.eigenvectors.adjoint() * a * &self.eigenvectors
    }

    /// `V A V^H`
    pub fn from_eigenbasis(&self, a: &CMat) -> CMat {
        &self.eigenvectors * a * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMat {
        self.from_eigenbasis(&linalg::diag_real(&self.eigenvalues))
    }

    pub fn bandwidth(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    /// `f(A) = V f(E) V^H`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> CMat {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&e| f(e)).collect();
        self.from_eigenbasis(&linalg::diag_real(&vals))
    }
}

/// A partition of the sites into a left set `L` and its complement, with the
/// bonds crossing between them. Positive currents flow from `L` outward.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSpec {
    pub left_sites: BTreeSet<usize>,
    /// Bonds `(i, j)` with `i` in `L` and `j` outside.
    pub cut_bonds: Vec<(usize, usize)>,
}

impl CutSpec {
    pub fn new(device: &DeviceSpec, left_sites: BTreeSet<usize>) -> Result<Self> {
        for &s in &left_sites {
            device.check_site(s)?;
        }
        let cut_bonds = device
            .bonds
            .iter()
            .filter_map(|b| match (left_sites.contains(&b.i), left_sites.contains(&b.j)) {
                (true, false) => Some((b.i, b.j)),
                (false, true) => Some((b.j, b.i)),
                _ => None,
            })
            .collect();
        Ok(CutSpec { left_sites, cut_bonds })
    }

    /// Cuts both branches: `L` holds the hot lead plus the branch sites left
    /// of the chosen bonds. Bond index `k` counts along the branch path
    /// (lead, five branch sites, lead), so `k = 0` is the hot-side attachment
    /// and `k = 3` sits between the third and fourth branch sites.
    pub fn branches(device: &DeviceSpec, top_bond: usize, bottom_bond: usize) -> Result<Self> {
        let mut left: BTreeSet<usize> = device.region_sites(Region::HotLead).into_iter().collect();
        for (branch, k) in [(Branch::Top, top_bond), (Branch::Bottom, bottom_bond)] {
            let path = device.branch_path(branch);
            if k + 1 >= path.len() {
                return Err(Error::InvalidDevice(format!(
                    "{branch:?} cut bond index {k} out of range (path has {} bonds)",
                    path.len() - 1
                )));
            }
            left.extend(&path[..=k]);
        }
        CutSpec::new(device, left)
    }

    /// Cut across a single branch bond given by its left and right sites,
    /// with the other branch cut at `other_bond`.
    pub fn at_bond(device: &DeviceSpec, branch: Branch, left: usize, right: usize, other_bond: usize) -> Result<Self> {
        let path = device.branch_path(branch);
        let k = path
            .windows(2)
            .position(|w| w[0] == left && w[1] == right)
            .ok_or_else(|| Error::InvalidDevice(format!("({left}, {right}) is not a bond along the {branch:?} branch")))?;
        match branch {
            Branch::Top => CutSpec::branches(device, k, other_bond),
            Branch::Bottom => CutSpec::branches(device, other_bond, k),
        }
    }
}

pub fn assemble_hamiltonian(device: &DeviceSpec) -> HermitianOperator {
    let n = device.n_sites();
    let mut h = linalg::zeros(n);
    for s in &device.sites {
        h[(s.id, s.id)] = c64::new(s.onsite, 0.0);
    }
    for b in &device.bonds {
        h[(b.i, b.j)] = c64::new(-b.hopping, 0.0);
        h[(b.j, b.i)] = c64::new(-b.hopping, 0.0);
    }
    HermitianOperator(h)
}

pub fn eigendecompose(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let m = h.matrix();
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Decomposition {
        dim: m.nrows(),
        max_abs: linalg::max_abs(m),
        frobenius: linalg::frobenius(m),
    })?;
    let eigenvalues: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
    let eigenvectors = evd.U().to_owned();
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Dipole coupling `-(r . u)` masked to one lead, with positions measured
/// from the device centroid.
pub fn dipole_coupling_operator(device: &DeviceSpec, region: Region, axis: Axis) -> Result<HermitianOperator> {
    if device.region_sites(region).is_empty() {
        return Err(Error::InvalidDevice(format!("region {region:?} has no sites")));
    }
    let c = device.centroid();
    let ax = axis.index();
    let diag: Vec<f64> = device
        .sites
        .iter()
        .map(|s| if s.region == region { -(s.position[ax] - c[ax]) } else { 0.0 })
        .collect();
    Ok(HermitianOperator::diagonal(&diag))
}

pub fn site_projector(device: &DeviceSpec, k: usize) -> Result<HermitianOperator> {
    device.check_site(k)?;
    let mut diag = vec![0.0; device.n_sites()];
    diag[k] = 1.0;
    Ok(HermitianOperator::diagonal(&diag))
}

pub fn region_number_operator(device: &DeviceSpec, sites: &BTreeSet<usize>) -> Result<HermitianOperator> {
    let mut diag = vec![0.0; device.n_sites()];
    for &s in sites {
        device.check_site(s)?;
        diag[s] = 1.0;
    }
    Ok(HermitianOperator::diagonal(&diag))
}

/// Sum of local energy densities over `sites`: on-site terms and internal
/// bonds in full, bonds leaving the set at half weight.
pub fn region_energy_operator(device: &DeviceSpec, h: &HermitianOperator, sites: &BTreeSet<usize>) -> Result<HermitianOperator> {
    let n = device.n_sites();
    if h.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.dim() });
    }
    for &s in sites {
        device.check_site(s)?;
    }
    let inside: Vec<bool> = (0..n).map(|i| sites.contains(&i)).collect();
    let m = h.matrix();
    let out = Mat::from_fn(n, n, |i, j| {
        let w = match (inside[i], inside[j]) {
            (true, true) => 1.0,
            (true, false) | (false, true) => 0.5,
            (false, false) => 0.0,
        };
        m[(i, j)] * w
    });
    Ok(HermitianOperator(out))
}

/// `-i [H, A]`: the rate at which `<A>` flows out of the region `A` measures.
pub fn current_generator(h: &HermitianOperator, a: &HermitianOperator) -> Result<HermitianOperator> {
    if h.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: a.dim() });
    }
    let c = linalg::commutator(h.matrix(), a.matrix());
    Ok(HermitianOperator::from_hermitian_part(linalg::scale(&c, -I)))
}

fn bond_term(h: &CMat, i: usize, j: usize) -> CMat {
    let n = h.nrows();
    let mut v = linalg::zeros(n);
    v[(i, j)] = h[(i, j)];
    v[(j, i)] = h[(j, i)];
    v
}

/// Particle-current generator for one cut bond `(i in L, j outside)`; the
/// generators of all cut bonds sum to `-i [H, N_L]`.
pub fn bond_particle_current_operator(h: &HermitianOperator, cut: &CutSpec, bond: (usize, usize)) -> Result<HermitianOperator> {
    check_cut_bond(cut, bond)?;
    let n = h.dim();
    let v = bond_term(h.matrix(), bond.0, bond.1);
    let mut n_l = linalg::zeros(n);
    for &s in &cut.left_sites {
        n_l[(s, s)] = c64::new(1.0, 0.0);
    }
    let c = linalg::commutator(&v, &n_l);
    Ok(HermitianOperator::from_hermitian_part(linalg::scale(&c, -I)))
}

/// Energy-current generator for one cut bond, `-(i/2) [H_R - H_L, V_b]` with
/// `H_L`, `H_R` the Hamiltonian restricted to either side and `V_b` the
/// hopping across the bond. Summed over all cut bonds this equals
/// `-i [H, H_L]` for the half-bond region energy `H_L`.
pub fn bond_energy_current_operator(h: &HermitianOperator, cut: &CutSpec, bond: (usize, usize)) -> Result<HermitianOperator> {
    check_cut_bond(cut, bond)?;
    let n = h.dim();
    let m = h.matrix();
    let inside: Vec<bool> = (0..n).map(|i| cut.left_sites.contains(&i)).collect();
    let diff = Mat::from_fn(n, n, |i, j| match (inside[i], inside[j]) {
        (false, false) => m[(i, j)],
        (true, true) => -m[(i, j)],
        _ => c64::new(0.0, 0.0),
    });
    let v = bond_term(m, bond.0, bond.1);
    let c = linalg::commutator(&diff, &v);
    Ok(HermitianOperator::from_hermitian_part(linalg::scale(&c, -0.5 * I)))
}

fn check_cut_bond(cut: &CutSpec, bond: (usize, usize)) -> Result<()> {
    if cut.cut_bonds.contains(&bond) {
        Ok(())
    } else {
        Err(Error::InvalidDevice(format!("({}, {}) is not a bond of this cut", bond.0, bond.1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_flat_device, build_ratchet_device, units, NamedSite, PhysParams};
    use crate::linalg::max_abs_diff;

    fn flat() -> DeviceSpec {
        build_flat_device(&PhysParams::default())
    }

    fn chain2(eps: f64, t: f64) -> HermitianOperator {
        HermitianOperator::new(Mat::from_fn(2, 2, |i, j| c64::new(if i == j { eps } else { -t }, 0.0))).unwrap()
    }

    fn state_2site() -> CMat {
        // (|1> + i|2>)/sqrt(2)
        let psi = [c64::new(1.0, 0.0) / 2f64.sqrt(), c64::new(0.0, 1.0) / 2f64.sqrt()];
        Mat::from_fn(2, 2, |i, j| psi[i] * psi[j].conj())
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = Mat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.0));
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn two_site_chain_spectrum() {
        let (eps, t) = (0.036, 0.018);
        let spec = eigendecompose(&chain2(eps, t)).unwrap();
        assert!((spec.eigenvalues[0] - (eps - t)).abs() < 1e-15);
        assert!((spec.eigenvalues[1] - (eps + t)).abs() < 1e-15);
        // Bonding state (1, 1)/sqrt 2 up to phase.
        let v = spec.eigenvectors.col(0);
        assert!((v[0].norm() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((v[0] - v[1]).norm() < 1e-12);
    }

    #[test]
    fn identity_spectrum() {
        let spec = eigendecompose(&HermitianOperator::diagonal(&[1.0; 4])).unwrap();
        assert!(spec.eigenvalues.iter().all(|&e| (e - 1.0).abs() < 1e-15));
    }

    #[test]
    fn flat_hamiltonian_entries() {
        let p = PhysParams::default();
        let d = flat();
        let h = assemble_hamiltonian(&d);
        let m = h.matrix();
        let mut hops = 0;
        for i in 0..28 {
            assert_eq!(m[(i, i)].re, p.eps0);
            for j in (i + 1)..28 {
                if m[(i, j)].norm() != 0.0 {
                    assert_eq!(m[(i, j)], c64::new(-p.hopping, 0.0));
                    assert_eq!(m[(j, i)], m[(i, j)]);
                    hops += 1;
                }
            }
        }
        assert_eq!(hops, d.bonds.len());
        assert_eq!(hops, 36);
    }

    #[test]
    fn ratchet_hamiltonian_diagonal() {
        let d = build_ratchet_device(&PhysParams::default());
        let h = assemble_hamiltonian(&d);
        for (k, &s) in d.branch_sites(Branch::Top).iter().enumerate() {
            let ev = units::hartree_to_ev(h.get(s, s).re);
            assert!((ev - (1.1 + 0.1 * k as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_invariants_on_flat_device() {
        let h = assemble_hamiltonian(&flat());
        let spec = eigendecompose(&h).unwrap();
        let emax = spec.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        assert!(max_abs_diff(&spec.reconstruct(), h.matrix()) <= 1e-10 * emax);
        let vtv = spec.eigenvectors.adjoint() * &spec.eigenvectors;
        assert!(max_abs_diff(&vtv, &linalg::identity(28)) < 1e-10);
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn flat_spectrum_is_symmetric_about_eps0() {
        // Bipartite hopping graph: E - eps0 and eps0 - E come in pairs.
        let p = PhysParams::default();
        let spec = eigendecompose(&assemble_hamiltonian(&flat())).unwrap();
        let n = spec.dim();
        for k in 0..n {
            let a = spec.eigenvalues[k] - p.eps0;
            let b = spec.eigenvalues[n - 1 - k] - p.eps0;
            assert!((a + b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn flat_hamiltonian_commutes_with_mirrors() {
        let d = flat();
        let h = assemble_hamiltonian(&d);
        for vertical in [true, false] {
            let perm = d.mirror_permutation(vertical).unwrap();
            assert_eq!(max_abs_diff(&linalg::permute(h.matrix(), &perm), h.matrix()), 0.0);
        }
    }

    #[test]
    fn dipole_mask_and_values() {
        let d = flat();
        let sx = dipole_coupling_operator(&d, Region::HotLead, Axis::X).unwrap();
        let c = d.centroid();
        for s in &d.sites {
            let v = sx.get(s.id, s.id).re;
            if s.region == Region::HotLead {
                assert_eq!(v, -(s.position[0] - c[0]));
            } else {
                assert_eq!(v, 0.0);
            }
        }
        // Lead column at centroid-relative x = -5, -4, -3.
        assert_eq!(sx.get(0, 0).re, 5.0);
    }

    #[test]
    fn dipole_single_site_at_x_2() {
        let mut d = flat();
        // Keep only one site in the hot region at centroid-relative x = 2.
        let c = d.centroid();
        let target = d.sites.iter().find(|s| (s.position[0] - c[0] - 2.0).abs() < 1e-12).unwrap().id;
        for s in &mut d.sites {
            if s.region == Region::HotLead {
                s.region = Region::TopBranch;
            }
        }
        d.sites[target].region = Region::HotLead;
        let sx = dipole_coupling_operator(&d, Region::HotLead, Axis::X).unwrap();
        assert_eq!(sx.get(target, target).re, -2.0);
    }

    #[test]
    fn dipole_left_right_mirror() {
        let d = flat();
        let lr = d.mirror_permutation(false).unwrap();
        let hot = dipole_coupling_operator(&d, Region::HotLead, Axis::X).unwrap();
        let cold = dipole_coupling_operator(&d, Region::ColdLead, Axis::X).unwrap();
        let mapped = linalg::permute(hot.matrix(), &lr);
        assert!(max_abs_diff(&mapped, &linalg::scale(cold.matrix(), c64::new(-1.0, 0.0))) < 1e-14);
        let hot_y = dipole_coupling_operator(&d, Region::HotLead, Axis::Y).unwrap();
        let cold_y = dipole_coupling_operator(&d, Region::ColdLead, Axis::Y).unwrap();
        assert!(max_abs_diff(&linalg::permute(hot_y.matrix(), &lr), cold_y.matrix()) < 1e-14);
    }

    #[test]
    fn projector_properties() {
        let d = flat();
        let h = assemble_hamiltonian(&d);
        let k = d.site(NamedSite::Beta);
        let p = site_projector(&d, k).unwrap();
        let pm = p.matrix();
        assert_eq!(max_abs_diff(&(pm * pm), pm), 0.0);
        assert_eq!(linalg::trace(pm).re, 1.0);
        let php = pm * h.matrix() * pm;
        assert!(max_abs_diff(&php, &linalg::scale(pm, h.get(k, k))) < 1e-15);
        assert!(matches!(site_projector(&d, 99), Err(Error::InvalidSite { .. })));
    }

    #[test]
    fn number_operator_edge_cases() {
        let d = flat();
        let all: BTreeSet<usize> = (0..28).collect();
        let n_all = region_number_operator(&d, &all).unwrap();
        assert_eq!(max_abs_diff(n_all.matrix(), &linalg::identity(28)), 0.0);
        let n_none = region_number_operator(&d, &BTreeSet::new()).unwrap();
        assert_eq!(linalg::max_abs(n_none.matrix()), 0.0);
        let some: BTreeSet<usize> = [1, 4, 9].into();
        assert_eq!(linalg::trace(region_number_operator(&d, &some).unwrap().matrix()).re, 3.0);
    }

    #[test]
    fn region_energy_partition() {
        let d = flat();
        let h = assemble_hamiltonian(&d);
        let all: BTreeSet<usize> = (0..28).collect();
        assert_eq!(max_abs_diff(region_energy_operator(&d, &h, &all).unwrap().matrix(), h.matrix()), 0.0);

        let l: BTreeSet<usize> = [0, 1, 2, 9, 10, 20].into();
        let r: BTreeSet<usize> = all.difference(&l).copied().collect();
        let hl = region_energy_operator(&d, &h, &l).unwrap();
        let hr = region_energy_operator(&d, &h, &r).unwrap();
        assert!(max_abs_diff(&(hl.matrix() + hr.matrix()), h.matrix()) < 1e-15);

        // Single site: onsite plus half of each incident bond.
        let one: BTreeSet<usize> = [10].into();
        let h1 = region_energy_operator(&d, &h, &one).unwrap();
        assert_eq!(h1.get(10, 10), h.get(10, 10));
        assert_eq!(h1.get(10, 11), h.get(10, 11) * 0.5);
        assert_eq!(h1.get(9, 10), h.get(9, 10) * 0.5);
        assert_eq!(h1.get(9, 9).norm(), 0.0);
    }

    #[test]
    fn current_generator_basics() {
        let d = flat();
        let h = assemble_hamiltonian(&d);
        let id = HermitianOperator::diagonal(&[1.0; 28]);
        assert_eq!(linalg::max_abs(current_generator(&h, &id).unwrap().matrix()), 0.0);

        let l: BTreeSet<usize> = [0, 1, 2, 3, 9, 10].into();
        let comp: BTreeSet<usize> = (0..28).filter(|i| !l.contains(i)).collect();
        let jl = current_generator(&h, &region_number_operator(&d, &l).unwrap()).unwrap();
        let jr = current_generator(&h, &region_number_operator(&d, &comp).unwrap()).unwrap();
        assert!(max_abs_diff(&(jl.matrix() + jr.matrix()), &linalg::zeros(28)) < 1e-15);
    }

    #[test]
    fn two_site_particle_current_is_t() {
        let t = 0.018;
        let h = chain2(0.036, t);
        let n1 = HermitianOperator::diagonal(&[1.0, 0.0]);
        let j = current_generator(&h, &n1).unwrap();
        let rho = state_2site();
        let val = linalg::trace_product(&rho, j.matrix());
        assert!((val.re - t).abs() < 1e-15 && val.im.abs() < 1e-15, "{val}");
    }

    #[test]
    fn bond_generators_sum_to_region_generators() {
        let d = flat();
        let h = assemble_hamiltonian(&d);
        let cut = CutSpec::branches(&d, 3, 3).unwrap();
        assert_eq!(cut.cut_bonds.len(), 2);
        let n_l = region_number_operator(&d, &cut.left_sites).unwrap();
        let h_l = region_energy_operator(&d, &h, &cut.left_sites).unwrap();
        let jp = current_generator(&h, &n_l).unwrap();
        let je = current_generator(&h, &h_l).unwrap();
        let mut sp = linalg::zeros(28);
        let mut se = linalg::zeros(28);
        for &b in &cut.cut_bonds {
            sp = sp + bond_particle_current_operator(&h, &cut, b).unwrap().matrix();
            se = se + bond_energy_current_operator(&h, &cut, b).unwrap().matrix();
        }
        assert!(max_abs_diff(&sp, jp.matrix()) < 1e-15);
        assert!(max_abs_diff(&se, je.matrix()) < 1e-15);
    }

    #[test]
    fn branch_cut_geometry() {
        let d = flat();
        let cut = CutSpec::branches(&d, 3, 3).unwrap();
        let top = d.branch_sites(Branch::Top);
        let bottom = d.branch_sites(Branch::Bottom);
        assert!(cut.cut_bonds.contains(&(top[2], top[3])));
        assert!(cut.cut_bonds.contains(&(bottom[2], bottom[3])));
        assert!(CutSpec::branches(&d, 6, 3).is_err());
        let at = CutSpec::at_bond(&d, Branch::Top, top[3], top[4], 3).unwrap();
        assert!(at.cut_bonds.contains(&(top[3], top[4])));
    }
}
