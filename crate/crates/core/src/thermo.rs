//! Currents, heat flows and entropy bookkeeping at the steady state.
//!
//! Heat flows are counted positive when energy enters the system from the
//! channel. Entropy flows follow the same convention, `Phi = Qdot / kT`, and
//! the entropy production rate is `P = -(Qdot_H / kT_H + Qdot_C / kT_C)`, with
//! `k_B = 1`. Particle and energy currents are positive from left to right,
//! so a positive `j_p_up` is a clockwise ring current.

use std::collections::BTreeSet;

use faer::{c64, Mat, Side};
use twofloat::TwoFloat;

use crate::bath::{apply_dissipator, BathLabel, DissipatorChannel};
use crate::dynamics::NEGATIVITY_TOL;
use crate::error::{Error, Result};
use crate::extended::{self, DdMat};
use crate::lattice::{Branch, DeviceSpec, DissipatorMode, PhysParams};
use crate::linalg::{self, CMat};
use crate::operators::{
    bond_energy_current_operator, bond_particle_current_operator, current_generator, region_energy_operator, CutSpec,
    HermitianOperator,
};

/// One steady-state row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservablesRecord {
    pub gamma_d: f64,
    pub kdt: f64,
    pub j_p_up: f64,
    pub j_h_up: f64,
    pub j_h_down: f64,
    pub qdot_h: f64,
    pub qdot_c: f64,
    pub qdot_d: f64,
    pub phi_h: f64,
    pub phi_c: f64,
    pub p_prod: f64,
    pub s_vn: f64,
    pub residual: f64,
    pub min_eig: f64,
}

pub const COLUMNS: [&str; 14] = [
    "gamma_D", "kdT", "j_p_up", "j_h_up", "j_h_down", "Qdot_H", "Qdot_C", "Qdot_D", "Phi_H", "Phi_C", "P_prod", "S_vn", "residual",
    "min_eig",
];

impl ObservablesRecord {
    pub fn values(&self) -> [f64; 14] {
        [
            self.gamma_d,
            self.kdt,
            self.j_p_up,
            self.j_h_up,
            self.j_h_down,
            self.qdot_h,
            self.qdot_c,
            self.qdot_d,
            self.phi_h,
            self.phi_c,
            self.p_prod,
            self.s_vn,
            self.residual,
            self.min_eig,
        ]
    }

    pub fn from_values(v: [f64; 14]) -> Self {
        ObservablesRecord {
            gamma_d: v[0],
            kdt: v[1],
            j_p_up: v[2],
            j_h_up: v[3],
            j_h_down: v[4],
            qdot_h: v[5],
            qdot_c: v[6],
            qdot_d: v[7],
            phi_h: v[8],
            phi_c: v[9],
            p_prod: v[10],
            s_vn: v[11],
            residual: v[12],
            min_eig: v[13],
        }
    }

    pub fn column_index(name: &str) -> Result<usize> {
        COLUMNS.iter().position(|c| *c == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.values()[Self::column_index(name)?])
    }
}

/// Currents on the two bonds next to the observer site along its branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverSideCurrents {
    pub site: usize,
    pub j_p_before: f64,
    pub j_p_after: f64,
    pub j_h_before: f64,
    pub j_h_after: f64,
}

/// Quantities reported beside the CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxObservables {
    /// Particle current through the bottom cut, left to right.
    pub j_p_down: f64,
    pub observer: Option<ObserverSideCurrents>,
    pub observer_entropy_flow: f64,
}

pub fn expectation(rho: &CMat, op: &HermitianOperator) -> f64 {
    linalg::trace_product(rho, op.matrix()).re
}

/// `Tr(rho (-i)[H, N_L])`, summed over the bonds of the cut.
pub fn particle_current(rho: &CMat, h: &HermitianOperator, cut: &CutSpec) -> Result<f64> {
    check_dims(rho, h)?;
    let hm = h.matrix();
    Ok(cut.cut_bonds.iter().map(|&(i, j)| 2.0 * (hm[(j, i)] * rho[(i, j)]).im).sum())
}

/// `Tr(rho (-i)[H, H_L])` with `H_L` the half-bond energy of the left set.
pub fn energy_current(device: &DeviceSpec, rho: &CMat, h: &HermitianOperator, cut: &CutSpec) -> Result<f64> {
    check_dims(rho, h)?;
    let h_l = region_energy_operator(device, h, &cut.left_sites)?;
    Ok(expectation(rho, &current_generator(h, &h_l)?))
}

pub fn bond_particle_current(rho: &CMat, h: &HermitianOperator, cut: &CutSpec, bond: (usize, usize)) -> Result<f64> {
    check_dims(rho, h)?;
    Ok(expectation(rho, &bond_particle_current_operator(h, cut, bond)?))
}

pub fn bond_energy_current(rho: &CMat, h: &HermitianOperator, cut: &CutSpec, bond: (usize, usize)) -> Result<f64> {
    check_dims(rho, h)?;
    Ok(expectation(rho, &bond_energy_current_operator(h, cut, bond)?))
}

fn check_dims(rho: &CMat, h: &HermitianOperator) -> Result<()> {
    if rho.nrows() != h.dim() || rho.ncols() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: rho.nrows() });
    }
    Ok(())
}

/// `Tr(H D[rho])` for one channel.
pub fn channel_heat_flow(rho: &CMat, h: &HermitianOperator, ch: &DissipatorChannel, mode: DissipatorMode) -> Result<f64> {
    check_dims(rho, h)?;
    Ok(linalg::trace_product(h.matrix(), &apply_dissipator(ch, rho, mode)?).re)
}

/// Heat flows into the system from the hot bath, the cold bath and the
/// observer, each summed over its channels.
pub fn heat_flows(rho: &CMat, h: &HermitianOperator, channels: &[DissipatorChannel], mode: DissipatorMode) -> Result<[f64; 3]> {
    check_dims(rho, h)?;
    heat_flows_precise(&DdMat::from_cmat(rho), h, channels, mode)
}

/// [`heat_flows`] for a state held in double-double precision. Per-bath sums
/// are accumulated before rounding.
pub fn heat_flows_precise(rho: &DdMat, h: &HermitianOperator, channels: &[DissipatorChannel], mode: DissipatorMode) -> Result<[f64; 3]> {
    let mut q = [TwoFloat::from(0.0); 3];
    for ch in channels {
        let idx = match ch.label() {
            Some(BathLabel::Hot) => 0,
            Some(BathLabel::Cold) => 1,
            None => 2,
        };
        q[idx] += extended::heat_flow(h.matrix(), ch, mode, rho)?;
    }
    Ok(q.map(|x| x.hi()))
}

/// Entropy flow into the system carried by heat `qdot` entering at `kt`.
pub fn entropy_flow(qdot: f64, kt: f64) -> Result<f64> {
    if !(kt > 0.0) {
        return Err(Error::Domain { what: "bath temperature", value: kt, requirement: "positive" });
    }
    Ok(qdot / kt)
}

pub fn entropy_production(record: &ObservablesRecord, kt_h: f64, kt_c: f64) -> Result<f64> {
    Ok(-(entropy_flow(record.qdot_h, kt_h)? + entropy_flow(record.qdot_c, kt_c)?))
}

/// `-Tr(D_obs[rho] ln sigma)` with the observer state regularized to
/// `sigma = (1 - eta)|k><k| + eta I / N`.
pub fn observer_entropy_flow(rho: &CMat, k: usize, gamma: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain { what: "observer regularization", value: eta, requirement: "strictly between 0 and 1" });
    }
    let n = rho.nrows();
    if k >= n {
        return Err(Error::InvalidSite { id: k, n_sites: n });
    }
    let ch = DissipatorChannel::Observer { site: k, gamma };
    let d = apply_dissipator(&ch, rho, DissipatorMode::Hermitian)?;
    let sigma = Mat::from_fn(n, n, |i, j| {
        let proj = if i == k && j == k { 1.0 - eta } else { 0.0 };
        let mixed = if i == j { eta / n as f64 } else { 0.0 };
        c64::new(proj + mixed, 0.0)
    });
    let ln_sigma = matrix_log(&sigma)?;
    Ok(-linalg::trace_product(&d, &ln_sigma).re)
}

fn matrix_log(a: &CMat) -> Result<CMat> {
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Decomposition {
        dim: a.nrows(),
        max_abs: linalg::max_abs(a),
        frobenius: linalg::frobenius(a),
    })?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let n = a.nrows();
    let mut scaled = u.to_owned();
    for j in 0..n {
        let l = s[j].re.ln();
        for i in 0..n {
            scaled[(i, j)] *= l;
        }
    }
    Ok(&scaled * u.adjoint())
}

/// Von Neumann entropy `-sum p ln p`, with negative eigenvalues clamped to 0.
pub fn vn_entropy(rho: &CMat) -> Result<f64> {
    let p = crate::dynamics::hermitian_eigenvalues(rho)?;
    if let Some(&min) = p.first() {
        if min < -NEGATIVITY_TOL {
            log::warn!("clamping eigenvalue {min:e} to zero in the entropy");
        }
    }
    Ok(-p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>())
}

/// The cut bond of `branch` in a branch cut.
pub fn branch_cut_bond(device: &DeviceSpec, cut: &CutSpec, branch: Branch) -> Result<(usize, usize)> {
    let on_branch: BTreeSet<usize> = device.branch_path(branch).into_iter().collect();
    cut.cut_bonds
        .iter()
        .copied()
        .find(|(i, j)| on_branch.contains(i) && on_branch.contains(j))
        .ok_or_else(|| Error::InvalidDevice(format!("cut does not cross the {branch:?} branch")))
}

/// Inputs for evaluating the observables of one steady state.
pub struct ObservationInput<'a> {
    pub device: &'a DeviceSpec,
    pub params: &'a PhysParams,
    pub h: &'a HermitianOperator,
    pub channels: &'a [DissipatorChannel],
    pub rho: &'a CMat,
    /// Extended-precision copy of `rho`, used for the heat flows when present.
    pub rho_precise: Option<&'a DdMat>,
    pub top_bond: usize,
    pub bottom_bond: usize,
    pub residual: f64,
    pub min_eig: f64,
}

/// Regularization of the observer state used for the reported entropy flow.
pub const OBSERVER_ETA: f64 = 1e-3;

pub fn observe(input: &ObservationInput<'_>) -> Result<(ObservablesRecord, AuxObservables)> {
    let ObservationInput { device, params, h, channels, rho, .. } = *input;
    let cut = CutSpec::branches(device, input.top_bond, input.bottom_bond)?;
    let up = branch_cut_bond(device, &cut, Branch::Top)?;
    let down = branch_cut_bond(device, &cut, Branch::Bottom)?;
    let j_p_up = bond_particle_current(rho, h, &cut, up)?;
    let j_p_down = bond_particle_current(rho, h, &cut, down)?;
    let j_h_up = bond_energy_current(rho, h, &cut, up)?;
    let j_h_down = bond_energy_current(rho, h, &cut, down)?;
    let [qdot_h, qdot_c, qdot_d] = match input.rho_precise {
        Some(precise) => heat_flows_precise(precise, h, channels, params.mode)?,
        None => heat_flows(rho, h, channels, params.mode)?,
    };
    let (kt_h, kt_c) = (params.kt_hot(), params.kt_cold());
    let phi_h = entropy_flow(qdot_h, kt_h)?;
    let phi_c = entropy_flow(qdot_c, kt_c)?;
    let mut record = ObservablesRecord {
        gamma_d: params.gamma_d,
        kdt: params.kdt,
        j_p_up,
        j_h_up,
        j_h_down,
        qdot_h,
        qdot_c,
        qdot_d,
        phi_h,
        phi_c,
        p_prod: 0.0,
        s_vn: vn_entropy(rho)?,
        residual: input.residual,
        min_eig: input.min_eig,
    };
    record.p_prod = entropy_production(&record, kt_h, kt_c)?;

    let (observer, observer_entropy) = match params.observer_site {
        Some(k) => {
            let side = observer_side_currents(device, h, rho, k, input.top_bond, input.bottom_bond)?;
            (side, observer_entropy_flow(rho, k, params.gamma_d, OBSERVER_ETA)?)
        }
        None => (None, 0.0),
    };
    Ok((record, AuxObservables { j_p_down, observer, observer_entropy_flow: observer_entropy }))
}

/// Currents on both sides of an observer sitting on a branch; `None` when
/// the observer is on a lead.
pub fn observer_side_currents(
    device: &DeviceSpec,
    h: &HermitianOperator,
    rho: &CMat,
    site: usize,
    top_bond: usize,
    bottom_bond: usize,
) -> Result<Option<ObserverSideCurrents>> {
    for branch in [Branch::Top, Branch::Bottom] {
        let path = device.branch_path(branch);
        let Some(pos) = path.iter().position(|&s| s == site) else { continue };
        if pos == 0 || pos + 1 == path.len() {
            continue;
        }
        let other = if branch == Branch::Top { bottom_bond } else { top_bond };
        let mut out = [(0.0, 0.0); 2];
        for (slot, (a, b)) in [(path[pos - 1], path[pos]), (path[pos], path[pos + 1])].into_iter().enumerate() {
            let cut = CutSpec::at_bond(device, branch, a, b, other)?;
            out[slot] = (bond_particle_current(rho, h, &cut, (a, b))?, bond_energy_current(rho, h, &cut, (a, b))?);
        }
        return Ok(Some(ObserverSideCurrents {
            site,
            j_p_before: out[0].0,
            j_p_after: out[1].0,
            j_h_before: out[0].1,
            j_h_after: out[1].1,
        }));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::all_channels;
    use crate::dynamics::{assemble_liouvillian, gibbs_state, steady_state, DensityMatrix};
    use crate::lattice::{build_flat_device, NamedSite};
    use crate::operators::{assemble_hamiltonian, eigendecompose, region_number_operator};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_state(n: usize, seed: u64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let p = &a * a.adjoint();
        let tr = linalg::trace(&p).re;
        linalg::hermitian_part(&linalg::scale(&p, c64::new(1.0 / tr, 0.0)))
    }

    struct Solved {
        device: DeviceSpec,
        params: PhysParams,
        h: HermitianOperator,
        channels: Vec<DissipatorChannel>,
        rho: CMat,
        precise: DdMat,
        residual: f64,
        min_eig: f64,
    }

    fn solve(params: PhysParams) -> Solved {
        let device = build_flat_device(&params);
        let h = assemble_hamiltonian(&device);
        let spec = eigendecompose(&h).unwrap();
        let channels = all_channels(&device, &params, &spec).unwrap();
        let l = assemble_liouvillian(&h, &channels, params.mode).unwrap();
        let r = steady_state(&l).unwrap();
        Solved { device, params, h, channels, rho: r.rho_ss.into_matrix(), precise: r.rho_precise, residual: r.residual, min_eig: r.min_eigenvalue }
    }

    fn observe_solved(s: &Solved) -> (ObservablesRecord, AuxObservables) {
        observe(&ObservationInput {
            device: &s.device,
            params: &s.params,
            h: &s.h,
            channels: &s.channels,
            rho: &s.rho,
            rho_precise: Some(&s.precise),
            top_bond: 3,
            bottom_bond: 3,
            residual: s.residual,
            min_eig: s.min_eig,
        })
        .unwrap()
    }

    #[test]
    fn two_site_current_is_the_hopping() {
        let t = 0.3;
        let h = HermitianOperator::new(Mat::from_fn(2, 2, |i, j| c64::new(if i == j { 0.0 } else { -t }, 0.0))).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [c64::new(s, 0.0), c64::new(0.0, s)];
        let rho = Mat::from_fn(2, 2, |i, j| psi[i] * psi[j].conj());
        let cut = CutSpec { left_sites: [0].into_iter().collect(), cut_bonds: vec![(0, 1)] };
        assert!((particle_current(&rho, &h, &cut).unwrap() - t).abs() < 1e-15);
    }

    #[test]
    fn currents_match_commutator_generators() {
        let p = PhysParams::default();
        let d = build_flat_device(&p);
        let h = assemble_hamiltonian(&d);
        let cut = CutSpec::branches(&d, 2, 4).unwrap();
        for seed in 0..5 {
            let rho = random_state(28, seed);
            let n_l = region_number_operator(&d, &cut.left_sites).unwrap();
            let direct = expectation(&rho, &current_generator(&h, &n_l).unwrap());
            assert!((particle_current(&rho, &h, &cut).unwrap() - direct).abs() < 1e-14);
            let per_bond: f64 = cut.cut_bonds.iter().map(|&b| bond_energy_current(&rho, &h, &cut, b).unwrap()).sum();
            assert!((energy_current(&d, &rho, &h, &cut).unwrap() - per_bond).abs() < 1e-14);
            let diag = linalg::diag_real(&(0..28).map(|i| rho[(i, i)].re).collect::<Vec<_>>());
            assert_eq!(particle_current(&diag, &h, &cut).unwrap(), 0.0);
        }
    }

    #[test]
    fn gibbs_state_carries_no_energy_current() {
        let p = PhysParams::default();
        let d = build_flat_device(&p);
        let h = assemble_hamiltonian(&d);
        let g = gibbs_state(&eigendecompose(&h).unwrap(), 0.008).unwrap();
        let cut = CutSpec::branches(&d, 3, 3).unwrap();
        assert!(energy_current(&d, g.matrix(), &h, &cut).unwrap().abs() < 1e-10);
    }

    #[test]
    fn entropy_flow_basics() {
        assert_eq!(entropy_flow(0.0, 0.01).unwrap(), 0.0);
        let q = 3.7e-6;
        assert_eq!(entropy_flow(2.0 * q, 0.01).unwrap(), 2.0 * entropy_flow(q, 0.01).unwrap());
        assert!(entropy_flow(1.0, 0.0).is_err());
        assert!(entropy_flow(1.0, -1.0).is_err());
    }

    #[test]
    fn zero_coupling_gives_zero_heat_flow() {
        let p = PhysParams { lambda: 0.0, kdt: 0.002, ..PhysParams::default() };
        let d = build_flat_device(&p);
        let h = assemble_hamiltonian(&d);
        let spec = eigendecompose(&h).unwrap();
        let rho = random_state(28, 1);
        for ch in all_channels(&d, &p, &spec).unwrap() {
            assert_eq!(channel_heat_flow(&rho, &h, &ch, p.mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn von_neumann_entropy() {
        let mut pure = linalg::zeros(4);
        pure[(2, 2)] = c64::new(1.0, 0.0);
        assert!(vn_entropy(&pure).unwrap().abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(28);
        assert!((vn_entropy(mixed.matrix()).unwrap() - 28f64.ln()).abs() < 1e-13);
        let p = PhysParams::default();
        let h = assemble_hamiltonian(&build_flat_device(&p));
        let spec = eigendecompose(&h).unwrap();
        let kt = 0.008;
        let g = gibbs_state(&spec, kt).unwrap();
        let z: f64 = spec.eigenvalues.iter().map(|e| (-e / kt).exp()).sum();
        let mean_e = expectation(g.matrix(), &h);
        let s = vn_entropy(g.matrix()).unwrap();
        assert!((s - (mean_e / kt + z.ln())).abs() < 1e-10, "{s}");
    }

    #[test]
    fn observer_entropy_flow_vanishes_for_random_states() {
        for seed in 0..20 {
            let rho = random_state(28, seed);
            let values: Vec<f64> = [1e-1, 1e-3, 1e-6].iter().map(|eta| observer_entropy_flow(&rho, 13, 0.05, *eta).unwrap()).collect();
            for v in &values {
                assert!(v.abs() < 1e-12, "{v}");
            }
            assert_eq!(observer_entropy_flow(&rho, 13, 0.0, 1e-3).unwrap(), 0.0);
        }
        let rho = random_state(4, 0);
        assert!(observer_entropy_flow(&rho, 1, 0.1, 0.0).is_err());
        assert!(observer_entropy_flow(&rho, 1, 0.1, 1.0).is_err());
        assert!(observer_entropy_flow(&rho, 4, 0.1, 0.5).is_err());
    }

    #[test]
    fn equilibrium_has_no_flows() {
        let s = solve(PhysParams::default());
        let (r, aux) = observe_solved(&s);
        for v in [r.j_p_up, r.j_h_up, r.j_h_down, r.qdot_h, r.qdot_c, r.qdot_d, aux.j_p_down] {
            assert!(v.abs() < 1e-9, "{r:?}");
        }
        assert!(r.p_prod.abs() < 1e-9);
    }

    #[test]
    fn thermal_gradient_splits_heat_equally_between_branches() {
        let s = solve(PhysParams { kdt: 0.002, ..PhysParams::default() });
        let (r, aux) = observe_solved(&s);
        assert!(r.j_h_up > 0.0);
        assert!((r.j_h_up - r.j_h_down).abs() < 1e-9 * r.j_h_up.abs().max(1e-12));
        assert!(r.j_p_up.abs() < 1e-9 && aux.j_p_down.abs() < 1e-9);
        let scale = r.qdot_h.abs();
        assert!((r.j_h_up + r.j_h_down - r.qdot_h).abs() < 1e-9 * scale.max(1e-12), "{r:?}");
        assert!((r.qdot_h + r.qdot_c).abs() < 1e-9 * scale);
        assert!(r.p_prod > 0.0);
        assert!((r.phi_h + r.phi_c + r.p_prod).abs() < 1e-15);
    }

    #[test]
    fn observer_conserves_energy_and_particles() {
        let beta = build_flat_device(&PhysParams::default()).site(NamedSite::Beta);
        let p = PhysParams { kdt: 0.001, observer_site: Some(beta), gamma_d: 0.02, ..PhysParams::default() };
        let s = solve(p);
        let (r, aux) = observe_solved(&s);
        let scale = r.qdot_h.abs().max(r.qdot_c.abs()).max(r.qdot_d.abs());
        assert!((r.qdot_h + r.qdot_c + r.qdot_d).abs() <= 1e-9 * scale, "{r:?}");
        assert!((r.j_p_up + aux.j_p_down).abs() <= 1e-9 * r.j_p_up.abs().max(1e-15));
        let side = aux.observer.unwrap();
        assert!((side.j_p_before - side.j_p_after).abs() <= 1e-9 * side.j_p_before.abs().max(1e-15));
        assert!(r.p_prod >= -1e-10);
        assert!(aux.observer_entropy_flow.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn particle_current_is_antisymmetric_under_conjugation(seed in any::<u64>()) {
            let p = PhysParams::default();
            let d = build_flat_device(&p);
            let h = assemble_hamiltonian(&d);
            let cut = CutSpec::branches(&d, 3, 3).unwrap();
            let rho = random_state(28, seed);
            let conj = Mat::from_fn(28, 28, |i, j| rho[(i, j)].conj());
            let a = particle_current(&rho, &h, &cut).unwrap();
            let b = particle_current(&conj, &h, &cut).unwrap();
            prop_assert!((a + b).abs() < 1e-14);
        }
    }
}
