//! Liouvillian assembly, steady states and time propagation.
//!
//! Density matrices are vectorized by stacking columns, so
//! `vec(A rho B) = (B^T (x) A) vec(rho)` and entry `rho[i, j]` sits at
//! `i + n j`.

use faer::{c64, Mat, Scale, Side};
use twofloat::TwoFloat;

fn sc(x: f64) -> Scale<c64> {
    Scale(c64::new(x, 0.0))
}

use crate::bath::DissipatorChannel;
use crate::error::{Error, Result};
use crate::extended::{self, DdMat};
use crate::lattice::DissipatorMode;
use crate::linalg::{self, CMat, I};
use crate::operators::{HermitianOperator, SpectralDecomposition};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest tolerated density-matrix eigenvalue before a positivity warning.
pub const NEGATIVITY_TOL: f64 = 1e-8;
/// Singular values at or below this fraction of the largest count as zero.
pub const NULLSPACE_REL_TOL: f64 = 1e-12;
/// Accepted steady states satisfy `|L vec(rho)| <= RESIDUAL_REL_TOL * sigma_max`.
pub const RESIDUAL_REL_TOL: f64 = 1e-9;
/// Below this many RK4 steps the propagator is stepped directly.
const DIRECT_STEP_LIMIT: u64 = 64;
/// Upper bound on steady-state refinement sweeps.
const REFINEMENT_STEPS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    /// Accepts a Hermitian, unit-trace matrix.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let defect = linalg::hermiticity_defect(&m);
        if defect > HERMITICITY_TOL {
            return Err(Error::NotHermitian { defect });
        }
        let tr = linalg::trace(&m);
        if (tr - c64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Domain { what: "density matrix trace", value: tr.re, requirement: "equal to 1" });
        }
        Ok(DensityMatrix(m))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix(linalg::scale(&linalg::identity(n), c64::new(1.0 / n as f64, 0.0)))
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

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.0)
    }
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    let h = linalg::hermitian_part(m);
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Decomposition {
        dim: m.nrows(),
        max_abs: linalg::max_abs(m),
        frobenius: linalg::frobenius(m),
    })?;
    Ok(evd.S().column_vector().iter().map(|z| z.re).collect())
}

/// Gibbs state `exp(-H / kT) / Z`.
pub fn gibbs_state(spec: &SpectralDecomposition, kt: f64) -> Result<DensityMatrix> {
    if !(kt > 0.0) {
        return Err(Error::Domain { what: "temperature", value: kt, requirement: "positive" });
    }
    let e0 = spec.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = spec.eigenvalues.iter().map(|e| (-(e - e0) / kt).exp()).sum();
    let rho = spec.apply_function(|e| (-(e - e0) / kt).exp() / z);
    Ok(DensityMatrix(linalg::hermitian_part(&rho)))
}

/// `0.5 * sum |eig(a - b)|`.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    let d = a - b;
    Ok(0.5 * hermitian_eigenvalues(&d)?.iter().map(|x| x.abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
    pub purity: f64,
}

pub fn validate_state(rho: &CMat) -> Result<StateDiagnostics> {
    let hermiticity_defect = linalg::hermiticity_defect(rho);
    let trace_deviation = (linalg::trace(rho) - c64::new(1.0, 0.0)).norm();
    let min_eigenvalue = hermitian_eigenvalues(rho)?.first().copied().unwrap_or(0.0);
    let purity = linalg::trace_product(rho, rho).re;
    Ok(StateDiagnostics { hermiticity_defect, trace_deviation, min_eigenvalue, purity })
}

/// Matrix of the Liouvillian acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    n: usize,
    mat: CMat,
    mode: DissipatorMode,
    h: CMat,
    channels: Vec<DissipatorChannel>,
}

/// `L += coeff * (m (x) a)`, i.e. the superoperator of `rho -> a rho m^T`.
fn add_kron(l: &mut CMat, m: &CMat, a: &CMat, coeff: c64) {
    let n = a.nrows();
    for lc in 0..n {
        for j in 0..n {
            let mjl = m[(j, lc)] * coeff;
            if mjl == c64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..n {
                let col = k + n * lc;
                for i in 0..n {
                    let aik = a[(i, k)];
                    if aik != c64::new(0.0, 0.0) {
                        l[(i + n * j, col)] += mjl * aik;
                    }
                }
            }
        }
    }
}

fn transpose(a: &CMat) -> CMat {
    a.transpose().to_owned()
}

pub fn assemble_liouvillian(h: &HermitianOperator, channels: &[DissipatorChannel], mode: DissipatorMode) -> Result<Superoperator> {
    let n = h.dim();
    let id = linalg::identity(n);
    let one = c64::new(1.0, 0.0);
    let mut l = Mat::zeros(n * n, n * n);
    let hm = h.matrix();
    add_kron(&mut l, &id, hm, -I);
    add_kron(&mut l, &transpose(hm), &id, I);
    for ch in channels {
        match ch {
            DissipatorChannel::Thermal { s, k, .. } => {
                if s.dim() != n || k.nrows() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: s.dim() });
                }
                let s = s.matrix();
                let kd = match mode {
                    DissipatorMode::Hermitian => linalg::adjoint(k),
                    DissipatorMode::Literal => k.clone(),
                };
                add_kron(&mut l, &transpose(s), k, one);
                add_kron(&mut l, &transpose(&kd), s, one);
                add_kron(&mut l, &id, &(s * k), -one);
                add_kron(&mut l, &transpose(&(&kd * s)), &id, -one);
            }
            DissipatorChannel::Observer { site, gamma } => {
                if *site >= n {
                    return Err(Error::DimensionMismatch { expected: site + 1, found: n });
                }
                let g2 = c64::new(gamma * gamma, 0.0);
                for j in 0..n {
                    for i in 0..n {
                        if (i == *site) != (j == *site) {
                            l[(i + n * j, i + n * j)] -= g2;
                        }
                    }
                }
            }
        }
    }
    Ok(Superoperator { n, mat: l, mode, h: hm.clone(), channels: channels.to_vec() })
}

/// Real orthonormal basis of the Hermitian matrices under `Re Tr(A^H B)`:
/// `E_pp`, `(E_pq + E_qp)/sqrt 2` and `i (E_pq - E_qp)/sqrt 2` for `p < q`.
/// Each element is listed by its nonzero entries in vectorized position.
fn hermitian_basis(n: usize) -> Vec<Vec<(usize, c64)>> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        out.push(vec![(p + n * p, c64::new(1.0, 0.0))]);
    }
    for q in 0..n {
        for p in 0..q {
            out.push(vec![(p + n * q, c64::new(r, 0.0)), (q + n * p, c64::new(r, 0.0))]);
            out.push(vec![(p + n * q, c64::new(0.0, r)), (q + n * p, c64::new(0.0, -r))]);
        }
    }
    out
}

impl Superoperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn mode(&self) -> DissipatorMode {
        self.mode
    }

    /// Whether the generator maps Hermitian matrices to Hermitian matrices.
    pub fn preserves_hermiticity(&self) -> bool {
        self.mode == DissipatorMode::Hermitian
    }

    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.nrows() != self.n || rho.ncols() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: rho.nrows() });
        }
        let v = Mat::from_fn(self.n * self.n, 1, |i, _| rho[(i % self.n, i / self.n)]);
        let out = &self.mat * &v;
        Ok(Mat::from_fn(self.n, self.n, |i, j| out[(i + self.n * j, 0)]))
    }

    /// The generator in the real Hermitian basis. Only meaningful when
    /// `preserves_hermiticity()`; the result then has the spectrum and the
    /// singular values of the complex generator.
    pub fn real_representation(&self) -> Mat<f64> {
        let basis = hermitian_basis(self.n);
        let dim = basis.len();
        // L U, column by column.
        let mut lu = Mat::<c64>::zeros(dim, dim);
        for (b, elem) in basis.iter().enumerate() {
            for &(idx, w) in elem {
                for r in 0..dim {
                    lu[(r, b)] += self.mat[(r, idx)] * w;
                }
            }
        }
        let mut out = Mat::<f64>::zeros(dim, dim);
        for b in 0..dim {
            for (a, elem) in basis.iter().enumerate() {
                let mut acc = c64::new(0.0, 0.0);
                for &(idx, w) in elem {
                    acc += w.conj() * lu[(idx, b)];
                }
                out[(a, b)] = acc.re;
            }
        }
        out
    }

    fn from_real_coords(&self, x: impl Fn(usize) -> f64) -> CMat {
        let basis = hermitian_basis(self.n);
        let mut v = vec![c64::new(0.0, 0.0); self.n * self.n];
        for (a, elem) in basis.iter().enumerate() {
            let xa = x(a);
            for &(idx, w) in elem {
                v[idx] += w * xa;
            }
        }
        linalg::unvectorize(&v, self.n)
    }

    /// Eigenvalues of the generator.
    pub fn spectrum(&self) -> Result<Vec<c64>> {
        let fail = |dim: usize| Error::Decomposition { dim, max_abs: linalg::max_abs(&self.mat), frobenius: linalg::frobenius(&self.mat) };
        if self.preserves_hermiticity() {
            let r = self.real_representation();
            r.eigenvalues().map_err(|_| fail(r.nrows()))
        } else {
            self.mat.eigenvalues().map_err(|_| fail(self.mat.nrows()))
        }
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let fail = || Error::Decomposition { dim: self.mat.nrows(), max_abs: linalg::max_abs(&self.mat), frobenius: linalg::frobenius(&self.mat) };
        if self.preserves_hermiticity() {
            let r = self.real_representation();
            Ok(r.singular_values().map_err(|_| fail())?)
        } else {
            Ok(self.mat.singular_values().map_err(|_| fail())?)
        }
    }
}

/// Smallest nonzero decay rate `min(-Re lambda)` over the spectrum, skipping
/// eigenvalues within `zero_tol` of the origin.
pub fn slowest_decay_rate(spectrum: &[c64], zero_tol: f64) -> Option<f64> {
    spectrum.iter().filter(|z| z.norm() > zero_tol).map(|z| -z.re).filter(|g| *g > 0.0).min_by(f64::total_cmp)
}

#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub rho_ss: DensityMatrix,
    /// The same state carried in double-double precision.
    pub rho_precise: DdMat,
    pub residual: f64,
    pub nullspace_dim: usize,
    pub min_eigenvalue: f64,
    /// Hermiticity defect of the raw null vector before symmetrization.
    pub hermiticity_defect: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub sigma_next: f64,
}

/// Polishes a unit-trace null vector by iterative refinement, with
/// residuals of the structured generator evaluated in double-double precision.
/// Corrections come from the dense generator with its first population row
/// replaced by the trace condition.
fn refine_null_vector(l: &Superoperator, rho: &CMat) -> Result<DdMat> {
    use faer::linalg::solvers::Solve;
    let n = l.n;
    let dim = n * n;
    let mut a = l.mat.clone();
    for c in 0..dim {
        a[(0, c)] = c64::new(0.0, 0.0);
    }
    for i in 0..n {
        a[(0, i + n * i)] = c64::new(1.0, 0.0);
    }
    let lu = a.partial_piv_lu();
    let mut x = DdMat::from_cmat(rho);
    let mut last = f64::INFINITY;
    for _ in 0..REFINEMENT_STEPS {
        let r = extended::apply_liouvillian(&l.h, &l.channels, l.mode, &x)?;
        let tr = x.trace();
        let mut rhs = Mat::<c64>::from_fn(dim, 1, |idx, _| -r.get(idx % n, idx / n).hi());
        rhs[(0, 0)] = c64::new((TwoFloat::from(1.0) - tr.re).hi(), -tr.im.hi());
        lu.solve_in_place(rhs.as_mut());
        let delta: Vec<c64> = (0..dim).map(|idx| rhs[(idx, 0)]).collect();
        let size = delta.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !size.is_finite() || size >= last {
            break;
        }
        x.add_vectorized(&delta);
        last = size;
        if size <= 1e-30 * x.max_abs_hi() {
            break;
        }
    }
    Ok(x)
}

/// Steady state from the right singular vector of the smallest singular value.
pub fn steady_state(l: &Superoperator) -> Result<SteadyStateReport> {
    let n = l.n;
    let fail = || Error::Decomposition { dim: n * n, max_abs: linalg::max_abs(&l.mat), frobenius: linalg::frobenius(&l.mat) };
    let (sigma, raw): (Vec<f64>, CMat) = if l.preserves_hermiticity() {
        let r = l.real_representation();
        let svd = r.svd().map_err(|_| fail())?;
        let sigma: Vec<f64> = svd.S().column_vector().iter().copied().collect();
        let last = sigma.len() - 1;
        let v = svd.V();
        (sigma, l.from_real_coords(|a| v[(a, last)]))
    } else {
        let svd = l.mat.svd().map_err(|_| fail())?;
        let sigma: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
        let last = sigma.len() - 1;
        let v = svd.V();
        (sigma, Mat::from_fn(n, n, |i, j| v[(i + n * j, last)]))
    };
    let sigma_max = sigma[0];
    let sigma_min = sigma[sigma.len() - 1];
    let sigma_next = if sigma.len() > 1 { sigma[sigma.len() - 2] } else { f64::INFINITY };
    let nullspace_dim = sigma.iter().filter(|s| **s <= NULLSPACE_REL_TOL * sigma_max).count();
    if nullspace_dim != 1 {
        return Err(Error::DegenerateSteadyState { nullspace_dim, sigma_min, sigma_next, sigma_max });
    }

    let tr = linalg::trace(&raw);
    if tr.norm() < 1e-300 {
        return Err(Error::DegenerateSteadyState { nullspace_dim, sigma_min, sigma_next, sigma_max });
    }
    let refined = refine_null_vector(l, &linalg::scale(&raw, tr.inv()))?;
    let hermiticity_defect = linalg::hermiticity_defect(&refined.hi());
    let rho_precise = refined.hermitian_part().normalized();
    let rho = linalg::hermitian_part(&rho_precise.hi());

    let residual = linalg::frobenius(&l.apply(&rho)?);
    let bound = RESIDUAL_REL_TOL * sigma_max;
    if residual > bound {
        return Err(Error::Residual { residual, bound });
    }
    let min_eigenvalue = hermitian_eigenvalues(&rho)?[0];
    if min_eigenvalue < -NEGATIVITY_TOL {
        log::warn!("steady state has eigenvalue {min_eigenvalue:e} below -{NEGATIVITY_TOL:e}; the generator is not completely positive");
    }
    Ok(SteadyStateReport {
        rho_ss: DensityMatrix(rho),
        rho_precise,
        residual,
        nullspace_dim,
        min_eigenvalue,
        hermiticity_defect,
        sigma_max,
        sigma_min,
        sigma_next,
    })
}

fn column(v: &[c64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// One classical RK4 step for the linear system `x' = L x`.
fn rk4_step(l: &CMat, x: &CMat, h: f64) -> CMat {
    let k1 = l * x;
    let k2 = l * &(x + &k1 * sc(0.5 * h));
    let k3 = l * &(x + &k2 * sc(0.5 * h));
    let k4 = l * &(x + &k3 * sc(h));
    x + (&k1 + &k2 * sc(2.0) + &k3 * sc(2.0) + &k4) * sc(h / 6.0)
}

/// RK4 integration of `d rho / dt = L rho` from `rho0` to `t_final` with a
/// uniform step no larger than `dt`. Long runs raise the one-step propagator
/// to the required power by repeated squaring, which reproduces stepping
/// exactly up to rounding.
pub fn propagate(rho0: &DensityMatrix, l: &Superoperator, t_final: f64, dt: f64) -> Result<DensityMatrix> {
    if !(dt > 0.0) {
        return Err(Error::Domain { what: "time step", value: dt, requirement: "positive" });
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Domain { what: "final time", value: t_final, requirement: "finite and non-negative" });
    }
    if rho0.dim() != l.n {
        return Err(Error::DimensionMismatch { expected: l.n, found: rho0.dim() });
    }
    if t_final == 0.0 {
        return Ok(rho0.clone());
    }
    let steps_f = (t_final / dt).ceil();
    if steps_f > u64::MAX as f64 / 2.0 {
        return Err(Error::Domain { what: "step count", value: steps_f, requirement: "representable" });
    }
    let steps = steps_f as u64;
    let h = t_final / steps as f64;
    let n = l.n;
    let norm0 = linalg::frobenius(rho0.matrix());
    let check = |x: &CMat, done: u64| -> Result<()> {
        let m = Mat::from_fn(n, n, |i, j| x[(i + n * j, 0)]);
        let norm = linalg::frobenius(&m);
        let drift = (linalg::trace(&m) - c64::new(1.0, 0.0)).norm();
        let time = h * done as f64;
        let drift_bound = 1e-10 * time.max(1.0) + 1e-12;
        if !norm.is_finite() || norm > 1e3 * norm0.max(1.0) || !(drift <= drift_bound.max(1e-6)) {
            return Err(Error::Instability { steps: done, time, norm, trace_drift: drift });
        }
        Ok(())
    };

    let mut x = column(&linalg::vectorize(rho0.matrix()));
    if steps <= DIRECT_STEP_LIMIT {
        for s in 1..=steps {
            x = rk4_step(&l.mat, &x, h);
            check(&x, s)?;
        }
    } else {
        // P = I + hL (I + hL/2 (I + hL/3 (I + hL/4)))
        let dim = n * n;
        let id = Mat::<c64>::identity(dim, dim);
        let hl = &l.mat * sc(h);
        let mut p = &id + &hl * sc(0.25);
        p = &id + &(&hl * &p) * sc(1.0 / 3.0);
        p = &id + &(&hl * &p) * sc(0.5);
        p = &id + &hl * &p;
        let mut remaining = steps;
        let mut done = 0u64;
        let mut power = 1u64;
        loop {
            if remaining & 1 == 1 {
                x = &p * &x;
                done += power;
                check(&x, done)?;
            }
            remaining >>= 1;
            if remaining == 0 {
                break;
            }
            p = &p * &p;
            power <<= 1;
            if !linalg::max_abs(&p).is_finite() {
                return Err(Error::Instability { steps: done, time: h * done as f64, norm: f64::INFINITY, trace_drift: f64::NAN });
            }
        }
    }
    Ok(DensityMatrix(Mat::from_fn(n, n, |i, j| x[(i + n * j, 0)])))
}
