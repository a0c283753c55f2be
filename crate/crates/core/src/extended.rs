//! Double-double complex matrices for polishing steady states and for
//! evaluating heat flows whose magnitude sits far below the dissipator scale.

use std::ops::{Add, Sub};

use faer::c64;
use twofloat::TwoFloat;

use crate::bath::DissipatorChannel;
use crate::error::{Error, Result};
use crate::lattice::DissipatorMode;
use crate::linalg::{self, CMat};

const ZERO: TwoFloat = TwoFloat::from_f64(0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zdd {
    pub re: TwoFloat,
    pub im: TwoFloat,
}

impl Zdd {
    pub const ZERO: Zdd = Zdd { re: ZERO, im: ZERO };

    pub fn from_c64(z: c64) -> Self {
        Zdd { re: TwoFloat::from(z.re), im: TwoFloat::from(z.im) }
    }

    pub fn hi(self) -> c64 {
        c64::new(self.re.hi(), self.im.hi())
    }

    pub fn lo(self) -> c64 {
        c64::new(self.re.lo(), self.im.lo())
    }

    pub fn conj(self) -> Self {
        Zdd { re: self.re, im: -self.im }
    }

    /// Product with a double-precision factor.
    pub fn mul_c64(self, a: c64) -> Self {
        Zdd { re: self.re * a.re - self.im * a.im, im: self.im * a.re + self.re * a.im }
    }

    pub fn scale(self, x: TwoFloat) -> Self {
        Zdd { re: self.re * x, im: self.im * x }
    }
}

impl Add for Zdd {
    type Output = Zdd;
    fn add(self, o: Zdd) -> Zdd {
        Zdd { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for Zdd {
    type Output = Zdd;
    fn sub(self, o: Zdd) -> Zdd {
        Zdd { re: self.re - o.re, im: self.im - o.im }
    }
}

/// Square matrix of double-double complex entries, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DdMat {
    n: usize,
    data: Vec<Zdd>,
}

impl DdMat {
    pub fn zeros(n: usize) -> Self {
        DdMat { n, data: vec![Zdd::ZERO; n * n] }
    }

    pub fn from_cmat(m: &CMat) -> Self {
        let n = m.nrows();
        DdMat { n, data: (0..n * n).map(|idx| Zdd::from_c64(m[(idx % n, idx / n)])).collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Zdd {
        self.data[i + self.n * j]
    }

    fn at(&mut self, i: usize, j: usize) -> &mut Zdd {
        &mut self.data[i + self.n * j]
    }

    /// Leading part, the entries rounded to double precision.
    pub fn hi(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(i, j).hi())
    }

    pub fn lo(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(i, j).lo())
    }

    /// Column-stacked entries of the leading part.
    pub fn vectorize_hi(&self) -> Vec<c64> {
        self.data.iter().map(|z| z.hi()).collect()
    }

    pub fn trace(&self) -> Zdd {
        (0..self.n).fold(Zdd::ZERO, |acc, i| acc + self.get(i, i))
    }

    pub fn add_vectorized(&mut self, delta: &[c64]) {
        for (z, d) in self.data.iter_mut().zip(delta) {
            z.re += d.re;
            z.im += d.im;
        }
    }

    /// `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = TwoFloat::from(0.5);
        let mut out = DdMat::zeros(self.n);
        for j in 0..self.n {
            for i in 0..self.n {
                *out.at(i, j) = (self.get(i, j) + self.get(j, i).conj()).scale(half);
            }
        }
        out
    }

    /// Rescales to unit real trace.
    pub fn normalized(&self) -> Self {
        let inv = TwoFloat::from(1.0) / self.trace().re;
        DdMat { n: self.n, data: self.data.iter().map(|z| z.scale(inv)).collect() }
    }

    pub fn max_abs_hi(&self) -> f64 {
        self.data.iter().map(|z| z.hi().norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_hi(&self) -> f64 {
        self.data.iter().map(|z| z.hi().norm_sqr()).sum::<f64>().sqrt()
    }

    fn zip(&self, other: &DdMat, f: impl Fn(Zdd, Zdd) -> Zdd) -> Self {
        DdMat { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect() }
    }
}

/// `A B` with a double-precision left factor; zero entries of `A` are skipped.
pub fn lmul(a: &CMat, b: &DdMat) -> DdMat {
    let n = b.n;
    let mut out = DdMat::zeros(n);
    for k in 0..n {
        for i in 0..n {
            let aik = a[(i, k)];
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            for j in 0..n {
                let t = b.get(k, j).mul_c64(aik);
                let slot = out.at(i, j);
                *slot = *slot + t;
            }
        }
    }
    out
}

/// `B A` with a double-precision right factor; zero entries of `A` are skipped.
pub fn rmul(b: &DdMat, a: &CMat) -> DdMat {
    let n = b.n;
    let mut out = DdMat::zeros(n);
    for j in 0..n {
        for k in 0..n {
            let akj = a[(k, j)];
            if akj.re == 0.0 && akj.im == 0.0 {
                continue;
            }
            for i in 0..n {
                let t = b.get(i, k).mul_c64(akj);
                let slot = out.at(i, j);
                *slot = *slot + t;
            }
        }
    }
    out
}

fn check_dim(expected: usize, rho: &DdMat) -> Result<()> {
    if rho.n != expected {
        return Err(Error::DimensionMismatch { expected, found: rho.n });
    }
    Ok(())
}

/// One dissipator channel applied in double-double arithmetic.
pub fn apply_dissipator(ch: &DissipatorChannel, rho: &DdMat, mode: DissipatorMode) -> Result<DdMat> {
    let n = rho.n;
    match ch {
        DissipatorChannel::Thermal { s, k, .. } => {
            check_dim(s.dim(), rho)?;
            let s = s.matrix();
            let kd = match mode {
                DissipatorMode::Hermitian => linalg::adjoint(k),
                DissipatorMode::Literal => k.clone(),
            };
            let k_rho = lmul(k, rho);
            let rho_kd = rmul(rho, &kd);
            let a = rmul(&k_rho, s).zip(&lmul(s, &rho_kd), |x, y| x + y);
            let b = lmul(s, &k_rho).zip(&rmul(&rho_kd, s), |x, y| x + y);
            Ok(a.zip(&b, |x, y| x - y))
        }
        DissipatorChannel::Observer { site, gamma } => {
            if *site >= n {
                return Err(Error::DimensionMismatch { expected: site + 1, found: n });
            }
            let g2 = c64::new(-(gamma * gamma), 0.0);
            let mut out = DdMat::zeros(n);
            for j in 0..n {
                if j != *site {
                    *out.at(*site, j) = rho.get(*site, j).mul_c64(g2);
                    *out.at(j, *site) = rho.get(j, *site).mul_c64(g2);
                }
            }
            Ok(out)
        }
    }
}

/// `-i[H, rho] + sum_c D_c[rho]`.
pub fn apply_liouvillian(h: &CMat, channels: &[DissipatorChannel], mode: DissipatorMode, rho: &DdMat) -> Result<DdMat> {
    check_dim(h.nrows(), rho)?;
    let comm = lmul(h, rho).zip(&rmul(rho, h), |x, y| x - y);
    let mut out = DdMat { n: rho.n, data: comm.data.iter().map(|z| Zdd { re: z.im, im: -z.re }).collect() };
    for ch in channels {
        out = out.zip(&apply_dissipator(ch, rho, mode)?, |x, y| x + y);
    }
    Ok(out)
}

/// `Re Tr(H D[rho])` accumulated in double-double.
pub fn heat_flow(h: &CMat, ch: &DissipatorChannel, mode: DissipatorMode, rho: &DdMat) -> Result<TwoFloat> {
    check_dim(h.nrows(), rho)?;
    let d = apply_dissipator(ch, rho, mode)?;
    let n = rho.n;
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            let hij = h[(i, j)];
            if hij.re != 0.0 || hij.im != 0.0 {
                acc += d.get(j, i).mul_c64(hij).re;
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{all_channels, apply_dissipator as apply_f64};
    use crate::dynamics::assemble_liouvillian;
    use crate::lattice::{build_flat_device, PhysParams};
    use crate::operators::{assemble_hamiltonian, eigendecompose};
    use rand::{Rng, SeedableRng};

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        linalg::hermitian_part(&a)
    }

    #[test]
    fn leading_part_matches_double_precision_products() {
        let a = random_hermitian(6, 1);
        let b = random_hermitian(6, 2);
        let dd = DdMat::from_cmat(&b);
        let tol = 1e-14;
        assert!(linalg::max_abs_diff(&lmul(&a, &dd).hi(), &(&a * &b)) < tol);
        assert!(linalg::max_abs_diff(&rmul(&dd, &a).hi(), &(&b * &a)) < tol);
    }

    #[test]
    fn tail_recovers_bits_lost_by_rounding() {
        let one = CMat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
        let mut x = DdMat::from_cmat(&one);
        x.add_vectorized(&[c64::new(1e-20, 0.0)]);
        assert_eq!(x.hi()[(0, 0)].re, 1.0);
        assert_eq!(x.lo()[(0, 0)].re, 1e-20);
    }

    #[test]
    fn structured_liouvillian_matches_superoperator() {
        let p = PhysParams { kdt: 0.002, observer_site: Some(13), gamma_d: 0.03, ..PhysParams::default() };
        let d = build_flat_device(&p);
        let h = assemble_hamiltonian(&d);
        let spec = eigendecompose(&h).unwrap();
        let channels = all_channels(&d, &p, &spec).unwrap();
        let rho = random_hermitian(d.n_sites(), 7);
        for mode in [DissipatorMode::Hermitian, DissipatorMode::Literal] {
            let l = assemble_liouvillian(&h, &channels, mode).unwrap();
            let reference = l.apply(&rho).unwrap();
            let got = apply_liouvillian(h.matrix(), &channels, mode, &DdMat::from_cmat(&rho)).unwrap().hi();
            assert!(linalg::max_abs_diff(&got, &reference) < 1e-11 * linalg::max_abs(&reference));
        }
        for ch in &channels {
            let q = heat_flow(h.matrix(), ch, DissipatorMode::Hermitian, &DdMat::from_cmat(&rho)).unwrap().hi();
            let q_ref = linalg::trace_product(h.matrix(), &apply_f64(ch, &rho, DissipatorMode::Hermitian).unwrap()).re;
            assert!((q - q_ref).abs() < 1e-12, "{q} vs {q_ref}");
        }
    }

    #[test]
    fn mismatched_dimension_is_reported() {
        let h = random_hermitian(3, 3);
        let rho = DdMat::zeros(4);
        assert!(apply_liouvillian(&h, &[], DissipatorMode::Hermitian, &rho).is_err());
    }
}
