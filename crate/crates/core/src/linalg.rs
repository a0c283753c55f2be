//! Small dense helpers shared by the physics modules.

use faer::{c64, Mat};

pub type CMat = Mat<c64>;

pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn trace(m: &CMat) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> c64 {
    let n = a.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..a.ncols() {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    acc
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn scale(a: &CMat, s: c64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// max_ij |A_ij - conj(A_ji)|
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max(a[(i, j)].norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// `(A + A^H) / 2`
pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Column-stacking vectorization: `vec(rho)[i + n j] = rho[i, j]`.
pub fn vectorize(m: &CMat) -> Vec<c64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unvectorize(v: &[c64], n: usize) -> CMat {
    assert_eq!(v.len(), n * n);
    Mat::from_fn(n, n, |i, j| v[i + n * j])
}

/// `P^T A P` for a site permutation `perm` (site `s` maps to `perm[s]`).
pub fn permute(a: &CMat, perm: &[usize]) -> CMat {
    let n = a.nrows();
    let mut out = zeros(n);
    for j in 0..n {
        for i in 0..n {
            out[(perm[i], perm[j])] = a[(i, j)];
        }
    }
    out
}
