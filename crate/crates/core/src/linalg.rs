//! Dense complex eigensolver for small non-Hermitian matrices.
//!
//! The matrix is reduced to upper Hessenberg form with Householder
//! reflectors, then driven to upper triangular (Schur) form by single-shift
//! implicit QR sweeps with Wilkinson shifts. Eigenvectors are recovered by
//! back substitution on the triangular factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Unconjugated bilinear product `aᵀb`.
pub fn c_product(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Hermitian inner product `a†b`.
pub fn h_product(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Normalized bilinear overlap `|aᵀb| / (‖a‖‖b‖)`, bounded by one.
pub fn c_overlap(a: &CVector, b: &CVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        c_product(a, b).norm() / denom
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Schur factorization `A = Z T Z†` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct Schur {
    pub t: CMatrix,
    pub z: CMatrix,
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Right eigenvectors as columns, each of unit 2-norm.
    pub vectors: CMatrix,
}

fn hessenberg(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n, n);
    if n < 3 {
        return (h, q);
    }
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- (I - 2vv†) H
        for j in 0..n {
            let s: Complex64 = v
                .iter()
                .enumerate()
                .map(|(r, vr)| vr.conj() * h[(k + 1 + r, j)])
                .sum();
            for (r, vr) in v.iter().enumerate() {
                h[(k + 1 + r, j)] -= 2.0 * vr * s;
            }
        }
        // H <- H (I - 2vv†), Q <- Q (I - 2vv†)
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let s: Complex64 = v
                    .iter()
                    .enumerate()
                    .map(|(r, vr)| m[(i, k + 1 + r)] * vr)
                    .sum();
                for (r, vr) in v.iter().enumerate() {
                    m[(i, k + 1 + r)] -= 2.0 * s * vr.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

/// Rotation `G = [[c, s], [-s̄, c]]` with `G [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    if y == ZERO {
        return (1.0, ZERO);
    }
    if x == ZERO {
        return (0.0, y.conj() / y.norm());
    }
    let nx = x.norm();
    let norm = nx.hypot(y.norm());
    (nx / norm, (x / nx) * y.conj() / norm)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let mu1 = mean + disc;
    let mu2 = mean - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

pub fn schur(a: &CMatrix) -> Result<Schur> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "schur requires a square matrix");
    let (mut h, mut z) = hessenberg(a);
    if n == 0 {
        return Ok(Schur { t: h, z });
    }
    let eps = f64::EPSILON;
    let scale = frobenius(&h).max(f64::MIN_POSITIVE);
    let max_iter = 30 * n.max(1);
    let mut ihi = n - 1;
    let mut its = 0usize;
    loop {
        if ihi == 0 {
            break;
        }
        // locate the start of the active unreduced block
        let mut l = 0;
        for k in (1..=ihi).rev() {
            let mut tst = h[(k - 1, k - 1)].norm() + h[(k, k)].norm();
            if tst == 0.0 {
                tst = scale;
            }
            if h[(k, k - 1)].norm() <= eps * tst {
                h[(k, k - 1)] = ZERO;
                l = k;
                break;
            }
        }
        if l == ihi {
            ihi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        if its > max_iter {
            return Err(Error::EigenNoConvergence { iterations: its });
        }
        let mu = if its.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[(ihi, ihi)] + Complex64::new(0.75 * h[(ihi, ihi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(ihi - 1, ihi - 1)],
                h[(ihi - 1, ihi)],
                h[(ihi, ihi - 1)],
                h[(ihi, ihi)],
            )
        };
        let mut x = h[(l, l)] - mu;
        let mut y = h[(l + 1, l)];
        for k in l..ihi {
            let (c, s) = givens(x, y);
            let col_start = if k > l { k - 1 } else { l };
            for j in col_start..n {
                let h1 = h[(k, j)];
                let h2 = h[(k + 1, j)];
                h[(k, j)] = c * h1 + s * h2;
                h[(k + 1, j)] = -s.conj() * h1 + c * h2;
            }
            let row_end = (k + 2).min(ihi);
            for i in 0..=row_end {
                let h1 = h[(i, k)];
                let h2 = h[(i, k + 1)];
                h[(i, k)] = h1 * c + h2 * s.conj();
                h[(i, k + 1)] = -h1 * s + h2 * c;
            }
            for i in 0..n {
                let z1 = z[(i, k)];
                let z2 = z[(i, k + 1)];
                z[(i, k)] = z1 * c + z2 * s.conj();
                z[(i, k + 1)] = -z1 * s + z2 * c;
            }
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
            if k + 1 < ihi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok(Schur { t: h, z })
}

pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    let s = schur(a)?;
    Ok((0..a.nrows()).map(|i| s.t[(i, i)]).collect())
}

/// Eigenvalues and unit-norm right eigenvectors of a general complex matrix.
pub fn eig(a: &CMatrix) -> Result<Eigen> {
    let n = a.nrows();
    let Schur { t, z } = schur(a)?;
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let small = f64::EPSILON * frobenius(&t).max(f64::MIN_POSITIVE);
    let mut vectors = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut v = vec![ZERO; n];
        v[k] = ONE;
        for i in (0..k).rev() {
            let s: Complex64 = (i + 1..=k).map(|j| t[(i, j)] * v[j]).sum();
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            v[i] = -s / d;
        }
        let x = &z * CVector::from_vec(v);
        let norm = x.norm();
        vectors.set_column(k, &(x / Complex64::new(norm, 0.0)));
    }
    Ok(Eigen { values, vectors })
}

/// Solves `A x = B` by LU with partial pivoting, refusing near-singular systems.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    let lu = a.clone().lu();
    let u = lu.u();
    let scale = frobenius(a);
    let threshold = 1e-14 * scale.max(f64::MIN_POSITIVE);
    if (0..u.nrows()).any(|i| u[(i, i)].norm() <= threshold) {
        return None;
    }
    lu.solve(b)
}
