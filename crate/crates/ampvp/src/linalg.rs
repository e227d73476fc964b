//! Small dense linear-algebra kernels.
//!
//! Matrix-vector products are row dot products in a fixed order, so the same
//! input always gives bit-identical output.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{AmpError, Result};
use crate::scalar::Scalar;

/// `A x`, one dot product per row.
pub fn matvec<T: Scalar>(a: ArrayView2<T>, x: ArrayView1<T>) -> Array1<T> {
    a.rows().into_iter().map(|r| r.dot(&x)).collect()
}

/// `Aᵀ y` accumulated row by row.
pub fn matvec_t<T: Scalar>(a: ArrayView2<T>, y: ArrayView1<T>) -> Array1<T> {
    let mut out = Array1::zeros(a.ncols());
    for (row, &yi) in a.rows().into_iter().zip(y.iter()) {
        if yi != T::zero() {
            out.scaled_add(yi, &row);
        }
    }
    out
}

/// `A x` with the rows and columns in `mask` treated as zero, without copying `A`.
pub fn masked_matvec<T: Scalar>(a: ArrayView2<T>, x: ArrayView1<T>, rows: &[usize], cols: &[usize]) -> Array1<T> {
    let mut y = x.to_owned();
    for &c in cols {
        y[c] = T::zero();
    }
    let mut out = matvec(a, y.view());
    for &r in rows {
        out[r] = T::zero();
    }
    out
}

/// `Aᵀ x` with masked rows and columns of `A`.
pub fn masked_matvec_t<T: Scalar>(a: ArrayView2<T>, x: ArrayView1<T>, rows: &[usize], cols: &[usize]) -> Array1<T> {
    let mut y = x.to_owned();
    for &r in rows {
        y[r] = T::zero();
    }
    let mut out = matvec_t(a, y.view());
    for &c in cols {
        out[c] = T::zero();
    }
    out
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(AmpError::Shape(format!("cholesky of {}x{} matrix", n, a.ncols())));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > T::zero()) {
            return Err(AmpError::NotPsd { eigenvalue: d.as_f64() });
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the lower factor.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (ascending) and eigenvectors as columns.
pub fn sym_eigen<T: Scalar>(a: ArrayView2<T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let tiny = T::epsilon() * T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        let scale: T = m.iter().map(|x| *x * *x).sum();
        if off <= tiny * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = order.iter().map(|&i| m[[i, i]]).collect();
    let vecs = v.select(Axis(1), &order);
    (vals, vecs)
}

/// Clips negative eigenvalues to zero. Returns the clipped matrix and the
/// magnitude of the most negative eigenvalue removed.
pub fn psd_clip<T: Scalar>(a: ArrayView2<T>) -> (Array2<T>, T) {
    let (vals, vecs) = sym_eigen(a);
    let worst = vals.iter().fold(T::zero(), |w, &l| if l < -w { -l } else { w });
    if worst == T::zero() {
        return (a.to_owned(), T::zero());
    }
    let clipped = vals.mapv(|l| l.max(T::zero()));
    let scaled = &vecs * &clipped.view().insert_axis(Axis(0));
    (scaled.dot(&vecs.t()), worst)
}

/// A square-root factor `L` with `L Lᵀ` equal to the PSD-clipped input.
pub fn psd_factor<T: Scalar>(a: ArrayView2<T>) -> Array2<T> {
    let (vals, vecs) = sym_eigen(a);
    let roots = vals.mapv(|l| l.max(T::zero()).sqrt());
    &vecs * &roots.view().insert_axis(Axis(0))
}
