//! Small dense linear algebra used across the crate: SPD Cholesky solves for
//! the interpolators, symmetric eigensolvers for spectra and test oracles,
//! LU for the tiny theory systems, and a power-iteration operator norm.

use crate::error::{CoreError, Result};
use crate::real::Real;
use crate::{Matrix, Vector};


/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// No regularization is applied; a non-positive pivot surfaces as
/// `SingularGram` so callers see exactly when the unregularized Gram solve
/// breaks down.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut l = Matrix::<T>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= T::zero() || !diag.is_finite() {
            return Err(CoreError::SingularGram { pivot: j });
        }
        let dsq = diag.sqrt();
        l[(j, j)] = dsq;
        if j + 1 < n {
            let (head, mut tail) = l.view_mut().split_at(ndarray::Axis(0), j + 1);
            let lj = head.row(j);
            for (off, mut row) in tail.rows_mut().into_iter().enumerate() {
                let i = j + 1 + off;
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= row[k] * lj[k];
                }
                row[j] = v / dsq;
            }
        }
    }
    Ok(l)
}

/// Solves L L^T x = b given the lower factor from [`cholesky`].
pub fn cholesky_solve_vec<T: Real>(l: &Matrix<T>, b: &Vector<T>) -> Vector<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v -= l[(i, k)] * x[k];
        }
        x[i] = v / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in i + 1..n {
            v -= l[(k, i)] * x[k];
        }
        x[i] = v / l[(i, i)];
    }
    x
}

/// Column-wise [`cholesky_solve_vec`].
pub fn cholesky_solve_mat<T: Real>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let mut x = b.clone();
    for mut col in x.columns_mut().into_iter() {
        let v = cholesky_solve_vec(l, &col.to_owned());
        col.assign(&v);
    }
    x
}

/// Dense LU solve with partial pivoting, for the small theory systems.
pub fn lu_solve<T: Real>(a: &Matrix<T>, b: &Vector<T>) -> Result<Vector<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "lu_solve: {}x{} with rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[(col, col)].abs();
        for r in col + 1..n {
            let v = m[(r, col)].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == T::zero() || !best.is_finite() {
            return Err(CoreError::SingularGram { pivot: col });
        }
        if piv != col {
            for c in 0..n {
                let t = m[(col, c)];
                m[(col, c)] = m[(piv, c)];
                m[(piv, c)] = t;
            }
            x.swap(col, piv);
        }
        let d = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / d;
            if f != T::zero() {
                for c in col..n {
                    let v = m[(col, c)] * f;
                    m[(r, c)] -= v;
                }
                let v = x[col] * f;
                x[r] -= v;
            }
        }
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in i + 1..n {
            v -= m[(i, k)] * x[k];
        }
        x[i] = v / m[(i, i)];
    }
    Ok(x)
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// returning (diagonal, off-diagonal). The input is consumed as scratch.
fn householder_tridiag<T: Real>(mut a: Matrix<T>) -> (Vec<T>, Vec<T>) {
    let n = a.nrows();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    if n == 1 {
        d[0] = a[(0, 0)];
        return (d, e);
    }
    for i in (1..n).rev() {
        let l = i;
        let mut h = T::zero();
        if l > 1 {
            let mut scale = T::zero();
            for k in 0..l {
                scale += a[(i, k)].abs();
            }
            if scale == T::zero() {
                e[i] = a[(i, l - 1)];
            } else {
                for k in 0..l {
                    let v = a[(i, k)] / scale;
                    a[(i, k)] = v;
                    h += v * v;
                }
                let mut f = a[(i, l - 1)];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l - 1)] = f - g;
                f = T::zero();
                for j in 0..l {
                    let mut g = T::zero();
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in j + 1..l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..l {
                    let fj = a[(i, j)];
                    let gj = e[j] - hh * fj;
                    e[j] = gj;
                    for k in 0..=j {
                        let v = fj * e[k] + gj * a[(i, k)];
                        a[(j, k)] -= v;
                    }
                }
            }
        } else {
            e[i] = a[(i, l - 1)];
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = a[(i, i)];
    }
    (d, e)
}

/// Eigenvalues of a symmetric tridiagonal matrix by the implicit QL
/// algorithm. `e[0]` is unused on input; off-diagonals live in `e[1..]`.
fn tridiag_eigenvalues<T: Real>(d: Vec<T>, e: Vec<T>) -> Vec<T> {
    let (mut vals, _) = ql_implicit(d, e, None);
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Shared implicit-QL core. When `first_row` is present the rotations are
/// accumulated on a single tracked row of the eigenvector matrix.
fn ql_implicit<T: Real>(
    mut d: Vec<T>,
    mut e: Vec<T>,
    first_row: Option<Vec<T>>,
) -> (Vec<T>, Vec<T>) {
    let n = d.len();
    let mut z = first_row.unwrap_or_default();
    let track = !z.is_empty();
    if n == 0 {
        return (d, z);
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                break; // accept current estimate; caller tolerances catch drift
            }
            let two = T::of(2.0);
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let sign_r = if g >= T::zero() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if track {
                    let zi = z[i];
                    let zi1 = z[i + 1];
                    z[i + 1] = s * zi + c * zi1;
                    z[i] = c * zi - s * zi1;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    (d, z)
}

/// All eigenvalues of a symmetric matrix (value-only path; no eigenvectors).
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    if a.nrows() != a.ncols() {
        return Err(CoreError::ShapeMismatch(format!(
            "symmetric_eigenvalues: {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let (d, e) = householder_tridiag(a.clone());
    Ok(tridiag_eigenvalues(d, e))
}

/// Eigen-decomposition of a symmetric tridiagonal matrix where only the
/// first row of the eigenvector matrix is needed (Golub–Welsch weights).
/// Returns (eigenvalues, first components), unsorted pairing preserved.
pub fn tridiag_eigen_first_row<T: Real>(d: Vec<T>, e: Vec<T>) -> (Vec<T>, Vec<T>) {
    let n = d.len();
    let mut z = vec![T::zero(); n];
    if n > 0 {
        z[0] = T::one();
    }
    ql_implicit(d, e, Some(z))
}

/// Cyclic Jacobi eigen-decomposition. A test-oracle path: exact and simple,
/// O(n^3) per sweep, intended for n <= a few hundred.
pub fn jacobi_eigen<T: Real>(a: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "jacobi_eigen: {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut m = a.clone();
    let mut v = Matrix::<T>::eye(n);
    for _sweep in 0..60 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= T::epsilon() * T::of(n as f64) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= T::epsilon() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() {
                        T::one()
                    } else {
                        -T::one()
                    };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    Ok((vals, v))
}

/// Operator-norm of a symmetric matrix by power iteration with a
/// deterministic start vector.
pub fn op_norm_sym<T: Real>(a: &Matrix<T>, iters: usize) -> T {
    let n = a.nrows();
    if n == 0 {
        return T::zero();
    }
    let mut v = Vector::<T>::from_shape_fn(n, |i| T::of(1.0 + (i as f64 % 7.0) * 0.125));
    let norm0 = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm0);
    let mut lambda = T::zero();
    for _ in 0..iters.max(1) {
        let w = a.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        lambda = norm;
        v = w / norm;
    }
    lambda
}

/// Smallest eigenvalue of an SPD matrix by inverse power iteration.
/// Falls back to the smallest Jacobi eigenvalue if the factorization fails
/// (the matrix is then numerically singular: return 0-ish estimate).
pub fn min_eig_spd<T: Real>(a: &Matrix<T>, iters: usize) -> T {
    match cholesky(a) {
        Ok(l) => {
            let n = a.nrows();
            let mut v = Vector::<T>::from_shape_fn(n, |i| T::of(1.0 + (i as f64 % 5.0) * 0.25));
            let mut lambda = T::zero();
            for _ in 0..iters.max(1) {
                let w = cholesky_solve_vec(&l, &v);
                let norm = w.dot(&w).sqrt();
                if norm == T::zero() || !norm.is_finite() {
                    return T::zero();
                }
                lambda = T::one() / norm;
                v = w / norm;
            }
            // one Rayleigh quotient refinement
            let av = a.dot(&v);
            let r = v.dot(&av) / v.dot(&v);
            if r.is_finite() {
                r
            } else {
                lambda
            }
        }
        Err(_) => T::zero(),
    }
}

/// `‖A − B‖_op` for symmetric same-shape matrices by power iteration.
pub fn op_norm_diff<T: Real>(a: &Matrix<T>, b: &Matrix<T>, iters: usize) -> Result<T> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(CoreError::ShapeMismatch(format!(
            "op_norm_diff: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let diff = a - b;
    Ok(op_norm_sym(&diff, iters))
}

/// Frobenius inner-product trace helper: Tr(A B^T).
pub fn frob_inner<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

#[allow(unused_imports)]
use ndarray::Axis;

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a: Matrix<f64> = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let b = array![1.0, -2.0, 0.5];
        let x = cholesky_solve_vec(&l, &b);
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a: Matrix<f64> = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            cholesky(&a),
            Err(CoreError::SingularGram { pivot: 1 })
        ));
    }

    #[test]
    fn lu_matches_cholesky_on_spd() {
        let a: Matrix<f64> = array![[4.0, 2.0], [2.0, 5.0]];
        let b = array![3.0, 1.0];
        let x1 = lu_solve(&a, &b).unwrap();
        let l = cholesky(&a).unwrap();
        let x2 = cholesky_solve_vec(&l, &b);
        for (u, v) in x1.iter().zip(x2.iter()) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let a: Matrix<f64> = array![[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]];
        let ev = symmetric_eigenvalues(&a).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] - 2.0).abs() < 1e-12);
        assert!((ev[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ql_matches_jacobi_on_random_symmetric() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 24;
        let mut a = Matrix::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let mut e1 = symmetric_eigenvalues(&a).unwrap();
        let (mut e2, _) = jacobi_eigen(&a).unwrap();
        e1.sort_by(|x, y| x.partial_cmp(y).unwrap());
        e2.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (u, v) in e1.iter().zip(e2.iter()) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn op_norm_of_explicit_diff() {
        let a: Matrix<f64> = array![[3.0, 0.0], [0.0, 1.0]];
        let b = Matrix::<f64>::zeros((2, 2));
        let n = op_norm_diff(&a, &b, 200).unwrap();
        assert!((n - 3.0).abs() < 1e-6);
    }

    #[test]
    fn min_eig_of_diagonal() {
        let a: Matrix<f64> = array![[3.0, 0.0], [0.0, 0.5]];
        let m = min_eig_spd(&a, 100);
        assert!((m - 0.5).abs() < 1e-9);
    }
}
