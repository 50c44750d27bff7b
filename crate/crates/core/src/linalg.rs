//! Dense linear-algebra helpers on top of `ndarray`.
//!
//! Everything is `f64`. Matrices are small (at most a few hundred rows), so
//! the decompositions here are the simple textbook ones: cyclic Jacobi for
//! symmetric eigenvalues, modified Gram-Schmidt for orthonormal frames and a
//! semidefinite-tolerant Cholesky for sampling correlated Gaussians.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub type Matrix = Array2<f64>;
pub type Vector = Array1<f64>;

/// Entries i.i.d. `N(0, std^2)`.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    assert!(std >= 0.0, "std must be non-negative");
    Array2::from_shape_simple_fn((rows, cols), || std * rng.normal())
}

/// Entries i.i.d. uniform on `[-scale, scale]`.
pub fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    assert!(scale >= 0.0, "scale must be non-negative");
    Array2::from_shape_simple_fn((rows, cols), || rng.uniform(-scale, scale))
}

pub fn gaussian_vector(rng: &mut Rng, len: usize, std: f64) -> Vector {
    Array1::from_shape_simple_fn(len, || std * rng.normal())
}

/// `a.b / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    cosine_parts(&[a], &[b])
}

/// Cosine between the concatenations of `a_parts` and `b_parts`, without
/// materialising the concatenated vectors.
pub fn cosine_parts(a_parts: &[&[f64]], b_parts: &[&[f64]]) -> Result<f64> {
    let len_a: usize = a_parts.iter().map(|p| p.len()).sum();
    let len_b: usize = b_parts.iter().map(|p| p.len()).sum();
    if len_a != len_b || a_parts.len() != b_parts.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {len_a} and {len_b}"
        )));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (pa, pb) in a_parts.iter().zip(b_parts) {
        if pa.len() != pb.len() {
            return Err(Error::Shape(format!(
                "cosine block lengths {} and {}",
                pa.len(),
                pb.len()
            )));
        }
        for (x, y) in pa.iter().zip(pb.iter()) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Cosine between two lists of matrices, each flattened row-major and stacked.
pub fn cosine_matrices(a: &[&Matrix], b: &[&Matrix]) -> Result<f64> {
    for (x, y) in a.iter().zip(b) {
        if x.dim() != y.dim() {
            return Err(Error::Shape(format!(
                "cosine of matrices {:?} and {:?}",
                x.dim(),
                y.dim()
            )));
        }
    }
    let a_std: Vec<_> = a.iter().map(|m| m.as_standard_layout()).collect();
    let b_std: Vec<_> = b.iter().map(|m| m.as_standard_layout()).collect();
    let a_parts: Vec<&[f64]> = a_std.iter().map(|m| m.as_slice().expect("standard layout")).collect();
    let b_parts: Vec<&[f64]> = b_std.iter().map(|m| m.as_slice().expect("standard layout")).collect();
    cosine_parts(&a_parts, &b_parts)
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn identity(n: usize) -> Matrix {
    Array2::eye(n)
}

/// Eigenvalues of a symmetric matrix, descending, by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape(format!("eigenvalues of {:?}", m.dim())));
    }
    let mut a = m.clone();
    let scale = frobenius(&a).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}

/// Singular values, descending. Works on the smaller Gram matrix.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let gram = if m.nrows() <= m.ncols() {
        m.dot(&m.t())
    } else {
        m.t().dot(m)
    };
    symmetric_eigenvalues(&gram)
        .expect("gram matrix is square")
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

/// Orthonormalises the columns of `m` in place (modified Gram-Schmidt, two passes).
///
/// Requires `rows >= cols` and full column rank.
pub fn orthonormalize_columns(m: &mut Matrix) -> Result<()> {
    let (rows, cols) = m.dim();
    if rows < cols {
        return Err(Error::Shape(format!(
            "cannot orthonormalise {cols} columns in dimension {rows}"
        )));
    }
    for _pass in 0..2 {
        for j in 0..cols {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let ci = m.column(i).to_owned();
                m.column_mut(j).scaled_add(-proj, &ci);
            }
            let norm = m.column(j).dot(&m.column(j)).sqrt();
            if norm < 1e-12 {
                return Err(Error::InvalidArgument("rank-deficient matrix".into()));
            }
            m.column_mut(j).mapv_inplace(|x| x / norm);
        }
    }
    Ok(())
}

/// Random `rows x cols` matrix with `M^T M = I` (`rows >= cols`).
pub fn left_orthogonal(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    loop {
        let mut m = gaussian_matrix(rng, rows, cols, 1.0);
        if orthonormalize_columns(&mut m).is_ok() {
            return m;
        }
    }
}

/// Lower-triangular `L` with `L L^T = c` for a symmetric PSD `c`.
///
/// Zero pivots (up to a relative tolerance) are allowed, so degenerate
/// covariances such as `u = v` still factor. A clearly negative pivot means
/// the matrix is not PSD.
pub fn cholesky_psd(c: ArrayView2<f64>) -> Result<Matrix> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::Shape(format!("cholesky of {:?}", c.dim())));
    }
    let scale = c.diag().iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
    let tol = 1e-10 * scale;
    for i in 0..n {
        for j in 0..i {
            if (c[[i, j]] - c[[j, i]]).abs() > 1e-9 * scale {
                return Err(Error::NotPsd("matrix is not symmetric".into()));
            }
        }
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = c[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d < -tol {
            return Err(Error::NotPsd(format!("negative pivot {d:e} at index {j}")));
        }
        let djj = d.max(0.0).sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = c[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = if djj > tol.sqrt() { s / djj } else { 0.0 };
        }
    }
    // the factor must reproduce c; otherwise a zero pivot hid a violation
    let recon = l.dot(&l.t());
    let err = (&recon - &c).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if err > 1e-8 * scale {
        return Err(Error::NotPsd(format!("reconstruction error {err:e}")));
    }
    Ok(l)
}

/// Column means of the rows of `m` (sample mean over axis 0).
pub fn row_mean(m: &Matrix) -> Vector {
    m.mean_axis(Axis(0)).expect("non-empty")
}

/// Sample covariance of the rows of `m` (normalised by n - 1).
pub fn sample_covariance(m: &Matrix) -> Matrix {
    let n = m.nrows() as f64;
    let mu = row_mean(m);
    let centred = m - &mu;
    centred.t().dot(&centred) / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_scale_gives_zero_matrix() {
        let mut r = Rng::new(1);
        assert!(gaussian_matrix(&mut r, 3, 4, 0.0).iter().all(|&x| x == 0.0));
        assert!(uniform_matrix(&mut r, 3, 4, 0.0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_moments() {
        // 10^6 pooled samples from 3x3 draws
        let mut r = Rng::new(11);
        let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
        for _ in 0..111_112 {
            for x in gaussian_matrix(&mut r, 3, 3, 1.0).iter() {
                s1 += x;
                s2 += x * x;
                n += 1.0;
            }
        }
        let mean = s1 / n;
        let var = s2 / n - mean * mean;
        // se(mean) = 1/sqrt(n), se(var) = sqrt(2/n)
        assert!(mean.abs() < 5.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn uniform_support_and_variance() {
        let mut r = Rng::new(5);
        let m = uniform_matrix(&mut r, 1, 1_000_000, 1.0);
        assert!(m.iter().all(|x| (-1.0..=1.0).contains(x)));
        let var = m.iter().map(|x| x * x).sum::<f64>() / m.len() as f64;
        assert!((var - 1.0 / 3.0).abs() < 0.01 / 3.0, "var {var}");
        let mut r2 = Rng::new(5);
        assert_eq!(uniform_matrix(&mut r2, 1, 1_000_000, 1.0), m);
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = gaussian_matrix(&mut Rng::new(9), 4, 5, 1.0);
        let b = gaussian_matrix(&mut Rng::new(9), 4, 5, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn cosine_basics() {
        let v = [0.3, -1.2, 2.0];
        let w = [-0.3, 1.2, -2.0];
        assert_abs_diff_eq!(cosine(&v, &v).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cosine(&v, &w).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[0.0, 1.0]), Err(Error::ZeroNorm));
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn singular_values_hand_cases() {
        // diag(3, 2) rotated: singular values are 3, 2
        let m = array![[3.0, 0.0], [0.0, -2.0]];
        let s = singular_values(&m);
        assert_abs_diff_eq!(s[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 2.0, epsilon = 1e-12);
        // [[1,1],[0,1]]: sigma^2 = (3 +- sqrt 5)/2
        let m = array![[1.0, 1.0], [0.0, 1.0]];
        let s = singular_values(&m);
        assert_abs_diff_eq!(s[0], ((3.0 + 5f64.sqrt()) / 2.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], ((3.0 - 5f64.sqrt()) / 2.0).sqrt(), epsilon = 1e-12);
        // rank one 3x3: u v^T has a single nonzero singular value |u||v|
        let m = array![[1.0, 2.0, 2.0], [2.0, 4.0, 4.0], [0.0, 0.0, 0.0]];
        let s = singular_values(&m);
        assert_abs_diff_eq!(s[0], 5f64.sqrt() * 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s[2], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn left_orthogonal_is_orthonormal() {
        let f = left_orthogonal(&mut Rng::new(2), 100, 10);
        let g = f.t().dot(&f);
        let err = (&g - &identity(10)).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn cholesky_degenerate_and_invalid() {
        let c = array![[2.0, 2.0], [2.0, 2.0]];
        let l = cholesky_psd(c.view()).unwrap();
        assert_abs_diff_eq!(l.dot(&l.t()), c, epsilon = 1e-12);
        let bad = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(cholesky_psd(bad.view()), Err(Error::NotPsd(_))));
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant(v in prop::collection::vec(-5.0..5.0f64, 6),
                                  w in prop::collection::vec(-5.0..5.0f64, 6),
                                  lam in 1e-3..1e3f64) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-3) && w.iter().any(|x| x.abs() > 1e-3));
            let c = cosine(&v, &w).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| lam * x).collect();
            prop_assert!((c - cosine(&scaled, &w).unwrap()).abs() < 1e-12);
            prop_assert!((c - cosine(&w, &v).unwrap()).abs() < 1e-15);
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn transpose_of_product(seed in 0u64..1000, n in 1usize..6, k in 1usize..6, m in 1usize..6) {
            let mut r = Rng::new(seed);
            let a = gaussian_matrix(&mut r, n, k, 1.0);
            let b = gaussian_matrix(&mut r, k, m, 1.0);
            let lhs = a.dot(&b).t().to_owned();
            let rhs = b.t().dot(&a.t());
            prop_assert!((&lhs - &rhs).iter().all(|x| x.abs() < 1e-12));
        }
    }
}
