//! Dense eigen-solvers and small fitting helpers.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::C64;

/// Eigenvalues of a general complex matrix (complex Schur form).
pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let s = nalgebra::linalg::Schur::new(m.clone());
    s.eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let e = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[b].partial_cmp(&e.eigenvalues[a]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| e.eigenvalues[k]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vecs.set_column(j, &e.eigenvectors.column(k));
    }
    (values, vecs)
}

/// Least-squares circle through the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub center: C64,
    pub radius: f64,
    /// RMS of `|z − center| − radius` over the points, divided by the radius.
    pub relative_residual: f64,
}

/// Fits `|z − c| = |c|`, i.e. `|z|² = 2 Re(z c̄)`, by linear least squares.
pub fn fit_circle_through_origin(points: &[C64]) -> Option<CircleFit> {
    if points.len() < 2 {
        return None;
    }
    let a = DMatrix::from_fn(points.len(), 2, |i, j| 2.0 * if j == 0 { points[i].re } else { points[i].im });
    let b = DVector::from_iterator(points.len(), points.iter().map(|z| z.norm_sqr()));
    let sol = a.clone().svd(true, true).solve(&b, 1e-300).ok()?;
    let center = C64::new(sol[0], sol[1]);
    let radius = center.norm();
    if !(radius > 0.0) {
        return None;
    }
    let ms: f64 = points.iter().map(|z| ((z - center).norm() - radius).powi(2)).sum::<f64>() / points.len() as f64;
    Some(CircleFit { center, radius, relative_residual: ms.sqrt() / radius })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_fit_recovers_exact_circle() {
        let c = C64::new(0.3, 1.7);
        let pts: Vec<C64> = (0..9).map(|k| c + C64::from_polar(c.norm(), 0.4 * k as f64)).collect();
        let f = fit_circle_through_origin(&pts).unwrap();
        assert!((f.center - c).norm() < 1e-12);
        assert!(f.relative_residual < 1e-12);
    }

    #[test]
    fn hermitian_sorted() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(1.0, 0.0)],
        );
        let (v, _) = hermitian_eigen(&m);
        assert!((v[0] - 2.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }
}
