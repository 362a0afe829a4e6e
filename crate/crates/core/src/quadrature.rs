//! Gauss-Legendre rules and product grids on the unit sphere.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::{Error, Point, Result};

/// Nodes (ascending) and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// A direction on the unit sphere given by polar and azimuthal angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalDirection {
    pub theta: f64,
    pub phi: f64,
}

impl SphericalDirection {
    pub fn new(theta: f64, phi: f64) -> Self {
        SphericalDirection { theta, phi }
    }

    /// Angles of a nonzero vector (φ in [0, 2π)).
    pub fn from_vector(v: &Point) -> Result<Self> {
        let r = v.norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::domain("direction vector must be finite and nonzero"));
        }
        let theta = (v.z / r).clamp(-1.0, 1.0).acos();
        let mut phi = v.y.atan2(v.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        Ok(SphericalDirection { theta, phi })
    }

    pub fn unit(&self) -> Point {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Point::new(st * cp, st * sp, ct)
    }

    pub fn theta_hat(&self) -> Point {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Point::new(ct * cp, ct * sp, -st)
    }

    pub fn phi_hat(&self) -> Point {
        let (sp, cp) = self.phi.sin_cos();
        Point::new(-sp, cp, 0.0)
    }
}

/// Gauss-Legendre in cos θ times uniform φ; weights sum to 4π.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub directions: Vec<SphericalDirection>,
    pub weights: Vec<f64>,
}

impl ProductGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::usage("grid sizes must be positive"));
        }
        let (x, w) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        // cos θ descending so θ ascends.
        for i in (0..n_theta).rev() {
            let theta = x[i].clamp(-1.0, 1.0).acos();
            for j in 0..n_phi {
                directions.push(SphericalDirection::new(theta, j as f64 * dphi));
                weights.push(w[i] * dphi);
            }
        }
        Ok(ProductGrid { n_theta, n_phi, directions, weights })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Index of the antipodal node, if the grid is closed under α ↦ −α.
    pub fn antipode(&self, q: usize) -> Option<usize> {
        if !self.n_phi.is_multiple_of(2) {
            return None;
        }
        let (i, j) = (q / self.n_phi, q % self.n_phi);
        Some((self.n_theta - 1 - i) * self.n_phi + (j + self.n_phi / 2) % self.n_phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        let g = ProductGrid::new(11, 21).unwrap();
        let s: f64 = g.weights.iter().sum();
        assert!((s - 4.0 * PI).abs() < 1e-12);
        assert_eq!(g.len(), 231);
    }

    #[test]
    fn antipodes() {
        let g = ProductGrid::new(11, 22).unwrap();
        for q in 0..g.len() {
            let a = g.antipode(q).unwrap();
            assert!((g.directions[q].unit() + g.directions[a].unit()).norm() < 1e-12);
        }
        assert!(ProductGrid::new(11, 21).unwrap().antipode(0).is_none());
    }
}
