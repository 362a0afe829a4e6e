//! Spherical Bessel/Hankel tables and orthonormal spherical harmonics.
//!
//! Harmonics follow
//! `Y_n^m(θ,φ) = (-1)^m sqrt((2n+1)/(4π) (n-|m|)!/(n+|m|)!) P_n^{|m|}(cos θ) e^{imφ}`
//! with `P_n^m` free of the Condon–Shortley phase, so `conj(Y_n^m) = Y_n^{-m}`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::{Error, Result, C64};

/// Degree/order pair `(n, m)` with `|m| <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub n: usize,
    pub m: i64,
}

impl ModeIndex {
    pub fn new(n: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > n {
            return Err(Error::domain(alloc::format!("|m| = {} exceeds n = {n}", m.abs())));
        }
        Ok(ModeIndex { n, m })
    }

    /// `n² + n + m`.
    pub fn linear(self) -> usize {
        ((self.n * self.n + self.n) as i64 + self.m) as usize
    }

    pub fn from_linear(idx: usize) -> Self {
        let n = (idx as f64).sqrt().floor() as usize;
        let n = if (n + 1) * (n + 1) <= idx {
            n + 1
        } else if n * n > idx {
            n - 1
        } else {
            n
        };
        ModeIndex { n, m: idx as i64 - (n * n + n) as i64 }
    }

    /// Number of modes with `n <= order_max`.
    pub fn count(order_max: usize) -> usize {
        (order_max + 1) * (order_max + 1)
    }

    /// All modes up to `order_max` in linear-index order.
    pub fn all(order_max: usize) -> impl Iterator<Item = ModeIndex> {
        (0..Self::count(order_max)).map(Self::from_linear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialKind {
    /// `j_n`
    Regular,
    /// `h_n^(1)`
    Outgoing,
}

/// `z_n(x)` and `z_n'(x)` for `n = 0..=order_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    pub kind: RadialKind,
    pub order_max: usize,
    pub argument: f64,
    pub values: Vec<C64>,
    pub derivatives: Vec<C64>,
}

impl RadialTable {
    pub fn value(&self, n: usize) -> C64 {
        self.values[n]
    }

    pub fn derivative(&self, n: usize) -> C64 {
        self.derivatives[n]
    }
}

pub fn radial_table(kind: RadialKind, order_max: usize, x: f64) -> Result<RadialTable> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(alloc::format!("radial argument must be finite and positive, got {x}")));
    }
    let values: Vec<C64> = match kind {
        RadialKind::Regular => spherical_jn(order_max + 1, x).into_iter().map(C64::from).collect(),
        RadialKind::Outgoing => spherical_hn(order_max + 1, x),
    };
    let mut derivatives = Vec::with_capacity(order_max + 1);
    derivatives.push(-values[1]);
    for n in 1..=order_max {
        derivatives.push(values[n - 1] - values[n] * ((n + 1) as f64 / x));
    }
    let mut values = values;
    values.truncate(order_max + 1);
    Ok(RadialTable { kind, order_max, argument: x, values, derivatives })
}

/// `j_0..=j_{order_max}` at `x > 0` by Miller's downward recurrence.
pub fn spherical_jn(order_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; order_max + 1];
    let start = order_max.max(x as usize) + 40 + (x.sqrt() as usize);
    let mut next = 0.0_f64;
    let mut cur = 1e-300_f64;
    for k in (0..=start).rev() {
        if k <= order_max {
            out[k] = cur;
        }
        if k == 0 {
            break;
        }
        // j_{k-1} = (2k+1)/x j_k - j_{k+1}
        let prev = (2 * k + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    // `cur` now holds the unnormalized j_0 and `next` j_1.
    let (j0, j1) = (cur, next);
    let (t0, t1) = (sin_over(x), j1_exact(x));
    let scale = if t0.abs() >= t1.abs() { t0 / j0 } else { t1 / j1 };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

fn sin_over(x: f64) -> f64 {
    if x < 1e-4 {
        1.0 - x * x / 6.0 + x * x * x * x / 120.0
    } else {
        x.sin() / x
    }
}

fn j1_exact(x: f64) -> f64 {
    if x < 0.1 {
        // x/3 - x³/30 + x⁵/840 - x⁷/45360
        let x2 = x * x;
        x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)))
    } else {
        x.sin() / (x * x) - x.cos() / x
    }
}

/// `h_0^(1)..=h_{order_max}^(1)` at `x > 0` by upward recurrence.
pub fn spherical_hn(order_max: usize, x: f64) -> Vec<C64> {
    let i = C64::i();
    let e = C64::new(x.cos(), x.sin());
    let mut out = Vec::with_capacity(order_max + 1);
    out.push(-i * e / x);
    if order_max >= 1 {
        out.push(-e * C64::new(x, 1.0) / (x * x));
    }
    for n in 1..order_max {
        let v = out[n] * ((2 * n + 1) as f64 / x) - out[n - 1];
        out.push(v);
    }
    out
}

/// Normalized associated Legendre values `p[n,m] = N_n^m P_n^m(cos θ)` and
/// `q[n,m] = p[n,m] / sin θ` (the latter for `m >= 1`, finite at the poles),
/// stored triangularly for `0 <= m <= n <= order_max`.
#[derive(Debug, Clone)]
pub(crate) struct Legendre {
    order_max: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    dp: Vec<f64>,
}

#[inline]
fn tri(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

impl Legendre {
    pub(crate) fn new(order_max: usize, theta: f64) -> Self {
        let (s, x) = theta.sin_cos();
        let s = s.max(0.0);
        let len = tri(order_max + 1, 0);
        let mut p = vec![0.0; len];
        let mut q = vec![0.0; len];
        p[0] = 0.5 / PI.sqrt();
        for m in 0..=order_max {
            if m >= 1 {
                let f = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
                q[tri(m, m)] = if m == 1 { f * p[0] } else { f * s * q[tri(m - 1, m - 1)] };
                p[tri(m, m)] = if m == 1 { f * s * p[0] } else { f * s * p[tri(m - 1, m - 1)] };
            }
            if m < order_max {
                let f = ((2 * m + 3) as f64).sqrt() * x;
                p[tri(m + 1, m)] = f * p[tri(m, m)];
                q[tri(m + 1, m)] = f * q[tri(m, m)];
            }
            for n in (m + 2)..=order_max {
                let (nf, mf) = (n as f64, m as f64);
                let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
                let n1 = nf - 1.0;
                let b = ((n1 * n1 - mf * mf) / (4.0 * n1 * n1 - 1.0)).sqrt();
                p[tri(n, m)] = a * (x * p[tri(n - 1, m)] - b * p[tri(n - 2, m)]);
                q[tri(n, m)] = a * (x * q[tri(n - 1, m)] - b * q[tri(n - 2, m)]);
            }
        }
        let mut dp = vec![0.0; len];
        for n in 1..=order_max {
            dp[tri(n, 0)] = -((n * (n + 1)) as f64).sqrt() * p[tri(n, 1)];
            for m in 1..=n {
                let (nf, mf) = (n as f64, m as f64);
                let lower = if n > m { q[tri(n - 1, m)] } else { 0.0 };
                let c = ((2.0 * nf + 1.0) * (nf - mf) * (nf + mf) / (2.0 * nf - 1.0)).sqrt();
                dp[tri(n, m)] = nf * x * q[tri(n, m)] - c * lower;
            }
        }
        Legendre { order_max, p, q, dp }
    }
}

fn sign(m: i64) -> f64 {
    if m & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_angles(theta: f64, phi: f64) -> Result<()> {
    if !theta.is_finite() || !phi.is_finite() || !(-1e-12..=PI + 1e-12).contains(&theta) {
        return Err(Error::domain(alloc::format!("invalid angles θ = {theta}, φ = {phi}")));
    }
    Ok(())
}

pub fn spherical_harmonic(mode: ModeIndex, theta: f64, phi: f64) -> Result<C64> {
    check_angles(theta, phi)?;
    let t = HarmonicTable::new(mode.n, theta, phi);
    Ok(t.y[mode.linear()])
}

/// `(∂_θ Y, (1/sin θ) ∂_φ Y)`; the pole limit is used at θ = 0, π.
pub fn surface_gradient_y(mode: ModeIndex, theta: f64, phi: f64) -> Result<[C64; 2]> {
    check_angles(theta, phi)?;
    let t = HarmonicTable::new(mode.n, theta, phi);
    Ok([t.grad_theta[mode.linear()], t.grad_phi[mode.linear()]])
}

/// `Y_n^m` and its surface gradient for all modes up to `order_max` at one
/// direction, indexed by [`ModeIndex::linear`].
#[derive(Debug, Clone)]
pub struct HarmonicTable {
    pub order_max: usize,
    pub y: Vec<C64>,
    pub grad_theta: Vec<C64>,
    pub grad_phi: Vec<C64>,
}

impl HarmonicTable {
    pub fn new(order_max: usize, theta: f64, phi: f64) -> Self {
        let leg = Legendre::new(order_max, theta);
        let count = ModeIndex::count(order_max);
        let mut y = vec![C64::new(0.0, 0.0); count];
        let mut gt = y.clone();
        let mut gp = y.clone();
        for n in 0..=leg.order_max {
            for m in -(n as i64)..=(n as i64) {
                let am = m.unsigned_abs() as usize;
                let k = tri(n, am);
                let e = C64::new((m as f64 * phi).cos(), (m as f64 * phi).sin()) * sign(m);
                let idx = ModeIndex { n, m }.linear();
                y[idx] = e * leg.p[k];
                gt[idx] = e * leg.dp[k];
                if m != 0 {
                    gp[idx] = e * C64::new(0.0, m as f64 * leg.q[k]);
                }
            }
        }
        HarmonicTable { order_max, y, grad_theta: gt, grad_phi: gp }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_index_roundtrip() {
        for idx in 0..400 {
            let m = ModeIndex::from_linear(idx);
            assert!(m.m.unsigned_abs() as usize <= m.n);
            assert_eq!(m.linear(), idx);
        }
    }

    #[test]
    fn closed_forms() {
        let t = radial_table(RadialKind::Regular, 0, 1.0).unwrap();
        assert!((t.values[0].re - 0.8414709848).abs() < 1e-10);
        let h = radial_table(RadialKind::Outgoing, 0, 1.0).unwrap();
        assert!((h.values[0] - C64::new(0.8414709848, -0.5403023059)).norm() < 1e-10);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(radial_table(RadialKind::Regular, 3, 0.0).is_err());
        assert!(radial_table(RadialKind::Outgoing, 3, -1.0).is_err());
        assert!(radial_table(RadialKind::Regular, 3, f64::NAN).is_err());
        assert!(ModeIndex::new(1, 2).is_err());
    }

    #[test]
    fn constant_mode() {
        let y = spherical_harmonic(ModeIndex { n: 0, m: 0 }, 0.7, 2.0).unwrap();
        assert!((y.re - 0.2820947918).abs() < 1e-10 && y.im == 0.0);
        let g = surface_gradient_y(ModeIndex { n: 0, m: 0 }, 0.7, 2.0).unwrap();
        assert_eq!(g[0].norm() + g[1].norm(), 0.0);
    }
}
