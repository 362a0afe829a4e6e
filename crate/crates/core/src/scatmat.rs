//! Per-mode scattering matrices and their binary encoding.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Matrix3;
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::specfun::{radial_table, ModeIndex, RadialKind};
use crate::wavebasis::{CoefficientVector, ExpansionKind, Family, Material};
use crate::{Error, Result, C64};

/// Relative threshold below which a mode-matching denominator counts as
/// resonant.
pub const RESONANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    AnalyticSphere,
    /// Loaded from an external source (the label is typically a path).
    External(String),
}

/// 3×3 blocks mapping `(a, b, c)` to `(α, β, γ)`, one per mode in linear
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrixBlocks {
    pub order_max: usize,
    pub kappa_p: f64,
    pub kappa_s: f64,
    pub radius: f64,
    pub provenance: Provenance,
    pub blocks: Vec<Matrix3<C64>>,
    /// Condition number of the (a,c) mode-matching matrix per degree
    /// (analytic spheres only).
    pub conditioning: Vec<f64>,
}

impl ScatteringMatrixBlocks {
    pub fn block(&self, mode: ModeIndex) -> &Matrix3<C64> {
        &self.blocks[mode.linear()]
    }

    /// Blocks from raw data; `n = 0` shear rows and columns must be zero.
    pub fn from_blocks(
        order_max: usize,
        kappa_p: f64,
        kappa_s: f64,
        radius: f64,
        provenance: Provenance,
        blocks: Vec<Matrix3<C64>>,
    ) -> Result<Self> {
        if blocks.len() != ModeIndex::count(order_max) {
            return Err(Error::usage("block count does not match the order"));
        }
        let b0 = &blocks[0];
        for i in 0..3 {
            for j in 0..3 {
                if (i < 2 || j < 2) && b0[(i, j)] != C64::new(0.0, 0.0) {
                    return Err(Error::domain("n = 0 block may only couple the compressional channel"));
                }
            }
        }
        Ok(ScatteringMatrixBlocks { order_max, kappa_p, kappa_s, radius, provenance, blocks, conditioning: Vec::new() })
    }

    /// Blocks restricted to `order_max <= self.order_max`.
    pub fn truncated(&self, order_max: usize) -> Result<Self> {
        if order_max > self.order_max {
            return Err(Error::OrderMismatch { file: self.order_max, requested: order_max });
        }
        let mut out = self.clone();
        out.order_max = order_max;
        out.blocks.truncate(ModeIndex::count(order_max));
        out.conditioning.truncate(order_max + 1);
        Ok(out)
    }

    /// Outgoing coefficients for the given incoming ones.
    pub fn apply(&self, incoming: &CoefficientVector) -> Result<CoefficientVector> {
        if incoming.kind != ExpansionKind::Incoming {
            return Err(Error::usage("scattering matrix acts on incoming coefficients"));
        }
        if incoming.order_max > self.order_max {
            return Err(Error::OrderMismatch { file: self.order_max, requested: incoming.order_max });
        }
        let mut out = CoefficientVector::zeros(ExpansionKind::Outgoing, incoming.order_max);
        let src = incoming.as_slice();
        let dst = out.as_mut_slice();
        for k in 0..ModeIndex::count(incoming.order_max) {
            let b = &self.blocks[k];
            for i in 0..3 {
                dst[3 * k + i] = b[(i, 0)] * src[3 * k] + b[(i, 1)] * src[3 * k + 1] + b[(i, 2)] * src[3 * k + 2];
            }
        }
        dst[0] = C64::new(0.0, 0.0);
        dst[1] = C64::new(0.0, 0.0);
        Ok(out)
    }

    /// Inverse action on outgoing coefficients (used by the unpreconditioned
    /// system only).
    pub fn inverse_apply(&self, outgoing: &CoefficientVector) -> Result<CoefficientVector> {
        if outgoing.order_max > self.order_max {
            return Err(Error::OrderMismatch { file: self.order_max, requested: outgoing.order_max });
        }
        let mut out = CoefficientVector::zeros(ExpansionKind::Incoming, outgoing.order_max);
        let src = outgoing.as_slice();
        let dst = out.as_mut_slice();
        let s00 = self.blocks[0][(2, 2)];
        if s00.norm() == 0.0 {
            return Err(Error::domain("singular n = 0 scattering block"));
        }
        dst[2] = src[2] / s00;
        for k in 1..ModeIndex::count(outgoing.order_max) {
            let inv = self.blocks[k]
                .try_inverse()
                .ok_or_else(|| Error::domain(format!("singular scattering block at mode {k}")))?;
            for i in 0..3 {
                dst[3 * k + i] = inv[(i, 0)] * src[3 * k] + inv[(i, 1)] * src[3 * k + 1] + inv[(i, 2)] * src[3 * k + 2];
            }
        }
        Ok(out)
    }
}

/// Rigid-sphere blocks by mode matching.
pub fn sphere_scattering_blocks(radius: f64, material: &Material, order_max: usize) -> Result<ScatteringMatrixBlocks> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::domain("sphere radius must be positive"));
    }
    let (ks, kp) = (material.kappa_s, material.kappa_p);
    let (xs, xp) = (ks * radius, kp * radius);
    let js = radial_table(RadialKind::Regular, order_max, xs)?;
    let hs = radial_table(RadialKind::Outgoing, order_max, xs)?;
    let jp = radial_table(RadialKind::Regular, order_max, xp)?;
    let hp = radial_table(RadialKind::Outgoing, order_max, xp)?;
    let i = C64::i();
    let mut per_n = Vec::with_capacity(order_max + 1);
    let mut conditioning = Vec::with_capacity(order_max + 1);

    let d0 = hp.derivatives[0];
    if d0.norm() < RESONANCE_TOLERANCE * (jp.derivatives[0].norm() + hp.values[0].norm()) {
        return Err(Error::Resonance { n: 0, channel: Family::Grad, magnitude: d0.norm() });
    }
    let mut b0 = Matrix3::zeros();
    b0[(2, 2)] = -jp.derivatives[0] / d0;
    per_n.push(b0);
    conditioning.push(1.0);

    for n in 1..=order_max {
        let nn = (n * (n + 1)) as f64;
        let rows = |z: &[C64], zd: &[C64], zp: &[C64], zpd: &[C64]| {
            [[(z[n] + zd[n] * xs) / (i * xs), zp[n] / radius], [z[n] * nn / (i * xs), zpd[n] * kp]]
        };
        let d = rows(&hs.values, &hs.derivatives, &hp.values, &hp.derivatives);
        let e = rows(&js.values, &js.derivatives, &jp.values, &jp.derivatives);
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        let scale = (d[0][0].norm() + d[0][1].norm()) * (d[1][0].norm() + d[1][1].norm());
        if det.norm() < RESONANCE_TOLERANCE * scale {
            return Err(Error::Resonance { n, channel: Family::CurlCurl, magnitude: det.norm() / scale });
        }
        let h = hs.values[n];
        if h.norm() < RESONANCE_TOLERANCE * (h.norm() + js.values[n].norm()) {
            return Err(Error::Resonance { n, channel: Family::Curl, magnitude: h.norm() });
        }
        let inv = [[d[1][1] / det, -d[0][1] / det], [-d[1][0] / det, d[0][0] / det]];
        conditioning.push(condition_2x2(&d));
        let mut b = Matrix3::zeros();
        // rows/cols 0 and 2 are the (a,c) → (α,γ) pair
        let idx = [0usize, 2];
        for r in 0..2 {
            for c in 0..2 {
                b[(idx[r], idx[c])] = -(inv[r][0] * e[0][c] + inv[r][1] * e[1][c]);
            }
        }
        b[(1, 1)] = -js.values[n] / h;
        per_n.push(b);
    }

    let blocks = ModeIndex::all(order_max).map(|m| per_n[m.n]).collect();
    Ok(ScatteringMatrixBlocks {
        order_max,
        kappa_p: kp,
        kappa_s: ks,
        radius,
        provenance: Provenance::AnalyticSphere,
        blocks,
        conditioning,
    })
}

fn condition_2x2(d: &[[C64; 2]; 2]) -> f64 {
    // σ_max/σ_min from the Frobenius norm and |det|.
    let f2: f64 = d.iter().flatten().map(|v| v.norm_sqr()).sum();
    let det = (d[0][0] * d[1][1] - d[0][1] * d[1][0]).norm();
    let disc = (f2 * f2 - 4.0 * det * det).max(0.0).sqrt();
    let smax = ((f2 + disc) / 2.0).sqrt();
    let smin = det / smax;
    smax / smin
}

/// Diagonal maps between kernel coefficients in the basis
/// `(GradY, x̂×GradY, Y x̂)` and incoming/outgoing coefficients:
/// incoming = `D_inc` · kernel, far field = `D_scat` · outgoing.
pub fn kernel_maps(n: usize, material: &Material) -> ([C64; 3], [C64; 3]) {
    let i = C64::i();
    let ipow = i.powu(n as u32);
    let mipow = (-i).powu(n as u32);
    let four_pi = 4.0 * PI;
    let ks = material.kappa_s;
    let d_inc = [ipow * four_pi, -ipow * four_pi, -ipow * i * four_pi / material.kappa_p];
    let d_scat = [mipow * (-i) / ks, -mipow * (-i) / ks, mipow];
    (d_inc, d_scat)
}

/// Far-field operator block `(1/ω) D_scat S D_inc` for degree `n`.
pub fn far_field_block(blocks: &ScatteringMatrixBlocks, mode: ModeIndex, material: &Material) -> Matrix3<C64> {
    let (d_inc, d_scat) = kernel_maps(mode.n, material);
    let s = blocks.block(mode);
    let mut f = Matrix3::zeros();
    for r in 0..3 {
        for c in 0..3 {
            f[(r, c)] = d_scat[r] * s[(r, c)] * d_inc[c] / material.omega;
        }
    }
    f
}

/// Eigenvalues of a far-field block: one for `n = 0`, three otherwise
/// (ordered: the two of the (a,c) pair by decreasing modulus, then the
/// decoupled b-channel value).
pub fn block_eigenvalues(f: &Matrix3<C64>, n: usize) -> Vec<C64> {
    if n == 0 {
        return vec![f[(2, 2)]];
    }
    let (a, b, c, d) = (f[(0, 0)], f[(0, 2)], f[(2, 0)], f[(2, 2)]);
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det * 4.0).sqrt();
    // larger root first, smaller from the product to avoid cancellation
    let l1 = if (tr + disc).norm() >= (tr - disc).norm() { (tr + disc) / 2.0 } else { (tr - disc) / 2.0 };
    let l2 = if l1.norm() > 0.0 { det / l1 } else { C64::new(0.0, 0.0) };
    vec![l1, l2, f[(1, 1)]]
}

/// Small-sphere eigenvalue formulas for one degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmallSphereEigenvalues {
    Monopole { exact: C64, leading: C64 },
    Multipole { lambda1: C64, lambda2_exact: C64, lambda2_leading: C64, lambda3: C64 },
}

fn gamma_half(n: usize) -> f64 {
    // Γ(n + 1/2)
    let mut g = PI.sqrt();
    for k in 0..n {
        g *= k as f64 + 0.5;
    }
    g
}

/// `c_n = 4π² i / (2^{2n+1} Γ(n+1/2) Γ(n+3/2))`.
pub fn small_sphere_cn(n: usize) -> C64 {
    let v = 4.0 * PI * PI / (2f64.powi(2 * n as i32 + 1) * gamma_half(n) * gamma_half(n + 1));
    C64::new(0.0, v)
}

/// Leading-order small-sphere eigenvalues (as in the asymptotic theorem for
/// rigid spheres) plus the exact closed forms where available.
pub fn small_sphere_eigenvalues(n: usize, radius: f64, material: &Material) -> Result<SmallSphereEigenvalues> {
    if !(radius > 0.0) {
        return Err(Error::domain("radius must be positive"));
    }
    let i = C64::i();
    let (kp, ks) = (material.kappa_p, material.kappa_s);
    if n == 0 {
        let jp = radial_table(RadialKind::Regular, 0, kp * radius)?;
        let hp = radial_table(RadialKind::Outgoing, 0, kp * radius)?;
        let exact = i * 4.0 * PI * jp.derivatives[0] / (hp.derivatives[0] * kp);
        let leading = C64::from(-4.0 * PI / 3.0 * kp * kp * radius.powi(3));
        return Ok(SmallSphereEigenvalues::Monopole { exact, leading });
    }
    let cn = small_sphere_cn(n);
    let nf = n as f64;
    let ks2n = ks.powi(2 * n as i32);
    let kp2n = kp.powi(2 * n as i32);
    let lambda1 = cn * i * ((2.0 * nf - 1.0) * (2.0 * nf + 1.0) * (ks2n * (nf + 1.0) + kp2n * nf))
        / ((nf + 1.0) * ks * ks + nf * kp * kp)
        * radius.powi(2 * n as i32 - 1);
    let js = radial_table(RadialKind::Regular, n, ks * radius)?;
    let hs = radial_table(RadialKind::Outgoing, n, ks * radius)?;
    let lambda2_exact = i * 4.0 * PI * js.values[n] / (hs.values[n] * ks);
    let lambda2_leading = cn * i * ks2n * radius.powi(2 * n as i32 + 1);
    let lambda3 = cn * i * ((nf * ks * ks + (nf + 1.0) * kp * kp) * kp2n * ks2n)
        / (ks * (2.0 * nf + 3.0) * (ks2n * (nf + 1.0) + kp2n * nf) * (1.0 + 2.0 * nf))
        * radius.powi(2 * n as i32 + 3);
    Ok(SmallSphereEigenvalues::Multipole { lambda1, lambda2_exact, lambda2_leading, lambda3 })
}

const MAGIC: &[u8; 5] = b"ESMX1";
const HEADER_LEN: usize = 5 + 4 + 3 * 8;

impl ScatteringMatrixBlocks {
    /// `ESMX1` encoding: little-endian header `{magic, N: u32, κ_p, κ_s, R}`
    /// followed by 9 complex entries (re, im) per mode, row-major.
    pub fn to_esmx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.blocks.len() * 144);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.order_max as u32).to_le_bytes());
        for v in [self.kappa_p, self.kappa_s, self.radius] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for b in &self.blocks {
            for r in 0..3 {
                for c in 0..3 {
                    out.extend_from_slice(&b[(r, c)].re.to_le_bytes());
                    out.extend_from_slice(&b[(r, c)].im.to_le_bytes());
                }
            }
        }
        out
    }

    /// Decodes `ESMX1` bytes and truncates to `requested_order`.
    pub fn from_esmx_bytes(bytes: &[u8], requested_order: usize, label: String) -> Result<Self> {
        let fmt = |offset: usize, reason: &str| Error::Format { offset, reason: reason.into() };
        if bytes.len() < HEADER_LEN {
            return Err(fmt(bytes.len(), "truncated header"));
        }
        if &bytes[..5] != MAGIC {
            return Err(fmt(0, "bad magic, expected ESMX1"));
        }
        let order = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (kp, ks, r) = (f(9), f(17), f(25));
        for (k, v) in [kp, ks, r].iter().enumerate() {
            if !v.is_finite() || *v <= 0.0 {
                return Err(fmt(9 + 8 * k, "header values must be finite and positive"));
            }
        }
        if order > 4096 {
            return Err(fmt(5, "implausible order"));
        }
        let count = ModeIndex::count(order);
        let need = HEADER_LEN + count * 144;
        if bytes.len() < need {
            return Err(fmt(bytes.len(), "truncated block data"));
        }
        if bytes.len() > need {
            return Err(fmt(need, "trailing bytes after block data"));
        }
        if order < requested_order {
            return Err(Error::OrderMismatch { file: order, requested: requested_order });
        }
        let mut blocks = Vec::with_capacity(count);
        let mut o = HEADER_LEN;
        for _ in 0..count {
            let mut b = Matrix3::zeros();
            for r in 0..3 {
                for c in 0..3 {
                    let (re, im) = (f(o), f(o + 8));
                    if !re.is_finite() || !im.is_finite() {
                        return Err(fmt(o, "non-finite entry"));
                    }
                    b[(r, c)] = C64::new(re, im);
                    o += 16;
                }
            }
            blocks.push(b);
        }
        let full = ScatteringMatrixBlocks::from_blocks(order, kp, ks, r, Provenance::External(label), blocks)
            .map_err(|_| fmt(HEADER_LEN, "n = 0 block couples shear channels"))?;
        full.truncated(requested_order)
    }
}
