//! Vector spherical wave fields and the incident/far-field representations
//! built on them.
//!
//! About a center `s`, with `u = z_n(κ|x-s|) Y_n^m` and `z` either `j_n` or
//! `h_n^(1)`, the three families are
//!
//! * curl-curl: `∇×∇×(x u)/(iκ_s)` (shear),
//! * curl: `∇×(x u)` (shear),
//! * grad: `∇u` with `κ = κ_p` (compressional).
//!
//! Coefficients `(a, b, c)` (incoming) or `(α, β, γ)` (outgoing) weight the
//! three families in that order.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Matrix3;
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::quadrature::{ProductGrid, SphericalDirection};
use crate::specfun::{radial_table, HarmonicTable, ModeIndex, RadialKind};
use crate::{CVec3, Error, Point, Result, C64};

/// Field family, also the channel slot in a [`CoefficientVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    CurlCurl = 0,
    Curl = 1,
    Grad = 2,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::CurlCurl, Family::Curl, Family::Grad];

    pub fn is_shear(self) -> bool {
        !matches!(self, Family::Grad)
    }
}

/// Regular (`j_n`, incoming) or radiating (`h_n^(1)`, outgoing) expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExpansionKind {
    Incoming,
    Outgoing,
}

impl ExpansionKind {
    pub fn radial(self) -> RadialKind {
        match self {
            ExpansionKind::Incoming => RadialKind::Regular,
            ExpansionKind::Outgoing => RadialKind::Outgoing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub omega: f64,
    pub lambda: f64,
    pub mu: f64,
    pub kappa_p: f64,
    pub kappa_s: f64,
}

impl Material {
    /// Wavenumbers only; ω defaults to 1.
    pub fn from_wavenumbers(kappa_p: f64, kappa_s: f64) -> Result<Self> {
        Self::with_frequency(1.0, kappa_p, kappa_s)
    }

    pub fn with_frequency(omega: f64, kappa_p: f64, kappa_s: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(omega) || !ok(kappa_p) || !ok(kappa_s) {
            return Err(Error::domain("frequency and wavenumbers must be finite and positive"));
        }
        if kappa_p >= kappa_s {
            return Err(Error::domain("κ_p must be smaller than κ_s"));
        }
        let mu = omega * omega / (kappa_s * kappa_s);
        let lambda = omega * omega / (kappa_p * kappa_p) - 2.0 * mu;
        Ok(Material { omega, lambda, mu, kappa_p, kappa_s })
    }

    pub fn from_lame(omega: f64, lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(lambda + mu > 0.0) || !(omega > 0.0) || !lambda.is_finite() {
            return Err(Error::domain("need ω > 0, μ > 0 and λ + μ > 0"));
        }
        Ok(Material { omega, lambda, mu, kappa_p: omega / (lambda + 2.0 * mu).sqrt(), kappa_s: omega / mu.sqrt() })
    }

    pub fn kappa(&self, family: Family) -> f64 {
        match family {
            Family::Grad => self.kappa_p,
            _ => self.kappa_s,
        }
    }
}

/// Modal coefficients of one particle, laid out as `3·linear(n,m) + family`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub order_max: usize,
    pub kind: ExpansionKind,
    data: Vec<C64>,
}

impl CoefficientVector {
    pub fn zeros(kind: ExpansionKind, order_max: usize) -> Self {
        CoefficientVector { order_max, kind, data: vec![C64::new(0.0, 0.0); Self::len_for(order_max)] }
    }

    pub fn len_for(order_max: usize) -> usize {
        3 * ModeIndex::count(order_max)
    }

    pub fn from_data(kind: ExpansionKind, order_max: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != Self::len_for(order_max) {
            return Err(Error::usage(alloc::format!(
                "coefficient data has length {}, expected {}",
                data.len(),
                Self::len_for(order_max)
            )));
        }
        if data[0] != C64::new(0.0, 0.0) || data[1] != C64::new(0.0, 0.0) {
            return Err(Error::domain("monopole shear coefficients must be zero"));
        }
        Ok(CoefficientVector { order_max, kind, data })
    }

    #[inline]
    pub fn slot(mode: ModeIndex, family: Family) -> usize {
        3 * mode.linear() + family as usize
    }

    pub fn get(&self, mode: ModeIndex, family: Family) -> C64 {
        self.data[Self::slot(mode, family)]
    }

    /// Fails for a nonzero shear value at `n = 0`.
    pub fn set(&mut self, mode: ModeIndex, family: Family, value: C64) -> Result<()> {
        if mode.n == 0 && family.is_shear() && value != C64::new(0.0, 0.0) {
            return Err(Error::domain("monopole shear coefficients must be zero"));
        }
        if mode.n > self.order_max {
            return Err(Error::usage("mode exceeds the truncation order"));
        }
        self.data[Self::slot(mode, family)] = value;
        Ok(())
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Raw access; callers keep the monopole shear slots at zero.
    pub(crate) fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CoefficientVector) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

/// A field value split into its shear and compressional parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSplit {
    pub shear: CVec3,
    pub compressional: CVec3,
}

impl FieldSplit {
    pub fn zero() -> Self {
        FieldSplit { shear: CVec3::zeros(), compressional: CVec3::zeros() }
    }

    pub fn total(&self) -> CVec3 {
        self.shear + self.compressional
    }
}

impl core::ops::Add for FieldSplit {
    type Output = FieldSplit;
    fn add(self, o: FieldSplit) -> FieldSplit {
        FieldSplit { shear: self.shear + o.shear, compressional: self.compressional + o.compressional }
    }
}

impl core::ops::AddAssign for FieldSplit {
    fn add_assign(&mut self, o: FieldSplit) {
        self.shear += o.shear;
        self.compressional += o.compressional;
    }
}

pub(crate) fn cvec(v: &Point) -> CVec3 {
    v.map(C64::from)
}

/// Local spherical frame of `d = x - center`.
struct LocalFrame {
    r: f64,
    dir: SphericalDirection,
    rhat: Point,
    that: Point,
    phat: Point,
}

impl LocalFrame {
    fn new(d: &Point) -> Self {
        let r = d.norm();
        let dir = if r > 0.0 {
            SphericalDirection::from_vector(d).unwrap_or(SphericalDirection::new(0.0, 0.0))
        } else {
            SphericalDirection::new(0.0, 0.0)
        };
        LocalFrame { r, rhat: dir.unit(), that: dir.theta_hat(), phat: dir.phi_hat(), dir }
    }

    fn to_cartesian(&self, comps: [C64; 3]) -> CVec3 {
        cvec(&self.rhat) * comps[0] + cvec(&self.that) * comps[1] + cvec(&self.phat) * comps[2]
    }
}

/// Radial factors of the three families for degree `n`, as spherical
/// components `[r, θ, φ]` multiplying `(Y, Gθ, Gφ)`.
struct RadialFactors {
    /// curl-curl: radial coefficient of `Y`, tangential coefficient of `GradY`
    cc: Vec<(C64, C64)>,
    /// curl: coefficient `z_n` (field is `z (Gφ θ̂ − Gθ φ̂)`)
    cu: Vec<C64>,
    /// grad: radial coefficient of `Y`, tangential coefficient of `GradY`
    gr: Vec<(C64, C64)>,
}

fn radial_factors(kind: ExpansionKind, order_max: usize, material: &Material, r: f64) -> Result<RadialFactors> {
    let i = C64::i();
    let (ks, kp) = (material.kappa_s, material.kappa_p);
    let mut f = RadialFactors {
        cc: Vec::with_capacity(order_max + 1),
        cu: Vec::with_capacity(order_max + 1),
        gr: Vec::with_capacity(order_max + 1),
    };
    if r == 0.0 {
        if kind == ExpansionKind::Outgoing {
            return Err(Error::Singularity);
        }
        // Only n = 1 survives at the center, as a multiple of ∇(r Y_1^m).
        for n in 0..=order_max {
            let z = C64::new(0.0, 0.0);
            if n == 1 {
                let v = C64::new(2.0 / 3.0, 0.0) / i;
                f.cc.push((v, v));
                f.gr.push((C64::from(kp / 3.0), C64::from(kp / 3.0)));
            } else {
                f.cc.push((z, z));
                f.gr.push((z, z));
            }
            f.cu.push(z);
        }
        return Ok(f);
    }
    let ts = radial_table(kind.radial(), order_max, ks * r)?;
    let tp = radial_table(kind.radial(), order_max, kp * r)?;
    let xs = ks * r;
    for n in 0..=order_max {
        let nn = (n * (n + 1)) as f64;
        let (z, zd) = (ts.values[n], ts.derivatives[n]);
        f.cc.push((z * nn / (i * xs), (z + zd * xs) / (i * xs)));
        f.cu.push(z);
        f.gr.push((tp.derivatives[n] * kp, tp.values[n] / r));
    }
    Ok(f)
}

/// Values of all basis fields up to `order_max` about the origin at `d`,
/// indexed by linear mode, as `[curl-curl, curl, grad]`.
pub(crate) fn basis_fields_at(
    kind: ExpansionKind,
    order_max: usize,
    material: &Material,
    d: &Point,
) -> Result<Vec<[CVec3; 3]>> {
    let frame = LocalFrame::new(d);
    let rf = radial_factors(kind, order_max, material, frame.r)?;
    let h = HarmonicTable::new(order_max, frame.dir.theta, frame.dir.phi);
    let zero = C64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(ModeIndex::count(order_max));
    for n in 0..=order_max {
        for m in -(n as i64)..=(n as i64) {
            let k = ModeIndex { n, m }.linear();
            let (y, gt, gp) = (h.y[k], h.grad_theta[k], h.grad_phi[k]);
            let (cr, ct) = rf.cc[n];
            let z = rf.cu[n];
            let (gr, gtt) = rf.gr[n];
            let cc = if n == 0 { CVec3::zeros() } else { frame.to_cartesian([cr * y, ct * gt, ct * gp]) };
            let cu = if n == 0 { CVec3::zeros() } else { frame.to_cartesian([zero, z * gp, -(z * gt)]) };
            out.push([cc, cu, frame.to_cartesian([gr * y, gtt * gt, gtt * gp])]);
        }
    }
    Ok(out)
}

/// Value of a single basis field.
pub fn eval_wave_field(
    family: Family,
    kind: ExpansionKind,
    mode: ModeIndex,
    material: &Material,
    center: &Point,
    x: &Point,
) -> Result<CVec3> {
    let mut c = CoefficientVector::zeros(kind, mode.n.max(1));
    if mode.n == 0 && family.is_shear() {
        return if kind == ExpansionKind::Outgoing && x == center {
            Err(Error::Singularity)
        } else {
            Ok(CVec3::zeros())
        };
    }
    c.set(mode, family, C64::new(1.0, 0.0))?;
    Ok(eval_expansion(&c, material, center, x)?.total())
}

/// Sum of an expansion about `center` at `x`, split into shear and
/// compressional parts.
pub fn eval_expansion(
    coeffs: &CoefficientVector,
    material: &Material,
    center: &Point,
    x: &Point,
) -> Result<FieldSplit> {
    let frame = LocalFrame::new(&(x - center));
    let nmax = coeffs.order_max;
    let rf = radial_factors(coeffs.kind, nmax, material, frame.r)?;
    let h = HarmonicTable::new(nmax, frame.dir.theta, frame.dir.phi);
    let zero = C64::new(0.0, 0.0);
    let mut s = [zero; 3];
    let mut p = [zero; 3];
    let data = coeffs.as_slice();
    for n in 0..=nmax {
        for m in -(n as i64)..=(n as i64) {
            let k = ModeIndex { n, m }.linear();
            let (a, b, c) = (data[3 * k], data[3 * k + 1], data[3 * k + 2]);
            let (y, gt, gp) = (h.y[k], h.grad_theta[k], h.grad_phi[k]);
            if a != zero {
                let (rr, tt) = rf.cc[n];
                s[0] += a * rr * y;
                s[1] += a * tt * gt;
                s[2] += a * tt * gp;
            }
            if b != zero {
                let z = rf.cu[n] * b;
                s[1] += z * gp;
                s[2] -= z * gt;
            }
            if c != zero {
                let (rr, tt) = rf.gr[n];
                p[0] += c * rr * y;
                p[1] += c * tt * gt;
                p[2] += c * tt * gp;
            }
        }
    }
    Ok(FieldSplit { shear: frame.to_cartesian(s), compressional: frame.to_cartesian(p) })
}

/// Incoming coefficients (about the origin) of
/// `A_p d e^{iκ_p d·x} + q e^{iκ_s d·x}` with `q ⊥ d`, accumulated into `out`
/// with the given phase factors for the two parts.
fn accumulate_plane_wave(
    out: &mut CoefficientVector,
    material: &Material,
    dir: &SphericalDirection,
    longitudinal: C64,
    transverse: &CVec3,
    phase_p: C64,
    phase_s: C64,
) {
    let nmax = out.order_max;
    let h = HarmonicTable::new(nmax, dir.theta, dir.phi);
    let (th, ph) = (dir.theta_hat(), dir.phi_hat());
    // q in the (θ̂, φ̂) frame of d; d×θ̂ = φ̂ and d×φ̂ = −θ̂.
    let qt = cvec(&th).dot(transverse);
    let qp = cvec(&ph).dot(transverse);
    let i = C64::i();
    let four_pi = 4.0 * PI;
    let data = out.as_mut_slice();
    let mut ipow = C64::new(1.0, 0.0);
    for n in 0..=nmax {
        let nn = (n * (n + 1)) as f64;
        for m in -(n as i64)..=(n as i64) {
            let k = ModeIndex { n, m }.linear();
            let kneg = ModeIndex { n, m: -m }.linear();
            if n > 0 {
                let (gt, gp) = (h.grad_theta[kneg], h.grad_phi[kneg]);
                let grad_dot_q = gt * qt + gp * qp;
                let cross_dot_q = gt * qp - gp * qt;
                data[3 * k] += ipow * (four_pi / nn) * grad_dot_q * phase_s;
                data[3 * k + 1] -= ipow * (four_pi / nn) * cross_dot_q * phase_s;
            }
            data[3 * k + 2] -= ipow * i * (four_pi / material.kappa_p) * h.y[kneg] * longitudinal * phase_p;
        }
        ipow *= i;
    }
}

/// Plane wave `A_p d e^{iκ_p d·x} + q e^{iκ_s d·x}` with `q·d = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWave {
    pub direction: SphericalDirection,
    pub longitudinal: C64,
    pub transverse: CVec3,
}

impl PlaneWave {
    pub fn new(direction: &Point, longitudinal: C64, transverse: CVec3) -> Result<Self> {
        check_unit(direction)?;
        let dir = SphericalDirection::from_vector(direction)?;
        let d = cvec(&dir.unit());
        let scale = transverse.norm().max(1e-300);
        if d.dot(&transverse).norm() > 1e-10 * scale {
            return Err(Error::domain("transverse amplitude must be orthogonal to the direction"));
        }
        Ok(PlaneWave { direction: dir, longitudinal, transverse })
    }

    /// Unit amplitude in one channel of a direction frame: 0 longitudinal,
    /// 1 along θ̂, 2 along φ̂.
    pub fn unit_channel(direction: SphericalDirection, channel: usize) -> Self {
        let zero = C64::new(0.0, 0.0);
        let (longitudinal, transverse) = match channel {
            0 => (C64::new(1.0, 0.0), CVec3::zeros()),
            1 => (zero, cvec(&direction.theta_hat())),
            _ => (zero, cvec(&direction.phi_hat())),
        };
        PlaneWave { direction, longitudinal, transverse }
    }

    pub fn field(&self, material: &Material, x: &Point) -> FieldSplit {
        let d = self.direction.unit();
        let e = |k: f64| {
            let t = k * d.dot(x);
            C64::new(t.cos(), t.sin())
        };
        FieldSplit {
            shear: self.transverse * e(material.kappa_s),
            compressional: cvec(&d) * (self.longitudinal * e(material.kappa_p)),
        }
    }

    /// Incoming coefficients of the local expansion about `center`.
    pub fn local_coeffs(&self, material: &Material, order_max: usize, center: &Point) -> CoefficientVector {
        let mut out = CoefficientVector::zeros(ExpansionKind::Incoming, order_max);
        let d = self.direction.unit();
        let ph = |k: f64| {
            let t = k * d.dot(center);
            C64::new(t.cos(), t.sin())
        };
        accumulate_plane_wave(
            &mut out,
            material,
            &self.direction,
            self.longitudinal,
            &self.transverse,
            ph(material.kappa_p),
            ph(material.kappa_s),
        );
        out
    }
}

fn check_unit(d: &Point) -> Result<()> {
    if !d.iter().all(|v| v.is_finite()) || (d.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::domain("direction must be a unit vector"));
    }
    Ok(())
}

/// Plane wave given by direction `d` and real polarization `p`, scaled as
/// `(d·p)/(λ+2μ)` for the longitudinal part and `((d×p)×d)/μ` for the
/// transverse part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveSpec {
    pub direction: Point,
    pub polarization: Point,
}

impl PlaneWaveSpec {
    pub fn to_plane_wave(&self, material: &Material) -> Result<PlaneWave> {
        check_unit(&self.direction)?;
        let d = self.direction;
        let p = self.polarization;
        let dp = d.dot(&p);
        let q = (p - d * dp) / material.mu;
        PlaneWave::new(&d, C64::from(dp / (material.lambda + 2.0 * material.mu)), cvec(&q))
    }
}

pub fn plane_wave_coeffs(spec: &PlaneWaveSpec, material: &Material, order_max: usize) -> Result<CoefficientVector> {
    Ok(spec.to_plane_wave(material)?.local_coeffs(material, order_max, &Point::zeros()))
}

/// Kernel of a Herglotz wave on a direction grid: per direction one
/// longitudinal amplitude (along α) and two transverse amplitudes (along θ̂, φ̂).
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzKernel {
    pub grid: Arc<ProductGrid>,
    /// `[f_p, f_sθ, f_sφ]` per direction
    pub values: Vec<[C64; 3]>,
}

impl HerglotzKernel {
    pub fn zeros(grid: Arc<ProductGrid>) -> Self {
        let n = grid.len();
        HerglotzKernel { grid, values: vec![[C64::new(0.0, 0.0); 3]; n] }
    }

    /// From a flat `3Q` vector in `(q, channel)` order.
    pub fn from_flat(grid: Arc<ProductGrid>, flat: &[C64]) -> Result<Self> {
        if flat.len() != 3 * grid.len() {
            return Err(Error::usage("kernel length does not match the grid"));
        }
        let values = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(HerglotzKernel { grid, values })
    }

    /// Samples `f_p(α)·α` and the tangential part of `f_s(α)` from vector
    /// valued functions of the direction.
    pub fn from_fields(
        grid: Arc<ProductGrid>,
        fp: impl Fn(&SphericalDirection) -> CVec3,
        fs: impl Fn(&SphericalDirection) -> CVec3,
    ) -> Self {
        let values = grid
            .directions
            .iter()
            .map(|d| {
                let p = fp(d);
                let s = fs(d);
                [cvec(&d.unit()).dot(&p), cvec(&d.theta_hat()).dot(&s), cvec(&d.phi_hat()).dot(&s)]
            })
            .collect();
        HerglotzKernel { grid, values }
    }

    pub fn to_flat(&self) -> Vec<C64> {
        self.values.iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn longitudinal_vector(&self, q: usize) -> CVec3 {
        cvec(&self.grid.directions[q].unit()) * self.values[q][0]
    }

    pub fn transverse_vector(&self, q: usize) -> CVec3 {
        let d = &self.grid.directions[q];
        cvec(&d.theta_hat()) * self.values[q][1] + cvec(&d.phi_hat()) * self.values[q][2]
    }

    /// Incoming coefficients about `center` by direction quadrature.
    pub fn local_coeffs(&self, material: &Material, order_max: usize, center: &Point) -> CoefficientVector {
        let mut out = CoefficientVector::zeros(ExpansionKind::Incoming, order_max);
        for (q, dir) in self.grid.directions.iter().enumerate() {
            let w = self.grid.weights[q];
            let [fp, ft, fph] = self.values[q];
            if fp == C64::new(0.0, 0.0) && ft == C64::new(0.0, 0.0) && fph == C64::new(0.0, 0.0) {
                continue;
            }
            let d = dir.unit();
            let ph = |k: f64| {
                let t = k * d.dot(center);
                C64::new(t.cos(), t.sin())
            };
            let tr = cvec(&dir.theta_hat()) * ft + cvec(&dir.phi_hat()) * fph;
            accumulate_plane_wave(
                &mut out,
                material,
                dir,
                fp * w,
                &(tr * C64::from(w)),
                ph(material.kappa_p),
                ph(material.kappa_s),
            );
        }
        out
    }
}

/// Quadrature of `∫ e^{iκ_p α·x} f_p(α) + e^{iκ_s α·x} f_s(α) ds_α`.
pub fn herglotz_eval(kernel: &HerglotzKernel, material: &Material, x: &Point) -> CVec3 {
    herglotz_eval_split(kernel, material, x).total()
}

pub fn herglotz_eval_split(kernel: &HerglotzKernel, material: &Material, x: &Point) -> FieldSplit {
    let mut out = FieldSplit::zero();
    for (q, dir) in kernel.grid.directions.iter().enumerate() {
        let w = kernel.grid.weights[q];
        let [fp, ft, fph] = kernel.values[q];
        let d = dir.unit();
        let t = d.dot(x);
        let (sp, cp) = (material.kappa_p * t).sin_cos();
        let (ss, cs) = (material.kappa_s * t).sin_cos();
        out.compressional += cvec(&d) * (fp * C64::new(cp, sp) * w);
        out.shear += (cvec(&dir.theta_hat()) * ft + cvec(&dir.phi_hat()) * fph) * (C64::new(cs, ss) * w);
    }
    out
}

/// Far-field amplitudes in one direction: longitudinal scalar along x̂ and
/// transverse components along (θ̂, φ̂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldSample {
    pub p: C64,
    pub s: [C64; 2],
}

/// Far field of a sum of outgoing expansions about `centers`.
pub fn far_field_from_outgoing(
    coeffs: &[CoefficientVector],
    centers: &[Point],
    material: &Material,
    directions: &[SphericalDirection],
) -> Result<Vec<FarFieldSample>> {
    if coeffs.len() != centers.len() {
        return Err(Error::usage("one center per coefficient vector is required"));
    }
    if coeffs.iter().any(|c| c.kind != ExpansionKind::Outgoing) {
        return Err(Error::usage("far field requires outgoing coefficients"));
    }
    let nmax = coeffs.iter().map(|c| c.order_max).max().unwrap_or(0);
    let i = C64::i();
    let mut ipow = Vec::with_capacity(nmax + 2);
    let mut t = C64::new(1.0, 0.0);
    for _ in 0..nmax + 2 {
        ipow.push(t);
        t *= -i;
    }
    let ks = material.kappa_s;
    let mut out = Vec::with_capacity(directions.len());
    for dir in directions {
        let h = HarmonicTable::new(nmax, dir.theta, dir.phi);
        let xh = dir.unit();
        let mut p = C64::new(0.0, 0.0);
        let mut st = C64::new(0.0, 0.0);
        let mut sp = C64::new(0.0, 0.0);
        for (cv, s) in coeffs.iter().zip(centers) {
            let (mut lp, mut lt, mut lph) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            let data = cv.as_slice();
            for n in 0..=cv.order_max {
                let fs = ipow[n + 1] / ks;
                for m in -(n as i64)..=(n as i64) {
                    let k = ModeIndex { n, m }.linear();
                    let (al, be, ga) = (data[3 * k], data[3 * k + 1], data[3 * k + 2]);
                    lp += ipow[n] * ga * h.y[k];
                    // α GradY + β GradY×x̂, with GradY×x̂ = (Gφ, −Gθ)
                    lt += fs * (al * h.grad_theta[k] + be * h.grad_phi[k]);
                    lph += fs * (al * h.grad_phi[k] - be * h.grad_theta[k]);
                }
            }
            let xs = xh.dot(s);
            let ep = C64::new((material.kappa_p * xs).cos(), -(material.kappa_p * xs).sin());
            let es = C64::new((ks * xs).cos(), -(ks * xs).sin());
            p += lp * ep;
            st += lt * es;
            sp += lph * es;
        }
        out.push(FarFieldSample { p, s: [st, sp] });
    }
    Ok(out)
}

/// Fundamental solution of the Navier equation.
pub fn fundamental_solution(x: &Point, y: &Point, material: &Material) -> Result<Matrix3<C64>> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    let rh = d / r;
    let w2 = material.omega * material.omega;
    let g = |k: f64| {
        let e = C64::new((k * r).cos(), (k * r).sin());
        let g0 = e / r;
        let g1 = e * C64::new(-1.0, k * r) / (r * r);
        let g2 = e * C64::new(2.0 - k * k * r * r, -2.0 * k * r) / (r * r * r);
        (g0, g1, g2)
    };
    let (gs, gs1, gs2) = g(material.kappa_s);
    let (_, gp1, gp2) = g(material.kappa_p);
    let rr = rh * rh.transpose();
    let id = Matrix3::<f64>::identity();
    let c = 1.0 / (4.0 * PI * w2);
    let mut out = Matrix3::<C64>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let hess = (gs2 - gp2) * rr[(i, j)] + (gs1 - gp1) / r * (id[(i, j)] - rr[(i, j)]);
            out[(i, j)] = (gs * (material.kappa_s * material.kappa_s) * id[(i, j)] + hess) * c;
        }
    }
    Ok(out)
}
