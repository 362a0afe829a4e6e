//! Multiple scattering between well-separated particles.
//!
//! Each particle `l` carries outgoing coefficients `x_l`. With `S` the
//! block-diagonal scattering matrices and `T` the translations of outgoing
//! fields into incoming expansions about the other particles, the solver
//! handles the preconditioned system `(I − S T) x = S a` and, for comparison,
//! the unpreconditioned form `S⁻¹ x − T x = a`.
//!
//! Translations are realized by evaluating the source expansion on a
//! quadrature grid over the target sphere and projecting onto the regular
//! basis there, cached as dense matrices per ordered particle pair.

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::gmres::{gmres, GmresOptions};
use crate::par;
use crate::quadrature::{ProductGrid, SphericalDirection};
use crate::scatmat::{sphere_scattering_blocks, ScatteringMatrixBlocks, RESONANCE_TOLERANCE};
use crate::specfun::{radial_table, HarmonicTable, ModeIndex};
use crate::wavebasis::{
    basis_fields_at, cvec, eval_expansion, CoefficientVector, ExpansionKind, Family, FieldSplit, HerglotzKernel,
    Material, PlaneWave,
};
use crate::{CVec3, Error, Point, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum Scatterer {
    /// Rigid sphere filling the enclosing sphere.
    AnalyticSphere,
    /// Externally supplied blocks (order at least the scene's).
    Blocks(Arc<ScatteringMatrixBlocks>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub center: Point,
    /// Radius of the enclosing sphere.
    pub radius: f64,
    pub scatterer: Scatterer,
}

impl Particle {
    pub fn sphere(center: Point, radius: f64) -> Self {
        Particle { center, radius, scatterer: Scatterer::AnalyticSphere }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    particles: Vec<Particle>,
    pub material: Material,
    pub order_max: usize,
}

impl Scene {
    /// Validates that enclosing spheres are pairwise disjoint and `N >= 1`.
    pub fn new(particles: Vec<Particle>, material: Material, order_max: usize) -> Result<Self> {
        if order_max < 1 {
            return Err(Error::usage("truncation order must be at least 1"));
        }
        for (l, p) in particles.iter().enumerate() {
            if !(p.radius > 0.0) || !p.radius.is_finite() || !p.center.iter().all(|v| v.is_finite()) {
                return Err(Error::geometry(format!("particle {l}: invalid center or radius")));
            }
            if let Scatterer::Blocks(b) = &p.scatterer {
                if b.order_max < order_max {
                    return Err(Error::OrderMismatch { file: b.order_max, requested: order_max });
                }
            }
            for (j, q) in particles.iter().enumerate().take(l) {
                let d = (p.center - q.center).norm();
                if d <= p.radius + q.radius {
                    return Err(Error::geometry(format!(
                        "enclosing spheres of particles {j} and {l} overlap (distance {d}, radii {} + {})",
                        q.radius, p.radius
                    )));
                }
            }
        }
        Ok(Scene { particles, material, order_max })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn centers(&self) -> Vec<Point> {
        self.particles.iter().map(|p| p.center).collect()
    }

    /// Minimal center distance, `None` for fewer than two particles.
    pub fn min_center_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (l, p) in self.particles.iter().enumerate() {
            for q in &self.particles[..l] {
                let d = (p.center - q.center).norm();
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }
}

/// Quadrature grid on a sphere, with per-node frames and harmonics.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub center: Point,
    pub radius: f64,
    pub order_max: usize,
    pub grid: ProductGrid,
    /// Global node positions.
    pub nodes: Vec<Point>,
    harmonics: Vec<HarmonicTable>,
}

impl SphereGrid {
    /// Default `(N+2) × (2N+4)` grid.
    pub fn new(center: Point, radius: f64, order_max: usize) -> Result<Self> {
        Self::with_size(center, radius, order_max, order_max + 2, 2 * order_max + 4)
    }

    pub fn with_size(center: Point, radius: f64, order_max: usize, n_theta: usize, n_phi: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::domain("sphere grid radius must be positive"));
        }
        let grid = ProductGrid::new(n_theta, n_phi)?;
        let nodes = grid.directions.iter().map(|d| center + d.unit() * radius).collect();
        let harmonics = grid.directions.iter().map(|d| HarmonicTable::new(order_max, d.theta, d.phi)).collect();
        Ok(SphereGrid { center, radius, order_max, grid, nodes, harmonics })
    }

    /// Quadrature weights for surface measure (sum to `4πR²`).
    pub fn surface_weights(&self) -> Vec<f64> {
        self.grid.weights.iter().map(|w| w * self.radius * self.radius).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Options for the projection formulas.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProjectionOptions {
    /// Near a zero of the usual denominator, recover `a` from the radial
    /// shear component and `c` from the tangential compressional component
    /// instead of failing. The `b` channel has no fallback.
    pub resonance_fallback: bool,
}

/// Per-degree projection constants and the channel used for each.
#[derive(Debug, Clone)]
struct ProjectionConstants {
    a: Vec<(C64, bool)>,
    b: Vec<C64>,
    c: Vec<(C64, bool)>,
}

fn projection_constants(
    kind: ExpansionKind,
    order_max: usize,
    radius: f64,
    material: &Material,
    opts: &ProjectionOptions,
) -> Result<ProjectionConstants> {
    let i = C64::i();
    let (ks, kp) = (material.kappa_s, material.kappa_p);
    let (xs, xp) = (ks * radius, kp * radius);
    let rk = kind.radial();
    let ts = radial_table(rk, order_max, xs)?;
    let tp = radial_table(rk, order_max + 1, xp)?;
    let tol = RESONANCE_TOLERANCE;
    let mut out = ProjectionConstants { a: vec![], b: vec![], c: vec![] };
    for n in 0..=order_max {
        let nn = (n * (n + 1)) as f64;
        // c from the radial compressional component
        let zpd = tp.derivatives[n];
        let cancel = if n == 0 {
            tp.values[0].norm() / xp
        } else {
            tp.values[n - 1].norm() + tp.values[n].norm() * (n + 1) as f64 / xp
        };
        if zpd.norm() < tol * cancel {
            if opts.resonance_fallback && n > 0 {
                out.c.push((C64::from(radius) / (tp.values[n] * nn), true));
            } else {
                return Err(Error::Resonance { n, channel: Family::Grad, magnitude: zpd.norm() / cancel });
            }
        } else {
            out.c.push((C64::new(1.0, 0.0) / (zpd * kp), false));
        }
        if n == 0 {
            out.a.push((C64::new(0.0, 0.0), false));
            out.b.push(C64::new(0.0, 0.0));
            continue;
        }
        let (z, zd) = (ts.values[n], ts.derivatives[n]);
        let t = z + zd * xs;
        let z_scale = z.norm() + (zd * xs).norm();
        if t.norm() < tol * z_scale {
            if opts.resonance_fallback && z.norm() >= tol * z_scale {
                out.a.push((i * xs / (z * nn), true));
            } else {
                return Err(Error::Resonance { n, channel: Family::CurlCurl, magnitude: t.norm() / z_scale });
            }
        } else {
            out.a.push((i * xs / (t * nn), false));
        }
        if z.norm() < tol * z_scale {
            return Err(Error::Resonance { n, channel: Family::Curl, magnitude: z.norm() / z_scale });
        }
        out.b.push(-C64::new(1.0, 0.0) / (z * nn));
    }
    Ok(out)
}

fn project(
    kind: ExpansionKind,
    grid: &SphereGrid,
    shear: &[CVec3],
    compressional: &[CVec3],
    material: &Material,
    order_max: usize,
    opts: &ProjectionOptions,
) -> Result<CoefficientVector> {
    if shear.len() != grid.len() || compressional.len() != grid.len() {
        return Err(Error::usage("sample count does not match the sphere grid"));
    }
    if order_max > grid.order_max {
        return Err(Error::usage("projection order exceeds the grid's harmonic order"));
    }
    let k = projection_constants(kind, order_max, grid.radius, material, opts)?;
    let zero = C64::new(0.0, 0.0);
    let count = ModeIndex::count(order_max);
    // Σ w (u_θ Ḡθ + u_φ Ḡφ), Σ w (u_φ Ḡθ − u_θ Ḡφ), Σ w u_r Ȳ (shear and compressional)
    let mut s_grad = vec![zero; count];
    let mut s_cross = vec![zero; count];
    let mut s_rad_s = vec![zero; count];
    let mut p_rad = vec![zero; count];
    let mut p_grad = vec![zero; count];
    for (q, dir) in grid.grid.directions.iter().enumerate() {
        let w = grid.grid.weights[q];
        let (r, t, f) = (cvec(&dir.unit()), cvec(&dir.theta_hat()), cvec(&dir.phi_hat()));
        let (ut, uf, ur) = (t.dot(&shear[q]), f.dot(&shear[q]), r.dot(&shear[q]));
        let (pr, pt, pf) = (r.dot(&compressional[q]), t.dot(&compressional[q]), f.dot(&compressional[q]));
        let h = &grid.harmonics[q];
        for idx in 0..count {
            let (y, gt, gp) = (h.y[idx].conj() * w, h.grad_theta[idx].conj() * w, h.grad_phi[idx].conj() * w);
            s_grad[idx] += ut * gt + uf * gp;
            s_cross[idx] += uf * gt - ut * gp;
            s_rad_s[idx] += ur * y;
            p_rad[idx] += pr * y;
            p_grad[idx] += pt * gt + pf * gp;
        }
    }
    let mut out = CoefficientVector::zeros(kind, order_max);
    let data = out.as_mut_slice();
    for idx in 0..count {
        let n = ModeIndex::from_linear(idx).n;
        let (cc, c_fb) = k.c[n];
        data[3 * idx + 2] = cc * if c_fb { p_grad[idx] } else { p_rad[idx] };
        if n > 0 {
            let (ca, a_fb) = k.a[n];
            data[3 * idx] = ca * if a_fb { s_rad_s[idx] } else { s_grad[idx] };
            data[3 * idx + 1] = k.b[n] * s_cross[idx];
        }
    }
    Ok(out)
}

/// Incoming coefficients of a field sampled on a sphere grid.
pub fn project_incoming(
    grid: &SphereGrid,
    shear: &[CVec3],
    compressional: &[CVec3],
    material: &Material,
    order_max: usize,
    opts: &ProjectionOptions,
) -> Result<CoefficientVector> {
    project(ExpansionKind::Incoming, grid, shear, compressional, material, order_max, opts)
}

/// Outgoing coefficients of a radiating field sampled on a sphere grid.
pub fn project_outgoing(
    grid: &SphereGrid,
    shear: &[CVec3],
    compressional: &[CVec3],
    material: &Material,
    order_max: usize,
) -> Result<CoefficientVector> {
    project(ExpansionKind::Outgoing, grid, shear, compressional, material, order_max, &ProjectionOptions::default())
}

/// Dense translation of one particle's outgoing coefficients into incoming
/// coefficients about another. Shear channels map to shear channels only and
/// the compressional channel to itself.
#[derive(Debug, Clone)]
pub struct PairTranslation {
    /// `(a, b)` rows from `(α, β)` columns, both ordered `[all a | all b]`
    /// over modes.
    shear: DMatrix<C64>,
    compressional: DMatrix<C64>,
}

impl PairTranslation {
    pub fn build(
        source: &Point,
        target: &SphereGrid,
        material: &Material,
        order_max: usize,
        opts: &ProjectionOptions,
    ) -> Result<Self> {
        let count = ModeIndex::count(order_max);
        let nodes = target.len();
        let zero = C64::new(0.0, 0.0);
        // Projection rows (weights and conjugated harmonics) and source fields.
        let mut pt = DMatrix::from_element(count, nodes, zero);
        let mut pp = DMatrix::from_element(count, nodes, zero);
        let mut py = DMatrix::from_element(count, nodes, zero);
        let mut e_t = DMatrix::from_element(nodes, 2 * count, zero);
        let mut e_p = DMatrix::from_element(nodes, 2 * count, zero);
        let mut e_r = DMatrix::from_element(nodes, count, zero);
        for (q, dir) in target.grid.directions.iter().enumerate() {
            let w = target.grid.weights[q];
            let h = &target.harmonics[q];
            for idx in 0..count {
                pt[(idx, q)] = h.grad_theta[idx].conj() * w;
                pp[(idx, q)] = h.grad_phi[idx].conj() * w;
                py[(idx, q)] = h.y[idx].conj() * w;
            }
            let fields = basis_fields_at(ExpansionKind::Outgoing, order_max, material, &(target.nodes[q] - source))?;
            let (r, t, f) = (cvec(&dir.unit()), cvec(&dir.theta_hat()), cvec(&dir.phi_hat()));
            for (idx, fl) in fields.iter().enumerate() {
                e_t[(q, idx)] = t.dot(&fl[0]);
                e_p[(q, idx)] = f.dot(&fl[0]);
                e_t[(q, count + idx)] = t.dot(&fl[1]);
                e_p[(q, count + idx)] = f.dot(&fl[1]);
                e_r[(q, idx)] = r.dot(&fl[2]);
            }
        }
        let k = projection_constants(ExpansionKind::Incoming, order_max, target.radius, material, opts)?;
        if k.a.iter().any(|v| v.1) || k.c.iter().any(|v| v.1) {
            return Err(Error::usage("resonance fallback is not available for cached translations"));
        }
        let s_grad = &pt * &e_t + &pp * &e_p;
        let s_cross = &pt * &e_p - &pp * &e_t;
        let mut shear = DMatrix::from_element(2 * count, 2 * count, zero);
        let mut compressional = &py * &e_r;
        for idx in 0..count {
            let n = ModeIndex::from_linear(idx).n;
            for col in 0..2 * count {
                if n > 0 {
                    shear[(idx, col)] = k.a[n].0 * s_grad[(idx, col)];
                    shear[(count + idx, col)] = k.b[n] * s_cross[(idx, col)];
                }
            }
            for col in 0..count {
                compressional[(idx, col)] *= k.c[n].0;
            }
        }
        Ok(PairTranslation { shear, compressional })
    }

    /// Adds the translated coefficients of `src` (outgoing layout) into `dst`
    /// (incoming layout).
    pub fn apply_add(&self, src: &[C64], dst: &mut [C64]) {
        let count = src.len() / 3;
        for r in 0..2 * count {
            let row = self.shear.row(r);
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..count {
                acc += row[c] * src[3 * c] + row[count + c] * src[3 * c + 1];
            }
            let (idx, fam) = if r < count { (r, 0) } else { (r - count, 1) };
            dst[3 * idx + fam] += acc;
        }
        for r in 0..count {
            let row = self.compressional.row(r);
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..count {
                acc += row[c] * src[3 * c + 2];
            }
            dst[3 * r + 2] += acc;
        }
    }
}

/// Maps stacked outgoing coefficients of all particles to the incoming
/// coefficients each particle receives from all others. A fast-multipole
/// backend would implement this trait.
pub trait InteractionOperator: Send + Sync {
    /// `outgoing` and `incoming` hold `M` consecutive blocks of
    /// `3 (N+1)²` entries.
    fn apply(&self, outgoing: &[C64], incoming: &mut [C64]);
}

/// All-pairs translations with cached dense matrices.
#[derive(Debug, Clone)]
pub struct DenseTranslations {
    particles: usize,
    block: usize,
    pairs: Vec<Option<PairTranslation>>,
}

impl DenseTranslations {
    pub fn new(scene: &Scene, opts: &ProjectionOptions) -> Result<Self> {
        let m = scene.len();
        let n = scene.order_max;
        let grids: Vec<SphereGrid> =
            scene.particles().iter().map(|p| SphereGrid::new(p.center, p.radius, n)).collect::<Result<_>>()?;
        let pairs = par::map_range(m * m, |k| {
            let (l, j) = (k / m, k % m);
            if l == j {
                return Ok(None);
            }
            PairTranslation::build(&scene.particles()[j].center, &grids[l], &scene.material, n, opts).map(Some)
        });
        let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(DenseTranslations { particles: m, block: CoefficientVector::len_for(n), pairs })
    }
}

impl InteractionOperator for DenseTranslations {
    fn apply(&self, outgoing: &[C64], incoming: &mut [C64]) {
        let (m, b) = (self.particles, self.block);
        let parts = par::map_range(m, |l| {
            let mut acc = vec![C64::new(0.0, 0.0); b];
            for j in 0..m {
                if let Some(p) = &self.pairs[l * m + j] {
                    p.apply_add(&outgoing[j * b..(j + 1) * b], &mut acc);
                }
            }
            acc
        });
        for (l, acc) in parts.into_iter().enumerate() {
            incoming[l * b..(l + 1) * b].copy_from_slice(&acc);
        }
    }
}

/// Re-expands particle `source`'s outgoing field about particle `target`.
pub fn translate_outgoing_to_incoming(
    scene: &Scene,
    source: usize,
    coeffs: &CoefficientVector,
    target: usize,
) -> Result<CoefficientVector> {
    if source == target {
        return Err(Error::usage("translation needs two distinct particles"));
    }
    let ps = scene.particles();
    let (s, t) = (
        ps.get(source).ok_or_else(|| Error::usage("source index out of range"))?,
        ps.get(target).ok_or_else(|| Error::usage("target index out of range"))?,
    );
    if (s.center - t.center).norm() <= s.radius + t.radius {
        return Err(Error::geometry("source and target enclosing spheres overlap"));
    }
    if coeffs.kind != ExpansionKind::Outgoing {
        return Err(Error::usage("translation expects outgoing coefficients"));
    }
    let n = coeffs.order_max;
    let grid = SphereGrid::new(t.center, t.radius, n)?;
    let mut shear = Vec::with_capacity(grid.len());
    let mut comp = Vec::with_capacity(grid.len());
    for x in &grid.nodes {
        let f = eval_expansion(coeffs, &scene.material, &s.center, x)?;
        shear.push(f.shear);
        comp.push(f.compressional);
    }
    project_incoming(&grid, &shear, &comp, &scene.material, n, &ProjectionOptions::default())
}

/// Incident field of a forward problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Incident {
    PlaneWave(PlaneWave),
    Herglotz(HerglotzKernel),
}

impl Incident {
    pub fn field(&self, material: &Material, x: &Point) -> FieldSplit {
        match self {
            Incident::PlaneWave(p) => p.field(material, x),
            Incident::Herglotz(k) => crate::wavebasis::herglotz_eval_split(k, material, x),
        }
    }

    pub fn local_coeffs(&self, material: &Material, order_max: usize, center: &Point) -> CoefficientVector {
        match self {
            Incident::PlaneWave(p) => p.local_coeffs(material, order_max, center),
            Incident::Herglotz(k) => k.local_coeffs(material, order_max, center),
        }
    }
}

/// Which of the two equivalent linear systems GMRES works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SystemForm {
    /// `(I − S T) x = S a`
    #[default]
    Preconditioned,
    /// `S⁻¹ x − T x = a`
    Unpreconditioned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub gmres: GmresOptions,
    pub form: SystemForm,
    /// Random surface points per particle for the boundary residual; 0 skips it.
    pub boundary_samples: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gmres: GmresOptions::default(),
            form: SystemForm::Preconditioned,
            boundary_samples: 200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub outgoing: Vec<CoefficientVector>,
    pub iterations: usize,
    /// Final residual relative to the right-hand side.
    pub residual: f64,
    pub history: Vec<f64>,
    /// `max |u|` over sampled surface points divided by `max |u^i|` there.
    pub boundary_residual: Option<f64>,
}

/// Scattering blocks and translations for a fixed scene, reusable across
/// right-hand sides.
pub struct ForwardSolver {
    scene: Scene,
    blocks: Vec<Arc<ScatteringMatrixBlocks>>,
    translations: Box<dyn InteractionOperator>,
}

impl core::fmt::Debug for ForwardSolver {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ForwardSolver").field("scene", &self.scene).finish_non_exhaustive()
    }
}

impl ForwardSolver {
    pub fn new(scene: Scene) -> Result<Self> {
        let translations = DenseTranslations::new(&scene, &ProjectionOptions::default())?;
        Self::with_operator(scene, Box::new(translations))
    }

    pub fn with_operator(scene: Scene, translations: Box<dyn InteractionOperator>) -> Result<Self> {
        let n = scene.order_max;
        let blocks = scene
            .particles()
            .iter()
            .map(|p| match &p.scatterer {
                Scatterer::AnalyticSphere => sphere_scattering_blocks(p.radius, &scene.material, n).map(Arc::new),
                Scatterer::Blocks(b) if b.order_max == n => Ok(b.clone()),
                Scatterer::Blocks(b) => b.truncated(n).map(Arc::new),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForwardSolver { scene, blocks, translations })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn blocks(&self) -> &[Arc<ScatteringMatrixBlocks>] {
        &self.blocks
    }

    fn block_len(&self) -> usize {
        CoefficientVector::len_for(self.scene.order_max)
    }

    fn apply_s(&self, src: &[C64], dst: &mut [C64], inverse: bool) -> Result<()> {
        let (b, n) = (self.block_len(), self.scene.order_max);
        for (l, blocks) in self.blocks.iter().enumerate() {
            let mut v = src[l * b..(l + 1) * b].to_vec();
            v[0] = C64::new(0.0, 0.0);
            v[1] = C64::new(0.0, 0.0);
            let out = if inverse {
                blocks.inverse_apply(&CoefficientVector::from_data(ExpansionKind::Outgoing, n, v)?)?
            } else {
                blocks.apply(&CoefficientVector::from_data(ExpansionKind::Incoming, n, v)?)?
            };
            dst[l * b..(l + 1) * b].copy_from_slice(out.as_slice());
        }
        Ok(())
    }

    pub fn solve(&self, incident: &Incident, opts: &SolveOptions) -> Result<SolveReport> {
        let m = self.scene.len();
        let b = self.block_len();
        let n = self.scene.order_max;
        let mat = &self.scene.material;
        let mut rhs = vec![C64::new(0.0, 0.0); m * b];
        for (l, p) in self.scene.particles().iter().enumerate() {
            rhs[l * b..(l + 1) * b].copy_from_slice(incident.local_coeffs(mat, n, &p.center).as_slice());
        }
        let zero = C64::new(0.0, 0.0);
        let mut tmp = vec![zero; m * b];
        let mut failure: Option<Error> = None;
        let outcome = match opts.form {
            SystemForm::Preconditioned => {
                let mut srhs = vec![zero; m * b];
                self.apply_s(&rhs, &mut srhs, false)?;
                gmres(
                    |v, out| {
                        self.translations.apply(v, &mut tmp);
                        if let Err(e) = self.apply_s(&tmp, out, false) {
                            failure.get_or_insert(e);
                        }
                        for (o, vi) in out.iter_mut().zip(v) {
                            *o = vi - *o;
                        }
                    },
                    &srhs,
                    &opts.gmres,
                )
            }
            SystemForm::Unpreconditioned => gmres(
                |v, out| {
                    if let Err(e) = self.apply_s(v, out, true) {
                        failure.get_or_insert(e);
                    }
                    self.translations.apply(v, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o -= t;
                    }
                },
                &rhs,
                &opts.gmres,
            ),
        };
        if let Some(e) = failure {
            return Err(e);
        }
        let outcome = outcome?;
        let outgoing = (0..m)
            .map(|l| {
                let mut v = outcome.x[l * b..(l + 1) * b].to_vec();
                v[0] = zero;
                v[1] = zero;
                CoefficientVector::from_data(ExpansionKind::Outgoing, n, v)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut report = SolveReport {
            outgoing,
            iterations: outcome.iterations,
            residual: outcome.residual,
            history: outcome.history,
            boundary_residual: None,
        };
        if opts.boundary_samples > 0 && m > 0 {
            report.boundary_residual =
                Some(self.boundary_residual(&report, incident, opts.boundary_samples, opts.seed)?);
        }
        Ok(report)
    }

    /// `max |u| / max |u^i|` over random points on every particle surface.
    pub fn boundary_residual(
        &self,
        report: &SolveReport,
        incident: &Incident,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        let points = surface_samples(&self.scene, samples, seed);
        let (mut top, mut inc) = (0.0f64, 0.0f64);
        for x in &points {
            let ui = incident.field(&self.scene.material, x).total();
            let u = ui + scattered_field(&self.scene, report, x)?;
            top = top.max(u.norm());
            inc = inc.max(ui.norm());
        }
        Ok(if inc > 0.0 { top / inc } else { top })
    }
}

/// Uniform random points on every particle's surface.
pub fn surface_samples(scene: &Scene, per_particle: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_particle * scene.len());
    for p in scene.particles() {
        for _ in 0..per_particle {
            let v = loop {
                let v = Point::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                );
                if v.norm() > 1e-8 {
                    break v;
                }
            };
            out.push(p.center + v.normalize() * p.radius);
        }
    }
    out
}

pub fn solve_forward(scene: &Scene, incident: &Incident, opts: &SolveOptions) -> Result<SolveReport> {
    ForwardSolver::new(scene.clone())?.solve(incident, opts)
}

fn scattered_field(scene: &Scene, report: &SolveReport, x: &Point) -> Result<CVec3> {
    let mut v = CVec3::zeros();
    for (p, c) in scene.particles().iter().zip(&report.outgoing) {
        v += eval_expansion(c, &scene.material, &p.center, x)?.total();
    }
    Ok(v)
}

/// `u^i + Σ_l v_l` at a point outside (or on) every enclosing sphere.
pub fn eval_total_field(scene: &Scene, report: &SolveReport, incident: &Incident, x: &Point) -> Result<CVec3> {
    for (l, p) in scene.particles().iter().enumerate() {
        if (x - p.center).norm() < p.radius * (1.0 - 1e-12) {
            return Err(Error::domain(format!("point lies inside the enclosing sphere of particle {l}")));
        }
    }
    Ok(incident.field(&scene.material, x).total() + scattered_field(scene, report, x)?)
}

/// Scattered-field direction sampling helper for far-field assembly.
pub fn far_field_of_report(
    scene: &Scene,
    report: &SolveReport,
    directions: &[SphericalDirection],
) -> Result<Vec<crate::wavebasis::FarFieldSample>> {
    crate::wavebasis::far_field_from_outgoing(&report.outgoing, &scene.centers(), &scene.material, directions)
}
