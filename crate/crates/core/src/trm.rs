//! Far-field operator, time-reversal spectrum and Herglotz imaging.
//!
//! Kernels and far fields on a direction grid are flat vectors of length
//! `3Q` ordered `(q, channel)` with channel 0 the longitudinal amplitude and
//! channels 1, 2 the transverse (θ̂, φ̂) amplitudes. The inner product weights
//! entry `(q, c)` by `w_q · ω/κ_c` (κ_p for channel 0, κ_s otherwise).

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3};
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{eigenvalues, fit_circle_through_origin, hermitian_eigen, CircleFit};
use crate::multiscat::{ForwardSolver, Incident, Scene, SolveOptions};
pub use crate::quadrature::ProductGrid as DirectionGrid;
use crate::quadrature::SphericalDirection;
use crate::specfun::{HarmonicTable, ModeIndex};
use crate::wavebasis::{cvec, herglotz_eval, HerglotzKernel, Material, PlaneWave};
use crate::{CVec3, Error, Point, Result, C64};

/// The 11 × 21 grid of the reference experiments.
pub fn default_direction_grid() -> DirectionGrid {
    DirectionGrid::new(11, 21).expect("fixed sizes are valid")
}

/// Per-entry inner-product weights `w_q ω/κ_c`.
pub fn channel_weights(grid: &DirectionGrid, material: &Material) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * grid.len());
    for w in &grid.weights {
        out.push(w * material.omega / material.kappa_p);
        out.push(w * material.omega / material.kappa_s);
        out.push(w * material.omega / material.kappa_s);
    }
    out
}

/// Discrete far-field operator acting on flat kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldOperator {
    pub grid: Arc<DirectionGrid>,
    pub material: Material,
    pub matrix: DMatrix<C64>,
    /// Relative noise level applied (0 for clean data).
    pub noise_level: f64,
}

impl FarFieldOperator {
    pub fn zeros(grid: Arc<DirectionGrid>, material: Material) -> Self {
        let n = 3 * grid.len();
        FarFieldOperator { grid, material, matrix: DMatrix::zeros(n, n), noise_level: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn weights(&self) -> Vec<f64> {
        channel_weights(&self.grid, &self.material)
    }

    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        self.weights().iter().zip(f.iter().zip(g)).map(|(w, (a, b))| a * b.conj() * *w).sum()
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        self.inner(f, f).re.max(0.0).sqrt()
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        (&self.matrix * DVector::from_column_slice(f)).iter().copied().collect()
    }

    pub fn apply_kernel(&self, f: &HerglotzKernel) -> HerglotzKernel {
        HerglotzKernel::from_flat(self.grid.clone(), &self.apply(&f.to_flat())).expect("matching sizes")
    }

    /// Adjoint in the weighted inner product, `W⁻¹ Fᴴ W`.
    pub fn adjoint(&self) -> DMatrix<C64> {
        let w = self.weights();
        let mut a = self.matrix.adjoint();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                a[(i, j)] *= w[j] / w[i];
            }
        }
        a
    }

    /// `W^{1/2} F W^{-1/2}`: same spectrum, and weighted adjoints become
    /// plain conjugate transposes.
    pub fn symmetrized(&self) -> DMatrix<C64> {
        let w: Vec<f64> = self.weights().iter().map(|v| v.sqrt()).collect();
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(i, j)] * (w[i] / w[j]))
    }

    /// `‖FF* − F*F‖ / ‖F‖²` with Frobenius norms in the weighted space.
    pub fn normality_defect(&self) -> f64 {
        let g = self.symmetrized();
        let gh = g.adjoint();
        let d = &g * &gh - &gh * &g;
        let n2 = g.norm_squared();
        if n2 == 0.0 {
            0.0
        } else {
            d.norm() / n2
        }
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        eigenvalues(&self.symmetrized())
    }

    /// The operator with each input channel scaled by its wavenumber
    /// (`F K`, `K = diag(κ_c)`), whose eigenvalues lie on a circle through
    /// the origin for rigid scatterers.
    pub fn flux_normalized(&self) -> FarFieldOperator {
        let mut out = self.clone();
        for j in 0..self.dim() {
            let k = if j % 3 == 0 { self.material.kappa_p } else { self.material.kappa_s };
            for i in 0..self.dim() {
                out.matrix[(i, j)] *= k;
            }
        }
        out
    }

    /// `‖F* − conj(R F R conj(·))‖ / ‖F‖` on a grid closed under α ↦ −α.
    pub fn symmetry_defect(&self) -> Option<f64> {
        let n = self.dim();
        let q = self.grid.len();
        let mut perm = vec![(0usize, 0.0f64); n];
        for i in 0..q {
            let a = self.grid.antipode(i)?;
            // (R f)(α) = f(−α): θ̂(−α) = θ̂(α), φ̂(−α) = −φ̂(α), −α along α flips the sign
            perm[3 * i] = (3 * a, -1.0);
            perm[3 * i + 1] = (3 * a + 1, 1.0);
            perm[3 * i + 2] = (3 * a + 2, -1.0);
        }
        // conj(R F R conj f) has matrix entries conj(s_i s_j F[p(i), p(j)])
        let rfr = DMatrix::from_fn(n, n, |i, j| {
            let (pi, si) = perm[i];
            let (pj, sj) = perm[j];
            (self.matrix[(pi, pj)] * (si * sj)).conj()
        });
        let d = (self.adjoint() - rfr).norm();
        let s = self.matrix.norm();
        Some(if s == 0.0 { d } else { d / s })
    }

    /// Circle through the origin fitted to eigenvalues with modulus above
    /// `rel_floor` times the largest.
    pub fn eigenvalue_circle(&self, rel_floor: f64) -> Option<CircleFit> {
        let ev = self.eigenvalues();
        let top = ev.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let pts: Vec<C64> = ev.into_iter().filter(|z| z.norm() > rel_floor * top).collect();
        fit_circle_through_origin(&pts)
    }
}

/// Assembles `F` from forward solves with unit plane waves, column
/// `3q + c` scaled by `w_q / ω`.
pub fn assemble_far_field_operator(
    scene: &Scene,
    grid: Arc<DirectionGrid>,
    opts: &SolveOptions,
) -> Result<FarFieldOperator> {
    let material = scene.material;
    if scene.is_empty() {
        return Ok(FarFieldOperator::zeros(grid, material));
    }
    let solver = ForwardSolver::new(scene.clone())?;
    let obs = observation_matrix(scene, &grid);
    let q = grid.len();
    let mut column_opts = *opts;
    column_opts.boundary_samples = 0;
    let columns = crate::par::map_range(3 * q, |col| {
        let (qi, ch) = (col / 3, col % 3);
        let inc = Incident::PlaneWave(PlaneWave::unit_channel(grid.directions[qi], ch));
        let rep = solver
            .solve(&inc, &column_opts)
            .map_err(|e| Error::Column { column: col, source: alloc::boxed::Box::new(e) })?;
        let x: Vec<C64> = rep.outgoing.iter().flat_map(|c| c.as_slice().iter().copied()).collect();
        let scale = grid.weights[qi] / material.omega;
        Ok((&obs * DVector::from_vec(x)) * C64::from(scale))
    });
    let mut matrix = DMatrix::zeros(3 * q, 3 * q);
    for (j, c) in columns.into_iter().enumerate() {
        matrix.set_column(j, &c?);
    }
    Ok(FarFieldOperator { grid, material, matrix, noise_level: 0.0 })
}

/// Linear map from stacked outgoing coefficients to far-field samples on the
/// grid (same layout as kernels).
pub fn observation_matrix(scene: &Scene, grid: &DirectionGrid) -> DMatrix<C64> {
    let n = scene.order_max;
    let count = ModeIndex::count(n);
    let b = 3 * count;
    let m = scene.len();
    let i = C64::i();
    let ks = scene.material.kappa_s;
    let kp = scene.material.kappa_p;
    let mut obs = DMatrix::zeros(3 * grid.len(), m * b);
    let mipow: Vec<C64> = (0..n + 2).map(|k| (-i).powu(k as u32)).collect();
    for (q, dir) in grid.directions.iter().enumerate() {
        let h = HarmonicTable::new(n, dir.theta, dir.phi);
        let xh = dir.unit();
        for (l, p) in scene.particles().iter().enumerate() {
            let t = xh.dot(&p.center);
            let ep = C64::new((kp * t).cos(), -(kp * t).sin());
            let es = C64::new((ks * t).cos(), -(ks * t).sin());
            for idx in 0..count {
                let nn = ModeIndex::from_linear(idx).n;
                let fs = mipow[nn + 1] / ks * es;
                let col = l * b + 3 * idx;
                obs[(3 * q, col + 2)] = mipow[nn] * h.y[idx] * ep;
                obs[(3 * q + 1, col)] = fs * h.grad_theta[idx];
                obs[(3 * q + 1, col + 1)] = fs * h.grad_phi[idx];
                obs[(3 * q + 2, col)] = fs * h.grad_phi[idx];
                obs[(3 * q + 2, col + 1)] = -fs * h.grad_theta[idx];
            }
        }
    }
    obs
}

/// Adds independent complex Gaussian noise with standard deviation
/// `level · RMS(entries)` to every entry.
pub fn add_noise(op: &FarFieldOperator, level: f64, seed: u64) -> Result<FarFieldOperator> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::usage("noise level must be a nonnegative number"));
    }
    let mut out = op.clone();
    if level == 0.0 {
        return Ok(out);
    }
    let count = (op.matrix.nrows() * op.matrix.ncols()).max(1) as f64;
    let rms = (op.matrix.norm_squared() / count).sqrt();
    let sigma = level * rms / 2f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // column-major traversal keeps the draw order fixed
    for v in out.matrix.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += C64::new(re, im) * sigma;
    }
    out.noise_level = level;
    Ok(out)
}

/// Eigenvalue of `T = F F*` with its eigenvector as a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub value: f64,
    /// Normalized to unit Euclidean norm of the flat kernel vector.
    pub kernel: HerglotzKernel,
}

/// Eigen-decomposition of `T = F F*`, eigenvalues descending.
pub fn time_reversal_spectrum(op: &FarFieldOperator) -> Vec<SpectralPair> {
    let g = op.symmetrized();
    let t = &g * g.adjoint();
    // enforce exact Hermitian symmetry before the solve
    let t = (&t + t.adjoint()) * C64::from(0.5);
    let (values, vecs) = hermitian_eigen(&t);
    let w: Vec<f64> = op.weights().iter().map(|v| v.sqrt()).collect();
    values
        .into_iter()
        .enumerate()
        .map(|(j, value)| {
            let mut f: Vec<C64> = vecs.column(j).iter().zip(&w).map(|(v, s)| v / *s).collect();
            let nrm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.0 {
                f.iter_mut().for_each(|z| *z /= nrm);
            }
            SpectralPair { value, kernel: HerglotzKernel::from_flat(op.grid.clone(), &f).expect("sizes match") }
        })
        .collect()
}

/// Axis-aligned voxel grid; values are stored with x fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGridSpec {
    pub origin: Point,
    pub spacing: Point,
    pub counts: [usize; 3],
}

impl VoxelGridSpec {
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Point {
        let [nx, ny, _] = self.counts;
        let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
        self.origin + Point::new(i as f64 * self.spacing.x, j as f64 * self.spacing.y, k as f64 * self.spacing.z)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts[0] * (j + self.counts[1] * k)
    }

    /// Grid covering a box with the given spacing on every axis.
    pub fn covering(lo: Point, hi: Point, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::usage("voxel spacing must be positive"));
        }
        let mut counts = [0usize; 3];
        for a in 0..3 {
            if !(hi[a] >= lo[a]) {
                return Err(Error::usage("voxel box bounds are inverted"));
            }
            counts[a] = ((hi[a] - lo[a]) / spacing).round() as usize + 1;
        }
        Ok(VoxelGridSpec { origin: lo, spacing: Point::new(spacing, spacing, spacing), counts })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagingGrid {
    pub spec: VoxelGridSpec,
    pub values: Vec<f64>,
    pub cutoff: f64,
}

/// A voxel that is at least as large as all 26 neighbors present in the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMaximum {
    pub index: usize,
    pub position: Point,
    pub value: f64,
}

impl ImagingGrid {
    pub fn argmax(&self) -> Option<(usize, Point, f64)> {
        let (i, v) = self.values.iter().enumerate().fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })?;
        Some((i, self.spec.point(i), v))
    }

    /// Interior local maxima (boundary voxels excluded), strongest first.
    pub fn local_maxima(&self) -> Vec<LocalMaximum> {
        let [nx, ny, nz] = self.spec.counts;
        let mut out = Vec::new();
        if nx < 3 || ny < 3 || nz < 3 {
            return out;
        }
        for k in 1..nz - 1 {
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let idx = self.spec.index(i, j, k);
                    let v = self.values[idx];
                    let mut is_max = true;
                    'n: for dk in 0..3 {
                        for dj in 0..3 {
                            for di in 0..3 {
                                let o = self.spec.index(i + di - 1, j + dj - 1, k + dk - 1);
                                // ties resolved towards the lower index
                                if o != idx && (self.values[o] > v || (self.values[o] == v && o < idx)) {
                                    is_max = false;
                                    break 'n;
                                }
                            }
                        }
                    }
                    if is_max {
                        out.push(LocalMaximum { index: idx, position: self.spec.point(idx), value: v });
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            b.value.partial_cmp(&a.value).unwrap_or(core::cmp::Ordering::Equal).then(a.index.cmp(&b.index))
        });
        out
    }

    /// Voxels at or above the cut-off.
    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(|v| *v >= self.cutoff).collect()
    }
}

/// `|u_f|` on every voxel.
pub fn imaging_function(
    kernel: &HerglotzKernel,
    material: &Material,
    spec: &VoxelGridSpec,
    cutoff: f64,
) -> ImagingGrid {
    let values = crate::par::map_range(spec.len(), |i| herglotz_eval(kernel, material, &spec.point(i)).norm());
    ImagingGrid { spec: *spec, values, cutoff }
}

/// Kernels `f_p = κ_p²(e·α)α e^{−iκ_p α·s}`, `f_s = κ_s² α×(e×α) e^{−iκ_s α·s}`
/// for every center and frame vector, ordered `(l, i)`.
pub fn selective_focusing_kernels(
    centers: &[Point],
    frames: &[[Point; 3]],
    material: &Material,
    grid: Arc<DirectionGrid>,
) -> Result<Vec<HerglotzKernel>> {
    if centers.len() != frames.len() {
        return Err(Error::usage("one frame per center is required"));
    }
    let mut out = Vec::with_capacity(3 * centers.len());
    for (s, frame) in centers.iter().zip(frames) {
        for e in frame {
            if (e.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::domain("frame vectors must be unit vectors"));
            }
            out.push(focusing_kernel(s, e, material, grid.clone()));
        }
    }
    Ok(out)
}

fn focusing_kernel(s: &Point, e: &Point, material: &Material, grid: Arc<DirectionGrid>) -> HerglotzKernel {
    let (kp, ks) = (material.kappa_p, material.kappa_s);
    let values = grid
        .directions
        .iter()
        .map(|d| {
            let a = d.unit();
            let t = a.dot(s);
            let ep = C64::new((kp * t).cos(), -(kp * t).sin());
            let es = C64::new((ks * t).cos(), -(ks * t).sin());
            [ep * (kp * kp * e.dot(&a)), es * (ks * ks * e.dot(&d.theta_hat())), es * (ks * ks * e.dot(&d.phi_hat()))]
        })
        .collect();
    HerglotzKernel { grid, values }
}

/// Small-particle limit far-field operator for point scatterers with
/// polarizability tensors `P_l`, applied without forming the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitOperator {
    pub grid: Arc<DirectionGrid>,
    pub material: Material,
    pub centers: Vec<Point>,
    pub polarizabilities: Vec<Matrix3<C64>>,
}

impl LimitOperator {
    pub fn new(
        centers: Vec<Point>,
        polarizabilities: Vec<Matrix3<C64>>,
        material: Material,
        grid: Arc<DirectionGrid>,
    ) -> Result<Self> {
        if centers.len() != polarizabilities.len() {
            return Err(Error::usage("one polarizability tensor per center is required"));
        }
        for (l, a) in centers.iter().enumerate() {
            for (j, b) in centers.iter().enumerate().take(l) {
                if (a - b).norm() == 0.0 {
                    return Err(Error::geometry(format!("centers {j} and {l} coincide")));
                }
            }
        }
        Ok(LimitOperator { grid, material, centers, polarizabilities })
    }

    fn gather(&self, f: &HerglotzKernel, s: &Point) -> CVec3 {
        herglotz_eval(f, &self.material, s)
    }

    pub fn apply(&self, f: &HerglotzKernel) -> HerglotzKernel {
        let m = &self.material;
        let w3 = m.omega * m.omega * m.omega;
        let cp = -m.kappa_p * m.kappa_p / (4.0 * PI * w3);
        let cs = -m.kappa_s * m.kappa_s / (4.0 * PI * w3);
        let sources: Vec<CVec3> =
            self.centers.iter().zip(&self.polarizabilities).map(|(s, p)| p * self.gather(f, s)).collect();
        let values = self
            .grid
            .directions
            .iter()
            .map(|d| {
                let x = d.unit();
                let (t, ph) = (cvec(&d.theta_hat()), cvec(&d.phi_hat()));
                let mut v = [C64::new(0.0, 0.0); 3];
                for (s, src) in self.centers.iter().zip(&sources) {
                    let a = x.dot(s);
                    let ep = C64::new((m.kappa_p * a).cos(), -(m.kappa_p * a).sin());
                    let es = C64::new((m.kappa_s * a).cos(), -(m.kappa_s * a).sin());
                    v[0] += cvec(&x).dot(src) * ep * cp;
                    v[1] += t.dot(src) * es * cs;
                    v[2] += ph.dot(src) * es * cs;
                }
                v
            })
            .collect();
        HerglotzKernel { grid: self.grid.clone(), values }
    }

    /// Dense matrix on the grid (columns are images of unit kernels).
    pub fn to_operator(&self) -> FarFieldOperator {
        let n = 3 * self.grid.len();
        let cols = crate::par::map_range(n, |j| {
            let mut flat = vec![C64::new(0.0, 0.0); n];
            flat[j] = C64::new(1.0, 0.0);
            let k = HerglotzKernel::from_flat(self.grid.clone(), &flat).expect("sizes match");
            self.apply(&k).to_flat()
        });
        let mut matrix = DMatrix::zeros(n, n);
        for (j, c) in cols.into_iter().enumerate() {
            matrix.set_column(j, &DVector::from_vec(c));
        }
        FarFieldOperator { grid: self.grid.clone(), material: self.material, matrix, noise_level: 0.0 }
    }

    /// `‖F⁰f + c λ f‖ / ‖c λ f‖` with `c = (κ_p² + 2κ_s²)/(3ω³)`, in the
    /// weighted norm.
    pub fn eigen_relation_residual(&self, f: &HerglotzKernel, lambda: C64) -> f64 {
        let m = &self.material;
        let c = (m.kappa_p * m.kappa_p + 2.0 * m.kappa_s * m.kappa_s) / (3.0 * m.omega.powi(3));
        let g = self.apply(f);
        let w = channel_weights(&self.grid, m);
        let (mut num, mut den) = (0.0, 0.0);
        for (q, (gv, fv)) in g.values.iter().zip(&f.values).enumerate() {
            for ch in 0..3 {
                let target = fv[ch] * lambda * c;
                num += w[3 * q + ch] * (gv[ch] + target).norm_sqr();
                den += w[3 * q + ch] * target.norm_sqr();
            }
        }
        (num / den).sqrt()
    }
}

/// Dense discrete `F⁰` on the grid.
pub fn limit_far_field_operator(
    centers: Vec<Point>,
    polarizabilities: Vec<Matrix3<C64>>,
    material: Material,
    grid: Arc<DirectionGrid>,
) -> Result<FarFieldOperator> {
    Ok(LimitOperator::new(centers, polarizabilities, material, grid)?.to_operator())
}

/// Direction frame helper for kernels defined by vector functions.
pub fn frame_of(dir: &SphericalDirection) -> [Point; 3] {
    [dir.unit(), dir.theta_hat(), dir.phi_hat()]
}
