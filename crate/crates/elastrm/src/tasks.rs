//! Task runners behind the command line.

use std::fs;
use std::sync::Arc;

use elastrm_core::gmres::GmresOptions;
use elastrm_core::multiscat::{Incident, Particle, Scatterer, Scene, SolveOptions};
use elastrm_core::nalgebra::{Matrix3, Vector3};
use elastrm_core::scatmat::{
    block_eigenvalues, far_field_block, small_sphere_eigenvalues, sphere_scattering_blocks, SmallSphereEigenvalues,
};
use elastrm_core::specfun::ModeIndex;
use elastrm_core::trm::{
    add_noise, assemble_far_field_operator, imaging_function, selective_focusing_kernels, time_reversal_spectrum,
    DirectionGrid, FarFieldOperator, LimitOperator, VoxelGridSpec,
};
use elastrm_core::wavebasis::{herglotz_eval, Material, PlaneWaveSpec};
use elastrm_core::{Point, C64};
use serde_json::{json, Value};

use crate::analysis::match_centers;
use crate::artifacts::{
    csv_err, csv_writer, encode_operator, read_esmx, write_bytes, write_image, write_image_slice, write_json,
};
use crate::config::{RunConfig, Task};
use crate::error::CliError;

fn c(z: C64) -> Value {
    json!([z.re, z.im])
}

fn p3(p: &Point) -> Value {
    json!([p.x, p.y, p.z])
}

pub fn material(cfg: &RunConfig) -> Result<Material, CliError> {
    let m = &cfg.scene.material;
    Material::with_frequency(m.omega, m.kappa_p, m.kappa_s).map_err(CliError::Input)
}

/// Builds the scene, loading scattering-matrix files where given.
pub fn scene(cfg: &RunConfig) -> Result<Scene, CliError> {
    let mat = material(cfg)?;
    let n = cfg.scene.order;
    let mut particles = Vec::with_capacity(cfg.scene.particles.len());
    for p in &cfg.scene.particles {
        let center = Point::from(p.center);
        let scatterer = match &p.smatrix {
            None => Scatterer::AnalyticSphere,
            Some(f) => Scatterer::Blocks(Arc::new(read_esmx(&cfg.resolve(f), n)?)),
        };
        particles.push(Particle { center, radius: p.radius, scatterer });
    }
    Scene::new(particles, mat, n).map_err(CliError::Input)
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions { gmres: GmresOptions { tol: cfg.tol, ..Default::default() }, ..Default::default() }
}

fn direction_grid(cfg: &RunConfig) -> Result<Arc<DirectionGrid>, CliError> {
    DirectionGrid::new(cfg.n_theta, cfg.n_phi).map(Arc::new).map_err(|e| CliError::Config(e.to_string()))
}

/// Runs the configured task, writing artifacts into `cfg.out`, and returns
/// the report that was written as `report.json`.
pub fn run(cfg: &RunConfig) -> Result<Value, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    // a previous failed run may have left one behind
    let _ = fs::remove_file(cfg.out.join("error.json"));
    let hash = cfg.hash();
    let mut report = match cfg.task {
        Task::Forward => forward(cfg, &hash)?,
        Task::Operator => operator(cfg, &hash)?,
        Task::Image => image(cfg, &hash)?,
        Task::Asymptotics => asymptotics(cfg, &hash)?,
        Task::Selective => selective(cfg, &hash)?,
    };
    report["status"] = json!("ok");
    report["config_hash"] = json!(hash);
    report["task"] = json!(cfg.task);
    write_json(&cfg.out.join("report.json"), &report)?;
    Ok(report)
}

fn forward(cfg: &RunConfig, hash: &str) -> Result<Value, CliError> {
    let scene = scene(cfg)?;
    let spec = cfg.scene.incident.as_ref().expect("validated");
    let pw = PlaneWaveSpec { direction: Point::from(spec.direction), polarization: Point::from(spec.polarization) }
        .to_plane_wave(&scene.material)
        .map_err(CliError::Input)?;
    let inc = Incident::PlaneWave(pw);
    let rep = elastrm_core::multiscat::solve_forward(&scene, &inc, &solve_options(cfg)).map_err(CliError::Solver)?;
    let grid = direction_grid(cfg)?;
    let ff = elastrm_core::multiscat::far_field_of_report(&scene, &rep, &grid.directions).map_err(CliError::Solver)?;
    let path = cfg.out.join("far_field.csv");
    let mut w = csv_writer(&path, hash)?;
    w.write_record(["theta", "phi", "p_re", "p_im", "s_theta_re", "s_theta_im", "s_phi_re", "s_phi_im"])
        .map_err(|e| csv_err(&path, e))?;
    for (d, s) in grid.directions.iter().zip(&ff) {
        w.serialize((d.theta, d.phi, s.p.re, s.p.im, s.s[0].re, s.s[0].im, s.s[1].re, s.s[1].im))
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(json!({
        "iterations": rep.iterations,
        "residual": rep.residual,
        "history": rep.history,
        "boundary_residual": rep.boundary_residual,
        "particles": scene.particles().iter().zip(&rep.outgoing).map(|(p, x)| json!({
            "center": p3(&p.center),
            "radius": p.radius,
            "coefficient_norm": x.norm(),
        })).collect::<Vec<_>>(),
    }))
}

fn structure(op: &FarFieldOperator) -> Value {
    let omega = op.material.omega;
    let circle = |o: &FarFieldOperator| {
        o.eigenvalue_circle(1e-6)
            .map(|f| json!({"center": c(f.center), "radius": f.radius, "relative_residual": f.relative_residual}))
    };
    let fk = op.flux_normalized();
    json!({
        "normality_defect": op.normality_defect(),
        "symmetry_defect": op.symmetry_defect(),
        "eigenvalue_circle": circle(op),
        "flux_normalized": {
            "normality_defect": fk.normality_defect(),
            "symmetry_defect": fk.symmetry_defect(),
            "eigenvalue_circle": circle(&fk),
        },
        "printed_circle": {"center": [0.0, std::f64::consts::PI / omega], "radius": 2.0 * std::f64::consts::PI / omega},
    })
}

fn operator(cfg: &RunConfig, hash: &str) -> Result<Value, CliError> {
    let scene = scene(cfg)?;
    let clean =
        assemble_far_field_operator(&scene, direction_grid(cfg)?, &solve_options(cfg)).map_err(CliError::Solver)?;
    let noisy = add_noise(&clean, cfg.noise, cfg.seed).map_err(|e| CliError::Config(e.to_string()))?;
    write_bytes(&cfg.out.join("operator.bin"), &encode_operator(&noisy, hash))?;
    let spectrum = time_reversal_spectrum(&noisy);
    let mut ev = noisy.eigenvalues();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
    let path = cfg.out.join("spectrum.csv");
    let mut w = csv_writer(&path, hash)?;
    w.write_record(["index", "t_eigenvalue", "f_eigenvalue_re", "f_eigenvalue_im"]).map_err(|e| csv_err(&path, e))?;
    for (k, (t, f)) in spectrum.iter().zip(&ev).enumerate() {
        w.serialize((k, t.value, f.re, f.im)).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(json!({
        "dimension": noisy.dim(),
        "noise": cfg.noise,
        "seed": cfg.seed,
        "clean_structure": structure(&clean),
        "noisy_normality_defect": noisy.normality_defect(),
        "top_t_eigenvalues": spectrum.iter().take(10).map(|p| p.value).collect::<Vec<_>>(),
    }))
}

/// Default voxel box: the particles' bounding box padded by one shear
/// wavelength plus the largest diameter.
pub fn voxel_spec(cfg: &RunConfig, scene: &Scene) -> Result<VoxelGridSpec, CliError> {
    let ls = 2.0 * std::f64::consts::PI / scene.material.kappa_s;
    let pad = ls + 2.0 * scene.particles().iter().map(|p| p.radius).fold(0.0, f64::max);
    let centers = scene.centers();
    let lo = centers.iter().fold(Point::repeat(f64::INFINITY), |a, c| a.inf(c)) - Point::repeat(pad);
    let hi = centers.iter().fold(Point::repeat(f64::NEG_INFINITY), |a, c| a.sup(c)) + Point::repeat(pad);
    let im = &cfg.scene.imaging;
    let lo = im.lo.map(Point::from).unwrap_or(lo);
    let hi = im.hi.map(Point::from).unwrap_or(hi);
    VoxelGridSpec::covering(lo, hi, im.spacing.unwrap_or(0.2)).map_err(|e| CliError::Config(e.to_string()))
}

fn image(cfg: &RunConfig, hash: &str) -> Result<Value, CliError> {
    let scene = scene(cfg)?;
    let clean =
        assemble_far_field_operator(&scene, direction_grid(cfg)?, &solve_options(cfg)).map_err(CliError::Solver)?;
    let noisy = add_noise(&clean, cfg.noise, cfg.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let spectrum = time_reversal_spectrum(&noisy);
    let spec = voxel_spec(cfg, &scene)?;
    let img = imaging_function(&spectrum[0].kernel, &scene.material, &spec, cfg.cutoff);
    write_image(&cfg.out, "image", &img, hash)?;
    let z = cfg.scene.imaging.slice_z.unwrap_or_else(|| scene.centers()[0].z);
    write_image_slice(&cfg.out.join("image_slice.csv"), &img, z, hash)?;
    let maxima = img.local_maxima();
    let centers = scene.centers();
    let limit = std::f64::consts::PI / (2.0 * scene.material.kappa_s);
    let matched = match_centers(&maxima, &centers, centers.len());
    let localized = matched.iter().all(|m| m.is_some_and(|(_, d)| d <= limit));
    let (_, at, peak) = img.argmax().expect("nonempty grid");
    Ok(json!({
        "voxels": spec.counts,
        "argmax": p3(&at),
        "peak_value": peak,
        "cutoff": cfg.cutoff,
        "voxels_above_cutoff": img.mask().iter().filter(|b| **b).count(),
        "local_maxima": maxima.iter().take(2 * centers.len().max(5)).map(|m| json!({"position": p3(&m.position), "value": m.value})).collect::<Vec<_>>(),
        "localization_limit": limit,
        "centers": centers.iter().zip(&matched).map(|(c, m)| json!({
            "center": p3(c),
            "matched_rank": m.map(|v| v.0),
            "distance": m.map(|v| v.1),
        })).collect::<Vec<_>>(),
        "top_maxima_localized": localized,
        "top_t_eigenvalues": spectrum.iter().take(10).map(|p| p.value).collect::<Vec<_>>(),
    }))
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

fn asymptotics(cfg: &RunConfig, hash: &str) -> Result<Value, CliError> {
    let mat = material(cfg)?;
    let spec = cfg.scene.asymptotics.as_ref().expect("validated");
    let nmax = spec.orders.iter().copied().max().unwrap_or(0).max(1);
    let blocks = sphere_scattering_blocks(spec.radius, &mat, nmax).map_err(CliError::Solver)?;
    let path = cfg.out.join("asymptotics.csv");
    let mut w = csv_writer(&path, hash)?;
    w.write_record(["n", "quantity", "formula_re", "formula_im", "dense_re", "dense_im", "relative_error"])
        .map_err(|e| csv_err(&path, e))?;
    let mut rows = Vec::new();
    for &n in &spec.orders {
        let ev = block_eigenvalues(&far_field_block(&blocks, ModeIndex::new(n, 0).expect("valid"), &mat), n);
        let pairs: Vec<(&str, C64, C64)> =
            match small_sphere_eigenvalues(n, spec.radius, &mat).map_err(CliError::Solver)? {
                SmallSphereEigenvalues::Monopole { exact, leading } => {
                    vec![("lambda00_exact", exact, ev[0]), ("lambda00_leading", leading, ev[0])]
                }
                SmallSphereEigenvalues::Multipole { lambda1, lambda2_exact, lambda2_leading, lambda3 } => vec![
                    ("lambda1", lambda1, ev[0]),
                    ("lambda2_exact", lambda2_exact, ev[2]),
                    ("lambda2_leading", lambda2_leading, ev[2]),
                    ("lambda3", lambda3, ev[1]),
                ],
            };
        for (name, formula, dense) in pairs {
            let e = rel(formula, dense);
            w.serialize((n, name, formula.re, formula.im, dense.re, dense.im, e)).map_err(|e| csv_err(&path, e))?;
            rows.push(json!({"n": n, "quantity": name, "formula": c(formula), "dense": c(dense), "relative_error": e, "modulus_ratio": formula.norm() / dense.norm()}));
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(json!({"radius": spec.radius, "rows": rows}))
}

/// Eigen-relation residuals of the focusing kernels for point scatterers on
/// the x axis, `d` apart, with diagonal polarizabilities.
pub fn selective_residuals(mat: &Material, d: f64, diag: &[[f64; 3]], min_theta: usize) -> Result<Vec<f64>, CliError> {
    let count = diag.len();
    let extent = d * (count - 1) as f64;
    // resolve e^{iκ_s α·(s_j − s_l)} across the whole array
    let n_theta = min_theta.max((mat.kappa_s * extent / 2.0).ceil() as usize + 10);
    let grid = Arc::new(DirectionGrid::new(n_theta, 2 * n_theta).map_err(CliError::Solver)?);
    let centers: Vec<Point> = (0..count).map(|l| Point::new(l as f64 * d - extent / 2.0, 0.0, 0.0)).collect();
    let p: Vec<Matrix3<C64>> =
        diag.iter().map(|l| Matrix3::from_diagonal(&Vector3::new(l[0], l[1], l[2]).map(C64::from))).collect();
    let op = LimitOperator::new(centers.clone(), p, *mat, grid.clone()).map_err(CliError::Input)?;
    let frames = vec![[Point::x(), Point::y(), Point::z()]; count];
    let kernels = selective_focusing_kernels(&centers, &frames, mat, grid).map_err(CliError::Input)?;
    Ok(kernels.iter().enumerate().map(|(j, f)| op.eigen_relation_residual(f, C64::from(diag[j / 3][j % 3]))).collect())
}

fn selective(cfg: &RunConfig, hash: &str) -> Result<Value, CliError> {
    let mat = material(cfg)?;
    let spec = cfg.scene.selective.as_ref().expect("validated");
    let ls = 2.0 * std::f64::consts::PI / mat.kappa_s;
    let path = cfg.out.join("selective.csv");
    let mut w = csv_writer(&path, hash)?;
    w.write_record(["separation_wavelengths", "particle", "axis", "residual"]).map_err(|e| csv_err(&path, e))?;
    let mut worst = Vec::new();
    for &k in &spec.separations {
        let res = selective_residuals(&mat, k * ls, &spec.polarizabilities, cfg.n_theta)?;
        for (j, r) in res.iter().enumerate() {
            w.serialize((k, j / 3, j % 3, r)).map_err(|e| csv_err(&path, e))?;
        }
        worst.push(res.iter().copied().fold(0.0, f64::max));
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    // self-value of one kernel on the configured grid
    let grid = direction_grid(cfg)?;
    let k = selective_focusing_kernels(&[Point::zeros()], &[[Point::x(), Point::y(), Point::z()]], &mat, grid)
        .map_err(CliError::Input)?;
    let self_value = herglotz_eval(&k[0], &mat, &Point::zeros()).x;
    let expected = 4.0 * std::f64::consts::PI * (mat.kappa_p.powi(2) + 2.0 * mat.kappa_s.powi(2)) / 3.0;
    Ok(json!({
        "separations_wavelengths": spec.separations,
        "max_residual": worst,
        "monotone": worst.windows(2).all(|p| p[1] < p[0]),
        "self_value": c(self_value),
        "self_value_expected": expected,
    }))
}
