//! Far-field operator structure, time-reversal spectra and focusing kernels.

use std::sync::Arc;

use elastrm_core::multiscat::{Particle, Scene, SolveOptions};
use elastrm_core::trm::{
    add_noise, assemble_far_field_operator, channel_weights, imaging_function, limit_far_field_operator,
    selective_focusing_kernels, time_reversal_spectrum, DirectionGrid, FarFieldOperator, ImagingGrid, LimitOperator,
    VoxelGridSpec,
};
use elastrm_core::wavebasis::{eval_expansion, herglotz_eval, HerglotzKernel, Material};
use elastrm_core::{Error, Point, C64};
use nalgebra::Matrix3;

fn material() -> Material {
    Material::from_wavenumbers(std::f64::consts::PI / 3.0, 5.0 * std::f64::consts::PI / 8.0).unwrap()
}

fn pseudo_random(n: usize, seed: u64) -> Vec<C64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            C64::new(a, b)
        })
        .collect()
}

fn two_sphere_operator() -> FarFieldOperator {
    let scene = Scene::new(
        vec![Particle::sphere(Point::new(0.3, 0.0, 0.1), 0.5), Particle::sphere(Point::new(2.0, 0.5, 0.0), 0.5)],
        material(),
        8,
    )
    .unwrap();
    assemble_far_field_operator(&scene, Arc::new(DirectionGrid::new(8, 16).unwrap()), &SolveOptions::default()).unwrap()
}

#[test]
fn operator_properties() {
    let op = two_sphere_operator();
    // weighted adjoint identity
    let n = op.dim();
    let f = pseudo_random(n, 1);
    let g = pseudo_random(n, 2);
    let adj = op.adjoint();
    let fg = op.inner(&op.apply(&f), &g);
    let astar: Vec<C64> = (&adj * nalgebra::DVector::from_vec(g.clone())).iter().copied().collect();
    let gf = op.inner(&f, &astar);
    assert!((fg - gf).norm() / fg.norm() < 1e-12);

    // the wavenumber-scaled operator is normal and satisfies the reciprocity symmetry
    let fk = op.flux_normalized();
    assert!(fk.normality_defect() < 1e-5, "{}", fk.normality_defect());
    assert!(fk.symmetry_defect().unwrap() < 1e-5);

    // T = FF* is positive semidefinite; for a normal operator its spectrum is |λ|²
    let spec = time_reversal_spectrum(&fk);
    let top = spec[0].value;
    assert!(spec.iter().all(|p| p.value > -1e-10 * top));
    let mut mods: Vec<f64> = fk.eigenvalues().iter().map(|z| z.norm_sqr()).collect();
    mods.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (p, q) in spec.iter().zip(&mods).take(20) {
        assert!((p.value - q).abs() < 1e-5 * top, "{} vs {}", p.value, q);
    }
    // eigenvectors normalized and T-invariant
    let k = spec[0].kernel.to_flat();
    assert!((k.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn odd_azimuth_grid_has_no_antipodes() {
    let mut op = FarFieldOperator::zeros(Arc::new(DirectionGrid::new(3, 5).unwrap()), material());
    assert_eq!(op.symmetry_defect(), None);
    op.grid = Arc::new(DirectionGrid::new(3, 6).unwrap());
    op.matrix = nalgebra::DMatrix::zeros(54, 54);
    assert_eq!(op.symmetry_defect(), Some(0.0));
}

#[test]
fn noise_is_seeded_and_scaled() {
    let op = two_sphere_operator();
    let a = add_noise(&op, 0.05, 9).unwrap();
    let b = add_noise(&op, 0.05, 9).unwrap();
    let c = add_noise(&op, 0.05, 10).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_ne!(a.matrix, c.matrix);
    let rel = (&a.matrix - &op.matrix).norm() / op.matrix.norm();
    assert!((rel - 0.05).abs() < 0.005, "{rel}");
    assert_eq!(add_noise(&op, 0.0, 1).unwrap().matrix, op.matrix);
    assert!(matches!(add_noise(&op, -1.0, 1), Err(Error::Usage(_))));
}

#[test]
fn herglotz_local_expansion_matches_direct_sum() {
    let m = material();
    let grid = Arc::new(DirectionGrid::new(11, 22).unwrap());
    let k = HerglotzKernel::from_flat(grid.clone(), &pseudo_random(3 * grid.len(), 4)).unwrap();
    let center = Point::new(0.5, -0.3, 0.2);
    let c = k.local_coeffs(&m, 12, &center);
    for x in [center, center + Point::new(0.3, 0.2, -0.1)] {
        let direct = herglotz_eval(&k, &m, &x);
        let series = eval_expansion(&c, &m, &center, &x).unwrap().total();
        assert!((direct - series).norm() / direct.norm() < 1e-9);
    }
}

#[test]
fn focusing_kernel_self_value() {
    let m = material();
    let grid = Arc::new(DirectionGrid::new(11, 21).unwrap());
    let s = Point::new(1.0, -2.0, 0.5);
    let frame = [Point::x(), Point::y(), Point::new(0.0, 0.6, 0.8)];
    let ks = selective_focusing_kernels(&[s], &[frame], &m, grid).unwrap();
    let want = 4.0 * std::f64::consts::PI * (m.kappa_p.powi(2) + 2.0 * m.kappa_s.powi(2)) / 3.0;
    for (k, e) in ks.iter().zip(frame) {
        let u = herglotz_eval(k, &m, &s);
        let along = u.x * e.x + u.y * e.y + u.z * e.z;
        assert!((along - want).norm() / want < 1e-12, "{along}");
    }
}

#[test]
fn limit_operator_edge_cases() {
    let m = material();
    let grid = Arc::new(DirectionGrid::new(4, 8).unwrap());
    let zero =
        limit_far_field_operator(vec![Point::zeros(), Point::x() * 5.0], vec![Matrix3::zeros(); 2], m, grid.clone())
            .unwrap();
    assert!(zero.matrix.iter().all(|v| *v == C64::new(0.0, 0.0)));
    let e = LimitOperator::new(vec![Point::x(), Point::x()], vec![Matrix3::identity(); 2], m, grid.clone());
    assert!(matches!(e, Err(Error::Geometry(_))));
    // the dense matrix and the matrix-free action agree
    let p = vec![
        Matrix3::identity() * C64::new(1.0, 0.2),
        Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 2.0, 3.0).map(C64::from)),
    ];
    let op = LimitOperator::new(vec![Point::zeros(), Point::new(4.0, 1.0, 0.0)], p, m, grid.clone()).unwrap();
    let f = HerglotzKernel::from_flat(grid.clone(), &pseudo_random(3 * grid.len(), 3)).unwrap();
    let dense = op.to_operator().apply(&f.to_flat());
    let free = op.apply(&f).to_flat();
    for (a, b) in dense.iter().zip(&free) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn single_point_scatterer_kernels_are_eigenvectors() {
    let m = material();
    let grid = Arc::new(DirectionGrid::new(11, 21).unwrap());
    let s = Point::new(0.2, 0.1, -0.3);
    let op = LimitOperator::new(vec![s], vec![Matrix3::identity()], m, grid.clone()).unwrap();
    let ks = selective_focusing_kernels(&[s], &[[Point::x(), Point::y(), Point::z()]], &m, grid).unwrap();
    for k in &ks {
        assert!(op.eigen_relation_residual(k, C64::new(1.0, 0.0)) < 1e-12);
    }
}

#[test]
fn imaging_grid_maxima() {
    let spec = VoxelGridSpec { origin: Point::zeros(), spacing: Point::new(1.0, 1.0, 1.0), counts: [5, 5, 5] };
    let peak = Point::new(2.0, 1.0, 3.0);
    let values = (0..spec.len()).map(|i| (-(spec.point(i) - peak).norm_squared()).exp()).collect();
    let img = ImagingGrid { spec, values, cutoff: 0.5 };
    let maxima = img.local_maxima();
    assert_eq!(maxima.len(), 1);
    assert_eq!(maxima[0].position, peak);
    assert_eq!(img.argmax().unwrap().1, peak);
    assert_eq!(img.mask().iter().filter(|b| **b).count(), 1);
    assert!(VoxelGridSpec::covering(Point::zeros(), Point::new(1.0, -1.0, 1.0), 0.5).is_err());
    assert_eq!(VoxelGridSpec::covering(Point::zeros(), Point::new(1.0, 2.0, 0.0), 0.5).unwrap().counts, [3, 5, 1]);
}

#[test]
fn imaging_function_peaks_at_focus() {
    let m = material();
    let grid = Arc::new(DirectionGrid::new(11, 21).unwrap());
    let s = Point::new(0.4, 0.0, 0.0);
    let ks = selective_focusing_kernels(&[s], &[[Point::x(), Point::y(), Point::z()]], &m, grid).unwrap();
    let spec = VoxelGridSpec::covering(Point::new(-2.0, -2.0, -2.0), Point::new(2.0, 2.0, 2.0), 0.2).unwrap();
    let img = imaging_function(&ks[1], &m, &spec, 1.0);
    let (_, at, _) = img.argmax().unwrap();
    assert!((at - s).norm() < 1e-9, "{at}");
    assert_eq!(channel_weights(&DirectionGrid::new(2, 3).unwrap(), &m).len(), 18);
}
