//! Time-harmonic elastic scattering by many rigid particles and time-reversal
//! imaging from far-field data.
//!
//! The crate is `no_std` (it needs `alloc`). Enabling the `parallel` feature
//! pulls in `std` and `rayon` and parallelizes operator assembly, translation
//! set-up and imaging over independent work items; results are identical with
//! and without it.
//!
//! Layers, bottom up:
//!
//! * [`specfun`]: spherical Bessel/Hankel tables, orthonormal spherical
//!   harmonics and their surface gradients.
//! * [`wavebasis`]: vector spherical wave fields, plane-wave and Herglotz
//!   incident fields, far-field patterns, the Navier fundamental solution.
//! * [`scatmat`]: per-mode scattering matrices (analytic rigid sphere or
//!   externally supplied) and the `ESMX1` binary encoding.
//! * [`multiscat`]: sphere-surface projections, evaluate-and-project
//!   translations and the GMRES-driven multiple-scattering solve.
//! * [`trm`]: discrete far-field operator, time-reversal spectrum, Herglotz
//!   imaging, the small-particle limit operator and selective focusing.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod gmres;
pub mod linalg;
pub mod multiscat;
pub mod quadrature;
pub mod scatmat;
pub mod specfun;
pub mod trm;
pub mod wavebasis;

mod par;

pub use error::{Error, Result};
pub use nalgebra;
pub use num_complex;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Point or real direction in 3D.
pub type Point = nalgebra::Vector3<f64>;
/// Complex 3-vector (a displacement field value).
pub type CVec3 = nalgebra::Vector3<C64>;
