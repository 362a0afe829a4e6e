//! Post-processing used by reports and checks.

use elastrm_core::trm::DirectionGrid;
use elastrm_core::trm::LocalMaximum;
use elastrm_core::wavebasis::{herglotz_eval, HerglotzKernel, Material};
use elastrm_core::Point;

/// Nearest distinct local maximum (among the first `consider`) for each
/// center, assigned greedily by increasing distance. Entries are
/// `(maximum index, distance)`.
pub fn match_centers(maxima: &[LocalMaximum], centers: &[Point], consider: usize) -> Vec<Option<(usize, f64)>> {
    let pool = &maxima[..consider.min(maxima.len())];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (c, p) in centers.iter().enumerate() {
        for (k, m) in pool.iter().enumerate() {
            pairs.push(((m.position - p).norm(), c, k));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; centers.len()];
    let mut used = vec![false; pool.len()];
    for (d, c, k) in pairs {
        if out[c].is_none() && !used[k] {
            out[c] = Some((k, d));
            used[k] = true;
        }
    }
    out
}

/// Root-mean-square of `|u_f|` over the sphere of radius `r` about `center`.
pub fn spherical_rms(
    kernel: &HerglotzKernel,
    material: &Material,
    center: &Point,
    r: f64,
    shell: &DirectionGrid,
) -> f64 {
    let s: f64 = shell
        .directions
        .iter()
        .zip(&shell.weights)
        .map(|(d, w)| w * herglotz_eval(kernel, material, &(center + d.unit() * r)).norm_squared())
        .sum();
    (s / (4.0 * std::f64::consts::PI)).sqrt()
}

/// Result of fitting `C / r` to the envelope of a radial profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub coefficient: f64,
    /// RMS of `(envelope − C/r)/(C/r)` over the envelope points.
    pub relative_residual: f64,
    /// `(r, envelope value)` pairs used.
    pub points: Vec<(f64, f64)>,
}

/// Envelope = local maxima of the sampled profile `(r, v)`; fits `C/r` by
/// least squares in relative error.
pub fn fit_inverse_r(profile: &[(f64, f64)]) -> Option<DecayFit> {
    let mut points = Vec::new();
    for w in profile.windows(3) {
        if w[1].1 >= w[0].1 && w[1].1 >= w[2].1 {
            points.push(w[1]);
        }
    }
    if points.len() < 2 {
        return None;
    }
    // minimize Σ (v r / C − 1)²  ⇒  C = Σ (v r)² / Σ v r
    let num: f64 = points.iter().map(|(r, v)| (r * v).powi(2)).sum();
    let den: f64 = points.iter().map(|(r, v)| r * v).sum();
    let c = num / den;
    let ms = points.iter().map(|(r, v)| (v * r / c - 1.0).powi(2)).sum::<f64>() / points.len() as f64;
    Some(DecayFit { coefficient: c, relative_residual: ms.sqrt(), points })
}

/// Least-squares slope of `log y` against `log x`.
pub fn power_law_exponent(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
