//! Restarted GMRES for complex systems given as a matrix-free operator.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Target residual relative to `‖b‖`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-6, restart: 50, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
    /// Relative residual estimate after each iteration.
    pub history: Vec<f64>,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    // conj(a)·b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solves `A x = b` from `x = 0`. `apply(v, out)` writes `A v` into `out`.
pub fn gmres<F>(mut apply: F, b: &[C64], opts: &GmresOptions) -> Result<GmresOutcome>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let bnorm = norm(b);
    let mut x = vec![zero; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok(GmresOutcome { x, iterations: 0, residual: 0.0, history });
    }
    if !(opts.tol > 0.0) || opts.restart == 0 {
        return Err(Error::usage("GMRES needs tol > 0 and restart > 0"));
    }
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut tmp = vec![zero; n];
    loop {
        let beta = norm(&r);
        let resid = beta / bnorm;
        if resid <= opts.tol {
            return Ok(GmresOutcome { x, iterations, residual: resid, history });
        }
        if iterations >= opts.max_iter {
            return Err(Error::Convergence { iterations, residual: resid, history });
        }
        let m = opts.restart;
        let mut v: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|z| z / beta).collect());
        let mut h = vec![vec![zero; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![zero; m];
        let mut g = vec![zero; m + 1];
        g[0] = C64::from(beta);
        let mut k_used = 0;
        for k in 0..m {
            apply(&v[k], &mut tmp);
            let mut w = tmp.clone();
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let hij = dot(vj, &w);
                    h[j][k] += hij;
                    for (wi, vi) in w.iter_mut().zip(vj) {
                        *wi -= hij * vi;
                    }
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = C64::from(hn);
            for j in 0..k {
                let t = h[j][k] * cs[j] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j].conj() * h[j][k] + h[j + 1][k] * cs[j];
                h[j][k] = t;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = h[k][k] * c + s * h[k + 1][k];
            h[k + 1][k] = zero;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            iterations += 1;
            k_used = k + 1;
            let resid = g[k + 1].norm() / bnorm;
            history.push(resid);
            if resid <= opts.tol || iterations >= opts.max_iter || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|z| z / hn).collect());
        }
        // back substitution
        let mut y = vec![zero; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
        // true residual
        apply(&x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        let true_res = norm(&r) / bnorm;
        if true_res <= opts.tol {
            return Ok(GmresOutcome { x, iterations, residual: true_res, history });
        }
        if iterations >= opts.max_iter {
            return Err(Error::Convergence { iterations, residual: true_res, history });
        }
    }
}

/// Rotation with real cosine that zeroes `b` in `(a, b)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let t = na.hypot(nb);
    let c = na / t;
    let s = (a / na) * b.conj() / t;
    (c, s)
}
