//! Restarted GMRES with left preconditioning, on plain `f64` vectors.

use crate::error::{Error, Result};

pub struct GmresOptions {
    pub rtol: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `‖b - Ax‖/‖b‖` at every restart check.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` to `‖b - Ax‖ ≤ rtol‖b‖`, iterating on `M⁻¹A x = M⁻¹b`.
///
/// The inner loop stops on the preconditioned residual estimate; the true
/// residual is checked at each restart and the inner tolerance tightened if
/// the two disagree.
pub fn gmres(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_m_inv: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Vec<f64>,
    opts: &GmresOptions,
) -> Result<GmresOutcome> {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = x0;
    let mut history = Vec::new();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        history.push(0.0);
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            history,
        });
    }
    let m = opts.restart.max(1);
    let mut iterations = 0;
    let mut inner_tol = opts.rtol;
    loop {
        let ax = apply_a(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rel = norm(&r) / b_norm;
        history.push(rel);
        if rel <= opts.rtol {
            return Ok(GmresOutcome {
                x,
                iterations,
                history,
            });
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: rel,
                history,
            });
        }
        if history.len() > 1 {
            // The preconditioned estimate was optimistic; ask for more.
            inner_tol = (inner_tol * (opts.rtol / rel).max(1e-3)).max(1e-15);
        }
        let z = apply_m_inv(&r);
        let beta = norm(&z);
        if beta == 0.0 {
            return Err(Error::NonConvergence {
                iterations,
                residual: rel,
                history,
            });
        }
        // Target relative to the preconditioned right-hand side of this cycle.
        let target = inner_tol * beta / rel;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(z.iter().map(|v| v / beta).collect());
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iterations {
            let mut w = apply_m_inv(&apply_a(&basis[k]));
            let mut col = vec![0.0; k + 2];
            for (j, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                col[j] = h;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= h * vi;
                }
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let den = col[k].hypot(col[k + 1]);
            let (c, s) = if den == 0.0 {
                (1.0, 0.0)
            } else {
                (col[k] / den, col[k + 1] / den)
            };
            cs.push(c);
            sn.push(s);
            col[k] = den;
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            hess.push(col);
            iterations += 1;
            k += 1;
            let breakdown = wn <= 1e-300 * beta;
            if g[k].abs() <= target || breakdown {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // Back substitution for the k×k triangular system.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[j][i] * y[j];
            }
            y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
        debug_assert_eq!(x.len(), n);
    }
}
