//! Restarted GMRES for complex linear systems given as operator closures.

use num_complex::Complex64;

use crate::mat2::ZERO;

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// Final relative residual ‖b − Ax‖/‖b‖.
    pub residual: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solve `A x = b` starting from `x0`.
pub fn gmres<F>(mut apply: F, b: &[Complex64], x0: Vec<Complex64>, tol: f64, restart: usize, max_iter: usize) -> GmresOutcome
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0;
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return GmresOutcome { x: vec![ZERO; n], iterations: 0, residual: 0.0, history, converged: true };
    }
    let mut iterations = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        history.push(rel);
        if rel < tol || iterations >= max_iter {
            return GmresOutcome { x, iterations, residual: rel, history, converged: rel < tol };
        }
        let m = restart.min(max_iter - iterations).max(1);
        let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|c| c / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![ZERO; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&v[k]);
            for i in 0..=k {
                let hik = dot(&v[i], &w);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * h[i][k] + sn[i].conj() * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if d == 0.0 {
                cs[k] = Complex64::new(1.0, 0.0);
                sn[k] = ZERO;
            } else {
                cs[k] = a / d;
                sn[k] = bb / d;
            }
            h[k][k] = cs[k].conj() * a + sn[k].conj() * bb;
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            iterations += 1;
            k_used = k + 1;
            history.push(g[k + 1].norm() / bnorm);
            if g[k + 1].norm() / bnorm < tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|c| c / wn).collect());
        }
        let mut y = vec![ZERO; k_used];
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
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let a = [[4.0, 1.0, 0.5], [0.2, 3.0, -1.0], [0.0, 0.7, 2.0]];
        let apply = |x: &[Complex64]| -> Vec<Complex64> {
            (0..3).map(|i| (0..3).map(|j| x[j] * a[i][j]).sum()).collect()
        };
        let b = vec![Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0), Complex64::new(3.0, 0.5)];
        let out = gmres(apply, &b, vec![ZERO; 3], 1e-13, 2, 50);
        assert!(out.converged);
        let ax = apply(&out.x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).norm() < 1e-12);
        }
    }
}
