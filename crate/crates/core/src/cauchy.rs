//! Cauchy projections `C±` on a uniform spectral grid.
//!
//! The sampled function is read as its band-limited (sinc) interpolant. The
//! Cauchy integral of a sinc basis function has a closed form at the nodes,
//! which gives the discrete operator
//!
//! ```text
//! (C⁺g)_m = g_m/2 + (i/π) Σ_{n odd} g_{m−n}/n
//! ```
//!
//! evaluated as an acyclic convolution through FFTs on a twice-longer buffer.
//! `C⁻ = C⁺ − I`, so Plemelj's relation holds to rounding. `C⁺` keeps the
//! frequencies `e^{ikz}` with `k > 0`, i.e. boundary values from the upper
//! half-plane.
//!
//! Inputs with slowly decaying tails are handled by fitting
//! `Σ A_k/(z+iβ)^k + B_k/(z−iβ)^k` on the outer grid, projecting the remainder
//! numerically and adding the exact projections of the fit.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::mat2::ZERO;
use crate::numerics::{fft_forward, fft_inverse, SpectralGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub values: Vec<Complex64>,
    /// Set when the input did not decay at the grid ends and the rational tail
    /// model was applied.
    pub tail_corrected: bool,
}

/// Relative edge level above which the tail model is applied.
const TAIL_TRIGGER: f64 = 1e-12;
const TAIL_ORDERS: i32 = 3;

#[derive(Debug, Clone)]
pub struct CauchyProjector {
    grid: SpectralGrid,
    kernel_hat: Vec<Complex64>,
    beta: f64,
}

impl CauchyProjector {
    pub fn new(grid: SpectralGrid) -> Self {
        let n = grid.len();
        let mut k = vec![ZERO; 2 * n];
        for m in (1..n).step_by(2) {
            let v = Complex64::new(0.0, 1.0 / (PI * m as f64));
            k[m] = v;
            k[2 * n - m] = -v;
        }
        fft_forward(&mut k);
        Self { grid, kernel_hat: k, beta: 1.0 }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// Raw discrete projection with no tail handling.
    pub fn plus_raw(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = f.len();
        debug_assert_eq!(n, self.grid.len());
        let mut buf = vec![ZERO; 2 * n];
        buf[..n].copy_from_slice(f);
        fft_forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        fft_inverse(&mut buf);
        buf.truncate(n);
        for (b, v) in buf.iter_mut().zip(f) {
            *b += 0.5 * v;
        }
        buf
    }

    /// `C⁺f` for functions that decay at the grid ends.
    pub fn plus(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.plus_raw(f)
    }

    /// `C⁻f = C⁺f − f` for functions that decay at the grid ends.
    pub fn minus(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut p = self.plus_raw(f);
        for (a, b) in p.iter_mut().zip(f) {
            *a -= b;
        }
        p
    }

    /// Projection with detection and correction of non-decaying tails.
    pub fn project(&self, f: &[Complex64], side: Side) -> Projection {
        let peak = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let edge = self.grid.outer_indices(0.02).map(|j| f[j].norm()).fold(0.0, f64::max);
        let tail_corrected = peak > 0.0 && edge > TAIL_TRIGGER * peak;
        let mut values = if tail_corrected {
            let (coef, model) = self.fit_tails(f);
            let rest: Vec<Complex64> = f.iter().zip(&model).map(|(a, b)| a - b).collect();
            let mut p = self.plus_raw(&rest);
            // Exact C⁺ of the model keeps the upper-analytic part only.
            for (j, z) in self.grid.points().into_iter().enumerate() {
                for k in 1..=TAIL_ORDERS {
                    let a = coef[(k - 1) as usize];
                    p[j] += a / (Complex64::new(z, self.beta)).powi(k);
                }
            }
            p
        } else {
            self.plus_raw(f)
        };
        if side == Side::Minus {
            for (a, b) in values.iter_mut().zip(f) {
                *a -= b;
            }
        }
        Projection { values, tail_corrected }
    }

    /// Least-squares fit of the rational tail model on the outer 15% of the
    /// grid. Returns the coefficients (upper-analytic ones first) and the
    /// model evaluated on the whole grid.
    fn fit_tails(&self, f: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let zs = self.grid.points();
        let basis = |z: f64| -> Vec<Complex64> {
            let mut b = Vec::new();
            for k in 1..=TAIL_ORDERS {
                b.push(Complex64::new(z, self.beta).powi(k).inv());
            }
            for k in 1..=TAIL_ORDERS {
                b.push(Complex64::new(z, -self.beta).powi(k).inv());
            }
            b
        };
        let nb = (2 * TAIL_ORDERS) as usize;
        let mut ata = vec![vec![ZERO; nb]; nb];
        let mut atb = vec![ZERO; nb];
        for j in self.grid.outer_indices(0.15) {
            let b = basis(zs[j]);
            for p in 0..nb {
                for q in 0..nb {
                    ata[p][q] += b[p].conj() * b[q];
                }
                atb[p] += b[p].conj() * f[j];
            }
        }
        let coef = solve_dense(ata, atb);
        let model = zs
            .iter()
            .map(|&z| basis(z).iter().zip(&coef).map(|(b, c)| b * c).sum())
            .collect();
        (coef, model)
    }
}

/// Gaussian elimination with partial pivoting for small dense systems.
pub(crate) fn solve_dense(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        if d.norm() == 0.0 {
            continue;
        }
        for row in col + 1..n {
            let f = a[row][col] / d;
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![ZERO; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = if a[row][row].norm() == 0.0 { ZERO } else { s / a[row][row] };
    }
    x
}
