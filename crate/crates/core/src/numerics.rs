//! Grids, quadrature, FFT helpers, spectral differentiation, weighted norms
//! and interpolation shared by the rest of the crate.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[-half_width, half_width)` with a power-of-two point count.
///
/// Node `j` sits at `(j - n/2) * h`, so the grid is exactly symmetric about
/// the origin: `x(n/2 + k) == -x(n/2 - k)` bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    half_width: f64,
    n: usize,
}

/// Grid in the physical variable x.
pub type SpatialGrid = UniformGrid;
/// Grid in the spectral variable z.
pub type SpectralGrid = UniformGrid;

impl UniformGrid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidInput(format!("half width {half_width} must be positive")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!("point count {n} must be a power of two >= 16")));
        }
        Ok(Self { half_width, n })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    pub fn first(&self) -> f64 {
        self.point(0)
    }

    pub fn last(&self) -> f64 {
        self.point(self.n - 1)
    }

    /// Index of the node at the origin.
    pub fn origin(&self) -> usize {
        self.n / 2
    }

    /// Nearest node index to `p`, clamped into range.
    pub fn nearest(&self, p: f64) -> usize {
        let j = (p / self.spacing()).round() + (self.n / 2) as f64;
        j.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n;
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * self.spacing());
        (0..n)
            .map(|m| {
                if m < n / 2 {
                    m as f64 * dk
                } else if m == n / 2 {
                    0.0
                } else {
                    (m as f64 - n as f64) * dk
                }
            })
            .collect()
    }

    /// Node indices in the outer `fraction` of the grid on both sides.
    pub fn outer_indices(&self, fraction: f64) -> impl Iterator<Item = usize> + '_ {
        let cut = (1.0 - fraction) * self.half_width;
        (0..self.n).filter(move |&j| self.point(j).abs() >= cut)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT (no normalization).
pub fn fft_forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// In-place inverse FFT normalized by `1/n`.
pub fn fft_inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(buf));
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= s);
}

pub fn to_complex(f: &[f64]) -> Vec<Complex64> {
    f.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

pub fn check_finite(f: &[Complex64]) -> Result<()> {
    match f.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Trapezoid rule on the periodic grid, summed in mirrored pairs so that an
/// exactly odd sample set integrates to exactly zero.
pub fn trapezoid(f: &[f64], grid: &UniformGrid) -> f64 {
    let n = f.len();
    let c = n / 2;
    let mut s = f[c] + f[0];
    for k in 1..c {
        s += f[c + k] + f[c - k];
    }
    s * grid.spacing()
}

pub fn trapezoid_complex(f: &[Complex64], grid: &UniformGrid) -> Complex64 {
    let re: Vec<f64> = f.iter().map(|v| v.re).collect();
    let im: Vec<f64> = f.iter().map(|v| v.im).collect();
    Complex64::new(trapezoid(&re, grid), trapezoid(&im, grid))
}

// Gregory end weights (differences through fourth order) for a one-sided endpoint.
const GREGORY: [f64; 5] = [95.0 / 288.0, 317.0 / 240.0, 23.0 / 30.0, 793.0 / 720.0, 157.0 / 160.0];

/// Integral of `f` over the grid, split at the origin with high-order end
/// corrections there. Use for integrands with a kink at zero (odd powers of |x|).
pub fn split_quadrature(f: &[f64], grid: &UniformGrid) -> f64 {
    let c = grid.origin();
    let n = f.len();
    let weight = |k: usize| if k < GREGORY.len() { GREGORY[k] } else { 1.0 };
    let mut s = 0.0;
    for k in 0..(n - c) {
        s += weight(k) * f[c + k];
    }
    for k in 0..=c {
        s += weight(k) * f[c - k];
    }
    s * grid.spacing()
}

pub fn l2_norm(f: &[Complex64], grid: &UniformGrid) -> f64 {
    let sq: Vec<f64> = f.iter().map(|v| v.norm_sqr()).collect();
    trapezoid(&sq, grid).max(0.0).sqrt()
}

pub fn linf_norm(f: &[Complex64]) -> f64 {
    f.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn taper(s: f64) -> f64 {
    // C-infinity step: 0 at s <= 0, 1 at s >= 1.
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// Smooth window equal to one on the inner 90% and tapering to zero across
/// the outer 10% on each side.
pub fn boundary_window(grid: &UniformGrid) -> Vec<f64> {
    let l = grid.half_width();
    let band = 0.1 * l;
    grid.points().iter().map(|&x| taper((l - x.abs()) / band)).collect()
}

/// Spectral derivative of order `order` after boundary windowing.
pub fn spectral_derivative(f: &[Complex64], grid: &UniformGrid, order: u32) -> Vec<Complex64> {
    let window = boundary_window(grid);
    let mut buf: Vec<Complex64> = f.iter().zip(&window).map(|(v, w)| v * w).collect();
    if order == 0 {
        return buf;
    }
    fft_forward(&mut buf);
    let n = grid.len();
    let ks = grid.wavenumbers();
    for (m, v) in buf.iter_mut().enumerate() {
        if m == n / 2 && order % 2 == 1 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        *v *= Complex64::new(0.0, ks[m]).powu(order);
    }
    fft_inverse(&mut buf);
    buf
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub i: u32,
    pub j: u32,
    pub value: f64,
}

/// The H^{i,j} norm `(‖(1+|x|^j) f‖² + ‖f^{(i)}‖²)^{1/2}`.
///
/// Order zero drops the corresponding piece: `j = 0` means no weight and
/// `i = 0` means no derivative term, so H^{0,0} is plain L².
pub fn weighted_norm(f: &[Complex64], grid: &UniformGrid, i: u32, j: u32) -> Result<WeightedNorm> {
    if f.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "sample count {} does not match grid size {}",
            f.len(),
            grid.len()
        )));
    }
    check_finite(f)?;
    let xs = grid.points();
    let weighted: Vec<f64> = f
        .iter()
        .zip(&xs)
        .map(|(v, &x)| {
            let w = if j == 0 { 1.0 } else { 1.0 + x.abs().powi(j as i32) };
            w * w * v.norm_sqr()
        })
        .collect();
    let mut total = if j % 2 == 1 { split_quadrature(&weighted, grid) } else { trapezoid(&weighted, grid) };
    if i > 0 {
        let d = spectral_derivative(f, grid, i);
        let sq: Vec<f64> = d.iter().map(|v| v.norm_sqr()).collect();
        total += trapezoid(&sq, grid);
    }
    Ok(WeightedNorm { i, j, value: total.max(0.0).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpMethod {
    /// Four-point Lagrange; reproduces cubics exactly.
    Cubic,
    /// Eight-point Lagrange for resampling smooth data.
    Lagrange8,
}

impl InterpMethod {
    fn width(self) -> usize {
        match self {
            InterpMethod::Cubic => 4,
            InterpMethod::Lagrange8 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub value: Complex64,
    pub method: InterpMethod,
}

/// Local Lagrange interpolation of grid samples at `point`.
pub fn interpolate(f: &[Complex64], grid: &UniformGrid, point: f64, method: InterpMethod) -> Result<Interpolated> {
    let (lo, hi) = (grid.first(), grid.last());
    if !(point >= lo && point <= hi) {
        return Err(Error::Extrapolation { point, lo, hi });
    }
    let h = grid.spacing();
    let u = (point - lo) / h;
    let base = u.floor();
    let frac = u - base;
    let j = base as usize;
    if frac == 0.0 {
        return Ok(Interpolated { value: f[j], method });
    }
    let w = method.width();
    let n = grid.len();
    let start = (j + 1).saturating_sub(w / 2).min(n - w);
    let mut value = Complex64::new(0.0, 0.0);
    for a in 0..w {
        let ia = start + a;
        let mut c = 1.0;
        for b in 0..w {
            if a != b {
                let ib = start + b;
                c *= (u - ib as f64) / (ia as f64 - ib as f64);
            }
        }
        value += f[ia] * c;
    }
    Ok(Interpolated { value, method })
}

/// Resample smooth data onto another grid whose support lies inside the
/// source grid's support; points outside are filled with zero.
pub fn resample(f: &[Complex64], from: &UniformGrid, to: &UniformGrid) -> Vec<Complex64> {
    to.points()
        .iter()
        .map(|&p| {
            interpolate(f, from, p, InterpMethod::Lagrange8)
                .map(|v| v.value)
                .unwrap_or(Complex64::new(0.0, 0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn grid_is_mirror_symmetric() {
        let g = UniformGrid::new(100.0, 4096).unwrap();
        for k in 1..2048 {
            assert_eq!(g.point(2048 + k), -g.point(2048 - k));
        }
        assert_eq!(g.point(2048), 0.0);
        assert_eq!(g.first(), -100.0);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(UniformGrid::new(1.0, 100).is_err());
        assert!(UniformGrid::new(1.0, 8).is_err());
        assert!(UniformGrid::new(-1.0, 64).is_err());
    }

    #[test]
    fn odd_integrand_vanishes() {
        let g = UniformGrid::new(100.0, 4096).unwrap();
        let f: Vec<f64> = g.points().iter().map(|&x| x * (-x * x).exp()).collect();
        assert_eq!(trapezoid(&f, &g), 0.0);
        let f: Vec<f64> = g.points().iter().map(|&x| x.sin() * (-x * x / 50.0).exp()).collect();
        assert!(trapezoid(&f, &g).abs() < 1e-15);
    }

    #[test]
    fn split_quadrature_handles_kink() {
        let g = UniformGrid::new(20.0, 2048).unwrap();
        let f: Vec<f64> = g.points().iter().map(|&x| x.abs() * (-x * x).exp()).collect();
        assert!((split_quadrature(&f, &g) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = UniformGrid::new(100.0, 4096).unwrap();
        let f: Vec<Complex64> = g.points().iter().map(|&x| c((-x * x).exp())).collect();
        let n = weighted_norm(&f, &g, 0, 0).unwrap();
        assert!((n.value - (std::f64::consts::PI / 2.0).powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let g = UniformGrid::new(10.0, 64).unwrap();
        let f = vec![c(0.0); 64];
        for (i, j) in [(0, 0), (1, 2), (2, 1)] {
            assert_eq!(weighted_norm(&f, &g, i, j).unwrap().value, 0.0);
        }
    }

    #[test]
    fn norm_rejects_non_finite() {
        let g = UniformGrid::new(10.0, 64).unwrap();
        let mut f = vec![c(0.0); 64];
        f[3] = c(f64::NAN);
        assert!(matches!(weighted_norm(&f, &g, 0, 0), Err(Error::NonFinite { index: 3 })));
    }

    #[test]
    fn derivative_of_gaussian() {
        let g = UniformGrid::new(20.0, 512).unwrap();
        let f: Vec<Complex64> = g.points().iter().map(|&x| c((-x * x).exp())).collect();
        let d = spectral_derivative(&f, &g, 2);
        for (k, &x) in g.points().iter().enumerate() {
            let exact = (4.0 * x * x - 2.0) * (-x * x).exp();
            assert!((d[k].re - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_interpolation_is_exact_for_quadratics() {
        let g = UniformGrid::new(8.0, 1024).unwrap();
        let f: Vec<Complex64> = g.points().iter().map(|&z| c(z * z)).collect();
        let p = 0.5 * (g.point(700) + g.point(701));
        let v = interpolate(&f, &g, p, InterpMethod::Cubic).unwrap();
        assert!((v.value.re - p * p).abs() < 1e-8);
        assert_eq!(v.method, InterpMethod::Cubic);
    }

    #[test]
    fn interpolation_at_nodes_and_outside() {
        let g = UniformGrid::new(8.0, 1024).unwrap();
        let f: Vec<Complex64> = g.points().iter().map(|&z| c(z.sin())).collect();
        let v = interpolate(&f, &g, g.point(37), InterpMethod::Cubic).unwrap();
        assert_eq!(v.value, f[37]);
        assert!(matches!(interpolate(&f, &g, 8.5, InterpMethod::Cubic), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn interpolation_of_exponential() {
        let g = UniformGrid::new(8.0, 1024).unwrap();
        let f: Vec<Complex64> = g.points().iter().map(|&z| Complex64::new(0.0, z).exp()).collect();
        let v = interpolate(&f, &g, 0.3, InterpMethod::Cubic).unwrap();
        assert!((v.value - Complex64::new(0.0, 0.3).exp()).norm() < 1e-6);
    }
}
