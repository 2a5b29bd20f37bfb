//! Jost solutions, the scattering matrix and the reflection coefficient.
//!
//! The AKNS system `Ψ' = -izσΨ + UΨ`, `U = [[0, u], [u, 0]]`, is integrated
//! in the modified unknown `N = e^{ixzσ}Ψ`, which satisfies
//! `N' = [[0, u e^{2ixz}], [u e^{-2ixz}, 0]] N` and tends to `I` at the
//! normalizing end. With `N⁺ = N⁻S` the scattering matrix is
//! `S = N⁻(L)^{-1} = [[a, b̆], [b, ă]]`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::{self, Mat2, ONE, ZERO};
use crate::numerics::{
    fft_forward, fft_inverse, interpolate, weighted_norm, InterpMethod, SpatialGrid, SpectralGrid, WeightedNorm,
};

/// Required bound on |u| over the outer 5% of the grid before scattering.
pub const DECAY_LIMIT: f64 = 1e-8;
/// Largest admissible unitarity residual.
pub const UNITARITY_LIMIT: f64 = 1e-6;

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Real potential sampled on a spatial grid.
///
/// A potential built from a closed-form profile keeps the profile so that
/// integrators can evaluate it off the grid (one-sided at step ends, which
/// keeps piecewise data such as a box exact).
#[derive(Clone)]
pub struct Potential {
    grid: SpatialGrid,
    samples: Vec<f64>,
    tail_bound: f64,
    profile: Option<Profile>,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential")
            .field("grid", &self.grid)
            .field("tail_bound", &self.tail_bound)
            .field("analytic", &self.profile.is_some())
            .finish()
    }
}

fn tail_of(grid: &SpatialGrid, samples: &[f64]) -> f64 {
    grid.outer_indices(0.05).map(|j| samples[j].abs()).fold(0.0, f64::max)
}

impl Potential {
    pub fn from_samples(grid: SpatialGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples for a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let tail_bound = tail_of(&grid, &samples);
        Ok(Self { grid, samples, tail_bound, profile: None })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let samples: Vec<f64> = grid.points().iter().map(|&x| f(x)).collect();
        let mut p = Self::from_samples(grid, samples)?;
        p.profile = Some(Arc::new(f));
        Ok(p)
    }

    pub fn zero(grid: SpatialGrid) -> Self {
        Self { grid, samples: vec![0.0; grid.len()], tail_bound: 0.0, profile: None }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn check_decay(&self) -> Result<()> {
        if self.tail_bound < DECAY_LIMIT {
            Ok(())
        } else {
            Err(Error::DecayGate { tail_bound: self.tail_bound, limit: DECAY_LIMIT })
        }
    }

    /// Values at the left end, midpoint and right end of every step interval,
    /// with each grid interval split into `refine` substeps.
    pub(crate) fn step_samples(&self, refine: usize) -> StepSamples {
        let n = self.grid.len();
        let hs = self.grid.spacing() / refine as f64;
        let x0 = self.grid.first();
        let m = (n - 1) * refine;
        match &self.profile {
            Some(f) => {
                let d = 1e-9 * hs;
                let at = |i: usize| x0 + i as f64 * hs;
                StepSamples {
                    refine,
                    left: (0..m).map(|i| f(at(i) + d)).collect(),
                    mid: (0..m).map(|i| f(at(i) + 0.5 * hs)).collect(),
                    right: (0..m).map(|i| f(at(i + 1) - d)).collect(),
                }
            }
            None => {
                let fine = upsample(&self.samples, 2 * refine);
                StepSamples {
                    refine,
                    left: (0..m).map(|i| fine[2 * i]).collect(),
                    mid: (0..m).map(|i| fine[2 * i + 1]).collect(),
                    right: (0..m).map(|i| fine[2 * i + 2]).collect(),
                }
            }
        }
    }
}

/// Substep count per grid interval keeping the phase advance `2|z|h` of
/// each substep at or below 1/4.
pub(crate) fn refinement_for(grid: &SpatialGrid, zmax: f64) -> usize {
    let phase = 2.0 * zmax.abs() * grid.spacing();
    let mut r = 1;
    while phase / (r as f64) > 0.25 {
        r *= 2;
    }
    r
}

/// Band-limited interpolation onto a grid `factor` times finer.
fn upsample(f: &[f64], factor: usize) -> Vec<f64> {
    let n = f.len();
    let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    let big = n * factor;
    let mut wide = vec![ZERO; big];
    for m in 0..n / 2 {
        wide[m] = buf[m];
    }
    for m in n / 2 + 1..n {
        wide[big - n + m] = buf[m];
    }
    // Split the Nyquist mode evenly to keep the interpolant real.
    wide[n / 2] = buf[n / 2] * 0.5;
    wide[big - n / 2] = buf[n / 2] * 0.5;
    fft_inverse(&mut wide);
    wide.iter().map(|v| v.re * factor as f64).collect()
}

pub(crate) struct StepSamples {
    pub refine: usize,
    pub left: Vec<f64>,
    pub mid: Vec<f64>,
    pub right: Vec<f64>,
}

/// Coefficient `p(x) = u(x) e^{2ixz}` at the three RK4 stage positions of each interval.
pub(crate) struct Phased {
    pub left: Vec<Complex64>,
    pub mid: Vec<Complex64>,
    pub right: Vec<Complex64>,
}

impl Phased {
    pub fn new(s: &StepSamples, grid: &SpatialGrid, z: f64) -> Self {
        let h = grid.spacing() / s.refine as f64;
        let x0 = grid.first();
        let cis = |x: f64, u: f64| {
            if u == 0.0 {
                ZERO
            } else {
                Complex64::from_polar(u, 2.0 * x * z)
            }
        };
        let m = s.left.len();
        let mut left = Vec::with_capacity(m);
        let mut mid = Vec::with_capacity(m);
        let mut right = Vec::with_capacity(m);
        for j in 0..m {
            let xa = x0 + j as f64 * h;
            left.push(cis(xa, s.left[j]));
            mid.push(cis(xa + 0.5 * h, s.mid[j]));
            right.push(cis(xa + h, s.right[j]));
        }
        Self { left, mid, right }
    }
}

#[inline]
fn rhs(p: Complex64, n: [Complex64; 2]) -> [Complex64; 2] {
    [p * n[1], p.conj() * n[0]]
}

#[inline]
fn axpy(n: [Complex64; 2], a: f64, k: [Complex64; 2]) -> [Complex64; 2] {
    [n[0] + k[0] * a, n[1] + k[1] * a]
}

/// One classical RK4 step of a column across an interval, forward (`h > 0`)
/// from the left end or backward (`h < 0`) from the right end.
#[inline]
pub(crate) fn rk4_column(pa: Complex64, pm: Complex64, pb: Complex64, n: [Complex64; 2], h: f64) -> [Complex64; 2] {
    let k1 = rhs(pa, n);
    let k2 = rhs(pm, axpy(n, 0.5 * h, k1));
    let k3 = rhs(pm, axpy(n, 0.5 * h, k2));
    let k4 = rhs(pb, axpy(n, h, k3));
    [
        n[0] + (k1[0] + (k2[0] + k3[0]) * 2.0 + k4[0]) * (h / 6.0),
        n[1] + (k1[1] + (k2[1] + k3[1]) * 2.0 + k4[1]) * (h / 6.0),
    ]
}

fn columns_to_mat(c0: [Complex64; 2], c1: [Complex64; 2]) -> Mat2 {
    [[c0[0], c1[0]], [c0[1], c1[1]]]
}

/// Forward sweep of `N⁻` from the left end; returns every node when `record`.
/// `h` is the substep and `every` the number of substeps per recorded node.
fn sweep_left(ph: &Phased, h: f64, every: usize) -> (Mat2, Vec<Mat2>) {
    let mut c0 = [ONE, ZERO];
    let mut c1 = [ZERO, ONE];
    let mut out = Vec::with_capacity(ph.left.len() / every + 1);
    out.push(mat2::identity());
    for j in 0..ph.left.len() {
        c0 = rk4_column(ph.left[j], ph.mid[j], ph.right[j], c0, h);
        c1 = rk4_column(ph.left[j], ph.mid[j], ph.right[j], c1, h);
        if (j + 1) % every == 0 {
            out.push(columns_to_mat(c0, c1));
        }
    }
    (columns_to_mat(c0, c1), out)
}

/// Backward sweep of `N⁺` from the right end.
fn sweep_right(ph: &Phased, h: f64, every: usize) -> Vec<Mat2> {
    let m = ph.left.len();
    let mut out = vec![mat2::identity(); m / every + 1];
    let mut c0 = [ONE, ZERO];
    let mut c1 = [ZERO, ONE];
    for j in (0..m).rev() {
        c0 = rk4_column(ph.right[j], ph.mid[j], ph.left[j], c0, -h);
        c1 = rk4_column(ph.right[j], ph.mid[j], ph.left[j], c1, -h);
        if j % every == 0 {
            out[j / every] = columns_to_mat(c0, c1);
        }
    }
    out
}

/// The forward sweep at doubled substep, with substep-end values as midpoints.
/// Compared with the fine sweep at the grid nodes it yields a Richardson
/// estimate of the integration error.
fn richardson(ph: &Phased, h: f64, every: usize, fine: &[Mat2]) -> f64 {
    let m = ph.left.len();
    let mut c0 = [ONE, ZERO];
    let mut c1 = [ZERO, ONE];
    let mut worst: f64 = 0.0;
    let mut j = 0;
    while j + 1 < m {
        let (pa, pm, pb) = (ph.left[j], ph.right[j], ph.right[j + 1]);
        c0 = rk4_column(pa, pm, pb, c0, 2.0 * h);
        c1 = rk4_column(pa, pm, pb, c1, 2.0 * h);
        j += 2;
        if j % every == 0 {
            let node = j / every;
            worst = worst.max(mat2::max_abs_diff(&fine[node], &columns_to_mat(c0, c1)) / 15.0);
        }
    }
    worst
}

fn undo_modification(n: &Mat2, x: f64, z: f64) -> Mat2 {
    let e = Complex64::from_polar(1.0, -x * z);
    let ec = e.conj();
    [[n[0][0] * e, n[0][1] * e], [n[1][0] * ec, n[1][1] * ec]]
}

/// Jost solutions at one spectral value.
#[derive(Debug, Clone)]
pub struct JostPair {
    pub z: f64,
    /// Ψ⁻ at every grid node, normalized at the left end.
    pub minus: Vec<Mat2>,
    /// Ψ⁺ at every grid node, normalized at the right end.
    pub plus: Vec<Mat2>,
    /// Richardson estimate of the integration error of Ψ⁻.
    pub residual: f64,
}

pub fn jost_solutions(u: &Potential, z: f64) -> Result<JostPair> {
    u.check_decay()?;
    let grid = u.grid();
    let refine = refinement_for(grid, z);
    let h = grid.spacing() / refine as f64;
    let ph = Phased::new(&u.step_samples(refine), grid, z);
    let (_, minus_n) = sweep_left(&ph, h, refine);
    let plus_n = sweep_right(&ph, h, refine);
    let residual = richardson(&ph, h, refine, &minus_n);
    let xs = grid.points();
    let minus = minus_n.iter().zip(&xs).map(|(n, &x)| undo_modification(n, x, z)).collect();
    let plus = plus_n.iter().zip(&xs).map(|(n, &x)| undo_modification(n, x, z)).collect();
    Ok(JostPair { z, minus, plus, residual })
}

/// `S(z) = [[a, b̆], [b, ă]]` on a spectral grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringMatrix {
    pub grid: SpectralGrid,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub a_breve: Vec<Complex64>,
    pub b_breve: Vec<Complex64>,
    /// max_z | |a|² − |b|² − 1 |
    pub unitarity_residual: f64,
    /// Largest Richardson error estimate over the z sweep.
    pub integration_error: f64,
}

impl ScatteringMatrix {
    pub fn identity(grid: SpectralGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            a: vec![ONE; n],
            b: vec![ZERO; n],
            a_breve: vec![ONE; n],
            b_breve: vec![ZERO; n],
            unitarity_residual: 0.0,
            integration_error: 0.0,
        }
    }

    pub fn unitarity_profile(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| (a.norm_sqr() - b.norm_sqr() - 1.0).abs()).collect()
    }
}

pub fn scattering_matrix(u: &Potential, zgrid: &SpectralGrid) -> Result<ScatteringMatrix> {
    u.check_decay()?;
    let grid = *u.grid();
    let zs = zgrid.points();
    let zmax = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let refine = refinement_for(&grid, zmax);
    let h = grid.spacing() / refine as f64;
    let steps = u.step_samples(refine);
    let rows: Vec<(Mat2, f64)> = zs
        .par_iter()
        .map(|&z| {
            let ph = Phased::new(&steps, &grid, z);
            let (end, fine) = sweep_left(&ph, h, refine);
            let err = richardson(&ph, h, refine, &fine);
            (mat2::inverse(&end), err)
        })
        .collect();
    let mut s = ScatteringMatrix::identity(*zgrid);
    let mut worst = (0.0, 0.0);
    for (k, (m, err)) in rows.iter().enumerate() {
        s.a[k] = m[0][0];
        s.b_breve[k] = m[0][1];
        s.b[k] = m[1][0];
        s.a_breve[k] = m[1][1];
        s.integration_error = s.integration_error.max(*err);
        let res = (m[0][0].norm_sqr() - m[1][0].norm_sqr() - 1.0).abs();
        if res > worst.0 {
            worst = (res, zs[k]);
        }
    }
    s.unitarity_residual = worst.0;
    if worst.0 > UNITARITY_LIMIT {
        return Err(Error::Unitarity { residual: worst.0, z: worst.1 });
    }
    Ok(s)
}

/// Reflection coefficient samples with their norm certificates.
///
/// Stored convention: `r = −conj(b̆/a) = −b/ă`. With it the jump matrix is
/// `[[1−|r|², −r̄e^{−2iθ}], [re^{2iθ}, 1]]`, the integrable evolution is
/// `r ↦ r e^{8itz³}`, and for small data `r(z) ≈ ∫ u(y) e^{−2iyz} dy`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReflectionCoefficient {
    pub grid: SpectralGrid,
    pub samples: Vec<Complex64>,
    pub rho: f64,
    pub h1_norm: WeightedNorm,
    pub h12_norm: WeightedNorm,
}

impl ReflectionCoefficient {
    pub fn from_samples(grid: SpectralGrid, samples: Vec<Complex64>) -> Result<Self> {
        let h1_norm = weighted_norm(&samples, &grid, 1, 0)?;
        let h12_norm = weighted_norm(&samples, &grid, 1, 2)?;
        let rho = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Self { grid, samples, rho, h1_norm, h12_norm })
    }

    pub fn zero(grid: SpectralGrid) -> Self {
        Self::from_samples(grid, vec![ZERO; grid.len()]).expect("zero samples are finite")
    }

    pub fn at(&self, z: f64) -> Result<Complex64> {
        Ok(interpolate(&self.samples, &self.grid, z, InterpMethod::Cubic)?.value)
    }

    pub fn l2_norm(&self) -> f64 {
        crate::numerics::l2_norm(&self.samples, &self.grid)
    }

    /// `‖z r‖₂`.
    pub fn z_weighted_l2(&self) -> f64 {
        let zr: Vec<Complex64> = self.samples.iter().zip(self.grid.points()).map(|(r, z)| r * z).collect();
        crate::numerics::l2_norm(&zr, &self.grid)
    }

    /// Interpolate onto another grid; zero outside the source support.
    pub fn resample(&self, to: &SpectralGrid) -> Result<Self> {
        Self::from_samples(*to, crate::numerics::resample(&self.samples, &self.grid, to))
    }

    /// Smallest symmetric window `|z| ≤ Z` outside which `|r| ≤ tol`.
    pub fn support(&self, tol: f64) -> f64 {
        self.samples
            .iter()
            .zip(self.grid.points())
            .filter(|(r, _)| r.norm() > tol)
            .map(|(_, z)| z.abs())
            .fold(0.0, f64::max)
    }
}

pub fn reflection_coefficient(s: &ScatteringMatrix) -> Result<ReflectionCoefficient> {
    let samples: Vec<Complex64> = s.b.iter().zip(&s.a_breve).map(|(b, ab)| -b / ab).collect();
    let r = ReflectionCoefficient::from_samples(s.grid, samples)?;
    if r.rho >= 1.0 {
        return Err(Error::RhoNotBelowOne { rho: r.rho });
    }
    Ok(r)
}

/// Convenience composition `u ↦ R(u)`.
pub fn direct_scattering(u: &Potential, zgrid: &SpectralGrid) -> Result<(ScatteringMatrix, ReflectionCoefficient)> {
    let s = scattering_matrix(u, zgrid)?;
    let r = reflection_coefficient(&s)?;
    Ok((s, r))
}

/// First column of the modified right Jost solution `N⁺` at every node,
/// for each z of `zs`. Only the stretch `[start, end)` of nodes is integrated;
/// the potential is taken as zero to the right of `end`.
pub fn right_first_columns(u: &Potential, zs: &[f64], start: usize, end: usize) -> Vec<Vec<[Complex64; 2]>> {
    let grid = *u.grid();
    let zmax = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let refine = refinement_for(&grid, zmax);
    let h = grid.spacing() / refine as f64;
    let steps = u.step_samples(refine);
    let x0 = grid.first();
    zs.par_iter()
        .map(|&z| {
            let cis = |x: f64, v: f64| if v == 0.0 { ZERO } else { Complex64::from_polar(v, 2.0 * x * z) };
            let mut col = [ONE, ZERO];
            let mut out = vec![col; end - start + 1];
            for i in (start * refine..end * refine).rev() {
                let xa = x0 + i as f64 * h;
                let pa = cis(xa, steps.left[i]);
                let pm = cis(xa + 0.5 * h, steps.mid[i]);
                let pb = cis(xa + h, steps.right[i]);
                col = rk4_column(pb, pm, pa, col, -h);
                if i % refine == 0 {
                    out[i / refine - start] = col;
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::UniformGrid;

    fn sech_potential(amp: f64) -> Potential {
        let g = UniformGrid::new(100.0, 4096).unwrap();
        Potential::from_fn(g, move |x| amp / x.cosh()).unwrap()
    }

    #[test]
    fn zero_potential_has_free_jost_solutions() {
        let g = UniformGrid::new(20.0, 256).unwrap();
        let u = Potential::zero(g);
        let jp = jost_solutions(&u, 1.3).unwrap();
        for (k, &x) in g.points().iter().enumerate() {
            let e = Complex64::from_polar(1.0, -x * 1.3);
            assert!((jp.minus[k][0][0] - e).norm() < 1e-14);
            assert!((jp.plus[k][1][1] - e.conj()).norm() < 1e-14);
            assert!(jp.minus[k][0][1].norm() < 1e-14);
        }
    }

    #[test]
    fn determinant_is_one() {
        let u = sech_potential(0.3);
        for &z in &[-2.0, 0.0, 0.7, 5.0] {
            let jp = jost_solutions(&u, z).unwrap();
            for m in jp.minus.iter().chain(&jp.plus).step_by(97) {
                assert!((mat2::det(m) - ONE).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn decay_gate_rejects_wide_data() {
        let g = UniformGrid::new(10.0, 256).unwrap();
        let u = Potential::from_fn(g, |x| 0.3 / x.cosh()).unwrap();
        assert!(matches!(jost_solutions(&u, 0.0), Err(Error::DecayGate { .. })));
    }

    #[test]
    fn sech_scattering_is_unitary_and_symmetric() {
        let u = sech_potential(0.3);
        let zg = UniformGrid::new(8.0, 256).unwrap();
        let (s, r) = direct_scattering(&u, &zg).unwrap();
        assert!(s.unitarity_residual < 1e-7);
        for k in 0..256 {
            assert!((s.b_breve[k] - s.b[k].conj()).norm() < 1e-14);
            let lhs = 1.0 - r.samples[k].norm_sqr();
            assert!((lhs - 1.0 / s.a[k].norm_sqr()).abs() <= s.unitarity_residual + 1e-14);
        }
        // r(−z) = conj r(z) for real potentials.
        for k in 1..128 {
            let (p, m) = (r.samples[128 + k], r.samples[128 - k]);
            assert!((p - m.conj()).norm() < 1e-12);
        }
        // tanh(Aπ) at z = 0.
        assert!((r.samples[128].re - (0.3 * std::f64::consts::PI).tanh()).abs() < 1e-8);
    }

    #[test]
    fn born_limit_matches_fourier_transform() {
        // For tiny data r(z) ≈ ∫ u e^{−2iyz} dy = π A sech(π z).
        let amp = 1e-6;
        let u = sech_potential(amp);
        let zg = UniformGrid::new(8.0, 64).unwrap();
        let (_, r) = direct_scattering(&u, &zg).unwrap();
        for (k, &z) in zg.points().iter().enumerate() {
            let exact = std::f64::consts::PI * amp / (std::f64::consts::PI * z).cosh();
            assert!((r.samples[k] - exact).norm() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn right_columns_match_full_jost() {
        let u = sech_potential(0.3);
        let n = u.grid().len();
        let cols = right_first_columns(&u, &[0.4], 0, n - 1);
        let jp = jost_solutions(&u, 0.4).unwrap();
        for j in (0..n).step_by(101) {
            let x = u.grid().point(j);
            let e = Complex64::from_polar(1.0, x * 0.4);
            assert!((cols[0][j][0] - jp.plus[j][0][0] * e).norm() < 1e-12);
        }
    }
}
