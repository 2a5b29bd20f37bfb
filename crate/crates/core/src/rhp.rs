//! Beals–Coifman solution of the Riemann–Hilbert problem and recovery of the
//! potential.
//!
//! With `θ = xz + 4tz³`, `w⁺ = [[0, 0], [re^{2iθ}, 0]]` and
//! `w⁻ = [[0, −r̄e^{−2iθ}], [0, 0]]`, the jump is `(I − w⁻)^{-1}(I + w⁺)` and
//! `μ = I + C⁺(μw⁻) + C⁻(μw⁺)`. Row by row, writing `α = w⁺₂₁`, `β = w⁻₁₂`:
//!
//! ```text
//! μ₁₁ = 1 + C⁻(α μ₁₂),  μ₁₂ = C⁺(β μ₁₁)
//! μ₂₁ = C⁻(α μ₂₂),      μ₂₂ = 1 + C⁺(β μ₂₁)
//! ```
//!
//! Eliminating the off-diagonal entry leaves `(I − K)μ₁₁ = 1` with
//! `K = C⁻ α C⁺ β`, whose spectrum lies in `[0, ρ²]`. The potential is
//! `u = 𝐔₂₁/π = −𝐔₁₂/π` with `𝐔 = ∫ μ(w⁺ + w⁻) dz`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cauchy::CauchyProjector;
use crate::error::{Error, Result};
use crate::krylov::gmres;
use crate::mat2::{Mat2, ONE, ZERO};
use crate::numerics::{l2_norm, SpatialGrid, SpectralGrid, UniformGrid};
use crate::scattering::{Potential, ReflectionCoefficient};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub x: f64,
    pub t: f64,
}

impl PhaseParams {
    pub fn new(x: f64, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite() && x.is_finite()) {
            return Err(Error::InvalidInput(format!("phase parameters x={x}, t={t}")));
        }
        Ok(Self { x, t })
    }

    pub fn theta(&self, z: f64) -> f64 {
        self.x * z + 4.0 * self.t * z * z * z
    }

    pub fn dtheta(&self, z: f64) -> f64 {
        self.x + 12.0 * self.t * z * z
    }

    /// `z₀ = √(−x/12t)` when `x < 0 < t`.
    pub fn stationary_point(&self) -> Option<f64> {
        (self.x < 0.0 && self.t > 0.0).then(|| (-self.x / (12.0 * self.t)).sqrt())
    }

    /// Largest |θ′| over `|z| ≤ s`.
    pub fn max_dtheta(&self, s: f64) -> f64 {
        self.x.abs().max(self.dtheta(s).abs())
    }
}

/// The strictly triangular factors: `w_plus` holds `(w⁺)₂₁ = re^{2iθ}` and
/// `w_minus` holds `(w⁻)₁₂ = −r̄e^{−2iθ}`.
#[derive(Debug, Clone)]
pub struct JumpFactorization {
    pub grid: SpectralGrid,
    pub w_plus: Vec<Complex64>,
    pub w_minus: Vec<Complex64>,
}

impl JumpFactorization {
    pub fn new(r: &[Complex64], grid: &SpectralGrid, p: PhaseParams) -> Self {
        let mut w_plus = Vec::with_capacity(r.len());
        let mut w_minus = Vec::with_capacity(r.len());
        for (rk, z) in r.iter().zip(grid.points()) {
            let e = Complex64::from_polar(1.0, 2.0 * p.theta(z));
            let a = rk * e;
            w_plus.push(a);
            w_minus.push(-a.conj());
        }
        Self { grid: *grid, w_plus, w_minus }
    }

    pub fn plus_matrix(&self, k: usize) -> Mat2 {
        [[ZERO, ZERO], [self.w_plus[k], ZERO]]
    }

    pub fn minus_matrix(&self, k: usize) -> Mat2 {
        [[ZERO, self.w_minus[k]], [ZERO, ZERO]]
    }

    pub fn sup_norm(&self) -> f64 {
        self.w_plus.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcOptions {
    /// Relative residual target for the reduced equation.
    pub tol: f64,
    pub neumann_max: usize,
    pub restart: usize,
    pub max_iter: usize,
    /// Solve the second row independently instead of using `μ₂₂ = conj μ₁₁`.
    pub both_rows: bool,
    /// Fraction of the Nyquist limit allowed for the phase `2θ′ dz`.
    pub nyquist_fraction: f64,
    /// |r| level below which the coefficient is treated as outside its support.
    pub support_tol: f64,
}

impl Default for BcOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            neumann_max: 30,
            restart: 60,
            max_iter: 600,
            both_rows: false,
            nyquist_fraction: 0.8,
            support_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    Trivial,
    Neumann,
    Krylov,
}

/// Grid size needed to resolve `e^{2iθ}` over the support of `r`.
pub fn required_points(grid: &SpectralGrid, support: f64, p: PhaseParams, fraction: f64) -> usize {
    let w = p.max_dtheta(support);
    if w == 0.0 {
        return 16;
    }
    let dz = fraction * PI / (2.0 * w);
    let n = (2.0 * grid.half_width() / dz).ceil() as usize;
    n.next_power_of_two().max(16)
}

pub fn check_nyquist(r: &ReflectionCoefficient, p: PhaseParams, opts: &BcOptions) -> Result<()> {
    let support = r.support(opts.support_tol);
    if support == 0.0 {
        return Ok(());
    }
    let required = required_points(&r.grid, support, p, opts.nyquist_fraction);
    if required > r.grid.len() {
        return Err(Error::Nyquist { x: p.x, t: p.t, required, available: r.grid.len() });
    }
    Ok(())
}

/// Row-1 unknowns and iteration bookkeeping.
struct Core {
    mu11: Vec<Complex64>,
    mu12: Vec<Complex64>,
    mu21: Vec<Complex64>,
    mu22: Vec<Complex64>,
    neumann: usize,
    krylov: usize,
    method: SolveMethod,
    history: Vec<f64>,
}

fn hadamard(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Solve `(I − K)φ = K(1)` where `K f = outer(first ∘ inner(second ∘ f))`.
fn solve_reduced<P, Q>(
    inner: P,
    outer: Q,
    first: &[Complex64],
    second: &[Complex64],
    opts: &BcOptions,
) -> Result<(Vec<Complex64>, usize, usize, SolveMethod, Vec<f64>)>
where
    P: Fn(&[Complex64]) -> Vec<Complex64>,
    Q: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = first.len();
    let k_apply = |f: &[Complex64]| outer(&hadamard(first, &inner(&hadamard(second, f))));
    let ones = vec![ONE; n];
    let rhs = k_apply(&ones);
    let rnorm = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if rnorm == 0.0 {
        return Ok((vec![ZERO; n], 0, 0, SolveMethod::Trivial, vec![0.0]));
    }
    let mut phi = vec![ZERO; n];
    let mut history = Vec::new();
    let mut neumann = 0;
    let mut prev = f64::INFINITY;
    while neumann < opts.neumann_max {
        let kp = k_apply(&phi);
        let next: Vec<Complex64> = rhs.iter().zip(&kp).map(|(a, b)| a + b).collect();
        let step = next.iter().zip(&phi).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / rnorm;
        phi = next;
        neumann += 1;
        history.push(step);
        if step < opts.tol {
            return Ok((phi, neumann, 0, SolveMethod::Neumann, history));
        }
        // Give up early when the observed contraction cannot reach tol in time.
        let q = step / prev;
        prev = step;
        if neumann >= 3 && q < 1.0 && step * q.powi((opts.neumann_max - neumann) as i32) > opts.tol {
            break;
        }
        if neumann >= 3 && q >= 1.0 {
            break;
        }
    }
    let out = gmres(
        |f: &[Complex64]| {
            let kf = k_apply(f);
            f.iter().zip(&kf).map(|(a, b)| a - b).collect()
        },
        &rhs,
        phi,
        opts.tol,
        opts.restart,
        opts.max_iter,
    );
    history.extend(out.history.iter().copied());
    if !out.converged {
        return Err(Error::NoConvergence { iterations: neumann + out.iterations, residual: out.residual, history });
    }
    Ok((out.x, neumann, out.iterations, SolveMethod::Krylov, history))
}

fn solve_core(proj: &CauchyProjector, alpha: &[Complex64], beta: &[Complex64], opts: &BcOptions) -> Result<Core> {
    let plus = |f: &[Complex64]| proj.plus(f);
    let minus = |f: &[Complex64]| proj.minus(f);
    let (phi1, n1, k1, m1, h1) = solve_reduced(plus, minus, alpha, beta, opts)?;
    let mu11: Vec<Complex64> = phi1.iter().map(|v| v + 1.0).collect();
    let mu12 = proj.plus(&hadamard(beta, &mu11));
    let (mu21, mu22, neumann, krylov) = if opts.both_rows {
        let (phi2, n2, k2, _, _) = solve_reduced(minus, plus, beta, alpha, opts)?;
        let mu22: Vec<Complex64> = phi2.iter().map(|v| v + 1.0).collect();
        let mu21 = proj.minus(&hadamard(alpha, &mu22));
        (mu21, mu22, n1 + n2, k1 + k2)
    } else {
        (mu12.iter().map(|v| v.conj()).collect(), mu11.iter().map(|v| v.conj()).collect(), n1, k1)
    };
    Ok(Core { mu11, mu12, mu21, mu22, neumann, krylov, method: m1, history: h1 })
}

/// `‖(1 − C_w)μ − I‖₂` over all four entries.
fn full_residual(proj: &CauchyProjector, alpha: &[Complex64], beta: &[Complex64], c: &Core) -> f64 {
    let g = proj.grid();
    let e11: Vec<Complex64> =
        c.mu11.iter().zip(proj.minus(&hadamard(alpha, &c.mu12))).map(|(m, v)| m - 1.0 - v).collect();
    let e12: Vec<Complex64> = c.mu12.iter().zip(proj.plus(&hadamard(beta, &c.mu11))).map(|(m, v)| m - v).collect();
    let e21: Vec<Complex64> = c.mu21.iter().zip(proj.minus(&hadamard(alpha, &c.mu22))).map(|(m, v)| m - v).collect();
    let e22: Vec<Complex64> =
        c.mu22.iter().zip(proj.plus(&hadamard(beta, &c.mu21))).map(|(m, v)| m - 1.0 - v).collect();
    [e11, e12, e21, e22].iter().map(|e| l2_norm(e, g).powi(2)).sum::<f64>().sqrt()
}

/// `𝐔 = ∫ μ(w⁺ + w⁻) dz` and a truncation estimate from the outer 5% of the grid.
fn u_matrix(grid: &SpectralGrid, alpha: &[Complex64], beta: &[Complex64], c: &Core) -> (Mat2, f64) {
    let dz = grid.spacing();
    let sum = |f: &[Complex64], w: &[Complex64]| f.iter().zip(w).map(|(a, b)| a * b).sum::<Complex64>() * dz;
    let m = [[sum(&c.mu12, alpha), sum(&c.mu11, beta)], [sum(&c.mu22, alpha), sum(&c.mu21, beta)]];
    let tail: f64 = grid.outer_indices(0.05).map(|j| (c.mu22[j] * alpha[j]).norm()).sum::<f64>() * dz;
    (m, tail)
}

#[derive(Debug, Clone)]
pub struct BealsCoifmanSolution {
    pub params: PhaseParams,
    pub jump: JumpFactorization,
    pub mu: Vec<Mat2>,
    pub m_plus: Vec<Mat2>,
    pub m_minus: Vec<Mat2>,
    pub residual: f64,
    pub neumann_iterations: usize,
    pub krylov_iterations: usize,
    pub method: SolveMethod,
    pub history: Vec<f64>,
    /// `∫ μ(w⁺ + w⁻) dz`.
    pub u_matrix: Mat2,
    pub tail_estimate: f64,
}

impl BealsCoifmanSolution {
    pub fn grid(&self) -> &SpectralGrid {
        &self.jump.grid
    }

    /// `u` from the (2,1) entry of `𝐔`, with its imaginary part.
    pub fn potential_21(&self) -> Complex64 {
        self.u_matrix[1][0] / PI
    }

    /// `u` from the (1,2) entry of `𝐔`.
    pub fn potential_12(&self) -> Complex64 {
        -self.u_matrix[0][1] / PI
    }

    /// `m₂₁(λ)` for `λ` off the real axis from the Cauchy integral representation.
    pub fn m21_at(&self, lambda: Complex64) -> Complex64 {
        let g = self.grid();
        let dz = g.spacing();
        let s: Complex64 = g
            .points()
            .iter()
            .zip(&self.mu)
            .zip(&self.jump.w_plus)
            .map(|((&z, mu), a)| mu[1][1] * a / (z - lambda))
            .sum();
        s * dz / Complex64::new(0.0, 2.0 * PI)
    }
}

pub fn solve_beals_coifman(r: &ReflectionCoefficient, p: PhaseParams, opts: &BcOptions) -> Result<BealsCoifmanSolution> {
    if r.rho >= 1.0 {
        return Err(Error::RhoNotBelowOne { rho: r.rho });
    }
    check_nyquist(r, p, opts)?;
    let proj = CauchyProjector::new(r.grid);
    let jump = JumpFactorization::new(&r.samples, &r.grid, p);
    let core = solve_core(&proj, &jump.w_plus, &jump.w_minus, opts)?;
    let residual = full_residual(&proj, &jump.w_plus, &jump.w_minus, &core);
    let (u_matrix, tail_estimate) = u_matrix(&r.grid, &jump.w_plus, &jump.w_minus, &core);
    let n = r.grid.len();
    let mut mu = Vec::with_capacity(n);
    let mut m_plus = Vec::with_capacity(n);
    let mut m_minus = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = (jump.w_plus[k], jump.w_minus[k]);
        let m = [[core.mu11[k], core.mu12[k]], [core.mu21[k], core.mu22[k]]];
        m_plus.push([[m[0][0] + m[0][1] * a, m[0][1]], [m[1][0] + m[1][1] * a, m[1][1]]]);
        m_minus.push([[m[0][0], m[0][1] - m[0][0] * b], [m[1][0], m[1][1] - m[1][0] * b]]);
        mu.push(m);
    }
    Ok(BealsCoifmanSolution {
        params: p,
        jump,
        mu,
        m_plus,
        m_minus,
        residual,
        neumann_iterations: core.neumann,
        krylov_iterations: core.krylov,
        method: core.method,
        history: core.history,
        u_matrix,
        tail_estimate,
    })
}

/// `u = −2i lim_{z→∞} z m₂₁(z)`, evaluated along `z = iY` for a geometric
/// sequence of `Y` and Richardson-extrapolated in `1/Y`.
pub fn m21_limit_reconstruct(sol: &BealsCoifmanSolution) -> f64 {
    let y0 = 16.0 * sol.grid().half_width();
    let levels: usize = 6;
    let mut table: Vec<Complex64> = (0..levels)
        .map(|k| {
            let y = y0 * 2f64.powi(k as i32);
            let lambda = Complex64::new(0.0, y);
            Complex64::new(0.0, -2.0) * lambda * sol.m21_at(lambda)
        })
        .collect();
    for order in 1..levels {
        let f = 2f64.powi(order as i32);
        for k in 0..levels - order {
            table[k] = (f * table[k + 1] - table[k]) / (f - 1.0);
        }
    }
    table[0].re
}

/// How the spectral grid for each solve is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridPolicy {
    /// Solve on the coefficient's own grid; refuse when under-resolved.
    Exact,
    /// Crop to where |r| exceeds `support_tol` and refine as the phase demands.
    Adaptive { support_tol: f64 },
}

struct Plan {
    grid: SpectralGrid,
    r: Vec<Complex64>,
    proj: CauchyProjector,
}

/// Native-spacing window covering the support of `r` with a margin. Its
/// nodes are a subset of the coefficient's own nodes.
fn cropped_points(r: &ReflectionCoefficient, support_tol: f64) -> usize {
    let n0 = r.grid.len();
    let dz = r.grid.spacing();
    let zh = r.support(support_tol) + 4.0 * dz;
    let m = ((2.0 * zh / dz).ceil() as usize).next_power_of_two().max(16);
    if m >= n0 {
        n0
    } else {
        m
    }
}

fn plans_for(r: &ReflectionCoefficient, t: f64, xs: &[f64], policy: GridPolicy, opts: &BcOptions) -> Result<(Vec<usize>, BTreeMap<usize, Plan>)> {
    match policy {
        GridPolicy::Exact => {
            for &x in xs {
                check_nyquist(r, PhaseParams::new(x, t)?, opts)?;
            }
            let n = r.grid.len();
            let mut m = BTreeMap::new();
            m.insert(n, Plan { grid: r.grid, r: r.samples.clone(), proj: CauchyProjector::new(r.grid) });
            Ok((vec![n; xs.len()], m))
        }
        GridPolicy::Adaptive { support_tol } => {
            let m = cropped_points(r, support_tol);
            let zh = 0.5 * m as f64 * r.grid.spacing();
            let probe = UniformGrid::new(zh, m)?;
            // Refine by powers of two so the native nodes stay on the grid.
            let sizes: Vec<usize> = xs
                .iter()
                .map(|&x| {
                    let need = required_points(&probe, r.support(support_tol), PhaseParams { x, t }, opts.nyquist_fraction);
                    let mut n = m;
                    while n < need {
                        n *= 2;
                    }
                    n
                })
                .collect();
            let mut m = BTreeMap::new();
            for &n in &sizes {
                if let std::collections::btree_map::Entry::Vacant(e) = m.entry(n) {
                    let grid = UniformGrid::new(zh, n)?;
                    let rs = crate::numerics::resample(&r.samples, &r.grid, &grid);
                    e.insert(Plan { grid, r: rs, proj: CauchyProjector::new(grid) });
                }
            }
            Ok((sizes, m))
        }
    }
}

/// Per-point output of the inverse map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointValue {
    pub x: f64,
    pub u: f64,
    pub imag: f64,
    /// `u` from the (1,2) entry, for the symmetry cross-check.
    pub u12: f64,
    pub residual: f64,
    pub iterations: usize,
    pub grid_points: usize,
}

fn solve_point(plan: &Plan, x: f64, t: f64, opts: &BcOptions) -> Result<PointValue> {
    let p = PhaseParams { x, t };
    let jump = JumpFactorization::new(&plan.r, &plan.grid, p);
    let core = solve_core(&plan.proj, &jump.w_plus, &jump.w_minus, opts)?;
    let residual = full_residual(&plan.proj, &jump.w_plus, &jump.w_minus, &core);
    let (um, _) = u_matrix(&plan.grid, &jump.w_plus, &jump.w_minus, &core);
    let u21 = um[1][0] / PI;
    let u12 = -um[0][1] / PI;
    Ok(PointValue {
        x,
        u: u21.re,
        imag: u21.im,
        u12: u12.re,
        residual,
        iterations: core.neumann + core.krylov,
        grid_points: plan.grid.len(),
    })
}

/// Inverse map at arbitrary positions.
pub fn reconstruct_points(r: &ReflectionCoefficient, t: f64, xs: &[f64], policy: GridPolicy, opts: &BcOptions) -> Result<Vec<PointValue>> {
    if r.rho >= 1.0 {
        return Err(Error::RhoNotBelowOne { rho: r.rho });
    }
    if r.rho == 0.0 {
        return Ok(xs
            .iter()
            .map(|&x| PointValue { x, u: 0.0, imag: 0.0, u12: 0.0, residual: 0.0, iterations: 0, grid_points: 0 })
            .collect());
    }
    let (sizes, plans) = plans_for(r, t, xs, policy, opts)?;
    xs.par_iter()
        .zip(sizes.par_iter())
        .map(|(&x, n)| {
            solve_point(&plans[n], x, t, opts).map_err(|e| Error::AtPosition { x, source: Box::new(e) })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub potential: Potential,
    pub points: Vec<PointValue>,
    pub max_imag: f64,
    /// max |u₂₁ − u₁₂|
    pub symmetry_gap: f64,
    pub max_residual: f64,
}

/// Reality tolerance on the reconstructed potential.
pub const REALITY_LIMIT: f64 = 1e-6;

/// `R⁻¹` at time `t`: the potential on every node of `xs`.
pub fn reconstruct_potential(r: &ReflectionCoefficient, t: f64, xs: &SpatialGrid, policy: GridPolicy, opts: &BcOptions) -> Result<Reconstruction> {
    let points = reconstruct_points(r, t, &xs.points(), policy, opts)?;
    let max_imag = points.iter().map(|p| p.imag.abs()).fold(0.0, f64::max);
    if max_imag > REALITY_LIMIT {
        return Err(Error::Reality(max_imag));
    }
    let symmetry_gap = points.iter().map(|p| (p.u - p.u12).abs()).fold(0.0, f64::max);
    let max_residual = points.iter().map(|p| p.residual).fold(0.0, f64::max);
    let potential = Potential::from_samples(*xs, points.iter().map(|p| p.u).collect())?;
    Ok(Reconstruction { potential, points, max_imag, symmetry_gap, max_residual })
}

/// Solve at every `x` and hand the first column `(μ₁₁, μ₂₁)` to `f` together
/// with the grid it lives on. Nothing but `f`'s output is kept.
pub(crate) fn map_first_columns<T, F>(r: &ReflectionCoefficient, t: f64, xs: &[f64], policy: GridPolicy, opts: &BcOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &SpectralGrid, &[Complex64], &[Complex64]) -> T + Sync,
{
    if r.rho >= 1.0 {
        return Err(Error::RhoNotBelowOne { rho: r.rho });
    }
    let (sizes, plans) = plans_for(r, t, xs, policy, opts)?;
    xs.par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let plan = &plans[&sizes[i]];
            let jump = JumpFactorization::new(&plan.r, &plan.grid, PhaseParams { x, t });
            let core = solve_core(&plan.proj, &jump.w_plus, &jump.w_minus, opts).map_err(|e| Error::AtPosition { x, source: Box::new(e) })?;
            Ok(f(i, &plan.grid, &core.mu11, &core.mu21))
        })
        .collect()
}

/// Apply the row operator `(f₁, f₂) ↦ (f₁ − C⁻(α f₂), f₂ − C⁺(β f₁))`.
fn row_operator(proj: &CauchyProjector, alpha: &[Complex64], beta: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let n = alpha.len();
    let (f1, f2) = v.split_at(n);
    let a = proj.minus(&hadamard(alpha, f2));
    let b = proj.plus(&hadamard(beta, f1));
    let mut out = Vec::with_capacity(2 * n);
    out.extend(f1.iter().zip(&a).map(|(x, y)| x - y));
    out.extend(f2.iter().zip(&b).map(|(x, y)| x - y));
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventAudit {
    pub x: f64,
    pub t: f64,
    pub rho: f64,
    pub bound: f64,
    /// ‖(1 − C_w)^{-1} g‖₂ / ‖g‖₂ per random input.
    pub l2_responses: Vec<f64>,
    /// The same ratio measured in L⁴.
    pub l4_responses: Vec<f64>,
}

impl ResolventAudit {
    pub fn max_l2(&self) -> f64 {
        self.l2_responses.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_l4(&self) -> f64 {
        self.l4_responses.iter().copied().fold(0.0, f64::max)
    }

    pub fn within(&self, slack: f64) -> bool {
        self.max_l2() <= self.bound * (1.0 + slack)
    }
}

fn lp(v: &[Complex64], p: f64, dz: f64) -> f64 {
    (v.iter().map(|c| c.norm().powf(p)).sum::<f64>() * dz).powf(1.0 / p)
}

/// Measured response of `(1 − C_w)^{-1}` on random smooth inputs.
pub fn resolvent_audit(r: &ReflectionCoefficient, p: PhaseParams, inputs: usize, seed: u64, opts: &BcOptions) -> Result<ResolventAudit> {
    check_nyquist(r, p, opts)?;
    let proj = CauchyProjector::new(r.grid);
    let jump = JumpFactorization::new(&r.samples, &r.grid, p);
    let n = r.grid.len();
    let dz = r.grid.spacing();
    let zs = r.grid.points();
    let zh = r.grid.half_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l2 = Vec::with_capacity(inputs);
    let mut l4 = Vec::with_capacity(inputs);
    for _ in 0..inputs {
        let mut g = vec![ZERO; 2 * n];
        for _ in 0..6 {
            let row = rng.gen_range(0..2);
            let c = rng.gen_range(-0.6 * zh..0.6 * zh);
            let w = rng.gen_range(0.2..1.5);
            let om = rng.gen_range(-10.0..10.0);
            let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for (k, &z) in zs.iter().enumerate() {
                let env = (-((z - c) / w).powi(2)).exp();
                g[row * n + k] += amp * Complex64::from_polar(env, om * z);
            }
        }
        let out = gmres(|v: &[Complex64]| row_operator(&proj, &jump.w_plus, &jump.w_minus, v), &g, vec![ZERO; 2 * n], 1e-12, opts.restart, opts.max_iter);
        if !out.converged {
            return Err(Error::NoConvergence { iterations: out.iterations, residual: out.residual, history: out.history });
        }
        l2.push(lp(&out.x, 2.0, dz) / lp(&g, 2.0, dz));
        l4.push(lp(&out.x, 4.0, dz) / lp(&g, 4.0, dz));
    }
    Ok(ResolventAudit { x: p.x, t: p.t, rho: r.rho, bound: 1.0 / (1.0 - r.rho), l2_responses: l2, l4_responses: l4 })
}
