//! Leading-order long-time asymptotics of the defocusing mKdV solution in
//! the five regions of the (x, t) half-plane.
//!
//! With `z₀ = √(|x|/12t)` and `τ = z₀³t`, and a threshold `M > 1`:
//!
//! * I: `x < 0`, `1/M < z₀ < M`, `τ > M` (oscillatory, cosine formula)
//! * II: `x < 0`, `τ ≥ 1/M`
//! * III: `τ ≤ M`
//! * IV: `x > 0`, `z₀ ≤ 1/M`, `τ > M`
//! * V: `x > 0`, `z₀ > 1/M`, `τ > M` (decays like `1/t`)
//!
//! Overlaps are resolved by the priority I > II > III > IV > V. Regions II–IV
//! use the self-similar Painlevé II profile `(3t)^{−1/3}P(x/(3t)^{1/3})`.
//!
//! The cosine formula is written for a coefficient that differs from the one
//! stored here by a constant phase: it uses `−i·r`. In the small-data limit
//! this reproduces the stationary-phase evaluation of the Airy propagator.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scattering::ReflectionCoefficient;
use crate::special::{airy, arg_gamma_imag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    I,
    II,
    III,
    IV,
    V,
}

impl RegionLabel {
    pub fn name(&self) -> &'static str {
        match self {
            RegionLabel::I => "I",
            RegionLabel::II => "II",
            RegionLabel::III => "III",
            RegionLabel::IV => "IV",
            RegionLabel::V => "V",
        }
    }

    /// Exponent of t in the remainder of the leading term.
    pub fn budget_exponent(&self) -> f64 {
        match self {
            RegionLabel::I => -0.75,
            RegionLabel::II | RegionLabel::III | RegionLabel::IV => -0.5,
            RegionLabel::V => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub label: RegionLabel,
    pub z0: f64,
    pub tau: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 3.0;

pub fn classify_region(x: f64, t: f64, m: f64) -> Result<Region> {
    if !(t > 0.0 && t.is_finite()) || !x.is_finite() {
        return Err(Error::InvalidInput(format!("classify_region needs t > 0, got x={x}, t={t}")));
    }
    if !(m > 1.0) {
        return Err(Error::InvalidInput(format!("threshold M = {m} must exceed 1")));
    }
    let z0 = (x.abs() / (12.0 * t)).sqrt();
    let tau = z0 * z0 * z0 * t;
    let label = if x < 0.0 && z0 > 1.0 / m && z0 < m && tau > m {
        RegionLabel::I
    } else if x < 0.0 && tau >= 1.0 / m {
        RegionLabel::II
    } else if tau <= m {
        RegionLabel::III
    } else if z0 <= 1.0 / m {
        RegionLabel::IV
    } else {
        RegionLabel::V
    };
    Ok(Region { label, z0, tau })
}

/// `κ = −(1/2π) log(1 − |r(z₀)|²)`.
pub fn kappa(r: &ReflectionCoefficient, z0: f64) -> Result<f64> {
    kappa_from_modulus(r.at(z0)?.norm())
}

pub fn kappa_from_modulus(a: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::RhoNotBelowOne { rho: a });
    }
    Ok(-(-a * a).ln_1p() / (2.0 * PI))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_a^b f` on panels graded quadratically toward `b`.
pub fn graded_integral(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (gx, gw) = gauss_legendre(order);
    let edge = |k: usize| b - (b - a) * (1.0 - k as f64 / panels as f64).powi(2);
    (0..panels)
        .map(|k| {
            let (lo, hi) = (edge(k), edge(k + 1));
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            gx.iter().zip(&gw).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseValue {
    pub phi: f64,
    /// The `(1/π)∫ log(...) dζ/(ζ − z₀)` part of φ.
    pub integral: f64,
    pub error_estimate: f64,
}

/// Demanded accuracy of the φ integral.
pub const PHASE_TOL: f64 = 1e-4;

/// φ(z₀) for the cosine formula, with the coefficient in the formula's
/// convention (`−i·r`).
pub fn phase_phi(r: &ReflectionCoefficient, z0: f64, kappa: f64) -> Result<PhaseValue> {
    if !(z0 > 0.0) {
        return Err(Error::InvalidInput(format!("z0 = {z0} must be positive")));
    }
    if z0 >= r.grid.half_width() {
        return Err(Error::Extrapolation { point: z0, lo: -r.grid.half_width(), hi: r.grid.half_width() });
    }
    let r0 = r.at(z0)?;
    let denom = (-r0.norm_sqr()).ln_1p();
    let integrand = |zeta: f64| -> f64 {
        let d = zeta - z0;
        if d == 0.0 {
            return 0.0;
        }
        let m = r.at(zeta).map(|v| v.norm_sqr()).unwrap_or(0.0);
        ((-m).ln_1p() - denom) / d
    };
    let mut panels = 16;
    let mut prev = graded_integral(&integrand, -z0, z0, panels, 8);
    loop {
        panels *= 2;
        let next = graded_integral(&integrand, -z0, z0, panels, 8);
        let err = (next - prev).abs() / PI;
        if err <= PHASE_TOL * 1e-2 || panels >= 4096 {
            if err > PHASE_TOL {
                return Err(Error::NoConvergence { iterations: panels, residual: err, history: vec![] });
            }
            let integral = next / PI;
            let arg_r = (Complex64::new(0.0, -1.0) * r0).arg();
            let phi = if kappa == 0.0 { 0.0 } else { arg_gamma_imag(kappa) } - PI / 4.0 - arg_r + integral;
            return Ok(PhaseValue { phi, integral, error_estimate: err });
        }
        prev = next;
    }
}

/// Ablowitz–Segur solution of `P'' = sP + 2P³` with `P ~ k·Ai(s)` as `s → +∞`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PainleveProfile {
    pub k: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub h: f64,
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    /// max |P'' − sP − 2P³| with P'' from fourth-order differences of the samples.
    pub residual: f64,
}

impl PainleveProfile {
    pub fn zero(s_min: f64, s_max: f64) -> Self {
        Self { k: 0.0, s_min, s_max, h: s_max - s_min, p: vec![0.0; 2], dp: vec![0.0; 2], residual: 0.0 }
    }

    pub fn s(&self, j: usize) -> f64 {
        self.s_min + j as f64 * self.h
    }

    /// `P(s)`; beyond `s_max` the Airy tail `k·Ai(s)` is used.
    pub fn eval(&self, s: f64) -> Option<f64> {
        if s > self.s_max {
            return Some(self.k * airy(s).0);
        }
        if s < self.s_min {
            return None;
        }
        let n = self.p.len() - 1;
        let pos = ((s - self.s_min) / self.h).min(n as f64);
        let j = (pos.floor() as usize).min(n - 1);
        let u = pos - j as f64;
        // Cubic Hermite on (P, P').
        let (p0, p1, d0, d1) = (self.p[j], self.p[j + 1], self.dp[j] * self.h, self.dp[j + 1] * self.h);
        let u2 = u * u;
        let u3 = u2 * u;
        Some((2.0 * u3 - 3.0 * u2 + 1.0) * p0 + (u3 - 2.0 * u2 + u) * d0 + (-2.0 * u3 + 3.0 * u2) * p1 + (u3 - u2) * d1)
    }
}

const PAINLEVE_BLOWUP: f64 = 1e3;

/// Integrate from `s_max` down to `s_min` with RK4 from Airy data.
pub fn painleve_profile(k: f64, s_min: f64, s_max: f64) -> Result<PainleveProfile> {
    if !(s_min < s_max) {
        return Err(Error::InvalidInput(format!("empty s range [{s_min}, {s_max}]")));
    }
    if k == 0.0 {
        return Ok(PainleveProfile::zero(s_min, s_max));
    }
    let n = ((s_max - s_min) / 1e-3).ceil() as usize;
    let h = (s_max - s_min) / n as f64;
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    let (ai, aip) = airy(s_max);
    p[n] = k * ai;
    dp[n] = k * aip;
    let f = |s: f64, y: f64| s * y + 2.0 * y * y * y;
    for j in (0..n).rev() {
        let s = s_min + (j + 1) as f64 * h;
        let (y, v) = (p[j + 1], dp[j + 1]);
        let hh = -h;
        let k1y = v;
        let k1v = f(s, y);
        let k2y = v + 0.5 * hh * k1v;
        let k2v = f(s + 0.5 * hh, y + 0.5 * hh * k1y);
        let k3y = v + 0.5 * hh * k2v;
        let k3v = f(s + 0.5 * hh, y + 0.5 * hh * k2y);
        let k4y = v + hh * k3v;
        let k4v = f(s + hh, y + hh * k3y);
        p[j] = y + hh / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        dp[j] = v + hh / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !p[j].is_finite() || p[j].abs() > PAINLEVE_BLOWUP {
            return Err(Error::BlowUp(s + hh));
        }
    }
    let residual = (2..n - 1)
        .map(|j| {
            let s = s_min + j as f64 * h;
            let d2 = (-p[j + 2] + 16.0 * p[j + 1] - 30.0 * p[j] + 16.0 * p[j - 1] - p[j - 2]) / (12.0 * h * h);
            (d2 - s * p[j] - 2.0 * p[j].powi(3)).abs()
        })
        .fold(0.0, f64::max);
    Ok(PainleveProfile { k, s_min, s_max, h, p, dp, residual })
}

/// The Painlevé parameter used before calibration: in the small-data limit
/// the self-similar part of the Airy propagator is `r(0)·Ai`.
pub fn airy_multiplier_guess(r_at_zero: Complex64) -> f64 {
    r_at_zero.re
}

/// Least-squares calibration of `k` so that `(3t)^{−1/3}P_k(x/(3t)^{1/3})`
/// matches `samples` of `u(x, t)`. Golden-section search on `[lo, hi]`.
pub fn calibrate_multiplier(samples: &[(f64, f64)], t: f64, lo: f64, hi: f64, s_min: f64, s_max: f64) -> Result<(f64, f64)> {
    let scale = (3.0 * t).cbrt();
    let cost = |k: f64| -> f64 {
        match painleve_profile(k, s_min, s_max) {
            Ok(p) => samples
                .iter()
                .map(|&(x, u)| p.eval(x / scale).map_or(f64::INFINITY, |v| (u - v / scale).powi(2)))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
        if (b - a).abs() < 1e-10 {
            break;
        }
    }
    let k = 0.5 * (a + b);
    let rms = (cost(k) / samples.len().max(1) as f64).sqrt();
    if !rms.is_finite() {
        return Err(Error::Gate(format!("calibration failed in [{lo}, {hi}]")));
    }
    Ok((k, rms))
}

/// Minimum `z₀t` (region I) or `t` (regions II–IV) for the leading term to
/// be reported as in-regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityFloor {
    pub oscillatory: f64,
    pub self_similar: f64,
}

impl Default for ValidityFloor {
    fn default() -> Self {
        Self { oscillatory: 10.0, self_similar: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticProfile {
    pub x: f64,
    pub t: f64,
    pub region: Region,
    pub u_asymptotic: f64,
    pub error_budget_exponent: f64,
    pub in_regime: bool,
}

/// Evaluator holding the coefficient and the Painlevé profile.
#[derive(Debug, Clone)]
pub struct AsymptoticEvaluator {
    pub r: ReflectionCoefficient,
    pub threshold: f64,
    pub painleve: PainleveProfile,
    pub floor: ValidityFloor,
}

impl AsymptoticEvaluator {
    pub fn new(r: ReflectionCoefficient, threshold: f64, painleve: PainleveProfile) -> Self {
        Self { r, threshold, painleve, floor: ValidityFloor::default() }
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<AsymptoticProfile> {
        asymptotic_eval(&self.r, x, t, self.threshold, &self.painleve, &self.floor)
    }
}

/// Region I leading term `√(κ/3tz₀) cos(16tz₀³ − κ log(192tz₀³) + φ(z₀))`.
pub fn oscillatory_term(r: &ReflectionCoefficient, z0: f64, t: f64) -> Result<f64> {
    let k = kappa(r, z0)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    let phi = phase_phi(r, z0, k)?.phi;
    let tau = t * z0 * z0 * z0;
    Ok((k / (3.0 * t * z0)).sqrt() * (16.0 * tau - k * (192.0 * tau).ln() + phi).cos())
}

pub fn asymptotic_eval(r: &ReflectionCoefficient, x: f64, t: f64, m: f64, painleve: &PainleveProfile, floor: &ValidityFloor) -> Result<AsymptoticProfile> {
    let region = classify_region(x, t, m)?;
    let budget = region.label.budget_exponent();
    let (value, in_regime) = match region.label {
        RegionLabel::I => (oscillatory_term(r, region.z0, t)?, region.z0 * t >= floor.oscillatory),
        RegionLabel::V => (0.0, true),
        _ => {
            let scale = (3.0 * t).cbrt();
            match painleve.eval(x / scale) {
                Some(p) => (p / scale, t >= floor.self_similar),
                None => (0.0, false),
            }
        }
    };
    Ok(AsymptoticProfile { x, t, region, u_asymptotic: value, error_budget_exponent: budget, in_regime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::UniformGrid;

    #[test]
    fn region_examples() {
        assert_eq!(classify_region(-1200.0, 100.0, 3.0).unwrap().label, RegionLabel::I);
        assert_eq!(classify_region(0.0, 100.0, 3.0).unwrap().label, RegionLabel::III);
        assert_eq!(classify_region(1200.0, 100.0, 3.0).unwrap().label, RegionLabel::V);
        assert_eq!(classify_region(3.0, 1000.0, 3.0).unwrap().label, RegionLabel::III);
        assert!(classify_region(1.0, 0.0, 3.0).is_err());
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa_from_modulus(0.0).unwrap(), 0.0);
        let a = (1.0 - (-2.0 * PI).exp()).sqrt();
        assert!((kappa_from_modulus(a).unwrap() - 1.0).abs() < 1e-12);
        assert!((kappa_from_modulus(0.3).unwrap() + 0.91f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert!(kappa_from_modulus(1.0).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn constant_modulus_gives_no_integral() {
        let g = UniformGrid::new(8.0, 256).unwrap();
        let s = vec![Complex64::from_polar(0.4, 0.7); 256];
        let r = ReflectionCoefficient::from_samples(g, s).unwrap();
        let k = kappa(&r, 1.0).unwrap();
        let p = phase_phi(&r, 1.0, k).unwrap();
        assert!(p.integral.abs() < 1e-10);
        let arg = (Complex64::new(0.0, -1.0) * r.at(1.0).unwrap()).arg();
        assert!((p.phi - (arg_gamma_imag(k) - PI / 4.0 - arg)).abs() < 1e-10);
    }

    #[test]
    fn painleve_small_k_is_airy() {
        let p = painleve_profile(0.1, -6.0, 8.0).unwrap();
        assert!(p.residual < 1e-6, "{}", p.residual);
        let mut s = 2.0;
        while s <= 8.0 {
            let a = 0.1 * airy(s).0;
            assert!((p.eval(s).unwrap() - a).abs() <= 0.05 * a.abs(), "s={s}");
            s += 0.25;
        }
        let z = painleve_profile(0.0, -6.0, 8.0).unwrap();
        assert_eq!(z.eval(-3.0), Some(0.0));
    }

    #[test]
    fn painleve_residual_for_larger_k() {
        for k in [0.3, 0.7, 0.95] {
            let p = painleve_profile(k, -6.0, 8.0).unwrap();
            assert!(p.residual < 1e-6, "k={k}: {}", p.residual);
        }
    }

    #[test]
    fn zero_coefficient_gives_zero_everywhere() {
        let g = UniformGrid::new(8.0, 256).unwrap();
        let r = ReflectionCoefficient::zero(g);
        let p = PainleveProfile::zero(-6.0, 8.0);
        for (x, t) in [(-1200.0, 100.0), (0.0, 100.0), (1200.0, 100.0), (-5.0, 100.0), (5.0, 1.0)] {
            let a = asymptotic_eval(&r, x, t, 3.0, &p, &ValidityFloor::default()).unwrap();
            assert_eq!(a.u_asymptotic, 0.0);
        }
        let v = asymptotic_eval(&r, 1200.0, 100.0, 3.0, &p, &ValidityFloor::default()).unwrap();
        assert_eq!(v.error_budget_exponent, -1.0);
    }
}
