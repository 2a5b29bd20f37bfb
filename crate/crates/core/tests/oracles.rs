//! Independent oracles for the numerical building blocks.

use std::f64::consts::PI;

use mkdv_ist::asymptotics::{classify_region, kappa, kappa_from_modulus, oscillatory_term, phase_phi, RegionLabel};
use mkdv_ist::campaign::{band_pass_inputs, projection_residuals};
use mkdv_ist::flow::{leading_kernel, perturbed_flow_step, FlowContext, FlowGates, FlowState, KernelBackend, PerturbationSpec, TrajectorySource};
use mkdv_ist::mat2::{self, Mat2};
use mkdv_ist::numerics::{l2_norm, UniformGrid};
use mkdv_ist::scattering::{direct_scattering, Potential, ReflectionCoefficient};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `e^{sA}` for `A = [[−iz, c], [c, iz]]`, using `A² = (c² − z²)I`.
fn box_propagator(c: f64, z: f64, s: f64) -> Mat2 {
    let q = Complex64::new(c * c - z * z, 0.0).sqrt();
    let (ch, sh) = if q.norm() < 1e-12 { (Complex64::new(1.0, 0.0), Complex64::new(s, 0.0)) } else { ((q * s).cosh(), (q * s).sinh() / q) };
    [[ch - I * z * sh, c * sh], [c * sh, ch + I * z * sh]]
}

fn diag_phase(w: f64, z: f64) -> Mat2 {
    let e = Complex64::from_polar(1.0, w * z);
    [[e, Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), e.conj()]]
}

#[test]
fn box_potential_matches_matrix_exponential() {
    let (c, w) = (0.4, 1.0);
    let xg = UniformGrid::new(16.0, 4096).unwrap();
    let u = Potential::from_fn(xg, move |x| if x.abs() < w { c } else { 0.0 }).unwrap();
    let zg = UniformGrid::new(4.0, 64).unwrap();
    let (s, r) = direct_scattering(&u, &zg).unwrap();
    for (k, &z) in zg.points().iter().enumerate() {
        // N⁻ is constant to the right of the box: e^{iwzσ} e^{2wA} e^{iwzσ}.
        let d = diag_phase(w, z);
        let exact = mat2::inverse(&mat2::mul(&mat2::mul(&d, &box_propagator(c, z, 2.0 * w)), &d));
        assert!((s.a[k] - exact[0][0]).norm() < 1e-8, "a at z={z}: {} vs {}; b {} vs {}", s.a[k], exact[0][0], s.b[k], exact[1][0]);
        assert!((s.b[k] - exact[1][0]).norm() < 1e-8, "b at z={z}");
        let r_exact = -exact[1][0] / exact[1][1];
        assert!((r.samples[k] - r_exact).norm() < 1e-8, "r at z={z}");
    }
}

#[test]
fn leading_kernel_matches_closed_form() {
    // ∫ sech³y e^{−2iyz} dy = (π/2)(1 + 4z²) sech(πz).
    let amp = 0.3;
    let xg = UniformGrid::new(40.0, 2048).unwrap();
    let u = Potential::from_fn(xg, move |x| amp / x.cosh()).unwrap();
    let zg = UniformGrid::new(6.0, 128).unwrap();
    let t = 0.7;
    let k = leading_kernel(&u, t, 3, &zg);
    for (v, &z) in k.iter().zip(&zg.points()) {
        let exact = amp.powi(3) * 0.5 * PI * (1.0 + 4.0 * z * z) / (PI * z).cosh() * Complex64::from_polar(1.0, -8.0 * t * z * z * z);
        assert!((v - exact).norm() < 1e-8, "z={z}: {v} vs {exact}");
    }
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
}

#[test]
fn phase_integral_matches_adaptive_quadrature() {
    let profile = |z: f64| 0.6 * (-z * z).exp() * Complex64::from_polar(1.0, 0.3 * z);
    let zg = UniformGrid::new(8.0, 4096).unwrap();
    let r = ReflectionCoefficient::from_samples(zg, zg.points().iter().map(|&z| profile(z)).collect()).unwrap();
    for z0 in [0.3, 0.8, 1.5] {
        let k = kappa(&r, z0).unwrap();
        let got = phase_phi(&r, z0, k).unwrap();
        let log_mod = |z: f64| (-profile(z).norm_sqr()).ln_1p();
        let at = log_mod(z0);
        // Integrable log-type endpoint behaviour after subtraction; split
        // near z₀ so the recursion sees a smooth interior.
        let f = |zeta: f64| if zeta == z0 { 0.0 } else { (log_mod(zeta) - at) / (zeta - z0) };
        let exact = (simpson(&f, -z0, z0 - 1e-3, 1e-13) + simpson(&f, z0 - 1e-3, z0, 1e-14)) / PI;
        assert!((got.integral - exact).abs() < 1e-6, "z0={z0}: {} vs {exact}", got.integral);
        assert!(got.error_estimate < 1e-4);
    }
}

#[test]
fn projections_on_fifty_random_band_limited_inputs() {
    let zg = UniformGrid::new(8.0, 1024).unwrap();
    for seed in [1u64, 2, 3, 4, 5] {
        let inputs = band_pass_inputs(&zg, 10, seed, 25.0);
        let [plemelj, idem_p, idem_m] = projection_residuals(zg, &inputs);
        assert!(plemelj < 1e-12, "seed {seed}: {plemelj}");
        assert!(idem_p < 1e-8 && idem_m < 1e-8, "seed {seed}: {idem_p} {idem_m}");
    }
}

#[test]
fn every_point_gets_exactly_one_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..10_000 {
        let t = 10f64.powf(rng.gen_range(-2.0..3.0));
        let x = rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-2.0..4.0));
        let reg = classify_region(x, t, 3.0).unwrap();
        assert!(reg.z0 >= 0.0 && reg.tau >= 0.0);
        if reg.label == RegionLabel::I || reg.label == RegionLabel::II {
            assert!(x < 0.0);
        }
        seen.insert(reg.label);
    }
    assert_eq!(seen.len(), 5, "{seen:?}");
    assert!(classify_region(1.0, 0.0, 3.0).is_err());
    assert!(classify_region(1.0, 1.0, 1.0).is_err());
}

#[test]
fn region_one_term_respects_its_amplitude() {
    let zg = UniformGrid::new(8.0, 1024).unwrap();
    let r = ReflectionCoefficient::from_samples(zg, zg.points().iter().map(|&z| Complex64::new(0.0, 0.7 / (PI * z).cosh())).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let t = rng.gen_range(20.0..200.0);
        let z0 = rng.gen_range(0.4..2.5);
        let k = kappa(&r, z0).unwrap();
        let v = oscillatory_term(&r, z0, t).unwrap();
        assert!(v.abs() <= (k / (3.0 * t * z0)).sqrt() * (1.0 + 1e-12));
    }
}

#[test]
fn heun_step_departs_from_picard_at_second_order() {
    let xg = UniformGrid::new(24.0, 1024).unwrap();
    let u0 = Potential::from_fn(xg, |x| 0.3 / x.cosh()).unwrap();
    let u1 = Potential::from_fn(xg, |x| 0.28 / (x - 0.2).cosh()).unwrap();
    let zg = UniformGrid::new(8.0, 256).unwrap();
    let (_, r) = direct_scattering(&u0, &zg).unwrap();
    let src = TrajectorySource::new(vec![(0.0, u0), (0.1, u1)]).unwrap();
    let ctx = FlowContext {
        spec: PerturbationSpec { epsilon: 0.05, ell: 11 },
        source: &src,
        backend: KernelBackend::Jost,
        gates: FlowGates::for_initial(&r, 10.0),
        max_halvings: 0,
    };
    let k0 = ctx.kernel(&r, 0.0).unwrap();
    let errs: Vec<f64> = [0.004, 0.002, 0.001]
        .iter()
        .map(|&dt| {
            let s = perturbed_flow_step(&FlowState::initial(r.clone()), dt, &ctx).unwrap();
            let d: Vec<Complex64> = s.r.samples.iter().zip(&r.samples).zip(&k0.values).map(|((a, b), f)| a - b - ctx.spec.epsilon * dt * f).collect();
            l2_norm(&d, &zg)
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{errs:?}");
    }
}

proptest! {
    #[test]
    fn kappa_is_monotone_and_nonnegative(a in 0.0f64..0.999, b in 0.0f64..0.999) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (kl, kh) = (kappa_from_modulus(lo).unwrap(), kappa_from_modulus(hi).unwrap());
        prop_assert!(kl >= 0.0);
        prop_assert!(kl <= kh);
    }

    #[test]
    fn kappa_rejects_moduli_at_or_above_one(a in 1.0f64..10.0) {
        prop_assert!(kappa_from_modulus(a).is_err());
    }

    #[test]
    fn region_labels_respect_sign_and_tau(x in -1e3f64..1e3, t in 0.01f64..1e3) {
        // Regions I and II live strictly left of the origin.
        let reg = classify_region(x, t, 3.0).unwrap();
        if x >= 0.0 {
            prop_assert!(!matches!(reg.label, RegionLabel::I | RegionLabel::II));
        }
        prop_assert!((reg.tau - reg.z0.powi(3) * t).abs() <= 1e-12 * (1.0 + reg.tau));
    }
}
