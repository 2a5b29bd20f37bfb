//! Complex log-Gamma and the Airy function.

use std::f64::consts::PI;

use num_complex::Complex64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Principal-branch log Gamma for `Re z >= 1/2` (Lanczos, g = 7).
pub fn ln_gamma(z: Complex64) -> Complex64 {
    assert!(z.re >= 0.5, "ln_gamma needs Re z >= 1/2, got {z}");
    let z = z - 1.0;
    let mut acc = Complex64::new(LANCZOS[0], 0.0);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        acc += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// arg Γ(iκ) for κ > 0, continuous in κ with limit −π/2 at 0⁺.
///
/// Uses Γ(iκ) = Γ(1+iκ)/(iκ), whose argument is Im lnΓ(1+iκ) − π/2.
pub fn arg_gamma_imag(kappa: f64) -> f64 {
    ln_gamma(Complex64::new(1.0, kappa)).im - 0.5 * PI
}

/// |Γ(iκ)|² for κ > 0.
pub fn abs_gamma_imag_sq(kappa: f64) -> f64 {
    (2.0 * ln_gamma(Complex64::new(1.0, kappa)).re).exp() / (kappa * kappa)
}

const AI0: f64 = 0.355_028_053_887_817_24;
const AIP0: f64 = -0.258_819_403_792_806_8;

fn airy_series(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut fp, mut gp) = (0.0, 1.0);
    let (mut tf, mut tg) = (1.0, x);
    let (mut tfp, mut tgp) = (x * x / 2.0, 1.0);
    fp += tfp;
    for k in 1..200 {
        let kf = k as f64;
        tf *= x3 / ((3.0 * kf - 1.0) * (3.0 * kf));
        tg *= x3 / ((3.0 * kf) * (3.0 * kf + 1.0));
        tgp *= x3 / ((3.0 * kf) * (3.0 * kf - 2.0));
        if k >= 2 {
            tfp *= x3 / ((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            fp += tfp;
        }
        f += tf;
        g += tg;
        gp += tgp;
        let scale = f.abs() + g.abs() + fp.abs() + gp.abs();
        if tf.abs() + tg.abs() + tfp.abs() + tgp.abs() < 1e-18 * scale {
            break;
        }
    }
    (AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp)
}

// Ai(x) = e^{-ζ}/(2π) ∫ exp(−√x t²) e^{i t³/3} dt after shifting the contour
// through the saddle; the integrand is entire so the trapezoid rule converges
// geometrically.
fn airy_positive(x: f64) -> (f64, f64) {
    let sx = x.sqrt();
    let zeta = 2.0 / 3.0 * x * sx;
    let delta = 0.04;
    let tmax = (45.0 / sx).sqrt();
    let m = (tmax / delta).ceil() as usize;
    let (mut j0, mut j2) = (0.5, 0.0);
    for k in 1..=m {
        let t = k as f64 * delta;
        let w = (-sx * t * t).exp() * (t * t * t / 3.0).cos();
        j0 += w;
        j2 += t * t * w;
    }
    // Full-line integrals of the even integrands.
    let j0 = 2.0 * delta * j0;
    let j2 = 2.0 * delta * j2;
    let pref = (-zeta).exp() / (2.0 * PI);
    (pref * j0, pref * (-sx * j0 - j2 / (2.0 * sx)))
}

fn airy_negative(x: f64) -> (f64, f64) {
    let z = -x;
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let (mut p, mut q, mut r, mut s) = (0.0, 0.0, 0.0, 0.0);
    let mut u = 1.0;
    let mut zp = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..40 {
        if k > 0 {
            let kf = k as f64;
            u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
            zp *= zeta;
        }
        let v = -(6.0 * k as f64 + 1.0) / (6.0 * k as f64 - 1.0) * u;
        let term = u / zp;
        if term.abs() > last {
            break;
        }
        last = term.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
            r += sign * v / zp;
        } else {
            q += sign * term;
            s += sign * v / zp;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let phase = zeta - 0.25 * PI;
    let (sn, cs) = phase.sin_cos();
    let z4 = z.powf(0.25);
    let ai = (cs * p + sn * q) / (PI.sqrt() * z4);
    let aip = z4 / PI.sqrt() * (sn * r - cs * s);
    (ai, aip)
}

/// Airy function and derivative `(Ai(x), Ai'(x))`.
pub fn airy(x: f64) -> (f64, f64) {
    if x >= 2.0 {
        airy_positive(x)
    } else if x >= -7.0 {
        airy_series(x)
    } else {
        airy_negative(x)
    }
}
