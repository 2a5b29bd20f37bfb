//! Validation campaigns. Each is a pure function of the configuration and
//! returns a report of scalar checks and exponent fits.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{calibrate_multiplier, classify_region, oscillatory_term, painleve_profile, AsymptoticEvaluator, AsymptoticProfile, RegionLabel};
use crate::cauchy::CauchyProjector;
use crate::config::{ExperimentConfig, Ladder, OracleGrid};
use crate::error::{Error, Result};
use crate::fit::{Expectation, FitReport, Verdict};
use crate::flow::{
    free_flow, graded_schedule, r_infinity_estimate, run_flow, FlowContext, FlowGates, FlowState, KernelBackend, PerturbationSpec, TrajectorySource,
};
use crate::io;
use crate::numerics::{interpolate, l2_norm, spectral_derivative, to_complex, weighted_norm, InterpMethod, SpatialGrid, UniformGrid};
use crate::pde::{PdeSolver, PdeState};
use crate::rhp::{reconstruct_potential, required_points, resolvent_audit, solve_beals_coifman, BcOptions, GridPolicy, PhaseParams};
use crate::scattering::{direct_scattering, Potential, ReflectionCoefficient, DECAY_LIMIT, UNITARITY_LIMIT};

/// `value ≤ limit`, optionally only reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// Informational checks are reported but do not enter the verdict.
    pub binding: bool,
    pub verdict: Verdict,
    pub note: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        let verdict = if value <= limit { Verdict::Pass } else { Verdict::Fail };
        Self { name: name.into(), value, limit, binding: true, verdict, note: String::new() }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self::at_most(name, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn informational(mut self) -> Self {
        self.binding = false;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// `limit − value`, positive when satisfied.
    pub fn margin(&self) -> f64 {
        self.limit - self.value
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignReport {
    pub name: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub fits: Vec<FitReport>,
    pub notes: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub seconds: f64,
}

impl CampaignReport {
    fn new(name: &str) -> Self {
        Self { name: name.into(), verdict: Verdict::Pass, checks: Vec::new(), fits: Vec::new(), notes: Vec::new(), outputs: Vec::new(), seconds: 0.0 }
    }

    fn finish(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        self.verdict = self
            .checks
            .iter()
            .filter(|c| c.binding)
            .map(|c| c.verdict)
            .chain(self.fits.iter().map(|f| f.verdict))
            .fold(Verdict::Pass, Verdict::combine);
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, quantity: &str) -> Option<&FitReport> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }

    /// Combined verdict of the named checks and fits; inconclusive when none
    /// of them exists.
    pub fn verdict_of(&self, names: &[&str]) -> Verdict {
        let mut found = false;
        let mut v = Verdict::Pass;
        for c in self.checks.iter().filter(|c| names.contains(&c.name.as_str())) {
            found = true;
            v = v.combine(c.verdict);
        }
        for f in self.fits.iter().filter(|f| names.contains(&f.quantity.as_str())) {
            found = true;
            v = v.combine(f.verdict);
        }
        if found {
            v
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!("== {} ({:.1} s): {:?}\n", self.name, self.seconds, self.verdict);
        for c in &self.checks {
            let tag = if c.binding { format!("{:?}", c.verdict) } else { "info".into() };
            s.push_str(&format!("  [{tag}] {}: {:.6e} vs limit {:.6e} {}\n", c.name, c.value, c.limit, c.note));
        }
        for f in &self.fits {
            s.push_str(&format!("  [{:?}] {}\n", f.verdict, f.summary()));
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s
    }

    fn write(&mut self, out: Option<&Path>) -> Result<()> {
        if let Some(dir) = out {
            let path = dir.join(format!("{}_report.json", self.name));
            self.outputs.push(path.clone());
            io::write_json(&path, self)?;
        }
        Ok(())
    }
}

fn out_dir(out: Option<&Path>, sub: &str) -> Result<Option<PathBuf>> {
    match out {
        Some(d) => {
            let p = d.join(sub);
            std::fs::create_dir_all(&p)?;
            Ok(Some(p))
        }
        None => Ok(None),
    }
}

/// Options used for every reconstruction in the campaigns.
pub fn campaign_bc_options() -> BcOptions {
    BcOptions::default()
}

pub const CAMPAIGN_POLICY: GridPolicy = GridPolicy::Adaptive { support_tol: 1e-10 };

/// Datum on the configured x-grid and its coefficient on the z-grid.
pub fn initial_coefficient(cfg: &ExperimentConfig) -> Result<(Potential, ReflectionCoefficient, f64)> {
    let u = cfg.datum.potential(cfg.grids.spatial()?)?;
    let (s, r) = direct_scattering(&u, &cfg.grids.spectral()?)?;
    Ok((u, r, s.unitarity_residual))
}

fn relative_l2(a: &[f64], b: &[f64], grid: &UniformGrid) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| Complex64::new(x - y, 0.0)).collect();
    let n = l2_norm(&to_complex(b), grid);
    let e = l2_norm(&d, grid);
    if n == 0.0 {
        e
    } else {
        e / n
    }
}

/// The two L² bounds on a potential in terms of its coefficient, in this
/// crate's normalisation where `u` oscillates like `e^{2ixz}`:
/// `‖u‖₂ ≤ ‖r‖₂/√(π(1−ρ))` and `‖u_x‖₂ ≤ 2‖zr‖₂/√(π(1−ρ))`.
/// The constants as they read for coefficients whose potential oscillates
/// like `e^{ixz}` (`(2π)^{−1/2}`, weight `z`) are applied unchanged in
/// informational rows.
pub fn apriori_bounds(label: &str, u: &[f64], grid: &SpatialGrid, r: &ReflectionCoefficient) -> Vec<Check> {
    let uc = to_complex(u);
    let u_l2 = l2_norm(&uc, grid);
    let ux_l2 = l2_norm(&spectral_derivative(&uc, grid, 1), grid);
    let gap = (1.0 - r.rho).max(0.0);
    let (r_l2, zr_l2) = (r.l2_norm(), r.z_weighted_l2());
    let pi = std::f64::consts::PI;
    let lim = |v: f64, c: f64| if gap > 0.0 { c * v / gap.sqrt() } else { f64::INFINITY };
    vec![
        Check::at_most(&format!("{label}: L2 bound on u"), u_l2, lim(r_l2, 1.0 / pi.sqrt())),
        Check::at_most(&format!("{label}: L2 bound on u_x"), ux_l2, lim(zr_l2, 2.0 / pi.sqrt())),
        Check::at_most(&format!("{label}: L2 bound on u, unadapted constants"), u_l2, lim(r_l2, 1.0 / (2.0 * pi).sqrt())).informational(),
        Check::at_most(&format!("{label}: L2 bound on u_x, unadapted constants"), ux_l2, lim(zr_l2, 1.0 / (2.0 * pi).sqrt())).informational(),
    ]
}

pub fn scatter(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<CampaignReport> {
    let start = Instant::now();
    let mut rep = CampaignReport::new("scatter");
    let u = cfg.datum.potential(cfg.grids.spatial()?)?;
    rep.checks.push(Check::at_most("decay gate", u.tail_bound(), DECAY_LIMIT));
    let (s, r) = direct_scattering(&u, &cfg.grids.spectral()?)?;
    rep.checks.push(Check::at_most("unitarity", s.unitarity_residual, UNITARITY_LIMIT));
    rep.checks.push(Check::at_most("rho below one", r.rho, 1.0 - f64::EPSILON));
    rep.checks.push(Check::at_most("small-data gate rho < 1/2", r.rho, 0.5).informational().with_note(format!("H1 {:.6e}, H12 {:.6e}", r.h1_norm.value, r.h12_norm.value)));
    rep.checks.push(Check::at_most("small-data gate H1 < 1/2", r.h1_norm.value, 0.5).informational());
    let xg = cfg.grids.spatial()?;
    let zg = cfg.grids.spectral()?;
    let sweep: Vec<(f64, f64)> = cfg
        .audit
        .amplitude_sweep
        .par_iter()
        .map(|&a| -> Result<(f64, f64)> {
            let p = cfg.datum.with_amplitude(a).potential(xg)?;
            Ok((a, direct_scattering(&p, &zg)?.1.rho))
        })
        .collect::<Result<_>>()?;
    let monotone = sweep.windows(2).all(|w| (w[1].1 > w[0].1) == (w[1].0 > w[0].0));
    rep.checks.push(Check::flag("rho monotone in amplitude", monotone).informational().with_note(format!("{sweep:?}")));
    rep.notes.push(format!("rho = {:.6}, H1 = {:.6}, H12 = {:.6}", r.rho, r.h1_norm.value, r.h12_norm.value));
    if let Some(dir) = out {
        let p = dir.join("scattering.json");
        io::ScatteringCache::new(&format!("{:?}", cfg.datum), 0.0, &r, Some(s.unitarity_residual)).write(&p)?;
        rep.outputs.push(p);
    }
    let mut rep = rep.finish(start);
    rep.write(out)?;
    Ok(rep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTripRow {
    pub z_points: usize,
    pub half_width: f64,
    pub error: f64,
    pub shifted_error: f64,
    pub seconds: f64,
}

fn ladder_errors(cfg: &ExperimentConfig, ladder: Ladder, checks: &mut Vec<Check>) -> Result<Vec<RoundTripRow>> {
    let xg = cfg.grids.spatial()?;
    let opts = campaign_bc_options();
    let u = cfg.datum.potential(xg)?;
    let us = cfg.datum.shifted(cfg.grids.roundtrip_shift).potential(xg)?;
    let mut rows = Vec::new();
    for &n in &cfg.grids.roundtrip_z_points {
        let t0 = Instant::now();
        let zg = cfg.grids.ladder_grid(ladder, n)?;
        let mut errs = [0.0; 2];
        for (k, (p, label)) in [(&u, "datum"), (&us, "shifted datum")].into_iter().enumerate() {
            let (_, r) = direct_scattering(p, &zg)?;
            let rec = reconstruct_potential(&r, 0.0, &xg, CAMPAIGN_POLICY, &opts)?;
            errs[k] = relative_l2(rec.potential.samples(), p.samples(), &xg);
            checks.extend(apriori_bounds(&format!("roundtrip {label} {ladder:?} N_z={n}"), rec.potential.samples(), &xg, &r));
        }
        rows.push(RoundTripRow { z_points: n, half_width: zg.half_width(), error: errs[0], shifted_error: errs[1], seconds: t0.elapsed().as_secs_f64() });
    }
    Ok(rows)
}

fn strictly_decreasing(errors: &[f64]) -> bool {
    errors.iter().all(|&e| e == 0.0) || errors.windows(2).all(|w| w[1] < w[0])
}

/// `R⁻¹(R(u₀))` against `u₀` along the configured ladder of spectral grids,
/// for the datum and a translated copy. The other ladder is run as well and
/// reported without entering the verdict.
pub fn roundtrip(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(CampaignReport, Vec<RoundTripRow>)> {
    let start = Instant::now();
    let mut rep = CampaignReport::new("roundtrip");
    let ladder = cfg.grids.roundtrip_ladder;
    let rows = ladder_errors(cfg, ladder, &mut rep.checks)?;
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    rep.checks.push(Check::flag("error strictly decreasing", strictly_decreasing(&errors)).with_note(format!("{ladder:?} {errors:?}")));
    if let Some(last) = rows.last() {
        rep.checks.push(Check::at_most("final relative L2 error", last.error, 1e-4));
    }
    // Translation covariance: the shifted run must sit at the same level.
    let worst_ratio = rows
        .iter()
        .map(|r| {
            let (a, b) = (r.error.max(1e-14), r.shifted_error.max(1e-14));
            (a / b).max(b / a)
        })
        .fold(1.0, f64::max);
    rep.checks.push(Check::at_most("shifted/unshifted error ratio", worst_ratio, 2.0));
    if errors.iter().any(|&e| e > 0.0) {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.z_points as f64, r.error)).collect();
        rep.fits.push(FitReport::new("roundtrip error vs N_z", pts, Expectation::AtMost { bound: 0.0 }, 3));
    }
    let other = match ladder {
        Ladder::FixedSpacing => Ladder::FixedWidth,
        Ladder::FixedWidth => Ladder::FixedSpacing,
    };
    let mut scratch = Vec::new();
    let alt = ladder_errors(cfg, other, &mut scratch)?;
    rep.checks.extend(scratch.into_iter().map(Check::informational));
    let alt_errors: Vec<f64> = alt.iter().map(|r| r.error).collect();
    rep.checks.push(Check::flag(&format!("{other:?} ladder strictly decreasing"), strictly_decreasing(&alt_errors)).informational().with_note(format!("{alt_errors:?}")));
    if let Some(dir) = out {
        let p = dir.join("roundtrip.csv");
        let data: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.z_points as f64, r.half_width, r.error, r.shifted_error, r.seconds]).collect();
        io::write_csv(&p, &["z_points", "z_half_width", "error", "shifted_error", "seconds"], &data)?;
        rep.outputs.push(p);
    }
    let mut rep = rep.finish(start);
    rep.write(out)?;
    Ok((rep, rows))
}

/// Observed temporal order of the oracle from three successive halvings
/// against a fine reference.
pub fn oracle_order(spec: PerturbationSpec) -> Result<Vec<f64>> {
    let g = UniformGrid::new(20.0, 128)?;
    let u0 = Potential::from_fn(g, |x| 0.8 / x.cosh())?;
    let t_end = 0.4;
    let run = |dt: f64| -> Result<Vec<f64>> {
        let s = PdeSolver::new(crate::pde::PdeConfig { grid: g, dt, spec, sponge: None, boundary_limit: None })?;
        Ok(s.evolve(&u0, &[t_end])?.pop().expect("one snapshot").u)
    };
    let reference = run(t_end / 1024.0)?;
    let errs: Vec<f64> = [32.0, 64.0, 128.0]
        .iter()
        .map(|m| Ok(run(t_end / m)?.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)))
        .collect::<Result<_>>()?;
    Ok(errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

fn pde_run(grid: &OracleGrid, spec: PerturbationSpec, datum: &crate::config::DatumSpec, times: &[f64]) -> Result<(Potential, Vec<PdeState>)> {
    let cfg = grid.pde_config(spec)?;
    let u0 = datum.potential(cfg.grid)?;
    let states = PdeSolver::new(cfg)?.evolve(&u0, times)?;
    Ok((u0, states))
}

pub fn evolve(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<CampaignReport> {
    let start = Instant::now();
    let mut rep = CampaignReport::new("evolve");
    let (_, r0, _) = initial_coefficient(cfg)?;
    let xg = cfg.grids.spatial()?;
    let opts = campaign_bc_options();
    let t1 = cfg.oracle.consistency_time;

    // Free flow of the coefficient against the oracle. The solver's phase
    // carries the factor e^{8itz³}, so it is handed the time-zero samples.
    let (rec, pde) = rayon::join(
        || reconstruct_potential(&r0, t1, &xg, CAMPAIGN_POLICY, &opts),
        || pde_run(&cfg.oracle.consistency, PerturbationSpec::unperturbed(), &cfg.datum, &[t1]),
    );
    let rec = rec?;
    let (_, pde) = pde?;
    let st = &pde[0];
    let uc = to_complex(&st.u);
    let mut linf: f64 = 0.0;
    for (x, v) in xg.points().into_iter().zip(rec.potential.samples()) {
        if x.abs() <= st.grid.half_width() {
            let w = interpolate(&uc, &st.grid, x, InterpMethod::Lagrange8)?.value.re;
            linf = linf.max((w - v).abs());
        }
    }
    rep.checks.push(Check::at_most("free flow vs oracle Linf", linf, 1e-3));
    rep.checks.extend(apriori_bounds(&format!("free flow t={t1}"), rec.potential.samples(), &xg, &free_flow(&r0, t1)));

    // Conservation in a periodic box.
    let t_end = cfg.oracle.conservation_t_end;
    let times: Vec<f64> = (0..=10).map(|k| t_end * k as f64 / 10.0).collect();
    let (_, states) = pde_run(&cfg.oracle.conservation, PerturbationSpec::unperturbed(), &cfg.datum, &times)?;
    let m0 = states[0].conserved.mass;
    let drift = states.iter().skip(1).map(|s| (s.conserved.mass - m0).abs() / s.t).fold(0.0, f64::max);
    rep.checks.push(Check::at_most("mass drift per unit time", drift, 1e-8));
    let e0 = states[0].conserved.energy;
    let e_drift = states.iter().map(|s| (s.conserved.energy - e0).abs() / e0.abs().max(1e-300)).fold(0.0, f64::max);
    rep.checks.push(Check::at_most("relative energy drift", e_drift, 1e-6).informational());
    let orders = oracle_order(PerturbationSpec { epsilon: 0.05, ell: cfg.perturbation.ell })?;
    let worst = orders.iter().map(|p| (p - 4.0).abs()).fold(0.0, f64::max);
    rep.checks.push(Check::at_most("observed order minus 4", worst, 0.3).with_note(format!("orders {orders:?}")));

    if let Some(dir) = out_dir(out, "snapshots")? {
        let mut diag = serde_json::Map::new();
        diag.insert("mass_drift_per_time".into(), drift.into());
        diag.insert("dt".into(), cfg.oracle.conservation.dt.into());
        diag.insert("consistency_linf".into(), linf.into());
        rep.outputs.push(io::write_snapshots(&dir, &states, diag)?);
    }
    let mut rep = rep.finish(start);
    rep.write(out)?;
    Ok(rep)
}

/// Sup of `|u_pde − u_as|` over `|x + 12t| ≤ window` for one snapshot.
fn region_one_error(r: &ReflectionCoefficient, st: &PdeState, window: f64) -> Result<f64> {
    let t = st.t;
    let uc = to_complex(&st.u);
    let n = (2.0 * window / 0.05).ceil() as usize;
    let xs: Vec<f64> = (0..=n).map(|k| -12.0 * t - window + 2.0 * window * k as f64 / n as f64).collect();
    let errs: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            let z0 = (-x / (12.0 * t)).sqrt();
            let u = interpolate(&uc, &st.grid, x, InterpMethod::Lagrange8)?.value.re;
            Ok((u - oscillatory_term(r, z0, t)?).abs())
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

fn self_similar_samples(st: &PdeState) -> Vec<(f64, f64)> {
    let scale = (3.0 * st.t).cbrt();
    (0..st.grid.len()).filter(|&j| st.grid.point(j).abs() <= scale).map(|j| (st.grid.point(j), st.u[j])).collect()
}

pub fn asymptotics(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<CampaignReport> {
    let start = Instant::now();
    let mut rep = CampaignReport::new("asymptotics");
    let a = &cfg.asymptotics;
    let (_, r0, _) = initial_coefficient(cfg)?;
    let mut times: Vec<f64> = a.times.iter().chain(&a.painleve_times).copied().chain([a.calibration_time]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut eps_list = vec![0.0];
    if cfg.perturbation.epsilon > 0.0 {
        eps_list.push(cfg.perturbation.epsilon);
    }
    let runs: Vec<(f64, Vec<PdeState>)> = eps_list
        .par_iter()
        .map(|&eps| {
            let spec = PerturbationSpec { epsilon: eps, ell: cfg.perturbation.ell };
            Ok((eps, pde_run(&cfg.oracle.long, spec, &cfg.datum, &times)?.1))
        })
        .collect::<Result<_>>()?;
    let at = |states: &[PdeState], t: f64| states.iter().find(|s| (s.t - t).abs() < 1e-9).cloned();
    let mut series: Vec<Vec<f64>> = a.times.iter().map(|&t| vec![t]).collect();
    let mut header = vec!["t".to_string()];
    let mut painleve = None;
    for (eps, states) in &runs {
        let tag = format!("eps={eps}");
        let sup: Vec<(f64, f64)> = a.times.iter().filter_map(|&t| at(states, t).map(|s| (t, s.sup_norm()))).collect();
        rep.fits.push(FitReport::new(&format!("sup norm {tag}"), sup.clone(), Expectation::Within { expected: -0.33, tolerance: 0.05 }, 4));

        // Region I along x = −12t.
        let mut region_one = Vec::new();
        for &t in &a.times {
            let reg = classify_region(-12.0 * t, t, a.threshold)?;
            if reg.label == RegionLabel::I && reg.z0 * t >= 10.0 {
                let st = at(states, t).expect("snapshot requested");
                region_one.push((t, region_one_error(&r0, &st, a.ray_window)?));
            }
        }
        rep.fits.push(FitReport::new(&format!("region I error {tag}"), region_one.clone(), Expectation::AtMost { bound: -0.5 }, 4));

        // Region V along x = +12t.
        let ray_v: Vec<(f64, f64)> = a
            .times
            .iter()
            .filter_map(|&t| at(states, t).map(|s| (t, s)))
            .map(|(t, s)| Ok((t, interpolate(&to_complex(&s.u), &s.grid, 12.0 * t, InterpMethod::Lagrange8)?.value.re.abs())))
            .collect::<Result<_>>()?;
        rep.fits.push(FitReport::new(&format!("region V |u| {tag}"), ray_v.clone(), Expectation::AtMost { bound: -0.9 }, 4));

        // Region III: calibrate once, then hold the multiplier fixed.
        let cal = at(states, a.calibration_time).expect("snapshot requested");
        let (k, rms) = calibrate_multiplier(&self_similar_samples(&cal), cal.t, 0.0, 0.99, a.painleve_s_min, a.painleve_s_max)?;
        rep.notes.push(format!("{tag}: Airy multiplier {k:.8} (rms {rms:.3e}) at t = {}; r(0) = {:.8}", cal.t, r0.at(0.0)?.re));
        let profile = painleve_profile(k, a.painleve_s_min, a.painleve_s_max)?;
        let mut region_three = Vec::new();
        for &t in &a.painleve_times {
            let st = at(states, t).expect("snapshot requested");
            let scale = (3.0 * t).cbrt();
            let e = self_similar_samples(&st)
                .iter()
                .map(|&(x, u)| profile.eval(x / scale).map(|p| (u - p / scale).abs()).ok_or(Error::Extrapolation { point: x / scale, lo: profile.s_min, hi: profile.s_max }))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            region_three.push((t, e));
        }
        rep.fits.push(FitReport::new(&format!("region III error {tag}"), region_three, Expectation::AtMost { bound: -0.4 }, 3));
        if *eps == 0.0 {
            painleve = Some(profile);
        }
        header.extend([format!("sup_{tag}"), format!("region_I_{tag}"), format!("region_V_{tag}")]);
        for (row, &t) in series.iter_mut().zip(&a.times) {
            let find = |v: &[(f64, f64)]| v.iter().find(|p| p.0 == t).map_or(f64::NAN, |p| p.1);
            row.extend([find(&sup), find(&region_one), find(&ray_v)]);
        }
    }
    rep.notes.push("region V values sit at the oracle's transmission floor; the true solution there is exponentially small".into());
    if let Some(dir) = out {
        let eval = AsymptoticEvaluator::new(r0.clone(), a.threshold, painleve.expect("unperturbed run always present"));
        let mut profiles: Vec<AsymptoticProfile> = Vec::new();
        for &t in &a.times {
            let n = a.csv_points.max(2);
            for j in 0..n {
                let x = -14.0 * t + 28.0 * t * j as f64 / (n - 1) as f64;
                profiles.push(eval.eval(x, t)?);
            }
        }
        let p = dir.join("asymptotics.csv");
        io::write_asymptotics_csv(&p, &profiles)?;
        rep.outputs.push(p);
        let p = dir.join("decay_series.csv");
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        io::write_csv(&p, &h, &series)?;
        rep.outputs.push(p);
    }
    let mut rep = rep.finish(start);
    rep.write(out)?;
    Ok(rep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheck {
    pub t: f64,
    /// Stepped `r(t)` against scattering of the oracle.
    pub gap: f64,
    /// Free flow of `r(0)` against the same oracle.
    pub free_gap: f64,
    /// Stepped against free flow: the size of the perturbation itself.
    pub perturbation: f64,
}

/// Stepped `r(t)` with the oracle as potential source, compared with the
/// direct scattering of the oracle state.
pub fn cross_check(cfg: &ExperimentConfig, r0: &ReflectionCoefficient) -> Result<CrossCheck> {
    let f = &cfg.flow;
    let spec = cfg.perturbation;
    let t_end = f.cross_check_time;
    let sched = graded_schedule(f.cross_check_step, 0.0, t_end, &[]);
    let (u0, states) = pde_run(&f.cross_check, spec, &cfg.datum, &sched)?;
    let mut traj: Vec<(f64, Potential)> = states.iter().map(|s| Ok((s.t, s.potential()?))).collect::<Result<_>>()?;
    traj.insert(0, (0.0, u0));
    let last = traj.last().expect("nonempty").1.clone();
    let src = TrajectorySource::new(traj)?;
    let ctx = FlowContext { spec, source: &src, backend: KernelBackend::Jost, gates: FlowGates::for_initial(r0, r0.h12_norm.value), max_halvings: f.max_halvings };
    let hist = run_flow(FlowState::initial(r0.clone()), &sched, &ctx)?;
    let stepped = free_flow(&hist.last().expect("nonempty").r, t_end);
    let (_, oracle) = direct_scattering(&last, &r0.grid)?;
    let free = free_flow(r0, t_end);
    let dist = |a: &ReflectionCoefficient, b: &ReflectionCoefficient| {
        let d: Vec<Complex64> = a.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect();
        l2_norm(&d, &r0.grid)
    };
    Ok(CrossCheck { t: t_end, gap: dist(&stepped, &oracle), free_gap: dist(&free, &oracle), perturbation: dist(&stepped, &free) })
}

pub fn perturbed(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(CampaignReport, Vec<FlowState>)> {
    let start = Instant::now();
    let mut rep = CampaignReport::new("perturbed");
    let f = &cfg.flow;
    let spec = cfg.perturbation;
    let (_, r0, _) = initial_coefficient(cfg)?;
    let gates = FlowGates::for_initial(&r0, r0.h12_norm.value);
    if gates.relaxed {
        rep.notes.push(format!("H1 gate relaxed to {:.6} because the datum has ||r||_H1 = {:.6} >= 1/2", gates.h1_limit, r0.h1_norm.value));
    }
    let pairs: Vec<f64> = f.cauchy_times.iter().map(|t| 2.0 * t).collect();
    let marks: Vec<f64> = f.kernel_times.iter().chain(&f.cauchy_times).chain(&pairs).copied().collect();
    let t_end = marks.iter().copied().fold(0.0, f64::max);
    let sched = graded_schedule(f.first_step, f.growth, t_end, &marks);

    let history = if spec.epsilon == 0.0 {
        let src = TrajectorySource::new(vec![(0.0, cfg.datum.potential(cfg.grids.spatial()?)?)])?;
        let ctx = FlowContext { spec, source: &src, backend: KernelBackend::Jost, gates, max_halvings: f.max_halvings };
        run_flow(FlowState::initial(r0.clone()), &sched, &ctx)?
    } else {
        let (u0, states) = pde_run(&cfg.oracle.long, spec, &cfg.datum, &sched)?;
        let mut traj: Vec<(f64, Potential)> = states.iter().map(|s| Ok((s.t, s.potential()?))).collect::<Result<_>>()?;
        traj.insert(0, (0.0, u0));
        let src = TrajectorySource::new(traj)?;
        let ctx = FlowContext { spec, source: &src, backend: KernelBackend::Jost, gates, max_halvings: f.max_halvings };
        let h = run_flow(FlowState::initial(r0.clone()), &sched, &ctx)?;
        let kernel: Vec<(f64, f64)> = f
            .kernel_times
            .iter()
            .filter_map(|&t| h.iter().find(|s| (s.t - t).abs() < 1e-9).map(|s| (t, s.diagnostics.kernel_h12)))
            .collect();
        let expected = crate::flow::kernel_decay_exponent(spec.ell);
        rep.fits.push(FitReport::new("kernel H12 norm", kernel, Expectation::Within { expected, tolerance: 0.4 }, 4));
        h
    };
    let (r_inf, cauchy) = r_infinity_estimate(&history, &spec, &f.cauchy_times)?;
    let cv = cauchy.verdict();
    match (&cauchy.fit, spec.epsilon == 0.0) {
        (Some(fit), _) => rep.fits.push(fit.clone()),
        (None, true) => rep.checks.push(Check::flag("difference series identically zero", cv == Verdict::Pass)),
        (None, false) => {
            let mut fit = FitReport::new("cauchy difference H12", cauchy.differences.clone(), Expectation::Within { expected: cauchy.expected, tolerance: 0.5 }, 3);
            fit.verdict = Verdict::Inconclusive;
            fit.note = "differences not monotone".into();
            rep.fits.push(fit);
        }
    }
    let cc = if spec.epsilon == 0.0 { None } else { Some(cross_check(cfg, &r0)?) };
    if let Some(cc) = &cc {
        rep.checks.push(Check::at_most("stepped vs oracle L2 gap", cc.gap, 5e-3).with_note(format!("free-flow gap {:.3e}, perturbation size {:.3e}", cc.free_gap, cc.perturbation)));
    }
    if let Some(dir) = out {
        let p = dir.join("flow_history.jsonl");
        io::write_flow_history(&p, &history)?;
        rep.outputs.push(p);
        let p = dir.join("r_infinity.json");
        io::ScatteringCache::new("r(t) at the last flow time, co-rotating", history.last().map_or(0.0, |s| s.t), &r_inf, None).write(&p)?;
        rep.outputs.push(p);
        let p = dir.join("cauchy.csv");
        let rows: Vec<Vec<f64>> = cauchy.differences.iter().map(|&(t, d)| vec![t, d]).collect();
        io::write_csv(&p, &["t", "difference_h12"], &rows)?;
        rep.outputs.push(p);
        let p = dir.join("kernel.csv");
        let rows: Vec<Vec<f64>> = history.iter().skip(1).map(|s| vec![s.t, s.diagnostics.kernel_l2, s.diagnostics.kernel_h12, s.diagnostics.truncation]).collect();
        io::write_csv(&p, &["t", "kernel_l2", "kernel_h12", "truncation"], &rows)?;
        rep.outputs.push(p);
    }
    let mut rep = rep.finish(start);
    rep.write(out)?;
    Ok((rep, history))
}

/// Random wave packets whose spectrum lies in `band ≤ |k|`, away from zero
/// frequency, so that both projections decay inside the window.
pub fn band_pass_inputs(grid: &UniformGrid, inputs: usize, seed: u64, band: f64) -> Vec<Vec<Complex64>> {
    let zs = grid.points();
    let zh = grid.half_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..inputs)
        .map(|_| {
            let mut f = vec![Complex64::new(0.0, 0.0); zs.len()];
            for _ in 0..4 {
                let w = rng.gen_range(0.5..0.8);
                let c = rng.gen_range(-(zh - 7.0 * w)..(zh - 7.0 * w));
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let om = sign * rng.gen_range(band..band + 15.0);
                let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                for (k, &z) in zs.iter().enumerate() {
                    f[k] += amp * Complex64::from_polar((-((z - c) / w).powi(2)).exp(), om * z);
                }
            }
            f
        })
        .collect()
}

/// Largest relative residuals of `C₊ − C₋ = I`, `C₊² = C₊` and `C₋² = −C₋`.
pub fn projection_residuals(grid: UniformGrid, inputs: &[Vec<Complex64>]) -> [f64; 3] {
    let proj = CauchyProjector::new(grid);
    let mut worst = [0.0f64; 3];
    for f in inputs {
        let norm = l2_norm(f, &grid);
        let p = proj.plus(f);
        let m = proj.minus(f);
        let res = |v: Vec<Complex64>| l2_norm(&v, &grid) / norm;
        let plemelj = res(p.iter().zip(&m).zip(f).map(|((a, b), c)| a - b - c).collect());
        let pp = proj.plus(&p);
        let mm = proj.minus(&m);
        let idem_p = res(pp.iter().zip(&p).map(|(a, b)| a - b).collect());
        let idem_m = res(mm.iter().zip(&m).map(|(a, b)| a + b).collect());
        for (w, v) in worst.iter_mut().zip([plemelj, idem_p, idem_m]) {
            *w = w.max(v);
        }
    }
    worst
}

/// `‖u_xx‖₂ / (‖u‖_{H¹} + ‖μ‖_∞ ‖r‖_{L^{2,2}})` for a potential and its
/// coefficient at time `t`; `‖μ‖_∞` is sampled on `mu_points`.
pub fn uxx_constant(u: &[f64], grid: &SpatialGrid, r_t: &ReflectionCoefficient, t: f64, mu_points: &[f64], opts: &BcOptions) -> Result<f64> {
    let uc = to_complex(u);
    let uxx = l2_norm(&spectral_derivative(&uc, grid, 2), grid);
    let h1 = weighted_norm(&uc, grid, 1, 0)?.value;
    let r22 = weighted_norm(&r_t.samples, &r_t.grid, 0, 2)?.value;
    let mut mu_sup: f64 = 0.0;
    for &x in mu_points {
        let sol = solve_beals_coifman(r_t, PhaseParams::new(x, t)?, opts)?;
        for m in &sol.mu {
            for row in m {
                for v in row {
                    mu_sup = mu_sup.max(v.norm());
                }
            }
        }
    }
    let denom = h1 + mu_sup * r22;
    Ok(if denom == 0.0 { 0.0 } else { uxx / denom })
}

pub fn audit(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<CampaignReport> {
    let start = Instant::now();
    let mut rep = CampaignReport::new("audit");
    let au = &cfg.audit;
    let (u, r0, _) = initial_coefficient(cfg)?;
    let xg = cfg.grids.spatial()?;
    let opts = campaign_bc_options();

    let inputs = band_pass_inputs(&r0.grid, 50, cfg.seed, 25.0);
    let [pl, ip, im] = projection_residuals(r0.grid, &inputs);
    rep.checks.push(Check::at_most("Plemelj residual", pl, 1e-8));
    rep.checks.push(Check::at_most("C+ idempotence residual", ip, 1e-8));
    rep.checks.push(Check::at_most("-C- idempotence residual", im, 1e-8));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points: Vec<(f64, f64)> = (0..au.resolvent_points)
        .map(|_| (rng.gen_range(au.x_range.0..=au.x_range.1), rng.gen_range(au.t_range.0..=au.t_range.1)))
        .collect();
    let audits = points
        .par_iter()
        .enumerate()
        .map(|(i, &(x, t))| {
            let p = PhaseParams::new(x, t)?;
            // Refine the coefficient's grid until the phase is resolved.
            let need = required_points(&r0.grid, r0.support(opts.support_tol), p, opts.nyquist_fraction);
            let r = if need > r0.grid.len() { r0.resample(&UniformGrid::new(r0.grid.half_width(), need)?)? } else { r0.clone() };
            resolvent_audit(&r, p, au.resolvent_inputs, cfg.seed.wrapping_add(i as u64 + 1), &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    for a in &audits {
        rep.checks.push(
            Check::at_most(&format!("resolvent L2 response at x={:.3}, t={:.3}", a.x, a.t), a.max_l2(), a.bound * (1.0 + au.resolvent_slack))
                .with_note(format!("max L4 response {:.4}", a.max_l4())),
        );
    }

    let rec = reconstruct_potential(&r0, 0.0, &xg, CAMPAIGN_POLICY, &opts)?;
    rep.checks.extend(apriori_bounds("reconstruction t=0", rec.potential.samples(), &xg, &r0));
    rep.checks.extend(apriori_bounds("datum t=0", u.samples(), &xg, &r0));
    let mu_points: Vec<f64> = (0..9).map(|k| -8.0 + 2.0 * k as f64).collect();
    let c0 = uxx_constant(rec.potential.samples(), &xg, &r0, 0.0, &mu_points, &opts)?;
    rep.checks.push(Check::at_most("u_xx constant, t=0", c0, f64::MAX).informational().with_note("finite constant expected; no tight value asserted"));
    if let Some(dir) = out {
        let p = dir.join("margins.csv");
        let rows: Vec<Vec<f64>> = rep.checks.iter().enumerate().map(|(i, c)| vec![i as f64, c.value, c.limit, c.margin()]).collect();
        io::write_csv(&p, &["row", "value", "limit", "margin"], &rows)?;
        rep.outputs.push(p);
    }
    let mut rep = rep.finish(start);
    rep.write(out)?;
    Ok(rep)
}
