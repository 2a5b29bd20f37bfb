//! Experiment configuration, stored as TOML with one section per concern.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PerturbationSpec;
use crate::numerics::{SpatialGrid, SpectralGrid, UniformGrid};
use crate::pde::{PdeConfig, Sponge};
use crate::scattering::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatumFamily {
    /// `a·sech(x − s)`
    Sech,
    /// `a·exp(−(x − s)²)`
    Gaussian,
    /// Plateau `a` on `|x − s| < width` with tanh edges of unit length.
    BoxSmoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    pub family: DatumFamily,
    pub amplitude: f64,
    #[serde(default)]
    pub shift: f64,
    /// Half-length of the plateau; only the box family reads it.
    #[serde(default = "default_box_width")]
    pub width: f64,
}

fn default_box_width() -> f64 {
    2.0
}

impl Default for DatumSpec {
    fn default() -> Self {
        Self { family: DatumFamily::Sech, amplitude: 0.3, shift: 0.0, width: default_box_width() }
    }
}

impl DatumSpec {
    pub fn profile(&self) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        let Self { family, amplitude: a, shift: s, width: w } = *self;
        move |x: f64| {
            let y = x - s;
            match family {
                DatumFamily::Sech => a / y.cosh(),
                DatumFamily::Gaussian => a * (-y * y).exp(),
                DatumFamily::BoxSmoothed => 0.5 * a * ((y + w).tanh() - (y - w).tanh()),
            }
        }
    }

    pub fn potential(&self, grid: SpatialGrid) -> Result<Potential> {
        Potential::from_fn(grid, self.profile())
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..*self }
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self { shift: self.shift + by, ..*self }
    }
}

/// How the spectral grid grows along the round-trip ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ladder {
    /// Keep the spacing of `[grids]` and widen the window with `N_z`.
    FixedSpacing,
    /// Keep the window of `[grids]` and refine the spacing.
    FixedWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_half_width: f64,
    pub x_points: usize,
    pub z_half_width: f64,
    pub z_points: usize,
    /// Spectral resolutions of the round-trip ladder.
    pub roundtrip_z_points: Vec<usize>,
    pub roundtrip_ladder: Ladder,
    /// Translation applied in the covariance rerun of the round trip.
    pub roundtrip_shift: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_half_width: 32.0,
            x_points: 2048,
            z_half_width: 8.0,
            z_points: 1024,
            roundtrip_z_points: vec![512, 1024, 2048],
            roundtrip_ladder: Ladder::FixedSpacing,
            roundtrip_shift: 5.0,
        }
    }
}

impl GridConfig {
    pub fn spatial(&self) -> Result<SpatialGrid> {
        UniformGrid::new(self.x_half_width, self.x_points)
    }

    pub fn spectral(&self) -> Result<SpectralGrid> {
        UniformGrid::new(self.z_half_width, self.z_points)
    }

    /// Spectral grid of the round-trip ladder with `n` points.
    pub fn ladder_grid(&self, ladder: Ladder, n: usize) -> Result<SpectralGrid> {
        match ladder {
            Ladder::FixedSpacing => UniformGrid::new(self.z_half_width * n as f64 / self.z_points as f64, n),
            Ladder::FixedWidth => UniformGrid::new(self.z_half_width, n),
        }
    }
}

/// A pseudo-spectral run: box, resolution, step and absorbing layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleGrid {
    pub half_width: f64,
    pub points: usize,
    pub dt: f64,
    /// Sponge strength; zero means a plain periodic box.
    #[serde(default)]
    pub sponge_strength: f64,
    #[serde(default = "default_sponge_width")]
    pub sponge_width: f64,
}

fn default_sponge_width() -> f64 {
    0.1
}

impl OracleGrid {
    pub fn pde_config(&self, spec: PerturbationSpec) -> Result<PdeConfig> {
        let sponge = (self.sponge_strength > 0.0).then_some(Sponge { width: self.sponge_width, strength: self.sponge_strength });
        Ok(PdeConfig { grid: UniformGrid::new(self.half_width, self.points)?, dt: self.dt, spec, sponge, boundary_limit: None })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Long run with an absorbing layer, used for the decay campaigns.
    pub long: OracleGrid,
    /// Periodic box for the conservation check.
    pub conservation: OracleGrid,
    pub conservation_t_end: f64,
    /// Short run compared with inverse scattering of the free flow.
    pub consistency: OracleGrid,
    pub consistency_time: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            long: OracleGrid { half_width: 4096.0, points: 32768, dt: 0.05, sponge_strength: 5.0, sponge_width: 0.1 },
            conservation: OracleGrid { half_width: 400.0, points: 8192, dt: 0.02, sponge_strength: 0.0, sponge_width: 0.1 },
            conservation_t_end: 100.0,
            consistency: OracleGrid { half_width: 128.0, points: 8192, dt: 0.001, sponge_strength: 0.0, sponge_width: 0.1 },
            consistency_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticsConfig {
    /// Region threshold `M`.
    pub threshold: f64,
    /// Dyadic times for the sup-norm, ray and region-I fits.
    pub times: Vec<f64>,
    /// Half-length of the window around `x = −12t` over which region-I
    /// errors are maximised.
    pub ray_window: f64,
    /// Time at which the Airy multiplier is calibrated.
    pub calibration_time: f64,
    pub painleve_times: Vec<f64>,
    pub painleve_s_min: f64,
    pub painleve_s_max: f64,
    /// Points along each ray emitted to the CSV.
    pub csv_points: usize,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        Self {
            threshold: crate::asymptotics::DEFAULT_THRESHOLD,
            times: vec![12.5, 25.0, 50.0, 100.0, 200.0],
            ray_window: std::f64::consts::PI,
            calibration_time: 50.0,
            painleve_times: vec![50.0, 100.0, 200.0],
            painleve_s_min: -6.0,
            painleve_s_max: 8.0,
            csv_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub kernel_times: Vec<f64>,
    /// Times `t` at which `r(2t) − r(t)` is measured.
    pub cauchy_times: Vec<f64>,
    /// First step and geometric growth of the step schedule.
    pub first_step: f64,
    pub growth: f64,
    pub max_halvings: u32,
    /// Cross-check of stepped `r(t)` against scattering of the oracle.
    pub cross_check: OracleGrid,
    pub cross_check_time: f64,
    pub cross_check_step: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            kernel_times: vec![20.0, 40.0, 80.0, 160.0],
            cauchy_times: vec![10.0, 20.0, 40.0, 80.0],
            first_step: 0.5,
            growth: 0.2,
            max_halvings: 4,
            cross_check: OracleGrid { half_width: 2048.0, points: 32768, dt: 0.01, sponge_strength: 0.0, sponge_width: 0.1 },
            cross_check_time: 5.0,
            cross_check_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub resolvent_inputs: usize,
    pub resolvent_points: usize,
    /// Sampling box for the random `(x, t)` of the resolvent audit.
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
    /// Slack on `(1 − ρ)^{−1}`.
    pub resolvent_slack: f64,
    /// Amplitudes of the ρ monotonicity sweep.
    pub amplitude_sweep: Vec<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            resolvent_inputs: 20,
            resolvent_points: 5,
            x_range: (-4.0, 4.0),
            t_range: (0.0, 1.0),
            resolvent_slack: 0.05,
            amplitude_sweep: vec![0.3, 0.375, 0.45, 0.525, 0.6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Seed for the random-input audits; nothing else is random.
    pub seed: u64,
    pub output_dir: String,
    pub datum: DatumSpec,
    pub grids: GridConfig,
    pub perturbation: PerturbationSpec,
    pub asymptotics: AsymptoticsConfig,
    pub oracle: OracleConfig,
    pub flow: FlowConfig,
    pub audit: AuditConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20240601,
            output_dir: "mkdv-out".into(),
            datum: DatumSpec::default(),
            grids: GridConfig::default(),
            perturbation: PerturbationSpec::default(),
            asymptotics: AsymptoticsConfig::default(),
            oracle: OracleConfig::default(),
            flow: FlowConfig::default(),
            audit: AuditConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Every grid constructs, the perturbation is admissible and every time
    /// list is positive and increasing.
    pub fn validate(&self) -> Result<()> {
        self.grids.spatial()?;
        self.grids.spectral()?;
        for &n in &self.grids.roundtrip_z_points {
            self.grids.ladder_grid(Ladder::FixedSpacing, n)?;
        }
        PerturbationSpec::new(self.perturbation.epsilon, self.perturbation.ell)?;
        if !(self.datum.amplitude.is_finite() && self.datum.shift.is_finite() && self.datum.width > 0.0) {
            return Err(Error::InvalidInput("datum parameters must be finite, width positive".into()));
        }
        for g in [&self.oracle.long, &self.oracle.conservation, &self.oracle.consistency, &self.flow.cross_check] {
            g.pde_config(self.perturbation)?;
        }
        let lists: [(&str, &[f64]); 4] = [
            ("asymptotics.times", &self.asymptotics.times),
            ("asymptotics.painleve_times", &self.asymptotics.painleve_times),
            ("flow.kernel_times", &self.flow.kernel_times),
            ("flow.cauchy_times", &self.flow.cauchy_times),
        ];
        for (name, ts) in lists {
            if ts.iter().any(|&t| !(t > 0.0 && t.is_finite())) || ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput(format!("{name} must be positive and increasing")));
            }
        }
        if !(self.asymptotics.threshold > 1.0) {
            return Err(Error::InvalidInput("region threshold must exceed 1".into()));
        }
        if !(self.flow.first_step > 0.0 && self.flow.growth >= 0.0 && self.flow.cross_check_step > 0.0) {
            return Err(Error::InvalidInput("flow step schedule must be positive".into()));
        }
        Ok(())
    }
}
