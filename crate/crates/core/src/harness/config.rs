use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::energy::{AllocationFactors, QModel};
use crate::error::{Error, Result};
use crate::geometry::Trajectory;
use crate::montecarlo::{LinkMode, TrialConfig, DEFAULT_SAMPLES};
use crate::optimizer::WeightVector;

/// Allocation scheme: optimised (`pa`) or the fixed baseline split (`sn`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Pa,
    Sn,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Pa => "PA",
            Scheme::Sn => "SN",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground-user separation sweep and the UAV orbit flown at every point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Half the user separation, metres.
    pub d_min: f64,
    pub d_max: f64,
    pub d_step: f64,
    /// Separation used by single-distance experiments.
    pub d_default: f64,
    /// Orbit radius `r` around the midpoint, metres.
    pub radius: f64,
    /// Flight altitude `z = r·sin φ`, metres.
    pub altitude: f64,
    pub duration: f64,
    pub slots: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            d_min: 100.0,
            d_max: 700.0,
            d_step: 50.0,
            d_default: 400.0,
            radius: 100.0,
            altitude: 50.0,
            duration: 1.0,
            slots: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_ab: f64,
    pub path_loss_exp: f64,
    pub noise_var: f64,
    pub rate_efficiency: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            gamma_a: 2.5e9,
            gamma_b: 2.5e9,
            gamma_ab: 0.0,
            path_loss_exp: 3.0,
            noise_var: 1.0,
            rate_efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    /// Budget P̄ for the distance, altitude and trade-off experiments, watts.
    pub total_power: f64,
    /// Budget sweep in dBm (`10·log10(P̄ / 1 mW)`).
    pub dbm_min: f64,
    pub dbm_max: f64,
    pub dbm_step: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            total_power: 2.0,
            dbm_min: 0.0,
            dbm_max: 33.0,
            dbm_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AltitudeConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub z_step: f64,
}

impl Default for AltitudeConfig {
    fn default() -> Self {
        Self {
            z_min: 10.0,
            z_max: 100.0,
            z_step: 10.0,
        }
    }
}

/// Weight grid `w_a = w_b = (1 − w_r)/2` over the listed delay weights, plus
/// a reference vector for single-weight experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub delay_weights: Vec<f64>,
    pub reference: WeightVector,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            delay_weights: (1..=19).map(|k| f64::from(k) / 20.0).collect(),
            reference: WeightVector::equal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub mode: LinkMode,
    /// Budgets of the error-rate sweep, dBm.
    pub ber_dbm: Vec<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 1,
            mode: LinkMode::Nlos,
            ber_dbm: (0..=16).map(|k| 17.0 + k as f64).collect(),
        }
    }
}

/// Sizes of the oracle suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub instances: usize,
    pub grid_step: f64,
    pub gradient_points: usize,
    pub psd_points: usize,
    pub psd_directions: usize,
    pub seed: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            grid_step: 0.005,
            gradient_points: 100,
            psd_points: 100,
            psd_directions: 10_000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// Everything an experiment run needs. Every block and field is optional in
/// the JSON form; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    pub power: PowerConfig,
    pub altitude: AltitudeConfig,
    pub weights: WeightConfig,
    pub q_model: QModel,
    pub schemes: Vec<Scheme>,
    /// Fixed `(α_a, α_b, α_r)` of the baseline scheme.
    pub sn_allocation: [f64; 3],
    pub mc: McConfig,
    pub validate: ValidateConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            channel: ChannelConfig::default(),
            power: PowerConfig::default(),
            altitude: AltitudeConfig::default(),
            weights: WeightConfig::default(),
            q_model: QModel::AsPrinted,
            schemes: vec![Scheme::Pa, Scheme::Sn],
            sn_allocation: [1.0 / 3.0; 3],
            mc: McConfig::default(),
            validate: ValidateConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_range(name: &str, lo: f64, hi: f64, step: f64) -> Result<()> {
    check(lo.is_finite() && hi.is_finite() && lo <= hi, || {
        format!("{name}: need min <= max, got [{lo}, {hi}]")
    })?;
    check(step > 0.0 && step.is_finite(), || {
        format!("{name}: step must be > 0, got {step}")
    })?;
    check((hi - lo) / step <= 1e5, || {
        format!("{name}: more than 1e5 sweep points")
    })
}

/// `lo, lo + step, …` up to `hi` inclusive, each value computed from its
/// index so the grid does not drift.
pub fn linspace_step(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// Watts from dBm.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// dBm from watts.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        check_range("geometry.d", g.d_min, g.d_max, g.d_step)?;
        check(g.d_min > 0.0, || {
            format!("geometry.d_min must be > 0, got {}", g.d_min)
        })?;
        check(g.d_max <= 1e6, || {
            format!("geometry.d_max must be <= 1e6 m, got {}", g.d_max)
        })?;
        check(g.d_default > 0.0 && g.d_default.is_finite(), || {
            "geometry.d_default must be > 0".into()
        })?;
        check(g.radius >= 0.0 && g.radius.is_finite(), || {
            "geometry.radius must be >= 0".into()
        })?;
        check((0.0..=g.radius).contains(&g.altitude), || {
            format!(
                "geometry.altitude must lie in [0, radius], got {}",
                g.altitude
            )
        })?;
        self.trajectory(g.altitude)
            .map_err(|e| Error::Config(format!("geometry: {e}")))?;

        self.channel_params(1.0)
            .validate()
            .map_err(|e| Error::Config(format!("channel: {e}")))?;

        let p = &self.power;
        check(p.total_power > 0.0 && p.total_power.is_finite(), || {
            "power.total_power must be > 0".into()
        })?;
        check_range("power.dbm", p.dbm_min, p.dbm_max, p.dbm_step)?;

        let a = &self.altitude;
        check_range("altitude.z", a.z_min, a.z_max, a.z_step)?;
        check(a.z_min >= 0.0 && a.z_max <= g.radius, || {
            format!("altitude.z must lie in [0, geometry.radius = {}]", g.radius)
        })?;

        check(!self.weights.delay_weights.is_empty(), || {
            "weights.delay_weights is empty".into()
        })?;
        for &w in &self.weights.delay_weights {
            check(w > 0.0 && w < 1.0, || {
                format!("weights.delay_weights: {w} outside (0, 1)")
            })?;
        }
        self.weights
            .reference
            .validate()
            .map_err(|e| Error::Config(format!("weights.reference: {e}")))?;

        check(!self.schemes.is_empty(), || "schemes is empty".into())?;
        self.sn_alloc()
            .map_err(|e| Error::Config(format!("sn_allocation: {e}")))?;

        check(self.mc.samples >= 1, || "mc.samples must be >= 1".into())?;
        check(self.mc.ber_dbm.iter().all(|v| v.is_finite()), || {
            "mc.ber_dbm must be finite".into()
        })?;

        let v = &self.validate;
        check(
            v.instances >= 1 && v.gradient_points >= 1 && v.psd_points >= 1,
            || "validate: counts must be >= 1".into(),
        )?;
        check(v.grid_step > 0.0 && v.grid_step <= 0.25, || {
            format!(
                "validate.grid_step must lie in (0, 0.25], got {}",
                v.grid_step
            )
        })
    }

    pub fn sn_alloc(&self) -> Result<AllocationFactors> {
        let [a, b, r] = self.sn_allocation;
        AllocationFactors::new(a, b, r)
    }

    pub fn weight_grid(&self) -> Vec<WeightVector> {
        self.weights
            .delay_weights
            .iter()
            .map(|&w_r| WeightVector {
                w_a: 0.5 * (1.0 - w_r),
                w_b: 0.5 * (1.0 - w_r),
                w_r,
            })
            .collect()
    }

    pub fn channel_params(&self, total_power: f64) -> ChannelParams {
        let c = &self.channel;
        ChannelParams {
            gamma_a: c.gamma_a,
            gamma_b: c.gamma_b,
            gamma_ab: c.gamma_ab,
            path_loss_exp: c.path_loss_exp,
            noise_var: c.noise_var,
            total_power,
            rate_efficiency: c.rate_efficiency,
        }
    }

    /// Orbit at the configured radius and the elevation giving `altitude`.
    pub fn trajectory(&self, altitude: f64) -> Result<Trajectory> {
        let g = &self.geometry;
        let phi = if g.radius > 0.0 {
            (altitude / g.radius).clamp(-1.0, 1.0).asin()
        } else {
            0.0
        };
        Trajectory::orbit(g.radius, phi, g.duration, g.slots)
    }

    pub fn distances(&self) -> Vec<f64> {
        let g = &self.geometry;
        linspace_step(g.d_min, g.d_max, g.d_step)
    }

    pub fn power_dbm(&self) -> Vec<f64> {
        let p = &self.power;
        linspace_step(p.dbm_min, p.dbm_max, p.dbm_step)
    }

    pub fn altitudes(&self) -> Vec<f64> {
        let a = &self.altitude;
        linspace_step(a.z_min, a.z_max, a.z_step)
    }

    pub fn trial(&self, seed: u64) -> TrialConfig {
        TrialConfig {
            samples: self.mc.samples,
            seed,
            mode: self.mc.mode,
            noise_scale: 1.0,
        }
    }

    pub fn has(&self, s: Scheme) -> bool {
        self.schemes.contains(&s)
    }
}

/// Perturbations the oracle suite must detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Scales the analytic gradient by `1 + 1e-4`.
    Gradient,
    /// Moves the optimised allocation off its optimum.
    ClosedForm,
    /// Doubles the analytic error rate.
    Ber,
}

impl Fault {
    pub const ALL: [Fault; 3] = [Fault::Gradient, Fault::ClosedForm, Fault::Ber];

    pub fn as_str(self) -> &'static str {
        match self {
            Fault::Gradient => "gradient",
            Fault::ClosedForm => "closed-form",
            Fault::Ber => "ber",
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fault {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Fault::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown fault `{s}`")))
    }
}
