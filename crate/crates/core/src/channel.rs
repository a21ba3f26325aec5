//! Analytic SNR, capacity and rate of the two-hop two-way relay link.

use serde::{Deserialize, Serialize};

use crate::energy::AllocationFactors;
use crate::error::{ensure, Error, Result};
use crate::geometry::{sample_trajectory, LinkGeometry, Trajectory};

/// Link-level constants. `gamma_*` are mean-square gains normalised by the
/// noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Direct S_a–S_b gain; zero without a line of sight.
    pub gamma_ab: f64,
    pub path_loss_exp: f64,
    pub noise_var: f64,
    /// Total power budget P̄, watts.
    pub total_power: f64,
    pub rate_efficiency: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            gamma_a: 1.0,
            gamma_b: 1.0,
            gamma_ab: 0.0,
            path_loss_exp: 2.0,
            noise_var: 1.0,
            total_power: 1.0,
            rate_efficiency: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        ensure(
            (2.0..=4.0).contains(&self.path_loss_exp),
            "path_loss_exp",
            || format!("must lie in [2, 4], got {}", self.path_loss_exp),
        )?;
        ensure(
            self.noise_var > 0.0 && self.noise_var.is_finite(),
            "noise_var",
            || format!("must be > 0, got {}", self.noise_var),
        )?;
        ensure(
            self.total_power > 0.0 && self.total_power.is_finite(),
            "total_power",
            || format!("must be > 0, got {}", self.total_power),
        )?;
        ensure(
            self.rate_efficiency > 0.0 && self.rate_efficiency <= 1.0,
            "rate_efficiency",
            || format!("must lie in (0, 1], got {}", self.rate_efficiency),
        )?;
        for (name, v) in [
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("gamma_ab", self.gamma_ab),
        ] {
            ensure(v >= 0.0 && v.is_finite(), name, || {
                format!("must be finite and >= 0, got {v}")
            })?;
        }
        Ok(())
    }

    fn loss(&self, dist: f64) -> f64 {
        dist.powf(-self.path_loss_exp)
    }
}

/// Transmit powers of the three nodes, watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePowers {
    pub p_a: f64,
    pub p_b: f64,
    pub p_r: f64,
}

/// Linear SNRs at S_a (`snr_a`) and S_b (`snr_b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPair {
    pub snr_a: f64,
    pub snr_b: f64,
}

/// Path-loss adjusted mean gains `(H, G)`.
pub fn effective_gains(c: &ChannelParams, g: &LinkGeometry) -> (f64, f64) {
    (c.gamma_a * c.loss(g.d_a), c.gamma_b * c.loss(g.d_b))
}

/// Relay gain using the mean-square channel gains `gamma·σ²`.
pub fn amplification_factor(c: &ChannelParams, g: &LinkGeometry, p: &NodePowers) -> f64 {
    let h2 = c.gamma_a * c.noise_var;
    let g2 = c.gamma_b * c.noise_var;
    amplification_factor_for(h2 * c.loss(g.d_a), g2 * c.loss(g.d_b), c.noise_var, p)
}

/// Relay gain for instantaneous received power gains `h2`, `g2` (path loss
/// included).
pub fn amplification_factor_for(h2: f64, g2: f64, noise_var: f64, p: &NodePowers) -> f64 {
    if p.p_r == 0.0 {
        return 0.0;
    }
    (p.p_r / (h2 * p.p_a + g2 * p.p_b + noise_var)).sqrt()
}

/// Exact SNRs for instantaneous per-noise gains `x = |h|²d_a^{-ɣ}/σ²` and
/// `y = |g|²d_b^{-ɣ}/σ²`.
pub fn snr_exact_gains(x: f64, y: f64, p: &NodePowers) -> SnrPair {
    let num = p.p_r * y * x;
    SnrPair {
        snr_a: num * p.p_b / (x * (p.p_r + p.p_a) + p.p_b * y + 1.0),
        snr_b: num * p.p_a / (p.p_a * x + (p.p_r + p.p_b) * y + 1.0),
    }
}

/// Exact SNRs without a direct path.
pub fn snr_exact_nlos(c: &ChannelParams, g: &LinkGeometry, p: &NodePowers) -> SnrPair {
    let (x, y) = effective_gains(c, g);
    snr_exact_gains(x, y, p)
}

/// Exact SNRs with the direct S_a–S_b path added.
pub fn snr_exact_los(c: &ChannelParams, g: &LinkGeometry, p: &NodePowers) -> SnrPair {
    let relayed = snr_exact_nlos(c, g, p);
    SnrPair {
        snr_a: relayed.snr_a + p.p_r * p.p_b * c.gamma_ab * c.loss(g.d_b),
        snr_b: relayed.snr_b + p.p_r * p.p_a * c.gamma_ab * c.loss(g.d_a),
    }
}

/// High-SNR pair from the effective gains directly.
pub fn snr_high_gains(a: &AllocationFactors, h: f64, g: f64, total_power: f64) -> SnrPair {
    let k = total_power * h * g * a.alpha_r;
    let da = (a.alpha_r + a.alpha_a) * h + a.alpha_b * g;
    let db = a.alpha_a * h + (a.alpha_r + a.alpha_b) * g;
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    SnrPair {
        snr_a: ratio(k * a.alpha_b, da),
        snr_b: ratio(k * a.alpha_a, db),
    }
}

/// High-SNR approximation of the SNR pair for an allocation of `c.total_power`.
pub fn snr_high(c: &ChannelParams, g: &LinkGeometry, a: &AllocationFactors) -> Result<SnrPair> {
    a.validate()?;
    let (h, gg) = effective_gains(c, g);
    Ok(snr_high_gains(a, h, gg, c.total_power))
}

/// `½ log2(1 + φ)` with `φ = 1 + γ_a + γ_b + γ_aγ_b`.
pub fn capacity(s: &SnrPair) -> f64 {
    let phi = 1.0 + s.snr_a + s.snr_b + s.snr_a * s.snr_b;
    0.5 * (1.0 + phi).log2()
}

/// Two-way sum rate `½(log2(1+γ_a) + log2(1+γ_b))`.
pub fn sum_rate(s: &SnrPair) -> f64 {
    0.5 * (s.snr_a.ln_1p() + s.snr_b.ln_1p()) / std::f64::consts::LN_2
}

/// Achievable rate `𝔥·C`.
pub fn rate(s: &SnrPair, efficiency: f64) -> f64 {
    efficiency * capacity(s)
}

/// Information causality over slots `1..N`: for every `n`, the relay must not
/// forward more than it has received in the previous slots.
pub fn causality_check(per_slot_rates: &[f64]) -> Result<bool> {
    if per_slot_rates.len() < 2 {
        return Err(Error::TooFewSlots(per_slot_rates.len()));
    }
    let mut forwarded = 0.0;
    let mut received = 0.0;
    for n in 1..per_slot_rates.len() {
        forwarded += per_slot_rates[n];
        received += per_slot_rates[n - 1];
        if forwarded > received {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-slot output of the SNR pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotSnr {
    pub slot: usize,
    pub geometry: LinkGeometry,
    pub h: f64,
    pub g: f64,
    pub powers: NodePowers,
    pub snr: SnrPair,
}

/// Distances, mean gains and power split per slot, then the high-SNR pair.
pub fn snr_pipeline(
    d: f64,
    trajectory: &Trajectory,
    c: &ChannelParams,
    a: &AllocationFactors,
) -> Result<Vec<SlotSnr>> {
    c.validate()?;
    a.validate()?;
    sample_trajectory(d, trajectory)?
        .into_iter()
        .map(|(slot, geometry)| {
            let (h, g) = effective_gains(c, &geometry);
            Ok(SlotSnr {
                slot,
                geometry,
                h,
                g,
                powers: a.powers(c.total_power),
                snr: snr_high_gains(a, h, g, c.total_power),
            })
        })
        .collect()
}
