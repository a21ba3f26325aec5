//! End-to-end SNR and bit error rate of an optimised allocation, from the
//! statistics of the two cascaded Rayleigh hops.

use serde::{Deserialize, Serialize};

use crate::bessel::k0_k1;
use crate::energy::{AllocationFactors, QModel};
use crate::error::{ensure, Error, Result};
use crate::optimizer::{optimal_allocation, OptimalAllocation, WeightVector};

/// Below this end-to-end SNR the high-SNR error-rate law is flagged.
pub const VALIDITY_SNR: f64 = 10.0;

/// Mean SNRs of the two hops after allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeStats {
    pub gamma_hp: f64,
    pub gamma_gp: f64,
}

impl CascadeStats {
    pub fn new(gamma_hp: f64, gamma_gp: f64) -> Result<Self> {
        ensure(gamma_hp > 0.0 && gamma_hp.is_finite(), "gamma_hp", || {
            format!("must be > 0, got {gamma_hp}")
        })?;
        ensure(gamma_gp > 0.0 && gamma_gp.is_finite(), "gamma_gp", || {
            format!("must be > 0, got {gamma_gp}")
        })?;
        Ok(Self { gamma_hp, gamma_gp })
    }

    /// `γ_hp = α_r·H·P̄`, `γ_gp = α_rα_b/(α_r + α_a)·G·P̄`.
    pub fn from_allocation(
        a: &AllocationFactors,
        h: f64,
        g: f64,
        total_power: f64,
    ) -> Result<Self> {
        if a.alpha_r == 0.0 || a.alpha_b == 0.0 {
            return Err(Error::ZeroAllocation(
                "cascade statistics need α_r, α_b > 0",
            ));
        }
        Self::new(
            a.alpha_r * h * total_power,
            a.alpha_r * a.alpha_b / (a.alpha_r + a.alpha_a) * g * total_power,
        )
    }

    /// `1/γ_hp + 1/γ_gp`.
    pub fn rate(&self) -> f64 {
        1.0 / self.gamma_hp + 1.0 / self.gamma_gp
    }

    pub fn min_gamma(&self) -> f64 {
        self.gamma_hp.min(self.gamma_gp)
    }
}

/// Harmonic combination of the two per-hop SNR terms.
pub fn optimal_snr(a: &AllocationFactors, h: f64, g: f64, total_power: f64) -> Result<f64> {
    let first = (a.alpha_r + 2.0 * a.alpha_a) * h * total_power;
    let second = (a.alpha_r + 2.0 * a.alpha_b) * g * total_power;
    if !(first > 0.0 && second > 0.0) {
        return Err(Error::ZeroAllocation("end-to-end SNR is zero"));
    }
    Ok(1.0 / (1.0 / first + 1.0 / second))
}

/// Exponential densities of the two hop SNRs at `eta`.
pub fn hop_pdfs(cs: &CascadeStats, eta: f64) -> (f64, f64) {
    let pdf = |gamma: f64| (-eta / gamma).exp() / gamma;
    (pdf(cs.gamma_hp), pdf(cs.gamma_gp))
}

/// Density of the harmonic-mean cascade SNR.
///
/// The Bessel form is singular at `eta = 0`, where the simplified exponential
/// form is returned instead.
pub fn cascade_pdf(cs: &CascadeStats, eta: f64, simplified: bool) -> f64 {
    if eta < 0.0 {
        return 0.0;
    }
    let rate = cs.rate();
    if simplified || eta == 0.0 {
        return rate * (-eta * rate).exp();
    }
    let prod = cs.gamma_hp * cs.gamma_gp;
    let u = 2.0 * eta / prod.sqrt();
    let (k0, k1) = k0_k1(u);
    let decay = (-eta * rate).exp();
    4.0 * eta / prod * k0 * decay
        + 2.0 * eta * (cs.gamma_hp + cs.gamma_gp) / prod.powf(1.5) * k1 * decay
}

/// `1 − exp(−η(1/γ_hp + 1/γ_gp))`.
pub fn cascade_cdf(cs: &CascadeStats, eta: f64) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    -(-eta * cs.rate()).exp_m1()
}

/// First-order expansion `η(1/γ_hp + 1/γ_gp)`.
pub fn cdf_first_order(cs: &CascadeStats, eta: f64) -> f64 {
    eta.max(0.0) * cs.rate()
}

/// Bit error rate with a validity flag for the high-SNR regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub ber: f64,
    pub snr: f64,
    /// `snr ≥ VALIDITY_SNR`.
    pub valid: bool,
}

/// `(Γ(3/2)/(α_r·P̄·√π))·(1/((α_r + 2α_a)H) + 1/((α_r + 2α_b)G))`.
pub fn optimal_ber(a: &AllocationFactors, h: f64, g: f64, total_power: f64) -> Result<BerEstimate> {
    let snr = optimal_snr(a, h, g, total_power)?;
    if a.alpha_r == 0.0 {
        return Err(Error::ZeroAllocation("no relay power"));
    }
    // Γ(3/2)/√π = 1/2
    let prefactor = 0.5 / (a.alpha_r * total_power);
    let ber = prefactor
        * (1.0 / ((a.alpha_r + 2.0 * a.alpha_a) * h) + 1.0 / ((a.alpha_r + 2.0 * a.alpha_b) * g));
    Ok(BerEstimate {
        ber,
        snr,
        valid: snr >= VALIDITY_SNR,
    })
}

/// `(1/(2√π))·∫₀^∞ e^{−η}/√η·F(η) dη` with the first-order CDF, which
/// evaluates to `¼(1/γ_hp + 1/γ_gp)`.
pub fn cascade_ber(cs: &CascadeStats) -> f64 {
    0.25 * cs.rate()
}

/// One row of the per-weight error-rate pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub weight_index: usize,
    pub weights: WeightVector,
    pub optimum: OptimalAllocation,
    pub stats: CascadeStats,
    pub estimate: BerEstimate,
    pub cascade_ber: f64,
}

/// Optimises each weight, then evaluates the cascade statistics and the
/// resulting error rate.
pub fn ber_pipeline(
    weights: &[WeightVector],
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
) -> Result<Vec<BerPoint>> {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let optimum = optimal_allocation(w, h, g, total_power, 2.0, model)?;
            let stats = CascadeStats::from_allocation(&optimum.alloc, h, g, total_power)?;
            let estimate = optimal_ber(&optimum.alloc, h, g, total_power)?;
            Ok(BerPoint {
                weight_index: i,
                weights: *w,
                optimum,
                stats,
                estimate,
                cascade_ber: cascade_ber(&stats),
            })
        })
        .collect()
}
