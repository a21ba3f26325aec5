//! Per-bit energy and per-bit transmission time as functions of the power
//! allocation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{snr_high_gains, NodePowers};
use crate::error::{ensure, Error, Result};

/// Fractions of the total power budget given to S_a, S_b and the relay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationFactors {
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub alpha_r: f64,
}

impl AllocationFactors {
    pub fn new(alpha_a: f64, alpha_b: f64, alpha_r: f64) -> Result<Self> {
        let a = Self {
            alpha_a,
            alpha_b,
            alpha_r,
        };
        a.validate()?;
        Ok(a)
    }

    pub const fn equal_split() -> Self {
        Self {
            alpha_a: 1.0 / 3.0,
            alpha_b: 1.0 / 3.0,
            alpha_r: 1.0 / 3.0,
        }
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self {
            alpha_a: x[0],
            alpha_b: x[1],
            alpha_r: x[2],
        }
    }

    /// `[alpha_a, alpha_b, alpha_r]`.
    pub fn to_array(self) -> [f64; 3] {
        [self.alpha_a, self.alpha_b, self.alpha_r]
    }

    pub fn sum(&self) -> f64 {
        self.alpha_a + self.alpha_b + self.alpha_r
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_a", self.alpha_a),
            ("alpha_b", self.alpha_b),
            ("alpha_r", self.alpha_r),
        ] {
            ensure(v.is_finite() && (0.0..=1.0).contains(&v), name, || {
                format!("must lie in [0, 1], got {v}")
            })?;
        }
        ensure(self.sum() <= 1.0 + 1e-12, "allocation", || {
            format!("factors sum to {} > 1", self.sum())
        })
    }

    pub fn is_interior(&self) -> bool {
        self.alpha_a > 0.0 && self.alpha_b > 0.0 && self.alpha_r > 0.0 && self.sum() < 1.0
    }

    /// Transmit powers `p_i = P̄·α_i`.
    pub fn powers(&self, total_power: f64) -> NodePowers {
        NodePowers {
            p_a: total_power * self.alpha_a,
            p_b: total_power * self.alpha_b,
            p_r: total_power * self.alpha_r,
        }
    }

    /// Swap the roles of the two users.
    pub fn mirrored(self) -> Self {
        Self {
            alpha_a: self.alpha_b,
            alpha_b: self.alpha_a,
            alpha_r: self.alpha_r,
        }
    }
}

/// A nonnegative quantity that may be unbounded (e.g. the bit time of a link
/// that carries no information).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    Unbounded,
}

impl Extended {
    pub fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            Extended::Finite(v)
        } else {
            Extended::Unbounded
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Unbounded => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// IEEE view, `+inf` when unbounded.
    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl std::ops::Add for Extended {
    type Output = Extended;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Unbounded,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Which bit-time expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QModel {
    /// `2 / log2(1 + G·P̄·α_rα_b / (α_r + α_a + α_b·G/H))` and its mirror.
    #[default]
    AsPrinted,
    /// `2 / log2(1 + γ)` with γ taken from the high-SNR SNR pair.
    Symmetric,
}

impl QModel {
    pub fn as_str(self) -> &'static str {
        match self {
            QModel::AsPrinted => "as-printed",
            QModel::Symmetric => "symmetric",
        }
    }
}

impl fmt::Display for QModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-printed" => Ok(QModel::AsPrinted),
            "symmetric" => Ok(QModel::Symmetric),
            other => Err(Error::InvalidParameter {
                name: "q_model",
                reason: format!("expected `as-printed` or `symmetric`, got `{other}`"),
            }),
        }
    }
}

/// Energies and bit times at one allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDelayPoint {
    pub e_a: f64,
    pub e_b: f64,
    pub q_a: Extended,
    pub q_b: Extended,
    pub e_total: f64,
}

/// Gain-weighted power sums seen by S_a and S_b.
pub(crate) fn energy_loads(a: &AllocationFactors, h: f64, g: f64) -> (f64, f64) {
    (
        (a.alpha_r + a.alpha_a) * h + a.alpha_b * g,
        a.alpha_a * h + (a.alpha_r + a.alpha_b) * g,
    )
}

/// `q·(2^{2/q} − 1)`, the energy per unit load.
pub fn energy_factor(q: f64) -> f64 {
    q * (2.0 / q * std::f64::consts::LN_2).exp_m1()
}

/// Per-bit energies of S_a and S_b for a common bit time `q`.
pub fn bit_energy(a: &AllocationFactors, h: f64, g: f64, q: f64) -> Result<(f64, f64)> {
    if !(q > 0.0) {
        return Err(Error::NonPositiveBitTime(q));
    }
    let k = energy_factor(q);
    let (la, lb) = energy_loads(a, h, g);
    Ok((k * la, k * lb))
}

pub fn total_energy(a: &AllocationFactors, h: f64, g: f64, q: f64) -> Result<f64> {
    let (ea, eb) = bit_energy(a, h, g, q)?;
    Ok(ea + eb)
}

/// Bit time needed to carry one bit in two slots at linear SNR `snr`.
pub fn bit_time_from_snr(snr: f64) -> Extended {
    if snr > 0.0 && snr.is_finite() {
        Extended::Finite(2.0 * std::f64::consts::LN_2 / snr.ln_1p())
    } else {
        Extended::Unbounded
    }
}

/// Per-bit transmission times `(q_a, q_b)`.
pub fn bit_time(
    a: &AllocationFactors,
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
) -> (Extended, Extended) {
    if !(h > 0.0 && g > 0.0) {
        return (Extended::Unbounded, Extended::Unbounded);
    }
    match model {
        QModel::AsPrinted => {
            let ratio = g / h;
            let arg_a = g * total_power * a.alpha_r * a.alpha_b
                / (a.alpha_r + a.alpha_a + a.alpha_b * ratio);
            let arg_b = g * total_power * a.alpha_r * a.alpha_a
                / (a.alpha_a + (a.alpha_r + a.alpha_b) * ratio);
            (printed_q(arg_a), printed_q(arg_b))
        }
        QModel::Symmetric => {
            let s = snr_high_gains(a, h, g, total_power);
            (bit_time_from_snr(s.snr_a), bit_time_from_snr(s.snr_b))
        }
    }
}

fn printed_q(arg: f64) -> Extended {
    if arg > 0.0 && arg.is_finite() {
        Extended::from_f64(2.0 / (1.0 + arg).log2())
    } else {
        Extended::Unbounded
    }
}

/// Energy per bit of one direction at its own bit time.
///
/// For an unbounded bit time the limit `q·(2^{2/q} − 1) → 2 ln 2` is used.
fn direction_energy(q: Extended, load: f64) -> f64 {
    match q {
        Extended::Finite(q) => energy_factor(q) * load,
        Extended::Unbounded => 2.0 * std::f64::consts::LN_2 * load,
    }
}

/// Energies and bit times with each direction's energy evaluated at its own
/// bit time.
pub fn energy_delay_point(
    a: &AllocationFactors,
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
) -> EnergyDelayPoint {
    let (q_a, q_b) = bit_time(a, h, g, total_power, model);
    let (la, lb) = energy_loads(a, h, g);
    let e_a = direction_energy(q_a, la);
    let e_b = direction_energy(q_b, lb);
    EnergyDelayPoint {
        e_a,
        e_b,
        q_a,
        q_b,
        e_total: e_a + e_b,
    }
}

/// True when the summed transmit power of the forwarding slots stays within
/// the budget. `per_slot` lists the slots after the first one.
pub fn power_budget_ok(per_slot: &[NodePowers], total_power: f64) -> bool {
    let used: f64 = per_slot.iter().map(|p| p.p_a + p.p_r + p.p_b).sum();
    used <= total_power
}
