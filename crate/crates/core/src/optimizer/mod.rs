//! Weighted-sum minimisation of `(E_a, E_b, q_a + q_b)` over the allocation
//! simplex.
//!
//! The objective couples each direction's energy to its own bit time:
//!
//! `F = w_a·E_a + w_b·E_b + w_r·(q_a + q_b)`
//!
//! With `K = P̄HG` and `q(γ) = 2 ln 2 / ln(1 + γ)` this is
//! `q(γ_a)·(w_a·K·α_rα_b + w_r) + q(γ_b)·(w_b·K·α_rα_a + w_r)`, which is the
//! form the analytic derivatives below are taken from.

mod closed_form;
mod numerical;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::snr_high_gains;
use crate::energy::{energy_delay_point, energy_factor, AllocationFactors, Extended, QModel};
use crate::error::{ensure, Error, Result};

pub use closed_form::{
    closed_form_allocation, optimal_allocation, printed_candidates, printed_terms, PrintedTerms,
};
pub use numerical::{numerical_allocation, symmetric_allocation};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Scalarisation weights for S_a energy, S_b energy and total delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w_a: f64,
    pub w_b: f64,
    pub w_r: f64,
}

impl WeightVector {
    pub fn new(w_a: f64, w_b: f64, w_r: f64) -> Result<Self> {
        let w = Self { w_a, w_b, w_r };
        w.validate()?;
        Ok(w)
    }

    pub const fn equal() -> Self {
        Self {
            w_a: 1.0 / 3.0,
            w_b: 1.0 / 3.0,
            w_r: 1.0 / 3.0,
        }
    }

    /// `w_a = w_b = (1 − w_r)/2`.
    pub fn from_delay_weight(w_r: f64) -> Result<Self> {
        Self::new(0.5 * (1.0 - w_r), 0.5 * (1.0 - w_r), w_r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("w_a", self.w_a), ("w_b", self.w_b), ("w_r", self.w_r)] {
            ensure(v > 0.0 && v <= 1.0, name, || {
                format!("must lie in (0, 1], got {v}")
            })?;
        }
        let s = self.w_a + self.w_b + self.w_r;
        ensure(s <= 1.0 + 1e-12, "weights", || format!("sum to {s} > 1"))
    }

    pub fn mirrored(self) -> Self {
        Self {
            w_a: self.w_b,
            w_b: self.w_a,
            w_r: self.w_r,
        }
    }
}

/// Which solution path produced an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootBranch {
    /// `+` root of the quadratic for α_a.
    Plus,
    /// `−` root.
    Minus,
    /// `H = G`, solved with α_a = α_b.
    Symmetric,
    /// Closed form inapplicable; numerical optimum used instead.
    Fallback,
    Numerical,
    /// Not optimised (fixed baseline split).
    Fixed,
}

impl RootBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            RootBranch::Plus => "plus",
            RootBranch::Minus => "minus",
            RootBranch::Symmetric => "symmetric",
            RootBranch::Fallback => "fallback",
            RootBranch::Numerical => "numerical",
            RootBranch::Fixed => "fixed",
        }
    }

    pub fn is_closed_form(self) -> bool {
        matches!(
            self,
            RootBranch::Plus | RootBranch::Minus | RootBranch::Symmetric
        )
    }
}

impl fmt::Display for RootBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One optimised operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalAllocation {
    pub alloc: AllocationFactors,
    pub q_star: Extended,
    pub e_star: f64,
    pub f_value: Extended,
    pub root_branch: RootBranch,
    pub converged: bool,
    pub iterations: usize,
    /// Bit time the closed-form fixed point settled on, when it ran.
    pub q_fixed_point: Option<f64>,
}

impl OptimalAllocation {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        alloc: AllocationFactors,
        w: &WeightVector,
        h: f64,
        g: f64,
        total_power: f64,
        model: QModel,
        root_branch: RootBranch,
        converged: bool,
        iterations: usize,
        q_fixed_point: Option<f64>,
    ) -> Self {
        let q_star =
            optimal_delay(&alloc, h, g, total_power).map_or(Extended::Unbounded, Extended::Finite);
        let e_star = match q_star {
            Extended::Finite(q) => optimal_energy(&alloc, h, g, q),
            Extended::Unbounded => f64::NAN,
        };
        Self {
            alloc,
            q_star,
            e_star,
            f_value: scalarized_objective(&alloc, w, h, g, total_power, model),
            root_branch,
            converged,
            iterations,
            q_fixed_point,
        }
    }
}

/// `w_a·E_a + w_b·E_b + w_r·(q_a + q_b)` at one slot.
pub fn scalarized_objective(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
) -> Extended {
    let p = energy_delay_point(a, h, g, total_power, model);
    match p.q_a + p.q_b {
        Extended::Finite(q) => Extended::Finite(w.w_a * p.e_a + w.w_b * p.e_b + w.w_r * q),
        Extended::Unbounded => Extended::Unbounded,
    }
}

/// Objective summed over the forwarding slots (every slot after the first).
pub fn trajectory_objective(
    a: &AllocationFactors,
    w: &WeightVector,
    gains: &[(f64, f64)],
    total_power: f64,
    model: QModel,
) -> Extended {
    gains
        .iter()
        .skip(1)
        .fold(Extended::Finite(0.0), |acc, &(h, g)| {
            acc + scalarized_objective(a, w, h, g, total_power, model)
        })
}

fn q_of(gamma: f64) -> f64 {
    2.0 * std::f64::consts::LN_2 / gamma.ln_1p()
}

fn dq_of(gamma: f64) -> f64 {
    let l = gamma.ln_1p();
    -2.0 * std::f64::consts::LN_2 / ((1.0 + gamma) * l * l)
}

fn d2q_of(gamma: f64) -> f64 {
    let l = gamma.ln_1p();
    2.0 * std::f64::consts::LN_2 * (l + 2.0) / ((1.0 + gamma).powi(2) * l.powi(3))
}

/// Gradient and Hessian of one direction's contribution
/// `q(γ)·(w_e·N + w_r)`, with `γ = N/D`, `N = K·α_r·α_x` and `D` linear.
struct Term {
    grad: Vec3,
    hess: Mat3,
}

fn direction_term(k: f64, partner: usize, a: &Vec3, dden: Vec3, w_e: f64, w_r: f64) -> Term {
    const R: usize = 2;
    let num = k * a[R] * a[partner];
    let den = dden[0] * a[0] + dden[1] * a[1] + dden[2] * a[2];
    let gamma = num / den;

    let mut dnum = [0.0; 3];
    dnum[R] = k * a[partner];
    dnum[partner] = k * a[R];
    let mut hnum = [[0.0; 3]; 3];
    hnum[R][partner] = k;
    hnum[partner][R] = k;

    let dgam: Vec3 = std::array::from_fn(|i| (dnum[i] - gamma * dden[i]) / den);
    let hgam: Mat3 = std::array::from_fn(|i| {
        std::array::from_fn(|j| (hnum[i][j] - dgam[i] * dden[j] - dden[i] * dgam[j]) / den)
    });

    let u = w_e * num + w_r;
    let du: Vec3 = std::array::from_fn(|i| w_e * dnum[i]);
    let (q, q1, q2) = (q_of(gamma), dq_of(gamma), d2q_of(gamma));

    Term {
        grad: std::array::from_fn(|i| q1 * u * dgam[i] + q * du[i]),
        hess: std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                q2 * u * dgam[i] * dgam[j]
                    + q1 * u * hgam[i][j]
                    + q1 * (dgam[i] * du[j] + du[i] * dgam[j])
                    + q * w_e * hnum[i][j]
            })
        }),
    }
}

fn terms(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
) -> (Term, Term) {
    let x = a.to_array();
    let k = total_power * h * g;
    // D_a = (α_r + α_a)H + α_bG, D_b = α_aH + (α_r + α_b)G
    let ta = direction_term(k, 1, &x, [h, g, h], w.w_a, w.w_r);
    let tb = direction_term(k, 0, &x, [h, g, g], w.w_b, w.w_r);
    (ta, tb)
}

fn require_positive(a: &AllocationFactors) -> Result<()> {
    if a.alpha_a > 0.0 && a.alpha_b > 0.0 && a.alpha_r > 0.0 {
        Ok(())
    } else {
        Err(Error::BoundaryPoint)
    }
}

/// Objective value along the analytic route used by the derivatives.
pub(crate) fn objective_value(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
) -> f64 {
    if !(a.alpha_a > 0.0 && a.alpha_b > 0.0 && a.alpha_r > 0.0) {
        return f64::INFINITY;
    }
    let s = snr_high_gains(a, h, g, total_power);
    let k = total_power * h * g * a.alpha_r;
    q_of(s.snr_a) * (w.w_a * k * a.alpha_b + w.w_r)
        + q_of(s.snr_b) * (w.w_b * k * a.alpha_a + w.w_r)
}

/// `(∂F/∂α_a, ∂F/∂α_b, ∂F/∂α_r)` at an interior point.
pub fn gradient(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
) -> Result<Vec3> {
    require_positive(a)?;
    let (ta, tb) = terms(a, w, h, g, total_power);
    Ok(std::array::from_fn(|i| ta.grad[i] + tb.grad[i]))
}

/// Full Hessian in `(α_a, α_b, α_r)` order.
pub fn hessian(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
) -> Result<Mat3> {
    require_positive(a)?;
    let (ta, tb) = terms(a, w, h, g, total_power);
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| ta.hess[i][j] + tb.hess[i][j])
    }))
}

/// Mixed partials `∂²F/∂α_a∂α_b`, `∂²F/∂α_b∂α_r`, `∂²F/∂α_r∂α_a`, each split
/// into the S_a-direction and S_b-direction contributions.
pub fn second_derivatives(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
) -> Result<[[f64; 2]; 3]> {
    require_positive(a)?;
    let (ta, tb) = terms(a, w, h, g, total_power);
    let pairs = [(0, 1), (1, 2), (2, 0)];
    Ok(pairs.map(|(i, j)| [ta.hess[i][j], tb.hess[i][j]]))
}

/// True when every mixed partial is positive.
pub fn mixed_partials_positive(m: &[[f64; 2]; 3]) -> bool {
    m.iter().all(|row| row[0] + row[1] > 0.0)
}

/// The closed-form first derivatives with `q` held fixed, kept for the
/// validation report. They are not the derivative of
/// [`scalarized_objective`].
pub fn gradient_as_printed(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    q: f64,
) -> Vec3 {
    let (aa, ab, ar) = (a.alpha_a, a.alpha_b, a.alpha_r);
    let c = energy_factor(q);
    let da = ab * g + h * ar + h * aa;
    let db = ab * g + g * ar + h * aa;
    let (da2, db2) = (da * da, db * db);
    let gp = w.w_r * g * total_power;
    [
        c * h * (w.w_a + w.w_b) - gp * (ab * h * h * ar / da2 + g * h * ar * (ab + ar) / db2),
        c * g * (w.w_a + w.w_b) + gp * (h * h * ar * (aa + ar) / da2 - aa * g * h * ar / db2),
        c * h * (h * w.w_a + g * w.w_b)
            + gp * (ab * h * (aa * h + ab * g) / da2 + aa * h * (aa * h + ab * g) / db2),
    ]
}

/// `[[0, ∇Fᵀ], [∇F, ∇²F]]`.
pub fn bordered_hessian(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
) -> Result<[[f64; 4]; 4]> {
    let gr = gradient(a, w, h, g, total_power)?;
    let hs = hessian(a, w, h, g, total_power)?;
    let mut m = [[0.0; 4]; 4];
    for i in 0..3 {
        m[0][i + 1] = gr[i];
        m[i + 1][0] = gr[i];
        for j in 0..3 {
            m[i + 1][j + 1] = hs[i][j];
        }
    }
    Ok(m)
}

/// Outcome of sampling `zᵀH_bz` over random directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub psd: bool,
    pub trials: usize,
    pub violations: usize,
    /// Minimum of `zᵀH_bz / (‖H_b‖_F·‖z‖²)` over the sampled directions.
    pub worst_ratio: f64,
}

pub fn quadratic_form(m: &[[f64; 4]; 4], z: &[f64; 4]) -> f64 {
    (0..4)
        .map(|i| z[i] * (0..4).map(|j| m[i][j] * z[j]).sum::<f64>())
        .sum()
}

/// Checks `zᵀH_bz ≥ −1e-9·‖H_b‖·‖z‖²` for `trials` Gaussian directions plus
/// the zero vector.
#[allow(clippy::too_many_arguments)]
pub fn bordered_hessian_psd(
    a: &AllocationFactors,
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    trials: usize,
    seed: u64,
) -> Result<PsdReport> {
    let m = bordered_hessian(a, w, h, g, total_power)?;
    let norm = m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let zero = [0.0; 4];
    if quadratic_form(&m, &zero) < 0.0 {
        violations += 1;
    }
    for _ in 0..trials {
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let zz: f64 = z.iter().map(|v| v * v).sum();
        let form = quadratic_form(&m, &z);
        let scale = norm * zz;
        if form < -1e-9 * scale {
            violations += 1;
        }
        if scale > 0.0 {
            worst = worst.min(form / scale);
        }
    }
    Ok(PsdReport {
        psd: violations == 0,
        trials,
        violations,
        worst_ratio: worst,
    })
}

/// Norm of the gradient projected onto the feasible directions at `a`: the
/// full gradient in the interior, and its component off the `Σα = 1` normal
/// on that face.
pub fn projected_gradient_norm(a: &AllocationFactors, grad: &Vec3) -> f64 {
    let norm = |v: &Vec3| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if a.sum() < 1.0 - 1e-9 {
        return norm(grad);
    }
    let mean = grad.iter().sum::<f64>() / 3.0;
    if mean < 0.0 {
        norm(&grad.map(|x| x - mean))
    } else {
        norm(grad)
    }
}

/// Bit time `2 / (1 + log2(1 + Φ))` at an optimised allocation.
pub fn optimal_delay(a: &AllocationFactors, h: f64, g: f64, total_power: f64) -> Result<f64> {
    let ratio = g / h;
    let snr_a =
        g * total_power * a.alpha_r * a.alpha_b / (a.alpha_r + a.alpha_a + a.alpha_b * ratio);
    let snr_b =
        g * total_power * a.alpha_r * a.alpha_a / (a.alpha_a + (a.alpha_r + a.alpha_b) * ratio);
    let la = snr_a.ln_1p() / std::f64::consts::LN_2;
    let lb = snr_b.ln_1p() / std::f64::consts::LN_2;
    let phi = 1.0 + la + la * (1.0 + snr_b) + lb;
    if !phi.is_finite() {
        return Err(Error::NonFinite("optimal_delay"));
    }
    Ok(2.0 / (1.0 + (1.0 + phi).log2()))
}

/// `q·(2^{2/q} − 1)·((α_r + 2α_a)H + (α_r + 2α_b)G)`.
pub fn optimal_energy(a: &AllocationFactors, h: f64, g: f64, q: f64) -> f64 {
    if a.alpha_a == 0.0 && a.alpha_b == 0.0 && a.alpha_r == 0.0 {
        return 0.0;
    }
    energy_factor(q) * ((a.alpha_r + 2.0 * a.alpha_a) * h + (a.alpha_r + 2.0 * a.alpha_b) * g)
}

/// One weight of a trade-off sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub weight_index: usize,
    pub weights: WeightVector,
    pub optimum: OptimalAllocation,
    pub e_a: f64,
    pub e_b: f64,
    pub q_a: Extended,
    pub q_b: Extended,
    pub pareto: bool,
}

/// Marks the points not dominated in `(q*, E*)` (both minimised).
pub fn pareto_flags(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&(q, e)| {
            q.is_finite()
                && e.is_finite()
                && !points
                    .iter()
                    .any(|&(q2, e2)| q2 <= q && e2 <= e && (q2 < q || e2 < e))
        })
        .collect()
}

/// Optimises every weight vector and flags the Pareto-optimal results.
pub fn tradeoff_sweep(
    weights: &[WeightVector],
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
) -> Result<Vec<TradeoffPoint>> {
    ensure(!weights.is_empty(), "weights", || {
        "weight grid is empty".into()
    })?;
    let mut points: Vec<TradeoffPoint> = weights
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let optimum = optimal_allocation(w, h, g, total_power, 2.0, model)?;
            let ed = energy_delay_point(&optimum.alloc, h, g, total_power, model);
            Ok(TradeoffPoint {
                weight_index: i,
                weights: *w,
                optimum,
                e_a: ed.e_a,
                e_b: ed.e_b,
                q_a: ed.q_a,
                q_b: ed.q_b,
                pareto: false,
            })
        })
        .collect::<Result<_>>()?;
    let front: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.optimum.q_star.value(), p.optimum.e_star))
        .collect();
    for (p, flag) in points.iter_mut().zip(pareto_flags(&front)) {
        p.pareto = flag;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_gradient(a: &AllocationFactors, w: &WeightVector, h: f64, g: f64, p: f64) -> Vec3 {
        let x = a.to_array();
        std::array::from_fn(|i| {
            let step = 1e-6 * x[i];
            let mut up = x;
            let mut dn = x;
            up[i] += step;
            dn[i] -= step;
            let f = |v: [f64; 3]| {
                scalarized_objective(
                    &AllocationFactors::from_array(v),
                    w,
                    h,
                    g,
                    p,
                    QModel::AsPrinted,
                )
                .value()
            };
            (f(up) - f(dn)) / (2.0 * step)
        })
    }

    #[test]
    fn objective_example() {
        let f = scalarized_objective(
            &AllocationFactors::equal_split(),
            &WeightVector::equal(),
            1.0,
            1.0,
            9.0,
            QModel::AsPrinted,
        );
        assert!((f.value() - 8.0 / 3.0).abs() < 1e-12);
        let direct = objective_value(
            &AllocationFactors::equal_split(),
            &WeightVector::equal(),
            1.0,
            1.0,
            9.0,
        );
        assert!((direct - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn objective_unbounded_without_relay() {
        let a = AllocationFactors::new(0.5, 0.5, 0.0).unwrap();
        let f = scalarized_objective(&a, &WeightVector::equal(), 1.0, 1.0, 9.0, QModel::AsPrinted);
        assert_eq!(f, Extended::Unbounded);
    }

    #[test]
    fn delay_dominated_by_small_energy_weight() {
        // Vanishing delay weight: the energy terms favour shrinking every factor.
        let w = WeightVector::new(0.4995, 0.4995, 1e-9).unwrap();
        let big = AllocationFactors::new(0.3, 0.3, 0.3).unwrap();
        let small = AllocationFactors::new(0.03, 0.03, 0.03).unwrap();
        let f = |a| scalarized_objective(&a, &w, 1.0, 1.0, 9.0, QModel::AsPrinted).value();
        assert!(f(small) < f(big));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let w = WeightVector::new(0.2, 0.3, 0.4).unwrap();
        let a = AllocationFactors::new(0.2, 0.35, 0.3).unwrap();
        let an = gradient(&a, &w, 0.8, 2.5, 1.4).unwrap();
        let fd = fd_gradient(&a, &w, 0.8, 2.5, 1.4);
        for i in 0..3 {
            assert!(
                (an[i] - fd[i]).abs() <= 1e-6 * fd[i].abs().max(1.0),
                "{an:?} vs {fd:?}"
            );
        }
    }

    #[test]
    fn gradient_symmetry_and_zero_delay_weight() {
        let w = WeightVector::new(0.3, 0.3, 0.4).unwrap();
        let a = AllocationFactors::new(0.25, 0.25, 0.4).unwrap();
        let gr = gradient(&a, &w, 1.7, 1.7, 0.9).unwrap();
        assert!((gr[0] - gr[1]).abs() <= 1e-12 * gr[0].abs());

        // Delay weight zero: gradient is the weighted energy gradient alone.
        let w0 = WeightVector {
            w_a: 0.4,
            w_b: 0.6,
            w_r: 0.0,
        };
        let g0 = gradient(&a, &w0, 1.2, 0.7, 2.0).unwrap();
        let x = a.to_array();
        let energy = |v: [f64; 3]| {
            let p = energy_delay_point(
                &AllocationFactors::from_array(v),
                1.2,
                0.7,
                2.0,
                QModel::Symmetric,
            );
            0.4 * p.e_a + 0.6 * p.e_b
        };
        for i in 0..3 {
            let mut up = x;
            let mut dn = x;
            up[i] += 1e-7;
            dn[i] -= 1e-7;
            let fd = (energy(up) - energy(dn)) / 2e-7;
            assert!((g0[i] - fd).abs() <= 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn boundary_rejected() {
        let a = AllocationFactors::new(0.0, 0.5, 0.5).unwrap();
        assert_eq!(
            gradient(&a, &WeightVector::equal(), 1.0, 1.0, 1.0),
            Err(Error::BoundaryPoint)
        );
        assert_eq!(
            second_derivatives(&a, &WeightVector::equal(), 1.0, 1.0, 1.0),
            Err(Error::BoundaryPoint)
        );
        assert!(bordered_hessian_psd(&a, &WeightVector::equal(), 1.0, 1.0, 1.0, 10, 1).is_err());
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let w = WeightVector::new(0.25, 0.35, 0.3).unwrap();
        let a = AllocationFactors::new(0.15, 0.3, 0.45).unwrap();
        let (h, g, p) = (1.9, 0.6, 1.1);
        let hs = hessian(&a, &w, h, g, p).unwrap();
        let x = a.to_array();
        for j in 0..3 {
            let step = 1e-6 * x[j];
            let mut up = x;
            let mut dn = x;
            up[j] += step;
            dn[j] -= step;
            let gu = gradient(&AllocationFactors::from_array(up), &w, h, g, p).unwrap();
            let gd = gradient(&AllocationFactors::from_array(dn), &w, h, g, p).unwrap();
            for i in 0..3 {
                let fd = (gu[i] - gd[i]) / (2.0 * step);
                assert!(
                    (hs[i][j] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                    "({i},{j}) {} vs {fd}",
                    hs[i][j]
                );
            }
        }
        let m = second_derivatives(&a, &w, h, g, p).unwrap();
        assert!((m[0][0] + m[0][1] - hs[0][1]).abs() < 1e-12 * hs[0][1].abs().max(1.0));
        assert!((m[1][0] + m[1][1] - hs[1][2]).abs() < 1e-12 * hs[1][2].abs().max(1.0));
    }

    #[test]
    fn mirrored_mixed_partials_at_symmetric_point() {
        let w = WeightVector::new(0.3, 0.3, 0.3).unwrap();
        let a = AllocationFactors::new(0.2, 0.2, 0.5).unwrap();
        let hs = hessian(&a, &w, 1.3, 1.3, 2.0).unwrap();
        assert!((hs[1][2] - hs[0][2]).abs() <= 1e-12 * hs[0][2].abs());
        assert!((hs[0][0] - hs[1][1]).abs() <= 1e-12 * hs[0][0].abs());
    }

    #[test]
    fn zero_direction_never_violates() {
        let m = bordered_hessian(
            &AllocationFactors::new(0.2, 0.3, 0.4).unwrap(),
            &WeightVector::equal(),
            1.0,
            2.0,
            1.0,
        )
        .unwrap();
        assert_eq!(quadratic_form(&m, &[0.0; 4]), 0.0);
    }

    #[test]
    fn optimal_delay_and_energy_examples() {
        let a = AllocationFactors::equal_split();
        let q = optimal_delay(&a, 1.0, 1.0, 9.0).unwrap();
        assert!((q - 2.0 / (1.0 + 6f64.log2())).abs() < 1e-12);
        assert!((optimal_energy(&a, 1.0, 1.0, 2.0) - 4.0).abs() < 1e-12);
        let zero = AllocationFactors::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(optimal_energy(&zero, 1.0, 1.0, 2.0), 0.0);
        let no_relay = AllocationFactors::new(0.5, 0.5, 0.0).unwrap();
        assert!((optimal_delay(&no_relay, 1.0, 1.0, 9.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pareto_flags_basic() {
        let pts = [
            (1.0, 5.0),
            (2.0, 3.0),
            (2.5, 3.5),
            (3.0, 1.0),
            (f64::INFINITY, 0.1),
        ];
        assert_eq!(pareto_flags(&pts), vec![true, true, false, true, false]);
    }

    #[test]
    fn weight_validation() {
        assert!(WeightVector::new(0.0, 0.5, 0.5).is_err());
        assert!(WeightVector::new(0.5, 0.5, 0.5).is_err());
        let w = WeightVector::from_delay_weight(0.4).unwrap();
        assert!((w.w_a - 0.3).abs() < 1e-15 && w.w_a == w.w_b);
    }

    fn interior() -> impl Strategy<Value = AllocationFactors> {
        (0.02..1.0f64, 0.02..1.0f64, 0.02..1.0f64, 0.1..0.99f64).prop_map(|(a, b, r, s)| {
            let t = s / (a + b + r);
            AllocationFactors {
                alpha_a: a * t,
                alpha_b: b * t,
                alpha_r: r * t,
            }
        })
    }

    proptest! {
        #[test]
        fn gradient_agrees_with_fd(a in interior(), h in 0.01..10.0f64, g in 0.01..10.0f64, p in 0.1..2.0f64,
                                   wa in 0.05..1.0f64, wb in 0.05..1.0f64, wr in 0.05..1.0f64) {
            let s = wa + wb + wr;
            let w = WeightVector { w_a: wa / s, w_b: wb / s, w_r: wr / s };
            let an = gradient(&a, &w, h, g, p).unwrap();
            let fd = fd_gradient(&a, &w, h, g, p);
            let scale = an.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..3 {
                prop_assert!((an[i] - fd[i]).abs() <= 1e-6 * scale, "{:?} vs {:?}", an, fd);
            }
        }

        #[test]
        fn analytic_value_matches_energy_route(a in interior(), h in 0.01..10.0f64, g in 0.01..10.0f64, p in 0.1..2.0f64) {
            let w = WeightVector::new(0.3, 0.2, 0.4).unwrap();
            let x = objective_value(&a, &w, h, g, p);
            let y = scalarized_objective(&a, &w, h, g, p, QModel::AsPrinted).value();
            prop_assert!((x - y).abs() <= 1e-10 * y);
        }

        #[test]
        fn optimal_energy_is_sum_of_directions(a in interior(), h in 0.01..10.0f64, g in 0.01..10.0f64, q in 0.1..10.0f64) {
            let (ea, eb) = crate::energy::bit_energy(&a, h, g, q).unwrap();
            let e = optimal_energy(&a, h, g, q);
            prop_assert!((e - (ea + eb)).abs() <= 1e-12 * e);
        }
    }
}
