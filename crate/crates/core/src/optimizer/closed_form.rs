use super::{
    numerical_allocation, scalarized_objective, symmetric_allocation, OptimalAllocation,
    RootBranch, WeightVector,
};
use crate::energy::{bit_time, energy_factor, AllocationFactors, Extended, QModel};
use crate::error::Result;

const MAX_FIXED_POINT_ITERS: usize = 1000;
const FIXED_POINT_TOL: f64 = 1e-9;

/// Intermediate terms of the closed-form allocation for a given bit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrintedTerms {
    pub psi_a: f64,
    pub psi_b: f64,
    pub psi_c: f64,
    /// `√(q(2^{2/q}−1)(H−G)(1−w_r) / (2HGP̄w_r))`, the α_b scale.
    pub root_scale: f64,
    /// `ψ_b² + 2ψ_aψ_c`.
    pub discriminant: f64,
}

/// `None` when a radicand is negative or a term is not finite.
pub fn printed_terms(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    q: f64,
) -> Option<PrintedTerms> {
    let c = energy_factor(q);
    let (w2, w3) = (w.w_b, w.w_r);
    let k = c * (h - g) / (2.0 * h * g * total_power);
    let psi_a = 2.0 * (g - h) * (1.0 - (k * w2 / w3 - 1.0 / ((g - h) + h)) * (g - h));
    let s_rad = g * c * (h - g) / (2.0 * h * total_power * w3) * (1.0 - w3);
    let r_rad = c * (h - g) * (1.0 - w3) / (2.0 * h * g * total_power * w3);
    if !(s_rad >= 0.0 && r_rad >= 0.0) {
        return None;
    }
    let s = s_rad.sqrt();
    let psi_b = (h / g - 1.0) * s + 2.0 * g;
    let psi_c = s - g;
    let discriminant = psi_b * psi_b + 2.0 * psi_a * psi_c;
    let t = PrintedTerms {
        psi_a,
        psi_b,
        psi_c,
        root_scale: r_rad.sqrt(),
        discriminant,
    };
    let finite = [psi_a, psi_b, psi_c, t.root_scale, discriminant]
        .iter()
        .all(|v| v.is_finite());
    (finite && discriminant >= 0.0 && psi_a != 0.0).then_some(t)
}

/// Both roots as raw `[α_a, α_b, α_r]`, feasible or not.
pub fn printed_candidates(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    q: f64,
) -> Vec<(RootBranch, [f64; 3])> {
    let Some(t) = printed_terms(w, h, g, total_power, q) else {
        return Vec::new();
    };
    let root = t.discriminant.sqrt();
    [(RootBranch::Plus, root), (RootBranch::Minus, -root)]
        .into_iter()
        .map(|(branch, r)| {
            let alpha_a = (t.psi_b + r) / t.psi_a;
            let alpha_b = (alpha_a * (h / g - 1.0) + 1.0) * t.root_scale;
            (branch, [alpha_a, alpha_b, 1.0 - alpha_a - alpha_b])
        })
        .collect()
}

fn best_feasible(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    q: f64,
    model: QModel,
) -> Option<(RootBranch, AllocationFactors, f64)> {
    printed_candidates(w, h, g, total_power, q)
        .into_iter()
        .filter_map(|(branch, x)| {
            let a = AllocationFactors::new(x[0], x[1], x[2]).ok()?;
            let f = scalarized_objective(&a, w, h, g, total_power, model).finite()?;
            Some((branch, a, f))
        })
        .min_by(|x, y| x.2.total_cmp(&y.2))
}

fn fallback(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
    iterations: usize,
) -> OptimalAllocation {
    let mut opt = numerical_allocation(w, h, g, total_power, model);
    opt.root_branch = RootBranch::Fallback;
    opt.iterations += iterations;
    opt
}

/// Closed-form optimum with the bit time resolved by a damped fixed point
/// `q ← q + ½(mean(q_a, q_b) − q)`.
///
/// Falls back to [`numerical_allocation`] when no root is feasible, and uses
/// the `α_a = α_b` search when `H = G`.
pub fn closed_form_allocation(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    q_init: f64,
    model: QModel,
) -> Result<OptimalAllocation> {
    w.validate()?;
    crate::error::ensure(h > 0.0 && g > 0.0 && total_power > 0.0, "gains", || {
        format!("H, G and P̄ must be positive, got {h}, {g}, {total_power}")
    })?;
    crate::error::ensure(q_init > 0.0 && q_init.is_finite(), "q_init", || {
        format!("must be > 0, got {q_init}")
    })?;

    if (h - g).abs() <= 1e-9 * h.max(g) {
        return Ok(symmetric_allocation(w, h, g, total_power, model));
    }

    let mut q = q_init;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        iterations += 1;
        let Some((_, a, _)) = best_feasible(w, h, g, total_power, q, model) else {
            return Ok(fallback(w, h, g, total_power, model, iterations));
        };
        let (qa, qb) = bit_time(&a, h, g, total_power, model);
        let Extended::Finite(mean) = qa + qb else {
            return Ok(fallback(w, h, g, total_power, model, iterations));
        };
        let step = 0.5 * (0.5 * mean - q);
        q += step;
        if step.abs() < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    let Some((branch, a, _)) = best_feasible(w, h, g, total_power, q, model) else {
        return Ok(fallback(w, h, g, total_power, model, iterations));
    };
    Ok(OptimalAllocation::assemble(
        a,
        w,
        h,
        g,
        total_power,
        model,
        branch,
        converged,
        iterations,
        Some(q),
    ))
}

/// Closed-form optimum checked against [`numerical_allocation`]; the
/// numerical point replaces it (as [`RootBranch::Fallback`]) whenever it
/// attains a lower objective.
pub fn optimal_allocation(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    q_init: f64,
    model: QModel,
) -> Result<OptimalAllocation> {
    let closed = closed_form_allocation(w, h, g, total_power, q_init, model)?;
    if !closed.root_branch.is_closed_form() {
        return Ok(closed);
    }
    let num = numerical_allocation(w, h, g, total_power, model);
    if num.f_value.value() < closed.f_value.value() {
        let mut opt = num;
        opt.root_branch = RootBranch::Fallback;
        opt.iterations += closed.iterations;
        return Ok(opt);
    }
    Ok(closed)
}
