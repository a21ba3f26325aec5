//! Measurements behind the validate report and the acceptance suite. Each
//! check returns what it measured; thresholds are applied by the caller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{dbm_to_watts, Fault};
use super::run::ResultRow;
use crate::channel::ChannelParams;
use crate::energy::{AllocationFactors, QModel};
use crate::geometry::LinkGeometry;
use crate::montecarlo::{loglog_slope, simulate_single_hop, simulate_two_hop, TrialConfig};
use crate::optimizer::{
    bordered_hessian_psd, closed_form_allocation, gradient, gradient_as_printed,
    optimal_allocation, scalarized_objective, WeightVector,
};
use crate::oracle::{central_difference, grid_minimum, rayleigh_bpsk_ber};

/// Uniform point on the open simplex `{x > 0, Σx = 1}`.
fn dirichlet(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let e: [f64; 3] = std::array::from_fn(|_| Exp1.sample(rng));
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Random weights on the simplex, each at least `1e-3`.
fn random_weights(rng: &mut ChaCha8Rng) -> WeightVector {
    loop {
        let [a, b, r] = dirichlet(rng);
        if a.min(b).min(r) >= 1e-3 {
            return WeightVector {
                w_a: a,
                w_b: b,
                w_r: r,
            };
        }
    }
}

/// Random strictly interior allocation with total in `[0.2, 0.95]`.
fn random_interior(rng: &mut ChaCha8Rng) -> AllocationFactors {
    loop {
        let s = rng.random_range(0.2..0.95);
        let x = dirichlet(rng).map(|v| v * s);
        if x.iter().all(|&v| v >= 0.02) {
            return AllocationFactors::from_array(x);
        }
    }
}

/// A random problem instance: gains, budget and weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub h: f64,
    pub g: f64,
    pub total_power: f64,
    pub w: WeightVector,
}

/// `H, G ∈ [0.01, 10]`, `P̄ ∈ [0.1, 2]`, weights on the simplex.
pub fn random_instances(n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Instance {
            h: rng.random_range(0.01..10.0),
            g: rng.random_range(0.01..10.0),
            total_power: rng.random_range(0.1..2.0),
            w: random_weights(&mut rng),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub instances: usize,
    /// Instances where `closed_form_allocation` matched the grid.
    pub closed_form_pass: usize,
    /// Instances matching the grid with the numerical fallback allowed.
    pub with_fallback_pass: usize,
    /// Instances where a printed root was feasible and used.
    pub closed_form_root_used: usize,
    /// Largest `(F − F_grid)/|F_grid|` for `closed_form_allocation`.
    pub worst_closed_form_gap: f64,
    /// Largest `(F − F_grid)/|F_grid|` with the fallback allowed.
    pub worst_gap: f64,
}

impl GridCheck {
    pub fn closed_form_rate(&self) -> f64 {
        self.closed_form_pass as f64 / self.instances as f64
    }

    pub fn fallback_rate(&self) -> f64 {
        self.with_fallback_pass as f64 / self.instances as f64
    }
}

/// Compares the closed-form optimum against the best simplex-grid point.
pub fn closed_form_vs_grid(
    instances: &[Instance],
    grid_step: f64,
    rel_tol: f64,
    fault: Option<Fault>,
) -> GridCheck {
    let model = QModel::AsPrinted;
    let results: Vec<(f64, bool, f64)> = instances
        .par_iter()
        .map(|ins| {
            let (_, f_grid) = grid_minimum(&ins.w, ins.h, ins.g, ins.total_power, model, grid_step);
            let gap = |a: AllocationFactors| {
                let a = if fault == Some(Fault::ClosedForm) {
                    AllocationFactors::from_array(a.to_array().map(|v| 0.8 * v + 0.05))
                } else {
                    a
                };
                let f =
                    scalarized_objective(&a, &ins.w, ins.h, ins.g, ins.total_power, model).value();
                (f - f_grid) / f_grid.abs()
            };
            let closed = closed_form_allocation(&ins.w, ins.h, ins.g, ins.total_power, 2.0, model);
            let safe = optimal_allocation(&ins.w, ins.h, ins.g, ins.total_power, 2.0, model);
            let (closed_gap, root) = match &closed {
                Ok(o) => (gap(o.alloc), o.root_branch.is_closed_form()),
                Err(_) => (f64::INFINITY, false),
            };
            let safe_gap = safe.map_or(f64::INFINITY, |o| gap(o.alloc));
            (closed_gap, root, safe_gap)
        })
        .collect();
    GridCheck {
        instances: instances.len(),
        closed_form_pass: results.iter().filter(|r| r.0 <= rel_tol).count(),
        with_fallback_pass: results.iter().filter(|r| r.2 <= rel_tol).count(),
        closed_form_root_used: results.iter().filter(|r| r.1).count(),
        worst_closed_form_gap: results
            .iter()
            .map(|r| r.0)
            .fold(f64::NEG_INFINITY, f64::max),
        worst_gap: results
            .iter()
            .map(|r| r.2)
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub points: usize,
    /// Largest `‖∇F − ∇_FD F‖∞ / ‖∇_FD F‖∞` of the analytic gradient.
    pub max_rel_err: f64,
    /// Same measure for the printed derivative expressions.
    pub printed_max_rel_err: f64,
}

pub fn gradient_check(points: usize, seed: u64, fault: Option<Fault>) -> GradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(AllocationFactors, Instance)> = (0..points)
        .map(|_| {
            let a = random_interior(&mut rng);
            let ins = Instance {
                h: rng.random_range(0.01..10.0),
                g: rng.random_range(0.01..10.0),
                total_power: rng.random_range(0.1..2.0),
                w: random_weights(&mut rng),
            };
            (a, ins)
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut printed_worst: f64 = 0.0;
    for (a, ins) in &cases {
        let f = |x: &[f64; 3]| {
            scalarized_objective(
                &AllocationFactors::from_array(*x),
                &ins.w,
                ins.h,
                ins.g,
                ins.total_power,
                QModel::AsPrinted,
            )
            .value()
        };
        let x = a.to_array();
        let fd: [f64; 3] = std::array::from_fn(|i| central_difference(f, &x, i, 1e-6));
        let mut exact = gradient(a, &ins.w, ins.h, ins.g, ins.total_power).expect("interior point");
        if fault == Some(Fault::Gradient) {
            exact = exact.map(|v| v * (1.0 + 1e-4));
        }
        let q = crate::energy::bit_time(a, ins.h, ins.g, ins.total_power, QModel::AsPrinted)
            .0
            .value();
        let printed = gradient_as_printed(a, &ins.w, ins.h, ins.g, ins.total_power, q);
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = |g: &[f64; 3]| {
            g.iter()
                .zip(&fd)
                .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()))
                / scale
        };
        worst = worst.max(err(&exact));
        printed_worst = printed_worst.max(err(&printed));
    }
    GradientCheck {
        points,
        max_rel_err: worst,
        printed_max_rel_err: printed_worst,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdCheck {
    pub points: usize,
    pub directions: usize,
    /// Points with at least one violating direction.
    pub failing_points: usize,
    pub violations: usize,
    pub worst_ratio: f64,
}

pub fn psd_check(points: usize, directions: usize, seed: u64) -> PsdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(AllocationFactors, Instance, u64)> = (0..points)
        .map(|_| {
            let a = random_interior(&mut rng);
            let ins = Instance {
                h: rng.random_range(0.01..10.0),
                g: rng.random_range(0.01..10.0),
                total_power: rng.random_range(0.1..2.0),
                w: random_weights(&mut rng),
            };
            (a, ins, rng.random())
        })
        .collect();
    let reports: Vec<_> = cases
        .par_iter()
        .map(|(a, ins, s)| {
            bordered_hessian_psd(a, &ins.w, ins.h, ins.g, ins.total_power, directions, *s)
                .expect("interior point")
        })
        .collect();
    PsdCheck {
        points,
        directions,
        failing_points: reports.iter().filter(|r| !r.psd).count(),
        violations: reports.iter().map(|r| r.violations).sum(),
        worst_ratio: reports
            .iter()
            .map(|r| r.worst_ratio)
            .fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCheck {
    /// `(q*, E*)` of the Pareto rows sorted by `q*`.
    pub front: Vec<(f64, f64)>,
    pub non_increasing: bool,
    /// Magnitudes of successive drops strictly decrease over the first half.
    pub convex_first_half: bool,
}

pub fn tradeoff_shape(rows: &[ResultRow]) -> ShapeCheck {
    let mut front: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.scheme == "PA" && r.pareto)
        .map(|r| (r.q_star, r.e_star))
        .collect();
    front.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    front.dedup();
    let non_increasing = front.windows(2).all(|p| p[1].1 <= p[0].1);
    let drops: Vec<f64> = front.windows(2).map(|p| p[0].1 - p[1].1).collect();
    let half = front.len() / 2;
    let first: Vec<f64> = drops
        .iter()
        .copied()
        .take(half.saturating_sub(1).max(1))
        .collect();
    let convex_first_half =
        front.len() >= 3 && first.windows(2).all(|d| d[1] < d[0]) && first.iter().all(|&d| d > 0.0);
    ShapeCheck {
        front,
        non_increasing,
        convex_first_half,
    }
}

/// Mean of `(E_SN − E_PA)/E_SN` over matched (point, weight) rows, using
/// `E_a + E_b` for both schemes.
pub fn pa_vs_sn_reduction(rows: &[ResultRow]) -> Option<f64> {
    let sn: Vec<&ResultRow> = rows.iter().filter(|r| r.scheme == "SN").collect();
    let reductions: Vec<f64> = rows
        .iter()
        .filter(|r| r.scheme == "PA" && !r.failed())
        .filter_map(|pa| {
            let s = sn
                .iter()
                .find(|s| s.sweep_value == pa.sweep_value && s.weight_index == pa.weight_index)?;
            let e = s.energy();
            (e > 0.0 && e.is_finite()).then(|| (e - pa.energy()) / e)
        })
        .collect();
    (!reductions.is_empty()).then(|| reductions.iter().sum::<f64>() / reductions.len() as f64)
}

/// Continuous two-segment linear fit with the breakpoint at one of the
/// interior samples. Axes are normalised to `[0, 1]` first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knee {
    pub index: usize,
    pub x: f64,
    pub sse: f64,
}

pub fn piecewise_knee(xs: &[f64], ys: &[f64]) -> Option<Knee> {
    let n = xs.len();
    if n < 5 || ys.len() != n {
        return None;
    }
    let (x0, x1) = (xs[0], xs[n - 1]);
    let (ylo, yhi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| {
            (l.min(y), h.max(y))
        });
    let yspan = if yhi > ylo { yhi - ylo } else { 1.0 };
    let u: Vec<f64> = xs.iter().map(|x| (x - x0) / (x1 - x0)).collect();
    let v: Vec<f64> = ys.iter().map(|y| (y - ylo) / yspan).collect();
    (2..n - 2)
        .filter_map(|k| {
            let b = u[k];
            // y = c0 + c1·u + c2·max(0, u − b)
            let design = nalgebra::DMatrix::from_fn(n, 3, |i, j| match j {
                0 => 1.0,
                1 => u[i],
                _ => (u[i] - b).max(0.0),
            });
            let rhs = nalgebra::DVector::from_column_slice(&v);
            let coef = (design.transpose() * &design)
                .lu()
                .solve(&(design.transpose() * &rhs))?;
            let sse = (design * coef - rhs).norm_squared();
            Some(Knee {
                index: k,
                x: xs[k],
                sse,
            })
        })
        .min_by(|a, b| a.sse.total_cmp(&b.sse))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCheck {
    pub knee_dbm: f64,
    /// `|dE/dP̄|` over the first and last sample intervals, per watt.
    pub slope_bottom: f64,
    pub slope_top: f64,
    pub flattening_ratio: f64,
    /// Energy at the top of the range is below the bottom.
    pub decreasing: bool,
}

/// Knee and flattening of `E_a + E_b` against budget for the PA rows at the
/// reference weight.
pub fn transition(rows: &[ResultRow]) -> Option<TransitionCheck> {
    let pa: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.scheme == "PA" && !r.failed())
        .collect();
    let xs: Vec<f64> = pa.iter().map(|r| r.sweep_value).collect();
    let ys: Vec<f64> = pa.iter().map(|r| r.energy()).collect();
    let knee = piecewise_knee(&xs, &ys)?;
    let n = xs.len();
    let watts: Vec<f64> = xs.iter().map(|&x| dbm_to_watts(x)).collect();
    let slope = |i: usize| ((ys[i + 1] - ys[i]) / (watts[i + 1] - watts[i])).abs();
    let (bottom, top) = (slope(0), slope(n - 2));
    Some(TransitionCheck {
        knee_dbm: knee.x,
        slope_bottom: bottom,
        slope_top: top,
        flattening_ratio: if bottom > 0.0 {
            top / bottom
        } else {
            f64::INFINITY
        },
        decreasing: ys[n - 1] < ys[0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCheck {
    pub rows: usize,
    /// Rows with `γ* ≥ 10` and analytic BER `≥ 1e-4`.
    pub in_scope: usize,
    pub agreeing: usize,
    pub worst_rel_err: f64,
    /// Log-log slope of the PA analytic BER against budget.
    pub slope: Option<f64>,
    /// Same slope for the fixed SN allocation.
    pub fixed_slope: Option<f64>,
}

pub fn ber_agreement(rows: &[ResultRow], rel_tol: f64, fault: Option<Fault>) -> BerCheck {
    let scale = if fault == Some(Fault::Ber) { 2.0 } else { 1.0 };
    let mut in_scope = 0;
    let mut agreeing = 0;
    let mut worst: f64 = 0.0;
    for r in rows {
        let (Some(mc), true) = (r.ber_mc, r.valid) else {
            continue;
        };
        let ana = scale * r.ber_analytic;
        if ana < crate::montecarlo::MIN_COMPARABLE_BER {
            continue;
        }
        in_scope += 1;
        let rel = if mc > 0.0 {
            (ana - mc).abs() / mc
        } else {
            f64::INFINITY
        };
        worst = worst.max(rel);
        if rel <= rel_tol {
            agreeing += 1;
        }
    }
    let slope_of = |scheme: &str| {
        let sel: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.scheme == scheme && !r.failed())
            .collect();
        let watts: Vec<f64> = sel.iter().map(|r| dbm_to_watts(r.sweep_value)).collect();
        let bers: Vec<f64> = sel.iter().map(|r| scale * r.ber_analytic).collect();
        loglog_slope(&watts, &bers)
    };
    BerCheck {
        rows: rows.len(),
        in_scope,
        agreeing,
        worst_rel_err: worst,
        slope: slope_of("PA"),
        fixed_slope: slope_of("SN"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSelfTest {
    pub single_hop_ber: f64,
    pub single_hop_reference: f64,
    pub zero_noise_ber: f64,
    pub zero_power_ber: f64,
    pub zero_power_ci: f64,
}

pub fn mc_self_test(samples: usize, seed: u64) -> crate::Result<McSelfTest> {
    let tc = TrialConfig {
        samples,
        seed,
        ..TrialConfig::default()
    };
    let single = simulate_single_hop(&tc, 1.0)?;
    let geo = [LinkGeometry {
        d: 1.0,
        d_a: 1.0,
        d_b: 1.0,
    }];
    let c = ChannelParams::default();
    let quiet = simulate_two_hop(
        &TrialConfig {
            noise_scale: 0.0,
            ..tc
        },
        &AllocationFactors::equal_split(),
        &geo,
        &c,
    )?;
    let zero = simulate_two_hop(&tc, &AllocationFactors::from_array([0.0; 3]), &geo, &c)?;
    Ok(McSelfTest {
        single_hop_ber: single.ber(),
        single_hop_reference: rayleigh_bpsk_ber(1.0),
        zero_noise_ber: quiet.ber(),
        zero_power_ber: zero.ber(),
        zero_power_ci: zero.ci_halfwidth,
    })
}
