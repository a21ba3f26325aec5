use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{dbm_to_watts, ExperimentConfig, Scheme};
use crate::ber::{cascade_ber, optimal_ber, optimal_snr, CascadeStats};
use crate::channel::{capacity, effective_gains, snr_high_gains, sum_rate};
use crate::energy::{energy_delay_point, AllocationFactors, QModel};
use crate::error::Result;
use crate::geometry::{sample_trajectory, LinkGeometry};
use crate::montecarlo::simulate_two_hop;
use crate::optimizer::{
    optimal_allocation, optimal_delay, optimal_energy, pareto_flags, scalarized_objective,
    RootBranch, WeightVector,
};

/// One output line: a scheme evaluated at one sweep point and weight.
///
/// Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub weight_index: usize,
    pub w_a: f64,
    pub w_b: f64,
    pub w_r: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub alpha_r: f64,
    pub q_a: f64,
    pub q_b: f64,
    pub q_star: f64,
    pub e_a: f64,
    pub e_b: f64,
    pub e_star: f64,
    pub snr_a_db: f64,
    pub snr_b_db: f64,
    pub gamma_star_db: f64,
    pub rate_sum: f64,
    pub capacity: f64,
    pub ber_analytic: f64,
    pub ber_cascade: f64,
    pub ber_mc: Option<f64>,
    pub mc_ci: Option<f64>,
    pub valid: bool,
    pub root_branch: String,
    pub converged: bool,
    pub pareto: bool,
    pub q_model: String,
}

impl ResultRow {
    /// `E_a + E_b`, the energy compared across schemes.
    pub fn energy(&self) -> f64 {
        self.e_a + self.e_b
    }

    pub fn failed(&self) -> bool {
        self.root_branch == FAILED
    }
}

const FAILED: &str = "failed";

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// A sweep point reduced to its effective gains.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub var: &'static str,
    pub value: f64,
    /// Mean `(H, G)` over the forwarding slots.
    pub h: f64,
    pub g: f64,
    pub total_power: f64,
    /// Geometry of every forwarding slot.
    pub slots: Vec<LinkGeometry>,
}

/// Orbit geometry at separation `d` and the given altitude; gains are
/// averaged over every slot after the first.
pub fn sweep_point(
    cfg: &ExperimentConfig,
    var: &'static str,
    value: f64,
    d: f64,
    altitude: f64,
    total_power: f64,
) -> Result<SweepPoint> {
    let traj = cfg.trajectory(altitude)?;
    let slots: Vec<LinkGeometry> = sample_trajectory(d, &traj)?
        .into_iter()
        .skip(1)
        .map(|(_, g)| g)
        .collect();
    let c = cfg.channel_params(total_power);
    let n = slots.len() as f64;
    let (h, g) = slots.iter().fold((0.0, 0.0), |(h, g), geo| {
        let (hh, gg) = effective_gains(&c, geo);
        (h + hh / n, g + gg / n)
    });
    Ok(SweepPoint {
        var,
        value,
        h,
        g,
        total_power,
        slots,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluated_row(
    scheme: Scheme,
    p: &SweepPoint,
    weight_index: usize,
    w: &WeightVector,
    a: &AllocationFactors,
    branch: RootBranch,
    converged: bool,
    model: QModel,
    rate_efficiency: f64,
) -> ResultRow {
    let ed = energy_delay_point(a, p.h, p.g, p.total_power, model);
    let snr = snr_high_gains(a, p.h, p.g, p.total_power);
    let q_star = optimal_delay(a, p.h, p.g, p.total_power).map_or(f64::INFINITY, |q| q);
    let e_star = if q_star.is_finite() {
        optimal_energy(a, p.h, p.g, q_star)
    } else {
        f64::NAN
    };
    let gamma_star = optimal_snr(a, p.h, p.g, p.total_power).unwrap_or(0.0);
    let ber = optimal_ber(a, p.h, p.g, p.total_power).ok();
    let cascade = CascadeStats::from_allocation(a, p.h, p.g, p.total_power)
        .map(|cs| cascade_ber(&cs))
        .unwrap_or(f64::NAN);
    ResultRow {
        scheme: scheme.as_str().into(),
        sweep_var: p.var.into(),
        sweep_value: p.value,
        weight_index,
        w_a: w.w_a,
        w_b: w.w_b,
        w_r: w.w_r,
        alpha_a: a.alpha_a,
        alpha_b: a.alpha_b,
        alpha_r: a.alpha_r,
        q_a: ed.q_a.value(),
        q_b: ed.q_b.value(),
        q_star,
        e_a: ed.e_a,
        e_b: ed.e_b,
        e_star,
        snr_a_db: db(snr.snr_a),
        snr_b_db: db(snr.snr_b),
        gamma_star_db: db(gamma_star),
        rate_sum: rate_efficiency * sum_rate(&snr),
        capacity: capacity(&snr),
        ber_analytic: ber.map_or(f64::NAN, |b| b.ber),
        ber_cascade: cascade,
        ber_mc: None,
        mc_ci: None,
        valid: ber.is_some_and(|b| b.valid)
            && scalarized_objective(a, w, p.h, p.g, p.total_power, model).is_finite(),
        root_branch: branch.as_str().into(),
        converged,
        pareto: false,
        q_model: model.as_str().into(),
    }
}

fn failed_row(
    scheme: Scheme,
    p: &SweepPoint,
    weight_index: usize,
    w: &WeightVector,
    model: QModel,
) -> ResultRow {
    ResultRow {
        scheme: scheme.as_str().into(),
        sweep_var: p.var.into(),
        sweep_value: p.value,
        weight_index,
        w_a: w.w_a,
        w_b: w.w_b,
        w_r: w.w_r,
        alpha_a: f64::NAN,
        alpha_b: f64::NAN,
        alpha_r: f64::NAN,
        q_a: f64::NAN,
        q_b: f64::NAN,
        q_star: f64::NAN,
        e_a: f64::NAN,
        e_b: f64::NAN,
        e_star: f64::NAN,
        snr_a_db: f64::NAN,
        snr_b_db: f64::NAN,
        gamma_star_db: f64::NAN,
        rate_sum: f64::NAN,
        capacity: f64::NAN,
        ber_analytic: f64::NAN,
        ber_cascade: f64::NAN,
        ber_mc: None,
        mc_ci: None,
        valid: false,
        root_branch: FAILED.into(),
        converged: false,
        pareto: false,
        q_model: model.as_str().into(),
    }
}

/// Optimised allocation for one point and weight.
pub fn pa_row(
    cfg: &ExperimentConfig,
    p: &SweepPoint,
    weight_index: usize,
    w: &WeightVector,
) -> ResultRow {
    let model = cfg.q_model;
    match optimal_allocation(w, p.h, p.g, p.total_power, 2.0, model) {
        Ok(opt) => evaluated_row(
            Scheme::Pa,
            p,
            weight_index,
            w,
            &opt.alloc,
            opt.root_branch,
            opt.converged,
            model,
            cfg.channel.rate_efficiency,
        ),
        Err(_) => failed_row(Scheme::Pa, p, weight_index, w, model),
    }
}

/// Baseline split for one point; the weights only label the row.
pub fn sn_row(
    cfg: &ExperimentConfig,
    p: &SweepPoint,
    weight_index: usize,
    w: &WeightVector,
) -> ResultRow {
    match cfg.sn_alloc() {
        Ok(a) => evaluated_row(
            Scheme::Sn,
            p,
            weight_index,
            w,
            &a,
            RootBranch::Fixed,
            true,
            cfg.q_model,
            cfg.channel.rate_efficiency,
        ),
        Err(_) => failed_row(Scheme::Sn, p, weight_index, w, cfg.q_model),
    }
}

/// Flags the Pareto-optimal `(q*, E*)` rows within each (scheme, point).
fn mark_pareto(rows: &mut [ResultRow]) {
    let mut start = 0;
    while start < rows.len() {
        let key = (
            rows[start].scheme.clone(),
            rows[start].sweep_value.to_bits(),
        );
        let end = start
            + rows[start..]
                .iter()
                .take_while(|r| (r.scheme.clone(), r.sweep_value.to_bits()) == key)
                .count();
        let pts: Vec<(f64, f64)> = rows[start..end]
            .iter()
            .map(|r| (r.q_star, r.e_star))
            .collect();
        for (r, f) in rows[start..end].iter_mut().zip(pareto_flags(&pts)) {
            r.pareto = f;
        }
        start = end;
    }
}

/// Rows for every configured scheme, point and weight, in canonical order
/// (scheme, point, weight index).
pub fn run_points(
    cfg: &ExperimentConfig,
    points: &[SweepPoint],
    weights: &[WeightVector],
) -> Vec<ResultRow> {
    let mut schemes = cfg.schemes.clone();
    schemes.sort();
    schemes.dedup();
    let tasks: Vec<(Scheme, usize, usize)> = schemes
        .iter()
        .flat_map(|&s| {
            (0..points.len()).flat_map(move |i| (0..weights.len()).map(move |k| (s, i, k)))
        })
        .collect();
    let mut rows: Vec<ResultRow> = tasks
        .par_iter()
        .map(|&(s, i, k)| match s {
            Scheme::Pa => pa_row(cfg, &points[i], k, &weights[k]),
            Scheme::Sn => sn_row(cfg, &points[i], k, &weights[k]),
        })
        .collect();
    mark_pareto(&mut rows);
    rows
}

pub fn run_pa(
    cfg: &ExperimentConfig,
    points: &[SweepPoint],
    weights: &[WeightVector],
) -> Vec<ResultRow> {
    let c = ExperimentConfig {
        schemes: vec![Scheme::Pa],
        ..cfg.clone()
    };
    run_points(&c, points, weights)
}

pub fn run_sn(
    cfg: &ExperimentConfig,
    points: &[SweepPoint],
    weights: &[WeightVector],
) -> Vec<ResultRow> {
    let c = ExperimentConfig {
        schemes: vec![Scheme::Sn],
        ..cfg.clone()
    };
    run_points(&c, points, weights)
}

pub fn distance_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    cfg.distances()
        .into_iter()
        .map(|d| sweep_point(cfg, "d", d, d, cfg.geometry.altitude, cfg.power.total_power))
        .collect()
}

pub fn power_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    dbm_points(cfg, &cfg.power_dbm())
}

fn dbm_points(cfg: &ExperimentConfig, dbm: &[f64]) -> Result<Vec<SweepPoint>> {
    let d = cfg.geometry.d_default;
    dbm.iter()
        .map(|&p| sweep_point(cfg, "p_dbm", p, d, cfg.geometry.altitude, dbm_to_watts(p)))
        .collect()
}

pub fn altitude_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let d = cfg.geometry.d_default;
    cfg.altitudes()
        .into_iter()
        .map(|z| sweep_point(cfg, "altitude", z, d, z, cfg.power.total_power))
        .collect()
}

/// The single trade-off point; rows carry the delay weight as sweep value.
pub fn tradeoff_rows(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let point = sweep_point(
        cfg,
        "d",
        cfg.geometry.d_default,
        cfg.geometry.d_default,
        cfg.geometry.altitude,
        cfg.power.total_power,
    )?;
    Ok(run_points(cfg, &[point], &cfg.weight_grid()))
}

/// Budget sweep at the reference weight with a Monte Carlo run per row.
pub fn ber_rows(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let points = dbm_points(cfg, &cfg.mc.ber_dbm)?;
    let mut rows = run_points(cfg, &points, &[cfg.weights.reference]);
    let n = points.len();
    let sims: Vec<(Option<f64>, Option<f64>)> = rows
        .iter()
        .enumerate()
        .map(|(idx, r)| {
            if r.failed() {
                return (None, None);
            }
            let p = &points[idx % n];
            let a = AllocationFactors::from_array([r.alpha_a, r.alpha_b, r.alpha_r]);
            let tc = cfg.trial(cfg.mc.seed.wrapping_add(idx as u64));
            match simulate_two_hop(&tc, &a, &p.slots, &cfg.channel_params(p.total_power)) {
                Ok(mc) => (Some(mc.ber()), Some(mc.ci_halfwidth)),
                Err(_) => (None, None),
            }
        })
        .collect();
    for (r, (b, ci)) in rows.iter_mut().zip(sims) {
        r.ber_mc = b;
        r.mc_ci = ci;
    }
    Ok(rows)
}

/// Whether every optimised row of a run failed.
pub fn all_failed(rows: &[ResultRow]) -> bool {
    let pa: Vec<_> = rows
        .iter()
        .filter(|r| r.scheme == Scheme::Pa.as_str())
        .collect();
    !pa.is_empty() && pa.iter().all(|r| r.failed())
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub fn blank_row() -> ResultRow {
        let p = SweepPoint {
            var: "none",
            value: 0.0,
            h: 1.0,
            g: 1.0,
            total_power: 1.0,
            slots: vec![],
        };
        failed_row(Scheme::Pa, &p, 0, &WeightVector::equal(), QModel::AsPrinted)
    }
}
