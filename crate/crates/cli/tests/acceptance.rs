//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
//! criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::fs;
use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use uav_relay::ber::{cascade_cdf, cdf_first_order, optimal_ber, optimal_snr, CascadeStats};
use uav_relay::channel::{
    amplification_factor, amplification_factor_for, capacity, causality_check, effective_gains,
    snr_exact_los, snr_exact_nlos, snr_high_gains, sum_rate, ChannelParams, NodePowers, SnrPair,
};
use uav_relay::energy::{
    bit_energy, bit_time, power_budget_ok, AllocationFactors, Extended, QModel,
};
use uav_relay::geometry::{
    cartesian_from_polar, hop_distances, sample_trajectory, PolarPosition, Trajectory,
};
use uav_relay::harness::{
    ber_agreement, ber_rows, closed_form_vs_grid, distance_points, gradient_check, mc_self_test,
    pa_vs_sn_reduction, power_points, psd_check, random_instances, run_points, tradeoff_rows,
    tradeoff_shape, transition, ExperimentConfig,
};
use uav_relay::optimizer::{gradient, optimal_energy, scalarized_objective, WeightVector};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn seed() -> u64 {
    ExperimentConfig::default().validate.seed
}

fn c1_closed_form_vs_grid() -> Verdict {
    let start = Instant::now();
    let g = closed_form_vs_grid(&random_instances(200, seed()), 0.005, 1e-3, None);
    let took = start.elapsed();
    let alone = g.closed_form_rate() >= 0.95;
    let fallback = g.with_fallback_pass == g.instances;
    let fast = took < Duration::from_secs(60);
    verdict(
        alone && fallback && fast,
        format!(
            "closed form alone {}/{} (need >= 95%; {} used a printed root, worst gap {:.2e}), with fallback {}/{} (need 100%, worst gap {:.2e}), {}",
            g.closed_form_pass,
            g.instances,
            g.closed_form_root_used,
            g.worst_closed_form_gap,
            g.with_fallback_pass,
            g.instances,
            g.worst_gap,
            secs(took)
        ),
    )
}

fn c2_gradient() -> Verdict {
    let start = Instant::now();
    let g = gradient_check(100, seed(), None);
    let took = start.elapsed();
    verdict(
        g.max_rel_err <= 1e-6 && took < Duration::from_secs(5),
        format!(
            "max relative error {:.2e} over {} points (need <= 1e-6), {}",
            g.max_rel_err,
            g.points,
            secs(took)
        ),
    )
}

fn c3_convexity() -> Verdict {
    let p = psd_check(100, 10_000, seed());
    verdict(
        p.violations == 0,
        format!(
            "{} of {} points and {} of {} directions violate, worst normalised form {:.3e}",
            p.failing_points,
            p.points,
            p.violations,
            p.points * p.directions,
            p.worst_ratio
        ),
    )
}

fn c4_tradeoff_shape() -> Verdict {
    let rows = match tradeoff_rows(&ExperimentConfig::default()) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let s = tradeoff_shape(&rows);
    verdict(
        s.front.len() >= 2 && s.non_increasing && s.convex_first_half,
        format!(
            "{} front points, non-increasing {}, strictly shrinking drops over first half {}",
            s.front.len(),
            s.non_increasing,
            s.convex_first_half
        ),
    )
}

fn c5_pa_vs_sn() -> Verdict {
    let cfg = ExperimentConfig::default();
    let points = match distance_points(&cfg) {
        Ok(p) => p,
        Err(e) => return verdict(false, e.to_string()),
    };
    let rows = run_points(&cfg, &points, &cfg.weight_grid());
    match pa_vs_sn_reduction(&rows) {
        Some(r) => verdict(
            (0.05..=0.30).contains(&r),
            format!("mean reduction {:.2}% (need 5% to 30%)", 100.0 * r),
        ),
        None => verdict(false, "no comparable rows"),
    }
}

fn c6_transition() -> Verdict {
    let cfg = ExperimentConfig::default();
    let points = match power_points(&cfg) {
        Ok(p) => p,
        Err(e) => return verdict(false, e.to_string()),
    };
    let rows = run_points(&cfg, &points, &[cfg.weights.reference]);
    match transition(&rows) {
        Some(t) => verdict(
            t.decreasing && (10.0..=20.0).contains(&t.knee_dbm) && t.flattening_ratio <= 0.1,
            format!(
                "knee {} dBm (need 10 to 20), |dE/dP| top/bottom {:.4} (need <= 0.1), decreasing {}",
                t.knee_dbm, t.flattening_ratio, t.decreasing
            ),
        ),
        None => verdict(false, "too few feasible points for a piecewise fit"),
    }
}

fn c7_ber() -> Verdict {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let rows = match ber_rows(&cfg) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let b = ber_agreement(&rows, 0.2, None);
    let took = start.elapsed();
    let agree = b.in_scope > 0 && b.agreeing == b.in_scope;
    let slope = b.slope.is_some_and(|s| (s + 1.0).abs() <= 0.05);
    verdict(
        agree && slope && took < Duration::from_secs(180) && cfg.mc.samples == 100_000,
        format!(
            "{}/{} in-scope rows within 20% (worst {:.3}), PA log-log slope {} (need -1 +/- 0.05), fixed-allocation slope {}, {}",
            b.agreeing,
            b.in_scope,
            b.worst_rel_err,
            b.slope.map_or("undefined".into(), |s| format!("{s:.4}")),
            b.fixed_slope.map_or("undefined".into(), |s| format!("{s:.4}")),
            secs(took)
        ),
    )
}

fn c8_mc_self_test() -> Verdict {
    let cfg = ExperimentConfig::default();
    match mc_self_test(100_000, cfg.mc.seed) {
        Ok(m) => {
            let single = (m.single_hop_ber - 0.14645).abs() <= 0.005;
            let noise_free = m.zero_noise_ber == 0.0;
            let zero_power = (m.zero_power_ber - 0.5).abs() <= m.zero_power_ci;
            verdict(
                single && noise_free && zero_power,
                format!(
                    "single hop {:.5} (0.14645 +/- 0.005), noise-free {}, zero power {:.5} +/- {:.5}",
                    m.single_hop_ber, m.zero_noise_ber, m.zero_power_ber, m.zero_power_ci
                ),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn run_cli(
    sub: &str,
    out: &Path,
    threads: usize,
) -> (Option<i32>, String, BTreeMap<String, Vec<u8>>) {
    let o = Process::new(env!("CARGO_BIN_EXE_uavrelay"))
        .args([sub, "--seed", "11", "--out"])
        .arg(out)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8_lossy(&o.stdout).replace(&out.display().to_string(), "<out>");
    let mut files = BTreeMap::new();
    if let Ok(entries) = fs::read_dir(out) {
        for e in entries.flatten() {
            files.insert(
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap_or_default(),
            );
        }
    }
    (o.status.code(), stdout, files)
}

fn c9_determinism() -> Verdict {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut differing = Vec::new();
    let mut compared = 0;
    for sub in ["optimize", "sweep", "tradeoff", "ber", "validate", "mc"] {
        let a = run_cli(sub, &tmp.path().join(format!("{sub}-1")), 1);
        let b = run_cli(sub, &tmp.path().join(format!("{sub}-4")), 4);
        compared += a.2.len();
        if a.2.is_empty() || a != b {
            differing.push(sub);
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{compared} files across 6 subcommands on 1 vs 4 threads, differing: {differing:?}"
        ),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

fn c10_trivial_values() -> Verdict {
    let mut failed: Vec<&str> = Vec::new();
    let mut check = |name: &'static str, ok: bool| {
        if !ok {
            failed.push(name);
        }
    };
    let third = AllocationFactors::equal_split();
    let zero = AllocationFactors::new(0.0, 0.0, 0.0).unwrap();
    let no_relay = AllocationFactors::new(0.5, 0.5, 0.0).unwrap();

    let w = cartesian_from_polar(PolarPosition {
        r: 0.0,
        theta: 0.0,
        phi: 0.0,
    });
    check("origin", (w.x, w.y, w.z) == (0.0, 0.0, 0.0));
    let w = cartesian_from_polar(PolarPosition {
        r: 1.0,
        theta: 0.0,
        phi: FRAC_PI_2,
    });
    check(
        "unit axes",
        close(w.x, 1.0) && close(w.y, 0.0) && close(w.z, 1.0),
    );
    let w = cartesian_from_polar(PolarPosition {
        r: 2.0,
        theta: FRAC_PI_2,
        phi: FRAC_PI_6,
    });
    check(
        "(2, pi/2, pi/6)",
        close(w.x, 0.0) && close(w.y, 2.0) && close(w.z, 1.0),
    );

    for (theta, phi) in [(0.0, 0.0), (1.0, 0.3), (2.5, 1.2)] {
        let g = hop_distances(100.0, PolarPosition { r: 0.0, theta, phi }).unwrap();
        check(
            "r = 0 distances",
            close(g.d_a, 100.0) && close(g.d_b, 100.0),
        );
    }
    let g = hop_distances(
        100.0,
        PolarPosition {
            r: 50.0,
            theta: FRAC_PI_2,
            phi: 0.0,
        },
    )
    .unwrap();
    check(
        "theta = pi/2 distances",
        close(g.d_a, 12_500f64.sqrt()) && close(g.d_b, 12_500f64.sqrt()),
    );
    let g = hop_distances(
        100.0,
        PolarPosition {
            r: 50.0,
            theta: 0.0,
            phi: 0.0,
        },
    )
    .unwrap();
    check(
        "theta = 0 distances",
        close(g.d_a, 50.0) && close(g.d_b, 150.0),
    );

    let at = |r: f64| PolarPosition {
        r,
        theta: 0.0,
        phi: 0.0,
    };
    let s = sample_trajectory(100.0, &Trajectory::new(vec![at(20.0)], 1.0, 4).unwrap()).unwrap();
    check(
        "constant trajectory",
        s.len() == 4 && s.iter().all(|(_, g)| *g == s[0].1),
    );
    let s = sample_trajectory(
        100.0,
        &Trajectory::new(vec![at(0.0), at(50.0)], 1.0, 2).unwrap(),
    )
    .unwrap();
    check(
        "two-slot endpoints",
        s.len() == 2
            && s[0].1 == hop_distances(100.0, at(0.0)).unwrap()
            && s[1].1 == hop_distances(100.0, at(50.0)).unwrap(),
    );
    let s = sample_trajectory(
        300.0,
        &Trajectory::new(vec![at(0.0), at(100.0)], 1.0, 5).unwrap(),
    );
    check(
        "five-slot interpolation",
        s.is_ok_and(|s| {
            s.len() == 5
                && s.iter()
                    .zip([0.0, 25.0, 50.0, 75.0, 100.0])
                    .all(|((_, g), r)| {
                        let e = hop_distances(
                            300.0,
                            PolarPosition {
                                r,
                                theta: 0.0,
                                phi: 0.0,
                            },
                        )
                        .unwrap();
                        close(g.d_a, e.d_a) && close(g.d_b, e.d_b)
                    })
        }),
    );

    let unit = uav_relay::geometry::LinkGeometry {
        d: 1.0,
        d_a: 1.0,
        d_b: 1.0,
    };
    let c = ChannelParams::default();
    check("unit gains", effective_gains(&c, &unit) == (1.0, 1.0));
    let far = uav_relay::geometry::LinkGeometry {
        d: 10.0,
        d_a: 10.0,
        d_b: 10.0,
    };
    check("inverse square", close(effective_gains(&c, &far).0, 0.01));
    let c3 = ChannelParams {
        gamma_a: 4.0,
        path_loss_exp: 3.0,
        ..c
    };
    let two = uav_relay::geometry::LinkGeometry {
        d: 2.0,
        d_a: 2.0,
        d_b: 2.0,
    };
    check("4 * 2^-3", close(effective_gains(&c3, &two).0, 0.5));

    let pw = |p_a, p_b, p_r| NodePowers { p_a, p_b, p_r };
    check(
        "beta with no relay power",
        amplification_factor(&c, &unit, &pw(1.0, 1.0, 0.0)) == 0.0,
    );
    check(
        "beta noise only",
        close(
            amplification_factor_for(0.0, 0.0, 1.0, &pw(1.0, 1.0, 4.0)),
            2.0,
        ),
    );
    check(
        "beta unit",
        close(amplification_factor(&c, &unit, &pw(1.0, 1.0, 3.0)), 1.0),
    );

    let p1 = pw(1.0, 1.0, 1.0);
    check(
        "los without direct path",
        snr_exact_los(&c, &unit, &p1) == snr_exact_nlos(&c, &unit, &p1),
    );
    let los = ChannelParams { gamma_ab: 2.0, ..c };
    let no_relay_power = pw(1.0, 1.0, 0.0);
    let relayed = snr_exact_nlos(&los, &unit, &no_relay_power);
    let total = snr_exact_los(&los, &unit, &no_relay_power);
    let printed_direct = no_relay_power.p_r * no_relay_power.p_b * los.gamma_ab;
    check(
        "los direct term only",
        relayed.snr_a == 0.0 && relayed.snr_b == 0.0 && total.snr_a == printed_direct,
    );
    check(
        "los unit",
        close(snr_exact_los(&c, &unit, &p1).snr_b, 1.0 / (1.0 + 2.0 + 1.0)),
    );
    check(
        "nlos no source",
        snr_exact_nlos(&c, &unit, &pw(0.0, 1.0, 1.0)).snr_b == 0.0,
    );
    check(
        "nlos unit",
        close(snr_exact_nlos(&c, &unit, &p1).snr_b, 0.25),
    );

    let s = snr_high_gains(&third, 1.0, 1.0, 9.0);
    check("high snr unit", close(s.snr_a, 1.0) && close(s.snr_b, 1.0));
    let s = snr_high_gains(&no_relay, 1.0, 1.0, 9.0);
    check("high snr no relay", s.snr_a == 0.0 && s.snr_b == 0.0);
    let s = snr_high_gains(
        &AllocationFactors::new(0.2, 0.2, 0.5).unwrap(),
        0.7,
        0.7,
        3.0,
    );
    check("high snr symmetry", s.snr_a == s.snr_b);

    let pair = |snr_a, snr_b| SnrPair { snr_a, snr_b };
    check("sum rate zero", sum_rate(&pair(0.0, 0.0)) == 0.0);
    check("sum rate one", close(sum_rate(&pair(1.0, 1.0)), 1.0));
    check("sum rate 1.5", close(sum_rate(&pair(3.0, 1.0)), 1.5));
    check(
        "capacity factorisation",
        close(capacity(&pair(3.0, 1.0)), 0.5 * 9f64.log2()),
    );

    check(
        "causality constant",
        causality_check(&[1.0, 1.0, 1.0]).is_ok_and(|b| b),
    );
    check(
        "causality increasing",
        causality_check(&[1.0, 2.0, 3.0]).is_ok_and(|b| !b),
    );
    check(
        "causality 1, 1, 0.5",
        causality_check(&[1.0, 1.0, 0.5]).is_ok_and(|b| b),
    );

    check(
        "energy unit",
        bit_energy(&third, 1.0, 1.0, 2.0).is_ok_and(|(a, b)| close(a, 2.0) && close(b, 2.0)),
    );
    check(
        "energy zero",
        bit_energy(&zero, 1.0, 1.0, 2.0).is_ok_and(|e| e == (0.0, 0.0)),
    );
    let a = AllocationFactors::new(0.25, 0.25, 0.5).unwrap();
    check(
        "energy 5.25",
        bit_energy(&a, 2.0, 1.0, 1.0).is_ok_and(|(e, _)| close(e, 5.25)),
    );

    let (qa, qb) = bit_time(&third, 1.0, 1.0, 9.0, QModel::AsPrinted);
    check(
        "q_a = 2",
        matches!(qa, Extended::Finite(q) if close(q, 2.0)) && qa == qb,
    );
    let (qa, qb) = bit_time(&no_relay, 1.0, 1.0, 9.0, QModel::AsPrinted);
    check(
        "no relay delay",
        qa == Extended::Unbounded && qb == Extended::Unbounded,
    );
    let sym = AllocationFactors::new(0.3, 0.3, 0.3).unwrap();
    let (qa, qb) = bit_time(&sym, 0.4, 0.4, 2.0, QModel::AsPrinted);
    check("delay symmetry", qa == qb);

    check(
        "budget zero",
        power_budget_ok(&[pw(0.0, 0.0, 0.0), pw(0.0, 0.0, 0.0)], 2.0),
    );
    check(
        "budget boundary",
        power_budget_ok(&[pw(0.0, 0.0, 0.0), pw(1.0, 0.5, 0.5)], 2.0),
    );
    check(
        "budget exceeded",
        !power_budget_ok(
            &[pw(0.0, 0.0, 0.0), pw(0.4, 0.4, 0.4), pw(0.4, 0.4, 0.4)],
            2.0,
        ),
    );

    let f = scalarized_objective(
        &third,
        &WeightVector::equal(),
        1.0,
        1.0,
        9.0,
        QModel::AsPrinted,
    );
    check(
        "objective 8/3",
        matches!(f, Extended::Finite(v) if close(v, 8.0 / 3.0)),
    );
    let f = scalarized_objective(
        &no_relay,
        &WeightVector::equal(),
        1.0,
        1.0,
        9.0,
        QModel::AsPrinted,
    );
    check("objective unbounded", f == Extended::Unbounded);
    let gr = gradient(
        &sym,
        &WeightVector::new(0.3, 0.3, 0.4).unwrap(),
        0.8,
        0.8,
        2.0,
    );
    check("gradient symmetry", gr.is_ok_and(|g| close(g[0], g[1])));

    check("E* = 4", close(optimal_energy(&third, 1.0, 1.0, 2.0), 4.0));
    check("E* zero", optimal_energy(&zero, 1.0, 1.0, 2.0) == 0.0);

    check(
        "gamma* = 4.5",
        optimal_snr(&third, 1.0, 1.0, 9.0).is_ok_and(|s| close(s, 4.5)),
    );
    check(
        "BER 1/3 flagged",
        optimal_ber(&third, 1.0, 1.0, 9.0).is_ok_and(|b| close(b.ber, 1.0 / 3.0) && !b.valid),
    );
    let a = AllocationFactors::new(0.2, 0.3, 0.4).unwrap();
    let ratio =
        optimal_ber(&a, 1.3, 0.8, 2.0).unwrap().ber / optimal_ber(&a, 1.3, 0.8, 20.0).unwrap().ber;
    check("BER tenfold", close(ratio, 10.0));

    let cs = CascadeStats::new(10.0, 10.0).unwrap();
    check("first-order cdf", close(cdf_first_order(&cs, 0.01), 0.002));
    check(
        "cascade cdf",
        (cascade_cdf(&cs, 0.01) - 0.001_998_001_332_666_999).abs() <= 1e-9,
    );
    check("cdf at 0", cascade_cdf(&cs, 0.0) == 0.0);

    verdict(
        failed.is_empty(),
        if failed.is_empty() {
            "all hand values reproduced".to_string()
        } else {
            format!("mismatches: {failed:?}")
        },
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed form vs grid", c1_closed_form_vs_grid),
        ("gradient vs finite differences", c2_gradient),
        ("bordered Hessian PSD", c3_convexity),
        ("trade-off front shape", c4_tradeoff_shape),
        ("PA vs SN energy reduction", c5_pa_vs_sn),
        ("power transition knee", c6_transition),
        ("BER law vs Monte Carlo", c7_ber),
        ("Monte Carlo self-test", c8_mc_self_test),
        ("determinism across threads", c9_determinism),
        ("hand-value regression set", c10_trivial_values),
    ];
    let mut failing = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        if !v.pass {
            failing += 1;
        }
        println!(
            "{} {:>2}. {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {} failed",
        criteria.len() - failing,
        failing
    );
    if failing > 0 {
        std::process::exit(1);
    }
}
