//! Experiment configuration, sweeps over distance, budget and altitude,
//! figure datasets and the oracle-suite report.

mod checks;
mod config;
mod run;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use checks::*;
pub use config::*;
pub use run::*;

use crate::channel::ChannelParams;
use crate::energy::{AllocationFactors, QModel};
use crate::error::Result;
use crate::geometry::LinkGeometry;
use crate::montecarlo::{simulate_single_hop, simulate_two_hop, TrialConfig};
use crate::optimizer::optimal_allocation;
use crate::oracle::rayleigh_bpsk_ber;

/// Subcommands of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Optimize,
    Sweep,
    Tradeoff,
    Ber,
    Validate,
    Mc,
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub q_model: Option<QModel>,
    pub samples: Option<usize>,
    pub inject: Option<Fault>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
            cfg.validate.seed = s;
        }
        if let Some(m) = self.q_model {
            cfg.q_model = m;
        }
        if let Some(n) = self.samples {
            cfg.mc.samples = n;
        }
    }
}

/// Exit status of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    AllInfeasible,
    OracleFailure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::AllInfeasible => 2,
            Status::OracleFailure => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    /// Human-readable summary for standard output.
    pub summary: String,
    pub warnings: Vec<String>,
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn scheme_warnings(cfg: &ExperimentConfig) -> Vec<String> {
    [Scheme::Pa, Scheme::Sn]
        .into_iter()
        .filter(|s| !cfg.has(*s))
        .map(|s| format!("scheme {s} not configured; datasets hold the other scheme only"))
        .collect()
}

/// Direction of the PA energy as the user separation grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Mixed,
}

pub fn energy_trend(rows: &[ResultRow], weight_index: usize) -> Trend {
    let e: Vec<f64> = rows
        .iter()
        .filter(|r| r.scheme == "PA" && r.weight_index == weight_index && !r.failed())
        .map(|r| r.energy())
        .collect();
    if e.windows(2).all(|p| p[1] >= p[0]) {
        Trend::Increasing
    } else if e.windows(2).all(|p| p[1] <= p[0]) {
        Trend::Decreasing
    } else {
        Trend::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    /// Mean `(E_SN − E_PA)/E_SN` over the distance sweep.
    pub pa_vs_sn_reduction: Option<f64>,
    pub transition: Option<TransitionCheck>,
    pub energy_trend_vs_distance: Vec<Trend>,
}

/// Result line of the oracle suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    /// `None` for informational lines.
    pub pass: Option<bool>,
    pub measured: String,
    pub threshold: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub lines: Vec<CheckLine>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass != Some(false))
    }

    pub fn failures(&self) -> Vec<&CheckLine> {
        self.lines
            .iter()
            .filter(|l| l.pass == Some(false))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let tag = match l.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "INFO",
            };
            let _ = writeln!(
                s,
                "[{tag}] {}: {} (threshold: {})",
                l.name, l.measured, l.threshold
            );
        }
        let _ = writeln!(
            s,
            "{}: {} failing check(s)",
            if self.all_pass() {
                "ALL PASS"
            } else {
                "SUITE FAILED"
            },
            self.failures().len()
        );
        s
    }
}

fn line(name: &str, pass: Option<bool>, measured: String, threshold: &str) -> CheckLine {
    CheckLine {
        name: name.into(),
        pass,
        measured,
        threshold: threshold.into(),
    }
}

/// Runs the oracle suite at the configured sizes.
pub fn validate(cfg: &ExperimentConfig, fault: Option<Fault>) -> Result<ValidationReport> {
    let v = &cfg.validate;
    let mut lines = Vec::new();

    let grid = closed_form_vs_grid(
        &random_instances(v.instances, v.seed),
        v.grid_step,
        1e-3,
        fault,
    );
    lines.push(line(
        "closed form vs grid, closed form alone",
        Some(grid.closed_form_rate() >= 0.95),
        format!(
            "{}/{} instances ({} used a printed root, worst gap {:.3e})",
            grid.closed_form_pass,
            grid.instances,
            grid.closed_form_root_used,
            grid.worst_closed_form_gap
        ),
        ">= 95% within 1e-3 relative",
    ));
    lines.push(line(
        "closed form vs grid, with fallback",
        Some(grid.with_fallback_pass == grid.instances),
        format!(
            "{}/{} instances, worst gap {:.3e}",
            grid.with_fallback_pass, grid.instances, grid.worst_gap
        ),
        "100% within 1e-3 relative",
    ));

    let grad = gradient_check(v.gradient_points, v.seed.wrapping_add(1), fault);
    lines.push(line(
        "analytic gradient vs central differences",
        Some(grad.max_rel_err <= 1e-6),
        format!(
            "max relative error {:.3e} over {} points",
            grad.max_rel_err, grad.points
        ),
        "<= 1e-6",
    ));
    lines.push(line(
        "printed derivative expressions vs central differences",
        None,
        format!("max relative error {:.3e}", grad.printed_max_rel_err),
        "informational",
    ));

    let psd = psd_check(v.psd_points, v.psd_directions, v.seed.wrapping_add(2));
    lines.push(line(
        "bordered Hessian positive semidefinite",
        Some(psd.failing_points == 0),
        format!(
            "{}/{} points violate, {} of {} directions, worst ratio {:.3e}",
            psd.failing_points,
            psd.points,
            psd.violations,
            psd.points * psd.directions,
            psd.worst_ratio
        ),
        "zero violations at -1e-9 relative",
    ));

    let shape = tradeoff_shape(&tradeoff_rows(cfg)?);
    lines.push(line(
        "trade-off front shape",
        Some(shape.non_increasing && shape.convex_first_half),
        format!(
            "{} Pareto points, non-increasing {}, shrinking drops over first half {}",
            shape.front.len(),
            shape.non_increasing,
            shape.convex_first_half
        ),
        "non-increasing E* with shrinking drops",
    ));

    let ber = ber_agreement(&ber_rows(cfg)?, 0.2, fault);
    lines.push(line(
        "analytic BER vs Monte Carlo",
        Some(ber.in_scope > 0 && ber.agreeing == ber.in_scope),
        format!(
            "{}/{} in-scope rows agree, worst relative error {:.3}",
            ber.agreeing, ber.in_scope, ber.worst_rel_err
        ),
        "within 20% where BER >= 1e-4 and gamma* >= 10",
    ));
    lines.push(line(
        "analytic BER slope vs budget",
        Some(ber.slope.is_some_and(|s| (s + 1.0).abs() <= 0.05)),
        ber.slope.map_or("undefined".into(), |s| format!("{s:.4}")),
        "-1.0 +/- 0.05",
    ));
    lines.push(line(
        "analytic BER slope vs budget, fixed allocation",
        None,
        ber.fixed_slope
            .map_or("undefined".into(), |s| format!("{s:.4}")),
        "informational",
    ));

    let mc = mc_self_test(cfg.mc.samples, cfg.mc.seed)?;
    lines.push(line(
        "Monte Carlo single-hop Rayleigh BPSK",
        Some((mc.single_hop_ber - mc.single_hop_reference).abs() <= 0.005),
        format!("{:.5} vs {:.5}", mc.single_hop_ber, mc.single_hop_reference),
        "+/- 0.005",
    ));
    lines.push(line(
        "Monte Carlo noise-free and zero-power limits",
        Some(mc.zero_noise_ber == 0.0 && (mc.zero_power_ber - 0.5).abs() <= mc.zero_power_ci),
        format!(
            "noise-free {}, zero power {:.5} +/- {:.5}",
            mc.zero_noise_ber, mc.zero_power_ber, mc.zero_power_ci
        ),
        "0 and 0.5 +/- CI",
    ));

    let g = &cfg.geometry;
    let ends: Vec<_> = [g.d_min, g.d_max]
        .iter()
        .map(|&d| sweep_point(cfg, "d", d, d, g.altitude, cfg.power.total_power))
        .collect::<Result<_>>()?;
    let rows = run_pa(cfg, &ends, &[cfg.weights.reference]);
    lines.push(line(
        "PA energy direction from d_min to d_max",
        None,
        format!("{:?}", energy_trend(&rows, 0)).to_lowercase(),
        "informational",
    ));

    Ok(ValidationReport { lines })
}

/// One Monte Carlo run of the `mc` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub case: String,
    pub samples: usize,
    pub seed: u64,
    pub ber_a: f64,
    pub ber_b: f64,
    pub ber: f64,
    pub ci_halfwidth: f64,
    pub mean_snr_a: f64,
    pub mean_snr_b: f64,
    /// Closed-form reference where one exists.
    pub reference: Option<f64>,
}

fn mc_rows(cfg: &ExperimentConfig) -> Result<Vec<McRow>> {
    let seed = cfg.mc.seed;
    let tc = cfg.trial(seed);
    let row = |case: &str,
               r: crate::montecarlo::EmpiricalResult,
               reference: Option<f64>,
               tc: &TrialConfig| McRow {
        case: case.into(),
        samples: r.samples,
        seed: tc.seed,
        ber_a: r.ber_a,
        ber_b: r.ber_b,
        ber: r.ber(),
        ci_halfwidth: r.ci_halfwidth,
        mean_snr_a: r.mean_snr_a,
        mean_snr_b: r.mean_snr_b,
        reference,
    };
    let mut out = Vec::new();
    let unit_tc = TrialConfig {
        mode: Default::default(),
        ..tc
    };
    out.push(row(
        "single-hop-snr-1",
        simulate_single_hop(&unit_tc, 1.0)?,
        Some(rayleigh_bpsk_ber(1.0)),
        &unit_tc,
    ));
    let geo = [LinkGeometry {
        d: 1.0,
        d_a: 1.0,
        d_b: 1.0,
    }];
    let quiet = TrialConfig {
        noise_scale: 0.0,
        ..unit_tc
    };
    out.push(row(
        "noise-free",
        simulate_two_hop(
            &quiet,
            &AllocationFactors::equal_split(),
            &geo,
            &ChannelParams::default(),
        )?,
        Some(0.0),
        &quiet,
    ));
    out.push(row(
        "zero-power",
        simulate_two_hop(
            &unit_tc,
            &AllocationFactors::from_array([0.0; 3]),
            &geo,
            &ChannelParams::default(),
        )?,
        Some(0.5),
        &unit_tc,
    ));

    let g = &cfg.geometry;
    let p = sweep_point(
        cfg,
        "d",
        g.d_default,
        g.d_default,
        g.altitude,
        cfg.power.total_power,
    )?;
    let c = cfg.channel_params(p.total_power);
    let mut schemes = cfg.schemes.clone();
    schemes.sort();
    schemes.dedup();
    for (k, s) in schemes.into_iter().enumerate() {
        let alloc = match s {
            Scheme::Pa => {
                optimal_allocation(
                    &cfg.weights.reference,
                    p.h,
                    p.g,
                    p.total_power,
                    2.0,
                    cfg.q_model,
                )?
                .alloc
            }
            Scheme::Sn => cfg.sn_alloc()?,
        };
        let tc = cfg.trial(seed.wrapping_add(1 + k as u64));
        let reference = crate::ber::optimal_ber(&alloc, p.h, p.g, p.total_power)
            .ok()
            .map(|b| b.ber);
        out.push(row(
            &format!("two-hop-{}", s.as_str().to_lowercase()),
            simulate_two_hop(&tc, &alloc, &p.slots, &c)?,
            reference,
            &tc,
        ));
    }
    Ok(out)
}

/// Runs one subcommand and writes its datasets under `cfg.output.dir`.
pub fn execute(cmd: Command, cfg: &ExperimentConfig, fault: Option<Fault>) -> Result<Outcome> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut summary = String::new();
    let mut warnings = Vec::new();
    let mut status = Status::Success;

    let emit = |name: &str,
                rows: &[ResultRow],
                files: &mut Vec<PathBuf>,
                summary: &mut String|
     -> Result<bool> {
        let path = dir.join(name);
        write_rows(&path, rows)?;
        let _ = writeln!(summary, "wrote {} ({} rows)", path.display(), rows.len());
        files.push(path);
        Ok(all_failed(rows))
    };

    match cmd {
        Command::Optimize => {
            warnings.extend(scheme_warnings(cfg));
            let g = &cfg.geometry;
            let p = sweep_point(
                cfg,
                "d",
                g.d_default,
                g.d_default,
                g.altitude,
                cfg.power.total_power,
            )?;
            let rows = run_points(cfg, &[p], &[cfg.weights.reference]);
            for r in &rows {
                let _ = writeln!(
                    summary,
                    "{} alpha=({:.6}, {:.6}, {:.6}) q=({:.6}, {:.6}) E=({:.6e}, {:.6e}) branch={}",
                    r.scheme,
                    r.alpha_a,
                    r.alpha_b,
                    r.alpha_r,
                    r.q_a,
                    r.q_b,
                    r.e_a,
                    r.e_b,
                    r.root_branch
                );
            }
            if emit("optimize.csv", &rows, &mut files, &mut summary)? {
                status = Status::AllInfeasible;
            }
        }
        Command::Tradeoff => {
            warnings.extend(scheme_warnings(cfg));
            let rows = tradeoff_rows(cfg)?;
            if emit("fig2_tradeoff.csv", &rows, &mut files, &mut summary)? {
                status = Status::AllInfeasible;
            }
        }
        Command::Sweep => {
            warnings.extend(scheme_warnings(cfg));
            let weights = cfg.weight_grid();
            let distance = run_points(cfg, &distance_points(cfg)?, &weights);
            let power = run_points(cfg, &power_points(cfg)?, &[cfg.weights.reference]);
            let altitude = run_points(cfg, &altitude_points(cfg)?, &weights);
            let mut failed = true;
            failed &= emit("fig3_distance.csv", &distance, &mut files, &mut summary)?;
            failed &= emit("fig5_power.csv", &power, &mut files, &mut summary)?;
            failed &= emit("fig8_altitude.csv", &altitude, &mut files, &mut summary)?;
            if failed {
                status = Status::AllInfeasible;
            }
            let s = SweepSummary {
                pa_vs_sn_reduction: pa_vs_sn_reduction(&distance),
                transition: transition(&power),
                energy_trend_vs_distance: (0..weights.len())
                    .map(|k| energy_trend(&distance, k))
                    .collect(),
            };
            let path = dir.join("summary.json");
            fs::write(
                &path,
                serde_json::to_string_pretty(&s).map_err(|e| crate::Error::Io(e.to_string()))?
                    + "\n",
            )?;
            if let Some(r) = s.pa_vs_sn_reduction {
                let _ = writeln!(summary, "PA vs SN mean energy reduction: {:.2}%", 100.0 * r);
            }
            if let Some(t) = &s.transition {
                let _ = writeln!(
                    summary,
                    "transition knee at {} dBm, flattening ratio {:.3}",
                    t.knee_dbm, t.flattening_ratio
                );
            }
            let _ = writeln!(summary, "wrote {}", path.display());
            files.push(path);
        }
        Command::Ber => {
            warnings.extend(scheme_warnings(cfg));
            let rows = ber_rows(cfg)?;
            if emit("fig10_ber.csv", &rows, &mut files, &mut summary)? {
                status = Status::AllInfeasible;
            }
        }
        Command::Validate => {
            let report = validate(cfg, fault)?;
            let text = report.render();
            let path = dir.join("validate.txt");
            fs::write(&path, &text)?;
            summary.push_str(&text);
            files.push(path);
            if !report.all_pass() {
                status = Status::OracleFailure;
            }
        }
        Command::Mc => {
            let rows = mc_rows(cfg)?;
            let path = dir.join("mc.csv");
            write_csv(&path, &rows)?;
            let _ = writeln!(summary, "wrote {} ({} rows)", path.display(), rows.len());
            files.push(path);
        }
    }
    Ok(Outcome {
        status,
        files,
        summary,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.output.dir = dir.to_path_buf();
        c.mc.samples = 2000;
        c.mc.ber_dbm = vec![20.0, 25.0, 30.0];
        c.validate.instances = 3;
        c.validate.grid_step = 0.05;
        c.validate.gradient_points = 5;
        c.validate.psd_points = 3;
        c.validate.psd_directions = 50;
        c.weights.delay_weights = vec![0.2, 0.5, 0.8];
        c
    }

    #[test]
    fn options_override_config() {
        let mut c = ExperimentConfig::default();
        RunOptions {
            out_dir: Some("x".into()),
            seed: Some(9),
            q_model: Some(QModel::Symmetric),
            samples: Some(10),
            inject: None,
        }
        .apply(&mut c);
        assert_eq!((c.mc.seed, c.validate.seed, c.mc.samples), (9, 9, 10));
        assert_eq!(c.q_model, QModel::Symmetric);
        assert_eq!(c.output.dir, PathBuf::from("x"));
    }

    #[test]
    fn report_rendering() {
        let r = ValidationReport {
            lines: vec![
                line("a", Some(true), "1".into(), "t"),
                line("b", None, "2".into(), "info"),
            ],
        };
        assert!(r.all_pass());
        assert!(r.render().contains("[PASS] a: 1 (threshold: t)"));
        let r = ValidationReport {
            lines: vec![line("c", Some(false), "3".into(), "t")],
        };
        assert!(!r.all_pass());
        assert!(r.render().ends_with("SUITE FAILED: 1 failing check(s)\n"));
    }

    #[test]
    fn trend_classification() {
        let mk = |e: f64| ResultRow {
            e_a: e,
            e_b: 0.0,
            root_branch: "plus".into(),
            ..run::tests_support::blank_row()
        };
        assert_eq!(energy_trend(&[mk(1.0), mk(2.0)], 0), Trend::Increasing);
        assert_eq!(energy_trend(&[mk(2.0), mk(1.0)], 0), Trend::Decreasing);
        assert_eq!(energy_trend(&[mk(2.0), mk(1.0), mk(3.0)], 0), Trend::Mixed);
    }

    #[test]
    fn mc_subcommand_writes_rows() {
        let dir = std::env::temp_dir().join(format!("uav-relay-mc-{}", std::process::id()));
        let out = execute(Command::Mc, &tiny(&dir), None).unwrap();
        assert_eq!(out.status, Status::Success);
        let text = fs::read_to_string(&out.files[0]).unwrap();
        assert!(text.starts_with("case,samples,seed,ber_a,ber_b,ber,"));
        assert_eq!(text.lines().count(), 6);
        let _ = fs::remove_dir_all(dir);
    }
}
