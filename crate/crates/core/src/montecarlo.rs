//! Sample-level simulation of the two-way relay link with BPSK symbols,
//! Rayleigh fading, relay amplification and self-interference cancellation.
//!
//! Samples are split into fixed chunks, each driven by its own ChaCha8
//! stream keyed by `(seed, chunk)`. Per-chunk tallies are merged in chunk
//! order, so results do not depend on the thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ber::BerEstimate;
use crate::channel::{amplification_factor_for, snr_exact_gains, ChannelParams};
use crate::energy::AllocationFactors;
use crate::error::{ensure, Error, Result};
use crate::geometry::LinkGeometry;

pub const DEFAULT_SAMPLES: usize = 100_000;
const CHUNK: usize = 4096;
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkMode {
    Los,
    #[default]
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub samples: usize,
    pub seed: u64,
    pub mode: LinkMode,
    /// Multiplies every noise sample; 0 gives a noise-free link.
    pub noise_scale: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            mode: LinkMode::Nlos,
            noise_scale: 1.0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.samples >= 1, "samples", || "must be >= 1".into())?;
        ensure(
            self.noise_scale >= 0.0 && self.noise_scale.is_finite(),
            "noise_scale",
            || format!("must be finite and >= 0, got {}", self.noise_scale),
        )
    }
}

/// Error fractions and SNR statistics over one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResult {
    pub samples: usize,
    pub errors_a: u64,
    pub errors_b: u64,
    /// Error fraction of bits detected at S_a.
    pub ber_a: f64,
    pub ber_b: f64,
    pub mean_snr_a: f64,
    pub mean_snr_b: f64,
    /// Standard errors of the mean SNRs.
    pub snr_se_a: f64,
    pub snr_se_b: f64,
    /// 95% normal-approximation half-width of the pooled error fraction.
    pub ci_halfwidth: f64,
}

impl EmpiricalResult {
    /// Pooled error fraction over both directions.
    pub fn ber(&self) -> f64 {
        (self.errors_a + self.errors_b) as f64 / (2 * self.samples) as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    n: u64,
    err_a: u64,
    err_b: u64,
    sum_a: f64,
    sq_a: f64,
    sum_b: f64,
    sq_b: f64,
}

impl Tally {
    fn record(&mut self, wrong_a: bool, wrong_b: bool, snr_a: f64, snr_b: f64) {
        self.n += 1;
        self.err_a += u64::from(wrong_a);
        self.err_b += u64::from(wrong_b);
        self.sum_a += snr_a;
        self.sq_a += snr_a * snr_a;
        self.sum_b += snr_b;
        self.sq_b += snr_b * snr_b;
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.n += o.n;
        self.err_a += o.err_a;
        self.err_b += o.err_b;
        self.sum_a += o.sum_a;
        self.sq_a += o.sq_a;
        self.sum_b += o.sum_b;
        self.sq_b += o.sq_b;
        self
    }

    fn finish(self) -> EmpiricalResult {
        let n = self.n as f64;
        let stats = |sum: f64, sq: f64| {
            let mean = sum / n;
            let var = if self.n > 1 {
                ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / n).sqrt())
        };
        let (mean_snr_a, snr_se_a) = stats(self.sum_a, self.sq_a);
        let (mean_snr_b, snr_se_b) = stats(self.sum_b, self.sq_b);
        let pooled = (self.err_a + self.err_b) as f64 / (2.0 * n);
        EmpiricalResult {
            samples: self.n as usize,
            errors_a: self.err_a,
            errors_b: self.err_b,
            ber_a: self.err_a as f64 / n,
            ber_b: self.err_b as f64 / n,
            mean_snr_a,
            mean_snr_b,
            snr_se_a,
            snr_se_b,
            ci_halfwidth: Z_95 * (pooled * (1.0 - pooled) / (2.0 * n)).sqrt(),
        }
    }
}

fn run_chunks(
    samples: usize,
    seed: u64,
    sample: impl Fn(&mut ChaCha8Rng, usize, &mut Tally) + Sync,
) -> EmpiricalResult {
    let chunks = samples.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut t = Tally::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                sample(&mut rng, i, &mut t);
            }
            t
        })
        .collect();
    tallies
        .into_iter()
        .fold(Tally::default(), Tally::merge)
        .finish()
}

/// Circularly symmetric complex Gaussian with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Independent unit-power Rayleigh coefficients `(h, g)`.
pub fn draw_channels<R: Rng + ?Sized>(rng: &mut R) -> (Complex64, Complex64) {
    (complex_gaussian(rng, 1.0), complex_gaussian(rng, 1.0))
}

fn bpsk<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Coherent BPSK decision on `y` for a symbol seen through `coeff`.
fn detect(coeff: Complex64, y: Complex64) -> f64 {
    let stat = if coeff == Complex64::new(0.0, 0.0) {
        y.re
    } else {
        (coeff.conj() * y).re
    };
    if stat >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Two-way relay exchange over `geometries`, used round-robin per sample.
///
/// Each sample draws both hop coefficients, both symbols and the three noise
/// terms. The relay scales its received signal to `p_r`; each user removes
/// its own echo and detects the other user's symbol. In LOS mode the direct
/// S_b→S_a and S_a→S_b terms are added to the user signals.
pub fn simulate_two_hop(
    tc: &TrialConfig,
    alloc: &AllocationFactors,
    geometries: &[LinkGeometry],
    c: &ChannelParams,
) -> Result<EmpiricalResult> {
    tc.validate()?;
    alloc.validate()?;
    c.validate()?;
    if geometries.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let p = alloc.powers(c.total_power);
    let (sa, sb, sr) = (p.p_a.sqrt(), p.p_b.sqrt(), p.p_r);
    let sigma2 = c.noise_var;
    let noise_var = sigma2 * tc.noise_scale * tc.noise_scale;
    let half = -0.5 * c.path_loss_exp;
    let scales: Vec<_> = geometries
        .iter()
        .map(|geo| {
            (
                (c.gamma_a * sigma2).sqrt() * geo.d_a.powf(half),
                (c.gamma_b * sigma2).sqrt() * geo.d_b.powf(half),
                (c.gamma_ab * sigma2).sqrt() * geo.d.powf(half),
                geo.d_a.powf(2.0 * half),
                geo.d_b.powf(2.0 * half),
            )
        })
        .collect();
    let los = tc.mode == LinkMode::Los;

    Ok(run_chunks(tc.samples, tc.seed, |rng, i, tally| {
        let (ka, kb, kab, la, lb) = scales[i % scales.len()];
        let (h0, g0) = draw_channels(rng);
        let (h, g) = (h0 * ka, g0 * kb);
        let d0 = complex_gaussian(rng, 1.0);
        let direct = d0 * kab;
        let (xa, xb) = (bpsk(rng), bpsk(rng));
        let n_r = complex_gaussian(rng, noise_var);
        let n_a = complex_gaussian(rng, noise_var);
        let n_b = complex_gaussian(rng, noise_var);

        let beta = amplification_factor_for(h.norm_sqr(), g.norm_sqr(), sigma2, &p);
        let y_r = h * sa * xa + g * sb * xb + n_r;

        let mut coeff_a = h * beta * sb * g;
        let mut y_a = h * beta * y_r - h * beta * sa * h * xa + n_a;
        let mut coeff_b = g * beta * sa * h;
        let mut y_b = g * beta * y_r - g * beta * sb * g * xb + n_b;
        if los {
            let to_a = g * sb + direct * (2.0 * sb);
            let to_b = h * sa + direct * (2.0 * sa);
            coeff_a += to_a;
            y_a += to_a * xb;
            coeff_b += to_b;
            y_b += to_b * xa;
        }

        let x = h.norm_sqr() / sigma2;
        let y = g.norm_sqr() / sigma2;
        let mut snr = snr_exact_gains(x, y, &p);
        if los {
            let gab = d0.norm_sqr() * c.gamma_ab;
            snr.snr_a += sr * p.p_b * gab * lb;
            snr.snr_b += sr * p.p_a * gab * la;
        }
        tally.record(
            detect(coeff_a, y_a) != xb,
            detect(coeff_b, y_b) != xa,
            snr.snr_a,
            snr.snr_b,
        );
    }))
}

/// Two independent single Rayleigh links with mean SNR `mean_snr`, no relay.
pub fn simulate_single_hop(tc: &TrialConfig, mean_snr: f64) -> Result<EmpiricalResult> {
    tc.validate()?;
    ensure(mean_snr >= 0.0 && mean_snr.is_finite(), "mean_snr", || {
        format!("must be >= 0, got {mean_snr}")
    })?;
    let noise_var = tc.noise_scale * tc.noise_scale;
    let amp = mean_snr.sqrt();
    Ok(run_chunks(tc.samples, tc.seed, |rng, _, tally| {
        let (h, g) = draw_channels(rng);
        let (xa, xb) = (bpsk(rng), bpsk(rng));
        let y_b = h * amp * xa + complex_gaussian(rng, noise_var);
        let y_a = g * amp * xb + complex_gaussian(rng, noise_var);
        tally.record(
            detect(g * amp, y_a) != xb,
            detect(h * amp, y_b) != xa,
            mean_snr * g.norm_sqr(),
            mean_snr * h.norm_sqr(),
        );
    }))
}

/// Analytic and simulated error rate at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub sweep_value: f64,
    pub ber_analytic: f64,
    pub snr_star: f64,
    pub ber_mc: f64,
    pub ci_halfwidth: f64,
    /// `|analytic − mc| / mc`; infinite when no errors were observed.
    pub rel_error: f64,
    /// High-SNR regime and an error rate the sample count can resolve.
    pub in_scope: bool,
    pub agree: bool,
}

/// Smallest analytic error rate that takes part in agreement checks.
pub const MIN_COMPARABLE_BER: f64 = 1e-4;

pub fn empirical_vs_analytic(
    points: &[(f64, BerEstimate, EmpiricalResult)],
    rel_tol: f64,
) -> Vec<ComparisonRow> {
    points
        .iter()
        .map(|&(x, est, mc)| {
            let ber_mc = mc.ber();
            let rel_error = if ber_mc > 0.0 {
                (est.ber - ber_mc).abs() / ber_mc
            } else {
                f64::INFINITY
            };
            ComparisonRow {
                sweep_value: x,
                ber_analytic: est.ber,
                snr_star: est.snr,
                ber_mc,
                ci_halfwidth: mc.ci_halfwidth,
                rel_error,
                in_scope: est.valid && est.ber >= MIN_COMPARABLE_BER,
                agree: rel_error <= rel_tol,
            }
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
