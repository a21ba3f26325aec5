//! Independent reference computations used to check the analytic and
//! optimised results: exhaustive simplex grids, finite differences,
//! quadrature and closed-form single-link error rates.

use rayon::prelude::*;

use crate::energy::{AllocationFactors, QModel};
use crate::optimizer::{scalarized_objective, WeightVector};

/// Best point of the grid `{(i, j, k)·step : i, j, k ≥ 1, i + j + k ≤ 1/step}`.
pub fn grid_minimum(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
    step: f64,
) -> (AllocationFactors, f64) {
    let n = (1.0 / step).round() as usize;
    (1..n)
        .into_par_iter()
        .map(|i| {
            let mut best = (AllocationFactors::equal_split(), f64::INFINITY);
            for j in 1..n - i {
                for k in 1..=n - i - j {
                    let a = AllocationFactors::from_array([
                        i as f64 * step,
                        j as f64 * step,
                        k as f64 * step,
                    ]);
                    let f = scalarized_objective(&a, w, h, g, total_power, model).value();
                    if f < best.1 {
                        best = (a, f);
                    }
                }
            }
            best
        })
        .reduce(
            || (AllocationFactors::equal_split(), f64::INFINITY),
            |x, y| if y.1 < x.1 { y } else { x },
        )
}

/// Central difference of `f` along coordinate `i` with relative step `rel`.
pub fn central_difference<const N: usize>(
    f: impl Fn(&[f64; N]) -> f64,
    x: &[f64; N],
    i: usize,
    rel: f64,
) -> f64 {
    let step = rel * x[i].abs().max(1e-3);
    let mut up = *x;
    let mut dn = *x;
    up[i] += step;
    dn[i] -= step;
    (f(&up) - f(&dn)) / (2.0 * step)
}

fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        left + right + diff / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // Split once so symmetric integrands cannot fool the first error estimate.
    let pieces = 8;
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * width, a + (k + 1) as f64 * width);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(&f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 48)
        })
        .sum()
}

/// `∫₀^∞ f` through the substitution `x = t/(1 − t)`. `f` must decay at
/// infinity.
pub fn integrate_semi_infinite(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Error rate of coherent binary phase shift keying over one Rayleigh link
/// with mean SNR `snr`.
pub fn rayleigh_bpsk_ber(snr: f64) -> f64 {
    0.5 * (1.0 - (snr / (1.0 + snr)).sqrt())
}

/// `E[g(X, Y)]` for independent exponentials with means `mx`, `my`.
pub fn exponential_expectation_2d(g: impl Fn(f64, f64) -> f64, mx: f64, my: f64, tol: f64) -> f64 {
    integrate_semi_infinite(
        |s| (-s).exp() * integrate_semi_infinite(|t| (-t).exp() * g(mx * s, my * t), tol),
        tol,
    )
}
