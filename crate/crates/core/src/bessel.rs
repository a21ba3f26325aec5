//! Modified Bessel functions of the second kind, orders 0 and 1.
//!
//! Power series below `x = 2`, Steed's continued fraction above.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 10_000;

fn series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let ln_half = (0.5 * x).ln();

    // K0 = −(ln(x/2) + γ)·I0 + Σ (y^k/(k!)²)·H_k
    // K1 = 1/x + ln(x/2)·I1 − (x/4)·Σ (ψ(k+1) + ψ(k+2))·y^k/(k!(k+1)!)
    let mut i0 = 1.0;
    let mut i1 = 0.5 * x;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut t0 = 1.0; // y^k/(k!)²
    let mut t1 = 1.0; // y^k/(k!(k+1)!)
    let mut harmonic = 0.0;
    let mut psi_k1 = -EULER_GAMMA;
    s1 += (psi_k1 + psi_k1 + 1.0) * t1;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        t0 *= y / (kf * kf);
        t1 *= y / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        psi_k1 = -EULER_GAMMA + harmonic;
        let psi_k2 = psi_k1 + 1.0 / (kf + 1.0);
        i0 += t0;
        i1 += 0.5 * x * t1;
        s0 += t0 * harmonic;
        let d1 = (psi_k1 + psi_k2) * t1;
        s1 += d1;
        if t0 < EPS * i0 && d1.abs() < EPS * s1.abs() {
            break;
        }
    }
    let k0 = -(ln_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + ln_half * i1 - 0.25 * x * s1;
    (k0, k1)
}

fn continued_fraction(x: f64) -> (f64, f64) {
    // Order zero of Temme's method: ν = 0 so a1 = 1/4.
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_TERMS {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// `(K0(x), K1(x))` for `x > 0`. Non-positive or NaN input gives NaN.
pub fn k0_k1(x: f64) -> (f64, f64) {
    if !(x > 0.0) {
        return (f64::NAN, f64::NAN);
    }
    if x.is_infinite() {
        return (0.0, 0.0);
    }
    if x <= 2.0 {
        series(x)
    } else {
        continued_fraction(x)
    }
}

pub fn k0(x: f64) -> f64 {
    k0_k1(x).0
}

pub fn k1(x: f64) -> f64 {
    k0_k1(x).1
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `K_ν(x) = ∫₀^∞ exp(−x cosh t)·cosh(νt) dt` by composite Simpson.
    fn quadrature(nu: f64, x: f64) -> f64 {
        // integrand < 1e-300 beyond cosh t = 700/x
        let upper = (700.0 / x).max(1.0).acosh() + 1.0;
        let n = 200_000;
        let step = upper / n as f64;
        let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
        let mut sum = f(0.0) + f(upper);
        for i in 1..n {
            sum += f(i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * step / 3.0
    }

    #[test]
    fn against_integral_representation() {
        for &x in &[
            0.01, 0.1, 0.5, 1.0, 1.9, 2.0, 2.1, 3.0, 5.0, 10.0, 25.0, 60.0,
        ] {
            let (a0, a1) = k0_k1(x);
            let (r0, r1) = (quadrature(0.0, x), quadrature(1.0, x));
            assert!((a0 - r0).abs() <= 1e-10 * r0, "K0({x}) = {a0} vs {r0}");
            assert!((a1 - r1).abs() <= 1e-10 * r1, "K1({x}) = {a1} vs {r1}");
        }
    }

    #[test]
    fn reference_values() {
        // Tabulated K0(1), K1(1).
        assert!((k0(1.0) - 0.421_024_438_240_708_3).abs() < 1e-14);
        assert!((k1(1.0) - 0.601_907_230_197_234_6).abs() < 1e-14);
    }

    #[test]
    fn continuous_at_switch() {
        let (a0, a1) = series(2.0);
        let (b0, b1) = continued_fraction(2.0);
        assert!((a0 - b0).abs() < 1e-14 * a0);
        assert!((a1 - b1).abs() < 1e-14 * a1);
    }

    #[test]
    fn small_argument_limits() {
        let x = 1e-8;
        assert!((k1(x) * x - 1.0).abs() < 1e-12);
        assert!((k0(x) + (0.5 * x).ln() + EULER_GAMMA).abs() < 1e-12);
        assert!(k0(0.0).is_nan() && k1(-1.0).is_nan());
        assert_eq!(k0_k1(f64::INFINITY), (0.0, 0.0));
    }
}
