use nalgebra::{DMatrix, DVector};

use super::{gradient, hessian, objective_value, OptimalAllocation, RootBranch, WeightVector};
use crate::energy::{AllocationFactors, QModel};

/// Lower bound kept on every coordinate; the objective is unbounded on the
/// faces `α_i = 0`.
const FLOOR: f64 = 1e-9;
const GRID_STEP: f64 = 0.05;
const PGD_ITERS: usize = 3000;
const NEWTON_ITERS: usize = 60;

/// A smooth objective over `{x ≥ FLOOR, Σx ≤ 1}` in `N` coordinates.
trait Smooth<const N: usize> {
    fn value(&self, x: &[f64; N]) -> f64;
    fn grad(&self, x: &[f64; N]) -> [f64; N];
    fn hess(&self, x: &[f64; N]) -> [[f64; N]; N];
}

struct Full<'a> {
    w: &'a WeightVector,
    h: f64,
    g: f64,
    p: f64,
}

impl Smooth<3> for Full<'_> {
    fn value(&self, x: &[f64; 3]) -> f64 {
        objective_value(
            &AllocationFactors::from_array(*x),
            self.w,
            self.h,
            self.g,
            self.p,
        )
    }
    fn grad(&self, x: &[f64; 3]) -> [f64; 3] {
        gradient(
            &AllocationFactors::from_array(*x),
            self.w,
            self.h,
            self.g,
            self.p,
        )
        .unwrap_or([f64::NAN; 3])
    }
    fn hess(&self, x: &[f64; 3]) -> [[f64; 3]; 3] {
        hessian(
            &AllocationFactors::from_array(*x),
            self.w,
            self.h,
            self.g,
            self.p,
        )
        .unwrap_or([[f64::NAN; 3]; 3])
    }
}

/// `(u, r)` with `α = (u/2, u/2, r)`.
struct Mirrored<'a>(Full<'a>);

impl Mirrored<'_> {
    fn lift(y: &[f64; 2]) -> [f64; 3] {
        [0.5 * y[0], 0.5 * y[0], y[1]]
    }
}

impl Smooth<2> for Mirrored<'_> {
    fn value(&self, y: &[f64; 2]) -> f64 {
        self.0.value(&Self::lift(y))
    }
    fn grad(&self, y: &[f64; 2]) -> [f64; 2] {
        let g = self.0.grad(&Self::lift(y));
        [0.5 * (g[0] + g[1]), g[2]]
    }
    fn hess(&self, y: &[f64; 2]) -> [[f64; 2]; 2] {
        let h = self.0.hess(&Self::lift(y));
        let uu = 0.25 * (h[0][0] + h[0][1] + h[1][0] + h[1][1]);
        let ur = 0.5 * (h[0][2] + h[1][2]);
        [[uu, ur], [ur, h[2][2]]]
    }
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto `{x ≥ FLOOR, Σx ≤ 1}`.
fn project<const N: usize>(x: &[f64; N]) -> [f64; N] {
    let clamped = x.map(|v| v.max(FLOOR));
    if clamped.iter().sum::<f64>() <= 1.0 {
        return clamped;
    }
    let target = 1.0 - N as f64 * FLOOR;
    let y = x.map(|v| v - FLOOR);
    let mut sorted = y;
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - target) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    y.map(|v| (v - theta).max(0.0) + FLOOR)
}

fn feasible<const N: usize>(x: &[f64; N]) -> bool {
    x.iter().all(|&v| v >= FLOOR * 0.5) && x.iter().sum::<f64>() <= 1.0 + 1e-12
}

/// Projected gradient descent with backtracking on the quadratic upper model.
fn pgd<const N: usize, F: Smooth<N>>(f: &F, start: [f64; N], iters: &mut usize) -> [f64; N] {
    let mut x = project(&start);
    let mut fx = f.value(&x);
    let mut gx = f.grad(&x);
    let gnorm = dot(&gx, &gx).sqrt();
    let mut t = if gnorm > 0.0 { 0.05 / gnorm } else { 1.0 };
    for _ in 0..PGD_ITERS {
        *iters += 1;
        let mut accepted = None;
        while t > 1e-30 {
            let xn = project(&std::array::from_fn(|i| x[i] - t * gx[i]));
            let d: [f64; N] = std::array::from_fn(|i| xn[i] - x[i]);
            let fxn = f.value(&xn);
            if fxn.is_finite() && fxn <= fx + dot(&gx, &d) + dot(&d, &d) / (2.0 * t) {
                accepted = Some((xn, fxn, dot(&d, &d).sqrt()));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn, step)) = accepted else {
            break;
        };
        x = xn;
        fx = fxn;
        gx = f.grad(&x);
        if step < 1e-13 {
            break;
        }
        t *= 2.0;
    }
    x
}

fn stationarity<const N: usize>(x: &[f64; N], g: &[f64; N]) -> f64 {
    let on_face = x.iter().sum::<f64>() > 1.0 - 1e-9;
    let mean = g.iter().sum::<f64>() / N as f64;
    let v: [f64; N] = if on_face && mean < 0.0 {
        g.map(|v| v - mean)
    } else {
        *g
    };
    dot(&v, &v).sqrt()
}

/// Newton refinement in the interior or on the `Σx = 1` face.
fn newton<const N: usize, F: Smooth<N>>(f: &F, mut x: [f64; N], iters: &mut usize) -> [f64; N] {
    let mut fx = f.value(&x);
    for _ in 0..NEWTON_ITERS {
        *iters += 1;
        let g = f.grad(&x);
        let h = f.hess(&x);
        let hm = DMatrix::<f64>::from_fn(N, N, |i, j| h[i][j]);
        let gv = DVector::<f64>::from_fn(N, |i, _| g[i]);
        let sum: f64 = x.iter().sum();

        let mut dir = None;
        if sum > 1.0 - 1e-9 {
            // Equality-constrained step keeping Σx fixed.
            let mut kkt = DMatrix::<f64>::zeros(N + 1, N + 1);
            let mut rhs = DVector::<f64>::zeros(N + 1);
            for i in 0..N {
                for j in 0..N {
                    kkt[(i, j)] = h[i][j];
                }
                kkt[(i, N)] = 1.0;
                kkt[(N, i)] = 1.0;
                rhs[i] = -g[i];
            }
            rhs[N] = 1.0 - sum;
            if let Some(sol) = kkt.lu().solve(&rhs) {
                if sol[N] >= 0.0 {
                    dir = Some(std::array::from_fn::<f64, N, _>(|i| sol[i]));
                }
            }
        }
        if dir.is_none() {
            if let Some(chol) = hm.cholesky() {
                let d = chol.solve(&(-gv));
                dir = Some(std::array::from_fn(|i| d[i]));
            }
        }
        let Some(d) = dir else { break };
        let dn = dot(&d, &d).sqrt();
        if !dn.is_finite() || dn < 1e-16 {
            break;
        }
        let s0 = stationarity(&x, &g);
        let mut s = 1.0;
        let mut moved = false;
        while s > 1e-8 {
            let xn: [f64; N] = std::array::from_fn(|i| x[i] + s * d[i]);
            if feasible(&xn) {
                let fxn = f.value(&xn);
                let better = fxn < fx
                    || (fxn <= fx + 1e-15 * fx.abs() && stationarity(&xn, &f.grad(&xn)) < s0);
                if fxn.is_finite() && better {
                    x = xn;
                    fx = fxn;
                    moved = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !moved || s * dn < 1e-15 {
            break;
        }
    }
    x
}

fn grid_incumbent<const N: usize, F: Smooth<N>>(f: &F) -> [f64; N] {
    let steps = (1.0 / GRID_STEP).round() as usize;
    let mut best = [1.0 / (N as f64 + 1.0); N];
    let mut best_f = f.value(&best);
    let mut idx = [1usize; N];
    loop {
        let total: usize = idx.iter().sum();
        if total <= steps {
            let x = idx.map(|k| k as f64 * GRID_STEP);
            let v = f.value(&x);
            if v < best_f {
                best_f = v;
                best = x;
            }
        }
        // odometer over 1..=steps in each coordinate
        let mut k = 0;
        while k < N {
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 1;
            k += 1;
        }
        if k == N {
            break;
        }
    }
    best
}

fn minimise<const N: usize, F: Smooth<N>>(f: &F, patterns: &[[f64; N]]) -> ([f64; N], usize) {
    let mut starts = vec![grid_incumbent(f)];
    for scale in [0.25, 0.5, 0.75, 0.999] {
        for p in patterns {
            let s: f64 = p.iter().sum();
            starts.push(p.map(|v| v * scale / s));
        }
    }
    let mut iters = 0;
    let mut best: Option<([f64; N], f64)> = None;
    for start in starts {
        let x = newton(f, pgd(f, start, &mut iters), &mut iters);
        let v = f.value(&x);
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((x, v));
        }
    }
    (best.expect("at least one start").0, iters)
}

fn finish(
    x: [f64; 3],
    w: &WeightVector,
    h: f64,
    g: f64,
    p: f64,
    model: QModel,
    branch: RootBranch,
    iters: usize,
) -> OptimalAllocation {
    let alloc = AllocationFactors::from_array(x);
    OptimalAllocation::assemble(alloc, w, h, g, p, model, branch, true, iters, None)
}

/// Multi-start projected gradient descent plus Newton polishing over the
/// allocation simplex. Deterministic in its inputs.
pub fn numerical_allocation(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
) -> OptimalAllocation {
    let f = Full {
        w,
        h,
        g,
        p: total_power,
    };
    let patterns = [
        [1.0, 1.0, 1.0],
        [1.0, 1.0, 2.0],
        [2.0, 1.0, 1.0],
        [1.0, 2.0, 1.0],
    ];
    let (x, iters) = minimise(&f, &patterns);
    finish(x, w, h, g, total_power, model, RootBranch::Numerical, iters)
}

/// Same search restricted to `α_a = α_b`.
pub fn symmetric_allocation(
    w: &WeightVector,
    h: f64,
    g: f64,
    total_power: f64,
    model: QModel,
) -> OptimalAllocation {
    let f = Mirrored(Full {
        w,
        h,
        g,
        p: total_power,
    });
    let patterns = [[2.0, 1.0], [1.0, 1.0], [3.0, 1.0], [1.0, 3.0]];
    let (y, iters) = minimise(&f, &patterns);
    finish(
        Mirrored::lift(&y),
        w,
        h,
        g,
        total_power,
        model,
        RootBranch::Symmetric,
        iters,
    )
}
