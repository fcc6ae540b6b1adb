//! Adaptive Dormand–Prince 5(4) integrator for small autonomous-size systems.

use crate::error::{HenonError, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// One Dormand–Prince step of size `h`; returns the fifth-order solution and
/// the embedded error estimate.
pub fn dp_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N]) {
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for m in 0..N {
                    ys[m] += h * a * kj[m];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; N];
    for s in 0..7 {
        for m in 0..N {
            y5[m] += h * B5[s] * k[s][m];
            err[m] += h * (B5[s] - B4[s]) * k[s][m];
        }
    }
    (y5, err)
}

/// Accepted step with its end state.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
}

/// Integrates forward from `t0` with adaptive steps, calling `on_step` after
/// each accepted step. Integration stops when `on_step` returns `false` or
/// `t` reaches `t_end`.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    h0: f64,
    tol: Tolerances,
    mut on_step: impl FnMut(&Step<N>) -> bool,
) -> Result<[f64; N]> {
    let mut t = t0;
    let mut y = y0;
    let mut h = h0.min(t_end - t0);
    let mut steps = 0;
    while t < t_end {
        if steps >= tol.max_steps {
            return Err(HenonError::Solver(format!("ode: step budget exhausted at t = {t}")));
        }
        steps += 1;
        let h_try = h.min(t_end - t);
        let (y1, e) = dp_step(&f, t, &y, h_try);
        let mut en = 0.0_f64;
        for m in 0..N {
            let sc = tol.atol + tol.rtol * y[m].abs().max(y1[m].abs());
            en = en.max((e[m] / sc).abs());
        }
        if !en.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            h = 0.25 * h_try;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(HenonError::Solver(format!("ode: non-finite state at t = {t}")));
            }
            continue;
        }
        if en <= 1.0 {
            let st = Step { t0: t, y0: y, t1: t + h_try, y1 };
            t += h_try;
            y = y1;
            if !on_step(&st) {
                return Ok(y);
            }
        }
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * fac;
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(HenonError::Solver(format!("ode: step size underflow at t = {t}")));
        }
    }
    Ok(y)
}

/// Locates `g(y(t)) = 0` inside an accepted step where `g` changes sign, by
/// bisection on re-stepped states. Returns `(t*, y(t*))`.
pub fn locate_root<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    step: &Step<N>,
    g: impl Fn(&[f64; N]) -> f64,
    t_tol: f64,
) -> (f64, [f64; N]) {
    let g0 = g(&step.y0);
    let mut lo = 0.0;
    let mut hi = step.t1 - step.t0;
    let mut y_hi = step.y1;
    while hi - lo > t_tol {
        let mid = 0.5 * (lo + hi);
        let (ym, _) = dp_step(f, step.t0, &step.y0, mid);
        if g(&ym) * g0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            y_hi = ym;
        }
    }
    let (y_lo, _) = dp_step(f, step.t0, &step.y0, lo);
    let (glo, ghi) = (g(&y_lo), g(&y_hi));
    // secant refinement inside the final bracket
    let w = if glo != ghi { glo / (glo - ghi) } else { 0.5 };
    let tr = lo + w.clamp(0.0, 1.0) * (hi - lo);
    let (yr, _) = dp_step(f, step.t0, &step.y0, tr);
    (step.t0 + tr, yr)
}
