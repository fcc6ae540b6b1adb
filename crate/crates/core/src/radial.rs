//! Radial solutions with two nodal zones.
//!
//! The Lane–Emden problem `v'' + v'/r + |v|^{p−1}v = 0`, `v(0) = c`, `v'(0) = 0`
//! is integrated in `s = ln r`, where it reads `w_ss = −e^{2s}|w|^{p−1}w`.
//! The nonlinearity is evaluated as `exp(2s + (p−1)ln|w|)·w`, so a solution
//! normalized by its maximum never forms `|w|^{p−1}` explicitly. Shooting
//! stops at the second zero `r₂`; the scaling `v_d(r) = d·v(d^{(p−1)/2} r)`
//! with `d = r₂^{2/(p−1)}` (for `c = 1`) moves it to `r = 1`.
//!
//! Hénon profiles follow from `u(r) = β^{2/(p−1)} v(r^β)`, `β = (2+α)/2`.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{AsymptoticConstants, GAMMA_QUOTED};
use crate::error::{HenonError, Result};
use crate::ode::{self, Step, Tolerances};

pub const START_RADIUS: f64 = 1e-8;
pub const ZERO_TOLERANCE_S: f64 = 1e-13;
const MAX_LOG_RADIUS: f64 = 800.0;

type State = [f64; 4];

fn rhs(p: f64) -> impl Fn(f64, &State) -> State {
    move |s: f64, y: &State| {
        let w = y[0];
        let a = if w == 0.0 { 0.0 } else { (2.0 * s + (p - 1.0) * w.abs().ln()).exp() };
        let src = a * w;
        // D and W accumulate 2π∫w_s² ds and 2π∫e^{2s}|w|^{p+1} ds
        [y[1], -src, 2.0 * PI * y[1] * y[1], 2.0 * PI * src * w]
    }
}

/// Unscaled shooting solution from `v(0) = central` up to its second zero.
#[derive(Debug, Clone)]
pub struct Shooting {
    pub p: f64,
    pub central: f64,
    /// First and second zeros in `r`.
    pub first_zero: f64,
    pub second_zero: f64,
    /// `∫_{B_{r₂}} |∇v|²` and `∫_{B_{r₂}} |v|^{p+1}`.
    pub dirichlet: f64,
    pub weighted: f64,
    /// `v_s = r v'` at the first zero.
    pub slope_at_first_zero: f64,
    s0: f64,
    y0: State,
    steps: Vec<(f64, State)>,
}

impl Shooting {
    /// `v(r)` for `0 ≤ r ≤ r₂`, evaluated by re-stepping from the nearest
    /// accepted integrator state.
    pub fn value(&self, r: f64) -> f64 {
        self.state(r).0
    }

    /// `(v, r v')` at radius `r`.
    pub fn state(&self, r: f64) -> (f64, f64) {
        if r <= 0.0 {
            return (self.central, 0.0);
        }
        let s = r.ln();
        if s <= self.s0 {
            let c = self.central;
            let a = c.abs().powf(self.p - 1.0) * r * r;
            return (c * (1.0 - a / 4.0), -c * a / 2.0);
        }
        let k = match self.steps.binary_search_by(|(t, _)| t.partial_cmp(&s).expect("finite")) {
            Ok(k) => return (self.steps[k].1[0], self.steps[k].1[1]),
            Err(k) => k,
        };
        let (t0, y0) = if k == 0 { (self.s0, self.y0) } else { self.steps[k - 1] };
        if k >= self.steps.len() {
            return (0.0, self.steps.last().map(|x| x.1[1]).unwrap_or(0.0));
        }
        let (y, _) = ode::dp_step(&rhs(self.p), t0, &y0, s - t0);
        (y[0], y[1])
    }
}

/// Shoots `v'' + v'/r + |v|^{p−1}v = 0`, `v(0) = central`, to its second zero.
pub fn shoot(p: f64, central: f64) -> Result<Shooting> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(HenonError::Config(format!("exponent p must exceed 1, got {p}")));
    }
    if !(central > 0.0 && central.is_finite()) {
        return Err(HenonError::Config(format!("central value must be positive, got {central}")));
    }
    let f = rhs(p);
    let r0 = START_RADIUS / central.powf((p - 1.0) / 2.0).max(1.0);
    let s0 = r0.ln();
    let a = central.powf(p - 1.0) * r0 * r0;
    let y0: State = [
        central * (1.0 - a / 4.0),
        -central * a / 2.0,
        2.0 * PI * central * central * a * a / 16.0,
        PI * central.powf(p + 1.0) * r0 * r0 / 2.0,
    ];
    let tol = Tolerances {
        rtol: 1e-12,
        atol: 1e-16 * central,
        max_steps: 2_000_000,
    };
    let mut steps: Vec<(f64, State)> = Vec::new();
    let mut zeros: Vec<(f64, State)> = Vec::new();
    ode::integrate(&f, s0, y0, MAX_LOG_RADIUS, 1e-3, tol, |st: &Step<4>| {
        let crosses = (st.y0[0] > 0.0 && st.y1[0] <= 0.0) || (st.y0[0] < 0.0 && st.y1[0] >= 0.0);
        if crosses {
            let (sz, yz) = ode::locate_root(&f, st, |y| y[0], ZERO_TOLERANCE_S);
            zeros.push((sz, yz));
            if zeros.len() == 2 {
                steps.push((sz, yz));
                return false;
            }
        }
        steps.push((st.t1, st.y1));
        true
    })?;
    if zeros.len() < 2 {
        return Err(HenonError::Solver(format!(
            "no second zero found below r = e^{MAX_LOG_RADIUS} for p = {p}"
        )));
    }
    let (s1, y1) = zeros[0];
    let (s2, y2) = zeros[1];
    Ok(Shooting {
        p,
        central,
        first_zero: s1.exp(),
        second_zero: s2.exp(),
        dirichlet: y2[2],
        weighted: y2[3],
        slope_at_first_zero: y1[1],
        s0,
        y0,
        steps,
    })
}

/// Radial solution with two nodal zones on the unit disc, vanishing at
/// `r = 1`. `nodes` and `values` tabulate the profile at the integrator
/// steps; `value` evaluates it anywhere in `[0, 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub p: f64,
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub interior_zero: f64,
    pub central_value: f64,
    /// `∫_B |∇u|²`.
    pub dirichlet_energy: f64,
    /// `∫_B |x|^α |u|^{p+1}`.
    pub weighted_integral: f64,
    /// `|r u'|` at the interior zero divided by `max|u|`.
    pub hopf_slope: f64,
    #[serde(skip)]
    shooting: Arc<Shooting>,
    /// `ln d` for the Lane–Emden rescaling.
    #[serde(skip)]
    log_scale: f64,
}

impl RadialProfile {
    fn beta(&self) -> f64 {
        (2.0 + self.alpha) / 2.0
    }

    fn amplitude(&self) -> f64 {
        // β^{2/(p−1)} · d
        (2.0 * self.beta().ln() / (self.p - 1.0) + self.log_scale).exp()
    }

    /// `u(r)` for `r ∈ [0, 1]`; zero outside.
    pub fn value(&self, r: f64) -> f64 {
        self.state(r).0
    }

    /// `(u, r u')`.
    pub fn state(&self, r: f64) -> (f64, f64) {
        if r >= 1.0 {
            return (0.0, self.state_inner(1.0).1);
        }
        self.state_inner(r.max(0.0))
    }

    fn state_inner(&self, r: f64) -> (f64, f64) {
        let b = self.beta();
        let rr = if r == 0.0 { 0.0 } else { (b * r.ln()).exp() * self.shooting.second_zero };
        let (w, ws) = self.shooting.state(rr.min(self.shooting.second_zero));
        let amp = self.amplitude();
        (amp * w, amp * b * ws)
    }

    /// Profile at `r = 0` followed by `radii`.
    pub fn ring_values(&self, radii: &[f64]) -> Vec<f64> {
        std::iter::once(self.central_value)
            .chain(radii.iter().map(|&r| self.value(r)))
            .collect()
    }

    /// `E_p(u) = ½∫|∇u|² − (p+1)⁻¹∫|x|^α|u|^{p+1}`.
    pub fn energy(&self) -> f64 {
        0.5 * self.dirichlet_energy - self.weighted_integral / (self.p + 1.0)
    }

    pub fn scaled_energy(&self) -> f64 {
        self.p * self.energy()
    }

    /// Relative Nehari defect `|∫|∇u|² − ∫|x|^α|u|^{p+1}| / ∫|∇u|²`.
    pub fn nehari_defect(&self) -> f64 {
        (self.dirichlet_energy - self.weighted_integral).abs() / self.dirichlet_energy
    }
}

/// Lane–Emden radial nodal solution on the unit disc (`α = 0`).
pub fn lane_emden_nodal(p: f64, tolerance: f64) -> Result<RadialProfile> {
    if !(tolerance > 0.0) {
        return Err(HenonError::Config("tolerance must be positive".into()));
    }
    let sh = shoot(p, 1.0)?;
    let log_d = 2.0 * sh.second_zero.ln() / (p - 1.0);
    let d2 = (2.0 * log_d).exp();
    let r2 = sh.second_zero;
    let mut nodes = vec![0.0];
    let mut values = vec![log_d.exp()];
    for (s, y) in &sh.steps {
        nodes.push((s.exp() / r2).min(1.0));
        values.push(log_d.exp() * y[0]);
    }
    let end = sh.steps.last().map(|x| x.1[0]).unwrap_or(0.0);
    let boundary = log_d.exp() * end;
    if boundary.abs() > tolerance {
        return Err(HenonError::Solver(format!(
            "shooting residual |v(1)| = {boundary:e} exceeds {tolerance:e}"
        )));
    }
    let max_abs = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let hopf = (log_d.exp() * sh.slope_at_first_zero).abs() / max_abs;
    let profile = RadialProfile {
        p,
        alpha: 0.0,
        nodes,
        values,
        interior_zero: sh.first_zero / r2,
        central_value: log_d.exp(),
        dirichlet_energy: d2 * sh.dirichlet,
        weighted_integral: d2 * sh.weighted,
        hopf_slope: hopf,
        shooting: Arc::new(sh),
        log_scale: log_d,
    };
    if profile.hopf_slope <= 1e-8 {
        return Err(HenonError::Numerical("degenerate slope at the interior zero".into()));
    }
    Ok(profile)
}

/// Maps a Lane–Emden profile to the Hénon profile for weight `|x|^α`.
pub fn henon_from_lane_emden(profile: &RadialProfile, alpha: f64) -> Result<RadialProfile> {
    if profile.alpha != 0.0 {
        return Err(HenonError::Config("expected a Lane–Emden profile (alpha = 0)".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(HenonError::Config(format!("alpha must be >= 0, got {alpha}")));
    }
    let p = profile.p;
    let b = (2.0 + alpha) / 2.0;
    let amp = (2.0 * b.ln() / (p - 1.0)).exp();
    let energy_factor = ((p + 3.0) / (p - 1.0) * b.ln()).exp();
    let nodes: Vec<f64> = profile.nodes.iter().map(|&t| t.powf(1.0 / b)).collect();
    let values = profile.values.iter().map(|v| amp * v).collect();
    Ok(RadialProfile {
        p,
        alpha,
        nodes,
        values,
        interior_zero: profile.interior_zero.powf(1.0 / b),
        central_value: amp * profile.central_value,
        dirichlet_energy: energy_factor * profile.dirichlet_energy,
        weighted_integral: energy_factor * profile.weighted_integral,
        hopf_slope: profile.hopf_slope * b,
        shooting: Arc::clone(&profile.shooting),
        log_scale: profile.log_scale,
    })
}

/// Radial nodal Hénon solution for `(α, p)`.
pub fn henon_radial(alpha: f64, p: f64, tolerance: f64) -> Result<RadialProfile> {
    henon_from_lane_emden(&lane_emden_nodal(p, tolerance)?, alpha)
}

/// `lim p E_p(u_rad) = 2(2+α)γπe`.
pub fn radial_energy_target(alpha: f64, gamma: f64) -> f64 {
    2.0 * (2.0 + alpha) * gamma * PI * E
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialEnergyRow {
    pub p: f64,
    pub p_energy: Option<f64>,
    pub p_dirichlet: Option<f64>,
    pub interior_zero: Option<f64>,
    pub central_value: Option<f64>,
    pub gap: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialEnergyTable {
    pub alpha: f64,
    /// Target with `γ` from its closed formula.
    pub target: f64,
    /// Target with the quoted `γ ≈ 4.859`.
    pub target_quoted: f64,
    pub rows: Vec<RadialEnergyRow>,
    /// Whether `|p E_p − target|` strictly decreases along the rows.
    pub gaps_decreasing: bool,
}

pub fn radial_energy_table(alpha: f64, p_list: &[f64]) -> Result<RadialEnergyTable> {
    let c = AsymptoticConstants::compute();
    let target = radial_energy_target(alpha, c.gamma);
    let rows: Vec<RadialEnergyRow> = p_list
        .par_iter()
        .map(|&p| match henon_radial(alpha, p, 1e-8) {
            Ok(u) => RadialEnergyRow {
                p,
                p_energy: Some(u.scaled_energy()),
                p_dirichlet: Some(p * u.dirichlet_energy),
                interior_zero: Some(u.interior_zero),
                central_value: Some(u.central_value),
                gap: Some((u.scaled_energy() - target).abs()),
                error: None,
            },
            Err(e) => RadialEnergyRow {
                p,
                p_energy: None,
                p_dirichlet: None,
                interior_zero: None,
                central_value: None,
                gap: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let gaps: Vec<Option<f64>> = rows.iter().map(|r| r.gap).collect();
    let gaps_decreasing = gaps.iter().all(Option::is_some)
        && gaps.windows(2).all(|w| w[1].unwrap_or(f64::INFINITY) < w[0].unwrap_or(0.0));
    Ok(RadialEnergyTable {
        alpha,
        target,
        target_quoted: radial_energy_target(alpha, GAMMA_QUOTED),
        rows,
        gaps_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Classical RK4 on `u_ss = −e^{(2+α)s}|u|^{p−1}u` with a fixed step in
    /// `s`, from the regular expansion at `s_start`; returns `u(e^{s_end})`.
    fn rk4_henon(alpha: f64, p: f64, u0: f64, s_start: f64, s_end: f64, h_max: f64) -> f64 {
        let g = |s: f64, u: f64| -((2.0 + alpha) * s).exp() * u.abs().powf(p - 1.0) * u;
        let a = u0.powf(p - 1.0) * ((2.0 + alpha) * s_start).exp();
        let mut u = u0 * (1.0 - a / (2.0 + alpha).powi(2));
        let mut us = -u0 * a / (2.0 + alpha);
        let n = ((s_end - s_start) / h_max).ceil() as usize;
        let h = (s_end - s_start) / n as f64;
        let mut s = s_start;
        for _ in 0..n {
            let k1 = (us, g(s, u));
            let k2 = (us + 0.5 * h * k1.1, g(s + 0.5 * h, u + 0.5 * h * k1.0));
            let k3 = (us + 0.5 * h * k2.1, g(s + 0.5 * h, u + 0.5 * h * k2.0));
            let k4 = (us + h * k3.1, g(s + h, u + h * k3.0));
            u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            us += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            s += h;
        }
        u
    }

    #[test]
    fn lane_emden_p3_shape() {
        let v = lane_emden_nodal(3.0, 1e-10).unwrap();
        assert!(v.value(1.0).abs() <= 1e-10);
        assert!(*v.values.last().unwrap() <= 1e-10);
        let sign_changes = v.values.windows(2).filter(|w| w[0] > 0.0 && w[1] < 0.0).count();
        assert_eq!(sign_changes, 1);
        assert!(v.interior_zero > 0.0 && v.interior_zero < 1.0);
        assert!(v.value(0.5 * v.interior_zero) > 0.0);
        assert!(v.value(0.5 * (1.0 + v.interior_zero)) < 0.0);
        assert!(v.hopf_slope > 1e-8);
    }

    #[test]
    fn scaling_identity() {
        let p = 3.0;
        let v1 = shoot(p, 1.0).unwrap();
        let v2 = shoot(p, 2.0).unwrap();
        let lam = 2.0_f64.powf((p - 1.0) / 2.0);
        assert!((v2.second_zero * lam - v1.second_zero).abs() < 1e-9 * v1.second_zero);
        let mut worst = 0.0_f64;
        for k in 0..=400 {
            let r = v2.second_zero * k as f64 / 400.0;
            worst = worst.max((v2.value(r) - 2.0 * v1.value(lam * r)).abs());
        }
        assert!(worst < 1e-8, "max deviation {worst}");
    }

    #[test]
    fn nehari_identity() {
        for p in [3.0, 10.0, 50.0] {
            for alpha in [0.0, 2.0] {
                let u = henon_radial(alpha, p, 1e-8).unwrap();
                assert!(u.nehari_defect() < 1e-8, "p={p} alpha={alpha} defect={}", u.nehari_defect());
            }
        }
    }

    #[test]
    fn alpha_zero_is_identity() {
        let v = lane_emden_nodal(5.0, 1e-10).unwrap();
        let u = henon_from_lane_emden(&v, 0.0).unwrap();
        assert_eq!(u.dirichlet_energy, v.dirichlet_energy);
        assert_eq!(u.interior_zero, v.interior_zero);
        for r in [0.0, 0.1, 0.5, 0.9] {
            assert_eq!(u.value(r), v.value(r));
        }
    }

    #[test]
    fn henon_energy_relation_and_zero() {
        let p = 10.0;
        let v = lane_emden_nodal(p, 1e-10).unwrap();
        let u = henon_from_lane_emden(&v, 2.0).unwrap();
        let fac = 2.0_f64.powf((p + 3.0) / (p - 1.0));
        assert!(((u.dirichlet_energy - fac * v.dirichlet_energy) / u.dirichlet_energy).abs() < 1e-8);
        assert!((u.interior_zero - v.interior_zero.powf(0.5)).abs() < 1e-10);
    }

    #[test]
    fn mapped_profile_matches_direct_integration() {
        let (alpha, p) = (2.0, 5.0);
        let u = henon_radial(alpha, p, 1e-10).unwrap();
        let s_start = (1e-6_f64).ln();
        let mut worst = 0.0_f64;
        for k in 1..=20 {
            let r = k as f64 / 20.0;
            let direct = rk4_henon(alpha, p, u.central_value, s_start, r.ln(), 2e-4);
            worst = worst.max((direct - u.value(r)).abs());
        }
        assert!(worst < 1e-6, "max deviation {worst}");
    }

    #[test]
    fn energy_targets() {
        let t0 = radial_energy_target(0.0, GAMMA_QUOTED);
        assert!((t0 - 166.0).abs() < 0.2);
        assert!((radial_energy_target(2.0, 4.7) - 2.0 * radial_energy_target(0.0, 4.7)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_exponent() {
        assert!(lane_emden_nodal(1.0, 1e-8).is_err());
        assert!(lane_emden_nodal(f64::NAN, 1e-8).is_err());
    }
}
