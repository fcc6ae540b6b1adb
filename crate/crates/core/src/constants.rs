//! Asymptotic constants and the integer thresholds that predict how many
//! nodal regions a least-energy `n`-invariant solution may carry.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{HenonError, Result};

/// Literature value of κ, quoted to four decimals.
pub const KAPPA_QUOTED: f64 = 5.1869;
/// Literature value of γ. The closed formula evaluates to ≈ 4.8640; both are
/// reported, the formula value is used for every threshold.
pub const GAMMA_QUOTED: f64 = 4.859;

/// Guard used when flooring or ceiling quantities that are integers in
/// exact arithmetic.
const INTEGER_GUARD: f64 = 1e-9;

/// Problem triple: radial weight exponent, nonlinearity exponent and
/// rotational symmetry order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    alpha: f64,
    p: f64,
    n: usize,
}

impl ProblemParams {
    pub fn new(alpha: f64, p: f64, n: usize) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(HenonError::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(HenonError::Config(format!("p must be > 1, got {p}")));
        }
        if n < 1 {
            return Err(HenonError::Config("n must be >= 1".into()));
        }
        Ok(ProblemParams { alpha, p, n })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn residual(t: f64) -> f64 {
    2.0 * E.sqrt() * t.ln() + t
}

/// Root of `2√e·log t + t = 0` in `(0, 1)` by bisection on `[0.1, 1]`.
pub fn solve_tbar(tolerance: f64) -> Result<f64> {
    if !(tolerance > 0.0) {
        return Err(HenonError::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    let (mut lo, mut hi) = (0.1_f64, 1.0_f64);
    debug_assert!(residual(lo) < 0.0 && residual(hi) > 0.0);
    loop {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() <= tolerance || hi - lo <= f64::EPSILON * mid {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

pub fn kappa_from_tbar(tbar: f64) -> f64 {
    1.0 + 2.0 * E.sqrt() / tbar
}

pub fn gamma_from_tbar(tbar: f64) -> f64 {
    let se = E.sqrt();
    (-se / (tbar + se)).exp() * (E / (tbar * tbar) + 1.0 + 2.0 * se / tbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub tbar: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl AsymptoticConstants {
    pub fn from_tbar(tbar: f64) -> Self {
        AsymptoticConstants {
            tbar,
            kappa: kappa_from_tbar(tbar),
            gamma: gamma_from_tbar(tbar),
        }
    }

    /// Constants at the root resolved to `1e-14`.
    pub fn compute() -> Self {
        Self::from_tbar(solve_tbar(1e-14).expect("positive tolerance"))
    }

    /// `|2√e·log t̄ + t̄|`.
    pub fn tbar_residual(&self) -> f64 {
        residual(self.tbar).abs()
    }

    /// Formula γ minus the quoted 4.859.
    pub fn gamma_discrepancy(&self) -> f64 {
        self.gamma - GAMMA_QUOTED
    }

    /// `2(2+α)γπe`, the limit of `p·E_p` along radial two-zone solutions.
    pub fn radial_energy_limit(&self, alpha: f64) -> f64 {
        2.0 * (2.0 + alpha) * self.gamma * PI * E
    }

    /// `8πγe`, the limit of `p·∫|∇v_p|²` for the Lane–Emden radial solution.
    pub fn lane_emden_dirichlet_limit(&self) -> f64 {
        8.0 * PI * self.gamma * E
    }
}

pub fn kappa(c: &AsymptoticConstants) -> f64 {
    kappa_from_tbar(c.tbar)
}

pub fn gamma(c: &AsymptoticConstants) -> f64 {
    gamma_from_tbar(c.tbar)
}

/// Lower bound on per-region `p·∫|∇u|²`: `8πe`.
pub fn region_dirichlet_bound() -> f64 {
    8.0 * PI * E
}

/// Lower bound on per-region `p·E_p`: `4πe`.
pub fn region_energy_bound() -> f64 {
    4.0 * PI * E
}

pub fn floor_guarded(x: f64) -> i64 {
    (x + INTEGER_GUARD).floor() as i64
}

pub fn ceil_guarded(x: f64) -> i64 {
    (x - INTEGER_GUARD).ceil() as i64
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(HenonError::Config(format!("alpha must be >= 0, got {alpha}")))
    }
}

/// `⌈(2+α)κ/2 − 1⌉` distinct nonradial nodal solutions for large `p`.
pub fn multiplicity_lower_bound(alpha: f64) -> Result<i64> {
    check_alpha(alpha)?;
    let c = AsymptoticConstants::compute();
    Ok(ceil_guarded((2.0 + alpha) * c.kappa / 2.0 - 1.0))
}

/// `N_α = [(2+α)γ/2]`.
pub fn max_nodal_regions(alpha: f64) -> Result<i64> {
    check_alpha(alpha)?;
    let c = AsymptoticConstants::compute();
    Ok(floor_guarded((2.0 + alpha) * c.gamma / 2.0))
}

/// Largest `n` for which the 2n-region configuration is possible.
pub fn case1_threshold(alpha: f64, c: &AsymptoticConstants) -> i64 {
    floor_guarded((2.0 + alpha) * c.gamma / 4.0)
}

/// Largest `n` for which the (n+1)-region configuration is possible.
pub fn case2_threshold(alpha: f64, c: &AsymptoticConstants) -> i64 {
    floor_guarded((2.0 + alpha) * c.gamma / 2.0 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CasePrediction {
    pub max_regions: i64,
    pub case1_max_n: i64,
    pub case2_max_n: i64,
    pub case1_admissible: bool,
    pub case2_admissible: bool,
    pub case3_forced: bool,
    pub multiplicity: i64,
    pub guaranteed_quasiradial: i64,
}

pub fn predict_cases(params: &ProblemParams) -> CasePrediction {
    let c = AsymptoticConstants::compute();
    let alpha = params.alpha();
    let n = params.n() as i64;
    let case1_max_n = case1_threshold(alpha, &c);
    let case2_max_n = case2_threshold(alpha, &c);
    let case1_admissible = n <= case1_max_n;
    let case2_admissible = n <= case2_max_n;
    let multiplicity = ceil_guarded((2.0 + alpha) * c.kappa / 2.0 - 1.0);
    CasePrediction {
        max_regions: floor_guarded((2.0 + alpha) * c.gamma / 2.0),
        case1_max_n,
        case2_max_n,
        case1_admissible,
        case2_admissible,
        case3_forced: !case1_admissible && !case2_admissible,
        multiplicity,
        guaranteed_quasiradial: (multiplicity - case2_max_n).max(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: Newton iteration on the defining equation.
    fn tbar_newton() -> f64 {
        let se = E.sqrt();
        let mut t = 0.8_f64;
        for _ in 0..60 {
            let f = 2.0 * se * t.ln() + t;
            let df = 2.0 * se / t + 1.0;
            t -= f / df;
        }
        t
    }

    #[test]
    fn tbar_residual_and_value() {
        let t = solve_tbar(1e-12).unwrap();
        assert!(residual(t).abs() <= 1e-12);
        assert!((t - 0.7875).abs() < 5e-5);
        assert!((t - tbar_newton()).abs() < 1e-11);
        assert!(t > 0.0 && t < 1.0);
    }

    #[test]
    fn bad_tolerance_rejected() {
        assert!(solve_tbar(0.0).is_err());
        assert!(solve_tbar(-1.0).is_err());
    }

    #[test]
    fn kappa_values() {
        let c = AsymptoticConstants::compute();
        assert!((c.kappa - KAPPA_QUOTED).abs() < 1e-3);
        assert!((kappa_from_tbar(2.0 * E.sqrt()) - 2.0).abs() < 1e-15);
        assert!(kappa_from_tbar(0.7) > kappa_from_tbar(0.8));
        assert_eq!(kappa(&c), c.kappa);
    }

    #[test]
    fn gamma_values() {
        let c = AsymptoticConstants::compute();
        assert!((c.gamma - 4.864).abs() < 1e-3, "formula gamma {}", c.gamma);
        assert!((c.gamma - GAMMA_QUOTED).abs() / GAMMA_QUOTED < 5e-3);
        assert!(c.gamma_discrepancy() > 0.004);
        for t in [0.05, 0.3, 0.6, 0.99] {
            assert!(gamma_from_tbar(t) > 1.0);
        }
        assert!(c.kappa > c.gamma && c.gamma > 1.0);
        assert_eq!(gamma(&c), c.gamma);
    }

    #[test]
    fn conditioning_under_tbar_perturbation() {
        let c = AsymptoticConstants::compute();
        for dt in [1e-10, -1e-10] {
            let d = AsymptoticConstants::from_tbar(c.tbar + dt);
            assert!((d.kappa - c.kappa).abs() < 1e-8);
            assert!((d.gamma - c.gamma).abs() < 1e-8);
        }
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(multiplicity_lower_bound(0.0).unwrap(), 5);
        assert_eq!(multiplicity_lower_bound(2.0).unwrap(), 10);
        let m: Vec<i64> = [0.0, 1.0, 2.0].iter().map(|&a| multiplicity_lower_bound(a).unwrap()).collect();
        assert!(m[0] <= m[1] && m[1] <= m[2]);
        assert!(multiplicity_lower_bound(-1.0).is_err());
    }

    #[test]
    fn max_region_examples() {
        assert_eq!(max_nodal_regions(0.0).unwrap(), 4);
        assert_eq!(max_nodal_regions(2.0).unwrap(), 9);
        assert!(max_nodal_regions(0.0).unwrap() >= 2);
    }

    #[test]
    fn case_predictions_at_alpha_zero() {
        let p5 = predict_cases(&ProblemParams::new(0.0, 50.0, 5).unwrap());
        assert!(!p5.case1_admissible && !p5.case2_admissible && p5.case3_forced);
        assert_eq!(p5.guaranteed_quasiradial, 2);
        assert_eq!((p5.case1_max_n, p5.case2_max_n, p5.max_regions, p5.multiplicity), (2, 3, 4, 5));
        let p1 = predict_cases(&ProblemParams::new(0.0, 50.0, 1).unwrap());
        assert!(p1.case1_admissible && !p1.case3_forced);
    }

    #[test]
    fn threshold_orderings_on_alpha_grid() {
        let c = AsymptoticConstants::compute();
        for k in 0..=200 {
            let alpha = k as f64 * 0.1;
            let m = ceil_guarded((2.0 + alpha) * c.kappa / 2.0 - 1.0);
            let t2 = case2_threshold(alpha, &c);
            assert!((m - t2) as f64 >= (2.0 + alpha) * (c.kappa - c.gamma) / 2.0 - 1e-12);
            assert!(case1_threshold(alpha, &c) <= t2);
            let pred = predict_cases(&ProblemParams::new(alpha, 3.0, 1 + k % 7).unwrap());
            assert_eq!(pred.case3_forced, !pred.case1_admissible && !pred.case2_admissible);
            assert_eq!(pred.guaranteed_quasiradial, (pred.multiplicity - pred.case2_max_n).max(0));
        }
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(-0.1, 3.0, 1).is_err());
        assert!(ProblemParams::new(0.0, 1.0, 1).is_err());
        assert!(ProblemParams::new(0.0, 3.0, 0).is_err());
        assert!(ProblemParams::new(0.0, f64::NAN, 1).is_err());
        assert!(ProblemParams::new(1.5, 3.0, 4).is_ok());
    }
}
