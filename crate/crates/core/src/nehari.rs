//! Energy minimization over the nodal Nehari manifold
//! `{u : u^± ≠ 0, E'(u)u^+ = 0, E'(u)u^− = 0}` of the symmetric subspace.
//!
//! The discrete constraint uses `D^± = ⟨∇u, ∇u^±⟩`, which is exactly the
//! Dirichlet energy of the positive (negative) part of the piecewise-linear
//! interpolant. The discrete energy does not split across the nodal set, so
//! the two parts are rescaled jointly by a 2×2 Newton solve in log-scale.
//! Descent is an H¹-preconditioned gradient flow with Armijo backtracking
//! and reprojection, finished by a Newton polish on the unconstrained
//! equation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::ProblemParams;
use crate::discrete::{self, Discretization};
use crate::error::{HenonError, Result};
use crate::linalg::{dot, BandedLu};
use crate::mesh::{broadcast_radial, Field, Grading, RadialGrid, SectorMesh};
use crate::radial::{henon_radial, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    RadialPerturbed,
    TwoBump,
    AnnularSplit,
}

impl InitKind {
    pub const ALL: [InitKind; 3] = [InitKind::RadialPerturbed, InitKind::TwoBump, InitKind::AnnularSplit];

    pub fn as_str(&self) -> &'static str {
        match self {
            InitKind::RadialPerturbed => "radial-perturbed",
            InitKind::TwoBump => "two-bump",
            InitKind::AnnularSplit => "annular-split",
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitKind {
    type Err = HenonError;

    fn from_str(s: &str) -> Result<Self> {
        InitKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| HenonError::Config(format!("unknown init kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub init_kind: InitKind,
    pub perturbation_amplitude: f64,
    /// Initial trial step of the line search.
    pub step_size: f64,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub nehari_tolerance: f64,
    pub random_seed: u64,
    pub restarts: usize,
    /// Rotate through the initial-guess kinds across restarts.
    pub cycle_init_kinds: bool,
    /// Residual below which the Newton polish is attempted.
    pub newton_threshold: f64,
    pub max_newton_iterations: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            init_kind: InitKind::RadialPerturbed,
            perturbation_amplitude: 0.1,
            step_size: 1.0,
            max_iterations: 20_000,
            residual_tolerance: 1e-8,
            nehari_tolerance: 1e-12,
            random_seed: 0,
            restarts: 1,
            cycle_init_kinds: false,
            newton_threshold: 1e-2,
            max_newton_iterations: 40,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_size", self.step_size),
            ("residual_tolerance", self.residual_tolerance),
            ("nehari_tolerance", self.nehari_tolerance),
            ("newton_threshold", self.newton_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HenonError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.perturbation_amplitude >= 0.0 && self.perturbation_amplitude.is_finite()) {
            return Err(HenonError::Config("perturbation_amplitude must be >= 0".into()));
        }
        if self.max_iterations < 1 {
            return Err(HenonError::Config("max_iterations must be >= 1".into()));
        }
        if self.restarts < 1 {
            return Err(HenonError::Config("restarts must be >= 1".into()));
        }
        Ok(())
    }

    fn run_kind(&self, k: usize) -> InitKind {
        if self.cycle_init_kinds {
            let start = InitKind::ALL.iter().position(|x| *x == self.init_kind).unwrap_or(0);
            InitKind::ALL[(start + k) % InitKind::ALL.len()]
        } else {
            self.init_kind
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartRecord {
    pub seed: u64,
    pub init_kind: InitKind,
    pub scaled_energy: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub field: Field,
    pub params: ProblemParams,
    pub energy: f64,
    /// `p·E_p(u)`.
    pub scaled_energy: f64,
    /// Residual in the dual norm relative to `‖u‖_{H¹₀}`.
    pub residual: f64,
    pub strong_residual: f64,
    pub nehari_defect_plus: f64,
    pub nehari_defect_minus: f64,
    pub iterations_used: usize,
    pub newton_iterations: usize,
    pub init_kind: InitKind,
    pub seed: u64,
    pub converged: bool,
    /// Energy after every accepted step.
    pub energy_history: Vec<f64>,
    pub restarts: Vec<RestartRecord>,
    /// Converged restarts disagree by more than `1e−4` relative.
    pub multi_basin: bool,
}

/// `σ·u` with `σ = (∫|∇u|² / ∫|x|^α|u|^{p+1})^{1/(p−1)}`.
pub fn nehari_scale<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> Result<Vec<f64>> {
    let dir = discrete::dirichlet(d, u);
    if dir == 0.0 {
        return Err(HenonError::ZeroField);
    }
    let lw = discrete::log_power_integral(d, u, p + 1.0);
    if lw == f64::NEG_INFINITY {
        return Err(HenonError::Numerical("weighted integral vanishes on the grid".into()));
    }
    let sigma = ((dir.ln() - lw) / (p - 1.0)).exp();
    Ok(u.iter().map(|x| sigma * x).collect())
}

/// Relative defects `|D^± − W^±| / D^±` with `D^± = ∫∇u·∇u^±` and
/// `W^± = ∫|x|^α|u^±|^{p+1}`.
pub fn nehari_defects<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> (f64, f64) {
    let defect = |part: Vec<f64>| {
        let dp = discrete::part_dirichlet(d, u, &part);
        let wp = discrete::power_integral(d, &part, p + 1.0);
        if dp == 0.0 && wp == 0.0 {
            f64::INFINITY
        } else {
            (dp - wp).abs() / dp.abs()
        }
    };
    (defect(discrete::positive_part(u)), defect(discrete::negative_part(u)))
}

/// Places a sign-changing field on the nodal Nehari manifold by scaling
/// `u^+` by `e^x` and `u^−` by `e^y`. With `a = u⁺ᵀKu⁺`, `b = u⁻ᵀKu⁻`,
/// `c = u⁺ᵀKu⁻ ≥ 0` the conditions read
/// `ln(a e^x + c e^y) − p x = ln W⁺`, `ln(b e^y + c e^x) − p y = ln W⁻`.
pub fn nodal_nehari_project<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> Result<Vec<f64>> {
    if !discrete::changes_sign(u) {
        return Err(HenonError::NoSignChange);
    }
    let up = discrete::positive_part(u);
    let um = discrete::negative_part(u);
    let k = d.stiffness();
    let a = k.bilinear(&up, &up);
    let b = k.bilinear(&um, &um);
    let c = k.bilinear(&up, &um).max(0.0);
    let lc = d.copies().ln();
    let lwp = discrete::log_power_integral(d, &up, p + 1.0) - lc;
    let lwm = discrete::log_power_integral(d, &um, p + 1.0) - lc;
    if !(lwp.is_finite() && lwm.is_finite()) {
        return Err(HenonError::Numerical("weighted integral of a nodal part vanishes".into()));
    }
    let mut x = (a.ln() - lwp) / (p - 1.0);
    let mut y = (b.ln() - lwm) / (p - 1.0);
    let eval = |x: f64, y: f64| {
        // log-sum-exp forms of a e^x + c e^y and b e^y + c e^x
        let s1 = log_add(a.ln() + x, c.ln() + y);
        let s2 = log_add(b.ln() + y, c.ln() + x);
        (s1 - p * x - lwp, s2 - p * y - lwm, (a.ln() + x - s1).exp(), (b.ln() + y - s2).exp())
    };
    for _ in 0..100 {
        let (f1, f2, w1, w2) = eval(x, y);
        if f1.abs() < 1e-15 && f2.abs() < 1e-15 {
            break;
        }
        // ∂F1/∂x = w1 − p, ∂F1/∂y = 1 − w1, and symmetrically
        let j11 = w1 - p;
        let j12 = 1.0 - w1;
        let j21 = 1.0 - w2;
        let j22 = w2 - p;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return Err(HenonError::Numerical("singular nodal projection".into()));
        }
        let dx = (f1 * j22 - f2 * j12) / det;
        let dy = (j11 * f2 - j21 * f1) / det;
        x -= dx;
        y -= dy;
        if dx.abs() < 1e-16 && dy.abs() < 1e-16 {
            break;
        }
    }
    let (sx, sy) = (x.exp(), y.exp());
    if !(sx.is_finite() && sy.is_finite() && sx > 0.0 && sy > 0.0) {
        return Err(HenonError::Numerical("nodal projection scale out of range".into()));
    }
    Ok(u.iter().map(|&v| if v > 0.0 { sx * v } else { sy * v }).collect())
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Field wrapper for [`nehari_scale`].
pub fn nehari_scale_field(mesh: &SectorMesh, f: &Field, p: f64) -> Result<Field> {
    mesh.check(f)?;
    Field::new(mesh.shape(), nehari_scale(mesh, f.values(), p)?)
}

/// Field wrapper for [`nodal_nehari_project`].
pub fn nodal_nehari_project_field(mesh: &SectorMesh, f: &Field, p: f64) -> Result<Field> {
    mesh.check(f)?;
    Field::new(mesh.shape(), nodal_nehari_project(mesh, f.values(), p)?)
}

/// `Q_u(u^±) = ∫∇u·∇u^± − p∫|x|^α|u|^{p+1}χ_±`, which equals
/// `(1−p)∫∇u·∇u^±` on the constraint.
pub fn quadratic_form_on_parts<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> [(f64, f64); 2] {
    let parts = [discrete::positive_part(u), discrete::negative_part(u)];
    parts.map(|part| {
        let dp = discrete::part_dirichlet(d, u, &part);
        let wp = discrete::power_integral(d, &part, p + 1.0);
        (dp - p * wp, (1.0 - p) * dp)
    })
}

/// `⟨L u^±, u^±⟩` with `L = K − p|x|^α|u|^{p−1}`: the quadratic form
/// evaluated on the nodal vectors themselves.
pub fn quadratic_form_on_nodal_vectors<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> [f64; 2] {
    let parts = [discrete::positive_part(u), discrete::negative_part(u)];
    parts.map(|part| {
        let kk = d.stiffness().bilinear(&part, &part);
        d.copies() * kk - p * discrete::power_integral(d, &part, p + 1.0)
    })
}

/// Origin scale of the radial solution, `(p·u(0)^{p−1})^{−1/(2+α)}`.
pub fn concentration_scale(profile: &RadialProfile) -> f64 {
    let p = profile.p;
    let l = p.ln() + (p - 1.0) * profile.central_value.ln();
    (-l / (2.0 + profile.alpha)).exp()
}

/// Origin-refined grading matched to the radial solution for `(α, p)`.
pub fn auto_grading(alpha: f64, p: f64) -> Result<Grading> {
    let prof = henon_radial(alpha, p, 1e-8)?;
    let core = (0.5 * concentration_scale(&prof)).min(0.05);
    Ok(Grading::OriginRefined { core_scale: core })
}

/// Radial solution with two nodal zones, computed on the radial restriction
/// of a sector mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialBaseline {
    /// Pole first, then rings `1..N_r−1`.
    pub ring_values: Vec<f64>,
    pub energy: f64,
    pub scaled_energy: f64,
    pub residual: f64,
    pub dirichlet_energy: f64,
}

impl RadialBaseline {
    pub fn field(&self, mesh: &SectorMesh) -> Result<Field> {
        broadcast_radial(mesh, &self.ring_values)
    }
}

pub fn radial_baseline(mesh: &SectorMesh, p: f64) -> Result<RadialBaseline> {
    let grid = RadialGrid::from_mesh(mesh)?;
    let prof = henon_radial(mesh.alpha(), p, 1e-8)?;
    let start = grid.sample(|r| prof.value(r));
    let start = nodal_nehari_project(&grid, &start, p)?;
    let (u, _) = newton_polish(&grid, &start, p, 1e-12, 60)?;
    let u = nodal_nehari_project(&grid, &u, p)?;
    let energy = discrete::energy(&grid, &u, p);
    Ok(RadialBaseline {
        residual: discrete::normalized_residual(&grid, &u, p),
        dirichlet_energy: discrete::dirichlet(&grid, &u),
        ring_values: u,
        energy,
        scaled_energy: p * energy,
    })
}

/// Damped Newton iteration on `Ku = c|u|^{p−1}u`. Each step must reduce the
/// dual-norm residual. Returns the iterate and the number of steps taken.
pub fn newton_polish<D: Discretization + ?Sized>(
    d: &D,
    u0: &[f64],
    p: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut u = u0.to_vec();
    let mut res = discrete::normalized_residual(d, &u, p);
    for it in 0..max_iterations {
        if res <= tolerance {
            return Ok((u, it));
        }
        let l = discrete::linearization(d, &u, p);
        let r = discrete::residual_vector(d, &u, p);
        let lu = BandedLu::factor_symmetric(&l)?;
        let delta = lu.solve(&r);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-4 {
            let v: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a - t * b).collect();
            let rv = discrete::normalized_residual(d, &v, p);
            if rv.is_finite() && rv < res {
                u = v;
                res = rv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(HenonError::Solver(format!("Newton stalled at residual {res:e}")));
        }
    }
    if res <= tolerance {
        Ok((u, max_iterations))
    } else {
        Err(HenonError::Solver(format!(
            "Newton reached iteration cap at residual {res:e}"
        )))
    }
}

fn bump(r: f64, r0: f64, width: f64) -> f64 {
    let z = (r - r0) / width;
    (-z * z).exp() * (1.0 - r * r)
}

/// Deterministic initial guess. The seed fixes the rotational phase and a
/// small smooth perturbation.
pub fn initial_guess(
    kind: InitKind,
    mesh: &SectorMesh,
    params: &ProblemParams,
    amplitude: f64,
    seed: u64,
) -> Result<Field> {
    if params.n() != mesh.n() || params.alpha() != mesh.alpha() {
        return Err(HenonError::MeshMismatch("parameters do not match the mesh".into()));
    }
    let n = params.n() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.gen_range(0.0..2.0 * PI / n);
    let noise: Vec<(f64, f64)> = (1..=3).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))).collect();
    let smooth_noise = move |r: f64, t: f64| -> f64 {
        noise
            .iter()
            .enumerate()
            .map(|(m, (a, ph))| a * r * (1.0 - r) * ((m + 1) as f64 * n * t + ph).cos())
            .sum::<f64>()
    };
    let field = match kind {
        InitKind::RadialPerturbed => {
            let prof = henon_radial(params.alpha(), params.p(), 1e-8)?;
            let scale = prof.central_value;
            mesh.sample(|r, t| {
                let u = if r == 0.0 { prof.central_value } else { prof.value(r) };
                u * (1.0 + amplitude * (n * (t - phase)).cos()) + 0.1 * amplitude * scale * smooth_noise(r, t)
            })
        }
        InitKind::TwoBump => {
            let r0 = 0.5;
            mesh.sample(|r, t| {
                let ang = (n * (t - phase)).cos();
                r.powf(n.min(4.0)) * bump(r, r0, 0.25) * ang + 0.1 * amplitude * smooth_noise(r, t)
            })
        }
        InitKind::AnnularSplit => {
            let prof = henon_radial(params.alpha(), params.p(), 1e-8)?;
            mesh.sample(|r, t| {
                let u = if r == 0.0 { prof.central_value } else { prof.value(r) };
                let m = if u < 0.0 { 1.0 + 0.5 * (n * t + phase).cos() } else { 1.0 };
                u * m + 0.1 * amplitude * smooth_noise(r, t)
            })
        }
    };
    if !discrete::changes_sign(field.values()) {
        return Err(HenonError::NoSignChange);
    }
    Ok(field)
}

struct Run {
    u: Vec<f64>,
    energy: f64,
    residual: f64,
    iterations: usize,
    newton_iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Newton polish from a point on the constraint. The result is kept only if
/// it still changes sign, does not raise the energy and is a local minimum
/// on the constraint (exactly two negative directions of the linearization).
fn polish(config: &SolveConfig, mesh: &SectorMesh, p: f64, u: &[f64], e: f64) -> Option<(Vec<f64>, f64, f64, usize)> {
    let (v, k) = newton_polish(mesh, u, p, 0.1 * config.residual_tolerance, config.max_newton_iterations).ok()?;
    let v = nodal_nehari_project(mesh, &v, p).ok()?;
    let ev = discrete::energy(mesh, &v, p);
    if ev > e + 1e-9 * e.abs() {
        return None;
    }
    if discrete::linearization(mesh, &v, p).inertia(None, 0.0).negative > 2 {
        return None;
    }
    let rv = discrete::normalized_residual(mesh, &v, p);
    Some((v, ev, rv, k))
}

fn descend(config: &SolveConfig, mesh: &SectorMesh, p: f64, start: &[f64]) -> Result<Run> {
    let copies = mesh.copies();
    let mut u = nodal_nehari_project(mesh, start, p)?;
    let mut e = discrete::energy(mesh, &u, p);
    let mut history = vec![e];
    let mut t = config.step_size;
    let mut newton_gate = config.newton_threshold;
    let mut newton_iterations = 0;
    let mut res = f64::INFINITY;
    let factor = mesh.stiffness_factor();
    let mut it = 0;
    while it < config.max_iterations {
        let r = discrete::residual_vector(mesh, &u, p);
        let g = factor.solve(&r);
        let rg = dot(&r, &g).max(0.0);
        let uku = mesh.stiffness().bilinear(&u, &u);
        res = (rg / uku).sqrt();
        if res <= config.residual_tolerance {
            break;
        }
        if res <= newton_gate {
            if let Some((v, ev, rv, k)) = polish(config, mesh, p, &u, e) {
                newton_iterations += k;
                if rv <= config.residual_tolerance {
                    u = v;
                    e = ev;
                    res = rv;
                    history.push(e);
                    break;
                }
            }
            newton_gate *= 0.1;
        }
        let slope = copies * rg;
        let mut accepted = false;
        while t > 1e-14 {
            let trial: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            if let Ok(v) = nodal_nehari_project(mesh, &trial, p) {
                let ev = discrete::energy(mesh, &v, p);
                if ev <= e - 1e-4 * t * slope {
                    u = v;
                    e = ev;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        it += 1;
        if !accepted {
            break;
        }
        history.push(e);
        t = (2.0 * t).min(config.step_size.max(1.0));
    }
    if res > config.residual_tolerance {
        // last chance: polish whatever the descent reached
        if let Some((v, ev, rv, k)) = polish(config, mesh, p, &u, e) {
            newton_iterations += k;
            if rv < res {
                u = v;
                e = ev;
                res = rv;
                history.push(e);
            }
        }
    }
    Ok(Run {
        converged: res <= config.residual_tolerance,
        u,
        energy: e,
        residual: res,
        iterations: it,
        newton_iterations,
        history,
    })
}

/// Best of `config.restarts` descents from distinct seeds (and init kinds
/// when cycling). Restarts run in order, so the result does not depend on
/// the thread count of an enclosing sweep.
pub fn minimize(config: &SolveConfig, params: &ProblemParams, mesh: &SectorMesh) -> Result<Solution> {
    config.validate()?;
    if params.n() != mesh.n() || params.alpha() != mesh.alpha() {
        return Err(HenonError::MeshMismatch("parameters do not match the mesh".into()));
    }
    let p = params.p();
    let runs: Vec<(u64, InitKind, Result<Run>)> = (0..config.restarts)
        .into_iter()
        .map(|k| {
            let kind = config.run_kind(k);
            let mut seed = config.random_seed.wrapping_add(k as u64);
            let mut last = Err(HenonError::Solver("no attempt".into()));
            for attempt in 0..4 {
                let run = initial_guess(kind, mesh, params, config.perturbation_amplitude, seed)
                    .and_then(|f| descend(config, mesh, p, f.values()));
                match run {
                    Ok(r) => return (seed, kind, Ok(r)),
                    Err(HenonError::NoSignChange) if attempt < 3 => {
                        seed = seed.wrapping_add(1000);
                        last = Err(HenonError::NoSignChange);
                    }
                    Err(e) => return (seed, kind, Err(e)),
                }
            }
            (seed, kind, last)
        })
        .collect();
    let mut records = Vec::new();
    let mut best: Option<(u64, InitKind, Run)> = None;
    let mut first_err = None;
    for (seed, kind, run) in runs {
        match run {
            Ok(r) => {
                records.push(RestartRecord {
                    seed,
                    init_kind: kind,
                    scaled_energy: p * r.energy,
                    residual: r.residual,
                    converged: r.converged,
                    iterations: r.iterations,
                });
                let better = match &best {
                    None => true,
                    Some((_, _, b)) => (r.converged && !b.converged) || (r.converged == b.converged && r.energy < b.energy),
                };
                if better {
                    best = Some((seed, kind, r));
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    let (seed, kind, run) = match best {
        Some(b) => b,
        None => return Err(first_err.unwrap_or_else(|| HenonError::Solver("no restart succeeded".into()))),
    };
    let conv: Vec<f64> = records.iter().filter(|r| r.converged).map(|r| r.scaled_energy).collect();
    let multi_basin = conv.len() > 1 && {
        let lo = conv.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = conv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) > 1e-4 * lo.abs()
    };
    let (dp, dm) = nehari_defects(mesh, &run.u, p);
    let strong = discrete::strong_residual(mesh, &run.u, p);
    Ok(Solution {
        field: Field::new(mesh.shape(), run.u)?,
        params: *params,
        energy: run.energy,
        scaled_energy: p * run.energy,
        residual: run.residual,
        strong_residual: strong,
        nehari_defect_plus: dp,
        nehari_defect_minus: dm,
        iterations_used: run.iterations,
        newton_iterations: run.newton_iterations,
        init_kind: kind,
        seed,
        converged: run.converged,
        energy_history: run.history,
        restarts: records,
        multi_basin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grading;

    fn mesh(n: usize) -> SectorMesh {
        SectorMesh::new(n, 32, 16, Grading::Uniform, 0.0).unwrap()
    }

    #[test]
    fn scale_fixed_point_and_covariance() {
        let m = mesh(2);
        let f = m.sample(|r, t| (1.0 - r * r) * (1.0 + 0.3 * (2.0 * t).cos()));
        let u = nehari_scale(&m, f.values(), 5.0).unwrap();
        let again = nehari_scale(&m, &u, 5.0).unwrap();
        for (a, b) in u.iter().zip(&again) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300) + 1e-300);
        }
        let cu: Vec<f64> = f.values().iter().map(|x| 7.5 * x).collect();
        let u2 = nehari_scale(&m, &cu, 5.0).unwrap();
        for (a, b) in u.iter().zip(&u2) {
            assert!((a - b).abs() <= 1e-13 * a.abs());
        }
        let d = discrete::dirichlet(&m, &u);
        let w = discrete::power_integral(&m, &u, 6.0);
        assert!(((d - w) / d).abs() <= 1e-12);
    }

    #[test]
    fn scale_rejects_zero() {
        let m = mesh(1);
        assert!(matches!(nehari_scale(&m, &vec![0.0; m.dofs()], 3.0), Err(HenonError::ZeroField)));
    }

    #[test]
    fn projection_on_cosine_mode() {
        let m = mesh(3);
        let f = m.sample(|r, t| r * (1.0 - r) * (3.0 * t).cos());
        let u = nodal_nehari_project(&m, f.values(), 7.0).unwrap();
        let (dp, dm) = nehari_defects(&m, &u, 7.0);
        assert!(dp <= 1e-12 && dm <= 1e-12, "{dp} {dm}");
        for (a, b) in u.iter().zip(f.values()) {
            assert_eq!(a.signum() * (a != &0.0) as i32 as f64, b.signum() * (b != &0.0) as i32 as f64);
        }
        let v = nodal_nehari_project(&m, &u, 7.0).unwrap();
        let nrm = u.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).abs() <= 1e-13 * nrm);
        }
    }

    #[test]
    fn projection_rejects_sign_definite() {
        let m = mesh(1);
        let f = m.sample(|r, _| 1.0 - r);
        assert!(matches!(nodal_nehari_project(&m, f.values(), 3.0), Err(HenonError::NoSignChange)));
    }

    #[test]
    fn energy_identity_on_constraint() {
        let m = mesh(2);
        let f = m.sample(|r, t| r * (1.0 - r) * (2.0 * t).sin() + 0.05 * (1.0 - r));
        let p = 4.0;
        let u = nodal_nehari_project(&m, f.values(), p).unwrap();
        let e = discrete::energy(&m, &u, p);
        let d = discrete::dirichlet(&m, &u);
        assert!((e - (p - 1.0) / (2.0 * (p + 1.0)) * d).abs() <= 1e-12 * e);
    }

    #[test]
    fn init_kinds_parse_and_determinism() {
        for k in InitKind::ALL {
            assert_eq!(k.as_str().parse::<InitKind>().unwrap(), k);
        }
        assert!("three-bump".parse::<InitKind>().is_err());
        let m = SectorMesh::new(2, 24, 12, Grading::Uniform, 0.0).unwrap();
        let params = ProblemParams::new(0.0, 5.0, 2).unwrap();
        for k in InitKind::ALL {
            let a = initial_guess(k, &m, &params, 0.1, 7).unwrap();
            let b = initial_guess(k, &m, &params, 0.1, 7).unwrap();
            assert_eq!(a, b);
            assert!(discrete::changes_sign(a.values()));
        }
    }

    #[test]
    fn unperturbed_guess_is_radial_profile() {
        let m = SectorMesh::new(2, 24, 12, Grading::Uniform, 0.0).unwrap();
        let params = ProblemParams::new(0.0, 5.0, 2).unwrap();
        let prof = henon_radial(0.0, 5.0, 1e-8).unwrap();
        let f = initial_guess(InitKind::RadialPerturbed, &m, &params, 0.0, 3).unwrap();
        let g = m.sample(|r, _| prof.value(r));
        assert!((f.pole() - prof.central_value).abs() < 1e-15);
        assert_eq!(&f.values()[1..], &g.values()[1..]);
    }

    #[test]
    fn two_bump_has_both_signs_in_sector() {
        let m = SectorMesh::new(3, 24, 12, Grading::Uniform, 0.0).unwrap();
        let params = ProblemParams::new(0.0, 5.0, 3).unwrap();
        let f = initial_guess(InitKind::TwoBump, &m, &params, 0.0, 0).unwrap();
        let ring = m.n_r() / 2;
        let vals: Vec<f64> = (0..m.n_theta()).map(|j| f.at(ring, j)).collect();
        assert!(vals.iter().any(|v| *v > 0.0) && vals.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn radial_baseline_is_a_solution() {
        let m = SectorMesh::new(2, 64, 16, Grading::OriginRefined { core_scale: 0.01 }, 0.0).unwrap();
        let b = radial_baseline(&m, 5.0).unwrap();
        assert!(b.residual < 1e-11);
        let f = b.field(&m).unwrap();
        assert!(m.pde_residual(&f, 5.0).unwrap() < 1e-10);
        let prof = henon_radial(0.0, 5.0, 1e-8).unwrap();
        assert!(((b.scaled_energy - prof.scaled_energy()) / prof.scaled_energy()).abs() < 0.05);
    }

    #[test]
    fn minimize_small_problem() {
        let m = SectorMesh::new(2, 48, 24, Grading::OriginRefined { core_scale: 0.01 }, 0.0).unwrap();
        let params = ProblemParams::new(0.0, 4.0, 2).unwrap();
        let cfg = SolveConfig {
            restarts: 2,
            ..SolveConfig::default()
        };
        let s = minimize(&cfg, &params, &m).unwrap();
        assert!(s.converged, "residual {}", s.residual);
        assert!(s.residual <= 1e-8);
        assert!(s.nehari_defect_plus <= 1e-12 && s.nehari_defect_minus <= 1e-12);
        for w in s.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        let base = radial_baseline(&m, 4.0).unwrap();
        assert!(s.scaled_energy <= base.scaled_energy + 1e-6);
    }
}
