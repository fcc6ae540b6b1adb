//! Operations shared by every discretization of the disc: the quadratic
//! Dirichlet form, the weighted power integrals, energy and residual.
//!
//! A discretization is a stiffness matrix `K` that is a graph Laplacian
//! with positive edge weights (plus Dirichlet terms), a lumped mass, and the
//! cell moments `c_i = ∫_cell |x|^α`. The discrete energy is
//!
//! ```text
//! E(u) = copies · ( ½ uᵀKu − Σ c_i |u_i|^{p+1} / (p+1) )
//! ```
//!
//! where `copies` is the number of sectors that tile the disc.

use crate::linalg::{dot, BandedCholesky, BandedSym};

pub trait Discretization: Sync {
    fn dofs(&self) -> usize;
    fn stiffness(&self) -> &BandedSym;
    /// Lumped mass (cell areas).
    fn mass(&self) -> &[f64];
    /// Cell moments of the weight `|x|^α`.
    fn weights(&self) -> &[f64];
    /// Number of copies of the discretized region that tile the disc.
    fn copies(&self) -> f64;
    fn stiffness_factor(&self) -> &BandedCholesky;
}

/// `∫_B |∇u|²`.
pub fn dirichlet<D: Discretization + ?Sized>(d: &D, u: &[f64]) -> f64 {
    d.copies() * d.stiffness().bilinear(u, u)
}

/// `∫_B ∇u·∇v`.
pub fn pairing<D: Discretization + ?Sized>(d: &D, u: &[f64], v: &[f64]) -> f64 {
    d.copies() * d.stiffness().bilinear(u, v)
}

/// `ln ∫_B |x|^α |u|^q`, accumulated relative to `max|u|` so that large
/// exponents do not overflow. Returns `-inf` when the integral vanishes.
pub fn log_power_integral<D: Discretization + ?Sized>(d: &D, u: &[f64], q: f64) -> f64 {
    let w = d.weights();
    let m = u.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut s = 0.0;
    for (ui, wi) in u.iter().zip(w) {
        let a = ui.abs() / m;
        if a > 0.0 && *wi > 0.0 {
            s += wi * (q * a.ln()).exp();
        }
    }
    if s == 0.0 {
        return f64::NEG_INFINITY;
    }
    d.copies().ln() + q * m.ln() + s.ln()
}

/// `∫_B |x|^α |u|^q`.
pub fn power_integral<D: Discretization + ?Sized>(d: &D, u: &[f64], q: f64) -> f64 {
    log_power_integral(d, u, q).exp()
}

/// `E_p(u)`.
pub fn energy<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> f64 {
    0.5 * dirichlet(d, u) - power_integral(d, u, p + 1.0) / (p + 1.0)
}

/// Nodal source `c_i |u_i|^{p-1} u_i` (per degree of freedom, one copy).
pub fn source<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> Vec<f64> {
    u.iter()
        .zip(d.weights())
        .map(|(&x, &w)| if x == 0.0 { 0.0 } else { w * x.signum() * (p * x.abs().ln()).exp() })
        .collect()
}

/// Weak residual `K u − c|u|^{p−1}u` (one copy).
pub fn residual_vector<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> Vec<f64> {
    let ku = d.stiffness().mul_vec(u);
    let f = source(d, u, p);
    ku.iter().zip(&f).map(|(a, b)| a - b).collect()
}

/// Residual in the dual norm, relative to `‖u‖_{H¹₀}`:
/// `sqrt(rᵀK⁻¹r / uᵀKu)`. This is the H¹ length of the preconditioned
/// gradient relative to the H¹ length of `u`. Zero for the zero field.
pub fn normalized_residual<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> f64 {
    let r = residual_vector(d, u, p);
    let g = d.stiffness_factor().solve(&r);
    let den = d.stiffness().bilinear(u, u);
    if den == 0.0 {
        return 0.0;
    }
    (dot(&r, &g).max(0.0) / den).sqrt()
}

/// Strong-form residual: the L² norm of `−Δ_h u − |x|^α|u|^{p−1}u`
/// relative to `‖u‖_{H¹₀}`.
pub fn strong_residual<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> f64 {
    let r = residual_vector(d, u, p);
    let den = d.stiffness().bilinear(u, u);
    if den == 0.0 {
        return 0.0;
    }
    let num: f64 = r.iter().zip(d.mass()).map(|(ri, mi)| ri * ri / mi).sum();
    (num / den).sqrt()
}

pub fn positive_part(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&x| x.max(0.0)).collect()
}

pub fn negative_part(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&x| x.min(0.0)).collect()
}

/// Discrete `∫|∇u^±|²`, taken as `∫∇u·∇u^±`.
///
/// On every edge this is the exact Dirichlet energy of the positive (or
/// negative) part of the piecewise-linear interpolant along the edge, so
/// the two parts add up to `∫|∇u|²` exactly.
pub fn part_dirichlet<D: Discretization + ?Sized>(d: &D, u: &[f64], part: &[f64]) -> f64 {
    pairing(d, u, part)
}

/// `E'_p(u)v = ∫∇u·∇v − ∫|x|^α|u|^{p−1}uv`.
pub fn derivative_along<D: Discretization + ?Sized>(d: &D, u: &[f64], v: &[f64], p: f64) -> f64 {
    let f = source(d, u, p);
    pairing(d, u, v) - d.copies() * dot(&f, v)
}

pub fn max_abs(u: &[f64]) -> f64 {
    u.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub fn changes_sign(u: &[f64]) -> bool {
    u.iter().any(|&x| x > 0.0) && u.iter().any(|&x| x < 0.0)
}

/// Linearization `K − p·diag(c_i|u_i|^{p−1})` (one copy).
pub fn linearization<D: Discretization + ?Sized>(d: &D, u: &[f64], p: f64) -> BandedSym {
    let jac: Vec<f64> = u
        .iter()
        .zip(d.weights())
        .map(|(&x, &w)| if x == 0.0 { 0.0 } else { -p * w * ((p - 1.0) * x.abs().ln()).exp() })
        .collect();
    d.stiffness().with_diagonal_added(&jac)
}
