//! Negative directions of the quadratic form
//! `Q_u(ψ) = ∫|∇ψ|² − p|x|^α|u|^{p−1}ψ²` on the symmetric subspace, on the
//! full disc, and mode by mode for radial fields.
//!
//! The generalized problem `Lψ = λMψ` is used throughout (`M` the lumped
//! mass), so eigenvalues approximate those of `−Δ − p|x|^α|u|^{p−1}`.
//! Counts come from Sylvester's law of inertia applied to `L − σM`; the
//! dense eigensolver is an oracle for small grids.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{self, Discretization};
use crate::error::{HenonError, Result};
use crate::linalg::BandedSym;
use crate::mesh::{AngularSymbol, Field, RadialGrid, SectorMesh};
use crate::radial::RadialProfile;

/// Eigenvalue scale for the marginal band: `λ₁` of the unit disc.
pub const EIGEN_SCALE: f64 = 5.783_185_962_946_784;
pub const MARGINAL_BAND: f64 = 1e-9;
/// Largest system handed to the dense eigensolver.
pub const DENSE_LIMIT: usize = 2600;
pub const DEFAULT_EIGENVALUES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subspace {
    NInvariant,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Dense symmetric eigensolve, cross-checked by inertia.
    DenseOracle,
    /// Banded LDLᵀ inertia with bisection for the lowest eigenvalues.
    BandedInertia,
    /// Angular Fourier blocks of a radial field.
    ModeDecomposition,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub negative_count: usize,
    /// Eigenvalues inside `(−1e−9, 1e−9)·λ₁(B)`, never counted negative.
    pub marginal_count: usize,
    pub smallest_eigenvalues: Vec<f64>,
    pub subspace: Subspace,
    pub grid: String,
    pub method: Method,
    /// Count recomputed with the threshold moved by `1e−10·λ₁(B)`.
    pub shifted_recount: usize,
    /// Dense and inertia counts agree and the shifted recount is stable.
    pub consistent: bool,
    /// Per-mode counts `k = 0, 1, …` for the mode decomposition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_counts: Option<Vec<usize>>,
}

/// `−Δψ − p|x|^α|u|^{p−1}ψ` in strong form (divided by the cell mass).
pub fn linearized_apply(mesh: &SectorMesh, u: &Field, p: f64, psi: &Field) -> Result<Field> {
    mesh.check(u)?;
    mesh.check(psi)?;
    let l = discrete::linearization(mesh, u.values(), p);
    let lp = l.mul_vec(psi.values());
    let out = lp.iter().zip(mesh.mass()).map(|(a, m)| a / m).collect();
    Field::new(mesh.shape(), out)
}

/// `⟨φ, ψ⟩ = Σ M_i φ_i ψ_i` over the whole disc.
pub fn mesh_inner(mesh: &SectorMesh, a: &Field, b: &Field) -> f64 {
    mesh.copies() * a.values().iter().zip(b.values()).zip(mesh.mass()).map(|((x, y), m)| x * y * m).sum::<f64>()
}

fn count_below(l: &BandedSym, mass: &[f64], sigma: f64) -> usize {
    l.inertia(Some(mass), sigma).negative
}

/// Gershgorin interval of `M^{−½} L M^{−½}`.
fn gershgorin(l: &BandedSym, mass: &[f64]) -> (f64, f64) {
    let n = l.dim();
    let bw = l.bandwidth();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut rad = 0.0;
        for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
            if j != i {
                rad += l.get(i, j).abs() / (mass[i] * mass[j]).sqrt();
            }
        }
        let c = l.get(i, i) / mass[i];
        lo = lo.min(c - rad);
        hi = hi.max(c + rad);
    }
    (lo, hi)
}

/// Lowest `k` generalized eigenvalues by spectrum slicing. Bisection runs in
/// `asinh` coordinates so that the huge negative eigenvalues of concentrated
/// fields and the moderate ones near zero are resolved alike.
pub fn lowest_eigenvalues(l: &BandedSym, mass: &[f64], k: usize, rel_tol: f64) -> Vec<f64> {
    let k = k.min(l.dim());
    if k == 0 {
        return Vec::new();
    }
    let (glo, ghi) = gershgorin(l, mass);
    let to_t = |x: f64| x.asinh();
    let to_x = |t: f64| t.sinh();
    // brackets[j] = (a, b) with count(a) ≤ j < count(b) in t-coordinates
    let mut a = vec![to_t(glo) - 1e-3; k];
    let mut b = vec![to_t(ghi) + 1e-3; k];
    let mut out = vec![0.0; k];
    for j in 0..k {
        loop {
            let (aj, bj) = (a[j], b[j]);
            let (xa, xb) = (to_x(aj), to_x(bj));
            if (xb - xa).abs() <= rel_tol * xa.abs().max(xb.abs()).max(1.0) {
                out[j] = 0.5 * (xa + xb);
                break;
            }
            let mid = 0.5 * (aj + bj);
            let c = count_below(l, mass, to_x(mid));
            // c eigenvalues lie below mid: tighten every bracket at once
            for i in j..k {
                if c > i {
                    b[i] = b[i].min(mid);
                } else {
                    a[i] = a[i].max(mid);
                }
            }
        }
    }
    out
}

fn dense_eigenvalues(l: &BandedSym, mass: &[f64]) -> Vec<f64> {
    let n = l.dim();
    let s: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) > l.bandwidth() {
            0.0
        } else {
            l.get(i, j) * s[i] * s[j]
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    ev
}

fn report_for(l: &BandedSym, mass: &[f64], subspace: Subspace, grid: String, eigenvalues: usize) -> SpectralReport {
    let band = MARGINAL_BAND * EIGEN_SCALE;
    let neg = count_below(l, mass, -band);
    let below_band = count_below(l, mass, band);
    let recount = count_below(l, mass, -band - 1e-10 * EIGEN_SCALE);
    let mut consistent = recount == neg;
    let (method, smallest) = if l.dim() <= DENSE_LIMIT {
        let ev = dense_eigenvalues(l, mass);
        let dense_neg = ev.iter().filter(|&&x| x < -band).count();
        consistent &= dense_neg == neg;
        (Method::DenseOracle, ev.into_iter().take(eigenvalues).collect())
    } else {
        (Method::BandedInertia, lowest_eigenvalues(l, mass, eigenvalues, 1e-9))
    };
    SpectralReport {
        negative_count: neg,
        marginal_count: below_band - neg,
        smallest_eigenvalues: smallest,
        subspace,
        grid,
        method,
        shifted_recount: recount,
        consistent,
        mode_counts: None,
    }
}

fn grid_tag(mesh: &SectorMesh) -> String {
    format!("{}x{}/n={}", mesh.n_r(), mesh.n_theta(), mesh.n())
}

/// Morse index on the symmetric subspace (the sector with periodic wrap).
pub fn morse_index_symmetric(mesh: &SectorMesh, u: &Field, p: f64) -> Result<SpectralReport> {
    morse_index_symmetric_with(mesh, u, p, DEFAULT_EIGENVALUES)
}

pub fn morse_index_symmetric_with(mesh: &SectorMesh, u: &Field, p: f64, eigenvalues: usize) -> Result<SpectralReport> {
    mesh.check(u)?;
    let l = discrete::linearization(mesh, u.values(), p);
    Ok(report_for(&l, mesh.mass(), Subspace::NInvariant, grid_tag(mesh), eigenvalues))
}

/// Maximum angular variation of a field relative to `max|u|`.
pub fn angular_variation(mesh: &SectorMesh, u: &Field) -> f64 {
    let mut var = 0.0_f64;
    for i in 1..mesh.n_r() {
        let ring: Vec<f64> = (0..mesh.n_theta()).map(|j| u.at(i, j)).collect();
        let lo = ring.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ring.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        var = var.max(hi - lo);
    }
    let m = discrete::max_abs(u.values());
    if m == 0.0 {
        0.0
    } else {
        var / m
    }
}

/// Morse index over the full space. Radial fields use the angular-mode
/// blocks of the grid operator; other fields are unfolded to the full disc.
pub fn morse_index_full(mesh: &SectorMesh, u: &Field, p: f64) -> Result<SpectralReport> {
    mesh.check(u)?;
    if angular_variation(mesh, u) <= 1e-12 {
        let ring: Vec<f64> = std::iter::once(u.pole()).chain((1..mesh.n_r()).map(|i| u.at(i, 0))).collect();
        let full_nodes = mesh.n() * mesh.n_theta();
        let modes = mode_counts(
            mesh.radial_nodes(),
            mesh.alpha(),
            &ring,
            p,
            full_nodes / 2,
            AngularSymbol::Grid { nodes: full_nodes },
        )?;
        let grid = format!("{}x{}/n=1", mesh.n_r(), full_nodes);
        // eigenvalues of the radial block give the bottom of the spectrum
        let g0 = RadialGrid::new(mesh.radial_nodes(), mesh.alpha())?;
        let l0 = discrete::linearization(&g0, &ring, p);
        let band = MARGINAL_BAND * EIGEN_SCALE;
        let mut smallest = lowest_eigenvalues(&l0, g0.mass(), DEFAULT_EIGENVALUES, 1e-9);
        for k in 1..modes.counts.len().min(4) {
            let gk = RadialGrid::with_mode(mesh.radial_nodes(), mesh.alpha(), k, AngularSymbol::Grid { nodes: full_nodes })?;
            let lk = discrete::linearization(&gk, &ring[1..], p);
            let mult = if 2 * k == full_nodes { 1 } else { 2 };
            for ev in lowest_eigenvalues(&lk, gk.mass(), DEFAULT_EIGENVALUES, 1e-9) {
                for _ in 0..mult {
                    smallest.push(ev);
                }
            }
        }
        smallest.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        smallest.truncate(DEFAULT_EIGENVALUES);
        let recount = modes.total_with_threshold(-band - 1e-10 * EIGEN_SCALE);
        return Ok(SpectralReport {
            negative_count: modes.total,
            marginal_count: modes.marginal,
            smallest_eigenvalues: smallest,
            subspace: Subspace::Full,
            grid,
            method: Method::ModeDecomposition,
            shifted_recount: recount,
            consistent: recount == modes.total,
            mode_counts: Some(modes.counts),
        });
    }
    let (full, f) = mesh.unfold_full_disc(u)?;
    let l = discrete::linearization(&full, f.values(), p);
    Ok(report_for(&l, full.mass(), Subspace::Full, grid_tag(&full), DEFAULT_EIGENVALUES))
}

/// Per-mode negative counts of a radial field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeCounts {
    /// `counts[k]` for `k = 0..=k_max`.
    pub counts: Vec<usize>,
    /// `count(0) + 2 Σ_{k≥1} count(k)` (a self-conjugate grid mode counted once).
    pub total: usize,
    pub marginal: usize,
    #[serde(skip)]
    blocks: Vec<(BandedSym, Vec<f64>, usize)>,
}

impl ModeCounts {
    /// `m_rad`, the count of the radial block.
    pub fn radial(&self) -> usize {
        self.counts[0]
    }

    fn total_with_threshold(&self, sigma: f64) -> usize {
        self.blocks.iter().map(|(l, m, mult)| mult * count_below(l, m, sigma)).sum()
    }
}

/// Negative counts of the angular blocks `k = 0..=k_max` of the
/// linearization at a radial field given by its ring values (pole first).
///
/// With `AngularSymbol::Grid { nodes }` the blocks are exactly the Fourier
/// blocks of the polar grid operator with `nodes` points per ring, and the
/// total equals the count of the assembled full-disc operator; `k_max` must
/// then be `nodes / 2`. With the continuous symbol, a positive count at
/// `k_max` is an error.
pub fn mode_counts(
    nodes: &[f64],
    alpha: f64,
    ring_values: &[f64],
    p: f64,
    k_max: usize,
    symbol: AngularSymbol,
) -> Result<ModeCounts> {
    if ring_values.len() != nodes.len() {
        return Err(HenonError::MeshMismatch(format!(
            "expected {} ring values, got {}",
            nodes.len(),
            ring_values.len()
        )));
    }
    let band = MARGINAL_BAND * EIGEN_SCALE;
    let grid_nodes = match symbol {
        AngularSymbol::Grid { nodes } => Some(nodes),
        AngularSymbol::Continuous => None,
    };
    if let Some(g) = grid_nodes {
        if k_max != g / 2 {
            return Err(HenonError::Config(format!("grid symbol with {g} nodes needs k_max = {}", g / 2)));
        }
    }
    let blocks: Vec<Result<(BandedSym, Vec<f64>, usize)>> = (0..=k_max)
        .into_par_iter()
        .map(|k| {
            let g = RadialGrid::with_mode(nodes, alpha, k, symbol)?;
            let vals = if k == 0 { ring_values } else { &ring_values[1..] };
            let l = discrete::linearization(&g, vals, p);
            let mult = match grid_nodes {
                _ if k == 0 => 1,
                Some(gn) if 2 * k == gn => 1,
                _ => 2,
            };
            Ok((l, g.mass().to_vec(), mult))
        })
        .collect();
    let blocks: Vec<(BandedSym, Vec<f64>, usize)> = blocks.into_iter().collect::<Result<_>>()?;
    let counts: Vec<usize> = blocks.iter().map(|(l, m, _)| count_below(l, m, -band)).collect();
    let upper: usize = blocks.iter().map(|(l, m, mult)| mult * count_below(l, m, band)).sum();
    let total: usize = blocks.iter().zip(&counts).map(|((_, _, mult), c)| mult * c).sum();
    if grid_nodes.is_none() && counts[k_max] > 0 {
        return Err(HenonError::Config(format!(
            "mode k_max = {k_max} still has negative directions; increase k_max"
        )));
    }
    Ok(ModeCounts {
        counts,
        total,
        marginal: upper - total,
        blocks,
    })
}

/// Mode decomposition of a radial profile sampled on `nodes`
/// (`r_1 < … < r_{N_r} = 1`) with the continuous angular symbol `k²`.
pub fn radial_mode_decomposition(profile: &RadialProfile, nodes: &[f64], k_max: usize) -> Result<ModeCounts> {
    if k_max < 8 {
        return Err(HenonError::Config(format!("k_max must be >= 8, got {k_max}")));
    }
    let ring = profile.ring_values(&nodes[..nodes.len() - 1]);
    mode_counts(nodes, profile.alpha, &ring, profile.p, k_max, AngularSymbol::Continuous)
}

/// Lower bound `4 + 2⌊α/2⌋` for the full index of the radial solution.
pub fn radial_index_lower_bound(alpha: f64) -> usize {
    4 + 2 * (alpha / 2.0 + 1e-12).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{broadcast_radial, Grading};
    use crate::nehari::{nehari_scale, radial_baseline};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(mesh: &SectorMesh, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..mesh.dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::new(mesh.shape(), v).unwrap()
    }

    #[test]
    fn zero_field_is_laplacian() {
        let m = SectorMesh::new(1, 48, 32, Grading::Uniform, 0.0).unwrap();
        let z = Field::zeros(m.shape());
        let r = morse_index_symmetric(&m, &z, 3.0).unwrap();
        assert_eq!(r.negative_count, 0);
        assert_eq!(r.method, Method::DenseOracle);
        assert!(r.consistent);
        assert!(((r.smallest_eigenvalues[0] - EIGEN_SCALE) / EIGEN_SCALE).abs() < 5e-3);
        assert!(r.smallest_eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn linearized_operator_is_symmetric() {
        let m = SectorMesh::new(3, 24, 12, Grading::OriginRefined { core_scale: 0.02 }, 2.0).unwrap();
        let u = random_field(&m, 1);
        let a = random_field(&m, 2);
        let b = random_field(&m, 3);
        let la = linearized_apply(&m, &u, 5.0, &a).unwrap();
        let lb = linearized_apply(&m, &u, 5.0, &b).unwrap();
        let x = mesh_inner(&m, &la, &b);
        let y = mesh_inner(&m, &a, &lb);
        assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()));
    }

    #[test]
    fn slicing_matches_dense() {
        let m = SectorMesh::new(2, 24, 16, Grading::OriginRefined { core_scale: 0.02 }, 0.0).unwrap();
        let u = m.sample(|r, t| 3.0 * (1.0 - r) * (1.0 + 0.5 * (2.0 * t).cos()));
        let l = discrete::linearization(&m, u.values(), 5.0);
        let dense = dense_eigenvalues(&l, m.mass());
        let sliced = lowest_eigenvalues(&l, m.mass(), 8, 1e-11);
        for (a, b) in dense.iter().zip(&sliced) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn positive_ground_state_has_index_one() {
        let m = SectorMesh::new(1, 32, 32, Grading::Uniform, 0.0).unwrap();
        let p = 4.0;
        let mut u = m.sample(|r, _| 1.0 - r * r).into_values();
        // normalized fixed-point iteration converges to the positive ground state
        for _ in 0..300 {
            let f = discrete::source(&m, &u, p);
            let v = m.stiffness_factor().solve(&f);
            u = nehari_scale(&m, &v, p).unwrap();
        }
        assert!(discrete::normalized_residual(&m, &u, p) < 1e-9);
        let f = Field::new(m.shape(), u).unwrap();
        let r = morse_index_symmetric(&m, &f, p).unwrap();
        assert_eq!(r.negative_count, 1);
        assert!(r.consistent);
    }

    #[test]
    fn mode_sum_matches_full_grid_count() {
        for alpha in [0.0, 2.0] {
            let m = SectorMesh::new(1, 48, 48, Grading::OriginRefined { core_scale: 2e-3 }, alpha).unwrap();
            let base = radial_baseline(&m, 10.0).unwrap();
            let f = base.field(&m).unwrap();
            let modes = mode_counts(
                m.radial_nodes(),
                alpha,
                &base.ring_values,
                10.0,
                24,
                AngularSymbol::Grid { nodes: 48 },
            )
            .unwrap();
            let l = discrete::linearization(&m, f.values(), 10.0);
            let direct = count_below(&l, m.mass(), -MARGINAL_BAND * EIGEN_SCALE);
            assert_eq!(modes.total, direct);
            assert_eq!(modes.radial(), 2);
            assert!(modes.total >= radial_index_lower_bound(alpha));
            let full = morse_index_full(&m, &f, 10.0).unwrap();
            assert_eq!(full.negative_count, direct);
            assert_eq!(full.method, Method::ModeDecomposition);
        }
    }

    #[test]
    fn full_index_dominates_symmetric_index() {
        let m = SectorMesh::new(2, 32, 16, Grading::OriginRefined { core_scale: 5e-3 }, 0.0).unwrap();
        let base = radial_baseline(&m, 6.0).unwrap();
        let mut ring = base.ring_values.clone();
        for (i, v) in ring.iter_mut().enumerate() {
            *v *= 1.0 + 0.01 * i as f64 / 32.0;
        }
        let f = broadcast_radial(&m, &ring).unwrap();
        let g = m.sample(|r, t| 0.01 * r * (1.0 - r) * (2.0 * t).cos());
        let h = Field::new(m.shape(), f.values().iter().zip(g.values()).map(|(a, b)| a + b).collect()).unwrap();
        let sym = morse_index_symmetric(&m, &h, 6.0).unwrap();
        let full = morse_index_full(&m, &h, 6.0).unwrap();
        assert_eq!(full.subspace, Subspace::Full);
        assert!(full.negative_count >= sym.negative_count);
    }

    #[test]
    fn counts_invariant_under_rotation() {
        let m = SectorMesh::new(3, 24, 16, Grading::Uniform, 0.0).unwrap();
        let u = m.sample(|r, t| 4.0 * (1.0 - r) * (0.3 + (3.0 * t).cos()));
        let a = morse_index_symmetric(&m, &u, 3.0).unwrap();
        let b = morse_index_symmetric(&m, &u.angular_shift(5), 3.0).unwrap();
        assert_eq!(a.negative_count, b.negative_count);
    }

    #[test]
    fn continuous_modes_need_enough_k() {
        let prof = crate::radial::henon_radial(0.0, 10.0, 1e-8).unwrap();
        let nodes = Grading::OriginRefined { core_scale: 1e-3 }.radial_nodes(256).unwrap();
        assert!(radial_mode_decomposition(&prof, &nodes, 4).is_err());
        let modes = radial_mode_decomposition(&prof, &nodes, 12).unwrap();
        assert_eq!(modes.radial(), 2);
        assert!(modes.counts.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(*modes.counts.last().unwrap(), 0);
    }
}
