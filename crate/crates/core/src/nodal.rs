//! Nodal regions, nodal set and the case taxonomy of symmetric nodal
//! solutions.
//!
//! A sector field is unfolded onto the full-disc polar graph (4-neighbour
//! adjacency with angular wrap, the pole adjacent to every node of the first
//! ring). Nodes with `|u| < ε·max|u|` form the zero band. Regions are the
//! connected components of the remaining nodes of one sign. The discrete
//! nodal set is the zero band together with every node adjacent to a node
//! of opposite sign.

use std::collections::VecDeque;
use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::constants::{predict_cases, CasePrediction, ProblemParams};
use crate::discrete::{self, Discretization};
use crate::error::{HenonError, Result};
use crate::mesh::{Field, SectorMesh};
use crate::spectrum::angular_variation;

pub const DEFAULT_BAND: f64 = 1e-3;
/// Relative angular variation below which a field counts as radial.
pub const RADIAL_TOLERANCE: f64 = 1e-6;
/// A zero-band component touches `∂B` if it reaches this many rings from `r = 1`.
pub const BOUNDARY_RINGS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    Radial,
    Case1,
    Case2,
    Case3,
    Other,
}

impl Case {
    pub fn as_str(&self) -> &'static str {
        match self {
            Case::Radial => "radial",
            Case::Case1 => "case1",
            Case::Case2 => "case2",
            Case::Case3 => "case3",
            Case::Other => "other",
        }
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether an observed case is allowed by the threshold table. A radial
/// minimizer is only allowed when `n` exceeds the count of guaranteed
/// nonradial solutions; `other` is never allowed.
pub fn admissible(case: Case, n: usize, pred: &CasePrediction) -> bool {
    match case {
        Case::Case1 => pred.case1_admissible,
        Case::Case2 => pred.case2_admissible,
        Case::Case3 => true,
        Case::Radial => n as i64 > pred.multiplicity,
        Case::Other => false,
    }
}

/// Full-disc polar graph of a sector mesh.
#[derive(Debug, Clone, Copy)]
struct DiscGraph {
    n: usize,
    n_r: usize,
    /// Angular nodes per full ring.
    nt: usize,
    /// Angular nodes per sector.
    nts: usize,
}

impl DiscGraph {
    fn of(mesh: &SectorMesh) -> Self {
        DiscGraph {
            n: mesh.n(),
            n_r: mesh.n_r(),
            nt: mesh.n() * mesh.n_theta(),
            nts: mesh.n_theta(),
        }
    }

    fn len(&self) -> usize {
        1 + (self.n_r - 1) * self.nt
    }

    fn idx(&self, ring: usize, j: usize) -> usize {
        1 + (ring - 1) * self.nt + j
    }

    fn pos(&self, a: usize) -> (usize, usize) {
        if a == 0 {
            (0, 0)
        } else {
            (1 + (a - 1) / self.nt, (a - 1) % self.nt)
        }
    }

    fn neighbours(&self, a: usize, out: &mut Vec<usize>) {
        out.clear();
        if a == 0 {
            out.extend((0..self.nt).map(|j| self.idx(1, j)));
            return;
        }
        let (i, j) = self.pos(a);
        out.push(self.idx(i, (j + 1) % self.nt));
        out.push(self.idx(i, (j + self.nt - 1) % self.nt));
        if i == 1 {
            out.push(0);
        } else {
            out.push(self.idx(i - 1, j));
        }
        if i + 1 < self.n_r {
            out.push(self.idx(i + 1, j));
        }
    }

    /// Node rotated by one sector.
    fn rotate(&self, a: usize) -> usize {
        if a == 0 {
            0
        } else {
            let (i, j) = self.pos(a);
            self.idx(i, (j + self.nts) % self.nt)
        }
    }

    fn near_boundary(&self, a: usize) -> bool {
        a != 0 && self.pos(a).0 + BOUNDARY_RINGS >= self.n_r
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Region {
    pub sign: i8,
    pub node_count: usize,
    pub is_n_invariant: bool,
    pub touches_boundary: bool,
    pub contains_origin: bool,
    /// `∫_Ω ∇u·∇u` over the region with its share of the zero band.
    pub dirichlet_energy: f64,
    pub scaled_dirichlet: f64,
    /// `p(½∫_Ω|∇u|² − (p+1)⁻¹∫_Ω|x|^α|u|^{p+1})`.
    pub scaled_energy: f64,
    /// `p∫_Ω|∇u|² / 8πe`.
    pub dirichlet_ratio: f64,
    /// Scaled energy over `4πe`.
    pub energy_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroComponent {
    pub node_count: usize,
    pub contains_origin: bool,
    pub touches_boundary: bool,
    /// Adjacent to (or containing) nodes of both signs.
    pub separates: bool,
}

/// Sign segmentation of a sector field on the full disc.
#[derive(Debug, Clone)]
pub struct Segmentation {
    graph: DiscGraph,
    band_epsilon: f64,
    values: Vec<f64>,
    sign: Vec<i8>,
    /// Region of every node; band nodes are attached to a neighbouring
    /// region of their own sign when one exists.
    owner: Vec<usize>,
    /// Region of the non-band nodes only.
    core: Vec<usize>,
    regions: Vec<(i8, Vec<usize>)>,
    zero_components: Vec<ZeroComponent>,
}

const NONE: usize = usize::MAX;

/// Labels the sign components of `u` with zero band `|u| < ε·max|u|`.
pub fn segment(mesh: &SectorMesh, u: &Field, band_epsilon: f64) -> Result<Segmentation> {
    mesh.check(u)?;
    if !(band_epsilon > 0.0 && band_epsilon < 0.1) {
        return Err(HenonError::Config(format!("band epsilon must lie in (0, 0.1), got {band_epsilon}")));
    }
    let m = discrete::max_abs(u.values());
    if m == 0.0 {
        return Err(HenonError::ZeroField);
    }
    let g = DiscGraph::of(mesh);
    let values = mesh.unfold_values(u.values());
    let thr = band_epsilon * m;
    let sign: Vec<i8> = values
        .iter()
        .map(|&v| if v >= thr { 1 } else if v <= -thr { -1 } else { 0 })
        .collect();
    let total = g.len();
    let mut core = vec![NONE; total];
    let mut regions = Vec::new();
    let mut nb = Vec::with_capacity(8);
    let mut queue = VecDeque::new();
    for s in 0..total {
        if sign[s] == 0 || core[s] != NONE {
            continue;
        }
        let id = regions.len();
        let mut nodes = vec![s];
        core[s] = id;
        queue.push_back(s);
        while let Some(a) = queue.pop_front() {
            g.neighbours(a, &mut nb);
            for &b in &nb {
                if core[b] == NONE && sign[b] == sign[a] {
                    core[b] = id;
                    nodes.push(b);
                    queue.push_back(b);
                }
            }
        }
        regions.push((sign[s], nodes));
    }
    // band nodes: breadth-first attachment to regions of matching sign
    let mut owner = core.clone();
    queue.clear();
    for a in 0..total {
        if owner[a] != NONE {
            queue.push_back(a);
        }
    }
    let value_sign = |v: f64| -> i8 {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    while let Some(a) = queue.pop_front() {
        g.neighbours(a, &mut nb);
        for &b in &nb {
            if owner[b] == NONE && value_sign(values[b]) == regions[owner[a]].0 {
                owner[b] = owner[a];
                queue.push_back(b);
            }
        }
    }
    // anything left (exact zeros or isolated band patches) joins any neighbour
    loop {
        let mut changed = false;
        for a in 0..total {
            if owner[a] == NONE {
                g.neighbours(a, &mut nb);
                if let Some(&b) = nb.iter().find(|&&b| owner[b] != NONE) {
                    owner[a] = owner[b];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for (id, (_, nodes)) in regions.iter_mut().enumerate() {
        nodes.clear();
        nodes.extend((0..total).filter(|&a| owner[a] == id));
    }
    let zero_components = zero_set_components(&g, &sign);
    Ok(Segmentation {
        graph: g,
        band_epsilon,
        values,
        sign,
        owner,
        core,
        regions,
        zero_components,
    })
}

fn zero_set_components(g: &DiscGraph, sign: &[i8]) -> Vec<ZeroComponent> {
    let total = g.len();
    let mut nb = Vec::with_capacity(8);
    let mut in_z = vec![false; total];
    for a in 0..total {
        if sign[a] == 0 {
            in_z[a] = true;
            continue;
        }
        g.neighbours(a, &mut nb);
        if nb.iter().any(|&b| sign[b] == -sign[a]) {
            in_z[a] = true;
        }
    }
    let mut seen = vec![false; total];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for s in 0..total {
        if !in_z[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        queue.push_back(s);
        let mut comp = ZeroComponent {
            node_count: 0,
            contains_origin: false,
            touches_boundary: false,
            separates: false,
        };
        let (mut pos, mut neg) = (false, false);
        while let Some(a) = queue.pop_front() {
            comp.node_count += 1;
            comp.contains_origin |= a == 0;
            comp.touches_boundary |= g.near_boundary(a);
            pos |= sign[a] > 0;
            neg |= sign[a] < 0;
            g.neighbours(a, &mut nb);
            for &b in &nb {
                pos |= sign[b] > 0;
                neg |= sign[b] < 0;
                if in_z[b] && !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        comp.separates = pos && neg;
        out.push(comp);
    }
    out
}

impl Segmentation {
    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn band_epsilon(&self) -> f64 {
        self.band_epsilon
    }

    pub fn zero_components(&self) -> &[ZeroComponent] {
        &self.zero_components
    }

    pub fn zero_band_fraction(&self) -> f64 {
        self.sign.iter().filter(|&&s| s == 0).count() as f64 / self.sign.len() as f64
    }

    /// Region label of every full-disc node (pole first, ring by ring).
    pub fn labels(&self) -> &[usize] {
        &self.owner
    }

    pub fn region_sign(&self, id: usize) -> i8 {
        self.regions[id].0
    }

    pub fn region_is_n_invariant(&self, id: usize) -> bool {
        let (_, nodes) = &self.regions[id];
        let a = nodes.iter().copied().find(|&a| self.core[a] == id).unwrap_or(nodes[0]);
        self.owner[self.graph.rotate(a)] == id
    }

    pub fn region_contains_origin(&self, id: usize) -> bool {
        self.owner[0] == id
    }

    pub fn region_touches_boundary(&self, id: usize) -> bool {
        self.regions[id].1.iter().any(|&a| self.graph.near_boundary(a))
    }

    /// Nodal set components that separate the two signs.
    pub fn nodal_components(&self) -> impl Iterator<Item = &ZeroComponent> {
        self.zero_components.iter().filter(|c| c.separates)
    }

    pub fn origin_in_nodal_set(&self) -> bool {
        self.nodal_components().any(|c| c.contains_origin)
    }

    pub fn nodal_set_touches_boundary(&self) -> bool {
        self.nodal_components().any(|c| c.touches_boundary)
    }

    /// Components of the non-band nodes restricted to the angular window
    /// `[c, c + N_θ)` of one sector, minimized over the offset `c`.
    pub fn sector_region_count(&self) -> usize {
        (0..self.graph.nts)
            .map(|c| self.window_components(c))
            .min()
            .unwrap_or(0)
    }

    fn window_components(&self, c: usize) -> usize {
        let g = self.graph;
        let in_window = |a: usize| -> bool {
            if a == 0 {
                return true;
            }
            let (_, j) = g.pos(a);
            (j + g.nt - c) % g.nt < g.nts
        };
        let mut seen = vec![false; g.len()];
        let mut nb = Vec::with_capacity(8);
        let mut queue = VecDeque::new();
        let mut count = 0;
        for s in 0..g.len() {
            if seen[s] || self.sign[s] == 0 || !in_window(s) {
                continue;
            }
            count += 1;
            seen[s] = true;
            queue.push_back(s);
            while let Some(a) = queue.pop_front() {
                g.neighbours(a, &mut nb);
                for &b in &nb {
                    if !seen[b] && in_window(b) && self.sign[b] == self.sign[a] {
                        // the window is an open sector: no wrap across its edges
                        if a != 0 && b != 0 {
                            let (_, ja) = g.pos(a);
                            let (_, jb) = g.pos(b);
                            let wa = (ja + g.nt - c) % g.nt;
                            let wb = (jb + g.nt - c) % g.nt;
                            if wa.abs_diff(wb) > 1 {
                                continue;
                            }
                        }
                        seen[b] = true;
                        queue.push_back(b);
                    }
                }
            }
        }
        count
    }

    /// Largest number of regions lying strictly inside one angular window
    /// of a sector (regions through the pole never do).
    pub fn max_regions_in_sector(&self) -> usize {
        let g = self.graph;
        let columns: Vec<Option<Vec<usize>>> = self
            .regions
            .iter()
            .enumerate()
            .map(|(id, (_, nodes))| {
                if self.owner[0] == id {
                    return None;
                }
                let mut cols: Vec<usize> = nodes.iter().map(|&a| g.pos(a).1).collect();
                cols.sort_unstable();
                cols.dedup();
                Some(cols)
            })
            .collect();
        (0..g.nt)
            .map(|c| {
                columns
                    .iter()
                    .flatten()
                    .filter(|cols| cols.iter().all(|&j| (j + g.nt - c) % g.nt < g.nts))
                    .count()
            })
            .max()
            .unwrap_or(0)
    }

    /// Half the number of sign alternations around the first ring (from the
    /// pole outwards) that carries both signs; `None` unless the pole lies
    /// in the zero band.
    pub fn origin_arc_order(&self) -> Option<usize> {
        if self.sign[0] != 0 {
            return None;
        }
        let g = self.graph;
        for i in 1..g.n_r {
            let signs: Vec<i8> = (0..g.nt).map(|j| self.sign[g.idx(i, j)]).filter(|&s| s != 0).collect();
            if signs.iter().any(|&s| s > 0) && signs.iter().any(|&s| s < 0) {
                let k = signs.len();
                let alternations = (0..k).filter(|&t| signs[t] != signs[(t + 1) % k]).count();
                return Some(alternations / 2);
            }
        }
        Some(0)
    }

    /// Per-region `(∫_Ω∇u·∇u, ∫_Ω|x|^α|u|^{p+1})` using the partition of
    /// every node into regions, so that the first components sum to `∫|∇u|²`.
    pub fn region_integrals(&self, mesh: &SectorMesh, u: &Field, p: f64) -> Result<Vec<(f64, f64)>> {
        mesh.check(u)?;
        let ku = mesh.stiffness().mul_vec(u.values());
        let g = self.graph;
        let n = g.n as f64;
        let w = mesh.weights();
        let mut dir = vec![0.0; self.regions.len()];
        let mut logs: Vec<Vec<f64>> = vec![Vec::new(); self.regions.len()];
        for a in 0..g.len() {
            let id = self.owner[a];
            if id == NONE {
                continue;
            }
            let v = self.values[a];
            let (ka, wa) = if a == 0 {
                (n * ku[0], n * w[0])
            } else {
                let (i, j) = g.pos(a);
                let s = mesh.index(i, j % g.nts);
                (ku[s], w[s])
            };
            dir[id] += v * ka;
            if v != 0.0 && wa > 0.0 {
                logs[id].push(wa.ln() + (p + 1.0) * v.abs().ln());
            }
        }
        Ok(dir
            .into_iter()
            .zip(logs)
            .map(|(d, l)| {
                let mx = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let wsum = if mx == f64::NEG_INFINITY {
                    0.0
                } else {
                    (mx + l.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()).exp()
                };
                (d, wsum)
            })
            .collect())
    }
}

/// `(region_count, sector_region_count)`.
pub fn count_regions(seg: &Segmentation) -> (usize, usize) {
    (seg.region_count(), seg.sector_region_count())
}

/// Case decision tree. Tests run in the order radial, case 1, case 2,
/// case 3; anything else is `other`.
pub fn classify(seg: &Segmentation, angular_variation: f64, n: usize) -> Case {
    if angular_variation <= RADIAL_TOLERANCE {
        return Case::Radial;
    }
    let count = seg.region_count();
    let through = seg.nodal_components().any(|c| c.contains_origin && c.touches_boundary);
    if count == 2 * n && through {
        return Case::Case1;
    }
    let invariant: Vec<bool> = (0..count).map(|id| seg.region_is_n_invariant(id)).collect();
    let n_inv = invariant.iter().filter(|&&b| b).count();
    if n == 1 {
        if count == 2 && seg.nodal_set_touches_boundary() {
            return Case::Case2;
        }
    } else if count == n + 1 && n_inv == 1 {
        return Case::Case2;
    }
    if count == 2 && n_inv == 2 && !seg.nodal_set_touches_boundary() {
        return Case::Case3;
    }
    Case::Other
}

/// Finds the reflection `j ↦ (c − j) mod N_θ` closest to a symmetry of `u`.
/// Returns `(c, ‖u − R_c u‖₂ / ‖u‖₂)`.
fn best_reflection(u: &Field) -> (i64, f64) {
    let nts = u.shape().n_theta as i64;
    let norm: f64 = u.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (0, 0.0);
    }
    let mut best = (0, f64::INFINITY);
    for c in 0..2 * nts {
        let r = u.reflect_about(c);
        let d: f64 = u.values().iter().zip(r.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d < best.1 {
            best = (c, d / norm);
        }
    }
    best
}

/// `‖u − reflect(u)‖₂ / ‖u‖₂` for the best-aligned reflection axis.
pub fn check_bisector_symmetry(u: &Field) -> f64 {
    best_reflection(u).1
}

/// Largest increase of `u` (relative to `max|u|`) between angular
/// neighbours while walking from one reflection axis to the next, in the
/// better of the two walking directions. Zero for a field that is
/// monotone in the angle on the half sector.
pub fn check_angular_monotonicity(u: &Field) -> f64 {
    let shape = u.shape();
    let nts = shape.n_theta as i64;
    let m = discrete::max_abs(u.values());
    if m == 0.0 {
        return 0.0;
    }
    let (c, _) = best_reflection(u);
    // axes sit at c/2 and c/2 + N_θ/2 (in cells)
    let start = (c + 1).div_euclid(2);
    let end_axis2 = c as f64 / 2.0 + nts as f64 / 2.0;
    let stop = end_axis2.floor() as i64;
    let at = |i: usize, j: i64| u.at(i, j.rem_euclid(nts) as usize);
    let mut up = 0.0_f64;
    let mut down = 0.0_f64;
    for i in 1..shape.n_r {
        for j in start..stop {
            let d = at(i, j + 1) - at(i, j);
            up = up.max(d);
            down = down.max(-d);
        }
    }
    up.min(down) / m
}

/// Per-region scaled energies; see [`Region`].
pub fn per_region_energy(seg: &Segmentation, mesh: &SectorMesh, u: &Field, p: f64) -> Result<Vec<Region>> {
    let ints = seg.region_integrals(mesh, u, p)?;
    let eight_pi_e = 8.0 * PI * E;
    let four_pi_e = 4.0 * PI * E;
    Ok(ints
        .into_iter()
        .enumerate()
        .map(|(id, (d, w))| {
            let se = p * (0.5 * d - w / (p + 1.0));
            Region {
                sign: seg.region_sign(id),
                node_count: seg.regions[id].1.len(),
                is_n_invariant: seg.region_is_n_invariant(id),
                touches_boundary: seg.region_touches_boundary(id),
                contains_origin: seg.region_contains_origin(id),
                dirichlet_energy: d,
                scaled_dirichlet: p * d,
                scaled_energy: se,
                dirichlet_ratio: p * d / eight_pi_e,
                energy_ratio: se / four_pi_e,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodalReport {
    pub region_count: usize,
    pub sector_region_count: usize,
    pub regions: Vec<Region>,
    pub case: Case,
    pub quasiradial: bool,
    pub zero_band_fraction: f64,
    pub monotonicity_violation: f64,
    pub bisector_asymmetry: f64,
    pub origin_in_nodal_set: bool,
    pub nodal_set_touches_boundary: bool,
    pub origin_arc_order: Option<usize>,
    pub max_regions_in_sector: usize,
    pub angular_variation: f64,
    pub band_epsilon: f64,
    /// Region counts at `ε/2`, `ε`, `2ε`.
    pub band_sweep: [usize; 3],
    pub band_stable: bool,
    pub admissible: bool,
    pub prediction: CasePrediction,
}

impl NodalReport {
    /// `Σ_Ω p∫_Ω|∇u|²`.
    pub fn total_scaled_dirichlet(&self) -> f64 {
        self.regions.iter().map(|r| r.scaled_dirichlet).sum()
    }
}

/// Full nodal analysis of a sign-changing sector field.
pub fn analyze(mesh: &SectorMesh, u: &Field, params: &ProblemParams, band_epsilon: f64) -> Result<NodalReport> {
    if params.n() != mesh.n() {
        return Err(HenonError::MeshMismatch("parameters do not match the mesh".into()));
    }
    let seg = segment(mesh, u, band_epsilon)?;
    let half = segment(mesh, u, 0.5 * band_epsilon)?.region_count();
    let double = if 2.0 * band_epsilon < 0.1 {
        segment(mesh, u, 2.0 * band_epsilon)?.region_count()
    } else {
        seg.region_count()
    };
    let var = angular_variation(mesh, u);
    let case = classify(&seg, var, params.n());
    let prediction = predict_cases(params);
    let regions = per_region_energy(&seg, mesh, u, params.p())?;
    Ok(NodalReport {
        region_count: seg.region_count(),
        sector_region_count: seg.sector_region_count(),
        regions,
        case,
        quasiradial: case == Case::Case3,
        zero_band_fraction: seg.zero_band_fraction(),
        monotonicity_violation: check_angular_monotonicity(u),
        bisector_asymmetry: check_bisector_symmetry(u),
        origin_in_nodal_set: seg.origin_in_nodal_set(),
        nodal_set_touches_boundary: seg.nodal_set_touches_boundary(),
        origin_arc_order: seg.origin_arc_order(),
        max_regions_in_sector: seg.max_regions_in_sector(),
        angular_variation: var,
        band_epsilon,
        band_sweep: [half, seg.region_count(), double],
        band_stable: half == seg.region_count() && double == seg.region_count(),
        admissible: admissible(case, params.n(), &prediction),
        prediction,
    })
}

/// Writes `r,theta,label` rows for the full disc.
pub fn write_labels_csv<W: std::io::Write>(mesh: &SectorMesh, seg: &Segmentation, mut w: W) -> Result<()> {
    let io = |e: std::io::Error| HenonError::Config(format!("write failed: {e}"));
    writeln!(w, "r,theta,label").map_err(io)?;
    let g = seg.graph;
    let h = mesh.angular_step();
    for a in 0..g.len() {
        let (i, j) = g.pos(a);
        let label = seg.owner[a];
        let label = if label == NONE { -1 } else { label as i64 };
        writeln!(w, "{:.16e},{:.16e},{}", mesh.radius(i), j as f64 * h, label).map_err(io)?;
    }
    Ok(())
}
