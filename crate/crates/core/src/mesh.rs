//! Polar finite-volume discretization of the unit disc restricted to the
//! fundamental sector of the rotation group `G_n`.
//!
//! Unknowns are the pole plus the interior rings `1..N_r-1` (ring `N_r` is
//! the Dirichlet circle `r = 1`), each ring carrying `N_θ` angular nodes with
//! periodic wrap-around across the sector. Periodicity with period `2π/n`
//! is exactly the `n`-invariance constraint, so every sector field is a
//! member of the symmetric subspace.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::discrete::{self, Discretization};
use crate::error::{HenonError, Result};
use crate::linalg::{BandedCholesky, BandedSym};

pub const MIN_RADIAL_NODES: usize = 16;
pub const MIN_ANGULAR_NODES: usize = 8;

/// Placement of the radial nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Grading {
    Uniform,
    /// Cosine clustering towards `r = 1`.
    BoundaryRefined,
    /// `r = δ(e^ζ − 1)` with `ζ` uniform: uniform spacing `≈ δ` near the
    /// pole and geometric growth beyond. Resolves profiles concentrated at
    /// scale `δ` around the origin.
    OriginRefined { core_scale: f64 },
}

impl Grading {
    /// Radii `r_1 < … < r_{N_r} = 1`.
    pub fn radial_nodes(&self, n_r: usize) -> Result<Vec<f64>> {
        let nr = n_r as f64;
        let nodes: Vec<f64> = match *self {
            Grading::Uniform => (1..=n_r).map(|i| i as f64 / nr).collect(),
            Grading::BoundaryRefined => (1..=n_r)
                .map(|i| (0.5 * PI * i as f64 / nr).sin())
                .collect(),
            Grading::OriginRefined { core_scale } => {
                if !(core_scale > 0.0 && core_scale < 1.0) {
                    return Err(HenonError::Config(format!(
                        "core scale must lie in (0, 1), got {core_scale}"
                    )));
                }
                let z = (1.0 / core_scale).ln_1p();
                (1..=n_r)
                    .map(|i| core_scale * (z * i as f64 / nr).exp_m1())
                    .collect()
            }
        };
        let mut nodes = nodes;
        *nodes.last_mut().expect("n_r >= 1") = 1.0;
        Ok(nodes)
    }
}

/// Shape tag tying a field to the mesh it was sampled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldShape {
    pub n: usize,
    pub n_r: usize,
    pub n_theta: usize,
}

impl FieldShape {
    pub fn dofs(&self) -> usize {
        1 + (self.n_r - 1) * self.n_theta
    }
}

/// Grid function on the interior nodes of a sector mesh. Index 0 is the
/// pole; ring `i ∈ 1..N_r`, angle `j ∈ 0..N_θ` lives at `1 + (i−1)N_θ + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    shape: FieldShape,
    values: Vec<f64>,
}

impl Field {
    pub fn new(shape: FieldShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.dofs() {
            return Err(HenonError::MeshMismatch(format!(
                "expected {} values, got {}",
                shape.dofs(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HenonError::Numerical("field has non-finite values".into()));
        }
        Ok(Field { shape, values })
    }

    pub fn zeros(shape: FieldShape) -> Self {
        Field {
            shape,
            values: vec![0.0; shape.dofs()],
        }
    }

    pub fn shape(&self) -> FieldShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn pole(&self) -> f64 {
        self.values[0]
    }

    /// Value at ring `i ≥ 1`, angle `j`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[1 + (i - 1) * self.shape.n_theta + j]
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            shape: self.shape,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Rotation by `k` angular cells: `(R u)(θ) = u(θ − k h_θ)`.
    pub fn angular_shift(&self, k: i64) -> Field {
        let nt = self.shape.n_theta as i64;
        let mut out = self.values.clone();
        for i in 1..self.shape.n_r {
            let base = 1 + (i - 1) * self.shape.n_theta;
            for j in 0..nt {
                let src = (j - k).rem_euclid(nt) as usize;
                out[base + j as usize] = self.values[base + src];
            }
        }
        Field { shape: self.shape, values: out }
    }

    /// Reflection `θ ↦ 2π/n − θ` across the sector bisector.
    pub fn reflect_bisector(&self) -> Field {
        self.reflect_about(0)
    }

    /// Reflection `j ↦ (c − j) mod N_θ`; the axes sit at angles `c·h_θ/2`
    /// and `c·h_θ/2 + π/n`.
    pub fn reflect_about(&self, c: i64) -> Field {
        let nt = self.shape.n_theta as i64;
        let mut out = self.values.clone();
        for i in 1..self.shape.n_r {
            let base = 1 + (i - 1) * self.shape.n_theta;
            for j in 0..nt {
                let src = (c - j).rem_euclid(nt) as usize;
                out[base + j as usize] = self.values[base + src];
            }
        }
        Field { shape: self.shape, values: out }
    }
}

#[derive(Debug)]
pub struct SectorMesh {
    n: usize,
    n_r: usize,
    n_theta: usize,
    alpha: f64,
    grading: Grading,
    radial_nodes: Vec<f64>,
    angular_step: f64,
    stiffness: BandedSym,
    mass: Vec<f64>,
    weights: Vec<f64>,
    factor: OnceLock<BandedCholesky>,
}

/// Radius of the face between node `i` and `i+1` (`r_0 = 0` is the pole).
fn face(nodes: &[f64], i: usize) -> f64 {
    let lo = if i == 0 { 0.0 } else { nodes[i - 1] };
    0.5 * (lo + nodes[i])
}

/// `∫_{a}^{b} r^{α+1} dr`.
fn moment(a: f64, b: f64, alpha: f64) -> f64 {
    let e = alpha + 2.0;
    (b.powf(e) - a.powf(e)) / e
}

impl SectorMesh {
    pub fn new(n: usize, n_r: usize, n_theta: usize, grading: Grading, alpha: f64) -> Result<Self> {
        if n < 1 {
            return Err(HenonError::Config("symmetry order n must be >= 1".into()));
        }
        if n_r < MIN_RADIAL_NODES || n_theta < MIN_ANGULAR_NODES {
            return Err(HenonError::Config(format!(
                "resolution {n_r}x{n_theta} below minimum {MIN_RADIAL_NODES}x{MIN_ANGULAR_NODES}"
            )));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(HenonError::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        let radial_nodes = grading.radial_nodes(n_r)?;
        if radial_nodes.windows(2).any(|w| !(w[1] > w[0])) || !(radial_nodes[0] > 0.0) {
            return Err(HenonError::Config("radial nodes not strictly increasing".into()));
        }
        let h = 2.0 * PI / (n * n_theta) as f64;
        let shape = FieldShape { n, n_r, n_theta };
        let dofs = shape.dofs();
        let mut k = BandedSym::zeros(dofs, n_theta);
        let mut mass = vec![0.0; dofs];
        let mut weights = vec![0.0; dofs];
        let r = &radial_nodes;
        // node i (1-based ring) has radius r[i-1]; faces at face(r, i-1), face(r, i)
        let idx = |i: usize, j: usize| 1 + (i - 1) * n_theta + j;

        let r_half = face(r, 0);
        mass[0] = n_theta as f64 * h * r_half * r_half / 2.0;
        weights[0] = n_theta as f64 * h * moment(0.0, r_half, alpha);
        let pole_w = r_half * h / r[0];
        for j in 0..n_theta {
            k.add_edge(0, idx(1, j), pole_w);
        }
        for i in 1..n_r {
            let r_lo = face(r, i - 1);
            let r_hi = face(r, i);
            let ri = r[i - 1];
            let area = h * (r_hi * r_hi - r_lo * r_lo) / 2.0;
            let mom = h * moment(r_lo, r_hi, alpha);
            let w_rad = r_hi * h / (r[i] - ri);
            let w_ang = (r_hi / r_lo).ln() / h;
            for j in 0..n_theta {
                let a = idx(i, j);
                mass[a] = area;
                weights[a] = mom;
                k.add_edge(a, idx(i, (j + 1) % n_theta), w_ang);
                if i + 1 < n_r {
                    k.add_edge(a, idx(i + 1, j), w_rad);
                } else {
                    k.add(a, a, w_rad);
                }
            }
        }
        Ok(SectorMesh {
            n,
            n_r,
            n_theta,
            alpha,
            grading,
            radial_nodes,
            angular_step: h,
            stiffness: k,
            mass,
            weights,
            factor: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn angular_step(&self) -> f64 {
        self.angular_step
    }

    /// `r_1, …, r_{N_r}` (the last one is the Dirichlet ring `r = 1`).
    pub fn radial_nodes(&self) -> &[f64] {
        &self.radial_nodes
    }

    pub fn shape(&self) -> FieldShape {
        FieldShape {
            n: self.n,
            n_r: self.n_r,
            n_theta: self.n_theta,
        }
    }

    pub fn index(&self, ring: usize, j: usize) -> usize {
        if ring == 0 {
            0
        } else {
            1 + (ring - 1) * self.n_theta + j
        }
    }

    /// `(ring, angular index)` of a degree of freedom; the pole is `(0, 0)`.
    pub fn position(&self, dof: usize) -> (usize, usize) {
        if dof == 0 {
            (0, 0)
        } else {
            (1 + (dof - 1) / self.n_theta, (dof - 1) % self.n_theta)
        }
    }

    pub fn radius(&self, ring: usize) -> f64 {
        if ring == 0 {
            0.0
        } else {
            self.radial_nodes[ring - 1]
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.angular_step
    }

    pub fn check(&self, f: &Field) -> Result<()> {
        if f.shape() == self.shape() {
            Ok(())
        } else {
            Err(HenonError::MeshMismatch(format!(
                "field {:?} vs mesh {:?}",
                f.shape(),
                self.shape()
            )))
        }
    }

    /// Samples `f(r, θ)` at the interior nodes; the pole takes the mean of
    /// `f(0, θ_j)` over the sector angles.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut values = vec![0.0; self.shape().dofs()];
        values[0] = (0..self.n_theta).map(|j| f(0.0, self.theta(j))).sum::<f64>() / self.n_theta as f64;
        for i in 1..self.n_r {
            let r = self.radius(i);
            for j in 0..self.n_theta {
                values[self.index(i, j)] = f(r, self.theta(j));
            }
        }
        Field {
            shape: self.shape(),
            values,
        }
    }

    /// `∫_B |x|^α g(x) dx` with the same cell moments as the energy, but
    /// including the boundary half-cells so that `g` need not vanish at
    /// `r = 1`. Uses the sector cells and multiplies by `n`.
    pub fn integrate(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let h = self.angular_step;
        let r = &self.radial_nodes;
        let mut s = 0.0;
        let pole: f64 = (0..self.n_theta).map(|j| g(0.0, self.theta(j))).sum::<f64>() / self.n_theta as f64;
        s += pole * self.weights[0];
        for i in 1..=self.n_r {
            let r_lo = face(r, i - 1);
            let r_hi = if i < self.n_r { face(r, i) } else { 1.0 };
            let mom = h * moment(r_lo, r_hi, self.alpha);
            for j in 0..self.n_theta {
                s += mom * g(r[i - 1], self.theta(j));
            }
        }
        self.n as f64 * s
    }

    pub fn dirichlet_energy(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(discrete::dirichlet(self, f.values()))
    }

    /// `∫_B |x|^α |u|^q`.
    pub fn weighted_integral(&self, f: &Field, q: f64) -> Result<f64> {
        self.check(f)?;
        if !(q >= 1.0) {
            return Err(HenonError::Config(format!("exponent q must be >= 1, got {q}")));
        }
        Ok(discrete::power_integral(self, f.values(), q))
    }

    /// `E_p(u) = ½∫|∇u|² − (p+1)⁻¹∫|x|^α|u|^{p+1}`.
    pub fn energy(&self, f: &Field, p: f64) -> Result<f64> {
        self.check(f)?;
        Ok(discrete::energy(self, f.values(), p))
    }

    /// Residual of `−Δu = |x|^α|u|^{p−1}u` in the dual (`H⁻¹`) norm,
    /// relative to `‖u‖_{H¹₀}`.
    pub fn pde_residual(&self, f: &Field, p: f64) -> Result<f64> {
        self.check(f)?;
        Ok(discrete::normalized_residual(self, f.values(), p))
    }

    /// Residual in the strong L² norm, relative to `‖u‖_{H¹₀}`.
    pub fn strong_residual(&self, f: &Field, p: f64) -> Result<f64> {
        self.check(f)?;
        Ok(discrete::strong_residual(self, f.values(), p))
    }

    /// The full-disc mesh with the same radial nodes and angular step.
    pub fn full_disc(&self) -> Result<SectorMesh> {
        SectorMesh::new(1, self.n_r, self.n * self.n_theta, self.grading, self.alpha)
    }

    /// Replicates a sector field `n` times by rotation.
    pub fn unfold_full_disc(&self, f: &Field) -> Result<(SectorMesh, Field)> {
        self.check(f)?;
        let full = self.full_disc()?;
        let values = self.unfold_values(f.values());
        let field = Field {
            shape: full.shape(),
            values,
        };
        Ok((full, field))
    }

    /// Sector values copied to the full-disc node layout.
    pub fn unfold_values(&self, v: &[f64]) -> Vec<f64> {
        let nt_full = self.n * self.n_theta;
        let mut out = vec![0.0; 1 + (self.n_r - 1) * nt_full];
        out[0] = v[0];
        for i in 1..self.n_r {
            for jj in 0..nt_full {
                out[1 + (i - 1) * nt_full + jj] = v[self.index(i, jj % self.n_theta)];
            }
        }
        out
    }

    /// Writes `r,theta,value` rows, pole first, ring by ring, with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, f: &Field, mut w: W) -> Result<()> {
        self.check(f)?;
        let io = |e: std::io::Error| HenonError::Config(format!("write failed: {e}"));
        writeln!(w, "r,theta,value").map_err(io)?;
        writeln!(w, "{:.16e},{:.16e},{:.16e}", 0.0, 0.0, f.pole()).map_err(io)?;
        for i in 1..self.n_r {
            for j in 0..self.n_theta {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", self.radius(i), self.theta(j), f.at(i, j)).map_err(io)?;
            }
        }
        Ok(())
    }
}

impl Discretization for SectorMesh {
    fn dofs(&self) -> usize {
        self.mass.len()
    }

    fn stiffness(&self) -> &BandedSym {
        &self.stiffness
    }

    fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn copies(&self) -> f64 {
        self.n as f64
    }

    fn stiffness_factor(&self) -> &BandedCholesky {
        self.factor
            .get_or_init(|| self.stiffness.cholesky().expect("Dirichlet stiffness is positive definite"))
    }
}

pub fn build_mesh(n: usize, n_r: usize, n_theta: usize, grading: Grading, alpha: f64) -> Result<SectorMesh> {
    SectorMesh::new(n, n_r, n_theta, grading, alpha)
}

/// Angular symbol used for Fourier mode `k` of the radial operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AngularSymbol {
    /// `k²`.
    Continuous,
    /// `(2 − 2cos(k h))/h²` with `h = 2π/nodes`: the exact symbol of the
    /// polar grid with `nodes` points per full ring.
    Grid { nodes: usize },
}

impl AngularSymbol {
    pub fn value(&self, k: usize) -> f64 {
        match *self {
            AngularSymbol::Continuous => (k * k) as f64,
            AngularSymbol::Grid { nodes } => {
                let h = 2.0 * PI / nodes as f64;
                (2.0 - 2.0 * (k as f64 * h).cos()) / (h * h)
            }
        }
    }
}

/// Radial (angle-independent) restriction of the polar discretization on
/// the full disc: the pole plus one value per interior ring.
///
/// For a given angular mode `k ≥ 1` the pole is removed and the angular
/// stiffness `2π k² ln(r_{i+½}/r_{i−½})` is added on the diagonal.
#[derive(Debug)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    alpha: f64,
    mode: usize,
    stiffness: BandedSym,
    mass: Vec<f64>,
    weights: Vec<f64>,
    factor: OnceLock<BandedCholesky>,
}

impl RadialGrid {
    /// `nodes` are `r_1 < … < r_{N_r} = 1`.
    pub fn new(nodes: &[f64], alpha: f64) -> Result<Self> {
        Self::with_mode(nodes, alpha, 0, AngularSymbol::Continuous)
    }

    pub fn from_grading(grading: Grading, n_r: usize, alpha: f64) -> Result<Self> {
        if n_r < MIN_RADIAL_NODES {
            return Err(HenonError::Config(format!("need at least {MIN_RADIAL_NODES} radial nodes")));
        }
        Self::new(&grading.radial_nodes(n_r)?, alpha)
    }

    pub fn from_mesh(mesh: &SectorMesh) -> Result<Self> {
        Self::new(mesh.radial_nodes(), mesh.alpha())
    }

    pub fn with_mode(nodes: &[f64], alpha: f64, mode: usize, symbol: AngularSymbol) -> Result<Self> {
        let n_r = nodes.len();
        if n_r < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) || !(nodes[0] > 0.0) {
            return Err(HenonError::Config("radial nodes must be positive and increasing".into()));
        }
        let with_pole = mode == 0;
        let off = usize::from(with_pole);
        let dofs = n_r - 1 + off;
        let two_pi = 2.0 * PI;
        let mut k = BandedSym::zeros(dofs, 1);
        let mut mass = vec![0.0; dofs];
        let mut weights = vec![0.0; dofs];
        let r_half = face(nodes, 0);
        let pole_w = two_pi * r_half / nodes[0];
        if with_pole {
            mass[0] = PI * r_half * r_half;
            weights[0] = two_pi * moment(0.0, r_half, alpha);
            k.add_edge(0, 1, pole_w);
        } else {
            k.add(0, 0, pole_w);
        }
        let sym = symbol.value(mode);
        for i in 1..n_r {
            let a = i - 1 + off;
            let r_lo = face(nodes, i - 1);
            let r_hi = face(nodes, i);
            mass[a] = PI * (r_hi * r_hi - r_lo * r_lo);
            weights[a] = two_pi * moment(r_lo, r_hi, alpha);
            let w = two_pi * r_hi / (nodes[i] - nodes[i - 1]);
            if i + 1 < n_r {
                k.add_edge(a, a + 1, w);
            } else {
                k.add(a, a, w);
            }
            if mode > 0 {
                k.add(a, a, two_pi * sym * (r_hi / r_lo).ln());
            }
        }
        Ok(RadialGrid {
            nodes: nodes.to_vec(),
            alpha,
            mode,
            stiffness: k,
            mass,
            weights,
            factor: OnceLock::new(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    /// Radii of the degrees of freedom (the pole first when present).
    pub fn dof_radii(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mass.len());
        if self.mode == 0 {
            out.push(0.0);
        }
        out.extend_from_slice(&self.nodes[..self.nodes.len() - 1]);
        out
    }

    /// Samples a radial profile at the degrees of freedom.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.dof_radii().into_iter().map(f).collect()
    }
}

impl Discretization for RadialGrid {
    fn dofs(&self) -> usize {
        self.mass.len()
    }

    fn stiffness(&self) -> &BandedSym {
        &self.stiffness
    }

    fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn copies(&self) -> f64 {
        1.0
    }

    fn stiffness_factor(&self) -> &BandedCholesky {
        self.factor
            .get_or_init(|| self.stiffness.cholesky().expect("Dirichlet stiffness is positive definite"))
    }
}

/// Broadcasts ring values (pole first) to a sector field.
pub fn broadcast_radial(mesh: &SectorMesh, ring_values: &[f64]) -> Result<Field> {
    if ring_values.len() != mesh.n_r() {
        return Err(HenonError::MeshMismatch(format!(
            "expected {} ring values, got {}",
            mesh.n_r(),
            ring_values.len()
        )));
    }
    let mut values = vec![0.0; mesh.shape().dofs()];
    values[0] = ring_values[0];
    for i in 1..mesh.n_r() {
        for j in 0..mesh.n_theta() {
            values[mesh.index(i, j)] = ring_values[i];
        }
    }
    Field::new(mesh.shape(), values)
}
