//! Banded symmetric matrices and the three factorizations the solvers need:
//! Cholesky (SPD stiffness solves), unpivoted LDLᵀ (Sylvester inertia) and
//! LU with partial pivoting (indefinite Newton systems).

use nalgebra::DMatrix;

use crate::error::{HenonError, Result};

/// Symmetric matrix stored by its lower band.
///
/// Row `i` keeps columns `i - bw ..= i`; entry `(i, j)` lives at
/// `data[i * (bw + 1) + (i - j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Adds the edge term `w (e_i - e_j)(e_i - e_j)ᵀ`.
    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) {
        self.add(i, i, w);
        self.add(j, j, w);
        self.add(i, j, -w);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[self.slot(i, i)]).collect()
    }

    /// `self + diag(d)`.
    pub fn with_diagonal_added(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut out = self.clone();
        for (i, di) in d.iter().enumerate() {
            let s = out.slot(i, i);
            out.data[s] += di;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            y[i] += row[0] * x[i];
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = row[i - j];
                if a != 0.0 {
                    y[i] += a * x[j];
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let v = self.data[self.slot(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Banded Cholesky factorization `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        let w = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = l[i * w + (i - j)];
                for k in klo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(HenonError::Numerical(format!(
                            "matrix not positive definite at row {i} (pivot {s:e})"
                        )));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }

    /// Sylvester inertia of `A - shift * diag(mass)` from an unpivoted
    /// banded LDLᵀ factorization.
    ///
    /// Pivots with magnitude below `tiny` (relative to the largest diagonal
    /// entry) are counted in `near_zero` and replaced by `+tiny` so the
    /// factorization can continue.
    pub fn inertia(&self, mass: Option<&[f64]>, shift: f64) -> Inertia {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut a = self.data.clone();
        if let Some(m) = mass {
            for i in 0..n {
                a[i * w] -= shift * m[i];
            }
        }
        let scale = (0..n).map(|i| a[i * w].abs()).fold(0.0_f64, f64::max).max(1e-300);
        let tiny = 1e-14 * scale;
        let mut d = vec![0.0; n];
        let mut row = vec![0.0; w];
        let (mut neg, mut pos, mut near_zero) = (0, 0, 0);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            // row[k - lo] holds L_ik * D_k for the already finished columns
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = a[i * w + (i - j)];
                for k in klo..j {
                    s -= row[k - lo] * a[j * w + (j - k)];
                }
                if i == j {
                    let mut dj = s;
                    if dj.abs() < tiny {
                        near_zero += 1;
                        dj = tiny;
                    }
                    if dj < 0.0 {
                        neg += 1;
                    } else {
                        pos += 1;
                    }
                    d[i] = dj;
                    a[i * w] = dj;
                } else {
                    row[j - lo] = s;
                    a[i * w + (i - j)] = s / d[j];
                }
            }
        }
        Inertia {
            negative: neg,
            positive: pos,
            near_zero,
        }
    }
}

/// Counts of pivot signs from an LDLᵀ factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub positive: usize,
    pub near_zero: usize,
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let yi = y[i] / self.l[i * w];
            y[i] = yi;
            for k in i.saturating_sub(bw)..i {
                y[k] -= self.l[i * w + (i - k)] * yi;
            }
        }
        y
    }
}

/// LU factorization with partial pivoting of a banded matrix
/// (`kl` sub-diagonals, `ku` super-diagonals before fill-in).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    // Row i stores columns i - kl ..= i + kl + ku.
    #[inline]
    fn at(&self, i: usize, c: usize) -> usize {
        i * self.width + (c + self.kl - i)
    }

    pub fn factor_symmetric(a: &BandedSym) -> Result<Self> {
        let (n, bw) = (a.dim(), a.bandwidth());
        let kl = bw;
        let ku = bw;
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            width,
            ab: vec![0.0; n * width],
            piv: vec![0; n],
        };
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(n - 1);
            for j in lo..=hi {
                let s = lu.at(i, j);
                lu.ab[s] = a.get(i, j);
            }
        }
        let reach = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.ab[lu.at(k, k)].abs();
            for r in k + 1..=last {
                let v = lu.ab[lu.at(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(HenonError::Numerical(format!("singular matrix at column {k}")));
            }
            lu.piv[k] = p;
            let cmax = (k + reach).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let (s1, s2) = (lu.at(k, c), lu.at(p, c));
                    lu.ab.swap(s1, s2);
                }
            }
            let pivot = lu.ab[lu.at(k, k)];
            for r in k + 1..=last {
                let sr = lu.at(r, k);
                let f = lu.ab[sr] / pivot;
                lu.ab[sr] = f;
                if f != 0.0 {
                    for c in k + 1..=cmax {
                        let skc = lu.at(k, c);
                        let src = lu.at(r, c);
                        lu.ab[src] -= f * lu.ab[skc];
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let reach = self.width - 1 - self.kl;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n - 1) {
                    x[r] -= self.ab[self.at(r, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + reach).min(n - 1) {
                s -= self.ab[self.at(k, c)] * x[c];
            }
            x[k] = s / self.ab[self.at(k, k)];
        }
        x
    }
}

/// Euclidean dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
