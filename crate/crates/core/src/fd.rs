//! Finite-difference discretization of the graph operator, used as an
//! independent check on the characteristic-function roots.
//!
//! Each edge carries the 3-point Laplacian on its interior nodes. The
//! shared vertex value is eliminated through the one-sided second-order
//! Kirchhoff condition
//!
//! ```text
//! Σ_l (3 y_v - 4 y_{l,N-1} + y_{l,N-2}) / 2h = 0
//! ```
//!
//! so the operator is block tridiagonal plus a few rank-one terms: one for
//! the vertex and one per frozen edge (`q ⊗ Σ_k L_k`, with `L_k` the linear
//! interpolation functional at `a_k`).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{Alpha, GraphSpec};

pub const MIN_N: usize = 100;
pub const MAX_COUNT: usize = 30;
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Sparse row: `(column, weight)`.
type SparseRow = Vec<(usize, f64)>;

#[derive(Clone, Debug)]
pub struct FdMatrix {
    pub size: usize,
    pub h: f64,
    pub n: usize,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    /// Start of each edge's unknowns; the last entry is `size`.
    offsets: Vec<usize>,
    /// Rank-one terms `u vᵀ` with `u` dense and `v` sparse.
    low_rank: Vec<(Vec<f64>, SparseRow)>,
}

fn add(row: &mut SparseRow, col: usize, w: f64) {
    if let Some(e) = row.iter_mut().find(|e| e.0 == col) {
        e.1 += w;
    } else {
        row.push((col, w));
    }
}

/// Assembles the discretization with `n` cells per edge.
pub fn build_fd_matrix(graph: &GraphSpec, n: usize) -> Result<FdMatrix> {
    if n < MIN_N {
        return Err(Error::InvalidArgument(format!("FD grid needs N >= {MIN_N}, got {n}")));
    }
    let p = graph.p();
    let h = PI / n as f64;
    let ih2 = 1.0 / (h * h);

    // Neumann edges keep node 0 as an unknown
    let first_node = |alpha: Alpha| if alpha == Alpha::Neumann { 0 } else { 1 };
    let mut offsets = Vec::with_capacity(p + 1);
    let mut size = 0;
    for e in graph.edges() {
        offsets.push(size);
        size += n - first_node(e.alpha);
    }
    offsets.push(size);
    let index = |l: usize, node: usize| offsets[l] + node - first_node(graph.edges()[l].alpha);

    // y_v = Σ_l (4 y_{l,N-1} - y_{l,N-2}) / 3p
    let mut vertex: SparseRow = Vec::with_capacity(2 * p);
    for l in 0..p {
        vertex.push((index(l, n - 1), 4.0 / (3.0 * p as f64)));
        vertex.push((index(l, n - 2), -1.0 / (3.0 * p as f64)));
    }

    let mut sub = vec![0.0; size];
    let mut diag = vec![0.0; size];
    let mut sup = vec![0.0; size];
    let mut low_rank = Vec::new();
    let mut vertex_u = vec![0.0; size];

    for (l, edge) in graph.edges().iter().enumerate() {
        let f = first_node(edge.alpha);
        for node in f..n {
            let r = index(l, node);
            diag[r] = 2.0 * ih2;
            if node == 0 {
                // ghost node y_{-1} = y_1
                sup[r] = -2.0 * ih2;
                continue;
            }
            if node > f {
                sub[r] = -ih2;
            }
            if node + 1 < n {
                sup[r] = -ih2;
            } else {
                vertex_u[r] = -ih2;
            }
        }
        if edge.is_ordinary() {
            for node in f..n {
                diag[index(l, node)] += edge.q.value_at(node as f64 * h);
            }
            continue;
        }
        let mut v: SparseRow = Vec::new();
        for &a in &edge.frozen_args {
            let cell = ((a / h).floor() as usize).min(n - 1);
            let theta = a / h - cell as f64;
            for (node, w) in [(cell, 1.0 - theta), (cell + 1, theta)] {
                if w == 0.0 {
                    continue;
                }
                if node == n {
                    for &(c, vw) in &vertex {
                        add(&mut v, c, w * vw);
                    }
                } else if node >= f {
                    add(&mut v, index(l, node), w);
                }
            }
        }
        let mut u = vec![0.0; size];
        for node in f..n {
            u[index(l, node)] = edge.q.value_at(node as f64 * h);
        }
        low_rank.push((u, v));
    }
    low_rank.insert(0, (vertex_u, vertex));

    Ok(FdMatrix {
        size,
        h,
        n,
        sub,
        diag,
        sup,
        offsets,
        low_rank,
    })
}

impl FdMatrix {
    pub fn rank(&self) -> usize {
        self.low_rank.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * x[i + 1];
            }
            y[i] = acc;
        }
        for (u, v) in &self.low_rank {
            let s: f64 = v.iter().map(|&(c, w)| w * x[c]).sum();
            if s != 0.0 {
                for (yi, ui) in y.iter_mut().zip(u) {
                    *yi += ui * s;
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i > 0 {
                m[(i, i - 1)] = self.sub[i];
            }
            if i + 1 < n {
                m[(i, i + 1)] = self.sup[i];
            }
        }
        for (u, v) in &self.low_rank {
            for (i, &ui) in u.iter().enumerate() {
                if ui != 0.0 {
                    for &(c, w) in v {
                        m[(i, c)] += ui * w;
                    }
                }
            }
        }
        m
    }

    /// Thomas solve of `(T - σI) x = b` edge by edge.
    fn tridiagonal_solve(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.size];
        for w in self.offsets.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let m = hi - lo;
            let mut c = vec![0.0; m];
            let mut d = vec![0.0; m];
            for i in 0..m {
                let g = lo + i;
                let a = if i > 0 { self.sub[g] } else { 0.0 };
                let denom = self.diag[g] - sigma - if i > 0 { a * c[i - 1] } else { 0.0 };
                c[i] = if i + 1 < m { self.sup[g] / denom } else { 0.0 };
                d[i] = (b[g] - if i > 0 { a * d[i - 1] } else { 0.0 }) / denom;
            }
            for i in (0..m).rev() {
                x[lo + i] = d[i] - if i + 1 < m { c[i] * x[lo + i + 1] } else { 0.0 };
            }
        }
        x
    }
}

/// Shifted solver `(A - σI)⁻¹` via the Woodbury identity.
struct ShiftedSolver<'a> {
    mat: &'a FdMatrix,
    sigma: f64,
    z: Vec<Vec<f64>>,
    cap: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> ShiftedSolver<'a> {
    fn new(mat: &'a FdMatrix, sigma: f64) -> Result<Self> {
        let r = mat.rank();
        let z: Vec<Vec<f64>> = mat
            .low_rank
            .iter()
            .map(|(u, _)| mat.tridiagonal_solve(sigma, u))
            .collect();
        let cap = DMatrix::from_fn(r, r, |i, j| {
            let v = &mat.low_rank[i].1;
            let vz: f64 = v.iter().map(|&(c, w)| w * z[j][c]).sum();
            if i == j {
                1.0 + vz
            } else {
                vz
            }
        });
        if !cap.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric("FD shift lands on a tridiagonal eigenvalue".into()));
        }
        Ok(Self {
            mat,
            sigma,
            z,
            cap: cap.lu(),
        })
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.mat.tridiagonal_solve(self.sigma, b);
        let r = self.mat.rank();
        let vy = DVector::from_iterator(
            r,
            self.mat
                .low_rank
                .iter()
                .map(|(_, v)| v.iter().map(|&(c, w)| w * y[c]).sum::<f64>()),
        );
        let t = self
            .cap
            .solve(&vy)
            .ok_or_else(|| Error::Numeric("singular Woodbury capacitance".into()))?;
        for (j, zj) in self.z.iter().enumerate() {
            let tj = t[j];
            for (yi, zi) in y.iter_mut().zip(zj) {
                *yi -= tj * zi;
            }
        }
        Ok(y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdSpectrum {
    /// Real parts, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues whose imaginary part exceeded the truncation threshold.
    pub complex: Vec<(f64, f64)>,
    pub iterations: usize,
}

/// Smallest `count` eigenvalues by shift-invert subspace iteration.
pub fn fd_spectrum(mat: &FdMatrix, graph: &GraphSpec, count: usize) -> Result<FdSpectrum> {
    fd_spectrum_seeded(mat, graph, count, DEFAULT_SEED)
}

pub fn fd_spectrum_seeded(mat: &FdMatrix, graph: &GraphSpec, count: usize, seed: u64) -> Result<FdSpectrum> {
    if count == 0 || count > MAX_COUNT {
        return Err(Error::InvalidArgument(format!("count must lie in 1..={MAX_COUNT}, got {count}")));
    }
    let n = mat.size;
    let block = (count + 12).min(n);
    let q_floor = graph
        .edges()
        .iter()
        .filter(|e| e.is_ordinary())
        .map(|e| e.q.grid().iter().cloned().fold(f64::INFINITY, f64::min))
        .fold(0.0f64, f64::min);
    let sigma = q_floor - 1.0;
    let solver = ShiftedSolver::new(mat, sigma)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::<f64>::from_fn(n, block, |_, _| rng.gen_range(-1.0..1.0));
    let mut previous: Vec<Complex64> = Vec::new();
    let mut ritz: Vec<Complex64> = Vec::new();
    let mut iterations = 0;
    for it in 1..=400 {
        iterations = it;
        let cols: Vec<Vec<f64>> = (0..block)
            .into_par_iter()
            .map(|j| solver.solve(x.column(j).as_slice()))
            .collect::<Result<_>>()?;
        let y = DMatrix::from_fn(n, block, |i, j| cols[j][i]);
        let q = y.qr().q();
        let aq_cols: Vec<Vec<f64>> = (0..block)
            .into_par_iter()
            .map(|j| mat.matvec(q.column(j).as_slice()))
            .collect();
        let aq = DMatrix::from_fn(n, block, |i, j| aq_cols[j][i]);
        let hmat = q.transpose() * aq;
        let mut ev: Vec<Complex64> = hmat.complex_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        ev.truncate(count);
        x = q;
        let converged = previous.len() == ev.len()
            && ev
                .iter()
                .zip(&previous)
                .all(|(a, b)| (a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        previous = ev.clone();
        ritz = ev;
        if converged {
            break;
        }
    }
    if ritz.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numeric("FD eigensolver produced non-finite values".into()));
    }
    let scale = ritz.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut eigenvalues = Vec::with_capacity(count);
    let mut complex = Vec::new();
    for z in &ritz {
        if z.im.abs() > 1e-8 * scale {
            complex.push((z.re, z.im));
        }
        eigenvalues.push(z.re);
    }
    Ok(FdSpectrum {
        eigenvalues,
        complex,
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub pairs: Vec<(f64, f64)>,
    pub max_rel_deviation: f64,
    pub unmatched_analytic: Vec<f64>,
    pub unmatched_fd: Vec<f64>,
    pub tol: f64,
    pub passed: bool,
}

/// Greedy nearest matching of two eigenvalue lists (with multiplicity).
pub fn compare_spectra(analytic: &[f64], fd: &[f64], tol: f64) -> Result<ComparisonReport> {
    if analytic.is_empty() || fd.is_empty() {
        return Err(Error::InvalidArgument("both spectra must be nonempty".into()));
    }
    let mut a = analytic.to_vec();
    a.sort_by(f64::total_cmp);
    let mut used = vec![false; fd.len()];
    let mut pairs = Vec::new();
    let mut unmatched_analytic = Vec::new();
    let mut max_rel = 0.0f64;
    for &x in &a {
        let best = fd
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .min_by(|(_, u), (_, v)| (*u - x).abs().total_cmp(&(*v - x).abs()));
        match best {
            Some((i, &y)) => {
                let rel = (y - x).abs() / x.abs().max(1e-300);
                if rel <= tol {
                    used[i] = true;
                    pairs.push((x, y));
                    max_rel = max_rel.max(rel);
                } else {
                    unmatched_analytic.push(x);
                    max_rel = max_rel.max(rel);
                }
            }
            None => unmatched_analytic.push(x),
        }
    }
    let unmatched_fd: Vec<f64> = fd
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(v, _)| *v)
        .collect();
    let passed = unmatched_analytic.is_empty();
    Ok(ComparisonReport {
        pairs,
        max_rel_deviation: max_rel,
        unmatched_analytic,
        unmatched_fd,
        tol,
        passed,
    })
}

/// Observed order `log2(e_coarse / e_fine)` for a grid refinement by 2.
pub fn richardson_order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}
