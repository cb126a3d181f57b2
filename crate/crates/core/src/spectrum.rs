//! Real zeros of `ρ ↦ Δ_G(ρ²)`, their branch structure, and the two
//! subsequences used by the inverse solver.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::delta_graph_rho;
use crate::potential::GraphSpec;

/// Scans start here; `λ = 0` is never reported.
pub const SCAN_START: f64 = 0.05;

const BISECT_WIDTH: f64 = 1e-12;
const CLUSTER_TOL: f64 = 1e-8;
const MULTIPLICITY_DELTA: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub rho: f64,
    pub multiplicity: usize,
    /// Found at a local extremum of `Δ` without a sign change.
    pub cluster: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootScan {
    pub roots: Vec<Root>,
    pub rho_max: f64,
    pub step: f64,
    /// Local minima of `|Δ|` that came close to zero but were rejected.
    pub anomalies: usize,
}

impl RootScan {
    /// Roots repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.roots
            .iter()
            .flat_map(|r| std::iter::repeat(r.rho).take(r.multiplicity))
            .collect()
    }

    pub fn count_with_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// `branches[j][k-1] = ρ_{k,j}`; branch 0 is the near-half-integer one.
    pub branches: Vec<Vec<f64>>,
    pub cluster_flags: Vec<Vec<bool>>,
    pub a_l: f64,
    pub k_max: usize,
}

impl Spectrum {
    pub fn p(&self) -> usize {
        self.branches.len()
    }

    /// `(k, j, ρ, cluster)` in window order.
    pub fn entries(&self) -> Vec<(usize, usize, f64, bool)> {
        let mut out = Vec::with_capacity(self.k_max * self.p());
        for k in 1..=self.k_max {
            for j in 0..self.p() {
                out.push((k, j, self.branches[j][k - 1], self.cluster_flags[j][k - 1]));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenSubsequences {
    /// `μ_{k,0} ≈ k`.
    pub mu0: Vec<f64>,
    /// `μ_{k,1} ≈ k - 1/2`.
    pub mu1: Vec<f64>,
    /// Spectrum branches that supplied `mu0` and `mu1`.
    pub provenance: (usize, usize),
}

impl EigenSubsequences {
    pub fn k_max(&self) -> usize {
        self.mu0.len()
    }

    pub fn truncated(&self, k: usize) -> Self {
        Self {
            mu0: self.mu0[..k.min(self.mu0.len())].to_vec(),
            mu1: self.mu1[..k.min(self.mu1.len())].to_vec(),
            provenance: self.provenance,
        }
    }
}

/// `A_l / (pπ)`: the `1/k` coefficient of the half-integer branch.
fn shift_coefficient(graph: &GraphSpec) -> f64 {
    graph.ordinary_mean_sum() / (graph.p() as f64 * PI)
}

/// Leading-order location of `ρ_{k,j}`.
///
/// The half-integer branch is `k - 1/2 + A_l/(pπk)`, where `A_l` sums
/// `½∫q` over ordinary edges.
pub fn asymptotic_guess(graph: &GraphSpec, k: usize, j: usize) -> f64 {
    let k = k.max(1) as f64;
    if j == 0 {
        k - 0.5 + shift_coefficient(graph) / k
    } else {
        k
    }
}

pub fn default_step(p: usize) -> f64 {
    (1.0 / (40.0 * p as f64)).min(0.01)
}

fn eval(graph: &GraphSpec, rho: f64) -> Result<f64> {
    delta_graph_rho(graph, rho)
}

/// Bisection down to width `1e-12` followed by one secant step.
pub fn refine_root(graph: &GraphSpec, bracket: (f64, f64)) -> Result<f64> {
    let (mut a, mut b) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    let mut fa = eval(graph, a)?;
    let mut fb = eval(graph, b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { a, b, fa, fb });
    }
    while b - a > BISECT_WIDTH {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = eval(graph, mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    let mid = 0.5 * (a + b);
    let secant = b - fb * (b - a) / (fb - fa);
    if secant.is_finite() && secant > a && secant < b {
        let fs = eval(graph, secant)?;
        let fm = eval(graph, mid)?;
        if fs.abs() <= fm.abs() {
            return Ok(secant);
        }
        return Ok(mid);
    }
    Ok(mid)
}

/// Golden-section minimization of `sign * Δ` on `[a, b]`.
fn golden_extremum(graph: &GraphSpec, a: f64, b: f64, sign: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = sign * eval(graph, c)?;
    let mut fd = sign * eval(graph, d)?;
    while b - a > BISECT_WIDTH {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sign * eval(graph, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sign * eval(graph, d)?;
        }
        if fc < 0.0 || fd < 0.0 {
            break;
        }
    }
    Ok(if fc < fd { (c, sign * fc) } else { (d, sign * fd) })
}

fn estimate_multiplicity(graph: &GraphSpec, rho: f64) -> Result<usize> {
    let f1 = eval(graph, rho + MULTIPLICITY_DELTA)?.abs();
    let f2 = eval(graph, rho + 2.0 * MULTIPLICITY_DELTA)?.abs();
    if f1 == 0.0 || f2 == 0.0 {
        return Ok(1);
    }
    Ok((f2 / f1).log2().round().max(1.0) as usize)
}

/// Nearest integer to `m` with the given parity, clamped to `[lo, hi]`.
fn fit_parity(m: usize, odd: bool, lo: usize, hi: usize) -> usize {
    let mut m = m.clamp(lo, hi.max(lo));
    if (m % 2 == 1) != odd {
        m = if m + 1 <= hi { m + 1 } else { m.saturating_sub(1).max(lo) };
    }
    m
}

enum Candidate {
    Bracket(f64, f64),
    Extremum { lo: f64, hi: f64, sign: f64, scale: f64 },
    Exact(f64),
}

/// Real roots of `Δ_G(ρ²)` on `(SCAN_START, rho_max]`.
pub fn scan_real_roots(graph: &GraphSpec, rho_max: f64, step: f64) -> Result<RootScan> {
    if !(step > 0.0 && step <= 0.01) {
        return Err(Error::InvalidArgument(format!(
            "scan step must lie in (0, 0.01], got {step}"
        )));
    }
    if !rho_max.is_finite() || rho_max <= SCAN_START {
        return Err(Error::InvalidArgument(format!(
            "rho_max must exceed {SCAN_START}, got {rho_max}"
        )));
    }
    let n = ((rho_max - SCAN_START) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|i| (SCAN_START + i as f64 * step).min(rho_max))
        .collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&r| eval(graph, r))
        .collect::<Result<_>>()?;

    let window = (0.5 / step).ceil() as usize;
    let local_scale = |i: usize| {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n);
        values[lo..=hi].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };

    let mut candidates = Vec::new();
    for i in 0..=n {
        let f = values[i];
        if f == 0.0 {
            candidates.push(Candidate::Exact(grid[i]));
            continue;
        }
        if i < n && f * values[i + 1] < 0.0 {
            candidates.push(Candidate::Bracket(grid[i], grid[i + 1]));
        }
        if i > 0 && i < n {
            let (fl, fr) = (values[i - 1], values[i + 1]);
            let same_sign = fl * f > 0.0 && f * fr > 0.0;
            if same_sign && f.abs() < fl.abs() && f.abs() <= fr.abs() {
                candidates.push(Candidate::Extremum {
                    lo: grid[i - 1],
                    hi: grid[i + 1],
                    sign: f.signum(),
                    scale: local_scale(i),
                });
            }
        }
    }

    let p = graph.p();
    let found: Vec<(Vec<Root>, usize)> = candidates
        .par_iter()
        .map(|cand| -> Result<(Vec<Root>, usize)> {
            match *cand {
                Candidate::Exact(r) => {
                    let m = estimate_multiplicity(graph, r)?;
                    Ok((vec![Root { rho: r, multiplicity: m.min(p.max(2) - 1).max(1), cluster: false }], 0))
                }
                Candidate::Bracket(a, b) => {
                    let r = refine_root(graph, (a, b))?;
                    let m = fit_parity(estimate_multiplicity(graph, r)?, true, 1, p.max(2) - 1);
                    Ok((vec![Root { rho: r, multiplicity: m, cluster: false }], 0))
                }
                Candidate::Extremum { lo, hi, sign, scale } => {
                    let (x, fx) = golden_extremum(graph, lo, hi, sign)?;
                    if fx * sign < 0.0 {
                        let r1 = refine_root(graph, (lo, x))?;
                        let r2 = refine_root(graph, (x, hi))?;
                        Ok((
                            vec![
                                Root { rho: r1, multiplicity: 1, cluster: false },
                                Root { rho: r2, multiplicity: 1, cluster: false },
                            ],
                            0,
                        ))
                    } else if fx.abs() < CLUSTER_TOL * scale {
                        let m = fit_parity(estimate_multiplicity(graph, x)?, false, 2, p.max(3) - 1);
                        Ok((vec![Root { rho: x, multiplicity: m, cluster: true }], 0))
                    } else if fx.abs() < 1e-3 * scale {
                        Ok((Vec::new(), 1))
                    } else {
                        Ok((Vec::new(), 0))
                    }
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut roots: Vec<Root> = Vec::new();
    let mut anomalies = 0;
    for (rs, a) in found {
        roots.extend(rs);
        anomalies += a;
    }
    roots.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    roots.dedup_by(|b, a| (b.rho - a.rho).abs() < 1e-9);
    Ok(RootScan {
        roots,
        rho_max,
        step,
        anomalies,
    })
}

/// Upper edge of window `k`: the middle of the widest root gap in
/// `[k + 0.1, k + 0.6]`, the stretch between the near-integer roots and the
/// next half-integer root.
fn window_upper(roots: &[Root], k: usize) -> f64 {
    let lo = k as f64 + 0.1;
    let hi = k as f64 + 0.6;
    let mut pts = vec![lo];
    pts.extend(roots.iter().map(|r| r.rho).filter(|&r| r > lo && r < hi));
    pts.push(hi);
    let mut best = (0.0, 0.5 * (lo + hi));
    for w in pts.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], 0.5 * (w[0] + w[1]));
        }
    }
    best.1
}

/// Sorts roots into the `p` branches, one window per `k`.
pub fn classify_spectrum(scan: &RootScan, graph: &GraphSpec) -> Result<Spectrum> {
    let p = graph.p();
    let mut k_max = 0;
    while (k_max + 1) as f64 + 0.6 <= scan.rho_max {
        k_max += 1;
    }
    let mut branches = vec![Vec::with_capacity(k_max); p];
    let mut flags = vec![Vec::with_capacity(k_max); p];
    for k in 1..=k_max {
        let lo = if k == 1 { 0.0 } else { window_upper(&scan.roots, k - 1) };
        let hi = window_upper(&scan.roots, k);
        let inside: Vec<&Root> = scan
            .roots
            .iter()
            .filter(|r| r.rho > lo && r.rho <= hi)
            .collect();
        let found: usize = inside.iter().map(|r| r.multiplicity).sum();
        if found != p {
            return Err(Error::Classification {
                window: k,
                lo,
                hi,
                found,
                expected: p,
                roots: inside.iter().map(|r| r.rho).collect(),
            });
        }
        let target = asymptotic_guess(graph, k, 0);
        let (half_idx, _) = inside
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, r)| {
                let d = (r.rho - target).abs();
                if d < best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        let mut rest: Vec<(f64, bool)> = Vec::with_capacity(p - 1);
        for (i, r) in inside.iter().enumerate() {
            let copies = if i == half_idx { r.multiplicity - 1 } else { r.multiplicity };
            rest.extend(std::iter::repeat((r.rho, r.cluster)).take(copies));
        }
        rest.sort_by(|a, b| a.0.total_cmp(&b.0));
        branches[0].push(inside[half_idx].rho);
        flags[0].push(inside[half_idx].cluster);
        for (j, (rho, cl)) in rest.into_iter().enumerate() {
            branches[j + 1].push(rho);
            flags[j + 1].push(cl);
        }
    }
    Ok(Spectrum {
        branches,
        cluster_flags: flags,
        a_l: graph.ordinary_mean_sum(),
        k_max,
    })
}

/// `mu0` from branch 1 and `mu1` from branch 0.
pub fn extract_subsequences(spec: &Spectrum) -> Result<EigenSubsequences> {
    if spec.k_max == 0 || spec.p() < 2 {
        return Err(Error::InvalidArgument("spectrum has no complete window".into()));
    }
    for (seq, branch) in [(0usize, 1usize), (1, 0)] {
        if let Some(k) = spec.branches[branch].iter().position(|&r| r.abs() < 1e-12) {
            return Err(Error::ZeroEigenvalue { sequence: seq, k: k + 1 });
        }
    }
    Ok(EigenSubsequences {
        mu0: spec.branches[1].clone(),
        mu1: spec.branches[0].clone(),
        provenance: (1, 0),
    })
}

/// Scan, classify and keep the first `k_max` windows.
pub fn forward_spectrum(graph: &GraphSpec, k_max: usize, step: Option<f64>) -> Result<Spectrum> {
    let step = step.unwrap_or_else(|| default_step(graph.p()));
    let scan = scan_real_roots(graph, k_max as f64 + 1.0, step)?;
    let mut spec = classify_spectrum(&scan, graph)?;
    if spec.k_max < k_max {
        return Err(Error::Numeric(format!(
            "only {} complete windows below rho_max = {}",
            spec.k_max, scan.rho_max
        )));
    }
    for b in spec.branches.iter_mut() {
        b.truncate(k_max);
    }
    for f in spec.cluster_flags.iter_mut() {
        f.truncate(k_max);
    }
    spec.k_max = k_max;
    Ok(spec)
}
