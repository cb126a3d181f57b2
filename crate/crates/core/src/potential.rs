//! Edge potentials, edge and graph descriptions, and the oscillatory
//! transforms
//!
//! ```text
//! w_q(x, rho)  = ∫_0^x q(t) sin(rho (x - t)) / rho dt
//! w_q'(x, rho) = ∫_0^x q(t) cos(rho (x - t)) dt
//! ```
//!
//! Potentials live on a uniform grid `x_i = i pi / M` and are interpolated
//! linearly between nodes. The transforms integrate that interpolant
//! against the trigonometric weight exactly (product quadrature), cell by
//! cell, so their accuracy does not degrade as `rho` grows.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sinc, sinc3, Scalar};

/// Default number of grid cells on `[0, pi]`.
pub const DEFAULT_M: usize = 2048;
/// Smallest admissible grid.
pub const MIN_M: usize = 64;

/// A real potential on `(0, pi)` sampled at `M + 1` uniform nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialRecord", into = "PotentialRecord")]
pub struct PotentialFn {
    grid: Vec<f64>,
    sine_coeffs: Option<Vec<f64>>,
}

/// On-disk form: `{"grid": [...], "sine_coeffs": [...] | null, "M": int}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialRecord {
    grid: Vec<f64>,
    sine_coeffs: Option<Vec<f64>>,
    #[serde(rename = "M")]
    m: usize,
}

impl TryFrom<PotentialRecord> for PotentialFn {
    type Error = Error;

    fn try_from(rec: PotentialRecord) -> Result<Self> {
        if rec.grid.len() != rec.m + 1 {
            return Err(Error::input(
                "grid",
                format!("expected M + 1 = {} samples, found {}", rec.m + 1, rec.grid.len()),
            ));
        }
        let q = PotentialFn::from_samples(rec.grid)?;
        match rec.sine_coeffs {
            None => Ok(q),
            Some(b) => {
                let regenerated = PotentialFn::from_sine_amplitudes(b, q.m())?;
                let scale = 1.0 + regenerated.max_abs();
                let dev = regenerated
                    .grid
                    .iter()
                    .zip(&q.grid)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if dev > 1e-12 * scale {
                    return Err(Error::input(
                        "grid",
                        format!("grid disagrees with sine_coeffs by {dev:e}"),
                    ));
                }
                Ok(regenerated)
            }
        }
    }
}

impl From<PotentialFn> for PotentialRecord {
    fn from(q: PotentialFn) -> Self {
        PotentialRecord {
            m: q.m(),
            grid: q.grid,
            sine_coeffs: q.sine_coeffs,
        }
    }
}

impl PotentialFn {
    /// Wraps raw grid samples. `samples.len() - 1` is the cell count `M`.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < MIN_M + 1 {
            return Err(Error::input(
                "M",
                format!("grid needs M >= {MIN_M}, got {}", samples.len().saturating_sub(1)),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::input("grid", format!("sample {i} is not finite")));
        }
        Ok(PotentialFn {
            grid: samples,
            sine_coeffs: None,
        })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = PI / m as f64;
        Self::from_samples((0..=m).map(|i| f(i as f64 * h)).collect())
    }

    pub fn constant(m: usize, value: f64) -> Result<Self> {
        Self::from_fn(m, |_| value)
    }

    pub fn zero(m: usize) -> Result<Self> {
        Self::constant(m, 0.0)
    }

    /// `q(t) = sum_n (2 c_n / pi) sin n(pi - t)` for `n = 1..=D`.
    pub fn from_sine_series(coeffs: &[f64], m: usize) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::input("sine_coeffs", "need at least one coefficient"));
        }
        let amplitudes = coeffs.iter().map(|c| 2.0 * c / PI).collect();
        Self::from_sine_amplitudes(amplitudes, m)
    }

    /// `q(t) = sum_n b_n sin n(pi - t)`; `b` is stored as `sine_coeffs`.
    pub fn from_sine_amplitudes(b: Vec<f64>, m: usize) -> Result<Self> {
        if m < MIN_M {
            return Err(Error::input("M", format!("grid needs M >= {MIN_M}, got {m}")));
        }
        let h = PI / m as f64;
        let grid = (0..=m)
            .map(|i| {
                let t = i as f64 * h;
                b.iter()
                    .enumerate()
                    .map(|(n, bn)| bn * ((n + 1) as f64 * (PI - t)).sin())
                    .sum()
            })
            .collect();
        let mut q = Self::from_samples(grid)?;
        q.sine_coeffs = Some(b);
        Ok(q)
    }

    /// Number of grid cells.
    pub fn m(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn h(&self) -> f64 {
        PI / self.m() as f64
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Amplitudes `b_n` of `q(t) = sum b_n sin n(pi - t)`, when the
    /// potential was built from a sine series.
    pub fn sine_coeffs(&self) -> Option<&[f64]> {
        self.sine_coeffs.as_deref()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.h();
        (0..self.grid.len()).map(move |i| i as f64 * h)
    }

    pub fn max_abs(&self) -> f64 {
        self.grid.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.grid.iter().all(|&v| v == 0.0)
    }

    /// Piecewise-linear interpolant at `x`, clamped to `[0, pi]`.
    pub fn value_at(&self, x: f64) -> f64 {
        let m = self.m();
        let s = (x.clamp(0.0, PI) / self.h()).min(m as f64);
        let i = (s.floor() as usize).min(m - 1);
        let theta = s - i as f64;
        self.grid[i] * (1.0 - theta) + self.grid[i + 1] * theta
    }

    /// `omega = (1/2) ∫_0^pi q`, trapezoid rule.
    pub fn mean(&self) -> f64 {
        0.5 * self.integral()
    }

    /// `∫_0^pi q`, trapezoid rule (exact for the interpolant).
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let inner: f64 = g[1..g.len() - 1].iter().sum();
        self.h() * (inner + 0.5 * (g[0] + g[g.len() - 1]))
    }

    /// `c_n = ∫_0^pi q(t) sin n(pi - t) dt` for `n = 1..=count`.
    pub fn sine_projection(&self, count: usize) -> Vec<f64> {
        let h = self.h();
        let last = self.m();
        (1..=count)
            .map(|n| {
                let n = n as f64;
                self.grid
                    .iter()
                    .enumerate()
                    .map(|(i, qv)| {
                        let w = if i == 0 || i == last { 0.5 } else { 1.0 };
                        w * qv * (n * (PI - i as f64 * h)).sin()
                    })
                    .sum::<f64>()
                    * h
            })
            .collect()
    }

    /// L2(0, pi) norm of the interpolant, trapezoid rule on `q^2`.
    pub fn l2_norm(&self) -> f64 {
        let g = &self.grid;
        let inner: f64 = g[1..g.len() - 1].iter().map(|v| v * v).sum();
        (self.h() * (inner + 0.5 * (g[0] * g[0] + g[g.len() - 1] * g[g.len() - 1]))).sqrt()
    }

    /// L2 distance to another potential, sampled on the finer of the two grids.
    pub fn l2_distance(&self, other: &PotentialFn) -> f64 {
        let m = self.m().max(other.m());
        let h = PI / m as f64;
        let sum: f64 = (0..=m)
            .map(|i| {
                let x = i as f64 * h;
                let d = self.value_at(x) - other.value_at(x);
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                w * d * d
            })
            .sum();
        (h * sum).sqrt()
    }

    /// Both transforms `(w_q(x, rho), w_q'(x, rho))` in one pass.
    pub fn transforms<T: Scalar>(&self, x: f64, rho: T) -> (T, T) {
        let x = x.clamp(0.0, PI);
        let h = self.h();
        let m = self.m();
        let full = ((x / h).floor() as usize).min(m);

        let mut w = T::zero();
        let mut wp = T::zero();
        if full > 0 {
            let half = 0.5 * h;
            let z = rho * half;
            let sz = sinc(z) * (2.0 * half);
            let gz = sinc3(z) * (2.0 * half * half * half);
            let rgz = rho * gz;
            for i in 0..full {
                let (qa, qb) = (self.grid[i], self.grid[i + 1]);
                let c = x - (i as f64 + 0.5) * h;
                let mean = 0.5 * (qa + qb);
                let slope = (qb - qa) / h;
                let (s, co, s_over) = rotated(rho, c);
                let level = sz * mean;
                w += s_over * level - co * gz * slope;
                wp += co * level + s * rgz * slope;
            }
        }
        let t0 = full as f64 * h;
        if full < m && x - t0 > 1e-15 {
            let (dw, dwp) = cell_transform(t0, x, self.grid[full], self.value_at(x), x, rho);
            w += dw;
            wp += dwp;
        }
        (w, wp)
    }

    pub fn wq<T: Scalar>(&self, x: f64, rho: T) -> T {
        self.transforms(x, rho).0
    }

    pub fn wq_prime<T: Scalar>(&self, x: f64, rho: T) -> T {
        self.transforms(x, rho).1
    }
}

/// `(sin(rho c), cos(rho c), sin(rho c) / rho)`.
#[inline]
fn rotated<T: Scalar>(rho: T, c: f64) -> (T, T, T) {
    let rc = rho * c;
    let (s, co) = rc.sin_cos();
    let s_over = if rc.abs() < 1e-4 { sinc(rc) * c } else { s / rho };
    (s, co, s_over)
}

/// Exact contribution of one linear segment `[ta, tb]` (values `qa`, `qb`)
/// to `(∫ q sin(rho(x-t))/rho dt, ∫ q cos(rho(x-t)) dt)`.
pub(crate) fn cell_transform<T: Scalar>(
    ta: f64,
    tb: f64,
    qa: f64,
    qb: f64,
    x: f64,
    rho: T,
) -> (T, T) {
    let len = tb - ta;
    if len <= 0.0 {
        return (T::zero(), T::zero());
    }
    let half = 0.5 * len;
    let c = x - 0.5 * (ta + tb);
    let mean = 0.5 * (qa + qb);
    let slope = (qb - qa) / len;
    let z = rho * half;
    let level = sinc(z) * (2.0 * half * mean);
    let gz = sinc3(z) * (2.0 * half * half * half * slope);
    let (s, co, s_over) = rotated(rho, c);
    (s_over * level - co * gz, co * level + s * rho * gz)
}

/// `w_q(x, rho)` for complex `rho`.
pub fn wq_transform(q: &PotentialFn, x: f64, rho: Complex64) -> Result<Complex64> {
    check_rho(rho)?;
    Ok(q.wq(x, rho))
}

/// `w_q'(x, rho)` for complex `rho`.
pub fn wq_prime_transform(q: &PotentialFn, x: f64, rho: Complex64) -> Result<Complex64> {
    check_rho(rho)?;
    Ok(q.wq_prime(x, rho))
}

pub fn potential_from_sine_series(coeffs: &[f64], m: usize) -> Result<PotentialFn> {
    PotentialFn::from_sine_series(coeffs, m)
}

pub fn potential_mean(q: &PotentialFn) -> f64 {
    q.mean()
}

fn check_rho(rho: Complex64) -> Result<()> {
    if rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rho must be finite, got {rho}")))
    }
}

/// Derivative order of the boundary condition at the outer vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Alpha {
    /// `y(0) = 0`
    #[default]
    Dirichlet,
    /// `y'(0) = 0`
    Neumann,
}

impl TryFrom<u8> for Alpha {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Alpha::Dirichlet),
            1 => Ok(Alpha::Neumann),
            _ => Err(format!("alpha must be 0 or 1, got {v}")),
        }
    }
}

impl From<Alpha> for u8 {
    fn from(a: Alpha) -> u8 {
        match a {
            Alpha::Dirichlet => 0,
            Alpha::Neumann => 1,
        }
    }
}

/// One edge: potential, frozen arguments, boundary order at the outer vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub q: PotentialFn,
    #[serde(default)]
    pub frozen_args: Vec<f64>,
    #[serde(default)]
    pub alpha: Alpha,
}

impl EdgeSpec {
    pub fn new(q: PotentialFn, frozen_args: Vec<f64>, alpha: Alpha) -> Result<Self> {
        validate_frozen_args(&frozen_args)?;
        Ok(EdgeSpec {
            q,
            frozen_args,
            alpha,
        })
    }

    pub fn ordinary(q: PotentialFn) -> Self {
        EdgeSpec {
            q,
            frozen_args: Vec::new(),
            alpha: Alpha::Dirichlet,
        }
    }

    pub fn frozen(q: PotentialFn, frozen_args: Vec<f64>) -> Result<Self> {
        Self::new(q, frozen_args, Alpha::Dirichlet)
    }

    pub fn is_ordinary(&self) -> bool {
        self.frozen_args.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        validate_frozen_args(&self.frozen_args)
    }
}

/// Checks `0 < a_1 < ... < a_n < pi`.
pub fn validate_frozen_args(args: &[f64]) -> Result<()> {
    for (k, &a) in args.iter().enumerate() {
        if !(a > 0.0 && a < PI) {
            return Err(Error::input(
                format!("frozen_args[{k}]"),
                format!("frozen argument must lie in open (0,π), got {a}"),
            ));
        }
        if k > 0 && a <= args[k - 1] {
            return Err(Error::input(
                format!("frozen_args[{k}]"),
                "frozen arguments must be strictly increasing",
            ));
        }
    }
    Ok(())
}

/// A star graph of `p >= 2` edges of length `pi`; the last edge is the
/// one whose potential is unknown in the inverse problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct GraphSpec {
    edges: Vec<EdgeSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    edges: Vec<EdgeSpec>,
}

impl TryFrom<GraphRecord> for GraphSpec {
    type Error = Error;
    fn try_from(rec: GraphRecord) -> Result<Self> {
        GraphSpec::new(rec.edges)
    }
}

impl From<GraphSpec> for GraphRecord {
    fn from(g: GraphSpec) -> Self {
        GraphRecord { edges: g.edges }
    }
}

impl GraphSpec {
    pub fn new(edges: Vec<EdgeSpec>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::input(
                "edges",
                format!("a star graph needs p >= 2 edges, got {}", edges.len()),
            ));
        }
        for (j, e) in edges.iter().enumerate() {
            e.validate().map_err(|err| match err {
                Error::Input { key, message } => Error::input(format!("edges[{j}].{key}"), message),
                other => other,
            })?;
        }
        Ok(GraphSpec { edges })
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    pub fn p(&self) -> usize {
        self.edges.len()
    }

    pub fn unknown_edge_index(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn unknown_edge(&self) -> &EdgeSpec {
        &self.edges[self.unknown_edge_index()]
    }

    pub fn known_edges(&self) -> &[EdgeSpec] {
        &self.edges[..self.unknown_edge_index()]
    }

    /// `A_l`: sum of `omega_j` over ordinary edges.
    pub fn ordinary_mean_sum(&self) -> f64 {
        self.edges
            .iter()
            .filter(|e| e.is_ordinary())
            .map(|e| e.q.mean())
            .sum()
    }

    /// Total frozen arguments across all edges.
    pub fn frozen_count(&self) -> usize {
        self.edges.iter().map(|e| e.frozen_args.len()).sum()
    }
}
