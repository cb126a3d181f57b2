//! Reconstruction of the potential on the last edge from two eigenvalue
//! subsequences.
//!
//! 1. `g_{k,j} = -Σ_l d01_l / d00_l` at `μ_{k,j}²` over the known edges.
//! 2. Truncated Galerkin solve for the kernels `N_p`, `W_p`.
//! 3. `c_n = ∫ N_p cos nx dx / Σ_k sin n a_k`.
//! 4. `q_p(t) = Σ (2 c_n / π) sin n(π - t)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edge::edge_values;
use crate::error::{Error, Result};
use crate::kernel::KernelPair;
use crate::potential::{validate_frozen_args, Alpha, EdgeSpec, PotentialFn};
use crate::scalar::sinc;
use crate::spectrum::EigenSubsequences;

/// Trial functions for `W_p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WBasis {
    /// `sin((m - 1/2) x)`, `m = 1..=K`.
    #[default]
    HalfInteger,
    /// `sin(m x)`, `m = 1..=K`.
    Integer,
}

impl WBasis {
    fn frequency(self, m: usize) -> f64 {
        match self {
            WBasis::HalfInteger => m as f64 - 0.5,
            WBasis::Integer => m as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseConfig {
    /// Eigenvalue pairs used; all available when unset.
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "K_min")]
    pub k_min: usize,
    /// Fourier modes extracted; `K / 2` when unset.
    #[serde(rename = "D")]
    pub d: Option<usize>,
    /// Grid size of the reconstructed potential and kernel samples.
    #[serde(rename = "M")]
    pub m: usize,
    /// Assumption (i): reject `|d00| < tau_i (1 + |d01|)`.
    pub tau_i: f64,
    /// Assumption (i): reject `|g| < tau_g`.
    pub tau_g: f64,
    /// Assumption (iii): skip `|Σ sin n a_k| < tau_sin`; `1e-6 n_p` when unset.
    pub tau_sin: Option<f64>,
    pub raw_rows: bool,
    pub w_basis: WBasis,
    pub condition_warning: f64,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            k: None,
            k_min: 5,
            d: None,
            m: 1024,
            tau_i: 1e-10,
            tau_g: 1e-12,
            tau_sin: None,
            raw_rows: false,
            w_basis: WBasis::HalfInteger,
            condition_warning: 1e8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GSequences {
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    pub k: usize,
}

fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    num / den
}

impl GSequences {
    /// Log-log growth slopes of `|g0|` and `|g1|` over `k >= 10`.
    ///
    /// Individual `|g|` values oscillate, so each is first replaced by its
    /// running maximum over a window of five indices.
    pub fn growth_slopes(&self) -> Option<(f64, f64)> {
        if self.k < 20 {
            return None;
        }
        let envelope = |g: &[f64]| -> Vec<(f64, f64)> {
            (10..=self.k - 4)
                .step_by(5)
                .map(|k| {
                    let m = g[k - 1..k + 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    (k as f64 + 2.0, m)
                })
                .collect()
        };
        Some((loglog_slope(&envelope(&self.g0)), loglog_slope(&envelope(&self.g1))))
    }
}

/// Thresholds for [`g_sequence`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GThresholds {
    pub tau_i: f64,
    pub tau_g: f64,
}

impl Default for GThresholds {
    fn default() -> Self {
        Self {
            tau_i: 1e-10,
            tau_g: 1e-12,
        }
    }
}

fn g_value(known: &[EdgeSpec], mu: f64, k: usize, j: usize, th: GThresholds) -> Result<f64> {
    let mut g = 0.0;
    for (l, edge) in known.iter().enumerate() {
        let (d00, d01) = edge_values(edge, mu)?;
        if d00.abs() < th.tau_i * (1.0 + d01.abs()) || d00 == 0.0 {
            return Err(Error::AssumptionI {
                edge: l + 1,
                k,
                j,
                detail: format!("|d00| = {:.3e} at mu = {mu}", d00.abs()),
            });
        }
        g -= d01 / d00;
    }
    if !g.is_finite() || g.abs() < th.tau_g || g == 0.0 {
        return Err(Error::AssumptionI {
            edge: 0,
            k,
            j,
            detail: format!("g = {g:e} at mu = {mu}"),
        });
    }
    Ok(g)
}

fn check_known(known: &[EdgeSpec]) -> Result<()> {
    if known.is_empty() {
        return Err(Error::input("known_edges", "need at least one known edge"));
    }
    if known.iter().any(|e| e.alpha != Alpha::Dirichlet) {
        return Err(Error::input("known_edges", "inverse problem requires alpha = 0 on every edge"));
    }
    Ok(())
}

/// `g_{k,j}` for both subsequences with default thresholds.
pub fn g_sequence(known: &[EdgeSpec], mu: &EigenSubsequences) -> Result<GSequences> {
    g_sequence_with(known, mu, GThresholds::default())
}

pub fn g_sequence_with(known: &[EdgeSpec], mu: &EigenSubsequences, th: GThresholds) -> Result<GSequences> {
    check_known(known)?;
    let k = mu.mu0.len().min(mu.mu1.len());
    for (seq, v) in [(0, &mu.mu0), (1, &mu.mu1)] {
        if let Some(i) = v.iter().position(|&m| m == 0.0 || !m.is_finite()) {
            return Err(Error::ZeroEigenvalue { sequence: seq, k: i + 1 });
        }
    }
    let eval = |j: usize, v: &Vec<f64>| -> Result<Vec<f64>> {
        v[..k]
            .par_iter()
            .enumerate()
            .map(|(i, &m)| g_value(known, m, i + 1, j, th))
            .collect()
    };
    Ok(GSequences {
        g0: eval(0, &mu.mu0)?,
        g1: eval(1, &mu.mu1)?,
        k,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// `(cosine terms, sine terms)` = `(K + 1, K)`.
    pub basis_dims: (usize, usize),
    pub w_basis: WBasis,
}

/// `∫₀^π cos αx cos βx dx` and `∫₀^π sin αx sin βx dx`.
fn s_pi(gamma: f64) -> f64 {
    PI * sinc(gamma * PI)
}

fn cos_cos(a: f64, b: f64) -> f64 {
    0.5 * (s_pi(a - b) + s_pi(a + b))
}

fn sin_sin(a: f64, b: f64) -> f64 {
    0.5 * (s_pi(a - b) - s_pi(a + b))
}

/// Square `(2K+1)` system in the coefficients of `N = Σ_{m=0}^K n_m cos mx`
/// and `W = Σ_{m=1}^K w_m sin(ν_m x)`.
pub fn assemble_inverse_system(
    g: &GSequences,
    mu: &EigenSubsequences,
    k: usize,
    w_basis: WBasis,
    raw_rows: bool,
) -> Result<InverseSystem> {
    if k == 0 || k > g.k || k > mu.mu0.len() || k > mu.mu1.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds the available eigenvalue pairs ({})",
            g.k.min(mu.mu0.len()).min(mu.mu1.len())
        )));
    }
    let nc = k + 1;
    let size = 2 * k + 1;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut b = DVector::<f64>::zeros(size);
    let mut fill = |row: usize, mu: f64, cn: f64, cw: f64, rhs: f64| {
        for m in 0..nc {
            a[(row, m)] = cn * cos_cos(m as f64, mu);
        }
        for m in 1..=k {
            a[(row, nc + m - 1)] = cw * sin_sin(w_basis.frequency(m), mu);
        }
        b[row] = rhs;
    };
    for i in 0..k {
        let (m0, g0) = (mu.mu0[i], g.g0[i]);
        let (m1, g1) = (mu.mu1[i], g.g1[i]);
        if raw_rows {
            for (row, mu, g) in [(i, m0, g0), (k + i, m1, g1)] {
                let rhs = -g * (mu * PI).sin() / mu + (mu * PI).cos();
                fill(row, mu, g / (mu * mu), -1.0 / mu, rhs);
            }
        } else {
            let rhs0 = -m0 * (m0 * PI).sin() + m0 * m0 / g0 * (m0 * PI).cos();
            fill(i, m0, 1.0, -m0 / g0, rhs0);
            let rhs1 = -g1 * (m1 * PI).sin() + m1 * (m1 * PI).cos();
            fill(k + i, m1, g1 / m1, -1.0, rhs1);
        }
    }
    // ∫N = 0
    for m in 0..nc {
        a[(2 * k, m)] = s_pi(m as f64);
    }
    Ok(InverseSystem {
        matrix: a,
        rhs: b,
        basis_dims: (nc, k),
        w_basis,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub residual_norm: f64,
    pub condition_estimate: f64,
    pub coefficients: DVector<f64>,
}

/// QR solve of the Galerkin system; kernels are returned in trigonometric
/// form and sampled on `m + 1` nodes.
pub fn solve_kernel_pair(system: &InverseSystem, m: usize) -> Result<(KernelPair, SolveReport)> {
    let a = &system.matrix;
    let b = &system.rhs;
    let x = a
        .clone()
        .qr()
        .solve(b)
        .ok_or_else(|| Error::Numeric("inverse system is singular".into()))?;
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition_estimate = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let residual_norm = (a * &x - b).norm();
    let (nc, nw) = system.basis_dims;
    let n_terms = (0..nc).map(|i| (i as f64, x[i])).collect();
    let w_terms = (1..=nw)
        .map(|i| (system.w_basis.frequency(i), x[nc + i - 1]))
        .collect();
    let pair = KernelPair::from_trig(n_terms, w_terms, m);
    Ok((
        pair,
        SolveReport {
            residual_norm,
            condition_estimate,
            coefficients: x,
        },
    ))
}

fn sine_sum(args: &[f64], n: usize) -> f64 {
    args.iter().map(|&a| (n as f64 * a).sin()).sum()
}

/// `c_n` for `n = 1..=d`, with the modes whose denominator falls below
/// `tau_sin` zeroed and listed.
pub fn fourier_coefficients(
    pair: &KernelPair,
    frozen_args: &[f64],
    d: usize,
    tau_sin: f64,
) -> Result<(Vec<f64>, Vec<usize>)> {
    validate_frozen_args(frozen_args)?;
    if d == 0 {
        return Err(Error::InvalidArgument("need at least one Fourier mode".into()));
    }
    let mut c = Vec::with_capacity(d);
    let mut skipped = Vec::new();
    for n in 1..=d {
        let denom = sine_sum(frozen_args, n);
        if denom.abs() < tau_sin {
            skipped.push(n);
            c.push(0.0);
        } else {
            c.push(pair.n_cos(n as f64) / denom);
        }
    }
    if skipped.len() == d {
        return Err(Error::AssumptionIII { skipped });
    }
    Ok((c, skipped))
}

/// `Σ (2 c_n / π) sin n(π - t)` on `m + 1` nodes; skipped modes contribute
/// nothing.
pub fn reconstruct_potential(c: &[f64], skipped: &[usize], m: usize) -> Result<PotentialFn> {
    let coeffs: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(i, &v)| if skipped.contains(&(i + 1)) { 0.0 } else { v })
        .collect();
    if coeffs.is_empty() {
        return PotentialFn::zero(m);
    }
    PotentialFn::from_sine_series(&coeffs, m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InverseDiagnostics {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub residual_norm: f64,
    pub condition_estimate: f64,
    pub ill_conditioned: bool,
    pub skipped_modes: Vec<usize>,
    pub tau_sin: f64,
    pub g_growth_slopes: Option<(f64, f64)>,
    pub n_integral: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub q_reconstructed: PotentialFn,
    pub c: Vec<f64>,
    pub kernel_pair: KernelPair,
    pub g: GSequences,
    pub diagnostics: InverseDiagnostics,
}

/// Steps 1 to 4 end to end.
pub fn invert(
    known: &[EdgeSpec],
    frozen_args: &[f64],
    mu: &EigenSubsequences,
    config: &InverseConfig,
) -> Result<ReconstructionResult> {
    check_known(known)?;
    if frozen_args.is_empty() {
        return Err(Error::input("frozen_args", "the unknown edge needs frozen arguments"));
    }
    validate_frozen_args(frozen_args).map_err(|e| Error::input("frozen_args", e.to_string()))?;
    let available = mu.mu0.len().min(mu.mu1.len());
    let k = config.k.unwrap_or(available);
    if k > available {
        return Err(Error::input(
            "K",
            format!("requested K = {k} but only {available} eigenvalue pairs were given"),
        ));
    }
    if k < config.k_min {
        return Err(Error::input(
            "K",
            format!("K = {k} is below the minimum of {}", config.k_min),
        ));
    }
    let d = config.d.unwrap_or(k / 2).max(1);
    if d > config.m / 4 {
        return Err(Error::input("D", format!("D = {d} exceeds M/4 = {}", config.m / 4)));
    }
    let tau_sin = config
        .tau_sin
        .unwrap_or(1e-6 * frozen_args.len() as f64);

    let mu = mu.truncated(k);
    let g = g_sequence_with(
        known,
        &mu,
        GThresholds {
            tau_i: config.tau_i,
            tau_g: config.tau_g,
        },
    )?;
    let system = assemble_inverse_system(&g, &mu, k, config.w_basis, config.raw_rows)?;
    let (pair, report) = solve_kernel_pair(&system, config.m)?;
    let mut warnings = Vec::new();
    let ill = report.condition_estimate > config.condition_warning;
    if ill {
        warnings.push(format!(
            "inverse system condition estimate {:.3e} exceeds {:.1e}",
            report.condition_estimate, config.condition_warning
        ));
    }
    let (c, skipped) = fourier_coefficients(&pair, frozen_args, d, tau_sin)?;
    if !skipped.is_empty() {
        warnings.push(format!(
            "assumption (iii): sum of sin(n a_k) vanishes for n in {skipped:?}; those modes are zero-filled"
        ));
    }
    let q = reconstruct_potential(&c, &skipped, config.m)?;
    let diagnostics = InverseDiagnostics {
        k,
        d,
        residual_norm: report.residual_norm,
        condition_estimate: report.condition_estimate,
        ill_conditioned: ill,
        skipped_modes: skipped,
        tau_sin,
        g_growth_slopes: g.growth_slopes(),
        n_integral: pair.n_integral(),
        warnings,
    };
    Ok(ReconstructionResult {
        q_reconstructed: q,
        c,
        kernel_pair: pair,
        g,
        diagnostics,
    })
}
