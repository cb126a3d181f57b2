//! Command dispatch for the `frozen-star` binary.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::error::Result;
use crate::fd::{build_fd_matrix, compare_spectra, fd_spectrum, richardson_order, ComparisonReport};
use crate::graph::delta_graph_rho;
use crate::inverse::{invert, InverseDiagnostics, ReconstructionResult};
use crate::io::{read_eigen_csv, write_charfn_csv, write_eigen_csv, write_json, write_kernels_csv, write_spectrum_csv};
use crate::kernel::{kernel_pair, kernel_representation_check};
use crate::potential::GraphSpec;
use crate::spectrum::{classify_spectrum, default_step, extract_subsequences, forward_spectrum, scan_real_roots, Spectrum};

pub const DEFAULT_ROUNDTRIP_K: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// 0 on success; 3 when the run finished but skipped modes under
    /// assumption (iii).
    pub exit_code: u8,
    pub summary: String,
}

#[derive(Serialize)]
struct InverseReport<'a> {
    #[serde(flatten)]
    diagnostics: &'a InverseDiagnostics,
    c: &'a [f64],
    g0: &'a [f64],
    g1: &'a [f64],
}

#[derive(Serialize)]
struct RoundtripReport {
    #[serde(rename = "K")]
    k: usize,
    l2_error: f64,
    relative_l2_error: f64,
    true_l2_norm: f64,
}

#[derive(Serialize)]
struct KernelReport {
    #[serde(rename = "M")]
    m: usize,
    n_integral: f64,
    representation_error: f64,
    rho_samples: usize,
}

#[derive(Serialize)]
struct OracleReport {
    #[serde(rename = "N")]
    n: usize,
    count: usize,
    analytic: Vec<f64>,
    fd: Vec<f64>,
    complex: Vec<(f64, f64)>,
    comparison: ComparisonReport,
    coarse_max_rel_deviation: f64,
    richardson_order: f64,
}

fn graph(cfg: &RunConfig) -> &GraphSpec {
    cfg.graph.as_ref().expect("validated config has a graph")
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out)?;
    match cfg.command {
        Command::Forward => run_forward(cfg, out),
        Command::Charfn => run_charfn(cfg, out),
        Command::Kernels => run_kernels(cfg, out),
        Command::Invert => run_invert(cfg, out),
        Command::Roundtrip => run_roundtrip(cfg, out),
        Command::Oracle => run_oracle(cfg, out),
    }
}

fn write_spectrum_files(out: &Path, spec: &Spectrum, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join("spectrum.csv");
    write_spectrum_csv(&path, spec)?;
    files.push(path);
    if spec.k_max > 0 {
        let mu = extract_subsequences(spec)?;
        let path = out.join("eigenvalues.csv");
        write_eigen_csv(&path, &mu)?;
        files.push(path);
    }
    Ok(())
}

fn run_forward(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let g = graph(cfg);
    let spec = match cfg.k_max {
        Some(k) => forward_spectrum(g, k, cfg.step)?,
        None => {
            let step = cfg.step.unwrap_or_else(|| default_step(g.p()));
            let scan = scan_real_roots(g, cfg.rho_max.expect("validated"), step)?;
            classify_spectrum(&scan, g)?
        }
    };
    let mut files = Vec::new();
    write_spectrum_files(out, &spec, &mut files)?;
    Ok(RunOutcome {
        files,
        exit_code: 0,
        summary: format!("{} windows, {} roots", spec.k_max, spec.k_max * spec.p()),
    })
}

fn run_charfn(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let g = graph(cfg);
    let (lo, hi) = (cfg.rho_min, cfg.rho_max.expect("validated"));
    let n = cfg.samples;
    let rows = (0..n)
        .map(|i| {
            let rho = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            delta_graph_rho(g, rho).map(|d| (rho, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("charfn.csv");
    write_charfn_csv(&path, &rows)?;
    Ok(RunOutcome {
        files: vec![path],
        exit_code: 0,
        summary: format!("{n} samples on [{lo}, {hi}]"),
    })
}

fn run_kernels(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let edge = graph(cfg).unknown_edge();
    let pair = kernel_pair(&edge.q, &edge.frozen_args)?;
    let rhos: Vec<f64> = (0..200).map(|i| 0.3 + (40.0 - 0.3) * i as f64 / 199.0).collect();
    let report = KernelReport {
        m: pair.m(),
        n_integral: pair.n_integral(),
        representation_error: kernel_representation_check(edge, &pair, &rhos)?,
        rho_samples: rhos.len(),
    };
    let csv = out.join("kernels.csv");
    write_kernels_csv(&csv, &pair)?;
    let json = out.join("kernels.json");
    write_json(&json, &report)?;
    Ok(RunOutcome {
        files: vec![csv, json],
        exit_code: 0,
        summary: format!("representation error {:.3e}", report.representation_error),
    })
}

fn write_reconstruction(out: &Path, res: &ReconstructionResult, files: &mut Vec<PathBuf>) -> Result<u8> {
    let q = out.join("q_reconstructed.json");
    write_json(&q, &res.q_reconstructed)?;
    let diag = out.join("diagnostics.json");
    write_json(
        &diag,
        &InverseReport {
            diagnostics: &res.diagnostics,
            c: &res.c,
            g0: &res.g.g0,
            g1: &res.g.g1,
        },
    )?;
    let k = out.join("kernels.csv");
    write_kernels_csv(&k, &res.kernel_pair)?;
    files.extend([q, diag, k]);
    Ok(if res.diagnostics.skipped_modes.is_empty() { 0 } else { 3 })
}

fn run_invert(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let mu = read_eigen_csv(cfg.eigenvalues.as_ref().expect("validated"))?;
    let res = invert(&cfg.known_edges, &cfg.frozen_args, &mu, &cfg.inverse)?;
    let mut files = Vec::new();
    let exit_code = write_reconstruction(out, &res, &mut files)?;
    Ok(RunOutcome {
        files,
        exit_code,
        summary: summary_line(&res),
    })
}

fn summary_line(res: &ReconstructionResult) -> String {
    let d = &res.diagnostics;
    let mut s = format!("K = {}, D = {}, condition {:.3e}", d.k, d.d, d.condition_estimate);
    if !d.skipped_modes.is_empty() {
        s.push_str(&format!(", skipped modes {:?}", d.skipped_modes));
    }
    s
}

fn run_roundtrip(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let g = graph(cfg);
    let k = cfg.inverse.k.or(cfg.k_max).unwrap_or(DEFAULT_ROUNDTRIP_K);
    let spec = forward_spectrum(g, k, cfg.step)?;
    let mut files = Vec::new();
    write_spectrum_files(out, &spec, &mut files)?;
    let mu = extract_subsequences(&spec)?;
    let mut inv = cfg.inverse.clone();
    inv.k = Some(k);
    let res = invert(g.known_edges(), &g.unknown_edge().frozen_args, &mu, &inv)?;
    let exit_code = write_reconstruction(out, &res, &mut files)?;
    let q_true = &g.unknown_edge().q;
    let err = res.q_reconstructed.l2_distance(q_true);
    let norm = q_true.l2_norm();
    let report = RoundtripReport {
        k,
        l2_error: err,
        relative_l2_error: if norm > 0.0 { err / norm } else { err },
        true_l2_norm: norm,
    };
    let path = out.join("report.json");
    write_json(&path, &report)?;
    files.push(path);
    Ok(RunOutcome {
        files,
        exit_code,
        summary: format!("{}, relative L2 error {:.3e}", summary_line(&res), report.relative_l2_error),
    })
}

/// The `count` smallest positive eigenvalues, straight from the root scan
/// (no branch classification, so strong potentials are fine).
pub fn analytic_eigenvalues(g: &GraphSpec, count: usize, step: Option<f64>) -> Result<Vec<f64>> {
    let step = step.unwrap_or_else(|| default_step(g.p()));
    let mut rho_max = count.div_ceil(g.p()) as f64 + 2.0;
    loop {
        let scan = scan_real_roots(g, rho_max, step)?;
        let roots = scan.expanded();
        if roots.len() >= count {
            return Ok(roots[..count].iter().map(|r| r * r).collect());
        }
        rho_max += 2.0;
    }
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) / x).abs())
        .fold(0.0, f64::max)
}

fn run_oracle(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let g = graph(cfg);
    let analytic = analytic_eigenvalues(g, cfg.fd_count, cfg.step)?;
    let fine = fd_spectrum(&build_fd_matrix(g, cfg.fd_n)?, g, cfg.fd_count)?;
    let coarse_n = (cfg.fd_n / 2).max(crate::fd::MIN_N);
    let coarse = fd_spectrum(&build_fd_matrix(g, coarse_n)?, g, cfg.fd_count)?;
    let comparison = compare_spectra(&analytic, &fine.eigenvalues, cfg.fd_tol)?;
    let e_fine = max_rel(&analytic, &fine.eigenvalues);
    let e_coarse = max_rel(&analytic, &coarse.eigenvalues);
    let report = OracleReport {
        n: cfg.fd_n,
        count: cfg.fd_count,
        analytic,
        fd: fine.eigenvalues,
        complex: fine.complex,
        coarse_max_rel_deviation: e_coarse,
        richardson_order: richardson_order(e_coarse, e_fine),
        comparison,
    };
    let path = out.join("oracle.json");
    write_json(&path, &report)?;
    Ok(RunOutcome {
        files: vec![path],
        exit_code: 0,
        summary: format!(
            "{}: max relative deviation {:.3e}, order {:.2}",
            if report.comparison.passed { "agree" } else { "DISAGREE" },
            report.comparison.max_rel_deviation,
            report.richardson_order
        ),
    })
}
