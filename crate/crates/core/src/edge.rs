//! Per-edge characteristic functions `Δ_q^{(α,β)}(λ)` and node values of
//! the nonlocal solutions.
//!
//! For a frozen-argument edge the `(n+1) x (n+1)` bordered determinant
//! collapses to the 2x2 form
//!
//! ```text
//! | Σ φ_α(a_k)   Σ w_q(a_k) - 1 |
//! | φ_α^(β)(π)   w_q^(β)(π)     |
//! ```
//!
//! Ordinary edges use the sine/cosine solutions of `-y'' + q y = λ y`
//! integrated numerically.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::{Alpha, EdgeSpec, PotentialFn};
use crate::scalar::{sin_over, Scalar};

/// Boundary derivative order at the inner vertex end `x = pi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Beta {
    Value,
    Derivative,
}

/// `d00 = Δ^{(α,0)}(λ)`, `d01 = Δ^{(α,1)}(λ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeCharValues {
    pub d00: Complex64,
    pub d01: Complex64,
    pub lambda: Complex64,
    pub rho: Complex64,
}

/// `φ_γ(x) = sin(ρx)/ρ` for γ = 0, `cos(ρx)` for γ = 1.
pub fn phi_gamma<T: Scalar>(gamma: Alpha, x: f64, rho: T) -> T {
    match gamma {
        Alpha::Dirichlet => sin_over(rho, x),
        Alpha::Neumann => (rho * x).cos(),
    }
}

/// x-derivative of [`phi_gamma`].
pub fn phi_gamma_prime<T: Scalar>(gamma: Alpha, x: f64, rho: T) -> T {
    match gamma {
        Alpha::Dirichlet => (rho * x).cos(),
        Alpha::Neumann => -(rho * rho) * sin_over(rho, x),
    }
}

/// `(d00, d01)` for an edge at spectral parameter `rho` (`λ = rho^2`).
pub fn edge_values<T: Scalar>(edge: &EdgeSpec, rho: T) -> Result<(T, T)> {
    if edge.is_ordinary() {
        ordinary_endpoint(&edge.q, edge.alpha, rho)
    } else {
        Ok(frozen_values(edge, rho))
    }
}

/// 2x2 reduced determinants for a frozen-argument edge.
pub fn frozen_values<T: Scalar>(edge: &EdgeSpec, rho: T) -> (T, T) {
    let mut sum_phi = T::zero();
    let mut sum_w = T::zero();
    for &a in &edge.frozen_args {
        sum_phi += phi_gamma(edge.alpha, a, rho);
        sum_w += edge.q.wq(a, rho);
    }
    let (w_pi, wp_pi) = edge.q.transforms(PI, rho);
    let r1 = sum_w - T::one();
    let d00 = sum_phi * w_pi - r1 * phi_gamma(edge.alpha, PI, rho);
    let d01 = sum_phi * wp_pi - r1 * phi_gamma_prime(edge.alpha, PI, rho);
    (d00, d01)
}

/// Steps above this count are refused as unresolvable.
const MAX_RK_STEPS: usize = 1 << 22;

fn rk_steps(rho_abs: f64) -> Result<usize> {
    let n = 2048usize.max(64 * rho_abs.ceil() as usize);
    if !rho_abs.is_finite() || n > MAX_RK_STEPS {
        return Err(Error::Resolution {
            rho: rho_abs,
            required_m: if rho_abs.is_finite() { n } else { usize::MAX },
        });
    }
    Ok(n)
}

/// `(z(π), z'(π))` where `z = S` (α = 0) or `C` (α = 1) solves
/// `-z'' + q z = ρ² z`.
///
/// Fixed-step RK4 on the variation-of-parameters amplitudes: writing
/// `z = A sin(ρx)/ρ + B cos(ρx)`, the pair `(A, B)` obeys
/// `A' = cos(ρx) q z`, `B' = -sin(ρx)/ρ q z`. The free oscillation is
/// carried exactly, so the step error scales with `q` rather than `ρ`.
pub fn ordinary_endpoint<T: Scalar>(q: &PotentialFn, alpha: Alpha, rho: T) -> Result<(T, T)> {
    let n = rk_steps(rho.abs())?;
    let h = PI / n as f64;
    let (mut a, mut b) = match alpha {
        Alpha::Dirichlet => (T::one(), T::zero()),
        Alpha::Neumann => (T::zero(), T::one()),
    };
    if !q.is_zero() {
        let basis = |x: f64| (sin_over(rho, x), (rho * x).cos(), q.value_at(x));
        let rhs = |(s, c, qv): (T, T, f64), a: T, b: T| {
            let f = (a * s + b * c) * qv;
            (c * f, -(s * f))
        };
        let mut left = basis(0.0);
        for i in 0..n {
            let x0 = i as f64 * h;
            let mid = basis(x0 + 0.5 * h);
            let right = basis(x0 + h);
            let k1 = rhs(left, a, b);
            let k2 = rhs(mid, a + k1.0 * (0.5 * h), b + k1.1 * (0.5 * h));
            let k3 = rhs(mid, a + k2.0 * (0.5 * h), b + k2.1 * (0.5 * h));
            let k4 = rhs(right, a + k3.0 * h, b + k3.1 * h);
            a += (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0);
            b += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0);
            left = right;
        }
    }
    let s = sin_over(rho, PI);
    let c = (rho * PI).cos();
    Ok((a * s + b * c, a * c - b * (rho * rho) * s))
}

/// Reduced 2x2 determinant for a frozen edge.
pub fn delta_frozen_edge(edge: &EdgeSpec, lambda: Complex64, beta: Beta) -> Result<Complex64> {
    if edge.is_ordinary() {
        return Err(Error::InvalidArgument(
            "delta_frozen_edge needs a nonempty frozen set".into(),
        ));
    }
    let (d00, d01) = frozen_values(edge, lambda.sqrt());
    Ok(match beta {
        Beta::Value => d00,
        Beta::Derivative => d01,
    })
}

/// `z(π, λ)` or `z'(π, λ)` for an ordinary edge.
pub fn delta_ordinary_edge(edge: &EdgeSpec, lambda: Complex64, beta: Beta) -> Result<Complex64> {
    if !edge.is_ordinary() {
        return Err(Error::InvalidArgument(
            "delta_ordinary_edge needs an empty frozen set".into(),
        ));
    }
    let (d00, d01) = ordinary_endpoint(&edge.q, edge.alpha, lambda.sqrt())?;
    Ok(match beta {
        Beta::Value => d00,
        Beta::Derivative => d01,
    })
}

pub fn delta_edge(edge: &EdgeSpec, lambda: Complex64) -> Result<EdgeCharValues> {
    let rho = lambda.sqrt();
    let (d00, d01) = edge_values(edge, rho)?;
    Ok(EdgeCharValues {
        d00,
        d01,
        lambda,
        rho,
    })
}

/// Node values `u_k = z_F(a_k)` of the nonlocal solution and its constant
/// `D(λ)` (`A(λ)` for α = 0, `B(λ)` for α = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenNodeSolution {
    pub d: f64,
    pub node_values: Vec<Complex64>,
    /// `W` was singular with `v` in its column space; `node_values` is the
    /// minimum-norm solution.
    pub degenerate: bool,
}

/// Solves `W u = -D v` with `W_{kj} = w_q(a_k) - δ_{kj}` and
/// `v_k = φ_α(a_k)`.
///
/// `D = 1` whenever `v` lies in the column space of `W`; otherwise `D = 0`
/// and `u` spans the null space. Rank is decided by singular values against
/// `1e-10 * max(‖W‖, 1)`.
pub fn frozen_node_values(edge: &EdgeSpec, lambda: Complex64) -> Result<FrozenNodeSolution> {
    if edge.is_ordinary() {
        return Err(Error::InvalidArgument(
            "frozen_node_values needs a nonempty frozen set".into(),
        ));
    }
    let rho = lambda.sqrt();
    let args = &edge.frozen_args;
    let n = args.len();
    let w: Vec<Complex64> = args.iter().map(|&a| edge.q.wq(a, rho)).collect();
    let v = DVector::from_iterator(n, args.iter().map(|&a| phi_gamma(edge.alpha, a, rho)));
    let one = Complex64::new(1.0, 0.0);
    let mat = DMatrix::from_fn(n, n, |k, j| if k == j { w[k] - one } else { w[k] });

    let svd = mat.clone().svd(true, true);
    let sigma = &svd.singular_values;
    let norm = sigma.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * norm.max(1.0);
    let rank = sigma.iter().filter(|&&s| s > tol).count();

    let neg_v = -v.clone();
    if rank == n {
        let u = mat
            .lu()
            .solve(&neg_v)
            .ok_or_else(|| Error::Numeric("W is numerically singular".into()))?;
        return Ok(FrozenNodeSolution {
            d: 1.0,
            node_values: u.iter().cloned().collect(),
            degenerate: false,
        });
    }

    let u_mat = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    // component of v outside the column space
    let mut proj = DVector::<Complex64>::zeros(n);
    for (i, &s) in sigma.iter().enumerate() {
        if s > tol {
            let col = u_mat.column(i);
            let coef = col.dotc(&v);
            proj += col * coef;
        }
    }
    let outside = (&v - &proj).norm();
    if outside <= 1e-10 * v.norm().max(1.0) {
        let u = svd
            .solve(&neg_v, tol)
            .map_err(|e| Error::Numeric(e.to_string()))?;
        return Ok(FrozenNodeSolution {
            d: 1.0,
            node_values: u.iter().cloned().collect(),
            degenerate: true,
        });
    }

    let (imin, _) = sigma
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let mut null: Vec<Complex64> = v_t.row(imin).iter().map(|z| z.conj()).collect();
    // fix the phase so the largest component is real and positive
    let lead = null
        .iter()
        .cloned()
        .fold(Complex64::new(0.0, 0.0), |acc, z| if z.norm() > acc.norm() { z } else { acc });
    let phase = lead.conj() / lead.norm();
    for z in &mut null {
        *z *= phase;
    }
    Ok(FrozenNodeSolution {
        d: 0.0,
        node_values: null,
        degenerate: false,
    })
}

/// Row residuals `|(W u + D v)_k|` of the node-value system.
pub fn node_value_residuals(edge: &EdgeSpec, lambda: Complex64, sol: &FrozenNodeSolution) -> Vec<f64> {
    let rho = lambda.sqrt();
    let total: Complex64 = sol.node_values.iter().sum();
    edge.frozen_args
        .iter()
        .zip(&sol.node_values)
        .map(|(&a, &u)| {
            let w = edge.q.wq(a, rho);
            (w * total - u + phi_gamma(edge.alpha, a, rho) * sol.d).norm()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn phi_values() {
        assert!(phi_gamma(Alpha::Dirichlet, PI, 2.0).abs() < 1e-15);
        assert!((phi_gamma(Alpha::Neumann, PI, 1.0) + 1.0).abs() < 1e-15);
        assert!((phi_gamma(Alpha::Dirichlet, PI / 2.0, 0.0) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_edge_with_zero_potential_reduces_to_sine() {
        let edge = EdgeSpec::frozen(PotentialFn::zero(256).unwrap(), vec![0.7, 2.0]).unwrap();
        let rho = 1.3;
        let d00 = delta_frozen_edge(&edge, c(rho * rho), Beta::Value).unwrap();
        assert!((d00.re - (1.3 * PI).sin() / 1.3).abs() < 1e-14);
        let vals = delta_edge(&edge, c(4.0)).unwrap();
        assert!(vals.d00.norm() < 1e-14);
        assert!((vals.d01.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn frozen_edge_constant_potential_closed_form() {
        let edge = EdgeSpec::frozen(PotentialFn::constant(2048, 1.0).unwrap(), vec![PI / 2.0]).unwrap();
        let d00 = delta_frozen_edge(&edge, c(1.0), Beta::Value).unwrap();
        let d01 = delta_frozen_edge(&edge, c(1.0), Beta::Derivative).unwrap();
        assert!((d00.re - 2.0).abs() < 1e-12);
        assert!(d01.norm() < 1e-12);
        let vals = delta_edge(&edge, c(1.0)).unwrap();
        assert!((vals.d00 - c(2.0)).norm() < 1e-12 && vals.d01.norm() < 1e-12);
        assert!((vals.rho * vals.rho - vals.lambda).norm() < 1e-12);
    }

    #[test]
    fn ordinary_zero_potential() {
        let edge = EdgeSpec::ordinary(PotentialFn::zero(256).unwrap());
        for k in 1..5 {
            let l = c((k * k) as f64);
            assert!(delta_ordinary_edge(&edge, l, Beta::Value).unwrap().norm() < 1e-14);
        }
        let neumann = EdgeSpec::new(PotentialFn::zero(256).unwrap(), vec![], Alpha::Neumann).unwrap();
        for k in 1..5 {
            let l = c((k * k) as f64);
            assert!(delta_ordinary_edge(&neumann, l, Beta::Derivative).unwrap().norm() < 1e-13);
        }
        let vals = delta_edge(&edge, c(0.25)).unwrap();
        assert!((vals.d00.re - 2.0).abs() < 1e-14);
        assert!(vals.d01.norm() < 1e-15);
    }

    #[test]
    fn ordinary_zero_potential_matches_free_solution_over_range() {
        let edge = EdgeSpec::ordinary(PotentialFn::zero(2048).unwrap());
        let mut rho = 0.1;
        while rho <= 40.0 {
            let (d00, d01) = edge_values(&edge, rho).unwrap();
            assert!((d00 - (rho * PI).sin() / rho).abs() < 1e-10);
            assert!((d01 - (rho * PI).cos()).abs() < 1e-10);
            rho += 0.37;
        }
    }

    #[test]
    fn ordinary_constant_potential_is_a_shifted_free_problem() {
        // -y'' + y = λ y  <=>  -y'' = (λ - 1) y
        let q = PotentialFn::constant(2048, 1.0).unwrap();
        let edge = EdgeSpec::ordinary(q.clone());
        let d00 = delta_ordinary_edge(&edge, c(2.0), Beta::Value).unwrap();
        assert!(d00.norm() < 1e-10, "{d00}");
        for &lambda in &[0.3f64, 2.7, 17.0, 400.0] {
            let k = (lambda - 1.0).abs().sqrt();
            let (s, sp) = if lambda > 1.0 {
                ((k * PI).sin() / k, (k * PI).cos())
            } else {
                ((k * PI).sinh() / k, (k * PI).cosh())
            };
            let (d00, d01) = edge_values(&edge, lambda.sqrt()).unwrap();
            assert!((d00 - s).abs() < 1e-9 * (1.0 + s.abs()), "λ={lambda}");
            assert!((d01 - sp).abs() < 1e-9 * (1.0 + sp.abs()), "λ={lambda}");
            let nm = EdgeSpec::new(q.clone(), vec![], Alpha::Neumann).unwrap();
            let (c0, c1) = edge_values(&nm, lambda.sqrt()).unwrap();
            let (ce, cpe) = if lambda > 1.0 {
                ((k * PI).cos(), -k * (k * PI).sin())
            } else {
                ((k * PI).cosh(), k * (k * PI).sinh())
            };
            assert!((c0 - ce).abs() < 1e-9 * (1.0 + ce.abs()));
            assert!((c1 - cpe).abs() < 1e-9 * (1.0 + cpe.abs()));
        }
    }

    #[test]
    fn complex_lambda_agrees_with_real_path() {
        let q = PotentialFn::from_fn(512, |t| (2.0 * t).cos()).unwrap();
        let ord = EdgeSpec::ordinary(q.clone());
        let fro = EdgeSpec::frozen(q, vec![0.9, 2.1]).unwrap();
        for edge in [&ord, &fro] {
            let r = 3.7;
            let (a, b) = edge_values(edge, r).unwrap();
            let vals = delta_edge(edge, c(r * r)).unwrap();
            assert!((vals.d00.re - a).abs() < 1e-12 && vals.d00.im.abs() < 1e-12);
            assert!((vals.d01.re - b).abs() < 1e-12 && vals.d01.im.abs() < 1e-12);
        }
    }

    #[test]
    fn huge_rho_is_a_resolution_error() {
        let edge = EdgeSpec::ordinary(PotentialFn::constant(64, 1.0).unwrap());
        let err = edge_values(&edge, 1e6).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn node_values_zero_potential() {
        let edge = EdgeSpec::frozen(PotentialFn::zero(128).unwrap(), vec![0.5, 1.5, 2.5]).unwrap();
        let lambda = c(2.3);
        let sol = frozen_node_values(&edge, lambda).unwrap();
        assert_eq!(sol.d, 1.0);
        let rho = lambda.sqrt();
        for (&a, u) in edge.frozen_args.iter().zip(&sol.node_values) {
            assert!((u - (rho * a).sin() / rho).norm() < 1e-14);
        }
    }

    #[test]
    fn node_values_singular_case_takes_d_zero() {
        let edge = EdgeSpec::frozen(PotentialFn::constant(2048, 1.0).unwrap(), vec![PI / 2.0]).unwrap();
        let sol = frozen_node_values(&edge, c(1.0)).unwrap();
        assert_eq!(sol.d, 0.0);
        assert_eq!(sol.node_values.len(), 1);
        assert!((sol.node_values[0] - c(1.0)).norm() < 1e-12);
        let res = node_value_residuals(&edge, c(1.0), &sol);
        assert!(res[0] < 1e-12);
    }

    #[test]
    fn node_values_residual_for_smooth_potential() {
        let q = PotentialFn::from_fn(1024, |t| 0.4 * (t * 1.3).sin() - 0.2 * (3.0 * t).cos()).unwrap();
        let edge = EdgeSpec::frozen(q, vec![0.8, 2.2]).unwrap();
        let lambda = c(2.7);
        let sol = frozen_node_values(&edge, lambda).unwrap();
        assert_eq!(sol.d, 1.0);
        for r in node_value_residuals(&edge, lambda, &sol) {
            assert!(r < 1e-9);
        }
    }

    fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0.ln()).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        let num: f64 = pts.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn frozen_edge_large_rho_decay() {
        let q = PotentialFn::from_fn(2048, |t| 1.0 + 0.5 * (2.0 * t).cos() + 0.2 * t).unwrap();
        let edge = EdgeSpec::frozen(q, vec![0.9, 2.2]).unwrap();
        let mut env0 = Vec::new();
        let mut env1 = Vec::new();
        for w in 0..5 {
            let lo = 10.0 + 10.0 * w as f64;
            let (mut m0, mut m1) = (0.0f64, 0.0f64);
            for i in 0..400 {
                let rho = lo + 10.0 * i as f64 / 400.0;
                let (d00, d01) = frozen_values(&edge, rho);
                m0 = m0.max((d00 - (rho * PI).sin() / rho).abs());
                m1 = m1.max((d01 - (rho * PI).cos()).abs());
            }
            env0.push((lo + 5.0, m0));
            env1.push((lo + 5.0, m1));
        }
        assert!(loglog_slope(&env0) <= -2.0 + 0.1, "{}", loglog_slope(&env0));
        assert!(loglog_slope(&env1) <= -1.0 + 0.1, "{}", loglog_slope(&env1));
    }

    #[test]
    fn frozen_values_are_continuous_in_lambda() {
        let q = PotentialFn::from_fn(512, |t| 1.0 + t.sin()).unwrap();
        let edge = EdgeSpec::frozen(q, vec![1.1]).unwrap();
        let step = 1e-3;
        let mut prev = frozen_values(&edge, 0.05f64);
        let mut rho = 0.05 + step;
        while rho < 20.0 {
            let cur = frozen_values(&edge, rho);
            // |d/drho| of both entries is bounded by ~ (pi + |q|_1) on this range
            assert!((cur.0 - prev.0).abs() < 20.0 * step);
            assert!((cur.1 - prev.1).abs() < 20.0 * step * (1.0 + rho));
            prev = cur;
            rho += step;
        }
    }
}
