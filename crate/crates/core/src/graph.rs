//! Characteristic function of the star graph, assembled three ways.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::edge::{edge_values, phi_gamma, phi_gamma_prime};
use crate::error::{Error, Result};
use crate::potential::{EdgeSpec, GraphSpec};
use crate::scalar::Scalar;

/// Largest bordered matrix [`delta_graph_full_determinant`] will build.
pub const MAX_DETERMINANT_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphCharSample {
    pub lambda: Complex64,
    pub value_product: Complex64,
    pub value_determinant: Option<Complex64>,
}

/// `Σ_k d01_k Π_{j≠k} d00_j` from per-edge values.
pub fn product_formula<T: Scalar>(values: &[(T, T)]) -> T {
    let p = values.len();
    let mut suffix = vec![T::one(); p + 1];
    for k in (0..p).rev() {
        suffix[k] = suffix[k + 1] * values[k].0;
    }
    let mut prefix = T::one();
    let mut acc = T::zero();
    for k in 0..p {
        acc += values[k].1 * prefix * suffix[k + 1];
        prefix *= values[k].0;
    }
    acc
}

/// `Δ_G` at spectral parameter `rho` (real or complex).
pub fn delta_graph_rho<T: Scalar>(graph: &GraphSpec, rho: T) -> Result<T> {
    let values = graph
        .edges()
        .iter()
        .map(|e| edge_values(e, rho))
        .collect::<Result<Vec<_>>>()?;
    Ok(product_formula(&values))
}

/// `Δ_{G_p}(λ)` by the product formula.
pub fn delta_graph(graph: &GraphSpec, lambda: Complex64) -> Result<Complex64> {
    delta_graph_rho(graph, lambda.sqrt())
}

/// `Δ_{G_p}(λ)` by peeling one edge at a time.
pub fn delta_graph_recursive(graph: &GraphSpec, lambda: Complex64) -> Result<Complex64> {
    let rho = lambda.sqrt();
    let mut edges = graph.edges().iter();
    let first = edges.next().expect("graph has edges");
    let (d00, d01) = edge_values(first, rho)?;
    let mut delta = d01;
    let mut prod = d00;
    for edge in edges {
        let (d00, d01) = edge_values(edge, rho)?;
        delta = d00 * delta + d01 * prod;
        prod *= d00;
    }
    Ok(delta)
}

fn block_width(edge: &EdgeSpec) -> usize {
    if edge.is_ordinary() {
        1
    } else {
        edge.frozen_args.len() + 1
    }
}

/// Entries of one edge's columns: continuity rows plus the `π` and `π'` rows.
struct EdgeBlock {
    continuity: Vec<Vec<Complex64>>,
    at_pi: Vec<Complex64>,
    at_pi_prime: Vec<Complex64>,
}

fn edge_block(edge: &EdgeSpec, rho: Complex64) -> Result<EdgeBlock> {
    if edge.is_ordinary() {
        let (z, zp) = edge_values(edge, rho)?;
        return Ok(EdgeBlock {
            continuity: Vec::new(),
            at_pi: vec![z],
            at_pi_prime: vec![zp],
        });
    }
    let n = edge.frozen_args.len();
    let one = Complex64::new(1.0, 0.0);
    let continuity = edge
        .frozen_args
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let w = edge.q.wq(a, rho);
            let mut row = Vec::with_capacity(n + 1);
            row.push(phi_gamma(edge.alpha, a, rho));
            row.extend((0..n).map(|j| if i == j { w - one } else { w }));
            row
        })
        .collect();
    let (w_pi, wp_pi) = edge.q.transforms(PI, rho);
    let mut at_pi = vec![phi_gamma(edge.alpha, PI, rho)];
    at_pi.extend(std::iter::repeat(w_pi).take(n));
    let mut at_pi_prime = vec![phi_gamma_prime(edge.alpha, PI, rho)];
    at_pi_prime.extend(std::iter::repeat(wp_pi).take(n));
    Ok(EdgeBlock {
        continuity,
        at_pi,
        at_pi_prime,
    })
}

/// Bordered block matrix. With `kirchhoff = false` the final row is the last
/// edge's `π` row instead, which gives the chained matrix whose determinant
/// is `Π d00`.
fn assemble(graph: &GraphSpec, lambda: Complex64, kirchhoff: bool) -> Result<DMatrix<Complex64>> {
    let size: usize = graph.edges().iter().map(block_width).sum();
    if size > MAX_DETERMINANT_SIZE {
        return Err(Error::MatrixTooLarge {
            size,
            limit: MAX_DETERMINANT_SIZE,
        });
    }
    let rho = lambda.sqrt();
    let blocks = graph
        .edges()
        .iter()
        .map(|e| edge_block(e, rho))
        .collect::<Result<Vec<_>>>()?;
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut col = 0;
    for b in &blocks {
        offsets.push(col);
        col += b.at_pi.len();
    }

    let mut m = DMatrix::<Complex64>::zeros(size, size);
    let mut row = 0;
    let put = |m: &mut DMatrix<Complex64>, row: usize, off: usize, vals: &[Complex64], sign: f64| {
        for (j, v) in vals.iter().enumerate() {
            m[(row, off + j)] = *v * sign;
        }
    };
    for r in &blocks[0].continuity {
        put(&mut m, row, offsets[0], r, 1.0);
        row += 1;
    }
    for j in 1..blocks.len() {
        put(&mut m, row, offsets[j - 1], &blocks[j - 1].at_pi, 1.0);
        put(&mut m, row, offsets[j], &blocks[j].at_pi, -1.0);
        row += 1;
        for r in &blocks[j].continuity {
            put(&mut m, row, offsets[j], r, 1.0);
            row += 1;
        }
    }
    if kirchhoff {
        for (b, &off) in blocks.iter().zip(&offsets) {
            put(&mut m, row, off, &b.at_pi_prime, 1.0);
        }
    } else {
        let last = blocks.len() - 1;
        put(&mut m, row, offsets[last], &blocks[last].at_pi, 1.0);
    }
    row += 1;
    debug_assert_eq!(row, size);
    Ok(m)
}

/// Determinant of the bordered system for the whole graph. With the row
/// order used here it equals [`delta_graph`] with no sign correction.
pub fn delta_graph_full_determinant(graph: &GraphSpec, lambda: Complex64) -> Result<Complex64> {
    let m = assemble(graph, lambda, true)?;
    Ok(m.determinant())
}

/// Determinant of the chained block matrix with the Kirchhoff row replaced
/// by the last `π` row; equals `Π_l d00_l`.
pub fn chained_block_determinant(graph: &GraphSpec, lambda: Complex64) -> Result<Complex64> {
    let m = assemble(graph, lambda, false)?;
    Ok(m.determinant())
}

/// The unnormalized bordered matrix, for inspection.
pub fn bordered_matrix(graph: &GraphSpec, lambda: Complex64) -> Result<DMatrix<Complex64>> {
    assemble(graph, lambda, true)
}

pub fn sample_graph(graph: &GraphSpec, lambda: Complex64, with_determinant: bool) -> Result<GraphCharSample> {
    let value_product = delta_graph(graph, lambda)?;
    let value_determinant = if with_determinant {
        Some(delta_graph_full_determinant(graph, lambda)?)
    } else {
        None
    };
    Ok(GraphCharSample {
        lambda,
        value_product,
        value_determinant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Alpha, PotentialFn};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn zero_star(p: usize) -> GraphSpec {
        let edges = (0..p)
            .map(|_| EdgeSpec::ordinary(PotentialFn::zero(128).unwrap()))
            .collect();
        GraphSpec::new(edges).unwrap()
    }

    fn four_edge_instance() -> GraphSpec {
        let q1 = PotentialFn::from_fn(512, |t| 1.0 + 0.5 * t.sin()).unwrap();
        let q2 = PotentialFn::from_fn(512, |t| (2.0 * t).cos()).unwrap();
        let q3 = PotentialFn::from_fn(512, |t| 0.3 * t).unwrap();
        let q4 = PotentialFn::constant(512, -0.4).unwrap();
        GraphSpec::new(vec![
            EdgeSpec::frozen(q1, vec![1.0]).unwrap(),
            EdgeSpec::frozen(q2, vec![0.7, 2.3]).unwrap(),
            EdgeSpec::ordinary(q3),
            EdgeSpec::ordinary(q4),
        ])
        .unwrap()
    }

    #[test]
    fn zero_potentials_three_edges() {
        let g = zero_star(3);
        let rho: f64 = 1.7;
        let expected = 3.0 * (rho * PI).cos() * ((rho * PI).sin() / rho).powi(2);
        let got = delta_graph(&g, c(rho * rho)).unwrap();
        assert!((got.re - expected).abs() < 1e-13);
        let det = delta_graph_full_determinant(&g, c(rho * rho)).unwrap();
        assert!((det.re - expected).abs() < 1e-12);
    }

    #[test]
    fn two_edges_vanish_at_half_integers() {
        let g = zero_star(2);
        assert!(delta_graph(&g, c(0.25)).unwrap().norm() < 1e-15);
        let rho: f64 = 0.83;
        let r = delta_graph_recursive(&g, c(rho * rho)).unwrap();
        assert!((r.re - (2.0 * rho * PI).sin() / rho).abs() < 1e-13);
    }

    #[test]
    fn four_edge_instance_agrees_three_ways() {
        let g = four_edge_instance();
        let mut lambda = 0.1;
        while lambda < 50.0 {
            let l = c(lambda);
            let a = delta_graph(&g, l).unwrap();
            let b = delta_graph_recursive(&g, l).unwrap();
            let d = delta_graph_full_determinant(&g, l).unwrap();
            let scale = 1.0 + a.norm();
            assert!((a - b).norm() < 1e-11 * scale, "λ={lambda}");
            assert!((a - d).norm() < 1e-9 * scale, "λ={lambda}: {a} vs {d}");
            lambda += 0.997;
        }
    }

    #[test]
    fn four_edge_instance_matches_termwise_expansion() {
        let g = four_edge_instance();
        let l = c(7.3);
        let rho = l.sqrt();
        let v: Vec<_> = g.edges().iter().map(|e| edge_values(e, rho).unwrap()).collect();
        let expanded = v[0].1 * v[1].0 * v[2].0 * v[3].0
            + v[1].1 * v[0].0 * v[2].0 * v[3].0
            + v[2].1 * v[0].0 * v[1].0 * v[3].0
            + v[3].1 * v[0].0 * v[1].0 * v[2].0;
        let got = delta_graph(&g, l).unwrap();
        assert!((got - expanded).norm() < 1e-13 * (1.0 + got.norm()));
    }

    #[test]
    fn chained_determinant_is_product_of_dirichlet_values() {
        let g = four_edge_instance();
        for &lambda in &[0.37, 3.3, 11.9, 29.0] {
            let l = c(lambda);
            let rho = l.sqrt();
            let prod: Complex64 = g
                .edges()
                .iter()
                .map(|e| edge_values(e, rho).unwrap().0)
                .product();
            let det = chained_block_determinant(&g, l).unwrap();
            assert!((det - prod).norm() < 1e-10 * (1.0 + prod.norm()), "{det} vs {prod}");
        }
    }

    #[test]
    fn neumann_edges_and_complex_lambda() {
        let q = PotentialFn::from_fn(256, |t| t.cos()).unwrap();
        let g = GraphSpec::new(vec![
            EdgeSpec::new(q.clone(), vec![0.5, 1.5, 2.5], Alpha::Neumann).unwrap(),
            EdgeSpec::new(q.clone(), vec![], Alpha::Neumann).unwrap(),
            EdgeSpec::frozen(q, vec![2.0]).unwrap(),
        ])
        .unwrap();
        for &l in &[Complex64::new(2.0, 1.0), Complex64::new(-3.0, 0.5), c(9.1)] {
            let a = delta_graph(&g, l).unwrap();
            let d = delta_graph_full_determinant(&g, l).unwrap();
            assert!((a - d).norm() < 1e-9 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn determinant_sign_over_mixed_layouts() {
        let q = PotentialFn::from_fn(256, |t| 0.5 - 0.2 * t).unwrap();
        for p in 2..=5usize {
            for pattern in 0..4usize.pow(p as u32) {
                if pattern % 7 != 0 {
                    continue;
                }
                let edges = (0..p)
                    .map(|l| {
                        let n = (pattern / 4usize.pow(l as u32)) % 4;
                        let args = (1..=n).map(|i| i as f64 * PI / (n as f64 + 1.3)).collect();
                        EdgeSpec::frozen(q.clone(), args).unwrap_or_else(|_| EdgeSpec::ordinary(q.clone()))
                    })
                    .collect();
                let g = GraphSpec::new(edges).unwrap();
                let l = c(3.1);
                let a = delta_graph(&g, l).unwrap();
                let d = delta_graph_full_determinant(&g, l).unwrap();
                assert!((a - d).norm() < 1e-9 * (1.0 + a.norm()), "p={p} pattern={pattern}");
                let prod: Complex64 = g.edges().iter().map(|e| edge_values(e, l.sqrt()).unwrap().0).product();
                let chained = chained_block_determinant(&g, l).unwrap();
                assert!((chained - prod).norm() < 1e-10 * (1.0 + prod.norm()));
            }
        }
    }

    #[test]
    fn oversized_matrix_is_refused() {
        let args: Vec<f64> = (1..=40).map(|i| i as f64 * PI / 41.0).collect();
        let q = PotentialFn::zero(64).unwrap();
        let g = GraphSpec::new(vec![
            EdgeSpec::frozen(q.clone(), args.clone()).unwrap(),
            EdgeSpec::frozen(q, args).unwrap(),
        ])
        .unwrap();
        let err = delta_graph_full_determinant(&g, c(1.0)).unwrap_err();
        assert!(matches!(err, Error::MatrixTooLarge { size: 82, limit: 64 }));
    }

    #[test]
    fn sample_reports_both_values() {
        let g = four_edge_instance();
        let s = sample_graph(&g, c(5.0), true).unwrap();
        let d = s.value_determinant.unwrap();
        assert!((s.value_product - d).norm() <= 1e-9 * (1.0 + s.value_product.norm()));
        assert!(sample_graph(&g, c(5.0), false).unwrap().value_determinant.is_none());
    }

    #[test]
    fn real_axis_values_are_real() {
        let g = four_edge_instance();
        for &lambda in &[0.5, 4.4, 30.0] {
            assert!(delta_graph(&g, c(lambda)).unwrap().im.abs() < 1e-14);
        }
    }

    #[test]
    fn large_rho_law() {
        let g = four_edge_instance();
        let p = 4;
        // sample away from zeros of the leading term
        let err_at = |rho: f64| {
            let lead = p as f64 * (rho * PI).cos() * (rho * PI).sin().powi(p - 1) / rho.powi(p - 1);
            (delta_graph_rho(&g, rho).unwrap() - lead).abs()
        };
        let pts = [15.25, 20.25, 30.25, 40.25, 60.25];
        let xs: Vec<f64> = pts.iter().map(|r: &f64| r.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|&r| err_at(r).ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope <= -(p as f64) + 0.3, "slope {slope}");
    }
}
