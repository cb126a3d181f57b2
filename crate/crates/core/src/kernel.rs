//! Kernels `N_p`, `W_p` of the frozen-edge characteristic functions:
//!
//! ```text
//! Δ^(0,0)(ρ²) = sin ρπ/ρ + ρ⁻² ∫ N(t) cos ρt dt
//! Δ^(0,1)(ρ²) = cos ρπ  + ρ⁻¹ ∫ W(t) sin ρt dt
//! ```

use std::f64::consts::PI;

use crate::edge::frozen_values;
use crate::error::{Error, Result};
use crate::potential::{cell_transform, validate_frozen_args, Alpha, EdgeSpec, PotentialFn};
use crate::scalar::sinc;

/// Linear piece of a kernel: `v0` at `s0` to `v1` at `s1`, zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub s0: f64,
    pub s1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Segment {
    fn cos_sin(&self, rho: f64) -> (f64, f64) {
        let (w, wp) = cell_transform(self.s0, self.s1, self.v0, self.v1, 0.0, rho);
        (wp, -rho * w)
    }
}

/// How the kernel integrals are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelRepr {
    /// Only the grid samples, read as a piecewise-linear function.
    Samples,
    /// Exact piecewise-linear pieces.
    Segments { n: Vec<Segment>, w: Vec<Segment> },
    /// `N = Σ c cos(νt)`, `W = Σ c sin(νt)`, as `(ν, c)` pairs.
    Trig {
        n_terms: Vec<(f64, f64)>,
        w_terms: Vec<(f64, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelPair {
    pub n: Vec<f64>,
    pub w: Vec<f64>,
    pub per_arg_n: Option<Vec<Vec<f64>>>,
    pub repr: KernelRepr,
}

/// `∫₀^π cos αt cos βt dt` style building block: `sin(γπ)/γ`.
fn s_pi(gamma: f64) -> f64 {
    PI * sinc(gamma * PI)
}

fn samples_transform(vals: &[f64], rho: f64) -> (f64, f64) {
    let m = vals.len() - 1;
    let h = PI / m as f64;
    let mut c = 0.0;
    let mut s = 0.0;
    for i in 0..m {
        let (w, wp) = cell_transform(i as f64 * h, (i + 1) as f64 * h, vals[i], vals[i + 1], 0.0, rho);
        c += wp;
        s -= rho * w;
    }
    (c, s)
}

impl KernelPair {
    pub fn from_samples(n: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if n.len() != w.len() || n.len() < 2 {
            return Err(Error::InvalidArgument("kernel sample lengths differ or are too short".into()));
        }
        Ok(Self {
            n,
            w,
            per_arg_n: None,
            repr: KernelRepr::Samples,
        })
    }

    /// Trigonometric kernels sampled on `m + 1` nodes.
    pub fn from_trig(n_terms: Vec<(f64, f64)>, w_terms: Vec<(f64, f64)>, m: usize) -> Self {
        let h = PI / m as f64;
        let n = (0..=m)
            .map(|i| n_terms.iter().map(|&(f, c)| c * (f * i as f64 * h).cos()).sum())
            .collect();
        let w = (0..=m)
            .map(|i| w_terms.iter().map(|&(f, c)| c * (f * i as f64 * h).sin()).sum())
            .collect();
        Self {
            n,
            w,
            per_arg_n: None,
            repr: KernelRepr::Trig { n_terms, w_terms },
        }
    }

    pub fn m(&self) -> usize {
        self.n.len() - 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = PI / self.m() as f64;
        (0..=self.m()).map(move |i| i as f64 * h)
    }

    /// `∫₀^π N(t) cos ρt dt`.
    pub fn n_cos(&self, rho: f64) -> f64 {
        match &self.repr {
            KernelRepr::Samples => samples_transform(&self.n, rho).0,
            KernelRepr::Segments { n, .. } => n.iter().map(|s| s.cos_sin(rho).0).sum(),
            KernelRepr::Trig { n_terms, .. } => n_terms
                .iter()
                .map(|&(f, c)| 0.5 * c * (s_pi(f - rho) + s_pi(f + rho)))
                .sum(),
        }
    }

    /// `∫₀^π W(t) sin ρt dt`.
    pub fn w_sin(&self, rho: f64) -> f64 {
        match &self.repr {
            KernelRepr::Samples => samples_transform(&self.w, rho).1,
            KernelRepr::Segments { w, .. } => w.iter().map(|s| s.cos_sin(rho).1).sum(),
            KernelRepr::Trig { w_terms, .. } => w_terms
                .iter()
                .map(|&(f, c)| 0.5 * c * (s_pi(f - rho) - s_pi(f + rho)))
                .sum(),
        }
    }

    /// `∫₀^π N dt`.
    pub fn n_integral(&self) -> f64 {
        match &self.repr {
            KernelRepr::Segments { n, .. } => n.iter().map(|s| 0.5 * (s.v0 + s.v1) * (s.s1 - s.s0)).sum(),
            _ => self.n_cos(0.0),
        }
    }

    /// Representation values `(Δ^(0,0), Δ^(0,1))` at `rho > 0`.
    pub fn represented(&self, rho: f64) -> (f64, f64) {
        let d00 = (rho * PI).sin() / rho + self.n_cos(rho) / (rho * rho);
        let d01 = (rho * PI).cos() + self.w_sin(rho) / rho;
        (d00, d01)
    }
}

struct Piece {
    coef: f64,
    sigma: f64,
    tau: f64,
    lo: f64,
    hi: f64,
}

/// `(coef, σ, τ, lo, hi)` for the four terms `coef·q(σs+τ)·1_(lo,hi)(s)`.
fn pieces(a: f64, w_kernel: bool) -> [Piece; 4] {
    let sgn = if w_kernel { -1.0 } else { 1.0 };
    [
        Piece { coef: -0.5 * sgn, sigma: 1.0, tau: a - PI, lo: PI - a, hi: PI },
        Piece { coef: -0.5 * sgn, sigma: -1.0, tau: PI + a, lo: a, hi: PI },
        Piece { coef: 0.5, sigma: 1.0, tau: PI - a, lo: 0.0, hi: a },
        Piece { coef: 0.5 * sgn, sigma: -1.0, tau: PI - a, lo: 0.0, hi: PI - a },
    ]
}

/// `1_(lo,hi)(s)` with half weight at interior breakpoints; the ends of
/// `[0, π]` are not breakpoints.
fn indicator(s: f64, lo: f64, hi: f64) -> f64 {
    let eps = 1e-12;
    let at_lo = (s - lo).abs() < eps && lo > eps;
    let at_hi = (s - hi).abs() < eps && hi < PI - eps;
    if (s - lo).abs() < eps && lo <= eps || (s - hi).abs() < eps && hi >= PI - eps {
        1.0
    } else if at_lo || at_hi {
        0.5
    } else if s > lo && s < hi {
        1.0
    } else {
        0.0
    }
}

fn sample_pieces(q: &PotentialFn, a: f64, w_kernel: bool) -> Vec<f64> {
    let ps = pieces(a, w_kernel);
    q.nodes()
        .map(|s| {
            ps.iter()
                .map(|p| {
                    let ind = indicator(s, p.lo, p.hi);
                    if ind == 0.0 {
                        0.0
                    } else {
                        p.coef * ind * q.value_at(p.sigma * s + p.tau)
                    }
                })
                .sum()
        })
        .collect()
}

fn segment_pieces(q: &PotentialFn, a: f64, w_kernel: bool, out: &mut Vec<Segment>) {
    let h = q.h();
    for p in pieces(a, w_kernel) {
        let (u0, u1) = {
            let ua = p.sigma * p.lo + p.tau;
            let ub = p.sigma * p.hi + p.tau;
            (ua.min(ub).max(0.0), ua.max(ub).min(PI))
        };
        if u1 <= u0 {
            continue;
        }
        let first = ((u0 / h).floor() as usize).min(q.m() - 1);
        let mut i = first;
        while i < q.m() && (i as f64) * h < u1 {
            let ta = (i as f64 * h).max(u0);
            let tb = ((i + 1) as f64 * h).min(u1);
            if tb > ta {
                let (va, vb) = (q.value_at(ta), q.value_at(tb));
                let (sa, sb) = ((ta - p.tau) * p.sigma, (tb - p.tau) * p.sigma);
                let seg = if sa <= sb {
                    Segment { s0: sa, s1: sb, v0: p.coef * va, v1: p.coef * vb }
                } else {
                    Segment { s0: sb, s1: sa, v0: p.coef * vb, v1: p.coef * va }
                };
                out.push(seg);
            }
            i += 1;
        }
    }
}

fn sum_samples(q: &PotentialFn, args: &[f64], w_kernel: bool) -> Vec<f64> {
    let mut acc = vec![0.0; q.m() + 1];
    for &a in args {
        for (x, v) in acc.iter_mut().zip(sample_pieces(q, a, w_kernel)) {
            *x += v;
        }
    }
    acc
}

/// Grid samples of `N_p`.
pub fn n_kernel(q: &PotentialFn, frozen_args: &[f64]) -> Result<Vec<f64>> {
    validate_frozen_args(frozen_args)?;
    Ok(sum_samples(q, frozen_args, false))
}

/// Grid samples of `W_p`.
pub fn w_kernel(q: &PotentialFn, frozen_args: &[f64]) -> Result<Vec<f64>> {
    validate_frozen_args(frozen_args)?;
    Ok(sum_samples(q, frozen_args, true))
}

/// Both kernels, with exact piecewise-linear pieces for the transforms.
pub fn kernel_pair(q: &PotentialFn, frozen_args: &[f64]) -> Result<KernelPair> {
    validate_frozen_args(frozen_args)?;
    let per_arg: Vec<Vec<f64>> = frozen_args.iter().map(|&a| sample_pieces(q, a, false)).collect();
    let mut n = vec![0.0; q.m() + 1];
    for comp in &per_arg {
        for (x, v) in n.iter_mut().zip(comp) {
            *x += v;
        }
    }
    let w = sum_samples(q, frozen_args, true);
    let mut n_segs = Vec::new();
    let mut w_segs = Vec::new();
    for &a in frozen_args {
        segment_pieces(q, a, false, &mut n_segs);
        segment_pieces(q, a, true, &mut w_segs);
    }
    Ok(KernelPair {
        n,
        w,
        per_arg_n: Some(per_arg),
        repr: KernelRepr::Segments { n: n_segs, w: w_segs },
    })
}

/// Largest representation defect over `rho_samples`, summing the `β = 0`
/// and `β = 1` errors.
pub fn kernel_representation_check(edge: &EdgeSpec, pair: &KernelPair, rho_samples: &[f64]) -> Result<f64> {
    if edge.alpha != Alpha::Dirichlet || edge.is_ordinary() {
        return Err(Error::InvalidArgument(
            "representation check needs a Dirichlet edge with frozen arguments".into(),
        ));
    }
    let mut worst = 0.0f64;
    for &rho in rho_samples {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho sample must be positive, got {rho}")));
        }
        let (d00, d01) = frozen_values(edge, rho);
        let (r00, r01) = pair.represented(rho);
        worst = worst.max((d00 - r00).abs() + (d01 - r01).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trig_q(m: usize, c: &[f64]) -> PotentialFn {
        PotentialFn::from_fn(m, |t| {
            c[0] + c[1] * t.cos() + c[2] * (2.0 * t).sin() + c[3] * (3.0 * t).cos()
        })
        .unwrap()
    }

    fn rho_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_potential_gives_zero_kernels() {
        let q = PotentialFn::zero(128).unwrap();
        assert!(n_kernel(&q, &[1.0]).unwrap().iter().all(|&v| v == 0.0));
        assert!(w_kernel(&q, &[1.0, 2.0]).unwrap().iter().all(|&v| v == 0.0));
        let edge = EdgeSpec::frozen(q.clone(), vec![1.0]).unwrap();
        let pair = kernel_pair(&q, &[1.0]).unwrap();
        assert!(kernel_representation_check(&edge, &pair, &[0.5, 3.3]).unwrap() < 1e-15);
    }

    #[test]
    fn constant_potential_kernel_shape() {
        let m = 1000;
        let q = PotentialFn::constant(m, 1.0).unwrap();
        let a = 1.0;
        let n = n_kernel(&q, &[a]).unwrap();
        for (i, s) in q.nodes().enumerate() {
            let ind = |lo: f64, hi: f64| indicator(s, lo, hi);
            let expect = 0.5 * (-ind(PI - a, PI) - ind(a, PI) + ind(0.0, a) + ind(0.0, PI - a));
            assert!((n[i] - expect).abs() < 1e-12, "s = {s}");
        }
        let pair = kernel_pair(&q, &[a]).unwrap();
        assert!(pair.n_integral().abs() < 1e-12);
    }

    #[test]
    fn constant_potential_midpoint_representation() {
        let q = PotentialFn::constant(2048, 1.0).unwrap();
        let edge = EdgeSpec::frozen(q.clone(), vec![PI / 2.0]).unwrap();
        let pair = kernel_pair(&q, &[PI / 2.0]).unwrap();
        let err = kernel_representation_check(&edge, &pair, &[0.7, 1.0, 2.3, 5.1]).unwrap();
        assert!(err < 1e-8, "{err}");
        let (_, d01) = pair.represented(1.0);
        assert!(d01.abs() < 1e-10);
    }

    #[test]
    fn trig_potential_representation_over_range() {
        let q = trig_q(1024, &[0.4, -0.7, 0.3, 0.25]);
        let args = vec![0.6, 1.9, 2.8];
        let edge = EdgeSpec::frozen(q.clone(), args.clone()).unwrap();
        let pair = kernel_pair(&q, &args).unwrap();
        let err = kernel_representation_check(&edge, &pair, &rho_grid(200, 0.3, 40.0)).unwrap();
        assert!(err < 1e-7, "{err}");
        assert!(pair.n_integral().abs() < 1e-9);
        let parts = pair.per_arg_n.as_ref().unwrap();
        assert_eq!(parts.len(), 3);
        for (i, v) in pair.n.iter().enumerate() {
            let s: f64 = parts.iter().map(|p| p[i]).sum();
            assert!((s - v).abs() < 1e-14);
        }
    }

    #[test]
    fn sampled_kernels_converge_to_exact_transform() {
        let q = trig_q(2048, &[0.1, 0.5, -0.4, 0.2]);
        // jumps sit on grid nodes, so sampling only costs O(h^2)
        let pair = kernel_pair(&q, &[PI / 4.0]).unwrap();
        let sampled = KernelPair::from_samples(pair.n.clone(), pair.w.clone()).unwrap();
        for &rho in &[0.5, 3.0, 11.0] {
            assert!((sampled.n_cos(rho) - pair.n_cos(rho)).abs() < 1e-5);
            assert!((sampled.w_sin(rho) - pair.w_sin(rho)).abs() < 1e-5);
        }
    }

    #[test]
    fn trig_repr_closed_forms() {
        let pair = KernelPair::from_trig(vec![(2.0, 1.5)], vec![(1.5, -0.5)], 4096);
        let samples = KernelPair::from_samples(pair.n.clone(), pair.w.clone()).unwrap();
        for &rho in &[0.3, 2.0, 2.7, 9.4] {
            assert!((pair.n_cos(rho) - samples.n_cos(rho)).abs() < 1e-6);
            assert!((pair.w_sin(rho) - samples.w_sin(rho)).abs() < 1e-6);
        }
        assert!((pair.n_cos(2.0) - 1.5 * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn support_follows_shifted_images() {
        let m = 1024;
        let q = PotentialFn::from_fn(m, |t| if t > 0.5 && t < 0.9 { (t - 0.5) * (0.9 - t) } else { 0.0 })
            .unwrap();
        let a = 2.0;
        let n = n_kernel(&q, &[a]).unwrap();
        let images = [(0.5 + PI - a, 0.9 + PI - a), (PI + a - 0.9, PI + a - 0.5), (0.5 - PI + a, 0.9 - PI + a), (PI - a - 0.9, PI - a - 0.5)];
        let h = q.h();
        for (i, s) in q.nodes().enumerate() {
            let inside = images.iter().any(|&(lo, hi)| s > lo - h && s < hi + h);
            if !inside {
                assert_eq!(n[i], 0.0, "s = {s}");
            }
        }
    }

    #[test]
    fn check_rejects_neumann_edges() {
        let q = PotentialFn::zero(64).unwrap();
        let edge = EdgeSpec::new(q.clone(), vec![1.0], Alpha::Neumann).unwrap();
        let pair = kernel_pair(&q, &[1.0]).unwrap();
        assert!(kernel_representation_check(&edge, &pair, &[1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn kernels_are_linear_and_integrate_to_zero(
            c1 in proptest::array::uniform4(-1.0f64..1.0),
            c2 in proptest::array::uniform4(-1.0f64..1.0),
            s in -2.0f64..2.0,
            a in 0.1f64..3.0,
        ) {
            let q1 = trig_q(256, &c1);
            let q2 = trig_q(256, &c2);
            let combo = PotentialFn::from_samples(
                q1.grid().iter().zip(q2.grid()).map(|(x, y)| x + s * y).collect(),
            ).unwrap();
            let n1 = n_kernel(&q1, &[a]).unwrap();
            let n2 = n_kernel(&q2, &[a]).unwrap();
            let n12 = n_kernel(&combo, &[a]).unwrap();
            let w1 = w_kernel(&q1, &[a]).unwrap();
            let w2 = w_kernel(&q2, &[a]).unwrap();
            let w12 = w_kernel(&combo, &[a]).unwrap();
            for i in 0..n1.len() {
                prop_assert!((n12[i] - n1[i] - s * n2[i]).abs() < 1e-12);
                prop_assert!((w12[i] - w1[i] - s * w2[i]).abs() < 1e-12);
            }
            prop_assert!(kernel_pair(&combo, &[a]).unwrap().n_integral().abs() < 1e-9);
        }
    }
}
