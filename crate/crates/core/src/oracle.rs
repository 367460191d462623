//! Independent reference computations and random instance generators.
//!
//! Everything here deliberately takes a different numerical route from the
//! production kernels (LU determinants instead of Cholesky/eigen sums, explicit
//! Kronecker products, brute-force grids and scans, sampling). It backs the unit
//! tests, the acceptance suite and the `validate` subcommand.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg;
use crate::model::{RatePoint, TargetResponseStats};
use crate::scalar::{CMat, CVec};

fn cn<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows x cols` matrix of unit-variance circular complex Gaussians.
pub fn random_cmat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat<f64> {
    CMat::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn random_cvec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec<f64> {
    CVec::from_fn(n, |_, _| cn(rng))
}

/// Random Hermitian positive-definite matrix with eigenvalues >= `floor`.
pub fn random_hpd<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> CMat<f64> {
    let a = random_cmat(rng, n, n);
    linalg::hermitize(&(&a * a.adjoint() + CMat::identity(n, n).map(|z| z * floor)))
}

/// Random PSD matrix with the given trace. Rank is drawn uniformly in `1..=m`.
pub fn random_psd_with_trace<R: Rng + ?Sized>(rng: &mut R, m: usize, trace: f64) -> CMat<f64> {
    let rank = rng.random_range(1..=m);
    let a = random_cmat(rng, m, rank);
    let g = linalg::hermitize(&(&a * a.adjoint()));
    let t = g.trace().re;
    g.map(|z| z * (trace / t))
}

/// Random full-rank target correlation with trace `m`.
pub fn random_target<R: Rng + ?Sized>(rng: &mut R, m: usize) -> TargetResponseStats<f64> {
    let g = random_hpd(rng, m, 0.05);
    let t = g.trace().re;
    TargetResponseStats::new(g.map(|z| z * (m as f64 / t))).expect("valid random target")
}

fn diag_powers(p: &[f64]) -> CMat<f64> {
    CMat::from_diagonal(&CVec::from_iterator(p.len(), p.iter().map(|&x| Complex::new(x, 0.0))))
}

/// Communication MI from the eigenvalues of the whitened Gram
/// `S^{-1/2} H P H^H S^{-1/2}`.
pub fn comm_mi_eig(h: &CMat<f64>, p: &[f64], noise_cov: &CMat<f64>) -> f64 {
    let (d, u) = linalg::eigh(noise_cov);
    let inv_root: Vec<f64> = d.iter().map(|&x| 1.0 / x.sqrt()).collect();
    let w = linalg::from_eig(&inv_root, &u);
    let g = &w * h * diag_powers(p) * h.adjoint() * &w;
    linalg::eigvalsh(&g).iter().map(|&x| (1.0 + x.max(0.0)).log2()).sum()
}

/// Communication MI from the LU determinant of `I + S^{-1} H P H^H`.
pub fn comm_mi_det(h: &CMat<f64>, p: &[f64], noise_cov: &CMat<f64>) -> f64 {
    let n = h.nrows();
    let inv = noise_cov.clone().try_inverse().expect("invertible noise");
    let a = CMat::identity(n, n) + inv * h * diag_powers(p) * h.adjoint();
    a.determinant().norm().log2()
}

/// Kronecker product of two complex matrices.
pub fn kron(a: &CMat<f64>, b: &CMat<f64>) -> CMat<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Sensing MI of a concrete `M x L` waveform: `log2 det(I_{NL} + B (x) S^{-1})`
/// with `B = W^H R W`.
pub fn kronecker_sensing_mi(r: &CMat<f64>, w: &CMat<f64>, noise_cov: &CMat<f64>) -> f64 {
    let b = w.adjoint() * r * w;
    let inv = noise_cov.clone().try_inverse().expect("invertible noise");
    let k = kron(&b, &inv);
    let n = k.nrows();
    (CMat::identity(n, n) + k).determinant().norm().log2()
}

/// Monte Carlo average of the per-slot, per-antenna echo power `|g^H w_l|^2`
/// with `g ~ CN(0, R)`.
pub fn echo_power_monte_carlo<R: Rng + ?Sized>(rng: &mut R, r: &CMat<f64>, w: &CMat<f64>, draws: usize) -> f64 {
    let root = linalg::psd_sqrt(r);
    let m = r.nrows();
    let l = w.ncols();
    let mut acc = 0.0;
    for _ in 0..draws {
        let g = &root * random_cvec(rng, m);
        for s in 0..l {
            acc += g.dotc(&w.column(s)).norm_sqr();
        }
    }
    acc / (draws * l) as f64
}

fn wf_objective(gains: &[f64], q: &[f64], noise: f64) -> f64 {
    gains.iter().zip(q).map(|(&g, &x)| (1.0 + g * x / noise).log2()).sum()
}

/// Dense grid search of `sum log2(1 + g q / noise)` over the budget simplex,
/// for up to three channels. Returns the best allocation and its value.
pub fn grid_water_fill(gains: &[f64], budget: f64, noise: f64, steps: usize) -> (Vec<f64>, f64) {
    assert!(!gains.is_empty() && gains.len() <= 3, "grid oracle handles n <= 3");
    let step = budget / steps as f64;
    let mut best = (vec![0.0; gains.len()], f64::NEG_INFINITY);
    let mut consider = |q: Vec<f64>| {
        let v = wf_objective(gains, &q, noise);
        if v > best.1 {
            best = (q, v);
        }
    };
    match gains.len() {
        1 => consider(vec![budget]),
        2 => (0..=steps).for_each(|i| {
            let a = i as f64 * step;
            consider(vec![a, (budget - a).max(0.0)]);
        }),
        _ => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = i as f64 * step;
                    let b = j as f64 * step;
                    consider(vec![a, b, (budget - a - b).max(0.0)]);
                }
            }
        }
    }
    best
}

/// Two-user dual-MAC sum rate maximized on a grid of `steps + 1` splits.
pub fn grid_dual_mac_two_users(h: &[CVec<f64>], budget: f64, sigma2: f64, steps: usize) -> f64 {
    assert_eq!(h.len(), 2);
    let m = h[0].len();
    let hm = CMat::from_fn(m, 2, |i, k| h[k][i]);
    let noise = CMat::identity(m, m).map(|z| z * sigma2);
    (0..=steps)
        .map(|i| {
            let a = budget * i as f64 / steps as f64;
            comm_mi_det(&hm, &[a, budget - a], &noise)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Pareto-maximal points by an O(n^2) dominance scan, duplicates removed,
/// sorted by increasing communication rate.
pub fn brute_force_pareto(points: &[RatePoint<f64>]) -> Vec<RatePoint<f64>> {
    let mut out: Vec<RatePoint<f64>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let dominated = points.iter().enumerate().any(|(j, q)| j != i && q.dominates(p));
        if !dominated && !out.iter().any(|q| q == p) {
            out.push(*p);
        }
    }
    out.sort_by(|a, b| a.cr.partial_cmp(&b.cr).unwrap());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kron_shape_and_entries() {
        let a = CMat::from_row_slice(1, 2, &[Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)]);
        let b = CMat::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 4));
        assert_eq!(k[(1, 3)], Complex::new(2.0, 0.0));
    }

    #[test]
    fn eig_and_det_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = random_cmat(&mut rng, 3, 2);
        let s = random_hpd(&mut rng, 3, 0.2);
        let a = comm_mi_eig(&h, &[1.0, 2.0], &s);
        let b = comm_mi_det(&h, &[1.0, 2.0], &s);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn random_target_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_target(&mut rng, 4);
        assert!((t.r_corr.trace().re - 4.0).abs() < 1e-12);
    }
}
