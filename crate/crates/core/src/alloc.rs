//! Power allocation and covariance design.
//!
//! * [`water_fill`]: classic water-filling over parallel channels.
//! * [`sr_optimal_covariance`]: sensing-rate-optimal probing covariance.
//! * [`sum_power_iwf`]: sum-power iterative water-filling on the dual MAC.
//! * [`mac_to_bc_transform`]: maps dual-MAC powers to downlink DPC covariances.
//! * [`synthesize_waveform`]: an equal-slot-power waveform with a given Gram.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mi_core::{self, NoiseModel};
use crate::model::{tol_for, TargetResponseStats};
use crate::scalar::{cplx, epsilon, real, to_f64, CMat, CVec, Real};

/// Maximum bisection steps on the water level.
pub const WATER_FILL_MAX_ITER: usize = 200;
/// Default stationarity tolerance for [`sum_power_iwf`].
pub const IWF_TOL: f64 = 1e-9;
/// Default iteration cap for [`sum_power_iwf`].
pub const IWF_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFillResult<T: Real> {
    pub allocations: Vec<T>,
    pub water_level: T,
    pub iterations: usize,
}

/// Water-filling `q_i = max(0, mu - noise / gains_i)` with `sum q_i = budget`.
pub fn water_fill<T: Real>(gains: &[T], budget: T, noise: T) -> Result<WaterFillResult<T>> {
    if gains.is_empty() {
        return Err(Error::Empty("water_fill"));
    }
    if !(budget >= T::zero()) || !budget.is_finite() {
        return Err(Error::InvalidInput(format!("budget must be >= 0, got {budget}")));
    }
    if !(noise > T::zero()) || !noise.is_finite() {
        return Err(Error::InvalidInput(format!("noise must be > 0, got {noise}")));
    }
    if gains.iter().any(|&g| !(g > T::zero()) || !g.is_finite()) {
        return Err(Error::InvalidInput("channel gains must be finite and > 0".into()));
    }
    let floors: Vec<T> = gains.iter().map(|&g| noise / g).collect();
    Ok(fill_floors(&floors, budget))
}

/// Water-filling over floors `noise / gain`.
fn fill_floors<T: Real>(floors: &[T], budget: T) -> WaterFillResult<T> {
    let lo0 = floors.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b));
    let hi0 = floors.iter().copied().fold(T::min_value().unwrap(), |a, b| a.max(b)) + budget;
    if budget == T::zero() {
        return WaterFillResult {
            allocations: vec![T::zero(); floors.len()],
            water_level: lo0,
            iterations: 0,
        };
    }
    let filled = |mu: T| {
        floors
            .iter()
            .map(|&f| (mu - f).max(T::zero()))
            .fold(T::zero(), |a, b| a + b)
    };
    let (mut lo, mut hi) = (lo0, hi0);
    let mut iterations = 0;
    while iterations < WATER_FILL_MAX_ITER {
        iterations += 1;
        let mid = (lo + hi) * real(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if filled(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Close the level exactly on the active set found by bisection.
    let mut active: Vec<bool> = floors.iter().map(|&f| f < hi).collect();
    let mut mu = hi;
    for _ in 0..=floors.len() {
        let count = active.iter().filter(|&&a| a).count();
        let sum = floors
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .fold(T::zero(), |acc, (&f, _)| acc + f);
        mu = (budget + sum) / real(count.max(1) as f64);
        let next: Vec<bool> = floors.iter().map(|&f| f < mu).collect();
        if next == active {
            break;
        }
        active = next;
    }
    let allocations = floors.iter().map(|&f| (mu - f).max(T::zero())).collect();
    WaterFillResult {
        allocations,
        water_level: mu,
        iterations,
    }
}

/// Water-filling that tolerates zero gains; those channels receive nothing.
fn fill_gains<T: Real>(gains: &[T], budget: T) -> Vec<T> {
    let usable: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > T::zero()).collect();
    let mut out = vec![T::zero(); gains.len()];
    if usable.is_empty() {
        return out;
    }
    let floors: Vec<T> = usable.iter().map(|&i| T::one() / gains[i]).collect();
    let res = fill_floors(&floors, budget);
    for (slot, &i) in usable.iter().enumerate() {
        out[i] = res.allocations[slot];
    }
    out
}

/// Probing covariance maximizing the sensing MI under a white sensing noise:
/// eigenvectors of `R`, powers water-filled against `lambda_i(R) L / sigma2_s`.
pub fn sr_optimal_covariance<T: Real>(
    target: &TargetResponseStats<T>,
    budget: T,
    sigma2_s: T,
    l_frame: usize,
    _n_rx: usize,
) -> Result<CMat<T>> {
    let m = target.m();
    if !(budget >= T::zero()) {
        return Err(Error::InvalidInput(format!("budget must be >= 0, got {budget}")));
    }
    if budget == T::zero() {
        return Ok(CMat::zeros(m, m));
    }
    let (lambda, u) = linalg::eigh(&target.r_corr);
    let top = lambda.last().copied().unwrap_or_else(T::zero);
    let cut = top * real(1e-12);
    let l: T = real(l_frame as f64);
    let gains: Vec<T> = lambda
        .iter()
        .map(|&x| if x > cut { x * l / sigma2_s } else { T::zero() })
        .collect();
    let q = fill_gains(&gains, budget);
    Ok(linalg::from_eig(&q, &u))
}

/// Output of the sum-power dual-MAC optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMacSolution<T: Real> {
    pub user_powers: Vec<T>,
    pub sum_rate: T,
    pub bc_covariances: Vec<CMat<T>>,
    pub encoding_order: Vec<usize>,
    pub iterations: usize,
    /// Objective after every accepted iterate, starting from the initial point.
    pub objective_history: Vec<T>,
}

fn stack<T: Real>(channels: &[CVec<T>]) -> Result<CMat<T>> {
    let m = channels.first().map_or(0, |h| h.len());
    if channels.iter().any(|h| h.len() != m) {
        return Err(Error::Dimension("downlink channel vectors differ in length".into()));
    }
    Ok(CMat::from_fn(m, channels.len(), |i, k| channels[k][i]))
}

/// Euclidean projection onto `{x >= 0, sum x = 1}`.
fn project_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - T::one()) / real((i + 1) as f64);
        if s - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

struct DualMac<'a, T: Real> {
    h: &'a CMat<T>,
    sigma2: T,
}

impl<T: Real> DualMac<'_, T> {
    fn objective(&self, p: &[T]) -> Result<T> {
        mi_core::comm_mi(self.h, p, &NoiseModel::White(self.sigma2))
    }

    /// `h_k^H (sigma2 I + H diag(p) H^H)^{-1} h_k` for every user.
    fn inverse_gains(&self, p: &[T]) -> Result<Vec<T>> {
        let m = self.h.nrows();
        let cov = linalg::eye::<T>(m).map(|z| z * self.sigma2) + mi_core::weighted_gram(self.h, p);
        let chol = linalg::cholesky(&cov).ok_or(Error::DegenerateNoise {
            min_eigenvalue: to_f64(linalg::min_eigenvalue(&cov)),
        })?;
        let x = chol.solve(self.h);
        Ok((0..self.h.ncols())
            .map(|k| self.h.column(k).dotc(&x.column(k)).re.max(T::zero()))
            .collect())
    }
}

/// Maximizes `log2 det(I + sigma2^-1 sum_k p_k h_k h_k^H)` over
/// `p >= 0, sum p = budget`.
///
/// Each step water-fills the users against their single-user effective gains
/// and averages the result with the current iterate (weight `1/K`), which keeps
/// the objective nondecreasing; a backtracking projected-gradient step takes
/// over if rounding ever breaks that. Stationarity is measured in normalized
/// coordinates `x = p / budget`: `||x - proj(x + budget * grad)||_inf <= tol`,
/// after discounting what rounding in the gradient can explain.
pub fn sum_power_iwf<T: Real>(
    channels: &[CVec<T>],
    budget: T,
    sigma2_c: T,
    tol: T,
    max_iter: usize,
) -> Result<DualMacSolution<T>> {
    let out = iwf_powers(channels, budget, sigma2_c, tol, max_iter)?;
    let (bc, order) = mac_to_bc_transform(channels, &out.user_powers, sigma2_c)?;
    Ok(DualMacSolution {
        user_powers: out.user_powers,
        sum_rate: out.sum_rate,
        bc_covariances: bc,
        encoding_order: order,
        iterations: out.iterations,
        objective_history: out.objective_history,
    })
}

/// Downlink sum capacity only, skipping the duality transform. Uses the
/// default tolerance and iteration cap.
///
/// Works on the `K x K` Gram matrix and moves power between the pair of users
/// with the largest and smallest marginal gains, maximizing the objective
/// exactly along that direction. The determinant lemma makes the objective a
/// concave quadratic in the moved power, so each step is closed form and the
/// objective never decreases. Two users converge in a single step.
pub fn sum_capacity<T: Real>(channels: &[CVec<T>], budget: T, sigma2_c: T) -> Result<T> {
    Ok(pairwise_sum_capacity(channels, budget, sigma2_c, default_iwf_tol(), IWF_MAX_ITER)?.0)
}

/// `||x - proj(x + grad)||_inf` on the unit simplex, less the part that
/// rounding in `grad` can produce (about `1024 eps max|grad|`). The floor is
/// negligible in `f64` but dominates in `f32`.
fn stationarity<T: Real>(x: &[T], grad: &[T]) -> T {
    let stepped: Vec<T> = x.iter().zip(grad).map(|(&a, &g)| a + g).collect();
    let proj = project_simplex(&stepped);
    let raw = x.iter().zip(&proj).fold(T::zero(), |m, (&a, &c)| m.max((a - c).abs()));
    let scale = grad.iter().fold(T::zero(), |m, &g| m.max(g.abs()));
    let floor = real::<T>(1024.0 * epsilon::<T>()) * scale;
    (raw - floor).max(T::zero())
}

/// Pairwise exact line search for the dual-MAC sum rate; returns the rate and
/// the user powers.
pub(crate) fn pairwise_sum_capacity<T: Real>(
    channels: &[CVec<T>],
    budget: T,
    sigma2_c: T,
    tol: T,
    max_iter: usize,
) -> Result<(T, Vec<T>)> {
    if channels.is_empty() {
        return Err(Error::Empty("sum_capacity"));
    }
    if !(budget >= T::zero()) || !budget.is_finite() {
        return Err(Error::InvalidInput(format!("budget must be >= 0, got {budget}")));
    }
    NoiseModel::White(sigma2_c).validate()?;
    let h = stack(channels)?;
    let k = channels.len();
    if budget == T::zero() {
        return Ok((T::zero(), vec![T::zero(); k]));
    }
    let gram = h.adjoint() * &h;
    let ln2: T = real(std::f64::consts::LN_2);
    let mut p = vec![budget / real(k as f64); k];
    let mut residual = T::zero();
    for iter in 0..=max_iter {
        // A = H^H (sigma2 I + H P H^H)^-1 H = (sigma2 I + G P)^-1 G.
        let gp = CMat::from_fn(k, k, |i, j| gram[(i, j)] * p[j]);
        let lhs = linalg::eye::<T>(k).map(|z| z * sigma2_c) + gp;
        let a = lhs
            .lu()
            .solve(&gram)
            .ok_or_else(|| Error::InvalidInput("singular dual-MAC system".into()))?;
        let b: Vec<T> = (0..k).map(|i| a[(i, i)].re.max(T::zero())).collect();
        let grad: Vec<T> = b.iter().map(|&bk| bk * budget / ln2).collect();
        let x: Vec<T> = p.iter().map(|&pk| pk / budget).collect();
        residual = stationarity(&x, &grad);
        if residual <= tol || iter == max_iter {
            break;
        }
        let up = (0..k).fold(0, |best, i| if b[i] > b[best] { i } else { best });
        let Some(down) = (0..k)
            .filter(|&j| p[j] > T::zero() && j != up)
            .min_by(|&x, &y| b[x].partial_cmp(&b[y]).unwrap_or(std::cmp::Ordering::Equal))
        else {
            break;
        };
        let (aii, ajj) = (b[up], b[down]);
        let cross = a[(up, down)].norm_sqr().max(a[(down, up)].norm_sqr());
        // det ratio after moving t from `down` to `up`: 1 + t (aii - ajj) - c t^2.
        let c = (aii * ajj - cross).max(T::zero());
        let t_star = if c > T::zero() { (aii - ajj) / (c + c) } else { p[down] };
        let t = t_star.max(T::zero()).min(p[down]);
        if t == T::zero() {
            break;
        }
        p[up] += t;
        p[down] = if t == p[down] { T::zero() } else { p[down] - t };
    }
    if residual > tol * real(1e3) {
        return Err(Error::NotConverged {
            op: "sum_capacity",
            iterations: max_iter,
            residual: to_f64(residual),
            last_powers: p.iter().map(|&x| to_f64(x)).collect(),
        });
    }
    let rate = mi_core::comm_mi(&h, &p, &NoiseModel::White(sigma2_c))?;
    Ok((rate, p))
}

/// [`IWF_TOL`], loosened to what the scalar type can resolve.
pub fn default_iwf_tol<T: Real>() -> T {
    real(tol_for::<T>(IWF_TOL))
}

/// Iterations without objective gain after which a near-stationary iterate is accepted.
const STALL_ITERS: usize = 50;

struct IwfOutcome<T: Real> {
    user_powers: Vec<T>,
    sum_rate: T,
    iterations: usize,
    objective_history: Vec<T>,
}

fn iwf_powers<T: Real>(channels: &[CVec<T>], budget: T, sigma2_c: T, tol: T, max_iter: usize) -> Result<IwfOutcome<T>> {
    if channels.is_empty() {
        return Err(Error::Empty("sum_power_iwf"));
    }
    if !(budget >= T::zero()) || !budget.is_finite() {
        return Err(Error::InvalidInput(format!("budget must be >= 0, got {budget}")));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidInput("tol must be > 0".into()));
    }
    NoiseModel::White(sigma2_c).validate()?;
    let h = stack(channels)?;
    let k = channels.len();
    let mac = DualMac {
        h: &h,
        sigma2: sigma2_c,
    };

    let finish = |p: Vec<T>, rate: T, iterations: usize, history: Vec<T>| -> Result<IwfOutcome<T>> {
        Ok(IwfOutcome {
            user_powers: p,
            sum_rate: rate,
            iterations,
            objective_history: history,
        })
    };

    if budget == T::zero() {
        return finish(vec![T::zero(); k], T::zero(), 0, vec![T::zero()]);
    }

    let ln2: T = real(std::f64::consts::LN_2);
    let kk: T = real(k as f64);
    let mut p = vec![budget / kk; k];
    let mut f = mac.objective(&p)?;
    let mut history = vec![f];
    let mut residual = T::zero();
    let mut stalled = 0usize;
    let stall_tol: T = real(epsilon::<T>().sqrt());

    for iter in 0..max_iter {
        let b = mac.inverse_gains(&p)?;
        // Scaled gradient of the objective in x = p / budget.
        let grad: Vec<T> = b.iter().map(|&bk| bk * budget / ln2).collect();
        let x: Vec<T> = p.iter().map(|&pk| pk / budget).collect();
        residual = stationarity(&x, &grad);
        // A long stall near the optimum means the scalar cannot resolve further.
        if residual <= tol || (stalled >= STALL_ITERS && residual <= stall_tol) {
            return finish(p, f, iter, history);
        }

        // Effective single-user gains with the user's own term removed.
        let eff: Vec<T> = b
            .iter()
            .zip(&p)
            .map(|(&bk, &pk)| {
                let d = T::one() - pk * bk;
                if d > T::zero() {
                    bk / d
                } else {
                    T::zero()
                }
            })
            .collect();
        let wf = fill_gains(&eff, budget);
        let candidate: Vec<T> = wf
            .iter()
            .zip(&p)
            .map(|(&w, &old)| w / kk + old * (kk - T::one()) / kk)
            .collect();
        let f_cand = mac.objective(&candidate)?;
        let slack = real::<T>(tol_for::<T>(1e-13)) * f.abs().max(T::one());
        if f_cand >= f - slack {
            stalled = if f_cand > f + slack { 0 } else { stalled + 1 };
            p = candidate;
            f = f_cand.max(f);
        } else {
            // Projected-gradient safeguard with Armijo backtracking.
            let mut t = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                let trial_x = project_simplex(&x.iter().zip(&grad).map(|(&a, &g)| a + t * g).collect::<Vec<_>>());
                let trial: Vec<T> = trial_x.iter().map(|&xi| xi * budget).collect();
                let f_trial = mac.objective(&trial)?;
                let ascent = grad
                    .iter()
                    .zip(trial_x.iter().zip(&x))
                    .fold(T::zero(), |acc, (&g, (&a, &b))| acc + g * (a - b));
                if f_trial >= f + real::<T>(1e-4) * ascent * ln2 && f_trial >= f {
                    p = trial;
                    f = f_trial;
                    accepted = true;
                    break;
                }
                t *= real(0.5);
            }
            if !accepted {
                break;
            }
        }
        history.push(f);
    }
    Err(Error::NotConverged {
        op: "sum_power_iwf",
        iterations: history.len() - 1,
        residual: to_f64(residual),
        last_powers: p.iter().map(|&x| to_f64(x)).collect(),
    })
}

/// Encoding order used by the duality transform: decreasing channel norm,
/// ties in input order.
pub fn encoding_order<T: Real>(channels: &[CVec<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..channels.len()).collect();
    order.sort_by(|&a, &b| {
        channels[b]
            .norm_squared()
            .partial_cmp(&channels[a].norm_squared())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Maps dual-MAC powers to downlink covariances that achieve the same per-user
/// rates under dirty-paper coding with the returned encoding order.
///
/// The user encoded `i`-th in the downlink is decoded with the MMSE receiver
/// against users encoded before it in the dual MAC; its beam is that receive
/// filter and the downlink powers are solved backwards from the last encoded
/// user.
pub fn mac_to_bc_transform<T: Real>(
    channels: &[CVec<T>],
    mac_powers: &[T],
    sigma2_c: T,
) -> Result<(Vec<CMat<T>>, Vec<usize>)> {
    let k = channels.len();
    if mac_powers.len() != k {
        return Err(Error::Dimension(format!("{} powers for {k} users", mac_powers.len())));
    }
    if mac_powers.iter().any(|&p| !(p >= T::zero())) {
        return Err(Error::InvalidInput("MAC powers must be >= 0".into()));
    }
    NoiseModel::White(sigma2_c).validate()?;
    let m = channels.first().map_or(0, |h| h.len());
    let order = encoding_order(channels);

    let mut beams: Vec<Option<CVec<T>>> = vec![None; k];
    let mut sinr = vec![T::zero(); k];
    let mut interference = linalg::eye::<T>(m).map(|z| z * sigma2_c);
    for &u in &order {
        let h = &channels[u];
        let p = mac_powers[u];
        if p > T::zero() && h.norm_squared() > T::zero() {
            let chol = linalg::cholesky(&interference).ok_or(Error::DegenerateNoise {
                min_eigenvalue: to_f64(linalg::min_eigenvalue(&interference)),
            })?;
            let filt = chol.solve(h);
            sinr[u] = p * h.dotc(&filt).re;
            let norm = filt.norm();
            beams[u] = Some(filt.map(|z| z / norm));
            interference += (h * h.adjoint()).map(|z| z * p);
        }
    }

    let mut q = vec![T::zero(); k];
    for i in (0..k).rev() {
        let u = order[i];
        let Some(beam) = &beams[u] else { continue };
        let h = &channels[u];
        let gain = h.dotc(beam).norm_sqr();
        let mut denom = sigma2_c;
        for &v in &order[i + 1..] {
            if let Some(bv) = &beams[v] {
                denom += q[v] * h.dotc(bv).norm_sqr();
            }
        }
        if gain > T::zero() {
            q[u] = sinr[u] * denom / gain;
        }
    }

    let covs = (0..k)
        .map(|u| match &beams[u] {
            Some(b) if q[u] > T::zero() => linalg::hermitize(&(b * b.adjoint()).map(|z| z * q[u])),
            _ => CMat::zeros(m, m),
        })
        .collect();
    Ok((covs, order))
}

/// An `M x L` waveform `W` with `W W^H = L Q` and equal power in every slot.
///
/// The covariance square root is spread over the first `rank(Q)` rows of the
/// `L`-point DFT matrix, whose entries all have unit magnitude.
pub fn synthesize_waveform<T: Real>(q_cov: &CMat<T>, l_frame: usize) -> Result<CMat<T>> {
    let m = q_cov.nrows();
    if q_cov.ncols() != m {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    if l_frame == 0 {
        return Err(Error::InvalidInput("l_frame must be >= 1".into()));
    }
    let scale = to_f64(linalg::fro(q_cov)).max(1.0);
    linalg::ensure_psd(q_cov, tol_for::<T>(mi_core::PSD_FLOOR) * scale)?;
    let (lambda, u) = linalg::eigh(q_cov);
    let top = lambda.last().copied().unwrap_or_else(T::zero).max(T::zero());
    let cut = top * real(tol_for::<T>(1e-12));
    let kept: Vec<usize> = (0..m)
        .rev()
        .filter(|&i| lambda[i] > cut && lambda[i] > T::zero())
        .collect();
    if kept.len() > l_frame {
        return Err(Error::InfeasibleFrame {
            rank: kept.len(),
            l_frame,
        });
    }
    let mut w = CMat::zeros(m, l_frame);
    for (row, &i) in kept.iter().enumerate() {
        let amp = lambda[i].sqrt();
        for l in 0..l_frame {
            let phase = -2.0 * PI * (row * l % l_frame) as f64 / l_frame as f64;
            let f = Complex::new(real::<T>(phase.cos()), real::<T>(phase.sin()));
            for r in 0..m {
                w[(r, l)] += u[(r, i)] * f * cplx(amp);
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::exp_corr_matrix;
    use crate::oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kkt_ok(gains: &[f64], budget: f64, noise: f64, res: &WaterFillResult<f64>) -> bool {
        let total: f64 = res.allocations.iter().sum();
        if (total - budget).abs() > 1e-10 {
            return false;
        }
        gains.iter().zip(&res.allocations).all(|(&g, &q)| {
            let floor = noise / g;
            q >= 0.0
                && if q > 0.0 {
                    (floor + q - res.water_level).abs() <= 1e-8
                } else {
                    floor >= res.water_level - 1e-8
                }
        })
    }

    #[test]
    fn symmetric_channels_split_evenly() {
        let r = water_fill(&[1.0f64, 1.0, 1.0, 1.0], 4.0, 1.0).unwrap();
        for q in &r.allocations {
            assert!((q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_budget_fills_best_channel_only() {
        let r = water_fill(&[2.0f64, 1.0], 0.25, 1.0).unwrap();
        assert!((r.allocations[0] - 0.25).abs() < 1e-12);
        assert_eq!(r.allocations[1], 0.0);
        assert!((r.water_level - 0.75).abs() < 1e-12);
        let grid = oracle::grid_water_fill(&[2.0, 1.0], 0.25, 1.0, 20_000);
        assert!((grid.0[0] - 0.25).abs() < 1e-3);
    }

    #[test]
    fn two_channel_level() {
        let r = water_fill(&[2.0f64, 1.0], 2.0, 1.0).unwrap();
        assert!((r.allocations[0] - 1.25).abs() < 1e-12);
        assert!((r.allocations[1] - 0.75).abs() < 1e-12);
        assert!((r.water_level - 1.75).abs() < 1e-12);
        let grid = oracle::grid_water_fill(&[2.0, 1.0], 2.0, 1.0, 20_000);
        assert!((grid.0[0] - 1.25).abs() < 1e-3);
    }

    #[test]
    fn zero_budget_and_errors() {
        let r = water_fill(&[3.0, 1.0], 0.0, 1.0).unwrap();
        assert!(r.allocations.iter().all(|&q| q == 0.0));
        assert!(water_fill(&[1.0], -1.0, 1.0).is_err());
        assert!(water_fill(&[0.0, 1.0], 1.0, 1.0).is_err());
        assert!(water_fill::<f64>(&[], 1.0, 1.0).is_err());
    }

    #[test]
    fn kkt_certificate_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = rng.random_range(1..8);
            let gains: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
            let budget = rng.random_range(0.0..20.0);
            let noise = rng.random_range(0.1..3.0);
            let r = water_fill(&gains, budget, noise).unwrap();
            assert!(kkt_ok(&gains, budget, noise, &r), "{gains:?} {budget} {noise} {r:?}");
        }
    }

    #[test]
    fn sr_covariance_identity_target() {
        let t = exp_corr_matrix::<f64>(3, 0.0).unwrap();
        let q = sr_optimal_covariance(&t, 3.0, 1.0, 8, 2).unwrap();
        assert!(linalg::fro(&(q - CMat::identity(3, 3))) < 1e-12);
        let z = sr_optimal_covariance(&t, 0.0, 1.0, 8, 2).unwrap();
        assert_eq!(z, CMat::zeros(3, 3));
    }

    #[test]
    fn sr_covariance_beats_random_probes() {
        let t = exp_corr_matrix::<f64>(3, 0.5).unwrap();
        let (l, n) = (4, 2);
        let noise = NoiseModel::White(1.0);
        let best = sr_optimal_covariance(&t, 1.0, 1.0, l, n).unwrap();
        assert!((best.trace().re - 1.0).abs() < 1e-12);
        let opt = mi_core::sensing_mi(&t, &best, l, n, &noise).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let q = oracle::random_psd_with_trace(&mut rng, 3, 1.0);
            let v = mi_core::sensing_mi(&t, &q, l, n, &noise).unwrap();
            assert!(opt >= v - 1e-12);
        }
    }

    #[test]
    fn iwf_single_user() {
        let h = vec![CVec::from_vec(vec![Complex::new(1.0, 0.5), Complex::new(-0.3, 0.2)])];
        let sol = sum_power_iwf(&h, 2.0, 1.0, IWF_TOL, IWF_MAX_ITER).unwrap();
        assert!((sol.user_powers[0] - 2.0).abs() < 1e-12);
        let want = (1.0 + 2.0 * h[0].norm_squared()).log2();
        assert!((sol.sum_rate - want).abs() < 1e-12);
    }

    #[test]
    fn iwf_orthogonal_equal_norms_split_evenly() {
        let z = Complex::new(0.0, 0.0);
        let h = vec![
            CVec::from_vec(vec![Complex::new(1.0, 0.0), z]),
            CVec::from_vec(vec![z, Complex::new(0.0, 1.0)]),
        ];
        let sol = sum_power_iwf(&h, 3.0, 1.0, IWF_TOL, IWF_MAX_ITER).unwrap();
        assert!((sol.user_powers[0] - 1.5).abs() < 1e-9);
        assert!((sol.user_powers[1] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn iwf_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let h: Vec<CVec<f64>> = (0..2).map(|_| oracle::random_cvec(&mut rng, 2)).collect();
            let budget = rng.random_range(0.5..20.0);
            let sol = sum_power_iwf(&h, budget, 1.0, IWF_TOL, IWF_MAX_ITER).unwrap();
            let grid = oracle::grid_dual_mac_two_users(&h, budget, 1.0, 1000);
            assert!((sol.sum_rate - grid).abs() < 1e-4, "{} vs {grid}", sol.sum_rate);
            assert!(sol.sum_rate >= grid - 1e-12);
            assert!((sol.user_powers.iter().sum::<f64>() - budget).abs() < 1e-8);
        }
    }

    #[test]
    fn iwf_objective_nondecreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let k = rng.random_range(1..5);
            let m = rng.random_range(1..5);
            let h: Vec<CVec<f64>> = (0..k).map(|_| oracle::random_cvec(&mut rng, m)).collect();
            let budget = 10f64.powf(rng.random_range(-1.0..4.0));
            let sol = sum_power_iwf(&h, budget, 1.0, IWF_TOL, IWF_MAX_ITER).unwrap();
            for w in sol.objective_history.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{:?}", sol.objective_history);
            }
        }
    }

    #[test]
    fn iwf_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h: Vec<CVec<f64>> = (0..3).map(|_| oracle::random_cvec(&mut rng, 2)).collect();
        match sum_power_iwf(&h, 5.0, 1.0, 1e-15, 1) {
            Err(Error::NotConverged { last_powers, .. }) => assert_eq!(last_powers.len(), 3),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn duality_single_user() {
        let h = vec![CVec::from_vec(vec![Complex::new(0.6, -0.2), Complex::new(0.1, 0.9)])];
        let (q, order) = mac_to_bc_transform(&h, &[2.5], 1.0).unwrap();
        assert_eq!(order, vec![0]);
        let hh = h[0].map(|z| z / h[0].norm());
        let want = (&hh * hh.adjoint()).map(|z| z * 2.5);
        assert!(linalg::fro(&(&q[0] - want)) < 1e-12);
    }

    #[test]
    fn duality_zero_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h: Vec<CVec<f64>> = (0..3).map(|_| oracle::random_cvec(&mut rng, 2)).collect();
        let (q, _) = mac_to_bc_transform(&h, &[0.0, 0.0, 0.0], 1.0).unwrap();
        assert!(q.iter().all(|c| c.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn duality_preserves_sum_power_and_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let k = rng.random_range(1..4);
            let m = rng.random_range(1..4);
            let h: Vec<CVec<f64>> = (0..k).map(|_| oracle::random_cvec(&mut rng, m)).collect();
            let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
            let (q, order) = mac_to_bc_transform(&h, &p, 1.0).unwrap();
            let traces: f64 = q.iter().map(|c| c.trace().re).sum();
            assert!((traces - p.iter().sum::<f64>()).abs() < 1e-6);
            let mac = mi_core::comm_mi(&stack(&h).unwrap(), &p, &NoiseModel::White(1.0)).unwrap();
            let bc: f64 = crate::downlink::dpc_rates(&h, &q, &order, 1.0).unwrap().iter().sum();
            assert!((mac - bc).abs() < 1e-8, "{mac} vs {bc}");
        }
    }

    #[test]
    fn waveform_identity_covariance() {
        let q = CMat::<f64>::identity(3, 3).map(|z| z * (6.0 / 3.0));
        let w = synthesize_waveform(&q, 3).unwrap();
        let gram = &w * w.adjoint();
        assert!(linalg::fro(&(gram - q.map(|z| z * 3.0))) < 1e-9);
        for l in 0..3 {
            assert!((w.column(l).norm_squared() - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn waveform_rank_one() {
        let v = CVec::from_vec(vec![Complex::new(1.0f64, 0.0), Complex::new(0.5, -0.5)]);
        let q = &v * v.adjoint();
        let w = synthesize_waveform(&q, 4).unwrap();
        let gram = &w * w.adjoint();
        assert!(linalg::fro(&(gram - q.map(|z| z * 4.0))) < 1e-9);
        let p0 = w.column(0).norm_squared();
        for l in 1..4 {
            assert!((w.column(l).norm_squared() - p0).abs() < 1e-9);
        }
    }

    #[test]
    fn waveform_infeasible_frame() {
        let q = CMat::<f64>::identity(2, 2);
        assert!(matches!(
            synthesize_waveform(&q, 1),
            Err(Error::InfeasibleFrame { rank: 2, l_frame: 1 })
        ));
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.2f64, 0.3, 0.5]);
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[2] - 0.5).abs() < 1e-15);
        let p = project_simplex(&[2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn pairwise_matches_iwf() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let m = rng.random_range(1..=4);
            let k = rng.random_range(1..=4);
            let chans: Vec<CVec<f64>> = (0..k)
                .map(|_| {
                    CVec::from_fn(m, |_, _| {
                        Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    })
                })
                .collect();
            let budget = 10f64.powf(rng.random_range(-1.0..3.0));
            let (rate, p) = pairwise_sum_capacity(&chans, budget, 1.0, IWF_TOL, IWF_MAX_ITER).unwrap();
            let iwf = sum_power_iwf(&chans, budget, 1.0, IWF_TOL, IWF_MAX_ITER).unwrap();
            assert!(
                (rate - iwf.sum_rate).abs() < 1e-8 * iwf.sum_rate.max(1.0),
                "{rate} vs {}",
                iwf.sum_rate
            );
            assert!((p.iter().sum::<f64>() - budget).abs() < 1e-9 * budget);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn pairwise_two_users_one_step() {
        let chans = vec![
            CVec::from_vec(vec![Complex::new(1.0f64, 0.0), Complex::new(0.3, 0.1)]),
            CVec::from_vec(vec![Complex::new(0.2, 0.0), Complex::new(0.9, -0.2)]),
        ];
        let (rate, _) = pairwise_sum_capacity(&chans, 5.0, 1.0, IWF_TOL, 1).unwrap();
        let grid = oracle::grid_dual_mac_two_users(&chans, 5.0, 1.0, 100_000);
        assert!(rate >= grid - 1e-9);
    }
}
