//! Closed-form mutual-information kernels.
//!
//! Communication MI is the Gaussian-input log-det capacity of a
//! multiple-access channel; sensing MI is the log-det information that an
//! `N x L` echo carries about a Gaussian target response given the probing
//! covariance.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{tol_for, TargetResponseStats};
use crate::scalar::{cplx, real, to_f64, CMat, CVec, Real};

/// Smallest admissible noise eigenvalue.
pub const NOISE_FLOOR: f64 = 1e-14;
/// Most negative eigenvalue tolerated in a transmit covariance.
pub const PSD_FLOOR: f64 = 1e-10;

/// Noise (or interference-plus-noise) seen by a receiver.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel<T: Real> {
    /// `power * I`.
    White(T),
    /// Full Hermitian positive-definite covariance.
    Colored(CMat<T>),
}

impl<T: Real> NoiseModel<T> {
    pub fn white(power: T) -> Self {
        NoiseModel::White(power)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::White(p) => {
                if !(*p > real(NOISE_FLOOR)) || !p.is_finite() {
                    return Err(Error::DegenerateNoise {
                        min_eigenvalue: to_f64(*p),
                    });
                }
            }
            NoiseModel::Colored(c) => {
                if c.nrows() != c.ncols() {
                    return Err(Error::Dimension("noise covariance must be square".into()));
                }
                let defect = to_f64(linalg::hermitian_defect(c));
                let scale = to_f64(linalg::fro(c)).max(1.0);
                if defect > tol_for::<T>(1e-12) * scale {
                    return Err(Error::InvalidInput(format!(
                        "noise covariance not Hermitian (defect {defect:e})"
                    )));
                }
                let min = linalg::min_eigenvalue(c);
                if !(min > real(NOISE_FLOOR)) {
                    return Err(Error::DegenerateNoise {
                        min_eigenvalue: to_f64(min),
                    });
                }
            }
        }
        Ok(())
    }

    /// Eigenvalues of the covariance on an `n`-antenna receiver.
    pub fn eigenvalues(&self, n: usize) -> Result<Vec<T>> {
        self.validate()?;
        match self {
            NoiseModel::White(p) => Ok(vec![*p; n]),
            NoiseModel::Colored(c) => {
                if c.nrows() != n {
                    return Err(Error::Dimension(format!(
                        "noise covariance is {}x{}, receiver has {n} antennas",
                        c.nrows(),
                        c.ncols()
                    )));
                }
                Ok(linalg::eigvalsh(c))
            }
        }
    }

    /// Explicit `n x n` covariance.
    pub fn covariance(&self, n: usize) -> CMat<T> {
        match self {
            NoiseModel::White(p) => CMat::identity(n, n).map(|z| z * *p),
            NoiseModel::Colored(c) => c.clone(),
        }
    }
}

fn check_powers<T: Real>(h: &CMat<T>, powers: &[T]) -> Result<()> {
    if powers.len() != h.ncols() {
        return Err(Error::Dimension(format!(
            "{} user powers for {} channel columns",
            powers.len(),
            h.ncols()
        )));
    }
    if powers.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
        return Err(Error::InvalidInput("user powers must be finite and >= 0".into()));
    }
    Ok(())
}

/// `H diag(sqrt(p))`.
fn scale_columns<T: Real>(h: &CMat<T>, powers: &[T]) -> CMat<T> {
    let mut b = h.clone();
    for (k, &p) in powers.iter().enumerate() {
        let s = cplx(p.sqrt());
        b.column_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    b
}

/// Communication MI `log2 det(I + S^-1 H diag(p) H^H)` in bits/s/Hz.
pub fn comm_mi<T: Real>(h: &CMat<T>, powers: &[T], noise: &NoiseModel<T>) -> Result<T> {
    check_powers(h, powers)?;
    noise.validate()?;
    let k = h.ncols();
    if k == 0 {
        return Ok(T::zero());
    }
    let b = scale_columns(h, powers);
    let whitened = match noise {
        NoiseModel::White(s2) => b.map(|z| z / s2.sqrt()),
        NoiseModel::Colored(c) => {
            if c.nrows() != h.nrows() {
                return Err(Error::Dimension(format!(
                    "noise covariance is {}x{}, channel has {} rows",
                    c.nrows(),
                    c.ncols(),
                    h.nrows()
                )));
            }
            let chol = linalg::cholesky(c).ok_or(Error::DegenerateNoise {
                min_eigenvalue: to_f64(linalg::min_eigenvalue(c)),
            })?;
            let mut w = b;
            chol.l_dirty().solve_lower_triangular_mut(&mut w);
            w
        }
    };
    let gram = linalg::eye::<T>(k) + whitened.adjoint() * &whitened;
    let value =
        linalg::log2det_hpd(&gram).ok_or_else(|| Error::InvalidInput("non-finite channel Gram matrix".into()))?;
    Ok(value.max(T::zero()))
}

/// Per-user rates of an MMSE-SIC receiver decoding users in `order`.
///
/// The user decoded `i`-th sees the noise plus every user that has not yet
/// been decoded; the rates sum to [`comm_mi`] for every order.
pub fn mmse_sic_user_rates<T: Real>(
    h: &CMat<T>,
    powers: &[T],
    noise: &NoiseModel<T>,
    order: &[usize],
) -> Result<Vec<T>> {
    check_powers(h, powers)?;
    noise.validate()?;
    let k = h.ncols();
    let mut seen = vec![false; k];
    if order.len() != k || order.iter().any(|&u| u >= k || std::mem::replace(&mut seen[u], true)) {
        return Err(Error::InvalidInput(format!("{order:?} is not a permutation of 0..{k}")));
    }
    let n = h.nrows();
    let base = noise.covariance(n);
    if base.nrows() != n {
        return Err(Error::Dimension("noise covariance does not match channel rows".into()));
    }
    let mut rates = vec![T::zero(); k];
    for (i, &u) in order.iter().enumerate() {
        let mut cov = base.clone();
        for &v in &order[i + 1..] {
            let hv: CVec<T> = h.column(v).into_owned();
            cov += (&hv * hv.adjoint()).map(|z| z * powers[v]);
        }
        let chol = linalg::cholesky(&cov).ok_or(Error::DegenerateNoise {
            min_eigenvalue: to_f64(linalg::min_eigenvalue(&cov)),
        })?;
        let hu: CVec<T> = h.column(u).into_owned();
        let x = chol.solve(&hu);
        let sinr = powers[u] * hu.dotc(&x).re;
        rates[u] = (T::one() + sinr.max(T::zero())).log2();
    }
    Ok(rates)
}

/// Eigenvalues of `L R^{1/2} Q R^{1/2}`, clamped at zero.
pub(crate) fn sensing_gains<T: Real>(r: &CMat<T>, q: &CMat<T>, l_frame: usize) -> Vec<T> {
    let root = linalg::psd_sqrt(r);
    let a = &root * q * &root;
    let l: T = real(l_frame as f64);
    linalg::eigvalsh(&a)
        .into_iter()
        .map(|x| (x * l).max(T::zero()))
        .collect()
}

/// Sensing MI per frame, in bits: `sum_i sum_j log2(1 + l_i / nu_j)` where
/// `l_i` are the eigenvalues of `L R^{1/2} Q R^{1/2}` and `nu_j` those of the
/// noise covariance.
pub fn sensing_mi<T: Real>(
    target: &TargetResponseStats<T>,
    q_cov: &CMat<T>,
    l_frame: usize,
    n_rx: usize,
    noise: &NoiseModel<T>,
) -> Result<T> {
    let m = target.m();
    if q_cov.nrows() != m || q_cov.ncols() != m {
        return Err(Error::Dimension(format!(
            "transmit covariance is {}x{}, expected {m}x{m}",
            q_cov.nrows(),
            q_cov.ncols()
        )));
    }
    if l_frame == 0 || n_rx == 0 {
        return Err(Error::InvalidInput("l_frame and n_rx must be >= 1".into()));
    }
    let scale = to_f64(linalg::fro(q_cov)).max(1.0);
    linalg::ensure_psd(q_cov, tol_for::<T>(PSD_FLOOR) * scale)?;
    let nu = noise.eigenvalues(n_rx)?;
    let gains = sensing_gains(&target.r_corr, q_cov, l_frame);
    let total = gains
        .iter()
        .filter(|&&g| g > T::zero())
        .flat_map(|&g| nu.iter().map(move |&v| (T::one() + g / v).log2()))
        .fold(T::zero(), |acc, x| acc + x);
    Ok(total.max(T::zero()))
}

/// Per-slot, per-receive-antenna echo power `trace(R Q)` of a probing signal
/// with covariance `Q` and equal power in every slot.
pub fn sensing_interference_power<T: Real>(target: &TargetResponseStats<T>, q_cov: &CMat<T>) -> T {
    linalg::trace_product(&target.r_corr, q_cov).max(T::zero())
}

/// `sum_k p_k h_k h_k^H` for channels stored column-wise.
pub fn weighted_gram<T: Real>(h: &CMat<T>, powers: &[T]) -> CMat<T> {
    let b = scale_columns(h, powers);
    linalg::hermitize(&(&b * b.adjoint()))
}
