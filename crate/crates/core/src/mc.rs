//! Seeded channel generation and ergodic averaging.
//!
//! Every trial draws from its own ChaCha stream keyed by
//! `(master_seed, trial_index)`, so results do not depend on how trials are
//! scheduled across threads. Reductions always run in trial-index order.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CommChannel, RatePoint, ScenarioConfig, ScenarioKind, SystemDims};
use crate::scalar::{real, CMat, CVec, Real};

/// Independent random substream for one Monte Carlo trial.
#[derive(Debug, Clone)]
pub struct TrialStream {
    pub master_seed: u64,
    pub trial_index: u64,
    rng: ChaCha8Rng,
}

impl TrialStream {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trial_index);
        Self {
            master_seed,
            trial_index,
            rng,
        }
    }

    /// One circularly-symmetric complex Gaussian with unit variance.
    pub fn complex_normal<T: Real>(&mut self) -> Complex<T> {
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Complex::new(real(re * s), real(im * s))
    }
}

/// Rayleigh-faded channel draw: i.i.d. `CN(0, 1)` entries.
pub fn sample_channels<T: Real>(stream: &mut TrialStream, dims: &SystemDims, kind: ScenarioKind) -> CommChannel<T> {
    match kind {
        ScenarioKind::DownlinkSa | ScenarioKind::DownlinkMa => CommChannel::Downlink(
            (0..dims.k_users)
                .map(|_| CVec::from_fn(dims.m_tx, |_, _| stream.complex_normal()))
                .collect(),
        ),
        ScenarioKind::Uplink => {
            // Column-major fill: user by user.
            let mut h = CMat::zeros(dims.n_rx, dims.k_users);
            for k in 0..dims.k_users {
                for n in 0..dims.n_rx {
                    h[(n, k)] = stream.complex_normal();
                }
            }
            CommChannel::Uplink(h)
        }
    }
}

/// Mean and standard error of the mean of a rate point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ergodic<T: Real> {
    pub mean: RatePoint<T>,
    pub stderr: RatePoint<T>,
}

fn mean_stderr<T: Real>(xs: impl Iterator<Item = T> + Clone, n: usize) -> (T, T) {
    let nn: T = real(n as f64);
    let mean = xs.clone().fold(T::zero(), |a, b| a + b) / nn;
    if n < 2 {
        return (mean, T::zero());
    }
    let ss = xs.fold(T::zero(), |a, x| a + (x - mean) * (x - mean));
    let sd = (ss / real((n - 1) as f64)).sqrt();
    (mean, sd / nn.sqrt())
}

/// Ergodic average of several operating points evaluated on the same channel
/// draws. `evaluator` returns one rate point per grid index; the result keeps
/// that order.
pub fn ergodic_grid<T, F>(scenario: &ScenarioConfig, trials: usize, evaluator: F) -> Result<Vec<Ergodic<T>>>
where
    T: Real,
    F: Fn(&CommChannel<T>) -> Result<Vec<RatePoint<T>>> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let per_trial: Vec<Vec<RatePoint<T>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = TrialStream::new(scenario.seed, t as u64);
            let channel = sample_channels::<T>(&mut stream, &scenario.dims, scenario.kind);
            evaluator(&channel)
        })
        .collect::<Result<_>>()?;
    let points = per_trial[0].len();
    if per_trial.iter().any(|v| v.len() != points) {
        return Err(Error::Dimension("evaluator returned ragged grids".into()));
    }
    Ok((0..points)
        .map(|g| {
            let (cr, cr_se) = mean_stderr(per_trial.iter().map(|v| v[g].cr), trials);
            let (sr, sr_se) = mean_stderr(per_trial.iter().map(|v| v[g].sr), trials);
            Ergodic {
                mean: RatePoint::new(cr, sr),
                stderr: RatePoint::new(cr_se, sr_se),
            }
        })
        .collect())
}

/// Ergodic average of a single operating point.
pub fn ergodic_average<T, F>(scenario: &ScenarioConfig, trials: usize, evaluator: F) -> Result<Ergodic<T>>
where
    T: Real,
    F: Fn(&CommChannel<T>) -> Result<RatePoint<T>> + Sync,
{
    let mut out = ergodic_grid(scenario, trials, |h| Ok(vec![evaluator(h)?]))?;
    Ok(out.remove(0))
}
