//! Uplink ISAC evaluators.
//!
//! The BS receives the users' signals and the target echo at once and
//! separates them by SIC. Sensing-centric (S-C) SIC decodes the users first,
//! treating the echo as noise, then senses cleanly; communications-centric
//! (C-C) SIC senses first against the users' signals and then decodes them
//! cleanly.

use crate::alloc;
use crate::downlink::{band_share, fmt_param, CurveRow, Mode, RegionRun, RegionSample};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mc::{self, Ergodic};
use crate::mi_core::{self, NoiseModel};
use crate::model::{unit_grid, CommChannel, RatePoint, ScenarioConfig, ScenarioKind, TargetResponseStats};
use crate::region::{SlopePair, SLOPE_POWERS};
use crate::scalar::{real, CMat, Real};

/// Number of time-sharing weights on the `P_s`-`P_c` segment.
pub const TIME_SHARE_POINTS: usize = 41;

/// Which signal the BS decodes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicOrder {
    SensingCentric,
    CommCentric,
}

/// Rate point of one SIC order for given user powers and probing covariance.
pub fn uplink_sic_point<T: Real>(
    channels: &CMat<T>,
    user_powers: &[T],
    q_sense: &CMat<T>,
    order: SicOrder,
    scenario: &ScenarioConfig,
) -> Result<RatePoint<T>> {
    let target = scenario.target_stats::<T>()?;
    sic_point(&target, channels, user_powers, q_sense, order, scenario)
}

fn sic_point<T: Real>(
    target: &TargetResponseStats<T>,
    channels: &CMat<T>,
    user_powers: &[T],
    q_sense: &CMat<T>,
    order: SicOrder,
    scenario: &ScenarioConfig,
) -> Result<RatePoint<T>> {
    let d = &scenario.dims;
    let sigma2_c: T = real(scenario.power.sigma2_c);
    let sigma2_s: T = real(scenario.power.sigma2_s);
    let l: T = real(d.l_frame as f64);
    match order {
        SicOrder::SensingCentric => {
            let beta = mi_core::sensing_interference_power(target, q_sense);
            let cr = mi_core::comm_mi(channels, user_powers, &NoiseModel::White(sigma2_c + beta))?;
            let sr = mi_core::sensing_mi(target, q_sense, d.l_frame, d.n_rx, &NoiseModel::White(sigma2_s))?;
            Ok(RatePoint::new(cr, sr / l))
        }
        SicOrder::CommCentric => {
            let cr = mi_core::comm_mi(channels, user_powers, &NoiseModel::White(sigma2_c))?;
            let n = channels.nrows();
            let cov = linalg::eye::<T>(n).map(|z| z * sigma2_s) + mi_core::weighted_gram(channels, user_powers);
            let sr = mi_core::sensing_mi(target, q_sense, d.l_frame, d.n_rx, &NoiseModel::Colored(cov))?;
            Ok(RatePoint::new(cr, sr / l))
        }
    }
}

/// Time-sharing: `p_s` with probability `p`, `p_c` otherwise.
pub fn time_share<T: Real>(p_s: RatePoint<T>, p_c: RatePoint<T>, p: T) -> Result<RatePoint<T>> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::InvalidInput(format!(
            "time-sharing weight must lie in [0, 1], got {p}"
        )));
    }
    let q = T::one() - p;
    Ok(RatePoint::new(p * p_s.cr + q * p_c.cr, p * p_s.sr + q * p_c.sr))
}

/// Channel-independent part of an uplink evaluation.
struct UpSetup<T: Real> {
    target: TargetResponseStats<T>,
    user_powers: Vec<T>,
    q_sense: CMat<T>,
}

impl<T: Real> UpSetup<T> {
    /// Every user transmits `p_comm` and the BS probes with `p_sense`.
    fn new(scenario: &ScenarioConfig, p_comm: f64, p_sense: f64) -> Result<Self> {
        scenario.require(ScenarioKind::Uplink)?;
        let target = scenario.target_stats::<T>()?;
        let d = &scenario.dims;
        let q_sense =
            alloc::sr_optimal_covariance(&target, real(p_sense), real(scenario.power.sigma2_s), d.l_frame, d.n_rx)?;
        Ok(Self {
            target,
            user_powers: vec![real(p_comm); d.k_users],
            q_sense,
        })
    }

    fn defaults(scenario: &ScenarioConfig) -> Result<Self> {
        let p = scenario.power.p_total;
        Self::new(scenario, p, p)
    }

    fn corners(&self, scenario: &ScenarioConfig, h: &CMat<T>) -> Result<(RatePoint<T>, RatePoint<T>)> {
        let ps = sic_point(
            &self.target,
            h,
            &self.user_powers,
            &self.q_sense,
            SicOrder::SensingCentric,
            scenario,
        )?;
        let pc = sic_point(
            &self.target,
            h,
            &self.user_powers,
            &self.q_sense,
            SicOrder::CommCentric,
            scenario,
        )?;
        Ok((ps, pc))
    }

    fn fdsac(&self, scenario: &ScenarioConfig, h: &CMat<T>, alpha: f64) -> Result<RatePoint<T>> {
        let d = &scenario.dims;
        let sigma2_c: T = real(scenario.power.sigma2_c);
        let sigma2_s: T = real(scenario.power.sigma2_s);
        let l: T = real(d.l_frame as f64);
        let cr = band_share(alpha, |a: T| {
            mi_core::comm_mi(h, &self.user_powers, &NoiseModel::White(a * sigma2_c))
        })?;
        let sr = band_share(1.0 - alpha, |b: T| {
            let s = mi_core::sensing_mi(
                &self.target,
                &self.q_sense,
                d.l_frame,
                d.n_rx,
                &NoiseModel::White(b * sigma2_s),
            )?;
            Ok(s / l)
        })?;
        Ok(RatePoint::new(cr, sr))
    }
}

/// Corner points `(P_s, P_c)` for one channel draw at the default powers.
pub fn uplink_corners<T: Real>(
    scenario: &ScenarioConfig,
    channel: &CommChannel<T>,
) -> Result<(RatePoint<T>, RatePoint<T>)> {
    UpSetup::defaults(scenario)?.corners(scenario, channel.uplink_matrix()?)
}

/// FDSAC point for one channel draw: the users own a fraction `alpha` of the
/// band and the probe the rest, each at its own full power.
pub fn uplink_fdsac_point<T: Real>(
    scenario: &ScenarioConfig,
    channel: &CommChannel<T>,
    alpha: f64,
) -> Result<RatePoint<T>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    UpSetup::defaults(scenario)?.fdsac(scenario, channel.uplink_matrix()?, alpha)
}

fn time_share_weights() -> Vec<f64> {
    // From P_s (weight 1) down to P_c (weight 0).
    unit_grid(TIME_SHARE_POINTS).into_iter().rev().collect()
}

fn time_share_label(p: f64) -> String {
    if p == 1.0 {
        "P_s".into()
    } else if p == 0.0 {
        "P_c".into()
    } else {
        fmt_param("p", p)
    }
}

/// Uplink ISAC region: the time-sharing segment between the ergodic corners.
/// Time-sharing is applied per draw, so every sample carries its own
/// standard error.
pub fn uplink_isac_region<T: Real>(scenario: &ScenarioConfig) -> Result<RegionRun<T>> {
    scenario.validate()?;
    let setup = UpSetup::<T>::defaults(scenario)?;
    let weights = time_share_weights();
    let avg = mc::ergodic_grid(scenario, scenario.mc_trials, |h| {
        let (ps, pc) = setup.corners(scenario, h.uplink_matrix()?)?;
        weights.iter().map(|&p| time_share(ps, pc, real(p))).collect()
    })?;
    let samples = weights
        .iter()
        .zip(avg)
        .map(|(&p, point)| RegionSample {
            label: time_share_label(p),
            point,
        })
        .collect();
    RegionRun::build(samples)
}

/// Uplink FDSAC region over the alpha grid.
pub fn uplink_fdsac_region<T: Real>(scenario: &ScenarioConfig) -> Result<RegionRun<T>> {
    scenario.validate()?;
    let setup = UpSetup::<T>::defaults(scenario)?;
    let alphas = unit_grid(scenario.alpha_grid);
    let avg = mc::ergodic_grid(scenario, scenario.mc_trials, |h| {
        let m = h.uplink_matrix()?;
        alphas.iter().map(|&a| setup.fdsac(scenario, m, a)).collect()
    })?;
    let samples = alphas
        .iter()
        .zip(avg)
        .map(|(&a, point)| RegionSample {
            label: fmt_param("alpha", a),
            point,
        })
        .collect();
    RegionRun::build(samples)
}

/// Uplink region for either mode.
pub fn uplink_region<T: Real>(scenario: &ScenarioConfig, mode: Mode) -> Result<RegionRun<T>> {
    match mode {
        Mode::Isac => uplink_isac_region(scenario),
        Mode::Fdsac => uplink_fdsac_region(scenario),
    }
}

/// Rate-vs-power curves. Each rate sweeps its own functionality's power with
/// the other held at `p_total`: ISAC reports the C-C communication rate and
/// the S-C sensing rate (the largest rate of each kind); FDSAC uses the
/// scenario's `curve_alpha`.
pub fn uplink_curves<T: Real>(scenario: &ScenarioConfig, powers: &[f64]) -> Result<Vec<CurveRow<T>>> {
    scenario.validate()?;
    scenario.require(ScenarioKind::Uplink)?;
    let alpha = scenario.split.curve_alpha;
    let p0 = scenario.power.p_total;
    // (power probed for comm, power probed for sensing)
    let setups = powers
        .iter()
        .map(|&p| Ok((UpSetup::<T>::new(scenario, p, p0)?, UpSetup::<T>::new(scenario, p0, p)?)))
        .collect::<Result<Vec<_>>>()?;
    let avg = mc::ergodic_grid(scenario, scenario.mc_trials, |h| {
        let m = h.uplink_matrix()?;
        let mut out = Vec::with_capacity(2 * setups.len());
        for (comm, sense) in &setups {
            let (_, pc) = comm.corners(scenario, m)?;
            let (ps, _) = sense.corners(scenario, m)?;
            out.push(RatePoint::new(pc.cr, ps.sr));
            let fc = comm.fdsac(scenario, m, alpha)?;
            let fs = sense.fdsac(scenario, m, alpha)?;
            out.push(RatePoint::new(fc.cr, fs.sr));
        }
        Ok(out)
    })?;
    Ok(powers
        .iter()
        .zip(avg.chunks(2))
        .map(|(&power, pair)| CurveRow {
            power,
            isac: pair[0],
            fdsac: pair[1],
        })
        .collect())
}

/// High-SNR slopes of both schemes, estimated at [`SLOPE_POWERS`].
pub fn uplink_slopes(scenario: &ScenarioConfig) -> Result<(SlopePair, SlopePair)> {
    let rows = uplink_curves::<f64>(scenario, &SLOPE_POWERS)?;
    crate::downlink::slopes_from_rows(scenario, &rows)
}

/// Ergodic corners `(P_s, P_c)` at the default powers.
pub fn uplink_ergodic_corners<T: Real>(scenario: &ScenarioConfig) -> Result<(Ergodic<T>, Ergodic<T>)> {
    let setup = UpSetup::<T>::defaults(scenario)?;
    let avg = mc::ergodic_grid(scenario, scenario.mc_trials, |h| {
        let (ps, pc) = setup.corners(scenario, h.uplink_matrix()?)?;
        Ok(vec![ps, pc])
    })?;
    Ok((avg[0], avg[1]))
}
