//! Downlink ISAC and FDSAC evaluators.
//!
//! Single-antenna (SA) case: two users served by NOMA from one antenna, with
//! the same signal probing the target. Multi-antenna (MA) case: a sensing
//! beam superposed on a DPC communication signal designed on the dual MAC.

use crate::alloc::{self, IWF_MAX_ITER};
use crate::error::{Error, Result};
use crate::mc::{self, Ergodic};
use crate::mi_core::{self, NoiseModel};
use crate::model::{unit_grid, CommChannel, RatePoint, RateRegion, ScenarioConfig, ScenarioKind, TargetResponseStats};
use crate::region::{self, SlopePair, SLOPE_POWERS};
use crate::scalar::{real, to_f64, CMat, CVec, Real};

/// NOMA power split between the stronger and the weaker user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomaAllocation<T: Real> {
    pub a_strong: T,
    pub a_weak: T,
}

impl<T: Real> NomaAllocation<T> {
    pub fn new(a_strong: T) -> Result<Self> {
        if !(a_strong >= T::zero() && a_strong <= T::one()) {
            return Err(Error::InvalidInput(format!(
                "a_strong must lie in [0, 1], got {a_strong}"
            )));
        }
        Ok(Self {
            a_strong,
            a_weak: T::one() - a_strong,
        })
    }
}

/// FDSAC split: `alpha` is the spectrum fraction and `kappa` the power
/// fraction given to communications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdsacSplit {
    pub alpha: f64,
    pub kappa: f64,
}

impl FdsacSplit {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidInput(format!(
                "alpha and kappa must lie in [0, 1], got ({alpha}, {kappa})"
            )));
        }
        Ok(Self { alpha, kappa })
    }
}

/// `frac * f(frac)` with the convention that a zero share contributes zero.
pub(crate) fn band_share<T: Real>(frac: f64, f: impl FnOnce(T) -> Result<T>) -> Result<T> {
    if frac <= 0.0 {
        return Ok(T::zero());
    }
    let t: T = real(frac);
    Ok(t * f(t)?)
}

/// Two-user NOMA rates `(r_strong, r_weak, sum)`. The user with the larger
/// gain (first on ties) decodes and cancels the weak user's signal.
pub fn sa_noma_rates<T: Real>(gains: [T; 2], alloc: NomaAllocation<T>, p: T, sigma2_c: T) -> (T, T, T) {
    let (g1, g2) = if gains[0] >= gains[1] {
        (gains[0], gains[1])
    } else {
        (gains[1], gains[0])
    };
    let r_strong = (T::one() + alloc.a_strong * p * g1 / sigma2_c).log2();
    let r_weak = (T::one() + alloc.a_weak * p * g2 / (alloc.a_strong * p * g2 + sigma2_c)).log2();
    (r_strong, r_weak, r_strong + r_weak)
}

/// Largest NOMA sum rate over all power splits. The sum rate is nondecreasing
/// in `a_strong`, so the maximum sits at `a_strong = 1`.
pub fn sa_max_sum_rate<T: Real>(gains: [T; 2], p: T, sigma2_c: T) -> T {
    sa_noma_rates(
        gains,
        NomaAllocation {
            a_strong: T::one(),
            a_weak: T::zero(),
        },
        p,
        sigma2_c,
    )
    .2
}

fn sa_gains<T: Real>(channel: &CommChannel<T>) -> Result<[T; 2]> {
    let h = channel.downlink_vectors()?;
    if h.len() != 2 || h.iter().any(|v| v.len() != 1) {
        return Err(Error::Dimension(
            "single-antenna downlink needs two scalar channels".into(),
        ));
    }
    Ok([h[0][0].norm_sqr(), h[1][0].norm_sqr()])
}

/// `(N/L) log2(1 + L p r / noise)`: sensing rate of a single-antenna probe.
fn sa_sensing_rate<T: Real>(scenario: &ScenarioConfig, r: T, p: T, noise: T) -> T {
    let d = &scenario.dims;
    let l: T = real(d.l_frame as f64);
    let n: T = real(d.n_rx as f64);
    n / l * (T::one() + l * p * r / noise).log2()
}

fn sa_target_variance<T: Real>(scenario: &ScenarioConfig) -> Result<T> {
    Ok(scenario.target_stats::<T>()?.r_corr[(0, 0)].re)
}

/// Corner point `P_o` for one channel draw: the full-power NOMA sum rate and
/// the full-power sensing rate, both achieved by the same signal.
pub fn sa_isac_point<T: Real>(scenario: &ScenarioConfig, channel: &CommChannel<T>) -> Result<RatePoint<T>> {
    scenario.require(ScenarioKind::DownlinkSa)?;
    let p: T = real(scenario.power.p_total);
    let cr = sa_max_sum_rate(sa_gains(channel)?, p, real(scenario.power.sigma2_c));
    let r = sa_target_variance::<T>(scenario)?;
    let sr = sa_sensing_rate(scenario, r, p, real(scenario.power.sigma2_s));
    Ok(RatePoint::new(cr, sr))
}

/// Ergodic corner point `P_o`.
pub fn sa_isac_corner<T: Real>(scenario: &ScenarioConfig) -> Result<Ergodic<T>> {
    scenario.require(ScenarioKind::DownlinkSa)?;
    mc::ergodic_average(scenario, scenario.mc_trials, |h| sa_isac_point(scenario, h))
}

/// SA FDSAC point for one channel draw.
pub fn sa_fdsac_point_for<T: Real>(
    scenario: &ScenarioConfig,
    channel: &CommChannel<T>,
    split: FdsacSplit,
) -> Result<RatePoint<T>> {
    scenario.require(ScenarioKind::DownlinkSa)?;
    let gains = sa_gains(channel)?;
    let pw = &scenario.power;
    let p_c: T = real(split.kappa * pw.p_total);
    let p_s: T = real((1.0 - split.kappa) * pw.p_total);
    let r = sa_target_variance::<T>(scenario)?;
    let cr = band_share(split.alpha, |a: T| {
        Ok(sa_max_sum_rate(gains, p_c, a * real(pw.sigma2_c)))
    })?;
    let sr = band_share(1.0 - split.alpha, |b: T| {
        Ok(sa_sensing_rate(scenario, r, p_s, b * real(pw.sigma2_s)))
    })?;
    Ok(RatePoint::new(cr, sr))
}

/// Ergodic SA FDSAC point.
pub fn sa_fdsac_point<T: Real>(scenario: &ScenarioConfig, split: FdsacSplit) -> Result<Ergodic<T>> {
    mc::ergodic_average(scenario, scenario.mc_trials, |h| sa_fdsac_point_for(scenario, h, split))
}

/// Per-user DPC rates. The user encoded `i`-th sees interference only from
/// users encoded after it.
pub fn dpc_rates<T: Real>(
    channels: &[CVec<T>],
    covariances: &[CMat<T>],
    order: &[usize],
    sigma2_c: T,
) -> Result<Vec<T>> {
    let k = channels.len();
    if covariances.len() != k || order.len() != k {
        return Err(Error::Dimension(format!(
            "{k} channels, {} covariances, order of length {}",
            covariances.len(),
            order.len()
        )));
    }
    NoiseModel::White(sigma2_c).validate()?;
    let mut rates = vec![T::zero(); k];
    for (i, &u) in order.iter().enumerate() {
        let h = &channels[u];
        let signal = crate::linalg::quad_form(&covariances[u], h).max(T::zero());
        let interference = order[i + 1..].iter().fold(T::zero(), |acc, &v| {
            acc + crate::linalg::quad_form(&covariances[v], h).max(T::zero())
        });
        rates[u] = (T::one() + signal / (sigma2_c + interference)).log2();
    }
    Ok(rates)
}

/// Everything a multi-antenna evaluation needs that does not depend on the
/// channel draw.
struct MaSetup<T: Real> {
    target: TargetResponseStats<T>,
    l_frame: usize,
    n_rx: usize,
    p_total: T,
    sigma2_c: T,
    sigma2_s: T,
}

impl<T: Real> MaSetup<T> {
    fn new(scenario: &ScenarioConfig) -> Result<Self> {
        scenario.require(ScenarioKind::DownlinkMa)?;
        Ok(Self {
            target: scenario.target_stats()?,
            l_frame: scenario.dims.l_frame,
            n_rx: scenario.dims.n_rx,
            p_total: real(scenario.power.p_total),
            sigma2_c: real(scenario.power.sigma2_c),
            sigma2_s: real(scenario.power.sigma2_s),
        })
    }

    fn sr_optimal(&self, budget: T) -> Result<CMat<T>> {
        alloc::sr_optimal_covariance(&self.target, budget, self.sigma2_s, self.l_frame, self.n_rx)
    }

    fn sensing(&self, q: &CMat<T>, noise: T) -> Result<T> {
        mi_core::sensing_mi(&self.target, q, self.l_frame, self.n_rx, &NoiseModel::White(noise))
    }

    fn isac(&self, channels: &[CVec<T>], rho: f64) -> Result<RatePoint<T>> {
        let rho_t: T = real(rho);
        let q_s = self.sr_optimal(rho_t * self.p_total)?;
        let comm_budget = (T::one() - rho_t) * self.p_total;
        let dual = alloc::sum_power_iwf(
            channels,
            comm_budget,
            self.sigma2_c,
            alloc::default_iwf_tol(),
            IWF_MAX_ITER,
        )?;
        let m = self.target.m();
        let q_c = dual
            .bc_covariances
            .iter()
            .fold(CMat::<T>::zeros(m, m), |acc, q| acc + q);
        let with = self.sensing(&(&q_s + &q_c), self.sigma2_s)?;
        let without = self.sensing(&q_c, self.sigma2_s)?;
        let l: T = real(self.l_frame as f64);
        Ok(RatePoint::new(dual.sum_rate, ((with - without) / l).max(T::zero())))
    }

    fn fdsac(&self, channels: &[CVec<T>], split: FdsacSplit) -> Result<RatePoint<T>> {
        Ok(RatePoint::new(self.fdsac_cr(channels, split)?, self.fdsac_sr(split)?))
    }

    fn fdsac_cr(&self, channels: &[CVec<T>], split: FdsacSplit) -> Result<T> {
        let kappa: T = real(split.kappa);
        band_share(split.alpha, |a: T| {
            alloc::sum_capacity(channels, kappa * self.p_total, a * self.sigma2_c)
        })
    }

    /// Channel-independent, so region sweeps evaluate it once per split.
    fn fdsac_sr(&self, split: FdsacSplit) -> Result<T> {
        let q_s = self.sr_optimal((T::one() - real::<T>(split.kappa)) * self.p_total)?;
        let l: T = real(self.l_frame as f64);
        band_share(1.0 - split.alpha, |b: T| Ok(self.sensing(&q_s, b * self.sigma2_s)? / l))
    }
}

/// MA ISAC point: sensing covariance with power `rho * p_total`, DPC
/// communication with the rest. Users cancel the known sensing signal; the
/// sensing receiver treats the communication echo as Gaussian interference.
pub fn ma_isac_point<T: Real>(scenario: &ScenarioConfig, channels: &[CVec<T>], rho: f64) -> Result<RatePoint<T>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rho must lie in [0, 1], got {rho}")));
    }
    MaSetup::new(scenario)?.isac(channels, rho)
}

/// MA FDSAC point: each function gets its own band and power share.
pub fn ma_fdsac_point<T: Real>(
    scenario: &ScenarioConfig,
    channels: &[CVec<T>],
    split: FdsacSplit,
) -> Result<RatePoint<T>> {
    MaSetup::new(scenario)?.fdsac(channels, split)
}

/// Region-building mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Isac,
    Fdsac,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Isac => "isac",
            Mode::Fdsac => "fdsac",
        }
    }
}

/// One ergodic-averaged operating point and the sweep parameter behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSample<T: Real> {
    pub label: String,
    pub point: Ergodic<T>,
}

/// A swept region: every evaluated sample plus the Pareto-filtered,
/// time-sharing-closed frontier.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRun<T: Real> {
    pub samples: Vec<RegionSample<T>>,
    pub region: RateRegion<T>,
}

impl<T: Real> RegionRun<T> {
    pub(crate) fn build(samples: Vec<RegionSample<T>>) -> Result<Self> {
        let points: Vec<RatePoint<T>> = samples.iter().map(|s| s.point.mean).collect();
        let region = region::convexify(&region::pareto_frontier(&points)?);
        Ok(Self { samples, region })
    }

    /// Samples that survive as frontier vertices, in frontier order.
    pub fn frontier_samples(&self) -> Vec<&RegionSample<T>> {
        self.region
            .frontier
            .iter()
            .filter_map(|p| self.samples.iter().find(|s| s.point.mean == *p))
            .collect()
    }
}

pub(crate) fn fmt_param(name: &str, v: f64) -> String {
    format!("{name}={v:.4}")
}

fn fdsac_grid(scenario: &ScenarioConfig) -> Vec<FdsacSplit> {
    let kappas = unit_grid(scenario.kappa_grid);
    unit_grid(scenario.alpha_grid)
        .into_iter()
        .flat_map(|alpha| kappas.iter().map(move |&kappa| FdsacSplit { alpha, kappa }))
        .collect()
}

/// Ergodic rate region of a downlink scenario.
pub fn downlink_region<T: Real>(scenario: &ScenarioConfig, mode: Mode) -> Result<RegionRun<T>> {
    scenario.validate()?;
    let trials = scenario.mc_trials;
    let samples: Vec<RegionSample<T>> = match (scenario.kind, mode) {
        (ScenarioKind::DownlinkSa, Mode::Isac) => vec![RegionSample {
            label: "P_o".into(),
            point: sa_isac_corner(scenario)?,
        }],
        (ScenarioKind::DownlinkSa, Mode::Fdsac) => {
            let grid = fdsac_grid(scenario);
            let avg = mc::ergodic_grid(scenario, trials, |h| {
                grid.iter().map(|&s| sa_fdsac_point_for(scenario, h, s)).collect()
            })?;
            label_split(&grid, avg)
        }
        (ScenarioKind::DownlinkMa, Mode::Isac) => {
            let setup = MaSetup::<T>::new(scenario)?;
            let rhos = unit_grid(scenario.rho_grid);
            let avg = mc::ergodic_grid(scenario, trials, |h| {
                let ch = h.downlink_vectors()?;
                rhos.iter().map(|&rho| setup.isac(ch, rho)).collect()
            })?;
            rhos.iter()
                .zip(avg)
                .map(|(&rho, point)| RegionSample {
                    label: fmt_param("rho", rho),
                    point,
                })
                .collect()
        }
        (ScenarioKind::DownlinkMa, Mode::Fdsac) => {
            let setup = MaSetup::<T>::new(scenario)?;
            let grid = fdsac_grid(scenario);
            let sr = grid.iter().map(|&s| setup.fdsac_sr(s)).collect::<Result<Vec<T>>>()?;
            let avg = mc::ergodic_grid(scenario, trials, |h| {
                let ch = h.downlink_vectors()?;
                grid.iter()
                    .zip(&sr)
                    .map(|(&s, &sr)| Ok(RatePoint::new(setup.fdsac_cr(ch, s)?, sr)))
                    .collect()
            })?;
            label_split(&grid, avg)
        }
        (ScenarioKind::Uplink, _) => {
            return Err(Error::WrongScenario {
                expected: "downlink-sa or downlink-ma",
                got: scenario.kind.to_string(),
            })
        }
    };
    RegionRun::build(samples)
}

fn label_split<T: Real>(grid: &[FdsacSplit], avg: Vec<Ergodic<T>>) -> Vec<RegionSample<T>> {
    grid.iter()
        .zip(avg)
        .map(|(s, point)| RegionSample {
            label: format!("{};{}", fmt_param("alpha", s.alpha), fmt_param("kappa", s.kappa)),
            point,
        })
        .collect()
}

/// ISAC and FDSAC rates at one transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow<T: Real> {
    pub power: f64,
    pub isac: Ergodic<T>,
    pub fdsac: Ergodic<T>,
}

/// Rate-vs-power curves at the scenario's fixed split, sweeping the total
/// transmit power over `powers`. Every power reuses the same channel draws.
pub fn downlink_curves<T: Real>(scenario: &ScenarioConfig, powers: &[f64]) -> Result<Vec<CurveRow<T>>> {
    scenario.validate()?;
    let s = scenario.split;
    let split = FdsacSplit::new(s.curve_alpha, s.curve_kappa)?;
    let scaled: Vec<ScenarioConfig> = powers.iter().map(|&p| scenario.with_power(p)).collect();
    let avg = match scenario.kind {
        ScenarioKind::DownlinkSa => mc::ergodic_grid(scenario, scenario.mc_trials, |h| {
            let mut out = Vec::with_capacity(2 * scaled.len());
            for sc in &scaled {
                out.push(sa_isac_point(sc, h)?);
                out.push(sa_fdsac_point_for(sc, h, split)?);
            }
            Ok(out)
        })?,
        ScenarioKind::DownlinkMa => {
            let setups = scaled.iter().map(MaSetup::<T>::new).collect::<Result<Vec<_>>>()?;
            mc::ergodic_grid(scenario, scenario.mc_trials, |h| {
                let ch = h.downlink_vectors()?;
                let mut out = Vec::with_capacity(2 * setups.len());
                for setup in &setups {
                    out.push(setup.isac(ch, s.curve_rho)?);
                    out.push(setup.fdsac(ch, split)?);
                }
                Ok(out)
            })?
        }
        ScenarioKind::Uplink => {
            return Err(Error::WrongScenario {
                expected: "downlink-sa or downlink-ma",
                got: scenario.kind.to_string(),
            })
        }
    };
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
pub fn downlink_slopes(scenario: &ScenarioConfig) -> Result<(SlopePair, SlopePair)> {
    let rows = downlink_curves::<f64>(scenario, &SLOPE_POWERS)?;
    slopes_from_rows(scenario, &rows)
}

pub(crate) fn slopes_from_rows<T: Real>(
    scenario: &ScenarioConfig,
    rows: &[CurveRow<T>],
) -> Result<(SlopePair, SlopePair)> {
    let ((ic, is), (fc, fs)) = region::analytic_slopes(scenario);
    let series =
        |f: &dyn Fn(&CurveRow<T>) -> T| -> Vec<(f64, f64)> { rows.iter().map(|r| (r.power, to_f64(f(r)))).collect() };
    let isac = SlopePair {
        cr_slope: region::hisnr_slope(&series(&|r| r.isac.mean.cr), ic)?,
        sr_slope: region::hisnr_slope(&series(&|r| r.isac.mean.sr), is)?,
    };
    let fdsac = SlopePair {
        cr_slope: region::hisnr_slope(&series(&|r| r.fdsac.mean.cr), fc)?,
        sr_slope: region::hisnr_slope(&series(&|r| r.fdsac.mean.sr), fs)?,
    };
    Ok((isac, fdsac))
}
