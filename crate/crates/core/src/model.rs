//! Shared domain types and scenario configuration.
//!
//! Powers are linear everywhere in this crate. Rates are in bits/s/Hz: the
//! communication rate is the per-slot MI and the sensing rate is the per-frame
//! MI divided by the frame length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{cplx, epsilon, real, to_f64, CMat, CVec, Real};

/// Tolerance floor so that `f64` tolerances stay meaningful for `f32`.
pub(crate) fn tol_for<T: Real>(tol: f64) -> f64 {
    tol.max(64.0 * epsilon::<T>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    /// Transmit antennas at the base station.
    pub m_tx: usize,
    /// Receive (sensing) antennas at the base station.
    pub n_rx: usize,
    /// Single-antenna communication users.
    pub k_users: usize,
    /// Sensing frame length in slots.
    pub l_frame: usize,
}

impl SystemDims {
    pub fn validate(&self) -> Result<()> {
        if self.m_tx == 0 || self.n_rx == 0 || self.k_users == 0 || self.l_frame == 0 {
            return Err(Error::Config(format!("all dimensions must be >= 1, got {self:?}")));
        }
        if self.l_frame < self.m_tx {
            return Err(Error::Config(format!(
                "l_frame ({}) must be >= m_tx ({})",
                self.l_frame, self.m_tx
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    /// Transmit power. Downlink: the BS budget. Uplink: the power of each
    /// user and of the BS probing signal.
    pub p_total: f64,
    pub sigma2_c: f64,
    pub sigma2_s: f64,
}

impl PowerBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_total >= 0.0 && self.p_total.is_finite()) {
            return Err(Error::Config(format!(
                "p_total must be finite and >= 0, got {}",
                self.p_total
            )));
        }
        if !(self.sigma2_c > 0.0 && self.sigma2_c.is_finite()) {
            return Err(Error::Config(format!("sigma2_c must be > 0, got {}", self.sigma2_c)));
        }
        if !(self.sigma2_s > 0.0 && self.sigma2_s.is_finite()) {
            return Err(Error::Config(format!("sigma2_s must be > 0, got {}", self.sigma2_s)));
        }
        Ok(())
    }
}

/// Row correlation `R` of the random target response `G`.
///
/// `G` is `N x M` with independent rows, each circularly-symmetric complex
/// Gaussian with covariance `R`; `trace(R) = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetResponseStats<T: Real> {
    pub r_corr: CMat<T>,
}

impl<T: Real> TargetResponseStats<T> {
    pub fn new(r_corr: CMat<T>) -> Result<Self> {
        let stats = Self { r_corr };
        stats.validate()?;
        Ok(stats)
    }

    pub fn m(&self) -> usize {
        self.r_corr.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.r_corr;
        if r.nrows() != r.ncols() || r.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "target correlation must be square and non-empty, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let defect = to_f64(linalg::hermitian_defect(r));
        if defect > tol_for::<T>(1e-12) {
            return Err(Error::InvalidInput(format!(
                "target correlation not Hermitian (defect {defect:e})"
            )));
        }
        linalg::ensure_psd(r, tol_for::<T>(1e-12))?;
        let trace = to_f64(r.trace().re);
        let m = r.nrows() as f64;
        if (trace - m).abs() > tol_for::<T>(1e-9) * m.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "target correlation trace {trace} differs from {m}"
            )));
        }
        Ok(())
    }
}

/// Exponential correlation `R[i,j] = coeff^|i-j|`, trace-normalized to `m`.
pub fn exp_corr_matrix<T: Real>(m: usize, coeff: f64) -> Result<TargetResponseStats<T>> {
    if m == 0 {
        return Err(Error::InvalidInput("correlation size must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&coeff) {
        return Err(Error::InvalidInput(format!(
            "correlation coefficient must lie in [0, 1), got {coeff}"
        )));
    }
    let mut r = CMat::<T>::from_fn(m, m, |i, j| cplx(real::<T>(coeff.powi((i as i32 - j as i32).abs()))));
    // Diagonal is already 1, so the trace is m; renormalize anyway to absorb rounding.
    let scale = real::<T>(m as f64) / r.trace().re;
    r.iter_mut().for_each(|z| *z = z.scale(scale));
    TargetResponseStats::new(r)
}

/// Communication channel realization.
#[derive(Debug, Clone, PartialEq)]
pub enum CommChannel<T: Real> {
    /// One length-`M` vector per user; user `k` receives `h_k^H x`.
    Downlink(Vec<CVec<T>>),
    /// `N x K` matrix whose column `k` is user `k`'s channel to the BS.
    Uplink(CMat<T>),
}

impl<T: Real> CommChannel<T> {
    pub fn users(&self) -> usize {
        match self {
            CommChannel::Downlink(h) => h.len(),
            CommChannel::Uplink(h) => h.ncols(),
        }
    }

    /// Channels stacked column-wise: `M x K` (downlink) or `N x K` (uplink).
    pub fn matrix(&self) -> CMat<T> {
        match self {
            CommChannel::Downlink(h) => {
                let rows = h.first().map_or(0, |v| v.len());
                CMat::from_fn(rows, h.len(), |i, k| h[k][i])
            }
            CommChannel::Uplink(h) => h.clone(),
        }
    }

    pub fn downlink_vectors(&self) -> Result<&[CVec<T>]> {
        match self {
            CommChannel::Downlink(h) => Ok(h),
            CommChannel::Uplink(_) => Err(Error::InvalidInput("expected a downlink channel".into())),
        }
    }

    pub fn uplink_matrix(&self) -> Result<&CMat<T>> {
        match self {
            CommChannel::Uplink(h) => Ok(h),
            CommChannel::Downlink(_) => Err(Error::InvalidInput("expected an uplink channel".into())),
        }
    }

    pub fn validate(&self, dims: &SystemDims) -> Result<()> {
        let finite = |z: &num_complex::Complex<T>| z.re.is_finite() && z.im.is_finite();
        match self {
            CommChannel::Downlink(h) => {
                if h.len() != dims.k_users || h.iter().any(|v| v.len() != dims.m_tx) {
                    return Err(Error::Dimension(format!(
                        "downlink channel must hold {} vectors of length {}",
                        dims.k_users, dims.m_tx
                    )));
                }
                if !h.iter().all(|v| v.iter().all(finite)) {
                    return Err(Error::InvalidInput("non-finite channel entry".into()));
                }
            }
            CommChannel::Uplink(h) => {
                if h.nrows() != dims.n_rx || h.ncols() != dims.k_users {
                    return Err(Error::Dimension(format!(
                        "uplink channel must be {}x{}, got {}x{}",
                        dims.n_rx,
                        dims.k_users,
                        h.nrows(),
                        h.ncols()
                    )));
                }
                if !h.iter().all(finite) {
                    return Err(Error::InvalidInput("non-finite channel entry".into()));
                }
            }
        }
        Ok(())
    }
}

/// A (communication rate, sensing rate) pair in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RatePoint<T: Real> {
    pub cr: T,
    pub sr: T,
}

impl<T: Real> RatePoint<T> {
    pub fn new(cr: T, sr: T) -> Self {
        Self { cr, sr }
    }

    /// Weak dominance within `tol`: both coordinates at least as large.
    pub fn covers(&self, other: &Self, tol: T) -> bool {
        self.cr + tol >= other.cr && self.sr + tol >= other.sr
    }

    /// Strict Pareto dominance: both `>=` and at least one `>`.
    pub fn dominates(&self, other: &Self) -> bool {
        self.cr >= other.cr && self.sr >= other.sr && (self.cr > other.cr || self.sr > other.sr)
    }
}

/// Pareto frontier of an achievable rate region, closed down to the axes.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRegion<T: Real> {
    /// Strictly increasing `cr`, strictly decreasing `sr`.
    pub frontier: Vec<RatePoint<T>>,
    /// Whether time-sharing convexification has been applied.
    pub convexified: bool,
}

impl<T: Real> RateRegion<T> {
    pub fn validate(&self) -> Result<()> {
        for w in self.frontier.windows(2) {
            if !(w[0].cr < w[1].cr && w[0].sr > w[1].sr) {
                return Err(Error::InvalidInput(format!(
                    "frontier not strictly ordered at ({}, {}) -> ({}, {})",
                    w[0].cr, w[0].sr, w[1].cr, w[1].sr
                )));
            }
        }
        Ok(())
    }

    pub fn max_cr(&self) -> T {
        self.frontier.iter().fold(T::zero(), |m, p| m.max(p.cr))
    }

    pub fn max_sr(&self) -> T {
        self.frontier.iter().fold(T::zero(), |m, p| m.max(p.sr))
    }
}

/// Numerically estimated high-SNR slope next to its closed-form reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub numeric: f64,
    pub analytic: f64,
    pub abs_error: f64,
}

impl SlopeEstimate {
    pub fn new(numeric: f64, analytic: f64) -> Self {
        Self {
            numeric,
            analytic,
            abs_error: (numeric - analytic).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "downlink-sa")]
    DownlinkSa,
    #[serde(rename = "downlink-ma")]
    DownlinkMa,
    #[serde(rename = "uplink")]
    Uplink,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::DownlinkSa => "downlink-sa",
            ScenarioKind::DownlinkMa => "downlink-ma",
            ScenarioKind::Uplink => "uplink",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "downlink-sa" => Ok(ScenarioKind::DownlinkSa),
            "downlink-ma" => Ok(ScenarioKind::DownlinkMa),
            "uplink" => Ok(ScenarioKind::Uplink),
            other => Err(Error::Config(format!("unknown scenario kind '{other}'"))),
        }
    }
}

/// Target statistics parameters: exponential correlation coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetParams {
    pub corr_coeff: f64,
}

/// Fixed operating point used for rate-vs-power curves and slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSplit {
    /// ISAC sensing power fraction (downlink-ma).
    pub curve_rho: f64,
    /// FDSAC spectrum fraction for communications.
    pub curve_alpha: f64,
    /// FDSAC power fraction for communications (downlink only).
    pub curve_kappa: f64,
}

/// Complete scenario description. Serialized as one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(flatten)]
    pub dims: SystemDims,
    #[serde(flatten)]
    pub power: PowerBudget,
    #[serde(flatten)]
    pub target: TargetParams,
    pub rho_grid: usize,
    pub alpha_grid: usize,
    pub kappa_grid: usize,
    pub mc_trials: usize,
    pub seed: u64,
    /// Linear powers for rate-vs-SNR curves, strictly increasing.
    pub snr_sweep: Vec<f64>,
    #[serde(flatten)]
    pub split: CurveSplit,
}

/// Every key accepted in a scenario file.
pub const CONFIG_KEYS: &[&str] = &[
    "kind",
    "m_tx",
    "n_rx",
    "k_users",
    "l_frame",
    "p_total",
    "sigma2_c",
    "sigma2_s",
    "corr_coeff",
    "rho_grid",
    "alpha_grid",
    "kappa_grid",
    "mc_trials",
    "seed",
    "snr_sweep",
    "curve_rho",
    "curve_alpha",
    "curve_kappa",
];

/// Desk-scale defaults for a scenario kind.
pub fn default_scenario(kind: ScenarioKind) -> ScenarioConfig {
    let m_tx = match kind {
        ScenarioKind::DownlinkSa => 1,
        _ => 4,
    };
    let split = match kind {
        ScenarioKind::DownlinkSa | ScenarioKind::DownlinkMa => CurveSplit {
            curve_rho: 0.2,
            curve_alpha: 0.75,
            curve_kappa: 0.5,
        },
        ScenarioKind::Uplink => CurveSplit {
            curve_rho: 0.5,
            curve_alpha: 0.5,
            curve_kappa: 0.5,
        },
    };
    let snr_sweep = (0..=20).map(|i| 10f64.powf((-10.0 + 2.0 * i as f64) / 10.0)).collect();
    ScenarioConfig {
        kind,
        dims: SystemDims {
            m_tx,
            n_rx: 4,
            k_users: 2,
            l_frame: 16,
        },
        power: PowerBudget {
            p_total: DEFAULT_P_TOTAL,
            sigma2_c: 1.0,
            sigma2_s: 1.0,
        },
        target: TargetParams { corr_coeff: 0.5 },
        rho_grid: 41,
        alpha_grid: 41,
        kappa_grid: 41,
        mc_trials: 500,
        seed: 20240001,
        snr_sweep,
        split,
    }
}

/// Default transmit power (linear; 10 dB over unit noise).
pub const DEFAULT_P_TOTAL: f64 = 10.0;

impl ScenarioConfig {
    /// Parses a flat JSON scenario document, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("scenario file must be a JSON object".into()))?;
        if let Some(bad) = obj.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key '{bad}'")));
        }
        let cfg: ScenarioConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.power.validate()?;
        if self.kind == ScenarioKind::DownlinkSa && (self.dims.m_tx != 1 || self.dims.k_users != 2) {
            return Err(Error::Config("downlink-sa requires m_tx = 1 and k_users = 2".into()));
        }
        if !(0.0..1.0).contains(&self.target.corr_coeff) {
            return Err(Error::Config(format!(
                "corr_coeff must lie in [0, 1), got {}",
                self.target.corr_coeff
            )));
        }
        if self.rho_grid < 2 || self.alpha_grid < 2 || self.kappa_grid < 2 {
            return Err(Error::Config("grid resolutions must be >= 2".into()));
        }
        if self.mc_trials == 0 {
            return Err(Error::Config("mc_trials must be >= 1".into()));
        }
        if self.snr_sweep.is_empty() {
            return Err(Error::Config("snr_sweep must not be empty".into()));
        }
        if self.snr_sweep.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("snr_sweep powers must be finite and >= 0".into()));
        }
        if !self.snr_sweep.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("snr_sweep must be strictly increasing".into()));
        }
        let s = &self.split;
        for (name, v) in [
            ("curve_rho", s.curve_rho),
            ("curve_alpha", s.curve_alpha),
            ("curve_kappa", s.curve_kappa),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn target_stats<T: Real>(&self) -> Result<TargetResponseStats<T>> {
        exp_corr_matrix(self.dims.m_tx, self.target.corr_coeff)
    }

    /// Same scenario with a different transmit power.
    pub fn with_power(&self, p_total: f64) -> Self {
        let mut c = self.clone();
        c.power.p_total = p_total;
        c
    }

    pub(crate) fn require(&self, kind: ScenarioKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::WrongScenario {
                expected: kind.as_str(),
                got: self.kind.to_string(),
            });
        }
        Ok(())
    }
}

/// `n` evenly spaced points on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}
