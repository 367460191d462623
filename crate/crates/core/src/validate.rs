//! Self-check suite: every kernel against an independent oracle.
//!
//! Each check draws its random instances from a fixed seed, so a run is fully
//! reproducible. The water-filling routine can be swapped out through
//! [`Hooks`] to confirm that a broken kernel is caught.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alloc::{self, WaterFillResult, IWF_MAX_ITER, IWF_TOL};
use crate::downlink::{self, FdsacSplit};
use crate::error::Result;
use crate::linalg;
use crate::mc::{sample_channels, TrialStream};
use crate::mi_core::{self, NoiseModel};
use crate::model::{default_scenario, unit_grid, CommChannel, ScenarioKind};
use crate::oracle;
use crate::scalar::{CMat, CVec};

/// Signature of a water-filling implementation.
pub type WaterFillFn = fn(&[f64], f64, f64) -> Result<WaterFillResult<f64>>;

/// Replaceable kernels.
#[derive(Debug, Clone, Copy)]
pub struct Hooks {
    pub water_fill: WaterFillFn,
}

impl Default for Hooks {
    fn default() -> Self {
        Self {
            water_fill: alloc::water_fill::<f64>,
        }
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

pub const KKT_CHECK: &str = "water-fill KKT";

/// Runs every check in a fixed order, reporting each one as it finishes.
pub fn run_checks(hooks: &Hooks, mut report: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
    type Check = (&'static str, fn(&Hooks) -> (bool, String));
    let checks: [Check; 10] = [
        (KKT_CHECK, check_kkt),
        ("water-fill grid oracle", check_wf_grid),
        ("comm MI log-det oracle", check_comm_mi),
        ("MMSE-SIC sum identity", check_sic_sum),
        ("sensing MI Kronecker oracle", check_kronecker),
        ("waveform Gram and slot power", check_waveform),
        ("MAC-BC duality", check_duality),
        ("dual-MAC grid oracle", check_iwf_grid),
        ("iterative water-filling monotone", check_iwf_monotone),
        ("downlink-SA FDSAC dominance", check_sa_dominance),
    ];
    checks
        .iter()
        .map(|&(name, f)| {
            let (passed, detail) = match std::panic::catch_unwind(|| f(hooks)) {
                Ok(r) => r,
                Err(_) => (false, "panicked".to_string()),
            };
            let r = CheckResult { name, passed, detail };
            report(&r);
            r
        })
        .collect()
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    r.set_stream(stream);
    r
}

fn verdict(worst: f64, tol: f64, what: String) -> (bool, String) {
    (worst <= tol, format!("{what}, worst {worst:.2e} (tol {tol:.0e})"))
}

/// Largest KKT violation of a water-filling result, or `None` if it errored.
fn kkt_violation(wf: WaterFillFn, gains: &[f64], budget: f64, noise: f64) -> Option<(f64, f64)> {
    let r = wf(gains, budget, noise).ok()?;
    let mu = r.water_level;
    let mut slack: f64 = 0.0;
    for (&g, &q) in gains.iter().zip(&r.allocations) {
        let floor = noise / g;
        let v = if q < 0.0 || !q.is_finite() {
            f64::INFINITY
        } else if q > 0.0 {
            (floor + q - mu).abs()
        } else {
            (mu - floor).max(0.0)
        };
        slack = slack.max(v);
    }
    let total: f64 = r.allocations.iter().sum();
    Some((slack, (total - budget).abs()))
}

fn check_kkt(hooks: &Hooks) -> (bool, String) {
    let mut rng = rng(1);
    let (mut slack, mut budget_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let gains: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..5.0)).collect();
        let budget = rng.random_range(0.0..10.0);
        let noise = rng.random_range(0.1..2.0);
        match kkt_violation(hooks.water_fill, &gains, budget, noise) {
            Some((s, b)) => {
                slack = slack.max(s);
                budget_err = budget_err.max(b);
            }
            None => return (false, "water_fill returned an error".into()),
        }
    }
    let ok = slack <= 1e-8 && budget_err <= 1e-10;
    (
        ok,
        format!("1000 instances, slackness {slack:.2e} (tol 1e-8), budget {budget_err:.2e} (tol 1e-10)"),
    )
}

fn check_wf_grid(hooks: &Hooks) -> (bool, String) {
    let mut rng = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let gains: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
        let budget = rng.random_range(0.1..4.0);
        let noise = rng.random_range(0.5..2.0);
        let Ok(r) = (hooks.water_fill)(&gains, budget, noise) else {
            return (false, "water_fill returned an error".into());
        };
        let value: f64 = gains
            .iter()
            .zip(&r.allocations)
            .map(|(&g, &q)| (1.0 + g * q / noise).log2())
            .sum();
        let steps = if n == 3 { 1200 } else { 100_000 };
        let (_, best) = oracle::grid_water_fill(&gains, budget, noise, steps);
        // The grid can only be worse than the optimum; any excess means the
        // allocation left the simplex.
        let over_budget = (r.allocations.iter().sum::<f64>() - budget).abs() > 1e-9;
        let gap = if over_budget {
            f64::INFINITY
        } else {
            (value - best).abs()
        };
        worst = worst.max(gap);
    }
    verdict(worst, 1e-4, "100 instances with n <= 3".into())
}

fn random_noise(rng: &mut ChaCha8Rng, n: usize, colored: bool) -> (NoiseModel<f64>, CMat<f64>) {
    if colored {
        let c = oracle::random_hpd(rng, n, 0.1);
        (NoiseModel::Colored(c.clone()), c)
    } else {
        let s = rng.random_range(0.2..2.0);
        (NoiseModel::White(s), linalg::eye::<f64>(n).map(|z| z * s))
    }
}

fn check_comm_mi(_: &Hooks) -> (bool, String) {
    let mut rng = rng(3);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let h = oracle::random_cmat(&mut rng, n, k);
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
        let (noise, cov) = random_noise(&mut rng, n, i % 2 == 1);
        let Ok(v) = mi_core::comm_mi(&h, &p, &noise) else {
            return (false, "comm_mi returned an error".into());
        };
        worst = worst.max((v - oracle::comm_mi_det(&h, &p, &cov)).abs());
        worst = worst.max((v - oracle::comm_mi_eig(&h, &p, &cov)).abs());
    }
    verdict(worst, 1e-10, "100 instances, white and colored".into())
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

fn check_sic_sum(_: &Hooks) -> (bool, String) {
    let mut rng = rng(4);
    let mut worst = 0.0f64;
    let mut orders = 0;
    for i in 0..100 {
        let n = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let h = oracle::random_cmat(&mut rng, n, k);
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
        let (noise, _) = random_noise(&mut rng, n, i % 2 == 1);
        let Ok(total) = mi_core::comm_mi(&h, &p, &noise) else {
            return (false, "comm_mi returned an error".into());
        };
        for order in permutations(k) {
            let Ok(r) = mi_core::mmse_sic_user_rates(&h, &p, &noise, &order) else {
                return (false, "mmse_sic_user_rates returned an error".into());
            };
            worst = worst.max((r.iter().sum::<f64>() - total).abs());
            orders += 1;
        }
    }
    verdict(worst, 1e-9, format!("100 instances, {orders} orders"))
}

fn check_kronecker(_: &Hooks) -> (bool, String) {
    let mut rng = rng(5);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let m = rng.random_range(1..=3);
        let n = rng.random_range(1..=3);
        let l = rng.random_range(m..=6);
        let target = oracle::random_target(&mut rng, m);
        let trace = rng.random_range(0.1..5.0);
        let q = oracle::random_psd_with_trace(&mut rng, m, trace);
        let (noise, cov) = random_noise(&mut rng, n, i % 2 == 0);
        let (Ok(v), Ok(w)) = (
            mi_core::sensing_mi(&target, &q, l, n, &noise),
            alloc::synthesize_waveform(&q, l),
        ) else {
            return (false, "sensing_mi or synthesize_waveform returned an error".into());
        };
        worst = worst.max((v - oracle::kronecker_sensing_mi(&target.r_corr, &w, &cov)).abs());
    }
    verdict(worst, 1e-8, "100 instances, half with colored noise".into())
}

fn check_waveform(_: &Hooks) -> (bool, String) {
    let mut rng = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(1..=4);
        let l = rng.random_range(m..=16);
        let trace = rng.random_range(0.1..10.0);
        let q = oracle::random_psd_with_trace(&mut rng, m, trace);
        let Ok(w) = alloc::synthesize_waveform(&q, l) else {
            return (false, "synthesize_waveform returned an error".into());
        };
        let gram = &w * w.adjoint() - q.map(|z| z * l as f64);
        worst = worst.max(linalg::fro(&gram));
        let powers: Vec<f64> = (0..l).map(|s| w.column(s).norm_squared()).collect();
        let mean = powers.iter().sum::<f64>() / l as f64;
        worst = powers.iter().fold(worst, |acc, &p| acc.max((p - mean).abs()));
    }
    verdict(worst, 1e-9, "100 instances".into())
}

fn check_duality(_: &Hooks) -> (bool, String) {
    let mut rng = rng(7);
    let (mut worst, mut trace_err) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let h: Vec<CVec<f64>> = (0..k).map(|_| oracle::random_cvec(&mut rng, m)).collect();
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
        let sigma2 = rng.random_range(0.2..2.0);
        let hm = CMat::from_fn(m, k, |i, j| h[j][i]);
        let Ok(mac) = mi_core::comm_mi(&hm, &p, &NoiseModel::White(sigma2)) else {
            return (false, "comm_mi returned an error".into());
        };
        let Ok((covs, order)) = alloc::mac_to_bc_transform(&h, &p, sigma2) else {
            return (false, "mac_to_bc_transform returned an error".into());
        };
        let Ok(dpc) = downlink::dpc_rates(&h, &covs, &order, sigma2) else {
            return (false, "dpc_rates returned an error".into());
        };
        worst = worst.max((dpc.iter().sum::<f64>() - mac).abs());
        let traces: f64 = covs.iter().map(|c| c.trace().re).sum();
        trace_err = trace_err.max((traces - p.iter().sum::<f64>()).abs());
    }
    let ok = worst <= 1e-8 && trace_err <= 1e-6;
    (
        ok,
        format!("100 instances, sum-rate gap {worst:.2e} (tol 1e-8), trace gap {trace_err:.2e} (tol 1e-6)"),
    )
}

fn check_iwf_grid(_: &Hooks) -> (bool, String) {
    let mut rng = rng(8);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let h: Vec<CVec<f64>> = (0..2).map(|_| oracle::random_cvec(&mut rng, 2)).collect();
        let budget = rng.random_range(0.5..10.0);
        let Ok(sol) = alloc::sum_power_iwf(&h, budget, 1.0, IWF_TOL, IWF_MAX_ITER) else {
            return (false, "sum_power_iwf returned an error".into());
        };
        let grid = oracle::grid_dual_mac_two_users(&h, budget, 1.0, 1000);
        worst = worst.max((sol.sum_rate - grid).abs());
    }
    verdict(worst, 1e-4, "20 two-user instances".into())
}

fn check_iwf_monotone(_: &Hooks) -> (bool, String) {
    let mut rng = rng(9);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let h: Vec<CVec<f64>> = (0..k).map(|_| oracle::random_cvec(&mut rng, m)).collect();
        let budget = rng.random_range(0.1..100.0);
        let Ok(sol) = alloc::sum_power_iwf(&h, budget, 1.0, IWF_TOL, IWF_MAX_ITER) else {
            return (false, "sum_power_iwf returned an error".into());
        };
        for w in sol.objective_history.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    verdict(worst, 1e-12, "50 instances".into())
}

fn check_sa_dominance(_: &Hooks) -> (bool, String) {
    let sc = default_scenario(ScenarioKind::DownlinkSa);
    let grid: Vec<FdsacSplit> = unit_grid(sc.alpha_grid)
        .into_iter()
        .flat_map(|a| {
            unit_grid(sc.kappa_grid)
                .into_iter()
                .map(move |k| FdsacSplit { alpha: a, kappa: k })
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..20 {
        let h: CommChannel<f64> = sample_channels(&mut TrialStream::new(sc.seed, trial), &sc.dims, sc.kind);
        let Ok(corner) = downlink::sa_isac_point(&sc, &h) else {
            return (false, "sa_isac_point returned an error".into());
        };
        for &s in &grid {
            let Ok(p) = downlink::sa_fdsac_point_for(&sc, &h, s) else {
                return (false, "sa_fdsac_point_for returned an error".into());
            };
            worst = worst.max(p.cr - corner.cr).max(p.sr - corner.sr);
        }
    }
    verdict(worst.max(0.0), 1e-9, format!("20 draws x {} splits", grid.len()))
}
