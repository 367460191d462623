//! Property tests for the invariants of the public API.

use isac_mi::alloc::{self, IWF_MAX_ITER, IWF_TOL};
use isac_mi::downlink;
use isac_mi::mc::{self, sample_channels, TrialStream};
use isac_mi::mi_core::{self, NoiseModel};
use isac_mi::model::{RatePoint, TargetResponseStats};
use isac_mi::region::{convexify, pareto_frontier};
use isac_mi::scalar::{CMat, CVec};
use isac_mi::uplink::{self, SicOrder};
use isac_mi::{default_scenario, linalg, oracle, CommChannelF64, RatePointF64, ScenarioKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn water_fill_kkt(
        gains in prop::collection::vec(0.01f64..20.0, 1..12),
        budget in 0.0f64..50.0,
        noise in 0.05f64..5.0,
    ) {
        let r = alloc::water_fill(&gains, budget, noise).unwrap();
        prop_assert!((r.allocations.iter().sum::<f64>() - budget).abs() <= 1e-10);
        for (&g, &q) in gains.iter().zip(&r.allocations) {
            prop_assert!(q >= 0.0);
            if q > 0.0 {
                prop_assert!((noise / g + q - r.water_level).abs() <= 1e-8);
            } else {
                prop_assert!(noise / g >= r.water_level - 1e-8);
            }
        }
    }

    #[test]
    fn rates_nonnegative_and_monotone_in_scale(seed in any::<u64>(), t in 1.0f64..10.0) {
        let mut r = rng(seed);
        let (n, k, m) = (r.random_range(1..=4), r.random_range(1..=3), r.random_range(1..=3));
        let h = oracle::random_cmat(&mut r, n, k);
        let p: Vec<f64> = (0..k).map(|_| r.random_range(0.0..5.0)).collect();
        let noise = NoiseModel::White(r.random_range(0.1..2.0));
        let scaled: Vec<f64> = p.iter().map(|x| x * t).collect();
        let c1 = mi_core::comm_mi(&h, &p, &noise).unwrap();
        let c2 = mi_core::comm_mi(&h, &scaled, &noise).unwrap();
        prop_assert!(c1 >= 0.0 && c2 >= c1 - 1e-12);

        let target = oracle::random_target(&mut r, m);
        let trace = r.random_range(0.1..5.0);
        let q = oracle::random_psd_with_trace(&mut r, m, trace);
        let l = r.random_range(m..=8);
        let s1 = mi_core::sensing_mi(&target, &q, l, n, &noise).unwrap();
        let s2 = mi_core::sensing_mi(&target, &q.map(|z| z * t), l, n, &noise).unwrap();
        prop_assert!(s1 >= 0.0 && s2 >= s1 - 1e-12);
    }

    #[test]
    fn sic_rates_sum_to_comm_mi(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, k) = (r.random_range(1..=4), r.random_range(1..=4));
        let h = oracle::random_cmat(&mut r, n, k);
        let p: Vec<f64> = (0..k).map(|_| r.random_range(0.0..10.0)).collect();
        let noise = NoiseModel::Colored(oracle::random_hpd(&mut r, n, 0.1));
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut r);
        let rates = mi_core::mmse_sic_user_rates(&h, &p, &noise, &order).unwrap();
        let total = mi_core::comm_mi(&h, &p, &noise).unwrap();
        prop_assert!(rates.iter().all(|&x| x >= 0.0));
        prop_assert!((rates.iter().sum::<f64>() - total).abs() <= 1e-9);
    }

    #[test]
    fn colored_identity_matches_white(seed in any::<u64>(), s2 in 0.05f64..5.0) {
        let mut r = rng(seed);
        let (m, n) = (r.random_range(1..=4), r.random_range(1..=4));
        let target = oracle::random_target(&mut r, m);
        let q = oracle::random_psd_with_trace(&mut r, m, 3.0);
        let white = mi_core::sensing_mi(&target, &q, 8, n, &NoiseModel::White(s2)).unwrap();
        let colored = NoiseModel::Colored(linalg::eye::<f64>(n).map(|z| z * s2));
        let col = mi_core::sensing_mi(&target, &q, 8, n, &colored).unwrap();
        prop_assert!((white - col).abs() <= 1e-10);
    }

    #[test]
    fn waveform_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (m, n) = (r.random_range(1..=4), r.random_range(1..=3));
        let l = r.random_range(m..=10);
        let target = oracle::random_target(&mut r, m);
        let trace = r.random_range(0.1..8.0);
        let q = oracle::random_psd_with_trace(&mut r, m, trace);
        let cov = oracle::random_hpd(&mut r, n, 0.1);
        let mi = mi_core::sensing_mi(&target, &q, l, n, &NoiseModel::Colored(cov.clone())).unwrap();
        let w = alloc::synthesize_waveform(&q, l).unwrap();
        prop_assert!((mi - oracle::kronecker_sensing_mi(&target.r_corr, &w, &cov)).abs() <= 1e-8);
    }

    #[test]
    fn iwf_monotone_and_dual(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (m, k) = (r.random_range(1..=4), r.random_range(1..=4));
        let h: Vec<CVec<f64>> = (0..k).map(|_| oracle::random_cvec(&mut r, m)).collect();
        let budget = 10f64.powf(r.random_range(-1.0..2.5));
        let sol = alloc::sum_power_iwf(&h, budget, 1.0, IWF_TOL, IWF_MAX_ITER).unwrap();
        for w in sol.objective_history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        let dpc: f64 = downlink::dpc_rates(&h, &sol.bc_covariances, &sol.encoding_order, 1.0).unwrap().iter().sum();
        prop_assert!((dpc - sol.sum_rate).abs() <= 1e-8);
        // No single-user allocation beats the optimum.
        for i in 0..k {
            let mut p = vec![0.0; k];
            p[i] = budget;
            let hm = CMat::from_fn(m, k, |a, b| h[b][a]);
            prop_assert!(mi_core::comm_mi(&hm, &p, &NoiseModel::White(1.0)).unwrap() <= sol.sum_rate + 1e-8 * sol.sum_rate.max(1.0));
        }
        let fast = alloc::sum_capacity(&h, budget, 1.0).unwrap();
        prop_assert!((fast - sol.sum_rate).abs() <= 1e-8 * sol.sum_rate.max(1.0));
    }

    #[test]
    fn frontier_is_sorted_antichain(v in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..40)) {
        let pts: Vec<RatePointF64> = v.iter().map(|&(c, s)| RatePoint::new(c, s)).collect();
        let region = pareto_frontier(&pts).unwrap();
        region.validate().unwrap();
        for a in &region.frontier {
            for b in &region.frontier {
                prop_assert!(a == b || !a.dominates(b));
            }
        }
        // Every input point is weakly dominated by some frontier point.
        for p in &pts {
            prop_assert!(region.frontier.iter().any(|f| f.cr >= p.cr && f.sr >= p.sr));
        }
        let hull = convexify(&region);
        prop_assert_eq!(convexify(&hull).frontier, hull.frontier);
    }

    #[test]
    fn uplink_perfect_cancellation_invariance(seed in any::<u64>(), t in 0.0f64..10.0) {
        let sc = default_scenario(ScenarioKind::Uplink);
        let mut r = rng(seed);
        let h: CommChannelF64 = sample_channels(&mut TrialStream::new(seed, 0), &sc.dims, sc.kind);
        let h = h.uplink_matrix().unwrap().clone();
        let k = sc.dims.k_users;
        let p1: Vec<f64> = (0..k).map(|_| r.random_range(0.0..10.0)).collect();
        let p2: Vec<f64> = p1.iter().map(|x| x * t).collect();
        let q1 = oracle::random_psd_with_trace(&mut r, sc.dims.m_tx, 5.0);
        let q2 = q1.map(|z| z * t);
        let sc_a = uplink::uplink_sic_point(&h, &p1, &q1, SicOrder::SensingCentric, &sc).unwrap();
        let sc_b = uplink::uplink_sic_point(&h, &p2, &q1, SicOrder::SensingCentric, &sc).unwrap();
        prop_assert!((sc_a.sr - sc_b.sr).abs() <= 1e-12);
        let cc_a = uplink::uplink_sic_point(&h, &p1, &q1, SicOrder::CommCentric, &sc).unwrap();
        let cc_b = uplink::uplink_sic_point(&h, &p1, &q2, SicOrder::CommCentric, &sc).unwrap();
        prop_assert!((cc_a.cr - cc_b.cr).abs() <= 1e-12);
    }

    #[test]
    fn time_share_is_affine(a in (0.0f64..10.0, 0.0f64..10.0), b in (0.0f64..10.0, 0.0f64..10.0), p in 0.0f64..=1.0) {
        let (ps, pc) = (RatePoint::new(a.0, a.1), RatePoint::new(b.0, b.1));
        let x = uplink::time_share(ps, pc, p).unwrap();
        prop_assert!((x.cr - (p * a.0 + (1.0 - p) * b.0)).abs() <= 1e-12);
        prop_assert!((x.sr - (p * a.1 + (1.0 - p) * b.1)).abs() <= 1e-12);
    }
}

#[test]
fn target_stats_invariants_hold_for_defaults() {
    for kind in [ScenarioKind::DownlinkSa, ScenarioKind::DownlinkMa, ScenarioKind::Uplink] {
        let t: TargetResponseStats<f64> = default_scenario(kind).target_stats().unwrap();
        t.validate().unwrap();
        let trace: f64 = t.r_corr.trace().re;
        assert!((trace - t.m() as f64).abs() < 1e-12);
    }
}

#[test]
fn ergodic_runs_are_reproducible() {
    let mut sc = default_scenario(ScenarioKind::DownlinkMa);
    sc.mc_trials = 32;
    sc.rho_grid = 5;
    let a = downlink::downlink_region::<f64>(&sc, downlink::Mode::Isac).unwrap();
    let b = downlink::downlink_region::<f64>(&sc, downlink::Mode::Isac).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| downlink::downlink_region::<f64>(&sc, downlink::Mode::Isac).unwrap());
    assert_eq!(a, c);
}

#[test]
fn stderr_shrinks_with_trials() {
    let mut sc = default_scenario(ScenarioKind::Uplink);
    let mut errs = Vec::new();
    for trials in [100, 400] {
        sc.mc_trials = trials;
        let (ps, _) = uplink::uplink_ergodic_corners::<f64>(&sc).unwrap();
        errs.push(ps.stderr.cr);
    }
    let ratio = errs[0] / errs[1];
    assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
}

#[test]
fn single_precision_path() {
    let sc = default_scenario(ScenarioKind::DownlinkMa);
    let h: isac_mi::model::CommChannel<f32> = sample_channels(&mut TrialStream::new(sc.seed, 0), &sc.dims, sc.kind);
    let h64: CommChannelF64 = sample_channels(&mut TrialStream::new(sc.seed, 0), &sc.dims, sc.kind);
    let p32 = downlink::ma_isac_point(&sc, h.downlink_vectors().unwrap(), 0.3).unwrap();
    let p64 = downlink::ma_isac_point(&sc, h64.downlink_vectors().unwrap(), 0.3).unwrap();
    assert!((p32.cr as f64 - p64.cr).abs() < 1e-3);
    assert!((p32.sr as f64 - p64.sr).abs() < 1e-3);
    let avg = mc::ergodic_average::<f32, _>(&sc, 8, |ch| downlink::ma_isac_point(&sc, ch.downlink_vectors()?, 0.3));
    assert!(avg.unwrap().mean.cr > 0.0);
}
