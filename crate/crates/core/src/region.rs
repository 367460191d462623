//! Rate-region geometry and high-SNR slope estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RatePoint, RateRegion, ScenarioConfig, ScenarioKind, SlopeEstimate};
use crate::scalar::{real, Real};

/// Powers at which high-SNR slopes are estimated.
pub const SLOPE_POWERS: [f64; 2] = [1e8, 1e10];

/// Smallest top power accepted by [`hisnr_slope`].
pub const MIN_SLOPE_POWER: f64 = 1e6;

/// Communication and sensing slopes of one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePair {
    pub cr_slope: SlopeEstimate,
    pub sr_slope: SlopeEstimate,
}

/// Pareto-maximal points sorted by increasing `cr`. Duplicates collapse to one.
pub fn pareto_frontier<T: Real>(points: &[RatePoint<T>]) -> Result<RateRegion<T>> {
    if points.is_empty() {
        return Err(Error::Empty("pareto_frontier"));
    }
    if points.iter().any(|p| !(p.cr.is_finite() && p.sr.is_finite())) {
        return Err(Error::InvalidInput("rate points must be finite".into()));
    }
    let mut sorted = points.to_vec();
    // Decreasing cr, ties by decreasing sr.
    sorted.sort_by(|a, b| b.cr.partial_cmp(&a.cr).unwrap().then(b.sr.partial_cmp(&a.sr).unwrap()));
    let mut frontier: Vec<RatePoint<T>> = Vec::new();
    for p in sorted {
        if frontier.last().is_none_or(|best| p.sr > best.sr) {
            frontier.push(p);
        }
    }
    frontier.reverse();
    Ok(RateRegion {
        frontier,
        convexified: false,
    })
}

/// Relative tolerance under which three frontier points count as collinear.
pub const COLLINEAR_TOL: f64 = 1e-12;

/// Whether `b` lies strictly below the chord from `a` to `c`, beyond what
/// rounding can explain.
fn below_chord<T: Real>(a: &RatePoint<T>, b: &RatePoint<T>, c: &RatePoint<T>) -> bool {
    let (dx1, dy1) = (b.cr - a.cr, b.sr - a.sr);
    let (dx2, dy2) = (c.cr - a.cr, c.sr - a.sr);
    // Twice the signed area; positive for a left turn.
    let cross = dx1 * dy2 - dy1 * dx2;
    let scale = (dx1.abs() + dy1.abs()) * (dx2.abs() + dy2.abs());
    cross > scale * real(COLLINEAR_TOL)
}

/// Time-sharing closure: the concave upper envelope of the frontier.
///
/// Only points clearly below a chord are removed, so collinear points stay
/// (for example every point of a time-sharing segment, even after averaging
/// has perturbed them by rounding). Every surviving triple was tested with the
/// same operands, which makes the operation exactly idempotent.
pub fn convexify<T: Real>(region: &RateRegion<T>) -> RateRegion<T> {
    let mut hull: Vec<RatePoint<T>> = Vec::with_capacity(region.frontier.len());
    for p in &region.frontier {
        while hull.len() >= 2 && below_chord(&hull[hull.len() - 2], &hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(*p);
    }
    RateRegion {
        frontier: hull,
        convexified: true,
    }
}

/// Height of the concave envelope at communication rate `x`, which must not
/// exceed the last vertex. Left of the first vertex the envelope is flat.
fn envelope_at<T: Real>(hull: &[RatePoint<T>], x: T) -> T {
    let first = hull[0];
    if x <= first.cr {
        return first.sr;
    }
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x <= b.cr {
            let t = (x - a.cr) / (b.cr - a.cr);
            return a.sr + t * (b.sr - a.sr);
        }
    }
    hull[hull.len() - 1].sr
}

/// Whether every frontier point of `inner` lies in the down-closed convex hull
/// of `outer`, allowing a slack of `tol` in each coordinate.
pub fn contains<T: Real>(outer: &RateRegion<T>, inner: &RateRegion<T>, tol: T) -> bool {
    if inner.frontier.is_empty() {
        return true;
    }
    if outer.frontier.is_empty() {
        return false;
    }
    let hull = if outer.convexified {
        outer.frontier.clone()
    } else {
        convexify(outer).frontier
    };
    let max_cr = hull[hull.len() - 1].cr;
    inner.frontier.iter().all(|p| {
        // Shifting left by `tol` is the most favourable point within slack.
        let x = (p.cr - tol).max(T::zero());
        x <= max_cr && p.sr <= envelope_at(&hull, x) + tol
    })
}

/// Finite-difference slope `d rate / d log2(power)` over the last two samples.
///
/// `samples` are `(power, rate)` pairs with strictly increasing power.
pub fn hisnr_slope(samples: &[(f64, f64)], analytic: f64) -> Result<SlopeEstimate> {
    if samples.len() < 2 {
        return Err(Error::UnreliableRegime(format!(
            "need at least two samples, got {}",
            samples.len()
        )));
    }
    if !samples.windows(2).all(|w| w[0].0 < w[1].0) || samples[0].0 <= 0.0 {
        return Err(Error::UnreliableRegime(
            "powers must be positive and strictly increasing".into(),
        ));
    }
    let (p1, r1) = samples[samples.len() - 2];
    let (p2, r2) = samples[samples.len() - 1];
    if p2 < MIN_SLOPE_POWER {
        return Err(Error::UnreliableRegime(format!(
            "top power {p2:e} is below {MIN_SLOPE_POWER:e}"
        )));
    }
    let numeric = (r2 - r1) / (p2.log2() - p1.log2());
    Ok(SlopeEstimate::new(numeric, analytic))
}

/// Closed-form high-SNR slopes `(isac, fdsac)`, each as `(cr, sr)`, from
/// counting the ranks of the log-det arguments at the scenario's split.
pub fn analytic_slopes(scenario: &ScenarioConfig) -> ((f64, f64), (f64, f64)) {
    let d = &scenario.dims;
    let (m, n, k, l) = (d.m_tx as f64, d.n_rx as f64, d.k_users as f64, d.l_frame as f64);
    let alpha = scenario.split.curve_alpha;
    let pre = n / l;
    match scenario.kind {
        ScenarioKind::DownlinkSa => ((1.0, pre * m), (alpha, (1.0 - alpha) * pre * m)),
        ScenarioKind::DownlinkMa => {
            let streams = m.min(k);
            let isac_sr = if scenario.split.curve_rho > 0.0 {
                pre * (m - streams)
            } else {
                0.0
            };
            let isac_cr = if scenario.split.curve_rho < 1.0 { streams } else { 0.0 };
            let fd_cr = if scenario.split.curve_kappa > 0.0 {
                alpha * streams
            } else {
                0.0
            };
            let fd_sr = if scenario.split.curve_kappa < 1.0 {
                (1.0 - alpha) * pre * m
            } else {
                0.0
            };
            ((isac_cr, isac_sr), (fd_cr, fd_sr))
        }
        ScenarioKind::Uplink => {
            let streams = n.min(k);
            ((streams, pre * m), (alpha * streams, (1.0 - alpha) * pre * m))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[(f64, f64)]) -> Vec<RatePoint<f64>> {
        v.iter().map(|&(c, s)| RatePoint::new(c, s)).collect()
    }

    fn region(v: &[(f64, f64)]) -> RateRegion<f64> {
        pareto_frontier(&pts(v)).unwrap()
    }

    #[test]
    fn dominated_point_removed() {
        assert_eq!(region(&[(1.0, 1.0), (0.5, 0.5)]).frontier, pts(&[(1.0, 1.0)]));
    }

    #[test]
    fn incomparable_points_kept() {
        assert_eq!(
            region(&[(2.0, 0.0), (0.0, 2.0)]).frontier,
            pts(&[(0.0, 2.0), (2.0, 0.0)])
        );
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(pareto_frontier::<f64>(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn duplicates_and_ties_collapse() {
        let r = region(&[(1.0, 1.0), (1.0, 1.0), (1.0, 0.5), (0.5, 1.0)]);
        assert_eq!(r.frontier, pts(&[(1.0, 1.0)]));
        r.validate().unwrap();
    }

    #[test]
    fn matches_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p: Vec<RatePoint<f64>> = (0..1000)
            .map(|_| RatePoint::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let r = pareto_frontier(&p).unwrap();
        r.validate().unwrap();
        assert_eq!(r.frontier, oracle::brute_force_pareto(&p));
    }

    #[test]
    fn hull_keeps_point_above_chord() {
        let r = convexify(&region(&[(2.0, 0.0), (1.5, 1.5), (0.0, 2.0)]));
        assert_eq!(r.frontier.len(), 3);
        assert!(r.convexified);
    }

    #[test]
    fn hull_drops_point_below_chord() {
        let r = convexify(&region(&[(2.0, 0.0), (0.8, 0.8), (0.0, 2.0)]));
        assert_eq!(r.frontier, pts(&[(0.0, 2.0), (2.0, 0.0)]));
    }

    #[test]
    fn collinear_point_retained() {
        let r = convexify(&region(&[(2.0, 0.0), (1.0, 1.0), (0.0, 2.0)]));
        assert_eq!(r.frontier.len(), 3);
    }

    #[test]
    fn single_point_hull() {
        let r = convexify(&region(&[(1.0, 3.0)]));
        assert_eq!(r.frontier, pts(&[(1.0, 3.0)]));
    }

    #[test]
    fn rectangle_containment() {
        let small = region(&[(1.0, 1.0)]);
        let big = region(&[(2.0, 2.0)]);
        assert!(contains(&big, &small, 0.0));
        assert!(!contains(&small, &big, 0.0));
    }

    #[test]
    fn containment_uses_time_sharing() {
        let outer = region(&[(2.0, 0.0), (0.0, 2.0)]);
        assert!(contains(&outer, &region(&[(1.0, 1.0)]), 1e-12));
        assert!(!contains(&outer, &region(&[(1.0, 1.1)]), 1e-12));
        assert!(contains(&outer, &region(&[(1.0, 1.05)]), 0.1));
        assert!(!contains(&outer, &region(&[(2.2, 0.0)]), 0.1));
    }

    #[test]
    fn slope_of_exact_logarithm() {
        let s = hisnr_slope(&[(1e8, 1e8f64.log2()), (1e10, 1e10f64.log2())], 1.0).unwrap();
        assert!((s.numeric - 1.0).abs() < 1e-12);
        assert!(s.abs_error < 1e-12);
    }

    #[test]
    fn slope_of_scaled_capacity() {
        let f = |p: f64| 3.0 * (1.0 + p).log2();
        let s = hisnr_slope(&[(1e8, f(1e8)), (1e10, f(1e10))], 3.0).unwrap();
        assert!((s.numeric - 3.0).abs() < 1e-6);
    }

    #[test]
    fn slope_of_constant() {
        let s = hisnr_slope(&[(1e8, 2.5), (1e10, 2.5)], 0.0).unwrap();
        assert_eq!(s.numeric, 0.0);
    }

    #[test]
    fn slope_rejects_low_power_and_bad_input() {
        assert!(matches!(
            hisnr_slope(&[(1.0, 0.0), (10.0, 1.0)], 1.0),
            Err(Error::UnreliableRegime(_))
        ));
        assert!(matches!(
            hisnr_slope(&[(1e8, 0.0)], 1.0),
            Err(Error::UnreliableRegime(_))
        ));
        assert!(matches!(
            hisnr_slope(&[(1e10, 0.0), (1e8, 1.0)], 1.0),
            Err(Error::UnreliableRegime(_))
        ));
    }

    #[test]
    fn analytic_defaults() {
        use crate::model::default_scenario;
        let ((ic, is), (fc, fs)) = analytic_slopes(&default_scenario(ScenarioKind::DownlinkMa));
        assert_eq!((ic, is), (2.0, 0.5));
        assert_eq!((fc, fs), (1.5, 0.25));
        let ((ic, is), (fc, fs)) = analytic_slopes(&default_scenario(ScenarioKind::Uplink));
        assert_eq!((ic, is), (2.0, 1.0));
        assert_eq!((fc, fs), (1.0, 0.5));
    }

    fn point_set() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..60)
    }

    proptest! {
        #[test]
        fn convexify_is_idempotent(v in point_set()) {
            let once = convexify(&region(&v));
            let twice = convexify(&once);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn hull_is_a_valid_frontier(v in point_set()) {
            let hull = convexify(&region(&v));
            prop_assert!(hull.validate().is_ok());
            for p in pts(&v) {
                prop_assert!(contains(&hull, &region(&[(p.cr, p.sr)]), 1e-9));
            }
        }

        #[test]
        fn contains_is_reflexive(v in point_set()) {
            let r = convexify(&region(&v));
            prop_assert!(contains(&r, &r, 1e-12));
        }

        #[test]
        fn contains_is_transitive(v in point_set(), s1 in 0.1f64..1.0, s2 in 0.1f64..1.0, w in point_set()) {
            let shrink = |pts: &[(f64, f64)], s: f64| pts.iter().map(|&(c, r)| (c * s, r * s)).collect::<Vec<_>>();
            let a = convexify(&region(&v));
            let b = convexify(&region(&shrink(&v, s1)));
            let c = convexify(&region(&shrink(&v, s1 * s2)));
            prop_assert!(contains(&a, &b, 1e-12) && contains(&b, &c, 1e-12));
            prop_assert!(contains(&a, &c, 1e-12));
            // Unrelated sets: the implication still has to hold.
            let d = convexify(&region(&w));
            if contains(&a, &d, 0.0) && contains(&d, &c, 0.0) {
                prop_assert!(contains(&a, &c, 1e-9));
            }
        }
    }
}
