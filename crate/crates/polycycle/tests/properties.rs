//! Property tests over the closed-form layers: fits, compensator,
//! cycle location, and the τ verdicts.  Randomized inputs stay away from
//! the integrator so the whole file runs in milliseconds per case.

use proptest::prelude::*;

use polycycle::asymptotics::{
    default_alpha_probe_grid, displacement_sign_changes, find_limit_cycle_core,
    predicted_location, tau_conditions, OfflineModel, TauSpec,
};
use polycycle::num::geomspace;
use polycycle::returnmap::{compensator, fit_power_law, ReturnSample, SampleStatus};

fn power_law_samples(a: f64, r: f64) -> Vec<ReturnSample> {
    let mut grid = geomspace(1e-6, 1e-3, 24);
    grid.reverse();
    grid.iter()
        .map(|&s| ReturnSample {
            s_in: s,
            s_out: a * s.powf(r),
            time: -r * s.ln(),
            status: SampleStatus::Ok,
        })
        .collect()
}

proptest! {
    /// ω(s; α) is positive for s ∈ (0, 1), decreasing in s, and within
    /// O(α) of its α = 0 limit −log s.
    #[test]
    fn compensator_positive_monotone_continuous(
        s in 1e-6f64..0.9,
        alpha in -0.2f64..0.2,
    ) {
        let w = compensator(s, alpha).unwrap();
        prop_assert!(w > 0.0);
        let w2 = compensator(s * 0.5, alpha).unwrap();
        prop_assert!(w2 > w);
        let w0 = compensator(s, 0.0).unwrap();
        // ω − (−log s) = α log²s/2 + O(α²).
        let bound = alpha.abs() * s.ln() * s.ln();
        prop_assert!((w - w0).abs() <= bound + 1e-12);
    }

    /// The power-law fit recovers an exact model to near machine
    /// precision and reports no spurious remainder exponent.
    #[test]
    fn fit_recovers_exact_power_law(
        a in 0.2f64..5.0,
        r in 0.5f64..2.0,
    ) {
        let fit = fit_power_law(&power_law_samples(a, r)).unwrap();
        prop_assert!((fit.r_hat - r).abs() < 1e-9, "r_hat = {}", fit.r_hat);
        prop_assert!((fit.a_hat - a).abs() < 1e-9 * a, "a_hat = {}", fit.a_hat);
        prop_assert!(fit.eps_hat.is_none());
    }

    /// Inside W = {(r−1)(A−1) > 0} the located cycle matches the
    /// closed-form root A^{−1/(r−1)} and satisfies the period law.
    #[test]
    fn offline_cycle_matches_prediction(
        a in prop_oneof![1.2f64..4.0, 0.25f64..0.8],
        gap in 0.05f64..0.5,
        t0_bar in -3.0f64..-0.5,
        c in -1.0f64..1.0,
    ) {
        // r on the same side of 1 as A.
        let r = if a > 1.0 { 1.0 + gap } else { 1.0 - gap };
        let s_pred = predicted_location(a, r).unwrap();
        prop_assume!(s_pred > 1e-250 && s_pred < 0.9);
        let model = OfflineModel { a, r, t0_bar, c };
        let bracket = (s_pred / 10.0, (s_pred * 10.0).min(0.99));
        let cycle = find_limit_cycle_core(&model, bracket, &[]).unwrap();
        prop_assert!((cycle.s_star - s_pred).abs() <= 1e-8 * s_pred);
        let period = t0_bar * cycle.s_star.ln() + c;
        prop_assert!((cycle.period - period).abs() <= 1e-9 * period.abs().max(1.0));
        // Multiplier log ℛ′(s*) = log r for the pure power law.
        prop_assert!((cycle.multiplier_log - r.ln()).abs() < 1e-3);
    }

    /// The displacement of a power-law return map is monotone in log s,
    /// so any window sees at most one sign change.
    #[test]
    fn displacement_at_most_one_sign_change(
        a in 0.3f64..3.0,
        r in prop_oneof![1.05f64..1.6, 0.6f64..0.95],
        lo_exp in -12.0f64..-4.0,
        span in 1.0f64..6.0,
    ) {
        let model = OfflineModel { a, r, t0_bar: -1.0, c: 0.0 };
        let lo = 10f64.powf(lo_exp);
        let hi = 10f64.powf(lo_exp + span);
        let n = displacement_sign_changes(&model, r, (lo, hi), 64).unwrap();
        prop_assert!(n <= 1, "{n} sign changes");
    }

    /// τ = α^l verdicts match the analytic admissibility interval
    /// l ∈ (−1, 0); sampled away from the endpoints, where any finite
    /// grid is inconclusive.
    #[test]
    fn tau_power_verdict_matches_interval(
        l in prop_oneof![-0.9f64..-0.1, 0.1f64..1.0, -1.9f64..-1.1],
    ) {
        let v = tau_conditions(&TauSpec::power(l), &default_alpha_probe_grid());
        prop_assert_eq!(v.overall, l > -1.0 && l < 0.0, "l = {}", l);
    }

    /// geomspace is log-uniform: endpoints exact, strictly monotone,
    /// constant consecutive ratio.
    #[test]
    fn geomspace_is_log_uniform(
        lo_exp in -30.0f64..0.0,
        span in 0.5f64..20.0,
        n in 3usize..50,
    ) {
        let lo = 10f64.powf(lo_exp);
        let hi = 10f64.powf(lo_exp + span);
        let g = geomspace(lo, hi, n);
        prop_assert_eq!(g.len(), n);
        prop_assert!((g[0] - lo).abs() <= 1e-12 * lo);
        prop_assert!((g[n - 1] - hi).abs() <= 1e-12 * hi);
        let rho = (g[1] / g[0]).ln();
        for w in g.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(((w[1] / w[0]).ln() - rho).abs() < 1e-9);
        }
    }
}
