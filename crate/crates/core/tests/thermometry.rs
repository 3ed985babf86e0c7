use proptest::prelude::*;
use tweezer_sim::thermometry::{
    default_off_times, fit_temperature, fit_temperature_with_table, simulate_release_recapture, FitOptions,
    RecaptureCurve, RecaptureModel, SigmaRule,
};
use tweezer_sim::trap::TrapConfig;
use tweezer_sim::SimError;

fn grid(lo_uk: f64, hi_uk: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo_uk + (hi_uk - lo_uk) * i as f64 / (n - 1) as f64) * 1e-6)
        .collect()
}

#[test]
fn recapture_falls_with_off_time_and_temperature() {
    let cfg = TrapConfig::default();
    let times = default_off_times();
    let model = RecaptureModel::new(&cfg, &times, 50_000, 3).unwrap();
    let temps = [20e-6, 30e-6, 40e-6, 56e-6, 70e-6, 80e-6];
    let curves: Vec<Vec<f64>> = temps.iter().map(|&t| model.curve(t).unwrap()).collect();
    // three standard errors of the difference of two binomial estimates, with
    // the pooled variance floored at one count so that p = 1 keeps some slack
    let n = 50_000.0;
    let slack = |a: f64, b: f64| {
        let p = 0.5 * (a + b);
        3.0 * (2.0 * (p * (1.0 - p)).max(1.0 / n) / n).sqrt()
    };
    for c in &curves {
        for k in 1..c.len() {
            assert!(c[k] <= c[k - 1] + slack(c[k], c[k - 1]), "not monotone in t_off: {c:?}");
        }
    }
    for pair in curves.windows(2) {
        for (k, (&hot, &cold)) in pair[1].iter().zip(&pair[0]).enumerate() {
            assert!(
                hot <= cold + slack(hot, cold),
                "not monotone in T at point {k}: {hot} vs {cold}"
            );
        }
    }
    assert!(curves[0][0] > 0.99);
    assert!(curves[5][14] < curves[0][14] - slack(curves[5][14], curves[0][14]));
}

// Atoms bound by only a few percent of the depth spend most of their time
// far out on a wide shell where they move slowly, so they survive a long
// release better than atoms of intermediate energy. A hot ensemble carries
// more of them, and at 100 to 150 µK the ordering in T reverses at the
// longest off times.
#[test]
fn near_threshold_atoms_reverse_long_off_time_order_when_hot() {
    let cfg = TrapConfig::default();
    let times = [30e-6];
    let cold = simulate_release_recapture(100e-6, &cfg, &times, 200_000, 71)
        .unwrap()
        .probabilities()[0];
    let hot = simulate_release_recapture(150e-6, &cfg, &times, 200_000, 72)
        .unwrap()
        .probabilities()[0];
    let se = (2.0 * 0.14 * 0.86 / 200_000.0f64).sqrt();
    assert!(hot > cold + 3.0 * se, "{hot} vs {cold}");
    let short = [2e-6];
    let cold = simulate_release_recapture(100e-6, &cfg, &short, 200_000, 71)
        .unwrap()
        .probabilities()[0];
    let hot = simulate_release_recapture(150e-6, &cfg, &short, 200_000, 72)
        .unwrap()
        .probabilities()[0];
    assert!(hot < cold);
}

#[test]
fn fit_round_trip_is_unbiased_from_20_to_150_uk() {
    let cfg = TrapConfig::default();
    let times = default_off_times();
    for (i, &t) in [20e-6, 56e-6, 100e-6, 150e-6].iter().enumerate() {
        let data = simulate_release_recapture(t, &cfg, &times, 10_000, 100 + i as u64).unwrap();
        let g = grid(t * 1e6 * 0.6, t * 1e6 * 1.5, 19);
        let fit = fit_temperature(&data, &cfg, &g, 100_000, 7).unwrap();
        let rel = (fit.temperature - t).abs() / t;
        assert!(rel < 0.05, "T = {t:e}: fitted {:e} ({rel:.3})", fit.temperature);
        assert!(fit.sigma > 0.0 && fit.sigma < 0.05 * t);
    }
}

#[test]
fn hundred_shot_curve_fits_within_errors() {
    let cfg = TrapConfig::default();
    let times = default_off_times();
    let data = simulate_release_recapture(56e-6, &cfg, &times, 100, 41).unwrap();
    let fit = fit_temperature(&data, &cfg, &grid(30.0, 100.0, 29), 100_000, 1).unwrap();
    assert!((fit.temperature - 56e-6).abs() < 3.0 * fit.sigma, "{fit:?}");
    assert!(fit.sigma > 0.5e-6 && fit.sigma < 5e-6);
}

#[test]
fn sigma_rules_differ_but_share_the_estimate() {
    let cfg = TrapConfig::default();
    let times = default_off_times();
    let table = RecaptureModel::new(&cfg, &times, 50_000, 2)
        .unwrap()
        .table(&grid(30.0, 100.0, 29))
        .unwrap();
    let data = simulate_release_recapture(56e-6, &cfg, &times, 100, 8).unwrap();
    let a = fit_temperature_with_table(&data, &table, &FitOptions::default()).unwrap();
    let b = fit_temperature_with_table(
        &data,
        &table,
        &FitOptions {
            sigma: SigmaRule::ResidualWidth,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(a.temperature, b.temperature);
    assert!(a.sigma > 0.0 && b.sigma > 0.0);
}

#[test]
fn best_fit_on_grid_edge_is_a_range_error() {
    let cfg = TrapConfig::default();
    let times = default_off_times();
    let data = simulate_release_recapture(150e-6, &cfg, &times, 2000, 5).unwrap();
    let err = fit_temperature(&data, &cfg, &grid(30.0, 80.0, 11), 20_000, 1).unwrap_err();
    assert!(matches!(err, SimError::FitRange(_)), "{err:?}");
}

#[test]
fn csv_rejects_malformed_input() {
    for bad in [
        "",
        "t_off_us,probability,shots\n",
        "t_off_us,probability,shots\n1,0.5\n",
        "t_off_us,probability,shots\n1,1.5,100\n",
        "t_off_us,probability,shots\n1,0.5,100\n2,0.4,90\n",
        "x,y,z\n1,0.5,100\n",
        "t_off_us,probability,shots\nabc,0.5,100\n",
    ] {
        assert!(RecaptureCurve::read_csv(bad.as_bytes()).is_err(), "accepted {bad:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(
        points in prop::collection::vec((0.5f64..90.0, 0.0f64..=1.0), 2..20),
        shots in 1u64..100_000,
    ) {
        let mut times: Vec<f64> = points.iter().map(|p| (p.0 * 1e3).round() * 1e-9).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        prop_assume!(times.len() >= 2);
        let probs: Vec<f64> = points.iter().take(times.len()).map(|p| p.1).collect();
        let curve = RecaptureCurve::new(times, probs, shots).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let back = RecaptureCurve::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.shots_per_point(), curve.shots_per_point());
        for (a, b) in back.off_times().iter().zip(curve.off_times()) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs());
        }
        for (a, b) in back.probabilities().iter().zip(curve.probabilities()) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }
}
