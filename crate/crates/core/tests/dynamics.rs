use approx::assert_relative_eq;
use proptest::prelude::*;
use tweezer_sim::dynamics::{
    integrate, sample_ensemble, AtomState, Propagator, TransferSchedule, TrapDrive, DEFAULT_DT,
};
use tweezer_sim::motion::motion_profile_round_trip;
use tweezer_sim::trap::{TrapConfig, Vec3};

/// Period of a 1-D radial oscillation of amplitude `a` in the Gaussian
/// well, from T = 4∫₀ᵃ dx / v(x) with x = a sin θ.
fn radial_period_quadrature(cfg: &TrapConfig, a: f64) -> f64 {
    let u = cfg.phys().kb * cfg.depth();
    let w2 = cfg.waist() * cfg.waist();
    let v = |x: f64| -u * (-2.0 * x * x / w2).exp();
    let n = 20_000;
    let h = 0.5 * std::f64::consts::PI / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let th = (i as f64 + 0.5) * h;
        let x = a * th.sin();
        let speed = (2.0 * (v(a) - v(x)) / cfg.mass()).sqrt();
        sum += a * th.cos() / speed * h;
    }
    4.0 * sum
}

// Quadrature result for the default trap at a 0.3 µm amplitude.
const FROZEN_PERIOD: f64 = 14.048_617e-6;

#[test]
fn orbit_period_quadrature_is_frozen_and_reduces_to_harmonic() {
    let cfg = TrapConfig::default();
    let harmonic = 2.0 * std::f64::consts::PI / cfg.trap_frequencies().radial;
    assert_relative_eq!(radial_period_quadrature(&cfg, 1e-9), harmonic, max_relative = 1e-5);
    assert_relative_eq!(
        radial_period_quadrature(&cfg, 0.3e-6),
        FROZEN_PERIOD,
        max_relative = 1e-5
    );
}

#[test]
fn integrated_orbit_matches_quadrature_period() {
    let cfg = TrapConfig::default();
    let drive = TrapDrive::stationary(cfg).with_gravity(false);
    let start = AtomState::at_rest(Vec3::new(0.0, 0.3e-6, 0.0), 0.0);
    let mut p = Propagator::new(&drive, start, 5e-9).unwrap();
    // upward zero crossings of y give whole periods
    let mut crossings = Vec::new();
    let mut prev = p.state().position.y;
    let mut prev_t = 0.0;
    while crossings.len() < 11 {
        let t = p.time() + 5e-9;
        p.advance_to(t);
        let y = p.state().position.y;
        if prev < 0.0 && y >= 0.0 {
            crossings.push(prev_t + (t - prev_t) * (-prev) / (y - prev));
        }
        prev = y;
        prev_t = t;
    }
    let period = (crossings[10] - crossings[0]) / 10.0;
    assert_relative_eq!(period, FROZEN_PERIOD, max_relative = 1e-5);
}

#[test]
fn energy_drift_over_10_ms_is_below_1e4_of_depth() {
    let cfg = TrapConfig::default();
    let drive = TrapDrive::stationary(cfg);
    let ens = sample_ensemble(56e-6, &cfg, 8, 21).unwrap();
    let limit = 1e-4 * cfg.phys().kb * cfg.depth();
    for s in ens.states() {
        let traj = integrate(s, &drive, 10e-3, DEFAULT_DT, 1e-3).unwrap();
        assert!(traj.lost_at.is_none());
        let e0 = traj.samples[0].energy;
        for smp in &traj.samples {
            assert!((smp.energy - e0).abs() < limit, "drift {:e} J", smp.energy - e0);
        }
    }
}

#[test]
fn time_reversal_returns_to_start() {
    let cfg = TrapConfig::default();
    let drive = TrapDrive::stationary(cfg);
    let s0 = sample_ensemble(56e-6, &cfg, 1, 4).unwrap().states()[0];
    let mut p = Propagator::new(&drive, s0, DEFAULT_DT).unwrap();
    p.advance_to(100e-6);
    let mut back = *p.state();
    back.velocity = -back.velocity;
    back.time = 0.0;
    let mut q = Propagator::new(&drive, back, DEFAULT_DT).unwrap();
    q.advance_to(100e-6);
    let r = q.state();
    assert!(
        (r.position - s0.position).norm() < 1e-12,
        "{:e}",
        (r.position - s0.position).norm()
    );
    assert!((r.velocity + s0.velocity).norm() < 1e-8);
}

#[test]
fn static_ensemble_stays_stationary() {
    let cfg = TrapConfig::default();
    let drive = TrapDrive::stationary(cfg).with_gravity(false);
    let ens = sample_ensemble(56e-6, &cfg, 400, 9).unwrap();
    let mean_abs_y =
        |states: &[AtomState]| states.iter().map(|s| s.position.y.abs()).sum::<f64>() / states.len() as f64;
    let before = mean_abs_y(ens.states());
    let after: Vec<AtomState> = ens
        .states()
        .iter()
        .map(|s| {
            let mut p = Propagator::new(&drive, *s, 100e-9).unwrap();
            assert!(p.advance_to(1e-3));
            *p.state()
        })
        .collect();
    let rel = (mean_abs_y(&after) - before).abs() / before;
    assert!(rel < 0.08, "spatial spread changed by {rel}");
}

#[test]
fn loss_is_flagged_when_the_trap_vanishes() {
    let cfg = TrapConfig::default();
    // atom above the depth escapes
    let drive = TrapDrive::stationary(cfg).with_gravity(false);
    let v = (3.0 * cfg.phys().kb * cfg.depth() / cfg.mass()).sqrt();
    let state = AtomState {
        position: Vec3::zeros(),
        velocity: Vec3::new(0.0, v, 0.0),
        time: 0.0,
    };
    let mut p = Propagator::new(&drive, state, DEFAULT_DT).unwrap();
    assert!(!p.advance_to(1e-3));
    assert!(p.lost_at().unwrap() < 1e-3);
}

#[test]
fn transfer_and_motion_drive_accept_largest_admissible_step() {
    let cfg = TrapConfig::default();
    let ts = TransferSchedule::with_defaults(10e-6, 600e-6).unwrap();
    let deeper = cfg.with_depth(600e-6).unwrap();
    let dt = tweezer_sim::dynamics::max_time_step(&deeper);
    let drive = TrapDrive::stationary(cfg).with_transfer(ts);
    assert!(Propagator::new(&drive, AtomState::at_rest(Vec3::zeros(), 0.0), dt).is_ok());
    assert!(Propagator::new(&drive, AtomState::at_rest(Vec3::zeros(), 0.0), dt * 1.01).is_err());
}

#[test]
fn atom_follows_a_slow_round_trip() {
    let cfg = TrapConfig::default();
    let prof = motion_profile_round_trip(10e-6, Vec3::new(0.0, 1.0, 0.0), 3e-3, 1e-3, 1e-3).unwrap();
    let drive = TrapDrive::new(cfg, prof).with_gravity(false);
    let mut p = Propagator::new(&drive, AtomState::at_rest(Vec3::zeros(), 0.0), 100e-9).unwrap();
    assert!(p.advance_to(2.5e-3));
    assert!((p.state().position.y - 10e-6).abs() < 0.05e-6);
    assert!(p.advance_to(6e-3));
    assert!(p.state().position.norm() < 0.05e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn advance_to_lands_exactly(target in 1e-7f64..5e-6, dt in 5e-9f64..5e-7) {
        let cfg = TrapConfig::default();
        let drive = TrapDrive::stationary(cfg);
        let mut p = Propagator::new(&drive, AtomState::at_rest(Vec3::new(0.0, 0.1e-6, 0.0), 0.0), dt).unwrap();
        prop_assert!(p.advance_to(target));
        prop_assert_eq!(p.time(), target);
    }

    #[test]
    fn energy_is_conserved_for_any_thermal_atom(seed in 0u64..1000, t_uk in 5.0f64..150.0) {
        let cfg = TrapConfig::default();
        let drive = TrapDrive::stationary(cfg);
        let s = sample_ensemble(t_uk * 1e-6, &cfg, 1, seed).unwrap().states()[0];
        let mut p = Propagator::new(&drive, s, DEFAULT_DT).unwrap();
        let e0 = p.energy();
        if p.advance_to(200e-6) {
            prop_assert!((p.energy() - e0).abs() < 1e-4 * cfg.phys().kb * cfg.depth());
        }
    }
}
