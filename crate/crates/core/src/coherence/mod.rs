//! Hyperfine-qubit phase under the differential light shift.
//!
//! The qubit frequency is ω_hf + η U/ħ, with U the trap light depth at the
//! atom. Only the light-shift part is tracked; pulses are instantaneous
//! ideal rotations.

mod fringe;
mod run;
mod sequence;

pub use fringe::{fit_fringes, uniform_phases, FringeFit, FringeRecord};
pub use run::{ramsey_contrast_curve, run_sequence, run_sequence_with, AtomPhases, SequenceOptions, SequenceOutcome};
pub use sequence::{PulseEvent, PulseKind, PulseSequence};

pub use crate::dynamics::TransferSchedule;

use serde::{Deserialize, Serialize};

use crate::constants::{PhysConstants, RB87_HYPERFINE};
use crate::dynamics::Trajectory;
use crate::error::{Result, SimError};
use crate::motion::MotionProfile;
use crate::trap::TrapConfig;

/// Qubit model parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// Differential light-shift factor.
    pub eta: f64,
    /// Irreversible coherence time, s.
    pub t2: f64,
    /// Hyperfine splitting, rad/s.
    pub omega_hf: f64,
    /// Extra multiplicative contrast, 1 by default.
    pub extra_contrast: f64,
}

impl Default for QubitParams {
    fn default() -> Self {
        QubitParams {
            eta: 7e-4,
            t2: 34e-3,
            omega_hf: RB87_HYPERFINE,
            extra_contrast: 1.0,
        }
    }
}

impl QubitParams {
    pub fn new(eta: f64, t2: f64) -> Result<Self> {
        let qp = QubitParams {
            eta,
            t2,
            ..Default::default()
        };
        qp.validate()?;
        Ok(qp)
    }

    pub fn with_extra_contrast(mut self, c: f64) -> Result<Self> {
        self.extra_contrast = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0 && self.eta < 1.0) {
            return Err(SimError::validation("eta", "must lie in (0, 1)"));
        }
        if !(self.t2.is_finite() && self.t2 > 0.0) {
            return Err(SimError::validation("t2", "must be > 0"));
        }
        if !(self.omega_hf.is_finite() && self.omega_hf > 0.0) {
            return Err(SimError::validation("omega_hf", "must be > 0"));
        }
        if !(self.extra_contrast > 0.0 && self.extra_contrast <= 1.0) {
            return Err(SimError::validation("extra_contrast", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Phase rate per kelvin of light depth, rad/(s·K).
    pub fn rate_per_kelvin(&self, phys: &PhysConstants) -> f64 {
        self.eta * phys.kb / phys.hbar
    }

    /// Irreversible contrast factor after `duration` seconds.
    pub fn contrast(&self, duration: f64) -> f64 {
        (-duration / self.t2).exp() * self.extra_contrast
    }
}

/// Light-shift angular frequency offset of the qubit at a local light depth
/// of `local_depth` kelvin.
pub fn light_shift_phase_rate(qp: &QubitParams, local_depth: f64) -> Result<f64> {
    if !(local_depth.is_finite() && local_depth >= 0.0) {
        return Err(SimError::domain(format!("local depth must be >= 0, got {local_depth}")));
    }
    Ok(qp.rate_per_kelvin(&PhysConstants::RB87) * local_depth)
}

/// Light-shift phase picked up along `trajectory` between `t0` and `t1`,
/// by trapezoidal quadrature over the stored samples.
pub fn accumulate_phase(trajectory: &Trajectory, cfg: &TrapConfig, qp: &QubitParams, t0: f64, t1: f64) -> Result<f64> {
    let s = &trajectory.samples;
    let (start, end) = match (trajectory.start_time(), trajectory.end_time()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(SimError::domain("empty trajectory")),
    };
    if !(t0 <= t1 && t0 >= start && t1 <= end) {
        return Err(SimError::domain(format!(
            "interval [{t0:e}, {t1:e}] outside trajectory span [{start:e}, {end:e}]"
        )));
    }
    let depth_at = |t: f64| -> f64 {
        let k = s.partition_point(|x| x.state.time < t).min(s.len() - 1);
        if k == 0 || s[k].state.time == t {
            return s[k].local_depth;
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let w = (t - a.state.time) / (b.state.time - a.state.time);
        a.local_depth + w * (b.local_depth - a.local_depth)
    };
    let mut integral = 0.0;
    let mut t_prev = t0;
    let mut d_prev = depth_at(t0);
    for x in s.iter().filter(|x| x.state.time > t0 && x.state.time < t1) {
        integral += 0.5 * (d_prev + x.local_depth) * (x.state.time - t_prev);
        t_prev = x.state.time;
        d_prev = x.local_depth;
    }
    integral += 0.5 * (d_prev + depth_at(t1)) * (t1 - t_prev);
    Ok(qp.rate_per_kelvin(cfg.phys()) * integral)
}

const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// ∫ depth dt (K·s) over [a, b] for an atom sitting at the bottom of a trap
/// that follows `profile`.
fn bottom_depth_integral(profile: &MotionProfile, cfg: &TrapConfig, a: f64, b: f64) -> f64 {
    let depth = |t: f64| cfg.depth_at_center(&profile.position(t));
    let mut cuts = vec![a];
    for (t0, t1, _) in profile.segment_times() {
        for t in [t0, t1] {
            if t > a && t < b {
                cuts.push(t);
            }
        }
    }
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        // the 8-point rule is exact for the degree-10 minimum-jerk depth
        // profile split at the segment midpoint
        for piece in [(lo, mid), (mid, hi)] {
            let (m, h) = (0.5 * (piece.0 + piece.1), 0.5 * (piece.1 - piece.0));
            total += h * GAUSS_LEGENDRE_8.iter().map(|&(x, w)| w * depth(m + h * x)).sum::<f64>();
        }
    }
    total
}

/// Echo phase φ(t_pi → t_end) − φ(t_start → t_pi) of an atom following the
/// trap bottom, no Monte Carlo.
pub fn echo_phase_prediction_window(
    profile: &MotionProfile,
    cfg: &TrapConfig,
    qp: &QubitParams,
    t_start: f64,
    t_pi: f64,
    t_end: f64,
) -> Result<f64> {
    if !(t_start <= t_pi && t_pi <= t_end) {
        return Err(SimError::precondition("echo window times must be ordered"));
    }
    let first = bottom_depth_integral(profile, cfg, t_start, t_pi);
    let second = bottom_depth_integral(profile, cfg, t_pi, t_end);
    Ok(qp.rate_per_kelvin(cfg.phys()) * (second - first))
}

/// Echo phase for a π pulse at the temporal midpoint of `profile`.
pub fn echo_phase_prediction(profile: &MotionProfile, cfg: &TrapConfig, qp: &QubitParams) -> f64 {
    let t = profile.duration();
    echo_phase_prediction_window(profile, cfg, qp, 0.0, 0.5 * t, t).unwrap_or(0.0)
}

/// Ramsey phase of a trap-bottom atom relative to the same sequence without
/// the hand-over: linear ramps count with their mean depth, so the two
/// ramps together weigh as one ramp duration at the full depth difference.
pub fn transfer_phase_prediction(ts: &TransferSchedule, cfg: &TrapConfig, qp: &QubitParams) -> f64 {
    qp.rate_per_kelvin(cfg.phys()) * (ts.depth2 - cfg.depth()) * (ts.hold_duration + ts.ramp_duration)
}

/// Dwell phase of an atom held at an off-axis point for `dwell` seconds,
/// compared with the same dwell on axis: η k_B U₀ β d² t/ħ.
pub fn dwell_asymmetry_phase(cfg: &TrapConfig, qp: &QubitParams, displacement: f64, dwell: f64) -> f64 {
    qp.rate_per_kelvin(cfg.phys()) * cfg.depth() * cfg.falloff() * displacement * displacement * dwell
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, AtomState, TrapDrive, DEFAULT_DT};
    use crate::motion::motion_profile_round_trip;
    use crate::trap::Vec3;
    use approx::assert_relative_eq;

    fn y() -> Vec3 {
        Vec3::new(0.0, 1.0, 0.0)
    }

    #[test]
    fn rate_values() {
        let qp = QubitParams::default();
        assert_relative_eq!(
            light_shift_phase_rate(&qp, 500e-6).unwrap(),
            4.582e4,
            max_relative = 1e-3
        );
        assert_eq!(light_shift_phase_rate(&qp, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            light_shift_phase_rate(&qp, 250e-6).unwrap(),
            2.291e4,
            max_relative = 1e-3
        );
        assert!(light_shift_phase_rate(&qp, -1e-6).is_err());
    }

    #[test]
    fn pinned_atom_accumulates_rate_times_time() {
        let cfg = TrapConfig::default();
        let drive = TrapDrive::stationary(cfg).with_gravity(false);
        let traj = integrate(
            &AtomState::at_rest(Vec3::zeros(), 0.0),
            &drive,
            150e-6,
            DEFAULT_DT,
            1e-6,
        )
        .unwrap();
        let qp = QubitParams::default();
        let phi = accumulate_phase(&traj, &cfg, &qp, 20e-6, 120e-6).unwrap();
        assert_relative_eq!(phi, 4.582, max_relative = 1e-3);
        assert_eq!(accumulate_phase(&traj, &cfg, &qp, 50e-6, 50e-6).unwrap(), 0.0);
        assert!(accumulate_phase(&traj, &cfg, &qp, 0.0, 200e-6).is_err());
    }

    #[test]
    fn symmetric_round_trip_halves_have_equal_phase() {
        let cfg = TrapConfig::default();
        let p = motion_profile_round_trip(16e-6, y(), 3e-3, 0.0, 0.0).unwrap();
        let drive = TrapDrive::new(cfg, p).with_gravity(false);
        let traj = integrate(&AtomState::at_rest(Vec3::zeros(), 0.0), &drive, 6e-3, 100e-9, 10e-6).unwrap();
        let qp = QubitParams::default();
        let a = accumulate_phase(&traj, &cfg, &qp, 0.0, 3e-3).unwrap();
        let b = accumulate_phase(&traj, &cfg, &qp, 3e-3, 6e-3).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn echo_prediction_examples() {
        let qp = QubitParams::default();
        let flat = TrapConfig::default().with_falloff(0.0).unwrap();
        let p = motion_profile_round_trip(16e-6, y(), 3e-3, 2e-3, 2e-3).unwrap();
        assert!(echo_phase_prediction(&p, &flat, &qp).abs() < 1e-12);
        let cfg = TrapConfig::default();
        let phi = echo_phase_prediction(&p, &cfg, &qp);
        assert_relative_eq!(phi, 2.749, max_relative = 1e-3);
        assert_relative_eq!(phi, dwell_asymmetry_phase(&cfg, &qp, 16e-6, 2e-3), max_relative = 1e-9);
        // halving the dwells halves the phase; the transits cancel
        let short = motion_profile_round_trip(16e-6, y(), 3e-3, 1e-3, 1e-3).unwrap();
        assert_relative_eq!(echo_phase_prediction(&short, &cfg, &qp), 0.5 * phi, max_relative = 1e-9);
    }

    #[test]
    fn quadrature_is_exact_for_minimum_jerk() {
        let cfg = TrapConfig::default();
        let p = motion_profile_round_trip(18e-6, y(), 3e-3, 0.0, 0.0).unwrap();
        let fine = {
            let n = 200_000;
            let h = 3e-3 / n as f64;
            (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) * h;
                    cfg.depth_at_center(&p.position(t)) * h
                })
                .sum::<f64>()
        };
        assert_relative_eq!(bottom_depth_integral(&p, &cfg, 0.0, 3e-3), fine, max_relative = 1e-10);
    }

    #[test]
    fn transfer_prediction_values() {
        let qp = QubitParams::default();
        let cfg = TrapConfig::default().with_depth(100e-6).unwrap();
        let ts = TransferSchedule::with_defaults(0.0, 200e-6).unwrap();
        assert_relative_eq!(transfer_phase_prediction(&ts, &cfg, &qp), 1.6496, max_relative = 1e-3);
        let same = TransferSchedule::with_defaults(0.0, 100e-6).unwrap();
        assert_eq!(transfer_phase_prediction(&same, &cfg, &qp), 0.0);
    }
}
