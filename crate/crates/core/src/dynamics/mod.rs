//! Classical motion of a single atom in a tweezer whose centre and depth may
//! change in time, plus thermal sampling of initial conditions.

mod integrator;
mod sampling;

pub use integrator::{
    advance_all, integrate, max_time_step, Propagator, Trajectory, TrajectorySample, DEFAULT_DT, LOSS_AXIAL_RANGES,
    LOSS_RADIAL_WAISTS,
};
pub use sampling::{
    ensemble_temperature, mean_excitation_for_temperature, sample_ensemble, sample_thermal_state, Ensemble,
    ThermalSampler,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::motion::MotionProfile;
use crate::trap::{TrapConfig, Vec3};

/// Classical point particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub time: f64,
}

impl AtomState {
    pub fn at_rest(position: Vec3, time: f64) -> Self {
        AtomState {
            position,
            velocity: Vec3::zeros(),
            time,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|c| c.is_finite()) && self.time.is_finite()
    }
}

/// Hand-over to a second, co-located tweezer and back: a linear ramp from the
/// first depth to `depth2`, a hold, and a linear ramp back.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSchedule {
    /// Time at which the first ramp begins, s.
    pub start: f64,
    pub ramp_duration: f64,
    pub hold_duration: f64,
    /// Depth of the second tweezer, K.
    pub depth2: f64,
}

impl TransferSchedule {
    pub const DEFAULT_RAMP: f64 = 20e-6;
    pub const DEFAULT_HOLD: f64 = 160e-6;

    pub fn new(start: f64, ramp_duration: f64, hold_duration: f64, depth2: f64) -> Result<Self> {
        let s = TransferSchedule {
            start,
            ramp_duration,
            hold_duration,
            depth2,
        };
        s.validate()?;
        Ok(s)
    }

    /// Default ramp and hold durations starting at `start`.
    pub fn with_defaults(start: f64, depth2: f64) -> Result<Self> {
        Self::new(start, Self::DEFAULT_RAMP, Self::DEFAULT_HOLD, depth2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.start >= 0.0) {
            return Err(SimError::precondition("transfer start must be >= 0"));
        }
        for (name, v) in [
            ("ramp_duration", self.ramp_duration),
            ("hold_duration", self.hold_duration),
            ("depth2", self.depth2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::precondition(format!("transfer {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Time at which the atom is back in the first tweezer.
    pub fn end(&self) -> f64 {
        self.start + 2.0 * self.ramp_duration + self.hold_duration
    }

    /// Depth seen by the atom at time `t`, given the first tweezer's depth.
    pub fn depth_at(&self, depth1: f64, t: f64) -> f64 {
        let t = t - self.start;
        let r = self.ramp_duration;
        let h = self.hold_duration;
        if t <= 0.0 || t >= 2.0 * r + h {
            depth1
        } else if t < r {
            depth1 + (self.depth2 - depth1) * (t / r)
        } else if t <= r + h {
            self.depth2
        } else {
            self.depth2 + (depth1 - self.depth2) * ((t - r - h) / r)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Coefficients {
    inv_w2: f64,
    inv_zr2: f64,
    kb_over_m: f64,
    g: f64,
}

/// Everything that determines the force on the atom at a given time.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapDrive {
    cfg: TrapConfig,
    coeffs: Coefficients,
    profile: MotionProfile,
    transfer: Option<TransferSchedule>,
    gravity: bool,
}

impl TrapDrive {
    /// Trap following `profile`, gravity on, no transfer.
    pub fn new(cfg: TrapConfig, profile: MotionProfile) -> Self {
        let zr = cfg.rayleigh_range();
        TrapDrive {
            coeffs: Coefficients {
                inv_w2: 1.0 / (cfg.waist() * cfg.waist()),
                inv_zr2: 1.0 / (zr * zr),
                kb_over_m: cfg.phys().kb / cfg.mass(),
                g: cfg.phys().g,
            },
            cfg,
            profile,
            transfer: None,
            gravity: true,
        }
    }

    /// Trap fixed at the origin.
    pub fn stationary(cfg: TrapConfig) -> Self {
        Self::new(cfg, MotionProfile::stationary(Vec3::zeros()))
    }

    pub fn with_transfer(mut self, transfer: TransferSchedule) -> Self {
        self.transfer = Some(transfer);
        self
    }

    pub fn with_gravity(mut self, gravity: bool) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn config(&self) -> &TrapConfig {
        &self.cfg
    }

    pub fn profile(&self) -> &MotionProfile {
        &self.profile
    }

    pub fn transfer(&self) -> Option<&TransferSchedule> {
        self.transfer.as_ref()
    }

    pub fn gravity(&self) -> bool {
        self.gravity
    }

    pub fn center(&self, t: f64) -> Vec3 {
        self.profile.position(t)
    }

    /// Depth of the trap bottom at time `t`, K, including off-axis falloff.
    pub fn depth(&self, t: f64) -> f64 {
        self.depth_with_center(t, &self.center(t))
    }

    fn depth_with_center(&self, t: f64, center: &Vec3) -> f64 {
        let nominal = match &self.transfer {
            Some(tr) => tr.depth_at(self.cfg.depth(), t),
            None => self.cfg.depth(),
        };
        let d2 = center.x * center.x + center.y * center.y;
        (nominal * (1.0 - self.cfg.falloff() * d2)).max(0.0)
    }

    /// Acceleration and local light depth (K) at position `r`, time `t`.
    pub fn acceleration(&self, r: &Vec3, t: f64) -> (Vec3, f64) {
        let (a, depth, _) = self.evaluate(r, t);
        (a, depth)
    }

    /// Acceleration, local light depth and trap centre in one pass. Same
    /// physics as [`TrapConfig::force_with_depth`], arranged for the inner
    /// loop with a single division.
    pub(crate) fn evaluate(&self, r: &Vec3, t: f64) -> (Vec3, f64, Vec3) {
        let c = self.center(t);
        let depth = self.depth_with_center(t, &c);
        let k = &self.coeffs;
        let d = r - c;
        let lorentz = 1.0 / (1.0 + d.z * d.z * k.inv_zr2);
        let q = 2.0 * (d.x * d.x + d.y * d.y) * lorentz * k.inv_w2;
        let intensity = lorentz * (-q).exp();
        let scale = k.kb_over_m * depth * intensity;
        let radial = -4.0 * scale * lorentz * k.inv_w2;
        let mut a = Vec3::new(
            radial * d.x,
            radial * d.y,
            -2.0 * scale * lorentz * k.inv_zr2 * (1.0 - q) * d.z,
        );
        if self.gravity {
            a.x -= k.g;
        }
        (a, depth * intensity, c)
    }

    /// Light depth |U_trap|/k_B at the atom, gravity excluded, K.
    pub fn local_depth(&self, r: &Vec3, t: f64) -> f64 {
        let c = self.center(t);
        self.depth_with_center(t, &c) * self.cfg.intensity_factor(&(r - c))
    }

    /// Potential energy, J.
    pub fn potential(&self, r: &Vec3, t: f64) -> f64 {
        let c = self.center(t);
        self.cfg
            .potential_with_depth(self.depth_with_center(t, &c), r, &c, self.gravity)
    }

    /// Kinetic plus potential energy, J.
    pub fn energy(&self, s: &AtomState) -> f64 {
        0.5 * self.cfg.mass() * s.velocity.norm_squared() + self.potential(&s.position, s.time)
    }
}
