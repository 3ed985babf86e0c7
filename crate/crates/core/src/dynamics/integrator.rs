use std::io::Write;

use crate::error::{Result, SimError};
use crate::trap::{TrapConfig, Vec3};

use super::{AtomState, TrapDrive};

/// Default time step, s. About 1/600 of the radial period of the default trap.
pub const DEFAULT_DT: f64 = 20e-9;
/// Transverse excursion, in waists, beyond which the atom counts as lost.
pub const LOSS_RADIAL_WAISTS: f64 = 10.0;
/// Axial excursion, in Rayleigh ranges, beyond which the atom counts as lost.
pub const LOSS_AXIAL_RANGES: f64 = 10.0;

/// Largest admissible step for `cfg`: a twentieth of the radial period.
pub fn max_time_step(cfg: &TrapConfig) -> f64 {
    1.0 / (20.0 * cfg.trap_frequencies().radial_hz())
}

fn drive_time_step_limit(drive: &TrapDrive) -> Result<f64> {
    let deepest = match drive.transfer() {
        Some(t) => drive.config().depth().max(t.depth2),
        None => drive.config().depth(),
    };
    Ok(max_time_step(&drive.config().with_depth(deepest)?))
}

/// Velocity-Verlet stepper for one atom. Besides the phase-space point it
/// keeps the running time integral of the local light depth, which is what
/// the qubit phase is built from.
#[derive(Clone, Debug)]
pub struct Propagator<'a> {
    drive: &'a TrapDrive,
    dt: f64,
    state: AtomState,
    accel: Vec3,
    local_depth: f64,
    light_integral: f64,
    lost_at: Option<f64>,
    loss_rho2: f64,
    loss_z: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(drive: &'a TrapDrive, state: AtomState, dt: f64) -> Result<Self> {
        let limit = drive_time_step_limit(drive)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::precondition(format!("time step must be > 0, got {dt}")));
        }
        if dt > limit * (1.0 + 1e-12) {
            return Err(SimError::precondition(format!(
                "time step {dt:e} s exceeds 1/(20 f_r) = {limit:e} s"
            )));
        }
        if !state.is_finite() {
            return Err(SimError::precondition("initial state has non-finite components"));
        }
        let (accel, local_depth, center) = drive.evaluate(&state.position, state.time);
        let cfg = drive.config();
        let rho_max = LOSS_RADIAL_WAISTS * cfg.waist();
        let mut p = Propagator {
            loss_rho2: rho_max * rho_max,
            loss_z: LOSS_AXIAL_RANGES * cfg.rayleigh_range(),
            drive,
            dt,
            state,
            accel,
            local_depth,
            light_integral: 0.0,
            lost_at: None,
        };
        p.check_loss(&center);
        Ok(p)
    }

    pub fn state(&self) -> &AtomState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Light depth at the atom right now, K.
    pub fn local_depth(&self) -> f64 {
        self.local_depth
    }

    /// ∫ local depth dt since construction, K·s.
    pub fn light_integral(&self) -> f64 {
        self.light_integral
    }

    pub fn lost_at(&self) -> Option<f64> {
        self.lost_at
    }

    pub fn energy(&self) -> f64 {
        self.drive.energy(&self.state)
    }

    fn check_loss(&mut self, center: &Vec3) {
        let d = self.state.position - center;
        if d.x * d.x + d.y * d.y > self.loss_rho2 || d.z.abs() > self.loss_z {
            self.lost_at = Some(self.state.time);
        }
    }

    fn step(&mut self, h: f64) {
        let half = 0.5 * h;
        let v_half = self.state.velocity + self.accel * half;
        let r = self.state.position + v_half * h;
        let t = self.state.time + h;
        let (a, depth, center) = self.drive.evaluate(&r, t);
        self.light_integral += 0.5 * (self.local_depth + depth) * h;
        self.state = AtomState {
            position: r,
            velocity: v_half + a * half,
            time: t,
        };
        self.accel = a;
        self.local_depth = depth;
        self.check_loss(&center);
    }

    /// Integrate until `t_target`, landing on it exactly with a shortened last
    /// step. Stops early if the atom is lost. Returns `false` when lost.
    pub fn advance_to(&mut self, t_target: f64) -> bool {
        while self.lost_at.is_none() && self.state.time < t_target {
            let remaining = t_target - self.state.time;
            if remaining <= self.dt * (1.0 + 1e-9) {
                self.step(remaining);
                self.state.time = t_target;
            } else {
                self.step(self.dt);
            }
        }
        self.lost_at.is_none()
    }
}

/// Advance several independent propagators to `t_target` in lockstep.
/// Interleaving the atoms lets the processor overlap their dependency
/// chains; the result is identical to advancing each one separately.
pub fn advance_all(props: &mut [Propagator<'_>], t_target: f64) {
    loop {
        let mut busy = false;
        for p in props.iter_mut() {
            if p.lost_at.is_some() || p.state.time >= t_target {
                continue;
            }
            busy = true;
            let remaining = t_target - p.state.time;
            if remaining <= p.dt * (1.0 + 1e-9) {
                p.step(remaining);
                p.state.time = t_target;
            } else {
                p.step(p.dt);
            }
        }
        if !busy {
            break;
        }
    }
}

/// One stored point of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub state: AtomState,
    /// Light depth at the atom, K.
    pub local_depth: f64,
    /// Total energy, J.
    pub energy: f64,
}

/// Sampled output of [`integrate`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub lost_at: Option<f64>,
}

impl Trajectory {
    pub fn start_time(&self) -> Option<f64> {
        self.samples.first().map(|s| s.state.time)
    }

    pub fn end_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.state.time)
    }

    pub fn final_state(&self) -> Option<&AtomState> {
        self.samples.last().map(|s| &s.state)
    }

    /// Write the `t,x,y,z,vx,vy,vz,E` table in SI units.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| SimError::Csv(e.to_string());
        w.write_record(["t", "x", "y", "z", "vx", "vy", "vz", "E"])
            .map_err(csv_err)?;
        for s in &self.samples {
            let p = &s.state.position;
            let v = &s.state.velocity;
            let row = [s.state.time, p.x, p.y, p.z, v.x, v.y, v.z, s.energy];
            w.write_record(row.iter().map(|x| format!("{x:.9e}")))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| SimError::Csv(e.to_string()))
    }
}

/// Integrate `state` to `t_end`, recording a sample every `sample_interval`
/// seconds after the start plus one at the end (or at the loss time).
pub fn integrate(
    state: &AtomState,
    drive: &TrapDrive,
    t_end: f64,
    dt: f64,
    sample_interval: f64,
) -> Result<Trajectory> {
    if !(t_end > state.time) {
        return Err(SimError::precondition(format!(
            "end time {t_end:e} must lie after the start time {:e}",
            state.time
        )));
    }
    if !(sample_interval.is_finite() && sample_interval > 0.0) {
        return Err(SimError::precondition("sample interval must be > 0"));
    }
    let mut p = Propagator::new(drive, *state, dt)?;
    let record = |p: &Propagator| TrajectorySample {
        state: *p.state(),
        local_depth: p.local_depth(),
        energy: p.energy(),
    };
    let t0 = state.time;
    let mut traj = Trajectory::default();
    traj.samples.push(record(&p));
    let mut k = 1u64;
    loop {
        let target = (t0 + k as f64 * sample_interval).min(t_end);
        let alive = p.advance_to(target);
        traj.samples.push(record(&p));
        if !alive {
            traj.lost_at = p.lost_at();
            break;
        }
        if target >= t_end {
            break;
        }
        k += 1;
    }
    Ok(traj)
}
