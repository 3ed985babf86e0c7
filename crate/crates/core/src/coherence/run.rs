use nalgebra::{Matrix3, Vector3};

use crate::dynamics::{Ensemble, Propagator, TrapDrive, DEFAULT_DT};
use crate::error::{Result, SimError};
use crate::rng::par_map;
use crate::trap::TrapConfig;

use super::fringe::{fringe_projector, FringeFit, FringeRecord};
use super::sequence::{PulseKind, PulseSequence};
use super::QubitParams;

/// Numerical and statistical settings of [`run_sequence_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceOptions {
    pub dt: f64,
    pub gravity: bool,
    /// Experimental shots assumed when attaching projection noise to the
    /// populations, spread evenly over the analysis phases. Defaults to the
    /// ensemble size.
    pub projection_shots: Option<u64>,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions {
            dt: DEFAULT_DT,
            gravity: true,
            projection_shots: None,
        }
    }
}

/// Net phase of one atom, `None` if it was lost.
pub type AtomPhases = Vec<Option<f64>>;

/// Everything [`run_sequence_with`] produces.
#[derive(Clone, Debug)]
pub struct SequenceOutcome {
    pub record: FringeRecord,
    pub fit: FringeFit,
    pub atom_phases: AtomPhases,
    pub lost: usize,
    /// Irreversible contrast factor applied to every atom.
    pub contrast_factor: f64,
}

fn net_phase(
    seq: &PulseSequence,
    drive: &TrapDrive,
    qp: &QubitParams,
    state: crate::dynamics::AtomState,
    dt: f64,
) -> Result<Option<f64>> {
    let rate = qp.rate_per_kelvin(drive.config().phys());
    let mut p = Propagator::new(drive, state, dt)?;
    if !p.advance_to(seq.start()) {
        return Ok(None);
    }
    let mut last = p.light_integral();
    let mut phi = 0.0;
    for e in &seq.events()[1..] {
        if !p.advance_to(e.time) {
            return Ok(None);
        }
        phi += rate * (p.light_integral() - last);
        last = p.light_integral();
        if matches!(e.kind, PulseKind::Pi) {
            phi = -phi;
        }
    }
    Ok(Some(phi))
}

/// Simulate `seq` for every atom of `ensemble` and fit the averaged fringe.
///
/// Each atom contributes ½(1 + C cos(φ − θ)) at analysis phase θ, where φ is
/// its net light-shift phase (an echo pulse flips the sign of everything
/// accumulated before it) and C the irreversible contrast factor. Lost atoms
/// are dropped. The fit uncertainty adds three parts: the residual scatter,
/// the sampling spread of the finite ensemble, and binomial projection
/// noise for the assumed number of experimental shots.
pub fn run_sequence_with(
    seq: &PulseSequence,
    ensemble: &Ensemble,
    cfg: &TrapConfig,
    qp: &QubitParams,
    opts: &SequenceOptions,
) -> Result<SequenceOutcome> {
    seq.validate()?;
    qp.validate()?;
    if ensemble.time() > seq.start() {
        return Err(SimError::precondition("ensemble time lies after the first pulse"));
    }
    let mut drive = TrapDrive::new(*cfg, seq.motion().clone()).with_gravity(opts.gravity);
    if let Some(t) = seq.transfer() {
        drive = drive.with_transfer(*t);
    }
    let phases = par_map(ensemble.len(), |i| {
        net_phase(seq, &drive, qp, ensemble.states()[i], opts.dt)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let alive: Vec<f64> = phases.iter().flatten().copied().collect();
    if alive.is_empty() {
        return Err(SimError::domain("every atom was lost during the sequence"));
    }
    let n = alive.len() as f64;
    let c = qp.contrast(seq.end() - seq.start());
    let thetas = seq.analysis_phases().to_vec();
    let (cos_m, sin_m) = alive
        .iter()
        .fold((0.0, 0.0), |(a, b), &p| (a + p.cos() / n, b + p.sin() / n));
    // ⟨cos(φ − θ)⟩ = ⟨cos φ⟩ cos θ + ⟨sin φ⟩ sin θ
    let pops: Vec<f64> = thetas
        .iter()
        .map(|&t| 0.5 * (1.0 + c * (cos_m * t.cos() + sin_m * t.sin())))
        .collect();
    let (proj, inv) = fringe_projector(&thetas)?;
    let params = proj
        .iter()
        .zip(&pops)
        .fold(Vector3::zeros(), |acc, (p, &y)| acc + p * y);
    let k = thetas.len();
    let rss: f64 = thetas
        .iter()
        .zip(&pops)
        .map(|(&t, &y)| {
            let r = y - (params[0] * t.cos() + params[1] * t.sin() + params[2]);
            r * r
        })
        .sum();
    let residual = inv * if k > 3 { rss / (k - 3) as f64 } else { 0.0 };

    let u: Vector3<f64> = proj
        .iter()
        .zip(&thetas)
        .fold(Vector3::zeros(), |a, (p, &t)| a + p * (0.5 * c * t.cos()));
    let v: Vector3<f64> = proj
        .iter()
        .zip(&thetas)
        .fold(Vector3::zeros(), |a, (p, &t)| a + p * (0.5 * c * t.sin()));
    let sampling = if alive.len() > 1 {
        let (mut scc, mut scs, mut sss) = (0.0, 0.0, 0.0);
        for &p in &alive {
            let (dc, ds) = (p.cos() - cos_m, p.sin() - sin_m);
            scc += dc * dc;
            scs += dc * ds;
            sss += ds * ds;
        }
        let norm = (n - 1.0) * n;
        (u * u.transpose() * scc + (u * v.transpose() + v * u.transpose()) * scs + v * v.transpose() * sss) / norm
    } else {
        Matrix3::zeros()
    };

    let shots = opts.projection_shots.unwrap_or(ensemble.len() as u64).max(1) as f64;
    let per_phase = (shots / k as f64).max(1.0);
    let projection = proj.iter().zip(&pops).fold(Matrix3::zeros(), |m, (p, &y)| {
        m + p * p.transpose() * (y * (1.0 - y) / per_phase)
    });

    let fit = FringeFit::from_linear(params, residual + sampling + projection);
    Ok(SequenceOutcome {
        record: FringeRecord::from_fit(thetas, pops, &fit),
        fit,
        lost: phases.len() - alive.len(),
        atom_phases: phases,
        contrast_factor: c,
    })
}

/// [`run_sequence_with`] under default options, returning the fringe record.
pub fn run_sequence(
    seq: &PulseSequence,
    ensemble: &Ensemble,
    cfg: &TrapConfig,
    qp: &QubitParams,
) -> Result<FringeRecord> {
    Ok(run_sequence_with(seq, ensemble, cfg, qp, &SequenceOptions::default())?.record)
}

/// Ramsey fringe contrast in a static trap after each of `delays`, from one
/// pass per atom. For analysis phases spread evenly over the circle the
/// fitted contrast equals C·|⟨exp(iφ)⟩|, which is what is returned.
pub fn ramsey_contrast_curve(
    ensemble: &Ensemble,
    cfg: &TrapConfig,
    qp: &QubitParams,
    delays: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    if delays
        .iter()
        .enumerate()
        .any(|(i, &d)| !(d >= 0.0) || (i > 0 && d <= delays[i - 1]))
    {
        return Err(SimError::precondition("delays must be >= 0 and strictly increasing"));
    }
    let drive = TrapDrive::stationary(*cfg);
    let rate = qp.rate_per_kelvin(cfg.phys());
    let t0 = ensemble.time();
    let per_atom = par_map(ensemble.len(), |i| -> Result<Option<Vec<f64>>> {
        let mut p = Propagator::new(&drive, ensemble.states()[i], dt)?;
        let mut out = Vec::with_capacity(delays.len());
        for &d in delays {
            if !p.advance_to(t0 + d) {
                return Ok(None);
            }
            out.push(rate * p.light_integral());
        }
        Ok(Some(out))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let alive: Vec<&Vec<f64>> = per_atom.iter().flatten().collect();
    if alive.is_empty() {
        return Err(SimError::domain("every atom was lost"));
    }
    let n = alive.len() as f64;
    Ok(delays
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let (c, s) = alive
                .iter()
                .fold((0.0, 0.0), |(c, s), ph| (c + ph[k].cos(), s + ph[k].sin()));
            qp.contrast(d) * (c / n).hypot(s / n)
        })
        .collect())
}
