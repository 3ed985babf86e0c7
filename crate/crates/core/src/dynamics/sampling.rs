//! Thermal initial conditions.
//!
//! The energy above the trap bottom follows the three-dimensional harmonic
//! thermal law, density ∝ E² exp(−E/k_BT), restricted to bound energies
//! E < U₀. Given the energy, the phase-space point is uniform on that energy
//! shell of the full Gaussian potential: the position density is ∝ √(E − V)
//! and the velocity direction is isotropic. The result is stationary under
//! the exact dynamics and reduces to the Maxwell–Boltzmann harmonic ensemble
//! when k_BT ≪ U₀.

use std::f64::consts::E as EULER;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SimError};
use crate::rng::{par_map, substream, Domain};
use crate::trap::{TrapConfig, Vec3};

use super::AtomState;

/// Draws atoms at rest time 0 around a trap centred at the origin.
#[derive(Clone, Copy, Debug)]
pub struct ThermalSampler {
    cfg: TrapConfig,
    temperature: f64,
}

impl ThermalSampler {
    pub fn new(temperature: f64, cfg: &TrapConfig) -> Result<Self> {
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(SimError::domain(format!("temperature must be >= 0, got {temperature}")));
        }
        if temperature >= cfg.depth() {
            return Err(SimError::domain(format!(
                "temperature {temperature:e} K is not below the trap depth {:e} K",
                cfg.depth()
            )));
        }
        Ok(ThermalSampler { cfg: *cfg, temperature })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Energy above the trap bottom in K, Gamma(3, T) truncated below U₀.
    fn draw_energy<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = 1.0 - rng.gen::<f64>() * rng.gen::<f64>() * rng.gen::<f64>();
            // 1 - u in (0, 1]; written this way to keep ln finite
            let e = -self.temperature * (1.0 - u).ln();
            if e < self.cfg.depth() {
                return e;
            }
        }
    }

    /// Position at energy `e` (K) above the bottom, density ∝ √(e − V).
    /// Returns the position and V in K.
    fn draw_position<R: Rng + ?Sized>(&self, e: f64, rng: &mut R) -> (Vec3, f64) {
        let u0 = self.cfg.depth();
        let w = self.cfg.waist();
        let zr = self.cfg.rayleigh_range();
        let frac = e / u0;
        let one_minus = 1.0 - frac;
        // bounding box of the classically allowed region in the scaled
        // variables ζ = z/zR and s = 2ρ²/w²
        let zeta_max = (frac / one_minus).sqrt();
        let s_branch = 1.0 / (EULER * one_minus);
        let s_max = if s_branch >= 1.0 { s_branch } else { -(-frac).ln_1p() };
        let half = w * (0.5 * s_max).sqrt();
        loop {
            let x = half * (2.0 * rng.gen::<f64>() - 1.0);
            let y = half * (2.0 * rng.gen::<f64>() - 1.0);
            let zeta = zeta_max * (2.0 * rng.gen::<f64>() - 1.0);
            let lorentz = 1.0 / (1.0 + zeta * zeta);
            let s = 2.0 * (x * x + y * y) / (w * w);
            let v = -u0 * (-(zeta * zeta).ln_1p() - s * lorentz).exp_m1();
            if v >= e {
                continue;
            }
            let accept: f64 = rng.gen();
            if accept * accept * e < e - v {
                return (Vec3::new(x, y, zeta * zr), v);
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AtomState {
        if self.temperature == 0.0 {
            return AtomState::at_rest(Vec3::zeros(), 0.0);
        }
        let e = self.draw_energy(rng);
        let (position, v) = self.draw_position(e, rng);
        let speed = (2.0 * self.cfg.phys().kb * (e - v) / self.cfg.mass()).sqrt();
        let dir = loop {
            let d = Vec3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            let n = d.norm();
            if n > 1e-12 {
                break d / n;
            }
        };
        AtomState {
            position,
            velocity: dir * speed,
            time: 0.0,
        }
    }
}

/// One thermal atom drawn from substream `stream_id` of `seed`.
pub fn sample_thermal_state(temperature: f64, cfg: &TrapConfig, seed: u64, stream_id: u64) -> Result<AtomState> {
    let sampler = ThermalSampler::new(temperature, cfg)?;
    Ok(sampler.sample(&mut substream(seed, Domain::Ensemble, stream_id)))
}

/// Atoms sharing one time stamp.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    states: Vec<AtomState>,
    source_temperature: f64,
    seed: u64,
}

impl Ensemble {
    pub fn new(states: Vec<AtomState>, source_temperature: f64, seed: u64) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| SimError::domain("an ensemble needs at least one atom"))?;
        if states.iter().any(|s| s.time != first.time) {
            return Err(SimError::precondition("ensemble members must share one time stamp"));
        }
        Ok(Ensemble {
            states,
            source_temperature,
            seed,
        })
    }

    pub fn states(&self) -> &[AtomState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn source_temperature(&self) -> f64 {
        self.source_temperature
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time(&self) -> f64 {
        self.states[0].time
    }

    /// Same provenance, new states.
    pub fn with_states(&self, states: Vec<AtomState>) -> Result<Self> {
        Ensemble::new(states, self.source_temperature, self.seed)
    }
}

/// `n` thermal atoms; atom `i` uses substream `i`.
pub fn sample_ensemble(temperature: f64, cfg: &TrapConfig, n: usize, seed: u64) -> Result<Ensemble> {
    let sampler = ThermalSampler::new(temperature, cfg)?;
    let states = par_map(n, |i| sampler.sample(&mut substream(seed, Domain::Ensemble, i as u64)));
    Ensemble::new(states, temperature, seed)
}

/// Regularised lower incomplete gamma P(n, a) for a positive integer `n`.
fn gamma_p_int(n: u32, a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    if a < 30.0 {
        // a^n e^{-a}/n! · Σ a^j / ((n+1)…(n+j))
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 1.0;
        while term > 1e-17 * sum {
            term *= a / (n as f64 + j);
            sum += term;
            j += 1.0;
        }
        let log_pref = n as f64 * a.ln() - a - (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
        (log_pref.exp() * sum).min(1.0)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..n {
            term *= a / k as f64;
            sum += term;
        }
        1.0 - (-a).exp() * sum
    }
}

/// Mean energy above the bottom, K, of the sampler at `temperature` in a
/// trap of depth `depth`: 3T·P(4, U₀/T)/P(3, U₀/T).
pub fn mean_excitation_for_temperature(temperature: f64, depth: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let a = depth / temperature;
    3.0 * temperature * gamma_p_int(4, a) / gamma_p_int(3, a)
}

/// Temperature estimate from the mean energy above the trap bottom, for an
/// ensemble in a trap centred at the origin (gravity excluded). The
/// harmonic equipartition relation ⟨E⟩ = 3k_BT is corrected for the
/// restriction to bound energies, so the estimator is exact for
/// [`ThermalSampler`] ensembles at any T below the depth.
pub fn ensemble_temperature(ensemble: &Ensemble, cfg: &TrapConfig) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(SimError::domain("empty ensemble"));
    }
    let kb = cfg.phys().kb;
    let m = cfg.mass();
    let origin = Vec3::zeros();
    let mut sum = 0.0;
    for s in ensemble.states() {
        let e = 0.5 * m * s.velocity.norm_squared() + cfg.potential_energy(&s.position, &origin, false);
        if e >= 0.0 {
            return Err(SimError::domain("ensemble contains an unbound atom"));
        }
        sum += e / kb + cfg.depth();
    }
    let mean = sum / ensemble.len() as f64;
    temperature_from_mean_excitation(mean, cfg.depth())
}

fn temperature_from_mean_excitation(mean: f64, depth: f64) -> Result<f64> {
    if mean <= 0.0 {
        return Ok(0.0);
    }
    if mean >= 0.75 * depth {
        return Err(SimError::domain(format!(
            "mean excitation {mean:e} K is too close to the depth for a thermal estimate"
        )));
    }
    // mean_excitation is increasing in T; bisect in log T
    let (mut lo, mut hi) = ((mean / 3.0).ln() - 1.0, (mean / 3.0).ln());
    while mean_excitation_for_temperature(hi.exp(), depth) < mean {
        hi += 1.0;
        if hi > (depth * 1e12).ln() {
            return Err(SimError::domain("temperature inversion did not bracket"));
        }
    }
    while mean_excitation_for_temperature(lo.exp(), depth) > mean {
        lo -= 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_excitation_for_temperature(mid.exp(), depth) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
