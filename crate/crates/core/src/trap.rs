//! Gaussian-beam dipole trap: potential, forces and the quantities derived
//! from its harmonic expansion.
//!
//! Coordinates: `z` is the optical axis, `y` the transverse scan axis and `x`
//! the remaining transverse axis. Gravity points along `-x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::PhysConstants;
use crate::error::{Result, SimError};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Default trapping wavelength, m.
pub const DEFAULT_WAVELENGTH: f64 = 810e-9;
/// Default 1/e² intensity waist radius, m.
pub const DEFAULT_WAIST: f64 = 0.9e-6;
/// Default depth, K.
pub const DEFAULT_DEPTH: f64 = 500e-6;
/// 400 µW gives 500 µK.
pub const DEFAULT_POWER_TO_DEPTH: f64 = 1.25;
/// Depth drops by 3 % at 16 µm off axis.
pub const DEFAULT_FALLOFF: f64 = 0.03 / (16e-6 * 16e-6);

/// Static description of one tweezer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    wavelength: f64,
    waist: f64,
    depth: f64,
    power_to_depth: f64,
    falloff: f64,
    phys: PhysConstants,
}

/// Angular oscillation frequencies at the trap bottom, rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapFrequencies {
    pub radial: f64,
    pub axial: f64,
}

impl TrapFrequencies {
    pub fn radial_hz(&self) -> f64 {
        self.radial / (2.0 * PI)
    }

    pub fn axial_hz(&self) -> f64 {
        self.axial / (2.0 * PI)
    }
}

impl Default for TrapConfig {
    fn default() -> Self {
        TrapConfig {
            wavelength: DEFAULT_WAVELENGTH,
            waist: DEFAULT_WAIST,
            depth: DEFAULT_DEPTH,
            power_to_depth: DEFAULT_POWER_TO_DEPTH,
            falloff: DEFAULT_FALLOFF,
            phys: PhysConstants::RB87,
        }
    }
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SimError::validation(field, format!("must be finite and > 0, got {v}")))
    }
}

impl TrapConfig {
    /// A trap with the given geometry and depth (SI units, depth in K) and
    /// default calibration, falloff and constants.
    pub fn new(wavelength: f64, waist: f64, depth: f64) -> Result<Self> {
        check_positive("wavelength", wavelength)?;
        check_positive("waist", waist)?;
        check_positive("depth", depth)?;
        Ok(TrapConfig {
            wavelength,
            waist,
            depth,
            ..Default::default()
        })
    }

    pub fn with_depth(mut self, depth: f64) -> Result<Self> {
        check_positive("depth", depth)?;
        self.depth = depth;
        Ok(self)
    }

    /// Calibration constant in K/W.
    pub fn with_power_to_depth(mut self, k_per_watt: f64) -> Result<Self> {
        check_positive("power_to_depth", k_per_watt)?;
        self.power_to_depth = k_per_watt;
        Ok(self)
    }

    /// Fractional depth loss per squared off-axis displacement of the trap
    /// centre, m⁻².
    pub fn with_falloff(mut self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(SimError::validation(
                "falloff",
                format!("must be finite and >= 0, got {beta}"),
            ));
        }
        self.falloff = beta;
        Ok(self)
    }

    pub fn with_constants(mut self, phys: PhysConstants) -> Self {
        self.phys = phys;
        self
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    /// Trap depth U₀/k_B in K.
    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn power_to_depth(&self) -> f64 {
        self.power_to_depth
    }

    pub fn falloff(&self) -> f64 {
        self.falloff
    }

    pub fn phys(&self) -> &PhysConstants {
        &self.phys
    }

    pub fn mass(&self) -> f64 {
        self.phys.atom_mass
    }

    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist * self.waist / self.wavelength
    }

    /// Depth in K when the trap centre sits at `center`: U₀(1 − β d²), where
    /// d is the transverse distance of the centre from the optical axis,
    /// clamped at zero.
    pub fn depth_at_center(&self, center: &Vec3) -> f64 {
        let d2 = center.x * center.x + center.y * center.y;
        (self.depth * (1.0 - self.falloff * d2)).max(0.0)
    }

    /// Fraction of the peak intensity seen at offset `delta` from the focus.
    pub fn intensity_factor(&self, delta: &Vec3) -> f64 {
        let zr = self.rayleigh_range();
        let zeta = delta.z / zr;
        let lorentz = 1.0 / (1.0 + zeta * zeta);
        let rho2 = delta.x * delta.x + delta.y * delta.y;
        lorentz * (-2.0 * rho2 * lorentz / (self.waist * self.waist)).exp()
    }

    /// Potential energy in J of an atom at `r` in this trap, centred at
    /// `center`, with the configured depth.
    pub fn potential_energy(&self, r: &Vec3, center: &Vec3, include_gravity: bool) -> f64 {
        self.potential_with_depth(self.depth, r, center, include_gravity)
    }

    /// As [`potential_energy`](Self::potential_energy) with an explicit depth
    /// in K.
    pub fn potential_with_depth(&self, depth: f64, r: &Vec3, center: &Vec3, include_gravity: bool) -> f64 {
        let u = -self.phys.kb * depth * self.intensity_factor(&(r - center));
        if include_gravity {
            u + self.phys.atom_mass * self.phys.g * r.x
        } else {
            u
        }
    }

    /// Force in N and the local intensity factor at `r`, for a trap of the
    /// given depth centred at `center`. Gravity is added when requested.
    pub fn force_with_depth(&self, depth: f64, r: &Vec3, center: &Vec3, include_gravity: bool) -> (Vec3, f64) {
        let d = r - center;
        let w2 = self.waist * self.waist;
        let zr = self.rayleigh_range();
        let zeta = d.z / zr;
        let lorentz = 1.0 / (1.0 + zeta * zeta);
        let rho2 = d.x * d.x + d.y * d.y;
        let intensity = lorentz * (-2.0 * rho2 * lorentz / w2).exp();
        let u = -self.phys.kb * depth * intensity;
        // U = -k U0 L exp(-2 rho^2 L / w0^2); L' = -2 z L^2 / zR^2
        let radial = 4.0 * lorentz / w2;
        let dl_dz = -2.0 * d.z * lorentz * lorentz / (zr * zr);
        let fz = -(u / lorentz) * dl_dz * (1.0 - 2.0 * rho2 * lorentz / w2);
        let mut f = Vec3::new(u * radial * d.x, u * radial * d.y, fz);
        if include_gravity {
            f.x -= self.phys.atom_mass * self.phys.g;
        }
        (f, intensity)
    }

    /// Harmonic frequencies at the trap bottom from depth and waist.
    pub fn trap_frequencies(&self) -> TrapFrequencies {
        let ku = self.phys.kb * self.depth;
        let m = self.phys.atom_mass;
        let zr = self.rayleigh_range();
        TrapFrequencies {
            radial: (4.0 * ku / (m * self.waist * self.waist)).sqrt(),
            axial: (2.0 * ku / (m * zr * zr)).sqrt(),
        }
    }

    /// Radial ground-state extent σ = √(ħ/2mΩ).
    pub fn ground_state_extent(&self) -> f64 {
        ground_state_extent(self.trap_frequencies().radial, &self.phys)
    }

    /// Largest acceleration ħΩ/(mσ) compatible with adiabatic transport.
    pub fn adiabatic_accel_limit(&self) -> f64 {
        adiabatic_accel_limit(self.trap_frequencies().radial, &self.phys)
    }

    /// Radial vibrational quantum ħω_r/k_B in K.
    pub fn vibrational_quantum(&self) -> f64 {
        vibrational_quantum(self.trap_frequencies().radial, &self.phys)
    }
}

/// Ground-state extent of a harmonic oscillator of angular frequency `omega`.
pub fn ground_state_extent(omega: f64, phys: &PhysConstants) -> f64 {
    (phys.hbar / (2.0 * phys.atom_mass * omega)).sqrt()
}

/// ħΩ/(mσ) for an oscillator of angular frequency `omega`.
pub fn adiabatic_accel_limit(omega: f64, phys: &PhysConstants) -> f64 {
    let sigma = ground_state_extent(omega, phys);
    phys.hbar * omega / (phys.atom_mass * sigma)
}

/// ħω/k_B in K.
pub fn vibrational_quantum(omega: f64, phys: &PhysConstants) -> f64 {
    phys.hbar * omega / phys.kb
}

/// Trap depth in K produced by `power` W through the linear calibration of
/// `cfg`.
pub fn depth_from_power(power: f64, cfg: &TrapConfig) -> Result<f64> {
    if !power.is_finite() || power < 0.0 {
        return Err(SimError::domain(format!("power must be >= 0, got {power}")));
    }
    Ok(cfg.power_to_depth * power)
}
