//! Physical constants for a single ⁸⁷Rb atom.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Mass of ⁸⁷Rb, kg.
pub const RB87_MASS: f64 = 1.443_16e-25;
/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;
/// ⁸⁷Rb ground-state hyperfine splitting, rad/s.
pub const RB87_HYPERFINE: f64 = 2.0 * PI * 6.834_7e9;

/// The constants every physics routine needs, bundled so an alternative
/// species can be swapped in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysConstants {
    pub atom_mass: f64,
    pub kb: f64,
    pub hbar: f64,
    pub g: f64,
    pub omega_hf: f64,
}

impl PhysConstants {
    pub const RB87: PhysConstants = PhysConstants {
        atom_mass: RB87_MASS,
        kb: BOLTZMANN,
        hbar: HBAR,
        g: GRAVITY,
        omega_hf: RB87_HYPERFINE,
    };

    pub fn new(atom_mass: f64, kb: f64, hbar: f64, g: f64, omega_hf: f64) -> Result<Self> {
        let values = [
            ("atom_mass", atom_mass),
            ("kb", kb),
            ("hbar", hbar),
            ("g", g),
            ("omega_hf", omega_hf),
        ];
        for (name, v) in values {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::validation(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(PhysConstants {
            atom_mass,
            kb,
            hbar,
            g,
            omega_hf,
        })
    }
}

impl Default for PhysConstants {
    fn default() -> Self {
        Self::RB87
    }
}
