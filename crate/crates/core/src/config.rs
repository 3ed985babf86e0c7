//! Run configuration: JSON document with unit-suffixed keys, validated on
//! load. SI units are used everywhere past this module.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::coherence::QubitParams;
use crate::constants::PhysConstants;
use crate::error::{Result, SimError};
use crate::thermometry::{log_spaced_off_times, FitOptions, SigmaRule, Weighting};
use crate::trap::{TrapConfig, DEFAULT_POWER_TO_DEPTH};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct TrapSection {
    pub wavelength_nm: f64,
    pub waist_um: f64,
    pub depth_uK: f64,
    /// Calibration in µK per µW (numerically equal to K/W).
    pub power_to_depth_uK_per_uW: f64,
    /// Fractional depth loss at `falloff_reference_um` off axis; the loss
    /// grows quadratically with displacement.
    pub falloff_fraction: f64,
    pub falloff_reference_um: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        TrapSection {
            wavelength_nm: 810.0,
            waist_um: 0.9,
            depth_uK: 500.0,
            power_to_depth_uK_per_uW: DEFAULT_POWER_TO_DEPTH,
            falloff_fraction: 0.03,
            falloff_reference_um: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitSection {
    pub eta: f64,
    pub t2_ms: f64,
    pub extra_contrast: f64,
}

impl Default for QubitSection {
    fn default() -> Self {
        QubitSection {
            eta: 7e-4,
            t2_ms: 34.0,
            extra_contrast: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct ThermometrySection {
    pub temperature_uK: f64,
    pub shots_per_point: u64,
    pub model_shots: u64,
    pub off_time_count: usize,
    pub off_time_min_us: f64,
    pub off_time_max_us: f64,
    pub grid_min_uK: f64,
    pub grid_max_uK: f64,
    pub grid_step_uK: f64,
    pub repetitions: usize,
    pub weighting: Weighting,
    pub sigma_rule: SigmaRule,
    /// Optional measured curve (`t_off_us,probability,shots`) to fit.
    pub data_csv: Option<PathBuf>,
}

impl Default for ThermometrySection {
    fn default() -> Self {
        ThermometrySection {
            temperature_uK: 56.0,
            shots_per_point: 100,
            model_shots: 100_000,
            off_time_count: 15,
            off_time_min_us: 1.0,
            off_time_max_us: 30.0,
            grid_min_uK: 30.0,
            grid_max_uK: 100.0,
            grid_step_uK: 2.5,
            repetitions: 20,
            weighting: Weighting::Unweighted,
            sigma_rule: SigmaRule::Propagated,
            data_csv: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct TransportSection {
    pub temperature_uK: f64,
    pub round_trips: usize,
    pub distance_um: f64,
    pub round_trip_ms: f64,
    pub axis: [f64; 3],
    pub dt_ns: f64,
    pub max_change_uK: f64,
}

impl Default for TransportSection {
    fn default() -> Self {
        TransportSection {
            temperature_uK: 56.0,
            round_trips: 20,
            distance_um: 18.0,
            round_trip_ms: 6.0,
            axis: [0.0, 1.0, 0.0],
            dt_ns: 600.0,
            max_change_uK: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct EchoSection {
    pub temperature_uK: f64,
    pub atoms: u64,
    pub displacements_um: Vec<f64>,
    pub total_ms: f64,
    pub pi_ms: f64,
    pub move_ms: f64,
    pub analysis_phases: usize,
    pub dt_ns: f64,
    pub phase_tolerance_rad: f64,
    pub ramsey_max_us: f64,
    pub ramsey_step_us: f64,
}

impl Default for EchoSection {
    fn default() -> Self {
        EchoSection {
            temperature_uK: 56.0,
            atoms: 2000,
            displacements_um: vec![0.0, 4.0, 8.0, 12.0, 16.0],
            total_ms: 6.0,
            pi_ms: 3.0,
            move_ms: 1.0,
            analysis_phases: 16,
            dt_ns: 200.0,
            phase_tolerance_rad: 1e-2,
            ramsey_max_us: 1500.0,
            ramsey_step_us: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct TransferSection {
    pub temperature_uK: f64,
    pub depths2_uK: Vec<f64>,
    pub start_us: f64,
    pub ramp_us: f64,
    pub hold_us: f64,
    pub ramsey_us: f64,
    pub analysis_phases: usize,
    pub dt_ns: f64,
    /// Second-trap depth used for the double-transfer thermometry.
    pub thermometry_depth2_uK: f64,
}

impl Default for TransferSection {
    fn default() -> Self {
        TransferSection {
            temperature_uK: 56.0,
            depths2_uK: vec![200.0, 300.0, 400.0, 500.0, 600.0],
            start_us: 10.0,
            ramp_us: 20.0,
            hold_us: 160.0,
            ramsey_us: 220.0,
            analysis_phases: 16,
            dt_ns: 100.0,
            thermometry_depth2_uK: 300.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdiabaticitySection {
    pub distance_um: f64,
    pub move_ms: f64,
    pub axis: [f64; 3],
}

impl Default for AdiabaticitySection {
    fn default() -> Self {
        AdiabaticitySection {
            distance_um: 18.0,
            move_ms: 3.0,
            axis: [0.0, 1.0, 0.0],
        }
    }
}

/// Complete, validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub trap: TrapSection,
    pub qubit: QubitSection,
    pub seed: u64,
    pub shots: u64,
    pub output_dir: PathBuf,
    pub thermometry: ThermometrySection,
    pub transport: TransportSection,
    pub echo: EchoSection,
    pub transfer: TransferSection,
    pub adiabaticity: AdiabaticitySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trap: TrapSection::default(),
            qubit: QubitSection::default(),
            seed: 1,
            shots: 10_000,
            output_dir: PathBuf::from("out"),
            thermometry: ThermometrySection::default(),
            transport: TransportSection::default(),
            echo: EchoSection::default(),
            transfer: TransferSection::default(),
            adiabaticity: AdiabaticitySection::default(),
        }
    }
}

fn range(field: &str, v: f64, lo: f64, hi: f64, lo_open: bool) -> Result<()> {
    let ok = v.is_finite() && (if lo_open { v > lo } else { v >= lo }) && v <= hi;
    if ok {
        Ok(())
    } else {
        let open = if lo_open { "(" } else { "[" };
        Err(SimError::validation(field, format!("{v} outside {open}{lo}, {hi}]")))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    range(field, v, 0.0, f64::MAX, true)
}

fn axis_ok(field: &str, a: &[f64; 3]) -> Result<()> {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if n.is_finite() && n > 0.0 {
        Ok(())
    } else {
        Err(SimError::validation(field, "must be a non-zero vector"))
    }
}

/// Scale by a power of ten through the shortest decimal representation, so
/// `0.9` µm becomes exactly the double nearest 0.9e-6.
pub fn scale(x: f64, exp: i32) -> f64 {
    format!("{x:e}")
        .split_once('e')
        .and_then(|(m, e)| format!("{m}e{}", e.parse::<i32>().ok()? + exp).parse().ok())
        .unwrap_or(x * 10f64.powi(exp))
}

pub fn micro(x: f64) -> f64 {
    scale(x, -6)
}

pub fn milli(x: f64) -> f64 {
    scale(x, -3)
}

pub fn nano(x: f64) -> f64 {
    scale(x, -9)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.trap;
        range("trap.depth_uK", t.depth_uK, 0.0, 10_000.0, true)?;
        range("trap.waist_um", t.waist_um, 0.3, 5.0, false)?;
        range("trap.wavelength_nm", t.wavelength_nm, 0.0, 1e5, true)?;
        positive("trap.power_to_depth_uK_per_uW", t.power_to_depth_uK_per_uW)?;
        range("trap.falloff_fraction", t.falloff_fraction, 0.0, 0.5, false)?;
        positive("trap.falloff_reference_um", t.falloff_reference_um)?;
        let q = &self.qubit;
        range("qubit.eta", q.eta, 0.0, 1e-2, true)?;
        positive("qubit.t2_ms", q.t2_ms)?;
        range("qubit.extra_contrast", q.extra_contrast, 0.0, 1.0, true)?;
        if self.shots == 0 {
            return Err(SimError::validation("shots", "must be >= 1"));
        }
        let depth = t.depth_uK;

        let th = &self.thermometry;
        range("thermometry.temperature_uK", th.temperature_uK, 0.0, depth, true)?;
        if th.shots_per_point == 0 {
            return Err(SimError::validation("thermometry.shots_per_point", "must be >= 1"));
        }
        if th.model_shots == 0 {
            return Err(SimError::validation("thermometry.model_shots", "must be >= 1"));
        }
        if th.off_time_count < 2 {
            return Err(SimError::validation("thermometry.off_time_count", "must be >= 2"));
        }
        range("thermometry.off_time_min_us", th.off_time_min_us, 0.0, 100.0, true)?;
        range(
            "thermometry.off_time_max_us",
            th.off_time_max_us,
            th.off_time_min_us,
            100.0,
            true,
        )?;
        range("thermometry.grid_min_uK", th.grid_min_uK, 0.0, depth, true)?;
        range("thermometry.grid_max_uK", th.grid_max_uK, th.grid_min_uK, depth, true)?;
        positive("thermometry.grid_step_uK", th.grid_step_uK)?;
        if self.temperature_grid().len() < 5 {
            return Err(SimError::validation(
                "thermometry.grid_step_uK",
                "grid must have at least 5 points",
            ));
        }
        if th.repetitions == 0 {
            return Err(SimError::validation("thermometry.repetitions", "must be >= 1"));
        }

        let tr = &self.transport;
        range("transport.temperature_uK", tr.temperature_uK, 0.0, depth, true)?;
        if tr.round_trips == 0 {
            return Err(SimError::validation("transport.round_trips", "must be >= 1"));
        }
        range("transport.distance_um", tr.distance_um, 0.0, 18.0, false)?;
        positive("transport.round_trip_ms", tr.round_trip_ms)?;
        axis_ok("transport.axis", &tr.axis)?;
        positive("transport.dt_ns", tr.dt_ns)?;
        positive("transport.max_change_uK", tr.max_change_uK)?;

        let e = &self.echo;
        range("echo.temperature_uK", e.temperature_uK, 0.0, depth, true)?;
        if e.atoms == 0 {
            return Err(SimError::validation("echo.atoms", "must be >= 1"));
        }
        if e.displacements_um.is_empty() {
            return Err(SimError::validation("echo.displacements_um", "must not be empty"));
        }
        for d in &e.displacements_um {
            range("echo.displacements_um", *d, 0.0, 18.0, false)?;
        }
        positive("echo.total_ms", e.total_ms)?;
        range("echo.pi_ms", e.pi_ms, 0.0, e.total_ms, true)?;
        range("echo.move_ms", e.move_ms, 0.0, 0.5 * e.total_ms, true)?;
        if e.analysis_phases < 4 {
            return Err(SimError::validation("echo.analysis_phases", "must be >= 4"));
        }
        positive("echo.dt_ns", e.dt_ns)?;
        positive("echo.phase_tolerance_rad", e.phase_tolerance_rad)?;
        positive("echo.ramsey_max_us", e.ramsey_max_us)?;
        range("echo.ramsey_step_us", e.ramsey_step_us, 0.0, e.ramsey_max_us, true)?;

        let x = &self.transfer;
        range("transfer.temperature_uK", x.temperature_uK, 0.0, depth, true)?;
        if x.depths2_uK.len() < 2 {
            return Err(SimError::validation("transfer.depths2_uK", "needs at least 2 depths"));
        }
        for d in x.depths2_uK.iter().chain(std::iter::once(&x.thermometry_depth2_uK)) {
            range("transfer.depths2_uK", *d, 100.0, 1000.0, false)?;
        }
        range("transfer.start_us", x.start_us, 0.0, f64::MAX, false)?;
        positive("transfer.ramp_us", x.ramp_us)?;
        positive("transfer.hold_us", x.hold_us)?;
        if !(x.ramsey_us > x.start_us + 2.0 * x.ramp_us + x.hold_us) {
            return Err(SimError::validation(
                "transfer.ramsey_us",
                "must outlast the hand-over and return",
            ));
        }
        if x.analysis_phases < 4 {
            return Err(SimError::validation("transfer.analysis_phases", "must be >= 4"));
        }
        positive("transfer.dt_ns", x.dt_ns)?;

        let a = &self.adiabaticity;
        range("adiabaticity.distance_um", a.distance_um, 0.0, 18.0, false)?;
        positive("adiabaticity.move_ms", a.move_ms)?;
        axis_ok("adiabaticity.axis", &a.axis)?;
        Ok(())
    }

    pub fn trap_config(&self) -> Result<TrapConfig> {
        let t = &self.trap;
        TrapConfig::new(nano(t.wavelength_nm), micro(t.waist_um), micro(t.depth_uK))?
            .with_power_to_depth(t.power_to_depth_uK_per_uW)?
            .with_falloff(t.falloff_fraction / (micro(t.falloff_reference_um) * micro(t.falloff_reference_um)))
            .map(|c| c.with_constants(PhysConstants::RB87))
    }

    pub fn qubit_params(&self) -> Result<QubitParams> {
        QubitParams::new(self.qubit.eta, milli(self.qubit.t2_ms))?.with_extra_contrast(self.qubit.extra_contrast)
    }

    pub fn off_times(&self) -> Vec<f64> {
        let th = &self.thermometry;
        log_spaced_off_times(th.off_time_count, micro(th.off_time_min_us), micro(th.off_time_max_us))
    }

    /// Fit grid in K.
    pub fn temperature_grid(&self) -> Vec<f64> {
        let th = &self.thermometry;
        if !(th.grid_step_uK > 0.0) || !(th.grid_max_uK >= th.grid_min_uK) {
            return Vec::new();
        }
        let n = ((th.grid_max_uK - th.grid_min_uK) / th.grid_step_uK + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| micro(th.grid_min_uK + th.grid_step_uK * i as f64))
            .collect()
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            weighting: self.thermometry.weighting,
            sigma: self.thermometry.sigma_rule,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parse and validate a configuration document. Omitted fields take their
/// defaults; unknown keys are rejected.
pub fn parse_config(document: &str) -> Result<RunConfig> {
    // serde would also accept a positional array for a struct
    let offset = document.len() - document.trim_start().len();
    if document[offset..].starts_with('[') {
        let before = &document[..offset];
        return Err(SimError::Parse {
            line: before.matches('\n').count() + 1,
            column: offset - before.rfind('\n').map_or(0, |i| i + 1) + 1,
            message: "configuration must be a JSON object".into(),
        });
    }
    let cfg: RunConfig = serde_json::from_str(document)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_config(&text)
}
