use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// `n` analysis phases evenly spaced over one turn, starting at 0.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Least-squares fit of A·cos(θ − φ) + B.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeFit {
    pub amplitude: f64,
    /// `None` when the fitted amplitude vanishes.
    pub phase: Option<f64>,
    pub offset: f64,
    pub amplitude_sigma: f64,
    pub phase_sigma: Option<f64>,
    pub offset_sigma: f64,
    /// Covariance of (A cos φ, A sin φ, B).
    pub covariance: Matrix3<f64>,
}

impl FringeFit {
    /// Build the polar summary from linear parameters (a, b, B) = (A cos φ,
    /// A sin φ, B) and their covariance.
    pub fn from_linear(params: Vector3<f64>, covariance: Matrix3<f64>) -> Self {
        let (a, b, c) = (params[0], params[1], params[2]);
        let amp = a.hypot(b);
        let scale = 1.0 + c.abs();
        let (phase, phase_sigma, amplitude_sigma) = if amp <= 1e-12 * scale {
            let s = 0.5 * (covariance[(0, 0)] + covariance[(1, 1)]);
            (None, None, s.max(0.0).sqrt())
        } else {
            let (saa, sab, sbb) = (covariance[(0, 0)], covariance[(0, 1)], covariance[(1, 1)]);
            let var_a = (a * a * saa + 2.0 * a * b * sab + b * b * sbb) / (amp * amp);
            let var_p = (b * b * saa - 2.0 * a * b * sab + a * a * sbb) / amp.powi(4);
            (Some(b.atan2(a)), Some(var_p.max(0.0).sqrt()), var_a.max(0.0).sqrt())
        };
        FringeFit {
            amplitude: amp,
            phase,
            offset: c,
            amplitude_sigma,
            phase_sigma,
            offset_sigma: covariance[(2, 2)].max(0.0).sqrt(),
            covariance,
        }
    }
}

fn check_phases(phases: &[f64]) -> Result<()> {
    if phases.len() < 4 {
        return Err(SimError::precondition("fringe fit needs at least 4 phases"));
    }
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(SimError::precondition("phases must be finite"));
    }
    let mut wrapped: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    wrapped.sort_by(f64::total_cmp);
    if wrapped[wrapped.len() - 1] - wrapped[0] < 1e-12 {
        return Err(SimError::Fit("all analysis phases coincide".into()));
    }
    let mut gap = wrapped[0] + TAU - wrapped[wrapped.len() - 1];
    for w in wrapped.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    if gap > PI + 1e-9 {
        return Err(SimError::precondition("analysis phases must cover the full circle"));
    }
    Ok(())
}

/// Pseudo-inverse (XᵀX)⁻¹Xᵀ of the design matrix with rows
/// [cos θ, sin θ, 1], returned as one 3-vector per phase.
pub(crate) fn fringe_projector(phases: &[f64]) -> Result<(Vec<Vector3<f64>>, Matrix3<f64>)> {
    check_phases(phases)?;
    let rows: Vec<Vector3<f64>> = phases.iter().map(|&t| Vector3::new(t.cos(), t.sin(), 1.0)).collect();
    let xtx = rows.iter().fold(Matrix3::zeros(), |m, r| m + r * r.transpose());
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| SimError::Fit("degenerate phase sampling".into()))?;
    Ok((rows.iter().map(|r| inv * r).collect(), inv))
}

/// Fit A·cos(θ − φ) + B to populations sampled at `phases`; uncertainties
/// from the residual scatter.
pub fn fit_fringes(phases: &[f64], populations: &[f64]) -> Result<FringeFit> {
    if phases.len() != populations.len() {
        return Err(SimError::precondition("phases and populations differ in length"));
    }
    if populations.iter().any(|p| !p.is_finite()) {
        return Err(SimError::precondition("populations must be finite"));
    }
    let (proj, inv) = fringe_projector(phases)?;
    let params = proj
        .iter()
        .zip(populations)
        .fold(Vector3::zeros(), |acc, (p, &y)| acc + p * y);
    let rss: f64 = phases
        .iter()
        .zip(populations)
        .map(|(&t, &y)| {
            let r = y - (params[0] * t.cos() + params[1] * t.sin() + params[2]);
            r * r
        })
        .sum();
    let dof = phases.len().saturating_sub(3);
    let s2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    Ok(FringeFit::from_linear(params, inv * s2))
}

/// Interferometer output: populations against analysis phase plus the fit.
/// The reported amplitude is the fringe contrast 2A.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeRecord {
    pub analysis_phases: Vec<f64>,
    pub populations: Vec<f64>,
    pub fitted_amplitude: f64,
    pub fitted_phase: Option<f64>,
    pub amplitude_sigma: f64,
    pub phase_sigma: Option<f64>,
}

impl FringeRecord {
    pub(crate) fn from_fit(phases: Vec<f64>, populations: Vec<f64>, fit: &FringeFit) -> Self {
        FringeRecord {
            analysis_phases: phases,
            populations,
            fitted_amplitude: 2.0 * fit.amplitude,
            fitted_phase: fit.phase,
            amplitude_sigma: 2.0 * fit.amplitude_sigma,
            phase_sigma: fit.phase_sigma,
        }
    }

    /// Fit measured populations.
    pub fn from_populations(phases: Vec<f64>, populations: Vec<f64>) -> Result<Self> {
        if let Some(p) = populations.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(SimError::precondition(format!("population {p} outside [0, 1]")));
        }
        let fit = fit_fringes(&phases, &populations)?;
        Ok(Self::from_fit(phases, populations, &fit))
    }

    /// Write the `analysis_phase_rad,population` table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| SimError::Csv(e.to_string());
        w.write_record(["analysis_phase_rad", "population"]).map_err(err)?;
        for (t, p) in self.analysis_phases.iter().zip(&self.populations) {
            w.write_record([crate::io::format_sig(*t), crate::io::format_sig(*p)])
                .map_err(err)?;
        }
        w.flush().map_err(|e| SimError::Csv(e.to_string()))
    }

    /// Parse an `analysis_phase_rad,population` table and fit it.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers().map_err(|e| SimError::Csv(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["analysis_phase_rad", "population"] {
            return Err(SimError::Csv("expected header analysis_phase_rad,population".into()));
        }
        let mut phases = Vec::new();
        let mut pops = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| SimError::Csv(format!("line {line}: {e}")))?;
            let num = |k: usize| -> Result<f64> {
                let s = rec
                    .get(k)
                    .ok_or_else(|| SimError::Csv(format!("line {line}: missing field")))?;
                s.parse::<f64>()
                    .map_err(|_| SimError::Csv(format!("line {line}: `{s}` is not a number")))
            };
            phases.push(num(0)?);
            pops.push(num(1)?);
        }
        Self::from_populations(phases, pops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_cosine_is_recovered() {
        let th = uniform_phases(12);
        let y: Vec<f64> = th.iter().map(|t| 0.6 * (t - 0.3).cos() + 0.5).collect();
        let f = fit_fringes(&th, &y).unwrap();
        assert_relative_eq!(f.amplitude, 0.6, max_relative = 1e-12);
        assert_relative_eq!(f.phase.unwrap(), 0.3, max_relative = 1e-12);
        assert_relative_eq!(f.offset, 0.5, max_relative = 1e-12);
        assert!(f.amplitude_sigma < 1e-12);
    }

    #[test]
    fn flat_populations_have_no_phase() {
        let th = uniform_phases(8);
        let f = fit_fringes(&th, &[0.5; 8]).unwrap();
        assert!(f.amplitude < 1e-12);
        assert!(f.phase.is_none());
    }

    #[test]
    fn degenerate_and_short_sampling_rejected() {
        assert!(matches!(fit_fringes(&[1.0; 5], &[0.5; 5]), Err(SimError::Fit(_))));
        assert!(fit_fringes(&[0.0, 1.0, 2.0], &[0.5; 3]).is_err());
        assert!(matches!(
            fit_fringes(&[0.0, 0.5, 1.0, 1.5], &[0.5; 4]),
            Err(SimError::Precondition(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let th = uniform_phases(8);
        let y: Vec<f64> = th.iter().map(|t| 0.4 * (t - 1.0).cos() + 0.5).collect();
        let rec = FringeRecord::from_populations(th, y).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let back = FringeRecord::read_csv(buf.as_slice()).unwrap();
        assert_relative_eq!(back.fitted_amplitude, 0.8, max_relative = 1e-7);
        assert_relative_eq!(back.fitted_phase.unwrap(), 1.0, max_relative = 1e-7);
        assert!(FringeRecord::read_csv("a,b\n".as_bytes()).is_err());
    }
}
