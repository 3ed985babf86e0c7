//! Release-and-recapture thermometry: Monte Carlo forward model of the
//! recapture probability and a grid least-squares temperature fit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{AtomState, Ensemble, ThermalSampler};
use crate::error::{Result, SimError};
use crate::rng::{par_map, substream, Domain};
use crate::trap::{TrapConfig, Vec3};

/// Longest admissible release time, s.
pub const MAX_OFF_TIME: f64 = 100e-6;

/// Measured or simulated recapture probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecaptureCurve {
    off_times: Vec<f64>,
    probabilities: Vec<f64>,
    shots_per_point: u64,
}

fn check_off_times(off_times: &[f64]) -> Result<()> {
    if off_times.is_empty() {
        return Err(SimError::precondition("at least one off time is required"));
    }
    for (i, &t) in off_times.iter().enumerate() {
        if !(t.is_finite() && (0.0..=MAX_OFF_TIME).contains(&t)) {
            return Err(SimError::precondition(format!("off time {t:e} s outside [0, 100 us]")));
        }
        if i > 0 && t <= off_times[i - 1] {
            return Err(SimError::precondition("off times must be strictly increasing"));
        }
    }
    Ok(())
}

impl RecaptureCurve {
    pub fn new(off_times: Vec<f64>, probabilities: Vec<f64>, shots_per_point: u64) -> Result<Self> {
        check_off_times(&off_times)?;
        if off_times.len() != probabilities.len() {
            return Err(SimError::precondition("off times and probabilities differ in length"));
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(SimError::precondition(format!("probability {p} outside [0, 1]")));
        }
        if shots_per_point == 0 {
            return Err(SimError::precondition("shots per point must be >= 1"));
        }
        Ok(RecaptureCurve {
            off_times,
            probabilities,
            shots_per_point,
        })
    }

    pub fn off_times(&self) -> &[f64] {
        &self.off_times
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn shots_per_point(&self) -> u64 {
        self.shots_per_point
    }

    pub fn len(&self) -> usize {
        self.off_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.off_times.is_empty()
    }

    /// Write the `t_off_us,probability,shots` table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| SimError::Csv(e.to_string());
        w.write_record(["t_off_us", "probability", "shots"]).map_err(err)?;
        for (t, p) in self.off_times.iter().zip(&self.probabilities) {
            w.write_record([
                crate::io::format_sig(t * 1e6),
                crate::io::format_sig(*p),
                self.shots_per_point.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| SimError::Csv(e.to_string()))
    }

    /// Parse the `t_off_us,probability,shots` table. Every row must carry the
    /// same shot count.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers().map_err(|e| SimError::Csv(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_off_us", "probability", "shots"] {
            return Err(SimError::Csv("expected header t_off_us,probability,shots".into()));
        }
        let mut times = Vec::new();
        let mut probs = Vec::new();
        let mut shots: Option<u64> = None;
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| SimError::Csv(format!("line {line}: {e}")))?;
            let field = |k: usize| {
                rec.get(k)
                    .ok_or_else(|| SimError::Csv(format!("line {line}: missing field")))
            };
            let num = |k: usize| -> Result<f64> {
                let s = field(k)?;
                s.parse::<f64>()
                    .map_err(|_| SimError::Csv(format!("line {line}: `{s}` is not a number")))
            };
            let t_us = num(0)?;
            let p = num(1)?;
            let n_str = field(2)?;
            let n: u64 = n_str
                .parse()
                .map_err(|_| SimError::Csv(format!("line {line}: `{n_str}` is not a shot count")))?;
            match shots {
                None => shots = Some(n),
                Some(s) if s != n => {
                    return Err(SimError::Csv(format!("line {line}: shot count {n} differs from {s}")))
                }
                _ => {}
            }
            times.push(t_us * 1e-6);
            probs.push(p);
        }
        let shots = shots.ok_or_else(|| SimError::Csv("no data rows".into()))?;
        RecaptureCurve::new(times, probs, shots)
    }
}

/// `n` release times spaced evenly in log between `lo` and `hi` (inclusive).
pub fn log_spaced_off_times(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Fifteen release times between 1 and 30 µs.
pub fn default_off_times() -> Vec<f64> {
    log_spaced_off_times(15, 1e-6, 30e-6)
}

/// Whether an atom released at `state` from a trap centred at `center` is
/// recaptured after `t_off` of free flight: total energy in the restored
/// potential below zero. Gravity acts during the flight only.
pub fn recaptured(state: &AtomState, cfg: &TrapConfig, center: &Vec3, t_off: f64, gravity: bool) -> bool {
    let g = if gravity { cfg.phys().g } else { 0.0 };
    let mut r = state.position + state.velocity * t_off;
    r.x -= 0.5 * g * t_off * t_off;
    let mut v = state.velocity;
    v.x -= g * t_off;
    0.5 * cfg.mass() * v.norm_squared() + cfg.potential_energy(&r, center, false) < 0.0
}

/// Recapture curve of an existing ensemble in a trap at the origin; every
/// atom is released once per off time, so the shot count is the ensemble
/// size.
pub fn recapture_from_ensemble(ensemble: &Ensemble, cfg: &TrapConfig, off_times: &[f64]) -> Result<RecaptureCurve> {
    check_off_times(off_times)?;
    let origin = Vec3::zeros();
    let counts: Vec<Vec<bool>> = par_map(ensemble.len(), |i| {
        let s = &ensemble.states()[i];
        off_times
            .iter()
            .map(|&t| recaptured(s, cfg, &origin, t, true))
            .collect()
    });
    let n = ensemble.len() as f64;
    let probs = (0..off_times.len())
        .map(|k| counts.iter().filter(|c| c[k]).count() as f64 / n)
        .collect();
    RecaptureCurve::new(off_times.to_vec(), probs, ensemble.len() as u64)
}

/// Simulated measurement: each point is an independent run of `shots`
/// single-atom experiments, so the points carry independent binomial noise.
pub fn simulate_release_recapture(
    temperature: f64,
    cfg: &TrapConfig,
    off_times: &[f64],
    shots: u64,
    seed: u64,
) -> Result<RecaptureCurve> {
    check_off_times(off_times)?;
    if shots == 0 {
        return Err(SimError::precondition("shots must be >= 1"));
    }
    let sampler = ThermalSampler::new(temperature, cfg)?;
    let origin = Vec3::zeros();
    let probs = off_times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let hits = par_map(shots as usize, |i| {
                let mut rng = substream(seed, Domain::RecaptureData, ((k as u64) << 40) | i as u64);
                recaptured(&sampler.sample(&mut rng), cfg, &origin, t, true)
            });
            hits.iter().filter(|&&h| h).count() as f64 / shots as f64
        })
        .collect();
    RecaptureCurve::new(off_times.to_vec(), probs, shots)
}

/// Noise-free-ish model curves. Each shot uses the same random numbers at
/// every temperature and every off time, so χ² varies smoothly on a
/// temperature grid.
#[derive(Clone, Debug)]
pub struct RecaptureModel {
    cfg: TrapConfig,
    off_times: Vec<f64>,
    shots: u64,
    seed: u64,
}

impl RecaptureModel {
    pub fn new(cfg: &TrapConfig, off_times: &[f64], shots: u64, seed: u64) -> Result<Self> {
        check_off_times(off_times)?;
        if shots == 0 {
            return Err(SimError::precondition("model shots must be >= 1"));
        }
        Ok(RecaptureModel {
            cfg: *cfg,
            off_times: off_times.to_vec(),
            shots,
            seed,
        })
    }

    pub fn off_times(&self) -> &[f64] {
        &self.off_times
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// Model probabilities at `temperature`.
    pub fn curve(&self, temperature: f64) -> Result<Vec<f64>> {
        let sampler = ThermalSampler::new(temperature, &self.cfg)?;
        let origin = Vec3::zeros();
        let k = self.off_times.len();
        let hits = par_map(self.shots as usize, |i| {
            let s = sampler.sample(&mut substream(self.seed, Domain::RecaptureModel, i as u64));
            self.off_times
                .iter()
                .map(|&t| recaptured(&s, &self.cfg, &origin, t, true) as u32)
                .collect::<Vec<u32>>()
        });
        let mut counts = vec![0u64; k];
        for h in &hits {
            for (c, &x) in counts.iter_mut().zip(h) {
                *c += x as u64;
            }
        }
        Ok(counts.iter().map(|&c| c as f64 / self.shots as f64).collect())
    }

    /// Model curves for every temperature of `grid`.
    pub fn table(&self, grid: &[f64]) -> Result<ModelTable> {
        check_grid(grid, self.cfg.depth())?;
        let curves = grid.iter().map(|&t| self.curve(t)).collect::<Result<Vec<_>>>()?;
        Ok(ModelTable {
            off_times: self.off_times.clone(),
            grid: grid.to_vec(),
            curves,
        })
    }
}

/// Precomputed model curves on a temperature grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelTable {
    off_times: Vec<f64>,
    grid: Vec<f64>,
    curves: Vec<Vec<f64>>,
}

impl ModelTable {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn curves(&self) -> &[Vec<f64>] {
        &self.curves
    }
}

/// χ² weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Σ (p_data − p_model)².
    #[default]
    Unweighted,
    /// Each residual divided by the binomial variance of the model at the
    /// data shot count.
    Binomial,
}

/// How the error bar of a temperature fit is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// Binomial variance of each point, p(1 − p)/n at the model
    /// probability, propagated through the least-squares estimator.
    #[default]
    Propagated,
    /// Half-width at which the χ² parabola rises by χ²_min/(N − 1).
    ResidualWidth,
}

/// Fit settings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub weighting: Weighting,
    pub sigma: SigmaRule,
}

/// Result of a temperature fit.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureFit {
    pub temperature: f64,
    /// One standard deviation, K.
    pub sigma: f64,
    pub chi2_min: f64,
    /// (temperature, χ²) on the grid.
    pub chi2_curve: Vec<(f64, f64)>,
}

/// Serialised fit summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct FitReport {
    pub temperature_uK: f64,
    pub sigma_uK: f64,
    pub chi2_curve: Vec<[f64; 2]>,
}

impl From<&TemperatureFit> for FitReport {
    fn from(f: &TemperatureFit) -> Self {
        FitReport {
            temperature_uK: f.temperature * 1e6,
            sigma_uK: f.sigma * 1e6,
            chi2_curve: f.chi2_curve.iter().map(|&(t, c)| [t * 1e6, c]).collect(),
        }
    }
}

fn check_grid(grid: &[f64], depth: f64) -> Result<()> {
    if grid.len() < 5 {
        return Err(SimError::precondition("temperature grid needs at least 5 points"));
    }
    for (i, &t) in grid.iter().enumerate() {
        if !(t.is_finite() && t > 0.0 && t < depth) {
            return Err(SimError::precondition(format!(
                "grid temperature {t:e} K outside (0, depth)"
            )));
        }
        if i > 0 && t <= grid[i - 1] {
            return Err(SimError::precondition("temperature grid must be strictly increasing"));
        }
    }
    Ok(())
}

/// Binomial variance of a probability estimate from `n` shots, floored so
/// that points at exactly 0 or 1 keep a finite weight.
fn binomial_variance(p: f64, n: f64) -> f64 {
    (p * (1.0 - p)).max(0.25 / n) / n
}

fn weight(m: f64, n: f64, weighting: Weighting) -> f64 {
    match weighting {
        Weighting::Unweighted => 1.0,
        Weighting::Binomial => 1.0 / binomial_variance(m, n),
    }
}

fn chi2(data: &RecaptureCurve, model: &[f64], weighting: Weighting) -> f64 {
    let n = data.shots_per_point() as f64;
    data.probabilities()
        .iter()
        .zip(model)
        .map(|(&p, &m)| (p - m) * (p - m) * weight(m, n, weighting))
        .sum()
}

/// Fit `curve` against precomputed model curves.
///
/// The temperature is the vertex of the parabola through the smallest grid
/// χ² and its two neighbours. With [`SigmaRule::Propagated`] the error bar
/// is the sandwich estimate Σwᵢ²dᵢ²vᵢ / (Σwᵢdᵢ²)², where dᵢ is the slope of
/// the model curve with temperature, vᵢ the binomial variance of point i and
/// wᵢ its χ² weight. With [`SigmaRule::ResidualWidth`] it is the half-width
/// at which the parabola rises by χ²_min/(N − 1); when the curve coincides
/// with a model curve (χ²_min = 0) the expected binomial variance stands in
/// for the residual one. A curve that coincides with a model curve is fitted
/// to that grid point exactly.
pub fn fit_temperature_with_table(
    curve: &RecaptureCurve,
    table: &ModelTable,
    opts: &FitOptions,
) -> Result<TemperatureFit> {
    if curve.off_times() != table.off_times.as_slice() {
        return Err(SimError::precondition("curve and model use different off times"));
    }
    if curve.len() < 2 {
        return Err(SimError::Fit("need at least two curve points".into()));
    }
    let chi: Vec<f64> = table.curves.iter().map(|m| chi2(curve, m, opts.weighting)).collect();
    let chi2_curve: Vec<(f64, f64)> = table.grid.iter().copied().zip(chi.iter().copied()).collect();
    let k = chi
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| SimError::Fit("empty grid".into()))?;
    if k == 0 || k == chi.len() - 1 {
        return Err(SimError::FitRange(format!(
            "chi-squared minimum at the grid edge ({:.3} uK); widen the grid",
            table.grid[k] * 1e6
        )));
    }
    let (x0, x1, x2) = (table.grid[k - 1], table.grid[k], table.grid[k + 1]);
    let (y0, y1, y2) = (chi[k - 1], chi[k], chi[k + 1]);
    // y = a (x − x1)² + b (x − x1) + y1
    let (h0, h2) = (x0 - x1, x2 - x1);
    let a = ((y0 - y1) / h0 - (y2 - y1) / h2) / (h0 - h2);
    let b = (y0 - y1) / h0 - a * h0;
    if !(a > 0.0) {
        return Err(SimError::Fit("chi-squared curve is not convex at its minimum".into()));
    }
    let (temperature, chi2_min) = if y1 == 0.0 {
        (x1, 0.0)
    } else {
        let shift = (-b / (2.0 * a)).clamp(h0, h2);
        (x1 + shift, (y1 + b * shift + a * shift * shift).max(0.0))
    };
    let n = curve.shots_per_point() as f64;
    let sigma = match opts.sigma {
        SigmaRule::Propagated => {
            let (lo, mid, hi) = (&table.curves[k - 1], &table.curves[k], &table.curves[k + 1]);
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..curve.len() {
                let d = (hi[i] - lo[i]) / (x2 - x0);
                let w = weight(mid[i], n, opts.weighting);
                num += w * w * d * d * binomial_variance(mid[i], n);
                den += w * d * d;
            }
            if !(den > 0.0) {
                return Err(SimError::Fit("model curves do not depend on temperature".into()));
            }
            num.sqrt() / den
        }
        SigmaRule::ResidualWidth => {
            let spread = if y1 == 0.0 {
                match opts.weighting {
                    Weighting::Unweighted => {
                        curve
                            .probabilities()
                            .iter()
                            .map(|&p| binomial_variance(p, n))
                            .sum::<f64>()
                            / curve.len() as f64
                    }
                    Weighting::Binomial => 1.0,
                }
            } else {
                (chi2_min / (curve.len() - 1) as f64).max(f64::MIN_POSITIVE)
            };
            (spread / a).sqrt()
        }
    };
    Ok(TemperatureFit {
        temperature,
        sigma,
        chi2_min,
        chi2_curve,
    })
}

/// Fit `curve` against fixed-seed model curves with `shots_per_model_point`
/// atoms per grid temperature, unweighted χ² and propagated error bar.
pub fn fit_temperature(
    curve: &RecaptureCurve,
    cfg: &TrapConfig,
    grid: &[f64],
    shots_per_model_point: u64,
    seed: u64,
) -> Result<TemperatureFit> {
    let model = RecaptureModel::new(cfg, curve.off_times(), shots_per_model_point, seed)?;
    fit_temperature_with_table(curve, &model.table(grid)?, &FitOptions::default())
}
