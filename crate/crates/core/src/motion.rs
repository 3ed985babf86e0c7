//! Time-parameterised paths of the trap centre.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::trap::Vec3;

/// Largest one-way displacement reachable by the tip-tilt platform, m.
pub const MAX_DISPLACEMENT: f64 = 18e-6;

const CONTINUITY_TOL: f64 = 1e-12;

/// One piece of a [`MotionProfile`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Dwell {
        duration: f64,
        at: Vec3,
    },
    /// x(τ) = d(10τ³ − 15τ⁴ + 6τ⁵): zero velocity and acceleration at both ends.
    MinimumJerk {
        duration: f64,
        from: Vec3,
        to: Vec3,
    },
    /// Constant acceleration over `ramp_fraction` of the duration, cruise,
    /// then symmetric deceleration.
    Trapezoidal {
        duration: f64,
        from: Vec3,
        to: Vec3,
        ramp_fraction: f64,
    },
    /// centre + a·cos(θ) + b·sin(θ), θ = start_angle + 2π·turns·τ.
    Ellipse {
        duration: f64,
        center: Vec3,
        semi_a: Vec3,
        semi_b: Vec3,
        start_angle: f64,
        turns: f64,
    },
}

/// Position, velocity and acceleration at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Dwell { duration, .. }
            | Segment::MinimumJerk { duration, .. }
            | Segment::Trapezoidal { duration, .. }
            | Segment::Ellipse { duration, .. } => duration,
        }
    }

    fn ellipse_point(center: &Vec3, a: &Vec3, b: &Vec3, theta: f64) -> Vec3 {
        center + a * theta.cos() + b * theta.sin()
    }

    pub fn start_point(&self) -> Vec3 {
        match self {
            Segment::Dwell { at, .. } => *at,
            Segment::MinimumJerk { from, .. } | Segment::Trapezoidal { from, .. } => *from,
            Segment::Ellipse {
                center,
                semi_a,
                semi_b,
                start_angle,
                ..
            } => Self::ellipse_point(center, semi_a, semi_b, *start_angle),
        }
    }

    pub fn end_point(&self) -> Vec3 {
        match self {
            Segment::Dwell { at, .. } => *at,
            Segment::MinimumJerk { to, .. } | Segment::Trapezoidal { to, .. } => *to,
            Segment::Ellipse {
                center,
                semi_a,
                semi_b,
                start_angle,
                turns,
                ..
            } => Self::ellipse_point(center, semi_a, semi_b, start_angle + 2.0 * PI * turns),
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.duration();
        if !(d.is_finite() && d > 0.0) {
            return Err(SimError::precondition(format!("segment duration must be > 0, got {d}")));
        }
        match *self {
            Segment::Trapezoidal { ramp_fraction, .. } if !(ramp_fraction > 0.0 && ramp_fraction <= 0.5) => Err(
                SimError::precondition(format!("ramp_fraction must lie in (0, 0.5], got {ramp_fraction}")),
            ),
            Segment::Ellipse { turns, .. } if !turns.is_finite() => {
                Err(SimError::precondition("ellipse turns must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Kinematics at local time `t` ∈ [0, duration].
    pub fn kinematics(&self, t: f64) -> Kinematics {
        let dur = self.duration();
        let tau = (t / dur).clamp(0.0, 1.0);
        match *self {
            Segment::Dwell { at, .. } => Kinematics {
                position: at,
                velocity: Vec3::zeros(),
                acceleration: Vec3::zeros(),
            },
            Segment::MinimumJerk { from, to, .. } => {
                let d = to - from;
                let (t2, t3) = (tau * tau, tau * tau * tau);
                let s = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
                let ds = 30.0 * t2 * (1.0 - tau) * (1.0 - tau) / dur;
                let dds = (60.0 * tau - 180.0 * t2 + 120.0 * t3) / (dur * dur);
                Kinematics {
                    position: from + d * s,
                    velocity: d * ds,
                    acceleration: d * dds,
                }
            }
            Segment::Trapezoidal {
                from,
                to,
                ramp_fraction,
                ..
            } => {
                let f = ramp_fraction;
                let a = 1.0 / (f * (1.0 - f));
                let (s, ds, dds) = if tau < f {
                    (0.5 * a * tau * tau, a * tau, a)
                } else if tau <= 1.0 - f {
                    (0.5 * a * f * f + a * f * (tau - f), a * f, 0.0)
                } else {
                    let r = 1.0 - tau;
                    (1.0 - 0.5 * a * r * r, a * r, -a)
                };
                let d = to - from;
                Kinematics {
                    position: from + d * s,
                    velocity: d * (ds / dur),
                    acceleration: d * (dds / (dur * dur)),
                }
            }
            Segment::Ellipse {
                center,
                semi_a,
                semi_b,
                start_angle,
                turns,
                ..
            } => {
                let omega = 2.0 * PI * turns / dur;
                let theta = start_angle + omega * tau * dur;
                let (s, c) = theta.sin_cos();
                Kinematics {
                    position: center + semi_a * c + semi_b * s,
                    velocity: (semi_b * c - semi_a * s) * omega,
                    acceleration: -(semi_a * c + semi_b * s) * (omega * omega),
                }
            }
        }
    }

    /// Position only, at local time `t`.
    pub fn position(&self, t: f64) -> Vec3 {
        match *self {
            Segment::Dwell { at, .. } => at,
            Segment::MinimumJerk { duration, from, to } => {
                let tau = (t / duration).clamp(0.0, 1.0);
                let s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
                from + (to - from) * s
            }
            _ => self.kinematics(t).position,
        }
    }

    /// Largest acceleration magnitude reached within the segment.
    pub fn peak_acceleration(&self) -> f64 {
        match *self {
            Segment::Dwell { .. } => 0.0,
            Segment::MinimumJerk { duration, from, to } => {
                10.0 * (to - from).norm() / (3f64.sqrt() * duration * duration)
            }
            Segment::Trapezoidal {
                duration,
                from,
                to,
                ramp_fraction,
            } => (to - from).norm() / (ramp_fraction * (1.0 - ramp_fraction) * duration * duration),
            Segment::Ellipse {
                duration,
                semi_a,
                semi_b,
                turns,
                ..
            } => {
                // largest singular value of [a b]
                let aa = semi_a.dot(&semi_a);
                let bb = semi_b.dot(&semi_b);
                let ab = semi_a.dot(&semi_b);
                let tr = 0.5 * (aa + bb);
                let det = aa * bb - ab * ab;
                let lmax = tr + (tr * tr - det).max(0.0).sqrt();
                let omega = 2.0 * PI * turns / duration;
                omega * omega * lmax.sqrt()
            }
        }
    }
}

/// Ordered, C⁰-continuous sequence of segments starting at time 0. Before 0
/// the centre sits at the first point; after the last segment it stays at
/// the final point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct MotionProfile {
    start: Vec3,
    segments: Vec<Segment>,
    ends: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRepr {
    #[serde(default)]
    start: Option<Vec3>,
    #[serde(default)]
    segments: Vec<Segment>,
}

impl TryFrom<ProfileRepr> for MotionProfile {
    type Error = SimError;

    fn try_from(r: ProfileRepr) -> Result<Self> {
        match (r.start, r.segments.is_empty()) {
            (Some(p), true) => Ok(MotionProfile::stationary(p)),
            (None, true) => Ok(MotionProfile::stationary(Vec3::zeros())),
            (start, false) => {
                let profile = MotionProfile::new(r.segments)?;
                if let Some(p) = start {
                    if (p - profile.start).norm() > CONTINUITY_TOL {
                        return Err(SimError::precondition("profile start does not match its first segment"));
                    }
                }
                Ok(profile)
            }
        }
    }
}

impl From<MotionProfile> for ProfileRepr {
    fn from(p: MotionProfile) -> Self {
        ProfileRepr {
            start: Some(p.start),
            segments: p.segments,
        }
    }
}

impl MotionProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| SimError::precondition("motion profile needs at least one segment"))?;
        let start = first.start_point();
        let mut ends = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        let mut prev_end = start;
        for (i, seg) in segments.iter().enumerate() {
            seg.validate()?;
            let gap = (seg.start_point() - prev_end).norm();
            if gap > CONTINUITY_TOL {
                return Err(SimError::precondition(format!(
                    "segment {i} starts {gap:e} m away from the previous end point"
                )));
            }
            t += seg.duration();
            ends.push(t);
            prev_end = seg.end_point();
        }
        Ok(MotionProfile { start, segments, ends })
    }

    /// A trap that never moves.
    pub fn stationary(at: Vec3) -> Self {
        MotionProfile {
            start: at,
            segments: Vec::new(),
            ends: Vec::new(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    pub fn start_point(&self) -> Vec3 {
        self.start
    }

    pub fn end_point(&self) -> Vec3 {
        self.segments.last().map_or(self.start, Segment::end_point)
    }

    /// Start and end time of each segment.
    pub fn segment_times(&self) -> impl Iterator<Item = (f64, f64, &Segment)> + '_ {
        self.segments.iter().enumerate().map(move |(i, s)| {
            let t0 = if i == 0 { 0.0 } else { self.ends[i - 1] };
            (t0, self.ends[i], s)
        })
    }

    pub fn kinematics(&self, t: f64) -> Kinematics {
        let rest = |p: Vec3| Kinematics {
            position: p,
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
        };
        if self.segments.is_empty() || t <= 0.0 {
            return rest(self.start);
        }
        if t >= self.duration() {
            return rest(self.end_point());
        }
        let i = self.ends.partition_point(|&e| e <= t);
        let t0 = if i == 0 { 0.0 } else { self.ends[i - 1] };
        self.segments[i].kinematics(t - t0)
    }

    pub fn position(&self, t: f64) -> Vec3 {
        if self.segments.is_empty() || t <= 0.0 {
            return self.start;
        }
        if t >= self.duration() {
            return self.end_point();
        }
        let i = self.ends.partition_point(|&e| e <= t);
        let t0 = if i == 0 { 0.0 } else { self.ends[i - 1] };
        self.segments[i].position(t - t0)
    }

    pub fn peak_acceleration(&self) -> f64 {
        self.segments.iter().map(Segment::peak_acceleration).fold(0.0, f64::max)
    }

    /// Largest transverse distance of the centre from the optical axis.
    pub fn max_offaxis_distance(&self) -> f64 {
        let transverse = |p: Vec3| (p.x * p.x + p.y * p.y).sqrt();
        let mut best = transverse(self.start);
        for (t0, t1, _) in self.segment_times() {
            for k in 0..=64 {
                let t = t0 + (t1 - t0) * k as f64 / 64.0;
                best = best.max(transverse(self.position(t)));
            }
        }
        best
    }

    /// Concatenate `count` copies of this profile. The profile must end where
    /// it starts.
    pub fn repeated(&self, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(SimError::precondition("repeat count must be >= 1"));
        }
        if (self.end_point() - self.start).norm() > CONTINUITY_TOL {
            return Err(SimError::precondition("only closed profiles can be repeated"));
        }
        if self.segments.is_empty() {
            return Ok(self.clone());
        }
        let segments = std::iter::repeat_n(self.segments.iter().cloned(), count)
            .flatten()
            .collect();
        MotionProfile::new(segments)
    }
}

/// Out-and-back trip of length `distance` along `axis`, starting from the
/// origin: minimum-jerk out over `half_duration − dwell_at_target`, dwell at
/// the target, minimum-jerk back over `half_duration − dwell_at_origin`,
/// dwell at the origin. Zero-length dwells are omitted.
pub fn motion_profile_round_trip(
    distance: f64,
    axis: Vec3,
    half_duration: f64,
    dwell_at_target: f64,
    dwell_at_origin: f64,
) -> Result<MotionProfile> {
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(SimError::precondition(format!("distance must be >= 0, got {distance}")));
    }
    if distance > MAX_DISPLACEMENT * (1.0 + 1e-9) {
        return Err(SimError::precondition(format!(
            "distance {distance:e} m exceeds the {MAX_DISPLACEMENT:e} m field of view"
        )));
    }
    if !(half_duration.is_finite() && half_duration > 0.0) {
        return Err(SimError::precondition("half duration must be > 0"));
    }
    for (name, dwell) in [
        ("dwell_at_target", dwell_at_target),
        ("dwell_at_origin", dwell_at_origin),
    ] {
        if !(dwell.is_finite() && dwell >= 0.0) {
            return Err(SimError::precondition(format!("{name} must be >= 0")));
        }
        if dwell >= half_duration {
            return Err(SimError::precondition(format!(
                "{name} ({dwell:e} s) must be shorter than the half duration ({half_duration:e} s)"
            )));
        }
    }
    let norm = axis.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(SimError::precondition("axis must be a non-zero vector"));
    }
    let origin = Vec3::zeros();
    let target = axis / norm * distance;
    let mut segments = vec![Segment::MinimumJerk {
        duration: half_duration - dwell_at_target,
        from: origin,
        to: target,
    }];
    if dwell_at_target > 0.0 {
        segments.push(Segment::Dwell {
            duration: dwell_at_target,
            at: target,
        });
    }
    segments.push(Segment::MinimumJerk {
        duration: half_duration - dwell_at_origin,
        from: target,
        to: origin,
    });
    if dwell_at_origin > 0.0 {
        segments.push(Segment::Dwell {
            duration: dwell_at_origin,
            at: origin,
        });
    }
    MotionProfile::new(segments)
}
