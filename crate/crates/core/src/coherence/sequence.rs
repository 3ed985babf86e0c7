use serde::{Deserialize, Serialize};

use crate::config::scale;
use crate::dynamics::TransferSchedule;
use crate::error::{Result, SimError};
use crate::motion::{motion_profile_round_trip, MotionProfile, Segment};
use crate::trap::Vec3;

use super::fringe::uniform_phases;

/// Instantaneous qubit rotations.
#[derive(Clone, Debug, PartialEq)]
pub enum PulseKind {
    PiHalf,
    Pi,
    /// Closing π/2 pulse, repeated once for every listed analysis phase.
    AnalysisPiHalf {
        phases: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseEvent {
    pub time: f64,
    pub kind: PulseKind,
}

/// Ramsey or spin-echo sequence together with the trap motion and optional
/// hand-over that run underneath it. Times share the origin of the motion
/// profile.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    events: Vec<PulseEvent>,
    motion: MotionProfile,
    transfer: Option<TransferSchedule>,
}

impl PulseSequence {
    pub fn new(events: Vec<PulseEvent>, motion: MotionProfile, transfer: Option<TransferSchedule>) -> Result<Self> {
        let seq = PulseSequence {
            events,
            motion,
            transfer,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// π/2 at `start`, analysis at `start + delay`.
    pub fn ramsey(start: f64, delay: f64, phases: Vec<f64>, motion: MotionProfile) -> Result<Self> {
        Self::new(
            vec![
                PulseEvent {
                    time: start,
                    kind: PulseKind::PiHalf,
                },
                PulseEvent {
                    time: start + delay,
                    kind: PulseKind::AnalysisPiHalf { phases },
                },
            ],
            motion,
            None,
        )
    }

    /// π/2 at `start`, π at `t_pi`, analysis at `t_end`.
    pub fn echo(start: f64, t_pi: f64, t_end: f64, phases: Vec<f64>, motion: MotionProfile) -> Result<Self> {
        Self::new(
            vec![
                PulseEvent {
                    time: start,
                    kind: PulseKind::PiHalf,
                },
                PulseEvent {
                    time: t_pi,
                    kind: PulseKind::Pi,
                },
                PulseEvent {
                    time: t_end,
                    kind: PulseKind::AnalysisPiHalf { phases },
                },
            ],
            motion,
            None,
        )
    }

    pub fn with_transfer(mut self, transfer: TransferSchedule) -> Result<Self> {
        self.transfer = Some(transfer);
        self.validate()?;
        Ok(self)
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    pub fn motion(&self) -> &MotionProfile {
        &self.motion
    }

    pub fn transfer(&self) -> Option<&TransferSchedule> {
        self.transfer.as_ref()
    }

    pub fn start(&self) -> f64 {
        self.events[0].time
    }

    pub fn end(&self) -> f64 {
        self.events[self.events.len() - 1].time
    }

    pub fn analysis_phases(&self) -> &[f64] {
        match &self.events[self.events.len() - 1].kind {
            PulseKind::AnalysisPiHalf { phases } => phases,
            _ => unreachable!("validated sequence ends with an analysis pulse"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ev = &self.events;
        if ev.len() < 2 {
            return Err(SimError::precondition(
                "a sequence needs an opening and an analysis pulse",
            ));
        }
        if !matches!(ev[0].kind, PulseKind::PiHalf) {
            return Err(SimError::precondition("the first pulse must be a pi/2 pulse"));
        }
        if !matches!(ev[ev.len() - 1].kind, PulseKind::AnalysisPiHalf { .. }) {
            return Err(SimError::precondition("the last pulse must be the analysis pi/2 pulse"));
        }
        let inner = &ev[1..ev.len() - 1];
        if inner.len() > 1 || inner.iter().any(|e| !matches!(e.kind, PulseKind::Pi)) {
            return Err(SimError::precondition(
                "at most one pi pulse may sit between the pi/2 pulses",
            ));
        }
        for (i, e) in ev.iter().enumerate() {
            if !(e.time.is_finite() && e.time >= 0.0) {
                return Err(SimError::precondition(format!("pulse {i} has an invalid time")));
            }
            if i > 0 && e.time <= ev[i - 1].time {
                return Err(SimError::precondition("pulse times must be strictly increasing"));
            }
        }
        if let Some(t) = &self.transfer {
            t.validate()?;
        }
        super::fringe::fringe_projector(self.analysis_phases()).map(|_| ())
    }

    /// Parse the JSON sequence document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SequenceDoc = serde_json::from_str(text)?;
        doc.into_sequence()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SequenceDoc {
            events: self
                .events
                .iter()
                .map(|e| EventDoc {
                    time_us: scale(e.time, 6),
                    kind: match e.kind {
                        PulseKind::PiHalf => KindDoc::PiHalf,
                        PulseKind::Pi => KindDoc::Pi,
                        PulseKind::AnalysisPiHalf { .. } => KindDoc::AnalysisPiHalf,
                    },
                    phases_rad: match &e.kind {
                        PulseKind::AnalysisPiHalf { phases } => Some(phases.clone()),
                        _ => None,
                    },
                })
                .collect(),
            motion: if self.motion.segments().is_empty() {
                None
            } else {
                Some(MotionDoc::Segments(self.motion.segments().to_vec()))
            },
            transfer: self.transfer.map(|t| TransferDoc {
                start_us: scale(t.start, 6),
                ramp_us: scale(t.ramp_duration, 6),
                hold_us: scale(t.hold_duration, 6),
                depth2_uK: scale(t.depth2, 6),
            }),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceDoc {
    events: Vec<EventDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    motion: Option<MotionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transfer: Option<TransferDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    time_us: f64,
    kind: KindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phases_rad: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindDoc {
    PiHalf,
    Pi,
    AnalysisPiHalf,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum MotionDoc {
    RoundTrip(RoundTripDoc),
    /// Raw segments in SI units.
    Segments(Vec<Segment>),
}

fn default_axis() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundTripDoc {
    distance_um: f64,
    #[serde(default = "default_axis")]
    axis: [f64; 3],
    half_duration_us: f64,
    #[serde(default)]
    dwell_at_target_us: f64,
    #[serde(default)]
    dwell_at_origin_us: f64,
}

fn default_ramp_us() -> f64 {
    scale(TransferSchedule::DEFAULT_RAMP, 6)
}

fn default_hold_us() -> f64 {
    scale(TransferSchedule::DEFAULT_HOLD, 6)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct TransferDoc {
    start_us: f64,
    #[serde(default = "default_ramp_us")]
    ramp_us: f64,
    #[serde(default = "default_hold_us")]
    hold_us: f64,
    depth2_uK: f64,
}

const DEFAULT_ANALYSIS_PHASES: usize = 16;

impl SequenceDoc {
    fn into_sequence(self) -> Result<PulseSequence> {
        let events = self
            .events
            .into_iter()
            .map(|e| {
                let kind = match (e.kind, e.phases_rad) {
                    (KindDoc::AnalysisPiHalf, phases) => PulseKind::AnalysisPiHalf {
                        phases: phases.unwrap_or_else(|| uniform_phases(DEFAULT_ANALYSIS_PHASES)),
                    },
                    (_, Some(_)) => {
                        return Err(SimError::validation("phases_rad", "only allowed on the analysis pulse"))
                    }
                    (KindDoc::PiHalf, None) => PulseKind::PiHalf,
                    (KindDoc::Pi, None) => PulseKind::Pi,
                };
                Ok(PulseEvent {
                    time: scale(e.time_us, -6),
                    kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let motion = match self.motion {
            None => MotionProfile::stationary(Vec3::zeros()),
            Some(MotionDoc::Segments(s)) => MotionProfile::new(s)?,
            Some(MotionDoc::RoundTrip(r)) => motion_profile_round_trip(
                scale(r.distance_um, -6),
                Vec3::from(r.axis),
                scale(r.half_duration_us, -6),
                scale(r.dwell_at_target_us, -6),
                scale(r.dwell_at_origin_us, -6),
            )?,
        };
        let transfer = self
            .transfer
            .map(|t| {
                TransferSchedule::new(
                    scale(t.start_us, -6),
                    scale(t.ramp_us, -6),
                    scale(t.hold_us, -6),
                    scale(t.depth2_uK, -6),
                )
            })
            .transpose()?;
        PulseSequence::new(events, motion, transfer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ECHO: &str = r#"{
        "events": [
            {"time_us": 0, "kind": "pi_half"},
            {"time_us": 3000, "kind": "pi"},
            {"time_us": 6000, "kind": "analysis_pi_half"}
        ],
        "motion": {"round_trip": {"distance_um": 16, "half_duration_us": 3000,
                                  "dwell_at_target_us": 2000, "dwell_at_origin_us": 2000}}
    }"#;

    #[test]
    fn parses_echo_document() {
        let s = PulseSequence::from_json(ECHO).unwrap();
        assert_eq!(s.events().len(), 3);
        assert_eq!(s.analysis_phases().len(), 16);
        assert!((s.motion().duration() - 6e-3).abs() < 1e-15);
        let again = PulseSequence::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(again.events().len(), 3);
        assert_eq!(again.motion().segments(), s.motion().segments());
    }

    #[test]
    fn parses_transfer_document() {
        let s = PulseSequence::from_json(
            r#"{"events":[{"time_us":0,"kind":"pi_half"},
                          {"time_us":220,"kind":"analysis_pi_half","phases_rad":[0,1.5708,3.1416,4.7124]}],
                "transfer":{"start_us":10,"depth2_uK":300}}"#,
        )
        .unwrap();
        let t = s.transfer().unwrap();
        assert!((t.ramp_duration - 20e-6).abs() < 1e-18);
        assert!((t.hold_duration - 160e-6).abs() < 1e-18);
    }

    #[test]
    fn malformed_sequences_are_rejected() {
        let bad = [
            r#"{"events":[{"time_us":0,"kind":"pi"},{"time_us":5,"kind":"analysis_pi_half"}]}"#,
            r#"{"events":[{"time_us":0,"kind":"pi_half"},{"time_us":5,"kind":"pi"}]}"#,
            r#"{"events":[{"time_us":0,"kind":"pi_half"},{"time_us":2,"kind":"pi"},{"time_us":3,"kind":"pi"},{"time_us":5,"kind":"analysis_pi_half"}]}"#,
            r#"{"events":[{"time_us":5,"kind":"pi_half"},{"time_us":5,"kind":"analysis_pi_half"}]}"#,
            r#"{"events":[{"time_us":0,"kind":"pi_half","phases_rad":[1]},{"time_us":5,"kind":"analysis_pi_half"}]}"#,
            r#"{"events":[], "extra": 1}"#,
            r#"{"events":[{"time_us":0,"kind":"pi_half"},{"time_us":5,"kind":"analysis_pi_half","phases_rad":[0,0.1,0.2,0.3]}]}"#,
        ];
        for b in bad {
            assert!(PulseSequence::from_json(b).is_err(), "{b}");
        }
        assert!(matches!(PulseSequence::from_json("{"), Err(SimError::Parse { .. })));
    }
}
