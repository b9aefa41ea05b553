//! Pulse sequence data model, validation and the forward/backward memory
//! sequence builders.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};
use crate::scheme::{LevelScheme, TransitionKind};

/// Propagation direction along the crystal axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> i32 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }

    pub fn from_sign(s: i32) -> Option<Self> {
        match s {
            1 => Some(Direction::Forward),
            -1 => Some(Direction::Backward),
            _ => None,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

impl TryFrom<i8> for Direction {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        Direction::from_sign(v as i32).ok_or_else(|| format!("direction must be +1 or -1, got {v}"))
    }
}

impl From<Direction> for i8 {
    fn from(d: Direction) -> i8 {
        d.sign() as i8
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.sign())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseRole {
    Signal,
    Control,
    ReadoutHalf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalPulse {
    pub time_us: f64,
    pub transition: String,
    /// Rotation angle on the addressed transition, rad.
    pub area_rad: f64,
    #[serde(default)]
    pub phase_rad: f64,
    pub direction: Direction,
    pub role: PulseRole,
    /// Short tag used in pathway labels ("0", "2", ...). Defaults to the
    /// pulse's position in the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarkPulse {
    pub time_us: f64,
    /// Field amplitude × duration, V·µs/cm.
    pub area_v_us_per_cm: f64,
    /// Fractional RMS spread of the field over the illuminated volume.
    #[serde(default)]
    pub sigma_e: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    pub optical: Vec<OpticalPulse>,
    #[serde(default)]
    pub stark: Vec<StarkPulse>,
    pub detection_window_us: (f64, f64),
    pub detection_direction: Direction,
}

/// What the sequence is meant to store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceMode {
    /// Single-signal memory sequence.
    #[default]
    Memory,
    /// Time-bin qubit: one or two signal pulses (early/late).
    TimeBin,
}

/// Level indices touched by one optical pulse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResolvedPulse {
    pub lower: usize,
    pub upper: usize,
}

/// A sequence whose cross-references have been checked against a scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedSequence {
    seq: PulseSequence,
    resolved: Vec<ResolvedPulse>,
    mode: SequenceMode,
}

impl ValidatedSequence {
    pub fn sequence(&self) -> &PulseSequence {
        &self.seq
    }

    pub fn mode(&self) -> SequenceMode {
        self.mode
    }

    pub fn pulses(&self) -> &[OpticalPulse] {
        &self.seq.optical
    }

    pub fn stark(&self) -> &[StarkPulse] {
        &self.seq.stark
    }

    pub fn resolved(&self, i: usize) -> ResolvedPulse {
        self.resolved[i]
    }

    pub fn label(&self, i: usize) -> String {
        self.seq.optical[i].label.clone().unwrap_or_else(|| i.to_string())
    }

    pub fn signal_indices(&self) -> Vec<usize> {
        self.pulse_indices(PulseRole::Signal)
    }

    pub fn pulse_indices(&self, role: PulseRole) -> Vec<usize> {
        (0..self.seq.optical.len())
            .filter(|&i| self.seq.optical[i].role == role)
            .collect()
    }

    /// First optical pulse to end of the detection window.
    pub fn span_us(&self) -> (f64, f64) {
        let start = self.seq.optical.first().map_or(0.0, |p| p.time_us);
        (start, self.seq.detection_window_us.1)
    }

    /// Smallest gap between consecutive optical pulses.
    pub fn shortest_gap_us(&self) -> Option<f64> {
        self.seq
            .optical
            .windows(2)
            .map(|w| w[1].time_us - w[0].time_us)
            .reduce(f64::min)
    }

    pub fn into_inner(self) -> PulseSequence {
        self.seq
    }
}

pub fn validate_sequence(seq: &PulseSequence, scheme: &LevelScheme) -> Result<ValidatedSequence> {
    validate_sequence_with(seq, scheme, SequenceMode::Memory)
}

/// Checks every cross-reference and ordering constraint, collecting all
/// problems before failing.
pub fn validate_sequence_with(
    seq: &PulseSequence,
    scheme: &LevelScheme,
    mode: SequenceMode,
) -> Result<ValidatedSequence> {
    let mut diag = Vec::new();
    let mut resolved = Vec::with_capacity(seq.optical.len());

    for (i, p) in seq.optical.iter().enumerate() {
        if !(p.time_us.is_finite() && p.time_us >= 0.0) {
            diag.push(format!("pulse {i}: time must be finite and >= 0"));
        }
        if !(p.area_rad > 0.0 && p.area_rad <= TAU + 1e-12) {
            diag.push(format!("pulse {i}: area {} outside (0, 2π]", p.area_rad));
        }
        match scheme.transition(&p.transition) {
            None => diag.push(format!("pulse {i}: unknown transition '{}'", p.transition)),
            Some(t) if t.kind != TransitionKind::Optical => {
                diag.push(format!("pulse {i}: transition '{}' is not optical", p.transition))
            }
            Some(_) => {
                let (lower, upper) = scheme.transition_levels(&p.transition).expect("checked");
                resolved.push(ResolvedPulse { lower, upper });
            }
        }
    }
    if seq.optical.windows(2).any(|w| w[1].time_us <= w[0].time_us) {
        diag.push("non-monotone times: optical pulses must be strictly ordered".into());
    }
    if seq.stark.windows(2).any(|w| w[1].time_us < w[0].time_us) {
        diag.push("non-monotone times: Stark pulses must be ordered".into());
    }
    for (i, s) in seq.stark.iter().enumerate() {
        if !(s.time_us.is_finite() && s.time_us >= 0.0) {
            diag.push(format!("stark pulse {i}: time must be finite and >= 0"));
        }
        if !(s.area_v_us_per_cm >= 0.0) {
            diag.push(format!("stark pulse {i}: area must be >= 0"));
        }
        if !(s.sigma_e >= 0.0) {
            diag.push(format!("stark pulse {i}: sigma_e must be >= 0"));
        }
    }
    let (ws, we) = seq.detection_window_us;
    if !(ws < we) {
        diag.push(format!("zero-length detection window ({ws}, {we})"));
    }
    let signals = seq.optical.iter().filter(|p| p.role == PulseRole::Signal).count();
    match (mode, signals) {
        (_, 0) => diag.push("no signal pulse".into()),
        (SequenceMode::Memory, n) if n > 1 => {
            diag.push(format!("memory sequence needs exactly one signal pulse, found {n}"))
        }
        (SequenceMode::TimeBin, n) if n > 2 => {
            diag.push(format!("time-bin sequence takes at most two signal pulses, found {n}"))
        }
        _ => {}
    }

    if diag.is_empty() {
        Ok(ValidatedSequence {
            seq: seq.clone(),
            resolved,
            mode,
        })
    } else {
        Err(Error::InvalidSequence(diag))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Forward,
    Backward,
}

/// Event times of the memory protocol, µs. `t4` (intermediate 4LE) and `t8`
/// (Stark echo) are derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timings {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t5: f64,
    pub t6: f64,
    pub t7: f64,
}

impl Timings {
    pub fn echo_time(&self) -> f64 {
        self.t0 - self.t2 - self.t3 + self.t5 + self.t6
    }

    fn ordered(&self) -> [(&'static str, f64); 7] {
        [
            ("t0", self.t0),
            ("t1", self.t1),
            ("t2", self.t2),
            ("t3", self.t3),
            ("t5", self.t5),
            ("t6", self.t6),
            ("t7", self.t7),
        ]
    }
}

/// Knobs of the memory-sequence builder beyond the event times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuilderOptions {
    pub signal_transition: String,
    /// Transitions of the control pulses at t2, t3, t5, t6.
    pub control_transitions: Option<[String; 4]>,
    /// Exchange the transitions of the t5 and t6 controls (the experimental
    /// backward configuration).
    pub swap_late_controls: bool,
    pub signal_area_rad: f64,
    pub control_area_rad: f64,
    pub stark_area_v_us_per_cm: f64,
    pub sigma_e: f64,
    /// Emit the Stark pulse at t1 and/or t7.
    pub stark_at_t1: bool,
    pub stark_at_t7: bool,
    pub detection_window_us: Option<(f64, f64)>,
}

impl Default for BuilderOptions {
    fn default() -> Self {
        BuilderOptions {
            signal_transition: "a".into(),
            control_transitions: None,
            swap_late_controls: false,
            signal_area_rad: PI / 2.0,
            control_area_rad: PI,
            stark_area_v_us_per_cm: 9.25,
            sigma_e: 0.0,
            stark_at_t1: true,
            stark_at_t7: true,
            detection_window_us: None,
        }
    }
}

impl BuilderOptions {
    fn controls(&self) -> [String; 4] {
        let mut c = self
            .control_transitions
            .clone()
            .unwrap_or_else(|| ["b".into(), "d".into(), "b".into(), "d".into()]);
        if self.swap_late_controls {
            c.swap(2, 3);
        }
        c
    }
}

pub fn paper_sequence(kind: SequenceKind, timings: &Timings, scheme: &LevelScheme) -> Result<ValidatedSequence> {
    paper_sequence_with(kind, timings, scheme, &BuilderOptions::default())
}

/// Builds the signal + four-control + two-Stark memory sequence.
///
/// Backward retrieval reverses the t5 control; everything else is shared
/// with the forward sequence.
pub fn paper_sequence_with(
    kind: SequenceKind,
    timings: &Timings,
    scheme: &LevelScheme,
    opts: &BuilderOptions,
) -> Result<ValidatedSequence> {
    let ts = timings.ordered();
    if let Some(w) = ts.windows(2).find(|w| !(w[1].1 > w[0].1)) {
        return Err(Error::InvalidSequence(vec![format!(
            "timings must increase: {} = {} is not after {} = {}",
            w[1].0, w[1].1, w[0].0, w[0].1
        )]));
    }
    let t8 = timings.echo_time();
    if timings.t5 - timings.t3 < timings.t2 - timings.t0 || t8 <= timings.t6 {
        return Err(Error::InvalidSequence(vec![format!(
            "echo at {t8} µs would precede the last control at t6 = {} µs",
            timings.t6
        )]));
    }
    if opts.stark_at_t7 && t8 <= timings.t7 {
        return Err(Error::InvalidSequence(vec![format!(
            "echo at {t8} µs precedes the rephasing Stark pulse at t7 = {} µs",
            timings.t7
        )]));
    }

    let controls = opts.controls();
    let t5_dir = match kind {
        SequenceKind::Forward => Direction::Forward,
        SequenceKind::Backward => Direction::Backward,
    };
    let control = |time: f64, tr: &str, dir: Direction, label: &str| OpticalPulse {
        time_us: time,
        transition: tr.into(),
        area_rad: opts.control_area_rad,
        phase_rad: 0.0,
        direction: dir,
        role: PulseRole::Control,
        label: Some(label.into()),
    };
    let optical = vec![
        OpticalPulse {
            time_us: timings.t0,
            transition: opts.signal_transition.clone(),
            area_rad: opts.signal_area_rad,
            phase_rad: 0.0,
            direction: Direction::Forward,
            role: PulseRole::Signal,
            label: Some("0".into()),
        },
        control(timings.t2, &controls[0], Direction::Forward, "2"),
        control(timings.t3, &controls[1], Direction::Forward, "3"),
        control(timings.t5, &controls[2], t5_dir, "5"),
        control(timings.t6, &controls[3], Direction::Forward, "6"),
    ];
    let stark_pulse = |time: f64| StarkPulse {
        time_us: time,
        area_v_us_per_cm: opts.stark_area_v_us_per_cm,
        sigma_e: opts.sigma_e,
    };
    let mut stark = Vec::new();
    if opts.stark_at_t1 {
        stark.push(stark_pulse(timings.t1));
    }
    if opts.stark_at_t7 {
        stark.push(stark_pulse(timings.t7));
    }
    let window = opts
        .detection_window_us
        .unwrap_or((timings.t7, t8 + (timings.t6 - timings.t0)));
    let seq = PulseSequence {
        optical,
        stark,
        detection_window_us: window,
        detection_direction: t5_dir,
    };
    validate_sequence(&seq, scheme)
}
