//! Symbolic enumeration of coherent emission pathways.
//!
//! A pathway is a chain of optical pulses that carries one coherence
//! `|ket⟩⟨bra|` from the pulse that creates it to an emitting optical
//! coherence. Each pulse in the chain moves exactly one leg of the coherence
//! along its transition (a two-pulse echo's refocusing pulse moves both).
//! From the chain we get:
//!
//! * the emission time, by requiring the optical inhomogeneous phase to
//!   vanish (segments with the excited level on the ket accumulate `-Δ`,
//!   those with it on the bra `+Δ`, spin segments nothing);
//! * the emission direction, by tracking the spatial phase each pulse writes
//!   onto the legs it moves;
//! * the Stark phase, from which optical segments the Stark pulses land in.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::scheme::{Band, DetuningTerms, LevelScheme};
use crate::sequence::{Direction, PulseRole, StarkPulse, ValidatedSequence};
use crate::units;

/// Pathways below this silencing factor are treated as suppressed.
pub const DETECTABLE_SILENCING: f64 = 0.1;
/// Pathways driven by less population than this are treated as absent.
pub const DETECTABLE_SOURCE: f64 = 0.01;
const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathwayKind {
    #[serde(rename = "SE")]
    StarkEcho,
    #[serde(rename = "4LE")]
    FourLevelEcho,
    #[serde(rename = "2PE")]
    TwoPulseEcho,
    #[serde(rename = "FID")]
    FreeInduction,
}

impl fmt::Display for PathwayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathwayKind::StarkEcho => "SE",
            PathwayKind::FourLevelEcho => "4LE",
            PathwayKind::TwoPulseEcho => "2PE",
            PathwayKind::FreeInduction => "FID",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseTerm {
    pub pulse: usize,
    pub sign: i8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathwayFlag {
    /// `|Σ sign·direction| ≠ 1`: no propagating wave vector.
    NotPhaseMatched,
    /// Emission before the first pulse or after the detection window.
    OutsideSequence,
    /// Emission coincides with an optical pulse.
    DuringPulse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoPathway {
    pub kind: PathwayKind,
    pub label: String,
    /// Pulses of the chain in time order.
    pub chain: Vec<usize>,
    /// Signed pulse combination; a pulse entering twice (2PE) is listed twice.
    pub pulse_terms: Vec<PulseTerm>,
    pub emission_time_us: f64,
    /// `Σ sign · direction`; ±1 for a phase-matched pathway.
    pub direction_sum: i32,
    pub stark_relative_phase_rad: f64,
    pub silencing_factor: f64,
    pub emission_transition: String,
    /// Population difference driving the pathway (1 for signal pathways).
    pub source_weight: f64,
    pub flags: Vec<PathwayFlag>,
}

impl EchoPathway {
    pub fn emission_direction(&self) -> Option<Direction> {
        Direction::from_sign(self.direction_sum)
    }

    pub fn is_phase_matched(&self) -> bool {
        self.direction_sum.abs() == 1
    }

    /// Phase matched, inside the sequence, not silenced and actually driven.
    pub fn is_detectable(&self) -> bool {
        self.flags.is_empty()
            && self.silencing_factor > DETECTABLE_SILENCING
            && self.source_weight > DETECTABLE_SOURCE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_us: f64,
    pub end_us: f64,
    pub ket: usize,
    pub bra: usize,
    pub ket_band: Band,
    pub bra_band: Band,
}

impl Segment {
    pub fn is_optical(&self) -> bool {
        self.ket_band != self.bra_band
    }

    /// +1 when the excited level sits on the ket, −1 on the bra, 0 for spin.
    fn optical_sign(&self) -> i32 {
        match (self.ket_band, self.bra_band) {
            (Band::Excited, Band::Ground) => 1,
            (Band::Ground, Band::Excited) => -1,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTrace {
    pub segments: Vec<Segment>,
}

impl CoherenceTrace {
    pub fn end_us(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end_us)
    }
}

/// Which state the first pulse of a chain acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Origin {
    /// Population in the lower level of the first pulse; the first pulse
    /// creates `|upper⟩⟨lower|`.
    Population,
}

/// Result of following a chain of pulses.
#[derive(Clone, Debug)]
struct Bookkeeping {
    /// Coherence after each chain pulse.
    legs: Vec<(usize, usize)>,
    /// Per chain pulse, the weight of its time in the rephasing condition
    /// (`None` if the final coherence is not optical).
    time_weights: Option<Vec<i32>>,
    /// Per chain pulse, the weight of its wave vector in the emitted field.
    k_weights: Option<Vec<i32>>,
}

fn follow_chain(
    seq: &ValidatedSequence,
    scheme: &LevelScheme,
    chain: &[usize],
    _origin: Origin,
) -> Result<Bookkeeping> {
    let first = *chain.first().ok_or_else(|| Error::input("empty pathway chain"))?;
    if let Some(&p) = chain.iter().find(|&&p| p >= seq.pulses().len()) {
        return Err(Error::input(format!("pulse index {p} out of range")));
    }
    if chain.windows(2).any(|w| seq.pulses()[w[1]].time_us < seq.pulses()[w[0]].time_us) {
        return Err(Error::input("pathway chain is not in time order"));
    }
    let p0 = seq.resolved(first);
    let mut ket = p0.upper;
    let mut bra = p0.lower;
    // spatial phase coefficients on ρ_{ket,bra}
    let mut k_coeff = vec![0i32; chain.len()];
    k_coeff[0] = 1;
    let mut legs = vec![(ket, bra)];

    for (pos, &p) in chain.iter().enumerate().skip(1) {
        let r = seq.resolved(p);
        let on = |lvl: usize| lvl == r.lower || lvl == r.upper;
        let other = |lvl: usize| if lvl == r.lower { r.upper } else { r.lower };
        let raises = |lvl: usize| lvl == r.lower;
        match (on(ket), on(bra)) {
            (true, false) => {
                k_coeff[pos] += if raises(ket) { 1 } else { -1 };
                ket = other(ket);
            }
            (false, true) => {
                k_coeff[pos] += if raises(bra) { -1 } else { 1 };
                bra = other(bra);
            }
            (true, true) if ket != bra => {
                k_coeff[pos] += if raises(ket) { 1 } else { -1 };
                k_coeff[pos] += if raises(bra) { -1 } else { 1 };
                std::mem::swap(&mut ket, &mut bra);
            }
            _ => {
                return Err(Error::input(format!(
                    "pulse {} on '{}' does not act on the coherence |{}⟩⟨{}|",
                    seq.label(p),
                    seq.pulses()[p].transition,
                    scheme.levels[ket].id,
                    scheme.levels[bra].id
                )))
            }
        }
        legs.push((ket, bra));
    }

    let sign_of = |(k, b): (usize, usize)| match (scheme.band_of(k), scheme.band_of(b)) {
        (Band::Excited, Band::Ground) => 1,
        (Band::Ground, Band::Excited) => -1,
        _ => 0,
    };
    let signs: Vec<i32> = legs.iter().map(|&l| sign_of(l)).collect();
    let last = *signs.last().expect("non-empty");
    let (time_weights, k_weights) = if last == 0 {
        (None, None)
    } else {
        let tw = (0..signs.len())
            .map(|i| {
                let prev = if i == 0 { 0 } else { signs[i - 1] };
                (signs[i] - prev) / last
            })
            .collect();
        // emitted field ∝ ρ_{e,g}; conjugate if the final ket is the ground level
        let kw = k_coeff.iter().map(|&c| c * last).collect();
        (Some(tw), Some(kw))
    };
    Ok(Bookkeeping {
        legs,
        time_weights,
        k_weights,
    })
}

fn terms_from_weights(chain: &[usize], weights: &[i32]) -> Vec<PulseTerm> {
    let mut terms = Vec::new();
    for (&p, &w) in chain.iter().zip(weights) {
        let sign = w.signum() as i8;
        for _ in 0..w.unsigned_abs() {
            terms.push(PulseTerm { pulse: p, sign });
        }
    }
    terms
}

/// Emission time and `Σ sign·direction` of a signed pulse combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub time_us: f64,
    pub direction_sum: i32,
}

impl Kinematics {
    pub fn direction(&self) -> Option<Direction> {
        Direction::from_sign(self.direction_sum)
    }

    pub fn is_phase_matched(&self) -> bool {
        self.direction_sum.abs() == 1
    }
}

pub fn emission_kinematics(pathway: &EchoPathway, seq: &ValidatedSequence) -> Result<Kinematics> {
    kinematics_of_terms(&pathway.pulse_terms, seq)
}

pub fn kinematics_of_terms(terms: &[PulseTerm], seq: &ValidatedSequence) -> Result<Kinematics> {
    let pulses = seq.pulses();
    let mut time = 0.0;
    let mut dir = 0;
    for t in terms {
        let p = pulses
            .get(t.pulse)
            .ok_or_else(|| Error::input(format!("pulse index {} not in sequence", t.pulse)))?;
        time += t.sign as f64 * p.time_us;
        dir += t.sign as i32 * p.direction.sign();
    }
    Ok(Kinematics {
        time_us: time,
        direction_sum: dir,
    })
}

/// Bra/ket occupation of every inter-pulse interval of a pathway, ending on
/// the emitting coherence.
///
/// The last segment ends at the emission time. A free-induction decay has no
/// rephasing instant, so its single segment runs to the end of the detection
/// window instead (or to the pulse itself if the window is earlier).
pub fn trace_coherence(
    seq: &ValidatedSequence,
    pathway: &EchoPathway,
    scheme: &LevelScheme,
) -> Result<CoherenceTrace> {
    let book = follow_chain(seq, scheme, &pathway.chain, Origin::Population)?;
    let end = observation_end(seq, pathway.kind, pathway.emission_time_us);
    Ok(build_trace(seq, scheme, &pathway.chain, &book, end))
}

fn observation_end(seq: &ValidatedSequence, kind: PathwayKind, emission: f64) -> f64 {
    match kind {
        PathwayKind::FreeInduction => emission.max(seq.sequence().detection_window_us.1),
        _ => emission,
    }
}

fn build_trace(
    seq: &ValidatedSequence,
    scheme: &LevelScheme,
    chain: &[usize],
    book: &Bookkeeping,
    end: f64,
) -> CoherenceTrace {
    let times: Vec<f64> = chain.iter().map(|&p| seq.pulses()[p].time_us).collect();
    let segments = book
        .legs
        .iter()
        .enumerate()
        .map(|(i, &(ket, bra))| Segment {
            start_us: times[i],
            end_us: if i + 1 < times.len() { times[i + 1] } else { end },
            ket,
            bra,
            ket_band: scheme.band_of(ket),
            bra_band: scheme.band_of(bra),
        })
        .collect();
    CoherenceTrace { segments }
}

/// Class-to-class relative Stark phase (rad) and its RMS spread from field
/// inhomogeneity.
///
/// A Stark pulse counts when it falls inside an optical segment and before
/// the end of the trace; a pulse exactly at an optical pulse time belongs to
/// the segment that pulse starts.
pub fn stark_phase_and_spread(trace: &CoherenceTrace, stark: &[StarkPulse], kappa_khz_per_v_cm: f64) -> (f64, f64) {
    let mut phase = 0.0;
    let mut spread = 0.0;
    for s in stark {
        let Some(seg) = trace
            .segments
            .iter()
            .find(|seg| s.time_us >= seg.start_us && s.time_us < seg.end_us)
        else {
            continue;
        };
        let sign = seg.optical_sign() as f64;
        let phi = sign * units::stark_phase(kappa_khz_per_v_cm, s.area_v_us_per_cm);
        phase += phi;
        spread += phi * s.sigma_e;
    }
    (2.0 * phase, (2.0 * spread).abs())
}

pub fn stark_relative_phase(trace: &CoherenceTrace, stark: &[StarkPulse], kappa_khz_per_v_cm: f64) -> f64 {
    stark_phase_and_spread(trace, stark, kappa_khz_per_v_cm).0
}

/// Fraction of collective emission surviving a class-to-class phase
/// `relative_phase`, with a Gaussian spread `sigma_e` of the Stark area.
pub fn silencing_factor(relative_phase: f64, sigma_e: f64) -> f64 {
    silencing_with_spread(relative_phase, sigma_e * relative_phase)
}

fn silencing_with_spread(relative_phase: f64, spread: f64) -> f64 {
    let w = (-(spread * spread) / 2.0).exp();
    let c = (relative_phase / 2.0).cos();
    (w * c * c + (1.0 - w) / 2.0).clamp(0.0, 1.0)
}

/// Intensity decay of a pathway from inhomogeneous spin broadening (Gaussian
/// in the accumulated spin exposure) and homogeneous optical decay
/// (amplitude rate 2πγ on optical segments).
pub fn pathway_decay_factor(
    seq: &ValidatedSequence,
    pathway: &EchoPathway,
    scheme: &LevelScheme,
    material: &MaterialParams,
) -> Result<f64> {
    let trace = trace_coherence(seq, pathway, scheme)?;
    let terms = scheme.detuning_terms();
    let widths: Vec<f64> = scheme
        .spin_transitions()
        .map(|t| scheme.spin_width_khz(t, material))
        .collect();
    let (exposure, optical_time) = spin_exposure(&trace, &terms, widths.len());
    let mut log = 0.0;
    for (x, w) in exposure.iter().zip(&widths) {
        let c = units::cycles(*w, *x);
        log -= std::f64::consts::PI.powi(2) * c * c / (2.0 * LN_2);
    }
    log -= 2.0 * units::khz_to_rad_per_us(material.gamma_khz) * optical_time;
    Ok(log.exp())
}

/// Per spin transition, the signed time the coherence spends exposed to its
/// detuning; plus total time spent on optical coherences.
fn spin_exposure(trace: &CoherenceTrace, terms: &[DetuningTerms], n_spin: usize) -> (Vec<f64>, f64) {
    let mut exposure = vec![0.0; n_spin];
    let mut optical = 0.0;
    for seg in &trace.segments {
        let dur = seg.end_us - seg.start_us;
        for k in 0..n_spin {
            exposure[k] += (terms[seg.ket].spin[k] - terms[seg.bra].spin[k]) * dur;
        }
        if seg.is_optical() {
            optical += dur;
        }
    }
    (exposure, optical)
}

/// Population of each level just before every optical pulse, propagating
/// the initial populations through the pulses as incoherent transfers with
/// probability sin²(area/2).
/// Signal pulses are treated as weak probes and leave populations alone.
fn populations_before_pulses(seq: &ValidatedSequence, initial: &[f64]) -> Vec<Vec<f64>> {
    let mut pop = initial.to_vec();
    let mut out = Vec::with_capacity(seq.pulses().len());
    for (i, p) in seq.pulses().iter().enumerate() {
        out.push(pop.clone());
        if p.role == PulseRole::Signal {
            continue;
        }
        let r = seq.resolved(i);
        let t = (p.area_rad / 2.0).sin().powi(2);
        let (lo, up) = (pop[r.lower], pop[r.upper]);
        pop[r.lower] = (1.0 - t) * lo + t * up;
        pop[r.upper] = (1.0 - t) * up + t * lo;
    }
    out
}

/// All population in the lower level of the first signal pulse.
pub fn default_populations(seq: &ValidatedSequence, scheme: &LevelScheme) -> Vec<f64> {
    let mut pop = vec![0.0; scheme.levels.len()];
    let lower = seq
        .signal_indices()
        .first()
        .map(|&s| seq.resolved(s).lower)
        .unwrap_or(0);
    pop[lower] = 1.0;
    pop
}

pub fn enumerate_pathways(
    seq: &ValidatedSequence,
    scheme: &LevelScheme,
    material: &MaterialParams,
) -> Vec<EchoPathway> {
    let pop = default_populations(seq, scheme);
    enumerate_pathways_with(seq, scheme, material, &pop)
}

/// Enumerates the Stark echo, every rephasing four-level echo, every
/// same-transition two-pulse echo and one free-induction decay per pulse.
///
/// Chains that do not act consistently on the coherence or do not rephase
/// after their last pulse are not pathways and are skipped. Pathways that do
/// exist but emit outside the sequence, during a pulse, or without a
/// propagating wave vector are kept and flagged. Output is sorted by
/// emission time, then label.
pub fn enumerate_pathways_with(
    seq: &ValidatedSequence,
    scheme: &LevelScheme,
    material: &MaterialParams,
    initial_populations: &[f64],
) -> Vec<EchoPathway> {
    let n = seq.pulses().len();
    let pops = populations_before_pulses(seq, initial_populations);
    let mut candidates: Vec<(PathwayKind, Vec<usize>, f64)> = Vec::new();

    let is_stage = |i: usize| matches!(seq.pulses()[i].role, PulseRole::Control | PulseRole::ReadoutHalf);
    for s in seq.signal_indices() {
        let controls: Vec<usize> = (s + 1..n)
            .filter(|&i| seq.pulses()[i].role == PulseRole::Control)
            .collect();
        let halves: Vec<usize> = (s + 1..n)
            .filter(|&i| seq.pulses()[i].role == PulseRole::ReadoutHalf)
            .collect();
        if !controls.is_empty() {
            if halves.is_empty() {
                candidates.push((PathwayKind::StarkEcho, chain_of(s, &controls, None), 1.0));
            }
            for &h in &halves {
                candidates.push((PathwayKind::StarkEcho, chain_of(s, &controls, Some(h)), 1.0));
            }
        }
        let stages: Vec<usize> = (s + 1..n).filter(|&i| is_stage(i)).collect();
        for (a, &m) in stages.iter().enumerate() {
            for &nn in &stages[a + 1..] {
                candidates.push((PathwayKind::FourLevelEcho, vec![s, m, nn], 1.0));
            }
        }
    }
    for m in 0..n {
        let weight = {
            let r = seq.resolved(m);
            (pops[m][r.lower] - pops[m][r.upper]).abs()
        };
        for nn in m + 1..n {
            if seq.pulses()[m].transition == seq.pulses()[nn].transition {
                candidates.push((PathwayKind::TwoPulseEcho, vec![m, nn], weight));
            }
        }
        let weight = if seq.pulses()[m].role == PulseRole::Signal { 1.0 } else { weight };
        candidates.push((PathwayKind::FreeInduction, vec![m], weight));
    }

    let mut out: Vec<EchoPathway> = candidates
        .into_iter()
        .filter_map(|(kind, chain, weight)| build_pathway(seq, scheme, material, kind, chain, weight))
        .collect();
    out.sort_by(|a, b| {
        a.emission_time_us
            .total_cmp(&b.emission_time_us)
            .then_with(|| a.label.cmp(&b.label))
    });
    out
}

fn chain_of(signal: usize, controls: &[usize], half: Option<usize>) -> Vec<usize> {
    let mut c = vec![signal];
    c.extend_from_slice(controls);
    if let Some(h) = half {
        c.push(h);
        c.sort_unstable();
    }
    c
}

fn build_pathway(
    seq: &ValidatedSequence,
    scheme: &LevelScheme,
    material: &MaterialParams,
    kind: PathwayKind,
    chain: Vec<usize>,
    source_weight: f64,
) -> Option<EchoPathway> {
    let book = follow_chain(seq, scheme, &chain, Origin::Population).ok()?;
    let (tw, kw) = (book.time_weights.as_ref()?, book.k_weights.as_ref()?);
    debug_assert_eq!(tw, kw, "time and wave-vector bookkeeping disagree");
    let terms = terms_from_weights(&chain, tw);
    let kin = kinematics_of_terms(&terms, seq).ok()?;
    let last_pulse = seq.pulses()[*chain.last()?].time_us;
    if kind != PathwayKind::FreeInduction && kin.time_us <= last_pulse + TIME_EPS {
        return None;
    }
    // a genuine echo has at least one refocusing sign change
    if kind == PathwayKind::FourLevelEcho && tw.iter().all(|&w| w >= 0) {
        return None;
    }

    let (ket, bra) = *book.legs.last()?;
    let emission_transition = scheme.optical_between(ket, bra)?.name.clone();
    let end = observation_end(seq, kind, kin.time_us);
    let trace = build_trace(seq, scheme, &chain, &book, end);
    let (phase, spread) = stark_phase_and_spread(&trace, seq.stark(), material.kappa_khz_per_v_cm);

    let mut flags = Vec::new();
    if !kin.is_phase_matched() {
        flags.push(PathwayFlag::NotPhaseMatched);
    }
    let (start, stop) = seq.span_us();
    if kin.time_us < start - TIME_EPS || kin.time_us > stop + TIME_EPS {
        flags.push(PathwayFlag::OutsideSequence);
    }
    if kind != PathwayKind::FreeInduction
        && seq
            .pulses()
            .iter()
            .any(|p| (p.time_us - kin.time_us).abs() <= TIME_EPS)
    {
        flags.push(PathwayFlag::DuringPulse);
    }

    let label = format!(
        "{}_{}",
        kind,
        chain.iter().map(|&p| seq.label(p)).collect::<Vec<_>>().join(
            if chain.iter().all(|&p| seq.label(p).chars().count() == 1) { "" } else { "." }
        )
    );
    Some(EchoPathway {
        kind,
        label,
        chain,
        pulse_terms: terms,
        emission_time_us: kin.time_us,
        direction_sum: kin.direction_sum,
        stark_relative_phase_rad: phase,
        silencing_factor: silencing_with_spread(phase, spread),
        emission_transition,
        source_weight,
        flags,
    })
}
