//! Stochastic ion-ensemble oracle.
//!
//! Each ion carries a small density matrix over the scheme's levels, a Stark
//! class, a spatial phase and static random detunings. Optical pulses are
//! instantaneous rotations, free evolution is applied analytically, and the
//! coherent sum of every optical coherence is recorded in the forward and
//! backward phase-matched modes. Nothing here knows about pathways, so the
//! record is an independent check on the symbolic bookkeeping.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI, TAU};

use crate::error::{Error, Result};
use crate::material::{FeatureShape, MaterialParams};
use crate::scheme::{Band, LevelScheme};
use crate::sequence::{Direction, PulseRole, ValidatedSequence};
use crate::units;

const TOL: f64 = 1e-9;
const MAX_BLOCKS: usize = 32;

/// Dense complex density matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn diagonal(pops: &[f64]) -> Self {
        let n = pops.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, &p) in pops.iter().enumerate() {
            data[i * n + i] = Complex64::new(p, 0.0);
        }
        DensityMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `ρ → U ρ U†` for a unitary acting on levels `(p, q)` only, given as
    /// `[[u_pp, u_pq], [u_qp, u_qq]]`.
    fn rotate(&mut self, p: usize, q: usize, u: [[Complex64; 2]; 2]) {
        let n = self.n;
        for j in 0..n {
            let (a, b) = (self.get(p, j), self.get(q, j));
            *self.at(p, j) = u[0][0] * a + u[0][1] * b;
            *self.at(q, j) = u[1][0] * a + u[1][1] * b;
        }
        for i in 0..n {
            let (a, b) = (self.get(i, p), self.get(i, q));
            *self.at(i, p) = a * u[0][0].conj() + b * u[0][1].conj();
            *self.at(i, q) = a * u[1][0].conj() + b * u[1][1].conj();
        }
    }

    /// Trace one, Hermitian, nonnegative populations and nonnegative 2×2
    /// principal minors, all within `tol`.
    pub fn check(&self, tol: f64) -> std::result::Result<(), String> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(format!("trace = {tr}"));
        }
        for i in 0..self.n {
            let d = self.get(i, i);
            if d.re < -tol || d.im.abs() > tol {
                return Err(format!("population ρ[{i}][{i}] = {d}"));
            }
            for j in i + 1..self.n {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if (a - b.conj()).norm() > tol {
                    return Err(format!("not Hermitian at ({i}, {j})"));
                }
                if d.re * self.get(j, j).re - a.norm_sqr() < -tol {
                    return Err(format!("negative minor at ({i}, {j})"));
                }
                if !a.re.is_finite() || !a.im.is_finite() {
                    return Err(format!("non-finite coherence at ({i}, {j})"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IonState {
    /// Stark class, +1 or −1.
    pub class: i8,
    /// k·z, uniform in [0, 2π).
    pub spatial_phase: f64,
    pub optical_detuning_khz: f64,
    /// One entry per spin transition of the scheme, in declaration order.
    pub spin_detunings_khz: Vec<f64>,
    /// Standard-normal draw scaling this ion's share of the Stark-field
    /// inhomogeneity.
    pub field_error: f64,
    pub state: DensityMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub seed: u64,
    pub ions: Vec<IonState>,
}

/// FWHM to standard deviation of a Gaussian.
fn fwhm_to_sigma(w: f64) -> f64 {
    w / (2.0 * (2.0 * LN_2).sqrt())
}

/// Populations in scheme order from a level-id map; absent levels are empty.
pub fn populations_from_map(scheme: &LevelScheme, map: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    let mut pops = vec![0.0; scheme.levels.len()];
    for (id, &p) in map {
        let i = scheme
            .level_index(id)
            .ok_or_else(|| Error::input(format!("initial population for unknown level '{id}'")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::input(format!("population of '{id}' must lie in [0, 1] (got {p})")));
        }
        pops[i] = p;
    }
    let sum: f64 = pops.iter().sum();
    if (sum - 1.0).abs() > TOL {
        return Err(Error::input(format!("initial populations sum to {sum}, not 1")));
    }
    Ok(pops)
}

/// Draws `n` ions. Ion `i` uses its own ChaCha stream `i` under key `seed`,
/// so the ensemble does not depend on how the work is split across threads.
/// Classes alternate +1, −1, +1, … for an exact 50/50 split.
pub fn sample_ensemble(
    params: &MaterialParams,
    scheme: &LevelScheme,
    n: usize,
    seed: u64,
    initial_populations: &BTreeMap<String, f64>,
) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::input("ensemble needs at least one ion"));
    }
    params.validate()?;
    let pops = populations_from_map(scheme, initial_populations)?;
    let widths: Vec<f64> = scheme
        .spin_transitions()
        .map(|t| fwhm_to_sigma(scheme.spin_width_khz(t, params)))
        .collect();
    let feature_khz = params.feature_width_mhz * units::MHZ_TO_KHZ;
    let rho0 = DensityMatrix::diagonal(&pops);
    let ions = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let spatial_phase = TAU * rng.random::<f64>();
            let g: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let optical_detuning_khz = match params.feature_shape {
                FeatureShape::Gaussian => g * fwhm_to_sigma(feature_khz),
                FeatureShape::Lorentzian => 0.5 * feature_khz * (PI * (u - 0.5)).tan(),
                FeatureShape::Square => feature_khz * (u - 0.5),
            };
            let spin_detunings_khz = widths
                .iter()
                .map(|&s| s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let field_error = rng.sample(StandardNormal);
            IonState {
                class: if i % 2 == 0 { 1 } else { -1 },
                spatial_phase,
                optical_detuning_khz,
                spin_detunings_khz,
                field_error,
                state: rho0.clone(),
            }
        })
        .collect();
    Ok(Ensemble { seed, ions })
}

/// How control pulses depart from their nominal area.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum ControlModel {
    /// Every pulse uses its declared area.
    #[default]
    Ideal,
    /// Control pulses transfer only a fraction `eta` of the population:
    /// their area becomes `2·asin(√eta)`.
    AngleError { eta: f64 },
}

impl ControlModel {
    fn area(&self, role: PulseRole, nominal: f64) -> f64 {
        match (self, role) {
            (ControlModel::AngleError { eta }, PulseRole::Control) => 2.0 * eta.sqrt().asin(),
            _ => nominal,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ControlModel::AngleError { eta } if !(*eta > 0.0 && *eta <= 1.0) => {
                Err(Error::input(format!("control efficiency must lie in (0, 1] (got {eta})")))
            }
            _ => Ok(()),
        }
    }
}

/// Uniform sampling grid `start, start + step, …` up to `end` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start_us: f64,
    pub end_us: f64,
    pub step_us: f64,
}

impl Grid {
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.end_us - self.start_us) / self.step_us + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start_us + k as f64 * self.step_us).collect()
    }

    fn validate(&self, seq: &ValidatedSequence) -> Result<()> {
        if !(self.step_us > 0.0 && self.step_us.is_finite()) {
            return Err(Error::input(format!("grid step must be positive (got {})", self.step_us)));
        }
        if !(self.end_us > self.start_us) {
            return Err(Error::input("grid end must follow its start"));
        }
        if let Some(gap) = seq.shortest_gap_us() {
            if self.step_us > gap / 10.0 + 1e-12 {
                return Err(Error::input(format!(
                    "grid step {} µs does not resolve the shortest pulse gap {gap} µs with 10 points",
                    self.step_us
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub transition: String,
    pub forward: Vec<Complex64>,
    pub backward: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub n_ions: usize,
    pub seed: u64,
    pub material: MaterialParams,
    pub control: ControlModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub times_us: Vec<f64>,
    pub detection_transition: String,
    pub channels: Vec<ChannelRecord>,
    pub meta: RecordMeta,
}

impl EmissionRecord {
    pub fn channel(&self, transition: &str) -> Option<&ChannelRecord> {
        self.channels.iter().find(|c| c.transition == transition)
    }

    fn detection(&self) -> &ChannelRecord {
        self.channel(&self.detection_transition).expect("detection channel recorded")
    }

    pub fn forward_amplitude(&self) -> &[Complex64] {
        &self.detection().forward
    }

    pub fn backward_amplitude(&self) -> &[Complex64] {
        &self.detection().backward
    }

    pub fn amplitude(&self, transition: &str, direction: Direction) -> Option<&[Complex64]> {
        self.channel(transition).map(|c| match direction {
            Direction::Forward => c.forward.as_slice(),
            Direction::Backward => c.backward.as_slice(),
        })
    }
}

/// Per-ion quantities used during propagation.
struct Precomputed {
    /// Level energies in rad/µs.
    energy: Vec<f64>,
}

struct Setup<'a> {
    seq: &'a ValidatedSequence,
    excited: Vec<bool>,
    channels: Vec<(usize, usize)>,
    events: Vec<(f64, Event)>,
    areas: Vec<f64>,
    optical_damping: f64,
    kappa: f64,
    times: Vec<f64>,
    step: f64,
    terms: Vec<crate::scheme::DetuningTerms>,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    Optical(usize),
    Stark(usize),
}

impl Setup<'_> {
    fn precompute(&self, ion: &IonState) -> Precomputed {
        let energy = self
            .terms
            .iter()
            .map(|t| {
                let khz = t.optical * ion.optical_detuning_khz
                    + t.spin.iter().zip(&ion.spin_detunings_khz).map(|(c, d)| c * d).sum::<f64>();
                units::khz_to_rad_per_us(khz)
            })
            .collect();
        Precomputed { energy }
    }

    fn evolve(&self, rho: &mut DensityMatrix, pre: &Precomputed, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let n = rho.dim();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut f = Complex64::from_polar(1.0, -(pre.energy[i] - pre.energy[j]) * dt);
                if self.excited[i] != self.excited[j] {
                    f *= (-self.optical_damping * dt).exp();
                }
                *rho.at(i, j) *= f;
            }
        }
    }

    fn apply(&self, rho: &mut DensityMatrix, ion: &IonState, event: Event) {
        match event {
            Event::Optical(k) => {
                let p = &self.seq.pulses()[k];
                let r = self.seq.resolved(k);
                let phi = p.direction.sign() as f64 * ion.spatial_phase + p.phase_rad;
                let (s, c) = (self.areas[k] / 2.0).sin_cos();
                let i = Complex64::i();
                let u = [
                    [Complex64::new(c, 0.0), -i * s * Complex64::from_polar(1.0, -phi)],
                    [-i * s * Complex64::from_polar(1.0, phi), Complex64::new(c, 0.0)],
                ];
                rho.rotate(r.lower, r.upper, u);
            }
            Event::Stark(k) => {
                let sp = &self.seq.stark()[k];
                let area = sp.area_v_us_per_cm * (1.0 + sp.sigma_e * ion.field_error);
                let phase = ion.class as f64 * units::stark_phase(self.kappa, area);
                let n = rho.dim();
                for a in 0..n {
                    for b in 0..n {
                        let shift = match (self.excited[a], self.excited[b]) {
                            (true, false) => -phase,
                            (false, true) => phase,
                            _ => continue,
                        };
                        *rho.at(a, b) *= Complex64::from_polar(1.0, shift);
                    }
                }
            }
        }
    }

    /// Adds this ion's emission at grid points `k0..k1` (all at or after
    /// `t_now`, before the next event) to the block buffers.
    fn record(
        &self,
        rho: &DensityMatrix,
        ion: &IonState,
        pre: &Precomputed,
        t_now: f64,
        k0: usize,
        k1: usize,
        out: &mut [Vec<Complex64>],
    ) {
        if k0 >= k1 {
            return;
        }
        let back = Complex64::from_polar(1.0, -ion.spatial_phase);
        let fwd_phase = back;
        let bwd_phase = back.conj();
        for (c, &(lo, up)) in self.channels.iter().enumerate() {
            let v0 = rho.get(up, lo);
            if v0.norm_sqr() == 0.0 {
                continue;
            }
            let rate = Complex64::new(-self.optical_damping, -(pre.energy[up] - pre.energy[lo]));
            let mut v = v0 * (rate * (self.times[k0] - t_now)).exp();
            let stepper = (rate * self.step).exp();
            let (fw, bw) = out.split_at_mut(2 * c + 1);
            let (fw, bw) = (&mut fw[2 * c], &mut bw[0]);
            for k in k0..k1 {
                fw[k] += v * fwd_phase;
                bw[k] += v * bwd_phase;
                v *= stepper;
            }
        }
    }

    fn run_ion(&self, ion: &IonState, out: &mut [Vec<Complex64>]) -> Result<()> {
        let pre = self.precompute(ion);
        let mut rho = ion.state.clone();
        let mut t = self.events.first().map_or(self.times[0], |e| e.0.min(self.times[0]));
        let mut k = 0;
        for &(te, ev) in &self.events {
            let k_end = k + self.times[k..].partition_point(|&x| x < te);
            self.record(&rho, ion, &pre, t, k, k_end, out);
            k = k_end;
            self.evolve(&mut rho, &pre, te - t);
            t = te;
            self.apply(&mut rho, ion, ev);
            if let Event::Optical(_) = ev {
                rho.check(TOL).map_err(|msg| {
                    Error::Invariant(format!("ion (class {}) after pulse at {te} µs: {msg}", ion.class))
                })?;
            }
        }
        self.record(&rho, ion, &pre, t, k, self.times.len(), out);
        Ok(())
    }
}

/// Propagates every ion through `seq` and records the coherent emission on
/// every optical transition.
pub fn propagate(
    seq: &ValidatedSequence,
    ensemble: &Ensemble,
    params: &MaterialParams,
    scheme: &LevelScheme,
    grid: &Grid,
    control: ControlModel,
) -> Result<EmissionRecord> {
    params.validate()?;
    control.validate()?;
    grid.validate(seq)?;
    if ensemble.ions.is_empty() {
        return Err(Error::input("empty ensemble"));
    }
    let n_levels = scheme.levels.len();
    if ensemble.ions.iter().any(|i| i.state.dim() != n_levels) {
        return Err(Error::input("ensemble was sampled for a different level scheme"));
    }
    let times = grid.times();
    let mut events: Vec<(f64, Event)> = seq
        .pulses()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.time_us, Event::Optical(i)))
        .chain(seq.stark().iter().enumerate().map(|(i, s)| (s.time_us, Event::Stark(i))))
        .collect();
    // stable: optical pulses come before Stark pulses at the same instant
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let channels: Vec<(usize, usize)> = scheme
        .optical_transitions()
        .map(|t| scheme.transition_levels(&t.name).expect("validated scheme"))
        .collect();
    let names: Vec<String> = scheme.optical_transitions().map(|t| t.name.clone()).collect();
    let setup = Setup {
        seq,
        excited: scheme.levels.iter().map(|l| l.band == Band::Excited).collect(),
        channels,
        events,
        areas: seq
            .pulses()
            .iter()
            .map(|p| control.area(p.role, p.area_rad))
            .collect(),
        optical_damping: units::khz_to_rad_per_us(params.gamma_khz),
        kappa: params.kappa_khz_per_v_cm,
        step: grid.step_us,
        terms: scheme.detuning_terms(),
        times,
    };

    let n = ensemble.ions.len();
    let block = n.div_ceil(MAX_BLOCKS).max(1);
    let width = setup.times.len();
    let buffers = || vec![vec![Complex64::new(0.0, 0.0); width]; 2 * setup.channels.len()];
    let partials: Vec<Result<Vec<Vec<Complex64>>>> = ensemble
        .ions
        .par_chunks(block)
        .map(|ions| {
            let mut out = buffers();
            for ion in ions {
                setup.run_ion(ion, &mut out)?;
            }
            Ok(out)
        })
        .collect();
    let mut total = buffers();
    for part in partials {
        let part = part?;
        for (acc, p) in total.iter_mut().zip(part) {
            for (a, b) in acc.iter_mut().zip(p) {
                *a += b;
            }
        }
    }
    let mut it = total.into_iter();
    let channels = names
        .into_iter()
        .map(|transition| ChannelRecord {
            transition,
            forward: it.next().expect("buffer"),
            backward: it.next().expect("buffer"),
        })
        .collect::<Vec<_>>();
    if channels
        .iter()
        .any(|c| c.forward.iter().chain(&c.backward).any(|v| !v.re.is_finite() || !v.im.is_finite()))
    {
        return Err(Error::Numerical("non-finite emission amplitude".into()));
    }
    let detection_transition = seq
        .signal_indices()
        .first()
        .map(|&s| seq.pulses()[s].transition.clone())
        .unwrap_or_else(|| seq.pulses()[0].transition.clone());
    Ok(EmissionRecord {
        times_us: setup.times,
        detection_transition,
        channels,
        meta: RecordMeta {
            n_ions: n,
            seed: ensemble.seed,
            material: params.clone(),
            control,
        },
    })
}

fn window_intensity(record: &EmissionRecord, amp: &[Complex64], window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    if !(b > a) {
        return Err(Error::input(format!("empty intensity window ({a}, {b})")));
    }
    let t = &record.times_us;
    let eps = 1e-9;
    if a < t[0] - eps || b > t[t.len() - 1] + eps {
        return Err(Error::input(format!(
            "window ({a}, {b}) µs lies outside the recorded grid ({}, {}) µs",
            t[0],
            t[t.len() - 1]
        )));
    }
    let lo = t.partition_point(|&x| x < a - eps);
    let hi = t.partition_point(|&x| x <= b + eps);
    if hi <= lo + 1 {
        return Err(Error::input(format!("window ({a}, {b}) µs holds fewer than two grid points")));
    }
    let mut sum = 0.0;
    for k in lo..hi - 1 {
        sum += 0.5 * (amp[k].norm_sqr() + amp[k + 1].norm_sqr()) * (t[k + 1] - t[k]);
    }
    let n = record.meta.n_ions as f64;
    Ok(sum / (n * n))
}

/// `∫|amplitude|² dt` over `window` on the detection transition, divided by
/// N² so that values are comparable across ensemble sizes.
pub fn echo_intensity(record: &EmissionRecord, window: (f64, f64), direction: Direction) -> Result<f64> {
    let amp = record
        .amplitude(&record.detection_transition, direction)
        .expect("detection channel");
    window_intensity(record, amp, window)
}

/// As [`echo_intensity`] on any recorded optical transition.
pub fn channel_intensity(
    record: &EmissionRecord,
    transition: &str,
    window: (f64, f64),
    direction: Direction,
) -> Result<f64> {
    let amp = record
        .amplitude(transition, direction)
        .ok_or_else(|| Error::input(format!("no recorded channel '{transition}'")))?;
    window_intensity(record, amp, window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub transition: String,
    pub direction: Direction,
    pub time_us: f64,
    /// `|amplitude|² / N²` at the peak.
    pub intensity: f64,
}

/// Local maxima of `|amplitude|²` on every channel and direction that reach
/// `rel_threshold` of the strongest sample in the whole record. Sorted by
/// time, then transition.
pub fn find_peaks(record: &EmissionRecord, rel_threshold: f64) -> Vec<Peak> {
    let n2 = (record.meta.n_ions as f64).powi(2);
    let global = record
        .channels
        .iter()
        .flat_map(|c| c.forward.iter().chain(&c.backward))
        .map(|v| v.norm_sqr())
        .fold(0.0, f64::max);
    let mut peaks = Vec::new();
    if global == 0.0 {
        return peaks;
    }
    for c in &record.channels {
        for (dir, amp) in [(Direction::Forward, &c.forward), (Direction::Backward, &c.backward)] {
            let p: Vec<f64> = amp.iter().map(|v| v.norm_sqr()).collect();
            for k in 0..p.len() {
                let left = if k == 0 { f64::NEG_INFINITY } else { p[k - 1] };
                let right = if k + 1 == p.len() { f64::NEG_INFINITY } else { p[k + 1] };
                if p[k] >= rel_threshold * global && p[k] > left && p[k] >= right {
                    peaks.push(Peak {
                        transition: c.transition.clone(),
                        direction: dir,
                        time_us: record.times_us[k],
                        intensity: p[k] / n2,
                    });
                }
            }
        }
    }
    peaks.sort_by(|a, b| {
        a.time_us
            .total_cmp(&b.time_us)
            .then_with(|| a.transition.cmp(&b.transition))
    });
    peaks
}

/// Ensemble size, seed, grid and pulse model for one oracle run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    pub n_ions: usize,
    pub seed: u64,
    pub grid_step_us: f64,
    /// Recorded interval; the detection window when absent.
    pub grid_us: Option<(f64, f64)>,
    pub control: ControlModel,
    /// Level id → population; everything in the signal's lower level when
    /// empty.
    pub initial_populations: BTreeMap<String, f64>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            n_ions: 10_000,
            seed: 1,
            grid_step_us: 0.01,
            grid_us: None,
            control: ControlModel::Ideal,
            initial_populations: BTreeMap::new(),
        }
    }
}

impl SimulationSettings {
    pub fn populations(&self, seq: &ValidatedSequence, scheme: &LevelScheme) -> BTreeMap<String, f64> {
        if !self.initial_populations.is_empty() {
            return self.initial_populations.clone();
        }
        let pops = crate::pathways::default_populations(seq, scheme);
        scheme
            .levels
            .iter()
            .zip(pops)
            .filter(|(_, p)| *p > 0.0)
            .map(|(l, p)| (l.id.clone(), p))
            .collect()
    }

    pub fn grid(&self, seq: &ValidatedSequence) -> Grid {
        let (start_us, end_us) = self.grid_us.unwrap_or(seq.sequence().detection_window_us);
        Grid {
            start_us,
            end_us,
            step_us: self.grid_step_us,
        }
    }
}

/// Samples an ensemble and propagates it in one call.
pub fn simulate(
    seq: &ValidatedSequence,
    scheme: &LevelScheme,
    params: &MaterialParams,
    settings: &SimulationSettings,
) -> Result<EmissionRecord> {
    let pops = settings.populations(seq, scheme);
    let ens = sample_ensemble(params, scheme, settings.n_ions, settings.seed, &pops)?;
    propagate(seq, &ens, params, scheme, &settings.grid(seq), settings.control)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{paper_sequence, validate_sequence, SequenceKind, Timings};

    fn timings() -> Timings {
        Timings {
            t0: 0.0,
            t1: 2.0,
            t2: 4.0,
            t3: 10.0,
            t5: 20.0,
            t6: 26.0,
            t7: 28.0,
        }
    }

    fn ground() -> BTreeMap<String, f64> {
        BTreeMap::from([("g1".to_string(), 1.0)])
    }

    #[test]
    fn classes_alternate_and_sampling_is_deterministic() {
        let s = LevelScheme::europium_loop();
        let m = MaterialParams::eu_yso_forward();
        let a = sample_ensemble(&m, &s, 2, 7, &ground()).unwrap();
        assert_eq!((a.ions[0].class, a.ions[1].class), (1, -1));
        let b = sample_ensemble(&m, &s, 2, 7, &ground()).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&m, &s, 3, 7, &ground()).unwrap();
        assert_eq!(a.ions[..], c.ions[..2]);
    }

    #[test]
    fn populations_must_be_normalised() {
        let s = LevelScheme::europium_loop();
        let m = MaterialParams::eu_yso_forward();
        let bad = BTreeMap::from([("g1".to_string(), 0.6)]);
        assert!(sample_ensemble(&m, &s, 4, 1, &bad).is_err());
        let unknown = BTreeMap::from([("x".to_string(), 1.0)]);
        assert!(sample_ensemble(&m, &s, 4, 1, &unknown).is_err());
        assert!(sample_ensemble(&m, &s, 0, 1, &ground()).is_err());
    }

    #[test]
    fn gaussian_feature_width() {
        let s = LevelScheme::europium_loop();
        let m = MaterialParams::eu_yso_forward();
        let e = sample_ensemble(&m, &s, 100_000, 3, &ground()).unwrap();
        let n = e.ions.len() as f64;
        let mean = e.ions.iter().map(|i| i.optical_detuning_khz).sum::<f64>() / n;
        let var = e
            .ions
            .iter()
            .map(|i| (i.optical_detuning_khz - mean).powi(2))
            .sum::<f64>()
            / n;
        let fwhm = var.sqrt() * 2.0 * (2.0 * LN_2).sqrt();
        assert!((fwhm - 2000.0).abs() < 0.05 * 2000.0, "{fwhm}");
    }

    #[test]
    fn square_feature_is_bounded() {
        let s = LevelScheme::europium_loop();
        let m = MaterialParams {
            feature_shape: FeatureShape::Square,
            ..MaterialParams::eu_yso_forward()
        };
        let e = sample_ensemble(&m, &s, 1000, 3, &ground()).unwrap();
        assert!(e.ions.iter().all(|i| i.optical_detuning_khz.abs() <= 1000.0));
    }

    #[test]
    fn rotation_preserves_invariants() {
        let mut r = DensityMatrix::diagonal(&[0.7, 0.3, 0.0, 0.0]);
        let (s, c) = (0.4f64).sin_cos();
        let i = Complex64::i();
        let u = [
            [Complex64::new(c, 0.0), -i * s * Complex64::from_polar(1.0, -0.3)],
            [-i * s * Complex64::from_polar(1.0, 0.3), Complex64::new(c, 0.0)],
        ];
        r.rotate(0, 2, u);
        r.check(1e-12).unwrap();
        assert!(r.get(0, 2).norm() > 0.0);
    }

    #[test]
    fn invariant_check_catches_bad_matrices() {
        let r = DensityMatrix::diagonal(&[0.7, 0.2, 0.0, 0.0]);
        assert!(r.check(1e-9).is_err());
        let mut r = DensityMatrix::diagonal(&[0.5, 0.5, 0.0, 0.0]);
        *r.at(0, 1) = Complex64::new(0.6, 0.0);
        *r.at(1, 0) = Complex64::new(0.6, 0.0);
        assert!(r.check(1e-9).unwrap_err().contains("minor"));
    }

    #[test]
    fn grid_must_resolve_gaps() {
        let s = LevelScheme::europium_loop();
        let v = paper_sequence(SequenceKind::Forward, &timings(), &s).unwrap();
        let m = MaterialParams::eu_yso_forward();
        let e = sample_ensemble(&m, &s, 4, 1, &ground()).unwrap();
        let g = Grid {
            start_us: 28.0,
            end_us: 40.0,
            step_us: 0.5,
        };
        assert!(propagate(&v, &e, &m, &s, &g, ControlModel::Ideal).is_err());
    }

    #[test]
    fn forward_sequence_echo_lands_at_predicted_time() {
        let s = LevelScheme::europium_loop();
        let v = paper_sequence(SequenceKind::Forward, &timings(), &s).unwrap();
        let m = MaterialParams {
            gamma13_khz: 0.0,
            gamma35_khz: 0.0,
            gamma_khz: 0.0,
            ..MaterialParams::eu_yso_forward()
        };
        let settings = SimulationSettings {
            n_ions: 2000,
            grid_us: Some((28.5, 36.0)),
            ..Default::default()
        };
        let rec = simulate(&v, &s, &m, &settings).unwrap();
        let fwd = rec.forward_amplitude();
        let (k, _) = fwd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .unwrap();
        assert!((rec.times_us[k] - 32.0).abs() <= 0.01 + 1e-9, "{}", rec.times_us[k]);
        let peak = fwd[k].norm_sqr();
        let bwd_peak = rec.backward_amplitude().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        assert!(bwd_peak < 0.05 * peak);
    }

    #[test]
    fn zero_amplitude_record_has_zero_intensity() {
        let s = LevelScheme::europium_loop();
        let mut seq = paper_sequence(SequenceKind::Forward, &timings(), &s).unwrap().into_inner();
        seq.optical.truncate(1);
        seq.stark.clear();
        seq.detection_window_us = (0.5, 3.0);
        let v = validate_sequence(&seq, &s).unwrap();
        let m = MaterialParams::eu_yso_forward();
        // all population in g3: the signal on a sees nothing
        let settings = SimulationSettings {
            n_ions: 10,
            initial_populations: BTreeMap::from([("g3".to_string(), 1.0)]),
            ..Default::default()
        };
        let rec = simulate(&v, &s, &m, &settings).unwrap();
        assert_eq!(echo_intensity(&rec, (0.5, 3.0), Direction::Forward).unwrap(), 0.0);
        assert!(echo_intensity(&rec, (2.0, 2.0), Direction::Forward).is_err());
        assert!(echo_intensity(&rec, (0.0, 2.0), Direction::Forward).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let s = LevelScheme::europium_loop();
        let v = paper_sequence(SequenceKind::Forward, &timings(), &s).unwrap();
        let m = MaterialParams::eu_yso_forward();
        let settings = SimulationSettings {
            n_ions: 500,
            grid_us: Some((30.0, 34.0)),
            ..Default::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&v, &s, &m, &settings).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
