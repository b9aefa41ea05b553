//! Scenario files: scheme, material, sequence, simulation settings and
//! analysis requests in one JSON document.

use serde::{Deserialize, Serialize};

use crate::analytic::{self, EfficiencyInputs};
use crate::ensemble::SimulationSettings;
use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::scheme::LevelScheme;
use crate::sequence::{
    paper_sequence_with, validate_sequence_with, BuilderOptions, Direction, PulseSequence, SequenceKind,
    SequenceMode, Timings, ValidatedSequence,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "LevelScheme::europium_loop")]
    pub scheme: LevelScheme,
    pub material: MaterialParams,
    #[serde(default)]
    pub mode: SequenceMode,
    pub sequence: SequenceSpec,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub analysis: AnalysisRequests,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SequenceSpec {
    Explicit(PulseSequence),
    Builder(BuilderSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderSpec {
    pub kind: SequenceKind,
    pub timings: Timings,
    #[serde(default)]
    pub options: BuilderOptions,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisRequests {
    pub efficiency: Option<EfficiencyRequest>,
    pub cavity: Option<CavityRequest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyRequest {
    pub direction: Direction,
    pub eta_pm: f64,
    pub eta_control: f64,
    /// Taken from the builder timings and material linewidths when absent.
    #[serde(default)]
    pub eta_decay: Option<f64>,
    /// Optical depths for the sweep table; the material's depth if empty.
    #[serde(default)]
    pub depths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityRequest {
    pub r2: f64,
    pub depths: Vec<f64>,
}

impl Scenario {
    /// Parses and validates. Schema problems (bad JSON, unknown fields,
    /// wrong version) and semantic problems both come back as input errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::input(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::input(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.scheme.validate()?;
        self.material.validate()?;
        if self.simulation.n_ions == 0 {
            return Err(Error::input("simulation.n_ions must be at least 1"));
        }
        self.sequence()?;
        Ok(())
    }

    pub fn sequence(&self) -> Result<ValidatedSequence> {
        match &self.sequence {
            SequenceSpec::Explicit(seq) => validate_sequence_with(seq, &self.scheme, self.mode),
            SequenceSpec::Builder(b) => paper_sequence_with(b.kind, &b.timings, &self.scheme, &b.options),
        }
    }

    pub fn timings(&self) -> Option<&Timings> {
        match &self.sequence {
            SequenceSpec::Builder(b) => Some(&b.timings),
            SequenceSpec::Explicit(_) => None,
        }
    }

    /// Storage-time decay factor for builder scenarios: `a = t5 − t2`,
    /// `b = t6 − t3`.
    pub fn storage_decay(&self) -> Option<f64> {
        let t = self.timings()?;
        let m = &self.material;
        analytic::decay_factor(m.gamma13_khz, m.gamma35_khz, m.gamma_khz, t.t5 - t.t2, t.t6 - t.t3).ok()
    }

    pub fn efficiency_inputs(&self, req: &EfficiencyRequest) -> Result<EfficiencyInputs> {
        let eta_decay = match req.eta_decay {
            Some(v) => v,
            None => self.storage_decay().ok_or_else(|| {
                Error::input("efficiency request needs eta_decay for explicit sequences")
            })?,
        };
        Ok(EfficiencyInputs {
            optical_depth: self.material.optical_depth,
            eta_pm: req.eta_pm,
            eta_control: req.eta_control,
            eta_decay,
        })
    }
}

const FORWARD: &str = include_str!("../../../scenarios/forward.json");
const BACKWARD: &str = include_str!("../../../scenarios/backward.json");
const QUBIT: &str = include_str!("../../../scenarios/qubit.json");

pub const BUNDLED: [&str; 3] = ["forward", "backward", "qubit"];

/// Raw JSON of a bundled scenario.
pub fn bundled_json(name: &str) -> Option<&'static str> {
    match name {
        "forward" => Some(FORWARD),
        "backward" => Some(BACKWARD),
        "qubit" => Some(QUBIT),
        _ => None,
    }
}

pub fn bundled(name: &str) -> Option<Scenario> {
    bundled_json(name).map(|j| Scenario::from_json(j).expect("bundled scenarios are valid"))
}
