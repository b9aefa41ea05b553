//! Level scheme: hyperfine levels and the optical/spin transitions that
//! connect them.

use serde::{Deserialize, Serialize};
use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::material::MaterialParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Ground,
    Excited,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub id: String,
    pub band: Band,
    #[serde(default)]
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    Optical,
    Spin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub name: String,
    pub lower: String,
    pub upper: String,
    pub kind: TransitionKind,
    /// Frequency offset from the reference optical line. Carried as a label;
    /// every simulation runs in per-level rotating frames.
    #[serde(default)]
    pub offset_mhz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelScheme {
    pub levels: Vec<Level>,
    pub transitions: Vec<Transition>,
}

/// How a level's energy depends on the per-ion random detunings.
///
/// `E = optical · Δ_opt + Σ_k spin[k] · δ_k`, where `k` runs over the
/// scheme's spin transitions in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct DetuningTerms {
    pub optical: f64,
    pub spin: Vec<f64>,
}

impl LevelScheme {
    /// The four-level ¹⁵¹Eu³⁺ loop used by the memory protocol.
    ///
    /// `a` carries the signal and the Stark echo, `b` and `d` the control
    /// pulses, and `c` is where parasitic four-level echoes radiate.
    pub fn europium_loop() -> Self {
        let level = |id: &str, band, label: &str| Level {
            id: id.into(),
            band,
            label: label.into(),
        };
        let tr = |name: &str, lower: &str, upper: &str, kind| Transition {
            name: name.into(),
            lower: lower.into(),
            upper: upper.into(),
            kind,
            offset_mhz: 0.0,
        };
        LevelScheme {
            levels: vec![
                level("g1", Band::Ground, "±1/2_g"),
                level("g3", Band::Ground, "±3/2_g"),
                level("e3", Band::Excited, "±3/2_e"),
                level("e5", Band::Excited, "±5/2_e"),
            ],
            transitions: vec![
                tr("a", "g1", "e3", TransitionKind::Optical),
                tr("b", "g3", "e3", TransitionKind::Optical),
                tr("c", "g3", "e5", TransitionKind::Optical),
                tr("d", "g1", "e5", TransitionKind::Optical),
                tr("g13", "g1", "g3", TransitionKind::Spin),
                tr("e35", "e3", "e5", TransitionKind::Spin),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut ids = HashSet::new();
        for l in &self.levels {
            if !ids.insert(l.id.as_str()) {
                problems.push(format!("duplicate level id '{}'", l.id));
            }
        }
        let mut names = HashSet::new();
        for t in &self.transitions {
            if !names.insert(t.name.as_str()) {
                problems.push(format!("duplicate transition name '{}'", t.name));
            }
            let (lo, up) = (self.level(&t.lower), self.level(&t.upper));
            let (Some(lo), Some(up)) = (lo, up) else {
                problems.push(format!("transition '{}' references an unknown level", t.name));
                continue;
            };
            if lo.id == up.id {
                problems.push(format!("transition '{}' connects a level to itself", t.name));
            }
            match t.kind {
                TransitionKind::Optical if !(lo.band == Band::Ground && up.band == Band::Excited) => {
                    problems.push(format!(
                        "optical transition '{}' must run from a ground to an excited level",
                        t.name
                    ))
                }
                TransitionKind::Spin if lo.band != up.band => problems.push(format!(
                    "spin transition '{}' must connect levels of the same band",
                    t.name
                )),
                _ => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(problems.join("; ")))
        }
    }

    pub fn level(&self, id: &str) -> Option<&Level> {
        self.levels.iter().find(|l| l.id == id)
    }

    pub fn level_index(&self, id: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.id == id)
    }

    pub fn transition(&self, name: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.name == name)
    }

    /// (lower, upper) level indices of a named transition.
    pub fn transition_levels(&self, name: &str) -> Option<(usize, usize)> {
        let t = self.transition(name)?;
        Some((self.level_index(&t.lower)?, self.level_index(&t.upper)?))
    }

    pub fn band_of(&self, index: usize) -> Band {
        self.levels[index].band
    }

    pub fn optical_transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.kind == TransitionKind::Optical)
    }

    pub fn spin_transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.kind == TransitionKind::Spin)
    }

    /// Optical transition connecting two levels, in either order.
    pub fn optical_between(&self, i: usize, j: usize) -> Option<&Transition> {
        self.optical_transitions().find(|t| {
            let (lo, up) = (self.level_index(&t.lower), self.level_index(&t.upper));
            (lo == Some(i) && up == Some(j)) || (lo == Some(j) && up == Some(i))
        })
    }

    /// Inhomogeneous FWHM (kHz) of a spin transition: ground-band spin
    /// transitions take Γ13, excited-band ones Γ35.
    pub fn spin_width_khz(&self, t: &Transition, material: &MaterialParams) -> f64 {
        match self.level(&t.lower).map(|l| l.band) {
            Some(Band::Excited) => material.gamma35_khz,
            _ => material.gamma13_khz,
        }
    }

    /// Detuning decomposition of every level.
    ///
    /// The first level of each band is its reference; other levels are
    /// reached by walking spin transitions (lower → upper adds that
    /// transition's detuning). Levels with no spin path to the reference get
    /// no spin terms.
    pub fn detuning_terms(&self) -> Vec<DetuningTerms> {
        let spins: Vec<(usize, usize)> = self
            .spin_transitions()
            .filter_map(|t| Some((self.level_index(&t.lower)?, self.level_index(&t.upper)?)))
            .collect();
        let n = self.levels.len();
        let mut terms: Vec<Option<DetuningTerms>> = vec![None; n];
        for band in [Band::Ground, Band::Excited] {
            let Some(root) = self.levels.iter().position(|l| l.band == band) else {
                continue;
            };
            let optical = if band == Band::Excited { 1.0 } else { 0.0 };
            terms[root] = Some(DetuningTerms {
                optical,
                spin: vec![0.0; spins.len()],
            });
            let mut queue = VecDeque::from([root]);
            while let Some(at) = queue.pop_front() {
                let here = terms[at].clone().expect("visited");
                for (k, &(lo, up)) in spins.iter().enumerate() {
                    let (next, sign) = if lo == at {
                        (up, 1.0)
                    } else if up == at {
                        (lo, -1.0)
                    } else {
                        continue;
                    };
                    if terms[next].is_none() {
                        let mut t = here.clone();
                        t.spin[k] += sign;
                        terms[next] = Some(t);
                        queue.push_back(next);
                    }
                }
            }
        }
        terms
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                t.unwrap_or(DetuningTerms {
                    optical: if self.levels[i].band == Band::Excited { 1.0 } else { 0.0 },
                    spin: vec![0.0; spins.len()],
                })
            })
            .collect()
    }
}
