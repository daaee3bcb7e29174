use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specsolve_core::uq::{OfflineSampler, UqConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    SolveEvp,
    Uq,
    HStudy,
    SStudy,
    NStudy,
    QStudy,
    Localization,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SolveEvp => "solve-evp",
            Self::Uq => "uq",
            Self::HStudy => "h-study",
            Self::SStudy => "s-study",
            Self::NStudy => "n-study",
            Self::QStudy => "q-study",
            Self::Localization => "localization",
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitFlags {
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub fields: bool,
    #[serde(default = "yes")]
    pub json_summary: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            csv: true,
            fields: true,
            json_summary: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Qmc,
    Mc,
}

fn default_reference_n() -> usize {
    4001
}

fn default_reference_shifts() -> usize {
    4
}

/// Study-specific parameters; unused fields are ignored by other studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyParams {
    /// Coarse cells per axis (solve-evp, h-study).
    #[serde(default)]
    pub coarse_levels: Vec<usize>,
    /// Fine cells per axis for a plain FEM refinement study against the
    /// `fine_cells` solution (solve-evp); each must divide `fine_cells`.
    #[serde(default)]
    pub fem_levels: Vec<usize>,
    /// Truncation dimensions (s-study); the reference uses `potential.s`.
    #[serde(default)]
    pub s_values: Vec<usize>,
    /// Online sample counts (n-study).
    #[serde(default)]
    pub n_values: Vec<usize>,
    /// Samplers compared in the n-study.
    #[serde(default)]
    pub samplers: Vec<SamplerKind>,
    /// Reference sample count and shifts for the n-study.
    #[serde(default = "default_reference_n")]
    pub reference_n: usize,
    #[serde(default = "default_reference_shifts")]
    pub reference_shifts: usize,
    /// Snapshot counts (q-study).
    #[serde(default)]
    pub q_values: Vec<usize>,
    #[serde(default)]
    pub offline_samplers: Vec<OfflineSampler>,
    /// Fixed realization (solve-evp, localization); drawn from the seed when absent.
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
    /// uq: also run the fine FEM on the same samples and report RMS errors.
    #[serde(default)]
    pub compare_fem: bool,
}

impl Default for StudyParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// When present it must match the subcommand.
    #[serde(default)]
    pub study: Option<StudyKind>,
    pub uq: UqConfig,
    #[serde(default)]
    pub params: StudyParams,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub emit: EmitFlags,
}

#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Parse(PathBuf, serde_json::Error),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Read(p, e) => write!(f, "cannot read config {}: {e}", p.display()),
            Self::Parse(p, e) => write!(f, "cannot parse config {}: {e}", p.display()),
            Self::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(path.to_path_buf(), e))
    }

    /// Checks the study-independent contract and the parameters `kind` needs.
    pub fn check(&self, kind: StudyKind) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if let Some(s) = self.study {
            if s != kind {
                return bad(format!("config is for {}, command is {}", s.name(), kind.name()));
            }
        }
        self.uq.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let p = &self.params;
        let refines = |n: &usize| *n > 0 && self.uq.fine_cells % n == 0;
        match kind {
            StudyKind::HStudy if p.coarse_levels.len() < 3 => {
                return bad("h-study needs at least 3 coarse_levels".into());
            }
            StudyKind::SStudy if p.s_values.is_empty() => return bad("s-study needs s_values".into()),
            StudyKind::NStudy if p.n_values.len() < 2 => return bad("n-study needs at least 2 n_values".into()),
            StudyKind::NStudy if self.uq.sampler.shifts() < 2 || p.reference_shifts == 0 => {
                return bad("n-study needs at least 2 shifts for RMS estimates".into());
            }
            StudyKind::QStudy if p.q_values.is_empty() => return bad("q-study needs q_values".into()),
            StudyKind::QStudy if self.uq.offline.is_none() => return bad("q-study needs an offline section".into()),
            _ => {}
        }
        if let Some(n) = p.coarse_levels.iter().find(|n| !refines(n)) {
            return bad(format!("coarse level {n} does not divide fine_cells {}", self.uq.fine_cells));
        }
        if let Some(n) = p.fem_levels.iter().find(|n| !refines(n) || **n == self.uq.fine_cells) {
            return bad(format!("fem level {n} must be a proper divisor of fine_cells {}", self.uq.fine_cells));
        }
        if let Some(s) = p.s_values.iter().find(|&&s| s > self.uq.potential.s) {
            return bad(format!("s value {s} exceeds potential.s = {}", self.uq.potential.s));
        }
        if let Some(w) = &p.omega {
            if w.len() != self.uq.potential.s {
                return bad(format!("omega has {} entries, potential.s = {}", w.len(), self.uq.potential.s));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> ExperimentConfig {
        serde_json::from_str(s).unwrap()
    }

    const BASE: &str = r#""uq": {
        "domain": {"lower": [0.0], "upper": [1.0]},
        "potential": {"v0": {"kind": "constant", "value": 1.0}, "s": 4},
        "eps": 1.0, "coarse_cells": 4, "fine_cells": 32
    }"#;

    #[test]
    fn defaults() {
        let e = parse(&format!("{{{BASE}}}"));
        assert_eq!(e.emit, EmitFlags::default());
        assert_eq!(e.params.reference_n, 4001);
        assert!(e.study.is_none() && e.out.is_none());
        e.check(StudyKind::Uq).unwrap();
    }

    #[test]
    fn study_requirements() {
        let e = parse(&format!("{{{BASE}}}"));
        for kind in [StudyKind::HStudy, StudyKind::SStudy, StudyKind::NStudy, StudyKind::QStudy] {
            assert!(e.check(kind).is_err(), "{}", kind.name());
        }
        let e = parse(&format!(r#"{{{BASE}, "study": "uq"}}"#));
        assert!(e.check(StudyKind::SolveEvp).is_err());
        let e = parse(&format!(r#"{{{BASE}, "params": {{"coarse_levels": [3]}}}}"#));
        assert!(e.check(StudyKind::SolveEvp).is_err());
        let e = parse(&format!(r#"{{{BASE}, "params": {{"fem_levels": [32]}}}}"#));
        assert!(e.check(StudyKind::SolveEvp).is_err());
        let e = parse(&format!(r#"{{{BASE}, "params": {{"omega": [0.1]}}}}"#));
        assert!(e.check(StudyKind::Localization).is_err());
        let e = parse(&format!(r#"{{{BASE}, "params": {{"s_values": [1, 4]}}}}"#));
        e.check(StudyKind::SStudy).unwrap();
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(&format!(r#"{{{BASE}, "bogus": 1}}"#)).is_err());
    }
}
