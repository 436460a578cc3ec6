use serde::{Deserialize, Serialize};

use crate::models::{BlockModelConfig, BlockSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Size,
    Power,
    Phase,
    Validate,
    Calibrate,
    Test,
}

/// A preset (`{"name": "M4"}`) or a custom model with its own blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<BlockSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

impl ModelEntry {
    pub fn preset(name: &str) -> Self {
        Self {
            name: name.into(),
            blocks: None,
            sigma2: None,
        }
    }

    pub fn build(&self, p: usize, n: usize) -> Result<BlockModelConfig> {
        let mut cfg = match &self.blocks {
            Some(blocks) => BlockModelConfig::new(p, n, blocks.clone()),
            None => BlockModelConfig::preset(&self.name, p, n).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown model {:?}; presets are {:?}",
                    self.name,
                    BlockModelConfig::PRESETS
                ))
            })?,
        };
        if let Some(s) = self.sigma2 {
            cfg.sigma2 = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NRule {
    /// `n = round(factor p)`.
    pub factor: f64,
}

impl Default for NRule {
    fn default() -> Self {
        Self { factor: 2.0 }
    }
}

impl NRule {
    pub fn n_for(&self, p: usize) -> usize {
        (self.factor * p as f64).round() as usize
    }
}

fn default_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSpec {
    /// Share of coordinates whose variance is multiplied by `a`.
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    pub a_grid: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub tau: f64,
    /// Radial decay exponents; each gives the phase index `2 alpha - delta`.
    pub delta_grid: Vec<f64>,
}

fn default_level() -> f64 {
    0.05
}

fn default_reps() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    pub p_grid: Vec<usize>,
    #[serde(default)]
    pub n_rule: NRule,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; absent means one per core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<AlternativeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate_for(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(Error::InvalidConfig(format!("config is for {k:?}, not {kind:?}")));
            }
        }
        if self.reps < 100 {
            return Err(Error::InvalidConfig(format!("reps = {} < 100", self.reps)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level {} not in (0,1)", self.level)));
        }
        if self.p_grid.is_empty() || self.p_grid.contains(&0) {
            return Err(Error::InvalidConfig("p_grid must hold positive dimensions".into()));
        }
        if !(self.n_rule.factor > 0.0) {
            return Err(Error::InvalidConfig("n_rule factor must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        match kind {
            ExperimentKind::Size | ExperimentKind::Power if self.models.is_empty() => {
                return Err(Error::InvalidConfig("no models given".into()));
            }
            ExperimentKind::Power => {
                let alt = self
                    .alternative
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("power needs an alternative grid".into()))?;
                if alt.a_grid.is_empty() || alt.a_grid.iter().any(|a| !(*a > 0.0)) {
                    return Err(Error::InvalidConfig("a_grid must hold positive values".into()));
                }
                if !(alt.fraction > 0.0 && alt.fraction < 1.0) {
                    return Err(Error::InvalidConfig("fraction must lie in (0,1)".into()));
                }
            }
            ExperimentKind::Phase => {
                let ph = self
                    .phase
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("phase needs a delta grid".into()))?;
                if ph.delta_grid.is_empty() || ph.delta_grid.iter().any(|d| !(*d > 0.0)) {
                    return Err(Error::InvalidConfig("delta_grid must hold positive values".into()));
                }
            }
            _ => {}
        }
        for m in &self.models {
            for &p in &self.p_grid {
                m.build(p, self.n_rule.n_for(p).max(1))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_schema() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "kind": "power",
                "models": [{"name": "M1"}, {"name": "mine", "blocks": [
                    {"ratio": 1.0, "direction": "rademacher", "tau": 0.5, "delta": 1.0}
                ]}],
                "p_grid": [50, 100],
                "n_rule": {"factor": 2},
                "reps": 500,
                "level": 0.05,
                "seed": 42,
                "alternative": {"fraction": 0.2, "a_grid": [1.0, 1.5]}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.kind, Some(ExperimentKind::Power));
        cfg.validate_for(ExperimentKind::Power).unwrap();
        assert!(cfg.validate_for(ExperimentKind::Size).is_err());
        let custom = cfg.models[1].build(100, 200).unwrap();
        assert_eq!(custom.blocks[0].alpha, 1.0);
        assert_eq!(cfg.n_rule.n_for(75), 150);
    }

    #[test]
    fn student_t_direction_parses() {
        let m: ModelEntry =
            serde_json::from_str(r#"{"name": "t", "blocks": [{"ratio": 1.0, "direction": {"student_t": {"df": 8}}}]}"#)
                .unwrap();
        let cfg = m.build(10, 20).unwrap();
        assert_eq!(cfg.blocks[0].direction.nu4(), 1.5);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = r#""models": [{"name": "M1"}], "p_grid": [10]"#;
        let few = ExperimentConfig::from_json(&format!("{{{base}, \"reps\": 50}}")).unwrap();
        assert!(few.validate_for(ExperimentKind::Size).is_err());
        let lvl = ExperimentConfig::from_json(&format!("{{{base}, \"level\": 1.0}}")).unwrap();
        assert!(lvl.validate_for(ExperimentKind::Size).is_err());
        let unknown = ExperimentConfig::from_json(r#"{"models": [{"name": "M9"}], "p_grid": [10]}"#).unwrap();
        assert!(unknown.validate_for(ExperimentKind::Size).is_err());
        let ok = ExperimentConfig::from_json(&format!("{{{base}}}")).unwrap();
        assert!(ok.validate_for(ExperimentKind::Power).is_err());
        assert!(ok.validate_for(ExperimentKind::Phase).is_err());
        ok.validate_for(ExperimentKind::Size).unwrap();
    }
}
