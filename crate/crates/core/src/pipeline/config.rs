use crate::acs::{CutRule, SignatureMode};
use crate::clustering::ClusterBudget;
use crate::data::{CaseConfig, CasePreset, CsvSchema, SynthParams};
use crate::ml::{ForestGrid, SelectionConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Full,
    Oracle,
    Ml,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Mode::Full),
            "oracle" => Ok(Mode::Oracle),
            "ml" => Ok(Mode::Ml),
            _ => Err(format!("unknown mode `{s}` (expected full|oracle|ml)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Oracle => "oracle",
            Mode::Ml => "ml",
        })
    }
}

/// A named preset or explicit technology parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseSpec {
    Preset(CasePreset),
    Custom(CaseConfig),
}

impl CaseSpec {
    pub fn config(&self) -> CaseConfig {
        match self {
            CaseSpec::Preset(p) => p.config(),
            CaseSpec::Custom(c) => c.clone(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            CaseSpec::Preset(p) => p.to_string(),
            CaseSpec::Custom(_) => "custom".into(),
        }
    }

    /// Synthetic VRE profile: the preset's, or solar for custom cases.
    pub fn profile(&self) -> crate::data::Profile {
        match self {
            CaseSpec::Preset(p) => p.profile(),
            CaseSpec::Custom(_) => crate::data::Profile::Solar,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSettings {
    pub seed: u64,
    /// Years of the evaluation horizon in full and oracle modes.
    pub years: usize,
    /// Truncate the evaluation horizon to this many hours.
    pub hours: Option<usize>,
    /// First hour of the truncated horizon.
    pub start_hour: usize,
    /// Training years preceding the test year in ml mode.
    pub train_years: usize,
    pub params: SynthParams,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            seed: 7,
            years: 1,
            hours: None,
            start_hour: 0,
            train_years: 3,
            params: SynthParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlSettings {
    pub max_lag: usize,
    pub selection: SelectionConfig,
    pub grid: ForestGrid,
    /// Load this classifier instead of training one.
    pub model_path: Option<PathBuf>,
}

impl Default for MlSettings {
    fn default() -> Self {
        MlSettings {
            max_lag: 10,
            selection: SelectionConfig::default(),
            grid: ForestGrid::default(),
            model_path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub case: CaseSpec,
    pub mode: Mode,
    /// Cluster counts swept in ml mode.
    pub clusters: Vec<usize>,
    pub cluster_budget: ClusterBudget,
    pub signature: SignatureMode,
    pub cut_rule: CutRule,
    /// Master seed of the classifier.
    pub seed: u64,
    /// Worker count; 0 uses every available core.
    pub threads: usize,
    pub demand_scale: f64,
    /// Evaluation series; synthesized when absent.
    pub series: Option<PathBuf>,
    /// Training series for ml mode; synthesized when absent.
    pub train_series: Option<PathBuf>,
    pub schema: CsvSchema,
    pub synth: SynthSettings,
    pub ml: MlSettings,
    pub out_dir: PathBuf,
    /// Also write the full-scale LP in LP text format.
    pub dump_lp: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            case: CaseSpec::Preset(CasePreset::BessSolar),
            mode: Mode::Full,
            clusters: (30..=100).step_by(10).collect(),
            cluster_budget: ClusterBudget::PerSubmodel,
            signature: SignatureMode::Full,
            cut_rule: CutRule::ConsecutiveEmpty,
            seed: 42,
            threads: 1,
            demand_scale: 1.0,
            series: None,
            train_series: None,
            schema: CsvSchema::default(),
            synth: SynthSettings::default(),
            ml: MlSettings::default(),
            out_dir: PathBuf::from("out"),
            dump_lp: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.case.config().validate().map_err(|e| e.to_string())?;
        if self.clusters.contains(&0) {
            return Err("cluster counts must be at least 1".into());
        }
        if !(self.demand_scale.is_finite() && self.demand_scale >= 0.0) {
            return Err("demand_scale must be finite and non-negative".into());
        }
        if self.synth.years == 0 {
            return Err("synth.years must be at least 1".into());
        }
        if self.mode == Mode::Ml {
            if self.ml.model_path.is_none() && self.synth.train_years == 0 && self.train_series.is_none() {
                return Err("ml mode needs training data".into());
            }
            if let (Some(a), Some(b)) = (&self.series, &self.train_series) {
                if a == b {
                    return Err("training and test series must be distinct files".into());
                }
            }
            if self.series.is_some() != self.train_series.is_some() && self.ml.model_path.is_none() {
                return Err("give both `series` and `train_series`, or neither to synthesize".into());
            }
        }
        Ok(())
    }

    /// Parses `a..b:step`, `a,b,c` or a single count.
    pub fn parse_clusters(s: &str) -> Result<Vec<usize>, String> {
        let bad = || format!("invalid cluster list `{s}` (use 30..100:10 or 30,40,50)");
        if let Some((range, step)) = s.split_once(':') {
            let (a, b) = range.split_once("..").ok_or_else(bad)?;
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            let step: usize = step.trim().parse().map_err(|_| bad())?;
            if step == 0 || a == 0 || a > b {
                return Err(bad());
            }
            return Ok((a..=b).step_by(step).collect());
        }
        let v: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        if v.is_empty() || v.contains(&0) {
            return Err(bad());
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_lists() {
        assert_eq!(
            ExperimentConfig::parse_clusters("30..100:10").unwrap(),
            vec![30, 40, 50, 60, 70, 80, 90, 100]
        );
        assert_eq!(ExperimentConfig::parse_clusters("5,7").unwrap(), vec![5, 7]);
        assert!(ExperimentConfig::parse_clusters("0..4:1").is_err());
        assert!(ExperimentConfig::parse_clusters("x").is_err());
    }

    #[test]
    fn json_defaults_and_custom_case() {
        let cfg = ExperimentConfig::from_json(r#"{"case": "phs-wind", "mode": "oracle"}"#).unwrap();
        assert_eq!(cfg.case, CaseSpec::Preset(CasePreset::PhsWind));
        assert_eq!(cfg.mode, Mode::Oracle);
        assert_eq!(cfg.synth.train_years, 3);
        let partial = ExperimentConfig::from_json(r#"{"ml": {"grid": {"depths": [4, null]}}}"#).unwrap();
        assert_eq!(partial.ml.grid.depths, vec![Some(4), None]);
        assert_eq!(partial.ml.grid.min_leaf, ForestGrid::default().min_leaf);
        let mut custom = CasePreset::BessSolar.config();
        custom.storage_emax = 250.0;
        let text = serde_json::to_string(&ExperimentConfig {
            case: CaseSpec::Custom(custom.clone()),
            ..Default::default()
        })
        .unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.case.config(), custom);
        back.validate().unwrap();
    }

    #[test]
    fn ml_needs_distinct_series() {
        let cfg = ExperimentConfig {
            mode: Mode::Ml,
            series: Some("a.csv".into()),
            train_series: Some("a.csv".into()),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
