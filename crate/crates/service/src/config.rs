use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mwo_core::classify::ClassifyConfig;
use mwo_core::corpus::{ColumnMapping, WordList};
use mwo_core::kpi::KpiConfig;
use mwo_core::pipeline::RuleOptions;
use mwo_core::synth::SynthConfig;
use mwo_core::tagging::SessionOptions;
use serde::{Deserialize, Serialize};

/// Settings read from the `--config` TOML file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub columns: ColumnMapping,
    /// Replaces the shipped stop-word list.
    pub stopwords: Option<PathBuf>,
    /// Replaces the shipped junk-word list.
    pub junkwords: Option<PathBuf>,
    pub classify: ClassifyConfig,
    pub kpi: KpiConfig,
    pub rules: RuleOptions,
    pub session: SessionOptions,
    pub synth: SynthConfig,
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn word_lists(&self) -> anyhow::Result<(WordList, WordList)> {
        let stop = match &self.stopwords {
            Some(p) => WordList::from_file(p)?,
            None => WordList::default_stopwords(),
        };
        let junk = match &self.junkwords {
            Some(p) => WordList::from_file(p)?,
            None => WordList::default_junkwords(),
        };
        Ok((stop, junk))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg: AppConfig = toml::from_str(
            "[kpi]\ncollapse_same_day = true\n[rules]\nfailure_alias = \"fault\"\n[rules.negation]\nwindow = 2\n",
        )
        .unwrap();
        assert!(cfg.kpi.collapse_same_day);
        assert_eq!(cfg.kpi.days_per_year, 365.25);
        assert_eq!(cfg.rules.failure_alias, "fault");
        assert_eq!(cfg.rules.negation.window, 2);
        assert!(cfg.rules.negation.cues.contains("no"));
        assert_eq!(cfg.classify, ClassifyConfig::default());
    }

    #[test]
    fn unknown_sections_are_rejected() {
        assert!(toml::from_str::<AppConfig>("[nope]\nx = 1\n").is_err());
    }
}
