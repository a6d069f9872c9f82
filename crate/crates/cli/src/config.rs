//! Project configuration (TOML).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use prszz_core::filter::Thresholds;
use prszz_core::forge::BugLabels;
use prszz_core::lexer::{LanguageProfile, Profiles};
use prszz_core::links::LinkPatterns;
use prszz_core::trace::VariantName;
use prszz_core::VariantId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub project_id: String,
    pub repo_path: PathBuf,
    pub snapshot_dir: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    pub trackers: Vec<TrackerConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bug_labels: Vec<String>,
    #[serde(default)]
    pub regex: RegexOverrides,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    /// Creation-time window `[start, end)` of the bug tickets considered,
    /// in epoch seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(i64, i64)>,
    /// Variant names to trace; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<String>,
    /// Selection among secured suspects suppresses unsecured ones instead of
    /// only ranking them first.
    #[serde(default)]
    pub secured_only: bool,
    /// Extra or overriding language profiles.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub languages: Vec<LanguageProfile>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerKind {
    Github,
    Jira,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    pub system: TrackerKind,
    /// API root; defaults to the public GitHub API for GitHub trackers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    /// `owner/name` of a GitHub project.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
    /// Jira project keys.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub project_keys: Vec<String>,
    /// Directory of recorded responses to replay instead of going online.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegexOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub github: Option<Vec<String>>,
    /// Jira template with a `{keys}` placeholder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jira: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    #[serde(default = "default_max_files")]
    pub max_files: usize,
    #[serde(default = "default_max_lines")]
    pub max_lines: usize,
}

fn default_max_files() -> usize {
    Thresholds::default().max_files
}

fn default_max_lines() -> usize {
    Thresholds::default().max_lines
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            max_files: default_max_files(),
            max_lines: default_max_lines(),
        }
    }
}

impl ProjectConfig {
    /// Reads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ProjectConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.repo_path);
        fix(&mut self.snapshot_dir);
        fix(&mut self.out_dir);
        if let Some(t) = &mut self.truth {
            fix(t);
        }
        for t in &mut self.trackers {
            if let Some(d) = &mut t.replay_dir {
                fix(d);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trackers.is_empty() {
            return Err(ConfigError::Invalid("at least one tracker must be configured".into()));
        }
        if let Some((start, end)) = self.window {
            if start >= end {
                return Err(ConfigError::Invalid(format!("window start {start} is not before end {end}")));
            }
        }
        for t in &self.trackers {
            if t.system == TrackerKind::Jira && t.project_keys.is_empty() {
                return Err(ConfigError::Invalid("a jira tracker needs project_keys".into()));
            }
        }
        self.variant_ids()?;
        self.link_patterns()?;
        Ok(())
    }

    pub fn variant_ids(&self) -> Result<Vec<VariantId>, ConfigError> {
        let names: Vec<VariantName> = if self.variants.is_empty() {
            VariantName::ALL.to_vec()
        } else {
            self.variants
                .iter()
                .map(|v| v.parse().map_err(|_| ConfigError::Invalid(format!("unknown variant {v}"))))
                .collect::<Result<_, _>>()?
        };
        let mut seen = BTreeSet::new();
        Ok(names
            .into_iter()
            .filter(|n| seen.insert(*n))
            .map(|n| {
                let mut id = VariantId::new(n);
                id.options.secured_only = self.secured_only;
                id
            })
            .collect())
    }

    pub fn github_enabled(&self) -> bool {
        self.trackers.iter().any(|t| t.system == TrackerKind::Github)
    }

    pub fn jira_keys(&self) -> BTreeSet<String> {
        self.trackers
            .iter()
            .filter(|t| t.system == TrackerKind::Jira)
            .flat_map(|t| t.project_keys.iter().map(|k| k.to_ascii_uppercase()))
            .collect()
    }

    pub fn link_patterns(&self) -> Result<LinkPatterns, ConfigError> {
        LinkPatterns::with_overrides(
            self.github_enabled(),
            &self.jira_keys(),
            self.regex.github.as_deref(),
            self.regex.jira.as_deref(),
        )
        .map_err(|e| ConfigError::Invalid(format!("bad link pattern: {e}")))
    }

    pub fn bug_labels(&self) -> BugLabels {
        if self.bug_labels.is_empty() {
            BugLabels::default()
        } else {
            BugLabels::new(&self.bug_labels)
        }
    }

    pub fn profiles(&self) -> Profiles {
        let mut p = Profiles::default();
        p.extend(self.languages.iter().cloned());
        p
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            max_files: self.thresholds.max_files,
            max_lines: self.thresholds.max_lines,
        }
    }

    pub fn window(&self) -> (i64, i64) {
        self.window.unwrap_or((i64::MIN, i64::MAX))
    }
}
