//! Synthetic fixture projects: a scripted git history plus forge snapshot,
//! ground truth and a ready-to-run configuration.
//!
//! A [`FixtureScript`] is an ordered list of actions (commits, pull requests,
//! tickets, comments, links). [`generate`] replays it into a bare repository
//! with fixed identities and timestamps, so the same script always produces
//! the same object ids, and checks the declared ground truth against an
//! independent line-provenance replay before writing anything else.

mod generate;
pub mod oracle;
pub mod scenarios;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use prszz_core::forge::ForgeError;
use prszz_core::vcs::VcsError;
use prszz_core::{CommitId, GroundTruth};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::generate;

pub const FIXTURE_NAME: &str = "Fixture Bot";
pub const FIXTURE_EMAIL: &str = "fixture@example.invalid";
pub const START_TIME: i64 = 1_600_000_000;
pub const TIME_STEP: i64 = 1000;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture script: {0}")]
    Invalid(String),
    #[error("merging pull request #{0} conflicts")]
    Conflict(u64),
    #[error("declared truth is not realizable: {0}")]
    Unrealizable(String),
    #[error("output directory {0} is not empty")]
    OutputNotEmpty(PathBuf),
    #[error(transparent)]
    Git(#[from] git2::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Vcs(#[from] VcsError),
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::ser::Error),
}

/// A scripted project history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureScript {
    pub project: String,
    /// GitHub issues and pull requests are used for links.
    #[serde(default = "yes")]
    pub github: bool,
    /// Jira project keys recognized in text.
    #[serde(default)]
    pub jira_keys: Vec<String>,
    #[serde(default = "default_bug_labels")]
    pub bug_labels: Vec<String>,
    /// Variants written into the generated configuration; empty means all.
    #[serde(default)]
    pub variants: Vec<String>,
    pub actions: Vec<Action>,
    #[serde(default)]
    pub truth: DeclaredTruth,
}

fn yes() -> bool {
    true
}

fn default_bug_labels() -> Vec<String> {
    vec!["bug".to_string()]
}

/// Ground truth in terms of commit labels. Bug keys use the `system:key`
/// form or the `#N` / `KEY-N` shorthands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredTruth {
    #[serde(default)]
    pub fixing: BTreeMap<String, Option<String>>,
    #[serde(default)]
    pub inducing: BTreeMap<String, BTreeSet<String>>,
    /// Fill the inducing commits of every fixing commit without an explicit
    /// entry from the provenance replay.
    #[serde(default)]
    pub derive_inducing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// A commit on the main branch, or on a pull request's branch when `pr`
    /// is set.
    Commit(CommitSpec),
    OpenPr(PrSpec),
    MergePr(MergeSpec),
    ClosePr { pr: u64 },
    FileTicket(TicketSpec),
    CloseTicket {
        ticket: String,
        #[serde(default)]
        resolution: Option<String>,
    },
    Comment {
        on: String,
        text: String,
        #[serde(default)]
        author: Option<String>,
    },
    /// A platform-maintained link from one ticket or pull request to another.
    Link {
        from: String,
        to: String,
        #[serde(default = "integrated")]
        kind: String,
    },
}

fn integrated() -> String {
    "integrated".to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommitSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub message: String,
    /// Author name; the email is derived from it. Defaults to the fixture
    /// identity.
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub pr: Option<u64>,
    pub changes: Vec<Change>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Change {
    /// Creates or overwrites a whole file.
    Write { path: String, lines: Vec<String> },
    /// Removes `delete` lines starting at line `at` (1-based) and inserts
    /// `insert` before the line that was at `at`.
    Edit {
        path: String,
        at: usize,
        #[serde(default)]
        delete: usize,
        #[serde(default)]
        insert: Vec<String>,
    },
    Rename { from: String, to: String },
    Delete { path: String },
    Chmod { path: String, executable: bool },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrSpec {
    pub number: u64,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub assignee: Option<String>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    /// Commits pushed right away. More can follow through `commit` actions
    /// with `pr` set; the branch starts at the main head of its first commit.
    #[serde(default)]
    pub commits: Vec<CommitSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    Merge,
    Squash,
    Rebase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeSpec {
    pub pr: u64,
    pub strategy: Integration,
    /// Label of the merge or squash commit.
    #[serde(default)]
    pub label: Option<String>,
    /// Labels of the rebased commits, in inner-commit order.
    #[serde(default)]
    pub rebased_labels: Vec<String>,
    #[serde(default)]
    pub message: Option<String>,
    /// Changes folded into the merge or squash commit beyond the branch
    /// content.
    #[serde(default)]
    pub extra_changes: Vec<Change>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TicketSpec {
    pub key: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub assignee: Option<String>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub to: String,
    #[serde(default = "integrated")]
    pub kind: String,
}

/// What [`generate`] wrote.
#[derive(Debug, Clone)]
pub struct GeneratedFixture {
    pub dir: PathBuf,
    pub repo_path: PathBuf,
    pub config_path: PathBuf,
    pub labels: BTreeMap<String, CommitId>,
    pub truth: GroundTruth,
    /// Provenance replay: for every fixing commit in the truth, the commits
    /// that last touched the lines it removes.
    pub oracle: BTreeMap<CommitId, BTreeSet<CommitId>>,
}

impl GeneratedFixture {
    pub fn id(&self, label: &str) -> &CommitId {
        self.labels
            .get(label)
            .unwrap_or_else(|| panic!("fixture has no commit labelled {label}"))
    }
}

/// Email derived from an author name.
pub fn author_email(name: &str) -> String {
    if name == FIXTURE_NAME {
        return FIXTURE_EMAIL.to_string();
    }
    let local: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '.')
        .collect::<String>()
        .to_ascii_lowercase();
    format!("{local}@example.invalid")
}
