//! Issue tracker and code-review platform data.
//!
//! Pull requests and tickets are fetched once into a [`Snapshot`], persisted
//! in canonical JSON, and every later stage works from the snapshot only.

pub mod github;
pub mod jira;
mod select;
mod snapshot;
pub mod transport;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::vcs::{CommitId, Hunk};

pub use select::{is_resolved, select_bug_tickets, BugLabels};
pub use snapshot::{load_snapshot, save_snapshot, to_canonical_json};

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("schema violation in {entity}: field `{field}`: {message}")]
    SchemaViolation {
        entity: String,
        field: String,
        message: String,
    },
    #[error("authentication failed for {0}")]
    AuthFailure(String),
    #[error("rate limit exhausted after {retries} retries: {url}")]
    RateLimitExhausted { url: String, retries: u32 },
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("unexpected response {status} from {url}")]
    Http { url: String, status: u16 },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
    #[error("no recorded response for {0}")]
    NotRecorded(String),
    #[error("invalid reference: {0}")]
    InvalidRef(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ForgeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerSystem {
    GithubIssue,
    JiraIssue,
    PullRequest,
}

impl TrackerSystem {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackerSystem::GithubIssue => "github_issue",
            TrackerSystem::JiraIssue => "jira_issue",
            TrackerSystem::PullRequest => "pull_request",
        }
    }

    /// GitHub issues and pull requests share one number space.
    pub fn is_github(self) -> bool {
        matches!(self, TrackerSystem::GithubIssue | TrackerSystem::PullRequest)
    }
}

impl FromStr for TrackerSystem {
    type Err = ForgeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "github_issue" => Ok(TrackerSystem::GithubIssue),
            "jira_issue" => Ok(TrackerSystem::JiraIssue),
            "pull_request" => Ok(TrackerSystem::PullRequest),
            other => Err(ForgeError::InvalidRef(other.to_string())),
        }
    }
}

/// Identifier of a ticket or pull request. GitHub keys are bare numbers
/// (`#4521` is stored as `4521`), Jira keys keep the `PROJECT-NUMBER` form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IssueRef {
    pub system: TrackerSystem,
    pub key: String,
}

impl IssueRef {
    pub fn new(system: TrackerSystem, key: impl Into<String>) -> Self {
        let key = key.into();
        let key = if system.is_github() {
            key.trim().trim_start_matches('#').to_string()
        } else {
            key.trim().to_ascii_uppercase()
        };
        IssueRef { system, key }
    }

    pub fn github(number: u64) -> Self {
        IssueRef::new(TrackerSystem::GithubIssue, number.to_string())
    }

    pub fn pull(number: u64) -> Self {
        IssueRef::new(TrackerSystem::PullRequest, number.to_string())
    }

    pub fn jira(key: &str) -> Self {
        IssueRef::new(TrackerSystem::JiraIssue, key)
    }

    pub fn number(&self) -> Option<u64> {
        if self.system.is_github() {
            self.key.parse().ok()
        } else {
            self.key.rsplit('-').next().and_then(|n| n.parse().ok())
        }
    }

    pub fn is_pull(&self) -> bool {
        self.system == TrackerSystem::PullRequest
    }

    fn sort_key(&self) -> (TrackerSystem, &str, u64, &str) {
        match self.system {
            TrackerSystem::JiraIssue => {
                let (project, num) = self.key.rsplit_once('-').unwrap_or((&self.key, ""));
                (self.system, project, num.parse().unwrap_or(u64::MAX), &self.key)
            }
            _ => (self.system, "", self.key.parse().unwrap_or(u64::MAX), &self.key),
        }
    }
}

impl Ord for IssueRef {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for IssueRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for IssueRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.system.as_str(), self.key)
    }
}

impl FromStr for IssueRef {
    type Err = ForgeError;
    fn from_str(s: &str) -> Result<Self> {
        let (system, key) = s
            .split_once(':')
            .ok_or_else(|| ForgeError::InvalidRef(s.to_string()))?;
        Ok(IssueRef::new(system.parse()?, key))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub time: i64,
    #[serde(default)]
    pub text: String,
}

/// A link maintained by the platform itself ("Linked issues", Jira "Issue
/// Links", timeline mentions). `kind` is `integrated`, `mentions`,
/// `mentioned_by`, or a Jira link type name such as `duplicate`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntegratedLink {
    #[serde(rename = "ref")]
    pub target: IssueRef,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueTicket {
    #[serde(rename = "ref")]
    pub reference: IssueRef,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub status: String,
    #[serde(default)]
    pub resolution: Option<String>,
    pub created_at: i64,
    #[serde(default)]
    pub closed_at: Option<i64>,
    #[serde(default)]
    pub assignee: Option<String>,
    #[serde(default)]
    pub comments: Vec<Comment>,
    #[serde(default)]
    pub integrated_links: Vec<IntegratedLink>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl IssueTicket {
    pub fn new(reference: IssueRef, created_at: i64) -> Self {
        IssueTicket {
            reference,
            title: String::new(),
            description: String::new(),
            labels: BTreeSet::new(),
            status: String::new(),
            resolution: None,
            created_at,
            closed_at: None,
            assignee: None,
            comments: Vec::new(),
            integrated_links: Vec::new(),
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrState {
    #[default]
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerFile {
    pub path: String,
    #[serde(default)]
    pub additions: usize,
    #[serde(default)]
    pub deletions: usize,
    #[serde(default)]
    pub hunks: Option<Vec<Hunk>>,
}

/// A commit as listed inside a pull request. After a squash or rebase the
/// hash usually does not exist in the repository history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerCommit {
    pub hash: CommitId,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub author_name: String,
    #[serde(default)]
    pub author_email: String,
    #[serde(default)]
    pub author_time: i64,
    #[serde(default)]
    pub files: Vec<InnerFile>,
}

impl InnerCommit {
    pub fn summary(&self) -> &str {
        self.message.lines().next().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    #[serde(rename = "ref")]
    pub reference: IssueRef,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub state: PrState,
    #[serde(default)]
    pub merged: bool,
    #[serde(default)]
    pub merge_commit: Option<CommitId>,
    pub created_at: i64,
    #[serde(default)]
    pub closed_at: Option<i64>,
    #[serde(default)]
    pub assignee: Option<String>,
    #[serde(default)]
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub inner_commits: Vec<InnerCommit>,
    #[serde(default)]
    pub comments: Vec<Comment>,
    #[serde(default)]
    pub reviews: Vec<Comment>,
    #[serde(default)]
    pub integrated_links: Vec<IntegratedLink>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl PullRequest {
    pub fn new(number: u64, created_at: i64) -> Self {
        PullRequest {
            reference: IssueRef::pull(number),
            title: String::new(),
            description: String::new(),
            state: PrState::Open,
            merged: false,
            merge_commit: None,
            created_at,
            closed_at: None,
            assignee: None,
            labels: BTreeSet::new(),
            inner_commits: Vec::new(),
            comments: Vec::new(),
            reviews: Vec::new(),
            integrated_links: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn number(&self) -> u64 {
        self.reference.number().unwrap_or(0)
    }

    /// Ticket view of a pull request that carries bug information itself.
    pub fn as_ticket(&self) -> IssueTicket {
        IssueTicket {
            reference: self.reference.clone(),
            title: self.title.clone(),
            description: self.description.clone(),
            labels: self.labels.clone(),
            status: match self.state {
                PrState::Open => "open".into(),
                PrState::Closed => "closed".into(),
            },
            resolution: self.merged.then(|| "merged".to_string()),
            created_at: self.created_at,
            closed_at: self.closed_at,
            assignee: self.assignee.clone(),
            comments: self
                .comments
                .iter()
                .chain(self.reviews.iter())
                .cloned()
                .collect(),
            integrated_links: self.integrated_links.clone(),
            extra: BTreeMap::new(),
        }
    }

    /// Paths of all files reported for the inner commits. Empty when the
    /// forge did not provide file data.
    pub fn inner_paths(&self) -> BTreeSet<&str> {
        self.inner_commits
            .iter()
            .flat_map(|c| c.files.iter().map(|f| f.path.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub project_id: String,
    pub fetched_at: i64,
    #[serde(default)]
    pub issues: Vec<IssueTicket>,
    #[serde(default)]
    pub pulls: Vec<PullRequest>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl Snapshot {
    pub fn new(project_id: impl Into<String>, fetched_at: i64) -> Self {
        Snapshot {
            project_id: project_id.into(),
            fetched_at,
            issues: Vec::new(),
            pulls: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    /// Restores canonical entry order.
    pub fn sort(&mut self) {
        self.issues.sort_by(|a, b| a.reference.cmp(&b.reference));
        self.pulls.sort_by(|a, b| a.reference.cmp(&b.reference));
    }

    pub fn pull(&self, reference: &IssueRef) -> Option<&PullRequest> {
        if !reference.is_pull() {
            return None;
        }
        self.pulls.iter().find(|p| p.reference == *reference)
    }

    pub fn issue(&self, reference: &IssueRef) -> Option<&IssueTicket> {
        self.issues.iter().find(|i| i.reference == *reference)
    }

    /// Ticket view of any entity (pull requests via [`PullRequest::as_ticket`]).
    pub fn ticket(&self, reference: &IssueRef) -> Option<IssueTicket> {
        match reference.system {
            TrackerSystem::PullRequest => self.pull(reference).map(PullRequest::as_ticket),
            _ => self.issue(reference).cloned(),
        }
    }

    pub fn has_pull_number(&self, number: u64) -> bool {
        self.pull(&IssueRef::pull(number)).is_some()
    }

    /// Merges another (partial) snapshot, e.g. Jira issues into a GitHub one.
    pub fn absorb(&mut self, other: Snapshot) {
        self.issues.extend(other.issues);
        self.pulls.extend(other.pulls);
        self.sort();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refs_normalize_and_order() {
        assert_eq!(IssueRef::new(TrackerSystem::GithubIssue, "#4521").key, "4521");
        assert_eq!(IssueRef::jira("kafka-9176").key, "KAFKA-9176");
        let mut refs = [
            IssueRef::jira("KAFKA-100"),
            IssueRef::github(10),
            IssueRef::jira("KAFKA-9"),
            IssueRef::github(9),
        ];
        refs.sort();
        let keys: Vec<_> = refs.iter().map(|r| r.key.as_str()).collect();
        assert_eq!(keys, ["9", "10", "KAFKA-9", "KAFKA-100"]);
    }

    #[test]
    fn ref_display_round_trips() {
        let r = IssueRef::jira("KAFKA-9176");
        assert_eq!(r.to_string(), "jira_issue:KAFKA-9176");
        assert_eq!(r.to_string().parse::<IssueRef>().unwrap(), r);
        assert_eq!(IssueRef::pull(7).number(), Some(7));
    }
}
