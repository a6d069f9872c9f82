//! GitHub REST v3 fetcher: issues, pull requests, inner commits with file
//! patches, comments, reviews and timeline cross-references.

use std::collections::BTreeSet;

use serde_json::Value;

use super::transport::Client;
use super::{
    Comment, ForgeError, InnerCommit, InnerFile, IntegratedLink, IssueRef, IssueTicket, PrState,
    PullRequest, Result, Snapshot,
};
use crate::vcs::{CommitId, Hunk};

pub const DEFAULT_API: &str = "https://api.github.com";

pub struct GithubFetcher<'a> {
    pub client: Client<'a>,
    pub api_base: String,
}

impl<'a> GithubFetcher<'a> {
    pub fn new(client: Client<'a>) -> Self {
        GithubFetcher {
            client,
            api_base: DEFAULT_API.to_string(),
        }
    }

    fn repo_url(&self, project: &str, tail: &str) -> String {
        format!("{}/repos/{}/{}", self.api_base.trim_end_matches('/'), project, tail)
    }

    /// Follows `Link: rel="next"` until exhausted, concatenating array pages.
    pub fn paginate(&self, first: &str) -> Result<Vec<Value>> {
        let mut out = Vec::new();
        let mut next = Some(first.to_string());
        while let Some(url) = next {
            let (value, resp) = self.client.get_json(&url)?;
            match value {
                Value::Array(items) => out.extend(items),
                _ => {
                    return Err(ForgeError::Malformed {
                        url,
                        message: "expected a JSON array page".into(),
                    })
                }
            }
            next = resp.next_link();
        }
        Ok(out)
    }

    /// Captures every issue and pull request created inside `window`
    /// (inclusive epoch seconds).
    pub fn fetch(&self, project: &str, window: (i64, i64), fetched_at: i64) -> Result<Snapshot> {
        let issues_raw = self.paginate(&self.repo_url(
            project,
            "issues?state=all&per_page=100&sort=created&direction=asc",
        ))?;
        let pulls_raw = self.paginate(&self.repo_url(
            project,
            "pulls?state=all&per_page=100&sort=created&direction=asc",
        ))?;
        let in_window = |v: &Value| {
            parse_time(v.get("created_at"))
                .map(|t| t >= window.0 && t <= window.1)
                .unwrap_or(false)
        };
        let issues_raw: Vec<Value> = issues_raw
            .into_iter()
            .filter(|v| v.get("pull_request").is_none() && in_window(v))
            .collect();
        let pulls_raw: Vec<Value> = pulls_raw.into_iter().filter(in_window).collect();

        let mut snapshot = Snapshot::new(project, fetched_at);
        for r in self
            .client
            .map_bounded(&issues_raw, |raw| self.issue(project, raw))
        {
            snapshot.issues.push(r?);
        }
        for r in self
            .client
            .map_bounded(&pulls_raw, |raw| self.pull(project, raw))
        {
            snapshot.pulls.push(r?);
        }
        snapshot.sort();
        Ok(snapshot)
    }

    fn issue(&self, project: &str, raw: &Value) -> Result<IssueTicket> {
        let number = number_of(raw)?;
        let mut t = IssueTicket::new(
            IssueRef::github(number),
            parse_time(raw.get("created_at")).unwrap_or_default(),
        );
        t.title = str_field(raw, "title");
        t.description = str_field(raw, "body");
        t.labels = labels(raw);
        t.status = str_field(raw, "state");
        t.resolution = raw
            .get("state_reason")
            .and_then(Value::as_str)
            .map(str::to_string);
        t.closed_at = parse_time(raw.get("closed_at"));
        t.assignee = login(raw.get("assignee"));
        t.comments = self.comments(&self.repo_url(
            project,
            &format!("issues/{number}/comments?per_page=100"),
        ))?;
        t.integrated_links = self.timeline_links(project, number)?;
        Ok(t)
    }

    fn pull(&self, project: &str, raw: &Value) -> Result<PullRequest> {
        let number = number_of(raw)?;
        let mut p = PullRequest::new(number, parse_time(raw.get("created_at")).unwrap_or_default());
        p.title = str_field(raw, "title");
        p.description = str_field(raw, "body");
        p.state = match raw.get("state").and_then(Value::as_str) {
            Some("closed") => PrState::Closed,
            _ => PrState::Open,
        };
        p.merged = raw.get("merged_at").is_some_and(|v| !v.is_null());
        p.merge_commit = raw
            .get("merge_commit_sha")
            .and_then(Value::as_str)
            .and_then(|s| CommitId::parse(s).ok());
        p.closed_at = parse_time(raw.get("closed_at"));
        p.assignee = login(raw.get("assignee"));
        p.labels = labels(raw);

        let commits = self.paginate(&self.repo_url(
            project,
            &format!("pulls/{number}/commits?per_page=100"),
        ))?;
        for c in &commits {
            p.inner_commits.push(self.inner_commit(project, c)?);
        }
        p.comments = self.comments(&self.repo_url(
            project,
            &format!("issues/{number}/comments?per_page=100"),
        ))?;
        let mut reviews = self.comments_with(
            &self.repo_url(project, &format!("pulls/{number}/reviews?per_page=100")),
            "submitted_at",
        )?;
        reviews.extend(self.comments(&self.repo_url(
            project,
            &format!("pulls/{number}/comments?per_page=100"),
        ))?);
        reviews.retain(|r| !r.text.is_empty());
        p.reviews = reviews;
        p.integrated_links = self.timeline_links(project, number)?;
        Ok(p)
    }

    fn inner_commit(&self, project: &str, raw: &Value) -> Result<InnerCommit> {
        let sha = raw.get("sha").and_then(Value::as_str).unwrap_or_default();
        let hash = CommitId::parse(sha).map_err(|_| ForgeError::Malformed {
            url: project.to_string(),
            message: format!("bad commit sha {sha:?}"),
        })?;
        let commit = raw.get("commit").cloned().unwrap_or(Value::Null);
        let author = commit.get("author").cloned().unwrap_or(Value::Null);
        let (detail, _) = self
            .client
            .get_json(&self.repo_url(project, &format!("commits/{sha}")))?;
        let files = detail
            .get("files")
            .and_then(Value::as_array)
            .map(|files| {
                files
                    .iter()
                    .map(|f| InnerFile {
                        path: str_field(f, "filename"),
                        additions: f.get("additions").and_then(Value::as_u64).unwrap_or(0) as usize,
                        deletions: f.get("deletions").and_then(Value::as_u64).unwrap_or(0) as usize,
                        hunks: f.get("patch").and_then(Value::as_str).map(parse_patch),
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(InnerCommit {
            hash,
            message: str_field(&commit, "message"),
            author_name: str_field(&author, "name"),
            author_email: str_field(&author, "email"),
            author_time: parse_time(author.get("date")).unwrap_or_default(),
            files,
        })
    }

    fn comments(&self, url: &str) -> Result<Vec<Comment>> {
        self.comments_with(url, "created_at")
    }

    fn comments_with(&self, url: &str, time_field: &str) -> Result<Vec<Comment>> {
        Ok(self
            .paginate(url)?
            .iter()
            .map(|c| Comment {
                author: login(c.get("user")).unwrap_or_default(),
                time: parse_time(c.get(time_field)).unwrap_or_default(),
                text: str_field(c, "body"),
            })
            .collect())
    }

    /// Timeline events: `connected` (the "Linked issues / Linked pull
    /// requests" relation) and `cross-referenced` mentions.
    fn timeline_links(&self, project: &str, number: u64) -> Result<Vec<IntegratedLink>> {
        let events = self.paginate(&self.repo_url(
            project,
            &format!("issues/{number}/timeline?per_page=100"),
        ))?;
        let mut links = BTreeSet::new();
        for e in &events {
            let kind = match e.get("event").and_then(Value::as_str) {
                Some("connected") => "integrated",
                Some("cross-referenced") => "mentioned_by",
                _ => continue,
            };
            let source = e
                .get("source")
                .and_then(|s| s.get("issue"))
                .or_else(|| e.get("subject"));
            if let Some(src) = source {
                if let Some(n) = src.get("number").and_then(Value::as_u64) {
                    if n == number {
                        continue;
                    }
                    let target = if src.get("pull_request").is_some() {
                        IssueRef::pull(n)
                    } else {
                        IssueRef::github(n)
                    };
                    links.insert(IntegratedLink {
                        target,
                        kind: kind.into(),
                    });
                }
            }
        }
        Ok(links.into_iter().collect())
    }
}

fn number_of(raw: &Value) -> Result<u64> {
    raw.get("number")
        .and_then(Value::as_u64)
        .ok_or_else(|| ForgeError::Malformed {
            url: "issue".into(),
            message: "missing number".into(),
        })
}

fn str_field(v: &Value, field: &str) -> String {
    v.get(field)
        .and_then(Value::as_str)
        .unwrap_or_default()
        .replace("\r\n", "\n")
}

fn login(v: Option<&Value>) -> Option<String> {
    v.and_then(|u| u.get("login"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

fn labels(raw: &Value) -> BTreeSet<String> {
    raw.get("labels")
        .and_then(Value::as_array)
        .map(|ls| {
            ls.iter()
                .filter_map(|l| l.get("name").and_then(Value::as_str).map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

pub(crate) fn parse_time(v: Option<&Value>) -> Option<i64> {
    let s = v?.as_str()?;
    chrono::DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|d| d.timestamp())
}

/// Parses a unified-diff `patch` string (as returned per file by the API)
/// into context-free hunks.
pub fn parse_patch(patch: &str) -> Vec<Hunk> {
    let mut hunks = Vec::new();
    let mut old_line = 0usize;
    let mut new_line = 0usize;
    let mut current: Option<Hunk> = None;
    let flush = |cur: &mut Option<Hunk>, hunks: &mut Vec<Hunk>| {
        if let Some(h) = cur.take() {
            if !h.removed.is_empty() || !h.added.is_empty() {
                hunks.push(h);
            }
        }
    };
    for line in patch.lines() {
        if let Some(header) = line.strip_prefix("@@") {
            flush(&mut current, &mut hunks);
            let mut parts = header.split_whitespace();
            let old = parts.next().unwrap_or("-0");
            let new = parts.next().unwrap_or("+0");
            old_line = range_start(old.trim_start_matches('-'));
            new_line = range_start(new.trim_start_matches('+'));
            continue;
        }
        let (tag, text) = line.split_at(line.len().min(1));
        match tag {
            "-" => {
                let h = current.get_or_insert_with(|| empty_hunk(old_line, new_line));
                h.removed.push((old_line, text.to_string()));
                old_line += 1;
            }
            "+" => {
                let h = current.get_or_insert_with(|| empty_hunk(old_line, new_line));
                h.added.push((new_line, text.to_string()));
                new_line += 1;
            }
            "\\" => {}
            _ => {
                flush(&mut current, &mut hunks);
                old_line += 1;
                new_line += 1;
            }
        }
    }
    flush(&mut current, &mut hunks);
    hunks
}

fn empty_hunk(old_start: usize, new_start: usize) -> Hunk {
    Hunk {
        old_start,
        removed: Vec::new(),
        new_start,
        added: Vec::new(),
    }
}

fn range_start(range: &str) -> usize {
    range
        .split(',')
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}
