//! Jira REST v2 fetcher. Issue links are carried over as integrated links
//! whose kind is the lowercased link type name (`duplicate`, `relates`, ...).

use serde_json::Value;
use url::Url;

use super::transport::Client;
use super::{Comment, ForgeError, IntegratedLink, IssueRef, IssueTicket, Result, Snapshot};

const PAGE: usize = 100;
const FIELDS: &str =
    "summary,description,issuetype,labels,status,resolution,created,resolutiondate,assignee,comment,issuelinks";

pub struct JiraFetcher<'a> {
    pub client: Client<'a>,
    pub base_url: String,
}

impl<'a> JiraFetcher<'a> {
    pub fn new(client: Client<'a>, base_url: impl Into<String>) -> Self {
        JiraFetcher {
            client,
            base_url: base_url.into(),
        }
    }

    pub fn search_url(&self, project_key: &str, start_at: usize) -> Result<String> {
        let base = format!("{}/rest/api/2/search", self.base_url.trim_end_matches('/'));
        let jql = format!("project = {project_key} ORDER BY created ASC");
        let url = Url::parse_with_params(
            &base,
            &[
                ("jql", jql.as_str()),
                ("startAt", &start_at.to_string()),
                ("maxResults", &PAGE.to_string()),
                ("fields", FIELDS),
            ],
        )
        .map_err(|e| ForgeError::Malformed {
            url: base.clone(),
            message: e.to_string(),
        })?;
        Ok(url.to_string())
    }

    /// Fetches every ticket of `project_key` created inside `window`.
    pub fn fetch(&self, project_key: &str, window: (i64, i64), fetched_at: i64) -> Result<Snapshot> {
        let mut snapshot = Snapshot::new(project_key, fetched_at);
        let mut start = 0usize;
        loop {
            let url = self.search_url(project_key, start)?;
            let (page, _) = self.client.get_json(&url)?;
            let issues = page
                .get("issues")
                .and_then(Value::as_array)
                .ok_or_else(|| ForgeError::Malformed {
                    url: url.clone(),
                    message: "missing `issues` array".into(),
                })?;
            for raw in issues {
                let t = parse_issue(raw).map_err(|message| ForgeError::Malformed {
                    url: url.clone(),
                    message,
                })?;
                if t.created_at >= window.0 && t.created_at <= window.1 {
                    snapshot.issues.push(t);
                }
            }
            let total = page.get("total").and_then(Value::as_u64).unwrap_or(0) as usize;
            start += issues.len();
            if issues.is_empty() || start >= total {
                break;
            }
        }
        snapshot.sort();
        Ok(snapshot)
    }
}

pub(crate) fn parse_jira_time(v: Option<&Value>) -> Option<i64> {
    let s = v?.as_str()?;
    chrono::DateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f%z")
        .or_else(|_| chrono::DateTime::parse_from_rfc3339(s))
        .ok()
        .map(|d| d.timestamp())
}

fn name_of(v: Option<&Value>) -> Option<String> {
    v.and_then(|o| o.get("name"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

fn text(v: Option<&Value>) -> String {
    v.and_then(Value::as_str).unwrap_or_default().replace("\r\n", "\n")
}

fn parse_issue(raw: &Value) -> std::result::Result<IssueTicket, String> {
    let key = raw
        .get("key")
        .and_then(Value::as_str)
        .ok_or("issue without key")?;
    let f = raw.get("fields").ok_or("issue without fields")?;
    let created = parse_jira_time(f.get("created")).ok_or_else(|| format!("{key}: bad created"))?;
    let mut t = IssueTicket::new(IssueRef::jira(key), created);
    t.title = text(f.get("summary"));
    t.description = text(f.get("description"));
    if let Some(labels) = f.get("labels").and_then(Value::as_array) {
        t.labels = labels
            .iter()
            .filter_map(|l| l.as_str().map(str::to_string))
            .collect();
    }
    if let Some(kind) = name_of(f.get("issuetype")) {
        t.labels.insert(kind);
    }
    t.status = name_of(f.get("status")).unwrap_or_default();
    t.resolution = name_of(f.get("resolution"));
    t.closed_at = parse_jira_time(f.get("resolutiondate"));
    t.assignee = f
        .get("assignee")
        .and_then(|a| a.get("name").or_else(|| a.get("displayName")))
        .and_then(Value::as_str)
        .map(str::to_string);
    if let Some(comments) = f
        .get("comment")
        .and_then(|c| c.get("comments"))
        .and_then(Value::as_array)
    {
        t.comments = comments
            .iter()
            .map(|c| Comment {
                author: name_of(c.get("author")).unwrap_or_default(),
                time: parse_jira_time(c.get("created")).unwrap_or_default(),
                text: text(c.get("body")),
            })
            .collect();
    }
    if let Some(links) = f.get("issuelinks").and_then(Value::as_array) {
        for l in links {
            let kind = name_of(l.get("type"))
                .unwrap_or_else(|| "relates".into())
                .to_lowercase();
            let other = l
                .get("outwardIssue")
                .or_else(|| l.get("inwardIssue"))
                .and_then(|o| o.get("key"))
                .and_then(Value::as_str);
            if let Some(other) = other {
                t.integrated_links.push(IntegratedLink {
                    target: IssueRef::jira(other),
                    kind,
                });
            }
        }
        t.integrated_links.sort();
        t.integrated_links.dedup();
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::transport::{Exchange, HttpResponse, NoSleep, ReplayTransport};
    use crate::forge::{is_resolved, TrackerSystem};
    use serde_json::json;

    fn fetch_with(pages: Vec<(usize, Value)>) -> Snapshot {
        let sleeper = NoSleep::default();
        let empty = ReplayTransport::from_exchanges([]);
        let probe = JiraFetcher::new(Client::new(&empty, None, &sleeper), "https://jira.test");
        let exchanges: Vec<Exchange> = pages
            .into_iter()
            .map(|(start, body)| Exchange {
                url: probe.search_url("KAFKA", start).unwrap(),
                response: HttpResponse::ok(body.to_string()),
            })
            .collect();
        let t = ReplayTransport::from_exchanges(exchanges);
        let f = JiraFetcher::new(Client::new(&t, None, &sleeper), "https://jira.test");
        f.fetch("KAFKA", (0, i64::MAX), 0).unwrap()
    }

    fn bug(key: &str) -> Value {
        json!({
            "key": key,
            "fields": {
                "summary": "NPE in consumer",
                "description": "stack trace",
                "issuetype": {"name": "Bug"},
                "labels": [],
                "status": {"name": "Resolved"},
                "resolution": {"name": "Fixed"},
                "created": "2020-01-01T10:00:00.000+0000",
                "resolutiondate": "2020-01-03T10:00:00.000+0000",
                "comment": {"comments": [
                    {"author": {"name": "dev"}, "created": "2020-01-02T10:00:00.000+0000", "body": "see PR"}
                ]},
                "issuelinks": [
                    {"type": {"name": "Duplicate", "outward": "duplicates"}, "outwardIssue": {"key": "KAFKA-100"}}
                ]
            }
        })
    }

    #[test]
    fn resolved_bug_ticket_is_parsed() {
        let s = fetch_with(vec![(0, json!({"total": 1, "issues": [bug("KAFKA-9176")]}))]);
        assert_eq!(s.issues.len(), 1);
        let t = &s.issues[0];
        assert_eq!(t.reference, IssueRef::jira("KAFKA-9176"));
        assert!(t.labels.contains("Bug"));
        assert!(is_resolved(t));
        assert_eq!(t.created_at, 1_577_872_800);
        assert_eq!(t.comments[0].text, "see PR");
        assert_eq!(
            t.integrated_links,
            vec![IntegratedLink {
                target: IssueRef::new(TrackerSystem::JiraIssue, "KAFKA-100"),
                kind: "duplicate".into()
            }]
        );
    }

    #[test]
    fn pagination_follows_start_at() {
        let s = fetch_with(vec![
            (0, json!({"total": 2, "issues": [bug("KAFKA-1")]})),
            (1, json!({"total": 2, "issues": [bug("KAFKA-2")]})),
        ]);
        assert_eq!(s.issues.len(), 2);
    }

    #[test]
    fn empty_project() {
        let s = fetch_with(vec![(0, json!({"total": 0, "issues": []}))]);
        assert!(s.issues.is_empty());
    }
}
