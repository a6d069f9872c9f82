//! On-disk snapshot layout:
//!
//! ```text
//! <dir>/manifest.json          project_id, fetched_at, entity file lists
//! <dir>/issues/<system>-<key>.json
//! <dir>/pulls/<number>.json
//! ```
//!
//! Every file is canonical JSON: object keys sorted, two-space indentation,
//! LF line endings, trailing newline. Unknown fields survive a load/save.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{ForgeError, IssueTicket, PrState, PullRequest, Result, Snapshot};

const MANIFEST: &str = "manifest.json";

/// Canonical JSON text of any serializable value.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    // `Value` maps are ordered by key, which gives the canonical ordering.
    let v = serde_json::to_value(value).expect("snapshot types serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

fn issue_file_name(t: &IssueTicket) -> String {
    format!("{}-{}.json", t.reference.system.as_str(), t.reference.key)
}

pub fn save_snapshot(snapshot: &Snapshot, dir: &Path) -> Result<()> {
    let mut snapshot = snapshot.clone();
    snapshot.sort();
    let issues_dir = dir.join("issues");
    let pulls_dir = dir.join("pulls");
    for d in [&issues_dir, &pulls_dir] {
        if d.exists() {
            for entry in fs::read_dir(d)? {
                let p = entry?.path();
                if p.extension().and_then(|e| e.to_str()) == Some("json") {
                    fs::remove_file(p)?;
                }
            }
        }
        fs::create_dir_all(d)?;
    }

    let mut issue_files = Vec::new();
    for issue in &snapshot.issues {
        let name = issue_file_name(issue);
        fs::write(issues_dir.join(&name), to_canonical_json(issue))?;
        issue_files.push(Value::String(name));
    }
    let mut pull_files = Vec::new();
    for pull in &snapshot.pulls {
        let name = format!("{}.json", pull.reference.key);
        fs::write(pulls_dir.join(&name), to_canonical_json(pull))?;
        pull_files.push(Value::String(name));
    }

    let mut manifest = serde_json::Map::new();
    for (k, v) in &snapshot.extra {
        manifest.insert(k.clone(), v.clone());
    }
    manifest.insert("project_id".into(), Value::String(snapshot.project_id.clone()));
    manifest.insert("fetched_at".into(), Value::from(snapshot.fetched_at));
    manifest.insert("issues".into(), Value::Array(issue_files));
    manifest.insert("pulls".into(), Value::Array(pull_files));
    fs::write(dir.join(MANIFEST), to_canonical_json(&Value::Object(manifest)))?;
    Ok(())
}

pub fn load_snapshot(dir: &Path) -> Result<Snapshot> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: Value = read_json(&manifest_path, "manifest")?;
    let Value::Object(mut manifest) = manifest else {
        return Err(violation("manifest", "<root>", "expected an object"));
    };
    let project_id = match manifest.remove("project_id") {
        Some(Value::String(s)) => s,
        _ => return Err(violation("manifest", "project_id", "missing or not a string")),
    };
    let fetched_at = match manifest.remove("fetched_at") {
        Some(v) if v.is_i64() => v.as_i64().unwrap_or_default(),
        _ => return Err(violation("manifest", "fetched_at", "missing or not an integer")),
    };
    let issue_names = file_list(manifest.remove("issues"), "issues")?;
    let pull_names = file_list(manifest.remove("pulls"), "pulls")?;

    let mut snapshot = Snapshot::new(project_id, fetched_at);
    snapshot.extra = manifest.into_iter().collect();
    for name in issue_names {
        let issue: IssueTicket = load_entity(&dir.join("issues").join(&name), &name)?;
        check_times(&name, issue.created_at, issue.closed_at)?;
        snapshot.issues.push(issue);
    }
    for name in pull_names {
        let pull: PullRequest = load_entity(&dir.join("pulls").join(&name), &name)?;
        check_times(&name, pull.created_at, pull.closed_at)?;
        if pull.merged && pull.state != PrState::Closed {
            return Err(violation(&name, "state", "merged pull request must be closed"));
        }
        snapshot.pulls.push(pull);
    }
    snapshot.sort();
    Ok(snapshot)
}

fn file_list(v: Option<Value>, field: &str) -> Result<Vec<String>> {
    match v {
        None => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|i| match i {
                Value::String(s) => Ok(s),
                _ => Err(violation("manifest", field, "expected file names")),
            })
            .collect(),
        Some(_) => Err(violation("manifest", field, "expected an array")),
    }
}

fn read_json(path: &Path, entity: &str) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| violation(entity, "<root>", &e.to_string()))
}

fn load_entity<T: DeserializeOwned>(path: &Path, name: &str) -> Result<T> {
    let value = read_json(path, name)?;
    let entity = entity_label(&value, name);
    let Some(obj) = value.as_object() else {
        return Err(violation(&entity, "<root>", "expected an object"));
    };
    for field in ["ref", "created_at"] {
        if !obj.contains_key(field) {
            return Err(violation(&entity, field, "required field missing"));
        }
    }
    if !obj["created_at"].is_i64() {
        return Err(violation(&entity, "created_at", "expected epoch seconds"));
    }
    serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "<unknown>".into());
        violation(&entity, &field, &msg)
    })
}

fn entity_label(value: &Value, fallback: &str) -> String {
    let r = value.get("ref");
    match (
        r.and_then(|r| r.get("system")).and_then(Value::as_str),
        r.and_then(|r| r.get("key")).and_then(Value::as_str),
    ) {
        (Some(s), Some(k)) => format!("{s}:{k}"),
        _ => fallback.to_string(),
    }
}

fn check_times(entity: &str, created: i64, closed: Option<i64>) -> Result<()> {
    match closed {
        Some(c) if c < created => Err(violation(entity, "closed_at", "earlier than created_at")),
        _ => Ok(()),
    }
}

fn violation(entity: &str, field: &str, message: &str) -> ForgeError {
    ForgeError::SchemaViolation {
        entity: entity.to_string(),
        field: field.to_string(),
        message: message.to_string(),
    }
}
