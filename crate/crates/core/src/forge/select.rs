use std::collections::BTreeSet;

use super::{IssueTicket, PrState, Snapshot, TrackerSystem};

/// Case-insensitive bug label vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BugLabels(BTreeSet<String>);

impl Default for BugLabels {
    fn default() -> Self {
        BugLabels::new(["bug", "type: bug", "kind/bug", "defect"])
    }
}

impl BugLabels {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        BugLabels(
            labels
                .into_iter()
                .map(|l| l.as_ref().trim().to_lowercase())
                .collect(),
        )
    }

    pub fn matches<'a>(&self, labels: impl IntoIterator<Item = &'a String>) -> bool {
        labels
            .into_iter()
            .any(|l| self.0.contains(&l.trim().to_lowercase()))
    }
}

const JIRA_DONE: [&str; 3] = ["resolved", "closed", "done"];
const JIRA_NON_FIX: [&str; 3] = ["won't fix", "invalid", "duplicate"];

/// Resolution predicate: GitHub entities must be closed; Jira tickets must be
/// resolved/closed/done with a resolution that is not a non-fix outcome.
pub fn is_resolved(ticket: &IssueTicket) -> bool {
    let status = ticket.status.trim().to_lowercase();
    match ticket.reference.system {
        TrackerSystem::GithubIssue | TrackerSystem::PullRequest => status == "closed",
        TrackerSystem::JiraIssue => {
            JIRA_DONE.contains(&status.as_str())
                && ticket.resolution.as_deref().is_some_and(|r| {
                    let r = r.trim().to_lowercase();
                    !r.is_empty() && !JIRA_NON_FIX.contains(&r.as_str())
                })
        }
    }
}

/// Bug-labeled, resolved tickets plus bug-labeled closed pull requests
/// (as ticket views), in snapshot order.
pub fn select_bug_tickets(snapshot: &Snapshot, labels: &BugLabels) -> Vec<IssueTicket> {
    let issues = snapshot
        .issues
        .iter()
        .filter(|t| labels.matches(&t.labels) && is_resolved(t))
        .cloned();
    let pulls = snapshot
        .pulls
        .iter()
        .filter(|p| p.state == PrState::Closed && labels.matches(&p.labels))
        .map(|p| p.as_ticket());
    issues.chain(pulls).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::{IssueRef, PullRequest};

    fn ticket(r: IssueRef, labels: &[&str], status: &str, resolution: Option<&str>) -> IssueTicket {
        let mut t = IssueTicket::new(r, 1);
        t.labels = labels.iter().map(|s| s.to_string()).collect();
        t.status = status.into();
        t.resolution = resolution.map(str::to_string);
        t
    }

    #[test]
    fn resolved_bug_is_included_open_bug_is_not() {
        let mut s = Snapshot::new("p", 0);
        s.issues.push(ticket(IssueRef::github(1), &["bug"], "closed", None));
        s.issues.push(ticket(IssueRef::github(2), &["bug"], "open", None));
        s.issues.push(ticket(IssueRef::github(3), &["enhancement"], "closed", None));
        let sel = select_bug_tickets(&s, &BugLabels::default());
        let keys: Vec<_> = sel.iter().map(|t| t.reference.key.as_str()).collect();
        assert_eq!(keys, ["1"]);
    }

    #[test]
    fn merged_bug_pull_request_is_a_bug_carrier() {
        let mut s = Snapshot::new("p", 0);
        let mut pr = PullRequest::new(9, 1);
        pr.state = PrState::Closed;
        pr.merged = true;
        pr.labels.insert("Type: Bug".into());
        s.pulls.push(pr);
        let sel = select_bug_tickets(&s, &BugLabels::default());
        assert_eq!(sel.len(), 1);
        assert_eq!(sel[0].reference, IssueRef::pull(9));
    }

    #[test]
    fn jira_resolution_rules() {
        let ok = ticket(IssueRef::jira("P-1"), &["Bug"], "Resolved", Some("Fixed"));
        let wont = ticket(IssueRef::jira("P-2"), &["Bug"], "Closed", Some("Won't Fix"));
        let none = ticket(IssueRef::jira("P-3"), &["Bug"], "Done", None);
        let open = ticket(IssueRef::jira("P-4"), &["Bug"], "Open", Some("Fixed"));
        assert!(is_resolved(&ok));
        assert!(!is_resolved(&wont));
        assert!(!is_resolved(&none));
        assert!(!is_resolved(&open));
    }
}
