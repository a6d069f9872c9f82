//! Fixing pull request and fixing commit selection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::forge::{IssueRef, PullRequest, Snapshot};
use crate::links::{DistinctBug, LinkGraph, LinkPatterns, NodeId};
use crate::reconstruct::Reconstruction;
use crate::vcs::{Commit, CommitId, Repository, VcsError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceScore {
    pub value: u32,
    pub reasons: Vec<String>,
}

impl ConfidenceScore {
    fn grant(&mut self, reason: &str) {
        self.value += 1;
        self.reasons.push(reason.to_string());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixVia {
    PrLink,
    MessageMatch,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixRecord {
    pub bug: IssueRef,
    pub aliases: BTreeSet<IssueRef>,
    pub fixing_commit: Option<CommitId>,
    pub fixing_pr: Option<IssueRef>,
    pub via: FixVia,
    pub score: Option<ConfidenceScore>,
}

impl FixRecord {
    fn none(bug: &DistinctBug) -> Self {
        FixRecord {
            bug: bug.canonical.clone(),
            aliases: bug.aliases.clone(),
            fixing_commit: None,
            fixing_pr: None,
            via: FixVia::None,
            score: None,
        }
    }
}

fn time_distance(pr: &PullRequest, bug: &DistinctBug) -> i64 {
    let created = (pr.created_at - bug.created_at()).abs();
    let closed = match (pr.closed_at, bug.closed_at()) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => 0,
    };
    created + closed
}

fn closed_distance(pr: &PullRequest, bug: &DistinctBug) -> i64 {
    match (pr.closed_at, bug.closed_at()) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => i64::MAX,
    }
}

fn same_person(assignee: &str, name: &str, email: &str) -> bool {
    let a = assignee.trim().to_lowercase();
    if a.is_empty() {
        return false;
    }
    a == name.trim().to_lowercase()
        || a == email.trim().to_lowercase()
        || email.split('@').next().is_some_and(|local| a == local.trim().to_lowercase())
}

/// Confidence that `pr` fixes `bug`, relative to the candidate set.
pub fn score_fixing_pr(
    bug: &DistinctBug,
    pr: &PullRequest,
    graph: &LinkGraph,
    candidates: &[&PullRequest],
) -> ConfidenceScore {
    let mut score = ConfidenceScore::default();
    let me = NodeId::Ticket(pr.reference.clone());
    if bug.alias_nodes().any(|a| graph.has_edge(&me, &a)) {
        score.grant("pull request links the bug");
    }
    if bug.alias_nodes().any(|a| graph.has_edge(&a, &me)) {
        score.grant("bug links the pull request");
    }
    if let (Some(pa), Some(ba)) = (&pr.assignee, &bug.merged_ticket.assignee) {
        if !pa.trim().is_empty() && pa.trim().eq_ignore_ascii_case(ba.trim()) {
            score.grant("same assignee");
        }
    }
    let best = candidates.iter().map(|c| time_distance(c, bug)).min();
    if best == Some(time_distance(pr, bug)) {
        score.grant("nearest in time");
    }
    score
}

/// Merged pull requests linked to any alias of the bug, in either direction.
pub fn candidate_prs<'s>(bug: &DistinctBug, snapshot: &'s Snapshot, graph: &LinkGraph) -> Vec<&'s PullRequest> {
    linked_prs(bug, snapshot, graph).into_iter().filter(|p| p.merged).collect()
}

fn linked_prs<'s>(bug: &DistinctBug, snapshot: &'s Snapshot, graph: &LinkGraph) -> Vec<&'s PullRequest> {
    let mut refs = BTreeSet::new();
    for a in bug.alias_nodes() {
        if let NodeId::Ticket(r) = &a {
            if r.is_pull() {
                refs.insert(r.clone());
            }
        }
        for n in graph.neighbors(&a) {
            if let Some(r) = n.ticket() {
                if r.is_pull() {
                    refs.insert(r.clone());
                }
            }
        }
    }
    refs.iter().filter_map(|r| snapshot.pull(r)).collect()
}

/// Single candidate wins outright; otherwise highest confidence, then
/// closing time nearest the bug's, then lowest number.
pub fn select_fixing_pr<'a>(
    bug: &DistinctBug,
    candidates: &[&'a PullRequest],
    graph: &LinkGraph,
) -> Option<(&'a PullRequest, ConfidenceScore)> {
    match candidates {
        [] => None,
        [only] => Some((*only, score_fixing_pr(bug, only, graph, candidates))),
        _ => candidates
            .iter()
            .map(|p| (*p, score_fixing_pr(bug, p, graph, candidates)))
            .min_by(|(a, sa), (b, sb)| {
                sb.value
                    .cmp(&sa.value)
                    .then(closed_distance(a, bug).cmp(&closed_distance(b, bug)))
                    .then(a.number().cmp(&b.number()))
            }),
    }
}

/// Whether a message references one of the bug's identifiers.
pub fn mentions_bug(message: &str, bug: &DistinctBug, patterns: &LinkPatterns) -> bool {
    let refs = patterns.extract(message);
    refs.iter().any(|r| bug.aliases.iter().any(|a| same_ref(a, r)))
}

fn same_ref(alias: &IssueRef, found: &IssueRef) -> bool {
    if alias.system.is_github() && found.system.is_github() {
        alias.key == found.key
    } else {
        alias == found
    }
}

/// Scores commits by author = bug assignee, message mentions the bug, and
/// being the most recent one before the bug was closed; ties go to the newest
/// commit, then the smallest id.
pub fn select_fixing_commit(
    bug: &DistinctBug,
    commits: &[Commit],
    patterns: &LinkPatterns,
) -> Option<(CommitId, ConfidenceScore)> {
    if commits.is_empty() {
        return None;
    }
    if commits.len() == 1 {
        return Some((commits[0].id.clone(), ConfidenceScore::default()));
    }
    let before_close: Vec<&Commit> = commits
        .iter()
        .filter(|c| bug.closed_at().is_none_or(|t| c.commit_time <= t))
        .collect();
    let recent = before_close
        .iter()
        .max_by(|a, b| a.commit_time.cmp(&b.commit_time).then(b.id.cmp(&a.id)))
        .map(|c| c.id.clone());
    commits
        .iter()
        .map(|c| {
            let mut s = ConfidenceScore::default();
            if let Some(a) = &bug.merged_ticket.assignee {
                if same_person(a, &c.author_name, &c.author_email) {
                    s.grant("author is the bug assignee");
                }
            }
            if mentions_bug(&c.message, bug, patterns) {
                s.grant("message mentions the bug");
            }
            if recent.as_ref() == Some(&c.id) {
                s.grant("most recent before the bug was closed");
            }
            (c, s)
        })
        .min_by(|(a, sa), (b, sb)| {
            sb.value
                .cmp(&sa.value)
                .then(b.commit_time.cmp(&a.commit_time))
                .then(a.id.cmp(&b.id))
        })
        .map(|(c, s)| (c.id.clone(), s))
}

/// Commit messages indexed by the references they contain.
pub struct MessageIndex {
    hits: BTreeMap<(bool, String), Vec<CommitId>>,
}

fn index_key(r: &IssueRef) -> (bool, String) {
    (r.system.is_github(), r.key.clone())
}

impl MessageIndex {
    pub fn build(repo: &Repository, patterns: &LinkPatterns) -> Result<Self, VcsError> {
        let mut hits: BTreeMap<(bool, String), Vec<CommitId>> = BTreeMap::new();
        for id in repo.all_commits()?.iter() {
            let c = repo.commit(id)?;
            for r in patterns.extract(&c.message) {
                hits.entry(index_key(&r)).or_default().push(id.clone());
            }
        }
        Ok(MessageIndex { hits })
    }

    pub fn commits_for(&self, bug: &DistinctBug) -> BTreeSet<CommitId> {
        bug.aliases
            .iter()
            .flat_map(|a| self.hits.get(&index_key(a)).into_iter().flatten().cloned())
            .collect()
    }
}

/// Everything fix matching reads.
pub struct FixInputs<'a> {
    pub snapshot: &'a Snapshot,
    pub repo: &'a Repository,
    pub graph: &'a LinkGraph,
    pub reconstruction: &'a Reconstruction,
    pub patterns: &'a LinkPatterns,
    pub messages: &'a MessageIndex,
}

fn load_commits(repo: &Repository, ids: impl IntoIterator<Item = CommitId>) -> Result<Vec<Commit>, VcsError> {
    ids.into_iter().map(|id| repo.commit(&id)).collect()
}

/// Pull-request path first, then commit-message matching, else no fix.
pub fn match_fix(bug: &DistinctBug, inputs: &FixInputs<'_>) -> Result<FixRecord, VcsError> {
    let linked = linked_prs(bug, inputs.snapshot, inputs.graph);
    let candidates: Vec<&PullRequest> = linked.iter().copied().filter(|p| p.merged).collect();
    if let Some((pr, score)) = select_fixing_pr(bug, &candidates, inputs.graph) {
        let mapped: Vec<CommitId> = match inputs.reconstruction.maps.get(&pr.reference) {
            Some(map) => map.distinct_mapped(),
            None => match &pr.merge_commit {
                Some(m) if inputs.repo.contains(m)? => vec![m.clone()],
                _ => Vec::new(),
            },
        };
        let mut reachable = Vec::new();
        for c in mapped {
            if inputs.repo.contains(&c)? {
                reachable.push(c);
            }
        }
        let commits = load_commits(inputs.repo, reachable)?;
        if let Some((commit, _)) = select_fixing_commit(bug, &commits, inputs.patterns) {
            return Ok(FixRecord {
                bug: bug.canonical.clone(),
                aliases: bug.aliases.clone(),
                fixing_commit: Some(commit),
                fixing_pr: Some(pr.reference.clone()),
                via: FixVia::PrLink,
                score: Some(score),
            });
        }
    } else if !linked.is_empty() {
        // Linked only to pull requests that were never accepted.
        return Ok(FixRecord::none(bug));
    }
    let commits = load_commits(inputs.repo, inputs.messages.commits_for(bug))?;
    match select_fixing_commit(bug, &commits, inputs.patterns) {
        Some((commit, score)) => Ok(FixRecord {
            bug: bug.canonical.clone(),
            aliases: bug.aliases.clone(),
            fixing_commit: Some(commit),
            fixing_pr: None,
            via: FixVia::MessageMatch,
            score: Some(score),
        }),
        None => Ok(FixRecord::none(bug)),
    }
}

pub fn match_all_fixes(bugs: &[DistinctBug], inputs: &FixInputs<'_>) -> Result<Vec<FixRecord>, VcsError> {
    let mut out = bugs.iter().map(|b| match_fix(b, inputs)).collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| a.bug.cmp(&b.bug));
    Ok(out)
}

/// Message-only matching without pull-request data: the newest commit whose
/// message references the bug.
pub fn match_all_fixes_bszz(bugs: &[DistinctBug], repo: &Repository, messages: &MessageIndex) -> Result<Vec<FixRecord>, VcsError> {
    let mut out = Vec::with_capacity(bugs.len());
    for bug in bugs {
        let commits = load_commits(repo, messages.commits_for(bug))?;
        let newest = commits
            .iter()
            .max_by(|a, b| a.commit_time.cmp(&b.commit_time).then(b.id.cmp(&a.id)));
        out.push(match newest {
            Some(c) => FixRecord {
                bug: bug.canonical.clone(),
                aliases: bug.aliases.clone(),
                fixing_commit: Some(c.id.clone()),
                fixing_pr: None,
                via: FixVia::MessageMatch,
                score: None,
            },
            None => FixRecord::none(bug),
        });
    }
    out.sort_by(|a, b| a.bug.cmp(&b.bug));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::{IssueTicket, PrState};
    use crate::links::{LinkEdge, Provenance};

    fn bug(created: i64, closed: i64, assignee: Option<&str>) -> DistinctBug {
        let mut t = IssueTicket::new(IssueRef::jira("P-1"), created);
        t.closed_at = Some(closed);
        t.assignee = assignee.map(str::to_string);
        DistinctBug::single(t)
    }

    fn pr(n: u64, created: i64, closed: i64, assignee: Option<&str>) -> PullRequest {
        let mut p = PullRequest::new(n, created);
        p.state = PrState::Closed;
        p.merged = true;
        p.closed_at = Some(closed);
        p.assignee = assignee.map(str::to_string);
        p
    }

    fn link(g: &mut LinkGraph, a: &IssueRef, b: &IssueRef) {
        g.add(LinkEdge {
            src: NodeId::Ticket(a.clone()),
            dst: NodeId::Ticket(b.clone()),
            provenance: Provenance::TextMatch,
            location: "t".into(),
            kind: String::new(),
        });
    }

    fn commit(id: char, time: i64, author: &str, message: &str) -> Commit {
        Commit {
            id: CommitId::parse(&id.to_string().repeat(40)).unwrap(),
            parents: Vec::new(),
            author_name: author.into(),
            author_email: format!("{author}@x.org"),
            author_time: time,
            commit_time: time,
            message: message.into(),
        }
    }

    #[test]
    fn all_conditions_give_four() {
        let b = bug(100, 200, Some("ann"));
        let p = pr(1, 110, 190, Some("ann"));
        let mut g = LinkGraph::new();
        link(&mut g, &p.reference, &b.canonical);
        link(&mut g, &b.canonical, &p.reference);
        assert_eq!(score_fixing_pr(&b, &p, &g, &[&p]).value, 4);
    }

    #[test]
    fn one_directional_link_only() {
        let b = bug(100, 200, None);
        let p = pr(1, 10, 20, None);
        let near = pr(2, 110, 190, None);
        let mut g = LinkGraph::new();
        link(&mut g, &p.reference, &b.canonical);
        let s = score_fixing_pr(&b, &p, &g, &[&p, &near]);
        assert_eq!(s.value, 1);
        assert_eq!(s.reasons, vec!["pull request links the bug".to_string()]);
        assert_eq!(score_fixing_pr(&b, &near, &g, &[&p, &near]).value, 1);
    }

    #[test]
    fn assignee_breaks_bidirectional_tie() {
        let b = bug(100, 200, Some("ann"));
        let a = pr(1, 100, 200, None);
        let c = pr(2, 100, 200, Some("ann"));
        let mut g = LinkGraph::new();
        for p in [&a, &c] {
            link(&mut g, &p.reference, &b.canonical);
            link(&mut g, &b.canonical, &p.reference);
        }
        let (winner, _) = select_fixing_pr(&b, &[&a, &c], &g).unwrap();
        assert_eq!(winner.number(), 2);
    }

    #[test]
    fn tie_goes_to_nearest_close_then_lowest_number() {
        let b = bug(100, 200, None);
        let a = pr(5, 100, 230, None);
        let c = pr(3, 100, 170, None);
        let d = pr(4, 100, 230, None);
        let g = LinkGraph::new();
        for _ in 0..100 {
            // a and c tie on time distance; closed distance ties too, so the lower number wins
            let (w, _) = select_fixing_pr(&b, &[&a, &c, &d], &g).unwrap();
            assert_eq!(w.number(), 3);
        }
    }

    #[test]
    fn assignee_and_mention_beat_recency() {
        let b = bug(100, 1000, Some("ann"));
        let patterns = LinkPatterns::new(false, &["P".to_string()].into());
        let commits = vec![
            commit('a', 300, "x", "refactor"),
            commit('b', 200, "ann", "P-1: guard null"),
            commit('c', 400, "x", "tests"),
        ];
        let (id, _) = select_fixing_commit(&b, &commits, &patterns).unwrap();
        assert_eq!(id, commits[1].id);
    }

    #[test]
    fn equal_scores_pick_newest() {
        let b = bug(100, 150, None);
        let patterns = LinkPatterns::new(false, &["P".to_string()].into());
        let commits = vec![commit('a', 300, "x", "P-1"), commit('b', 400, "x", "P-1")];
        let (id, _) = select_fixing_commit(&b, &commits, &patterns).unwrap();
        assert_eq!(id, commits[1].id);
    }
}
