//! Cross references between tickets, pull requests and commits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::forge::{IntegratedLink, IssueRef, IssueTicket, Snapshot, TrackerSystem};
use crate::reconstruct::Reconstruction;
use crate::vcs::{CommitId, Repository, VcsError};

/// Closing keyword followed by `#N`.
pub const GITHUB_KEYWORD_PATTERN: &str =
    r"(?i)\b(?:close[sd]?|fix(?:e[sd])?|resolve[sd]?)[\s:]*#(\d+)\b";
/// Parenthesized `(#N)`, as appended by squash merges.
pub const GITHUB_PAREN_PATTERN: &str = r"\(#(\d+)\)";
/// Project key followed by `-NUMBER`; `{keys}` is replaced by the escaped
/// project keys.
pub const JIRA_PATTERN_TEMPLATE: &str = r"(?i)(?:^|[^A-Za-z0-9_\-])({keys})-(\d+)\b";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkContext {
    Github,
    Jira,
}

/// Compiled link patterns of one project. GitHub patterns capture the
/// number in group 1; the Jira pattern captures key and number in groups 1
/// and 2.
#[derive(Debug, Clone)]
pub struct LinkPatterns {
    github: Vec<Regex>,
    jira: Option<Regex>,
}

impl LinkPatterns {
    pub fn new(github: bool, project_keys: &BTreeSet<String>) -> Self {
        Self::with_overrides(github, project_keys, None, None).expect("built-in patterns compile")
    }

    pub fn with_overrides(
        github: bool,
        project_keys: &BTreeSet<String>,
        github_patterns: Option<&[String]>,
        jira_template: Option<&str>,
    ) -> Result<Self, regex::Error> {
        let github = if github {
            match github_patterns {
                Some(ps) => ps.iter().map(|p| Regex::new(p)).collect::<Result<_, _>>()?,
                None => vec![Regex::new(GITHUB_KEYWORD_PATTERN)?, Regex::new(GITHUB_PAREN_PATTERN)?],
            }
        } else {
            Vec::new()
        };
        let jira = if project_keys.is_empty() {
            None
        } else {
            let keys = project_keys
                .iter()
                .map(|k| regex::escape(k))
                .collect::<Vec<_>>()
                .join("|");
            let template = jira_template.unwrap_or(JIRA_PATTERN_TEMPLATE);
            Some(Regex::new(&template.replace("{keys}", &keys))?)
        };
        Ok(LinkPatterns { github, jira })
    }

    /// References in order of first occurrence, deduplicated. GitHub
    /// numbers come back as [`TrackerSystem::GithubIssue`] references; see
    /// [`resolve_github`] for the issue/pull request distinction.
    pub fn extract(&self, text: &str) -> Vec<IssueRef> {
        let mut hits: Vec<(usize, IssueRef)> = Vec::new();
        for re in &self.github {
            for c in re.captures_iter(text) {
                if let Some(m) = c.get(1) {
                    if let Ok(n) = m.as_str().parse::<u64>() {
                        hits.push((m.start(), IssueRef::github(n)));
                    }
                }
            }
        }
        if let Some(re) = &self.jira {
            for c in re.captures_iter(text) {
                if let (Some(k), Some(n)) = (c.get(1), c.get(2)) {
                    hits.push((k.start(), IssueRef::jira(&format!("{}-{}", k.as_str(), n.as_str()))));
                }
            }
        }
        hits.sort_by_key(|(pos, _)| *pos);
        let mut seen = BTreeSet::new();
        hits.into_iter()
            .filter(|(_, r)| seen.insert(r.clone()))
            .map(|(_, r)| r)
            .collect()
    }
}

/// Extracts references using the default patterns of one tracker.
pub fn extract_text_links(text: &str, context: LinkContext, project_keys: &BTreeSet<String>) -> Vec<IssueRef> {
    match context {
        LinkContext::Github => LinkPatterns::new(true, &BTreeSet::new()).extract(text),
        LinkContext::Jira => LinkPatterns::new(false, project_keys).extract(text),
    }
}

/// GitHub issues and pull requests share one number space: a number names
/// the pull request when the snapshot has one, otherwise the issue.
pub fn resolve_github(snapshot: &Snapshot, r: &IssueRef) -> IssueRef {
    match (r.system, r.number()) {
        (TrackerSystem::GithubIssue, Some(n)) if snapshot.has_pull_number(n) => IssueRef::pull(n),
        (TrackerSystem::PullRequest, Some(n))
            if !snapshot.has_pull_number(n) && snapshot.issue(&IssueRef::github(n)).is_some() =>
        {
            IssueRef::github(n)
        }
        _ => r.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    Ticket(IssueRef),
    Commit(CommitId),
}

impl NodeId {
    pub fn ticket(&self) -> Option<&IssueRef> {
        match self {
            NodeId::Ticket(r) => Some(r),
            NodeId::Commit(_) => None,
        }
    }

    fn system_and_key(&self) -> (&str, &str) {
        match self {
            NodeId::Ticket(r) => (r.system.as_str(), r.key.as_str()),
            NodeId::Commit(c) => ("commit", c.as_str()),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (s, k) = self.system_and_key();
        write!(f, "{s}:{k}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Integrated,
    Mention,
    TextMatch,
    Transitive,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Integrated => "integrated",
            Provenance::Mention => "mention",
            Provenance::TextMatch => "text_match",
            Provenance::Transitive => "transitive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub provenance: Provenance,
    pub location: String,
    /// Link type reported by the platform (`integrated`, `duplicate`, ...),
    /// empty for text matches.
    #[serde(default)]
    pub kind: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkGraph {
    edges: BTreeSet<LinkEdge>,
    fwd: BTreeMap<NodeId, BTreeSet<NodeId>>,
    bwd: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl LinkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an edge; self edges and exact duplicates are ignored.
    pub fn add(&mut self, edge: LinkEdge) -> bool {
        if edge.src == edge.dst {
            return false;
        }
        let (s, d) = (edge.src.clone(), edge.dst.clone());
        if !self.edges.insert(edge) {
            return false;
        }
        self.fwd.entry(s.clone()).or_default().insert(d.clone());
        self.bwd.entry(d).or_default().insert(s);
        true
    }

    pub fn edges(&self) -> impl Iterator<Item = &LinkEdge> {
        self.edges.iter()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn has_edge(&self, src: &NodeId, dst: &NodeId) -> bool {
        self.fwd.get(src).is_some_and(|s| s.contains(dst))
    }

    /// Edge in either direction.
    pub fn linked(&self, a: &NodeId, b: &NodeId) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn successors(&self, n: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.fwd.get(n).into_iter().flatten()
    }

    pub fn predecessors(&self, n: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.bwd.get(n).into_iter().flatten()
    }

    pub fn neighbors(&self, n: &NodeId) -> BTreeSet<&NodeId> {
        self.successors(n).chain(self.predecessors(n)).collect()
    }

    pub fn edges_between<'a>(&'a self, a: &'a NodeId, b: &'a NodeId) -> impl Iterator<Item = &'a LinkEdge> {
        self.edges
            .iter()
            .filter(move |e| (e.src == *a && e.dst == *b) || (e.src == *b && e.dst == *a))
    }

    /// Infers `ticket -> PR -> ticket` and `ticket -> ticket -> PR` paths of
    /// length two as direct edges, unless the endpoints are already linked
    /// in that direction.
    pub fn add_transitive_edges(&mut self) {
        let direct: Vec<LinkEdge> = self
            .edges
            .iter()
            .filter(|e| e.provenance != Provenance::Transitive)
            .cloned()
            .collect();
        let mut by_src: BTreeMap<&NodeId, Vec<&LinkEdge>> = BTreeMap::new();
        for e in &direct {
            by_src.entry(&e.src).or_default().push(e);
        }
        let mut inferred = Vec::new();
        for first in &direct {
            let (Some(a), Some(b)) = (first.src.ticket(), first.dst.ticket()) else {
                continue;
            };
            if a.is_pull() {
                continue;
            }
            for second in by_src.get(&first.dst).into_iter().flatten() {
                let Some(c) = second.dst.ticket() else {
                    continue;
                };
                let shape_ok = if b.is_pull() { !c.is_pull() } else { c.is_pull() };
                if !shape_ok || a == c {
                    continue;
                }
                inferred.push((first.src.clone(), second.dst.clone(), first.dst.clone()));
            }
        }
        for (src, dst, via) in inferred {
            if self.has_edge(&src, &dst) {
                continue;
            }
            self.add(LinkEdge {
                src,
                dst,
                provenance: Provenance::Transitive,
                location: format!("via {via}"),
                kind: String::new(),
            });
        }
    }

    /// Writes `links.csv` (src_system, src_key, dst_system, dst_key,
    /// provenance, location).
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(["src_system", "src_key", "dst_system", "dst_key", "provenance", "location"])?;
        for e in &self.edges {
            let (ss, sk) = e.src.system_and_key();
            let (ds, dk) = e.dst.system_and_key();
            w.write_record([ss, sk, ds, dk, e.provenance.as_str(), e.location.as_str()])?;
        }
        w.flush()
    }
}

fn link_provenance(link: &IntegratedLink) -> (Provenance, bool) {
    // (provenance, whether the stored direction is reversed)
    match link.kind.as_str() {
        "mentioned_by" => (Provenance::Mention, true),
        "mentions" => (Provenance::Mention, false),
        _ => (Provenance::Integrated, false),
    }
}

struct GraphBuilder<'a> {
    snapshot: &'a Snapshot,
    patterns: &'a LinkPatterns,
    graph: LinkGraph,
}

impl GraphBuilder<'_> {
    fn integrated(&mut self, owner: &IssueRef, links: &[IntegratedLink]) {
        let me = NodeId::Ticket(owner.clone());
        for l in links {
            let other = NodeId::Ticket(resolve_github(self.snapshot, &l.target));
            let (prov, reversed) = link_provenance(l);
            let (src, dst) = if reversed { (other.clone(), me.clone()) } else { (me.clone(), other.clone()) };
            self.graph.add(LinkEdge {
                src: src.clone(),
                dst: dst.clone(),
                provenance: prov,
                location: "integrated_links".into(),
                kind: l.kind.clone(),
            });
            if prov == Provenance::Integrated {
                // Platform links are bidirectional by construction.
                self.graph.add(LinkEdge {
                    src: dst,
                    dst: src,
                    provenance: prov,
                    location: "integrated_links".into(),
                    kind: l.kind.clone(),
                });
            }
        }
    }

    fn text(&mut self, src: &NodeId, text: &str, location: &str) {
        for r in self.patterns.extract(text) {
            let dst = NodeId::Ticket(resolve_github(self.snapshot, &r));
            self.graph.add(LinkEdge {
                src: src.clone(),
                dst,
                provenance: Provenance::TextMatch,
                location: location.to_string(),
                kind: String::new(),
            });
        }
    }

    fn ticket_texts(&mut self, t: &IssueTicket) {
        let me = NodeId::Ticket(t.reference.clone());
        self.text(&me, &t.title, "title");
        self.text(&me, &t.description, "description");
        for (i, c) in t.comments.iter().enumerate() {
            self.text(&me, &c.text, &format!("comment:{i}"));
        }
    }
}

/// Builds the link graph from platform links, text references in tickets,
/// pull requests and commit messages, and the inner-commit maps.
pub fn build_graph(
    snapshot: &Snapshot,
    repo: &Repository,
    reconstruction: &Reconstruction,
    patterns: &LinkPatterns,
) -> Result<LinkGraph, VcsError> {
    let mut b = GraphBuilder {
        snapshot,
        patterns,
        graph: LinkGraph::new(),
    };
    for t in &snapshot.issues {
        b.integrated(&t.reference, &t.integrated_links);
        b.ticket_texts(t);
    }
    for p in &snapshot.pulls {
        b.integrated(&p.reference, &p.integrated_links);
        let me = NodeId::Ticket(p.reference.clone());
        b.text(&me, &p.title, "title");
        b.text(&me, &p.description, "description");
        for (i, c) in p.comments.iter().enumerate() {
            b.text(&me, &c.text, &format!("comment:{i}"));
        }
        for (i, c) in p.reviews.iter().enumerate() {
            b.text(&me, &c.text, &format!("review:{i}"));
        }
        for c in &p.inner_commits {
            b.text(&me, &c.message, &format!("inner_commit:{}", c.hash));
        }
    }
    for id in repo.all_commits()?.iter() {
        let c = repo.commit(id)?;
        b.text(&NodeId::Commit(id.clone()), &c.message, "message");
    }
    for (pr, map) in &reconstruction.maps {
        for c in map.mapped_commits() {
            b.graph.add(LinkEdge {
                src: NodeId::Ticket(pr.clone()),
                dst: NodeId::Commit(c),
                provenance: Provenance::Integrated,
                location: "inner_commit_map".into(),
                kind: String::new(),
            });
        }
    }
    Ok(b.graph)
}

/// One bug, possibly reported several times across trackers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinctBug {
    pub canonical: IssueRef,
    pub aliases: BTreeSet<IssueRef>,
    pub merged_ticket: IssueTicket,
}

impl DistinctBug {
    pub fn single(ticket: IssueTicket) -> Self {
        DistinctBug {
            canonical: ticket.reference.clone(),
            aliases: [ticket.reference.clone()].into(),
            merged_ticket: ticket,
        }
    }

    pub fn created_at(&self) -> i64 {
        self.merged_ticket.created_at
    }

    pub fn closed_at(&self) -> Option<i64> {
        self.merged_ticket.closed_at
    }

    pub fn alias_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.aliases.iter().map(|a| NodeId::Ticket(a.clone()))
    }
}

fn tracker_family(r: &IssueRef) -> u8 {
    if r.system.is_github() {
        0
    } else {
        1
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let p = self.0[i];
        if p == i {
            return i;
        }
        let r = self.find(p);
        self.0[i] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Groups bug tickets connected by duplicate links, or by platform links
/// between bugs of different trackers.
pub fn merge_duplicate_bugs(bugs: &[IssueTicket], graph: &LinkGraph) -> Vec<DistinctBug> {
    let index: BTreeMap<&IssueRef, usize> = bugs.iter().enumerate().map(|(i, b)| (&b.reference, i)).collect();
    let mut uf = UnionFind((0..bugs.len()).collect());
    for e in graph.edges() {
        let (Some(a), Some(b)) = (e.src.ticket(), e.dst.ticket()) else {
            continue;
        };
        let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) else {
            continue;
        };
        let eligible = e.kind.eq_ignore_ascii_case("duplicate")
            || (matches!(e.provenance, Provenance::Integrated | Provenance::Mention)
                && tracker_family(a) != tracker_family(b));
        if eligible {
            uf.union(ia, ib);
        }
    }
    let mut groups: BTreeMap<usize, Vec<&IssueTicket>> = BTreeMap::new();
    for (i, b) in bugs.iter().enumerate() {
        let root = uf.find(i);
        groups.entry(root).or_default().push(b);
    }
    let mut out: Vec<DistinctBug> = groups.into_values().map(merge_group).collect();
    out.sort_by(|a, b| a.canonical.cmp(&b.canonical));
    out
}

fn merge_group(mut members: Vec<&IssueTicket>) -> DistinctBug {
    members.sort_by(|a, b| {
        (a.created_at, &a.reference.key, a.reference.system).cmp(&(b.created_at, &b.reference.key, b.reference.system))
    });
    let canonical = members[0];
    let mut merged = canonical.clone();
    for other in &members[1..] {
        merged.labels.extend(other.labels.iter().cloned());
        merged.comments.extend(other.comments.iter().cloned());
        merged.integrated_links.extend(other.integrated_links.iter().cloned());
        if merged.assignee.is_none() {
            merged.assignee = other.assignee.clone();
        }
        merged.closed_at = match (merged.closed_at, other.closed_at) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }
    merged.comments.sort_by(|a, b| (a.time, &a.author, &a.text).cmp(&(b.time, &b.author, &b.text)));
    merged.integrated_links.sort();
    merged.integrated_links.dedup();
    DistinctBug {
        canonical: canonical.reference.clone(),
        aliases: members.iter().map(|m| m.reference.clone()).collect(),
        merged_ticket: merged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn t(r: IssueRef) -> NodeId {
        NodeId::Ticket(r)
    }

    fn edge(a: NodeId, b: NodeId, p: Provenance) -> LinkEdge {
        LinkEdge {
            src: a,
            dst: b,
            provenance: p,
            location: "test".into(),
            kind: String::new(),
        }
    }

    #[test]
    fn github_keyword_and_paren_forms() {
        let got = extract_text_links("fixes #123 and (#456)", LinkContext::Github, &BTreeSet::new());
        assert_eq!(got, vec![IssueRef::github(123), IssueRef::github(456)]);
        assert!(extract_text_links("see issue#123suffix", LinkContext::Github, &BTreeSet::new()).is_empty());
    }

    #[test]
    fn jira_key_form() {
        let got = extract_text_links("Backport of KAFKA-9176:", LinkContext::Jira, &keys(&["KAFKA"]));
        assert_eq!(got, vec![IssueRef::jira("KAFKA-9176")]);
        assert!(extract_text_links("XKAFKA-9176", LinkContext::Jira, &keys(&["KAFKA"])).is_empty());
    }

    #[test]
    fn duplicates_keep_first_position() {
        let p = LinkPatterns::new(true, &keys(&["P"]));
        let got = p.extract("P-2 fixes #1, again P-2 and (#1)");
        assert_eq!(got, vec![IssueRef::jira("P-2"), IssueRef::github(1)]);
    }

    #[test]
    fn transitive_edges_depth_two_only() {
        let bug = t(IssueRef::jira("J-1"));
        let pr = t(IssueRef::pull(10));
        let gh = t(IssueRef::github(5));
        let mut g = LinkGraph::new();
        g.add(edge(bug.clone(), pr.clone(), Provenance::TextMatch));
        g.add(edge(pr.clone(), gh.clone(), Provenance::TextMatch));
        g.add_transitive_edges();
        assert!(g.edges().any(|e| e.src == bug && e.dst == gh && e.provenance == Provenance::Transitive));
        let once = g.clone();
        g.add_transitive_edges();
        assert_eq!(g, once);
    }

    #[test]
    fn chain_of_three_tickets_has_no_depth_three_edge() {
        let a = t(IssueRef::jira("J-1"));
        let b = t(IssueRef::jira("J-2"));
        let c = t(IssueRef::jira("J-3"));
        let pr = t(IssueRef::pull(4));
        let mut g = LinkGraph::new();
        g.add(edge(a.clone(), b.clone(), Provenance::TextMatch));
        g.add(edge(b.clone(), c.clone(), Provenance::TextMatch));
        g.add(edge(c.clone(), pr.clone(), Provenance::TextMatch));
        g.add_transitive_edges();
        let inferred: Vec<_> = g
            .edges()
            .filter(|e| e.provenance == Provenance::Transitive)
            .map(|e| (e.src.clone(), e.dst.clone()))
            .collect();
        // only b -> c -> pr has the ticket -> ticket -> PR shape
        assert_eq!(inferred, vec![(b, pr)]);
    }

    #[test]
    fn no_two_paths_leaves_graph_unchanged() {
        let mut g = LinkGraph::new();
        g.add(edge(t(IssueRef::jira("J-1")), t(IssueRef::pull(1)), Provenance::TextMatch));
        let before = g.clone();
        g.add_transitive_edges();
        assert_eq!(g, before);
    }

    fn bug(r: IssueRef, created: i64) -> IssueTicket {
        let mut b = IssueTicket::new(r, created);
        b.labels.insert("bug".into());
        b
    }

    #[test]
    fn cross_tracker_duplicates_merge() {
        let j = bug(IssueRef::jira("J-1"), 20);
        let g1 = bug(IssueRef::github(1), 10);
        let lone = bug(IssueRef::github(2), 5);
        let mut g = LinkGraph::new();
        g.add(edge(t(j.reference.clone()), t(g1.reference.clone()), Provenance::Integrated));
        g.add(edge(t(g1.reference.clone()), t(j.reference.clone()), Provenance::Integrated));
        let merged = merge_duplicate_bugs(&[j, g1, lone], &g);
        assert_eq!(merged.len(), 2);
        let pair = merged.iter().find(|d| d.aliases.len() == 2).unwrap();
        assert_eq!(pair.canonical, IssueRef::github(1));
        assert_eq!(merged.iter().map(|d| d.aliases.len()).sum::<usize>(), 3);
    }

    #[test]
    fn same_tracker_text_link_does_not_merge_but_duplicate_kind_does() {
        let a = bug(IssueRef::jira("J-1"), 1);
        let b = bug(IssueRef::jira("J-2"), 2);
        let c = bug(IssueRef::jira("J-3"), 3);
        let mut g = LinkGraph::new();
        g.add(edge(t(a.reference.clone()), t(b.reference.clone()), Provenance::TextMatch));
        assert_eq!(merge_duplicate_bugs(&[a.clone(), b.clone(), c.clone()], &g).len(), 3);
        let mut dup = edge(t(a.reference.clone()), t(b.reference.clone()), Provenance::Integrated);
        dup.kind = "duplicate".into();
        g.add(dup);
        let mut dup2 = edge(t(c.reference.clone()), t(b.reference.clone()), Provenance::Integrated);
        dup2.kind = "duplicate".into();
        g.add(dup2);
        let merged = merge_duplicate_bugs(&[a, b, c], &g);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].canonical, IssueRef::jira("J-1"));
    }

    #[test]
    fn resolve_number_against_snapshot() {
        let mut s = Snapshot::new("p", 0);
        s.pulls.push(crate::forge::PullRequest::new(77, 0));
        s.issues.push(IssueTicket::new(IssueRef::github(5), 0));
        assert_eq!(resolve_github(&s, &IssueRef::github(77)), IssueRef::pull(77));
        assert_eq!(resolve_github(&s, &IssueRef::github(5)), IssueRef::github(5));
    }
}
