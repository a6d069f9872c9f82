use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use git2::{Oid, Signature, Time};
use prszz_core::forge::{
    save_snapshot, to_canonical_json, Comment, InnerCommit, InnerFile, IntegratedLink, PrState, TrackerSystem,
};
use prszz_core::{CommitId, GroundTruth, IssueRef, IssueTicket, PullRequest, Repository, Snapshot};

use super::oracle::{removed_origins, replay, FileEntry, Files, ParentView, Provenance};
use super::{
    author_email, Action, Change, CommitSpec, FixtureError, FixtureScript, GeneratedFixture, Integration, LinkSpec,
    MergeSpec, PrSpec, TicketSpec, FIXTURE_EMAIL, FIXTURE_NAME, START_TIME, TIME_STEP,
};
use crate::config::{ProjectConfig, TrackerConfig, TrackerKind};

type Result<T> = std::result::Result<T, FixtureError>;

struct PrBuild {
    pr: PullRequest,
    tip: Option<Oid>,
    inner: Vec<Oid>,
}

struct Generator {
    git: git2::Repository,
    clock: i64,
    main: Option<Oid>,
    files: HashMap<Oid, Files>,
    provenance: HashMap<Oid, Provenance>,
    renamed_from: HashMap<Oid, BTreeMap<String, String>>,
    labels: BTreeMap<String, Oid>,
    prs: BTreeMap<u64, PrBuild>,
    issues: BTreeMap<IssueRef, IssueTicket>,
}

fn invalid(msg: impl Into<String>) -> FixtureError {
    FixtureError::Invalid(msg.into())
}

fn content(lines: &[String]) -> Vec<u8> {
    let mut s = lines.join("\n");
    if !lines.is_empty() {
        s.push('\n');
    }
    s.into_bytes()
}

/// Applies changes in order; returns the renames as new path -> old path.
fn apply_changes(files: &mut Files, changes: &[Change]) -> Result<BTreeMap<String, String>> {
    let mut renamed_from = BTreeMap::new();
    for change in changes {
        match change {
            Change::Write { path, lines } => {
                let executable = files.get(path).is_some_and(|f| f.executable);
                files.insert(
                    path.clone(),
                    FileEntry {
                        lines: lines.clone(),
                        executable,
                    },
                );
            }
            Change::Edit {
                path,
                at,
                delete,
                insert,
            } => {
                let f = files.get_mut(path).ok_or_else(|| invalid(format!("edit of missing file {path}")))?;
                let len = f.lines.len();
                if *at == 0 || *at > len + 1 || at - 1 + delete > len {
                    return Err(invalid(format!("edit of {path} at {at} (-{delete}) outside {len} lines")));
                }
                f.lines.splice(at - 1..at - 1 + delete, insert.iter().cloned());
            }
            Change::Rename { from, to } => {
                if files.contains_key(to) {
                    return Err(invalid(format!("rename target {to} exists")));
                }
                let f = files.remove(from).ok_or_else(|| invalid(format!("rename of missing file {from}")))?;
                files.insert(to.clone(), f);
                let origin = renamed_from.remove(from).unwrap_or_else(|| from.clone());
                renamed_from.insert(to.clone(), origin);
            }
            Change::Delete { path } => {
                files.remove(path).ok_or_else(|| invalid(format!("delete of missing file {path}")))?;
            }
            Change::Chmod { path, executable } => {
                files
                    .get_mut(path)
                    .ok_or_else(|| invalid(format!("chmod of missing file {path}")))?
                    .executable = *executable;
            }
        }
    }
    Ok(renamed_from)
}

#[derive(Default)]
struct TreeDir {
    files: BTreeMap<String, (Oid, i32)>,
    dirs: BTreeMap<String, TreeDir>,
}

fn write_tree(git: &git2::Repository, files: &Files) -> Result<Oid> {
    let mut root = TreeDir::default();
    for (path, entry) in files {
        let blob = git.blob(&content(&entry.lines))?;
        let mode = if entry.executable { 0o100755 } else { 0o100644 };
        let mut parts: Vec<&str> = path.split('/').collect();
        let name = parts.pop().unwrap_or_default();
        let mut dir = &mut root;
        for p in parts {
            dir = dir.dirs.entry(p.to_string()).or_default();
        }
        dir.files.insert(name.to_string(), (blob, mode));
    }
    fn write(git: &git2::Repository, dir: &TreeDir) -> Result<Oid> {
        let mut tb = git.treebuilder(None)?;
        for (name, (oid, mode)) in &dir.files {
            tb.insert(name, *oid, *mode)?;
        }
        for (name, sub) in &dir.dirs {
            let oid = write(git, sub)?;
            tb.insert(name, oid, 0o040000)?;
        }
        Ok(tb.write()?)
    }
    write(git, &root)
}

fn read_tree(git: &git2::Repository, tree: Oid) -> Result<Files> {
    let tree = git.find_tree(tree)?;
    let mut out = Files::new();
    let mut failure = None;
    tree.walk(git2::TreeWalkMode::PreOrder, |root, entry| {
        if entry.kind() != Some(git2::ObjectType::Blob) {
            return git2::TreeWalkResult::Ok;
        }
        match git.find_blob(entry.id()) {
            Ok(blob) => {
                let text = String::from_utf8_lossy(blob.content());
                out.insert(
                    format!("{root}{}", entry.name().unwrap_or_default()),
                    FileEntry {
                        lines: text.lines().map(str::to_string).collect(),
                        executable: entry.filemode() == 0o100755,
                    },
                );
                git2::TreeWalkResult::Ok
            }
            Err(e) => {
                failure = Some(e);
                git2::TreeWalkResult::Abort
            }
        }
    })?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(out),
    }
}

struct Author<'a> {
    name: &'a str,
    email: String,
    time: Option<i64>,
}

impl<'a> Author<'a> {
    fn named(name: Option<&'a str>) -> Self {
        let name = name.unwrap_or(FIXTURE_NAME);
        Author {
            name,
            email: author_email(name),
            time: None,
        }
    }
}

impl Generator {
    fn tick(&mut self) -> i64 {
        self.clock += TIME_STEP;
        self.clock
    }

    fn commit_object(&self, oid: Oid) -> Result<git2::Commit<'_>> {
        Ok(self.git.find_commit(oid)?)
    }

    fn new_commit(
        &mut self,
        parents: &[Oid],
        files: Files,
        message: &str,
        author: Author<'_>,
        renamed_from: BTreeMap<String, String>,
        label: Option<&str>,
    ) -> Result<Oid> {
        if let Some(l) = label {
            if self.labels.contains_key(l) {
                return Err(invalid(format!("duplicate label {l}")));
            }
        }
        let tree = self.git.find_tree(write_tree(&self.git, &files)?)?;
        let author_sig = Signature::new(author.name, &author.email, &Time::new(author.time.unwrap_or(self.clock), 0))?;
        let committer = Signature::new(FIXTURE_NAME, FIXTURE_EMAIL, &Time::new(self.clock, 0))?;
        let oid = {
            let parent_commits: Vec<git2::Commit> =
                parents.iter().map(|p| self.commit_object(*p)).collect::<Result<_>>()?;
            let parent_refs: Vec<&git2::Commit> = parent_commits.iter().collect();
            self.git.commit(None, &author_sig, &committer, message, &tree, &parent_refs)?
        };
        drop(tree);

        let empty = BTreeMap::new();
        let views: Vec<ParentView<'_>> = parents
            .iter()
            .enumerate()
            .map(|(i, p)| ParentView {
                files: &self.files[p],
                provenance: &self.provenance[p],
                renamed_from: if i == 0 { &renamed_from } else { &empty },
            })
            .collect();
        let prov = replay(&files, oid, &views);
        self.provenance.insert(oid, prov);
        self.files.insert(oid, files);
        self.renamed_from.insert(oid, renamed_from);
        if let Some(l) = label {
            self.labels.insert(l.to_string(), oid);
        }
        Ok(oid)
    }

    fn resolve_ref(&self, s: &str) -> Result<IssueRef> {
        let s = s.trim();
        if s.contains(':') {
            return s.parse().map_err(|_| invalid(format!("bad reference {s}")));
        }
        if let Some(n) = s.strip_prefix('#') {
            let n: u64 = n.parse().map_err(|_| invalid(format!("bad reference {s}")))?;
            return Ok(if self.prs.contains_key(&n) {
                IssueRef::pull(n)
            } else {
                IssueRef::github(n)
            });
        }
        if s.contains('-') {
            return Ok(IssueRef::jira(s));
        }
        Err(invalid(format!("bad reference {s}")))
    }

    fn links(&self, links: &[LinkSpec]) -> Result<Vec<IntegratedLink>> {
        links
            .iter()
            .map(|l| {
                Ok(IntegratedLink {
                    target: self.resolve_ref(&l.to)?,
                    kind: l.kind.clone(),
                })
            })
            .collect()
    }

    fn run(&mut self, action: &Action) -> Result<()> {
        match action {
            Action::Commit(spec) => self.commit(spec),
            Action::OpenPr(spec) => self.open_pr(spec),
            Action::MergePr(spec) => self.merge_pr(spec),
            Action::ClosePr { pr } => {
                let now = self.tick();
                let b = self.prs.get_mut(pr).ok_or_else(|| invalid(format!("unknown pull request #{pr}")))?;
                b.pr.state = PrState::Closed;
                b.pr.closed_at = Some(now);
                Ok(())
            }
            Action::FileTicket(spec) => self.file_ticket(spec),
            Action::CloseTicket { ticket, resolution } => {
                let now = self.tick();
                let r = self.resolve_ref(ticket)?;
                let t = self.issues.get_mut(&r).ok_or_else(|| invalid(format!("unknown ticket {ticket}")))?;
                t.closed_at = Some(now);
                if r.system == TrackerSystem::JiraIssue {
                    t.status = "Resolved".into();
                    t.resolution = Some(resolution.clone().unwrap_or_else(|| "Fixed".into()));
                } else {
                    t.status = "closed".into();
                }
                Ok(())
            }
            Action::Comment { on, text, author } => {
                let now = self.tick();
                let r = self.resolve_ref(on)?;
                let c = Comment {
                    author: author.clone().unwrap_or_else(|| FIXTURE_NAME.into()),
                    time: now,
                    text: text.clone(),
                };
                self.entity_mut(&r, on)?.0.push(c);
                Ok(())
            }
            Action::Link { from, to, kind } => {
                self.tick();
                let src = self.resolve_ref(from)?;
                let link = IntegratedLink {
                    target: self.resolve_ref(to)?,
                    kind: kind.clone(),
                };
                self.entity_mut(&src, from)?.1.push(link);
                Ok(())
            }
        }
    }

    fn entity_mut(&mut self, r: &IssueRef, raw: &str) -> Result<(&mut Vec<Comment>, &mut Vec<IntegratedLink>)> {
        if r.is_pull() {
            let n = r.number().unwrap_or(0);
            let b = self.prs.get_mut(&n).ok_or_else(|| invalid(format!("unknown pull request {raw}")))?;
            Ok((&mut b.pr.comments, &mut b.pr.integrated_links))
        } else {
            let t = self.issues.get_mut(r).ok_or_else(|| invalid(format!("unknown ticket {raw}")))?;
            Ok((&mut t.comments, &mut t.integrated_links))
        }
    }

    fn commit(&mut self, spec: &CommitSpec) -> Result<()> {
        self.tick();
        let parent = match spec.pr {
            Some(n) => {
                let b = self.prs.get(&n).ok_or_else(|| invalid(format!("commit on unknown pull request #{n}")))?;
                if b.pr.merged || b.pr.state == PrState::Closed {
                    return Err(invalid(format!("commit on closed pull request #{n}")));
                }
                Some(b.tip.or(self.main).ok_or_else(|| invalid("pull request branch without a main branch"))?)
            }
            None => self.main,
        };
        let mut files = parent.map(|p| self.files[&p].clone()).unwrap_or_default();
        let renamed_from = apply_changes(&mut files, &spec.changes)?;
        let parents: Vec<Oid> = parent.into_iter().collect();
        let oid = self.new_commit(
            &parents,
            files,
            &spec.message,
            Author::named(spec.author.as_deref()),
            renamed_from,
            spec.label.as_deref(),
        )?;
        match spec.pr {
            Some(n) => {
                let b = self.prs.get_mut(&n).expect("checked above");
                b.tip = Some(oid);
                b.inner.push(oid);
            }
            None => self.main = Some(oid),
        }
        Ok(())
    }

    fn open_pr(&mut self, spec: &PrSpec) -> Result<()> {
        let now = self.tick();
        if self.prs.contains_key(&spec.number) || self.issues.contains_key(&IssueRef::github(spec.number)) {
            return Err(invalid(format!("number #{} already used", spec.number)));
        }
        let mut pr = PullRequest::new(spec.number, now);
        pr.title = spec.title.clone();
        pr.description = spec.description.clone();
        pr.assignee = spec.assignee.clone();
        pr.labels = spec.labels.iter().cloned().collect();
        self.prs.insert(
            spec.number,
            PrBuild {
                pr,
                tip: None,
                inner: Vec::new(),
            },
        );
        let links = self.links(&spec.links)?;
        self.prs.get_mut(&spec.number).expect("inserted").pr.integrated_links = links;
        for c in &spec.commits {
            let c = CommitSpec {
                pr: Some(spec.number),
                ..c.clone()
            };
            self.commit(&c)?;
        }
        Ok(())
    }

    fn merged_files(&self, number: u64, ours: Oid, theirs: Oid) -> Result<Files> {
        let mut index = self
            .git
            .merge_commits(&self.commit_object(ours)?, &self.commit_object(theirs)?, None)?;
        if index.has_conflicts() {
            return Err(FixtureError::Conflict(number));
        }
        let tree = index.write_tree_to(&self.git)?;
        read_tree(&self.git, tree)
    }

    fn merge_pr(&mut self, spec: &MergeSpec) -> Result<()> {
        let now = self.tick();
        let n = spec.pr;
        let b = self.prs.get(&n).ok_or_else(|| invalid(format!("merge of unknown pull request #{n}")))?;
        if b.pr.merged {
            return Err(invalid(format!("pull request #{n} merged twice")));
        }
        let tip = b.tip.ok_or_else(|| invalid(format!("pull request #{n} has no commits")))?;
        let main = self.main.ok_or_else(|| invalid("merge without a main branch"))?;
        let title = b.pr.title.clone();
        let inner = b.inner.clone();
        let resolving = match spec.strategy {
            Integration::Merge => {
                let mut files = self.merged_files(n, main, tip)?;
                let renamed = apply_changes(&mut files, &spec.extra_changes)?;
                let message = spec
                    .message
                    .clone()
                    .unwrap_or_else(|| format!("Merge pull request #{n} from fixture/pr-{n}\n\n{title}"));
                let oid = self.new_commit(
                    &[main, tip],
                    files,
                    &message,
                    Author::named(None),
                    renamed,
                    spec.label.as_deref(),
                )?;
                self.main = Some(oid);
                oid
            }
            Integration::Squash => {
                let mut files = self.merged_files(n, main, tip)?;
                let renamed = apply_changes(&mut files, &spec.extra_changes)?;
                let message = match &spec.message {
                    Some(m) => m.clone(),
                    None => {
                        let mut m = format!("{title} (#{n})\n");
                        for c in &inner {
                            let summary = String::from_utf8_lossy(self.commit_object(*c)?.summary_bytes().unwrap_or_default()).into_owned();
                            m.push_str(&format!("\n* {summary}"));
                        }
                        m.push('\n');
                        m
                    }
                };
                let oid = self.new_commit(&[main], files, &message, Author::named(None), renamed, spec.label.as_deref())?;
                self.main = Some(oid);
                oid
            }
            Integration::Rebase => {
                if !spec.extra_changes.is_empty() {
                    return Err(invalid("a rebase cannot carry extra changes"));
                }
                let mut onto = main;
                for (i, c) in inner.iter().enumerate() {
                    let (files, message, name, email, time) = {
                        let picked = self.commit_object(*c)?;
                        let mut index = self
                            .git
                            .cherrypick_commit(&picked, &self.commit_object(onto)?, 0, None)?;
                        if index.has_conflicts() {
                            return Err(FixtureError::Conflict(n));
                        }
                        let tree = index.write_tree_to(&self.git)?;
                        let a = picked.author();
                        (
                            read_tree(&self.git, tree)?,
                            picked.message().unwrap_or_default().to_string(),
                            a.name().unwrap_or_default().to_string(),
                            a.email().unwrap_or_default().to_string(),
                            a.when().seconds(),
                        )
                    };
                    let renamed = self.renamed_from[c].clone();
                    let author = Author {
                        name: &name,
                        email,
                        time: Some(time),
                    };
                    let label = spec.rebased_labels.get(i).map(String::as_str);
                    onto = self.new_commit(&[onto], files, &message, author, renamed, label)?;
                    if i + 1 < inner.len() {
                        self.tick();
                    }
                }
                if spec.label.is_some() {
                    return Err(invalid("a rebase labels its commits through rebased_labels"));
                }
                self.main = Some(onto);
                onto
            }
        };
        let b = self.prs.get_mut(&n).expect("checked above");
        b.pr.merged = true;
        b.pr.state = PrState::Closed;
        b.pr.closed_at = Some(self.clock.max(now));
        b.pr.merge_commit = Some(CommitId::from(resolving));
        Ok(())
    }

    fn file_ticket(&mut self, spec: &TicketSpec) -> Result<()> {
        let now = self.tick();
        let r = self.resolve_ref(&spec.key)?;
        if r.is_pull() {
            return Err(invalid(format!("ticket {} collides with a pull request", spec.key)));
        }
        if self.issues.contains_key(&r) {
            return Err(invalid(format!("ticket {} filed twice", spec.key)));
        }
        let mut t = IssueTicket::new(r.clone(), now);
        t.title = spec.title.clone();
        t.description = spec.description.clone();
        t.labels = spec.labels.iter().cloned().collect();
        t.assignee = spec.assignee.clone();
        t.status = if r.system == TrackerSystem::JiraIssue { "Open" } else { "open" }.into();
        t.integrated_links = self.links(&spec.links)?;
        self.issues.insert(r, t);
        Ok(())
    }

    fn label(&self, l: &str) -> Result<Oid> {
        self.labels
            .get(l)
            .copied()
            .ok_or_else(|| invalid(format!("truth refers to unknown label {l}")))
    }

    /// Lines removed by `commit` relative to its first parent, by origin.
    fn oracle_for(&self, commit: Oid) -> Result<BTreeSet<Oid>> {
        let parent = self.commit_object(commit)?.parent_id(0).map_err(|_| {
            FixtureError::Unrealizable(format!("fixing commit {commit} has no parent"))
        })?;
        Ok(removed_origins(
            &self.files[&parent],
            &self.provenance[&parent],
            &self.files[&commit],
            &self.renamed_from[&commit],
        ))
    }
}

fn ensure_empty(dir: &Path) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(FixtureError::OutputNotEmpty(dir.to_path_buf()));
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Replays `script` into `out`: a bare repository `repo.git`, a snapshot
/// under `snapshot/`, `truth.json`, `oracle.json`, `labels.json`,
/// `script.json` and `config.toml`.
pub fn generate(script: &FixtureScript, out: &Path) -> Result<GeneratedFixture> {
    ensure_empty(out)?;
    let repo_path = out.join("repo.git");
    let git = git2::Repository::init_bare(&repo_path)?;
    let mut g = Generator {
        git,
        clock: START_TIME - TIME_STEP,
        main: None,
        files: HashMap::new(),
        provenance: HashMap::new(),
        renamed_from: HashMap::new(),
        labels: BTreeMap::new(),
        prs: BTreeMap::new(),
        issues: BTreeMap::new(),
    };
    for action in &script.actions {
        g.run(action)?;
    }
    let main = g.main.ok_or_else(|| invalid("script creates no main-branch commit"))?;
    g.git.reference("refs/heads/main", main, true, "fixture")?;
    g.git.set_head("refs/heads/main")?;

    let repo = Repository::open(&repo_path)?;
    let mut snapshot = Snapshot::new(script.project.clone(), g.clock + TIME_STEP);
    snapshot.issues = g.issues.values().cloned().collect();
    for b in g.prs.values() {
        let mut pr = b.pr.clone();
        for oid in &b.inner {
            let id = CommitId::from(*oid);
            let c = repo.commit(&id)?;
            let files = repo
                .diff_to_parent(&id)?
                .iter()
                .map(|d| InnerFile {
                    path: d.path().to_string(),
                    additions: d.added_count(),
                    deletions: d.removed_count(),
                    hunks: Some(d.hunks.clone()),
                })
                .collect();
            pr.inner_commits.push(InnerCommit {
                hash: id,
                message: c.message.clone(),
                author_name: c.author_name.clone(),
                author_email: c.author_email.clone(),
                author_time: c.author_time,
                files,
            });
        }
        snapshot.pulls.push(pr);
    }
    snapshot.sort();

    let mut truth = GroundTruth::default();
    let mut oracle = BTreeMap::new();
    for (bug, fix) in &script.truth.fixing {
        let r = g.resolve_ref(bug)?;
        let fix = match fix {
            Some(l) => {
                let oid = g.label(l)?;
                let id = CommitId::from(oid);
                if !repo.contains(&id)? {
                    return Err(FixtureError::Unrealizable(format!("fixing commit {l} is not on the main history")));
                }
                let origins: BTreeSet<CommitId> = g.oracle_for(oid)?.into_iter().map(CommitId::from).collect();
                oracle.insert(id.clone(), origins);
                Some(id)
            }
            None => None,
        };
        truth.set_fixing(&r, fix);
    }
    for (fix_label, inducing) in &script.truth.inducing {
        let fix = CommitId::from(g.label(fix_label)?);
        let origins = match oracle.get(&fix) {
            Some(o) => o.clone(),
            None => {
                let o: BTreeSet<CommitId> = g.oracle_for(g.label(fix_label)?)?.into_iter().map(CommitId::from).collect();
                oracle.insert(fix.clone(), o.clone());
                o
            }
        };
        let mut ids = BTreeSet::new();
        for l in inducing {
            let id = CommitId::from(g.label(l)?);
            if !origins.contains(&id) {
                return Err(FixtureError::Unrealizable(format!(
                    "{l} did not last touch any line removed by {fix_label}"
                )));
            }
            ids.insert(id);
        }
        truth.inducing.insert(fix, ids);
    }
    if script.truth.derive_inducing {
        for (fix, origins) in &oracle {
            truth.inducing.entry(fix.clone()).or_insert_with(|| origins.clone());
        }
    }

    save_snapshot(&snapshot, &out.join("snapshot"))?;
    let labels: BTreeMap<String, CommitId> = g.labels.iter().map(|(k, v)| (k.clone(), CommitId::from(*v))).collect();
    fs::write(out.join("truth.json"), to_canonical_json(&truth))?;
    fs::write(out.join("oracle.json"), to_canonical_json(&oracle))?;
    fs::write(out.join("labels.json"), to_canonical_json(&labels))?;
    fs::write(out.join("script.json"), to_canonical_json(script))?;

    let mut trackers = Vec::new();
    if script.github {
        trackers.push(TrackerConfig {
            system: TrackerKind::Github,
            base_url: None,
            project: Some(script.project.clone()),
            project_keys: Vec::new(),
            replay_dir: None,
        });
    }
    if !script.jira_keys.is_empty() {
        trackers.push(TrackerConfig {
            system: TrackerKind::Jira,
            base_url: None,
            project: None,
            project_keys: script.jira_keys.clone(),
            replay_dir: None,
        });
    }
    let config = ProjectConfig {
        project_id: script.project.clone(),
        repo_path: PathBuf::from("repo.git"),
        snapshot_dir: PathBuf::from("snapshot"),
        out_dir: PathBuf::from("out"),
        truth: Some(PathBuf::from("truth.json")),
        trackers,
        bug_labels: script.bug_labels.clone(),
        regex: Default::default(),
        thresholds: Default::default(),
        window: None,
        variants: script.variants.clone(),
        secured_only: false,
        languages: Vec::new(),
    };
    config
        .validate()
        .map_err(|e| invalid(format!("generated configuration: {e}")))?;
    let config_path = out.join("config.toml");
    fs::write(&config_path, config.to_toml()?)?;

    Ok(GeneratedFixture {
        dir: out.to_path_buf(),
        repo_path,
        config_path,
        labels,
        truth,
        oracle,
    })
}
