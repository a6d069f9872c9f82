use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::rc::Rc;

use super::{CommitId, LineOrigin, Repository, Result, VcsError};

/// Decides whether a changed line is only a cosmetic rewrite of an older one.
/// Used by blame to look through whitespace/comment-only edits.
pub trait LineEquivalence {
    /// Stable name, part of the blame cache key.
    fn tag(&self) -> &str;
    fn equivalent(&self, path: &str, old: &str, new: &str) -> bool;
}

/// Blame policy. The default is plain `git blame` semantics.
#[derive(Clone, Copy, Default)]
pub struct BlameOptions<'a> {
    /// Lines owned by merge or mode-only commits are passed on to the
    /// positionally matching line of the first parent. Lines without such a
    /// counterpart resolve to no origin.
    pub skip_meta: bool,
    /// Lines whose change is equivalent to a removed line of the same hunk
    /// are passed on to that line.
    pub equivalence: Option<&'a dyn LineEquivalence>,
    /// Lines added by a commit whose text was removed elsewhere in the same
    /// file by that commit are treated as moved and passed on.
    pub track_moves: bool,
}

impl BlameOptions<'_> {
    fn cache_tag(&self) -> String {
        format!(
            "{}|{}|{}",
            if self.skip_meta { "meta" } else { "plain" },
            self.equivalence.map(|e| e.tag()).unwrap_or("exact"),
            if self.track_moves { "moves" } else { "nomoves" }
        )
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Queued {
    time: i64,
    commit: CommitId,
    path: String,
}

impl Repository {
    /// Annotates the requested lines of `path` at `at`: each line resolves to
    /// the last commit that changed it on the history reachable from `at`.
    pub fn blame_lines(
        &self,
        at: &CommitId,
        path: &str,
        lines: &BTreeSet<usize>,
    ) -> Result<Vec<LineOrigin>> {
        Ok(self
            .blame_lines_with(at, path, lines, BlameOptions::default())?
            .into_iter()
            .map(|(_, o)| o.expect("plain blame always resolves"))
            .collect())
    }

    /// Like [`Repository::blame_lines`] under a blame policy. Lines the policy
    /// cannot attribute come back as `None`.
    pub fn blame_lines_with(
        &self,
        at: &CommitId,
        path: &str,
        lines: &BTreeSet<usize>,
        opts: BlameOptions<'_>,
    ) -> Result<Vec<(usize, Option<LineOrigin>)>> {
        let file = self.blame_file(at, path, opts)?;
        lines
            .iter()
            .map(|&l| {
                if l == 0 || l > file.len() {
                    Err(VcsError::LineOutOfRange {
                        path: path.to_string(),
                        line: l,
                        len: file.len(),
                    })
                } else {
                    Ok((l, file[l - 1].clone()))
                }
            })
            .collect()
    }

    /// Origins of every line of `path` at `at` (index 0 is line 1). Cached.
    pub fn blame_file(
        &self,
        at: &CommitId,
        path: &str,
        opts: BlameOptions<'_>,
    ) -> Result<Rc<Vec<Option<LineOrigin>>>> {
        let key = format!("{at}|{path}|{}", opts.cache_tag());
        if let Some(hit) = self.blame_cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let result = Rc::new(self.compute_blame(at, path, opts)?);
        self.blame_cache.borrow_mut().insert(key, result.clone());
        Ok(result)
    }

    fn compute_blame(
        &self,
        at: &CommitId,
        path: &str,
        opts: BlameOptions<'_>,
    ) -> Result<Vec<Option<LineOrigin>>> {
        let start = self.commit_rc(at)?;
        let version = self
            .file_version(at, path)?
            .ok_or_else(|| VcsError::PathNotPresent {
                commit: at.clone(),
                path: path.to_string(),
            })?;
        let n = version.lines.len();
        let mut result: Vec<Option<LineOrigin>> = vec![None; n];

        // (commit, path) -> [(line at commit, requested line)]
        let mut pending: HashMap<(CommitId, String), Vec<(usize, usize)>> = HashMap::new();
        let mut queue = BinaryHeap::new();
        pending.insert((at.clone(), path.to_string()), (1..=n).map(|l| (l, l)).collect());
        queue.push(Queued {
            time: start.commit_time,
            commit: at.clone(),
            path: path.to_string(),
        });

        let push = |pending: &mut HashMap<(CommitId, String), Vec<(usize, usize)>>,
                        queue: &mut BinaryHeap<Queued>,
                        commit: &CommitId,
                        p: &str,
                        entry: (usize, usize)|
         -> Result<()> {
            let slot = pending.entry((commit.clone(), p.to_string())).or_default();
            if slot.is_empty() {
                queue.push(Queued {
                    time: self.commit_rc(commit)?.commit_time,
                    commit: commit.clone(),
                    path: p.to_string(),
                });
            }
            slot.push(entry);
            Ok(())
        };

        while let Some(Queued { commit, path: cpath, .. }) = queue.pop() {
            let Some(mut remaining) = pending.remove(&(commit.clone(), cpath.clone())) else {
                continue;
            };
            if remaining.is_empty() {
                continue;
            }
            let c = self.commit_rc(&commit)?;
            let here = self
                .file_version(&commit, &cpath)?
                .expect("queued paths exist at their commit");

            for parent in &c.parents {
                if remaining.is_empty() {
                    break;
                }
                let Some(ppath) = self.path_in_parent(&commit, parent, &cpath)? else {
                    continue;
                };
                let pver = self
                    .file_version(parent, &ppath)?
                    .expect("resolved parent path exists");
                let align = self.alignment(&pver, &here)?;
                let mut still = Vec::new();
                for (l, t) in remaining {
                    match align.to_old(l) {
                        Some(o) => push(&mut pending, &mut queue, parent, &ppath, (o, t))?,
                        None => still.push((l, t)),
                    }
                }
                remaining = still;
            }
            if remaining.is_empty() {
                continue;
            }

            let first = match c.first_parent() {
                Some(p) => self
                    .path_in_parent(&commit, p, &cpath)?
                    .map(|pp| (p.clone(), pp)),
                None => None,
            };
            let skip = opts.skip_meta && !c.parents.is_empty() && self.is_meta_change(&commit)?;
            let parent_view = match &first {
                Some((p, pp)) if skip || opts.equivalence.is_some() || opts.track_moves => {
                    let pver = self.file_version(p, pp)?.expect("resolved parent path exists");
                    let align = self.alignment(&pver, &here)?;
                    Some((p, pp, pver, align))
                }
                _ => None,
            };

            // Old lines removed by this commit, by text, for move tracking.
            let mut moved_from: HashMap<String, Vec<usize>> = HashMap::new();
            if let (true, false, Some((_, _, pver, align))) = (opts.track_moves, skip, &parent_view) {
                for o in 1..=pver.lines.len() {
                    let text = pver.lines[o - 1].trim();
                    if align.to_new(o).is_none() && !text.is_empty() {
                        moved_from.entry(text.to_string()).or_default().push(o);
                    }
                }
            }

            for (l, t) in remaining {
                let mut passed = false;
                if let Some((p, pp, pver, align)) = &parent_view {
                    if let Some((removed, k)) = align.hunk_of_new(l).filter(|_| skip || opts.equivalence.is_some()) {
                        let target = if skip {
                            removed.get(k).copied()
                        } else {
                            let eq = opts.equivalence.expect("checked above");
                            let new_text = &here.lines[l - 1];
                            let same = |o: &usize| eq.equivalent(&cpath, &pver.lines[o - 1], new_text);
                            removed
                                .get(k)
                                .filter(|o| same(o))
                                .or_else(|| removed.iter().find(|o| same(o)))
                                .copied()
                        };
                        if let Some(o) = target {
                            push(&mut pending, &mut queue, p, pp, (o, t))?;
                            passed = true;
                        }
                    }
                    if !passed && !skip {
                        let text = here.lines[l - 1].trim();
                        if let Some(slot) = moved_from.get_mut(text).filter(|s| !s.is_empty()) {
                            let o = slot.remove(0);
                            push(&mut pending, &mut queue, p, pp, (o, t))?;
                            passed = true;
                        }
                    }
                }
                if passed {
                    continue;
                }
                if skip {
                    // Meta commits never own lines.
                    continue;
                }
                result[t - 1] = Some(LineOrigin {
                    path: path.to_string(),
                    line: t,
                    origin_commit: commit.clone(),
                    origin_path: cpath.clone(),
                    origin_line: l,
                });
            }
        }
        Ok(result)
    }
}
