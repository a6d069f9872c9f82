//! Forward line-provenance replay used to check fixture truth.
//!
//! Every commit's files are compared with each parent's files through a
//! full longest-common-subsequence table; matched lines keep the parent's
//! origin (first parent first), unmatched lines originate in the commit
//! itself. This is deliberately independent of the tracer's backward blame.

use std::collections::{BTreeMap, BTreeSet};

use git2::Oid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub lines: Vec<String>,
    pub executable: bool,
}

pub type Files = BTreeMap<String, FileEntry>;

/// Origin commit of every line of every file at one commit.
pub type Provenance = BTreeMap<String, Vec<Oid>>;

/// Index pairs `(i, j)` with `a[i] == b[j]` forming one longest common
/// subsequence, in increasing order.
pub fn lcs_pairs(a: &[String], b: &[String]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    // table[i][j] = LCS length of a[i..] and b[j..]
    let mut table = vec![0u32; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[at(i, j)] = if a[i] == b[j] {
                table[at(i + 1, j + 1)] + 1
            } else {
                table[at(i + 1, j)].max(table[at(i, j + 1)])
            };
        }
    }
    let mut pairs = Vec::with_capacity(table[0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if table[at(i + 1, j)] >= table[at(i, j + 1)] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

/// A parent as seen from a child commit. `renamed_from` maps child paths to
/// the parent paths they were renamed from.
pub struct ParentView<'a> {
    pub files: &'a Files,
    pub provenance: &'a Provenance,
    pub renamed_from: &'a BTreeMap<String, String>,
}

/// Provenance of `child`, created by commit `me`.
pub fn replay(child: &Files, me: Oid, parents: &[ParentView<'_>]) -> Provenance {
    let mut out = Provenance::new();
    for (path, entry) in child {
        let mut origins: Vec<Option<Oid>> = vec![None; entry.lines.len()];
        for p in parents {
            let parent_path = p.renamed_from.get(path).unwrap_or(path);
            let (Some(pf), Some(pp)) = (p.files.get(parent_path), p.provenance.get(parent_path)) else {
                continue;
            };
            for (i, j) in lcs_pairs(&pf.lines, &entry.lines) {
                origins[j].get_or_insert(pp[i]);
            }
        }
        out.insert(path.clone(), origins.into_iter().map(|o| o.unwrap_or(me)).collect());
    }
    out
}

/// Commits that last touched the lines a child removes from its parent.
pub fn removed_origins(
    parent: &Files,
    provenance: &Provenance,
    child: &Files,
    renamed_from: &BTreeMap<String, String>,
) -> BTreeSet<Oid> {
    let renamed_to: BTreeMap<&String, &String> = renamed_from.iter().map(|(to, from)| (from, to)).collect();
    let mut out = BTreeSet::new();
    for (path, pf) in parent {
        let origins = &provenance[path];
        let child_path = renamed_to.get(path).copied().unwrap_or(path);
        match child.get(child_path) {
            None => out.extend(origins.iter().copied()),
            Some(cf) => {
                let kept: BTreeSet<usize> = lcs_pairs(&pf.lines, &cf.lines).into_iter().map(|(i, _)| i).collect();
                out.extend((0..pf.lines.len()).filter(|i| !kept.contains(i)).map(|i| origins[i]));
            }
        }
    }
    out
}
