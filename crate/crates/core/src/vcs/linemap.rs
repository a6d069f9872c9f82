use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{CommitId, Repository, Result, VcsError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineMapping {
    Mapped { path: String, line: usize },
    Vanished,
}

impl Repository {
    /// Follows a physical line from `from` back to its ancestor `to`,
    /// accounting for insertions, deletions and renames on the way.
    pub fn map_line_across(
        &self,
        from: &CommitId,
        to: &CommitId,
        path: &str,
        line: usize,
    ) -> Result<LineMapping> {
        let version = self
            .file_version(from, path)?
            .ok_or_else(|| VcsError::PathNotPresent {
                commit: from.clone(),
                path: path.to_string(),
            })?;
        if line == 0 || line > version.lines.len() {
            return Err(VcsError::LineOutOfRange {
                path: path.to_string(),
                line,
                len: version.lines.len(),
            });
        }
        self.commit_rc(to)?;
        let chain = self.parent_chain(from, to)?;

        let mut cur_path = path.to_string();
        let mut cur_line = line;
        for pair in chain.windows(2) {
            let (child, parent) = (&pair[0], &pair[1]);
            let Some(ppath) = self.path_in_parent(child, parent, &cur_path)? else {
                return Ok(LineMapping::Vanished);
            };
            let here = self
                .file_version(child, &cur_path)?
                .expect("tracked path exists");
            let there = self
                .file_version(parent, &ppath)?
                .expect("resolved parent path exists");
            match self.alignment(&there, &here)?.to_old(cur_line) {
                Some(o) => {
                    cur_line = o;
                    cur_path = ppath;
                }
                None => return Ok(LineMapping::Vanished),
            }
        }
        Ok(LineMapping::Mapped {
            path: cur_path,
            line: cur_line,
        })
    }

    /// Shortest parent path from `from` down to `to`, preferring first
    /// parents. Includes both ends.
    fn parent_chain(&self, from: &CommitId, to: &CommitId) -> Result<Vec<CommitId>> {
        let mut prev: HashMap<CommitId, Option<CommitId>> = HashMap::new();
        let mut queue = VecDeque::new();
        prev.insert(from.clone(), None);
        queue.push_back(from.clone());
        while let Some(id) = queue.pop_front() {
            if &id == to {
                let mut chain = vec![id.clone()];
                let mut cur = id;
                while let Some(Some(p)) = prev.get(&cur) {
                    chain.push(p.clone());
                    cur = p.clone();
                }
                chain.reverse();
                return Ok(chain);
            }
            for p in &self.commit_rc(&id)?.parents {
                if !prev.contains_key(p) {
                    prev.insert(p.clone(), Some(id.clone()));
                    queue.push_back(p.clone());
                }
            }
        }
        Err(VcsError::NotAncestor {
            from: from.clone(),
            to: to.clone(),
        })
    }
}
