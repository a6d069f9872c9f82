use std::collections::BTreeSet;

/// Correspondence between the lines of two file versions.
///
/// Built from the removed/added line sets of a context-free diff: every line
/// not removed on the old side pairs, in order, with a line not added on the
/// new side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineAlignment {
    // 1-based; index 0 unused.
    new_to_old: Vec<Option<usize>>,
    old_to_new: Vec<Option<usize>>,
}

impl LineAlignment {
    pub fn identity(len: usize) -> Self {
        let map: Vec<Option<usize>> = std::iter::once(None).chain((1..=len).map(Some)).collect();
        LineAlignment {
            new_to_old: map.clone(),
            old_to_new: map,
        }
    }

    pub fn new(
        old_len: usize,
        new_len: usize,
        removed: &BTreeSet<usize>,
        added: &BTreeSet<usize>,
    ) -> Self {
        let mut new_to_old = vec![None; new_len + 1];
        let mut old_to_new = vec![None; old_len + 1];
        let kept_old = (1..=old_len).filter(|l| !removed.contains(l));
        let kept_new = (1..=new_len).filter(|l| !added.contains(l));
        for (o, n) in kept_old.zip(kept_new) {
            new_to_old[n] = Some(o);
            old_to_new[o] = Some(n);
        }
        LineAlignment {
            new_to_old,
            old_to_new,
        }
    }

    pub fn old_len(&self) -> usize {
        self.old_to_new.len() - 1
    }

    pub fn new_len(&self) -> usize {
        self.new_to_old.len() - 1
    }

    /// Old-side line for an unchanged new-side line.
    pub fn to_old(&self, new_line: usize) -> Option<usize> {
        self.new_to_old.get(new_line).copied().flatten()
    }

    pub fn to_new(&self, old_line: usize) -> Option<usize> {
        self.old_to_new.get(old_line).copied().flatten()
    }

    /// For a changed new-side line, the removed old-side lines of the same
    /// hunk and the line's index among the hunk's added lines.
    pub fn hunk_of_new(&self, new_line: usize) -> Option<(Vec<usize>, usize)> {
        if new_line == 0 || new_line > self.new_len() || self.to_old(new_line).is_some() {
            return None;
        }
        // Nearest unchanged anchors on both sides of the line.
        let prev = (1..new_line).rev().find_map(|n| self.to_old(n).map(|o| (n, o)));
        let next = (new_line + 1..=self.new_len()).find_map(|n| self.to_old(n).map(|o| (n, o)));
        let (prev_new, prev_old) = prev.unwrap_or((0, 0));
        let next_old = next.map(|(_, o)| o).unwrap_or(self.old_len() + 1);
        let removed: Vec<usize> = (prev_old + 1..next_old).collect();
        Some((removed, new_line - prev_new - 1))
    }
}
