use std::collections::HashMap;

use crate::corpus::PaperId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueueEntry {
    pub id: PaperId,
    /// 1 for papers found from the bare query, d + 1 for papers found while
    /// processing a depth-d paper.
    pub depth: u32,
}

/// The crawler's paper queue: insertion-ordered, duplicate-free, with a
/// FIFO cursor marking which papers have had their session.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PaperQueue {
    entries: Vec<QueueEntry>,
    position: HashMap<PaperId, usize>,
    cursor: usize,
}

impl PaperQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `id` unless already present. Returns whether it was added.
    pub fn push(&mut self, id: PaperId, depth: u32) -> bool {
        if self.position.contains_key(&id) {
            return false;
        }
        self.position.insert(id, self.entries.len());
        self.entries.push(QueueEntry { id, depth });
        true
    }

    pub fn contains(&self, id: PaperId) -> bool {
        self.position.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QueueEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = PaperId> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    /// Insertion index of `id`, if queued.
    pub fn position(&self, id: PaperId) -> Option<usize> {
        self.position.get(&id).copied()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Next unprocessed paper in FIFO order; advances the cursor.
    pub fn next_unprocessed(&mut self) -> Option<QueueEntry> {
        let e = self.entries.get(self.cursor).copied()?;
        self.cursor += 1;
        Some(e)
    }

    /// Membership as it was when the queue held its first `len` entries.
    pub fn view_before(&self, len: usize) -> QueueView<'_> {
        QueueView {
            queue: self,
            len: len.min(self.entries.len()),
        }
    }

    pub fn view(&self) -> QueueView<'_> {
        self.view_before(self.entries.len())
    }
}

/// A prefix of a [`PaperQueue`]: the queue state before some action.
#[derive(Clone, Copy, Debug)]
pub struct QueueView<'a> {
    queue: &'a PaperQueue,
    len: usize,
}

impl QueueView<'_> {
    pub fn contains(&self, id: PaperId) -> bool {
        self.queue.position(id).is_some_and(|p| p < self.len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn push_dedups_and_cursor_is_fifo() {
        let mut q = PaperQueue::new();
        assert!(q.push(PaperId(5), 1));
        assert!(q.push(PaperId(2), 1));
        assert!(!q.push(PaperId(5), 2));
        assert_eq!(q.next_unprocessed().unwrap().id, PaperId(5));
        assert_eq!(q.next_unprocessed().unwrap().id, PaperId(2));
        assert!(q.next_unprocessed().is_none());
        assert_eq!(q.cursor(), 2);
    }

    #[test]
    fn prefix_view() {
        let mut q = PaperQueue::new();
        q.push(PaperId(1), 1);
        q.push(PaperId(2), 1);
        let v = q.view_before(1);
        assert!(v.contains(PaperId(1)));
        assert!(!v.contains(PaperId(2)));
        assert!(q.view().contains(PaperId(2)));
    }

    proptest! {
        #[test]
        fn ids_stay_unique(ids in proptest::collection::vec(0u32..40, 0..200)) {
            let mut q = PaperQueue::new();
            let mut before = 0;
            for id in ids {
                q.push(PaperId(id), 1);
                prop_assert!(q.len() >= before);
                before = q.len();
            }
            let mut seen: Vec<_> = q.ids().collect();
            let n = seen.len();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
        }
    }
}
