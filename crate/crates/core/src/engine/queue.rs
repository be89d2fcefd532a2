//! Time-ordered event queue with deterministic tie-breaking.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Simultaneous events are ordered by `priority` (lower first), then by
/// insertion order.
#[derive(Debug)]
struct Entry<E> {
    at_fs: i64,
    priority: u8,
    seq: u64,
    payload: E,
}

impl<E> Entry<E> {
    fn key(&self) -> (i64, u8, u64) {
        (self.at_fs, self.priority, self.seq)
    }
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, at_fs: i64, priority: u8, payload: E) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            at_fs,
            priority,
            seq,
            payload,
        });
    }

    pub fn pop(&mut self) -> Option<(i64, E)> {
        self.heap.pop().map(|e| (e.at_fs, e.payload))
    }

    pub fn peek_time(&self) -> Option<i64> {
        self.heap.peek().map(|e| e.at_fs)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_priority_then_insertion() {
        let mut q = EventQueue::new();
        q.push(10, 2, "carrier-a");
        q.push(10, 0, "gate");
        q.push(10, 2, "carrier-b");
        q.push(10, 1, "timer");
        q.push(5, 3, "early");
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, p)| p)).collect();
        assert_eq!(order, ["early", "gate", "timer", "carrier-a", "carrier-b"]);
    }

    proptest! {
        #[test]
        fn pops_in_non_decreasing_time(items in prop::collection::vec((-1000i64..1000, 0u8..4), 0..200)) {
            let mut q = EventQueue::new();
            for (i, &(t, p)) in items.iter().enumerate() {
                q.push(t, p, i);
            }
            let mut last = (i64::MIN, 0u8);
            while let Some((t, i)) = q.pop() {
                let p = items[i].1;
                prop_assert!((t, p) >= last);
                last = (t, p);
            }
        }
    }
}
