//! Valves: preemptible semaphores over effector resources.

use super::ThreadId;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquisition {
    Granted,
    /// Ownership moved to the requester; the previous owner is now queued.
    Preempted {
        previous: ThreadId,
    },
    Queued,
}

#[derive(Debug, Clone, PartialEq)]
struct Waiter {
    thread: ThreadId,
    priority: i64,
    seq: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Entry {
    owner: Option<(ThreadId, i64)>,
    waiters: Vec<Waiter>,
}

/// Owner and waiting queue per valve. Waiters are served by priority, then
/// in arrival order; a preempted owner goes to the front of its priority.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValveTable {
    valves: BTreeMap<String, Entry>,
    next_seq: i64,
    front_seq: i64,
}

impl ValveTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn owner(&self, valve: &str) -> Option<ThreadId> {
        self.valves.get(valve).and_then(|e| e.owner.map(|o| o.0))
    }

    pub fn waiters(&self, valve: &str) -> Vec<ThreadId> {
        let mut w = self
            .valves
            .get(valve)
            .map(|e| e.waiters.clone())
            .unwrap_or_default();
        w.sort_by_key(|w| (std::cmp::Reverse(w.priority), w.seq));
        w.into_iter().map(|w| w.thread).collect()
    }

    pub fn acquire(&mut self, thread: ThreadId, valve: &str, priority: i64) -> Acquisition {
        let e = self.valves.entry(valve.to_string()).or_default();
        match e.owner {
            None => {
                e.owner = Some((thread, priority));
                Acquisition::Granted
            }
            Some((owner, _)) if owner == thread => Acquisition::Granted,
            Some((owner, p)) if priority > p => {
                self.front_seq -= 1;
                e.waiters.push(Waiter {
                    thread: owner,
                    priority: p,
                    seq: self.front_seq,
                });
                e.owner = Some((thread, priority));
                Acquisition::Preempted { previous: owner }
            }
            Some(_) => {
                self.next_seq += 1;
                e.waiters.push(Waiter {
                    thread,
                    priority,
                    seq: self.next_seq,
                });
                Acquisition::Queued
            }
        }
    }

    /// Drop `thread` as owner or waiter. Returns the newly granted owner.
    pub fn release(&mut self, thread: ThreadId, valve: &str) -> Option<ThreadId> {
        let e = self.valves.get_mut(valve)?;
        e.waiters.retain(|w| w.thread != thread);
        if e.owner.map(|o| o.0) != Some(thread) {
            return None;
        }
        e.owner = None;
        let best = e
            .waiters
            .iter()
            .enumerate()
            .min_by_key(|(_, w)| (std::cmp::Reverse(w.priority), w.seq))
            .map(|(i, _)| i)?;
        let w = e.waiters.remove(best);
        e.owner = Some((w.thread, w.priority));
        Some(w.thread)
    }

    pub fn is_empty(&self) -> bool {
        self.valves
            .values()
            .all(|e| e.owner.is_none() && e.waiters.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_valve_is_granted() {
        let mut t = ValveTable::new();
        assert_eq!(t.acquire(1, "wheels", 0), Acquisition::Granted);
        assert_eq!(t.owner("wheels"), Some(1));
    }

    #[test]
    fn higher_priority_preempts() {
        let mut t = ValveTable::new();
        t.acquire(1, "wheels", 1);
        assert_eq!(
            t.acquire(2, "wheels", 5),
            Acquisition::Preempted { previous: 1 }
        );
        assert_eq!(t.owner("wheels"), Some(2));
        assert_eq!(t.release(2, "wheels"), Some(1));
    }

    #[test]
    fn equal_priority_queues_fifo() {
        let mut t = ValveTable::new();
        t.acquire(1, "wheels", 3);
        assert_eq!(t.acquire(2, "wheels", 3), Acquisition::Queued);
        assert_eq!(t.acquire(3, "wheels", 3), Acquisition::Queued);
        assert_eq!(t.waiters("wheels"), vec![2, 3]);
        assert_eq!(t.release(1, "wheels"), Some(2));
        assert_eq!(t.release(2, "wheels"), Some(3));
        assert_eq!(t.release(3, "wheels"), None);
        assert!(t.is_empty());
    }

    #[test]
    fn preempted_owner_is_first_among_equals() {
        let mut t = ValveTable::new();
        t.acquire(1, "wheels", 1);
        t.acquire(2, "wheels", 1);
        t.acquire(3, "wheels", 9);
        assert_eq!(t.waiters("wheels"), vec![1, 2]);
    }

    #[test]
    fn never_two_owners() {
        // exhaustive over short request sequences
        for mask in 0..(1u32 << 8) {
            let mut t = ValveTable::new();
            for i in 0..4u64 {
                let prio = ((mask >> (2 * i)) & 3) as i64;
                t.acquire(i, "v", prio);
            }
            let mut owners = 0;
            let mut all: Vec<_> = t.waiters("v");
            all.extend(t.owner("v"));
            all.sort();
            owners += t.owner("v").is_some() as usize;
            assert_eq!(owners, 1);
            assert_eq!(all, vec![0, 1, 2, 3]);
        }
    }
}
