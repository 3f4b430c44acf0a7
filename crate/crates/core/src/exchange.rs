//! Latest-value slots shared between the plant and the solver workers.
//!
//! Each slot has a single writer. Readers always get a complete snapshot: a
//! publish swaps in a freshly allocated value and the old one is reclaimed
//! through epoch-based garbage collection once no reader can still see it.

use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam_epoch::{self as epoch, Atomic, Owned};

use crate::problem::{FootstepPlan, PlanSource};

/// A value tagged with the sequence number it was published under.
#[derive(Debug, Clone, PartialEq)]
pub struct Stamped<T> {
    pub seq: u64,
    pub value: T,
}

pub struct LatestSlot<T> {
    ptr: Atomic<Stamped<T>>,
    seq: AtomicU64,
}

impl<T: Clone> Default for LatestSlot<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Clone> LatestSlot<T> {
    pub fn new() -> Self {
        Self {
            ptr: Atomic::null(),
            seq: AtomicU64::new(0),
        }
    }

    /// Stores `value` under the next sequence number and returns it.
    pub fn publish(&self, value: T) -> u64 {
        let seq = self.seq.fetch_add(1, Ordering::AcqRel) + 1;
        let guard = epoch::pin();
        let old = self
            .ptr
            .swap(Owned::new(Stamped { seq, value }), Ordering::AcqRel, &guard);
        if !old.is_null() {
            // SAFETY: `old` was unlinked by the swap above; readers that
            // loaded it are pinned, so destruction waits for them.
            unsafe { guard.defer_destroy(old) };
        }
        seq
    }

    /// A copy of the newest value, if any was published.
    pub fn latest(&self) -> Option<Stamped<T>> {
        let guard = epoch::pin();
        let shared = self.ptr.load(Ordering::Acquire, &guard);
        // SAFETY: non-null pointers in the slot are valid while pinned.
        unsafe { shared.as_ref() }.cloned()
    }

    /// Sequence number of the newest publish (0 if none).
    pub fn seq(&self) -> u64 {
        self.seq.load(Ordering::Acquire)
    }
}

impl<T> Drop for LatestSlot<T> {
    fn drop(&mut self) {
        // SAFETY: `&mut self` means no other thread can access the slot.
        unsafe {
            let guard = epoch::unprotected();
            let p = self.ptr.load(Ordering::Relaxed, guard);
            if !p.is_null() {
                drop(p.into_owned());
            }
        }
    }
}

/// A solver result together with the snapshot it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub plan: FootstepPlan,
    /// Plant time of the snapshot.
    pub computed_at: f64,
    /// Plant step count at the snapshot.
    pub computed_steps: usize,
    pub objective: f64,
    /// Descent only: the starting gradient was rejected.
    pub rejected: bool,
}

impl SolverResult {
    pub fn usable(&self) -> bool {
        !self.rejected && self.plan.feasible && self.plan.is_finite()
    }
}

/// The plan the plant is executing, stamped with its acceptance sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedPlan {
    pub result: SolverResult,
    pub source: PlanSource,
}

/// Per-source solution slots plus the accepted plan.
#[derive(Default)]
pub struct PlanExchange {
    pub rk4: LatestSlot<SolverResult>,
    pub gd: LatestSlot<SolverResult>,
    pub baseline: LatestSlot<SolverResult>,
    pub accepted: LatestSlot<AcceptedPlan>,
}

impl PlanExchange {
    pub fn slot(&self, source: PlanSource) -> &LatestSlot<SolverResult> {
        match source {
            PlanSource::Rk4 => &self.rk4,
            PlanSource::GradientDescent => &self.gd,
            PlanSource::Baseline => &self.baseline,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::thread;

    #[test]
    fn sequence_numbers_increase() {
        let slot = LatestSlot::new();
        assert!(slot.latest().is_none());
        assert_eq!(slot.publish(5), 1);
        assert_eq!(slot.publish(7), 2);
        assert_eq!(slot.latest(), Some(Stamped { seq: 2, value: 7 }));
    }

    #[test]
    fn readers_never_see_torn_values() {
        // Each value is a vector whose entries all equal its length.
        let slot = Arc::new(LatestSlot::<Vec<u64>>::new());
        let writer = {
            let slot = Arc::clone(&slot);
            thread::spawn(move || {
                for n in 1..2000u64 {
                    slot.publish(vec![n; (n % 17 + 1) as usize]);
                }
            })
        };
        let mut last = 0;
        for _ in 0..20000 {
            if let Some(s) = slot.latest() {
                assert!(s.value.iter().all(|&v| v == s.value[0]));
                assert!(s.seq >= last);
                last = s.seq;
            }
        }
        writer.join().unwrap();
        assert_eq!(slot.seq(), 1999);
    }
}
