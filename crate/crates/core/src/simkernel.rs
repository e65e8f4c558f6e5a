//! Deterministic discrete-event core: virtual clock, event queue and seeded
//! randomness shared by every other module.
//!
//! Virtual time is an integer count of milliseconds. Events with equal
//! timestamps pop in the order they were scheduled.
//!
//! All randomness comes from [`SimRng`], a ChaCha8 stream (RFC 7539 core with
//! 8 rounds, as implemented by `rand_chacha`). ChaCha output is specified
//! byte-for-byte, so a seed yields the same draws on every platform.
//! Per-module substreams are forked from a scenario seed by a fixed label, so
//! adding a consumer never perturbs another consumer's draws.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Virtual time in milliseconds.
pub type TimeMs = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("cannot schedule at t={at}ms, clock is already at {now}ms")]
    SchedulingInPast { at: TimeMs, now: TimeMs },
    #[error("deadline {deadline}ms precedes current time {now}ms")]
    DeadlineInPast { deadline: TimeMs, now: TimeMs },
    #[error("probability {0} outside [0, 1]")]
    Domain(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimClock {
    now: TimeMs,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> TimeMs {
        self.now
    }

    fn advance_to(&mut self, t: TimeMs) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// Handle returned by [`EventQueue::schedule`]; the sequence number is unique
/// per queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle {
    pub at: TimeMs,
    pub seq: u64,
}

struct Entry<E> {
    at: TimeMs,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Priority queue ordered by `(timestamp, sequence)`.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
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

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(
        &mut self,
        clock: &SimClock,
        at: TimeMs,
        payload: E,
    ) -> Result<EventHandle, SimError> {
        if at < clock.now() {
            return Err(SimError::SchedulingInPast {
                at,
                now: clock.now(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { at, seq, payload }));
        Ok(EventHandle { at, seq })
    }

    pub fn peek_time(&self) -> Option<TimeMs> {
        self.heap.peek().map(|Reverse(e)| e.at)
    }

    fn pop(&mut self) -> Option<(EventHandle, E)> {
        self.heap.pop().map(|Reverse(e)| {
            (
                EventHandle {
                    at: e.at,
                    seq: e.seq,
                },
                e.payload,
            )
        })
    }
}

/// Clock plus queue. Handlers receive the simulator so they can schedule
/// follow-up events.
pub struct Simulation<E> {
    pub clock: SimClock,
    pub queue: EventQueue<E>,
}

impl<E> Default for Simulation<E> {
    fn default() -> Self {
        Self {
            clock: SimClock::new(),
            queue: EventQueue::new(),
        }
    }
}

impl<E> Simulation<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> TimeMs {
        self.clock.now()
    }

    pub fn schedule(&mut self, at: TimeMs, payload: E) -> Result<EventHandle, SimError> {
        self.queue.schedule(&self.clock, at, payload)
    }

    pub fn schedule_in(&mut self, delay: TimeMs, payload: E) -> Result<EventHandle, SimError> {
        let at = self.clock.now() + delay;
        self.schedule(at, payload)
    }

    /// Processes every event with timestamp `<= deadline` and returns how many
    /// ran. The clock never moves past the last processed timestamp.
    pub fn run_until<F>(&mut self, deadline: TimeMs, mut handler: F) -> Result<usize, SimError>
    where
        F: FnMut(&mut Self, EventHandle, E),
    {
        if deadline < self.clock.now() {
            return Err(SimError::DeadlineInPast {
                deadline,
                now: self.clock.now(),
            });
        }
        let mut processed = 0;
        while self.queue.peek_time().is_some_and(|t| t <= deadline) {
            let (handle, payload) = self.queue.pop().expect("peeked");
            self.clock.advance_to(handle.at);
            handler(self, handle, payload);
            processed += 1;
        }
        Ok(processed)
    }

    /// Runs until the queue drains.
    pub fn run<F>(&mut self, handler: F) -> usize
    where
        F: FnMut(&mut Self, EventHandle, E),
    {
        self.run_until(TimeMs::MAX, handler)
            .expect("MAX deadline is never in the past")
    }
}

/// Seeded random stream.
#[derive(Clone, Debug)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn seed_from(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent substream keyed by `(seed, label)`. The derived seed is the
    /// SHA-256 of the little-endian seed followed by the UTF-8 label.
    pub fn fork(seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest[..32]);
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool, SimError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::Domain(p));
        }
        Ok(self.unit() < p)
    }

    /// Uniform integer in `[0, n)`. Panics when `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.unit()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
