//! Knowledge Base: the freshest description of every road user.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::RwLock;

use crate::protocol::{Bounds, RoadUserDescription};

pub const DEFAULT_STALENESS_MS: u64 = 1000;

/// Source of "now" for staleness decisions, in milliseconds.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

/// Wall-clock time since the epoch.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// A clock set by hand; also usable as a shared handle.
#[derive(Debug, Default, Clone)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn new(now_ms: u64) -> Self {
        Self(Arc::new(AtomicU64::new(now_ms)))
    }

    pub fn set(&self, now_ms: u64) {
        self.0.store(now_ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone)]
struct Slot {
    /// `None` once evicted.
    rud: Option<RoadUserDescription>,
    /// Highest timestamp ever accepted for this id, kept across eviction.
    max_ts: u64,
}

/// Thread-safe last-writer-wins store keyed by user id.
///
/// Without an explicit clock, "now" is the largest timestamp the base has
/// seen, so recorded traces age consistently regardless of wall time.
pub struct KnowledgeBase {
    slots: RwLock<HashMap<String, Slot>>,
    staleness_ms: u64,
    clock: Option<Box<dyn Clock>>,
    latest_seen: AtomicU64,
}

impl std::fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("entries", &self.slots.read().len())
            .field("staleness_ms", &self.staleness_ms)
            .finish()
    }
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self::new(DEFAULT_STALENESS_MS)
    }
}

impl KnowledgeBase {
    pub fn new(staleness_ms: u64) -> Self {
        Self {
            slots: RwLock::new(HashMap::new()),
            staleness_ms,
            clock: None,
            latest_seen: AtomicU64::new(0),
        }
    }

    pub fn with_clock(staleness_ms: u64, clock: Box<dyn Clock>) -> Self {
        Self {
            clock: Some(clock),
            ..Self::new(staleness_ms)
        }
    }

    pub fn staleness_ms(&self) -> u64 {
        self.staleness_ms
    }

    pub fn now_ms(&self) -> u64 {
        match &self.clock {
            Some(c) => c.now_ms(),
            None => self.latest_seen.load(Ordering::SeqCst),
        }
    }

    fn is_stale(&self, ts: u64, now: u64) -> bool {
        now.saturating_sub(ts) > self.staleness_ms
    }

    /// Stores `rud` unless a newer description of the same user is known.
    /// Equal timestamps replace the stored entry. Returns whether it was stored.
    pub fn upsert(&self, rud: RoadUserDescription) -> bool {
        self.latest_seen.fetch_max(rud.timestamp, Ordering::SeqCst);
        let mut slots = self.slots.write();
        match slots.get_mut(&rud.user_id) {
            Some(slot) if rud.timestamp < slot.max_ts => false,
            Some(slot) => {
                slot.max_ts = rud.timestamp;
                slot.rud = Some(rud);
                true
            }
            None => {
                slots.insert(
                    rud.user_id.clone(),
                    Slot {
                        max_ts: rud.timestamp,
                        rud: Some(rud),
                    },
                );
                true
            }
        }
    }

    /// Current description of one user, if present and fresh.
    pub fn get(&self, user_id: &str) -> Option<RoadUserDescription> {
        let now = self.now_ms();
        let found = self.slots.read().get(user_id).and_then(|s| s.rud.clone());
        match found {
            Some(r) if self.is_stale(r.timestamp, now) => {
                self.evict(now);
                None
            }
            other => other,
        }
    }

    /// Point-in-time copy of every fresh entry inside `bounds`, sorted by id.
    /// Stale entries met on the way are evicted.
    pub fn snapshot(&self, bounds: &Bounds) -> Vec<RoadUserDescription> {
        let now = self.now_ms();
        let mut saw_stale = false;
        let mut out: Vec<RoadUserDescription> = {
            let slots = self.slots.read();
            slots
                .values()
                .filter_map(|s| s.rud.as_ref())
                .filter(|r| {
                    let stale = self.is_stale(r.timestamp, now);
                    saw_stale |= stale;
                    !stale && bounds.contains(r.position)
                })
                .cloned()
                .collect()
        };
        if saw_stale {
            self.evict(now);
        }
        out.sort_by(|a, b| a.user_id.cmp(&b.user_id));
        out
    }

    fn evict(&self, now: u64) {
        let mut slots = self.slots.write();
        for slot in slots.values_mut() {
            if slot
                .rud
                .as_ref()
                .is_some_and(|r| self.is_stale(r.timestamp, now))
            {
                slot.rud = None;
            }
        }
    }

    /// Number of live (not evicted) entries.
    pub fn len(&self) -> usize {
        self.slots
            .read()
            .values()
            .filter(|s| s.rud.is_some())
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Highest timestamp accepted per user id, including evicted users.
    pub fn high_water_marks(&self) -> HashMap<String, u64> {
        self.slots
            .read()
            .iter()
            .map(|(k, s)| (k.clone(), s.max_ts))
            .collect()
    }
}
