//! In-process multi-rank communication: one-sided put with notification
//! counters, FIFO two-sided channels, and a virtual clock.

mod clock;
mod wire;

pub use clock::{CostModel, VirtualClock};
pub use wire::{decode_f64_payload, encode_f64_frame, FrameHeader};

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Minimal region size: one frame header.
pub const HEADER_BYTES: usize = 32;

/// Separate counter spaces so halo traffic never satisfies a particle wait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Namespace {
    Particles = 0,
    Halo = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionHandle {
    pub index: usize,
    pub ns: Namespace,
    pub receiver: usize,
    pub sender: usize,
    pub slot: usize,
}

struct Region {
    handle: RegionHandle,
    capacity: usize,
    data: Mutex<Vec<u8>>,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    seq: u64,
    region: usize,
    epoch: u64,
    send: f64,
    arrive: f64,
}

/// One counter observation, for timeline determinism checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterEvent {
    pub receiver: usize,
    pub ns: Namespace,
    pub epoch: u64,
    pub time: f64,
    pub count: u64,
}

struct Message {
    sender: usize,
    payload: Vec<u8>,
    send: f64,
}

struct Channel {
    queue: Mutex<VecDeque<Message>>,
    ready: Condvar,
}

/// Shared communication substrate for `n_ranks` in-process ranks.
pub struct RankFabric {
    n_ranks: usize,
    virtual_mode: bool,
    cost: CostModel,
    sealed: bool,
    regions: Vec<Region>,
    lookup: HashMap<(Namespace, usize, usize), usize>,
    counters: Vec<AtomicU64>,
    consumed: Mutex<Vec<u64>>,
    pending: Mutex<Vec<Vec<Pending>>>,
    seq: AtomicU64,
    last_batch: Mutex<HashMap<(usize, Namespace), u64>>,
    channels: Mutex<HashMap<(usize, usize), std::sync::Arc<Channel>>>,
    timeline: Mutex<Vec<CounterEvent>>,
    timeout: Duration,
}

impl std::fmt::Debug for RankFabric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RankFabric")
            .field("n_ranks", &self.n_ranks)
            .field("virtual_mode", &self.virtual_mode)
            .field("regions", &self.regions.len())
            .finish()
    }
}

fn slot_of(ns: Namespace, receiver: usize) -> usize {
    receiver * 2 + ns as usize
}

impl RankFabric {
    pub fn new(n_ranks: usize, virtual_mode: bool, cost: CostModel) -> Self {
        Self {
            n_ranks,
            virtual_mode,
            cost,
            sealed: false,
            regions: Vec::new(),
            lookup: HashMap::new(),
            counters: (0..2 * n_ranks).map(|_| AtomicU64::new(0)).collect(),
            consumed: Mutex::new(vec![0; 2 * n_ranks]),
            pending: Mutex::new(vec![Vec::new(); 2 * n_ranks]),
            seq: AtomicU64::new(0),
            last_batch: Mutex::new(HashMap::new()),
            channels: Mutex::new(HashMap::new()),
            timeline: Mutex::new(Vec::new()),
            timeout: Duration::from_secs(10),
        }
    }

    pub fn n_ranks(&self) -> usize {
        self.n_ranks
    }

    pub fn is_virtual(&self) -> bool {
        self.virtual_mode
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn set_timeout(&mut self, t: Duration) {
        self.timeout = t;
    }

    /// Registers the region `sender` writes into at `receiver`. `slot`
    /// distinguishes several regions of one pair (the travel direction).
    pub fn register_region(
        &mut self,
        ns: Namespace,
        receiver: usize,
        sender: usize,
        slot: usize,
        bytes: usize,
    ) -> Result<RegionHandle> {
        if self.sealed {
            return Err(Error::Protocol(
                "region registered after stepping began".into(),
            ));
        }
        if receiver >= self.n_ranks || sender >= self.n_ranks {
            return Err(Error::Protocol(format!(
                "rank out of range ({receiver}, {sender})"
            )));
        }
        if self.lookup.contains_key(&(ns, receiver, slot)) {
            return Err(Error::Protocol(format!(
                "duplicate region {ns:?} receiver {receiver} slot {slot}"
            )));
        }
        let handle = RegionHandle {
            index: self.regions.len(),
            ns,
            receiver,
            sender,
            slot,
        };
        self.lookup.insert((ns, receiver, slot), handle.index);
        self.regions.push(Region {
            handle,
            capacity: bytes.max(HEADER_BYTES),
            data: Mutex::new(Vec::new()),
        });
        Ok(handle)
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn region_capacity(&self, h: RegionHandle) -> usize {
        self.regions[h.index].capacity
    }

    pub fn handle(&self, ns: Namespace, receiver: usize, slot: usize) -> Option<RegionHandle> {
        self.lookup
            .get(&(ns, receiver, slot))
            .map(|&i| self.regions[i].handle)
    }

    pub fn regions_of(&self, ns: Namespace, receiver: usize) -> usize {
        self.regions
            .iter()
            .filter(|r| r.handle.ns == ns && r.handle.receiver == receiver)
            .count()
    }

    /// Number of notifications delivered to `receiver` so far.
    pub fn counter(&self, receiver: usize, ns: Namespace) -> u64 {
        self.counters[slot_of(ns, receiver)].load(Ordering::Acquire)
    }

    /// Writes `payload` into the region and bumps the receiver's counter.
    ///
    /// The payload copy happens before the release increment, so a receiver
    /// that acquires the new count sees the whole frame.
    pub fn put_notify(
        &self,
        sender: usize,
        h: RegionHandle,
        payload: &[u8],
        epoch: u64,
        send_time: f64,
    ) -> Result<()> {
        let region = &self.regions[h.index];
        if region.handle.sender != sender {
            return Err(Error::Protocol(format!(
                "rank {sender} wrote region owned by sender {}",
                region.handle.sender
            )));
        }
        if payload.len() > region.capacity {
            return Err(Error::Protocol(format!(
                "payload {} bytes exceeds region capacity {}",
                payload.len(),
                region.capacity
            )));
        }
        {
            let mut d = region.data.lock().unwrap();
            d.clear();
            d.extend_from_slice(payload);
        }
        let arrive = send_time + self.cost.latency(payload.len());
        let s = slot_of(h.ns, h.receiver);
        self.pending.lock().unwrap()[s].push(Pending {
            seq: self.seq.fetch_add(1, Ordering::Relaxed),
            region: h.index,
            epoch,
            send: send_time,
            arrive,
        });
        self.counters[s].fetch_add(1, Ordering::Release);
        Ok(())
    }

    /// Issues every put of one epoch as a single call. Returns the issue cost.
    pub fn batch_put(
        &self,
        sender: usize,
        ns: Namespace,
        epoch: u64,
        entries: &[(RegionHandle, Vec<u8>)],
        send_time: f64,
    ) -> Result<f64> {
        {
            let mut lb = self.last_batch.lock().unwrap();
            if lb.get(&(sender, ns)) == Some(&epoch) {
                return Err(Error::Protocol(format!(
                    "rank {sender} issued a second batch in epoch {epoch}"
                )));
            }
            lb.insert((sender, ns), epoch);
        }
        for (h, p) in entries {
            self.put_notify(sender, *h, p, epoch, send_time)?;
        }
        Ok(self.cost.one_sided_issue * entries.len() as f64)
    }

    /// Blocks until `expected` further notifications have arrived at
    /// `receiver`, consuming them. Returns the time spent waiting and the
    /// consumed region handles in put order.
    pub fn wait_counter(
        &self,
        receiver: usize,
        ns: Namespace,
        expected: u64,
        clock: Option<&mut VirtualClock>,
    ) -> Result<(f64, Vec<RegionHandle>)> {
        let s = slot_of(ns, receiver);
        let base = self.consumed.lock().unwrap()[s];
        let start = Instant::now();
        loop {
            let have = self.counters[s].load(Ordering::Acquire) - base;
            if have >= expected {
                break;
            }
            if self.virtual_mode || start.elapsed() > self.timeout {
                return Err(self.deadlock(receiver, ns, have, expected));
            }
            std::hint::spin_loop();
            std::thread::yield_now();
        }
        let mut pend = self.pending.lock().unwrap();
        let list = &mut pend[s];
        list.sort_by_key(|p| p.seq);
        let taken: Vec<Pending> = list.drain(..expected as usize).collect();
        drop(pend);
        self.consumed.lock().unwrap()[s] += expected;
        let last = taken
            .iter()
            .map(|p| p.arrive)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut waited = 0.0;
        let mut time = last;
        if let Some(c) = clock {
            if expected > 0 {
                waited = c.wait_until(last);
            }
            time = c.now;
        }
        self.timeline.lock().unwrap().push(CounterEvent {
            receiver,
            ns,
            epoch: taken.first().map_or(0, |p| p.epoch),
            time,
            count: base + expected,
        });
        Ok((
            waited,
            taken
                .iter()
                .map(|p| self.regions[p.region].handle)
                .collect(),
        ))
    }

    fn deadlock(&self, receiver: usize, ns: Namespace, have: u64, expected: u64) -> Error {
        let pend = self.pending.lock().unwrap();
        let landed: Vec<usize> = pend[slot_of(ns, receiver)]
            .iter()
            .map(|p| p.region)
            .collect();
        let mut missing: Vec<usize> = self
            .regions
            .iter()
            .filter(|r| r.handle.ns == ns && r.handle.receiver == receiver)
            .filter(|r| !landed.contains(&r.handle.index))
            .map(|r| r.handle.sender)
            .collect();
        missing.sort_unstable();
        missing.dedup();
        Error::Deadlock {
            receiver,
            have,
            expected,
            missing,
        }
    }

    /// Whether particle traffic to `receiver` is still in flight at `t`.
    pub fn particles_in_flight(&self, receiver: usize, t: f64) -> bool {
        self.pending.lock().unwrap()[slot_of(Namespace::Particles, receiver)]
            .iter()
            .any(|p| p.arrive > t && p.send <= t)
    }

    /// Inflates latency of pending halo puts to `receiver` by the contention
    /// multiplier. Called by the halo exchange when particle frames overlap.
    pub fn apply_contention(&self, receiver: usize) {
        let mut pend = self.pending.lock().unwrap();
        for p in &mut pend[slot_of(Namespace::Halo, receiver)] {
            p.arrive = p.send + (p.arrive - p.send) * self.cost.contention;
        }
    }

    pub fn read_region(&self, h: RegionHandle) -> Vec<u8> {
        self.regions[h.index].data.lock().unwrap().clone()
    }

    pub fn with_region<T>(&self, h: RegionHandle, f: impl FnOnce(&[u8]) -> T) -> T {
        f(&self.regions[h.index].data.lock().unwrap())
    }

    fn channel(&self, receiver: usize, slot: usize) -> std::sync::Arc<Channel> {
        self.channels
            .lock()
            .unwrap()
            .entry((receiver, slot))
            .or_insert_with(|| {
                std::sync::Arc::new(Channel {
                    queue: Mutex::new(VecDeque::new()),
                    ready: Condvar::new(),
                })
            })
            .clone()
    }

    /// Two-sided send into the FIFO `(receiver, slot)`. Returns the issue cost.
    pub fn channel_send(
        &self,
        sender: usize,
        receiver: usize,
        slot: usize,
        payload: Vec<u8>,
        send_time: f64,
    ) -> f64 {
        let ch = self.channel(receiver, slot);
        ch.queue.lock().unwrap().push_back(Message {
            sender,
            payload,
            send: send_time,
        });
        ch.ready.notify_all();
        self.cost.two_sided_issue
    }

    /// Two-sided receive. In virtual mode the message completes at
    /// `send + latency`, plus the progression penalty when the receiver was
    /// computing while the message was in flight.
    pub fn channel_recv(
        &self,
        receiver: usize,
        slot: usize,
        clock: Option<&mut VirtualClock>,
    ) -> Result<(usize, Vec<u8>, f64)> {
        let ch = self.channel(receiver, slot);
        let mut q = ch.queue.lock().unwrap();
        let deadline = Instant::now() + self.timeout;
        let msg = loop {
            if let Some(m) = q.pop_front() {
                break m;
            }
            if self.virtual_mode {
                return Err(Error::Deadlock {
                    receiver,
                    have: 0,
                    expected: 1,
                    missing: vec![],
                });
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(Error::Deadlock {
                    receiver,
                    have: 0,
                    expected: 1,
                    missing: vec![],
                });
            }
            q = ch.ready.wait_timeout(q, deadline - now).unwrap().0;
        };
        drop(q);
        let mut waited = 0.0;
        if let Some(c) = clock {
            let lat = self.cost.latency(msg.payload.len());
            let mut arrive = msg.send + lat;
            if c.computing_during(msg.send, arrive) {
                arrive += self.cost.progression_penalty * lat;
            }
            waited = c.wait_until(arrive);
        }
        Ok((msg.sender, msg.payload, waited))
    }

    pub fn timeline(&self) -> Vec<CounterEvent> {
        self.timeline.lock().unwrap().clone()
    }
}
