//! Episodic value memory: one bounded buffer of aggregated entries per action.
//!
//! Search is an exact linear scan. Distances are Euclidean; ties are broken by
//! the lower `insert_index`, so every query has a single deterministic answer.
//! Each read or write that touches at least one entry advances the buffer's
//! tick once and stamps every touched entry with it; eviction removes the
//! entry with the oldest stamp (lowest `insert_index` among equals).

use std::cmp::Ordering;

use crate::embedding::StateKey;
use crate::error::{Error, Result};

/// Capacity value meaning "never evict". Stored as a 32-bit field in snapshots.
pub const UNLIMITED_CAPACITY: usize = u32::MAX as usize;

/// One aggregated experience: a state centroid, its return estimate and the
/// number of experiences merged into it.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    key: StateKey,
    q: f64,
    count: u64,
    last_access: u64,
    insert_index: u64,
}

impl Entry {
    pub fn key(&self) -> &StateKey {
        &self.key
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn last_access(&self) -> u64 {
        self.last_access
    }

    pub fn insert_index(&self) -> u64 {
        self.insert_index
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WritebackBranch {
    ExactMatch,
    Merged,
    Inserted,
    InsertedWithEviction,
}

impl WritebackBranch {
    pub fn is_insert(self) -> bool {
        matches!(
            self,
            WritebackBranch::Inserted | WritebackBranch::InsertedWithEviction
        )
    }
}

/// What a single writeback did.
#[derive(Clone, Debug, PartialEq)]
pub struct WritebackOutcome {
    pub branch: WritebackBranch,
    /// Distance from the written key to its nearest entry before the update;
    /// `None` iff the buffer was empty.
    pub distance_to_nearest: Option<f64>,
    /// Value of that nearest entry before the update.
    pub nearest_q: Option<f64>,
    /// Change of the affected entry's value. A new entry counts as a change
    /// from zero, so for inserts this is the written return.
    pub q_delta: f64,
    /// `insert_index` of the entry that was updated or created.
    pub entry_index: u64,
    /// Entry removed to make room, for `InsertedWithEviction`.
    pub evicted: Option<Entry>,
}

/// Result of an instrumented kNN estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnEstimate {
    pub value: f64,
    /// `insert_index` of every entry used, nearest first.
    pub used: Vec<u64>,
    pub exact_match: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionBuffer {
    dim: usize,
    capacity: usize,
    entries: Vec<Entry>,
    tick: u64,
    next_insert_index: u64,
}

impl ActionBuffer {
    pub fn new(dim: usize, capacity: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config(
                "proj-dim",
                "key dimension must be at least 1",
            ));
        }
        if capacity == 0 || capacity > UNLIMITED_CAPACITY {
            return Err(Error::config(
                "capacity",
                format!("must be in 1..={UNLIMITED_CAPACITY}, got {capacity}"),
            ));
        }
        Ok(ActionBuffer {
            dim,
            capacity,
            entries: Vec::new(),
            tick: 0,
            next_insert_index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in storage order (not insertion order once anything was evicted).
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// Nearest entry to `query` and its distance. Touches the returned entry.
    pub fn nearest(&mut self, query: &[f64]) -> Result<Option<(&Entry, f64)>> {
        self.check_dim(query)?;
        let Some((slot, d2)) = self.nearest_slot(query) else {
            return Ok(None);
        };
        let tick = self.next_tick();
        let entry = &mut self.entries[slot];
        entry.last_access = tick;
        Ok(Some((&*entry, d2.sqrt())))
    }

    /// Count-weighted kNN estimate of the value at `query`; `None` iff empty.
    pub fn knn_estimate(&mut self, query: &[f64], k: usize) -> Result<Option<f64>> {
        self.estimate(query, k, None)
    }

    /// Same as [`knn_estimate`](Self::knn_estimate), also reporting which entries were used.
    pub fn knn_estimate_traced(&mut self, query: &[f64], k: usize) -> Result<Option<KnnEstimate>> {
        let mut used = Vec::new();
        let value = self.estimate(query, k, Some(&mut used))?;
        Ok(value.map(|value| KnnEstimate {
            value,
            exact_match: used.len() == 1 && self.exact_slot(query).is_some(),
            used,
        }))
    }

    fn estimate(
        &mut self,
        query: &[f64],
        k: usize,
        mut trace: Option<&mut Vec<u64>>,
    ) -> Result<Option<f64>> {
        if k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        self.check_dim(query)?;
        if self.entries.is_empty() {
            return Ok(None);
        }

        // (squared distance, insert_index, slot) of the k closest entries, sorted.
        // Counts are >= 1, so the truncated prefix never needs more than k of them.
        let mut best: Vec<(f64, u64, usize)> = Vec::with_capacity(k + 1);
        let mut exact: Option<usize> = None;
        for (slot, entry) in self.entries.iter().enumerate() {
            if entry.key.bitwise_eq(query)
                && exact.is_none_or(|s| entry.insert_index < self.entries[s].insert_index)
            {
                exact = Some(slot);
            }
            if exact.is_some() {
                continue;
            }
            let d2 = squared_distance(entry.key.as_slice(), query);
            if best.len() == k
                && cmp_rank((d2, entry.insert_index), (best[k - 1].0, best[k - 1].1))
                    != Ordering::Less
            {
                continue;
            }
            let pos = best.partition_point(|b| {
                cmp_rank((b.0, b.1), (d2, entry.insert_index)) == Ordering::Less
            });
            best.insert(pos, (d2, entry.insert_index, slot));
            best.truncate(k);
        }

        let tick = self.next_tick();
        if let Some(slot) = exact {
            let entry = &mut self.entries[slot];
            entry.last_access = tick;
            if let Some(t) = trace.as_deref_mut() {
                t.push(entry.insert_index);
            }
            return Ok(Some(entry.q));
        }

        let mut weighted = 0.0;
        let mut total = 0u64;
        for &(_, insert_index, slot) in &best {
            let entry = &mut self.entries[slot];
            entry.last_access = tick;
            weighted += entry.q * entry.count as f64;
            total += entry.count;
            if let Some(t) = trace.as_deref_mut() {
                t.push(insert_index);
            }
            if total >= k as u64 {
                break;
            }
        }
        Ok(Some(weighted / total as f64))
    }

    /// Writes one experience back: exact match keeps the larger value, a close
    /// experience is merged as a running mean, anything else is inserted.
    ///
    /// Both thresholds are strict, so `eps_in = 0` never merges.
    pub fn writeback(
        &mut self,
        key: &StateKey,
        ret: f64,
        eps_in: f64,
        eps_out: f64,
    ) -> Result<WritebackOutcome> {
        self.check_dim(key.as_slice())?;
        if !ret.is_finite() {
            return Err(Error::input(format!("return {ret} is not finite")));
        }
        check_threshold("eps-in", eps_in)?;
        check_threshold("eps-out", eps_out)?;

        let nearest = self.nearest_slot(key.as_slice());
        let tick = self.next_tick();

        if let Some((slot, d2)) = nearest {
            let distance = d2.sqrt();
            let entry = &mut self.entries[slot];
            entry.last_access = tick;
            let old_q = entry.q;

            if entry.key.bitwise_eq(key.as_slice()) {
                entry.q = entry.q.max(ret);
                return Ok(WritebackOutcome {
                    branch: WritebackBranch::ExactMatch,
                    distance_to_nearest: Some(0.0),
                    nearest_q: Some(old_q),
                    q_delta: entry.q - old_q,
                    entry_index: entry.insert_index,
                    evicted: None,
                });
            }

            if distance < eps_in && (ret - old_q).abs() < eps_out {
                entry.count += 1;
                let eta = 1.0 / entry.count as f64;
                entry.q += eta * (ret - old_q);
                for (c, x) in entry.key.values_mut().iter_mut().zip(key.as_slice()) {
                    *c += eta * (x - *c);
                }
                return Ok(WritebackOutcome {
                    branch: WritebackBranch::Merged,
                    distance_to_nearest: Some(distance),
                    nearest_q: Some(old_q),
                    q_delta: entry.q - old_q,
                    entry_index: entry.insert_index,
                    evicted: None,
                });
            }

            let (entry_index, evicted) = self.push(key.clone(), ret, 1, tick);
            return Ok(WritebackOutcome {
                branch: if evicted.is_some() {
                    WritebackBranch::InsertedWithEviction
                } else {
                    WritebackBranch::Inserted
                },
                distance_to_nearest: Some(distance),
                nearest_q: Some(old_q),
                q_delta: ret,
                entry_index,
                evicted,
            });
        }

        let (entry_index, evicted) = self.push(key.clone(), ret, 1, tick);
        Ok(WritebackOutcome {
            branch: if evicted.is_some() {
                WritebackBranch::InsertedWithEviction
            } else {
                WritebackBranch::Inserted
            },
            distance_to_nearest: None,
            nearest_q: None,
            q_delta: ret,
            entry_index,
            evicted,
        })
    }

    /// Adds an entry that already stands for `count` experiences, bypassing the
    /// merge gate. Evicts like a normal insert when full. Returns its `insert_index`.
    pub fn insert_aggregate(&mut self, key: StateKey, q: f64, count: u64) -> Result<u64> {
        self.check_dim(key.as_slice())?;
        if !q.is_finite() {
            return Err(Error::input(format!("value {q} is not finite")));
        }
        if count == 0 {
            return Err(Error::input("aggregation count must be at least 1"));
        }
        let tick = self.next_tick();
        Ok(self.push(key, q, count, tick).0)
    }

    fn push(&mut self, key: StateKey, q: f64, count: u64, tick: u64) -> (u64, Option<Entry>) {
        let evicted = if self.entries.len() >= self.capacity {
            self.lru_slot().map(|slot| self.entries.swap_remove(slot))
        } else {
            None
        };
        let insert_index = self.next_insert_index;
        self.next_insert_index += 1;
        self.entries.push(Entry {
            key,
            q,
            count,
            last_access: tick,
            insert_index,
        });
        (insert_index, evicted)
    }

    fn lru_slot(&self) -> Option<usize> {
        self.entries
            .iter()
            .enumerate()
            .min_by_key(|(_, e)| (e.last_access, e.insert_index))
            .map(|(slot, _)| slot)
    }

    fn nearest_slot(&self, query: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (slot, entry) in self.entries.iter().enumerate() {
            let d2 = squared_distance(entry.key.as_slice(), query);
            let better = match best {
                None => true,
                Some((b, bd2)) => {
                    cmp_rank(
                        (d2, entry.insert_index),
                        (bd2, self.entries[b].insert_index),
                    ) == Ordering::Less
                }
            };
            if better {
                best = Some((slot, d2));
            }
        }
        best
    }

    fn exact_slot(&self, query: &[f64]) -> Option<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.key.bitwise_eq(query))
            .min_by_key(|(_, e)| e.insert_index)
            .map(|(slot, _)| slot)
    }

    fn next_tick(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    fn check_dim(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::input(format!(
                "key has dimension {}, buffer expects {}",
                query.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn check_threshold(key: &str, value: f64) -> Result<()> {
    if value.is_nan() || value < 0.0 {
        return Err(Error::config(
            key,
            format!("must be non-negative, got {value}"),
        ));
    }
    Ok(())
}

fn cmp_rank(a: (f64, u64), b: (f64, u64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Squared Euclidean distance with four independent accumulators so the loop
/// vectorises; the summation order is fixed, so results are reproducible.
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for i in 0..4 {
            let d = ca[i] - cb[i];
            acc[i] += d * d;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// The agent's whole memory: one [`ActionBuffer`] per action, sharing key
/// dimension and capacity.
#[derive(Clone, Debug, PartialEq)]
pub struct QecStore {
    buffers: Vec<ActionBuffer>,
}

const MAGIC: &[u8; 4] = b"EPCB";
const VERSION: u32 = 1;

impl QecStore {
    pub fn new(num_actions: usize, dim: usize, capacity: usize) -> Result<Self> {
        if num_actions == 0 || num_actions > u32::MAX as usize {
            return Err(Error::config("num_actions", "must be in 1..=2^32-1"));
        }
        if dim > u32::MAX as usize {
            return Err(Error::config("proj-dim", "must fit in 32 bits"));
        }
        let buffer = ActionBuffer::new(dim, capacity)?;
        Ok(QecStore {
            buffers: vec![buffer; num_actions],
        })
    }

    pub fn num_actions(&self) -> usize {
        self.buffers.len()
    }

    pub fn dim(&self) -> usize {
        self.buffers[0].dim
    }

    pub fn capacity(&self) -> usize {
        self.buffers[0].capacity
    }

    pub fn buffers(&self) -> &[ActionBuffer] {
        &self.buffers
    }

    pub fn buffer(&self, action: usize) -> Result<&ActionBuffer> {
        let n = self.buffers.len();
        self.buffers
            .get(action)
            .ok_or_else(|| Error::input(format!("action {action} out of range 0..{n}")))
    }

    pub fn buffer_mut(&mut self, action: usize) -> Result<&mut ActionBuffer> {
        let n = self.buffers.len();
        self.buffers
            .get_mut(action)
            .ok_or_else(|| Error::input(format!("action {action} out of range 0..{n}")))
    }

    /// Number of stored entries over all buffers (not the sum of aggregation counts).
    pub fn total_size(&self) -> usize {
        self.buffers.iter().map(ActionBuffer::len).sum()
    }

    pub fn buffer_sizes(&self) -> Vec<usize> {
        self.buffers.iter().map(ActionBuffer::len).collect()
    }

    /// Serialises the store.
    ///
    /// Layout, all little-endian: `"EPCB"`, `u32` version (1), `u32`
    /// num_actions, `u32` key dim, `u32` capacity; then for each buffer a `u64`
    /// entry count followed by the entries in storage order, each as `dim`
    /// `f64` key values, `f64` q, `u64` count, `u64` insert_index, `u64`
    /// last_access.
    pub fn snapshot(&self) -> Vec<u8> {
        let dim = self.dim();
        let entry_bytes = 8 * (dim + 4);
        let mut out =
            Vec::with_capacity(20 + self.buffers.len() * 8 + self.total_size() * entry_bytes);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.buffers.len() as u32).to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.capacity() as u32).to_le_bytes());
        for buffer in &self.buffers {
            out.extend_from_slice(&(buffer.entries.len() as u64).to_le_bytes());
            for e in &buffer.entries {
                for v in e.key.as_slice() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&e.q.to_le_bytes());
                out.extend_from_slice(&e.count.to_le_bytes());
                out.extend_from_slice(&e.insert_index.to_le_bytes());
                out.extend_from_slice(&e.last_access.to_le_bytes());
            }
        }
        out
    }

    /// Inverse of [`snapshot`](Self::snapshot). Tick and insertion counters are
    /// recovered from the entries: the newest stamp and the newest insertion
    /// always belong to an entry that is still stored.
    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::format_at_offset(
                0,
                format!("bad magic {magic:?}, expected \"EPCB\""),
            ));
        }
        let version_at = r.pos;
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::format_at_offset(
                version_at,
                format!("unsupported version {version}, expected {VERSION}"),
            ));
        }
        let header_at = r.pos;
        let num_actions = r.u32("num_actions")? as usize;
        let dim = r.u32("key dim")? as usize;
        let capacity = r.u32("capacity")? as usize;
        if num_actions == 0 || dim == 0 || capacity == 0 {
            return Err(Error::format_at_offset(
                header_at,
                "num_actions, key dim and capacity must all be non-zero",
            ));
        }

        let entry_bytes = 8 * (dim + 4);
        let mut buffers = Vec::with_capacity(num_actions.min(1 << 16));
        for action in 0..num_actions {
            let count_at = r.pos;
            let n = r.u64("entry count")?;
            if n > capacity as u64 {
                return Err(Error::format_at_offset(
                    count_at,
                    format!("buffer {action} holds {n} entries, capacity is {capacity}"),
                ));
            }
            let n = n as usize;
            if r.remaining() / entry_bytes < n {
                return Err(Error::format_at_offset(
                    r.bytes.len(),
                    format!("truncated: buffer {action} declares {n} entries"),
                ));
            }
            let mut buffer = ActionBuffer {
                dim,
                capacity,
                entries: Vec::with_capacity(n),
                tick: 0,
                next_insert_index: 0,
            };
            for _ in 0..n {
                let entry_at = r.pos;
                let mut key = Vec::with_capacity(dim);
                for _ in 0..dim {
                    key.push(r.f64("key value")?);
                }
                let key = StateKey::new(key)
                    .map_err(|_| Error::format_at_offset(entry_at, "non-finite key value"))?;
                let q_at = r.pos;
                let q = r.f64("q")?;
                if !q.is_finite() {
                    return Err(Error::format_at_offset(q_at, "non-finite q"));
                }
                let count_at = r.pos;
                let count = r.u64("count")?;
                if count == 0 {
                    return Err(Error::format_at_offset(
                        count_at,
                        "aggregation count is zero",
                    ));
                }
                let index_at = r.pos;
                let insert_index = r.u64("insert_index")?;
                if buffer
                    .entries
                    .iter()
                    .any(|e| e.insert_index == insert_index)
                {
                    return Err(Error::format_at_offset(
                        index_at,
                        format!("duplicate insert_index {insert_index} in buffer {action}"),
                    ));
                }
                let last_access = r.u64("last_access")?;
                buffer.tick = buffer.tick.max(last_access);
                buffer.next_insert_index = buffer.next_insert_index.max(insert_index + 1);
                buffer.entries.push(Entry {
                    key,
                    q,
                    count,
                    last_access,
                    insert_index,
                });
            }
            buffers.push(buffer);
        }
        if r.remaining() != 0 {
            return Err(Error::format_at_offset(
                r.pos,
                format!("{} trailing bytes after last buffer", r.remaining()),
            ));
        }
        Ok(QecStore { buffers })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format_at_offset(
                self.pos,
                format!(
                    "truncated while reading {what}: need {n} bytes, have {}",
                    self.remaining()
                ),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}
