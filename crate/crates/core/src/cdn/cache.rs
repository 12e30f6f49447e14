use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NIL: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    key: u64,
    bytes: u64,
    prev: usize,
    next: usize,
}

/// Byte-capacity LRU with O(1) lookup, promotion and eviction.
#[derive(Debug, Clone)]
pub struct LruCache {
    capacity: u64,
    used: u64,
    map: HashMap<u64, usize>,
    nodes: Vec<Node>,
    free: Vec<usize>,
    head: usize,
    tail: usize,
}

impl LruCache {
    pub fn new(capacity_bytes: u64) -> Self {
        Self {
            capacity: capacity_bytes,
            used: 0,
            map: HashMap::new(),
            nodes: Vec::new(),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, key: u64) -> bool {
        self.map.contains_key(&key)
    }

    fn unlink(&mut self, i: usize) {
        let (p, n) = (self.nodes[i].prev, self.nodes[i].next);
        if p == NIL {
            self.head = n;
        } else {
            self.nodes[p].next = n;
        }
        if n == NIL {
            self.tail = p;
        } else {
            self.nodes[n].prev = p;
        }
    }

    fn push_front(&mut self, i: usize) {
        self.nodes[i].prev = NIL;
        self.nodes[i].next = self.head;
        if self.head != NIL {
            self.nodes[self.head].prev = i;
        }
        self.head = i;
        if self.tail == NIL {
            self.tail = i;
        }
    }

    fn evict_lru(&mut self) -> Option<u64> {
        let i = self.tail;
        if i == NIL {
            return None;
        }
        self.unlink(i);
        let key = self.nodes[i].key;
        self.used -= self.nodes[i].bytes;
        self.map.remove(&key);
        self.free.push(i);
        Some(key)
    }

    /// Looks `key` up, promoting it on a hit.
    pub fn get(&mut self, key: u64) -> bool {
        match self.map.get(&key) {
            Some(&i) => {
                self.unlink(i);
                self.push_front(i);
                true
            }
            None => false,
        }
    }

    /// Inserts (or refreshes) an object, evicting from the cold end until it
    /// fits. Objects larger than the whole cache are not stored.
    pub fn insert(&mut self, key: u64, bytes: u64) -> bool {
        if bytes > self.capacity {
            return false;
        }
        if let Some(&i) = self.map.get(&key) {
            self.unlink(i);
            self.used -= self.nodes[i].bytes;
            self.free.push(i);
            self.map.remove(&key);
        }
        while self.used + bytes > self.capacity {
            self.evict_lru();
        }
        let node = Node { key, bytes, prev: NIL, next: NIL };
        let i = match self.free.pop() {
            Some(i) => {
                self.nodes[i] = node;
                i
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        };
        self.push_front(i);
        self.map.insert(key, i);
        self.used += bytes;
        true
    }

    /// Keys from most to least recently used.
    pub fn keys_mru(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.map.len());
        let mut i = self.head;
        while i != NIL {
            out.push(self.nodes[i].key);
            i = self.nodes[i].next;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRequest {
    pub slot: u32,
    pub file: u64,
    pub bytes: u64,
    pub vendor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheReport {
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub hit_rate: f64,
    pub per_vendor_hits: Vec<u64>,
    pub per_vendor_requests: Vec<u64>,
    /// Back-to-source bytes per vendor per slot.
    pub bts_bytes: Vec<Vec<u64>>,
    /// Requests for objects that can never fit their vendor's cache.
    pub oversized_requests: u64,
}

impl CacheReport {
    pub fn total_bts_bytes(&self) -> u64 {
        self.bts_bytes.iter().flatten().sum()
    }
}

/// Replays requests through one LRU per vendor. A hit costs nothing
/// upstream; a miss pulls the object from origin and caches it.
pub fn simulate_edge_cache(requests: &[EdgeRequest], capacities: &[u64]) -> Result<CacheReport> {
    simulate_edge_cache_warm(requests, capacities, &[])
}

/// Same as [`simulate_edge_cache`] with objects pushed ahead of time:
/// `(vendor, file, bytes)` in push order.
pub fn simulate_edge_cache_warm(
    requests: &[EdgeRequest],
    capacities: &[u64],
    prewarm: &[(usize, u64, u64)],
) -> Result<CacheReport> {
    if capacities.is_empty() || capacities.contains(&0) {
        return Err(Error::param("every vendor cache needs capacity > 0"));
    }
    let n = capacities.len();
    let mut caches: Vec<LruCache> = capacities.iter().map(|c| LruCache::new(*c)).collect();
    for &(v, file, bytes) in prewarm {
        let cache = caches
            .get_mut(v)
            .ok_or_else(|| Error::input(format!("prewarm vendor {v} out of range")))?;
        cache.insert(file, bytes);
    }
    let slots = requests.iter().map(|r| r.slot as usize + 1).max().unwrap_or(0);
    let mut report = CacheReport {
        requests: 0,
        hits: 0,
        misses: 0,
        hit_rate: 0.0,
        per_vendor_hits: vec![0; n],
        per_vendor_requests: vec![0; n],
        bts_bytes: vec![vec![0; slots]; n],
        oversized_requests: 0,
    };
    for r in requests {
        let cache = caches
            .get_mut(r.vendor)
            .ok_or_else(|| Error::input(format!("request vendor {} out of range", r.vendor)))?;
        report.requests += 1;
        report.per_vendor_requests[r.vendor] += 1;
        if cache.get(r.file) {
            report.hits += 1;
            report.per_vendor_hits[r.vendor] += 1;
        } else {
            report.misses += 1;
            report.bts_bytes[r.vendor][r.slot as usize] += r.bytes;
            if !cache.insert(r.file, r.bytes) {
                report.oversized_requests += 1;
            }
        }
    }
    if report.oversized_requests > 0 {
        log::warn!("{} requests for objects larger than their cache", report.oversized_requests);
    }
    report.hit_rate = if report.requests == 0 {
        0.0
    } else {
        report.hits as f64 / report.requests as f64
    };
    Ok(report)
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashScheduleConfig {
    /// Fraction of the catalog, least popular first, treated as cold.
    pub cold_fraction: f64,
    /// Vendors in the cold subset.
    pub subset_size: usize,
    /// Salt mixed into the hash; changing it reshuffles cold files.
    #[serde(default)]
    pub salt: u64,
}

/// Maps each file to `Some(vendor)` when it is cold (hashed onto the first
/// `subset_size` vendors) or `None` when it stays with request scheduling.
/// `files` holds `(file id, popularity)`.
pub fn hash_schedule(
    files: &[(u64, f64)],
    n_vendors: usize,
    cfg: &HashScheduleConfig,
) -> Result<Vec<Option<usize>>> {
    if cfg.subset_size == 0 || cfg.subset_size > n_vendors {
        return Err(Error::param(format!(
            "subset size {} must be in 1..={n_vendors}",
            cfg.subset_size
        )));
    }
    if !(0.0..=1.0).contains(&cfg.cold_fraction) {
        return Err(Error::param("cold_fraction must be in [0,1]"));
    }
    let n_cold = (cfg.cold_fraction * files.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..files.len()).collect();
    order.sort_by(|&a, &b| {
        files[a]
            .1
            .total_cmp(&files[b].1)
            .then(files[a].0.cmp(&files[b].0))
    });
    let mut out = vec![None; files.len()];
    for &i in &order[..n_cold] {
        let mut key = files[i].0.to_le_bytes().to_vec();
        key.extend_from_slice(&cfg.salt.to_le_bytes());
        out[i] = Some((stable_hash(&key) % cfg.subset_size as u64) as usize);
    }
    Ok(out)
}
