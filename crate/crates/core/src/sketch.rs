//! SpaceSaving heavy-hitter sketch over a Stream-Summary structure.
//!
//! Counters live in buckets of equal count; buckets form a doubly linked
//! list in ascending count order, so incrementing a counter moves it to the
//! neighbouring bucket in O(1) and the structure is always sorted. Within a
//! bucket counters are kept in the order they entered it, which makes the
//! bucket head the least recently updated counter. That head of the minimum
//! bucket is the eviction victim.

use std::collections::HashMap;
use std::hash::Hash;

const NIL: usize = usize::MAX;

#[derive(Clone, Debug)]
struct Counter<T> {
    item: T,
    count: u64,
    error: u64,
    /// Insertion sequence number; orders ties in `top`.
    inserted: u64,
    bucket: usize,
    prev: usize,
    next: usize,
}

#[derive(Clone, Debug)]
struct Bucket {
    count: u64,
    head: usize,
    tail: usize,
    len: usize,
    lower: usize,
    higher: usize,
}

/// One monitored item as reported by [`SpaceSaving::top`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry<T> {
    pub item: T,
    pub count: u64,
    pub error: u64,
}

#[derive(Clone, Debug)]
pub struct SpaceSaving<T> {
    capacity: usize,
    index: HashMap<T, usize>,
    counters: Vec<Counter<T>>,
    buckets: Vec<Bucket>,
    free_buckets: Vec<usize>,
    min_bucket: usize,
    max_bucket: usize,
    stream_len: u64,
    next_insertion: u64,
}

impl<T: Eq + Hash + Clone> SpaceSaving<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "sketch capacity must be positive");
        Self {
            capacity,
            index: HashMap::with_capacity(capacity),
            counters: Vec::with_capacity(capacity),
            // Live buckets never outnumber counters, plus one while a
            // counter moves between them.
            buckets: Vec::with_capacity(capacity + 1),
            free_buckets: Vec::with_capacity(capacity + 1),
            min_bucket: NIL,
            max_bucket: NIL,
            stream_len: 0,
            next_insertion: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }

    /// Number of offers so far.
    pub fn stream_len(&self) -> u64 {
        self.stream_len
    }

    /// Smallest monitored count, 0 when nothing is monitored. Any item that
    /// is not monitored has a true frequency of at most this value.
    pub fn min_count(&self) -> u64 {
        if self.min_bucket == NIL {
            0
        } else {
            self.buckets[self.min_bucket].count
        }
    }

    pub fn offer(&mut self, item: T) {
        self.stream_len += 1;
        if let Some(&slot) = self.index.get(&item) {
            self.increment(slot);
            return;
        }
        let inserted = self.next_insertion;
        self.next_insertion += 1;
        if self.counters.len() < self.capacity {
            let slot = self.counters.len();
            self.counters.push(Counter {
                item: item.clone(),
                count: 0,
                error: 0,
                inserted,
                bucket: NIL,
                prev: NIL,
                next: NIL,
            });
            self.index.insert(item, slot);
            self.place_new(slot);
        } else {
            let slot = self.buckets[self.min_bucket].head;
            let victim = &mut self.counters[slot];
            let old = std::mem::replace(&mut victim.item, item.clone());
            victim.error = victim.count;
            victim.inserted = inserted;
            self.index.remove(&old);
            self.index.insert(item, slot);
            self.increment(slot);
        }
    }

    pub fn estimate(&self, item: &T) -> Option<(u64, u64)> {
        self.index.get(item).map(|&s| (self.counters[s].count, self.counters[s].error))
    }

    /// The `j` highest counters in non-increasing count order, ties broken
    /// by earliest insertion.
    pub fn top(&self, j: usize) -> Vec<Entry<T>> {
        let mut out = Vec::with_capacity(j.min(self.counters.len()));
        let mut b = self.max_bucket;
        while b != NIL && out.len() < j {
            let mut members = self.bucket_members(b);
            members.sort_by_key(|&s| self.counters[s].inserted);
            for s in members.into_iter().take(j - out.len()) {
                let c = &self.counters[s];
                out.push(Entry {
                    item: c.item.clone(),
                    count: c.count,
                    error: c.error,
                });
            }
            b = self.buckets[b].lower;
        }
        out
    }

    /// Membership test for `top(j)` without materialising it.
    pub fn top_filter(&self, j: usize) -> TopFilter {
        if j == 0 {
            return TopFilter { cutoff: Some(Cutoff::Nothing) };
        }
        if j >= self.counters.len() {
            return TopFilter { cutoff: None };
        }
        let mut taken = 0;
        let mut b = self.max_bucket;
        while b != NIL {
            let len = self.buckets[b].len;
            if taken + len >= j {
                let mut ins: Vec<u64> = self.bucket_members(b).iter().map(|&s| self.counters[s].inserted).collect();
                let k = j - taken - 1;
                let (_, nth, _) = ins.select_nth_unstable(k);
                return TopFilter {
                    cutoff: Some(Cutoff::At(self.buckets[b].count, *nth)),
                };
            }
            taken += len;
            b = self.buckets[b].lower;
        }
        TopFilter { cutoff: None }
    }

    pub fn in_top(&self, item: &T, filter: &TopFilter) -> bool {
        match self.index.get(item) {
            None => false,
            Some(&s) => filter.admits(self.counters[s].count, self.counters[s].inserted),
        }
    }

    /// All monitored items in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = Entry<&T>> {
        self.counters.iter().map(|c| Entry {
            item: &c.item,
            count: c.count,
            error: c.error,
        })
    }

    /// Approximate heap footprint in bytes. Storage is reserved for
    /// `capacity` counters up front, so this never depends on the stream.
    pub fn state_bytes(&self) -> usize {
        self.counters.capacity() * (std::mem::size_of::<Counter<T>>() + std::mem::size_of::<(T, usize)>())
            + self.buckets.capacity() * std::mem::size_of::<Bucket>()
            + self.free_buckets.capacity() * std::mem::size_of::<usize>()
    }

    fn bucket_members(&self, b: usize) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.buckets[b].len);
        let mut s = self.buckets[b].head;
        while s != NIL {
            v.push(s);
            s = self.counters[s].next;
        }
        v
    }

    fn alloc_bucket(&mut self, count: u64, lower: usize, higher: usize) -> usize {
        let bucket = Bucket {
            count,
            head: NIL,
            tail: NIL,
            len: 0,
            lower,
            higher,
        };
        let id = if let Some(id) = self.free_buckets.pop() {
            self.buckets[id] = bucket;
            id
        } else {
            self.buckets.push(bucket);
            self.buckets.len() - 1
        };
        if lower == NIL {
            self.min_bucket = id;
        } else {
            self.buckets[lower].higher = id;
        }
        if higher == NIL {
            self.max_bucket = id;
        } else {
            self.buckets[higher].lower = id;
        }
        id
    }

    fn free_bucket(&mut self, b: usize) {
        let (lower, higher) = (self.buckets[b].lower, self.buckets[b].higher);
        if lower == NIL {
            self.min_bucket = higher;
        } else {
            self.buckets[lower].higher = higher;
        }
        if higher == NIL {
            self.max_bucket = lower;
        } else {
            self.buckets[higher].lower = lower;
        }
        self.free_buckets.push(b);
    }

    fn attach(&mut self, slot: usize, b: usize) {
        let tail = self.buckets[b].tail;
        {
            let c = &mut self.counters[slot];
            c.bucket = b;
            c.prev = tail;
            c.next = NIL;
        }
        if tail == NIL {
            self.buckets[b].head = slot;
        } else {
            self.counters[tail].next = slot;
        }
        self.buckets[b].tail = slot;
        self.buckets[b].len += 1;
    }

    fn detach(&mut self, slot: usize) {
        let (b, prev, next) = {
            let c = &self.counters[slot];
            (c.bucket, c.prev, c.next)
        };
        if prev == NIL {
            self.buckets[b].head = next;
        } else {
            self.counters[prev].next = next;
        }
        if next == NIL {
            self.buckets[b].tail = prev;
        } else {
            self.counters[next].prev = prev;
        }
        self.buckets[b].len -= 1;
    }

    fn place_new(&mut self, slot: usize) {
        self.counters[slot].count = 1;
        let b = if self.min_bucket != NIL && self.buckets[self.min_bucket].count == 1 {
            self.min_bucket
        } else {
            let higher = self.min_bucket;
            self.alloc_bucket(1, NIL, higher)
        };
        self.attach(slot, b);
    }

    fn increment(&mut self, slot: usize) {
        let b = self.counters[slot].bucket;
        let target = self.counters[slot].count + 1;
        let higher = self.buckets[b].higher;
        let nb = if higher != NIL && self.buckets[higher].count == target {
            higher
        } else {
            self.alloc_bucket(target, b, higher)
        };
        self.detach(slot);
        if self.buckets[b].len == 0 {
            self.free_bucket(b);
        }
        self.counters[slot].count = target;
        self.attach(slot, nb);
    }

    #[cfg(test)]
    fn check_structure(&self) {
        let mut b = self.min_bucket;
        let mut prev_count = 0;
        let mut seen = 0;
        let mut lower = NIL;
        while b != NIL {
            let bucket = &self.buckets[b];
            assert!(bucket.count > prev_count);
            assert_eq!(bucket.lower, lower);
            assert!(bucket.len > 0);
            let members = self.bucket_members(b);
            assert_eq!(members.len(), bucket.len);
            for s in members {
                assert_eq!(self.counters[s].bucket, b);
                assert_eq!(self.counters[s].count, bucket.count);
            }
            seen += bucket.len;
            prev_count = bucket.count;
            lower = b;
            b = bucket.higher;
        }
        assert_eq!(lower, self.max_bucket);
        assert_eq!(seen, self.counters.len());
        assert_eq!(self.index.len(), self.counters.len());
    }
}

/// Precomputed cut-off for `top(j)` membership; see [`SpaceSaving::top_filter`].
#[derive(Clone, Copy, Debug)]
pub struct TopFilter {
    /// `None` admits every counter.
    cutoff: Option<Cutoff>,
}

#[derive(Clone, Copy, Debug)]
enum Cutoff {
    Nothing,
    /// `(count, inserted)` of the j-th entry.
    At(u64, u64),
}

impl TopFilter {
    fn admits(&self, count: u64, inserted: u64) -> bool {
        match self.cutoff {
            None => true,
            Some(Cutoff::Nothing) => false,
            Some(Cutoff::At(c, ins)) => count > c || (count == c && inserted <= ins),
        }
    }
}

/// Renders entries as `item,count,error` lines.
pub fn export_entries<T: std::fmt::Display>(entries: &[Entry<T>]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{},{},{}\n", e.item, e.count, e.error));
    }
    out
}
