//! Stream groupings and the routing function shared by both run modes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::EngineError;

/// How a stream distributes its events over the runtime instances of the
/// destination processing item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    /// Round-robin, one destination per event.
    Shuffle,
    /// Broadcast to every destination instance.
    All,
    /// Hash of the event's routing key. `field` names what the emitter
    /// stores in the key (for docs and topology dumps).
    Key { field: String },
}

impl Grouping {
    pub fn key(field: impl Into<String>) -> Self {
        Grouping::Key { field: field.into() }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grouping::Shuffle => f.write_str("shuffle"),
            Grouping::All => f.write_str("all"),
            Grouping::Key { field } => write!(f, "key:{field}"),
        }
    }
}

/// FNV-1a, 64 bit. Stable across runs, platforms and toolchains, unlike
/// `std::collections::hash_map::DefaultHasher`.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Index of the key-grouped destination for `key` among `parallelism`
/// instances.
pub fn key_index(key: &[u8], parallelism: usize) -> usize {
    (stable_hash(key) % parallelism as u64) as usize
}

/// Destination instance indices for one event.
///
/// `cursor` is the round-robin position of the emitting (instance, stream)
/// pair; it is advanced only for shuffle grouping.
pub fn route(
    key: Option<&[u8]>,
    grouping: &Grouping,
    parallelism: usize,
    cursor: &mut usize,
) -> Result<Destinations, EngineError> {
    assert!(parallelism >= 1, "parallelism must be at least 1");
    match grouping {
        Grouping::Shuffle => {
            let idx = *cursor % parallelism;
            *cursor = (idx + 1) % parallelism;
            Ok(Destinations::One(idx))
        }
        Grouping::All => Ok(Destinations::All(parallelism)),
        Grouping::Key { field } => match key {
            Some(k) => Ok(Destinations::One(key_index(k, parallelism))),
            None => Err(EngineError::MissingKey { field: field.clone() }),
        },
    }
}

/// Result of [`route`]: a single index or every index below the bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Destinations {
    One(usize),
    All(usize),
}

impl Destinations {
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let (lo, hi) = match self {
            Destinations::One(i) => (i, i + 1),
            Destinations::All(p) => (0, p),
        };
        lo..hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffle_cycles_round_robin() {
        let mut cursor = 0;
        let got: Vec<usize> = (0..6)
            .map(|_| match route(None, &Grouping::Shuffle, 3, &mut cursor).unwrap() {
                Destinations::One(i) => i,
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        assert_eq!(got, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn all_grouping_broadcasts() {
        let mut cursor = 0;
        let d = route(None, &Grouping::All, 3, &mut cursor).unwrap();
        assert_eq!(d.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(cursor, 0);
    }

    #[test]
    fn key_grouping_is_stable() {
        let g = Grouping::key("attribute");
        let mut cursor = 0;
        let a = route(Some(b"token"), &g, 4, &mut cursor).unwrap();
        let b = route(Some(b"token"), &g, 4, &mut cursor).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, Destinations::One(key_index(b"token", 4)));
    }

    #[test]
    fn key_grouping_requires_key() {
        let mut cursor = 0;
        let err = route(None, &Grouping::key("attribute"), 2, &mut cursor).unwrap_err();
        assert!(matches!(err, EngineError::MissingKey { .. }));
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(stable_hash(b""), 0xcbf29ce484222325);
        assert_eq!(stable_hash(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(stable_hash(b"foobar"), 0x85944171f73967e8);
    }
}
