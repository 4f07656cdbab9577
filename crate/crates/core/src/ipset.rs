//! Exact IPv4 set arithmetic over disjoint address intervals.
//!
//! Sets are kept canonical at all times: intervals are sorted, disjoint and
//! non-adjacent, so equal sets compare equal regardless of insertion order
//! and cardinality is an exact sum, never a sample.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An IPv4 CIDR block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cidr4 {
    pub addr: Ipv4Addr,
    pub prefix: u8,
}

impl Cidr4 {
    pub fn new(addr: Ipv4Addr, prefix: u8) -> Self {
        debug_assert!(prefix <= 32);
        Cidr4 { addr, prefix }
    }

    /// First and last address covered, as integers.
    pub fn bounds(&self) -> (u32, u32) {
        let base = u32::from(self.addr);
        if self.prefix == 0 {
            return (0, u32::MAX);
        }
        let mask = u32::MAX << (32 - self.prefix);
        let start = base & mask;
        (start, start | !mask)
    }

    pub fn address_count(&self) -> u64 {
        1u64 << (32 - self.prefix)
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        let (start, end) = self.bounds();
        let v = u32::from(ip);
        v >= start && v <= end
    }
}

impl fmt::Display for Cidr4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.prefix)
    }
}

impl FromStr for Cidr4 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, prefix) = match s.split_once('/') {
            Some((a, p)) => (
                a.parse::<Ipv4Addr>().map_err(|e| e.to_string())?,
                p.parse::<u8>().map_err(|e| e.to_string())?,
            ),
            None => (s.parse::<Ipv4Addr>().map_err(|e| e.to_string())?, 32),
        };
        if prefix > 32 {
            return Err(format!("prefix /{prefix} out of range"));
        }
        Ok(Cidr4 { addr, prefix })
    }
}

impl Serialize for Cidr4 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cidr4 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A canonical set of IPv4 addresses stored as inclusive intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IpSet {
    // Sorted, disjoint, non-adjacent (start, end) pairs, end inclusive.
    ranges: Vec<(u32, u32)>,
}

impl IpSet {
    pub fn new() -> Self {
        IpSet::default()
    }

    pub fn full() -> Self {
        IpSet {
            ranges: vec![(0, u32::MAX)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn insert_cidr(&mut self, cidr: Cidr4) {
        let (start, end) = cidr.bounds();
        self.insert_range(start, end);
    }

    /// Inserts an inclusive address range, merging any overlapping or
    /// adjacent intervals so the set stays canonical.
    pub fn insert_range(&mut self, start: u32, end: u32) {
        debug_assert!(start <= end);
        // First interval that could merge with [start, end]: any interval
        // whose end is >= start-1 (adjacency included).
        let lo = self
            .ranges
            .partition_point(|&(_, e)| start > 0 && e < start - 1);
        // Intervals beyond `hi` start after end+1 and cannot merge.
        let hi = self
            .ranges
            .partition_point(|&(s, _)| s <= end || (end < u32::MAX && s == end + 1));

        if lo == hi {
            self.ranges.insert(lo, (start, end));
            return;
        }
        let merged = (start.min(self.ranges[lo].0), end.max(self.ranges[hi - 1].1));
        self.ranges.splice(lo..hi, [merged]);
    }

    pub fn union_with(&mut self, other: &IpSet) {
        for &(s, e) in &other.ranges {
            self.insert_range(s, e);
        }
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        let v = u32::from(ip);
        let idx = self.ranges.partition_point(|&(s, _)| s <= v);
        idx > 0 && self.ranges[idx - 1].1 >= v
    }

    /// Exact cardinality. The full space is 2^32, so the result is u64.
    pub fn count(&self) -> u64 {
        self.ranges
            .iter()
            .map(|&(s, e)| u64::from(e) - u64::from(s) + 1)
            .sum()
    }

    pub fn ranges(&self) -> impl Iterator<Item = (Ipv4Addr, Ipv4Addr)> + '_ {
        self.ranges
            .iter()
            .map(|&(s, e)| (Ipv4Addr::from(s), Ipv4Addr::from(e)))
    }

    /// Minimal CIDR decomposition of the set.
    pub fn to_cidrs(&self) -> Vec<Cidr4> {
        let mut out = Vec::new();
        for &(start, end) in &self.ranges {
            let mut cur = u64::from(start);
            let end = u64::from(end);
            while cur <= end {
                // Largest aligned block starting at cur that fits.
                let align = if cur == 0 { 33 } else { cur.trailing_zeros() };
                let mut size = 1u64 << align.min(32);
                while cur + size - 1 > end {
                    size >>= 1;
                }
                let prefix = 32 - size.trailing_zeros() as u8;
                out.push(Cidr4::new(Ipv4Addr::from(cur as u32), prefix));
                cur += size;
            }
        }
        out
    }
}

impl FromIterator<Cidr4> for IpSet {
    fn from_iter<T: IntoIterator<Item = Cidr4>>(iter: T) -> Self {
        let mut set = IpSet::new();
        for cidr in iter {
            set.insert_cidr(cidr);
        }
        set
    }
}

impl Serialize for IpSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.to_cidrs().iter().map(ToString::to_string))
    }
}

impl<'de> Deserialize<'de> for IpSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let cidrs = Vec::<String>::deserialize(deserializer)?;
        let mut set = IpSet::new();
        for s in cidrs {
            set.insert_cidr(s.parse().map_err(serde::de::Error::custom)?);
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cidr(s: &str) -> Cidr4 {
        s.parse().unwrap()
    }

    #[test]
    fn empty_set_counts_zero() {
        assert_eq!(IpSet::new().count(), 0);
    }

    #[test]
    fn full_space() {
        let mut set = IpSet::new();
        set.insert_cidr(cidr("0.0.0.0/0"));
        assert_eq!(set.count(), 4_294_967_296);
        assert_eq!(set, IpSet::full());
    }

    #[test]
    fn single_slash28_counts_sixteen() {
        let mut set = IpSet::new();
        set.insert_cidr(cidr("192.0.2.0/28"));
        assert_eq!(set.count(), 16);
    }

    #[test]
    fn adjacent_halves_merge_to_slash24() {
        let mut set = IpSet::new();
        set.insert_cidr(cidr("192.0.2.0/25"));
        set.insert_cidr(cidr("192.0.2.128/25"));
        assert_eq!(set.count(), 256);
        assert_eq!(set.to_cidrs(), vec![cidr("192.0.2.0/24")]);
    }

    #[test]
    fn overlap_deduplicates() {
        let mut set = IpSet::new();
        set.insert_cidr(cidr("10.0.0.0/24"));
        set.insert_cidr(cidr("10.0.0.0/25"));
        assert_eq!(set.count(), 256);
    }

    #[test]
    fn disjoint_slash30s() {
        let mut set = IpSet::new();
        set.insert_cidr(cidr("198.51.100.0/30"));
        set.insert_cidr(cidr("198.51.100.8/30"));
        assert_eq!(set.count(), 8);
        assert_eq!(set.to_cidrs().len(), 2);
    }

    #[test]
    fn host_bits_are_masked() {
        let mut set = IpSet::new();
        set.insert_cidr(cidr("192.0.2.77/24"));
        assert!(set.contains("192.0.2.0".parse().unwrap()));
        assert!(set.contains("192.0.2.255".parse().unwrap()));
        assert!(!set.contains("192.0.3.0".parse().unwrap()));
        assert_eq!(set.count(), 256);
    }

    #[test]
    fn membership_at_boundaries() {
        let mut set = IpSet::new();
        set.insert_cidr(cidr("255.255.255.255/32"));
        set.insert_cidr(cidr("0.0.0.0/32"));
        assert!(set.contains(Ipv4Addr::new(0, 0, 0, 0)));
        assert!(set.contains(Ipv4Addr::new(255, 255, 255, 255)));
        assert_eq!(set.count(), 2);
    }

    #[test]
    fn cidr_roundtrip_text() {
        let c = cidr("203.0.113.64/26");
        assert_eq!(c.to_string(), "203.0.113.64/26");
        assert_eq!(c.address_count(), 64);
    }

    fn arb_cidr() -> impl Strategy<Value = Cidr4> {
        (any::<u32>(), 0u8..=32).prop_map(|(addr, prefix)| Cidr4::new(Ipv4Addr::from(addr), prefix))
    }

    proptest! {
        #[test]
        fn insertion_order_is_irrelevant(cidrs in prop::collection::vec(arb_cidr(), 0..20), seed in any::<u64>()) {
            let forward: IpSet = cidrs.iter().copied().collect();
            let mut shuffled = cidrs.clone();
            // Deterministic Fisher-Yates driven by the seed.
            let mut state = seed | 1;
            for i in (1..shuffled.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            let backward: IpSet = shuffled.into_iter().collect();
            prop_assert_eq!(&forward, &backward);
        }

        #[test]
        fn count_matches_enumeration_for_small_prefixes(cidrs in prop::collection::vec((any::<u32>(), 24u8..=32), 0..8)) {
            use std::collections::HashSet;
            let cidrs: Vec<Cidr4> = cidrs.into_iter()
                .map(|(a, p)| Cidr4::new(Ipv4Addr::from(a), p))
                .collect();
            let set: IpSet = cidrs.iter().copied().collect();
            let mut brute = HashSet::new();
            for c in &cidrs {
                let (s, e) = c.bounds();
                for v in s..=e {
                    brute.insert(v);
                }
            }
            prop_assert_eq!(set.count(), brute.len() as u64);
            // Decomposition covers exactly the same addresses.
            let recomposed: IpSet = set.to_cidrs().into_iter().collect();
            prop_assert_eq!(recomposed, set);
        }
    }
}
