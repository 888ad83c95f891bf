//! Longest-prefix-match tables over IPv6 (and IPv4) prefixes.
//!
//! The table is a per-bit binary trie built once and then frozen: lookups
//! dominate runtime by orders of magnitude, and a frozen arena is safe for
//! unlimited concurrent readers. IPv4 prefixes live in a separate table,
//! mapped into the 128-bit key space at the most significant bits.

use std::fmt::Display;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::addr::{Ip6, Prefix};

const NO_NODE: u32 = u32::MAX;
const NO_VALUE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    children: [u32; 2],
    value: u32,
}

impl Node {
    const EMPTY: Node = Node {
        children: [NO_NODE; 2],
        value: NO_VALUE,
    };
}

/// Incremental construction side of [`PrefixTable`].
///
/// Re-inserting an identical `(prefix, value)` pair is a no-op; inserting a
/// conflicting value for an existing prefix replaces it (last write wins) and
/// records a warning.
#[derive(Debug)]
pub struct TableBuilder<V> {
    nodes: Vec<Node>,
    values: Vec<V>,
    entries: usize,
    warnings: Vec<String>,
}

impl<V: PartialEq + Display> TableBuilder<V> {
    pub fn new() -> Self {
        TableBuilder {
            nodes: vec![Node::EMPTY],
            values: Vec::new(),
            entries: 0,
            warnings: Vec::new(),
        }
    }

    pub fn insert(&mut self, prefix: Prefix, value: V) {
        let mut node = 0usize;
        let bits = prefix.base().bits();
        for depth in 0..prefix.len() {
            let bit = ((bits >> (127 - u32::from(depth))) & 1) as usize;
            let next = self.nodes[node].children[bit];
            node = if next == NO_NODE {
                self.nodes.push(Node::EMPTY);
                let idx = self.nodes.len() - 1;
                self.nodes[node].children[bit] = idx as u32;
                idx
            } else {
                next as usize
            };
        }
        let slot = self.nodes[node].value;
        if slot == NO_VALUE {
            self.values.push(value);
            self.nodes[node].value = (self.values.len() - 1) as u32;
            self.entries += 1;
        } else if self.values[slot as usize] != value {
            self.warnings.push(format!(
                "prefix {prefix}: value {} replaced by {value}",
                self.values[slot as usize]
            ));
            self.values[slot as usize] = value;
        }
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn freeze(self) -> PrefixTable<V> {
        PrefixTable {
            nodes: self.nodes,
            values: self.values,
            entries: self.entries,
        }
    }
}

impl<V: PartialEq + Display> Default for TableBuilder<V> {
    fn default() -> Self {
        Self::new()
    }
}

/// Frozen longest-prefix-match table. Read-only after construction.
#[derive(Debug)]
pub struct PrefixTable<V> {
    nodes: Vec<Node>,
    values: Vec<V>,
    entries: usize,
}

impl<V: PartialEq + Display> PrefixTable<V> {
    pub fn builder() -> TableBuilder<V> {
        TableBuilder::new()
    }

    pub fn empty() -> Self {
        TableBuilder::new().freeze()
    }

    /// Builds from `(prefix text, value)` pairs; a malformed prefix reports
    /// its 1-based position in the input.
    pub fn build_table<S: AsRef<str>>(
        entries: impl IntoIterator<Item = (S, V)>,
    ) -> Result<Self, LoadError> {
        let mut b = TableBuilder::new();
        for (i, (text, value)) in entries.into_iter().enumerate() {
            let prefix: Prefix = text.as_ref().trim().parse().map_err(|e| LoadError::Line {
                line: i + 1,
                text: text.as_ref().to_string(),
                reason: format!("{e}"),
            })?;
            b.insert(prefix, value);
        }
        Ok(b.freeze())
    }

    /// The value of the longest stored prefix containing `addr`, if any.
    pub fn lookup_longest(&self, addr: Ip6) -> Option<&V> {
        let bits = addr.bits();
        let mut node = 0usize;
        let mut best = self.nodes[0].value;
        for depth in 0..128u32 {
            let bit = ((bits >> (127 - depth)) & 1) as usize;
            let next = self.nodes[node].children[bit];
            if next == NO_NODE {
                break;
            }
            node = next as usize;
            if self.nodes[node].value != NO_VALUE {
                best = self.nodes[node].value;
            }
        }
        (best != NO_VALUE).then(|| &self.values[best as usize])
    }

    /// Number of distinct prefixes stored.
    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }
}

/// LPM table over IPv4 prefixes, reusing the 128-bit trie with the IPv4
/// bits mapped to the top of the key space.
#[derive(Debug)]
pub struct Ipv4Table<V>(PrefixTable<V>);

fn v4_key(addr: u32) -> Ip6 {
    Ip6::from_bits(u128::from(addr) << 96)
}

impl<V: PartialEq + Display> Ipv4Table<V> {
    pub fn empty() -> Self {
        Ipv4Table(PrefixTable::empty())
    }

    pub fn lookup_longest(&self, addr: u32) -> Option<&V> {
        self.0.lookup_longest(v4_key(addr))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Builder counterpart for [`Ipv4Table`].
#[derive(Debug)]
pub struct Ipv4TableBuilder<V>(TableBuilder<V>);

impl<V: PartialEq + Display> Ipv4TableBuilder<V> {
    pub fn new() -> Self {
        Ipv4TableBuilder(TableBuilder::new())
    }

    pub fn insert(&mut self, addr: u32, len: u8, value: V) {
        debug_assert!(len <= 32);
        let prefix = Prefix::new(v4_key(addr), len).expect("v4 length <= 32");
        self.0.insert(prefix, value);
    }

    pub fn warnings(&self) -> &[String] {
        self.0.warnings()
    }

    pub fn freeze(self) -> Ipv4Table<V> {
        Ipv4Table(self.0.freeze())
    }
}

impl<V: PartialEq + Display> Default for Ipv4TableBuilder<V> {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn parse_v4(text: &str) -> Option<u32> {
    let mut out = 0u32;
    let mut count = 0;
    for part in text.split('.') {
        count += 1;
        if count > 4 || part.is_empty() || part.len() > 3 {
            return None;
        }
        let octet: u32 = part.parse().ok()?;
        if octet > 255 || (part.len() > 1 && part.starts_with('0')) {
            return None;
        }
        out = (out << 8) | octet;
    }
    (count == 4).then_some(out)
}

/// Renders a 32-bit IPv4 value as dotted-quad text.
pub fn v4_to_string(addr: u32) -> String {
    format!(
        "{}.{}.{}.{}",
        addr >> 24,
        (addr >> 16) & 0xFF,
        (addr >> 8) & 0xFF,
        addr & 0xFF
    )
}

/// Either family's prefix in one parsed form.
enum AnyPrefix {
    V6(Prefix),
    V4 { addr: u32, len: u8 },
}

fn parse_any_prefix(text: &str) -> Option<AnyPrefix> {
    let (addr_text, len_text) = text.rsplit_once('/')?;
    let len: u8 = len_text.parse().ok()?;
    if addr_text.contains(':') {
        let prefix: Prefix = text.parse().ok()?;
        Some(AnyPrefix::V6(prefix))
    } else {
        let addr = parse_v4(addr_text)?;
        (len <= 32).then_some(AnyPrefix::V4 { addr, len })
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("failed to read prefix file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}: {text:?}")]
    Line {
        line: usize,
        text: String,
        reason: String,
    },
    #[error("{count} malformed line(s), first offenders:\n{}", offenders.join("\n"))]
    Malformed {
        count: usize,
        offenders: Vec<String>,
    },
}

/// Line counts from a prefix-file ingest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    /// Lines that contributed an entry.
    pub lines: usize,
    /// Blank or comment lines skipped.
    pub skipped: usize,
}

/// Prefix-to-ASN tables for both address families, from one `prefix asn`
/// whitespace-separated file (the pfx2as convention).
#[derive(Debug)]
pub struct AsnTables {
    pub v6: PrefixTable<u32>,
    pub v4: Ipv4Table<u32>,
    pub stats: IngestStats,
    pub warnings: Vec<String>,
}

impl AsnTables {
    pub fn empty() -> Self {
        AsnTables {
            v6: PrefixTable::empty(),
            v4: Ipv4Table::empty(),
            stats: IngestStats::default(),
            warnings: Vec::new(),
        }
    }
}

struct MalformedCollector {
    count: usize,
    offenders: Vec<String>,
}

impl MalformedCollector {
    fn new() -> Self {
        MalformedCollector {
            count: 0,
            offenders: Vec::new(),
        }
    }

    fn push(&mut self, line_no: usize, line: &str, reason: &str) {
        self.count += 1;
        if self.offenders.len() < 10 {
            self.offenders
                .push(format!("line {line_no}: {reason}: {line:?}"));
        }
    }

    fn finish(self) -> Result<(), LoadError> {
        if self.count > 0 {
            Err(LoadError::Malformed {
                count: self.count,
                offenders: self.offenders,
            })
        } else {
            Ok(())
        }
    }
}

pub fn load_asn_file(path: impl AsRef<Path>) -> Result<AsnTables, LoadError> {
    load_asn_reader(BufReader::new(std::fs::File::open(path)?))
}

pub fn load_asn_reader(reader: impl BufRead) -> Result<AsnTables, LoadError> {
    let mut v6 = TableBuilder::new();
    let mut v4 = Ipv4TableBuilder::new();
    let mut stats = IngestStats::default();
    let mut bad = MalformedCollector::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            stats.skipped += 1;
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (Some(prefix_text), Some(asn_text), None) =
            (fields.next(), fields.next(), fields.next())
        else {
            bad.push(i + 1, trimmed, "expected `prefix asn`");
            continue;
        };
        let Ok(asn) = asn_text.parse::<u32>() else {
            bad.push(i + 1, trimmed, "bad ASN");
            continue;
        };
        match parse_any_prefix(prefix_text) {
            Some(AnyPrefix::V6(p)) => v6.insert(p, asn),
            Some(AnyPrefix::V4 { addr, len }) => v4.insert(addr, len, asn),
            None => {
                bad.push(i + 1, trimmed, "bad prefix");
                continue;
            }
        }
        stats.lines += 1;
    }
    bad.finish()?;
    let mut warnings = v6.warnings().to_vec();
    warnings.extend_from_slice(v4.warnings());
    Ok(AsnTables {
        v6: v6.freeze(),
        v4: v4.freeze(),
        stats,
        warnings,
    })
}

/// Two-letter ISO 3166-1 country code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode(pub [u8; 2]);

impl CountryCode {
    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("validated ASCII")
    }
}

impl Display for CountryCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CountryCode({self})")
    }
}

impl FromStr for CountryCode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() == 2 && b.iter().all(|c| c.is_ascii_alphabetic()) {
            Ok(CountryCode([
                b[0].to_ascii_uppercase(),
                b[1].to_ascii_uppercase(),
            ]))
        } else {
            Err(())
        }
    }
}

/// Loads a `prefix,iso2` CSV into a country table (IPv6 prefixes only;
/// country attribution is country-granular by design).
pub fn load_country_file(
    path: impl AsRef<Path>,
) -> Result<(PrefixTable<CountryCode>, IngestStats), LoadError> {
    load_country_reader(BufReader::new(std::fs::File::open(path)?))
}

pub fn load_country_reader(
    reader: impl BufRead,
) -> Result<(PrefixTable<CountryCode>, IngestStats), LoadError> {
    let mut b = TableBuilder::new();
    let mut stats = IngestStats::default();
    let mut bad = MalformedCollector::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            stats.skipped += 1;
            continue;
        }
        let Some((prefix_text, cc_text)) = trimmed.split_once(',') else {
            bad.push(i + 1, trimmed, "expected `prefix,iso2`");
            continue;
        };
        let Ok(prefix) = prefix_text.trim().parse::<Prefix>() else {
            bad.push(i + 1, trimmed, "bad prefix");
            continue;
        };
        let Ok(cc) = cc_text.trim().parse::<CountryCode>() else {
            bad.push(i + 1, trimmed, "bad country code");
            continue;
        };
        b.insert(prefix, cc);
        stats.lines += 1;
    }
    bad.finish()?;
    Ok((b.freeze(), stats))
}

/// Loads an aliased-prefix list: one IPv6 prefix per line, `#` comments.
pub fn load_alias_file(
    path: impl AsRef<Path>,
) -> Result<(PrefixTable<bool>, IngestStats), LoadError> {
    load_alias_reader(BufReader::new(std::fs::File::open(path)?))
}

pub fn load_alias_reader(
    reader: impl BufRead,
) -> Result<(PrefixTable<bool>, IngestStats), LoadError> {
    let mut b = TableBuilder::new();
    let mut stats = IngestStats::default();
    let mut bad = MalformedCollector::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            stats.skipped += 1;
            continue;
        }
        let Ok(prefix) = trimmed.parse::<Prefix>() else {
            bad.push(i + 1, trimmed, "bad prefix");
            continue;
        };
        b.insert(prefix, true);
        stats.lines += 1;
    }
    bad.finish()?;
    Ok((b.freeze(), stats))
}
