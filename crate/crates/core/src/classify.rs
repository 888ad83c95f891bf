//! Seven-way addressing-pattern classification of IPv6 corpora.
//!
//! Structural categories (all-zero IIDs, low-byte, low-two-byte) are exact
//! matches and take precedence; IPv4-embedded addresses are accepted per AS
//! only when statistically validated against an IPv4 routing view; remaining
//! addresses fall into entropy bands. Per-AS profiles carry category counts
//! plus an entropy histogram at 0.01 resolution for CDF export.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::addr::{Entropy, EntropyBand, Iid, Ip6};
use crate::error::{Error, Result};
use crate::prefix_map::{Ipv4Table, PrefixTable, v4_to_string};

/// The seven address categories. Every classified address lands in exactly
/// one, by the precedence structural > IPv4-mapped > entropy band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AddressCategory {
    Zeroes,
    LowByte,
    Low2Bytes,
    Ipv4Mapped,
    HighEntropy,
    MediumEntropy,
    LowEntropy,
}

impl AddressCategory {
    pub const ALL: [AddressCategory; 7] = [
        AddressCategory::Zeroes,
        AddressCategory::LowByte,
        AddressCategory::Low2Bytes,
        AddressCategory::Ipv4Mapped,
        AddressCategory::HighEntropy,
        AddressCategory::MediumEntropy,
        AddressCategory::LowEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AddressCategory::Zeroes => "zeroes",
            AddressCategory::LowByte => "low_byte",
            AddressCategory::Low2Bytes => "low_2_bytes",
            AddressCategory::Ipv4Mapped => "ipv4_mapped",
            AddressCategory::HighEntropy => "high_entropy",
            AddressCategory::MediumEntropy => "medium_entropy",
            AddressCategory::LowEntropy => "low_entropy",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).expect("in ALL")
    }
}

impl std::fmt::Display for AddressCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AddressCategory {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or(())
    }
}

/// Exact structural match on the IID value, or `None` for everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structural {
    Zeroes,
    LowByte,
    Low2Bytes,
}

pub fn structural_category(iid: Iid) -> Option<Structural> {
    match iid.bits() {
        0 => Some(Structural::Zeroes),
        v if v < 1 << 8 => Some(Structural::LowByte),
        v if v < 1 << 16 => Some(Structural::Low2Bytes),
        _ => None,
    }
}

/// The three embedded-IPv4 encodings evaluated per address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum V4Encoding {
    /// IID bits 32..63: the low four bytes read as a hex IPv4 value.
    HexLow32,
    /// The last four hextets whose hex renderings each parse as a decimal
    /// octet 0..=255.
    DecimalHextets,
    /// IID bytes 0..3: the high four bytes read as a hex IPv4 value.
    HexHigh32,
}

/// A syntactically valid embedded-IPv4 reading of one address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ipv4Candidate {
    pub source: Ip6,
    pub embedded: u32,
    pub encoding: V4Encoding,
}

/// Evaluates the three encodings and returns every syntactically valid
/// candidate. The all-zero reading (0.0.0.0) is never a candidate.
pub fn detect_ipv4_candidates(addr: Ip6) -> Vec<Ipv4Candidate> {
    let iid = addr.iid().bits();
    let mut out = Vec::new();

    let low = iid as u32;
    if low != 0 {
        out.push(Ipv4Candidate {
            source: addr,
            embedded: low,
            encoding: V4Encoding::HexLow32,
        });
    }

    if let Some(v4) = decimal_hextets(iid) {
        out.push(Ipv4Candidate {
            source: addr,
            embedded: v4,
            encoding: V4Encoding::DecimalHextets,
        });
    }

    let high = (iid >> 32) as u32;
    if high != 0 {
        out.push(Ipv4Candidate {
            source: addr,
            embedded: high,
            encoding: V4Encoding::HexHigh32,
        });
    }
    out
}

/// A hextet qualifies when its hex rendering contains only decimal digits
/// and reads as a value 0..=255; four qualifying hextets form the address.
fn decimal_hextets(iid: u64) -> Option<u32> {
    let mut out = 0u32;
    for i in (0..4).rev() {
        let hextet = (iid >> (16 * i)) & 0xFFFF;
        let mut value = 0u32;
        for shift in [12, 8, 4, 0] {
            let nibble = (hextet >> shift) & 0xF;
            if nibble > 9 {
                return None;
            }
            value = value * 10 + nibble as u32;
        }
        if value > 255 {
            return None;
        }
        out = (out << 8) | value;
    }
    (out != 0).then_some(out)
}

/// Acceptance thresholds for per-AS IPv4-embedding validation.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyThresholds {
    /// Minimum AS-consistent embedded addresses in the AS (non-strict).
    pub min_count: u64,
    /// Required fraction of the AS's total addresses (strict).
    pub min_frac: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        ClassifyThresholds {
            min_count: 100,
            min_frac: 0.10,
        }
    }
}

/// Filters embedded-IPv4 candidates down to the accepted source addresses.
///
/// A candidate is AS-consistent when its embedded IPv4 resolves to the same
/// ASN as its source address. Acceptance is all-or-nothing per AS: the AS's
/// consistent addresses are accepted only when their count reaches
/// `min_count` and strictly exceeds `min_frac` of the AS's total observed
/// addresses.
pub fn validate_ipv4_mapped(
    candidates_by_as: &BTreeMap<u32, Vec<Ipv4Candidate>>,
    as_totals: &BTreeMap<u32, u64>,
    v4table: &Ipv4Table<u32>,
    thresholds: ClassifyThresholds,
) -> BTreeSet<Ip6> {
    let mut accepted = BTreeSet::new();
    for (&asn, candidates) in candidates_by_as {
        let consistent: BTreeSet<Ip6> = candidates
            .iter()
            .filter(|c| v4table.lookup_longest(c.embedded) == Some(&asn))
            .map(|c| c.source)
            .collect();
        let count = consistent.len() as u64;
        let total = as_totals.get(&asn).copied().unwrap_or(0);
        if count >= thresholds.min_count && count as f64 > thresholds.min_frac * total as f64 {
            accepted.extend(consistent);
        }
    }
    accepted
}

/// Final category under the fixed precedence.
pub fn categorize(addr: Ip6, entropy: Entropy, ipv4_accepted: bool) -> AddressCategory {
    match structural_category(addr.iid()) {
        Some(Structural::Zeroes) => AddressCategory::Zeroes,
        Some(Structural::LowByte) => AddressCategory::LowByte,
        Some(Structural::Low2Bytes) => AddressCategory::Low2Bytes,
        None if ipv4_accepted => AddressCategory::Ipv4Mapped,
        None => match EntropyBand::of(entropy) {
            EntropyBand::High => AddressCategory::HighEntropy,
            EntropyBand::Medium => AddressCategory::MediumEntropy,
            EntropyBand::Low => AddressCategory::LowEntropy,
        },
    }
}

/// One classified address.
#[derive(Debug, Clone, Copy)]
pub struct ClassifiedAddr {
    pub addr: Ip6,
    pub entropy: Entropy,
    pub asn: Option<u32>,
    pub category: AddressCategory,
}

/// Classification output for a whole corpus.
#[derive(Debug)]
pub struct ClassifiedCorpus {
    pub rows: Vec<ClassifiedAddr>,
    /// Addresses without ASN attribution, excluded from IPv4 validation.
    pub unattributed: u64,
    /// Addresses accepted as IPv4-mapped.
    pub accepted_ipv4: u64,
}

/// Classifies every address: entropy, structural checks, candidate
/// detection, per-AS validation, and final categorization.
pub fn classify_corpus(
    addrs: impl IntoIterator<Item = Ip6>,
    asn6: &PrefixTable<u32>,
    asn4: &Ipv4Table<u32>,
    thresholds: ClassifyThresholds,
) -> ClassifiedCorpus {
    struct Pending {
        addr: Ip6,
        entropy: Entropy,
        asn: Option<u32>,
    }

    let mut pending = Vec::new();
    let mut candidates_by_as: BTreeMap<u32, Vec<Ipv4Candidate>> = BTreeMap::new();
    let mut as_totals: BTreeMap<u32, u64> = BTreeMap::new();
    let mut unattributed = 0u64;

    for addr in addrs {
        let asn = asn6.lookup_longest(addr).copied();
        match asn {
            Some(asn) => {
                *as_totals.entry(asn).or_insert(0) += 1;
                let candidates = detect_ipv4_candidates(addr);
                if !candidates.is_empty() {
                    candidates_by_as.entry(asn).or_default().extend(candidates);
                }
            }
            None => unattributed += 1,
        }
        pending.push(Pending {
            addr,
            entropy: addr.iid().entropy(),
            asn,
        });
    }

    let accepted = validate_ipv4_mapped(&candidates_by_as, &as_totals, asn4, thresholds);

    let rows = pending
        .into_iter()
        .map(|p| ClassifiedAddr {
            addr: p.addr,
            entropy: p.entropy,
            asn: p.asn,
            category: categorize(p.addr, p.entropy, accepted.contains(&p.addr)),
        })
        .collect();

    ClassifiedCorpus {
        rows,
        unattributed,
        accepted_ipv4: accepted.len() as u64,
    }
}

pub const ENTROPY_BINS: usize = 101;

/// Per-category counts plus an entropy histogram in 0.01-wide bins.
#[derive(Debug, Clone)]
pub struct CategoryCounts {
    counts: [u64; 7],
    total: u64,
    entropy_hist: [u64; ENTROPY_BINS],
}

impl Default for CategoryCounts {
    fn default() -> Self {
        CategoryCounts {
            counts: [0; 7],
            total: 0,
            entropy_hist: [0; ENTROPY_BINS],
        }
    }
}

impl CategoryCounts {
    fn add(&mut self, category: AddressCategory, entropy: Entropy) {
        self.counts[category.index()] += 1;
        self.total += 1;
        let bin = ((entropy.value() * 100.0).floor() as usize).min(ENTROPY_BINS - 1);
        self.entropy_hist[bin] += 1;
    }

    pub fn count(&self, category: AddressCategory) -> u64 {
        self.counts[category.index()]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn fraction(&self, category: AddressCategory) -> f64 {
        self.count(category) as f64 / self.total as f64
    }

    /// Cumulative entropy distribution: `(bin upper edge, fraction <= edge)`.
    pub fn entropy_cdf(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(ENTROPY_BINS);
        let mut cum = 0u64;
        for (i, &c) in self.entropy_hist.iter().enumerate() {
            cum += c;
            out.push((i as f64 / 100.0, cum as f64 / self.total as f64));
        }
        out
    }
}

/// Category and entropy aggregates for one AS.
#[derive(Debug, Clone)]
pub struct AsProfile {
    pub asn: u32,
    pub counts: CategoryCounts,
}

/// Global and per-AS distribution of the seven categories.
#[derive(Debug)]
pub struct Profiles {
    pub global: CategoryCounts,
    pub per_as: BTreeMap<u32, AsProfile>,
}

/// Aggregates classified rows into global and per-AS tables. Fractions per
/// table sum to 1 over any non-empty corpus; an empty corpus is an error.
pub fn profile_distribution(rows: &[ClassifiedAddr]) -> Result<Profiles> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no classified addresses"));
    }
    let mut global = CategoryCounts::default();
    let mut per_as: BTreeMap<u32, AsProfile> = BTreeMap::new();
    for row in rows {
        global.add(row.category, row.entropy);
        if let Some(asn) = row.asn {
            per_as
                .entry(asn)
                .or_insert_with(|| AsProfile {
                    asn,
                    counts: CategoryCounts::default(),
                })
                .counts
                .add(row.category, row.entropy);
        }
    }
    Ok(Profiles { global, per_as })
}

/// Writes `dataset,category,count,fraction` for the global distribution.
pub fn write_category_report(
    mut w: impl Write,
    dataset: &str,
    profiles: &Profiles,
) -> std::io::Result<()> {
    writeln!(w, "dataset,category,count,fraction")?;
    for cat in AddressCategory::ALL {
        writeln!(
            w,
            "{dataset},{},{},{}",
            cat.name(),
            profiles.global.count(cat),
            profiles.global.fraction(cat)
        )?;
    }
    Ok(())
}

/// Writes `asn,category,count,fraction` for every observed AS.
pub fn write_category_report_by_as(mut w: impl Write, profiles: &Profiles) -> std::io::Result<()> {
    writeln!(w, "asn,category,count,fraction")?;
    for profile in profiles.per_as.values() {
        for cat in AddressCategory::ALL {
            writeln!(
                w,
                "{},{},{},{}",
                profile.asn,
                cat.name(),
                profile.counts.count(cat),
                profile.counts.fraction(cat)
            )?;
        }
    }
    Ok(())
}

/// Writes the plot-ready global entropy CDF: `entropy_bin,cumulative_fraction`.
pub fn write_entropy_cdf(mut w: impl Write, counts: &CategoryCounts) -> std::io::Result<()> {
    writeln!(w, "entropy_bin,cumulative_fraction")?;
    for (bin, frac) in counts.entropy_cdf() {
        writeln!(w, "{bin:.2},{frac}")?;
    }
    Ok(())
}

/// Writes per-AS entropy CDFs: `asn,entropy_bin,cumulative_fraction`.
pub fn write_entropy_cdf_by_as(mut w: impl Write, profiles: &Profiles) -> std::io::Result<()> {
    writeln!(w, "asn,entropy_bin,cumulative_fraction")?;
    for profile in profiles.per_as.values() {
        for (bin, frac) in profile.counts.entropy_cdf() {
            writeln!(w, "{},{bin:.2},{frac}", profile.asn)?;
        }
    }
    Ok(())
}

/// Renders a candidate's embedded value in dotted-quad form.
pub fn candidate_v4_text(c: &Ipv4Candidate) -> String {
    v4_to_string(c.embedded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::parse_ipv6;
    use crate::prefix_map::{Ipv4TableBuilder, TableBuilder, parse_v4};
    use proptest::prelude::*;

    fn a(s: &str) -> Ip6 {
        parse_ipv6(s).unwrap()
    }

    #[test]
    fn structural_boundaries() {
        assert_eq!(structural_category(Iid::from_bits(0)), Some(Structural::Zeroes));
        assert_eq!(
            structural_category(Iid::from_bits(1)),
            Some(Structural::LowByte)
        );
        assert_eq!(
            structural_category(Iid::from_bits(0xFF)),
            Some(Structural::LowByte)
        );
        assert_eq!(
            structural_category(Iid::from_bits(0x1FF)),
            Some(Structural::Low2Bytes)
        );
        assert_eq!(
            structural_category(Iid::from_bits(0x100)),
            Some(Structural::Low2Bytes)
        );
        assert_eq!(structural_category(Iid::from_bits(0x10000)), None);
    }

    #[test]
    fn candidates_hex_low32_only() {
        let got = detect_ipv4_candidates(a("2001:db8::c000:201"));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].encoding, V4Encoding::HexLow32);
        assert_eq!(candidate_v4_text(&got[0]), "192.0.2.1");
    }

    #[test]
    fn candidates_decimal_hextets() {
        let got = detect_ipv4_candidates(a("2001:db8::192:168:1:1"));
        let decimal: Vec<_> = got
            .iter()
            .filter(|c| c.encoding == V4Encoding::DecimalHextets)
            .collect();
        assert_eq!(decimal.len(), 1);
        assert_eq!(candidate_v4_text(decimal[0]), "192.168.1.1");
    }

    #[test]
    fn candidates_reject_non_decimal_hextets() {
        let got = detect_ipv4_candidates(a("2001:db8::dead:beef"));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].encoding, V4Encoding::HexLow32);
        assert_eq!(candidate_v4_text(&got[0]), "222.173.190.239");
    }

    #[test]
    fn candidates_hex_high32() {
        // IID c0000201:00000005 - high 32 bits decode, low also decode.
        let got = detect_ipv4_candidates(a("2001:db8::c000:201:0:5"));
        assert!(got
            .iter()
            .any(|c| c.encoding == V4Encoding::HexHigh32 && candidate_v4_text(c) == "192.0.2.1"));
    }

    #[test]
    fn decimal_hextets_rerender_to_source() {
        let addr = a("2001:db8::10:250:0:88");
        let got = detect_ipv4_candidates(addr);
        let c = got
            .iter()
            .find(|c| c.encoding == V4Encoding::DecimalHextets)
            .unwrap();
        // Each octet rendered in decimal equals the source hextet in hex.
        let octets = c.embedded.to_be_bytes();
        let iid = addr.iid().bits();
        for (i, octet) in octets.iter().enumerate() {
            let hextet = (iid >> (48 - 16 * i)) & 0xFFFF;
            assert_eq!(format!("{octet}"), format!("{hextet:x}"));
        }
    }

    fn v4table(entries: &[(&str, u8, u32)]) -> Ipv4Table<u32> {
        let mut b = Ipv4TableBuilder::new();
        for &(text, len, asn) in entries {
            b.insert(parse_v4(text).unwrap(), len, asn);
        }
        b.freeze()
    }

    /// Builds a candidate set for `n` consistent sources in one AS.
    fn consistent_candidates(asn: u32, n: u64) -> Vec<Ipv4Candidate> {
        (0..n)
            .map(|i| {
                let embedded = 0xC000_0200u32 + (i as u32 % 200);
                let source =
                    Ip6::from_bits((0x2001_0db8u128) << 96 | (u128::from(asn) << 64) | u128::from(i) << 32 | u128::from(embedded));
                Ipv4Candidate {
                    source,
                    embedded,
                    encoding: V4Encoding::HexLow32,
                }
            })
            .collect()
    }

    #[test]
    fn validation_thresholds() {
        let v4 = v4table(&[("192.0.2.0", 24, 100)]);
        let th = ClassifyThresholds::default();

        // 150 consistent of 1000 total: accepted.
        let mut by_as = BTreeMap::new();
        by_as.insert(100, consistent_candidates(100, 150));
        let totals = BTreeMap::from([(100, 1000)]);
        assert_eq!(validate_ipv4_mapped(&by_as, &totals, &v4, th).len(), 150);

        // 99 consistent: fails the count rule.
        let mut by_as = BTreeMap::new();
        by_as.insert(100, consistent_candidates(100, 99));
        assert!(validate_ipv4_mapped(&by_as, &totals, &v4, th).is_empty());

        // 500 of 10000 = 5%: fails the fraction rule.
        let mut by_as = BTreeMap::new();
        by_as.insert(100, consistent_candidates(100, 500));
        let totals = BTreeMap::from([(100, 10_000)]);
        assert!(validate_ipv4_mapped(&by_as, &totals, &v4, th).is_empty());

        // Exactly 10% is not "more than 10%".
        let totals = BTreeMap::from([(100, 5_000)]);
        let mut by_as = BTreeMap::new();
        by_as.insert(100, consistent_candidates(100, 500));
        assert!(validate_ipv4_mapped(&by_as, &totals, &v4, th).is_empty());
    }

    #[test]
    fn validation_requires_as_consistency() {
        // Embedded v4 resolves to a different AS: never accepted.
        let v4 = v4table(&[("192.0.2.0", 24, 999)]);
        let mut by_as = BTreeMap::new();
        by_as.insert(100, consistent_candidates(100, 150));
        let totals = BTreeMap::from([(100, 1000)]);
        assert!(
            validate_ipv4_mapped(&by_as, &totals, &v4, ClassifyThresholds::default()).is_empty()
        );
    }

    #[test]
    fn categorize_precedence() {
        let e = |v| Entropy::new(v).unwrap();
        assert_eq!(
            categorize(a("2001:db8::"), e(0.0), false),
            AddressCategory::Zeroes
        );
        // Accepted IPv4 candidate with high entropy stays IPv4-mapped.
        assert_eq!(
            categorize(a("2001:db8::c0a8:101"), e(0.9), true),
            AddressCategory::Ipv4Mapped
        );
        let high = a("2001:db8::fedc:ba98:7654:3210");
        assert_eq!(
            categorize(high, high.iid().entropy(), false),
            AddressCategory::HighEntropy
        );
        assert_eq!(
            categorize(a("2001:db8::1"), e(0.08), false),
            AddressCategory::LowByte
        );
    }

    #[test]
    fn profile_fractions() {
        let asn6: PrefixTable<u32> = TableBuilder::new().freeze();
        let asn4 = Ipv4Table::empty();
        let addrs = vec![
            a("2001:db8::"),                          // zeroes
            a("2001:db8::1"),                         // low byte
            a("2001:db8::123:4567:89ab:cdef"),        // high entropy
            a("2001:db8::fedc:ba98:7654:3210"),       // high entropy
        ];
        let corpus = classify_corpus(addrs, &asn6, &asn4, ClassifyThresholds::default());
        let profiles = profile_distribution(&corpus.rows).unwrap();
        assert_eq!(profiles.global.fraction(AddressCategory::Zeroes), 0.25);
        assert_eq!(profiles.global.fraction(AddressCategory::LowByte), 0.25);
        assert_eq!(profiles.global.fraction(AddressCategory::HighEntropy), 0.5);
        assert_eq!(profiles.global.fraction(AddressCategory::Ipv4Mapped), 0.0);
        assert_eq!(corpus.unattributed, 4);
    }

    #[test]
    fn profile_empty_is_error() {
        assert!(matches!(
            profile_distribution(&[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn reports_render() {
        let asn6 = PrefixTable::build_table([("2001:db8::/32", 7u32)]).unwrap();
        let asn4 = Ipv4Table::empty();
        let corpus = classify_corpus(
            vec![a("2001:db8::1"), a("2001:db8::2:3:4:5")],
            &asn6,
            &asn4,
            ClassifyThresholds::default(),
        );
        let profiles = profile_distribution(&corpus.rows).unwrap();
        let mut out = Vec::new();
        write_category_report(&mut out, "test", &profiles).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("test,low_byte,1,0.5"));

        let mut out = Vec::new();
        write_category_report_by_as(&mut out, &profiles).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("7,low_byte,1,0.5"));

        let mut out = Vec::new();
        write_entropy_cdf(&mut out, &profiles.global).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().count() == ENTROPY_BINS + 1);
        assert!(text.ends_with("1.00,1\n"));
    }

    #[test]
    fn threshold_monotone_in_consistent_count() {
        let v4 = v4table(&[("192.0.2.0", 24, 100)]);
        let th = ClassifyThresholds::default();
        let totals = BTreeMap::from([(100u32, 900u64)]);
        let mut by_as = BTreeMap::new();
        by_as.insert(100, consistent_candidates(100, 120));
        assert_eq!(validate_ipv4_mapped(&by_as, &totals, &v4, th).len(), 120);

        // Growing the consistent set (and the AS total with it) keeps it accepted.
        let totals = BTreeMap::from([(100u32, 930u64)]);
        let mut by_as = BTreeMap::new();
        by_as.insert(100, consistent_candidates(100, 150));
        assert_eq!(validate_ipv4_mapped(&by_as, &totals, &v4, th).len(), 150);
    }

    proptest! {
        #[test]
        fn categories_partition(bits: u64, accepted: bool) {
            let addr = Ip6::from_bits((0x2001_0db8u128 << 96) | u128::from(bits));
            let cat = categorize(addr, addr.iid().entropy(), accepted);
            let repeat = categorize(addr, addr.iid().entropy(), accepted);
            prop_assert_eq!(cat, repeat);
            prop_assert!(AddressCategory::ALL.contains(&cat));
        }

        #[test]
        fn fractions_sum_to_one(seed in 1u64..5000) {
            let addrs: Vec<Ip6> = (0..seed % 50 + 1)
                .map(|i| Ip6::from_bits((0x2001_0db8u128 << 96) | u128::from(seed.wrapping_mul(i + 1))))
                .collect();
            let corpus = classify_corpus(
                addrs,
                &PrefixTable::empty(),
                &Ipv4Table::empty(),
                ClassifyThresholds::default(),
            );
            let profiles = profile_distribution(&corpus.rows).unwrap();
            let sum: f64 = AddressCategory::ALL
                .iter()
                .map(|&c| profiles.global.fraction(c))
                .sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}
