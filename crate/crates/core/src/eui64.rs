//! EUI-64 interface-identifier analysis: apparent-EUI-64 detection, MAC
//! extraction/embedding, vendor resolution against an OUI registry, and the
//! random-coincidence baseline.
//!
//! An EUI-64 SLAAC IID embeds the interface MAC with `0xFF 0xFE` inserted
//! between MAC bytes 3 and 4 and the Universal/Local bit (0x02 of the first
//! octet) inverted. Extraction reverses both steps.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::addr::Iid;

/// A 48-bit MAC address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mac(u64);

impl Mac {
    /// Masks the value to 48 bits.
    pub const fn from_bits(bits: u64) -> Self {
        Mac(bits & 0xFFFF_FFFF_FFFF)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// The IEEE-assigned top 24 bits.
    pub const fn oui(self) -> Oui {
        Oui((self.0 >> 24) as u32)
    }

    /// The vendor-assigned low 24 bits.
    pub const fn nic(self) -> u32 {
        (self.0 & 0xFF_FFFF) as u32
    }

    pub const fn from_parts(oui: Oui, nic: u32) -> Self {
        Mac((oui.0 as u64) << 24 | (nic & 0xFF_FFFF) as u64)
    }
}

impl fmt::Display for Mac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

impl fmt::Debug for Mac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mac({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid MAC address: {0:?}")]
pub struct ParseMacError(pub String);

impl FromStr for Mac {
    type Err = ParseMacError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = 0u64;
        let mut count = 0;
        for part in s.split([':', '-']) {
            count += 1;
            if count > 6 || part.is_empty() || part.len() > 2 {
                return Err(ParseMacError(s.to_string()));
            }
            let byte =
                u8::from_str_radix(part, 16).map_err(|_| ParseMacError(s.to_string()))?;
            bits = (bits << 8) | u64::from(byte);
        }
        if count != 6 {
            return Err(ParseMacError(s.to_string()));
        }
        Ok(Mac(bits))
    }
}

/// A 24-bit Organizationally Unique Identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Oui(u32);

impl Oui {
    pub const fn from_bits(bits: u32) -> Self {
        Oui(bits & 0xFF_FFFF)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Oui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:02x}:{:02x}:{:02x}",
            (self.0 >> 16) & 0xFF,
            (self.0 >> 8) & 0xFF,
            self.0 & 0xFF
        )
    }
}

impl fmt::Debug for Oui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Oui({self})")
    }
}

impl FromStr for Oui {
    type Err = ParseMacError;

    /// Accepts `aa:bb:cc`, `aa-bb-cc`, or bare `aabbcc`, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex: String = s.chars().filter(|c| !matches!(c, ':' | '-')).collect();
        if hex.len() != 6 {
            return Err(ParseMacError(s.to_string()));
        }
        u32::from_str_radix(&hex, 16)
            .map(Oui)
            .map_err(|_| ParseMacError(s.to_string()))
    }
}

/// True iff the IID carries `0xFF 0xFE` at bytes 3 and 4 (0-indexed from the
/// most significant byte) — the EUI-64 insertion point.
pub fn is_apparent_eui64(iid: Iid) -> bool {
    (iid.bits() >> 24) & 0xFFFF == 0xFFFE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("IID is not an apparent EUI-64 (bytes 3..=4 != ff:fe)")]
pub struct NotEui64;

/// Recovers the embedded MAC from an apparent EUI-64 IID: drop the `FF FE`
/// bytes and invert the U/L bit of the first octet.
pub fn extract_mac(iid: Iid) -> Result<Mac, NotEui64> {
    if !is_apparent_eui64(iid) {
        return Err(NotEui64);
    }
    let bits = iid.bits();
    let joined = (bits >> 40 << 24) | (bits & 0xFF_FFFF);
    Ok(Mac(joined ^ (0x02 << 40)))
}

/// Builds the EUI-64 IID for a MAC: invert the U/L bit, insert `FF FE`
/// between bytes 3 and 4. Exact inverse of [`extract_mac`].
pub fn embed_mac(mac: Mac) -> Iid {
    let flipped = mac.0 ^ (0x02 << 40);
    Iid::from_bits((flipped >> 24 << 40) | 0xFF_FE00_0000 | (flipped & 0xFF_FFFF))
}

/// Expected count of apparent EUI-64 IIDs arising by chance among
/// `corpus_size` uniformly random IIDs: the two fixed bytes match with
/// probability 2^-16.
pub fn expected_random_apparent(corpus_size: u64) -> f64 {
    corpus_size as f64 / 65536.0
}

/// OUI → organization name registry, loaded once and then read-only.
#[derive(Debug, Default)]
pub struct OuiDb {
    entries: HashMap<Oui, String>,
}

#[derive(Debug, Error)]
pub enum OuiDbError {
    #[error("failed to read OUI registry: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed OUI registry row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl OuiDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, oui: Oui, organization: impl Into<String>) {
        self.entries.insert(oui, organization.into());
    }

    /// Loads the IEEE MA-L CSV export: header row, columns
    /// `Registry,Assignment,Organization Name[,...]`, quoted names,
    /// assignment hex parsed case-insensitively.
    pub fn from_csv(reader: impl Read) -> Result<Self, OuiDbError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let mut db = OuiDb::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 2; // 1-based, after the header
            let assignment = record.get(1).ok_or_else(|| OuiDbError::Row {
                row,
                reason: "missing assignment column".into(),
            })?;
            let organization = record.get(2).ok_or_else(|| OuiDbError::Row {
                row,
                reason: "missing organization column".into(),
            })?;
            let oui = assignment.parse().map_err(|_| OuiDbError::Row {
                row,
                reason: format!("bad assignment {assignment:?}"),
            })?;
            db.insert(oui, organization.trim());
        }
        Ok(db)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, OuiDbError> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn lookup(&self, oui: Oui) -> Option<&str> {
        self.entries.get(&oui).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Vendor for a MAC, or `None` when its OUI is unlisted in the registry.
pub fn resolve_vendor(mac: Mac, db: &OuiDb) -> Option<&str> {
    db.lookup(mac.oui())
}

pub const UNLISTED: &str = "Unlisted";

/// One row of the extracted-MAC report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacReportRow {
    pub mac: Mac,
    pub vendor: String,
    pub count: u64,
}

/// Aggregates per-MAC observation counts into report rows sorted by count
/// descending (ties by MAC ascending) and resolves vendors.
pub fn mac_report(counts: &HashMap<Mac, u64>, db: &OuiDb) -> Vec<MacReportRow> {
    let mut rows: Vec<MacReportRow> = counts
        .iter()
        .map(|(&mac, &count)| MacReportRow {
            mac,
            vendor: resolve_vendor(mac, db).unwrap_or(UNLISTED).to_string(),
            count,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.mac.cmp(&b.mac)));
    rows
}

/// Writes the `mac,oui,vendor,count` CSV.
pub fn write_mac_report(mut w: impl Write, rows: &[MacReportRow]) -> std::io::Result<()> {
    writeln!(w, "mac,oui,vendor,count")?;
    for r in rows {
        let vendor = if r.vendor.contains(',') || r.vendor.contains('"') {
            format!("\"{}\"", r.vendor.replace('"', "\"\""))
        } else {
            r.vendor.clone()
        };
        writeln!(w, "{},{},{},{}", r.mac, r.mac.oui(), vendor, r.count)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn apparent_eui64_checks_byte_positions() {
        assert!(is_apparent_eui64(Iid::from_bits(0x0211_22FF_FE33_4455)));
        assert!(!is_apparent_eui64(Iid::from_bits(0x0123_4567_89ab_cdef)));
        // FE:FF at the insertion point is not FF:FE.
        assert!(!is_apparent_eui64(Iid::from_bits(0xFFFE_FFFE_FFFE_FFFE)));
    }

    #[test]
    fn extract_reverses_insertion_and_ul_flip() {
        let mac = extract_mac(Iid::from_bits(0x0211_22FF_FE33_4455)).unwrap();
        assert_eq!(mac.to_string(), "00:11:22:33:44:55");
        let mac = extract_mac(Iid::from_bits(0xA8BB_CCFF_FEDD_EEFF)).unwrap();
        assert_eq!(mac.to_string(), "aa:bb:cc:dd:ee:ff");
        assert_eq!(
            extract_mac(Iid::from_bits(0x0123_4567_89ab_cdef)),
            Err(NotEui64)
        );
    }

    #[test]
    fn embed_matches_hand_oracle() {
        let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
        assert_eq!(embed_mac(mac).bits(), 0x0211_22FF_FE33_4455);
        let mac: Mac = "aa:bb:cc:dd:ee:ff".parse().unwrap();
        assert_eq!(embed_mac(mac).bits(), 0xA8BB_CCFF_FEDD_EEFF);
        let mac: Mac = "02:00:00:00:00:00".parse().unwrap();
        assert_eq!(embed_mac(mac).bits(), 0x0000_00FF_FE00_0000);
    }

    #[test]
    fn ul_flip_is_an_involution() {
        for first in [0x00u64, 0x02, 0xA8, 0xFF, 0x5C] {
            let flipped = (first ^ 0x02) ^ 0x02;
            assert_eq!(flipped, first);
        }
    }

    #[test]
    fn random_apparent_baseline() {
        assert!(expected_random_apparent(7_914_066_999) < 121_000.0);
        // Integer decomposition: 7,914,066,999 = 65536 * 120,759 + 5,175.
        let expect = 120_759.0 + 5_175.0 / 65536.0;
        assert!((expected_random_apparent(7_914_066_999) - expect).abs() < 1e-9);
        assert_eq!(expected_random_apparent(65_536), 1.0);
        assert_eq!(expected_random_apparent(0), 0.0);
    }

    #[test]
    fn vendor_resolution() {
        let mut db = OuiDb::new();
        db.insert("94:9f:3e".parse().unwrap(), "Sonos, Inc.");
        let sonos: Mac = "94:9f:3e:01:02:03".parse().unwrap();
        assert_eq!(resolve_vendor(sonos, &db), Some("Sonos, Inc."));
        // Absent from the registry entirely.
        let ghost: Mac = "f0:02:20:aa:bb:cc".parse().unwrap();
        assert_eq!(resolve_vendor(ghost, &db), None);
        assert_eq!(resolve_vendor(sonos, &OuiDb::new()), None);
    }

    #[test]
    fn vendor_is_pure_in_the_oui() {
        let mut db = OuiDb::new();
        db.insert("00:11:22".parse().unwrap(), "Acme");
        let a: Mac = "00:11:22:00:00:01".parse().unwrap();
        let b: Mac = "00:11:22:ff:ff:fe".parse().unwrap();
        assert_eq!(resolve_vendor(a, &db), resolve_vendor(b, &db));
    }

    #[test]
    fn registry_csv_roundtrip() {
        let csv = "Registry,Assignment,Organization Name,Organization Address\n\
                   MA-L,949F3E,\"Sonos, Inc.\",\"614 Chapala St Santa Barbara CA US\"\n\
                   MA-L,a8bbcc,Acme Widgets,Somewhere\n";
        let db = OuiDb::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(db.len(), 2);
        assert_eq!(db.lookup("94-9F-3E".parse().unwrap()), Some("Sonos, Inc."));
        assert_eq!(db.lookup("A8:BB:CC".parse().unwrap()), Some("Acme Widgets"));
        assert_eq!(db.lookup("f0:02:20".parse().unwrap()), None);
    }

    #[test]
    fn report_sorted_by_count_desc() {
        let mut db = OuiDb::new();
        db.insert("00:11:22".parse().unwrap(), "Acme, Inc.");
        let mut counts = HashMap::new();
        counts.insert("00:11:22:00:00:01".parse().unwrap(), 5);
        counts.insert("f0:02:20:00:00:01".parse().unwrap(), 9);
        counts.insert("00:11:22:00:00:02".parse().unwrap(), 5);
        let rows = mac_report(&counts, &db);
        assert_eq!(rows[0].mac.to_string(), "f0:02:20:00:00:01");
        assert_eq!(rows[0].vendor, UNLISTED);
        assert_eq!(rows[1].mac.to_string(), "00:11:22:00:00:01");
        let mut out = Vec::new();
        write_mac_report(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("mac,oui,vendor,count\n"));
        assert!(text.contains("f0:02:20:00:00:01,f0:02:20,Unlisted,9"));
        assert!(text.contains("00:11:22:00:00:01,00:11:22,\"Acme, Inc.\",5"));
    }

    proptest! {
        #[test]
        fn extract_embed_roundtrip(bits in 0u64..(1 << 48)) {
            let mac = Mac::from_bits(bits);
            prop_assert_eq!(extract_mac(embed_mac(mac)).unwrap(), mac);
        }

        #[test]
        fn embedded_iids_always_look_eui64(bits in 0u64..(1 << 48)) {
            prop_assert!(is_apparent_eui64(embed_mac(Mac::from_bits(bits))));
        }

        #[test]
        fn mac_text_roundtrip(bits in 0u64..(1 << 48)) {
            let mac = Mac::from_bits(bits);
            prop_assert_eq!(mac.to_string().parse::<Mac>().unwrap(), mac);
        }
    }
}
