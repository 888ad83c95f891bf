//! Linking wired MACs recovered from EUI-64 IIDs to geolocated WiFi BSSIDs.
//!
//! Vendors commonly assign a device's wired and wireless MACs at a small
//! constant offset within one OUI. Per OUI, every (wired MAC, BSSID) pair's
//! NIC offset is tallied; the most common positive and negative offsets are
//! taken and the better-supported of the two becomes the OUI's model,
//! provided enough pairs were seen. Applying a model to an extracted MAC
//! names the BSSID it should match, and the geo corpus supplies coordinates.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eui64::{Mac, Oui};
use crate::prefix_map::CountryCode;

/// A geolocated WiFi access-point radio MAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoBssid {
    pub bssid: Mac,
    pub lat: f64,
    pub lon: f64,
}

impl GeoBssid {
    pub fn new(bssid: Mac, lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Argument(format!(
                "coordinates out of range: {lat},{lon}"
            )));
        }
        Ok(GeoBssid { bssid, lat, lon })
    }
}

/// Loads a `bssid,lat,lon` CSV (optional header row).
pub fn load_geo_corpus(path: impl AsRef<Path>) -> Result<Vec<GeoBssid>> {
    read_geo_corpus(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn read_geo_corpus(reader: impl BufRead) -> Result<Vec<GeoBssid>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (i == 0 && trimmed.starts_with("bssid")) {
            continue;
        }
        let bad = |reason: String| Error::Line {
            line: i + 1,
            text: trimmed.to_string(),
            reason,
        };
        let mut fields = trimmed.split(',');
        let (Some(bssid), Some(lat), Some(lon)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected `bssid,lat,lon`".into()));
        };
        let bssid: Mac = bssid.parse().map_err(|e| bad(format!("{e}")))?;
        let lat: f64 = lat.parse().map_err(|_| bad("bad latitude".into()))?;
        let lon: f64 = lon.parse().map_err(|_| bad("bad longitude".into()))?;
        out.push(GeoBssid::new(bssid, lat, lon).map_err(|e| bad(format!("{e}")))?);
    }
    Ok(out)
}

/// Offset tallies for one OUI: histogram over signed NIC offsets plus the
/// number of pairs evaluated.
#[derive(Debug, Clone, Default)]
pub struct OffsetHistogram {
    pub counts: BTreeMap<i32, u64>,
    pub pair_count: u64,
}

/// Records `bssid.nic() - wired.nic()` for every pair sharing the OUI.
/// Inputs from other OUIs are ignored.
pub fn tally_offsets(wired: &[Mac], bssids: &[Mac], oui: Oui) -> OffsetHistogram {
    let wired: Vec<i64> = wired
        .iter()
        .filter(|m| m.oui() == oui)
        .map(|m| i64::from(m.nic()))
        .collect();
    let mut hist = OffsetHistogram::default();
    for bssid in bssids.iter().filter(|b| b.oui() == oui) {
        let b = i64::from(bssid.nic());
        for &w in &wired {
            let offset = (b - w) as i32;
            *hist.counts.entry(offset).or_insert(0) += 1;
            hist.pair_count += 1;
        }
    }
    hist
}

/// The inferred wired-to-BSSID offset for one OUI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OffsetModel {
    pub oui: Oui,
    /// Signed offset applied to the 24-bit NIC portion.
    pub offset: i32,
    /// Pairs matched at this offset.
    pub support: u64,
    /// Total pairs evaluated in the OUI.
    pub pair_count: u64,
}

/// Picks the modal positive and modal negative offsets and keeps whichever
/// has more support (ties: smaller magnitude, then positive). No model is
/// emitted below `min_pairs` evaluated pairs.
pub fn infer_offset(hist: &OffsetHistogram, oui: Oui, min_pairs: u64) -> Option<OffsetModel> {
    if hist.pair_count < min_pairs {
        return None;
    }
    // Within a side, ties resolve toward the smaller magnitude.
    let side_mode = |pred: fn(i32) -> bool| {
        hist.counts
            .iter()
            .filter(|&(&off, _)| pred(off))
            .map(|(&off, &count)| (off, count))
            .max_by(|a, b| {
                a.1.cmp(&b.1)
                    .then(b.0.unsigned_abs().cmp(&a.0.unsigned_abs()))
            })
    };
    let positive = side_mode(|o| o >= 0);
    let negative = side_mode(|o| o < 0);

    let (offset, support) = match (positive, negative) {
        (Some(p), Some(n)) => {
            if p.1 > n.1 {
                p
            } else if n.1 > p.1 {
                n
            } else if p.0.unsigned_abs() != n.0.unsigned_abs() {
                if p.0.unsigned_abs() < n.0.unsigned_abs() { p } else { n }
            } else {
                p // equal support, equal magnitude: positive wins
            }
        }
        (Some(p), None) => p,
        (None, Some(n)) => n,
        (None, None) => return None,
    };
    debug_assert!(support <= hist.pair_count);
    Some(OffsetModel {
        oui,
        offset,
        support,
        pair_count: hist.pair_count,
    })
}

/// Applies a model to a MAC in the same OUI. Offsets never wrap across OUI
/// boundaries: a NIC leaving `0..2^24` yields no candidate.
pub fn apply_offset(mac: Mac, model: &OffsetModel) -> Result<Option<Mac>> {
    if mac.oui() != model.oui {
        return Err(Error::Argument(format!(
            "MAC {mac} is not in OUI {}",
            model.oui
        )));
    }
    let nic = i64::from(mac.nic()) + i64::from(model.offset);
    if !(0..1 << 24).contains(&nic) {
        return Ok(None);
    }
    Ok(Some(Mac::from_parts(model.oui, nic as u32)))
}

/// One successfully geolocated MAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoResult {
    pub mac: Mac,
    pub bssid: Mac,
    pub lat: f64,
    pub lon: f64,
    pub model: OffsetModel,
}

/// Coarse reverse-geocode grid: integer-degree cells to country codes.
#[derive(Debug, Default)]
pub struct GeoGrid {
    cells: HashMap<(i16, i16), CountryCode>,
}

impl GeoGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_cell(&mut self, lat_floor: i16, lon_floor: i16, country: CountryCode) {
        self.cells.insert((lat_floor, lon_floor), country);
    }

    pub fn lookup(&self, lat: f64, lon: f64) -> Option<CountryCode> {
        self.cells
            .get(&(lat.floor() as i16, lon.floor() as i16))
            .copied()
    }

    /// Loads `lat,lon,iso2` rows of integer cell corners.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut grid = GeoGrid::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || (i == 0 && trimmed.starts_with("lat")) {
                continue;
            }
            let bad = |reason: &str| Error::Line {
                line: i + 1,
                text: trimmed.to_string(),
                reason: reason.to_string(),
            };
            let mut fields = trimmed.split(',');
            let (Some(lat), Some(lon), Some(cc)) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(bad("expected `lat,lon,iso2`"));
            };
            let lat: i16 = lat.parse().map_err(|_| bad("bad lat"))?;
            let lon: i16 = lon.parse().map_err(|_| bad("bad lon"))?;
            let cc: CountryCode = cc.parse().map_err(|_| bad("bad country"))?;
            grid.insert_cell(lat, lon, cc);
        }
        Ok(grid)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub const UNKNOWN_COUNTRY: &str = "??";

/// Matches every extracted MAC that has an applicable model against the geo
/// corpus, producing placements plus a per-country tally (via the optional
/// reverse-geocode grid; unresolvable placements count under `??`).
pub fn geolocate_corpus(
    macs: impl IntoIterator<Item = Mac>,
    geo: &[GeoBssid],
    models: &BTreeMap<Oui, OffsetModel>,
    grid: Option<&GeoGrid>,
) -> (Vec<GeoResult>, BTreeMap<String, u64>) {
    let index: HashMap<Mac, (f64, f64)> = geo
        .iter()
        .map(|g| (g.bssid, (g.lat, g.lon)))
        .collect();
    let mut results = Vec::new();
    let mut countries: BTreeMap<String, u64> = BTreeMap::new();
    for mac in macs {
        let Some(model) = models.get(&mac.oui()) else {
            continue;
        };
        let Ok(Some(bssid)) = apply_offset(mac, model) else {
            continue;
        };
        let Some(&(lat, lon)) = index.get(&bssid) else {
            continue;
        };
        results.push(GeoResult {
            mac,
            bssid,
            lat,
            lon,
            model: *model,
        });
        let country = grid
            .and_then(|g| g.lookup(lat, lon))
            .map_or_else(|| UNKNOWN_COUNTRY.to_string(), |c| c.to_string());
        *countries.entry(country).or_insert(0) += 1;
    }
    (results, countries)
}

/// Writes the model file: `oui,offset,support,pair_count`.
pub fn write_models(mut w: impl Write, models: &BTreeMap<Oui, OffsetModel>) -> std::io::Result<()> {
    writeln!(w, "oui,offset,support,pair_count")?;
    for m in models.values() {
        writeln!(w, "{},{},{},{}", m.oui, m.offset, m.support, m.pair_count)?;
    }
    Ok(())
}

/// Reads a model file written by [`write_models`].
pub fn read_models(reader: impl BufRead) -> Result<BTreeMap<Oui, OffsetModel>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (i == 0 && trimmed.starts_with("oui")) {
            continue;
        }
        let bad = |reason: &str| Error::Line {
            line: i + 1,
            text: trimmed.to_string(),
            reason: reason.to_string(),
        };
        let mut fields = trimmed.split(',');
        let (Some(oui), Some(offset), Some(support), Some(pairs)) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected `oui,offset,support,pair_count`"));
        };
        let oui: Oui = oui.parse().map_err(|_| bad("bad oui"))?;
        let offset: i32 = offset.parse().map_err(|_| bad("bad offset"))?;
        let support: u64 = support.parse().map_err(|_| bad("bad support"))?;
        let pair_count: u64 = pairs.parse().map_err(|_| bad("bad pair count"))?;
        out.insert(
            oui,
            OffsetModel {
                oui,
                offset,
                support,
                pair_count,
            },
        );
    }
    Ok(out)
}

/// Writes placement results: `mac,bssid,lat,lon,oui,offset`.
pub fn write_geo_results(mut w: impl Write, results: &[GeoResult]) -> std::io::Result<()> {
    writeln!(w, "mac,bssid,lat,lon,oui,offset")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.mac, r.bssid, r.lat, r.lon, r.model.oui, r.model.offset
        )?;
    }
    Ok(())
}

/// Writes the per-country tally: `country,count`.
pub fn write_country_tally(
    mut w: impl Write,
    countries: &BTreeMap<String, u64>,
) -> std::io::Result<()> {
    writeln!(w, "country,count")?;
    for (country, count) in countries {
        writeln!(w, "{country},{count}")?;
    }
    Ok(())
}
