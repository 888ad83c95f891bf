//! Synthetic observation-corpus generation with planted ground truth.
//!
//! A scenario plants ASes, device populations with addressing strategies,
//! prefix rotation, cross-AS mobility, aliased /64s, and per-OUI BSSID
//! offsets. Generation is deterministic for a fixed seed and emits every
//! input file the analysis pipeline consumes, together with a ground-truth
//! record computed by a straight-line restatement of the classification
//! rules (see [`rules`]) that deliberately shares no code with the pipeline
//! implementations it is used to check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::addr::{Ip6, Prefix};
use crate::error::{Error, Result};
use crate::eui64::{Mac, Oui};
use crate::geolink::GeoBssid;
use crate::prefix_map::CountryCode;
use crate::tracking::Observation;

/// One addressing strategy with its mix weight inside an AS.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Eui64Slaac,
    RandomPrivacy,
    LowByte,
    #[serde(rename = "low_2_bytes")]
    Low2Bytes,
    Zeroes,
    Ipv4EmbeddedHexLow32,
    Ipv4EmbeddedDecimalHextets,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Eui64Slaac => "eui64_slaac",
            StrategyKind::RandomPrivacy => "random_privacy",
            StrategyKind::LowByte => "low_byte",
            StrategyKind::Low2Bytes => "low_2_bytes",
            StrategyKind::Zeroes => "zeroes",
            StrategyKind::Ipv4EmbeddedHexLow32 => "ipv4_embedded_hex_low32",
            StrategyKind::Ipv4EmbeddedDecimalHextets => "ipv4_embedded_decimal_hextets",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One autonomous system in the scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsSpec {
    pub asn: u32,
    pub country: String,
    /// IPv6 pools the AS carves device /64s from (lengths 16..=64).
    pub v6_prefixes: Vec<String>,
    /// IPv4 pools backing embedded-address strategies.
    #[serde(default)]
    pub v4_prefixes: Vec<String>,
    pub strategies: Vec<StrategySpec>,
    /// When set, every device's /64 changes each period.
    #[serde(default)]
    pub rotation_period_secs: Option<u64>,
    pub devices: usize,
    /// Fraction of this AS's devices whose home /64 is planted aliased.
    #[serde(default)]
    pub alias_device_fraction: f64,
}

/// A device's AS membership changing over time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MobilitySpec {
    pub device: usize,
    pub schedule: Vec<MobilityStep>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MobilityStep {
    pub start_secs: u64,
    pub asn: u32,
}

/// A planted OUI: vendor name, wired-to-BSSID NIC offset, and uniform decoy
/// BSSIDs mixed into the geo corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuiSpec {
    pub oui: String,
    pub vendor: String,
    pub bssid_offset: i32,
    #[serde(default)]
    pub decoy_bssids: usize,
    /// Caps how many devices draw MACs from this OUI (round-robin skips a
    /// full OUI).
    #[serde(default)]
    pub device_cap: Option<usize>,
}

fn default_rate() -> f64 {
    4.0
}

fn default_known_fraction() -> f64 {
    1.0
}

fn default_vantages() -> usize {
    5
}

fn default_threshold_count() -> u64 {
    100
}

fn default_threshold_frac() -> f64 {
    0.10
}

/// Full scenario description, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub duration_secs: u64,
    /// Mean sightings per device per day for the Poisson schedule.
    #[serde(default = "default_rate")]
    pub sighting_rate_per_day: f64,
    /// Fixed sighting interval; overrides the Poisson schedule when set.
    #[serde(default)]
    pub sighting_interval_secs: Option<u64>,
    pub ases: Vec<AsSpec>,
    #[serde(default)]
    pub mobility: Vec<MobilitySpec>,
    /// Extra /64s planted aliased beyond per-AS device fractions.
    #[serde(default)]
    pub aliased_64s: Vec<String>,
    /// Share of the planted aliased list exposed as the "known" external list.
    #[serde(default = "default_known_fraction")]
    pub alias_known_fraction: f64,
    #[serde(default)]
    pub ouis: Vec<OuiSpec>,
    #[serde(default = "default_vantages")]
    pub vantages: usize,
    /// IPv4-embedding acceptance thresholds mirrored into the ground truth.
    #[serde(default = "default_threshold_count")]
    pub threshold_count: u64,
    #[serde(default = "default_threshold_frac")]
    pub threshold_frac: f64,
}

impl ScenarioSpec {
    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}

/// Straight-line restatements of the classification decision tables used to
/// compute ground truth. Kept textually separate from the pipeline modules
/// so the two can check each other.
mod rules {
    /// Normalized nibble entropy via string formatting and a count-based
    /// formulation.
    pub fn entropy(iid: u64) -> f64 {
        let hex = format!("{iid:016x}");
        let mut counts: std::collections::BTreeMap<char, u32> = std::collections::BTreeMap::new();
        for c in hex.chars() {
            *counts.entry(c).or_insert(0) += 1;
        }
        let h: f64 = counts
            .values()
            .map(|&c| f64::from(c) / 16.0 * (16.0 / f64::from(c)).log2())
            .sum();
        h / 4.0
    }

    /// The three embedded-IPv4 readings of an IID, as raw u32 values.
    pub fn candidates(iid: u64) -> Vec<u32> {
        let mut out = Vec::new();
        let low = (iid & 0xFFFF_FFFF) as u32;
        if low != 0 {
            out.push(low);
        }
        // Hex renderings of the four hextets must read as decimal octets.
        let hextets = [
            (iid >> 48) & 0xFFFF,
            (iid >> 32) & 0xFFFF,
            (iid >> 16) & 0xFFFF,
            iid & 0xFFFF,
        ];
        let mut decimal = Some(0u32);
        for h in hextets {
            let text = format!("{h:x}");
            match (text.chars().all(|c| c.is_ascii_digit()), text.parse::<u32>()) {
                (true, Ok(octet)) if octet <= 255 => {
                    decimal = decimal.map(|acc| (acc << 8) | octet);
                }
                _ => decimal = None,
            }
            if decimal.is_none() {
                break;
            }
        }
        if let Some(v4) = decimal
            && v4 != 0
        {
            out.push(v4);
        }
        let high = (iid >> 32) as u32;
        if high != 0 {
            out.push(high);
        }
        out
    }

    /// Category name under the structural > ipv4 > entropy precedence.
    pub fn category(iid: u64, ipv4_accepted: bool) -> &'static str {
        if iid == 0 {
            return "zeroes";
        }
        if iid <= 0xFF {
            return "low_byte";
        }
        if iid <= 0xFFFF {
            return "low_2_bytes";
        }
        if ipv4_accepted {
            return "ipv4_mapped";
        }
        let h = entropy(iid);
        if h > 0.75 {
            "high_entropy"
        } else if h < 0.25 {
            "low_entropy"
        } else {
            "medium_entropy"
        }
    }

    /// Track class name from the raw feature counts.
    pub fn track_class(as_count: u64, cc_count: u64, transitions: u64, p64: u64) -> &'static str {
        if p64 <= 1 {
            return "not_trackable";
        }
        let as_high = as_count > 1;
        let cc_high = cc_count > 1;
        let tr_high = transitions > 10;
        if !as_high && !cc_high && !tr_high {
            return "mostly_static";
        }
        if !as_high && !cc_high && tr_high {
            return "prefix_reassignment";
        }
        if as_high && cc_high && tr_high {
            return "mac_reuse";
        }
        if as_high && !cc_high && !tr_high {
            return "changing_providers";
        }
        if as_high && !cc_high && tr_high {
            return "user_movement";
        }
        "ambiguous"
    }
}

/// Ground truth for one planted device.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceTruth {
    pub id: usize,
    pub home_asn: u32,
    pub home_country: String,
    pub strategy: StrategyKind,
    pub mac: Option<String>,
    /// Category of the device's home-AS addresses; per-address truth is in
    /// `GroundTruth::addresses`.
    pub category: Option<String>,
    /// Only EUI-64 devices build timelines.
    pub track_class: Option<String>,
    pub transitions: u64,
    pub prefixes64: Vec<String>,
    pub sightings: u64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    /// Whether the geolocation stage should place this device, assuming its
    /// OUI clears the pair minimum.
    pub geo_expected: bool,
}

/// Per-address ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AddressTruth {
    pub device: usize,
    pub asn: u32,
    pub category: String,
}

/// Planted facts about one OUI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuiTruth {
    pub offset: i32,
    /// Distinct wired MACs that appear in the corpus.
    pub wired: u64,
    /// BSSIDs in the geo corpus (true pairs plus decoys).
    pub bssids: u64,
    /// Pairs an offset tally over this OUI will evaluate.
    pub pair_count: u64,
}

/// Everything the generator knows to be true about its output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub devices: Vec<DeviceTruth>,
    pub addresses: BTreeMap<String, AddressTruth>,
    pub aliased_64s: Vec<String>,
    pub known_aliased_64s: Vec<String>,
    /// Aliased /64s that actually contain observed client addresses: the
    /// exact verdict set backscanning should infer.
    pub expected_alias_verdict_64s: Vec<String>,
    pub ouis: BTreeMap<String, OuiTruth>,
    pub observation_count: u64,
    pub unique_addresses: u64,
    pub unique_48s: u64,
    pub unique_64s: u64,
    pub singleton_address_fraction: f64,
    pub per_as_addresses: BTreeMap<u32, u64>,
    pub accepted_ipv4_ases: Vec<u32>,
}

impl GroundTruth {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }
}

/// The generated corpus plus every input file the pipeline consumes.
#[derive(Debug)]
pub struct SynthOutput {
    pub observations: Vec<Observation>,
    pub truth: GroundTruth,
    pub geo: Vec<GeoBssid>,
    pub oui_registry: Vec<(Oui, String)>,
    pub asn_lines: Vec<String>,
    pub country_lines: Vec<String>,
    pub alias_truth: Vec<Prefix>,
    pub alias_known: Vec<Prefix>,
    pub geo_grid: Vec<(i16, i16, CountryCode)>,
}

/// Paths written by [`SynthOutput::write_dir`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub observations: PathBuf,
    pub asn_file: PathBuf,
    pub country_file: PathBuf,
    pub alias_truth_file: PathBuf,
    pub alias_known_file: PathBuf,
    pub oui_file: PathBuf,
    pub geo_file: PathBuf,
    pub geo_grid_file: PathBuf,
    pub truth_file: PathBuf,
}

impl SynthOutput {
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<SynthPaths> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let paths = SynthPaths {
            observations: dir.join("observations.csv"),
            asn_file: dir.join("pfx2as.txt"),
            country_file: dir.join("countries.csv"),
            alias_truth_file: dir.join("aliased_truth.txt"),
            alias_known_file: dir.join("aliased_known.txt"),
            oui_file: dir.join("oui_registry.csv"),
            geo_file: dir.join("geo_bssids.csv"),
            geo_grid_file: dir.join("geo_grid.csv"),
            truth_file: dir.join("ground_truth.json"),
        };

        let mut w = std::io::BufWriter::new(std::fs::File::create(&paths.observations)?);
        for o in &self.observations {
            writeln!(w, "{},{},{}", o.ts, o.addr, o.vantage)?;
        }
        w.flush()?;

        std::fs::write(&paths.asn_file, self.asn_lines.join("\n") + "\n")?;
        std::fs::write(&paths.country_file, self.country_lines.join("\n") + "\n")?;

        let render = |prefixes: &[Prefix]| {
            prefixes
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join("\n")
                + "\n"
        };
        std::fs::write(&paths.alias_truth_file, render(&self.alias_truth))?;
        std::fs::write(&paths.alias_known_file, render(&self.alias_known))?;

        let mut w = std::io::BufWriter::new(std::fs::File::create(&paths.oui_file)?);
        writeln!(w, "Registry,Assignment,Organization Name,Organization Address")?;
        for (oui, vendor) in &self.oui_registry {
            let hex = format!("{:06X}", oui.bits());
            writeln!(w, "MA-L,{hex},\"{vendor}\",\"\"")?;
        }
        w.flush()?;

        let mut w = std::io::BufWriter::new(std::fs::File::create(&paths.geo_file)?);
        writeln!(w, "bssid,lat,lon")?;
        for g in &self.geo {
            writeln!(w, "{},{},{}", g.bssid, g.lat, g.lon)?;
        }
        w.flush()?;

        let mut w = std::io::BufWriter::new(std::fs::File::create(&paths.geo_grid_file)?);
        writeln!(w, "lat,lon,country")?;
        for (lat, lon, cc) in &self.geo_grid {
            writeln!(w, "{lat},{lon},{cc}")?;
        }
        w.flush()?;

        let w = std::io::BufWriter::new(std::fs::File::create(&paths.truth_file)?);
        serde_json::to_writer_pretty(w, &self.truth)?;
        Ok(paths)
    }
}

fn scenario_err(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

struct V4Pool {
    base: u32,
    len: u8,
}

impl V4Pool {
    fn capacity(&self) -> u64 {
        1u64 << (32 - self.len)
    }

    fn contains(&self, addr: u32) -> bool {
        let mask = if self.len == 0 { 0 } else { !0u32 << (32 - self.len) };
        addr & mask == self.base
    }
}

struct AsState {
    spec: AsSpec,
    country: CountryCode,
    v6_pools: Vec<Prefix>,
    v4_pools: Vec<V4Pool>,
    epochs: u64,
    /// device id -> slot index for /64 allocation
    slots: BTreeMap<usize, u64>,
}

impl AsState {
    fn subnet_capacity(&self) -> u128 {
        self.v6_pools
            .iter()
            .map(|p| 1u128 << (64 - u32::from(p.len())))
            .sum()
    }

    fn net64(&self, device: usize, epoch: u64) -> u128 {
        let slot = self.slots[&device];
        let mut idx = u128::from(slot * self.epochs + epoch);
        for pool in &self.v6_pools {
            let cap = 1u128 << (64 - u32::from(pool.len()));
            if idx < cap {
                return pool.base().bits() | (idx << 64);
            }
            idx -= cap;
        }
        unreachable!("slot allocation validated against capacity");
    }
}

struct DevicePlan {
    id: usize,
    home_asn: u32,
    strategy: StrategyKind,
    mac: Option<Mac>,
    oui_idx: Option<usize>,
    v4: Option<u32>,
    fixed_iid: Option<u64>,
    schedule: Vec<MobilityStep>,
    lat: Option<f64>,
    lon: Option<f64>,
}

impl DevicePlan {
    fn asn_at(&self, t: u64) -> u32 {
        let mut asn = self.home_asn;
        for step in &self.schedule {
            if step.start_secs <= t {
                asn = step.asn;
            } else {
                break;
            }
        }
        asn
    }
}

fn device_seed(master: u64, id: usize) -> u64 {
    let mut x = master ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Whether an embedded MAC's IID entropy sits too close to a band boundary
/// for exact-recovery testing.
fn near_band_boundary(iid: u64) -> bool {
    let e = rules::entropy(iid);
    (e - 0.25).abs() < 1e-6 || (e - 0.75).abs() < 1e-6
}

fn hextet_of_decimal(octet: u32) -> u64 {
    u64::from((octet / 100) << 8 | (octet / 10 % 10) << 4 | (octet % 10))
}

/// Generates the corpus, ground truth, geo corpus, and prefix files for a
/// scenario. Byte-identical outputs for identical scenarios.
pub fn generate_corpus(spec: &ScenarioSpec) -> Result<SynthOutput> {
    validate(spec)?;

    let mut ases: BTreeMap<u32, AsState> = BTreeMap::new();
    for as_spec in &spec.ases {
        let epochs = match as_spec.rotation_period_secs {
            Some(p) => (spec.duration_secs - 1) / p + 1,
            None => 1,
        };
        ases.insert(
            as_spec.asn,
            AsState {
                country: as_spec.country.parse().map_err(|_| {
                    scenario_err(format!("AS{}: bad country {:?}", as_spec.asn, as_spec.country))
                })?,
                v6_pools: parse_pools(as_spec)?,
                v4_pools: parse_v4_pools(as_spec)?,
                epochs,
                slots: BTreeMap::new(),
                spec: as_spec.clone(),
            },
        );
    }

    // Device planning: ids are sequential over the AS list.
    let mobility_by_device: BTreeMap<usize, &MobilitySpec> =
        spec.mobility.iter().map(|m| (m.device, m)).collect();
    let total_devices: usize = spec.ases.iter().map(|a| a.devices).sum();
    for m in &spec.mobility {
        if m.device >= total_devices {
            return Err(scenario_err(format!(
                "mobility references device {} of {total_devices}",
                m.device
            )));
        }
        for step in &m.schedule {
            if !ases.contains_key(&step.asn) {
                return Err(scenario_err(format!(
                    "mobility references unknown AS{}",
                    step.asn
                )));
            }
        }
    }

    let ouis: Vec<(Oui, &OuiSpec)> = spec
        .ouis
        .iter()
        .map(|o| o.oui.parse::<Oui>().map(|p| (p, o)))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| scenario_err(format!("bad oui: {e}")))?;

    let mut devices: Vec<DevicePlan> = Vec::with_capacity(total_devices);
    let mut oui_cycle = 0usize;
    let mut oui_assigned: Vec<usize> = vec![0; ouis.len()];
    let mut oui_nic_next: Vec<u32> = ouis
        .iter()
        .map(|(_, o)| if o.bssid_offset < 0 { o.bssid_offset.unsigned_abs() + 0x1000 } else { 0x1000 })
        .collect();
    let mut per_as_embedded: BTreeMap<u32, u64> = BTreeMap::new();
    let mut per_as_low: BTreeMap<u32, u64> = BTreeMap::new();

    let mut id = 0usize;
    for as_spec in &spec.ases {
        let strategy_of = strategy_quota(&as_spec.strategies, as_spec.devices);
        for &strategy in &strategy_of {
            let mut plan = DevicePlan {
                id,
                home_asn: as_spec.asn,
                strategy,
                mac: None,
                oui_idx: None,
                v4: None,
                fixed_iid: None,
                schedule: mobility_by_device
                    .get(&id)
                    .map(|m| m.schedule.clone())
                    .unwrap_or_default(),
                lat: None,
                lon: None,
            };
            match strategy {
                StrategyKind::Eui64Slaac => {
                    if ouis.is_empty() {
                        return Err(scenario_err(
                            "eui64_slaac strategy requires at least one planted OUI",
                        ));
                    }
                    // Round-robin over OUIs, skipping any at its device cap.
                    let mut probed = 0;
                    let oui_idx = loop {
                        if probed == ouis.len() {
                            return Err(scenario_err(
                                "all planted OUIs are at their device caps",
                            ));
                        }
                        let idx = oui_cycle % ouis.len();
                        oui_cycle += 1;
                        probed += 1;
                        let cap = ouis[idx].1.device_cap.unwrap_or(usize::MAX);
                        if oui_assigned[idx] < cap {
                            oui_assigned[idx] += 1;
                            break idx;
                        }
                    };
                    let (oui, oui_spec) = ouis[oui_idx];
                    let mac = loop {
                        let nic = oui_nic_next[oui_idx];
                        oui_nic_next[oui_idx] += 1;
                        let bssid_nic = i64::from(nic) + i64::from(oui_spec.bssid_offset);
                        if !(0..1 << 24).contains(&bssid_nic) || nic >= 1 << 24 {
                            return Err(scenario_err(format!(
                                "OUI {} NIC space exhausted for offset {}",
                                oui_spec.oui, oui_spec.bssid_offset
                            )));
                        }
                        let mac = Mac::from_parts(oui, nic);
                        if !near_band_boundary(crate::eui64::embed_mac(mac).bits()) {
                            break mac;
                        }
                    };
                    plan.mac = Some(mac);
                    plan.oui_idx = Some(oui_idx);
                    plan.fixed_iid = Some(crate::eui64::embed_mac(mac).bits());
                }
                StrategyKind::LowByte => {
                    let ord = per_as_low.entry(as_spec.asn).or_insert(0);
                    plan.fixed_iid = Some(1 + (*ord % 255));
                    *ord += 1;
                }
                StrategyKind::Low2Bytes => {
                    let ord = per_as_low.entry(as_spec.asn).or_insert(0);
                    plan.fixed_iid = Some(256 + (*ord % 65280));
                    *ord += 1;
                }
                StrategyKind::Zeroes => plan.fixed_iid = Some(0),
                StrategyKind::Ipv4EmbeddedHexLow32 | StrategyKind::Ipv4EmbeddedDecimalHextets => {
                    let state = &ases[&as_spec.asn];
                    let ord = per_as_embedded.entry(as_spec.asn).or_insert(0);
                    let v4 = allocate_v4(&state.v4_pools, *ord).ok_or_else(|| {
                        scenario_err(format!("AS{}: IPv4 pool exhausted", as_spec.asn))
                    })?;
                    *ord += 1;
                    plan.v4 = Some(v4);
                    plan.fixed_iid = Some(match strategy {
                        StrategyKind::Ipv4EmbeddedHexLow32 => u64::from(v4),
                        _ => {
                            let [a, b, c, d] = v4.to_be_bytes();
                            hextet_of_decimal(a.into()) << 48
                                | hextet_of_decimal(b.into()) << 32
                                | hextet_of_decimal(c.into()) << 16
                                | hextet_of_decimal(d.into())
                        }
                    });
                }
                StrategyKind::RandomPrivacy => {}
            }
            devices.push(plan);
            id += 1;
        }
    }

    // Slot allocation: native devices first, then visitors in id order.
    let mut next_slot: BTreeMap<u32, u64> = ases.keys().map(|&a| (a, 0)).collect();
    for device in &devices {
        let state = ases.get_mut(&device.home_asn).expect("validated");
        let slot = next_slot.get_mut(&device.home_asn).unwrap();
        state.slots.insert(device.id, *slot);
        *slot += 1;
    }
    for device in &devices {
        for step in &device.schedule {
            let state = ases.get_mut(&step.asn).expect("validated");
            if let std::collections::btree_map::Entry::Vacant(e) = state.slots.entry(device.id) {
                let slot = next_slot.get_mut(&step.asn).unwrap();
                e.insert(*slot);
                *slot += 1;
            }
        }
    }
    for state in ases.values() {
        let needed = u128::from(next_slot[&state.spec.asn]) * u128::from(state.epochs);
        if needed > state.subnet_capacity() {
            return Err(scenario_err(format!(
                "AS{}: {needed} /64s needed exceed pool capacity {}",
                state.spec.asn,
                state.subnet_capacity()
            )));
        }
    }

    // Country cells for device coordinates.
    let countries: Vec<CountryCode> = {
        let set: BTreeSet<CountryCode> = ases.values().map(|s| s.country).collect();
        set.into_iter().collect()
    };
    let cell_of = |cc: CountryCode| -> (i16, i16) {
        let k = countries.iter().position(|c| *c == cc).expect("known") as i16;
        (-60 + (6 * k) % 120, -170 + (14 * k) % 340)
    };

    let all_v4_pools: Vec<&V4Pool> = ases.values().flat_map(|s| s.v4_pools.iter()).collect();

    // Emission.
    let mut emitted: Vec<Emitted> = Vec::new();

    for device in &mut devices {
        let mut rng = ChaCha12Rng::seed_from_u64(device_seed(spec.seed, device.id));
        let times = sighting_times(spec, &mut rng);
        if device.strategy == StrategyKind::Eui64Slaac {
            let cc = ases[&device.home_asn].country;
            let (lat_floor, lon_floor) = cell_of(cc);
            device.lat = Some(f64::from(lat_floor) + 0.05 + 0.9 * rng.random::<f64>());
            device.lon = Some(f64::from(lon_floor) + 0.05 + 0.9 * rng.random::<f64>());
        }
        for t in times {
            let asn = device.asn_at(t);
            let state = &ases[&asn];
            let epoch = match state.spec.rotation_period_secs {
                Some(p) => t / p,
                None => 0,
            };
            let net = state.net64(device.id, epoch);
            let iid = match device.fixed_iid {
                Some(iid) => iid,
                None => draw_random_iid(&mut rng, &all_v4_pools),
            };
            emitted.push(Emitted {
                ts: t,
                bits: net | u128::from(iid),
                vantage: rng.random_range(0..spec.vantages),
                device: device.id,
                asn,
                country: state.country,
            });
        }
    }

    emitted.sort_by_key(|e| (e.ts, e.bits, e.vantage));

    // Ground truth over the emitted records.
    let truth = compute_truth(spec, &ases, &devices, &emitted, &ouis)?;

    // Geo corpus: true BSSIDs for planted devices, then per-OUI decoys.
    let mut geo: Vec<GeoBssid> = Vec::new();
    let mut true_bssids: BTreeSet<Mac> = BTreeSet::new();
    for device in &devices {
        let (Some(mac), Some(oui_idx)) = (device.mac, device.oui_idx) else {
            continue;
        };
        let offset = ouis[oui_idx].1.bssid_offset;
        let bssid = Mac::from_parts(
            mac.oui(),
            (i64::from(mac.nic()) + i64::from(offset)) as u32,
        );
        if true_bssids.insert(bssid) {
            geo.push(GeoBssid::new(bssid, device.lat.unwrap(), device.lon.unwrap())?);
        }
    }
    let mut decoy_rng = ChaCha12Rng::seed_from_u64(spec.seed ^ 0x6E0C_0DE5);
    for (oui, oui_spec) in &ouis {
        let mut placed = 0;
        while placed < oui_spec.decoy_bssids {
            let nic = decoy_rng.random_range(0u32..1 << 24);
            let bssid = Mac::from_parts(*oui, nic);
            if !true_bssids.insert(bssid) {
                continue;
            }
            let lat = -55.0 + 110.0 * decoy_rng.random::<f64>();
            let lon = -165.0 + 330.0 * decoy_rng.random::<f64>();
            geo.push(GeoBssid::new(bssid, lat, lon)?);
            placed += 1;
        }
    }

    // Prefix files.
    let mut asn_lines = Vec::new();
    let mut country_lines = Vec::new();
    for state in ases.values() {
        for pool in &state.v6_pools {
            asn_lines.push(format!("{pool} {}", state.spec.asn));
            country_lines.push(format!("{pool},{}", state.country));
        }
        for pool in &state.v4_pools {
            asn_lines.push(format!(
                "{}/{} {}",
                crate::prefix_map::v4_to_string(pool.base),
                pool.len,
                state.spec.asn
            ));
        }
    }

    let alias_truth: Vec<Prefix> = truth
        .aliased_64s
        .iter()
        .map(|s| s.parse().expect("rendered by us"))
        .collect();
    let alias_known: Vec<Prefix> = truth
        .known_aliased_64s
        .iter()
        .map(|s| s.parse().expect("rendered by us"))
        .collect();

    let geo_grid: Vec<(i16, i16, CountryCode)> = countries
        .iter()
        .map(|&cc| {
            let (lat, lon) = cell_of(cc);
            (lat, lon, cc)
        })
        .collect();

    let observations = emitted
        .iter()
        .map(|e| Observation {
            ts: e.ts,
            addr: Ip6::from_bits(e.bits),
            vantage: format!("vp-{:02}", e.vantage),
        })
        .collect();

    Ok(SynthOutput {
        observations,
        truth,
        geo,
        oui_registry: ouis
            .iter()
            .map(|(oui, o)| (*oui, o.vendor.clone()))
            .collect(),
        asn_lines,
        country_lines,
        alias_truth,
        alias_known,
        geo_grid,
    })
}

fn parse_pools(as_spec: &AsSpec) -> Result<Vec<Prefix>> {
    let mut pools = Vec::new();
    for text in &as_spec.v6_prefixes {
        let p: Prefix = text
            .parse()
            .map_err(|e| scenario_err(format!("AS{}: {e}", as_spec.asn)))?;
        if !(16..=64).contains(&p.len()) {
            return Err(scenario_err(format!(
                "AS{}: pool {p} length must be in 16..=64",
                as_spec.asn
            )));
        }
        pools.push(p);
    }
    if pools.is_empty() {
        return Err(scenario_err(format!("AS{}: no IPv6 pools", as_spec.asn)));
    }
    Ok(pools)
}

fn parse_v4_pools(as_spec: &AsSpec) -> Result<Vec<V4Pool>> {
    let mut pools = Vec::new();
    for text in &as_spec.v4_prefixes {
        let (addr_text, len_text) = text
            .rsplit_once('/')
            .ok_or_else(|| scenario_err(format!("AS{}: bad v4 pool {text:?}", as_spec.asn)))?;
        let base = crate::prefix_map::parse_v4(addr_text)
            .ok_or_else(|| scenario_err(format!("AS{}: bad v4 pool {text:?}", as_spec.asn)))?;
        let len: u8 = len_text
            .parse()
            .map_err(|_| scenario_err(format!("AS{}: bad v4 pool {text:?}", as_spec.asn)))?;
        if len > 32 {
            return Err(scenario_err(format!("AS{}: bad v4 length {len}", as_spec.asn)));
        }
        if base >> 24 == 0 {
            return Err(scenario_err(format!(
                "AS{}: v4 pool {text:?} must not start in 0.0.0.0/8",
                as_spec.asn
            )));
        }
        let mask = if len == 0 { 0 } else { !0u32 << (32 - len) };
        pools.push(V4Pool {
            base: base & mask,
            len,
        });
    }
    Ok(pools)
}

fn allocate_v4(pools: &[V4Pool], ordinal: u64) -> Option<u32> {
    let mut idx = ordinal;
    for pool in pools {
        if idx < pool.capacity() {
            return Some(pool.base + idx as u32);
        }
        idx -= pool.capacity();
    }
    None
}

/// Largest-remainder quota over the strategy mix, so realized per-AS counts
/// are exact and threshold tests plant both sides deterministically.
fn strategy_quota(strategies: &[StrategySpec], devices: usize) -> Vec<StrategyKind> {
    let mut counts: Vec<usize> = strategies
        .iter()
        .map(|s| (s.weight * devices as f64).floor() as usize)
        .collect();
    let mut leftover = devices - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..strategies.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = strategies[a].weight * devices as f64 - counts[a] as f64;
        let fb = strategies[b].weight * devices as f64 - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    let mut out = Vec::with_capacity(devices);
    for (i, &count) in counts.iter().enumerate() {
        out.extend(std::iter::repeat_n(strategies[i].kind, count));
    }
    out
}

fn sighting_times(spec: &ScenarioSpec, rng: &mut ChaCha12Rng) -> Vec<u64> {
    match spec.sighting_interval_secs {
        Some(interval) => (0..spec.duration_secs).step_by(interval as usize).collect(),
        None => {
            let rate = spec.sighting_rate_per_day / 86_400.0;
            let mut times = Vec::new();
            let mut t = 0.0f64;
            loop {
                let u: f64 = 1.0 - rng.random::<f64>();
                t += -u.ln() / rate;
                if t >= spec.duration_secs as f64 {
                    break;
                }
                times.push(t as u64);
            }
            times
        }
    }
}

/// Random privacy IIDs are re-drawn until they are unambiguously
/// high-entropy, do not look EUI-64, and cannot produce an embedded-IPv4
/// candidate inside any scenario pool.
fn draw_random_iid(rng: &mut ChaCha12Rng, v4_pools: &[&V4Pool]) -> u64 {
    loop {
        let iid: u64 = rng.random();
        if rules::entropy(iid) < 0.76 {
            continue;
        }
        if (iid >> 24) & 0xFFFF == 0xFFFE {
            continue;
        }
        let collides = rules::candidates(iid)
            .iter()
            .any(|&v4| v4_pools.iter().any(|p| p.contains(v4)));
        if collides {
            continue;
        }
        return iid;
    }
}

fn validate(spec: &ScenarioSpec) -> Result<()> {
    if spec.duration_secs == 0 {
        return Err(scenario_err("duration_secs must be positive"));
    }
    if spec.vantages == 0 {
        return Err(scenario_err("vantages must be positive"));
    }
    if spec.ases.is_empty() {
        return Err(scenario_err("no ASes"));
    }
    match spec.sighting_interval_secs {
        Some(0) => return Err(scenario_err("sighting_interval_secs must be positive")),
        None if spec.sighting_rate_per_day <= 0.0 => {
            return Err(scenario_err("sighting_rate_per_day must be positive"));
        }
        _ => {}
    }
    if !(0.0..=1.0).contains(&spec.alias_known_fraction) {
        return Err(scenario_err("alias_known_fraction must be in [0,1]"));
    }

    let mut asns = BTreeSet::new();
    for as_spec in &spec.ases {
        if !asns.insert(as_spec.asn) {
            return Err(scenario_err(format!("duplicate AS{}", as_spec.asn)));
        }
        if as_spec.strategies.is_empty() {
            return Err(scenario_err(format!("AS{}: empty strategy mix", as_spec.asn)));
        }
        let total: f64 = as_spec.strategies.iter().map(|s| s.weight).sum();
        if as_spec.strategies.iter().any(|s| s.weight < 0.0) || (total - 1.0).abs() > 1e-6 {
            return Err(scenario_err(format!(
                "AS{}: strategy weights must be non-negative and sum to 1",
                as_spec.asn
            )));
        }
        if !(0.0..=1.0).contains(&as_spec.alias_device_fraction) {
            return Err(scenario_err(format!(
                "AS{}: alias_device_fraction must be in [0,1]",
                as_spec.asn
            )));
        }
        if as_spec.rotation_period_secs == Some(0) {
            return Err(scenario_err(format!(
                "AS{}: rotation_period_secs must be positive",
                as_spec.asn
            )));
        }
    }

    // Pools must be globally disjoint for unambiguous attribution.
    let mut v6_pools: Vec<(u32, Prefix)> = Vec::new();
    for as_spec in &spec.ases {
        for p in parse_pools(as_spec)? {
            for (other_asn, other) in &v6_pools {
                if other.contains(p.base()) || p.contains(other.base()) {
                    return Err(scenario_err(format!(
                        "overlapping v6 pools: AS{} {p} and AS{other_asn} {other}",
                        as_spec.asn
                    )));
                }
            }
            v6_pools.push((as_spec.asn, p));
        }
    }
    let mut v4_pools: Vec<(u32, V4Pool)> = Vec::new();
    for as_spec in &spec.ases {
        for p in parse_v4_pools(as_spec)? {
            for (other_asn, other) in &v4_pools {
                if other.contains(p.base) || p.contains(other.base) {
                    return Err(scenario_err(format!(
                        "overlapping v4 pools in AS{} and AS{other_asn}",
                        as_spec.asn
                    )));
                }
            }
            v4_pools.push((as_spec.asn, p));
        }
    }

    for m in &spec.mobility {
        if m.schedule.is_empty() {
            return Err(scenario_err(format!("device {}: empty schedule", m.device)));
        }
        if !m.schedule.windows(2).all(|w| w[0].start_secs <= w[1].start_secs) {
            return Err(scenario_err(format!(
                "device {}: schedule not sorted",
                m.device
            )));
        }
    }

    let mut seen_oui = BTreeSet::new();
    for o in &spec.ouis {
        let parsed: Oui = o
            .oui
            .parse()
            .map_err(|e| scenario_err(format!("bad oui {:?}: {e}", o.oui)))?;
        if !seen_oui.insert(parsed) {
            return Err(scenario_err(format!("duplicate oui {}", o.oui)));
        }
        if o.bssid_offset.unsigned_abs() >= 1 << 24 {
            return Err(scenario_err(format!("oui {}: offset too large", o.oui)));
        }
    }

    for text in &spec.aliased_64s {
        let p: Prefix = text
            .parse()
            .map_err(|e| scenario_err(format!("bad aliased prefix {text:?}: {e}")))?;
        if p.len() != 64 {
            return Err(scenario_err(format!("aliased prefix {text:?} is not a /64")));
        }
    }
    Ok(())
}

struct Emitted {
    ts: u64,
    bits: u128,
    vantage: usize,
    device: usize,
    asn: u32,
    country: CountryCode,
}

fn compute_truth(
    spec: &ScenarioSpec,
    ases: &BTreeMap<u32, AsState>,
    devices: &[DevicePlan],
    emitted: &[Emitted],
    ouis: &[(Oui, &OuiSpec)],
) -> Result<GroundTruth> {
    struct AddrAgg {
        device: usize,
        asn: u32,
        first_ts: u64,
        multi_ts: bool,
    }

    let mut addrs: BTreeMap<u128, AddrAgg> = BTreeMap::new();
    for e in emitted {
        addrs
            .entry(e.bits)
            .and_modify(|a| {
                debug_assert_eq!(a.device, e.device, "addresses are per-device unique");
                if a.first_ts != e.ts {
                    a.multi_ts = true;
                }
            })
            .or_insert(AddrAgg {
                device: e.device,
                asn: e.asn,
                first_ts: e.ts,
                multi_ts: false,
            });
    }

    // Per-AS totals and AS-consistent embedded addresses, by restated rules.
    let mut per_as_addresses: BTreeMap<u32, u64> = BTreeMap::new();
    let mut per_as_consistent: BTreeMap<u32, u64> = BTreeMap::new();
    let mut consistent_addrs: BTreeSet<u128> = BTreeSet::new();
    for (&bits, agg) in &addrs {
        *per_as_addresses.entry(agg.asn).or_insert(0) += 1;
        let iid = bits as u64;
        let pools = &ases[&agg.asn].v4_pools;
        if rules::candidates(iid)
            .iter()
            .any(|&v4| pools.iter().any(|p| p.contains(v4)))
        {
            *per_as_consistent.entry(agg.asn).or_insert(0) += 1;
            consistent_addrs.insert(bits);
        }
    }
    let accepted_ipv4_ases: Vec<u32> = per_as_consistent
        .iter()
        .filter(|&(asn, &count)| {
            count >= spec.threshold_count
                && count as f64 > spec.threshold_frac * per_as_addresses[asn] as f64
        })
        .map(|(&asn, _)| asn)
        .collect();
    let accepted_set: BTreeSet<u32> = accepted_ipv4_ases.iter().copied().collect();

    let mut addresses: BTreeMap<String, AddressTruth> = BTreeMap::new();
    for (&bits, agg) in &addrs {
        let accepted = accepted_set.contains(&agg.asn) && consistent_addrs.contains(&bits);
        addresses.insert(
            Ip6::from_bits(bits).to_string(),
            AddressTruth {
                device: agg.device,
                asn: agg.asn,
                category: rules::category(bits as u64, accepted).to_string(),
            },
        );
    }

    // Rollup counts straight off the sorted key set.
    let mut unique_48s = 0u64;
    let mut unique_64s = 0u64;
    let mut last: Option<u128> = None;
    for &bits in addrs.keys() {
        match last {
            Some(prev) => {
                if prev >> 80 != bits >> 80 {
                    unique_48s += 1;
                }
                if prev >> 64 != bits >> 64 {
                    unique_64s += 1;
                }
            }
            None => {
                unique_48s = 1;
                unique_64s = 1;
            }
        }
        last = Some(bits);
    }
    let singletons = addrs.values().filter(|a| !a.multi_ts).count();
    let unique_addresses = addrs.len() as u64;

    // Per-device aggregates.
    let mut sightings: BTreeMap<usize, u64> = BTreeMap::new();
    let mut nets_by_device: BTreeMap<usize, BTreeSet<u128>> = BTreeMap::new();
    let mut track_rows: BTreeMap<usize, Vec<(u64, u128, u32, CountryCode)>> = BTreeMap::new();
    for e in emitted {
        *sightings.entry(e.device).or_insert(0) += 1;
        let net = e.bits >> 64;
        nets_by_device.entry(e.device).or_default().insert(net);
        if devices[e.device].strategy == StrategyKind::Eui64Slaac {
            track_rows
                .entry(e.device)
                .or_default()
                .push((e.ts, net, e.asn, e.country));
        }
    }

    let mut device_truths = Vec::with_capacity(devices.len());
    for device in devices {
        let count = sightings.get(&device.id).copied().unwrap_or(0);
        let nets: Vec<String> = nets_by_device
            .get(&device.id)
            .map(|s| {
                s.iter()
                    .map(|&net| Prefix::new(Ip6::from_bits(net << 64), 64).unwrap().to_string())
                    .collect()
            })
            .unwrap_or_default();

        // Category of the device's home-AS addresses.
        let category = addrs
            .iter()
            .filter(|(_, a)| a.device == device.id)
            .find(|(_, a)| a.asn == device.home_asn)
            .or_else(|| addrs.iter().find(|(_, a)| a.device == device.id))
            .map(|(&bits, a)| {
                let accepted =
                    accepted_set.contains(&a.asn) && consistent_addrs.contains(&bits);
                rules::category(bits as u64, accepted).to_string()
            });

        let (track_class, transitions) = match track_rows.get(&device.id) {
            Some(rows) => {
                let mut rows = rows.clone();
                rows.sort_by_key(|&(ts, net, _, _)| (ts, net));
                let transitions = rows.windows(2).filter(|w| w[0].1 != w[1].1).count() as u64;
                let as_count = rows.iter().map(|r| r.2).collect::<BTreeSet<_>>().len() as u64;
                let cc_count = rows.iter().map(|r| r.3).collect::<BTreeSet<_>>().len() as u64;
                let p64 = rows.iter().map(|r| r.1).collect::<BTreeSet<_>>().len() as u64;
                (
                    Some(rules::track_class(as_count, cc_count, transitions, p64).to_string()),
                    transitions,
                )
            }
            None => (None, 0),
        };

        device_truths.push(DeviceTruth {
            id: device.id,
            home_asn: device.home_asn,
            home_country: ases[&device.home_asn].country.to_string(),
            strategy: device.strategy,
            mac: device.mac.map(|m| m.to_string()),
            category,
            track_class,
            transitions,
            prefixes64: nets,
            sightings: count,
            lat: device.lat,
            lon: device.lon,
            geo_expected: device.strategy == StrategyKind::Eui64Slaac && count > 0,
        });
    }

    // Planted OUI facts.
    let mut ouis_truth: BTreeMap<String, OuiTruth> = BTreeMap::new();
    for (i, (oui, oui_spec)) in ouis.iter().enumerate() {
        let planted: Vec<&DevicePlan> = devices
            .iter()
            .filter(|d| d.oui_idx == Some(i))
            .collect();
        let wired = planted
            .iter()
            .filter(|d| sightings.get(&d.id).copied().unwrap_or(0) > 0)
            .count() as u64;
        let bssids = planted.len() as u64 + oui_spec.decoy_bssids as u64;
        ouis_truth.insert(
            oui.to_string(),
            OuiTruth {
                offset: oui_spec.bssid_offset,
                wired,
                bssids,
                pair_count: wired * bssids,
            },
        );
    }

    // Aliased /64s: explicit ones plus per-AS device fractions (the selected
    // devices' home epoch-0 subnets).
    let mut aliased: BTreeSet<Prefix> = spec
        .aliased_64s
        .iter()
        .map(|s| s.parse().expect("validated"))
        .collect();
    for state in ases.values() {
        if state.spec.alias_device_fraction <= 0.0 {
            continue;
        }
        let native: Vec<usize> = devices
            .iter()
            .filter(|d| d.home_asn == state.spec.asn)
            .map(|d| d.id)
            .collect();
        let take = (state.spec.alias_device_fraction * native.len() as f64).ceil() as usize;
        for &id in native.iter().take(take) {
            let net = state.net64(id, 0);
            aliased.insert(Prefix::new(Ip6::from_bits(net), 64).unwrap());
        }
    }
    let aliased_sorted: Vec<Prefix> = aliased.iter().copied().collect();
    let known_take =
        (spec.alias_known_fraction * aliased_sorted.len() as f64).ceil() as usize;
    let known: Vec<Prefix> = aliased_sorted.iter().take(known_take).copied().collect();

    let observed_64s: BTreeSet<u128> = addrs.keys().map(|&bits| bits >> 64).collect();
    let expected_verdicts: Vec<String> = aliased_sorted
        .iter()
        .filter(|p| observed_64s.contains(&(p.base().bits() >> 64)))
        .map(|p| p.to_string())
        .collect();

    Ok(GroundTruth {
        devices: device_truths,
        addresses,
        aliased_64s: aliased_sorted.iter().map(|p| p.to_string()).collect(),
        known_aliased_64s: known.iter().map(|p| p.to_string()).collect(),
        expected_alias_verdict_64s: expected_verdicts,
        ouis: ouis_truth,
        observation_count: emitted.len() as u64,
        unique_addresses,
        unique_48s,
        unique_64s,
        singleton_address_fraction: if unique_addresses == 0 {
            0.0
        } else {
            singletons as f64 / unique_addresses as f64
        },
        per_as_addresses,
        accepted_ipv4_ases,
    })
}
