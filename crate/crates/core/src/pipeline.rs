//! Dataset summarization, privacy-preserving release export, and the
//! end-to-end pipeline runner tying every stage together.
//!
//! The pipeline is configured from a single JSON file; per-run flags can
//! override the knobs that matter (seed, interval, thresholds). All required
//! inputs for enabled stages are validated before any work starts, and runs
//! are idempotent for identical inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::addr::Ip6;
use crate::backscan::{
    AliasSummary, AliasVerdict, MockResponder, Prober, Responsiveness, compare_alias_lists,
    clients_in_aliased, infer_aliased, plan_interval,
};
use crate::classify::{ClassifyThresholds, classify_corpus, profile_distribution};
use crate::error::{Error, Result};
use crate::eui64::{Mac, OuiDb, extract_mac, is_apparent_eui64, mac_report};
use crate::geolink::{GeoGrid, OffsetModel, geolocate_corpus, infer_offset, tally_offsets};
use crate::prefix_map::{AsnTables, CountryCode, PrefixTable, load_alias_file, load_country_file};
use crate::store::{CorpusStore, IngestConfig, ingest};
use crate::tracking::{
    LifetimeKey, build_timelines, lifetimes, load_observations, prefix_spread,
    write_ccdf, write_tracking_report,
};

fn default_true() -> bool {
    true
}

/// Which pipeline stages run. All on by default.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stages {
    #[serde(default = "default_true")]
    pub summarize: bool,
    #[serde(default = "default_true")]
    pub classify: bool,
    #[serde(default = "default_true")]
    pub eui64: bool,
    #[serde(default = "default_true")]
    pub tracking: bool,
    #[serde(default = "default_true")]
    pub alias: bool,
    #[serde(default = "default_true")]
    pub geolink: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages {
            summarize: true,
            classify: true,
            eui64: true,
            tracking: true,
            alias: true,
            geolink: true,
        }
    }
}

/// A comparison corpus for the summary's intersection columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSpec {
    pub name: String,
    pub path: PathBuf,
}

fn default_interval() -> u64 {
    600
}

fn default_min_pairs() -> u64 {
    500
}

fn default_threshold_count() -> u64 {
    100
}

fn default_threshold_frac() -> f64 {
    0.10
}

fn default_client_rate() -> f64 {
    2.0 / 3.0
}

fn default_top_countries() -> usize {
    10
}

/// Pipeline configuration (one JSON file).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub observations: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub asn_file: Option<PathBuf>,
    #[serde(default)]
    pub country_file: Option<PathBuf>,
    /// Aliased-prefix truth driving the simulated backscan responder.
    #[serde(default)]
    pub alias_file: Option<PathBuf>,
    /// External alias list for the known/new comparison (defaults to
    /// `alias_file`).
    #[serde(default)]
    pub external_alias_file: Option<PathBuf>,
    #[serde(default)]
    pub oui_file: Option<PathBuf>,
    #[serde(default)]
    pub geo_file: Option<PathBuf>,
    #[serde(default)]
    pub geo_grid_file: Option<PathBuf>,
    #[serde(default)]
    pub stages: Stages,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_interval")]
    pub interval_seconds: u64,
    #[serde(default = "default_min_pairs")]
    pub min_pairs: u64,
    #[serde(default = "default_threshold_count")]
    pub threshold_count: u64,
    #[serde(default = "default_threshold_frac")]
    pub threshold_frac: f64,
    #[serde(default = "default_client_rate")]
    pub client_response_rate: f64,
    #[serde(default)]
    pub comparisons: Vec<ComparisonSpec>,
    #[serde(default)]
    pub max_in_memory: Option<usize>,
    #[serde(default = "default_top_countries")]
    pub top_countries: usize,
}

impl PipelineConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// One Table-1-style comparison row.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub addresses: u64,
    pub common_addresses: u64,
    pub asns: u64,
    pub common_asns: u64,
    pub slash48s: u64,
    pub common_48s: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CountryCount {
    pub country: String,
    pub addresses: u64,
}

/// Dataset totals in the shape of the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummaryReport {
    pub addresses: u64,
    pub observations: u64,
    pub asns: u64,
    pub slash48s: u64,
    pub slash64s: u64,
    pub avg_addrs_per_48: f64,
    pub avg_addrs_per_48_rounded: u64,
    pub unattributed_addresses: u64,
    pub top_countries: Vec<CountryCount>,
    pub comparisons: Vec<ComparisonRow>,
}

/// Computes dataset totals, per-country leaders, and intersections with
/// comparison corpora ("common" columns).
pub fn summarize(
    store: &CorpusStore,
    asmap: &PrefixTable<u32>,
    countrymap: &PrefixTable<CountryCode>,
    comparisons: &[(String, Vec<Ip6>)],
    top_n: usize,
) -> Result<SummaryReport> {
    let mut store_asns: BTreeSet<u32> = BTreeSet::new();
    let mut store_48s: BTreeSet<u128> = BTreeSet::new();
    let mut per_country: BTreeMap<CountryCode, u64> = BTreeMap::new();
    let mut unattributed = 0u64;
    // One cursor per comparison corpus; both sides are sorted.
    let mut cursors: Vec<usize> = vec![0; comparisons.len()];
    let mut common_addresses: Vec<u64> = vec![0; comparisons.len()];

    for addr in store.iter_addresses()? {
        let addr = addr?;
        match asmap.lookup_longest(addr) {
            Some(&asn) => {
                store_asns.insert(asn);
            }
            None => unattributed += 1,
        }
        if let Some(&cc) = countrymap.lookup_longest(addr) {
            *per_country.entry(cc).or_insert(0) += 1;
        }
        store_48s.insert(addr.bits() >> 80);
        for (i, (_, list)) in comparisons.iter().enumerate() {
            let cur = &mut cursors[i];
            while *cur < list.len() && list[*cur] < addr {
                *cur += 1;
            }
            if *cur < list.len() && list[*cur] == addr {
                common_addresses[i] += 1;
                *cur += 1;
            }
        }
    }

    let mut rows = Vec::with_capacity(comparisons.len());
    for (i, (name, list)) in comparisons.iter().enumerate() {
        let mut asns: BTreeSet<u32> = BTreeSet::new();
        let mut slash48s: BTreeSet<u128> = BTreeSet::new();
        for &addr in list {
            if let Some(&asn) = asmap.lookup_longest(addr) {
                asns.insert(asn);
            }
            slash48s.insert(addr.bits() >> 80);
        }
        rows.push(ComparisonRow {
            name: name.clone(),
            addresses: list.len() as u64,
            common_addresses: common_addresses[i],
            asns: asns.len() as u64,
            common_asns: asns.intersection(&store_asns).count() as u64,
            slash48s: slash48s.len() as u64,
            common_48s: slash48s.intersection(&store_48s).count() as u64,
        });
    }

    let mut top: Vec<CountryCount> = per_country
        .into_iter()
        .map(|(cc, addresses)| CountryCount {
            country: cc.to_string(),
            addresses,
        })
        .collect();
    top.sort_by(|a, b| b.addresses.cmp(&a.addresses).then(a.country.cmp(&b.country)));
    top.truncate(top_n);

    let c = store.counters;
    let avg = if c.unique_48s == 0 {
        0.0
    } else {
        c.unique_addresses as f64 / c.unique_48s as f64
    };
    Ok(SummaryReport {
        addresses: c.unique_addresses,
        observations: c.observations,
        asns: store_asns.len() as u64,
        slash48s: c.unique_48s,
        slash64s: c.unique_64s,
        avg_addrs_per_48: avg,
        avg_addrs_per_48_rounded: avg.round() as u64,
        unattributed_addresses: unattributed,
        top_countries: top,
        comparisons: rows,
    })
}

/// Writes the privacy-preserving release: one canonical /48 per line,
/// sorted and deduplicated, covering every stored address. Full addresses
/// never appear in the output.
pub fn export_release(store: &CorpusStore, mut w: impl Write) -> Result<u64> {
    let mut count = 0u64;
    let mut last: Option<u128> = None;
    for addr in store.iter_addresses()? {
        let addr = addr?;
        let top48 = addr.bits() >> 80;
        if last != Some(top48) {
            writeln!(w, "{}", addr.net48())?;
            count += 1;
            last = Some(top48);
        }
    }
    Ok(count)
}

/// Where each emitted report landed.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub store_dir: PathBuf,
    pub written: Vec<PathBuf>,
    pub counters: crate::store::Counters,
    pub summary: Option<SummaryReport>,
    pub alias_summary: Option<AliasSummary>,
    pub classify_accepted_ipv4: Option<u64>,
    pub eui64_macs: Option<u64>,
    pub tracking_macs: Option<u64>,
    pub geolocated: Option<u64>,
}

fn require<'p>(
    path: &'p Option<PathBuf>,
    stage: &str,
    what: &str,
) -> Result<&'p PathBuf> {
    path.as_ref().ok_or_else(|| {
        Error::Config(format!("stage {stage:?} enabled but {what} is not configured"))
    })
}

fn check_readable(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{what} {path:?} does not exist or is not a file"
        )));
    }
    Ok(())
}

/// Validates that every enabled stage has its inputs before any work runs.
fn validate_config(cfg: &PipelineConfig) -> Result<()> {
    check_readable(&cfg.observations, "observation log")?;
    let s = &cfg.stages;
    if s.summarize || s.classify || s.tracking {
        check_readable(require(&cfg.asn_file, "summarize/classify/tracking", "asn_file")?, "asn_file")?;
    }
    if s.summarize || s.tracking {
        check_readable(
            require(&cfg.country_file, "summarize/tracking", "country_file")?,
            "country_file",
        )?;
    }
    if s.eui64 || s.geolink {
        check_readable(require(&cfg.oui_file, "eui64/geolink", "oui_file")?, "oui_file")?;
    }
    if s.alias {
        check_readable(require(&cfg.alias_file, "alias", "alias_file")?, "alias_file")?;
        if let Some(path) = &cfg.external_alias_file {
            check_readable(path, "external_alias_file")?;
        }
    }
    if s.geolink {
        check_readable(require(&cfg.geo_file, "geolink", "geo_file")?, "geo_file")?;
        if let Some(path) = &cfg.geo_grid_file {
            check_readable(path, "geo_grid_file")?;
        }
    }
    for c in &cfg.comparisons {
        check_readable(&c.path, "comparison corpus")?;
    }
    if !(0.0..=1.0).contains(&cfg.threshold_frac) {
        return Err(Error::Config("threshold_frac must be in [0,1]".into()));
    }
    if cfg.interval_seconds == 0 {
        return Err(Error::Config("interval_seconds must be positive".into()));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs ingest plus every enabled stage, writing reports under
/// `cfg.out_dir`. Identical inputs produce identical outputs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    validate_config(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let out = |name: &str| cfg.out_dir.join(name);

    // Ingest.
    let reader = std::io::BufReader::new(File::open(&cfg.observations)?);
    let mut ingest_cfg = IngestConfig::default();
    if let Some(cap) = cfg.max_in_memory {
        ingest_cfg.max_in_memory = cap;
    }
    let (store, _stats) = ingest(reader, out("store"), &ingest_cfg)?;

    let mut report = PipelineReport {
        store_dir: store.dir().to_path_buf(),
        written: Vec::new(),
        counters: store.counters,
        summary: None,
        alias_summary: None,
        classify_accepted_ipv4: None,
        eui64_macs: None,
        tracking_macs: None,
        geolocated: None,
    };

    let asn_tables: Option<AsnTables> = match &cfg.asn_file {
        Some(path) => Some(crate::prefix_map::load_asn_file(path)?),
        None => None,
    };
    let countrymap: Option<PrefixTable<CountryCode>> = match &cfg.country_file {
        Some(path) => Some(load_country_file(path)?.0),
        None => None,
    };

    if cfg.stages.summarize {
        let asmap = &asn_tables.as_ref().expect("validated").v6;
        let ccmap = countrymap.as_ref().expect("validated");
        let mut comparisons = Vec::new();
        for c in &cfg.comparisons {
            comparisons.push((c.name.clone(), crate::store::load_address_list(&c.path)?));
        }
        let summary = summarize(&store, asmap, ccmap, &comparisons, cfg.top_countries)?;
        let path = out("summary.json");
        serde_json::to_writer_pretty(create(&path)?, &summary)?;
        report.written.push(path);
        report.summary = Some(summary);
    }

    if cfg.stages.classify {
        let tables = asn_tables.as_ref().expect("validated");
        let addrs = store.load_addresses()?;
        let corpus = classify_corpus(
            addrs,
            &tables.v6,
            &tables.v4,
            ClassifyThresholds {
                min_count: cfg.threshold_count,
                min_frac: cfg.threshold_frac,
            },
        );
        let profiles = profile_distribution(&corpus.rows)?;
        let path = out("categories.csv");
        crate::classify::write_category_report(create(&path)?, "corpus", &profiles)?;
        report.written.push(path);
        let path = out("categories_by_as.csv");
        crate::classify::write_category_report_by_as(create(&path)?, &profiles)?;
        report.written.push(path);
        let path = out("entropy_cdf.csv");
        crate::classify::write_entropy_cdf(create(&path)?, &profiles.global)?;
        report.written.push(path);
        let path = out("entropy_cdf_by_as.csv");
        crate::classify::write_entropy_cdf_by_as(create(&path)?, &profiles)?;
        report.written.push(path);
        report.classify_accepted_ipv4 = Some(corpus.accepted_ipv4);
    }

    let mut extracted_macs: BTreeSet<Mac> = BTreeSet::new();
    if cfg.stages.eui64 || cfg.stages.geolink {
        let mut counts: std::collections::HashMap<Mac, u64> = std::collections::HashMap::new();
        for addr in store.iter_addresses()? {
            let iid = addr?.iid();
            if is_apparent_eui64(iid) {
                *counts
                    .entry(extract_mac(iid).expect("checked"))
                    .or_insert(0) += 1;
            }
        }
        extracted_macs = counts.keys().copied().collect();
        if cfg.stages.eui64 {
            let db = OuiDb::from_csv_path(cfg.oui_file.as_ref().expect("validated"))?;
            let rows = mac_report(&counts, &db);
            let path = out("eui64_macs.csv");
            crate::eui64::write_mac_report(create(&path)?, &rows)?;
            report.written.push(path);
            report.eui64_macs = Some(rows.len() as u64);
        }
    }

    // The remaining stages re-read the raw log for timestamps.
    let observations = if cfg.stages.tracking || cfg.stages.alias {
        Some(load_observations(&cfg.observations)?.0)
    } else {
        None
    };

    if cfg.stages.tracking {
        let observations = observations.as_ref().expect("loaded above");
        let tables = asn_tables.as_ref().expect("validated");
        let ccmap = countrymap.as_ref().expect("validated");
        let (timelines, _skipped) = build_timelines(observations, &tables.v6, ccmap);

        let path = out("tracking.csv");
        write_tracking_report(create(&path)?, &timelines)?;
        report.written.push(path);

        let addr_lifetimes = lifetimes(observations, LifetimeKey::Address);
        let path = out("lifetime_ccdf_address.csv");
        write_ccdf(
            create(&path)?,
            &crate::tracking::ccdf(addr_lifetimes.values().map(|s| s.lifetime())),
        )?;
        report.written.push(path);

        let iid_lifetimes = lifetimes(observations, LifetimeKey::Iid);
        let path = out("lifetime_ccdf_iid.csv");
        write_ccdf(
            create(&path)?,
            &crate::tracking::ccdf(iid_lifetimes.values().map(|s| s.lifetime())),
        )?;
        report.written.push(path);

        let mac_lifetimes = lifetimes(observations, LifetimeKey::Mac);
        let path = out("lifetime_ccdf_mac.csv");
        write_ccdf(
            create(&path)?,
            &crate::tracking::ccdf(mac_lifetimes.values().map(|s| s.lifetime())),
        )?;
        report.written.push(path);

        if !timelines.is_empty() {
            let spread = prefix_spread(&timelines)?;
            let path = out("prefix_spread_ccdf.csv");
            write_ccdf(create(&path)?, &spread.ccdf)?;
            report.written.push(path);
        }
        report.tracking_macs = Some(timelines.len() as u64);
    }

    if cfg.stages.alias {
        let observations = observations.as_ref().expect("loaded above");
        let alias_path = cfg.alias_file.as_ref().expect("validated");
        let (alias_truth, _) = load_alias_file(alias_path)?;
        let external = match &cfg.external_alias_file {
            Some(path) => load_alias_file(path)?.0,
            None => load_alias_file(alias_path)?.0,
        };

        let mut by_interval: BTreeMap<u64, BTreeSet<Ip6>> = BTreeMap::new();
        for obs in observations {
            let start = obs.ts - obs.ts % cfg.interval_seconds;
            by_interval.entry(start).or_default().insert(obs.addr);
        }

        let mut responder = MockResponder::new(alias_truth, cfg.seed);
        responder.client_response_rate = cfg.client_response_rate;
        let mut verdicts_by_prefix: BTreeMap<crate::addr::Prefix, AliasVerdict> = BTreeMap::new();
        let mut responsiveness = Responsiveness::default();
        for (&start, clients) in &by_interval {
            let (plan, _warnings) = plan_interval(clients, start, cfg.seed ^ start);
            let responses = responder.probe(&plan);
            let (verdicts, summary) = infer_aliased(&plan, &responses)?;
            responsiveness.merge(&summary);
            for v in verdicts {
                verdicts_by_prefix.entry(v.prefix).or_insert(v);
            }
        }
        let verdicts: Vec<AliasVerdict> = verdicts_by_prefix.into_values().collect();

        let path = out("alias_verdicts.csv");
        let mut w = create(&path)?;
        writeln!(w, "prefix,evidence")?;
        for v in &verdicts {
            writeln!(w, "{},{}", v.prefix, v.evidence)?;
        }
        w.flush()?;
        report.written.push(path);

        let comparison = compare_alias_lists(&verdicts, &external);
        let summary = AliasSummary::new(&responsiveness, &comparison);

        let all_clients: BTreeSet<Ip6> = observations.iter().map(|o| o.addr).collect();
        let empty = PrefixTable::empty();
        let asmap = asn_tables.as_ref().map_or(&empty, |t| &t.v6);
        let in_aliased = clients_in_aliased(&all_clients, &verdicts, asmap);
        let path = out("alias_clients.csv");
        let mut w = create(&path)?;
        writeln!(w, "asn,clients")?;
        for (asn, count) in &in_aliased.per_as {
            writeln!(w, "{asn},{count}")?;
        }
        if in_aliased.unattributed > 0 {
            writeln!(w, "unattributed,{}", in_aliased.unattributed)?;
        }
        writeln!(w, "total,{}", in_aliased.total)?;
        w.flush()?;
        report.written.push(path);

        let path = out("alias_summary.json");
        serde_json::to_writer_pretty(create(&path)?, &summary)?;
        report.written.push(path);
        report.alias_summary = Some(summary);
    }

    if cfg.stages.geolink {
        let geo = crate::geolink::load_geo_corpus(cfg.geo_file.as_ref().expect("validated"))?;
        let grid = match &cfg.geo_grid_file {
            Some(path) => Some(GeoGrid::from_path(path)?),
            None => None,
        };

        let mut by_oui: BTreeMap<crate::eui64::Oui, Vec<Mac>> = BTreeMap::new();
        for &mac in &extracted_macs {
            by_oui.entry(mac.oui()).or_default().push(mac);
        }
        let mut bssids_by_oui: BTreeMap<crate::eui64::Oui, Vec<Mac>> = BTreeMap::new();
        for g in &geo {
            bssids_by_oui.entry(g.bssid.oui()).or_default().push(g.bssid);
        }

        let mut models: BTreeMap<crate::eui64::Oui, OffsetModel> = BTreeMap::new();
        for (&oui, wired) in &by_oui {
            let Some(bssids) = bssids_by_oui.get(&oui) else {
                continue;
            };
            let hist = tally_offsets(wired, bssids, oui);
            if let Some(model) = infer_offset(&hist, oui, cfg.min_pairs) {
                models.insert(oui, model);
            }
        }

        let path = out("geolink_models.csv");
        crate::geolink::write_models(create(&path)?, &models)?;
        report.written.push(path);

        let (results, countries) =
            geolocate_corpus(extracted_macs.iter().copied(), &geo, &models, grid.as_ref());
        let path = out("geolink_results.csv");
        crate::geolink::write_geo_results(create(&path)?, &results)?;
        report.written.push(path);
        let path = out("geolink_countries.csv");
        crate::geolink::write_country_tally(create(&path)?, &countries)?;
        report.written.push(path);
        report.geolocated = Some(results.len() as u64);
    }

    let path = out("pipeline_report.json");
    serde_json::to_writer_pretty(create(&path)?, &report)?;
    Ok(report)
}
