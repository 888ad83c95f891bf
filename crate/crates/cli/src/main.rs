//! `v6lens` — analyze passively collected IPv6 address corpora: ingest and
//! dedup observation logs, classify addressing patterns, extract EUI-64
//! MACs, classify tracking behavior, infer aliased /64s from backscan
//! responses, link embedded MACs to geolocated BSSIDs, and export
//! privacy-preserving /48 releases. A synthetic corpus generator produces
//! full test datasets with ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use v6lens_core::addr::Ip6;
use v6lens_core::backscan::{
    AliasSummary, AliasVerdict, MockResponder, Prober, compare_alias_lists, infer_aliased,
    plan_interval, read_plan_csv, read_responses_csv, write_plan_csv, write_responses_csv,
};
use v6lens_core::classify::{ClassifyThresholds, classify_corpus, profile_distribution};
use v6lens_core::eui64::{Mac, OuiDb, extract_mac, is_apparent_eui64, mac_report};
use v6lens_core::geolink::{
    GeoGrid, OffsetHistogram, geolocate_corpus, infer_offset, load_geo_corpus, read_models,
    tally_offsets,
};
use v6lens_core::pipeline::{PipelineConfig, export_release, run_pipeline, summarize};
use v6lens_core::prefix_map::{load_alias_file, load_asn_file, load_country_file};
use v6lens_core::store::{CorpusStore, IngestConfig, ingest, load_address_list};
use v6lens_core::synth::{ScenarioSpec, generate_corpus};
use v6lens_core::tracking::{
    LifetimeKey, build_timelines, ccdf, lifetimes, load_observations, prefix_spread, write_ccdf,
    write_tracking_report,
};

#[derive(Parser)]
#[command(
    name = "v6lens",
    version,
    about = "Passive IPv6 corpus analysis: addressing patterns, EUI-64 privacy leaks, \
             alias backscanning, and BSSID geolocation linkage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest an observation log into a deduplicated corpus store.
    Ingest {
        /// Observation CSV: unix_seconds,ipv6,vantage_id
        #[arg(long)]
        input: PathBuf,
        /// Store directory to create.
        #[arg(long)]
        store: PathBuf,
        /// Addresses buffered in memory before spilling a sorted run.
        #[arg(long)]
        max_in_memory: Option<usize>,
        /// Directory for spilled runs (defaults inside the store).
        #[arg(long)]
        tmp_dir: Option<PathBuf>,
    },
    /// Dataset totals, per-country leaders, and comparison intersections.
    Summarize {
        #[arg(long)]
        store: PathBuf,
        /// pfx2as file: `prefix asn` per line.
        #[arg(long)]
        asn: PathBuf,
        /// Country CSV: `prefix,iso2`.
        #[arg(long)]
        country: PathBuf,
        /// Comparison corpus as name=path (repeatable); plain address list.
        #[arg(long = "compare", value_parser = parse_named_path)]
        comparisons: Vec<(String, PathBuf)>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Output JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seven-category addressing-pattern classification.
    Classify {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        asn: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        threshold_count: u64,
        #[arg(long, default_value_t = 0.10)]
        threshold_frac: f64,
    },
    /// Extract embedded MACs and resolve vendors against an OUI registry.
    Eui64 {
        #[arg(long)]
        store: PathBuf,
        /// IEEE MA-L CSV registry.
        #[arg(long)]
        oui: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-MAC timelines, tracking classes, lifetimes, and /64 spread.
    Track {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        asn: PathBuf,
        #[arg(long)]
        country: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Backscan planning and aliased-network inference.
    Alias {
        #[command(subcommand)]
        command: AliasCommand,
    },
    /// Wired-MAC to BSSID offset models and geolocation.
    Geolink {
        #[command(subcommand)]
        command: GeolinkCommand,
    },
    /// Generate a synthetic corpus with ground truth from a scenario file.
    Synth {
        /// Scenario JSON.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Export the privacy-preserving /48 release list.
    Release {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every enabled stage from a single JSON config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: PipelineOverrides,
    },
}

#[derive(Args)]
struct PipelineOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    interval_seconds: Option<u64>,
    #[arg(long)]
    min_pairs: Option<u64>,
    #[arg(long)]
    threshold_count: Option<u64>,
    #[arg(long)]
    threshold_frac: Option<f64>,
}

#[derive(Subcommand)]
enum AliasCommand {
    /// Build one interval's probe plan from a client address list.
    Plan {
        /// One client address per line.
        #[arg(long)]
        clients: PathBuf,
        #[arg(long, default_value_t = 0)]
        interval_start: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infer aliased /64s from responses (from a file or the built-in mock).
    Infer {
        #[arg(long)]
        plan: PathBuf,
        /// Response CSV `target,responded`; mutually exclusive with --mock-aliased.
        #[arg(long, conflicts_with = "mock_aliased")]
        responses: Option<PathBuf>,
        /// Simulate responses against this aliased-prefix list.
        #[arg(long)]
        mock_aliased: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        mock_seed: u64,
        #[arg(long, default_value_t = 0.6667)]
        mock_client_rate: f64,
        /// Save the simulated responses for a later file-based replay.
        #[arg(long, requires = "mock_aliased")]
        responses_out: Option<PathBuf>,
        /// External alias list for the known/new split in the summary.
        #[arg(long)]
        external: Option<PathBuf>,
        /// Verdict CSV output (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary JSON output.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Split verdicts into known and new against an external alias list.
    Compare {
        /// Verdict CSV from `alias infer`.
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        external: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GeolinkCommand {
    /// Tally per-OUI NIC offsets between wired MACs and BSSIDs.
    Tally {
        /// One wired MAC per line.
        #[arg(long)]
        macs: PathBuf,
        /// Geo corpus CSV `bssid,lat,lon`.
        #[arg(long)]
        geo: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select per-OUI offset models from tallies.
    Infer {
        /// Tally CSV from `geolink tally`.
        #[arg(long)]
        tallies: PathBuf,
        #[arg(long, default_value_t = 500)]
        min_pairs: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply models to wired MACs and geolocate via the BSSID corpus.
    Apply {
        #[arg(long)]
        macs: PathBuf,
        #[arg(long)]
        geo: PathBuf,
        /// Model CSV from `geolink infer`.
        #[arg(long)]
        models: PathBuf,
        /// Reverse-geocode grid CSV `lat,lon,iso2` for the country tally.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-country tally CSV output.
        #[arg(long)]
        countries: Option<PathBuf>,
    },
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=path, got {s:?}"))?;
    if name.is_empty() {
        return Err("comparison name must not be empty".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        let kind = e
            .downcast_ref::<v6lens_core::Error>()
            .map_or("other", |core| core.kind());
        let payload = serde_json::json!({ "error": format!("{e:#}"), "kind": kind });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}

/// Opens `--out` or falls back to stdout.
fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {path:?}"))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn read_mac_list(path: &PathBuf) -> anyhow::Result<Vec<Mac>> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("opening {path:?}"))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mac: Mac = trimmed
            .parse()
            .with_context(|| format!("{path:?} line {}", i + 1))?;
        out.push(mac);
    }
    Ok(out)
}

fn read_verdicts_csv(path: &PathBuf) -> anyhow::Result<Vec<AliasVerdict>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (i == 0 && trimmed.starts_with("prefix")) {
            continue;
        }
        let (prefix, evidence) = trimmed
            .split_once(',')
            .with_context(|| format!("{path:?} line {}: expected prefix,evidence", i + 1))?;
        out.push(AliasVerdict {
            prefix: prefix.parse().with_context(|| format!("line {}", i + 1))?,
            aliased: true,
            evidence: evidence.parse().with_context(|| format!("line {}", i + 1))?,
        });
    }
    Ok(out)
}

fn write_tallies(
    mut w: impl Write,
    tallies: &BTreeMap<v6lens_core::Oui, OffsetHistogram>,
) -> std::io::Result<()> {
    writeln!(w, "oui,offset,count")?;
    for (oui, hist) in tallies {
        for (offset, count) in &hist.counts {
            writeln!(w, "{oui},{offset},{count}")?;
        }
    }
    Ok(())
}

fn read_tallies(path: &PathBuf) -> anyhow::Result<BTreeMap<v6lens_core::Oui, OffsetHistogram>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out: BTreeMap<v6lens_core::Oui, OffsetHistogram> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (i == 0 && trimmed.starts_with("oui")) {
            continue;
        }
        let context = || format!("{path:?} line {}", i + 1);
        let mut fields = trimmed.split(',');
        let (Some(oui), Some(offset), Some(count)) =
            (fields.next(), fields.next(), fields.next())
        else {
            anyhow::bail!("{}: expected oui,offset,count", context());
        };
        let oui: v6lens_core::Oui = oui.parse().with_context(context)?;
        let offset: i32 = offset.parse().with_context(context)?;
        let count: u64 = count.parse().with_context(context)?;
        let hist = out.entry(oui).or_default();
        *hist.counts.entry(offset).or_insert(0) += count;
        hist.pair_count += count;
    }
    Ok(out)
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Ingest {
            input,
            store,
            max_in_memory,
            tmp_dir,
        } => {
            let mut cfg = IngestConfig::default();
            if let Some(cap) = max_in_memory {
                cfg.max_in_memory = cap;
            }
            cfg.tmp_dir = tmp_dir;
            let reader = BufReader::new(
                File::open(&input).with_context(|| format!("opening {input:?}"))?,
            );
            let (store, stats) = ingest(reader, &store, &cfg)?;
            println!(
                "{}",
                serde_json::json!({
                    "store": store.dir(),
                    "unique_addresses": store.counters.unique_addresses,
                    "unique_48s": store.counters.unique_48s,
                    "unique_64s": store.counters.unique_64s,
                    "observations": stats.observations,
                    "malformed": stats.malformed,
                    "runs_spilled": stats.runs_spilled,
                })
            );
        }

        Command::Summarize {
            store,
            asn,
            country,
            comparisons,
            top,
            out,
        } => {
            let store = CorpusStore::open(store)?;
            let tables = load_asn_file(&asn)?;
            let (ccmap, _) = load_country_file(&country)?;
            let mut loaded = Vec::new();
            for (name, path) in comparisons {
                loaded.push((name, load_address_list(&path)?));
            }
            let report = summarize(&store, &tables.v6, &ccmap, &loaded, top)?;
            serde_json::to_writer_pretty(sink(&out)?, &report)?;
        }

        Command::Classify {
            store,
            asn,
            out_dir,
            threshold_count,
            threshold_frac,
        } => {
            let store = CorpusStore::open(store)?;
            let tables = load_asn_file(&asn)?;
            for w in &tables.warnings {
                eprintln!("warning: {w}");
            }
            let corpus = classify_corpus(
                store.load_addresses()?,
                &tables.v6,
                &tables.v4,
                ClassifyThresholds {
                    min_count: threshold_count,
                    min_frac: threshold_frac,
                },
            );
            let profiles = profile_distribution(&corpus.rows)?;
            std::fs::create_dir_all(&out_dir)?;
            let file = |name: &str| File::create(out_dir.join(name)).map(BufWriter::new);
            v6lens_core::classify::write_category_report(
                file("categories.csv")?,
                "corpus",
                &profiles,
            )?;
            v6lens_core::classify::write_category_report_by_as(
                file("categories_by_as.csv")?,
                &profiles,
            )?;
            v6lens_core::classify::write_entropy_cdf(file("entropy_cdf.csv")?, &profiles.global)?;
            v6lens_core::classify::write_entropy_cdf_by_as(
                file("entropy_cdf_by_as.csv")?,
                &profiles,
            )?;
            println!(
                "{}",
                serde_json::json!({
                    "addresses": corpus.rows.len(),
                    "accepted_ipv4": corpus.accepted_ipv4,
                    "unattributed": corpus.unattributed,
                    "out_dir": out_dir,
                })
            );
        }

        Command::Eui64 { store, oui, out } => {
            let store = CorpusStore::open(store)?;
            let db = OuiDb::from_csv_path(&oui)?;
            let mut counts: std::collections::HashMap<Mac, u64> = std::collections::HashMap::new();
            for addr in store.iter_addresses()? {
                let iid = addr?.iid();
                if is_apparent_eui64(iid) {
                    *counts.entry(extract_mac(iid).expect("checked")).or_insert(0) += 1;
                }
            }
            let rows = mac_report(&counts, &db);
            v6lens_core::eui64::write_mac_report(sink(&out)?, &rows)?;
        }

        Command::Track {
            observations,
            asn,
            country,
            out_dir,
        } => {
            let (observations, malformed) = load_observations(&observations)?;
            if malformed > 0 {
                eprintln!("warning: {malformed} malformed observation lines skipped");
            }
            let tables = load_asn_file(&asn)?;
            let (ccmap, _) = load_country_file(&country)?;
            let (timelines, skipped) = build_timelines(&observations, &tables.v6, &ccmap);
            std::fs::create_dir_all(&out_dir)?;
            let file = |name: &str| File::create(out_dir.join(name)).map(BufWriter::new);
            write_tracking_report(file("tracking.csv")?, &timelines)?;
            let addr_stats = lifetimes(&observations, LifetimeKey::Address);
            write_ccdf(
                file("lifetime_ccdf_address.csv")?,
                &ccdf(addr_stats.values().map(|s| s.lifetime())),
            )?;
            let iid_stats = lifetimes(&observations, LifetimeKey::Iid);
            write_ccdf(
                file("lifetime_ccdf_iid.csv")?,
                &ccdf(iid_stats.values().map(|s| s.lifetime())),
            )?;
            let mac_stats = lifetimes(&observations, LifetimeKey::Mac);
            write_ccdf(
                file("lifetime_ccdf_mac.csv")?,
                &ccdf(mac_stats.values().map(|s| s.lifetime())),
            )?;
            let spread_summary = if timelines.is_empty() {
                serde_json::Value::Null
            } else {
                let spread = prefix_spread(&timelines)?;
                write_ccdf(file("prefix_spread_ccdf.csv")?, &spread.ccdf)?;
                serde_json::json!(spread.trackable_fraction)
            };
            println!(
                "{}",
                serde_json::json!({
                    "timelines": timelines.len(),
                    "skipped_non_eui64": skipped,
                    "trackable_fraction": spread_summary,
                    "out_dir": out_dir,
                })
            );
        }

        Command::Alias { command } => run_alias(command)?,
        Command::Geolink { command } => run_geolink(command)?,

        Command::Synth { scenario, out_dir } => {
            let spec = ScenarioSpec::from_path(&scenario)?;
            let output = generate_corpus(&spec)?;
            let paths = output.write_dir(&out_dir)?;
            println!(
                "{}",
                serde_json::json!({
                    "observations": output.truth.observation_count,
                    "unique_addresses": output.truth.unique_addresses,
                    "devices": output.truth.devices.len(),
                    "aliased_64s": output.truth.aliased_64s.len(),
                    "observations_file": paths.observations,
                    "ground_truth": paths.truth_file,
                    "out_dir": out_dir,
                })
            );
        }

        Command::Release { store, out } => {
            let store = CorpusStore::open(store)?;
            let count = export_release(&store, sink(&out)?)?;
            eprintln!("{count} /48 prefixes released");
        }

        Command::Pipeline { config, overrides } => {
            let mut cfg = PipelineConfig::from_path(&config)?;
            if let Some(seed) = overrides.seed {
                cfg.seed = seed;
            }
            if let Some(v) = overrides.interval_seconds {
                cfg.interval_seconds = v;
            }
            if let Some(v) = overrides.min_pairs {
                cfg.min_pairs = v;
            }
            if let Some(v) = overrides.threshold_count {
                cfg.threshold_count = v;
            }
            if let Some(v) = overrides.threshold_frac {
                cfg.threshold_frac = v;
            }
            let report = run_pipeline(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn run_alias(command: AliasCommand) -> anyhow::Result<()> {
    match command {
        AliasCommand::Plan {
            clients,
            interval_start,
            seed,
            out,
        } => {
            let clients: BTreeSet<Ip6> = load_address_list(&clients)?.into_iter().collect();
            if clients.is_empty() {
                anyhow::bail!("client list is empty");
            }
            let (plan, warnings) = plan_interval(&clients, interval_start, seed);
            for w in warnings {
                eprintln!("warning: {w}");
            }
            write_plan_csv(sink(&out)?, &plan)?;
        }

        AliasCommand::Infer {
            plan,
            responses,
            mock_aliased,
            mock_seed,
            mock_client_rate,
            responses_out,
            external,
            out,
            summary,
        } => {
            let plan = read_plan_csv(BufReader::new(File::open(&plan)?), 0)?;
            let responses = match (&responses, &mock_aliased) {
                (Some(path), None) => {
                    read_responses_csv(BufReader::new(File::open(path)?), &plan)?
                }
                (None, Some(path)) => {
                    let (aliased, _) = load_alias_file(path)?;
                    let mut mock = MockResponder::new(aliased, mock_seed);
                    mock.client_response_rate = mock_client_rate;
                    mock.probe(&plan)
                }
                _ => anyhow::bail!("provide exactly one of --responses or --mock-aliased"),
            };
            if let Some(path) = &responses_out {
                write_responses_csv(BufWriter::new(File::create(path)?), &responses)?;
            }
            let (verdicts, responsiveness) = infer_aliased(&plan, &responses)?;

            let mut w = sink(&out)?;
            writeln!(w, "prefix,evidence")?;
            for v in &verdicts {
                writeln!(w, "{},{}", v.prefix, v.evidence)?;
            }
            w.flush()?;

            if let Some(path) = summary {
                let payload = match external {
                    Some(external) => {
                        let (table, _) = load_alias_file(&external)?;
                        let comparison = compare_alias_lists(&verdicts, &table);
                        serde_json::to_value(AliasSummary::new(&responsiveness, &comparison))?
                    }
                    None => serde_json::json!({
                        "client_hit_rate": responsiveness.client_hit_rate(),
                        "random_hit_rate": responsiveness.random_hit_rate(),
                        "aliased_64_count": verdicts.len(),
                    }),
                };
                serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &payload)?;
            }
        }

        AliasCommand::Compare {
            verdicts,
            external,
            out,
        } => {
            let verdicts = read_verdicts_csv(&verdicts)?;
            let (table, _) = load_alias_file(&external)?;
            let comparison = compare_alias_lists(&verdicts, &table);
            let payload = serde_json::json!({
                "known": comparison.known,
                "new": comparison.new,
                "new_prefixes": comparison
                    .new_prefixes
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>(),
            });
            serde_json::to_writer_pretty(sink(&out)?, &payload)?;
        }
    }
    Ok(())
}

fn run_geolink(command: GeolinkCommand) -> anyhow::Result<()> {
    match command {
        GeolinkCommand::Tally { macs, geo, out } => {
            let macs = read_mac_list(&macs)?;
            let geo = load_geo_corpus(&geo)?;
            let mut by_oui: BTreeMap<v6lens_core::Oui, Vec<Mac>> = BTreeMap::new();
            for mac in macs {
                by_oui.entry(mac.oui()).or_default().push(mac);
            }
            let mut bssids: BTreeMap<v6lens_core::Oui, Vec<Mac>> = BTreeMap::new();
            for g in &geo {
                bssids.entry(g.bssid.oui()).or_default().push(g.bssid);
            }
            let mut tallies = BTreeMap::new();
            for (oui, wired) in &by_oui {
                if let Some(b) = bssids.get(oui) {
                    tallies.insert(*oui, tally_offsets(wired, b, *oui));
                }
            }
            write_tallies(sink(&out)?, &tallies)?;
        }

        GeolinkCommand::Infer {
            tallies,
            min_pairs,
            out,
        } => {
            let tallies = read_tallies(&tallies)?;
            let mut models = BTreeMap::new();
            for (oui, hist) in &tallies {
                if let Some(model) = infer_offset(hist, *oui, min_pairs) {
                    models.insert(*oui, model);
                }
            }
            v6lens_core::geolink::write_models(sink(&out)?, &models)?;
        }

        GeolinkCommand::Apply {
            macs,
            geo,
            models,
            grid,
            out,
            countries,
        } => {
            let macs = read_mac_list(&macs)?;
            let geo = load_geo_corpus(&geo)?;
            let models = read_models(BufReader::new(File::open(&models)?))?;
            let grid = match grid {
                Some(path) => Some(GeoGrid::from_path(&path)?),
                None => None,
            };
            let (results, tally) = geolocate_corpus(macs, &geo, &models, grid.as_ref());
            v6lens_core::geolink::write_geo_results(sink(&out)?, &results)?;
            if let Some(path) = countries {
                v6lens_core::geolink::write_country_tally(
                    BufWriter::new(File::create(path)?),
                    &tally,
                )?;
            }
        }
    }
    Ok(())
}
