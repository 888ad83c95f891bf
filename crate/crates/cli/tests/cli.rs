//! End-to-end exercise of the command-line surface: every subcommand runs
//! against a synthetic dataset and its outputs are spot-checked.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn v6lens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v6lens"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = v6lens(args);
    assert!(
        out.status.success(),
        "v6lens {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn scenario_json() -> &'static str {
    r#"{
        "seed": 21,
        "duration_secs": 259200,
        "sighting_rate_per_day": 4.0,
        "ases": [
            {
                "asn": 100,
                "country": "DE",
                "v6_prefixes": ["2001:db8:100::/48"],
                "v4_prefixes": ["198.51.100.0/24"],
                "strategies": [
                    {"kind": "eui64_slaac", "weight": 0.4},
                    {"kind": "random_privacy", "weight": 0.4},
                    {"kind": "low_byte", "weight": 0.2}
                ],
                "devices": 60,
                "alias_device_fraction": 0.25
            },
            {
                "asn": 200,
                "country": "BR",
                "v6_prefixes": ["2001:db8:200::/48"],
                "strategies": [{"kind": "zeroes", "weight": 1.0}],
                "devices": 10
            }
        ],
        "alias_known_fraction": 0.5,
        "ouis": [
            {"oui": "00:11:22", "vendor": "Acme Devices Inc.", "bssid_offset": 1, "decoy_bssids": 40}
        ],
        "vantages": 3
    }"#
}

struct Fixture {
    #[allow(dead_code)]
    tmp: tempfile::TempDir,
    root: PathBuf,
    data: PathBuf,
    store: PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let scenario = root.join("scenario.json");
    std::fs::write(&scenario, scenario_json()).unwrap();
    let data = root.join("data");
    ok(&[
        "synth",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out-dir",
        data.to_str().unwrap(),
    ]);
    let store = root.join("store");
    ok(&[
        "ingest",
        "--input",
        data.join("observations.csv").to_str().unwrap(),
        "--store",
        store.to_str().unwrap(),
    ]);
    Fixture {
        tmp,
        root,
        data,
        store,
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_and_ingest_report_counts() {
    let f = fixture();
    let truth: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(f.data.join("ground_truth.json")).unwrap(),
    )
    .unwrap();
    let stdout = ok(&[
        "ingest",
        "--input",
        s(&f.data.join("observations.csv")),
        "--store",
        s(&f.root.join("store2")),
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["unique_addresses"], truth["unique_addresses"]);
    assert_eq!(report["observations"], truth["observation_count"]);
    assert_eq!(report["malformed"], 0);
}

#[test]
fn summarize_classify_eui64_track_release() {
    let f = fixture();

    let list = f.root.join("list.txt");
    std::fs::write(&list, "2001:db8:100::1\n").unwrap();
    let stdout = ok(&[
        "summarize",
        "--store",
        s(&f.store),
        "--asn",
        s(&f.data.join("pfx2as.txt")),
        "--country",
        s(&f.data.join("countries.csv")),
        "--compare",
        &format!("tiny={}", s(&list)),
    ]);
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(summary["addresses"].as_u64().unwrap() > 100);
    assert_eq!(summary["comparisons"][0]["name"], "tiny");
    assert_eq!(summary["comparisons"][0]["asns"], 1);

    let out_dir = f.root.join("classify");
    let stdout = ok(&[
        "classify",
        "--store",
        s(&f.store),
        "--asn",
        s(&f.data.join("pfx2as.txt")),
        "--out-dir",
        s(&out_dir),
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(report["addresses"].as_u64().unwrap() > 0);
    let categories = std::fs::read_to_string(out_dir.join("categories.csv")).unwrap();
    assert!(categories.starts_with("dataset,category,count,fraction"));
    assert!(out_dir.join("entropy_cdf.csv").exists());

    let macs_csv = ok(&[
        "eui64",
        "--store",
        s(&f.store),
        "--oui",
        s(&f.data.join("oui_registry.csv")),
    ]);
    assert!(macs_csv.starts_with("mac,oui,vendor,count"));
    assert!(macs_csv.contains("Acme Devices Inc."));

    let track_dir = f.root.join("track");
    let stdout = ok(&[
        "track",
        "--observations",
        s(&f.data.join("observations.csv")),
        "--asn",
        s(&f.data.join("pfx2as.txt")),
        "--country",
        s(&f.data.join("countries.csv")),
        "--out-dir",
        s(&track_dir),
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(report["timelines"].as_u64().unwrap() > 0);
    assert!(track_dir.join("tracking.csv").exists());
    assert!(track_dir.join("lifetime_ccdf_address.csv").exists());

    let release = f.root.join("release.txt");
    ok(&["release", "--store", s(&f.store), "--out", s(&release)]);
    let text = std::fs::read_to_string(&release).unwrap();
    assert!(text.lines().all(|l| l.ends_with("/48")));
    assert!(text.contains("2001:db8:100::/48"));
}

#[test]
fn alias_roundtrip_through_files() {
    let f = fixture();

    // Client list: the /48 release is too coarse; use real addresses.
    let clients = f.root.join("clients.txt");
    let obs = std::fs::read_to_string(f.data.join("observations.csv")).unwrap();
    let mut list: Vec<&str> = obs
        .lines()
        .filter_map(|l| l.split(',').nth(1))
        .collect();
    list.sort_unstable();
    list.dedup();
    std::fs::write(&clients, list.join("\n")).unwrap();

    let plan = f.root.join("plan.csv");
    ok(&[
        "alias",
        "plan",
        "--clients",
        s(&clients),
        "--seed",
        "7",
        "--out",
        s(&plan),
    ]);
    let plan_text = std::fs::read_to_string(&plan).unwrap();
    assert!(plan_text.starts_with("target,kind,origin_slash64"));
    assert!(plan_text.contains(",random,"));

    // Mock inference writing a response file, then replay from that file.
    let verdicts = f.root.join("verdicts.csv");
    let responses = f.root.join("responses.csv");
    let summary = f.root.join("summary.json");
    ok(&[
        "alias",
        "infer",
        "--plan",
        s(&plan),
        "--mock-aliased",
        s(&f.data.join("aliased_truth.txt")),
        "--mock-seed",
        "7",
        "--responses-out",
        s(&responses),
        "--external",
        s(&f.data.join("aliased_known.txt")),
        "--out",
        s(&verdicts),
        "--summary",
        s(&summary),
    ]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    // 15 planted aliased /64s, half of them on the known list.
    assert_eq!(summary["aliased_64_count"], 15);
    assert_eq!(summary["known"], 8);
    assert_eq!(summary["new"], 7);

    let verdicts2 = f.root.join("verdicts2.csv");
    ok(&[
        "alias",
        "infer",
        "--plan",
        s(&plan),
        "--responses",
        s(&responses),
        "--out",
        s(&verdicts2),
    ]);
    assert_eq!(
        std::fs::read_to_string(&verdicts).unwrap(),
        std::fs::read_to_string(&verdicts2).unwrap()
    );

    let stdout = ok(&[
        "alias",
        "compare",
        "--verdicts",
        s(&verdicts),
        "--external",
        s(&f.data.join("aliased_known.txt")),
    ]);
    let cmp: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(cmp["known"], 8);
    assert_eq!(cmp["new"], 7);
}

#[test]
fn geolink_tally_infer_apply() {
    let f = fixture();

    // Wired MAC list from the extracted-MAC report.
    let report = ok(&[
        "eui64",
        "--store",
        s(&f.store),
        "--oui",
        s(&f.data.join("oui_registry.csv")),
    ]);
    let macs_path = f.root.join("macs.txt");
    let macs: Vec<&str> = report
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').next())
        .collect();
    assert!(!macs.is_empty());
    std::fs::write(&macs_path, macs.join("\n")).unwrap();

    let tallies = f.root.join("tallies.csv");
    ok(&[
        "geolink",
        "tally",
        "--macs",
        s(&macs_path),
        "--geo",
        s(&f.data.join("geo_bssids.csv")),
        "--out",
        s(&tallies),
    ]);
    assert!(std::fs::read_to_string(&tallies)
        .unwrap()
        .starts_with("oui,offset,count"));

    let models = f.root.join("models.csv");
    ok(&[
        "geolink",
        "infer",
        "--tallies",
        s(&tallies),
        "--min-pairs",
        "100",
        "--out",
        s(&models),
    ]);
    let model_text = std::fs::read_to_string(&models).unwrap();
    assert!(model_text.contains("00:11:22,1,"), "{model_text}");

    let results = f.root.join("results.csv");
    let countries = f.root.join("countries.csv");
    ok(&[
        "geolink",
        "apply",
        "--macs",
        s(&macs_path),
        "--geo",
        s(&f.data.join("geo_bssids.csv")),
        "--models",
        s(&models),
        "--grid",
        s(&f.data.join("geo_grid.csv")),
        "--out",
        s(&results),
        "--countries",
        s(&countries),
    ]);
    let results = std::fs::read_to_string(&results).unwrap();
    assert_eq!(results.lines().count() as usize - 1, macs.len());
    let countries = std::fs::read_to_string(&countries).unwrap();
    assert!(countries.contains("DE,"), "{countries}");
}

#[test]
fn pipeline_from_config_with_overrides() {
    let f = fixture();
    let out_dir = f.root.join("pipeline");
    let config = serde_json::json!({
        "observations": f.data.join("observations.csv"),
        "out_dir": out_dir,
        "asn_file": f.data.join("pfx2as.txt"),
        "country_file": f.data.join("countries.csv"),
        "alias_file": f.data.join("aliased_truth.txt"),
        "external_alias_file": f.data.join("aliased_known.txt"),
        "oui_file": f.data.join("oui_registry.csv"),
        "geo_file": f.data.join("geo_bssids.csv"),
        "geo_grid_file": f.data.join("geo_grid.csv"),
        "seed": 3
    });
    let config_path = f.root.join("pipeline.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let stdout = ok(&[
        "pipeline",
        "--config",
        s(&config_path),
        "--min-pairs",
        "100",
        "--seed",
        "9",
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(report["geolocated"].as_u64().unwrap() > 0);
    for name in [
        "summary.json",
        "categories.csv",
        "eui64_macs.csv",
        "tracking.csv",
        "alias_summary.json",
        "geolink_results.csv",
        "pipeline_report.json",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
}

#[test]
fn errors_are_machine_readable_json() {
    let out = v6lens(&["ingest", "--input", "/nonexistent/file.csv", "--store", "/tmp/x"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let payload: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert!(payload["error"].as_str().unwrap().contains("file.csv"));
    assert!(payload["kind"].is_string());

    // Pipeline config error, before any work.
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("bad.json");
    std::fs::write(
        &config_path,
        serde_json::to_string(&serde_json::json!({
            "observations": tmp.path().join("missing.csv"),
            "out_dir": tmp.path().join("out"),
        }))
        .unwrap(),
    )
    .unwrap();
    let out = v6lens(&["pipeline", "--config", config_path.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let payload: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(payload["kind"], "config");
    assert!(!tmp.path().join("out").exists());
}
