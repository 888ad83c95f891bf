//! Shared scenario builders for integration tests.

use v6lens_core::synth::{AsSpec, OuiSpec, ScenarioSpec, StrategyKind, StrategySpec};

pub fn strategies(mix: &[(StrategyKind, f64)]) -> Vec<StrategySpec> {
    mix.iter()
        .map(|&(kind, weight)| StrategySpec { kind, weight })
        .collect()
}

pub fn as_spec(
    asn: u32,
    country: &str,
    v6: &str,
    v4: &[&str],
    devices: usize,
    mix: &[(StrategyKind, f64)],
) -> AsSpec {
    AsSpec {
        asn,
        country: country.to_string(),
        v6_prefixes: vec![v6.to_string()],
        v4_prefixes: v4.iter().map(|s| s.to_string()).collect(),
        strategies: strategies(mix),
        rotation_period_secs: None,
        devices,
        alias_device_fraction: 0.0,
    }
}

pub fn oui_spec(oui: &str, vendor: &str, offset: i32, decoys: usize) -> OuiSpec {
    OuiSpec {
        oui: oui.to_string(),
        vendor: vendor.to_string(),
        bssid_offset: offset,
        decoy_bssids: decoys,
        device_cap: None,
    }
}

/// A corpus exercising all seven categories, both IPv4 threshold failure
/// modes, aliasing with a known/new split, EUI-64 geolocation, and prefix
/// rotation. Roughly 1,600 devices and well over 10^4 distinct addresses.
pub fn rich_scenario() -> ScenarioSpec {
    use StrategyKind::*;
    ScenarioSpec {
        seed: 42,
        duration_secs: 86_400 * 3,
        sighting_rate_per_day: 4.0,
        sighting_interval_secs: None,
        ases: vec![
            // Accepted IPv4 embedding: 150 of 190 addresses are consistent.
            as_spec(
                100,
                "DE",
                "2001:db8:100::/48",
                &["198.51.100.0/24"],
                190,
                &[(Ipv4EmbeddedHexLow32, 150.0 / 190.0), (LowByte, 40.0 / 190.0)],
            ),
            // Fails the count rule: 99 consistent addresses.
            as_spec(
                200,
                "BR",
                "2001:db8:200::/48",
                &["203.0.113.0/24"],
                120,
                &[(Ipv4EmbeddedHexLow32, 99.0 / 120.0), (Zeroes, 21.0 / 120.0)],
            ),
            // Fails the fraction rule: 120 consistent among ~13k random.
            as_spec(
                300,
                "CN",
                "2001:db8:300::/48",
                &["16.0.0.0/24"],
                1200,
                &[(Ipv4EmbeddedHexLow32, 0.1), (RandomPrivacy, 0.9)],
            ),
            // EUI-64 population for vendor resolution and geolocation.
            as_spec(
                400,
                "US",
                "2001:db8:400::/48",
                &[],
                40,
                &[(Eui64Slaac, 0.75), (Low2Bytes, 0.25)],
            ),
            // Aliased subnets with a partial external list.
            {
                let mut a = as_spec(
                    500,
                    "DE",
                    "2001:db8:500::/48",
                    &[],
                    25,
                    &[(RandomPrivacy, 1.0)],
                );
                a.alias_device_fraction = 1.0;
                a
            },
            // Prefix rotation through the pipeline path.
            {
                let mut a = as_spec(
                    600,
                    "DE",
                    "2001:db8:600::/48",
                    &[],
                    5,
                    &[(Eui64Slaac, 1.0)],
                );
                a.rotation_period_secs = Some(86_400);
                a
            },
        ],
        mobility: vec![],
        aliased_64s: vec![],
        alias_known_fraction: 0.8,
        ouis: vec![oui_spec("00:11:22", "Acme Devices Inc.", 1, 120)],
        vantages: 3,
        threshold_count: 100,
        threshold_frac: 0.10,
    }
}
