//! Longitudinal tracking of EUI-64 clients: per-MAC timelines, /64
//! transition counting, lifetime statistics, and the five-way trackability
//! classification (plus explicit NotTrackable and Ambiguous outcomes so the
//! classifier is total).

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use crate::addr::{Ip6, Prefix};
use crate::error::{Error, Result};
use crate::eui64::{Mac, extract_mac, is_apparent_eui64};
use crate::prefix_map::{CountryCode, PrefixTable};

/// One timestamped sighting of a client address at a vantage point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub ts: u64,
    pub addr: Ip6,
    pub vantage: String,
}

/// Parses one `unix_seconds,ipv6,vantage_id` log line.
pub fn parse_observation(line: &str) -> std::result::Result<Observation, String> {
    let mut fields = line.trim_end().splitn(3, ',');
    let (Some(ts), Some(addr), Some(vantage)) = (fields.next(), fields.next(), fields.next())
    else {
        return Err("expected `unix_seconds,ipv6,vantage_id`".into());
    };
    let ts: u64 = ts.parse().map_err(|_| format!("bad timestamp {ts:?}"))?;
    let addr: Ip6 = addr.parse().map_err(|e| format!("bad address: {e}"))?;
    if vantage.is_empty() {
        return Err("empty vantage id".into());
    }
    Ok(Observation {
        ts,
        addr,
        vantage: vantage.to_string(),
    })
}

/// Reads a whole observation log, counting (and skipping) malformed lines.
pub fn load_observations(path: impl AsRef<std::path::Path>) -> Result<(Vec<Observation>, u64)> {
    use std::io::BufRead;
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    let mut malformed = 0u64;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_observation(&line) {
            Ok(obs) => out.push(obs),
            Err(_) => malformed += 1,
        }
    }
    Ok((out, malformed))
}

/// One annotated sighting inside a timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sighting {
    pub ts: u64,
    pub net64: Prefix,
    pub asn: Option<u32>,
    pub country: Option<CountryCode>,
}

/// Time-ordered trajectory of one extracted MAC. Ties on timestamp are
/// broken by numeric /64 order, so timelines are deterministic.
#[derive(Debug, Clone)]
pub struct MacTimeline {
    pub mac: Mac,
    pub sightings: Vec<Sighting>,
}

impl MacTimeline {
    pub fn first_seen(&self) -> u64 {
        self.sightings.first().map_or(0, |s| s.ts)
    }

    pub fn last_seen(&self) -> u64 {
        self.sightings.last().map_or(0, |s| s.ts)
    }
}

/// Groups EUI-64 observations into per-MAC timelines.
///
/// Observations whose IID is not apparent EUI-64 are skipped and counted.
pub fn build_timelines(
    observations: &[Observation],
    asmap: &PrefixTable<u32>,
    countrymap: &PrefixTable<CountryCode>,
) -> (BTreeMap<Mac, MacTimeline>, u64) {
    let mut timelines: BTreeMap<Mac, MacTimeline> = BTreeMap::new();
    let mut skipped = 0u64;
    for obs in observations {
        let iid = obs.addr.iid();
        if !is_apparent_eui64(iid) {
            skipped += 1;
            continue;
        }
        let mac = extract_mac(iid).expect("apparent EUI-64 checked");
        let sighting = Sighting {
            ts: obs.ts,
            net64: obs.addr.net64(),
            asn: asmap.lookup_longest(obs.addr).copied(),
            country: countrymap.lookup_longest(obs.addr).copied(),
        };
        timelines
            .entry(mac)
            .or_insert_with(|| MacTimeline {
                mac,
                sightings: Vec::new(),
            })
            .sightings
            .push(sighting);
    }
    for timeline in timelines.values_mut() {
        timeline
            .sightings
            .sort_by_key(|s| (s.ts, s.net64.base().bits()));
    }
    (timelines, skipped)
}

/// Counts time-ordered changes of /64: indices whose /64 differs from the
/// previous sighting's. Revisits re-count.
pub fn count_transitions(timeline: &MacTimeline) -> u64 {
    timeline
        .sightings
        .windows(2)
        .filter(|w| w[0].net64 != w[1].net64)
        .count() as u64
}

/// Distinct-count features feeding the trackability classifier. Sightings
/// lacking ASN or country attribution are excluded from the respective
/// distinct counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureVector {
    pub as_count: u64,
    pub country_count: u64,
    pub transitions: u64,
    pub prefix64_count: u64,
}

pub fn feature_vector(timeline: &MacTimeline) -> FeatureVector {
    let mut ases = std::collections::BTreeSet::new();
    let mut countries = std::collections::BTreeSet::new();
    let mut nets = std::collections::BTreeSet::new();
    for s in &timeline.sightings {
        if let Some(asn) = s.asn {
            ases.insert(asn);
        }
        if let Some(cc) = s.country {
            countries.insert(cc);
        }
        nets.insert(s.net64);
    }
    FeatureVector {
        as_count: ases.len() as u64,
        country_count: countries.len() as u64,
        transitions: count_transitions(timeline),
        prefix64_count: nets.len() as u64,
    }
}

/// Trackability outcome for one MAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackClass {
    /// Never left its /64.
    NotTrackable,
    MostlyStatic,
    PrefixReassignment,
    MacReuse,
    ChangingProviders,
    UserMovement,
    /// Feature combinations the heuristic leaves unassigned.
    Ambiguous,
}

impl TrackClass {
    pub fn name(self) -> &'static str {
        match self {
            TrackClass::NotTrackable => "not_trackable",
            TrackClass::MostlyStatic => "mostly_static",
            TrackClass::PrefixReassignment => "prefix_reassignment",
            TrackClass::MacReuse => "mac_reuse",
            TrackClass::ChangingProviders => "changing_providers",
            TrackClass::UserMovement => "user_movement",
            TrackClass::Ambiguous => "ambiguous",
        }
    }
}

impl std::fmt::Display for TrackClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrackClass {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [
            TrackClass::NotTrackable,
            TrackClass::MostlyStatic,
            TrackClass::PrefixReassignment,
            TrackClass::MacReuse,
            TrackClass::ChangingProviders,
            TrackClass::UserMovement,
            TrackClass::Ambiguous,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or(())
    }
}

/// Decision table over three binary features: more than one AS, more than
/// one country, more than ten /64 transitions. A MAC that never changes /64
/// is not trackable regardless of the features.
pub fn classify_track(fv: &FeatureVector) -> TrackClass {
    if fv.prefix64_count <= 1 {
        return TrackClass::NotTrackable;
    }
    let as_high = fv.as_count > 1;
    let cc_high = fv.country_count > 1;
    let tr_high = fv.transitions > 10;
    match (as_high, cc_high, tr_high) {
        (false, false, false) => TrackClass::MostlyStatic,
        (false, false, true) => TrackClass::PrefixReassignment,
        (true, true, true) => TrackClass::MacReuse,
        (true, false, false) => TrackClass::ChangingProviders,
        (true, false, true) => TrackClass::UserMovement,
        (false, true, _) | (true, true, false) => TrackClass::Ambiguous,
    }
}

/// First/last sighting of one key; lifetime is zero iff the key was seen at
/// exactly one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifetimeStats {
    pub first_seen: u64,
    pub last_seen: u64,
}

impl LifetimeStats {
    pub fn lifetime(self) -> u64 {
        self.last_seen - self.first_seen
    }
}

/// What to key lifetime statistics on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifetimeKey {
    Address,
    Iid,
    /// Extracted MACs; non-EUI-64 observations are ignored under this key.
    Mac,
}

/// Per-key lifetime statistics. Keys are widened into `u128` (address bits,
/// zero-extended IID bits, or zero-extended MAC bits).
pub fn lifetimes(observations: &[Observation], key: LifetimeKey) -> BTreeMap<u128, LifetimeStats> {
    let mut out: BTreeMap<u128, LifetimeStats> = BTreeMap::new();
    for obs in observations {
        let k = match key {
            LifetimeKey::Address => obs.addr.bits(),
            LifetimeKey::Iid => u128::from(obs.addr.iid().bits()),
            LifetimeKey::Mac => match extract_mac(obs.addr.iid()) {
                Ok(mac) => u128::from(mac.bits()),
                Err(_) => continue,
            },
        };
        out.entry(k)
            .and_modify(|s| {
                s.first_seen = s.first_seen.min(obs.ts);
                s.last_seen = s.last_seen.max(obs.ts);
            })
            .or_insert(LifetimeStats {
                first_seen: obs.ts,
                last_seen: obs.ts,
            });
    }
    out
}

/// Complementary CDF over integer values: for each distinct `x`, the
/// fraction of samples strictly greater than `x`.
pub fn ccdf(values: impl IntoIterator<Item = u64>) -> Vec<(u64, f64)> {
    let mut sorted: Vec<u64> = values.into_iter().collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < n {
        let x = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == x {
            j += 1;
        }
        out.push((x, (n - j) as f64 / n as f64));
        i = j;
    }
    out
}

/// Distribution of /64 counts per MAC plus the trackable share.
#[derive(Debug, Clone)]
pub struct PrefixSpread {
    pub ccdf: Vec<(u64, f64)>,
    /// Share of MACs appearing in at least two /64s.
    pub trackable_fraction: f64,
}

pub fn prefix_spread(timelines: &BTreeMap<Mac, MacTimeline>) -> Result<PrefixSpread> {
    if timelines.is_empty() {
        return Err(Error::EmptyInput("no timelines"));
    }
    let counts: Vec<u64> = timelines
        .values()
        .map(|t| feature_vector(t).prefix64_count)
        .collect();
    let trackable = counts.iter().filter(|&&c| c >= 2).count() as f64 / counts.len() as f64;
    Ok(PrefixSpread {
        ccdf: ccdf(counts),
        trackable_fraction: trackable,
    })
}

/// Writes the per-MAC tracking report:
/// `mac,class,as_count,country_count,transitions,prefix64_count,first_seen,last_seen`.
pub fn write_tracking_report(
    mut w: impl Write,
    timelines: &BTreeMap<Mac, MacTimeline>,
) -> std::io::Result<()> {
    writeln!(
        w,
        "mac,class,as_count,country_count,transitions,prefix64_count,first_seen,last_seen"
    )?;
    for timeline in timelines.values() {
        let fv = feature_vector(timeline);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            timeline.mac,
            classify_track(&fv),
            fv.as_count,
            fv.country_count,
            fv.transitions,
            fv.prefix64_count,
            timeline.first_seen(),
            timeline.last_seen()
        )?;
    }
    Ok(())
}

/// Writes a CCDF export: `x,ccdf`.
pub fn write_ccdf(mut w: impl Write, points: &[(u64, f64)]) -> std::io::Result<()> {
    writeln!(w, "x,ccdf")?;
    for (x, frac) in points {
        writeln!(w, "{x},{frac}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::parse_ipv6;
    use crate::eui64::embed_mac;
    use crate::prefix_map::TableBuilder;
    use proptest::prelude::*;

    fn obs(ts: u64, addr: &str) -> Observation {
        Observation {
            ts,
            addr: parse_ipv6(addr).unwrap(),
            vantage: "vp-0".into(),
        }
    }

    fn eui64_obs(ts: u64, net: u128, mac: Mac) -> Observation {
        Observation {
            ts,
            addr: Ip6::from_bits(net << 64 | u128::from(embed_mac(mac).bits())),
            vantage: "vp-0".into(),
        }
    }

    fn empty_maps() -> (PrefixTable<u32>, PrefixTable<CountryCode>) {
        (TableBuilder::new().freeze(), TableBuilder::new().freeze())
    }

    #[test]
    fn observation_line_parses() {
        let o = parse_observation("1650000000,2001:db8::1,vp-3").unwrap();
        assert_eq!(o.ts, 1650000000);
        assert_eq!(o.addr, parse_ipv6("2001:db8::1").unwrap());
        assert_eq!(o.vantage, "vp-3");
        assert!(parse_observation("nope,2001:db8::1,vp").is_err());
        assert!(parse_observation("5,not-an-addr,vp").is_err());
        assert!(parse_observation("5,2001:db8::1").is_err());
    }

    #[test]
    fn timelines_group_by_mac_and_skip_random() {
        let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
        let (asmap, ccmap) = empty_maps();
        let observations = vec![
            eui64_obs(100, 0x2001_0db8_0000_0001, mac),
            eui64_obs(200, 0x2001_0db8_0000_0002, mac),
            obs(300, "2001:db8::123:4567:89ab:cdef"),
        ];
        let (timelines, skipped) = build_timelines(&observations, &asmap, &ccmap);
        assert_eq!(timelines.len(), 1);
        assert_eq!(skipped, 1);
        assert_eq!(timelines[&mac].sightings.len(), 2);
    }

    #[test]
    fn timelines_sorted_with_tiebreak() {
        let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
        let (asmap, ccmap) = empty_maps();
        let observations = vec![
            eui64_obs(100, 0x2001_0db8_0000_0002, mac),
            eui64_obs(100, 0x2001_0db8_0000_0001, mac),
            eui64_obs(50, 0x2001_0db8_0000_0003, mac),
        ];
        let (timelines, _) = build_timelines(&observations, &asmap, &ccmap);
        let t = &timelines[&mac];
        assert_eq!(t.sightings[0].ts, 50);
        assert!(t.sightings[1].net64.base().bits() < t.sightings[2].net64.base().bits());
    }

    #[test]
    fn transition_counting() {
        let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
        let (asmap, ccmap) = empty_maps();
        let single = build_timelines(&[eui64_obs(1, 0x2001_0db8_0000_0001, mac)], &asmap, &ccmap)
            .0
            .remove(&mac)
            .unwrap();
        assert_eq!(count_transitions(&single), 0);

        // A, A, B, A: revisits count.
        let observations = vec![
            eui64_obs(1, 0x2001_0db8_0000_000a, mac),
            eui64_obs(2, 0x2001_0db8_0000_000a, mac),
            eui64_obs(3, 0x2001_0db8_0000_000b, mac),
            eui64_obs(4, 0x2001_0db8_0000_000a, mac),
        ];
        let t = build_timelines(&observations, &asmap, &ccmap)
            .0
            .remove(&mac)
            .unwrap();
        assert_eq!(count_transitions(&t), 2);
    }

    #[test]
    fn features_count_distincts() {
        let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
        let mut asmap = TableBuilder::new();
        asmap.insert("2001:db8:0:1::/64".parse().unwrap(), 100u32);
        asmap.insert("2001:db8:0:2::/64".parse().unwrap(), 200u32);
        let mut ccmap = TableBuilder::new();
        ccmap.insert("2001:db8::/32".parse().unwrap(), "BR".parse().unwrap());

        let (timelines, _) = build_timelines(
            &[eui64_obs(1, 0x2001_0db8_0000_0001, mac)],
            &asmap.freeze(),
            &ccmap.freeze(),
        );
        let fv = feature_vector(&timelines[&mac]);
        assert_eq!(
            fv,
            FeatureVector {
                as_count: 1,
                country_count: 1,
                transitions: 0,
                prefix64_count: 1
            }
        );

        let mut asmap = TableBuilder::new();
        asmap.insert("2001:db8:0:1::/64".parse().unwrap(), 100u32);
        asmap.insert("2001:db8:0:2::/64".parse().unwrap(), 200u32);
        let mut ccmap = TableBuilder::new();
        ccmap.insert("2001:db8::/32".parse().unwrap(), "BR".parse().unwrap());
        let observations = vec![
            eui64_obs(1, 0x2001_0db8_0000_0001, mac),
            eui64_obs(2, 0x2001_0db8_0000_0002, mac),
            eui64_obs(3, 0x2001_0db8_0000_0001, mac),
            eui64_obs(4, 0x2001_0db8_0000_0002, mac),
        ];
        let (timelines, _) = build_timelines(&observations, &asmap.freeze(), &ccmap.freeze());
        let fv = feature_vector(&timelines[&mac]);
        assert_eq!(fv.as_count, 2);
        assert_eq!(fv.country_count, 1);
        assert_eq!(fv.transitions, 3);
        assert_eq!(fv.prefix64_count, 2);
    }

    #[test]
    fn unattributed_sightings_never_raise_features() {
        let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
        let (asmap, ccmap) = empty_maps();
        let observations = vec![
            eui64_obs(1, 0x2001_0db8_0000_0001, mac),
            eui64_obs(2, 0x2001_0db8_0000_0002, mac),
        ];
        let (timelines, _) = build_timelines(&observations, &asmap, &ccmap);
        let fv = feature_vector(&timelines[&mac]);
        assert_eq!(fv.as_count, 0);
        assert_eq!(fv.country_count, 0);
        assert_eq!(classify_track(&fv), TrackClass::MostlyStatic);
    }

    fn fv(asn: u64, cc: u64, tr: u64, p64: u64) -> FeatureVector {
        FeatureVector {
            as_count: asn,
            country_count: cc,
            transitions: tr,
            prefix64_count: p64,
        }
    }

    #[test]
    fn track_decision_table() {
        assert_eq!(classify_track(&fv(1, 1, 0, 1)), TrackClass::NotTrackable);
        assert_eq!(classify_track(&fv(1, 1, 42, 2)), TrackClass::PrefixReassignment);
        assert_eq!(classify_track(&fv(70, 40, 900, 900)), TrackClass::MacReuse);
        assert_eq!(classify_track(&fv(3, 1, 4, 4)), TrackClass::ChangingProviders);
        assert_eq!(classify_track(&fv(3, 1, 40, 20)), TrackClass::UserMovement);
        assert_eq!(classify_track(&fv(1, 1, 4, 3)), TrackClass::MostlyStatic);
        assert_eq!(classify_track(&fv(1, 2, 4, 3)), TrackClass::Ambiguous);
        assert_eq!(classify_track(&fv(1, 2, 40, 30)), TrackClass::Ambiguous);
        assert_eq!(classify_track(&fv(2, 2, 4, 3)), TrackClass::Ambiguous);
        // Threshold edges: exactly 10 transitions is still "low".
        assert_eq!(classify_track(&fv(1, 1, 10, 5)), TrackClass::MostlyStatic);
        assert_eq!(classify_track(&fv(1, 1, 11, 5)), TrackClass::PrefixReassignment);
    }

    #[test]
    fn lifetime_semantics() {
        let observations = vec![
            obs(1000, "2001:db8::1"),
            obs(1000 + 86400, "2001:db8::1"),
            obs(500, "2001:db8::2"),
        ];
        let stats = lifetimes(&observations, LifetimeKey::Address);
        let one = stats[&parse_ipv6("2001:db8::1").unwrap().bits()];
        assert_eq!(one.lifetime(), 86400);
        let two = stats[&parse_ipv6("2001:db8::2").unwrap().bits()];
        assert_eq!(two.lifetime(), 0);
    }

    #[test]
    fn lifetime_mac_key_ignores_random_iids() {
        let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
        let observations = vec![
            eui64_obs(10, 0x2001_0db8_0000_0001, mac),
            obs(20, "2001:db8::123:4567:89ab:cdef"),
        ];
        let stats = lifetimes(&observations, LifetimeKey::Mac);
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[&u128::from(mac.bits())].lifetime(), 0);
    }

    #[test]
    fn ccdf_masses() {
        // 3 of 5 at zero: CCDF just above zero is 0.4.
        let points = ccdf(vec![0, 0, 0, 5, 9]);
        assert_eq!(points[0], (0, 0.4));
        assert_eq!(points[1], (5, 0.2));
        assert_eq!(points[2], (9, 0.0));
    }

    #[test]
    fn spread_and_trackable_fraction() {
        let mac1: Mac = "00:11:22:33:44:55".parse().unwrap();
        let mac2: Mac = "00:11:22:33:44:66".parse().unwrap();
        let (asmap, ccmap) = empty_maps();
        let observations = vec![
            eui64_obs(1, 0x2001_0db8_0000_0001, mac1),
            eui64_obs(2, 0x2001_0db8_0000_0002, mac1),
            eui64_obs(1, 0x2001_0db8_0000_0001, mac2),
        ];
        let (timelines, _) = build_timelines(&observations, &asmap, &ccmap);
        let spread = prefix_spread(&timelines).unwrap();
        assert_eq!(spread.trackable_fraction, 0.5);

        let all_single = build_timelines(
            &[eui64_obs(1, 0x2001_0db8_0000_0001, mac1)],
            &asmap,
            &ccmap,
        )
        .0;
        assert_eq!(prefix_spread(&all_single).unwrap().trackable_fraction, 0.0);

        assert!(prefix_spread(&BTreeMap::new()).is_err());
    }

    #[test]
    fn report_renders() {
        let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
        let (asmap, ccmap) = empty_maps();
        let (timelines, _) = build_timelines(
            &[
                eui64_obs(10, 0x2001_0db8_0000_0001, mac),
                eui64_obs(90, 0x2001_0db8_0000_0002, mac),
            ],
            &asmap,
            &ccmap,
        );
        let mut out = Vec::new();
        write_tracking_report(&mut out, &timelines).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("00:11:22:33:44:55,mostly_static,0,0,1,2,10,90"));
    }

    proptest! {
        #[test]
        fn classifier_is_total(asn in 0u64..100, cc in 0u64..100, tr in 0u64..1000, p64 in 1u64..1000) {
            let _ = classify_track(&fv(asn, cc, tr, p64));
        }

        #[test]
        fn transitions_invariant_under_consecutive_duplicates(seq in proptest::collection::vec(0u8..4, 1..20), dup_at in 0usize..20) {
            let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
            let make = |nets: &[u8]| {
                let observations: Vec<Observation> = nets
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| eui64_obs(i as u64 * 10, 0x2001_0db8_0000_0000 | u128::from(n), mac))
                    .collect();
                let (asmap, ccmap) = empty_maps();
                let (timelines, _) = build_timelines(&observations, &asmap, &ccmap);
                count_transitions(&timelines[&mac])
            };
            let base = make(&seq);
            let mut dup = seq.clone();
            let at = dup_at % seq.len();
            dup.insert(at + 1, seq[at]);
            // Timestamps shift but consecutive-duplicate insertion keeps the
            // transition count.
            prop_assert_eq!(base, make(&dup));
        }

        #[test]
        fn order_independence(keys in proptest::collection::vec(proptest::num::u64::ANY, 6)) {
            let mac: Mac = "00:11:22:33:44:55".parse().unwrap();
            let base: Vec<Observation> = (0..6)
                .map(|i| eui64_obs(i * 7, 0x2001_0db8_0000_0000 | u128::from(i % 3), mac))
                .collect();
            let mut order: Vec<usize> = (0..6).collect();
            order.sort_by_key(|&i| keys[i]);
            let shuffled: Vec<Observation> = order.iter().map(|&i| base[i].clone()).collect();
            let (asmap, ccmap) = empty_maps();
            let (a, _) = build_timelines(&base, &asmap, &ccmap);
            let (b, _) = build_timelines(&shuffled, &asmap, &ccmap);
            prop_assert_eq!(a[&mac].sightings.clone(), b[&mac].sightings.clone());
        }

        #[test]
        fn lifetime_nonnegative_and_zero_iff_single_ts(ts in proptest::collection::vec(0u64..1000, 1..10)) {
            let observations: Vec<Observation> = ts.iter().map(|&t| obs(t, "2001:db8::7")).collect();
            let stats = lifetimes(&observations, LifetimeKey::Address);
            let s = stats[&parse_ipv6("2001:db8::7").unwrap().bits()];
            let distinct: std::collections::BTreeSet<u64> = ts.iter().copied().collect();
            prop_assert_eq!(s.lifetime() == 0, distinct.len() == 1);
        }
    }
}
