//! Backscan planning and aliased-network inference.
//!
//! For each collection interval the plan probes every client address plus
//! one seeded-random address inside each distinct client /64; no address is
//! probed twice within a plan. A random target that answers almost certainly
//! sits in an aliased /64, since guessing a live random IID is hopeless.
//!
//! Live probing is out of scope: the [`Prober`] trait is implemented by a
//! configurable mock responder and by a file-based round trip.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::addr::{Ip6, Prefix};
use crate::error::{Error, Result};
use crate::prefix_map::PrefixTable;

/// Whether a target is a client address or the random same-/64 draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Client,
    Random,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Client => "client",
            TargetKind::Random => "random",
        }
    }
}

/// One planned probe target with the /64 it derives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanTarget {
    pub addr: Ip6,
    pub kind: TargetKind,
    pub origin64: Prefix,
}

/// A deduplicated probe plan for one interval.
#[derive(Debug, Clone)]
pub struct ProbePlan {
    pub interval_start: u64,
    pub targets: Vec<PlanTarget>,
}

impl ProbePlan {
    pub fn client_count(&self) -> usize {
        self.targets
            .iter()
            .filter(|t| t.kind == TargetKind::Client)
            .count()
    }

    pub fn random_count(&self) -> usize {
        self.targets.len() - self.client_count()
    }
}

/// Builds the probe plan for one interval: all client addresses plus one
/// seeded-random target per distinct client /64 (re-drawn on collision with
/// a client address, bounded at 8 attempts, then skipped with a warning).
///
/// Fully determined by `(clients, seed)`.
pub fn plan_interval(
    clients: &BTreeSet<Ip6>,
    interval_start: u64,
    seed: u64,
) -> (ProbePlan, Vec<String>) {
    let mut targets: Vec<PlanTarget> = Vec::with_capacity(clients.len() * 2);
    let mut chosen: BTreeSet<Ip6> = BTreeSet::new();
    let mut warnings = Vec::new();

    let mut nets: BTreeSet<Prefix> = BTreeSet::new();
    for &client in clients {
        let origin = client.net64();
        nets.insert(origin);
        if chosen.insert(client) {
            targets.push(PlanTarget {
                addr: client,
                kind: TargetKind::Client,
                origin64: origin,
            });
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for net in nets {
        let mut placed = false;
        for _ in 0..8 {
            let candidate = Ip6::from_bits(net.base().bits() | u128::from(rng.random::<u64>()));
            if chosen.contains(&candidate) {
                continue;
            }
            chosen.insert(candidate);
            targets.push(PlanTarget {
                addr: candidate,
                kind: TargetKind::Random,
                origin64: net,
            });
            placed = true;
            break;
        }
        if !placed {
            warnings.push(format!("no unused random target found in {net}, skipped"));
        }
    }

    (
        ProbePlan {
            interval_start,
            targets,
        },
        warnings,
    )
}

/// Outcome of probing one planned target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeResponse {
    pub target: Ip6,
    pub responded: bool,
    pub kind: TargetKind,
}

/// Anything that can evaluate a probe plan.
pub trait Prober {
    fn probe(&mut self, plan: &ProbePlan) -> Vec<ProbeResponse>;
}

/// Deterministic simulated responder.
///
/// Client targets answer with `client_response_rate`; random targets answer
/// with `random_response_rate` when their /64 falls under a configured
/// aliased prefix and never otherwise. Decisions hash the target address
/// with the seed, so they are independent of plan order.
pub struct MockResponder {
    pub aliased: PrefixTable<bool>,
    pub client_response_rate: f64,
    pub random_response_rate: f64,
    pub seed: u64,
}

impl MockResponder {
    pub fn new(aliased: PrefixTable<bool>, seed: u64) -> Self {
        MockResponder {
            aliased,
            client_response_rate: 2.0 / 3.0,
            random_response_rate: 1.0,
            seed,
        }
    }

    fn coin(&self, addr: Ip6, rate: f64) -> bool {
        if rate >= 1.0 {
            return true;
        }
        if rate <= 0.0 {
            return false;
        }
        let bits = addr.bits();
        let mut x = self.seed ^ (bits as u64) ^ ((bits >> 64) as u64).rotate_left(17);
        // splitmix64 finalizer
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
        (x as f64 / u64::MAX as f64) < rate
    }
}

impl Prober for MockResponder {
    fn probe(&mut self, plan: &ProbePlan) -> Vec<ProbeResponse> {
        plan.targets
            .iter()
            .map(|t| {
                let responded = match t.kind {
                    TargetKind::Client => self.coin(t.addr, self.client_response_rate),
                    TargetKind::Random => {
                        self.aliased.lookup_longest(t.addr) == Some(&true)
                            && self.coin(t.addr, self.random_response_rate)
                    }
                };
                ProbeResponse {
                    target: t.addr,
                    responded,
                    kind: t.kind,
                }
            })
            .collect()
    }
}

/// Writes the plan file: `target,kind,origin_slash64`.
pub fn write_plan_csv(mut w: impl Write, plan: &ProbePlan) -> std::io::Result<()> {
    writeln!(w, "target,kind,origin_slash64")?;
    for t in &plan.targets {
        writeln!(w, "{},{},{}", t.addr, t.kind.name(), t.origin64)?;
    }
    Ok(())
}

/// Reads a plan file written by [`write_plan_csv`].
pub fn read_plan_csv(reader: impl BufRead, interval_start: u64) -> Result<ProbePlan> {
    let mut targets = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if i == 0 && trimmed.starts_with("target,") {
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Line {
            line: i + 1,
            text: trimmed.to_string(),
            reason: reason.to_string(),
        };
        let mut fields = trimmed.split(',');
        let (Some(addr), Some(kind), Some(origin)) =
            (fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected `target,kind,origin_slash64`"));
        };
        let addr: Ip6 = addr.parse().map_err(|_| bad("bad target"))?;
        let kind = match kind {
            "client" => TargetKind::Client,
            "random" => TargetKind::Random,
            _ => return Err(bad("bad kind")),
        };
        let origin: Prefix = origin.parse().map_err(|_| bad("bad origin"))?;
        targets.push(PlanTarget {
            addr,
            kind,
            origin64: origin,
        });
    }
    Ok(ProbePlan {
        interval_start,
        targets,
    })
}

/// Writes the response file: `target,responded` with 0/1 flags.
pub fn write_responses_csv(
    mut w: impl Write,
    responses: &[ProbeResponse],
) -> std::io::Result<()> {
    writeln!(w, "target,responded")?;
    for r in responses {
        writeln!(w, "{},{}", r.target, u8::from(r.responded))?;
    }
    Ok(())
}

/// Reads a response file, joining each target against the plan to recover
/// its kind. A response for an address missing from the plan is an error.
pub fn read_responses_csv(reader: impl BufRead, plan: &ProbePlan) -> Result<Vec<ProbeResponse>> {
    let kinds: HashMap<Ip6, TargetKind> =
        plan.targets.iter().map(|t| (t.addr, t.kind)).collect();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if i == 0 && trimmed.starts_with("target,") {
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Line {
            line: i + 1,
            text: trimmed.to_string(),
            reason: reason.to_string(),
        };
        let (addr, flag) = trimmed
            .split_once(',')
            .ok_or_else(|| bad("expected `target,responded`"))?;
        let addr: Ip6 = addr.parse().map_err(|_| bad("bad target"))?;
        let responded = match flag.trim() {
            "0" => false,
            "1" => true,
            _ => return Err(bad("bad responded flag")),
        };
        let kind = *kinds
            .get(&addr)
            .ok_or(Error::UnplannedResponse(addr))?;
        out.push(ProbeResponse {
            target: addr,
            responded,
            kind,
        });
    }
    Ok(out)
}

/// An aliased-/64 inference backed by the random target that answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliasVerdict {
    pub prefix: Prefix,
    pub aliased: bool,
    pub evidence: Ip6,
}

/// Per-kind hit rates for one evaluated plan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Responsiveness {
    pub client_targets: u64,
    pub client_hits: u64,
    pub random_targets: u64,
    pub random_hits: u64,
}

impl Responsiveness {
    pub fn client_hit_rate(&self) -> f64 {
        if self.client_targets == 0 {
            0.0
        } else {
            self.client_hits as f64 / self.client_targets as f64
        }
    }

    pub fn random_hit_rate(&self) -> f64 {
        if self.random_targets == 0 {
            0.0
        } else {
            self.random_hits as f64 / self.random_targets as f64
        }
    }

    pub fn merge(&mut self, other: &Responsiveness) {
        self.client_targets += other.client_targets;
        self.client_hits += other.client_hits;
        self.random_targets += other.random_targets;
        self.random_hits += other.random_hits;
    }
}

/// Turns responses into alias verdicts: every /64 whose random target
/// answered is inferred aliased. Responses must reference planned targets.
pub fn infer_aliased(
    plan: &ProbePlan,
    responses: &[ProbeResponse],
) -> Result<(Vec<AliasVerdict>, Responsiveness)> {
    let by_addr: HashMap<Ip6, &PlanTarget> =
        plan.targets.iter().map(|t| (t.addr, t)).collect();

    let mut summary = Responsiveness::default();
    for t in &plan.targets {
        match t.kind {
            TargetKind::Client => summary.client_targets += 1,
            TargetKind::Random => summary.random_targets += 1,
        }
    }

    let mut verdicts = Vec::new();
    let mut seen: BTreeSet<Ip6> = BTreeSet::new();
    for r in responses {
        let planned = by_addr
            .get(&r.target)
            .ok_or(Error::UnplannedResponse(r.target))?;
        if planned.kind != r.kind {
            return Err(Error::Argument(format!(
                "response kind mismatch for {}",
                r.target
            )));
        }
        if !r.responded || !seen.insert(r.target) {
            continue;
        }
        match r.kind {
            TargetKind::Client => summary.client_hits += 1,
            TargetKind::Random => {
                summary.random_hits += 1;
                verdicts.push(AliasVerdict {
                    prefix: planned.origin64,
                    aliased: true,
                    evidence: r.target,
                });
            }
        }
    }
    verdicts.sort_by_key(|v| v.prefix);
    Ok((verdicts, summary))
}

/// Split of inferred aliased /64s into those an external alias list already
/// covers and those it does not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasComparison {
    pub known: u64,
    pub new: u64,
    pub new_prefixes: Vec<Prefix>,
}

/// A verdict is known iff the external table marks its evidence address
/// aliased (any covering prefix counts).
pub fn compare_alias_lists(
    verdicts: &[AliasVerdict],
    external: &PrefixTable<bool>,
) -> AliasComparison {
    let mut known = 0u64;
    let mut new_prefixes = Vec::new();
    for v in verdicts {
        if external.lookup_longest(v.evidence) == Some(&true) {
            known += 1;
        } else {
            new_prefixes.push(v.prefix);
        }
    }
    AliasComparison {
        known,
        new: new_prefixes.len() as u64,
        new_prefixes,
    }
}

/// Clients living inside inferred-aliased /64s, with a per-AS breakdown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClientsInAliased {
    pub total: u64,
    pub per_as: BTreeMap<u32, u64>,
    pub unattributed: u64,
}

pub fn clients_in_aliased(
    clients: &BTreeSet<Ip6>,
    verdicts: &[AliasVerdict],
    asmap: &PrefixTable<u32>,
) -> ClientsInAliased {
    let aliased: BTreeSet<Prefix> = verdicts.iter().map(|v| v.prefix).collect();
    let mut out = ClientsInAliased::default();
    for &client in clients {
        if !aliased.contains(&client.net64()) {
            continue;
        }
        out.total += 1;
        match asmap.lookup_longest(client) {
            Some(&asn) => *out.per_as.entry(asn).or_insert(0) += 1,
            None => out.unattributed += 1,
        }
    }
    out
}

/// The JSON summary emitted after alias inference.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AliasSummary {
    pub client_hit_rate: f64,
    pub random_hit_rate: f64,
    pub aliased_64_count: u64,
    pub known: u64,
    pub new: u64,
}

impl AliasSummary {
    pub fn new(resp: &Responsiveness, comparison: &AliasComparison) -> Self {
        AliasSummary {
            client_hit_rate: resp.client_hit_rate(),
            random_hit_rate: resp.random_hit_rate(),
            aliased_64_count: comparison.known + comparison.new,
            known: comparison.known,
            new: comparison.new,
        }
    }
}
