//! Deduplicated corpus persistence.
//!
//! Ingest streams `unix_seconds,ipv6,vantage_id` lines into a sorted flat
//! binary index of 128-bit values plus a JSON sidecar of counters. Memory is
//! bounded by a configurable chunk size, not by stream length: full chunks
//! are sorted and spilled as runs, then k-way merged, so corpora far larger
//! than memory dedup correctly.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::addr::Ip6;
use crate::error::{Error, Result};

pub const INDEX_FILE: &str = "index.bin";
pub const COUNTERS_FILE: &str = "counters.json";

/// Ingest tuning knobs.
#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// Maximum addresses buffered before spilling a sorted run.
    pub max_in_memory: usize,
    /// Where run files go; defaults to a `runs` directory inside the store.
    pub tmp_dir: Option<PathBuf>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            max_in_memory: 4_000_000,
            tmp_dir: None,
        }
    }
}

/// Counters persisted in the store sidecar. Each is recomputable from the
/// index itself, which keeps them spot-checkable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub unique_addresses: u64,
    pub unique_48s: u64,
    pub unique_64s: u64,
    pub observations: u64,
    pub malformed_lines: u64,
}

/// Per-run ingest statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub lines: u64,
    pub observations: u64,
    pub malformed: u64,
    pub runs_spilled: usize,
    pub max_chunk_len: usize,
}

/// A frozen, sorted, deduplicated address index on disk.
#[derive(Debug)]
pub struct CorpusStore {
    dir: PathBuf,
    pub counters: Counters,
}

impl CorpusStore {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn open(dir: impl Into<PathBuf>) -> Result<CorpusStore> {
        let dir = dir.into();
        let file = File::open(dir.join(COUNTERS_FILE))?;
        let counters: Counters = serde_json::from_reader(file)?;
        Ok(CorpusStore { dir, counters })
    }

    /// Streams the index in ascending order.
    pub fn iter_addresses(&self) -> Result<AddrIter> {
        Ok(AddrIter {
            reader: BufReader::with_capacity(1 << 16, File::open(self.dir.join(INDEX_FILE))?),
        })
    }

    /// Loads the whole index. Fine at desk scale; prefer iteration beyond.
    pub fn load_addresses(&self) -> Result<Vec<Ip6>> {
        let mut out = Vec::with_capacity(self.counters.unique_addresses as usize);
        for addr in self.iter_addresses()? {
            out.push(addr?);
        }
        Ok(out)
    }
}

/// Streaming reader over the binary index.
pub struct AddrIter {
    reader: BufReader<File>,
}

impl Iterator for AddrIter {
    type Item = std::io::Result<Ip6>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buf = [0u8; 16];
        let mut filled = 0;
        while filled < 16 {
            match self.reader.read(&mut buf[filled..]) {
                Ok(0) if filled == 0 => return None,
                Ok(0) => {
                    return Some(Err(std::io::Error::new(
                        std::io::ErrorKind::UnexpectedEof,
                        "truncated index record",
                    )));
                }
                Ok(n) => filled += n,
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(Ip6::from_bits(u128::from_be_bytes(buf))))
    }
}

/// Ingests an observation stream into `store_dir`.
///
/// Duplicate addresses collapse into one index entry; malformed lines are
/// counted and skipped, but more than 1% of them fails the whole ingest.
pub fn ingest(
    reader: impl BufRead,
    store_dir: impl AsRef<Path>,
    cfg: &IngestConfig,
) -> Result<(CorpusStore, IngestStats)> {
    let store_dir = store_dir.as_ref();
    std::fs::create_dir_all(store_dir)?;
    let runs_dir = cfg
        .tmp_dir
        .clone()
        .unwrap_or_else(|| store_dir.join("runs"));

    let cap = cfg.max_in_memory.max(2);
    let mut chunk: Vec<u128> = Vec::with_capacity(cap.min(1 << 22));
    let mut runs: Vec<PathBuf> = Vec::new();
    let mut stats = IngestStats::default();

    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        stats.lines += 1;
        match parse_line(trimmed) {
            Some(bits) => {
                stats.observations += 1;
                chunk.push(bits);
                stats.max_chunk_len = stats.max_chunk_len.max(chunk.len());
                if chunk.len() >= cap {
                    spill_run(&runs_dir, &mut chunk, &mut runs)?;
                    stats.runs_spilled += 1;
                }
            }
            None => stats.malformed += 1,
        }
    }

    if stats.lines > 0 && stats.malformed as f64 / stats.lines as f64 > 0.01 {
        return Err(Error::MalformedRate {
            malformed: stats.malformed,
            total: stats.lines,
            pct: 100.0 * stats.malformed as f64 / stats.lines as f64,
        });
    }

    let index_path = store_dir.join(INDEX_FILE);
    let mut counters = Counters {
        observations: stats.observations,
        malformed_lines: stats.malformed,
        ..Counters::default()
    };

    if runs.is_empty() {
        chunk.sort_unstable();
        chunk.dedup();
        let mut out = CountingWriter::new(&index_path, &mut counters)?;
        for &bits in &chunk {
            out.push(bits)?;
        }
        out.finish()?;
    } else {
        if !chunk.is_empty() {
            spill_run(&runs_dir, &mut chunk, &mut runs)?;
            stats.runs_spilled += 1;
        }
        merge_runs(&runs, &index_path, &mut counters)?;
        let _ = std::fs::remove_dir_all(&runs_dir);
    }

    let sidecar = File::create(store_dir.join(COUNTERS_FILE))?;
    serde_json::to_writer_pretty(BufWriter::new(sidecar), &counters)?;

    Ok((
        CorpusStore {
            dir: store_dir.to_path_buf(),
            counters,
        },
        stats,
    ))
}

/// Fast path for `unix_seconds,ipv6,vantage_id`.
fn parse_line(line: &str) -> Option<u128> {
    let (ts, rest) = line.split_once(',')?;
    let (addr, vantage) = rest.split_once(',')?;
    if vantage.is_empty() || ts.is_empty() || ts.bytes().any(|b| !b.is_ascii_digit()) {
        return None;
    }
    crate::addr::parse_ipv6(addr).ok().map(|a| a.bits())
}

fn spill_run(runs_dir: &Path, chunk: &mut Vec<u128>, runs: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(runs_dir)?;
    chunk.sort_unstable();
    chunk.dedup();
    let path = runs_dir.join(format!("run_{:05}.bin", runs.len()));
    let mut w = BufWriter::with_capacity(1 << 16, File::create(&path)?);
    for &bits in chunk.iter() {
        w.write_all(&bits.to_be_bytes())?;
    }
    w.flush()?;
    runs.push(path);
    chunk.clear();
    Ok(())
}

/// Writes ascending unique values while tracking /48 and /64 rollups.
struct CountingWriter<'c> {
    w: BufWriter<File>,
    counters: &'c mut Counters,
    last: Option<u128>,
}

const MASK48: u128 = !0u128 << 80;
const MASK64: u128 = !0u128 << 64;

impl<'c> CountingWriter<'c> {
    fn new(path: &Path, counters: &'c mut Counters) -> Result<Self> {
        Ok(CountingWriter {
            w: BufWriter::with_capacity(1 << 16, File::create(path)?),
            counters,
            last: None,
        })
    }

    fn push(&mut self, bits: u128) -> Result<()> {
        debug_assert!(self.last.is_none_or(|l| l < bits), "input must be ascending");
        self.counters.unique_addresses += 1;
        match self.last {
            Some(last) => {
                if last & MASK48 != bits & MASK48 {
                    self.counters.unique_48s += 1;
                }
                if last & MASK64 != bits & MASK64 {
                    self.counters.unique_64s += 1;
                }
            }
            None => {
                self.counters.unique_48s += 1;
                self.counters.unique_64s += 1;
            }
        }
        self.last = Some(bits);
        self.w.write_all(&bits.to_be_bytes())?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

struct RunReader {
    reader: BufReader<File>,
}

impl RunReader {
    fn next(&mut self) -> Result<Option<u128>> {
        let mut buf = [0u8; 16];
        let mut filled = 0;
        while filled < 16 {
            let n = self.reader.read(&mut buf[filled..])?;
            if n == 0 {
                if filled == 0 {
                    return Ok(None);
                }
                return Err(Error::Other("truncated run file".into()));
            }
            filled += n;
        }
        Ok(Some(u128::from_be_bytes(buf)))
    }
}

fn merge_runs(runs: &[PathBuf], index_path: &Path, counters: &mut Counters) -> Result<()> {
    let mut readers: Vec<RunReader> = Vec::with_capacity(runs.len());
    for path in runs {
        readers.push(RunReader {
            reader: BufReader::with_capacity(1 << 16, File::open(path)?),
        });
    }

    let mut heap: BinaryHeap<Reverse<(u128, usize)>> = BinaryHeap::new();
    for (i, r) in readers.iter_mut().enumerate() {
        if let Some(bits) = r.next()? {
            heap.push(Reverse((bits, i)));
        }
    }

    let mut out = CountingWriter::new(index_path, counters)?;
    let mut last: Option<u128> = None;
    while let Some(Reverse((bits, i))) = heap.pop() {
        if last != Some(bits) {
            out.push(bits)?;
            last = Some(bits);
        }
        if let Some(next) = readers[i].next()? {
            heap.push(Reverse((next, i)));
        }
    }
    out.finish()
}

/// Loads a plain address list (one per line, `#` comments) as a sorted
/// deduplicated vector; used for comparison corpora.
pub fn load_address_list(path: impl AsRef<Path>) -> Result<Vec<Ip6>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let addr: Ip6 = trimmed.parse().map_err(|e| Error::Line {
            line: i + 1,
            text: trimmed.to_string(),
            reason: format!("{e}"),
        })?;
        out.push(addr);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
