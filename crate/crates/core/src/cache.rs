//! Pairwise similarity computation backed by a persistent CSV cache.
//!
//! Cache layout: header `seq_id_a,seq_id_b,similarity`, one row per pair in
//! canonical orientation (`seq_id_a < seq_id_b`), similarity printed with six
//! decimals. Rows are appended one batch per `write_all`, so a killed run
//! leaves at most one truncated trailing line, which is dropped on reopen.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{self, AlignmentParams};
use crate::error::{Error, Result};
use crate::ingest::CodingSequence;

pub const CACHE_HEADER: &str = "seq_id_a,seq_id_b,similarity";

/// Number of alignments computed between two cache appends.
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub seq_id_a: String,
    pub seq_id_b: String,
    pub similarity: f64,
}

impl SimilarityRecord {
    /// Builds a record in canonical orientation with the similarity rounded
    /// to its stored precision.
    pub fn new(a: &str, b: &str, similarity: f64) -> Self {
        let (a, b) = canonical_pair(a, b);
        SimilarityRecord {
            seq_id_a: a.to_string(),
            seq_id_b: b.to_string(),
            similarity: round_similarity(similarity),
        }
    }
}

pub fn canonical_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Rounds to the six decimals written to the cache, so values read back
/// from disk compare equal to freshly computed ones.
pub fn round_similarity(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}

/// Number of unordered pairs among `n` items.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Thread-safe similarity store, optionally mirrored to a CSV file.
#[derive(Debug)]
pub struct SimilarityStore {
    path: Option<PathBuf>,
    map: RwLock<HashMap<(String, String), f64>>,
    file: Mutex<Option<File>>,
}

impl SimilarityStore {
    pub fn in_memory() -> Self {
        SimilarityStore {
            path: None,
            map: RwLock::new(HashMap::new()),
            file: Mutex::new(None),
        }
    }

    /// Opens (or creates) a cache file and loads every complete row.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let io = |e| Error::io(&path, e);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;

        let mut map = HashMap::new();
        if text.is_empty() {
            file.write_all(format!("{CACHE_HEADER}\n").as_bytes())
                .map_err(io)?;
        } else {
            let complete = match text.rfind('\n') {
                Some(end) => end + 1,
                None => 0,
            };
            if complete < text.len() {
                // Partial row from an interrupted append.
                file.set_len(complete as u64).map_err(io)?;
                file.seek(SeekFrom::End(0)).map_err(io)?;
                text.truncate(complete);
            }
            let mut lines = text.lines();
            match lines.next() {
                Some(h) if h.trim() == CACHE_HEADER => {}
                None => {
                    file.write_all(format!("{CACHE_HEADER}\n").as_bytes())
                        .map_err(io)?;
                }
                Some(h) => {
                    return Err(Error::Cache {
                        path,
                        message: format!("unexpected header {h:?}"),
                    })
                }
            }
            for (idx, line) in lines.enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec = parse_row(line).map_err(|message| Error::Cache {
                    path: path.clone(),
                    message: format!("line {}: {message}", idx + 2),
                })?;
                map.insert((rec.seq_id_a, rec.seq_id_b), rec.similarity);
            }
        }
        Ok(SimilarityStore {
            path: Some(path),
            map: RwLock::new(map),
            file: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = canonical_pair(a, b);
        self.map
            .read()
            .expect("store lock")
            .get(&(a.to_string(), b.to_string()))
            .copied()
    }

    /// Appends a batch to the file (one write) and then to the in-memory map.
    pub fn insert_batch(&self, batch: &[SimilarityRecord]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut guard = self.file.lock().expect("store file lock");
        if let Some(file) = guard.as_mut() {
            let path = self.path.as_deref().expect("file-backed store has a path");
            let mut buf = String::with_capacity(batch.len() * 40);
            for r in batch {
                buf.push_str(&format_row(r));
            }
            file.write_all(buf.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| Error::Cache {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
        }
        let mut map = self.map.write().expect("store lock");
        for r in batch {
            let (a, b) = canonical_pair(&r.seq_id_a, &r.seq_id_b);
            map.insert((a.to_string(), b.to_string()), round_similarity(r.similarity));
        }
        Ok(())
    }

    /// Every stored record, sorted by pair.
    pub fn records(&self) -> Vec<SimilarityRecord> {
        let map = self.map.read().expect("store lock");
        let mut out: Vec<SimilarityRecord> = map
            .iter()
            .map(|((a, b), &s)| SimilarityRecord {
                seq_id_a: a.clone(),
                seq_id_b: b.clone(),
                similarity: s,
            })
            .collect();
        out.sort_by(|x, y| (&x.seq_id_a, &x.seq_id_b).cmp(&(&y.seq_id_a, &y.seq_id_b)));
        out
    }
}

pub fn format_row(r: &SimilarityRecord) -> String {
    format!("{},{},{:.6}\n", r.seq_id_a, r.seq_id_b, r.similarity)
}

fn parse_row(line: &str) -> std::result::Result<SimilarityRecord, String> {
    let mut parts = line.trim_end().split(',');
    let (Some(a), Some(b), Some(s), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(format!("expected 3 fields in {line:?}"));
    };
    if a.is_empty() || b.is_empty() || a == b {
        return Err(format!("bad sequence ids in {line:?}"));
    }
    let sim: f64 = s.parse().map_err(|_| format!("bad similarity {s:?}"))?;
    if !(0.0..=1.0).contains(&sim) {
        return Err(format!("similarity {sim} outside [0, 1]"));
    }
    Ok(SimilarityRecord::new(a, b, sim))
}

/// Result of [`all_pairs`].
#[derive(Debug, Clone)]
pub struct PairwiseOutcome {
    /// One record per unordered pair of input sequences, sorted by pair.
    pub records: Vec<SimilarityRecord>,
    /// Alignments actually executed (cache misses).
    pub computed: usize,
}

/// Similarity for every unordered pair of `seqs`, computing only the pairs
/// missing from `store` on a pool of `workers` threads.
pub fn all_pairs(
    seqs: &[CodingSequence],
    params: &AlignmentParams,
    store: &SimilarityStore,
    workers: usize,
) -> Result<PairwiseOutcome> {
    params.validate()?;
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    for s in seqs {
        if !seen.insert(s.seq_id.as_str()) {
            return Err(Error::Input(format!("duplicate sequence id {}", s.seq_id)));
        }
    }

    let mut missing = Vec::new();
    for i in 0..seqs.len() {
        for j in i + 1..seqs.len() {
            if store.get(&seqs[i].seq_id, &seqs[j].seq_id).is_none() {
                missing.push((i, j));
            }
        }
    }

    let computed = missing.len();
    if computed > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Compute(format!("worker pool: {e}")))?;
        for chunk in missing.chunks(BATCH) {
            let batch: Result<Vec<SimilarityRecord>> = pool.install(|| {
                chunk
                    .par_iter()
                    .map(|&(i, j)| {
                        let (a, b) = (&seqs[i], &seqs[j]);
                        align::similarity(a.dna.as_bytes(), b.dna.as_bytes(), params)
                            .map(|s| SimilarityRecord::new(&a.seq_id, &b.seq_id, s))
                            .map_err(|e| Error::PairAlignment {
                                a: a.seq_id.clone(),
                                b: b.seq_id.clone(),
                                message: e.to_string(),
                            })
                    })
                    .collect()
            });
            store.insert_batch(&batch?)?;
        }
    }

    let mut records = Vec::with_capacity(pair_count(seqs.len()));
    for i in 0..seqs.len() {
        for j in i + 1..seqs.len() {
            let (a, b) = (&seqs[i].seq_id, &seqs[j].seq_id);
            let sim = store.get(a, b).ok_or_else(|| Error::MissingPair {
                a: a.clone(),
                b: b.clone(),
            })?;
            records.push(SimilarityRecord::new(a, b, sim));
        }
    }
    records.sort_by(|x, y| (&x.seq_id_a, &x.seq_id_b).cmp(&(&y.seq_id_a, &y.seq_id_b)));
    Ok(PairwiseOutcome { records, computed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FeatureKind;

    fn cs(id: &str, dna: &str) -> CodingSequence {
        CodingSequence {
            seq_id: id.into(),
            raw_name: None,
            feature_kind: FeatureKind::Cds,
            dna: dna.into(),
        }
    }

    fn three() -> Vec<CodingSequence> {
        vec![
            cs("G:0", "ACGTACGT"),
            cs("G:1", "ACGTTCGT"),
            cs("H:0", "TTTTGGGG"),
        ]
    }

    #[test]
    fn canonical_orientation() {
        let r = SimilarityRecord::new("b:1", "a:2", 0.1234567);
        assert_eq!((r.seq_id_a.as_str(), r.seq_id_b.as_str()), ("a:2", "b:1"));
        assert_eq!(r.similarity, 0.123457);
        assert_eq!(format_row(&r), "a:2,b:1,0.123457\n");
    }

    #[test]
    fn empty_cache_computes_all() {
        let store = SimilarityStore::in_memory();
        let out = all_pairs(&three(), &AlignmentParams::default(), &store, 1).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.computed, 3);
        assert_eq!(store.len(), 3);
    }

    #[test]
    fn partial_cache_computes_rest() {
        let seqs = three();
        let p = AlignmentParams::default();
        let store = SimilarityStore::in_memory();
        store
            .insert_batch(&[
                SimilarityRecord::new("G:0", "G:1", 0.5),
                SimilarityRecord::new("H:0", "G:0", 0.25),
            ])
            .unwrap();
        let out = all_pairs(&seqs, &p, &store, 2).unwrap();
        assert_eq!(out.computed, 1);
        // Cached values are used as-is.
        assert_eq!(store.get("G:1", "G:0"), Some(0.5));
        let again = all_pairs(&seqs, &p, &store, 2).unwrap();
        assert_eq!(again.computed, 0);
        assert_eq!(again.records, out.records);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let seqs = vec![cs("G:0", "A"), cs("G:0", "C")];
        assert!(all_pairs(
            &seqs,
            &AlignmentParams::default(),
            &SimilarityStore::in_memory(),
            1
        )
        .is_err());
    }

    #[test]
    fn file_round_trip_and_truncated_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("cache.csv");
        let seqs = three();
        let p = AlignmentParams::default();
        let first = {
            let store = SimilarityStore::open(&path).unwrap();
            all_pairs(&seqs, &p, &store, 1).unwrap()
        };
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("seq_id_a,seq_id_b,similarity\n"));
        assert_eq!(text.lines().count(), 4);

        // Simulate a crash in the middle of an append.
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"H:0,Z:9,0.12").unwrap();
        drop(f);

        let store = SimilarityStore::open(&path).unwrap();
        assert_eq!(store.len(), 3);
        let second = all_pairs(&seqs, &p, &store, 3).unwrap();
        assert_eq!(second.computed, 0);
        assert_eq!(second.records, first.records);
        assert!(std::fs::read_to_string(&path).unwrap().ends_with('\n'));
    }

    #[test]
    fn bad_cache_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "seq_id_a,seq_id_b,similarity\na,b,1.5\n").unwrap();
        let err = SimilarityStore::open(&path).unwrap_err();
        assert!(err.to_string().contains("c.csv"), "{err}");
        std::fs::write(&path, "wrong\n").unwrap();
        assert!(SimilarityStore::open(&path).is_err());
    }

    #[test]
    fn pair_count_formula() {
        assert_eq!(pair_count(0), 0);
        assert_eq!(pair_count(1), 0);
        assert_eq!(pair_count(3), 3);
        assert_eq!(pair_count(99), 4851);
    }
}
