//! End-to-end runs: ingest, similarity or name method, reports, manifest.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::AlignmentParams;
use crate::cache::{all_pairs, SimilarityStore};
use crate::cluster::{core_pan_report, threshold_sweep, write_sweep_csv};
use crate::error::{Error, Result};
use crate::ingest::{
    self, filter_features, load_annotation_table, load_fasta, AnnotationSource, DegeneratePolicy,
    FeatureKind, Genome, GenomeMeta, IngestOptions,
};
use crate::names::{build_icm, extract_cores, to_name_set, NameSet};
use crate::tree::{build_forest, emit_dot, emit_newick};

pub const TOOL_NAME: &str = "coregene";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header of a FASTA manifest: one genome per row, paths relative to the
/// manifest file.
pub const FASTA_MANIFEST_COLUMNS: [&str; 4] = ["path", "accession", "scientific_name", "family"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Similarity,
    Names,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "similarity" => Ok(Method::Similarity),
            "names" => Ok(Method::Names),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    pub annotation_mode: AnnotationSource,
    /// One threshold or a sweep; ignored by the name method.
    pub thresholds: Vec<f64>,
    /// `None` selects the annotation mode's default kinds.
    pub feature_kinds: Option<BTreeSet<FeatureKind>>,
    pub params: AlignmentParams,
    pub degenerate: DegeneratePolicy,
    /// `None` keeps similarities in memory only.
    pub cache_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub input: PathBuf,
}

impl RunConfig {
    pub fn new(method: Method, input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            method,
            annotation_mode: AnnotationSource::Ncbi,
            thresholds: Vec::new(),
            feature_kinds: None,
            params: AlignmentParams::default(),
            degenerate: DegeneratePolicy::Strip,
            cache_path: None,
            output_dir: output_dir.into(),
            workers: 1,
            input: input.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.params.validate()?;
        if let Some(k) = &self.feature_kinds {
            if k.is_empty() {
                return Err(Error::Config("feature kind set is empty".into()));
            }
        }
        if self.method == Method::Similarity {
            if self.thresholds.is_empty() {
                return Err(Error::Config(
                    "the similarity method needs at least one --threshold".into(),
                ));
            }
            for &t in &self.thresholds {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Threshold(t));
                }
            }
        }
        Ok(())
    }

    pub fn kinds(&self) -> BTreeSet<FeatureKind> {
        self.feature_kinds
            .clone()
            .unwrap_or_else(|| self.annotation_mode.default_kinds())
    }

    /// Sorted, de-duplicated thresholds.
    pub fn sweep(&self) -> Vec<f64> {
        let mut t = self.thresholds.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

/// Files written by a run, plus counters that are not part of the outputs.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub output_dir: PathBuf,
    /// Output file names, relative to `output_dir`, manifest last.
    pub files: Vec<String>,
    pub alignments_computed: usize,
    pub unnamed_sequences: usize,
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

/// Everything in a run that can change its results. Paths of the cache and
/// output directory are left out so equivalent runs produce equal manifests.
#[derive(Debug, Serialize)]
struct ConfigEcho {
    method: Method,
    annotation_mode: AnnotationSource,
    thresholds: Vec<f64>,
    feature_kinds: BTreeSet<FeatureKind>,
    params: AlignmentParams,
    degenerate: DegeneratePolicy,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    config: ConfigEcho,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    content_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Loads either an annotation table or a FASTA manifest, deciding by the
/// header row. Returns the genomes and every file that was read.
pub fn load_input(path: &Path, opts: IngestOptions) -> Result<(Vec<Genome>, Vec<PathBuf>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let cols: Vec<&str> = header.trim_end().split('\t').map(str::trim).collect();

    if cols.first() == Some(&"path") {
        load_fasta_manifest(path, &cols, opts)
    } else {
        let genomes = load_annotation_table(path, opts)?;
        Ok((genomes, vec![path.to_path_buf()]))
    }
}

fn load_fasta_manifest(
    path: &Path,
    header: &[&str],
    opts: IngestOptions,
) -> Result<(Vec<Genome>, Vec<PathBuf>)> {
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(FASTA_MANIFEST_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::parse(path, format!("missing column {name:?}")))?;
    }
    let base = path.parent().unwrap_or(Path::new(""));
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut genomes = Vec::new();
    let mut files = vec![path.to_path_buf()];
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let get = |i: usize| {
            fields.get(idx[i]).copied().ok_or_else(|| {
                Error::parse(
                    path,
                    format!("line {}: missing field {}", n + 1, FASTA_MANIFEST_COLUMNS[i]),
                )
            })
        };
        let fasta = base.join(get(0)?);
        let meta = GenomeMeta {
            scientific_name: get(2)?.to_string(),
            family: get(3)?.to_string(),
        };
        genomes.push(load_fasta(&fasta, get(1)?, &meta, opts)?);
        files.push(fasta);
    }
    if genomes.is_empty() {
        return Err(Error::parse(path, "manifest lists no genomes"));
    }
    Ok((genomes, files))
}

struct Outputs {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| Error::Compute(format!("serializing {name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

fn threshold_file_name(t: f64) -> String {
    format!("core_pan_T{t}.json")
}

/// Runs the configured method and writes all reports into `output_dir`.
pub fn run(config: &RunConfig) -> Result<ReportBundle> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let opts = IngestOptions {
        degenerate: config.degenerate,
        source: config.annotation_mode,
    };
    let (raw, input_files) = load_input(&config.input, opts).map_err(|e| e.in_stage("ingest"))?;
    ingest::validate_dataset(&raw).map_err(|e| e.in_stage("ingest"))?;
    let kinds = config.kinds();
    let genomes = raw
        .iter()
        .map(|g| filter_features(g, &kinds))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("ingest"))?;

    fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::io(&config.output_dir, e).in_stage("output"))?;
    let mut out = Outputs {
        dir: config.output_dir.clone(),
        written: Vec::new(),
    };
    let mut alignments_computed = 0;
    let mut unnamed_sequences = 0;

    match config.method {
        Method::Similarity => {
            let store = match &config.cache_path {
                Some(p) => SimilarityStore::open(p),
                None => Ok(SimilarityStore::in_memory()),
            }
            .map_err(|e| e.in_stage("cache"))?;
            let seqs: Vec<_> = genomes.iter().flat_map(|g| g.sequences.iter().cloned()).collect();
            let pairs =
                all_pairs(&seqs, &config.params, &store, config.workers).map_err(|e| e.in_stage("align"))?;
            alignments_computed = pairs.computed;

            let thresholds = config.sweep();
            let rows =
                threshold_sweep(&pairs.records, &genomes, &thresholds).map_err(|e| e.in_stage("cluster"))?;
            let mut csv = Vec::new();
            write_sweep_csv(&rows, &mut csv).expect("writing to memory");
            out.write("sweep.csv", &csv).map_err(|e| e.in_stage("output"))?;
            for &t in &thresholds {
                let report =
                    core_pan_report(&pairs.records, &genomes, t).map_err(|e| e.in_stage("cluster"))?;
                out.json(&threshold_file_name(t), &report)
                    .map_err(|e| e.in_stage("output"))?;
            }
        }
        Method::Names => {
            let mut sets: Vec<NameSet> = Vec::with_capacity(genomes.len());
            for g in &genomes {
                let named = to_name_set(g, config.annotation_mode).map_err(|e| e.in_stage("names"))?;
                unnamed_sequences += named.unnamed;
                sets.push(named.set);
            }
            let icm = build_icm(sets.clone()).map_err(|e| e.in_stage("names"))?;
            let mut csv = Vec::new();
            icm.write_csv(&mut csv).expect("writing to memory");
            out.write("icm.csv", &csv).map_err(|e| e.in_stage("output"))?;

            let history = extract_cores(sets.clone()).map_err(|e| e.in_stage("names"))?;
            let forest = build_forest(&history, &genomes).map_err(|e| e.in_stage("tree"))?;
            out.json("core_forest.json", &forest)
                .map_err(|e| e.in_stage("output"))?;
            out.write("core_tree.dot", emit_dot(&forest).as_bytes())
                .map_err(|e| e.in_stage("output"))?;
            out.write("core_tree.nwk", emit_newick(&forest).as_bytes())
                .map_err(|e| e.in_stage("output"))?;

            let mut core: BTreeSet<String> = sets[0].names.clone();
            let mut pan = BTreeSet::new();
            for s in &sets {
                core.retain(|n| s.names.contains(n));
                pan.extend(s.names.iter().cloned());
            }
            let report = serde_json::json!({
                "core": core,
                "pan": pan,
                "unnamed_sequences": unnamed_sequences,
            });
            out.json("core_pan.json", &report)
                .map_err(|e| e.in_stage("output"))?;
        }
    }

    let inputs = input_files
        .iter()
        .map(|p| digest_file(p))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("manifest"))?;
    let mut all = String::new();
    for (name, hash) in &out.written {
        all.push_str(name);
        all.push('\0');
        all.push_str(hash);
        all.push('\n');
    }
    let manifest = Manifest {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        config: ConfigEcho {
            method: config.method,
            annotation_mode: config.annotation_mode,
            thresholds: if config.method == Method::Similarity {
                config.sweep()
            } else {
                Vec::new()
            },
            feature_kinds: kinds,
            params: config.params,
            degenerate: config.degenerate,
        },
        inputs,
        outputs: out
            .written
            .iter()
            .map(|(n, h)| FileDigest {
                path: n.clone(),
                sha256: h.clone(),
            })
            .collect(),
        content_hash: sha256_hex(all.as_bytes()),
    };
    out.json("manifest.json", &manifest)
        .map_err(|e| e.in_stage("manifest"))?;

    Ok(ReportBundle {
        output_dir: config.output_dir.clone(),
        files: out.written.into_iter().map(|(n, _)| n).collect(),
        alignments_computed,
        unnamed_sequences,
    })
}
