//! Genome ingestion: FASTA files with `key=value` header tokens and the
//! tab-separated annotation table.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names of the annotation table, in the order we write them.
pub const TABLE_COLUMNS: [&str; 6] = [
    "accession",
    "scientific_name",
    "family",
    "gene_name",
    "feature_kind",
    "sequence",
];

/// Where a genome's gene annotations came from. Selects the name
/// normalization rules and the default feature filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationSource {
    Ncbi,
    Dogma,
}

impl AnnotationSource {
    /// NCBI gene features carry no rRNA; DOGMA predicts it.
    pub fn default_kinds(self) -> BTreeSet<FeatureKind> {
        match self {
            AnnotationSource::Ncbi => [FeatureKind::Cds].into_iter().collect(),
            AnnotationSource::Dogma => [FeatureKind::Cds, FeatureKind::Rrna].into_iter().collect(),
        }
    }
}

impl FromStr for AnnotationSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ncbi" => Ok(AnnotationSource::Ncbi),
            "dogma" => Ok(AnnotationSource::Dogma),
            other => Err(Error::Config(format!("unknown annotation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Cds,
    Rrna,
    Other,
}

impl FeatureKind {
    /// Lenient token mapping: anything that is not CDS or rRNA is `Other`.
    pub fn from_token(token: &str) -> Self {
        match token.trim().to_ascii_lowercase().as_str() {
            "cds" => FeatureKind::Cds,
            "rrna" => FeatureKind::Rrna,
            _ => FeatureKind::Other,
        }
    }

    pub fn as_token(self) -> &'static str {
        match self {
            FeatureKind::Cds => "CDS",
            FeatureKind::Rrna => "rRNA",
            FeatureKind::Other => "other",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_token())
    }
}

/// Parses a comma separated list such as `cds,rrna`. Unlike table rows,
/// unknown tokens are rejected here because they come from the user.
pub fn parse_feature_kinds(list: &str) -> Result<BTreeSet<FeatureKind>> {
    let mut kinds = BTreeSet::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let kind = match token.to_ascii_lowercase().as_str() {
            "cds" => FeatureKind::Cds,
            "rrna" => FeatureKind::Rrna,
            "other" => FeatureKind::Other,
            _ => return Err(Error::Config(format!("unknown feature kind {token:?}"))),
        };
        kinds.insert(kind);
    }
    if kinds.is_empty() {
        return Err(Error::Config("empty feature kind list".into()));
    }
    Ok(kinds)
}

/// What to do with IUPAC ambiguity codes (N, R, Y, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegeneratePolicy {
    /// Drop the character.
    #[default]
    Strip,
    /// Fail the load.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingSequence {
    /// `<accession>:<ordinal>`, the join key used everywhere downstream.
    pub seq_id: String,
    pub raw_name: Option<String>,
    pub feature_kind: FeatureKind,
    pub dna: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genome {
    pub accession: String,
    pub scientific_name: String,
    pub family: String,
    pub sequences: Vec<CodingSequence>,
    pub annotation_source: AnnotationSource,
}

/// Scientific name and lineage of a genome loaded from a bare FASTA file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenomeMeta {
    pub scientific_name: String,
    pub family: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    pub degenerate: DegeneratePolicy,
    pub source: AnnotationSource,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            degenerate: DegeneratePolicy::Strip,
            source: AnnotationSource::Ncbi,
        }
    }
}

pub fn make_seq_id(accession: &str, ordinal: usize) -> String {
    format!("{accession}:{ordinal}")
}

/// Splits a seq_id into accession and ordinal. Accessions may themselves
/// contain `:`, so the split happens on the last one.
pub fn split_seq_id(seq_id: &str) -> Option<(&str, usize)> {
    let (acc, ord) = seq_id.rsplit_once(':')?;
    if acc.is_empty() {
        return None;
    }
    Some((acc, ord.parse().ok()?))
}

const DEGENERATE: &[u8] = b"NRYSWKMBDHVU";

/// Uppercases and validates a raw sequence; whitespace is ignored.
pub fn normalize_dna(raw: &str, policy: DegeneratePolicy) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        if c.is_whitespace() {
            continue;
        }
        let up = c.to_ascii_uppercase();
        match up {
            'A' | 'C' | 'G' | 'T' => out.push(up),
            _ if up.is_ascii() && DEGENERATE.contains(&(up as u8)) => {
                if policy == DegeneratePolicy::Reject {
                    return Err(format!("degenerate base {c:?}"));
                }
            }
            _ => return Err(format!("invalid nucleotide {c:?}")),
        }
    }
    if out.is_empty() {
        return Err("empty sequence".into());
    }
    Ok(out)
}

impl Genome {
    /// Checks the structural invariants of a single genome.
    pub fn validate(&self) -> Result<()> {
        if self.accession.is_empty() {
            return Err(Error::Input("genome with empty accession".into()));
        }
        if self.sequences.is_empty() {
            return Err(Error::Input(format!(
                "genome {} has no sequences",
                self.accession
            )));
        }
        for s in &self.sequences {
            match split_seq_id(&s.seq_id) {
                Some((acc, _)) if acc == self.accession => {}
                _ => {
                    return Err(Error::Input(format!(
                        "sequence id {} does not belong to genome {}",
                        s.seq_id, self.accession
                    )))
                }
            }
            if s.dna.is_empty() || !s.dna.bytes().all(|b| matches!(b, b'A' | b'C' | b'G' | b'T')) {
                return Err(Error::Input(format!("sequence {} is not over ACGT", s.seq_id)));
            }
        }
        Ok(())
    }
}

/// Checks per-genome invariants plus accession and seq_id uniqueness.
pub fn validate_dataset(genomes: &[Genome]) -> Result<()> {
    let mut accessions = HashSet::new();
    let mut ids = HashSet::new();
    for g in genomes {
        g.validate()?;
        if !accessions.insert(g.accession.as_str()) {
            return Err(Error::Input(format!("duplicate accession {}", g.accession)));
        }
        for s in &g.sequences {
            if !ids.insert(s.seq_id.as_str()) {
                return Err(Error::Input(format!("duplicate sequence id {}", s.seq_id)));
            }
        }
    }
    Ok(())
}

pub fn load_fasta(
    path: impl AsRef<Path>,
    accession: &str,
    meta: &GenomeMeta,
    opts: IngestOptions,
) -> Result<Genome> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_fasta(BufReader::new(file), path, accession, meta, opts)
}

/// FASTA parser behind [`load_fasta`]; `origin` is only used in errors.
pub fn parse_fasta<R: BufRead>(
    reader: R,
    origin: &Path,
    accession: &str,
    meta: &GenomeMeta,
    opts: IngestOptions,
) -> Result<Genome> {
    if accession.is_empty() {
        return Err(Error::Input("empty accession".into()));
    }
    let mut sequences = Vec::new();
    let mut current: Option<(usize, String, String)> = None;

    let finish = |rec: (usize, String, String), out: &mut Vec<CodingSequence>| -> Result<()> {
        let (line_no, header, body) = rec;
        let mut raw_name = None;
        let mut kind = FeatureKind::Cds;
        for token in header.split_whitespace().skip(1) {
            if let Some((k, v)) = token.split_once('=') {
                match k {
                    "gene" if !v.is_empty() => raw_name = Some(v.to_string()),
                    "kind" => kind = FeatureKind::from_token(v),
                    _ => {}
                }
            }
        }
        let dna = normalize_dna(&body, opts.degenerate)
            .map_err(|m| Error::parse(origin, format!("record at line {line_no}: {m}")))?;
        out.push(CodingSequence {
            seq_id: make_seq_id(accession, out.len()),
            raw_name,
            feature_kind: kind,
            dna,
        });
        Ok(())
    };

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end();
        if let Some(header) = line.strip_prefix('>') {
            if let Some(rec) = current.take() {
                finish(rec, &mut sequences)?;
            }
            current = Some((idx + 1, header.to_string(), String::new()));
        } else if line.trim().is_empty() {
            continue;
        } else {
            match current.as_mut() {
                Some((_, _, body)) => body.push_str(line),
                None => {
                    return Err(Error::parse(
                        origin,
                        format!("line {}: sequence data before first header", idx + 1),
                    ))
                }
            }
        }
    }
    if let Some(rec) = current.take() {
        finish(rec, &mut sequences)?;
    }
    if sequences.is_empty() {
        return Err(Error::parse(origin, "no records"));
    }
    Ok(Genome {
        accession: accession.to_string(),
        scientific_name: meta.scientific_name.clone(),
        family: meta.family.clone(),
        sequences,
        annotation_source: opts.source,
    })
}

pub fn load_annotation_table(path: impl AsRef<Path>, opts: IngestOptions) -> Result<Vec<Genome>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotation_table(file, path, opts)
}

pub fn read_annotation_table<R: Read>(reader: R, origin: &Path, opts: IngestOptions) -> Result<Vec<Genome>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(origin, e.to_string()))?
        .clone();
    let mut col = [0usize; 6];
    for (slot, name) in col.iter_mut().zip(TABLE_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::parse(origin, format!("missing column {name:?}")))?;
    }
    let [c_acc, c_sci, c_fam, c_gene, c_kind, c_seq] = col;

    let mut genomes: Vec<Genome> = Vec::new();
    let mut closed: HashSet<String> = HashSet::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| Error::parse(origin, e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let accession = field(c_acc);
        if accession.is_empty() {
            return Err(Error::parse(origin, format!("line {line}: empty accession")));
        }
        let same_as_last = genomes.last().is_some_and(|g| g.accession == accession);
        if !same_as_last {
            if let Some(prev) = genomes.last() {
                closed.insert(prev.accession.clone());
            }
            // A reopened block would hand out a second run of ordinals
            // for an accession that already has them.
            if closed.contains(accession) {
                return Err(Error::parse(
                    origin,
                    format!(
                        "line {line}: duplicate (accession, ordinal) for {accession}: rows are not grouped"
                    ),
                ));
            }
            genomes.push(Genome {
                accession: accession.to_string(),
                scientific_name: field(c_sci).to_string(),
                family: field(c_fam).to_string(),
                sequences: Vec::new(),
                annotation_source: opts.source,
            });
        }
        let genome = genomes.last_mut().expect("pushed above");
        let dna = normalize_dna(field(c_seq), opts.degenerate)
            .map_err(|m| Error::parse(origin, format!("line {line}: {m}")))?;
        let gene = field(c_gene);
        let ordinal = genome.sequences.len();
        genome.sequences.push(CodingSequence {
            seq_id: make_seq_id(accession, ordinal),
            raw_name: (!gene.is_empty()).then(|| gene.to_string()),
            feature_kind: FeatureKind::from_token(field(c_kind)),
            dna,
        });
    }
    Ok(genomes)
}

/// Writes genomes in the annotation-table format read by
/// [`read_annotation_table`].
pub fn write_annotation_table<W: Write>(genomes: &[Genome], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(writer);
    let wrap = |e: csv::Error| Error::Compute(format!("writing annotation table: {e}"));
    w.write_record(TABLE_COLUMNS).map_err(wrap)?;
    for g in genomes {
        for s in &g.sequences {
            w.write_record([
                g.accession.as_str(),
                g.scientific_name.as_str(),
                g.family.as_str(),
                s.raw_name.as_deref().unwrap_or(""),
                s.feature_kind.as_token(),
                s.dna.as_str(),
            ])
            .map_err(wrap)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Compute(format!("writing annotation table: {e}")))?;
    Ok(())
}

/// Keeps only sequences of the given kinds. Sequence ids are not renumbered.
pub fn filter_features(genome: &Genome, kinds: &BTreeSet<FeatureKind>) -> Result<Genome> {
    if kinds.is_empty() {
        return Err(Error::Config("feature kind set is empty".into()));
    }
    let sequences: Vec<CodingSequence> = genome
        .sequences
        .iter()
        .filter(|s| kinds.contains(&s.feature_kind))
        .cloned()
        .collect();
    if sequences.is_empty() {
        return Err(Error::EmptyAfterFilter {
            accession: genome.accession.clone(),
        });
    }
    Ok(Genome {
        sequences,
        ..genome.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> GenomeMeta {
        GenomeMeta {
            scientific_name: "Odontella sinensis".into(),
            family: "Brown Algae".into(),
        }
    }

    fn fasta(text: &str, opts: IngestOptions) -> Result<Genome> {
        parse_fasta(text.as_bytes(), Path::new("mem.fa"), "NC_001713.1", &meta(), opts)
    }

    fn table(text: &str) -> Result<Vec<Genome>> {
        read_annotation_table(text.as_bytes(), Path::new("mem.tsv"), IngestOptions::default())
    }

    #[test]
    fn fasta_two_records() {
        let g = fasta(">x gene=psbA\nACGT\n>y\nGG\nTT\n", IngestOptions::default()).unwrap();
        assert_eq!(g.sequences.len(), 2);
        assert_eq!(g.sequences[0].raw_name.as_deref(), Some("psbA"));
        assert_eq!(g.sequences[1].raw_name, None);
        assert_eq!(g.sequences[1].dna, "GGTT");
        assert_eq!(g.sequences[0].seq_id, "NC_001713.1:0");
        assert_eq!(g.sequences[1].seq_id, "NC_001713.1:1");
        assert_eq!(g.sequences[1].feature_kind, FeatureKind::Cds);
    }

    #[test]
    fn fasta_kind_token() {
        let g = fasta(
            ">a kind=rRNA gene=rrn16\nacgt\n>b kind=tRNA\nA\n",
            IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(g.sequences[0].feature_kind, FeatureKind::Rrna);
        assert_eq!(g.sequences[0].dna, "ACGT");
        assert_eq!(g.sequences[1].feature_kind, FeatureKind::Other);
    }

    #[test]
    fn fasta_empty_file() {
        let err = fasta("", IngestOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no records"), "{err}");
    }

    #[test]
    fn fasta_empty_record() {
        assert!(fasta(">a\n>b\nACGT\n", IngestOptions::default()).is_err());
    }

    #[test]
    fn fasta_degenerate_strip() {
        let g = fasta(">a\nACGN\n", IngestOptions::default()).unwrap();
        assert_eq!(g.sequences[0].dna, "ACG");
        assert_eq!(g.sequences[0].dna.len(), 3);
    }

    #[test]
    fn fasta_degenerate_reject() {
        let opts = IngestOptions {
            degenerate: DegeneratePolicy::Reject,
            ..Default::default()
        };
        assert!(fasta(">a\nACGN\n", opts).is_err());
    }

    #[test]
    fn fasta_invalid_character() {
        let err = fasta(">a\nAC*T\n", IngestOptions::default()).unwrap_err();
        assert!(err.to_string().contains("invalid nucleotide"), "{err}");
    }

    #[test]
    fn fasta_missing_file() {
        let err = load_fasta("/nonexistent/x.fa", "A", &meta(), IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    const HEADER: &str = "accession\tscientific_name\tfamily\tgene_name\tfeature_kind\tsequence\n";

    #[test]
    fn table_grouping() {
        let text = format!(
            "{HEADER}X\tx sp\tF\tpsbA\tCDS\tACGT\nX\tx sp\tF\t\tCDS\tAC\nY\ty sp\tG\trbcL\tCDS\tGG\n"
        );
        let gs = table(&text).unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0].sequences.len(), 2);
        assert_eq!(gs[1].sequences.len(), 1);
        assert_eq!(gs[0].sequences[1].raw_name, None);
        assert_eq!(gs[1].sequences[0].seq_id, "Y:0");
    }

    #[test]
    fn table_trna_maps_to_other() {
        let text = format!("{HEADER}X\tx\tF\ttrnH\ttRNA\tACGT\n");
        assert_eq!(
            table(&text).unwrap()[0].sequences[0].feature_kind,
            FeatureKind::Other
        );
    }

    #[test]
    fn table_reference_genomes() {
        let text = format!(
            "{HEADER}NC_001713.1\tOdontella sinensis\tBrown Algae\tpsbA\tCDS\tACGT\n\
             NC_000925.1\tPorphyra purpurea\tRed Algae\tpsbA\tCDS\tACGA\n"
        );
        let gs = table(&text).unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0].accession, "NC_001713.1");
        assert_eq!(gs[0].scientific_name, "Odontella sinensis");
        assert_eq!(gs[0].family, "Brown Algae");
        assert_eq!(gs[1].accession, "NC_000925.1");
        assert_eq!(gs[1].scientific_name, "Porphyra purpurea");
        assert_eq!(gs[1].family, "Red Algae");
    }

    #[test]
    fn table_missing_column() {
        let text = "accession\tscientific_name\tfamily\tgene_name\tsequence\nX\tx\tF\tg\tACGT\n";
        let err = table(text).unwrap_err();
        assert!(err.to_string().contains("feature_kind"), "{err}");
    }

    #[test]
    fn table_ungrouped_rows() {
        let text = format!("{HEADER}X\tx\tF\ta\tCDS\tA\nY\ty\tF\tb\tCDS\tA\nX\tx\tF\tc\tCDS\tA\n");
        let err = table(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    fn genome_with(kinds: &[FeatureKind]) -> Genome {
        Genome {
            accession: "G".into(),
            scientific_name: "g".into(),
            family: "F".into(),
            sequences: kinds
                .iter()
                .enumerate()
                .map(|(i, &k)| CodingSequence {
                    seq_id: make_seq_id("G", i),
                    raw_name: None,
                    feature_kind: k,
                    dna: "ACGT".into(),
                })
                .collect(),
            annotation_source: AnnotationSource::Dogma,
        }
    }

    #[test]
    fn filter_keeps_cds() {
        use FeatureKind::*;
        let g = genome_with(&[Cds, Rrna, Cds, Cds]);
        let f = filter_features(&g, &[Cds].into_iter().collect()).unwrap();
        assert_eq!(f.sequences.len(), 3);
        let ids: Vec<_> = f.sequences.iter().map(|s| s.seq_id.as_str()).collect();
        assert_eq!(ids, ["G:0", "G:2", "G:3"]);
        let same = filter_features(&g, &[Cds, Rrna].into_iter().collect()).unwrap();
        assert_eq!(same, g);
    }

    #[test]
    fn filter_empty_result() {
        let g = genome_with(&[FeatureKind::Rrna]);
        let err = filter_features(&g, &[FeatureKind::Cds].into_iter().collect()).unwrap_err();
        assert!(err.to_string().contains("empty after filter"), "{err}");
        assert!(err.to_string().contains('G'));
    }

    #[test]
    fn seq_id_split() {
        assert_eq!(split_seq_id("NC_001713.1:12"), Some(("NC_001713.1", 12)));
        assert_eq!(split_seq_id("a:b:3"), Some(("a:b", 3)));
        assert_eq!(split_seq_id("nocolon"), None);
    }

    fn arb_genomes() -> impl Strategy<Value = Vec<Genome>> {
        let seq = (
            proptest::option::of("[a-zA-Z0-9_()]{1,8}"),
            prop_oneof![
                Just(FeatureKind::Cds),
                Just(FeatureKind::Rrna),
                Just(FeatureKind::Other)
            ],
            "[ACGT]{1,30}",
        );
        proptest::collection::vec(
            (
                "[A-Za-z ]{1,12}",
                "[A-Za-z]{1,8}",
                proptest::collection::vec(seq, 1..5),
            ),
            1..4,
        )
        .prop_map(|raw| {
            raw.into_iter()
                .enumerate()
                .map(|(gi, (sci, fam, seqs))| {
                    let acc = format!("NC_{gi:06}.1");
                    Genome {
                        sequences: seqs
                            .into_iter()
                            .enumerate()
                            .map(|(i, (name, kind, dna))| CodingSequence {
                                seq_id: make_seq_id(&acc, i),
                                raw_name: name,
                                feature_kind: kind,
                                dna,
                            })
                            .collect(),
                        accession: acc,
                        scientific_name: sci.trim().to_string(),
                        family: fam,
                        annotation_source: AnnotationSource::Ncbi,
                    }
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn table_round_trip(genomes in arb_genomes()) {
            let mut buf = Vec::new();
            write_annotation_table(&genomes, &mut buf).unwrap();
            let back = read_annotation_table(&buf[..], Path::new("rt"), IngestOptions::default()).unwrap();
            prop_assert_eq!(&back, &genomes);
            for g in &back {
                prop_assert!(g.sequences.iter().all(|s| !s.dna.is_empty()
                    && s.dna.bytes().all(|b| b"ACGT".contains(&b))));
                let all = [FeatureKind::Cds, FeatureKind::Rrna, FeatureKind::Other].into_iter().collect();
                prop_assert_eq!(&filter_features(g, &all).unwrap(), g);
            }
        }
    }
}
