//! Gene-name method: name homogenization, the Intersection Core Matrix
//! (pairwise name-set intersection sizes) and greedy core extraction.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AnnotationSource, Genome};

/// Uppercases and strips `_`, `(`, `)`. DOGMA-style names starting with
/// RPS12 (the `_3end`/`_5end` pieces) collapse to `RPS12`.
pub fn normalize_name(raw: &str, mode: AnnotationSource) -> Result<String> {
    let name: String = raw
        .trim()
        .chars()
        .filter(|c| !matches!(c, '_' | '(' | ')') && !c.is_whitespace())
        .flat_map(char::to_uppercase)
        .collect();
    if name.is_empty() {
        return Err(Error::Input(format!(
            "gene name {raw:?} is empty after normalization"
        )));
    }
    if mode == AnnotationSource::Dogma && name.starts_with("RPS12") {
        return Ok("RPS12".to_string());
    }
    Ok(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameSet {
    pub label: String,
    pub names: BTreeSet<String>,
}

impl NameSet {
    pub fn new<I, S>(label: impl Into<String>, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        NameSet {
            label: label.into(),
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn intersection_size(&self, other: &NameSet) -> usize {
        self.names.intersection(&other.names).count()
    }
}

/// A genome reduced to its normalized gene names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedGenome {
    pub set: NameSet,
    /// Sequences skipped because they carry no gene name.
    pub unnamed: usize,
}

pub fn to_name_set(genome: &Genome, mode: AnnotationSource) -> Result<NamedGenome> {
    let mut names = BTreeSet::new();
    let mut unnamed = 0;
    for s in &genome.sequences {
        match s.raw_name.as_deref() {
            Some(raw) => {
                let name =
                    normalize_name(raw, mode).map_err(|e| Error::Input(format!("{}: {e}", s.seq_id)))?;
                names.insert(name);
            }
            None => unnamed += 1,
        }
    }
    if names.is_empty() {
        return Err(Error::Input(format!(
            "genome {} has no named sequences",
            genome.accession
        )));
    }
    Ok(NamedGenome {
        set: NameSet {
            label: genome.accession.clone(),
            names,
        },
        unnamed,
    })
}

/// Pairwise intersection sizes of the current items. Only the upper
/// triangle is stored: `rows[i][j - i - 1]` is the score of `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionCoreMatrix {
    items: Vec<NameSet>,
    rows: Vec<Vec<usize>>,
    intersections: usize,
    cores_made: usize,
}

pub fn build_icm(items: Vec<NameSet>) -> Result<IntersectionCoreMatrix> {
    if items.len() < 2 {
        return Err(Error::Input(format!(
            "intersection matrix needs at least 2 items, got {}",
            items.len()
        )));
    }
    let mut labels = BTreeSet::new();
    for it in &items {
        if !labels.insert(it.label.as_str()) {
            return Err(Error::Input(format!("duplicate item label {}", it.label)));
        }
    }
    let n = items.len();
    let rows = (0..n)
        .map(|i| {
            (i + 1..n)
                .map(|j| items[i].intersection_size(&items[j]))
                .collect()
        })
        .collect();
    Ok(IntersectionCoreMatrix {
        items,
        rows,
        intersections: n * (n - 1) / 2,
        cores_made: 0,
    })
}

/// Winner of one greedy step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxIntersection {
    pub pair: (usize, usize),
    pub core: NameSet,
    pub score: usize,
}

impl IntersectionCoreMatrix {
    pub fn items(&self) -> &[NameSet] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Set intersections computed so far (initial fill plus updates).
    pub fn intersections(&self) -> usize {
        self.intersections
    }

    pub fn score(&self, i: usize, j: usize) -> usize {
        let (i, j) = (i.min(j), i.max(j));
        assert!(i != j && j < self.items.len(), "score({i}, {j}) out of range");
        self.rows[i][j - i - 1]
    }

    /// Maximum score; ties go to the lexicographically smallest `(i, j)`.
    /// The intersection is labeled `core_<k>`, `k` counting merges so far.
    pub fn max_intersection(&self) -> Result<MaxIntersection> {
        if self.items.len() < 2 {
            return Err(Error::Input("max intersection needs at least 2 items".into()));
        }
        let mut best = (0, 1, self.rows[0][0]);
        for (i, row) in self.rows.iter().enumerate() {
            for (off, &s) in row.iter().enumerate() {
                if s > best.2 {
                    best = (i, i + 1 + off, s);
                }
            }
        }
        let (i, j, score) = best;
        let names = self.items[i]
            .names
            .intersection(&self.items[j].names)
            .cloned()
            .collect();
        Ok(MaxIntersection {
            pair: (i, j),
            core: NameSet {
                label: format!("core_{}", self.cores_made),
                names,
            },
            score,
        })
    }

    /// Removes items `i` and `j` and appends `core`, scoring it against
    /// every remaining item.
    fn merge(&mut self, i: usize, j: usize, core: NameSet) {
        debug_assert!(i < j);
        for idx in [j, i] {
            self.items.remove(idx);
            self.rows.remove(idx);
            for (r, row) in self.rows.iter_mut().enumerate().take(idx) {
                row.remove(idx - r - 1);
            }
        }
        for (r, row) in self.rows.iter_mut().enumerate() {
            row.push(self.items[r].intersection_size(&core));
        }
        self.intersections += self.items.len();
        self.items.push(core);
        self.rows.push(Vec::new());
        self.cores_made += 1;
    }

    /// Upper-triangular dump `label_i,label_j,score`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "label_i,label_j,score")?;
        for (i, row) in self.rows.iter().enumerate() {
            for (off, s) in row.iter().enumerate() {
                let j = i + 1 + off;
                writeln!(w, "{},{},{}", self.items[i].label, self.items[j].label, s)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub left: String,
    pub right: String,
    pub core: NameSet,
}

/// Every greedy merge in order, plus what was left when it stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeHistory {
    pub leaves: Vec<NameSet>,
    pub merges: Vec<Merge>,
    /// Labels of the remaining items, in matrix order.
    pub roots: Vec<String>,
}

/// Greedy core extraction: merge the best-scoring pair into its
/// intersection until one item is left or no pair shares a name.
pub fn extract_cores(items: Vec<NameSet>) -> Result<MergeHistory> {
    let leaves = items.clone();
    let mut icm = build_icm(items)?;
    let mut merges = Vec::new();
    while icm.len() > 1 {
        let best = icm.max_intersection()?;
        if best.score == 0 {
            break;
        }
        let (i, j) = best.pair;
        merges.push(Merge {
            left: icm.items[i].label.clone(),
            right: icm.items[j].label.clone(),
            core: best.core.clone(),
        });
        icm.merge(i, j, best.core);
    }
    Ok(MergeHistory {
        leaves,
        merges,
        roots: icm.items.iter().map(|it| it.label.clone()).collect(),
    })
}
