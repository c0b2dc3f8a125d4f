//! Similarity-graph clustering: thresholded graph over coding sequences,
//! gene classes as connected components, genome projection, core/pan.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::SimilarityRecord;
use crate::error::{Error, Result};
use crate::ingest::Genome;

/// Disjoint sets over `0..n` with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Components as sorted index lists, ordered by smallest member.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..self.parent.len() {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
        groups.sort_by_key(|g| g[0]);
        groups
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Threshold(t))
    }
}

/// Validated pair similarities over a fixed vertex set, reusable across
/// thresholds.
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    /// Sorted seq_ids; positions are vertex indices.
    vertices: Vec<String>,
    /// `(i, j, similarity)` with `i < j`, one entry per vertex pair.
    pairs: Vec<(u32, u32, f64)>,
}

impl SimilarityIndex {
    /// Records whose endpoints are outside `vertices` are ignored; a vertex
    /// pair without a record is an error.
    pub fn new<S: AsRef<str>>(vertices: &[S], records: &[SimilarityRecord]) -> Result<Self> {
        let mut verts: Vec<String> = vertices.iter().map(|v| v.as_ref().to_string()).collect();
        verts.sort();
        if let Some(w) = verts.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Input(format!("duplicate sequence id {}", w[0])));
        }
        let pos: HashMap<&str, u32> = verts
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i as u32))
            .collect();
        let mut seen = HashSet::with_capacity(records.len());
        let mut pairs = Vec::with_capacity(records.len());
        for r in records {
            let (Some(&a), Some(&b)) = (pos.get(r.seq_id_a.as_str()), pos.get(r.seq_id_b.as_str())) else {
                continue;
            };
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                pairs.push((key.0, key.1, r.similarity));
            }
        }
        let n = verts.len();
        if seen.len() != n * n.saturating_sub(1) / 2 {
            for i in 0..n as u32 {
                for j in i + 1..n as u32 {
                    if !seen.contains(&(i, j)) {
                        return Err(Error::MissingPair {
                            a: verts[i as usize].clone(),
                            b: verts[j as usize].clone(),
                        });
                    }
                }
            }
        }
        pairs.sort_by_key(|&(a, b, _)| (a, b));
        Ok(SimilarityIndex {
            vertices: verts,
            pairs,
        })
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn graph(&self, threshold: f64) -> Result<SimilarityGraph> {
        check_threshold(threshold)?;
        let edges = self
            .pairs
            .iter()
            .filter(|&&(_, _, s)| s >= threshold)
            .map(|&(a, b, _)| (a as usize, b as usize))
            .collect();
        Ok(SimilarityGraph {
            vertices: self.vertices.clone(),
            edges,
            threshold,
        })
    }
}

/// Undirected graph linking sequences whose similarity reaches the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    /// Sorted seq_ids.
    pub vertices: Vec<String>,
    /// Index pairs `(i, j)`, `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub threshold: f64,
}

impl SimilarityGraph {
    pub fn edge_ids(&self) -> Vec<(&str, &str)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.vertices[a].as_str(), self.vertices[b].as_str()))
            .collect()
    }
}

/// Links every pair with `similarity >= threshold`.
pub fn build_graph<S: AsRef<str>>(
    vertices: &[S],
    records: &[SimilarityRecord],
    threshold: f64,
) -> Result<SimilarityGraph> {
    check_threshold(threshold)?;
    SimilarityIndex::new(vertices, records)?.graph(threshold)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneClass {
    pub class_id: usize,
    /// Alleles of the gene, sorted.
    pub members: Vec<String>,
}

/// Connected components. Class ids follow the order of each class's
/// smallest member seq_id.
pub fn gene_classes(graph: &SimilarityGraph) -> Vec<GeneClass> {
    let mut uf = UnionFind::new(graph.vertices.len());
    for &(a, b) in &graph.edges {
        uf.union(a, b);
    }
    // Vertices are sorted, so ordering groups by smallest index orders
    // them by smallest seq_id.
    uf.groups()
        .into_iter()
        .enumerate()
        .map(|(class_id, g)| GeneClass {
            class_id,
            members: g.into_iter().map(|i| graph.vertices[i].clone()).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectedGenome {
    pub accession: String,
    pub classes: BTreeSet<usize>,
}

/// Maps each genome to the set of classes its sequences fall into.
pub fn project(genomes: &[Genome], classes: &[GeneClass]) -> Result<Vec<ProjectedGenome>> {
    let mut class_of: HashMap<&str, usize> = HashMap::new();
    for c in classes {
        for m in &c.members {
            if class_of.insert(m.as_str(), c.class_id).is_some() {
                return Err(Error::Compute(format!("sequence {m} is in more than one class")));
            }
        }
    }
    genomes
        .iter()
        .map(|g| {
            let classes = g
                .sequences
                .iter()
                .map(|s| {
                    class_of
                        .get(s.seq_id.as_str())
                        .copied()
                        .ok_or_else(|| Error::Uncovered(s.seq_id.clone()))
                })
                .collect::<Result<BTreeSet<usize>>>()?;
            Ok(ProjectedGenome {
                accession: g.accession.clone(),
                classes,
            })
        })
        .collect()
}

/// Core (intersection) and pan (union) of projected genomes.
pub fn core_pan(projected: &[ProjectedGenome]) -> Result<(BTreeSet<usize>, BTreeSet<usize>)> {
    let (first, rest) = projected
        .split_first()
        .ok_or_else(|| Error::Input("core/pan of an empty genome list".into()))?;
    let mut core = first.classes.clone();
    let mut pan = first.classes.clone();
    for p in rest {
        core.retain(|c| p.classes.contains(c));
        pan.extend(p.classes.iter().copied());
    }
    Ok((core, pan))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub core_size: usize,
    pub pan_size: usize,
}

fn all_seq_ids(genomes: &[Genome]) -> Vec<&str> {
    genomes
        .iter()
        .flat_map(|g| g.sequences.iter().map(|s| s.seq_id.as_str()))
        .collect()
}

fn sweep_row(index: &SimilarityIndex, genomes: &[Genome], t: f64) -> Result<SweepRow> {
    let classes = gene_classes(&index.graph(t)?);
    let (core, pan) = core_pan(&project(genomes, &classes)?)?;
    Ok(SweepRow {
        threshold: t,
        core_size: core.len(),
        pan_size: pan.len(),
    })
}

/// Core and pan sizes for each threshold, reusing one record set.
pub fn threshold_sweep(
    records: &[SimilarityRecord],
    genomes: &[Genome],
    thresholds: &[f64],
) -> Result<Vec<SweepRow>> {
    for &t in thresholds {
        check_threshold(t)?;
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("sweep thresholds must be sorted ascending".into()));
    }
    let index = SimilarityIndex::new(&all_seq_ids(genomes), records)?;
    thresholds
        .par_iter()
        .map(|&t| sweep_row(&index, genomes, t))
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "threshold,core_size,pan_size")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.threshold, r.core_size, r.pan_size)?;
    }
    Ok(())
}

/// Core and pan genome at one threshold, with class members spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorePanReport {
    pub threshold: f64,
    pub core: Vec<GeneClass>,
    pub pan: Vec<GeneClass>,
}

pub fn core_pan_report(
    records: &[SimilarityRecord],
    genomes: &[Genome],
    threshold: f64,
) -> Result<CorePanReport> {
    let graph = build_graph(&all_seq_ids(genomes), records, threshold)?;
    let classes = gene_classes(&graph);
    let (core, pan) = core_pan(&project(genomes, &classes)?)?;
    let pick = |ids: &BTreeSet<usize>| -> Vec<GeneClass> {
        classes
            .iter()
            .filter(|c| ids.contains(&c.class_id))
            .cloned()
            .collect()
    };
    Ok(CorePanReport {
        threshold,
        core: pick(&core),
        pan: pick(&pan),
    })
}
