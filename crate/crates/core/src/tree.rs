//! Core tree: the greedy merge history as a binary forest whose edges carry
//! gene-loss counts, with DOT and Newick renderings.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Genome;
use crate::names::MergeHistory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    GenomeLeaf,
    CoreInternal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreNode {
    /// `<count>:<family>_<scientific name>_<accession>` for leaves,
    /// `<count>:<core label>` for cores.
    pub label: String,
    pub kind: NodeKind,
    pub gene_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scientific_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accession: Option<String>,
    pub names: Vec<String>,
    pub children: Vec<CoreNode>,
    /// `child.gene_count - gene_count` for each child, same order.
    pub edge_losses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreForest {
    pub roots: Vec<CoreNode>,
}

pub fn build_forest(history: &MergeHistory, genomes: &[Genome]) -> Result<CoreForest> {
    let meta: HashMap<&str, &Genome> = genomes.iter().map(|g| (g.accession.as_str(), g)).collect();
    let mut pending: HashMap<String, CoreNode> = HashMap::new();
    for leaf in &history.leaves {
        let g = meta.get(leaf.label.as_str()).ok_or_else(|| {
            Error::Compute(format!(
                "merge history leaf {} has no genome metadata",
                leaf.label
            ))
        })?;
        let node = CoreNode {
            label: format!(
                "{}:{}_{}_{}",
                leaf.len(),
                g.family,
                g.scientific_name,
                g.accession
            ),
            kind: NodeKind::GenomeLeaf,
            gene_count: leaf.len(),
            family: Some(g.family.clone()),
            scientific_name: Some(g.scientific_name.clone()),
            accession: Some(g.accession.clone()),
            names: leaf.names.iter().cloned().collect(),
            children: Vec::new(),
            edge_losses: Vec::new(),
        };
        if pending.insert(leaf.label.clone(), node).is_some() {
            return Err(Error::Compute(format!("duplicate leaf {}", leaf.label)));
        }
    }
    let mut take = |label: &str| {
        pending
            .remove(label)
            .ok_or_else(|| Error::Compute(format!("merge history references unknown label {label}")))
    };
    let mut made: Vec<(String, CoreNode)> = Vec::new();
    for m in &history.merges {
        let mut children = Vec::with_capacity(2);
        for label in [&m.left, &m.right] {
            // A core produced earlier is looked up among `made` first.
            let child = match made.iter().position(|(l, _)| l == label) {
                Some(at) => made.swap_remove(at).1,
                None => take(label)?,
            };
            children.push(child);
        }
        let count = m.core.len();
        let edge_losses = children
            .iter()
            .map(|c| {
                c.gene_count.checked_sub(count).ok_or_else(|| {
                    Error::Compute(format!("core {} is larger than child {}", m.core.label, c.label))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        made.push((
            m.core.label.clone(),
            CoreNode {
                label: format!("{count}:{}", m.core.label),
                kind: NodeKind::CoreInternal,
                gene_count: count,
                family: None,
                scientific_name: None,
                accession: None,
                names: m.core.names.iter().cloned().collect(),
                children,
                edge_losses,
            },
        ));
    }
    let mut roots = Vec::with_capacity(history.roots.len());
    for label in &history.roots {
        let node = match made.iter().position(|(l, _)| l == label) {
            Some(at) => made.swap_remove(at).1,
            None => take(label)?,
        };
        roots.push(node);
    }
    if !made.is_empty() || !pending.is_empty() {
        return Err(Error::Compute("merge history leaves dangling nodes".into()));
    }
    if roots.is_empty() {
        return Err(Error::Compute("merge history has no roots".into()));
    }
    Ok(CoreForest { roots })
}

impl CoreNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(self.accession.as_deref().unwrap_or(&self.label));
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        match (self.kind, self.children.len()) {
            (NodeKind::GenomeLeaf, 0) => {
                if self.accession.is_none() || self.family.is_none() {
                    return Err(format!("leaf {} lacks accession or family", self.label));
                }
            }
            (NodeKind::CoreInternal, 2) => {}
            (kind, n) => return Err(format!("{kind:?} node {} has {n} children", self.label)),
        }
        if self.names.len() != self.gene_count {
            return Err(format!("node {} gene count disagrees with its names", self.label));
        }
        if self.edge_losses.len() != self.children.len() {
            return Err(format!("node {} has mismatched edge losses", self.label));
        }
        let own: BTreeSet<&String> = self.names.iter().collect();
        for (c, &loss) in self.children.iter().zip(&self.edge_losses) {
            if c.gene_count < self.gene_count || loss != c.gene_count - self.gene_count {
                return Err(format!("edge {} -> {} has loss {loss}", self.label, c.label));
            }
            let theirs: BTreeSet<&String> = c.names.iter().collect();
            if !own.is_subset(&theirs) {
                return Err(format!(
                    "node {} is not contained in child {}",
                    self.label, c.label
                ));
            }
            c.check()?;
        }
        Ok(())
    }
}

impl CoreForest {
    /// Accessions of all leaves, depth-first.
    pub fn leaf_accessions(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for r in &self.roots {
            r.collect_leaves(&mut out);
        }
        out
    }

    /// Checks the structural invariants: binary internal nodes, losses equal
    /// to child minus parent size, parents contained in children, and every
    /// leaf accession present once.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.roots.is_empty() {
            return Err("forest has no roots".into());
        }
        for r in &self.roots {
            r.check()?;
        }
        let leaves = self.leaf_accessions();
        let unique: HashSet<&str> = leaves.iter().copied().collect();
        if unique.len() != leaves.len() {
            return Err("a leaf appears more than once".into());
        }
        Ok(())
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: one `cluster_<k>` subgraph per root, nodes numbered
/// depth-first, parent-to-child edges labeled with the loss count.
pub fn emit_dot(forest: &CoreForest) -> String {
    fn walk(node: &CoreNode, next: &mut usize, out: &mut String) -> usize {
        let id = *next;
        *next += 1;
        let shape = match node.kind {
            NodeKind::GenomeLeaf => "box",
            NodeKind::CoreInternal => "ellipse",
        };
        let _ = writeln!(
            out,
            "    n{id} [label=\"{}\", shape={shape}];",
            dot_escape(&node.label)
        );
        for (child, loss) in node.children.iter().zip(&node.edge_losses) {
            let cid = walk(child, next, out);
            let _ = writeln!(out, "    n{id} -> n{cid} [label=\"{loss}\"];");
        }
        id
    }
    let mut out = String::from("digraph coretree {\n");
    let mut next = 0;
    for (k, root) in forest.roots.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{k} {{");
        walk(root, &mut next, &mut out);
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

fn newick_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// One Newick tree per root, one per line. Branch lengths are loss counts.
pub fn emit_newick(forest: &CoreForest) -> String {
    fn walk(node: &CoreNode, out: &mut String) {
        if !node.is_leaf() {
            out.push('(');
            for (k, (child, loss)) in node.children.iter().zip(&node.edge_losses).enumerate() {
                if k > 0 {
                    out.push(',');
                }
                walk(child, out);
                let _ = write!(out, ":{loss}");
            }
            out.push(')');
        }
        out.push_str(&newick_quote(&node.label));
    }
    let mut out = String::new();
    for root in &forest.roots {
        walk(root, &mut out);
        out.push_str(";\n");
    }
    out
}
