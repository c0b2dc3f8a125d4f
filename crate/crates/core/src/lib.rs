//! Core and pan genome extraction for collections of annotated organellar
//! genomes.
//!
//! Two independent methods are provided:
//!
//! * **similarity**: every pair of coding sequences is aligned globally
//!   ([`align`]), pairs at or above a threshold are linked, and the connected
//!   components become gene classes ([`cluster`]). The core genome is the set
//!   of classes hit by every genome, the pan genome the set hit by any.
//! * **names**: genomes are reduced to sets of normalized gene names and
//!   merged greedily by largest intersection ([`names`]); the merge history
//!   is the core tree ([`tree`]).
//!
//! [`pipeline::run`] wires ingestion, either method and report writing
//! together.

pub mod align;
pub mod cache;
pub mod cluster;
pub mod error;
pub mod ingest;
pub mod names;
pub mod pipeline;
pub mod synthetic;
pub mod tree;

pub use align::{align_global, similarity, AlignmentParams, AlignmentResult};
pub use cache::{all_pairs, SimilarityRecord, SimilarityStore};
pub use cluster::{
    build_graph, core_pan, gene_classes, project, threshold_sweep, GeneClass, ProjectedGenome,
    SimilarityGraph, SweepRow,
};
pub use error::{Error, ErrorKind, Result};
pub use ingest::{
    filter_features, load_annotation_table, load_fasta, AnnotationSource, CodingSequence, DegeneratePolicy,
    FeatureKind, Genome, GenomeMeta, IngestOptions,
};
pub use names::{
    build_icm, extract_cores, normalize_name, to_name_set, IntersectionCoreMatrix, MergeHistory, NameSet,
};
pub use pipeline::{run, Method, ReportBundle, RunConfig};
pub use tree::{build_forest, emit_dot, emit_newick, CoreForest, CoreNode, NodeKind};
