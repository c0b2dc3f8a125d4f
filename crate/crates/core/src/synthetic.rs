//! Synthetic genome collections with a planted core, for tests, benches and
//! demos. Each core gene family starts from a random root sequence and every
//! genome receives a copy carrying a fixed number of point substitutions;
//! private genes are independent random sequences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{make_seq_id, AnnotationSource, CodingSequence, FeatureKind, Genome};

#[derive(Debug, Clone)]
pub struct PlantedConfig {
    pub genomes: usize,
    pub core_genes: usize,
    /// Inclusive range of private genes per genome.
    pub private_per_genome: (usize, usize),
    /// Inclusive range of gene lengths.
    pub gene_length: (usize, usize),
    /// Fraction of positions substituted in each core copy, relative to
    /// the family root.
    pub core_divergence: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            genomes: 10,
            core_genes: 25,
            private_per_genome: (5, 15),
            gene_length: (90, 150),
            core_divergence: 0.03,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub genomes: Vec<Genome>,
    pub core_genes: usize,
    pub private_genes: usize,
}

fn random_dna(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
}

fn mutate(rng: &mut impl Rng, root: &[u8], divergence: f64) -> Vec<u8> {
    let mut copy = root.to_vec();
    let hits = (divergence * root.len() as f64).floor() as usize;
    let mut positions: Vec<usize> = (0..root.len()).collect();
    positions.shuffle(rng);
    for &p in positions.iter().take(hits) {
        let old = copy[p];
        let choices: Vec<u8> = b"ACGT".iter().copied().filter(|&b| b != old).collect();
        copy[p] = choices[rng.gen_range(0..3)];
    }
    copy
}

pub fn planted_core(cfg: &PlantedConfig) -> PlantedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.gene_length;
    let roots: Vec<Vec<u8>> = (0..cfg.core_genes)
        .map(|_| {
            let len = rng.gen_range(lo..=hi);
            random_dna(&mut rng, len)
        })
        .collect();

    let mut private_genes = 0;
    let mut genomes = Vec::with_capacity(cfg.genomes);
    for g in 0..cfg.genomes {
        let accession = format!("SYN_{g:03}.1");
        let mut genes: Vec<(String, Vec<u8>)> = roots
            .iter()
            .enumerate()
            .map(|(k, root)| (format!("core{k}"), mutate(&mut rng, root, cfg.core_divergence)))
            .collect();
        let n_private = rng.gen_range(cfg.private_per_genome.0..=cfg.private_per_genome.1);
        private_genes += n_private;
        for k in 0..n_private {
            let len = rng.gen_range(lo..=hi);
            genes.push((format!("priv{g}_{k}"), random_dna(&mut rng, len)));
        }
        genes.shuffle(&mut rng);
        genomes.push(Genome {
            sequences: genes
                .into_iter()
                .enumerate()
                .map(|(i, (name, dna))| CodingSequence {
                    seq_id: make_seq_id(&accession, i),
                    raw_name: Some(name),
                    feature_kind: FeatureKind::Cds,
                    dna: String::from_utf8(dna).expect("ACGT is utf-8"),
                })
                .collect(),
            scientific_name: format!("Synthetica planta {g}"),
            family: if g % 2 == 0 { "Even".into() } else { "Odd".into() },
            accession,
            annotation_source: AnnotationSource::Dogma,
        });
    }
    PlantedDataset {
        genomes,
        core_genes: cfg.core_genes,
        private_genes,
    }
}
