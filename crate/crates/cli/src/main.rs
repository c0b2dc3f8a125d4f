//! `coregene`: core and pan genomes from annotated organellar genomes.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input error, 4 compute
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use coregene::ingest::parse_feature_kinds;
use coregene::{AlignmentParams, AnnotationSource, DegeneratePolicy, Error, ErrorKind, Method, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Similarity,
    Names,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Ncbi,
    Dogma,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DegenerateArg {
    Strip,
    Reject,
}

#[derive(Debug, Parser)]
#[command(
    name = "coregene",
    version,
    about = "Core and pan genome extraction for annotated organellar genomes"
)]
struct Cli {
    /// Annotation table (TSV) or FASTA manifest (TSV with a `path` column).
    #[arg(long)]
    input: PathBuf,

    /// Output directory.
    #[arg(long = "out")]
    out: PathBuf,

    #[arg(long, value_enum, default_value = "similarity")]
    method: MethodArg,

    #[arg(long = "annotation-mode", value_enum, default_value = "ncbi")]
    annotation_mode: ModeArg,

    /// Similarity threshold in [0, 1]; repeat for a sweep.
    #[arg(long = "threshold")]
    thresholds: Vec<f64>,

    /// Feature kinds to keep, e.g. `cds,rrna`. Defaults to `cds` for ncbi
    /// and `cds,rrna` for dogma.
    #[arg(long)]
    features: Option<String>,

    #[arg(long = "gap-open", default_value_t = 10.0)]
    gap_open: f64,

    #[arg(long = "gap-extend", default_value_t = 0.5)]
    gap_extend: f64,

    #[arg(long = "match", default_value_t = 5.0)]
    match_score: f64,

    #[arg(long = "mismatch", default_value_t = -4.0, allow_hyphen_values = true)]
    mismatch_score: f64,

    /// What to do with ambiguity codes such as N.
    #[arg(long, value_enum, default_value = "strip")]
    degenerate: DegenerateArg,

    /// Similarity cache file (CSV). Without it similarities are kept in memory.
    #[arg(long, env = "COREGENE_CACHE")]
    cache: Option<PathBuf>,

    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl Cli {
    fn into_config(self) -> Result<RunConfig, Error> {
        let method = match self.method {
            MethodArg::Similarity => Method::Similarity,
            MethodArg::Names => Method::Names,
        };
        let mut cfg = RunConfig::new(method, self.input, self.out);
        cfg.annotation_mode = match self.annotation_mode {
            ModeArg::Ncbi => AnnotationSource::Ncbi,
            ModeArg::Dogma => AnnotationSource::Dogma,
        };
        cfg.thresholds = self.thresholds;
        cfg.feature_kinds = self.features.as_deref().map(parse_feature_kinds).transpose()?;
        cfg.params = AlignmentParams {
            gap_open: self.gap_open,
            gap_extend: self.gap_extend,
            match_score: self.match_score,
            mismatch_score: self.mismatch_score,
        };
        cfg.degenerate = match self.degenerate {
            DegenerateArg::Strip => DegeneratePolicy::Strip,
            DegenerateArg::Reject => DegeneratePolicy::Reject,
        };
        cfg.cache_path = self.cache;
        cfg.workers = self.workers;
        Ok(cfg)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Input => 3,
        ErrorKind::Compute => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.into_config().and_then(|cfg| coregene::run(&cfg));
    match result {
        Ok(bundle) => {
            for f in &bundle.files {
                eprintln!("wrote {}", bundle.output_dir.join(f).display());
            }
            eprintln!("alignments computed: {}", bundle.alignments_computed);
            if bundle.unnamed_sequences > 0 {
                eprintln!(
                    "sequences without a gene name (skipped): {}",
                    bundle.unnamed_sequences
                );
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
