use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maskcode_core::io::synth::ShapeFamily;
use maskcode_core::{ScaleMode, WhitenMode, DEFAULT_COMPONENTS, DEFAULT_GRID_SIDE};

#[derive(Debug, Parser)]
#[command(name = "maskcode", version, about = "Linear mask codebooks for instance segmentation")]
pub struct Cli {
    /// Worker threads (defaults to available parallelism). Output does not
    /// depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a codebook from COCO-style annotations.
    Fit(FitArgs),
    /// Reconstruction error against number of components.
    Sweep(SweepArgs),
    /// Encode annotations into a codes file.
    Encode(EncodeArgs),
    /// Decode a codes file into RLE masks at original image size.
    Decode(DecodeArgs),
    /// Compare codecs on the same corpus.
    Compare(CompareArgs),
    /// Write a seeded synthetic corpus as COCO-style JSON.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// COCO instances JSON.
    #[arg(long)]
    pub annotations: PathBuf,

    /// Side of the square grid masks are resampled to.
    #[arg(long, default_value_t = DEFAULT_GRID_SIDE)]
    pub mask_size: usize,

    /// Keep crowd annotations.
    #[arg(long)]
    pub include_crowd: bool,

    /// Read at most this many records.
    #[arg(long)]
    pub max_count: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Whiten {
    None,
    Eigen,
}

impl From<Whiten> for WhitenMode {
    fn from(w: Whiten) -> Self {
        match w {
            Whiten::None => WhitenMode::None,
            Whiten::Eigen => WhitenMode::Eigen,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scale {
    None,
    Std,
}

impl From<Scale> for ScaleMode {
    fn from(s: Scale) -> Self {
        match s {
            Scale::None => ScaleMode::None,
            Scale::Std => ScaleMode::Std,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitOptions {
    #[arg(long, value_enum, default_value_t = Whiten::None)]
    pub whiten: Whiten,

    #[arg(long, value_enum, default_value_t = Scale::None)]
    pub scale: Scale,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[command(flatten)]
    pub fit: FitOptions,

    /// Number of components to keep.
    #[arg(long, default_value_t = DEFAULT_COMPONENTS)]
    pub components: usize,

    /// Also fit one codebook per category. `--out` is then a directory that
    /// receives `agnostic.mec` and `category_<id>.mec`.
    #[arg(long)]
    pub class_specific: bool,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[command(flatten)]
    pub fit: FitOptions,

    /// Component counts, comma separated and increasing.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100])]
    pub components: Vec<usize>,

    /// Evaluate this codebook instead of fitting one on the corpus.
    #[arg(long)]
    pub codebook: Option<PathBuf>,

    /// CSV destination (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// SVG plot destination.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[arg(long)]
    pub codebook: PathBuf,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub codebook: PathBuf,

    #[arg(long)]
    pub codes: PathBuf,

    /// Binarization threshold for soft reconstructions.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[command(flatten)]
    pub fit: FitOptions,

    /// Codecs to compare: `pca-<N>`, `polar-<K>` or `identity`. Defaults to
    /// `pca-<components>,polar-<rays>`.
    #[arg(long, value_delimiter = ',')]
    pub codecs: Vec<String>,

    #[arg(long, default_value_t = DEFAULT_COMPONENTS)]
    pub components: usize,

    #[arg(long, default_value_t = 36)]
    pub rays: usize,

    /// PCA codecs use this codebook instead of one fitted on the corpus.
    #[arg(long)]
    pub codebook: Option<PathBuf>,

    /// Compare one shared codebook with per-category codebooks at
    /// `--components` instead of comparing codecs.
    #[arg(long, conflicts_with_all = ["codecs", "codebook"])]
    pub class_specific: bool,

    /// CSV destination (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Shape families, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = ShapeFamily::ALL.map(|f| f.name().to_string()))]
    pub families: Vec<String>,

    /// Records per family.
    #[arg(long, default_value_t = 100)]
    pub count: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Grid side the family guarantees are enforced at.
    #[arg(long, default_value_t = DEFAULT_GRID_SIDE)]
    pub mask_size: usize,

    /// Side of the square synthetic images.
    #[arg(long, default_value_t = 96)]
    pub image_size: usize,

    #[arg(long)]
    pub out: PathBuf,
}
