use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gsema_core::effects::EffectsConfig;
use gsema_core::meta::{MetaConfig, MetaModel};
use gsema_core::pathmat::{FilterConfig, StandardizeScope};
use gsema_core::pipeline::PipelineConfig;
use gsema_core::simharness::SimConfig;
use gsema_core::sse::{GsvaKernel, SseConfig, SseMethod};

#[derive(Debug, Parser)]
#[command(
    name = "gsema",
    version,
    about = "Pathway-level meta-analysis of gene expression studies",
    long_about = "Scores every study's samples against a gene-set catalog with a single-sample \
                  enrichment method, filters low-activity pathways, converts moderated t-statistics \
                  to Hedges' g and combines them across studies with a random-effects model.\n\n\
                  Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric degeneracy."
)]
pub struct Cli {
    /// Worker threads; 0 uses all cores. Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: score, standardize, filter, effect sizes, meta-analysis.
    Run(RunArgs),
    /// Score one study's expression matrix and print the pathway score matrix.
    Score(ScoreArgs),
    /// Meta-analyse precomputed per-study effect tables.
    Meta(MetaArgs),
    /// Write synthetic studies with a spiked pathway.
    Simulate(SimulateArgs),
    /// Repeat the analysis on label-permuted studies to count false positives.
    Permute(PermuteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SseArg {
    Zscore,
    Ssgsea,
    Gsva,
    Singscore,
}

impl From<SseArg> for SseMethod {
    fn from(a: SseArg) -> Self {
        match a {
            SseArg::Zscore => SseMethod::ZScore,
            SseArg::Ssgsea => SseMethod::SsGsea,
            SseArg::Gsva => SseMethod::Gsva,
            SseArg::Singscore => SseMethod::Singscore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Rem,
    Fem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    /// Each pathway row separately.
    Row,
    /// One mean and SD over the whole study matrix.
    Matrix,
}

#[derive(Debug, Clone, Args)]
pub struct SseArgs {
    /// Single-sample enrichment method.
    #[arg(long, value_enum, default_value_t = SseArg::Zscore)]
    pub sse: SseArg,

    /// Pathways with fewer measured genes are dropped per study.
    #[arg(long, default_value_t = 7)]
    pub min_set_size: usize,

    /// ssGSEA rank-weight exponent.
    #[arg(long, default_value_t = 0.25)]
    pub ssgsea_alpha: f64,

    /// GSVA kernel for the per-gene CDF estimate.
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub gsva_kernel: KernelArg,

    /// GSVA Gaussian bandwidth as a multiple of each gene's SD.
    #[arg(long, default_value_t = 0.25)]
    pub gsva_bandwidth: f64,

    /// GSVA score is the largest deviation instead of max positive + max negative.
    #[arg(long)]
    pub gsva_max_deviation: bool,

    /// singscore distance from the median rank instead of up-regulation.
    #[arg(long)]
    pub singscore_undirected: bool,
}

impl SseArgs {
    pub fn config(&self) -> SseConfig {
        SseConfig {
            method: self.sse.into(),
            ssgsea_weight_exponent: self.ssgsea_alpha,
            gsva_kernel: match self.gsva_kernel {
                KernelArg::Gaussian => GsvaKernel::Gaussian,
                KernelArg::Poisson => GsvaKernel::Poisson,
            },
            gsva_bandwidth_factor: self.gsva_bandwidth,
            gsva_max_diff: !self.gsva_max_deviation,
            singscore_directed: !self.singscore_undirected,
            min_set_size: self.min_set_size,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    #[command(flatten)]
    pub sse: SseArgs,

    /// Keep a pathway in a study when |median| of either group reaches this.
    #[arg(long, default_value_t = 0.65)]
    pub filter_threshold: f64,

    /// Studies a pathway must survive filtering in [default: all studies].
    #[arg(long)]
    pub min_studies: Option<usize>,

    /// Skip score standardization before filtering.
    #[arg(long)]
    pub no_standardize: bool,

    /// Standardization scope.
    #[arg(long, value_enum, default_value_t = ScopeArg::Row)]
    pub standardize_scope: ScopeArg,

    /// Ordinary pooled t-statistic (no variance moderation).
    #[arg(long)]
    pub ordinary_t: bool,

    /// Convert t to Cohen's d with n_e + n_c - 2 df instead of the moderated total df.
    #[arg(long)]
    pub design_df: bool,

    /// Meta-analysis model.
    #[arg(long, value_enum, default_value_t = ModelArg::Rem)]
    pub model: ModelArg,

    /// FDR level used for the significance column and summaries.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

impl AnalysisArgs {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            sse: self.sse.config(),
            filter: FilterConfig {
                activity_threshold: self.filter_threshold,
                min_studies: self.min_studies,
                standardize: !self.no_standardize,
                skip_standardization_for_zscore: true,
                scope: match self.standardize_scope {
                    ScopeArg::Row => StandardizeScope::PerRow,
                    ScopeArg::Matrix => StandardizeScope::WholeMatrix,
                },
            },
            effects: EffectsConfig {
                ordinary_t: self.ordinary_t,
                design_df: self.design_df,
            },
            meta: meta_config(self.model, self.alpha),
        }
    }
}

pub fn meta_config(model: ModelArg, alpha: f64) -> MetaConfig {
    MetaConfig {
        model: match model {
            ModelArg::Rem => MetaModel::Rem,
            ModelArg::Fem => MetaModel::Fem,
        },
        alpha,
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TSV listing study_id, expression path and labels path per study.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Gene-set catalog in GMT format.
    #[arg(long)]
    pub gmt: PathBuf,

    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub analysis: AnalysisArgs,

    /// Recorded in the run metadata; the pipeline itself draws no random numbers.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Also write each study's standardized score matrix.
    #[arg(long)]
    pub scores_out: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Expression matrix TSV (genes × samples).
    #[arg(long)]
    pub expression: PathBuf,

    /// Gene-set catalog in GMT format.
    #[arg(long)]
    pub gmt: PathBuf,

    /// Study id recorded in the output [default: file stem].
    #[arg(long)]
    pub study_id: Option<String>,

    /// Output file [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Standardize each pathway row before writing.
    #[arg(long)]
    pub standardize: bool,

    #[command(flatten)]
    pub sse: SseArgs,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    /// Per-study effect tables as written by `run` (effects_<study>.tsv).
    #[arg(long, required = true, num_args = 1..)]
    pub effects: Vec<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,

    /// Studies a pathway must appear in [default: all studies].
    #[arg(long)]
    pub min_studies: Option<usize>,

    /// Meta-analysis model.
    #[arg(long, value_enum, default_value_t = ModelArg::Rem)]
    pub model: ModelArg,

    /// FDR level used for summaries.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value_t = 5)]
    pub studies: usize,

    #[arg(long, default_value_t = 2000)]
    pub genes: usize,

    /// Case samples per study.
    #[arg(long, default_value_t = 20)]
    pub n_case: usize,

    /// Control samples per study.
    #[arg(long, default_value_t = 20)]
    pub n_control: usize,

    /// Fraction of genes differentially expressed.
    #[arg(long, default_value_t = 0.01)]
    pub de_fraction: f64,

    /// Up-regulated DE genes forming Simulated_Pathway; 0 omits it.
    #[arg(long, default_value_t = 23)]
    pub spiked_size: usize,

    #[arg(long, default_value_t = 2.0)]
    pub fold_change_min: f64,

    #[arg(long, default_value_t = 4.0)]
    pub fold_change_max: f64,

    /// Negative-binomial dispersion (variance = mean + dispersion * mean²).
    #[arg(long, default_value_t = 0.2)]
    pub dispersion: f64,

    /// Mean of log baseline expression.
    #[arg(long, default_value_t = 4.0)]
    pub baseline_log_mean: f64,

    /// SD of log baseline expression.
    #[arg(long, default_value_t = 1.5)]
    pub baseline_log_sd: f64,

    /// Random gene sets added to the catalog.
    #[arg(long, default_value_t = 500)]
    pub decoys: usize,

    #[arg(long, default_value_t = 10)]
    pub decoy_min_size: usize,

    #[arg(long, default_value_t = 100)]
    pub decoy_max_size: usize,

    /// Let decoy sets include DE genes.
    #[arg(long)]
    pub decoy_overlap: bool,
}

impl SimulateArgs {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            k_studies: self.studies,
            genes: self.genes,
            n_e: self.n_case,
            n_c: self.n_control,
            de_fraction: self.de_fraction,
            spiked_set_size: self.spiked_size,
            fold_change_range: (self.fold_change_min, self.fold_change_max),
            nb_dispersion: self.dispersion,
            baseline_log_mean: self.baseline_log_mean,
            baseline_log_sd: self.baseline_log_sd,
            n_decoy_sets: self.decoys,
            decoy_set_size_range: (self.decoy_min_size, self.decoy_max_size),
            decoy_overlap: self.decoy_overlap,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct PermuteArgs {
    /// TSV listing study_id, expression path and labels path per study.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Gene-set catalog in GMT format.
    #[arg(long)]
    pub gmt: PathBuf,

    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 100)]
    pub iterations: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Pathway whose false-positive rate is tracked [default: Simulated_Pathway if in the catalog].
    #[arg(long)]
    pub spiked_set: Option<String>,

    /// Raw p-value cutoff for counting a pathway as significant.
    #[arg(long, default_value_t = 0.05)]
    pub p_threshold: f64,

    #[command(flatten)]
    pub analysis: AnalysisArgs,
}
