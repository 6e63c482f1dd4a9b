//! Pathway-level meta-analysis of gene expression studies.
//!
//! Each study's expression matrix is turned into a pathway × sample score
//! matrix by a single-sample enrichment method ([`sse`]). Scores are
//! standardized and low-activity pathways removed ([`pathmat`]). A moderated
//! t-statistic per pathway is converted to Hedges' g ([`effects`]), and the
//! g values are combined across studies under a random-effects model with
//! Benjamini–Hochberg FDR control ([`meta`]). [`pipeline`] chains the stages;
//! [`simharness`] generates synthetic studies and runs permutation suites.

pub mod effects;
pub mod error;
pub mod fmt;
pub mod ingest;
pub mod meta;
pub mod pathmat;
pub mod pipeline;
pub mod simharness;
pub mod special;
pub mod sse;
pub mod stats;

pub use error::{ErrorKind, GsemaError, Result};
pub use ingest::{ClassLabels, ExpressionMatrix, GeneSet, GeneSetCollection, Group, Study, StudyManifest};
pub use meta::{MetaConfig, MetaModel, MetaResult};
pub use pathmat::{AlignedPathwayPanel, FilterConfig};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
pub use sse::{PathwayScoreMatrix, SseConfig, SseMethod};
