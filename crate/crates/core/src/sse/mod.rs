//! Single-sample enrichment: expression matrix -> pathway score matrix.
//!
//! Each method sees the study's genes after its own row filtering (constant
//! rows are removed for Zscore and Gaussian GSVA), intersects every gene set
//! with what remains, and drops sets that are too small or that cover every
//! remaining gene.

mod gsva;
mod singscore;
mod ssgsea;
mod zscore;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GsemaError, Result};
use crate::fmt::g17;
use crate::ingest::{ExpressionMatrix, GeneSetCollection, Study};

pub use gsva::{kernel_cdf_gaussian, kernel_cdf_poisson, score_gsva};
pub use singscore::score_singscore;
pub use ssgsea::score_ssgsea;
pub use zscore::score_zscore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SseMethod {
    ZScore,
    SsGsea,
    Gsva,
    Singscore,
}

impl SseMethod {
    pub fn name(self) -> &'static str {
        match self {
            SseMethod::ZScore => "zscore",
            SseMethod::SsGsea => "ssgsea",
            SseMethod::Gsva => "gsva",
            SseMethod::Singscore => "singscore",
        }
    }
}

impl fmt::Display for SseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SseMethod {
    type Err = GsemaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zscore" => Ok(SseMethod::ZScore),
            "ssgsea" => Ok(SseMethod::SsGsea),
            "gsva" => Ok(SseMethod::Gsva),
            "singscore" => Ok(SseMethod::Singscore),
            other => Err(GsemaError::Config(format!("unknown SSE method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GsvaKernel {
    Gaussian,
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SseConfig {
    pub method: SseMethod,
    pub ssgsea_weight_exponent: f64,
    pub gsva_kernel: GsvaKernel,
    /// Kernel bandwidth is this factor times the gene's sample SD.
    pub gsva_bandwidth_factor: f64,
    pub gsva_max_diff: bool,
    pub singscore_directed: bool,
    pub min_set_size: usize,
}

impl Default for SseConfig {
    fn default() -> Self {
        Self {
            method: SseMethod::ZScore,
            ssgsea_weight_exponent: 0.25,
            gsva_kernel: GsvaKernel::Gaussian,
            gsva_bandwidth_factor: 0.25,
            gsva_max_diff: true,
            singscore_directed: true,
            min_set_size: 7,
        }
    }
}

impl SseConfig {
    pub fn with_method(method: SseMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ssgsea_weight_exponent > 0.0 && self.ssgsea_weight_exponent.is_finite()) {
            return Err(GsemaError::Config("ssGSEA weight exponent must be positive".into()));
        }
        if !(self.gsva_bandwidth_factor > 0.0 && self.gsva_bandwidth_factor.is_finite()) {
            return Err(GsemaError::Config("GSVA bandwidth factor must be positive".into()));
        }
        if self.min_set_size < 1 {
            return Err(GsemaError::Config("minimum set size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    /// Fewer measured genes than the minimum set size (includes empty overlap).
    TooSmall,
    /// The set contains every measured gene, leaving no background.
    CoversAllGenes,
    /// Scores are identical across samples so the row cannot be standardized.
    ConstantScores,
    /// Both group medians fall below the activity threshold.
    LowActivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedPathway {
    pub name: String,
    pub effective_size: usize,
    pub reason: DropReason,
}

/// Pathways × samples enrichment scores for one study, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PathwayScoreMatrix {
    pub study_id: String,
    pub method: SseMethod,
    pub pathway_names: Vec<String>,
    pub sample_ids: Vec<String>,
    pub scores: Vec<f64>,
    /// Measured set members per retained pathway, aligned with `pathway_names`.
    pub effective_set_sizes: Vec<usize>,
    pub dropped_pathways: Vec<DroppedPathway>,
    /// Constant gene rows removed before scoring.
    pub dropped_genes: usize,
}

impl PathwayScoreMatrix {
    pub fn n_pathways(&self) -> usize {
        self.pathway_names.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn row(&self, p: usize) -> &[f64] {
        let n = self.n_samples();
        &self.scores[p * n..(p + 1) * n]
    }

    pub fn row_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.n_samples();
        &mut self.scores[p * n..(p + 1) * n]
    }

    pub fn get(&self, p: usize, sample: usize) -> f64 {
        self.scores[p * self.n_samples() + sample]
    }

    pub fn index_of(&self, pathway: &str) -> Option<usize> {
        self.pathway_names.iter().position(|p| p == pathway)
    }

    pub fn effective_set_size(&self, pathway: &str) -> Option<usize> {
        self.index_of(pathway).map(|i| self.effective_set_sizes[i])
    }

    /// Keeps the listed rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> PathwayScoreMatrix {
        let mut scores = Vec::with_capacity(rows.len() * self.n_samples());
        for &r in rows {
            scores.extend_from_slice(self.row(r));
        }
        PathwayScoreMatrix {
            pathway_names: rows.iter().map(|&r| self.pathway_names[r].clone()).collect(),
            effective_set_sizes: rows.iter().map(|&r| self.effective_set_sizes[r]).collect(),
            scores,
            ..self.clone()
        }
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "pathway")?;
        for s in &self.sample_ids {
            write!(out, "\t{s}")?;
        }
        writeln!(out)?;
        for (p, name) in self.pathway_names.iter().enumerate() {
            write!(out, "{name}")?;
            for v in self.row(p) {
                write!(out, "\t{}", g17(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// A gene set resolved to row indices of the scored matrix.
pub(crate) struct ResolvedSet {
    pub name: String,
    pub rows: Vec<usize>,
}

/// Intersects every set with the matrix's genes and applies the size rules.
pub(crate) fn resolve_sets(
    matrix: &ExpressionMatrix,
    sets: &GeneSetCollection,
    min_set_size: usize,
) -> (Vec<ResolvedSet>, Vec<DroppedPathway>) {
    let index: HashMap<&str, usize> = matrix
        .gene_ids()
        .iter()
        .enumerate()
        .map(|(i, g)| (g.as_str(), i))
        .collect();
    let n_genes = matrix.n_genes();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for set in sets.sets() {
        let rows: Vec<usize> = set.genes.iter().filter_map(|g| index.get(g.as_str()).copied()).collect();
        let size = rows.len();
        let reason = if size < min_set_size.max(1) {
            Some(DropReason::TooSmall)
        } else if size >= n_genes {
            Some(DropReason::CoversAllGenes)
        } else {
            None
        };
        match reason {
            Some(reason) => dropped.push(DroppedPathway {
                name: set.name.clone(),
                effective_size: size,
                reason,
            }),
            None => kept.push(ResolvedSet {
                name: set.name.clone(),
                rows,
            }),
        }
    }
    (kept, dropped)
}

/// Removes constant gene rows; returns the reduced matrix and how many were dropped.
pub(crate) fn drop_constant_rows(matrix: &ExpressionMatrix) -> (ExpressionMatrix, usize) {
    let keep: Vec<usize> = (0..matrix.n_genes())
        .filter(|&g| !crate::stats::is_constant(matrix.row(g)))
        .collect();
    let dropped = matrix.n_genes() - keep.len();
    if dropped == 0 {
        (matrix.clone(), 0)
    } else {
        (matrix.select_rows(&keep), dropped)
    }
}

/// Assembles the row-major output from per-sample columns of pathway scores.
pub(crate) fn assemble(
    matrix: &ExpressionMatrix,
    method: SseMethod,
    sets: Vec<ResolvedSet>,
    dropped_pathways: Vec<DroppedPathway>,
    dropped_genes: usize,
    columns: Vec<Vec<f64>>,
) -> Result<PathwayScoreMatrix> {
    if sets.is_empty() {
        return Err(GsemaError::NoPathways(format!(
            "no gene set passed the size filter in study {}",
            matrix.study_id
        )));
    }
    let n = matrix.n_samples();
    let mut scores = vec![0.0; sets.len() * n];
    for (j, col) in columns.iter().enumerate() {
        for (p, v) in col.iter().enumerate() {
            scores[p * n + j] = *v;
        }
    }
    debug_assert!(scores.iter().all(|v| v.is_finite()));
    Ok(PathwayScoreMatrix {
        study_id: matrix.study_id.clone(),
        method,
        effective_set_sizes: sets.iter().map(|s| s.rows.len()).collect(),
        pathway_names: sets.into_iter().map(|s| s.name).collect(),
        sample_ids: matrix.sample_ids().to_vec(),
        scores,
        dropped_pathways,
        dropped_genes,
    })
}

pub fn score_matrix(
    matrix: &ExpressionMatrix,
    sets: &GeneSetCollection,
    cfg: &SseConfig,
) -> Result<PathwayScoreMatrix> {
    cfg.validate()?;
    match cfg.method {
        SseMethod::ZScore => score_zscore(matrix, sets, cfg),
        SseMethod::SsGsea => score_ssgsea(matrix, sets, cfg),
        SseMethod::Gsva => score_gsva(matrix, sets, cfg),
        SseMethod::Singscore => score_singscore(matrix, sets, cfg),
    }
}

/// Scores one study with the configured method; errors carry the study id.
pub fn score_study(study: &Study, sets: &GeneSetCollection, cfg: &SseConfig) -> Result<PathwayScoreMatrix> {
    score_matrix(&study.matrix, sets, cfg).map_err(|e| e.in_study(study.id()))
}
