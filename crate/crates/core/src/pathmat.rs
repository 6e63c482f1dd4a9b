//! Puts per-study pathway scores on a common scale, removes pathways with
//! low activity in both groups, and aligns the survivors across studies.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GsemaError, Result};
use crate::fmt::g17;
use crate::ingest::{ClassLabels, Group};
use crate::sse::{DropReason, DroppedPathway, PathwayScoreMatrix, SseMethod};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StandardizeScope {
    /// Each pathway row gets mean 0 and SD 1 within the study.
    PerRow,
    /// One mean and SD over every score in the study's matrix.
    WholeMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub activity_threshold: f64,
    /// `None` means every study.
    pub min_studies: Option<usize>,
    pub standardize: bool,
    pub skip_standardization_for_zscore: bool,
    pub scope: StandardizeScope,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            activity_threshold: 0.65,
            min_studies: None,
            standardize: true,
            skip_standardization_for_zscore: true,
            scope: StandardizeScope::PerRow,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self, n_studies: usize) -> Result<()> {
        if !(self.activity_threshold >= 0.0 && self.activity_threshold.is_finite()) {
            return Err(GsemaError::Config("activity threshold must be a nonnegative number".into()));
        }
        if let Some(m) = self.min_studies {
            if m < 1 || m > n_studies {
                return Err(GsemaError::Config(format!(
                    "min_studies must lie in 1..={n_studies}, got {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn min_studies_for(&self, n_studies: usize) -> usize {
        self.min_studies.unwrap_or(n_studies)
    }
}

/// Rescales scores to mean 0 / SD 1 (N-1 denominator). Zscore matrices pass
/// through untouched when the skip flag is set. Constant rows are dropped.
pub fn standardize_scores(scores: &PathwayScoreMatrix, cfg: &FilterConfig) -> Result<PathwayScoreMatrix> {
    if !cfg.standardize || (scores.method == SseMethod::ZScore && cfg.skip_standardization_for_zscore) {
        return Ok(scores.clone());
    }
    match cfg.scope {
        StandardizeScope::PerRow => standardize_rows(scores),
        StandardizeScope::WholeMatrix => standardize_whole(scores),
    }
}

fn standardize_rows(scores: &PathwayScoreMatrix) -> Result<PathwayScoreMatrix> {
    let keep: Vec<usize> = (0..scores.n_pathways())
        .filter(|&p| !stats::is_constant(scores.row(p)))
        .collect();
    let mut out = scores.select_rows(&keep);
    out.dropped_pathways.extend(
        (0..scores.n_pathways())
            .filter(|p| !keep.contains(p))
            .map(|p| DroppedPathway {
                name: scores.pathway_names[p].clone(),
                effective_size: scores.effective_set_sizes[p],
                reason: DropReason::ConstantScores,
            }),
    );
    if out.n_pathways() == 0 {
        return Err(GsemaError::NoPathways(format!(
            "every pathway has constant scores in study {}",
            scores.study_id
        )));
    }
    let n = out.n_samples();
    out.scores.par_chunks_mut(n).for_each(|row| {
        let m = stats::mean(row);
        let sd = stats::sample_sd(row);
        for v in row.iter_mut() {
            *v = (*v - m) / sd;
        }
    });
    Ok(out)
}

fn standardize_whole(scores: &PathwayScoreMatrix) -> Result<PathwayScoreMatrix> {
    if stats::is_constant(&scores.scores) {
        return Err(GsemaError::NoPathways(format!(
            "score matrix of study {} is constant",
            scores.study_id
        )));
    }
    let m = stats::mean(&scores.scores);
    let sd = stats::sample_sd(&scores.scores);
    let mut out = scores.clone();
    for v in out.scores.iter_mut() {
        *v = (*v - m) / sd;
    }
    Ok(out)
}

/// Per-pathway, per-study outcome of the activity filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub pathway: String,
    pub study_id: String,
    pub control_median: f64,
    pub case_median: f64,
    pub kept: bool,
}

pub fn write_filter_report<W: Write>(records: &[FilterRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "pathway\tstudy\tcontrol_median\tcase_median\tkept")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.pathway,
            r.study_id,
            g17(r.control_median),
            g17(r.case_median),
            r.kept
        )?;
    }
    Ok(())
}

/// Applies the activity rule and returns the possibly empty survivor matrix.
/// A pathway survives when either group's median has absolute value at
/// least the threshold.
pub fn apply_activity_filter(
    scores: &PathwayScoreMatrix,
    labels: &ClassLabels,
    threshold: f64,
) -> (PathwayScoreMatrix, Vec<FilterRecord>) {
    assert_eq!(
        scores.sample_ids.as_slice(),
        labels.sample_ids(),
        "labels must follow the score matrix's sample order"
    );
    let groups = labels.groups();
    let mut keep = Vec::new();
    let mut records = Vec::with_capacity(scores.n_pathways());
    for p in 0..scores.n_pathways() {
        let (mut case, mut control) = (Vec::new(), Vec::new());
        for (v, g) in scores.row(p).iter().zip(groups) {
            match g {
                Group::Experimental => case.push(*v),
                Group::Control => control.push(*v),
            }
        }
        let case_median = stats::median(&case);
        let control_median = stats::median(&control);
        let kept = case_median.abs() >= threshold || control_median.abs() >= threshold;
        if kept {
            keep.push(p);
        }
        records.push(FilterRecord {
            pathway: scores.pathway_names[p].clone(),
            study_id: scores.study_id.clone(),
            control_median,
            case_median,
            kept,
        });
    }
    let mut out = scores.select_rows(&keep);
    out.dropped_pathways.extend(records.iter().filter(|r| !r.kept).map(|r| DroppedPathway {
        name: r.pathway.clone(),
        effective_size: scores.effective_set_size(&r.pathway).unwrap_or(0),
        reason: DropReason::LowActivity,
    }));
    (out, records)
}

pub fn filter_low_activity(
    scores: &PathwayScoreMatrix,
    labels: &ClassLabels,
    cfg: &FilterConfig,
) -> Result<(PathwayScoreMatrix, Vec<FilterRecord>)> {
    let (out, records) = apply_activity_filter(scores, labels, cfg.activity_threshold);
    if out.n_pathways() == 0 {
        return Err(GsemaError::NoPathways(format!(
            "no pathway passed the activity filter in study {}",
            scores.study_id
        )));
    }
    Ok((out, records))
}

/// Pathways kept for meta-analysis and where each lives in every study.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedPathwayPanel {
    pub study_ids: Vec<String>,
    /// Lexicographic.
    pub pathway_names: Vec<String>,
    /// `rows[p][k]`: row of pathway `p` in study `k`'s filtered matrix.
    pub rows: Vec<Vec<Option<usize>>>,
}

impl AlignedPathwayPanel {
    pub fn len(&self) -> usize {
        self.pathway_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pathway_names.is_empty()
    }

    pub fn presence(&self, pathway: usize, study: usize) -> bool {
        self.rows[pathway][study].is_some()
    }

    pub fn n_member_studies(&self, pathway: usize) -> usize {
        self.rows[pathway].iter().filter(|r| r.is_some()).count()
    }
}

pub fn align_panel(filtered: &[PathwayScoreMatrix], cfg: &FilterConfig) -> Result<AlignedPathwayPanel> {
    if filtered.is_empty() {
        return Err(GsemaError::EmptyInput("no studies to align".into()));
    }
    cfg.validate(filtered.len())?;
    let min_studies = cfg.min_studies_for(filtered.len());

    let mut membership: BTreeMap<&str, Vec<Option<usize>>> = BTreeMap::new();
    for (k, m) in filtered.iter().enumerate() {
        for (row, name) in m.pathway_names.iter().enumerate() {
            membership.entry(name.as_str()).or_insert_with(|| vec![None; filtered.len()])[k] = Some(row);
        }
    }
    let (pathway_names, rows): (Vec<String>, Vec<Vec<Option<usize>>>) = membership
        .into_iter()
        .filter(|(_, rows)| rows.iter().filter(|r| r.is_some()).count() >= min_studies)
        .map(|(name, rows)| (name.to_string(), rows))
        .unzip();
    if pathway_names.is_empty() {
        return Err(GsemaError::NoPathways(format!(
            "no pathway survived filtering in at least {min_studies} studies"
        )));
    }
    Ok(AlignedPathwayPanel {
        study_ids: filtered.iter().map(|m| m.study_id.clone()).collect(),
        pathway_names,
        rows,
    })
}
