//! Whole-run orchestration: score → standardize → filter → align → effects → meta.
//!
//! Scoring and standardization never look at class labels, so they are split
//! from the label-dependent tail. Re-running only [`analyze`] on new labels
//! gives the same result as a full run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effects::{compute_study_effects, EffectsConfig, ModeratedFit, StudyEffect};
use crate::error::{GsemaError, Result};
use crate::ingest::{ClassLabels, GeneSetCollection, Study};
use crate::meta::{run_meta, MetaConfig, MetaResult};
use crate::pathmat::{align_panel, apply_activity_filter, standardize_scores, AlignedPathwayPanel, FilterConfig, FilterRecord};
use crate::sse::{score_study, PathwayScoreMatrix, SseConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sse: SseConfig,
    pub filter: FilterConfig,
    pub effects: EffectsConfig,
    pub meta: MetaConfig,
}

impl PipelineConfig {
    pub fn validate(&self, n_studies: usize) -> Result<()> {
        self.sse.validate()?;
        self.filter.validate(n_studies)?;
        self.meta.validate()
    }
}

/// Label-free scores for one study.
#[derive(Clone, Debug)]
pub struct ScoredStudy {
    pub raw: PathwayScoreMatrix,
    pub standardized: PathwayScoreMatrix,
}

#[derive(Clone, Debug)]
pub struct StudyAnalysis {
    pub study_id: String,
    pub filtered: PathwayScoreMatrix,
    pub filter_records: Vec<FilterRecord>,
    /// `None` when no pathway passed the activity filter.
    pub fit: Option<ModeratedFit>,
    pub effects: Vec<StudyEffect>,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub studies: Vec<StudyAnalysis>,
    pub panel: AlignedPathwayPanel,
    pub results: Vec<MetaResult>,
}

impl Analysis {
    pub fn result(&self, pathway: &str) -> Option<&MetaResult> {
        self.results.iter().find(|r| r.pathway == pathway)
    }

    /// 1-based position in the |CES| ranking.
    pub fn rank_of(&self, pathway: &str) -> Option<usize> {
        self.results.iter().position(|r| r.pathway == pathway).map(|i| i + 1)
    }

    pub fn filter_records(&self) -> impl Iterator<Item = &FilterRecord> {
        self.studies.iter().flat_map(|s| s.filter_records.iter())
    }

    /// Effects with the corrected variance used in the meta-analysis filled in.
    pub fn effects_with_corrected_variance(&self) -> Vec<Vec<StudyEffect>> {
        self.studies
            .iter()
            .map(|s| {
                s.effects
                    .iter()
                    .map(|e| {
                        let var_corrected = self.result(&e.pathway).and_then(|r| {
                            r.studies
                                .iter()
                                .find(|c| c.study_id == e.study_id)
                                .map(|c| c.var_corrected)
                        });
                        StudyEffect {
                            var_corrected,
                            ..e.clone()
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub scored: Vec<ScoredStudy>,
    pub analysis: Analysis,
}

pub fn score_studies(studies: &[Study], sets: &GeneSetCollection, cfg: &PipelineConfig) -> Result<Vec<ScoredStudy>> {
    studies
        .par_iter()
        .map(|study| {
            let raw = score_study(study, sets, &cfg.sse)?;
            let standardized = standardize_scores(&raw, &cfg.filter).map_err(|e| e.in_study(study.id()))?;
            Ok(ScoredStudy { raw, standardized })
        })
        .collect()
}

/// The label-dependent stages. `labels[k]` belongs to `scored[k]`.
pub fn analyze(scored: &[ScoredStudy], labels: &[&ClassLabels], cfg: &PipelineConfig) -> Result<Analysis> {
    if scored.is_empty() {
        return Err(GsemaError::EmptyInput("no studies".into()));
    }
    assert_eq!(scored.len(), labels.len());
    cfg.validate(scored.len())?;

    let studies = scored
        .par_iter()
        .zip(labels.par_iter())
        .map(|(s, l)| analyze_study(s, l, cfg).map_err(|e| e.in_study(&s.standardized.study_id)))
        .collect::<Result<Vec<_>>>()?;

    let filtered: Vec<PathwayScoreMatrix> = studies.iter().map(|s| s.filtered.clone()).collect();
    let panel = align_panel(&filtered, &cfg.filter)?;

    let grouped: Vec<(String, Vec<&StudyEffect>)> = panel
        .pathway_names
        .iter()
        .zip(&panel.rows)
        .map(|(name, rows)| {
            let members = rows
                .iter()
                .enumerate()
                .filter_map(|(k, row)| row.map(|r| &studies[k].effects[r]))
                .collect();
            (name.clone(), members)
        })
        .collect();
    let results = run_meta(&grouped, &cfg.meta)?;

    Ok(Analysis {
        studies,
        panel,
        results,
    })
}

fn analyze_study(scored: &ScoredStudy, labels: &ClassLabels, cfg: &PipelineConfig) -> Result<StudyAnalysis> {
    let (filtered, filter_records) =
        apply_activity_filter(&scored.standardized, labels, cfg.filter.activity_threshold);
    let (fit, effects) = if filtered.n_pathways() == 0 {
        (None, Vec::new())
    } else {
        let (fit, effects) = compute_study_effects(&filtered, labels, &cfg.effects)?;
        (Some(fit), effects)
    };
    Ok(StudyAnalysis {
        study_id: filtered.study_id.clone(),
        filtered,
        filter_records,
        fit,
        effects,
    })
}

pub fn run_pipeline(studies: &[Study], sets: &GeneSetCollection, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate(studies.len())?;
    let scored = score_studies(studies, sets, cfg)?;
    let labels: Vec<&ClassLabels> = studies.iter().map(|s| &s.labels).collect();
    let analysis = analyze(&scored, &labels, cfg)?;
    Ok(PipelineOutput { scored, analysis })
}
