//! Per-study effect sizes: moderated t-statistics converted to Hedges' g.
//!
//! The moderated fit is the usual two-group linear model with empirical-Bayes
//! variance shrinkage. Prior degrees of freedom `d0` and prior variance
//! `s0²` come from a method-of-moments fit of a scaled F distribution to
//! the log residual variances of all pathways in the study. Every pathway's
//! variance is then pulled toward `s0²` with weight `d0`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{GsemaError, Result};
use crate::fmt::g17;
use crate::ingest::{ClassLabels, Group};
use crate::special::{digamma, trigamma, trigamma_inverse};
use crate::sse::PathwayScoreMatrix;
use crate::stats;

/// Prior df at or above this value are treated as infinite.
pub const PRIOR_DF_CAP: f64 = 1e6;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectsConfig {
    /// Force `d0 = 0`, giving the ordinary pooled two-sample t.
    pub ordinary_t: bool,
    /// Convert t to d with the design df `n_e + n_c - 2` instead of the
    /// moderated total df.
    pub design_df: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupSummary {
    pub n_e: usize,
    pub n_c: usize,
    pub mean_e: f64,
    pub mean_c: f64,
    pub var_e: f64,
    pub var_c: f64,
}

impl GroupSummary {
    pub fn from_scores(scores: &[f64], groups: &[Group]) -> Result<Self> {
        let (mut case, mut control) = (Vec::new(), Vec::new());
        for (v, g) in scores.iter().zip(groups) {
            match g {
                Group::Experimental => case.push(*v),
                Group::Control => control.push(*v),
            }
        }
        if case.len() < 2 || control.len() < 2 {
            return Err(GsemaError::DegenerateDesign(format!(
                "need at least 2 samples per group, got {} case and {} control",
                case.len(),
                control.len()
            )));
        }
        Ok(Self {
            n_e: case.len(),
            n_c: control.len(),
            mean_e: stats::mean(&case),
            mean_c: stats::mean(&control),
            var_e: stats::sample_variance(&case),
            var_c: stats::sample_variance(&control),
        })
    }

    pub fn residual_df(&self) -> usize {
        self.n_e + self.n_c - 2
    }

    pub fn pooled_variance(&self) -> f64 {
        ((self.n_e - 1) as f64 * self.var_e + (self.n_c - 1) as f64 * self.var_c) / self.residual_df() as f64
    }

    /// Cohen's d from group means and the pooled SD.
    pub fn cohens_d(&self) -> f64 {
        (self.mean_e - self.mean_c) / self.pooled_variance().sqrt()
    }
}

/// Hyperparameters of the scaled-F prior on residual variances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariancePrior {
    /// Capped at [`PRIOR_DF_CAP`] when `infinite` is set.
    pub df: f64,
    pub var: f64,
    pub infinite: bool,
}

impl VariancePrior {
    pub fn none(var: f64) -> Self {
        Self {
            df: 0.0,
            var,
            infinite: false,
        }
    }

    pub fn posterior_variance(&self, residual_var: f64, residual_df: f64) -> f64 {
        if self.infinite {
            self.var
        } else if self.df == 0.0 {
            residual_var
        } else {
            (self.df * self.var + residual_df * residual_var) / (self.df + residual_df)
        }
    }
}

/// Moment-matching fit of `s²_g ~ s0² · F(d_g, d0)` on the log scale.
///
/// Tiny variances are floored at `1e-5 × median` before taking logs. With a
/// single variance there is nothing to pool and `d0 = 0`.
pub fn fit_variance_prior(residual_vars: &[f64], residual_df: f64) -> VariancePrior {
    let n = residual_vars.len();
    if n == 0 {
        return VariancePrior::none(f64::NAN);
    }
    if n == 1 {
        return VariancePrior::none(residual_vars[0]);
    }
    let clipped: Vec<f64> = residual_vars.iter().map(|v| v.max(0.0)).collect();
    let mut m = stats::median(&clipped);
    if m == 0.0 {
        m = 1.0;
    }
    let floor = 1e-5 * m;
    let floored: Vec<f64> = clipped.iter().map(|v| v.max(floor)).collect();
    let half = residual_df / 2.0;
    let e: Vec<f64> = floored.iter().map(|v| v.ln() - digamma(half) + half.ln()).collect();
    let emean = stats::mean(&e);
    let evar = e.iter().map(|x| (x - emean) * (x - emean)).sum::<f64>() / (n as f64 - 1.0) - trigamma(half);

    if evar > 0.0 {
        let df = 2.0 * trigamma_inverse(evar);
        let var = (emean + digamma(df / 2.0) - (df / 2.0).ln()).exp();
        return VariancePrior {
            df: df.min(PRIOR_DF_CAP),
            var,
            infinite: df >= PRIOR_DF_CAP,
        };
    }
    // No spread beyond sampling noise: the pooled variance is the MLE of the scale.
    VariancePrior {
        df: PRIOR_DF_CAP,
        var: stats::mean(&floored),
        infinite: true,
    }
}

/// Moderated two-group fit for every pathway of one study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeratedFit {
    pub pathway_names: Vec<String>,
    pub n_e: usize,
    pub n_c: usize,
    /// Difference in group means (case minus control).
    pub beta: Vec<f64>,
    pub residual_var: Vec<f64>,
    pub residual_df: f64,
    pub prior: VariancePrior,
    pub t: Vec<f64>,
    /// `d0 + d_g`, capped at the pooled residual df of all pathways as limma does.
    pub df_total: f64,
}

pub fn fit_moderated_t(
    scores: &PathwayScoreMatrix,
    labels: &ClassLabels,
    cfg: &EffectsConfig,
) -> Result<ModeratedFit> {
    if scores.sample_ids.as_slice() != labels.sample_ids() {
        return Err(GsemaError::Domain(format!(
            "labels of study {} do not follow the score matrix's sample order",
            scores.study_id
        )));
    }
    let summaries = (0..scores.n_pathways())
        .map(|p| GroupSummary::from_scores(scores.row(p), labels.groups()))
        .collect::<Result<Vec<_>>>()?;
    let (n_e, n_c) = labels.group_sizes();
    let residual_df = (n_e + n_c - 2) as f64;
    let residual_var: Vec<f64> = summaries.iter().map(GroupSummary::pooled_variance).collect();

    let estimated = fit_variance_prior(&residual_var, residual_df);
    let prior = if cfg.ordinary_t {
        VariancePrior::none(estimated.var)
    } else {
        estimated
    };

    let scale = (1.0 / n_e as f64 + 1.0 / n_c as f64).sqrt();
    let mut t = Vec::with_capacity(summaries.len());
    for (p, s) in summaries.iter().enumerate() {
        let post = prior.posterior_variance(residual_var[p], residual_df);
        if post.is_nan() || post <= 0.0 {
            return Err(GsemaError::DegenerateVariance(scores.pathway_names[p].clone()));
        }
        t.push((s.mean_e - s.mean_c) / (post.sqrt() * scale));
    }

    Ok(ModeratedFit {
        pathway_names: scores.pathway_names.clone(),
        n_e,
        n_c,
        beta: summaries.iter().map(|s| s.mean_e - s.mean_c).collect(),
        residual_var,
        residual_df,
        prior,
        t,
        df_total: (prior.df + residual_df).min(residual_df * summaries.len() as f64),
    })
}

/// Cohen's d from a t-statistic: `(n_e + n_c) t / (√(n_e n_c) √df)`.
pub fn t_to_cohens_d(t: f64, n_e: usize, n_c: usize, df: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 {
        return Err(GsemaError::Domain(format!("degrees of freedom must be positive, got {df}")));
    }
    let n = (n_e + n_c) as f64;
    Ok(n * t / (((n_e * n_c) as f64).sqrt() * df.sqrt()))
}

/// Small-sample correction `J = 1 - 3 / (4(n_e + n_c - 2) - 1)`; returns `(J·d, J)`.
pub fn cohens_to_hedges(d: f64, n_e: usize, n_c: usize) -> Result<(f64, f64)> {
    let denom = 4.0 * (n_e as f64 + n_c as f64 - 2.0) - 1.0;
    if denom <= 0.0 {
        return Err(GsemaError::Domain(format!(
            "Hedges correction undefined for group sizes {n_e} and {n_c}"
        )));
    }
    let j = 1.0 - 3.0 / denom;
    Ok((j * d, j))
}

/// `J² ((n_e + n_c) / (n_e n_c) + d² / (2(n_e + n_c)))`.
pub fn hedges_variance_raw(d: f64, j: f64, n_e: usize, n_c: usize) -> f64 {
    let (ne, nc) = (n_e as f64, n_c as f64);
    j * j * ((ne + nc) / (ne * nc) + d * d / (2.0 * (ne + nc)))
}

/// Variance built on the across-study mean effect instead of the study's
/// own: `1/n_e + 1/n_c + ḡ² / (2(n_e + n_c))`.
pub fn hedges_variance_corrected(g_bar: f64, n_e: usize, n_c: usize) -> f64 {
    let (ne, nc) = (n_e as f64, n_c as f64);
    1.0 / ne + 1.0 / nc + g_bar * g_bar / (2.0 * (ne + nc))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyEffect {
    pub pathway: String,
    pub study_id: String,
    pub n_e: usize,
    pub n_c: usize,
    pub t: f64,
    /// df used in the t-to-d conversion.
    pub df: f64,
    pub d: f64,
    pub g: f64,
    pub j_factor: f64,
    pub var_raw: f64,
    /// Filled in by the meta-analysis.
    pub var_corrected: Option<f64>,
}

/// Effect sizes for every pathway in one study's (filtered) score matrix.
pub fn compute_study_effects(
    scores: &PathwayScoreMatrix,
    labels: &ClassLabels,
    cfg: &EffectsConfig,
) -> Result<(ModeratedFit, Vec<StudyEffect>)> {
    let fit = fit_moderated_t(scores, labels, cfg)?;
    let df = if cfg.design_df { fit.residual_df } else { fit.df_total };
    let effects = fit
        .pathway_names
        .iter()
        .zip(&fit.t)
        .map(|(pathway, &t)| {
            let d = t_to_cohens_d(t, fit.n_e, fit.n_c, df)?;
            let (g, j) = cohens_to_hedges(d, fit.n_e, fit.n_c)?;
            Ok(StudyEffect {
                pathway: pathway.clone(),
                study_id: scores.study_id.clone(),
                n_e: fit.n_e,
                n_c: fit.n_c,
                t,
                df,
                d,
                g,
                j_factor: j,
                var_raw: hedges_variance_raw(d, j, fit.n_e, fit.n_c),
                var_corrected: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fit, effects))
}

const EFFECTS_HEADER: &str = "study_id\tpathway\tn_e\tn_c\tt\tdf\td\tg\tvar_raw\tvar_corrected";

pub fn write_effects_tsv<W: Write>(effects: &[StudyEffect], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{EFFECTS_HEADER}")?;
    for e in effects {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.study_id,
            e.pathway,
            e.n_e,
            e.n_c,
            g17(e.t),
            g17(e.df),
            g17(e.d),
            g17(e.g),
            g17(e.var_raw),
            e.var_corrected.map(g17).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Reads a table written by [`write_effects_tsv`]. `j_factor` is recomputed
/// from the group sizes; the trailing `var_corrected` column may be absent
/// or empty.
pub fn read_effects_tsv<R: BufRead>(input: R) -> Result<Vec<StudyEffect>> {
    let mut effects = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| GsemaError::parse(line_no, 0, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (line_no == 1 && line.starts_with("study_id")) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 && f.len() != 10 {
            return Err(GsemaError::parse(line_no, 0, format!("expected 9 or 10 columns, got {}", f.len())));
        }
        let int = |col: usize| -> Result<usize> {
            f[col]
                .parse()
                .map_err(|_| GsemaError::parse(line_no, col + 1, format!("not an integer: {:?}", f[col])))
        };
        let num = |col: usize| -> Result<f64> {
            f[col]
                .parse()
                .map_err(|_| GsemaError::parse(line_no, col + 1, format!("not a number: {:?}", f[col])))
        };
        let (n_e, n_c) = (int(2)?, int(3)?);
        let (_, j) = cohens_to_hedges(0.0, n_e, n_c)?;
        effects.push(StudyEffect {
            study_id: f[0].to_string(),
            pathway: f[1].to_string(),
            n_e,
            n_c,
            t: num(4)?,
            df: num(5)?,
            d: num(6)?,
            g: num(7)?,
            j_factor: j,
            var_raw: num(8)?,
            var_corrected: match f.get(9) {
                Some(v) if !v.is_empty() => Some(num(9)?),
                _ => None,
            },
        });
    }
    if effects.is_empty() {
        return Err(GsemaError::EmptyInput("effects table has no rows".into()));
    }
    Ok(effects)
}
