//! Combines per-study effect sizes per pathway and controls the FDR.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effects::{hedges_variance_corrected, StudyEffect};
use crate::error::{GsemaError, Result};
use crate::fmt::g17;
use crate::special::two_sided_p;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetaModel {
    Fem,
    Rem,
}

impl fmt::Display for MetaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetaModel::Fem => "fem",
            MetaModel::Rem => "rem",
        })
    }
}

impl FromStr for MetaModel {
    type Err = GsemaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fem" => Ok(MetaModel::Fem),
            "rem" => Ok(MetaModel::Rem),
            other => Err(GsemaError::Config(format!("unknown model {other:?} (expected fem or rem)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub model: MetaModel,
    pub alpha: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            model: MetaModel::Rem,
            alpha: 0.05,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GsemaError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// An effect size and its within-study variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Effect {
    pub g: f64,
    pub v: f64,
}

fn check_effects(effects: &[Effect]) -> Result<()> {
    if effects.is_empty() {
        return Err(GsemaError::Domain("no effects to combine".into()));
    }
    if let Some(e) = effects.iter().find(|e| e.v.is_nan() || e.v <= 0.0 || !e.g.is_finite()) {
        return Err(GsemaError::Domain(format!(
            "effect {} with variance {} cannot be combined",
            e.g, e.v
        )));
    }
    Ok(())
}

fn weighted_mean(effects: &[Effect], extra_var: f64) -> (f64, f64) {
    let mut sw = 0.0;
    let mut swg = 0.0;
    for e in effects {
        let w = 1.0 / (e.v + extra_var);
        sw += w;
        swg += w * e.g;
    }
    (swg / sw, 1.0 / sw)
}

/// Inverse-variance weighted mean and its variance.
pub fn fem_combine(effects: &[Effect]) -> Result<(f64, f64)> {
    check_effects(effects)?;
    Ok(weighted_mean(effects, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Heterogeneity {
    pub tau2: f64,
    pub q: f64,
    pub c: f64,
}

/// DerSimonian–Laird moment estimator of the between-study variance.
pub fn dl_tau2(effects: &[Effect], fem_ces: f64) -> Result<Heterogeneity> {
    check_effects(effects)?;
    if effects.len() == 1 {
        return Ok(Heterogeneity {
            tau2: 0.0,
            q: 0.0,
            c: 0.0,
        });
    }
    let (mut sw, mut sw2, mut q) = (0.0, 0.0, 0.0);
    for e in effects {
        let w = 1.0 / e.v;
        sw += w;
        sw2 += w * w;
        q += w * (e.g - fem_ces) * (e.g - fem_ces);
    }
    let df = (effects.len() - 1) as f64;
    let c = sw - sw2 / sw;
    if c <= 0.0 && q > df {
        return Err(GsemaError::Domain(format!("DerSimonian-Laird scaling constant {c} is not positive")));
    }
    let tau2 = if q > df { (q - df) / c } else { 0.0 };
    Ok(Heterogeneity { tau2, q, c })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Combined {
    pub ces: f64,
    pub var: f64,
    pub z: f64,
    pub p: f64,
}

impl Combined {
    fn from_mean(ces: f64, var: f64) -> Self {
        let z = ces / var.sqrt();
        Self {
            ces,
            var,
            z,
            p: two_sided_p(z),
        }
    }
}

/// Random-effects combination with weights `1 / (v + τ²)`, plus the normal
/// test of the combined effect.
pub fn rem_combine(effects: &[Effect], tau2: f64) -> Result<Combined> {
    check_effects(effects)?;
    if tau2.is_nan() || tau2 < 0.0 {
        return Err(GsemaError::Domain(format!("tau² must be nonnegative, got {tau2}")));
    }
    let (ces, var) = weighted_mean(effects, tau2);
    Ok(Combined::from_mean(ces, var))
}

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(pvalues: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(GsemaError::Domain(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank0, &i) in order.iter().enumerate().rev() {
        let candidate = (m as f64 * pvalues[i] / (rank0 + 1) as f64).min(1.0);
        running = running.min(candidate);
        adjusted[i] = running;
    }
    Ok(adjusted)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyContribution {
    pub study_id: String,
    pub g: f64,
    pub var_corrected: f64,
    /// Normalized weight in the terminal model.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub pathway: String,
    pub k_studies: usize,
    pub ces: f64,
    pub var_ces: f64,
    pub tau2: f64,
    pub q: f64,
    pub z: f64,
    pub p: f64,
    pub fdr: f64,
    /// Sorted by study id.
    pub studies: Vec<StudyContribution>,
}

impl MetaResult {
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.fdr < alpha
    }
}

/// Meta-analysis of one pathway from its member studies' effects.
///
/// The study effects' variances are replaced with the mean-effect corrected
/// form before both the FEM pass (which feeds Q) and the final model.
pub fn combine_pathway(pathway: &str, effects: &[&StudyEffect], model: MetaModel) -> Result<MetaResult> {
    let mut effects: Vec<&StudyEffect> = effects.to_vec();
    effects.sort_by(|a, b| a.study_id.cmp(&b.study_id));
    let g_bar = effects.iter().map(|e| e.g).sum::<f64>() / effects.len() as f64;
    let corrected: Vec<Effect> = effects
        .iter()
        .map(|e| Effect {
            g: e.g,
            v: hedges_variance_corrected(g_bar, e.n_e, e.n_c),
        })
        .collect();

    let (fem_ces, fem_var) = fem_combine(&corrected)?;
    let het = dl_tau2(&corrected, fem_ces)?;
    let (combined, extra) = match model {
        MetaModel::Fem => (Combined::from_mean(fem_ces, fem_var), 0.0),
        MetaModel::Rem => (rem_combine(&corrected, het.tau2)?, het.tau2),
    };
    let studies = effects
        .iter()
        .zip(&corrected)
        .map(|(e, c)| StudyContribution {
            study_id: e.study_id.clone(),
            g: e.g,
            var_corrected: c.v,
            weight: combined.var / (c.v + extra),
        })
        .collect();
    Ok(MetaResult {
        pathway: pathway.to_string(),
        k_studies: effects.len(),
        ces: combined.ces,
        var_ces: combined.var,
        tau2: het.tau2,
        q: het.q,
        z: combined.z,
        p: combined.p,
        fdr: f64::NAN,
        studies,
    })
}

/// Combines every listed pathway, applies BH over all of them, and sorts by
/// |CES| descending with ties broken by name.
///
/// `pathways` pairs each name with the effects of its member studies.
pub fn run_meta(pathways: &[(String, Vec<&StudyEffect>)], cfg: &MetaConfig) -> Result<Vec<MetaResult>> {
    cfg.validate()?;
    if pathways.is_empty() {
        return Err(GsemaError::NoPathways("nothing to meta-analyze".into()));
    }
    let mut results = pathways
        .par_iter()
        .map(|(name, effects)| combine_pathway(name, effects, cfg.model))
        .collect::<Result<Vec<_>>>()?;
    let p: Vec<f64> = results.iter().map(|r| r.p).collect();
    for (r, fdr) in results.iter_mut().zip(bh_adjust(&p)?) {
        r.fdr = fdr;
    }
    results.sort_by(|a, b| {
        b.ces
            .abs()
            .total_cmp(&a.ces.abs())
            .then_with(|| a.pathway.cmp(&b.pathway))
    });
    Ok(results)
}

/// Groups flat per-study effect lists by pathway, keeping pathways that
/// appear in at least `min_studies` studies. Names come out sorted.
pub fn group_by_pathway(effects: &[StudyEffect], min_studies: usize) -> Vec<(String, Vec<&StudyEffect>)> {
    let mut by_name: HashMap<&str, Vec<&StudyEffect>> = HashMap::new();
    for e in effects {
        by_name.entry(e.pathway.as_str()).or_default().push(e);
    }
    let mut grouped: Vec<(String, Vec<&StudyEffect>)> = by_name
        .into_iter()
        .filter(|(_, v)| v.len() >= min_studies)
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    grouped.sort_by(|a, b| a.0.cmp(&b.0));
    grouped
}

pub fn write_results_tsv<W: Write>(results: &[MetaResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "pathway\tk_studies\tces\tvar_ces\ttau2\tq\tz\tpvalue\tfdr\tper_study_g")?;
    for r in results {
        let per_study: Vec<String> = r
            .studies
            .iter()
            .map(|s| format!("{}={}", s.study_id, g17(s.g)))
            .collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.pathway,
            r.k_studies,
            g17(r.ces),
            g17(r.var_ces),
            g17(r.tau2),
            g17(r.q),
            g17(r.z),
            g17(r.p),
            g17(r.fdr),
            per_study.join(";")
        )?;
    }
    Ok(())
}
