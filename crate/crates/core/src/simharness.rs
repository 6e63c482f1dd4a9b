//! Synthetic multi-study data with a spiked pathway, and label-permutation
//! suites for measuring false positives.
//!
//! # Random streams
//!
//! Every draw comes from a ChaCha8 generator seeded with the master seed and
//! switched to a stream id derived from what is being drawn:
//!
//! | purpose                                  | stream id                     |
//! |------------------------------------------|-------------------------------|
//! | DE genes, spiked set, decoy catalog      | `0`                           |
//! | counts of study `k` (0-based)            | `1 + k`                       |
//! | labels of study `k` in permutation `i`   | `2^63 + i * 2^20 + k`         |
//!
//! Results therefore do not depend on scheduling or thread count.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GsemaError, Result};
use crate::ingest::{
    ClassLabels, ExpressionMatrix, GeneSet, GeneSetCollection, Group, ManifestEntry, Study, StudyManifest,
};
use crate::pipeline::{analyze, score_studies, PipelineConfig};

pub const SPIKED_SET_NAME: &str = "Simulated_Pathway";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const GMT_FILE: &str = "gene_sets.gmt";

const STREAM_DESIGN: u64 = 0;
const STREAM_PERMUTATION: u64 = 1 << 63;
const MAX_STUDIES_PER_ITERATION: u64 = 1 << 20;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn study_stream(seed: u64, study: usize) -> ChaCha8Rng {
    substream(seed, 1 + study as u64)
}

pub fn permutation_stream(seed: u64, iteration: usize, study: usize) -> ChaCha8Rng {
    debug_assert!((study as u64) < MAX_STUDIES_PER_ITERATION);
    substream(
        seed,
        STREAM_PERMUTATION + iteration as u64 * MAX_STUDIES_PER_ITERATION + study as u64,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k_studies: usize,
    pub genes: usize,
    pub n_e: usize,
    pub n_c: usize,
    pub de_fraction: f64,
    pub spiked_set_size: usize,
    pub fold_change_range: (f64, f64),
    /// Negative-binomial dispersion φ: variance = μ + φμ².
    pub nb_dispersion: f64,
    pub baseline_log_mean: f64,
    pub baseline_log_sd: f64,
    pub n_decoy_sets: usize,
    pub decoy_set_size_range: (usize, usize),
    /// Draw decoy genes from the whole genome instead of only non-DE genes.
    pub decoy_overlap: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            k_studies: 5,
            genes: 2000,
            n_e: 20,
            n_c: 20,
            de_fraction: 0.01,
            spiked_set_size: 23,
            fold_change_range: (2.0, 4.0),
            nb_dispersion: 0.2,
            baseline_log_mean: 4.0,
            baseline_log_sd: 1.5,
            n_decoy_sets: 500,
            decoy_set_size_range: (10, 100),
            decoy_overlap: false,
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Number of DE genes: the DE fraction of the genome, rounded, and never
    /// fewer than the spiked set (its genes are drawn from the DE pool).
    pub fn de_pool_size(&self) -> usize {
        if self.de_fraction <= 0.0 {
            return 0;
        }
        ((self.de_fraction * self.genes as f64).round() as usize).max(self.spiked_set_size)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(GsemaError::Config(msg));
        if self.k_studies == 0 || self.genes == 0 {
            return fail("need at least one study and one gene".into());
        }
        if self.n_e < 2 || self.n_c < 2 {
            return fail("each group needs at least 2 samples".into());
        }
        if !(0.0..=1.0).contains(&self.de_fraction) {
            return fail(format!("DE fraction {} outside [0, 1]", self.de_fraction));
        }
        if self.spiked_set_size > 0 && self.de_fraction == 0.0 {
            return fail("a spiked set needs a nonzero DE fraction".into());
        }
        if self.de_pool_size() > self.genes {
            return fail(format!(
                "DE pool of {} genes exceeds the genome of {}",
                self.de_pool_size(),
                self.genes
            ));
        }
        let (lo, hi) = self.fold_change_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return fail(format!("invalid fold-change range [{lo}, {hi}]"));
        }
        if !(self.nb_dispersion > 0.0 && self.nb_dispersion.is_finite()) {
            return fail("dispersion must be positive".into());
        }
        if !(self.baseline_log_sd >= 0.0 && self.baseline_log_mean.is_finite()) {
            return fail("invalid baseline distribution".into());
        }
        let (dlo, dhi) = self.decoy_set_size_range;
        if self.n_decoy_sets > 0 {
            if dlo == 0 || dlo > dhi {
                return fail(format!("invalid decoy size range [{dlo}, {dhi}]"));
            }
            let pool = if self.decoy_overlap {
                self.genes
            } else {
                self.genes - self.de_pool_size()
            };
            if dhi > pool {
                return fail(format!("decoy sets of up to {dhi} genes cannot be drawn from {pool} genes"));
            }
        }
        if self.spiked_set_size == 0 && self.n_decoy_sets == 0 {
            return fail("the catalog would be empty".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub de_genes: Vec<String>,
    /// +1 up in cases, -1 down.
    pub de_directions: Vec<i8>,
    pub spiked_set: Option<String>,
    pub spiked_genes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub studies: Vec<Study>,
    pub sets: GeneSetCollection,
    pub truth: Truth,
}

pub fn gene_id(g: usize) -> String {
    format!("GENE{:05}", g + 1)
}

pub fn simulate_studies(cfg: &SimConfig) -> Result<SimulatedData> {
    cfg.validate()?;
    let mut design = substream(cfg.seed, STREAM_DESIGN);
    let genes: Vec<String> = (0..cfg.genes).map(gene_id).collect();

    let de_idx: Vec<usize> = index::sample(&mut design, cfg.genes, cfg.de_pool_size()).into_vec();
    let directions: Vec<i8> = de_idx
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if i < cfg.spiked_set_size || design.random_bool(0.5) {
                1
            } else {
                -1
            }
        })
        .collect();

    let mut sets = Vec::with_capacity(cfg.n_decoy_sets + 1);
    if cfg.spiked_set_size > 0 {
        sets.push(GeneSet {
            name: SPIKED_SET_NAME.to_string(),
            description: "spiked up-regulated DE genes".to_string(),
            genes: de_idx[..cfg.spiked_set_size].iter().map(|&g| genes[g].clone()).collect(),
        });
    }
    let de_set: HashSet<usize> = de_idx.iter().copied().collect();
    let decoy_pool: Vec<usize> = if cfg.decoy_overlap {
        (0..cfg.genes).collect()
    } else {
        (0..cfg.genes).filter(|g| !de_set.contains(g)).collect()
    };
    let (dlo, dhi) = cfg.decoy_set_size_range;
    for d in 0..cfg.n_decoy_sets {
        let size = design.random_range(dlo..=dhi);
        let picked = index::sample(&mut design, decoy_pool.len(), size);
        sets.push(GeneSet {
            name: format!("Decoy_{:04}", d + 1),
            description: "random genes".to_string(),
            genes: picked.iter().map(|i| genes[decoy_pool[i]].clone()).collect(),
        });
    }
    let sets = GeneSetCollection::new(sets)?;

    let studies = (0..cfg.k_studies)
        .into_par_iter()
        .map(|k| simulate_study(cfg, k, &genes, &de_idx, &directions))
        .collect::<Result<Vec<_>>>()?;

    let truth = Truth {
        seed: cfg.seed,
        de_genes: de_idx.iter().map(|&g| genes[g].clone()).collect(),
        de_directions: directions,
        spiked_set: (cfg.spiked_set_size > 0).then(|| SPIKED_SET_NAME.to_string()),
        spiked_genes: de_idx[..cfg.spiked_set_size].iter().map(|&g| genes[g].clone()).collect(),
    };
    Ok(SimulatedData { studies, sets, truth })
}

fn simulate_study(cfg: &SimConfig, k: usize, genes: &[String], de_idx: &[usize], directions: &[i8]) -> Result<Study> {
    let mut rng = study_stream(cfg.seed, k);
    let study_id = format!("Study{}", k + 1);
    let n = cfg.n_e + cfg.n_c;

    let baseline_dist = Normal::new(cfg.baseline_log_mean, cfg.baseline_log_sd)
        .map_err(|e| GsemaError::Config(e.to_string()))?;
    let baselines: Vec<f64> = (0..cfg.genes).map(|_| baseline_dist.sample(&mut rng).exp()).collect();

    let (lo, hi) = cfg.fold_change_range;
    let mut case_factor = vec![1.0; cfg.genes];
    for (&g, &dir) in de_idx.iter().zip(directions) {
        let fc = if lo == hi { lo } else { rng.random_range(lo..hi) };
        case_factor[g] = if dir > 0 { fc } else { 1.0 / fc };
    }

    let shape = 1.0 / cfg.nb_dispersion;
    let mut values = Vec::with_capacity(cfg.genes * n);
    for g in 0..cfg.genes {
        for j in 0..n {
            let mean = if j < cfg.n_e { baselines[g] * case_factor[g] } else { baselines[g] };
            let count = negative_binomial(&mut rng, mean, shape)?;
            values.push((count + 1.0).log2());
        }
    }

    let sample_ids: Vec<String> = (0..cfg.n_e)
        .map(|j| format!("{study_id}_case{:03}", j + 1))
        .chain((0..cfg.n_c).map(|j| format!("{study_id}_ctrl{:03}", j + 1)))
        .collect();
    let groups = (0..n)
        .map(|j| if j < cfg.n_e { Group::Experimental } else { Group::Control })
        .collect();
    let matrix = ExpressionMatrix::new(study_id, genes.to_vec(), sample_ids.clone(), values)?;
    let labels = ClassLabels::new(sample_ids, groups)?;
    Ok(Study { matrix, labels })
}

/// Writes `<study>_expression.tsv` and `<study>_labels.tsv` per study, a
/// manifest with paths relative to `dir`, and the gene-set catalog.
pub fn write_simulation(data: &SimulatedData, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| GsemaError::io(dir, e))?;
    let mut entries = Vec::with_capacity(data.studies.len());
    for study in &data.studies {
        let expression = format!("{}_expression.tsv", study.id());
        let labels = format!("{}_labels.tsv", study.id());
        write_file(&dir.join(&expression), |w| study.matrix.write_tsv(w))?;
        write_file(&dir.join(&labels), |w| study.labels.write_tsv(w))?;
        entries.push(ManifestEntry {
            study_id: study.id().to_string(),
            expression_path: expression.into(),
            labels_path: labels.into(),
        });
    }
    let manifest = StudyManifest { entries };
    write_file(&dir.join(MANIFEST_FILE), |w| manifest.write_tsv(w))?;
    write_file(&dir.join(GMT_FILE), |w| data.sets.write_gmt(w))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| GsemaError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| GsemaError::io(path, e))
}

/// Gamma-Poisson draw with the given mean and gamma shape `1/φ`.
fn negative_binomial(rng: &mut ChaCha8Rng, mean: f64, shape: f64) -> Result<f64> {
    let gamma = Gamma::new(shape, mean / shape).map_err(|e| GsemaError::Config(e.to_string()))?;
    let rate: f64 = gamma.sample(rng);
    if rate.is_nan() || rate <= 0.0 {
        return Ok(0.0);
    }
    let poisson = Poisson::new(rate).map_err(|e| GsemaError::Domain(e.to_string()))?;
    Ok(poisson.sample(rng))
}

/// Uniform relabeling that keeps both group sizes.
pub fn permute_labels<R: rand::Rng + ?Sized>(labels: &ClassLabels, rng: &mut R) -> ClassLabels {
    let mut groups = labels.groups().to_vec();
    groups.shuffle(rng);
    labels
        .with_groups(groups)
        .expect("a permutation keeps group sizes valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IterationStatus {
    Completed,
    /// The activity filter left nothing to test.
    NothingTested,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationOutcome {
    pub iteration: usize,
    pub status: IterationStatus,
    pub tested: usize,
    /// Pathways with raw p below the threshold.
    pub significant: usize,
    pub spiked_significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

impl CountSummary {
    /// Quantiles by linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            min: v[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    pub seed: u64,
    pub p_threshold: f64,
    pub spiked_set: Option<String>,
    pub iterations: Vec<IterationOutcome>,
}

impl PermutationReport {
    fn completed(&self) -> impl Iterator<Item = &IterationOutcome> {
        self.iterations
            .iter()
            .filter(|o| !matches!(o.status, IterationStatus::Failed(_)))
    }

    pub fn n_failed(&self) -> usize {
        self.iterations.len() - self.completed().count()
    }

    pub fn significant_counts(&self) -> CountSummary {
        let v: Vec<f64> = self.completed().map(|o| o.significant as f64).collect();
        CountSummary::of(&v).unwrap_or(CountSummary::of(&[0.0]).unwrap())
    }

    pub fn tested_counts(&self) -> CountSummary {
        let v: Vec<f64> = self.completed().map(|o| o.tested as f64).collect();
        CountSummary::of(&v).unwrap_or(CountSummary::of(&[0.0]).unwrap())
    }

    /// Fraction of completed iterations where the spiked set came out significant.
    pub fn spiked_rate(&self) -> f64 {
        let n = self.completed().count();
        if n == 0 {
            return 0.0;
        }
        self.completed().filter(|o| o.spiked_significant).count() as f64 / n as f64
    }

    pub fn write_tsv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration\tstatus\ttested\tsignificant\tspiked_significant")?;
        for o in &self.iterations {
            let status = match &o.status {
                IterationStatus::Completed => "completed".to_string(),
                IterationStatus::NothingTested => "nothing_tested".to_string(),
                IterationStatus::Failed(msg) => format!("failed: {}", msg.replace(['\t', '\n'], " ")),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                o.iteration, status, o.tested, o.significant, o.spiked_significant
            )?;
        }
        Ok(())
    }
}

/// Re-runs the label-dependent pipeline on independently permuted labels of
/// every study, `iterations` times. Scores are computed once since they do
/// not depend on labels.
pub fn run_permutation_suite(
    studies: &[Study],
    sets: &GeneSetCollection,
    cfg: &PipelineConfig,
    iterations: usize,
    seed: u64,
    spiked_set: Option<&str>,
    p_threshold: f64,
) -> Result<PermutationReport> {
    cfg.validate(studies.len())?;
    let scored = score_studies(studies, sets, cfg)?;

    let outcomes = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let labels: Vec<ClassLabels> = studies
                .iter()
                .enumerate()
                .map(|(k, s)| permute_labels(&s.labels, &mut permutation_stream(seed, i, k)))
                .collect();
            let refs: Vec<&ClassLabels> = labels.iter().collect();
            match analyze(&scored, &refs, cfg) {
                Ok(a) => IterationOutcome {
                    iteration: i,
                    status: IterationStatus::Completed,
                    tested: a.results.len(),
                    significant: a.results.iter().filter(|r| r.p < p_threshold).count(),
                    spiked_significant: spiked_set
                        .and_then(|name| a.result(name))
                        .is_some_and(|r| r.p < p_threshold),
                },
                Err(e) => IterationOutcome {
                    iteration: i,
                    status: if matches!(e.root(), GsemaError::NoPathways(_)) {
                        IterationStatus::NothingTested
                    } else {
                        IterationStatus::Failed(e.to_string())
                    },
                    tested: 0,
                    significant: 0,
                    spiked_significant: false,
                },
            }
        })
        .collect();

    Ok(PermutationReport {
        seed,
        p_threshold,
        spiked_set: spiked_set.map(str::to_string),
        iterations: outcomes,
    })
}
