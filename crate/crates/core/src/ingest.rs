//! Expression matrices, class labels, gene-set catalogs and study manifests.
//!
//! All formats are UTF-8, tab-separated, and accept `\n` or `\r\n` line
//! endings. Blank lines are ignored.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GsemaError, Result};
use crate::fmt::g17;

/// Dense genes × samples matrix for one study, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionMatrix {
    pub study_id: String,
    gene_ids: Vec<String>,
    sample_ids: Vec<String>,
    values: Vec<f64>,
}

impl ExpressionMatrix {
    /// Builds a matrix after checking shape, id uniqueness and finiteness.
    pub fn new(
        study_id: impl Into<String>,
        gene_ids: Vec<String>,
        sample_ids: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if gene_ids.is_empty() || sample_ids.is_empty() {
            return Err(GsemaError::EmptyInput("expression matrix has no genes or no samples".into()));
        }
        if values.len() != gene_ids.len() * sample_ids.len() {
            return Err(GsemaError::Domain(format!(
                "expected {}x{} values, got {}",
                gene_ids.len(),
                sample_ids.len(),
                values.len()
            )));
        }
        if let Some(dup) = first_duplicate(&gene_ids) {
            return Err(GsemaError::DuplicateGene(dup.to_string()));
        }
        if let Some(dup) = first_duplicate(&sample_ids) {
            return Err(GsemaError::DuplicateSample(dup.to_string()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let n = sample_ids.len();
            return Err(GsemaError::parse(pos / n + 2, pos % n + 2, "non-finite value"));
        }
        Ok(Self {
            study_id: study_id.into(),
            gene_ids,
            sample_ids,
            values,
        })
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, gene: usize) -> &[f64] {
        let n = self.n_samples();
        &self.values[gene * n..(gene + 1) * n]
    }

    pub fn get(&self, gene: usize, sample: usize) -> f64 {
        self.values[gene * self.n_samples() + sample]
    }

    pub fn column(&self, sample: usize) -> Vec<f64> {
        (0..self.n_genes()).map(|g| self.get(g, sample)).collect()
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> ExpressionMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_samples());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        ExpressionMatrix {
            study_id: self.study_id.clone(),
            gene_ids: rows.iter().map(|&r| self.gene_ids[r].clone()).collect(),
            sample_ids: self.sample_ids.clone(),
            values,
        }
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "gene_id")?;
        for s in &self.sample_ids {
            write!(out, "\t{s}")?;
        }
        writeln!(out)?;
        for (g, gene) in self.gene_ids.iter().enumerate() {
            write!(out, "{gene}")?;
            for v in self.row(g) {
                write!(out, "\t{}", g17(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn first_duplicate(ids: &[String]) -> Option<&str> {
    let mut seen = HashSet::with_capacity(ids.len());
    ids.iter().find(|id| !seen.insert(id.as_str())).map(|s| s.as_str())
}

/// Non-empty lines with their 1-based line numbers, `\r` stripped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GsemaError::io(path, e))
}

pub fn parse_expression_tsv(path: &Path, study_id: &str) -> Result<ExpressionMatrix> {
    parse_expression_str(&read_to_string(path)?, study_id)
}

pub fn parse_expression_str(text: &str, study_id: &str) -> Result<ExpressionMatrix> {
    let mut it = lines(text);
    let (_, header) = it
        .next()
        .ok_or_else(|| GsemaError::EmptyInput("expression file is empty".into()))?;
    let sample_ids: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
    if sample_ids.is_empty() {
        return Err(GsemaError::EmptyInput("expression header lists no samples".into()));
    }
    if let Some(dup) = first_duplicate(&sample_ids) {
        return Err(GsemaError::DuplicateSample(dup.to_string()));
    }

    let n = sample_ids.len();
    let mut gene_ids = Vec::new();
    let mut seen = HashSet::new();
    let mut values = Vec::new();
    for (line_no, line) in it {
        let mut fields = line.split('\t');
        let gene = fields.next().unwrap_or_default();
        if !seen.insert(gene.to_string()) {
            return Err(GsemaError::DuplicateGene(gene.to_string()));
        }
        let mut count = 0;
        for (col, cell) in fields.enumerate() {
            count += 1;
            if count > n {
                return Err(GsemaError::parse(line_no, col + 2, format!("row has more than {n} values")));
            }
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| GsemaError::parse(line_no, col + 2, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(GsemaError::parse(line_no, col + 2, format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
        if count < n {
            return Err(GsemaError::parse(line_no, 0, format!("row has {count} values, expected {n}")));
        }
        gene_ids.push(gene.to_string());
    }
    if gene_ids.is_empty() {
        return Err(GsemaError::EmptyInput("expression file has no gene rows".into()));
    }
    ExpressionMatrix::new(study_id, gene_ids, sample_ids, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Experimental,
    Control,
}

impl Group {
    pub fn from_token(token: &str) -> Option<Group> {
        match token.trim().to_ascii_lowercase().as_str() {
            "case" => Some(Group::Experimental),
            "control" => Some(Group::Control),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Group::Experimental => "case",
            Group::Control => "control",
        }
    }

    pub fn swapped(self) -> Group {
        match self {
            Group::Experimental => Group::Control,
            Group::Control => Group::Experimental,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Two-group assignment aligned with the sample order of one matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassLabels {
    sample_ids: Vec<String>,
    groups: Vec<Group>,
}

impl ClassLabels {
    /// Requires both groups to hold at least two samples.
    pub fn new(sample_ids: Vec<String>, groups: Vec<Group>) -> Result<Self> {
        if sample_ids.len() != groups.len() {
            return Err(GsemaError::Domain("label vector length mismatch".into()));
        }
        let labels = Self { sample_ids, groups };
        let (n_e, n_c) = labels.group_sizes();
        if n_e < 2 || n_c < 2 {
            return Err(GsemaError::DegenerateDesign(format!(
                "need at least 2 samples per group, got {n_e} case and {n_c} control"
            )));
        }
        Ok(labels)
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn get(&self, sample_id: &str) -> Option<Group> {
        self.sample_ids
            .iter()
            .position(|s| s == sample_id)
            .map(|i| self.groups[i])
    }

    /// `(n_experimental, n_control)`.
    pub fn group_sizes(&self) -> (usize, usize) {
        let n_e = self.groups.iter().filter(|g| **g == Group::Experimental).count();
        (n_e, self.groups.len() - n_e)
    }

    /// Same samples with every label flipped.
    pub fn swapped(&self) -> ClassLabels {
        ClassLabels {
            sample_ids: self.sample_ids.clone(),
            groups: self.groups.iter().map(|g| g.swapped()).collect(),
        }
    }

    /// Reassigns the label vector, keeping sample order. Group sizes must match.
    pub fn with_groups(&self, groups: Vec<Group>) -> Result<ClassLabels> {
        ClassLabels::new(self.sample_ids.clone(), groups)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "sample_id\tclass")?;
        for (s, g) in self.sample_ids.iter().zip(&self.groups) {
            writeln!(out, "{s}\t{g}")?;
        }
        Ok(())
    }
}

pub fn parse_labels(path: &Path, matrix: &ExpressionMatrix) -> Result<ClassLabels> {
    parse_labels_str(&read_to_string(path)?, matrix)
}

pub fn parse_labels_str(text: &str, matrix: &ExpressionMatrix) -> Result<ClassLabels> {
    let mut by_sample: HashMap<&str, Group> = HashMap::new();
    for (idx, (line_no, line)) in lines(text).enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(GsemaError::parse(line_no, 0, "expected sample_id<TAB>class"));
        }
        let sample = fields[0].trim();
        let Some(group) = Group::from_token(fields[1]) else {
            if idx == 0 && is_label_header(sample) {
                continue;
            }
            return Err(GsemaError::parse(
                line_no,
                2,
                format!("unknown class {:?} (expected case or control)", fields[1]),
            ));
        };
        if matrix.sample_ids().iter().all(|s| s != sample) {
            return Err(GsemaError::parse(line_no, 1, format!("sample {sample:?} is not in the expression matrix")));
        }
        if by_sample.insert(sample, group).is_some() {
            return Err(GsemaError::DuplicateSample(sample.to_string()));
        }
    }
    let mut groups = Vec::with_capacity(matrix.n_samples());
    for s in matrix.sample_ids() {
        match by_sample.get(s.as_str()) {
            Some(g) => groups.push(*g),
            None => return Err(GsemaError::MissingLabel(s.clone())),
        }
    }
    ClassLabels::new(matrix.sample_ids().to_vec(), groups)
}

fn is_label_header(first: &str) -> bool {
    matches!(first.to_ascii_lowercase().as_str(), "sample_id" | "sample" | "id")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneSet {
    pub name: String,
    pub description: String,
    /// Unique gene ids in first-seen order.
    pub genes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GeneSetCollection {
    sets: Vec<GeneSet>,
    /// Genes listed more than once within a set and dropped on parse.
    pub duplicates_removed: usize,
}

impl GeneSetCollection {
    pub fn new(sets: Vec<GeneSet>) -> Result<Self> {
        let mut names = HashSet::new();
        let mut duplicates_removed = 0;
        let mut clean = Vec::with_capacity(sets.len());
        for mut set in sets {
            if !names.insert(set.name.clone()) {
                return Err(GsemaError::DuplicateSet(set.name));
            }
            let before = set.genes.len();
            let mut seen = HashSet::new();
            set.genes.retain(|g| seen.insert(g.clone()));
            duplicates_removed += before - set.genes.len();
            if set.genes.is_empty() {
                return Err(GsemaError::EmptyInput(format!("gene set {:?} has no genes", set.name)));
            }
            clean.push(set);
        }
        Ok(Self {
            sets: clean,
            duplicates_removed,
        })
    }

    pub fn sets(&self) -> &[GeneSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&GeneSet> {
        self.sets.iter().find(|s| s.name == name)
    }

    pub fn write_gmt<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for set in &self.sets {
            write!(out, "{}\t{}", set.name, set.description)?;
            for g in &set.genes {
                write!(out, "\t{g}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn parse_gmt(path: &Path) -> Result<GeneSetCollection> {
    parse_gmt_str(&read_to_string(path)?)
}

pub fn parse_gmt_str(text: &str) -> Result<GeneSetCollection> {
    let mut sets = Vec::new();
    let mut names = HashSet::new();
    for (line_no, line) in lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(GsemaError::parse(line_no, 0, "GMT line needs name, description and at least one gene"));
        }
        let name = fields[0].trim().to_string();
        if !names.insert(name.clone()) {
            return Err(GsemaError::DuplicateSet(name));
        }
        let genes: Vec<String> = fields[2..]
            .iter()
            .map(|g| g.trim())
            .filter(|g| !g.is_empty())
            .map(str::to_string)
            .collect();
        if genes.is_empty() {
            return Err(GsemaError::parse(line_no, 3, format!("gene set {name:?} lists no genes")));
        }
        sets.push(GeneSet {
            name,
            description: fields[1].to_string(),
            genes,
        });
    }
    if sets.is_empty() {
        return Err(GsemaError::EmptyInput("GMT file has no gene sets".into()));
    }
    GeneSetCollection::new(sets)
}

/// One study: its expression matrix and matching class labels.
#[derive(Clone, Debug)]
pub struct Study {
    pub matrix: ExpressionMatrix,
    pub labels: ClassLabels,
}

impl Study {
    pub fn id(&self) -> &str {
        &self.matrix.study_id
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub study_id: String,
    pub expression_path: PathBuf,
    pub labels_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub entries: Vec<ManifestEntry>,
}

impl StudyManifest {
    /// Relative paths are resolved against `base_dir`.
    pub fn parse_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut ids = HashSet::new();
        for (idx, (line_no, line)) in lines(text).enumerate() {
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if idx == 0 && fields.first().is_some_and(|f| f.eq_ignore_ascii_case("study_id")) {
                continue;
            }
            if fields.len() < 3 {
                return Err(GsemaError::parse(line_no, 0, "expected study_id<TAB>expression_path<TAB>labels_path"));
            }
            if !ids.insert(fields[0].to_string()) {
                return Err(GsemaError::DuplicateStudy(fields[0].to_string()));
            }
            entries.push(ManifestEntry {
                study_id: fields[0].to_string(),
                expression_path: base_dir.join(fields[1]),
                labels_path: base_dir.join(fields[2]),
            });
        }
        if entries.is_empty() {
            return Err(GsemaError::EmptyInput("manifest lists no studies".into()));
        }
        Ok(Self { entries })
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "study_id\texpression_path\tlabels_path")?;
        for e in &self.entries {
            writeln!(
                out,
                "{}\t{}\t{}",
                e.study_id,
                e.expression_path.display(),
                e.labels_path.display()
            )?;
        }
        Ok(())
    }
}

/// Parses the manifest and every study it lists. Studies load in parallel;
/// the returned order follows the manifest.
pub fn load_manifest(path: &Path) -> Result<(StudyManifest, Vec<Study>)> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = StudyManifest::parse_str(&read_to_string(path)?, base)?;
    let studies = manifest
        .entries
        .par_iter()
        .map(|e| load_study(e).map_err(|err| err.in_study(&e.study_id)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, studies))
}

pub fn load_study(entry: &ManifestEntry) -> Result<Study> {
    let matrix = parse_expression_tsv(&entry.expression_path, &entry.study_id)?;
    let labels = parse_labels(&entry.labels_path, &matrix)?;
    Ok(Study { matrix, labels })
}
