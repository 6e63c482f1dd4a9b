use rayon::prelude::*;

use super::{assemble, drop_constant_rows, resolve_sets, PathwayScoreMatrix, SseConfig, SseMethod};
use crate::error::Result;
use crate::ingest::{ExpressionMatrix, GeneSetCollection};
use crate::stats;

/// Row-standardized expression summed over set members and divided by the
/// square root of the number of members measured.
pub fn score_zscore(
    matrix: &ExpressionMatrix,
    sets: &GeneSetCollection,
    cfg: &SseConfig,
) -> Result<PathwayScoreMatrix> {
    let (matrix, dropped_genes) = drop_constant_rows(matrix);
    let (resolved, dropped) = resolve_sets(&matrix, sets, cfg.min_set_size);

    let n = matrix.n_samples();
    let z: Vec<Vec<f64>> = (0..matrix.n_genes())
        .into_par_iter()
        .map(|g| {
            let row = matrix.row(g);
            let m = stats::mean(row);
            let sd = stats::sample_sd(row);
            row.iter().map(|x| (x - m) / sd).collect()
        })
        .collect();

    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            resolved
                .iter()
                .map(|set| {
                    let sum: f64 = set.rows.iter().map(|&g| z[g][j]).sum();
                    sum / (set.rows.len() as f64).sqrt()
                })
                .collect()
        })
        .collect();

    assemble(&matrix, SseMethod::ZScore, resolved, dropped, dropped_genes, columns)
}
