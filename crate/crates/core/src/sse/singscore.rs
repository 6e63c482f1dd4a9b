use rayon::prelude::*;

use super::{assemble, resolve_sets, PathwayScoreMatrix, SseConfig, SseMethod};
use crate::error::Result;
use crate::ingest::{ExpressionMatrix, GeneSetCollection};
use crate::stats;

/// Mean rank of the set's genes, rescaled between its theoretical minimum
/// and maximum and centred to `[-0.5, 0.5]`.
///
/// Undirected mode replaces each rank by its distance from the median rank
/// `(G+1)/2`; the bounds are then the means of the `s` smallest and `s`
/// largest attainable distances.
pub fn score_singscore(
    matrix: &ExpressionMatrix,
    sets: &GeneSetCollection,
    cfg: &SseConfig,
) -> Result<PathwayScoreMatrix> {
    let (mut resolved, mut dropped) = resolve_sets(matrix, sets, cfg.min_set_size);
    let g = matrix.n_genes();
    let centre = (g as f64 + 1.0) / 2.0;

    let bounds = |s: usize| -> (f64, f64) {
        let sf = s as f64;
        if cfg.singscore_directed {
            ((sf + 1.0) / 2.0, (2.0 * g as f64 - sf + 1.0) / 2.0)
        } else {
            let mut dist: Vec<f64> = (1..=g).map(|r| (r as f64 - centre).abs()).collect();
            dist.sort_by(f64::total_cmp);
            let low = dist[..s].iter().sum::<f64>() / sf;
            let high = dist[g - s..].iter().sum::<f64>() / sf;
            (low, high)
        }
    };

    // Undirected bounds can coincide for tiny G; those sets carry no information.
    let mut keep = Vec::with_capacity(resolved.len());
    let mut set_bounds = Vec::with_capacity(resolved.len());
    for set in resolved.drain(..) {
        let (low, high) = bounds(set.rows.len());
        if high > low {
            set_bounds.push((low, high));
            keep.push(set);
        } else {
            dropped.push(super::DroppedPathway {
                name: set.name,
                effective_size: set.rows.len(),
                reason: super::DropReason::CoversAllGenes,
            });
        }
    }
    let resolved = keep;

    let columns: Vec<Vec<f64>> = (0..matrix.n_samples())
        .into_par_iter()
        .map(|j| {
            let ranks = stats::ranks_asc(&matrix.column(j));
            resolved
                .iter()
                .zip(&set_bounds)
                .map(|(set, &(low, high))| {
                    let total: f64 = set
                        .rows
                        .iter()
                        .map(|&row| {
                            let r = ranks[row] as f64;
                            if cfg.singscore_directed {
                                r
                            } else {
                                (r - centre).abs()
                            }
                        })
                        .sum();
                    let mean_rank = total / set.rows.len() as f64;
                    (mean_rank - low) / (high - low) - 0.5
                })
                .collect()
        })
        .collect();

    assemble(matrix, SseMethod::Singscore, resolved, dropped, 0, columns)
}
