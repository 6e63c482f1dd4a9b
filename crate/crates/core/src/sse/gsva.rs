use rayon::prelude::*;

use super::{assemble, drop_constant_rows, resolve_sets, GsvaKernel, PathwayScoreMatrix, SseConfig, SseMethod};
use crate::error::{GsemaError, Result};
use crate::ingest::{ExpressionMatrix, GeneSetCollection};
use crate::special::{normal_cdf, poisson_cdf};
use crate::stats;

/// Gaussian-kernel CDF estimate of `row` evaluated at `x`.
pub fn kernel_cdf_gaussian(row: &[f64], bandwidth: f64, x: f64) -> f64 {
    row.iter().map(|m| normal_cdf((x - m) / bandwidth)).sum::<f64>() / row.len() as f64
}

/// Poisson-kernel CDF estimate: each observation contributes a Poisson CDF
/// with rate `observation + 0.5`.
pub fn kernel_cdf_poisson(row: &[f64], x: f64) -> f64 {
    row.iter().map(|m| poisson_cdf(x, m + 0.5)).sum::<f64>() / row.len() as f64
}

/// GSVA in three steps: per-gene kernel CDF of every value, per-sample
/// symmetric rank weights `|r - G/2|`, then a weighted running-sum statistic
/// per set over genes ordered by decreasing CDF value.
pub fn score_gsva(
    matrix: &ExpressionMatrix,
    sets: &GeneSetCollection,
    cfg: &SseConfig,
) -> Result<PathwayScoreMatrix> {
    let (matrix, dropped_genes) = match cfg.gsva_kernel {
        GsvaKernel::Gaussian => drop_constant_rows(matrix),
        GsvaKernel::Poisson => {
            if let Some(v) = matrix.values().iter().find(|v| **v < 0.0 || v.fract() != 0.0) {
                return Err(GsemaError::InvalidKernel(format!(
                    "Poisson kernel needs nonnegative integer counts, found {v}"
                )));
            }
            (matrix.clone(), 0)
        }
    };
    let (resolved, dropped) = resolve_sets(&matrix, sets, cfg.min_set_size);

    let n = matrix.n_samples();
    let cdf: Vec<Vec<f64>> = (0..matrix.n_genes())
        .into_par_iter()
        .map(|g| {
            let row = matrix.row(g);
            match cfg.gsva_kernel {
                GsvaKernel::Gaussian => {
                    let h = cfg.gsva_bandwidth_factor * stats::sample_sd(row);
                    row.iter().map(|&x| kernel_cdf_gaussian(row, h, x)).collect()
                }
                GsvaKernel::Poisson => row.iter().map(|&x| kernel_cdf_poisson(row, x)).collect(),
            }
        })
        .collect();

    let n_genes = matrix.n_genes();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = cdf.iter().map(|row| row[j]).collect();
            let order = stats::order_desc(&column);
            let mut position = vec![0usize; n_genes];
            for (q, &gene) in order.iter().enumerate() {
                position[gene] = q;
            }
            resolved
                .iter()
                .map(|set| running_sum_score(&position, &set.rows, n_genes, cfg.gsva_max_diff))
                .collect()
        })
        .collect();

    assemble(&matrix, SseMethod::Gsva, resolved, dropped, dropped_genes, columns)
}

/// Extremes of the running sum, visiting only the set's positions: the walk
/// rises only at set members and falls linearly between them, so the
/// maximum sits right after a member and the minimum right before one.
fn running_sum_score(position: &[usize], rows: &[usize], n_genes: usize, max_diff: bool) -> f64 {
    let g = n_genes as f64;
    let half = g / 2.0;
    let mut hits: Vec<(usize, f64)> = rows
        .iter()
        .map(|&row| {
            let q = position[row];
            let rank = (n_genes - q) as f64;
            (q, (rank - half).abs())
        })
        .collect();
    hits.sort_by_key(|h| h.0);
    let total: f64 = hits.iter().map(|h| h.1).sum();
    let step_out = 1.0 / (g - hits.len() as f64);
    let step_in = |w: f64| if total > 0.0 { w / total } else { 0.0 };

    let mut max_pos: f64 = 0.0;
    let mut max_neg: f64 = 0.0;
    let mut cum = 0.0;
    for (k, &(q, w)) in hits.iter().enumerate() {
        let misses_before = (q - k) as f64;
        max_neg = max_neg.min(cum - misses_before * step_out);
        cum += step_in(w);
        max_pos = max_pos.max(cum - misses_before * step_out);
    }
    max_neg = max_neg.min(cum - (g - hits.len() as f64) * step_out);

    if max_diff {
        max_pos + max_neg
    } else if max_pos > max_neg.abs() {
        max_pos
    } else {
        max_neg
    }
}
