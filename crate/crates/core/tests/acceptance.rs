//! Acceptance suite. Every criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails. All oracles below are written from
//! the method definitions, not from the library's code paths.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::process::ExitCode;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use gsema_core::effects::{
    cohens_to_hedges, compute_study_effects, hedges_variance_corrected, hedges_variance_raw, t_to_cohens_d,
    EffectsConfig, GroupSummary,
};
use gsema_core::ingest::{parse_gmt_str, ClassLabels, ExpressionMatrix, GeneSetCollection, Group};
use gsema_core::meta::{bh_adjust, dl_tau2, fem_combine, rem_combine, write_results_tsv, Effect, MetaModel};
use gsema_core::pathmat::{apply_activity_filter, standardize_scores, FilterConfig};
use gsema_core::pipeline::{analyze, run_pipeline, score_studies, PipelineConfig};
use gsema_core::simharness::{run_permutation_suite, simulate_studies, SimConfig, SPIKED_SET_NAME};
use gsema_core::sse::{score_matrix, GsvaKernel, PathwayScoreMatrix, SseConfig, SseMethod};

// Criterion 1: positive control.
const C1_SEEDS: u64 = 100;
const C1_REQUIRED: usize = 95;
const C1_FDR: f64 = 0.05;
// Criterion 2: permutation false positives.
const C2_DATA_SEED: u64 = 1;
const C2_PERMUTATION_SEED: u64 = 2024;
const C2_ITERATIONS: usize = 100;
const C2_P: f64 = 0.05;
const C2_MAX_SPIKED_RATE: f64 = 0.05;
const C2_MAX_MEDIAN_FRACTION: f64 = 0.05;
// Criterion 3: equation oracles.
const C3A_TOL: f64 = 1e-12;
const C3B_DESIGNS: usize = 1000;
const C3B_TOL: f64 = 1e-12;
const C3C_TOL: f64 = 1e-10;
const C3D_VECTORS: usize = 100;
const C3D_MAX_LEN: usize = 1000;
// Criterion 4: SSE oracles.
const C4_TOL: f64 = 1e-9;
// Criterion 5: null calibration.
const C5_SEED: u64 = 5;
const C5_DECOYS: usize = 1200;
const C5_MIN_PATHWAYS: usize = 1000;
const C5_MAX_KS: f64 = 0.05;
// Criterion 6: invariants.
const C6_SEED: u64 = 6;
const C6_THRESHOLD: f64 = 0.3;
const C6_MIN_STUDIES: usize = 2;
const C6_BOUND_SLACK: f64 = 1e-12;

type Check = (bool, String);
type Criterion = (&'static str, &'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("1", "positive control, Zscore", || positive_control(SseMethod::ZScore)),
        ("1", "positive control, ssGSEA", || positive_control(SseMethod::SsGsea)),
        ("2", "permutation false positives, Zscore", || permutation_control(SseMethod::ZScore)),
        ("2", "permutation false positives, ssGSEA", || permutation_control(SseMethod::SsGsea)),
        ("3a", "hand-computed effect-size cases", hand_cases),
        ("3b", "ordinary t gives rescaled Cohen's d", ordinary_t_identity),
        ("3c", "DerSimonian-Laird worked example", dersimonian_laird),
        ("3d", "BH against brute-force step-up", bh_brute_force),
        ("4", "SSE methods against brute-force oracles", sse_oracles),
        ("5", "null p-value calibration", null_calibration),
        ("6", "invariant suite", invariants),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let (pass, detail) = run();
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id:<3} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn positive_control(method: SseMethod) -> Check {
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 1..=C1_SEEDS {
        let data = simulate_studies(&SimConfig {
            seed,
            ..SimConfig::default()
        })
        .expect("simulation");
        let cfg = PipelineConfig {
            sse: SseConfig::with_method(method),
            ..PipelineConfig::default()
        };
        let ok = match run_pipeline(&data.studies, &data.sets, &cfg) {
            Ok(out) => {
                let a = &out.analysis;
                a.rank_of(SPIKED_SET_NAME) == Some(1) && a.result(SPIKED_SET_NAME).is_some_and(|r| r.fdr < C1_FDR)
            }
            Err(_) => false,
        };
        if ok {
            hits += 1;
        } else {
            misses.push(seed);
        }
    }
    (
        hits >= C1_REQUIRED,
        format!("spiked set rank 1 with FDR < {C1_FDR} in {hits}/{C1_SEEDS} seeds (need {C1_REQUIRED}); misses {misses:?}"),
    )
}

fn permutation_control(method: SseMethod) -> Check {
    let data = simulate_studies(&SimConfig {
        seed: C2_DATA_SEED,
        ..SimConfig::default()
    })
    .expect("simulation");
    let cfg = PipelineConfig {
        sse: SseConfig::with_method(method),
        ..PipelineConfig::default()
    };
    let report = run_permutation_suite(
        &data.studies,
        &data.sets,
        &cfg,
        C2_ITERATIONS,
        C2_PERMUTATION_SEED,
        Some(SPIKED_SET_NAME),
        C2_P,
    )
    .expect("permutation suite");
    let spiked_rate = report.spiked_rate();
    let significant = report.significant_counts();
    let tested = report.tested_counts();
    let pass_a = spiked_rate <= C2_MAX_SPIKED_RATE && report.n_failed() == 0;
    let pass_b = significant.median <= C2_MAX_MEDIAN_FRACTION * tested.median;
    (
        pass_a && pass_b,
        format!(
            "(a) spiked p < {C2_P} in {:.0}% of iterations (max {:.0}%), {} failed; \
             (b) median significant {} vs {:.0}% of median tested {} (tested range {}..{})",
            100.0 * spiked_rate,
            100.0 * C2_MAX_SPIKED_RATE,
            report.n_failed(),
            significant.median,
            100.0 * C2_MAX_MEDIAN_FRACTION,
            tested.median,
            tested.min,
            tested.max
        ),
    )
}

struct Tally {
    checks: usize,
    worst: f64,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            checks: 0,
            worst: 0.0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.checks += 1;
        let err = (got - want).abs();
        self.worst = self.worst.max(err);
        if err.is_nan() || err > tol {
            self.failures.push(format!("{what}: got {got}, want {want}"));
        }
    }

    fn finish(self, summary: String) -> Check {
        let pass = self.failures.is_empty();
        let detail = if pass {
            format!("{summary}; {} checks, max abs error {:.1e}", self.checks, self.worst)
        } else {
            format!("{summary}; {}", self.failures.join("; "))
        };
        (pass, detail)
    }
}

fn hand_cases() -> Check {
    let mut t = Tally::new();
    let tol = C3A_TOL;

    let d = t_to_cohens_d(2.0, 50, 50, 98.0).unwrap();
    t.check("d(t=2, 50/50, df 98)", d, 100.0 * 2.0 / (50.0 * 98f64.sqrt()), tol);
    t.check("d(t=2, 50/50, df 98) decimal", d, 0.404061017820884, tol);
    t.check("d(t=0)", t_to_cohens_d(0.0, 7, 9, 14.0).unwrap(), 0.0, 0.0);

    let (_, j) = cohens_to_hedges(d, 50, 50).unwrap();
    t.check("J(50, 50)", j, 1.0 - 3.0 / 391.0, tol);
    t.check("g(d=0)", cohens_to_hedges(0.0, 3, 11).unwrap().0, 0.0, 0.0);

    // xE = [2, 4], xC = [1, 3]: pooled SD √2, d = 1/√2, J = 4/7
    let groups = [Group::Experimental, Group::Experimental, Group::Control, Group::Control];
    let d2 = GroupSummary::from_scores(&[2.0, 4.0, 1.0, 3.0], &groups).unwrap().cohens_d();
    t.check("d(xE=[2,4], xC=[1,3])", d2, 0.5f64.sqrt(), tol);
    let (g2, j2) = cohens_to_hedges(d2, 2, 2).unwrap();
    t.check("J(2, 2)", j2, 4.0 / 7.0, tol);
    t.check("g(2, 2)", g2, 4.0 / 7.0 * 0.5f64.sqrt(), tol);
    t.check("V_g(2, 2)", hedges_variance_raw(d2, j2, 2, 2), 16.0 / 49.0 * (1.0 + 0.5 / 8.0), tol);
    t.check("V_g(2, 2) decimal", hedges_variance_raw(d2, j2, 2, 2), 0.346938775510204, tol);
    t.check("V_g(d=0, J=1, 8/8)", hedges_variance_raw(0.0, 1.0, 8, 8), 2.0 / 8.0, tol);

    t.check("corrected V(ḡ=0.5, 50/50)", hedges_variance_corrected(0.5, 50, 50), 0.04125, tol);
    t.check("corrected V(ḡ=0, 6/9)", hedges_variance_corrected(0.0, 6, 9), 1.0 / 6.0 + 1.0 / 9.0, 0.0);

    let (ces, var) = fem_combine(&[Effect { g: 0.5, v: 0.1 }, Effect { g: 0.5, v: 0.1 }]).unwrap();
    t.check("FEM ces, equal effects", ces, 0.5, tol);
    t.check("FEM var, equal effects", var, 0.05, tol);
    let (ces, _) = fem_combine(&[Effect { g: 0.0, v: 0.1 }, Effect { g: 1.0, v: 0.1 }]).unwrap();
    t.check("FEM ces, g=[0,1]", ces, 0.5, tol);

    t.finish("Cohen's d, J, Hedges' g, raw and corrected variance, FEM".into())
}

fn ordinary_t_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut t = Tally::new();
    let cfg = EffectsConfig {
        ordinary_t: true,
        design_df: false,
    };
    for design in 0..C3B_DESIGNS {
        let n_e = rng.random_range(2..=25);
        let n_c = rng.random_range(2..=25);
        let n = n_e + n_c;
        let n_pathways = rng.random_range(1..=4);
        let mut scores = Vec::with_capacity(n_pathways * n);
        for _ in 0..n_pathways {
            let shift: f64 = rng.random_range(-2.0..2.0);
            let scale: f64 = rng.random_range(0.1..3.0);
            for j in 0..n {
                let noise: f64 = rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0);
                scores.push(scale * noise + if j < n_e { shift } else { 0.0 });
            }
        }
        let matrix = score_matrix_from(scores.clone(), n_pathways, n);
        let labels = case_control_labels(n_e, n_c);
        let (_, effects) = compute_study_effects(&matrix, &labels, &cfg).expect("effects");
        for (p, e) in effects.iter().enumerate() {
            let row = &scores[p * n..(p + 1) * n];
            let oracle = direct_cohens_d(&row[..n_e], &row[n_e..]) * (n as f64 / (n as f64 - 2.0)).sqrt();
            t.check(&format!("design {design} pathway {p}"), e.d, oracle, C3B_TOL);
        }
    }
    t.finish(format!("{C3B_DESIGNS} random designs"))
}

fn dersimonian_laird() -> Check {
    let mut t = Tally::new();
    let tol = C3C_TOL;
    let effects = [Effect { g: 0.0, v: 0.1 }, Effect { g: 1.0, v: 0.1 }];
    let (fem, _) = fem_combine(&effects).unwrap();
    let h = dl_tau2(&effects, fem).unwrap();
    t.check("Q", h.q, 5.0, tol);
    t.check("C", h.c, 20.0 - 200.0 / 20.0, tol);
    t.check("tau2", h.tau2, 0.4, tol);
    let r = rem_combine(&effects, h.tau2).unwrap();
    t.check("ces*", r.ces, 0.5, tol);
    t.check("var*", r.var, 0.25, tol);
    t.check("z", r.z, 1.0, tol);
    // 2(1 - Φ(1))
    t.check("p", r.p, 0.3173105078629141, tol);
    t.finish("g=[0,1], v=[0.1,0.1]".into())
}

/// Step-up BH by definition: adj_i = min over p_j ≥ p_i of m p_j / R_j,
/// with R_j the number of p-values ≤ p_j, capped at 1.
fn bh_oracle(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let rank: Vec<usize> = p.iter().map(|&pj| p.iter().filter(|&&pl| pl <= pj).count()).collect();
    p.iter()
        .map(|&pi| {
            let mut best = 1.0f64;
            for (j, &pj) in p.iter().enumerate() {
                if pj >= pi {
                    best = best.min(m as f64 * pj / rank[j] as f64);
                }
            }
            best
        })
        .collect()
}

fn bh_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let mut total = 0;
    for v in 0..C3D_VECTORS {
        let len = if v == 0 { C3D_MAX_LEN } else { rng.random_range(1..=C3D_MAX_LEN) };
        let p: Vec<f64> = (0..len)
            .map(|_| match rng.random_range(0..10) {
                // exact ties, zeros and ones alongside continuous values
                0 => (rng.random_range(0..20) as f64) / 20.0,
                1 => 1.0,
                2 => rng.random_range(0.0..1e-6),
                _ => rng.random_range(0.0..1.0),
            })
            .collect();
        let got = bh_adjust(&p).expect("valid p-values");
        let want = bh_oracle(&p);
        total += len;
        mismatches += got.iter().zip(&want).filter(|(a, b)| a != b).count();
    }
    (
        mismatches == 0,
        format!("{C3D_VECTORS} vectors, {total} p-values, {mismatches} not bit-identical"),
    )
}

// ---------------------------------------------------------------- criterion 4

const TOY_GENES: usize = 5;
const TOY_SAMPLES: usize = 4;

/// Gene-major 5 × 4 toy with ties in value and in absolute value.
const TOY: [[f64; TOY_SAMPLES]; TOY_GENES] = [
    [2.1, -0.3, 1.0, 4.2],
    [-1.5, 0.8, 1.0, -2.0],
    [0.4, 1.9, -3.1, 0.6],
    [1.5, -0.3, 2.2, 1.1],
    [-0.7, 2.5, 0.1, -1.4],
];

/// Nonnegative integer toy for the Poisson kernel.
const TOY_COUNTS: [[f64; TOY_SAMPLES]; TOY_GENES] = [
    [3.0, 0.0, 5.0, 2.0],
    [7.0, 7.0, 1.0, 4.0],
    [0.0, 2.0, 2.0, 9.0],
    [4.0, 6.0, 3.0, 3.0],
    [1.0, 8.0, 0.0, 5.0],
];

const TOY_SETS: [&[usize]; 2] = [&[0, 2], &[1, 3, 4]];

fn toy_matrix(values: &[[f64; TOY_SAMPLES]; TOY_GENES]) -> ExpressionMatrix {
    ExpressionMatrix::new(
        "toy",
        (0..TOY_GENES).map(|i| format!("g{}", i + 1)).collect(),
        (0..TOY_SAMPLES).map(|j| format!("s{}", j + 1)).collect(),
        values.iter().flatten().copied().collect(),
    )
    .unwrap()
}

fn toy_sets() -> GeneSetCollection {
    let gmt: String = TOY_SETS
        .iter()
        .enumerate()
        .map(|(k, genes)| {
            let members: Vec<String> = genes.iter().map(|g| format!("g{}", g + 1)).collect();
            format!("S{}\ttoy\t{}\n", k + 1, members.join("\t"))
        })
        .collect();
    parse_gmt_str(&gmt).unwrap()
}

fn column(values: &[[f64; TOY_SAMPLES]; TOY_GENES], j: usize) -> Vec<f64> {
    values.iter().map(|row| row[j]).collect()
}

fn oracle_zscore(values: &[[f64; TOY_SAMPLES]; TOY_GENES], set: &[usize], j: usize) -> f64 {
    let z = |i: usize| {
        let row = &values[i];
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let sd = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (row[j] - mean) / sd
    };
    set.iter().map(|&i| z(i)).sum::<f64>() / (set.len() as f64).sqrt()
}

/// Position of each gene when sorted by `key` decreasing, ties by index.
fn positions_desc(key: &[f64]) -> Vec<usize> {
    (0..key.len())
        .map(|i| {
            (0..key.len())
                .filter(|&k| key[k] > key[i] || (key[k] == key[i] && k < i))
                .count()
        })
        .collect()
}

fn oracle_ssgsea(values: &[[f64; TOY_SAMPLES]; TOY_GENES], set: &[usize], j: usize, alpha: f64) -> f64 {
    let abs: Vec<f64> = column(values, j).iter().map(|v| v.abs()).collect();
    let g = abs.len();
    let pos = positions_desc(&abs);
    // walk position q holds the gene whose pos == q; its rank weight is G - q
    let gene_at: Vec<usize> = (0..g).map(|q| pos.iter().position(|&p| p == q).unwrap()).collect();
    let weight = |gene: usize| ((g - pos[gene]) as f64).powf(alpha);
    let total: f64 = set.iter().map(|&i| weight(i)).sum();
    let mut score = 0.0;
    for q in 0..g {
        let ecdf_in: f64 = gene_at[..=q]
            .iter()
            .filter(|i| set.contains(i))
            .map(|&i| weight(i))
            .sum::<f64>()
            / total;
        let ecdf_out = gene_at[..=q].iter().filter(|i| !set.contains(i)).count() as f64 / (g - set.len()) as f64;
        score += ecdf_in - ecdf_out;
    }
    score
}

fn poisson_cdf_by_sum(k: f64, rate: f64) -> f64 {
    let mut term = (-rate).exp();
    let mut acc = term;
    for i in 1..=(k as u64) {
        term *= rate / i as f64;
        acc += term;
    }
    acc
}

fn oracle_gsva(
    values: &[[f64; TOY_SAMPLES]; TOY_GENES],
    set: &[usize],
    j: usize,
    kernel: GsvaKernel,
    max_diff: bool,
) -> f64 {
    let phi = Normal::standard();
    let cdf_at = |i: usize, x: f64| -> f64 {
        let row = &values[i];
        let n = row.len() as f64;
        match kernel {
            GsvaKernel::Gaussian => {
                let mean = row.iter().sum::<f64>() / n;
                let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                let h = 0.25 * sd;
                row.iter().map(|m| phi.cdf((x - m) / h)).sum::<f64>() / n
            }
            GsvaKernel::Poisson => row.iter().map(|m| poisson_cdf_by_sum(x, m + 0.5)).sum::<f64>() / n,
        }
    };
    let z: Vec<f64> = (0..TOY_GENES).map(|i| cdf_at(i, values[i][j])).collect();
    let g = TOY_GENES;
    let pos = positions_desc(&z);
    let gene_at: Vec<usize> = (0..g).map(|q| pos.iter().position(|&p| p == q).unwrap()).collect();
    let weight = |gene: usize| ((g - pos[gene]) as f64 - g as f64 / 2.0).abs();
    let total: f64 = set.iter().map(|&i| weight(i)).sum();
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for q in 0..g {
        let ecdf_in: f64 = gene_at[..=q]
            .iter()
            .filter(|i| set.contains(i))
            .map(|&i| weight(i))
            .sum::<f64>()
            / total;
        let ecdf_out = gene_at[..=q].iter().filter(|i| !set.contains(i)).count() as f64 / (g - set.len()) as f64;
        hi = hi.max(ecdf_in - ecdf_out);
        lo = lo.min(ecdf_in - ecdf_out);
    }
    if max_diff {
        hi + lo
    } else if hi > -lo {
        hi
    } else {
        lo
    }
}

fn oracle_singscore(values: &[[f64; TOY_SAMPLES]; TOY_GENES], set: &[usize], j: usize, directed: bool) -> f64 {
    let col = column(values, j);
    let g = col.len();
    // ascending rank, ties by index: lower index gets the lower rank
    let rank = |i: usize| (0..g).filter(|&k| col[k] < col[i] || (col[k] == col[i] && k <= i)).count() as f64;
    let centre = (g as f64 + 1.0) / 2.0;
    let stat = |r: f64| if directed { r } else { (r - centre).abs() };
    let observed = set.iter().map(|&i| stat(rank(i))).sum::<f64>() / set.len() as f64;
    // theoretical extremes by enumerating every rank subset of the set's size
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for mask in 0u32..(1 << g) {
        if mask.count_ones() as usize != set.len() {
            continue;
        }
        let mean = (0..g)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| stat((b + 1) as f64))
            .sum::<f64>()
            / set.len() as f64;
        lo = lo.min(mean);
        hi = hi.max(mean);
    }
    (observed - lo) / (hi - lo) - 0.5
}

fn sse_oracles() -> Check {
    let mut t = Tally::new();
    let base = SseConfig {
        min_set_size: 1,
        ..SseConfig::default()
    };
    let variants: Vec<(&str, SseConfig, &[[f64; TOY_SAMPLES]; TOY_GENES])> = vec![
        ("zscore", SseConfig { method: SseMethod::ZScore, ..base.clone() }, &TOY),
        ("ssgsea", SseConfig { method: SseMethod::SsGsea, ..base.clone() }, &TOY),
        ("gsva gaussian max-diff", SseConfig { method: SseMethod::Gsva, ..base.clone() }, &TOY),
        (
            "gsva gaussian max-deviation",
            SseConfig {
                method: SseMethod::Gsva,
                gsva_max_diff: false,
                ..base.clone()
            },
            &TOY,
        ),
        (
            "gsva poisson",
            SseConfig {
                method: SseMethod::Gsva,
                gsva_kernel: GsvaKernel::Poisson,
                ..base.clone()
            },
            &TOY_COUNTS,
        ),
        ("singscore directed", SseConfig { method: SseMethod::Singscore, ..base.clone() }, &TOY),
        (
            "singscore undirected",
            SseConfig {
                method: SseMethod::Singscore,
                singscore_directed: false,
                ..base.clone()
            },
            &TOY,
        ),
    ];
    let sets = toy_sets();
    let mut compared = 0;
    for (name, cfg, values) in &variants {
        let scores = score_matrix(&toy_matrix(values), &sets, cfg).expect("toy scoring");
        if scores.n_pathways() != TOY_SETS.len() {
            t.failures.push(format!("{name}: {} pathways scored", scores.n_pathways()));
            continue;
        }
        for (p, set) in TOY_SETS.iter().enumerate() {
            for j in 0..TOY_SAMPLES {
                let want = match cfg.method {
                    SseMethod::ZScore => oracle_zscore(values, set, j),
                    SseMethod::SsGsea => oracle_ssgsea(values, set, j, cfg.ssgsea_weight_exponent),
                    SseMethod::Gsva => oracle_gsva(values, set, j, cfg.gsva_kernel, cfg.gsva_max_diff),
                    SseMethod::Singscore => oracle_singscore(values, set, j, cfg.singscore_directed),
                };
                t.check(&format!("{name} S{} s{}", p + 1, j + 1), scores.get(p, j), want, C4_TOL);
                compared += 1;
            }
        }
    }
    t.finish(format!("{} variants, {compared} scores", variants.len()))
}

// ---------------------------------------------------------------- criterion 5

fn null_calibration() -> Check {
    let data = simulate_studies(&SimConfig {
        de_fraction: 0.0,
        spiked_set_size: 0,
        n_decoy_sets: C5_DECOYS,
        seed: C5_SEED,
        ..SimConfig::default()
    })
    .expect("simulation");
    // Threshold 0 keeps every pathway; at 0.65 almost no null pathway survives.
    let cfg = PipelineConfig {
        filter: FilterConfig {
            activity_threshold: 0.0,
            ..FilterConfig::default()
        },
        effects: EffectsConfig {
            ordinary_t: true,
            design_df: false,
        },
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&data.studies, &data.sets, &cfg).expect("pipeline");
    let mut p: Vec<f64> = out.analysis.results.iter().map(|r| r.p).collect();
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    (
        p.len() >= C5_MIN_PATHWAYS && ks < C5_MAX_KS,
        format!(
            "KS distance {ks:.4} (max {C5_MAX_KS}) over {} pathways (need {C5_MIN_PATHWAYS})",
            p.len()
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn invariants() -> Check {
    let data = simulate_studies(&SimConfig {
        seed: C6_SEED,
        ..SimConfig::default()
    })
    .expect("simulation");
    let cfg = PipelineConfig {
        filter: FilterConfig {
            activity_threshold: C6_THRESHOLD,
            min_studies: Some(C6_MIN_STUDIES),
            ..FilterConfig::default()
        },
        ..PipelineConfig::default()
    };
    let mut failures = Vec::new();
    let scored = score_studies(&data.studies, &data.sets, &cfg).expect("scoring");
    let labels: Vec<&ClassLabels> = data.studies.iter().map(|s| &s.labels).collect();
    let rem = analyze(&scored, &labels, &cfg).expect("analysis");
    let n_results = rem.results.len();

    // antisymmetry under label swap
    let swapped: Vec<ClassLabels> = data.studies.iter().map(|s| s.labels.swapped()).collect();
    let swapped_refs: Vec<&ClassLabels> = swapped.iter().collect();
    let flipped = analyze(&scored, &swapped_refs, &cfg).expect("swapped analysis");
    let antisymmetric = flipped.results.len() == n_results
        && rem.results.iter().all(|r| {
            flipped
                .result(&r.pathway)
                .is_some_and(|f| f.ces == -r.ces && f.p == r.p && f.tau2 == r.tau2)
        });
    if !antisymmetric {
        failures.push("label swap does not negate CES exactly".to_string());
    }

    // tau2 ≥ 0 and CES inside the range of its study effects
    if let Some(r) = rem.results.iter().find(|r| r.tau2 < 0.0) {
        failures.push(format!("negative tau2 for {}", r.pathway));
    }
    for r in &rem.results {
        let lo = r.studies.iter().map(|s| s.g).fold(f64::INFINITY, f64::min);
        let hi = r.studies.iter().map(|s| s.g).fold(f64::NEG_INFINITY, f64::max);
        if r.ces < lo - C6_BOUND_SLACK || r.ces > hi + C6_BOUND_SLACK {
            failures.push(format!("CES of {} outside [{lo}, {hi}]", r.pathway));
        }
    }

    // var_REM ≥ var_FEM
    let mut fem_cfg = cfg.clone();
    fem_cfg.meta.model = MetaModel::Fem;
    let fem = analyze(&scored, &labels, &fem_cfg).expect("FEM analysis");
    for r in &rem.results {
        match fem.result(&r.pathway) {
            Some(f) if r.var_ces >= f.var_ces * (1.0 - 1e-15) => {}
            _ => failures.push(format!("var_REM < var_FEM for {}", r.pathway)),
        }
    }

    // filter monotonicity in the threshold
    let thresholds = [0.0, 0.1, 0.3, 0.5, 0.65, 0.8, 1.0, 2.0];
    for (s, study) in scored.iter().zip(&data.studies) {
        let kept: Vec<BTreeSet<String>> = thresholds
            .iter()
            .map(|&th| {
                apply_activity_filter(&s.standardized, &study.labels, th)
                    .0
                    .pathway_names
                    .into_iter()
                    .collect()
            })
            .collect();
        if kept.windows(2).any(|w| !w[1].is_subset(&w[0])) {
            failures.push(format!("filter not monotone in {}", study.id()));
        }
    }

    // determinism across thread counts
    let checksum = |threads: usize| -> u64 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let out = run_pipeline(&data.studies, &data.sets, &cfg).expect("pipeline");
            let mut bytes = Vec::new();
            write_results_tsv(&out.analysis.results, &mut bytes).unwrap();
            for s in &out.scored {
                s.standardized.write_tsv(&mut bytes).unwrap();
            }
            let report = run_permutation_suite(&data.studies, &data.sets, &cfg, 20, 9, Some(SPIKED_SET_NAME), 0.05)
                .expect("permutations");
            report.write_tsv(&mut bytes).unwrap();
            let mut h = DefaultHasher::new();
            bytes.hash(&mut h);
            h.finish()
        })
    };
    let (one, four) = (checksum(1), checksum(4));
    if one != four {
        failures.push(format!("checksum {one:016x} with 1 thread vs {four:016x} with 4"));
    }

    let standardized_ok = scored.iter().all(|s| {
        let again = standardize_scores(&s.standardized, &cfg.filter).unwrap();
        again.scores.iter().zip(&s.standardized.scores).all(|(a, b)| (a - b).abs() < 1e-12)
    });
    if !standardized_ok {
        failures.push("standardization not idempotent".into());
    }

    let summary = format!(
        "{n_results} pathways: label-swap antisymmetry, tau2 >= 0, CES bounds, var_REM >= var_FEM, \
         filter monotonicity over {} thresholds, standardization idempotence, checksum {one:016x} at 1 and 4 threads",
        thresholds.len()
    );
    if failures.is_empty() {
        (n_results > 1, summary)
    } else {
        (false, format!("{summary}; {}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------- helpers

fn score_matrix_from(scores: Vec<f64>, n_pathways: usize, n_samples: usize) -> PathwayScoreMatrix {
    PathwayScoreMatrix {
        study_id: "design".into(),
        method: SseMethod::ZScore,
        pathway_names: (0..n_pathways).map(|p| format!("P{p}")).collect(),
        sample_ids: (0..n_samples).map(|j| format!("s{j}")).collect(),
        scores,
        effective_set_sizes: vec![10; n_pathways],
        dropped_pathways: Vec::new(),
        dropped_genes: 0,
    }
}

fn case_control_labels(n_e: usize, n_c: usize) -> ClassLabels {
    ClassLabels::new(
        (0..n_e + n_c).map(|j| format!("s{j}")).collect(),
        (0..n_e + n_c)
            .map(|j| if j < n_e { Group::Experimental } else { Group::Control })
            .collect(),
    )
    .unwrap()
}

/// (mean_E − mean_C) / pooled SD, written out longhand.
fn direct_cohens_d(case: &[f64], control: &[f64]) -> f64 {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ss = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
    };
    let pooled = ((ss(case) + ss(control)) / (case.len() + control.len() - 2) as f64).sqrt();
    (mean(case) - mean(control)) / pooled
}
