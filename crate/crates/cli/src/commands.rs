use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufReader, Write};

use anyhow::{Context, Result};
use serde_json::json;

use gsema_core::effects::{read_effects_tsv, write_effects_tsv};
use gsema_core::error::GsemaError;
use gsema_core::ingest::{load_manifest, parse_expression_tsv, parse_gmt};
use gsema_core::meta::{group_by_pathway, run_meta, write_results_tsv};
use gsema_core::pathmat::{standardize_scores, write_filter_report, FilterConfig};
use gsema_core::pipeline::{analyze, score_studies};
use gsema_core::simharness::{
    run_permutation_suite, simulate_studies, write_simulation, IterationStatus, SPIKED_SET_NAME,
};
use gsema_core::sse::score_matrix;

use crate::args::{meta_config, MetaArgs, PermuteArgs, RunArgs, ScoreArgs, SimulateArgs};
use crate::output::{create_dir, write_file, write_json, Stopwatch};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn run(args: &RunArgs, threads: usize) -> Result<()> {
    let cfg = args.analysis.config();
    let mut clock = Stopwatch::start();

    let (manifest, studies) = load_manifest(&args.manifest)?;
    let sets = parse_gmt(&args.gmt)?;
    clock.lap("load");
    cfg.validate(studies.len())?;
    eprintln!(
        "loaded {} studies and {} gene sets; scoring with {}",
        studies.len(),
        sets.len(),
        cfg.sse.method
    );

    let scored = score_studies(&studies, &sets, &cfg)?;
    clock.lap("score");
    let labels: Vec<_> = studies.iter().map(|s| &s.labels).collect();
    let analysis = analyze(&scored, &labels, &cfg)?;
    clock.lap("analyze");

    create_dir(&args.out)?;
    let mut outputs = vec!["results.tsv".to_string(), "filter_report.tsv".to_string()];
    write_file(&args.out.join("results.tsv"), |w| write_results_tsv(&analysis.results, w))?;
    let records: Vec<_> = analysis.filter_records().cloned().collect();
    write_file(&args.out.join("filter_report.tsv"), |w| write_filter_report(&records, w))?;
    for (study, effects) in analysis.studies.iter().zip(analysis.effects_with_corrected_variance()) {
        let name = format!("effects_{}.tsv", study.study_id);
        write_file(&args.out.join(&name), |w| write_effects_tsv(&effects, w))?;
        outputs.push(name);
    }
    if args.scores_out {
        for s in &scored {
            let name = format!("scores_{}.tsv", s.standardized.study_id);
            write_file(&args.out.join(&name), |w| s.standardized.write_tsv(w))?;
            outputs.push(name);
        }
    }
    clock.lap("write");

    let significant = analysis.results.iter().filter(|r| r.is_significant(cfg.meta.alpha)).count();
    let study_meta: Vec<_> = studies
        .iter()
        .zip(&manifest.entries)
        .zip(&scored)
        .zip(&analysis.studies)
        .map(|(((study, entry), scores), a)| {
            let (n_case, n_control) = study.labels.group_sizes();
            json!({
                "study_id": study.id(),
                "expression": entry.expression_path.display().to_string(),
                "labels": entry.labels_path.display().to_string(),
                "genes": study.matrix.n_genes(),
                "n_case": n_case,
                "n_control": n_control,
                "pathways_scored": scores.raw.n_pathways(),
                "pathways_kept": a.filtered.n_pathways(),
                "constant_genes_dropped": scores.raw.dropped_genes,
                "prior_df": a.fit.as_ref().map(|f| f.prior.df),
                "prior_var": a.fit.as_ref().map(|f| f.prior.var),
                "prior_infinite": a.fit.as_ref().map(|f| f.prior.infinite),
                "df_total": a.fit.as_ref().map(|f| f.df_total),
            })
        })
        .collect();
    outputs.push("run_metadata.json".into());
    outputs.push("timings.json".into());
    write_json(
        &args.out.join("run_metadata.json"),
        &json!({
            "command": "run",
            "version": VERSION,
            "seed": args.seed,
            "manifest": args.manifest.display().to_string(),
            "gmt": args.gmt.display().to_string(),
            "gene_sets": sets.len(),
            "duplicate_set_genes_removed": sets.duplicates_removed,
            "config": cfg,
            "studies": study_meta,
            "pathways_tested": analysis.results.len(),
            "pathways_significant": significant,
            "outputs": outputs,
        }),
    )?;
    write_json(&args.out.join("timings.json"), &clock.report(threads))?;

    eprintln!(
        "{} pathways tested, {} with FDR < {}; top: {}",
        analysis.results.len(),
        significant,
        cfg.meta.alpha,
        analysis.results.first().map_or("-", |r| r.pathway.as_str())
    );
    Ok(())
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let cfg = args.sse.config();
    cfg.validate()?;
    let study_id = match &args.study_id {
        Some(id) => id.clone(),
        None => args
            .expression
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "study".into()),
    };
    let matrix = parse_expression_tsv(&args.expression, &study_id)?;
    let sets = parse_gmt(&args.gmt)?;
    let mut scores = score_matrix(&matrix, &sets, &cfg).map_err(|e| e.in_study(&study_id))?;
    if args.standardize {
        scores = standardize_scores(&scores, &FilterConfig::default())?;
    }
    eprintln!(
        "{}: {} pathways scored, {} dropped",
        study_id,
        scores.n_pathways(),
        scores.dropped_pathways.len()
    );
    match &args.out {
        Some(path) => write_file(path, |w| scores.write_tsv(w)),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            scores.write_tsv(&mut lock).and_then(|_| lock.flush())?;
            Ok(())
        }
    }
}

pub fn meta(args: &MetaArgs) -> Result<()> {
    let cfg = meta_config(args.model, args.alpha);
    cfg.validate()?;
    let mut effects = Vec::new();
    for path in &args.effects {
        let file = fs::File::open(path).map_err(|e| GsemaError::io(path, e))?;
        let table = read_effects_tsv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
        effects.extend(table);
    }
    let mut seen = BTreeSet::new();
    for e in &effects {
        if !seen.insert((e.study_id.as_str(), e.pathway.as_str())) {
            return Err(GsemaError::DuplicateStudy(format!("{} (pathway {})", e.study_id, e.pathway)).into());
        }
    }
    let study_ids: BTreeSet<&str> = effects.iter().map(|e| e.study_id.as_str()).collect();
    let k = study_ids.len();
    let min_studies = args.min_studies.unwrap_or(k);
    if min_studies < 1 || min_studies > k {
        return Err(GsemaError::Config(format!("min_studies must lie in 1..={k}, got {min_studies}")).into());
    }
    let grouped = group_by_pathway(&effects, min_studies);
    if grouped.is_empty() {
        return Err(GsemaError::NoPathways(format!("no pathway appears in {min_studies} studies")).into());
    }
    let results = run_meta(&grouped, &cfg)?;

    create_dir(&args.out)?;
    write_file(&args.out.join("results.tsv"), |w| write_results_tsv(&results, w))?;
    let significant = results.iter().filter(|r| r.is_significant(cfg.alpha)).count();
    write_json(
        &args.out.join("run_metadata.json"),
        &json!({
            "command": "meta",
            "version": VERSION,
            "effects": args.effects.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "studies": study_ids,
            "min_studies": min_studies,
            "config": cfg,
            "pathways_tested": results.len(),
            "pathways_significant": significant,
        }),
    )?;
    eprintln!("{} pathways tested, {} with FDR < {}", results.len(), significant, cfg.alpha);
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = args.config();
    let data = simulate_studies(&cfg)?;
    write_simulation(&data, &args.out)?;
    write_json(
        &args.out.join("truth.json"),
        &json!({
            "version": VERSION,
            "config": cfg,
            "truth": data.truth,
        }),
    )?;
    eprintln!(
        "wrote {} studies ({} genes, {}+{} samples) and {} gene sets to {}",
        cfg.k_studies,
        cfg.genes,
        cfg.n_e,
        cfg.n_c,
        data.sets.len(),
        args.out.display()
    );
    Ok(())
}

pub fn permute(args: &PermuteArgs) -> Result<()> {
    let cfg = args.analysis.config();
    if !(args.p_threshold > 0.0 && args.p_threshold <= 1.0) {
        return Err(GsemaError::Config(format!("p threshold must lie in (0, 1], got {}", args.p_threshold)).into());
    }
    let (_, studies) = load_manifest(&args.manifest)?;
    let sets = parse_gmt(&args.gmt)?;
    let spiked = match &args.spiked_set {
        Some(name) => {
            if sets.get(name).is_none() {
                return Err(GsemaError::Config(format!("gene set {name:?} is not in the catalog")).into());
            }
            Some(name.clone())
        }
        None => sets.get(SPIKED_SET_NAME).map(|s| s.name.clone()),
    };
    eprintln!(
        "running {} permutations over {} studies (seed {})",
        args.iterations,
        studies.len(),
        args.seed
    );
    let report = run_permutation_suite(
        &studies,
        &sets,
        &cfg,
        args.iterations,
        args.seed,
        spiked.as_deref(),
        args.p_threshold,
    )?;

    create_dir(&args.out)?;
    write_file(&args.out.join("permutation_report.tsv"), |w| report.write_tsv(w))?;
    let nothing_tested = report
        .iterations
        .iter()
        .filter(|o| o.status == IterationStatus::NothingTested)
        .count();
    write_json(
        &args.out.join("permutation_summary.json"),
        &json!({
            "version": VERSION,
            "manifest": args.manifest.display().to_string(),
            "gmt": args.gmt.display().to_string(),
            "seed": args.seed,
            "iterations": args.iterations,
            "p_threshold": args.p_threshold,
            "spiked_set": spiked,
            "spiked_significant_rate": report.spiked_rate(),
            "failed_iterations": report.n_failed(),
            "nothing_tested_iterations": nothing_tested,
            "significant_counts": report.significant_counts(),
            "tested_counts": report.tested_counts(),
            "config": cfg,
        }),
    )?;
    let sig = report.significant_counts();
    eprintln!(
        "median {} significant pathways per iteration (max {}); spiked set significant in {:.1}% of iterations",
        sig.median,
        sig.max,
        100.0 * report.spiked_rate()
    );
    Ok(())
}
