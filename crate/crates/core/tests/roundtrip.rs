use gsema_core::ingest::{load_manifest, parse_gmt};
use gsema_core::pipeline::{run_pipeline, PipelineConfig};
use gsema_core::simharness::{simulate_studies, write_simulation, SimConfig, GMT_FILE, MANIFEST_FILE, SPIKED_SET_NAME};

fn small() -> SimConfig {
    SimConfig {
        k_studies: 3,
        genes: 400,
        n_e: 8,
        n_c: 9,
        de_fraction: 0.05,
        spiked_set_size: 15,
        n_decoy_sets: 40,
        decoy_set_size_range: (10, 40),
        seed: 11,
        ..SimConfig::default()
    }
}

#[test]
fn written_simulation_loads_back_identically() {
    let data = simulate_studies(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_simulation(&data, dir.path()).unwrap();

    let (manifest, studies) = load_manifest(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.entries.len(), 3);
    assert_eq!(studies.len(), 3);
    for (a, b) in studies.iter().zip(&data.studies) {
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.labels, b.labels);
    }
    assert_eq!(parse_gmt(&dir.path().join(GMT_FILE)).unwrap(), data.sets);
}

#[test]
fn pipeline_on_loaded_files_matches_in_memory_run() {
    let data = simulate_studies(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_simulation(&data, dir.path()).unwrap();
    let (_, studies) = load_manifest(&dir.path().join(MANIFEST_FILE)).unwrap();
    let sets = parse_gmt(&dir.path().join(GMT_FILE)).unwrap();

    let cfg = PipelineConfig::default();
    let from_disk = run_pipeline(&studies, &sets, &cfg).unwrap().analysis;
    let in_memory = run_pipeline(&data.studies, &data.sets, &cfg).unwrap().analysis;
    assert_eq!(from_disk.results, in_memory.results);
    assert_eq!(from_disk.rank_of(SPIKED_SET_NAME), Some(1));
}

#[test]
fn study_order_does_not_change_results() {
    let data = simulate_studies(&small()).unwrap();
    let cfg = PipelineConfig::default();
    let forward = run_pipeline(&data.studies, &data.sets, &cfg).unwrap().analysis;
    let mut reversed = data.studies.clone();
    reversed.reverse();
    let backward = run_pipeline(&reversed, &data.sets, &cfg).unwrap().analysis;
    assert_eq!(forward.results, backward.results);
    assert_eq!(forward.panel.pathway_names, backward.panel.pathway_names);
}

#[test]
fn missing_study_file_names_the_study() {
    let data = simulate_studies(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_simulation(&data, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("Study2_labels.tsv")).unwrap();
    let err = load_manifest(&dir.path().join(MANIFEST_FILE)).unwrap_err();
    assert!(err.to_string().contains("Study2"), "{err}");
}
