use std::fs;
use std::path::Path;

use dfedsgpsm::config::{AlgorithmKind, ExperimentConfig};
use dfedsgpsm::metrics::{read_metrics, RunManifest, MANIFEST_FILE, METRICS_FILE};
use dfedsgpsm::protocol::run_experiment_with;
use dfedsgpsm::{run_experiment, Error};

fn cfg(algorithm: AlgorithmKind, workers: usize, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        clients: 8,
        rounds: 15,
        seed: 42,
        workers,
        out: Some(out.to_path_buf()),
        ..Default::default()
    }
}

#[test]
fn metrics_are_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    for algorithm in [
        AlgorithmKind::DFedSgpsm,
        AlgorithmKind::DFedSgpsmS,
        AlgorithmKind::FedAvg,
    ] {
        let mut files = Vec::new();
        for (run, workers) in [(0, 1), (1, 1), (2, 4)] {
            let out = dir.path().join(format!("{algorithm}-{run}"));
            run_experiment(&cfg(algorithm, workers, &out)).unwrap();
            files.push(fs::read(out.join(METRICS_FILE)).unwrap());
        }
        assert_eq!(files[0], files[1], "{algorithm}: repeated run differs");
        assert_eq!(files[0], files[2], "{algorithm}: worker count changes output");
    }
}

#[test]
fn seed_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = cfg(AlgorithmKind::DFedSgpsm, 1, &dir.path().join("a"));
    let b = ExperimentConfig {
        seed: 43,
        ..cfg(AlgorithmKind::DFedSgpsm, 1, &dir.path().join("b"))
    };
    assert_ne!(run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
}

#[test]
fn run_directory_holds_one_manifest_and_parseable_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(AlgorithmKind::Osgp, 1, dir.path());
    let series = run_experiment(&c).unwrap();
    assert_eq!(series.len(), 16);
    assert_eq!(read_metrics(dir.path().join(METRICS_FILE)).unwrap(), series);
    let manifest = RunManifest::read(dir.path()).unwrap();
    assert_eq!(manifest.config, c);
    assert_eq!(manifest.seed, 42);
    assert!(dir.path().join(MANIFEST_FILE).exists());

    assert!(matches!(run_experiment(&c), Err(Error::RunDirectoryInUse(_))));
    assert_eq!(run_experiment_with(&c, true).unwrap(), series);
}
