// SPDX-License-Identifier: Apache-2.0

//! Stage-level behaviour of the experiment pipeline.

mod common;

use chartbeam::config::{NetBackend, Task};
use chartbeam::format;
use chartbeam::pipeline::{self, Layout};
use chartbeam::report::check_cdf_csv;
use chartbeam::PipelineError;
use chartbeam_core::channel::Split;
use chartbeam_core::neural::HeadKind;
use chartbeam_core::C32;
use common::tiny_config;

#[test]
fn generate_is_byte_identical_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    let path = Layout::new(&cfg).dataset();
    pipeline::run_generate(&cfg).unwrap();
    let first = std::fs::read(&path).unwrap();
    pipeline::run_generate(&cfg).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    cfg.seed += 1;
    pipeline::run_generate(&cfg).unwrap();
    assert_ne!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn default_dimensions() {
    let mut cfg = chartbeam::config::ExperimentConfig::default();
    cfg.scene.n_ue = 20;
    let ds = pipeline::generate_dataset(&cfg).unwrap();
    let s = pipeline::generate_summary(&cfg, &ds);
    assert_eq!((s.ambient_dim, s.n_beams, s.n_bs), (1024, 256, 2));
}

#[test]
fn charting_ignores_downlink_channels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let ds = pipeline::generate_dataset(&cfg).unwrap();
    let mut altered = ds.clone();
    for s in &mut altered.samples {
        for d in &mut s.downlink {
            d.data.iter_mut().for_each(|z| *z = C32::new(1.0, -1.0));
        }
    }
    let (idx, ch) = pipeline::calibration_uplinks(&ds);
    let (a, _) = pipeline::build_chart(&cfg, idx, ch).unwrap();
    let (idx, ch) = pipeline::calibration_uplinks(&altered);
    let (b, _) = pipeline::build_chart(&cfg, idx, ch).unwrap();
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    format::write_chart(&mut ba, &a).unwrap();
    format::write_chart(&mut bb, &b).unwrap();
    assert_eq!(ba, bb);
    assert!(a.sample_indices.iter().all(|&i| ds.split[i] == Split::Calibration));
}

#[test]
fn chart_stage_is_reproducible_with_valid_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    pipeline::run_generate(&cfg).unwrap();
    let (s, _) = pipeline::run_chart(&cfg).unwrap();
    let path = Layout::new(&cfg).chart();
    let first = std::fs::read(&path).unwrap();
    let (s2, _) = pipeline::run_chart(&cfg).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    assert_eq!(s, s2);
    for v in [s.trustworthiness, s.continuity] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(s.kruskal_stress >= 0.0);
    assert!(s.self_embedding_error < 1e-6);
}

#[test]
fn training_progress_checkpoints_and_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    pipeline::run_generate(&cfg).unwrap();
    pipeline::run_chart(&cfg).unwrap();

    let err = pipeline::run_train(&cfg, None, Some(3), None).unwrap_err();
    assert!(err.is_validation() && err.to_string().contains("1..=2"), "{err}");

    // evaluation before training names the missing backend
    match pipeline::run_evaluate(&cfg) {
        Err(PipelineError::MissingCheckpoint { backend, bs, .. }) => assert_eq!((backend.as_str(), bs), ("rff", 1)),
        other => panic!("expected a missing checkpoint, got {other:?}"),
    }

    let runs = pipeline::run_train(&cfg, None, None, None).unwrap();
    assert_eq!(runs.len(), 8);
    for r in &runs {
        assert!(r.final_loss < r.initial_loss, "{r}");
    }
    let layout = Layout::new(&cfg);
    let net = format::load_network(&layout.checkpoint(2, NetBackend::Rff, Task::Regression)).unwrap();
    assert_eq!(net.head, HeadKind::Regression);
    let curve = std::fs::read_to_string(layout.loss_curve(2, NetBackend::Rff, Task::Regression)).unwrap();
    assert_eq!(curve.lines().count(), 1 + cfg.train.epochs);

    let (report, files) = pipeline::run_evaluate(&cfg).unwrap();
    assert_eq!(report.bs.len(), 2);
    for b in &report.bs {
        let names: Vec<&str> = b.accuracy.iter().map(|r| r.backend.as_str()).collect();
        assert_eq!(names, ["rff", "mlp", "nn1", "oracle"]);
        let oracle = b.accuracy("oracle").unwrap();
        assert_eq!((oracle.top1, oracle.top3), (1.0, 1.0));
        for r in &b.accuracy {
            assert!(r.top3 >= r.top1);
        }
        let best = &b.correlation("oracle").unwrap().samples;
        for name in ["rff-classifier", "mlp-classifier"] {
            let eta = &b.correlation(name).unwrap().samples;
            assert!(eta.iter().zip(best).all(|(a, o)| *a <= o + 1e-12), "{name} beats the oracle");
        }
        for r in &b.correlation {
            assert!(r.samples.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
    assert_eq!((report.overhead.sweeping_cost, report.overhead.proposed_cost), (2 * 64, 64 + 2 * 2));
    for f in files.iter().filter(|f| f.to_string_lossy().ends_with("_cdf.csv")) {
        check_cdf_csv(f).unwrap();
    }
    assert!(files.iter().all(|f| f.file_name().unwrap().to_string_lossy().starts_with("tiny_")));
    assert!(!files.iter().any(|f| f.to_string_lossy().contains("timing")));
}

#[test]
fn timing_file_only_when_enabled() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    cfg.train.epochs = 2;
    cfg.evaluate.timing_repetitions = 10;
    let (report, files) = pipeline::run_all(&cfg, |_| {}).unwrap();
    let rows = report.timing.unwrap();
    assert_eq!(rows.len(), 4 * cfg.n_bs());
    assert!(rows.iter().all(|r| r.mean_ns > 0.0 && r.std_ns >= 0.0));
    assert!(files.iter().any(|f| f.to_string_lossy().ends_with("tiny_timing.toml")));
}
