use std::fs;

use vskgp::experiments::{
    dump_covariance, experiment_data, read_matrix_csv, run, run_corner, run_jump_fixed, run_jump_mle,
    ExperimentConfig, ExperimentId,
};
use vskgp::{CovarianceModel, Kernel, RadialFamily, ScalingMap};

fn with_out(id: ExperimentId, dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        out_dir: Some(dir.to_path_buf()),
        ..ExperimentConfig::defaults(id)
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for id in [ExperimentId::JumpFixed, ExperimentId::GibbsCompare] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run(&with_out(id, a.path())).unwrap();
        let rb = run(&with_out(id, b.path())).unwrap();
        assert_eq!(ra.artifacts.len(), rb.artifacts.len());
        for (pa, pb) in ra.artifacts.iter().zip(&rb.artifacts) {
            assert_eq!(pa.file_name(), pb.file_name());
            let ca = fs::read(pa).unwrap();
            if pa.file_name().unwrap() == "manifest.json" {
                // The manifest records its own output directory.
                continue;
            }
            assert_eq!(ca, fs::read(pb).unwrap(), "{}", pa.display());
        }
    }
}

#[test]
fn every_artifact_exists_and_manifest_lists_them() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_jump_fixed(&with_out(ExperimentId::JumpFixed, dir.path())).unwrap();
    for p in &report.artifacts {
        assert!(fs::metadata(p).unwrap().len() > 0, "{}", p.display());
    }
    let names: Vec<String> = report
        .artifacts
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for expected in ["metrics.csv", "cov_standard.csv", "cov_vsk.csv", "samples_prior_vsk.csv", "manifest.json"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["experiment"], "jump_fixed");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["jitter"].as_array().unwrap().len() == 2);
}

#[test]
fn covariance_dump_round_trips_with_block_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::defaults(ExperimentId::JumpFixed);
    let data = experiment_data(&cfg, 6).unwrap();
    let stationary = CovarianceModel::new(Kernel::stationary(RadialFamily::MaternC2, 1.0).unwrap(), 8.0, 0.0).unwrap();
    let lifted =
        CovarianceModel::new(Kernel::vsk(RadialFamily::MaternC2, 1.0, ScalingMap::jump(0.5)).unwrap(), 8.0, 0.0).unwrap();
    let (ps, pv) = (dir.path().join("s.csv"), dir.path().join("v.csv"));
    dump_covariance(&stationary, data.points(), &ps).unwrap();
    dump_covariance(&lifted, data.points(), &pv).unwrap();
    let s = read_matrix_csv(&ps).unwrap();
    let v = read_matrix_csv(&pv).unwrap();
    assert_eq!(s, stationary.covariance_matrix(data.points()).unwrap());
    assert_eq!(v, lifted.covariance_matrix(data.points()).unwrap());

    // Nodes 0..0.4 sit left of the jump, 0.6..1 right of it.
    for i in 0..6 {
        assert_eq!(v[(i, i)], 64.0);
        for j in 0..6 {
            let same_side = (i < 3) == (j < 3);
            if same_side {
                assert_eq!(v[(i, j)], s[(i, j)]);
            } else {
                let h = (data.points()[i][0] - data.points()[j][0]).abs();
                let t = (h * h + 1.0).sqrt();
                let m = |r: f64| (1.0 + 3f64.sqrt() * r) * (-(3f64.sqrt()) * r).exp();
                assert!((v[(i, j)] - 64.0 * m(t)).abs() < 1e-12);
                assert!(v[(i, j)] < s[(i, j)]);
            }
        }
    }

    let noisy = CovarianceModel::new(Kernel::stationary(RadialFamily::Gaussian, 0.3).unwrap(), 2.0, 0.5).unwrap();
    let p = dir.path().join("n.csv");
    dump_covariance(&noisy, data.points(), &p).unwrap();
    let m = read_matrix_csv(&p).unwrap();
    assert!(m.diagonal().iter().all(|&d| d == 4.25));
}

#[test]
fn sweep_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        sweep: vec![10, 30, 50],
        starts: 2,
        ..with_out(ExperimentId::JumpMle, dir.path())
    };
    let report = run_jump_mle(&cfg).unwrap();
    assert_eq!(report.entries.iter().map(|e| e.value).collect::<Vec<_>>(), vec![10, 30, 50]);
    let text = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("N,rmse_std,rmse_vsk"));
    for e in &report.entries {
        for m in &e.models {
            assert!(m.fitted && m.error.is_none());
        }
    }
}

#[test]
fn corner_run_dumps_spotlight_covariances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        sweep: vec![11, 31],
        starts: 2,
        ..with_out(ExperimentId::Corner, dir.path())
    };
    let report = run_corner(&cfg).unwrap();
    for name in ["cov_standard_N20.csv", "cov_vsk_N20.csv", "cov_standard_N21.csv", "cov_vsk_N21.csv"] {
        let m = read_matrix_csv(&dir.path().join(name)).unwrap();
        assert_eq!(m.nrows(), if name.contains("N20") { 20 } else { 21 });
    }
    let spot = report.entries.iter().find(|e| e.spotlight && e.value == 21).unwrap();
    let (s, v) = (spot.metrics("standard").unwrap(), spot.metrics("vsk").unwrap());
    assert!(v.rmse < s.rmse);
    assert!(v.avg_std < s.avg_std);
    let rows = fs::read_to_string(dir.path().join("convergence.csv")).unwrap().lines().count();
    assert_eq!(rows, 3);
}

#[test]
fn fixed_run_respects_prior_variance() {
    let report = run_jump_fixed(&ExperimentConfig::defaults(ExperimentId::JumpFixed)).unwrap();
    for m in &report.entries[0].models {
        let r = m.metrics.unwrap();
        assert!(r.max_var <= 64.0);
        assert!(r.max_std >= r.avg_std);
    }
}
