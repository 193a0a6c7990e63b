use std::ffi::{CStr, CString};
use std::ptr;

use hlab::dynamics::{DynamicsLog, EpochMatrix};
use hlab::geometry::FeatureSet;
use hlab_ffi::*;

fn cpath(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    logs: Vec<CString>,
    features: CString,
}

/// Two models over 4 samples (classes 0,0,1,1) and 3 epochs.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let margins = [
        [[1.0f32, 2.0, -1.0, 0.5], [1.0, 2.0, -1.0, 0.5], [1.0, 2.0, -1.0, 0.5]],
        [[3.0f32, 2.0, 1.0, 0.5], [3.0, 2.0, 1.0, 0.5], [3.0, 2.0, 1.0, 0.5]],
    ];
    let mut logs = Vec::new();
    for (m, rows) in margins.iter().enumerate() {
        let rows: Vec<Vec<f32>> = rows.iter().map(|r| r.to_vec()).collect();
        let log = DynamicsLog::new(format!("m{m}"), 4, 3)
            .with_margin(EpochMatrix::from_rows(rows).unwrap())
            .unwrap();
        let p = dir.path().join(format!("m{m}.hdyn"));
        log.save(&p).unwrap();
        logs.push(cpath(&p));
    }
    let fs = FeatureSet::new(1, 2, vec![0.0, 1.0, 2.0, 3.0], vec![0, 0, 1, 1]).unwrap();
    let fp = dir.path().join("f.hfea");
    fs.save(&fp).unwrap();
    Fixture {
        features: cpath(&fp),
        logs,
        _dir: dir,
    }
}

fn last_error() -> String {
    let p = hlab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn load_compute_and_query() {
    let fx = fixture();
    unsafe {
        let mut handles = Vec::new();
        for l in &fx.logs {
            let mut h = ptr::null_mut();
            assert_eq!(hlab_dynamics_load(l.as_ptr(), &mut h), HlabStatus::Ok);
            handles.push(h as *const HlabDynamics);
        }
        let (mut n, mut e, mut flags) = (0, 0, 0);
        assert_eq!(hlab_dynamics_shape(handles[0], &mut n, &mut e, &mut flags), HlabStatus::Ok);
        assert_eq!((n, e, flags), (4, 3, 1));

        let mut hard = ptr::null_mut();
        let st = hlab_hardness_compute(
            handles.as_ptr(),
            handles.len(),
            HlabEstimator::Aum,
            0,
            HlabForgettingMode::EventCount,
            &mut hard,
        );
        assert_eq!(st, HlabStatus::Ok);
        let mut len = 0;
        let mut vals = [0.0f64; 4];
        assert_eq!(hlab_hardness_values(hard, vals.as_mut_ptr(), 4, &mut len), HlabStatus::Ok);
        assert_eq!(len, 4);
        assert_eq!(vals, [2.0, 2.0, 0.0, 0.5]);
        let mut est = HlabEstimator::Forgetting;
        assert_eq!(hlab_hardness_estimator(hard, &mut est), HlabStatus::Ok);
        assert_eq!(est, HlabEstimator::Aum);

        let mut short = [0.0f64; 2];
        assert_eq!(
            hlab_hardness_values(hard, short.as_mut_ptr(), 2, &mut len),
            HlabStatus::BufferTooSmall
        );
        assert_eq!(len, 4);

        let mut fs = ptr::null_mut();
        assert_eq!(hlab_features_load(fx.features.as_ptr(), &mut fs), HlabStatus::Ok);
        let (mut fn_, mut d, mut k) = (0, 0, 0);
        assert_eq!(hlab_features_shape(fs, &mut fn_, &mut d, &mut k), HlabStatus::Ok);
        assert_eq!((fn_, d, k), (4, 1, 2));

        let mut counts = [0usize; 2];
        assert_eq!(hlab_target_counts(hard, fs, 1.0, counts.as_mut_ptr(), 2, &mut len), HlabStatus::Ok);
        assert_eq!(counts.iter().sum::<usize>(), 4);
        assert!(counts[1] > counts[0], "class 1 has the lower AUM");

        let mut ids = [0usize; 4];
        assert_eq!(
            hlab_prune(hard, fs, HlabPruneMode::Dlp, 0.5, ids.as_mut_ptr(), 4, &mut len),
            HlabStatus::Ok
        );
        assert_eq!(&ids[..len], &[0, 1]);
        assert_eq!(
            hlab_prune(hard, fs, HlabPruneMode::Clp, 0.5, ids.as_mut_ptr(), 4, &mut len),
            HlabStatus::Ok
        );
        assert_eq!(&ids[..len], &[0, 3]);

        hlab_features_free(fs);
        hlab_hardness_free(hard);
        for h in handles {
            hlab_dynamics_free(h as *mut _);
        }
    }
}

#[test]
fn errors_map_to_status_codes() {
    let fx = fixture();
    unsafe {
        let mut h = ptr::null_mut();
        let missing = CString::new("/nonexistent/x.hdyn").unwrap();
        assert_eq!(hlab_dynamics_load(missing.as_ptr(), &mut h), HlabStatus::Io);
        assert!(last_error().contains("x.hdyn"));
        assert_eq!(hlab_dynamics_load(ptr::null(), &mut h), HlabStatus::NullPointer);
        // an HFEA file is not an HDYN file
        assert_eq!(hlab_dynamics_load(fx.features.as_ptr(), &mut h), HlabStatus::Format);

        assert_eq!(hlab_dynamics_load(fx.logs[0].as_ptr(), &mut h), HlabStatus::Ok);
        let handles = [h as *const HlabDynamics];
        let mut hard = ptr::null_mut();
        let st = hlab_hardness_compute(
            handles.as_ptr(),
            1,
            HlabEstimator::Forgetting,
            0,
            HlabForgettingMode::EventCount,
            &mut hard,
        );
        assert_eq!(st, HlabStatus::Validation, "no correct channel");
        assert!(last_error().contains("correct"));
        hlab_dynamics_free(h);

        let mut w = 0.0;
        assert_eq!(hlab_weight_function(0.0, 5.0, &mut w), HlabStatus::Ok);
        assert_eq!(w, 1.0);
        assert_eq!(hlab_weight_function(1.0, 5.0, &mut w), HlabStatus::Ok);
        assert!((w - 0.5).abs() < 1e-12);
        assert_eq!(hlab_weight_function(1.5, 5.0, &mut w), HlabStatus::Domain);
        assert_eq!(hlab_weight_function(0.5, 5.0, ptr::null_mut()), HlabStatus::NullPointer);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(hlab_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_abi() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hlab.h")).unwrap();
    for name in [
        "hlab_last_error",
        "hlab_version",
        "hlab_dynamics_load",
        "hlab_dynamics_shape",
        "hlab_dynamics_free",
        "hlab_hardness_compute",
        "hlab_hardness_len",
        "hlab_hardness_values",
        "hlab_hardness_estimator",
        "hlab_hardness_free",
        "hlab_features_load",
        "hlab_features_shape",
        "hlab_features_free",
        "hlab_target_counts",
        "hlab_weight_function",
        "hlab_prune",
        "HLAB_STATUS_BUFFER_TOO_SMALL",
        "typedef struct HlabDynamics HlabDynamics",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
