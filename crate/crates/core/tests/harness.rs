use std::collections::BTreeMap;
use std::path::Path;

use imbalab_core::dataset::{make_gaussian_imbalanced, Dataset};
use imbalab_core::harness::{
    aggregate, emit_reports, read_cell_report, run_experiment, run_experiment_on,
    ExperimentConfig, Method, ModelKind,
};
use imbalab_core::models::Classifier;
use imbalab_core::ndarray::Array2;
use imbalab_core::{Error, ModelSnapshot, TrainedModel};

fn quick(methods: &[Method], models: &[ModelKind]) -> ExperimentConfig {
    ExperimentConfig {
        methods: methods.to_vec(),
        models: models.to_vec(),
        repeats: 2,
        seed: 3,
        epochs: Some(8),
        ..Default::default()
    }
}

fn fixture() -> Dataset {
    make_gaussian_imbalanced(240, 24, 12, 2.0, 9).unwrap()
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn base_only_config_gives_one_cell_per_repeat() {
    let cfg = ExperimentConfig {
        repeats: 1,
        ..quick(&[Method::Base], &[ModelKind::Logreg])
    };
    let res = run_experiment_on(&cfg, &fixture()).unwrap();
    assert_eq!(res.cells.len(), 1);
    let r = &res.cells[0].report;
    assert!(r.is_ok());
    let bac = r.bac.unwrap();
    assert!((0.0..=1.0).contains(&bac));
    assert_eq!(r.diagnostics.topk.as_ref().unwrap().overlap_i_m, Some(1.0));
    assert_eq!(r.diagnostics.weights.as_ref().unwrap().mean_pct_diff_vs_base, Some(0.0));
}

#[test]
fn smote_inflates_support_vectors_on_the_fixture() {
    let cfg = quick(&[Method::Base, Method::Smote], &[ModelKind::Svm]);
    let res = run_experiment_on(&cfg, &fixture()).unwrap();
    assert_eq!(res.cells.len(), 4);
    for r in 0..2 {
        let smote = &res.cell(Method::Smote, ModelKind::Svm, r).unwrap().report;
        let census = smote.diagnostics.sv_census.as_ref().unwrap();
        assert!(census.sv_multiple_vs_base > 1.0, "{census:?}");
        assert!(census.synthetic_sv_ratio > 0.0);
    }
}

#[test]
fn cells_are_ordered_and_seeds_do_not_depend_on_other_methods() {
    let a = run_experiment_on(&quick(&[Method::Base, Method::Smote], &[ModelKind::Logreg]), &fixture())
        .unwrap();
    let b = run_experiment_on(
        &quick(&[Method::Base, Method::Ros, Method::Smote], &[ModelKind::Logreg]),
        &fixture(),
    )
    .unwrap();
    let order: Vec<(usize, Method)> = b.cells.iter().map(|c| (c.report.repeat, c.report.method)).collect();
    assert_eq!(
        order,
        vec![
            (0, Method::Base),
            (0, Method::Ros),
            (0, Method::Smote),
            (1, Method::Base),
            (1, Method::Ros),
            (1, Method::Smote)
        ]
    );
    for r in 0..2 {
        assert_eq!(
            a.cell(Method::Smote, ModelKind::Logreg, r).unwrap().report,
            b.cell(Method::Smote, ModelKind::Logreg, r).unwrap().report
        );
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = ExperimentConfig {
        save_models: true,
        ..quick(
            &[Method::Base, Method::Cs, Method::Adasyn, Method::Remix],
            &[ModelKind::Logreg, ModelKind::Svm, ModelKind::Mlp],
        )
    };
    let data = fixture();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let written = emit_reports(&run_experiment_on(&cfg, &data).unwrap(), dir_a.path()).unwrap();
    emit_reports(&run_experiment_on(&cfg, &data).unwrap(), dir_b.path()).unwrap();
    let a = read_tree(dir_a.path());
    assert_eq!(a.len(), written.len());
    assert!(a.contains_key("aggregate.csv"));
    assert!(a.contains_key("models/remix_svm_r1.json"));
    assert_eq!(a, read_tree(dir_b.path()));
}

#[test]
fn cell_reports_round_trip_and_snapshots_reload() {
    let cfg = ExperimentConfig {
        save_models: true,
        ..quick(&[Method::Base, Method::Ros], &[ModelKind::Mlp])
    };
    let data = fixture();
    let res = run_experiment_on(&cfg, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&res, dir.path()).unwrap();
    for cell in &res.cells {
        let stem = cell.report.file_stem();
        let back = read_cell_report(dir.path().join("cells").join(format!("{stem}.json"))).unwrap();
        assert_eq!(back, cell.report);
        let snap = ModelSnapshot::load(dir.path().join("models").join(format!("{stem}.json"))).unwrap();
        assert_eq!(&snap, cell.snapshot.as_ref().unwrap());
        assert!(matches!(snap.model, TrainedModel::Mlp(_)));
        let x = snap.scaler.as_ref().unwrap().transform(data.features()).unwrap();
        assert_eq!(snap.model.predict(x.view()).unwrap().len(), data.len());
    }
    let csv = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("method,model,succeeded,failed,bac_mean,bac_std"));
    assert_eq!(csv.lines().count(), 3);
    let mags = std::fs::read_to_string(dir.path().join("magnitudes/ros_mlp_r0.csv")).unwrap();
    assert_eq!(mags.lines().next().unwrap(), "feature,class_0,class_1");
    assert_eq!(mags.lines().count(), 13);
}

#[test]
fn failing_cell_is_recorded_and_others_complete() {
    // two minority rows: each training split keeps one, which SMOTE cannot
    // interpolate from
    let x = Array2::from_shape_fn((42, 2), |(i, j)| (i * 7 + j * 3) as f64 % 11.0);
    let labels: Vec<usize> = (0..42).map(|i| usize::from(i >= 40)).collect();
    let data = Dataset::new(x, labels, (0..42).collect(), 2).unwrap();
    let cfg = ExperimentConfig {
        train_fraction: 0.5,
        ..quick(&[Method::Base, Method::Smote], &[ModelKind::Logreg])
    };
    let res = run_experiment_on(&cfg, &data).unwrap();
    let smote = &res.cell(Method::Smote, ModelKind::Logreg, 0).unwrap().report;
    let err = smote.error.as_deref().unwrap();
    assert!(err.contains("class 1"), "{err}");
    assert!(res.cell(Method::Base, ModelKind::Logreg, 0).unwrap().report.is_ok());
    assert_eq!(res.failures().count(), 2);
    let agg = aggregate(&res);
    assert_eq!((agg[1].succeeded, agg[1].failed), (0, 2));
    assert_eq!(agg[1].metric("bac").unwrap().mean, None);
}

#[test]
fn latent_methods_retrain_only_the_head() {
    let cfg = quick(&[Method::Base, Method::Dsm, Method::Eos], &[ModelKind::Mlp]);
    let res = run_experiment_on(&cfg, &fixture()).unwrap();
    for r in 0..2 {
        let base = res.cell(Method::Base, ModelKind::Mlp, r).unwrap();
        let TrainedModel::Mlp(b) = &base.snapshot.as_ref().unwrap().model else { panic!() };
        for m in [Method::Dsm, Method::Eos] {
            let cell = res.cell(m, ModelKind::Mlp, r).unwrap();
            assert!(cell.report.is_ok(), "{:?}", cell.report.error);
            assert!(cell.report.synthetic_rows > 0);
            let TrainedModel::Mlp(t) = &cell.snapshot.as_ref().unwrap().model else { panic!() };
            assert_eq!(t.encoder(), b.encoder());
            assert_ne!(t.head(), b.head());
            assert!(cell.report.diagnostics.topk_instance_overlap.is_some());
        }
    }
}

#[test]
fn invalid_configs_and_outputs_are_rejected() {
    let bad = quick(&[Method::Eos], &[ModelKind::Logreg]);
    assert!(matches!(run_experiment_on(&bad, &fixture()), Err(Error::Config(_))));
    assert!(matches!(
        run_experiment(&quick(&[Method::Base], &[ModelKind::Logreg])),
        Err(Error::Config(_))
    ));

    let res = run_experiment_on(
        &ExperimentConfig {
            repeats: 1,
            ..quick(&[Method::Base], &[ModelKind::Logreg])
        },
        &fixture(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(matches!(emit_reports(&res, &blocker), Err(Error::Io { .. })));
    let empty = imbalab_core::harness::ExperimentResults {
        cells: Vec::new(),
        ..res
    };
    assert!(emit_reports(&empty, dir.path().join("out")).is_err());
}

#[test]
fn runs_from_a_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    imbalab_core::dataset::write_csv(&fixture(), &path).unwrap();
    let cfg = ExperimentConfig {
        dataset: Some(path),
        label_col: Some("label".into()),
        repeats: 1,
        ..quick(&[Method::Base, Method::Ros], &[ModelKind::Logreg])
    };
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.dataset.class_counts, vec![240, 24]);
    assert_eq!(res.cells.len(), 2);
}
