use std::path::Path;

use anyhow::{bail, Context, Result};
use imbalab_core::dataset::{load_csv, make_gaussian_imbalanced, write_csv, Dataset};
use imbalab_core::diagnostics::{
    linear_weight_report, mlp_weight_report, topk_ce, topk_input_grad, topk_overlap,
    DiagnosticsReport, KSpec,
};
use imbalab_core::harness::{aggregate, emit_reports, run_experiment, AggregateRow};
use imbalab_core::latent::{dsm, eos};
use imbalab_core::metrics::balanced_accuracy;
use imbalab_core::models::latent_encode;
use imbalab_core::ndarray::Array2;
use imbalab_core::resampling::{adasyn, remix, ros, smote};
use imbalab_core::{
    AugmentedDataset, Classifier, Error, ExperimentConfig, LabelColumn, Method, ModelSnapshot,
    Origin, TrainedModel,
};

use crate::{AugmentArgs, DiagnoseArgs, GenArgs, RunArgs};

fn label_column(s: &str) -> LabelColumn {
    s.parse().unwrap_or_default()
}

fn apply_overrides(cfg: &mut ExperimentConfig, a: RunArgs) {
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = a.$field {
                cfg.$field = v;
            }
        )*};
    }
    macro_rules! set_opt {
        ($($field:ident),*) => {$(
            if a.$field.is_some() {
                cfg.$field = a.$field;
            }
        )*};
    }
    set!(methods, models, repeats, train_fraction, seed, k_neighbors, remix_alpha, svm_c, kernel, top_k, output_dir);
    set_opt!(dataset, label_col, gamma, epochs, lr, l2, batch_size, grad_fraction);
    cfg.save_models |= a.save_models;
}

pub fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(&mut cfg, args);
    let results = run_experiment(&cfg)?;
    for report in results.failures() {
        eprintln!("warning: {} failed: {}", report.file_stem(), report.error.as_deref().unwrap_or(""));
    }
    let written = emit_reports(&results, &cfg.output_dir)?;
    print_table(&aggregate(&results));
    println!("{} files written to {}", written.len(), cfg.output_dir.display());
    Ok(())
}

fn summary(row: &AggregateRow, name: &str) -> String {
    match row.metric(name) {
        Some(m) => match (m.mean, m.std) {
            (Some(mean), Some(std)) => format!("{mean:.4}±{std:.4}"),
            _ => "-".into(),
        },
        None => "-".into(),
    }
}

fn print_table(rows: &[AggregateRow]) {
    let columns = [
        ("BAC", "bac"),
        ("macro F1", "macro_f1"),
        ("weight diff", "weight_diff_pct"),
        ("SV multiple", "sv_multiple_vs_base"),
        ("top-K overlap", "topk_overlap"),
    ];
    print!("{:<8} {:<7} {:>5}", "method", "model", "ok");
    for (title, _) in columns {
        print!(" {title:>15}");
    }
    println!();
    for row in rows {
        print!(
            "{:<8} {:<7} {:>5}",
            row.method.as_str(),
            row.model.as_str(),
            format!("{}/{}", row.succeeded, row.succeeded + row.failed)
        );
        for (_, name) in columns {
            print!(" {:>15}", summary(row, name));
        }
        println!();
    }
}

fn load_snapshot(path: &Path) -> Result<ModelSnapshot> {
    ModelSnapshot::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn scaled(snapshot: &ModelSnapshot, data: &Dataset) -> Result<Array2<f64>> {
    Ok(match &snapshot.scaler {
        Some(s) => s.transform(data.features())?,
        None => data.features().to_owned(),
    })
}

pub fn augment(args: AugmentArgs) -> Result<()> {
    let data = load_csv(&args.input, &label_column(&args.label_col))?;
    let (k, seed) = (args.k_neighbors, args.seed);
    let aug = match args.method {
        Method::Base => AugmentedDataset::natural(data),
        Method::Cs => {
            return Err(Error::Config("cs reweights the loss and produces no rows".into()).into())
        }
        Method::Ros => ros(&data, seed)?,
        Method::Smote => smote(&data, k, seed)?,
        Method::Adasyn => adasyn(&data, k, seed)?,
        Method::Remix => remix(&data, args.remix_alpha, seed)?,
        Method::Dsm | Method::Eos => {
            let Some(path) = &args.network else {
                return Err(Error::Config(format!(
                    "{} samples in a network's latent space; pass --network",
                    args.method
                ))
                .into());
            };
            let snapshot = load_snapshot(path)?;
            let TrainedModel::Mlp(net) = &snapshot.model else {
                return Err(Error::Config(format!("{} is not a network", path.display())).into());
            };
            let latent = data.with_features(latent_encode(net, scaled(&snapshot, &data)?.view())?)?;
            if args.method == Method::Dsm {
                dsm(&latent, k, seed)?
            } else {
                eos(&latent, k, seed)?
            }
        }
    };
    write_augmented(&aug, &args.output)?;
    println!(
        "{} rows ({} synthetic) written to {}",
        aug.len(),
        aug.synthetic_count(),
        args.output.display()
    );
    Ok(())
}

fn write_augmented(aug: &AugmentedDataset, path: &Path) -> Result<()> {
    let data = &aug.data;
    let names = data.label_names();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<String> = (0..data.feature_count()).map(|j| format!("f{j}")).collect();
    header.extend(["label", "instance_id", "origin", "parent_a", "parent_b", "lambda"].map(String::from));
    if aug.soft_labels.is_some() {
        header.extend(names.iter().map(|n| format!("soft_{n}")));
    }
    w.write_record(&header)?;
    for i in 0..aug.len() {
        let p = &aug.provenance[i];
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(names[data.labels()[i]].clone());
        rec.push(data.instance_ids()[i].to_string());
        rec.push(match p.origin {
            Origin::Natural => "natural".into(),
            Origin::Synthetic => "synthetic".into(),
        });
        rec.push(p.parent_a.to_string());
        rec.push(p.parent_b.map(|b| b.to_string()).unwrap_or_default());
        rec.push(p.lambda.map(|l| l.to_string()).unwrap_or_default());
        if let Some(soft) = &aug.soft_labels {
            rec.extend(soft.row(i).iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let base = load_snapshot(&args.base)?;
    let other = load_snapshot(&args.model)?;
    let data = match &args.data {
        Some(path) => Some(load_csv(path, &label_column(&args.label_col))?),
        None => None,
    };
    let k_spec = match args.grad_fraction {
        Some(f) => KSpec::Fraction(f),
        None => KSpec::Count(args.top_k),
    };

    let mut report = DiagnosticsReport::default();
    let mut support_vectors = serde_json::Value::Null;
    match (&other.model, &base.model) {
        (TrainedModel::Logreg(m), TrainedModel::Logreg(b)) => {
            report.weights = Some(linear_weight_report(m, Some(b))?);
            if let Some(d) = &data {
                let k = args.top_k.min(d.feature_count());
                let base_ce = topk_ce(b, scaled(&base, d)?.view(), d.labels(), k)?;
                let mut ce = topk_ce(m, scaled(&other, d)?.view(), d.labels(), k)?;
                ce.overlap_i_m = Some(topk_overlap(&base_ce, &ce)?);
                report.topk = Some(ce);
            }
        }
        (TrainedModel::Mlp(m), TrainedModel::Mlp(b)) => {
            report.weights = Some(mlp_weight_report(m, Some(b))?);
            if let Some(d) = &data {
                let base_grad = topk_input_grad(b, scaled(&base, d)?.view(), k_spec, Some(d.labels()))?;
                let mut grad = topk_input_grad(m, scaled(&other, d)?.view(), k_spec, Some(d.labels()))?;
                grad.per_class.overlap_i_m = Some(topk_overlap(&base_grad.per_class, &grad.per_class)?);
                report.topk_instance_overlap = Some(topk_overlap(&base_grad.per_instance, &grad.per_instance)?);
                report.topk = Some(grad.per_class);
            }
        }
        (TrainedModel::Svm(m), TrainedModel::Svm(b)) => {
            let per_class = |labels: &[usize]| {
                let mut counts = vec![0usize; 2];
                for &y in labels {
                    counts[y] += 1;
                }
                counts
            };
            support_vectors = serde_json::json!({
                "base_count": b.support_ids.len(),
                "count": m.support_ids.len(),
                "count_per_class": per_class(&m.support_labels),
                "base_count_per_class": per_class(&b.support_labels),
                "multiple_vs_base": m.support_ids.len() as f64 / b.support_ids.len().max(1) as f64,
            });
        }
        _ => bail!(Error::Config(format!(
            "cannot compare a {} model with a {} model",
            other.model.kind(),
            base.model.kind()
        ))),
    }

    let bac = match &data {
        Some(d) => {
            let score = |s: &ModelSnapshot| -> Result<f64> {
                let pred = s.model.predict(scaled(s, d)?.view())?;
                Ok(balanced_accuracy(d.labels(), &pred)?)
            };
            serde_json::json!({ "base": score(&base)?, "model": score(&other)? })
        }
        None => serde_json::Value::Null,
    };
    let out = serde_json::json!({
        "kind": other.model.kind(),
        "bac": bac,
        "diagnostics": report,
        "support_vectors": support_vectors,
    });
    let text = serde_json::to_string_pretty(&out)?;
    match &args.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

pub fn gen(args: GenArgs) -> Result<()> {
    let data = make_gaussian_imbalanced(args.n_major, args.n_minor, args.features, args.separation, args.seed)?;
    write_csv(&data, &args.output)?;
    println!("{} rows written to {}", data.len(), args.output.display());
    Ok(())
}
