use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, ModelKind};
use crate::dataset::{
    apply_standardizer, fit_standardizer, imbalance_ratio, load_csv, stratified_splits, Dataset,
    LabelColumn, ScalerParams,
};
use crate::diagnostics::{
    linear_weight_report, mlp_weight_report, sv_census, topk_ce, topk_input_grad, topk_overlap,
    DiagnosticsReport, GradientTopK, TopKReport,
};
use crate::error::{Error, Result};
use crate::latent::{dsm, eos};
use crate::metrics::{balanced_accuracy, macro_f1};
use crate::models::{
    latent_encode, retrain_head, train_logreg, train_mlp, train_svm, Classifier, ModelSnapshot,
    TrainedModel,
};
use crate::resampling::{adasyn, class_weights, remix, ros, smote, AugmentedDataset, ClassWeights};
use crate::rng::derive_seed;

const AUGMENT_STREAM: u64 = 1;
const MODEL_STREAM: u64 = 2;

/// Serialized outcome of one (method, model, repeat) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub model: ModelKind,
    pub repeat: usize,
    pub model_seed: u64,
    pub augment_seed: u64,
    pub bac: Option<f64>,
    pub macro_f1: Option<f64>,
    /// `None` for models without a convergence criterion.
    pub converged: Option<bool>,
    pub train_rows: usize,
    pub synthetic_rows: usize,
    pub augment_metadata: BTreeMap<String, String>,
    pub diagnostics: DiagnosticsReport,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl CellReport {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}_r{}", self.method, self.model, self.repeat)
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub report: CellReport,
    pub wall_clock: Duration,
    pub snapshot: Option<ModelSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub features: usize,
    pub class_counts: Vec<usize>,
    pub label_names: Vec<String>,
    pub imbalance_ratio: f64,
}

impl DatasetSummary {
    pub fn of(data: &Dataset) -> Self {
        Self {
            rows: data.len(),
            features: data.feature_count(),
            class_counts: data.class_counts(),
            label_names: data.label_names().to_vec(),
            imbalance_ratio: imbalance_ratio(data),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    /// Ordered by repeat, then configured method, then configured model.
    pub cells: Vec<CellResult>,
}

impl ExperimentResults {
    pub fn cell(&self, method: Method, model: ModelKind, repeat: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.report.method == method && c.report.model == model && c.report.repeat == repeat
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().map(|c| &c.report).filter(|r| !r.is_ok())
    }
}

/// Loads the configured dataset and runs every cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset path configured".into()))?;
    let label = cfg.label_column().unwrap_or(LabelColumn::Last);
    let data = load_csv(path, &label)?;
    run_experiment_on(cfg, &data)
}

/// Runs every (repeat, method, model) cell on an in-memory dataset. A failing
/// cell is recorded with its error; only invalid configuration or data
/// that cannot be split aborts the run.
pub fn run_experiment_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentResults> {
    cfg.validate()?;
    if data.n_classes() != 2 && cfg.models.iter().any(|m| *m != ModelKind::Mlp) {
        return Err(Error::Config(format!(
            "logreg and svm need binary labels; dataset has {} classes",
            data.n_classes()
        )));
    }
    let plan = stratified_splits(data, cfg.repeats, cfg.train_fraction, cfg.seed)?;
    let per_repeat: Vec<Vec<CellResult>> = plan
        .splits
        .par_iter()
        .enumerate()
        .map(|(r, split)| {
            let train_raw = data.select(&split.train)?;
            let test_raw = data.select(&split.test)?;
            let scaler = fit_standardizer(&train_raw);
            let ctx = RepeatContext {
                cfg,
                repeat: r,
                train: apply_standardizer(&scaler, &train_raw)?,
                test: apply_standardizer(&scaler, &test_raw)?,
                scaler,
            };
            Ok(ctx.run())
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentResults {
        config: cfg.clone(),
        dataset: DatasetSummary::of(data),
        cells: per_repeat.into_iter().flatten().collect(),
    })
}

fn stable_index<T: PartialEq>(all: &[T], item: &T) -> u64 {
    all.iter().position(|x| x == item).unwrap() as u64
}

/// Seed of a method's resampling stream; independent of which other methods
/// are configured.
pub fn augment_seed(seed: u64, repeat: usize, method: Method) -> u64 {
    derive_seed(
        seed,
        &[AUGMENT_STREAM, repeat as u64, stable_index(Method::ALL, &method)],
    )
}

/// Seed of a model's initialization and shuffling; shared by the base and
/// every treated model of the same repeat.
pub fn model_seed(seed: u64, repeat: usize, model: ModelKind) -> u64 {
    derive_seed(
        seed,
        &[MODEL_STREAM, repeat as u64, stable_index(ModelKind::ALL, &model)],
    )
}

struct BaseEntry {
    model: TrainedModel,
    ce: Option<TopKReport>,
    grad: Option<GradientTopK>,
}

struct Fitted {
    model: TrainedModel,
    train: AugmentedDataset,
}

struct RepeatContext<'a> {
    cfg: &'a ExperimentConfig,
    repeat: usize,
    train: Dataset,
    test: Dataset,
    scaler: ScalerParams,
}

impl RepeatContext<'_> {
    fn run(&self) -> Vec<CellResult> {
        let bases: BTreeMap<ModelKind, (std::result::Result<BaseEntry, String>, Duration)> = self
            .cfg
            .models
            .par_iter()
            .map(|&kind| {
                let start = Instant::now();
                let entry = self.fit_base(kind).map_err(|e| e.to_string());
                (kind, (entry, start.elapsed()))
            })
            .collect();

        let cells: Vec<(Method, ModelKind)> = self
            .cfg
            .methods
            .iter()
            .flat_map(|&m| self.cfg.models.iter().map(move |&k| (m, k)))
            .collect();
        cells
            .par_iter()
            .map(|&(method, kind)| {
                let (base, base_time) = &bases[&kind];
                self.run_cell(method, kind, base.as_ref(), *base_time)
            })
            .collect()
    }

    fn fit_base(&self, kind: ModelKind) -> Result<BaseEntry> {
        let train = AugmentedDataset::natural(self.train.clone());
        let model = self.fit(kind, &train, None)?;
        let mut entry = BaseEntry {
            model,
            ce: None,
            grad: None,
        };
        match &entry.model {
            TrainedModel::Logreg(m) => {
                entry.ce = Some(topk_ce(
                    m,
                    self.test.features(),
                    self.test.labels(),
                    self.cfg.top_k.min(self.test.feature_count()),
                )?)
            }
            TrainedModel::Mlp(m) => {
                entry.grad = Some(topk_input_grad(
                    m,
                    self.test.features(),
                    self.cfg.gradient_k(),
                    Some(self.test.labels()),
                )?)
            }
            TrainedModel::Svm(_) => {}
        }
        Ok(entry)
    }

    fn fit(
        &self,
        kind: ModelKind,
        train: &AugmentedDataset,
        weights: Option<&ClassWeights>,
    ) -> Result<TrainedModel> {
        let seed = model_seed(self.cfg.seed, self.repeat, kind);
        Ok(match kind {
            ModelKind::Logreg => {
                TrainedModel::Logreg(train_logreg(train, weights, &self.cfg.logreg_config(seed))?)
            }
            ModelKind::Svm => TrainedModel::Svm(train_svm(train, &self.cfg.svm_config(seed), weights)?),
            ModelKind::Mlp => TrainedModel::Mlp(train_mlp(train, &self.cfg.mlp_config(seed), weights)?),
        })
    }

    fn resample(&self, method: Method) -> Result<(AugmentedDataset, Option<ClassWeights>)> {
        let seed = augment_seed(self.cfg.seed, self.repeat, method);
        let k = self.cfg.k_neighbors;
        let data = &self.train;
        Ok(match method {
            Method::Base => (AugmentedDataset::natural(data.clone()), None),
            Method::Cs => (AugmentedDataset::natural(data.clone()), Some(class_weights(data))),
            Method::Ros => (ros(data, seed)?, None),
            Method::Smote => (smote(data, k, seed)?, None),
            Method::Adasyn => (adasyn(data, k, seed)?, None),
            Method::Remix => (remix(data, self.cfg.remix_alpha, seed)?, None),
            Method::Dsm | Method::Eos => unreachable!("latent methods are handled separately"),
        })
    }

    /// Encodes the training split with the base network, oversamples the
    /// encodings and retrains only the output layer.
    fn fit_latent(&self, method: Method, base: &TrainedModel) -> Result<Fitted> {
        let TrainedModel::Mlp(base) = base else {
            return Err(Error::Config(format!("{method} needs a network base model")));
        };
        let encoded = latent_encode(base, self.train.features())?;
        let latent = self.train.with_features(encoded)?;
        let seed = augment_seed(self.cfg.seed, self.repeat, method);
        let aug = match method {
            Method::Dsm => dsm(&latent, self.cfg.k_neighbors, seed)?,
            Method::Eos => eos(&latent, self.cfg.k_neighbors, seed)?,
            _ => unreachable!(),
        };
        let cfg = self
            .cfg
            .mlp_config(model_seed(self.cfg.seed, self.repeat, ModelKind::Mlp));
        let model = retrain_head(base, &aug, &cfg)?;
        Ok(Fitted {
            model: TrainedModel::Mlp(model),
            train: aug,
        })
    }

    fn run_cell(
        &self,
        method: Method,
        kind: ModelKind,
        base: std::result::Result<&BaseEntry, &String>,
        base_time: Duration,
    ) -> CellResult {
        let start = Instant::now();
        let mut report = CellReport {
            method,
            model: kind,
            repeat: self.repeat,
            model_seed: model_seed(self.cfg.seed, self.repeat, kind),
            augment_seed: augment_seed(self.cfg.seed, self.repeat, method),
            bac: None,
            macro_f1: None,
            converged: None,
            train_rows: 0,
            synthetic_rows: 0,
            augment_metadata: BTreeMap::new(),
            diagnostics: DiagnosticsReport::default(),
            warnings: Vec::new(),
            error: None,
        };
        let base = match base {
            Ok(b) => b,
            Err(e) => {
                report.error = Some(format!("base {kind} model failed: {e}"));
                return CellResult {
                    report,
                    wall_clock: start.elapsed(),
                    snapshot: None,
                };
            }
        };
        let outcome = self.fill_cell(&mut report, base);
        let snapshot = match outcome {
            Ok(model) => Some(ModelSnapshot {
                model,
                scaler: Some(self.scaler.clone()),
            }),
            Err(e) => {
                log::warn!("{} failed: {e}", report.file_stem());
                report.error = Some(e.to_string());
                None
            }
        };
        let mut wall_clock = start.elapsed();
        if method == Method::Base {
            wall_clock += base_time;
        }
        log::info!(
            "{} done in {:.2}s (BAC {:?})",
            report.file_stem(),
            wall_clock.as_secs_f64(),
            report.bac
        );
        CellResult {
            report,
            wall_clock,
            snapshot,
        }
    }

    fn fill_cell(&self, report: &mut CellReport, base: &BaseEntry) -> Result<TrainedModel> {
        let fitted = if report.method == Method::Base {
            Fitted {
                model: base.model.clone(),
                train: AugmentedDataset::natural(self.train.clone()),
            }
        } else if report.method.is_latent() {
            self.fit_latent(report.method, &base.model)?
        } else {
            let (train, weights) = self.resample(report.method)?;
            let model = self.fit(report.model, &train, weights.as_ref())?;
            Fitted { model, train }
        };
        report.train_rows = fitted.train.len();
        report.synthetic_rows = fitted.train.synthetic_count();
        report.augment_metadata = fitted.train.metadata.clone();
        if let Some(classes) = fitted.train.metadata.get("uniform_fallback_classes") {
            report
                .warnings
                .push(format!("adasyn allocated uniformly for classes {classes}"));
        }

        let pred = fitted.model.predict(self.test.features())?;
        report.bac = Some(balanced_accuracy(self.test.labels(), &pred)?);
        report.macro_f1 = Some(macro_f1(self.test.labels(), &pred)?);
        report.converged = match &fitted.model {
            TrainedModel::Logreg(m) => Some(m.converged),
            TrainedModel::Svm(m) => Some(m.converged),
            TrainedModel::Mlp(_) => None,
        };
        if report.converged == Some(false) {
            report
                .warnings
                .push("optimizer stopped before reaching tolerance".into());
        }
        report.diagnostics = self.diagnose(&fitted, base)?;
        Ok(fitted.model)
    }

    fn diagnose(&self, fitted: &Fitted, base: &BaseEntry) -> Result<DiagnosticsReport> {
        let mut out = DiagnosticsReport::default();
        let x = self.test.features();
        let labels = self.test.labels();
        match (&fitted.model, &base.model) {
            (TrainedModel::Logreg(m), TrainedModel::Logreg(b)) => {
                out.weights = Some(linear_weight_report(m, Some(b))?);
                let base_ce = base.ce.as_ref().expect("base CE computed");
                let mut ce = topk_ce(m, x, labels, base_ce.k)?;
                ce.overlap_i_m = Some(topk_overlap(base_ce, &ce)?);
                out.topk = Some(ce);
            }
            (TrainedModel::Svm(m), TrainedModel::Svm(b)) => {
                out.sv_census = Some(sv_census(m, &fitted.train, Some(b))?);
            }
            (TrainedModel::Mlp(m), TrainedModel::Mlp(b)) => {
                out.weights = Some(mlp_weight_report(m, Some(b))?);
                let base_grad = base.grad.as_ref().expect("base gradients computed");
                let mut grad = topk_input_grad(m, x, self.cfg.gradient_k(), Some(labels))?;
                grad.per_class.overlap_i_m = Some(topk_overlap(&base_grad.per_class, &grad.per_class)?);
                out.topk_instance_overlap =
                    Some(topk_overlap(&base_grad.per_instance, &grad.per_instance)?);
                out.topk = Some(grad.per_class);
            }
            _ => unreachable!("treated and base models share a kind"),
        }
        Ok(out)
    }
}
