use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelColumn;
use crate::diagnostics::{KSpec, DEFAULT_TOP_K};
use crate::error::{Error, Result};
use crate::models::{KernelSpec, SvmConfig, TrainConfig};
use crate::resampling::{DEFAULT_K_NEIGHBORS, DEFAULT_REMIX_ALPHA};

macro_rules! name_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} {other:?}; expected one of: {}",
                        stringify!($name).to_ascii_lowercase(),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

name_enum! {
    /// Class-balancing treatment applied to the training split.
    Method {
        Base => "base",
        Ros => "ros",
        Cs => "cs",
        Smote => "smote",
        Adasyn => "adasyn",
        Remix => "remix",
        Dsm => "dsm",
        Eos => "eos",
    }
}

name_enum! {
    ModelKind {
        Logreg => "logreg",
        Svm => "svm",
        Mlp => "mlp",
    }
}

name_enum! {
    KernelName {
        Linear => "linear",
        Rbf => "rbf",
    }
}

impl Method {
    /// Oversamples in the network's latent space.
    pub fn is_latent(&self) -> bool {
        matches!(self, Method::Dsm | Method::Eos)
    }

    /// Changes the training data (as opposed to base and cost-sensitive).
    pub fn is_augmentation(&self) -> bool {
        !matches!(self, Method::Base | Method::Cs)
    }
}

/// Everything that defines an experiment. Field names double as CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    /// Label column name or index; the last column when unset.
    pub label_col: Option<String>,
    pub methods: Vec<Method>,
    pub models: Vec<ModelKind>,
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub k_neighbors: usize,
    pub remix_alpha: f64,
    pub svm_c: f64,
    pub kernel: KernelName,
    /// RBF width; `1 / (d * mean feature variance)` when unset.
    pub gamma: Option<f64>,
    /// Overrides for both logistic regression and the network when set.
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub l2: Option<f64>,
    pub batch_size: Option<usize>,
    pub top_k: usize,
    /// Per-instance gradient sets keep this fraction of features instead of
    /// `top_k` when set.
    pub grad_fraction: Option<f64>,
    pub save_models: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            label_col: None,
            methods: vec![Method::Base],
            models: vec![ModelKind::Logreg],
            repeats: 5,
            train_fraction: 0.7,
            seed: 0,
            k_neighbors: DEFAULT_K_NEIGHBORS,
            remix_alpha: DEFAULT_REMIX_ALPHA,
            svm_c: 1.0,
            kernel: KernelName::Rbf,
            gamma: None,
            epochs: None,
            lr: None,
            l2: None,
            batch_size: None,
            top_k: DEFAULT_TOP_K,
            grad_fraction: None,
            save_models: false,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn label_column(&self) -> Option<LabelColumn> {
        self.label_col.as_deref().map(|s| s.parse().unwrap())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.models.is_empty() {
            return Err(Error::Config("methods and models must be non-empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be at least 1".into()));
        }
        if !(self.remix_alpha > 0.0) || !(self.svm_c > 0.0) {
            return Err(Error::Config("remix_alpha and svm_c must be positive".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::Config(format!("gamma {g} must be positive")));
            }
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if let Some(f) = self.grad_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("grad_fraction {f} not in (0, 1]")));
            }
        }
        for m in &self.methods {
            if m.is_latent() {
                if let Some(bad) = self.models.iter().find(|k| **k != ModelKind::Mlp) {
                    return Err(Error::Config(format!(
                        "method {m} oversamples in a network's latent space and can only be \
                         paired with model mlp, not {bad}; run it in a separate config"
                    )));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        if !self.methods.iter().all(|m| seen.insert(*m as u8)) {
            return Err(Error::Config("duplicate method".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.models.iter().all(|m| seen.insert(*m as u8)) {
            return Err(Error::Config("duplicate model".into()));
        }
        self.logreg_config(0).validate()?;
        self.mlp_config(0).validate()?;
        Ok(())
    }

    pub fn logreg_config(&self, seed: u64) -> TrainConfig {
        let base = TrainConfig::logreg();
        TrainConfig {
            learning_rate: self.lr.unwrap_or(base.learning_rate),
            epochs: self.epochs.unwrap_or(base.epochs),
            l2: self.l2.unwrap_or(base.l2),
            seed,
            ..base
        }
    }

    pub fn mlp_config(&self, seed: u64) -> TrainConfig {
        let base = TrainConfig::mlp();
        TrainConfig {
            learning_rate: self.lr.unwrap_or(base.learning_rate),
            epochs: self.epochs.unwrap_or(base.epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            l2: self.l2.unwrap_or(base.l2),
            seed,
            ..base
        }
    }

    pub fn svm_config(&self, seed: u64) -> SvmConfig {
        SvmConfig {
            c: self.svm_c,
            kernel: match self.kernel {
                KernelName::Linear => KernelSpec::Linear,
                KernelName::Rbf => KernelSpec::Rbf { gamma: self.gamma },
            },
            seed,
            ..SvmConfig::default()
        }
    }

    pub fn gradient_k(&self) -> KSpec {
        match self.grad_fraction {
            Some(f) => KSpec::Fraction(f),
            None => KSpec::Count(self.top_k),
        }
    }
}
