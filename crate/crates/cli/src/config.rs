//! Experiment configuration: a strict JSON document whose every field can be
//! overridden by a same-named flag.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use qwfs::experiments::{BaselineMode, ExperimentSetup, RunSpec};
use qwfs::media::MediumKind;
use qwfs::shaping::{Algorithm, OptimizerSpec};

use crate::error::{CliError, CliResult};

pub const DEFAULT_N: usize = 128;
pub const DEFAULT_REALIZATIONS: usize = 40;

/// A degree of control written as a number or as a `p/q` fraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Doc(pub f64);

pub fn parse_doc(s: &str) -> Result<Doc, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if q == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            p / q
        }
        None => s.parse().map_err(|_| format!("{s:?} is neither a number nor a p/q fraction"))?,
    };
    if !(value > 0.0 && value <= 1.0) {
        return Err(format!("degree of control {s} outside (0, 1]"));
    }
    Ok(Doc(value))
}

impl<'de> Deserialize<'de> for Doc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        let text = match Repr::deserialize(d)? {
            Repr::Number(x) => x.to_string(),
            Repr::Text(s) => s,
        };
        parse_doc(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// The on-disk document. `model` and `configuration` take one value or a
/// list; list-valued documents drive `summary` and the sweeps.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<OneOrMany<MediumKind>>,
    configuration: Option<OneOrMany<String>>,
    symmetric: Option<bool>,
    n: Option<usize>,
    doc: Option<Doc>,
    realizations: Option<usize>,
    seed: Option<u64>,
    optimizer: Option<OptimizerSpec>,
    baseline: Option<BaselineMode>,
    output: Option<PathBuf>,
    docs: Option<Vec<Doc>>,
    ns: Option<Vec<usize>>,
    realization: Option<u64>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    match s {
        "quasi-newton" => Ok(Algorithm::QuasiNewton),
        "momentum-gradient" => Ok(Algorithm::MomentumGradient),
        other => Err(format!("unknown algorithm {other:?}; expected quasi-newton or momentum-gradient")),
    }
}

/// Flags shared by the experiment commands; each overrides the config file.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Medium model(s): unitary, gaussian, thin.
    #[arg(long, value_delimiter = ',')]
    pub model: Vec<MediumKind>,
    /// Layout(s): 1p-s, 2p-is, 2p-is-displaced, 2p-ds; a `-opc` suffix selects the symmetric pair.
    #[arg(long, value_delimiter = ',')]
    pub configuration: Vec<String>,
    /// Detect both photons in the same mode.
    #[arg(long)]
    pub symmetric: Option<bool>,
    /// Number of modes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Degree of control, as a number or `p/q`.
    #[arg(long, value_parser = parse_doc)]
    pub doc: Option<Doc>,
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimizer: quasi-newton or momentum-gradient.
    #[arg(long, value_parser = parse_algorithm)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub gradient_tolerance: Option<f64>,
    #[arg(long)]
    pub objective_tolerance: Option<f64>,
    #[arg(long)]
    pub history_size: Option<usize>,
    /// Baseline: spatial-mean or analytic-unitary (default depends on the model).
    #[arg(long)]
    pub baseline: Option<BaselineMode>,
    /// Output CSV path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Degrees of control for sweep-doc.
    #[arg(long, value_delimiter = ',', value_parser = parse_doc)]
    pub docs: Vec<Doc>,
    /// System sizes for sweep-n.
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
    /// Realization index for diagnose.
    #[arg(long)]
    pub realization: Option<u64>,
}

/// Configuration after merging the file with the flags.
#[derive(Clone, Debug)]
pub struct Settings {
    pub models: Option<Vec<MediumKind>>,
    pub configurations: Option<Vec<String>>,
    pub symmetric: bool,
    pub n: usize,
    pub doc: f64,
    pub realizations: usize,
    pub seed: u64,
    pub optimizer: OptimizerSpec,
    pub baseline: Option<BaselineMode>,
    pub output: Option<PathBuf>,
    pub docs: Vec<f64>,
    pub ns: Vec<usize>,
    pub realization: u64,
}

fn read_file(path: &Path) -> CliResult<FileConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|source| CliError::ConfigParse {
        path: path.to_path_buf(),
        source,
    })
}

fn non_empty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

impl ConfigArgs {
    pub fn resolve(self) -> CliResult<Settings> {
        let file = match &self.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let mut optimizer = file.optimizer.unwrap_or_default();
        if let Some(a) = self.algorithm {
            optimizer.algorithm = a;
        }
        if let Some(r) = self.restarts {
            optimizer.restarts = r;
        }
        if let Some(m) = self.max_iterations {
            optimizer.max_iterations = m;
        }
        if let Some(g) = self.gradient_tolerance {
            optimizer.gradient_tolerance = g;
        }
        if let Some(o) = self.objective_tolerance {
            optimizer.objective_tolerance = o;
        }
        if let Some(h) = self.history_size {
            optimizer.history_size = h;
        }
        let settings = Settings {
            models: non_empty(self.model).or(file.model.map(OneOrMany::into_vec)),
            configurations: non_empty(self.configuration).or(file.configuration.map(OneOrMany::into_vec)),
            symmetric: self.symmetric.or(file.symmetric).unwrap_or(false),
            n: self.n.or(file.n).unwrap_or(DEFAULT_N),
            doc: self.doc.or(file.doc).map_or(1.0, |d| d.0),
            realizations: self.realizations.or(file.realizations).unwrap_or(DEFAULT_REALIZATIONS),
            seed: self.seed.or(file.seed).unwrap_or(0),
            optimizer,
            baseline: self.baseline.or(file.baseline),
            output: self.output.or(file.output),
            docs: non_empty(self.docs)
                .or(file.docs)
                .unwrap_or_default()
                .into_iter()
                .map(|d| d.0)
                .collect(),
            ns: non_empty(self.ns).or(file.ns).unwrap_or_default(),
            realization: self.realization.or(file.realization).unwrap_or(0),
        };
        if settings.realizations == 0 {
            return Err(CliError::Usage("realizations must be at least 1".into()));
        }
        if matches!(&settings.models, Some(m) if m.is_empty()) {
            return Err(CliError::Usage("model list is empty".into()));
        }
        if matches!(&settings.configurations, Some(c) if c.is_empty()) {
            return Err(CliError::Usage("configuration list is empty".into()));
        }
        Ok(settings)
    }
}

/// Parses a layout label; a `-opc` suffix forces the symmetric pair.
pub fn parse_setup(label: &str, symmetric: bool) -> CliResult<ExperimentSetup> {
    let (base, opc) = match label.strip_suffix("-opc") {
        Some(base) => (base, true),
        None => (label, false),
    };
    ExperimentSetup::from_label(base, symmetric || opc).map_err(CliError::Invalid)
}

impl Settings {
    pub fn models_or(&self, default: &[MediumKind]) -> Vec<MediumKind> {
        self.models.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn setups_or(&self, default: &[&str]) -> CliResult<Vec<ExperimentSetup>> {
        match &self.configurations {
            Some(labels) => labels.iter().map(|l| parse_setup(l, self.symmetric)).collect(),
            None => default.iter().map(|l| parse_setup(l, self.symmetric)).collect(),
        }
    }

    /// The one model and layout of a single-ensemble command.
    pub fn single(&self) -> CliResult<(ExperimentSetup, MediumKind)> {
        let models = self.models_or(&[MediumKind::HaarUnitary]);
        let setups = self.setups_or(&["2p-ds"])?;
        match (setups.as_slice(), models.as_slice()) {
            ([setup], [model]) => Ok((setup.clone(), *model)),
            _ => Err(CliError::Usage(
                "this command takes exactly one model and one configuration".into(),
            )),
        }
    }

    /// A validated run specification at the configured size and control.
    pub fn spec(&self, setup: ExperimentSetup, model: MediumKind) -> CliResult<RunSpec> {
        let spec = RunSpec::new(setup, model, self.n)
            .with_doc(self.doc)
            .with_optimizer(self.optimizer.clone())
            .with_baseline(self.baseline.unwrap_or(BaselineMode::default_for(model)));
        spec.validate().map_err(CliError::Invalid)?;
        Ok(spec)
    }

    pub fn output(&self) -> CliResult<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::Usage("an output path is required (--output or \"output\")".into()))
    }
}
