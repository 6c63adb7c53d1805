//! Generate or load, allocate, train, evaluate and export.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{
    AllocationConfig, AllocationMethod, DatasetConfig, DatasetSource, EvaluationConfig,
    ExperimentConfig,
};
use super::structure::Structure;
use crate::allocation::{kmeans_fit, partition_by_dimension, AllocationRule, KMeansConfig};
use crate::clusternet::{context_loss, train, train_fcn, ClusterNet, GateMode, LossTrace};
use crate::datasets::{
    generate_burgers, load_table, normalize_and_split, synthetic_cylinder_table, NormalizedDataset,
    RawDataset, Scaling, Split,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    activation_trace, compute_metrics, MetricScale, MetricsReport, Region, Surrogate,
    SurrogateRecord,
};
use crate::nn::{HiddenActivation, Mlp, OutputActivation};

pub const METRICS_FILE: &str = "metrics.json";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const ACTIVATION_TRACE_FILE: &str = "activation_trace.csv";
pub const PROVENANCE_FILE: &str = "provenance.json";

pub fn load_raw(cfg: &DatasetConfig) -> Result<RawDataset> {
    match &cfg.source {
        DatasetSource::Burgers { grid } => generate_burgers(grid),
        DatasetSource::Table { path, schema } => load_table(path, &schema.resolve()),
        DatasetSource::Cylinder => synthetic_cylinder_table(),
    }
}

pub fn load_dataset(cfg: &DatasetConfig, seed: u64) -> Result<NormalizedDataset> {
    let [a, b, c] = cfg.split;
    normalize_and_split(load_raw(cfg)?, (a, b, c), seed)
}

/// An allocation rule plus the input space it reads: partitions bin raw
/// values, K-means clusters normalized rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedAllocation {
    pub rule: AllocationRule,
    pub normalized: bool,
}

impl FittedAllocation {
    /// Labels for every row of `data`.
    pub fn labels(&self, data: &NormalizedDataset) -> Result<Vec<usize>> {
        let source = if self.normalized {
            &data.inputs
        } else {
            &data.raw.inputs
        };
        source
            .outer_iter()
            .map(|row| self.rule.assign(&row.to_vec()))
            .collect()
    }

    pub fn dimension(&self) -> Option<usize> {
        match &self.rule {
            AllocationRule::Partition(p) => Some(p.dimension),
            AllocationRule::KMeans(_) => None,
        }
    }
}

/// Fits the rule on training rows only.
pub fn fit_allocation(
    cfg: &AllocationConfig,
    data: &NormalizedDataset,
    seed: u64,
) -> Result<FittedAllocation> {
    let train = data.rows(Split::Train);
    match cfg.method {
        AllocationMethod::Partition => {
            let name = cfg
                .dimension
                .as_deref()
                .ok_or_else(|| Error::Config("partition allocation needs a dimension".into()))?;
            let dim = data
                .raw
                .input_index(name)
                .ok_or_else(|| Error::Config(format!("no input column `{name}`")))?;
            let rows = data.raw.inputs.select(Axis(0), train);
            let (rule, _) = partition_by_dimension(rows.view(), dim, cfg.k, cfg.widths.as_deref())?;
            Ok(FittedAllocation {
                rule: AllocationRule::Partition(rule),
                normalized: false,
            })
        }
        AllocationMethod::KMeans => {
            let rows = data.inputs.select(Axis(0), train);
            let km = KMeansConfig {
                restarts: cfg.restarts.max(1),
                ..KMeansConfig::new(cfg.k, seed)
            };
            let (model, _) = kmeans_fit(rows.view(), &km)?;
            Ok(FittedAllocation {
                rule: AllocationRule::KMeans(model),
                normalized: true,
            })
        }
    }
}

pub fn build_model(
    structure: &Structure,
    inputs: usize,
    outputs: usize,
    seed: u64,
) -> Result<Surrogate> {
    Ok(match structure {
        Structure::Fcn { hidden } => Surrogate::Fcn(Mlp::new(
            &Structure::fcn_sizes(hidden, inputs, outputs),
            HiddenActivation::Tanh,
            OutputActivation::Identity,
            seed,
        )?),
        Structure::ClusterNet { .. } => {
            let arch = structure
                .clusternet(inputs, outputs)
                .expect("clusternet structure");
            Surrogate::ClusterNet(ClusterNet::new(&arch, seed)?)
        }
    })
}

/// Everything needed to predict from raw inputs again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub config_hash: String,
    pub input_names: Vec<String>,
    pub target_names: Vec<String>,
    pub scaling: Scaling,
    pub allocation: Option<FittedAllocation>,
    pub gate_mode: GateMode,
    pub model: SurrogateRecord,
}

pub const BUNDLE_FORMAT: &str = "mtl.bundle";

impl ModelBundle {
    pub fn surrogate(&self) -> Result<Surrogate> {
        self.model.clone().try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bundle: Self = serde_json::from_str(&text)?;
        if bundle.format != BUNDLE_FORMAT {
            return Err(Error::Schema(format!(
                "expected {BUNDLE_FORMAT}, found {}",
                bundle.format
            )));
        }
        Ok(bundle)
    }
}

/// Metrics for every split, over all rows and each configured region.
/// ClusterNets also get context loss and gate agreement per split.
pub fn evaluate(
    model: &Surrogate,
    data: &NormalizedDataset,
    labels: Option<&[usize]>,
    cfg: &EvaluationConfig,
) -> Result<MetricsReport> {
    let mut report = MetricsReport::new(cfg.scale);
    for split in Split::ALL {
        let rows = data.rows(split);
        if rows.is_empty() {
            continue;
        }
        let x = data.inputs.select(Axis(0), rows);
        let mut pred = model.predict(x.view(), cfg.gate_mode)?;
        let mut target = data.targets.select(Axis(0), rows);
        if cfg.scale == MetricScale::Raw {
            pred = data.denormalize_targets(&pred);
            target = data.raw.targets.select(Axis(0), rows);
        }
        let raw_targets = data.raw.targets.select(Axis(0), rows);
        let regions = cfg
            .regions
            .iter()
            .map(|p| {
                Ok(Region {
                    name: p.to_string(),
                    mask: p.mask(raw_targets.view(), &data.raw.target_names)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        report.insert_split(
            split.name(),
            &compute_metrics(pred.view(), target.view(), &regions)?,
        );

        if let (Surrogate::ClusterNet(net), Some(labels)) = (model, labels) {
            let z: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
            let one_hot = one_hot(&z, net.q());
            let lc = context_loss(net, x.view(), one_hot.view())?;
            let gates = net.gates_batch(x.view())?;
            let agree = gates
                .outer_iter()
                .zip(&z)
                .filter(|(g, &l)| crate::clusternet::argmax(&g.to_vec()) == l)
                .count();
            report
                .extra
                .insert(format!("{}_context_loss", split.name()), lc);
            report.extra.insert(
                format!("{}_gate_agreement", split.name()),
                agree as f64 / z.len() as f64,
            );
        }
    }
    Ok(report)
}

fn one_hot(labels: &[usize], k: usize) -> Array2<f64> {
    Array2::from_shape_fn(
        (labels.len(), k),
        |(i, j)| if labels[i] == j { 1.0 } else { 0.0 },
    )
}

/// Per-iteration training losses of either model kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingTrace {
    Fcn(Vec<f64>),
    ClusterNet(LossTrace),
}

impl TrainingTrace {
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            TrainingTrace::ClusterNet(t) => t.save_csv(path),
            TrainingTrace::Fcn(losses) => {
                let path = path.as_ref();
                let mut wtr = csv::Writer::from_path(path)?;
                wtr.write_record(["iteration", "loss"])?;
                for (i, l) in losses.iter().enumerate() {
                    wtr.write_record([i.to_string(), l.to_string()])?;
                }
                wtr.flush().map_err(|e| Error::io(path, e))?;
                Ok(())
            }
        }
    }
}

/// In-memory result of an experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub data: NormalizedDataset,
    pub allocation: Option<FittedAllocation>,
    pub labels: Option<Vec<usize>>,
    /// `None` when training diverged.
    pub model: Option<Surrogate>,
    pub trace: Option<TrainingTrace>,
    pub report: MetricsReport,
}

/// Runs the experiment without touching the filesystem (except to read a
/// configured table). Divergence yields a report with a `diverges` status.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset, cfg.seed)?;
    let allocation = match (&cfg.allocation, &cfg.model.structure) {
        (Some(a), Structure::ClusterNet { .. }) => Some(fit_allocation(a, &data, cfg.seed)?),
        _ => None,
    };
    let labels = allocation.as_ref().map(|a| a.labels(&data)).transpose()?;
    let mut model = build_model(
        &cfg.model.structure,
        data.input_width(),
        data.target_width(),
        cfg.seed,
    )?;
    let train_rows = data.rows(Split::Train);
    let x = data.inputs.select(Axis(0), train_rows);
    let y = data.targets.select(Axis(0), train_rows);
    let trained = match &mut model {
        Surrogate::Fcn(net) => {
            train_fcn(net, x.view(), y.view(), &cfg.training).map(TrainingTrace::Fcn)
        }
        Surrogate::ClusterNet(net) => {
            let all = labels.as_ref().expect("ClusterNet runs carry labels");
            let z: Vec<usize> = train_rows.iter().map(|&r| all[r]).collect();
            train(net, x.view(), y.view(), &z, &cfg.training).map(TrainingTrace::ClusterNet)
        }
    };
    match trained {
        Ok(trace) => {
            let report = evaluate(&model, &data, labels.as_deref(), &cfg.evaluation)?;
            Ok(Outcome {
                data,
                allocation,
                labels,
                model: Some(model),
                trace: Some(trace),
                report,
            })
        }
        Err(Error::Diverged { iteration }) => {
            log::warn!("training diverged at iteration {iteration}");
            Ok(Outcome {
                data,
                allocation,
                labels,
                model: None,
                trace: None,
                report: MetricsReport::diverged(iteration),
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunProvenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Artifact file name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

/// Executes `cfg` and writes metrics, loss trace, checkpoint, activation
/// trace (ClusterNet only) and a provenance sidecar into `cfg.output`.
pub fn run(cfg: &ExperimentConfig) -> Result<(Outcome, Vec<PathBuf>)> {
    run_with(cfg, true)
}

/// [`run`], optionally skipping the activation trace.
pub fn run_with(cfg: &ExperimentConfig, with_trace: bool) -> Result<(Outcome, Vec<PathBuf>)> {
    let hash = cfg.hash()?;
    let out = &cfg.output;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let outcome = execute(cfg)?;
    let mut written = Vec::new();

    let metrics = out.join(METRICS_FILE);
    fs::write(&metrics, outcome.report.to_json()?).map_err(|e| Error::io(&metrics, e))?;
    written.push(metrics);

    if let (Some(model), Some(trace)) = (&outcome.model, &outcome.trace) {
        let path = out.join(LOSS_TRACE_FILE);
        trace.save_csv(&path)?;
        written.push(path);

        let bundle = ModelBundle {
            format: BUNDLE_FORMAT.into(),
            config_hash: hash.clone(),
            input_names: outcome.data.raw.input_names.clone(),
            target_names: outcome.data.raw.target_names.clone(),
            scaling: outcome.data.scaling(),
            allocation: outcome.allocation.clone(),
            gate_mode: cfg.evaluation.gate_mode,
            model: model.into(),
        };
        let path = out.join(CHECKPOINT_FILE);
        bundle.save(&path)?;
        written.push(path);

        if let (Surrogate::ClusterNet(net), true) = (model, with_trace) {
            let dim = outcome
                .allocation
                .as_ref()
                .and_then(FittedAllocation::dimension);
            let trace = activation_trace(
                net,
                &outcome.data,
                outcome.data.rows(Split::Test),
                dim,
                cfg.evaluation.gate_mode,
            )?;
            let path = out.join(ACTIVATION_TRACE_FILE);
            trace.save_csv(&path)?;
            written.push(path);
        }
    }

    let mut artifacts = BTreeMap::new();
    for path in &written {
        let name = path
            .file_name()
            .expect("file")
            .to_string_lossy()
            .into_owned();
        artifacts.insert(name, sha256_file(path)?);
    }
    let provenance = RunProvenance {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash,
        seed: cfg.seed,
        artifacts,
    };
    let path = out.join(PROVENANCE_FILE);
    write_json(&path, &provenance)?;
    written.push(path);
    Ok((outcome, written))
}
