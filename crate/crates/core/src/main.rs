use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mtl::datasets::{
    save_with_provenance, sidecar_path, Axis, DatasetProvenance, Split, BURGERS_INPUTS,
};
use mtl::error::{Error, Result};
use mtl::evaluation::{
    activation_trace, export_prediction_grid, GridAxis, GridSpec, MetricsReport, RunStatus,
    Surrogate,
};
use mtl::experiment::{
    evaluate, fit_allocation, load_dataset, load_raw, run_with, write_json, DatasetSource,
    ExperimentConfig, ModelBundle, ACTIVATION_TRACE_FILE, CHECKPOINT_FILE, METRICS_FILE,
};

#[derive(Parser)]
#[command(
    name = "mtl",
    version,
    about = "Task allocation + ClusterNet regression experiments"
)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed (and the training seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel generation and evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltIn {
    Burgers,
    Cylinder,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured (or a built-in) dataset as CSV with a provenance sidecar.
    Generate {
        /// Built-in dataset to use when no config is given.
        #[arg(long, value_enum, default_value = "burgers")]
        dataset: BuiltIn,
    },
    /// Fit the configured allocation and write per-row labels.
    Allocate,
    /// Train the configured model; writes checkpoint, loss trace and metrics.
    Train,
    /// Recompute metrics for a checkpoint on the configured dataset.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Per-row cluster activations of a ClusterNet checkpoint.
    Trace {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Predictions on a Cartesian grid of raw inputs.
    Grid {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// `name=start:end:step` or `name=value`, one per input. Defaults to
        /// the configured Burgers grid.
        #[arg(long = "axis")]
        axes: Vec<String>,
    },
    /// Full pipeline: generate, allocate, train, evaluate, export.
    Run,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.training.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let DatasetSource::Table { path: table, .. } = &mut cfg.dataset.source {
        if table.is_relative() {
            if let Some(dir) = path.parent() {
                *table = dir.join(&*table);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.map(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn checkpoint_path(given: &Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    given
        .clone()
        .unwrap_or_else(|| cfg.output.join(CHECKPOINT_FILE))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Generate { dataset } => generate(&cli, *dataset),
        Command::Allocate => allocate(&cli),
        Command::Train => pipeline(&cli, false),
        Command::Run => pipeline(&cli, true),
        Command::Evaluate { checkpoint } => evaluate_cmd(&cli, checkpoint),
        Command::Trace { checkpoint, split } => trace_cmd(&cli, checkpoint, (*split).into()),
        Command::Grid { checkpoint, axes } => grid_cmd(&cli, checkpoint, axes),
    }
}

fn generate(cli: &Cli, builtin: BuiltIn) -> Result<ExitCode> {
    let (source, hash) = match &cli.config {
        Some(_) => {
            let cfg = load_config(cli)?;
            (cfg.dataset.source.clone(), Some(cfg.hash()?))
        }
        None => (
            match builtin {
                BuiltIn::Burgers => DatasetSource::Burgers {
                    grid: Default::default(),
                },
                BuiltIn::Cylinder => DatasetSource::Cylinder,
            },
            None,
        ),
    };
    let data = load_raw(&mtl::experiment::DatasetConfig {
        source: source.clone(),
        split: [8, 1, 1],
    })?;
    let mut provenance = match &source {
        DatasetSource::Burgers { grid } => DatasetProvenance::burgers(grid, data.len()),
        DatasetSource::Cylinder => DatasetProvenance {
            generator: "synthetic-cylinder".into(),
            generator_version: env!("CARGO_PKG_VERSION").into(),
            rows: data.len(),
            burgers: None,
            config_hash: None,
        },
        DatasetSource::Table { path, .. } => DatasetProvenance {
            generator: format!("table:{}", path.display()),
            generator_version: env!("CARGO_PKG_VERSION").into(),
            rows: data.len(),
            burgers: None,
            config_hash: None,
        },
    };
    provenance.config_hash = hash;
    let path = out_dir(cli, None)?.join("dataset.csv");
    save_with_provenance(&path, &data, &provenance)?;
    log::info!(
        "wrote {} rows to {} (+ {})",
        data.len(),
        path.display(),
        sidecar_path(&path).display()
    );
    Ok(ExitCode::SUCCESS)
}

fn allocate(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let alloc_cfg = cfg
        .allocation
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [allocation] section".into()))?;
    let data = load_dataset(&cfg.dataset, cfg.seed)?;
    let fitted = fit_allocation(alloc_cfg, &data, cfg.seed)?;
    let labels = fitted.labels(&data)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let path = dir.join("labels.csv");
    let mut split_of = vec![""; data.len()];
    for split in Split::ALL {
        for &r in data.rows(split) {
            split_of[r] = split.name();
        }
    }
    let mut wtr = csv::Writer::from_path(&path)?;
    wtr.write_record(["row", "split", "label"])?;
    for (r, l) in labels.iter().enumerate() {
        wtr.write_record([r.to_string(), split_of[r].to_string(), l.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(&path, e))?;
    write_json(&dir.join("allocation.json"), &fitted)?;
    log::info!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn pipeline(cli: &Cli, with_trace: bool) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let (outcome, files) = run_with(&cfg, with_trace)?;
    for f in &files {
        log::info!("wrote {}", f.display());
    }
    Ok(report_status(&outcome.report))
}

fn report_status(report: &MetricsReport) -> ExitCode {
    match report.status {
        RunStatus::Ok => {
            if let Some(mse) = report.get("mse", "test", "all") {
                println!("test mse {mse:.6e}");
            }
            ExitCode::SUCCESS
        }
        RunStatus::Diverges { iteration } => {
            eprintln!("training diverges at iteration {iteration}");
            ExitCode::from(Error::Diverged { iteration }.category().exit_code() as u8)
        }
    }
}

fn load_bundle(path: &Path, cfg: &ExperimentConfig) -> Result<(ModelBundle, Surrogate)> {
    let bundle = ModelBundle::load(path)?;
    if bundle.config_hash != cfg.hash()? {
        log::warn!(
            "{} was produced by a different configuration",
            path.display()
        );
    }
    let model = bundle.surrogate()?;
    Ok((bundle, model))
}

fn evaluate_cmd(cli: &Cli, checkpoint: &Option<PathBuf>) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let (bundle, model) = load_bundle(&checkpoint_path(checkpoint, &cfg), &cfg)?;
    let data = load_dataset(&cfg.dataset, cfg.seed)?;
    let labels = bundle
        .allocation
        .as_ref()
        .map(|a| a.labels(&data))
        .transpose()?;
    let report = evaluate(&model, &data, labels.as_deref(), &cfg.evaluation)?;
    let path = out_dir(cli, Some(&cfg))?.join(METRICS_FILE);
    std::fs::write(&path, report.to_json()?).map_err(|e| Error::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(report_status(&report))
}

fn trace_cmd(cli: &Cli, checkpoint: &Option<PathBuf>, split: Split) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let (bundle, model) = load_bundle(&checkpoint_path(checkpoint, &cfg), &cfg)?;
    let Surrogate::ClusterNet(net) = model else {
        return Err(Error::Config(
            "activation traces need a ClusterNet checkpoint".into(),
        ));
    };
    let data = load_dataset(&cfg.dataset, cfg.seed)?;
    let dim = bundle.allocation.as_ref().and_then(|a| a.dimension());
    let trace = activation_trace(&net, &data, data.rows(split), dim, bundle.gate_mode)?;
    let path = out_dir(cli, Some(&cfg))?.join(ACTIVATION_TRACE_FILE);
    trace.save_csv(&path)?;
    log::info!("wrote {} rows to {}", trace.rows.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_axis(spec: &str) -> Result<GridAxis> {
    let bad = || {
        Error::Config(format!(
            "bad axis `{spec}`, expected name=start:end:step or name=value"
        ))
    };
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let nums = range
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let values = match nums.as_slice() {
        [v] => vec![*v],
        [start, end, step] => Axis::new(*start, *end, *step).values(),
        _ => return Err(bad()),
    };
    Ok(GridAxis {
        name: name.trim().to_string(),
        values,
    })
}

fn grid_cmd(cli: &Cli, checkpoint: &Option<PathBuf>, axes: &[String]) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let (bundle, model) = load_bundle(&checkpoint_path(checkpoint, &cfg), &cfg)?;
    let burgers = match &cfg.dataset.source {
        DatasetSource::Burgers { grid } => Some(*grid),
        _ => None,
    };
    let grid = if axes.is_empty() {
        let b = burgers
            .ok_or_else(|| Error::Config("--axis is required for non-Burgers datasets".into()))?;
        GridSpec {
            axes: [("t", b.t), ("x", b.x), ("v", b.v)]
                .into_iter()
                .map(|(n, a)| GridAxis {
                    name: n.into(),
                    values: a.values(),
                })
                .collect(),
        }
    } else {
        let mut parsed = axes
            .iter()
            .map(|a| parse_axis(a))
            .collect::<Result<Vec<_>>>()?;
        // order axes like the model inputs
        let mut ordered = Vec::with_capacity(bundle.input_names.len());
        for name in &bundle.input_names {
            let i = parsed
                .iter()
                .position(|a| &a.name == name)
                .ok_or_else(|| Error::Config(format!("no --axis for input `{name}`")))?;
            ordered.push(parsed.swap_remove(i));
        }
        if let Some(extra) = parsed.first() {
            return Err(Error::Config(format!("unknown input `{}`", extra.name)));
        }
        GridSpec { axes: ordered }
    };
    let is_burgers_inputs = bundle
        .input_names
        .iter()
        .map(String::as_str)
        .eq(BURGERS_INPUTS);
    let oracle = burgers
        .filter(|_| is_burgers_inputs)
        .map(|b| move |x: &[f64]| vec![b.wave.u(x[0], x[1], x[2])]);
    let path = out_dir(cli, Some(&cfg))?.join("grid.csv");
    let rows = export_prediction_grid(
        &model,
        &bundle.scaling,
        &grid,
        &bundle.target_names,
        bundle.gate_mode,
        oracle.as_ref().map(|f| f as &mtl::evaluation::Oracle),
        &path,
    )?;
    log::info!("wrote {rows} rows to {}", path.display());
    Ok(ExitCode::SUCCESS)
}
