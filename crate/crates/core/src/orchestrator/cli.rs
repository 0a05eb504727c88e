//! Command-line surface.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::CorruptionSpec;
use crate::error::{Error, Result};
use crate::nn::TrainOptions;
use crate::repair::{HyperParams, RepairMethod};
use crate::store::{canonical_arch, default_depth, is_supported, supported_list, DefectSpec};

pub const OUTPUT_ENV: &str = "NETREPAIR_OUTPUT_DIR";
pub const DATA_ENV: &str = "NETREPAIR_DATA_DIR";

const METHOD_HELP: &str = "Repair methods:
  weight-patch      (alias apricot)     localize weights, search new values with PSO
  finetune-augment  (alias deeprepair)  fine-tune on data plus augmented failures
  extend-correct    (alias dl2)         train a correction unit on a frozen model";

#[derive(Debug, Parser)]
#[command(
    name = "netrepair",
    version,
    about = "Repair, evaluate and compare small image classifiers",
    after_help = METHOD_HELP,
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train baseline models and save them.
    #[command(name = "train-baseline")]
    TrainBaseline(TrainArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run every repair method on every built-in architecture.
    #[arg(long)]
    pub all: bool,
    #[arg(long = "net_arch", alias = "net-arch")]
    pub net_arch: Option<String>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// Model file to repair instead of training one.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, num_args = 1..)]
    pub method: Vec<String>,
    /// Use the registered default hyperparameters (all methods when none are named).
    #[arg(long)]
    pub auto: bool,
    /// key=value hyperparameter overrides.
    #[arg(long = "additional_param", alias = "additional-param", num_args = 1..)]
    pub additional_param: Vec<String>,
    /// Render a report from existing event logs instead of running.
    #[arg(long = "input_logs", alias = "input-logs")]
    pub input_logs: Option<PathBuf>,
    /// Evaluate the model without repairing it.
    #[arg(long)]
    pub testonly: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[arg(long, env = OUTPUT_ENV, default_value = "netrepair-out")]
    pub output: PathBuf,
    #[arg(long = "data_dir", alias = "data-dir", env = DATA_ENV)]
    pub data_dir: Option<PathBuf>,
    /// Defect injected before repair, as kind:layer:magnitude[:seed].
    #[arg(long)]
    pub defect: Option<String>,
    /// Extra evaluation conditions such as motion3 or glass1.
    #[arg(long = "corruption", num_args = 1..)]
    pub corruptions: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Also show the constraint row of weight-patch in reports.
    #[arg(long = "show_all_constraints")]
    pub show_all_constraints: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Train every built-in architecture.
    #[arg(long)]
    pub all: bool,
    /// Name of the repair tool the baseline is meant for; recorded only.
    #[arg(long)]
    pub tool: Option<String>,
    #[arg(long = "net_arch", alias = "net-arch")]
    pub net_arch: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// key=value overrides of epochs, batch_size, lr, momentum.
    #[arg(long = "additional_param", alias = "additional-param", num_args = 1..)]
    pub additional_param: Vec<String>,
    /// Output file, or directory for several models.
    #[arg(long = "saved_path", alias = "saved-path")]
    pub saved_path: Option<PathBuf>,
    #[arg(long = "data_dir", alias = "data-dir", env = DATA_ENV)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub methods: Vec<RepairMethod>,
    pub net_arch: Option<String>,
    pub depth: Option<usize>,
    pub dataset: Option<String>,
    pub pretrained: Option<PathBuf>,
    pub auto: bool,
    pub additional_param: Vec<String>,
    pub input_logs: Option<PathBuf>,
    pub testonly: bool,
    pub all: bool,
    pub seed: u64,
    pub repetitions: usize,
    pub output: PathBuf,
    pub data_dir: Option<PathBuf>,
    pub defect: Option<DefectSpec>,
    pub corruptions: Vec<CorruptionSpec>,
    pub workers: usize,
    pub show_all_constraints: bool,
    /// Options for training a model from scratch when none is given.
    #[serde(skip)]
    pub baseline: TrainOptions,
}

impl RunConfig {
    /// Minimal repair-free configuration writing to `output`.
    pub fn new(output: impl Into<PathBuf>) -> Self {
        RunConfig {
            methods: Vec::new(),
            net_arch: None,
            depth: None,
            dataset: None,
            pretrained: None,
            auto: false,
            additional_param: Vec::new(),
            input_logs: None,
            testonly: false,
            all: false,
            seed: 0,
            repetitions: 3,
            output: output.into(),
            data_dir: None,
            defect: None,
            corruptions: Vec::new(),
            workers: 1,
            show_all_constraints: false,
            baseline: baseline_options(),
        }
    }

    /// Repetition seeds: `seed, seed + 1, ...`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repetitions as u64).map(|i| self.seed + i).collect()
    }

    pub fn wants_repair(&self) -> bool {
        !self.testonly && (!self.methods.is_empty() || self.all)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth.is_some() && self.net_arch.is_none() && !self.all {
            return Err(Error::Config("--depth needs --net_arch: specify the architecture as well as its depth".into()));
        }
        if let (Some(arch), Some(depth)) = (&self.net_arch, self.depth) {
            if self.pretrained.is_none() && !is_supported(arch, depth) {
                return Err(Error::UnsupportedArchitecture {
                    arch: arch.clone(),
                    depth,
                    supported: supported_list(),
                });
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Config("--repetitions must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("--workers must be >= 1".into()));
        }
        let runs_models = self.testonly || self.wants_repair();
        if !runs_models && self.input_logs.is_none() {
            return Err(Error::Config(
                "nothing to do: name --method, or pass --auto, --all, --testonly or --input_logs".into(),
            ));
        }
        if runs_models {
            if self.dataset.is_none() {
                return Err(Error::Config("--dataset is required to evaluate or repair a model".into()));
            }
            if self.pretrained.is_none() && self.net_arch.is_none() && !self.all {
                return Err(Error::Config("give --pretrained or --net_arch (with --depth) to choose a model".into()));
            }
        }
        HyperParams::default().apply_overrides(&self.additional_param)?;
        Ok(())
    }
}

/// Options used when training baselines (three epochs of SGD).
pub fn baseline_options() -> TrainOptions {
    TrainOptions {
        epochs: 3,
        ..TrainOptions::default()
    }
}

/// Applies `epochs`, `batch_size`, `lr`, `momentum` overrides.
pub fn apply_train_overrides(opts: &mut TrainOptions, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
        let bad = || Error::Config(format!("`{k}` does not accept `{v}`"));
        match k.trim() {
            "epochs" | "epoch" => opts.epochs = v.trim().parse().map_err(|_| bad())?,
            "batch_size" => opts.batch_size = v.trim().parse().map_err(|_| bad())?,
            "lr" => opts.lr = v.trim().parse().map_err(|_| bad())?,
            "momentum" => opts.momentum = v.trim().parse().map_err(|_| bad())?,
            other => {
                return Err(Error::Config(format!(
                    "unknown training parameter `{other}` (known: epochs, batch_size, lr, momentum)"
                )))
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub archs: Vec<(String, usize)>,
    pub tool: Option<String>,
    pub dataset: String,
    pub options: TrainOptions,
    pub saved_path: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Run(Box<RunConfig>),
    TrainBaseline(TrainConfig),
}

fn resolve_arch(arch: &str, depth: Option<usize>) -> Result<(String, usize)> {
    let canonical = canonical_arch(arch).to_string();
    let depth = match depth {
        Some(d) => d,
        None => default_depth(&canonical).ok_or_else(|| Error::UnsupportedArchitecture {
            arch: arch.to_string(),
            depth: 0,
            supported: supported_list(),
        })?,
    };
    Ok((canonical, depth))
}

impl RunArgs {
    pub fn into_config(self) -> Result<RunConfig> {
        let mut methods = Vec::new();
        for m in &self.method {
            let m: RepairMethod = m.parse()?;
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        if (self.auto || self.all) && methods.is_empty() {
            methods = RepairMethod::ALL.to_vec();
        }
        if self.depth.is_some() && self.net_arch.is_none() && !self.all {
            return Err(Error::Config("--depth needs --net_arch: specify the architecture as well as its depth".into()));
        }
        let (net_arch, depth) = match &self.net_arch {
            Some(a) if self.pretrained.is_none() => {
                let (a, d) = resolve_arch(a, self.depth)?;
                (Some(a), Some(d))
            }
            Some(a) => (Some(canonical_arch(a).to_string()), self.depth),
            None => (None, self.depth),
        };
        let defect = self.defect.as_deref().map(str::parse).transpose()?;
        let corruptions = self
            .corruptions
            .iter()
            .map(|c| c.parse())
            .collect::<Result<Vec<CorruptionSpec>>>()?;
        let config = RunConfig {
            methods,
            net_arch,
            depth,
            dataset: self.dataset,
            pretrained: self.pretrained,
            auto: self.auto,
            additional_param: self.additional_param,
            input_logs: self.input_logs,
            testonly: self.testonly,
            all: self.all,
            seed: self.seed,
            repetitions: self.repetitions,
            output: self.output,
            data_dir: self.data_dir,
            defect,
            corruptions,
            workers: self.workers,
            show_all_constraints: self.show_all_constraints,
            baseline: baseline_options(),
        };
        config.validate()?;
        Ok(config)
    }
}

impl TrainArgs {
    pub fn into_config(self) -> Result<TrainConfig> {
        let archs = if self.all {
            crate::store::SUPPORTED.iter().map(|(a, d)| (a.to_string(), *d)).collect()
        } else {
            let arch = self
                .net_arch
                .as_deref()
                .ok_or_else(|| Error::Config("train-baseline needs --net_arch or --all".into()))?;
            let (a, d) = resolve_arch(arch, self.depth)?;
            if !is_supported(&a, d) {
                return Err(Error::UnsupportedArchitecture {
                    arch: a,
                    depth: d,
                    supported: supported_list(),
                });
            }
            vec![(a, d)]
        };
        let dataset = self
            .dataset
            .ok_or_else(|| Error::Config("train-baseline needs --dataset".into()))?;
        let mut options = TrainOptions {
            seed: self.seed,
            ..baseline_options()
        };
        apply_train_overrides(&mut options, &self.additional_param)?;
        Ok(TrainConfig {
            archs,
            tool: self.tool,
            dataset,
            options,
            saved_path: self.saved_path,
            data_dir: self.data_dir,
        })
    }
}

/// Parses an argument vector (program name first). Help and version
/// requests come back as [`Error::Config`] carrying the rendered text.
pub fn parse_cli<I, T>(argv: I) -> Result<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Config(e.to_string()))?;
    cli.into_invocation()
}

impl Cli {
    pub fn into_invocation(self) -> Result<Invocation> {
        match self.command {
            Some(Command::TrainBaseline(args)) => Ok(Invocation::TrainBaseline(args.into_config()?)),
            None => Ok(Invocation::Run(Box::new(self.run.into_config()?))),
        }
    }
}
