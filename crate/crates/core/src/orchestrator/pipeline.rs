use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use super::cli::{RunConfig, TrainConfig};
use super::datasets::{family, load_named};
use super::defaults::default_params;
use super::events::{now_ms, read_events, EventLog};
use super::record::{Aggregate, RepetitionResult, Resources, RunRecord, RunStatus};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport};
use crate::monitor::ResourceMonitor;
use crate::nn::{train_epochs, TrainOptions};
use crate::repair::{repair, RepairConfig, RepairData, RepairMethod};
use crate::store::{build_architecture, canonical_arch, inject_defect, load_model, save_model, Model, SUPPORTED};

pub const EVENTS_FILE: &str = "events.jsonl";

/// A model ready for repair together with its data.
struct Target {
    name: String,
    arch: String,
    model: Model,
    data: RepairData,
    before: MetricsReport,
}

fn resources(monitor: ResourceMonitor, started_ms: u64) -> Resources {
    let usage = monitor.stop();
    Resources {
        started_ms,
        finished_ms: now_ms(),
        wall_clock_s: usage.wall_clock_s,
        peak_memory_bytes: usage.peak_memory_bytes,
    }
}

/// Trains a registry architecture on `train`, logging each epoch.
pub fn train_baseline(
    arch: &str,
    depth: usize,
    train: &LabeledDataset,
    opts: &TrainOptions,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<Model> {
    let mut model = build_architecture(arch, depth, train.image_shape(), train.class_count(), opts.seed)?;
    train_epochs(&mut model, train, opts, &mut |s| on_epoch(s.epoch, s.loss))?;
    model.metadata.insert(
        "training".into(),
        json!({"epochs": opts.epochs, "batch_size": opts.batch_size, "lr": opts.lr, "momentum": opts.momentum, "seed": opts.seed}),
    );
    Ok(model)
}

fn check_fit(model: &Model, train: &LabeledDataset) -> Result<()> {
    if model.input_shape != train.image_shape() || model.num_classes != train.class_count() {
        return Err(Error::Config(format!(
            "model expects {:?} inputs and {} classes; dataset has {:?} and {}",
            model.input_shape,
            model.num_classes,
            train.image_shape(),
            train.class_count()
        )));
    }
    Ok(())
}

fn model_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_suffix("_baseline").map(String::from).unwrap_or(stem)
}

fn prepare_targets(config: &RunConfig, log: &EventLog) -> Result<Vec<Target>> {
    let dataset = config.dataset.as_deref().expect("validated");
    let (train, test) = load_named(dataset, config.data_dir.as_deref())?;
    log.emit(
        "setup",
        "data",
        "loaded",
        json!({"dataset": dataset, "train": train.len(), "test": test.len(), "classes": train.class_count(), "image_shape": train.image_shape()}),
    )?;
    let mut models: Vec<(String, String, Model)> = Vec::new();
    if config.all {
        if config.pretrained.is_some() {
            log::warn!("--all trains every built-in architecture; ignoring --pretrained");
        }
        for (arch, depth) in SUPPORTED {
            models.push((format!("{}_{arch}{depth}", family(dataset)), arch.to_string(), fresh(config, arch, *depth, &train, log)?));
        }
    } else if let Some(path) = &config.pretrained {
        let model = load_model(path)?;
        if let Some(arch) = &config.net_arch {
            if canonical_arch(arch) != canonical_arch(&model.arch_name) {
                return Err(Error::Config(format!(
                    "--net_arch {arch} does not match the pretrained model ({})",
                    model.arch_name
                )));
            }
        }
        if let Some(depth) = config.depth {
            if depth != model.depth {
                return Err(Error::Config(format!(
                    "--depth {depth} does not match the pretrained model ({})",
                    model.depth
                )));
            }
        }
        check_fit(&model, &train)?;
        log.emit("setup", "model", "loaded", json!({"path": path.display().to_string(), "arch": model.arch_name, "depth": model.depth}))?;
        models.push((model_name(path), model.arch_name.clone(), model));
    } else {
        let arch = config.net_arch.as_deref().expect("validated");
        let depth = config.depth.expect("validated");
        models.push((format!("{}_{arch}{depth}", family(dataset)), arch.to_string(), fresh(config, arch, depth, &train, log)?));
    }

    let mut targets = Vec::new();
    for (name, arch, model) in models {
        let model = match &config.defect {
            Some(spec) => {
                let bad = inject_defect(&model, spec, Some(&train))?;
                let file = format!("{name}_defect.air");
                save_model(&bad, config.output.join(&file))?;
                log.emit(&name, "setup", "defect", json!({"spec": spec, "file": file}))?;
                bad
            }
            None => model,
        };
        let mut data = RepairData::new(train.clone(), test.clone())?;
        data.corruptions = config.corruptions.clone();
        let before = evaluate(&model, &data.test, &data.constraint, &data.corruptions)?;
        log.emit(&name, "evaluate", "before", serde_json::to_value(&before)?)?;
        targets.push(Target {
            name,
            arch,
            model,
            data,
            before,
        });
    }
    Ok(targets)
}

fn fresh(config: &RunConfig, arch: &str, depth: usize, train: &LabeledDataset, log: &EventLog) -> Result<Model> {
    let name = format!("{}_{arch}{depth}", family(config.dataset.as_deref().unwrap_or("")));
    let opts = TrainOptions {
        seed: config.seed,
        ..config.baseline.clone()
    };
    let mut err = Ok(());
    let model = train_baseline(arch, depth, train, &opts, &mut |epoch, loss| {
        if err.is_ok() {
            err = log.emit(&name, "train", "epoch", json!({"epoch": epoch, "loss": loss}));
        }
    })?;
    err?;
    let file = format!("{name}_baseline.air");
    save_model(&model, config.output.join(&file))?;
    log.emit(&name, "train", "saved", json!({"file": file}))?;
    Ok(model)
}

fn run_method(config: &RunConfig, target: &Target, method: RepairMethod, log: &EventLog) -> RunRecord {
    let started = now_ms();
    let monitor = ResourceMonitor::start();
    let run_id = format!("{}:{method}", target.name);
    let dataset = config.dataset.clone().unwrap_or_default();
    let mut params = default_params(method, &target.arch, &dataset);
    let mut error = None;
    if let Err(e) = params.apply_overrides(&config.additional_param) {
        error = Some(e.to_string());
    }
    let config_echo = json!({
        "method": method,
        "params": params,
        "seeds": config.seeds(),
        "dataset": dataset,
        "defect": config.defect,
    });
    let _ = log.emit(&run_id, "repair", "start", config_echo.clone());
    let mut reps = Vec::new();
    if error.is_none() {
        for seed in config.seeds() {
            match repetition(config, target, method, &params, seed, &run_id, log) {
                Ok(r) => reps.push(r),
                Err(e) => {
                    let _ = log.emit(&run_id, "repair", "failed", json!({"seed": seed, "error": e.to_string()}));
                    log::error!("{run_id} seed {seed} failed: {e}");
                    error = Some(e.to_string());
                }
            }
        }
    }
    let record = RunRecord {
        run_id: run_id.clone(),
        model: target.name.clone(),
        method: Some(method),
        status: if error.is_none() { RunStatus::Ok } else { RunStatus::Failed },
        error,
        baseline: target.before.clean(),
        aggregate: Aggregate::of(&reps),
        repetitions: reps,
        config: config_echo,
        resources: resources(monitor, started),
    };
    let _ = log.emit(&run_id, "report", "record", serde_json::to_value(&record).unwrap_or(Value::Null));
    record
}

fn repetition(
    config: &RunConfig,
    target: &Target,
    method: RepairMethod,
    params: &crate::repair::HyperParams,
    seed: u64,
    run_id: &str,
    log: &EventLog,
) -> Result<RepetitionResult> {
    let started = now_ms();
    let mut rc = RepairConfig::new(method, params.clone(), seed);
    rc.repetitions = config.repetitions;
    let mut sink_err = Ok(());
    let mut outcome = repair(&target.model, &target.data, &rc, &mut |event, mut payload| {
        if let Value::Object(map) = &mut payload {
            map.insert("seed".into(), seed.into());
        }
        if sink_err.is_ok() {
            sink_err = log.emit(run_id, "repair", event, payload);
        }
    })?;
    sink_err?;
    let file = format!("{}_repaired_{method}_s{seed}.air", target.name);
    save_model(outcome.model(), config.output.join(&file))?;
    outcome.log_ref = Some(log.path().display().to_string());
    let result = RepetitionResult {
        seed,
        before: outcome.before.clean(),
        after: outcome.after.clean(),
        fix_rate: outcome.fix_rate,
        retention: outcome.retention,
        model_file: file,
        resources: Resources {
            started_ms: started,
            finished_ms: now_ms(),
            wall_clock_s: outcome.wall_clock_s,
            peak_memory_bytes: outcome.peak_memory_bytes,
        },
    };
    log.emit(run_id, "repair", "repetition", serde_json::to_value(&result)?)?;
    Ok(result)
}

fn evaluation_record(target: &Target, resources: Resources, log: &EventLog) -> RunRecord {
    let run_id = format!("{}:eval", target.name);
    let record = RunRecord {
        run_id: run_id.clone(),
        model: target.name.clone(),
        method: None,
        status: RunStatus::Ok,
        error: None,
        baseline: target.before.clean(),
        repetitions: Vec::new(),
        aggregate: None,
        config: json!({"testonly": true, "report": target.before}),
        resources,
    };
    let _ = log.emit(&run_id, "report", "record", serde_json::to_value(&record).unwrap_or(Value::Null));
    record
}

/// Records stored in prior event logs (the `record` events), in file order.
pub fn replay_logs(path: &Path) -> Result<Vec<RunRecord>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::new();
    for f in files {
        for ev in read_events(&f)? {
            if ev.event == "record" {
                out.push(serde_json::from_value(ev.payload)?);
            }
        }
    }
    Ok(out)
}

/// Evaluates, repairs and aggregates as configured. Every event goes to
/// `<output>/events.jsonl`; model files are written atomically.
pub fn run_pipeline(config: &RunConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let mut records = match &config.input_logs {
        Some(p) => replay_logs(p)?,
        None => Vec::new(),
    };
    if !(config.testonly || config.wants_repair()) {
        return Ok(records);
    }
    fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    let log = EventLog::open(config.output.join(EVENTS_FILE))?;
    log.emit(
        "pipeline",
        "setup",
        "config",
        serde_json::to_value(config)?,
    )?;
    let started = now_ms();
    let monitor = ResourceMonitor::start();
    let targets = prepare_targets(config, &log)?;
    let setup = resources(monitor, started);
    if config.testonly {
        records.extend(targets.iter().map(|t| evaluation_record(t, setup, &log)));
        return Ok(records);
    }
    let jobs: Vec<(&Target, RepairMethod)> = targets
        .iter()
        .flat_map(|t| config.methods.iter().map(move |m| (t, *m)))
        .collect();
    let run = |(t, m): &(&Target, RepairMethod)| run_method(config, t, *m, &log);
    let done: Vec<RunRecord> = if config.workers > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?
            .install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };
    records.extend(done);
    Ok(records)
}

/// Trains and saves one baseline per configured architecture. Returns the
/// written paths.
pub fn run_train_baseline(config: &TrainConfig) -> Result<Vec<PathBuf>> {
    let (train, test) = load_named(&config.dataset, config.data_dir.as_deref())?;
    let single_file = config.archs.len() == 1
        && config
            .saved_path
            .as_ref()
            .is_some_and(|p| p.extension().is_some());
    let dir = match &config.saved_path {
        Some(p) if single_file => p.parent().map(Path::to_path_buf).unwrap_or_default(),
        Some(p) => p.clone(),
        None => PathBuf::from("."),
    };
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut written = Vec::new();
    for (arch, depth) in &config.archs {
        let mut model = train_baseline(arch, *depth, &train, &config.options, &mut |epoch, loss| {
            log::info!("{arch}{depth} epoch {epoch}: loss {loss:.4}");
        })?;
        if let Some(tool) = &config.tool {
            model.metadata.insert("tool".into(), json!(tool));
        }
        let acc = crate::eval::accuracy(&model, &test)?;
        log::info!("{arch}{depth}: test accuracy {:.4}", acc);
        let path = if single_file {
            config.saved_path.clone().expect("checked")
        } else {
            dir.join(format!("{}_{arch}{depth}_baseline.air", family(&config.dataset)))
        };
        save_model(&model, &path)?;
        written.push(path);
    }
    Ok(written)
}
