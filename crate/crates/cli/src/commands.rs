use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use stl_core::data::{gen_synthetic, write_csv, Prepared, SyntheticSpec};
use stl_core::experiment::{
    emit_report, evaluate, evaluate_raw, fit_cell, inverse_mse_curves, mean_over_seeds, prediction_traces, run_grid,
    Cell, MetricsReport, Provenance, ReportFormat, ReportRow, RunManifest,
};
use stl_core::models::{load_checkpoint, save_checkpoint};
use stl_core::runfile::{Protocol, RunConfig, RunFile};
use stl_core::selfcheck::run_selfcheck;
use stl_core::train::RunLog;
use stl_core::{Error, Result};

use crate::RunArgs;

pub const CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const METRICS: &str = "metrics.csv";
pub const DATASET_MANIFEST: &str = "dataset.json";
pub const RUN_MANIFEST: &str = "run.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
pub const CURVES: &str = "curves.csv";
pub const TRACES: &str = "traces.csv";
pub const SELFCHECK: &str = "selfcheck.txt";

/// Exit code for a failed self-check.
const CHECK_FAILED: u8 = 4;

fn load_file(args: &RunArgs) -> Result<RunFile> {
    RunFile::load(&args.config)
}

fn resolve(args: &RunArgs, file: &RunFile) -> Result<RunConfig> {
    let cfg = RunConfig::resolve(file, args.preset.map(Into::into))?;
    Ok(match args.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write(path: PathBuf, text: &str) -> Result<String> {
    fs::write(&path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path.display().to_string())
}

fn manifest(
    command: &str,
    cfg: &RunConfig,
    prepared: &Prepared,
    outputs: Vec<String>,
    started: Instant,
) -> Result<RunManifest> {
    Ok(RunManifest {
        command: command.to_string(),
        provenance: Provenance::for_config(cfg)?,
        seeds: cfg.experiment.seeds.clone(),
        runfile: cfg.to_runfile().to_toml(),
        dataset: prepared.manifest.clone(),
        outputs,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn finish(out: &Path, command: &str, cfg: &RunConfig, prepared: &Prepared, mut outputs: Vec<String>, started: Instant) -> Result<()> {
    outputs.push(write(out.join(DATASET_MANIFEST), &format!("{}\n", prepared.manifest.to_json()))?);
    outputs.push(out.join(RUN_MANIFEST).display().to_string());
    let m = manifest(command, cfg, prepared, outputs, started)?;
    write(out.join(RUN_MANIFEST), &m.to_json())?;
    Ok(())
}

pub fn train(args: &RunArgs) -> Result<u8> {
    let started = Instant::now();
    let cfg = resolve(args, &load_file(args)?)?;
    out_dir(&args.out)?;
    let prepared = cfg.prepare()?;
    let cell = Cell {
        model: cfg.model_for(&prepared),
        seed: cfg.train.seed,
        raw_metrics: cfg.experiment.raw_metrics,
    };
    let log_path = args.out.join(TRAIN_LOG);
    if log_path.exists() {
        fs::remove_file(&log_path).map_err(|e| Error::Io {
            path: log_path.display().to_string(),
            source: e,
        })?;
    }
    let mut log = RunLog::open(&log_path)?;
    let outcome = fit_cell(&prepared, &cell, &cfg.train, Some(&mut log))?;
    let ckpt = args.out.join(CHECKPOINT);
    save_checkpoint(&outcome.model, &ckpt)?;

    let report = MetricsReport {
        rows: vec![ReportRow::for_cell(&cfg.dataset.id, &cell, Ok((outcome.mse, outcome.mae)))],
        provenance: Provenance::for_config(&cfg)?,
    };
    let metrics = args.out.join(METRICS);
    emit_report(&report, ReportFormat::Csv, &metrics)?;
    let outputs = vec![
        ckpt.display().to_string(),
        log_path.display().to_string(),
        metrics.display().to_string(),
    ];
    finish(&args.out, "train", &cfg, &prepared, outputs, started)?;
    println!(
        "{} T={} tau={} seed={}: {} epochs (best {}), test mse {:.6} mae {:.6}",
        cell.model.label(),
        cell.model.obs_len,
        cell.model.pred_len,
        cell.seed,
        outcome.history.epochs.len(),
        outcome.history.best_epoch.map_or("-".into(), |e| e.to_string()),
        outcome.mse,
        outcome.mae
    );
    Ok(0)
}

pub fn sweep(args: &RunArgs, ablation: bool, protocol: Option<Protocol>) -> Result<u8> {
    let started = Instant::now();
    let mut file = load_file(args)?;
    if ablation {
        file.experiment.variants = None;
        file.experiment.ablation = Some(true);
    }
    if let Some(p) = protocol {
        file.experiment.protocol = Some(p);
        file.experiment.obs_lens = None;
        file.experiment.pred_lens = None;
        file.experiment.best_t_mode = None;
    }
    let cfg = resolve(args, &file)?;
    out_dir(&args.out)?;
    let prepared = cfg.prepare()?;
    let spec = cfg.experiment_spec(&prepared)?;
    let mut report = run_grid(&spec, &prepared, &cfg.train, args.jobs, Provenance::for_config(&cfg)?)?;
    let ok = report.rows.iter().filter(|r| r.mse.is_some()).count();
    let means = mean_over_seeds(&report.rows);
    if spec.seeds.len() > 1 {
        report.rows.extend(means.iter().cloned());
    }
    let csv = args.out.join(REPORT_CSV);
    let md = args.out.join(REPORT_MD);
    emit_report(&report, ReportFormat::Csv, &csv)?;
    emit_report(&report, ReportFormat::Markdown, &md)?;
    let curves = write(args.out.join(CURVES), &inverse_mse_curves(&means)?)?;
    let outputs = vec![csv.display().to_string(), md.display().to_string(), curves];
    finish(&args.out, "sweep", &cfg, &prepared, outputs, started)?;
    print!("{}", report.to_markdown());
    if ok == 0 {
        return Err(Error::Data(format!(
            "every grid cell failed; see {}",
            csv.display()
        )));
    }
    Ok(0)
}

pub fn eval(args: &RunArgs, checkpoint: &Path, window: usize, channel: usize) -> Result<u8> {
    let started = Instant::now();
    let cfg = resolve(args, &load_file(args)?)?;
    out_dir(&args.out)?;
    let prepared = cfg.prepare()?;
    let model = load_checkpoint(checkpoint)?;
    let mc = model.config().clone();
    if mc.channels != prepared.manifest.channels {
        return Err(Error::Data(format!(
            "checkpoint expects {} channels, dataset has {}",
            mc.channels, prepared.manifest.channels
        )));
    }
    let sets = prepared.windows(mc.obs_len, mc.pred_len)?;
    let bs = cfg.train.batch_size;
    let (mse, mae) = if cfg.experiment.raw_metrics {
        evaluate_raw(&model, &sets.test, bs, &prepared.split.scaler)?
    } else {
        evaluate(&model, &sets.test, bs)?
    };
    let cell = Cell {
        model: mc.clone(),
        seed: model.seed(),
        raw_metrics: cfg.experiment.raw_metrics,
    };
    let report = MetricsReport {
        rows: vec![ReportRow::for_cell(&cfg.dataset.id, &cell, Ok((mse, mae)))],
        provenance: Provenance::for_config(&cfg)?,
    };
    let metrics = args.out.join(METRICS);
    emit_report(&report, ReportFormat::Csv, &metrics)?;
    let md = args.out.join(REPORT_MD);
    emit_report(&report, ReportFormat::Markdown, &md)?;

    if window >= sets.test.len() || channel >= mc.channels {
        return Err(Error::Usage(format!(
            "trace window {window} / channel {channel} out of range ({} windows, {} channels)",
            sets.test.len(),
            mc.channels
        )));
    }
    let w = sets.test.window(window);
    let pred = model.predict(&w.obs, &w.obs_stamps, &w.target_stamps)?;
    let column = |t: &stl_core::Tensor| -> Vec<f64> { (0..t.shape()[0]).map(|i| t.at(&[i, channel])).collect() };
    let pred_col = column(&pred);
    let traces = prediction_traces(&column(&w.obs), &column(&w.target), &[(mc.label(), pred_col)])?;
    let traces = write(args.out.join(TRACES), &traces)?;
    let outputs = vec![metrics.display().to_string(), md.display().to_string(), traces];
    finish(&args.out, "eval", &cfg, &prepared, outputs, started)?;
    println!("{} test mse {mse:.6} mae {mae:.6}", mc.label());
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    out: &Path,
    spec: Option<&str>,
    ablation: bool,
    len: Option<usize>,
    channels: Option<usize>,
    noise: Option<f64>,
    seed: Option<u64>,
) -> Result<u8> {
    let mut s = match (spec, ablation) {
        (Some(_), true) => return Err(Error::Usage("--spec and --ablation are exclusive".into())),
        (Some(text), false) => text.parse::<SyntheticSpec>()?,
        (None, true) => SyntheticSpec::ablation(stl_core::DEFAULT_SEED),
        (None, false) => SyntheticSpec::default(),
    };
    if let Some(v) = len {
        s.len = v;
    }
    if let Some(v) = channels {
        s.channels = v;
    }
    if let Some(v) = noise {
        s.noise = v;
    }
    if let Some(v) = seed {
        s.seed = v;
    }
    s.validate()?;
    let series = gen_synthetic(&s)?;
    let file = fs::File::create(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    write_csv(&series, std::io::BufWriter::new(file))?;
    println!("wrote {} rows x {} channels to {} ({s})", series.len(), series.channels(), out.display());
    Ok(0)
}

pub fn selfcheck(out: Option<&Path>) -> Result<u8> {
    let report = run_selfcheck();
    let text = report.to_string();
    println!("{text}");
    if let Some(dir) = out {
        out_dir(dir)?;
        write(dir.join(SELFCHECK), &format!("{text}\n"))?;
    }
    Ok(if report.passed() { 0 } else { CHECK_FAILED })
}
