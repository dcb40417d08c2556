//! Acceptance suite: runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails. Built with `harness = false`
//! so the lines are always visible.
//!
//! The ETTh1 criterion needs the public CSV; point `STL_ETTH1_CSV` at it.
//! Without it the criterion prints NOT RUN.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::Mat;
use stl_core::autodiff::Tape;
use stl_core::calendar::{CalendarStamps, Component};
use stl_core::data::{gen_synthetic, prepare, Batch, Prepared, SplitRatio, SyntheticSpec};
use stl_core::experiment::{mean_over_seeds, run_grid, Cell, ExperimentSpec, Provenance, ReportRow};
use stl_core::models::{ablation_variants, make_model, moving_average_matrix, BaselineModel, ModelConfig};
use stl_core::nn::{Activation, DateTimeEmbedding, ParamStore, ResLBlock, SpatialAttention};
use stl_core::runfile::{Preset, RunConfig};
use stl_core::selfcheck::{hourly_stamps, layer_checks, model_checks, op_checks};
use stl_core::train::{batch_gradients, overfit_batch, TrainConfig};
use stl_core::{Rng, Tensor};

const SEED: u64 = 2021;

type Criterion = (&'static str, Duration, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let started = Instant::now();
    let out = f();
    let secs = started.elapsed().as_secs_f64();
    let within = started.elapsed() <= limit;
    let budget = format!("{secs:.1}s of {}s", limit.as_secs());
    match out {
        Outcome::Pass(d) if within => Outcome::Pass(format!("{d}; {budget}")),
        Outcome::Pass(d) => Outcome::Fail(format!("{d}; over budget: {budget}")),
        Outcome::Fail(d) => Outcome::Fail(format!("{d}; {budget}")),
        n => n,
    }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

// ── 1. gradient suite ───────────────────────────────────────────────

fn gradient_suite() -> Outcome {
    let mut checks = op_checks();
    checks.extend(layer_checks());
    checks.extend(model_checks());
    let worst = checks.iter().map(|c| c.max_error).fold(0.0, f64::max);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let has_tiny = checks.iter().any(|c| c.name == "model:stl_tiny");
    verdict(
        failed.is_empty() && has_tiny,
        format!("{} checks, worst relative error {worst:.2e} (limit 1e-4), failed {failed:?}", checks.len()),
    )
}

// ── 2. layer oracles ────────────────────────────────────────────────

const ORACLE_INPUTS: u64 = 100;

fn rows(t: &Tensor) -> Mat {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

fn max_diff(a: &Mat, b: &Mat) -> f64 {
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        if ra.len() != rb.len() {
            return f64::INFINITY;
        }
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

fn layer_oracles() -> Outcome {
    let mut worst = [0.0f64; 4];
    for seed in 0..ORACLE_INPUTS {
        let mut rng = Rng::new(seed);

        let (c, l) = (2 + rng.below(4), 1 + rng.below(7));
        let x = Tensor::uniform(&[c, l], -2.0, 2.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let y = SpatialAttention::default().forward(&mut tape, v).unwrap();
        worst[0] = worst[0].max(max_diff(&rows(tape.value(y)), &common::attention(&rows(&x))));

        let comps = [Component::Month, Component::Weekday, Component::Hour];
        let len = 1 + rng.below(10);
        let codes = (0..len)
            .flat_map(|_| comps.iter().map(|c| rng.below(c.cardinality(4)) as u16).collect::<Vec<_>>())
            .collect();
        let stamps = CalendarStamps::new(comps.to_vec(), 4, len, codes).unwrap();
        let mut store = ParamStore::new();
        let e = DateTimeEmbedding::new(&mut store, "dt", &comps, 4, &mut rng).unwrap();
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let y = e.forward(&mut tape, &p, &stamps, 1, len).unwrap();
        worst[1] = worst[1].max(max_diff(&rows(tape.value(y)), &vec![common::datetime(&store, "dt", &stamps)]));

        let (i, o) = (1 + rng.below(6), 1 + rng.below(6));
        let mut store = ParamStore::new();
        let blk = ResLBlock::new(&mut store, "b", i, o, Activation::Silu, 0.0, None, &mut rng).unwrap();
        let x = Tensor::uniform(&[3, i], -2.0, 2.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let v = tape.constant(x.clone());
        let y = blk.forward(&mut tape, &p, v).unwrap();
        let expect: Mat = rows(&x).iter().map(|r| common::resl(&store, "b", common::silu, r)).collect();
        worst[2] = worst[2].max(max_diff(&rows(tape.value(y)), &expect));

        let t = 1 + rng.below(40);
        let kernel = 2 * rng.below(13) + 1;
        let x = Tensor::uniform(&[1, 2, t], -2.0, 2.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let (trend, rem) = BaselineModel::decompose(&mut tape, &moving_average_matrix(t, kernel), v).unwrap();
        let xr = rows(&x.reshape(&[2, t]).unwrap());
        let tr: Mat = xr.iter().map(|r| common::moving_average(r, kernel)).collect();
        let rm: Mat = xr.iter().zip(&tr).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect()).collect();
        worst[3] = worst[3]
            .max(max_diff(&rows(&tape.value(trend).reshape(&[2, t]).unwrap()), &tr))
            .max(max_diff(&rows(&tape.value(rem).reshape(&[2, t]).unwrap()), &rm));
    }
    verdict(
        worst.iter().all(|&w| w <= 1e-10),
        format!(
            "{ORACLE_INPUTS} inputs each; max |diff| attention {:.1e}, datetime {:.1e}, resl {:.1e}, decomposition {:.1e} (limit 1e-10)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

// ── 3. ablation ordering ────────────────────────────────────────────

const ABLATION_SEEDS: [u64; 3] = [2021, 2022, 2023];

fn ablation_data() -> Prepared {
    let series = gen_synthetic(&SyntheticSpec::ablation(SEED)).unwrap();
    prepare(
        "synthetic:ablation",
        &series,
        SplitRatio::new(7, 1, 2),
        &[Component::Weekday, Component::Hour],
        4,
    )
    .unwrap()
}

fn ablation_ordering() -> Outcome {
    let prepared = ablation_data();
    let mut base = ModelConfig::stl(48, 24, 4, 64);
    base.datetime_components = vec![Component::Weekday, Component::Hour];
    let spec = ExperimentSpec {
        dataset: "synthetic".into(),
        variants: ablation_variants(&base),
        obs_lens: vec![48],
        pred_lens: vec![24],
        seeds: ABLATION_SEEDS.to_vec(),
        best_t_mode: false,
        raw_metrics: false,
    };
    let train = TrainConfig::new(1e-3, 0.9);
    let provenance = Provenance::for_config(&spec).unwrap();
    let report = match run_grid(&spec, &prepared, &train, jobs(), provenance) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("grid failed: {e}")),
    };
    let means = mean_over_seeds(&report.rows);
    let mse: Vec<(String, f64)> = means.iter().map(|r| (r.variant.clone(), r.mse.unwrap_or(f64::NAN))).collect();
    let labels: Vec<&str> = mse.iter().map(|(v, _)| v.as_str()).collect();
    if labels != ["stl", "core+spatial", "core", "linear"] {
        return Outcome::Fail(format!("unexpected variants {labels:?}"));
    }
    let gaps: Vec<f64> = mse.windows(2).map(|w| (w[1].1 - w[0].1) / w[1].1).collect();
    let text = mse.iter().map(|(v, m)| format!("{v} {m:.5}")).collect::<Vec<_>>().join(" < ");
    let gap_text = gaps.iter().map(|g| format!("{:.2}%", 100.0 * g)).collect::<Vec<_>>().join(", ");
    verdict(
        gaps.iter().all(|&g| g > 0.01),
        format!("mean test MSE over 3 seeds: {text}; relative gaps {gap_text} (need > 1%)"),
    )
}

// ── 4. overfit one batch ────────────────────────────────────────────

const OVERFIT_STEPS: usize = 2000;

fn overfit() -> Outcome {
    let (t, tau, c) = (8, 4, 2);
    let mut rng = Rng::new(SEED);
    let b = 4;
    let batch = Batch {
        x: Tensor::uniform(&[b, t, c], -1.0, 1.0, &mut rng).unwrap(),
        y: Tensor::uniform(&[b, tau, c], -1.0, 1.0, &mut rng).unwrap(),
        obs_stamps: hourly_stamps(b, t, 0),
        target_stamps: hourly_stamps(b, tau, t),
    };
    let mut model = make_model(&ModelConfig::stl(t, tau, c, 16), SEED).unwrap();
    let losses = match overfit_batch(&mut model, &batch, OVERFIT_STEPS, 1e-2) {
        Ok(l) => l,
        Err(e) => return Outcome::Fail(format!("training aborted: {e}")),
    };
    let (last, _) = batch_gradients(&model, &batch, None).unwrap();
    verdict(
        last < 1e-3 && last < losses[10],
        format!("train MSE {:.3e} at step 0, {:.3e} at step 10, {last:.3e} after {OVERFIT_STEPS} steps (need < 1e-3)", losses[0], losses[10]),
    )
}

// ── 5. ETTh1 ────────────────────────────────────────────────────────

fn etth1_cell(path: &str, variant: &str, t: usize, tau: usize) -> Result<f64, String> {
    let text = format!(
        "[dataset]\nid = \"etth1\"\npath = {path:?}\n[model]\nT = {t}\ntau = {tau}\n[experiment]\nvariants = [{variant:?}]\n"
    );
    let cfg = RunConfig::from_toml(&text, Some(Preset::Etth1)).map_err(|e| e.to_string())?;
    let prepared = cfg.prepare().map_err(|e| e.to_string())?;
    let spec = cfg.experiment_spec(&prepared).map_err(|e| e.to_string())?;
    let report = run_grid(&spec, &prepared, &cfg.train, jobs(), Provenance::for_config(&cfg).unwrap())
        .map_err(|e| e.to_string())?;
    report.rows[0].mse.ok_or_else(|| report.rows[0].status.clone())
}

fn etth1() -> Outcome {
    let Ok(path) = std::env::var("STL_ETTH1_CSV") else {
        return Outcome::NotRun("STL_ETTH1_CSV is not set; the ETTh1 CSV is not on disk".into());
    };
    let cells = [
        ("linear", 336, 0.327, 0.02),
        ("stl", 336, 0.319, 0.15 * 0.319),
        ("stl", 48, 0.310, 0.15 * 0.310),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (variant, t, target, tol) in cells {
        match etth1_cell(&path, variant, t, 24) {
            Ok(m) => {
                let hit = (m - target).abs() <= tol;
                ok &= hit;
                parts.push(format!("{variant} T={t}: {m:.4} (target {target} ± {tol:.4}) {}", if hit { "ok" } else { "miss" }));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{variant} T={t}: error {e}"));
            }
        }
    }
    verdict(ok, parts.join("; "))
}

// ── 6. gate semantics ───────────────────────────────────────────────

fn gate_semantics() -> Outcome {
    // Inactive route: T above the threshold.
    let mut cfg = ModelConfig::stl(8, 4, 3, 6);
    cfg.theta_t = 4;
    let model = make_model(&cfg, SEED).unwrap();
    let mut zeroed = model.clone();
    let n = zeroed.params_mut().zero_prefix("temporal.");
    let mut rng = Rng::new(SEED);
    let x = Tensor::uniform(&[2, 8, 3], -2.0, 2.0, &mut rng).unwrap();
    let (obs, target) = (hourly_stamps(2, 8, 0), hourly_stamps(2, 4, 8));
    let a = model.predict(&x, &obs, &target).unwrap();
    let b = zeroed.predict(&x, &obs, &target).unwrap();
    let inert = n > 0 && a.bit_eq(&b);

    // Active route on spiked data: the gates get gradient on the first step.
    let prepared = ablation_data();
    let sets = prepared.windows(48, 24).unwrap();
    let batch = sets.train.batch(&(0..32).collect::<Vec<_>>());
    let mut cfg = ModelConfig::stl(48, 24, 4, 16);
    cfg.datetime_components = vec![Component::Weekday, Component::Hour];
    let model = make_model(&cfg, SEED).unwrap();
    let (_, grads) = batch_gradients(&model, &batch, None).unwrap();
    let gate_grads: Vec<(String, f64)> = model
        .params()
        .iter()
        .zip(&grads)
        .filter(|(p, _)| p.name.ends_with(".gate"))
        .map(|(p, g)| (p.name.clone(), g.as_ref().map_or(0.0, |g| g.data()[0])))
        .collect();
    let flowing = gate_grads.len() == 2 && gate_grads.iter().all(|(_, g)| *g != 0.0 && g.is_finite());
    let grads_text = gate_grads.iter().map(|(n, g)| format!("{n} {g:.3e}")).collect::<Vec<_>>().join(", ");
    verdict(
        inert && flowing,
        format!("T>θ_T: {n} temporal tensors zeroed, outputs bit-identical {inert}; T≤θ_T first-step gradients: {grads_text}"),
    )
}

// ── 7. determinism ──────────────────────────────────────────────────

fn determinism() -> Outcome {
    let prepared = ablation_data();
    let mut model = ModelConfig::stl(48, 24, 4, 32);
    model.datetime_components = vec![Component::Weekday, Component::Hour];
    model.dropout = 0.1;
    let cell = Cell { model, seed: SEED, raw_metrics: false };
    let train = TrainConfig { epochs: 3, ..TrainConfig::new(1e-3, 0.9) };
    let run = || {
        let r = stl_core::experiment::run_cell(&prepared, &cell, &train, None);
        let row = ReportRow::for_cell("synthetic", &cell, r);
        (row.mse.map(f64::to_bits), row.mae.map(f64::to_bits), row)
    };
    let (a, b) = (run(), run());
    let same = a.0.is_some() && a.0 == b.0 && a.1 == b.1 && a.2 == b.2;
    verdict(
        same,
        format!("seed {SEED}: mse {:?} / {:?}, mae bits equal {}", a.2.mse, b.2.mse, a.1 == b.1),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("gradient suite", Duration::from_secs(60), gradient_suite),
        ("layer oracles", Duration::from_secs(30), layer_oracles),
        ("ablation ordering", Duration::from_secs(15 * 60), ablation_ordering),
        ("overfit one batch", Duration::from_secs(120), overfit),
        ("etth1 reproduction", Duration::from_secs(3 * 20 * 60), etth1),
        ("gate semantics", Duration::from_secs(60), gate_semantics),
        ("determinism", Duration::from_secs(120), determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let line = match timed(limit, f) {
            Outcome::Pass(d) => format!("PASS     criterion {} {name}: {d}", i + 1),
            Outcome::Fail(d) => {
                failed += 1;
                format!("FAIL     criterion {} {name}: {d}", i + 1)
            }
            Outcome::NotRun(d) => format!("NOT RUN  criterion {} {name}: {d}", i + 1),
        };
        println!("{line}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
