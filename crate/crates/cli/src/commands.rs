use std::path::Path;

use anyhow::Context;
use serde_json::json;
use stpotr::data::{
    generate_synthetic, motion_files, read_motion, window, write_motion, MotionSequence, MotionWindow, INPUT_FRAMES,
    MOTION_EXT,
};
use stpotr::evaluation::{evaluate, EvalOptions, LastFrameRepeat};
use stpotr::follow::{
    parse_key_values, run_scenarios, scenario_matrix, simulate as run_one, Forecaster, HumanPath,
    ProportionalController, ScenarioConfig, StartSide,
};
use stpotr::model::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, Predictor, StpotrModel};
use stpotr::training::{train_with, write_loss_csv, TrainOutputs};
use stpotr_tensor::Execution;

use crate::config::{gather, Settings};
use crate::manifest::{run_dir, RunManifest};
use crate::{EvalArgs, GenerateArgs, ModelArgs, PredictArgs, SimulateArgs, TrainArgs, Usage};

const RATE_HZ: f64 = 10.0;

fn settings(args: &ModelArgs, with_train: bool) -> anyhow::Result<Settings> {
    let mut pairs = gather(&args.configs, &args.sets)?;
    if let Some(p) = &args.preset {
        pairs.insert(0, ("preset".into(), p.clone()));
    }
    let flags = [
        (args.no_shared_attention, "use_shared_attention", "false"),
        (args.no_end_attention, "use_end_attention", "false"),
        (args.post_normalized, "pre_normalized", "false"),
        (args.shared_attention_pose_only, "shared_attention_pose_side", "true"),
    ];
    for (on, key, value) in flags {
        if on {
            pairs.push((key.into(), value.into()));
        }
    }
    Settings::build(&pairs, with_train)
}

/// Names `path` in the error unless the error already does.
fn at_path<T>(r: stpotr::Result<T>, path: &Path) -> anyhow::Result<T> {
    match r {
        Err(e @ stpotr::Error::Io { .. }) => Err(e.into()),
        r => r.with_context(|| path.display().to_string()),
    }
}

fn at_rate(seq: MotionSequence) -> stpotr::Result<MotionSequence> {
    if seq.frame_rate_hz == RATE_HZ {
        Ok(seq)
    } else {
        seq.resample(RATE_HZ)
    }
}

/// Windows from every motion file in `dir`, resampled to 10 Hz.
fn load_windows(dir: &Path, stride: usize) -> anyhow::Result<Vec<MotionWindow>> {
    if stride == 0 {
        return Err(Usage("--stride must be positive".into()).into());
    }
    let mut windows = Vec::new();
    for path in motion_files(dir)? {
        let seq = at_path(read_motion(&path), &path)?;
        windows.extend(window(&at_rate(seq)?, stride)?);
    }
    if windows.is_empty() {
        return Err(stpotr::Error::EmptyDataset).with_context(|| format!("no windows in {}", dir.display()));
    }
    Ok(windows)
}

pub fn generate(a: &GenerateArgs) -> anyhow::Result<()> {
    if !(a.duration.is_finite() && a.duration > 0.0) {
        return Err(Usage(format!("--duration must be positive, got {}", a.duration)).into());
    }
    let dir = run_dir(a.out_dir.as_deref(), "generate")?;
    let mut m = RunManifest::start("generate");
    m.seed = Some(a.seed);
    m.config = json!({ "kinds": a.kind.iter().map(|k| k.name()).collect::<Vec<_>>(), "duration_s": a.duration, "count": a.count });
    for kind in &a.kind {
        for seed in a.seed..a.seed + a.count {
            let seq = generate_synthetic(*kind, a.duration, seed)?;
            let path = dir.join(format!("{kind}_{seed:04}.{MOTION_EXT}"));
            write_motion(&path, &seq)?;
            println!("{} ({} frames)", path.display(), seq.len());
            m.artifact(&dir, &path);
        }
    }
    m.finish(&dir)
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let mut s = settings(&a.model, true)?;
    if let Some(seed) = a.seed {
        s.train.seed = seed;
    }
    if let Some(steps) = a.steps {
        s.train.total_steps = steps;
    }
    if let Some(lr) = a.lr {
        s.train.lr_peak = lr;
    }
    s.validate()?;
    let windows = load_windows(&a.data, a.stride)?;

    let dir = run_dir(a.out_dir.as_deref(), "train")?;
    let mut m = RunManifest::start("train");
    m.seed = Some(s.train.seed);
    m.config = json!({ "model": s.model, "train": s.train, "data": a.data, "stride": a.stride, "windows": windows.len() });

    let mut model = StpotrModel::new(s.model.clone(), s.train.seed)?;
    let outputs = TrainOutputs {
        checkpoint_dir: (s.train.checkpoint_every > 0).then(|| dir.join("checkpoints")),
    };
    if let Some(d) = &outputs.checkpoint_dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    eprintln!("training {} parameters on {} windows", model.num_parameters(), windows.len());
    let report = train_with(&mut model, &windows, &s.train, &outputs, |r| {
        if r.step % 100 == 0 {
            eprintln!("step {:>6}  loss {:.5}  lr {:.2e}", r.step, r.loss, r.lr);
        }
    })?;

    let ckpt = dir.join("checkpoint.bin");
    save_checkpoint(&ckpt, &model)?;
    let csv = dir.join("loss.csv");
    write_loss_csv(&csv, &report.losses)?;
    m.artifact(&dir, &ckpt);
    m.artifact(&dir, &csv);
    for c in &report.checkpoints {
        m.artifact(&dir, c);
    }
    println!(
        "final loss {:.5} after {} steps ({:.1} s); checkpoint {}",
        report.final_loss(),
        report.losses.len(),
        report.wall_time_s,
        ckpt.display()
    );
    m.finish(&dir)
}

fn open_model(path: &Path, model: &ModelArgs) -> anyhow::Result<StpotrModel> {
    let loaded = if model.given() {
        let s = settings(model, false)?;
        load_checkpoint_expecting(path, &s.model)
    } else {
        load_checkpoint(path)
    };
    at_path(loaded, path)
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let model = match &a.checkpoint {
        Some(p) => Some(open_model(p, &a.model)?),
        None => None,
    };
    let windows = load_windows(&a.data, a.stride)?;
    let opts = EvalOptions {
        warmup: if a.timed == 0 { 0 } else { 3 },
        timed: a.timed,
        ..EvalOptions::default()
    };
    let report = match &model {
        Some(m) => evaluate(m, &windows, &opts)?,
        None => evaluate(&LastFrameRepeat::new(20), &windows, &opts)?,
    };

    let dir = run_dir(a.out_dir.as_deref(), "eval")?;
    let mut m = RunManifest::start("eval");
    m.config = json!({
        "checkpoint": a.checkpoint,
        "baseline": a.baseline,
        "model": model.as_ref().map(|m| m.config()),
        "data": a.data,
        "stride": a.stride,
        "timed": a.timed,
    });
    let json_path = dir.join("report.json");
    report.write_json(&json_path)?;
    let table = report.to_table();
    let txt_path = dir.join("report.txt");
    std::fs::write(&txt_path, &table).with_context(|| format!("writing {}", txt_path.display()))?;
    m.artifact(&dir, &json_path);
    m.artifact(&dir, &txt_path);
    print!("{table}");
    m.finish(&dir)
}

pub fn predict(a: &PredictArgs) -> anyhow::Result<()> {
    let model = at_path(load_checkpoint(&a.checkpoint), &a.checkpoint)?;
    let seq = at_rate(at_path(read_motion(&a.motion), &a.motion)?)?;
    if a.t_index >= seq.len() || a.t_index + 1 < INPUT_FRAMES {
        return Err(stpotr::Error::InsufficientHistory {
            needed: INPUT_FRAMES,
            available: (a.t_index + 1).min(seq.len()),
        })
        .with_context(|| format!("frame {} of {} in {}", a.t_index, seq.len(), a.motion.display()));
    }
    let observed = &seq.frames[a.t_index + 1 - INPUT_FRAMES..=a.t_index];
    let (pose, traj): (Vec<_>, Vec<_>) = observed.iter().map(|s| s.decompose()).unzip();
    let pred = model.predict(&pose, &traj)?;
    let frames = stpotr::data::window::compose_all(&pred.pose, &pred.traj);
    let out = MotionSequence::new(frames, RATE_HZ)?;

    let dir = run_dir(a.out_dir.as_deref(), "predict")?;
    let mut m = RunManifest::start("predict");
    m.config = json!({ "checkpoint": a.checkpoint, "motion": a.motion, "t_index": a.t_index, "model": model.config() });
    let path = dir.join(format!("prediction.{MOTION_EXT}"));
    write_motion(&path, &out)?;
    m.artifact(&dir, &path);
    println!("{}", path.display());
    m.finish(&dir)
}

pub fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let mut base = ScenarioConfig::default();
    let mut pairs = Vec::new();
    if let Some(p) = &a.scenario {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        pairs.extend(parse_key_values(&text).map_err(|e| Usage(format!("{}: {e}", p.display())))?);
    }
    pairs.extend(gather(&[], &a.sets)?);
    for (k, v) in &pairs {
        base.set(k, v).map_err(|e| Usage(e.to_string()))?;
    }
    if let Some(p) = a.path {
        base.human_path = p;
    }
    if let Some(s) = a.start {
        base.robot_start = s;
    }
    if let Some(d) = a.duration {
        base.duration_s = d;
    }
    if let Some(s) = a.seed {
        base.seed = s;
    }
    base.validate().map_err(|e| Usage(e.to_string()))?;
    let configs = if a.matrix {
        scenario_matrix(&HumanPath::ALL, &StartSide::ALL, &base)
    } else {
        vec![base.clone()]
    };

    let model = match &a.checkpoint {
        Some(p) => Some(at_path(load_checkpoint(p), p)?),
        None => None,
    };
    let forecaster = match &model {
        Some(m) => Forecaster::Model(m as &dyn Predictor),
        None => Forecaster::Oracle,
    };
    let results = if configs.len() == 1 {
        vec![run_one(&configs[0], forecaster, &mut ProportionalController::default())]
    } else {
        run_scenarios(&configs, forecaster, Execution::default())
    };

    let dir = run_dir(a.out_dir.as_deref(), "simulate")?;
    let mut m = RunManifest::start("simulate");
    m.seed = Some(base.seed);
    m.config = json!({
        "scenario": base,
        "matrix": a.matrix,
        "forecaster": if a.oracle { "oracle".into() } else { json!(a.checkpoint) },
    });
    println!("{:<22} {:>8} {:>8} {:>8} {:>8}", "scenario", "reward", "min_sep", "in_cone", "steady");
    for r in results {
        let r = r?;
        let s = &r.summary;
        let name = s.scenario.name();
        r.write(&dir, &name)?;
        m.artifact(&dir, &dir.join(format!("{name}.csv")));
        m.artifact(&dir, &dir.join(format!("{name}.json")));
        println!(
            "{:<22} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            name, s.total_reward, s.min_separation_m, s.in_cone_fraction, s.steady_state_in_cone_fraction
        );
    }
    m.finish(&dir)
}
