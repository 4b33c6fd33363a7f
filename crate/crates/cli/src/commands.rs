use std::fs;
use std::path::{Path, PathBuf};

use soc_dfn::battsim::{self, CellParams, CycleConfig, SensorNoise};
use soc_dfn::dataset::{self, CsvKind, Dataset, Normalizer};
use soc_dfn::network::{self, LayerSpec, Network, RegConfig};
use soc_dfn::optimize::OptimizerConfig;
use soc_dfn::persist::{self, ModelMeta};
use soc_dfn::presets::{Preset, HIDDEN_UNITS};
use soc_dfn::rng::derive_seed;
use soc_dfn::train::{self, CvOptions, Examples, TrainConfig};

use crate::args::{Command, CrossvalArgs, EvaluateArgs, GenDataArgs, ModelArgs, PredictArgs, TrainArgs};
use crate::Failure;

type CmdResult = Result<(), Failure>;

// Seed streams derived from --seed.
const SPLIT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

pub fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Crossval(a) => crossval(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
    }
}

fn gen_data(a: GenDataArgs) -> CmdResult {
    let cycle = CycleConfig {
        duration: a.duration,
        dt: a.dt,
        peak_discharge: a.peak_discharge,
        regen_fraction: a.regen_fraction,
        seed: a.seed,
    };
    let params = CellParams {
        capacity: a.capacity,
        r_internal: a.r_internal,
        ambient: a.ambient,
        ..CellParams::default()
    };
    let noise = SensorNoise {
        voltage_std: a.noise_voltage,
        current_std: a.noise_current,
        temperature_std: a.noise_temp,
    };
    let data = battsim::synthesize(&cycle, &params, a.soc0, &noise)?;
    data.save_csv(&a.out)?;
    println!("wrote {} rows to {}", data.len(), a.out.display());
    Ok(())
}

/// Resolved architecture and training configuration.
struct Plan {
    specs: Vec<LayerSpec>,
    cfg: TrainConfig,
}

fn plan(m: &ModelArgs, seed: u64) -> Result<Plan, Failure> {
    let preset = m.preset.map(Preset::from);
    let units = m.units.unwrap_or(HIDDEN_UNITS);
    let hidden = m.hidden.or(preset.map(Preset::dense_layers)).unwrap_or(2);
    let dropout = m.dropout.or(preset.map(Preset::dropout)).unwrap_or(0.0);
    let batch = m.batch.or(preset.map(Preset::batch_size)).unwrap_or(128);
    let epochs = m.epochs.or(preset.map(Preset::epochs)).unwrap_or(50);
    if units == 0 {
        return Err(Failure::usage("--units must be at least 1"));
    }
    let specs = LayerSpec::stack(dataset::NUM_FEATURES, units, hidden, dropout);
    network::validate_specs(&specs).map_err(|e| Failure::usage(e.to_string()))?;
    let cfg = TrainConfig {
        epochs,
        batch_size: batch,
        optimizer: OptimizerConfig {
            kind: m.optimizer.into(),
            learning_rate: m.lr,
            beta1: m.beta1,
            beta2: m.beta2,
            rho: m.rho,
            epsilon: m.epsilon,
        },
        reg: RegConfig { l1: m.l1, l2: m.l2 },
        loss: m.loss.into(),
        shuffle_seed: derive_seed(seed, SHUFFLE_STREAM),
    };
    cfg.validate()?;
    Ok(Plan { specs, cfg })
}

fn meta(cfg: &TrainConfig, seed: u64) -> ModelMeta {
    let mut meta = ModelMeta {
        training: Some(*cfg),
        ..Default::default()
    };
    meta.seeds.insert("seed".into(), seed);
    meta.seeds.insert("split".into(), derive_seed(seed, SPLIT_STREAM));
    meta.seeds.insert("init".into(), derive_seed(seed, INIT_STREAM));
    meta.seeds.insert("shuffle".into(), cfg.shuffle_seed);
    meta
}

fn write_gnuplot(script: &Path, curves: &[(String, PathBuf)]) -> CmdResult {
    let labeled: Vec<(&str, &Path)> = curves.iter().map(|(l, p)| (l.as_str(), p.as_path())).collect();
    let png = script.with_extension("png");
    fs::write(script, persist::gnuplot_script(&labeled, &png))
        .map_err(|e| soc_dfn::Error::Io { path: script.to_path_buf(), source: e })?;
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CmdResult {
    let plan = plan(&a.model, a.seed)?;
    let data = dataset::load_csv(&a.data)?;
    let split_seed = derive_seed(a.seed, SPLIT_STREAM);
    let shuffle = !a.split.no_shuffle;
    let (train_set, val_set, test_set) = match &a.test {
        Some(path) => {
            let test = dataset::load_csv(path)?;
            let val_share = a.split.val_frac / (a.split.train_frac + a.split.val_frac);
            let (tr, va) = dataset::split_train_val(&data, val_share, split_seed, shuffle)?;
            (tr, va, test)
        }
        None => {
            let h = dataset::split_holdout(&data, a.split.train_frac, a.split.val_frac, split_seed, shuffle)?;
            (h.train, h.val, h.test)
        }
    };
    if let Some(out) = &a.test_out {
        test_set.save_csv(out)?;
    }

    let norm = Normalizer::fit(&train_set)?;
    let tr = Examples::from_dataset(&train_set, &norm)?;
    let va = Examples::from_dataset(&val_set, &norm)?;
    let mut net = Network::init(&plan.specs, derive_seed(a.seed, INIT_STREAM))?;
    log::info!(
        "training {} parameters on {} rows, validating on {}",
        net.num_params(),
        tr.len(),
        va.len()
    );
    let history = train::fit(&mut net, &tr, &va, &plan.cfg)?;

    if let Some(path) = &a.history_out {
        persist::save_csv_with(path, |buf| persist::write_history_csv(&history, buf))?;
        if let Some(script) = &a.emit_gnuplot {
            write_gnuplot(script, &[("model".into(), path.clone())])?;
        }
    } else if a.emit_gnuplot.is_some() {
        return Err(Failure::usage("--emit-gnuplot needs --history-out"));
    }
    if let Some(path) = &a.model_out {
        persist::save_model(&net, &norm, &meta(&plan.cfg, a.seed), path)?;
    }

    let last = history.last().expect("at least one epoch");
    println!("train_mae={}", last.train_mae);
    println!("val_mae={}", last.val_mae);
    println!("test_mae={}", train::evaluate(&net, &norm, &test_set)?);
    Ok(())
}

fn crossval(a: CrossvalArgs) -> CmdResult {
    let plan = plan(&a.model, a.seed)?;
    let data = dataset::load_csv(&a.data)?;
    let split_seed = derive_seed(a.seed, SPLIT_STREAM);
    let (cv_set, test_set) = match &a.test {
        Some(path) => (data, Some(dataset::load_csv(path)?)),
        None => {
            if !(a.test_frac > 0.0 && a.test_frac < 1.0) {
                return Err(Failure::usage("--test-frac must lie in (0, 1)"));
            }
            let (tr, te) = dataset::split_train_val(&data, a.test_frac, split_seed, !a.no_shuffle)?;
            (tr, Some(te))
        }
    };
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let jobs = a.jobs.unwrap_or(a.k.min(cpus)).max(1);
    let opts = CvOptions {
        k: a.k,
        seed: derive_seed(a.seed, INIT_STREAM),
        jobs,
    };
    let report = train::cross_validate(&cv_set, &plan.specs, &plan.cfg, opts)?;

    if let Some(path) = &a.report_out {
        persist::save_csv_with(path, |buf| persist::write_cv_report_csv(&report, buf))?;
    }
    let mut curves = Vec::new();
    if let Some(dir) = &a.history_dir {
        fs::create_dir_all(dir).map_err(|e| soc_dfn::Error::Io { path: dir.clone(), source: e })?;
        for (fold, h) in report.histories.iter().enumerate() {
            let path = dir.join(format!("fold{fold}.csv"));
            persist::save_csv_with(&path, |buf| persist::write_history_csv(h, buf))?;
            curves.push((format!("fold {fold}"), path));
        }
    }
    if let Some(script) = &a.emit_gnuplot {
        if curves.is_empty() {
            return Err(Failure::usage("--emit-gnuplot needs --history-dir"));
        }
        write_gnuplot(script, &curves)?;
    }
    for (fold, mae) in report.final_val_mae.iter().enumerate() {
        println!("fold{fold}_val_mae={mae}");
    }
    println!("mean_val_mae={}", report.mean_val_mae);
    println!("std_val_mae={}", report.std_val_mae);

    if let Some(path) = &a.model_out {
        let norm = Normalizer::fit(&cv_set)?;
        let tr = Examples::from_dataset(&cv_set, &norm)?;
        let mut net = Network::init(&plan.specs, derive_seed(a.seed, INIT_STREAM))?;
        train::fit_full(&mut net, &tr, &plan.cfg)?;
        persist::save_model(&net, &norm, &meta(&plan.cfg, a.seed), path)?;
        if let Some(test) = &test_set {
            println!("test_mae={}", train::evaluate(&net, &norm, test)?);
        }
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CmdResult {
    let (net, norm, _) = persist::load_model(&a.model)?;
    let data = dataset::load_csv(&a.data)?;
    println!("{}", train::evaluate(&net, &norm, &data)?);
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    let (net, norm, _) = persist::load_model(&a.model)?;
    let data: Dataset = dataset::load_csv_as(&a.data, CsvKind::Features)?;
    let soc = network::predict_soc(&net, &norm, &data.records)?;
    let mut text = String::from("t_s,soc_pct\n");
    for (r, s) in data.records.iter().zip(soc.iter()) {
        text.push_str(&format!("{},{}\n", r.t, s));
    }
    match &a.out {
        Some(path) => fs::write(path, text).map_err(|e| soc_dfn::Error::Io { path: path.clone(), source: e })?,
        None => print!("{text}"),
    }
    Ok(())
}
