//! `csipred`: dataset generation, training, evaluation and sweeps from a
//! plain-text experiment config.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csipred_core::channel::TdlModel;
use csipred_core::harness::{
    emit_report, evaluate, generate_dataset, run_complexity_sweep, run_nmse_sweep, run_throughput_sweep,
    train_and_evaluate, DatasetSplit, ExperimentConfig, Provenance, Split, SweepRecord,
};
use csipred_core::neural::ModelKind;
use csipred_core::predictor::{read_windows, write_windows, write_windows_csv, ModelMetadata, PredictorModel};
use csipred_core::{Error, Result};
use serde_json::json;

/// Overrides the default output directory (`out`) when `--out` is absent.
const OUT_ENV: &str = "CSIPRED_OUT";

#[derive(Parser, Debug)]
#[command(name = "csipred", version, about = "Effective-SINR prediction workbench")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Experiment config (`key = value` lines); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override `key=value`, applied after the file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent sweep points and realizations.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Base seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Verb {
    /// Generate train/val/test window datasets.
    Gen,
    /// Train one model per profile, Doppler value and model kind.
    Train,
    /// Score trained models on the test split.
    Eval,
    /// NMSE against Doppler for every profile.
    SweepNmse,
    /// NMSE and FLOPs against hidden width at the first profile and Doppler.
    SweepComplexity,
    /// Slot-level throughput of the configured link policies.
    Throughput,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        cfg.set_line(o)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn point_name(profile: TdlModel, doppler: f64) -> String {
    format!("{}_{}hz", profile.label().to_ascii_lowercase(), doppler)
}

fn model_path(out: &Path, cfg: &ExperimentConfig, profile: TdlModel, doppler: f64, kind: ModelKind) -> PathBuf {
    out.join("models")
        .join(format!("{}_{}_d{}.csip", point_name(profile, doppler), kind, cfg.hidden))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) => fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }),
        None => Ok(()),
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn io_buf(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(buf)
}

fn points(cfg: &ExperimentConfig) -> Vec<(TdlModel, f64)> {
    cfg.profiles
        .iter()
        .flat_map(|&p| cfg.doppler_list_hz.iter().map(move |&d| (p, d)))
        .collect()
}

/// Dataset of a sweep point: read back from `gen` output when it was made
/// with the same config, otherwise generated.
fn dataset(cfg: &ExperimentConfig, out: &Path, profile: TdlModel, doppler: f64) -> Result<DatasetSplit> {
    let dir = out.join("data").join(point_name(profile, doppler));
    let meta = dir.join("dataset.json");
    let cached = fs::read_to_string(&meta)
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .is_some_and(|v| v["config_hash"] == cfg.hash());
    if !cached {
        return generate_dataset(cfg, profile, doppler);
    }
    let mut splits = Vec::new();
    for s in Split::ALL {
        let path = dir.join(format!("{}.wsmp", s.name()));
        let bytes = fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        splits.push(read_windows(&bytes[..])?.0);
    }
    let [train, val, test]: [_; 3] = splits.try_into().expect("three splits");
    Ok(DatasetSplit {
        train,
        val,
        test,
        provenance: Provenance {
            profile,
            doppler_hz: doppler,
            base_seed: cfg.seed,
            realization_seeds: Default::default(),
            config_hash: cfg.hash(),
        },
    })
}

fn gen(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    for (profile, doppler) in points(cfg) {
        let d = generate_dataset(cfg, profile, doppler)?;
        let dir = out.join("data").join(point_name(profile, doppler));
        for s in Split::ALL {
            let samples = d.split(s);
            let bin = dir.join(format!("{}.wsmp", s.name()));
            write_file(&bin, io_buf(&bin, |b| write_windows(samples, cfg.history, cfg.t_csi, b))?)?;
            let csv = dir.join(format!("{}.csv", s.name()));
            write_file(&csv, io_buf(&csv, |b| write_windows_csv(samples, cfg.history, cfg.t_csi, b))?)?;
        }
        let meta = json!({
            "profile": profile.label(),
            "doppler_hz": doppler,
            "sizes": [d.train.len(), d.val.len(), d.test.len()],
            "dataset_hash": d.hash(),
            "config_hash": cfg.hash(),
            "realization_seeds": d.provenance.realization_seeds,
        });
        write_file(&dir.join("dataset.json"), serde_json::to_string_pretty(&meta).unwrap() + "\n")?;
        println!(
            "{} {} Hz: {}/{}/{} windows, hash {}",
            profile,
            doppler,
            d.train.len(),
            d.val.len(),
            d.test.len(),
            &d.hash()[..16]
        );
    }
    Ok(())
}

fn train(cfg: &ExperimentConfig, out: &Path, overrides: &[String]) -> Result<()> {
    for (profile, doppler) in points(cfg) {
        let data = dataset(cfg, out, profile, doppler)?;
        for &kind in &cfg.models {
            let t = train_and_evaluate(cfg, &data, kind, cfg.hidden, cfg.seed)?;
            let path = model_path(out, cfg, profile, doppler, kind);
            let meta = ModelMetadata {
                model: kind.name().into(),
                hidden: cfg.hidden,
                history: cfg.history,
                t_csi: cfg.t_csi,
                profile: profile.label().into(),
                doppler_hz: doppler,
                train: cfg.train_config(cfg.seed),
                dataset_hash: data.hash(),
                overrides: overrides.to_vec(),
                final_train_loss: *t.train_loss.last().unwrap(),
                final_val_loss: *t.val_loss.last().unwrap(),
            };
            ensure_parent(&path)?;
            t.model.save(&path, &meta)?;
            println!(
                "{profile} {doppler} Hz {kind} D={}: val loss {:.4} dB², test NMSE {:.3} dB -> {}",
                cfg.hidden,
                meta.final_val_loss,
                t.evaluation.nmse_db,
                path.display()
            );
        }
    }
    Ok(())
}

fn eval(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRecord>> {
    let mut rows = Vec::new();
    for (profile, doppler) in points(cfg) {
        let data = dataset(cfg, out, profile, doppler)?;
        for &kind in &cfg.models {
            let model = PredictorModel::load(&model_path(out, cfg, profile, doppler, kind))?;
            if model.history() != cfg.history || model.t_csi() != cfg.t_csi {
                return Err(Error::DimensionMismatch {
                    expected: format!("P={} T_CSI={}", cfg.history, cfg.t_csi),
                    found: format!("model with P={} T_CSI={}", model.history(), model.t_csi()),
                });
            }
            let e = evaluate(&model, &data.test, model.normalization())?;
            rows.push(SweepRecord {
                profile,
                doppler_hz: doppler,
                model: kind.name().into(),
                hidden: Some(model.hidden()),
                history: cfg.history,
                t_csi: cfg.t_csi,
                nmse_db: Some(e.nmse_db),
                nmse_raw_db: Some(e.nmse_raw_db),
                flops: Some(model.flops()),
                throughput_mbps: None,
                baseline_mbps: None,
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

fn print_rows(rows: &[SweepRecord]) {
    for r in rows {
        let mut line = format!("{} {} Hz {}", r.profile, r.doppler_hz, r.model);
        if let Some(d) = r.hidden {
            line += &format!(" D={d}");
        }
        if let Some(n) = r.nmse_db {
            line += &format!(" nmse {n:.3} dB");
        }
        if let Some(t) = r.throughput_mbps {
            line += &format!(" {t:.3} Mbps");
        }
        if let Some(f) = r.flops.filter(|&f| f > 0) {
            line += &format!(" {f} FLOPs");
        }
        println!("{line} seed {}", r.seed);
    }
}

fn report(cfg: &ExperimentConfig, out: &Path, verb: &str, stem: &str, overrides: &[String], rows: &[SweepRecord]) -> Result<()> {
    print_rows(rows);
    let csv = emit_report(rows, out, stem)?;
    let meta = json!({
        "verb": verb,
        "config": cfg.to_config_string(),
        "config_hash": cfg.hash(),
        "overrides": overrides,
    });
    write_file(&out.join(format!("{stem}_meta.json")), serde_json::to_string_pretty(&meta).unwrap() + "\n")?;
    println!("wrote {}", csv.display());
    Ok(())
}

fn dispatch(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    let out = out_dir(cli);
    let ov = &cli.overrides;
    match cli.verb {
        Verb::Gen => gen(cfg, &out),
        Verb::Train => train(cfg, &out, ov),
        Verb::Eval => {
            let rows = eval(cfg, &out)?;
            report(cfg, &out, "eval", "eval", ov, &rows)
        }
        Verb::SweepNmse => {
            let rows = run_nmse_sweep(cfg, &cfg.models, cfg.hidden)?;
            report(cfg, &out, "sweep-nmse", "nmse_sweep", ov, &rows)
        }
        Verb::SweepComplexity => {
            let rows = run_complexity_sweep(cfg, cfg.profiles[0], cfg.doppler_list_hz[0], &cfg.models, &cfg.hidden_list)?;
            report(cfg, &out, "sweep-complexity", "complexity_sweep", ov, &rows)
        }
        Verb::Throughput => {
            let rows = run_throughput_sweep(cfg)?;
            let stem = format!("throughput_{}", cfg.policies.join("-"));
            report(cfg, &out, "throughput", &stem, ov, &rows)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("csipred: {e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("csipred: {e}");
            ExitCode::from(2)
        }
    }
}
