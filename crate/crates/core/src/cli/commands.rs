use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::{parse_methods, EvalArgs, FeaturesArgs, RunConfig, ScdArgs, TrainArgs};
use crate::corpus::{
    generate_synthetic_corpus, load_annotations, load_corpus_dir, load_wav, sample_fixed_sequences, save_corpus_dir,
    Corpus, CorpusFile, FeatureSequence,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    change_recall, det_curve, detect_peaks, eer, purity_coverage_curve, scd_distance_curve, score_groups,
    write_det_csv, write_det_json, write_purity_coverage_csv, write_trials_csv, DetReport, DistanceCurve, Method,
    ScdFile, Scorer,
};
use crate::features::{stack_features, FeatureConfig};
use crate::nn::{params_from_file, read_model_file, write_model_file, TristouNetParams};
use crate::training::{fit_from, load_checkpoint, save_checkpoint, TrainConfig};

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// `<out>/run_<command>.json`: the effective configuration, its hash and seed,
/// and the artifacts the command wrote.
fn write_run_record(out: &Path, command: &str, cfg: &RunConfig, artifacts: &[String]) -> Result<()> {
    write_json(
        &out.join(format!("run_{command}.json")),
        &json!({
            "command": command,
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "config": cfg,
            "artifacts": artifacts,
        }),
    )
}

/// `2s`, `0.5s`.
pub(crate) fn duration_tag(d: f64) -> String {
    format!("{d}s")
}

pub fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let corpus = generate_synthetic_corpus(&cfg.synth)?;
    save_corpus_dir(out, &corpus, Some(&cfg.hash()), Some(cfg.seed))?;
    let artifacts: Vec<String> = std::iter::once("manifest.json".to_string())
        .chain(std::iter::once("annotations.txt".to_string()))
        .chain(corpus.files().keys().map(|u| format!("features/{u}.f32")))
        .collect();
    write_run_record(out, "synth", cfg, &artifacts)
}

pub fn features(cfg: &RunConfig, args: &FeaturesArgs, out: &Path) -> Result<()> {
    let fcfg = if args.baseline {
        FeatureConfig {
            include_derivatives: false,
            include_energy_derivatives: false,
            include_static_energy: true,
            ..cfg.features.clone()
        }
    } else {
        cfg.features.clone()
    };
    let annotations = load_annotations(&args.annotations)?;
    let files: BTreeMap<String, CorpusFile> = annotations
        .into_par_iter()
        .map(|(uri, annotation)| {
            let signal = load_wav(args.audio_dir.join(format!("{uri}.wav")))?;
            let features = stack_features(&signal, &fcfg)?;
            Ok((uri, CorpusFile { features, annotation }))
        })
        .collect::<Result<_>>()?;
    let corpus = Corpus::new(files)?;
    save_corpus_dir(out, &corpus, Some(&cfg.hash()), Some(cfg.seed))?;
    let artifacts: Vec<String> = corpus.files().keys().map(|u| format!("features/{u}.f32")).collect();
    write_run_record(out, "features", cfg, &artifacts)
}

fn save_model(path: &Path, params: &TristouNetParams, extra: Value) -> Result<()> {
    write_model_file(
        path,
        params.dims,
        params.tensors().into_iter().map(|(n, s, d)| (n.to_string(), s, d)),
        extra,
    )
}

pub fn train(cfg: &RunConfig, args: &TrainArgs, out: &Path) -> Result<()> {
    let (manifest, corpus) = load_corpus_dir(&args.corpus)?;
    let durations = args.durations.clone().unwrap_or_else(|| cfg.train_durations.clone());
    if durations.is_empty() {
        return Err(Error::Config("no training durations".into()));
    }
    let mut resume = match &args.resume {
        Some(path) if durations.len() != 1 => {
            return Err(Error::Config(format!(
                "--resume {} needs exactly one duration, got {}",
                path.display(),
                durations.len()
            )))
        }
        Some(path) => Some(load_checkpoint(path)?),
        None => None,
    };
    let mut artifacts = Vec::new();
    for &duration in &durations {
        let tcfg = TrainConfig {
            duration,
            epochs: args.epochs.unwrap_or(cfg.train.epochs),
            ..cfg.train.clone()
        };
        let tag = duration_tag(duration);
        let log_name = format!("train_{tag}.csv");
        let log_path = out.join(&log_name);
        let state = resume.take();
        let append = state.is_some() && log_path.exists();
        let mut log = std::fs::OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        if !append {
            writeln!(log, "epoch,loss,active_triplets,skipped_pairs,wall_time_s").map_err(|e| Error::io(&log_path, e))?;
        }
        let mut clock = Instant::now();
        let result = fit_from(&corpus, &tcfg, state, |stats, state| {
            let wall = clock.elapsed().as_secs_f64();
            clock = Instant::now();
            writeln!(
                log,
                "{},{},{},{},{wall:.3}",
                stats.epoch, stats.loss, stats.active_triplets, stats.skipped_pairs
            )
            .map_err(|e| Error::io(&log_path, e))?;
            if args.checkpoint_every > 0 && stats.epoch % args.checkpoint_every == 0 {
                let name = format!("checkpoint_{tag}_epoch{:04}.bin", stats.epoch);
                save_checkpoint(&out.join(&name), state)?;
            }
            Ok(())
        })?;
        let model_name = format!("model_{tag}.bin");
        save_model(
            &out.join(&model_name),
            &result.params,
            json!({
                "training_duration": duration,
                "training_speakers": corpus.speakers(),
                "epochs": tcfg.epochs,
                "config_hash": cfg.hash(),
                "seed": cfg.seed,
                "corpus_config_hash": manifest.config_hash,
            }),
        )?;
        artifacts.push(model_name);
        artifacts.push(log_name);
    }
    write_run_record(out, "train", cfg, &artifacts)
}

struct LoadedModel {
    path: PathBuf,
    params: TristouNetParams,
    duration: Option<f64>,
    speakers: BTreeSet<String>,
}

fn load_model(path: &Path) -> Result<LoadedModel> {
    let file = read_model_file(path)?;
    let params = params_from_file(&file)?;
    let extra = &file.header.extra;
    let duration = extra.get("training_duration").and_then(Value::as_f64);
    let speakers = match extra.get("training_speakers") {
        Some(v) => serde_json::from_value(v.clone())?,
        None => BTreeSet::new(),
    };
    Ok(LoadedModel {
        path: path.to_path_buf(),
        params,
        duration,
        speakers,
    })
}

fn model_for(models: &[LoadedModel], duration: f64) -> Result<&LoadedModel> {
    if let Some(m) = models.iter().find(|m| m.duration.is_some_and(|d| (d - duration).abs() < 1e-9)) {
        return Ok(m);
    }
    match models {
        [only] => Ok(only),
        [] => Err(Error::Config("the embedding method needs --model".into())),
        _ => Err(Error::Config(format!("no model trained on {duration}s sequences"))),
    }
}

fn scorer_for(method: Method, model: Option<&LoadedModel>, cfg: &RunConfig, dim: usize) -> Result<Scorer> {
    Ok(match method {
        Method::Embedding => {
            let m = model.ok_or_else(|| Error::Config("the embedding method needs --model".into()))?;
            m.params.check_input_dim(dim)?;
            Scorer::Embedding(Box::new(m.params.clone()))
        }
        Method::Divergence => Scorer::Divergence,
        Method::Bic => Scorer::Bic { lambda: cfg.eval.bic_lambda },
    })
}

/// Trial sequences for one duration, drawn from a generator that depends only
/// on the seed and the duration.
pub(crate) fn trial_groups(corpus: &Corpus, duration: f64, per_speaker: usize, seed: u64) -> Result<Vec<Vec<FeatureSequence>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 << 32 | (duration * 1000.0).round() as u64);
    corpus
        .speakers()
        .iter()
        .map(|spk| sample_fixed_sequences(corpus, spk, duration, per_speaker, &mut rng))
        .collect()
}

pub fn eval_eer(cfg: &RunConfig, args: &EvalArgs, out: &Path) -> Result<()> {
    let methods = match &args.methods {
        Some(names) => parse_methods(names)?,
        None => cfg.eval.methods.clone(),
    };
    let durations = args.durations.clone().unwrap_or_else(|| cfg.eval.durations.clone());
    let per_speaker = args.per_speaker.unwrap_or(cfg.eval.per_speaker);
    let include = args.include_training_speakers || cfg.eval.include_training_speakers;
    let (_, corpus) = load_corpus_dir(&args.corpus)?;
    let models = args.models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let corpus = if include {
        corpus
    } else {
        let excluded: BTreeSet<String> = models.iter().flat_map(|m| m.speakers.iter().cloned()).collect();
        corpus.without_speakers(&excluded)?
    };
    if corpus.speakers().len() < 2 {
        return Err(Error::Config(format!(
            "trials need at least 2 speakers, {} left after excluding training speakers",
            corpus.speakers().len()
        )));
    }
    let dim = corpus.feature_dim().ok_or(Error::Empty("corpus"))?;

    let mut artifacts = Vec::new();
    let mut summary = String::from("method,duration,eer,num_trials\n");
    for &duration in &durations {
        let groups = trial_groups(&corpus, duration, per_speaker, cfg.seed)?;
        let tag = duration_tag(duration);
        for &method in &methods {
            let model = match method {
                Method::Embedding => Some(model_for(&models, duration)?),
                _ => None,
            };
            let scorer = scorer_for(method, model, cfg, dim)?;
            let trials = score_groups(&scorer, &groups)?;
            let curve = det_curve(&trials);
            let name = method.name();
            let mut meta = Map::new();
            meta.insert("method".into(), json!(name));
            meta.insert("duration".into(), json!(duration));
            meta.insert("num_speakers".into(), json!(groups.len()));
            meta.insert("per_speaker".into(), json!(per_speaker));
            if let Some(m) = model {
                meta.insert("model".into(), json!(m.path.display().to_string()));
            }
            meta.insert("config_hash".into(), json!(cfg.hash()));
            meta.insert("seed".into(), json!(cfg.seed));
            let report = DetReport { curve: &curve, num_trials: trials.len(), meta };
            let json_name = format!("eer_{name}_{tag}.json");
            write_det_json(&out.join(&json_name), &report)?;
            let det_name = format!("det_{name}_{tag}.csv");
            write_det_csv(&out.join(&det_name), &curve)?;
            artifacts.extend([json_name, det_name]);
            if cfg.eval.write_trials {
                let trials_name = format!("trials_{name}_{tag}.csv");
                write_trials_csv(&out.join(&trials_name), &trials)?;
                artifacts.push(trials_name);
            }
            writeln!(summary, "{name},{duration},{},{}", eer(&curve), trials.len()).unwrap();
        }
    }
    write_text(&out.join("eer_summary.csv"), &summary)?;
    artifacts.push("eer_summary.csv".into());
    write_run_record(out, "eval-eer", cfg, &artifacts)
}

/// `n` evenly spaced values from the smallest to the largest curve value.
pub(crate) fn auto_thresholds(curves: &[DistanceCurve], n: usize) -> Vec<f64> {
    let values = curves.iter().flat_map(|c| c.values.iter().copied());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return Vec::new();
    }
    if n < 2 || lo == hi {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

pub fn scd(cfg: &RunConfig, args: &ScdArgs, out: &Path) -> Result<()> {
    let methods = match &args.methods {
        Some(names) => parse_methods(names)?,
        None => cfg.eval.methods.clone(),
    };
    let context = args.peak_context.unwrap_or(cfg.eval.peak_context);
    let (_, corpus) = load_corpus_dir(&args.corpus)?;
    let dim = corpus.feature_dim().ok_or(Error::Empty("corpus"))?;
    let model = args.model.as_deref().map(load_model).transpose()?;
    let files: Vec<(&String, &CorpusFile)> = corpus.files().iter().collect();

    let mut artifacts = Vec::new();
    for &method in &methods {
        let scorer = scorer_for(method, model.as_ref(), cfg, dim)?;
        let curves: Vec<DistanceCurve> = files
            .iter()
            .map(|(_, f)| scd_distance_curve(&f.features, &scorer, cfg.eval.scd_window, cfg.eval.scd_step))
            .collect::<Result<_>>()?;
        let mut thresholds = match &args.thresholds {
            Some(t) => t.clone(),
            None if !cfg.eval.thresholds.is_empty() => cfg.eval.thresholds.clone(),
            None => auto_thresholds(&curves, cfg.eval.num_auto_thresholds),
        };
        if thresholds.is_empty() {
            return Err(Error::TooShort(format!(
                "every file is shorter than two {}s windows",
                cfg.eval.scd_window
            )));
        }
        thresholds.sort_by(f64::total_cmp);
        let scd_files: Vec<ScdFile<'_>> = files
            .iter()
            .zip(&curves)
            .map(|((_, f), curve)| ScdFile {
                reference: &f.annotation,
                curve,
                extent: f.features.extent(),
            })
            .collect();
        let points = purity_coverage_curve(&scd_files, &thresholds, context)?;

        let operating = cfg.eval.scd_threshold.unwrap_or_else(|| {
            let range = auto_thresholds(&curves, 2);
            (range[0] + range[range.len() - 1]) / 2.0
        });
        let per_file: Vec<Value> = files
            .iter()
            .zip(&curves)
            .map(|((uri, f), curve)| {
                let changes = detect_peaks(curve, context, operating);
                let reference = f.annotation.change_points();
                json!({
                    "uri": uri,
                    "changes": changes,
                    "reference_changes": reference,
                    "recall": change_recall(&reference, &changes, cfg.eval.change_tolerance),
                    "curve_length": curve.len(),
                    "too_short": curve.is_empty(),
                })
            })
            .collect();
        let at_operating = &purity_coverage_curve(&scd_files, &[operating], context)?[0];
        let name = method.name();
        let report_name = format!("scd_{name}.json");
        write_json(
            &out.join(&report_name),
            &json!({
                "method": name,
                "threshold": operating,
                "purity": at_operating.purity,
                "coverage": at_operating.coverage,
                "peak_context": context,
                "window": cfg.eval.scd_window,
                "step": cfg.eval.scd_step,
                "change_tolerance": cfg.eval.change_tolerance,
                "config_hash": cfg.hash(),
                "seed": cfg.seed,
                "files": per_file,
            }),
        )?;
        let pc_name = format!("purity_coverage_{name}.csv");
        write_purity_coverage_csv(&out.join(&pc_name), &points)?;
        artifacts.extend([report_name, pc_name]);
    }
    write_run_record(out, "scd", cfg, &artifacts)
}
