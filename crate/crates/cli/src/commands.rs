use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ddkseg_core::audio::{read_wav, resample, MODEL_RATE_HZ};
use ddkseg_core::experiment::LabeledRecording;
use ddkseg_core::metrics::{ddk_rate, ddk_rate_vot_only, EvalReport, RateResult, TrialInput};
use ddkseg_core::models::{load_checkpoint, save_checkpoint, train_with_progress};
use ddkseg_core::postproc::{
    postprocess_frames, read_segments_csv, to_textgrid, write_segments_csv, SegmentSequence,
};
use ddkseg_core::synth::{generate_corpus, read_manifest, write_corpus, CorpusSpec, Split};
use ddkseg_core::WindowPlan;

use crate::failure::{model_failure, Classify, CliResult, Failure};
use crate::{Context, EvalArgs, RateArgs, SegmentArgs, SynthArgs, TrainArgs};

pub fn synth(ctx: &Context, args: &SynthArgs) -> CliResult<()> {
    let file = &ctx.file;
    let defaults = CorpusSpec::default();
    if args.ratios.as_ref().is_some_and(|r| r.len() != 3) {
        return Err(Failure::usage(anyhow::anyhow!(
            "--ratios takes TRAIN,VAL,TEST"
        )));
    }
    let spec = CorpusSpec {
        trials: args
            .trials
            .or(file.corpus.trials)
            .unwrap_or(defaults.trials),
        ratios: args
            .ratios
            .clone()
            .map(|r| [r[0], r[1], r[2]])
            .or(file.corpus.ratios)
            .unwrap_or(defaults.ratios),
        seed: ctx.seed,
        syllables: (
            args.min_syllables
                .or(file.corpus.syllables.map(|s| s.0))
                .unwrap_or(defaults.syllables.0),
            args.max_syllables
                .or(file.corpus.syllables.map(|s| s.1))
                .unwrap_or(defaults.syllables.1),
        ),
        template: file.trial.clone().unwrap_or_default(),
    };
    if spec.trials == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--trials must be positive")));
    }
    let entries = generate_corpus(&spec).usage_err(|| "invalid corpus settings".into())?;
    let manifest = write_corpus(&args.out, &entries)
        .data_err(|| format!("writing corpus to {}", args.out.display()))?;
    ctx.info(&format!(
        "wrote {} trials; manifest {}",
        entries.len(),
        manifest.display()
    ));
    Ok(())
}

/// Reads a recording at 16 kHz with its reference segments.
fn load_recording(id: &str, wav: &Path, labels: &Path) -> CliResult<LabeledRecording> {
    let w = read_wav(wav).data_err(|| format!("reading {}", wav.display()))?;
    let waveform = if w.sample_rate_hz() == MODEL_RATE_HZ {
        w
    } else {
        resample(&w, MODEL_RATE_HZ)
    };
    let segments =
        read_segments_csv(labels).data_err(|| format!("reading {}", labels.display()))?;
    Ok(LabeledRecording {
        id: id.to_string(),
        waveform,
        segments,
    })
}

/// Manifest rows of `split`, sorted by trial id.
fn manifest_rows(path: &Path, split: Option<Split>) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    let mut rows =
        read_manifest(path).data_err(|| format!("reading manifest {}", path.display()))?;
    rows.retain(|r| split.is_none_or(|s| r.split == s));
    rows.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    Ok(rows
        .into_iter()
        .map(|r| {
            (
                r.trial_id,
                PathBuf::from(r.wav_path),
                PathBuf::from(r.labels_path),
            )
        })
        .collect())
}

pub fn train(ctx: &Context, args: &TrainArgs) -> CliResult<()> {
    let model = ctx.file.model(args.arch, args.size);
    let mut cfg = ctx.file.train.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    if let Some(v) = args.epochs {
        cfg.max_epochs = v;
        cfg.patience = cfg.patience.min(v);
    }
    if let Some(v) = args.patience {
        cfg.patience = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if args.no_augment {
        cfg.augment.enable_noise = false;
        cfg.augment.enable_band_reject = false;
    }
    if args.no_shift {
        cfg.random_shift = false;
    }
    model
        .validate()
        .map_err(|e| model_failure(e, "model configuration".into()))?;
    cfg.validate()
        .map_err(|e| model_failure(e, "training configuration".into()))?;

    let load = |split| -> CliResult<Vec<_>> {
        manifest_rows(&args.manifest, Some(split))?
            .iter()
            .map(|(id, wav, labels)| {
                load_recording(id, wav, labels)?
                    .to_example()
                    .map_err(|e| model_failure(e, format!("trial {id}")))
            })
            .collect()
    };
    let (train_set, val_set) = (load(Split::Train)?, load(Split::Val)?);
    if train_set.is_empty() {
        return Err(Failure::data(anyhow::anyhow!(
            "manifest {} has no training rows",
            args.manifest.display()
        )));
    }
    ctx.info(&format!(
        "training {} on {} trials ({} validation), up to {} epochs",
        model.architecture,
        train_set.len(),
        val_set.len(),
        cfg.max_epochs
    ));
    let outcome = train_with_progress(&train_set, &val_set, &model, &cfg, &mut |e| {
        ctx.debug(&format!(
            "epoch {:>3}  train loss {:.5}  val loss {:.5}  val acc {:.4}",
            e.epoch, e.train_loss, e.val_loss, e.val_frame_acc
        ))
    })
    .map_err(|e| model_failure(e, "training".into()))?;

    save_checkpoint(&outcome.network, &args.checkpoint)
        .map_err(|e| model_failure(e, format!("writing {}", args.checkpoint.display())))?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.checkpoint.with_extension("log.csv"));
    let log_file =
        File::create(&log_path).data_err(|| format!("creating {}", log_path.display()))?;
    outcome
        .log
        .write_csv(BufWriter::new(log_file))
        .map_err(|e| model_failure(e, format!("writing {}", log_path.display())))?;
    ctx.info(&format!(
        "kept epoch {} of {}; checkpoint {}; log {}",
        outcome.log.best_epoch,
        outcome.log.epochs.len(),
        args.checkpoint.display(),
        log_path.display()
    ));
    Ok(())
}

fn window_plan(
    ctx: &Context,
    window_ms: Option<usize>,
    hop_ms: Option<usize>,
) -> CliResult<WindowPlan> {
    let base = ctx.file.window.unwrap_or_default();
    WindowPlan::new(
        window_ms.unwrap_or(base.window_ms),
        hop_ms.unwrap_or(base.hop_ms),
    )
    .usage_err(|| "window plan".into())
}

pub fn segment(ctx: &Context, args: &SegmentArgs) -> CliResult<()> {
    let plan = window_plan(ctx, args.window_ms, args.hop_ms)?;
    let mut inputs: Vec<(String, PathBuf)> = Vec::new();
    for path in &args.inputs {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        inputs.push((stem, path.clone()));
    }
    if let Some(m) = &args.manifest {
        inputs.extend(
            manifest_rows(m, Some(args.split))?
                .into_iter()
                .map(|(id, wav, _)| (id, wav)),
        );
    }
    if inputs.is_empty() {
        return Err(Failure::usage(anyhow::anyhow!(
            "no input files: pass WAV paths or --manifest"
        )));
    }
    inputs.sort_by(|a, b| a.1.cmp(&b.1));
    let mut seen = BTreeMap::new();
    for (name, path) in &inputs {
        if let Some(prev) = seen.insert(name.clone(), path.clone()) {
            return Err(Failure::usage(anyhow::anyhow!(
                "{} and {} would both write {name}.csv",
                prev.display(),
                path.display()
            )));
        }
    }
    let net = load_checkpoint(&args.checkpoint)
        .map_err(|e| model_failure(e, format!("loading {}", args.checkpoint.display())))?;
    std::fs::create_dir_all(&args.out_dir)
        .data_err(|| format!("creating {}", args.out_dir.display()))?;
    for (name, path) in &inputs {
        let w = read_wav(path).data_err(|| format!("reading {}", path.display()))?;
        let frames = net
            .predict_file(&w, &plan)
            .map_err(|e| model_failure(e, format!("segmenting {}", path.display())))?;
        let segs = postprocess_frames(&frames).without_other();
        let csv = args.out_dir.join(format!("{name}.csv"));
        write_segments_csv(&csv, &segs).data_err(|| format!("writing {}", csv.display()))?;
        if args.textgrid {
            let tg = args.out_dir.join(format!("{name}.TextGrid"));
            std::fs::write(&tg, to_textgrid(&segs, frames.len(), "ddk"))
                .data_err(|| format!("writing {}", tg.display()))?;
        }
        ctx.debug(&format!("{}: {} segments", path.display(), segs.len()));
    }
    ctx.info(&format!(
        "segmented {} files into {}",
        inputs.len(),
        args.out_dir.display()
    ));
    Ok(())
}

fn parse_window(w: Option<&[f64]>) -> CliResult<Option<(f64, f64)>> {
    match w {
        Some(&[start, end]) if end > start => Ok(Some((start, end))),
        Some(_) => Err(Failure::usage(anyhow::anyhow!(
            "--window takes START,END seconds with END > START"
        ))),
        None => Ok(None),
    }
}

pub fn rate(ctx: &Context, args: &RateArgs) -> CliResult<()> {
    let window = parse_window(args.window.as_deref())?;
    let mut inputs = args.inputs.clone();
    inputs.sort();
    let mut rows = Vec::with_capacity(inputs.len());
    for path in &inputs {
        let segs = read_segments_csv(path).data_err(|| format!("reading {}", path.display()))?;
        let r: Option<RateResult> = match window {
            Some(w) => ddk_rate_vot_only(&segs, w),
            None => ddk_rate(&segs),
        };
        rows.push((path, r));
    }
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).data_err(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(
        out,
        "file,syllables,corrected_syllables,articulation_s,rate"
    )?;
    for (path, r) in rows {
        match r {
            Some(r) => writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6}",
                path.display(),
                r.count.raw_count,
                r.count.corrected_count,
                r.articulation_time_s,
                r.rate
            )?,
            None => writeln!(
                out,
                "{},undefined,undefined,undefined,undefined",
                path.display()
            )?,
        }
    }
    out.flush()?;
    ctx.debug(&format!("rated {} files", inputs.len()));
    Ok(())
}

pub fn eval(ctx: &Context, args: &EvalArgs) -> CliResult<()> {
    // (trial id, prediction CSV, reference CSV), sorted by prediction path.
    let mut pairs: Vec<(String, PathBuf, PathBuf)> = Vec::new();
    if let Some(m) = &args.manifest {
        for (id, _, labels) in manifest_rows(m, Some(args.split))? {
            pairs.push((
                id.clone(),
                args.predictions.join(format!("{id}.csv")),
                labels,
            ));
        }
    } else if let Some(refs) = &args.references {
        let entries = std::fs::read_dir(&args.predictions)
            .data_err(|| format!("listing {}", args.predictions.display()))?;
        for entry in entries {
            let path = entry
                .data_err(|| format!("listing {}", args.predictions.display()))?
                .path();
            if path.extension().is_some_and(|e| e == "csv") {
                let name = path.file_name().expect("listed file has a name").to_owned();
                let id = path
                    .file_stem()
                    .expect("listed file has a stem")
                    .to_string_lossy()
                    .into_owned();
                pairs.push((id, path, refs.join(name)));
            }
        }
    }
    pairs.sort_by(|a, b| a.1.cmp(&b.1));
    if pairs.is_empty() {
        return Err(Failure::data(anyhow::anyhow!(
            "no prediction/reference pairs found"
        )));
    }
    let read = |p: &Path| -> CliResult<SegmentSequence> {
        read_segments_csv(p).data_err(|| format!("reading {}", p.display()))
    };
    let window = parse_window(args.window.as_deref())?;
    let trials = pairs
        .iter()
        .map(|(id, pred, target)| {
            Ok(TrialInput {
                trial_id: id.clone(),
                predicted: read(pred)?,
                target: read(target)?,
                window,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = EvalReport::compute(&trials);
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).data_err(|| format!("creating {}", dir.display()))?;
        let write = |name: &str,
                     f: &dyn Fn(
            BufWriter<File>,
        ) -> Result<(), ddkseg_core::metrics::MetricsError>| {
            let path = dir.join(name);
            let file = File::create(&path).data_err(|| format!("creating {}", path.display()))?;
            f(BufWriter::new(file)).data_err(|| format!("writing {}", path.display()))
        };
        write("report.csv", &|w| report.write_csv(w))?;
        write("rates.csv", &|w| report.write_rates_csv(w))?;
    }
    if !ctx.quiet() {
        print!("{}", report.to_table());
    }
    Ok(())
}
