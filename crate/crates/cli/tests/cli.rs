use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddkseg_core::audio::write_wav;
use ddkseg_core::models::{
    build_model, load_checkpoint, save_checkpoint, Architecture, ModelConfig,
};
use ddkseg_core::nn::Parameterized;
use ddkseg_core::{Waveform, MODEL_RATE_HZ};

fn ddkseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddkseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, trials: &str, seed: &str) -> PathBuf {
    let out = ddkseg(&[
        "synth",
        "--out",
        s(dir),
        "--trials",
        trials,
        "--seed",
        seed,
        "-q",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("manifest.csv")
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

/// A network that labels every frame `other`.
fn silent_checkpoint(path: &Path) {
    let mut net = build_model(&ModelConfig::compact_for(Architecture::Cnn), 0).unwrap();
    net.fc2.visit_params(&mut |name, p| {
        p.value.iter_mut().for_each(|v| *v = 0.0);
        if name == "bias" {
            p.value[0] = 10.0;
        }
    });
    save_checkpoint(&net, path).unwrap();
}

fn write_csv(path: &Path, rows: &[(usize, usize, &str)]) {
    let mut text = String::from("onset_ms,offset_ms,label\n");
    for (a, b, l) in rows {
        text.push_str(&format!("{a},{b},{l}\n"));
    }
    fs::write(path, text).unwrap();
}

/// `n` syllables, one every `period` ms from 0, with a 50 ms VOT and a
/// vowel filling the rest (vowel lengths vary by a few ms).
fn uniform_syllables(n: usize, period: usize) -> Vec<(usize, usize, &'static str)> {
    let mut rows = Vec::new();
    for k in 0..n {
        let start = k * period;
        rows.push((start, start + 50, "vot"));
        rows.push((start + 50, start + period - 3 * (k % 3), "vowel"));
    }
    rows
}

#[test]
fn synth_writes_corpus_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("nested/a");
    let b = tmp.path().join("b");
    synth(&a, "5", "7");
    synth(&b, "5", "7");
    let files_a = sorted_files(&a);
    assert_eq!(files_a.len(), 11);
    assert_eq!(
        files_a
            .iter()
            .filter(|p| p.extension().unwrap() == "wav")
            .count(),
        5
    );
    for pa in &files_a {
        let pb = b.join(pa.file_name().unwrap());
        assert_eq!(
            fs::read(pa).unwrap(),
            fs::read(pb).unwrap(),
            "{}",
            pa.display()
        );
    }
    let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
    assert!(manifest.starts_with("trial_id,wav_path,labels_path,split\n"));
    assert_eq!(manifest.lines().count(), 6);
}

#[test]
fn train_writes_checkpoint_and_log() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("corpus"), "5", "1");
    for (arch, epochs) in [("lstm", "2"), ("cnn", "1")] {
        let ckpt = tmp.path().join(format!("{arch}.json"));
        let out = ddkseg(&[
            "train",
            "--manifest",
            s(&manifest),
            "--checkpoint",
            s(&ckpt),
            "--arch",
            arch,
            "--size",
            "compact",
            "--epochs",
            epochs,
            "--batch-size",
            "4",
            "--lr",
            "0.002",
            "--seed",
            "3",
            "-q",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let net = load_checkpoint(&ckpt).unwrap();
        assert_eq!(net.config.architecture.to_string(), arch);
        let log = fs::read_to_string(ckpt.with_extension("log.csv")).unwrap();
        let mut lines = log.lines();
        assert_eq!(
            lines.next(),
            Some("epoch,train_loss,val_loss,val_frame_acc")
        );
        assert_eq!(lines.count(), epochs.parse::<usize>().unwrap());
    }
}

#[test]
fn training_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("corpus"), "4", "2");
    let run = |name: &str| {
        let ckpt = tmp.path().join(name);
        let out = ddkseg(&[
            "train",
            "--manifest",
            s(&manifest),
            "--checkpoint",
            s(&ckpt),
            "--arch",
            "cnn",
            "--size",
            "compact",
            "--epochs",
            "1",
            "--batch-size",
            "4",
            "--seed",
            "9",
            "-q",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        (
            fs::read(&ckpt).unwrap(),
            fs::read(ckpt.with_extension("log.csv")).unwrap(),
        )
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn train_with_bad_manifest_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ddkseg(&[
        "train",
        "--manifest",
        s(&tmp.path().join("missing.csv")),
        "--checkpoint",
        s(&tmp.path().join("c.json")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing.csv"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&ddkseg(&["synth"])), 1);
    assert_eq!(code(&ddkseg(&["frobnicate"])), 1);
    assert_eq!(code(&ddkseg(&["--help"])), 0);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[train]\nbatchsize = 3\n").unwrap();
    let out = ddkseg(&["--config", s(&cfg), "synth", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("batchsize"), "{}", stderr(&out));
    let out = ddkseg(&[
        "train",
        "--manifest",
        "m.csv",
        "--checkpoint",
        "c.json",
        "--batch-size",
        "0",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_file_values_apply_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(
        &cfg,
        "seed = 4\n[corpus]\ntrials = 3\n[trial]\nsyllable_count = 2\n",
    )
    .unwrap();
    let a = tmp.path().join("a");
    let out = ddkseg(&["--config", s(&cfg), "synth", "--out", s(&a), "-q"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(a.join("manifest.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
    let b = tmp.path().join("b");
    let out = ddkseg(&[
        "--config",
        s(&cfg),
        "synth",
        "--out",
        s(&b),
        "--trials",
        "2",
        "-q",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read_to_string(b.join("manifest.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
    // same seed from the file, so the shared first trial is identical
    assert_eq!(
        fs::read(a.join("trial_0000.wav")).unwrap(),
        fs::read(b.join("trial_0000.wav")).unwrap()
    );
}

#[test]
fn segment_silence_gives_header_only_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = tmp.path().join("c.json");
    silent_checkpoint(&ckpt);
    let wav = tmp.path().join("quiet.wav");
    write_wav(&wav, &Waveform::silence(24_000, MODEL_RATE_HZ)).unwrap();
    let out_dir = tmp.path().join("seg");
    let out = ddkseg(&[
        "segment",
        "--checkpoint",
        s(&ckpt),
        "--out-dir",
        s(&out_dir),
        "--textgrid",
        s(&wav),
        "-q",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(out_dir.join("quiet.csv")).unwrap(),
        "onset_ms,offset_ms,label\n"
    );
    let tg = fs::read_to_string(out_dir.join("quiet.TextGrid")).unwrap();
    assert!(tg.contains("xmax = 1.5"), "{tg}");
}

#[test]
fn segment_manifest_split_writes_one_csv_per_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("corpus"), "5", "3");
    let ckpt = tmp.path().join("c.json");
    save_checkpoint(
        &build_model(&ModelConfig::compact_for(Architecture::Lstm), 1).unwrap(),
        &ckpt,
    )
    .unwrap();
    let out_dir = tmp.path().join("seg");
    let out = ddkseg(&[
        "segment",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(&out_dir),
        "-q",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // 5 trials split 3/1/1
    let names: Vec<String> = sorted_files(&out_dir)
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["trial_0004.csv"]);
}

#[test]
fn segment_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = tmp.path().join("a.wav");
    write_wav(&wav, &Waveform::silence(1600, MODEL_RATE_HZ)).unwrap();
    let out = ddkseg(&[
        "segment",
        "--checkpoint",
        s(&tmp.path().join("none.json")),
        "--out-dir",
        s(tmp.path()),
        s(&wav),
    ]);
    assert_eq!(code(&out), 2);
    let ckpt = tmp.path().join("c.json");
    silent_checkpoint(&ckpt);
    let out = ddkseg(&[
        "segment",
        "--checkpoint",
        s(&ckpt),
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(code(&out), 1);
    let bad = tmp.path().join("bad.wav");
    fs::write(&bad, b"RIFF....not a wav").unwrap();
    let out = ddkseg(&[
        "segment",
        "--checkpoint",
        s(&ckpt),
        "--out-dir",
        s(tmp.path()),
        s(&bad),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn rate_of_uniform_syllables() {
    let tmp = tempfile::tempdir().unwrap();
    let ten = tmp.path().join("ten.csv");
    write_csv(&ten, &uniform_syllables(10, 500));
    let none = tmp.path().join("none.csv");
    write_csv(&none, &[]);
    let out_csv = tmp.path().join("rates.csv");
    let out = ddkseg(&["rate", "--out", s(&out_csv), s(&ten), s(&none)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "file,syllables,corrected_syllables,articulation_s,rate"
    );
    // sorted by path: none.csv before ten.csv
    assert!(
        lines[1].ends_with(",undefined,undefined,undefined,undefined"),
        "{}",
        lines[1]
    );
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(&fields[1..], ["10", "10.000000", "5.000000", "2.000000"]);

    // VOT-only over an explicit 5 s window: 10 onsets, 500 ms apart
    let out = ddkseg(&["rate", "--window", "0,5", s(&ten)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = stdout.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4], "2.000000", "{stdout}");
}

#[test]
fn eval_identical_predictions_score_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, refs) = (tmp.path().join("pred"), tmp.path().join("ref"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&refs).unwrap();
    for (i, n) in [6usize, 8, 10].iter().enumerate() {
        let rows = uniform_syllables(*n, 400 + 40 * i);
        write_csv(&pred.join(format!("t{i}.csv")), &rows);
        write_csv(&refs.join(format!("t{i}.csv")), &rows);
    }
    let report_dir = tmp.path().join("report");
    let out = ddkseg(&[
        "eval",
        "--predictions",
        s(&pred),
        "--references",
        s(&refs),
        "--out",
        s(&report_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(report_dir.join("report.csv")).unwrap();
    let value = |metric: &str, label: &str| -> String {
        report
            .lines()
            .find_map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0] == metric && f[1] == label).then(|| f[2].to_string())
            })
            .unwrap_or_else(|| panic!("{metric}/{label} missing from\n{report}"))
    };
    assert_eq!(value("f1", "vot"), "1.000000");
    assert_eq!(value("f1", "vowel"), "1.000000");
    assert_eq!(value("boundary_mad_ms", "vowel_offset"), "0.000000");
    assert_eq!(value("duration_r", "vowel"), "1.000000");
    assert_eq!(value("rate_correlation", "all"), "1.000000");
    let rates = fs::read_to_string(report_dir.join("rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 4);
}

#[test]
fn eval_rejects_unknown_labels_and_missing_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, refs) = (tmp.path().join("pred"), tmp.path().join("ref"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&refs).unwrap();
    write_csv(&pred.join("a.csv"), &[(0, 40, "vot"), (40, 200, "vowel")]);
    write_csv(&refs.join("a.csv"), &[(0, 40, "burst"), (40, 200, "vowel")]);
    let out = ddkseg(&["eval", "--predictions", s(&pred), "--references", s(&refs)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("burst"), "{}", stderr(&out));
    write_csv(&pred.join("b.csv"), &[]);
    fs::remove_file(refs.join("a.csv")).unwrap();
    let out = ddkseg(&["eval", "--predictions", s(&pred), "--references", s(&refs)]);
    assert_eq!(code(&out), 2);
}
