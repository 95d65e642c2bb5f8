use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bispeech::audio_io;
use bispeech::cepstral::{self, CepstralConfig};
use bispeech::features::{self, FeatureVector};
use bispeech::synthgen::{generate, FixtureKind, FixtureSpec};
use bispeech::viz::{Colormap, Heatmap};
use bispeech::{ClassLabel, FEATURE_COUNT};
use bispeech_cli::ModelFile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bispeech"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = run(args, cwd);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn corpus(dir: &Path, n: usize) {
    ok(
        &[
            "synth",
            "--out",
            "corpus",
            "--n",
            &n.to_string(),
            "--seed",
            "11",
        ],
        dir,
    );
    ok(
        &[
            "extract",
            "--manifest",
            "corpus/manifest.csv",
            "--out",
            "features.csv",
        ],
        dir,
    );
}

fn read_rows(path: &Path) -> Vec<FeatureVector> {
    features::read_feature_csv(fs::File::open(path).unwrap()).unwrap()
}

#[test]
fn extract_writes_one_row_per_clip_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir, 20);
    let text = fs::read_to_string(dir.join("features.csv")).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("mag_mean,"));

    let again = run(
        &[
            "extract",
            "--manifest",
            "corpus/manifest.csv",
            "--out",
            "again.csv",
        ],
        dir,
    );
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read(dir.join("again.csv")).unwrap(), text.as_bytes());

    let single = Command::new(env!("CARGO_BIN_EXE_bispeech"))
        .args([
            "extract",
            "--manifest",
            "corpus/manifest.csv",
            "--out",
            "single.csv",
        ])
        .env("BISPEECH_THREADS", "1")
        .current_dir(dir)
        .output()
        .unwrap();
    assert_eq!(code(&single), 0);
    assert_eq!(fs::read(dir.join("single.csv")).unwrap(), text.as_bytes());
}

#[test]
fn missing_file_is_reported_and_the_rest_extracted() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        &["synth", "--out", "corpus", "--n", "10", "--seed", "1"],
        dir,
    );
    let manifest = fs::read_to_string(dir.join("corpus/manifest.csv")).unwrap();
    fs::write(
        dir.join("corpus/manifest.csv"),
        format!("{manifest}ghost.wav,Human\n"),
    )
    .unwrap();
    let o = run(
        &[
            "extract",
            "--manifest",
            "corpus/manifest.csv",
            "--out",
            "f.csv",
        ],
        dir,
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ghost.wav"));
    assert_eq!(read_rows(&dir.join("f.csv")).len(), 10);
}

#[test]
fn unreadable_manifest_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &["extract", "--manifest", "nope.csv", "--out", "f.csv"],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
}

fn blob_csv(path: &Path, classes: &[ClassLabel], n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<FeatureVector> = (0..n)
        .map(|i| {
            let label = classes[i % classes.len()];
            let shift = (i % classes.len()) as f64 * 3.0;
            let mut values = [0.0; FEATURE_COUNT];
            for v in values.iter_mut() {
                *v = shift + rng.random_range(-1.0..1.0);
            }
            FeatureVector { values, label }
        })
        .collect();
    let mut buf = Vec::new();
    features::write_feature_csv(&mut buf, &rows).unwrap();
    fs::write(path, buf).unwrap();
}

#[test]
fn train_on_blobs_writes_model_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blob_csv(
        &dir.join("blobs.csv"),
        &[ClassLabel::Human, ClassLabel::Replica],
        60,
    );
    let out = ok(
        &[
            "train",
            "blobs.csv",
            "--kind",
            "svm-quad",
            "--kernel-scale",
            "2",
            "--out",
            "m.json",
            "--report",
            "r.csv",
        ],
        dir,
    );
    assert!(out.contains("mean accuracy: 1.0000"), "{out}");
    assert!(out.contains("AUC"));
    let model = ModelFile::load(&dir.join("m.json")).unwrap();
    assert_eq!(model.columns, (0..FEATURE_COUNT).collect::<Vec<_>>());
    // Binary scenario pools Replica into Synthetic.
    assert_eq!(
        model.model.classes,
        vec![ClassLabel::Human, ClassLabel::Synthetic]
    );
    let report = fs::read_to_string(dir.join("r.csv")).unwrap();
    assert_eq!(report.lines().count(), 7);
    assert!(report.lines().last().unwrap().starts_with("mean,60,1,1"));
}

#[test]
fn every_kind_and_multiclass_trains() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blob_csv(
        &dir.join("blobs.csv"),
        &[
            ClassLabel::Human,
            ClassLabel::NaturalReader,
            ClassLabel::SpikAI,
            ClassLabel::Replica,
        ],
        160,
    );
    for kind in ["knn", "lda", "qda", "logistic", "svm-linear", "svm-quad"] {
        let out = ok(
            &[
                "train",
                "blobs.csv",
                "--kind",
                kind,
                "--scenario",
                "multiclass",
                "--out",
                "m.json",
            ],
            dir,
        );
        assert!(out.contains("macro one-vs-rest"), "{kind}: {out}");
        let model = ModelFile::load(&dir.join("m.json")).unwrap();
        assert_eq!(model.model.classes.len(), 4);
        let eval = ok(&["evaluate", "blobs.csv", "--model", "m.json"], dir);
        assert!(eval.contains("accuracy: 1.0000"), "{kind}: {eval}");
    }
}

#[test]
fn bicoherence_only_records_its_column_mask() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blob_csv(
        &dir.join("blobs.csv"),
        &[ClassLabel::Human, ClassLabel::Synthetic],
        60,
    );
    ok(
        &[
            "train",
            "blobs.csv",
            "--features",
            "bico",
            "--out",
            "m.json",
        ],
        dir,
    );
    let model = ModelFile::load(&dir.join("m.json")).unwrap();
    assert_eq!(model.columns, (0..8).collect::<Vec<_>>());
    assert_eq!(model.model.dim(), 8);
}

#[test]
fn single_class_csv_is_a_domain_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blob_csv(&dir.join("one.csv"), &[ClassLabel::Human], 60);
    let o = run(&["train", "one.csv", "--out", "m.json"], dir);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("class"));
    assert!(!dir.join("m.json").exists());
}

#[test]
fn malformed_inputs_are_format_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.csv"), "a,b\n1,2\n").unwrap();
    assert_eq!(code(&run(&["train", "bad.csv", "--out", "m.json"], dir)), 2);
    assert_eq!(
        code(&run(&["train", "missing.csv", "--out", "m.json"], dir)),
        2
    );
    assert_eq!(code(&run(&["train"], dir)), 2);
    assert_eq!(code(&run(&["frobnicate"], dir)), 2);
}

fn trained(dir: &Path) {
    corpus(dir, 20);
    ok(
        &[
            "train",
            "features.csv",
            "--kind",
            "svm-quad",
            "--seed",
            "3",
            "--out",
            "model.json",
        ],
        dir,
    );
}

#[test]
fn predict_wav_and_row_routes_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    trained(dir);
    let rows = read_rows(&dir.join("features.csv"));
    for (index, wav) in [(1, "corpus/synthetic_000.wav"), (0, "corpus/human_000.wav")] {
        let by_wav = ok(&["predict", "--model", "model.json", wav], dir);
        let row: Vec<String> = rows[index].values.iter().map(|v| v.to_string()).collect();
        let by_row = ok(
            &["predict", "--model", "model.json", "--row", &row.join(",")],
            dir,
        );
        assert_eq!(by_wav, by_row);
        let expected = rows[index].label;
        assert!(
            by_wav.starts_with(&format!("prediction: {expected}\n")),
            "{by_wav}"
        );

        let scores: Vec<(String, f64)> = by_wav
            .lines()
            .filter_map(|l| l.strip_prefix("score "))
            .map(|l| {
                let (c, s) = l.split_once(": ").unwrap();
                (c.to_string(), s.parse().unwrap())
            })
            .collect();
        let best = scores.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(best.0, expected.as_str());
    }
}

#[test]
fn predict_rejects_bad_models_and_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    trained(dir);
    let mut text = fs::read_to_string(dir.join("model.json")).unwrap();
    text.truncate(text.len() / 2);
    fs::write(dir.join("broken.json"), text).unwrap();
    let row = vec!["0.5"; FEATURE_COUNT].join(",");
    let o = run(&["predict", "--model", "broken.json", "--row", &row], dir);
    assert_eq!(code(&o), 2);
    assert_eq!(
        code(&run(
            &["predict", "--model", "absent.json", "--row", &row],
            dir
        )),
        2
    );

    let short = ["0.5"; 8].join(",");
    assert_eq!(
        code(&run(
            &["predict", "--model", "model.json", "--row", &short],
            dir
        )),
        1
    );
}

fn tone_wav(dir: &Path) -> PathBuf {
    let clip = generate(&FixtureSpec::new(
        FixtureKind::Tone { freq: 440.0 },
        1.0,
        16_000,
        440,
    ))
    .unwrap();
    let path = dir.join("tone.wav");
    audio_io::write_wav(&path, &clip).unwrap();
    path
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

#[test]
fn melspec_plot_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let wav = tone_wav(dir);
    let out = ok(
        &[
            "plot", "tone.wav", "--kind", "melspec", "--out", "mel.ppm", "--scale", "2",
        ],
        dir,
    );
    let bytes = fs::read(dir.join("mel.ppm")).unwrap();

    let clip = audio_io::load_mono(&wav, 5.0).unwrap();
    let mel = cepstral::mel_spectrogram(&clip, &CepstralConfig::default()).unwrap();
    let bands: Vec<Vec<f64>> = (0..mel.width())
        .map(|b| mel.coeffs.iter().map(|f| f[b]).collect())
        .collect();
    let map = Heatmap::auto_range(bands, Colormap::Viridis).unwrap();
    assert_eq!(bytes, map.to_ppm(2).unwrap());
    let (w, h) = map.pixel_size(2);
    assert!(out.contains(&format!("image: {w} x {h} pixels")), "{out}");

    let path = golden("melspec_tone440_wav.ppm");
    if std::env::var_os("BISPEECH_BLESS").is_some() {
        fs::write(&path, &bytes).unwrap();
    }
    assert!(
        fs::read(&path).unwrap() == bytes,
        "differs from golden file"
    );
}

#[test]
fn bicoherence_plot_reports_range_and_size() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    tone_wav(dir);
    for (scale, fft) in [(1usize, 64usize), (3, 64), (2, 128)] {
        let out = ok(
            &[
                "plot",
                "tone.wav",
                "--out",
                "b.ppm",
                "--scale",
                &scale.to_string(),
                "--fft-size",
                &fft.to_string(),
            ],
            dir,
        );
        let side = fft / 2;
        assert!(out.contains("value range: [0, 1]"), "{out}");
        assert!(
            out.contains(&format!(
                "grid: {side} x {side}, image: {0} x {0} pixels",
                side * scale
            )),
            "{out}"
        );
        let bytes = fs::read(dir.join("b.ppm")).unwrap();
        let header = format!("P6\n{0} {0}\n255\n", side * scale);
        assert!(bytes.starts_with(header.as_bytes()));
        assert_eq!(bytes.len(), header.len() + 3 * (side * scale).pow(2));
    }
}

#[test]
fn silence_cannot_be_plotted() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let clip = generate(&FixtureSpec::new(FixtureKind::Silence, 1.0, 16_000, 0)).unwrap();
    audio_io::write_wav(dir.join("quiet.wav"), &clip).unwrap();
    let o = run(&["plot", "quiet.wav", "--out", "q.ppm"], dir);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
    assert_eq!(
        code(&run(&["plot", "absent.wav", "--out", "q.ppm"], dir)),
        2
    );
}

#[test]
fn synth_rejects_odd_counts() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&run(&["synth", "--out", "c", "--n", "21"], tmp.path())),
        1
    );
}
