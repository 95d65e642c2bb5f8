//! Batch front end: synthesize a corpus, extract features, train, evaluate,
//! predict and plot.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bispeech::audio_io::{self, AudioError};
use bispeech::bispectrum::{self, BispectralConfig, BispectrumError};
use bispeech::cepstral::{self, CepstralConfig, CepstralError};
use bispeech::classify::{ClassifyError, Kernel, SvmParams};
use bispeech::dataset::{self, DatasetError};
use bispeech::eval::{self, EvalError};
use bispeech::features::{self, FeatureConfig, FeatureError, FeatureVector, BICOHERENCE_COLUMNS};
use bispeech::synthgen::{self, SynthError};
use bispeech::viz::{self, Colormap, Heatmap, VizError};
use bispeech::{ClassLabel, ModelKind, TrainParams, TrainedModel, FEATURE_COUNT};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Default cap applied to every loaded clip, in seconds.
pub const MAX_SECONDS: f64 = 5.0;

#[derive(Debug, Parser)]
#[command(
    name = "bispeech",
    version,
    about = "Synthetic speech detection from bispectral and cepstral statistics"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a labelled corpus of synthetic fixtures plus manifest.csv.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Total number of clips, split evenly between the two classes.
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute the feature CSV for every clip of a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Cross-validate a classifier, then fit it on every row.
    Train {
        features: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::SvmQuad)]
        kind: KindArg,
        #[arg(long, default_value_t = 2.0)]
        kernel_scale: f64,
        #[arg(long, default_value_t = 10)]
        knn_k: usize,
        #[arg(long, value_enum, default_value_t = Scenario::Binary)]
        scenario: Scenario,
        #[arg(long = "features", value_enum, default_value_t = FeatureSet::Full)]
        feature_set: FeatureSet,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-fold CSV report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a labelled feature CSV with a saved model.
    Evaluate {
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Classify one WAV file or one raw feature row.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(required_unless_present = "row", conflicts_with = "row")]
        wav: Option<PathBuf>,
        /// Fourteen comma-separated feature values.
        #[arg(long, allow_hyphen_values = true)]
        row: Option<String>,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Render a bicoherence grid or mel spectrogram as a PPM image.
    Plot {
        wav: PathBuf,
        #[arg(long, value_enum, default_value_t = PlotKind::Bicoherence)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct AnalysisArgs {
    #[arg(long, default_value_t = 100)]
    pub segments: usize,
    #[arg(long, default_value_t = 64)]
    pub fft_size: usize,
    #[arg(long, default_value_t = MAX_SECONDS)]
    pub max_seconds: f64,
}

impl AnalysisArgs {
    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            bispectral: BispectralConfig {
                target_segments: self.segments,
                segment_fft_size: self.fft_size,
                ..BispectralConfig::default()
            },
            ..FeatureConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Knn,
    Lda,
    Qda,
    Logistic,
    SvmLinear,
    SvmQuad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Human vs. every synthetic source pooled.
    Binary,
    /// Each source label is its own class.
    Multiclass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    /// The eight bicoherence magnitude and phase moments.
    Bico,
    /// Bicoherence moments plus the six cepstral aggregates.
    Full,
}

impl FeatureSet {
    pub fn columns(self) -> Vec<usize> {
        match self {
            FeatureSet::Bico => BICOHERENCE_COLUMNS.collect(),
            FeatureSet::Full => (0..FEATURE_COUNT).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Bicoherence,
    Melspec,
}

impl Scenario {
    pub fn relabel(self, label: ClassLabel) -> ClassLabel {
        match self {
            Scenario::Binary => label.to_binary(),
            Scenario::Multiclass => label,
        }
    }
}

/// Saved model plus the scenario and column mask it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub scenario: Scenario,
    pub feature_set: FeatureSet,
    /// Indices into the 14 feature columns, in model input order.
    pub columns: Vec<usize>,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn select(&self, values: &[f64; FEATURE_COUNT]) -> Vec<f64> {
        self.columns.iter().map(|&c| values[c]).collect()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Format(format!("unreadable model {}: {e}", path.display())))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Format(format!("unreadable model {}: {e}", path.display())))?;
        // Re-run the version check on the embedded model.
        let inner = serde_json::to_string(&file.model).expect("model serializes");
        TrainedModel::from_json(&inner)
            .map_err(|e| CliError::Format(format!("unreadable model {}: {e}", path.display())))?;
        if file.columns.len() != file.model.dim()
            || file.columns.iter().any(|&c| c >= FEATURE_COUNT)
        {
            return Err(CliError::Format(format!(
                "unreadable model {}: column mask does not match the model",
                path.display()
            )));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }
}

/// Exit status 1 for domain failures, 2 for I/O and format failures.
#[derive(Debug)]
pub enum CliError {
    Domain(String),
    Format(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Format(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) | CliError::Format(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Format(format!("{}: {e}", path.display()))
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::Io(_)
            | AudioError::MalformedContainer(_)
            | AudioError::UnsupportedEncoding(_) => CliError::Format(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Csv(_) => CliError::Format(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Format(_) => CliError::Format(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(_) | DatasetError::Format(_) => CliError::Format(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Dataset(d) => d.into(),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(_) => CliError::Format(e.to_string()),
            SynthError::Audio(a) => a.into(),
            SynthError::Dataset(d) => d.into(),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<BispectrumError> for CliError {
    fn from(e: BispectrumError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<CepstralError> for CliError {
    fn from(e: CepstralError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<VizError> for CliError {
    fn from(e: VizError) -> Self {
        match e {
            VizError::Io(_) => CliError::Format(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

pub fn run(config: RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    match config.command {
        Command::Synth { out: dir, n, seed } => cmd_synth(&dir, n, seed, out),
        Command::Extract {
            manifest,
            out: csv,
            analysis,
        } => cmd_extract(&manifest, &csv, &analysis, out),
        Command::Train {
            features,
            kind,
            kernel_scale,
            knn_k,
            scenario,
            feature_set,
            folds,
            seed,
            out: model,
            report,
        } => {
            let (kind, params) = train_params(kind, kernel_scale, knn_k)?;
            let opts = TrainOptions {
                kind,
                params,
                scenario,
                feature_set,
                folds,
                seed,
            };
            cmd_train(&features, &opts, &model, report.as_deref(), out)
        }
        Command::Evaluate { features, model } => cmd_evaluate(&features, &model, out),
        Command::Predict {
            model,
            wav,
            row,
            analysis,
        } => {
            let input = match (wav, row) {
                (_, Some(row)) => PredictInput::Row(row),
                (Some(wav), None) => PredictInput::Wav(wav),
                (None, None) => unreachable!("clap requires one input"),
            };
            cmd_predict(&model, &input, &analysis, out)
        }
        Command::Plot {
            wav,
            kind,
            out: image,
            scale,
            analysis,
        } => cmd_plot(&wav, kind, &image, scale, &analysis, out),
    }
}

fn say(out: &mut dyn Write, text: impl fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::Format(format!("stdout: {e}")))
}

pub fn cmd_synth(dir: &Path, n: usize, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    if !n.is_multiple_of(2) {
        return Err(CliError::Domain(format!(
            "--n must be even so both classes get n/2 clips, got {n}"
        )));
    }
    let manifest = synthgen::make_corpus(dir, n / 2, seed)?;
    say(
        out,
        format_args!(
            "wrote {} clips and manifest.csv to {}",
            manifest.len(),
            dir.display()
        ),
    )
}

fn thread_cap() -> Option<usize> {
    std::env::var("BISPEECH_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Extracts every manifest entry in parallel. Rows keep manifest order;
/// entries that fail are reported and left out.
pub fn cmd_extract(
    manifest_path: &Path,
    csv_path: &Path,
    analysis: &AnalysisArgs,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    use rayon::prelude::*;

    let manifest = dataset::load_manifest(manifest_path)?;
    let config = analysis.feature_config();
    config.bispectral.validate()?;
    let work = || -> Vec<Result<FeatureVector, CliError>> {
        (0..manifest.len())
            .into_par_iter()
            .map(|i| {
                let path = manifest.resolved_path(i);
                let clip = audio_io::load_mono(&path, analysis.max_seconds)
                    .map_err(|e| io_err(&path, e))?;
                features::extract_features(&clip, &config, manifest.entries()[i].label)
                    .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
            })
            .collect()
    };
    let results = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Domain(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(e),
        }
    }
    let mut buf = Vec::new();
    features::write_feature_csv(&mut buf, &rows)?;
    fs::write(csv_path, buf).map_err(|e| io_err(csv_path, e))?;
    say(
        out,
        format_args!(
            "extracted {} of {} clips to {}",
            rows.len(),
            manifest.len(),
            csv_path.display()
        ),
    )?;
    if failures.is_empty() {
        return Ok(());
    }
    for f in &failures {
        eprintln!("error: {f}");
    }
    Err(CliError::Domain(format!(
        "{} of {} clips failed",
        failures.len(),
        manifest.len()
    )))
}

pub fn train_params(
    kind: KindArg,
    kernel_scale: f64,
    knn_k: usize,
) -> Result<(ModelKind, TrainParams), CliError> {
    if !(kernel_scale > 0.0 && kernel_scale.is_finite()) {
        return Err(CliError::Domain(format!(
            "--kernel-scale must be positive, got {kernel_scale}"
        )));
    }
    if knn_k == 0 {
        return Err(CliError::Domain("--knn-k must be at least 1".into()));
    }
    let mut params = TrainParams {
        knn_k,
        ..TrainParams::default()
    };
    let kind = match kind {
        KindArg::Knn => ModelKind::Knn,
        KindArg::Lda => ModelKind::Lda,
        KindArg::Qda => ModelKind::Qda,
        KindArg::Logistic => ModelKind::Logistic,
        KindArg::SvmLinear => {
            params.svm = SvmParams {
                kernel: Kernel::Linear,
                kernel_scale,
                ..SvmParams::default()
            };
            ModelKind::Svm
        }
        KindArg::SvmQuad => {
            params.svm = SvmParams::quadratic(kernel_scale);
            ModelKind::Svm
        }
    };
    Ok((kind, params))
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub kind: ModelKind,
    pub params: TrainParams,
    pub scenario: Scenario,
    pub feature_set: FeatureSet,
    pub folds: usize,
    pub seed: u64,
}

fn read_features(path: &Path) -> Result<Vec<FeatureVector>, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    features::read_feature_csv(file)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

pub fn cmd_train(
    csv_path: &Path,
    opts: &TrainOptions,
    model_path: &Path,
    report_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let table = read_features(csv_path)?;
    let columns = opts.feature_set.columns();
    let rows: Vec<Vec<f64>> = table
        .iter()
        .map(|r| columns.iter().map(|&c| r.values[c]).collect())
        .collect();
    let labels: Vec<ClassLabel> = table
        .iter()
        .map(|r| opts.scenario.relabel(r.label))
        .collect();
    let mut distinct = labels.clone();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(ClassifyError::SingleClass.into());
    }

    let summary = eval::cross_validate(
        opts.kind,
        &rows,
        &labels,
        opts.folds,
        opts.seed,
        &opts.params,
    )?;
    say(
        out,
        format_args!(
            "{} rows, {} columns, {} classes, {}-fold cross-validation",
            rows.len(),
            columns.len(),
            distinct.len(),
            opts.folds
        ),
    )?;
    write!(out, "{}", summary.to_text()).map_err(|e| CliError::Format(format!("stdout: {e}")))?;
    if let Some(path) = report_path {
        fs::write(path, summary.to_csv()).map_err(|e| io_err(path, e))?;
    }

    let model = TrainedModel::train(opts.kind, &rows, &labels, &opts.params, opts.seed)?;
    let file = ModelFile {
        scenario: opts.scenario,
        feature_set: opts.feature_set,
        columns,
        model,
    };
    fs::write(model_path, file.to_json()).map_err(|e| io_err(model_path, e))?;
    say(
        out,
        format_args!("model written to {}", model_path.display()),
    )
}

pub fn cmd_evaluate(
    csv_path: &Path,
    model_path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let file = ModelFile::load(model_path)?;
    let table = read_features(csv_path)?;
    let classes = &file.model.classes;
    let mut truth = Vec::with_capacity(table.len());
    let mut predicted = Vec::with_capacity(table.len());
    let mut scores = Vec::with_capacity(table.len());
    for row in &table {
        let s = file.model.predict_scores(&file.select(&row.values))?;
        predicted.push(classes[bispeech::classify::argmax(&s)]);
        truth.push(file.scenario.relabel(row.label));
        scores.push(s);
    }
    let cm = eval::confusion(&truth, &predicted, classes)?;
    say(out, format_args!("{} rows", table.len()))?;
    say(out, format_args!("accuracy: {:.4}", cm.accuracy()))?;
    match eval::auc_for(&truth, &scores, classes) {
        Ok(roc) => say(out, format_args!("AUC: {:.4}", roc.auc))?,
        Err(EvalError::SingleClassLabels) => say(out, "AUC: undefined (one class present)")?,
        Err(e) => return Err(e.into()),
    }
    write!(out, "{}", cm.to_text()).map_err(|e| CliError::Format(format!("stdout: {e}")))
}

#[derive(Debug, Clone)]
pub enum PredictInput {
    Wav(PathBuf),
    Row(String),
}

pub fn cmd_predict(
    model_path: &Path,
    input: &PredictInput,
    analysis: &AnalysisArgs,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let file = ModelFile::load(model_path)?;
    let values = match input {
        PredictInput::Row(text) => {
            features::parse_feature_values(text).map_err(|e| CliError::Domain(e.to_string()))?
        }
        PredictInput::Wav(path) => {
            let clip =
                audio_io::load_mono(path, analysis.max_seconds).map_err(|e| io_err(path, e))?;
            features::compute_features(&clip, &analysis.feature_config())?
        }
    };
    let scores = file.model.predict_scores(&file.select(&values))?;
    let best = bispeech::classify::argmax(&scores);
    say(
        out,
        format_args!("prediction: {}", file.model.classes[best]),
    )?;
    for (c, s) in file.model.classes.iter().zip(&scores) {
        say(out, format_args!("score {c}: {s}"))?;
    }
    Ok(())
}

pub fn cmd_plot(
    wav: &Path,
    kind: PlotKind,
    image: &Path,
    scale: usize,
    analysis: &AnalysisArgs,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let clip = audio_io::load_mono(wav, analysis.max_seconds).map_err(|e| io_err(wav, e))?;
    let map = match kind {
        PlotKind::Bicoherence => {
            let config = analysis.feature_config();
            let grid = bispectrum::analyze(&clip, &config.bispectral, config.estimator)?;
            let rows = grid.magnitude.rows().map(<[f64]>::to_vec).collect();
            Heatmap::new(rows, 0.0, 1.0, Colormap::Viridis)?
        }
        PlotKind::Melspec => {
            let mel = cepstral::mel_spectrogram(&clip, &CepstralConfig::default())?;
            let bands = (0..mel.width())
                .map(|b| mel.coeffs.iter().map(|frame| frame[b]).collect())
                .collect();
            Heatmap::auto_range(bands, Colormap::Viridis)?
        }
    };
    viz::render_heatmap(&map, image, scale)?;
    let (lo, hi) = map.value_range();
    let (w, h) = map.pixel_size(scale);
    say(out, format_args!("value range: [{lo}, {hi}]"))?;
    say(
        out,
        format_args!(
            "grid: {} x {}, image: {w} x {h} pixels",
            map.cols(),
            map.rows()
        ),
    )?;
    say(out, format_args!("wrote {}", image.display()))
}
