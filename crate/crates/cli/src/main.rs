//! `bhdeskew`: detect and remove probe skew from measured B-H loops.

mod parse;
mod plot;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bhdeskew_core::dataset::{
    filter, format_series_csv, ingest, read_corpus, read_series_csv, split, write_corpus, InterpolatedRecord,
    LabeledSample, SkewGrid, SplitSpec,
};
use bhdeskew_core::fsutil::write_atomic;
use bhdeskew_core::net::{load_model, save_model, ModelParams};
use bhdeskew_core::pipeline::{
    correct, evaluate, finetune_observed, net_offset, predict_skew, read_report, train_observed, write_report,
    EpochLog, EvalReport, NormSource, SkewPrediction, TrainConfig,
};
use bhdeskew_core::raster::{render_source, RasterConfig};
use bhdeskew_core::synth::{CorpusSpec, ParamRanges, Ringing, SynthKind};
use bhdeskew_core::{
    b_from_voltage, core_loss_of, h_from_current, ErrorKind, LoopSource, ShapeTag, SkewOffset, TimeSeries,
    WaveformRecord,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use parse::{Filter, Params, Span, Split};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bhdeskew",
    version,
    about = "Detect and remove probe skew from measured B-H loops",
    after_help = "Exit status: 0 success, 1 usage error, 2 data or format error, 3 numeric failure.\n\
                  BH_DESKEW_THREADS caps worker threads (0 or 1: single-threaded; default: all cores). \
                  Results are identical at any thread count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a material directory of CSV files into a corpus container.
    Ingest(IngestArgs),
    /// Generate a synthetic corpus with known loop geometry.
    Synth(SynthArgs),
    /// Write the exact network input image of one record as a PGM file.
    Render(RenderArgs),
    /// Train a skew regressor from scratch.
    Train(TrainArgs),
    /// Continue training an existing model on a new corpus.
    Finetune(FinetuneArgs),
    /// Estimate the skew of one measured loop.
    Predict(PredictArgs),
    /// Remove the estimated skew from one loop and recompute its core loss.
    Correct(CorrectArgs),
    /// Score a model on held-out operating points.
    Evaluate(EvaluateArgs),
    /// Redraw the report figures from an evaluation report.
    Plot(PlotArgs),
}

#[derive(Args, Serialize)]
struct IngestArgs {
    /// Material directory (b.csv, h.csv, freq.csv, optional temp/bias/shape). Required.
    #[arg(long)]
    dir: PathBuf,
    /// Output corpus file. Required.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum KindArg {
    Ellipse,
    Parallelogram,
    TriangularDuty,
    /// Alternating ellipses and parallelograms.
    Mixed,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// Loop family.
    #[arg(long, value_enum, default_value = "mixed")]
    kind: KindArg,
    /// Parameter range overrides, `key=LO:HI` or `key=VALUE`, comma separated.
    /// Keys: b (tesla: ellipse peak or pk-pk swing), h (A/m: ellipse peak or
    /// coercive offset), slope ((A/m)/T), phase (rad), duty (fraction).
    /// [default: per-family desk-scale ranges]
    #[arg(long, default_value = "")]
    params: Params,
    /// Frequency range in Hz, `LO:HI` or a single value.
    #[arg(long, default_value = "50000:500000")]
    freq: Span,
    /// Samples per period.
    #[arg(long, default_value_t = 1024)]
    samples: usize,
    /// Number of operating points. Required.
    #[arg(long)]
    count: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add damped ringing to H, `AMPLITUDE:MULTIPLE:DAMPING` in A/m, multiples
    /// of the fundamental and fractions of the period. [default: none]
    #[arg(long)]
    ringing: Option<String>,
    /// Output corpus file. Required.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct RenderArgs {
    /// Corpus file. Required.
    #[arg(long)]
    corpus: PathBuf,
    /// Zero-based record index in the corpus. Required.
    #[arg(long)]
    index: usize,
    /// Skew imposed before rendering, in interpolated samples.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    skew: i64,
    /// Interpolation factor.
    #[arg(long, default_value_t = 1000)]
    interp: u32,
    /// Image side in pixels, a multiple of 8.
    #[arg(long, default_value_t = RasterConfig::DEFAULT_SIDE)]
    side: usize,
    /// Zoom window side as a fraction of the normalized extent.
    #[arg(long, default_value_t = RasterConfig::DEFAULT_ZOOM)]
    zoom: f64,
    /// Margin around the loop as a fraction of the image panel.
    #[arg(long, default_value_t = RasterConfig::DEFAULT_MARGIN)]
    margin: f64,
    /// Output PGM file. Required.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct CorpusSelect {
    /// Corpus file. Required.
    #[arg(long)]
    corpus: PathBuf,
    /// Record filter: comma-separated shape=A|B, temp=°C, bias=A/m, freq=LO:HI (Hz). [default: all records]
    #[arg(long, default_value = "")]
    filter: Filter,
    /// Operating-point split, `TRAIN:TEST` counts or a training fraction. [default: no split]
    #[arg(long)]
    split: Option<Split>,
    /// Seed of the operating-point split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Clone, Copy, PartialEq)]
enum Part {
    Train,
    Test,
}

impl CorpusSelect {
    fn load(&self, part: Part) -> anyhow::Result<Vec<WaveformRecord>> {
        let all = read_corpus(&self.corpus)?;
        let kept = filter(&all, &self.filter.0);
        if kept.is_empty() {
            return Err(bhdeskew_core::Error::Dataset(format!(
                "{}: no record passes the filter",
                self.corpus.display()
            ))
            .into());
        }
        let Some(s) = self.split else { return Ok(kept) };
        let (train, test) = split(&kept, &SplitSpec { policy: s.0, seed: self.split_seed })?;
        Ok(if part == Part::Train { train } else { test })
    }
}

#[derive(Args, Serialize)]
struct TrainFlags {
    /// Skew grid half-width n: targets run over -n..=n steps.
    #[arg(long, default_value_t = 20)]
    skew_n: u32,
    /// Skew grid step in interpolated samples.
    #[arg(long, default_value_t = 1000)]
    skew_step: u64,
    /// Training epochs.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Mini-batch size in samples.
    #[arg(long, default_value_t = 500)]
    batch: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 2.5e-3)]
    lr: f64,
    /// Seed for initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop after this many epochs without a lower mean loss. [default: none]
    #[arg(long)]
    patience: Option<usize>,
    /// Render images once per batch instead of caching them (slower, less memory).
    #[arg(long)]
    no_cache: bool,
    /// Training log, one `epoch,mean_loss` line per epoch. [default: <out>.log]
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    select: CorpusSelect,
    #[command(flatten)]
    flags: TrainFlags,
    /// Interpolation factor.
    #[arg(long, default_value_t = 1000)]
    interp: u32,
    /// Network input side in pixels, a multiple of 8.
    #[arg(long, default_value_t = RasterConfig::DEFAULT_SIDE)]
    side: usize,
    /// Output model file. Required.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NormArg {
    New,
    Base,
}

#[derive(Args, Serialize)]
struct FinetuneArgs {
    /// Model to start from. Required.
    #[arg(long)]
    base: PathBuf,
    #[command(flatten)]
    select: CorpusSelect,
    #[command(flatten)]
    flags: TrainFlags,
    /// Normalization statistics: refit on the new corpus or keep the base model's.
    #[arg(long, value_enum, default_value = "new")]
    norm: NormArg,
    /// Output model file. Required.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct WaveformInput {
    /// Flux density over one period, tesla; one row or one column.
    #[arg(long, requires = "h", conflicts_with_all = ["v", "i"])]
    b: Option<PathBuf>,
    /// Field strength over one period, A/m.
    #[arg(long, requires = "b")]
    h: Option<PathBuf>,
    /// Sense-winding voltage over one period, V (alternative to --b/--h).
    #[arg(long, requires_all = ["i", "n1", "n2", "ae", "le"])]
    v: Option<PathBuf>,
    /// Excitation current over one period, A.
    #[arg(long, requires = "v")]
    i: Option<PathBuf>,
    /// Primary turns (with --v/--i). [default: none]
    #[arg(long)]
    n1: Option<u32>,
    /// Secondary turns (with --v/--i). [default: none]
    #[arg(long)]
    n2: Option<u32>,
    /// Effective core area, m² (with --v/--i). [default: none]
    #[arg(long)]
    ae: Option<f64>,
    /// Effective magnetic path length, m (with --v/--i). [default: none]
    #[arg(long)]
    le: Option<f64>,
    /// Fundamental frequency in Hz. Required.
    #[arg(long)]
    freq: f64,
}

impl WaveformInput {
    fn record(&self) -> anyhow::Result<WaveformRecord> {
        let series = |p: &Path| -> anyhow::Result<TimeSeries> {
            Ok(TimeSeries::new(read_series_csv(p)?, self.freq).with_context(|| p.display().to_string())?)
        };
        let (b, h) = match (&self.b, &self.h, &self.v, &self.i) {
            (Some(b), Some(h), _, _) => (series(b)?, series(h)?),
            (_, _, Some(v), Some(i)) => {
                let (n1, n2, ae, le) = (self.n1.unwrap(), self.n2.unwrap(), self.ae.unwrap(), self.le.unwrap());
                (b_from_voltage(&series(v)?, n2, ae)?, h_from_current(&series(i)?, n1, le)?)
            }
            _ => {
                return Err(UsageError("give either --b and --h, or --v and --i with --n1 --n2 --ae --le".into()).into())
            }
        };
        Ok(WaveformRecord::new("input", b, h, "input", 25.0, 0.0, ShapeTag::Other)?)
    }
}

#[derive(Args, Serialize)]
struct PredictArgs {
    /// Model file. Required.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: WaveformInput,
}

#[derive(Args, Serialize)]
struct CorrectArgs {
    /// Model file; required unless --skew-from is given. [default: none]
    #[arg(long, required_unless_present = "skew_from")]
    model: Option<PathBuf>,
    #[command(flatten)]
    input: WaveformInput,
    /// Read the skew (interpolated samples, one integer) from this file instead of predicting it. [default: none]
    #[arg(long)]
    skew_from: Option<PathBuf>,
    /// Interpolation factor when no model is given. [default: the model's, else 1000]
    #[arg(long)]
    interp: Option<u32>,
    /// Write every interpolated sample of the corrected H instead of the original sample grid.
    #[arg(long)]
    full_resolution: bool,
    /// Output CSV with the corrected H, A/m, one value per line. Required.
    #[arg(long)]
    out: PathBuf,
    /// Correction report (skew and core loss before and after). [default: none]
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// Model file. Required.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    select: CorpusSelect,
    /// Output report file. Required.
    #[arg(long)]
    out: PathBuf,
    /// Directory for SVG figures. [default: none]
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PlotArgs {
    /// Evaluation report. Required.
    #[arg(long)]
    report: PathBuf,
    /// Output directory. Required.
    #[arg(long)]
    out: PathBuf,
}

/// A bad combination of otherwise valid flags.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(err) = cause.downcast_ref::<bhdeskew_core::Error>() {
            return match err.kind() {
                ErrorKind::Invalid => EXIT_USAGE,
                ErrorKind::Numeric => EXIT_NUMERIC,
                ErrorKind::Data | ErrorKind::Format | ErrorKind::Io => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            let code = match e.kind() {
                K::DisplayHelp | K::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn show_config<T: Serialize>(name: &str, cfg: &T) {
    let json = serde_json::to_string(cfg).unwrap_or_else(|e| format!("<unprintable: {e}>"));
    eprintln!("{name} config: {json}");
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Ingest(a) => {
            show_config("ingest", &a);
            let records = ingest(&a.dir)?;
            write_corpus(&a.out, &records)?;
            eprintln!("wrote {} records to {}", records.len(), a.out.display());
        }
        Command::Synth(a) => synth(a)?,
        Command::Render(a) => {
            show_config("render", &a);
            let records = read_corpus(&a.corpus)?;
            let r = records.get(a.index).ok_or_else(|| {
                bhdeskew_core::Error::Dataset(format!(
                    "{}: index {} out of range ({} records)",
                    a.corpus.display(),
                    a.index,
                    records.len()
                ))
            })?;
            let ir = InterpolatedRecord::new(r.clone(), a.interp)?;
            let cfg = RasterConfig { side: a.side, zoom: a.zoom, margin: a.margin };
            let img = render_source(&ir.skewed_loop(ir.skew(a.skew)?)?, &cfg)?;
            write_atomic(&a.out, &img.to_pgm())?;
        }
        Command::Train(a) => {
            let cfg = train_config(&a.flags, a.interp, RasterConfig::new(a.side), NormSource::New);
            show_config("train", &serde_json::json!({ "args": &a, "effective": &cfg }));
            let records = a.select.load(Part::Train)?;
            let samples = cfg.augment(&records)?;
            eprintln!("training on {} operating points, {} samples", records.len(), samples.len());
            let mut log = EpochLogger::open(&a.flags.log, &a.out)?;
            let out = train_observed(&samples, &cfg, |l| log.line(l))?;
            finish_training(&out.model, out.stopped_early, &a.out)?;
        }
        Command::Finetune(a) => {
            let base = load_model(&a.base)?;
            let norm = match a.norm {
                NormArg::New => NormSource::New,
                NormArg::Base => NormSource::Base,
            };
            let cfg = train_config(&a.flags, base.meta.interp_factor, base.meta.raster.clone(), norm);
            show_config("finetune", &serde_json::json!({ "args": &a, "effective": &cfg }));
            let records = a.select.load(Part::Train)?;
            let samples = cfg.augment(&records)?;
            eprintln!("fine-tuning on {} operating points, {} samples", records.len(), samples.len());
            let mut log = EpochLogger::open(&a.flags.log, &a.out)?;
            let out = finetune_observed(&base, &samples, &cfg, |l| log.line(l))?;
            finish_training(&out.model, out.stopped_early, &a.out)?;
        }
        Command::Predict(a) => {
            show_config("predict", &a);
            let model = load_model(&a.model)?;
            let ir = InterpolatedRecord::new(a.input.record()?, model.meta.interp_factor)?;
            print_prediction(&predict_skew(&model, &ir)?);
        }
        Command::Correct(a) => correct_cmd(a)?,
        Command::Evaluate(a) => {
            show_config("evaluate", &a);
            let model = load_model(&a.model)?;
            let records = a.select.load(Part::Test)?;
            let samples = bhdeskew_core::dataset::augment_all(&records, model.meta.interp_factor, model.meta.grid)?;
            eprintln!("evaluating {} operating points, {} samples", records.len(), samples.len());
            let report = evaluate(&model, &samples)?;
            write_report(&report, &a.out)?;
            let g = &report.aggregates;
            println!("samples: {}", g.count);
            println!("mean_skew_rel_error: {}", g.mean_skew_rel_error);
            println!("median_skew_rel_error: {}", g.median_skew_rel_error);
            println!("p95_skew_rel_error: {}", g.p95_skew_rel_error);
            println!("mean_abs_deviation_before: {}", g.mean_abs_deviation_before);
            println!("mean_abs_deviation_after: {}", g.mean_abs_deviation_after);
            if let Some(dir) = &a.plots {
                write_figures(&report, dir)?;
                let worst = worst_sample(&report);
                write_overlay(&samples[worst], &report, worst, dir)?;
            }
        }
        Command::Plot(a) => {
            show_config("plot", &a);
            let report = read_report(&a.report)?;
            write_figures(&report, &a.out)?;
        }
    }
    Ok(())
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    show_config("synth", &a);
    if a.count == 0 {
        return Err(UsageError("--count must be at least 1".into()).into());
    }
    let kinds: &[SynthKind] = match a.kind {
        KindArg::Ellipse => &[SynthKind::Ellipse],
        KindArg::Parallelogram => &[SynthKind::Parallelogram],
        KindArg::TriangularDuty => &[SynthKind::TriangularDuty],
        KindArg::Mixed => &[SynthKind::Ellipse, SynthKind::Parallelogram],
    };
    let ringing = match &a.ringing {
        None => None,
        Some(s) => {
            let v: Vec<f64> = s
                .split(':')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| UsageError(format!("--ringing {s:?}: expected AMPLITUDE:MULTIPLE:DAMPING")))?;
            let [amplitude, frequency_multiple, damping] = v[..] else {
                return Err(UsageError(format!("--ringing {s:?}: expected three values")).into());
            };
            Some(Ringing { amplitude, frequency_multiple, damping })
        }
    };
    let spec = CorpusSpec {
        families: kinds.iter().map(|&k| (k, a.params.apply(ParamRanges::default_for(k)))).collect(),
        frequency: (a.freq.0, a.freq.1),
        samples: a.samples,
        count: a.count,
        seed: a.seed,
        ringing,
    };
    show_config("synth effective", &spec);
    let records = spec.generate()?;
    write_corpus(&a.out, &records)?;
    eprintln!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

fn train_config(f: &TrainFlags, interp: u32, raster: RasterConfig, norm: NormSource) -> TrainConfig {
    TrainConfig {
        epochs: f.epochs,
        batch: f.batch,
        lr: f.lr,
        seed: f.seed,
        grid: SkewGrid { half_width: f.skew_n, step: f.skew_step },
        interp_factor: interp,
        raster,
        patience: f.patience,
        cache_images: !f.no_cache,
        norm_source: norm,
    }
}

/// Writes each epoch line to stderr and to the log file.
struct EpochLogger {
    path: PathBuf,
    file: fs::File,
}

impl EpochLogger {
    fn open(log: &Option<PathBuf>, out: &Path) -> anyhow::Result<Self> {
        let path = log.clone().unwrap_or_else(|| {
            let mut s = out.as_os_str().to_owned();
            s.push(".log");
            PathBuf::from(s)
        });
        let file = fs::File::create(&path).map_err(|e| bhdeskew_core::Error::Io { path: path.clone(), source: e })?;
        Ok(Self { path, file })
    }

    fn line(&mut self, l: &EpochLog) -> bhdeskew_core::Result<()> {
        eprintln!("epoch {} mean loss {}", l.epoch, l.mean_loss);
        writeln!(self.file, "{}", l.line())
            .and_then(|_| self.file.flush())
            .map_err(|e| bhdeskew_core::Error::Io { path: self.path.clone(), source: e })
    }
}

fn finish_training(model: &ModelParams, stopped_early: bool, out: &Path) -> anyhow::Result<()> {
    if stopped_early {
        eprintln!("stopped early: no improvement within the patience window");
    }
    save_model(model, out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn print_prediction(p: &SkewPrediction) {
    println!("skew_index: {}", p.skew.delta());
    println!("skew_index_raw: {}", p.raw_index);
    println!("skew_degrees: {}", p.degrees);
    println!("skew_ns: {}", p.nanoseconds);
    println!("frequency_hz: {}", p.frequency);
}

#[derive(Serialize)]
struct CorrectionReport {
    skew_source: &'static str,
    skew_index: i64,
    skew_degrees: f64,
    skew_ns: f64,
    frequency_hz: f64,
    interp_factor: u32,
    core_loss_before: f64,
    core_loss_after: f64,
}

fn correct_cmd(a: CorrectArgs) -> anyhow::Result<()> {
    show_config("correct", &a);
    let model = a.model.as_deref().map(load_model).transpose()?;
    let interp = match (&model, a.interp) {
        (Some(m), Some(k)) if k != m.meta.interp_factor => {
            return Err(UsageError(format!(
                "--interp {k} disagrees with the model's interpolation factor {}",
                m.meta.interp_factor
            ))
            .into())
        }
        (Some(m), _) => m.meta.interp_factor,
        (None, k) => k.unwrap_or(1000),
    };
    let ir = InterpolatedRecord::new(a.input.record()?, interp)?;
    let (skew, source) = match (&a.skew_from, &model) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| bhdeskew_core::Error::Io { path: p.clone(), source: e })?;
            let d: i64 = text.trim().parse().map_err(|_| bhdeskew_core::Error::Data {
                path: p.clone(),
                message: format!("expected one integer, found {:?}", text.trim()),
            })?;
            (ir.skew(d)?, "file")
        }
        (None, Some(m)) => {
            let p = predict_skew(m, &ir)?;
            print_prediction(&p);
            (p.skew, "model")
        }
        (None, None) => unreachable!("clap requires --model or --skew-from"),
    };
    let f = ir.raw().frequency();
    let before = core_loss_of(&ir.skewed_loop(ir.skew(0)?)?, f)?;
    let fixed = correct(&ir.materialize()?, skew)?;
    let h = fixed.record.h().values();
    let h: Vec<f64> = if a.full_resolution { h.to_vec() } else { h.iter().step_by(interp as usize).copied().collect() };
    write_atomic(&a.out, format_series_csv(&h).as_bytes())?;
    println!("core_loss_before: {before}");
    println!("core_loss_after: {}", fixed.core_loss);
    if let Some(path) = &a.report {
        let r = CorrectionReport {
            skew_source: source,
            skew_index: skew.delta(),
            skew_degrees: skew.degrees(),
            skew_ns: skew.nanoseconds(f),
            frequency_hz: f,
            interp_factor: interp,
            core_loss_before: before,
            core_loss_after: fixed.core_loss,
        };
        let mut text = serde_json::to_string_pretty(&r)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn write_figures(report: &EvalReport, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| bhdeskew_core::Error::Io { path: dir.to_path_buf(), source: e })?;
    write_atomic(&dir.join("skew_error_histogram.svg"), plot::error_histogram(report).as_bytes())?;
    write_atomic(&dir.join("loss_deviation_scatter.svg"), plot::deviation_scatter(report).as_bytes())?;
    Ok(())
}

/// Row with the largest skew-induced loss deviation; first one on ties.
fn worst_sample(report: &EvalReport) -> usize {
    let mut best = 0;
    for (i, r) in report.rows.iter().enumerate() {
        if r.deviation_before.abs() > report.rows[best].deviation_before.abs() {
            best = i;
        }
    }
    best
}

fn write_overlay(sample: &LabeledSample, report: &EvalReport, row: usize, dir: &Path) -> anyhow::Result<()> {
    let src = sample.source();
    let r = &report.rows[row];
    let pred = src.skew(r.predicted_skew)?;
    let residual: SkewOffset = net_offset(sample.target(), pred)?;
    let k = src.interp_factor() as usize;
    let thin = |skew| -> anyhow::Result<Vec<(f64, f64)>> {
        let mut v = Vec::with_capacity(src.base_length());
        let mut i = 0;
        src.skewed_loop(skew)?.visit(|h, b| {
            if i % k == 0 {
                v.push((h, b));
            }
            i += 1;
        });
        Ok(v)
    };
    let title = format!("{}: skew {} -> residual {} samples", r.origin_id, r.true_skew, residual.delta());
    let svg = plot::loop_overlay(&title, &thin(sample.target())?, &thin(residual)?);
    write_atomic(&dir.join("loop_overlay.svg"), svg.as_bytes())?;
    Ok(())
}
