use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use manhattan_calib::curate::{self, CurateOptions, FovSampling, Interpolation, SamplingOptions};
use manhattan_calib::eval::{self, BinSpec, ErrorRecord, GATE_FRACTIONS};
use manhattan_calib::io::{CameraRecord, ResultFile, SegmentFile};
use manhattan_calib::reliability::{self, FitOptions, ReliabilityModel, TrainingRow};
use manhattan_calib::synth::{self, SegmentCounts, SynthConfig};
use manhattan_calib::{calibrate, DeviationMeasure, EulerAngles, MixtureConfig, SearchConfig};

/// Focal length and camera rotation from line segments of a Manhattan scene.
#[derive(Parser)]
#[command(name = "mcalib", version)]
struct Cli {
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate focal length, roll, tilt and pan from a segment file.
    Calibrate(CalibrateArgs),
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Sample planar projections from a directory of equirectangular panoramas.
    Curate(CurateArgs),
    /// Fit or apply the error predictor.
    #[command(subcommand)]
    Reliability(ReliabilityCommand),
    /// Compare results with ground truth and write error tables.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// JSON segment file, or a whitespace/comma separated table `x1 y1 x2 y2 ...`.
    #[arg(long)]
    segments: PathBuf,
    /// Image width in pixels (required unless the segment file records it).
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    #[arg(long, default_value = "b")]
    measure: DeviationMeasure,
    /// Cap local refinement at 10 iterations.
    #[arg(long)]
    fast: bool,
    /// Mixture configuration JSON; overrides --measure.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// pan,roll,tilt,hfov in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0, 0.0, 90.0])]
    params: Vec<f64>,
    /// vertical,horizontal1,horizontal2,background segment counts.
    #[arg(long, value_delimiter = ',', default_values_t = [30, 30, 30, 10])]
    counts: Vec<usize>,
    /// Endpoint noise standard deviation in pixels.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurateArgs {
    #[arg(long)]
    pano_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 15)]
    per_scene: usize,
    /// Fixed horizontal FOVs in degrees, used equally often.
    #[arg(long, value_delimiter = ',', conflicts_with = "uniform_fov")]
    fovs: Option<Vec<f64>>,
    /// Draw the FOV uniformly from [60, 120] instead.
    #[arg(long)]
    uniform_fov: bool,
    /// Also write a seeded train/test split of the scenes.
    #[arg(long)]
    split: bool,
    /// Nearest-neighbour instead of bilinear sampling.
    #[arg(long)]
    nearest: bool,
}

#[derive(Subcommand)]
enum ReliabilityCommand {
    /// Fit a model from a training CSV.
    Fit {
        /// CSV with columns min_segments,grid_entropy,mean_loglik,roll_err,tilt_err,focal_err.
        #[arg(long)]
        training: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Annotate result files with predicted errors.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        /// Write annotated copies here instead of rewriting the inputs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    /// Result files written by `calibrate`.
    #[arg(long, required = true, num_args = 1..)]
    results: Vec<PathBuf>,
    /// Segment files with ground truth, or a curation manifest.
    #[arg(long, required = true, num_args = 1..)]
    truth: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write the 25/50/75/100 % reliability-gated table.
    #[arg(long)]
    gated: bool,
    /// Write cues and errors as a training CSV for `reliability fit`.
    #[arg(long)]
    training_csv: Option<PathBuf>,
    /// Number of histogram bins for the parameter distributions.
    #[arg(long, default_value_t = 20)]
    hist_bins: usize,
}

fn main() -> ExitCode {
    // Usage errors exit with 1; exit code 2 is reserved for degenerate scenes.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Calibrate(a) => run_calibrate(a),
        Command::Synth(a) => run_synth(a).map(|_| Outcome::Ok),
        Command::Curate(a) => run_curate(a).map(|_| Outcome::Ok),
        Command::Reliability(c) => run_reliability(c).map(|_| Outcome::Ok),
        Command::Evaluate(a) => run_evaluate(a).map(|_| Outcome::Ok),
    };
    match outcome {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Degenerate) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

enum Outcome {
    Ok,
    Degenerate,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_calibrate(a: CalibrateArgs) -> Result<Outcome> {
    let file = SegmentFile::load(&a.segments).with_context(|| format!("reading {}", a.segments.display()))?;
    let width = a.width.or(file.width).ok_or_else(|| anyhow!("--width is required for this segment file"))?;
    let height = a.height.or(file.height).ok_or_else(|| anyhow!("--height is required for this segment file"))?;
    if width == 0 || height == 0 {
        bail!("image dimensions must be positive");
    }
    let config = match &a.config {
        Some(p) => MixtureConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => MixtureConfig::for_measure(a.measure),
    };
    let search = if a.fast { SearchConfig::fast() } else { SearchConfig::default() };
    let result = calibrate(&file.segments(), &config, &search, width, height)?;
    let out = ResultFile::from_result(file.id.clone(), &result, config.measure, a.fast);
    write_output(a.out.as_deref(), &out.to_json_string()?)?;
    if result.degenerate_scene {
        eprintln!("warning: at least one Manhattan direction has no segments assigned");
        return Ok(Outcome::Degenerate);
    }
    Ok(Outcome::Ok)
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let (p, c) = (&a.params, &a.counts);
    if p.len() != 4 {
        bail!("--params takes pan,roll,tilt,hfov");
    }
    if c.len() != 4 {
        bail!("--counts takes vertical,horizontal1,horizontal2,background");
    }
    let config = SynthConfig {
        angles: EulerAngles::new(p[0], p[1], p[2]),
        hfov_deg: p[3],
        width: a.width,
        height: a.height,
        counts: SegmentCounts::new(c[0], c[1], c[2], c[3]),
        noise_px: a.noise,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let scene = synth::generate(&config)?;
    let id = a.id.or_else(|| a.out.as_ref().and_then(|o| o.file_stem()).map(|s| s.to_string_lossy().into_owned()));
    write_output(a.out.as_deref(), &scene.to_segment_file(id).to_json_string()?)
}

fn run_curate(a: CurateArgs) -> Result<()> {
    let fov = if a.uniform_fov {
        FovSampling::uniform()
    } else {
        a.fovs.map(|fovs| FovSampling::Fixed { fovs }).unwrap_or_default()
    };
    let options = CurateOptions {
        seed: a.seed,
        sampling: SamplingOptions { per_scene: a.per_scene, fov, ..SamplingOptions::default() },
        interpolation: if a.nearest { Interpolation::Nearest } else { Interpolation::Bilinear },
        write_split: a.split,
        ..CurateOptions::default()
    };
    let report = curate::curate_directory(&a.pano_dir, &a.out_dir, &options)?;
    for (path, why) in &report.skipped {
        eprintln!("warning: skipped {}: {why}", path.display());
    }
    eprintln!("wrote {} samples to {}", report.manifest.samples.len(), a.out_dir.display());
    Ok(())
}

fn run_reliability(c: ReliabilityCommand) -> Result<()> {
    match c {
        ReliabilityCommand::Fit { training, out, seed, folds } => {
            let text = fs::File::open(&training).with_context(|| format!("reading {}", training.display()))?;
            let rows = reliability::read_training_csv(text)?;
            let options = FitOptions { seed, folds, ..FitOptions::default() };
            let model = reliability::fit_model(&rows, &options)?;
            fs::write(&out, model.to_json_string()?)?;
            eprintln!("fitted on {} rows, K = {:?}", rows.len(), model.k);
        }
        ReliabilityCommand::Predict { model, results, out_dir } => {
            let model = ReliabilityModel::load(&model).with_context(|| format!("reading {}", model.display()))?;
            if let Some(dir) = &out_dir {
                fs::create_dir_all(dir)?;
            }
            for path in results {
                let mut r = ResultFile::load(&path).with_context(|| format!("reading {}", path.display()))?;
                r.predicted_errors = Some(model.predict(&r.cues)?);
                let target = match &out_dir {
                    Some(dir) => dir.join(path.file_name().ok_or_else(|| anyhow!("bad path {}", path.display()))?),
                    None => path,
                };
                fs::write(&target, r.to_json_string()?)?;
            }
        }
    }
    Ok(())
}

/// Ground truth by sample id, from segment files or curation manifests.
fn load_truth(paths: &[PathBuf]) -> Result<HashMap<String, CameraRecord>> {
    let mut truth = HashMap::new();
    for path in paths {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if let Ok(manifest) = curate::Manifest::from_json_str(&text) {
            truth.extend(manifest.samples.into_iter().map(|s| (s.id, s.ground_truth)));
            continue;
        }
        let file = SegmentFile::load(path).with_context(|| format!("reading {}", path.display()))?;
        let id = file.id.ok_or_else(|| anyhow!("{} has no id", path.display()))?;
        let gt = file.ground_truth.ok_or_else(|| anyhow!("{} has no ground truth", path.display()))?;
        truth.insert(id, gt);
    }
    Ok(truth)
}

fn run_evaluate(a: EvaluateArgs) -> Result<()> {
    let truth = load_truth(&a.truth)?;
    let mut records: Vec<ErrorRecord> = Vec::new();
    let mut results: Vec<ResultFile> = Vec::new();
    for path in &a.results {
        let r = ResultFile::load(path).with_context(|| format!("reading {}", path.display()))?;
        let id = r.id.clone().ok_or_else(|| anyhow!("{} has no id", path.display()))?;
        let gt = truth.get(&id).ok_or_else(|| anyhow!("no ground truth for '{id}'"))?;
        records.push(eval::per_image_errors(&r.camera.to_params()?, &gt.to_params()?));
        results.push(r);
    }
    fs::create_dir_all(&a.out_dir)?;

    let rows = eval::aggregate(&records)?;
    fs::write(a.out_dir.join("summary.csv"), eval::summary_csv(&rows)?)?;
    let mut text = eval::summary_text(&rows);

    if a.gated {
        let predictions = results
            .iter()
            .map(|r| r.predicted_errors.ok_or_else(|| anyhow!("result '{}' has no predicted errors", r.id.as_deref().unwrap_or("?"))))
            .collect::<Result<Vec<_>>>()?;
        let gated = eval::gated_table(&records, &predictions, &GATE_FRACTIONS)?;
        fs::write(a.out_dir.join("gated.csv"), eval::gated_csv(&gated)?)?;
        text.push('\n');
        text.push_str(&eval::gated_text(&gated));
    }

    if let Some(path) = &a.training_csv {
        let rows: Vec<(String, TrainingRow)> = results
            .iter()
            .zip(&records)
            .map(|(r, e)| (r.id.clone().unwrap_or_default(), TrainingRow { cues: r.cues, errors: e.targets() }))
            .collect();
        reliability::write_training_csv(fs::File::create(path)?, &rows)?;
    }

    // Distributions of true and estimated parameters.
    let hist = |name: &str, lo: f64, hi: f64, pick: &dyn Fn(&CameraRecord) -> f64| -> Result<()> {
        let bins = BinSpec::new(lo, hi, a.hist_bins)?;
        let est: Vec<f64> = results.iter().map(|r| pick(&r.camera)).collect();
        let gt: Vec<f64> = results.iter().map(|r| pick(&truth[r.id.as_deref().unwrap_or_default()])).collect();
        fs::write(a.out_dir.join(format!("hist_{name}_estimate.csv")), eval::histogram(&est, bins)?.to_csv()?)?;
        fs::write(a.out_dir.join(format!("hist_{name}_truth.csv")), eval::histogram(&gt, bins)?.to_csv()?)?;
        Ok(())
    };
    hist("roll", -15.0, 15.0, &|c| c.roll)?;
    hist("tilt", -35.0, 35.0, &|c| c.tilt)?;
    hist("hfov", 50.0, 130.0, &|c| c.hfov_deg)?;

    fs::write(a.out_dir.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}
