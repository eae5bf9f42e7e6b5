//! Command-line front end.
//!
//! Every subcommand writes fixed file names into `--output`, which is created
//! when missing; inputs are never modified. Label arrays travel as `T x H x W`
//! NPY files with a JSON sidecar of timestamps next to them (`x.npy` pairs with
//! `x.json` unless `--timestamps` says otherwise).
//!
//! Settings resolve as: command-line flags, then the `--config` JSON file, then
//! built-in defaults. Exit status is 0 on success, 1 for invalid arguments or
//! data and 2 for filesystem failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{
    self, cadence, format_timestamp, npy, render_frame, Channel, ChannelStack, GeoContext, LabelGrid, LabelSequence,
    Sidecar, Taxonomy,
};
use crate::nowcast::{
    invert_and_extrapolate_with, persistence_forecast, tune_tvl1, ForecastSet, ParamGrid, TuneConfig, TvL1Params,
    HORIZON,
};
use crate::pipeline::{crop_center, downsample_majority, repair_gaps, split, SplitSpec};
use crate::segmentation::{reduce_sequence, segment_frame, NwpFields, OpacityConfig};
use crate::verify::{generate_synthetic, FlowKind, MetricsAccumulator, MetricsReport, SyntheticSpec};

/// Caps the worker threads used inside a subcommand.
pub const THREADS_ENV: &str = "CLOUDCAST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tvl1,
    Persistence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub method: Method,
    pub steps: usize,
    /// Gaussian smoothing (px) of the class intensities before flow estimation.
    pub smoothing_sigma: f64,
    /// Use every n-th eligible origin.
    pub origin_stride: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            method: Method::Tvl1,
            steps: HORIZON,
            smoothing_sigma: 0.0,
            origin_stride: 1,
        }
    }
}

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub opacity: OpacityConfig,
    pub tvl1: TvL1Params,
    pub split: SplitSpec,
    pub synthetic: SyntheticSpec,
    pub forecast: ForecastConfig,
    pub lattice: ParamGrid,
    pub tune: TuneConfig,
    /// Seed for both the synthetic generator and the origin sampling of `tune`.
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|source| Error::Json {
                    path: p.to_path_buf(),
                    source,
                })?
            }
        };
        if let Some(seed) = cfg.seed {
            cfg.apply_seed(seed);
        }
        Ok(cfg)
    }

    fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.synthetic.seed = seed;
        self.tune.seed = seed;
    }
}

#[derive(Parser, Debug)]
#[command(name = "cloudcast", version, about = "Cloud-type segmentation, nowcasting and forecast verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Input NPY array
    #[arg(long)]
    input: PathBuf,
    /// Timestamp sidecar [default: input with a .json extension]
    #[arg(long)]
    timestamps: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    output: PathBuf,
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label observations in the 11-class taxonomy from a directory of NPY planes
    Segment {
        /// Directory holding vis06/wv73/ir87/ir108/ir120, t_sfc/t950/t850/t700/t500/t_tropo
        /// [tcwv], solar_zenith/satellite_zenith [land_sea] and cloud_mask planes
        #[arg(long)]
        input: PathBuf,
        /// Timestamp sidecar [default: <input>/timestamps.json]
        #[arg(long)]
        timestamps: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fill short gaps in the quarter-hour sequence
    Repair(Common),
    /// Cut a sequence into training and test parts in time
    Split {
        #[command(flatten)]
        common: Common,
        /// Share of frames that go to training
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Map 11-class labels onto the 4-class taxonomy
    Reduce(Common),
    /// Majority-vote downsampling by an integer factor
    Downsample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        factor: usize,
    },
    /// Centre crop to N or HxW pixels
    Crop {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: String,
    },
    /// Forecast from every eligible origin of a 4-class sequence
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Grid search of the flow parameters on a training sequence
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score predictions against observations
    Eval {
        /// Prediction (an NPY file or a directory of forecast_*.npy), then the observed sequence
        #[arg(long, required = true, num_args = 1)]
        input: Vec<PathBuf>,
        /// Sidecar of the observed sequence
        #[arg(long)]
        timestamps: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic advected scene with its true flow
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// translation:vx,vy or rotation:cx,cy,omega
        #[arg(long)]
        flow: Option<String>,
        #[arg(long)]
        frames: Option<usize>,
        /// N or HxW
        #[arg(long)]
        size: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write one indexed PNG per frame
    Render(Common),
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    match configure_threads().and_then(|()| execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // Already initialised when run more than once in a process; keep the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Segment {
            input,
            timestamps,
            output,
            config,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let meta = timestamps.unwrap_or_else(|| input.join("timestamps.json"));
            let seq = segment_directory(&input, &meta, &cfg.opacity)?;
            save(&seq, &output, "labels")
        }
        Command::Repair(c) => {
            let seq = load(&c, Taxonomy::Reduced4)?;
            let (repaired, report) = repair_gaps(&seq)?;
            save(&repaired, &c.output, "repaired")?;
            write_json(&c.output.join("gaps.json"), &report)?;
            println!("repaired {} frames in {} gaps", report.repaired_frames(), report.runs.len());
            Ok(())
        }
        Command::Split { common, fraction } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            if let Some(f) = fraction {
                cfg.split = SplitSpec::with_fraction(f);
            }
            let seq = load(&common, Taxonomy::Reduced4)?;
            let (train, test, boundary) = split(&seq, &cfg.split)?;
            save(&train, &common.output, "train")?;
            save(&test, &common.output, "test")?;
            write_json(
                &common.output.join("split.json"),
                &serde_json::json!({
                    "boundary": format_timestamp(&boundary),
                    "train_frames": train.len(),
                    "test_frames": test.len(),
                    "split": cfg.split,
                }),
            )
        }
        Command::Reduce(c) => {
            let seq = load(&c, Taxonomy::Full11)?;
            save(&reduce_sequence(&seq)?, &c.output, "reduced")
        }
        Command::Downsample { common, factor } => {
            let seq = load(&common, Taxonomy::Reduced4)?;
            save(&downsample_majority(&seq, factor)?, &common.output, "downsampled")
        }
        Command::Crop { common, size } => {
            let (h, w) = parse_size(&size)?;
            let seq = load(&common, Taxonomy::Reduced4)?;
            save(&crop_center(&seq, h, w)?, &common.output, "cropped")
        }
        Command::Forecast { common, method, steps } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            if let Some(m) = method {
                cfg.forecast.method = m;
            }
            if let Some(s) = steps {
                cfg.forecast.steps = s;
            }
            let seq = load(&common, Taxonomy::Reduced4)?;
            let forecasts = forecast_all(&seq, &cfg)?;
            for f in &forecasts {
                let stem = format!("forecast_{}", f.origin().format("%Y%m%dT%H%M"));
                f.save(common.output.join(format!("{stem}.npy")), common.output.join(format!("{stem}.json")))?;
            }
            println!("wrote {} forecasts to {}", forecasts.len(), common.output.display());
            Ok(())
        }
        Command::Tune { common, steps, seed } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            if let Some(s) = steps {
                cfg.tune.steps = s;
            }
            if let Some(s) = seed {
                cfg.apply_seed(s);
            }
            let seq = load(&common, Taxonomy::Reduced4)?;
            let (best, report) = tune_tvl1(&seq, &cfg.lattice.combinations(), &cfg.tune)?;
            write_json(&common.output.join("tuning.json"), &report)?;
            write_json(&common.output.join("best_config.json"), &serde_json::json!({ "tvl1": best }))?;
            println!(
                "best combination {} of {}: mean accuracy {:.4}",
                report.best_index, report.lattice_size, report.best_mean_accuracy
            );
            Ok(())
        }
        Command::Eval {
            input,
            timestamps,
            output,
            config,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let [pred, truth] = input.as_slice() else {
                return Err(Error::invalid(
                    "eval takes --input twice: the prediction, then the observed sequence",
                ));
            };
            let truth_meta = timestamps.unwrap_or_else(|| truth.with_extension("json"));
            let observed = grids::load_sequence(truth, &truth_meta, Taxonomy::Reduced4)?;
            let (report, with_reference) = evaluate_files(pred, &observed)?;
            let doc = MetricsDocument {
                report,
                reference: with_reference.then_some("persistence"),
                prediction: pred.display().to_string(),
                truth: truth.display().to_string(),
                config: cfg,
            };
            write_json(&output.join("metrics.json"), &doc)?;
            grids::write_file(&output.join("per_step_accuracy.csv"), doc.report.per_step_csv().as_bytes())?;
            println!("mean accuracy {:.4} over {} forecasts", doc.report.mean_accuracy, doc.report.forecasts);
            Ok(())
        }
        Command::Synth {
            output,
            config,
            flow,
            frames,
            size,
            seed,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            if let Some(f) = flow {
                cfg.synthetic.flow = f.parse::<FlowKind>()?;
            }
            if let Some(n) = frames {
                cfg.synthetic.frames = n;
            }
            if let Some(s) = size {
                (cfg.synthetic.height, cfg.synthetic.width) = parse_size(&s)?;
            }
            if let Some(s) = seed {
                cfg.apply_seed(s);
            }
            let (seq, flow) = generate_synthetic(&cfg.synthetic)?;
            save(&seq, &output, "synthetic")?;
            let (h, w) = flow.dims();
            let uv: Vec<f64> = flow.u().iter().chain(flow.v()).copied().collect();
            grids::write_file(&output.join("flow.npy"), &npy::encode_f64(&[2, h, w], &uv))?;
            write_json(&output.join("synthetic_spec.json"), &cfg.synthetic)
        }
        Command::Render(c) => {
            let seq = load(&c, Taxonomy::Reduced4)?;
            for frame in seq.frames() {
                let name = format!("{}.png", frame.timestamp().format("%Y%m%dT%H%M"));
                render_frame(frame, c.output.join(name))?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct MetricsDocument {
    #[serde(flatten)]
    report: MetricsReport,
    reference: Option<&'static str>,
    prediction: String,
    truth: String,
    config: RunConfig,
}

fn load(c: &Common, declared: Taxonomy) -> Result<LabelSequence> {
    let meta = c.timestamps.clone().unwrap_or_else(|| c.input.with_extension("json"));
    grids::load_sequence(&c.input, meta, declared)
}

fn save(seq: &LabelSequence, dir: &Path, stem: &str) -> Result<()> {
    grids::save_sequence(seq, dir.join(format!("{stem}.npy")), dir.join(format!("{stem}.json")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    grids::write_file(path, text.as_bytes())
}

/// `N` for a square or `HxW`.
fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::invalid(format!("size {s:?} is not N or HxW"));
    let parse = |p: &str| p.trim().parse::<usize>().map_err(|_| bad());
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

/// Origins with a previous frame and a complete verifying window inside the
/// sequence, thinned by the configured stride. A sequence too short for any
/// such origin is forecast from its last frame.
fn forecast_all(seq: &LabelSequence, cfg: &RunConfig) -> Result<Vec<ForecastSet>> {
    let fc = &cfg.forecast;
    if seq.taxonomy() != Taxonomy::Reduced4 {
        return Err(Error::invalid("forecasting needs 4-class labels; run `reduce` first"));
    }
    if fc.steps == 0 || fc.steps > HORIZON {
        return Err(Error::invalid(format!("steps must lie in 1..={HORIZON}, got {}", fc.steps)));
    }
    if fc.origin_stride == 0 {
        return Err(Error::invalid("origin_stride must be positive"));
    }
    cfg.tvl1.validate()?;
    let frames = seq.frames();
    let mut origins: Vec<usize> = (1..frames.len())
        .filter(|&t| t + fc.steps < frames.len())
        .step_by(fc.origin_stride)
        .collect();
    if origins.is_empty() {
        origins.push(frames.len() - 1);
    }
    let produced = origins
        .par_iter()
        .map(|&t| match fc.method {
            Method::Persistence => persistence_forecast(&frames[t], fc.steps).map(Some),
            Method::Tvl1 => {
                if t == 0 || frames[t].timestamp() - frames[t - 1].timestamp() != cadence() {
                    log::warn!(
                        "skipping origin {}: no frame one step earlier",
                        format_timestamp(&frames[t].timestamp())
                    );
                    return Ok(None);
                }
                invert_and_extrapolate_with(&frames[t], &frames[t - 1], &cfg.tvl1, fc.steps, fc.smoothing_sigma)
                    .map(|(f, _)| Some(f))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let forecasts: Vec<ForecastSet> = produced.into_iter().flatten().collect();
    if forecasts.is_empty() {
        return Err(Error::InsufficientFrames {
            needed: 2,
            available: frames.len(),
        });
    }
    Ok(forecasts)
}

/// Prediction files under `pred`: the file itself, or every `forecast_*.npy`
/// in the directory in name order.
fn prediction_files(pred: &Path) -> Result<Vec<PathBuf>> {
    if !pred.is_dir() {
        return Ok(vec![pred.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(pred).map_err(|e| Error::io(pred, e))? {
        let path = entry.map_err(|e| Error::io(pred, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("forecast_") && name.ends_with(".npy") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::invalid(format!("no forecast_*.npy files in {}", pred.display())));
    }
    Ok(files)
}

/// Scores every prediction whose frames all appear in `observed`. Persistence
/// from the observed origin frame is the skill reference; the flag reports
/// whether every prediction had one.
fn evaluate_files(pred: &Path, observed: &LabelSequence) -> Result<(MetricsReport, bool)> {
    let mut acc = MetricsAccumulator::new();
    let mut with_reference = true;
    for file in prediction_files(pred)? {
        let meta = file.with_extension("json");
        let predicted = grids::load_sequence(&file, &meta, Taxonomy::Reduced4)?;
        let origin: DateTime<Utc> = match Sidecar::read(&meta)?.parsed_origin()? {
            Some(o) => o,
            None => predicted.frames()[0].timestamp() - cadence(),
        };
        let Some(truth) = predicted
            .frames()
            .iter()
            .map(|f| observed.position(f.timestamp()).map(|i| observed.frames()[i].clone()))
            .collect::<Option<Vec<LabelGrid>>>()
        else {
            log::warn!("{}: not every predicted time is observed; skipped", file.display());
            continue;
        };
        let reference = match observed.position(origin) {
            Some(i) => Some(
                predicted
                    .frames()
                    .iter()
                    .map(|f| observed.frames()[i].with_timestamp(f.timestamp()))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        with_reference &= reference.is_some();
        acc.add_frames(predicted.frames(), &truth, reference.as_deref())?;
    }
    let report = acc.finish()?;
    Ok((report, with_reference))
}

/// One NPY plane: `H x W` (shared by all frames) or `T x H x W`.
struct PlaneFile {
    shape: Vec<usize>,
    data: npy::NpyData,
}

impl PlaneFile {
    fn read(dir: &Path, name: &str, required: bool) -> Result<Option<Self>> {
        let path = dir.join(format!("{name}.npy"));
        if !path.exists() {
            if required {
                return Err(Error::io(
                    &path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, format!("required plane {name} is missing")),
                ));
            }
            return Ok(None);
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let a = npy::NpyArray::parse(&bytes)?;
        Ok(Some(PlaneFile {
            shape: a.shape,
            data: a.data,
        }))
    }

    fn frame_range(&self, name: &str, t: usize, frames: usize, h: usize, w: usize) -> Result<std::ops::Range<usize>> {
        let n = h * w;
        match self.shape.as_slice() {
            [a, b] if (*a, *b) == (h, w) => Ok(0..n),
            [f, a, b] if (*f, *a, *b) == (frames, h, w) => Ok(t * n..(t + 1) * n),
            other => Err(Error::shape(format!(
                "{name} has shape {other:?}; expected ({h}, {w}) or ({frames}, {h}, {w})"
            ))),
        }
    }

    fn frame_f64(&self, name: &str, t: usize, frames: usize, h: usize, w: usize) -> Result<Vec<f64>> {
        let r = self.frame_range(name, t, frames, h, w)?;
        Ok(self.data.to_f64()[r].to_vec())
    }

    fn frame_bool(&self, name: &str, t: usize, frames: usize, h: usize, w: usize) -> Result<Vec<bool>> {
        let r = self.frame_range(name, t, frames, h, w)?;
        Ok(self.data.to_bool()[r].to_vec())
    }
}

const NWP_PLANES: [&str; 6] = ["t_sfc", "t950", "t850", "t700", "t500", "t_tropo"];

fn segment_directory(dir: &Path, meta: &Path, opacity: &OpacityConfig) -> Result<LabelSequence> {
    opacity.validate()?;
    let timestamps = Sidecar::read(meta)?.parsed_timestamps()?;
    if timestamps.is_empty() {
        return Err(Error::Timestamps("no timestamps".into()));
    }
    let frames = timestamps.len();
    let mask = PlaneFile::read(dir, "cloud_mask", true)?.expect("required");
    let (h, w) = match mask.shape.as_slice() {
        [h, w] | [_, h, w] => (*h, *w),
        other => return Err(Error::shape(format!("cloud_mask has shape {other:?}"))),
    };
    let channels = Channel::ALL
        .iter()
        .map(|c| Ok((*c, PlaneFile::read(dir, c.file_stem(), false)?)))
        .collect::<Result<Vec<_>>>()?;
    let nwp = NWP_PLANES
        .iter()
        .map(|n| Ok(PlaneFile::read(dir, n, true)?.expect("required")))
        .collect::<Result<Vec<_>>>()?;
    let tcwv = PlaneFile::read(dir, "tcwv", false)?;
    let sza = PlaneFile::read(dir, "solar_zenith", true)?.expect("required");
    let vza = PlaneFile::read(dir, "satellite_zenith", true)?.expect("required");
    let land = PlaneFile::read(dir, "land_sea", false)?;

    let labelled = (0..frames)
        .into_par_iter()
        .map(|t| {
            let mut stack = ChannelStack::new(h, w, timestamps[t])?;
            for (c, plane) in &channels {
                if let Some(p) = plane {
                    stack = stack.with_channel(*c, p.frame_f64(c.file_stem(), t, frames, h, w)?)?;
                }
            }
            let level = |i: usize| nwp[i].frame_f64(NWP_PLANES[i], t, frames, h, w);
            let fields = NwpFields {
                height: h,
                width: w,
                t_sfc: level(0)?,
                t950: level(1)?,
                t850: level(2)?,
                t700: level(3)?,
                t500: level(4)?,
                t_tropo: level(5)?,
                tcwv: match &tcwv {
                    Some(p) => p.frame_f64("tcwv", t, frames, h, w)?,
                    None => vec![0.0; h * w],
                },
            };
            let geo = GeoContext::new(
                h,
                w,
                sza.frame_f64("solar_zenith", t, frames, h, w)?,
                vza.frame_f64("satellite_zenith", t, frames, h, w)?,
                match &land {
                    Some(p) => Some(p.frame_bool("land_sea", t, frames, h, w)?),
                    None => None,
                },
            )?;
            let cloudy = mask.frame_bool("cloud_mask", t, frames, h, w)?;
            segment_frame(&stack, &fields, &geo, opacity, &cloudy)
        })
        .collect::<Result<Vec<_>>>()?;
    LabelSequence::new(labelled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("128").unwrap(), (128, 128));
        assert_eq!(parse_size("64x32").unwrap(), (64, 32));
        assert!(parse_size("12x").is_err());
        assert!(parse_size("big").is_err());
    }

    #[test]
    fn config_sections_and_seed() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 5, "tvl1": {"lambda": 0.2}}"#).unwrap();
        assert_eq!(cfg.tvl1.lambda, 0.2);
        assert_eq!(cfg.tvl1.warps, 5);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"tvl1": {"lamda": 0.2}}"#).is_err());
    }

    #[test]
    fn unknown_subcommand_exits_one() {
        assert_eq!(run(["cloudcast", "frobnicate"]), 1);
        assert_eq!(run(["cloudcast", "--help"]), 0);
    }
}
