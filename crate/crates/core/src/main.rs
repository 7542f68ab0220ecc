use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mhlayout::detect::{lines_to_json, TileLines};
use mhlayout::geometry::{make_cubemap, EquirectImage, Face};
use mhlayout::io::{read_json, write_json};
use mhlayout::layout::{LayoutJson, LayoutParams, DEFAULT_CAMERA_HEIGHT, DEFAULT_DECAY, DEFAULT_LR, DEFAULT_STEPS};
use mhlayout::metrics::{evaluate, MetricsReport};
use mhlayout::pipeline::{self, Detector, EstimateConfig, TileVectors, DEFAULT_TILE_SIZE};
use mhlayout::raster::Raster;
use mhlayout::synth::{oracle_targets, random_room, render_equirect, RenderStyle, DEFAULT_LINE_WIDTH};
use mhlayout::{plot, Error};

#[derive(Parser)]
#[command(name = "mhlayout", version, about = "Manhattan room layout estimation from panoramas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a 2:1 panorama into six cubemap tiles plus a manifest.
    Cubemap {
        input: PathBuf,
        outdir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        size: usize,
    },
    /// Detect Manhattan lines on the cubemap tiles of a panorama.
    Detect {
        input: PathBuf,
        /// Lines JSON to write.
        #[arg(long, short)]
        out: PathBuf,
        /// Also write the smoothed confidence vectors.
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Ground-truth layout, required by the oracle detector.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Estimate the room layout of a panorama.
    Estimate {
        /// Panorama PNG; optional with the oracle detector or --from-vectors.
        input: Option<PathBuf>,
        /// Layout JSON to write.
        #[arg(long, short)]
        out: PathBuf,
        /// Ground-truth layout, required by the oracle detector.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Optimize against confidence vectors from a JSON file instead of
        /// running a detector.
        #[arg(long)]
        from_vectors: Option<PathBuf>,
        /// Draw the estimate over the panorama.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Score predicted layouts against ground truth. With two directories,
    /// files are paired by name and averaged per corner-count bucket.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Write to a file instead of standard output.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Render a random synthetic room with its ground truth.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        walls: usize,
        #[arg(long, value_enum, default_value_t = StyleArg::Wireframe)]
        style: StyleArg,
        /// Panorama width; the height is half of it.
        #[arg(long, default_value_t = 1024)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_LINE_WIDTH)]
        line_width: f64,
        /// Render with 2x2 samples per pixel.
        #[arg(long)]
        supersample: bool,
        /// Panorama PNG to write.
        #[arg(long)]
        png: PathBuf,
        /// Ground-truth layout JSON to write.
        #[arg(long)]
        gt: PathBuf,
        /// Also write the ground-truth confidence vectors.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        bin_scale: usize,
        #[arg(long, default_value_t = DEFAULT_DECAY)]
        decay: f64,
    },
    /// Render figures.
    Plot {
        #[command(subcommand)]
        kind: PlotKind,
    },
}

#[derive(Subcommand)]
enum PlotKind {
    /// Confidence vectors as heatmap strips.
    Heatmap {
        vectors: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Layout wireframe over a panorama.
    Overlay {
        panorama: PathBuf,
        layout: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PipelineOpts {
    #[arg(long, value_enum, default_value_t = DetectorArg::Hts)]
    detector: DetectorArg,
    #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    bin_scale: usize,
    #[arg(long, default_value_t = DEFAULT_LR)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    decay: f64,
    /// Seed of the probabilistic detector.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Hts,
    Htp,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Wireframe,
    Shaded,
    TexturedNoise,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Usage(String),
    Data(Error),
    Estimation(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Initialization(_) => Failure::Estimation(e),
            _ => Failure::Data(e),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

impl PipelineOpts {
    fn config(&self) -> CliResult<EstimateConfig> {
        let cfg = EstimateConfig {
            detector: match self.detector {
                DetectorArg::Hts => Detector::Hts,
                DetectorArg::Htp => Detector::Htp,
                DetectorArg::Oracle => Detector::Oracle,
            },
            size: self.size,
            bin_scale: self.bin_scale,
            lr: self.lr,
            steps: self.steps,
            decay: self.decay,
            seed: self.seed,
            camera_height: DEFAULT_CAMERA_HEIGHT,
        };
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn read_panorama(path: &Path) -> CliResult<EquirectImage> {
    Ok(EquirectImage::new(Raster::read_png(path)?)?)
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|source| {
        Failure::Data(Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

#[derive(Serialize)]
struct ManifestFace {
    face: Face,
    file: String,
}

#[derive(Serialize)]
struct Manifest {
    source: String,
    size: usize,
    faces: Vec<ManifestFace>,
}

fn cmd_cubemap(input: &Path, outdir: &Path, size: usize) -> CliResult {
    if size == 0 {
        return Err(Failure::Usage("tile size must be positive".into()));
    }
    let img = read_panorama(input)?;
    create_dir(outdir)?;
    let cube = make_cubemap(&img, size);
    let mut faces = Vec::new();
    for (face, tile) in cube.iter() {
        let file = format!("{}.png", face.name());
        tile.raster.write_png(&outdir.join(&file), false)?;
        faces.push(ManifestFace { face, file });
    }
    let manifest = Manifest {
        source: input.display().to_string(),
        size,
        faces,
    };
    write_json(&manifest, &outdir.join("manifest.json"))?;
    Ok(())
}

fn need_gt(cfg: &EstimateConfig, gt: Option<&PathBuf>) -> CliResult<Option<LayoutParams>> {
    match (cfg.detector, gt) {
        (Detector::Oracle, None) => Err(Failure::Usage("the oracle detector needs --gt".into())),
        (Detector::Oracle, Some(p)) => Ok(Some(LayoutJson::read(p)?)),
        _ => Ok(None),
    }
}

fn cmd_detect(input: &Path, out: &Path, vectors: Option<&Path>, gt: Option<&PathBuf>, opts: &PipelineOpts) -> CliResult {
    let cfg = opts.config()?;
    let gt = need_gt(&cfg, gt)?;
    let img = read_panorama(input)?;
    let det = pipeline::detect(Some(&img), gt.as_ref(), &cfg)?;
    let json: Vec<TileLines> = lines_to_json(&det.lines);
    write_json(&json, out)?;
    if let Some(path) = vectors {
        write_json(&pipeline::vectors_to_json(&det.vectors), path)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    input: Option<&Path>,
    out: &Path,
    gt: Option<&PathBuf>,
    from_vectors: Option<&Path>,
    overlay: Option<&Path>,
    opts: &PipelineOpts,
) -> CliResult {
    let cfg = opts.config()?;
    if overlay.is_some() && input.is_none() {
        return Err(Failure::Usage("--overlay needs an input panorama".into()));
    }
    let img = input.map(read_panorama).transpose()?;
    let det = match from_vectors {
        Some(path) => {
            let tiles: Vec<TileVectors> = read_json(path)?;
            pipeline::detection_from_vectors(pipeline::vectors_from_json(tiles)?)
        }
        None => {
            let gt = need_gt(&cfg, gt)?;
            if img.is_none() && cfg.detector != Detector::Oracle {
                return Err(Failure::Usage("an input panorama is required".into()));
            }
            pipeline::detect(img.as_ref(), gt.as_ref(), &cfg)?
        }
    };
    let est = pipeline::estimate_from_detection(&det, &cfg).map_err(Failure::Estimation)?;
    LayoutJson::write(&est.layout, out)?;
    if let (Some(path), Some(img)) = (overlay, img.as_ref()) {
        plot::overlay(img.raster(), &est.layout).write_png(path, false)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BucketRow {
    bucket: String,
    count: usize,
    iou3d: f64,
    iou2d: f64,
    corner_error: f64,
    pixel_error: f64,
    delta_1: f64,
}

fn bucket_of(n_walls: usize) -> &'static str {
    match n_walls {
        4 => "4",
        6 => "6",
        8 => "8",
        _ => "10+",
    }
}

fn average(bucket: &str, reports: &[MetricsReport]) -> BucketRow {
    let n = reports.len().max(1) as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    BucketRow {
        bucket: bucket.to_string(),
        count: reports.len(),
        iou3d: mean(|r| r.iou3d),
        iou2d: mean(|r| r.iou2d),
        corner_error: mean(|r| r.corner_error),
        pixel_error: mean(|r| r.pixel_error),
        delta_1: mean(|r| r.delta_1),
    }
}

fn json_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let io = |source| {
        Failure::Data(Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn write_output(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| {
            Failure::Data(Error::Io {
                path: path.to_path_buf(),
                source,
            })
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_text<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

fn cmd_eval(pred: &Path, gt: &Path, format: Option<Format>, out: Option<&Path>) -> CliResult {
    if pred.is_dir() != gt.is_dir() {
        return Err(Failure::Usage("pred and gt must both be files or both directories".into()));
    }
    let text = if gt.is_dir() {
        let mut buckets: BTreeMap<&str, Vec<MetricsReport>> = BTreeMap::new();
        let mut all = Vec::new();
        for gt_path in json_files(gt)? {
            let name = gt_path.file_name().expect("listed file");
            let g = LayoutJson::read(&gt_path)?;
            let p = LayoutJson::read(&pred.join(name))?;
            let report = evaluate(&p, &g)?;
            buckets.entry(bucket_of(g.n_walls())).or_default().push(report.clone());
            all.push(report);
        }
        if all.is_empty() {
            return Err(Failure::Data(Error::InvalidArgument(format!(
                "no layout JSON files in {}",
                gt.display()
            ))));
        }
        let mut rows: Vec<BucketRow> = ["4", "6", "8", "10+"]
            .iter()
            .filter_map(|b| buckets.get(b).map(|r| average(b, r)))
            .collect();
        rows.push(average("all", &all));
        match format.unwrap_or(Format::Csv) {
            Format::Csv => csv_text(&rows),
            Format::Json => serde_json::to_string_pretty(&rows).expect("serializable") + "\n",
        }
    } else {
        let report = evaluate(&LayoutJson::read(pred)?, &LayoutJson::read(gt)?)?;
        match format.unwrap_or(Format::Json) {
            Format::Csv => csv_text(&[report]),
            Format::Json => serde_json::to_string_pretty(&report).expect("serializable") + "\n",
        }
    };
    write_output(&text, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    seed: u64,
    walls: usize,
    style: StyleArg,
    width: usize,
    line_width: f64,
    supersample: bool,
    png: &Path,
    gt: &Path,
    targets: Option<&Path>,
    size: usize,
    bin_scale: usize,
    decay: f64,
) -> CliResult {
    if width < 4 || width % 2 != 0 {
        return Err(Failure::Usage(format!("width must be even and at least 4, got {width}")));
    }
    if !(line_width.is_finite() && line_width > 0.0) {
        return Err(Failure::Usage(format!("line width must be positive, got {line_width}")));
    }
    let cfg = EstimateConfig {
        size,
        bin_scale,
        decay,
        ..Default::default()
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut spec = random_room(seed, walls).map_err(|e| Failure::Usage(e.to_string()))?;
    spec.style = match style {
        StyleArg::Wireframe => RenderStyle::Wireframe,
        StyleArg::Shaded => RenderStyle::Shaded,
        StyleArg::TexturedNoise => RenderStyle::TexturedNoise,
    };
    spec.line_width = line_width;
    spec.supersample = supersample;
    let (img, _) = render_equirect(&spec, width, width / 2)?;
    img.raster().write_png(png, false)?;
    LayoutJson::write(&spec.layout, gt)?;
    if let Some(path) = targets {
        let t = oracle_targets(&spec, size, bin_scale, decay)?;
        write_json(&pipeline::vectors_to_json(&t), path)?;
    }
    Ok(())
}

fn cmd_plot(kind: &PlotKind) -> CliResult {
    match kind {
        PlotKind::Heatmap { vectors, out } => {
            let tiles: Vec<TileVectors> = read_json(vectors)?;
            let v = pipeline::vectors_from_json(tiles)?;
            plot::heatmap(&v).write_png(out, false)?;
        }
        PlotKind::Overlay { panorama, layout, out } => {
            let img = read_panorama(panorama)?;
            let t = LayoutJson::read(layout)?;
            plot::overlay(img.raster(), &t).write_png(out, false)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match &cli.command {
        Command::Cubemap { input, outdir, size } => cmd_cubemap(input, outdir, *size),
        Command::Detect {
            input,
            out,
            vectors,
            gt,
            opts,
        } => cmd_detect(input, out, vectors.as_deref(), gt.as_ref(), opts),
        Command::Estimate {
            input,
            out,
            gt,
            from_vectors,
            overlay,
            opts,
        } => cmd_estimate(
            input.as_deref(),
            out,
            gt.as_ref(),
            from_vectors.as_deref(),
            overlay.as_deref(),
            opts,
        ),
        Command::Eval { pred, gt, format, out } => cmd_eval(pred, gt, *format, out.as_deref()),
        Command::Synth {
            seed,
            walls,
            style,
            width,
            line_width,
            supersample,
            png,
            gt,
            targets,
            size,
            bin_scale,
            decay,
        } => cmd_synth(
            *seed,
            *walls,
            *style,
            *width,
            *line_width,
            *supersample,
            png,
            gt,
            targets.as_deref(),
            *size,
            *bin_scale,
            *decay,
        ),
        Command::Plot { kind } => cmd_plot(kind),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Estimation(e)) => {
            eprintln!("estimation failed: {e}");
            ExitCode::from(4)
        }
    }
}
