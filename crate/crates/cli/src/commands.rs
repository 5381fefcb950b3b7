use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twoplane::eval::io::FramesFile;
use twoplane::eval::stream::PERIOD_TOLERANCE_MS;
use twoplane::eval::{
    first_scored_frame, simulate_stream, streaming_ap, ApParams, ApReport, Detector, GroundTruthFrame, MockDetector,
    Policy, Sequence, WarpedDetector,
};
use twoplane::geometry::{vp_from_lines, LineAnnotations};
use twoplane::saliency::{
    decode_cache_file, encode_cache_file, CacheOutcome, CacheStore, SaliencyError, SaliencySource,
};
use twoplane::warp::{build_warp, unwarp_boxes, unwarp_points, warp_boxes, warp_image, warp_points, ImageError};
use twoplane::{BBox, Image, ImageSize, Point2, SaliencyMap, WarpField};

use crate::config::Config;
use crate::failure::{Failure, Outcome, ResultExt};

/// Settings shared by every subcommand, after command-line overrides.
pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    pub no_endpoint_rescale: bool,
}

impl Globals {
    fn config(&self, command: &str) -> Outcome<Config> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Failure::invalid(format!("`{command}` needs --config <path>")))?;
        let mut cfg = Config::load(path)?;
        if let Some(dir) = &self.cache_dir {
            cfg.cache_dir = Some(dir.clone());
        }
        if self.no_endpoint_rescale {
            cfg.endpoint_rescale = false;
        }
        Ok(cfg)
    }
}

fn saliency_failure(e: SaliencyError, what: &str) -> Failure {
    match e {
        SaliencyError::Io(_) => Failure::Io(anyhow::Error::new(e).context(what.to_string())),
        other => Failure::Invalid(anyhow::Error::new(other).context(what.to_string())),
    }
}

fn image_failure(e: ImageError, path: &Path) -> Failure {
    let what = path.display().to_string();
    match e {
        ImageError::Codec(_) => Failure::Io(anyhow::Error::new(e).context(what)),
        other => Failure::Invalid(anyhow::Error::new(other).context(what)),
    }
}

fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).or_io(format!("reading {}", path.display()))
}

/// Prints one line to stdout. A reader that went away (`| head`) is not an
/// error.
fn say(line: &str) -> Outcome<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).or_io("writing to stdout"),
        _ => Ok(()),
    }
}

fn write_bytes(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome<()> {
    fs::write(path, bytes).or_io(format!("writing {}", path.display()))
}

/// Saliency for `source`, served from the cache directory when one is set.
///
/// Without a cache the map still goes through the cache encoding, so results
/// do not depend on whether a cache was used.
fn saliency_map(
    cfg: &Config,
    source: &SaliencySource,
    size: ImageSize,
) -> Outcome<(SaliencyMap, Option<(CacheOutcome, PathBuf)>)> {
    let grid = cfg.grid_size()?;
    match &cfg.cache_dir {
        Some(dir) => {
            let store = CacheStore::open(dir).map_err(|e| saliency_failure(e, "opening cache"))?;
            let (map, outcome) = store
                .get_or_build(source, size, grid)
                .map_err(|e| saliency_failure(e, "saliency"))?;
            let path = store.entry_path(map.param_hash());
            Ok((map, Some((outcome, path))))
        }
        None => {
            let built = source.build(size, grid).map_err(|e| saliency_failure(e, "saliency"))?;
            let map = decode_cache_file(&encode_cache_file(&built)).map_err(|e| saliency_failure(e, "saliency"))?;
            Ok((map, None))
        }
    }
}

fn field_for(cfg: &Config, source: &SaliencySource, in_size: ImageSize) -> Outcome<WarpField> {
    let (map, _) = saliency_map(cfg, source, in_size)?;
    build_warp(&map, cfg.output_size(in_size)?, cfg.axis_options(source.kernel_sigma_frac())).or_invalid("warp field")
}

/// Grayscale rendering of a map at grid resolution, brightest node at 255.
pub fn heatmap(map: &SaliencyMap) -> Image {
    let max = map.max();
    let plane = map.values().iter().map(|v| (v / max) as f32).collect();
    Image::new(map.grid(), vec![plane]).expect("normalized values lie in [0, 1]")
}

pub fn saliency(g: &Globals, out: &Path, frame: usize) -> Outcome<()> {
    let mut cfg = g.config("saliency")?;
    if cfg.cache_dir.is_none() {
        cfg.cache_dir = Some(PathBuf::from("twoplane-cache"));
    }
    let source = cfg.source_for_frame(frame)?;
    let (map, cached) = saliency_map(&cfg, &source, cfg.image_size())?;
    let png = heatmap(&map).to_png_bytes().or_io("encoding heatmap")?;
    write_bytes(out, png)?;
    say(&format!("param_hash {}", map.param_hash_hex()))?;
    if let Some((outcome, path)) = cached {
        let tag = match outcome {
            CacheOutcome::Hit => "hit",
            CacheOutcome::Miss => "miss",
        };
        say(&format!("cache {tag} {}", path.display()))?;
    }
    Ok(())
}

pub struct WarpArgs<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub field_out: Option<&'a Path>,
    pub constant_saliency: bool,
    pub frame: usize,
}

pub fn warp(g: &Globals, a: WarpArgs<'_>) -> Outcome<()> {
    let cfg = g.config("warp")?;
    let img = Image::read_png(a.input).map_err(|e| image_failure(e, a.input))?;
    let size = img.size();
    if let Some(s) = cfg.image_size {
        if [size.w(), size.h()] != s {
            return Err(Failure::invalid(format!(
                "input is {size} but the config expects {}x{}",
                s[0], s[1]
            )));
        }
    }
    let field = if a.constant_saliency {
        let map = SaliencyMap::constant(cfg.grid_size()?, size, 1.0).or_invalid("constant saliency")?;
        build_warp(&map, cfg.output_size(size)?, cfg.axis_options(cfg.shape.kernel_sigma_frac))
            .or_invalid("warp field")?
    } else {
        field_for(&cfg, &cfg.source_for_frame(a.frame)?, size)?
    };
    let png = warp_image(&img, &field).to_png_bytes().or_io("encoding output")?;
    write_bytes(a.output, png)?;
    if let Some(path) = a.field_out {
        write_bytes(path, field.to_json())?;
    }
    Ok(())
}

fn load_field(path: &Path) -> Outcome<WarpField> {
    WarpField::from_json(&read_text(path)?).or_invalid(path.display().to_string())
}

fn load_frames(path: &Path) -> Outcome<FramesFile> {
    FramesFile::from_json(&read_text(path)?).or_invalid(path.display().to_string())
}

/// Maps every box of every frame, keeping scores, classes, tracks and order.
fn map_detections(
    field: &Path,
    dets: &Path,
    out: &Path,
    f: fn(&[BBox], &WarpField) -> twoplane::warp::Result<Vec<BBox>>,
) -> Outcome<()> {
    let wf = load_field(field)?;
    let mut file = load_frames(dets)?;
    for frame in &mut file.frames {
        let boxes = frame
            .boxes
            .iter()
            .map(|b| b.to_bbox())
            .collect::<Result<Vec<_>, _>>()
            .or_invalid(format!("frame {}", frame.id))?;
        let mapped = f(&boxes, &wf).or_invalid(format!("frame {}", frame.id))?;
        for (record, b) in frame.boxes.iter_mut().zip(&mapped) {
            *record = record.with_box(b);
        }
    }
    write_bytes(out, file.to_json())
}

pub fn unwarp(field: &Path, dets: &Path, out: &Path) -> Outcome<()> {
    map_detections(field, dets, out, unwarp_boxes)
}

pub fn warp_dets(field: &Path, dets: &Path, out: &Path) -> Outcome<()> {
    map_detections(field, dets, out, warp_boxes)
}

/// `{"points": [[x, y], ...]}`
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsFile {
    points: Vec<[f64; 2]>,
}

pub fn warp_points_cmd(field: &Path, points: &Path, out: &Path, inverse: bool) -> Outcome<()> {
    let wf = load_field(field)?;
    let file: PointsFile = serde_json::from_str(&read_text(points)?).or_invalid(points.display().to_string())?;
    let pts: Vec<Point2> = file.points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let mapped = if inverse { unwarp_points(&pts, &wf) } else { warp_points(&pts, &wf) }.or_invalid("points")?;
    let file = PointsFile {
        points: mapped.iter().map(|p| [p.x, p.y]).collect(),
    };
    write_bytes(out, serde_json::to_string(&file).expect("points serialize"))
}

/// Mock detector looking at warped frames, with a new warp at every
/// refresh frame.
struct RefreshingDetector {
    slots: HashMap<usize, WarpedDetector>,
    refresh_of: HashMap<u64, usize>,
}

impl Detector for RefreshingDetector {
    fn detect(&self, frame: &GroundTruthFrame) -> Vec<BBox> {
        let r = self.refresh_of[&frame.frame_id];
        self.slots[&r].detect(frame)
    }
}

#[derive(Debug, Serialize)]
pub struct TimelineSummary {
    pub events: usize,
    pub skipped_frames: usize,
    pub first_emit_ms: Option<f64>,
    pub last_emit_ms: Option<f64>,
    pub mean_latency_ms: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct StreamReport {
    pub frames: usize,
    pub scored_frames: usize,
    pub period_ms: f64,
    pub seed: u64,
    pub warped: bool,
    pub throughput_fps: f64,
    pub sap: ApReport,
    pub timeline: TimelineSummary,
    pub processed_frame_ids: Vec<u64>,
    pub emit_times_ms: Vec<f64>,
}

pub fn stream(g: &Globals, gt: &Path, report: &Path) -> Outcome<()> {
    let cfg = g.config("stream")?;
    let seq: Sequence = load_frames(gt)?.to_sequence().or_invalid(gt.display().to_string())?;
    let expected = 1000.0 / cfg.stream.fps;
    if seq.len() > 1 && (seq.period_ms() - expected).abs() > PERIOD_TOLERANCE_MS {
        return Err(Failure::invalid(format!(
            "frames are {:.3} ms apart but stream.fps {} implies {expected:.3} ms",
            seq.period_ms(),
            cfg.stream.fps
        )));
    }
    let seed = g.seed.unwrap_or(cfg.stream.seed);
    let latency = cfg.latency(seed)?;
    let mock = MockDetector::new(cfg.stream.mock, seed).or_invalid("stream.mock")?;

    let timeline = if cfg.stream.warp {
        let size = cfg.image_size();
        let mut slots = HashMap::new();
        let mut refresh_of = HashMap::new();
        for (k, frame) in seq.frames().iter().enumerate() {
            let r = cfg.refresh_frame(k);
            if let Entry::Vacant(slot) = slots.entry(r) {
                let field = field_for(&cfg, &cfg.source_for_frame(r)?, size)?;
                slot.insert(WarpedDetector::new(mock, field));
            }
            refresh_of.insert(frame.frame_id, r);
        }
        simulate_stream(&seq, &RefreshingDetector { slots, refresh_of }, &latency, Policy::ProcessLatest)
    } else {
        simulate_stream(&seq, &mock, &latency, Policy::ProcessLatest)
    };

    let sap = streaming_ap(&timeline, &seq, &ApParams::default());
    let events = &timeline.events;
    let latencies: Vec<f64> = events.iter().map(|e| e.emit_ms - e.start_ms).collect();
    let summary = TimelineSummary {
        events: events.len(),
        skipped_frames: seq.len() - events.len(),
        first_emit_ms: events.first().map(|e| e.emit_ms),
        last_emit_ms: events.last().map(|e| e.emit_ms),
        mean_latency_ms: (!latencies.is_empty()).then(|| latencies.iter().sum::<f64>() / latencies.len() as f64),
    };
    let out = StreamReport {
        frames: seq.len(),
        scored_frames: seq.len() - first_scored_frame(&seq),
        period_ms: seq.period_ms(),
        seed,
        warped: cfg.stream.warp,
        throughput_fps: timeline.throughput_fps(&seq),
        sap,
        timeline: summary,
        processed_frame_ids: timeline.processed_frame_ids(),
        emit_times_ms: timeline.emit_times(),
    };
    write_bytes(report, serde_json::to_string_pretty(&out).expect("report serializes"))?;
    let shown = |v: Option<f64>| v.map_or("absent".to_string(), |v| format!("{v:.4}"));
    say(&format!(
        "sAP {} sAP50 {} throughput {:.2} fps over {} frames",
        shown(out.sap.ap),
        shown(out.sap.ap50),
        out.throughput_fps,
        out.frames
    ))
}

pub fn vp(lines: &Path, out: Option<&Path>) -> Outcome<()> {
    let ann: LineAnnotations = serde_json::from_str(&read_text(lines)?).or_invalid(lines.display().to_string())?;
    let p = vp_from_lines(&ann.lines).or_invalid("vanishing point")?;
    let json = serde_json::json!({ "vp": [p.x, p.y] }).to_string();
    match out {
        Some(path) => write_bytes(path, json),
        None => say(&json),
    }
}

pub fn config(g: &Globals) -> Outcome<()> {
    say(&g.config("config")?.to_canonical_json())
}
