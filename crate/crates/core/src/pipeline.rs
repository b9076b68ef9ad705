//! End-to-end streaming: rig capture, fusion, culling, densification,
//! defocus, encoding, paced sending and (for loopback) receiving.
//!
//! Two timing modes share the same processing code:
//!
//! * **Fake clock.** A single-threaded discrete-event run. Every stage has
//!   its own timeline, costs exactly its injected delay in simulated time and
//!   starts once both its input is ready and the stage is free. Results are
//!   bit-for-bit reproducible.
//! * **System clock.** One thread per stage (capture, process, send,
//!   receive). Capture feeds processing through a bounded channel of depth 4,
//!   processing feeds the sender through a drop-oldest queue of depth 4.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, PointLabel};
use crate::colorxfer::TransferParams;
use crate::error::{Error, Result};
use crate::fusion::{fuse_labeled, motion_mask, FusionParams, MotionMask, ScanEntry, ScanWindow};
use crate::image::{DepthImage, RgbImage};
use crate::projection::SensorModel;
use crate::sim::rig::{RigConfig, RigEvent, Trigger};
use crate::sim::scene::Scene;
use crate::stream::codec::{decode_frame, encode_frame, Codec, DepthScale, EncodeOptions};
use crate::stream::defocus::defocus;
use crate::stream::frame::RgbdFrame;
use crate::stream::latency::{latency_report, LatencyRecord, LatencyReport};
use crate::stream::pacing::{Clock, DeadlineSchedule, DropOldestQueue, SystemClock, QUEUE_CAPACITY};
use crate::stream::transport::{connect_with_retry, pipe, Endpoint};
use crate::stream::wire::{write_record, FrameReader};
use crate::upsample::{joint_bilateral_upsample, BilateralParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamOptions {
    /// Send rate; 0 sends as fast as frames are ready.
    pub fps: f64,
    pub defocus_radius: usize,
    pub codec: Codec,
    pub depth_scale: DepthScale,
    pub camera_id: u8,
    pub endpoint: Endpoint,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            fps: 30.0,
            defocus_radius: 3,
            codec: Codec::Deflate,
            depth_scale: DepthScale::Millimeter,
            camera_id: 0,
            endpoint: Endpoint::Loopback,
        }
    }
}

/// Artificial per-stage costs, milliseconds. Added on top of real work.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageDelays {
    pub process_ms: f64,
    pub send_ms: f64,
    pub transport_ms: f64,
    pub decode_ms: f64,
}

impl StageDelays {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("process_ms", self.process_ms),
            ("send_ms", self.send_ms),
            ("transport_ms", self.transport_ms),
            ("decode_ms", self.decode_ms),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("delay {name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    fn ns(&self) -> [u64; 4] {
        [self.process_ms, self.send_ms, self.transport_ms, self.decode_ms].map(|ms| (ms * 1e6).round() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides the scene file's seed when set.
    pub seed: Option<u64>,
    /// Scene file, relative paths resolved against the config file.
    pub scene: Option<PathBuf>,
    /// Number of camera frames to capture.
    pub frames: usize,
    pub fake_clock: bool,
    pub recolor_interval_s: f64,
    /// Receiver writes a snapshot every this many frames.
    pub snapshot_interval: usize,
    pub output_dir: PathBuf,
    pub rig: RigConfig,
    pub fusion: FusionParams,
    pub bilateral: BilateralParams,
    pub transfer: TransferParams,
    pub stream: StreamOptions,
    pub delays: StageDelays,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            scene: None,
            frames: 90,
            fake_clock: false,
            recolor_interval_s: 900.0,
            snapshot_interval: 30,
            output_dir: PathBuf::from("out"),
            rig: RigConfig::default(),
            fusion: FusionParams::default(),
            bilateral: BilateralParams::default(),
            transfer: TransferParams::default(),
            stream: StreamOptions::default(),
            delays: StageDelays::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.rig.validate()?;
        self.fusion.validate()?;
        self.bilateral.validate()?;
        self.transfer.validate()?;
        self.delays.validate()?;
        if !(self.stream.fps >= 0.0 && self.stream.fps.is_finite()) {
            return Err(Error::param("stream.fps must be non-negative"));
        }
        if !(self.recolor_interval_s > 0.0 && self.recolor_interval_s.is_finite()) {
            return Err(Error::param("recolor_interval_s must be positive"));
        }
        if self.snapshot_interval == 0 {
            return Err(Error::param("snapshot_interval must be at least 1"));
        }
        match &self.stream.endpoint {
            Endpoint::Tcp { address, .. } if address.is_empty() => {
                return Err(Error::param("tcp endpoint needs an address"));
            }
            Endpoint::File { path } if path.as_os_str().is_empty() => {
                return Err(Error::param("file endpoint needs a path"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::param(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config always serializes")
    }

    pub fn encode_options(&self) -> EncodeOptions {
        EncodeOptions {
            codec: self.stream.codec,
            depth_scale: self.stream.depth_scale,
            defocused: self.stream.defocus_radius > 0,
        }
    }
}

/// Rig events in trigger order, simulated on demand.
///
/// For a static scene seen through clear panels, each LiDAR's scan and the
/// camera image repeat exactly from one rotation to the next, so the first
/// event of each LiDAR is simulated and later ones replay it with shifted
/// timestamps.
pub struct EventSource<'a> {
    scene: &'a Scene,
    rig: &'a RigConfig,
    triggers: std::vec::IntoIter<Trigger>,
    cache: Option<HashMap<usize, RigEvent>>,
}

impl<'a> EventSource<'a> {
    /// The first `frames` events after the rig's start time.
    pub fn new(scene: &'a Scene, rig: &'a RigConfig, frames: usize) -> Result<Self> {
        let triggers = if frames == 0 {
            Vec::new()
        } else {
            let duration = (frames as f64 + 0.5) / rig.camera_fps;
            let mut t = rig.triggers(duration)?;
            t.truncate(frames);
            t
        };
        let replayable = scene.is_static() && rig.lidars.iter().all(|l| l.panel_transmittance >= 1.0);
        Ok(Self {
            scene,
            rig,
            triggers: triggers.into_iter(),
            cache: replayable.then(HashMap::new),
        })
    }

    pub fn remaining(&self) -> usize {
        self.triggers.len()
    }
}

impl Iterator for EventSource<'_> {
    type Item = Result<RigEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        let trig = self.triggers.next()?;
        if let Some(cached) = self.cache.as_ref().and_then(|c| c.get(&trig.lidar)) {
            let mut ev = cached.clone();
            let ts = crate::sim::lidar::seconds_to_ns(trig.time_s);
            let shift = ts - ev.timestamp_ns;
            if let Some(t) = &mut ev.scan.timestamp_ns {
                t.iter_mut().for_each(|x| *x += shift);
            }
            ev.index = trig.index;
            ev.time_s = trig.time_s;
            ev.timestamp_ns = ts;
            ev.rotation = trig.rotation;
            return Some(Ok(ev));
        }
        let ev = self.rig.event(self.scene, &trig);
        if let (Some(cache), Ok(ev)) = (&mut self.cache, &ev) {
            cache.insert(trig.lidar, ev.clone());
        }
        Some(ev)
    }
}

/// Output of the processing stage for one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Processed {
    pub frame: RgbdFrame,
    pub event_index: usize,
    pub sensor_id: u8,
    pub fused_points: usize,
    pub dynamic_points: usize,
    pub kept_points: usize,
    pub valid_depth: usize,
}

#[derive(Debug, Clone)]
struct ScanView {
    timestamp_ns: u64,
    labels: Vec<PointLabel>,
    /// Camera pixel index and depth of each point, if it lands in the image.
    pixels: Vec<Option<(usize, f64)>>,
}

/// Stateful per-event processing: motion mask, windowed fusion, occlusion
/// culling, densification and defocus.
#[derive(Debug, Clone)]
pub struct FrameProcessor {
    cam: SensorModel,
    fusion: FusionParams,
    bilateral: BilateralParams,
    defocus_radius: usize,
    camera_id: u8,
    window: ScanWindow,
    /// Per window scan, keyed by capture time.
    scans: VecDeque<ScanView>,
    prev_frame: Option<RgbImage>,
    next_seq: u64,
}

impl FrameProcessor {
    pub fn new(cfg: &PipelineConfig) -> Result<Self> {
        cfg.fusion.validate()?;
        cfg.bilateral.validate()?;
        Ok(Self {
            cam: cfg.rig.camera_model()?,
            fusion: cfg.fusion,
            bilateral: cfg.bilateral,
            defocus_radius: cfg.stream.defocus_radius,
            camera_id: cfg.stream.camera_id,
            window: ScanWindow::new(),
            scans: VecDeque::new(),
            prev_frame: None,
            next_seq: 0,
        })
    }

    pub fn camera(&self) -> &SensorModel {
        &self.cam
    }

    /// Pushes `ev` into the window. A scan's projection and labels depend
    /// only on the scan and its own mask, so they are computed once here.
    fn advance(&mut self, ev: &RigEvent) -> Result<()> {
        let (w, h) = self.cam.dims();
        if ev.frame.dims() != (w, h) {
            return Err(Error::param("event frame does not match camera dimensions"));
        }
        let mask = match &self.prev_frame {
            Some(prev) => motion_mask(prev, &ev.frame, &self.fusion)?,
            None => MotionMask::all(w, h, false),
        };
        self.window.push(ScanEntry {
            cloud: ev.scan.clone(),
            timestamp_ns: ev.timestamp_ns,
            sensor_id: ev.sensor_id,
        })?;
        let pixels: Vec<Option<(usize, f64)>> = ev
            .scan
            .points
            .iter()
            .map(|p| self.cam.pixel_and_depth(p).map(|(x, y, z)| (y * w + x, z)))
            .collect();
        let labels = pixels
            .iter()
            .map(|px| match px {
                None => PointLabel::Unobserved,
                Some((i, _)) if mask.dynamic[*i] => PointLabel::Dynamic,
                Some(_) => PointLabel::Static,
            })
            .collect();
        self.scans.push_back(ScanView { timestamp_ns: ev.timestamp_ns, labels, pixels });
        let window = &self.window;
        self.scans.retain(|v| window.entries().any(|e| e.timestamp_ns == v.timestamp_ns));
        self.prev_frame = Some(ev.frame.clone());
        Ok(())
    }

    /// The fused cloud for `ev` (after pushing it into the window), before culling.
    pub fn fuse(&mut self, ev: &RigEvent) -> Result<PointCloud> {
        self.advance(ev)?;
        let labels: Vec<Vec<PointLabel>> = self.scans.iter().map(|v| v.labels.clone()).collect();
        fuse_labeled(&self.window, &labels)
    }

    /// Fuses, culls, densifies and defocuses. Works on the cached scan
    /// projections instead of materializing the fused cloud; the result is
    /// the same as culling and rendering [`FrameProcessor::fuse`]'s output.
    pub fn process(&mut self, ev: &RigEvent) -> Result<Processed> {
        let margin = self.fusion.occlusion_margin;
        if !(margin > 0.0) {
            return Err(Error::param(format!("occlusion margin must be positive, got {margin}")));
        }
        self.advance(ev)?;
        let newest = self.scans.len() - 1;
        let fused = || {
            self.scans.iter().enumerate().flat_map(move |(i, v)| {
                v.labels
                    .iter()
                    .zip(&v.pixels)
                    .filter(move |(l, _)| i == newest || **l == PointLabel::Static)
            })
        };
        let (w, h) = self.cam.dims();
        let mut sparse = DepthImage::zeros(w, h);
        let (mut fused_points, mut dynamic_points) = (0, 0);
        for (label, px) in fused() {
            fused_points += 1;
            dynamic_points += usize::from(*label == PointLabel::Dynamic);
            if let Some((i, z)) = *px {
                let d = &mut sparse.depth[i];
                if *d == 0.0 || z < *d {
                    *d = z;
                }
            }
        }
        // The nearest point of every pixel survives culling, so the culled
        // cloud renders this same z-buffer.
        let kept_points = fused()
            .filter(|(_, px)| px.is_some_and(|(i, z)| z - sparse.depth[i] <= margin))
            .count();
        let depth = joint_bilateral_upsample(&sparse, &ev.frame, &self.bilateral)?;
        let rgb = defocus(&ev.frame, self.defocus_radius);
        let frame = RgbdFrame::new(rgb, depth, ev.timestamp_ns, self.camera_id, self.next_seq)?;
        self.next_seq += 1;
        Ok(Processed {
            valid_depth: frame.depth.valid_count(),
            frame,
            event_index: ev.index,
            sensor_id: ev.sensor_id,
            fused_points,
            dynamic_points,
            kept_points,
        })
    }
}

/// Per-frame accounting. Fields prefixed `wall_` are measured with the host
/// clock and vary between runs; everything else is deterministic under the
/// fake clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame_seq: u64,
    pub event_index: usize,
    pub sensor_id: u8,
    pub fused_points: usize,
    pub dynamic_points: usize,
    pub kept_points: usize,
    pub valid_depth: usize,
    /// Uncompressed size: 3 bytes of color and 2 of depth per pixel.
    pub raw_bytes: usize,
    pub encoded_bytes: usize,
    pub compression_ratio: f64,
    pub frame_crc32: u32,
    pub latency: Option<LatencyRecord>,
    pub wall_process_ms: f64,
    pub wall_encode_ms: f64,
}

impl FrameMetrics {
    fn new(p: &Processed, encoded: &[u8], wall_process_ms: f64, wall_encode_ms: f64) -> Self {
        let (w, h) = p.frame.dims();
        let raw_bytes = w * h * 5;
        Self {
            frame_seq: p.frame.frame_seq,
            event_index: p.event_index,
            sensor_id: p.sensor_id,
            fused_points: p.fused_points,
            dynamic_points: p.dynamic_points,
            kept_points: p.kept_points,
            valid_depth: p.valid_depth,
            raw_bytes,
            encoded_bytes: encoded.len(),
            compression_ratio: raw_bytes as f64 / encoded.len() as f64,
            frame_crc32: crc32fast::hash(encoded),
            latency: None,
            wall_process_ms,
            wall_encode_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub frames_captured: usize,
    pub frames_sent: usize,
    pub frames_received: usize,
    /// Sequence numbers evicted from the send queue.
    pub dropped: Vec<u64>,
    pub decode_errors: usize,
    /// One per delivered frame, in sequence order. Without a local receiver
    /// the received and decoded marks equal the sent mark.
    pub records: Vec<LatencyRecord>,
    /// One per sent frame, in sequence order.
    pub frames: Vec<FrameMetrics>,
    pub stream_bytes: u64,
    /// CRC-32 of the whole byte stream as written.
    pub stream_crc32: u32,
    /// Whole run, including scene simulation before the first frame.
    pub wall_elapsed_s: f64,
    /// Sustained delivery rate. With the real clock this is measured between
    /// the first and last decode, so startup is excluded; under the fake
    /// clock it is frames over `wall_elapsed_s`.
    pub wall_fps: f64,
}

impl PipelineReport {
    pub fn latency(&self) -> Result<LatencyReport> {
        latency_report(&self.records)
    }
}

fn run_remote<I>(events: I, cfg: &PipelineConfig, sink: Box<dyn Write + Send>) -> Result<PipelineReport>
where
    I: Iterator<Item = Result<RigEvent>> + Send,
{
    if cfg.fake_clock {
        run_fake(events, cfg, Some(sink), None)
    } else {
        run_threaded(events, cfg, Some(sink), None)
    }
}

/// Receives each decoded frame with its decode-complete clock time.
pub type FrameSink<'a> = dyn FnMut(RgbdFrame, u64) + Send + 'a;

/// Runs the pipeline over `events` with `cfg`'s timing mode and endpoint.
/// Loopback runs decode locally and hand frames to `on_frame`.
pub fn run_pipeline<I>(events: I, cfg: &PipelineConfig, on_frame: Option<&mut FrameSink<'_>>) -> Result<PipelineReport>
where
    I: Iterator<Item = Result<RigEvent>> + Send,
{
    cfg.validate()?;
    let started = Instant::now();
    let mut report = match &cfg.stream.endpoint {
        Endpoint::Loopback => {
            if cfg.fake_clock {
                run_fake(events, cfg, None, on_frame)?
            } else {
                run_threaded(events, cfg, None, on_frame)?
            }
        }
        Endpoint::Tcp {
            address,
            connect_retries,
            retry_backoff_ms,
        } => {
            let stream = connect_with_retry(address, *connect_retries, *retry_backoff_ms)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("connect to {address}: {e}"))))?;
            run_remote(events, cfg, Box::new(std::io::BufWriter::new(stream)))?
        }
        Endpoint::File { path } => {
            let file = std::fs::File::create(path)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("create {}: {e}", path.display()))))?;
            run_remote(events, cfg, Box::new(std::io::BufWriter::new(file)))?
        }
    };
    report.wall_elapsed_s = started.elapsed().as_secs_f64();
    let decoded = report.records.iter().map(|r| r.decoded);
    let span_ns = decoded.clone().max().unwrap_or(0) - decoded.min().unwrap_or(0);
    report.wall_fps = if !cfg.fake_clock && report.records.len() >= 2 && span_ns > 0 {
        (report.records.len() - 1) as f64 / (span_ns as f64 * 1e-9)
    } else if report.wall_elapsed_s > 0.0 {
        report.frames_received as f64 / report.wall_elapsed_s
    } else {
        0.0
    };
    Ok(report)
}

/// Convenience wrapper: simulate `cfg.frames` events of `scene` and stream them.
pub fn run_scene(scene: &Scene, cfg: &PipelineConfig, on_frame: Option<&mut FrameSink<'_>>) -> Result<PipelineReport> {
    let events = EventSource::new(scene, &cfg.rig, cfg.frames)?;
    run_pipeline(events, cfg, on_frame)
}

struct Ready {
    processed: Processed,
    capture: u64,
    ready: u64,
    wall_process_ms: f64,
}

fn finish(mut report: PipelineReport) -> PipelineReport {
    report.records.sort_by_key(|r| r.frame_seq);
    report.frames.sort_by_key(|m| m.frame_seq);
    let by_seq: HashMap<u64, LatencyRecord> = report.records.iter().map(|r| (r.frame_seq, *r)).collect();
    for m in &mut report.frames {
        m.latency = by_seq.get(&m.frame_seq).copied();
    }
    report.dropped.sort_unstable();
    report
}

fn empty_report() -> PipelineReport {
    PipelineReport {
        frames_captured: 0,
        frames_sent: 0,
        frames_received: 0,
        dropped: Vec::new(),
        decode_errors: 0,
        records: Vec::new(),
        frames: Vec::new(),
        stream_bytes: 0,
        stream_crc32: 0,
        wall_elapsed_s: 0.0,
        wall_fps: 0.0,
    }
}

fn run_fake<I>(
    events: I,
    cfg: &PipelineConfig,
    mut remote: Option<Box<dyn Write + Send>>,
    mut on_frame: Option<&mut FrameSink<'_>>,
) -> Result<PipelineReport>
where
    I: Iterator<Item = Result<RigEvent>>,
{
    let [d_proc, d_send, d_transport, d_decode] = cfg.delays.ns();
    let opts = cfg.encode_options();
    let mut processor = FrameProcessor::new(cfg)?;
    let mut report = empty_report();
    let mut crc = crc32fast::Hasher::new();

    let mut proc_free = 0u64;
    let mut captured = 0usize;
    let mut source = events
        .map(|ev| -> Result<Ready> {
            let ev = ev?;
            captured += 1;
            let t = Instant::now();
            let processed = processor.process(&ev)?;
            let start = ev.timestamp_ns.max(proc_free);
            proc_free = start + d_proc;
            Ok(Ready {
                processed,
                capture: ev.timestamp_ns,
                ready: proc_free,
                wall_process_ms: t.elapsed().as_secs_f64() * 1e3,
            })
        })
        .peekable();

    // Ready time of the next processed frame, surfacing processing errors.
    macro_rules! peek_ready {
        () => {
            match source.peek() {
                None => None,
                Some(Ok(r)) => Some(r.ready),
                Some(Err(_)) => return Err(source.next().unwrap().err().unwrap()),
            }
        };
    }

    let Some(first) = peek_ready!() else {
        return Ok(empty_report());
    };
    let mut schedule = match cfg.stream.fps {
        f if f > 0.0 => Some(DeadlineSchedule::new(first, f)?),
        _ => None,
    };
    let queue: DropOldestQueue<Ready> = DropOldestQueue::new(QUEUE_CAPACITY);
    let mut now = first;
    let mut decode_free = 0u64;
    let mut record_buf = Vec::new();
    loop {
        match &schedule {
            Some(s) => now = now.max(s.deadline()),
            None if queue.is_empty() => match peek_ready!() {
                Some(t) => now = now.max(t),
                None => break,
            },
            None => {}
        }
        while let Some(t) = peek_ready!() {
            if t > now {
                break;
            }
            queue.push(source.next().unwrap()?);
        }
        report
            .dropped
            .extend(queue.take_dropped().iter().map(|r| r.processed.frame.frame_seq));
        match queue.try_pop() {
            Some(item) => {
                let t = Instant::now();
                let encoded = encode_frame(&item.processed.frame, &opts)?;
                let wall_encode_ms = t.elapsed().as_secs_f64() * 1e3;
                record_buf.clear();
                write_record(&mut record_buf, &encoded)?;
                crc.update(&record_buf);
                report.stream_bytes += record_buf.len() as u64;
                let sent = now + d_send;
                now = sent;
                report.frames_sent += 1;
                report
                    .frames
                    .push(FrameMetrics::new(&item.processed, &encoded, item.wall_process_ms, wall_encode_ms));
                let mut rec = LatencyRecord {
                    frame_seq: item.processed.frame.frame_seq,
                    capture: item.capture,
                    processed: item.ready,
                    sent,
                    received: sent,
                    decoded: sent,
                };
                match &mut remote {
                    Some(sink) => {
                        sink.write_all(&record_buf)?;
                        report.records.push(rec);
                    }
                    None => {
                        let mut reader = FrameReader::new(&record_buf[..]);
                        match reader.next() {
                            Some(Ok(frame)) => {
                                rec.received = sent + d_transport;
                                rec.decoded = rec.received.max(decode_free) + d_decode;
                                decode_free = rec.decoded;
                                report.frames_received += 1;
                                report.records.push(rec);
                                if let Some(f) = on_frame.as_mut() {
                                    f(frame, rec.decoded);
                                }
                            }
                            _ => report.decode_errors += 1,
                        }
                    }
                }
            }
            None if schedule.is_some() && peek_ready!().is_none() => break,
            None => {}
        }
        if let Some(s) = &mut schedule {
            s.advance(now);
        }
    }
    if let Some(sink) = &mut remote {
        sink.flush()?;
        report.frames_received = report.frames_sent;
    }
    drop(source);
    report.frames_captured = captured;
    report.stream_crc32 = crc.finalize();
    Ok(finish(report))
}

struct Stamps {
    capture: u64,
    processed: u64,
}

fn run_threaded<I>(
    events: I,
    cfg: &PipelineConfig,
    remote: Option<Box<dyn Write + Send>>,
    on_frame: Option<&mut FrameSink<'_>>,
) -> Result<PipelineReport>
where
    I: Iterator<Item = Result<RigEvent>> + Send,
{
    let [d_proc, d_send, d_transport, d_decode] = cfg.delays.ns();
    let opts = cfg.encode_options();
    let fps = cfg.stream.fps;
    let mut processor = FrameProcessor::new(cfg)?;
    let clock = SystemClock::new();
    let clock = &clock;

    let (ev_tx, ev_rx) = crossbeam_channel::bounded::<(RigEvent, u64)>(QUEUE_CAPACITY);
    let queue: DropOldestQueue<(Processed, Stamps, f64)> = DropOldestQueue::new(QUEUE_CAPACITY);
    let queue = &queue;
    let (sink, reader): (Box<dyn Write + Send>, Option<_>) = match remote {
        Some(s) => (s, None),
        None => {
            let (w, r) = pipe();
            (Box::new(w), Some(r))
        }
    };
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let fail = |e: Error| {
        first_error.lock().unwrap().get_or_insert(e);
    };

    let (captured, sent_part, recv_part) = std::thread::scope(|s| {
        let fail = &fail;
        let capture = s.spawn(move || {
            let mut n = 0usize;
            let mut base: Option<(u64, u64)> = None;
            for ev in events {
                let ev = match ev {
                    Ok(ev) => ev,
                    Err(e) => {
                        fail(e);
                        break;
                    }
                };
                if fps > 0.0 {
                    let (t0, w0) = *base.get_or_insert((ev.timestamp_ns, clock.now_ns()));
                    clock.sleep_until(w0 + (ev.timestamp_ns - t0));
                }
                n += 1;
                if ev_tx.send((ev, clock.now_ns())).is_err() {
                    break;
                }
            }
            n
        });

        let process = s.spawn(move || {
            for (ev, cap) in ev_rx {
                let t = Instant::now();
                match processor.process(&ev) {
                    Ok(p) => {
                        let wall = t.elapsed().as_secs_f64() * 1e3;
                        clock.sleep(d_proc);
                        queue.push((p, Stamps { capture: cap, processed: clock.now_ns() }, wall));
                    }
                    Err(e) => {
                        fail(e);
                        break;
                    }
                }
            }
            queue.close();
        });

        let send = s.spawn(move || -> (Vec<FrameMetrics>, Vec<LatencyRecord>, Vec<u64>, u64, u32) {
            let mut sink = sink;
            let mut schedule: Option<DeadlineSchedule> = None;
            let mut metrics = Vec::new();
            let mut records = Vec::new();
            let mut dropped = Vec::new();
            let mut bytes = 0u64;
            let mut crc = crc32fast::Hasher::new();
            let mut record_buf = Vec::new();
            while let Some((p, stamps, wall_process_ms)) = queue.pop() {
                if fps > 0.0 {
                    let now = clock.now_ns();
                    let sch = schedule.get_or_insert_with(|| DeadlineSchedule::new(now, fps).expect("fps checked"));
                    if sch.deadline() < now {
                        sch.advance(now);
                    }
                    clock.sleep_until(sch.deadline());
                }
                let t = Instant::now();
                let encoded = match encode_frame(&p.frame, &opts) {
                    Ok(e) => e,
                    Err(e) => {
                        fail(e);
                        break;
                    }
                };
                let wall_encode_ms = t.elapsed().as_secs_f64() * 1e3;
                record_buf.clear();
                write_record(&mut record_buf, &encoded).expect("writing to memory");
                if let Err(e) = sink.write_all(&record_buf).and_then(|_| sink.flush()) {
                    fail(e.into());
                    break;
                }
                crc.update(&record_buf);
                bytes += record_buf.len() as u64;
                clock.sleep(d_send);
                let sent = clock.now_ns();
                if let Some(sch) = &mut schedule {
                    sch.advance(sent);
                }
                records.push(LatencyRecord {
                    frame_seq: p.frame.frame_seq,
                    capture: stamps.capture,
                    processed: stamps.processed,
                    sent,
                    received: sent,
                    decoded: sent,
                });
                metrics.push(FrameMetrics::new(&p, &encoded, wall_process_ms, wall_encode_ms));
                dropped.extend(queue.take_dropped().iter().map(|(p, _, _)| p.frame.frame_seq));
            }
            // Drain anything left behind after a failure so upstream can finish.
            while queue.pop().is_some() {}
            dropped.extend(queue.take_dropped().iter().map(|(p, _, _)| p.frame.frame_seq));
            drop(sink);
            (metrics, records, dropped, bytes, crc.finalize())
        });

        let recv = reader.map(|reader| {
            s.spawn(move || -> (Vec<(u64, u64, u64)>, usize) {
                let mut on_frame = on_frame;
                let mut reader = FrameReader::new(reader);
                let mut marks = Vec::new();
                let mut errors = 0;
                while let Some(rec) = reader.next_record() {
                    let Ok(bytes) = rec else {
                        errors += 1;
                        continue;
                    };
                    clock.sleep(d_transport);
                    let received = clock.now_ns();
                    match decode_frame(&bytes) {
                        Ok(frame) => {
                            clock.sleep(d_decode);
                            let decoded = clock.now_ns();
                            marks.push((frame.frame_seq, received, decoded));
                            if let Some(f) = on_frame.as_mut() {
                                f(frame, decoded);
                            }
                        }
                        Err(_) => errors += 1,
                    }
                }
                (marks, errors)
            })
        });

        let captured = capture.join().expect("capture thread");
        process.join().expect("process thread");
        let sent = send.join().expect("send thread");
        let recv = recv.map(|h| h.join().expect("receive thread"));
        (captured, sent, recv)
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    let (metrics, mut records, dropped, bytes, crc) = sent_part;
    let mut report = empty_report();
    report.frames_captured = captured;
    report.frames_sent = metrics.len();
    report.frames = metrics;
    report.dropped = dropped;
    report.stream_bytes = bytes;
    report.stream_crc32 = crc;
    match recv_part {
        Some((marks, errors)) => {
            let by_seq: HashMap<u64, (u64, u64)> = marks.iter().map(|&(s, r, d)| (s, (r, d))).collect();
            records.retain_mut(|r| match by_seq.get(&r.frame_seq) {
                Some(&(received, decoded)) => {
                    r.received = received.max(r.sent);
                    r.decoded = decoded.max(r.received);
                    true
                }
                None => false,
            });
            report.frames_received = records.len();
            report.decode_errors = errors;
        }
        None => report.frames_received = report.frames_sent,
    }
    report.records = records;
    Ok(finish(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::ColorRgb8;
    use crate::geom::{Point3, Vec3};
    use crate::sim::scene::{Motion, Primitive, Shape};

    fn small_cfg() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        for l in &mut cfg.rig.lidars {
            l.channels = 16;
            l.horizontal_step_deg = 1.0;
        }
        cfg.rig.camera.width = 48;
        cfg.rig.camera.height = 27;
        cfg.bilateral.window_radius = 3;
        cfg.stream.defocus_radius = 1;
        cfg.frames = 12;
        cfg.fake_clock = true;
        cfg
    }

    fn scene(moving: bool) -> Scene {
        let mut prims = vec![
            Primitive::new(
                "wall",
                Shape::Rect { center: Point3::new(0.0, 0.0, 6.0), u: Vec3::x() * 8.0, v: Vec3::y() * 3.0 },
                ColorRgb8::new(180, 170, 150),
            ),
            Primitive::new(
                "floor",
                Shape::Rect { center: Point3::new(0.0, 1.5, 3.0), u: Vec3::x() * 8.0, v: Vec3::z() * 3.0 },
                ColorRgb8::new(90, 90, 90),
            ),
        ];
        let mut ped = Primitive::new(
            "pedestrian",
            Shape::Box { center: Point3::new(-1.0, 0.6, 3.5), half_extents: Vec3::new(0.25, 0.9, 0.25) },
            ColorRgb8::new(200, 40, 40),
        );
        if moving {
            ped.motion = Motion::Linear { velocity: [1.5, 0.0, 0.0] };
        }
        prims.push(ped);
        Scene::new(prims, 3).unwrap()
    }

    #[test]
    fn config_toml_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.scene = Some("scenes/park.toml".into());
        cfg.stream.endpoint = Endpoint::Tcp { address: "127.0.0.1:9000".into(), connect_retries: 2, retry_backoff_ms: 50 };
        cfg.delays.process_ms = 10.0;
        let back = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(PipelineConfig::from_toml("frames = 3\nbogus = 1").is_err());
        assert!(PipelineConfig::from_toml("recolor_interval_s = 0.0").is_err());
        assert!(PipelineConfig::from_toml("[delays]\nsend_ms = -1.0").is_err());
        assert!(PipelineConfig::from_toml("[stream]\nfps = -30.0").is_err());
    }

    #[test]
    fn replayed_events_match_simulation() {
        let cfg = small_cfg();
        let s = scene(false);
        let replayed: Vec<RigEvent> = EventSource::new(&s, &cfg.rig, 7).unwrap().map(|e| e.unwrap()).collect();
        let triggers = cfg.rig.triggers(1.0).unwrap();
        assert_eq!(replayed.len(), 7);
        for (ev, trig) in replayed.iter().zip(&triggers) {
            let direct = cfg.rig.event(&s, trig).unwrap();
            assert_eq!(ev.scan.points, direct.scan.points);
            assert_eq!(ev.frame, direct.frame);
            assert_eq!(ev.timestamp_ns, direct.timestamp_ns);
            let a = ev.scan.timestamp_ns.as_ref().unwrap();
            let b = direct.scan.timestamp_ns.as_ref().unwrap();
            assert!(a.iter().zip(b).all(|(x, y)| x.abs_diff(*y) <= 1));
        }
    }

    #[test]
    fn process_matches_fuse_cull_densify() {
        let cfg = small_cfg();
        let s = scene(true);
        let mut fast = FrameProcessor::new(&cfg).unwrap();
        let mut slow = FrameProcessor::new(&cfg).unwrap();
        let cam = slow.camera().clone();
        let mut saw_dynamic = false;
        for ev in EventSource::new(&s, &cfg.rig, 10).unwrap() {
            let ev = ev.unwrap();
            let p = fast.process(&ev).unwrap();
            let fused = slow.fuse(&ev).unwrap();
            let kept = crate::fusion::occlusion_cull(&fused, &cam, cfg.fusion.occlusion_margin).unwrap();
            let want = crate::upsample::densify_frame(&kept, &ev.frame, &cam, &cfg.bilateral).unwrap();
            let dynamic = fused.labels.as_ref().unwrap().iter().filter(|&&l| l == PointLabel::Dynamic).count();
            saw_dynamic |= dynamic > 0;
            assert_eq!((p.fused_points, p.dynamic_points, p.kept_points), (fused.len(), dynamic, kept.len()));
            assert_eq!(p.frame.depth, want.depth);
        }
        assert!(saw_dynamic);
    }

    #[test]
    fn fake_run_with_delays_has_exact_latency() {
        let mut cfg = small_cfg();
        cfg.delays = StageDelays { process_ms: 10.0, send_ms: 20.0, transport_ms: 30.0, decode_ms: 21.0 };
        let r = run_scene(&scene(true), &cfg, None).unwrap();
        assert_eq!(r.frames_sent, 12);
        assert_eq!(r.frames_received, 12);
        assert!(r.dropped.is_empty());
        for rec in &r.records {
            assert_eq!(rec.stage_ns(), [10_000_000, 20_000_000, 30_000_000, 21_000_000]);
        }
        let lat = r.latency().unwrap();
        assert_eq!(lat.end_to_end.mean_ms, 81.0);
        assert_eq!(lat.end_to_end.sd_ms, 0.0);
    }

    #[test]
    fn fake_runs_are_deterministic() {
        let cfg = small_cfg();
        let a = run_scene(&scene(true), &cfg, None).unwrap();
        let b = run_scene(&scene(true), &cfg, None).unwrap();
        assert_eq!(a.stream_crc32, b.stream_crc32);
        assert_eq!(a.records, b.records);
        let strip = |r: &PipelineReport| {
            r.frames.iter().map(|m| (m.frame_seq, m.frame_crc32, m.encoded_bytes, m.kept_points)).collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn slow_sender_drops_oldest() {
        let mut cfg = small_cfg();
        cfg.frames = 20;
        // Each send takes two frame intervals.
        cfg.delays.send_ms = 66.7;
        let r = run_scene(&scene(false), &cfg, None).unwrap();
        assert!(!r.dropped.is_empty());
        assert_eq!(r.frames_sent + r.dropped.len(), 20);
        // The newest frame always makes it out.
        assert_eq!(r.frames.last().unwrap().frame_seq, 19);
    }

    #[test]
    fn threaded_matches_fake_stream_when_nothing_drops() {
        let mut cfg = small_cfg();
        cfg.frames = 6;
        let fake = run_scene(&scene(true), &cfg, None).unwrap();
        cfg.fake_clock = false;
        cfg.stream.fps = 0.0;
        let mut seen = Vec::new();
        let mut sink = |f: RgbdFrame, _t: u64| seen.push(f.frame_seq);
        let real = run_scene(&scene(true), &cfg, Some(&mut sink)).unwrap();
        assert!(real.dropped.is_empty());
        assert_eq!(real.stream_crc32, fake.stream_crc32);
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
        assert!(real.records.iter().all(|r| r.is_ordered()));
    }

    #[test]
    fn tcp_endpoint_streams_to_listener() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let mut cfg = small_cfg();
        cfg.frames = 4;
        cfg.stream.endpoint = Endpoint::Tcp {
            address: listener.local_addr().unwrap().to_string(),
            connect_retries: 0,
            retry_backoff_ms: 1,
        };
        let rx = std::thread::spawn(move || {
            let (sock, _) = listener.accept().unwrap();
            crate::stream::wire::receive_frames(sock).filter_map(|f| f.ok()).count()
        });
        let r = run_scene(&scene(false), &cfg, None).unwrap();
        assert_eq!(r.frames_sent, 4);
        assert_eq!(rx.join().unwrap(), 4);
    }

    #[test]
    fn file_endpoint_records_the_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.psf");
        let mut cfg = small_cfg();
        cfg.frames = 5;
        let loopback = run_scene(&scene(true), &cfg, None).unwrap();
        cfg.stream.endpoint = Endpoint::File { path: path.clone() };
        let r = run_scene(&scene(true), &cfg, None).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len() as u64, r.stream_bytes);
        assert_eq!(crc32fast::hash(&bytes), loopback.stream_crc32);
        let frames: Vec<_> = FrameReader::new(&bytes[..]).collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(frames.len(), 5);
    }

    #[test]
    fn dead_endpoint_fails_after_retries() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        drop(listener);
        let mut cfg = small_cfg();
        cfg.stream.endpoint = Endpoint::Tcp { address: addr.clone(), connect_retries: 1, retry_backoff_ms: 1 };
        let e = run_scene(&scene(false), &cfg, None).unwrap_err();
        assert!(e.to_string().contains(&addr));
    }
}
