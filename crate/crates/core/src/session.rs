//! Receiving side: backprojects incoming frames, periodically recolors the
//! pre-registered static cloud from them and emits combined snapshots.

use crate::cloud::{PointCloud, PointLabel};
use crate::colorxfer::{transfer_colors, TransferParams, TransferReport};
use crate::error::{Error, Result};
use crate::projection::{backproject, SensorModel};
use crate::stream::frame::RgbdFrame;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub camera: SensorModel,
    pub transfer: TransferParams,
    pub recolor_interval_ns: u64,
    pub snapshot_interval: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Recolored { at_ns: u64, report: Box<TransferReport> },
    /// A recolor was due but could not run; the static colors are unchanged.
    RecolorSkipped { at_ns: u64, reason: String },
    Snapshot {
        frame_count: usize,
        static_points: usize,
        dynamic_points: usize,
        /// Static points first, then the latest dynamic points, labeled.
        cloud: PointCloud,
    },
}

#[derive(Debug, Clone)]
pub struct ReceiverSession {
    cfg: SessionConfig,
    /// As registered; every recolor starts from these colors.
    original: PointCloud,
    current: PointCloud,
    dynamic: Option<PointCloud>,
    next_recolor_ns: Option<u64>,
    frames: usize,
    recolor_invocations: usize,
}

impl ReceiverSession {
    pub fn new(static_cloud: PointCloud, cfg: SessionConfig) -> Result<Self> {
        static_cloud.validate()?;
        if !static_cloud.is_colored() {
            return Err(Error::param("static cloud must carry colors"));
        }
        cfg.transfer.validate()?;
        if cfg.recolor_interval_ns == 0 || cfg.snapshot_interval == 0 {
            return Err(Error::param("recolor and snapshot intervals must be positive"));
        }
        Ok(Self {
            cfg,
            current: static_cloud.clone(),
            original: static_cloud,
            dynamic: None,
            next_recolor_ns: None,
            frames: 0,
            recolor_invocations: 0,
        })
    }

    pub fn static_cloud(&self) -> &PointCloud {
        &self.current
    }

    pub fn latest_dynamic(&self) -> Option<&PointCloud> {
        self.dynamic.as_ref()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn recolor_invocations(&self) -> usize {
        self.recolor_invocations
    }

    /// Ingests a decoded frame received at `now_ns`.
    pub fn on_frame(&mut self, frame: &RgbdFrame, now_ns: u64) -> Result<Vec<SessionEvent>> {
        self.dynamic = Some(backproject(&frame.depth, Some(&frame.rgb), &self.cfg.camera)?);
        self.frames += 1;
        let mut events = self.tick(now_ns)?;
        if self.frames.is_multiple_of(self.cfg.snapshot_interval) {
            events.push(self.snapshot());
        }
        Ok(events)
    }

    /// Advances time. The first call starts the recolor timer; afterwards a
    /// recolor runs whenever a period boundary has been crossed, once per
    /// call even if several boundaries were skipped.
    pub fn tick(&mut self, now_ns: u64) -> Result<Vec<SessionEvent>> {
        let interval = self.cfg.recolor_interval_ns;
        let Some(next) = self.next_recolor_ns else {
            self.next_recolor_ns = Some(now_ns + interval);
            return Ok(Vec::new());
        };
        if now_ns < next {
            return Ok(Vec::new());
        }
        let mut n = next + interval;
        while n <= now_ns {
            n += interval;
        }
        self.next_recolor_ns = Some(n);
        Ok(vec![self.recolor(now_ns)?])
    }

    fn recolor(&mut self, at_ns: u64) -> Result<SessionEvent> {
        self.recolor_invocations += 1;
        let Some(dynamic) = &self.dynamic else {
            return Ok(SessionEvent::RecolorSkipped { at_ns, reason: "no dynamic frame yet".into() });
        };
        match transfer_colors(&self.original, dynamic, &self.cfg.transfer) {
            Ok(t) => {
                self.current = t.cloud;
                Ok(SessionEvent::Recolored { at_ns, report: Box::new(t.report) })
            }
            Err(e @ Error::InsufficientOverlap { .. }) => {
                log::warn!("recolor skipped: {e}");
                Ok(SessionEvent::RecolorSkipped { at_ns, reason: e.to_string() })
            }
            Err(e) => Err(e),
        }
    }

    fn snapshot(&self) -> SessionEvent {
        let mut cloud = self.current.clone();
        cloud.labels = Some(vec![PointLabel::Static; cloud.len()]);
        let dynamic_points = self.dynamic.as_ref().map_or(0, |d| d.len());
        if let Some(d) = &self.dynamic {
            let mut d = d.clone();
            d.labels = Some(vec![PointLabel::Dynamic; d.len()]);
            cloud.sensor_id = None;
            cloud.timestamp_ns = None;
            cloud.extend(&d);
        }
        SessionEvent::Snapshot {
            frame_count: self.frames,
            static_points: self.current.len(),
            dynamic_points,
            cloud,
        }
    }
}
