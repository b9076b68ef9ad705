use crate::error::{Error, Result};
use crate::image::{DepthImage, RgbImage};

/// Registered color and dense depth sharing one camera and capture instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdFrame {
    pub rgb: RgbImage,
    pub depth: DepthImage,
    pub capture_ts_ns: u64,
    pub camera_id: u8,
    pub frame_seq: u64,
}

impl RgbdFrame {
    pub fn new(rgb: RgbImage, depth: DepthImage, capture_ts_ns: u64, camera_id: u8, frame_seq: u64) -> Result<Self> {
        if rgb.dims() != depth.dims() {
            return Err(Error::param(format!(
                "rgb is {}x{} but depth is {}x{}",
                rgb.width, rgb.height, depth.width, depth.height
            )));
        }
        Ok(Self {
            rgb,
            depth,
            capture_ts_ns,
            camera_id,
            frame_seq,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.rgb.dims()
    }

    pub fn with_seq(mut self, camera_id: u8, frame_seq: u64) -> Self {
        self.camera_id = camera_id;
        self.frame_seq = frame_seq;
        self
    }
}

/// Checks that `frame_seq` strictly increases per camera.
#[derive(Debug, Clone)]
pub struct SeqTracker {
    last: [Option<u64>; 256],
}

impl Default for SeqTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl SeqTracker {
    pub fn new() -> Self {
        Self { last: [None; 256] }
    }

    pub fn observe(&mut self, frame: &RgbdFrame) -> Result<()> {
        let slot = &mut self.last[frame.camera_id as usize];
        if let Some(prev) = *slot {
            if frame.frame_seq <= prev {
                return Err(Error::Data(format!(
                    "camera {} frame_seq {} does not follow {prev}",
                    frame.camera_id, frame.frame_seq
                )));
            }
        }
        *slot = Some(frame.frame_seq);
        Ok(())
    }
}
