//! Per-frame latency records and summary statistics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stage boundaries in pipeline order, all in clock nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub frame_seq: u64,
    pub capture: u64,
    pub processed: u64,
    pub sent: u64,
    pub received: u64,
    pub decoded: u64,
}

/// Names of the adjacent-stage deltas, in order.
pub const STAGES: [&str; 4] = ["process", "send", "transport", "decode"];

impl LatencyRecord {
    fn marks(&self) -> [u64; 5] {
        [self.capture, self.processed, self.sent, self.received, self.decoded]
    }

    pub fn is_ordered(&self) -> bool {
        self.marks().windows(2).all(|w| w[0] <= w[1])
    }

    pub fn end_to_end_ns(&self) -> u64 {
        self.decoded - self.capture
    }

    pub fn stage_ns(&self) -> [u64; 4] {
        let m = self.marks();
        std::array::from_fn(|i| m[i + 1] - m[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean_ms: f64,
    /// Population standard deviation.
    pub sd_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    /// Nearest-rank 99th percentile.
    pub p99_ms: f64,
}

impl Summary {
    pub fn of_ns(samples: &[u64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("no samples"));
        }
        let ms: Vec<f64> = samples.iter().map(|&x| x as f64 / 1e6).collect();
        let n = ms.len() as f64;
        let mean = ms.iter().sum::<f64>() / n;
        let var = ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = ms.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.99 * n).ceil() as usize).clamp(1, sorted.len());
        Ok(Self {
            count: ms.len(),
            mean_ms: mean,
            sd_ms: var.sqrt(),
            min_ms: sorted[0],
            max_ms: sorted[sorted.len() - 1],
            p99_ms: sorted[rank - 1],
        })
    }

    /// `mean 81.31 ms (SD: 4.85)`
    pub fn mean_sd(&self) -> String {
        format_mean_sd(self.mean_ms, self.sd_ms)
    }
}

pub fn format_mean_sd(mean_ms: f64, sd_ms: f64) -> String {
    format!("mean {mean_ms:.2} ms (SD: {sd_ms:.2})")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub end_to_end: Summary,
    pub stages: Vec<StageSummary>,
}

impl LatencyReport {
    pub fn stage(&self, name: &str) -> Option<&Summary> {
        self.stages.iter().find(|s| s.stage == name).map(|s| &s.summary)
    }
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.end_to_end;
        writeln!(
            f,
            "end-to-end latency over {} frames: {}, min {:.2} ms, max {:.2} ms, p99 {:.2} ms",
            e.count,
            e.mean_sd(),
            e.min_ms,
            e.max_ms,
            e.p99_ms
        )?;
        for s in &self.stages {
            writeln!(f, "  {:<10} {}", s.stage, s.summary.mean_sd())?;
        }
        Ok(())
    }
}

pub fn latency_report(records: &[LatencyRecord]) -> Result<LatencyReport> {
    if records.is_empty() {
        return Err(Error::param("latency report needs at least one record"));
    }
    if let Some(r) = records.iter().find(|r| !r.is_ordered()) {
        return Err(Error::Data(format!(
            "frame {} has timestamps out of pipeline order",
            r.frame_seq
        )));
    }
    let e2e: Vec<u64> = records.iter().map(LatencyRecord::end_to_end_ns).collect();
    let stages = STAGES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let xs: Vec<u64> = records.iter().map(|r| r.stage_ns()[i]).collect();
            Ok(StageSummary {
                stage: name.to_string(),
                summary: Summary::of_ns(&xs)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LatencyReport {
        end_to_end: Summary::of_ns(&e2e)?,
        stages,
    })
}
