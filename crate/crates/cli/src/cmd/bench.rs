use std::io::Write;

use anyhow::Context as _;
use pointstream::pipeline::run_scene;
use pointstream::stream::{Codec, Endpoint};
use serde_json::json;

use crate::args::{BenchArgs, CodecArg};
use crate::cmd::pipeline::write_metrics;
use crate::context::{CliError, CliResult, Context};

/// Emits one JSON line per frame, then a summary line. Fields prefixed
/// `wall_` depend on the host; with `clock` = `wall` the latency figures do
/// too. Never judges the numbers.
pub fn run(ctx: &Context, args: &BenchArgs) -> CliResult {
    let scene = ctx.scene(args.scene.as_deref())?;
    let mut cfg = ctx.cfg.clone();
    cfg.frames = args.frames;
    cfg.stream.endpoint = Endpoint::Loopback;
    if let Some(w) = args.width {
        cfg.rig.camera.width = w;
    }
    if let Some(h) = args.height {
        cfg.rig.camera.height = h;
    }
    if let Some(c) = args.codec {
        cfg.stream.codec = match c {
            CodecArg::Store => Codec::Store,
            CodecArg::Deflate => Codec::Deflate,
        };
    }
    cfg.validate().map_err(CliError::usage)?;

    let r = run_scene(&scene, &cfg, None)?;
    let n = r.frames.len().max(1) as f64;
    let mean = |f: fn(&pointstream::pipeline::FrameMetrics) -> f64| r.frames.iter().map(f).sum::<f64>() / n;
    let latency = if r.records.is_empty() { None } else { Some(r.latency()?) };
    let summary = json!({
        "summary": {
            "frames": cfg.frames,
            "width": cfg.rig.camera.width,
            "height": cfg.rig.camera.height,
            "codec": cfg.stream.codec,
            "clock": if cfg.fake_clock { "fake" } else { "wall" },
            "frames_captured": r.frames_captured,
            "frames_sent": r.frames_sent,
            "frames_received": r.frames_received,
            "dropped": r.dropped.len(),
            "decode_errors": r.decode_errors,
            "stream_bytes": r.stream_bytes,
            "stream_crc32": r.stream_crc32,
            "mean_compression_ratio": mean(|m| m.compression_ratio),
            "latency": latency,
            "wall_elapsed_s": r.wall_elapsed_s,
            "wall_fps": r.wall_fps,
            "wall_process_ms": mean(|m| m.wall_process_ms),
            "wall_encode_ms": mean(|m| m.wall_encode_ms),
        }
    });

    match &args.metrics {
        Some(path) => {
            let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_metrics(&r.frames, &mut file)?;
            writeln!(file, "{summary}")?;
            println!(
                "{} frames at {}x{}: {:.1} fps, {} dropped; metrics in {}",
                r.frames_received,
                cfg.rig.camera.width,
                cfg.rig.camera.height,
                r.wall_fps,
                r.dropped.len(),
                path.display()
            );
        }
        None => {
            let mut out = std::io::stdout().lock();
            write_metrics(&r.frames, &mut out)?;
            writeln!(out, "{summary}")?;
        }
    }
    Ok(())
}
