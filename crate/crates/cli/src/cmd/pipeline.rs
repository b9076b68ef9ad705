use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context as _;
use pointstream::pipeline::{run_scene, FrameMetrics, PipelineReport};
use pointstream::stream::Endpoint;

use crate::args::PipelineArgs;
use crate::context::{CliResult, Context};

pub fn write_metrics(frames: &[FrameMetrics], sink: impl Write) -> anyhow::Result<()> {
    let mut sink = BufWriter::new(sink);
    for m in frames {
        serde_json::to_writer(&mut sink, m)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn write_metrics_file(frames: &[FrameMetrics], path: &Path) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_metrics(frames, file)
}

fn print_report(r: &PipelineReport, endpoint: &Endpoint) -> anyhow::Result<()> {
    println!(
        "frames: {} captured, {} sent, {} received, {} dropped, {} decode errors",
        r.frames_captured,
        r.frames_sent,
        r.frames_received,
        r.dropped.len(),
        r.decode_errors
    );
    if !r.dropped.is_empty() {
        println!("dropped sequence numbers: {:?}", r.dropped);
    }
    println!("stream: {} bytes, crc32 {:08x}", r.stream_bytes, r.stream_crc32);
    if !matches!(endpoint, Endpoint::Loopback) {
        println!("no local receiver: latency ends at the send stage");
    }
    print!("{}", r.latency()?);
    println!("wall: {:.2} s, {:.1} fps", r.wall_elapsed_s, r.wall_fps);
    Ok(())
}

pub fn run(ctx: &Context, args: &PipelineArgs) -> CliResult {
    let scene = ctx.scene(args.scene.as_deref())?;
    let mut cfg = ctx.cfg.clone();
    if let Some(n) = args.frames {
        cfg.frames = n;
    }
    if let Some(address) = &args.connect {
        let (connect_retries, retry_backoff_ms) = match &cfg.stream.endpoint {
            Endpoint::Tcp { connect_retries, retry_backoff_ms, .. } => (*connect_retries, *retry_backoff_ms),
            _ => (5, 200),
        };
        cfg.stream.endpoint = Endpoint::Tcp { address: address.clone(), connect_retries, retry_backoff_ms };
    }
    if let Some(path) = &args.record {
        cfg.stream.endpoint = Endpoint::File { path: path.clone() };
    }
    let report = run_scene(&scene, &cfg, None)?;
    if let Some(path) = &args.metrics {
        write_metrics_file(&report.frames, path)?;
    }
    print_report(&report, &cfg.stream.endpoint)?;
    Ok(())
}
