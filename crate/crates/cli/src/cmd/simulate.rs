use std::io::Write;
use std::path::Path;

use anyhow::Context as _;
use pointstream::pipeline::EventSource;
use pointstream::ply::write_ply;
use pointstream::RgbImage;
use serde::Serialize;

use crate::args::SimulateArgs;
use crate::context::{create_dir, CliError, CliResult, Context};

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    duration_s: f64,
    camera_fps: f64,
    width: usize,
    height: usize,
    events: Vec<EventEntry>,
}

#[derive(Serialize)]
struct EventEntry {
    index: usize,
    time_s: f64,
    timestamp_ns: u64,
    sensor_id: u8,
    rotation: u64,
    points: usize,
    scan: String,
    frame: String,
}

/// Binary PPM (P6).
fn write_ppm(img: &RgbImage, path: &Path) -> anyhow::Result<()> {
    let (w, h) = img.dims();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&img.to_bytes());
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn run(ctx: &Context, args: &SimulateArgs) -> CliResult {
    if !(args.duration > 0.0 && args.duration.is_finite()) {
        return Err(CliError::usage(anyhow::anyhow!("--duration must be positive")));
    }
    let scene = ctx.scene(args.scene.as_deref())?;
    let rig = &ctx.cfg.rig;
    rig.validate().map_err(CliError::usage)?;
    let out = ctx.output_dir(args.out.as_deref());
    for sub in ["scans", "frames"] {
        create_dir(&out.join(sub))?;
    }

    let frames = (args.duration * rig.camera_fps).round() as usize;
    let mut events = Vec::with_capacity(frames);
    for ev in EventSource::new(&scene, rig, frames)? {
        let ev = ev?;
        let scan = format!("scans/scan_{:05}.ply", ev.index);
        let frame = format!("frames/frame_{:05}.ppm", ev.index);
        write_ply(&ev.scan, out.join(&scan)).with_context(|| format!("writing {scan}"))?;
        write_ppm(&ev.frame, &out.join(&frame))?;
        events.push(EventEntry {
            index: ev.index,
            time_s: ev.time_s,
            timestamp_ns: ev.timestamp_ns,
            sensor_id: ev.sensor_id,
            rotation: ev.rotation,
            points: ev.scan.len(),
            scan,
            frame,
        });
    }
    let manifest = Manifest {
        seed: scene.seed,
        duration_s: args.duration,
        camera_fps: rig.camera_fps,
        width: rig.camera.width,
        height: rig.camera.height,
        events,
    };
    let path = out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    println!("{} events written to {}", manifest.events.len(), out.display());
    Ok(())
}
