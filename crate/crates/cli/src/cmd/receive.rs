use std::io::{BufWriter, Read, Write};
use std::net::TcpListener;
use std::time::Instant;

use anyhow::Context as _;
use pointstream::ply::{read_ply, write_ply};
use pointstream::session::{ReceiverSession, SessionConfig, SessionEvent};
use pointstream::stream::{decode_frame, FrameReader};
use serde_json::json;

use crate::args::ReceiveArgs;
use crate::context::{create_dir, require_file, CliError, CliResult, Context};

pub fn run(ctx: &Context, args: &ReceiveArgs) -> CliResult {
    let cfg = &ctx.cfg;
    let snapshot_interval = args.snapshot_interval.unwrap_or(cfg.snapshot_interval);
    let interval_s = args.recolor_interval_s.unwrap_or(cfg.recolor_interval_s);
    if snapshot_interval == 0 || !(interval_s > 0.0 && interval_s.is_finite()) {
        return Err(CliError::usage(anyhow::anyhow!("snapshot and recolor intervals must be positive")));
    }
    require_file(&args.static_cloud, "static cloud")?;
    let static_cloud =
        read_ply(&args.static_cloud).with_context(|| format!("reading {}", args.static_cloud.display()))?;
    let mut session = ReceiverSession::new(
        static_cloud,
        SessionConfig {
            camera: cfg.rig.camera_model()?,
            transfer: cfg.transfer,
            recolor_interval_ns: (interval_s * 1e9).round() as u64,
            snapshot_interval,
        },
    )?;

    let source: Box<dyn Read> = match (&args.listen, &args.input) {
        (Some(addr), _) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            log::info!("listening on {}", listener.local_addr()?);
            let (stream, peer) = listener.accept()?;
            log::info!("sender connected from {peer}");
            Box::new(stream)
        }
        (None, Some(path)) => {
            require_file(path, "stream file")?;
            Box::new(std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?)
        }
        (None, None) => unreachable!("clap requires a source"),
    };

    let out = ctx.output_dir(args.out.as_deref());
    create_dir(&out)?;
    let log_path = out.join("receive.jsonl");
    let mut events_log =
        BufWriter::new(std::fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);

    let started = Instant::now();
    let mut reader = FrameReader::new(source);
    let (mut records, mut decode_errors, mut snapshots, mut recolors) = (0usize, 0usize, 0usize, 0usize);
    while let Some(record) = reader.next_record() {
        records += 1;
        let frame = match record.and_then(|bytes| decode_frame(&bytes)) {
            Ok(f) => f,
            Err(e) => {
                decode_errors += 1;
                log::warn!("record {records}: {e}");
                writeln!(events_log, "{}", json!({"event": "decode_error", "record": records, "error": e.to_string()}))?;
                continue;
            }
        };
        let now_ns = if cfg.fake_clock { frame.capture_ts_ns } else { started.elapsed().as_nanos() as u64 };
        for ev in session.on_frame(&frame, now_ns)? {
            let line = match ev {
                SessionEvent::Recolored { at_ns, report } => {
                    recolors += 1;
                    log::info!("recolored at {at_ns} ns from {} pairs", report.pair_count);
                    json!({"event": "recolored", "at_ns": at_ns, "pair_count": report.pair_count, "report": report})
                }
                SessionEvent::RecolorSkipped { at_ns, reason } => {
                    json!({"event": "recolor_skipped", "at_ns": at_ns, "reason": reason})
                }
                SessionEvent::Snapshot { frame_count, static_points, dynamic_points, cloud } => {
                    snapshots += 1;
                    let name = format!("snapshot_{snapshots:05}.ply");
                    write_ply(&cloud, out.join(&name)).with_context(|| format!("writing {name}"))?;
                    json!({
                        "event": "snapshot",
                        "frame_count": frame_count,
                        "static_points": static_points,
                        "dynamic_points": dynamic_points,
                        "path": name,
                    })
                }
            };
            writeln!(events_log, "{line}")?;
        }
    }
    events_log.flush()?;
    println!(
        "{} frames decoded, {decode_errors} decode errors, {} recolor attempts ({recolors} applied), {snapshots} snapshots, {} bytes skipped",
        session.frames(),
        session.recolor_invocations(),
        reader.skipped_bytes
    );
    Ok(())
}
