mod common;

use common::*;

fn pipeline(cfg: &std::path::Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec!["--config", cfg.to_str().unwrap(), "pipeline"];
    args.extend_from_slice(extra);
    run(args)
}

#[test]
fn loopback_receives_every_frame_not_dropped() {
    let env = Env::new();
    let cfg = env.config("moving_pedestrian.toml", "");
    let metrics = env.path("m.jsonl");
    let stdout = ok(&pipeline(&cfg, &["--frames", "90", "--metrics", metrics.to_str().unwrap()]));
    let counts = stdout.lines().next().unwrap();
    let num = |key: &str| -> usize {
        let i = counts.find(key).unwrap();
        counts[..i].trim_end().rsplit([' ', ',']).next().unwrap().parse().unwrap()
    };
    assert_eq!(num("captured"), 90);
    assert_eq!(num("received"), 90 - num("dropped"), "{counts}");
    let lines = json_lines(&metrics);
    assert_eq!(lines.len(), num("sent"));
    assert!(lines.iter().all(|m| m["latency"].is_object() || m["latency"].is_null()));
}

fn mean_stage(metrics: &std::path::Path, from: &str, to: &str) -> f64 {
    let recs: Vec<_> = json_lines(metrics).into_iter().filter(|m| m["latency"].is_object()).collect();
    assert!(!recs.is_empty());
    recs.iter()
        .map(|m| (m["latency"][to].as_u64().unwrap() - m["latency"][from].as_u64().unwrap()) as f64 * 1e-6)
        .sum::<f64>()
        / recs.len() as f64
}

#[test]
fn injected_delay_lengthens_its_stage() {
    let env = Env::new();
    let mut deltas = Vec::new();
    for ms in [0.0, 10.0] {
        let cfg = env.config("static_park.toml", &format!("[delays]\ndecode_ms = {ms}\n"));
        let metrics = env.path("m.jsonl");
        ok(&pipeline(&cfg, &["--frames", "12", "--metrics", metrics.to_str().unwrap()]));
        deltas.push(mean_stage(&metrics, "received", "decoded"));
    }
    assert!((deltas[1] - deltas[0] - 10.0).abs() <= 2.0, "{deltas:?}");
}

#[test]
fn fake_clock_stage_equals_injected_delay() {
    let env = Env::new();
    let cfg = env.config("static_park.toml", "fake_clock = true\n[delays]\nprocess_ms = 10.0\n");
    let mut runs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let metrics = env.path(name);
        ok(&pipeline(&cfg, &["--frames", "9", "--metrics", metrics.to_str().unwrap()]));
        assert!((mean_stage(&metrics, "capture", "processed") - 10.0).abs() < 1e-9);
        // Wall timings are the only fields allowed to differ between runs.
        let mut lines = json_lines(&metrics);
        for m in &mut lines {
            let obj = m.as_object_mut().unwrap();
            obj.retain(|k, _| !k.starts_with("wall_"));
        }
        runs.push(lines);
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn unreachable_receiver_fails_after_retries() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let env = Env::new();
    let cfg = env.config(
        "static_park.toml",
        &format!("[stream.endpoint]\nkind = \"tcp\"\naddress = \"127.0.0.1:{port}\"\nconnect_retries = 2\nretry_backoff_ms = 50\n"),
    );
    let out = pipeline(&cfg, &["--frames", "3"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains(&port.to_string()), "{}", stderr(&out));
}

#[test]
fn record_then_receive_round_trip() {
    let env = Env::new();
    let cfg = env.config("static_park.toml", "fake_clock = true\n");
    let rec = env.path("stream.bin");
    let stdout = ok(&pipeline(&cfg, &["--frames", "6", "--record", rec.to_str().unwrap()]));
    assert!(stdout.contains("no local receiver"));
    let bytes = std::fs::read(&rec).unwrap();
    let crc = format!("{:08x}", crc32(&bytes));
    assert!(stdout.contains(&format!("{} bytes, crc32 {crc}", bytes.len())), "{stdout}");
}

/// Bitwise CRC-32 (IEEE, reflected).
fn crc32(data: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in data {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
        }
    }
    !crc
}
