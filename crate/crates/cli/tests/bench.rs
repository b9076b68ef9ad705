mod common;

use common::*;
use serde_json::Value;

fn bench(cfg: &std::path::Path, extra: &[&str]) -> Vec<Value> {
    let mut args = vec!["--config", cfg.to_str().unwrap(), "bench"];
    args.extend_from_slice(extra);
    let stdout = ok(&run(args));
    stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn strip_wall(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.retain(|k, _| !k.starts_with("wall_"));
            m.values_mut().for_each(strip_wall);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_wall),
        _ => {}
    }
}

#[test]
fn one_record_per_frame_and_a_summary() {
    let env = Env::new();
    let cfg = env.config("static_park.toml", "");
    let lines = bench(&cfg, &["--frames", "24"]);
    let (summary, frames) = lines.split_last().unwrap();
    let s = &summary["summary"];
    assert_eq!(s["frames"], 24);
    assert_eq!(frames.len() as u64, s["frames_sent"].as_u64().unwrap());
    assert_eq!(s["frames_received"].as_u64().unwrap() + s["dropped"].as_u64().unwrap(), 24);
    assert_eq!(s["clock"], "wall");
    assert!(s["wall_fps"].as_f64().unwrap() > 0.0);
}

#[test]
fn codecs_differ_in_ratio() {
    let env = Env::new();
    let cfg = env.config("static_park.toml", "fake_clock = true\n");
    let ratio = |codec| {
        let lines = bench(&cfg, &["--frames", "6", "--codec", codec]);
        lines.last().unwrap()["summary"]["mean_compression_ratio"].as_f64().unwrap()
    };
    let (store, deflate) = (ratio("store"), ratio("deflate"));
    assert!((store - 1.0).abs() < 0.01, "{store}");
    assert!(deflate > store * 1.5, "{deflate} vs {store}");
}

#[test]
fn fake_clock_runs_repeat_exactly() {
    let env = Env::new();
    let cfg = env.config("moving_pedestrian.toml", "fake_clock = true\n[delays]\nprocess_ms = 5.0\n");
    let metrics = env.path("m.jsonl");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let stdout = ok(&run([
            "--config",
            cfg.to_str().unwrap(),
            "bench",
            "--frames",
            "12",
            "--width",
            "128",
            "--height",
            "72",
            "--metrics",
            metrics.to_str().unwrap(),
        ]));
        assert!(stdout.starts_with("12 frames at 128x72"), "{stdout}");
        let mut lines = json_lines(&metrics);
        assert_eq!(lines.len(), 13);
        lines.iter_mut().for_each(strip_wall);
        runs.push(lines);
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0].last().unwrap()["summary"]["clock"], "fake");
}
