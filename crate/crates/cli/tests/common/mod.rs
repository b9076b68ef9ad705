#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn scene_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes").join(name)
}

/// Three sparse lidars and a 160x90 camera; fast enough for debug runs.
/// Top-level keys in `extra` (those before its first table) are hoisted so
/// they do not land inside a lidar table.
pub fn small_config(scene: &str, extra: &str) -> String {
    let split = extra.find('[').unwrap_or(extra.len());
    let (top, tables) = extra.split_at(split);
    let mut s = format!(
        "scene = {:?}\nframes = 30\n{top}\n[rig.camera]\nwidth = 160\nheight = 90\n\n[bilateral]\nsigma_spatial = 1.0\nwindow_radius = 3\n\n",
        scene_path(scene).display().to_string()
    );
    let mounts = [[0.0, -0.15, 0.0], [0.13, -0.075, 0.0], [-0.13, -0.075, 0.0]];
    for (i, m) in mounts.iter().enumerate() {
        s += &format!(
            "[[rig.lidars]]\nsensor_id = {i}\nchannels = 48\nhorizontal_step_deg = 0.4\nphase_offset_deg = {}\nwindow_width_deg = 120.0\n[rig.lidars.mount]\ntranslation = [{}, {}, {}]\n\n",
            120.0 * i as f64,
            m[0],
            m[1],
            m[2]
        );
    }
    s + tables
}

pub struct Env {
    pub dir: tempfile::TempDir,
}

impl Env {
    pub fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    pub fn config(&self, scene: &str, extra: &str) -> PathBuf {
        self.write("cfg.toml", &small_config(scene, extra))
    }
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_pointstream")).args(args).output().unwrap()
}

pub fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn json_lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}
