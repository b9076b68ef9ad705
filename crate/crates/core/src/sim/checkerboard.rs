//! Panel-loss accounting against a checkerboard target.

use serde::{Deserialize, Serialize};

use crate::color::ColorRgb8;
use crate::error::{Error, Result};
use crate::geom::{Point3, Vec3};
use crate::sim::lidar::{scan_returns, LidarConfig};
use crate::sim::scene::{Checker, Primitive, Scene, Shape};

pub const BOARD_WIDTH: f64 = 1.6;
pub const BOARD_HEIGHT: f64 = 1.2;
pub const SQUARE: f64 = 0.12;
pub const DISTANCE: f64 = 1.5;

/// Board facing the sensor head-on at [`DISTANCE`], centered on its axis.
pub fn checkerboard_scene(seed: u64) -> Scene {
    Scene::new(
        vec![Primitive::new(
            "checkerboard",
            Shape::Rect {
                center: Point3::new(0.0, 0.0, DISTANCE),
                u: Vec3::x() * (BOARD_WIDTH / 2.0),
                v: Vec3::y() * (BOARD_HEIGHT / 2.0),
            },
            ColorRgb8::WHITE,
        )
        .with_checker(Checker {
            square: SQUARE,
            color: ColorRgb8::BLACK,
        })],
        seed,
    )
    .expect("checkerboard geometry is valid")
}

/// Default sensor restricted to the forward quarter, which contains the board.
pub fn checkerboard_lidar(transmittance: f64) -> LidarConfig {
    LidarConfig {
        panel_transmittance: transmittance,
        window_center_deg: 0.0,
        window_width_deg: 90.0,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerboardResult {
    pub transmittance: f64,
    pub trials: usize,
    /// Returns with a transparent panel.
    pub baseline: usize,
    pub mean_captured: f64,
    pub mean_loss: f64,
    /// Normal-approximation binomial 95% interval around `mean_loss`.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Normal-approximation 95% interval for a proportion `p` estimated from
/// `n` Bernoulli draws.
pub fn binomial_ci95(p: f64, n: f64) -> (f64, f64) {
    let half = 1.96 * (p * (1.0 - p) / n).sqrt();
    (p - half, p + half)
}

/// Scans the board `trials` times through a panel of the given
/// transmittance, each trial with its own dropout draws, and reports the
/// loss relative to a transmittance-1 scan.
pub fn checkerboard_experiment(transmittance: f64, trials: usize, seed: u64) -> Result<CheckerboardResult> {
    if trials == 0 {
        return Err(Error::param("need at least one trial"));
    }
    let scene = checkerboard_scene(seed);
    let baseline = scan_returns(&scene, &checkerboard_lidar(1.0), 0.0, 0.0, 0)?.len();
    if baseline == 0 {
        return Err(Error::Data("baseline scan saw no board returns".into()));
    }
    let cfg = checkerboard_lidar(transmittance);
    let mut total = 0usize;
    for k in 0..trials {
        let t0 = k as f64 / cfg.rotation_rate_hz;
        total += scan_returns(&scene, &cfg, t0, 0.0, k as u64)?.len();
    }
    let mean_captured = total as f64 / trials as f64;
    let mean_loss = 1.0 - mean_captured / baseline as f64;
    let (ci_low, ci_high) = binomial_ci95(mean_loss, (trials * baseline) as f64);
    Ok(CheckerboardResult {
        transmittance,
        trials,
        baseline,
        mean_captured,
        mean_loss,
        ci_low,
        ci_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clear_panel_loses_nothing() {
        let r = checkerboard_experiment(1.0, 3, 0).unwrap();
        assert_eq!(r.mean_loss, 0.0);
        assert_eq!(r.mean_captured, r.baseline as f64);
    }

    #[test]
    fn baseline_matches_board_solid_angle() {
        let cfg = checkerboard_lidar(1.0);
        let els = cfg.elevations();
        let mut want = 0;
        for j in 0..cfg.steps() {
            let az = (j as f64 * cfg.horizontal_step_deg).to_radians();
            if az.cos() <= 0.0 {
                continue;
            }
            for &el in &els {
                let x = DISTANCE * az.tan();
                let y = DISTANCE * el.tan() / az.cos();
                if x.abs() <= BOARD_WIDTH / 2.0 && y.abs() <= BOARD_HEIGHT / 2.0 {
                    want += 1;
                }
            }
        }
        let r = checkerboard_experiment(1.0, 1, 0).unwrap();
        assert_eq!(r.baseline, want);
    }

    #[test]
    fn opaque_panel_loses_everything() {
        let r = checkerboard_experiment(0.0, 2, 0).unwrap();
        assert_eq!(r.mean_loss, 1.0);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(checkerboard_experiment(0.5, 0, 0).is_err());
    }
}
