//! Deterministic synthetic capture unit: ray-cast scenes, rotating LiDARs,
//! a trigger-coupled camera and the panel-loss harness.

pub mod camera;
pub mod checkerboard;
pub mod lidar;
pub mod rig;
pub mod scene;
pub mod scene_file;

pub use camera::{camera_depth, camera_frame};
pub use checkerboard::{checkerboard_experiment, CheckerboardResult};
pub use lidar::{lidar_scan, LidarConfig, Mount};
pub use rig::{run_rig, CameraSpec, RigConfig, RigEvent, Trigger};
pub use scene::{Illumination, Motion, Primitive, Scene, Shape};
pub use scene_file::{load_scene, parse_scene, scene_to_toml};
