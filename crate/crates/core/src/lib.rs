//! Live point-cloud capture simulation, fusion, densification, RGB-D
//! streaming and static-cloud color transfer.

pub mod cloud;
pub mod color;
pub mod colorxfer;
pub mod error;
pub mod fusion;
pub mod geom;
pub mod image;
pub mod index;
pub mod pipeline;
pub mod ply;
pub mod projection;
pub mod session;
pub mod sim;
pub mod stream;
pub mod upsample;

pub use cloud::{PointCloud, PointLabel};
pub use color::{ColorLab, ColorRgb8};
pub use error::{Error, Result};
pub use geom::{Point3, Pose, Vec3};
pub use image::{DepthImage, RgbImage};
pub use projection::{CameraIntrinsics, SensorModel};
pub use stream::RgbdFrame;
