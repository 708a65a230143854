//! Colored point clouds, pinhole cameras and the foreground/background
//! split/merge used by the optimized pipeline.

mod camera;
pub mod ply;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{project, CameraError, CameraModel, Projection};
pub use ply::{parse_ply, read_ply_file, write_ply, write_ply_file, PlyError, PlyFormat};

/// A colored scene point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub color: [u8; 3],
}

impl Point3 {
    pub const WHITE: [u8; 3] = [255, 255, 255];

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, color: Self::WHITE }
    }

    pub fn with_color(x: f64, y: f64, z: f64, color: [u8; 3]) -> Self {
        Self { x, y, z, color }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Bit-level identity key, used for multiset comparisons.
    pub fn key(&self) -> ([u64; 3], [u8; 3]) {
        ([self.x.to_bits(), self.y.to_bits(), self.z.to_bits()], self.color)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CloudLabel {
    Foreground,
    Background,
    #[default]
    Full,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub label: CloudLabel,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, label: CloudLabel) -> Self {
        Self { points, label }
    }

    pub fn empty(label: CloudLabel) -> Self {
        Self { points: Vec::new(), label }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.points.iter().all(Point3::is_finite)
    }

    /// Sorted bit-exact keys; two clouds are equal as multisets iff these match.
    pub fn multiset_keys(&self) -> Vec<([u64; 3], [u8; 3])> {
        let mut keys: Vec<_> = self.points.iter().map(Point3::key).collect();
        keys.sort_unstable();
        keys
    }

    pub fn same_multiset(&self, other: &PointCloud) -> bool {
        self.len() == other.len() && self.multiset_keys() == other.multiset_keys()
    }
}

/// Binary foreground raster for one camera. `true` marks a foreground pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForegroundMask {
    pub camera_id: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl ForegroundMask {
    pub fn empty(camera_id: usize, width: usize, height: usize) -> Self {
        Self { camera_id, width, height, data: vec![false; width * height] }
    }

    pub fn full(camera_id: usize, width: usize, height: usize) -> Self {
        Self { camera_id, width, height, data: vec![true; width * height] }
    }

    pub fn with_camera(mut self, camera_id: usize) -> Self {
        self.camera_id = camera_id;
        self
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }

    /// Does a projected pixel coordinate land on a foreground pixel?
    pub fn hit(&self, u: f64, v: f64) -> bool {
        if !(u >= 0.0 && v >= 0.0) {
            return false;
        }
        let (x, y) = (u.floor() as usize, v.floor() as usize);
        x < self.width && y < self.height && self.get(x, y)
    }

    /// Raster as 8-bit values {0, 255}.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    /// Any non-zero byte is foreground.
    pub fn from_bytes(camera_id: usize, width: usize, height: usize, bytes: &[u8]) -> Self {
        Self { camera_id, width, height, data: bytes.iter().map(|&b| b != 0).collect() }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("min_views must be at least 1")]
    ZeroMinViews,
    #[error("no foreground mask for camera {0}")]
    MissingMask(usize),
    #[error("mask for camera {camera} is {mask_w}x{mask_h}, camera image is {cam_w}x{cam_h}")]
    DimensionMismatch { camera: usize, mask_w: usize, mask_h: usize, cam_w: usize, cam_h: usize },
}

/// Number of cameras in which `point` projects onto a foreground pixel.
pub fn foreground_views(point: &Point3, masks: &[&ForegroundMask], cameras: &[CameraModel]) -> usize {
    cameras
        .iter()
        .zip(masks)
        .filter(|(cam, mask)| match project(point, cam) {
            Projection::Pixel { u, v } => mask.hit(u, v),
            Projection::BehindCamera => false,
        })
        .count()
}

/// Partition `cloud` into foreground and background sets.
///
/// A point is foreground iff it projects onto a foreground pixel in at least
/// `min_views` cameras. Projections behind a camera or outside its raster do
/// not count. Masks are matched to cameras by `camera_id`.
pub fn split_points(
    cloud: &PointCloud,
    masks: &[ForegroundMask],
    cameras: &[CameraModel],
    min_views: usize,
) -> Result<(PointCloud, PointCloud), SplitError> {
    if min_views == 0 {
        return Err(SplitError::ZeroMinViews);
    }
    let mut ordered = Vec::with_capacity(cameras.len());
    for cam in cameras {
        let mask = masks
            .iter()
            .find(|m| m.camera_id == cam.id)
            .ok_or(SplitError::MissingMask(cam.id))?;
        if mask.width != cam.width || mask.height != cam.height {
            return Err(SplitError::DimensionMismatch {
                camera: cam.id,
                mask_w: mask.width,
                mask_h: mask.height,
                cam_w: cam.width,
                cam_h: cam.height,
            });
        }
        ordered.push(mask);
    }

    let (fg, bg): (Vec<Point3>, Vec<Point3>) = cloud
        .points
        .iter()
        .partition(|p| foreground_views(p, &ordered, cameras) >= min_views);
    Ok((
        PointCloud::new(fg, CloudLabel::Foreground),
        PointCloud::new(bg, CloudLabel::Background),
    ))
}

/// Concatenate foreground and background into a full scene cloud.
pub fn merge_clouds(fg: &PointCloud, bg: &PointCloud) -> PointCloud {
    let mut points = Vec::with_capacity(fg.len() + bg.len());
    points.extend_from_slice(&fg.points);
    points.extend_from_slice(&bg.points);
    PointCloud::new(points, CloudLabel::Full)
}
