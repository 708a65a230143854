//! Background modelling and foreground extraction for the input frames.
//!
//! Each pixel keeps an exponentially weighted running mean and variance.
//! A pixel is foreground when it deviates from the mean by more than
//! `k_sigma` standard deviations, with the deviation floored at
//! [`DEFAULT_SIGMA_FLOOR`] so perfectly static pixels do not flag on
//! sensor noise.

mod cluster;
mod kmeans;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointcloud::ForegroundMask;

pub use cluster::{cluster_mask, cluster_mask_with, silhouette, ClusterParams};
pub use kmeans::{kmeans, KMeansError, KMeansResult};

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_SIGMA_FLOOR: f64 = 2.0;
pub const DEFAULT_K_SIGMA: f64 = 2.5;
pub const DEFAULT_K_MAX: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("frame is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch { want_w: usize, want_h: usize, got_w: usize, got_h: usize },
    #[error("raster has {len} bytes, expected {width}x{height}")]
    BadRaster { width: usize, height: usize, len: usize },
    #[error("learning rate {0} is outside (0, 1]")]
    BadLearningRate(f64),
    #[error("threshold parameters must be non-negative")]
    BadThreshold,
    #[error("background model has not seen any frame")]
    Untrained,
    #[error("no foreground")]
    NoForeground,
    #[error(transparent)]
    KMeans(#[from] KMeansError),
}

/// 8-bit grayscale frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, SegmentationError> {
        if data.len() != width * height {
            return Err(SegmentationError::BadRaster { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Per-pixel running Gaussian background.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BackgroundModel {
    pub width: usize,
    pub height: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub frames: u64,
}

impl BackgroundModel {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    fn check_dims(&self, frame: &GrayFrame) -> Result<(), SegmentationError> {
        if frame.width != self.width || frame.height != self.height {
            return Err(SegmentationError::DimensionMismatch {
                want_w: self.width,
                want_h: self.height,
                got_w: frame.width,
                got_h: frame.height,
            });
        }
        Ok(())
    }

    /// Fold one frame into the model. An empty model is initialized from
    /// the frame with zero variance.
    pub fn update(&mut self, frame: &GrayFrame, learning_rate: f64) -> Result<(), SegmentationError> {
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(SegmentationError::BadLearningRate(learning_rate));
        }
        if self.is_empty() {
            self.width = frame.width;
            self.height = frame.height;
            self.mean = frame.data.iter().map(|&v| v as f64).collect();
            self.variance = vec![0.0; frame.data.len()];
            self.frames = 1;
            return Ok(());
        }
        self.check_dims(frame)?;
        let a = learning_rate;
        for ((m, var), &px) in self.mean.iter_mut().zip(self.variance.iter_mut()).zip(&frame.data) {
            let d = px as f64 - *m;
            *m += a * d;
            *var = (1.0 - a) * (*var + a * d * d);
        }
        self.frames += 1;
        Ok(())
    }
}

/// Functional form of [`BackgroundModel::update`].
pub fn update_background(
    mut model: BackgroundModel,
    frame: &GrayFrame,
    learning_rate: f64,
) -> Result<BackgroundModel, SegmentationError> {
    model.update(frame, learning_rate)?;
    Ok(model)
}

/// Foreground mask with the default σ floor. The mask carries camera id 0;
/// use [`ForegroundMask::with_camera`] to attach it to a camera.
pub fn extract_mask(
    model: &BackgroundModel,
    frame: &GrayFrame,
    k_sigma: f64,
) -> Result<ForegroundMask, SegmentationError> {
    extract_mask_with(model, frame, k_sigma, DEFAULT_SIGMA_FLOOR)
}

/// Pixel is foreground iff `|pixel - mean| > k_sigma * max(sqrt(variance), sigma_floor)`.
pub fn extract_mask_with(
    model: &BackgroundModel,
    frame: &GrayFrame,
    k_sigma: f64,
    sigma_floor: f64,
) -> Result<ForegroundMask, SegmentationError> {
    if model.is_empty() {
        return Err(SegmentationError::Untrained);
    }
    if !(k_sigma >= 0.0 && sigma_floor >= 0.0) {
        return Err(SegmentationError::BadThreshold);
    }
    model.check_dims(frame)?;
    let data = frame
        .data
        .iter()
        .zip(model.mean.iter().zip(&model.variance))
        .map(|(&px, (&m, &var))| (px as f64 - m).abs() > k_sigma * var.sqrt().max(sigma_floor))
        .collect();
    Ok(ForegroundMask { camera_id: 0, width: frame.width, height: frame.height, data })
}
