//! Camera-subset selection.
//!
//! Given which cameras see which 3D points, pick `N'` cameras maximizing the
//! number of points seen by at least two of them (a point needs two views to
//! be triangulated). Solving this for every `N'` yields the camera map
//! `N' -> subset` the controller searches over.

mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointcloud::{project, CameraModel, PointCloud, Projection};
use crate::segmentation::{kmeans, KMeansError};

pub use solver::{build_camera_map, solve_p2, solve_p2_greedy, EXACT_CAMERA_LIMIT};

pub const MIN_CAMERAS: usize = 3;
pub const MAX_CAMERAS: usize = 64;
pub const DEFAULT_KEYPOINT_FRACTION: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum CamSelectError {
    #[error("need at least {MIN_CAMERAS} cameras, got {0}")]
    TooFewCameras(usize),
    #[error("at most {MAX_CAMERAS} cameras are supported, got {0}")]
    TooManyCameras(usize),
    #[error("visibility matrix has no points")]
    NoPoints,
    #[error("row {row} has {len} entries, expected {expected}")]
    RaggedRow { row: usize, len: usize, expected: usize },
    #[error("point coordinates given for {got} points, matrix has {expected}")]
    PointCountMismatch { got: usize, expected: usize },
    #[error("n' = {n_prime} is outside [{MIN_CAMERAS}, {n}]")]
    NPrimeOutOfRange { n_prime: usize, n: usize },
    #[error("key-point fraction {0} must be in (0, 1] and select at least one point")]
    BadFraction(f64),
    #[error("matrix carries no point coordinates")]
    NoGeometry,
    #[error("visibility CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    KMeans(#[from] KMeansError),
}

/// Binary point-by-camera coverage matrix. Bit `n` of row `k` is set iff
/// point `k` is seen by camera column `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityMatrix {
    camera_ids: Vec<usize>,
    rows: Vec<u64>,
    /// Point coordinates, one per row, or empty when the matrix was loaded
    /// without geometry.
    points: Vec<[f64; 3]>,
}

impl VisibilityMatrix {
    pub fn new(camera_ids: Vec<usize>, rows: Vec<Vec<bool>>, points: Vec<[f64; 3]>) -> Result<Self, CamSelectError> {
        let n = camera_ids.len();
        let bits = rows
            .iter()
            .enumerate()
            .map(|(k, row)| {
                if row.len() != n {
                    return Err(CamSelectError::RaggedRow { row: k, len: row.len(), expected: n });
                }
                Ok(row.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_bits(camera_ids, bits, points)
    }

    pub fn from_bits(camera_ids: Vec<usize>, rows: Vec<u64>, points: Vec<[f64; 3]>) -> Result<Self, CamSelectError> {
        let n = camera_ids.len();
        if n < MIN_CAMERAS {
            return Err(CamSelectError::TooFewCameras(n));
        }
        if n > MAX_CAMERAS {
            return Err(CamSelectError::TooManyCameras(n));
        }
        if rows.is_empty() {
            return Err(CamSelectError::NoPoints);
        }
        if !points.is_empty() && points.len() != rows.len() {
            return Err(CamSelectError::PointCountMismatch { got: points.len(), expected: rows.len() });
        }
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let rows = rows.into_iter().map(|r| r & mask).collect();
        Ok(Self { camera_ids, rows, points })
    }

    pub fn n_points(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cameras(&self) -> usize {
        self.camera_ids.len()
    }

    pub fn camera_ids(&self) -> &[usize] {
        &self.camera_ids
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn get(&self, point: usize, camera_col: usize) -> bool {
        self.rows[point] >> camera_col & 1 == 1
    }

    pub fn row_sum(&self, point: usize) -> u32 {
        self.rows[point].count_ones()
    }

    /// CSV with a header of camera ids and one 0/1 row per point.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.camera_ids.iter().map(|id| id.to_string())).expect("in-memory write");
        for k in 0..self.n_points() {
            w.write_record((0..self.n_cameras()).map(|n| if self.get(k, n) { "1" } else { "0" }))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
    }

    /// Parse the CSV form. The result carries no point coordinates.
    pub fn from_csv(text: &str) -> Result<Self, CamSelectError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let csv_err = |e: csv::Error| CamSelectError::Csv(e.to_string());
        let ids = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(|h| h.parse::<usize>().map_err(|_| CamSelectError::Csv(format!("bad camera id '{h}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|v| match v {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(CamSelectError::Csv(format!("row {k}: entry '{other}' is not 0 or 1"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(ids, rows, Vec::new())
    }

    fn subset(&self, keep: &[usize]) -> Self {
        Self {
            camera_ids: self.camera_ids.clone(),
            rows: keep.iter().map(|&k| self.rows[k]).collect(),
            points: if self.points.is_empty() { Vec::new() } else { keep.iter().map(|&k| self.points[k]).collect() },
        }
    }
}

/// Mark which cameras see each point: positive depth and a projection
/// inside the image.
pub fn build_visibility(cloud: &PointCloud, cameras: &[CameraModel]) -> Result<VisibilityMatrix, CamSelectError> {
    if cameras.len() < MIN_CAMERAS {
        return Err(CamSelectError::TooFewCameras(cameras.len()));
    }
    if cameras.len() > MAX_CAMERAS {
        return Err(CamSelectError::TooManyCameras(cameras.len()));
    }
    let rows = cloud
        .points
        .iter()
        .map(|p| {
            cameras.iter().enumerate().fold(0u64, |acc, (n, cam)| match project(p, cam) {
                Projection::Pixel { u, v } if cam.contains_pixel(u, v) => acc | 1 << n,
                _ => acc,
            })
        })
        .collect();
    VisibilityMatrix::from_bits(
        cameras.iter().map(|c| c.id).collect(),
        rows,
        cloud.points.iter().map(|p| p.coords()).collect(),
    )
}

/// Reduce the matrix to one representative row per k-means cluster of the
/// point coordinates, `k = ceil(fraction * points)`. The representative is
/// the member nearest its centroid (lowest index on ties); rows keep their
/// original order.
pub fn select_keypoints(matrix: &VisibilityMatrix, fraction: f64, seed: u64) -> Result<VisibilityMatrix, CamSelectError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CamSelectError::BadFraction(fraction));
    }
    if matrix.points.is_empty() {
        return Err(CamSelectError::NoGeometry);
    }
    let k = ((fraction * matrix.n_points() as f64).ceil() as usize).clamp(1, matrix.n_points());
    let clusters = kmeans(&matrix.points, k, seed)?;
    let mut reps: Vec<Option<(usize, f64)>> = vec![None; k];
    for (i, (p, &c)) in matrix.points.iter().zip(&clusters.assignment).enumerate() {
        let centroid = clusters.centroids[c];
        let d: f64 = p.iter().zip(&centroid).map(|(a, b)| (a - b) * (a - b)).sum();
        if reps[c].is_none_or(|(_, best)| d < best) {
            reps[c] = Some((i, d));
        }
    }
    let mut keep: Vec<usize> = reps.into_iter().map(|r| r.expect("every cluster has a member").0).collect();
    keep.sort_unstable();
    Ok(matrix.subset(&keep))
}

/// Best subset of a given size. Invariant: `objective == covered.count(true)`
/// and `covered[k]` iff at least two chosen cameras see point `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSolution {
    pub n_prime: usize,
    /// Chosen camera columns, ascending.
    pub chosen: Vec<usize>,
    /// Ids of the chosen cameras, in column order.
    pub camera_ids: Vec<usize>,
    pub objective: usize,
    pub covered: Vec<bool>,
    /// False when the greedy fallback produced the subset.
    pub exact: bool,
}

impl SelectionSolution {
    pub(crate) fn from_mask(matrix: &VisibilityMatrix, mask: u64, exact: bool) -> Self {
        let chosen: Vec<usize> = (0..matrix.n_cameras()).filter(|&n| mask >> n & 1 == 1).collect();
        let covered: Vec<bool> = matrix.rows.iter().map(|r| (r & mask).count_ones() >= 2).collect();
        Self {
            n_prime: chosen.len(),
            camera_ids: chosen.iter().map(|&n| matrix.camera_ids[n]).collect(),
            chosen,
            objective: covered.iter().filter(|&&c| c).count(),
            covered,
            exact,
        }
    }
}

/// `N' -> SelectionSolution` for every `N'` in `[3, N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraMap {
    pub n_cameras: usize,
    pub camera_ids: Vec<usize>,
    pub entries: Vec<SelectionSolution>,
}

impl CameraMap {
    pub fn get(&self, n_prime: usize) -> Option<&SelectionSolution> {
        n_prime.checked_sub(MIN_CAMERAS).and_then(|i| self.entries.get(i))
    }

    /// Objective of `π(N')` relative to `π(N)`, the camera factor of the
    /// quality surface.
    pub fn coverage_ratio(&self, n_prime: usize) -> Option<f64> {
        let full = self.get(self.n_cameras)?.objective;
        let part = self.get(n_prime)?.objective;
        Some(if full == 0 { 1.0 } else { part as f64 / full as f64 })
    }

    /// Trivial map where `π(N')` is the first `N'` camera ids. Useful when no
    /// visibility data is available.
    pub fn identity(camera_ids: Vec<usize>) -> Result<Self, CamSelectError> {
        let n = camera_ids.len();
        if n < MIN_CAMERAS {
            return Err(CamSelectError::TooFewCameras(n));
        }
        let entries = (MIN_CAMERAS..=n)
            .map(|np| SelectionSolution {
                n_prime: np,
                chosen: (0..np).collect(),
                camera_ids: camera_ids[..np].to_vec(),
                objective: 0,
                covered: Vec::new(),
                exact: false,
            })
            .collect();
        Ok(Self { n_cameras: n, camera_ids, entries })
    }
}
