use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{camera_factor, BackEnd, ScenarioModel, SimError, Stages};
use crate::camselect::{build_camera_map, build_visibility, CameraMap, VisibilityMatrix};
use crate::pointcloud::{CameraModel, CloudLabel, Point3, PointCloud};

/// Synthetic capture rig: cameras on a ring looking at the origin, points
/// scattered over a disc on the ground. Points far from the centre fall
/// outside some cameras' view, so dropping cameras loses coverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigParams {
    pub n_points: usize,
    /// Radius of the point disc.
    pub spread: f64,
    pub ring_radius: f64,
    pub ring_height: f64,
    pub focal: f64,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

/// Everything a scenario file holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub name: String,
    pub n_cameras: usize,
    pub t0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub q_max: f64,
    pub gamma: f64,
    pub stages: Stages,
    pub back_end: BackEnd,
    pub rig: RigParams,
}

impl ScenarioParams {
    /// Seven-camera preset. Exponents come from the least-squares fits of the
    /// reference latency and online F-score measurements; stage proportions
    /// from the measured optimized critical path.
    pub fn dance1() -> Self {
        Self {
            name: "dance1".into(),
            n_cameras: 7,
            t0: 11.98,
            alpha: 2.0636,
            beta: 1.5533,
            eta: super::DEFAULT_ETA,
            q_max: 0.9224,
            gamma: 0.3082,
            stages: Stages { sfm: 2.94, split: 0.13, mvs_fg: 8.78, merge: 0.13 },
            back_end: BackEnd { bg_subtraction: 0.3, golden_sfm: 2.56, evaluation: 0.2, t_bg: 22.0, transfer_delay: 0.05 },
            rig: RigParams {
                n_points: 400,
                spread: 4.0,
                ring_radius: 6.0,
                ring_height: 1.5,
                focal: 800.0,
                width: 640,
                height: 480,
                seed: 7,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    pub cameras: Vec<CameraModel>,
    pub cloud: PointCloud,
    pub visibility: VisibilityMatrix,
}

pub fn synthetic_rig(n_cameras: usize, p: &RigParams) -> Result<Rig, SimError> {
    let cameras = (0..n_cameras)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n_cameras as f64;
            let eye = [p.ring_radius * a.cos(), p.ring_radius * a.sin(), p.ring_height];
            CameraModel::look_at(i, eye, [0.0, 0.0, 0.0], p.focal, p.width, p.height)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SimError::BadModel(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let points = (0..p.n_points)
        .map(|_| {
            let rad = p.spread * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            Point3::new(rad * a.cos(), rad * a.sin(), rng.random_range(0.0..0.5))
        })
        .collect();
    let cloud = PointCloud::new(points, CloudLabel::Full);
    let visibility = build_visibility(&cloud, &cameras)?;
    Ok(Rig { cameras, cloud, visibility })
}

/// Parameters plus the derived camera map and latency/quality model.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub camera_map: CameraMap,
    pub model: ScenarioModel,
}

impl Scenario {
    pub fn from_params(params: ScenarioParams) -> Result<Self, SimError> {
        let rig = synthetic_rig(params.n_cameras, &params.rig)?;
        let camera_map = build_camera_map(&rig.visibility)?;
        let model = ScenarioModel {
            n_cameras: params.n_cameras,
            t0: params.t0,
            alpha: params.alpha,
            beta: params.beta,
            eta: params.eta,
            q_max: params.q_max,
            gamma: params.gamma,
            camera_factor: camera_factor(&camera_map),
            stages: params.stages,
            back_end: params.back_end,
        };
        model.validate()?;
        Ok(Self { params, camera_map, model })
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let params: ScenarioParams = serde_json::from_str(text).map_err(|e| SimError::BadModel(e.to_string()))?;
        Self::from_params(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_factor_strictly_increases() {
        let s = Scenario::from_params(ScenarioParams::dance1()).unwrap();
        let h = &s.model.camera_factor;
        assert_eq!(h.len(), 5);
        assert_eq!(*h.last().unwrap(), 1.0);
        assert!(h.windows(2).all(|w| w[0] < w[1]), "{h:?}");
    }

    #[test]
    fn params_round_trip_json() {
        let p = ScenarioParams::dance1();
        let s = Scenario::from_json(&serde_json::to_string_pretty(&p).unwrap()).unwrap();
        assert_eq!(s.params, p);
    }

    #[test]
    fn shipped_scenario_file_matches_preset() {
        let text = include_str!("../../../../scenarios/dance1.json");
        assert_eq!(Scenario::from_json(text).unwrap().params, ScenarioParams::dance1());
    }
}
