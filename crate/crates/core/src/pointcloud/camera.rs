use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Point3;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("camera {0}: focal length must be positive and finite")]
    BadFocal(usize),
    #[error("camera {0}: image size must be non-zero")]
    EmptyImage(usize),
    #[error("camera {id}: rotation is not orthonormal (max |RᵀR - I| = {deviation:e})")]
    NotOrthonormal { id: usize, deviation: f64 },
    #[error("camera {0}: non-finite pose or principal point")]
    NonFinite(usize),
}

/// Pinhole camera with a world-to-camera pose `x_cam = R·x_world + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera")]
pub struct CameraModel {
    pub id: usize,
    pub focal: f64,
    pub principal: [f64; 2],
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub width: usize,
    pub height: usize,
}

#[derive(Deserialize)]
struct RawCamera {
    id: usize,
    focal: f64,
    principal: [f64; 2],
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    width: usize,
    height: usize,
}

impl TryFrom<RawCamera> for CameraModel {
    type Error = CameraError;

    fn try_from(r: RawCamera) -> Result<Self, Self::Error> {
        CameraModel::new(r.id, r.focal, r.principal, r.rotation, r.translation, r.width, r.height)
    }
}

const ORTHONORMAL_TOL: f64 = 1e-6;

impl CameraModel {
    pub fn new(
        id: usize,
        focal: f64,
        principal: [f64; 2],
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(CameraError::BadFocal(id));
        }
        if width == 0 || height == 0 {
            return Err(CameraError::EmptyImage(id));
        }
        let finite = principal.iter().chain(translation.iter()).chain(rotation.iter().flatten());
        if !finite.into_iter().all(|v| v.is_finite()) {
            return Err(CameraError::NonFinite(id));
        }
        let mut deviation: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((dot - expected).abs());
            }
        }
        if deviation > ORTHONORMAL_TOL {
            return Err(CameraError::NotOrthonormal { id, deviation });
        }
        Ok(Self { id, focal, principal, rotation, translation, width, height })
    }

    /// Camera placed at `eye` looking at `target`, with world +z as the up hint.
    ///
    /// Camera axes follow the usual vision convention: +x right, +y down,
    /// +z forward.
    pub fn look_at(
        id: usize,
        eye: [f64; 3],
        target: [f64; 3],
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        let cross = |a: [f64; 3], b: [f64; 3]| {
            [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
        };
        let norm = |a: [f64; 3]| {
            let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            [a[0] / n, a[1] / n, a[2] / n]
        };
        let forward = norm(sub(target, eye));
        let mut up = [0.0, 0.0, 1.0];
        if cross(forward, up).iter().all(|c| c.abs() < 1e-12) {
            up = [0.0, 1.0, 0.0];
        }
        let right = norm(cross(forward, up));
        let down = cross(forward, right);
        let rotation = [right, down, forward];
        let translation = [
            -(rotation[0][0] * eye[0] + rotation[0][1] * eye[1] + rotation[0][2] * eye[2]),
            -(rotation[1][0] * eye[0] + rotation[1][1] * eye[1] + rotation[1][2] * eye[2]),
            -(rotation[2][0] * eye[0] + rotation[2][1] * eye[1] + rotation[2][2] * eye[2]),
        ];
        let principal = [width as f64 / 2.0, height as f64 / 2.0];
        Self::new(id, focal, principal, rotation, translation, width, height)
    }

    /// World point expressed in the camera frame.
    pub fn to_camera(&self, p: &Point3) -> [f64; 3] {
        let w = p.coords();
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0] * w[0] + r[0][1] * w[1] + r[0][2] * w[2] + t[0],
            r[1][0] * w[0] + r[1][1] * w[1] + r[1][2] * w[2] + t[1],
            r[2][0] * w[0] + r[2][1] * w[1] + r[2][2] * w[2] + t[2],
        ]
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> [f64; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        let mut c = [0.0; 3];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = -(r[0][i] * t[0] + r[1][i] * t[1] + r[2][i] * t[2]);
        }
        c
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64 },
    BehindCamera,
}

impl Projection {
    pub fn pixel(self) -> Option<(f64, f64)> {
        match self {
            Projection::Pixel { u, v } => Some((u, v)),
            Projection::BehindCamera => None,
        }
    }
}

/// Pinhole projection `u = f·x/z + cx`, `v = f·y/z + cy`. Points with camera
/// depth `z <= 0` are behind the camera.
pub fn project(point: &Point3, camera: &CameraModel) -> Projection {
    let [x, y, z] = camera.to_camera(point);
    if z <= 0.0 {
        return Projection::BehindCamera;
    }
    Projection::Pixel {
        u: camera.focal * x / z + camera.principal[0],
        v: camera.focal * y / z + camera.principal[1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const I3: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    fn identity_cam() -> CameraModel {
        CameraModel::new(1, 500.0, [320.0, 240.0], I3, [0.0; 3], 640, 480).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let p = project(&Point3::new(0.0, 0.0, 1.0), &identity_cam());
        assert_eq!(p, Projection::Pixel { u: 320.0, v: 240.0 });
    }

    #[test]
    fn hand_computed_offset() {
        // u = 500 * 0.1 / 1 + 320 = 370
        let p = project(&Point3::new(0.1, 0.0, 1.0), &identity_cam());
        let (u, v) = p.pixel().unwrap();
        assert!((u - 370.0).abs() < 1e-12);
        assert_eq!(v, 240.0);
    }

    #[test]
    fn non_positive_depth_is_behind() {
        let cam = identity_cam();
        assert_eq!(project(&Point3::new(0.0, 0.0, 0.0), &cam), Projection::BehindCamera);
        assert_eq!(project(&Point3::new(1.0, 2.0, -1.0), &cam), Projection::BehindCamera);
    }

    #[test]
    fn rejects_bad_cameras() {
        assert_eq!(
            CameraModel::new(3, 0.0, [0.0; 2], I3, [0.0; 3], 10, 10),
            Err(CameraError::BadFocal(3))
        );
        assert_eq!(
            CameraModel::new(3, 1.0, [0.0; 2], I3, [0.0; 3], 0, 10),
            Err(CameraError::EmptyImage(3))
        );
        let skew = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            CameraModel::new(3, 1.0, [0.0; 2], skew, [0.0; 3], 10, 10),
            Err(CameraError::NotOrthonormal { id: 3, .. })
        ));
    }

    #[test]
    fn look_at_centers_target() {
        let cam = CameraModel::look_at(2, [5.0, 0.0, 1.0], [0.0, 0.0, 1.0], 400.0, 640, 480).unwrap();
        let (u, v) = project(&Point3::new(0.0, 0.0, 1.0), &cam).pixel().unwrap();
        assert!((u - 320.0).abs() < 1e-9 && (v - 240.0).abs() < 1e-9);
        let c = cam.center();
        assert!((c[0] - 5.0).abs() < 1e-12 && c[1].abs() < 1e-12 && (c[2] - 1.0).abs() < 1e-12);
        // world +z is image-up, so a higher point has a smaller v
        let (_, v_up) = project(&Point3::new(0.0, 0.0, 2.0), &cam).pixel().unwrap();
        assert!(v_up < 240.0);
    }

    #[test]
    fn deserializes_with_validation() {
        let ok = r#"{"id":1,"focal":500,"principal":[320,240],
            "rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0],"width":640,"height":480}"#;
        let cam: CameraModel = serde_json::from_str(ok).unwrap();
        assert_eq!(cam, identity_cam());
        let bad = ok.replace("\"focal\":500", "\"focal\":-1");
        assert!(serde_json::from_str::<CameraModel>(&bad).is_err());
    }

    proptest! {
        #[test]
        fn sliding_along_ray_keeps_pixel(
            yaw in -3.0f64..3.0,
            ex in -5.0f64..5.0, ey in -5.0f64..5.0, ez in -2.0f64..2.0,
            px in -1.0f64..1.0, py in -1.0f64..1.0, pz in -1.0f64..1.0,
            s in 0.2f64..5.0,
        ) {
            let eye = [ex + 10.0 * yaw.cos(), ey + 10.0 * yaw.sin(), ez];
            let cam = CameraModel::look_at(1, eye, [px, py, pz], 450.0, 640, 480).unwrap();
            let p = Point3::new(px + 0.3, py - 0.2, pz + 0.1);
            let c = cam.center();
            let q = Point3::new(
                c[0] + s * (p.x - c[0]),
                c[1] + s * (p.y - c[1]),
                c[2] + s * (p.z - c[2]),
            );
            let (u0, v0) = project(&p, &cam).pixel().unwrap();
            let (u1, v1) = project(&q, &cam).pixel().unwrap();
            prop_assert!((u0 - u1).abs() < 1e-6 && (v0 - v1).abs() < 1e-6);
        }
    }
}
