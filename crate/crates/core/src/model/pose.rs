//! Posing: eyelids, eyeballs, global head transform and gaze inversion.

use std::sync::Arc;

use nalgebra::Unit;

use super::eyeball::build_eyeball;
use super::params::ParameterVector;
use super::scene::{EyeballPart, FacePart, LidMargins, Lighting, Scene, Side};
use super::{place_on_side, split_index, EyeRegionModel, FACE_VERTICES};
use crate::error::{Error, Result};
use crate::image::Texture;
use crate::{Rot3, Vec3};

/// Largest eyelid rotation accepted by [`EyeRegionModel::eyelid_pose`].
pub const LID_GUARD: f64 = 35.0 * std::f64::consts::PI / 180.0;

/// Gaze and eyelid angles in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GazeAngles {
    pub pitch: f64,
    pub yaw: f64,
    pub vergence: f64,
    pub lid: f64,
}

/// Head rotation from `(roll, pitch, yaw)` Euler angles: `Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn head_rotation(angles: &[f64; 3]) -> Rot3 {
    Rot3::from_euler_angles(angles[0], angles[1], angles[2])
}

/// Eyeball rotation relative to the head: `Rx(pitch) Ry(yaw)`.
///
/// The optical axis `+z` maps to `(sin y, -cos y sin p, cos y cos p)`, so
/// positive pitch looks up (toward `-y`, which is image-up) and positive
/// yaw looks toward `+x`.
pub fn eye_rotation(pitch: f64, yaw: f64) -> Rot3 {
    Rot3::from_axis_angle(&Vec3::x_axis(), pitch) * Rot3::from_axis_angle(&Vec3::y_axis(), yaw)
}

/// Per-eye yaw: `yaw + vergence/2` for the left eye, `yaw - vergence/2` for the right.
pub fn eye_yaw(side: Side, yaw: f64, vergence: f64) -> f64 {
    match side {
        Side::Left => yaw + 0.5 * vergence,
        Side::Right => yaw - 0.5 * vergence,
    }
}

/// Checks the parameters that would make posing ill-defined. Colour and
/// intensity ranges are not checked here so that finite-difference probes
/// may step slightly outside them.
pub fn check_poseable(phi: &ParameterVector) -> Result<()> {
    if let Some(i) = phi.to_array().iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: super::param_name(i),
            reason: "not finite".into(),
        });
    }
    if !(phi.iod > 0.0) {
        return Err(Error::InvalidParameter {
            name: "theta_iod",
            reason: format!("must be positive, got {}", phi.iod),
        });
    }
    if phi.lid.abs() > LID_GUARD {
        return Err(Error::InvalidParameter {
            name: "theta_lid",
            reason: format!("{} rad exceeds the {LID_GUARD} rad guard", phi.lid),
        });
    }
    Ok(())
}

/// Rigid transform from the part frame (left eyeball at `(-iod/2, 0, 0)`) to camera space.
#[derive(Clone, Copy, Debug)]
struct HeadTransform {
    rotation: Rot3,
    translation: Vec3,
    origin: Vec3,
}

impl HeadTransform {
    #[inline]
    fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation * (p - self.origin) + self.translation
    }
}

impl EyeRegionModel {
    fn head_transform(&self, phi: &ParameterVector) -> HeadTransform {
        HeadTransform {
            rotation: head_rotation(&phi.rotation),
            translation: Vec3::from(phi.translation),
            origin: self.head_origin(),
        }
    }

    /// Rotates eyelid vertices about the eye-corner axis by `weight * lid`.
    /// Positive `lid` raises the lids.
    pub fn eyelid_pose(&self, vertices: &mut [Vec3], lid: f64) -> Result<()> {
        if !(lid.abs() <= LID_GUARD) {
            return Err(Error::InvalidParameter {
                name: "theta_lid",
                reason: format!("{lid} rad exceeds the {LID_GUARD} rad guard"),
            });
        }
        if vertices.len() != FACE_VERTICES {
            return Err(Error::Count {
                what: "face-part vertices",
                expected: FACE_VERTICES,
                got: vertices.len(),
            });
        }
        if lid == 0.0 {
            return Ok(());
        }
        let rig = self.eyelid();
        let origin = vertices[rig.corners[0] as usize];
        let mut axis = vertices[rig.corners[1] as usize] - origin;
        if axis.x < 0.0 {
            axis = -axis;
        }
        let axis = Unit::new_normalize(axis);
        for (v, &w) in vertices.iter_mut().zip(&rig.weights) {
            if w != 0.0 {
                *v = origin + Rot3::from_axis_angle(&axis, w * lid) * (*v - origin);
            }
        }
        Ok(())
    }

    /// Left-part local vertices for `phi` after shape and eyelid posing.
    fn local_part(&self, phi: &ParameterVector) -> Result<Vec<Vec3>> {
        let mut local = self.shape_sample(&phi.shape)?;
        self.eyelid_pose(&mut local, phi.lid)?;
        Ok(local)
    }

    fn world_parts(&self, phi: &ParameterVector) -> Result<[Vec<Vec3>; 2]> {
        check_poseable(phi)?;
        let local = self.local_part(phi)?;
        let head = self.head_transform(phi);
        Ok(Side::BOTH.map(|side| {
            local
                .iter()
                .map(|&p| head.apply(place_on_side(p, side, phi.iod)))
                .collect()
        }))
    }

    /// Posed camera-space positions of all 458 face vertices (left part first).
    pub fn face_vertices(&self, phi: &ParameterVector) -> Result<Vec<Vec3>> {
        let [mut left, right] = self.world_parts(phi)?;
        left.extend(right);
        Ok(left)
    }

    /// Camera-space eyeball centres, left then right.
    pub fn eyeball_centers(&self, phi: &ParameterVector) -> [Vec3; 2] {
        let head = self.head_transform(phi);
        Side::BOTH.map(|side| head.apply(place_on_side(Vec3::zeros(), side, phi.iod)))
    }

    /// Camera-space eyeball orientations, left then right.
    pub fn eyeball_orientations(&self, phi: &ParameterVector) -> [Rot3; 2] {
        let head = head_rotation(&phi.rotation);
        Side::BOTH.map(|side| head * eye_rotation(phi.pitch, eye_yaw(side, phi.yaw, phi.vergence)))
    }

    /// Camera-space 3D landmarks.
    pub fn landmarks_3d(&self, phi: &ParameterVector) -> Result<Vec<Vec3>> {
        let verts = self.face_vertices(phi)?;
        Ok(self.landmark_map().iter().map(|row| row.iter().map(|&(i, w)| verts[i as usize] * w).sum()).collect())
    }

    /// Landmarks of the mean shape at rest in the head frame. Their mean is
    /// the origin for the default interocular distance.
    pub fn rest_landmarks(&self) -> Vec<Vec3> {
        let origin = self.head_origin();
        self.landmark_map()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&(idx, w)| {
                        let (side, local) = split_index(idx as usize);
                        (place_on_side(self.mean_shape()[local], side, super::params::DEFAULT_IOD) - origin) * w
                    })
                    .sum()
            })
            .collect()
    }

    /// Builds the four posed parts. `face_texture` must be the texture for
    /// `phi.texture`; it is passed in so callers can cache it.
    pub fn pose_scene(&self, phi: &ParameterVector, face_texture: Arc<Texture>) -> Result<Scene> {
        let parts = self.world_parts(phi)?;
        let geometry = *self.eyeball_geometry();
        let eyeball = build_eyeball(
            self.eyeball_mesh(),
            self.eye_texture(),
            &geometry,
            phi.iris_scale,
            phi.iris_color,
            phi.sclera_tint,
        )?;
        let centers = self.eyeball_centers(phi);
        let orientations = self.eyeball_orientations(phi);
        let rig = self.eyelid();
        let mut faces = Vec::with_capacity(2);
        let mut eyes = Vec::with_capacity(2);
        for (side, positions) in Side::BOTH.into_iter().zip(parts) {
            let i = side.index();
            let lids = LidMargins {
                upper: rig.upper_margin.iter().map(|&k| positions[k as usize]).collect(),
                lower: rig.lower_margin.iter().map(|&k| positions[k as usize]).collect(),
            };
            eyes.push(EyeballPart {
                side,
                center: centers[i],
                orientation: orientations[i],
                positions: eyeball.mesh.positions.iter().map(|p| centers[i] + orientations[i] * p).collect(),
                triangles: Arc::clone(&eyeball.mesh.triangles),
                geometry,
                material: eyeball.material.clone(),
                lids: Some(lids),
            });
            faces.push(FacePart {
                side,
                positions,
                topology: Arc::clone(self.topology(side)),
            });
        }
        Ok(Scene {
            faces,
            eyes,
            face_texture,
            lighting: Lighting {
                ambient: phi.ambient,
                directional: phi.directional,
                direction: Lighting::direction_from_angles(phi.light_angles[0], phi.light_angles[1]),
            },
            reflection: None,
        })
    }

    /// Gaze angles that aim both optical axes at `target` (camera space, mm).
    ///
    /// Pitch is shared by both eyes because their centres differ only along
    /// the head x axis. The eyelid angle is set equal to the pitch.
    pub fn gaze_from_target(&self, phi: &ParameterVector, target: Vec3) -> Result<GazeAngles> {
        let head = head_rotation(&phi.rotation);
        let centers = self.eyeball_centers(phi);
        let radius = self.eyeball_geometry().sclera_radius;
        let mut yaws = [0.0; 2];
        let mut pitch = 0.0;
        for (i, c) in centers.iter().enumerate() {
            let d = head.inverse() * (target - c);
            let len = d.norm();
            if !(len > radius) {
                return Err(Error::TargetInsideEyeball);
            }
            yaws[i] = (d.x / len).clamp(-1.0, 1.0).asin();
            if i == 0 {
                pitch = (-d.y).atan2(d.z);
            }
        }
        Ok(GazeAngles {
            pitch,
            yaw: 0.5 * (yaws[0] + yaws[1]),
            vergence: yaws[0] - yaws[1],
            lid: pitch,
        })
    }
}
