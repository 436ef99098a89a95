//! The flattened model parameter vector.
//!
//! Layout of the 50 scalars, in order:
//!
//! | range   | field         | meaning                                   |
//! |---------|---------------|-------------------------------------------|
//! | 0..16   | `shape`       | face shape PCA coefficients (1 = 1 sd)    |
//! | 16      | `iris_scale`  | iris size scale                           |
//! | 17..25  | `texture`     | face texture PCA coefficients (1 = 1 sd)  |
//! | 25..28  | `iris_color`  | iris RGB multiplier                       |
//! | 28..31  | `sclera_tint` | sclera RGB tint                           |
//! | 31..34  | `rotation`    | head Euler angles (roll, pitch, yaw), rad |
//! | 34..37  | `translation` | head translation, mm                      |
//! | 37      | `iod`         | interocular distance, mm                  |
//! | 38      | `pitch`       | gaze pitch, rad (positive looks up)       |
//! | 39      | `yaw`         | gaze yaw, rad (positive looks toward +x)  |
//! | 40      | `vergence`    | vergence, rad (positive converges)        |
//! | 41      | `lid`         | eyelid pitch, rad                         |
//! | 42..45  | `ambient`     | ambient RGB intensity                     |
//! | 45..48  | `directional` | directional RGB intensity                 |
//! | 48..50  | `light_angles`| light pitch and yaw, rad                  |
//!
//! Illumination contributes 3 + 3 + 2 = 8 scalars.

use std::ops::Range;

use crate::error::{Error, Result};

pub const SHAPE_MODES: usize = 16;
pub const TEXTURE_MODES: usize = 8;
pub const PARAM_COUNT: usize = 50;

/// Index constants into the flattened vector.
pub mod index {
    use std::ops::Range;

    pub const SHAPE: Range<usize> = 0..16;
    pub const IRIS_SCALE: usize = 16;
    pub const TEXTURE: Range<usize> = 17..25;
    pub const IRIS_COLOR: Range<usize> = 25..28;
    pub const SCLERA_TINT: Range<usize> = 28..31;
    pub const ROTATION: Range<usize> = 31..34;
    pub const TRANSLATION: Range<usize> = 34..37;
    pub const IOD: usize = 37;
    pub const PITCH: usize = 38;
    pub const YAW: usize = 39;
    pub const VERGENCE: usize = 40;
    pub const LID: usize = 41;
    pub const AMBIENT: Range<usize> = 42..45;
    pub const DIRECTIONAL: Range<usize> = 45..48;
    pub const LIGHT_ANGLES: Range<usize> = 48..50;
}

/// Coarse parameter families; finite-difference step sizes are set per group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Pca,
    IrisScale,
    Color,
    Angle,
    /// Eye rotation and eyelid angles.
    Gaze,
    Translation,
    Distance,
    Intensity,
}

const NAMES: [&str; PARAM_COUNT] = [
    "beta_face[0]",
    "beta_face[1]",
    "beta_face[2]",
    "beta_face[3]",
    "beta_face[4]",
    "beta_face[5]",
    "beta_face[6]",
    "beta_face[7]",
    "beta_face[8]",
    "beta_face[9]",
    "beta_face[10]",
    "beta_face[11]",
    "beta_face[12]",
    "beta_face[13]",
    "beta_face[14]",
    "beta_face[15]",
    "beta_iris",
    "tau_face[0]",
    "tau_face[1]",
    "tau_face[2]",
    "tau_face[3]",
    "tau_face[4]",
    "tau_face[5]",
    "tau_face[6]",
    "tau_face[7]",
    "tau_iris[r]",
    "tau_iris[g]",
    "tau_iris[b]",
    "tau_tint[r]",
    "tau_tint[g]",
    "tau_tint[b]",
    "theta_R[x]",
    "theta_R[y]",
    "theta_R[z]",
    "theta_T[x]",
    "theta_T[y]",
    "theta_T[z]",
    "theta_iod",
    "theta_p",
    "theta_y",
    "theta_v",
    "theta_lid",
    "iota_amb[r]",
    "iota_amb[g]",
    "iota_amb[b]",
    "iota_dir[r]",
    "iota_dir[g]",
    "iota_dir[b]",
    "iota_rot[pitch]",
    "iota_rot[yaw]",
];

/// Human readable name of flattened parameter `i`.
pub fn param_name(i: usize) -> &'static str {
    NAMES.get(i).copied().unwrap_or("out-of-range")
}

pub fn param_group(i: usize) -> ParamGroup {
    use index::*;
    match i {
        i if SHAPE.contains(&i) || TEXTURE.contains(&i) => ParamGroup::Pca,
        IRIS_SCALE => ParamGroup::IrisScale,
        i if IRIS_COLOR.contains(&i) || SCLERA_TINT.contains(&i) => ParamGroup::Color,
        i if ROTATION.contains(&i) || LIGHT_ANGLES.contains(&i) => ParamGroup::Angle,
        PITCH | YAW | VERGENCE | LID => ParamGroup::Gaze,
        i if TRANSLATION.contains(&i) => ParamGroup::Translation,
        IOD => ParamGroup::Distance,
        _ => ParamGroup::Intensity,
    }
}

/// Model parameters: shape, texture, pose and illumination.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    pub shape: [f64; SHAPE_MODES],
    pub iris_scale: f64,
    pub texture: [f64; TEXTURE_MODES],
    pub iris_color: [f64; 3],
    pub sclera_tint: [f64; 3],
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
    pub iod: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub vergence: f64,
    pub lid: f64,
    pub ambient: [f64; 3],
    pub directional: [f64; 3],
    pub light_angles: [f64; 2],
}

/// Average adult interocular distance in millimetres.
pub const DEFAULT_IOD: f64 = 63.0;
pub const DEFAULT_AMBIENT: f64 = 0.6;
pub const DEFAULT_DIRECTIONAL: f64 = 0.4;

impl Default for ParameterVector {
    /// Neutral parameters: mean shape and texture, neutral colours, frontal
    /// gaze, anthropometric interocular distance and the default lighting.
    fn default() -> Self {
        Self {
            shape: [0.0; SHAPE_MODES],
            iris_scale: 1.0,
            texture: [0.0; TEXTURE_MODES],
            iris_color: [1.0; 3],
            sclera_tint: [1.0; 3],
            rotation: [0.0; 3],
            translation: [0.0; 3],
            iod: DEFAULT_IOD,
            pitch: 0.0,
            yaw: 0.0,
            vergence: 0.0,
            lid: 0.0,
            ambient: [DEFAULT_AMBIENT; 3],
            directional: [DEFAULT_DIRECTIONAL; 3],
            light_angles: [0.0; 2],
        }
    }
}

fn put(out: &mut [f64], range: Range<usize>, values: &[f64]) {
    out[range].copy_from_slice(values);
}

fn take<const N: usize>(src: &[f64], range: Range<usize>) -> [f64; N] {
    let mut out = [0.0; N];
    out.copy_from_slice(&src[range]);
    out
}

impl ParameterVector {
    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        use index::*;
        let mut out = [0.0; PARAM_COUNT];
        put(&mut out, SHAPE, &self.shape);
        out[IRIS_SCALE] = self.iris_scale;
        put(&mut out, TEXTURE, &self.texture);
        put(&mut out, IRIS_COLOR, &self.iris_color);
        put(&mut out, SCLERA_TINT, &self.sclera_tint);
        put(&mut out, ROTATION, &self.rotation);
        put(&mut out, TRANSLATION, &self.translation);
        out[IOD] = self.iod;
        out[PITCH] = self.pitch;
        out[YAW] = self.yaw;
        out[VERGENCE] = self.vergence;
        out[LID] = self.lid;
        put(&mut out, AMBIENT, &self.ambient);
        put(&mut out, DIRECTIONAL, &self.directional);
        put(&mut out, LIGHT_ANGLES, &self.light_angles);
        out
    }

    /// Rebuilds a parameter vector from its flattened form without validation.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        use index::*;
        if values.len() != PARAM_COUNT {
            return Err(Error::Count {
                what: "parameters",
                expected: PARAM_COUNT,
                got: values.len(),
            });
        }
        Ok(Self {
            shape: take(values, SHAPE),
            iris_scale: values[IRIS_SCALE],
            texture: take(values, TEXTURE),
            iris_color: take(values, IRIS_COLOR),
            sclera_tint: take(values, SCLERA_TINT),
            rotation: take(values, ROTATION),
            translation: take(values, TRANSLATION),
            iod: values[IOD],
            pitch: values[PITCH],
            yaw: values[YAW],
            vergence: values[VERGENCE],
            lid: values[LID],
            ambient: take(values, AMBIENT),
            directional: take(values, DIRECTIONAL),
            light_angles: take(values, LIGHT_ANGLES),
        })
    }

    /// Checks the value-range invariants.
    pub fn validate(&self) -> Result<()> {
        let arr = self.to_array();
        if let Some(i) = arr.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: param_name(i),
                reason: "not finite".into(),
            });
        }
        if self.iod <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "theta_iod",
                reason: format!("must be positive, got {}", self.iod),
            });
        }
        if self.iris_scale <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "beta_iris",
                reason: format!("must be positive, got {}", self.iris_scale),
            });
        }
        for (name, rgb) in [("tau_iris", &self.iris_color), ("tau_tint", &self.sclera_tint)] {
            if rgb.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("components must lie in [0, 1], got {rgb:?}"),
                });
            }
        }
        for (name, rgb) in [("iota_amb", &self.ambient), ("iota_dir", &self.directional)] {
            if rgb.iter().any(|c| *c < 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("intensities must be non-negative, got {rgb:?}"),
                });
            }
        }
        Ok(())
    }

    /// Projects onto the valid box (colours into `[0, 1]`, intensities
    /// non-negative, positive scales). Used after optimizer steps.
    pub fn clamp_to_valid(&mut self) {
        for c in self.iris_color.iter_mut().chain(self.sclera_tint.iter_mut()) {
            *c = c.clamp(0.0, 1.0);
        }
        for c in self.ambient.iter_mut().chain(self.directional.iter_mut()) {
            *c = c.max(0.0);
        }
        self.iod = self.iod.max(1.0);
        // Margins keep finite-difference probes inside the posing guards.
        self.iris_scale = self.iris_scale.clamp(0.55, 1.95);
        let lid_limit = 34f64.to_radians();
        self.lid = self.lid.clamp(-lid_limit, lid_limit);
    }

    /// True when only the gaze and eyelid fields differ from `other`.
    pub fn differs_only_in_gaze(&self, other: &Self) -> bool {
        let a = self.to_array();
        let b = other.to_array();
        (0..PARAM_COUNT)
            .filter(|i| !matches!(*i, index::PITCH | index::YAW | index::VERGENCE | index::LID))
            .all(|i| a[i].to_bits() == b[i].to_bits())
    }
}

/// Subset of the 50 parameters that an optimizer is allowed to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamMask(u64);

impl ParamMask {
    pub fn all() -> Self {
        Self((1u64 << PARAM_COUNT) - 1)
    }

    pub fn none() -> Self {
        Self(0)
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = 0u64;
        for i in indices {
            assert!(i < PARAM_COUNT, "parameter index {i} out of range");
            m |= 1 << i;
        }
        Self(m)
    }

    /// Pose, gaze and eyelid only: the per-frame mask used when tracking video
    /// after the first frame.
    pub fn video() -> Self {
        use index::*;
        Self::from_indices(
            ROTATION
                .chain(TRANSLATION)
                .chain([IOD, PITCH, YAW, VERGENCE, LID]),
        )
    }

    pub fn contains(&self, i: usize) -> bool {
        i < PARAM_COUNT && self.0 & (1 << i) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..PARAM_COUNT).filter(|i| self.contains(*i)).collect()
    }

    pub fn bits(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_every_slot_once() {
        use index::*;
        let mut seen = [0u8; PARAM_COUNT];
        let singles = [IRIS_SCALE, IOD, PITCH, YAW, VERGENCE, LID];
        for r in [
            SHAPE,
            TEXTURE,
            IRIS_COLOR,
            SCLERA_TINT,
            ROTATION,
            TRANSLATION,
            AMBIENT,
            DIRECTIONAL,
            LIGHT_ANGLES,
        ] {
            for i in r {
                seen[i] += 1;
            }
        }
        for i in singles {
            seen[i] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        // Group sizes: shape 17, texture 14, pose 11, illumination 8.
        assert_eq!(SHAPE.len() + 1, 17);
        assert_eq!(TEXTURE.len() + IRIS_COLOR.len() + SCLERA_TINT.len(), 14);
        assert_eq!(ROTATION.len() + TRANSLATION.len() + 5, 11);
        assert_eq!(AMBIENT.len() + DIRECTIONAL.len() + LIGHT_ANGLES.len(), 8);
    }

    #[test]
    fn flatten_round_trip() {
        let mut p = ParameterVector::default();
        p.shape[3] = 0.25;
        p.texture[7] = -1.5;
        p.light_angles = [0.1, -0.2];
        p.vergence = 0.03;
        let back = ParameterVector::from_slice(&p.to_array()).unwrap();
        assert_eq!(p, back);
        assert!(ParameterVector::from_slice(&[0.0; 51]).is_err());
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let mut p = ParameterVector::default();
        assert!(p.validate().is_ok());
        p.iod = 0.0;
        assert!(p.validate().is_err());
        let mut p = ParameterVector::default();
        p.iris_color[1] = 1.2;
        assert!(p.validate().is_err());
        let mut p = ParameterVector::default();
        p.ambient[0] = -0.1;
        assert!(p.validate().is_err());
        let mut p = ParameterVector::default();
        p.iris_scale = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn masks() {
        assert_eq!(ParamMask::all().len(), PARAM_COUNT);
        let v = ParamMask::video();
        assert!(v.contains(index::PITCH));
        assert!(!v.contains(index::SHAPE.start));
        assert!(!v.contains(index::AMBIENT.start));
        assert_eq!(v.len(), 11);
    }

    #[test]
    fn names_and_groups() {
        assert_eq!(param_name(index::LID), "theta_lid");
        assert_eq!(param_group(index::LID), ParamGroup::Gaze);
        assert_eq!(param_group(index::ROTATION.start), ParamGroup::Angle);
        assert_eq!(param_group(3), ParamGroup::Pca);
        assert_eq!(param_group(index::TRANSLATION.start), ParamGroup::Translation);
        assert_eq!(param_group(index::AMBIENT.start + 1), ParamGroup::Intensity);
    }
}
