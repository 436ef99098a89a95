//! Posed, renderable scene description.

use std::sync::Arc;

use crate::image::Texture;
use crate::model::eyeball::{EyeballGeometry, EyeballMaterial};
use crate::raster::subdiv::LoopStencils;
use crate::{Rot3, Vec3};

/// Which half of the eye region a part belongs to. `Left` is the part that
/// appears on the left of the image (negative camera x at zero rotation).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    /// Sign of the part's offset along the head x axis.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// Connectivity and texture coordinates shared by every pose of a surface.
#[derive(Clone, Debug)]
pub struct SurfaceTopology {
    pub triangles: Vec<[u32; 3]>,
    pub uvs: Vec<[f64; 2]>,
    pub refinement: Option<Refinement>,
}

/// Precomputed one-step Loop refinement of a [`SurfaceTopology`].
#[derive(Clone, Debug)]
pub struct Refinement {
    pub stencils: LoopStencils,
    pub uvs: Vec<[f64; 2]>,
}

impl SurfaceTopology {
    /// Builds topology and, when `refine` is set, the subdivision stencils.
    pub fn new(triangles: Vec<[u32; 3]>, uvs: Vec<[f64; 2]>, refine: bool) -> crate::Result<Self> {
        let refinement = if refine {
            let stencils = LoopStencils::build(uvs.len(), &triangles)?;
            let refined_uvs = stencils.apply(&uvs);
            Some(Refinement {
                stencils,
                uvs: refined_uvs,
            })
        } else {
            None
        };
        Ok(Self {
            triangles,
            uvs,
            refinement,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.uvs.len()
    }
}

/// A posed facial eye-region part in camera space (millimetres).
#[derive(Clone, Debug)]
pub struct FacePart {
    pub side: Side,
    pub positions: Vec<Vec3>,
    pub topology: Arc<SurfaceTopology>,
}

/// Posed eyelid margin points, used for eyeball ambient occlusion.
#[derive(Clone, Debug, Default)]
pub struct LidMargins {
    pub upper: Vec<Vec3>,
    pub lower: Vec<Vec3>,
}

/// A posed eyeball. Its local frame has the optical axis along `+z`.
#[derive(Clone, Debug)]
pub struct EyeballPart {
    pub side: Side,
    pub center: Vec3,
    /// Maps eyeball-local directions into camera space.
    pub orientation: Rot3,
    pub positions: Vec<Vec3>,
    pub triangles: Arc<Vec<[u32; 3]>>,
    pub geometry: EyeballGeometry,
    pub material: EyeballMaterial,
    pub lids: Option<LidMargins>,
}

impl EyeballPart {
    /// Unit gaze direction in camera space.
    pub fn gaze(&self) -> Vec3 {
        self.orientation * Vec3::z()
    }
}

/// Ambient plus one directional light.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lighting {
    pub ambient: [f64; 3],
    pub directional: [f64; 3],
    /// Unit vector pointing from the surface toward the light.
    pub direction: Vec3,
}

impl Lighting {
    pub fn ambient_only(ambient: [f64; 3]) -> Self {
        Self {
            ambient,
            directional: [0.0; 3],
            direction: Vec3::z(),
        }
    }

    /// Light direction from pitch (positive = from above) and yaw angles.
    pub fn direction_from_angles(pitch: f64, yaw: f64) -> Vec3 {
        Vec3::new(yaw.sin() * pitch.cos(), -pitch.sin(), yaw.cos() * pitch.cos())
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub faces: Vec<FacePart>,
    pub eyes: Vec<EyeballPart>,
    pub face_texture: Arc<Texture>,
    pub lighting: Lighting,
    /// Reflection map applied to eyeballs, if any.
    pub reflection: Option<usize>,
}

impl Scene {
    pub fn empty(face_texture: Arc<Texture>) -> Self {
        Self {
            faces: Vec::new(),
            eyes: Vec::new(),
            face_texture,
            lighting: Lighting::ambient_only([1.0; 3]),
            reflection: None,
        }
    }
}
