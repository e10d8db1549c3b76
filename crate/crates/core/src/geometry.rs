//! Camera model, Euler-angle conventions and Manhattan frame comparison.
//!
//! Conventions used throughout the crate:
//!
//! * Image coordinates have their origin at the top-left corner with `x` to the
//!   right and `y` down. The principal point sits at `(width / 2, height / 2)`.
//! * The camera frame is `x` right, `y` down, `z` along the optical axis.
//! * The world frame is aligned with the Manhattan structure of the scene. Its
//!   `y` axis is the scene vertical (pointing down, so that the identity
//!   rotation is an upright camera), `x` and `z` are the two horizontal axes.
//! * A rotation maps world directions into the camera frame, so an image point
//!   is `x̃ = K·R·X`.
//!
//! Euler angles are extrinsic: pan about the world vertical, then tilt about
//! the camera `x` axis, then roll about the optical axis:
//!
//! ```text
//! R = Rz(roll) · Rx(tilt) · Ry(pan)
//! ```
//!
//! with the usual right-handed elementary rotations. Pan only moves the
//! horizontal vanishing points; roll and tilt are unchanged by a 90° pan, which
//! is what makes them well defined under the Manhattan pan ambiguity.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column of `R` holding the scene vertical.
pub const VERTICAL_AXIS: usize = 1;

/// Threshold on the third coordinate of a unit-normalised homogeneous
/// vanishing point below which it is treated as a direction at infinity.
pub const AT_INFINITY_EPS: f64 = 1e-12;

/// Horizontal field of view in degrees to focal length in pixels.
pub fn fov_to_focal(hfov_deg: f64, width: f64) -> Result<f64> {
    if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
        return Err(Error::FovOutOfRange(hfov_deg));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidIntrinsics(format!("width {width} must be positive")));
    }
    Ok(width / (2.0 * (hfov_deg.to_radians() / 2.0).tan()))
}

/// Focal length in pixels to horizontal field of view in degrees.
pub fn focal_to_fov(focal_px: f64, width: f64) -> Result<f64> {
    if !(focal_px > 0.0 && focal_px.is_finite()) {
        return Err(Error::InvalidIntrinsics(format!("focal length {focal_px} must be positive")));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidIntrinsics(format!("width {width} must be positive")));
    }
    Ok((2.0 * (width / (2.0 * focal_px)).atan()).to_degrees())
}

/// Pinhole intrinsics with square pixels, zero skew and a central principal
/// point. The focal length is the only free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub focal_px: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(focal_px: f64, width: u32, height: u32) -> Result<Self> {
        let intrinsics = Self { focal_px, width, height };
        intrinsics.validate()?;
        Ok(intrinsics)
    }

    pub fn from_fov(hfov_deg: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(fov_to_focal(hfov_deg, width as f64)?, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal length {} must be positive",
                self.focal_px
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidIntrinsics(format!(
                "image size {}x{} must be positive",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn hfov_deg(&self) -> f64 {
        (2.0 * (self.width as f64 / (2.0 * self.focal_px)).atan()).to_degrees()
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    /// The 3×3 calibration matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        let (cx, cy) = self.principal_point();
        let f = self.focal_px;
        Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let (cx, cy) = self.principal_point();
        let g = 1.0 / self.focal_px;
        Matrix3::new(g, 0.0, -cx * g, 0.0, g, -cy * g, 0.0, 0.0, 1.0)
    }

    /// Back-projects a pixel to an (unnormalised) camera-frame ray `K⁻¹·(x, y, 1)`.
    pub fn back_project(&self, x: f64, y: f64) -> Vector3<f64> {
        let (cx, cy) = self.principal_point();
        Vector3::new((x - cx) / self.focal_px, (y - cy) / self.focal_px, 1.0)
    }

    /// Projects a camera-frame point. `None` when it is not in front of the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        let (cx, cy) = self.principal_point();
        Some((self.focal_px * p.x / p.z + cx, self.focal_px * p.y / p.z + cy))
    }
}

/// Camera orientation as pan/roll/tilt in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub pan: f64,
    pub roll: f64,
    pub tilt: f64,
}

impl EulerAngles {
    pub fn new(pan: f64, roll: f64, tilt: f64) -> Self {
        Self { pan, roll, tilt }
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// A proper rotation mapping world directions into the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix, checking orthonormality and `det = +1` to `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        let r = Self(m);
        if !r.is_valid(tol) {
            return Err(Error::InvalidConfig("matrix is not a proper rotation".into()));
        }
        Ok(r)
    }

    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn from_euler(angles: &EulerAngles) -> Self {
        Self(
            rot_z(angles.roll.to_radians())
                * rot_x(angles.tilt.to_radians())
                * rot_y(angles.pan.to_radians()),
        )
    }

    /// Inverse of [`Rotation::from_euler`]. Exact away from `|tilt| = 90°`.
    pub fn to_euler(&self) -> EulerAngles {
        let m = &self.0;
        // Row 2 of Rz·Rx·Ry is [-cos(t)sin(p), sin(t), cos(t)cos(p)], and column 1
        // is [-sin(r)cos(t), cos(r)cos(t), sin(t)].
        let tilt = m[(2, 1)].clamp(-1.0, 1.0).asin();
        let pan = (-m[(2, 0)]).atan2(m[(2, 2)]);
        let roll = (-m[(0, 1)]).atan2(m[(1, 1)]);
        EulerAngles { pan: pan.to_degrees(), roll: roll.to_degrees(), tilt: tilt.to_degrees() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vector3<f64> {
        self.0.column(i).into_owned()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Self(self.0 * other.0)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let gram = self.0.transpose() * self.0;
        let identity = Matrix3::<f64>::identity();
        gram.iter().zip(identity.iter()).all(|(a, b)| (a - b).abs() <= tol)
            && (self.0.determinant() - 1.0).abs() <= tol
    }

    /// Rotation angle in degrees, in `[0, 180]`.
    pub fn angle_deg(&self) -> f64 {
        rotation_angle(&self.0).to_degrees()
    }
}

/// Angle of a rotation matrix via `atan2(sin, cos)`, accurate near 0 and π.
fn rotation_angle(m: &Matrix3<f64>) -> f64 {
    let cos = (m.trace() - 1.0) / 2.0;
    let axis = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = axis.norm() / 2.0;
    sin.atan2(cos)
}

/// The unknowns: focal length (through the intrinsics) and camera rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub intrinsics: Intrinsics,
    pub rotation: Rotation,
}

impl CameraParams {
    pub fn new(intrinsics: Intrinsics, rotation: Rotation) -> Self {
        Self { intrinsics, rotation }
    }

    pub fn from_euler(angles: &EulerAngles, hfov_deg: f64, width: u32, height: u32) -> Result<Self> {
        Ok(Self {
            intrinsics: Intrinsics::from_fov(hfov_deg, width, height)?,
            rotation: Rotation::from_euler(angles),
        })
    }

    pub fn euler(&self) -> EulerAngles {
        self.rotation.to_euler()
    }

    pub fn hfov_deg(&self) -> f64 {
        self.intrinsics.hfov_deg()
    }
}

/// A hypothesised vanishing point carried both as a homogeneous image point
/// and as the 3-D direction it is the image of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanishingPoint {
    /// Homogeneous image point, scaled to unit norm.
    pub homogeneous: Vector3<f64>,
    /// Unit camera-frame direction.
    pub direction: Vector3<f64>,
    pub at_infinity: bool,
}

impl VanishingPoint {
    /// Builds a vanishing point from any non-zero homogeneous representative.
    pub fn from_homogeneous(v: Vector3<f64>, intrinsics: &Intrinsics) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::DegenerateVanishingPoint);
        }
        let homogeneous = v / n;
        let direction = (intrinsics.inverse_matrix() * homogeneous).normalize();
        Ok(Self { homogeneous, direction, at_infinity: homogeneous.z.abs() < AT_INFINITY_EPS })
    }

    /// Builds a vanishing point from a camera-frame direction.
    pub fn from_direction(d: Vector3<f64>, intrinsics: &Intrinsics) -> Self {
        let direction = d.normalize();
        let homogeneous = (intrinsics.matrix() * direction).normalize();
        Self { homogeneous, direction, at_infinity: homogeneous.z.abs() < AT_INFINITY_EPS }
    }

    /// Inhomogeneous image position, `None` when at infinity.
    pub fn point(&self) -> Option<(f64, f64)> {
        (!self.at_infinity)
            .then(|| (self.homogeneous.x / self.homogeneous.z, self.homogeneous.y / self.homogeneous.z))
    }
}

/// The three Manhattan vanishing points `K·R_i`, indexed by column of `R`.
pub fn vanishing_points(params: &CameraParams) -> [VanishingPoint; 3] {
    let k = params.intrinsics.matrix();
    std::array::from_fn(|i| {
        let direction = params.rotation.column(i);
        let raw = k * direction;
        let homogeneous = raw / raw.norm();
        VanishingPoint { homogeneous, direction, at_infinity: homogeneous.z.abs() < AT_INFINITY_EPS }
    })
}

/// Which relabellings of the world axes count as the same Manhattan frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryGroup {
    /// The 8 proper signed permutations that keep the vertical axis vertical.
    #[default]
    Gravity,
    /// All 24 proper signed permutations (rotations of the cube).
    Cube,
}

impl SymmetryGroup {
    pub fn elements(&self) -> Vec<Matrix3<f64>> {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::new();
        for perm in perms {
            for signs in 0..8u32 {
                let mut m = Matrix3::zeros();
                for (row, &col) in perm.iter().enumerate() {
                    m[(row, col)] = if signs & (1 << row) != 0 { -1.0 } else { 1.0 };
                }
                if m.determinant() < 0.0 {
                    continue;
                }
                if *self == SymmetryGroup::Gravity && m[(VERTICAL_AXIS, VERTICAL_AXIS)] == 0.0 {
                    continue;
                }
                out.push(m);
            }
        }
        out
    }
}

/// Angle in degrees of the smallest rotation aligning two Manhattan frames,
/// minimised over the gravity-preserving symmetry group.
pub fn frame_angle_error(estimated: &Rotation, truth: &Rotation) -> f64 {
    frame_angle_error_with(estimated, truth, SymmetryGroup::Gravity)
}

pub fn frame_angle_error_with(estimated: &Rotation, truth: &Rotation, group: SymmetryGroup) -> f64 {
    let est = estimated.matrix();
    let gt_t = truth.matrix().transpose();
    group
        .elements()
        .iter()
        .map(|s| rotation_angle(&(est * s * gt_t)))
        .fold(f64::INFINITY, f64::min)
        .to_degrees()
}
