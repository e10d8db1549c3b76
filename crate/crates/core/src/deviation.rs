//! Deviation measures between a line segment and a hypothesised vanishing point.
//!
//! Five measures are supported:
//!
//! | tag | quantity | unit |
//! |-----|----------|------|
//! | a | distance from the vanishing point to the infinite line through the segment | px |
//! | b | angle between the segment and the vanishing line through its midpoint | deg |
//! | c | distance from an endpoint to the vanishing line | px |
//! | d | distance from an endpoint to the vanishing line, measured orthogonal to the segment | px |
//! | e | angle between the interpretation-plane normal and the plane orthogonal to the vanishing direction | deg |
//!
//! The vanishing line of a segment joins its midpoint to the vanishing point.
//! Vanishing points are carried in homogeneous coordinates so points at
//! infinity need no special casing, except for measure a, which needs a finite
//! point and reports `f64::INFINITY` otherwise.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, VanishingPoint, AT_INFINITY_EPS};

const DEGENERATE_EPS: f64 = 1e-12;

/// A detected image line segment in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentRecord", into = "SegmentRecord")]
pub struct LineSegment {
    p1: Point2<f64>,
    p2: Point2<f64>,
}

#[derive(Serialize, Deserialize)]
struct SegmentRecord {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl TryFrom<SegmentRecord> for LineSegment {
    type Error = Error;

    fn try_from(r: SegmentRecord) -> Result<Self> {
        LineSegment::new(r.x1, r.y1, r.x2, r.y2)
    }
}

impl From<LineSegment> for SegmentRecord {
    fn from(s: LineSegment) -> Self {
        SegmentRecord { x1: s.p1.x, y1: s.p1.y, x2: s.p2.x, y2: s.p2.y }
    }
}

impl LineSegment {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) || (x1 == x2 && y1 == y2) {
            return Err(Error::DegenerateSegment);
        }
        Ok(Self { p1: Point2::new(x1, y1), p2: Point2::new(x2, y2) })
    }

    pub fn p1(&self) -> Point2<f64> {
        self.p1
    }

    pub fn p2(&self) -> Point2<f64> {
        self.p2
    }

    pub fn midpoint(&self) -> Point2<f64> {
        nalgebra::center(&self.p1, &self.p2)
    }

    pub fn length(&self) -> f64 {
        (self.p2 - self.p1).norm()
    }

    pub fn reversed(&self) -> Self {
        Self { p1: self.p2, p2: self.p1 }
    }

    /// Applies `f` to both endpoints.
    pub fn map(&self, f: impl Fn(Point2<f64>) -> Point2<f64>) -> Result<Self> {
        let (a, b) = (f(self.p1), f(self.p2));
        Self::new(a.x, a.y, b.x, b.y)
    }
}

/// Which deviation measure the likelihood is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationMeasure {
    A,
    #[default]
    B,
    C,
    D,
    E,
}

impl DeviationMeasure {
    pub const ALL: [DeviationMeasure; 5] = [Self::A, Self::B, Self::C, Self::D, Self::E];

    /// Whether the measure is an angle in degrees (otherwise pixels).
    pub fn is_angular(&self) -> bool {
        matches!(self, Self::B | Self::E)
    }

    /// Evaluates the measure, mapping every degenerate configuration to
    /// `f64::INFINITY` (maximal deviation).
    pub fn evaluate(&self, segment: &LineSegment, vp: &VanishingPoint, intrinsics: &Intrinsics) -> f64 {
        SegmentFrame::new(segment).deviation(*self, vp, intrinsics)
    }
}

impl fmt::Display for DeviationMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Self::A => "a",
            Self::B => "b",
            Self::C => "c",
            Self::D => "d",
            Self::E => "e",
        };
        f.write_str(c)
    }
}

impl FromStr for DeviationMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            "d" => Ok(Self::D),
            "e" => Ok(Self::E),
            other => Err(Error::InvalidConfig(format!("unknown deviation measure '{other}'"))),
        }
    }
}

/// Per-segment quantities reused across many vanishing-point hypotheses.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SegmentFrame {
    p1: Vector3<f64>,
    p2: Vector3<f64>,
    mid: Vector3<f64>,
    dir: Vector2<f64>,
    /// Line through p1 and p2, scaled so its normal is a unit vector.
    support: Vector3<f64>,
    pub(crate) length: f64,
}

impl SegmentFrame {
    pub(crate) fn new(s: &LineSegment) -> Self {
        let p1 = Vector3::new(s.p1.x, s.p1.y, 1.0);
        let p2 = Vector3::new(s.p2.x, s.p2.y, 1.0);
        let m = s.midpoint();
        let d = s.p2 - s.p1;
        let length = d.norm();
        let support = p1.cross(&p2);
        let support = support / support.xy().norm();
        Self { p1, p2, mid: Vector3::new(m.x, m.y, 1.0), dir: d / length, support, length }
    }

    /// Line through the midpoint and the vanishing point, with unit normal.
    fn vanishing_line(&self, vp: &Vector3<f64>) -> Result<Vector3<f64>> {
        let v = vp / vp.norm();
        let l = self.mid.cross(&v);
        let n = l.xy().norm();
        // |(a, b)| is |w|·(distance to a finite vp), or 1 for a vp at infinity.
        if !(n > DEGENERATE_EPS) {
            return Err(Error::DegenerateVanishingPoint);
        }
        Ok(l / n)
    }

    fn measure_a(&self, vp: &Vector3<f64>) -> f64 {
        let v = vp / vp.norm();
        if v.z.abs() < AT_INFINITY_EPS {
            return f64::INFINITY;
        }
        (self.support.dot(&(v / v.z))).abs()
    }

    fn measure_b(&self, vp: &Vector3<f64>) -> Result<f64> {
        let l = self.vanishing_line(vp)?;
        let line_dir = Vector2::new(-l.y, l.x);
        let cross = self.dir.perp(&line_dir).abs();
        let dot = self.dir.dot(&line_dir).abs();
        Ok(cross.atan2(dot).to_degrees())
    }

    fn measure_c(&self, vp: &Vector3<f64>) -> Result<f64> {
        let l = self.vanishing_line(vp)?;
        Ok(l.dot(&self.p1).abs())
    }

    fn measure_d(&self, vp: &Vector3<f64>) -> Result<f64> {
        let l = self.vanishing_line(vp)?;
        let offset = l.dot(&self.p1);
        if offset == 0.0 {
            return Ok(0.0);
        }
        // Walk from p1 along the segment normal until the vanishing line is hit.
        let normal = Vector2::new(-self.dir.y, self.dir.x);
        let rate = l.x * normal.x + l.y * normal.y;
        if rate.abs() < DEGENERATE_EPS {
            return Ok(f64::INFINITY);
        }
        Ok((offset / rate).abs())
    }

    fn measure_e(&self, direction: &Vector3<f64>, intrinsics: &Intrinsics) -> Result<f64> {
        let r1 = intrinsics.back_project(self.p1.x, self.p1.y);
        let r2 = intrinsics.back_project(self.p2.x, self.p2.y);
        let n = r1.cross(&r2);
        let norm = n.norm();
        if !(norm > DEGENERATE_EPS * r1.norm() * r2.norm()) {
            return Err(Error::DegenerateSegment);
        }
        let d = direction.normalize();
        Ok((n.dot(&d) / norm).clamp(-1.0, 1.0).asin().abs().to_degrees())
    }

    pub(crate) fn try_deviation(
        &self,
        measure: DeviationMeasure,
        vp: &VanishingPoint,
        intrinsics: &Intrinsics,
    ) -> Result<f64> {
        match measure {
            DeviationMeasure::A => Ok(self.measure_a(&vp.homogeneous)),
            DeviationMeasure::B => self.measure_b(&vp.homogeneous),
            DeviationMeasure::C => self.measure_c(&vp.homogeneous),
            DeviationMeasure::D => self.measure_d(&vp.homogeneous),
            DeviationMeasure::E => self.measure_e(&vp.direction, intrinsics),
        }
    }

    pub(crate) fn deviation(&self, measure: DeviationMeasure, vp: &VanishingPoint, intrinsics: &Intrinsics) -> f64 {
        self.try_deviation(measure, vp, intrinsics).unwrap_or(f64::INFINITY)
    }
}

/// Homogeneous line through the segment midpoint and `vp`, normalised so that
/// its first two coordinates form a unit normal.
pub fn vanishing_line(segment: &LineSegment, vp: &Vector3<f64>) -> Result<Vector3<f64>> {
    SegmentFrame::new(segment).vanishing_line(vp)
}

/// Measure a, in pixels. `f64::INFINITY` when `vp` is at infinity.
pub fn deviation_a(segment: &LineSegment, vp: &Vector3<f64>) -> f64 {
    SegmentFrame::new(segment).measure_a(vp)
}

/// Measure b, in degrees within `[0, 90]`.
pub fn deviation_b(segment: &LineSegment, vp: &Vector3<f64>) -> Result<f64> {
    SegmentFrame::new(segment).measure_b(vp)
}

/// Measure c, in pixels, evaluated at `p1` (equal at `p2` by symmetry).
pub fn deviation_c(segment: &LineSegment, vp: &Vector3<f64>) -> Result<f64> {
    SegmentFrame::new(segment).measure_c(vp)
}

/// Measure d, in pixels. `f64::INFINITY` when the vanishing line is
/// perpendicular to the segment, so the normal ray never meets it.
pub fn deviation_d(segment: &LineSegment, vp: &Vector3<f64>) -> Result<f64> {
    SegmentFrame::new(segment).measure_d(vp)
}

/// Measure e, in degrees within `[0, 90]`. `vp_direction` is a camera-frame
/// direction (any non-zero scale).
pub fn deviation_e(segment: &LineSegment, vp_direction: &Vector3<f64>, intrinsics: &Intrinsics) -> Result<f64> {
    SegmentFrame::new(segment).measure_e(vp_direction, intrinsics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> LineSegment {
        LineSegment::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn rejects_degenerate_segments() {
        assert!(LineSegment::new(1.0, 2.0, 1.0, 2.0).is_err());
        assert!(LineSegment::new(f64::NAN, 2.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn segment_json_uses_endpoint_fields() {
        let s = seg(1.0, 2.0, 3.0, 4.5);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"x1":1.0,"y1":2.0,"x2":3.0,"y2":4.5}"#);
        let back: LineSegment = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<LineSegment>(r#"{"x1":1,"y1":1,"x2":1,"y2":1}"#).is_err());
    }

    #[test]
    fn vanishing_line_examples() {
        let l = vanishing_line(&seg(-1.0, 0.0, 1.0, 0.0), &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        // y = 0
        assert_relative_eq!(l.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(l.y.abs(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(l.z, 0.0, epsilon = 1e-15);

        let l = vanishing_line(&seg(310.0, 240.0, 330.0, 240.0), &Vector3::new(320.0, 0.0, 1.0)).unwrap();
        // x = 320
        assert_relative_eq!(l.y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(-l.z / l.x, 320.0, epsilon = 1e-9);
    }

    #[test]
    fn vanishing_line_degenerate_at_midpoint() {
        let s = seg(0.0, 0.0, 10.0, 0.0);
        assert!(matches!(
            vanishing_line(&s, &Vector3::new(5.0, 0.0, 1.0)),
            Err(Error::DegenerateVanishingPoint)
        ));
        assert!(deviation_b(&s, &Vector3::new(10.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn measure_a_examples() {
        let s = seg(0.0, 0.0, 10.0, 0.0);
        assert_relative_eq!(deviation_a(&s, &Vector3::new(5.0, 3.0, 1.0)), 3.0, epsilon = 1e-12);
        assert_relative_eq!(deviation_a(&s, &Vector3::new(50.0, 0.0, 1.0)), 0.0, epsilon = 1e-12);
        assert_eq!(deviation_a(&s, &Vector3::new(1.0, 1.0, 0.0)), f64::INFINITY);
    }

    #[test]
    fn measure_b_examples() {
        assert_relative_eq!(deviation_b(&seg(0.0, 0.0, 1.0, 0.0), &Vector3::new(0.0, 1.0, 0.0)).unwrap(), 90.0);
        assert_relative_eq!(
            deviation_b(&seg(0.0, 0.0, 2.0, 1.0), &Vector3::new(20.0, 10.0, 1.0)).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn measure_c_examples() {
        let s = seg(0.0, 0.0, 10.0, 0.0);
        assert_relative_eq!(deviation_c(&s, &Vector3::new(100.0, 0.0, 1.0)).unwrap(), 0.0, epsilon = 1e-12);
        // Vanishing line x = 5, perpendicular to the segment.
        assert_relative_eq!(deviation_c(&s, &Vector3::new(5.0, 100.0, 1.0)).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn measure_d_examples() {
        let s = seg(0.0, 0.0, 10.0, 0.0);
        assert_relative_eq!(deviation_d(&s, &Vector3::new(100.0, 0.0, 1.0)).unwrap(), 0.0);
        // Vanishing line at 45° through the midpoint.
        let vp = Vector3::new(1.0, 1.0, 0.0);
        let c = deviation_c(&s, &vp).unwrap();
        let d = deviation_d(&s, &vp).unwrap();
        assert_relative_eq!(d, 2f64.sqrt() * c, epsilon = 1e-12);
        assert_relative_eq!(d, 5.0, epsilon = 1e-12);
        // Perpendicular vanishing line: the normal through p1 is parallel to it.
        assert_eq!(deviation_d(&s, &Vector3::new(5.0, 100.0, 1.0)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn measure_e_examples() {
        let k = Intrinsics::new(320.0, 640, 480).unwrap();
        let horizontal = seg(300.0, 240.0, 340.0, 240.0);
        assert_relative_eq!(deviation_e(&horizontal, &Vector3::new(0.0, 1.0, 0.0), &k).unwrap(), 90.0);
        assert_relative_eq!(
            deviation_e(&horizontal, &Vector3::new(1.0, 0.0, 0.0), &k).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        // Endpoints too close to back-project to distinct rays.
        let radial = seg(320.0, 240.0, 320.0, 240.0 + 1e-10);
        assert!(deviation_e(&radial, &Vector3::new(0.0, 1.0, 0.0), &k).is_err());
    }

    #[test]
    fn evaluate_maps_errors_to_infinity() {
        let k = Intrinsics::new(320.0, 640, 480).unwrap();
        let s = seg(0.0, 0.0, 10.0, 0.0);
        let vp = VanishingPoint::from_homogeneous(Vector3::new(5.0, 0.0, 1.0), &k).unwrap();
        assert_eq!(DeviationMeasure::B.evaluate(&s, &vp, &k), f64::INFINITY);
    }

    #[test]
    fn measure_tags_parse() {
        for m in DeviationMeasure::ALL {
            assert_eq!(m.to_string().parse::<DeviationMeasure>().unwrap(), m);
        }
        assert!("f".parse::<DeviationMeasure>().is_err());
        assert_eq!(DeviationMeasure::default(), DeviationMeasure::B);
    }
}
