//! Synthetic Manhattan scenes with exact ground truth.
//!
//! Manhattan segments are 3-D segments along a world axis, placed in front of
//! the camera, projected through `K·R`, clipped to the image and perturbed with
//! isotropic Gaussian endpoint noise. Background segments have uniformly random
//! position and orientation in the image.

use nalgebra::{Point2, Vector3};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::deviation::LineSegment;
use crate::error::{Error, Result};
use crate::geometry::{CameraParams, EulerAngles};
use crate::io::{format_version, CameraRecord, SegmentEntry, SegmentFile, SEGMENTS_FORMAT_MAJOR};
use crate::likelihood::ProcessLabel;

/// Number of segments generated per process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentCounts {
    pub vertical: usize,
    pub horizontal1: usize,
    pub horizontal2: usize,
    pub background: usize,
}

impl SegmentCounts {
    pub fn new(vertical: usize, horizontal1: usize, horizontal2: usize, background: usize) -> Self {
        Self { vertical, horizontal1, horizontal2, background }
    }

    pub fn get(&self, label: ProcessLabel) -> usize {
        match label {
            ProcessLabel::Vertical => self.vertical,
            ProcessLabel::Horizontal1 => self.horizontal1,
            ProcessLabel::Horizontal2 => self.horizontal2,
            ProcessLabel::Background => self.background,
        }
    }

    pub fn total(&self) -> usize {
        self.vertical + self.horizontal1 + self.horizontal2 + self.background
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub angles: EulerAngles,
    pub hfov_deg: f64,
    pub width: u32,
    pub height: u32,
    pub counts: SegmentCounts,
    /// Standard deviation of the endpoint noise, pixels.
    pub noise_px: f64,
    pub seed: u64,
    /// Segments shorter than this after clipping are resampled.
    pub min_length_px: f64,
    /// World-space length range of Manhattan segments (scene units).
    pub world_length: (f64, f64),
    /// Depth range of the segment anchor point (scene units).
    pub depth: (f64, f64),
    /// Attempts allowed per segment before giving up.
    pub retries: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            angles: EulerAngles::default(),
            hfov_deg: 90.0,
            width: 640,
            height: 480,
            counts: SegmentCounts::new(30, 30, 30, 10),
            noise_px: 0.0,
            seed: 0,
            min_length_px: 10.0,
            world_length: (0.5, 3.0),
            depth: (2.0, 8.0),
            retries: 1000,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise must be non-negative, got {}", self.noise_px)));
        }
        let ok_range = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi && hi.is_finite();
        if !ok_range(self.world_length) || !ok_range(self.depth) {
            return Err(Error::InvalidConfig("length and depth ranges must be positive and ordered".into()));
        }
        if !(self.min_length_px > 0.0) {
            return Err(Error::InvalidConfig("minimum segment length must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub truth: CameraParams,
    pub angles: EulerAngles,
    pub hfov_deg: f64,
    pub segments: Vec<LineSegment>,
    pub labels: Vec<ProcessLabel>,
}

impl SynthScene {
    /// The scene as a segment file with labels and a ground-truth block.
    pub fn to_segment_file(&self, id: Option<String>) -> SegmentFile {
        let mut truth = CameraRecord::from_params(&self.truth);
        // Keep the generating angles verbatim rather than the round-tripped ones.
        truth.pan = self.angles.pan;
        truth.roll = self.angles.roll;
        truth.tilt = self.angles.tilt;
        truth.hfov_deg = self.hfov_deg;
        SegmentFile {
            format_version: format_version(SEGMENTS_FORMAT_MAJOR),
            id,
            width: Some(self.truth.intrinsics.width),
            height: Some(self.truth.intrinsics.height),
            segments: self
                .segments
                .iter()
                .zip(&self.labels)
                .map(|(s, l)| SegmentEntry { segment: *s, label: Some(*l) })
                .collect(),
            ground_truth: Some(truth),
        }
    }
}

/// Liang–Barsky clipping of `a→b` against `[x0, x1] × [y0, y1]`.
pub fn clip_segment(
    a: Point2<f64>,
    b: Point2<f64>,
    (x0, y0): (f64, f64),
    (x1, y1): (f64, f64),
) -> Option<(Point2<f64>, Point2<f64>)> {
    let d = b - a;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for (p, q) in [(-d.x, a.x - x0), (d.x, x1 - a.x), (-d.y, a.y - y0), (d.y, y1 - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    // Clamp away the rounding of `a + d·t` at the box edges.
    let at = |t: f64| {
        let p = a + d * t;
        Point2::new(p.x.clamp(x0, x1), p.y.clamp(y0, y1))
    };
    (t0 <= t1).then(|| (at(t0), at(t1)))
}

struct Sampler<'a> {
    config: &'a SynthConfig,
    params: CameraParams,
    rng: StdRng,
    noise: Option<Normal<f64>>,
}

impl Sampler<'_> {
    fn image_box(&self) -> ((f64, f64), (f64, f64)) {
        ((0.0, 0.0), (self.config.width as f64, self.config.height as f64))
    }

    fn finish(&mut self, a: Point2<f64>, b: Point2<f64>) -> Option<LineSegment> {
        let (lo, hi) = self.image_box();
        let (a, b) = clip_segment(a, b, lo, hi)?;
        if (b - a).norm() < self.config.min_length_px {
            return None;
        }
        let (a, b) = match &self.noise {
            Some(n) => {
                let mut jitter = || n.sample(&mut self.rng);
                (Point2::new(a.x + jitter(), a.y + jitter()), Point2::new(b.x + jitter(), b.y + jitter()))
            }
            None => (a, b),
        };
        LineSegment::new(a.x, a.y, b.x, b.y).ok()
    }

    fn manhattan(&mut self, axis: usize) -> Option<LineSegment> {
        let k = &self.params.intrinsics;
        let (w, h) = (self.config.width as f64, self.config.height as f64);
        let (u, v) = (self.rng.random_range(0.0..w), self.rng.random_range(0.0..h));
        let depth = self.rng.random_range(self.config.depth.0..=self.config.depth.1);
        let anchor: Vector3<f64> = k.back_project(u, v) * depth;
        let mut length = self.rng.random_range(self.config.world_length.0..=self.config.world_length.1);
        if self.rng.random_bool(0.5) {
            length = -length;
        }
        let end = anchor + self.params.rotation.column(axis) * length;
        // Both ends must be in front of the camera for the image to be a segment.
        if end.z < 0.05 * self.config.depth.0 {
            return None;
        }
        let (ax, ay) = k.project(&anchor)?;
        let (bx, by) = k.project(&end)?;
        self.finish(Point2::new(ax, ay), Point2::new(bx, by))
    }

    fn background(&mut self) -> Option<LineSegment> {
        let (w, h) = (self.config.width as f64, self.config.height as f64);
        let centre = Point2::new(self.rng.random_range(0.0..w), self.rng.random_range(0.0..h));
        let theta = self.rng.random_range(0.0..std::f64::consts::PI);
        let max_len = (0.3 * w.hypot(h)).max(self.config.min_length_px * 2.0);
        let len = self.rng.random_range(self.config.min_length_px..max_len);
        let half = nalgebra::Vector2::new(theta.cos(), theta.sin()) * (len / 2.0);
        self.finish(centre - half, centre + half)
    }
}

/// Generates a scene. Deterministic for a fixed configuration.
pub fn generate(config: &SynthConfig) -> Result<SynthScene> {
    config.validate()?;
    let params = CameraParams::from_euler(&config.angles, config.hfov_deg, config.width, config.height)?;
    let noise = (config.noise_px > 0.0)
        .then(|| Normal::new(0.0, config.noise_px).map_err(|e| Error::InvalidConfig(e.to_string())))
        .transpose()?;
    let mut sampler = Sampler { config, params, rng: StdRng::seed_from_u64(config.seed), noise };

    let mut segments = Vec::with_capacity(config.counts.total());
    let mut labels = Vec::with_capacity(config.counts.total());
    for label in ProcessLabel::ALL {
        for _ in 0..config.counts.get(label) {
            let mut placed = None;
            for _ in 0..config.retries.max(1) {
                placed = match label.axis() {
                    Some(axis) => sampler.manhattan(axis),
                    None => sampler.background(),
                };
                if placed.is_some() {
                    break;
                }
            }
            let seg = placed.ok_or_else(|| {
                Error::CannotPlaceSegments(format!(
                    "no {label:?} segment survived clipping after {} attempts",
                    config.retries
                ))
            })?;
            segments.push(seg);
            labels.push(label);
        }
    }
    Ok(SynthScene { truth: params, angles: config.angles, hfov_deg: config.hfov_deg, segments, labels })
}
