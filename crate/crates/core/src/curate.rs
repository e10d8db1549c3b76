//! Planar (gnomonic) projections of equirectangular panoramas with exact
//! ground truth, sampled the way the benchmark protocol prescribes.
//!
//! Panorama convention: column `u` maps to longitude `2π·u/W − π`, row `v` to
//! latitude `π/2 − π·v/H`, so latitude +90° is scene up and the panorama
//! centre pixel is the forward direction `(0, 0, 1)`. Pixel indices are pixel
//! centres in both the panorama and the output image, which puts the principal
//! point of an even-sized output exactly on a pixel.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fov_to_focal, CameraParams, EulerAngles};
use crate::io::{check_version, format_version, CameraRecord};

pub const MANIFEST_FORMAT_MAJOR: u32 = 1;
pub const DEFAULT_FOVS: [f64; 5] = [60.0, 75.0, 90.0, 105.0, 120.0];
pub const PAN_RANGE: (f64, f64) = (-180.0, 180.0);
pub const ROLL_RANGE: (f64, f64) = (-10.0, 10.0);
pub const TILT_RANGE: (f64, f64) = (-30.0, 30.0);
pub const UNIFORM_FOV_RANGE: (f64, f64) = (60.0, 120.0);
/// Relative deviation from a 2:1 aspect ratio accepted by default.
pub const DEFAULT_ASPECT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub panorama_id: String,
    pub hfov_deg: f64,
    pub pan: f64,
    pub roll: f64,
    pub tilt: f64,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl ProjectionSpec {
    pub fn new(panorama_id: impl Into<String>, hfov_deg: f64, angles: EulerAngles) -> Self {
        Self {
            panorama_id: panorama_id.into(),
            hfov_deg,
            pan: angles.pan,
            roll: angles.roll,
            tilt: angles.tilt,
            width: 640,
            height: 480,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::FovOutOfRange(self.hfov_deg));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidIntrinsics(format!("resolution {}x{}", self.width, self.height)));
        }
        Ok(())
    }

    pub fn angles(&self) -> EulerAngles {
        EulerAngles::new(self.pan, self.roll, self.tilt)
    }

    pub fn focal_px(&self) -> Result<f64> {
        fov_to_focal(self.hfov_deg, self.width as f64)
    }

    pub fn camera(&self) -> Result<CameraParams> {
        self.validate()?;
        CameraParams::from_euler(&self.angles(), self.hfov_deg, self.width, self.height)
    }

    /// Ground truth exactly as specified (angles are not round-tripped).
    pub fn ground_truth(&self) -> Result<CameraRecord> {
        Ok(CameraRecord {
            pan: self.pan,
            roll: self.roll,
            tilt: self.tilt,
            hfov_deg: self.hfov_deg,
            focal_px: self.focal_px()?,
            width: self.width,
            height: self.height,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FovSampling {
    /// Each listed FOV is used equally often.
    Fixed { fovs: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
}

impl Default for FovSampling {
    fn default() -> Self {
        Self::Fixed { fovs: DEFAULT_FOVS.to_vec() }
    }
}

impl FovSampling {
    pub fn uniform() -> Self {
        Self::Uniform { lo: UNIFORM_FOV_RANGE.0, hi: UNIFORM_FOV_RANGE.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub per_scene: usize,
    pub fov: FovSampling,
    pub width: u32,
    pub height: u32,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self { per_scene: 15, fov: FovSampling::default(), width: 640, height: 480 }
    }
}

impl SamplingOptions {
    pub fn validate(&self) -> Result<()> {
        if self.per_scene == 0 {
            return Err(Error::InvalidConfig("per_scene must be positive".into()));
        }
        match &self.fov {
            FovSampling::Fixed { fovs } => {
                if fovs.is_empty() || self.per_scene % fovs.len() != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "per_scene ({}) must be a multiple of the number of FOVs ({})",
                        self.per_scene,
                        fovs.len()
                    )));
                }
                if let Some(&bad) = fovs.iter().find(|f| !(**f > 0.0 && **f < 180.0)) {
                    return Err(Error::FovOutOfRange(bad));
                }
            }
            FovSampling::Uniform { lo, hi } => {
                if !(*lo > 0.0 && lo <= hi && *hi < 180.0) {
                    return Err(Error::InvalidConfig(format!("bad FOV range [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }
}

/// Draws `per_scene` projection specs for every panorama. Deterministic for a
/// fixed seed and panorama list.
pub fn sample_specs(panorama_ids: &[String], options: &SamplingOptions, seed: u64) -> Result<Vec<ProjectionSpec>> {
    options.validate()?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(panorama_ids.len() * options.per_scene);
    for id in panorama_ids {
        for i in 0..options.per_scene {
            let hfov_deg = match &options.fov {
                FovSampling::Fixed { fovs } => fovs[i / (options.per_scene / fovs.len())],
                FovSampling::Uniform { lo, hi } => rng.random_range(*lo..=*hi),
            };
            let pan = rng.random_range(PAN_RANGE.0..=PAN_RANGE.1);
            let roll = rng.random_range(ROLL_RANGE.0..=ROLL_RANGE.1);
            let tilt = rng.random_range(TILT_RANGE.0..=TILT_RANGE.1);
            specs.push(ProjectionSpec {
                width: options.width,
                height: options.height,
                seed,
                ..ProjectionSpec::new(id.clone(), hfov_deg, EulerAngles::new(pan, roll, tilt))
            });
        }
    }
    Ok(specs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

/// An equirectangular panorama.
#[derive(Debug, Clone)]
pub struct Panorama {
    image: RgbImage,
}

impl Panorama {
    pub fn new(image: RgbImage) -> Result<Self> {
        Self::with_tolerance(image, DEFAULT_ASPECT_TOLERANCE)
    }

    pub fn with_tolerance(image: RgbImage, aspect_tolerance: f64) -> Result<Self> {
        let (w, h) = image.dimensions();
        if w < 2 || h < 1 {
            return Err(Error::MalformedPanorama(format!("{w}x{h} is too small")));
        }
        let aspect = w as f64 / h as f64;
        if (aspect / 2.0 - 1.0).abs() > aspect_tolerance {
            return Err(Error::MalformedPanorama(format!("aspect ratio {aspect:.4} is not 2:1")));
        }
        Ok(Self { image })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(image::open(path)?.to_rgb8())
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.image.dimensions()
    }

    /// Continuous panorama coordinates of a longitude/latitude in radians.
    pub fn lonlat_to_pixel(&self, lon: f64, lat: f64) -> (f64, f64) {
        let (w, h) = self.dimensions();
        ((lon / (2.0 * PI) + 0.5) * w as f64, (0.5 - lat / PI) * h as f64)
    }

    pub fn pixel_to_lonlat(&self, u: f64, v: f64) -> (f64, f64) {
        let (w, h) = self.dimensions();
        ((u / w as f64 - 0.5) * 2.0 * PI, (0.5 - v / h as f64) * PI)
    }

    pub fn sample(&self, u: f64, v: f64, interpolation: Interpolation) -> Rgb<u8> {
        let (w, h) = self.dimensions();
        let wrap = |x: i64| x.rem_euclid(w as i64) as u32;
        let clamp = |y: i64| y.clamp(0, h as i64 - 1) as u32;
        match interpolation {
            Interpolation::Nearest => *self.image.get_pixel(wrap(u.round() as i64), clamp(v.round() as i64)),
            Interpolation::Bilinear => {
                let (u0, v0) = (u.floor(), v.floor());
                let (fu, fv) = (u - u0, v - v0);
                let (u0, v0) = (u0 as i64, v0 as i64);
                let px = |x: i64, y: i64| self.image.get_pixel(wrap(x), clamp(y)).0;
                let (a, b, c, d) = (px(u0, v0), px(u0 + 1, v0), px(u0, v0 + 1), px(u0 + 1, v0 + 1));
                let mut out = [0u8; 3];
                for ch in 0..3 {
                    let top = a[ch] as f64 * (1.0 - fu) + b[ch] as f64 * fu;
                    let bottom = c[ch] as f64 * (1.0 - fu) + d[ch] as f64 * fu;
                    out[ch] = (top * (1.0 - fv) + bottom * fv).round().clamp(0.0, 255.0) as u8;
                }
                Rgb(out)
            }
        }
    }
}

/// World direction seen by image point `(x, y)`: `Rᵀ K⁻¹ (x, y, 1)`.
pub fn image_to_world(params: &CameraParams, x: f64, y: f64) -> Vector3<f64> {
    params.rotation.matrix().transpose() * params.intrinsics.back_project(x, y)
}

/// Image point of world direction `d`, if it lies in front of the camera.
pub fn world_to_image(params: &CameraParams, d: &Vector3<f64>) -> Option<(f64, f64)> {
    params.intrinsics.project(&(params.rotation.matrix() * d))
}

/// Longitude and latitude (radians) of a world direction.
pub fn world_to_lonlat(d: &Vector3<f64>) -> (f64, f64) {
    let n = d.norm();
    (d.x.atan2(d.z), (-d.y / n).clamp(-1.0, 1.0).asin())
}

pub fn lonlat_to_world(lon: f64, lat: f64) -> Vector3<f64> {
    Vector3::new(lat.cos() * lon.sin(), -lat.sin(), lat.cos() * lon.cos())
}

/// Renders the planar view described by `spec`.
pub fn project(panorama: &Panorama, spec: &ProjectionSpec, interpolation: Interpolation) -> Result<RgbImage> {
    let params = spec.camera()?;
    let (w, h) = (spec.width, spec.height);
    let mut out = RgbImage::new(w, h);
    out.par_chunks_mut(3 * w as usize).enumerate().for_each(|(y, row)| {
        for x in 0..w as usize {
            let (lon, lat) = world_to_lonlat(&image_to_world(&params, x as f64, y as f64));
            let (u, v) = panorama.lonlat_to_pixel(lon, lat);
            row[3 * x..3 * x + 3].copy_from_slice(&panorama.sample(u, v, interpolation).0);
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedSample {
    pub id: String,
    pub image: String,
    pub spec: ProjectionSpec,
    pub ground_truth: CameraRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub seed: u64,
    pub sampling: SamplingOptions,
    pub samples: Vec<CuratedSample>,
}

impl Manifest {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        check_version(&m.format_version, MANIFEST_FORMAT_MAJOR)?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Scene-level train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub format_version: String,
    pub seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let split: Self = serde_json::from_str(s)?;
        check_version(&split.format_version, MANIFEST_FORMAT_MAJOR)?;
        Ok(split)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Shuffles scene ids and cuts them in half; with an odd count the training
/// half gets the extra scene. Both halves are returned sorted.
pub fn split_scenes(ids: &[String], seed: u64) -> Split {
    let mut shuffled = ids.to_vec();
    shuffled.sort();
    shuffled.shuffle(&mut StdRng::seed_from_u64(seed));
    let cut = shuffled.len().div_ceil(2);
    let mut test = shuffled.split_off(cut);
    shuffled.sort();
    test.sort();
    Split { format_version: format_version(MANIFEST_FORMAT_MAJOR), seed, train: shuffled, test }
}

#[derive(Debug, Clone)]
pub struct CurateOptions {
    pub seed: u64,
    pub sampling: SamplingOptions,
    pub interpolation: Interpolation,
    pub aspect_tolerance: f64,
    pub write_split: bool,
}

impl Default for CurateOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            sampling: SamplingOptions::default(),
            interpolation: Interpolation::Bilinear,
            aspect_tolerance: DEFAULT_ASPECT_TOLERANCE,
            write_split: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurationReport {
    pub manifest: Manifest,
    pub split: Option<Split>,
    /// Panoramas that could not be used, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Lists the PNG files of a directory in name order.
pub fn list_panoramas(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Curates every panorama in `pano_dir` into `out_dir`: planar images under
/// `images/`, `manifest.json` and, optionally, `split.json`. Unreadable
/// panoramas are skipped and reported; it is an error if none is usable.
pub fn curate_directory(pano_dir: &Path, out_dir: &Path, options: &CurateOptions) -> Result<CurationReport> {
    options.sampling.validate()?;
    let mut panoramas = Vec::new();
    let mut skipped = Vec::new();
    for path in list_panoramas(pano_dir)? {
        let loaded = image::open(&path)
            .map_err(Error::from)
            .and_then(|img| Panorama::with_tolerance(img.to_rgb8(), options.aspect_tolerance));
        match loaded {
            Ok(p) => {
                let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                panoramas.push((id, p));
            }
            Err(e) => skipped.push((path, e.to_string())),
        }
    }
    if panoramas.is_empty() {
        return Err(Error::InsufficientData(format!("no usable panorama in {}", pano_dir.display())));
    }

    let ids: Vec<String> = panoramas.iter().map(|(id, _)| id.clone()).collect();
    let specs = sample_specs(&ids, &options.sampling, options.seed)?;
    let image_dir = out_dir.join("images");
    std::fs::create_dir_all(&image_dir)?;

    let per_scene = options.sampling.per_scene;
    let samples = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let (_, pano) = &panoramas[i / per_scene];
            let id = format!("{}_{:02}", spec.panorama_id, i % per_scene);
            let file = format!("{id}.png");
            project(pano, spec, options.interpolation)?.save(image_dir.join(&file))?;
            Ok(CuratedSample { id, image: format!("images/{file}"), spec: spec.clone(), ground_truth: spec.ground_truth()? })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        format_version: format_version(MANIFEST_FORMAT_MAJOR),
        seed: options.seed,
        sampling: options.sampling.clone(),
        samples,
    };
    std::fs::write(out_dir.join("manifest.json"), manifest.to_json_string()?)?;
    let split = options.write_split.then(|| split_scenes(&ids, options.seed));
    if let Some(split) = &split {
        std::fs::write(out_dir.join("split.json"), split.to_json_string()?)?;
    }
    Ok(CurationReport { manifest, split, skipped })
}
