//! Mixture likelihood over segment deviations and the length-weighted
//! log-likelihood objective.
//!
//! Each segment is explained by one of four processes: the vertical Manhattan
//! family, one of the two horizontal families, or a background process. The
//! per-segment density is the prior-weighted sum of the process densities,
//! each Manhattan density being a one-parameter model of the deviation between
//! the segment and that family's vanishing point. The background density is
//! uniform on the deviation measure, so it contributes the constant
//! `prior / range` and keeps every segment's density strictly positive.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deviation::{DeviationMeasure, LineSegment, SegmentFrame};
use crate::error::{Error, Result};
use crate::geometry::{vanishing_points, CameraParams, Intrinsics, VERTICAL_AXIS};
use crate::io::check_version;

/// Lower clamp applied to a mixture density before taking its log.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Lower clamp on raw deviations in the log-deviation ablation objective,
/// in units of the measure.
pub const DEVIATION_FLOOR: f64 = 1e-6;

/// Background support for the angular measures, in degrees.
pub const ANGULAR_BACKGROUND_RANGE: f64 = 90.0;

pub const CONFIG_FORMAT_MAJOR: u32 = 1;

/// Generating process of a segment. The discriminant order is the tie-break
/// order used by classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessLabel {
    Vertical = 0,
    Horizontal1 = 1,
    Horizontal2 = 2,
    Background = 3,
}

impl ProcessLabel {
    pub const ALL: [ProcessLabel; 4] = [Self::Vertical, Self::Horizontal1, Self::Horizontal2, Self::Background];
    pub const MANHATTAN: [ProcessLabel; 3] = [Self::Vertical, Self::Horizontal1, Self::Horizontal2];

    pub fn index(&self) -> usize {
        *self as usize
    }

    /// Column of the rotation matrix this process's vanishing point comes from.
    pub fn axis(&self) -> Option<usize> {
        match self {
            Self::Vertical => Some(VERTICAL_AXIS),
            Self::Horizontal1 => Some(0),
            Self::Horizontal2 => Some(2),
            Self::Background => None,
        }
    }

    pub fn from_axis(axis: usize) -> Option<Self> {
        Self::MANHATTAN.into_iter().find(|l| l.axis() == Some(axis))
    }
}

/// One-parameter density over a non-negative deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LikelihoodModel {
    /// `(1/λ)·exp(-x/λ)`.
    Exponential { lambda: f64 },
    /// Central normal density `N(x; 0, σ²)`.
    Gaussian { sigma: f64 },
    /// `1/range` on `[0, range]`.
    Uniform { range: f64 },
}

impl LikelihoodModel {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            Self::Exponential { lambda } => ("lambda", lambda),
            Self::Gaussian { sigma } => ("sigma", sigma),
            Self::Uniform { range } => ("range", range),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
        }
        Ok(())
    }

    /// Density at `deviation`. `f64::INFINITY` (the maximal-deviation
    /// sentinel) has density 0.
    pub fn density(&self, deviation: f64) -> Result<f64> {
        if deviation < 0.0 || deviation.is_nan() {
            return Err(Error::NegativeDeviation(deviation));
        }
        Ok(self.density_unchecked(deviation))
    }

    #[inline]
    fn density_unchecked(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 0.0;
        }
        match *self {
            Self::Exponential { lambda } => (-x / lambda).exp() / lambda,
            Self::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Uniform { range } => {
                if x <= range {
                    1.0 / range
                } else {
                    0.0
                }
            }
        }
    }
}

/// Density of a single process model at `deviation`.
pub fn component_likelihood(deviation: f64, model: &LikelihoodModel) -> Result<f64> {
    model.density(deviation)
}

/// Published dispersions per measure as `(horizontal, vertical)`.
pub fn default_dispersions(measure: DeviationMeasure) -> (LikelihoodModel, LikelihoodModel) {
    use LikelihoodModel::{Exponential, Gaussian};
    match measure {
        DeviationMeasure::A => (Exponential { lambda: 94.46 }, Exponential { lambda: 17.26 }),
        DeviationMeasure::B => (Exponential { lambda: 1.46 }, Exponential { lambda: 0.57 }),
        DeviationMeasure::C => (Exponential { lambda: 0.39 }, Exponential { lambda: 0.53 }),
        DeviationMeasure::D => (Gaussian { sigma: 1.0 }, Gaussian { sigma: 1.0 }),
        DeviationMeasure::E => (Exponential { lambda: 0.80 }, Exponential { lambda: 0.57 }),
    }
}

/// Prior probability of each generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub vertical: f64,
    pub horizontal1: f64,
    pub horizontal2: f64,
    pub background: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self { vertical: 0.45, horizontal1: 0.26, horizontal2: 0.26, background: 0.03 }
    }
}

impl Priors {
    pub fn as_array(&self) -> [f64; 4] {
        [self.vertical, self.horizontal1, self.horizontal2, self.background]
    }

    pub fn get(&self, label: ProcessLabel) -> f64 {
        self.as_array()[label.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.as_array();
        if p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("priors must be non-negative, got {p:?}")));
        }
        if self.background <= 0.0 {
            return Err(Error::InvalidConfig("background prior must be positive".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("priors must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Which quantity the search maximises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Length-weighted log of the mixture density.
    #[default]
    Mixture,
    /// Non-probabilistic ablation: minus the (weighted) sum of the log of each
    /// segment's smallest deviation over the three vanishing points.
    LogDeviation,
}

/// Mixture priors, process models and objective options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub measure: DeviationMeasure,
    pub priors: Priors,
    /// Shared by both horizontal processes.
    pub horizontal: LikelihoodModel,
    pub vertical: LikelihoodModel,
    /// Support of the uniform background density. `None` uses 90° for angular
    /// measures and the image diagonal for pixel measures.
    #[serde(default)]
    pub background_range: Option<f64>,
    #[serde(default = "default_true")]
    pub length_weighted: bool,
    #[serde(default)]
    pub objective: ObjectiveKind,
}

fn default_true() -> bool {
    true
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self::for_measure(DeviationMeasure::default())
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    format_version: String,
    #[serde(flatten)]
    config: MixtureConfig,
}

impl MixtureConfig {
    pub fn for_measure(measure: DeviationMeasure) -> Self {
        let (horizontal, vertical) = default_dispersions(measure);
        Self {
            measure,
            priors: Priors::default(),
            horizontal,
            vertical,
            background_range: None,
            length_weighted: true,
            objective: ObjectiveKind::Mixture,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        self.horizontal.validate()?;
        self.vertical.validate()?;
        if let Some(r) = self.background_range {
            LikelihoodModel::Uniform { range: r }.validate()?;
        }
        Ok(())
    }

    pub fn model(&self, label: ProcessLabel) -> LikelihoodModel {
        match label {
            ProcessLabel::Vertical => self.vertical,
            ProcessLabel::Horizontal1 | ProcessLabel::Horizontal2 => self.horizontal,
            ProcessLabel::Background => LikelihoodModel::Uniform { range: f64::NAN },
        }
    }

    pub fn background_range_for(&self, intrinsics: &Intrinsics) -> f64 {
        self.background_range.unwrap_or_else(|| {
            if self.measure.is_angular() {
                ANGULAR_BACKGROUND_RANGE
            } else {
                intrinsics.diagonal()
            }
        })
    }

    /// `prior·density` per process for Manhattan deviations given in
    /// [`ProcessLabel`] order, the background term being `prior / range`.
    pub fn weighted_densities(&self, deviations: [f64; 3], background_range: f64) -> [f64; 4] {
        let p = self.priors.as_array();
        [
            p[0] * self.vertical.density_unchecked(deviations[0]),
            p[1] * self.horizontal.density_unchecked(deviations[1]),
            p[2] * self.horizontal.density_unchecked(deviations[2]),
            p[3] / background_range,
        ]
    }

    /// Mixture density for one segment's Manhattan deviations.
    pub fn mixture_density(&self, deviations: [f64; 3], background_range: f64) -> f64 {
        self.weighted_densities(deviations, background_range).iter().sum()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(s)?;
        check_version(&file.format_version, CONFIG_FORMAT_MAJOR)?;
        file.config.validate()?;
        Ok(file.config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = ConfigFile { format_version: format!("{CONFIG_FORMAT_MAJOR}.0"), config: self.clone() };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

/// Classification of one segment under the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub index: usize,
    /// Process densities, in [`ProcessLabel`] order. The background entry is
    /// the uniform density `1/range`.
    pub likelihoods: [f64; 4],
    pub mixture: f64,
    pub label: ProcessLabel,
}

impl SegmentScore {
    /// Posterior responsibility of each process, `prior·likelihood / mixture`.
    pub fn posteriors(&self, priors: &Priors) -> [f64; 4] {
        let p = priors.as_array();
        let total: f64 = (0..4).map(|i| p[i] * self.likelihoods[i]).sum();
        std::array::from_fn(|i| p[i] * self.likelihoods[i] / total)
    }
}

/// Segments prepared for repeated evaluation under many camera hypotheses.
#[derive(Debug, Clone)]
pub struct Evaluator {
    frames: Vec<SegmentFrame>,
    weights: Vec<f64>,
    config: MixtureConfig,
    width: u32,
    height: u32,
}

impl Evaluator {
    pub fn new(segments: &[LineSegment], config: &MixtureConfig, width: u32, height: u32) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::NoSegments);
        }
        config.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidIntrinsics(format!("image size {width}x{height} must be positive")));
        }
        let frames: Vec<SegmentFrame> = segments.iter().map(SegmentFrame::new).collect();
        let weights = frames
            .iter()
            .map(|f| if config.length_weighted { f.length } else { 1.0 })
            .collect();
        Ok(Self { frames, weights, config: config.clone(), width, height })
    }

    pub fn config(&self) -> &MixtureConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn total_length(&self) -> f64 {
        self.frames.iter().map(|f| f.length).sum()
    }

    /// Manhattan deviations of every segment, in [`ProcessLabel`] order.
    fn deviations(&self, params: &CameraParams) -> impl Iterator<Item = [f64; 3]> + '_ {
        let vps = vanishing_points(params);
        let measure = self.config.measure;
        let intrinsics = params.intrinsics;
        self.frames.iter().map(move |frame| {
            std::array::from_fn(|i| {
                let axis = ProcessLabel::MANHATTAN[i].axis().expect("manhattan label");
                frame.deviation(measure, &vps[axis], &intrinsics)
            })
        })
    }

    /// Prior-weighted process densities for each segment.
    fn weighted_terms(&self, params: &CameraParams) -> impl Iterator<Item = [f64; 4]> + '_ {
        let range = self.config.background_range_for(&params.intrinsics);
        self.deviations(params).map(move |dev| self.config.weighted_densities(dev, range))
    }

    /// Mixture density of each segment.
    pub fn mixture_densities(&self, params: &CameraParams) -> Vec<f64> {
        self.weighted_terms(params).map(|t| t.iter().sum()).collect()
    }

    /// The objective to maximise over camera parameters.
    pub fn objective(&self, params: &CameraParams) -> f64 {
        match self.config.objective {
            ObjectiveKind::Mixture => self
                .weighted_terms(params)
                .zip(&self.weights)
                .map(|(t, w)| w * (t[0] + t[1] + t[2] + t[3]).max(DENSITY_FLOOR).ln())
                .sum(),
            ObjectiveKind::LogDeviation => -self
                .deviations(params)
                .zip(&self.weights)
                .map(|(d, w)| w * d.iter().copied().fold(f64::INFINITY, f64::min).max(DEVIATION_FLOOR).ln())
                .sum::<f64>(),
        }
    }

    pub fn classify(&self, params: &CameraParams) -> Vec<SegmentScore> {
        let p = self.config.priors.as_array();
        self.weighted_terms(params)
            .enumerate()
            .map(|(index, terms)| {
                let mut label = ProcessLabel::Vertical;
                for candidate in ProcessLabel::ALL {
                    if terms[candidate.index()] > terms[label.index()] {
                        label = candidate;
                    }
                }
                let likelihoods = std::array::from_fn(|i| if p[i] > 0.0 { terms[i] / p[i] } else { 0.0 });
                SegmentScore { index, likelihoods, mixture: terms.iter().sum(), label }
            })
            .collect()
    }

}

/// Mixture density of one segment under `params`.
pub fn mixture_likelihood(segment: &LineSegment, params: &CameraParams, config: &MixtureConfig) -> Result<f64> {
    let ev = Evaluator::new(
        std::slice::from_ref(segment),
        config,
        params.intrinsics.width,
        params.intrinsics.height,
    )?;
    Ok(ev.mixture_densities(params)[0])
}

/// `Σ |l_i| · ln p(l_i | params)` over all segments.
pub fn objective(segments: &[LineSegment], params: &CameraParams, config: &MixtureConfig) -> Result<f64> {
    let ev = Evaluator::new(segments, config, params.intrinsics.width, params.intrinsics.height)?;
    Ok(ev.objective(params))
}

/// Assigns each segment to its most probable process.
pub fn classify_segments(
    segments: &[LineSegment],
    params: &CameraParams,
    config: &MixtureConfig,
) -> Result<Vec<SegmentScore>> {
    if segments.is_empty() {
        return Ok(Vec::new());
    }
    let ev = Evaluator::new(segments, config, params.intrinsics.width, params.intrinsics.height)?;
    Ok(ev.classify(params))
}

/// Maximum-likelihood exponential scale, the sample mean.
pub fn fit_exponential(deviations: &[f64]) -> Result<f64> {
    if deviations.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 samples, got {}", deviations.len())));
    }
    if let Some(bad) = deviations.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::NegativeDeviation(*bad));
    }
    let mean = deviations.iter().sum::<f64>() / deviations.len() as f64;
    if mean <= 0.0 {
        return Err(Error::InsufficientData("all samples are zero".into()));
    }
    Ok(mean)
}
