//! Reliability cues and the error predictor built on them.
//!
//! Three scalar cues summarise how well a scene constrains the estimate:
//!
//! 1. the smallest number of segments assigned to any Manhattan family,
//! 2. the entropy of the grid-stage objective values turned into a
//!    distribution with a softmax,
//! 3. the final objective divided by the number of segments.
//!
//! A [`ReliabilityModel`] whitens the cue vectors of a training set and
//! predicts the absolute roll, tilt and focal errors of a new estimate as the
//! mean error of its K nearest training neighbours, with K chosen per target by
//! k-fold cross-validation.

use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{check_version, format_version};
use crate::likelihood::{ProcessLabel, SegmentScore};
use crate::search::{CalibrationResult, GridEvaluation};

pub const MODEL_FORMAT_MAJOR: u32 = 1;

/// Fewest training rows accepted by [`fit_model`].
pub const MIN_TRAINING_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityCues {
    pub min_segments: usize,
    /// Nats.
    pub grid_entropy: f64,
    pub mean_loglik: f64,
}

impl ReliabilityCues {
    pub fn as_array(&self) -> [f64; 3] {
        [self.min_segments as f64, self.grid_entropy, self.mean_loglik]
    }
}

/// What the final objective is divided by for the likelihood cue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoglikNormalization {
    #[default]
    SegmentCount,
    TotalLength,
}

/// Entropy in nats of `softmax(values)`.
pub fn grid_entropy(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let weights: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let h = -weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / z;
            p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

pub fn compute_cues(
    scores: &[SegmentScore],
    objective: f64,
    total_length: f64,
    grid_objectives: &[f64],
    normalization: LoglikNormalization,
) -> ReliabilityCues {
    let mut counts = [0usize; 4];
    for s in scores {
        counts[s.label.index()] += 1;
    }
    let min_segments = ProcessLabel::MANHATTAN.iter().map(|l| counts[l.index()]).min().unwrap_or(0);
    let denom = match normalization {
        LoglikNormalization::SegmentCount => scores.len() as f64,
        LoglikNormalization::TotalLength => total_length,
    };
    ReliabilityCues {
        min_segments,
        grid_entropy: grid_entropy(grid_objectives),
        mean_loglik: if denom > 0.0 { objective / denom } else { 0.0 },
    }
}

/// Cues of a finished calibration.
pub fn extract_cues(result: &CalibrationResult, grid: &GridEvaluation) -> ReliabilityCues {
    compute_cues(&result.scores, result.objective, 0.0, &grid.objectives(), LoglikNormalization::SegmentCount)
}

/// Absolute errors of one estimate: roll and tilt in degrees, focal in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorTargets {
    pub roll: f64,
    pub tilt: f64,
    pub focal: f64,
}

impl ErrorTargets {
    pub fn as_array(&self) -> [f64; 3] {
        [self.roll, self.tilt, self.focal]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self { roll: v[0], tilt: v[1], focal: v[2] }
    }
}

/// Which predicted error to rank by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Roll,
    Tilt,
    Focal,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Roll, Target::Tilt, Target::Focal];

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn pick(&self, e: &ErrorTargets) -> f64 {
        e.as_array()[self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub cues: ReliabilityCues,
    pub errors: ErrorTargets,
}

/// Affine map taking the training cues to zero mean and identity covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Whitening {
    pub mean: [f64; 3],
    /// Row-major 3×3 whitening matrix.
    pub matrix: [[f64; 3]; 3],
}

impl Whitening {
    /// ZCA whitening from the population covariance of `samples`. Directions
    /// with (near) zero variance are floored so the map stays invertible.
    pub fn fit(samples: &[[f64; 3]]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no samples to whiten".into()));
        }
        let n = samples.len() as f64;
        let mean: Vector3<f64> = samples.iter().map(|s| Vector3::from(*s)).sum::<Vector3<f64>>() / n;
        let mut cov = Matrix3::zeros();
        for s in samples {
            let d = Vector3::from(*s) - mean;
            cov += d * d.transpose();
        }
        cov /= n;
        let eig = SymmetricEigen::new(cov);
        let top = eig.eigenvalues.max().max(0.0);
        let floor = if top > 0.0 { top * 1e-12 } else { 1.0 };
        let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
        let w = eig.eigenvectors * Matrix3::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
        Ok(Self { mean: mean.into(), matrix: w.transpose().into() })
    }

    fn w(&self) -> Matrix3<f64> {
        Matrix3::from(self.matrix).transpose()
    }

    pub fn apply(&self, x: &[f64; 3]) -> [f64; 3] {
        (self.w() * (Vector3::from(*x) - Vector3::from(self.mean))).into()
    }

    pub fn invert(&self, z: &[f64; 3]) -> [f64; 3] {
        let inv = self.w().try_inverse().expect("whitening matrix is invertible by construction");
        (inv * Vector3::from(*z) + Vector3::from(self.mean)).into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub seed: u64,
    pub folds: usize,
    pub k_candidates: Vec<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { seed: 0, folds: 5, k_candidates: (1..=31).step_by(2).collect() }
    }
}

/// Whitened KNN regressor from cues to absolute parameter errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityModel {
    pub format_version: String,
    pub whitening: Whitening,
    pub rows: Vec<TrainingRow>,
    /// Neighbour count per target, in [`Target`] order.
    pub k: [usize; 3],
    pub seed: u64,
    #[serde(skip)]
    whitened: Vec<[f64; 3]>,
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Indices of `candidates` sorted by distance to `query`, ties by index.
fn neighbours(points: &[[f64; 3]], candidates: &[usize], query: &[f64; 3]) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = candidates.iter().map(|&i| (sq_dist(&points[i], query), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, i)| i).collect()
}

fn validate_rows(rows: &[TrainingRow]) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if r.cues.as_array().iter().chain(r.errors.as_array().iter()).any(|v| !v.is_finite()) {
            return Err(Error::InsufficientData(format!("training row {i} has non-finite values")));
        }
    }
    Ok(())
}

/// Fits whitening on all rows, then picks K per target by cross-validated MAE.
pub fn fit_model(rows: &[TrainingRow], options: &FitOptions) -> Result<ReliabilityModel> {
    if rows.len() < MIN_TRAINING_ROWS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_TRAINING_ROWS} training rows, got {}",
            rows.len()
        )));
    }
    if options.folds < 2 || options.k_candidates.is_empty() || options.k_candidates.contains(&0) {
        return Err(Error::InvalidConfig("need at least 2 folds and positive K candidates".into()));
    }
    validate_rows(rows)?;
    let raw: Vec<[f64; 3]> = rows.iter().map(|r| r.cues.as_array()).collect();
    let whitening = Whitening::fit(&raw)?;
    let whitened: Vec<[f64; 3]> = raw.iter().map(|x| whitening.apply(x)).collect();

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut StdRng::seed_from_u64(options.seed));
    let mut fold_of = vec![0; rows.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % options.folds;
    }

    let smallest_train = (0..options.folds).map(|f| fold_of.iter().filter(|&&g| g != f).count()).min().unwrap_or(0);
    let mut ks: Vec<usize> = options.k_candidates.iter().copied().filter(|&k| k <= smallest_train).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::InsufficientData("no K candidate fits inside a training fold".into()));
    }
    let k_max = *ks.iter().max().expect("non-empty");

    // abs_err[t][j]: summed absolute error of target t with candidate ks[j].
    let mut abs_err = [vec![0.0; ks.len()], vec![0.0; ks.len()], vec![0.0; ks.len()]];
    for fold in 0..options.folds {
        let train: Vec<usize> = (0..rows.len()).filter(|&i| fold_of[i] != fold).collect();
        for held in (0..rows.len()).filter(|&i| fold_of[i] == fold) {
            let near = neighbours(&whitened, &train, &whitened[held]);
            let truth = rows[held].errors.as_array();
            let mut sums = [0.0; 3];
            let mut next_k = 0;
            for (rank, &i) in near.iter().take(k_max).enumerate() {
                let e = rows[i].errors.as_array();
                for t in 0..3 {
                    sums[t] += e[t];
                }
                while next_k < ks.len() && ks[next_k] == rank + 1 {
                    for t in 0..3 {
                        abs_err[t][next_k] += (sums[t] / ks[next_k] as f64 - truth[t]).abs();
                    }
                    next_k += 1;
                }
            }
        }
    }
    let k = std::array::from_fn(|t| {
        let mut best = 0;
        for j in 1..ks.len() {
            if abs_err[t][j] < abs_err[t][best] {
                best = j;
            }
        }
        ks[best]
    });

    Ok(ReliabilityModel {
        format_version: format_version(MODEL_FORMAT_MAJOR),
        whitening,
        rows: rows.to_vec(),
        k,
        seed: options.seed,
        whitened,
    })
}

impl ReliabilityModel {
    pub fn whitened(&self) -> &[[f64; 3]] {
        &self.whitened
    }

    fn check_fitted(&self) -> Result<()> {
        if self.rows.is_empty() || self.whitened.len() != self.rows.len() {
            return Err(Error::InsufficientData("reliability model is not fitted".into()));
        }
        if self.k.iter().any(|&k| k == 0 || k > self.rows.len()) {
            return Err(Error::InvalidConfig(format!("K {:?} outside [1, {}]", self.k, self.rows.len())));
        }
        Ok(())
    }

    /// Predicts errors using explicit per-target neighbour counts.
    pub fn predict_with_k(&self, cues: &ReliabilityCues, k: [usize; 3]) -> Result<ErrorTargets> {
        self.check_fitted()?;
        if k.iter().any(|&k| k == 0 || k > self.rows.len()) {
            return Err(Error::InvalidConfig(format!("K {k:?} outside [1, {}]", self.rows.len())));
        }
        let query = self.whitening.apply(&cues.as_array());
        let all: Vec<usize> = (0..self.rows.len()).collect();
        let near = neighbours(&self.whitened, &all, &query);
        Ok(ErrorTargets::from_array(std::array::from_fn(|t| {
            near[..k[t]].iter().map(|&i| self.rows[i].errors.as_array()[t]).sum::<f64>() / k[t] as f64
        })))
    }

    pub fn predict(&self, cues: &ReliabilityCues) -> Result<ErrorTargets> {
        self.predict_with_k(cues, self.k)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut model: ReliabilityModel = serde_json::from_str(s)?;
        check_version(&model.format_version, MODEL_FORMAT_MAJOR)?;
        validate_rows(&model.rows)?;
        model.whitened = model.rows.iter().map(|r| model.whitening.apply(&r.cues.as_array())).collect();
        model.check_fitted()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Convenience wrapper for [`ReliabilityModel::predict`].
pub fn predict(model: &ReliabilityModel, cues: &ReliabilityCues) -> Result<ErrorTargets> {
    model.predict(cues)
}

/// Indices of the `⌈fraction·n/100⌉` entries with the lowest predicted error,
/// returned in their original order. Ties go to the lower index.
pub fn gate(predicted: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 100.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let n = predicted.len();
    // Guard the ceiling against representation error, e.g. 0.29·100 > 29.
    let keep = ((fraction * n as f64 / 100.0) - 1e-9).ceil().max(0.0) as usize;
    let keep = keep.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| predicted[a].total_cmp(&predicted[b]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order[..keep].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Serialize, Deserialize)]
struct TrainingRecord {
    #[serde(default)]
    id: String,
    min_segments: usize,
    grid_entropy: f64,
    mean_loglik: f64,
    roll_err: f64,
    tilt_err: f64,
    focal_err: f64,
}

/// Writes training rows as CSV with columns
/// `id,min_segments,grid_entropy,mean_loglik,roll_err,tilt_err,focal_err`.
pub fn write_training_csv<W: std::io::Write>(writer: W, rows: &[(String, TrainingRow)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (id, r) in rows {
        w.serialize(TrainingRecord {
            id: id.clone(),
            min_segments: r.cues.min_segments,
            grid_entropy: r.cues.grid_entropy,
            mean_loglik: r.cues.mean_loglik,
            roll_err: r.errors.roll,
            tilt_err: r.errors.tilt,
            focal_err: r.errors.focal,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV written by [`write_training_csv`]; the `id` column is optional.
pub fn read_training_csv<R: std::io::Read>(reader: R) -> Result<Vec<TrainingRow>> {
    let mut rows = Vec::new();
    for (i, rec) in csv::Reader::from_reader(reader).deserialize::<TrainingRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(format!("training row {}: {e}", i + 1)))?;
        let row = TrainingRow {
            cues: ReliabilityCues {
                min_segments: rec.min_segments,
                grid_entropy: rec.grid_entropy,
                mean_loglik: rec.mean_loglik,
            },
            errors: ErrorTargets { roll: rec.roll_err, tilt: rec.tilt_err, focal: rec.focal_err },
        };
        if !row.cues.as_array().iter().chain(&row.errors.as_array()).all(|v| v.is_finite()) {
            return Err(Error::Schema(format!("training row {}: non-finite value", i + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(c: [f64; 3], e: [f64; 3]) -> TrainingRow {
        TrainingRow {
            cues: ReliabilityCues { min_segments: c[0] as usize, grid_entropy: c[1], mean_loglik: c[2] },
            errors: ErrorTargets::from_array(e),
        }
    }

    fn spread_rows(n: usize) -> Vec<TrainingRow> {
        (0..n)
            .map(|i| {
                let x = i as f64;
                row([(i * 7 % 13) as f64, (x * 0.37).sin() + 1.5, -2.0 - (x * 0.11).cos()], [x, 2.0 * x, 3.0])
            })
            .collect()
    }

    #[test]
    fn entropy_limits() {
        let uniform = vec![-3.5; 4096];
        assert_relative_eq!(grid_entropy(&uniform), (4096f64).ln(), max_relative = 1e-12);
        let mut peaked = vec![-1000.0; 16];
        peaked[3] = 0.0;
        assert!(grid_entropy(&peaked) < 1e-300);
        assert_eq!(grid_entropy(&[]), 0.0);
    }

    #[test]
    fn min_segments_cue() {
        let mk = |label| SegmentScore { index: 0, likelihoods: [0.0; 4], mixture: 1.0, label };
        let mut scores = Vec::new();
        scores.extend((0..10).map(|_| mk(ProcessLabel::Vertical)));
        scores.extend((0..20).map(|_| mk(ProcessLabel::Horizontal1)));
        scores.extend((0..30).map(|_| mk(ProcessLabel::Horizontal2)));
        scores.extend((0..2).map(|_| mk(ProcessLabel::Background)));
        let cues = compute_cues(&scores, -124.0, 1.0, &[0.0, 0.0], LoglikNormalization::SegmentCount);
        assert_eq!(cues.min_segments, 10);
        assert_relative_eq!(cues.mean_loglik, -2.0);
        assert_relative_eq!(cues.grid_entropy, 2f64.ln());
        let by_length = compute_cues(&scores, -124.0, 31.0, &[0.0], LoglikNormalization::TotalLength);
        assert_relative_eq!(by_length.mean_loglik, -4.0);
    }

    #[test]
    fn whitening_has_identity_covariance() {
        let rows = spread_rows(50);
        let raw: Vec<[f64; 3]> = rows.iter().map(|r| r.cues.as_array()).collect();
        let w = Whitening::fit(&raw).unwrap();
        let z: Vec<[f64; 3]> = raw.iter().map(|x| w.apply(x)).collect();
        let n = z.len() as f64;
        for a in 0..3 {
            let mean = z.iter().map(|v| v[a]).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            for b in 0..3 {
                let cov = z.iter().map(|v| v[a] * v[b]).sum::<f64>() / n;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((cov - expected).abs() < 1e-6, "cov[{a}][{b}] = {cov}");
            }
        }
        for x in &raw {
            let back = w.invert(&w.apply(x));
            for i in 0..3 {
                assert!((back[i] - x[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_targets_predict_constant() {
        let rows: Vec<TrainingRow> = spread_rows(30).into_iter().map(|r| TrainingRow { errors: ErrorTargets::from_array([0.7, 0.7, 0.7]), ..r }).collect();
        let model = fit_model(&rows, &FitOptions::default()).unwrap();
        let q = ReliabilityCues { min_segments: 3, grid_entropy: 0.2, mean_loglik: -1.0 };
        for k in [1, 5, 17] {
            let p = model.predict_with_k(&q, [k; 3]).unwrap();
            assert_relative_eq!(p.roll, 0.7, epsilon = 1e-12);
            assert_relative_eq!(p.focal, 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn training_point_query_with_k1_is_exact() {
        let rows = spread_rows(40);
        let model = fit_model(&rows, &FitOptions::default()).unwrap();
        let p = model.predict_with_k(&rows[17].cues, [1; 3]).unwrap();
        assert_eq!(p, rows[17].errors);
    }

    #[test]
    fn equidistant_pair_averages() {
        // Rows 0 and 1 straddle the query at (1, 0, 0); the rest are far away.
        let mut rows = vec![row([0.0, 0.0, 0.0], [1.0; 3]), row([2.0, 0.0, 0.0], [3.0; 3])];
        for i in 2..10 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(row([10.0 * i as f64, sign, if i % 4 < 2 { 1.0 } else { -1.0 }], [100.0; 3]));
        }
        let model = fit_model(&rows, &FitOptions::default()).unwrap();
        let q = ReliabilityCues { min_segments: 1, grid_entropy: 0.0, mean_loglik: 0.0 };
        let p = model.predict_with_k(&q, [2; 3]).unwrap();
        assert_relative_eq!(p.roll, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_needs_enough_rows() {
        assert!(matches!(fit_model(&spread_rows(9), &FitOptions::default()), Err(Error::InsufficientData(_))));
        let mut rows = spread_rows(20);
        rows[3].errors.roll = f64::NAN;
        assert!(fit_model(&rows, &FitOptions::default()).is_err());
    }

    #[test]
    fn chosen_k_fits_training_size() {
        let model = fit_model(&spread_rows(12), &FitOptions::default()).unwrap();
        assert!(model.k.iter().all(|&k| (1..=12).contains(&k)));
    }

    #[test]
    fn model_json_round_trip() {
        let model = fit_model(&spread_rows(25), &FitOptions::default()).unwrap();
        let back = ReliabilityModel::from_json_str(&model.to_json_string().unwrap()).unwrap();
        assert_eq!(back.k, model.k);
        let q = ReliabilityCues { min_segments: 4, grid_entropy: 1.0, mean_loglik: -2.5 };
        assert_eq!(back.predict(&q).unwrap(), model.predict(&q).unwrap());
        let bumped = model.to_json_string().unwrap().replace("\"1.0\"", "\"9.0\"");
        assert!(ReliabilityModel::from_json_str(&bumped).is_err());
    }

    #[test]
    fn unfitted_model_rejected() {
        let model = fit_model(&spread_rows(25), &FitOptions::default()).unwrap();
        let mut json: serde_json::Value = serde_json::from_str(&model.to_json_string().unwrap()).unwrap();
        json["rows"] = serde_json::json!([]);
        assert!(ReliabilityModel::from_json_str(&json.to_string()).is_err());
    }

    #[test]
    fn gate_examples() {
        let pred = [0.4, 0.1, 0.3, 0.2];
        assert_eq!(gate(&pred, 100.0).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(gate(&pred, 25.0).unwrap(), vec![1]);
        assert_eq!(gate(&pred, 50.0).unwrap(), vec![1, 3]);
        assert_eq!(gate(&pred, 30.0).unwrap(), vec![1, 3]);
        assert!(matches!(gate(&pred, 0.0), Err(Error::InvalidFraction(_))));
        assert!(gate(&pred, 100.5).is_err());
        assert_eq!(gate(&[0.5, 0.5, 0.5], 34.0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn training_csv_round_trip() {
        let row = TrainingRow {
            cues: ReliabilityCues { min_segments: 4, grid_entropy: 1.5, mean_loglik: -2.25 },
            errors: ErrorTargets { roll: 0.5, tilt: 1.0, focal: 3.0 },
        };
        let mut buf = Vec::new();
        write_training_csv(&mut buf, &[("a".to_string(), row)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,min_segments,grid_entropy,mean_loglik,roll_err,tilt_err,focal_err\n"));
        assert_eq!(read_training_csv(text.as_bytes()).unwrap(), vec![row]);
        let no_id = "min_segments,grid_entropy,mean_loglik,roll_err,tilt_err,focal_err\n4,1.5,-2.25,0.5,1,3\n";
        assert_eq!(read_training_csv(no_id.as_bytes()).unwrap(), vec![row]);
        assert!(read_training_csv("min_segments\nx\n".as_bytes()).is_err());
    }
}
