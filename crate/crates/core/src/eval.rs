//! Per-image error metrics, MAE tables, reliability-gated tables and
//! histograms.
//!
//! Pan is only defined modulo 90° for a Manhattan scene, so pans are folded
//! into `(-45, 45]` before they are compared.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{frame_angle_error, CameraParams};
use crate::reliability::{gate, ErrorTargets, Target};

/// Folds an angle in degrees into `(-45, 45]` modulo 90°.
pub fn fold_pan(pan: f64) -> f64 {
    let r = pan.rem_euclid(90.0);
    if r > 45.0 {
        r - 90.0
    } else {
        r
    }
}

/// Absolute pan difference after folding both pans.
pub fn pan_error(estimate: f64, truth: f64) -> f64 {
    fold_pan(fold_pan(estimate) - fold_pan(truth)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Roll,
    Tilt,
    Pan,
    FocalPct,
    FovPct,
    FrameDeg,
}

impl Metric {
    pub const ALL: [Metric; 6] = [Self::Roll, Self::Tilt, Self::Pan, Self::FocalPct, Self::FovPct, Self::FrameDeg];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Roll => "roll_deg",
            Self::Tilt => "tilt_deg",
            Self::Pan => "pan_deg",
            Self::FocalPct => "focal_pct",
            Self::FovPct => "fov_pct",
            Self::FrameDeg => "frame_deg",
        }
    }

    pub fn pick(&self, r: &ErrorRecord) -> f64 {
        match self {
            Self::Roll => r.roll,
            Self::Tilt => r.tilt,
            Self::Pan => r.pan,
            Self::FocalPct => r.focal_pct,
            Self::FovPct => r.fov_pct,
            Self::FrameDeg => r.frame_deg,
        }
    }
}

impl From<Target> for Metric {
    fn from(t: Target) -> Self {
        match t {
            Target::Roll => Self::Roll,
            Target::Tilt => Self::Tilt,
            Target::Focal => Self::FocalPct,
        }
    }
}

/// Absolute errors of one estimate. Angles in degrees, focal length and FOV in
/// percent of the true value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub roll: f64,
    pub tilt: f64,
    pub pan: f64,
    pub focal_pct: f64,
    pub fov_pct: f64,
    pub frame_deg: f64,
}

impl ErrorRecord {
    /// The three quantities the reliability model predicts.
    pub fn targets(&self) -> ErrorTargets {
        ErrorTargets { roll: self.roll, tilt: self.tilt, focal: self.focal_pct }
    }
}

pub fn per_image_errors(estimate: &CameraParams, truth: &CameraParams) -> ErrorRecord {
    let (e, t) = (estimate.euler(), truth.euler());
    let (fe, ft) = (estimate.intrinsics.focal_px, truth.intrinsics.focal_px);
    let (ve, vt) = (estimate.hfov_deg(), truth.hfov_deg());
    ErrorRecord {
        roll: (e.roll - t.roll).abs(),
        tilt: (e.tilt - t.tilt).abs(),
        pan: pan_error(e.pan, t.pan),
        focal_pct: 100.0 * (fe - ft).abs() / ft,
        fov_pct: 100.0 * (ve - vt).abs() / vt,
        frame_deg: frame_angle_error(&estimate.rotation, &truth.rotation),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero for a single value.
    pub se: f64,
    pub n: usize,
}

impl Summary {
    /// True when `se` is the single-sample convention rather than an estimate.
    pub fn se_undefined(&self) -> bool {
        self.n < 2
    }
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InsufficientData("cannot summarise an empty set".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Ok(Summary { mean, se, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: Metric,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Mean ± standard error of every metric.
pub fn aggregate(records: &[ErrorRecord]) -> Result<Vec<MetricRow>> {
    Metric::ALL
        .iter()
        .map(|&metric| {
            let values: Vec<f64> = records.iter().map(|r| metric.pick(r)).collect();
            Ok(MetricRow { metric, summary: summarize(&values)? })
        })
        .collect()
}

pub const GATE_FRACTIONS: [f64; 4] = [25.0, 50.0, 75.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatedRow {
    pub fraction: f64,
    pub target: Target,
    #[serde(flatten)]
    pub summary: Summary,
}

/// For each fraction and target, the error summary over the images whose
/// predicted error for that target is among the lowest `fraction` percent.
pub fn gated_table(records: &[ErrorRecord], predictions: &[ErrorTargets], fractions: &[f64]) -> Result<Vec<GatedRow>> {
    if predictions.len() != records.len() {
        return Err(Error::InsufficientData(format!(
            "{} records but {} predictions",
            records.len(),
            predictions.len()
        )));
    }
    let mut rows = Vec::with_capacity(fractions.len() * 3);
    for &fraction in fractions {
        for target in Target::ALL {
            let predicted: Vec<f64> = predictions.iter().map(|p| target.pick(p)).collect();
            let chosen = gate(&predicted, fraction)?;
            let metric = Metric::from(target);
            let values: Vec<f64> = chosen.iter().map(|&i| metric.pick(&records[i])).collect();
            rows.push(GatedRow { fraction, target, summary: summarize(&values)? });
        }
    }
    Ok(rows)
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Columns: `metric,mean,se,n`.
pub fn summary_csv(rows: &[MetricRow]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["metric", "mean", "se", "n"])?;
        for r in rows {
            w.write_record([r.metric.name().to_string(), r.summary.mean.to_string(), r.summary.se.to_string(), r.summary.n.to_string()])?;
        }
        Ok(())
    })
}

pub fn summary_text(rows: &[MetricRow]) -> String {
    let mut out = format!("{:<10} {:>22} {:>6}\n", "metric", "MAE ± SE", "n");
    for r in rows {
        let flag = if r.summary.se_undefined() { " (single sample)" } else { "" };
        let cell = format!("{:.3} ± {:.3}", r.summary.mean, r.summary.se);
        let _ = writeln!(out, "{:<10} {:>22} {:>6}{flag}", r.metric.name(), cell, r.summary.n);
    }
    out
}

fn target_name(t: Target) -> &'static str {
    Metric::from(t).name()
}

/// Columns: `fraction,target,mean,se,n`.
pub fn gated_csv(rows: &[GatedRow]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["fraction", "target", "mean", "se", "n"])?;
        for r in rows {
            w.write_record([
                r.fraction.to_string(),
                target_name(r.target).to_string(),
                r.summary.mean.to_string(),
                r.summary.se.to_string(),
                r.summary.n.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// One line per fraction, one column per target.
pub fn gated_text(rows: &[GatedRow]) -> String {
    let mut out = format!("{:>8}", "top %");
    for t in Target::ALL {
        let _ = write!(out, " {:>20}", target_name(t));
    }
    out.push('\n');
    for chunk in rows.chunks(Target::ALL.len()) {
        let _ = write!(out, "{:>8}", chunk[0].fraction);
        for r in chunk {
            let _ = write!(out, " {:>20}", format!("{:.3} ± {:.3}", r.summary.mean, r.summary.se));
        }
        out.push('\n');
    }
    out
}

/// `count` bins of equal `width` starting at `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo: f64,
    pub width: f64,
    pub count: usize,
}

impl BinSpec {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let spec = Self { lo, width: (hi - lo) / count as f64, count };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || !(self.width > 0.0) || !self.lo.is_finite() || !self.width.is_finite() {
            return Err(Error::InvalidConfig(format!("bad bin spec {self:?}")));
        }
        Ok(())
    }

    pub fn hi(&self) -> f64 {
        self.edge(self.count)
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: BinSpec,
    pub counts: Vec<usize>,
    /// Values outside `[lo, hi]`.
    pub below: usize,
    pub above: usize,
}

/// Fixed-width histogram; the top edge is included in the last bin.
pub fn histogram(values: &[f64], bins: BinSpec) -> Result<Histogram> {
    bins.validate()?;
    if values.is_empty() {
        return Err(Error::InsufficientData("cannot histogram an empty set".into()));
    }
    let mut counts = vec![0; bins.count];
    let (mut below, mut above) = (0, 0);
    let hi = bins.hi();
    for &v in values {
        if v < bins.lo {
            below += 1;
        } else if v > hi {
            above += 1;
        } else {
            let i = (((v - bins.lo) / bins.width).floor() as usize).min(bins.count - 1);
            counts[i] += 1;
        }
    }
    Ok(Histogram { bins, counts, below, above })
}

impl Histogram {
    /// Columns: `bin_lo,bin_hi,count`.
    pub fn to_csv(&self) -> Result<String> {
        csv_string(|w| {
            w.write_record(["bin_lo", "bin_hi", "count"])?;
            for (i, c) in self.counts.iter().enumerate() {
                w.write_record([self.bins.edge(i).to_string(), self.bins.edge(i + 1).to_string(), c.to_string()])?;
            }
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EulerAngles;

    fn cam(pan: f64, roll: f64, tilt: f64, hfov: f64) -> CameraParams {
        CameraParams::from_euler(&EulerAngles::new(pan, roll, tilt), hfov, 640, 480).unwrap()
    }

    #[test]
    fn identical_estimate_has_zero_error() {
        let c = cam(10.0, -3.0, 12.0, 70.0);
        let e = per_image_errors(&c, &c);
        for m in Metric::ALL {
            assert!(m.pick(&e).abs() < 1e-6, "{m:?}");
        }
    }

    #[test]
    fn focal_percentage() {
        use crate::geometry::{Intrinsics, Rotation};
        let est = CameraParams::new(Intrinsics::new(352.0, 640, 480).unwrap(), Rotation::identity());
        let truth = CameraParams::new(Intrinsics::new(320.0, 640, 480).unwrap(), Rotation::identity());
        assert!((per_image_errors(&est, &truth).focal_pct - 10.0).abs() < 1e-12);
    }

    #[test]
    fn pan_folding() {
        assert_eq!(pan_error(44.0, -44.0), 2.0);
        assert_eq!(fold_pan(135.0), 45.0);
        assert_eq!(fold_pan(-45.0), 45.0);
        assert_eq!(fold_pan(100.0), 10.0);
        assert_eq!(fold_pan(-100.0), -10.0);
    }

    #[test]
    fn folded_pan_error_agrees_with_frame_error() {
        // Pan differences are the frame error when roll and tilt vanish.
        let e = per_image_errors(&cam(44.0, 0.0, 0.0, 60.0), &cam(-44.0, 0.0, 0.0, 60.0));
        assert!((e.frame_deg - 2.0).abs() < 1e-9);
    }

    #[test]
    fn summary_arithmetic() {
        let s = summarize(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.se, s.n), (2.0, 1.0, 2));
        let single = summarize(&[4.0]).unwrap();
        assert_eq!(single.se, 0.0);
        assert!(single.se_undefined());
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn gated_full_fraction_equals_aggregate() {
        let records: Vec<ErrorRecord> =
            (0..9).map(|i| ErrorRecord { roll: i as f64, tilt: 2.0 * i as f64, focal_pct: 9.0 - i as f64, ..Default::default() }).collect();
        let preds: Vec<ErrorTargets> = records.iter().map(|r| r.targets()).collect();
        let rows = gated_table(&records, &preds, &GATE_FRACTIONS).unwrap();
        assert_eq!(rows.len(), 12);
        let all = aggregate(&records).unwrap();
        for r in rows.iter().filter(|r| r.fraction == 100.0) {
            let m = all.iter().find(|a| a.metric == Metric::from(r.target)).unwrap();
            assert_eq!(r.summary, m.summary);
        }
        // A perfect predictor gives non-decreasing errors with the fraction.
        for t in Target::ALL {
            let means: Vec<f64> = rows.iter().filter(|r| r.target == t).map(|r| r.summary.mean).collect();
            assert!(means.windows(2).all(|w| w[0] <= w[1]), "{t:?} {means:?}");
        }
        assert!(gated_table(&records, &preds[1..], &GATE_FRACTIONS).is_err());
    }

    #[test]
    fn histogram_edges_and_counts() {
        let spec = BinSpec::new(0.0, 10.0, 5).unwrap();
        let h = histogram(&[3.0], spec).unwrap();
        assert_eq!(h.counts, vec![0, 1, 0, 0, 0]);
        let h = histogram(&[0.0, 10.0, -1.0, 11.0, 9.99], spec).unwrap();
        assert_eq!(h.counts, vec![1, 0, 0, 0, 2]);
        assert_eq!((h.below, h.above), (1, 1));
        let csv = h.to_csv().unwrap();
        assert_eq!(csv.lines().next(), Some("bin_lo,bin_hi,count"));
        assert_eq!(csv.lines().nth(1), Some("0,2,1"));
        assert_eq!(csv.lines().nth(5), Some("8,10,2"));
        assert!(histogram(&[], spec).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = aggregate(&[ErrorRecord::default()]).unwrap();
        let csv = summary_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("metric,mean,se,n\nroll_deg,0,0,1\n"));
        assert!(summary_text(&rows).contains("single sample"));
    }
}
