//! Versioned JSON artifacts and the segment importers.
//!
//! Every JSON artifact carries a `format_version` string `"MAJOR.MINOR"`.
//! Readers accept any minor version of the major version they know and reject
//! everything else.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deviation::LineSegment;
use crate::error::{Error, Result};
use crate::geometry::{CameraParams, EulerAngles};
use crate::likelihood::ProcessLabel;
use crate::reliability::{ErrorTargets, ReliabilityCues};
use crate::search::CalibrationResult;

pub const SEGMENTS_FORMAT_MAJOR: u32 = 1;
pub const RESULT_FORMAT_MAJOR: u32 = 1;

pub fn format_version(major: u32) -> String {
    format!("{major}.0")
}

/// Rejects `found` unless its major component equals `expected_major`.
pub fn check_version(found: &str, expected_major: u32) -> Result<()> {
    let major = found.split('.').next().and_then(|m| m.trim().parse::<u32>().ok());
    match major {
        Some(m) if m == expected_major => Ok(()),
        _ => Err(Error::UnsupportedVersion { found: found.to_string(), expected: expected_major }),
    }
}

/// Camera parameters as written to and read from files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub pan: f64,
    pub roll: f64,
    pub tilt: f64,
    pub hfov_deg: f64,
    pub focal_px: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraRecord {
    pub fn from_params(params: &CameraParams) -> Self {
        let e = params.euler();
        Self {
            pan: e.pan,
            roll: e.roll,
            tilt: e.tilt,
            hfov_deg: params.hfov_deg(),
            focal_px: params.intrinsics.focal_px,
            width: params.intrinsics.width,
            height: params.intrinsics.height,
        }
    }

    pub fn angles(&self) -> EulerAngles {
        EulerAngles::new(self.pan, self.roll, self.tilt)
    }

    /// Rebuilds the parameters from the Euler angles and the focal length.
    pub fn to_params(&self) -> Result<CameraParams> {
        Ok(CameraParams::new(
            crate::geometry::Intrinsics::new(self.focal_px, self.width, self.height)?,
            crate::geometry::Rotation::from_euler(&self.angles()),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    #[serde(flatten)]
    pub segment: LineSegment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<ProcessLabel>,
}

/// A set of segments from one image, optionally with ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFile {
    pub format_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    pub segments: Vec<SegmentEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<CameraRecord>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SegmentFileRepr {
    Versioned(SegmentFile),
    Bare(Vec<SegmentEntry>),
}

impl SegmentFile {
    pub fn new(segments: Vec<LineSegment>) -> Self {
        Self {
            format_version: format_version(SEGMENTS_FORMAT_MAJOR),
            id: None,
            width: None,
            height: None,
            segments: segments.into_iter().map(|segment| SegmentEntry { segment, label: None }).collect(),
            ground_truth: None,
        }
    }

    pub fn segments(&self) -> Vec<LineSegment> {
        self.segments.iter().map(|e| e.segment).collect()
    }

    pub fn labels(&self) -> Option<Vec<ProcessLabel>> {
        self.segments.iter().map(|e| e.label).collect()
    }

    /// Parses either a versioned segment file or a bare array of
    /// `{x1, y1, x2, y2}` objects.
    pub fn from_json_str(s: &str) -> Result<Self> {
        match serde_json::from_str::<SegmentFileRepr>(s) {
            Ok(SegmentFileRepr::Versioned(file)) => {
                check_version(&file.format_version, SEGMENTS_FORMAT_MAJOR)?;
                Ok(file)
            }
            Ok(SegmentFileRepr::Bare(entries)) => {
                let mut file = Self::new(Vec::new());
                file.segments = entries;
                Ok(file)
            }
            // Re-parse as the versioned form to surface a useful message.
            Err(_) => {
                let file: SegmentFile = serde_json::from_str(s)?;
                check_version(&file.format_version, SEGMENTS_FORMAT_MAJOR)?;
                Ok(file)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_json = text.trim_start().starts_with(['{', '[']);
        let mut file = if is_json {
            Self::from_json_str(&text)?
        } else {
            Self::new(parse_segment_table(&text)?)
        };
        if file.id.is_none() {
            file.id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(file)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads detector output: one segment per line, the first four numeric fields
/// being `x1 y1 x2 y2`, separated by commas and/or whitespace. Blank lines,
/// `#` comments and a non-numeric header line are skipped; extra columns (line
/// width, NFA, ...) are ignored.
pub fn parse_segment_table(text: &str) -> Result<Vec<LineSegment>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let numbers: Vec<f64> = fields.iter().map_while(|f| f.parse::<f64>().ok()).collect();
        if numbers.is_empty() && out.is_empty() {
            continue; // header
        }
        if numbers.len() < 4 {
            return Err(Error::Schema(format!("line {}: expected x1 y1 x2 y2, got '{line}'", lineno + 1)));
        }
        out.push(LineSegment::new(numbers[0], numbers[1], numbers[2], numbers[3])?);
    }
    Ok(out)
}

/// What `calibrate` writes: the estimate, its cues and the segment labels,
/// optionally annotated with predicted errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub format_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub measure: crate::deviation::DeviationMeasure,
    pub fast: bool,
    pub camera: CameraRecord,
    pub objective: f64,
    pub cues: ReliabilityCues,
    pub degenerate_scene: bool,
    pub wall_time_s: f64,
    pub labels: Vec<ProcessLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_errors: Option<ErrorTargets>,
}

impl ResultFile {
    pub fn from_result(
        id: Option<String>,
        result: &CalibrationResult,
        measure: crate::deviation::DeviationMeasure,
        fast: bool,
    ) -> Self {
        let mut camera = CameraRecord::from_params(&result.params);
        // The search point carries the angles without a matrix round trip.
        camera.pan = result.point.pan;
        camera.roll = result.point.roll;
        camera.tilt = result.point.tilt;
        camera.hfov_deg = result.point.hfov;
        Self {
            format_version: format_version(RESULT_FORMAT_MAJOR),
            id,
            measure,
            fast,
            camera,
            objective: result.objective,
            cues: result.cues,
            degenerate_scene: result.degenerate_scene,
            wall_time_s: result.wall_time_s,
            labels: result.labels(),
            predicted_errors: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(s)?;
        check_version(&file.format_version, RESULT_FORMAT_MAJOR)?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_check() {
        assert!(check_version("1.0", 1).is_ok());
        assert!(check_version("1.7", 1).is_ok());
        assert!(check_version("2.0", 1).is_err());
        assert!(check_version("garbage", 1).is_err());
    }

    #[test]
    fn bare_array_is_accepted() {
        let file = SegmentFile::from_json_str(r#"[{"x1":0,"y1":0,"x2":3,"y2":4}]"#).unwrap();
        assert_eq!(file.segments().len(), 1);
        assert_eq!(file.segments()[0].length(), 5.0);
    }

    #[test]
    fn versioned_file_round_trip() {
        let mut file = SegmentFile::new(vec![LineSegment::new(1.0, 2.0, 3.0, 4.0).unwrap()]);
        file.segments[0].label = Some(ProcessLabel::Horizontal2);
        file.width = Some(640);
        let back = SegmentFile::from_json_str(&file.to_json_string().unwrap()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.labels(), Some(vec![ProcessLabel::Horizontal2]));
    }

    #[test]
    fn unknown_major_version_rejected() {
        let text = r#"{"format_version":"3.1","segments":[]}"#;
        assert!(matches!(SegmentFile::from_json_str(text), Err(Error::UnsupportedVersion { .. })));
    }

    #[test]
    fn degenerate_segment_in_file_rejected() {
        assert!(SegmentFile::from_json_str(r#"[{"x1":1,"y1":1,"x2":1,"y2":1}]"#).is_err());
    }

    #[test]
    fn segment_table_formats() {
        let lsd = "10 20 30 40 1.5 0.1 -3.2\n\n# comment\n5 5 6 9 1 1 1\n";
        assert_eq!(parse_segment_table(lsd).unwrap().len(), 2);
        let csv = "x1,y1,x2,y2\n1,2,3,4\n5.5, 6, 7, 8\n";
        let segs = parse_segment_table(csv).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].p1().x, 5.5);
        assert!(parse_segment_table("1,2,3\n").is_err());
    }
}
