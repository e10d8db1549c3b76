//! Joint focal length and rotation estimation from line segments in a
//! Manhattan scene.
//!
//! Each segment is explained as coming from one of the three vanishing points
//! of `K·R` or from a uniform background process. The camera maximising the
//! mixture likelihood is found by a coarse grid followed by bounded local
//! ascent. A nearest-neighbour regressor on cues of the fit predicts how
//! accurate an estimate is likely to be.

pub mod curate;
pub mod deviation;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod likelihood;
pub mod reliability;
pub mod search;
pub mod synth;

pub use deviation::{DeviationMeasure, LineSegment};
pub use error::{Error, Result};
pub use geometry::{CameraParams, EulerAngles, Intrinsics, Rotation};
pub use likelihood::{MixtureConfig, ProcessLabel};
pub use search::{calibrate, CalibrationResult, SearchConfig};
