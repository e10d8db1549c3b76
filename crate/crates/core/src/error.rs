use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field of view {0} deg is outside (0, 180)")]
    FovOutOfRange(f64),

    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("degenerate line segment: endpoints coincide or back-project to parallel rays")]
    DegenerateSegment,

    #[error("vanishing point coincides with the segment midpoint")]
    DegenerateVanishingPoint,

    #[error("deviation must be non-negative, got {0}")]
    NegativeDeviation(f64),

    #[error("no segments")]
    NoSegments,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot place segments: {0}")]
    CannotPlaceSegments(String),

    #[error("malformed panorama: {0}")]
    MalformedPanorama(String),

    #[error("fraction {0} is outside (0, 100]")]
    InvalidFraction(f64),

    #[error("unsupported format version {found} (expected major version {expected})")]
    UnsupportedVersion { found: String, expected: u32 },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
