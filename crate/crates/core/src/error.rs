use std::fmt;
use std::path::PathBuf;

/// Errors produced by the generation and evaluation pipeline.
#[derive(Debug)]
pub enum Error {
    /// A file could not be decoded (bad format, unsupported bit depth or color type).
    Decode { path: PathBuf, reason: String },
    /// An underlying I/O or encode failure.
    Io { context: String, source: std::io::Error },
    /// An argument violated a documented precondition.
    Argument(String),
    /// A configuration value or combination is invalid.
    Config(String),
    /// A file's contents do not match the expected layout.
    Format { path: PathBuf, reason: String },
    /// An elastic warp collapsed the kernel to zero mass; the caller resamples.
    DegenerateKernel,
    /// A blur mask is all-true or all-false, so partial blurring is meaningless.
    DegenerateMask,
    /// The inpainting hole covers the entire image.
    Uninpaintable,
    /// A metric is undefined for single-class ground truth.
    UndefinedMetric,
    /// A sample kept producing degenerate masks/kernels after repeated reseeding.
    SkipSample { id: String, attempts: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Decode { path, reason } => {
                write!(f, "cannot decode {}: {}", path.display(), reason)
            }
            Error::Io { context, source } => write!(f, "{}: {}", context, source),
            Error::Argument(msg) => write!(f, "invalid argument: {}", msg),
            Error::Config(msg) => write!(f, "invalid config: {}", msg),
            Error::Format { path, reason } => {
                write!(f, "bad file format {}: {}", path.display(), reason)
            }
            Error::DegenerateKernel => write!(f, "blur kernel degenerated to zero mass"),
            Error::DegenerateMask => write!(f, "blur mask is entirely true or entirely false"),
            Error::Uninpaintable => write!(f, "inpainting hole covers the entire image"),
            Error::UndefinedMetric => {
                write!(f, "metric undefined: ground truth contains a single class")
            }
            Error::SkipSample { id, attempts } => {
                write!(f, "sample {} skipped after {} degenerate attempts", id, attempts)
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}
