use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no visible keypoints")]
    NoVisibleKeypoints,

    #[error("degenerate box (zero area)")]
    DegenerateBox,

    #[error("zero-norm embedding")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("gallery is empty")]
    EmptyGallery,

    #[error("gallery holds a single class; at least two are required")]
    SingleClass,

    #[error("frame {got} is not after previously processed frame {last}")]
    OutOfOrderFrame { last: u64, got: u64 },

    #[error("frame range mismatch: output spans {output} frames, ground truth has {gt}")]
    FrameRangeMismatch { output: u64, gt: u64 },

    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{path}:{line}: frame {frame} does not follow frame {prev}")]
    NonMonotonicFrame {
        path: String,
        line: usize,
        prev: u64,
        frame: u64,
    },

    #[error("{path}: embedding dimension mismatch: expected {expected}, got {got}")]
    EmbeddingDimMismatch { path: String, expected: usize, got: usize },

    #[error("{path}:{line}: label `{label}` appears twice in frame {frame}")]
    DuplicateLabelInFrame {
        path: String,
        line: usize,
        frame: u64,
        label: String,
    },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    VersionMismatch { path: String, found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.to_string(),
        }
    }
}
