use std::fmt;

/// Errors produced by every stage of the library.
///
/// The variants are grouped by how a caller should react: contract
/// violations are caller bugs, degenerate inputs are data problems, and
/// the format/corruption/io family covers anything read from disk.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty prediction: no threshold produced an isosurface")]
    EmptyPrediction,

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt data: {0}")]
    Corruption(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of an error, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Contract,
    Degenerate,
    Io,
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn corruption(msg: impl Into<String>) -> Self {
        Error::Corruption(msg.into())
    }

    /// Wrap this error with the pipeline stage it came from.
    pub fn in_stage(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Contract(_) => ErrorKind::Contract,
            Error::Degenerate(_) | Error::EmptyPrediction => ErrorKind::Degenerate,
            Error::Format(_) | Error::Corruption(_) | Error::Io(_) | Error::Json(_) => {
                ErrorKind::Io
            }
            Error::Stage { source, .. } => source.kind(),
        }
    }

    /// Process exit code: 2 contract, 3 degenerate input, 4 I/O or format.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Contract => 2,
            ErrorKind::Degenerate => 3,
            ErrorKind::Io => 4,
        }
    }
}

/// Named pipeline stages, used to annotate propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Unproject,
    Normalize,
    Mesh,
    ToSpherical,
    Inpaint,
    SphericalToVoxels,
    DepthToVoxels,
    Fuse,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Unproject => "unproject",
            Stage::Normalize => "normalize",
            Stage::Mesh => "mesh",
            Stage::ToSpherical => "to_spherical",
            Stage::Inpaint => "inpaint",
            Stage::SphericalToVoxels => "spherical_to_voxels",
            Stage::DepthToVoxels => "depth_to_voxels",
            Stage::Fuse => "fuse",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_kind_through_stage_wrapping() {
        assert_eq!(Error::contract("x").exit_code(), 2);
        assert_eq!(Error::degenerate("x").exit_code(), 3);
        assert_eq!(Error::EmptyPrediction.exit_code(), 3);
        assert_eq!(Error::format("x").exit_code(), 4);
        assert_eq!(Error::corruption("x").exit_code(), 4);
        let wrapped = Error::degenerate("flat").in_stage(Stage::Inpaint);
        assert_eq!(wrapped.exit_code(), 3);
        assert!(wrapped.to_string().contains("inpaint"));
    }
}
