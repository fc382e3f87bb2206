use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("duplicate id {id:?} in manifest")]
    DuplicateId { id: String },

    #[error("label {raw:?} is empty after normalization")]
    EmptyLabel { raw: String },

    #[error("invalid corner quad: {0}")]
    InvalidQuad(String),

    #[error("rectification failed: {0}")]
    Rectify(String),

    #[error("image has a zero dimension")]
    EmptyImage,

    #[error("dimension mismatch: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: u32,
        a_h: u32,
        b_w: u32,
        b_h: u32,
    },

    #[error("no canonical image for id {id:?}")]
    MissingImage { id: String },

    #[error("id {id:?} is not covered by the split assignment")]
    UnassignedId { id: String },

    #[error("duplicate graph has no edges")]
    EmptyEdgeSet,

    #[error("invalid split spec: {0}")]
    SplitSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("no glyph for character {ch:?}")]
    MissingGlyph { ch: char },

    #[error("metrics error: {0}")]
    Metrics(String),
}

pub type Result<T> = std::result::Result<T, Error>;
