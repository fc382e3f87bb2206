//! Dataset-integrity toolkit for labeled license-plate image collections.
//!
//! The crate covers the full pipeline for keeping recognition benchmarks
//! honest when the same physical plate shows up in more than one photo:
//!
//! 1. [`manifest`] — flat CSV manifests, plate-text normalization, split files.
//! 2. [`imaging`] — quad rectification and fixed-size grayscale canonicalization.
//! 3. [`dedup`] — label-bucketed pairwise pixel distances and duplicate groups.
//! 4. [`audit`] — train/test leakage reports, within one split or across manifests.
//! 5. [`splitter`] — duplicate-free split strategies plus verification.
//! 6. [`synthgen`] — template-based synthetic plate rendering and augmentation.
//! 7. [`metrics`] — recognition rate, Gap and Rel. Gap tables from prediction files.
//!
//! Every randomized operation takes an explicit 64-bit seed and feeds it
//! through the same generator (see [`rng`]), so outputs are byte-reproducible.

pub mod audit;
pub mod dedup;
mod error;
pub mod imaging;
pub mod manifest;
pub mod metrics;
pub mod rng;
pub mod splitter;
pub mod synthgen;

pub use error::{Error, Result};
