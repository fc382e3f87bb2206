//! Dataset manifests, plate-text normalization and split files.
//!
//! A manifest is a flat UTF-8 CSV with the header
//! `id,path,label,subset,x1,y1,x2,y2,x3,y3,x4,y4`. The four quad columns
//! hold the plate corner coordinates (top-left, top-right, bottom-right,
//! bottom-left) and may all be empty when no corner annotation exists.
//! An empty `label` column marks the record as unlabeled; unlabeled records
//! are kept but excluded from duplicate bucketing.
//!
//! Split files are TSV, one `<id>\t<split>` line per image with split one of
//! `train`, `validation`, `test`, ids in lexicographic order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MANIFEST_HEADER: [&str; 12] = [
    "id", "path", "label", "subset", "x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4",
];

/// A normalized plate-text label: uppercase, no whitespace/hyphens/dots.
///
/// Non-ASCII characters (e.g. province glyphs on mainland-China plates) pass
/// through verbatim. Construction goes through [`normalize_label`], so a
/// `PlateText` is never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlateText(String);

impl PlateText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.0.chars()
    }

    pub fn char_count(&self) -> usize {
        self.0.chars().count()
    }
}

impl fmt::Display for PlateText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Normalize a raw label: uppercase ASCII letters, strip whitespace, hyphens
/// and dots, keep everything else verbatim.
///
/// Errors with [`Error::EmptyLabel`] when nothing survives normalization.
pub fn normalize_label(raw: &str) -> Result<PlateText> {
    let normalized: String = raw
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '-' && *c != '.')
        .map(|c| c.to_ascii_uppercase())
        .collect();
    if normalized.is_empty() {
        return Err(Error::EmptyLabel {
            raw: raw.to_string(),
        });
    }
    Ok(PlateText(normalized))
}

/// A 2D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Test whether segments `ab` and `cd` properly intersect (cross at an
/// interior point of both).
fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Plate corner annotation: four ordered corners, top-left, top-right,
/// bottom-right, bottom-left, in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadAnnotation {
    pub points: [Point; 4],
}

impl QuadAnnotation {
    /// Validate and build a quad. Corners must be finite and non-negative
    /// and form a simple (non-self-intersecting) quadrilateral with strictly
    /// positive area.
    pub fn new(points: [Point; 4]) -> Result<Self> {
        for p in &points {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidQuad("non-finite corner coordinate".into()));
            }
            if p.x < 0.0 || p.y < 0.0 {
                return Err(Error::InvalidQuad("negative corner coordinate".into()));
            }
        }
        let quad = QuadAnnotation { points };
        if quad.area() <= 0.0 {
            return Err(Error::InvalidQuad("zero-area quad".into()));
        }
        // Opposite edges of a simple quad never cross.
        let [p0, p1, p2, p3] = points;
        if segments_cross(p0, p1, p2, p3) || segments_cross(p1, p2, p3, p0) {
            return Err(Error::InvalidQuad("self-intersecting quad".into()));
        }
        Ok(quad)
    }

    /// Shoelace area in square pixels.
    pub fn area(&self) -> f64 {
        let p = &self.points;
        let mut acc = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            acc += p[i].x * p[j].y - p[j].x * p[i].y;
        }
        acc.abs() / 2.0
    }
}

/// One dataset image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: String,
    /// `None` marks an explicitly unlabeled record.
    pub label: Option<PlateText>,
    pub subset: String,
    pub quad: Option<QuadAnnotation>,
}

/// An ordered collection of [`ImageRecord`]s with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub records: Vec<ImageRecord>,
}

impl DatasetManifest {
    /// Build a manifest, rejecting duplicate ids.
    pub fn new(name: impl Into<String>, records: Vec<ImageRecord>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId { id: r.id.clone() });
            }
        }
        Ok(DatasetManifest {
            name: name.into(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

fn parse_quad_fields(fields: &[&str]) -> Result<Option<[f64; 8]>> {
    debug_assert_eq!(fields.len(), 8);
    if fields.iter().all(|f| f.trim().is_empty()) {
        return Ok(None);
    }
    let mut coords = [0.0f64; 8];
    for (i, raw) in fields.iter().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(Error::InvalidQuad(format!(
                "quad column {} is empty while others are set",
                MANIFEST_HEADER[4 + i]
            )));
        }
        coords[i] = trimmed.parse::<f64>().map_err(|_| {
            Error::InvalidQuad(format!(
                "non-numeric quad coordinate {:?} in column {}",
                trimmed,
                MANIFEST_HEADER[4 + i]
            ))
        })?;
    }
    Ok(Some(coords))
}

/// Load a manifest CSV. Labels are normalized on the way in; row order is
/// preserved. The manifest name is the file stem.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".to_string());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };

    {
        let headers = reader.headers().map_err(|e| csv_error(path, e))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != MANIFEST_HEADER {
            return Err(parse_err(
                1,
                format!("unexpected header {:?}", got.join(",")),
            ));
        }
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != MANIFEST_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", MANIFEST_HEADER.len(), row.len()),
            ));
        }
        let fields: Vec<&str> = row.iter().collect();
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(parse_err(line, "empty id".into()));
        }
        let label = if fields[2].trim().is_empty() {
            None
        } else {
            Some(
                normalize_label(fields[2])
                    .map_err(|e| parse_err(line, e.to_string()))?,
            )
        };
        let quad = match parse_quad_fields(&fields[4..12]) {
            Ok(None) => None,
            Ok(Some(c)) => Some(
                QuadAnnotation::new([
                    Point::new(c[0], c[1]),
                    Point::new(c[2], c[3]),
                    Point::new(c[4], c[5]),
                    Point::new(c[6], c[7]),
                ])
                .map_err(|e| parse_err(line, e.to_string()))?,
            ),
            Err(e) => return Err(parse_err(line, e.to_string())),
        };
        records.push(ImageRecord {
            id: id.to_string(),
            path: fields[1].to_string(),
            label,
            subset: fields[3].to_string(),
            quad,
        });
    }

    DatasetManifest::new(name, records)
}

/// Write a manifest back to CSV (inverse of [`load_manifest`] up to label
/// normalization, which is idempotent).
pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    writer
        .write_record(MANIFEST_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in &manifest.records {
        let mut fields: Vec<String> = vec![
            r.id.clone(),
            r.path.clone(),
            r.label.as_ref().map(|l| l.to_string()).unwrap_or_default(),
            r.subset.clone(),
        ];
        match &r.quad {
            Some(q) => {
                for p in &q.points {
                    fields.push(format!("{}", p.x));
                    fields.push(format!("{}", p.y));
                }
            }
            None => fields.extend(std::iter::repeat(String::new()).take(8)),
        }
        writer
            .write_record(&fields)
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            path: path.display().to_string(),
            line: pos.line(),
            msg: e.to_string(),
        },
        None => Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        },
    }
}

/// The three split targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A train/validation/test assignment over image ids, with the strategy
/// and seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<String, Split>,
    pub strategy: String,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn new(strategy: impl Into<String>, seed: u64) -> Self {
        SplitAssignment {
            assignment: BTreeMap::new(),
            strategy: strategy.into(),
            seed,
        }
    }

    pub fn get(&self, id: &str) -> Option<Split> {
        self.assignment.get(id).copied()
    }

    pub fn ids_in(&self, split: Split) -> impl Iterator<Item = &str> {
        self.assignment
            .iter()
            .filter(move |(_, s)| **s == split)
            .map(|(id, _)| id.as_str())
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|s| **s == split).count()
    }

    /// Check that every assigned id exists in `manifest`.
    pub fn check_against(&self, manifest: &DatasetManifest) -> Result<()> {
        let known: std::collections::HashSet<&str> =
            manifest.records.iter().map(|r| r.id.as_str()).collect();
        for id in self.assignment.keys() {
            if !known.contains(id.as_str()) {
                return Err(Error::UnassignedId { id: id.clone() });
            }
        }
        Ok(())
    }
}

/// Write a split file: one `<id>\t<split>` line per image, ids in
/// lexicographic order. Output is byte-deterministic for a given assignment.
pub fn write_split(assignment: &SplitAssignment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (id, split) in &assignment.assignment {
        writeln!(out, "{}\t{}", id, split).expect("write to Vec cannot fail");
    }
    fs::write(path, out).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Read a split file written by [`write_split`].
pub fn load_split(path: impl AsRef<Path>, strategy: &str, seed: u64) -> Result<SplitAssignment> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut assignment = SplitAssignment::new(strategy, seed);
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: (lineno + 1) as u64,
            msg,
        };
        let (id, split) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `<id>\\t<split>`".into()))?;
        let split =
            Split::parse(split).ok_or_else(|| parse_err(format!("unknown split {:?}", split)))?;
        if assignment.assignment.insert(id.to_string(), split).is_some() {
            return Err(parse_err(format!("id {:?} assigned twice", id)));
        }
    }
    Ok(assignment)
}
