//! Leakage auditing: how many test images have duplicates in the training
//! set, within one split or across two manifests.
//!
//! Leakage is evaluated at the group level: a test image counts as leaked
//! when its duplicate group contains at least one training image, whether or
//! not the two are directly connected by an edge. Validation/test duplicates
//! are reported as informational counts but do not count as leakage.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dedup::{
    build_duplicate_graph, distance_percentiles, DuplicateEdge, DuplicateGraph, PercentilePoint,
};
use crate::imaging::CanonicalImage;
use crate::manifest::{DatasetManifest, ImageRecord, Split, SplitAssignment};
use crate::{Error, Result};

/// Percentile ranks reported by default.
pub const REPORT_PERCENTILES: [f64; 3] = [10.0, 50.0, 90.0];

/// Maximum number of exemplar pairs attached to a report.
pub const MAX_EXEMPLARS: usize = 20;

/// Informational counts that do not enter the leakage fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditInfo {
    pub total_train: usize,
    pub total_validation: usize,
    /// Test images whose duplicate group contains a validation image.
    pub test_with_validation_duplicates: usize,
}

/// Per-split leakage statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub total_test: usize,
    /// Test images with at least one duplicate group-mate in train.
    pub leaked_test: usize,
    pub leaked_fraction: f64,
    /// Direct train-test edges under the threshold.
    pub duplicate_edge_count: usize,
    /// Records excluded from bucketing for lack of a label.
    pub unbucketable: usize,
    pub percentiles: Vec<PercentilePoint>,
    /// Closest train-test pairs, for human review.
    pub exemplars: Vec<DuplicateEdge>,
    pub info: AuditInfo,
}

impl LeakageReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Quantify train-test leakage of `assignment` under `graph`.
///
/// Every id in the graph must be covered by the assignment.
pub fn leakage_report(graph: &DuplicateGraph, assignment: &SplitAssignment) -> Result<LeakageReport> {
    for id in graph.groups.keys() {
        if assignment.get(id).is_none() {
            return Err(Error::UnassignedId { id: id.clone() });
        }
    }

    let mut total_test = 0;
    let mut total_train = 0;
    let mut total_validation = 0;
    for split in assignment.assignment.values() {
        match split {
            Split::Train => total_train += 1,
            Split::Validation => total_validation += 1,
            Split::Test => total_test += 1,
        }
    }
    if total_test == 0 {
        return Err(Error::Config("assignment contains no test images".into()));
    }

    // Which groups touch train / validation.
    let mut group_has_train: BTreeMap<&str, bool> = BTreeMap::new();
    let mut group_has_validation: BTreeMap<&str, bool> = BTreeMap::new();
    for (id, gid) in &graph.groups {
        match assignment.get(id) {
            Some(Split::Train) => {
                group_has_train.insert(gid.as_str(), true);
            }
            Some(Split::Validation) => {
                group_has_validation.insert(gid.as_str(), true);
            }
            _ => {}
        }
    }

    let mut leaked_test = 0;
    let mut test_with_validation = 0;
    for (id, gid) in &graph.groups {
        if assignment.get(id) != Some(Split::Test) {
            continue;
        }
        if group_has_train.get(gid.as_str()).copied().unwrap_or(false) {
            leaked_test += 1;
        }
        if group_has_validation
            .get(gid.as_str())
            .copied()
            .unwrap_or(false)
        {
            test_with_validation += 1;
        }
    }

    let mut cross_edges: Vec<&DuplicateEdge> = graph
        .edges
        .iter()
        .filter(|e| {
            matches!(
                (assignment.get(&e.a), assignment.get(&e.b)),
                (Some(Split::Train), Some(Split::Test)) | (Some(Split::Test), Some(Split::Train))
            )
        })
        .collect();
    let duplicate_edge_count = cross_edges.len();
    cross_edges.sort_by(|x, y| {
        x.distance
            .partial_cmp(&y.distance)
            .expect("finite distances")
            .then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b)))
    });
    let exemplars: Vec<DuplicateEdge> = cross_edges
        .into_iter()
        .take(MAX_EXEMPLARS)
        .cloned()
        .collect();

    let percentiles = if graph.edges.is_empty() {
        Vec::new()
    } else {
        distance_percentiles(graph, &REPORT_PERCENTILES)?
    };

    Ok(LeakageReport {
        total_test,
        leaked_test,
        leaked_fraction: leaked_test as f64 / total_test as f64,
        duplicate_edge_count,
        unbucketable: graph.unbucketable,
        percentiles,
        exemplars,
        info: AuditInfo {
            total_train,
            total_validation,
            test_with_validation_duplicates: test_with_validation,
        },
    })
}

fn namespaced(manifest: &DatasetManifest) -> Vec<ImageRecord> {
    manifest
        .records
        .iter()
        .map(|r| ImageRecord {
            id: format!("{}/{}", manifest.name, r.id),
            ..r.clone()
        })
        .collect()
}

/// Audit manifest `b` against manifest `a`: all of `a` is treated as train,
/// all of `b` as test, and the duplicate graph is built jointly so label
/// buckets span both manifests. Ids are namespaced by manifest name, so the
/// two names must differ.
pub fn cross_manifest_audit(
    a: &DatasetManifest,
    images_a: &HashMap<String, CanonicalImage>,
    b: &DatasetManifest,
    images_b: &HashMap<String, CanonicalImage>,
    threshold: f64,
) -> Result<LeakageReport> {
    if a.name == b.name {
        return Err(Error::Config(format!(
            "manifests share the name {:?}; ids cannot be namespaced apart",
            a.name
        )));
    }
    let mut records = namespaced(a);
    records.extend(namespaced(b));
    let joint = DatasetManifest::new(format!("{}+{}", a.name, b.name), records)?;

    let mut images: HashMap<String, CanonicalImage> =
        HashMap::with_capacity(images_a.len() + images_b.len());
    for (id, img) in images_a {
        images.insert(format!("{}/{}", a.name, id), img.clone());
    }
    for (id, img) in images_b {
        images.insert(format!("{}/{}", b.name, id), img.clone());
    }

    let graph = build_duplicate_graph(&joint, &images, threshold)?;

    let mut assignment = SplitAssignment::new("cross-manifest", 0);
    for r in &a.records {
        assignment
            .assignment
            .insert(format!("{}/{}", a.name, r.id), Split::Train);
    }
    for r in &b.records {
        assignment
            .assignment
            .insert(format!("{}/{}", b.name, r.id), Split::Test);
    }

    leakage_report(&graph, &assignment)
}
