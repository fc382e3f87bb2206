//! Near-duplicate detection: label-bucketed candidate pairs, pixel-space
//! distances, thresholded edges and connected-component grouping.
//!
//! Candidate pairs are restricted to records sharing an identical normalized
//! label — different photos of one plate always agree on the text, so the
//! label is a cheap exact prefilter that turns the quadratic all-pairs
//! problem into small per-bucket blocks. Distances are RMS-normalized
//! Euclidean (`sqrt(sum((x_i - y_i)^2) / N)`), so a threshold reads as
//! "average per-pixel deviation" and does not depend on the canonical size.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imaging::CanonicalImage;
use crate::manifest::DatasetManifest;
use crate::{Error, Result};

/// Default distance threshold: 12% average per-pixel deviation.
pub const DEFAULT_THRESHOLD: f64 = 0.12;

/// Union-find with path compression and union by size.
#[derive(Debug)]
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        UnionFind {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut x = x;
        while self.parent[x] != x {
            let grandparent = self.parent[self.parent[x]];
            self.parent[x] = grandparent;
            x = grandparent;
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// One thresholded duplicate pair, canonically oriented (`a < b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateEdge {
    pub a: String,
    pub b: String,
    pub distance: f64,
}

/// Duplicate edges plus the connected-component group assignment they imply.
///
/// Every manifest id appears in `groups`; the group id is the
/// lexicographically smallest member id, so singletons map to themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicateGraph {
    pub edges: Vec<DuplicateEdge>,
    pub groups: BTreeMap<String, String>,
    pub threshold: f64,
    /// Records that could not be bucketed (no label).
    pub unbucketable: usize,
}

impl DuplicateGraph {
    /// Members of each group, keyed by group id.
    pub fn members_by_group(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (id, gid) in &self.groups {
            out.entry(gid.as_str()).or_default().push(id.as_str());
        }
        out
    }

    /// Group id for an image id.
    pub fn group_of(&self, id: &str) -> Option<&str> {
        self.groups.get(id).map(|s| s.as_str())
    }
}

/// Label buckets over a manifest: indices of records per normalized label,
/// plus the count of unlabeled (unbucketable) records. Bucket ids are sorted
/// so iteration order is deterministic.
fn label_buckets(manifest: &DatasetManifest) -> (BTreeMap<&str, Vec<usize>>, usize) {
    let mut buckets: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut unbucketable = 0;
    for (idx, record) in manifest.records.iter().enumerate() {
        match &record.label {
            Some(label) => buckets.entry(label.as_str()).or_default().push(idx),
            None => unbucketable += 1,
        }
    }
    for indices in buckets.values_mut() {
        indices.sort_by(|&i, &j| manifest.records[i].id.cmp(&manifest.records[j].id));
    }
    (buckets, unbucketable)
}

/// All unordered candidate pairs: records sharing an identical normalized
/// label, each pair once, oriented `a < b`. Unlabeled records are skipped
/// and counted in the second return value.
pub fn candidate_pairs(manifest: &DatasetManifest) -> (Vec<(String, String)>, usize) {
    let (buckets, unbucketable) = label_buckets(manifest);
    let mut pairs = Vec::new();
    for indices in buckets.values() {
        for (pos, &i) in indices.iter().enumerate() {
            for &j in &indices[pos + 1..] {
                pairs.push((
                    manifest.records[i].id.clone(),
                    manifest.records[j].id.clone(),
                ));
            }
        }
    }
    (pairs, unbucketable)
}

/// RMS-normalized Euclidean distance between two canonical images of
/// identical dimensions. Lies in `[0, 1]`.
pub fn pixel_distance(x: &CanonicalImage, y: &CanonicalImage) -> Result<f64> {
    if x.width != y.width || x.height != y.height {
        return Err(Error::DimensionMismatch {
            a_w: x.width,
            a_h: x.height,
            b_w: y.width,
            b_h: y.height,
        });
    }
    let mut acc = 0.0f64;
    for (a, b) in x.pixels.iter().zip(&y.pixels) {
        let d = *a as f64 - *b as f64;
        acc += d * d;
    }
    Ok((acc / x.pixels.len() as f64).sqrt())
}

/// Build the duplicate graph: evaluate every candidate pair, keep edges with
/// `distance <= threshold`, and group ids via union-find.
///
/// Distance evaluation is parallel across pairs; each pair's distance is
/// accumulated sequentially, so the result does not depend on worker count.
pub fn build_duplicate_graph(
    manifest: &DatasetManifest,
    images: &HashMap<String, CanonicalImage>,
    threshold: f64,
) -> Result<DuplicateGraph> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "threshold {} outside [0, 1]",
            threshold
        )));
    }
    for record in &manifest.records {
        if !images.contains_key(&record.id) {
            return Err(Error::MissingImage {
                id: record.id.clone(),
            });
        }
    }

    let (buckets, unbucketable) = label_buckets(manifest);
    let mut index_pairs: Vec<(usize, usize)> = Vec::new();
    for indices in buckets.values() {
        for (pos, &i) in indices.iter().enumerate() {
            for &j in &indices[pos + 1..] {
                index_pairs.push((i, j));
            }
        }
    }

    let distances: Vec<(usize, usize, f64)> = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let a = &manifest.records[i];
            let b = &manifest.records[j];
            let d = pixel_distance(&images[&a.id], &images[&b.id])?;
            Ok((i, j, d))
        })
        .collect::<Result<_>>()?;

    let mut uf = UnionFind::new(manifest.len());
    let mut edges = Vec::new();
    for &(i, j, distance) in &distances {
        if distance <= threshold {
            uf.union(i, j);
            edges.push(DuplicateEdge {
                a: manifest.records[i].id.clone(),
                b: manifest.records[j].id.clone(),
                distance,
            });
        }
    }
    edges.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));

    // Group id: smallest member id of each component.
    let mut smallest: Vec<usize> = (0..manifest.len()).collect();
    for idx in 0..manifest.len() {
        let root = uf.find(idx);
        if manifest.records[idx].id < manifest.records[smallest[root]].id {
            smallest[root] = idx;
        }
    }
    let mut groups = BTreeMap::new();
    for idx in 0..manifest.len() {
        let root = uf.find(idx);
        groups.insert(
            manifest.records[idx].id.clone(),
            manifest.records[smallest[root]].id.clone(),
        );
    }

    Ok(DuplicateGraph {
        edges,
        groups,
        threshold,
        unbucketable,
    })
}

/// One percentile sample: the rank asked for, the distance at that rank and
/// the pair realizing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentilePoint {
    pub rank: f64,
    pub distance: f64,
    pub pair: (String, String),
}

/// Nearest-rank percentiles over the edge distances, ascending. For rank `q`
/// the element at zero-based index `ceil(q/100 * (E-1))` is returned.
pub fn distance_percentiles(graph: &DuplicateGraph, ranks: &[f64]) -> Result<Vec<PercentilePoint>> {
    if graph.edges.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    for &q in ranks {
        if !(0.0..=100.0).contains(&q) {
            return Err(Error::Config(format!("percentile rank {} outside [0, 100]", q)));
        }
    }
    let mut sorted: Vec<&DuplicateEdge> = graph.edges.iter().collect();
    sorted.sort_by(|x, y| {
        x.distance
            .partial_cmp(&y.distance)
            .expect("finite distances")
            .then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b)))
    });
    let last = sorted.len() - 1;
    Ok(ranks
        .iter()
        .map(|&q| {
            let idx = ((q / 100.0) * last as f64).ceil() as usize;
            let edge = sorted[idx.min(last)];
            PercentilePoint {
                rank: q,
                distance: edge.distance,
                pair: (edge.a.clone(), edge.b.clone()),
            }
        })
        .collect())
}

/// Render edges as JSON Lines, one `{"a":…,"b":…,"distance":…}` object per
/// edge, distances with 6 decimal places, edges sorted by `(a, b)`.
pub fn edges_to_jsonl(edges: &[DuplicateEdge]) -> String {
    let mut sorted: Vec<&DuplicateEdge> = edges.iter().collect();
    sorted.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    let mut out = String::new();
    for e in sorted {
        let a = serde_json::to_string(&e.a).expect("string serializes");
        let b = serde_json::to_string(&e.b).expect("string serializes");
        writeln!(out, "{{\"a\":{},\"b\":{},\"distance\":{:.6}}}", a, b, e.distance)
            .expect("write to String cannot fail");
    }
    out
}

#[derive(Serialize, Deserialize)]
struct GroupsFile {
    threshold: f64,
    unbucketable: usize,
    groups: BTreeMap<String, String>,
}

/// Persist a graph as `edges.jsonl` plus a groups JSON document.
pub fn write_graph(
    graph: &DuplicateGraph,
    edges_path: impl AsRef<Path>,
    groups_path: impl AsRef<Path>,
) -> Result<()> {
    let edges_path = edges_path.as_ref();
    fs::write(edges_path, edges_to_jsonl(&graph.edges)).map_err(|e| Error::Io {
        path: edges_path.to_path_buf(),
        source: e,
    })?;
    let groups_path = groups_path.as_ref();
    let doc = GroupsFile {
        threshold: graph.threshold,
        unbucketable: graph.unbucketable,
        groups: graph.groups.clone(),
    };
    let json = serde_json::to_string_pretty(&doc).expect("groups serialize");
    fs::write(groups_path, json).map_err(|e| Error::Io {
        path: groups_path.to_path_buf(),
        source: e,
    })
}

/// Load a graph previously written by [`write_graph`].
pub fn load_graph(
    edges_path: impl AsRef<Path>,
    groups_path: impl AsRef<Path>,
) -> Result<DuplicateGraph> {
    let edges_path = edges_path.as_ref();
    let text = fs::read_to_string(edges_path).map_err(|e| Error::Io {
        path: edges_path.to_path_buf(),
        source: e,
    })?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let edge: DuplicateEdge = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: edges_path.display().to_string(),
            line: (lineno + 1) as u64,
            msg: e.to_string(),
        })?;
        edges.push(edge);
    }
    let groups_path = groups_path.as_ref();
    let text = fs::read_to_string(groups_path).map_err(|e| Error::Io {
        path: groups_path.to_path_buf(),
        source: e,
    })?;
    let doc: GroupsFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: groups_path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(DuplicateGraph {
        edges,
        groups: doc.groups,
        threshold: doc.threshold,
        unbucketable: doc.unbucketable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{normalize_label, ImageRecord};
    use rand::Rng;

    fn record(id: &str, label: Option<&str>) -> ImageRecord {
        ImageRecord {
            id: id.to_string(),
            path: format!("{id}.png"),
            label: label.map(|l| normalize_label(l).unwrap()),
            subset: "t".into(),
            quad: None,
        }
    }

    fn manifest(records: Vec<ImageRecord>) -> DatasetManifest {
        DatasetManifest::new("test", records).unwrap()
    }

    fn canon(pixels: &[f32]) -> CanonicalImage {
        CanonicalImage::from_pixels(pixels.len() as u32, 1, pixels.to_vec()).unwrap()
    }

    #[test]
    fn candidate_pairs_within_buckets_only() {
        let m = manifest(vec![
            record("x1", Some("A")),
            record("x2", Some("A")),
            record("x3", Some("A")),
            record("y1", Some("B")),
        ]);
        let (pairs, unbucketable) = candidate_pairs(&m);
        assert_eq!(unbucketable, 0);
        assert_eq!(
            pairs,
            vec![
                ("x1".to_string(), "x2".to_string()),
                ("x1".to_string(), "x3".to_string()),
                ("x2".to_string(), "x3".to_string()),
            ]
        );
    }

    #[test]
    fn candidate_pairs_all_distinct_labels_is_empty() {
        let m = manifest(vec![
            record("a", Some("A1")),
            record("b", Some("B2")),
            record("c", Some("C3")),
        ]);
        let (pairs, _) = candidate_pairs(&m);
        assert!(pairs.is_empty());
    }

    #[test]
    fn candidate_pairs_counts_unlabeled() {
        let m = manifest(vec![
            record("a", Some("A1")),
            record("b", None),
            record("c", None),
        ]);
        let (pairs, unbucketable) = candidate_pairs(&m);
        assert!(pairs.is_empty());
        assert_eq!(unbucketable, 2);
    }

    #[test]
    fn candidate_pairs_bucket_count_matches_closed_form() {
        for k in 2..=20usize {
            let records = (0..k)
                .map(|i| record(&format!("id{i:02}"), Some("SAME")))
                .collect();
            let (pairs, _) = candidate_pairs(&manifest(records));
            assert_eq!(pairs.len(), k * (k - 1) / 2, "k={k}");
        }
    }

    #[test]
    fn pixel_distance_identity_is_zero() {
        let x = canon(&[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(pixel_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn pixel_distance_maximal_case() {
        let x = canon(&[0.0; 6]);
        let y = canon(&[1.0; 6]);
        assert_eq!(pixel_distance(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn pixel_distance_hand_computed() {
        let x = canon(&[0.0, 0.0]);
        let y = canon(&[0.6, 0.8]);
        let d = pixel_distance(&x, &y).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12, "{d}");
    }

    #[test]
    fn pixel_distance_dimension_mismatch() {
        let x = canon(&[0.0, 0.0]);
        let y = canon(&[0.0, 0.0, 0.0]);
        assert!(matches!(
            pixel_distance(&x, &y),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// Three same-label images placed so the pairwise distances are
    /// 0.05, 0.05 and 0.09. At threshold 0.08 only the two close pairs
    /// become edges, and transitivity pulls all three into one group.
    #[test]
    fn graph_transitivity_hand_trace() {
        // 2-pixel images: d(p, q) = sqrt(((p0-q0)^2 + (p1-q1)^2) / 2).
        let a = canon(&[0.0, 0.0]);
        let b = canon(&[0.070710678, 0.0]);
        let cx = 0.114551299;
        let cy = 0.055477590;
        let c = canon(&[cx as f32, cy as f32]);
        let m = manifest(vec![
            record("a", Some("P")),
            record("b", Some("P")),
            record("c", Some("P")),
        ]);
        let mut images = HashMap::new();
        images.insert("a".to_string(), a.clone());
        images.insert("b".to_string(), b.clone());
        images.insert("c".to_string(), c.clone());
        let dab = pixel_distance(&a, &b).unwrap();
        let dbc = pixel_distance(&b, &c).unwrap();
        let dac = pixel_distance(&a, &c).unwrap();
        assert!((dab - 0.05).abs() < 1e-6, "{dab}");
        assert!((dbc - 0.05).abs() < 1e-6, "{dbc}");
        assert!((dac - 0.09).abs() < 1e-6, "{dac}");

        let graph = build_duplicate_graph(&m, &images, 0.08).unwrap();
        let pairs: Vec<(&str, &str)> = graph
            .edges
            .iter()
            .map(|e| (e.a.as_str(), e.b.as_str()))
            .collect();
        assert_eq!(pairs, vec![("a", "b"), ("b", "c")]);
        assert_eq!(graph.group_of("a"), graph.group_of("c"));
        assert_eq!(graph.group_of("a").unwrap(), "a");
    }

    #[test]
    fn graph_zero_threshold_no_exact_duplicates() {
        let m = manifest(vec![record("a", Some("P")), record("b", Some("P"))]);
        let mut images = HashMap::new();
        images.insert("a".to_string(), canon(&[0.1, 0.2]));
        images.insert("b".to_string(), canon(&[0.1, 0.3]));
        let graph = build_duplicate_graph(&m, &images, 0.0).unwrap();
        assert!(graph.edges.is_empty());
        assert_eq!(graph.group_of("a").unwrap(), "a");
        assert_eq!(graph.group_of("b").unwrap(), "b");
    }

    #[test]
    fn graph_never_spans_label_buckets() {
        let m = manifest(vec![
            record("a", Some("P")),
            record("b", Some("P")),
            record("c", Some("Q")),
            record("d", Some("Q")),
        ]);
        let same = canon(&[0.5, 0.5]);
        let mut images = HashMap::new();
        for id in ["a", "b", "c", "d"] {
            images.insert(id.to_string(), same.clone());
        }
        let graph = build_duplicate_graph(&m, &images, 1.0).unwrap();
        assert_eq!(graph.edges.len(), 2);
        assert_ne!(graph.group_of("a"), graph.group_of("c"));
    }

    #[test]
    fn graph_missing_image_names_the_id() {
        let m = manifest(vec![record("a", Some("P")), record("ghost", Some("P"))]);
        let mut images = HashMap::new();
        images.insert("a".to_string(), canon(&[0.5]));
        let err = build_duplicate_graph(&m, &images, 0.5).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");
    }

    #[test]
    fn percentiles_single_edge() {
        let graph = DuplicateGraph {
            edges: vec![DuplicateEdge {
                a: "a".into(),
                b: "b".into(),
                distance: 0.1,
            }],
            groups: BTreeMap::new(),
            threshold: 0.5,
            unbucketable: 0,
        };
        for q in [0.0, 37.0, 100.0] {
            let pts = distance_percentiles(&graph, &[q]).unwrap();
            assert_eq!(pts[0].distance, 0.1);
            assert_eq!(pts[0].pair, ("a".to_string(), "b".to_string()));
        }
    }

    #[test]
    fn percentiles_nearest_rank() {
        let edges = [0.1, 0.2, 0.3, 0.4, 0.5]
            .iter()
            .enumerate()
            .map(|(i, &d)| DuplicateEdge {
                a: format!("a{i}"),
                b: format!("b{i}"),
                distance: d,
            })
            .collect();
        let graph = DuplicateGraph {
            edges,
            groups: BTreeMap::new(),
            threshold: 1.0,
            unbucketable: 0,
        };
        let pts = distance_percentiles(&graph, &[0.0, 50.0, 100.0]).unwrap();
        assert_eq!(pts[0].distance, 0.1);
        assert_eq!(pts[1].distance, 0.3);
        assert_eq!(pts[2].distance, 0.5);
    }

    #[test]
    fn percentiles_empty_edge_set_is_error() {
        let graph = DuplicateGraph {
            edges: vec![],
            groups: BTreeMap::new(),
            threshold: 0.5,
            unbucketable: 0,
        };
        assert!(matches!(
            distance_percentiles(&graph, &[50.0]),
            Err(Error::EmptyEdgeSet)
        ));
    }

    #[test]
    fn jsonl_is_sorted_with_six_decimals() {
        let edges = vec![
            DuplicateEdge {
                a: "z".into(),
                b: "zz".into(),
                distance: 0.5,
            },
            DuplicateEdge {
                a: "a".into(),
                b: "b".into(),
                distance: 0.123456789,
            },
        ];
        let text = edges_to_jsonl(&edges);
        assert_eq!(
            text,
            "{\"a\":\"a\",\"b\":\"b\",\"distance\":0.123457}\n{\"a\":\"z\",\"b\":\"zz\",\"distance\":0.500000}\n"
        );
    }

    #[test]
    fn graph_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(vec![record("a", Some("P")), record("b", Some("P"))]);
        let mut images = HashMap::new();
        images.insert("a".to_string(), canon(&[0.5, 0.5]));
        images.insert("b".to_string(), canon(&[0.5, 0.5]));
        let graph = build_duplicate_graph(&m, &images, 0.2).unwrap();
        let edges_path = dir.path().join("edges.jsonl");
        let groups_path = dir.path().join("groups.json");
        write_graph(&graph, &edges_path, &groups_path).unwrap();
        let back = load_graph(&edges_path, &groups_path).unwrap();
        assert_eq!(back.groups, graph.groups);
        assert_eq!(back.threshold, graph.threshold);
        assert_eq!(back.edges.len(), graph.edges.len());
    }

    // --- randomized checks against a brute-force oracle ---

    /// Oracle: all N^2 distances, filter to same-label pairs under the
    /// threshold, and connectivity via breadth-first search.
    fn oracle_graph(
        manifest: &DatasetManifest,
        images: &HashMap<String, CanonicalImage>,
        threshold: f64,
    ) -> (Vec<(String, String)>, Vec<Vec<String>>) {
        let n = manifest.len();
        let mut adj = vec![vec![]; n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (ri, rj) = (&manifest.records[i], &manifest.records[j]);
                if ri.label.is_none() || ri.label != rj.label {
                    continue;
                }
                let d = pixel_distance(&images[&ri.id], &images[&rj.id]).unwrap();
                if d <= threshold {
                    adj[i].push(j);
                    if ri.id < rj.id {
                        edges.push((ri.id.clone(), rj.id.clone()));
                    }
                }
            }
        }
        edges.sort();
        edges.dedup();
        // BFS components.
        let mut component = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let mut queue = vec![start];
            component[start] = next;
            while let Some(node) = queue.pop() {
                for &peer in &adj[node] {
                    if component[peer] == usize::MAX {
                        component[peer] = next;
                        queue.push(peer);
                    }
                }
            }
            next += 1;
        }
        let mut parts: Vec<Vec<String>> = vec![Vec::new(); next];
        for i in 0..n {
            parts[component[i]].push(manifest.records[i].id.clone());
        }
        for p in &mut parts {
            p.sort();
        }
        parts.sort();
        (edges, parts)
    }

    fn partition_of(graph: &DuplicateGraph) -> Vec<Vec<String>> {
        let mut parts: Vec<Vec<String>> = graph
            .members_by_group()
            .values()
            .map(|members| members.iter().map(|s| s.to_string()).collect())
            .collect();
        for p in &mut parts {
            p.sort();
        }
        parts.sort();
        parts
    }

    fn random_fixture(
        rng: &mut crate::rng::SeededRng,
        n: usize,
    ) -> (DatasetManifest, HashMap<String, CanonicalImage>) {
        let mut records = Vec::new();
        let mut images = HashMap::new();
        let label_count = 1 + n / 4;
        for i in 0..n {
            let id = format!("img{i:04}");
            let labeled = rng.gen_bool(0.9);
            let label = if labeled {
                Some(format!("L{}", rng.gen_range(0..label_count)))
            } else {
                None
            };
            let base: f32 = rng.gen_range(0.0..0.9);
            let jitter: f32 = rng.gen_range(0.0..0.1);
            let pixels: Vec<f32> = (0..8)
                .map(|k| (base + jitter * ((k % 3) as f32) / 3.0).clamp(0.0, 1.0))
                .collect();
            images.insert(id.clone(), canon(&pixels));
            records.push(record(&id, label.as_deref()));
        }
        (manifest(records), images)
    }

    #[test]
    fn graph_matches_brute_force_oracle_on_random_manifests() {
        let mut rng = crate::rng::rng_from_seed(2024);
        for round in 0..10 {
            let n = 20 + (round * 13) % 40;
            let (m, images) = random_fixture(&mut rng, n);
            let threshold = 0.05 + 0.01 * (round as f64);
            let graph = build_duplicate_graph(&m, &images, threshold).unwrap();
            let got_edges: Vec<(String, String)> = graph
                .edges
                .iter()
                .map(|e| (e.a.clone(), e.b.clone()))
                .collect();
            let (want_edges, want_parts) = oracle_graph(&m, &images, threshold);
            assert_eq!(got_edges, want_edges, "round {round}");
            assert_eq!(partition_of(&graph), want_parts, "round {round}");
        }
    }

    #[test]
    fn graph_is_invariant_under_record_permutation() {
        let mut rng = crate::rng::rng_from_seed(7);
        let (m, images) = random_fixture(&mut rng, 40);
        let graph = build_duplicate_graph(&m, &images, 0.08).unwrap();

        let mut shuffled = m.records.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        let m2 = manifest(shuffled);
        let graph2 = build_duplicate_graph(&m2, &images, 0.08).unwrap();

        assert_eq!(graph.edges, graph2.edges);
        assert_eq!(partition_of(&graph), partition_of(&graph2));
    }

    #[test]
    fn raising_threshold_never_removes_edges_or_splits_groups() {
        let mut rng = crate::rng::rng_from_seed(11);
        let (m, images) = random_fixture(&mut rng, 50);
        let low = build_duplicate_graph(&m, &images, 0.04).unwrap();
        let high = build_duplicate_graph(&m, &images, 0.09).unwrap();
        let high_pairs: std::collections::HashSet<(String, String)> = high
            .edges
            .iter()
            .map(|e| (e.a.clone(), e.b.clone()))
            .collect();
        for e in &low.edges {
            assert!(high_pairs.contains(&(e.a.clone(), e.b.clone())));
        }
        // Every low group is contained in a single high group.
        for members in low.members_by_group().values() {
            let target = high.group_of(members[0]).unwrap();
            for peer in members {
                assert_eq!(high.group_of(peer), Some(target));
            }
        }
    }
}
