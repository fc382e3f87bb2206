//! Evaluation metrics over model prediction files: recognition rate, the
//! original-vs-fair accuracy gap in percentage points, the same gap relative
//! to the original error, and absolute extra-error counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::manifest::{normalize_label, DatasetManifest, Split, SplitAssignment};
use crate::{Error, Result};

/// Predictions of one model over one split's test set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub model: String,
    /// The referenced split's test ids.
    pub test_ids: BTreeSet<String>,
    /// Normalized predicted text per image id. An unparseable or empty
    /// prediction is stored as the empty string, which never matches truth.
    pub predictions: BTreeMap<String, String>,
}

impl PredictionSet {
    /// Build from raw (id, text) pairs. Every predicted id must belong to
    /// the referenced split's test set.
    pub fn new(
        model: impl Into<String>,
        split: &SplitAssignment,
        raw: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let test_ids: BTreeSet<String> =
            split.ids_in(Split::Test).map(|s| s.to_string()).collect();
        let mut predictions = BTreeMap::new();
        for (id, text) in raw {
            if !test_ids.contains(&id) {
                return Err(Error::Metrics(format!(
                    "prediction for {:?} which is not in the split's test set",
                    id
                )));
            }
            let normalized = normalize_label(&text)
                .map(|p| p.as_str().to_string())
                .unwrap_or_default();
            predictions.insert(id, normalized);
        }
        Ok(PredictionSet {
            model: model.into(),
            test_ids,
            predictions,
        })
    }
}

/// Load a prediction TSV (`<image_id>\t<predicted_text>` per line).
pub fn load_predictions(
    path: impl AsRef<Path>,
    model: impl Into<String>,
    split: &SplitAssignment,
) -> Result<PredictionSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, pred) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: (lineno + 1) as u64,
            msg: "expected `<image_id>\\t<predicted_text>`".into(),
        })?;
        raw.push((id.to_string(), pred.to_string()));
    }
    PredictionSet::new(model, split, raw)
}

/// Recognition rate in percent: exactly matched plates over the test-set
/// size. Test images without a prediction count as errors.
pub fn recognition_rate(predictions: &PredictionSet, truth: &DatasetManifest) -> Result<f64> {
    if predictions.test_ids.is_empty() {
        return Err(Error::Metrics("empty test set".into()));
    }
    let labels: HashMap<&str, &str> = truth
        .records
        .iter()
        .filter_map(|r| r.label.as_ref().map(|l| (r.id.as_str(), l.as_str())))
        .collect();
    let mut correct = 0usize;
    for id in &predictions.test_ids {
        let label = labels.get(id.as_str()).ok_or_else(|| {
            Error::Metrics(format!("test id {:?} has no ground-truth label", id))
        })?;
        if predictions.predictions.get(id).map(|s| s.as_str()) == Some(*label) {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / predictions.test_ids.len() as f64)
}

/// Accuracy drop statistics between the original and fair splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    /// Signed drop in percentage points: `acc_original - acc_fair`.
    pub gap: f64,
    /// The drop relative to the original error,
    /// `100 * gap / (100 - acc_original)`; undefined at 100% accuracy.
    pub rel_gap: Option<f64>,
}

/// Compute Gap and Rel. Gap from two recognition rates (percent).
pub fn gap_stats(acc_original: f64, acc_fair: f64) -> Result<GapStats> {
    for (name, v) in [("acc_original", acc_original), ("acc_fair", acc_fair)] {
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::Metrics(format!("{name} {} outside [0, 100]", v)));
        }
    }
    let gap = acc_original - acc_fair;
    let rel_gap = if acc_original == 100.0 {
        None
    } else {
        Some(100.0 * gap / (100.0 - acc_original))
    };
    Ok(GapStats { gap, rel_gap })
}

/// Absolute number of additionally misrecognized plates a gap represents on
/// a test set of `test_size` images (rounded to the nearest integer).
pub fn extra_errors(acc_original: f64, acc_fair: f64, test_size: usize) -> i64 {
    (test_size as f64 * (acc_original - acc_fair) / 100.0).round() as i64
}

/// One model's row in the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub acc_original: f64,
    pub acc_fair: f64,
    pub gap: f64,
    pub rel_gap: Option<f64>,
    pub extra_errors: i64,
    pub rank_original: usize,
    pub rank_fair: usize,
    pub rank_changed: bool,
}

/// Per-model recognition rates under both splits, with gap columns and
/// per-split rankings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<ModelRow>,
    pub test_size_original: usize,
    pub test_size_fair: usize,
}

fn ranks_by_accuracy(entries: &[(String, f64)]) -> HashMap<String, usize> {
    let mut order: Vec<&(String, f64)> = entries.iter().collect();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite accuracies")
            .then_with(|| a.0.cmp(&b.0))
    });
    order
        .into_iter()
        .enumerate()
        .map(|(i, (model, _))| (model.clone(), i + 1))
        .collect()
}

/// Score (original, fair) prediction-set pairs against one truth manifest.
///
/// All original sets must reference the same test ids, and likewise the fair
/// ones; extra-error counts use the original split's test size.
pub fn compare_runs(
    pairs: &[(PredictionSet, PredictionSet)],
    truth: &DatasetManifest,
) -> Result<MetricsTable> {
    if pairs.is_empty() {
        return Err(Error::Metrics("no prediction pairs to compare".into()));
    }
    for (original, fair) in pairs {
        if original.model != fair.model {
            return Err(Error::Metrics(format!(
                "pair mixes models {:?} and {:?}",
                original.model, fair.model
            )));
        }
    }
    let first = &pairs[0];
    for (original, fair) in pairs {
        if original.test_ids != first.0.test_ids {
            return Err(Error::Metrics(format!(
                "model {:?}: original test set differs from {:?}'s",
                original.model, first.0.model
            )));
        }
        if fair.test_ids != first.1.test_ids {
            return Err(Error::Metrics(format!(
                "model {:?}: fair test set differs from {:?}'s",
                fair.model, first.1.model
            )));
        }
    }
    let test_size_original = first.0.test_ids.len();
    let test_size_fair = first.1.test_ids.len();

    let mut acc_original = Vec::new();
    let mut acc_fair = Vec::new();
    for (original, fair) in pairs {
        acc_original.push((original.model.clone(), recognition_rate(original, truth)?));
        acc_fair.push((fair.model.clone(), recognition_rate(fair, truth)?));
    }
    let rank_original = ranks_by_accuracy(&acc_original);
    let rank_fair = ranks_by_accuracy(&acc_fair);

    let rows = pairs
        .iter()
        .enumerate()
        .map(|(i, (original, _))| {
            let (a_orig, a_fair) = (acc_original[i].1, acc_fair[i].1);
            let stats = gap_stats(a_orig, a_fair)?;
            let r_orig = rank_original[&original.model];
            let r_fair = rank_fair[&original.model];
            Ok(ModelRow {
                model: original.model.clone(),
                acc_original: a_orig,
                acc_fair: a_fair,
                gap: stats.gap,
                rel_gap: stats.rel_gap,
                extra_errors: extra_errors(a_orig, a_fair, test_size_original),
                rank_original: r_orig,
                rank_fair: r_fair,
                rank_changed: r_orig != r_fair,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MetricsTable {
        rows,
        test_size_original,
        test_size_fair,
    })
}

/// Render the table as aligned plain text. Rank changes are marked with `*`.
pub fn render_table(table: &MetricsTable) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<16} {:>10} {:>10} {:>7} {:>9} {:>8}  {}",
        "model", "acc orig", "acc fair", "gap", "rel gap", "extra", "rank o->f"
    )
    .expect("write to String");
    let width = 16 + 1 + 10 + 1 + 10 + 1 + 7 + 1 + 9 + 1 + 8 + 2 + 9;
    writeln!(out, "{}", "-".repeat(width)).expect("write to String");
    for row in &table.rows {
        let rel = match row.rel_gap {
            Some(v) => format!("{:.2}", v),
            None => "undef".to_string(),
        };
        writeln!(
            out,
            "{:<16} {:>10.2} {:>10.2} {:>7.2} {:>9} {:>8}  {}->{}{}",
            row.model,
            row.acc_original,
            row.acc_fair,
            row.gap,
            rel,
            row.extra_errors,
            row.rank_original,
            row.rank_fair,
            if row.rank_changed { " *" } else { "" },
        )
        .expect("write to String");
    }
    writeln!(
        out,
        "test sizes: original {}, fair {}",
        table.test_size_original, table.test_size_fair
    )
    .expect("write to String");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ImageRecord;

    fn truth_manifest(labels: &[(&str, &str)]) -> DatasetManifest {
        let records = labels
            .iter()
            .map(|(id, label)| ImageRecord {
                id: id.to_string(),
                path: format!("{id}.png"),
                label: Some(normalize_label(label).unwrap()),
                subset: "x".into(),
                quad: None,
            })
            .collect();
        DatasetManifest::new("truth", records).unwrap()
    }

    fn test_split(ids: &[&str]) -> SplitAssignment {
        let mut split = SplitAssignment::new("manual", 0);
        for id in ids {
            split.assignment.insert(id.to_string(), Split::Test);
        }
        split
    }

    #[test]
    fn recognition_rate_basic() {
        let ids: Vec<String> = (0..10).map(|i| format!("id{i}")).collect();
        let labels: Vec<(&str, &str)> = ids.iter().map(|id| (id.as_str(), "AB123")).collect();
        let truth = truth_manifest(&labels);
        let split = test_split(&ids.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        // 7 correct, 2 wrong, 1 missing.
        let raw: Vec<(String, String)> = ids[..7]
            .iter()
            .map(|id| (id.clone(), "AB123".to_string()))
            .chain(ids[7..9].iter().map(|id| (id.clone(), "ZZ999".to_string())))
            .collect();
        let preds = PredictionSet::new("m", &split, raw).unwrap();
        assert_eq!(recognition_rate(&preds, &truth).unwrap(), 70.0);
    }

    #[test]
    fn all_predictions_missing_scores_zero() {
        let truth = truth_manifest(&[("a", "X1"), ("b", "X2")]);
        let split = test_split(&["a", "b"]);
        let preds = PredictionSet::new("m", &split, Vec::new()).unwrap();
        assert_eq!(recognition_rate(&preds, &truth).unwrap(), 0.0);
    }

    #[test]
    fn predictions_are_normalized_before_comparison() {
        let truth = truth_manifest(&[("a", "AB123")]);
        let split = test_split(&["a"]);
        let preds =
            PredictionSet::new("m", &split, vec![("a".to_string(), "ab-123".to_string())])
                .unwrap();
        assert_eq!(recognition_rate(&preds, &truth).unwrap(), 100.0);
    }

    #[test]
    fn prediction_outside_test_set_is_rejected() {
        let split = test_split(&["a"]);
        let err = PredictionSet::new(
            "m",
            &split,
            vec![("stranger".to_string(), "AB123".to_string())],
        )
        .unwrap_err();
        assert!(err.to_string().contains("stranger"), "{err}");
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let truth = truth_manifest(&[("a", "X1")]);
        let split = SplitAssignment::new("manual", 0);
        let preds = PredictionSet::new("m", &split, Vec::new()).unwrap();
        assert!(recognition_rate(&preds, &truth).is_err());
    }

    #[test]
    fn gap_stats_reported_averages() {
        let stats = gap_stats(80.3, 77.6).unwrap();
        assert!((stats.gap - 2.7).abs() < 1e-9);
        let rel = stats.rel_gap.unwrap();
        assert!((rel - 13.705583756345177).abs() < 1e-9, "{rel}");
    }

    #[test]
    fn gap_stats_equal_accuracies() {
        let stats = gap_stats(55.5, 55.5).unwrap();
        assert_eq!(stats.gap, 0.0);
        assert_eq!(stats.rel_gap, Some(0.0));
    }

    #[test]
    fn gap_stats_perfect_original_has_undefined_rel_gap() {
        let stats = gap_stats(100.0, 99.0).unwrap();
        assert_eq!(stats.gap, 1.0);
        assert_eq!(stats.rel_gap, None);
    }

    #[test]
    fn gap_stats_sign_symmetry() {
        let a = gap_stats(80.0, 70.0).unwrap();
        let b = gap_stats(70.0, 80.0).unwrap();
        assert_eq!(a.gap, -b.gap);
    }

    #[test]
    fn extra_errors_reported_magnitudes() {
        assert_eq!(extra_errors(50.0, 48.83, 157_000), 1837);
        assert_eq!(extra_errors(50.0, 44.8, 157_000), 8164);
        assert_eq!(extra_errors(70.0, 70.0, 157_000), 0);
    }

    fn prediction_fixture(
        model: &str,
        split: &SplitAssignment,
        truth: &DatasetManifest,
        correct: usize,
    ) -> PredictionSet {
        let ids: Vec<String> = split.ids_in(Split::Test).map(|s| s.to_string()).collect();
        let raw: Vec<(String, String)> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let text = if i < correct {
                    truth.record(id).unwrap().label.as_ref().unwrap().to_string()
                } else {
                    "WRONG0".to_string()
                };
                (id.clone(), text)
            })
            .collect();
        PredictionSet::new(model, split, raw).unwrap()
    }

    #[test]
    fn compare_runs_flags_rank_changes() {
        let ids: Vec<String> = (0..10).map(|i| format!("id{i}")).collect();
        let labels: Vec<(&str, &str)> = ids.iter().map(|id| (id.as_str(), "PL8000")).collect();
        let truth = truth_manifest(&labels);
        let id_refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let split = test_split(&id_refs);
        // Model alpha beats beta on the original split, loses on the fair one.
        let pairs = vec![
            (
                prediction_fixture("alpha", &split, &truth, 9),
                prediction_fixture("alpha", &split, &truth, 5),
            ),
            (
                prediction_fixture("beta", &split, &truth, 8),
                prediction_fixture("beta", &split, &truth, 7),
            ),
        ];
        let table = compare_runs(&pairs, &truth).unwrap();
        assert_eq!(table.rows[0].rank_original, 1);
        assert_eq!(table.rows[0].rank_fair, 2);
        assert!(table.rows[0].rank_changed);
        assert!(table.rows[1].rank_changed);
        let text = render_table(&table);
        assert!(text.contains('*'), "{text}");
    }

    #[test]
    fn compare_runs_single_model_and_identical_sets() {
        let truth = truth_manifest(&[("a", "AA11"), ("b", "BB22")]);
        let split = test_split(&["a", "b"]);
        let preds = prediction_fixture("solo", &split, &truth, 1);
        let table = compare_runs(&[(preds.clone(), preds)], &truth).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].gap, 0.0);
        assert_eq!(table.rows[0].extra_errors, 0);
        assert!(!table.rows[0].rank_changed);
    }

    #[test]
    fn compare_runs_rejects_mixed_model_names() {
        let truth = truth_manifest(&[("a", "AA11")]);
        let split = test_split(&["a"]);
        let p1 = prediction_fixture("x", &split, &truth, 1);
        let p2 = prediction_fixture("y", &split, &truth, 1);
        assert!(compare_runs(&[(p1, p2)], &truth).is_err());
    }

    #[test]
    fn recognition_rate_matches_string_compare_oracle() {
        let mut rng = crate::rng::rng_from_seed(64);
        use rand::Rng;
        for _ in 0..20 {
            let n = rng.gen_range(1..40);
            let ids: Vec<String> = (0..n).map(|i| format!("id{i:02}")).collect();
            let labels: Vec<(String, String)> = ids
                .iter()
                .map(|id| (id.clone(), format!("PL{}", rng.gen_range(0..5))))
                .collect();
            let label_refs: Vec<(&str, &str)> = labels
                .iter()
                .map(|(a, b)| (a.as_str(), b.as_str()))
                .collect();
            let truth = truth_manifest(&label_refs);
            let id_refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
            let split = test_split(&id_refs);
            let raw: Vec<(String, String)> = ids
                .iter()
                .filter(|_| rng.gen_bool(0.8))
                .map(|id| (id.clone(), format!("PL{}", rng.gen_range(0..5))))
                .collect();
            let preds = PredictionSet::new("m", &split, raw.clone()).unwrap();
            let got = recognition_rate(&preds, &truth).unwrap();
            // Oracle: direct per-image string comparison.
            let by_id: HashMap<&String, &String> = raw.iter().map(|(a, b)| (a, b)).collect();
            let correct = ids
                .iter()
                .filter(|id| {
                    let want = &labels.iter().find(|(a, _)| a == *id).unwrap().1;
                    by_id.get(id).map(|s| s.as_str()) == Some(want.as_str())
                })
                .count();
            let want = 100.0 * correct as f64 / n as f64;
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn adding_a_correct_prediction_never_decreases_the_rate() {
        let ids: Vec<String> = (0..6).map(|i| format!("id{i}")).collect();
        let labels: Vec<(&str, &str)> = ids.iter().map(|id| (id.as_str(), "AB1")).collect();
        let truth = truth_manifest(&labels);
        let id_refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let split = test_split(&id_refs);
        let mut previous = 0.0;
        for correct in 0..=6 {
            let preds = prediction_fixture("m", &split, &truth, correct);
            let rate = recognition_rate(&preds, &truth).unwrap();
            assert!(rate >= previous);
            assert!((0.0..=100.0).contains(&rate));
            previous = rate;
        }
    }
}
