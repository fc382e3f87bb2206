//! Duplicate-free split strategies.
//!
//! All three strategies treat a duplicate group as atomic with respect to
//! the train/test boundary: no group may contribute images to both sides.
//!
//! * [`split_group_atomic_ratio`] — fresh ratio-driven split where every
//!   group lands entirely in one of train/validation/test.
//! * [`filter_test_duplicates`] — keep train and validation untouched, drop
//!   every leaked image from the test set.
//! * [`reallocate_duplicates_to_validation`] — keep the test set untouched,
//!   park leaking train images in validation and backfill train from clean
//!   validation images.
//!
//! Sizing uses greedy assignment over seed-shuffled groups followed by a
//! swap-repair pass, so achieved counts match targets exactly whenever the
//! group-size distribution allows it. Exact subset-sum matching is not
//! attempted; with the small duplicate groups seen in practice the repair
//! pass already lands on the target.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dedup::DuplicateGraph;
use crate::manifest::{DatasetManifest, Split, SplitAssignment};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// The three duplicate-free split strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitStrategy {
    GroupAtomicRatio,
    FilterTest,
    DupToValidation,
}

impl SplitStrategy {
    pub fn tag(self) -> &'static str {
        match self {
            SplitStrategy::GroupAtomicRatio => "group-atomic-ratio",
            SplitStrategy::FilterTest => "filter-test",
            SplitStrategy::DupToValidation => "dup-to-val",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "group-atomic-ratio" => Some(SplitStrategy::GroupAtomicRatio),
            "filter-test" => Some(SplitStrategy::FilterTest),
            "dup-to-val" => Some(SplitStrategy::DupToValidation),
            _ => None,
        }
    }
}

/// Exact per-split sizing, used instead of ratios when present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Parameters for a split run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub strategy: SplitStrategy,
    /// Train share of the train:test ratio (e.g. 2 in "2:1").
    pub train_ratio: u32,
    /// Test share of the train:test ratio.
    pub test_ratio: u32,
    /// Fraction of the post-test training pool moved to validation.
    pub val_fraction: f64,
    /// When set, drives sizing instead of the ratios.
    pub target_counts: Option<TargetCounts>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn group_atomic(train_ratio: u32, test_ratio: u32, val_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            strategy: SplitStrategy::GroupAtomicRatio,
            train_ratio,
            test_ratio,
            val_fraction,
            target_counts: None,
            seed,
        }
    }

    pub fn dup_to_validation(seed: u64) -> Self {
        SplitSpec {
            strategy: SplitStrategy::DupToValidation,
            train_ratio: 0,
            test_ratio: 0,
            val_fraction: 0.0,
            target_counts: None,
            seed,
        }
    }

    fn validate_ratio_fields(&self) -> Result<()> {
        if self.target_counts.is_none() && (self.train_ratio == 0 || self.test_ratio == 0) {
            return Err(Error::SplitSpec(
                "train and test ratio shares must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::SplitSpec(format!(
                "val_fraction {} outside [0, 1)",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// Achieved (or targeted) per-split sizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Machine-readable record of what a split run did.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: String,
    pub seed: u64,
    /// Threshold of the duplicate graph the split was computed against.
    pub threshold: f64,
    pub targets: SplitCounts,
    pub achieved: SplitCounts,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    /// Test ids removed by the filter-test strategy.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub dropped_test: Vec<String>,
    /// Train images parked in validation by the reallocation strategy.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub moved_to_validation: Option<usize>,
    /// Clean validation images moved to train to restore its size.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub restored_to_train: Option<usize>,
    /// Per-subset restoration shortfall, when train could not be refilled.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub restore_deficits: BTreeMap<String, usize>,
}

/// A split assignment together with its provenance.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub assignment: SplitAssignment,
    pub provenance: Provenance,
}

fn require_graph_covers(manifest: &DatasetManifest, graph: &DuplicateGraph) -> Result<()> {
    for r in &manifest.records {
        if !graph.groups.contains_key(&r.id) {
            return Err(Error::SplitSpec(format!(
                "id {:?} is missing from the duplicate graph",
                r.id
            )));
        }
    }
    Ok(())
}

fn require_assignment_covers(
    manifest: &DatasetManifest,
    assignment: &SplitAssignment,
) -> Result<()> {
    for r in &manifest.records {
        if assignment.get(&r.id).is_none() {
            return Err(Error::UnassignedId { id: r.id.clone() });
        }
    }
    Ok(())
}

/// Groups of a manifest under a graph, each a sorted member list, ordered by
/// group id.
fn collect_groups(manifest: &DatasetManifest, graph: &DuplicateGraph) -> Vec<Vec<String>> {
    let mut by_gid: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for r in &manifest.records {
        let gid = graph.groups.get(&r.id).expect("coverage checked");
        by_gid.entry(gid.as_str()).or_default().push(r.id.clone());
    }
    by_gid
        .into_values()
        .map(|mut members| {
            members.sort();
            members
        })
        .collect()
}

/// One side of a two-way balance, indexed by group size for the repair pass.
/// Positions refer to the shuffled order so every pick is deterministic.
struct SidePool {
    by_size: BTreeMap<usize, BTreeSet<usize>>,
    total: usize,
}

impl SidePool {
    fn new() -> Self {
        SidePool {
            by_size: BTreeMap::new(),
            total: 0,
        }
    }

    fn insert(&mut self, pos: usize, size: usize) {
        self.by_size.entry(size).or_default().insert(pos);
        self.total += size;
    }

    fn remove(&mut self, pos: usize, size: usize) {
        let bucket = self.by_size.get_mut(&size).expect("present");
        bucket.remove(&pos);
        if bucket.is_empty() {
            self.by_size.remove(&size);
        }
        self.total -= size;
    }

    /// Largest-size group not exceeding `cap`; earliest position wins ties.
    fn largest_at_most(&self, cap: usize) -> Option<(usize, usize)> {
        self.by_size
            .range(..=cap)
            .next_back()
            .map(|(size, positions)| (*positions.iter().next().expect("non-empty"), *size))
    }

    /// Earliest group of exactly `size`.
    fn first_of_size(&self, size: usize) -> Option<usize> {
        self.by_size
            .get(&size)
            .map(|positions| *positions.iter().next().expect("non-empty"))
    }

    fn sizes(&self) -> Vec<usize> {
        self.by_size.keys().copied().collect()
    }
}

/// Move groups (and, when single moves stall, swap pairs of groups) between
/// `target_side` and `other` until `target_side.total` hits `target` or no
/// move reduces the gap. Returns the final membership of `target_side`.
fn balance(
    target_side: &mut SidePool,
    other: &mut SidePool,
    sizes: &[usize],
    target: usize,
    selected: &mut Vec<bool>,
) {
    loop {
        let deficit = target as i64 - target_side.total as i64;
        if deficit == 0 {
            return;
        }
        if deficit > 0 {
            if let Some((pos, size)) = other.largest_at_most(deficit as usize) {
                other.remove(pos, size);
                target_side.insert(pos, size);
                selected[pos] = true;
                continue;
            }
        } else if let Some((pos, size)) = target_side.largest_at_most((-deficit) as usize) {
            target_side.remove(pos, size);
            other.insert(pos, size);
            selected[pos] = false;
            continue;
        }
        // No single move fits; look for the swap that best shrinks the gap.
        let mut best: Option<(usize, usize, i64)> = None; // (pos_in, pos_out, |new deficit|)
        for s_in in other.sizes() {
            for s_out in target_side.sizes() {
                let delta = s_in as i64 - s_out as i64;
                let next = (deficit - delta).abs();
                if next < deficit.abs() && best.map_or(true, |(_, _, b)| next < b) {
                    let pos_in = other.first_of_size(s_in).expect("size listed");
                    let pos_out = target_side.first_of_size(s_out).expect("size listed");
                    best = Some((pos_in, pos_out, next));
                }
            }
        }
        match best {
            Some((pos_in, pos_out, _)) => {
                let (s_in, s_out) = (sizes[pos_in], sizes[pos_out]);
                other.remove(pos_in, s_in);
                target_side.insert(pos_in, s_in);
                selected[pos_in] = true;
                target_side.remove(pos_out, s_out);
                other.insert(pos_out, s_out);
                selected[pos_out] = false;
            }
            None => return,
        }
    }
}

/// Greedily fill a side to `target` in shuffled order, then repair. Only
/// positions with `eligible[pos]` participate. Returns membership flags.
/// With `warn_oversize` set, groups too large to ever fit the target are
/// reported.
fn fill_to_target(
    sizes: &[usize],
    eligible: &[bool],
    target: usize,
    warnings: &mut Vec<String>,
    group_ids: &[&str],
    warn_oversize: bool,
) -> Vec<bool> {
    let mut selected = vec![false; sizes.len()];
    let mut side = SidePool::new();
    let mut rest = SidePool::new();
    let mut running = 0usize;
    for pos in 0..sizes.len() {
        if !eligible[pos] {
            continue;
        }
        let size = sizes[pos];
        if size > target && warn_oversize {
            warnings.push(format!(
                "group {} ({} images) exceeds the test target {}; left in train",
                group_ids[pos], size, target
            ));
        }
        if running + size <= target {
            selected[pos] = true;
            side.insert(pos, size);
            running += size;
        } else {
            rest.insert(pos, size);
        }
    }
    balance(&mut side, &mut rest, sizes, target, &mut selected);
    selected
}

/// Fresh three-way split. Groups are shuffled with the seeded generator and
/// assigned whole: first test up to its target, then validation carved out
/// of the remaining training pool. No group ever spans two sets.
pub fn split_group_atomic_ratio(
    manifest: &DatasetManifest,
    graph: &DuplicateGraph,
    spec: &SplitSpec,
) -> Result<SplitOutcome> {
    if spec.strategy != SplitStrategy::GroupAtomicRatio {
        return Err(Error::SplitSpec(format!(
            "strategy {:?} passed to split_group_atomic_ratio",
            spec.strategy.tag()
        )));
    }
    spec.validate_ratio_fields()?;
    require_graph_covers(manifest, graph)?;

    let n = manifest.len();
    if let Some(tc) = spec.target_counts {
        if tc.train + tc.validation + tc.test != n {
            return Err(Error::SplitSpec(format!(
                "target counts sum to {}, manifest has {} records",
                tc.train + tc.validation + tc.test,
                n
            )));
        }
    }

    let mut groups = collect_groups(manifest, graph);
    let mut rng = rng_from_seed(spec.seed);
    groups.shuffle(&mut rng);
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let group_ids: Vec<&str> = groups.iter().map(|g| g[0].as_str()).collect();

    let test_target = match spec.target_counts {
        Some(tc) => tc.test,
        None => {
            let denominator = (spec.train_ratio + spec.test_ratio) as usize;
            n * spec.test_ratio as usize / denominator
        }
    };

    let mut warnings = Vec::new();
    let all_eligible = vec![true; groups.len()];
    let in_test = fill_to_target(
        &sizes,
        &all_eligible,
        test_target,
        &mut warnings,
        &group_ids,
        true,
    );
    let test_size: usize = sizes
        .iter()
        .zip(&in_test)
        .filter(|(_, sel)| **sel)
        .map(|(s, _)| s)
        .sum();

    let val_target = match spec.target_counts {
        Some(tc) => tc.validation,
        None => ((n - test_size) as f64 * spec.val_fraction).floor() as usize,
    };
    let train_eligible: Vec<bool> = in_test.iter().map(|sel| !sel).collect();
    let in_val = fill_to_target(
        &sizes,
        &train_eligible,
        val_target,
        &mut warnings,
        &group_ids,
        "validation",
    );
    let val_size: usize = sizes
        .iter()
        .zip(&in_val)
        .filter(|(_, sel)| **sel)
        .map(|(s, _)| s)
        .sum();

    let mut assignment = SplitAssignment::new(spec.strategy.tag(), spec.seed);
    for (pos, members) in groups.iter().enumerate() {
        let split = if in_test[pos] {
            Split::Test
        } else if in_val[pos] {
            Split::Validation
        } else {
            Split::Train
        };
        for id in members {
            assignment.assignment.insert(id.clone(), split);
        }
    }

    let achieved = SplitCounts {
        train: n - test_size - val_size,
        validation: val_size,
        test: test_size,
    };
    let targets = SplitCounts {
        train: n - test_target - val_target,
        validation: val_target,
        test: test_target,
    };
    if achieved.test != targets.test {
        warnings.push(format!(
            "test size {} missed target {}",
            achieved.test, targets.test
        ));
    }
    if achieved.validation != targets.validation {
        warnings.push(format!(
            "validation size {} missed target {}",
            achieved.validation, targets.validation
        ));
    }

    Ok(SplitOutcome {
        assignment,
        provenance: Provenance {
            strategy: spec.strategy.tag().into(),
            seed: spec.seed,
            threshold: graph.threshold,
            targets,
            achieved,
            warnings,
            dropped_test: Vec::new(),
            moved_to_validation: None,
            restored_to_train: None,
            restore_deficits: BTreeMap::new(),
        },
    })
}

fn counts_of(assignment: &SplitAssignment) -> SplitCounts {
    SplitCounts {
        train: assignment.count(Split::Train),
        validation: assignment.count(Split::Validation),
        test: assignment.count(Split::Test),
    }
}

/// Groups whose membership touches a given split.
fn groups_touching(
    graph: &DuplicateGraph,
    assignment: &SplitAssignment,
    splits: &[Split],
) -> HashSet<String> {
    let mut touched = HashSet::new();
    for (id, gid) in &graph.groups {
        if let Some(s) = assignment.get(id) {
            if splits.contains(&s) {
                touched.insert(gid.clone());
            }
        }
    }
    touched
}

/// Drop every test image whose duplicate group reaches into train or
/// validation; train and validation are copied unchanged. Dropped ids are
/// listed in the provenance rather than silently discarded.
pub fn filter_test_duplicates(
    manifest: &DatasetManifest,
    graph: &DuplicateGraph,
    original: &SplitAssignment,
) -> Result<SplitOutcome> {
    require_graph_covers(manifest, graph)?;
    require_assignment_covers(manifest, original)?;

    let contaminated = groups_touching(graph, original, &[Split::Train, Split::Validation]);

    let mut assignment = SplitAssignment::new(SplitStrategy::FilterTest.tag(), original.seed);
    let mut dropped = Vec::new();
    for (id, split) in &original.assignment {
        if *split == Split::Test {
            let gid = graph.groups.get(id).expect("coverage checked");
            if contaminated.contains(gid) {
                dropped.push(id.clone());
                continue;
            }
        }
        assignment.assignment.insert(id.clone(), *split);
    }
    dropped.sort();

    let achieved = counts_of(&assignment);
    let targets = SplitCounts {
        train: original.count(Split::Train),
        validation: original.count(Split::Validation),
        test: achieved.test,
    };
    Ok(SplitOutcome {
        assignment,
        provenance: Provenance {
            strategy: SplitStrategy::FilterTest.tag().into(),
            seed: original.seed,
            threshold: graph.threshold,
            targets,
            achieved,
            warnings: Vec::new(),
            dropped_test: dropped,
            moved_to_validation: None,
            restored_to_train: None,
            restore_deficits: BTreeMap::new(),
        },
    })
}

/// Keep the test set untouched; move every train image whose group contains
/// a test image into validation, then move clean (non-leaking) validation
/// images back to train until the original train size is restored.
///
/// Restoration is balanced per subset tag, each subset drawing from its own
/// validation pool; shortfalls are recorded per subset.
pub fn reallocate_duplicates_to_validation(
    manifest: &DatasetManifest,
    graph: &DuplicateGraph,
    original: &SplitAssignment,
    spec: &SplitSpec,
) -> Result<SplitOutcome> {
    if spec.strategy != SplitStrategy::DupToValidation {
        return Err(Error::SplitSpec(format!(
            "strategy {:?} passed to reallocate_duplicates_to_validation",
            spec.strategy.tag()
        )));
    }
    require_graph_covers(manifest, graph)?;
    require_assignment_covers(manifest, original)?;

    let subset_of: HashMap<&str, &str> = manifest
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.subset.as_str()))
        .collect();
    let leaking_groups = groups_touching(graph, original, &[Split::Test]);
    let leaks = |id: &str| leaking_groups.contains(graph.groups.get(id).expect("covered"));

    let mut assignment = original.clone();
    assignment.strategy = SplitStrategy::DupToValidation.tag().into();
    assignment.seed = spec.seed;

    // Phase 1: park leaking train images in validation, counted per subset.
    let mut moved_per_subset: BTreeMap<String, usize> = BTreeMap::new();
    for (id, split) in original.assignment.iter() {
        if *split == Split::Train && leaks(id) {
            assignment.assignment.insert(id.clone(), Split::Validation);
            let subset = subset_of.get(id.as_str()).copied().unwrap_or_default();
            *moved_per_subset.entry(subset.to_string()).or_default() += 1;
        }
    }
    let moved_total: usize = moved_per_subset.values().sum();

    // Phase 2: per subset, promote clean validation images back to train.
    let mut rng = rng_from_seed(spec.seed);
    let mut restored_total = 0usize;
    let mut deficits = BTreeMap::new();
    for (subset, &moved) in &moved_per_subset {
        let mut candidates: Vec<String> = original
            .assignment
            .iter()
            .filter(|(id, split)| {
                **split == Split::Validation
                    && subset_of.get(id.as_str()).copied().unwrap_or_default() == subset
                    && !leaks(id)
            })
            .map(|(id, _)| id.clone())
            .collect();
        candidates.sort();
        candidates.shuffle(&mut rng);
        let take = moved.min(candidates.len());
        for id in candidates.into_iter().take(take) {
            assignment.assignment.insert(id, Split::Train);
        }
        restored_total += take;
        if take < moved {
            deficits.insert(subset.clone(), moved - take);
        }
    }

    let achieved = counts_of(&assignment);
    let targets = counts_of(original);
    let mut warnings = Vec::new();
    for (subset, deficit) in &deficits {
        warnings.push(format!(
            "subset {:?}: {} leaking train images could not be replaced from validation",
            subset, deficit
        ));
    }

    Ok(SplitOutcome {
        assignment,
        provenance: Provenance {
            strategy: SplitStrategy::DupToValidation.tag().into(),
            seed: spec.seed,
            threshold: graph.threshold,
            targets,
            achieved,
            warnings,
            dropped_test: Vec::new(),
            moved_to_validation: Some(moved_total),
            restored_to_train: Some(restored_total),
            restore_deficits: deficits,
        },
    })
}

/// One train/test co-occurrence inside a duplicate group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub test_id: String,
    pub train_id: String,
    pub group_id: String,
}

/// Result of [`verify_split`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that no test image shares a duplicate group with a train image.
/// Ids absent from the assignment (e.g. dropped by filter-test) are ignored.
pub fn verify_split(graph: &DuplicateGraph, assignment: &SplitAssignment) -> Verdict {
    let mut train_by_group: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut test_by_group: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, gid) in &graph.groups {
        match assignment.get(id) {
            Some(Split::Train) => train_by_group
                .entry(gid.as_str())
                .or_default()
                .push(id.as_str()),
            Some(Split::Test) => test_by_group
                .entry(gid.as_str())
                .or_default()
                .push(id.as_str()),
            _ => {}
        }
    }
    let mut violations = Vec::new();
    for (gid, test_ids) in &test_by_group {
        if let Some(train_ids) = train_by_group.get(gid) {
            for t in test_ids {
                for tr in train_ids {
                    violations.push(Violation {
                        test_id: t.to_string(),
                        train_id: tr.to_string(),
                        group_id: gid.to_string(),
                    });
                }
            }
        }
    }
    violations.sort();
    Verdict { violations }
}
