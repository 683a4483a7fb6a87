//! Three-stage, group-aware re-splitting of a dataset into train, dev and
//! level-specific test sets.
//!
//! Randomness comes from [`SplitMix64`] only. For stage `k` the generator is
//! seeded with [`stage_seed`]`(seed, k)` and a permutation of `n` items is
//! drawn by Fisher-Yates: for `i` from `n-1` down to `1`, swap `i` with
//! `below(i+1)`. Stage indices: 0 zero-shot group split, 1 compositional
//! group split, 2 i.i.d. record split, 3 dev record split.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    analyze, build_index, AnalyzedRecord, ExcludedRecord, GeneralizationLevel, TrainIndex,
};
use crate::dataset::{Dataset, QuestionRecord, SplitLists, SplitManifest, SplitName, SplitRatios};
use crate::sparql::{GroupKey, KgProfile};

/// SplitMix64 (Steele, Lea, Flood 2014), the reference constants.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n` by rejection; `n > 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }
}

/// Seed of stage `stage`: first output of SplitMix64 started at
/// `seed ^ (stage + 1) * 0xD1B54A32D192ED03`.
pub fn stage_seed(seed: u64, stage: u64) -> u64 {
    SplitMix64::new(seed ^ (stage + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)).next_u64()
}

/// A seeded permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::new(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        p.swap(i, j);
    }
    p
}

pub const STAGE_ZERO: u64 = 0;
pub const STAGE_COMPO: u64 = 1;
pub const STAGE_IID: u64 = 2;
pub const STAGE_DEV: u64 = 3;

fn target_size(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).round() as usize).min(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitWarning {
    /// A non-zero ratio left one side of a group split empty because groups
    /// are too coarse.
    GroupGranularity {
        stage: u64,
        ratio: f64,
        records: usize,
        groups: usize,
        test_size: usize,
    },
}

/// Indices of the two parts, each ascending.
fn gss_indices(
    pool: &[usize],
    key_of: impl Fn(usize) -> GroupKey,
    ratio: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>, usize) {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut members: HashMap<GroupKey, Vec<usize>> = HashMap::new();
    for &i in pool {
        let key = key_of(i);
        members
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(i);
    }
    let target = target_size(ratio, pool.len());
    let mut test = Vec::new();
    if target > 0 {
        for g in permutation(order.len(), seed) {
            if test.len() >= target {
                break;
            }
            test.extend_from_slice(&members[&order[g]]);
        }
    }
    let in_test: HashSet<usize> = test.iter().copied().collect();
    let train = pool.iter().copied().filter(|i| !in_test.contains(i)).collect();
    test.sort_unstable();
    (train, test, order.len())
}

fn granularity_warning(stage: u64, ratio: f64, records: usize, groups: usize, train: usize, test: usize) -> Option<SplitWarning> {
    if ratio > 0.0 && records > 0 && (train == 0 || test == 0) {
        tracing::warn!(stage, ratio, records, groups, test_size = test, "group granularity left one side empty");
        Some(SplitWarning::GroupGranularity {
            stage,
            ratio,
            records,
            groups,
            test_size: test,
        })
    } else {
        None
    }
}

/// Outcome of [`group_shuffle_split`]; both parts keep input order.
#[derive(Debug, Clone)]
pub struct GroupShuffleOutcome {
    pub train: Vec<AnalyzedRecord>,
    pub test: Vec<AnalyzedRecord>,
    pub warning: Option<SplitWarning>,
}

/// Move whole groups, in seeded random order, to the test part until it
/// holds at least `round(ratio * n)` records.
pub fn group_shuffle_split(records: &[AnalyzedRecord], ratio: f64, seed: u64) -> GroupShuffleOutcome {
    let pool: Vec<usize> = (0..records.len()).collect();
    let (train, test, groups) = gss_indices(&pool, |i| records[i].key.clone(), ratio, seed);
    let warning = granularity_warning(0, ratio, records.len(), groups, train.len(), test.len());
    GroupShuffleOutcome {
        train: train.into_iter().map(|i| records[i].clone()).collect(),
        test: test.into_iter().map(|i| records[i].clone()).collect(),
        warning,
    }
}

/// Record-level seeded split; returns `(kept, sampled)` in input order.
pub fn record_split<T: Clone>(records: &[T], ratio: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let pool: Vec<usize> = (0..records.len()).collect();
    let (kept, sampled) = record_split_indices(&pool, ratio, seed);
    (
        kept.into_iter().map(|i| records[i].clone()).collect(),
        sampled.into_iter().map(|i| records[i].clone()).collect(),
    )
}

fn record_split_indices(pool: &[usize], ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let target = target_size(ratio, pool.len());
    let chosen: HashSet<usize> = permutation(pool.len(), seed)
        .into_iter()
        .take(target)
        .map(|p| pool[p])
        .collect();
    pool.iter().copied().partition(|i| !chosen.contains(i))
}

#[derive(Debug, Error)]
pub enum ResplitError {
    #[error("invalid split configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub r_zero: f64,
    pub r_compo: f64,
    pub r_iid: f64,
    pub r_dev: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            r_zero: 0.10,
            r_compo: 0.10,
            r_iid: 0.10,
            r_dev: 0.10,
            seed: 42,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), ResplitError> {
        for (name, r) in [
            ("r_zero", self.r_zero),
            ("r_compo", self.r_compo),
            ("r_iid", self.r_iid),
            ("r_dev", self.r_dev),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(ResplitError::InvalidConfig(format!("{name} = {r} is outside [0, 1)")));
            }
        }
        let sum = self.r_zero + self.r_compo + self.r_iid + self.r_dev;
        if sum >= 1.0 {
            return Err(ResplitError::InvalidConfig(format!("ratios sum to {sum}, must be < 1")));
        }
        Ok(())
    }

    pub fn ratios(&self) -> SplitRatios {
        SplitRatios {
            r_zero: self.r_zero,
            r_compo: self.r_compo,
            r_iid: self.r_iid,
            r_dev: self.r_dev,
        }
    }
}

/// Ids on each side of one group split, for auditing group integrity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSplitTrace {
    pub stage: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Vec<QuestionRecord>,
    pub dev: Vec<QuestionRecord>,
    pub test_zero: Vec<QuestionRecord>,
    pub test_compo: Vec<QuestionRecord>,
    pub test_iid: Vec<QuestionRecord>,
    pub manifest: SplitManifest,
    pub excluded: Vec<ExcludedRecord>,
    pub traces: Vec<GroupSplitTrace>,
    pub warnings: Vec<SplitWarning>,
}

impl SplitResult {
    pub fn test(&self, level: GeneralizationLevel) -> &[QuestionRecord] {
        match level {
            GeneralizationLevel::Iid => &self.test_iid,
            GeneralizationLevel::Compositional => &self.test_compo,
            GeneralizationLevel::ZeroShot => &self.test_zero,
        }
    }
}

fn fraction(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

/// Re-split `dataset`. Pools are kept in dataset order at every stage, so
/// the outcome depends only on the dataset, config and profile.
pub fn resplit(dataset: &Dataset, config: &SplitConfig, profile: &KgProfile) -> Result<SplitResult, ResplitError> {
    config.validate()?;
    let (d0, excluded) = analyze(&dataset.records, profile);
    if d0.is_empty() {
        return Err(ResplitError::InsufficientData("no classifiable record".into()));
    }
    let key = |i: usize| d0[i].key.clone();
    let index_over = |ids: &[usize]| TrainIndex::from_term_sets(ids.iter().map(|&i| &d0[i].terms));
    let level = |i: usize, idx: &TrainIndex| d0[i].level_against(idx);
    let ids = |v: &[usize]| -> Vec<String> { v.iter().map(|&i| d0[i].record.id.clone()).collect() };
    let empty_pool = |stage: &str| ResplitError::InsufficientData(format!("{stage} left the training pool empty"));

    let mut traces = Vec::new();
    let mut warnings = Vec::new();
    let all: Vec<usize> = (0..d0.len()).collect();

    // Step 1: zero-shot candidates.
    let (d1_star, dz_star, groups) = gss_indices(&all, key, config.r_zero, stage_seed(config.seed, STAGE_ZERO));
    warnings.extend(granularity_warning(STAGE_ZERO, config.r_zero, all.len(), groups, d1_star.len(), dz_star.len()));
    traces.push(GroupSplitTrace {
        stage: STAGE_ZERO,
        train_ids: ids(&d1_star),
        test_ids: ids(&dz_star),
    });
    if d1_star.is_empty() {
        return Err(empty_pool("zero-shot sampling"));
    }
    let idx1 = index_over(&d1_star);
    let (zero_cand, returned): (Vec<usize>, Vec<usize>) =
        dz_star.iter().partition(|&&i| level(i, &idx1) == GeneralizationLevel::ZeroShot);
    let mut d1 = d1_star;
    d1.extend(returned);
    d1.sort_unstable();

    // Step 2: compositional candidates.
    let (d2_star, dc_star, groups) = gss_indices(&d1, key, config.r_compo, stage_seed(config.seed, STAGE_COMPO));
    warnings.extend(granularity_warning(STAGE_COMPO, config.r_compo, d1.len(), groups, d2_star.len(), dc_star.len()));
    traces.push(GroupSplitTrace {
        stage: STAGE_COMPO,
        train_ids: ids(&d2_star),
        test_ids: ids(&dc_star),
    });
    if d2_star.is_empty() {
        return Err(empty_pool("compositional sampling"));
    }
    let idx2 = index_over(&d2_star);
    let (compo_cand, returned): (Vec<usize>, Vec<usize>) =
        dc_star.iter().partition(|&&i| level(i, &idx2) == GeneralizationLevel::Compositional);
    let mut d2 = d2_star;
    d2.extend(returned);
    d2.sort_unstable();

    // Step 3: i.i.d. candidates, record level.
    let (train_pre, iid_cand) = record_split_indices(&d2, config.r_iid, stage_seed(config.seed, STAGE_IID));
    let (train, dev) = record_split_indices(&train_pre, config.r_dev, stage_seed(config.seed, STAGE_DEV));
    if train.is_empty() {
        return Err(empty_pool("i.i.d. and dev sampling"));
    }

    // Step 4: final labels against train only.
    let idx = index_over(&train);
    let mut candidates: Vec<usize> = zero_cand.iter().chain(&compo_cand).chain(&iid_cand).copied().collect();
    candidates.sort_unstable();
    let (mut test_zero, mut test_compo, mut test_iid) = (Vec::new(), Vec::new(), Vec::new());
    for i in candidates {
        match level(i, &idx) {
            GeneralizationLevel::ZeroShot => test_zero.push(i),
            GeneralizationLevel::Compositional => test_compo.push(i),
            GeneralizationLevel::Iid => test_iid.push(i),
        }
    }

    let manifest = SplitManifest {
        dataset_name: dataset.name.clone(),
        seed: config.seed,
        ratios: config.ratios(),
        splits: SplitLists {
            train: ids(&train),
            dev: ids(&dev),
            test_iid: ids(&test_iid),
            test_compositional: ids(&test_compo),
            test_zero_shot: ids(&test_zero),
        },
        achieved_ratio: Some(SplitRatios {
            r_zero: fraction(traces[0].test_ids.len(), all.len()),
            r_compo: fraction(traces[1].test_ids.len(), d1.len()),
            r_iid: fraction(iid_cand.len(), d2.len()),
            r_dev: fraction(dev.len(), train_pre.len()),
        }),
        excluded: excluded.iter().map(|e| e.id.clone()).collect(),
    };
    let records = |v: &[usize]| -> Vec<QuestionRecord> { v.iter().map(|&i| d0[i].record.clone()).collect() };
    Ok(SplitResult {
        train: records(&train),
        dev: records(&dev),
        test_zero: records(&test_zero),
        test_compo: records(&test_compo),
        test_iid: records(&test_iid),
        manifest,
        excluded,
        traces,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub id: String,
    pub claimed: GeneralizationLevel,
    /// `None` when the record's query cannot be analysed.
    pub actual: Option<GeneralizationLevel>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl LeakageReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-derive each test record's level against `train` and report those
/// that disagree with the level they are filed under.
pub fn check_leakage_records<'a>(
    train: &[QuestionRecord],
    tests: impl IntoIterator<Item = (GeneralizationLevel, &'a [QuestionRecord])>,
    profile: &KgProfile,
) -> LeakageReport {
    let index = build_index(train, profile);
    let mut report = LeakageReport::default();
    for (claimed, records) in tests {
        let (analyzed, unusable) = analyze(records, profile);
        report.checked += records.len();
        let mut found: HashMap<&str, Option<GeneralizationLevel>> = HashMap::new();
        for a in &analyzed {
            found.insert(a.id(), Some(a.level_against(&index)));
        }
        for e in &unusable {
            found.insert(&e.id, None);
        }
        for r in records {
            let actual = found[r.id.as_str()];
            if actual != Some(claimed) {
                report.violations.push(Violation {
                    id: r.id.clone(),
                    claimed,
                    actual,
                });
            }
        }
    }
    report
}

pub fn check_leakage(split: &SplitResult, profile: &KgProfile) -> LeakageReport {
    check_leakage_records(
        &split.train,
        GeneralizationLevel::ALL.map(|l| (l, split.test(l))),
        profile,
    )
}

/// Leakage check of a manifest applied to `dataset`.
pub fn check_manifest(
    dataset: &Dataset,
    manifest: &SplitManifest,
    profile: &KgProfile,
) -> Result<LeakageReport, crate::dataset::DatasetError> {
    let parts = crate::dataset::apply_manifest(dataset, manifest)?;
    Ok(check_leakage_records(
        &parts[&SplitName::Train],
        GeneralizationLevel::ALL.map(|l| (l, parts[&SplitName::for_level(l)].as_slice())),
        profile,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::analyze;

    fn rec(id: &str, rel: &str) -> QuestionRecord {
        QuestionRecord::new(id, "", format!("SELECT ?x WHERE {{ ?x dbo:{rel} ?y }}"))
    }

    fn analyzed(groups: &[&str]) -> Vec<AnalyzedRecord> {
        let records: Vec<_> = groups.iter().enumerate().map(|(i, g)| rec(&format!("r{i}"), g)).collect();
        analyze(&records, &KgProfile::dbpedia()).0
    }

    #[test]
    fn splitmix_reference_values() {
        // Frozen from an independent Python transcription of the generator.
        let mut r = SplitMix64::new(1234567);
        let got: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        assert_eq!(got, [6457827717110365317, 3203168211198807973, 9817491932198370423]);
    }

    #[test]
    fn below_is_in_range_and_permutation_is_bijective() {
        let mut r = SplitMix64::new(9);
        assert!((0..1000).all(|_| r.below(7) < 7));
        let mut p = permutation(50, 3);
        assert_ne!(p, (0..50).collect::<Vec<_>>());
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
        assert!(permutation(0, 1).is_empty());
    }

    #[test]
    fn stage_seeds_differ() {
        let s: HashSet<u64> = (0..4).map(|k| stage_seed(42, k)).collect();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn ratio_zero_gives_empty_test() {
        let recs = analyzed(&["a", "b", "c"]);
        let out = group_shuffle_split(&recs, 0.0, 1);
        assert_eq!(out.train.len(), 3);
        assert!(out.test.is_empty());
        assert!(out.warning.is_none());
    }

    #[test]
    fn two_groups_half() {
        let recs = analyzed(&["a", "a", "b", "b"]);
        for seed in 0..32 {
            let out = group_shuffle_split(&recs, 0.5, seed);
            let ids: Vec<_> = out.test.iter().map(|a| a.id().to_string()).collect();
            assert!(ids == ["r0", "r1"] || ids == ["r2", "r3"], "seed {seed}: {ids:?}");
        }
    }

    #[test]
    fn single_group_warns() {
        let recs = analyzed(&["a", "a", "a"]);
        let out = group_shuffle_split(&recs, 0.5, 5);
        assert!(out.train.is_empty() || out.test.is_empty());
        assert!(matches!(out.warning, Some(SplitWarning::GroupGranularity { .. })));
    }

    #[test]
    fn record_split_sizes_and_order() {
        let items: Vec<usize> = (0..10).collect();
        let (kept, sampled) = record_split(&items, 0.3, 11);
        assert_eq!(sampled.len(), 3);
        assert_eq!(kept.len(), 7);
        assert!(sampled.windows(2).all(|w| w[0] < w[1]));
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_validation() {
        assert!(SplitConfig::default().validate().is_ok());
        let bad = SplitConfig {
            r_zero: 0.5,
            r_compo: 0.5,
            ..SplitConfig::default()
        };
        assert!(bad.validate().is_err());
        let neg = SplitConfig {
            r_iid: -0.1,
            ..SplitConfig::default()
        };
        assert!(neg.validate().is_err());
    }

    fn synthetic(n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| {
                let q = format!(
                    "SELECT ?x WHERE {{ ?x dbo:p{} ?y . ?y dbo:q{} ?z }}",
                    i % 7,
                    (i * 3) % 5
                );
                QuestionRecord::new(format!("q{i}"), "", q)
            })
            .collect();
        Dataset::new("synthetic", "dbpedia", records).unwrap()
    }

    #[test]
    fn resplit_is_deterministic_and_clean() {
        let ds = synthetic(100);
        let p = KgProfile::dbpedia();
        let cfg = SplitConfig {
            seed: 7,
            ..SplitConfig::default()
        };
        let a = resplit(&ds, &cfg, &p).unwrap();
        let b = resplit(&ds, &cfg, &p).unwrap();
        assert_eq!(a.manifest.to_json_pretty(), b.manifest.to_json_pretty());
        assert!(check_leakage(&a, &p).is_clean());
        assert_eq!(a.manifest.splits.total(), 100);
        assert!(check_manifest(&ds, &a.manifest, &p).unwrap().is_clean());
    }

    #[test]
    fn iid_only_config_labels_everything_iid() {
        // 5 groups of 14 and 4 sampled records: every sampled record leaves
        // a sibling in train.
        let records = (0..70).map(|i| rec(&format!("r{i}"), &format!("p{}", i % 5))).collect();
        let ds = Dataset::new("five-groups", "dbpedia", records).unwrap();
        let cfg = SplitConfig {
            r_zero: 0.0,
            r_compo: 0.0,
            r_iid: 0.05,
            r_dev: 0.0,
            seed: 3,
        };
        let out = resplit(&ds, &cfg, &KgProfile::dbpedia()).unwrap();
        assert!(!out.test_iid.is_empty());
        assert!(out.test_zero.is_empty() && out.test_compo.is_empty());
    }

    #[test]
    fn single_group_dataset_is_insufficient() {
        let records = (0..5).map(|i| rec(&format!("r{i}"), "a")).collect();
        let ds = Dataset::new("one", "dbpedia", records).unwrap();
        let cfg = SplitConfig {
            r_zero: 0.5,
            ..SplitConfig::default()
        };
        assert!(matches!(
            resplit(&ds, &cfg, &KgProfile::dbpedia()),
            Err(ResplitError::InsufficientData(_))
        ));
    }

    #[test]
    fn excluded_records_are_reported() {
        let mut ds = synthetic(30);
        ds.records.push(QuestionRecord::new("broken", "", "SELECT ?x WHERE { ?x dbo:a ?y"));
        let out = resplit(&ds, &SplitConfig::default(), &KgProfile::dbpedia()).unwrap();
        assert_eq!(out.manifest.excluded, ["broken"]);
        assert_eq!(out.manifest.splits.total() + 1, 31);
    }

    #[test]
    fn relabelled_split_reports_violations() {
        let p = KgProfile::dbpedia();
        let train = vec![rec("t", "a")];
        let test = vec![rec("x", "a"), rec("y", "b")];
        let report = check_leakage_records(&train, [(GeneralizationLevel::ZeroShot, test.as_slice())], &p);
        assert_eq!(report.checked, 2);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].actual, Some(GeneralizationLevel::Iid));
        let empty = check_leakage_records(&train, [], &p);
        assert!(empty.is_clean() && empty.checked == 0);
    }
}
