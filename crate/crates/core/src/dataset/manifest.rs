use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, QuestionRecord};
use crate::classifier::GeneralizationLevel;

/// The five output partitions of a re-split, in manifest order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitName {
    Train,
    Dev,
    TestIid,
    TestCompositional,
    TestZeroShot,
}

impl SplitName {
    pub const ALL: [SplitName; 5] = [
        SplitName::Train,
        SplitName::Dev,
        SplitName::TestIid,
        SplitName::TestCompositional,
        SplitName::TestZeroShot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::TestIid => "test_iid",
            SplitName::TestCompositional => "test_compositional",
            SplitName::TestZeroShot => "test_zero_shot",
        }
    }

    /// The level a test split claims for its members.
    pub fn level(self) -> Option<GeneralizationLevel> {
        match self {
            SplitName::TestIid => Some(GeneralizationLevel::Iid),
            SplitName::TestCompositional => Some(GeneralizationLevel::Compositional),
            SplitName::TestZeroShot => Some(GeneralizationLevel::ZeroShot),
            SplitName::Train | SplitName::Dev => None,
        }
    }

    pub fn for_level(level: GeneralizationLevel) -> Self {
        match level {
            GeneralizationLevel::Iid => SplitName::TestIid,
            GeneralizationLevel::Compositional => SplitName::TestCompositional,
            GeneralizationLevel::ZeroShot => SplitName::TestZeroShot,
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SplitName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| format!("unknown split name '{s}'"))
    }
}

/// Sampling fractions of the three test stages and of the dev carve-out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub r_zero: f64,
    pub r_compo: f64,
    pub r_iid: f64,
    pub r_dev: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitLists {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test_iid: Vec<String>,
    pub test_compositional: Vec<String>,
    pub test_zero_shot: Vec<String>,
}

impl SplitLists {
    pub fn get(&self, name: SplitName) -> &[String] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::TestIid => &self.test_iid,
            SplitName::TestCompositional => &self.test_compositional,
            SplitName::TestZeroShot => &self.test_zero_shot,
        }
    }

    pub fn get_mut(&mut self, name: SplitName) -> &mut Vec<String> {
        match name {
            SplitName::Train => &mut self.train,
            SplitName::Dev => &mut self.dev,
            SplitName::TestIid => &mut self.test_iid,
            SplitName::TestCompositional => &mut self.test_compositional,
            SplitName::TestZeroShot => &mut self.test_zero_shot,
        }
    }

    pub fn total(&self) -> usize {
        SplitName::ALL.iter().map(|&n| self.get(n).len()).sum()
    }
}

/// Deterministic record of a re-split. Serialized as pretty JSON with a
/// fixed key order so that equal splits give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset_name: String,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub splits: SplitLists,
    /// Fraction actually moved out at each stage; group packing overshoots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved_ratio: Option<SplitRatios>,
    /// Records left out because their query could not be analysed.
    #[serde(default)]
    pub excluded: Vec<String>,
}

impl SplitManifest {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, DatasetError> {
        let m: SplitManifest = serde_json::from_slice(bytes)?;
        m.check_disjoint()?;
        Ok(m)
    }

    pub fn check_disjoint(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        let all = SplitName::ALL
            .iter()
            .flat_map(|&n| self.splits.get(n))
            .chain(&self.excluded);
        for id in all {
            if !seen.insert(id.as_str()) {
                return Err(DatasetError::DuplicateId(id.clone()));
            }
        }
        Ok(())
    }

    /// Every id listed in the manifest, excluded ones included.
    pub fn all_ids(&self) -> impl Iterator<Item = &String> {
        SplitName::ALL
            .iter()
            .flat_map(|&n| self.splits.get(n))
            .chain(&self.excluded)
    }
}

/// Materialize the manifest's five splits from `dataset`, preserving the
/// manifest's id order.
pub fn apply_manifest(
    dataset: &Dataset,
    manifest: &SplitManifest,
) -> Result<BTreeMap<SplitName, Vec<QuestionRecord>>, DatasetError> {
    let index: HashMap<&str, &QuestionRecord> =
        dataset.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut out = BTreeMap::new();
    for name in SplitName::ALL {
        let records = manifest
            .splits
            .get(name)
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|r| (*r).clone())
                    .ok_or_else(|| DatasetError::UnknownId(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(name, records);
    }
    Ok(out)
}
