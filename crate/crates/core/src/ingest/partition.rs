use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use super::sites::{csv_error, AntennaRegistry};
use crate::error::{validation, Result};

/// A named total assignment of antennas to region labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionScheme {
    name: String,
    assignment: BTreeMap<String, String>,
}

impl PartitionScheme {
    /// Requires at least two distinct labels.
    pub fn new(name: impl Into<String>, assignment: BTreeMap<String, String>) -> Result<Self> {
        let name = name.into();
        let labels: BTreeSet<&String> = assignment.values().collect();
        if labels.len() < 2 {
            return Err(validation!(
                "partition {name} needs at least 2 distinct labels, got {}",
                labels.len()
            ));
        }
        Ok(Self { name, assignment })
    }

    /// Like [`PartitionScheme::new`] but accepts a single label; used for
    /// induced sub-partitions and identity comparisons.
    pub fn new_unchecked(name: impl Into<String>, assignment: BTreeMap<String, String>) -> Self {
        Self {
            name: name.into(),
            assignment,
        }
    }

    pub fn from_pairs<I, A, B>(name: &str, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Self::new(
            name,
            pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn assignment(&self) -> &BTreeMap<String, String> {
        &self.assignment
    }

    pub fn label_of(&self, id: &str) -> Option<&str> {
        self.assignment.get(id).map(String::as_str)
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.assignment.values().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Members of each label, in id order.
    pub fn groups(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (id, label) in &self.assignment {
            out.entry(label.as_str()).or_default().push(id.as_str());
        }
        out
    }

    /// Restricts the scheme to the registry's antennas. Every antenna must
    /// carry a label; labels for unknown ids are dropped.
    pub fn restrict_to(&self, reg: &AntennaRegistry) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        for id in reg.ids() {
            let label = self
                .assignment
                .get(id)
                .ok_or_else(|| validation!("partition {} has no label for antenna {id}", self.name))?;
            assignment.insert(id.to_owned(), label.clone());
        }
        Self::new(self.name.clone(), assignment)
    }

    /// Per-index labels in registry order.
    pub fn labels_for(&self, reg: &AntennaRegistry) -> Result<Vec<String>> {
        reg.ids()
            .map(|id| {
                self.assignment
                    .get(id)
                    .cloned()
                    .ok_or_else(|| validation!("partition {} has no label for antenna {id}", self.name))
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct PartitionRow {
    antenna_id: String,
    region_label: String,
}

/// Reads `antenna_id,region_label` rows.
pub fn load_partition(path: impl AsRef<Path>, name: &str) -> Result<PartitionScheme> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut assignment = BTreeMap::new();
    for (k, rec) in reader.deserialize::<PartitionRow>().enumerate() {
        let row = rec.map_err(|e| csv_error(path, e))?;
        if assignment.insert(row.antenna_id.clone(), row.region_label).is_some() {
            return Err(validation!(
                "{}:{}: antenna {} labelled twice",
                path.display(),
                k + 2,
                row.antenna_id
            ));
        }
    }
    PartitionScheme::new(name, assignment)
}
