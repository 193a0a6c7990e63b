//! Hardness-based pruning: dataset-level (global easiest-first) and
//! class-level (per-class quota), and overlap between pruned sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{EnsembleHardness, Estimator};
use crate::error::{HlabError, Result};
use crate::geometry::class_sizes;
use crate::rank::{easiest_first, round_half_up, sort_easiest_first};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PruneMode {
    Dlp,
    Clp,
}

impl FromStr for PruneMode {
    type Err = HlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dlp" => Ok(PruneMode::Dlp),
            "clp" => Ok(PruneMode::Clp),
            other => Err(HlabError::Parameter(format!("unknown pruning mode {other:?}"))),
        }
    }
}

impl fmt::Display for PruneMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneMode::Dlp => "dlp",
            PruneMode::Clp => "clp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningPlan {
    pub mode: PruneMode,
    pub rate: f64,
    pub estimator: Estimator,
    #[serde(default)]
    pub n_samples: usize,
    /// Ascending, unique.
    pub pruned_ids: Vec<usize>,
}

impl PruningPlan {
    pub fn len(&self) -> usize {
        self.pruned_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pruned_ids.is_empty()
    }

    /// Ids not pruned, ascending.
    pub fn retained(&self) -> Vec<usize> {
        let mut pruned = self.pruned_ids.iter().peekable();
        (0..self.n_samples)
            .filter(|i| {
                if pruned.peek() == Some(&i) {
                    pruned.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    /// Samples removed from each class.
    pub fn removed_per_class(&self, labels: &[usize], k_classes: usize) -> Vec<usize> {
        let mut out = vec![0; k_classes];
        for &i in &self.pruned_ids {
            out[labels[i]] += 1;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(HlabError::Parameter(format!("pruning rate {rate} outside [0, 1)")));
    }
    Ok(())
}

fn check_labels(eh: &EnsembleHardness, labels: &[usize]) -> Result<()> {
    if labels.len() != eh.values.len() {
        return Err(HlabError::Incompatible(format!(
            "{} labels for {} hardness values",
            labels.len(),
            eh.values.len()
        )));
    }
    Ok(())
}

/// Removes the `round(rate * n)` globally easiest samples.
pub fn dlp_plan(eh: &EnsembleHardness, labels: &[usize], rate: f64) -> Result<PruningPlan> {
    check_rate(rate)?;
    check_labels(eh, labels)?;
    let quota = round_half_up(rate * eh.values.len() as f64);
    let mut pruned: Vec<usize> = easiest_first(&eh.values, eh.estimator)
        .into_iter()
        .take(quota)
        .collect();
    pruned.sort_unstable();
    Ok(PruningPlan {
        mode: PruneMode::Dlp,
        rate,
        estimator: eh.estimator,
        n_samples: eh.values.len(),
        pruned_ids: pruned,
    })
}

/// Removes the `round(rate * n_c)` easiest samples of every class.
pub fn clp_plan(eh: &EnsembleHardness, labels: &[usize], k_classes: usize, rate: f64) -> Result<PruningPlan> {
    check_rate(rate)?;
    check_labels(eh, labels)?;
    let mut members = vec![Vec::new(); k_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= k_classes {
            return Err(HlabError::Parameter(format!("label {y} outside 0..{k_classes}")));
        }
        members[y].push(i);
    }
    let mut pruned = Vec::new();
    for mut ids in members {
        let quota = round_half_up(rate * ids.len() as f64);
        sort_easiest_first(&mut ids, &eh.values, eh.estimator);
        pruned.extend_from_slice(&ids[..quota]);
    }
    pruned.sort_unstable();
    Ok(PruningPlan {
        mode: PruneMode::Clp,
        rate,
        estimator: eh.estimator,
        n_samples: eh.values.len(),
        pruned_ids: pruned,
    })
}

/// Directional overlaps `|A ∩ B| / |A|` and `|A ∩ B| / |B|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub intersection: usize,
    pub a_in_b: f64,
    pub b_in_a: f64,
}

pub fn overlap(a: &PruningPlan, b: &PruningPlan) -> Result<Overlap> {
    if a.n_samples != b.n_samples {
        return Err(HlabError::Incompatible(format!(
            "plans cover {} and {} samples",
            a.n_samples, b.n_samples
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(HlabError::Undefined("overlap with an empty pruned set".into()));
    }
    let intersection = sorted_intersection(&a.pruned_ids, &b.pruned_ids);
    Ok(Overlap {
        intersection,
        a_in_b: intersection as f64 / a.len() as f64,
        b_in_a: intersection as f64 / b.len() as f64,
    })
}

pub(crate) fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// One row of the per-class removal histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovalRow {
    pub rate: f64,
    pub class_id: usize,
    pub class_size: usize,
    pub removed: usize,
    pub removed_fraction: f64,
}

pub fn removal_histogram(plan: &PruningPlan, labels: &[usize], k_classes: usize) -> Vec<RemovalRow> {
    let sizes = class_sizes(labels, k_classes);
    plan.removed_per_class(labels, k_classes)
        .into_iter()
        .zip(sizes)
        .enumerate()
        .map(|(class_id, (removed, class_size))| RemovalRow {
            rate: plan.rate,
            class_id,
            class_size,
            removed,
            removed_fraction: if class_size == 0 { 0.0 } else { removed as f64 / class_size as f64 },
        })
        .collect()
}
