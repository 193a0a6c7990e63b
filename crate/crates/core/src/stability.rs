//! Ensemble-size robustness of hardness estimators and class-level rank
//! correlation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dynamics::{aggregate_ensemble, Estimator, HardnessVector};
use crate::error::{HlabError, Result};
use crate::pruning::{dlp_plan, sorted_intersection, PruningPlan};
use crate::resampling::{resampling_targets, ClassHardness, CountVector};

/// Largest class count for which the exact permutation test is used.
pub const EXACT_PERMUTATION_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffSummary {
    pub min: usize,
    pub avg: f64,
    pub max: usize,
}

/// Per-class `|S_c^(j+1) - S_c^(j)|`.
pub fn absolute_difference(counts_j: &CountVector, counts_j1: &CountVector) -> Result<Vec<usize>> {
    if counts_j.values.len() != counts_j1.values.len() {
        return Err(HlabError::Incompatible(format!(
            "count vectors over {} and {} classes",
            counts_j.values.len(),
            counts_j1.values.len()
        )));
    }
    Ok(counts_j
        .values
        .iter()
        .zip(&counts_j1.values)
        .map(|(&a, &b)| a.abs_diff(b))
        .collect())
}

pub fn summarize(diffs: &[usize]) -> DiffSummary {
    DiffSummary {
        min: diffs.iter().copied().min().unwrap_or(0),
        avg: if diffs.is_empty() {
            0.0
        } else {
            diffs.iter().sum::<usize>() as f64 / diffs.len() as f64
        },
        max: diffs.iter().copied().max().unwrap_or(0),
    }
}

/// `|P^(j+1) \ P^(j)| / |P^(j)| * 100`.
pub fn pruning_stability(p_j: &PruningPlan, p_j1: &PruningPlan) -> Result<f64> {
    if p_j.n_samples != p_j1.n_samples {
        return Err(HlabError::Incompatible(format!(
            "plans cover {} and {} samples",
            p_j.n_samples, p_j1.n_samples
        )));
    }
    if p_j.is_empty() {
        return Err(HlabError::Undefined("pruning stability against an empty pruned set".into()));
    }
    let new = p_j1.len() - sorted_intersection(&p_j.pruned_ids, &p_j1.pruned_ids);
    Ok(new as f64 / p_j.len() as f64 * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityTask {
    ResamplingCounts,
    PruningIndices,
    ClassAccuracy,
}

impl FromStr for StabilityTask {
    type Err = HlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "resampling" | "resampling-counts" => Ok(StabilityTask::ResamplingCounts),
            "pruning" | "pruning-indices" => Ok(StabilityTask::PruningIndices),
            "class-accuracy" => Ok(StabilityTask::ClassAccuracy),
            other => Err(HlabError::Parameter(format!("unknown stability task {other:?}"))),
        }
    }
}

impl fmt::Display for StabilityTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityTask::ResamplingCounts => "resampling_counts",
            StabilityTask::PruningIndices => "pruning_indices",
            StabilityTask::ClassAccuracy => "class_accuracy",
        })
    }
}

/// One named series of transition values, aligned with [`StabilityCurve::x`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub metric: String,
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCurve {
    pub task: StabilityTask,
    pub estimator: Estimator,
    /// Ensemble sizes `j`; the value at `j` is the change from `j` to `j + 1` models.
    pub x: Vec<usize>,
    pub series: Vec<Series>,
}

impl StabilityCurve {
    /// Rows `(j, metric, class_or_rate, value)`.
    pub fn rows(&self) -> Vec<(usize, &str, &str, f64)> {
        let mut out = Vec::new();
        for (t, &j) in self.x.iter().enumerate() {
            for s in &self.series {
                out.push((j, s.metric.as_str(), s.key.as_str(), s.values[t]));
            }
        }
        out
    }

    /// Smallest `j` from which every series stays at or below its metric's threshold.
    pub fn recommended_size(&self, threshold: impl Fn(&str) -> f64) -> Option<usize> {
        let ok: Vec<bool> = (0..self.x.len())
            .map(|t| self.series.iter().all(|s| s.values[t] <= threshold(&s.metric)))
            .collect();
        let mut best = None;
        for t in (0..ok.len()).rev() {
            if !ok[t] {
                break;
            }
            best = Some(self.x[t]);
        }
        best
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepParams {
    pub alpha: f64,
    pub rates: Vec<f64>,
    /// Per-model per-class accuracy, required by the class-accuracy task.
    pub class_accuracy: Option<Vec<Vec<f64>>>,
}

/// Transition metrics between prefix ensembles of size `j` and `j + 1`.
pub fn ensemble_sweep(
    per_model: &[HardnessVector],
    labels: &[usize],
    k_classes: usize,
    task: StabilityTask,
    params: &SweepParams,
) -> Result<StabilityCurve> {
    let n_models = match task {
        StabilityTask::ClassAccuracy => params
            .class_accuracy
            .as_ref()
            .map(Vec::len)
            .ok_or_else(|| HlabError::Parameter("class-accuracy task needs per-model accuracies".into()))?,
        _ => per_model.len(),
    };
    if n_models < 2 {
        return Err(HlabError::Parameter(format!(
            "a sweep needs at least 2 models, got {n_models}"
        )));
    }
    let estimator = per_model.first().map_or(Estimator::Aum, |v| v.estimator);
    let x: Vec<usize> = (1..n_models).collect();
    let mut series = Vec::new();
    match task {
        StabilityTask::ResamplingCounts => {
            let counts = (1..=n_models)
                .map(|j| {
                    let eh = aggregate_ensemble(&per_model[..j])?;
                    Ok(resampling_targets(&eh, labels, k_classes, params.alpha)?.3)
                })
                .collect::<Result<Vec<_>>>()?;
            let diffs = counts
                .windows(2)
                .map(|w| absolute_difference(&w[0], &w[1]))
                .collect::<Result<Vec<_>>>()?;
            for c in 0..k_classes {
                series.push(Series {
                    metric: "absolute_difference".into(),
                    key: format!("class_{c}"),
                    values: diffs.iter().map(|d| d[c] as f64).collect(),
                });
            }
            let summaries: Vec<DiffSummary> = diffs.iter().map(|d| summarize(d)).collect();
            for (name, f) in [
                ("min_diff", (|s: &DiffSummary| s.min as f64) as fn(&DiffSummary) -> f64),
                ("avg_diff", |s| s.avg),
                ("max_diff", |s| s.max as f64),
            ] {
                series.push(Series {
                    metric: name.into(),
                    key: "all".into(),
                    values: summaries.iter().map(f).collect(),
                });
            }
        }
        StabilityTask::PruningIndices => {
            if params.rates.is_empty() {
                return Err(HlabError::Parameter("pruning sweep needs at least one rate".into()));
            }
            let ensembles = (1..=n_models)
                .map(|j| aggregate_ensemble(&per_model[..j]))
                .collect::<Result<Vec<_>>>()?;
            for &rate in &params.rates {
                let plans = ensembles
                    .iter()
                    .map(|eh| dlp_plan(eh, labels, rate))
                    .collect::<Result<Vec<_>>>()?;
                let values = plans
                    .windows(2)
                    .map(|w| pruning_stability(&w[0], &w[1]))
                    .collect::<Result<Vec<_>>>()?;
                series.push(Series {
                    metric: "pruning_stability".into(),
                    key: format!("rate_{rate}"),
                    values,
                });
            }
        }
        StabilityTask::ClassAccuracy => {
            let acc = params.class_accuracy.as_ref().expect("checked above");
            if acc.iter().any(|a| a.len() != k_classes) {
                return Err(HlabError::Incompatible("per-model accuracy has the wrong class count".into()));
            }
            let means: Vec<Vec<f64>> = (1..=n_models)
                .map(|j| {
                    (0..k_classes)
                        .map(|c| acc[..j].iter().map(|a| a[c]).sum::<f64>() / j as f64)
                        .collect()
                })
                .collect();
            for c in 0..k_classes {
                series.push(Series {
                    metric: "accuracy_change".into(),
                    key: format!("class_{c}"),
                    values: means.windows(2).map(|w| (w[1][c] - w[0][c]).abs()).collect(),
                });
            }
        }
    }
    Ok(StabilityCurve {
        task,
        estimator,
        x,
        series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Mid-ranks (1-based) with ties sharing their average rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman correlation between two equal-length vectors, two-sided p-value.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<SpearmanResult> {
    if a.len() != b.len() {
        return Err(HlabError::Incompatible(format!("lengths {} and {}", a.len(), b.len())));
    }
    let k = a.len();
    if k < 3 {
        return Err(HlabError::Parameter(format!("spearman needs at least 3 pairs, got {k}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(HlabError::Domain("spearman inputs must be finite".into()));
    }
    let ra = mid_ranks(a);
    let rb = mid_ranks(b);
    let constant = |r: &[f64]| r.iter().all(|&v| v == r[0]);
    if constant(&ra) || constant(&rb) {
        return Err(HlabError::Undefined("correlation with a constant vector".into()));
    }
    let rho = pearson(&ra, &rb).clamp(-1.0, 1.0);
    if k <= EXACT_PERMUTATION_MAX {
        Ok(SpearmanResult {
            rho,
            p_value: exact_permutation_p(&ra, &rb, rho),
            exact: true,
        })
    } else {
        let df = (k - 2) as f64;
        let p_value = if rho.abs() >= 1.0 {
            0.0
        } else {
            let t = rho * (df / (1.0 - rho * rho)).sqrt();
            let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
            2.0 * (1.0 - dist.cdf(t.abs()))
        };
        Ok(SpearmanResult {
            rho,
            p_value,
            exact: false,
        })
    }
}

/// Fraction of all permutations of `rb` whose |rho| reaches the observed |rho|.
fn exact_permutation_p(ra: &[f64], rb: &[f64], rho: f64) -> f64 {
    let target = rho.abs() - 1e-12;
    let mut perm = rb.to_vec();
    let n = perm.len();
    let mut hits = 0u64;
    let mut total = 0u64;
    // Heap's algorithm, iterative
    let mut c = vec![0usize; n];
    let mut visit = |p: &[f64]| {
        total += 1;
        if pearson(ra, p).abs() >= target {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Spearman correlation between class hardness (oriented so larger means
/// harder) and per-class accuracy.
pub fn spearman_class_correlation(ch: &ClassHardness, class_accuracy: &[f64]) -> Result<SpearmanResult> {
    let oriented: Vec<f64> = if ch.estimator.high_is_hard() {
        ch.values.clone()
    } else {
        ch.values.iter().map(|v| -v).collect()
    };
    spearman(&oriented, class_accuracy)
}
