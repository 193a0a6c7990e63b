//! Class hardness to resampling ratios, target counts and concrete
//! over/undersampling plans.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EnsembleHardness, Estimator};
use crate::error::{HlabError, Result};
use crate::geometry::{class_sizes, knn_among, FeatureSet};
use crate::rank;

/// Sharpness of the oversampling weight curve.
pub const DEFAULT_BETA: f64 = 5.0;
/// Same-class neighbours a SMOTE partner is drawn from.
pub const SMOTE_NEIGHBORS: usize = 5;
/// Added to `|min|` when class-mean AUM must be shifted positive.
pub const AUM_SHIFT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassHardness {
    pub estimator: Estimator,
    pub ensemble_size: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioVector {
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl RatioVector {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    pub values: Vec<usize>,
}

impl CountVector {
    pub fn total(&self) -> usize {
        self.values.iter().sum()
    }
}

/// Mean sample hardness of each class.
pub fn class_hardness(eh: &EnsembleHardness, labels: &[usize], k_classes: usize) -> Result<ClassHardness> {
    if labels.len() != eh.values.len() {
        return Err(HlabError::Incompatible(format!(
            "{} labels for {} hardness values",
            labels.len(),
            eh.values.len()
        )));
    }
    let mut sums = vec![0.0; k_classes];
    let mut counts = vec![0usize; k_classes];
    for (&y, &h) in labels.iter().zip(&eh.values) {
        if y >= k_classes {
            return Err(HlabError::Parameter(format!("label {y} outside 0..{k_classes}")));
        }
        sums[y] += h;
        counts[y] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(HlabError::DegenerateClass { class });
    }
    Ok(ClassHardness {
        estimator: eh.estimator,
        ensemble_size: eh.ensemble_size,
        values: sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect(),
    })
}

/// Ratios proportional to class hardness: reciprocal for AUM, identity otherwise.
pub fn base_ratios(ch: &ClassHardness) -> Result<RatioVector> {
    if ch.values.is_empty() {
        return Err(HlabError::Degenerate("no classes".into()));
    }
    if let Some(c) = ch.values.iter().position(|v| !v.is_finite()) {
        return Err(HlabError::Domain(format!("class {c} has non-finite hardness")));
    }
    let values = match ch.estimator {
        Estimator::Aum => {
            let min = ch.values.iter().cloned().fold(f64::INFINITY, f64::min);
            let shift = if min <= 0.0 {
                let s = min.abs() + AUM_SHIFT_EPS;
                log::warn!("class-mean AUM reaches {min}; shifting all class means by {s}");
                s
            } else {
                0.0
            };
            let mut out = Vec::with_capacity(ch.values.len());
            for (c, &h) in ch.values.iter().enumerate() {
                let h = h + shift;
                if h <= 0.0 {
                    return Err(HlabError::Domain(format!(
                        "class {c} AUM mean {h} is not positive after shifting"
                    )));
                }
                out.push(1.0 / h);
            }
            out
        }
        Estimator::El2n | Estimator::Forgetting => {
            if let Some(c) = ch.values.iter().position(|&h| h < 0.0) {
                return Err(HlabError::Domain(format!("class {c} has negative hardness")));
            }
            if ch.values.iter().all(|&h| h == 0.0) {
                return Err(HlabError::Degenerate("all class hardness values are zero".into()));
            }
            ch.values.clone()
        }
    };
    Ok(RatioVector { values, alpha: 1.0 })
}

/// `R' = mean + alpha (R - mean)`. `alpha = 1` returns the input unchanged.
pub fn scale_ratios(rv: &RatioVector, alpha: f64) -> Result<RatioVector> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(HlabError::Parameter(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let mean = rv.mean();
    let values: Vec<f64> = if alpha == 1.0 {
        rv.values.clone()
    } else {
        rv.values.iter().map(|&r| mean + alpha * (r - mean)).collect()
    };
    if let Some((class, &value)) = values.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        // the class with the smallest ratio bounds alpha from above
        let r_min = rv.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_safe_alpha = if r_min < mean { mean / (mean - r_min) } else { 0.0 };
        return Err(HlabError::OverScaling {
            class,
            alpha,
            value,
            max_safe_alpha,
        });
    }
    Ok(RatioVector { values, alpha })
}

/// Integer class targets `S_c` proportional to `n_c R_c`, renormalised so they
/// sum to `sum(n_c)`. Rounding is largest remainder with ties to the smaller class id.
pub fn target_counts(rv: &RatioVector, class_sizes: &[usize]) -> Result<CountVector> {
    if rv.values.len() != class_sizes.len() {
        return Err(HlabError::Incompatible(format!(
            "{} ratios for {} classes",
            rv.values.len(),
            class_sizes.len()
        )));
    }
    if let Some(c) = class_sizes.iter().position(|&n| n == 0) {
        return Err(HlabError::DegenerateClass { class: c });
    }
    if let Some(c) = rv.values.iter().position(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(HlabError::Domain(format!("class {c} ratio {} is invalid", rv.values[c])));
    }
    let total: usize = class_sizes.iter().sum();
    let weights: Vec<f64> = rv
        .values
        .iter()
        .zip(class_sizes)
        .map(|(&r, &n)| n as f64 * r)
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    if !(weight_sum > 0.0) {
        return Err(HlabError::Degenerate("total resampling ratio is zero".into()));
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * (w / weight_sum)).collect();
    Ok(CountVector {
        values: largest_remainder(&quotas, total),
    })
}

/// Rounds nonnegative quotas to integers summing exactly to `total`.
pub(crate) fn largest_remainder(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let rem = |c: usize| quotas[c] - quotas[c].floor();
    let mut by_rem: Vec<usize> = (0..quotas.len()).collect();
    if assigned < total {
        by_rem.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
        for &c in by_rem.iter().cycle().take(total - assigned) {
            counts[c] += 1;
        }
    } else if assigned > total {
        // only reachable through round-off in the quotas
        by_rem.sort_by(|&a, &b| rem(a).total_cmp(&rem(b)).then(b.cmp(&a)));
        let mut excess = assigned - total;
        for &c in by_rem.iter().cycle() {
            if excess == 0 {
                break;
            }
            if counts[c] > 0 {
                counts[c] -= 1;
                excess -= 1;
            }
        }
    }
    counts
}

/// Oversampling weight for normalised rank `x` in `[0, 1]`:
/// `0.5 + 0.5 (1 - e^{-beta (1 - x)}) / (1 - e^{-beta})`.
///
/// Falls from 1 at `x = 0` to 0.5 at `x = 1`.
pub fn weight_function(x: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(HlabError::Domain(format!("weight argument {x} outside [0, 1]")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(HlabError::Parameter(format!("beta must be positive, got {beta}")));
    }
    let num = -(-beta * (1.0 - x)).exp_m1();
    let den = -(-beta).exp_m1();
    Ok(0.5 + 0.5 * num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    RandomDup,
    Smote,
    EasyWeighted,
    HardWeighted,
}

impl FromStr for Strategy {
    type Err = HlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "random-dup" => Ok(Strategy::RandomDup),
            "smote" => Ok(Strategy::Smote),
            "easy" | "easy-weighted" => Ok(Strategy::EasyWeighted),
            "hard" | "hard-weighted" => Ok(Strategy::HardWeighted),
            other => Err(HlabError::Parameter(format!("unknown strategy {other:?}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::RandomDup => "random-dup",
            Strategy::Smote => "smote",
            Strategy::EasyWeighted => "easy-weighted",
            Strategy::HardWeighted => "hard-weighted",
        })
    }
}

/// Which halves of the resampling are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleMode {
    #[default]
    Full,
    NoOversampling,
    NoUndersampling,
}

impl FromStr for ResampleMode {
    type Err = HlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ResampleMode::Full),
            "no-oversampling" => Ok(ResampleMode::NoOversampling),
            "no-undersampling" => Ok(ResampleMode::NoUndersampling),
            other => Err(HlabError::Parameter(format!("unknown resample mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassAction {
    Oversample,
    Undersample,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPlan {
    pub class_id: usize,
    pub original: usize,
    pub target: usize,
    pub action: ClassAction,
}

/// A synthetic sample `a + t (b - a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecipe {
    pub parent_a: usize,
    pub parent_b: usize,
    pub t: f64,
}

/// Index-level resampling manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingPlan {
    pub strategy: Strategy,
    pub alpha: f64,
    pub seed: u64,
    pub mode: ResampleMode,
    pub classes: Vec<ClassPlan>,
    /// `(sample id, count)` for every original sample, ascending id.
    pub multiplicities: Vec<(usize, usize)>,
    pub synthetic: Vec<SyntheticRecipe>,
}

impl ResamplingPlan {
    pub fn total(&self) -> usize {
        self.multiplicities.iter().map(|&(_, m)| m).sum::<usize>() + self.synthetic.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PlanJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: PlanJson = serde_json::from_str(s)?;
        Ok(j.into())
    }

    /// Builds the resampled feature set: originals repeated by multiplicity
    /// (ascending id), then synthetic samples in plan order.
    pub fn materialize(&self, fs: &FeatureSet) -> Result<FeatureSet> {
        let mut ids = Vec::with_capacity(self.total());
        for &(id, m) in &self.multiplicities {
            ids.extend(std::iter::repeat_n(id, m));
        }
        let base = fs.subset(&ids)?;
        let mut features = base.features().to_vec();
        let mut labels = base.labels().to_vec();
        for r in &self.synthetic {
            if r.parent_a >= fs.n_samples() || r.parent_b >= fs.n_samples() {
                return Err(HlabError::IndexOutOfRange {
                    what: "synthetic parent",
                    index: r.parent_a.max(r.parent_b),
                    len: fs.n_samples(),
                });
            }
            let a = fs.row(r.parent_a);
            let b = fs.row(r.parent_b);
            features.extend(a.iter().zip(b).map(|(x, y)| x + r.t * (y - x)));
            labels.push(fs.labels()[r.parent_a]);
        }
        FeatureSet::new(fs.dim(), fs.k_classes(), features, labels)
    }
}

// JSON layout with tuples as bare arrays.
#[derive(Serialize, Deserialize)]
struct PlanJson {
    strategy: Strategy,
    alpha: f64,
    seed: u64,
    mode: ResampleMode,
    classes: Vec<ClassPlan>,
    multiplicities: Vec<[usize; 2]>,
    synthetic: Vec<(usize, usize, f64)>,
}

impl From<&ResamplingPlan> for PlanJson {
    fn from(p: &ResamplingPlan) -> Self {
        PlanJson {
            strategy: p.strategy,
            alpha: p.alpha,
            seed: p.seed,
            mode: p.mode,
            classes: p.classes.clone(),
            multiplicities: p.multiplicities.iter().map(|&(a, b)| [a, b]).collect(),
            synthetic: p.synthetic.iter().map(|r| (r.parent_a, r.parent_b, r.t)).collect(),
        }
    }
}

impl From<PlanJson> for ResamplingPlan {
    fn from(j: PlanJson) -> Self {
        ResamplingPlan {
            strategy: j.strategy,
            alpha: j.alpha,
            seed: j.seed,
            mode: j.mode,
            classes: j.classes,
            multiplicities: j.multiplicities.into_iter().map(|[a, b]| (a, b)).collect(),
            synthetic: j
                .synthetic
                .into_iter()
                .map(|(parent_a, parent_b, t)| SyntheticRecipe { parent_a, parent_b, t })
                .collect(),
        }
    }
}

/// Keeps the `target` hardest samples of a class, dropping the easiest ones.
/// Returned ids are ascending.
pub fn undersample_plan(
    class_samples: &[(usize, f64)],
    target: usize,
    estimator: Estimator,
) -> Result<Vec<usize>> {
    if target > class_samples.len() {
        return Err(HlabError::Parameter(format!(
            "undersample target {target} exceeds class size {}",
            class_samples.len()
        )));
    }
    let (ids, values) = split_pairs(class_samples);
    let mut local: Vec<usize> = (0..ids.len()).collect();
    // ties between equal hardness fall back to sample id
    local.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        let ord = if estimator.high_is_hard() { ord } else { ord.reverse() };
        ord.then(ids[a].cmp(&ids[b]))
    });
    let drop = class_samples.len() - target;
    let mut kept: Vec<usize> = local[drop..].iter().map(|&l| ids[l]).collect();
    kept.sort_unstable();
    Ok(kept)
}

/// Additions for one class: extra copies per sample id and synthetic recipes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Oversampling {
    pub duplicates: BTreeMap<usize, usize>,
    pub synthetic: Vec<SyntheticRecipe>,
}

impl Oversampling {
    pub fn added(&self) -> usize {
        self.duplicates.values().sum::<usize>() + self.synthetic.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OversampleParams {
    pub beta: f64,
    pub smote_neighbors: usize,
}

impl Default for OversampleParams {
    fn default() -> Self {
        OversampleParams {
            beta: DEFAULT_BETA,
            smote_neighbors: SMOTE_NEIGHBORS,
        }
    }
}

/// Draws `target - size` additional samples for one class.
#[allow(clippy::too_many_arguments)]
pub fn oversample_plan(
    class_samples: &[(usize, f64)],
    target: usize,
    strategy: Strategy,
    estimator: Estimator,
    fs: Option<&FeatureSet>,
    params: OversampleParams,
    rng: &mut ChaCha8Rng,
) -> Result<Oversampling> {
    let size = class_samples.len();
    if target < size {
        return Err(HlabError::Parameter(format!(
            "oversample target {target} is below class size {size}"
        )));
    }
    let extra = target - size;
    let mut out = Oversampling::default();
    if extra == 0 {
        return Ok(out);
    }
    if size == 0 {
        return Err(HlabError::Parameter("cannot oversample an empty class".into()));
    }
    let (ids, values) = split_pairs(class_samples);
    let duplicate = |local: usize, out: &mut Oversampling| {
        *out.duplicates.entry(ids[local]).or_insert(0) += 1;
    };
    match strategy {
        Strategy::RandomDup => {
            for _ in 0..extra {
                duplicate(rng.random_range(0..size), &mut out);
            }
        }
        Strategy::EasyWeighted | Strategy::HardWeighted => {
            let mut order: Vec<usize> = (0..size).collect();
            order.sort_by(|&a, &b| {
                let hard_first = values[a].total_cmp(&values[b]);
                let hard_first = if estimator.high_is_hard() {
                    hard_first.reverse()
                } else {
                    hard_first
                };
                let ord = if strategy == Strategy::HardWeighted {
                    hard_first
                } else {
                    hard_first.reverse()
                };
                ord.then(ids[a].cmp(&ids[b]))
            });
            let denom = (size - 1).max(1) as f64;
            let weights = (0..size)
                .map(|r| weight_function(r as f64 / denom, params.beta))
                .collect::<Result<Vec<_>>>()?;
            let dist = WeightedIndex::new(&weights)
                .map_err(|e| HlabError::Parameter(format!("bad sampling weights: {e}")))?;
            for _ in 0..extra {
                duplicate(order[dist.sample(rng)], &mut out);
            }
        }
        Strategy::Smote => {
            let fs = fs.ok_or_else(|| HlabError::Parameter("SMOTE needs a feature set".into()))?;
            if size < 2 {
                log::warn!("class of sample {} has one member; SMOTE falls back to duplication", ids[0]);
                for _ in 0..extra {
                    duplicate(0, &mut out);
                }
                return Ok(out);
            }
            let k = params.smote_neighbors.min(size - 1).max(1);
            let neighbors = knn_among(fs, &ids, k)?;
            for _ in 0..extra {
                let a = rng.random_range(0..size);
                let nb = &neighbors[a];
                let b = nb[rng.random_range(0..nb.len())].0;
                let t: f64 = rng.random();
                out.synthetic.push(SyntheticRecipe {
                    parent_a: ids[a],
                    parent_b: b,
                    t,
                });
            }
        }
    }
    Ok(out)
}

fn split_pairs(pairs: &[(usize, f64)]) -> (Vec<usize>, Vec<f64>) {
    pairs.iter().cloned().unzip()
}

#[derive(Debug, Clone, Copy)]
pub struct ResamplingConfig {
    pub alpha: f64,
    pub strategy: Strategy,
    pub mode: ResampleMode,
    pub seed: u64,
    pub oversample: OversampleParams,
}

impl Default for ResamplingConfig {
    fn default() -> Self {
        ResamplingConfig {
            alpha: 1.0,
            strategy: Strategy::RandomDup,
            mode: ResampleMode::Full,
            seed: 0,
            oversample: OversampleParams::default(),
        }
    }
}

/// Class hardness -> ratios -> alpha scaling -> counts for the given labels.
pub fn resampling_targets(
    eh: &EnsembleHardness,
    labels: &[usize],
    k_classes: usize,
    alpha: f64,
) -> Result<(ClassHardness, RatioVector, RatioVector, CountVector)> {
    let ch = class_hardness(eh, labels, k_classes)?;
    let base = base_ratios(&ch)?;
    let scaled = scale_ratios(&base, alpha)?;
    let counts = target_counts(&scaled, &class_sizes(labels, k_classes))?;
    Ok((ch, base, scaled, counts))
}

/// Per-class random stream, independent of how classes are scheduled.
pub fn class_rng(seed: u64, class_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class_id as u64);
    rng
}

/// Full pipeline from ensemble hardness to an index-level plan.
pub fn build_resampling_plan(
    eh: &EnsembleHardness,
    labels: &[usize],
    k_classes: usize,
    fs: Option<&FeatureSet>,
    cfg: &ResamplingConfig,
) -> Result<ResamplingPlan> {
    if let Some(fs) = fs {
        if fs.n_samples() != labels.len() || fs.labels() != labels {
            return Err(HlabError::Incompatible(
                "feature set labels differ from the plan labels".into(),
            ));
        }
    }
    let (_, _, _, counts) = resampling_targets(eh, labels, k_classes, cfg.alpha)?;
    let mut members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k_classes];
    for (i, (&y, &h)) in labels.iter().zip(&eh.values).enumerate() {
        members[y].push((i, h));
    }
    let mut multiplicity = vec![1usize; labels.len()];
    let mut synthetic = Vec::new();
    let mut classes = Vec::with_capacity(k_classes);
    for (c, class_samples) in members.iter().enumerate() {
        let original = class_samples.len();
        let ideal = counts.values[c];
        let (action, target) = match ideal.cmp(&original) {
            std::cmp::Ordering::Less if cfg.mode != ResampleMode::NoUndersampling => {
                (ClassAction::Undersample, ideal)
            }
            std::cmp::Ordering::Greater if cfg.mode != ResampleMode::NoOversampling => {
                (ClassAction::Oversample, ideal)
            }
            _ => (ClassAction::Keep, original),
        };
        match action {
            ClassAction::Undersample => {
                let kept = undersample_plan(class_samples, target, eh.estimator)?;
                for &(id, _) in class_samples {
                    multiplicity[id] = 0;
                }
                for id in kept {
                    multiplicity[id] = 1;
                }
            }
            ClassAction::Oversample => {
                let mut rng = class_rng(cfg.seed, c);
                let add = oversample_plan(
                    class_samples,
                    target,
                    cfg.strategy,
                    eh.estimator,
                    fs,
                    cfg.oversample,
                    &mut rng,
                )?;
                for (id, extra) in add.duplicates {
                    multiplicity[id] += extra;
                }
                synthetic.extend(add.synthetic);
            }
            ClassAction::Keep => {}
        }
        classes.push(ClassPlan {
            class_id: c,
            original,
            target,
            action,
        });
    }
    Ok(ResamplingPlan {
        strategy: cfg.strategy,
        alpha: cfg.alpha,
        seed: cfg.seed,
        mode: cfg.mode,
        classes,
        multiplicities: multiplicity.into_iter().enumerate().collect(),
        synthetic,
    })
}

/// Class ids ranked hardest first by class hardness.
pub fn classes_by_hardness(ch: &ClassHardness) -> Vec<usize> {
    rank::hardest_first(&ch.values, ch.estimator)
}
