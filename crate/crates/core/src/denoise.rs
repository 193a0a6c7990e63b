//! Label-noise removal by hardness threshold: a fixed fraction of the
//! hardest samples, or the first elbow of the cumulative hardness curve.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{EnsembleHardness, Estimator};
use crate::error::{HlabError, Result};
use crate::rank::{hardest_first, round_half_up};

/// Distance below which the curve counts as lying on its chord.
pub const ELBOW_TOLERANCE: f64 = 1e-9;
/// Smoothing window as a fraction of `n`.
pub const SMOOTHING_FRACTION: f64 = 0.005;

/// How hardness values become nonnegative masses for the cumulative curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassTransform {
    /// Distance from the easiest value: `max - h` for AUM, `h - min` otherwise.
    #[default]
    Shifted,
    /// Values used as masses directly; they must be nonnegative.
    Raw,
}

/// Cumulative mass over samples taken hardest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeCurve {
    /// Sample ids, hardest first.
    pub order: Vec<usize>,
    /// `y[r - 1]` is the mass fraction of the `r` hardest samples; the last entry is 1.
    pub y: Vec<f64>,
}

impl CumulativeCurve {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

pub fn cumulative_hardness(eh: &EnsembleHardness, transform: MassTransform) -> Result<CumulativeCurve> {
    let n = eh.values.len();
    if n < 2 {
        return Err(HlabError::Parameter(format!("cumulative curve needs n >= 2, got {n}")));
    }
    if eh.values.iter().any(|v| !v.is_finite()) {
        return Err(HlabError::Domain("hardness values must be finite".into()));
    }
    let order = hardest_first(&eh.values, eh.estimator);
    let (lo, hi) = eh
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return Err(HlabError::Degenerate("constant hardness has no cumulative shape".into()));
    }
    let mass = |h: f64| match transform {
        MassTransform::Shifted if eh.estimator.high_is_hard() => h - lo,
        MassTransform::Shifted => hi - h,
        MassTransform::Raw => h,
    };
    if transform == MassTransform::Raw && lo < 0.0 {
        return Err(HlabError::Domain("raw masses must be nonnegative".into()));
    }
    let total: f64 = order.iter().map(|&i| mass(eh.values[i])).sum();
    if total <= 0.0 {
        return Err(HlabError::Degenerate("total hardness mass is zero".into()));
    }
    let mut acc = 0.0;
    let mut y: Vec<f64> = order
        .iter()
        .map(|&i| {
            acc += mass(eh.values[i]);
            acc / total
        })
        .collect();
    *y.last_mut().expect("n >= 2") = 1.0;
    Ok(CumulativeCurve { order, y })
}

/// Rank `r` (number of hardest samples) at the first elbow of `y`, where
/// `y[r - 1]` is the curve value at rank `r` and `y(0) = 0`.
///
/// The distance `y(r) - r / n` to the chord is smoothed with a centred moving
/// average; the first local maximum of the smoothed distance is refined to the
/// raw maximum within one window of it.
pub fn elbow_threshold(y: &[f64]) -> Result<usize> {
    let n = y.len();
    if n < 2 {
        return Err(HlabError::Parameter(format!("elbow needs at least 2 points, got {n}")));
    }
    let mut dist = Vec::with_capacity(n + 1);
    dist.push(0.0);
    dist.extend(y.iter().enumerate().map(|(i, v)| v - (i + 1) as f64 / n as f64));
    let window = round_half_up(SMOOTHING_FRACTION * n as f64).max(1);
    let smooth = moving_average(&dist, window);
    let peak = first_local_max(&smooth, ELBOW_TOLERANCE).ok_or(HlabError::NoElbow)?;
    let lo = peak.saturating_sub(window);
    let hi = (peak + window).min(n);
    let mut best = lo;
    for r in lo..=hi {
        if dist[r] > dist[best] {
            best = r;
        }
    }
    if dist[best] <= ELBOW_TOLERANCE {
        return Err(HlabError::NoElbow);
    }
    Ok(best)
}

fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return x.to_vec();
    }
    let half = window / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + window - half).min(x.len());
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// First index whose value exceeds `tol` and is a local maximum; plateaus
/// report their first index.
fn first_local_max(s: &[f64], tol: f64) -> Option<usize> {
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let left_ok = i == 0 || s[i - 1] < s[i];
        let right_ok = j + 1 == s.len() || s[j + 1] < s[i];
        if s[i] > tol && left_ok && right_ok {
            return Some(i);
        }
        i = j + 1;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiseMode {
    Fraction,
    Elbow,
}

impl FromStr for DenoiseMode {
    type Err = HlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fraction" => Ok(DenoiseMode::Fraction),
            "elbow" => Ok(DenoiseMode::Elbow),
            other => Err(HlabError::Parameter(format!("unknown denoise mode {other:?}"))),
        }
    }
}

impl fmt::Display for DenoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenoiseMode::Fraction => "fraction",
            DenoiseMode::Elbow => "elbow",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoisePlan {
    pub mode: DenoiseMode,
    pub estimator: Estimator,
    pub threshold_fraction: f64,
    pub n_samples: usize,
    /// Ascending.
    pub removed_ids: Vec<usize>,
    pub per_class_removed: Vec<usize>,
}

impl DenoisePlan {
    pub fn len(&self) -> usize {
        self.removed_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removed_ids.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Removes the hardest samples: `round(fraction * n)` of them in fraction
/// mode, or as many as the elbow rank in elbow mode.
pub fn denoise_plan(
    eh: &EnsembleHardness,
    labels: &[usize],
    k_classes: usize,
    mode: DenoiseMode,
    fraction: Option<f64>,
    transform: MassTransform,
) -> Result<DenoisePlan> {
    let n = eh.values.len();
    if labels.len() != n {
        return Err(HlabError::Incompatible(format!("{} labels for {n} hardness values", labels.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= k_classes) {
        return Err(HlabError::Parameter(format!("label {y} outside 0..{k_classes}")));
    }
    let (order, count) = match mode {
        DenoiseMode::Fraction => {
            let f = fraction.ok_or_else(|| HlabError::Parameter("fraction mode needs a fraction".into()))?;
            if !(f > 0.0 && f < 1.0) {
                return Err(HlabError::Parameter(format!("fraction {f} outside (0, 1)")));
            }
            (hardest_first(&eh.values, eh.estimator), round_half_up(f * n as f64))
        }
        DenoiseMode::Elbow => {
            let curve = cumulative_hardness(eh, transform)?;
            let r = elbow_threshold(&curve.y)?;
            (curve.order, r)
        }
    };
    let mut removed: Vec<usize> = order[..count].to_vec();
    removed.sort_unstable();
    let mut per_class = vec![0; k_classes];
    for &i in &removed {
        per_class[labels[i]] += 1;
    }
    Ok(DenoisePlan {
        mode,
        estimator: eh.estimator,
        threshold_fraction: count as f64 / n as f64,
        n_samples: n,
        removed_ids: removed,
        per_class_removed: per_class,
    })
}
