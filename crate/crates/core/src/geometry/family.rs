//! Distribution-family classification of sorted metric curves and adaptive
//! division points.
//!
//! Values are sorted ascending and differentiated with forward differences.
//! A rank belongs to a plateau when its gradient stays below
//! `g_min + 0.025 (g_max - g_min)` for at least `ceil(0.01 n)` consecutive
//! ranks. Where those plateaus sit decides the family:
//!
//! * plateau reaching only the top ranks: logarithmic (one division point)
//! * plateau reaching only the bottom ranks: exponential (one division point)
//! * plateaus in the interior or at both ends: inverse cumulative (two points)
//!
//! Infinite values sort into the tail blocks; steps between two equal
//! infinities are flat, and steps into or out of an infinity count as `g_max`.

use std::cmp::Ordering;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{HlabError, Result};

pub const GRADIENT_FRACTION: f64 = 0.025;
pub const WINDOW_FRACTION: f64 = 0.01;
pub const MIN_FINITE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logarithmic,
    InverseCumulative,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: Family,
    /// First rank of each segment after the first, ascending.
    pub division_points: Vec<usize>,
    pub gradient_threshold: f64,
    pub n: usize,
    pub window: usize,
    /// Sample ids in ascending value order (ties by id).
    #[serde(skip)]
    pub order: Vec<usize>,
}

impl FamilyReport {
    /// Rank ranges of the easy/(medium)/hard segments in ascending-value order.
    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut bounds = vec![0];
        bounds.extend(&self.division_points);
        bounds.push(self.n);
        bounds.windows(2).map(|w| w[0]..w[1]).collect()
    }

    pub fn segment_of_rank(&self, rank: usize) -> usize {
        self.division_points.iter().filter(|&&p| p <= rank).count()
    }
}

#[derive(Clone, Copy)]
enum Step {
    Finite(f64),
    Flat,
    Jump,
}

pub fn classify_distribution(values: &[f64]) -> Result<FamilyReport> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(HlabError::Domain("metric values contain NaN".into()));
    }
    let finite = values.iter().filter(|v| v.is_finite()).count();
    if finite < MIN_FINITE {
        return Err(HlabError::Degenerate(format!(
            "{finite} finite values, need at least {MIN_FINITE}"
        )));
    }
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let steps: Vec<Step> = sorted
        .windows(2)
        .map(|w| match (w[0].is_finite(), w[1].is_finite()) {
            (true, true) => Step::Finite(w[1] - w[0]),
            (false, false) if w[0] == w[1] => Step::Flat,
            _ => Step::Jump,
        })
        .collect();
    let (mut g_min, mut g_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut any_flat = false;
    for s in &steps {
        match *s {
            Step::Finite(g) => {
                g_min = g_min.min(g);
                g_max = g_max.max(g);
            }
            Step::Flat => any_flat = true,
            Step::Jump => {}
        }
    }
    if any_flat {
        g_min = g_min.min(0.0);
    }
    if g_max.partial_cmp(&g_min) != Some(Ordering::Greater) {
        return Err(HlabError::Degenerate(
            "sorted values have a constant gradient".into(),
        ));
    }
    let threshold = g_min + GRADIENT_FRACTION * (g_max - g_min);
    let low: Vec<bool> = steps
        .iter()
        .map(|s| match *s {
            Step::Finite(g) => g < threshold,
            Step::Flat => true,
            Step::Jump => false,
        })
        .collect();

    let window = ((WINDOW_FRACTION * n as f64).ceil() as usize).max(1);
    let runs = persistent_runs(&low, window);
    let (first, last) = match (runs.first(), runs.last()) {
        (Some(f), Some(l)) => (f.clone(), l.clone()),
        _ => {
            return Err(HlabError::Degenerate(
                "no gradient plateau persists for the window".into(),
            ))
        }
    };
    let n_steps = low.len();
    let touches_low = first.start == 0;
    let touches_high = last.end == n_steps;

    // A plateau over steps a..b covers sample ranks a..=b.
    let (family, division_points) = match (touches_low, touches_high) {
        (false, true) => (Family::Logarithmic, vec![first.start]),
        (true, false) => (Family::Exponential, vec![first.end + 1]),
        (false, false) => (Family::InverseCumulative, vec![first.start, last.end + 1]),
        (true, true) => {
            let lead_end = first.end + 1;
            let trail_start = last.start;
            if lead_end < trail_start {
                (Family::InverseCumulative, vec![lead_end, trail_start])
            } else if lead_end >= n - trail_start {
                // a single step between two plateaus: the longer plateau wins
                (Family::Exponential, vec![lead_end])
            } else {
                (Family::Logarithmic, vec![lead_end])
            }
        }
    };
    debug_assert!(division_points.iter().all(|&p| p > 0 && p < n));
    Ok(FamilyReport {
        family,
        division_points,
        gradient_threshold: threshold,
        n,
        window,
        order,
    })
}

/// Maximal runs of `true` with length at least `window`, as index ranges.
fn persistent_runs(mask: &[bool], window: usize) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &b) in mask.iter().chain(std::iter::once(&false)).enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= window {
                    runs.push(s..i);
                }
                start = None;
            }
            _ => {}
        }
    }
    runs
}
