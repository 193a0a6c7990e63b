//! Deterministic orderings of samples by hardness.

use crate::dynamics::Estimator;

/// Sample ids ordered hardest first under the estimator's polarity; ties go
/// to the smaller id.
pub fn hardest_first(values: &[f64], estimator: Estimator) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..values.len()).collect();
    sort_hardest_first(&mut ids, values, estimator);
    ids
}

/// Sample ids ordered easiest first; ties go to the smaller id.
pub fn easiest_first(values: &[f64], estimator: Estimator) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..values.len()).collect();
    sort_easiest_first(&mut ids, values, estimator);
    ids
}

/// Sorts `ids` (indices into `values`) hardest first.
pub fn sort_hardest_first(ids: &mut [usize], values: &[f64], estimator: Estimator) {
    ids.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        let ord = if estimator.high_is_hard() { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });
}

/// Sorts `ids` (indices into `values`) easiest first.
pub fn sort_easiest_first(ids: &mut [usize], values: &[f64], estimator: Estimator) {
    ids.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        let ord = if estimator.high_is_hard() { ord } else { ord.reverse() };
        ord.then(a.cmp(&b))
    });
}

/// Half-up rounding of a nonnegative quota.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}
