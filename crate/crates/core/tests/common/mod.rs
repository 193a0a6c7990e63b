//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use hlab::dynamics::{Estimator, EnsembleHardness};
use hlab::geometry::{FeatureSet, MetricId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn eh(estimator: Estimator, values: Vec<f64>) -> EnsembleHardness {
    EnsembleHardness {
        estimator,
        ensemble_size: 1,
        values,
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += (x - y) * (x - y);
    }
    s
}

/// Every instance-level geometry metric by direct definition: all n^2 pair
/// distances, a full sort per sample, and sums accumulated nearest first.
pub fn geometry_oracle(fs: &FeatureSet, k: usize) -> Vec<(MetricId, Vec<f64>)> {
    let n = fs.n_samples();
    let y = fs.labels();
    let kc = fs.k_classes();

    // class means in id order
    let mut cent = vec![vec![0.0; fs.dim()]; kc];
    let mut cnt = vec![0usize; kc];
    for i in 0..n {
        cnt[y[i]] += 1;
        for (c, v) in cent[y[i]].iter_mut().zip(fs.row(i)) {
            *c += v;
        }
    }
    for (c, &m) in cent.iter_mut().zip(&cnt) {
        for v in c.iter_mut() {
            *v /= m as f64;
        }
    }

    let ratio = |num: f64, den: f64| {
        if num == f64::INFINITY {
            f64::INFINITY
        } else if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };

    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 12];
    for i in 0..n {
        let mut all: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (sq(fs.row(i), fs.row(j)), j)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nn: Vec<(f64, usize)> = all[..k].iter().map(|&(s, j)| (s.sqrt(), j)).collect();

        let same: Vec<f64> = nn.iter().filter(|p| y[p.1] == y[i]).map(|p| p.0).collect();
        let other: Vec<f64> = nn.iter().filter(|p| y[p.1] != y[i]).map(|p| p.0).collect();
        let mean = |v: &[f64]| {
            let mut s = 0.0;
            for x in v {
                s += x;
            }
            s / v.len() as f64
        };
        let (mdsc, adsc) = if same.is_empty() {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (same[0], mean(&same))
        };
        let (mdoc, adoc) = if other.is_empty() {
            (0.0, 0.0)
        } else {
            (other[0], mean(&other))
        };
        let all_d: Vec<f64> = nn.iter().map(|p| p.0).collect();
        let n3 = if y[nn[0].1] != y[i] { 1.0 } else { 0.0 };

        let dcc = sq(fs.row(i), &cent[y[i]]).sqrt();
        let dnoc = (0..kc)
            .filter(|&c| c != y[i])
            .map(|c| sq(fs.row(i), &cent[c]).sqrt())
            .fold(f64::INFINITY, f64::min);
        let cdr = if dnoc == 0.0 { f64::INFINITY } else { dcc / dnoc };

        let row = [
            mdsc,
            adsc,
            mdoc,
            adoc,
            mean(&all_d),
            n3,
            other.len() as f64 / k as f64,
            dcc,
            dnoc,
            cdr,
            ratio(mdsc, mdoc),
            ratio(adsc, adoc),
        ];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let ids = [
        MetricId::Mdsc,
        MetricId::Adsc,
        MetricId::Mdoc,
        MetricId::Adoc,
        MetricId::Ad,
        MetricId::N3,
        MetricId::Cp,
        MetricId::Dcc,
        MetricId::Dnoc,
        MetricId::Cdr,
        MetricId::Mdr,
        MetricId::Adr,
    ];
    ids.into_iter().zip(cols).collect()
}

/// Random labelled point cloud. Some instances use small integer coordinates
/// (distance ties and duplicate points), some separate the classes far enough
/// that neighbourhoods are pure.
pub fn random_feature_set(r: &mut ChaCha8Rng, max_n: usize, max_d: usize, classes: std::ops::RangeInclusive<usize>) -> FeatureSet {
    let kc = r.random_range(classes);
    let n = r.random_range((2 * kc).max(3)..=max_n);
    let d = r.random_range(1..=max_d);
    let style = r.random_range(0..3);
    let mut labels: Vec<usize> = (0..kc).collect();
    labels.extend((kc..n).map(|_| r.random_range(0..kc)));
    let mut f = Vec::with_capacity(n * d);
    for &y in &labels {
        for _ in 0..d {
            f.push(match style {
                0 => r.random_range(-3i32..=3) as f64,
                1 => r.random_range(-1.0..1.0) + 100.0 * y as f64,
                _ => r.random_range(-2.0..2.0) + y as f64 * 0.5,
            });
        }
    }
    FeatureSet::new(d, kc, f, labels).unwrap()
}

/// Ids sorted easiest first by direct comparison, ties to the smaller id.
pub fn easiest_first_oracle(values: &[f64], estimator: Estimator) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..values.len()).collect();
    ids.sort_by(|&a, &b| {
        let ord = if estimator.high_is_hard() {
            values[a].partial_cmp(&values[b]).unwrap()
        } else {
            values[b].partial_cmp(&values[a]).unwrap()
        };
        ord.then(a.cmp(&b))
    });
    ids
}

/// `|b \ a| / |a| * 100` over explicit sets.
pub fn new_fraction_oracle(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<usize> = a.iter().copied().collect();
    let b: BTreeSet<usize> = b.iter().copied().collect();
    b.difference(&a).count() as f64 / a.len() as f64 * 100.0
}

/// Two-sided permutation p-value of Spearman's rho by listing every
/// permutation, with rho computed from `1 - 6 sum d^2 / (k (k^2 - 1))`.
/// Only valid without ties.
pub fn spearman_enum_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    use itertools::Itertools;
    let rank = |v: &[f64]| {
        let mut out = vec![0usize; v.len()];
        for (r, i) in (0..v.len()).sorted_by(|&x, &y| v[x].partial_cmp(&v[y]).unwrap()).enumerate() {
            out[i] = r + 1;
        }
        out
    };
    let k = a.len() as f64;
    let rho_of = |ra: &[usize], rb: &[usize]| {
        let d2: f64 = ra.iter().zip(rb).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
        1.0 - 6.0 * d2 / (k * (k * k - 1.0))
    };
    let ra = rank(a);
    let rb = rank(b);
    let rho = rho_of(&ra, &rb);
    let (mut hits, mut total) = (0usize, 0usize);
    for p in rb.iter().copied().permutations(rb.len()) {
        total += 1;
        if rho_of(&ra, &p).abs() >= rho.abs() - 1e-12 {
            hits += 1;
        }
    }
    (rho, hits as f64 / total as f64)
}
