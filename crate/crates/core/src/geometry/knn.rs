use std::cmp::Ordering;

use rayon::prelude::*;

use super::{sq_dist, FeatureSet};
use crate::error::{HlabError, Result};

/// Neighbourhood size used by the data-based metrics.
pub const DEFAULT_K: usize = 40;

const QUERY_BLOCK: usize = 32;
const CANDIDATE_BLOCK: usize = 256;

/// Exact k nearest neighbours of every sample, self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    k: usize,
    ids: Vec<usize>,
    dists: Vec<f64>,
}

impl NeighborTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_samples(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.ids.len() / self.k
        }
    }

    /// Neighbour ids of `i`, nearest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.ids[i * self.k..(i + 1) * self.k]
    }

    /// Distances matching [`neighbors`](Self::neighbors), ascending.
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.dists[i * self.k..(i + 1) * self.k]
    }
}

#[derive(Clone, Copy)]
struct Cand {
    sq: f64,
    id: usize,
}

fn cand_cmp(a: &Cand, b: &Cand) -> Ordering {
    a.sq.total_cmp(&b.sq).then(a.id.cmp(&b.id))
}

/// Bounded sorted buffer keeping the `k` smallest candidates.
struct TopK {
    k: usize,
    items: Vec<Cand>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, c: Cand) {
        if self.items.len() == self.k {
            match self.items.last() {
                Some(last) if cand_cmp(&c, last) == Ordering::Less => {}
                _ => return,
            }
        }
        let pos = self.items.partition_point(|x| cand_cmp(x, &c) == Ordering::Less);
        self.items.insert(pos, c);
        if self.items.len() > self.k {
            self.items.pop();
        }
    }
}

/// Exact Euclidean kNN over the whole set. Ties on distance go to the smaller id.
pub fn build_knn(fs: &FeatureSet, k: usize) -> Result<NeighborTable> {
    let all: Vec<usize> = (0..fs.n_samples()).collect();
    let rows = knn_among(fs, &all, k)?;
    let mut ids = Vec::with_capacity(all.len() * k);
    let mut dists = Vec::with_capacity(all.len() * k);
    for row in rows {
        for (id, d) in row {
            ids.push(id);
            dists.push(d);
        }
    }
    Ok(NeighborTable { k, ids, dists })
}

/// Exact kNN restricted to `members`: every member's `k` nearest other members,
/// as `(sample id, distance)` pairs sorted ascending.
pub fn knn_among(fs: &FeatureSet, members: &[usize], k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    if k == 0 {
        return Err(HlabError::Parameter("k must be at least 1".into()));
    }
    if k >= members.len() {
        return Err(HlabError::Parameter(format!(
            "k = {k} needs more than {k} samples, got {}",
            members.len()
        )));
    }
    if let Some(&bad) = members.iter().find(|&&i| i >= fs.n_samples()) {
        return Err(HlabError::IndexOutOfRange {
            what: "sample",
            index: bad,
            len: fs.n_samples(),
        });
    }
    let blocks: Vec<Vec<Vec<(usize, f64)>>> = members
        .par_chunks(QUERY_BLOCK)
        .map(|queries| {
            let mut tops: Vec<TopK> = queries.iter().map(|_| TopK::new(k)).collect();
            for candidates in members.chunks(CANDIDATE_BLOCK) {
                for (q, top) in queries.iter().zip(tops.iter_mut()) {
                    let qrow = fs.row(*q);
                    for &c in candidates {
                        if c == *q {
                            continue;
                        }
                        top.offer(Cand {
                            sq: sq_dist(qrow, fs.row(c)),
                            id: c,
                        });
                    }
                }
            }
            tops.into_iter()
                .map(|t| t.items.into_iter().map(|c| (c.id, c.sq.sqrt())).collect())
                .collect()
        })
        .collect();
    Ok(blocks.into_iter().flatten().collect())
}
