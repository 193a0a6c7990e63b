//! Feature matrices, exact kNN search and data-based hardness metrics.

mod dispersion;
mod family;
mod knn;
mod metrics;

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub use dispersion::{dispersion_metrics, DispersionMetrics};
pub use family::{classify_distribution, Family, FamilyReport};
pub use knn::{build_knn, knn_among, NeighborTable, DEFAULT_K};
pub use metrics::{
    centroid_metrics, centroids, knn_metrics, CentroidMetrics, KnnMetrics, Level, MetricId,
    MetricTable,
};

use crate::error::{HlabError, Result};

pub const HFEA_MAGIC: &[u8; 4] = b"HFEA";
pub const HFEA_VERSION: u32 = 1;

/// Labelled feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    n_samples: usize,
    dim: usize,
    k_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl FeatureSet {
    pub fn new(dim: usize, k_classes: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let n_samples = labels.len();
        if features.len() != n_samples * dim {
            return Err(HlabError::Incompatible(format!(
                "{} feature values for {n_samples} samples of dimension {dim}",
                features.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= k_classes) {
            return Err(HlabError::Parameter(format!(
                "label {y} of sample {i} is outside 0..{k_classes}"
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(HlabError::Validation {
                channel: "feature",
                epoch: 0,
                sample: if dim == 0 { 0 } else { pos / dim },
                reason: "not finite",
            });
        }
        if n_samples < k_classes {
            return Err(HlabError::Parameter(format!(
                "{n_samples} samples cannot cover {k_classes} classes"
            )));
        }
        Ok(FeatureSet {
            n_samples,
            dim,
            k_classes,
            features,
            labels,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_classes(&self) -> usize {
        self.k_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        class_sizes(&self.labels, self.k_classes)
    }

    /// Sample ids of each class, ascending.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y].push(i);
        }
        members
    }

    /// Rows `ids` in the given order, as a new set.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(ids.len() * self.dim);
        let mut labels = Vec::with_capacity(ids.len());
        for &i in ids {
            if i >= self.n_samples {
                return Err(HlabError::IndexOutOfRange {
                    what: "sample",
                    index: i,
                    len: self.n_samples,
                });
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        FeatureSet::new(self.dim, self.k_classes, features, labels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.n_samples * (2 + 4 * self.dim));
        out.extend_from_slice(HFEA_MAGIC);
        out.extend_from_slice(&HFEA_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_samples as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.k_classes as u32).to_le_bytes());
        for &y in &self.labels {
            out.extend_from_slice(&(y as u16).to_le_bytes());
        }
        for &v in &self.features {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != HFEA_MAGIC {
            return Err(HlabError::Format("bad magic, expected HFEA".into()));
        }
        if bytes.len() < 24 {
            return Err(HlabError::Corruption("truncated HFEA header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != HFEA_VERSION {
            return Err(HlabError::Format(format!("unsupported HFEA version {version}")));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let k = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
        if k > usize::from(u16::MAX) + 1 {
            return Err(HlabError::Format(format!("{k} classes do not fit u16 labels")));
        }
        let expected = n
            .checked_mul(2)
            .and_then(|l| n.checked_mul(dim)?.checked_mul(4)?.checked_add(l))
            .ok_or_else(|| HlabError::Corruption("dimensions overflow".into()))?;
        let payload = &bytes[24..];
        if payload.len() != expected {
            return Err(HlabError::Corruption(format!(
                "payload is {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let (label_bytes, feature_bytes) = payload.split_at(2 * n);
        let labels = label_bytes
            .chunks_exact(2)
            .map(|b| usize::from(u16::from_le_bytes([b[0], b[1]])))
            .collect();
        let features = feature_bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
            .collect();
        FeatureSet::new(dim, k, features, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if self.k_classes > usize::from(u16::MAX) + 1 {
            return Err(HlabError::Parameter("too many classes for u16 labels".into()));
        }
        let file = File::create(path).map_err(|e| HlabError::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| HlabError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| HlabError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn class_sizes(labels: &[usize], k_classes: usize) -> Vec<usize> {
    let mut sizes = vec![0; k_classes];
    for &y in labels {
        sizes[y] += 1;
    }
    sizes
}

/// Squared Euclidean distance, accumulated in dimension order.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hfea_round_trip() {
        let fs = FeatureSet::new(2, 2, vec![0.5, -1.0, 2.0, 3.25, 0.0, 0.0], vec![0, 1, 1]).unwrap();
        let bytes = fs.to_bytes();
        assert_eq!(&bytes[..4], b"HFEA");
        assert_eq!(bytes.len(), 24 + 3 * 2 + 6 * 4);
        assert_eq!(FeatureSet::from_bytes(&bytes).unwrap(), fs);
        assert!(matches!(
            FeatureSet::from_bytes(&bytes[..bytes.len() - 1]),
            Err(HlabError::Corruption(_))
        ));
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(FeatureSet::new(1, 2, vec![0.0], vec![2]).is_err());
        assert!(FeatureSet::new(1, 2, vec![f64::NAN, 1.0], vec![0, 1]).is_err());
        assert!(FeatureSet::new(1, 3, vec![0.0, 1.0], vec![0, 1]).is_err());
        assert!(FeatureSet::new(2, 1, vec![0.0], vec![0]).is_err());
    }

    #[test]
    fn label_only_set() {
        let fs = FeatureSet::new(0, 2, vec![], vec![0, 1, 1]).unwrap();
        assert_eq!(FeatureSet::from_bytes(&fs.to_bytes()).unwrap().class_sizes(), vec![1, 2]);
    }
}
