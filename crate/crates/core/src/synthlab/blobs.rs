use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HlabError, Result};
use crate::geometry::FeatureSet;

/// Every `HOLDOUT_EVERY`-th sample of a class (by position) is held out.
pub const HOLDOUT_EVERY: usize = 5;

/// Isotropic Gaussian class clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub k_classes: usize,
    pub per_class_n: Vec<usize>,
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub seed: u64,
}

impl BlobSpec {
    fn validate(&self) -> Result<()> {
        let k = self.k_classes;
        if k == 0 || self.dim == 0 {
            return Err(HlabError::Parameter("blobs need at least one class and one dimension".into()));
        }
        if self.per_class_n.len() != k || self.centers.len() != k || self.scales.len() != k {
            return Err(HlabError::Parameter(format!("blob spec vectors must all have {k} entries")));
        }
        if let Some(c) = self.centers.iter().position(|c| c.len() != self.dim) {
            return Err(HlabError::Parameter(format!("center {c} is not {}-dimensional", self.dim)));
        }
        if let Some(c) = self.scales.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(HlabError::Parameter(format!("class {c} scale must be positive and finite")));
        }
        if let Some(c) = self.per_class_n.iter().position(|&n| n < 2) {
            return Err(HlabError::Parameter(format!("class {c} needs at least 2 samples")));
        }
        Ok(())
    }
}

/// Samples every class in order; features are rounded to `f32` so that the
/// set survives an HFEA round trip unchanged.
pub fn generate_blobs(spec: &BlobSpec) -> Result<FeatureSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total: usize = spec.per_class_n.iter().sum();
    let mut features = Vec::with_capacity(total * spec.dim);
    let mut labels = Vec::with_capacity(total);
    for c in 0..spec.k_classes {
        for _ in 0..spec.per_class_n[c] {
            for &mu in &spec.centers[c] {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(f64::from((mu + spec.scales[c] * z) as f32));
            }
            labels.push(c);
        }
    }
    FeatureSet::new(spec.dim, spec.k_classes, features, labels)
}

/// Four 2-D classes of `per_class` samples: three well separated, and class 3
/// sitting between them with a wider spread.
pub fn four_blob_spec(per_class: usize, seed: u64) -> BlobSpec {
    BlobSpec {
        k_classes: 4,
        per_class_n: vec![per_class; 4],
        dim: 2,
        centers: vec![vec![-4.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0], vec![0.0, 0.0]],
        scales: vec![1.0, 1.0, 1.0, 1.2],
        seed,
    }
}

#[derive(Debug, Clone)]
pub struct Holdout {
    pub train: FeatureSet,
    pub test: FeatureSet,
    /// Original ids of the train and test rows.
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

/// Stratified 80/20 split: within each class, every fifth sample goes to test.
pub fn stratified_holdout(fs: &FeatureSet) -> Result<Holdout> {
    let mut train_ids = Vec::new();
    let mut test_ids = Vec::new();
    let mut seen = vec![0usize; fs.k_classes()];
    for (i, &y) in fs.labels().iter().enumerate() {
        if seen[y] % HOLDOUT_EVERY == HOLDOUT_EVERY - 1 {
            test_ids.push(i);
        } else {
            train_ids.push(i);
        }
        seen[y] += 1;
    }
    if let Some(class) = seen.iter().position(|&s| s < HOLDOUT_EVERY) {
        return Err(HlabError::Parameter(format!(
            "class {class} has fewer than {HOLDOUT_EVERY} samples to split"
        )));
    }
    Ok(Holdout {
        train: fs.subset(&train_ids)?,
        test: fs.subset(&test_ids)?,
        train_ids,
        test_ids,
    })
}
