use nalgebra::{DMatrix, SymmetricEigen};

use super::{centroids, FeatureSet, MetricId, MetricTable};
use crate::error::{HlabError, Result};

/// Class-level dispersion: volume `V`, and the largest and mean covariance eigenvalue.
#[derive(Debug, Clone)]
pub struct DispersionMetrics {
    pub volume: MetricTable,
    pub max_lambda: MetricTable,
    pub avg_lambda: MetricTable,
    /// `ln V` per class; `-inf` for rank-deficient classes.
    pub log_volume: Vec<f64>,
}

/// Per-class `V = sqrt(det((1/m) Z Z^T))` over centred class samples `Z`, and
/// the spectrum of the unbiased class covariance.
pub fn dispersion_metrics(fs: &FeatureSet) -> Result<DispersionMetrics> {
    let members = fs.class_members();
    if let Some(class) = members.iter().position(|m| m.len() < 2) {
        return Err(if members[class].is_empty() {
            HlabError::DegenerateClass { class }
        } else {
            HlabError::Parameter(format!("class {class} needs at least 2 samples for dispersion"))
        });
    }
    if fs.dim() == 0 {
        return Err(HlabError::Parameter("dispersion needs at least one feature".into()));
    }
    let cents = centroids(fs)?;
    let d = fs.dim();
    let k = fs.k_classes();
    let (mut vol, mut maxl, mut avgl, mut logv) = (
        Vec::with_capacity(k),
        Vec::with_capacity(k),
        Vec::with_capacity(k),
        Vec::with_capacity(k),
    );
    for (ids, cent) in members.iter().zip(&cents) {
        let m = ids.len();
        let mut scatter = DMatrix::<f64>::zeros(d, d);
        let mut z = vec![0.0; d];
        for &i in ids {
            for ((zc, x), c) in z.iter_mut().zip(fs.row(i)).zip(cent) {
                *zc = x - c;
            }
            for r in 0..d {
                for c in r..d {
                    scatter[(r, c)] += z[r] * z[c];
                }
            }
        }
        for r in 0..d {
            for c in 0..r {
                scatter[(r, c)] = scatter[(c, r)];
            }
        }
        let eig = SymmetricEigen::new(scatter).eigenvalues;
        // eigenvalues of the scatter matrix; clamp round-off below zero
        let scatter_eigs: Vec<f64> = eig.iter().map(|&l| l.max(0.0)).collect();
        let top = scatter_eigs.iter().cloned().fold(0.0, f64::max);
        let cov: Vec<f64> = scatter_eigs.iter().map(|l| l / (m - 1) as f64).collect();
        maxl.push(top / (m - 1) as f64);
        avgl.push(cov.iter().sum::<f64>() / d as f64);

        let tol = top * f64::EPSILON * d as f64;
        let log_v = if top == 0.0 || scatter_eigs.iter().any(|&l| l <= tol) {
            f64::NEG_INFINITY
        } else {
            0.5 * scatter_eigs.iter().map(|l| (l / m as f64).ln()).sum::<f64>()
        };
        logv.push(log_v);
        vol.push(log_v.exp());
    }
    Ok(DispersionMetrics {
        volume: MetricTable::new(MetricId::V, vol),
        max_lambda: MetricTable::new(MetricId::Maxl, maxl),
        avg_lambda: MetricTable::new(MetricId::Avgl, avgl),
        log_volume: logv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_have_no_spread() {
        let fs = FeatureSet::new(2, 1, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0], vec![0, 0, 0]).unwrap();
        let dm = dispersion_metrics(&fs).unwrap();
        assert_eq!(dm.max_lambda.values, vec![0.0]);
        assert_eq!(dm.avg_lambda.values, vec![0.0]);
        assert_eq!(dm.volume.values, vec![0.0]);
    }

    #[test]
    fn axis_aligned_class() {
        // points (±1, 0), (0, ±2): covariance diag(2/3, 8/3)
        let fs = FeatureSet::new(
            2,
            1,
            vec![1.0, 0.0, -1.0, 0.0, 0.0, 2.0, 0.0, -2.0],
            vec![0, 0, 0, 0],
        )
        .unwrap();
        let dm = dispersion_metrics(&fs).unwrap();
        assert!((dm.max_lambda.values[0] - 8.0 / 3.0).abs() < 1e-12);
        assert!((dm.avg_lambda.values[0] - 5.0 / 3.0).abs() < 1e-12);
        // (1/m) Z Z^T = diag(0.5, 2) -> sqrt(det) = 1
        assert!((dm.volume.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_class_rejected() {
        let fs = FeatureSet::new(1, 2, vec![0.0, 1.0, 2.0], vec![0, 0, 1]).unwrap();
        assert!(dispersion_metrics(&fs).is_err());
    }
}
