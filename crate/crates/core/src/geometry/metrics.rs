//! Centroid- and neighbourhood-based hardness metrics.
//!
//! Neighbourhood metrics are undefined when a sample's kNN subset of one kind
//! is empty. Distances to the same class then become `+inf` (the sample is
//! isolated from its class) and distances to other classes become `0` (the
//! sample is surrounded by its own class).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{sq_dist, FeatureSet, NeighborTable};
use crate::error::{HlabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MetricId {
    Dcc,
    V,
    Maxl,
    Avgl,
    Mdsc,
    Adsc,
    Dnoc,
    Mdoc,
    Adoc,
    N3,
    Cp,
    Cdr,
    Mdr,
    Adr,
    Ad,
}

impl MetricId {
    pub const ALL: [MetricId; 15] = [
        MetricId::Dcc,
        MetricId::V,
        MetricId::Maxl,
        MetricId::Avgl,
        MetricId::Mdsc,
        MetricId::Adsc,
        MetricId::Dnoc,
        MetricId::Mdoc,
        MetricId::Adoc,
        MetricId::N3,
        MetricId::Cp,
        MetricId::Cdr,
        MetricId::Mdr,
        MetricId::Adr,
        MetricId::Ad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Dcc => "DCC",
            MetricId::V => "V",
            MetricId::Maxl => "MAXL",
            MetricId::Avgl => "AVGL",
            MetricId::Mdsc => "MDSC",
            MetricId::Adsc => "ADSC",
            MetricId::Dnoc => "DNOC",
            MetricId::Mdoc => "MDOC",
            MetricId::Adoc => "ADOC",
            MetricId::N3 => "N3",
            MetricId::Cp => "CP",
            MetricId::Cdr => "CDR",
            MetricId::Mdr => "MDR",
            MetricId::Adr => "ADR",
            MetricId::Ad => "AD",
        }
    }

    pub fn level(self) -> Level {
        match self {
            MetricId::V | MetricId::Maxl | MetricId::Avgl => Level::Class,
            _ => Level::Instance,
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = HlabError;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| HlabError::Parameter(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Instance,
    Class,
}

/// One metric's values, per sample or per class.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub metric: MetricId,
    pub level: Level,
    pub values: Vec<f64>,
}

impl MetricTable {
    pub fn new(metric: MetricId, values: Vec<f64>) -> Self {
        MetricTable {
            metric,
            level: metric.level(),
            values,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CentroidMetrics {
    pub dcc: MetricTable,
    pub dnoc: MetricTable,
    pub cdr: MetricTable,
    /// Samples whose CDR is infinite because an other-class centroid coincides with them.
    pub infinite_cdr: usize,
}

impl CentroidMetrics {
    pub fn tables(&self) -> [&MetricTable; 3] {
        [&self.dcc, &self.dnoc, &self.cdr]
    }
}

#[derive(Debug, Clone)]
pub struct KnnMetrics {
    pub mdsc: MetricTable,
    pub adsc: MetricTable,
    pub mdoc: MetricTable,
    pub adoc: MetricTable,
    pub mdr: MetricTable,
    pub adr: MetricTable,
    pub ad: MetricTable,
    pub n3: MetricTable,
    pub cp: MetricTable,
}

impl KnnMetrics {
    pub fn tables(&self) -> [&MetricTable; 9] {
        [
            &self.mdsc, &self.adsc, &self.mdoc, &self.adoc, &self.mdr, &self.adr, &self.ad,
            &self.n3, &self.cp,
        ]
    }
}

/// Class means, each accumulated in sample-id order.
pub fn centroids(fs: &FeatureSet) -> Result<Vec<Vec<f64>>> {
    let dim = fs.dim();
    let mut sums = vec![vec![0.0; dim]; fs.k_classes()];
    let mut counts = vec![0usize; fs.k_classes()];
    for i in 0..fs.n_samples() {
        let y = fs.labels()[i];
        counts[y] += 1;
        for (s, v) in sums[y].iter_mut().zip(fs.row(i)) {
            *s += v;
        }
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(HlabError::DegenerateClass { class });
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    Ok(sums)
}

/// Ratio for MDR and ADR after undefined values have been replaced.
pub(crate) fn neighbor_ratio(num: f64, den: f64) -> f64 {
    if num.is_infinite() {
        f64::INFINITY
    } else if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// DCC, DNOC and their ratio CDR.
pub fn centroid_metrics(fs: &FeatureSet) -> Result<CentroidMetrics> {
    if fs.k_classes() < 2 {
        return Err(HlabError::Parameter(
            "centroid metrics need at least two classes".into(),
        ));
    }
    let cents = centroids(fs)?;
    let n = fs.n_samples();
    let mut dcc = Vec::with_capacity(n);
    let mut dnoc = Vec::with_capacity(n);
    let mut cdr = Vec::with_capacity(n);
    let mut infinite_cdr = 0;
    for i in 0..n {
        let x = fs.row(i);
        let y = fs.labels()[i];
        let own = sq_dist(x, &cents[y]).sqrt();
        let other = cents
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != y)
            .map(|(_, cent)| sq_dist(x, cent).sqrt())
            .fold(f64::INFINITY, f64::min);
        let ratio = if other == 0.0 {
            infinite_cdr += 1;
            f64::INFINITY
        } else {
            own / other
        };
        dcc.push(own);
        dnoc.push(other);
        cdr.push(ratio);
    }
    if infinite_cdr > 0 {
        log::warn!("{infinite_cdr} samples sit on an other-class centroid; their CDR is +inf");
    }
    Ok(CentroidMetrics {
        dcc: MetricTable::new(MetricId::Dcc, dcc),
        dnoc: MetricTable::new(MetricId::Dnoc, dnoc),
        cdr: MetricTable::new(MetricId::Cdr, cdr),
        infinite_cdr,
    })
}

/// Neighbourhood metrics over the table's kNN subsets.
pub fn knn_metrics(fs: &FeatureSet, nt: &NeighborTable) -> Result<KnnMetrics> {
    let n = fs.n_samples();
    if nt.n_samples() != n {
        return Err(HlabError::Incompatible(format!(
            "neighbour table covers {} samples, feature set has {n}",
            nt.n_samples()
        )));
    }
    let k = nt.k();
    let mut cols: [Vec<f64>; 9] = Default::default();
    for i in 0..n {
        let y = fs.labels()[i];
        let ids = nt.neighbors(i);
        let dists = nt.distances(i);
        let (mut same_n, mut same_sum, mut same_min) = (0usize, 0.0, f64::INFINITY);
        let (mut other_n, mut other_sum, mut other_min) = (0usize, 0.0, f64::INFINITY);
        let mut all_sum = 0.0;
        for (&j, &d) in ids.iter().zip(dists) {
            if j >= n {
                return Err(HlabError::Incompatible(format!(
                    "neighbour id {j} outside the feature set"
                )));
            }
            all_sum += d;
            if fs.labels()[j] == y {
                same_n += 1;
                same_sum += d;
                same_min = same_min.min(d);
            } else {
                other_n += 1;
                other_sum += d;
                other_min = other_min.min(d);
            }
        }
        let (mdsc, adsc) = if same_n == 0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (same_min, same_sum / same_n as f64)
        };
        let (mdoc, adoc) = if other_n == 0 {
            (0.0, 0.0)
        } else {
            (other_min, other_sum / other_n as f64)
        };
        let n3 = match ids.first() {
            Some(&j) if fs.labels()[j] != y => 1.0,
            _ => 0.0,
        };
        let row = [
            mdsc,
            adsc,
            mdoc,
            adoc,
            neighbor_ratio(mdsc, mdoc),
            neighbor_ratio(adsc, adoc),
            all_sum / k as f64,
            n3,
            other_n as f64 / k as f64,
        ];
        for (col, v) in cols.iter_mut().zip(row) {
            col.push(v);
        }
    }
    let [mdsc, adsc, mdoc, adoc, mdr, adr, ad, n3, cp] = cols;
    Ok(KnnMetrics {
        mdsc: MetricTable::new(MetricId::Mdsc, mdsc),
        adsc: MetricTable::new(MetricId::Adsc, adsc),
        mdoc: MetricTable::new(MetricId::Mdoc, mdoc),
        adoc: MetricTable::new(MetricId::Adoc, adoc),
        mdr: MetricTable::new(MetricId::Mdr, mdr),
        adr: MetricTable::new(MetricId::Adr, adr),
        ad: MetricTable::new(MetricId::Ad, ad),
        n3: MetricTable::new(MetricId::N3, n3),
        cp: MetricTable::new(MetricId::Cp, cp),
    })
}
