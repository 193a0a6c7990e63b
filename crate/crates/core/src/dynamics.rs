//! Training-dynamics logs and the model-based hardness estimators built on
//! them (AUM, EL2N, Forgetting), plus ensemble averaging.
//!
//! Logs are stored in the HDYN binary layout:
//!
//! ```text
//! "HDYN" | version u32 = 1 | n_samples u64 | n_epochs u32 | flags u32
//!        | model_id_len u16 | model_id utf-8
//!        | channel payloads in flag order, epoch-major
//! ```
//!
//! All integers and floats are little-endian. `margin`, `loss` and `errnorm`
//! are 32-bit IEEE-754; `correct` is packed one bit per sample (LSB first),
//! with every epoch row padded to a whole byte.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HlabError, Result};

pub const HDYN_MAGIC: &[u8; 4] = b"HDYN";
pub const HDYN_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Margin,
    Loss,
    Correct,
    Errnorm,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::Margin,
        Channel::Loss,
        Channel::Correct,
        Channel::Errnorm,
    ];

    pub fn bit(self) -> u32 {
        match self {
            Channel::Margin => 1 << 0,
            Channel::Loss => 1 << 1,
            Channel::Correct => 1 << 2,
            Channel::Errnorm => 1 << 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Margin => "margin",
            Channel::Loss => "loss",
            Channel::Correct => "correct",
            Channel::Errnorm => "errnorm",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bitmask of the channels present in a log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelFlags(pub u32);

impl ChannelFlags {
    pub const KNOWN: u32 = 0b1111;

    pub fn contains(self, channel: Channel) -> bool {
        self.0 & channel.bit() != 0
    }

    pub fn insert(&mut self, channel: Channel) {
        self.0 |= channel.bit();
    }
}

/// A dense `n_epochs x n_samples` matrix stored epoch-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMatrix<T> {
    n_epochs: usize,
    n_samples: usize,
    data: Vec<T>,
}

impl<T: Copy> EpochMatrix<T> {
    pub fn new(n_epochs: usize, n_samples: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_epochs * n_samples {
            return Err(HlabError::Incompatible(format!(
                "matrix payload has {} entries, expected {n_epochs} x {n_samples}",
                data.len()
            )));
        }
        Ok(EpochMatrix {
            n_epochs,
            n_samples,
            data,
        })
    }

    /// Builds a matrix from per-epoch rows.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_epochs = rows.len();
        let n_samples = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_samples) {
            return Err(HlabError::Incompatible("ragged epoch rows".into()));
        }
        let data = rows.into_iter().flatten().collect();
        Self::new(n_epochs, n_samples, data)
    }

    pub fn n_epochs(&self) -> usize {
        self.n_epochs
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn get(&self, epoch: usize, sample: usize) -> T {
        self.data[epoch * self.n_samples + sample]
    }

    pub fn row(&self, epoch: usize) -> &[T] {
        &self.data[epoch * self.n_samples..(epoch + 1) * self.n_samples]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Per-epoch, per-sample training signal recorded for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsLog {
    pub model_id: String,
    n_samples: usize,
    n_epochs: usize,
    margin: Option<EpochMatrix<f32>>,
    loss: Option<EpochMatrix<f32>>,
    correct: Option<EpochMatrix<bool>>,
    errnorm: Option<EpochMatrix<f32>>,
}

impl DynamicsLog {
    pub fn new(model_id: impl Into<String>, n_samples: usize, n_epochs: usize) -> Self {
        DynamicsLog {
            model_id: model_id.into(),
            n_samples,
            n_epochs,
            margin: None,
            loss: None,
            correct: None,
            errnorm: None,
        }
    }

    fn check_dims<T: Copy>(&self, m: &EpochMatrix<T>, channel: Channel) -> Result<()> {
        if m.n_epochs != self.n_epochs || m.n_samples != self.n_samples {
            return Err(HlabError::Incompatible(format!(
                "{channel} matrix is {} x {}, log is {} x {}",
                m.n_epochs, m.n_samples, self.n_epochs, self.n_samples
            )));
        }
        Ok(())
    }

    pub fn with_margin(mut self, m: EpochMatrix<f32>) -> Result<Self> {
        self.check_dims(&m, Channel::Margin)?;
        validate_reals(&m, Channel::Margin, false)?;
        self.margin = Some(m);
        Ok(self)
    }

    pub fn with_loss(mut self, m: EpochMatrix<f32>) -> Result<Self> {
        self.check_dims(&m, Channel::Loss)?;
        validate_reals(&m, Channel::Loss, true)?;
        self.loss = Some(m);
        Ok(self)
    }

    pub fn with_correct(mut self, m: EpochMatrix<bool>) -> Result<Self> {
        self.check_dims(&m, Channel::Correct)?;
        self.correct = Some(m);
        Ok(self)
    }

    pub fn with_errnorm(mut self, m: EpochMatrix<f32>) -> Result<Self> {
        self.check_dims(&m, Channel::Errnorm)?;
        validate_reals(&m, Channel::Errnorm, true)?;
        self.errnorm = Some(m);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_epochs(&self) -> usize {
        self.n_epochs
    }

    pub fn margin(&self) -> Option<&EpochMatrix<f32>> {
        self.margin.as_ref()
    }

    pub fn loss(&self) -> Option<&EpochMatrix<f32>> {
        self.loss.as_ref()
    }

    pub fn correct(&self) -> Option<&EpochMatrix<bool>> {
        self.correct.as_ref()
    }

    pub fn errnorm(&self) -> Option<&EpochMatrix<f32>> {
        self.errnorm.as_ref()
    }

    pub fn channel_flags(&self) -> ChannelFlags {
        let mut flags = ChannelFlags::default();
        if self.margin.is_some() {
            flags.insert(Channel::Margin);
        }
        if self.loss.is_some() {
            flags.insert(Channel::Loss);
        }
        if self.correct.is_some() {
            flags.insert(Channel::Correct);
        }
        if self.errnorm.is_some() {
            flags.insert(Channel::Errnorm);
        }
        flags
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let id = self.model_id.as_bytes();
        let id_len = u16::try_from(id.len()).map_err(|_| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "model id longer than 65535 bytes")
        })?;
        w.write_all(HDYN_MAGIC)?;
        w.write_all(&HDYN_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_samples as u64).to_le_bytes())?;
        w.write_all(&(self.n_epochs as u32).to_le_bytes())?;
        w.write_all(&self.channel_flags().0.to_le_bytes())?;
        w.write_all(&id_len.to_le_bytes())?;
        w.write_all(id)?;
        for m in [&self.margin, &self.loss] {
            if let Some(m) = m {
                write_f32s(w, m.as_slice())?;
            }
        }
        if let Some(c) = &self.correct {
            let row_bytes = self.n_samples.div_ceil(8);
            let mut buf = vec![0u8; row_bytes];
            for e in 0..self.n_epochs {
                buf.iter_mut().for_each(|b| *b = 0);
                for (i, &bit) in c.row(e).iter().enumerate() {
                    if bit {
                        buf[i / 8] |= 1 << (i % 8);
                    }
                }
                w.write_all(&buf)?;
            }
        }
        if let Some(m) = &self.errnorm {
            write_f32s(w, m.as_slice())?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| HlabError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| HlabError::io(path, e))
    }

    /// Decodes and validates an HDYN byte buffer.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4).ok_or_else(|| HlabError::Format("file shorter than magic".into()))?;
        if magic != HDYN_MAGIC {
            return Err(HlabError::Format(format!("bad magic {magic:?}, expected HDYN")));
        }
        let header = |v: Option<u64>| v.ok_or_else(|| HlabError::Corruption("truncated header".into()));
        let version = header(cur.u32().map(u64::from))? as u32;
        if version != HDYN_VERSION {
            return Err(HlabError::Format(format!("unsupported HDYN version {version}")));
        }
        let n_samples = usize::try_from(header(cur.u64())?)
            .map_err(|_| HlabError::Corruption("sample count overflows usize".into()))?;
        let n_epochs = header(cur.u32().map(u64::from))? as usize;
        let flags = header(cur.u32().map(u64::from))? as u32;
        if flags & !ChannelFlags::KNOWN != 0 {
            return Err(HlabError::Format(format!("unknown channel flag bits {flags:#x}")));
        }
        let flags = ChannelFlags(flags);
        let id_len = header(cur.u16().map(u64::from))? as usize;
        let id_bytes = cur
            .take(id_len)
            .ok_or_else(|| HlabError::Corruption("truncated model id".into()))?;
        let model_id = String::from_utf8(id_bytes.to_vec())
            .map_err(|_| HlabError::Format("model id is not valid UTF-8".into()))?;

        let cells = n_samples
            .checked_mul(n_epochs)
            .ok_or_else(|| HlabError::Corruption("dimensions overflow".into()))?;
        let row_bytes = n_samples.div_ceil(8);
        let mut expected = 0usize;
        for ch in Channel::ALL {
            if flags.contains(ch) {
                expected += match ch {
                    Channel::Correct => row_bytes * n_epochs,
                    _ => cells * 4,
                };
            }
        }
        let remaining = bytes.len() - cur.pos;
        if remaining != expected {
            return Err(HlabError::Corruption(format!(
                "payload is {remaining} bytes, header implies {expected}"
            )));
        }

        let mut log = DynamicsLog::new(model_id, n_samples, n_epochs);
        if flags.contains(Channel::Margin) {
            log = log.with_margin(EpochMatrix::new(n_epochs, n_samples, cur.f32s(cells))?)?;
        }
        if flags.contains(Channel::Loss) {
            log = log.with_loss(EpochMatrix::new(n_epochs, n_samples, cur.f32s(cells))?)?;
        }
        if flags.contains(Channel::Correct) {
            let packed = cur.take(row_bytes * n_epochs).expect("length checked above");
            let mut data = Vec::with_capacity(cells);
            for row in packed.chunks(row_bytes.max(1)).take(n_epochs) {
                data.extend((0..n_samples).map(|i| row[i / 8] >> (i % 8) & 1 == 1));
            }
            log = log.with_correct(EpochMatrix::new(n_epochs, n_samples, data)?)?;
        }
        if flags.contains(Channel::Errnorm) {
            log = log.with_errnorm(EpochMatrix::new(n_epochs, n_samples, cur.f32s(cells))?)?;
        }
        Ok(log)
    }
}

/// Reads and validates an HDYN file.
pub fn parse_dynamics(path: impl AsRef<Path>) -> Result<DynamicsLog> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| HlabError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| HlabError::io(path, e))?;
    DynamicsLog::from_bytes(&bytes)
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

fn validate_reals(m: &EpochMatrix<f32>, channel: Channel, nonneg: bool) -> Result<()> {
    for (idx, &v) in m.data.iter().enumerate() {
        let reason = if v.is_nan() {
            "NaN"
        } else if nonneg && v.is_infinite() {
            "not finite"
        } else if nonneg && v < 0.0 {
            "negative"
        } else {
            continue;
        };
        return Err(HlabError::Validation {
            channel: channel.name(),
            epoch: idx / m.n_samples,
            sample: idx % m.n_samples,
            reason,
        });
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes(b.try_into().unwrap()))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    // Callers check the total payload length first.
    fn f32s(&mut self, n: usize) -> Vec<f32> {
        self.take(n * 4)
            .expect("length checked above")
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect()
    }
}

/// Which model-based hardness estimator produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Aum,
    El2n,
    Forgetting,
}

impl Estimator {
    /// AUM is low for hard samples; EL2N and Forgetting are high.
    pub fn high_is_hard(self) -> bool {
        !matches!(self, Estimator::Aum)
    }

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Aum => "aum",
            Estimator::El2n => "el2n",
            Estimator::Forgetting => "forgetting",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Estimator {
    type Err = HlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aum" => Ok(Estimator::Aum),
            "el2n" => Ok(Estimator::El2n),
            "forgetting" => Ok(Estimator::Forgetting),
            other => Err(HlabError::Parameter(format!("unknown estimator {other:?}"))),
        }
    }
}

/// How samples that are never predicted correctly are scored by Forgetting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForgettingMode {
    /// Pure count of correct -> incorrect transitions.
    #[default]
    EventCount,
    /// Never-correct samples score `n_epochs`, above any attainable count.
    NeverLearnedMax,
}

/// Per-sample hardness from a single model.
#[derive(Debug, Clone, PartialEq)]
pub struct HardnessVector {
    pub estimator: Estimator,
    pub values: Vec<f64>,
    pub model_id: String,
}

/// Per-sample hardness averaged over an ensemble of `ensemble_size` models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHardness {
    pub estimator: Estimator,
    pub ensemble_size: usize,
    pub values: Vec<f64>,
}

impl EnsembleHardness {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Area under the margin: mean margin over all logged epochs.
pub fn compute_aum(log: &DynamicsLog) -> Result<HardnessVector> {
    let margin = log.margin().ok_or(HlabError::MissingChannel(Channel::Margin))?;
    let epochs = log.n_epochs();
    if epochs == 0 {
        return Err(HlabError::Parameter("AUM needs at least one epoch".into()));
    }
    let values = (0..log.n_samples())
        .map(|i| {
            let total: f64 = (0..epochs).map(|e| f64::from(margin.get(e, i))).sum();
            total / epochs as f64
        })
        .collect();
    Ok(HardnessVector {
        estimator: Estimator::Aum,
        values,
        model_id: log.model_id.clone(),
    })
}

/// EL2N: the softmax error norm recorded at `probe_epoch` (0-based).
pub fn compute_el2n(log: &DynamicsLog, probe_epoch: usize) -> Result<HardnessVector> {
    let errnorm = log.errnorm().ok_or(HlabError::MissingChannel(Channel::Errnorm))?;
    if probe_epoch >= log.n_epochs() {
        return Err(HlabError::IndexOutOfRange {
            what: "probe epoch",
            index: probe_epoch,
            len: log.n_epochs(),
        });
    }
    Ok(HardnessVector {
        estimator: Estimator::El2n,
        values: errnorm.row(probe_epoch).iter().map(|&v| f64::from(v)).collect(),
        model_id: log.model_id.clone(),
    })
}

/// Forgetting: number of correct -> incorrect transitions between consecutive epochs.
pub fn compute_forgetting(log: &DynamicsLog, mode: ForgettingMode) -> Result<HardnessVector> {
    let correct = log.correct().ok_or(HlabError::MissingChannel(Channel::Correct))?;
    let epochs = log.n_epochs();
    if epochs < 2 {
        return Err(HlabError::Parameter(format!(
            "forgetting needs at least 2 epochs, log has {epochs}"
        )));
    }
    let values = (0..log.n_samples())
        .map(|i| {
            let events = (0..epochs - 1)
                .filter(|&e| correct.get(e, i) && !correct.get(e + 1, i))
                .count();
            let ever_correct = (0..epochs).any(|e| correct.get(e, i));
            match mode {
                ForgettingMode::NeverLearnedMax if !ever_correct => epochs as f64,
                _ => events as f64,
            }
        })
        .collect();
    Ok(HardnessVector {
        estimator: Estimator::Forgetting,
        values,
        model_id: log.model_id.clone(),
    })
}

/// Elementwise mean of per-model hardness vectors.
///
/// Each sample's values are summed in sorted order so the result does not
/// depend on the order of `vectors`.
pub fn aggregate_ensemble(vectors: &[HardnessVector]) -> Result<EnsembleHardness> {
    let first = vectors
        .first()
        .ok_or_else(|| HlabError::Parameter("ensemble needs at least one model".into()))?;
    let n = first.values.len();
    for v in vectors {
        if v.estimator != first.estimator {
            return Err(HlabError::Incompatible(format!(
                "mixed estimators {} and {}",
                first.estimator, v.estimator
            )));
        }
        if v.values.len() != n {
            return Err(HlabError::Incompatible(format!(
                "hardness vectors of length {n} and {}",
                v.values.len()
            )));
        }
    }
    let j = vectors.len();
    let mut column = Vec::with_capacity(j);
    let values = (0..n)
        .map(|i| {
            column.clear();
            column.extend(vectors.iter().map(|v| v.values[i]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / j as f64
        })
        .collect();
    Ok(EnsembleHardness {
        estimator: first.estimator,
        ensemble_size: j,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_log() -> DynamicsLog {
        DynamicsLog::new("toy", 2, 2)
            .with_margin(EpochMatrix::from_rows(vec![vec![2.0, -1.0], vec![4.0, 0.5]]).unwrap())
            .unwrap()
            .with_loss(EpochMatrix::from_rows(vec![vec![0.1, 1.2], vec![0.05, 0.7]]).unwrap())
            .unwrap()
            .with_correct(EpochMatrix::from_rows(vec![vec![true, false], vec![true, true]]).unwrap())
            .unwrap()
            .with_errnorm(EpochMatrix::from_rows(vec![vec![0.1, 0.9], vec![0.0, 0.4]]).unwrap())
            .unwrap()
    }

    #[test]
    fn round_trip_all_channels() {
        let log = toy_log();
        let parsed = DynamicsLog::from_bytes(&log.to_bytes()).unwrap();
        assert_eq!(parsed, log);
        assert_eq!(parsed.channel_flags().0, 0b1111);
        assert_eq!((parsed.n_samples(), parsed.n_epochs()), (2, 2));
    }

    #[test]
    fn header_layout() {
        let bytes = toy_log().to_bytes();
        assert_eq!(&bytes[..4], b"HDYN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 0b1111);
        assert_eq!(u16::from_le_bytes(bytes[24..26].try_into().unwrap()), 3);
        assert_eq!(&bytes[26..29], b"toy");
        // margin: 4 f32, loss: 4 f32, correct: 2 rows x 1 byte, errnorm: 4 f32
        assert_eq!(bytes.len(), 29 + 16 + 16 + 2 + 16);
        assert_eq!(f32::from_le_bytes(bytes[29..33].try_into().unwrap()), 2.0);
        assert_eq!(bytes[29 + 32], 0b01);
        assert_eq!(bytes[29 + 33], 0b11);
    }

    #[test]
    fn missing_errnorm_leaves_flag_unset() {
        let log = DynamicsLog::new("m", 1, 2)
            .with_margin(EpochMatrix::from_rows(vec![vec![1.0], vec![1.0]]).unwrap())
            .unwrap();
        let parsed = DynamicsLog::from_bytes(&log.to_bytes()).unwrap();
        assert!(parsed.errnorm().is_none());
        assert!(!parsed.channel_flags().contains(Channel::Errnorm));
        assert!(matches!(
            compute_el2n(&parsed, 0),
            Err(HlabError::MissingChannel(Channel::Errnorm))
        ));
    }

    #[test]
    fn truncated_margin_is_corruption() {
        let bytes = toy_log().to_bytes();
        let cut = &bytes[..29 + 10];
        assert!(matches!(DynamicsLog::from_bytes(cut), Err(HlabError::Corruption(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(DynamicsLog::from_bytes(&extra), Err(HlabError::Corruption(_))));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = toy_log().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(DynamicsLog::from_bytes(&bytes), Err(HlabError::Format(_))));
        let mut bytes = toy_log().to_bytes();
        bytes[4] = 2;
        assert!(matches!(DynamicsLog::from_bytes(&bytes), Err(HlabError::Format(_))));
    }

    #[test]
    fn nan_names_epoch_and_sample() {
        let log = DynamicsLog::new("m", 2, 2)
            .with_margin(EpochMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap())
            .unwrap();
        let mut bytes = log.to_bytes();
        // epoch 1, sample 0 -> third f32
        let off = 4 + 4 + 8 + 4 + 4 + 2 + 1 + 8;
        bytes[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        match DynamicsLog::from_bytes(&bytes) {
            Err(HlabError::Validation { channel, epoch, sample, .. }) => {
                assert_eq!((channel, epoch, sample), ("margin", 1, 0));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn negative_loss_rejected() {
        let m = EpochMatrix::from_rows(vec![vec![-0.5f32]]).unwrap();
        assert!(matches!(
            DynamicsLog::new("m", 1, 1).with_loss(m),
            Err(HlabError::Validation { channel: "loss", .. })
        ));
    }

    #[test]
    fn aum_is_epoch_mean() {
        let aum = compute_aum(&toy_log()).unwrap();
        assert_eq!(aum.values, vec![3.0, -0.25]);
        let constant = DynamicsLog::new("c", 1, 5)
            .with_margin(EpochMatrix::new(5, 1, vec![1.5; 5]).unwrap())
            .unwrap();
        assert_eq!(compute_aum(&constant).unwrap().values, vec![1.5]);
    }

    #[test]
    fn el2n_reads_probe_epoch() {
        let n_epochs = 200;
        let data: Vec<f32> = (0..n_epochs).map(|e| e as f32 / 1000.0).collect();
        let log = DynamicsLog::new("p", 1, n_epochs)
            .with_errnorm(EpochMatrix::new(n_epochs, 1, data.clone()).unwrap())
            .unwrap();
        let el2n = compute_el2n(&log, 20).unwrap();
        assert_eq!(el2n.values, vec![f64::from(data[20])]);
        assert!(matches!(
            compute_el2n(&log, 200),
            Err(HlabError::IndexOutOfRange { index: 200, .. })
        ));
    }

    fn forgetting_of(pattern: &[bool], mode: ForgettingMode) -> f64 {
        let rows = pattern.iter().map(|&b| vec![b]).collect();
        let log = DynamicsLog::new("f", 1, pattern.len())
            .with_correct(EpochMatrix::from_rows(rows).unwrap())
            .unwrap();
        compute_forgetting(&log, mode).unwrap().values[0]
    }

    #[test]
    fn forgetting_event_counts() {
        let ev = ForgettingMode::EventCount;
        assert_eq!(forgetting_of(&[true, true, true, true], ev), 0.0);
        assert_eq!(forgetting_of(&[true, false, true, false], ev), 2.0);
        assert_eq!(forgetting_of(&[false, false, false], ev), 0.0);
        assert_eq!(
            forgetting_of(&[false, false, false], ForgettingMode::NeverLearnedMax),
            3.0
        );
        assert_eq!(
            forgetting_of(&[true, false, true, false], ForgettingMode::NeverLearnedMax),
            2.0
        );
    }

    #[test]
    fn forgetting_needs_two_epochs() {
        let log = DynamicsLog::new("f", 1, 1)
            .with_correct(EpochMatrix::from_rows(vec![vec![true]]).unwrap())
            .unwrap();
        assert!(compute_forgetting(&log, ForgettingMode::EventCount).is_err());
    }

    fn hv(estimator: Estimator, values: Vec<f64>) -> HardnessVector {
        HardnessVector {
            estimator,
            values,
            model_id: String::new(),
        }
    }

    #[test]
    fn ensemble_mean() {
        let single = aggregate_ensemble(&[hv(Estimator::Aum, vec![1.0, 2.5])]).unwrap();
        assert_eq!((single.values.clone(), single.ensemble_size), (vec![1.0, 2.5], 1));
        let pair = aggregate_ensemble(&[
            hv(Estimator::Aum, vec![0.0, 2.0]),
            hv(Estimator::Aum, vec![2.0, 0.0]),
        ])
        .unwrap();
        assert_eq!((pair.values, pair.ensemble_size), (vec![1.0, 1.0], 2));
    }

    #[test]
    fn ensemble_rejects_mixed_inputs() {
        assert!(matches!(
            aggregate_ensemble(&[hv(Estimator::Aum, vec![1.0]), hv(Estimator::El2n, vec![1.0])]),
            Err(HlabError::Incompatible(_))
        ));
        assert!(matches!(
            aggregate_ensemble(&[hv(Estimator::Aum, vec![1.0]), hv(Estimator::Aum, vec![1.0, 2.0])]),
            Err(HlabError::Incompatible(_))
        ));
        assert!(aggregate_ensemble(&[]).is_err());
    }

    #[test]
    fn single_forget_in_eight_models() {
        let mut vectors = vec![hv(Estimator::Forgetting, vec![0.0, 0.0]); 8];
        vectors[3].values[1] = 1.0;
        let eh = aggregate_ensemble(&vectors).unwrap();
        assert_eq!(eh.values, vec![0.0, 0.125]);
    }
}
