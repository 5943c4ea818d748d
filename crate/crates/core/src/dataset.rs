//! Dataset ingestion and the on-disk container format.
//!
//! Two raw sources are supported: MNIST-style IDX file pairs and CIFAR-10
//! binary batches. Both parse into a [`RawImageSet`], from which a two-class
//! [`BinaryDataset`] is extracted with pixel values scaled to `[0, 1]` and
//! labels mapped to `{+1, -1}`. Binary datasets persist in a small container
//! format (magic `BDS1`) that round-trips bit for bit:
//!
//! ```text
//! bytes 0-3:   "BDS1"
//! bytes 4-7:   n  (row count, little-endian u32)
//! bytes 8-11:  d  (feature count, little-endian u32)
//! next n*d*4:  features, row-major little-endian f32
//! next n:      labels, one i8 per row (+1 or -1)
//! ```

use std::fs;
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
const CIFAR_RECORD_LEN: usize = 3073; // 1 label byte + 32*32*3 pixels
const CONTAINER_MAGIC: &[u8; 4] = b"BDS1";

/// Raw images as parsed from disk: `u8` pixels, small-integer class labels.
#[derive(Debug, Clone)]
pub struct RawImageSet {
    /// `n * (h*w*c)` pixel bytes, one image per row.
    pub images: Vec<u8>,
    /// One class label per image.
    pub labels: Vec<u8>,
    /// `(height, width, channels)`.
    pub shape: (usize, usize, usize),
}

impl RawImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Pixels per image.
    pub fn pixel_count(&self) -> usize {
        let (h, w, c) = self.shape;
        h * w * c
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let p = self.pixel_count();
        &self.images[i * p..(i + 1) * p]
    }
}

/// A two-class dataset: row-major features in `[0, 1]`, labels in `{+1, -1}`.
///
/// This is the common currency of every trainer and attack in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    features: Vec<f32>,
    labels: Vec<i8>,
    d: usize,
}

impl BinaryDataset {
    /// Builds a dataset, validating shape, feature range, and label values.
    pub fn new(features: Vec<f32>, labels: Vec<i8>, d: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::config("feature count d must be nonzero"));
        }
        if features.len() != labels.len() * d {
            return Err(Error::consistency(format!(
                "feature buffer holds {} values, expected {} rows x {} features",
                features.len(),
                labels.len(),
                d
            )));
        }
        if let Some(bad) = features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config(format!("feature value {bad} outside [0, 1]")));
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::config("labels must be +1 or -1"));
        }
        Ok(BinaryDataset {
            features,
            labels,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f32], i8)> {
        self.features
            .chunks_exact(self.d)
            .zip(self.labels.iter().copied())
    }

    pub fn pos_count(&self) -> usize {
        self.labels.iter().filter(|&&y| y > 0).count()
    }

    pub fn neg_count(&self) -> usize {
        self.n() - self.pos_count()
    }

    pub fn is_single_class(&self) -> bool {
        self.pos_count() == 0 || self.neg_count() == 0
    }

    /// Copies the given rows into a new dataset. Indices may repeat.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut features = Vec::with_capacity(idx.len() * self.d);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(BinaryDataset {
            features,
            labels,
            d: self.d,
        })
    }

    /// Appends all rows of `other`; dimensions must agree.
    pub fn concat(&self, other: &BinaryDataset) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(BinaryDataset {
            features,
            labels,
            d: self.d,
        })
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::length(format!(
            "{what}: need {end} header bytes, file has {}",
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parses an MNIST-style IDX image/label file pair.
///
/// Image files carry magic `0x00000803` and big-endian dims `(n, rows, cols)`;
/// label files carry magic `0x00000801` and a count that must match `n`.
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<RawImageSet> {
    let image_bytes = fs::read(image_path)?;
    let label_bytes = fs::read(label_path)?;
    parse_idx(&image_bytes, &label_bytes)
}

/// [`load_idx`] over in-memory buffers.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<RawImageSet> {
    let magic = be_u32(image_bytes, 0, "idx image header")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::format(format!(
            "idx image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
        )));
    }
    let n = be_u32(image_bytes, 4, "idx image header")? as usize;
    let rows = be_u32(image_bytes, 8, "idx image header")? as usize;
    let cols = be_u32(image_bytes, 12, "idx image header")? as usize;
    let payload = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format("idx image dims overflow".to_string()))?;
    if image_bytes.len() < 16 + payload {
        return Err(Error::length(format!(
            "idx image payload: header claims {payload} pixel bytes, file has {}",
            image_bytes.len() - 16
        )));
    }

    let magic = be_u32(label_bytes, 0, "idx label header")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::format(format!(
            "idx label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
        )));
    }
    let label_n = be_u32(label_bytes, 4, "idx label header")? as usize;
    if label_n != n {
        return Err(Error::consistency(format!(
            "idx image header claims {n} items, label header claims {label_n}"
        )));
    }
    if label_bytes.len() < 8 + n {
        return Err(Error::length(format!(
            "idx label payload: header claims {n} labels, file has {}",
            label_bytes.len() - 8
        )));
    }

    let labels = label_bytes[8..8 + n].to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::format(format!("idx label {bad} out of range 0..10")));
    }

    Ok(RawImageSet {
        images: image_bytes[16..16 + payload].to_vec(),
        labels,
        shape: (rows, cols, 1),
    })
}

/// Parses CIFAR-10 binary batches (3073-byte records: label byte then
/// 32x32x3 pixels, channel-planar) and concatenates them in file order.
pub fn load_cifar10_bin(paths: &[impl AsRef<Path>]) -> Result<RawImageSet> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let bytes = fs::read(path.as_ref())?;
        parse_cifar10_records(&bytes, &mut images, &mut labels)?;
    }
    Ok(RawImageSet {
        images,
        labels,
        shape: (32, 32, 3),
    })
}

fn parse_cifar10_records(bytes: &[u8], images: &mut Vec<u8>, labels: &mut Vec<u8>) -> Result<()> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(Error::format(format!(
            "cifar batch length {} is not a multiple of {CIFAR_RECORD_LEN}",
            bytes.len()
        )));
    }
    for record in bytes.chunks_exact(CIFAR_RECORD_LEN) {
        let label = record[0];
        if label >= 10 {
            return Err(Error::format(format!(
                "cifar label {label} out of range 0..10"
            )));
        }
        labels.push(label);
        images.extend_from_slice(&record[1..]);
    }
    Ok(())
}

/// Extracts the two named classes from a raw set, in original row order.
///
/// `class_a` maps to `+1` and `class_b` to `-1`; pixels are divided by 255
/// exactly once. A set where only one of the classes occurs is returned
/// as-is (check [`BinaryDataset::is_single_class`]); if neither occurs the
/// result is an empty-dataset error.
pub fn select_binary(raw: &RawImageSet, class_a: u8, class_b: u8) -> Result<BinaryDataset> {
    if class_a == class_b {
        return Err(Error::config(format!(
            "class_a and class_b are both {class_a}"
        )));
    }
    let d = raw.pixel_count();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, &label) in raw.labels.iter().enumerate() {
        let mapped = if label == class_a {
            1i8
        } else if label == class_b {
            -1i8
        } else {
            continue;
        };
        features.extend(raw.image(i).iter().map(|&px| f32::from(px) / 255.0));
        labels.push(mapped);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    BinaryDataset::new(features, labels, d)
}

/// Serializes a dataset in the `BDS1` container format.
pub fn container_bytes(ds: &BinaryDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + ds.features.len() * 4 + ds.n());
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&(ds.n() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
    for v in &ds.features {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(ds.labels.iter().map(|&y| y as u8));
    out
}

pub fn save_container(ds: &BinaryDataset, path: &Path) -> Result<()> {
    Ok(fs::write(path, container_bytes(ds))?)
}

/// Parses a `BDS1` container from bytes.
pub fn parse_container(bytes: &[u8]) -> Result<BinaryDataset> {
    if bytes.len() < 12 {
        return Err(Error::length(format!(
            "container header needs 12 bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != CONTAINER_MAGIC {
        return Err(Error::format(format!(
            "container magic {:02x?}, expected {CONTAINER_MAGIC:02x?}",
            &bytes[0..4]
        )));
    }
    let n = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let d = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    if n == 0 || d == 0 {
        return Err(Error::format(format!("container claims n={n}, d={d}")));
    }
    let feat_bytes = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format("container dims overflow".to_string()))?;
    let expected = 12 + feat_bytes + n;
    if bytes.len() < expected {
        return Err(Error::length(format!(
            "container needs {expected} bytes for n={n}, d={d}, file has {}",
            bytes.len()
        )));
    }
    let mut features = Vec::with_capacity(n * d);
    for chunk in bytes[12..12 + feat_bytes].chunks_exact(4) {
        features.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
    }
    let labels: Vec<i8> = bytes[12 + feat_bytes..expected]
        .iter()
        .map(|&b| b as i8)
        .collect();
    BinaryDataset::new(features, labels, d)
}

pub fn load_container(path: &Path) -> Result<BinaryDataset> {
    parse_container(&fs::read(path)?)
}

/// Splits a dataset into `(first n_first rows, rest)`.
///
/// With `shuffle` the rows are permuted by a generator seeded with `seed`
/// before partitioning; the partition is deterministic in `(seed, shuffle)`.
pub fn split(
    ds: &BinaryDataset,
    n_first: usize,
    seed: u64,
    shuffle: bool,
) -> Result<(BinaryDataset, BinaryDataset)> {
    if n_first == 0 || n_first >= ds.n() {
        return Err(Error::config(format!(
            "n_first={n_first} out of range 1..{}",
            ds.n()
        )));
    }
    let mut order: Vec<usize> = (0..ds.n()).collect();
    if shuffle {
        order.shuffle(&mut seeded_rng(seed));
    }
    let first = ds.subset(&order[..n_first])?;
    let rest = ds.subset(&order[n_first..])?;
    Ok((first, rest))
}

/// Draws `k` distinct indices from `0..n`, uniformly, in sampling order.
pub(crate) fn sample_distinct(rng: &mut crate::rng::Rng, n: usize, k: usize) -> Vec<usize> {
    index_sample(rng, n, k).into_vec()
}
