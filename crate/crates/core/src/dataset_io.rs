//! Readers for IDX (MNIST, Fashion-MNIST) and CIFAR-10 binary files, and
//! two-class unit-sphere subsets of the images.

use std::fs;
use std::path::Path;

use rand::seq::index;

use crate::data_synth::rng_for;
use crate::error::{Error, Result};
use crate::points::Points;

const IDX_LABELS: u32 = 0x0000_0801;
const IDX_IMAGES: u32 = 0x0000_0803;
const CIFAR_RECORD: usize = 3073;
const CIFAR_PIXELS: usize = 3072;

/// Parsed IDX payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxData {
    Labels(Vec<u8>),
    /// Row-major `count x rows x cols` bytes.
    Images {
        count: usize,
        rows: usize,
        cols: usize,
        pixels: Vec<u8>,
    },
}

impl IdxData {
    /// Big-endian IDX encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            IdxData::Labels(l) => {
                out.extend(IDX_LABELS.to_be_bytes());
                out.extend((l.len() as u32).to_be_bytes());
                out.extend(l);
            }
            IdxData::Images {
                count,
                rows,
                cols,
                pixels,
            } => {
                out.extend(IDX_IMAGES.to_be_bytes());
                for d in [count, rows, cols] {
                    out.extend((*d as u32).to_be_bytes());
                }
                out.extend(pixels);
            }
        }
        out
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    parse_idx(&read(path.as_ref())?)
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let word = |i: usize| -> Result<usize> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize)
            .ok_or_else(|| Error::Format(format!("IDX header truncated at byte {}", bytes.len())))
    };
    let magic = word(0)? as u32;
    let ndims = match magic {
        IDX_LABELS => 1,
        IDX_IMAGES => 3,
        _ => return Err(Error::Format(format!("unsupported IDX magic {magic:#010x}"))),
    };
    let dims = (1..=ndims).map(word).collect::<Result<Vec<_>>>()?;
    let header = 4 * (ndims + 1);
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .ok_or_else(|| Error::Format("IDX dimensions overflow".into()))?;
    if bytes.len() != header + payload {
        return Err(Error::Format(format!(
            "IDX payload has {} bytes, header announces {payload}",
            bytes.len() - header
        )));
    }
    let data = bytes[header..].to_vec();
    Ok(if ndims == 1 {
        IdxData::Labels(data)
    } else {
        IdxData::Images {
            count: dims[0],
            rows: dims[1],
            cols: dims[2],
            pixels: data,
        }
    })
}

/// Flattened images with integer labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImages {
    dim: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
    source: String,
}

impl LabeledImages {
    pub fn new(dim: usize, pixels: Vec<u8>, labels: Vec<u8>, source: impl Into<String>) -> Result<Self> {
        if dim == 0 || pixels.len() != dim * labels.len() {
            return Err(Error::Format(format!(
                "{} pixel bytes do not split into {} images of {dim}",
                pixels.len(),
                labels.len()
            )));
        }
        Ok(LabeledImages {
            dim,
            pixels,
            labels,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.pixels[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// An IDX image file paired with its IDX label file.
pub fn load_idx_pair(images: impl AsRef<Path>, labels: impl AsRef<Path>, source: &str) -> Result<LabeledImages> {
    let imgs = load_idx(images)?;
    let labs = load_idx(labels)?;
    match (imgs, labs) {
        (IdxData::Images { count, rows, cols, pixels }, IdxData::Labels(l)) => {
            if count != l.len() {
                return Err(Error::Format(format!("{count} images but {} labels", l.len())));
            }
            LabeledImages::new(rows * cols, pixels, l, source)
        }
        _ => Err(Error::Format("expected an image file and a label file".into())),
    }
}

pub fn load_cifar10(path: impl AsRef<Path>) -> Result<LabeledImages> {
    let path = path.as_ref();
    parse_cifar10(&read(path)?, &path.display().to_string())
}

/// Records of 1 label byte and 3072 channel-planar pixel bytes.
pub fn parse_cifar10(bytes: &[u8], source: &str) -> Result<LabeledImages> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR_RECORD) {
        return Err(Error::Format(format!(
            "CIFAR-10 file size {} is not a positive multiple of {CIFAR_RECORD}",
            bytes.len()
        )));
    }
    let records = bytes.len() / CIFAR_RECORD;
    let mut labels = Vec::with_capacity(records);
    let mut pixels = Vec::with_capacity(records * CIFAR_PIXELS);
    for (record, chunk) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
        if chunk[0] > 9 {
            return Err(Error::Label { record, label: chunk[0] });
        }
        labels.push(chunk[0]);
        pixels.extend_from_slice(&chunk[1..]);
    }
    LabeledImages::new(CIFAR_PIXELS, pixels, labels, source)
}

/// Several CIFAR-10 batch files concatenated in order.
pub fn load_cifar10_batches<P: AsRef<Path>>(paths: &[P]) -> Result<LabeledImages> {
    let mut all: Option<LabeledImages> = None;
    for p in paths {
        let batch = load_cifar10(p)?;
        all = Some(match all {
            None => batch,
            Some(mut acc) => {
                acc.pixels.extend(batch.pixels);
                acc.labels.extend(batch.labels);
                acc
            }
        });
    }
    all.ok_or_else(|| Error::InvalidArgument("no CIFAR-10 batch files given".into()))
}

/// `n` images drawn without replacement from the pooled classes, each
/// scaled to unit Euclidean norm. `label_pos` maps to `+1`.
pub fn two_class_subset(
    data: &LabeledImages,
    label_pos: u8,
    label_neg: u8,
    n: usize,
    seed: u64,
) -> Result<(Points, Vec<f64>)> {
    if label_pos == label_neg {
        return Err(Error::InvalidArgument("the two classes must differ".into()));
    }
    let pool: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] == label_pos || data.labels[i] == label_neg)
        .collect();
    if pool.len() < n || n == 0 {
        return Err(Error::InsufficientData {
            wanted: n,
            available: pool.len(),
        });
    }
    let mut rng = rng_for(seed);
    let picks = index::sample(&mut rng, pool.len(), n);
    let mut xs = Vec::with_capacity(n * data.dim);
    let mut ys = Vec::with_capacity(n);
    for p in picks.iter() {
        let i = pool[p];
        let img = data.image(i);
        let norm = img.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroImage { index: i });
        }
        xs.extend(img.iter().map(|&v| v as f64 / norm));
        ys.push(if data.labels[i] == label_pos { 1.0 } else { -1.0 });
    }
    Ok((Points::new(data.dim, xs), ys))
}
