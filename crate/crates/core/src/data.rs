//! MNIST ingestion from IDX files, label overlay, unit normalization and
//! seeded batching.
//!
//! Files may be plain or gzip-compressed; compression is detected from the
//! gzip magic bytes, not the file name.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, l2_norm, SeededRng};
use crate::theory::Polarity;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: u8 = 10;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

const NEGATIVE_LABEL_STREAM: u64 = 0x004e_4547;

/// Decoded IDX3 image file. Pixels stay as bytes; [`IdxImages::image`]
/// scales them into `[0, 1]`.
#[derive(Clone, Debug)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn raw(&self, i: usize) -> &[u8] {
        let len = self.image_len();
        &self.pixels[i * len..(i + 1) * len]
    }

    /// Image `i`, flattened row-major, scaled by 1/255.
    pub fn image(&self, i: usize) -> Vec<f64> {
        self.raw(i).iter().map(|&b| f64::from(b) / 255.0).collect()
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| format_error(path, format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn check_header(path: &Path, bytes: &[u8], magic: u32, header_len: usize) -> Result<()> {
    if bytes.len() < header_len {
        return Err(format_error(path, "truncated header"));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(format_error(
            path,
            format!("magic number {found:#010x}, expected {magic:#010x}"),
        ));
    }
    Ok(())
}

pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<IdxImages> {
    check_header(path, bytes, IMAGE_MAGIC, 16)?;
    let count = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    let expected = count * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < expected {
        return Err(format_error(
            path,
            format!("payload has {} bytes, header promises {expected}", payload.len()),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload[..expected].to_vec(),
    })
}

pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    check_header(path, bytes, LABEL_MAGIC, 8)?;
    let count = be_u32(bytes, 4) as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(format_error(
            path,
            format!("payload has {} bytes, header promises {count}", payload.len()),
        ));
    }
    let labels = payload[..count].to_vec();
    if let Some((i, &bad)) = labels.iter().enumerate().find(|(_, &l)| l >= NUM_CLASSES) {
        return Err(format_error(path, format!("label {bad} at position {i}")));
    }
    Ok(labels)
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    parse_idx_images(path, &read_file(path)?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_idx_labels(path, &read_file(path)?)
}

/// `dir/name`, falling back to `dir/name.gz`.
pub fn locate(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::Io {
        path: plain,
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "neither plain nor .gz found"),
    })
}

/// Images with their labels.
#[derive(Clone, Debug)]
pub struct MnistSet {
    images: IdxImages,
    labels: Vec<u8>,
}

impl MnistSet {
    pub fn new(images: IdxImages, labels: Vec<u8>) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::config(format!(
                "{} images but {} labels",
                images.count,
                labels.len()
            )));
        }
        if images.image_len() != IMAGE_LEN {
            return Err(Error::dim(format!(
                "images are {}x{}, expected {IMAGE_SIDE}x{IMAGE_SIDE}",
                images.rows, images.cols
            )));
        }
        Ok(Self { images, labels })
    }

    /// The 60000-image training split from `dir`.
    pub fn load_train(dir: impl AsRef<Path>) -> Result<Self> {
        Self::load(dir.as_ref(), TRAIN_IMAGES, TRAIN_LABELS)
    }

    pub fn load_test(dir: impl AsRef<Path>) -> Result<Self> {
        Self::load(dir.as_ref(), TEST_IMAGES, TEST_LABELS)
    }

    fn load(dir: &Path, images: &str, labels: &str) -> Result<Self> {
        let images = read_idx_images(locate(dir, images)?)?;
        let labels = read_idx_labels(locate(dir, labels)?)?;
        Self::new(images, labels)
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn image(&self, i: usize) -> Vec<f64> {
        self.images.image(i)
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn class_histogram(&self) -> [usize; NUM_CLASSES as usize] {
        let mut hist = [0; NUM_CLASSES as usize];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }
}

fn check_label(label: u8) -> Result<()> {
    if label >= NUM_CLASSES {
        return Err(Error::Domain(format!("label {label} outside 0..=9")));
    }
    Ok(())
}

/// Writes a one-hot code of `label` over the first ten pixels.
pub fn overlay_label(image: &[f64], label: u8) -> Result<Vec<f64>> {
    check_label(label)?;
    if image.len() != IMAGE_LEN {
        return Err(Error::dim(format!(
            "image of length {}, expected {IMAGE_LEN}",
            image.len()
        )));
    }
    let mut out = image.to_vec();
    for (j, px) in out.iter_mut().take(NUM_CLASSES as usize).enumerate() {
        *px = if j == label as usize { 1.0 } else { 0.0 };
    }
    Ok(out)
}

/// `x / ‖x‖₂`.
pub fn normalize(x: &[f64]) -> Result<Vec<f64>> {
    let norm = l2_norm(x);
    if norm == 0.0 {
        return Err(Error::DegenerateInput);
    }
    Ok(x.iter().map(|v| v / norm).collect())
}

/// Uniform draw among the nine labels other than `true_label`.
pub fn negative_label(true_label: u8, rng: &mut SeededRng) -> Result<u8> {
    check_label(true_label)?;
    let draw = rng.below(u64::from(NUM_CLASSES) - 1) as u8;
    Ok(if draw >= true_label { draw + 1 } else { draw })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchMode {
    /// Normalized image, no label.
    Plain,
    /// Normalized image with its true label overlaid.
    Positive,
    /// Normalized image with a random wrong label overlaid.
    Negative,
}

/// One network input with its provenance.
#[derive(Clone, Debug)]
pub struct Sample {
    /// Index into the source set.
    pub index: usize,
    pub x: Vec<f64>,
    pub true_label: u8,
    pub embedded_label: Option<u8>,
}

impl Sample {
    pub fn polarity(&self) -> Option<Polarity> {
        self.embedded_label.map(|l| {
            if l == self.true_label {
                Polarity::Positive
            } else {
                Polarity::Negative
            }
        })
    }
}

/// Visiting order of one epoch: a seeded Fisher-Yates shuffle of `0..count`.
pub fn epoch_order(count: usize, epoch_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count).collect();
    SeededRng::new(epoch_seed).shuffle(&mut order);
    order
}

/// Builds the input for image `index` under `mode`. `rng` is only drawn
/// from in negative mode.
pub fn make_sample(set: &MnistSet, index: usize, mode: BatchMode, rng: &mut SeededRng) -> Result<Sample> {
    let image = set.image(index);
    let true_label = set.label(index);
    let (raw, embedded_label) = match mode {
        BatchMode::Plain => (image, None),
        BatchMode::Positive => (overlay_label(&image, true_label)?, Some(true_label)),
        BatchMode::Negative => {
            let wrong = negative_label(true_label, rng)?;
            (overlay_label(&image, wrong)?, Some(wrong))
        }
    };
    Ok(Sample {
        index,
        x: normalize(&raw)?,
        true_label,
        embedded_label,
    })
}

/// Lazily materialized batches of one epoch. The trailing partial batch is
/// dropped, so every batch has exactly `batch_size` samples.
///
/// Positive and negative iterators built from the same `epoch_seed` visit
/// the same images in the same order, so they pair up batch by batch.
pub struct EpochBatches<'a> {
    set: &'a MnistSet,
    order: Vec<usize>,
    batch_size: usize,
    next: usize,
    mode: BatchMode,
    label_rng: SeededRng,
}

impl EpochBatches<'_> {
    pub fn batch_count(&self) -> usize {
        self.order.len() / self.batch_size
    }
}

impl Iterator for EpochBatches<'_> {
    type Item = Result<Vec<Sample>>;

    fn next(&mut self) -> Option<Self::Item> {
        let end = self.next + self.batch_size;
        if end > self.order.len() {
            return None;
        }
        let batch = self.order[self.next..end]
            .iter()
            .map(|&i| make_sample(self.set, i, self.mode, &mut self.label_rng))
            .collect();
        self.next = end;
        Some(batch)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.next) / self.batch_size;
        (left, Some(left))
    }
}

pub fn make_batches(
    set: &MnistSet,
    batch_size: usize,
    epoch_seed: u64,
    mode: BatchMode,
) -> Result<EpochBatches<'_>> {
    if batch_size == 0 || batch_size > set.count() {
        return Err(Error::config(format!(
            "batch size {batch_size} for a set of {} images",
            set.count()
        )));
    }
    Ok(EpochBatches {
        set,
        order: epoch_order(set.count(), epoch_seed),
        batch_size,
        next: 0,
        mode,
        label_rng: SeededRng::new(derive_seed(epoch_seed, NEGATIVE_LABEL_STREAM)),
    })
}

/// Strips provenance, keeping only the network inputs.
pub fn inputs_of(samples: Vec<Sample>) -> Vec<Vec<f64>> {
    samples.into_iter().map(|s| s.x).collect()
}
