//! Datasets: MNIST and CIFAR-10 from their binary distributions, resampling,
//! label corruption and the synthetic regression tasks.
//!
//! Samples are stored one per row. [`Dataset::batch`] returns the column
//! layout the networks consume.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, gaussian_matrix, Matrix};
use crate::rng::Rng;

pub const NUM_CLASSES: usize = 10;

/// Layout of the image behind each input row, channel-planar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// `n_samples x n_0`
    pub inputs: Matrix,
    /// `n_samples x n_L`, one-hot for classification
    pub targets: Matrix,
    /// class labels when the task is classification
    pub labels: Option<Vec<u8>>,
    pub image: Option<ImageShape>,
    /// fraction of corrupted labels and the seed that corrupted them
    pub corruption: Option<(f64, u64)>,
}

fn one_hot(labels: &[u8]) -> Matrix {
    let mut t = Matrix::zeros((labels.len(), NUM_CLASSES));
    for (i, &l) in labels.iter().enumerate() {
        t[[i, usize::from(l)]] = 1.0;
    }
    t
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.ncols()
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            name: self.name.clone(),
            inputs: self.inputs.slice(s![..n, ..]).to_owned(),
            targets: self.targets.slice(s![..n, ..]).to_owned(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
            image: self.image,
            corruption: self.corruption,
        }
    }

    /// `(X, Y)` for the given sample indices, as `n_0 x B` and `n_L x B`.
    pub fn batch(&self, idx: &[usize]) -> (Matrix, Matrix) {
        let mut x = Matrix::zeros((self.input_dim(), idx.len()));
        let mut y = Matrix::zeros((self.output_dim(), idx.len()));
        for (c, &i) in idx.iter().enumerate() {
            x.column_mut(c).assign(&self.inputs.row(i));
            y.column_mut(c).assign(&self.targets.row(i));
        }
        (x, y)
    }
}

fn format_err(offset: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        offset,
        detail: detail.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(offset, "file ends inside the header"))
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Parses an IDX image file (`u8`, 3 dimensions) into `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES {
        return Err(format_err(0, format!("bad magic number {magic:#010x} for an image file")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = 16 + n * rows * cols;
    if bytes.len() < need {
        return Err(format_err(
            bytes.len(),
            format!("truncated: {n} images of {rows}x{cols} need {need} bytes"),
        ));
    }
    Ok((n, rows, cols, &bytes[16..need]))
}

/// Parses an IDX label file (`u8`, 1 dimension).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS {
        return Err(format_err(0, format!("bad magic number {magic:#010x} for a label file")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let need = 8 + n;
    if bytes.len() < need {
        return Err(format_err(bytes.len(), format!("truncated: {n} labels need {need} bytes")));
    }
    let labels = &bytes[8..need];
    if let Some(i) = labels.iter().position(|&l| usize::from(l) >= NUM_CLASSES) {
        return Err(format_err(8 + i, format!("label {} outside 0-9", labels[i])));
    }
    Ok(labels)
}

pub fn mnist_from_bytes(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    mnist_from_bytes_limited(images, labels, usize::MAX)
}

/// As [`mnist_from_bytes`], converting only the first `limit` samples.
pub fn mnist_from_bytes_limited(images: &[u8], labels: &[u8], limit: usize) -> Result<Dataset> {
    let (n, rows, cols, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }
    let n = n.min(limit);
    let labels = &labels[..n];
    let inputs = Array2::from_shape_fn((n, rows * cols), |(i, j)| {
        f64::from(pixels[i * rows * cols + j]) / 255.0
    });
    Ok(Dataset {
        name: "mnist".into(),
        inputs,
        targets: one_hot(labels),
        labels: Some(labels.to_vec()),
        image: Some(ImageShape {
            channels: 1,
            height: rows,
            width: cols,
        }),
        corruption: None,
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Reads an IDX image file and its label file, keeping at most `limit` samples.
pub fn load_mnist(images: &Path, labels: &Path, limit: usize) -> Result<Dataset> {
    mnist_from_bytes_limited(&read(images)?, &read(labels)?, limit)
}

/// Reads the MNIST training (or test) split from a directory holding the
/// standard file names.
pub fn load_mnist_dir(dir: &Path, train: bool, limit: usize) -> Result<Dataset> {
    let prefix = if train { "train" } else { "t10k" };
    load_mnist(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        limit,
    )
}

const CIFAR_SIDE: usize = 32;
const CIFAR_RECORD: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;

pub fn cifar10_from_bytes(bytes: &[u8]) -> Result<Dataset> {
    cifar10_from_bytes_limited(bytes, usize::MAX)
}

/// As [`cifar10_from_bytes`], converting only the first `limit` records.
pub fn cifar10_from_bytes_limited(bytes: &[u8], limit: usize) -> Result<Dataset> {
    if bytes.len() % CIFAR_RECORD != 0 {
        let whole = bytes.len() / CIFAR_RECORD * CIFAR_RECORD;
        return Err(format_err(whole, "truncated record"));
    }
    let n = (bytes.len() / CIFAR_RECORD).min(limit);
    let dim = CIFAR_RECORD - 1;
    let mut labels = Vec::with_capacity(n);
    let mut inputs = Matrix::zeros((n, dim));
    for i in 0..n {
        let rec = &bytes[i * CIFAR_RECORD..(i + 1) * CIFAR_RECORD];
        if usize::from(rec[0]) >= NUM_CLASSES {
            return Err(format_err(i * CIFAR_RECORD, format!("label {} outside 0-9", rec[0])));
        }
        labels.push(rec[0]);
        for (dst, &p) in inputs.row_mut(i).iter_mut().zip(&rec[1..]) {
            *dst = f64::from(p) / 255.0;
        }
    }
    Ok(Dataset {
        name: "cifar10".into(),
        inputs,
        targets: one_hot(&labels),
        labels: Some(labels),
        image: Some(ImageShape {
            channels: 3,
            height: CIFAR_SIDE,
            width: CIFAR_SIDE,
        }),
        corruption: None,
    })
}

/// Reads and concatenates CIFAR-10 binary batch files, stopping once `limit`
/// records are in hand.
pub fn load_cifar10(files: &[&Path], limit: usize) -> Result<Dataset> {
    let mut bytes = Vec::new();
    for f in files {
        if bytes.len() / CIFAR_RECORD >= limit {
            break;
        }
        let b = read(f)?;
        if b.len() % CIFAR_RECORD != 0 {
            return Err(format_err(
                b.len() / CIFAR_RECORD * CIFAR_RECORD,
                format!("{}: truncated record", f.display()),
            ));
        }
        bytes.extend_from_slice(&b);
    }
    cifar10_from_bytes_limited(&bytes, limit)
}

/// The five training batches of a CIFAR-10 binary distribution directory.
pub fn load_cifar10_dir(dir: &Path, limit: usize) -> Result<Dataset> {
    let paths: Vec<_> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
    let refs: Vec<&Path> = paths.iter().map(|p| p.as_path()).collect();
    load_cifar10(&refs, limit)
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Serialises an MNIST-style dataset back to IDX image and label bytes.
pub fn write_idx<W1: Write, W2: Write>(ds: &Dataset, mut images: W1, mut labels: W2) -> Result<()> {
    let shape = ds.image.ok_or_else(|| Error::InvalidArgument("dataset has no image shape".into()))?;
    let lab = ds.labels.as_ref().ok_or_else(|| Error::InvalidArgument("dataset has no labels".into()))?;
    if shape.channels != 1 {
        return Err(Error::InvalidArgument("IDX images have one channel".into()));
    }
    images.write_all(&IDX_IMAGES.to_be_bytes())?;
    for d in [ds.len(), shape.height, shape.width] {
        images.write_all(&(d as u32).to_be_bytes())?;
    }
    let px: Vec<u8> = ds.inputs.iter().map(|v| to_byte(*v)).collect();
    images.write_all(&px)?;
    labels.write_all(&IDX_LABELS.to_be_bytes())?;
    labels.write_all(&(ds.len() as u32).to_be_bytes())?;
    labels.write_all(lab)?;
    Ok(())
}

/// Serialises a 3x32x32 dataset to CIFAR-10 binary records.
pub fn write_cifar10<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    let lab = ds.labels.as_ref().ok_or_else(|| Error::InvalidArgument("dataset has no labels".into()))?;
    if ds.input_dim() != CIFAR_RECORD - 1 {
        return Err(Error::InvalidArgument("CIFAR records are 3x32x32".into()));
    }
    for (i, &l) in lab.iter().enumerate() {
        w.write_all(&[l])?;
        let px: Vec<u8> = ds.inputs.row(i).iter().map(|v| to_byte(*v)).collect();
        w.write_all(&px)?;
    }
    Ok(())
}

/// Resamples every image to `side x side`, channels kept. An integer ratio
/// uses exact block means; anything else uses bilinear interpolation with
/// half-pixel centres.
pub fn downscale(ds: &Dataset, side: usize) -> Result<Dataset> {
    let shape = ds.image.ok_or_else(|| Error::InvalidArgument("dataset has no image shape".into()))?;
    if shape.height != shape.width {
        return Err(Error::InvalidArgument(format!(
            "non-square images {}x{}",
            shape.height, shape.width
        )));
    }
    if side == 0 || side > shape.height {
        return Err(Error::InvalidArgument(format!("cannot downscale {} to {side}", shape.height)));
    }
    let src = shape.height;
    let c = shape.channels;
    let out_dim = c * side * side;
    let mut inputs = Matrix::zeros((ds.len(), out_dim));
    let pooled = src % side == 0;
    let f = src / side;
    let scale = src as f64 / side as f64;
    // bilinear taps per output coordinate: (i0, i1, weight of i1)
    let taps: Vec<(usize, usize, f64)> = (0..side)
        .map(|o| {
            let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect();
    for (n, mut out) in inputs.rows_mut().into_iter().enumerate() {
        let img = ds.inputs.row(n);
        let px = |ch: usize, r: usize, col: usize| img[ch * src * src + r * src + col];
        for ch in 0..c {
            for r in 0..side {
                for col in 0..side {
                    let v = if pooled {
                        let mut acc = 0.0;
                        for dr in 0..f {
                            for dc in 0..f {
                                acc += px(ch, r * f + dr, col * f + dc);
                            }
                        }
                        acc / (f * f) as f64
                    } else {
                        let (r0, r1, wr) = taps[r];
                        let (c0, c1, wc) = taps[col];
                        let top = px(ch, r0, c0) * (1.0 - wc) + px(ch, r0, c1) * wc;
                        let bot = px(ch, r1, c0) * (1.0 - wc) + px(ch, r1, c1) * wc;
                        top * (1.0 - wr) + bot * wr
                    };
                    out[ch * side * side + r * side + col] = v;
                }
            }
        }
    }
    Ok(Dataset {
        name: ds.name.clone(),
        inputs,
        targets: ds.targets.clone(),
        labels: ds.labels.clone(),
        image: Some(ImageShape {
            channels: c,
            height: side,
            width: side,
        }),
        corruption: ds.corruption,
    })
}

/// Redraws the labels of `round(p n)` uniformly chosen samples uniformly over
/// the classes. A redrawn label may coincide with the original.
pub fn corrupt_labels(ds: &Dataset, p: f64, rng: &mut Rng) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("corruption fraction {p} outside [0, 1]")));
    }
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("dataset has no labels".into()))?;
    let mut out = ds.clone();
    out.corruption = Some((p, rng.seed()));
    let count = (p * ds.len() as f64).round() as usize;
    if count == 0 {
        return Ok(out);
    }
    let order = rng.permutation(ds.len());
    let mut new = labels.clone();
    for &i in &order[..count] {
        new[i] = rng.below(NUM_CLASSES) as u8;
    }
    out.targets = one_hot(&new);
    out.labels = Some(new);
    Ok(out)
}

/// Target covariance `[[1, a(1-b)], [a(1-b), a^2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl CovarianceSpec {
    pub fn sigma(&self) -> Matrix {
        let c = self.alpha * (1.0 - self.beta);
        ndarray::array![[1.0, c], [c, self.alpha * self.alpha]]
    }
}

/// Inputs i.i.d. standard normal, targets `y ~ N(0, Sigma)` independent of
/// the inputs.
pub fn synthetic_targets(spec: CovarianceSpec, n_samples: usize, input_dim: usize, rng: &mut Rng) -> Result<Dataset> {
    if !(spec.alpha > 0.0 && spec.alpha <= 1.0 && spec.beta > 0.0 && spec.beta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {}, beta = {} outside (0, 1]",
            spec.alpha, spec.beta
        )));
    }
    let l = cholesky_psd(spec.sigma().view())?;
    let inputs = gaussian_matrix(&mut rng.substream("inputs"), n_samples, input_dim, 1.0);
    let z = gaussian_matrix(&mut rng.substream("targets"), n_samples, 2, 1.0);
    Ok(Dataset {
        name: format!("synthetic(alpha={},beta={})", spec.alpha, spec.beta),
        inputs,
        targets: z.dot(&l.t()),
        labels: None,
        image: None,
        corruption: None,
    })
}

/// `x ~ N(0, Sigma_x)` and `y = T x`.
pub fn linear_teacher_dataset(teacher: &Matrix, sigma_x: &Matrix, n_samples: usize, rng: &mut Rng) -> Result<Dataset> {
    if sigma_x.nrows() != teacher.ncols() {
        return Err(Error::Shape(format!(
            "teacher {:?} with input covariance {:?}",
            teacher.dim(),
            sigma_x.dim()
        )));
    }
    let l = cholesky_psd(sigma_x.view())?;
    let z = gaussian_matrix(rng, n_samples, teacher.ncols(), 1.0);
    let inputs = z.dot(&l.t());
    let mut targets = Matrix::zeros((n_samples, teacher.nrows()));
    for (mut y, x) in targets.rows_mut().into_iter().zip(inputs.rows()) {
        y.assign(&teacher.dot(&x));
    }
    Ok(Dataset {
        name: "linear-teacher".into(),
        inputs,
        targets,
        labels: None,
        image: None,
        corruption: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, sample_covariance};
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn tiny_mnist(n: usize, side: usize, rng: &mut Rng) -> Dataset {
        let labels: Vec<u8> = (0..n).map(|_| rng.below(10) as u8).collect();
        let inputs = Array2::from_shape_simple_fn((n, side * side), || f64::from(rng.below(256) as u8) / 255.0);
        Dataset {
            name: "mnist".into(),
            targets: one_hot(&labels),
            labels: Some(labels),
            inputs,
            image: Some(ImageShape {
                channels: 1,
                height: side,
                width: side,
            }),
            corruption: None,
        }
    }

    #[test]
    fn idx_round_trip_and_errors() {
        let ds = tiny_mnist(7, 28, &mut Rng::new(1));
        let (mut ib, mut lb) = (Vec::new(), Vec::new());
        write_idx(&ds, &mut ib, &mut lb).unwrap();
        let back = mnist_from_bytes(&ib, &lb).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.input_dim(), 784);

        let mut bad = ib.clone();
        bad[3] = 0x99;
        assert!(matches!(mnist_from_bytes(&bad, &lb), Err(Error::Format { offset: 0, .. })));
        let short = &ib[..ib.len() - 1];
        assert!(matches!(mnist_from_bytes(short, &lb), Err(Error::Format { .. })));
        let mut badl = lb.clone();
        badl[8 + 3] = 12;
        assert!(matches!(mnist_from_bytes(&ib, &badl), Err(Error::Format { offset: 11, .. })));
    }

    #[test]
    fn cifar_round_trip_and_errors() {
        let mut r = Rng::new(2);
        let labels: Vec<u8> = (0..3).map(|_| r.below(10) as u8).collect();
        let ds = Dataset {
            name: "cifar10".into(),
            inputs: Array2::from_shape_simple_fn((3, 3072), || f64::from(r.below(256) as u8) / 255.0),
            targets: one_hot(&labels),
            labels: Some(labels),
            image: Some(ImageShape {
                channels: 3,
                height: 32,
                width: 32,
            }),
            corruption: None,
        };
        let mut buf = Vec::new();
        write_cifar10(&ds, &mut buf).unwrap();
        assert_eq!(cifar10_from_bytes(&buf).unwrap(), ds);
        assert!(matches!(
            cifar10_from_bytes(&buf[..buf.len() - 10]),
            Err(Error::Format { offset: 6146, .. })
        ));
        let mut bad = buf.clone();
        bad[3073] = 10;
        assert!(matches!(cifar10_from_bytes(&bad), Err(Error::Format { offset: 3073, .. })));
    }

    #[test]
    fn pooling_examples() {
        let mut ds = tiny_mnist(2, 28, &mut Rng::new(3));
        ds.inputs.row_mut(0).fill(0.37);
        let small = downscale(&ds, 14).unwrap();
        assert!(small.inputs.row(0).iter().all(|v| (v - 0.37).abs() < 1e-15));
        // 2x2 checkerboard blocks pool to 0.5
        for j in 0..784 {
            let (r, c) = (j / 28, j % 28);
            ds.inputs[[1, j]] = ((r + c) % 2) as f64;
        }
        let small = downscale(&ds, 14).unwrap();
        assert!(small.inputs.row(1).iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert_eq!(small.input_dim(), 196);
    }

    #[test]
    fn bilinear_keeps_range_and_channels() {
        let mut r = Rng::new(4);
        let ds = Dataset {
            name: "cifar10".into(),
            inputs: Array2::from_shape_simple_fn((2, 3072), || r.uniform(0.0, 1.0)),
            targets: one_hot(&[1, 2]),
            labels: Some(vec![1, 2]),
            image: Some(ImageShape {
                channels: 3,
                height: 32,
                width: 32,
            }),
            corruption: None,
        };
        let small = downscale(&ds, 14).unwrap();
        assert_eq!(small.input_dim(), 588);
        assert!(small.inputs.iter().all(|v| (0.0..=1.0).contains(v)));
        let mut flat = ds.clone();
        flat.inputs.fill(0.25);
        assert!(downscale(&flat, 14).unwrap().inputs.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn non_square_is_rejected() {
        let mut ds = tiny_mnist(1, 4, &mut Rng::new(5));
        ds.image = Some(ImageShape {
            channels: 1,
            height: 2,
            width: 8,
        });
        assert!(downscale(&ds, 1).is_err());
    }

    #[test]
    fn corruption_examples() {
        let ds = tiny_mnist(4000, 2, &mut Rng::new(6));
        let same = corrupt_labels(&ds, 0.0, &mut Rng::new(1)).unwrap();
        assert_eq!(same.labels, ds.labels);
        let a = corrupt_labels(&ds, 1.0, &mut Rng::new(9)).unwrap();
        let b = corrupt_labels(&ds, 1.0, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        let agree = a
            .labels
            .as_ref()
            .unwrap()
            .iter()
            .zip(ds.labels.as_ref().unwrap())
            .filter(|(x, y)| x == y)
            .count() as f64
            / 4000.0;
        // binomial(4000, 0.1): sd ~ 0.0047
        assert!((agree - 0.1).abs() < 0.025, "{agree}");
        for row in a.targets.rows() {
            assert_eq!(row.sum(), 1.0);
        }
    }

    #[test]
    fn synthetic_covariances() {
        let mut r = Rng::new(7);
        let ds = synthetic_targets(CovarianceSpec { alpha: 1.0, beta: 1.0 }, 100_000, 10, &mut r).unwrap();
        let c = sample_covariance(&ds.targets);
        assert!((&c - &identity(2)).iter().all(|v| v.abs() < 0.05));
        let ds = synthetic_targets(CovarianceSpec { alpha: 0.5, beta: 1.0 }, 100_000, 10, &mut r).unwrap();
        let c = sample_covariance(&ds.targets);
        assert!((c[[1, 1]] / c[[0, 0]] / 0.25 - 1.0).abs() < 0.05);
        let ds = synthetic_targets(CovarianceSpec { alpha: 1.0, beta: 1e-6 }, 100_000, 10, &mut r).unwrap();
        let c = sample_covariance(&ds.targets);
        let corr = c[[0, 1]] / (c[[0, 0]] * c[[1, 1]]).sqrt();
        assert!((corr - 1.0).abs() < 0.02);
        assert!(synthetic_targets(CovarianceSpec { alpha: 0.0, beta: 1.0 }, 10, 10, &mut r).is_err());
    }

    #[test]
    fn linear_teacher_examples() {
        let mut r = Rng::new(8);
        let t = gaussian_matrix(&mut r, 3, 5, 1.0);
        let ds = linear_teacher_dataset(&t, &identity(5), 100_000, &mut r).unwrap();
        let c = ds.inputs.t().dot(&ds.inputs) / ds.len() as f64;
        assert!((&c - &identity(5)).iter().all(|v| v.abs() < 0.05));
        for i in 0..10 {
            let y = t.dot(&ds.inputs.row(i));
            assert_eq!(y, ds.targets.row(i));
        }
        let z = linear_teacher_dataset(&Matrix::zeros((2, 5)), &identity(5), 10, &mut r).unwrap();
        assert!(z.targets.iter().all(|v| *v == 0.0));
    }

    proptest! {
        #[test]
        fn pooling_preserves_mean(seed in 0u64..100) {
            let ds = tiny_mnist(3, 28, &mut Rng::new(seed));
            let small = downscale(&ds, 14).unwrap();
            let m0 = ds.inputs.mean().unwrap();
            let m1 = small.inputs.mean().unwrap();
            prop_assert!((m0 - m1).abs() < 1e-12);
        }

        #[test]
        fn corruption_changes_at_most_ceil_pn(seed in 0u64..100, p in 0.0..1.0f64) {
            let ds = tiny_mnist(200, 2, &mut Rng::new(seed));
            let c = corrupt_labels(&ds, p, &mut Rng::new(seed + 1)).unwrap();
            let changed = c.labels.unwrap().iter().zip(ds.labels.unwrap()).filter(|(a, b)| *a != b).count();
            prop_assert!(changed <= (p * 200.0).ceil() as usize);
        }
    }
}
