//! Fully connected feed-forward networks.
//!
//! Batches are stored column-wise: an input batch is an `n_0 x B` matrix and
//! every recorded pre-/post-activation is `n_l x B`. A single sample is the
//! `B = 1` case.

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};
use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{gaussian_matrix, uniform_matrix, Matrix, Vector};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// `erf(x / sqrt 2)`
    ScaledErf,
    Relu,
    Tanh,
    Linear,
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::ScaledErf => libm::erf(x / SQRT_2),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Linear => x,
        }
    }

    /// Derivative; the ReLU kink at zero gets derivative 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            // d/dx erf(x/sqrt2) = sqrt(2/pi) exp(-x^2/2)
            ActivationKind::ScaledErf => FRAC_2_SQRT_PI / SQRT_2 * (-0.5 * x * x).exp(),
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::ScaledErf => "erf",
            ActivationKind::Relu => "relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Linear => "linear",
        }
    }

    fn code(self) -> u8 {
        match self {
            ActivationKind::ScaledErf => 0,
            ActivationKind::Relu => 1,
            ActivationKind::Tanh => 2,
            ActivationKind::Linear => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => ActivationKind::ScaledErf,
            1 => ActivationKind::Relu,
            2 => ActivationKind::Tanh,
            3 => ActivationKind::Linear,
            _ => return None,
        })
    }
}

/// Elementwise `(g(a), g'(a))`.
pub fn activation_and_derivative(kind: ActivationKind, a: &Vector) -> (Vector, Vector) {
    (a.mapv(|x| kind.apply(x)), a.mapv(|x| kind.derivative(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMap {
    Identity,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub activation: ActivationKind,
    pub output: OutputMap,
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>, activation: ActivationKind, output: OutputMap) -> Result<Self> {
        if layers.is_empty() {
            return Err(shape_err("a network needs at least one layer"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].weight.ncols() != pair[0].weight.nrows() {
                return Err(shape_err(format!(
                    "layer {} is {:?} but layer {} has {} outputs",
                    l + 2,
                    pair[1].weight.dim(),
                    l + 1,
                    pair[0].weight.nrows()
                )));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if let Some(b) = &layer.bias {
                if b.len() != layer.weight.nrows() {
                    return Err(shape_err(format!("bias of layer {} has wrong length", l + 1)));
                }
            }
        }
        Ok(MlpParams {
            layers,
            activation,
            output,
        })
    }

    /// Bias-free network from weight matrices.
    pub fn from_weights(
        weights: Vec<Matrix>,
        activation: ActivationKind,
        output: OutputMap,
    ) -> Result<Self> {
        let layers = weights
            .into_iter()
            .map(|weight| Layer { weight, bias: None })
            .collect();
        MlpParams::new(layers, activation, output)
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `[n_0, n_1, ..., n_L]`
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].weight.ncols()];
        w.extend(self.layers.iter().map(|l| l.weight.nrows()));
        w
    }

    /// Weight matrix of layer `l`, counted from 1 as in `W_1 ... W_L`.
    pub fn w(&self, l: usize) -> &Matrix {
        &self.layers[l - 1].weight
    }

    pub fn has_bias(&self) -> bool {
        self.layers.iter().any(|l| l.bias.is_some())
    }

    pub fn weights(&self) -> Vec<&Matrix> {
        self.layers.iter().map(|l| &l.weight).collect()
    }
}

/// Everything the backward rules need from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `h_0 = x`, `n_0 x B`
    pub input: Matrix,
    /// `a_1 ... a_L`
    pub pre: Vec<Matrix>,
    /// `h_1 ... h_{L-1}`
    pub post: Vec<Matrix>,
    /// `y_hat = f_y(a_L)`
    pub output: Matrix,
}

impl ForwardTrace {
    /// `h_l` for `l = 0 .. L-1`.
    pub fn h(&self, l: usize) -> &Matrix {
        if l == 0 {
            &self.input
        } else {
            &self.post[l - 1]
        }
    }

    /// `a_l` for `l = 1 .. L`.
    pub fn a(&self, l: usize) -> &Matrix {
        &self.pre[l - 1]
    }

    pub fn batch_size(&self) -> usize {
        self.input.ncols()
    }
}

/// Forward pass for a single input vector.
pub fn forward(params: &MlpParams, x: &Vector) -> Result<ForwardTrace> {
    let col = x.view().insert_axis(Axis(1));
    forward_batch(params, col)
}

/// Forward pass for a batch stored column-wise (`n_0 x B`).
pub fn forward_batch(params: &MlpParams, x: ArrayView2<f64>) -> Result<ForwardTrace> {
    let n0 = params.layers[0].weight.ncols();
    if x.nrows() != n0 {
        return Err(shape_err(format!(
            "input has {} features, network expects {n0}",
            x.nrows()
        )));
    }
    let g = params.activation;
    let depth = params.depth();
    let mut pre = Vec::with_capacity(depth);
    let mut post = Vec::with_capacity(depth.saturating_sub(1));
    let input = x.to_owned();
    for (l, layer) in params.layers.iter().enumerate() {
        let h_prev = if l == 0 { &input } else { &post[l - 1] };
        let mut a = layer.weight.dot(h_prev);
        if let Some(b) = &layer.bias {
            a += &b.view().insert_axis(Axis(1));
        }
        if l + 1 < depth {
            post.push(a.mapv(|v| g.apply(v)));
        }
        pre.push(a);
    }
    let a_last = pre.last().expect("at least one layer");
    let output = match params.output {
        OutputMap::Identity => a_last.clone(),
        OutputMap::Softmax => softmax_columns(a_last),
    };
    Ok(ForwardTrace {
        input,
        pre,
        post,
        output,
    })
}

/// Column-wise softmax, shifted by the column max for stability.
pub fn softmax_columns(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for mut col in out.columns_mut() {
        let m = col.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        col.mapv_inplace(|v| (v - m).exp());
        let s = col.sum();
        col.mapv_inplace(|v| v / s);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    Zero,
    /// i.i.d. `N(0, sigma^2)`
    GaussianStd(f64),
    /// uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    FanInUniform,
}

/// Draws a network with layer widths `widths = [n_0, ..., n_L]`.
/// Biases, when enabled, start at zero.
pub fn init(
    scheme: InitScheme,
    widths: &[usize],
    activation: ActivationKind,
    output: OutputMap,
    bias: bool,
    rng: &mut Rng,
) -> Result<MlpParams> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(shape_err(format!("invalid widths {widths:?}")));
    }
    let layers = widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weight = match scheme {
                InitScheme::Zero => Array2::zeros((fan_out, fan_in)),
                InitScheme::GaussianStd(s) => gaussian_matrix(rng, fan_out, fan_in, s),
                InitScheme::FanInUniform => {
                    uniform_matrix(rng, fan_out, fan_in, 1.0 / (fan_in as f64).sqrt())
                }
            };
            Layer {
                weight,
                bias: bias.then(|| Array1::zeros(fan_out)),
            }
        })
        .collect();
    MlpParams::new(layers, activation, output)
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FAW1";

/// Writes `params` in the flat checkpoint layout (all integers and floats
/// little-endian):
///
/// ```text
/// magic      4 bytes  "FAW1"
/// L          u32
/// activation u8       0 erf, 1 relu, 2 tanh, 3 linear
/// output     u8       0 identity, 1 softmax
/// has_bias   u8       0 or 1
/// reserved   u8       0
/// shapes     L x (rows u32, cols u32)
/// payload    per layer: rows*cols f64 row-major, then rows f64 bias if has_bias
/// ```
pub fn write_checkpoint<W: Write>(params: &MlpParams, mut w: W) -> Result<()> {
    let bias = params.layers.iter().all(|l| l.bias.is_some());
    if params.has_bias() && !bias {
        return Err(Error::InvalidArgument(
            "checkpoints need biases on all layers or none".into(),
        ));
    }
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(params.depth() as u32).to_le_bytes())?;
    w.write_all(&[
        params.activation.code(),
        match params.output {
            OutputMap::Identity => 0,
            OutputMap::Softmax => 1,
        },
        u8::from(bias),
        0,
    ])?;
    for l in &params.layers {
        w.write_all(&(l.weight.nrows() as u32).to_le_bytes())?;
        w.write_all(&(l.weight.ncols() as u32).to_le_bytes())?;
    }
    for l in &params.layers {
        for v in l.weight.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        if let Some(b) = &l.bias {
            for v in b.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: usize,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|_| Error::Format {
            offset: self.offset,
            detail: format!("truncated while reading {what}"),
        })?;
        self.offset += N;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>(what)?))
    }
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<MlpParams> {
    let mut c = Cursor {
        inner: r,
        offset: 0,
    };
    let magic = c.bytes::<4>("magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            detail: format!("bad magic {magic:?}"),
        });
    }
    let depth = c.u32("layer count")? as usize;
    let flags_at = c.offset;
    let [act, out, bias, _] = c.bytes::<4>("flags")?;
    let activation = ActivationKind::from_code(act).ok_or(Error::Format {
        offset: flags_at,
        detail: format!("unknown activation code {act}"),
    })?;
    let output = match out {
        0 => OutputMap::Identity,
        1 => OutputMap::Softmax,
        _ => {
            return Err(Error::Format {
                offset: flags_at + 1,
                detail: format!("unknown output map {out}"),
            })
        }
    };
    let mut shapes = Vec::with_capacity(depth);
    for _ in 0..depth {
        shapes.push((c.u32("rows")? as usize, c.u32("cols")? as usize));
    }
    let mut layers = Vec::with_capacity(depth);
    for (rows, cols) in shapes {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(c.f64("weights")?);
        }
        let weight = Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format {
            offset: c.offset,
            detail: e.to_string(),
        })?;
        let bias = if bias == 1 {
            let mut b = Vec::with_capacity(rows);
            for _ in 0..rows {
                b.push(c.f64("bias")?);
            }
            Some(Array1::from(b))
        } else {
            None
        };
        layers.push(Layer { weight, bias });
    }
    MlpParams::new(layers, activation, output)
}
