//! Feedforward encoder with explicit forward and backward passes.
//!
//! Layout: input → ReLU hidden layers → ReLU feature layer `f(x)` →
//! two heads off the features: a sigmoid hash layer producing relaxed
//! codes `h(x) ∈ (0,1)^q`, and a linear classifier producing logits `z`
//! and softmax probabilities `p`. The backward pass sums both heads'
//! contributions at the shared feature layer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mat::Mat;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    /// Width of the feature layer `f(x)` that feeds both heads.
    pub feature_dim: usize,
    /// Hash code length `q`.
    pub code_length: usize,
    /// Classifier output width `c`.
    pub class_count: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0
            || self.feature_dim == 0
            || self.hidden_dims.iter().any(|&d| d == 0)
        {
            return Err(Error::Parameter("all layer dims must be positive".into()));
        }
        if self.code_length < 1 {
            return Err(Error::Parameter("code_length must be >= 1".into()));
        }
        if self.class_count < 2 {
            return Err(Error::Parameter("class_count must be >= 2".into()));
        }
        Ok(())
    }

    /// Dims of the ReLU stack: hidden layers then the feature layer.
    fn stack_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.feature_dim));
        dims
    }
}

/// One fully-connected layer: `w` is `in × out`, `b` has length `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Mat::zeros(input, output),
            b: vec![0.0; output],
        }
    }

    fn forward(&self, x: &Mat) -> Mat {
        let mut out = x.matmul(&self.w);
        out.add_row_bias(&self.b);
        out
    }

    fn is_finite(&self) -> bool {
        self.w.is_finite() && self.b.iter().all(|v| v.is_finite())
    }
}

/// All trainable parameters. `stack` holds the ReLU layers (hidden layers
/// followed by the feature layer); `hash` and `classifier` are the heads.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub stack: Vec<Dense>,
    pub hash: Dense,
    pub classifier: Dense,
}

impl EncoderParams {
    pub fn is_finite(&self) -> bool {
        self.stack.iter().all(Dense::is_finite)
            && self.hash.is_finite()
            && self.classifier.is_finite()
    }

    /// Visit every layer as `(layer, is_head_bias_exempt)` — used by the
    /// trainer to apply updates uniformly.
    pub fn layers_mut(&mut self) -> Vec<&mut Dense> {
        let mut out: Vec<&mut Dense> = self.stack.iter_mut().collect();
        out.push(&mut self.hash);
        out.push(&mut self.classifier);
        out
    }

    pub fn layers(&self) -> Vec<&Dense> {
        let mut out: Vec<&Dense> = self.stack.iter().collect();
        out.push(&self.hash);
        out.push(&self.classifier);
        out
    }
}

/// Per-parameter gradients, same shapes as [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub stack: Vec<Dense>,
    pub hash: Dense,
    pub classifier: Dense,
}

impl GradientSet {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        GradientSet {
            stack: params
                .stack
                .iter()
                .map(|d| Dense::zeros(d.w.rows(), d.w.cols()))
                .collect(),
            hash: Dense::zeros(params.hash.w.rows(), params.hash.w.cols()),
            classifier: Dense::zeros(params.classifier.w.rows(), params.classifier.w.cols()),
        }
    }

    pub fn layers(&self) -> Vec<&Dense> {
        let mut out: Vec<&Dense> = self.stack.iter().collect();
        out.push(&self.hash);
        out.push(&self.classifier);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(|d| d.is_finite())
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub input: Mat,
    /// Pre-activation of each ReLU layer.
    pub stack_pre: Vec<Mat>,
    /// Post-activation of each ReLU layer; the last entry is `f(x)`.
    pub stack_post: Vec<Mat>,
    /// Relaxed hash outputs `sigmoid(W^T f(x) + v)`, strictly in (0,1).
    pub hash: Mat,
    /// Classifier logits `z`.
    pub logits: Mat,
    /// Softmax rows `p`.
    pub probs: Mat,
}

impl Activations {
    pub fn features(&self) -> &Mat {
        self.stack_post.last().expect("stack is never empty")
    }
}

/// Numerically stable sigmoid, output clamped strictly inside (0,1)
/// (f64 rounding would otherwise return exact 0/1 beyond |x| ≈ 37).
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(1e-12, 1.0 - 1e-12)
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Weights drawn from a zero-mean normal with std `1/sqrt(fan_in)`,
/// biases zero; deterministic per seed.
pub fn init_params(config: &EncoderConfig, seed: u64) -> Result<EncoderParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |input: usize, output: usize| -> Dense {
        let normal = Normal::new(0.0, 1.0 / (input as f64).sqrt()).unwrap();
        let data = (0..input * output)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Dense {
            w: Mat::from_vec(input, output, data),
            b: vec![0.0; output],
        }
    };
    let stack = config
        .stack_dims()
        .into_iter()
        .map(|(i, o)| draw(i, o))
        .collect();
    let hash = draw(config.feature_dim, config.code_length);
    let classifier = draw(config.feature_dim, config.class_count);
    Ok(EncoderParams {
        config: config.clone(),
        stack,
        hash,
        classifier,
    })
}

pub fn forward(params: &EncoderParams, batch: &Mat) -> Result<Activations> {
    if batch.cols() != params.config.input_dim {
        return Err(Error::Contract(format!(
            "input has {} columns, encoder expects {}",
            batch.cols(),
            params.config.input_dim
        )));
    }
    if !batch.is_finite() {
        return Err(Error::Numeric("non-finite value in input batch".into()));
    }

    let mut stack_pre = Vec::with_capacity(params.stack.len());
    let mut stack_post = Vec::with_capacity(params.stack.len());
    let mut current = batch.clone();
    for layer in &params.stack {
        let pre = layer.forward(&current);
        let post = pre.map(relu);
        stack_pre.push(pre);
        current = post.clone();
        stack_post.push(post);
    }
    let features = stack_post.last().unwrap();

    let hash = params.hash.forward(features).map(sigmoid);

    let logits = params.classifier.forward(features);
    let mut probs = Mat::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (slot, &z) in probs.row_mut(i).iter_mut().zip(row) {
            let e = (z - max).exp();
            *slot = e;
            sum += e;
        }
        for slot in probs.row_mut(i) {
            *slot /= sum;
        }
    }

    Ok(Activations {
        input: batch.clone(),
        stack_pre,
        stack_post,
        hash,
        logits,
        probs,
    })
}

/// Backpropagate head gradients to every parameter.
///
/// `grad_hash` is `∂L/∂h` (the sigmoid backward happens here);
/// `grad_logits` is `∂L/∂z` (softmax already folded in by the loss).
pub fn backward(
    params: &EncoderParams,
    acts: &Activations,
    grad_hash: &Mat,
    grad_logits: &Mat,
) -> Result<GradientSet> {
    let rows = acts.input.rows();
    if grad_hash.rows() != rows || grad_hash.cols() != params.config.code_length {
        return Err(Error::Contract(format!(
            "grad_hash is {}×{}, expected {}×{}",
            grad_hash.rows(),
            grad_hash.cols(),
            rows,
            params.config.code_length
        )));
    }
    if grad_logits.rows() != rows || grad_logits.cols() != params.config.class_count {
        return Err(Error::Contract(format!(
            "grad_logits is {}×{}, expected {}×{}",
            grad_logits.rows(),
            grad_logits.cols(),
            rows,
            params.config.class_count
        )));
    }

    let features = acts.features();

    // sigmoid backward: dL/d(pre) = dL/dh ⊙ h(1-h)
    let sig_deriv = acts.hash.map(|h| h * (1.0 - h));
    let d_hash_pre = grad_hash.hadamard(&sig_deriv);
    let hash_grad = Dense {
        w: features.t_matmul(&d_hash_pre),
        b: d_hash_pre.col_sums(),
    };
    let classifier_grad = Dense {
        w: features.t_matmul(grad_logits),
        b: grad_logits.col_sums(),
    };

    // both heads meet at the feature layer
    let mut d_post = d_hash_pre.matmul_t(&params.hash.w);
    d_post.add_assign(&grad_logits.matmul_t(&params.classifier.w));

    let mut stack_grads: Vec<Dense> = Vec::with_capacity(params.stack.len());
    for idx in (0..params.stack.len()).rev() {
        let pre = &acts.stack_pre[idx];
        let relu_mask = pre.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let d_pre = d_post.hadamard(&relu_mask);
        let layer_input = if idx == 0 {
            &acts.input
        } else {
            &acts.stack_post[idx - 1]
        };
        stack_grads.push(Dense {
            w: layer_input.t_matmul(&d_pre),
            b: d_pre.col_sums(),
        });
        if idx > 0 {
            d_post = d_pre.matmul_t(&params.stack[idx].w);
        }
    }
    stack_grads.reverse();

    Ok(GradientSet {
        stack: stack_grads,
        hash: hash_grad,
        classifier: classifier_grad,
    })
}

// --- checkpoint format -----------------------------------------------------

/// Magic bytes at the start of a checkpoint file.
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SHCP";
/// Current checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Length("truncated checkpoint".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn write_dense<W: Write>(w: &mut W, d: &Dense) -> Result<()> {
    for &v in d.w.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in &d.b {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_dense<R: Read>(r: &mut R, input: usize, output: usize) -> Result<Dense> {
    let mut data = vec![0.0; input * output];
    let mut buf = [0u8; 8];
    for v in &mut data {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Length("truncated checkpoint blob".into()))?;
        *v = f64::from_le_bytes(buf);
    }
    let mut b = vec![0.0; output];
    for v in &mut b {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Length("truncated checkpoint blob".into()))?;
        *v = f64::from_le_bytes(buf);
    }
    Ok(Dense {
        w: Mat::from_vec(input, output, data),
        b,
    })
}

/// Serialize params: magic, version, config header, then little-endian
/// f64 blobs in layer order (stack, hash head, classifier head).
pub fn write_checkpoint_to<W: Write>(w: &mut W, params: &EncoderParams) -> Result<()> {
    let cfg = &params.config;
    w.write_all(&CHECKPOINT_MAGIC)?;
    write_u32(w, CHECKPOINT_VERSION)?;
    write_u32(w, cfg.input_dim as u32)?;
    write_u32(w, cfg.hidden_dims.len() as u32)?;
    for &h in &cfg.hidden_dims {
        write_u32(w, h as u32)?;
    }
    write_u32(w, cfg.feature_dim as u32)?;
    write_u32(w, cfg.code_length as u32)?;
    write_u32(w, cfg.class_count as u32)?;
    for layer in &params.stack {
        write_dense(w, layer)?;
    }
    write_dense(w, &params.hash)?;
    write_dense(w, &params.classifier)?;
    Ok(())
}

pub fn read_checkpoint_from<R: Read>(r: &mut R) -> Result<EncoderParams> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Length("checkpoint shorter than header".into()))?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let input_dim = read_u32(r)? as usize;
    let n_hidden = read_u32(r)? as usize;
    let mut hidden_dims = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden_dims.push(read_u32(r)? as usize);
    }
    let feature_dim = read_u32(r)? as usize;
    let code_length = read_u32(r)? as usize;
    let class_count = read_u32(r)? as usize;
    let config = EncoderConfig {
        input_dim,
        hidden_dims,
        feature_dim,
        code_length,
        class_count,
    };
    config.validate()?;
    let mut stack = Vec::new();
    for (i, o) in config.stack_dims() {
        stack.push(read_dense(r, i, o)?);
    }
    let hash = read_dense(r, config.feature_dim, config.code_length)?;
    let classifier = read_dense(r, config.feature_dim, config.class_count)?;
    let mut trailing = Vec::new();
    r.read_to_end(&mut trailing)?;
    if !trailing.is_empty() {
        return Err(Error::Length(format!(
            "{} trailing bytes after checkpoint blobs",
            trailing.len()
        )));
    }
    Ok(EncoderParams {
        config,
        stack,
        hash,
        classifier,
    })
}

pub fn write_checkpoint(path: &Path, params: &EncoderParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint_to(&mut w, params)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<EncoderParams> {
    let mut r = BufReader::new(File::open(path)?);
    read_checkpoint_from(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> EncoderConfig {
        EncoderConfig {
            input_dim: 2,
            hidden_dims: vec![],
            feature_dim: 2,
            code_length: 2,
            class_count: 2,
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = tiny_config();
        let a = init_params(&cfg, 5).unwrap();
        let b = init_params(&cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = init_params(&cfg, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn biases_start_at_zero() {
        let params = init_params(&tiny_config(), 1).unwrap();
        assert!(params.stack.iter().all(|d| d.b.iter().all(|&v| v == 0.0)));
        assert!(params.hash.b.iter().all(|&v| v == 0.0));
        assert!(params.classifier.b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weight_variance_tracks_inverse_fan_in() {
        let cfg = EncoderConfig {
            input_dim: 64,
            hidden_dims: vec![],
            feature_dim: 64,
            code_length: 2,
            class_count: 2,
        };
        let params = init_params(&cfg, 7).unwrap();
        let w = params.stack[0].w.data();
        let mean: f64 = w.iter().sum::<f64>() / w.len() as f64;
        let var: f64 = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        let expected = 1.0 / 64.0;
        assert!(
            (var - expected).abs() / expected < 0.2,
            "variance {var} too far from {expected}"
        );
    }

    #[test]
    fn zero_hash_head_gives_half_outputs() {
        let mut params = init_params(&tiny_config(), 2).unwrap();
        params.hash.w = Mat::zeros(2, 2);
        params.hash.b = vec![0.0; 2];
        let x = Mat::from_rows(&[vec![0.3, -0.7]]);
        let acts = forward(&params, &x).unwrap();
        for &h in acts.hash.row(0) {
            assert_eq!(h, 0.5);
        }
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let params = init_params(
            &EncoderConfig {
                input_dim: 3,
                hidden_dims: vec![4],
                feature_dim: 3,
                code_length: 2,
                class_count: 5,
            },
            3,
        )
        .unwrap();
        let x = Mat::from_rows(&[vec![0.1, 0.9, 0.5], vec![100.0, -100.0, 0.0]]);
        let acts = forward(&params, &x).unwrap();
        for i in 0..2 {
            let sum: f64 = acts.probs.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hash_outputs_stay_strictly_interior() {
        let mut params = init_params(&tiny_config(), 2).unwrap();
        *params.hash.w.at_mut(0, 0) = 1e6;
        *params.hash.w.at_mut(1, 1) = -1e6;
        let x = Mat::from_rows(&[vec![5.0, 5.0]]);
        let acts = forward(&params, &x).unwrap();
        for &h in acts.hash.row(0) {
            assert!(h > 0.0 && h < 1.0);
        }
    }

    #[test]
    fn forward_hand_evaluated_single_hidden_layer() {
        // one 2->2 ReLU layer feeding a 2->1 hash head, hand arithmetic
        let cfg = EncoderConfig {
            input_dim: 2,
            hidden_dims: vec![],
            feature_dim: 2,
            code_length: 1,
            class_count: 2,
        };
        let mut params = init_params(&cfg, 0).unwrap();
        params.stack[0].w = Mat::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0]]);
        params.stack[0].b = vec![0.1, -0.2];
        params.hash.w = Mat::from_rows(&[vec![2.0], vec![-1.0]]);
        params.hash.b = vec![0.3];
        let x = Mat::from_rows(&[vec![1.0, 2.0]]);
        let acts = forward(&params, &x).unwrap();
        // pre = (1*1 + 2*0.5 + 0.1, 1*(-1) + 2*2 - 0.2) = (2.1, 2.8)
        // f = relu(pre) = (2.1, 2.8)
        // hash pre = 2*2.1 - 1*2.8 + 0.3 = 1.7; h = sigmoid(1.7)
        let expected = 1.0 / (1.0 + (-1.7f64).exp());
        assert!((acts.hash.at(0, 0) - expected).abs() < 1e-12);
        assert_eq!(acts.features().row(0), &[2.1, 2.8]);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let params = init_params(&tiny_config(), 2).unwrap();
        let x = Mat::from_rows(&[vec![f64::NAN, 0.0]]);
        assert!(matches!(forward(&params, &x), Err(Error::Numeric(_))));
    }

    #[test]
    fn zero_head_gradients_give_zero_parameter_gradients() {
        let params = init_params(&tiny_config(), 4).unwrap();
        let x = Mat::from_rows(&[vec![0.2, 0.4]]);
        let acts = forward(&params, &x).unwrap();
        let grads = backward(&params, &acts, &Mat::zeros(1, 2), &Mat::zeros(1, 2)).unwrap();
        for layer in grads.layers() {
            assert!(layer.w.data().iter().all(|&v| v == 0.0));
            assert!(layer.b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_is_linear_in_head_gradients() {
        let params = init_params(&tiny_config(), 4).unwrap();
        let x = Mat::from_rows(&[vec![0.2, 0.4], vec![-0.1, 0.9]]);
        let acts = forward(&params, &x).unwrap();
        let gh = Mat::from_rows(&[vec![0.3, -0.7], vec![1.1, 0.2]]);
        let gl = Mat::from_rows(&[vec![0.5, -0.5], vec![-0.2, 0.2]]);
        let g1 = backward(&params, &acts, &gh, &gl).unwrap();
        let mut gh2 = gh.clone();
        gh2.scale(3.0);
        let mut gl2 = gl.clone();
        gl2.scale(3.0);
        let g3 = backward(&params, &acts, &gh2, &gl2).unwrap();
        for (a, b) in g1.layers().iter().zip(g3.layers()) {
            for (x, y) in a.w.data().iter().zip(b.w.data()) {
                assert!((3.0 * x - y).abs() < 1e-12);
            }
            for (x, y) in a.b.iter().zip(&b.b) {
                assert!((3.0 * x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_shape_mismatch_is_contract_error() {
        let params = init_params(&tiny_config(), 4).unwrap();
        let x = Mat::from_rows(&[vec![0.2, 0.4]]);
        let acts = forward(&params, &x).unwrap();
        let res = backward(&params, &acts, &Mat::zeros(1, 3), &Mat::zeros(1, 2));
        assert!(matches!(res, Err(Error::Contract(_))));
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        for q in [1usize, 12, 48, 64, 65] {
            let cfg = EncoderConfig {
                input_dim: 5,
                hidden_dims: vec![3],
                feature_dim: 4,
                code_length: q,
                class_count: 3,
            };
            let params = init_params(&cfg, 99).unwrap();
            let mut buf = Vec::new();
            write_checkpoint_to(&mut buf, &params).unwrap();
            let back = read_checkpoint_from(&mut &buf[..]).unwrap();
            assert_eq!(back, params);
            let mut buf2 = Vec::new();
            write_checkpoint_to(&mut buf2, &back).unwrap();
            assert_eq!(buf, buf2);
        }
    }
}
