//! Stage-1a: a small fully-connected autoencoder.
//!
//! Motion windows are high-dimensional (a 17-keypoint, 21-frame window is
//! 1071 floats); the autoencoder compresses them to a 64-dimensional code
//! before the neighbor layout runs. The architecture is deliberately plain:
//! input `D → hidden… → 64 → …hidden reversed → D`, `tanh` on hidden layers,
//! identity on the code and output layers, trained with mini-batch Adam on
//! mean-squared reconstruction error over per-dimension standardized inputs.
//!
//! Everything is backed by one flat parameter vector, which keeps Adam state
//! trivial and lets the tests check analytic gradients against central
//! finite differences parameter by parameter.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Matrix};

/// Hidden-layer nonlinearity. `Identity` exists so tests can compare a
/// linear network against a plain matrix-product oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

/// A fully-connected network over one flat parameter vector.
///
/// `sizes` lists layer widths including input and output;
/// `code_layer` is the weight-layer index whose output is the latent code.
/// The code layer and the final layer use identity activation, every other
/// layer uses `hidden_activation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    code_layer: usize,
    hidden_activation: Activation,
    params: Vec<f64>,
}

impl Mlp {
    /// Parameter layout: `[W₀ (out×in, row-major), b₀, W₁, b₁, …]`.
    fn param_len(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeroed(sizes: Vec<usize>, code_layer: usize, hidden_activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        if code_layer + 1 >= sizes.len() {
            return Err(Error::InvalidArgument(format!(
                "code layer {code_layer} out of range for {} weight layers",
                sizes.len() - 1
            )));
        }
        let params = vec![0.0; Self::param_len(&sizes)];
        Ok(Mlp { sizes, code_layer, hidden_activation, params })
    }

    /// Xavier-uniform initialization (biases zero), deterministic per seed.
    pub fn init(sizes: Vec<usize>, code_layer: usize, hidden_activation: Activation, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeroed(sizes, code_layer, hidden_activation)?;
        let mut rng = math::stage_rng(seed, "encoder/init");
        let sizes = mlp.sizes.clone();
        for l in 0..sizes.len() - 1 {
            let (w, _b) = mlp.layer_mut(l);
            let bound = (6.0 / (sizes[l] + sizes[l + 1]) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Ok(mlp)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn code_dim(&self) -> usize {
        self.sizes[self.code_layer + 1]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Byte offsets of layer `l`'s weight block and bias block.
    fn offsets(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut at = 0;
        for i in 0..l {
            at += self.sizes[i] * self.sizes[i + 1] + self.sizes[i + 1];
        }
        let w_len = self.sizes[l] * self.sizes[l + 1];
        (at, w_len, at + w_len, self.sizes[l + 1])
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w_at, w_len, b_at, b_len) = self.offsets(l);
        (&self.params[w_at..w_at + w_len], &self.params[b_at..b_at + b_len])
    }

    fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (w_at, w_len, b_at, b_len) = self.offsets(l);
        let (head, tail) = self.params.split_at_mut(b_at);
        (&mut head[w_at..w_at + w_len], &mut tail[..b_len])
    }

    fn is_linear_output(&self, l: usize) -> bool {
        l == self.code_layer || l == self.layer_count() - 1
    }

    /// Forward pass keeping every layer's activations (row 0 = the input),
    /// as needed for backprop.
    fn forward(&self, x: &Matrix) -> Vec<Matrix> {
        let n = x.rows;
        let mut acts = Vec::with_capacity(self.layer_count() + 1);
        acts.push(x.clone());
        for l in 0..self.layer_count() {
            let (w, b) = self.layer(l);
            let d_in = self.sizes[l];
            let d_out = self.sizes[l + 1];
            let mut out = Matrix::zeros(n, d_out);
            math::matmul_nt(&acts[l].data, n, d_in, w, d_out, &mut out.data);
            for r in 0..n {
                let row = out.row_mut(r);
                for (v, bi) in row.iter_mut().zip(b) {
                    *v += bi;
                }
            }
            if !self.is_linear_output(l) && self.hidden_activation == Activation::Tanh {
                for v in out.data.iter_mut() {
                    *v = v.tanh();
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Forward through the encoder half only.
    pub fn encode_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "encode input width {} ≠ network input {}",
                x.cols,
                self.input_dim()
            )));
        }
        let n = x.rows;
        let mut cur = x.clone();
        for l in 0..=self.code_layer {
            let (w, b) = self.layer(l);
            let mut out = Matrix::zeros(n, self.sizes[l + 1]);
            math::matmul_nt(&cur.data, n, self.sizes[l], w, self.sizes[l + 1], &mut out.data);
            for r in 0..n {
                let row = out.row_mut(r);
                for (v, bi) in row.iter_mut().zip(b) {
                    *v += bi;
                }
            }
            if !self.is_linear_output(l) && self.hidden_activation == Activation::Tanh {
                for v in out.data.iter_mut() {
                    *v = v.tanh();
                }
            }
            cur = out;
        }
        Ok(cur)
    }

    /// Full reconstruction of a batch.
    pub fn reconstruct_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} ≠ network input {}",
                x.cols,
                self.input_dim()
            )));
        }
        Ok(self.forward(x).pop().expect("nonempty"))
    }

    /// Mean-squared reconstruction loss over the batch (mean over **rows and
    /// dimensions**) and its gradient with respect to every parameter.
    /// `grad` must have `params().len()` entries; it is overwritten.
    pub fn loss_and_grad(&self, x: &Matrix, grad: &mut [f64]) -> Result<f64> {
        if grad.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient buffer {} ≠ parameter count {}",
                grad.len(),
                self.params.len()
            )));
        }
        let acts = self.forward(x);
        let n = x.rows;
        let d = x.cols;
        let out = acts.last().expect("output layer");
        let mut loss = 0.0;
        // delta for the output layer: dL/d(out) with identity activation
        let mut delta = Matrix::zeros(n, d);
        let norm = 1.0 / (n * d) as f64;
        for i in 0..out.data.len() {
            let e = out.data[i] - x.data[i];
            loss += e * e;
            delta.data[i] = 2.0 * e * norm;
        }
        loss *= norm;

        grad.fill(0.0);
        for l in (0..self.layer_count()).rev() {
            let d_out = self.sizes[l + 1];
            let d_in = self.sizes[l];
            let (w_at, w_len, b_at, b_len) = self.offsets(l);
            // grad_W = deltaᵀ · A_l ; grad_b = column sums of delta
            math::matmul_tn(&delta.data, n, d_out, &acts[l].data, d_in, &mut grad[w_at..w_at + w_len]);
            for r in 0..n {
                let row = delta.row(r);
                for (g, v) in grad[b_at..b_at + b_len].iter_mut().zip(row) {
                    *g += v;
                }
            }
            if l == 0 {
                break;
            }
            // delta_prev = (delta · W_l) ⊙ act'(A_l)
            let (w, _) = self.layer(l);
            let mut prev = Matrix::zeros(n, d_in);
            math::matmul_nn(&delta.data, n, d_out, w, d_in, &mut prev.data);
            if !self.is_linear_output(l - 1) && self.hidden_activation == Activation::Tanh {
                for (p, a) in prev.data.iter_mut().zip(&acts[l].data) {
                    *p *= 1.0 - a * a; // tanh'(z) in terms of tanh(z)
                }
            }
            delta = prev;
        }
        Ok(loss)
    }
}

/// Training hyperparameters for [`train_encoder`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Encoder-side hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    /// Latent width; fixed at 64 by the metric definition.
    pub latent: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden: vec![512, 128],
            latent: 64,
            epochs: 60,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent != 64 {
            return Err(Error::Config(format!(
                "latent width is fixed at 64 by the metric definition, got {}",
                self.latent
            )));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate {} must be > 0", self.learning_rate)));
        }
        Ok(())
    }

    fn sizes(&self, d: usize) -> (Vec<usize>, usize) {
        let mut sizes = Vec::with_capacity(2 * self.hidden.len() + 3);
        sizes.push(d);
        sizes.extend(&self.hidden);
        sizes.push(self.latent);
        sizes.extend(self.hidden.iter().rev());
        sizes.push(d);
        let code_layer = self.hidden.len();
        (sizes, code_layer)
    }
}

/// A trained encoder: standardization + network + training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub(crate) mlp: Mlp,
    /// Per-dimension training mean.
    pub mean: Vec<f64>,
    /// Per-dimension training standard deviation; zero-variance dimensions
    /// get scale 1 so standardization stays a bijection.
    pub scale: Vec<f64>,
    /// Reconstruction RMSE per standardized element after the last epoch.
    pub final_rmse: f64,
    /// Mean training loss per epoch (empty for zero-epoch training).
    pub epoch_losses: Vec<f64>,
}

impl EncoderModel {
    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.mlp.code_dim()
    }

    fn standardize(&self, rows: &Matrix) -> Matrix {
        let mut z = rows.clone();
        for r in 0..z.rows {
            let row = z.row_mut(r);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        z
    }

    /// Encode one window vector to its 64-dimensional code.
    pub fn encode(&self, window: &[f64]) -> Result<Vec<f64>> {
        if window.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "window width {} ≠ encoder input {}",
                window.len(),
                self.input_dim()
            )));
        }
        let x = Matrix { rows: 1, cols: window.len(), data: window.to_vec() };
        let codes = self.encode_batch(&x)?;
        Ok(codes.data)
    }

    /// Encode a batch of window rows.
    pub fn encode_batch(&self, rows: &Matrix) -> Result<Matrix> {
        if rows.cols != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "window width {} ≠ encoder input {}",
                rows.cols,
                self.input_dim()
            )));
        }
        self.mlp.encode_batch(&self.standardize(rows))
    }

    /// Reconstruction RMSE (standardized space) on an arbitrary batch.
    pub fn reconstruction_rmse(&self, rows: &Matrix) -> Result<f64> {
        let z = self.standardize(rows);
        let out = self.mlp.reconstruct_batch(&z)?;
        let mut acc = 0.0;
        for (a, b) in out.data.iter().zip(&z.data) {
            acc += (a - b) * (a - b);
        }
        Ok((acc / z.data.len() as f64).sqrt())
    }
}

/// Fit standardization on `windows`, then train the autoencoder with
/// mini-batch Adam. Deterministic for a fixed seed; zero epochs returns the
/// initialized model unchanged. Non-finite loss aborts with the epoch index.
pub fn train_encoder(windows: &Matrix, cfg: &EncoderConfig) -> Result<EncoderModel> {
    cfg.validate()?;
    let n = windows.rows;
    let d = windows.cols;
    if n < 2 * cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 × batch_size = {} training rows, got {n}",
            2 * cfg.batch_size
        )));
    }
    if !windows.is_finite() {
        return Err(Error::NonFinite("training windows contain non-finite values".into()));
    }

    // per-dimension standardization, fitted on the training data only
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(windows.row(r)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut scale = vec![0.0; d];
    for r in 0..n {
        for (j, v) in windows.row(r).iter().enumerate() {
            let e = v - mean[j];
            scale[j] += e * e;
        }
    }
    for s in scale.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }

    let (sizes, code_layer) = cfg.sizes(d);
    let mlp = Mlp::init(sizes, code_layer, Activation::Tanh, cfg.seed)?;
    let mut model = EncoderModel { mlp, mean, scale, final_rmse: f64::NAN, epoch_losses: Vec::new() };
    let z = model.standardize(windows);
    if cfg.epochs == 0 {
        model.final_rmse = model.mlp.reconstruct_batch(&z).map(|out| {
            let acc: f64 = out.data.iter().zip(&z.data).map(|(a, b)| (a - b) * (a - b)).sum();
            (acc / z.data.len() as f64).sqrt()
        })?;
        return Ok(model);
    }

    // Adam state
    let p = model.mlp.params().len();
    let mut grad = vec![0.0; p];
    let mut m1 = vec![0.0; p];
    let mut m2 = vec![0.0; p];
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut step = 0usize;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = math::stage_rng(cfg.seed, "encoder/batches");
    let mut batch = Matrix::zeros(cfg.batch_size, d);

    for epoch in 0..cfg.epochs {
        // linear decay to 5% of the base rate: Adam at a constant rate
        // oscillates around the minimum instead of settling into it
        let lr = cfg.learning_rate
            * (1.0 - 0.95 * epoch as f64 / cfg.epochs.max(1) as f64);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.rows = chunk.len();
            batch.data.truncate(chunk.len() * d);
            batch.data.resize(chunk.len() * d, 0.0);
            for (bi, &ri) in chunk.iter().enumerate() {
                batch.data[bi * d..(bi + 1) * d].copy_from_slice(z.row(ri));
            }
            let loss = model.mlp.loss_and_grad(&batch, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            epoch_loss += loss;
            batches += 1.0;
            step += 1;
            let bc1 = 1.0 - beta1.powi(step as i32);
            let bc2 = 1.0 - beta2.powi(step as i32);
            let params = model.mlp.params_mut();
            for i in 0..p {
                m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
                m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
                let mhat = m1[i] / bc1;
                let vhat = m2[i] / bc2;
                params[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        model.epoch_losses.push(epoch_loss / batches);
    }

    let out = model.mlp.reconstruct_batch(&z)?;
    let acc: f64 = out.data.iter().zip(&z.data).map(|(a, b)| (a - b) * (a - b)).sum();
    model.final_rmse = (acc / z.data.len() as f64).sqrt();
    if !model.final_rmse.is_finite() {
        return Err(Error::Diverged { epoch: cfg.epochs - 1, loss: model.final_rmse });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64, scale: f64) -> Matrix {
        let mut rng = math::stage_rng(seed, "encoder-test-data");
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data.iter_mut() {
            *v = rng.gen_range(-scale..scale);
        }
        m
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        // Tiny autoencoder 4 → 3 → 2 → 3 → 4 with the real tanh/identity mix.
        for seed in [1u64, 2, 3] {
            let mut mlp = Mlp::init(vec![4, 3, 2, 3, 4], 1, Activation::Tanh, seed).unwrap();
            let x = random_matrix(5, 4, seed + 10, 1.0);
            let mut grad = vec![0.0; mlp.params().len()];
            mlp.loss_and_grad(&x, &mut grad).unwrap();
            let h = 1e-5;
            for i in 0..grad.len() {
                let orig = mlp.params()[i];
                mlp.params_mut()[i] = orig + h;
                let mut sink = vec![0.0; grad.len()];
                let up = mlp.loss_and_grad(&x, &mut sink).unwrap();
                mlp.params_mut()[i] = orig - h;
                let down = mlp.loss_and_grad(&x, &mut sink).unwrap();
                mlp.params_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let denom = grad[i].abs().max(numeric.abs()).max(1e-8);
                let rel = (grad[i] - numeric).abs() / denom;
                assert!(rel <= 1e-4, "seed {seed} param {i}: analytic {} vs numeric {numeric}", grad[i]);
            }
        }
    }

    #[test]
    fn linear_network_matches_matrix_product_oracle() {
        let mut mlp = Mlp::init(vec![3, 2, 3], 0, Activation::Identity, 4).unwrap();
        // fill with known values
        let vals: Vec<f64> = (0..mlp.params().len()).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        mlp.params_mut().copy_from_slice(&vals);
        let x = vec![0.5, -1.0, 2.0];
        let xm = Matrix { rows: 1, cols: 3, data: x.clone() };
        let code = mlp.encode_batch(&xm).unwrap();
        // manual: code = W0·x + b0 with W0 row-major 2×3 at params[0..6], b0 at [6..8]
        for r in 0..2 {
            let mut acc = vals[6 + r];
            for c in 0..3 {
                acc += vals[r * 3 + c] * x[c];
            }
            assert!((code.data[r] - acc).abs() < 1e-12);
        }
        // full reconstruction: out = W1·code + b1
        let out = mlp.reconstruct_batch(&xm).unwrap();
        for r in 0..3 {
            let mut acc = vals[8 + 6 + r];
            for c in 0..2 {
                acc += vals[8 + r * 2 + c] * code.data[c];
            }
            assert!((out.data[r] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_encode_to_the_code_bias() {
        let mut mlp = Mlp::zeroed(vec![4, 3, 2, 3, 4], 1, Activation::Tanh, ).unwrap();
        // set only the code layer's bias
        let (_, _, b_at, b_len) = mlp.offsets(1);
        for (i, v) in (0..b_len).enumerate() {
            mlp.params_mut()[b_at + v] = 0.25 * (i as f64 + 1.0);
        }
        let x = Matrix { rows: 1, cols: 4, data: vec![0.0; 4] };
        let code = mlp.encode_batch(&x).unwrap();
        assert_eq!(code.data, vec![0.25, 0.5]);
        // repeated calls identical
        assert_eq!(mlp.encode_batch(&x).unwrap().data, code.data);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mlp = Mlp::init(vec![4, 3, 2, 3, 4], 1, Activation::Tanh, 1).unwrap();
        let x = Matrix::zeros(1, 5);
        assert!(matches!(mlp.encode_batch(&x), Err(Error::ShapeMismatch(_))));
    }

    /// Rows lying exactly in a 64-dimensional linear subspace of R^96: the
    /// bottleneck is wide enough, so reconstruction error must become small.
    #[test]
    fn low_rank_data_reconstructs_below_1e2() {
        let n = 256;
        let d = 96;
        let r = 64;
        let basis = random_matrix(r, d, 40, 1.0);
        let coeff = random_matrix(n, r, 41, 1.0);
        let mut data = Matrix::zeros(n, d);
        math::matmul_nn(&coeff.data, n, r, &basis.data, d, &mut data.data);
        let cfg = EncoderConfig {
            hidden: vec![128, 96],
            epochs: 500,
            learning_rate: 3e-3,
            ..EncoderConfig::default()
        };
        let model = train_encoder(&data, &cfg).unwrap();
        assert!(
            model.final_rmse <= 1e-2,
            "rank-{r} data should reconstruct tightly, got RMSE {}",
            model.final_rmse
        );
        // smoothed training loss decreases over the run: quartile means of
        // the per-epoch loss curve are strictly ordered
        let q = model.epoch_losses.len() / 4;
        let quartile = |i: usize| {
            model.epoch_losses[i * q..(i + 1) * q].iter().sum::<f64>() / q as f64
        };
        for i in 0..3 {
            assert!(
                quartile(i + 1) < quartile(i),
                "quartile {} mean loss {} did not improve on quartile {} ({})",
                i + 1,
                quartile(i + 1),
                i,
                quartile(i)
            );
        }
    }

    #[test]
    fn training_is_deterministic_and_zero_epochs_return_the_init() {
        let data = random_matrix(80, 12, 50, 1.0);
        let cfg = EncoderConfig {
            hidden: vec![8],
            epochs: 5,
            batch_size: 16,
            seed: 9,
            ..EncoderConfig::default()
        };
        let a = train_encoder(&data, &cfg).unwrap();
        let b = train_encoder(&data, &cfg).unwrap();
        assert_eq!(a.mlp.params(), b.mlp.params());
        assert_eq!(a.final_rmse.to_bits(), b.final_rmse.to_bits());

        let zero = EncoderConfig { epochs: 0, ..cfg.clone() };
        let z = train_encoder(&data, &zero).unwrap();
        let (sizes, code_layer) = zero.sizes(12);
        let fresh = Mlp::init(sizes, code_layer, Activation::Tanh, zero.seed).unwrap();
        assert_eq!(z.mlp.params(), fresh.params(), "zero-epoch training must not touch weights");
        assert!(z.epoch_losses.is_empty());
    }

    #[test]
    fn absurd_learning_rate_diverges_with_epoch_index() {
        let data = random_matrix(80, 12, 51, 10.0);
        // Adam bounds each step by the learning rate, so the loss only
        // leaves f64 range once weights reach ~1e154; a rate this large gets
        // there on the second batch and must abort with the epoch index.
        let cfg = EncoderConfig {
            hidden: vec![8],
            epochs: 50,
            learning_rate: 1e160,
            batch_size: 16,
            ..EncoderConfig::default()
        };
        match train_encoder(&data, &cfg) {
            Err(Error::Diverged { epoch, loss }) => {
                assert!(epoch < 50);
                assert!(!loss.is_finite());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn standardization_handles_constant_dimensions() {
        let mut data = random_matrix(64, 6, 52, 1.0);
        for r in 0..64 {
            data.row_mut(r)[2] = 3.5; // constant column
        }
        let cfg = EncoderConfig { hidden: vec![4], epochs: 2, batch_size: 16, ..EncoderConfig::default() };
        let model = train_encoder(&data, &cfg).unwrap();
        assert_eq!(model.scale[2], 1.0);
        assert!((model.mean[2] - 3.5).abs() < 1e-12);
        let code = model.encode(data.row(0)).unwrap();
        assert_eq!(code.len(), 64);
        assert!(code.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn latent_width_other_than_64_is_rejected() {
        let cfg = EncoderConfig { latent: 32, ..EncoderConfig::default() };
        let data = random_matrix(80, 12, 53, 1.0);
        assert!(matches!(train_encoder(&data, &cfg), Err(Error::Config(_))));
    }
}
