//! Minimal dense feedforward networks with deterministic training.
//!
//! Everything is plain `f64` vectors: weights are stored row-major per layer
//! (`out x in`). Training is reproducible bit-for-bit from the seeds in
//! [`NetworkSpec`] and [`TrainConfig`]; the RNG is ChaCha8 throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    Tanh,
}

/// Architecture plus the weight-initialization seed.
///
/// `layer_sizes` includes the input layer, e.g. `[2, 10, 5, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
        seed: u64,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("network spec", "need at least two layers"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid("network spec", "all layer sizes must be >= 1"));
        }
        Ok(NetworkSpec {
            layer_sizes,
            hidden_activation,
            output_activation,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// Dense feedforward network. Immutable after training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    /// `weights[l]` is row-major `layer_sizes[l+1] x layer_sizes[l]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Optimizer choice. Adam uses the standard constants
/// `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Learning-rate schedule. `HalveOnPlateau` halves the rate whenever the
/// epoch training loss has not improved for `patience` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LrSchedule {
    Constant,
    HalveOnPlateau { patience: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle: bool,
    pub shuffle_seed: u64,
    pub schedule: LrSchedule,
}

impl TrainConfig {
    pub fn sgd(learning_rate: f64, batch_size: usize, epochs: usize, shuffle_seed: u64) -> Self {
        TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate,
            batch_size,
            epochs,
            shuffle: true,
            shuffle_seed,
            schedule: LrSchedule::Constant,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("train config", "learning_rate must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("train config", "batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Paired input/target rows; all rows share the same dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::EmptyDataset);
        }
        let in_dim = inputs[0].len();
        let out_dim = targets[0].len();
        for (x, y) in inputs.iter().zip(&targets) {
            if x.len() != in_dim || y.len() != out_dim {
                return Err(Error::DimensionMismatch {
                    expected: in_dim,
                    actual: x.len(),
                });
            }
            if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid("dataset", "non-finite entry"));
            }
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Loss trace for one training run. Epoch 0 is the pre-training state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub network: Network,
    pub history: Vec<EpochRecord>,
}

impl TrainRun {
    pub fn final_train_mse(&self) -> f64 {
        self.history.last().map(|r| r.train_mse).unwrap_or(f64::NAN)
    }
}

fn hidden_apply(a: HiddenActivation, z: f64) -> f64 {
    match a {
        HiddenActivation::Tanh => z.tanh(),
        HiddenActivation::Relu => z.max(0.0),
    }
}

/// Derivative of the hidden activation. The ReLU subgradient at 0 is 0.
fn hidden_derive(a: HiddenActivation, z: f64) -> f64 {
    match a {
        HiddenActivation::Tanh => {
            let t = z.tanh();
            1.0 - t * t
        }
        HiddenActivation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn output_apply(a: OutputActivation, z: f64) -> f64 {
    match a {
        OutputActivation::Linear => z,
        OutputActivation::Tanh => z.tanh(),
    }
}

fn output_derive(a: OutputActivation, z: f64) -> f64 {
    match a {
        OutputActivation::Linear => 1.0,
        OutputActivation::Tanh => {
            let t = z.tanh();
            1.0 - t * t
        }
    }
}

impl Network {
    /// Deterministic initialization: weights and biases drawn uniformly from
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` with ChaCha8 seeded by
    /// `spec.seed`, layer by layer, weights (row-major) before biases.
    pub fn init(spec: NetworkSpec) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut weights = Vec::with_capacity(spec.n_layers());
        let mut biases = Vec::with_capacity(spec.n_layers());
        for l in 0..spec.n_layers() {
            let fan_in = spec.layer_sizes[l];
            let fan_out = spec.layer_sizes[l + 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let b: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            weights.push(w);
            biases.push(b);
        }
        Network {
            spec,
            weights,
            biases,
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn parameters_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|v| v.iter())
            .all(|p| p.is_finite())
    }

    /// Forward pass. Errors if the input dimension does not match the first
    /// layer.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim(),
                actual: x.len(),
            });
        }
        let n_layers = self.spec.n_layers();
        let mut a = x.to_vec();
        for l in 0..n_layers {
            let n_out = self.spec.layer_sizes[l + 1];
            let n_in = self.spec.layer_sizes[l];
            let mut next = vec![0.0; n_out];
            for (i, out) in next.iter_mut().enumerate() {
                let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                let z = self.biases[l][i] + row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
                *out = if l + 1 == n_layers {
                    output_apply(self.spec.output_activation, z)
                } else {
                    hidden_apply(self.spec.hidden_activation, z)
                };
            }
            a = next;
        }
        Ok(a)
    }

    /// Forward pass keeping pre-activations and activations for backprop.
    fn forward_traced(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n_layers = self.spec.n_layers();
        let mut pre = Vec::with_capacity(n_layers);
        let mut act = Vec::with_capacity(n_layers + 1);
        act.push(x.to_vec());
        for l in 0..n_layers {
            let n_out = self.spec.layer_sizes[l + 1];
            let n_in = self.spec.layer_sizes[l];
            let prev = &act[l];
            let mut z = vec![0.0; n_out];
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                *zi = self.biases[l][i] + row.iter().zip(prev).map(|(w, v)| w * v).sum::<f64>();
            }
            let a: Vec<f64> = if l + 1 == n_layers {
                z.iter().map(|&v| output_apply(self.spec.output_activation, v)).collect()
            } else {
                z.iter().map(|&v| hidden_apply(self.spec.hidden_activation, v)).collect()
            };
            pre.push(z);
            act.push(a);
        }
        (pre, act)
    }

    /// Mean over rows of the squared output-target distance.
    pub fn mse(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut sum = 0.0;
        for (x, y) in data.inputs.iter().zip(&data.targets) {
            let out = self.forward(x)?;
            if out.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: out.len(),
                    actual: y.len(),
                });
            }
            sum += out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
        }
        Ok(sum / data.len() as f64)
    }

    /// Accumulates the gradient of `(1/b) * sum ||f(x) - y||^2` over the
    /// given rows into `grad_w`/`grad_b` (which must be zeroed by the caller).
    fn accumulate_batch_gradient(
        &self,
        rows: &[usize],
        data: &Dataset,
        grad_w: &mut [Vec<f64>],
        grad_b: &mut [Vec<f64>],
    ) {
        let n_layers = self.spec.n_layers();
        let inv_b = 1.0 / rows.len() as f64;
        for &r in rows {
            let x = &data.inputs[r];
            let y = &data.targets[r];
            let (pre, act) = self.forward_traced(x);
            // output layer delta
            let mut delta: Vec<f64> = pre[n_layers - 1]
                .iter()
                .zip(act[n_layers].iter().zip(y.iter()))
                .map(|(&z, (&a, &t))| {
                    2.0 * inv_b * (a - t) * output_derive(self.spec.output_activation, z)
                })
                .collect();
            for l in (0..n_layers).rev() {
                let n_in = self.spec.layer_sizes[l];
                for (i, &d) in delta.iter().enumerate() {
                    grad_b[l][i] += d;
                    let row = &mut grad_w[l][i * n_in..(i + 1) * n_in];
                    for (gw, &a) in row.iter_mut().zip(&act[l]) {
                        *gw += d * a;
                    }
                }
                if l > 0 {
                    let n_out = self.spec.layer_sizes[l + 1];
                    let mut prev_delta = vec![0.0; n_in];
                    for (j, pd) in prev_delta.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for i in 0..n_out {
                            s += self.weights[l][i * n_in + j] * delta[i];
                        }
                        *pd = s * hidden_derive(self.spec.hidden_activation, pre[l - 1][j]);
                    }
                    delta = prev_delta;
                }
            }
        }
    }

    /// Full-batch loss gradient, flattened in parameter order
    /// (per layer: weights row-major, then biases).
    fn full_gradient(&self, data: &Dataset) -> Vec<f64> {
        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let rows: Vec<usize> = (0..data.len()).collect();
        self.accumulate_batch_gradient(&rows, data, &mut grad_w, &mut grad_b);
        let mut flat = Vec::with_capacity(self.n_parameters());
        for l in 0..self.spec.n_layers() {
            flat.extend_from_slice(&grad_w[l]);
            flat.extend_from_slice(&grad_b[l]);
        }
        flat
    }

    fn get_parameter(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in 0..self.spec.n_layers() {
            if i < self.weights[l].len() {
                return self.weights[l][i];
            }
            i -= self.weights[l].len();
            if i < self.biases[l].len() {
                return self.biases[l][i];
            }
            i -= self.biases[l].len();
        }
        panic!("parameter index {idx} out of range");
    }

    fn set_parameter(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        for l in 0..self.spec.n_layers() {
            if i < self.weights[l].len() {
                self.weights[l][i] = value;
                return;
            }
            i -= self.weights[l].len();
            if i < self.biases[l].len() {
                self.biases[l][i] = value;
                return;
            }
            i -= self.biases[l].len();
        }
        panic!("parameter index {idx} out of range");
    }
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Trains a network, recording the full-dataset MSE after every epoch
/// (epoch 0 in the history is the untouched network). A zero-epoch config
/// returns the parameters unchanged.
pub fn train(net: Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainRun> {
    train_with_validation(net, data, None, cfg)
}

/// [`train`] with an optional validation set whose MSE is recorded per epoch
/// (monitoring only; no early stopping).
pub fn train_with_validation(
    mut net: Network,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainRun> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.inputs[0].len() != net.spec.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.spec.input_dim(),
            actual: data.inputs[0].len(),
        });
    }
    if data.targets[0].len() != net.spec.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.spec.output_dim(),
            actual: data.targets[0].len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut adam = AdamState {
        m: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
        v: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
        t: 0,
    };
    let mut adam_b = AdamState {
        m: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        v: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        t: 0,
    };

    let val_mse = |n: &Network| -> Result<Option<f64>> {
        validation.map(|v| n.mse(v)).transpose()
    };

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    history.push(EpochRecord {
        epoch: 0,
        learning_rate: cfg.learning_rate,
        train_mse: net.mse(data)?,
        validation_mse: val_mse(&net)?,
    });

    let mut lr = cfg.learning_rate;
    let mut best = history[0].train_mse;
    let mut stale = 0usize;

    let mut grad_w: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = net.biases.iter().map(|b| vec![0.0; b.len()]).collect();

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            for g in grad_w.iter_mut().chain(grad_b.iter_mut()) {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            net.accumulate_batch_gradient(batch, data, &mut grad_w, &mut grad_b);
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for l in 0..net.weights.len() {
                        for (w, g) in net.weights[l].iter_mut().zip(&grad_w[l]) {
                            *w -= lr * g;
                        }
                        for (b, g) in net.biases[l].iter_mut().zip(&grad_b[l]) {
                            *b -= lr * g;
                        }
                    }
                }
                Optimizer::Adam => {
                    adam.t += 1;
                    adam_b.t += 1;
                    let bc1 = 1.0 - ADAM_BETA1.powi(adam.t as i32);
                    let bc2 = 1.0 - ADAM_BETA2.powi(adam.t as i32);
                    for l in 0..net.weights.len() {
                        adam_step(&mut net.weights[l], &grad_w[l], &mut adam.m[l], &mut adam.v[l], lr, bc1, bc2);
                        adam_step(&mut net.biases[l], &grad_b[l], &mut adam_b.m[l], &mut adam_b.v[l], lr, bc1, bc2);
                    }
                }
            }
        }

        let train_mse = net.mse(data)?;
        if !train_mse.is_finite() || !net.parameters_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: train_mse,
            });
        }
        history.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_mse,
            validation_mse: val_mse(&net)?,
        });

        if let LrSchedule::HalveOnPlateau { patience } = cfg.schedule {
            if train_mse < best {
                best = train_mse;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    lr *= 0.5;
                    stale = 0;
                }
            }
        }
    }

    Ok(TrainRun {
        network: net,
        history,
    })
}

fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bias_corr1: f64,
    bias_corr2: f64,
) {
    for i in 0..params.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = m[i] / bias_corr1;
        let v_hat = v[i] / bias_corr2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Compares the backprop gradient of the full-batch loss against central
/// finite differences with step `1e-5`. Returns the maximum over parameters
/// of `|backprop - fd| / (|fd| + 1e-8)`.
pub fn gradient_check(net: &Network, data: &Dataset) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let analytic = net.full_gradient(data);
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (idx, &g) in analytic.iter().enumerate() {
        let orig = probe.get_parameter(idx);
        probe.set_parameter(idx, orig + STEP);
        let up = probe.mse(data)?;
        probe.set_parameter(idx, orig - STEP);
        let down = probe.mse(data)?;
        probe.set_parameter(idx, orig);
        let fd = (up - down) / (2.0 * STEP);
        let dev = (g - fd).abs() / (fd.abs() + 1e-8);
        worst = worst.max(dev);
    }
    Ok(worst)
}

/// Serializes the network (spec, row-major weights, biases) as JSON.
pub fn save_json<W: std::io::Write>(net: &Network, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, net)?;
    Ok(())
}

/// Loads a network saved by [`save_json`], validating the stored shapes.
pub fn load_json<R: std::io::Read>(reader: R) -> Result<Network> {
    let net: Network = serde_json::from_reader(reader)?;
    let spec = &net.spec;
    if spec.layer_sizes.len() < 2 || spec.layer_sizes.iter().any(|&n| n == 0) {
        return Err(Error::invalid("network file", "bad layer sizes"));
    }
    for l in 0..spec.n_layers() {
        let expect_w = spec.layer_sizes[l] * spec.layer_sizes[l + 1];
        if net.weights.get(l).map(Vec::len) != Some(expect_w)
            || net.biases.get(l).map(Vec::len) != Some(spec.layer_sizes[l + 1])
        {
            return Err(Error::invalid("network file", format!("layer {l} shape mismatch")));
        }
    }
    Ok(net)
}
