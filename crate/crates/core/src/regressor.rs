//! Feed-forward regressor mapping the 42 feature columns to a relatedness
//! score in `(0, 1)`.
//!
//! Hidden layers use exact GELU (`x·Φ(x)`), the output a sigmoid. Training is
//! mini-batch gradient descent on mean squared error with decoupled weight
//! decay on the weight matrices (biases are not decayed).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval;

/// `[42 → 25 → 50 → 25 → 1]`
pub const LAYER_SIZES: [usize; 5] = [42, 25, 50, 25, 1];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressorError {
    #[error("input has {found} features, model expects {expected}")]
    InputSize { expected: usize, found: usize },
    #[error("non-finite input feature at index {0}")]
    NonFiniteInput(usize),
    #[error("training data is empty")]
    EmptyData,
    #[error("gold score {0} outside [0, 1]")]
    InvalidTarget(f64),
    #[error("loss became non-finite at epoch {0}")]
    DivergedLoss(usize),
    #[error("invalid layer sizes {0:?}")]
    InvalidArchitecture(Vec<usize>),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} parameters, got {found}")]
    ParamCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[o];
            out.push(z);
        }
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / SQRT_2));
    cdf + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Sigmoid kept strictly inside `(0, 1)`.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpRegressor {
    layers: Vec<Dense>,
    dropout_rate: f64,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 0.01,
            epochs: 100,
            batch_size: 16,
            dropout: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), RegressorError> {
        let bad = |m: &str| Err(RegressorError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
    /// `None` without validation data or when the correlation is undefined.
    pub validation_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Trace {
    /// `activations[0]` is the input; `activations[l + 1]` the output of layer `l`
    /// (after activation and dropout).
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    /// Inverted-dropout multipliers per hidden layer (all ones in eval mode).
    masks: Vec<Vec<f64>>,
    output: f64,
}

impl MlpRegressor {
    /// The `[42, 25, 50, 25, 1]` network with seeded fan-in uniform weights.
    pub fn init(seed: u64) -> Self {
        Self::with_layers(&LAYER_SIZES, seed).expect("canonical architecture is valid")
    }

    /// Weights ~ U(-√(6/fan_in), √(6/fan_in)), biases zero.
    pub fn with_layers(sizes: &[usize], seed: u64) -> Result<Self, RegressorError> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
            return Err(RegressorError::InvalidArchitecture(sizes.to_vec()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = (6.0 / inputs as f64).sqrt();
                Dense {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs)
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                    biases: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(Self {
            layers,
            dropout_rate: TrainConfig::default().dropout,
            seed,
        })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn set_dropout_rate(&mut self, rate: f64) {
        self.dropout_rate = rate;
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), RegressorError> {
        if params.len() != self.param_count() {
            return Err(RegressorError::ParamCount {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn from_params(sizes: &[usize], params: &[f64], seed: u64) -> Result<Self, RegressorError> {
        let mut m = Self::with_layers(sizes, seed)?;
        m.set_params(params)?;
        Ok(m)
    }

    /// Euclidean norm of all weight matrices (biases excluded).
    pub fn weight_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), RegressorError> {
        let expected = self.layers[0].inputs;
        if x.len() != expected {
            return Err(RegressorError::InputSize {
                expected,
                found: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(RegressorError::NonFiniteInput(i));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64], mut dropout: Option<&mut ChaCha8Rng>) -> Trace {
        let n_layers = self.layers.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut masks = Vec::with_capacity(n_layers - 1);
        activations.push(x.to_vec());
        let keep = 1.0 - self.dropout_rate;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&activations[i], &mut z);
            if i + 1 == n_layers {
                activations.push(vec![sigmoid(z[0])]);
            } else {
                let mask: Vec<f64> = match dropout.as_deref_mut() {
                    Some(rng) if self.dropout_rate > 0.0 => (0..z.len())
                        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect(),
                    _ => vec![1.0; z.len()],
                };
                let a = z.iter().zip(&mask).map(|(v, m)| gelu(*v) * m).collect();
                activations.push(a);
                masks.push(mask);
            }
            pre_activations.push(z);
        }
        let output = activations[n_layers][0];
        Trace {
            activations,
            pre_activations,
            masks,
            output,
        }
    }

    /// Eval-mode prediction: deterministic, no dropout.
    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressorError> {
        self.forward(x, None)
    }

    /// Passing a generator switches on training-mode dropout.
    pub fn forward(&self, x: &[f64], dropout: Option<&mut ChaCha8Rng>) -> Result<f64, RegressorError> {
        self.check_input(x)?;
        Ok(self.trace(x, dropout).output)
    }

    /// Adds `scale · ∂(ŷ - y)²/∂θ` to `grad` (flat, [`params`](Self::params)
    /// order) and returns the squared error.
    fn accumulate_gradient(&self, trace: &Trace, y: f64, scale: f64, grad: &mut [f64]) -> f64 {
        let n_layers = self.layers.len();
        let err = trace.output - y;
        // ∂loss/∂z at the output layer
        let mut delta = vec![scale * 2.0 * err * trace.output * (1.0 - trace.output)];

        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in &self.layers {
            offsets.push(offset);
            offset += l.weights.len() + l.biases.len();
        }

        for li in (0..n_layers).rev() {
            let layer = &self.layers[li];
            let input = &trace.activations[li];
            let base = offsets[li];
            for (o, d) in delta.iter().enumerate() {
                let row = &mut grad[base + o * layer.inputs..base + (o + 1) * layer.inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[base + layer.weights.len() + o] += d;
            }
            if li == 0 {
                break;
            }
            // back through the previous layer's activation and dropout
            let prev_z = &trace.pre_activations[li - 1];
            let mask = &trace.masks[li - 1];
            let mut next = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            for ((n, z), m) in next.iter_mut().zip(prev_z).zip(mask) {
                *n *= m * gelu_grad(*z);
            }
            delta = next;
        }
        err * err
    }

    /// Squared error of one example and its gradient, eval mode.
    pub fn loss_and_gradient(&self, x: &[f64], y: f64) -> Result<(f64, Vec<f64>), RegressorError> {
        self.check_input(x)?;
        let trace = self.trace(x, None);
        let mut grad = vec![0.0; self.param_count()];
        let loss = self.accumulate_gradient(&trace, y, 1.0, &mut grad);
        Ok((loss, grad))
    }

    pub fn mse(&self, data: &[(Vec<f64>, f64)]) -> Result<f64, RegressorError> {
        if data.is_empty() {
            return Err(RegressorError::EmptyData);
        }
        let mut total = 0.0;
        for (x, y) in data {
            let p = self.predict(x)?;
            total += (p - y) * (p - y);
        }
        Ok(total / data.len() as f64)
    }

    /// Mini-batch training. Returns the trained copy and one report entry
    /// per epoch; `self` is left untouched.
    pub fn train(
        &self,
        data: &[(Vec<f64>, f64)],
        validation: Option<&[(Vec<f64>, f64)]>,
        cfg: &TrainConfig,
    ) -> Result<(MlpRegressor, TrainReport), RegressorError> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(RegressorError::EmptyData);
        }
        for (x, y) in data.iter().chain(validation.unwrap_or(&[])) {
            self.check_input(x)?;
            if !(0.0..=1.0).contains(y) {
                return Err(RegressorError::InvalidTarget(*y));
            }
        }

        let mut model = self.clone();
        model.dropout_rate = cfg.dropout;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; model.param_count()];
        let mut params = model.params();
        let decay_mask: Vec<bool> = model
            .layers
            .iter()
            .flat_map(|l| {
                std::iter::repeat(true)
                    .take(l.weights.len())
                    .chain(std::iter::repeat(false).take(l.biases.len()))
            })
            .collect();
        let mut report = TrainReport::default();

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let (x, y) = &data[i];
                    let trace = model.trace(x, Some(&mut rng));
                    model.accumulate_gradient(&trace, *y, scale, &mut grad);
                }
                let shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
                for ((p, g), decay) in params.iter_mut().zip(&grad).zip(&decay_mask) {
                    if *decay {
                        *p *= shrink;
                    }
                    *p -= cfg.learning_rate * g;
                }
                model.set_params(&params)?;
            }

            let train_mse = model.mse(data)?;
            if !train_mse.is_finite() || params.iter().any(|p| !p.is_finite()) {
                return Err(RegressorError::DivergedLoss(epoch + 1));
            }
            let (validation_mse, validation_spearman) = match validation {
                Some(val) if !val.is_empty() => {
                    let preds = val
                        .iter()
                        .map(|(x, _)| model.predict(x))
                        .collect::<Result<Vec<_>, _>>()?;
                    let golds: Vec<f64> = val.iter().map(|(_, y)| *y).collect();
                    let mse = preds
                        .iter()
                        .zip(&golds)
                        .map(|(p, g)| (p - g) * (p - g))
                        .sum::<f64>()
                        / val.len() as f64;
                    (Some(mse), eval::spearman(&preds, &golds).ok())
                }
                _ => (None, None),
            };
            report.epochs.push(EpochStats {
                epoch: epoch + 1,
                train_mse,
                validation_mse,
                validation_spearman,
            });
        }
        Ok((model, report))
    }
}

/// Largest per-parameter disagreement between the analytic gradient of
/// `(ŷ - y)²` and central finite differences with step `h`. Relative error
/// is used unless both gradients are below `1e-8`, where the absolute error
/// is reported instead.
pub fn grad_check(model: &MlpRegressor, x: &[f64], y: f64) -> Result<f64, RegressorError> {
    grad_check_with_step(model, x, y, 1e-5)
}

pub fn grad_check_with_step(
    model: &MlpRegressor,
    x: &[f64],
    y: f64,
    h: f64,
) -> Result<f64, RegressorError> {
    let (_, analytic) = model.loss_and_gradient(x, y)?;
    let numeric = central_differences(model, x, y, h)?;
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(&numeric) {
        let scale = a.abs().max(n.abs());
        let diff = (a - n).abs();
        let err = if scale < 1e-8 { diff } else { diff / scale };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// `(L(θ + h·eᵢ) - L(θ - h·eᵢ)) / 2h` for every parameter `i`.
///
/// Subtracting two separately rounded forward passes loses about
/// `ε·|ŷ| / h ≈ 1e-11` to cancellation, which swamps gradients near `1e-8`.
/// Instead the forward pass runs once at `θ - h·eᵢ` and the difference to the
/// `θ + h·eᵢ` pass is carried through the network on its own: linear layers
/// map differences exactly, GELU differences come from integrating the normal
/// density over the (tiny) interval, and the sigmoid difference uses `expm1`.
pub fn central_differences(
    model: &MlpRegressor,
    x: &[f64],
    y: f64,
    h: f64,
) -> Result<Vec<f64>, RegressorError> {
    model.check_input(x)?;
    let base = model.params();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut params = base.clone();
    let mut layer = 0;
    let mut layer_start = 0;
    for i in 0..base.len() {
        while i >= layer_start + model.layers[layer].weights.len() + model.layers[layer].biases.len() {
            layer_start += model.layers[layer].weights.len() + model.layers[layer].biases.len();
            layer += 1;
        }
        let (plus, minus) = (base[i] + h, base[i] - h);
        params[i] = minus;
        probe.set_params(&params)?;
        params[i] = base[i];
        let trace = probe.trace(x, None);

        let l = &model.layers[layer];
        let local = i - layer_start;
        let step = plus - minus;
        let mut dz = vec![0.0; l.outputs];
        if local < l.weights.len() {
            let (o, j) = (local / l.inputs, local % l.inputs);
            dz[o] = step * trace.activations[layer][j];
        } else {
            dz[local - l.weights.len()] = step;
        }
        for next in layer + 1..model.layers.len() {
            let z = &trace.pre_activations[next - 1];
            let da: Vec<f64> = z.iter().zip(&dz).map(|(&z, &d)| gelu_difference(z, d)).collect();
            let nl = &model.layers[next];
            dz = (0..nl.outputs)
                .map(|o| {
                    nl.weights[o * nl.inputs..(o + 1) * nl.inputs]
                        .iter()
                        .zip(&da)
                        .map(|(w, d)| w * d)
                        .sum()
                })
                .collect();
        }
        let z_out = trace.pre_activations[model.layers.len() - 1][0];
        let p_minus = trace.output;
        let dp = sigmoid_difference(z_out, dz[0]);
        // (p⁺ - y)² - (p⁻ - y)² = dp · (2(p⁻ - y) + dp)
        out.push(dp * (2.0 * (p_minus - y) + dp) / (2.0 * h));
    }
    Ok(out)
}

/// `Φ(z + d) - Φ(z)` for the standard normal CDF.
fn normal_cdf_difference(z: f64, d: f64) -> f64 {
    if d.abs() > 1e-3 {
        return 0.5 * (libm::erf((z + d) / SQRT_2) - libm::erf(z / SQRT_2));
    }
    // 5-point Gauss-Legendre on [z, z + d]
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664_0,
        0.906_179_845_938_664_0,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mid = z + 0.5 * d;
    let sum: f64 = NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(t, w)| {
            let u = mid + 0.5 * d * t;
            w * (-0.5 * u * u).exp()
        })
        .sum();
    0.5 * d * sum * INV_SQRT_2PI
}

/// `gelu(z + d) - gelu(z) = d·Φ(z + d) + z·(Φ(z + d) - Φ(z))`.
fn gelu_difference(z: f64, d: f64) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let cdf = 0.5 * (1.0 + libm::erf((z + d) / SQRT_2));
    d * cdf + z * normal_cdf_difference(z, d)
}

/// `σ(z + d) - σ(z)` without cancellation.
fn sigmoid_difference(z: f64, d: f64) -> f64 {
    if z >= 0.0 {
        let (ea, eb) = ((-(z + d)).exp(), (-z).exp());
        -eb * (-d).exp_m1() / ((1.0 + ea) * (1.0 + eb))
    } else {
        let (ea, eb) = ((z + d).exp(), z.exp());
        eb * d.exp_m1() / ((1.0 + ea) * (1.0 + eb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    #[test]
    fn init_is_deterministic_and_sized() {
        let a = MlpRegressor::init(3);
        assert_eq!(a, MlpRegressor::init(3));
        assert_ne!(a.params(), MlpRegressor::init(4).params());
        assert_eq!(a.param_count(), 3676);
        assert_eq!(a.layer_sizes(), LAYER_SIZES);
        assert!(a.layers.iter().all(|l| l.biases.iter().all(|b| *b == 0.0)));
    }

    #[test]
    fn zero_weights_give_one_half() {
        let mut m = MlpRegressor::init(1);
        let zeros = vec![0.0; m.param_count()];
        m.set_params(&zeros).unwrap();
        assert_eq!(m.predict(&random_input(9, 42)).unwrap(), 0.5);
    }

    #[test]
    fn eval_mode_deterministic_train_mode_drops() {
        let m = MlpRegressor::init(5);
        let x = random_input(1, 42);
        assert_eq!(m.predict(&x).unwrap(), m.predict(&x).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let outs: Vec<f64> = (0..5).map(|_| m.forward(&x, Some(&mut rng)).unwrap()).collect();
        assert!(outs.iter().any(|o| *o != outs[0]));
    }

    #[test]
    fn toy_network_matches_manual_arithmetic() {
        // x=1 → z1 = 1, gelu(1) = Φ(1) = 0.8413447460685429
        // z2 = 2·Φ(1) - 1, out = 1/(1 + e^{-z2})
        let m = MlpRegressor::from_params(&[1, 1, 1], &[1.0, 0.0, 2.0, -1.0], 0).unwrap();
        let phi1 = 0.841_344_746_068_542_9;
        let z2: f64 = 2.0 * phi1 - 1.0;
        let expected = 1.0 / (1.0 + (-z2).exp());
        assert!((m.predict(&[1.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn gelu_values_and_derivative() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gelu(-1.0) + 0.158_655_253_931_457_05).abs() < 1e-15);
        for x in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((gelu_grad(x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn output_strictly_inside_unit_interval() {
        assert!(sigmoid(1e3) < 1.0);
        assert!(sigmoid(-1e3) > 0.0);
        let m = MlpRegressor::init(0);
        let big = vec![1e6; 42];
        let p = m.predict(&big).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn input_validation() {
        let m = MlpRegressor::init(0);
        assert_eq!(
            m.predict(&[0.0; 3]),
            Err(RegressorError::InputSize { expected: 42, found: 3 })
        );
        let mut x = vec![0.0; 42];
        x[7] = f64::NAN;
        assert_eq!(m.predict(&x), Err(RegressorError::NonFiniteInput(7)));
        assert!(MlpRegressor::with_layers(&[3, 2], 0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = MlpRegressor::with_layers(&[5, 4, 3, 1], 11).unwrap();
        let x = random_input(2, 5);
        assert!(grad_check(&m, &x, 0.3).unwrap() < 1e-4);
    }

    #[test]
    fn coarse_step_shows_larger_error() {
        let m = MlpRegressor::with_layers(&[5, 4, 3, 1], 11).unwrap();
        let x = random_input(2, 5);
        let fine = grad_check_with_step(&m, &x, 0.3, 1e-5).unwrap();
        let coarse = grad_check_with_step(&m, &x, 0.3, 1e-2).unwrap();
        assert!(coarse > fine);
    }

    #[test]
    fn carried_differences_match_plain_subtraction() {
        // where gradients are large, subtracting two forward passes is
        // accurate enough to cross-check the carried differences
        let m = MlpRegressor::with_layers(&[4, 3, 2, 1], 5).unwrap();
        let x = random_input(9, 4);
        let y = 0.8;
        let h = 1e-5;
        let carried = central_differences(&m, &x, y, h).unwrap();
        let base = m.params();
        let mut probe = m.clone();
        for (i, c) in carried.iter().enumerate() {
            let mut loss = |v: f64| {
                let mut p = base.clone();
                p[i] = v;
                probe.set_params(&p).unwrap();
                let out = probe.predict(&x).unwrap();
                (out - y) * (out - y)
            };
            let plain = (loss(base[i] + h) - loss(base[i] - h)) / (2.0 * h);
            assert!((plain - c).abs() <= 1e-9 + 1e-6 * c.abs(), "param {i}: {plain} vs {c}");
        }
    }

    #[test]
    fn difference_helpers() {
        for &(z, d) in &[(0.3, 1e-6), (-2.0, 3e-4), (1.5, 0.2), (-0.75, -1e-5)] {
            let g = gelu(z + d) - gelu(z);
            assert!((gelu_difference(z, d) - g).abs() < 1e-12, "{z} {d}");
            let s = sigmoid(z + d) - sigmoid(z);
            assert!((sigmoid_difference(z, d) - s).abs() < 1e-15);
            assert!((sigmoid_difference(-z, d) - (sigmoid(-z + d) - sigmoid(-z))).abs() < 1e-15);
        }
        assert_eq!(gelu_difference(1.0, 0.0), 0.0);
    }

    #[test]
    fn zero_gradient_point_uses_absolute_error() {
        let mut m = MlpRegressor::with_layers(&[2, 2, 1], 0).unwrap();
        m.set_params(&vec![0.0; m.param_count()]).unwrap();
        // output is exactly 0.5 = y: every gradient vanishes
        assert!(grad_check(&m, &[0.3, -0.2], 0.5).unwrap() < 1e-12);
    }

    #[test]
    fn zero_epochs_returns_model_unchanged() {
        let m = MlpRegressor::init(2);
        let data = vec![(random_input(1, 42), 0.4)];
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (trained, report) = m.train(&data, None, &cfg).unwrap();
        assert_eq!(trained.params(), m.params());
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn training_errors() {
        let m = MlpRegressor::init(2);
        let cfg = TrainConfig::default();
        assert_eq!(m.train(&[], None, &cfg).unwrap_err(), RegressorError::EmptyData);
        let data = vec![(random_input(1, 42), 1.5)];
        assert_eq!(
            m.train(&data, None, &cfg).unwrap_err(),
            RegressorError::InvalidTarget(1.5)
        );
        let data = vec![(random_input(1, 42), 0.5)];
        let cfg = TrainConfig {
            learning_rate: 1e300,
            weight_decay: 0.0,
            dropout: 0.0,
            epochs: 5,
            ..TrainConfig::default()
        };
        assert!(matches!(
            m.train(&data, None, &cfg),
            Err(RegressorError::DivergedLoss(_))
        ));
    }
}
