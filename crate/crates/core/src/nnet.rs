//! Dense feed-forward networks with exact analytic gradients.
//!
//! Small fully-connected nets (tanh hidden layers, identity output) with
//! hand-written reverse-mode accumulation: enough for the actor, critic and
//! Q heads used here, with no autodiff machinery. Everything is `f64`.
//!
//! Parameter vectors flatten layer by layer, weights (row-major, one row per
//! output unit) then biases; `flatten`/`set_from_flat` round-trip exactly.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// `out x in`, row-major.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// A dense network: affine layers with tanh on all hidden layers and an
/// identity output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Activations recorded by [`DenseNet::forward_cached`], consumed by
/// [`DenseNet::backward`]. Valid only for the parameters it was built with.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    sizes: Vec<usize>,
    input: Vec<f64>,
    /// Post-tanh activations of each hidden layer.
    hidden: Vec<Vec<f64>>,
}

impl DenseNet {
    /// He-style scaled-uniform initialization, `U(-sqrt(6/fan_in), +...)`,
    /// biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Layer {
                    weights,
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(DenseNet {
            sizes: sizes.to_vec(),
            layers,
        })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(DenseNet {
            sizes: sizes.to_vec(),
            layers,
        })
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "network needs >= 2 positive layer sizes, got {sizes:?}"
            )));
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn affine(layer: &Layer, input: &[f64], fan_out: usize) -> Vec<f64> {
        let fan_in = input.len();
        let mut out = layer.biases.clone();
        for (o, out_v) in out.iter_mut().enumerate().take(fan_out) {
            let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
            let mut acc = 0.0;
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            *out_v += acc;
        }
        out
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input length {} does not match first layer {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut hidden = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut current = input.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = Self::affine(layer, &current, self.sizes[li + 1]);
            if li + 1 < self.layers.len() {
                for v in &mut z {
                    *v = v.tanh();
                }
                hidden.push(z.clone());
            }
            current = z;
        }
        let cache = ForwardCache {
            sizes: self.sizes.clone(),
            input: input.to_vec(),
            hidden,
        };
        Ok((current, cache))
    }

    /// Exact gradient of `output_grad . output` with respect to every
    /// parameter, flattened in [`DenseNet::flatten`] order.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        if cache.sizes != self.sizes {
            return Err(Error::invalid(
                "stale forward cache: shape does not match network".to_string(),
            ));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::invalid(format!(
                "output gradient length {} does not match output dim {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        let mut grad = vec![0.0; self.num_params()];
        // Per-layer flat offsets.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.weights.len() + layer.biases.len();
        }

        let mut delta = output_grad.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let prev: &[f64] = if li == 0 {
                &cache.input
            } else {
                &cache.hidden[li - 1]
            };
            let fan_in = self.sizes[li];
            let base = offsets[li];
            for (o, d) in delta.iter().enumerate() {
                let row = base + o * fan_in;
                for (i, p) in prev.iter().enumerate() {
                    grad[row + i] = d * p;
                }
                grad[base + layer.weights.len() + o] = *d;
            }
            if li > 0 {
                let mut prev_delta = vec![0.0; fan_in];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
                    for (i, w) in row.iter().enumerate() {
                        prev_delta[i] += d * w;
                    }
                }
                // tanh': 1 - a^2 from the stored post-activation
                for (pd, a) in prev_delta.iter_mut().zip(&cache.hidden[li - 1]) {
                    *pd *= 1.0 - a * a;
                }
                delta = prev_delta;
            }
        }
        Ok(grad)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_from_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::invalid(format!(
                "parameter vector length {} does not match network ({} params)",
                values.len(),
                self.num_params()
            )));
        }
        let mut cursor = 0;
        for layer in &mut self.layers {
            let w = layer.weights.len();
            layer.weights.copy_from_slice(&values[cursor..cursor + w]);
            cursor += w;
            let b = layer.biases.len();
            layer.biases.copy_from_slice(&values[cursor..cursor + b]);
            cursor += b;
        }
        Ok(())
    }
}

/// Flat parameter vector plus its shape descriptor; the unit exchanged by
/// federated averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
}

impl PolicyParams {
    pub fn from_net(net: &DenseNet) -> Self {
        PolicyParams {
            sizes: net.sizes().to_vec(),
            values: net.flatten(),
        }
    }

    pub fn apply_to(&self, net: &mut DenseNet) -> Result<()> {
        if net.sizes() != self.sizes.as_slice() {
            return Err(Error::invalid(format!(
                "parameter shape {:?} does not match network {:?}",
                self.sizes,
                net.sizes()
            )));
        }
        net.set_from_flat(&self.values)
    }

    /// Uniform element-wise mean over same-shaped parameter vectors.
    pub fn mean(items: &[PolicyParams]) -> Result<PolicyParams> {
        let first = items
            .first()
            .ok_or_else(|| Error::invalid("cannot average zero parameter sets".to_string()))?;
        for item in items {
            if item.sizes != first.sizes || item.values.len() != first.values.len() {
                return Err(Error::invalid(
                    "parameter shapes differ across agents".to_string(),
                ));
            }
        }
        let n = items.len() as f64;
        let mut values = vec![0.0; first.values.len()];
        for item in items {
            for (acc, v) in values.iter_mut().zip(&item.values) {
                *acc += v;
            }
        }
        for v in &mut values {
            *v /= n;
        }
        Ok(PolicyParams {
            sizes: first.sizes.clone(),
            values,
        })
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second-moment state of one Adam-optimized parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        AdamState {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.step = 0;
    }
}

/// One Adam descent step. Non-finite gradients reject the whole step and
/// leave parameters and state untouched.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "adam shapes disagree: {} params, {} grads, {} state",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(idx) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::numeric(format!(
            "non-finite gradient at index {idx}: step rejected"
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..params.len() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grads[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// What a checkpoint stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    /// Actor and critic nets plus their optimizer states.
    PpoActorCritic,
    /// Q network plus optimizer state.
    DqnQ,
}

impl CheckpointKind {
    fn tag(self) -> u8 {
        match self {
            CheckpointKind::PpoActorCritic => 1,
            CheckpointKind::DqnQ => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(CheckpointKind::PpoActorCritic),
            2 => Ok(CheckpointKind::DqnQ),
            other => Err(Error::invalid(format!("unknown checkpoint kind {other}"))),
        }
    }
}

/// Versioned binary blob: network shapes, flat parameters, optimizer state.
/// Round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub nets: Vec<PolicyParams>,
    pub optimizers: Vec<AdamState>,
}

const CKPT_MAGIC: &[u8; 4] = b"SMOF";
const CKPT_VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64s<W: Write>(w: &mut W, vs: &[f64]) -> std::io::Result<()> {
    write_u64(w, vs.len() as u64)?;
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let len = read_u64(r)? as usize;
    if len > (1 << 32) {
        return Err(Error::invalid("checkpoint array implausibly large".to_string()));
    }
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CKPT_MAGIC)?;
        write_u32(w, CKPT_VERSION)?;
        w.write_all(&[self.kind.tag()])?;
        write_u32(w, self.nets.len() as u32)?;
        for net in &self.nets {
            write_u32(w, net.sizes.len() as u32)?;
            for s in &net.sizes {
                write_u64(w, *s as u64)?;
            }
            write_f64s(w, &net.values)?;
        }
        write_u32(w, self.optimizers.len() as u32)?;
        for opt in &self.optimizers {
            write_f64s(w, &opt.m)?;
            write_f64s(w, &opt.v)?;
            write_u64(w, opt.step)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CKPT_MAGIC {
            return Err(Error::invalid("not a checkpoint file".to_string()));
        }
        let version = read_u32(r)?;
        if version != CKPT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mut kind_tag = [0u8; 1];
        r.read_exact(&mut kind_tag)?;
        let kind = CheckpointKind::from_tag(kind_tag[0])?;
        let net_count = read_u32(r)? as usize;
        let mut nets = Vec::with_capacity(net_count);
        for _ in 0..net_count {
            let ndims = read_u32(r)? as usize;
            let mut sizes = Vec::with_capacity(ndims);
            for _ in 0..ndims {
                sizes.push(read_u64(r)? as usize);
            }
            let values = read_f64s(r)?;
            nets.push(PolicyParams { sizes, values });
        }
        let opt_count = read_u32(r)? as usize;
        let mut optimizers = Vec::with_capacity(opt_count);
        for _ in 0..opt_count {
            let m = read_f64s(r)?;
            let v = read_f64s(r)?;
            let step = read_u64(r)?;
            optimizers.push(AdamState { m, v, step });
        }
        Ok(Checkpoint {
            kind,
            nets,
            optimizers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path)
            .map_err(|e| Error::missing(format!("checkpoint {}: {e}", path.display())))?;
        Self::read_from(&mut data.as_slice())
    }
}
