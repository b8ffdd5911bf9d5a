//! Fully connected network with sinusoidal activations.
//!
//! Architecture: `hidden_layers` sine layers of `layer_width` units followed
//! by a purely affine head (no sine, no ω0 on the output). The frequency
//! scale ω0 is applied inside the activation of every sine layer, first
//! layer included: `y = sin(ω0 · (W x + b))`.
//!
//! Parameter layout (canonical, stable): for each layer in forward order,
//! weights row-major (`fan_out` rows of `fan_in`), then biases. Index 0 of
//! the flat vector is weight (0,0) of the first layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ad::Jet2;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_layers: usize,
    pub layer_width: usize,
    pub omega0: f64,
}

impl NetConfig {
    pub fn new(input_dim: usize, output_dim: usize, hidden_layers: usize, layer_width: usize) -> Self {
        NetConfig {
            input_dim,
            output_dim,
            hidden_layers,
            layer_width,
            omega0: 3.0,
        }
    }

    /// (fan_in, fan_out) of each layer in forward order, affine head last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_dim;
        for _ in 0..self.hidden_layers {
            dims.push((fan_in, self.layer_width));
            fan_in = self.layer_width;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(i, o)| i * o + o)
            .sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.hidden_layers < 1 {
            return Err("hidden_layers must be >= 1".into());
        }
        if self.layer_width < 1 {
            return Err("layer_width must be >= 1".into());
        }
        if !(self.omega0 > 0.0) {
            return Err("omega0 must be > 0".into());
        }
        Ok(())
    }
}

/// Flat parameter vector in the canonical layout above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(cfg: &NetConfig) -> Self {
        ParamVector(vec![0.0; cfg.param_count()])
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Uniform bound for the given layer's weights under the sinusoidal
/// initialization scheme: `1/fan_in` for the first layer,
/// `sqrt(6/fan_in)/ω0` for every subsequent layer (head included).
pub fn init_weight_bound(layer: usize, fan_in: usize, omega0: f64) -> f64 {
    if layer == 0 {
        1.0 / fan_in as f64
    } else {
        (6.0 / fan_in as f64).sqrt() / omega0
    }
}

/// Draw a parameter vector: weights uniform within the layer bound, biases
/// zero. Deterministic given the seed.
pub fn init_siren(cfg: &NetConfig, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(cfg.param_count());
    for (layer, &(fan_in, fan_out)) in cfg.layer_dims().iter().enumerate() {
        let bound = init_weight_bound(layer, fan_in, cfg.omega0);
        for _ in 0..fan_in * fan_out {
            data.push(rng.gen_range(-bound..bound));
        }
        data.extend(std::iter::repeat(0.0).take(fan_out));
    }
    ParamVector(data)
}

/// Forward pass, generic over the scalar type and the number of probed input
/// directions. `D = 0` is a plain evaluation; `S = Var` records the pass on
/// the tape. The accumulation order is fixed so that all scalar
/// instantiations produce bit-identical float sequences.
pub fn forward<S: Real, const D: usize>(
    cfg: &NetConfig,
    params: &[S],
    x: &[Jet2<S, D>],
) -> Vec<Jet2<S, D>> {
    assert_eq!(x.len(), cfg.input_dim, "forward: input length mismatch");
    assert_eq!(
        params.len(),
        cfg.param_count(),
        "forward: parameter length mismatch"
    );
    let omega = S::from_f64(cfg.omega0);
    let dims = cfg.layer_dims();
    let n_layers = dims.len();
    let mut y: Vec<Jet2<S, D>> = x.to_vec();
    let mut off = 0usize;
    for (layer, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = &params[off..off + fan_in * fan_out];
        let b = &params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        off += fan_in * fan_out + fan_out;
        let mut z = Vec::with_capacity(fan_out);
        for j in 0..fan_out {
            let mut acc = Jet2::constant(b[j]);
            for k in 0..fan_in {
                acc = acc + y[k].scale(w[j * fan_in + k]);
            }
            if layer + 1 < n_layers {
                acc = acc.scale(omega).sin();
            }
            z.push(acc);
        }
        y = z;
    }
    y
}

/// Plain value evaluation.
pub fn forward_values(cfg: &NetConfig, params: &[f64], x: &[f64]) -> Vec<f64> {
    let jets: Vec<Jet2<f64, 0>> = x.iter().map(|&v| Jet2::constant(v)).collect();
    forward(cfg, params, &jets).into_iter().map(|j| j.v).collect()
}
