//! Multi-layer perceptron with standard-normal initialization and
//! `1/sqrt(fan_in)` forward scaling, the convention under which the
//! infinite-width layer covariances take their closed forms. The same
//! block doubles as a network head continuing a larger model, in which
//! case the activation is applied to the block input first.

use rand::Rng;

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Smooth alternative.
    Tanh,
}

impl Activation {
    pub fn apply(&self, x: &Tensor) -> Tensor {
        match self {
            Activation::Relu => x.relu(),
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn apply_value(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    /// Layer widths `[d0, d1, ..., dL]`.
    pub widths: Vec<usize>,
    pub activation: Activation,
    /// `1/sqrt(fan_in)` forward scaling (on by default; required whenever
    /// the infinite-width checks consume the network).
    pub scaled: bool,
    /// Apply the activation to the block input before the first layer;
    /// used when this block continues a network after a composed layer.
    pub activate_input: bool,
    /// Override for the first layer's forward scale. The layer after a
    /// multiplicative composition divides by the nominal base width, not by
    /// the composed fan-in, because the feature factor carries unit norm.
    pub first_layer_scale: Option<f64>,
    prefix: String,
}

impl Mlp {
    pub fn new(widths: Vec<usize>, activation: Activation, prefix: &str) -> Self {
        assert!(widths.len() >= 2, "mlp needs at least input and output widths");
        assert!(widths.iter().all(|w| *w >= 1));
        Mlp {
            widths,
            activation,
            scaled: true,
            activate_input: false,
            first_layer_scale: None,
            prefix: prefix.to_string(),
        }
    }

    pub fn head(mut self) -> Self {
        self.activate_input = true;
        self
    }

    pub fn with_first_layer_scale(mut self, scale: f64) -> Self {
        self.first_layer_scale = Some(scale);
        self
    }

    pub fn with_unscaled_forward(mut self) -> Self {
        self.scaled = false;
        self
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn weight_name(&self, layer: usize) -> String {
        format!("{}/w{}", self.prefix, layer + 1)
    }

    fn bias_name(&self, layer: usize) -> String {
        format!("{}/b{}", self.prefix, layer + 1)
    }

    /// All weights and biases i.i.d. standard normal.
    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        for l in 0..self.layers() {
            store.insert_normal(&self.weight_name(l), vec![self.widths[l], self.widths[l + 1]], rng);
            store.insert_normal(&self.bias_name(l), vec![self.widths[l + 1]], rng);
        }
    }

    fn layer_scale(&self, layer: usize) -> f64 {
        if !self.scaled {
            return 1.0;
        }
        if layer == 0 {
            if let Some(s) = self.first_layer_scale {
                return s;
            }
        }
        1.0 / (self.widths[layer] as f64).sqrt()
    }

    /// Forward over a batch `x [n, d0]`, returning every layer output
    /// `f^(1)..f^(L)` (pre-activation; the activation is applied on the way
    /// into the next layer).
    pub fn forward(
        &self,
        tape: &Tape,
        store: &ParamStore,
        x: &Tensor,
        trainable: bool,
    ) -> Result<Vec<Tensor>> {
        let shape = x.shape();
        if shape.len() != 2 || shape[1] != self.widths[0] {
            return Err(Error::DimensionMismatch {
                context: format!("mlp `{}` input", self.prefix),
                expected: self.widths[0],
                got: *shape.last().unwrap_or(&0),
            });
        }
        let rows = shape[0];
        let param = |name: &str| -> Result<Tensor> {
            if trainable {
                tape.param(store, name)
            } else {
                tape.param_frozen(store, name)
            }
        };
        let mut layers = Vec::with_capacity(self.layers());
        let mut current = x.clone();
        for l in 0..self.layers() {
            let input = if l > 0 || self.activate_input {
                self.activation.apply(&current)
            } else {
                current.clone()
            };
            let w = param(&self.weight_name(l))?;
            let b = param(&self.bias_name(l))?;
            let pre = input
                .matmul(&w)?
                .scale(self.layer_scale(l))
                .add(&b.broadcast_rows(rows)?)?;
            layers.push(pre.clone());
            current = pre;
        }
        Ok(layers)
    }

    /// Final layer output only.
    pub fn output(
        &self,
        tape: &Tape,
        store: &ParamStore,
        x: &Tensor,
        trainable: bool,
    ) -> Result<Tensor> {
        Ok(self.forward(tape, store, x, trainable)?.pop().expect("at least one layer"))
    }
}
