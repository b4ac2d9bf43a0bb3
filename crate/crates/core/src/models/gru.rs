//! Single-layer GRU. Standard cell:
//!
//! ```text
//! r = sigmoid(x W_r + h U_r + b_r)
//! u = sigmoid(x W_u + h U_u + b_u)
//! c = tanh(x W_c + (r .* h) U_c + b_c)
//! h' = (1 - u) .* c + u .* h
//! ```
//!
//! Weights are standard normal with `1/sqrt(fan_in)` forward scaling, the
//! same convention as the feedforward blocks.

use rand::Rng;

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Gru {
    pub input_dim: usize,
    pub hidden: usize,
    pub scaled: bool,
    prefix: String,
}

impl Gru {
    pub fn new(input_dim: usize, hidden: usize, prefix: &str) -> Self {
        assert!(input_dim >= 1 && hidden >= 1);
        Gru {
            input_dim,
            hidden,
            scaled: true,
            prefix: prefix.to_string(),
        }
    }

    fn names(&self, gate: &str) -> [String; 3] {
        [
            format!("{}/w_{gate}", self.prefix),
            format!("{}/u_{gate}", self.prefix),
            format!("{}/b_{gate}", self.prefix),
        ]
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        for gate in ["r", "u", "c"] {
            let [w, u, b] = self.names(gate);
            store.insert_normal(&w, vec![self.input_dim, self.hidden], rng);
            store.insert_normal(&u, vec![self.hidden, self.hidden], rng);
            store.insert_normal(&b, vec![self.hidden], rng);
        }
    }

    /// Run the recursion over `steps` (each `[n, input_dim]`), starting from
    /// a zero hidden state. Returns the hidden state after every step.
    pub fn forward(
        &self,
        tape: &Tape,
        store: &ParamStore,
        steps: &[Tensor],
        trainable: bool,
    ) -> Result<Vec<Tensor>> {
        self.forward_injected(tape, store, steps, None, trainable)
    }

    /// Same recursion, but after each cell the hidden output is replaced by
    /// `h + inject[i]` before flowing to the next step — the additive
    /// composition where the composed hidden out is the state the next cell
    /// sees. `inject[i]` must be `[n, hidden]`.
    pub fn forward_injected(
        &self,
        tape: &Tape,
        store: &ParamStore,
        steps: &[Tensor],
        inject: Option<&[Tensor]>,
        trainable: bool,
    ) -> Result<Vec<Tensor>> {
        let n = match steps.first() {
            Some(s) => s.shape()[0],
            None => {
                return Err(Error::InvalidData("gru got an empty sequence".into()));
            }
        };
        for s in steps {
            let shape = s.shape();
            if shape.len() != 2 || shape[1] != self.input_dim || shape[0] != n {
                return Err(Error::DimensionMismatch {
                    context: format!("gru `{}` step input", self.prefix),
                    expected: self.input_dim,
                    got: *shape.last().unwrap_or(&0),
                });
            }
        }
        let param = |name: &str| -> Result<Tensor> {
            if trainable {
                tape.param(store, name)
            } else {
                tape.param_frozen(store, name)
            }
        };
        let x_scale = if self.scaled { 1.0 / (self.input_dim as f64).sqrt() } else { 1.0 };
        let h_scale = if self.scaled { 1.0 / (self.hidden as f64).sqrt() } else { 1.0 };

        let gate = |x: &Tensor, h: &Tensor, names: &[String; 3]| -> Result<Tensor> {
            let w = param(&names[0])?;
            let u = param(&names[1])?;
            let b = param(&names[2])?;
            x.matmul(&w)?
                .scale(x_scale)
                .add(&h.matmul(&u)?.scale(h_scale))?
                .add(&b.broadcast_rows(n)?)
        };

        if let Some(inject) = inject {
            if inject.len() != steps.len() {
                return Err(Error::DimensionMismatch {
                    context: format!("gru `{}` injection count", self.prefix),
                    expected: steps.len(),
                    got: inject.len(),
                });
            }
        }
        let (r_names, u_names, c_names) = (self.names("r"), self.names("u"), self.names("c"));
        let mut h = tape.constant(&[n, self.hidden], vec![0.0; n * self.hidden]);
        let mut hiddens = Vec::with_capacity(steps.len());
        for (i, x) in steps.iter().enumerate() {
            let reset = gate(x, &h, &r_names)?.sigmoid();
            let update = gate(x, &h, &u_names)?.sigmoid();
            let candidate = gate(x, &reset.mul(&h)?, &c_names)?.tanh();
            let keep = update.mul(&h)?;
            let fresh = update.neg().add_scalar(1.0).mul(&candidate)?;
            h = keep.add(&fresh)?;
            if let Some(inject) = inject {
                h = h.add(&inject[i])?;
            }
            hiddens.push(h.clone());
        }
        Ok(hiddens)
    }
}
