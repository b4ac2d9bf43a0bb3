//! Affine coupling layer. Sequential form:
//!
//! ```text
//! v1 = z1 .* exp(s1(z2)) + t1(z2)
//! v2 = z2 .* exp(s2(v1)) + t2(v1)
//! ```
//!
//! with `log|det J| = sum s1(z2) + sum s2(v1)`, inverted exactly by
//!
//! ```text
//! z2 = (v2 - t2(v1)) .* exp(-s2(v1))
//! z1 = (v1 - t1(z2)) .* exp(-s1(z2))
//! ```
//!
//! `s*` and `t*` are 2-layer perceptrons (tanh hidden); scale outputs are
//! clamped to [-5, 5] before exponentiation. Output layers are
//! zero-initialized so a fresh layer is the identity map.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::error::{Error, Result};

use super::broadcast_row;

pub(crate) const SCALE_CLAMP: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct CouplingLayer {
    /// Position within the flow; carried in errors.
    pub index: usize,
    pub dim: usize,
    /// Split point `k`: first block is `[0, k)`, second `[k, dim)`.
    pub split: usize,
    pub hidden: usize,
    prefix: String,
}

/// One conditioner network: `in -> hidden(tanh) -> out`.
struct Net {
    prefix: String,
    input: usize,
    hidden: usize,
    output: usize,
}

impl Net {
    fn names(&self) -> [String; 4] {
        [
            format!("{}/w1", self.prefix),
            format!("{}/b1", self.prefix),
            format!("{}/w2", self.prefix),
            format!("{}/b2", self.prefix),
        ]
    }

    fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        let [w1, b1, w2, b2] = self.names();
        let scale = 1.0 / (self.input as f64).sqrt();
        let w1_values = (0..self.input * self.hidden)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        store.insert(&w1, vec![self.input, self.hidden], w1_values);
        store.insert_zeros(&b1, vec![self.hidden]);
        // Zero output layer: the coupling starts as the identity.
        store.insert_zeros(&w2, vec![self.hidden, self.output]);
        store.insert_zeros(&b2, vec![self.output]);
    }

    fn forward(&self, tape: &Tape, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let [w1, b1, w2, b2] = self.names();
        let rows = x.shape()[0];
        let h = x
            .matmul(&tape.param(store, &w1)?)?
            .add(&broadcast_row(tape, &tape.param(store, &b1)?, rows)?)?
            .tanh();
        h.matmul(&tape.param(store, &w2)?)?
            .add(&broadcast_row(tape, &tape.param(store, &b2)?, rows)?)
    }

    fn forward_values(&self, store: &ParamStore, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        let [w1n, b1n, w2n, b2n] = self.names();
        let get = |n: &str| -> Result<&Vec<f64>> {
            store
                .get(n)
                .map(|e| &e.values)
                .ok_or_else(|| Error::UnknownParameter(n.to_string()))
        };
        let (w1, b1, w2, b2) = (get(&w1n)?, get(&b1n)?, get(&w2n)?, get(&b2n)?);
        let mut hidden = vec![0.0; rows * self.hidden];
        for r in 0..rows {
            for j in 0..self.hidden {
                let mut s = b1[j];
                for i in 0..self.input {
                    s += x[r * self.input + i] * w1[i * self.hidden + j];
                }
                hidden[r * self.hidden + j] = s.tanh();
            }
        }
        let mut out = vec![0.0; rows * self.output];
        for r in 0..rows {
            for j in 0..self.output {
                let mut s = b2[j];
                for i in 0..self.hidden {
                    s += hidden[r * self.hidden + i] * w2[i * self.output + j];
                }
                out[r * self.output + j] = s;
            }
        }
        Ok(out)
    }
}

impl CouplingLayer {
    pub fn new(index: usize, dim: usize, hidden: usize, prefix: &str) -> Self {
        assert!(dim >= 2, "coupling layer needs dim >= 2");
        CouplingLayer {
            index,
            dim,
            split: dim / 2,
            hidden,
            prefix: prefix.to_string(),
        }
    }

    fn nets(&self) -> [Net; 4] {
        let k = self.split;
        let rest = self.dim - k;
        let net = |tag: &str, input: usize, output: usize| Net {
            prefix: format!("{}/{}", self.prefix, tag),
            input,
            hidden: self.hidden,
            output,
        };
        [
            // s1, t1: condition on z2, transform the first block
            net("s1", rest, k),
            net("t1", rest, k),
            // s2, t2: condition on v1, transform the second block
            net("s2", k, rest),
            net("t2", k, rest),
        ]
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        for net in self.nets() {
            net.register(store, rng);
        }
    }

    /// Differentiable forward transform of `z [n, dim]`.
    pub fn forward(&self, tape: &Tape, store: &ParamStore, z: &Tensor) -> Result<Tensor> {
        let k = self.split;
        let z1 = z.slice(1, 0, k)?;
        let z2 = z.slice(1, k, self.dim)?;
        let [s1, t1, s2, t2] = self.nets();
        let s1v = clamp_tape(&s1.forward(tape, store, &z2)?);
        let t1v = t1.forward(tape, store, &z2)?;
        let v1 = z1.mul(&s1v.exp())?.add(&t1v)?;
        let s2v = clamp_tape(&s2.forward(tape, store, &v1)?);
        let t2v = t2.forward(tape, store, &v1)?;
        let v2 = z2.mul(&s2v.exp())?.add(&t2v)?;
        Tensor::concat(&[&v1, &v2], 1)
    }

    /// Value-only forward; returns `(v, per-row log|det J|)`.
    pub fn forward_values(
        &self,
        store: &ParamStore,
        z: &[f64],
        rows: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let k = self.split;
        let rest = self.dim - k;
        let (z1, z2) = split_cols(z, rows, self.dim, k);
        let [s1, t1, s2, t2] = self.nets();
        let mut s1v = s1.forward_values(store, &z2, rows)?;
        clamp_values(&mut s1v);
        let t1v = t1.forward_values(store, &z2, rows)?;
        let mut v1 = vec![0.0; rows * k];
        for i in 0..rows * k {
            v1[i] = z1[i] * s1v[i].exp() + t1v[i];
        }
        let mut s2v = s2.forward_values(store, &v1, rows)?;
        clamp_values(&mut s2v);
        let t2v = t2.forward_values(store, &v1, rows)?;
        let mut v2 = vec![0.0; rows * rest];
        for i in 0..rows * rest {
            v2[i] = z2[i] * s2v[i].exp() + t2v[i];
        }
        let mut log_det = vec![0.0; rows];
        for r in 0..rows {
            let a: f64 = s1v[r * k..(r + 1) * k].iter().sum();
            let b: f64 = s2v[r * rest..(r + 1) * rest].iter().sum();
            log_det[r] = a + b;
        }
        let v = join_cols(&v1, &v2, rows, k, rest);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("coupling layer {}", self.index),
            });
        }
        Ok((v, log_det))
    }

    /// Exact algebraic inverse; returns `(z, per-row forward log|det J|)`.
    pub fn inverse_values(
        &self,
        store: &ParamStore,
        v: &[f64],
        rows: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let k = self.split;
        let rest = self.dim - k;
        let (v1, v2) = split_cols(v, rows, self.dim, k);
        let [s1, t1, s2, t2] = self.nets();
        let mut s2v = s2.forward_values(store, &v1, rows)?;
        clamp_values(&mut s2v);
        let t2v = t2.forward_values(store, &v1, rows)?;
        let mut z2 = vec![0.0; rows * rest];
        for i in 0..rows * rest {
            z2[i] = (v2[i] - t2v[i]) * (-s2v[i]).exp();
        }
        let mut s1v = s1.forward_values(store, &z2, rows)?;
        clamp_values(&mut s1v);
        let t1v = t1.forward_values(store, &z2, rows)?;
        let mut z1 = vec![0.0; rows * k];
        for i in 0..rows * k {
            z1[i] = (v1[i] - t1v[i]) * (-s1v[i]).exp();
        }
        let mut log_det = vec![0.0; rows];
        for r in 0..rows {
            let a: f64 = s1v[r * k..(r + 1) * k].iter().sum();
            let b: f64 = s2v[r * rest..(r + 1) * rest].iter().sum();
            log_det[r] = a + b;
        }
        let z = join_cols(&z1, &z2, rows, k, rest);
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("coupling layer {} (inverse)", self.index),
            });
        }
        Ok((z, log_det))
    }
}

/// Hard clamp to [-SCALE_CLAMP, SCALE_CLAMP] built from relu pieces, so the
/// tape path and the value path share one definition of saturation.
fn clamp_tape(x: &Tensor) -> Tensor {
    let lo = -SCALE_CLAMP;
    let above_lo = x.add_scalar(-lo).relu();
    let above_hi = x.add_scalar(-SCALE_CLAMP).relu();
    above_lo
        .sub(&above_hi)
        .expect("same shape")
        .add_scalar(lo)
}

fn clamp_values(xs: &mut [f64]) {
    for x in xs.iter_mut() {
        *x = x.clamp(-SCALE_CLAMP, SCALE_CLAMP);
    }
}

fn split_cols(data: &[f64], rows: usize, dim: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::with_capacity(rows * k);
    let mut b = Vec::with_capacity(rows * (dim - k));
    for r in 0..rows {
        a.extend_from_slice(&data[r * dim..r * dim + k]);
        b.extend_from_slice(&data[r * dim + k..(r + 1) * dim]);
    }
    (a, b)
}

fn join_cols(a: &[f64], b: &[f64], rows: usize, k: usize, rest: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * (k + rest));
    for r in 0..rows {
        out.extend_from_slice(&a[r * k..(r + 1) * k]);
        out.extend_from_slice(&b[r * rest..(r + 1) * rest]);
    }
    out
}
