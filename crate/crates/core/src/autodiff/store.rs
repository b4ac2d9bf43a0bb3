//! Named parameter storage shared across tapes.
//!
//! Values persist between forward passes; gradients accumulate here after
//! `backward` and are consumed by the optimizer. Iteration order is the
//! sorted name order of the underlying `BTreeMap`, which keeps optimizer
//! sweeps deterministic.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: BTreeMap<String, ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter. Duplicate names are a programming error.
    pub fn insert(&mut self, name: &str, shape: Vec<usize>, values: Vec<f64>) {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "param {name}: {} values for shape {:?}",
            values.len(),
            shape
        );
        let n = values.len();
        let prev = self.entries.insert(
            name.to_string(),
            ParamEntry {
                shape,
                values,
                grad: vec![0.0; n],
            },
        );
        assert!(prev.is_none(), "duplicate parameter `{name}`");
    }

    /// Standard-normal initialization.
    pub fn insert_normal(&mut self, name: &str, shape: Vec<usize>, rng: &mut impl Rng) {
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        self.insert(name, shape, values);
    }

    pub fn insert_zeros(&mut self, name: &str, shape: Vec<usize>) {
        let n: usize = shape.iter().product();
        self.insert(name, shape, vec![0.0; n]);
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.get(name)
    }

    pub fn values_mut(&mut self, name: &str) -> Result<&mut Vec<f64>> {
        self.entries
            .get_mut(name)
            .map(|e| &mut e.values)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn add_grad(&mut self, name: &str, grad: &[f64]) -> Result<()> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        debug_assert_eq!(entry.grad.len(), grad.len());
        for (g, c) in entry.grad.iter_mut().zip(grad) {
            *g += c;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for entry in self.entries.values_mut() {
            entry.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamEntry)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut ParamEntry)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.entries.values().map(|e| e.values.len()).sum()
    }

    /// Copy of all values, for best-epoch checkpointing.
    pub fn snapshot(&self) -> BTreeMap<String, Vec<f64>> {
        self.entries
            .iter()
            .map(|(k, v)| (k.clone(), v.values.clone()))
            .collect()
    }

    pub fn restore(&mut self, snapshot: &BTreeMap<String, Vec<f64>>) {
        for (name, values) in snapshot {
            if let Some(entry) = self.entries.get_mut(name) {
                entry.values.clone_from(values);
            }
        }
    }
}
