use std::collections::BTreeMap;

use rand::Rng;

use crate::{NnError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

/// Named tensors with gradient accumulators. Iteration order is the name
/// order, which keeps optimizers and checkpoints deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    entries: BTreeMap<String, Entry>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<(), NnError> {
        if self.entries.contains_key(name) {
            return Err(NnError::DuplicateParameter(name.to_string()));
        }
        let grad = Tensor::zeros(value.shape());
        self.entries.insert(name.to_string(), Entry { value, grad, trainable });
        Ok(())
    }

    /// Insert a tensor drawn uniformly from `[-bound, bound]`.
    pub fn insert_uniform(
        &mut self,
        name: &str,
        shape: &[usize],
        bound: f64,
        trainable: bool,
        rng: &mut impl Rng,
    ) -> Result<(), NnError> {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data)?, trainable)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn entry(&self, name: &str) -> Result<&Entry, NnError> {
        self.entries.get(name).ok_or_else(|| NnError::UnknownParameter(name.to_string()))
    }

    pub fn entry_mut(&mut self, name: &str) -> Result<&mut Entry, NnError> {
        self.entries.get_mut(name).ok_or_else(|| NnError::UnknownParameter(name.to_string()))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor, NnError> {
        Ok(&self.entry(name)?.value)
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor, NnError> {
        Ok(&self.entry(name)?.grad)
    }

    /// Replace a value, keeping the shape.
    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<(), NnError> {
        let entry = self.entry_mut(name)?;
        if entry.value.shape() != value.shape() {
            return Err(NnError::ShapeMismatch {
                op: "set_value",
                left: entry.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        entry.value = value;
        Ok(())
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<(), NnError> {
        self.entry_mut(name)?.trainable = trainable;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Entry)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trainable_count(&self) -> usize {
        self.entries.values().filter(|e| e.trainable).map(|e| e.value.len()).sum()
    }

    /// Add gradients into the accumulators of trainable entries. Frozen
    /// entries silently receive nothing.
    pub fn accumulate(&mut self, grads: &BTreeMap<String, Tensor>) -> Result<(), NnError> {
        for (name, g) in grads {
            let entry = self.entry_mut(name)?;
            if !entry.trainable {
                continue;
            }
            if entry.grad.shape() != g.shape() {
                return Err(NnError::ShapeMismatch {
                    op: "accumulate",
                    left: entry.grad.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
            entry.grad.add_assign(g);
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for entry in self.entries.values_mut() {
            entry.grad.fill(0.0);
        }
    }
}
