use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::rng;
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// How a parameter tensor is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum InitScheme {
    /// Uniform in `±1/sqrt(fan_in)`.
    KaimingUniform { fan_in: usize },
    /// Uniform in `±bound`.
    Uniform { bound: f64 },
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitScheme,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, init: InitScheme) -> Self {
        ParamSpec {
            name: name.into(),
            shape,
            init,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry<T> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub init: InitScheme,
}

/// Ordered collection of uniquely named parameter tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams<T> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new() -> Self {
        ModelParams {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Draws every tensor from one stream seeded by `seed`, in declaration order.
    pub fn initialize(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut r = rng::seeded(seed);
        let mut out = Self::new();
        for spec in specs {
            let n = spec.numel();
            let data: Vec<T> = match spec.init {
                InitScheme::KaimingUniform { fan_in } => {
                    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                    (0..n).map(|_| T::of(rng::uniform(&mut r, -bound, bound))).collect()
                }
                InitScheme::Uniform { bound } => {
                    (0..n).map(|_| T::of(rng::uniform(&mut r, -bound, bound))).collect()
                }
                InitScheme::Zeros => vec![T::zero(); n],
                InitScheme::Ones => vec![T::one(); n],
            };
            out.push(spec.name.clone(), Tensor::from_vec(spec.shape.clone(), data), spec.init)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>, init: InitScheme) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name '{name}'")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(ParamEntry { name, tensor, init });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|&i| &self.entries[i].tensor)
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    /// Checks names and shapes against `specs`.
    pub fn check_against(&self, specs: &[ParamSpec]) -> Result<()> {
        if specs.len() != self.entries.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                self.entries.len()
            )));
        }
        for s in specs {
            match self.get(&s.name) {
                Some(t) if t.shape() == s.shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::Config(format!(
                        "parameter '{}' has shape {:?}, expected {:?}",
                        s.name,
                        t.shape(),
                        s.shape
                    )))
                }
                None => return Err(Error::Config(format!("missing parameter '{}'", s.name))),
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    tensor: e.tensor.cast(),
                    init: e.init,
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Records every tensor on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> BoundParams {
        self.bind_with(tape, true)
    }

    /// Records every tensor as a constant (no gradients), for inference.
    pub fn bind_constant(&self, tape: &mut Tape<T>) -> BoundParams {
        self.bind_with(tape, false)
    }

    fn bind_with(&self, tape: &mut Tape<T>, trainable: bool) -> BoundParams {
        let vars = self
            .entries
            .iter()
            .map(|e| tape.leaf(e.tensor.clone(), trainable))
            .collect();
        BoundParams {
            vars,
            index: self.index.clone(),
        }
    }
}

/// Tape handles for a [`ModelParams`], aligned with its entry order.
#[derive(Debug, Clone)]
pub struct BoundParams {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl BoundParams {
    /// Binds pre-recorded vars under the given names (same order as `vars`).
    pub fn from_vars(names: &[String], vars: Vec<Var>) -> Self {
        BoundParams {
            index: names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect(),
            vars,
        }
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::Config(format!("model has no parameter '{name}'")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}
