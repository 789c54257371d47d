use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Named parameters of one model. Names are unique.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            value,
            trainable,
        });
        Ok(id)
    }

    /// Adds a parameter initialised uniformly in `[low, high)`.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        low: f64,
        high: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(low..high)).collect();
        self.add(name, Tensor::new(shape.to_vec(), data)?, true)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape), true)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_entries(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Copies values from `other` by name; shapes must agree.
    pub fn load_values(&mut self, other: &[Parameter]) -> Result<()> {
        for p in other {
            let id = self.id(&p.name)?;
            let slot = &mut self.params[id.0];
            if slot.value.shape() != p.value.shape() {
                return Err(Error::shape("load_values", slot.value.shape(), p.value.shape()));
            }
            slot.value = p.value.clone();
            slot.trainable = p.trainable;
        }
        Ok(())
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }
}

#[derive(Clone, Debug, PartialEq)]
enum GradBuf {
    Dense(Tensor),
    /// Row gradients of a matrix, for embedding lookups.
    Rows {
        shape: Vec<usize>,
        rows: BTreeMap<usize, Vec<f64>>,
    },
}

/// Gradients keyed by parameter. Parameters that never received a gradient read as zeros.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    bufs: BTreeMap<ParamId, GradBuf>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn accumulate_dense(&mut self, id: ParamId, grad: &Tensor) {
        match self.bufs.get_mut(&id) {
            None => {
                self.bufs.insert(id, GradBuf::Dense(grad.clone()));
            }
            Some(GradBuf::Dense(t)) => t.add_assign(grad),
            Some(buf @ GradBuf::Rows { .. }) => {
                let mut dense = Self::densify(buf);
                dense.add_assign(grad);
                *buf = GradBuf::Dense(dense);
            }
        }
    }

    pub(crate) fn accumulate_row(&mut self, id: ParamId, shape: &[usize], row: usize, grad: &[f64]) {
        match self.bufs.get_mut(&id) {
            None => {
                let mut rows = BTreeMap::new();
                rows.insert(row, grad.to_vec());
                self.bufs.insert(
                    id,
                    GradBuf::Rows {
                        shape: shape.to_vec(),
                        rows,
                    },
                );
            }
            Some(GradBuf::Dense(t)) => {
                for (a, b) in t.row_mut(row).iter_mut().zip(grad) {
                    *a += b;
                }
            }
            Some(GradBuf::Rows { rows, .. }) => match rows.get_mut(&row) {
                Some(r) => {
                    for (a, b) in r.iter_mut().zip(grad) {
                        *a += b;
                    }
                }
                None => {
                    rows.insert(row, grad.to_vec());
                }
            },
        }
    }

    fn densify(buf: &GradBuf) -> Tensor {
        match buf {
            GradBuf::Dense(t) => t.clone(),
            GradBuf::Rows { shape, rows } => {
                let mut t = Tensor::zeros(shape);
                for (&r, g) in rows {
                    t.row_mut(r).copy_from_slice(g);
                }
                t
            }
        }
    }

    /// True when the parameter received any gradient contribution.
    pub fn touched(&self, id: ParamId) -> bool {
        self.bufs.contains_key(&id)
    }

    /// Dense gradient of `id`, zeros when untouched.
    pub fn get(&self, store: &ParamStore, id: ParamId) -> Tensor {
        match self.bufs.get(&id) {
            Some(buf) => Self::densify(buf),
            None => Tensor::zeros_like(store.value(id)),
        }
    }

    /// Gradient by parameter name for every parameter in `store`.
    pub fn named(&self, store: &ParamStore) -> BTreeMap<String, Tensor> {
        store
            .iter()
            .map(|(id, p)| (p.name.clone(), self.get(store, id)))
            .collect()
    }

    /// Adds `other` into `self`.
    pub fn merge(&mut self, other: &Gradients) {
        for (&id, buf) in &other.bufs {
            match buf {
                GradBuf::Dense(t) => self.accumulate_dense(id, t),
                GradBuf::Rows { shape, rows } => {
                    for (&r, g) in rows {
                        self.accumulate_row(id, shape, r, g);
                    }
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for buf in self.bufs.values_mut() {
            match buf {
                GradBuf::Dense(t) => t.scale(factor),
                GradBuf::Rows { rows, .. } => {
                    for r in rows.values_mut() {
                        for v in r {
                            *v *= factor;
                        }
                    }
                }
            }
        }
    }

    /// L2 norm over every gradient entry.
    pub fn global_norm(&self) -> f64 {
        self.bufs
            .values()
            .map(|buf| match buf {
                GradBuf::Dense(t) => t.sum_of_squares(),
                GradBuf::Rows { rows, .. } => rows.values().flatten().map(|v| v * v).sum(),
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.bufs.values().all(|buf| match buf {
            GradBuf::Dense(t) => t.all_finite(),
            GradBuf::Rows { rows, .. } => rows.values().flatten().all(|v| v.is_finite()),
        })
    }

    /// Overwrites the gradient of `id`; used for fault injection in checks.
    pub fn set(&mut self, id: ParamId, grad: Tensor) {
        self.bufs.insert(id, GradBuf::Dense(grad));
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.bufs.keys().copied()
    }
}
