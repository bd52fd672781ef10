//! Named parameter tensors.
//!
//! Layers hold [`ParamId`] handles and read their weights out of a
//! [`ParamStore`]. Gradients, optimizer moments and checkpoints all reuse the
//! same layout, so one store type serves every role.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::real::Real;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform on `(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    XavierUniform { fan_in: usize, fan_out: usize },
    Values(Vec<f64>),
}

/// Half-width of the Xavier/Glorot uniform distribution.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered list of parameter declarations built while constructing a model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamLayout {
    specs: Vec<ParamSpec>,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> ParamId {
        let spec = ParamSpec { name: name.into(), shape: shape.to_vec(), init };
        if let Init::Values(v) = &spec.init {
            assert_eq!(v.len(), spec.len(), "initial values for {}", spec.name);
        }
        self.specs.push(spec);
        ParamId(self.specs.len() - 1)
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> ParamStore<T> {
    /// Draws every tensor in declaration order from a generator seeded by `seed`.
    pub fn init(layout: &ParamLayout, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let tensors = layout
            .specs
            .iter()
            .map(|spec| {
                let data = match &spec.init {
                    Init::Zeros => alloc::vec![T::zero(); spec.len()],
                    Init::XavierUniform { fan_in, fan_out } => {
                        let a = xavier_bound(*fan_in, *fan_out);
                        (0..spec.len()).map(|_| T::of(rng.range(-a, a))).collect()
                    }
                    Init::Values(v) => v.iter().map(|&x| T::of(x)).collect(),
                };
                Tensor { name: spec.name.clone(), shape: spec.shape.clone(), data }
            })
            .collect();
        ParamStore { tensors }
    }

    pub fn from_tensors(tensors: Vec<Tensor<T>>) -> Self {
        ParamStore { tensors }
    }

    pub fn zeros_like(&self) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| Tensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data: alloc::vec![T::zero(); t.data.len()],
            })
            .collect();
        ParamStore { tensors }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let tensors = self
            .tensors
            .iter()
            .map(|t| Tensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data: t.data.iter().map(|&x| U::of(x.f64())).collect(),
            })
            .collect();
        ParamStore { tensors }
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// True when names and shapes agree with `layout`.
    pub fn matches(&self, layout: &ParamLayout) -> bool {
        self.tensors.len() == layout.specs.len()
            && self
                .tensors
                .iter()
                .zip(&layout.specs)
                .all(|(t, s)| t.name == s.name && t.shape == s.shape)
    }
}

impl<T> Index<ParamId> for ParamStore<T> {
    type Output = [T];

    fn index(&self, id: ParamId) -> &[T] {
        &self.tensors[id.0].data
    }
}

impl<T> IndexMut<ParamId> for ParamStore<T> {
    fn index_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.tensors[id.0].data
    }
}
