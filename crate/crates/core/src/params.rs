//! Named parameter groups and their initialisation.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How a parameter group starts out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Normal(0, std) truncated to two standard deviations.
    TruncNormal(f64),
    Zeros,
    Ones,
}

#[derive(Debug, Clone)]
pub struct ParamGroup<T> {
    pub name: String,
    pub value: Tensor<T>,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    groups: Vec<ParamGroup<T>>,
}

pub(crate) fn trunc_normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { groups: Vec::new() }
    }

    pub fn add(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut ChaCha8Rng) -> ParamId {
        assert!(
            self.groups.iter().all(|g| g.name != name),
            "duplicate parameter group name {name}"
        );
        let mut value = Tensor::zeros(shape);
        match init {
            Init::Zeros => {}
            Init::Ones => value.data.iter_mut().for_each(|v| *v = T::one()),
            Init::TruncNormal(std) => {
                for v in value.data.iter_mut() {
                    *v = T::lit(trunc_normal(rng, std));
                }
            }
        }
        self.groups.push(ParamGroup { name: name.to_string(), value });
        ParamId(self.groups.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.groups.iter().map(|g| g.value.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.groups[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.groups[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.groups[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.groups.iter().position(|g| g.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.groups.len()).map(ParamId)
    }

    pub fn groups(&self) -> &[ParamGroup<T>] {
        &self.groups
    }

    pub fn groups_mut(&mut self) -> &mut [ParamGroup<T>] {
        &mut self.groups
    }

    /// Overwrites every group with fresh `Normal(0, std)` draws. Used to move
    /// a model away from its zero-initialised residual identity, e.g. before
    /// a gradient check.
    pub fn randomize(&mut self, rng: &mut ChaCha8Rng, std: f64) {
        for g in &mut self.groups {
            for v in g.value.data.iter_mut() {
                *v = T::lit(trunc_normal(rng, std));
            }
        }
    }

    /// Replaces all values with those of `other`, which must have the same
    /// group names and shapes in the same order.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        if self.groups.len() != other.groups.len() {
            return invalid(format!(
                "parameter group count mismatch: {} vs {}",
                self.groups.len(),
                other.groups.len()
            ));
        }
        for (a, b) in self.groups.iter().zip(&other.groups) {
            if a.name != b.name || a.value.shape != b.value.shape {
                return invalid(format!(
                    "parameter group {} {:?} does not match {} {:?}",
                    a.name, a.value.shape, b.name, b.value.shape
                ));
            }
        }
        for (a, b) in self.groups.iter_mut().zip(&other.groups) {
            a.value.data.copy_from_slice(&b.value.data);
        }
        Ok(())
    }

    /// Sets every group whose name ends with one of `suffixes` to zero.
    pub fn zero_matching(&mut self, suffixes: &[&str]) -> usize {
        let mut n = 0;
        for g in &mut self.groups {
            if suffixes.iter().any(|s| g.name.ends_with(s)) {
                g.value.data.iter_mut().for_each(|v| *v = T::zero());
                n += 1;
            }
        }
        n
    }

    pub fn perturb(&mut self, id: ParamId, index: usize, delta: T) {
        self.groups[id.0].value.data[index] += delta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn trunc_normal_is_bounded_and_deterministic() {
        let mut a = ParamStore::<f64>::new();
        let mut b = ParamStore::<f64>::new();
        let mut ra = ChaCha8Rng::seed_from_u64(3);
        let mut rb = ChaCha8Rng::seed_from_u64(3);
        let ia = a.add("w", &[1000], Init::TruncNormal(0.02), &mut ra);
        b.add("w", &[1000], Init::TruncNormal(0.02), &mut rb);
        assert!(a.get(ia).data.iter().all(|v| v.abs() <= 0.04));
        assert_eq!(a.get(ia).data, b.groups()[0].value.data);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn duplicate_names_panic() {
        let mut s = ParamStore::<f32>::new();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        s.add("a", &[1], Init::Zeros, &mut r);
        s.add("a", &[1], Init::Zeros, &mut r);
    }
}
