use crate::error::{invalid, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{FeatureMap, Tensor};

use super::attention::AttnMode;
use super::{attention, conv, elementwise, norm};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

pub(crate) enum Op<T> {
    Leaf,
    Param,
    Conv2d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize },
    LinComb { terms: Vec<(Var, T)> },
    LayerNorm { x: Var, gamma: Var, beta: Var, mean: Vec<T>, rstd: Vec<T> },
    Gelu { x: Var },
    Sigmoid { x: Var },
    Abs { x: Var },
    ChannelMaxNorm { x: Var, argmax: Vec<usize>, denom: Vec<T> },
    Laplacian { x: Var },
    Concat { a: Var, b: Var },
    PixelShuffle { x: Var, r: usize },
    PadReflect { x: Var },
    Crop { x: Var },
    Attention { q: Var, k: Var, v: Var, window: usize, heads: usize, mode: AttnMode, probs: Vec<T> },
    ScalarFn { x: Var, grad: Tensor<T> },
}

pub(crate) struct Node<T> {
    pub value: Tensor<T>,
    pub op: Op<T>,
}

/// Define-by-run record of a forward pass over a borrowed parameter store.
///
/// Every operation appends a node holding its output; [`Tape::backward`]
/// walks the nodes in reverse and accumulates adjoints.
pub struct Tape<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    pub(crate) nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self { params, nodes: Vec::new(), param_vars: vec![None; params.len()] }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn input(&mut self, map: &FeatureMap<T>) -> Var {
        self.leaf(map.to_tensor())
    }

    /// The (cached) tape variable for a parameter group.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(self.params.get(id).clone(), Op::Param);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn feature_map(&self, v: Var) -> FeatureMap<T> {
        FeatureMap::from_tensor(self.value(v).clone()).expect("tape variable is not a feature map")
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    pub fn hwc(&self, v: Var) -> (usize, usize, usize) {
        self.nodes[v.0].value.hwc()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Softmax weights of an attention node, laid out per window, then per
    /// head, then as a row-major square matrix.
    pub fn attention_probs(&self, v: Var) -> Option<&[T]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Records a scalar whose gradient with respect to `x` was computed
    /// outside the tape (losses).
    pub fn scalar_fn(&mut self, x: Var, value: T, grad: Tensor<T>) -> Result<Var> {
        if grad.shape != self.value(x).shape {
            return invalid(format!(
                "scalar_fn gradient shape {:?} != input shape {:?}",
                grad.shape,
                self.value(x).shape
            ));
        }
        Ok(self.push(Tensor::scalar(value), Op::ScalarFn { x, grad }))
    }

    /// Reverse sweep from a single-element `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        if self.value(root).len() != 1 {
            return invalid(format!("backward root must be scalar, got shape {:?}", self.shape(root)));
        }
        let mut grads: Vec<Option<Tensor<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        let mut seed = Tensor::zeros(&self.value(root).shape);
        seed.data[0] = T::one();
        grads[root.0] = Some(seed);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Param => {}
                Op::Conv2d { x, w, b, stride, pad } => {
                    conv::backward(self, &g, *x, *w, *b, *stride, *pad, &mut grads)
                }
                Op::LinComb { terms } => {
                    for &(v, c) in terms {
                        let acc = slot(&mut grads, v, self);
                        for (a, &gv) in acc.data.iter_mut().zip(&g.data) {
                            *a += c * gv;
                        }
                    }
                }
                Op::LayerNorm { x, gamma, beta, mean, rstd } => {
                    norm::layer_norm_backward(self, &g, *x, *gamma, *beta, mean, rstd, &mut grads)
                }
                Op::Gelu { x } => elementwise::gelu_backward(self, &g, *x, &mut grads),
                Op::Sigmoid { x } => elementwise::sigmoid_backward(self, &g, &node.value, *x, &mut grads),
                Op::Abs { x } => elementwise::abs_backward(self, &g, *x, &mut grads),
                Op::ChannelMaxNorm { x, argmax, denom } => {
                    elementwise::channel_max_norm_backward(self, &g, *x, argmax, denom, &mut grads)
                }
                Op::Laplacian { x } => elementwise::laplacian_backward(self, &g, *x, &mut grads),
                Op::Concat { a, b } => elementwise::concat_backward(self, &g, *a, *b, &mut grads),
                Op::PixelShuffle { x, r } => {
                    elementwise::pixel_shuffle_backward(self, &g, *x, *r, &mut grads)
                }
                Op::PadReflect { x } => elementwise::pad_reflect_backward(self, &g, *x, &mut grads),
                Op::Crop { x } => elementwise::crop_backward(self, &g, *x, &mut grads),
                Op::Attention { q, k, v, window, heads, mode, probs } => attention::backward(
                    self, &g, *q, *k, *v, *window, *heads, *mode, probs, &mut grads,
                ),
                Op::ScalarFn { x, grad } => {
                    let s = g.data[0];
                    let acc = slot(&mut grads, *x, self);
                    for (a, &d) in acc.data.iter_mut().zip(&grad.data) {
                        *a += s * d;
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { node_grads: grads, param_vars: self.param_vars.clone() })
    }
}

/// Adjoint accumulator for `v`, allocated on first use.
pub(crate) fn slot<'g, T: Scalar>(
    grads: &'g mut [Option<Tensor<T>>],
    v: Var,
    tape: &Tape<'_, T>,
) -> &'g mut Tensor<T> {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(&tape.nodes[v.0].value.shape))
}

/// Result of [`Tape::backward`].
pub struct Gradients<T> {
    node_grads: Vec<Option<Tensor<T>>>,
    param_vars: Vec<Option<Var>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to a recorded variable, `None` if the root does
    /// not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.node_grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.param_vars[id.0].and_then(|v| self.wrt(v))
    }

    /// Per parameter group gradients, indexed by [`ParamId`].
    pub fn into_param_grads(mut self) -> Vec<Option<Tensor<T>>> {
        self.param_vars
            .iter()
            .map(|pv| pv.and_then(|v| self.node_grads[v.0].take()))
            .collect()
    }
}
