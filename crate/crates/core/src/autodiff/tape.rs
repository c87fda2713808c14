//! Append-only computation tape with reverse-mode sweep.

use super::{Tensor, TensorError};
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub(crate) id: usize,
    pub(crate) tape: u64,
}

/// Adjoint rule of one recorded operation.
///
/// `backward` receives the forward inputs, the forward output and the
/// adjoint of the output, and returns one adjoint per input (`None` where
/// `needs[i]` is false).
pub trait Backward {
    fn name(&self) -> &'static str;
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad: &[f64],
        needs: &[bool],
    ) -> Vec<Option<Vec<f64>>>;
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    inputs: Vec<usize>,
    op: Option<Box<dyn Backward>>,
}

pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    grad_enabled: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A tape that records values only; nothing on it can be differentiated.
    pub fn no_grad() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push_node(&mut self, value: Tensor, requires_grad: bool, inputs: Vec<usize>, op: Option<Box<dyn Backward>>) -> Var {
        let id = self.nodes.len();
        self.nodes.push(Node {
            value,
            requires_grad,
            inputs,
            op,
        });
        Var { id, tape: self.id }
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_node(value, false, Vec::new(), None)
    }

    /// Records a differentiable leaf (a parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        let rg = self.grad_enabled;
        self.push_node(value, rg, Vec::new(), None)
    }

    pub(crate) fn check(&self, v: Var) -> Result<(), TensorError> {
        if v.tape != self.id || v.id >= self.nodes.len() {
            return Err(TensorError::Detached);
        }
        Ok(())
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable belongs to another tape");
        &self.nodes[v.id].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        v.tape == self.id && self.nodes[v.id].requires_grad
    }

    /// Records the result of an operation with its adjoint rule.
    pub fn push(&mut self, value: Tensor, inputs: &[Var], op: impl Backward + 'static) -> Result<Var, TensorError> {
        for &v in inputs {
            self.check(v)?;
        }
        let requires_grad = self.grad_enabled && inputs.iter().any(|v| self.nodes[v.id].requires_grad);
        if requires_grad {
            let ids = inputs.iter().map(|v| v.id).collect();
            Ok(self.push_node(value, true, ids, Some(Box::new(op))))
        } else {
            Ok(self.push_node(value, false, Vec::new(), None))
        }
    }

    /// Reverse sweep from a one-element `loss`, visiting nodes in strict
    /// reverse append order.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        self.check(loss)?;
        let root = &self.nodes[loss.id];
        if !root.requires_grad {
            return Err(TensorError::Detached);
        }
        if root.value.numel() != 1 {
            return Err(TensorError::NotScalar(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let node = &self.nodes[id];
            let Some(op) = node.op.as_ref() else { continue };
            let Some(g) = grads[id].take() else { continue };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|&i| &self.nodes[i].value).collect();
            let needs: Vec<bool> = node.inputs.iter().map(|&i| self.nodes[i].requires_grad).collect();
            let contributions = op.backward(&inputs, &node.value, &g, &needs);
            debug_assert_eq!(contributions.len(), node.inputs.len(), "{}", op.name());
            for (&input, contrib) in node.inputs.iter().zip(contributions) {
                let Some(c) = contrib else { continue };
                if !self.nodes[input].requires_grad {
                    continue;
                }
                debug_assert_eq!(c.len(), self.nodes[input].value.numel(), "{}", op.name());
                match grads[input].as_mut() {
                    Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                    None => grads[input] = Some(c),
                }
            }
        }
        Ok(Gradients { tape: self.id, grads })
    }
}

/// Adjoints of the tape's leaves after a reverse sweep.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` when `v` was unreachable from the loss.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.id).and_then(|g| g.as_deref())
    }

    /// Adjoint of `v`, zero-filled when unreachable.
    pub fn get_or_zeros(&self, v: Var, numel: usize) -> Vec<f64> {
        self.get(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; numel])
    }
}
