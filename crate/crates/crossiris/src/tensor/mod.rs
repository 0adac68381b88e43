//! Dense N-D tensors with reverse-mode automatic differentiation.
//!
//! A `Tensor` is an immutable node in a dynamically built computation graph.
//! Every op records its parents and a backward closure; `backward()` on a
//! scalar loss walks the graph in reverse topological order and accumulates
//! gradients into every reachable node that requires them. Leaf parameters
//! keep a mutable data buffer so the optimizer can update them in place
//! between steps (the graph is rebuilt every step).

mod conv;
pub mod fd;
mod ops;

pub use fd::{grad_check, rel_err};

use std::cell::{Ref, RefCell};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

type BackwardFn = Box<dyn Fn(&[f32], &[Tensor])>;

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f32>>,
    grad: RefCell<Option<Vec<f32>>>,
    requires_grad: bool,
    parents: Vec<Tensor>,
    backward_fn: Option<BackwardFn>,
}

#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

fn check_finite(data: &[f32], op: &'static str) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    Ok(())
}

impl Tensor {
    fn build(
        shape: Vec<usize>,
        data: Vec<f32>,
        requires_grad: bool,
        parents: Vec<Tensor>,
        backward_fn: Option<BackwardFn>,
    ) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                parents,
                backward_fn,
            }),
        }
    }

    /// Constant tensor (not tracked by autodiff).
    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Tensor> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::shape(
                "from_vec",
                format!("shape {:?} does not hold {} elements", shape, data.len()),
            ));
        }
        check_finite(&data, "from_vec")?;
        Ok(Tensor::build(shape.to_vec(), data, false, vec![], None))
    }

    /// Leaf tensor that accumulates gradients (parameter storage).
    pub fn leaf(shape: &[usize], data: Vec<f32>) -> Result<Tensor> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::shape(
                "leaf",
                format!("shape {:?} does not hold {} elements", shape, data.len()),
            ));
        }
        check_finite(&data, "leaf")?;
        Ok(Tensor::build(shape.to_vec(), data, true, vec![], None))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::build(shape.to_vec(), vec![0.0; n], false, vec![], None)
    }

    pub fn scalar(v: f32) -> Tensor {
        Tensor::build(vec![1], vec![v], false, vec![], None)
    }

    /// Graph-node constructor used by every op.
    pub(crate) fn from_op(
        op: &'static str,
        shape: Vec<usize>,
        data: Vec<f32>,
        parents: Vec<Tensor>,
        backward_fn: BackwardFn,
    ) -> Result<Tensor> {
        check_finite(&data, op)?;
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        if requires_grad {
            Ok(Tensor::build(shape, data, true, parents, Some(backward_fn)))
        } else {
            // No grad path: drop the graph so memory is freed eagerly.
            Ok(Tensor::build(shape, data, false, vec![], None))
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<f32>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.inner.data.borrow().clone()
    }

    /// Scalar value of a one-element tensor.
    pub fn value(&self) -> f32 {
        debug_assert_eq!(self.numel(), 1);
        self.inner.data.borrow()[0]
    }

    /// Overwrite a leaf's buffer in place (optimizer update).
    pub fn set_data(&self, data: &[f32]) -> Result<()> {
        if data.len() != self.numel() {
            return Err(Error::shape("set_data", "length mismatch"));
        }
        check_finite(data, "set_data")?;
        self.inner.data.borrow_mut().copy_from_slice(data);
        Ok(())
    }

    pub fn grad(&self) -> Option<Vec<f32>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[f32]) {
        if !self.inner.requires_grad {
            return;
        }
        debug_assert_eq!(g.len(), self.numel());
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Cut the graph: same values, no gradient history.
    pub fn detach(&self) -> Tensor {
        Tensor::build(self.inner.shape.clone(), self.to_vec(), false, vec![], None)
    }

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate across
    /// calls until explicitly zeroed.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.numel()));
        }
        let order = self.topo_order();
        self.accumulate_grad(&[1.0]);
        for node in order.iter().rev() {
            let grad = node.inner.grad.borrow().clone();
            let Some(grad) = grad else { continue };
            if grad.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("backward"));
            }
            if let Some(f) = &node.inner.backward_fn {
                f(&grad, &node.inner.parents);
            }
            // Interior nodes do not need their gradient after use.
            if node.inner.backward_fn.is_some() {
                *node.inner.grad.borrow_mut() = None;
            }
        }
        Ok(())
    }

    fn topo_order(&self) -> Vec<Tensor> {
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited = std::collections::HashSet::new();
        // Iterative post-order DFS; the graph can be deep for long conv chains.
        let mut stack: Vec<(Tensor, usize)> = vec![(self.clone(), 0)];
        visited.insert(self.inner.id);
        while let Some((node, child_idx)) = stack.pop() {
            if child_idx < node.inner.parents.len() {
                let child = node.inner.parents[child_idx].clone();
                stack.push((node, child_idx + 1));
                if child.requires_grad() && visited.insert(child.inner.id) {
                    stack.push((child, 0));
                }
            } else {
                order.push(node);
            }
        }
        order
    }
}

/// Named trainable tensor. Names are unique within a network and double as
/// checkpoint keys.
#[derive(Clone)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, shape: &[usize], data: Vec<f32>) -> Result<Parameter> {
        Ok(Parameter { name: name.into(), tensor: Tensor::leaf(shape, data)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_shape() {
        assert!(Tensor::from_vec(&[2, 3], vec![1.0; 5]).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Tensor::from_vec(&[1], vec![f32::NAN]).is_err());
    }

    #[test]
    fn backward_on_non_scalar_fails() {
        let t = Tensor::leaf(&[2], vec![1.0, 2.0]).unwrap();
        assert!(t.backward().is_err());
    }

    #[test]
    fn grads_accumulate_across_backward_calls() {
        let w = Tensor::leaf(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let x = Tensor::from_vec(&[3], vec![4.0, 5.0, 6.0]).unwrap();
        let loss = w.mul(&x).unwrap().sum_all().unwrap();
        loss.backward().unwrap();
        let g1 = w.grad().unwrap();
        assert_eq!(g1, vec![4.0, 5.0, 6.0]);
        let loss2 = w.mul(&x).unwrap().sum_all().unwrap();
        loss2.backward().unwrap();
        let g2 = w.grad().unwrap();
        assert_eq!(g2, vec![8.0, 10.0, 12.0]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let w = Tensor::leaf(&[2], vec![1.0, 2.0]).unwrap();
        let loss = w.detach().sum_all().unwrap();
        assert!(!loss.requires_grad());
    }
}
