//! Dense row-major `f64` tensors with reverse-mode differentiation.
//!
//! Every operation on a tensor that requires gradients records its inputs and
//! a backward rule on the output. [`Tensor::backward`] walks that graph in
//! reverse topological order and accumulates gradients into the leaves.

mod conv;
mod gradcheck;
mod ops;

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use crate::error::{Error, Result};

pub use conv::{conv_output_len, Padding};
pub use gradcheck::finite_diff_check;

/// Computes input gradients from `(output gradient, output value, inputs)`.
/// Returns one entry per input, `None` where no gradient flows.
pub(crate) type BackwardFn =
    Box<dyn Fn(&[f64], &[f64], &[Tensor]) -> Vec<Option<Vec<f64>>> + Send + Sync>;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` without recording operations for differentiation.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|g| g.replace(false)));
    f()
}

pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(Cell::get)
}

struct GradFn {
    name: &'static str,
    inputs: Vec<Tensor>,
    backward: BackwardFn,
}

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: RwLock<Vec<f64>>,
    grad: RwLock<Option<Vec<f64>>>,
    requires_grad: bool,
    grad_fn: Option<GradFn>,
}

/// A shared handle to a tensor node. Cloning is cheap and aliases the data.
#[derive(Clone)]
pub struct Tensor(Arc<Node>);

impl Tensor {
    fn from_node(
        shape: Vec<usize>,
        data: Vec<f64>,
        requires_grad: bool,
        grad_fn: Option<GradFn>,
    ) -> Self {
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data: RwLock::new(data),
            grad: RwLock::new(None),
            requires_grad,
            grad_fn,
        }))
    }

    /// A constant tensor. An empty `shape` denotes a scalar.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::from_node(shape.to_vec(), data, false, None))
    }

    /// A trainable leaf whose gradient is accumulated by [`backward`](Self::backward).
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::from_node(shape.to_vec(), data, true, None))
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_node(Vec::new(), vec![value], false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n]).expect("shape matches buffer")
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![value; n]).expect("shape matches buffer")
    }

    /// Output of a recorded operation. Records the backward rule only when
    /// gradients are enabled and some input requires them.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<f64>,
        name: &'static str,
        inputs: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len(), "{name}");
        let track = is_grad_enabled() && inputs.iter().any(Tensor::requires_grad);
        if track {
            let grad_fn = GradFn {
                name,
                inputs,
                backward,
            };
            Self::from_node(shape, data, true, Some(grad_fn))
        } else {
            Self::from_node(shape, data, false, None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// True for tensors not produced by a recorded operation.
    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    /// Name of the operation that produced this tensor, if recorded.
    pub fn op_name(&self) -> Option<&'static str> {
        self.0.grad_fn.as_ref().map(|g| g.name)
    }

    pub fn data(&self) -> RwLockReadGuard<'_, Vec<f64>> {
        self.0.data.read()
    }

    /// In-place access for optimizers and perturbation checks. Values already
    /// computed from this tensor are not updated.
    pub fn data_mut(&self) -> RwLockWriteGuard<'_, Vec<f64>> {
        self.0.data.write()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data().clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::dim(
                "item",
                format!("tensor of shape {:?} is not a scalar", self.shape()),
            ));
        }
        Ok(self.data()[0])
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.read().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.write() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[f64]) {
        let mut slot = self.0.grad.write();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// A constant copy cut off from the graph.
    pub fn detach(&self) -> Tensor {
        Self::from_node(self.0.shape.clone(), self.to_vec(), false, None)
    }

    /// Whether `self` and `other` are handles to the same node.
    pub fn same_node(&self, other: &Tensor) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Back-propagates from this scalar, adding `d self / d leaf` to the
    /// gradient of every leaf that requires gradients. Repeated calls
    /// accumulate until [`zero_grad`](Self::zero_grad).
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Err(Error::Contract(
                "loss does not depend on any tensor that requires gradients".into(),
            ));
        }
        let tape = Tape::from_root(self);
        let mut grads: HashMap<u64, Vec<f64>> = HashMap::new();
        grads.insert(self.0.id, vec![1.0]);

        for node in tape.nodes.iter().rev() {
            let Some(g) = grads.remove(&node.0.id) else {
                continue;
            };
            let Some(grad_fn) = &node.0.grad_fn else {
                node.accumulate_grad(&g);
                continue;
            };
            let input_grads = {
                let out = node.data();
                (grad_fn.backward)(&g, &out, &grad_fn.inputs)
            };
            for (input, ig) in grad_fn.inputs.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                if !input.requires_grad() {
                    continue;
                }
                debug_assert_eq!(ig.len(), input.numel(), "{}", grad_fn.name);
                match grads.get_mut(&input.0.id) {
                    Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b),
                    None => {
                        grads.insert(input.0.id, ig);
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.data();
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.shape());
        if data.len() <= 16 {
            s.field("data", &*data);
        }
        s.field("requires_grad", &self.requires_grad());
        if let Some(name) = self.op_name() {
            s.field("op", &name);
        }
        s.finish()
    }
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::dim(
            "tensor",
            format!("shape {shape:?} has a zero extent"),
        ));
    }
    let expected: usize = shape.iter().product();
    if expected != len {
        return Err(Error::dim(
            "tensor",
            format!("shape {shape:?} needs {expected} values, got {len}"),
        ));
    }
    Ok(())
}

/// The recorded operations reachable from a root, inputs before outputs.
pub struct Tape {
    nodes: Vec<Tensor>,
}

impl Tape {
    /// Collects every gradient-requiring node the root depends on.
    pub fn from_root(root: &Tensor) -> Self {
        let mut nodes = Vec::new();
        let mut visited = HashSet::new();
        // Iterative post-order DFS; the bool marks "children already pushed".
        let mut stack = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                nodes.push(t);
                continue;
            }
            if !t.requires_grad() || !visited.insert(t.0.id) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(grad_fn) = &t.0.grad_fn {
                for input in grad_fn.inputs.iter().rev() {
                    if input.requires_grad() && !visited.contains(&input.0.id) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        Tape { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Operation names in recording order; leaves show as `"leaf"`.
    pub fn op_names(&self) -> Vec<&'static str> {
        self.nodes
            .iter()
            .map(|t| t.op_name().unwrap_or("leaf"))
            .collect()
    }

    /// True if every node appears after all of its recorded inputs.
    pub fn is_topological(&self) -> bool {
        let position: HashMap<u64, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, t)| (t.0.id, i))
            .collect();
        self.nodes.iter().enumerate().all(|(i, t)| {
            t.0.grad_fn.as_ref().is_none_or(|g| {
                g.inputs
                    .iter()
                    .filter(|x| x.requires_grad())
                    .all(|x| position.get(&x.0.id).is_some_and(|&p| p < i))
            })
        })
    }
}
