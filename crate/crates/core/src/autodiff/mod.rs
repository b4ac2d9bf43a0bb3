//! Reverse-mode automatic differentiation over dense f64 tensors.
//!
//! A [`Tape`] owns an arena of graph nodes; [`Tensor`] handles reference nodes
//! by id. Ops append nodes, so node ids are already in topological order and
//! `backward` is a single reverse sweep that visits each node exactly once.
//! Broadcasting is deliberately limited to scalar-vs-tensor and exact-shape
//! elementwise: anything else is a loud shape error.
//!
//! Trainable parameters live outside the graph in a [`ParamStore`]; a fresh
//! tape is built per forward pass and leaf gradients are accumulated back
//! into the store after `backward`.

mod store;

pub use store::{ParamEntry, ParamStore};

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Log(usize),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    Neg(usize),
    Abs(usize),
    Sum(usize),
    Mean(usize),
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { input: usize, axis: usize, start: usize },
    Reshape(usize),
    Transpose(usize),
    Outer(usize, usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MatMul(..) => "matmul",
            Op::Sin(..) => "sin",
            Op::Cos(..) => "cos",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Relu(..) => "relu",
            Op::Neg(..) => "neg",
            Op::Abs(..) => "abs",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape(..) => "reshape",
            Op::Transpose(..) => "transpose",
            Op::Outer(..) => "outer",
        }
    }
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    /// Name of the bound `ParamStore` entry, when this leaf is a parameter.
    param_name: Option<String>,
}

struct Graph {
    nodes: Vec<Node>,
    backward_run: bool,
}

/// Computation graph arena. Cheap to clone (shared handle); single-writer.
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<Graph>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to one node of a [`Tape`].
#[derive(Clone)]
pub struct Tensor {
    tape: Tape,
    id: usize,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(Graph {
                nodes: Vec::new(),
                backward_run: false,
            })),
        }
    }

    fn push(&self, op: Op, shape: Vec<usize>, values: Vec<f64>, requires_grad: bool) -> Tensor {
        debug_assert_eq!(numel(&shape), values.len());
        let mut g = self.inner.borrow_mut();
        let id = g.nodes.len();
        g.nodes.push(Node {
            op,
            shape,
            values,
            grad: None,
            requires_grad,
            param_name: None,
        });
        Tensor {
            tape: self.clone(),
            id,
        }
    }

    /// Non-differentiable input.
    pub fn constant(&self, shape: &[usize], values: Vec<f64>) -> Tensor {
        assert_eq!(
            numel(shape),
            values.len(),
            "constant: {} values for shape {:?}",
            values.len(),
            shape
        );
        self.push(Op::Leaf, shape.to_vec(), values, false)
    }

    /// Scalar constant (rank 0).
    pub fn scalar(&self, v: f64) -> Tensor {
        self.push(Op::Leaf, vec![], vec![v], false)
    }

    /// Differentiable leaf not bound to a parameter store.
    pub fn leaf(&self, shape: &[usize], values: Vec<f64>) -> Tensor {
        assert_eq!(numel(shape), values.len());
        self.push(Op::Leaf, shape.to_vec(), values, true)
    }

    /// Differentiable leaf bound to `store[name]`; gradients flow back via
    /// [`Tape::accumulate_grads`].
    pub fn param(&self, store: &ParamStore, name: &str) -> Result<Tensor> {
        let entry = store
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        let t = self.push(
            Op::Leaf,
            entry.shape.clone(),
            entry.values.clone(),
            true,
        );
        self.inner.borrow_mut().nodes[t.id].param_name = Some(name.to_string());
        Ok(t)
    }

    /// Parameter leaf with gradient tracking disabled (evaluation mode).
    pub fn param_frozen(&self, store: &ParamStore, name: &str) -> Result<Tensor> {
        let entry = store
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        Ok(self.constant(&entry.shape.clone(), entry.values.clone()))
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reverse sweep from a scalar loss. Gradients of every `requires_grad`
    /// leaf accumulate additively across uses. Calling twice without
    /// [`Tape::reset_backward`] is an error.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        assert!(Rc::ptr_eq(&self.inner, &loss.tape.inner), "loss from another tape");
        let mut g = self.inner.borrow_mut();
        if g.backward_run {
            return Err(Error::BackwardAlreadyRun);
        }
        let loss_shape = g.nodes[loss.id].shape.clone();
        if numel(&loss_shape) != 1 {
            return Err(Error::NonScalarLoss { shape: loss_shape });
        }
        g.backward_run = true;
        g.nodes[loss.id].grad = Some(vec![1.0]);
        for i in (0..=loss.id).rev() {
            let (before, rest) = g.nodes.split_at_mut(i);
            let node = &mut rest[0];
            if !node.requires_grad || node.grad.is_none() {
                continue;
            }
            let grad = node.grad.as_ref().unwrap().clone();
            let out_values = &node.values;
            let out_shape = node.shape.clone();
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate_binary_linear(before, *a, *b, &grad, 1.0, 1.0);
                }
                Op::Sub(a, b) => {
                    accumulate_binary_linear(before, *a, *b, &grad, 1.0, -1.0);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let a_vals = before[a].values.clone();
                    let b_vals = before[b].values.clone();
                    if before[a].requires_grad {
                        let ga = mul_partial(&grad, &b_vals, &a_vals);
                        add_into(before, a, &ga);
                    }
                    if before[b].requires_grad {
                        let gb = mul_partial(&grad, &a_vals, &b_vals);
                        add_into(before, b, &gb);
                    }
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let (n, k) = (before[a].shape[0], before[a].shape[1]);
                    let m = before[b].shape[1];
                    if before[a].requires_grad {
                        // dA = G @ B^T
                        let bv = &before[b].values;
                        let mut ga = vec![0.0; n * k];
                        for i in 0..n {
                            for j in 0..m {
                                let gij = grad[i * m + j];
                                if gij == 0.0 {
                                    continue;
                                }
                                for p in 0..k {
                                    ga[i * k + p] += gij * bv[p * m + j];
                                }
                            }
                        }
                        add_into(before, a, &ga);
                    }
                    if before[b].requires_grad {
                        // dB = A^T @ G
                        let av = before[a].values.clone();
                        let mut gb = vec![0.0; k * m];
                        for i in 0..n {
                            for p in 0..k {
                                let aip = av[i * k + p];
                                if aip == 0.0 {
                                    continue;
                                }
                                for j in 0..m {
                                    gb[p * m + j] += aip * grad[i * m + j];
                                }
                            }
                        }
                        add_into(before, b, &gb);
                    }
                }
                Op::Sin(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> = before[a]
                            .values
                            .iter()
                            .zip(&grad)
                            .map(|(x, g)| g * x.cos())
                            .collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Cos(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> = before[a]
                            .values
                            .iter()
                            .zip(&grad)
                            .map(|(x, g)| -g * x.sin())
                            .collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Exp(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> =
                            out_values.iter().zip(&grad).map(|(y, g)| g * y).collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Log(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> = before[a]
                            .values
                            .iter()
                            .zip(&grad)
                            .map(|(x, g)| g / x)
                            .collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Tanh(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> = out_values
                            .iter()
                            .zip(&grad)
                            .map(|(y, g)| g * (1.0 - y * y))
                            .collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Sigmoid(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> = out_values
                            .iter()
                            .zip(&grad)
                            .map(|(y, g)| g * y * (1.0 - y))
                            .collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Relu(a) => {
                    // Subgradient at 0 fixed to 0.
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> = before[a]
                            .values
                            .iter()
                            .zip(&grad)
                            .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
                            .collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Neg(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> = grad.iter().map(|g| -g).collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Abs(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga: Vec<f64> = before[a]
                            .values
                            .iter()
                            .zip(&grad)
                            .map(|(x, g)| {
                                if *x > 0.0 {
                                    *g
                                } else if *x < 0.0 {
                                    -*g
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        add_into(before, a, &ga);
                    }
                }
                Op::Sum(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let ga = vec![grad[0]; before[a].values.len()];
                        add_into(before, a, &ga);
                    }
                }
                Op::Mean(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let n = before[a].values.len() as f64;
                        let ga = vec![grad[0] / n; before[a].values.len()];
                        add_into(before, a, &ga);
                    }
                }
                Op::Concat { inputs, axis } => {
                    let inputs = inputs.clone();
                    let axis = *axis;
                    let outer: usize = out_shape[..axis].iter().product();
                    let inner: usize = out_shape[axis + 1..].iter().product();
                    let total_mid = out_shape[axis];
                    let mut mid_offset = 0usize;
                    for &inp in &inputs {
                        let mid = before[inp].shape[axis];
                        if before[inp].requires_grad {
                            let mut ga = vec![0.0; before[inp].values.len()];
                            for o in 0..outer {
                                let src = (o * total_mid + mid_offset) * inner;
                                let dst = o * mid * inner;
                                ga[dst..dst + mid * inner]
                                    .copy_from_slice(&grad[src..src + mid * inner]);
                            }
                            add_into(before, inp, &ga);
                        }
                        mid_offset += mid;
                    }
                }
                Op::Slice { input, axis, start } => {
                    let (input, axis, start) = (*input, *axis, *start);
                    if before[input].requires_grad {
                        let in_shape = before[input].shape.clone();
                        let outer: usize = in_shape[..axis].iter().product();
                        let inner: usize = in_shape[axis + 1..].iter().product();
                        let mid_in = in_shape[axis];
                        let mid_out = out_shape[axis];
                        let mut ga = vec![0.0; before[input].values.len()];
                        for o in 0..outer {
                            let dst = (o * mid_in + start) * inner;
                            let src = o * mid_out * inner;
                            ga[dst..dst + mid_out * inner]
                                .copy_from_slice(&grad[src..src + mid_out * inner]);
                        }
                        add_into(before, input, &ga);
                    }
                }
                Op::Reshape(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        add_into(before, a, &grad);
                    }
                }
                Op::Transpose(a) => {
                    let a = *a;
                    if before[a].requires_grad {
                        let (n, m) = (before[a].shape[0], before[a].shape[1]);
                        // grad has shape [m, n]
                        let mut ga = vec![0.0; n * m];
                        for i in 0..m {
                            for j in 0..n {
                                ga[j * m + i] = grad[i * n + j];
                            }
                        }
                        add_into(before, a, &ga);
                    }
                }
                Op::Outer(u, v) => {
                    let (u, v) = (*u, *v);
                    let u_shape = before[u].shape.clone();
                    let (rows, a_dim, b_dim) = if u_shape.len() == 1 {
                        (1usize, before[u].shape[0], before[v].shape[0])
                    } else {
                        (u_shape[0], u_shape[1], before[v].shape[1])
                    };
                    let uv = before[u].values.clone();
                    let vv = before[v].values.clone();
                    if before[u].requires_grad {
                        let mut gu = vec![0.0; rows * a_dim];
                        for r in 0..rows {
                            for i in 0..a_dim {
                                let mut s = 0.0;
                                for j in 0..b_dim {
                                    s += grad[(r * a_dim + i) * b_dim + j] * vv[r * b_dim + j];
                                }
                                gu[r * a_dim + i] = s;
                            }
                        }
                        add_into(before, u, &gu);
                    }
                    if before[v].requires_grad {
                        let mut gv = vec![0.0; rows * b_dim];
                        for r in 0..rows {
                            for j in 0..b_dim {
                                let mut s = 0.0;
                                for i in 0..a_dim {
                                    s += grad[(r * a_dim + i) * b_dim + j] * uv[r * a_dim + i];
                                }
                                gv[r * b_dim + j] = s;
                            }
                        }
                        add_into(before, v, &gv);
                    }
                }
            }
        }
        Ok(())
    }

    /// Clear all gradients and allow another backward pass.
    pub fn reset_backward(&self) {
        let mut g = self.inner.borrow_mut();
        g.backward_run = false;
        for node in &mut g.nodes {
            node.grad = None;
        }
    }

    /// Add the gradients of every store-bound leaf into the store.
    pub fn accumulate_grads(&self, store: &mut ParamStore) -> Result<()> {
        let g = self.inner.borrow();
        for node in &g.nodes {
            if let (Some(name), Some(grad)) = (&node.param_name, &node.grad) {
                store.add_grad(name, grad)?;
            }
        }
        Ok(())
    }

    /// First node holding a non-finite value, as `"node #i (op)"`.
    pub fn first_nonfinite(&self) -> Option<String> {
        let g = self.inner.borrow();
        for (i, node) in g.nodes.iter().enumerate() {
            if node.values.iter().any(|v| !v.is_finite()) {
                let label = node
                    .param_name
                    .clone()
                    .unwrap_or_else(|| node.op.name().to_string());
                return Some(format!("node #{i} ({label})"));
            }
        }
        None
    }
}

fn add_into(nodes: &mut [Node], id: usize, contribution: &[f64]) {
    let node = &mut nodes[id];
    let grad = node
        .grad
        .get_or_insert_with(|| vec![0.0; node.values.len()]);
    debug_assert_eq!(grad.len(), contribution.len());
    for (g, c) in grad.iter_mut().zip(contribution) {
        *g += c;
    }
}

/// Backward for add/sub where both partials are +/-1 times the upstream
/// gradient, handling the scalar-broadcast cases.
fn accumulate_binary_linear(nodes: &mut [Node], a: usize, b: usize, grad: &[f64], ca: f64, cb: f64) {
    for (id, c) in [(a, ca), (b, cb)] {
        if !nodes[id].requires_grad {
            continue;
        }
        let n = nodes[id].values.len();
        let contribution: Vec<f64> = if n == grad.len() {
            grad.iter().map(|g| c * g).collect()
        } else {
            // scalar operand broadcast over the other side
            debug_assert_eq!(n, 1);
            vec![c * grad.iter().sum::<f64>()]
        };
        add_into(nodes, id, &contribution);
    }
}

/// Partial of elementwise mul w.r.t. one operand: upstream grad times the
/// other operand, reduced if this operand was a broadcast scalar.
fn mul_partial(grad: &[f64], other: &[f64], this: &[f64]) -> Vec<f64> {
    match (this.len(), other.len()) {
        (n, m) if n == grad.len() && m == grad.len() => {
            grad.iter().zip(other).map(|(g, o)| g * o).collect()
        }
        (1, _) => {
            // this was scalar: reduce
            let s = if other.len() == grad.len() {
                grad.iter().zip(other).map(|(g, o)| g * o).sum()
            } else {
                // both scalar
                grad[0] * other[0]
            };
            vec![s]
        }
        (n, 1) => {
            debug_assert_eq!(n, grad.len());
            grad.iter().map(|g| g * other[0]).collect()
        }
        _ => unreachable!("mul shapes validated at forward time"),
    }
}

impl Tensor {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.id].shape.clone()
    }

    pub fn values(&self) -> Vec<f64> {
        self.tape.inner.borrow().nodes[self.id].values.clone()
    }

    pub fn numel(&self) -> usize {
        self.tape.inner.borrow().nodes[self.id].values.len()
    }

    pub fn scalar_value(&self) -> f64 {
        let g = self.tape.inner.borrow();
        let node = &g.nodes[self.id];
        assert_eq!(node.values.len(), 1, "scalar_value on non-scalar tensor");
        node.values[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.tape.inner.borrow().nodes[self.id].grad.clone()
    }

    fn same_tape(&self, other: &Tensor) {
        assert!(
            Rc::ptr_eq(&self.tape.inner, &other.tape.inner),
            "operands from different tapes"
        );
    }

    fn requires(&self) -> bool {
        self.tape.inner.borrow().nodes[self.id].requires_grad
    }

    fn binary_elementwise(
        &self,
        rhs: &Tensor,
        op_name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(usize, usize) -> Op,
    ) -> Result<Tensor> {
        self.same_tape(rhs);
        let (ls, rs) = (self.shape(), rhs.shape());
        let (lv, rv) = (self.values(), rhs.values());
        let (shape, values) = if ls == rs {
            (ls, lv.iter().zip(&rv).map(|(a, b)| f(*a, *b)).collect())
        } else if rv.len() == 1 {
            (ls, lv.iter().map(|a| f(*a, rv[0])).collect())
        } else if lv.len() == 1 {
            (rs, rv.iter().map(|b| f(lv[0], *b)).collect())
        } else {
            return Err(Error::ShapeMismatch {
                op: op_name,
                lhs: ls,
                rhs: rs,
            });
        };
        let rg = self.requires() || rhs.requires();
        Ok(self.tape.push(make(self.id, rhs.id), shape, values, rg))
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary_elementwise(rhs, "add", |a, b| a + b, Op::Add)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary_elementwise(rhs, "sub", |a, b| a - b, Op::Sub)
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary_elementwise(rhs, "mul", |a, b| a * b, Op::Mul)
    }

    /// 2-d matrix product `[n,k] x [k,m] -> [n,m]`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.same_tape(rhs);
        let (ls, rs) = (self.shape(), rhs.shape());
        if ls.len() != 2 || rs.len() != 2 || ls[1] != rs[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: ls,
                rhs: rs,
            });
        }
        let (n, k, m) = (ls[0], ls[1], rs[1]);
        let a = self.values();
        let b = rhs.values();
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for p in 0..k {
                let aip = a[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let row = &b[p * m..(p + 1) * m];
                let dst = &mut out[i * m..(i + 1) * m];
                for (d, bv) in dst.iter_mut().zip(row) {
                    *d += aip * bv;
                }
            }
        }
        let rg = self.requires() || rhs.requires();
        Ok(self
            .tape
            .push(Op::MatMul(self.id, rhs.id), vec![n, m], out, rg))
    }

    fn unary(
        &self,
        f: impl Fn(f64) -> f64,
        make: impl Fn(usize) -> Op,
    ) -> Tensor {
        let values = self.values().iter().map(|x| f(*x)).collect();
        self.tape
            .push(make(self.id), self.shape(), values, self.requires())
    }

    pub fn sin(&self) -> Tensor {
        self.unary(f64::sin, Op::Sin)
    }

    pub fn cos(&self) -> Tensor {
        self.unary(f64::cos, Op::Cos)
    }

    pub fn exp(&self) -> Tensor {
        self.unary(f64::exp, Op::Exp)
    }

    pub fn log(&self) -> Tensor {
        self.unary(f64::ln, Op::Log)
    }

    pub fn tanh(&self) -> Tensor {
        self.unary(f64::tanh, Op::Tanh)
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(
            |x| {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            },
            Op::Sigmoid,
        )
    }

    pub fn relu(&self) -> Tensor {
        // NaN passes through rather than being clamped to zero, so poisoned
        // values stay visible to downstream finiteness checks.
        self.unary(|x| if x > 0.0 || x.is_nan() { x } else { 0.0 }, Op::Relu)
    }

    pub fn neg(&self) -> Tensor {
        self.unary(|x| -x, Op::Neg)
    }

    pub fn abs(&self) -> Tensor {
        self.unary(f64::abs, Op::Abs)
    }

    /// Full reduction to a rank-0 scalar.
    pub fn sum(&self) -> Tensor {
        let s: f64 = self.values().iter().sum();
        self.tape
            .push(Op::Sum(self.id), vec![], vec![s], self.requires())
    }

    pub fn mean(&self) -> Tensor {
        let v = self.values();
        let s: f64 = v.iter().sum::<f64>() / v.len() as f64;
        self.tape
            .push(Op::Mean(self.id), vec![], vec![s], self.requires())
    }

    /// Multiply by a plain constant.
    pub fn scale(&self, c: f64) -> Tensor {
        let k = self.tape.scalar(c);
        self.mul(&k).expect("scalar broadcast always valid")
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let k = self.tape.scalar(c);
        self.add(&k).expect("scalar broadcast always valid")
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(),
                rhs: shape.to_vec(),
            });
        }
        Ok(self.tape.push(
            Op::Reshape(self.id),
            shape.to_vec(),
            self.values(),
            self.requires(),
        ))
    }

    /// 2-d transpose.
    pub fn transpose(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "transpose",
                lhs: s,
                rhs: vec![],
            });
        }
        let (n, m) = (s[0], s[1]);
        let v = self.values();
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = v[i * m + j];
            }
        }
        Ok(self
            .tape
            .push(Op::Transpose(self.id), vec![m, n], out, self.requires()))
    }

    /// Contiguous slice `[start, end)` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, end: usize) -> Result<Tensor> {
        let shape = self.shape();
        if axis >= shape.len() || start >= end || end > shape[axis] {
            return Err(Error::ShapeMismatch {
                op: "slice",
                lhs: shape,
                rhs: vec![axis, start, end],
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mid_in = shape[axis];
        let mid_out = end - start;
        let v = self.values();
        let mut out = Vec::with_capacity(outer * mid_out * inner);
        for o in 0..outer {
            let src = (o * mid_in + start) * inner;
            out.extend_from_slice(&v[src..src + mid_out * inner]);
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = mid_out;
        Ok(self.tape.push(
            Op::Slice {
                input: self.id,
                axis,
                start,
            },
            out_shape,
            out,
            self.requires(),
        ))
    }

    /// Outer product. 1-d `[a] x [b] -> [a,b]`; 2-d inputs are treated as a
    /// batch of rows: `[n,a] x [n,b] -> [n, a*b]` (row-major flattening, so
    /// the 1-d case flattens the same way).
    pub fn outer(&self, rhs: &Tensor) -> Result<Tensor> {
        self.same_tape(rhs);
        let (ls, rs) = (self.shape(), rhs.shape());
        let (rows, a_dim, b_dim, out_shape) = match (ls.len(), rs.len()) {
            (1, 1) => (1, ls[0], rs[0], vec![ls[0], rs[0]]),
            (2, 2) if ls[0] == rs[0] => (ls[0], ls[1], rs[1], vec![ls[0], ls[1] * rs[1]]),
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "outer",
                    lhs: ls,
                    rhs: rs,
                })
            }
        };
        let u = self.values();
        let v = rhs.values();
        let mut out = vec![0.0; rows * a_dim * b_dim];
        for r in 0..rows {
            for i in 0..a_dim {
                let ui = u[r * a_dim + i];
                for j in 0..b_dim {
                    out[(r * a_dim + i) * b_dim + j] = ui * v[r * b_dim + j];
                }
            }
        }
        let rg = self.requires() || rhs.requires();
        Ok(self
            .tape
            .push(Op::Outer(self.id, rhs.id), out_shape, out, rg))
    }

    /// Broadcast a vector over `rows` rows via `ones[rows,1] @ v[1,d]`;
    /// the usual way to add a bias row to a batch.
    pub fn broadcast_rows(&self, rows: usize) -> Result<Tensor> {
        let d = self.numel();
        let ones = self.tape.constant(&[rows, 1], vec![1.0; rows]);
        ones.matmul(&self.reshape(&[1, d])?)
    }

    /// Concatenate along `axis`; all inputs must agree on every other axis.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        assert!(!parts.is_empty(), "concat of zero tensors");
        let first = parts[0];
        let base_shape = first.shape();
        let mut total_mid = 0usize;
        for p in parts {
            first.same_tape(p);
            let s = p.shape();
            if s.len() != base_shape.len()
                || axis >= s.len()
                || s.iter()
                    .zip(&base_shape)
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: base_shape.clone(),
                    rhs: s,
                });
            }
            total_mid += s[axis];
        }
        let outer: usize = base_shape[..axis].iter().product();
        let inner: usize = base_shape[axis + 1..].iter().product();
        let mut out_shape = base_shape.clone();
        out_shape[axis] = total_mid;
        let mut out = vec![0.0; outer * total_mid * inner];
        let mut mid_offset = 0usize;
        let mut rg = false;
        for p in parts {
            let mid = p.shape()[axis];
            let v = p.values();
            for o in 0..outer {
                let dst = (o * total_mid + mid_offset) * inner;
                let src = o * mid * inner;
                out[dst..dst + mid * inner].copy_from_slice(&v[src..src + mid * inner]);
            }
            mid_offset += mid;
            rg |= p.requires();
        }
        let ids = parts.iter().map(|p| p.id).collect();
        Ok(first
            .tape
            .push(Op::Concat { inputs: ids, axis }, out_shape, out, rg))
    }
}

#[cfg(test)]
mod tests;
