use thiserror::Error;

use crate::autodiff::Tensor;
use crate::scalar::Real;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("input node {0} has no bound value")]
    UnboundInput(usize),
    #[error("shape mismatch at node {node}: {detail}")]
    ShapeMismatch { node: usize, detail: String },
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("backward output must be scalar, node {0} is not")]
    NonScalarOutput(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Square,
}

#[derive(Clone, Debug)]
enum Op<T> {
    /// Bound before each forward pass; rebindable.
    Input { shape: (usize, usize) },
    /// Trainable tensor owned by the tape, updated externally between passes.
    Param,
    /// Fixed tensor; no gradient is reported for it.
    Const,
    /// `W x + b` with `W` and `b` supplied by other nodes (usually params),
    /// input flattened, output reshaped to `out_shape`.
    Affine {
        weight: NodeId,
        bias: NodeId,
        input: NodeId,
        out_shape: (usize, usize),
    },
    /// Same-shape 3x3 cross-correlation with replicate padding. The kernel is
    /// a constant: no gradient flows into it.
    Conv2dFixedKernel { kernel: [[T; 3]; 3], input: NodeId },
    Elementwise { kind: Activation, input: NodeId },
    Hadamard { lhs: NodeId, rhs: NodeId },
    Add { lhs: NodeId, rhs: NodeId },
    Scale { factor: T, input: NodeId },
    /// Sum of cyclic translations of the input, one per offset (periodic in
    /// both axes). Adjoint translates by the negated offsets.
    ShiftSum {
        offsets: Vec<(isize, isize)>,
        input: NodeId,
    },
    ReduceSumSquares { input: NodeId },
    ReduceMean { input: NodeId },
}

struct Node<T> {
    op: Op<T>,
    /// Storage for Param/Const values and Input bindings.
    stored: Option<Tensor<T>>,
}

/// Reverse-mode tape: a computation graph in construction order.
///
/// One `forward` pass computes every node value; one `backward` pass from a
/// scalar output accumulates adjoints for every node, in particular for all
/// [`Tape::params`]. The tape never mutates its own parameters; callers
/// update them through [`Tape::set_param`] between passes.
pub struct Tape<T = f64> {
    nodes: Vec<Node<T>>,
    values: Vec<Tensor<T>>,
    adjoints: Vec<Tensor<T>>,
    forward_done: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            values: Vec::new(),
            adjoints: Vec::new(),
            forward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, stored: Option<Tensor<T>>) -> NodeId {
        self.nodes.push(Node { op, stored });
        self.forward_done = false;
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, rows: usize, cols: usize) -> NodeId {
        self.push(Op::Input { shape: (rows, cols) }, None)
    }

    pub fn param(&mut self, init: Tensor<T>) -> NodeId {
        self.push(Op::Param, Some(init))
    }

    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(Op::Const, Some(value))
    }

    pub fn scalar_const(&mut self, v: T) -> NodeId {
        self.constant(Tensor::scalar(v))
    }

    /// Bind (or rebind) the value of an `Input` node.
    pub fn bind(&mut self, id: NodeId, value: Tensor<T>) {
        match self.nodes[id.0].op {
            Op::Input { shape } => {
                assert_eq!(
                    shape.0 * shape.1,
                    value.len(),
                    "bind: value size does not match input shape"
                );
                self.nodes[id.0].stored = Some(value);
                self.forward_done = false;
            }
            _ => panic!("bind: node {} is not an input", id.0),
        }
    }

    pub fn affine(&mut self, weight: NodeId, bias: NodeId, input: NodeId) -> NodeId {
        let rows = self.nodes[bias.0]
            .stored
            .as_ref()
            .map(|t| t.len())
            .unwrap_or(0);
        self.affine_shaped(weight, bias, input, (rows.max(1), 1))
    }

    /// Affine layer whose output is viewed with the given shape (e.g. a
    /// flattened field reshaped back to `(nx, nt)`).
    pub fn affine_shaped(
        &mut self,
        weight: NodeId,
        bias: NodeId,
        input: NodeId,
        out_shape: (usize, usize),
    ) -> NodeId {
        self.push(
            Op::Affine {
                weight,
                bias,
                input,
                out_shape,
            },
            None,
        )
    }

    pub fn conv2d(&mut self, kernel: [[T; 3]; 3], input: NodeId) -> NodeId {
        self.push(Op::Conv2dFixedKernel { kernel, input }, None)
    }

    pub fn elementwise(&mut self, kind: Activation, input: NodeId) -> NodeId {
        self.push(Op::Elementwise { kind, input }, None)
    }

    pub fn tanh(&mut self, input: NodeId) -> NodeId {
        self.elementwise(Activation::Tanh, input)
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        self.elementwise(Activation::Relu, input)
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        self.elementwise(Activation::Sigmoid, input)
    }

    pub fn square(&mut self, input: NodeId) -> NodeId {
        self.elementwise(Activation::Square, input)
    }

    pub fn hadamard(&mut self, lhs: NodeId, rhs: NodeId) -> NodeId {
        self.push(Op::Hadamard { lhs, rhs }, None)
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> NodeId {
        self.push(Op::Add { lhs, rhs }, None)
    }

    pub fn scale(&mut self, factor: T, input: NodeId) -> NodeId {
        self.push(Op::Scale { factor, input }, None)
    }

    /// `lhs - rhs`, composed from the primitive nodes.
    pub fn sub(&mut self, lhs: NodeId, rhs: NodeId) -> NodeId {
        let neg = self.scale(-T::one(), rhs);
        self.add(lhs, neg)
    }

    pub fn shift_sum(&mut self, offsets: Vec<(isize, isize)>, input: NodeId) -> NodeId {
        self.push(Op::ShiftSum { offsets, input }, None)
    }

    pub fn sum_squares(&mut self, input: NodeId) -> NodeId {
        self.push(Op::ReduceSumSquares { input }, None)
    }

    pub fn mean(&mut self, input: NodeId) -> NodeId {
        self.push(Op::ReduceMean { input }, None)
    }

    /// All `Param` nodes in construction order.
    pub fn params(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i].op, Op::Param))
            .map(NodeId)
            .collect()
    }

    pub fn param_value(&self, id: NodeId) -> &Tensor<T> {
        assert!(matches!(self.nodes[id.0].op, Op::Param));
        self.nodes[id.0].stored.as_ref().unwrap()
    }

    pub fn set_param(&mut self, id: NodeId, value: Tensor<T>) {
        assert!(matches!(self.nodes[id.0].op, Op::Param));
        let old = self.nodes[id.0].stored.as_ref().unwrap();
        assert_eq!(old.len(), value.len(), "set_param: size mismatch");
        self.nodes[id.0].stored = Some(value);
        self.forward_done = false;
    }

    /// Value computed by the last forward pass.
    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        assert!(self.forward_done, "value read before forward");
        &self.values[id.0]
    }

    pub fn scalar_value(&self, id: NodeId) -> T {
        self.value(id).as_scalar()
    }

    /// Adjoint accumulated by the last backward pass.
    pub fn adjoint(&self, id: NodeId) -> &Tensor<T> {
        &self.adjoints[id.0]
    }

    /// Evaluate every node in construction order.
    pub fn forward(&mut self) -> Result<(), TapeError> {
        if self.values.len() != self.nodes.len() {
            self.values = vec![Tensor::zeros(1, 1); self.nodes.len()];
        }
        for i in 0..self.nodes.len() {
            let value = self.eval(i)?;
            self.values[i] = value;
        }
        self.forward_done = true;
        Ok(())
    }

    /// Seed the scalar `output` adjoint with one and apply the chain rule in
    /// reverse construction order.
    pub fn backward(&mut self, output: NodeId) -> Result<(), TapeError> {
        if !self.forward_done {
            return Err(TapeError::BackwardBeforeForward);
        }
        if self.values[output.0].len() != 1 {
            return Err(TapeError::NonScalarOutput(output.0));
        }
        self.adjoints = self
            .values
            .iter()
            .map(|v| Tensor::zeros(v.rows(), v.cols()))
            .collect();
        self.adjoints[output.0] = Tensor::scalar(T::one());
        for i in (0..self.nodes.len()).rev() {
            self.propagate(i);
        }
        Ok(())
    }

    /// Smallest |pre-activation| over all `Relu` nodes in the last forward
    /// pass, used to keep finite-difference probes away from kinks.
    pub fn min_abs_relu_input(&self) -> Option<T> {
        if !self.forward_done {
            return None;
        }
        let mut min: Option<T> = None;
        for node in &self.nodes {
            if let Op::Elementwise {
                kind: Activation::Relu,
                input,
            } = node.op
            {
                for &v in self.values[input.0].data() {
                    let a = v.abs();
                    min = Some(match min {
                        Some(m) => m.min(a),
                        None => a,
                    });
                }
            }
        }
        min
    }

    fn eval(&self, i: usize) -> Result<Tensor<T>, TapeError> {
        let mismatch = |detail: String| TapeError::ShapeMismatch { node: i, detail };
        let value = match &self.nodes[i].op {
            Op::Input { .. } => self.nodes[i]
                .stored
                .clone()
                .ok_or(TapeError::UnboundInput(i))?,
            Op::Param | Op::Const => self.nodes[i].stored.clone().unwrap(),
            Op::Affine {
                weight,
                bias,
                input,
                out_shape,
            } => {
                let w = &self.values[weight.0];
                let b = &self.values[bias.0];
                let x = &self.values[input.0];
                let (m, n) = w.shape();
                if x.len() != n || b.len() != m || out_shape.0 * out_shape.1 != m {
                    return Err(mismatch(format!(
                        "affine W {m}x{n}, b {}, x {}, out {:?}",
                        b.len(),
                        x.len(),
                        out_shape
                    )));
                }
                let mut out = Vec::with_capacity(m);
                for r in 0..m {
                    let mut acc = b.data()[r];
                    let row = &w.data()[r * n..(r + 1) * n];
                    for (wv, xv) in row.iter().zip(x.data()) {
                        acc = acc + *wv * *xv;
                    }
                    out.push(acc);
                }
                Tensor::from_vec(out_shape.0, out_shape.1, out)
            }
            Op::Conv2dFixedKernel { kernel, input } => {
                let x = &self.values[input.0];
                let (rows, cols) = x.shape();
                if rows < 3 || cols < 3 {
                    return Err(mismatch(format!("conv input {rows}x{cols} below 3x3")));
                }
                let mut out = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    for c in 0..cols {
                        let mut acc = T::zero();
                        for (a, krow) in kernel.iter().enumerate() {
                            let sr = (r as isize + a as isize - 1).clamp(0, rows as isize - 1)
                                as usize;
                            for (b, &kv) in krow.iter().enumerate() {
                                let sc = (c as isize + b as isize - 1)
                                    .clamp(0, cols as isize - 1)
                                    as usize;
                                acc = acc + kv * x.get(sr, sc);
                            }
                        }
                        out.set(r, c, acc);
                    }
                }
                out
            }
            Op::Elementwise { kind, input } => {
                let x = &self.values[input.0];
                let f = |v: T| match kind {
                    Activation::Tanh => v.tanh(),
                    Activation::Relu => v.max(T::zero()),
                    Activation::Sigmoid => T::one() / (T::one() + (-v).exp()),
                    Activation::Square => v * v,
                };
                Tensor::from_vec(x.rows(), x.cols(), x.data().iter().map(|&v| f(v)).collect())
            }
            Op::Hadamard { lhs, rhs } => {
                let a = &self.values[lhs.0];
                let b = &self.values[rhs.0];
                if a.shape() != b.shape() {
                    return Err(mismatch(format!(
                        "hadamard {:?} vs {:?}",
                        a.shape(),
                        b.shape()
                    )));
                }
                Tensor::from_vec(
                    a.rows(),
                    a.cols(),
                    a.data()
                        .iter()
                        .zip(b.data())
                        .map(|(&x, &y)| x * y)
                        .collect(),
                )
            }
            Op::Add { lhs, rhs } => {
                let a = &self.values[lhs.0];
                let b = &self.values[rhs.0];
                if a.shape() != b.shape() {
                    return Err(mismatch(format!("add {:?} vs {:?}", a.shape(), b.shape())));
                }
                Tensor::from_vec(
                    a.rows(),
                    a.cols(),
                    a.data()
                        .iter()
                        .zip(b.data())
                        .map(|(&x, &y)| x + y)
                        .collect(),
                )
            }
            Op::Scale { factor, input } => {
                let x = &self.values[input.0];
                Tensor::from_vec(
                    x.rows(),
                    x.cols(),
                    x.data().iter().map(|&v| v * *factor).collect(),
                )
            }
            Op::ShiftSum { offsets, input } => {
                let x = &self.values[input.0];
                let (rows, cols) = x.shape();
                let mut out = Tensor::zeros(rows, cols);
                for &(di, dj) in offsets {
                    for r in 0..rows {
                        let sr = (r as isize + di).rem_euclid(rows as isize) as usize;
                        for c in 0..cols {
                            let sc = (c as isize + dj).rem_euclid(cols as isize) as usize;
                            let v = out.get(r, c) + x.get(sr, sc);
                            out.set(r, c, v);
                        }
                    }
                }
                out
            }
            Op::ReduceSumSquares { input } => {
                let x = &self.values[input.0];
                Tensor::scalar(x.data().iter().map(|&v| v * v).sum())
            }
            Op::ReduceMean { input } => {
                let x = &self.values[input.0];
                let n = T::of(x.len() as f64);
                Tensor::scalar(x.data().iter().cloned().sum::<T>() / n)
            }
        };
        Ok(value)
    }

    fn propagate(&mut self, i: usize) {
        let adj = self.adjoints[i].clone();
        if adj.data().iter().all(|v| *v == T::zero()) {
            return;
        }
        let op = self.nodes[i].op.clone();
        match &op {
            Op::Input { .. } | Op::Param | Op::Const => {}
            Op::Affine {
                weight,
                bias,
                input,
                ..
            } => {
                let (weight, bias, input) = (*weight, *bias, *input);
                let (m, n) = self.values[weight.0].shape();
                let x = self.values[input.0].clone();
                let w = self.values[weight.0].clone();
                // dL/db = adj; dL/dW = adj (outer) x; dL/dx = W^T adj.
                for r in 0..m {
                    let g = adj.data()[r];
                    self.adjoints[bias.0].data_mut()[r] += g;
                    if g != T::zero() {
                        for c in 0..n {
                            self.adjoints[weight.0].data_mut()[r * n + c] += g * x.data()[c];
                        }
                    }
                }
                for c in 0..n {
                    let mut acc = T::zero();
                    for r in 0..m {
                        acc = acc + w.data()[r * n + c] * adj.data()[r];
                    }
                    self.adjoints[input.0].data_mut()[c] += acc;
                }
            }
            Op::Conv2dFixedKernel { kernel, input } => {
                // Transpose of the padded read pattern: every clamped read in
                // the forward pass folds its weight back onto the cell it
                // actually read, so border cells accumulate extra terms.
                let input = *input;
                let kernel = *kernel;
                let (rows, cols) = self.values[input.0].shape();
                let adj_in = self.adjoints[input.0].data_mut();
                for r in 0..rows {
                    for c in 0..cols {
                        let g = adj.get(r, c);
                        if g == T::zero() {
                            continue;
                        }
                        for (a, krow) in kernel.iter().enumerate() {
                            let sr = (r as isize + a as isize - 1).clamp(0, rows as isize - 1)
                                as usize;
                            for (b, &kv) in krow.iter().enumerate() {
                                let sc = (c as isize + b as isize - 1)
                                    .clamp(0, cols as isize - 1)
                                    as usize;
                                adj_in[sr * cols + sc] += kv * g;
                            }
                        }
                    }
                }
            }
            Op::Elementwise { kind, input } => {
                let input = *input;
                let kind = *kind;
                let x = self.values[input.0].clone();
                let y = self.values[i].clone();
                let adj_in = self.adjoints[input.0].data_mut();
                for (k, g) in adj.data().iter().enumerate() {
                    let d = match kind {
                        Activation::Tanh => T::one() - y.data()[k] * y.data()[k],
                        // Subgradient at the kink is zero.
                        Activation::Relu => {
                            if x.data()[k] > T::zero() {
                                T::one()
                            } else {
                                T::zero()
                            }
                        }
                        Activation::Sigmoid => y.data()[k] * (T::one() - y.data()[k]),
                        Activation::Square => T::of(2.0) * x.data()[k],
                    };
                    adj_in[k] += *g * d;
                }
            }
            Op::Hadamard { lhs, rhs } => {
                let (lhs, rhs) = (*lhs, *rhs);
                let a = self.values[lhs.0].clone();
                let b = self.values[rhs.0].clone();
                for (k, g) in adj.data().iter().enumerate() {
                    self.adjoints[lhs.0].data_mut()[k] += *g * b.data()[k];
                    self.adjoints[rhs.0].data_mut()[k] += *g * a.data()[k];
                }
            }
            Op::Add { lhs, rhs } => {
                let (lhs, rhs) = (*lhs, *rhs);
                for (k, g) in adj.data().iter().enumerate() {
                    self.adjoints[lhs.0].data_mut()[k] += *g;
                    self.adjoints[rhs.0].data_mut()[k] += *g;
                }
            }
            Op::Scale { factor, input } => {
                let (factor, input) = (*factor, *input);
                for (k, g) in adj.data().iter().enumerate() {
                    self.adjoints[input.0].data_mut()[k] += *g * factor;
                }
            }
            Op::ShiftSum { offsets, input } => {
                let input = *input;
                let offsets = offsets.clone();
                let (rows, cols) = self.values[input.0].shape();
                let adj_in = self.adjoints[input.0].data_mut();
                for &(di, dj) in &offsets {
                    for r in 0..rows {
                        let sr = (r as isize + di).rem_euclid(rows as isize) as usize;
                        for c in 0..cols {
                            let sc = (c as isize + dj).rem_euclid(cols as isize) as usize;
                            adj_in[sr * cols + sc] += adj.get(r, c);
                        }
                    }
                }
            }
            Op::ReduceSumSquares { input } => {
                let input = *input;
                let g = adj.as_scalar();
                let x = self.values[input.0].clone();
                let two = T::of(2.0);
                for (k, xv) in x.data().iter().enumerate() {
                    self.adjoints[input.0].data_mut()[k] += g * two * *xv;
                }
            }
            Op::ReduceMean { input } => {
                let input = *input;
                let g = adj.as_scalar();
                let n = T::of(self.values[input.0].len() as f64);
                let d = g / n;
                for v in self.adjoints[input.0].data_mut() {
                    *v += d;
                }
            }
        }
    }
}
