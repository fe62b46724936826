//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] is rebuilt for every forward pass. Nodes are appended in
//! evaluation order, so walking the tape backwards is a valid reverse
//! topological order and every node is visited exactly once.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    AddGrouped {
        x: Var,
        bias: Var,
        group_len: usize,
        broadcast: bool,
    },
    Pointwise {
        x: Var,
        deriv: Vec<f64>,
    },
    ConcatCols {
        a: Var,
        b: Var,
    },
    GatherRows {
        x: Var,
        index: Vec<usize>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mse {
        pred: Var,
        target: Var,
        mask: Option<Vec<bool>>,
        count: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every trainable leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a trainable leaf. Unreachable leaves hold zeros.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn wrt(&self, v: Var) -> &Tensor {
        self.get(v)
            .expect("gradient requested for a node that is not a trainable leaf")
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, Op::Leaf, false)
    }

    fn push_unchecked(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { op: name });
        }
        Ok(self.push_unchecked(value, op, requires_grad))
    }

    fn req(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// `x · Wᵀ + b` for a batch `x: [N × in]`, `W: [out × in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.value(x).shape(), self.value(w).shape());
        if xs.len() != 2 || ws.len() != 2 {
            return Err(Error::dim(
                "linear",
                format!("input {xs:?} and weight {ws:?} must both be matrices"),
            ));
        }
        let (n, inp, out) = (xs[0], xs[1], ws[0]);
        if ws[1] != inp {
            return Err(Error::dim(
                "linear",
                format!("weight {ws:?} does not accept input {xs:?}"),
            ));
        }
        let mut y = vec![0.0; n * out];
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.len() != out {
                return Err(Error::dim(
                    "linear",
                    format!("bias {:?} does not match weight {ws:?}", bv.shape()),
                ));
            }
            for row in y.chunks_exact_mut(out) {
                row.copy_from_slice(bv.data());
            }
        }
        let beta = if b.is_some() { 1.0 } else { 0.0 };
        gemm(
            n,
            inp,
            out,
            self.value(x).data(),
            false,
            self.value(w).data(),
            true,
            beta,
            &mut y,
        );
        let req = self.req(x) || self.req(w) || b.is_some_and(|b| self.req(b));
        let value = Tensor::new(vec![n, out], y)?;
        self.push("linear", value, Op::Linear { x, w, b }, req)
    }

    /// Adds row `g` of `bias: [G × d]` to every row of group `g` of `x`.
    ///
    /// `x` is either `[G·group_len × d]`, or `[group_len × d]` in which case it
    /// is broadcast to every group.
    pub fn add_grouped(&mut self, x: Var, bias: Var, group_len: usize) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let d = xv.cols();
        let groups = bv.rows();
        if bv.cols() != d || group_len == 0 {
            return Err(Error::dim(
                "add_grouped",
                format!("input {:?} vs bias {:?}", xv.shape(), bv.shape()),
            ));
        }
        let broadcast = if xv.rows() == group_len * groups {
            false
        } else if xv.rows() == group_len {
            true
        } else {
            return Err(Error::dim(
                "add_grouped",
                format!(
                    "input has {} rows, expected {group_len} or {}",
                    xv.rows(),
                    group_len * groups
                ),
            ));
        };
        let mut out = Vec::with_capacity(groups * group_len * d);
        for g in 0..groups {
            let brow = bv.row(g);
            for j in 0..group_len {
                let src = if broadcast { j } else { g * group_len + j };
                out.extend(xv.row(src).iter().zip(brow).map(|(a, b)| a + b));
            }
        }
        let req = self.req(x) || self.req(bias);
        let value = Tensor::new(vec![groups * group_len, d], out)?;
        self.push(
            "add_grouped",
            value,
            Op::AddGrouped {
                x,
                bias,
                group_len,
                broadcast,
            },
            req,
        )
    }

    /// Elementwise map; `f` returns `(value, derivative)` at each input.
    pub fn pointwise<F>(&mut self, x: Var, f: F) -> Result<Var>
    where
        F: Fn(f64) -> (f64, f64),
    {
        let xv = self.value(x);
        let mut out = Vec::with_capacity(xv.len());
        let mut deriv = Vec::with_capacity(xv.len());
        for &v in xv.data() {
            let (y, dy) = f(v);
            out.push(y);
            deriv.push(dy);
        }
        let value = Tensor::new(xv.shape().to_vec(), out)?;
        let req = self.req(x);
        self.push("pointwise", value, Op::Pointwise { x, deriv }, req)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(Error::dim(
                "concat_cols",
                format!("{:?} and {:?} differ in rows", av.shape(), bv.shape()),
            ));
        }
        let (rows, ca, cb) = (av.rows(), av.cols(), bv.cols());
        let mut out = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            out.extend_from_slice(av.row(r));
            out.extend_from_slice(bv.row(r));
        }
        let req = self.req(a) || self.req(b);
        let value = Tensor::new(vec![rows, ca + cb], out)?;
        self.push("concat_cols", value, Op::ConcatCols { a, b }, req)
    }

    /// Row `r` of the result is row `index[r]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: Vec<usize>) -> Result<Var> {
        let xv = self.value(x);
        let cols = xv.cols();
        if let Some(&bad) = index.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::dim(
                "gather_rows",
                format!("row {bad} out of range for {:?}", xv.shape()),
            ));
        }
        let mut out = Vec::with_capacity(index.len() * cols);
        for &i in &index {
            out.extend_from_slice(xv.row(i));
        }
        let req = self.req(x);
        let value = Tensor::new(vec![index.len(), cols], out)?;
        self.push("gather_rows", value, Op::GatherRows { x, index }, req)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let out = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(av.shape().to_vec(), out)?;
        let req = self.req(a) || self.req(b);
        self.push(name, value, op, req)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let xv = self.value(x);
        let value = Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|v| v * c).collect())?;
        let req = self.req(x);
        self.push("scale", value, Op::Scale(x, c), req)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        let req = self.req(x);
        self.push("sum", Tensor::scalar(s), Op::Sum(x), req)
    }

    /// Mean squared error over the entries where `mask` is true (all entries
    /// when no mask is given).
    pub fn mse(&mut self, pred: Var, target: Var, mask: Option<&[bool]>) -> Result<Var> {
        self.same_shape("mse", pred, target)?;
        let (pv, tv) = (self.value(pred), self.value(target));
        if let Some(m) = mask {
            if m.len() != pv.len() {
                return Err(Error::dim(
                    "mse",
                    format!("mask of length {} for {:?}", m.len(), pv.shape()),
                ));
            }
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, (p, t)) in pv.data().iter().zip(tv.data()).enumerate() {
            if mask.is_none_or(|m| m[i]) {
                total += (p - t) * (p - t);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::InvalidMask);
        }
        let req = self.req(pred) || self.req(target);
        let op = Op::Mse {
            pred,
            target,
            mask: mask.map(<[bool]>::to_vec),
            count,
        };
        self.push("mse", Tensor::scalar(total / count as f64), op, req)
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if !root_value.is_scalar() {
            return Err(Error::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(root_value.shape(), 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        for (i, node) in self.nodes.iter().enumerate() {
            let trainable_leaf = node.requires_grad && matches!(node.op, Op::Leaf);
            if trainable_leaf {
                if grads[i].is_none() {
                    grads[i] = Some(Tensor::zeros(node.value.shape()));
                }
            } else {
                grads[i] = None;
            }
        }
        for g in grads.iter().flatten() {
            if !g.is_finite() {
                return Err(Error::NonFiniteValue { op: "backward" });
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.req(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let shaped = |v: Var, data: Vec<f64>| {
            Tensor::new(self.value(v).shape().to_vec(), data).expect("gradient shape follows value shape")
        };
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, inp, out) = (xv.rows(), xv.cols(), wv.rows());
                if self.req(*x) {
                    let mut dx = vec![0.0; n * inp];
                    gemm(n, out, inp, g.data(), false, wv.data(), false, 0.0, &mut dx);
                    self.accumulate(grads, *x, shaped(*x, dx));
                }
                if self.req(*w) {
                    let mut dw = vec![0.0; out * inp];
                    gemm(out, n, inp, g.data(), true, xv.data(), false, 0.0, &mut dw);
                    self.accumulate(grads, *w, shaped(*w, dw));
                }
                if let Some(b) = b.filter(|b| self.req(*b)) {
                    let mut db = vec![0.0; out];
                    for row in g.data().chunks_exact(out) {
                        for (acc, v) in db.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    self.accumulate(grads, b, shaped(b, db));
                }
            }
            Op::AddGrouped {
                x,
                bias,
                group_len,
                broadcast,
            } => {
                let d = g.cols();
                let groups = self.value(*bias).rows();
                let block = group_len * d;
                if self.req(*x) {
                    let dx = if *broadcast {
                        let mut acc = vec![0.0; block];
                        for chunk in g.data().chunks_exact(block) {
                            for (a, v) in acc.iter_mut().zip(chunk) {
                                *a += v;
                            }
                        }
                        acc
                    } else {
                        g.data().to_vec()
                    };
                    self.accumulate(grads, *x, shaped(*x, dx));
                }
                if self.req(*bias) {
                    let mut db = vec![0.0; groups * d];
                    for (gi, chunk) in g.data().chunks_exact(block).enumerate() {
                        let dst = &mut db[gi * d..(gi + 1) * d];
                        for row in chunk.chunks_exact(d) {
                            for (a, v) in dst.iter_mut().zip(row) {
                                *a += v;
                            }
                        }
                    }
                    self.accumulate(grads, *bias, shaped(*bias, db));
                }
            }
            Op::Pointwise { x, deriv } => {
                let dx = g.data().iter().zip(deriv).map(|(a, b)| a * b).collect();
                self.accumulate(grads, *x, shaped(*x, dx));
            }
            Op::ConcatCols { a, b } => {
                let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                let mut da = Vec::with_capacity(g.rows() * ca);
                let mut db = Vec::with_capacity(g.rows() * cb);
                for row in g.data().chunks_exact(ca + cb) {
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                self.accumulate(grads, *a, shaped(*a, da));
                self.accumulate(grads, *b, shaped(*b, db));
            }
            Op::GatherRows { x, index } => {
                let xv = self.value(*x);
                let cols = xv.cols();
                let mut dx = vec![0.0; xv.len()];
                for (r, &src) in index.iter().enumerate() {
                    for (a, v) in dx[src * cols..(src + 1) * cols].iter_mut().zip(g.row(r)) {
                        *a += v;
                    }
                }
                self.accumulate(grads, *x, shaped(*x, dx));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                let neg = g.data().iter().map(|v| -v).collect();
                self.accumulate(grads, *b, shaped(*b, neg));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let da = g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                let db = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                self.accumulate(grads, *a, shaped(*a, da));
                self.accumulate(grads, *b, shaped(*b, db));
            }
            Op::Scale(x, c) => {
                let dx = g.data().iter().map(|v| v * c).collect();
                self.accumulate(grads, *x, shaped(*x, dx));
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                self.accumulate(grads, *x, shaped(*x, vec![g.data()[0]; n]));
            }
            Op::Mse {
                pred,
                target,
                mask,
                count,
            } => {
                let (pv, tv) = (self.value(*pred), self.value(*target));
                let k = 2.0 * g.data()[0] / *count as f64;
                let diff: Vec<f64> = pv
                    .data()
                    .iter()
                    .zip(tv.data())
                    .enumerate()
                    .map(|(i, (p, t))| {
                        if mask.as_ref().is_none_or(|m| m[i]) {
                            k * (p - t)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if self.req(*target) {
                    let neg = diff.iter().map(|v| -v).collect();
                    self.accumulate(grads, *target, shaped(*target, neg));
                }
                self.accumulate(grads, *pred, shaped(*pred, diff));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::matrix(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn linear_identity_weight() {
        let mut g = Graph::new();
        let w = g.param(m(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let b = g.param(Tensor::vector(vec![0.0, 0.0]));
        let x = g.constant(m(&[&[3.0, 4.0]]));
        let y = g.linear(x, w, Some(b)).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 4.0]);
    }

    #[test]
    fn linear_hand_evaluated() {
        let mut g = Graph::new();
        let w = g.param(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let b = g.param(Tensor::vector(vec![1.0, 1.0]));
        let x = g.constant(m(&[&[1.0, 1.0]]));
        let y = g.linear(x, w, Some(b)).unwrap();
        assert_eq!(g.value(y).data(), &[4.0, 8.0]);
    }

    #[test]
    fn linear_zero_weight_yields_bias_rows() {
        let mut g = Graph::new();
        let w = g.param(Tensor::zeros(&[2, 3]));
        let b = g.param(Tensor::vector(vec![5.0, 6.0]));
        let x = g.constant(m(&[&[1.0, -2.0, 7.0], &[0.5, 0.0, 9.0]]));
        let y = g.linear(x, w, Some(b)).unwrap();
        assert_eq!(g.value(y).data(), &[5.0, 6.0, 5.0, 6.0]);
    }

    #[test]
    fn linear_rejects_mismatched_operands() {
        let mut g = Graph::new();
        let w = g.param(Tensor::zeros(&[2, 3]));
        let x = g.constant(Tensor::zeros(&[4, 2]));
        let err = g.linear(x, w, None).unwrap_err();
        assert!(err.to_string().contains("weight"), "{err}");
        let x = g.constant(Tensor::zeros(&[4, 3]));
        let b = g.param(Tensor::zeros(&[3]));
        let err = g.linear(x, w, Some(b)).unwrap_err();
        assert!(err.to_string().contains("bias"), "{err}");
    }

    #[test]
    fn mse_examples() {
        let mut g = Graph::new();
        let p = g.param(Tensor::vector(vec![1.0, 1.0]));
        let t = g.constant(Tensor::vector(vec![0.0, 2.0]));
        let l = g.mse(p, t, None).unwrap();
        assert_eq!(g.value(l).data(), &[1.0]);

        let same = g.mse(p, p, None).unwrap();
        assert_eq!(g.value(same).data(), &[0.0]);

        let p2 = g.param(Tensor::vector(vec![1.0, 9.0]));
        let t2 = g.constant(Tensor::vector(vec![0.0, 0.0]));
        let l2 = g.mse(p2, t2, Some(&[true, false])).unwrap();
        assert_eq!(g.value(l2).data(), &[1.0]);

        assert!(matches!(g.mse(p2, t2, Some(&[false, false])), Err(Error::InvalidMask)));
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, -2.0, 3.5]));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_half_square_norm_is_identity() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, -2.0, 3.5]));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq).unwrap();
        let h = g.scale(s, 0.5).unwrap();
        let grads = g.backward(h).unwrap();
        assert_eq!(grads.wrt(x).data(), g.value(x).data());
    }

    #[test]
    fn unreachable_leaf_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, 2.0]));
        let unused = g.param(Tensor::vector(vec![4.0; 3]));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(unused).data(), &[0.0; 3]);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::NonScalarRoot(_))));
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, 0.0]));
        let err = g.pointwise(x, |v| (1.0 / v, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { .. }));
    }

    #[test]
    fn grouped_add_broadcasts_and_reduces() {
        let mut g = Graph::new();
        let x = g.param(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let bias = g.param(m(&[&[10.0, 20.0], &[100.0, 200.0], &[0.0, 0.0]]));
        let y = g.add_grouped(x, bias, 2).unwrap();
        assert_eq!(g.value(y).shape(), &[6, 2]);
        assert_eq!(g.value(y).row(2), &[101.0, 202.0]);
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).data(), &[3.0; 4]);
        assert_eq!(grads.wrt(bias).data(), &[2.0; 6]);
    }

    #[test]
    fn gather_scatters_gradient() {
        let mut g = Graph::new();
        let x = g.param(m(&[&[1.0], &[2.0]]));
        let y = g.gather_rows(x, vec![1, 1, 0]).unwrap();
        assert_eq!(g.value(y).data(), &[2.0, 2.0, 1.0]);
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).data(), &[1.0, 2.0]);
    }
}
