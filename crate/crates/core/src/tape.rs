//! Reverse-mode autodiff over 2-D tensors.
//!
//! A [`Tape`] records every operation of a forward pass; [`Tape::backward`]
//! walks the record in reverse and accumulates gradients. Nodes are append
//! only, so a parent always precedes its consumers and one reverse sweep
//! suffices. Parameters lease onto a tape once per id: every reuse of a
//! shared parameter (e.g. across the frames of a clip) accumulates into a
//! single gradient.
//!
//! Gradients of interior nodes are consumed during the sweep; only leaves
//! (constants, inputs, parameters) keep theirs, which is what optimizers
//! and finite-difference checks read.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;
use crate::tensor::{matmul, matmul_nt, matmul_tn, Tensor};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LeafKind {
    /// Not differentiated (frozen weights, data).
    Constant,
    /// Differentiated but not a parameter (used by gradient checks).
    Input,
    /// Parameter leased from a store, keyed by param id.
    Param(usize),
}

enum Op<R> {
    Leaf(LeafKind),
    Add(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    DivElem(Var, Var),
    /// y = mul * x + add, scalar coefficients.
    Affine(Var, R, R),
    MatMul(Var, Var),
    /// y = a * b^T
    MatMulNT(Var, Var),
    /// y = a^T * b
    MatMulTN(Var, Var),
    /// Broadcast a 1xN row onto every row of a.
    AddRow(Var, Var),
    Relu(Var),
    LeakyRelu(Var, R),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        inv_std: Vec<R>,
        mean: Vec<R>,
    },
    Embed {
        table: Var,
        indices: Vec<usize>,
    },
    SelectRow(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    RepeatRow(Var, usize),
    SumAll(Var),
    MeanAll(Var),
    Abs(Var),
    Ln(Var),
    Sqrt(Var),
    Clamp(Var, R, R),
    MaxPoolRows(Var, Vec<usize>),
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    BoxFilter(Var, usize),
    CosineSim {
        a: Var,
        b: Var,
        eps: R,
    },
    /// y = sum_k weights[k] * mats[k]; weights is 1xK.
    BlendStack {
        weights: Var,
        mats: Vec<Var>,
    },
    /// Merge columns of two matrices into the given column slots.
    ScatterCols {
        a: Var,
        b: Var,
        idx_a: Vec<usize>,
        idx_b: Vec<usize>,
    },
    Reshape(Var),
    Transpose(Var),
}

struct Node<R> {
    value: Tensor<R>,
    op: Op<R>,
}

pub struct Tape<R> {
    nodes: Vec<Node<R>>,
    params: BTreeMap<usize, Var>,
}

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<R> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<R>, op: Op<R>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<R>) -> Var {
        self.push(value, Op::Leaf(LeafKind::Constant))
    }

    pub fn input(&mut self, value: Tensor<R>) -> Var {
        self.push(value, Op::Leaf(LeafKind::Input))
    }

    /// Lease parameter `id` onto the tape; repeated leases return the same
    /// node so gradient contributions accumulate.
    pub fn param(&mut self, id: usize, value: impl FnOnce() -> Tensor<R>) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(value(), Op::Leaf(LeafKind::Param(id)));
        self.params.insert(id, v);
        v
    }

    pub fn scalar(&mut self, v: R) -> Var {
        self.constant(Tensor::scalar(v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.shape(), tb.shape(), "add shape");
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x + y)
            .collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.shape(), tb.shape(), "sub shape");
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x - y)
            .collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.shape(), tb.shape(), "mul shape");
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data);
        self.push(out, Op::MulElem(a, b))
    }

    pub fn div_elem(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.shape(), tb.shape(), "div shape");
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x / y)
            .collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data);
        self.push(out, Op::DivElem(a, b))
    }

    pub fn affine(&mut self, a: Var, mul: R, add: R) -> Var {
        let out = self.nodes[a.0].value.map(|x| mul * x + add);
        self.push(out, Op::Affine(a, mul, add))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.affine(a, -R::one(), R::zero())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = matmul(&self.nodes[a.0].value, &self.nodes[b.0].value);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let out = matmul_nt(&self.nodes[a.0].value, &self.nodes[b.0].value);
        self.push(out, Op::MatMulNT(a, b))
    }

    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Var {
        let out = matmul_tn(&self.nodes[a.0].value, &self.nodes[b.0].value);
        self.push(out, Op::MatMulTN(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (ta, tr) = (&self.nodes[a.0].value, &self.nodes[row.0].value);
        assert_eq!(tr.rows(), 1, "add_row needs a 1xN row");
        assert_eq!(ta.cols(), tr.cols(), "add_row width");
        let mut out = ta.clone();
        for r in 0..out.rows() {
            for (o, &v) in out.row_mut(r).iter_mut().zip(tr.data()) {
                *o = *o + v;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.map(|x| x.max(R::zero()));
        self.push(out, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: R) -> Var {
        let out = self.nodes[a.0]
            .value
            .map(|x| if x > R::zero() { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    /// Numerically stable softmax over each row (max-shifted, Kahan sum).
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let ta = &self.nodes[a.0].value;
        let mut out = Tensor::zeros(ta.rows(), ta.cols());
        for r in 0..ta.rows() {
            let row = ta.row(r);
            let mut m = row[0];
            for &x in row {
                m = m.max(x);
            }
            let orow = out.row_mut(r);
            let mut sum = R::zero();
            let mut comp = R::zero();
            for (o, &x) in orow.iter_mut().zip(row) {
                let e = (x - m).exp();
                *o = e;
                let y = e - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            for o in orow.iter_mut() {
                *o = *o / sum;
            }
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Row-wise layer norm with affine parameters (1xN gamma and beta).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: R) -> Var {
        let tx = &self.nodes[x.0].value;
        let tg = &self.nodes[gamma.0].value;
        let tb = &self.nodes[beta.0].value;
        assert_eq!(tg.shape(), (1, tx.cols()), "layer_norm gamma shape");
        assert_eq!(tb.shape(), (1, tx.cols()), "layer_norm beta shape");
        let n = R::from_usize(tx.cols());
        let mut out = Tensor::zeros(tx.rows(), tx.cols());
        let mut inv_std = Vec::with_capacity(tx.rows());
        let mut means = Vec::with_capacity(tx.rows());
        for r in 0..tx.rows() {
            let row = tx.row(r);
            let mut mean = R::zero();
            for &v in row {
                mean = mean + v;
            }
            mean = mean / n;
            let mut var = R::zero();
            for &v in row {
                let d = v - mean;
                var = var + d * d;
            }
            var = var / n;
            let istd = (var + eps).sqrt().recip();
            for (c, o) in out.row_mut(r).iter_mut().enumerate() {
                let xhat = (row[c] - mean) * istd;
                *o = xhat * tg.data()[c] + tb.data()[c];
            }
            inv_std.push(istd);
            means.push(mean);
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                inv_std,
                mean: means,
            },
        )
    }

    /// Gather rows of `table` at `indices`.
    pub fn embed(&mut self, table: Var, indices: &[usize]) -> Var {
        let tt = &self.nodes[table.0].value;
        let mut out = Tensor::zeros(indices.len(), tt.cols());
        for (r, &idx) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(tt.row(idx));
        }
        self.push(
            out,
            Op::Embed {
                table,
                indices: indices.to_vec(),
            },
        )
    }

    pub fn select_row(&mut self, a: Var, r: usize) -> Var {
        let ta = &self.nodes[a.0].value;
        let out = Tensor::row_vec(ta.row(r).to_vec());
        self.push(out, Op::SelectRow(a, r))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0].0].value.rows();
        let total: usize = parts.iter().map(|v| self.nodes[v.0].value.cols()).sum();
        let mut out = Tensor::zeros(rows, total);
        let mut at = 0;
        for &p in parts {
            let tp = &self.nodes[p.0].value;
            assert_eq!(tp.rows(), rows, "concat_cols row count");
            for r in 0..rows {
                out.row_mut(r)[at..at + tp.cols()].copy_from_slice(tp.row(r));
            }
            at += tp.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.nodes[parts[0].0].value.cols();
        let total: usize = parts.iter().map(|v| self.nodes[v.0].value.rows()).sum();
        let mut out = Tensor::zeros(total, cols);
        let mut at = 0;
        for &p in parts {
            let tp = &self.nodes[p.0].value;
            assert_eq!(tp.cols(), cols, "concat_rows col count");
            for r in 0..tp.rows() {
                out.row_mut(at + r).copy_from_slice(tp.row(r));
            }
            at += tp.rows();
        }
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn repeat_row(&mut self, a: Var, reps: usize) -> Var {
        let ta = &self.nodes[a.0].value;
        assert_eq!(ta.rows(), 1, "repeat_row needs a 1xN row");
        let mut out = Tensor::zeros(reps, ta.cols());
        for r in 0..reps {
            out.row_mut(r).copy_from_slice(ta.row(0));
        }
        self.push(out, Op::RepeatRow(a, reps))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let mut acc = R::zero();
        for &v in self.nodes[a.0].value.data() {
            acc = acc + v;
        }
        self.push(Tensor::scalar(acc), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let ta = &self.nodes[a.0].value;
        let n = R::from_usize(ta.len());
        let mut acc = R::zero();
        for &v in ta.data() {
            acc = acc + v;
        }
        self.push(Tensor::scalar(acc / n), Op::MeanAll(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.map(|x| x.abs());
        self.push(out, Op::Abs(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.map(|x| x.ln());
        self.push(out, Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.map(|x| x.sqrt());
        self.push(out, Op::Sqrt(a))
    }

    pub fn clamp(&mut self, a: Var, lo: R, hi: R) -> Var {
        let out = self.nodes[a.0].value.map(|x| x.max(lo).min(hi));
        self.push(out, Op::Clamp(a, lo, hi))
    }

    /// Column-wise max over rows: (M x N) -> (1 x N). Ties break to the
    /// first maximal row so the backward pass is deterministic.
    pub fn max_pool_rows(&mut self, a: Var) -> Var {
        let ta = &self.nodes[a.0].value;
        assert!(ta.rows() >= 1);
        let mut out = Tensor::row_vec(ta.row(0).to_vec());
        let mut argmax = vec![0usize; ta.cols()];
        for r in 1..ta.rows() {
            for (c, &v) in ta.row(r).iter().enumerate() {
                if v > out.data()[c] {
                    out.data_mut()[c] = v;
                    argmax[c] = r;
                }
            }
        }
        self.push(out, Op::MaxPoolRows(a, argmax))
    }

    /// 1-D convolution over time. `x` is (Lin x Cin) with time as rows,
    /// `w` is (Cout x kernel*Cin) laid out as kernel-major blocks of Cin,
    /// `b` is (1 x Cout). Zero padding.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, kernel: usize, stride: usize, pad: usize) -> Var {
        let tx = &self.nodes[x.0].value;
        let tw = &self.nodes[w.0].value;
        let tb = &self.nodes[b.0].value;
        let (lin, cin) = tx.shape();
        let cout = tw.rows();
        assert_eq!(tw.cols(), kernel * cin, "conv1d weight shape");
        assert_eq!(tb.shape(), (1, cout), "conv1d bias shape");
        assert!(lin + 2 * pad >= kernel, "conv1d input shorter than kernel");
        let lout = (lin + 2 * pad - kernel) / stride + 1;
        let mut out = Tensor::zeros(lout, cout);
        for to in 0..lout {
            for co in 0..cout {
                let wrow = tw.row(co);
                let mut acc = tb.data()[co];
                for dt in 0..kernel {
                    let ti = (to * stride + dt) as isize - pad as isize;
                    if ti < 0 || ti >= lin as isize {
                        continue;
                    }
                    let xrow = tx.row(ti as usize);
                    let wseg = &wrow[dt * cin..(dt + 1) * cin];
                    for (xv, wv) in xrow.iter().zip(wseg) {
                        acc = acc + *xv * *wv;
                    }
                }
                out.set(to, co, acc);
            }
        }
        self.push(
            out,
            Op::Conv1d {
                x,
                w,
                b,
                kernel,
                stride,
                pad,
            },
        )
    }

    /// Uniform win x win mean filter, valid windows only:
    /// (H x W) -> (H-win+1 x W-win+1).
    pub fn box_filter(&mut self, a: Var, win: usize) -> Var {
        let ta = &self.nodes[a.0].value;
        let (h, w) = ta.shape();
        assert!(win >= 1 && h >= win && w >= win, "box_filter window too large");
        let norm = R::from_usize(win * win).recip();
        let mut out = Tensor::zeros(h - win + 1, w - win + 1);
        for i in 0..=h - win {
            for j in 0..=w - win {
                let mut acc = R::zero();
                for di in 0..win {
                    let row = ta.row(i + di);
                    for &v in &row[j..j + win] {
                        acc = acc + v;
                    }
                }
                out.set(i, j, acc * norm);
            }
        }
        self.push(out, Op::BoxFilter(a, win))
    }

    /// Cosine similarity of two equal-length vectors with a floor on the
    /// norm product: y = (a . b) / max(|a||b|, eps).
    pub fn cosine_sim(&mut self, a: Var, b: Var, eps: R) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.len(), tb.len(), "cosine_sim length");
        let dot = crate::tensor::dot(ta.data(), tb.data());
        let na = crate::tensor::norm2(ta.data());
        let nb = crate::tensor::norm2(tb.data());
        let denom = (na * nb).max(eps);
        let y = dot / denom;
        self.push(Tensor::scalar(y), Op::CosineSim { a, b, eps })
    }

    /// Weighted sum of K same-shape tensors with weights from a 1xK vector.
    pub fn blend_stack(&mut self, weights: Var, mats: &[Var]) -> Var {
        let tw = &self.nodes[weights.0].value;
        assert_eq!(tw.rows(), 1, "blend weights must be 1xK");
        assert_eq!(tw.cols(), mats.len(), "blend weight count");
        let shape = self.nodes[mats[0].0].value.shape();
        let mut out = Tensor::zeros(shape.0, shape.1);
        for (k, &m) in mats.iter().enumerate() {
            let tm = &self.nodes[m.0].value;
            assert_eq!(tm.shape(), shape, "blend stack shapes");
            let wk = tw.data()[k];
            for (o, &v) in out.data_mut().iter_mut().zip(tm.data()) {
                *o = *o + wk * v;
            }
        }
        self.push(
            out,
            Op::BlendStack {
                weights,
                mats: mats.to_vec(),
            },
        )
    }

    /// Merge the columns of `a` and `b` into slots `idx_a` / `idx_b` of a
    /// wider matrix. The index sets must partition 0..(|a|+|b|).
    pub fn scatter_cols(&mut self, a: Var, b: Var, idx_a: &[usize], idx_b: &[usize]) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.rows(), tb.rows(), "scatter_cols row count");
        assert_eq!(ta.cols(), idx_a.len());
        assert_eq!(tb.cols(), idx_b.len());
        let cols = idx_a.len() + idx_b.len();
        let mut out = Tensor::zeros(ta.rows(), cols);
        for r in 0..ta.rows() {
            for (j, &c) in idx_a.iter().enumerate() {
                out.set(r, c, ta.get(r, j));
            }
            for (j, &c) in idx_b.iter().enumerate() {
                out.set(r, c, tb.get(r, j));
            }
        }
        self.push(
            out,
            Op::ScatterCols {
                a,
                b,
                idx_a: idx_a.to_vec(),
                idx_b: idx_b.to_vec(),
            },
        )
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let ta = &self.nodes[a.0].value;
        assert_eq!(ta.len(), rows * cols, "reshape size");
        let out = Tensor::from_vec(rows, cols, ta.data().to_vec());
        self.push(out, Op::Reshape(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.transpose();
        self.push(out, Op::Transpose(a))
    }

    /// Reverse sweep from a scalar loss. Returns per-leaf gradients.
    pub fn backward(&self, loss: Var) -> Grads<R> {
        assert_eq!(
            self.nodes[loss.0].value.shape(),
            (1, 1),
            "backward needs a scalar loss"
        );
        let mut grads: Vec<Option<Tensor<R>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(R::one()));
        for i in (0..=loss.0).rev() {
            if matches!(self.nodes[i].op, Op::Leaf(_)) {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop_node(i, &g, &mut grads);
        }
        let mut param_nodes = BTreeMap::new();
        for (&id, &var) in &self.params {
            param_nodes.insert(id, var);
        }
        Grads {
            by_node: grads,
            param_nodes,
        }
    }

    fn backprop_node(&self, i: usize, g: &Tensor<R>, grads: &mut Vec<Option<Tensor<R>>>) {
        let val = |v: Var| -> &Tensor<R> { &self.nodes[v.0].value };
        match &self.nodes[i].op {
            Op::Leaf(_) => unreachable!(),
            Op::Add(a, b) => {
                self.acc_into(grads, *a, g.clone());
                self.acc_into(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.acc_into(grads, *a, g.clone());
                self.acc_into(grads, *b, g.map(|x| -x));
            }
            Op::MulElem(a, b) => {
                let ga = elem_prod(g, val(*b));
                let gb = elem_prod(g, val(*a));
                self.acc_into(grads, *a, ga);
                self.acc_into(grads, *b, gb);
            }
            Op::DivElem(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let ga_data = g
                    .data()
                    .iter()
                    .zip(tb.data())
                    .map(|(&gv, &bv)| gv / bv)
                    .collect();
                let gb_data = g
                    .data()
                    .iter()
                    .zip(ta.data().iter().zip(tb.data()))
                    .map(|(&gv, (&av, &bv))| -gv * av / (bv * bv))
                    .collect();
                self.acc_into(grads, *a, Tensor::from_vec(g.rows(), g.cols(), ga_data));
                self.acc_into(grads, *b, Tensor::from_vec(g.rows(), g.cols(), gb_data));
            }
            Op::Affine(a, mul, _) => {
                let m = *mul;
                self.acc_into(grads, *a, g.map(|x| m * x));
            }
            Op::MatMul(a, b) => {
                if self.wants_grad(*a) {
                    self.acc_into(grads, *a, matmul_nt(g, val(*b)));
                }
                if self.wants_grad(*b) {
                    self.acc_into(grads, *b, matmul_tn(val(*a), g));
                }
            }
            Op::MatMulNT(a, b) => {
                if self.wants_grad(*a) {
                    self.acc_into(grads, *a, matmul(g, val(*b)));
                }
                if self.wants_grad(*b) {
                    self.acc_into(grads, *b, matmul_tn(g, val(*a)));
                }
            }
            Op::MatMulTN(a, b) => {
                if self.wants_grad(*a) {
                    self.acc_into(grads, *a, matmul_nt(val(*b), g));
                }
                if self.wants_grad(*b) {
                    self.acc_into(grads, *b, matmul(val(*a), g));
                }
            }
            Op::AddRow(a, row) => {
                self.acc_into(grads, *a, g.clone());
                self.acc_into(grads, *row, col_sums(g));
            }
            Op::Relu(a) => {
                let ta = val(*a);
                let data = g
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(&gv, &x)| if x > R::zero() { gv } else { R::zero() })
                    .collect();
                self.acc_into(grads, *a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::LeakyRelu(a, slope) => {
                let ta = val(*a);
                let s = *slope;
                let data = g
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(&gv, &x)| if x > R::zero() { gv } else { s * gv })
                    .collect();
                self.acc_into(grads, *a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[i].value;
                let mut gx = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let yrow = y.row(r);
                    let grow = g.row(r);
                    let mut s = R::zero();
                    for (&gv, &yv) in grow.iter().zip(yrow) {
                        s = s + gv * yv;
                    }
                    for (c, o) in gx.row_mut(r).iter_mut().enumerate() {
                        *o = yrow[c] * (grow[c] - s);
                    }
                }
                self.acc_into(grads, *a, gx);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                inv_std,
                mean,
            } => {
                let tx = val(*x);
                let tg = val(*gamma);
                let n = R::from_usize(tx.cols());
                let mut gx = Tensor::zeros(tx.rows(), tx.cols());
                let mut ggamma = Tensor::zeros(1, tx.cols());
                let mut gbeta = Tensor::zeros(1, tx.cols());
                for r in 0..tx.rows() {
                    let istd = inv_std[r];
                    let mu = mean[r];
                    let xrow = tx.row(r);
                    let grow = g.row(r);
                    // ghat = g * gamma; means of ghat and ghat*xhat
                    let mut mean_gh = R::zero();
                    let mut mean_ghx = R::zero();
                    for c in 0..tx.cols() {
                        let xhat = (xrow[c] - mu) * istd;
                        let gh = grow[c] * tg.data()[c];
                        mean_gh = mean_gh + gh;
                        mean_ghx = mean_ghx + gh * xhat;
                        ggamma.data_mut()[c] = ggamma.data()[c] + grow[c] * xhat;
                        gbeta.data_mut()[c] = gbeta.data()[c] + grow[c];
                    }
                    mean_gh = mean_gh / n;
                    mean_ghx = mean_ghx / n;
                    for (c, o) in gx.row_mut(r).iter_mut().enumerate() {
                        let xhat = (xrow[c] - mu) * istd;
                        let gh = grow[c] * tg.data()[c];
                        *o = istd * (gh - mean_gh - xhat * mean_ghx);
                    }
                }
                self.acc_into(grads, *x, gx);
                self.acc_into(grads, *gamma, ggamma);
                self.acc_into(grads, *beta, gbeta);
            }
            Op::Embed { table, indices } => {
                if self.wants_grad(*table) {
                    let tt = val(*table);
                    let mut gt = Tensor::zeros(tt.rows(), tt.cols());
                    for (r, &idx) in indices.iter().enumerate() {
                        for (o, &gv) in gt.row_mut(idx).iter_mut().zip(g.row(r)) {
                            *o = *o + gv;
                        }
                    }
                    self.acc_into(grads, *table, gt);
                }
            }
            Op::SelectRow(a, r) => {
                let ta = val(*a);
                let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                ga.row_mut(*r).copy_from_slice(g.row(0));
                self.acc_into(grads, *a, ga);
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for &p in parts {
                    let tp = val(p);
                    let mut gp = Tensor::zeros(tp.rows(), tp.cols());
                    for r in 0..tp.rows() {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[at..at + tp.cols()]);
                    }
                    at += tp.cols();
                    self.acc_into(grads, p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut at = 0;
                for &p in parts {
                    let tp = val(p);
                    let mut gp = Tensor::zeros(tp.rows(), tp.cols());
                    for r in 0..tp.rows() {
                        gp.row_mut(r).copy_from_slice(g.row(at + r));
                    }
                    at += tp.rows();
                    self.acc_into(grads, p, gp);
                }
            }
            Op::RepeatRow(a, reps) => {
                debug_assert_eq!(g.rows(), *reps, "repeat-row gradient height");
                self.acc_into(grads, *a, col_sums(g));
            }
            Op::SumAll(a) => {
                let ta = val(*a);
                let gv = g.item();
                self.acc_into(grads, *a, Tensor::from_fn(ta.rows(), ta.cols(), |_, _| gv));
            }
            Op::MeanAll(a) => {
                let ta = val(*a);
                let gv = g.item() / R::from_usize(ta.len());
                self.acc_into(grads, *a, Tensor::from_fn(ta.rows(), ta.cols(), |_, _| gv));
            }
            Op::Abs(a) => {
                let ta = val(*a);
                let data = g
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(&gv, &x)| {
                        if x > R::zero() {
                            gv
                        } else if x < R::zero() {
                            -gv
                        } else {
                            R::zero()
                        }
                    })
                    .collect();
                self.acc_into(grads, *a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::Ln(a) => {
                let ta = val(*a);
                let data = g
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(&gv, &x)| gv / x)
                    .collect();
                self.acc_into(grads, *a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::Sqrt(a) => {
                let y = &self.nodes[i].value;
                let half = R::from_f64(0.5);
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * half / yv)
                    .collect();
                self.acc_into(grads, *a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::Clamp(a, lo, hi) => {
                let ta = val(*a);
                let (lo, hi) = (*lo, *hi);
                let data = g
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(&gv, &x)| if x > lo && x < hi { gv } else { R::zero() })
                    .collect();
                self.acc_into(grads, *a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::MaxPoolRows(a, argmax) => {
                let ta = val(*a);
                let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                for (c, &r) in argmax.iter().enumerate() {
                    ga.set(r, c, g.data()[c]);
                }
                self.acc_into(grads, *a, ga);
            }
            Op::Conv1d {
                x,
                w,
                b,
                kernel,
                stride,
                pad,
            } => {
                let tx = val(*x);
                let tw = val(*w);
                let (lin, cin) = tx.shape();
                let cout = tw.rows();
                let lout = g.rows();
                // skip whichever operand is a frozen constant (the critics
                // ride the generator tape with constant weights)
                let need_x = self.wants_grad(*x);
                let need_w = self.wants_grad(*w);
                let mut gx = Tensor::zeros(lin, cin);
                let mut gw = Tensor::zeros(cout, kernel * cin);
                let mut gb = Tensor::zeros(1, cout);
                for to in 0..lout {
                    let grow = g.row(to);
                    for co in 0..cout {
                        let gv = grow[co];
                        gb.data_mut()[co] = gb.data()[co] + gv;
                        for dt in 0..*kernel {
                            let ti = (to * stride + dt) as isize - *pad as isize;
                            if ti < 0 || ti >= lin as isize {
                                continue;
                            }
                            let ti = ti as usize;
                            if need_w {
                                let xrow = tx.row(ti);
                                let gwrow = gw.row_mut(co);
                                for ci in 0..cin {
                                    gwrow[dt * cin + ci] = gwrow[dt * cin + ci] + gv * xrow[ci];
                                }
                            }
                            if need_x {
                                let wseg = &tw.row(co)[dt * cin..(dt + 1) * cin];
                                let gxrow = gx.row_mut(ti);
                                for ci in 0..cin {
                                    gxrow[ci] = gxrow[ci] + gv * wseg[ci];
                                }
                            }
                        }
                    }
                }
                self.acc_into(grads, *x, gx);
                self.acc_into(grads, *w, gw);
                self.acc_into(grads, *b, gb);
            }
            Op::BoxFilter(a, win) => {
                let ta = val(*a);
                let norm = R::from_usize(win * win).recip();
                let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                for i0 in 0..g.rows() {
                    for j0 in 0..g.cols() {
                        let gv = g.get(i0, j0) * norm;
                        for di in 0..*win {
                            let row = ga.row_mut(i0 + di);
                            for o in &mut row[j0..j0 + win] {
                                *o = *o + gv;
                            }
                        }
                    }
                }
                self.acc_into(grads, *a, ga);
            }
            Op::CosineSim { a, b, eps } => {
                let (ta, tb) = (val(*a), val(*b));
                let gv = g.item();
                let dot = crate::tensor::dot(ta.data(), tb.data());
                let na = crate::tensor::norm2(ta.data());
                let nb = crate::tensor::norm2(tb.data());
                let prod = na * nb;
                let (ga_data, gb_data): (Vec<R>, Vec<R>) = if prod > *eps {
                    let y = dot / prod;
                    let ga = ta
                        .data()
                        .iter()
                        .zip(tb.data())
                        .map(|(&av, &bv)| gv * (bv / prod - y * av / (na * na)))
                        .collect();
                    let gb = ta
                        .data()
                        .iter()
                        .zip(tb.data())
                        .map(|(&av, &bv)| gv * (av / prod - y * bv / (nb * nb)))
                        .collect();
                    (ga, gb)
                } else {
                    // Norm product floored: denominator is the constant eps.
                    let ga = tb.data().iter().map(|&bv| gv * bv / *eps).collect();
                    let gb = ta.data().iter().map(|&av| gv * av / *eps).collect();
                    (ga, gb)
                };
                self.acc_into(grads, *a, Tensor::from_vec(ta.rows(), ta.cols(), ga_data));
                self.acc_into(grads, *b, Tensor::from_vec(tb.rows(), tb.cols(), gb_data));
            }
            Op::BlendStack { weights, mats } => {
                let tw = val(*weights);
                let mut gw = Tensor::zeros(1, mats.len());
                for (k, &m) in mats.iter().enumerate() {
                    let tm = val(m);
                    let mut acc_k = R::zero();
                    for (&gv, &mv) in g.data().iter().zip(tm.data()) {
                        acc_k = acc_k + gv * mv;
                    }
                    gw.data_mut()[k] = acc_k;
                    if self.wants_grad(m) {
                        let wk = tw.data()[k];
                        self.acc_into(grads, m, g.map(|x| wk * x));
                    }
                }
                self.acc_into(grads, *weights, gw);
            }
            Op::ScatterCols { a, b, idx_a, idx_b } => {
                let (ta, tb) = (val(*a), val(*b));
                let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                let mut gb = Tensor::zeros(tb.rows(), tb.cols());
                for r in 0..ta.rows() {
                    for (j, &c) in idx_a.iter().enumerate() {
                        ga.set(r, j, g.get(r, c));
                    }
                    for (j, &c) in idx_b.iter().enumerate() {
                        gb.set(r, j, g.get(r, c));
                    }
                }
                self.acc_into(grads, *a, ga);
                self.acc_into(grads, *b, gb);
            }
            Op::Reshape(a) => {
                let ta = val(*a);
                let gr = Tensor::from_vec(ta.rows(), ta.cols(), g.data().to_vec());
                self.acc_into(grads, *a, gr);
            }
            Op::Transpose(a) => {
                self.acc_into(grads, *a, g.transpose());
            }
        }
    }
}

fn elem_prod<R: Real>(a: &Tensor<R>, b: &Tensor<R>) -> Tensor<R> {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x * y)
        .collect();
    Tensor::from_vec(a.rows(), a.cols(), data)
}

fn col_sums<R: Real>(g: &Tensor<R>) -> Tensor<R> {
    let mut out = Tensor::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, &v) in out.data_mut().iter_mut().zip(g.row(r)) {
            *o = *o + v;
        }
    }
    out
}

fn acc<R: Real>(grads: &mut [Option<Tensor<R>>], v: Var, delta: Tensor<R>) {
    match &mut grads[v.0] {
        Some(g) => {
            debug_assert_eq!(g.shape(), delta.shape());
            for (o, &d) in g.data_mut().iter_mut().zip(delta.data()) {
                *o = *o + d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

impl<R: Real> Tape<R> {
    /// Whether a node can ever need a gradient. Constant leaves cannot;
    /// skipping them keeps frozen-weight backward sweeps cheap.
    fn wants_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Leaf(LeafKind::Constant))
    }

    /// Accumulate `delta` into a node's gradient slot, dropping
    /// contributions aimed at constants.
    fn acc_into(&self, grads: &mut [Option<Tensor<R>>], v: Var, delta: Tensor<R>) {
        if self.wants_grad(v) {
            acc(grads, v, delta);
        }
    }
}

/// Gradients produced by [`Tape::backward`]. Interior node gradients are
/// consumed during the sweep; leaf gradients remain addressable.
pub struct Grads<R> {
    by_node: Vec<Option<Tensor<R>>>,
    param_nodes: BTreeMap<usize, Var>,
}

impl<R: Real> Grads<R> {
    /// Gradient with respect to a leaf var, if it received any.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<R>> {
        self.by_node.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient for a leased parameter id.
    pub fn param(&self, id: usize) -> Option<&Tensor<R>> {
        self.param_nodes.get(&id).and_then(|v| self.wrt(*v))
    }

    /// Iterate (param id, gradient) pairs in id order.
    pub fn params(&self) -> impl Iterator<Item = (usize, &Tensor<R>)> {
        self.param_nodes
            .iter()
            .filter_map(move |(&id, &v)| self.wrt(v).map(|g| (id, g)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_chain_backward() {
        // loss = sum(A*B); dA = ones * B^T, dB = A^T * ones
        let mut tape: Tape<f64> = Tape::new();
        let a = tape.input(Tensor::from_vec(2, 2, vec![1., 2., 3., 4.]));
        let b = tape.input(Tensor::from_vec(2, 2, vec![5., 6., 7., 8.]));
        let c = tape.matmul(a, b);
        let loss = tape.sum_all(c);
        // A*B = [[19, 22], [43, 50]], so the sum is 134.
        assert_eq!(tape.value(loss).item(), 134.0);
        let grads = tape.backward(loss);
        assert_eq!(grads.wrt(a).unwrap().data(), &[11., 15., 11., 15.]);
        assert_eq!(grads.wrt(b).unwrap().data(), &[4., 4., 6., 6.]);
    }

    #[test]
    fn shared_param_accumulates() {
        let mut tape: Tape<f64> = Tape::new();
        let p = tape.param(0, || Tensor::scalar(3.0));
        let p2 = tape.param(0, || unreachable!());
        assert_eq!(p, p2);
        let y = tape.mul_elem(p, p); // y = p^2, dy/dp = 2p = 6
        let loss = tape.sum_all(y);
        let grads = tape.backward(loss);
        assert_eq!(grads.param(0).unwrap().item(), 6.0);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.input(Tensor::from_vec(2, 3, vec![0., 10., -5., 1., 1., 1.]));
        let y = tape.softmax_rows(x);
        for r in 0..2 {
            let s: f64 = tape.value(y).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!((tape.value(y).get(1, 0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn clamp_blocks_gradient_outside() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.input(Tensor::row_vec(vec![-2.0, 0.5, 2.0]));
        let y = tape.clamp(x, 0.0, 1.0);
        let loss = tape.sum_all(y);
        let grads = tape.backward(loss);
        assert_eq!(grads.wrt(x).unwrap().data(), &[0.0, 1.0, 0.0]);
    }
}
