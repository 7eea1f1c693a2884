//! Reverse-mode tape over batched second-order jets.
//!
//! Every node stores a [`JetTensor`]; forward propagation of the jet
//! channels happens eagerly when a node is pushed, and [`Tape::gradient`]
//! walks the nodes backwards to accumulate `∂loss/∂θ` for the flat parameter
//! vector the tape was created with. Because the jet channels are part of
//! each node's value, parameter gradients of expressions built from input
//! derivatives (`u_t`, `u_xx`, ...) come out of the same sweep.

use crate::diff::tensor::JetTensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Smooth scalar functions applied elementwise to jets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryFn {
    Tanh,
    Sin,
    Exp,
    /// `1 / x`
    Recip,
    /// `x^(-1/2)`
    Rsqrt,
}

impl UnaryFn {
    /// `(f, f', f'', f''')` at `v`.
    #[inline]
    fn eval<T: Scalar>(self, v: T) -> (T, T, T, T) {
        match self {
            UnaryFn::Tanh => {
                let t = v.tanh();
                let s = T::one() - t * t;
                let two = T::lit(2.0);
                (
                    t,
                    s,
                    -two * t * s,
                    -two * s * (T::one() - T::lit(3.0) * t * t),
                )
            }
            UnaryFn::Sin => {
                let (s, c) = v.sin_cos();
                (s, c, -s, -c)
            }
            UnaryFn::Exp => {
                let e = v.exp();
                (e, e, e, e)
            }
            UnaryFn::Recip => {
                let r = v.recip();
                let r2 = r * r;
                (r, -r2, T::lit(2.0) * r2 * r, T::lit(-6.0) * r2 * r2)
            }
            UnaryFn::Rsqrt => {
                let r = v.sqrt().recip();
                let r3 = r * r * r;
                let r5 = r3 * r * r;
                (
                    r,
                    T::lit(-0.5) * r3,
                    T::lit(0.75) * r5,
                    T::lit(-1.875) * r5 * r * r,
                )
            }
        }
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Params {
        offset: usize,
    },
    Linear {
        x: Var,
        weight: usize,
        bias: Option<usize>,
    },
    Unary {
        x: Var,
        f: UnaryFn,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale {
        x: Var,
        c: T,
    },
    Shift {
        x: Var,
    },
    ColAffine {
        x: Var,
        gamma: usize,
        beta: usize,
    },
    Gather {
        x: Var,
        index: Vec<usize>,
        keep_jets: Vec<bool>,
    },
    SumRowGroups {
        x: Var,
        group: usize,
    },
    SumColGroups {
        x: Var,
        group: usize,
    },
    RepeatCols {
        x: Var,
        times: usize,
    },
    Channel {
        x: Var,
        col: usize,
        channel: usize,
    },
    Sum {
        x: Var,
    },
}

struct Node<T> {
    value: JetTensor<T>,
    op: Op<T>,
}

/// Append-only record of jet-tensor operations over a borrowed parameter
/// vector. One tape per forward pass; tapes are not shared between threads.
pub struct Tape<'p, T: Scalar> {
    params: &'p [T],
    nodes: Vec<Node<T>>,
    first_non_finite: Option<usize>,
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p [T]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            first_non_finite: None,
        }
    }

    pub fn params(&self) -> &'p [T] {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, v: Var) -> &JetTensor<T> {
        &self.nodes[v.0].value
    }

    /// Index of the first node holding a NaN/inf (tracked in debug builds only).
    pub fn first_non_finite(&self) -> Option<usize> {
        self.first_non_finite
    }

    fn push(&mut self, value: JetTensor<T>, op: Op<T>) -> Var {
        if cfg!(debug_assertions) && self.first_non_finite.is_none() && !value.all_finite() {
            self.first_non_finite = Some(self.nodes.len());
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Constant input (no parameter dependence).
    pub fn constant(&mut self, value: JetTensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Plain `rows × 1` constant column.
    pub fn constant_column(&mut self, values: Vec<T>) -> Var {
        let n = values.len();
        self.constant(JetTensor::plain(n, 1, values))
    }

    /// `θ[offset..offset + len]` as a plain `1 × len` row.
    pub fn param_slice(&mut self, offset: usize, len: usize) -> Var {
        let data = self.params[offset..offset + len].to_vec();
        self.push(JetTensor::plain(1, len, data), Op::Params { offset })
    }

    /// `y = x Wᵀ + b`, with `W` stored row-major `out × in` at `weight` and the
    /// bias (if any) added to the value channel only.
    pub fn linear(&mut self, x: Var, weight: usize, out: usize, bias: Option<usize>) -> Var {
        let xt = self.value(x);
        let (rows, input, ch) = (xt.rows(), xt.cols(), xt.channels());
        let w = &self.params[weight..weight + out * input];
        let mut y = JetTensor::zeros(rows, out, ch);
        let m = rows * ch;
        T::gemm_acc(
            m,
            input,
            out,
            xt.data(),
            input as isize,
            1,
            w,
            1,
            input as isize,
            y.data_mut(),
            out as isize,
            1,
        );
        if let Some(b) = bias {
            let b = &self.params[b..b + out];
            for r in 0..rows {
                for (yv, bv) in y.channel_mut(r, 0).iter_mut().zip(b) {
                    *yv = *yv + *bv;
                }
            }
        }
        self.push(y, Op::Linear { x, weight, bias })
    }

    pub fn unary(&mut self, x: Var, f: UnaryFn) -> Var {
        let xt = self.value(x);
        let (rows, cols, ch) = (xt.rows(), xt.cols(), xt.channels());
        let d = xt.jet_dim();
        let mut y = JetTensor::zeros(rows, cols, ch);
        let mut f1 = vec![T::zero(); cols];
        let mut f2 = vec![T::zero(); cols];
        for r in 0..rows {
            {
                let v = xt.channel(r, 0);
                let yv = y.channel_mut(r, 0);
                for c in 0..cols {
                    let (a, b, cc, _) = f.eval(v[c]);
                    yv[c] = a;
                    f1[c] = b;
                    f2[c] = cc;
                }
            }
            for i in 0..d {
                let g = xt.channel(r, 1 + i);
                let h = xt.channel(r, 1 + d + i);
                for c in 0..cols {
                    let gi = g[c];
                    y.channel_mut(r, 1 + i)[c] = f1[c] * gi;
                    y.channel_mut(r, 1 + d + i)[c] = f2[c] * gi * gi + f1[c] * h[c];
                }
            }
        }
        self.push(y, Op::Unary { x, f })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, UnaryFn::Tanh)
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.unary(x, UnaryFn::Sin)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, UnaryFn::Exp)
    }

    pub fn recip(&mut self, x: Var) -> Var {
        self.unary(x, UnaryFn::Recip)
    }

    pub fn rsqrt(&mut self, x: Var) -> Var {
        self.unary(x, UnaryFn::Rsqrt)
    }

    fn assert_same(&self, a: Var, b: Var, what: &str) {
        assert!(
            self.value(a).same_shape(self.value(b)),
            "{what}: shape mismatch {:?} vs {:?}",
            (
                self.value(a).rows(),
                self.value(a).cols(),
                self.value(a).channels()
            ),
            (
                self.value(b).rows(),
                self.value(b).cols(),
                self.value(b).channels()
            ),
        );
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.assert_same(a, b, "add");
        let mut y = self.value(a).clone();
        for (yv, bv) in y.data_mut().iter_mut().zip(self.value(b).data()) {
            *yv = *yv + *bv;
        }
        self.push(y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.assert_same(a, b, "sub");
        let mut y = self.value(a).clone();
        for (yv, bv) in y.data_mut().iter_mut().zip(self.value(b).data()) {
            *yv = *yv - *bv;
        }
        self.push(y, Op::Sub(a, b))
    }

    /// Elementwise jet product (Leibniz rule to second order).
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.assert_same(a, b, "mul");
        let (at, bt) = (self.value(a), self.value(b));
        let (rows, cols, ch) = (at.rows(), at.cols(), at.channels());
        let d = at.jet_dim();
        let mut y = JetTensor::zeros(rows, cols, ch);
        let two = T::lit(2.0);
        for r in 0..rows {
            let (av, bv) = (at.channel(r, 0), bt.channel(r, 0));
            for c in 0..cols {
                y.channel_mut(r, 0)[c] = av[c] * bv[c];
            }
            for i in 0..d {
                let (ag, bg) = (at.channel(r, 1 + i), bt.channel(r, 1 + i));
                let (ah, bh) = (at.channel(r, 1 + d + i), bt.channel(r, 1 + d + i));
                for c in 0..cols {
                    y.channel_mut(r, 1 + i)[c] = ag[c] * bv[c] + av[c] * bg[c];
                    y.channel_mut(r, 1 + d + i)[c] =
                        ah[c] * bv[c] + two * ag[c] * bg[c] + av[c] * bh[c];
                }
            }
        }
        self.push(y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let mut y = self.value(x).clone();
        for v in y.data_mut() {
            *v = *v * c;
        }
        self.push(y, Op::Scale { x, c })
    }

    /// Adds a constant `rows × cols` table to the value channel.
    pub fn shift(&mut self, x: Var, values: &[T]) -> Var {
        let mut y = self.value(x).clone();
        let cols = y.cols();
        assert_eq!(values.len(), y.rows() * cols, "shift: size mismatch");
        for r in 0..y.rows() {
            for (yv, s) in y
                .channel_mut(r, 0)
                .iter_mut()
                .zip(&values[r * cols..(r + 1) * cols])
            {
                *yv = *yv + *s;
            }
        }
        self.push(y, Op::Shift { x })
    }

    /// Adds the same constant to every value.
    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        let n = self.value(x).rows() * self.value(x).cols();
        self.shift(x, &vec![c; n])
    }

    /// Per-column gain on all channels plus per-column bias on the value channel.
    pub fn col_affine(&mut self, x: Var, gamma: usize, beta: usize) -> Var {
        let xt = self.value(x);
        let (rows, cols, ch) = (xt.rows(), xt.cols(), xt.channels());
        let g = &self.params[gamma..gamma + cols];
        let b = &self.params[beta..beta + cols];
        let mut y = xt.clone();
        for r in 0..rows {
            for c in 0..ch {
                for (yv, gv) in y.channel_mut(r, c).iter_mut().zip(g) {
                    *yv = *yv * *gv;
                }
            }
            for (yv, bv) in y.channel_mut(r, 0).iter_mut().zip(b) {
                *yv = *yv + *bv;
            }
        }
        self.push(y, Op::ColAffine { x, gamma, beta })
    }

    /// Row gather. Rows with `keep_jets[r] == false` copy only the value
    /// channel, so downstream derivative channels treat them as constants
    /// with respect to the seeded coordinates while parameter gradients still
    /// flow through their values.
    pub fn gather(&mut self, x: Var, index: Vec<usize>, keep_jets: Vec<bool>) -> Var {
        assert_eq!(
            index.len(),
            keep_jets.len(),
            "gather: index/mask length mismatch"
        );
        let xt = self.value(x);
        let (cols, ch) = (xt.cols(), xt.channels());
        let mut y = JetTensor::zeros(index.len(), cols, ch);
        for (r, (&src, &keep)) in index.iter().zip(&keep_jets).enumerate() {
            if keep {
                y.row_mut(r).copy_from_slice(xt.row(src));
            } else {
                y.channel_mut(r, 0).copy_from_slice(xt.channel(src, 0));
            }
        }
        self.push(
            y,
            Op::Gather {
                x,
                index,
                keep_jets,
            },
        )
    }

    /// Sums consecutive blocks of `group` rows.
    pub fn sum_row_groups(&mut self, x: Var, group: usize) -> Var {
        let xt = self.value(x);
        assert!(
            group > 0 && xt.rows().is_multiple_of(group),
            "sum_row_groups: rows not divisible"
        );
        let mut y = JetTensor::zeros(xt.rows() / group, xt.cols(), xt.channels());
        for r in 0..xt.rows() {
            let q = r / group;
            for (yv, xv) in y.row_mut(q).iter_mut().zip(xt.row(r)) {
                *yv = *yv + *xv;
            }
        }
        self.push(y, Op::SumRowGroups { x, group })
    }

    /// Sums consecutive blocks of `group` columns.
    pub fn sum_col_groups(&mut self, x: Var, group: usize) -> Var {
        let xt = self.value(x);
        assert!(
            group > 0 && xt.cols().is_multiple_of(group),
            "sum_col_groups: cols not divisible"
        );
        let out = xt.cols() / group;
        let mut y = JetTensor::zeros(xt.rows(), out, xt.channels());
        for r in 0..xt.rows() {
            for c in 0..xt.channels() {
                let src = xt.channel(r, c);
                let dst = y.channel_mut(r, c);
                for (col, v) in src.iter().enumerate() {
                    dst[col / group] = dst[col / group] + *v;
                }
            }
        }
        self.push(y, Op::SumColGroups { x, group })
    }

    /// Repeats every column `times` times (`out[col] = in[col / times]`).
    pub fn repeat_cols(&mut self, x: Var, times: usize) -> Var {
        let xt = self.value(x);
        let mut y = JetTensor::zeros(xt.rows(), xt.cols() * times, xt.channels());
        for r in 0..xt.rows() {
            for c in 0..xt.channels() {
                let src = xt.channel(r, c);
                for (col, v) in y.channel_mut(r, c).iter_mut().enumerate() {
                    *v = src[col / times];
                }
            }
        }
        self.push(y, Op::RepeatCols { x, times })
    }

    /// One jet channel of one column as a plain `rows × 1` tensor.
    pub fn channel(&mut self, x: Var, col: usize, channel: usize) -> Var {
        let xt = self.value(x);
        assert!(
            col < xt.cols() && channel < xt.channels(),
            "channel: out of range"
        );
        let data = (0..xt.rows()).map(|r| xt.get(r, channel, col)).collect();
        let rows = xt.rows();
        self.push(
            JetTensor::plain(rows, 1, data),
            Op::Channel { x, col, channel },
        )
    }

    /// Sum of every entry of a plain tensor, as a `1 × 1` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let xt = self.value(x);
        assert!(xt.is_plain(), "sum: expects a plain tensor");
        let s = xt.data().iter().copied().sum();
        self.push(JetTensor::plain(1, 1, vec![s]), Op::Sum { x })
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> T {
        let t = self.value(v);
        assert!(t.rows() == 1 && t.cols() == 1, "scalar: node is not 1 × 1");
        t.value(0, 0)
    }

    /// `∂v/∂θ` for a `1 × 1` node.
    pub fn gradient(&self, v: Var) -> Result<Vec<T>> {
        let t = self.value(v);
        if t.rows() != 1 || t.cols() != 1 {
            return Err(Error::usage(format!(
                "gradient requires a 1 × 1 node, got {} × {}",
                t.rows(),
                t.cols()
            )));
        }
        Ok(self.backward(v, 0))
    }

    /// `∂/∂θ` of the value at `(row, col)` of node `v`.
    pub fn gradient_of_entry(&self, v: Var, row: usize, col: usize) -> Result<Vec<T>> {
        let t = self.value(v);
        if row >= t.rows() || col >= t.cols() {
            return Err(Error::usage("gradient_of_entry: index out of range"));
        }
        Ok(self.backward(v, (row * t.channels()) * t.cols() + col))
    }

    fn backward(&self, root: Var, seed_at: usize) -> Vec<T> {
        let mut grad = vec![T::zero(); self.params.len()];
        let mut adj: Vec<Option<Vec<T>>> = Vec::with_capacity(root.0 + 1);
        adj.resize_with(root.0 + 1, || None);
        let mut seed = vec![T::zero(); self.nodes[root.0].value.data().len()];
        seed[seed_at] = T::one();
        adj[root.0] = Some(seed);

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            self.backward_node(node, &g, &mut adj, &mut grad);
        }
        grad
    }

    fn backward_node(&self, node: &Node<T>, gy: &[T], adj: &mut [Option<Vec<T>>], grad: &mut [T]) {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Params { offset } => {
                for (g, a) in grad[*offset..*offset + gy.len()].iter_mut().zip(gy) {
                    *g = *g + *a;
                }
            }
            Op::Linear { x, weight, bias } => {
                let xt = self.value(*x);
                let (rows, input, ch) = (xt.rows(), xt.cols(), xt.channels());
                let out = y.cols();
                let m = rows * ch;
                let w = &self.params[*weight..*weight + out * input];
                {
                    let gx = slot(adj, *x, xt.data().len());
                    T::gemm_acc(
                        m,
                        out,
                        input,
                        gy,
                        out as isize,
                        1,
                        w,
                        input as isize,
                        1,
                        gx,
                        input as isize,
                        1,
                    );
                }
                T::gemm_acc(
                    out,
                    m,
                    input,
                    gy,
                    1,
                    out as isize,
                    xt.data(),
                    input as isize,
                    1,
                    &mut grad[*weight..*weight + out * input],
                    input as isize,
                    1,
                );
                if let Some(b) = bias {
                    let gb = &mut grad[*b..*b + out];
                    for r in 0..rows {
                        let start = r * ch * out;
                        for (g, a) in gb.iter_mut().zip(&gy[start..start + out]) {
                            *g = *g + *a;
                        }
                    }
                }
            }
            Op::Unary { x, f } => {
                let xt = self.value(*x);
                let (rows, cols, ch) = (xt.rows(), xt.cols(), xt.channels());
                let d = xt.jet_dim();
                let gx = slot(adj, *x, xt.data().len());
                let two = T::lit(2.0);
                let idx = |r: usize, c: usize, col: usize| (r * ch + c) * cols + col;
                for r in 0..rows {
                    for col in 0..cols {
                        let v = xt.get(r, 0, col);
                        let (_, f1, f2, f3) = f.eval(v);
                        let mut acc_v = f1 * gy[idx(r, 0, col)];
                        for i in 0..d {
                            let g = xt.get(r, 1 + i, col);
                            let h = xt.get(r, 1 + d + i, col);
                            let yg = gy[idx(r, 1 + i, col)];
                            let yh = gy[idx(r, 1 + d + i, col)];
                            acc_v = acc_v + f2 * g * yg + (f3 * g * g + f2 * h) * yh;
                            let k = idx(r, 1 + i, col);
                            gx[k] = gx[k] + f1 * yg + two * f2 * g * yh;
                            let k = idx(r, 1 + d + i, col);
                            gx[k] = gx[k] + f1 * yh;
                        }
                        let k = idx(r, 0, col);
                        gx[k] = gx[k] + acc_v;
                    }
                }
            }
            Op::Add(a, b) => {
                accumulate(slot(adj, *a, gy.len()), gy, T::one());
                accumulate(slot(adj, *b, gy.len()), gy, T::one());
            }
            Op::Sub(a, b) => {
                accumulate(slot(adj, *a, gy.len()), gy, T::one());
                accumulate(slot(adj, *b, gy.len()), gy, -T::one());
            }
            Op::Mul(a, b) => {
                let (at, bt) = (self.value(*a), self.value(*b));
                let ga = mul_adjoint(gy, at, bt);
                let gb = mul_adjoint(gy, bt, at);
                accumulate(slot(adj, *a, gy.len()), &ga, T::one());
                accumulate(slot(adj, *b, gy.len()), &gb, T::one());
            }
            Op::Scale { x, c } => accumulate(slot(adj, *x, gy.len()), gy, *c),
            Op::Shift { x } => accumulate(slot(adj, *x, gy.len()), gy, T::one()),
            Op::ColAffine { x, gamma, beta } => {
                let xt = self.value(*x);
                let (rows, cols, ch) = (xt.rows(), xt.cols(), xt.channels());
                let g = &self.params[*gamma..*gamma + cols];
                {
                    let gx = slot(adj, *x, gy.len());
                    for r in 0..rows {
                        for c in 0..ch {
                            let s = (r * ch + c) * cols;
                            for col in 0..cols {
                                gx[s + col] = gx[s + col] + gy[s + col] * g[col];
                            }
                        }
                    }
                }
                for r in 0..rows {
                    for c in 0..ch {
                        let s = (r * ch + c) * cols;
                        let xv = xt.channel(r, c);
                        for col in 0..cols {
                            grad[*gamma + col] = grad[*gamma + col] + gy[s + col] * xv[col];
                        }
                    }
                    let s = r * ch * cols;
                    for col in 0..cols {
                        grad[*beta + col] = grad[*beta + col] + gy[s + col];
                    }
                }
            }
            Op::Gather {
                x,
                index,
                keep_jets,
            } => {
                let xt = self.value(*x);
                let w = xt.cols() * xt.channels();
                let cols = xt.cols();
                let gx = slot(adj, *x, xt.data().len());
                for (r, (&src, &keep)) in index.iter().zip(keep_jets).enumerate() {
                    let n = if keep { w } else { cols };
                    let (dst, from) = (&mut gx[src * w..src * w + n], &gy[r * w..r * w + n]);
                    for (g, a) in dst.iter_mut().zip(from) {
                        *g = *g + *a;
                    }
                }
            }
            Op::SumRowGroups { x, group } => {
                let xt = self.value(*x);
                let w = xt.cols() * xt.channels();
                let gx = slot(adj, *x, xt.data().len());
                for r in 0..xt.rows() {
                    let q = r / group;
                    for (g, a) in gx[r * w..(r + 1) * w]
                        .iter_mut()
                        .zip(&gy[q * w..(q + 1) * w])
                    {
                        *g = *g + *a;
                    }
                }
            }
            Op::SumColGroups { x, group } => {
                let xt = self.value(*x);
                let (cols, out) = (xt.cols(), y.cols());
                let gx = slot(adj, *x, xt.data().len());
                for rc in 0..xt.rows() * xt.channels() {
                    for col in 0..cols {
                        gx[rc * cols + col] = gx[rc * cols + col] + gy[rc * out + col / group];
                    }
                }
            }
            Op::RepeatCols { x, times } => {
                let xt = self.value(*x);
                let (cols, out) = (xt.cols(), y.cols());
                let gx = slot(adj, *x, xt.data().len());
                for rc in 0..xt.rows() * xt.channels() {
                    for col in 0..out {
                        let k = rc * cols + col / times;
                        gx[k] = gx[k] + gy[rc * out + col];
                    }
                }
            }
            Op::Channel { x, col, channel } => {
                let xt = self.value(*x);
                let (cols, ch) = (xt.cols(), xt.channels());
                let gx = slot(adj, *x, xt.data().len());
                for (r, a) in gy.iter().enumerate() {
                    let k = (r * ch + channel) * cols + col;
                    gx[k] = gx[k] + *a;
                }
            }
            Op::Sum { x } => {
                let n = self.value(*x).data().len();
                let gx = slot(adj, *x, n);
                for g in gx.iter_mut() {
                    *g = *g + gy[0];
                }
            }
        }
    }
}

fn slot<T: Scalar>(adj: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut Vec<T> {
    adj[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

#[inline]
fn accumulate<T: Scalar>(dst: &mut [T], src: &[T], c: T) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *d + c * *s;
    }
}

/// Adjoint of `a` in `y = a · b` (jets), given `ȳ`.
fn mul_adjoint<T: Scalar>(gy: &[T], a: &JetTensor<T>, b: &JetTensor<T>) -> Vec<T> {
    let (rows, cols, ch) = (a.rows(), a.cols(), a.channels());
    let d = a.jet_dim();
    let mut ga = vec![T::zero(); gy.len()];
    let two = T::lit(2.0);
    let idx = |r: usize, c: usize| (r * ch + c) * cols;
    for r in 0..rows {
        let bv = b.channel(r, 0);
        let (v0, vyv) = (idx(r, 0), &gy[idx(r, 0)..idx(r, 0) + cols]);
        for col in 0..cols {
            ga[v0 + col] = vyv[col] * bv[col];
        }
        for i in 0..d {
            let (bg, bh) = (b.channel(r, 1 + i), b.channel(r, 1 + d + i));
            let (gi, hi) = (idx(r, 1 + i), idx(r, 1 + d + i));
            for col in 0..cols {
                let yg = gy[gi + col];
                let yh = gy[hi + col];
                ga[v0 + col] = ga[v0 + col] + yg * bg[col] + yh * bh[col];
                ga[gi + col] = yg * bv[col] + two * yh * bg[col];
                ga[hi + col] = yh * bv[col];
            }
        }
    }
    ga
}
