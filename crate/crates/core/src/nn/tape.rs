use std::sync::Arc;

use super::tensor::{ParamStore, Tensor};
use super::{NnError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, inv_std: Vec<f64> },
    TypedNorm { x: Var, scalars: usize, inv_std: Vec<f64>, vec_scale: Vec<f64> },
    Concat(Vec<Var>),
    SliceCols { x: Var, start: usize },
    SumAxis { x: Var, axis: usize },
    MeanAxis { x: Var, axis: usize },
    Clip { x: Var, lo: f64, hi: f64 },
    Minimum(Var, Var),
    GatherRows { x: Var, index: Arc<[usize]> },
    Rotate { x: Var, offset: usize, count: usize, rotations: Arc<[[f64; 9]]>, transpose: bool },
    RowDot(Var, Var),
    Reshape(Var),
    GroupSum { weights: Var, values: Var },
    ChannelMix { x: Var, w: Var },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
}

/// Record of executed primitives. Single-owner; one backward pass per tape.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Tape handles for every tensor of a [`ParamStore`], in store order.
#[derive(Debug, Clone)]
pub struct ParamVars(Vec<Var>);

impl ParamVars {
    pub fn get(&self, id: super::ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` when `v` did not influence
    /// the loss.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient for every parameter, zeros where the loss does not depend
    /// on it.
    pub fn for_params(&self, store: &ParamStore, vars: &ParamVars) -> Vec<Tensor> {
        store
            .tensors()
            .iter()
            .zip(vars.vars())
            .map(|(t, &v)| match self.get(v) {
                Some(g) => Tensor::new(t.shape().to_vec(), g.to_vec()).expect("gradient shape"),
                None => Tensor::zeros(t.shape()),
            })
            .collect()
    }
}

fn mismatch(op: &'static str, a: (usize, usize), b: (usize, usize)) -> NnError {
    NnError::ShapeMismatch {
        op,
        lhs: vec![a.0, a.1],
        rhs: vec![b.0, b.1],
    }
}

fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], beta: f64) {
    // a is m×k (stored k×m when a_t), b is k×n (stored n×k when b_t).
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn rotate3(m: &[f64; 9], v: &[f64], transpose: bool, out: &mut [f64]) {
    if transpose {
        for i in 0..3 {
            out[i] = m[i] * v[0] + m[3 + i] * v[1] + m[6 + i] * v[2];
        }
    } else {
        for i in 0..3 {
            out[i] = m[3 * i] * v[0] + m[3 * i + 1] * v[1] + m[3 * i + 2] * v[2];
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { value, rows, cols, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input block.
    pub fn leaf(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var> {
        if data.len() != rows * cols {
            return Err(mismatch("leaf", (rows, cols), (data.len(), 1)));
        }
        Ok(self.push(data, rows, cols, Op::Leaf))
    }

    pub fn tensor(&mut self, t: &Tensor) -> Var {
        let (r, c) = t.rows_cols();
        self.push(t.data().to_vec(), r, c, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.push(vec![v], 1, 1, Op::Leaf)
    }

    /// Loads every parameter of `store` as a leaf.
    pub fn load_params(&mut self, store: &ParamStore) -> ParamVars {
        ParamVars(store.tensors().iter().map(|t| self.tensor(t)).collect())
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::matrix(n.rows, n.cols, n.value.clone()).expect("node shape")
    }

    /// The single value of a 1×1 node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let n = &self.nodes[x.0];
        let (r, c) = (n.rows, n.cols);
        let value = n.value.iter().map(|&v| f(v)).collect();
        self.push(value, r, c, op)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, sa, sb));
        }
        Ok(sa)
    }

    fn zip(&mut self, op_name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (r, c) = self.same_shape(op_name, a, b)?;
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let value = va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect();
        Ok(self.push(value, r, c, op))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(mismatch("matmul", (m, k), (k2, n)));
        }
        let mut value = vec![0.0; m * n];
        gemm(m, k, n, &self.nodes[a.0].value, false, &self.nodes[b.0].value, false, &mut value, 0.0);
        Ok(self.push(value, m, n, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("minimum", a, b, f64::min, Op::Minimum(a, b))
    }

    fn row_broadcast(&mut self, name: &'static str, a: Var, row: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (r, c) = self.shape(a);
        let (rr, rc) = self.shape(row);
        if rr != 1 || rc != c {
            return Err(mismatch(name, (r, c), (rr, rc)));
        }
        let va = &self.nodes[a.0].value;
        let vr = &self.nodes[row.0].value;
        let mut value = Vec::with_capacity(r * c);
        for chunk in va.chunks(c.max(1)) {
            value.extend(chunk.iter().zip(vr).map(|(&x, &y)| f(x, y)));
        }
        Ok(self.push(value, r, c, op))
    }

    /// `a + row`, broadcasting a `1×c` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast("add_row", a, row, |x, y| x + y, Op::AddRow(a, row))
    }

    /// `a ⊙ row`, broadcasting a `1×c` row over every row of `a`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast("mul_row", a, row, |x, y| x * y, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |v| v * k, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |v| v + k, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a).expect("same var has same shape")
    }

    pub fn clip(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |v| v.clamp(lo, hi), Op::Clip { x: a, lo, hi })
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let n = &self.nodes[a.0];
        let (r, c) = (n.rows, n.cols);
        let mut value = n.value.clone();
        for row in value.chunks_mut(c.max(1)) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        self.push(value, r, c, Op::SoftmaxRows(a))
    }

    /// Row-wise normalization to zero mean and unit variance (no affine
    /// terms); `eps` is added to the variance.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let n = &self.nodes[a.0];
        let (r, c) = (n.rows, n.cols);
        let mut value = n.value.clone();
        let mut inv_std = Vec::with_capacity(r);
        for row in value.chunks_mut(c.max(1)) {
            inv_std.push(normalize_row(row, eps));
        }
        self.push(value, r, c, Op::LayerNorm { x: a, inv_std })
    }

    /// Layer norm aware of channel types: the first `scalars` columns are
    /// normalized conventionally; the remaining columns are 3-vectors scaled
    /// by one factor `1/sqrt(mean ‖v‖² + eps)` per row, so their directions
    /// are preserved.
    pub fn typed_norm(&mut self, a: Var, scalars: usize, eps: f64) -> Result<Var> {
        let n = &self.nodes[a.0];
        let (r, c) = (n.rows, n.cols);
        if scalars > c || (c - scalars) % 3 != 0 {
            return Err(mismatch("typed_norm", (r, c), (scalars, 3)));
        }
        let nvec = (c - scalars) / 3;
        let mut value = n.value.clone();
        let mut inv_std = Vec::with_capacity(r);
        let mut vec_scale = Vec::with_capacity(r);
        for row in value.chunks_mut(c.max(1)) {
            let (s, v) = row.split_at_mut(scalars);
            inv_std.push(if scalars > 0 { normalize_row(s, eps) } else { 0.0 });
            if nvec > 0 {
                let ms = v.iter().map(|x| x * x).sum::<f64>() / nvec as f64;
                let k = 1.0 / (ms + eps).sqrt();
                v.iter_mut().for_each(|x| *x *= k);
                vec_scale.push(k);
            } else {
                vec_scale.push(0.0);
            }
        }
        Ok(self.push(value, r, c, Op::TypedNorm { x: a, scalars, inv_std, vec_scale }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(mismatch("concat_cols", self.shape(parts[0]), s));
            }
            cols += s.1;
        }
        let mut value = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let n = &self.nodes[p.0];
                value.extend_from_slice(&n.value[r * n.cols..(r + 1) * n.cols]);
            }
        }
        Ok(self.push(value, rows, cols, Op::Concat(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + len > c {
            return Err(mismatch("slice_cols", (r, c), (start, len)));
        }
        let src = &self.nodes[a.0].value;
        let mut value = Vec::with_capacity(r * len);
        for row in 0..r {
            value.extend_from_slice(&src[row * c + start..row * c + start + len]);
        }
        Ok(self.push(value, r, len, Op::SliceCols { x: a, start }))
    }

    fn reduce(&mut self, a: Var, axis: usize, mean: bool) -> Result<Var> {
        let (r, c) = self.shape(a);
        let src = &self.nodes[a.0].value;
        let (value, shape) = match axis {
            0 => {
                let mut out = vec![0.0; c];
                for row in src.chunks(c.max(1)) {
                    out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                }
                if mean {
                    out.iter_mut().for_each(|o| *o /= r as f64);
                }
                (out, (1, c))
            }
            1 => {
                let out = src
                    .chunks(c.max(1))
                    .map(|row| {
                        let s: f64 = row.iter().sum();
                        if mean {
                            s / c as f64
                        } else {
                            s
                        }
                    })
                    .collect();
                (out, (r, 1))
            }
            _ => return Err(NnError::Invalid(format!("reduce: axis {axis} out of range for 2-D values"))),
        };
        let op = if mean { Op::MeanAxis { x: a, axis } } else { Op::SumAxis { x: a, axis } };
        Ok(self.push(value, shape.0, shape.1, op))
    }

    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, false)
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, true)
    }

    /// Sum of all entries as a 1×1 value.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.sum_axis(a, 1).expect("axis 1 valid");
        self.sum_axis(s, 0).expect("axis 0 valid")
    }

    /// Mean of all entries as a 1×1 value.
    pub fn mean(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let s = self.sum(a);
        self.scale(s, 1.0 / (r * c) as f64)
    }

    pub fn gather_rows(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let (r, c) = self.shape(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= r) {
            return Err(mismatch("gather_rows", (r, c), (bad, 0)));
        }
        let src = &self.nodes[a.0].value;
        let mut value = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            value.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let n = index.len();
        Ok(self.push(value, n, c, Op::GatherRows { x: a, index }))
    }

    /// Multiplies `count` consecutive 3-vector channels starting at column
    /// `offset` by a per-row constant rotation (or its transpose). Other
    /// columns pass through.
    pub fn rotate_vectors(
        &mut self,
        a: Var,
        offset: usize,
        count: usize,
        rotations: Arc<[[f64; 9]]>,
        transpose: bool,
    ) -> Result<Var> {
        let (r, c) = self.shape(a);
        if offset + 3 * count > c || rotations.len() != r {
            return Err(mismatch("rotate_vectors", (r, c), (rotations.len(), offset + 3 * count)));
        }
        let mut value = self.nodes[a.0].value.clone();
        let mut tmp = [0.0; 3];
        for (row, m) in rotations.iter().enumerate() {
            for ch in 0..count {
                let s = row * c + offset + 3 * ch;
                rotate3(m, &value[s..s + 3], transpose, &mut tmp);
                value[s..s + 3].copy_from_slice(&tmp);
            }
        }
        Ok(self.push(value, r, c, Op::Rotate { x: a, offset, count, rotations, transpose }))
    }

    /// Row-wise inner product, `r×1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("row_dot", a, b)?;
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let value = va
            .chunks(c.max(1))
            .zip(vb.chunks(c.max(1)))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
            .collect();
        Ok(self.push(value, r, 1, Op::RowDot(a, b)))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if r * c != rows * cols {
            return Err(mismatch("reshape", (r, c), (rows, cols)));
        }
        let value = self.nodes[a.0].value.clone();
        Ok(self.push(value, rows, cols, Op::Reshape(a)))
    }

    /// For weights `G×g` and values `(G·g)×D`, returns the `G×D` block whose
    /// row `i` is `Σ_j w[i,j] · values[i·g + j]`.
    pub fn weighted_group_sum(&mut self, weights: Var, values: Var) -> Result<Var> {
        let (gn, g) = self.shape(weights);
        let (vr, d) = self.shape(values);
        if gn * g != vr {
            return Err(mismatch("weighted_group_sum", (gn, g), (vr, d)));
        }
        let w = &self.nodes[weights.0].value;
        let v = &self.nodes[values.0].value;
        let mut value = vec![0.0; gn * d];
        for i in 0..gn {
            let out = &mut value[i * d..(i + 1) * d];
            for j in 0..g {
                let wij = w[i * g + j];
                let row = &v[(i * g + j) * d..(i * g + j + 1) * d];
                out.iter_mut().zip(row).for_each(|(o, x)| *o += wij * x);
            }
        }
        Ok(self.push(value, gn, d, Op::GroupSum { weights, values }))
    }

    /// Mixes 3-vector channels with a scalar matrix: for `x` of shape
    /// `M×(3k)` and `w` of shape `k×c`, output channel `j` is
    /// `Σ_q w[q,j] x_q`, applied identically to the x, y and z components.
    pub fn channel_mix(&mut self, x: Var, w: Var) -> Result<Var> {
        let (m, kc) = self.shape(x);
        let (k, c) = self.shape(w);
        if kc != 3 * k {
            return Err(mismatch("channel_mix", (m, kc), (k, c)));
        }
        let xv = &self.nodes[x.0].value;
        let wv = &self.nodes[w.0].value;
        let mut value = vec![0.0; m * 3 * c];
        for row in 0..m {
            let xr = &xv[row * kc..(row + 1) * kc];
            let out = &mut value[row * 3 * c..(row + 1) * 3 * c];
            for q in 0..k {
                let xq = &xr[3 * q..3 * q + 3];
                for j in 0..c {
                    let wq = wv[q * c + j];
                    out[3 * j] += wq * xq[0];
                    out[3 * j + 1] += wq * xq[1];
                    out[3 * j + 2] += wq * xq[2];
                }
            }
        }
        Ok(self.push(value, m, 3 * c, Op::ChannelMix { x, w }))
    }

    /// Reverse pass from a 1×1 `loss`. Consumes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(NnError::TapeExhausted);
        }
        let (r, c) = self.shape(loss);
        if r * c != 1 {
            return Err(NnError::NonScalarLoss(vec![r, c]));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let (rows, cols) = (node.rows, node.cols);
        let y = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        macro_rules! acc {
            ($v:expr) => {{
                let v: Var = $v;
                let n = self.nodes[v.0].value.len();
                grads[v.0].get_or_insert_with(|| vec![0.0; n])
            }};
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let n = cols;
                {
                    let bv = val(*b);
                    let ga = acc!(*a);
                    gemm(m, n, k, g, false, bv, true, ga, 1.0);
                }
                let av = val(*a);
                let gb = acc!(*b);
                gemm(k, m, n, av, true, g, false, gb, 1.0);
            }
            Op::Add(a, b) => {
                acc!(*a).iter_mut().zip(g).for_each(|(o, d)| *o += d);
                acc!(*b).iter_mut().zip(g).for_each(|(o, d)| *o += d);
            }
            Op::Sub(a, b) => {
                acc!(*a).iter_mut().zip(g).for_each(|(o, d)| *o += d);
                acc!(*b).iter_mut().zip(g).for_each(|(o, d)| *o -= d);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a).clone(), val(*b).clone());
                acc!(*a).iter_mut().zip(g.iter().zip(&bv)).for_each(|(o, (d, y))| *o += d * y);
                acc!(*b).iter_mut().zip(g.iter().zip(&av)).for_each(|(o, (d, x))| *o += d * x);
            }
            Op::Minimum(a, b) => {
                let (av, bv) = (val(*a).clone(), val(*b).clone());
                let ga = acc!(*a);
                for i in 0..g.len() {
                    if av[i] <= bv[i] {
                        ga[i] += g[i];
                    }
                }
                let gb = acc!(*b);
                for i in 0..g.len() {
                    if av[i] > bv[i] {
                        gb[i] += g[i];
                    }
                }
            }
            Op::AddRow(a, row) => {
                acc!(*a).iter_mut().zip(g).for_each(|(o, d)| *o += d);
                let gr = acc!(*row);
                for chunk in g.chunks(cols.max(1)) {
                    gr.iter_mut().zip(chunk).for_each(|(o, d)| *o += d);
                }
            }
            Op::MulRow(a, row) => {
                let rv = val(*row).clone();
                let av = val(*a).clone();
                let ga = acc!(*a);
                for (r, chunk) in g.chunks(cols.max(1)).enumerate() {
                    for (j, d) in chunk.iter().enumerate() {
                        ga[r * cols + j] += d * rv[j];
                    }
                }
                let gr = acc!(*row);
                for (r, chunk) in g.chunks(cols.max(1)).enumerate() {
                    for (j, d) in chunk.iter().enumerate() {
                        gr[j] += d * av[r * cols + j];
                    }
                }
            }
            Op::Scale(a, k) => {
                acc!(*a).iter_mut().zip(g).for_each(|(o, d)| *o += d * k);
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                acc!(*a).iter_mut().zip(g).for_each(|(o, d)| *o += d);
            }
            Op::Tanh(a) => {
                acc!(*a).iter_mut().zip(g.iter().zip(y)).for_each(|(o, (d, t))| *o += d * (1.0 - t * t));
            }
            Op::Exp(a) => {
                acc!(*a).iter_mut().zip(g.iter().zip(y)).for_each(|(o, (d, e))| *o += d * e);
            }
            Op::Log(a) => {
                let av = val(*a).clone();
                acc!(*a).iter_mut().zip(g.iter().zip(&av)).for_each(|(o, (d, x))| *o += d / x);
            }
            Op::Clip { x, lo, hi } => {
                let xv = val(*x).clone();
                acc!(*x).iter_mut().zip(g.iter().zip(&xv)).for_each(|(o, (d, v))| {
                    if *v >= *lo && *v <= *hi {
                        *o += d;
                    }
                });
            }
            Op::SoftmaxRows(a) => {
                let ga = acc!(*a);
                for r in 0..rows {
                    let yr = &y[r * cols..(r + 1) * cols];
                    let gr = &g[r * cols..(r + 1) * cols];
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for j in 0..cols {
                        ga[r * cols + j] += yr[j] * (gr[j] - dot);
                    }
                }
            }
            Op::LayerNorm { x, inv_std } => {
                let gx = acc!(*x);
                for r in 0..rows {
                    layer_norm_adjoint(
                        &y[r * cols..(r + 1) * cols],
                        &g[r * cols..(r + 1) * cols],
                        inv_std[r],
                        &mut gx[r * cols..(r + 1) * cols],
                    );
                }
            }
            Op::TypedNorm { x, scalars, inv_std, vec_scale } => {
                let s = *scalars;
                let nvec = (cols - s) / 3;
                let gx = acc!(*x);
                for r in 0..rows {
                    let yr = &y[r * cols..(r + 1) * cols];
                    let gr = &g[r * cols..(r + 1) * cols];
                    let out = &mut gx[r * cols..(r + 1) * cols];
                    if s > 0 {
                        layer_norm_adjoint(&yr[..s], &gr[..s], inv_std[r], &mut out[..s]);
                    }
                    if nvec > 0 {
                        // y = v k with k = (mean‖v‖² + eps)^(-1/2):
                        // dv = k dy − (k² / n) (dy · y) y
                        let k = vec_scale[r];
                        let dot: f64 = yr[s..].iter().zip(&gr[s..]).map(|(p, q)| p * q).sum();
                        let coef = k * dot / nvec as f64;
                        for j in s..cols {
                            out[j] += k * gr[j] - coef * yr[j];
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pc = self.shape(p).1;
                    let gp = acc!(p);
                    for r in 0..rows {
                        for j in 0..pc {
                            gp[r * pc + j] += g[r * cols + off + j];
                        }
                    }
                    off += pc;
                }
            }
            Op::SliceCols { x, start } => {
                let xc = self.shape(*x).1;
                let gx = acc!(*x);
                for r in 0..rows {
                    for j in 0..cols {
                        gx[r * xc + start + j] += g[r * cols + j];
                    }
                }
            }
            Op::SumAxis { x, axis } | Op::MeanAxis { x, axis } => {
                let (xr, xc) = self.shape(*x);
                let k = match (&node.op, axis) {
                    (Op::MeanAxis { .. }, 0) => 1.0 / xr as f64,
                    (Op::MeanAxis { .. }, _) => 1.0 / xc as f64,
                    _ => 1.0,
                };
                let gx = acc!(*x);
                for r in 0..xr {
                    for j in 0..xc {
                        let d = if *axis == 0 { g[j] } else { g[r] };
                        gx[r * xc + j] += d * k;
                    }
                }
            }
            Op::GatherRows { x, index } => {
                let gx = acc!(*x);
                for (r, &i) in index.iter().enumerate() {
                    for j in 0..cols {
                        gx[i * cols + j] += g[r * cols + j];
                    }
                }
            }
            Op::Rotate { x, offset, count, rotations, transpose } => {
                let gx = acc!(*x);
                let mut tmp = [0.0; 3];
                for (r, m) in rotations.iter().enumerate() {
                    let base = r * cols;
                    for j in 0..cols {
                        let in_vec = j >= *offset && j < offset + 3 * count;
                        if !in_vec {
                            gx[base + j] += g[base + j];
                        }
                    }
                    for ch in 0..*count {
                        let s = base + offset + 3 * ch;
                        rotate3(m, &g[s..s + 3], !transpose, &mut tmp);
                        for i in 0..3 {
                            gx[s + i] += tmp[i];
                        }
                    }
                }
            }
            Op::RowDot(a, b) => {
                let c = self.shape(*a).1;
                let (av, bv) = (val(*a).clone(), val(*b).clone());
                let ga = acc!(*a);
                for r in 0..rows {
                    for j in 0..c {
                        ga[r * c + j] += g[r] * bv[r * c + j];
                    }
                }
                let gb = acc!(*b);
                for r in 0..rows {
                    for j in 0..c {
                        gb[r * c + j] += g[r] * av[r * c + j];
                    }
                }
            }
            Op::GroupSum { weights, values } => {
                let (gn, gsz) = self.shape(*weights);
                let d = cols;
                let (wv, vv) = (val(*weights).clone(), val(*values).clone());
                let gw = acc!(*weights);
                for i in 0..gn {
                    let out = &g[i * d..(i + 1) * d];
                    for j in 0..gsz {
                        let row = &vv[(i * gsz + j) * d..(i * gsz + j + 1) * d];
                        gw[i * gsz + j] += out.iter().zip(row).map(|(p, q)| p * q).sum::<f64>();
                    }
                }
                let gv = acc!(*values);
                for i in 0..gn {
                    let out = &g[i * d..(i + 1) * d];
                    for j in 0..gsz {
                        let w = wv[i * gsz + j];
                        let dst = &mut gv[(i * gsz + j) * d..(i * gsz + j + 1) * d];
                        dst.iter_mut().zip(out).for_each(|(o, q)| *o += w * q);
                    }
                }
            }
            Op::ChannelMix { x, w } => {
                let (m, kc) = self.shape(*x);
                let (k, c) = self.shape(*w);
                let (xv, wv) = (val(*x).clone(), val(*w).clone());
                let gw = acc!(*w);
                for row in 0..m {
                    let xr = &xv[row * kc..(row + 1) * kc];
                    let gr = &g[row * 3 * c..(row + 1) * 3 * c];
                    for q in 0..k {
                        for j in 0..c {
                            gw[q * c + j] += xr[3 * q] * gr[3 * j] + xr[3 * q + 1] * gr[3 * j + 1] + xr[3 * q + 2] * gr[3 * j + 2];
                        }
                    }
                }
                let gx = acc!(*x);
                for row in 0..m {
                    let gr = &g[row * 3 * c..(row + 1) * 3 * c];
                    let out = &mut gx[row * kc..(row + 1) * kc];
                    for q in 0..k {
                        for j in 0..c {
                            let wq = wv[q * c + j];
                            out[3 * q] += wq * gr[3 * j];
                            out[3 * q + 1] += wq * gr[3 * j + 1];
                            out[3 * q + 2] += wq * gr[3 * j + 2];
                        }
                    }
                }
            }
        }
    }
}

/// Normalizes `row` in place, returning `1/sqrt(var + eps)`.
fn normalize_row(row: &mut [f64], eps: f64) -> f64 {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + eps).sqrt();
    row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    inv
}

/// `dx = inv (dy − mean(dy) − ŷ mean(dy ⊙ ŷ))` for normalized output `ŷ`.
fn layer_norm_adjoint(y: &[f64], dy: &[f64], inv: f64, out: &mut [f64]) {
    let n = y.len() as f64;
    let mean_dy = dy.iter().sum::<f64>() / n;
    let mean_dyy = dy.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
    for i in 0..y.len() {
        out[i] += inv * (dy[i] - mean_dy - y[i] * mean_dyy);
    }
}
