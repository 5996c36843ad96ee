//! Differentiable operations. Broadcasting is limited to a rank-0 scalar
//! combined with a tensor; anything else needs an explicit reshape.

use rayon::prelude::*;

use super::{BackwardFn, Tensor};
use crate::error::{Error, Result};

/// Row count above which matrix products are split across threads.
const PAR_ROWS: usize = 64;

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
}

impl Binary {
    fn name(self) -> &'static str {
        match self {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Binary::Add => a + b,
            Binary::Sub => a - b,
            Binary::Mul => a * b,
        }
    }

    /// Partial derivatives with respect to `a` and `b`.
    fn partials(self, a: f64, b: f64) -> (f64, f64) {
        match self {
            Binary::Add => (1.0, 1.0),
            Binary::Sub => (1.0, -1.0),
            Binary::Mul => (b, a),
        }
    }
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Binary::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Binary::Sub)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Binary::Mul)
    }

    fn binary(&self, other: &Tensor, op: Binary) -> Result<Tensor> {
        let (a_scalar, b_scalar) = (self.rank() == 0, other.rank() == 0);
        let shape = if self.shape() == other.shape() || b_scalar {
            self.shape().to_vec()
        } else if a_scalar {
            other.shape().to_vec()
        } else {
            return Err(Error::dim(
                op.name(),
                format!(
                    "shapes {:?} and {:?} differ and neither is a scalar",
                    self.shape(),
                    other.shape()
                ),
            ));
        };
        let n: usize = shape.iter().product();
        let at = |scalar: bool, i: usize| if scalar { 0 } else { i };
        let data = {
            let (a, b) = (self.data(), other.data());
            (0..n)
                .map(|i| op.apply(a[at(a_scalar, i)], b[at(b_scalar, i)]))
                .collect()
        };
        let backward: BackwardFn = Box::new(move |g, _out, inputs| {
            let (a, b) = (inputs[0].data(), inputs[1].data());
            let mut ga = vec![0.0; a.len()];
            let mut gb = vec![0.0; b.len()];
            for (i, gi) in g.iter().enumerate() {
                let (ia, ib) = (at(a_scalar, i), at(b_scalar, i));
                let (da, db) = op.partials(a[ia], b[ib]);
                ga[ia] += gi * da;
                gb[ib] += gi * db;
            }
            vec![Some(ga), Some(gb)]
        });
        Ok(Tensor::from_op(
            shape,
            data,
            op.name(),
            vec![self.clone(), other.clone()],
            backward,
        ))
    }

    /// Applies `f` elementwise; `df(x, y)` is the derivative at input `x`
    /// with output `y`.
    fn unary<F, D>(&self, name: &'static str, f: F, df: D) -> Tensor
    where
        F: Fn(f64) -> f64,
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let data = self.data().iter().map(|&x| f(x)).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            name,
            vec![self.clone()],
            Box::new(move |g, out, inputs| {
                let x = inputs[0].data();
                let gx = g
                    .iter()
                    .zip(x.iter().zip(out))
                    .map(|(gi, (&xi, &yi))| gi * df(xi, yi))
                    .collect();
                vec![Some(gx)]
            }),
        )
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.unary("add_scalar", |x| x + c, |_, _| 1.0)
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        self.unary("mul_scalar", |x| x * c, move |_, _| c)
    }

    pub fn neg(&self) -> Tensor {
        self.unary("neg", |x| -x, |_, _| -1.0)
    }

    pub fn tanh(&self) -> Tensor {
        self.unary("tanh", f64::tanh, |_, y| 1.0 - y * y)
    }

    /// `1 / (1 + exp(-x))`, evaluated without overflow for large `|x|`.
    pub fn sigmoid(&self) -> Tensor {
        self.unary("sigmoid", sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn log(&self) -> Tensor {
        self.unary("log", f64::ln, |x, _| 1.0 / x)
    }

    pub fn exp(&self) -> Tensor {
        self.unary("exp", f64::exp, |_, y| y)
    }

    /// Clips to `[lo, hi]`; the gradient is zero where clipping is active.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        self.unary(
            "clamp",
            move |x| x.clamp(lo, hi),
            move |x, _| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 },
        )
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&self) -> Tensor {
        let axes: Vec<usize> = (0..self.rank()).collect();
        self.sum_axes(&axes).expect("all axes are valid")
    }

    /// Mean of all elements as a rank-0 tensor.
    pub fn mean(&self) -> Tensor {
        let axes: Vec<usize> = (0..self.rank()).collect();
        self.mean_axes(&axes).expect("all axes are valid")
    }

    /// Sums over `axes`, removing them from the shape.
    pub fn sum_axes(&self, axes: &[usize]) -> Result<Tensor> {
        let plan = ReducePlan::new(self.shape(), axes, "sum")?;
        let mut out = vec![0.0; plan.out_len()];
        for (x, &o) in self.data().iter().zip(&plan.map) {
            out[o] += x;
        }
        let map = plan.map.clone();
        Ok(Tensor::from_op(
            plan.out_shape,
            out,
            "sum",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(map.iter().map(|&o| g[o]).collect())]),
        ))
    }

    pub fn mean_axes(&self, axes: &[usize]) -> Result<Tensor> {
        let plan = ReducePlan::new(self.shape(), axes, "mean")?;
        let count = (self.numel() / plan.out_len()) as f64;
        Ok(self.sum_axes(axes)?.mul_scalar(1.0 / count))
    }

    /// Maximum over `axes`. The gradient flows to the first maximal element.
    pub fn max_axes(&self, axes: &[usize]) -> Result<Tensor> {
        let plan = ReducePlan::new(self.shape(), axes, "max")?;
        let mut out = vec![f64::NEG_INFINITY; plan.out_len()];
        let mut arg = vec![0usize; plan.out_len()];
        for (i, (&x, &o)) in self.data().iter().zip(&plan.map).enumerate() {
            if x > out[o] {
                out[o] = x;
                arg[o] = i;
            }
        }
        let n = self.numel();
        Ok(Tensor::from_op(
            plan.out_shape,
            out,
            "max",
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; n];
                for (&i, gi) in arg.iter().zip(g) {
                    gx[i] += gi;
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Maximum over every axis except the first (batch) and last (channel).
    pub fn global_max_pool(&self) -> Result<Tensor> {
        if self.rank() < 3 {
            return Err(Error::dim(
                "global_max_pool",
                format!(
                    "expected [batch, spatial.., channels], got {:?}",
                    self.shape()
                ),
            ));
        }
        let axes: Vec<usize> = (1..self.rank() - 1).collect();
        self.max_axes(&axes)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != self.numel() || shape.contains(&0) {
            return Err(Error::dim(
                "reshape",
                format!("cannot reshape {:?} into {shape:?}", self.shape()),
            ));
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.to_vec(),
            "reshape",
            vec![self.clone()],
            Box::new(|g, _, _| vec![Some(g.to_vec())]),
        ))
    }

    /// Collapses everything after the batch axis.
    pub fn flatten(&self) -> Result<Tensor> {
        if self.rank() < 1 {
            return Err(Error::dim("flatten", "a scalar has no batch axis"));
        }
        let batch = self.shape()[0];
        self.reshape(&[batch, self.numel() / batch])
    }

    /// Reorders axes: output axis `d` is input axis `perm[d]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank
            || perm
                .iter()
                .any(|&p| p >= rank || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::dim(
                "permute",
                format!(
                    "{perm:?} is not a permutation of the axes of {:?}",
                    self.shape()
                ),
            ));
        }
        let in_strides = strides(self.shape());
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape()[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        // gather[o] = input offset read by output position o
        let mut gather = Vec::with_capacity(self.numel());
        for_each_index(&out_shape, |idx| {
            gather.push(
                idx.iter()
                    .zip(&src_strides)
                    .map(|(i, s)| i * s)
                    .sum::<usize>(),
            );
        });
        let data = {
            let x = self.data();
            gather.iter().map(|&i| x[i]).collect()
        };
        let n = self.numel();
        Ok(Tensor::from_op(
            out_shape,
            data,
            "permute",
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; n];
                for (&i, gi) in gather.iter().zip(g) {
                    gx[i] = *gi;
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Adds `bias` (shape `[C]`) along the last axis (size `C`).
    pub fn bias_add(&self, bias: &Tensor) -> Result<Tensor> {
        let c = self.shape().last().copied().unwrap_or(0);
        if bias.shape() != [c] {
            return Err(Error::dim(
                "bias_add",
                format!(
                    "bias shape {:?} does not match last axis of {:?}",
                    bias.shape(),
                    self.shape()
                ),
            ));
        }
        let data = {
            let (x, b) = (self.data(), bias.data());
            x.chunks(c)
                .flat_map(|row| row.iter().zip(b.iter()).map(|(x, b)| x + b))
                .collect()
        };
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            "bias_add",
            vec![self.clone(), bias.clone()],
            Box::new(move |g, _, _| {
                let mut gb = vec![0.0; c];
                for row in g.chunks(c) {
                    gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                vec![Some(g.to_vec()), Some(gb)]
            }),
        ))
    }

    /// `[M, K] x [K, N] -> [M, N]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (a, b) = (self.shape(), other.shape());
        if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
            return Err(Error::dim(
                "matmul",
                format!("cannot multiply {a:?} by {b:?}"),
            ));
        }
        let (m, k, n) = (a[0], a[1], b[1]);
        let data = gemm(&self.data(), &other.data(), m, k, n);
        Ok(Tensor::from_op(
            vec![m, n],
            data,
            "matmul",
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, inputs| {
                let (a, b) = (&inputs[0], &inputs[1]);
                let ga = a.requires_grad().then(|| gemm_nt(g, &b.data(), m, n, k));
                let gb = b.requires_grad().then(|| gemm_tn(&a.data(), g, m, k, n));
                vec![ga, gb]
            }),
        ))
    }

    /// Rows `indices` of the leading axis, as a constant.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let rows = *self
            .shape()
            .first()
            .ok_or_else(|| Error::dim("select_rows", "scalar input"))?;
        let row_len = self.numel() / rows;
        let x = self.data();
        let mut data = Vec::with_capacity(indices.len() * row_len);
        for &r in indices {
            if r >= rows {
                return Err(Error::dim(
                    "select_rows",
                    format!("row {r} out of range for {rows} rows"),
                ));
            }
            data.extend_from_slice(&x[r * row_len..(r + 1) * row_len]);
        }
        let mut shape = self.shape().to_vec();
        shape[0] = indices.len();
        Tensor::new(&shape, data)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-major strides of `shape`.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Calls `f` with every multi-index of `shape` in row-major order.
fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0; shape.len()];
    for _ in 0..total {
        f(&idx);
        for d in (0..shape.len()).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

struct ReducePlan {
    out_shape: Vec<usize>,
    /// Output offset for every input offset.
    map: Vec<usize>,
}

impl ReducePlan {
    fn new(shape: &[usize], axes: &[usize], op: &'static str) -> Result<Self> {
        let mut reduced = vec![false; shape.len()];
        for &a in axes {
            if a >= shape.len() || std::mem::replace(&mut reduced[a], true) {
                return Err(Error::dim(
                    op,
                    format!("invalid reduction axes {axes:?} for shape {shape:?}"),
                ));
            }
        }
        let out_shape: Vec<usize> = shape
            .iter()
            .zip(&reduced)
            .filter(|(_, &r)| !r)
            .map(|(&s, _)| s)
            .collect();
        let kept_strides = strides(&out_shape);
        let mut full_strides = vec![0; shape.len()];
        let mut next = 0;
        for (d, &r) in reduced.iter().enumerate() {
            if !r {
                full_strides[d] = kept_strides[next];
                next += 1;
            }
        }
        let mut map = Vec::with_capacity(shape.iter().product());
        for_each_index(shape, |idx| {
            map.push(idx.iter().zip(&full_strides).map(|(i, s)| i * s).sum());
        });
        Ok(Self { out_shape, map })
    }

    fn out_len(&self) -> usize {
        self.out_shape.iter().product()
    }
}

/// `C[m, n] = A[m, k] B[k, n]`.
pub(crate) fn gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    let row = |(i, c_row): (usize, &mut [f64])| {
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            for (cj, bj) in c_row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *cj += aip * bj;
            }
        }
    };
    if m >= PAR_ROWS {
        c.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        c.chunks_mut(n).enumerate().for_each(row);
    }
    c
}

/// `C[m, k] = G[m, n] B[k, n]^T`.
fn gemm_nt(g: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * k];
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            c[i * k + p] = g_row
                .iter()
                .zip(&b[p * n..(p + 1) * n])
                .map(|(x, y)| x * y)
                .sum();
        }
    }
    c
}

/// `C[k, n] = A[m, k]^T G[m, n]`.
fn gemm_tn(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            for (cj, gj) in c[p * n..(p + 1) * n].iter_mut().zip(g_row) {
                *cj += aip * gj;
            }
        }
    }
    c
}
