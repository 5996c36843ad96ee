//! Reference implementations for integration tests. Everything here works
//! from raw structure constants with plain loops and shares no code with the
//! block-matrix path under test.
#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use hypernn::layers::{Activation, Dense, HyperConv, HyperDense, Layer};
use hypernn::tensor::finite_diff_check;
use hypernn::{Padding, Result, Sequential, StructureConstants, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `a * b` straight from the definition `e_i e_j = sum_k A_ijk e_k`.
pub fn product(alg: &StructureConstants, a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = alg.dim();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let ab = a[i] * b[j];
            if ab == 0.0 {
                continue;
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o += ab * alg.get(i, j, k);
            }
        }
    }
    out
}

/// Largest `|a - b| / max(1, |b|)`.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub struct DenseCase {
    pub layer: HyperDense,
    pub units: usize,
    pub in_elems: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub x: Tensor,
}

pub fn random_dense(alg: &Arc<StructureConstants>, rng: &mut impl Rng) -> DenseCase {
    let n = alg.dim();
    let units = rng.random_range(1..=4);
    let in_elems = rng.random_range(1..=3);
    let batch = rng.random_range(1..=3);
    let weights = uniform(rng, units * in_elems * n);
    let bias = uniform(rng, units * n);
    let x = Tensor::new(&[batch, in_elems * n], uniform(rng, batch * in_elems * n)).unwrap();
    let layer = HyperDense::from_parts(alg.clone(), units, in_elems, weights.clone(), bias.clone())
        .unwrap();
    DenseCase {
        layer,
        units,
        in_elems,
        weights,
        bias,
        x,
    }
}

/// `y_a = sum_b w_ab x_b + bias_a` per batch row, weights on the left.
pub fn dense_oracle(alg: &StructureConstants, case: &DenseCase) -> Vec<f64> {
    let n = alg.dim();
    let (u, m) = (case.units, case.in_elems);
    let x = case.x.to_vec();
    let mut out = Vec::new();
    for row in x.chunks(m * n) {
        for a in 0..u {
            let mut acc = case.bias[a * n..(a + 1) * n].to_vec();
            for b in 0..m {
                let w = &case.weights[(a * m + b) * n..(a * m + b + 1) * n];
                let p = product(alg, w, &row[b * n..(b + 1) * n]);
                acc.iter_mut().zip(p).for_each(|(s, v)| *s += v);
            }
            out.extend(acc);
        }
    }
    out
}

pub struct ConvCase {
    pub layer: HyperConv,
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Padding,
    pub groups: usize,
    pub filters: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub x: Tensor,
}

pub fn random_conv(alg: &Arc<StructureConstants>, d: usize, rng: &mut impl Rng) -> ConvCase {
    let n = alg.dim();
    let kernel: Vec<usize> = (0..d).map(|_| rng.random_range(1..=3)).collect();
    let stride: Vec<usize> = (0..d).map(|_| rng.random_range(1..=2)).collect();
    let padding = if rng.random_bool(0.5) {
        Padding::Valid
    } else {
        Padding::Same
    };
    let groups = rng.random_range(1..=2);
    let filters = rng.random_range(1..=2);
    let batch = rng.random_range(1..=2);
    let max_extra = if d == 3 { 2 } else { 3 };
    let mut shape = vec![batch];
    shape.extend(kernel.iter().map(|&k| k + rng.random_range(0..=max_extra)));
    shape.push(groups * n);
    let taps: usize = kernel.iter().product();
    let weights = uniform(rng, taps * groups * filters * n);
    let bias = uniform(rng, filters * n);
    let numel = shape.iter().product();
    let x = Tensor::new(&shape, uniform(rng, numel)).unwrap();
    let layer = HyperConv::from_parts(
        alg.clone(),
        filters,
        &kernel,
        groups,
        weights.clone(),
        bias.clone(),
    )
    .unwrap()
    .with_stride(&stride)
    .unwrap()
    .with_padding(padding);
    ConvCase {
        layer,
        kernel,
        stride,
        padding,
        groups,
        filters,
        weights,
        bias,
        x,
    }
}

/// Direct cross-correlation with algebra products per (position, tap,
/// group, filter). Returns the output shape and values.
pub fn conv_oracle(alg: &StructureConstants, case: &ConvCase) -> (Vec<usize>, Vec<f64>) {
    let n = alg.dim();
    let shape = case.x.shape().to_vec();
    let d = case.kernel.len();
    let (g_count, f_count) = (case.groups, case.filters);
    let x = case.x.to_vec();

    let mut size = [1usize; 3];
    let mut kern = [1usize; 3];
    let mut stride = [1usize; 3];
    let mut out = [1usize; 3];
    let mut pad = [0i64; 3];
    for a in 0..d {
        size[a] = shape[a + 1];
        kern[a] = case.kernel[a];
        stride[a] = case.stride[a];
        out[a] = match case.padding {
            Padding::Valid => (size[a] - kern[a]) / stride[a] + 1,
            Padding::Same => size[a].div_ceil(stride[a]),
        };
        if case.padding == Padding::Same {
            let needed = ((out[a] - 1) * stride[a] + kern[a]) as i64 - size[a] as i64;
            pad[a] = needed.max(0) / 2;
        }
    }
    let batch = shape[0];
    let cin = g_count * n;
    let mut y = Vec::new();
    for b in 0..batch {
        for o0 in 0..out[0] {
            for o1 in 0..out[1] {
                for o2 in 0..out[2] {
                    for f in 0..f_count {
                        let mut acc = case.bias[f * n..(f + 1) * n].to_vec();
                        for t0 in 0..kern[0] {
                            for t1 in 0..kern[1] {
                                for t2 in 0..kern[2] {
                                    let pos = [
                                        (o0 * stride[0] + t0) as i64 - pad[0],
                                        (o1 * stride[1] + t1) as i64 - pad[1],
                                        (o2 * stride[2] + t2) as i64 - pad[2],
                                    ];
                                    if (0..3).any(|a| pos[a] < 0 || pos[a] >= size[a] as i64) {
                                        continue;
                                    }
                                    let p = pos.map(|v| v as usize);
                                    let tap = (t0 * kern[1] + t1) * kern[2] + t2;
                                    let pix = (((b * size[0] + p[0]) * size[1] + p[1]) * size[2]
                                        + p[2])
                                        * cin;
                                    for g in 0..g_count {
                                        let w0 = ((tap * g_count + g) * f_count + f) * n;
                                        let w = &case.weights[w0..w0 + n];
                                        let xv = &x[pix + g * n..pix + (g + 1) * n];
                                        let prod = product(alg, w, xv);
                                        acc.iter_mut().zip(prod).for_each(|(s, v)| *s += v);
                                    }
                                }
                            }
                        }
                        y.extend(acc);
                    }
                }
            }
        }
    }
    let mut out_shape = vec![batch];
    out_shape.extend_from_slice(&out[..d]);
    out_shape.push(f_count * n);
    (out_shape, y)
}

/// Worst gradient-check error of `sum(layer(x) * probe)` over the input and
/// every parameter of the layer.
pub fn layer_grad_error(layer: &Layer, x: &Tensor, rng: &mut impl Rng) -> Result<f64> {
    let shape = hypernn::no_grad(|| layer.forward(x))?.shape().to_vec();
    let probe = Tensor::new(&shape, uniform(rng, shape.iter().product()))?;
    let input = Tensor::param(x.shape(), x.to_vec())?;
    let mut worst = finite_diff_check(
        |t| layer.forward(t)?.mul(&probe).map(|p| p.sum()),
        &input,
        FD_EPS,
    )?;
    for p in layer.parameters() {
        let err = finite_diff_check(
            |_| layer.forward(x)?.mul(&probe).map(|p| p.sum()),
            &p,
            FD_EPS,
        )?;
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Worst gradient-check error of the binary cross-entropy of `model` on
/// `(x, y)` over every parameter.
pub fn model_grad_error(model: &Sequential, x: &Tensor, y: &Tensor) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in model.parameters() {
        let err = finite_diff_check(
            |_| hypernn::training::bce_loss(&model.call(x)?, y),
            &p,
            FD_EPS,
        )?;
        worst = worst.max(err);
    }
    Ok(worst)
}

/// One-hot XOR inputs and targets.
pub fn xor_data() -> (Tensor, Tensor) {
    let mut x = vec![0.0; 16];
    for i in 0..4 {
        x[i * 5] = 1.0;
    }
    (
        Tensor::new(&[4, 4], x).unwrap(),
        Tensor::new(&[4, 1], vec![0.0, 1.0, 1.0, 0.0]).unwrap(),
    )
}

pub fn xor_model(alg: impl Into<Arc<StructureConstants>>, seed: u64) -> Sequential {
    let mut m = Sequential::with_seed(seed);
    m.add(HyperDense::new(4, alg).unwrap())
        .add(Activation::Tanh)
        .add(Dense::new(1).unwrap())
        .add(Activation::Sigmoid);
    m
}
