//! Channels-last cross-correlation over 1, 2 or 3 spatial axes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Only positions where the kernel fits inside the input.
    #[default]
    Valid,
    /// Zero padding so that the output has `ceil(S / stride)` positions.
    Same,
}

/// Output extent along one axis, or `None` if the kernel does not fit.
pub fn conv_output_len(
    size: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Option<usize> {
    if stride == 0 || kernel == 0 {
        return None;
    }
    match padding {
        Padding::Valid => size.checked_sub(kernel).map(|d| d / stride + 1),
        Padding::Same => Some(size.div_ceil(stride)),
    }
}

/// A convolution normalized to three spatial axes (unused axes have extent 1).
#[derive(Clone, Debug)]
struct Geometry {
    batch: usize,
    input: [usize; 3],
    kernel: [usize; 3],
    stride: [usize; 3],
    pad: [usize; 3],
    output: [usize; 3],
    cin: usize,
    cout: usize,
}

impl Geometry {
    fn new(x: &[usize], k: &[usize], stride: &[usize], padding: Padding) -> Result<Self> {
        let rank = x.len().saturating_sub(2);
        if !(1..=3).contains(&rank) {
            return Err(Error::dim(
                "conv",
                format!("input must be [batch, 1 to 3 spatial axes, channels], got {x:?}"),
            ));
        }
        if k.len() != rank + 2 {
            return Err(Error::dim(
                "conv",
                format!("kernel {k:?} does not have {rank} spatial axes plus in/out channels"),
            ));
        }
        if stride.len() != rank || stride.contains(&0) {
            return Err(Error::dim(
                "conv",
                format!("stride {stride:?} must have {rank} positive entries"),
            ));
        }
        let cin = x[rank + 1];
        if k[rank] != cin {
            return Err(Error::dim(
                "conv",
                format!("kernel expects {} input channels, input has {cin}", k[rank]),
            ));
        }
        let mut g = Geometry {
            batch: x[0],
            input: [1; 3],
            kernel: [1; 3],
            stride: [1; 3],
            pad: [0; 3],
            output: [1; 3],
            cin,
            cout: k[rank + 1],
        };
        for d in 0..rank {
            let (s, kd, st) = (x[d + 1], k[d], stride[d]);
            let out = conv_output_len(s, kd, st, padding).ok_or_else(|| {
                Error::Shape(format!(
                    "kernel extent {kd} exceeds input extent {s} on spatial axis {d}"
                ))
            })?;
            let total_pad = match padding {
                Padding::Valid => 0,
                Padding::Same => ((out - 1) * st + kd).saturating_sub(s),
            };
            if s + total_pad < kd {
                return Err(Error::Shape(format!(
                    "kernel extent {kd} exceeds padded input extent {} on spatial axis {d}",
                    s + total_pad
                )));
            }
            g.input[d] = s;
            g.kernel[d] = kd;
            g.stride[d] = st;
            g.pad[d] = total_pad / 2;
            g.output[d] = out;
        }
        Ok(g)
    }

    fn in_len(&self) -> usize {
        self.input.iter().product::<usize>() * self.cin
    }

    fn out_len(&self) -> usize {
        self.output.iter().product::<usize>() * self.cout
    }

    fn kernel_len(&self) -> usize {
        self.kernel.iter().product::<usize>() * self.cin * self.cout
    }

    /// Calls `f(out_offset, in_offset, kernel_offset)` for every output
    /// position and kernel tap that lands inside the input. Offsets are the
    /// start of the channel run in a single batch item.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [o0, o1, o2] = self.output;
        let [k0, k1, k2] = self.kernel;
        let [s0, s1, s2] = self.input;
        for a in 0..o0 {
            for b in 0..o1 {
                for c in 0..o2 {
                    let out_off = ((a * o1 + b) * o2 + c) * self.cout;
                    for p in 0..k0 {
                        let Some(i) = self.source(0, a, p, s0) else {
                            continue;
                        };
                        for q in 0..k1 {
                            let Some(j) = self.source(1, b, q, s1) else {
                                continue;
                            };
                            for r in 0..k2 {
                                let Some(l) = self.source(2, c, r, s2) else {
                                    continue;
                                };
                                let in_off = ((i * s1 + j) * s2 + l) * self.cin;
                                let k_off = ((p * k1 + q) * k2 + r) * self.cin * self.cout;
                                f(out_off, in_off, k_off);
                            }
                        }
                    }
                }
            }
        }
    }

    #[inline]
    fn source(&self, axis: usize, out: usize, tap: usize, size: usize) -> Option<usize> {
        (out * self.stride[axis] + tap)
            .checked_sub(self.pad[axis])
            .filter(|&i| i < size)
    }
}

impl Tensor {
    /// Cross-correlation (no kernel flip) of `[B, S.., C_in]` with a kernel
    /// `[K.., C_in, C_out]`, producing `[B, S'.., C_out]`.
    pub fn conv_nd(&self, kernel: &Tensor, stride: &[usize], padding: Padding) -> Result<Tensor> {
        let g = Geometry::new(self.shape(), kernel.shape(), stride, padding)?;
        let rank = self.rank() - 2;
        let mut out_shape = vec![g.batch];
        out_shape.extend_from_slice(&g.output[..rank]);
        out_shape.push(g.cout);

        let data = conv_forward(&g, &self.data(), &kernel.data());
        Ok(Tensor::from_op(
            out_shape,
            data,
            "conv_nd",
            vec![self.clone(), kernel.clone()],
            Box::new(move |grad, _, inputs| {
                let (x, k) = (&inputs[0], &inputs[1]);
                let gx = x
                    .requires_grad()
                    .then(|| conv_grad_input(&g, grad, &k.data()));
                let gk = k
                    .requires_grad()
                    .then(|| conv_grad_kernel(&g, grad, &x.data()));
                vec![gx, gk]
            }),
        ))
    }
}

fn conv_forward(g: &Geometry, x: &[f64], k: &[f64]) -> Vec<f64> {
    let (cin, cout) = (g.cin, g.cout);
    let mut out = vec![0.0; g.batch * g.out_len()];
    out.par_chunks_mut(g.out_len())
        .zip(x.par_chunks(g.in_len()))
        .for_each(|(y, x)| {
            g.for_each_tap(|o, i, kk| {
                let y = &mut y[o..o + cout];
                for (ci, &xv) in x[i..i + cin].iter().enumerate() {
                    let w = &k[kk + ci * cout..kk + (ci + 1) * cout];
                    for (yv, wv) in y.iter_mut().zip(w) {
                        *yv += xv * wv;
                    }
                }
            });
        });
    out
}

fn conv_grad_input(g: &Geometry, grad: &[f64], k: &[f64]) -> Vec<f64> {
    let (cin, cout) = (g.cin, g.cout);
    let mut gx = vec![0.0; g.batch * g.in_len()];
    gx.par_chunks_mut(g.in_len())
        .zip(grad.par_chunks(g.out_len()))
        .for_each(|(gx, gy)| {
            g.for_each_tap(|o, i, kk| {
                let gy = &gy[o..o + cout];
                for (ci, gxv) in gx[i..i + cin].iter_mut().enumerate() {
                    let w = &k[kk + ci * cout..kk + (ci + 1) * cout];
                    *gxv += gy.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
                }
            });
        });
    gx
}

fn conv_grad_kernel(g: &Geometry, grad: &[f64], x: &[f64]) -> Vec<f64> {
    let (cin, cout) = (g.cin, g.cout);
    // Per-item partial sums, combined in batch order so results do not depend
    // on thread scheduling.
    let partials: Vec<Vec<f64>> = x
        .par_chunks(g.in_len())
        .zip(grad.par_chunks(g.out_len()))
        .map(|(x, gy)| {
            let mut gk = vec![0.0; g.kernel_len()];
            g.for_each_tap(|o, i, kk| {
                let gy = &gy[o..o + cout];
                for (ci, &xv) in x[i..i + cin].iter().enumerate() {
                    let row = &mut gk[kk + ci * cout..kk + (ci + 1) * cout];
                    for (r, gv) in row.iter_mut().zip(gy) {
                        *r += xv * gv;
                    }
                }
            });
            gk
        })
        .collect();
    let mut gk = vec![0.0; g.kernel_len()];
    for p in &partials {
        gk.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    gk
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_kernel_sums_window() {
        let x = Tensor::full(&[1, 3, 3, 1], 1.0);
        let k = Tensor::full(&[3, 3, 1, 1], 1.0);
        let y = x.conv_nd(&k, &[1, 1], Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.to_vec(), vec![9.0]);
    }

    #[test]
    fn unit_kernel_is_identity() {
        let data: Vec<f64> = (0..30).map(|v| v as f64 * 0.5 - 3.0).collect();
        let x = Tensor::new(&[2, 5, 3, 1], data.clone()).unwrap();
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        let y = x.conv_nd(&k, &[1, 1], Padding::Valid).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert_eq!(y.to_vec(), data);
    }

    #[test]
    fn no_kernel_flip() {
        // A kernel that picks the left neighbour: cross-correlation reads x[i + 0].
        let x = Tensor::new(&[1, 4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::new(&[2, 1, 1], vec![1.0, 0.0]).unwrap();
        let y = x.conv_nd(&k, &[1], Padding::Valid).unwrap();
        assert_eq!(y.to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn output_lengths() {
        assert_eq!(conv_output_len(100, 3, 1, Padding::Valid), Some(98));
        assert_eq!(conv_output_len(5, 3, 2, Padding::Valid), Some(2));
        assert_eq!(conv_output_len(5, 3, 2, Padding::Same), Some(3));
        assert_eq!(conv_output_len(2, 3, 1, Padding::Valid), None);
        assert_eq!(conv_output_len(2, 3, 1, Padding::Same), Some(2));
    }

    #[test]
    fn same_padding_keeps_extent() {
        let x = Tensor::full(&[1, 3, 1], 1.0);
        let k = Tensor::full(&[3, 1, 1], 1.0);
        let y = x.conv_nd(&k, &[1], Padding::Same).unwrap();
        assert_eq!(y.to_vec(), vec![2.0, 3.0, 2.0]);
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(&[1, 2, 2, 1]);
        let k = Tensor::zeros(&[3, 3, 1, 1]);
        assert!(matches!(
            x.conv_nd(&k, &[1, 1], Padding::Valid),
            Err(Error::Shape(_))
        ));
        assert!(x.conv_nd(&k, &[1, 1], Padding::Same).is_ok());
        let bad_channels = Tensor::zeros(&[1, 1, 2, 1]);
        assert!(x.conv_nd(&bad_channels, &[1, 1], Padding::Valid).is_err());
        assert!(x
            .conv_nd(&Tensor::zeros(&[1, 1, 1, 1]), &[0, 1], Padding::Valid)
            .is_err());
        assert!(Tensor::zeros(&[1, 2])
            .conv_nd(&k, &[1], Padding::Valid)
            .is_err());
    }
}
