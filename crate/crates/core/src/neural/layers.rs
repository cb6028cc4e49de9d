//! Bias-free valid convolution, dense layers and leaky ReLU with explicit backward passes.

use super::tensor::{axpy, dot};

/// Inputs denser than this go through im2col; sparser ones are scattered directly.
const SPARSE_DENSITY: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new(in_c: usize, in_h: usize, in_w: usize, out_c: usize, kernel: usize, stride: usize) -> Self {
        assert!(in_h >= kernel && in_w >= kernel, "input smaller than kernel");
        Self {
            in_c,
            in_h,
            in_w,
            out_c,
            kernel,
            stride,
            out_h: (in_h - kernel) / stride + 1,
            out_w: (in_w - kernel) / stride + 1,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    pub fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn in_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.out_c * self.out_plane()
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_c, self.in_c, self.kernel, self.kernel]
    }
}

/// Input to a convolution in whichever form is cheaper to convolve.
#[derive(Debug, Clone)]
pub enum ConvInput {
    /// im2col matrix, `patch_len x out_plane`.
    Cols(Vec<f64>),
    /// Nonzero entries `(flat index, value)` of a channel-major input.
    Sparse(Vec<(usize, f64)>),
}

pub fn im2col(g: &ConvGeom, input: &[f64]) -> Vec<f64> {
    let plane = g.out_plane();
    let mut cols = vec![0.0; g.patch_len() * plane];
    for c in 0..g.in_c {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let p = (c * g.kernel + ky) * g.kernel + kx;
                let row = &mut cols[p * plane..(p + 1) * plane];
                for oy in 0..g.out_h {
                    let src = (c * g.in_h + oy * g.stride + ky) * g.in_w + kx;
                    for ox in 0..g.out_w {
                        row[oy * g.out_w + ox] = input[src + ox * g.stride];
                    }
                }
            }
        }
    }
    cols
}

pub fn col2im_add(g: &ConvGeom, cols: &[f64], grad_in: &mut [f64]) {
    let plane = g.out_plane();
    for c in 0..g.in_c {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let p = (c * g.kernel + ky) * g.kernel + kx;
                let row = &cols[p * plane..(p + 1) * plane];
                for oy in 0..g.out_h {
                    let dst = (c * g.in_h + oy * g.stride + ky) * g.in_w + kx;
                    for ox in 0..g.out_w {
                        grad_in[dst + ox * g.stride] += row[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
}

/// Prepare an input for convolution, picking the sparse path for mostly-zero inputs.
pub fn prepare(g: &ConvGeom, input: &[f64]) -> ConvInput {
    let nnz = input.iter().filter(|&&v| v != 0.0).count();
    if (nnz as f64) < SPARSE_DENSITY * input.len() as f64 {
        ConvInput::Sparse(
            input
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
        )
    } else {
        ConvInput::Cols(im2col(g, input))
    }
}

/// Output positions `(kernel offset, output index)` reached from input coordinate `i`.
fn taps(i: usize, kernel: usize, stride: usize, out: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..kernel).filter_map(move |k| {
        if i < k || (i - k) % stride != 0 {
            return None;
        }
        let o = (i - k) / stride;
        (o < out).then_some((k, o))
    })
}

fn sparse_walk(g: &ConvGeom, nz: &[(usize, f64)], mut f: impl FnMut(usize, usize, f64)) {
    let kk = g.kernel * g.kernel;
    for &(idx, v) in nz {
        let c = idx / (g.in_h * g.in_w);
        let rem = idx % (g.in_h * g.in_w);
        let (iy, ix) = (rem / g.in_w, rem % g.in_w);
        for (ky, oy) in taps(iy, g.kernel, g.stride, g.out_h) {
            for (kx, ox) in taps(ix, g.kernel, g.stride, g.out_w) {
                f(c * kk + ky * g.kernel + kx, oy * g.out_w + ox, v);
            }
        }
    }
}

/// `out[oc][pos] = sum_p W[oc][p] * patch[p][pos]`
pub fn conv_forward(g: &ConvGeom, weights: &[f64], input: &ConvInput) -> Vec<f64> {
    let plane = g.out_plane();
    let patch = g.patch_len();
    let mut out = vec![0.0; g.out_len()];
    match input {
        ConvInput::Cols(cols) => {
            for oc in 0..g.out_c {
                let orow = &mut out[oc * plane..(oc + 1) * plane];
                for p in 0..patch {
                    let w = weights[oc * patch + p];
                    axpy(w, &cols[p * plane..(p + 1) * plane], orow);
                }
            }
        }
        ConvInput::Sparse(nz) => sparse_walk(g, nz, |p, pos, v| {
            for oc in 0..g.out_c {
                out[oc * plane + pos] += weights[oc * patch + p] * v;
            }
        }),
    }
    out
}

/// Accumulate the weight gradient for output gradient `dout`.
pub fn conv_backward_weights(g: &ConvGeom, input: &ConvInput, dout: &[f64], dw: &mut [f64]) {
    let plane = g.out_plane();
    let patch = g.patch_len();
    match input {
        ConvInput::Cols(cols) => {
            for oc in 0..g.out_c {
                let drow = &dout[oc * plane..(oc + 1) * plane];
                for p in 0..patch {
                    dw[oc * patch + p] += dot(drow, &cols[p * plane..(p + 1) * plane]);
                }
            }
        }
        ConvInput::Sparse(nz) => sparse_walk(g, nz, |p, pos, v| {
            for oc in 0..g.out_c {
                dw[oc * patch + p] += dout[oc * plane + pos] * v;
            }
        }),
    }
}

/// Gradient with respect to the (channel-major) input.
pub fn conv_backward_input(g: &ConvGeom, weights: &[f64], dout: &[f64]) -> Vec<f64> {
    let plane = g.out_plane();
    let patch = g.patch_len();
    let mut dcols = vec![0.0; patch * plane];
    for oc in 0..g.out_c {
        let drow = &dout[oc * plane..(oc + 1) * plane];
        for p in 0..patch {
            axpy(weights[oc * patch + p], drow, &mut dcols[p * plane..(p + 1) * plane]);
        }
    }
    let mut din = vec![0.0; g.in_len()];
    col2im_add(g, &dcols, &mut din);
    din
}

/// `y = W x (+ b)` with `W` stored `out x in`.
pub fn dense_forward(weights: &[f64], bias: Option<&[f64]>, x: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = x.len();
    (0..out_dim)
        .map(|o| {
            let y = dot(&weights[o * in_dim..(o + 1) * in_dim], x);
            bias.map_or(y, |b| y + b[o])
        })
        .collect()
}

/// Accumulates `dW += dy x^T` (and `db += dy`); returns `dx = W^T dy`.
pub fn dense_backward(
    weights: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: Option<&mut [f64]>,
) -> Vec<f64> {
    let in_dim = x.len();
    let mut dx = vec![0.0; in_dim];
    for (o, &g) in dy.iter().enumerate() {
        axpy(g, x, &mut dw[o * in_dim..(o + 1) * in_dim]);
        axpy(g, &weights[o * in_dim..(o + 1) * in_dim], &mut dx);
    }
    if let Some(db) = db {
        for (b, g) in db.iter_mut().zip(dy) {
            *b += g;
        }
    }
    dx
}

pub fn leaky_relu(z: &[f64], slope: f64) -> Vec<f64> {
    z.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect()
}

/// Multiplies `grad` in place by the leaky ReLU derivative at `z`.
pub fn leaky_relu_backward(z: &[f64], slope: f64, grad: &mut [f64]) {
    for (g, &v) in grad.iter_mut().zip(z) {
        if v <= 0.0 {
            *g *= slope;
        }
    }
}
