//! Layer primitives with hand-written reverse-mode gradients.
//!
//! Every `*_backward` returns the exact vector-Jacobian product of its
//! forward map; the tests check each one against central finite differences.

use rand::{Rng, RngCore};

use super::tensor::Tensor4;
use crate::error::{Error, Result};

// ----------------------------------------------------------------------------
// Fully connected

/// `y = W x + b` with `W` stored row-major as `(out, in)`.
pub fn dense_forward(x: &[f64], w: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let (n_out, n_in) = (b.len(), x.len());
    if w.len() != n_out * n_in {
        return Err(Error::invalid(format!(
            "dense weight has {} entries, expected {n_out}x{n_in}",
            w.len()
        )));
    }
    Ok(w.chunks_exact(n_in)
        .zip(b)
        .map(|(row, bi)| bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

/// Gradients `(gW, gb, gx)` of `⟨gy, W x + b⟩`.
pub fn dense_backward(x: &[f64], w: &[f64], gy: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (n_out, n_in) = (gy.len(), x.len());
    if w.len() != n_out * n_in {
        return Err(Error::invalid(format!(
            "dense weight has {} entries, expected {n_out}x{n_in}",
            w.len()
        )));
    }
    let mut gw = Vec::with_capacity(w.len());
    let mut gx = vec![0.0; n_in];
    for (row, &g) in w.chunks_exact(n_in).zip(gy) {
        gw.extend(x.iter().map(|xi| g * xi));
        for (gxi, wij) in gx.iter_mut().zip(row) {
            *gxi += g * wij;
        }
    }
    Ok((gw, gy.to_vec(), gx))
}

// ----------------------------------------------------------------------------
// Upsampling by two

/// Source taps for one output coordinate under half-pixel centres with edge
/// clamping: `(i0, i1, w0, w1)`.
fn bilinear_taps(n_in: usize) -> Vec<(usize, usize, f64, f64)> {
    (0..2 * n_in)
        .map(|o| {
            let src = ((o as f64 + 0.5) * 0.5 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n_in - 1);
            let i1 = (i0 + 1).min(n_in - 1);
            let l = src - i0 as f64;
            (i0, i1, 1.0 - l, l)
        })
        .collect()
}

fn check_nonempty(x: &Tensor4) -> Result<()> {
    if x.height() == 0 || x.width() == 0 {
        return Err(Error::invalid(format!("empty spatial shape {:?}", x.shape)));
    }
    Ok(())
}

pub fn bilinear_upsample2(x: &Tensor4) -> Result<Tensor4> {
    check_nonempty(x)?;
    let [n, c, h, w] = x.shape;
    let (rows, cols) = (bilinear_taps(h), bilinear_taps(w));
    let mut y = Tensor4::zeros([n, c, 2 * h, 2 * w]);
    let (ow, plane_in, plane_out) = (2 * w, h * w, 4 * h * w);
    for ch in 0..n * c {
        let src = &x.data[ch * plane_in..(ch + 1) * plane_in];
        let dst = &mut y.data[ch * plane_out..(ch + 1) * plane_out];
        for (oi, &(r0, r1, a0, a1)) in rows.iter().enumerate() {
            let (row0, row1) = (&src[r0 * w..(r0 + 1) * w], &src[r1 * w..(r1 + 1) * w]);
            let out = &mut dst[oi * ow..(oi + 1) * ow];
            for (oj, &(c0, c1, b0, b1)) in cols.iter().enumerate() {
                out[oj] = a0 * (b0 * row0[c0] + b1 * row0[c1]) + a1 * (b0 * row1[c0] + b1 * row1[c1]);
            }
        }
    }
    Ok(y)
}

/// Transpose of [`bilinear_upsample2`]: scatters `gy` back with the same
/// interpolation weights.
pub fn bilinear_upsample2_backward(gy: &Tensor4, in_shape: [usize; 4]) -> Result<Tensor4> {
    let [n, c, h, w] = in_shape;
    if gy.shape != [n, c, 2 * h, 2 * w] || h == 0 || w == 0 {
        return Err(Error::invalid(format!(
            "upsample gradient shape {:?} does not match input {in_shape:?}",
            gy.shape
        )));
    }
    let (rows, cols) = (bilinear_taps(h), bilinear_taps(w));
    let mut gx = Tensor4::zeros(in_shape);
    let (ow, plane_in, plane_out) = (2 * w, h * w, 4 * h * w);
    for ch in 0..n * c {
        let g = &gy.data[ch * plane_out..(ch + 1) * plane_out];
        let dst = &mut gx.data[ch * plane_in..(ch + 1) * plane_in];
        for (oi, &(r0, r1, a0, a1)) in rows.iter().enumerate() {
            for (oj, &(c0, c1, b0, b1)) in cols.iter().enumerate() {
                let v = g[oi * ow + oj];
                dst[r0 * w + c0] += a0 * b0 * v;
                dst[r0 * w + c1] += a0 * b1 * v;
                dst[r1 * w + c0] += a1 * b0 * v;
                dst[r1 * w + c1] += a1 * b1 * v;
            }
        }
    }
    Ok(gx)
}

/// Replicates every input value into a 2x2 block.
pub fn nearest_upsample2(x: &Tensor4) -> Result<Tensor4> {
    check_nonempty(x)?;
    let [n, c, h, w] = x.shape;
    let mut y = Tensor4::zeros([n, c, 2 * h, 2 * w]);
    for ch in 0..n * c {
        for oi in 0..2 * h {
            for oj in 0..2 * w {
                y.data[(ch * 2 * h + oi) * 2 * w + oj] = x.data[(ch * h + oi / 2) * w + oj / 2];
            }
        }
    }
    Ok(y)
}

pub fn nearest_upsample2_backward(gy: &Tensor4, in_shape: [usize; 4]) -> Result<Tensor4> {
    let [n, c, h, w] = in_shape;
    if gy.shape != [n, c, 2 * h, 2 * w] {
        return Err(Error::invalid(format!(
            "upsample gradient shape {:?} does not match input {in_shape:?}",
            gy.shape
        )));
    }
    let mut gx = Tensor4::zeros(in_shape);
    for ch in 0..n * c {
        for oi in 0..2 * h {
            for oj in 0..2 * w {
                gx.data[(ch * h + oi / 2) * w + oj / 2] += gy.data[(ch * 2 * h + oi) * 2 * w + oj];
            }
        }
    }
    Ok(gx)
}

/// Stride-2 transposed convolution with a 2x2 kernel stored as
/// `(c_in, c_out, 2, 2)`; output spatial size is exactly doubled.
pub fn transposed_conv2(x: &Tensor4, kernel: &[f64], bias: &[f64]) -> Result<Tensor4> {
    check_nonempty(x)?;
    let [n, cin, h, w] = x.shape;
    let cout = bias.len();
    if n != 1 || kernel.len() != cin * cout * 4 {
        return Err(Error::invalid(format!(
            "transposed conv kernel has {} entries, expected {cin}x{cout}x2x2 (batch {n})",
            kernel.len()
        )));
    }
    let (oh, ow) = (2 * h, 2 * w);
    let mut y = Tensor4::zeros([1, cout, oh, ow]);
    for co in 0..cout {
        let out = &mut y.data[co * oh * ow..(co + 1) * oh * ow];
        out.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..cin {
            let src = &x.data[ci * h * w..(ci + 1) * h * w];
            let k = &kernel[(ci * cout + co) * 4..(ci * cout + co) * 4 + 4];
            for i in 0..h {
                for j in 0..w {
                    let v = src[i * w + j];
                    let base = 2 * i * ow + 2 * j;
                    out[base] += k[0] * v;
                    out[base + 1] += k[1] * v;
                    out[base + ow] += k[2] * v;
                    out[base + ow + 1] += k[3] * v;
                }
            }
        }
    }
    Ok(y)
}

/// Gradients `(g_kernel, g_bias, g_x)` of a transposed convolution.
pub fn transposed_conv2_backward(
    x: &Tensor4,
    kernel: &[f64],
    gy: &Tensor4,
) -> Result<(Vec<f64>, Vec<f64>, Tensor4)> {
    let [_, cin, h, w] = x.shape;
    let cout = gy.channels();
    if gy.shape != [1, cout, 2 * h, 2 * w] || kernel.len() != cin * cout * 4 {
        return Err(Error::invalid(format!(
            "transposed conv gradient shape {:?} does not match input {:?}",
            gy.shape, x.shape
        )));
    }
    let (oh, ow) = (2 * h, 2 * w);
    let mut gk = vec![0.0; kernel.len()];
    let mut gb = vec![0.0; cout];
    let mut gx = Tensor4::zeros(x.shape);
    for co in 0..cout {
        let g = &gy.data[co * oh * ow..(co + 1) * oh * ow];
        gb[co] = g.iter().sum();
        for ci in 0..cin {
            let src = &x.data[ci * h * w..(ci + 1) * h * w];
            let kidx = (ci * cout + co) * 4;
            let k = &kernel[kidx..kidx + 4];
            let dst = &mut gx.data[ci * h * w..(ci + 1) * h * w];
            let mut acc = [0.0; 4];
            for i in 0..h {
                for j in 0..w {
                    let base = 2 * i * ow + 2 * j;
                    let t = [g[base], g[base + 1], g[base + ow], g[base + ow + 1]];
                    let v = src[i * w + j];
                    for q in 0..4 {
                        acc[q] += v * t[q];
                    }
                    dst[i * w + j] += k[0] * t[0] + k[1] * t[1] + k[2] * t[2] + k[3] * t[3];
                }
            }
            for q in 0..4 {
                gk[kidx + q] += acc[q];
            }
        }
    }
    Ok((gk, gb, gx))
}

// ----------------------------------------------------------------------------
// Valid cross-correlation

/// Stride-1 cross-correlation without padding. Kernel layout
/// `(c_out, c_in, k, k)`.
pub fn conv2d_valid(x: &Tensor4, kernel: &[f64], bias: &[f64], ksize: usize) -> Result<Tensor4> {
    let [n, cin, h, w] = x.shape;
    let cout = bias.len();
    if n != 1 || kernel.len() != cout * cin * ksize * ksize {
        return Err(Error::invalid(format!(
            "conv kernel has {} entries, expected {cout}x{cin}x{ksize}x{ksize} (batch {n})",
            kernel.len()
        )));
    }
    if h < ksize || w < ksize {
        return Err(Error::invalid(format!(
            "conv input {h}x{w} is smaller than the {ksize}x{ksize} kernel"
        )));
    }
    let (oh, ow) = (h - ksize + 1, w - ksize + 1);
    let mut y = Tensor4::zeros([1, cout, oh, ow]);
    for co in 0..cout {
        let out = &mut y.data[co * oh * ow..(co + 1) * oh * ow];
        out.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..cin {
            let src = &x.data[ci * h * w..(ci + 1) * h * w];
            let kbase = (co * cin + ci) * ksize * ksize;
            for ki in 0..ksize {
                for kj in 0..ksize {
                    let wv = kernel[kbase + ki * ksize + kj];
                    for i in 0..oh {
                        let srow = &src[(i + ki) * w + kj..(i + ki) * w + kj + ow];
                        let orow = &mut out[i * ow..(i + 1) * ow];
                        for (o, s) in orow.iter_mut().zip(srow) {
                            *o += wv * s;
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Gradients `(g_kernel, g_bias, g_x)` of a valid cross-correlation.
pub fn conv2d_valid_backward(
    x: &Tensor4,
    kernel: &[f64],
    gy: &Tensor4,
    ksize: usize,
) -> Result<(Vec<f64>, Vec<f64>, Tensor4)> {
    let [_, cin, h, w] = x.shape;
    let cout = gy.channels();
    if h < ksize || w < ksize {
        return Err(Error::invalid("conv input smaller than kernel"));
    }
    let (oh, ow) = (h - ksize + 1, w - ksize + 1);
    if gy.shape != [1, cout, oh, ow] || kernel.len() != cout * cin * ksize * ksize {
        return Err(Error::invalid(format!(
            "conv gradient shape {:?} does not match input {:?}",
            gy.shape, x.shape
        )));
    }
    let mut gk = vec![0.0; kernel.len()];
    let mut gb = vec![0.0; cout];
    let mut gx = Tensor4::zeros(x.shape);
    for co in 0..cout {
        let g = &gy.data[co * oh * ow..(co + 1) * oh * ow];
        gb[co] = g.iter().sum();
        for ci in 0..cin {
            let src = &x.data[ci * h * w..(ci + 1) * h * w];
            let dst = &mut gx.data[ci * h * w..(ci + 1) * h * w];
            let kbase = (co * cin + ci) * ksize * ksize;
            for ki in 0..ksize {
                for kj in 0..ksize {
                    let wv = kernel[kbase + ki * ksize + kj];
                    let mut acc = 0.0;
                    for i in 0..oh {
                        let grow = &g[i * ow..(i + 1) * ow];
                        let off = (i + ki) * w + kj;
                        let srow = &src[off..off + ow];
                        acc += grow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                        let drow = &mut dst[off..off + ow];
                        for (d, gv) in drow.iter_mut().zip(grow) {
                            *d += wv * gv;
                        }
                    }
                    gk[kbase + ki * ksize + kj] += acc;
                }
            }
        }
    }
    Ok((gk, gb, gx))
}

// ----------------------------------------------------------------------------
// Pointwise maps

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of [`leaky_relu`] evaluated at the pre-activation `x`.
#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of the sigmoid written in terms of its output `s`.
#[inline]
pub fn sigmoid_grad_from_output(s: f64) -> f64 {
    s * (1.0 - s)
}

/// Output multiplier mapping the sigmoid range onto log-conductivity.
pub const OUTPUT_SCALE: f64 = -8.0;

#[inline]
pub fn scale_neg8(x: f64) -> f64 {
    OUTPUT_SCALE * x
}

#[inline]
pub fn scale_neg8_grad(g: f64) -> f64 {
    OUTPUT_SCALE * g
}

// ----------------------------------------------------------------------------
// Dropout

/// Inverted dropout. Returns the output and the per-element multiplier
/// (0 or 1/(1−rate)) that the backward pass reuses. With `rng = None` the
/// layer is in evaluation mode and acts as the identity.
pub fn dropout(
    x: &Tensor4,
    rate: f64,
    rng: Option<&mut dyn RngCore>,
) -> Result<(Tensor4, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = (0..x.len())
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                .collect();
            let y = Tensor4 {
                shape: x.shape,
                data: x.data.iter().zip(&mask).map(|(v, m)| v * m).collect(),
            };
            Ok((y, Some(mask)))
        }
        _ => Ok((x.clone(), None)),
    }
}

pub fn dropout_backward(gy: &Tensor4, mask: Option<&[f64]>) -> Tensor4 {
    match mask {
        Some(m) => Tensor4 {
            shape: gy.shape,
            data: gy.data.iter().zip(m).map(|(g, m)| g * m).collect(),
        },
        None => gy.clone(),
    }
}
