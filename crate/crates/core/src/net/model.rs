//! Full network pass: dense → LeakyReLU → reshape → upsampling blocks →
//! conv head → sigmoid → crop → scale.

use rand::RngCore;

use super::arch::{LatentVector, NetParams, Upsampler};
use super::layers::*;
use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// Evaluation runs deterministically; training draws a fresh dropout mask
/// after the last upsampling block on every call.
pub enum Mode<'a> {
    Eval,
    Train {
        dropout_rate: f64,
        rng: &'a mut dyn RngCore,
    },
}

#[derive(Debug, Clone)]
struct BlockTrace {
    input: Tensor4,
    upsampled: Tensor4,
    pre: Tensor4,
}

/// Crop window inside the pre-crop image: rows are taken from the top,
/// columns from the centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crop {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Everything the backward pass needs from one forward call.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    z: Vec<f64>,
    fc_pre: Vec<f64>,
    blocks: Vec<BlockTrace>,
    dropout_mask: Option<Vec<f64>>,
    head_in: Tensor4,
    sigmoid_out: Tensor4,
    pub crop: Crop,
    n_params: usize,
}

impl ForwardTrace {
    pub fn dropout_mask(&self) -> Option<&[f64]> {
        self.dropout_mask.as_deref()
    }
}

fn slice<'p>(params: &'p NetParams, slots: &[super::arch::ParamSlot], idx: usize) -> &'p [f64] {
    &params.values[slots[idx].range()]
}

fn upsample(kind: Upsampler, x: &Tensor4, w: Option<(&[f64], &[f64])>) -> Result<Tensor4> {
    match (kind, w) {
        (Upsampler::Bilinear, _) => bilinear_upsample2(x),
        (Upsampler::Nearest, _) => nearest_upsample2(x),
        (Upsampler::Transposed, Some((k, b))) => transposed_conv2(x, k, b),
        (Upsampler::Transposed, None) => Err(Error::invalid("transposed upsampler without weights")),
    }
}

/// Evaluates the network on `z` and returns the log-conductivity model on an
/// `nz x nx` mesh, flattened row-major (depth index slowest).
pub fn net_forward(
    params: &NetParams,
    z: &LatentVector,
    mesh_shape: (usize, usize),
    mode: Mode<'_>,
) -> Result<(Vec<f64>, ForwardTrace)> {
    let arch = &params.arch;
    let layout = arch.layout();
    if params.values.len() != layout.total {
        return Err(Error::invalid(format!(
            "parameter vector has {} values, architecture needs {}",
            params.values.len(),
            layout.total
        )));
    }
    if z.len() != arch.latent_dim {
        return Err(Error::invalid(format!(
            "latent vector has {} values, architecture expects {}",
            z.len(),
            arch.latent_dim
        )));
    }
    let (nz, nx) = mesh_shape;
    let (out_r, out_c) = arch.output_shape()?;
    if out_r < nz || out_c < nx || nz == 0 || nx == 0 {
        return Err(Error::invalid(format!(
            "network output {out_r}x{out_c} cannot cover mesh {nz}x{nx}"
        )));
    }
    let slots = &layout.slots;
    let slope = arch.negative_slope;

    let fc_pre = dense_forward(
        z.as_slice(),
        slice(params, slots, layout.fc.0),
        slice(params, slots, layout.fc.1),
    )?;
    let mut x = Tensor4::image(
        1,
        arch.reshape.0,
        arch.reshape.1,
        fc_pre.iter().map(|&v| leaky_relu(v, slope)).collect(),
    )?;

    let mut blocks = Vec::with_capacity(layout.blocks.len());
    for b in &layout.blocks {
        let up_w = b.up.map(|(w, bias)| (slice(params, slots, w), slice(params, slots, bias)));
        let upsampled = upsample(arch.upsampler, &x, up_w)?;
        let pre = conv2d_valid(
            &upsampled,
            slice(params, slots, b.conv.0),
            slice(params, slots, b.conv.1),
            arch.kernel,
        )?;
        let out = pre.map(|v| leaky_relu(v, slope));
        blocks.push(BlockTrace { input: x, upsampled, pre });
        x = out;
    }

    let (head_in, dropout_mask) = match mode {
        Mode::Eval => (x, None),
        Mode::Train { dropout_rate, rng } if !blocks.is_empty() => dropout(&x, dropout_rate, Some(rng))?,
        Mode::Train { .. } => (x, None),
    };

    let head_pre = conv2d_valid(
        &head_in,
        slice(params, slots, layout.head.0),
        slice(params, slots, layout.head.1),
        arch.kernel,
    )?;
    let sigmoid_out = head_pre.map(sigmoid);

    let crop = Crop { row0: 0, col0: (out_c - nx) / 2, rows: nz, cols: nx };
    let mut m = Vec::with_capacity(nz * nx);
    for iz in 0..nz {
        for ix in 0..nx {
            m.push(arch.output_scale * sigmoid_out.at(0, crop.row0 + iz, crop.col0 + ix));
        }
    }

    let trace = ForwardTrace {
        z: z.as_slice().to_vec(),
        fc_pre,
        blocks,
        dropout_mask,
        head_in,
        sigmoid_out,
        crop,
        n_params: layout.total,
    };
    Ok((m, trace))
}

/// Gradient of `⟨g, net(z)⟩` with respect to every parameter, in the flat
/// parameter layout.
pub fn net_backward(params: &NetParams, trace: &ForwardTrace, g: &[f64]) -> Result<Vec<f64>> {
    let arch = &params.arch;
    let layout = arch.layout();
    let crop = trace.crop;
    if layout.total != trace.n_params || params.values.len() != layout.total {
        return Err(Error::invalid("trace does not belong to these parameters"));
    }
    if g.len() != crop.rows * crop.cols {
        return Err(Error::invalid(format!(
            "model gradient has {} entries, trace covers {}x{}",
            g.len(),
            crop.rows,
            crop.cols
        )));
    }
    let slots = &layout.slots;
    let slope = arch.negative_slope;
    let mut grad = vec![0.0; layout.total];
    let mut store = |idx: usize, values: &[f64]| grad[slots[idx].range()].copy_from_slice(values);

    // crop and scale, then sigmoid
    let s = &trace.sigmoid_out;
    let mut g_head = Tensor4::zeros(s.shape);
    let w = s.width();
    for iz in 0..crop.rows {
        for ix in 0..crop.cols {
            let k = (crop.row0 + iz) * w + crop.col0 + ix;
            g_head.data[k] = arch.output_scale * g[iz * crop.cols + ix] * sigmoid_grad_from_output(s.data[k]);
        }
    }

    let (gk, gb, mut gx) = conv2d_valid_backward(
        &trace.head_in,
        slice(params, slots, layout.head.0),
        &g_head,
        arch.kernel,
    )?;
    store(layout.head.0, &gk);
    store(layout.head.1, &gb);
    gx = dropout_backward(&gx, trace.dropout_mask.as_deref());

    for (b, bt) in layout.blocks.iter().zip(&trace.blocks).rev() {
        let mut g_pre = gx;
        for (gv, pv) in g_pre.data.iter_mut().zip(&bt.pre.data) {
            *gv *= leaky_relu_grad(*pv, slope);
        }
        let (gk, gb, g_up) =
            conv2d_valid_backward(&bt.upsampled, slice(params, slots, b.conv.0), &g_pre, arch.kernel)?;
        store(b.conv.0, &gk);
        store(b.conv.1, &gb);
        gx = match (arch.upsampler, b.up) {
            (Upsampler::Bilinear, _) => bilinear_upsample2_backward(&g_up, bt.input.shape)?,
            (Upsampler::Nearest, _) => nearest_upsample2_backward(&g_up, bt.input.shape)?,
            (Upsampler::Transposed, Some((wi, bi))) => {
                let (gk, gb, gx) = transposed_conv2_backward(&bt.input, slice(params, slots, wi), &g_up)?;
                store(wi, &gk);
                store(bi, &gb);
                gx
            }
            (Upsampler::Transposed, None) => {
                return Err(Error::invalid("transposed upsampler without weights"));
            }
        };
    }

    let g_fc: Vec<f64> = gx
        .data
        .iter()
        .zip(&trace.fc_pre)
        .map(|(gv, pv)| gv * leaky_relu_grad(*pv, slope))
        .collect();
    let (gw, gb, _) = dense_backward(&trace.z, slice(params, slots, layout.fc.0), &g_fc)?;
    store(layout.fc.0, &gw);
    store(layout.fc.1, &gb);
    Ok(grad)
}
