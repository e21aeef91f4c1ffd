use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Upsampler {
    Bilinear,
    Nearest,
    /// Learned stride-2 transposed convolution, `c → c` channels.
    Transposed,
}

impl Upsampler {
    pub const ALL: [Upsampler; 3] = [Upsampler::Bilinear, Upsampler::Nearest, Upsampler::Transposed];

    pub fn name(self) -> &'static str {
        match self {
            Upsampler::Bilinear => "bilinear",
            Upsampler::Nearest => "nearest",
            Upsampler::Transposed => "transposed",
        }
    }
}

impl std::str::FromStr for Upsampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(Upsampler::Bilinear),
            "nearest" => Ok(Upsampler::Nearest),
            "transposed" => Ok(Upsampler::Transposed),
            other => Err(Error::invalid(format!("unknown upsampler {other:?}"))),
        }
    }
}

/// Network shape. The dense layer maps the latent vector to
/// `reshape.0 · reshape.1` values, which then pass through one
/// upsample + conv + LeakyReLU block per entry of `channels` and a final
/// conv + sigmoid head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub latent_dim: usize,
    pub reshape: (usize, usize),
    pub channels: Vec<usize>,
    pub upsampler: Upsampler,
    pub kernel: usize,
    pub negative_slope: f64,
    pub output_scale: f64,
}

/// Default channel plan for `n` upsampling blocks: the last two blocks use
/// 32 and 8 channels and every earlier block 64.
pub fn default_channels(n_blocks: usize) -> Vec<usize> {
    match n_blocks {
        0 => Vec::new(),
        1 => vec![8],
        n => {
            let mut c = vec![64; n - 2];
            c.extend([32, 8]);
            c
        }
    }
}

impl ArchConfig {
    /// Three bilinear blocks on a 6 x 29 seed image (23055 weights).
    pub fn canonical() -> Self {
        Self {
            latent_dim: 8,
            reshape: (6, 29),
            channels: vec![64, 32, 8],
            upsampler: Upsampler::Bilinear,
            kernel: 3,
            negative_slope: 0.2,
            output_scale: -8.0,
        }
    }

    /// Smallest seed image whose output covers an `nz x nx` mesh.
    pub fn for_mesh(nz: usize, nx: usize, n_blocks: usize, upsampler: Upsampler) -> Result<Self> {
        let mut arch = Self {
            channels: default_channels(n_blocks),
            upsampler,
            ..Self::canonical()
        };
        arch.reshape = (arch.seed_size(nz)?, arch.seed_size(nx)?);
        arch.validate()?;
        Ok(arch)
    }

    pub fn n_blocks(&self) -> usize {
        self.channels.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.reshape.0 * self.reshape.1
    }

    /// Spatial size after the blocks and head, or `None` if some conv would
    /// see an input smaller than its kernel.
    fn grow(&self, s0: usize) -> Option<usize> {
        let shrink = self.kernel - 1;
        let mut s = s0;
        for _ in 0..self.n_blocks() {
            s = (2 * s).checked_sub(shrink).filter(|&v| v >= 1)?;
        }
        s.checked_sub(shrink).filter(|&v| v >= 1)
    }

    fn seed_size(&self, target: usize) -> Result<usize> {
        (1..=target.max(1) + self.kernel)
            .find(|&s| self.grow(s).is_some_and(|o| o >= target))
            .ok_or_else(|| Error::invalid(format!("no seed size reaches output size {target}")))
    }

    /// Pre-crop output shape `(rows, cols)`.
    pub fn output_shape(&self) -> Result<(usize, usize)> {
        match (self.grow(self.reshape.0), self.grow(self.reshape.1)) {
            (Some(r), Some(c)) => Ok((r, c)),
            _ => Err(Error::invalid(format!(
                "seed image {:?} is too small for {} blocks of {}x{} convolutions",
                self.reshape,
                self.n_blocks(),
                self.kernel,
                self.kernel
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden_dim() == 0 {
            return Err(Error::invalid("latent and hidden sizes must be positive"));
        }
        if self.kernel == 0 {
            return Err(Error::invalid("kernel size must be positive"));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::invalid(format!("zero-width block in {:?}", self.channels)));
        }
        if !(self.negative_slope.is_finite() && self.output_scale.is_finite()) {
            return Err(Error::invalid("slope and output scale must be finite"));
        }
        self.output_shape().map(|_| ())
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(self)
    }

    pub fn n_params(&self) -> usize {
        self.layout().total
    }
}

/// One named parameter array inside the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub fan_in: usize,
    pub is_bias: bool,
}

impl ParamSlot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BlockSlots {
    pub up: Option<(usize, usize)>,
    pub conv: (usize, usize),
}

/// Slot indices for every layer; `(weight, bias)` pairs index `slots`.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub slots: Vec<ParamSlot>,
    pub fc: (usize, usize),
    pub blocks: Vec<BlockSlots>,
    pub head: (usize, usize),
    pub total: usize,
}

impl Layout {
    fn new(arch: &ArchConfig) -> Self {
        let mut slots: Vec<ParamSlot> = Vec::new();
        let mut total = 0;
        let mut push = |name: String, shape: Vec<usize>, fan_in: usize, is_bias: bool| {
            let slot = ParamSlot { name, shape, offset: total, fan_in, is_bias };
            total += slot.len();
            slots.push(slot);
            slots.len() - 1
        };
        let k = arch.kernel;
        let h = arch.hidden_dim();
        let fc = (
            push("fc.weight".into(), vec![h, arch.latent_dim], arch.latent_dim, false),
            push("fc.bias".into(), vec![h], arch.latent_dim, true),
        );
        let mut blocks = Vec::new();
        let mut c_in = 1;
        for (i, &c_out) in arch.channels.iter().enumerate() {
            let up = (arch.upsampler == Upsampler::Transposed).then(|| {
                (
                    push(format!("block{}.up.weight", i + 1), vec![c_in, c_in, 2, 2], c_in, false),
                    push(format!("block{}.up.bias", i + 1), vec![c_in], c_in, true),
                )
            });
            let fan = c_in * k * k;
            let conv = (
                push(format!("block{}.conv.weight", i + 1), vec![c_out, c_in, k, k], fan, false),
                push(format!("block{}.conv.bias", i + 1), vec![c_out], fan, true),
            );
            blocks.push(BlockSlots { up, conv });
            c_in = c_out;
        }
        let fan = c_in * k * k;
        let head = (
            push("head.conv.weight".into(), vec![1, c_in, k, k], fan, false),
            push("head.conv.bias".into(), vec![1], fan, true),
        );
        Self { slots, fc, blocks, head, total }
    }
}

/// Flat parameter vector together with the architecture that gives it
/// meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub arch: ArchConfig,
    pub values: Vec<f64>,
}

impl NetParams {
    pub fn new(arch: ArchConfig, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let n = arch.n_params();
        if values.len() != n {
            return Err(Error::invalid(format!(
                "architecture needs {n} parameters, got {}",
                values.len()
            )));
        }
        Ok(Self { arch, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slots(&self) -> Vec<ParamSlot> {
        self.arch.layout().slots
    }
}

/// Weights uniform in ±√(1/fan_in), biases zero.
pub fn init_params(seed: u64, arch: &ArchConfig) -> Result<NetParams> {
    arch.validate()?;
    let layout = arch.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; layout.total];
    for slot in layout.slots.iter().filter(|s| !s.is_bias) {
        let bound = (1.0 / slot.fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound)
            .map_err(|e| Error::invalid(format!("bad init bound: {e}")))?;
        for v in &mut values[slot.range()] {
            *v = dist.sample(&mut rng);
        }
    }
    NetParams::new(arch.clone(), values)
}

/// Fixed network input z.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    /// Draws `k` values from Normal(0, std²).
    pub fn sample(k: usize, std: f64, rng: &mut impl Rng) -> Result<Self> {
        let dist = Normal::new(0.0, std).map_err(|e| Error::invalid(format!("latent std {std}: {e}")))?;
        Ok(Self((0..k).map(|_| dist.sample(rng)).collect()))
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent vector must be finite"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
