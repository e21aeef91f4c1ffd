//! Convolutional generator mapping a fixed latent vector to a
//! log-conductivity model, with hand-written gradients.

mod arch;
mod checkpoint;
pub mod layers;
mod model;
mod tensor;

pub use arch::{
    default_channels, init_params, ArchConfig, LatentVector, NetParams, ParamSlot, Upsampler,
};
pub use checkpoint::{checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint};
pub use model::{net_backward, net_forward, Crop, ForwardTrace, Mode};
pub use tensor::Tensor4;
