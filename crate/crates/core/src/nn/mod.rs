//! Dense networks, backpropagation and autoencoder training.

mod activation;
mod autoencoder;
mod losses;
mod network;
mod weights;

pub use activation::Activation;
pub use autoencoder::{
    benchmark_architecture, encoder_pairs, head_architecture, pretrain, pretrain_stage,
    train_autoencoder, AutoencoderBundle, Normalization, TrainConfig, TrainingSummary,
};
pub use losses::{
    discriminator_losses, discriminator_loss_gradients, reconstruction_loss_gradients,
    scaled_costs, surrogate_loss_gradients, LOG_CLAMP,
};
pub use network::{build_network, DenseLayer, DenseNetwork, ForwardCache, NetworkAdam, NetworkGradients};
