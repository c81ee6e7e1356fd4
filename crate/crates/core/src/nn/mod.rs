//! Layers: parameter storage, dense stacks and graph convolutions.

pub mod dense;
pub mod gnn;
pub mod params;

pub use dense::{dense_forward, Activation, DenseLayer, Mlp};
pub use gnn::{
    conv_forward, dmpnn_forward, gat_attention, global_mean_pool, ConvKind, ConvParams,
    ConvStack, DmpnnParams, GnnConfig, GnnEncoder,
};
pub use params::{ParamId, ParamStore};
