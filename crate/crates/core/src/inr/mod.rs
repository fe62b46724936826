//! Activations, time encoding, and the bias-modulated frame network.

mod activation;
mod network;
mod rff;
mod trig;

pub use activation::{gabor, gauss, gelu, sine, ActivationKind};
pub use network::{
    bias_inr_forward, frame_forward_graph, frame_inr_forward, frame_weight_bound, init_params, BiasInrParams, BiasMode,
    BiasSource, BiasTable, BlockModel, Dense, FrameInrParams, HyperBias, InitParams, InrArch, Query, TableLookup,
    OFFSET_SCALE,
};
pub use rff::RffEncoder;
