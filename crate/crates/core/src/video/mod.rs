//! Video ingestion and emission, patch/GOP decomposition, and reassembly.

mod grid;
mod io;
mod tensor;

pub use grid::{
    assemble, gop_time, normalized_coord, partition, partition_with, patch_coords, ramp_weight, Block, PatchGrid,
    MIN_PATCH,
};
pub use io::{list_pngs, load_frames, load_mask, save_frames, save_mask, to_byte};
pub use tensor::VideoTensor;
