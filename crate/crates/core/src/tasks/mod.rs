//! Training loop and the video tasks built on it.

mod ablation;
mod bundle;
mod config;
mod fit;
mod ops;
mod sample;

pub use ablation::{
    ablation_csv, run_study, scale_to_budget, spearman, unit_parameter_count, video_parameter_count, AblationRow,
    Study, GOP_SETTINGS, PATCH_SETTINGS, WIDTH_SETTINGS,
};
pub use bundle::{decode_bundle, encode_bundle, load_bundle, save_bundle, MAGIC};
pub use config::{activation_from_parts, FitConfig, DESK_RFF_VARIANCE};
pub use fit::{
    fit_block, fit_unit, fit_video, fit_video_with, train_indices, unit_layout, BiasKind, FitOutcome, FitReport,
    ModelBundle, UnitModel,
};
pub use ops::{
    bias_temporal_variance, bias_trajectories, denoise, filter_bias_trajectories, first_principal_scores, fit_task,
    inpaint, interpolate, linear_bias_baseline, make_inpaint_masks, mask_side, mean_fill, median_filter,
    oracle_baseline, pearson, photon_noise_values, split_frames, superres, superres_input, synthesize_photon_noise,
    trajectory_csv, BiasSample, NoiseModel, TaskResult,
};
pub use sample::{render_grid, sample_continuous, SamplePoint};
