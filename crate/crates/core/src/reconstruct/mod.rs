//! Quantization-error reconstruction (QER), rank-split selection and the
//! preserve / quantize / reconstruct pipeline.

mod eta;
mod pipeline;
mod probe;
mod select;

pub use eta::{estimate_eta, EtaEstimate};
pub use pipeline::{
    oracle_best_split, qer_decompose, qer_reconstruct, scaled_recon_error, srr_decompose,
    srr_decompose_with_cache, srr_global_recon, OracleResult, SplitChoice, SrrDecomposition,
    Variant, EXACT_PROFILE_LIMIT,
};
pub use probe::{global_probe_cache, probe_matrix, probe_profile, ProbeCache};
pub use select::{select_k, SplitSelection};
