//! Structured residual reconstruction for low-bit weight quantization.
//!
//! A weight matrix `W` is approximated as `Q + L R`: a block-quantized
//! matrix plus a rank-`r` correction. The rank budget is split between
//! preserving the dominant directions of the activation-scaled weight `S W`
//! before quantization (`k` ranks) and reconstructing the scaled
//! quantization error afterwards (`r - k` ranks). The split is chosen from
//! the singular spectrum of `S W` and one random probe matrix.
//!
//! ```
//! use srr_core::linalg::Matrix;
//! use srr_core::quant::QuantizerConfig;
//! use srr_core::reconstruct::{srr_decompose, SplitChoice};
//! use srr_core::scaling::ScalingOperator;
//!
//! let w = Matrix::from_fn(48, 64, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
//! let s = ScalingOperator::identity(48);
//! let cfg = QuantizerConfig::mxint(3).unwrap();
//! let dec = srr_decompose(&w, &s, &cfg, 8, SplitChoice::Auto { probe_seed: 0 }).unwrap();
//! assert!(dec.k <= 8);
//! ```

pub mod adapter;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod quant;
pub mod reconstruct;
pub mod rng;
pub mod scaling;

pub use error::{Result, SrrError};
