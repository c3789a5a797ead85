//! Axially-variant kernel image formation for ultrasound.
//!
//! The observation model is `y = H P x + n`: `P` pads the tissue
//! reflectivity image `x`, `H` convolves each output row with its own
//! depth-dependent kernel, and `n` is white Gaussian noise. The crate provides
//! matrix-free `H` and `Hᵀ`, Kronecker-structured padding, an elastic-net
//! proximal gradient deconvolver, synthetic phantoms and the on-disk formats
//! used by the `axialconv` command line tool.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the double-precision types used by the CLI.

pub mod axial;
pub mod bmode;
pub mod error;
pub mod experiment;
pub mod image;
pub mod noise;
pub mod ops;
pub mod padding;
pub mod phantom;
pub mod scalar;
pub mod solver;
pub mod sparse;
pub mod tensor;
pub mod verify;

pub use axial::{adjoint_h, forward_h, materialize_h, AxialKernelStack, ForwardModel};
pub use error::{Error, Result};
pub use experiment::ExperimentConfig;
pub use image::{Image, IndexRange};
pub use noise::Snr;
pub use padding::{make_pad_1d, make_pad_2d, PadMode};
pub use phantom::{make_stack, KernelParams};
pub use scalar::Scalar;
pub use solver::{deconvolve, SolverConfig, SolverReport, StepPolicy};
pub use sparse::{kronecker, SparseOperator};
pub use tensor::{TensorFile, TensorTag};

pub type Image64 = Image<f64>;
pub type Image32 = Image<f32>;
pub type Stack64 = AxialKernelStack<f64>;
pub type Stack32 = AxialKernelStack<f32>;
pub type Model64 = ForwardModel<f64>;
pub type Model32 = ForwardModel<f32>;
pub type Sparse64 = SparseOperator<f64>;
