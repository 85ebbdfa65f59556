//! Image-free blind deblurring.
//!
//! A small linear convolutional network is trained on a random gallery of
//! Gaussian blur kernels so that its impulse response inverts the whole
//! gallery. Because the network is linear it collapses into one explicit
//! restoration kernel, which deblurs (and, after bicubic upsampling,
//! super-resolves) any image with a single convolution.
//!
//! Modules follow the pipeline: [`signal`] primitives, the kernel
//! [`gallery`], the [`lcnn`] model, the [`dil`] training objective,
//! [`restore`] for images and [`eval`] for the quantitative harness.

pub mod cli;
pub mod dil;
pub mod error;
pub mod eval;
pub mod gallery;
pub mod grid;
pub mod image_io;
pub mod lcnn;
pub mod restore;
pub mod signal;

pub use error::{Error, Result};
pub use grid::{ComplexGrid2D, Grid2D};
