//! Convolutional sparse coding (CSC) and its multi-layer extension (ML-CSC).
//!
//! An image `x` is modelled as `x = DΓ`, a sum of shifted small atoms weighted
//! by a sparse representation `Γ`. The crate provides:
//!
//! * [`tensor`]: dense `H × W × C` tensors, PSNR, noise;
//! * [`dictionary`]: the synthesis operator, its adjoint and atom utilities;
//! * [`sparsify`]: soft thresholding, global and per-needle ℓ0 projections
//!   and sparsity reports;
//! * [`pursuit`]: ISTA, iterative hard thresholding and layered thresholding;
//! * [`mlcsc`]: cascades `x = D₁D₂⋯D_LΓ_L`, effective dictionaries and random
//!   sparse sampling;
//! * [`denoise`]: single-image denoising with fixed or learned dictionaries;
//! * [`io`]: the `CSCT`/`CSCD` containers and PGM/PPM images.

pub mod denoise;
pub mod dictionary;
pub mod error;
pub mod io;
pub mod mlcsc;
mod par;
pub mod pursuit;
pub mod rng;
pub mod sparsify;
pub mod tensor;
pub mod testimage;

pub use dictionary::{ConvDictionary, DictGeometry};
pub use error::{CscError, Result};
pub use mlcsc::{Layer, MlCscModel, SparseSample};
pub use pursuit::{PursuitConfig, PursuitTrace, StepSize};
pub use rng::Rng;
pub use sparsify::{SparsityReport, SparsityRule};
pub use tensor::Tensor3;
