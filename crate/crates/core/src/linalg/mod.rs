//! Linear algebra kernels: dense, banded and sparse.

pub mod band;
pub mod dense;
pub mod sparse;

pub use band::{inertia_below, BandLu};
pub use dense::{hermitian_eigen, largest_singular_value, CMatrix, DenseLu, HermitianEigen};
pub use sparse::{gmres, CsrMatrix};
