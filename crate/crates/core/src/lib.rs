//! L2-1σ time stepping for the subdiffusion equation `∂_t^α u = Δu + f` on
//! nonuniform time meshes.
//!
//! * [`mesh`] builds graded and r-variable meshes and certifies step ratios.
//! * [`kernel`] computes the operator coefficients and applies the operator.
//! * [`analysis`] checks positive semidefiniteness and the coefficient
//!   property suites, and builds the complementary kernel.
//! * [`solver`] marches the scheme in 1D (finite differences) and 2D (Fourier).
//! * [`harness`] runs convergence studies, pointwise comparisons and soaks.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod mesh;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use kernel::{CoefficientBackend, FractionalOrder, KernelRow, KernelTable};
pub use mesh::TimeMesh;
