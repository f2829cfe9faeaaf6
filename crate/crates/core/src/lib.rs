//! Two-particle Laplacians on compact metric graphs with singular,
//! vertex-localized interactions: boundary-condition algebra, finite
//! element discretization, exchange symmetry and spectral diagnostics.

pub mod bc_maps;
pub mod eigensolve;
pub mod error;
pub mod form_assembly;
pub mod graph;
pub mod linalg;
pub mod scalar;
pub mod spectral_analysis;
pub mod symmetry;
pub mod vertex_conditions;

pub use error::{Error, Result};
pub use ndarray_linalg::c64;
pub use scalar::Field;
