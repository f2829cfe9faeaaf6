pub mod dense;
pub mod envelope;
pub mod lanczos;
pub mod ordering;
pub mod sparse;

pub use sparse::CsrMatrix;
