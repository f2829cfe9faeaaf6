//! Envelope (profile) `L D Lᴴ` factorization of Hermitian matrices.
//!
//! No pivoting: the factorization is used both for positive definite
//! shifted pencils and for Sturm counts of indefinite ones, where the
//! inertia of `D` equals the inertia of the matrix.

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::Field;

pub struct EnvelopeLdl<S> {
    /// first stored column of each row of the strict lower triangle
    first: Vec<usize>,
    /// offsets of each row's storage into `lower`
    offset: Vec<usize>,
    lower: Vec<S>,
    diag: Vec<f64>,
}

impl<S: Field> EnvelopeLdl<S> {
    /// Factors a Hermitian matrix given through its lower triangle.
    pub fn factor(a: &CsrMatrix<S>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Dimension("envelope factor needs a square matrix".into()));
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, _) in a.triplets() {
            if j < i {
                first[i] = first[i].min(j);
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i]);
        }
        let mut lower = vec![S::zero(); offset[n]];
        let mut diag = vec![0.0; n];
        for (i, j, v) in a.triplets() {
            if j < i {
                lower[offset[i] + j - first[i]] = v;
            } else if i == j {
                diag[i] = v.re();
            }
        }
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);

        // u[k] = L[i][k] * D[k] for the row being processed
        let mut u = vec![S::zero(); n];
        for i in 0..n {
            let fi = first[i];
            let row_i = offset[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let row_j = offset[j];
                let mut s = lower[row_i + j - fi];
                for k in start..j {
                    s -= u[k] * lower[row_j + k - fj].conj();
                }
                u[j] = s;
                lower[row_i + j - fi] = s.div_real(diag[j]);
            }
            let mut d = diag[i];
            for k in fi..i {
                d -= (u[k] * lower[row_i + k - fi].conj()).re();
            }
            if !d.is_finite() || d.abs() <= 1e-300_f64.max(scale * 1e-15) {
                return Err(Error::Numerical(format!(
                    "zero pivot at row {i} of envelope factorization"
                )));
            }
            diag[i] = d;
        }
        Ok(Self {
            first,
            offset,
            lower,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of negative pivots, i.e. negative eigenvalues of the factored matrix.
    pub fn negative_count(&self) -> usize {
        self.diag.iter().filter(|&&d| d < 0.0).count()
    }

    pub fn stored(&self) -> usize {
        self.lower.len()
    }

    pub fn solve_in_place(&self, x: &mut [S]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let mut s = x[i];
            for (k, l) in row.iter().enumerate() {
                s -= *l * x[fi + k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] = x[i].div_real(self.diag[i]);
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            for (k, l) in row.iter().enumerate() {
                x[fi + k] -= l.conj() * xi;
            }
        }
    }
}
