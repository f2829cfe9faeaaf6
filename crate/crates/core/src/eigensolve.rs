//! Smallest eigenpairs of a reduced pencil and the counting function.

use std::io::{self, Write};

use log::info;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::form_assembly::{DiscreteForm, Pencil};
use crate::linalg::dense;
use crate::linalg::lanczos::{self, LanczosOptions};
use crate::scalar::{dot, Field};
use crate::symmetry::Sector;

/// Pencils up to this size are solved densely.
pub const DENSE_THRESHOLD: usize = 3000;

/// Relative gap below which neighbouring eigenvalues count as one level.
pub const TIE_TOL: f64 = 1e-8;

pub const THRESHOLD_ENV: &str = "QG2P_DENSE_THRESHOLD";

pub fn dense_threshold() -> usize {
    std::env::var(THRESHOLD_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DENSE_THRESHOLD)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub method: Method,
    /// Known lower bound of the spectrum, used to seed the iterative shift.
    pub lower_bound: f64,
    pub seed: u64,
    pub keep_vectors: bool,
    pub sector: Sector,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            lower_bound: -1.0,
            seed: 0x5eed,
            keep_vectors: false,
            sector: Sector::Full,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult<S> {
    pub eigenvalues: Vec<f64>,
    /// Size of the level each eigenvalue belongs to.
    pub multiplicities: Vec<usize>,
    /// `‖A x − λ M x‖ / ‖x‖_M` on the reduced pencil.
    pub residuals: Vec<f64>,
    /// Reduced-coordinate eigenvectors, `M`-orthonormal.
    #[serde(skip)]
    pub vectors: Option<Vec<Vec<S>>>,
    pub sector: Sector,
    pub method: Method,
    pub dim: usize,
}

impl<S> SpectrumResult<S> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn count(&self, lambda: f64) -> usize {
        counting_function(&self.eigenvalues, lambda)
    }
}

/// `#{i : λ_i ≤ λ}` for ascending `values`.
pub fn counting_function(values: &[f64], lambda: f64) -> usize {
    values.partition_point(|&v| v <= lambda)
}

/// Level sizes of an ascending list, grouping values within `tol` relative.
pub fn multiplicities(values: &[f64], tol: f64) -> Vec<usize> {
    let mut out = vec![0; values.len()];
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || {
            let (a, b) = (values[i - 1], values[i]);
            (b - a).abs() > tol * a.abs().max(b.abs()).max(1.0)
        };
        if split {
            out[start..i].fill(i - start);
            start = i;
        }
    }
    out
}

fn residual<S: Field>(p: &Pencil<S>, lambda: f64, x: &[S]) -> f64 {
    let ax = p.a.apply(x);
    let mx = p.m.apply(x);
    let r: Vec<S> = ax.iter().zip(&mx).map(|(a, m)| *a - m.mul_real(lambda)).collect();
    let mnorm = dot(x, &mx).re().max(f64::MIN_POSITIVE).sqrt();
    dot(&r, &r).re().sqrt() / mnorm
}

/// The `k` smallest eigenpairs of `p`.
pub fn solve<S: Field>(p: &Pencil<S>, k: usize, opts: &SolveOptions) -> Result<SpectrumResult<S>> {
    let dim = p.dim();
    if k == 0 || k > dim {
        return Err(Error::Argument(format!("requested {k} eigenvalues of a dimension {dim} problem")));
    }
    let method = match opts.method {
        Method::Auto if dim <= dense_threshold() => Method::Dense,
        Method::Auto => Method::Iterative,
        m => m,
    };
    info!("solving {k} eigenvalues of a dimension {dim} pencil ({method:?})");
    let (values, vectors): (Vec<f64>, Vec<Vec<S>>) = match method {
        Method::Dense => {
            let (vals, vecs) = dense::eigh_generalized(p.a.to_dense(), p.m.to_dense()).map_err(|e| {
                Error::Numerical(format!("dense generalized eigensolver failed (is the mass positive definite?): {e}"))
            })?;
            let cols = (0..k).map(|c| vecs.column(c).to_vec()).collect();
            (vals[..k].to_vec(), cols)
        }
        _ => {
            let lo = LanczosOptions {
                lower_bound: opts.lower_bound,
                seed: opts.seed,
                ..LanczosOptions::default()
            };
            let r = lanczos::smallest(&p.a, &p.m, k, &lo)?;
            (r.values, r.vectors)
        }
    };
    let residuals = values.iter().zip(&vectors).map(|(&l, x)| residual(p, l, x)).collect();
    Ok(SpectrumResult {
        multiplicities: multiplicities(&values, TIE_TOL),
        eigenvalues: values,
        residuals,
        vectors: opts.keep_vectors.then_some(vectors),
        sector: opts.sector,
        method,
        dim,
    })
}

/// Solves the constrained pencil of a form, seeding the shift from its
/// lower-bound constant.
pub fn solve_form<S: Field>(form: &DiscreteForm<S>, k: usize) -> Result<SpectrumResult<S>> {
    let opts = SolveOptions {
        lower_bound: -1.05 * form.c_infty - 1.0,
        ..SolveOptions::default()
    };
    solve(&form.pencil(), k, &opts)
}

/// Writes `index,eigenvalue,multiplicity,residual` rows.
pub fn write_csv<S, W: Write>(s: &SpectrumResult<S>, mut w: W) -> io::Result<()> {
    writeln!(w, "index,eigenvalue,multiplicity,residual")?;
    for i in 0..s.len() {
        writeln!(
            w,
            "{},{:.15e},{},{:.3e}",
            i + 1,
            s.eigenvalues[i],
            s.multiplicities[i],
            s.residuals[i]
        )?;
    }
    Ok(())
}
