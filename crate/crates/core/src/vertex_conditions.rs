//! One-particle vertex conditions.
//!
//! A pair `(A, B)` of `2E × 2E` matrices defines a self-adjoint Laplacian
//! through `A F + B F' = 0` (inward derivatives) whenever `[A B]` has full
//! rank and `A Bᴴ` is Hermitian. The canonical form is `(P, L)`: `P` the
//! orthogonal projector onto `ker B`, and `L = B⁺ A Q` on `ran Q`, so that
//! the domain reads `P F = 0`, `Q F' + L Q F = 0`. The quadratic form is
//! `Σ ‖f_e'‖² − ⟨F, L F⟩`, so positive `L` is attractive.

use ndarray::Array2;
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BoundaryIndexMap, End, MetricGraph};
use crate::linalg::dense::{self, adjoint, max_abs, RANK_TOL};

/// Default absolute tolerance for structural checks.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbReport {
    pub dim: usize,
    pub rank: usize,
    pub rank_ok: bool,
    /// max entry of `A Bᴴ − (A Bᴴ)ᴴ`
    pub hermitian_defect: f64,
    pub hermitian_ok: bool,
}

impl AbReport {
    pub fn is_valid(&self) -> bool {
        self.rank_ok && self.hermitian_ok
    }
}

pub fn validate_ab(a: &Array2<c64>, b: &Array2<c64>, tol: f64) -> Result<AbReport> {
    let n = a.nrows();
    if a.ncols() != n || b.dim() != (n, n) {
        return Err(Error::Dimension(format!(
            "A is {:?} and B is {:?}; both must be square of the same size",
            a.dim(),
            b.dim()
        )));
    }
    let ab = ndarray::concatenate![ndarray::Axis(1), a.view(), b.view()];
    let rank = dense::numerical_rank(&ab, tol.max(RANK_TOL))?;
    let abh = a.dot(&adjoint(b));
    let defect = max_abs(&(&abh - &adjoint(&abh)));
    let scale = max_abs(a).max(1.0) * max_abs(b).max(1.0);
    Ok(AbReport {
        dim: n,
        rank,
        rank_ok: rank == n,
        hermitian_defect: defect,
        hermitian_ok: defect <= tol * scale,
    })
}

/// Canonical `(P, L)` of a valid pair.
pub fn ab_to_pl(a: &Array2<c64>, b: &Array2<c64>, tol: f64) -> Result<(Array2<c64>, Array2<c64>)> {
    let report = validate_ab(a, b, tol)?;
    if !report.is_valid() {
        return Err(Error::Conditions(format!(
            "(A, B) invalid: rank {} of {}, A Bᴴ Hermitian defect {:.3e}",
            report.rank, report.dim, report.hermitian_defect
        )));
    }
    let n = a.nrows();
    // B is judged against the size of the whole pair: a B that is zero up
    // to rounding must give P = 1
    let ab = ndarray::concatenate![ndarray::Axis(1), a.view(), b.view()];
    let scale = dense::op_norm(&ab)?;
    let kernel = dense::null_space_scaled(b, RANK_TOL, scale)?;
    let p = dense::projector_from_basis(&kernel);
    let q = Array2::<c64>::eye(n) - &p;
    let l = dense::pinv_scaled(b, RANK_TOL, scale)?.dot(a).dot(&q);
    Ok((p, compress(&l, &q)))
}

/// `Q (L + Lᴴ)/2 Q`, which is exactly self-adjoint and vanishes on `ran P`.
pub fn compress(l: &Array2<c64>, q: &Array2<c64>) -> Array2<c64> {
    let sym = (l + &adjoint(l)).mapv(|v| v * 0.5);
    let out = q.dot(&sym).dot(q);
    (&out + &adjoint(&out)).mapv(|v| v * 0.5)
}

pub fn equivalence_check(
    a: &Array2<c64>,
    b: &Array2<c64>,
    a2: &Array2<c64>,
    b2: &Array2<c64>,
    tol: f64,
) -> Result<bool> {
    let (p, l) = ab_to_pl(a, b, tol)?;
    let (p2, l2) = ab_to_pl(a2, b2, tol)?;
    if p.dim() != p2.dim() {
        return Ok(false);
    }
    let scale = max_abs(&l).max(max_abs(&l2)).max(1.0);
    Ok(max_abs(&(&p - &p2)) <= 1e3 * tol && max_abs(&(&l - &l2)) <= 1e3 * tol * scale)
}

/// True when `P` and `L` only couple edge ends at a common vertex.
pub fn is_local(p: &Array2<c64>, l: &Array2<c64>, idx: &BoundaryIndexMap, tol: f64) -> bool {
    let n = idx.one_particle_dim();
    if p.dim() != (n, n) || l.dim() != (n, n) {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            if idx.vertex_of(i) != idx.vertex_of(j) && (p[[i, j]].norm() > tol || l[[i, j]].norm() > tol) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexConditions {
    pub a: Array2<c64>,
    pub b: Array2<c64>,
    pub p: Array2<c64>,
    pub l: Array2<c64>,
    pub local: bool,
}

impl VertexConditions {
    pub fn from_ab(a: Array2<c64>, b: Array2<c64>, g: &MetricGraph, tol: f64) -> Result<Self> {
        expect_dim(&a, g)?;
        let (p, l) = ab_to_pl(&a, &b, tol)?;
        let local = is_local(&p, &l, &g.index_maps(), 1e3 * tol);
        Ok(Self { a, b, p, l, local })
    }

    /// Accepts a projector and a self-adjoint map; `L` is compressed to
    /// `ran Q`. The matching pair is `A = L + P`, `B = Q`.
    pub fn from_pl(p: Array2<c64>, l: Array2<c64>, g: &MetricGraph, tol: f64) -> Result<Self> {
        expect_dim(&p, g)?;
        expect_dim(&l, g)?;
        let n = p.nrows();
        let idem = max_abs(&(p.dot(&p) - &p));
        let herm = max_abs(&(&p - &adjoint(&p)));
        if idem > tol || herm > tol {
            return Err(Error::Conditions(format!(
                "P is not an orthogonal projector (‖P²−P‖ = {idem:.3e}, ‖P−Pᴴ‖ = {herm:.3e})"
            )));
        }
        let lh = max_abs(&(&l - &adjoint(&l)));
        if lh > tol * max_abs(&l).max(1.0) {
            return Err(Error::Conditions(format!("L is not self-adjoint (defect {lh:.3e})")));
        }
        let q = Array2::<c64>::eye(n) - &p;
        let l = compress(&l, &q);
        let a = &l + &p;
        let local = is_local(&p, &l, &g.index_maps(), 1e3 * tol);
        Ok(Self { a, b: q, p, l, local })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn q(&self) -> Array2<c64> {
        Array2::<c64>::eye(self.dim()) - &self.p
    }

    pub fn l_norm(&self) -> f64 {
        dense::op_norm(&self.l).unwrap_or(f64::INFINITY)
    }

    /// `(‖P F‖, ‖Q F' + L Q F‖)` for a boundary pair.
    pub fn pl_residuals(&self, f: &[c64], df: &[c64]) -> (f64, f64) {
        let f = ndarray::ArrayView1::from(f);
        let df = ndarray::ArrayView1::from(df);
        let pf = self.p.dot(&f);
        let q = self.q();
        let r = q.dot(&df) + self.l.dot(&q.dot(&f));
        (norm1(&pf), norm1(&r))
    }

    /// `‖A F + B F'‖`.
    pub fn ab_residual(&self, f: &[c64], df: &[c64]) -> f64 {
        let r = self.a.dot(&ndarray::ArrayView1::from(f)) + self.b.dot(&ndarray::ArrayView1::from(df));
        norm1(&r)
    }
}

fn norm1(v: &ndarray::Array1<c64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn expect_dim(m: &Array2<c64>, g: &MetricGraph) -> Result<()> {
    let n = 2 * g.num_edges();
    if m.dim() != (n, n) {
        return Err(Error::Dimension(format!("expected {n}×{n} boundary matrix, got {:?}", m.dim())));
    }
    Ok(())
}

/// Condition imposed at a single edge end by the mixed family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndCondition {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Dirichlet,
    Neumann,
    /// `F' + α F = 0` at every end, `α > 0`.
    Robin(f64),
    /// One entry per boundary position.
    Mixed(Vec<EndCondition>),
}

pub fn standard_family(kind: &Family, g: &MetricGraph) -> Result<VertexConditions> {
    let n = 2 * g.num_edges();
    let eye = Array2::<c64>::eye(n);
    let zero = Array2::<c64>::zeros((n, n));
    let (a, b) = match kind {
        Family::Dirichlet => (eye, zero),
        Family::Neumann => (zero, eye),
        Family::Robin(alpha) => {
            if !(alpha.is_finite() && *alpha > 0.0) {
                return Err(Error::Conditions(format!("Robin parameter must be positive, got {alpha}")));
            }
            (eye.mapv(|v| v * *alpha), eye)
        }
        Family::Mixed(mask) => {
            if mask.len() != n {
                return Err(Error::Dimension(format!("mixed mask has {} entries, expected {n}", mask.len())));
            }
            let mut a = zero.clone();
            let mut b = zero;
            for (i, m) in mask.iter().enumerate() {
                match m {
                    EndCondition::Dirichlet => a[[i, i]] = c64::new(1.0, 0.0),
                    EndCondition::Neumann => b[[i, i]] = c64::new(1.0, 0.0),
                }
            }
            (a, b)
        }
    };
    VertexConditions::from_ab(a, b, g, DEFAULT_TOL)
}

/// Local condition at one vertex, applied to all edge ends meeting there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VertexRule {
    /// every end pinned to zero
    Dirichlet,
    /// continuity and vanishing sum of inward derivatives
    Kirchhoff,
    /// continuity and `Σ F' = α f(v)`; the form gains `+α |f(v)|²`
    Delta { strength: f64 },
    /// `F' + α F = 0` at every end, no coupling between ends
    Robin { alpha: f64 },
}

/// Assemble `(A, B)` from one rule per vertex, in vertex order.
pub fn vertex_rules(g: &MetricGraph, rules: &[VertexRule]) -> Result<VertexConditions> {
    if rules.len() != g.num_vertices() {
        return Err(Error::Dimension(format!(
            "{} vertex rules for {} vertices",
            rules.len(),
            g.num_vertices()
        )));
    }
    let idx = g.index_maps();
    let n = idx.one_particle_dim();
    let mut a = Array2::<c64>::zeros((n, n));
    let mut b = Array2::<c64>::zeros((n, n));
    let one = c64::new(1.0, 0.0);
    for (v, rule) in rules.iter().enumerate() {
        let ends = &idx.vertex_blocks()[v];
        if ends.is_empty() {
            continue;
        }
        // rows are labelled by the positions of the vertex's ends
        match rule {
            VertexRule::Dirichlet => {
                for &i in ends {
                    a[[i, i]] = one;
                }
            }
            VertexRule::Robin { alpha } => {
                for &i in ends {
                    a[[i, i]] = c64::new(*alpha, 0.0);
                    b[[i, i]] = one;
                }
            }
            VertexRule::Kirchhoff | VertexRule::Delta { .. } => {
                let strength = match rule {
                    VertexRule::Delta { strength } => *strength,
                    _ => 0.0,
                };
                for w in ends.windows(2) {
                    a[[w[0], w[0]]] = one;
                    a[[w[0], w[1]]] = -one;
                }
                let last = *ends.last().unwrap();
                for &i in ends {
                    b[[last, i]] = one;
                }
                a[[last, ends[0]]] = c64::new(-strength, 0.0);
            }
        }
    }
    VertexConditions::from_ab(a, b, g, DEFAULT_TOL)
}

/// Edge-end labels for reports.
pub fn end_label(g: &MetricGraph, pos: usize) -> String {
    let (e, end) = g.index_maps().one_particle_inverse(pos);
    match end {
        End::Start => format!("e{e}(0)"),
        End::Finish => format!("e{e}(l)"),
    }
}

/// Hermitian part helper used by callers that build maps by hand.
pub fn hermitian_part(m: &Array2<c64>) -> Array2<c64> {
    (m + &adjoint(m)).mapv(|v| v * 0.5)
}
