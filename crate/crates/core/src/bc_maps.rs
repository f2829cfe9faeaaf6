//! Two-particle boundary maps `y ↦ (P(y), L(y))` on `ℂ^{4E²}`.
//!
//! `y ∈ [0, 1]` is the normalized coordinate of the particle that runs
//! along an edge while the other one sits at an edge end. Maps are kept as
//! closed-form descriptors and sampled at the boundary nodes of a mesh.

use std::fmt;
use std::sync::Arc;

use ndarray::{s, Array2};
use ndarray_linalg::c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{build_graph, BoundaryIndexMap, EdgeSpec, GraphSpec, MetricGraph, VertexId};
use crate::linalg::dense::{self, adjoint, max_abs};
use crate::vertex_conditions::{ab_to_pl, validate_ab, AbReport, VertexConditions, DEFAULT_TOL};

/// Symmetric interaction potential `v(x, y) = v(y, x)`.
#[derive(Clone)]
pub struct Potential {
    pub name: String,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Potential {
    pub fn new(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_, _| 0.0)
    }

    /// `a · exp(−(x² + y²)/w²) · χ(r/R)` with the smooth cutoff
    /// `χ(t) = exp(1 − 1/(1 − t²))` for `t < 1` and zero beyond.
    pub fn gaussian_bump(amplitude: f64, width: f64, cutoff: f64) -> Self {
        Self::new(format!("gaussian(a={amplitude}, w={width}, R={cutoff})"), move |x, y| {
            let r2 = x * x + y * y;
            let t2 = r2 / (cutoff * cutoff);
            if t2 >= 1.0 {
                return 0.0;
            }
            amplitude * (-r2 / (width * width)).exp() * (1.0 - 1.0 / (1.0 - t2)).exp()
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Potential({})", self.name)
    }
}

#[derive(Clone, Debug)]
pub struct DeltaExample {
    pub potential: Potential,
    pub truncation: f64,
}

impl DeltaExample {
    /// `A(y), B(y)` acting on `(ψ₁₁, ψ₂₁, ψ₁₂, ψ₂₂)(0, T y)`.
    pub fn ab(&self, y: f64) -> (Array2<c64>, Array2<c64>) {
        let t = self.truncation;
        let c = |x: f64| c64::new(x, 0.0);
        let mut a = Array2::<c64>::zeros((4, 4));
        let mut b = Array2::<c64>::zeros((4, 4));
        a[[0, 0]] = c(1.0);
        a[[0, 1]] = c(-1.0);
        a[[1, 1]] = c(self.potential.eval(0.0, t * y));
        a[[2, 2]] = c(1.0);
        a[[2, 3]] = c(-1.0);
        a[[3, 3]] = c(self.potential.eval(0.0, -t * y));
        b[[1, 0]] = c(-1.0);
        b[[1, 1]] = c(-1.0);
        b[[3, 2]] = c(-1.0);
        b[[3, 3]] = c(-1.0);
        (a, b)
    }

    /// Positions of `(ψ₁₁, ψ₂₁, ψ₁₂, ψ₂₂)(0, y)` inside the first half.
    pub const CENTRE_POSITIONS: [usize; 4] = [0, 1, 4, 5];
    /// Far ends, pinned by Dirichlet conditions.
    pub const FAR_POSITIONS: [usize; 4] = [2, 3, 6, 7];
}

#[derive(Clone, Debug)]
pub enum MapKind {
    /// `(P, L)` constant on consecutive intervals of `[0, 1]`; `breaks` are
    /// the interior breakpoints, a piece starts at its left breakpoint.
    Piecewise {
        breaks: Vec<f64>,
        pieces: Vec<(Array2<c64>, Array2<c64>)>,
    },
    /// `1 ⊗ (P⁽¹⁾, L⁽¹⁾)` replicated over every running edge of both halves.
    Lifted { p1: Array2<c64>, l1: Array2<c64> },
    /// Lifted projector with `L(y) = a φ((y − c)/w) Q`, `φ` a smooth bump
    /// supported in `(−1, 1)`.
    Bump {
        p1: Array2<c64>,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    DeltaExample(DeltaExample),
}

#[derive(Clone, Debug)]
pub struct BoundaryMap {
    num_edges: usize,
    kind: MapKind,
}

#[derive(Clone, Debug)]
pub struct MapSample {
    pub y: f64,
    pub p: Array2<c64>,
    pub l: Array2<c64>,
}

/// Smooth bump `exp(1 − 1/(1 − t²))` on `|t| < 1`, equal to 1 at `t = 0`.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Expand a half block (`2E²`) to the full space as `diag(X, X)`, or pass a
/// full matrix through.
fn expand(m: Array2<c64>, num_edges: usize) -> Result<Array2<c64>> {
    let half = 2 * num_edges * num_edges;
    match m.dim() {
        (r, c) if r == c && r == 2 * half => Ok(m),
        (r, c) if r == c && r == half => {
            let mut out = Array2::zeros((2 * half, 2 * half));
            out.slice_mut(s![..half, ..half]).assign(&m);
            out.slice_mut(s![half.., half..]).assign(&m);
            Ok(out)
        }
        d => Err(Error::Dimension(format!(
            "boundary map matrix is {d:?}, expected {0}×{0} or {1}×{1}",
            2 * half,
            half
        ))),
    }
}

/// `1_{2E} ⊗ X`: the one-particle matrix on every running edge of both halves.
pub fn lift_matrix(x: &Array2<c64>, num_edges: usize) -> Array2<c64> {
    let k = 2 * num_edges;
    let mut out = Array2::zeros((2 * num_edges * k, 2 * num_edges * k));
    for r in 0..2 * num_edges {
        out.slice_mut(s![r * k..(r + 1) * k, r * k..(r + 1) * k]).assign(x);
    }
    out
}

impl BoundaryMap {
    pub fn constant(p: Array2<c64>, l: Array2<c64>, num_edges: usize) -> Result<Self> {
        Self::piecewise(Vec::new(), vec![(p, l)], num_edges)
    }

    pub fn piecewise(breaks: Vec<f64>, pieces: Vec<(Array2<c64>, Array2<c64>)>, num_edges: usize) -> Result<Self> {
        if pieces.len() != breaks.len() + 1 {
            return Err(Error::Map(format!(
                "{} breakpoints need {} pieces, got {}",
                breaks.len(),
                breaks.len() + 1,
                pieces.len()
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) || breaks.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::Map("breakpoints must increase strictly inside (0, 1)".into()));
        }
        let pieces = pieces
            .into_iter()
            .map(|(p, l)| Ok((expand(p, num_edges)?, expand(l, num_edges)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            num_edges,
            kind: MapKind::Piecewise { breaks, pieces },
        })
    }

    pub fn bump(p1: Array2<c64>, amplitude: f64, center: f64, width: f64, num_edges: usize) -> Result<Self> {
        if p1.dim() != (2 * num_edges, 2 * num_edges) {
            return Err(Error::Dimension(format!("one-particle projector is {:?}", p1.dim())));
        }
        if !(width > 0.0) || !amplitude.is_finite() {
            return Err(Error::Map("bump needs a positive width and finite amplitude".into()));
        }
        Ok(Self {
            num_edges,
            kind: MapKind::Bump {
                p1,
                amplitude,
                center,
                width,
            },
        })
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn dim(&self) -> usize {
        4 * self.num_edges * self.num_edges
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn is_lifted(&self) -> bool {
        matches!(self.kind, MapKind::Lifted { .. })
    }

    /// `(P(y), L(y))` on the full space.
    pub fn eval(&self, y: f64) -> Result<(Array2<c64>, Array2<c64>)> {
        match &self.kind {
            MapKind::Piecewise { breaks, pieces } => {
                let i = breaks.iter().filter(|&&b| b <= y).count();
                Ok(pieces[i].clone())
            }
            MapKind::Lifted { p1, l1 } => Ok((lift_matrix(p1, self.num_edges), lift_matrix(l1, self.num_edges))),
            MapKind::Bump {
                p1,
                amplitude,
                center,
                width,
            } => {
                let p = lift_matrix(p1, self.num_edges);
                let q = Array2::<c64>::eye(p.nrows()) - &p;
                let s = amplitude * bump((y - center) / width);
                Ok((p, q.mapv(|v| v * s)))
            }
            MapKind::DeltaExample(ex) => {
                let (a, b) = ex.ab(y);
                let (pc, lc) = ab_to_pl(&a, &b, DEFAULT_TOL)?;
                let mut p = Array2::<c64>::zeros((8, 8));
                let mut l = Array2::<c64>::zeros((8, 8));
                for (i, &pi) in DeltaExample::CENTRE_POSITIONS.iter().enumerate() {
                    for (j, &pj) in DeltaExample::CENTRE_POSITIONS.iter().enumerate() {
                        p[[pi, pj]] = pc[[i, j]];
                        l[[pi, pj]] = lc[[i, j]];
                    }
                }
                for &f in &DeltaExample::FAR_POSITIONS {
                    p[[f, f]] = c64::new(1.0, 0.0);
                }
                Ok((expand(p, 2)?, expand(l, 2)?))
            }
        }
    }

    pub fn sample(&self, ys: &[f64]) -> Result<Vec<MapSample>> {
        ys.iter()
            .enumerate()
            .map(|(index, &y)| {
                self.eval(y)
                    .map(|(p, l)| MapSample { y, p, l })
                    .map_err(|e| Error::MapSample {
                        index,
                        y,
                        reason: e.to_string(),
                    })
            })
            .collect()
    }
}

/// Uniform sample points `j/(n−1)`, the boundary node coordinates of a mesh
/// with `n` nodes per edge.
pub fn uniform_samples(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
}

pub fn lift_one_particle(vc: &VertexConditions, g: &MetricGraph) -> BoundaryMap {
    BoundaryMap {
        num_edges: g.num_edges(),
        kind: MapKind::Lifted {
            p1: vc.p.clone(),
            l1: vc.l.clone(),
        },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MapReport {
    pub samples: usize,
    pub dim: usize,
    pub max_idempotency_defect: f64,
    pub max_p_hermitian_defect: f64,
    pub max_l_hermitian_defect: f64,
    pub max_qlq_defect: f64,
    pub l_max: f64,
    pub block_structured: bool,
    pub corner_regular: bool,
    pub corner_margin: f64,
    /// For `E = 1` and rank-one half blocks `[[β, γ], [γ̄, 1−β]]`: the
    /// largest `| |γ|² − (β − β²) |`.
    pub rank_one_defect: Option<f64>,
    pub noninteracting: bool,
    pub warnings: Vec<String>,
}

/// Default width of the corner strips `[0, ε] ∪ [1 − ε, 1]`.
pub const CORNER_MARGIN: f64 = 0.1;

pub fn validate_map(m: &BoundaryMap, ys: &[f64], tol: f64) -> Result<MapReport> {
    validate_samples(&m.sample(ys)?, m.num_edges(), tol, CORNER_MARGIN)
}

pub fn validate_samples(samples: &[MapSample], num_edges: usize, tol: f64, margin: f64) -> Result<MapReport> {
    if samples.is_empty() {
        return Err(Error::Map("a boundary map needs at least one sample".into()));
    }
    let dim = 4 * num_edges * num_edges;
    let half = dim / 2;
    let mut rep = MapReport {
        samples: samples.len(),
        dim,
        max_idempotency_defect: 0.0,
        max_p_hermitian_defect: 0.0,
        max_l_hermitian_defect: 0.0,
        max_qlq_defect: 0.0,
        l_max: 0.0,
        block_structured: true,
        corner_regular: true,
        corner_margin: margin,
        rank_one_defect: None,
        noninteracting: false,
        warnings: Vec::new(),
    };
    let eye = Array2::<c64>::eye(dim);
    for (index, smp) in samples.iter().enumerate() {
        let fail = |reason: String| Error::MapSample { index, y: smp.y, reason };
        if smp.p.dim() != (dim, dim) || smp.l.dim() != (dim, dim) {
            return Err(fail(format!("matrices are {:?}/{:?}, expected {dim}×{dim}", smp.p.dim(), smp.l.dim())));
        }
        let (p, l) = (&smp.p, &smp.l);
        let idem = max_abs(&(p.dot(p) - p));
        let ph = max_abs(&(p - &adjoint(p)));
        let lh = max_abs(&(l - &adjoint(l)));
        let q = &eye - p;
        let qlq = max_abs(&(l - &q.dot(l).dot(&q)));
        let lscale = max_abs(l).max(1.0);
        if idem > tol {
            return Err(fail(format!("P is not idempotent (‖P²−P‖ = {idem:.3e})")));
        }
        if ph > tol {
            return Err(fail(format!("P is not Hermitian (‖P−Pᴴ‖ = {ph:.3e})")));
        }
        if lh > tol * lscale {
            return Err(fail(format!("L is not Hermitian (‖L−Lᴴ‖ = {lh:.3e})")));
        }
        if qlq > tol * lscale {
            return Err(fail(format!("L does not vanish on ran P (‖L−QLQ‖ = {qlq:.3e})")));
        }
        rep.max_idempotency_defect = rep.max_idempotency_defect.max(idem);
        rep.max_p_hermitian_defect = rep.max_p_hermitian_defect.max(ph);
        rep.max_l_hermitian_defect = rep.max_l_hermitian_defect.max(lh);
        rep.max_qlq_defect = rep.max_qlq_defect.max(qlq);
        rep.l_max = rep.l_max.max(dense::op_norm(l)?);

        rep.block_structured &= is_block_structured(p, tol) && is_block_structured(l, tol * lscale);

        if smp.y <= margin || smp.y >= 1.0 - margin {
            let l_zero = max_abs(l) <= tol;
            let p_diag = p
                .indexed_iter()
                .all(|((i, j), v)| if i == j { v.im.abs() <= tol && (v.re.abs() <= tol || (v.re - 1.0).abs() <= tol) } else { v.norm() <= tol });
            if !(l_zero && p_diag) {
                rep.corner_regular = false;
            }
        }

        if num_edges == 1 {
            let x = p.slice(s![..half, ..half]);
            let trace = (x[[0, 0]] + x[[1, 1]]).re;
            if (trace - 1.0).abs() <= 1e-8 {
                let beta = x[[0, 0]].re;
                let gamma = x[[0, 1]];
                let d = (gamma.norm_sqr() - (beta - beta * beta)).abs();
                rep.rank_one_defect = Some(rep.rank_one_defect.unwrap_or(0.0).max(d));
            }
        }
    }
    if !rep.corner_regular {
        rep.warnings.push(format!(
            "corner regularity fails: within {margin} of y = 0 or y = 1 the map is not pure Dirichlet/Neumann \
             (L ≠ 0 or P not diagonal 0/1); the operator is still defined through its form"
        ));
    }
    if !rep.block_structured {
        rep.warnings.push("map lacks the two-identical-blocks structure; exchange sectors are unavailable".into());
    }
    rep.noninteracting = samples_noninteracting(samples, num_edges, tol);
    Ok(rep)
}

fn is_block_structured(m: &Array2<c64>, tol: f64) -> bool {
    let half = m.nrows() / 2;
    let a = m.slice(s![..half, ..half]);
    let d = m.slice(s![half.., half..]);
    let off = m.slice(s![..half, half..]).iter().chain(m.slice(s![half.., ..half]).iter()).all(|v| v.norm() <= tol);
    off && a.iter().zip(d.iter()).all(|(x, y)| (x - y).norm() <= tol)
}

/// Whether each half equals `1_E ⊗ X` for a single `2E × 2E` block `X`.
fn is_replicated(m: &Array2<c64>, num_edges: usize, tol: f64) -> bool {
    let k = 2 * num_edges;
    for half in 0..2 {
        let base = half * num_edges * k;
        let first = m.slice(s![base..base + k, base..base + k]).to_owned();
        for r in 0..num_edges {
            for c in 0..num_edges {
                let (i0, j0) = (base + r * k, base + c * k);
                let blk = m.slice(s![i0..i0 + k, j0..j0 + k]);
                let ok = if r == c {
                    blk.iter().zip(first.iter()).all(|(x, y)| (x - y).norm() <= tol)
                } else {
                    blk.iter().all(|v| v.norm() <= tol)
                };
                if !ok {
                    return false;
                }
            }
        }
    }
    let n = m.nrows();
    let h = n / 2;
    m.slice(s![..h, h..]).iter().chain(m.slice(s![h.., ..h]).iter()).all(|v| v.norm() <= tol)
}

fn samples_noninteracting(samples: &[MapSample], num_edges: usize, tol: f64) -> bool {
    let first = &samples[0];
    samples.iter().all(|s| {
        max_abs(&(&s.p - &first.p)) <= tol
            && max_abs(&(&s.l - &first.l)) <= tol * max_abs(&first.l).max(1.0)
            && is_replicated(&s.p, num_edges, tol)
            && is_replicated(&s.l, num_edges, tol * max_abs(&s.l).max(1.0))
    })
}

/// True iff the map is `y`-independent and, in each half, acts as one
/// identical block on every running edge.
pub fn is_noninteracting(m: &BoundaryMap, ys: &[f64], tol: f64) -> Result<bool> {
    Ok(samples_noninteracting(&m.sample(ys)?, m.num_edges(), tol))
}

/// True iff `P(y)` and `L(y)` vanish outside the two-particle locality
/// blocks at every sample.
pub fn is_local_two_particle(m: &BoundaryMap, idx: &BoundaryIndexMap, ys: &[f64], tol: f64) -> Result<bool> {
    let dim = idx.two_particle_dim();
    let mut block_of = vec![usize::MAX; dim];
    for (b, members) in idx.two_particle_local_blocks().iter().enumerate() {
        for &p in members {
            block_of[p] = b;
        }
    }
    for smp in m.sample(ys)? {
        for ((i, j), v) in smp.p.indexed_iter() {
            if block_of[i] != block_of[j] && (v.norm() > tol || smp.l[[i, j]].norm() > tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Two edges of length `truncation` meeting at their `x = 0` ends, with the
/// far ends pinned, carrying the delta-line interaction induced by `v`.
pub fn delta_example_map(v: Potential, truncation: f64) -> Result<(MetricGraph, BoundaryMap)> {
    if !(truncation.is_finite() && truncation > 0.0) {
        return Err(Error::Argument(format!("truncation must be positive, got {truncation}")));
    }
    for k in 0..=20 {
        let a = truncation * k as f64 / 20.0;
        for m in 0..=20 {
            let b = truncation * (m as f64 / 10.0 - 1.0);
            if (v.eval(a, b) - v.eval(b, a)).abs() > 1e-12 * v.eval(a, b).abs().max(1.0) {
                return Err(Error::Argument(format!("potential is not symmetric at ({a}, {b})")));
            }
        }
    }
    let g = build_graph(&GraphSpec {
        vertices: None,
        edges: vec![
            EdgeSpec {
                from: VertexId::Index(0),
                to: VertexId::Index(1),
                length: truncation,
            },
            EdgeSpec {
                from: VertexId::Index(0),
                to: VertexId::Index(2),
                length: truncation,
            },
        ],
    })?;
    let map = BoundaryMap {
        num_edges: 2,
        kind: MapKind::DeltaExample(DeltaExample {
            potential: v,
            truncation,
        }),
    };
    Ok((g, map))
}

/// Pointwise validity of the example's `(A(y), B(y))`.
pub fn delta_example_ab_reports(ex: &DeltaExample, ys: &[f64]) -> Result<Vec<AbReport>> {
    ys.iter()
        .map(|&y| {
            let (a, b) = ex.ab(y);
            validate_ab(&a, &b, DEFAULT_TOL)
        })
        .collect()
}

/// The four components unfolded onto `[−T, T]²`.
#[derive(Clone, Debug)]
pub struct FoldedPlane {
    /// `2n` coordinates: `−x_{n−1}, …, −x_0, x_0, …, x_{n−1}`; the axis
    /// appears twice so that both one-sided limits are kept.
    pub coords: Vec<f64>,
    /// `values[[i, j]] = ψ(coords[i], coords[j])`.
    pub values: Array2<f64>,
}

impl FoldedPlane {
    /// Largest jump across `x = 0`.
    pub fn jump_x(&self) -> f64 {
        let n = self.coords.len() / 2;
        (0..2 * n)
            .map(|j| (self.values[[n - 1, j]] - self.values[[n, j]]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest jump across `y = 0`.
    pub fn jump_y(&self) -> f64 {
        let n = self.coords.len() / 2;
        (0..2 * n)
            .map(|i| (self.values[[i, n - 1]] - self.values[[i, n]]).abs())
            .fold(0.0, f64::max)
    }
}

/// Arrange `ψ₁₁, ψ₂₁, ψ₁₂, ψ₂₂` (each sampled as `[[i, j]] = ψ(x_i, y_j)`
/// with `x_i, y_j ≥ 0`) into one function on the plane:
/// `ψ(x,y) = ψ₁₁`, `ψ(−x,y) = ψ₂₁`, `ψ(x,−y) = ψ₁₂`, `ψ(−x,−y) = ψ₂₂`.
pub fn fold_to_plane(
    psi11: &Array2<f64>,
    psi21: &Array2<f64>,
    psi12: &Array2<f64>,
    psi22: &Array2<f64>,
    coords: &[f64],
) -> Result<FoldedPlane> {
    let shape = psi11.dim();
    if [psi21.dim(), psi12.dim(), psi22.dim()].iter().any(|&d| d != shape) || shape.0 != shape.1 || coords.len() != shape.0 {
        return Err(Error::Dimension("fold_to_plane needs four equal square grids matching the coordinates".into()));
    }
    let n = shape.0;
    let mut values = Array2::zeros((2 * n, 2 * n));
    // grid index k < n is the reflected coordinate −x_{n−1−k}
    for i in 0..n {
        for j in 0..n {
            let (ip, jp) = (n + i, n + j);
            let (im, jm) = (n - 1 - i, n - 1 - j);
            values[[ip, jp]] = psi11[[i, j]];
            values[[im, jp]] = psi21[[i, j]];
            values[[ip, jm]] = psi12[[i, j]];
            values[[im, jm]] = psi22[[i, j]];
        }
    }
    let mut c: Vec<f64> = coords.iter().rev().map(|x| -x).collect();
    c.extend_from_slice(coords);
    Ok(FoldedPlane { coords: c, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;
    use crate::vertex_conditions::{standard_family, vertex_rules, Family, VertexRule};

    fn interval() -> MetricGraph {
        build_graph(&GraphSpec::interval(1.0)).unwrap()
    }

    #[test]
    fn dirichlet_constant_map() {
        let eye = Array2::<c64>::eye(4);
        let m = BoundaryMap::constant(eye, Array2::zeros((4, 4)), 1).unwrap();
        let r = validate_map(&m, &uniform_samples(9), 1e-10).unwrap();
        assert!(r.corner_regular && r.block_structured && r.noninteracting);
        assert_eq!(r.l_max, 0.0);
    }

    #[test]
    fn robin_constant_map_warns_at_corners() {
        let eye = Array2::<c64>::eye(4);
        let m = BoundaryMap::constant(Array2::zeros((4, 4)), eye, 1).unwrap();
        let r = validate_map(&m, &uniform_samples(9), 1e-10).unwrap();
        assert!((r.l_max - 1.0).abs() < 1e-12);
        assert!(!r.corner_regular && !r.warnings.is_empty());
    }

    #[test]
    fn non_projector_is_a_located_error() {
        let mut p = Array2::<c64>::zeros((4, 4));
        p[[0, 1]] = c64::new(0.7, 0.0);
        p[[2, 2]] = c64::new(0.3, 0.0);
        let m = BoundaryMap::piecewise(vec![0.5], vec![(Array2::eye(4), Array2::zeros((4, 4))), (p, Array2::zeros((4, 4)))], 1).unwrap();
        match validate_map(&m, &uniform_samples(5), 1e-10) {
            Err(Error::MapSample { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected a located error, got {other:?}"),
        }
    }

    #[test]
    fn lifts_are_noninteracting() {
        let g = interval();
        let d = lift_one_particle(&standard_family(&Family::Dirichlet, &g).unwrap(), &g);
        let (p, l) = d.eval(0.3).unwrap();
        assert!(max_abs(&(p - Array2::<c64>::eye(4))) < 1e-14 && max_abs(&l) < 1e-14);
        let r = lift_one_particle(&standard_family(&Family::Robin(2.0), &g).unwrap(), &g);
        let (p, l) = r.eval(0.0).unwrap();
        assert!(max_abs(&p) < 1e-14 && max_abs(&(l - Array2::<c64>::eye(4).mapv(|v| v * 2.0))) < 1e-12);
        assert!(is_noninteracting(&r, &uniform_samples(7), 1e-10).unwrap());
    }

    #[test]
    fn lifted_star_delta_block_pattern() {
        let g = build_graph(&GraphSpec::star(&[1.0, 1.2, 0.8])).unwrap();
        let rules = [
            VertexRule::Delta { strength: 2.0 },
            VertexRule::Dirichlet,
            VertexRule::Kirchhoff,
            VertexRule::Dirichlet,
        ];
        let vc = vertex_rules(&g, &rules).unwrap();
        let m = lift_one_particle(&vc, &g);
        let (p, l) = m.eval(0.7).unwrap();
        // built by hand: the 6×6 one-particle block sits on the diagonal 6 times
        for r in 0..6 {
            for c in 0..6 {
                for i in 0..6 {
                    for j in 0..6 {
                        let expect_p = if r == c { vc.p[[i, j]] } else { c64::new(0.0, 0.0) };
                        let expect_l = if r == c { vc.l[[i, j]] } else { c64::new(0.0, 0.0) };
                        assert_eq!(p[[6 * r + i, 6 * c + j]], expect_p);
                        assert_eq!(l[[6 * r + i, 6 * c + j]], expect_l);
                    }
                }
            }
        }
        assert!(is_local_two_particle(&m, &g.index_maps(), &[0.0, 0.5], 1e-12).unwrap());
    }

    #[test]
    fn differing_blocks_or_y_dependence_are_interacting() {
        let g = build_graph(&GraphSpec::star(&[1.0, 1.0])).unwrap();
        let mut p = Array2::<c64>::zeros((8, 8));
        for i in 0..4 {
            p[[i, i]] = c64::new(1.0, 0.0);
        }
        let m = BoundaryMap::constant(p, Array2::zeros((8, 8)), 2).unwrap();
        assert!(!is_noninteracting(&m, &uniform_samples(5), 1e-10).unwrap());

        // L(y) = y·1 with P = 0, on an interval
        let ys = uniform_samples(5);
        let pieces: Vec<_> = (0..5)
            .map(|k| (Array2::<c64>::zeros((4, 4)), Array2::<c64>::eye(4).mapv(|v| v * (k as f64 / 4.0))))
            .collect();
        let breaks: Vec<f64> = (1..5).map(|k| (k as f64 - 0.5) / 4.0).collect();
        let m = BoundaryMap::piecewise(breaks, pieces, 1).unwrap();
        let _ = g;
        assert!(!is_noninteracting(&m, &ys, 1e-10).unwrap());
    }

    #[test]
    fn nonlocal_lift_is_not_local() {
        let g = build_graph(&GraphSpec {
            vertices: None,
            edges: vec![
                EdgeSpec { from: 0.into(), to: 1.into(), length: 1.0 },
                EdgeSpec { from: 2.into(), to: 3.into(), length: 1.0 },
            ],
        })
        .unwrap();
        let mut p = Array2::<c64>::zeros((4, 4));
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            p[[i, j]] = c64::new(0.5, 0.0);
        }
        let vc = VertexConditions::from_pl(p, Array2::zeros((4, 4)), &g, 1e-10).unwrap();
        assert!(!vc.local);
        let m = lift_one_particle(&vc, &g);
        assert!(!is_local_two_particle(&m, &g.index_maps(), &[0.5], 1e-12).unwrap());
    }

    #[test]
    fn bump_map_is_regular_and_block_structured() {
        let g = interval();
        let neumann = standard_family(&Family::Neumann, &g).unwrap();
        let m = BoundaryMap::bump(neumann.p, 1.0, 0.5, 0.3, 1).unwrap();
        let r = validate_map(&m, &uniform_samples(33), 1e-10).unwrap();
        assert!(r.block_structured && r.corner_regular && !r.noninteracting);
        assert!((r.l_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_example_conditions() {
        let (g, m) = delta_example_map(Potential::gaussian_bump(2.0, 0.5, 1.5), 2.0).unwrap();
        assert_eq!(g.num_edges(), 2);
        let ex = match m.kind() {
            MapKind::DeltaExample(ex) => ex.clone(),
            _ => unreachable!(),
        };
        let ys = uniform_samples(17);
        for r in delta_example_ab_reports(&ex, &ys).unwrap() {
            assert!(r.is_valid() && r.rank == 4);
        }
        let rep = validate_map(&m, &ys, 1e-10).unwrap();
        assert!(rep.block_structured && !rep.noninteracting);
        assert!(is_local_two_particle(&m, &g.index_maps(), &ys, 1e-12).unwrap());

        // the relation at y = 1 for the first block: −ψ₁₁,ₓ − ψ₂₁,ₓ = −v(0,T) ψ₂₁
        let (a, b) = ex.ab(1.0);
        let v = ex.potential.eval(0.0, 2.0);
        let psi = [c64::new(0.3, 0.0), c64::new(0.3, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0)];
        let dpsi = [c64::new(0.1, 0.0), c64::new(-0.1 + v * 0.3, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0)];
        let r = a.dot(&ndarray::arr1(&psi)) + b.dot(&ndarray::arr1(&dpsi));
        assert!(r.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn zero_potential_reduces_to_a_kirchhoff_lift() {
        let (g, m) = delta_example_map(Potential::zero(), 1.0).unwrap();
        let ys = uniform_samples(9);
        assert!(is_noninteracting(&m, &ys, 1e-10).unwrap());
        let vc = vertex_rules(&g, &[VertexRule::Kirchhoff, VertexRule::Dirichlet, VertexRule::Dirichlet]).unwrap();
        let lift = lift_one_particle(&vc, &g);
        let (p0, l0) = m.eval(0.4).unwrap();
        let (p1, l1) = lift.eval(0.4).unwrap();
        assert!(max_abs(&(p0 - p1)) < 1e-12 && max_abs(&(l0 - l1)) < 1e-12);
    }

    #[test]
    fn folding_places_quadrants() {
        let n = 4;
        let coords: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let one = Array2::<f64>::ones((n, n));
        let zero = Array2::<f64>::zeros((n, n));
        let f = fold_to_plane(&one, &zero, &zero, &zero, &coords).unwrap();
        for i in 0..2 * n {
            for j in 0..2 * n {
                let expect = if i >= n && j >= n { 1.0 } else { 0.0 };
                assert_eq!(f.values[[i, j]], expect);
            }
        }
        let c = one.mapv(|v| v * 2.5);
        let f = fold_to_plane(&c, &c, &c, &c, &coords).unwrap();
        assert!(f.values.iter().all(|&v| v == 2.5));
        assert_eq!(f.jump_x(), 0.0);
        assert!(fold_to_plane(&one, &Array2::zeros((3, 3)), &zero, &zero, &coords).is_err());
    }
}
