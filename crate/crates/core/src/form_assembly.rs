//! Piecewise-linear finite elements for the one- and two-particle forms.
//!
//! Every edge carries the same number `n` of uniformly spaced nodes, so the
//! boundary nodes of all rectangles share the normalized coordinates
//! `y_j = j/(n−1)` at which the boundary maps are sampled. One-particle
//! unknowns are numbered `e·n + i`; two-particle unknowns on
//! `D_{e₁e₂}` are numbered `(e₁·n + i)·En + e₂·n + j`, so that the
//! two-particle stiffness and mass are exact Kronecker expressions of the
//! one-particle ones.
//!
//! The form is `K − B` on the span of the constraint basis `N`:
//!
//! * `B` is the boundary term `∫₀¹ ⟨Ψ_bv, L Ψ_bv⟩ dy`, integrated with the
//!   consistent 1-D mass matrix and `L` averaged over each boundary
//!   element. The average keeps `B` Hermitian, reproduces constant maps
//!   exactly, and never exceeds `L_max` times the boundary mass, so the
//!   discrete problem inherits the lower bound and the Robin comparison of
//!   the continuous one.
//! * `N` spans the unknowns with `P(y_j) Ψ_bv(y_j) = 0` at every boundary
//!   node. Corner unknowns lie on two sides and are constrained by both the
//!   `y = 0` and `y = 1` samples.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use ndarray::Array2;
use ndarray_linalg::c64;

use crate::bc_maps::{uniform_samples, BoundaryMap, MapSample};
use crate::error::{Error, Result};
use crate::graph::{BoundaryIndexMap, End, MetricGraph};
use crate::linalg::dense::{self, RANK_TOL};
use crate::linalg::CsrMatrix;
use crate::scalar::Field;
use crate::vertex_conditions::VertexConditions;

/// Imaginary parts below this are treated as rounding when narrowing to `f64`.
const NARROW_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: usize,
    lengths: Vec<f64>,
}

impl Mesh {
    pub fn new(g: &MetricGraph, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::Mesh(format!("need at least 3 nodes per edge, got {nodes}")));
        }
        Ok(Self {
            nodes,
            lengths: g.lengths(),
        })
    }

    /// Smallest common node count whose spacing on every edge is at most `h`.
    pub fn from_spacing(g: &MetricGraph, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Mesh(format!("mesh spacing must be positive, got {h}")));
        }
        let n = (g.max_length() / h - 1e-9).ceil() as usize + 1;
        Self::new(g, n.max(3))
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn num_edges(&self) -> usize {
        self.lengths.len()
    }

    pub fn h(&self, e: usize) -> f64 {
        self.lengths[e] / (self.nodes - 1) as f64
    }

    pub fn h_max(&self) -> f64 {
        (0..self.num_edges()).map(|e| self.h(e)).fold(0.0, f64::max)
    }

    pub fn one_particle_dim(&self) -> usize {
        self.num_edges() * self.nodes
    }

    pub fn two_particle_dim(&self) -> usize {
        self.one_particle_dim().pow(2)
    }

    pub fn y_nodes(&self) -> Vec<f64> {
        uniform_samples(self.nodes)
    }

    pub fn dof1(&self, e: usize, i: usize) -> usize {
        e * self.nodes + i
    }

    pub fn dof2(&self, e1: usize, i: usize, e2: usize, j: usize) -> usize {
        self.dof1(e1, i) * self.one_particle_dim() + self.dof1(e2, j)
    }

    pub fn end_node(&self, end: End) -> usize {
        match end {
            End::Start => 0,
            End::Finish => self.nodes - 1,
        }
    }

    /// Unknown carrying one-particle boundary component `pos`.
    pub fn boundary_dof1(&self, idx: &BoundaryIndexMap, pos: usize) -> usize {
        let (e, end) = idx.one_particle_inverse(pos);
        self.dof1(e, self.end_node(end))
    }

    /// Unknown carrying two-particle boundary component `pos` at `y_j`, and
    /// the running edge whose `√l` rescales it.
    pub fn boundary_dof2(&self, idx: &BoundaryIndexMap, pos: usize, j: usize) -> (usize, usize) {
        let (e1, e2, side) = idx.two_particle_inverse(pos);
        let fixed = self.end_node(side.end);
        match side.half {
            crate::graph::Half::First => (self.dof2(e1, fixed, e2, j), e2),
            crate::graph::Half::Second => (self.dof2(e1, j, e2, fixed), e1),
        }
    }

    /// Rescaled boundary vector `Ψ_bv(y_j)` of a two-particle vector.
    pub fn boundary_vector<S: Field>(&self, idx: &BoundaryIndexMap, u: &[S], j: usize) -> Vec<S> {
        (0..idx.two_particle_dim())
            .map(|pos| {
                let (d, r) = self.boundary_dof2(idx, pos, j);
                u[d].mul_real(self.lengths[r].sqrt())
            })
            .collect()
    }

    /// One-particle stiffness and mass, block diagonal over edges.
    pub fn one_particle_matrices<S: Field>(&self) -> (CsrMatrix<S>, CsrMatrix<S>) {
        let dim = self.one_particle_dim();
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        for e in 0..self.num_edges() {
            let h = self.h(e);
            for i in 0..self.nodes - 1 {
                let (a, b) = (self.dof1(e, i), self.dof1(e, i + 1));
                for (r, c, ks, ms) in [(a, a, 1.0, 2.0), (b, b, 1.0, 2.0), (a, b, -1.0, 1.0), (b, a, -1.0, 1.0)] {
                    kt.push((r, c, S::from_real(ks / h)));
                    mt.push((r, c, S::from_real(ms * h / 6.0)));
                }
            }
        }
        (CsrMatrix::from_triplets(dim, dim, kt), CsrMatrix::from_triplets(dim, dim, mt))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Particles {
    One,
    Two,
}

#[derive(Clone, Debug)]
pub struct DiscreteForm<S> {
    pub particles: Particles,
    pub mesh: Mesh,
    pub k: CsrMatrix<S>,
    pub m: CsrMatrix<S>,
    /// Boundary term; the form is `K − B`.
    pub b: CsrMatrix<S>,
    /// Orthonormal columns spanning the constrained unknowns.
    pub n: CsrMatrix<S>,
    pub l_max: f64,
    pub c_infty: f64,
}

/// Reduced generalized eigenproblem `a x = λ m x` together with the
/// columns mapping reduced coordinates back to mesh unknowns.
#[derive(Clone, Debug)]
pub struct Pencil<S> {
    pub a: CsrMatrix<S>,
    pub m: CsrMatrix<S>,
    pub basis: CsrMatrix<S>,
}

impl<S: Field> Pencil<S> {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Mesh unknowns of a reduced vector.
    pub fn expand(&self, x: &[S]) -> Vec<S> {
        self.basis.apply(x)
    }
}

impl<S: Field> DiscreteForm<S> {
    pub fn pencil(&self) -> Pencil<S> {
        self.pencil_on(self.n.clone())
    }

    /// Pencil of the form restricted to the span of `basis` (mesh unknowns).
    pub fn pencil_on(&self, basis: CsrMatrix<S>) -> Pencil<S> {
        Pencil {
            a: self.operator().congruence(&basis),
            m: self.m.congruence(&basis),
            basis,
        }
    }

    pub fn operator(&self) -> CsrMatrix<S> {
        self.k.add_scaled(-S::one(), &self.b)
    }

    pub fn reduced_dim(&self) -> usize {
        self.n.ncols()
    }

    /// `(Nᴴ (K − B) N, Nᴴ M N)`.
    pub fn reduced(&self) -> (CsrMatrix<S>, CsrMatrix<S>) {
        (self.operator().congruence(&self.n), self.m.congruence(&self.n))
    }

    /// Writes `k.coo`, `m.coo`, `b.coo`, `n.coo` into `dir`.
    pub fn write_coo(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, mat) in [("k", &self.k), ("m", &self.m), ("b", &self.b), ("n", &self.n)] {
            let f = std::fs::File::create(dir.join(format!("{name}.coo")))?;
            mat.write_coo(io::BufWriter::new(f))?;
        }
        Ok(())
    }
}

/// `C = 8 L_max / δ` with `δ = min(l_min, 1/(4 L_max))`; zero without a
/// boundary term.
pub fn semibound_from(l_max: f64, l_min: f64) -> f64 {
    if l_max <= 0.0 {
        return 0.0;
    }
    let delta = l_min.min(1.0 / (4.0 * l_max));
    8.0 * l_max / delta
}

/// Lower-bound constant of a map sampled at `ys`.
pub fn semibound_constant(m: &BoundaryMap, g: &MetricGraph, ys: &[f64]) -> Result<f64> {
    let mut l_max = 0.0f64;
    for s in m.sample(ys)? {
        l_max = l_max.max(dense::op_norm(&s.l)?);
    }
    Ok(semibound_from(l_max, g.min_length()))
}

/// Orthogonal projector onto `ker P_a ∩ ker P_b`.
pub fn corner_constraint<S: Field>(pa: &Array2<S>, pb: &Array2<S>) -> Result<Array2<S>> {
    if pa.dim() != pb.dim() || pa.nrows() != pa.ncols() {
        return Err(Error::Dimension("corner projectors must be square and of equal size".into()));
    }
    let basis = dense::null_space(&dense::vstack(&[pa.clone(), pb.clone()]), RANK_TOL)?;
    Ok(dense::projector_from_basis(&basis))
}

fn narrow<S: Field>(a: &Array2<c64>) -> Result<Array2<S>> {
    dense::narrow(a, NARROW_TOL).ok_or_else(|| {
        Error::Argument("complex boundary data cannot be assembled with real scalars".into())
    })
}

/// Appends the columns of a kernel basis living on the unknowns `dofs`.
fn push_columns<S: Field>(trips: &mut Vec<(usize, usize, S)>, col: &mut usize, dofs: &[usize], basis: &Array2<S>) {
    for c in 0..basis.ncols() {
        for (r, &d) in dofs.iter().enumerate() {
            let v = basis[[r, c]];
            if v.abs() > 1e-15 {
                trips.push((d, *col, v));
            }
        }
        *col += 1;
    }
}

pub fn assemble_one_particle<S: Field>(g: &MetricGraph, vc: &VertexConditions, mesh: &Mesh) -> Result<DiscreteForm<S>> {
    if mesh.num_edges() != g.num_edges() || vc.dim() != 2 * g.num_edges() {
        return Err(Error::Dimension("mesh, graph and vertex conditions disagree on the edge count".into()));
    }
    let idx = g.index_maps();
    let dim = mesh.one_particle_dim();
    let (k, m) = mesh.one_particle_matrices::<S>();
    let p: Array2<S> = narrow(&vc.p)?;
    let l: Array2<S> = narrow(&vc.l)?;
    let bdofs: Vec<usize> = (0..idx.one_particle_dim()).map(|pos| mesh.boundary_dof1(&idx, pos)).collect();

    let mut bt = Vec::new();
    for (i, &di) in bdofs.iter().enumerate() {
        for (j, &dj) in bdofs.iter().enumerate() {
            if l[[i, j]].abs() > 0.0 {
                bt.push((di, dj, l[[i, j]]));
            }
        }
    }
    let b = CsrMatrix::from_triplets(dim, dim, bt);

    let mut nt = Vec::new();
    let mut col = 0;
    for e in 0..g.num_edges() {
        for i in 1..mesh.nodes() - 1 {
            nt.push((mesh.dof1(e, i), col, S::one()));
            col += 1;
        }
    }
    let kernel = dense::null_space(&p, RANK_TOL)?;
    push_columns(&mut nt, &mut col, &bdofs, &kernel);
    let n = CsrMatrix::from_triplets(dim, col, nt);

    let l_max = vc.l_norm();
    Ok(DiscreteForm {
        particles: Particles::One,
        mesh: mesh.clone(),
        k,
        m,
        b,
        n,
        l_max,
        c_infty: semibound_from(l_max, g.min_length()),
    })
}

pub fn assemble_two_particle<S: Field>(g: &MetricGraph, map: &BoundaryMap, mesh: &Mesh) -> Result<DiscreteForm<S>> {
    if map.num_edges() != g.num_edges() {
        return Err(Error::Dimension(format!(
            "boundary map is for {} edges, graph has {}",
            map.num_edges(),
            g.num_edges()
        )));
    }
    let samples = map.sample(&mesh.y_nodes())?;
    assemble_two_particle_samples(g, &samples, mesh)
}

/// Assembly from maps already sampled at the mesh's boundary nodes.
pub fn assemble_two_particle_samples<S: Field>(
    g: &MetricGraph,
    samples: &[MapSample],
    mesh: &Mesh,
) -> Result<DiscreteForm<S>> {
    let idx = g.index_maps();
    let n = mesh.nodes();
    let dcomp = idx.two_particle_dim();
    if mesh.num_edges() != g.num_edges() || samples.len() != n {
        return Err(Error::Dimension(format!(
            "{} map samples for a mesh with {n} boundary nodes per side",
            samples.len()
        )));
    }
    if samples.iter().any(|s| s.p.dim() != (dcomp, dcomp) || s.l.dim() != (dcomp, dcomp)) {
        return Err(Error::Dimension(format!("boundary map samples must be {dcomp}×{dcomp}")));
    }
    let ps: Vec<Array2<S>> = samples.iter().map(|s| narrow(&s.p)).collect::<Result<_>>()?;
    let ls: Vec<Array2<S>> = samples.iter().map(|s| narrow(&s.l)).collect::<Result<_>>()?;

    let dim = mesh.two_particle_dim();
    let (k1, m1) = mesh.one_particle_matrices::<S>();
    let k = CsrMatrix::kron(&k1, &m1).add_scaled(S::one(), &CsrMatrix::kron(&m1, &k1));
    let m = CsrMatrix::kron(&m1, &m1);

    // component -> (unknown, √l of its running edge) at every boundary node
    let lengths = g.lengths();
    let scale: Vec<f64> = (0..dcomp).map(|pos| lengths[mesh.boundary_dof2(&idx, pos, 0).1].sqrt()).collect();
    let trace: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..dcomp).map(|pos| mesh.boundary_dof2(&idx, pos, j).0).collect())
        .collect();

    // boundary term, element by element along y ∈ [0, 1]
    let hy = 1.0 / (n - 1) as f64;
    let elem = [[2.0 * hy / 6.0, hy / 6.0], [hy / 6.0, 2.0 * hy / 6.0]];
    let mut bt = Vec::new();
    for j in 0..n - 1 {
        let avg = (&ls[j] + &ls[j + 1]).mapv(|v| v.mul_real(0.5));
        for ((c, cp), &v) in avg.indexed_iter() {
            if v.abs() == 0.0 {
                continue;
            }
            let w = v.mul_real(scale[c] * scale[cp]);
            for a in 0..2 {
                for bb in 0..2 {
                    bt.push((trace[j + a][c], trace[j + bb][cp], w.mul_real(elem[a][bb])));
                }
            }
        }
    }
    let b = CsrMatrix::from_triplets(dim, dim, bt);

    let sdiag = |p: &Array2<S>| {
        let mut r = p.clone();
        for ((_, c), v) in r.indexed_iter_mut() {
            *v = v.mul_real(scale[c]);
        }
        r
    };
    let mut nt = Vec::new();
    let mut col = 0;
    let ne = g.num_edges();
    for e1 in 0..ne {
        for i in 1..n - 1 {
            for e2 in 0..ne {
                for jj in 1..n - 1 {
                    nt.push((mesh.dof2(e1, i, e2, jj), col, S::one()));
                    col += 1;
                }
            }
        }
    }
    let floor = scale.iter().cloned().fold(1.0, f64::max);
    for j in 1..n - 1 {
        let kernel = dense::null_space_scaled(&sdiag(&ps[j]), RANK_TOL, floor)?;
        push_columns(&mut nt, &mut col, &trace[j], &kernel);
    }
    // corners: every corner unknown appears at y = 0 or y = 1 in each half
    let mut corner_index: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in trace[0].iter().chain(trace[n - 1].iter()) {
        let next = corner_index.len();
        corner_index.entry(d).or_insert(next);
    }
    let corners: Vec<usize> = {
        let mut v = vec![0; corner_index.len()];
        for (&d, &i) in &corner_index {
            v[i] = d;
        }
        v
    };
    let mut rows = Vec::new();
    for jn in [0, n - 1] {
        let r = sdiag(&ps[jn]);
        let mut full = Array2::<S>::zeros((dcomp, corners.len()));
        for c in 0..dcomp {
            let ci = corner_index[&trace[jn][c]];
            for r_ in 0..dcomp {
                full[[r_, ci]] += r[[r_, c]];
            }
        }
        rows.push(full);
    }
    let kernel = dense::null_space_scaled(&dense::vstack(&rows), RANK_TOL, floor)?;
    push_columns(&mut nt, &mut col, &corners, &kernel);
    let nmat = CsrMatrix::from_triplets(dim, col, nt);

    let mut l_max = 0.0f64;
    for s in samples {
        l_max = l_max.max(dense::op_norm(&s.l)?);
    }
    Ok(DiscreteForm {
        particles: Particles::Two,
        mesh: mesh.clone(),
        k,
        m,
        b,
        n: nmat,
        l_max,
        c_infty: semibound_from(l_max, g.min_length()),
    })
}

/// Whether every sample of a map is real, so that `f64` assembly applies.
pub fn samples_are_real(samples: &[MapSample]) -> bool {
    samples
        .iter()
        .all(|s| s.p.iter().chain(s.l.iter()).all(|z| z.im.abs() <= NARROW_TOL))
}
