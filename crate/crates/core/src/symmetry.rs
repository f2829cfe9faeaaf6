//! Exchange of the two particles and the bosonic and fermionic sectors.
//!
//! The swap sends the unknown at `(e₁, i; e₂, j)` to `(e₂, j; e₁, i)`, which
//! exchanges the rectangles `D_{e₁e₂}` and `D_{e₂e₁}` and transposes their
//! grids. It is a permutation of unknowns, so it is unitary for both the
//! Euclidean and the mass inner product. Sectors are formed on the full
//! discrete space: the constrained basis is split into swap-invariant
//! groups and each group is projected onto the requested eigenspace.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bc_maps::{validate_map, BoundaryMap};
use crate::error::{Error, Result};
use crate::form_assembly::{assemble_two_particle, DiscreteForm, Mesh, Particles, Pencil};
use crate::graph::MetricGraph;
use crate::linalg::dense;
use crate::linalg::CsrMatrix;
use crate::scalar::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Full,
    Boson,
    Fermion,
}

impl Sector {
    /// Swap eigenvalue selected by the sector; `None` for the full space.
    pub fn sign(self) -> Option<f64> {
        match self {
            Sector::Full => None,
            Sector::Boson => Some(1.0),
            Sector::Fermion => Some(-1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sector::Full => "full",
            Sector::Boson => "boson",
            Sector::Fermion => "fermion",
        }
    }
}

impl std::str::FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Sector::Full),
            "boson" | "bosonic" => Ok(Sector::Boson),
            "fermion" | "fermionic" => Ok(Sector::Fermion),
            other => Err(Error::Argument(format!("unknown sector '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExchangeOperator {
    one_dim: usize,
}

impl ExchangeOperator {
    pub fn new(mesh: &Mesh) -> Self {
        Self {
            one_dim: mesh.one_particle_dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.one_dim * self.one_dim
    }

    /// Index of the unknown that `i` is exchanged with.
    pub fn image(&self, i: usize) -> usize {
        let (a, b) = (i / self.one_dim, i % self.one_dim);
        b * self.one_dim + a
    }

    pub fn permutation(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.image(i)).collect()
    }

    pub fn apply<S: Field>(&self, v: &[S]) -> Result<Vec<S>> {
        self.check(v)?;
        Ok((0..v.len()).map(|i| v[self.image(i)]).collect())
    }

    /// `(v ± swap v)/2`; the full sector returns `v` unchanged.
    pub fn project<S: Field>(&self, v: &[S], sector: Sector) -> Result<Vec<S>> {
        self.check(v)?;
        Ok(match sector.sign() {
            None => v.to_vec(),
            Some(s) => (0..v.len())
                .map(|i| (v[i] + v[self.image(i)].mul_real(s)).mul_real(0.5))
                .collect(),
        })
    }

    fn check<S>(&self, v: &[S]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "two-particle vector has length {}, mesh needs {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Orthonormal basis of a swap eigenspace on the unconstrained mesh space.
pub fn sector_basis<S: Field>(mesh: &Mesh, sector: Sector) -> CsrMatrix<S> {
    let x = ExchangeOperator::new(mesh);
    let dim = x.dim();
    let Some(sign) = sector.sign() else {
        return CsrMatrix::identity(dim);
    };
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut trips = Vec::new();
    let mut col = 0;
    for i in 0..dim {
        let j = x.image(i);
        if j == i {
            if sign > 0.0 {
                trips.push((i, col, S::one()));
                col += 1;
            }
        } else if i < j {
            trips.push((i, col, S::from_real(r)));
            trips.push((j, col, S::from_real(sign * r)));
            col += 1;
        }
    }
    CsrMatrix::from_triplets(dim, col, trips)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Orthonormal basis of the sector inside the constrained space of `form`.
///
/// Fails when the constrained space is not mapped to itself by the swap.
pub fn constrained_sector_basis<S: Field>(form: &DiscreteForm<S>, sector: Sector) -> Result<CsrMatrix<S>> {
    if form.particles != Particles::Two {
        return Err(Error::Argument("exchange sectors need a two-particle form".into()));
    }
    let Some(sign) = sector.sign() else {
        return Ok(form.n.clone());
    };
    let x = ExchangeOperator::new(&form.mesh);
    let dim = x.dim();
    let ncols = form.n.ncols();

    // columns of N as sparse lists of (unknown, value)
    let mut columns: Vec<Vec<(usize, S)>> = vec![Vec::new(); ncols];
    for (r, c, v) in form.n.triplets() {
        columns[c].push((r, v));
    }
    let mut uf = UnionFind((0..dim).collect());
    for col in &columns {
        for w in col.windows(2) {
            uf.union(w[0].0, w[1].0);
        }
        for &(r, _) in col {
            uf.union(r, x.image(r));
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (c, col) in columns.iter().enumerate() {
        if let Some(&(r, _)) = col.first() {
            groups.entry(uf.find(r)).or_default().push(c);
        }
    }

    let mut trips = Vec::new();
    let mut out = 0;
    for cols in groups.values() {
        let mut unknowns: Vec<usize> = cols
            .iter()
            .flat_map(|&c| columns[c].iter().flat_map(|&(r, _)| [r, x.image(r)]))
            .collect();
        unknowns.sort_unstable();
        unknowns.dedup();
        let local: BTreeMap<usize, usize> = unknowns.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut k = Array2::<S>::zeros((unknowns.len(), cols.len()));
        for (j, &c) in cols.iter().enumerate() {
            for &(r, v) in &columns[c] {
                k[[local[&r], j]] = v;
            }
        }
        let mut xk = Array2::<S>::zeros(k.dim());
        for (i, &u) in unknowns.iter().enumerate() {
            xk.row_mut(i).assign(&k.row(local[&x.image(u)]));
        }
        let leak = &xk - &k.dot(&dense::adjoint(&k).dot(&xk));
        if dense::max_abs(&leak) > 1e-9 {
            return Err(Error::Map("constraints are not invariant under particle exchange".into()));
        }
        let v = (&k + &xk.mapv(|z| z.mul_real(sign))).mapv(|z| z.mul_real(0.5));
        let basis = dense::range_space_scaled(&v, 1e-8, 1.0)?;
        for c in 0..basis.ncols() {
            for (i, &u) in unknowns.iter().enumerate() {
                let z = basis[[i, c]];
                if z.abs() > 1e-15 {
                    trips.push((u, out, z));
                }
            }
            out += 1;
        }
    }
    Ok(CsrMatrix::from_triplets(dim, out, trips))
}

/// Largest entry of `X A X − A` relative to the largest entry of `A`.
pub fn exchange_defect<S: Field>(a: &CsrMatrix<S>, x: &ExchangeOperator) -> f64 {
    let swapped = a.permute_symmetric(&x.permutation());
    swapped.add_scaled(-S::one(), a).max_abs() / a.max_abs().max(f64::MIN_POSITIVE)
}

/// Pencil of the sector restricted to the constrained space of `form`.
pub fn sector_pencil<S: Field>(form: &DiscreteForm<S>, sector: Sector) -> Result<Pencil<S>> {
    if sector == Sector::Full {
        return Ok(form.pencil());
    }
    let x = ExchangeOperator::new(&form.mesh);
    if exchange_defect(&form.b, &x) > 1e-10 {
        return Err(Error::Map("boundary term does not commute with particle exchange".into()));
    }
    Ok(form.pencil_on(constrained_sector_basis(form, sector)?))
}

/// Assembles the form of a block-structured map and restricts it to a sector.
pub fn assemble_symmetric_form<S: Field>(
    g: &MetricGraph,
    m: &BoundaryMap,
    mesh: &Mesh,
    sector: Sector,
) -> Result<(DiscreteForm<S>, Pencil<S>)> {
    let report = validate_map(m, &mesh.y_nodes(), 1e-10)?;
    if sector != Sector::Full && !report.block_structured {
        return Err(Error::Map(
            "exchange symmetrization needs two identical diagonal blocks in P and L".into(),
        ));
    }
    let form = assemble_two_particle(g, m, mesh)?;
    let pencil = sector_pencil(&form, sector)?;
    Ok((form, pencil))
}
