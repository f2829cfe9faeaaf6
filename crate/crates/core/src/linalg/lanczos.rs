//! Shift-invert Lanczos for the smallest eigenvalues of a sparse Hermitian
//! pencil `K x = λ M x` with `M` positive definite.
//!
//! The iteration works with `(K - σM)⁻¹ M` in the `M` inner product, with
//! full reorthogonalization. Converged Ritz pairs are locked and deflated
//! from later passes. Completeness is never inferred from Krylov
//! convergence alone: the shift only advances past eigenvalues whose count
//! has been confirmed by the inertia of an `L D Lᴴ` factorization
//! (Sylvester's law). Degenerate eigenvalues, which a single Krylov
//! sequence sees once, are picked up by subsequent passes.

use log::debug;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense;
use super::envelope::EnvelopeLdl;
use super::ordering::reverse_cuthill_mckee;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::{dot, Field};

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Shift known (or hoped) to lie below the spectrum.
    pub lower_bound: f64,
    /// Relative Ritz residual tolerance.
    pub tol: f64,
    pub seed: u64,
    pub max_passes: usize,
    pub max_steps: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            lower_bound: -1.0,
            tol: 1e-10,
            seed: 0x5eed,
            max_passes: 60,
            max_steps: 360,
        }
    }
}

pub struct LanczosResult<S> {
    pub values: Vec<f64>,
    /// `M`-orthonormal eigenvectors, one per value.
    pub vectors: Vec<Vec<S>>,
    pub passes: usize,
    pub factorizations: usize,
}

struct Shifted<S> {
    k: CsrMatrix<S>,
    m: CsrMatrix<S>,
    factorizations: usize,
}

impl<S: Field> Shifted<S> {
    fn factor(&mut self, sigma: f64) -> Result<EnvelopeLdl<S>> {
        let mut shift = sigma;
        for attempt in 0..4 {
            self.factorizations += 1;
            let a = self.k.add_scaled(S::from_real(-shift), &self.m);
            match EnvelopeLdl::factor(&a) {
                Ok(f) => return Ok(f),
                Err(e) if attempt == 3 => return Err(e),
                Err(_) => shift += 1e-9 * shift.abs().max(1.0),
            }
        }
        unreachable!()
    }

    fn count_below(&mut self, tau: f64) -> Result<usize> {
        Ok(self.factor(tau)?.negative_count())
    }
}

struct Locked<S> {
    value: f64,
    x: Vec<S>,
    mx: Vec<S>,
}

fn orthogonalize<S: Field>(w: &mut [S], basis: &[Vec<S>], mbasis: &[Vec<S>]) {
    for (v, mv) in basis.iter().zip(mbasis) {
        let c = dot(mv, w);
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= c * *vi;
        }
    }
}

fn orthogonalize_locked<S: Field>(w: &mut [S], locked: &[Locked<S>]) {
    for l in locked {
        let c = dot(&l.mx, w);
        for (wi, vi) in w.iter_mut().zip(&l.x) {
            *wi -= c * *vi;
        }
    }
}

fn m_norm<S: Field>(m: &CsrMatrix<S>, x: &[S]) -> f64 {
    dot(x, &m.apply(x)).re().max(0.0).sqrt()
}

/// The `want` smallest eigenpairs of `K x = λ M x`.
pub fn smallest<S: Field>(
    k: &CsrMatrix<S>,
    m: &CsrMatrix<S>,
    want: usize,
    opts: &LanczosOptions,
) -> Result<LanczosResult<S>> {
    let n = k.nrows();
    if want == 0 || want > n {
        return Err(Error::Argument(format!("cannot compute {want} eigenvalues of a dimension {n} pencil")));
    }
    let perm = reverse_cuthill_mckee(&k.add_scaled(S::one(), m));
    let mut op = Shifted {
        k: k.permute_symmetric(&perm),
        m: m.permute_symmetric(&perm),
        factorizations: 0,
    };

    let mut bound = opts.lower_bound;
    let mut fact = op.factor(bound)?;
    let mut tries = 0;
    while fact.negative_count() > 0 {
        tries += 1;
        if tries > 60 {
            return Err(Error::Numerical("could not find a shift below the spectrum".into()));
        }
        bound -= 2.0 * bound.abs().max(1.0);
        fact = op.factor(bound)?;
    }
    // every eigenvalue <= bound is locked; sigma is the current shift
    let mut sigma = bound;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Locked<S>> = Vec::new();
    let mut confirmed = 0usize;
    let mut stalls = 0usize;
    let mut passes = 0usize;

    while confirmed < want {
        passes += 1;
        if passes > opts.max_passes {
            return Err(Error::Numerical(format!(
                "Lanczos did not confirm {want} eigenvalues after {} passes ({confirmed} confirmed)",
                opts.max_passes
            )));
        }
        let remaining = want - confirmed;
        let free = n - locked.len();
        if free == 0 {
            return Err(Error::Numerical("locked set exhausts the space but counts disagree".into()));
        }
        let steps = (2 * remaining + 20).max(40).min(opts.max_steps).min(free);

        let before = locked.len();
        let pass = lanczos_pass(&op.m, &fact, sigma, &locked, steps, opts.tol, &mut rng)?;
        for (theta, mut x) in pass.converged {
            orthogonalize_locked(&mut x, &locked);
            orthogonalize_locked(&mut x, &locked);
            let nrm = m_norm(&op.m, &x);
            if nrm < 0.5 {
                continue;
            }
            x.iter_mut().for_each(|v| *v = v.div_real(nrm));
            let mx = op.m.apply(&x);
            let kx = op.k.apply(&x);
            let rq = dot(&x, &kx).re();
            debug!("locked λ = {rq:.12e} (ritz {:.12e})", sigma + 1.0 / theta);
            locked.push(Locked { value: rq, x, mx });
        }

        // largest prefix of the unconfirmed locked values whose count is exact;
        // the predicate is monotone since a missing eigenvalue stays missing
        let mut above: Vec<f64> = locked.iter().map(|l| l.value).filter(|&v| v > bound).collect();
        above.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let taus: Vec<f64> = above.iter().map(|&c| c + 1e-8 * c.abs().max(1.0)).collect();
        let expected = |tau: f64| confirmed + above.iter().filter(|&&c| c <= tau).count();
        let (mut lo, mut hi) = (0usize, taus.len());
        let mut best: Option<(f64, usize)> = None;
        if let Some(&tau) = taus.last() {
            let count = op.count_below(tau)?;
            if count == expected(tau) {
                best = Some((tau, count));
                lo = hi;
            } else {
                hi -= 1;
            }
        }
        while lo < hi {
            let mid = (lo + hi) / 2;
            let tau = taus[mid];
            let count = op.count_below(tau)?;
            if count == expected(tau) {
                best = Some((tau, count));
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }

        let grew = locked.len() > before;
        if let Some((tau, count)) = best {
            bound = tau;
            confirmed = count;
            sigma = bound;
        } else {
            // no confirmed progress: shift toward the lowest unconfirmed estimate
            let est = pass
                .estimates
                .iter()
                .chain(above.iter())
                .cloned()
                .filter(|&l| l > bound)
                .reduce(f64::min);
            // each stall cuts the distance to the estimate tenfold
            sigma = match est {
                Some(e) if e > sigma => e - 0.1 * (e - sigma),
                Some(e) => e - 0.1 * (e - bound),
                None => bound,
            };
        }
        if best.is_some() || grew {
            stalls = 0;
        } else {
            stalls += 1;
            if stalls > 8 {
                return Err(Error::Numerical("Lanczos stalled without new eigenpairs".into()));
            }
        }
        if confirmed < want {
            fact = op.factor(sigma)?;
        }
        debug!("pass {passes}: {} locked, {confirmed} confirmed up to {bound:.6e}, shift {sigma:.6e}", locked.len());
    }

    locked.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    locked.truncate(want);
    let mut values = Vec::with_capacity(want);
    let mut vectors = Vec::with_capacity(want);
    for l in locked {
        values.push(l.value);
        let mut orig = vec![S::zero(); n];
        for (new, &old) in perm.iter().enumerate() {
            orig[old] = l.x[new];
        }
        vectors.push(orig);
    }
    Ok(LanczosResult {
        values,
        vectors,
        passes,
        factorizations: op.factorizations,
    })
}

struct Pass<S> {
    /// converged `(θ, Ritz vector)` pairs
    converged: Vec<(f64, Vec<S>)>,
    /// all Ritz values mapped back to the pencil, converged or not
    estimates: Vec<f64>,
}

/// One Lanczos run with a random start vector.
fn lanczos_pass<S: Field>(
    m: &CsrMatrix<S>,
    fact: &EnvelopeLdl<S>,
    sigma: f64,
    locked: &[Locked<S>],
    steps: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Pass<S>> {
    let n = m.nrows();
    let mut v: Vec<S> = (0..n).map(|_| S::from_real(rng.random::<f64>() - 0.5)).collect();
    orthogonalize_locked(&mut v, locked);
    orthogonalize_locked(&mut v, locked);
    let nrm = m_norm(m, &v);
    if nrm == 0.0 {
        return Ok(Pass { converged: Vec::new(), estimates: Vec::new() });
    }
    v.iter_mut().for_each(|x| *x = x.div_real(nrm));

    let mut basis: Vec<Vec<S>> = Vec::with_capacity(steps);
    let mut mbasis: Vec<Vec<S>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut last_beta = 0.0;

    for j in 0..steps {
        let mv = m.apply(&v);
        let mut w = mv.clone();
        fact.solve_in_place(&mut w);
        basis.push(v);
        mbasis.push(mv);
        let a = dot(&mbasis[j], &w).re();
        alpha.push(a);
        for _ in 0..2 {
            orthogonalize(&mut w, &basis, &mbasis);
            orthogonalize_locked(&mut w, locked);
        }
        let b = m_norm(m, &w);
        last_beta = b;
        let scale = alpha.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        if j + 1 == steps || b <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        beta.push(b);
        v = w.into_iter().map(|x| x.div_real(b)).collect();
    }

    let k = alpha.len();
    let mut t = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        t[[i, i]] = alpha[i];
        if i + 1 < k {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    let (theta, s) = dense::eigh(t)?;
    let mut out = Vec::new();
    let mut estimates = Vec::new();
    for (i, &th) in theta.iter().enumerate() {
        if th == 0.0 {
            continue;
        }
        estimates.push(sigma + 1.0 / th);
        let resid = (last_beta * s[[k - 1, i]]).abs();
        if resid > tol * th.abs() {
            continue;
        }
        let mut x = vec![S::zero(); n];
        for (c, vj) in basis.iter().enumerate() {
            let coef = S::from_real(s[[c, i]]);
            for (xi, vji) in x.iter_mut().zip(vj) {
                *xi += coef * *vji;
            }
        }
        out.push((th, x));
    }
    Ok(Pass { converged: out, estimates })
}
