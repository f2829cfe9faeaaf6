//! Spectral diagnostics: the non-interacting lift, Weyl slopes, heat
//! traces and the Dirichlet/Robin bracketing of a two-particle problem.

use std::f64::consts::PI;

use ndarray::Array2;
use ndarray_linalg::c64;
use serde::Serialize;

use crate::bc_maps::BoundaryMap;
use crate::eigensolve::{counting_function, solve, Method, SolveOptions};
use crate::error::{Error, Result};
use crate::form_assembly::{assemble_two_particle, semibound_from, Mesh};
use crate::graph::MetricGraph;
use crate::linalg::dense;
use crate::scalar::Field;
use crate::symmetry::Sector;

/// Relative slack for inequalities between computed eigenvalues.
pub const BRACKET_SLACK: f64 = 1e-9;

/// Minimum number of eigenvalues a Weyl window must contain.
pub const MIN_WEYL_POINTS: usize = 30;

/// Sums `k_n² + k_m²` of one-particle eigenvalues, ascending and truncated
/// to `count`. The full sector takes ordered pairs, the bosonic sector
/// `n ≤ m` and the fermionic sector `n < m`.
///
/// Only sums up to `one[0] + one[last]` are guaranteed complete.
pub fn lift_spectrum(one: &[f64], count: usize, sector: Sector) -> Vec<f64> {
    let mut sums = Vec::with_capacity(one.len() * one.len());
    for (n, a) in one.iter().enumerate() {
        for (m, b) in one.iter().enumerate() {
            let keep = match sector {
                Sector::Full => true,
                Sector::Boson => n <= m,
                Sector::Fermion => n < m,
            };
            if keep {
                sums.push(a + b);
            }
        }
    }
    sums.sort_by(f64::total_cmp);
    sums.truncate(count);
    sums
}

/// Largest value below which a lift of `one` is complete.
pub fn lift_complete_below(one: &[f64]) -> f64 {
    match (one.first(), one.last()) {
        (Some(a), Some(b)) => a + b,
        _ => f64::NEG_INFINITY,
    }
}

/// Mesh-trust cutoff `(π / (4 h_max))²`.
pub fn mesh_trust_cutoff(mesh: &Mesh) -> f64 {
    (PI / (4.0 * mesh.h_max())).powi(2)
}

/// Leading Weyl coefficient of `N(λ)` for two particles.
pub fn weyl_slope_two(total_length: f64, sector: Sector) -> f64 {
    match sector {
        Sector::Full => total_length.powi(2) / (4.0 * PI),
        Sector::Boson | Sector::Fermion => total_length.powi(2) / (8.0 * PI),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylReport {
    pub slope: f64,
    pub intercept: f64,
    pub theoretical: f64,
    pub deviation: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub sector: Option<Sector>,
}

impl WeylReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.deviation <= tol
    }
}

/// Least-squares line through `(x, y)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn fit(
    values: &[f64],
    window: (f64, f64),
    abscissa: impl Fn(f64) -> f64,
    theoretical: f64,
    sector: Option<Sector>,
) -> Result<WeylReport> {
    let (lo, hi) = window;
    // counts are exact only up to the largest computed eigenvalue
    let hi = hi.min(values.last().copied().unwrap_or(f64::NEG_INFINITY));
    let inside: Vec<f64> = values.iter().copied().filter(|&v| v >= lo && v <= hi).collect();
    if inside.len() < MIN_WEYL_POINTS {
        return Err(Error::Argument(format!(
            "Weyl fit needs at least {MIN_WEYL_POINTS} eigenvalues in [{lo}, {hi}], found {}",
            inside.len()
        )));
    }
    let x: Vec<f64> = inside.iter().map(|&v| abscissa(v)).collect();
    let y: Vec<f64> = inside.iter().map(|&v| counting_function(values, v) as f64).collect();
    let (slope, intercept) = line_fit(&x, &y);
    Ok(WeylReport {
        slope,
        intercept,
        theoretical,
        deviation: (slope - theoretical).abs() / theoretical,
        window: (lo, hi),
        points: inside.len(),
        sector,
    })
}

/// Slope of `N(λ)` against `λ` over `window`, compared with `𝓛²/4π` or
/// `𝓛²/8π`. `values` must hold every eigenvalue up to its last entry.
pub fn weyl_fit(values: &[f64], total_length: f64, window: (f64, f64), sector: Sector) -> Result<WeylReport> {
    fit(values, window, |v| v, weyl_slope_two(total_length, sector), Some(sector))
}

/// Slope of `N₁` against `k = √λ`, compared with `𝓛/π`.
pub fn weyl_fit_one_particle(values: &[f64], total_length: f64, window: (f64, f64)) -> Result<WeylReport> {
    fit(values, window, |v| v.max(0.0).sqrt(), total_length / PI, None)
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatTrace {
    pub t: f64,
    pub value: f64,
    /// Estimate of the contribution of eigenvalues beyond the last one computed.
    pub tail: f64,
}

/// `Σ exp(−λ_i t)` over `values`, with a tail estimate from the local
/// density of the upper half of the list.
pub fn heat_trace(values: &[f64], t: f64) -> Result<HeatTrace> {
    if !(t > 0.0) {
        return Err(Error::Argument(format!("heat trace needs t > 0, got {t}")));
    }
    let value = values.iter().map(|&v| (-v * t).exp()).sum();
    let tail = match values {
        [.., last] if values.len() >= 2 => {
            let mid = values[values.len() / 2];
            let density = if *last > mid {
                (values.len() - values.len() / 2) as f64 / (last - mid)
            } else {
                0.0
            };
            density * (-last * t).exp() / t
        }
        _ => f64::INFINITY,
    };
    Ok(HeatTrace { t, value, tail })
}

/// One JSON record per checked claim.
#[derive(Clone, Debug, Serialize)]
pub struct Claim {
    pub claim: String,
    pub theoretical: f64,
    pub measured: f64,
    pub deviation: f64,
    pub pass: bool,
}

impl Claim {
    pub fn relative(claim: impl Into<String>, theoretical: f64, measured: f64, tol: f64) -> Self {
        let deviation = (measured - theoretical).abs() / theoretical.abs().max(f64::MIN_POSITIVE);
        Self {
            claim: claim.into(),
            theoretical,
            measured,
            deviation,
            pass: deviation <= tol,
        }
    }

    pub fn from_weyl(claim: impl Into<String>, r: &WeylReport, tol: f64) -> Self {
        Self {
            claim: claim.into(),
            theoretical: r.theoretical,
            measured: r.slope,
            deviation: r.deviation,
            pass: r.passes(tol),
        }
    }
}

/// Rows `(λ, N(λ), intercept + slope·λ)` for plotting a fit.
pub fn weyl_plot_rows(values: &[f64], r: &WeylReport) -> Vec<(f64, usize, f64)> {
    values
        .iter()
        .filter(|&&v| v <= r.window.1)
        .map(|&v| (v, counting_function(values, v), r.intercept + r.slope * v))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BracketReport {
    pub l_max: f64,
    pub robin: Vec<f64>,
    pub map: Vec<f64>,
    pub dirichlet: Vec<f64>,
    pub violations: Vec<String>,
    pub lower_bound: f64,
    pub pass: bool,
}

fn le(a: f64, b: f64) -> bool {
    a <= b + BRACKET_SLACK * a.abs().max(b.abs()).max(1.0)
}

/// Compares eigenvalues and counting functions of three ascending lists.
pub fn compare_bracket(robin: &[f64], map: &[f64], dirichlet: &[f64]) -> Vec<String> {
    let mut out = Vec::new();
    for n in 0..robin.len().min(map.len()).min(dirichlet.len()) {
        if !le(robin[n], map[n]) {
            out.push(format!("n={}: Robin {} > map {}", n + 1, robin[n], map[n]));
        }
        if !le(map[n], dirichlet[n]) {
            out.push(format!("n={}: map {} > Dirichlet {}", n + 1, map[n], dirichlet[n]));
        }
    }
    // counts are complete up to the smallest of the three largest values
    let top = [robin, map, dirichlet]
        .iter()
        .filter_map(|v| v.last().copied())
        .fold(f64::INFINITY, f64::min);
    for &lambda in robin.iter().chain(map).chain(dirichlet).filter(|&&l| l <= top) {
        let slack = BRACKET_SLACK * lambda.abs().max(1.0);
        let nd = counting_function(dirichlet, lambda - slack);
        let n = counting_function(map, lambda);
        let n_lo = counting_function(map, lambda - slack);
        let nr = counting_function(robin, lambda + slack);
        if nd > counting_function(map, lambda + slack) {
            out.push(format!("N_D({lambda}) = {nd} exceeds N = {n}"));
        }
        if n_lo > nr {
            out.push(format!("N({lambda}) = {n} exceeds N_R = {nr}"));
        }
    }
    out
}

/// Solves a map together with its Dirichlet (`P = 1`, `L = 0`) and Robin
/// (`P = 0`, `L = L_max·1`) comparison maps on the same mesh and checks the
/// sandwich for the first `n_max` eigenvalues.
pub fn bracketing_check<S: Field>(g: &MetricGraph, m: &BoundaryMap, mesh: &Mesh, n_max: usize) -> Result<BracketReport> {
    let ne = g.num_edges();
    let dim = m.dim();
    let mut l_max = 0.0f64;
    for s in m.sample(&mesh.y_nodes())? {
        l_max = l_max.max(dense::op_norm(&s.l)?);
    }
    let eye = Array2::<c64>::eye(dim);
    let zero = Array2::<c64>::zeros((dim, dim));
    let dirichlet = BoundaryMap::constant(eye.clone(), zero.clone(), ne)?;
    let robin = BoundaryMap::constant(zero, eye.mapv(|z| z * l_max), ne)?;
    let lower = -1.05 * semibound_from(l_max, g.min_length()) - 1.0;
    let opts = SolveOptions {
        method: Method::Auto,
        lower_bound: lower,
        ..SolveOptions::default()
    };
    let mut spectra = Vec::new();
    for map in [&robin, m, &dirichlet] {
        let form = assemble_two_particle::<S>(g, map, mesh)?;
        let k = n_max.min(form.reduced_dim());
        spectra.push(solve(&form.pencil(), k, &opts)?.eigenvalues);
    }
    let dirichlet = spectra.pop().unwrap();
    let map = spectra.pop().unwrap();
    let robin = spectra.pop().unwrap();
    let violations = compare_bracket(&robin, &map, &dirichlet);
    Ok(BracketReport {
        l_max,
        pass: violations.is_empty(),
        robin,
        map,
        dirichlet,
        violations,
        lower_bound: lower,
    })
}
