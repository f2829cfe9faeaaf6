use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use ndarray::Array2;
use serde::Serialize;

use qg2p_core::bc_maps::{delta_example_ab_reports, fold_to_plane, validate_map, MapKind, MapReport};
use qg2p_core::eigensolve::{self, solve, Method, SolveOptions, SpectrumResult};
use qg2p_core::form_assembly::{assemble_one_particle, assemble_two_particle, samples_are_real, semibound_from, Pencil};
use qg2p_core::linalg::dense;
use qg2p_core::spectral_analysis::{
    bracketing_check, heat_trace, lift_spectrum, mesh_trust_cutoff, weyl_fit, weyl_fit_one_particle, weyl_plot_rows,
    weyl_slope_two, BracketReport, Claim, WeylReport,
};
use qg2p_core::symmetry::{sector_pencil, Sector};
use qg2p_core::vertex_conditions::{validate_ab, AbReport, DEFAULT_TOL};
use qg2p_core::Field;

use crate::config::{MapSpec, PotentialSpec, Problem, RunConfig, Setup};
use crate::CliError;

/// Values given on the command line take precedence over the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mesh_h: Option<f64>,
    pub num_eigs: Option<usize>,
    pub sector: Option<Sector>,
    pub window: Option<(f64, f64)>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(h) = self.mesh_h {
            cfg.mesh.h = Some(h);
            cfg.mesh.nodes = None;
        }
        if let Some(k) = self.num_eigs {
            cfg.num_eigs = k;
        }
        if let Some(s) = self.sector {
            cfg.sector = s;
        }
        if let Some(w) = self.window {
            cfg.analysis.window = Some(w);
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
    }
}

/// Parses `lo:hi`.
pub fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("window must look like lo:hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("window lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("window upper bound: {e}"))?;
    if !(lo < hi) {
        return Err(format!("empty window {lo}:{hi}"));
    }
    Ok((lo, hi))
}

pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("qg2p-out"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphSummary {
    pub edges: usize,
    pub vertices: usize,
    pub total_length: f64,
    pub min_length: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionsSummary {
    pub ab: AbReport,
    pub local: bool,
    pub l_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleAbSummary {
    pub samples: usize,
    pub all_valid: bool,
    pub min_rank: usize,
    pub max_hermitian_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub graph: GraphSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example_ab: Option<ExampleAbSummary>,
    pub semibound_constant: f64,
    pub notices: Vec<String>,
    pub errors: Vec<String>,
}

/// Checks the graph, the one-particle conditions, the two-particle map at
/// every boundary node of the mesh, and the example's `(A, B)` pairs.
pub fn validate(cfg: &RunConfig) -> Result<ValidationReport, CliError> {
    let setup = Setup::from_config(cfg)?;
    let g = &setup.graph;
    let mut errors = Vec::new();
    let conditions = setup.conditions.as_ref().map(|vc| {
        let ab = validate_ab(&vc.a, &vc.b, DEFAULT_TOL).expect("conditions were validated on construction");
        if !ab.is_valid() {
            errors.push("vertex conditions fail the rank or Hermiticity test".to_string());
        }
        ConditionsSummary {
            ab,
            local: vc.local,
            l_norm: vc.l_norm(),
        }
    });
    let ys = setup.mesh.y_nodes();
    let (map, example_ab) = match &setup.map {
        Some(m) => {
            let report = validate_map(m, &ys, DEFAULT_TOL)?;
            let example = match m.kind() {
                MapKind::DeltaExample(ex) => {
                    let reports = delta_example_ab_reports(ex, &ys)?;
                    let all_valid = reports.iter().all(AbReport::is_valid);
                    if !all_valid {
                        errors.push("the example's (A, B) pairs fail pointwise validity".into());
                    }
                    Some(ExampleAbSummary {
                        samples: reports.len(),
                        all_valid,
                        min_rank: reports.iter().map(|r| r.rank).min().unwrap_or(0),
                        max_hermitian_defect: reports.iter().map(|r| r.hermitian_defect).fold(0.0, f64::max),
                    })
                }
                _ => None,
            };
            (Some(report), example)
        }
        None => (None, None),
    };
    let l_max = match (&map, &conditions) {
        (Some(m), _) => m.l_max,
        (None, Some(c)) => c.l_norm,
        _ => 0.0,
    };
    let mut notices = setup.notices.clone();
    if let Some(m) = &map {
        notices.extend(m.warnings.iter().cloned());
    }
    Ok(ValidationReport {
        ok: errors.is_empty(),
        graph: GraphSummary {
            edges: g.num_edges(),
            vertices: g.num_vertices(),
            total_length: g.total_length(),
            min_length: g.min_length(),
        },
        conditions,
        map,
        example_ab,
        semibound_constant: semibound_from(l_max, g.min_length()),
        notices,
        errors,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSummary {
    pub problem: Problem,
    pub sector: Sector,
    pub nodes: usize,
    pub h_max: f64,
    pub dim: usize,
    pub method: Method,
    pub scalar: &'static str,
    pub c_infty: f64,
    pub l_max: f64,
    pub seed: u64,
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub residuals: Vec<f64>,
    pub notices: Vec<String>,
}

/// A solved problem; eigenvectors are kept only for real data.
pub struct Solved {
    pub summary: SpectrumSummary,
    pub vectors: Option<(Pencil<f64>, Vec<Vec<f64>>)>,
}

fn is_real(setup: &Setup, problem: Problem) -> Result<bool, CliError> {
    Ok(match problem {
        Problem::OneParticle => {
            let vc = setup.conditions.as_ref().expect("checked by setup");
            dense::narrow::<f64>(&vc.p, 1e-13).is_some() && dense::narrow::<f64>(&vc.l, 1e-13).is_some()
        }
        Problem::TwoParticle => {
            let m = setup.map.as_ref().expect("checked by setup");
            samples_are_real(&m.sample(&setup.mesh.y_nodes())?)
        }
    })
}

fn solve_in<S: Field>(
    setup: &Setup,
    cfg: &RunConfig,
    dump: Option<&Path>,
) -> Result<(SpectrumResult<S>, Pencil<S>, f64, f64), CliError> {
    let form = match cfg.problem {
        Problem::OneParticle => {
            if cfg.sector != Sector::Full {
                return Err(CliError::Config("exchange sectors need a two-particle problem".into()));
            }
            assemble_one_particle::<S>(&setup.graph, setup.conditions.as_ref().unwrap(), &setup.mesh)?
        }
        Problem::TwoParticle => {
            let m = setup.map.as_ref().unwrap();
            if cfg.sector != Sector::Full {
                let report = validate_map(m, &setup.mesh.y_nodes(), DEFAULT_TOL)?;
                if !report.block_structured {
                    return Err(CliError::Validation(
                        "exchange sectors need a map made of two identical diagonal blocks".into(),
                    ));
                }
            }
            assemble_two_particle::<S>(&setup.graph, m, &setup.mesh)?
        }
    };
    if let Some(dir) = dump {
        form.write_coo(dir)?;
    }
    let pencil = match cfg.problem {
        Problem::OneParticle => form.pencil(),
        Problem::TwoParticle => sector_pencil(&form, cfg.sector)?,
    };
    let k = cfg.num_eigs.min(pencil.dim());
    if k < cfg.num_eigs {
        info!("only {k} eigenvalues exist on this mesh");
    }
    let opts = SolveOptions {
        method: Method::Auto,
        lower_bound: -1.05 * form.c_infty - 1.0,
        seed: cfg.seed,
        keep_vectors: true,
        sector: cfg.sector,
    };
    let result = solve(&pencil, k, &opts)?;
    Ok((result, pencil, form.c_infty, form.l_max))
}

/// The scalar-independent part of a spectrum result.
struct Summarized {
    eigenvalues: Vec<f64>,
    multiplicities: Vec<usize>,
    residuals: Vec<f64>,
    method: Method,
    dim: usize,
}

impl Summarized {
    fn of<S>(r: &SpectrumResult<S>) -> Self {
        Self {
            eigenvalues: r.eigenvalues.clone(),
            multiplicities: r.multiplicities.clone(),
            residuals: r.residuals.clone(),
            method: r.method,
            dim: r.dim,
        }
    }
}

fn summarize(setup: &Setup, cfg: &RunConfig, r: Summarized, c_infty: f64, l_max: f64, scalar: &'static str) -> SpectrumSummary {
    SpectrumSummary {
        problem: cfg.problem,
        sector: cfg.sector,
        nodes: setup.mesh.nodes(),
        h_max: setup.mesh.h_max(),
        dim: r.dim,
        method: r.method,
        scalar,
        c_infty,
        l_max,
        seed: cfg.seed,
        eigenvalues: r.eigenvalues,
        multiplicities: r.multiplicities,
        residuals: r.residuals,
        notices: setup.notices.clone(),
    }
}

pub fn solve_config(cfg: &RunConfig, dump: Option<&Path>) -> Result<Solved, CliError> {
    let setup = Setup::from_config(cfg)?;
    let real = is_real(&setup, cfg.problem)?;
    let summary = |r: Summarized, c, l, scalar| summarize(&setup, cfg, r, c, l, scalar);
    if real {
        let (r, pencil, c, l) = solve_in::<f64>(&setup, cfg, dump)?;
        let s = summary(Summarized::of(&r), c, l, "real");
        Ok(Solved {
            summary: s,
            vectors: r.vectors.map(|v| (pencil, v)),
        })
    } else {
        let (r, _, c, l) = solve_in::<qg2p_core::c64>(&setup, cfg, dump)?;
        Ok(Solved {
            summary: summary(Summarized::of(&r), c, l, "complex"),
            vectors: None,
        })
    }
}

fn write_eigenvalues(dir: &Path, s: &SpectrumSummary) -> Result<(), CliError> {
    let r = SpectrumResult::<f64> {
        eigenvalues: s.eigenvalues.clone(),
        multiplicities: s.multiplicities.clone(),
        residuals: s.residuals.clone(),
        vectors: None,
        sector: s.sector,
        method: s.method,
        dim: s.dim,
    };
    eigensolve::write_csv(&r, BufWriter::new(File::create(dir.join("eigenvalues.csv"))?))?;
    Ok(())
}

/// Writes `eigenvalues.csv` and `spectrum.json` into the output directory.
pub fn spectrum(cfg: &RunConfig, dump: Option<&Path>) -> Result<SpectrumSummary, CliError> {
    let solved = solve_config(cfg, dump)?;
    let dir = output_dir(cfg);
    fs::create_dir_all(&dir)?;
    write_eigenvalues(&dir, &solved.summary)?;
    write_json(&dir.join("spectrum.json"), &solved.summary)?;
    Ok(solved.summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatRow {
    pub t: f64,
    pub trace: f64,
    pub leading: f64,
    pub ratio: f64,
    pub tail: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftCheck {
    pub compared: usize,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub spectrum: SpectrumSummary,
    pub mesh_trust_cutoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weyl: Option<WeylReport>,
    pub heat: Vec<HeatRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracketing: Option<BracketReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift_check: Option<LiftCheck>,
    pub claims: Vec<Claim>,
}

impl AnalysisReport {
    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }
}

pub const WEYL_TOL_TWO: f64 = 0.15;
pub const WEYL_TOL_ONE: f64 = 0.05;
pub const LIFT_TOL: f64 = 1e-9;

/// Spectrum plus the requested Weyl fit, heat traces, bracketing and lift
/// comparison; writes `analysis.json` and, with a Weyl fit, `weyl_plot.csv`.
pub fn analyze(cfg: &RunConfig) -> Result<AnalysisReport, CliError> {
    let setup = Setup::from_config(cfg)?;
    let solved = solve_config(cfg, None)?;
    let values = solved.summary.eigenvalues.clone();
    let total = setup.graph.total_length();
    let cutoff = mesh_trust_cutoff(&setup.mesh);
    let mut claims = Vec::new();

    let weyl = if cfg.analysis.weyl {
        let (lo, hi) = cfg.analysis.window.unwrap_or((0.0, cutoff));
        let window = (lo, hi.min(cutoff));
        let (report, tol, name) = match cfg.problem {
            Problem::OneParticle => (weyl_fit_one_particle(&values, total, window)?, WEYL_TOL_ONE, "one-particle Weyl slope L/pi"),
            Problem::TwoParticle => {
                let name = match cfg.sector {
                    Sector::Full => "two-particle Weyl slope L^2/(4 pi)",
                    _ => "two-particle Weyl slope L^2/(8 pi)",
                };
                (weyl_fit(&values, total, window, cfg.sector)?, WEYL_TOL_TWO, name)
            }
        };
        claims.push(Claim::from_weyl(name, &report, tol));
        Some(report)
    } else {
        None
    };

    let mut heat = Vec::new();
    for &t in &cfg.analysis.heat {
        let h = heat_trace(&values, t)?;
        let leading = match cfg.problem {
            Problem::OneParticle => total / (4.0 * PI * t).sqrt(),
            Problem::TwoParticle => weyl_slope_two(total, cfg.sector) / t,
        };
        heat.push(HeatRow {
            t,
            trace: h.value,
            leading,
            ratio: h.value / leading,
            tail: h.tail,
        });
    }

    let bracketing = if cfg.analysis.bracketing {
        if cfg.problem != Problem::TwoParticle {
            return Err(CliError::Config("bracketing compares two-particle maps".into()));
        }
        let n_max = cfg.analysis.n_max.unwrap_or(cfg.num_eigs.min(50));
        let m = setup.map.as_ref().unwrap();
        let report = if solved.summary.scalar == "real" {
            bracketing_check::<f64>(&setup.graph, m, &setup.mesh, n_max)?
        } else {
            bracketing_check::<qg2p_core::c64>(&setup.graph, m, &setup.mesh, n_max)?
        };
        claims.push(Claim {
            claim: "Dirichlet/Robin bracketing".into(),
            theoretical: 0.0,
            measured: report.violations.len() as f64,
            deviation: report.violations.len() as f64,
            pass: report.pass,
        });
        Some(report)
    } else {
        None
    };

    let lift_check = match (&cfg.map, cfg.analysis.lift_check, cfg.problem) {
        (Some(MapSpec::Lifted), true, Problem::TwoParticle) => {
            let vc = setup.conditions.as_ref().unwrap();
            let one = if solved.summary.scalar == "real" {
                one_particle_all::<f64>(&setup, vc)?
            } else {
                one_particle_all::<qg2p_core::c64>(&setup, vc)?
            };
            let lifted = lift_spectrum(&one, values.len(), cfg.sector);
            let max_deviation = values
                .iter()
                .zip(&lifted)
                .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
                .fold(0.0, f64::max);
            claims.push(Claim {
                claim: "two-particle spectrum equals sums of one-particle eigenvalues".into(),
                theoretical: 0.0,
                measured: max_deviation,
                deviation: max_deviation,
                pass: max_deviation <= LIFT_TOL && lifted.len() == values.len(),
            });
            Some(LiftCheck {
                compared: lifted.len().min(values.len()),
                max_deviation,
            })
        }
        (_, true, _) => return Err(CliError::Config("the lift check needs a lifted two-particle map".into())),
        _ => None,
    };

    let report = AnalysisReport {
        spectrum: solved.summary,
        mesh_trust_cutoff: cutoff,
        weyl,
        heat,
        bracketing,
        lift_check,
        claims,
    };
    let dir = output_dir(cfg);
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("analysis.json"), &report)?;
    if let Some(w) = &report.weyl {
        let mut f = BufWriter::new(File::create(dir.join("weyl_plot.csv"))?);
        writeln!(f, "lambda,N,weyl_line")?;
        for (l, n, line) in weyl_plot_rows(&values, w) {
            writeln!(f, "{l:.15e},{n},{line:.15e}")?;
        }
    }
    Ok(report)
}

fn one_particle_all<S: Field>(setup: &Setup, vc: &qg2p_core::vertex_conditions::VertexConditions) -> Result<Vec<f64>, CliError> {
    let form = assemble_one_particle::<S>(&setup.graph, vc, &setup.mesh)?;
    let p = form.pencil();
    let opts = SolveOptions {
        method: Method::Dense,
        ..SolveOptions::default()
    };
    Ok(solve(&p, p.dim(), &opts)?.eigenvalues)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleReport {
    pub notice: String,
    pub ab_all_valid: bool,
    pub ab_samples: usize,
    pub ground_state: f64,
    pub eigenvalues: Vec<f64>,
    /// Largest `|ψ₁₁(0,y) − ψ₂₁(0,y)|` and `|ψ₁₂(0,y) − ψ₂₂(0,y)|` over
    /// boundary nodes, for the ground state scaled to unit maximum.
    pub continuity_residual: f64,
    pub jump_x: f64,
    pub jump_y: f64,
    pub pass: bool,
}

pub const EXAMPLE_TOL: f64 = 1e-6;

/// Default configuration of the worked delta-interaction example.
pub fn example_config() -> RunConfig {
    let mut cfg = RunConfig::from_json(r#"{"mesh": {"nodes": 33}, "num_eigs": 4}"#).expect("static config");
    cfg.map = Some(MapSpec::DeltaExample {
        potential: PotentialSpec {
            amplitude: 4.0,
            width: 0.3,
            cutoff: 0.9,
        },
        truncation: 1.0,
    });
    cfg
}

/// Solves the bosonic sector of the delta example, checks the vertex
/// continuity of the ground state and unfolds it onto the plane
/// (`folded.csv`, `example.json`).
pub fn example_delta(cfg: &RunConfig) -> Result<ExampleReport, CliError> {
    if !matches!(cfg.map, Some(MapSpec::DeltaExample { .. })) {
        return Err(CliError::Config("example-delta needs a delta_example map".into()));
    }
    let mut cfg = cfg.clone();
    cfg.sector = Sector::Boson;
    cfg.problem = Problem::TwoParticle;
    let setup = Setup::from_config(&cfg)?;
    let m = setup.map.as_ref().unwrap();
    let MapKind::DeltaExample(ex) = m.kind() else { unreachable!() };
    let ys = setup.mesh.y_nodes();
    let ab = delta_example_ab_reports(ex, &ys)?;
    let ab_all_valid = ab.iter().all(AbReport::is_valid);

    let solved = solve_config(&cfg, None)?;
    let (pencil, vectors) = solved
        .vectors
        .ok_or_else(|| CliError::Config("the example potential must be real".into()))?;
    let u = pencil.expand(&vectors[0]);
    let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let u: Vec<f64> = u.iter().map(|v| v / scale).collect();

    let mesh = &setup.mesh;
    let n = mesh.nodes();
    let grid = |e1: usize, e2: usize| Array2::from_shape_fn((n, n), |(i, j)| u[mesh.dof2(e1, i, e2, j)]);
    let (p11, p21, p12, p22) = (grid(0, 0), grid(1, 0), grid(0, 1), grid(1, 1));
    let mut continuity = 0.0f64;
    for j in 0..n {
        continuity = continuity.max((p11[[0, j]] - p21[[0, j]]).abs());
        continuity = continuity.max((p12[[0, j]] - p22[[0, j]]).abs());
    }
    let coords: Vec<f64> = ys.iter().map(|y| y * ex.truncation).collect();
    let plane = fold_to_plane(&p11, &p21, &p12, &p22, &coords)?;

    let dir = output_dir(&cfg);
    fs::create_dir_all(&dir)?;
    let mut f = BufWriter::new(File::create(dir.join("folded.csv"))?);
    writeln!(f, "x,y,psi")?;
    for (i, x) in plane.coords.iter().enumerate() {
        for (j, y) in plane.coords.iter().enumerate() {
            writeln!(f, "{x:.10e},{y:.10e},{:.12e}", plane.values[[i, j]])?;
        }
    }
    write_eigenvalues(&dir, &solved.summary)?;
    let (jump_x, jump_y) = (plane.jump_x(), plane.jump_y());
    let report = ExampleReport {
        notice: crate::config::DELTA_NOTICE.into(),
        ab_all_valid,
        ab_samples: ab.len(),
        ground_state: solved.summary.eigenvalues[0],
        eigenvalues: solved.summary.eigenvalues.clone(),
        continuity_residual: continuity,
        jump_x,
        jump_y,
        pass: ab_all_valid && continuity <= EXAMPLE_TOL && jump_x <= EXAMPLE_TOL && jump_y <= EXAMPLE_TOL,
    };
    write_json(&dir.join("example.json"), &report)?;
    Ok(report)
}
