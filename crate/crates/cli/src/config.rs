//! JSON run configuration.
//!
//! Matrices are nested row arrays whose entries are either plain numbers
//! or `[re, im]` pairs.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use qg2p_core::c64;
use serde::{Deserialize, Serialize};

use qg2p_core::bc_maps::{delta_example_map, lift_one_particle, BoundaryMap, Potential};
use qg2p_core::form_assembly::Mesh;
use qg2p_core::graph::{build_graph, GraphSpec, MetricGraph};
use qg2p_core::symmetry::Sector;
use qg2p_core::vertex_conditions::{standard_family, vertex_rules, Family, VertexConditions, VertexRule, DEFAULT_TOL};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> c64 {
        match self {
            Entry::Real(x) => c64::new(x, 0.0),
            Entry::Complex([re, im]) => c64::new(re, im),
        }
    }
}

pub type MatrixSpec = Vec<Vec<Entry>>;

pub fn to_array(m: &MatrixSpec, what: &str) -> Result<Array2<c64>, CliError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if m.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config(format!("{what}: rows of unequal length")));
    }
    Ok(Array2::from_shape_fn((rows, cols), |(i, j)| m[i][j].value()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionsSpec {
    Dirichlet,
    Neumann,
    Robin { alpha: f64 },
    /// One rule per vertex, in vertex order.
    Vertices { rules: Vec<VertexRule> },
    Ab { a: MatrixSpec, b: MatrixSpec },
    Pl { p: MatrixSpec, l: MatrixSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub p: MatrixSpec,
    pub l: MatrixSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub amplitude: f64,
    pub width: f64,
    pub cutoff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    /// Lift of the one-particle `conditions`.
    Lifted,
    Constant { p: MatrixSpec, l: MatrixSpec },
    Piecewise { breaks: Vec<f64>, pieces: Vec<PieceSpec> },
    /// Lifted diagonal projector with a smooth bump interaction on `ran Q`.
    Bump {
        p1_diagonal: Vec<f64>,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Two edges joined at their `x = 0` ends, truncated at `truncation`.
    DeltaExample { potential: PotentialSpec, truncation: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    OneParticle,
    #[default]
    TwoParticle,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    /// Common node count per edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    /// Largest admissible spacing; used when `nodes` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub weyl: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    /// Times at which to evaluate the heat trace.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub heat: Vec<f64>,
    #[serde(default)]
    pub bracketing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub lift_check: bool,
}

fn default_eigs() -> usize {
    10
}

fn default_seed() -> u64 {
    0x5eed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default)]
    pub problem: Problem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default = "default_sector")]
    pub sector: Sector,
    #[serde(default = "default_eigs")]
    pub num_eigs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_sector() -> Sector {
    Sector::Full
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }
}

/// Everything a command needs, built and checked from a config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub graph: MetricGraph,
    pub conditions: Option<VertexConditions>,
    pub map: Option<BoundaryMap>,
    pub mesh: Mesh,
    pub notices: Vec<String>,
}

fn conditions(spec: &ConditionsSpec, g: &MetricGraph) -> Result<VertexConditions, CliError> {
    Ok(match spec {
        ConditionsSpec::Dirichlet => standard_family(&Family::Dirichlet, g)?,
        ConditionsSpec::Neumann => standard_family(&Family::Neumann, g)?,
        ConditionsSpec::Robin { alpha } => standard_family(&Family::Robin(*alpha), g)?,
        ConditionsSpec::Vertices { rules } => vertex_rules(g, rules)?,
        ConditionsSpec::Ab { a, b } => {
            VertexConditions::from_ab(to_array(a, "conditions.a")?, to_array(b, "conditions.b")?, g, DEFAULT_TOL)?
        }
        ConditionsSpec::Pl { p, l } => {
            VertexConditions::from_pl(to_array(p, "conditions.p")?, to_array(l, "conditions.l")?, g, DEFAULT_TOL)?
        }
    })
}

pub const DELTA_NOTICE: &str = "the interaction lives on the whole line; it is computed on two edges of finite length with \
     Dirichlet far ends, a setting the compactness results do not cover as stated";

impl Setup {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, CliError> {
        let mut notices = Vec::new();
        let (graph, map, conds) = match &cfg.map {
            Some(MapSpec::DeltaExample { potential, truncation }) => {
                if cfg.problem == Problem::OneParticle {
                    return Err(CliError::Config("the delta example is a two-particle problem".into()));
                }
                if cfg.graph.is_some() {
                    notices.push("graph is implied by the delta example; the configured graph is ignored".into());
                }
                let v = Potential::gaussian_bump(potential.amplitude, potential.width, potential.cutoff);
                let (g, m) = delta_example_map(v, *truncation)?;
                notices.push(DELTA_NOTICE.into());
                (g, Some(m), None)
            }
            other => {
                let spec = cfg
                    .graph
                    .as_ref()
                    .ok_or_else(|| CliError::Config("config needs a graph".into()))?;
                let g = build_graph(spec)?;
                let conds = cfg.conditions.as_ref().map(|c| conditions(c, &g)).transpose()?;
                let e = g.num_edges();
                let map = match other {
                    None => None,
                    Some(MapSpec::Lifted) => {
                        let vc = conds
                            .as_ref()
                            .ok_or_else(|| CliError::Config("a lifted map needs conditions".into()))?;
                        Some(lift_one_particle(vc, &g))
                    }
                    Some(MapSpec::Constant { p, l }) => {
                        Some(BoundaryMap::constant(to_array(p, "map.p")?, to_array(l, "map.l")?, e)?)
                    }
                    Some(MapSpec::Piecewise { breaks, pieces }) => {
                        let pieces = pieces
                            .iter()
                            .enumerate()
                            .map(|(i, pc)| {
                                Ok((to_array(&pc.p, &format!("map.pieces[{i}].p"))?, to_array(&pc.l, &format!("map.pieces[{i}].l"))?))
                            })
                            .collect::<Result<Vec<_>, CliError>>()?;
                        Some(BoundaryMap::piecewise(breaks.clone(), pieces, e)?)
                    }
                    Some(MapSpec::Bump {
                        p1_diagonal,
                        amplitude,
                        center,
                        width,
                    }) => {
                        let n = p1_diagonal.len();
                        let mut p1 = Array2::<c64>::zeros((n, n));
                        for (i, &v) in p1_diagonal.iter().enumerate() {
                            p1[[i, i]] = c64::new(v, 0.0);
                        }
                        Some(BoundaryMap::bump(p1, *amplitude, *center, *width, e)?)
                    }
                    Some(MapSpec::DeltaExample { .. }) => unreachable!(),
                };
                (g, map, conds)
            }
        };
        match cfg.problem {
            Problem::OneParticle if conds.is_none() => {
                return Err(CliError::Config("a one-particle problem needs conditions".into()))
            }
            Problem::TwoParticle if map.is_none() => {
                return Err(CliError::Config("a two-particle problem needs a map".into()))
            }
            _ => {}
        }
        let mesh = match (cfg.mesh.nodes, cfg.mesh.h) {
            (Some(n), _) => Mesh::new(&graph, n)?,
            (None, Some(h)) => Mesh::from_spacing(&graph, h)?,
            (None, None) => Mesh::from_spacing(&graph, graph.max_length() / 32.0)?,
        };
        Ok(Self {
            graph,
            conditions: conds,
            map,
            mesh,
            notices,
        })
    }
}
