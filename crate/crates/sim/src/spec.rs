//! JSON game specifications.
//!
//! ```json
//! {
//!   "type": "routing",
//!   "vertices": ["s", "t"],
//!   "edges": [
//!     {"tail": "s", "head": "t", "function": {"kind": "constant", "params": [1.0]}},
//!     {"tail": "s", "head": "t", "function": {"kind": "affine", "params": [1.0, 0.0]}}
//!   ],
//!   "populations": [{"source": "s", "sink": "t", "mass": 1.0}]
//! }
//! ```
//!
//! Function parameters: `constant` takes `[c]`, `affine` takes
//! `[slope, intercept]`, `polynomial` takes ascending coefficients
//! `[a0, a1, ...]`. Routing paths are vertex-name sequences.

use std::collections::HashMap;
use std::path::Path;

use congestion_core::routing::{Edge, OdPopulation};
use congestion_core::{
    to_congestion_game, CongestionFunction, CongestionModel, Population, RoutingNetwork,
};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const EXAMPLE_NETWORK: &str = "example-network";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GameSpec {
    Congestion(CongestionSpec),
    Routing(RoutingSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Constant,
    Affine,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    pub name: String,
    pub function: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundlePopulationSpec {
    pub mass: f64,
    /// Each bundle is a list of resource names.
    pub bundles: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionSpec {
    pub resources: Vec<ResourceSpec>,
    pub populations: Vec<BundlePopulationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub tail: String,
    pub head: String,
    pub function: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdSpec {
    pub source: String,
    pub sink: String,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_hops: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    pub populations: Vec<OdSpec>,
}

/// A model ready for simulation, with human-readable bundle labels.
#[derive(Debug, Clone)]
pub struct Game {
    pub name: String,
    pub model: CongestionModel,
    pub bundle_labels: Vec<Vec<String>>,
}

impl FunctionSpec {
    fn new(kind: FunctionKind, params: Vec<f64>) -> Self {
        FunctionSpec { kind, params }
    }

    pub fn to_function(&self) -> Result<CongestionFunction> {
        let arity = |n: usize| {
            if self.params.len() == n {
                Ok(())
            } else {
                Err(SimError::Config(format!(
                    "{:?} function takes {n} parameter(s), got {}",
                    self.kind,
                    self.params.len()
                )))
            }
        };
        Ok(match self.kind {
            FunctionKind::Constant => {
                arity(1)?;
                CongestionFunction::constant(self.params[0])?
            }
            FunctionKind::Affine => {
                arity(2)?;
                CongestionFunction::affine(self.params[0], self.params[1])?
            }
            FunctionKind::Polynomial => CongestionFunction::polynomial(self.params.clone())?,
        })
    }
}

fn index_of(names: &HashMap<&str, usize>, name: &str, what: &str) -> Result<usize> {
    names
        .get(name)
        .copied()
        .ok_or_else(|| SimError::Config(format!("unknown {what} {name:?}")))
}

fn name_index<'a>(names: &'a [String], what: &str) -> Result<HashMap<&'a str, usize>> {
    let mut map = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.as_str(), i).is_some() {
            return Err(SimError::Config(format!("duplicate {what} name {n:?}")));
        }
    }
    Ok(map)
}

impl CongestionSpec {
    pub fn to_game(&self, name: &str) -> Result<Game> {
        let names: Vec<String> = self.resources.iter().map(|r| r.name.clone()).collect();
        let index = name_index(&names, "resource")?;
        let functions = self
            .resources
            .iter()
            .map(|r| r.function.to_function())
            .collect::<Result<Vec<_>>>()?;
        let populations = self
            .populations
            .iter()
            .map(|p| {
                let bundles = p
                    .bundles
                    .iter()
                    .map(|b| b.iter().map(|r| index_of(&index, r, "resource")).collect())
                    .collect::<Result<Vec<Vec<usize>>>>()?;
                Ok(Population::new(p.mass, bundles))
            })
            .collect::<Result<Vec<_>>>()?;
        let model = CongestionModel::with_names(names, functions, populations)?;
        let bundle_labels = self
            .populations
            .iter()
            .map(|p| p.bundles.iter().map(|b| b.join("+")).collect())
            .collect();
        Ok(Game {
            name: name.to_string(),
            model,
            bundle_labels,
        })
    }
}

impl RoutingSpec {
    pub fn to_network(&self) -> Result<RoutingNetwork> {
        let index = name_index(&self.vertices, "vertex")?;
        let edges = self
            .edges
            .iter()
            .map(|e| {
                Ok(Edge {
                    tail: index_of(&index, &e.tail, "vertex")?,
                    head: index_of(&index, &e.head, "vertex")?,
                    function: e.function.to_function()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut populations = self
            .populations
            .iter()
            .map(|p| {
                Ok(OdPopulation {
                    source: index_of(&index, &p.source, "vertex")?,
                    sink: index_of(&index, &p.sink, "vertex")?,
                    mass: p.mass,
                    paths: None,
                    max_hops: p.max_hops,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // Explicit paths are vertex sequences; resolving them to edges needs
        // the network itself.
        let bare = RoutingNetwork::new(self.vertices.clone(), edges.clone(), populations.clone())?;
        for (spec, pop) in self.populations.iter().zip(populations.iter_mut()) {
            if let Some(paths) = &spec.paths {
                pop.paths = Some(
                    paths
                        .iter()
                        .map(|path| {
                            let vs = path
                                .iter()
                                .map(|v| index_of(&index, v, "vertex"))
                                .collect::<Result<Vec<_>>>()?;
                            Ok(bare.path_from_vertices(&vs)?)
                        })
                        .collect::<Result<Vec<_>>>()?,
                );
            }
        }
        Ok(RoutingNetwork::new(
            self.vertices.clone(),
            edges,
            populations,
        )?)
    }

    pub fn to_game(&self, name: &str) -> Result<Game> {
        let network = self.to_network()?;
        let model = to_congestion_game(&network)?;
        Ok(Game {
            name: name.to_string(),
            bundle_labels: path_labels(&network, &model),
            model,
        })
    }
}

/// `v0-v4-v5-v1` style labels for the lowered bundles.
fn path_labels(network: &RoutingNetwork, model: &CongestionModel) -> Vec<Vec<String>> {
    model
        .populations()
        .iter()
        .map(|pop| {
            pop.bundles
                .iter()
                .map(|edges| {
                    let mut vs = vec![network.vertices()[network.edges()[edges[0]].tail].clone()];
                    vs.extend(
                        edges
                            .iter()
                            .map(|&e| network.vertices()[network.edges()[e].head].clone()),
                    );
                    vs.join("-")
                })
                .collect()
        })
        .collect()
}

impl GameSpec {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_game(&self, name: &str) -> Result<Game> {
        match self {
            GameSpec::Congestion(c) => c.to_game(name),
            GameSpec::Routing(r) => r.to_game(name),
        }
    }

    /// Two populations on a six-vertex network with three fixed paths each.
    pub fn example_network() -> Self {
        use FunctionKind::*;
        let v = |i: usize| format!("v{i}");
        let edge = |t: usize, h: usize, kind, params: Vec<f64>| EdgeSpec {
            tail: v(t),
            head: v(h),
            function: FunctionSpec::new(kind, params),
        };
        let path = |vs: &[usize]| vs.iter().map(|&i| v(i)).collect::<Vec<_>>();
        GameSpec::Routing(RoutingSpec {
            vertices: (0..6).map(v).collect(),
            edges: vec![
                edge(0, 1, Affine, vec![1.0, 2.0]),
                edge(0, 4, Affine, vec![0.5, 0.0]),
                edge(0, 5, Affine, vec![1.0, 0.0]),
                edge(2, 3, Affine, vec![1.0, 1.0]),
                edge(2, 4, Constant, vec![0.5]),
                edge(4, 3, Affine, vec![1.0, 0.0]),
                edge(4, 5, Affine, vec![3.0, 0.0]),
                edge(5, 1, Affine, vec![1.0 / 3.0, 0.0]),
                edge(5, 3, Affine, vec![0.25, 0.0]),
            ],
            populations: vec![
                OdSpec {
                    source: v(0),
                    sink: v(1),
                    mass: 1.0,
                    paths: Some(vec![path(&[0, 1]), path(&[0, 4, 5, 1]), path(&[0, 5, 1])]),
                    max_hops: None,
                },
                OdSpec {
                    source: v(2),
                    sink: v(3),
                    mass: 1.0,
                    paths: Some(vec![path(&[2, 3]), path(&[2, 4, 5, 3]), path(&[2, 4, 3])]),
                    max_hops: None,
                },
            ],
        })
    }
}

/// Loads a built-in game by name or a JSON spec from disk.
pub fn load_game(source: &str) -> Result<Game> {
    if source == EXAMPLE_NETWORK {
        return GameSpec::example_network().to_game(EXAMPLE_NETWORK);
    }
    let path = Path::new(source);
    // A bare word that is not a file is taken as a misspelt built-in name.
    if !path.exists() && path.extension().is_none() && !source.contains('/') {
        return Err(SimError::UnknownGame(source.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(SimError::io(path))?;
    let spec = GameSpec::from_json(&text).map_err(|source| SimError::Spec {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source.to_string());
    spec.to_game(&name)
}
