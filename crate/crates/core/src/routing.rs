//! Routing games: a directed graph whose edges are the resources and whose
//! origin/destination pairs are the populations.

use crate::error::{Error, Result};
use crate::game::{CongestionFunction, CongestionModel, Population};

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub function: CongestionFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdPopulation {
    pub source: usize,
    pub sink: usize,
    pub mass: f64,
    /// Explicit path set as edge-index sequences. Overrides enumeration.
    pub paths: Option<Vec<Vec<usize>>>,
    /// Hop limit for enumeration; defaults to `|V| - 1`.
    pub max_hops: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingNetwork {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    populations: Vec<OdPopulation>,
}

impl RoutingNetwork {
    pub fn new(
        vertices: Vec<String>,
        edges: Vec<Edge>,
        populations: Vec<OdPopulation>,
    ) -> Result<Self> {
        let n = vertices.len();
        for (i, e) in edges.iter().enumerate() {
            if e.tail >= n || e.head >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge {i} references a vertex outside 0..{n}"
                )));
            }
            e.function.validate()?;
        }
        let net = RoutingNetwork {
            vertices,
            edges,
            populations,
        };
        for (k, pop) in net.populations.iter().enumerate() {
            if pop.source >= n || pop.sink >= n {
                return Err(Error::InvalidNetwork(format!(
                    "population {k} references a vertex outside 0..{n}"
                )));
            }
            if pop.source == pop.sink {
                return Err(Error::InvalidNetwork(format!(
                    "population {k} has identical source and sink"
                )));
            }
            if let Some(paths) = &pop.paths {
                for (i, path) in paths.iter().enumerate() {
                    net.check_path(pop.source, pop.sink, path)
                        .map_err(|reason| {
                            Error::InvalidNetwork(format!("population {k}, path {i}: {reason}"))
                        })?;
                }
            }
        }
        Ok(net)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn populations(&self) -> &[OdPopulation] {
        &self.populations
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn edge_name(&self, e: usize) -> String {
        let edge = &self.edges[e];
        format!("{}->{}", self.vertices[edge.tail], self.vertices[edge.head])
    }

    /// Converts a vertex sequence into edge indices. Fails on a missing edge
    /// or when parallel edges make the choice ambiguous.
    pub fn path_from_vertices(&self, vertices: &[usize]) -> Result<Vec<usize>> {
        vertices
            .windows(2)
            .map(|w| {
                let mut matches = self
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.tail == w[0] && e.head == w[1])
                    .map(|(i, _)| i);
                match (matches.next(), matches.next()) {
                    (Some(i), None) => Ok(i),
                    (None, _) => Err(Error::InvalidNetwork(format!(
                        "no edge {} -> {}",
                        self.vertices[w[0]], self.vertices[w[1]]
                    ))),
                    (Some(_), Some(_)) => Err(Error::InvalidNetwork(format!(
                        "parallel edges {} -> {}; give the path by edge index",
                        self.vertices[w[0]], self.vertices[w[1]]
                    ))),
                }
            })
            .collect()
    }

    fn check_path(
        &self,
        source: usize,
        sink: usize,
        path: &[usize],
    ) -> std::result::Result<(), String> {
        if path.is_empty() {
            return Err("empty path".into());
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut at = source;
        seen[at] = true;
        for &e in path {
            let edge = self
                .edges
                .get(e)
                .ok_or_else(|| format!("edge {e} does not exist"))?;
            if edge.tail != at {
                return Err(format!("edge {e} does not continue from vertex {at}"));
            }
            at = edge.head;
            if seen[at] {
                return Err(format!("vertex {at} visited twice"));
            }
            seen[at] = true;
        }
        if at != sink {
            return Err(format!("path ends at vertex {at}, not at the sink {sink}"));
        }
        Ok(())
    }
}

/// All simple directed paths from the population's source to its sink with
/// at most `max_hops` edges, in lexicographic order of edge indices.
pub fn enumerate_paths(
    network: &RoutingNetwork,
    population_index: usize,
    max_hops: usize,
) -> Result<Vec<Vec<usize>>> {
    let pop = network
        .populations
        .get(population_index)
        .ok_or_else(|| Error::InvalidNetwork(format!("no population {population_index}")))?;
    if max_hops == 0 {
        return Err(Error::InvalidNetwork("max_hops must be at least 1".into()));
    }
    let mut out_edges = vec![Vec::new(); network.vertices.len()];
    for (i, e) in network.edges.iter().enumerate() {
        out_edges[e.tail].push(i);
    }

    let mut paths = Vec::new();
    let mut visited = vec![false; network.vertices.len()];
    let mut stack = Vec::new();
    visited[pop.source] = true;
    dfs(
        network,
        &out_edges,
        pop.source,
        pop.sink,
        max_hops,
        &mut visited,
        &mut stack,
        &mut paths,
    );
    Ok(paths)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    network: &RoutingNetwork,
    out_edges: &[Vec<usize>],
    at: usize,
    sink: usize,
    hops_left: usize,
    visited: &mut [bool],
    stack: &mut Vec<usize>,
    paths: &mut Vec<Vec<usize>>,
) {
    if at == sink {
        paths.push(stack.clone());
        return;
    }
    if hops_left == 0 {
        return;
    }
    for &e in &out_edges[at] {
        let next = network.edges[e].head;
        if visited[next] {
            continue;
        }
        visited[next] = true;
        stack.push(e);
        dfs(
            network,
            out_edges,
            next,
            sink,
            hops_left - 1,
            visited,
            stack,
            paths,
        );
        stack.pop();
        visited[next] = false;
    }
}

/// Lowers the network: resources are edges, bundles are paths.
pub fn to_congestion_game(network: &RoutingNetwork) -> Result<CongestionModel> {
    let default_hops = network.vertices.len().saturating_sub(1).max(1);
    let mut populations = Vec::with_capacity(network.populations.len());
    for (k, pop) in network.populations.iter().enumerate() {
        let paths = match &pop.paths {
            Some(p) => p.clone(),
            None => enumerate_paths(network, k, pop.max_hops.unwrap_or(default_hops))?,
        };
        if paths.is_empty() {
            return Err(Error::NoPath {
                population: k,
                source_vertex: network.vertices[pop.source].clone(),
                sink: network.vertices[pop.sink].clone(),
            });
        }
        populations.push(Population::new(pop.mass, paths));
    }
    let names = (0..network.edges.len())
        .map(|e| network.edge_name(e))
        .collect();
    let functions = network.edges.iter().map(|e| e.function.clone()).collect();
    CongestionModel::with_names(names, functions, populations)
}

/// The two-population, six-vertex, nine-edge example network with its fixed
/// path sets.
pub fn example_network() -> RoutingNetwork {
    let affine = |a: f64, b: f64| CongestionFunction::Affine {
        slope: a,
        intercept: b,
    };
    let edge = |tail, head, function| Edge {
        tail,
        head,
        function,
    };
    let edges = vec![
        edge(0, 1, affine(1.0, 2.0)),                  // 0: v0 -> v1, u + 2
        edge(0, 4, affine(0.5, 0.0)),                  // 1: v0 -> v4, u / 2
        edge(0, 5, affine(1.0, 0.0)),                  // 2: v0 -> v5, u
        edge(2, 3, affine(1.0, 1.0)),                  // 3: v2 -> v3, u + 1
        edge(2, 4, CongestionFunction::Constant(0.5)), // 4: v2 -> v4, 1/2
        edge(4, 3, affine(1.0, 0.0)),                  // 5: v4 -> v3, u
        edge(4, 5, affine(3.0, 0.0)),                  // 6: v4 -> v5, 3u
        edge(5, 1, affine(1.0 / 3.0, 0.0)),            // 7: v5 -> v1, u / 3
        edge(5, 3, affine(0.25, 0.0)),                 // 8: v5 -> v3, u / 4
    ];
    let populations = vec![
        OdPopulation {
            source: 0,
            sink: 1,
            mass: 1.0,
            // (v0,v1), (v0,v4,v5,v1), (v0,v5,v1)
            paths: Some(vec![vec![0], vec![1, 6, 7], vec![2, 7]]),
            max_hops: None,
        },
        OdPopulation {
            source: 2,
            sink: 3,
            mass: 1.0,
            // (v2,v3), (v2,v4,v5,v3), (v2,v4,v3)
            paths: Some(vec![vec![3], vec![4, 6, 8], vec![4, 5]]),
            max_hops: None,
        },
    ];
    let vertices = (0..6).map(|i| format!("v{i}")).collect();
    RoutingNetwork::new(vertices, edges, populations).expect("example network is valid")
}
