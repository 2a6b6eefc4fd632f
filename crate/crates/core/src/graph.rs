//! Pipeline graphs: typed component nodes wired into a DAG.

use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Hyperparameterized component of a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    KnnOD { k: usize, tau: f64 },
    KnnMeanOD { k: usize, tau: f64 },
    VarianceFS { tau: f64 },
    CorrelationFS { tau_corr: f64 },
    KMeans { n_clusters: usize, max_iter: usize, seed: u64 },
    Dbscan { eps: f64, min_pts: usize },
    UnionO,
    IntersectO,
    UnionM,
    IntersectM,
}

impl Component {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Component::KnnOD { .. } => "KnnOD",
            Component::KnnMeanOD { .. } => "KnnMeanOD",
            Component::VarianceFS { .. } => "VarianceFS",
            Component::CorrelationFS { .. } => "CorrelationFS",
            Component::KMeans { .. } => "KMeans",
            Component::Dbscan { .. } => "DBSCAN",
            Component::UnionO => "UnionO",
            Component::IntersectO => "IntersectO",
            Component::UnionM => "UnionM",
            Component::IntersectM => "IntersectM",
        }
    }

    pub fn is_aggregate(&self) -> bool {
        matches!(
            self,
            Component::UnionO | Component::IntersectO | Component::UnionM | Component::IntersectM
        )
    }

    pub fn is_clustering(&self) -> bool {
        matches!(self, Component::KMeans { .. } | Component::Dbscan { .. })
    }

    pub fn is_outlier_detection(&self) -> bool {
        matches!(self, Component::KnnOD { .. } | Component::KnnMeanOD { .. })
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.kind_name())));
        match *self {
            Component::KnnOD { k, tau } | Component::KnnMeanOD { k, tau } => {
                if k == 0 {
                    return bad("k must be at least 1".into());
                }
                if tau.is_nan() {
                    return bad("tau is NaN".into());
                }
            }
            Component::VarianceFS { tau } if tau.is_nan() => return bad("tau is NaN".into()),
            Component::CorrelationFS { tau_corr } if tau_corr.is_nan() => {
                return bad("tau_corr is NaN".into())
            }
            Component::KMeans { n_clusters, .. } if n_clusters == 0 => {
                return bad("n_clusters must be at least 1".into())
            }
            Component::Dbscan { eps, min_pts } => {
                if !(eps > 0.0) {
                    return bad(format!("eps must be positive, got {eps}"));
                }
                if min_pts == 0 {
                    return bad("min_pts must be at least 1".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A node of the pipeline graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub component: Component,
}

/// On-disk form: `{nodes: [{id, kind, params}], edges: [[parent, child]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnParams {
    k: usize,
    #[serde(deserialize_with = "extended_real")]
    tau: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TauParams {
    #[serde(deserialize_with = "extended_real")]
    tau: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrParams {
    #[serde(deserialize_with = "extended_real")]
    tau_corr: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KMeansParams {
    n_clusters: usize,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default)]
    seed: u64,
}

fn default_max_iter() -> usize {
    100
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DbscanParams {
    eps: f64,
    min_pts: usize,
}

/// Numbers, or the strings `"inf"` / `"-inf"` since JSON has no infinity.
fn extended_real<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Raw::deserialize(de)? {
        Raw::Num(v) => Ok(v),
        Raw::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => other
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("not a number: {s:?}"))),
        },
    }
}

fn ser_real(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}

impl NodeConfig {
    fn component(&self) -> Result<Component> {
        let params = if self.params.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            self.params.clone()
        };
        let wrap = |e: serde_json::Error| {
            Error::Config(format!("node `{}` ({}): {e}", self.id, self.kind))
        };
        let c = match self.kind.as_str() {
            "KnnOD" => {
                let p: KnnParams = serde_json::from_value(params).map_err(wrap)?;
                Component::KnnOD { k: p.k, tau: p.tau }
            }
            "KnnMeanOD" => {
                let p: KnnParams = serde_json::from_value(params).map_err(wrap)?;
                Component::KnnMeanOD { k: p.k, tau: p.tau }
            }
            "VarianceFS" => {
                let p: TauParams = serde_json::from_value(params).map_err(wrap)?;
                Component::VarianceFS { tau: p.tau }
            }
            "CorrelationFS" => {
                let p: CorrParams = serde_json::from_value(params).map_err(wrap)?;
                Component::CorrelationFS { tau_corr: p.tau_corr }
            }
            "KMeans" => {
                let p: KMeansParams = serde_json::from_value(params).map_err(wrap)?;
                Component::KMeans {
                    n_clusters: p.n_clusters,
                    max_iter: p.max_iter,
                    seed: p.seed,
                }
            }
            "DBSCAN" => {
                let p: DbscanParams = serde_json::from_value(params).map_err(wrap)?;
                Component::Dbscan {
                    eps: p.eps,
                    min_pts: p.min_pts,
                }
            }
            "UnionO" => Component::UnionO,
            "IntersectO" => Component::IntersectO,
            "UnionM" => Component::UnionM,
            "IntersectM" => Component::IntersectM,
            other => {
                return Err(Error::Config(format!(
                    "node `{}`: unknown kind `{other}`",
                    self.id
                )))
            }
        };
        c.validate()
            .map_err(|e| Error::Config(format!("node `{}`: {e}", self.id)))?;
        Ok(c)
    }

    fn from_node(node: &Node) -> NodeConfig {
        use serde_json::json;
        let params = match node.component {
            Component::KnnOD { k, tau } | Component::KnnMeanOD { k, tau } => {
                json!({"k": k, "tau": ser_real(tau)})
            }
            Component::VarianceFS { tau } => json!({ "tau": ser_real(tau) }),
            Component::CorrelationFS { tau_corr } => json!({ "tau_corr": ser_real(tau_corr) }),
            Component::KMeans {
                n_clusters,
                max_iter,
                seed,
            } => json!({"n_clusters": n_clusters, "max_iter": max_iter, "seed": seed}),
            Component::Dbscan { eps, min_pts } => json!({"eps": eps, "min_pts": min_pts}),
            _ => serde_json::Value::Null,
        };
        NodeConfig {
            id: node.id.clone(),
            kind: node.component.kind_name().to_string(),
            params,
        }
    }
}

/// Validated pipeline DAG with a fixed topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineGraph {
    nodes: Vec<Node>,
    /// Parents of each node, ordered by parent id.
    parents: Vec<Vec<usize>>,
    order: Vec<usize>,
    /// Whether a clustering node is an ancestor of each node.
    after_clustering: Vec<bool>,
}

impl PipelineGraph {
    /// Build and validate a graph from nodes and `(parent_id, child_id)` edges.
    pub fn new(nodes: Vec<Node>, edges: &[(String, String)]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::GraphInvalid("pipeline has no nodes".into()));
        }
        let mut index = BTreeMap::new();
        for (k, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), k).is_some() {
                return Err(Error::GraphInvalid(format!("duplicate node id `{}`", node.id)));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::GraphInvalid(format!("edge refers to unknown node `{id}`")))
        };
        let mut edge_set = BTreeSet::new();
        for (p, c) in edges {
            let (p, c) = (lookup(p)?, lookup(c)?);
            if p == c {
                return Err(Error::GraphInvalid(format!("self loop on `{}`", nodes[p].id)));
            }
            if !edge_set.insert((p, c)) {
                return Err(Error::GraphInvalid(format!(
                    "duplicate edge `{}` -> `{}`",
                    nodes[p].id, nodes[c].id
                )));
            }
        }
        let mut parents = vec![Vec::new(); nodes.len()];
        for &(p, c) in &edge_set {
            parents[c].push(p);
        }
        for ps in &mut parents {
            ps.sort_by(|&x, &y| nodes[x].id.cmp(&nodes[y].id));
        }
        let order = topological_order(&nodes, &parents)?;

        let roots: Vec<usize> = (0..nodes.len()).filter(|&k| parents[k].is_empty()).collect();
        if roots.len() != 1 {
            return Err(Error::GraphInvalid(format!(
                "expected exactly one root node, found {}",
                roots.len()
            )));
        }
        let mut has_child = vec![false; nodes.len()];
        for &(p, _) in &edge_set {
            has_child[p] = true;
        }
        let sinks = has_child.iter().filter(|&&h| !h).count();
        if sinks != 1 {
            return Err(Error::GraphInvalid(format!(
                "expected exactly one sink node, found {sinks}"
            )));
        }
        for (k, node) in nodes.iter().enumerate() {
            let np = parents[k].len();
            if node.component.is_aggregate() {
                if np < 2 {
                    return Err(Error::GraphInvalid(format!(
                        "aggregate node `{}` needs at least 2 parents, has {np}",
                        node.id
                    )));
                }
            } else if np > 1 {
                return Err(Error::GraphInvalid(format!(
                    "node `{}` has {np} parents; only aggregate nodes may have several",
                    node.id
                )));
            }
        }
        if nodes[roots[0]].component.is_aggregate() {
            return Err(Error::GraphInvalid("root node cannot be an aggregate".into()));
        }

        // min/max number of clustering nodes over root-to-node paths
        let mut min_c = vec![0usize; nodes.len()];
        let mut max_c = vec![0usize; nodes.len()];
        for &k in &order {
            let own = usize::from(nodes[k].component.is_clustering());
            let (lo, hi) = parents[k]
                .iter()
                .fold((usize::MAX, 0), |(lo, hi), &p| (lo.min(min_c[p]), hi.max(max_c[p])));
            let (lo, hi) = if parents[k].is_empty() { (0, 0) } else { (lo, hi) };
            min_c[k] = lo + own;
            max_c[k] = hi + own;
        }
        let sink = (0..nodes.len()).find(|&k| !has_child[k]).unwrap();
        if min_c[sink] != 1 || max_c[sink] != 1 {
            return Err(Error::GraphInvalid(
                "every root-to-sink path must contain exactly one clustering node".into(),
            ));
        }
        let after_clustering = (0..nodes.len())
            .map(|k| max_c[k] > usize::from(nodes[k].component.is_clustering()))
            .collect();

        Ok(PipelineGraph {
            nodes,
            parents,
            order,
            after_clustering,
        })
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        let nodes = cfg
            .nodes
            .iter()
            .map(|nc| {
                Ok(Node {
                    id: nc.id.clone(),
                    component: nc.component()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PipelineGraph::new(nodes, &cfg.edges)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("pipeline config: {e}")))?;
        PipelineGraph::from_config(&cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        PipelineGraph::from_json(&text)
    }

    /// A linear chain `c0 -> c1 -> ...` with ids `n0, n1, ...`.
    pub fn chain(components: Vec<Component>) -> Result<Self> {
        let nodes: Vec<Node> = components
            .into_iter()
            .enumerate()
            .map(|(k, component)| Node {
                id: format!("n{k}"),
                component,
            })
            .collect();
        let edges: Vec<(String, String)> = nodes
            .windows(2)
            .map(|w| (w[0].id.clone(), w[1].id.clone()))
            .collect();
        PipelineGraph::new(nodes, &edges)
    }

    pub fn to_config(&self) -> PipelineConfig {
        let mut edges = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                edges.push((self.nodes[p].id.clone(), self.nodes[c].id.clone()));
            }
        }
        edges.sort();
        PipelineConfig {
            nodes: self.nodes.iter().map(NodeConfig::from_node).collect(),
            edges,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_config()).expect("config serializes")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn parents(&self, k: usize) -> &[usize] {
        &self.parents[k]
    }

    /// Node indices in topological order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// The node whose output is the pipeline output.
    pub fn sink(&self) -> usize {
        *self.order.last().unwrap()
    }

    /// True for nodes with a clustering node upstream; outlier detection
    /// there runs within each cluster.
    pub fn after_clustering(&self, k: usize) -> bool {
        self.after_clustering[k]
    }

    /// Node ids in topological order.
    pub fn topological_ids(&self) -> Vec<&str> {
        self.order.iter().map(|&k| self.nodes[k].id.as_str()).collect()
    }
}

/// Kahn's algorithm with ties broken by smallest node id.
fn topological_order(nodes: &[Node], parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = nodes.len();
    let mut children = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for (c, ps) in parents.iter().enumerate() {
        indeg[c] = ps.len();
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut ready: BTreeSet<(&str, usize)> = (0..n)
        .filter(|&k| indeg[k] == 0)
        .map(|k| (nodes[k].id.as_str(), k))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(first) = ready.pop_first() {
        let k = first.1;
        order.push(k);
        for &c in &children[k] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert((nodes[c].id.as_str(), c));
            }
        }
    }
    if order.len() != n {
        let stuck: Vec<&str> = (0..n)
            .filter(|&k| indeg[k] > 0)
            .map(|k| nodes[k].id.as_str())
            .collect();
        return Err(Error::GraphInvalid(format!(
            "cycle detected among nodes {stuck:?}"
        )));
    }
    Ok(order)
}

/// Topological order of the node ids of `g`.
pub fn topological_sort(g: &PipelineGraph) -> Vec<String> {
    g.topological_ids().into_iter().map(str::to_string).collect()
}
