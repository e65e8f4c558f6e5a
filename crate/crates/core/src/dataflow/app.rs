use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::DataflowError;
use crate::overlay::{NodeId, Overlay};
use crate::simkernel::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Source,
    Inner,
    Sink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub id: String,
    pub kind: OpKind,
    #[serde(default)]
    pub stateful: bool,
    #[serde(default = "one")]
    pub parallelism: u32,
}

fn one() -> u32 {
    1
}

/// Application DAG. Operator order is declaration order; it breaks ties in
/// the topological order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppTopology {
    pub app_id: String,
    pub operators: Vec<OperatorSpec>,
    pub edges: Vec<(String, String)>,
}

impl AppTopology {
    pub fn validate(&self) -> Result<(), DataflowError> {
        let bad = |msg: String| Err(DataflowError::InvalidApp(format!("{}: {msg}", self.app_id)));
        let mut index = HashMap::new();
        for (i, op) in self.operators.iter().enumerate() {
            if index.insert(op.id.as_str(), i).is_some() {
                return bad(format!("duplicate operator {:?}", op.id));
            }
            if op.parallelism == 0 {
                return bad(format!("operator {:?} has zero parallelism", op.id));
            }
        }
        let mut seen = BTreeSet::new();
        for (a, b) in &self.edges {
            let (Some(&ia), Some(&ib)) = (index.get(a.as_str()), index.get(b.as_str())) else {
                return bad(format!("edge {a:?}->{b:?} references an unknown operator"));
            };
            if ia == ib {
                return bad(format!("self-loop on {a:?}"));
            }
            if !seen.insert((ia, ib)) {
                return bad(format!("duplicate edge {a:?}->{b:?}"));
            }
            if self.operators[ib].kind == OpKind::Source {
                return bad(format!("source {b:?} has an in-edge"));
            }
            if self.operators[ia].kind == OpKind::Sink {
                return bad(format!("sink {a:?} has an out-edge"));
            }
        }
        if !self.operators.iter().any(|o| o.kind == OpKind::Source) {
            return bad("no source operator".into());
        }
        if !self.operators.iter().any(|o| o.kind == OpKind::Sink) {
            return bad("no sink operator".into());
        }
        if self.topo_order_unchecked().len() != self.operators.len() {
            return bad("operator graph has a cycle".into());
        }
        Ok(())
    }

    /// Operator indices in topological order (Kahn, lowest index first).
    pub fn topo_order(&self) -> Result<Vec<usize>, DataflowError> {
        self.validate()?;
        Ok(self.topo_order_unchecked())
    }

    fn topo_order_unchecked(&self) -> Vec<usize> {
        let index: HashMap<&str, usize> = self
            .operators
            .iter()
            .enumerate()
            .map(|(i, o)| (o.id.as_str(), i))
            .collect();
        let n = self.operators.len();
        let mut indeg = vec![0usize; n];
        let mut out = vec![Vec::new(); n];
        for (a, b) in &self.edges {
            if let (Some(&ia), Some(&ib)) = (index.get(a.as_str()), index.get(b.as_str())) {
                indeg[ib] += 1;
                out[ia].push(ib);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &out[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        order
    }

    pub fn operator(&self, id: &str) -> Option<&OperatorSpec> {
        self.operators.iter().find(|o| o.id == id)
    }

    pub fn instance_count(&self) -> usize {
        self.operators.iter().map(|o| o.parallelism as usize).sum()
    }
}

/// JSON application document; bindings name topology nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppDocument {
    pub app_id: String,
    pub operators: Vec<OperatorSpec>,
    pub edges: Vec<(String, String)>,
    pub source_bindings: BTreeMap<String, String>,
    pub sink_bindings: BTreeMap<String, String>,
}

/// An application together with the nodes its sources and sinks are pinned to.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundApp {
    pub app: AppTopology,
    pub sources: BTreeMap<String, NodeId>,
    pub sinks: BTreeMap<String, NodeId>,
}

impl AppDocument {
    pub fn from_json(text: &str) -> Result<Self, DataflowError> {
        serde_json::from_str(text).map_err(|e| DataflowError::InvalidApp(e.to_string()))
    }

    pub fn resolve(&self, overlay: &Overlay) -> Result<BoundApp, DataflowError> {
        let lookup = |name: &String| {
            overlay
                .id_of(name)
                .ok_or_else(|| DataflowError::UnknownBinding(name.clone()))
        };
        let sources = self
            .source_bindings
            .iter()
            .map(|(op, n)| Ok((op.clone(), lookup(n)?)))
            .collect::<Result<_, DataflowError>>()?;
        let sinks = self
            .sink_bindings
            .iter()
            .map(|(op, n)| Ok((op.clone(), lookup(n)?)))
            .collect::<Result<_, DataflowError>>()?;
        Ok(BoundApp {
            app: AppTopology {
                app_id: self.app_id.clone(),
                operators: self.operators.clone(),
                edges: self.edges.clone(),
            },
            sources,
            sinks,
        })
    }
}

/// Synthetic layered DAG with `ops` operators (one or two sources, one sink),
/// bound to nodes drawn uniformly from `nodes`.
pub fn synthetic_app(app_id: &str, ops: usize, nodes: &[NodeId], rng: &mut SimRng) -> BoundApp {
    let ops = ops.max(3);
    let n_src = if ops >= 6 { 1 + rng.below(2) } else { 1 };
    let n_inner = ops - n_src - 1;
    let mut operators = Vec::with_capacity(ops);
    for i in 0..n_src {
        operators.push(OperatorSpec {
            id: format!("src{i}"),
            kind: OpKind::Source,
            stateful: false,
            parallelism: 1,
        });
    }
    for i in 0..n_inner {
        operators.push(OperatorSpec {
            id: format!("op{i}"),
            kind: OpKind::Inner,
            stateful: rng.bernoulli(0.3).expect("constant probability"),
            parallelism: 1,
        });
    }
    operators.push(OperatorSpec {
        id: "sink".into(),
        kind: OpKind::Sink,
        stateful: false,
        parallelism: 1,
    });

    // Inner operators form a chain with occasional skip edges; every source
    // feeds the head of the chain.
    let mut edges = Vec::new();
    let head = if n_inner > 0 {
        "op0".to_string()
    } else {
        "sink".to_string()
    };
    for i in 0..n_src {
        edges.push((format!("src{i}"), head.clone()));
    }
    for i in 1..n_inner {
        edges.push((format!("op{}", i - 1), format!("op{i}")));
        if i >= 2 && rng.bernoulli(0.2).expect("constant probability") {
            edges.push((format!("op{}", i - 2), format!("op{i}")));
        }
    }
    if n_inner > 0 {
        edges.push((format!("op{}", n_inner - 1), "sink".into()));
    }

    let sources = (0..n_src)
        .map(|i| (format!("src{i}"), nodes[rng.below(nodes.len())]))
        .collect();
    let sinks = BTreeMap::from([("sink".to_string(), nodes[rng.below(nodes.len())])]);
    BoundApp {
        app: AppTopology {
            app_id: app_id.to_string(),
            operators,
            edges,
        },
        sources,
        sinks,
    }
}
