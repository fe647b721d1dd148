use evidesk_core::graphcore::{
    Direction, EdgeKey, EntityId, EntityKind, EvidenceGraph, GraphStats, Relation, MAX_HOPS,
};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Entities are addressed by kind and name; ids are internal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityRef {
    pub kind: EntityKind,
    pub name: String,
}

fn both() -> Direction {
    Direction::Both
}

fn default_hops() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphQuery {
    Neighbors {
        entity: EntityRef,
        #[serde(default)]
        relation: Option<Relation>,
        #[serde(default = "both")]
        direction: Direction,
    },
    CoOccurrence {
        kind_a: EntityKind,
        kind_b: EntityKind,
        #[serde(default)]
        limit: Option<usize>,
    },
    Path {
        from: EntityRef,
        to: EntityRef,
        #[serde(default = "default_hops")]
        max_hops: usize,
    },
    Stats {},
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySummary {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCount {
    pub a: EntitySummary,
    pub b: EntitySummary,
    pub studies: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathView {
    pub nodes: Vec<EntitySummary>,
    pub edges: Vec<EdgeKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GraphAnswer {
    Neighbors { entity: EntitySummary, neighbors: Vec<EntitySummary> },
    CoOccurrence { pairs: Vec<PairCount> },
    Path { paths: Vec<PathView> },
    Stats { stats: GraphStats },
}

fn summary(graph: &EvidenceGraph, id: EntityId) -> EntitySummary {
    let e = graph.entity(id).expect("query results reference live entities");
    EntitySummary {
        id,
        kind: e.kind,
        name: e.name.clone(),
    }
}

fn resolve(graph: &EvidenceGraph, r: &EntityRef) -> Result<EntityId, ServiceError> {
    graph.find(r.kind, &r.name).ok_or_else(|| ServiceError::NotFound {
        what: "entity",
        id: format!("{}:{}", r.kind, r.name),
    })
}

pub fn run_graph_query(graph: &EvidenceGraph, query: &GraphQuery) -> Result<GraphAnswer, ServiceError> {
    Ok(match query {
        GraphQuery::Neighbors {
            entity,
            relation,
            direction,
        } => {
            let id = resolve(graph, entity)?;
            GraphAnswer::Neighbors {
                entity: summary(graph, id),
                neighbors: graph
                    .neighbors(id, *relation, *direction)?
                    .into_iter()
                    .map(|n| summary(graph, n))
                    .collect(),
            }
        }
        GraphQuery::CoOccurrence { kind_a, kind_b, limit } => GraphAnswer::CoOccurrence {
            pairs: graph
                .co_occurrence(*kind_a, *kind_b)
                .into_iter()
                .take(limit.unwrap_or(usize::MAX))
                .map(|c| PairCount {
                    a: summary(graph, c.a),
                    b: summary(graph, c.b),
                    studies: c.studies,
                })
                .collect(),
        },
        GraphQuery::Path { from, to, max_hops } => {
            if *max_hops > MAX_HOPS {
                return Err(ServiceError::BadRequest(format!("max_hops is limited to {MAX_HOPS}")));
            }
            let (a, b) = (resolve(graph, from)?, resolve(graph, to)?);
            GraphAnswer::Path {
                paths: graph
                    .path_query(a, b, *max_hops)?
                    .into_iter()
                    .map(|p| PathView {
                        nodes: p.nodes.iter().map(|&n| summary(graph, n)).collect(),
                        edges: p.edges,
                    })
                    .collect(),
            }
        }
        GraphQuery::Stats {} => GraphAnswer::Stats { stats: graph.stats() },
    })
}
