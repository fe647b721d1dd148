use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EdgeKey, EntityId, EntityKind, EvidenceGraph, GraphError, Relation};

pub const MAX_HOPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Outgoing,
    Incoming,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoOccurrence {
    pub a: EntityId,
    pub b: EntityId,
    pub studies: usize,
}

/// Simple path: `nodes.len() == edges.len() + 1`, no repeated node. Edges may be walked against
/// their direction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphPath {
    pub nodes: Vec<EntityId>,
    pub edges: Vec<EdgeKey>,
}

impl GraphPath {
    pub fn hops(&self) -> usize {
        self.edges.len()
    }
}

impl EvidenceGraph {
    fn require(&self, id: EntityId) -> Result<(), GraphError> {
        self.entities.contains_key(&id).then_some(()).ok_or(GraphError::UnknownEntity(id))
    }

    fn incident(&self, id: EntityId, direction: Direction) -> impl Iterator<Item = &EdgeKey> {
        let out = matches!(direction, Direction::Outgoing | Direction::Both).then(|| self.outgoing.get(&id));
        let inc = matches!(direction, Direction::Incoming | Direction::Both).then(|| self.incoming.get(&id));
        out.flatten().into_iter().chain(inc.flatten()).flatten()
    }

    /// Adjacent entities over edges of `relation` (any relation when `None`), sorted by id.
    pub fn neighbors(
        &self,
        id: EntityId,
        relation: Option<Relation>,
        direction: Direction,
    ) -> Result<Vec<EntityId>, GraphError> {
        self.require(id)?;
        let found: BTreeSet<EntityId> = self
            .incident(id, direction)
            .filter(|k| relation.is_none_or(|r| k.relation == r))
            .map(|k| if k.from == id { k.to } else { k.from })
            .collect();
        Ok(found.into_iter().collect())
    }

    /// Pairs of `kind_a` and `kind_b` entities linked to a common study, with the number of such
    /// studies. Same-kind pairs are reported once with `a < b`. Sorted by count descending, then ids.
    pub fn co_occurrence(&self, kind_a: EntityKind, kind_b: EntityKind) -> Vec<CoOccurrence> {
        let mut counts: BTreeMap<(EntityId, EntityId), usize> = BTreeMap::new();
        for study in self.entities.values().filter(|e| e.kind == EntityKind::Study) {
            let linked = |kind: EntityKind| -> BTreeSet<EntityId> {
                self.incident(study.id, Direction::Outgoing)
                    .map(|k| k.to)
                    .filter(|t| self.entities[t].kind == kind)
                    .collect()
            };
            let (side_a, side_b) = (linked(kind_a), linked(kind_b));
            for &a in &side_a {
                for &b in &side_b {
                    let keep = if kind_a == kind_b { a < b } else { a != b };
                    if keep {
                        *counts.entry((a, b)).or_default() += 1;
                    }
                }
            }
        }
        let mut pairs: Vec<CoOccurrence> = counts
            .into_iter()
            .map(|((a, b), studies)| CoOccurrence { a, b, studies })
            .collect();
        pairs.sort_by(|x, y| y.studies.cmp(&x.studies).then((x.a, x.b).cmp(&(y.a, y.b))));
        pairs
    }

    /// All simple paths from `from` to `to` of at most `max_hops` edges, shortest first and then
    /// in lexicographic node/edge order.
    pub fn path_query(&self, from: EntityId, to: EntityId, max_hops: usize) -> Result<Vec<GraphPath>, GraphError> {
        if max_hops > MAX_HOPS {
            return Err(GraphError::HopLimit {
                requested: max_hops,
                cap: MAX_HOPS,
            });
        }
        self.require(from)?;
        self.require(to)?;
        let mut found = BTreeSet::new();
        if from != to {
            let mut nodes = vec![from];
            let mut edges = Vec::new();
            self.walk(to, max_hops, &mut nodes, &mut edges, &mut found);
        }
        let mut paths: Vec<GraphPath> = found.into_iter().collect();
        paths.sort_by(|a, b| a.hops().cmp(&b.hops()).then_with(|| a.cmp(b)));
        Ok(paths)
    }

    fn walk(
        &self,
        target: EntityId,
        budget: usize,
        nodes: &mut Vec<EntityId>,
        edges: &mut Vec<EdgeKey>,
        found: &mut BTreeSet<GraphPath>,
    ) {
        let here = *nodes.last().expect("path has a start");
        if here == target {
            found.insert(GraphPath {
                nodes: nodes.clone(),
                edges: edges.clone(),
            });
            return;
        }
        if budget == 0 {
            return;
        }
        let steps: Vec<EdgeKey> = self.incident(here, Direction::Both).copied().collect();
        for key in steps {
            let next = if key.from == here { key.to } else { key.from };
            if nodes.contains(&next) {
                continue;
            }
            nodes.push(next);
            edges.push(key);
            self.walk(target, budget - 1, nodes, edges, found);
            nodes.pop();
            edges.pop();
        }
    }
}
