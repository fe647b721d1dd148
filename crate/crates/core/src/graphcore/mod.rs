//! In-process property graph linking studies to interventions, outcomes, authors, venues,
//! topics and designs.

mod query;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{normalize_entity, StudyRecord};

pub use query::{CoOccurrence, Direction, GraphPath, MAX_HOPS};

pub type Properties = BTreeMap<String, Value>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge endpoint {0} does not exist")]
    UnknownEndpoint(EntityId),
    #[error("entity {0} does not exist")]
    UnknownEntity(EntityId),
    #[error("{relation} cannot link {from} to {to}")]
    InvalidRelation {
        relation: Relation,
        from: EntityKind,
        to: EntityKind,
    },
    #[error("entity name is empty")]
    EmptyName,
    #[error("max_hops {requested} exceeds the cap of {cap}")]
    HopLimit { requested: usize, cap: usize },
    #[error("malformed graph file at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Study,
    Intervention,
    Outcome,
    Author,
    Venue,
    Topic,
    Design,
}

impl EntityKind {
    pub const ALL: [EntityKind; 7] = [
        EntityKind::Study,
        EntityKind::Intervention,
        EntityKind::Outcome,
        EntityKind::Author,
        EntityKind::Venue,
        EntityKind::Topic,
        EntityKind::Design,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Study => "study",
            EntityKind::Intervention => "intervention",
            EntityKind::Outcome => "outcome",
            EntityKind::Author => "author",
            EntityKind::Venue => "venue",
            EntityKind::Topic => "topic",
            EntityKind::Design => "design",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Evaluates,
    Reports,
    AuthoredBy,
    PublishedIn,
    AssignedTopic,
    HasDesign,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Evaluates,
        Relation::Reports,
        Relation::AuthoredBy,
        Relation::PublishedIn,
        Relation::AssignedTopic,
        Relation::HasDesign,
    ];

    /// Every relation runs from a study to an entity of this kind.
    pub fn target_kind(self) -> EntityKind {
        match self {
            Relation::Evaluates => EntityKind::Intervention,
            Relation::Reports => EntityKind::Outcome,
            Relation::AuthoredBy => EntityKind::Author,
            Relation::PublishedIn => EntityKind::Venue,
            Relation::AssignedTopic => EntityKind::Topic,
            Relation::HasDesign => EntityKind::Design,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Evaluates => "evaluates",
            Relation::Reports => "reports",
            Relation::AuthoredBy => "authored_by",
            Relation::PublishedIn => "published_in",
            Relation::AssignedTopic => "assigned_topic",
            Relation::HasDesign => "has_design",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sequential id, never reused within a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntity {
    pub id: EntityId,
    pub kind: EntityKind,
    /// Display name as first seen.
    pub name: String,
    #[serde(default)]
    pub properties: Properties,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub from: EntityId,
    pub to: EntityId,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    #[serde(flatten)]
    pub key: EdgeKey,
    #[serde(default)]
    pub properties: Properties,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum GraphLine {
    Entity(GraphEntity),
    Edge(GraphEdge),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GraphStats {
    pub entities: BTreeMap<EntityKind, usize>,
    pub edges: BTreeMap<Relation, usize>,
}

#[derive(Debug, Clone, Default)]
pub struct EvidenceGraph {
    entities: BTreeMap<EntityId, GraphEntity>,
    names: HashMap<(EntityKind, String), EntityId>,
    edges: BTreeMap<EdgeKey, Properties>,
    outgoing: BTreeMap<EntityId, BTreeSet<EdgeKey>>,
    incoming: BTreeMap<EntityId, BTreeSet<EdgeKey>>,
    next_id: u64,
}

impl EvidenceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn entity(&self, id: EntityId) -> Option<&GraphEntity> {
        self.entities.get(&id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &GraphEntity> {
        self.entities.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &Properties)> {
        self.edges.iter()
    }

    pub fn find(&self, kind: EntityKind, name: &str) -> Option<EntityId> {
        self.names.get(&(kind, normalize_entity(name))).copied()
    }

    /// Returns the existing id for `(kind, normalized name)` or creates the entity. New
    /// properties overwrite same-named old ones.
    pub fn upsert_entity(&mut self, kind: EntityKind, name: &str, properties: Properties) -> Result<EntityId, GraphError> {
        let key = normalize_entity(name);
        if key.is_empty() {
            return Err(GraphError::EmptyName);
        }
        let id = match self.names.get(&(kind, key.clone())) {
            Some(&id) => id,
            None => {
                let id = EntityId(self.next_id);
                self.next_id += 1;
                self.names.insert((kind, key), id);
                self.entities.insert(
                    id,
                    GraphEntity {
                        id,
                        kind,
                        name: name.trim().to_string(),
                        properties: Properties::new(),
                    },
                );
                id
            }
        };
        self.entities
            .get_mut(&id)
            .expect("indexed entity")
            .properties
            .extend(properties);
        Ok(id)
    }

    pub fn upsert_edge(&mut self, from: EntityId, to: EntityId, relation: Relation) -> Result<EdgeKey, GraphError> {
        self.upsert_edge_with(from, to, relation, Properties::new())
    }

    pub fn upsert_edge_with(
        &mut self,
        from: EntityId,
        to: EntityId,
        relation: Relation,
        properties: Properties,
    ) -> Result<EdgeKey, GraphError> {
        let from_kind = self.entities.get(&from).ok_or(GraphError::UnknownEndpoint(from))?.kind;
        let to_kind = self.entities.get(&to).ok_or(GraphError::UnknownEndpoint(to))?.kind;
        if from_kind != EntityKind::Study || to_kind != relation.target_kind() {
            return Err(GraphError::InvalidRelation {
                relation,
                from: from_kind,
                to: to_kind,
            });
        }
        let key = EdgeKey { from, to, relation };
        self.edges.entry(key).or_default().extend(properties);
        self.outgoing.entry(from).or_default().insert(key);
        self.incoming.entry(to).or_default().insert(key);
        Ok(key)
    }

    pub fn remove_edge(&mut self, key: &EdgeKey) -> bool {
        if self.edges.remove(key).is_none() {
            return false;
        }
        if let Some(out) = self.outgoing.get_mut(&key.from) {
            out.remove(key);
        }
        if let Some(inc) = self.incoming.get_mut(&key.to) {
            inc.remove(key);
        }
        true
    }

    /// Deletes the entity together with every incident edge.
    pub fn remove_entity(&mut self, id: EntityId) -> Result<GraphEntity, GraphError> {
        let entity = self.entities.remove(&id).ok_or(GraphError::UnknownEntity(id))?;
        self.names.remove(&(entity.kind, normalize_entity(&entity.name)));
        let incident: Vec<EdgeKey> = self
            .outgoing
            .remove(&id)
            .into_iter()
            .chain(self.incoming.remove(&id))
            .flatten()
            .collect();
        for key in incident {
            self.remove_edge(&key);
        }
        Ok(entity)
    }

    /// Adds the study node and its listed interventions, outcomes, authors and venue.
    pub fn ingest_record(&mut self, record: &StudyRecord) -> Result<EntityId, GraphError> {
        let mut props = Properties::new();
        props.insert("title".into(), Value::String(record.title.clone()));
        if let Some(year) = record.year {
            props.insert("year".into(), Value::from(year));
        }
        let study = self.upsert_entity(EntityKind::Study, &record.id, props)?;
        let lists = [
            (Relation::Evaluates, record.interventions.as_deref().unwrap_or_default()),
            (Relation::Reports, record.outcomes.as_deref().unwrap_or_default()),
            (Relation::AuthoredBy, record.authors.as_slice()),
            (Relation::PublishedIn, record.venue.as_slice()),
        ];
        for (relation, names) in lists {
            for name in names.iter().filter(|n| !normalize_entity(n).is_empty()) {
                let target = self.upsert_entity(relation.target_kind(), name, Properties::new())?;
                self.upsert_edge(study, target, relation)?;
            }
        }
        Ok(study)
    }

    /// Points the study at a single entity of `relation`'s target kind, dropping older links.
    pub fn relink(&mut self, study: EntityId, relation: Relation, name: &str) -> Result<EdgeKey, GraphError> {
        let stale: Vec<EdgeKey> = self
            .outgoing
            .get(&study)
            .map(|s| s.iter().filter(|k| k.relation == relation).copied().collect())
            .unwrap_or_default();
        let target = self.upsert_entity(relation.target_kind(), name, Properties::new())?;
        for key in stale.iter().filter(|k| k.to != target) {
            self.remove_edge(key);
        }
        self.upsert_edge(study, target, relation)
    }

    pub fn stats(&self) -> GraphStats {
        let mut stats = GraphStats::default();
        for e in self.entities.values() {
            *stats.entities.entry(e.kind).or_default() += 1;
        }
        for key in self.edges.keys() {
            *stats.edges.entry(key.relation).or_default() += 1;
        }
        stats
    }

    /// One JSON object per line: all entities in id order, then all edges.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), GraphError> {
        for entity in self.entities.values() {
            serde_json::to_writer(&mut out, &GraphLine::Entity(entity.clone())).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        for (key, properties) in &self.edges {
            let edge = GraphEdge {
                key: *key,
                properties: properties.clone(),
            };
            serde_json::to_writer(&mut out, &GraphLine::Edge(edge)).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, GraphError> {
        let mut graph = Self::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |reason: String| GraphError::Corrupt { line: i + 1, reason };
            match serde_json::from_str::<GraphLine>(&line).map_err(|e| corrupt(e.to_string()))? {
                GraphLine::Entity(entity) => {
                    let key = (entity.kind, normalize_entity(&entity.name));
                    if key.1.is_empty() || graph.names.contains_key(&key) || graph.entities.contains_key(&entity.id) {
                        return Err(corrupt(format!("duplicate or unnamed entity {}", entity.id)));
                    }
                    graph.next_id = graph.next_id.max(entity.id.0 + 1);
                    graph.names.insert(key, entity.id);
                    graph.entities.insert(entity.id, entity);
                }
                GraphLine::Edge(edge) => {
                    let k = edge.key;
                    if graph.edges.contains_key(&k) {
                        return Err(corrupt(format!("duplicate edge {} -{}-> {}", k.from, k.relation, k.to)));
                    }
                    graph
                        .upsert_edge_with(k.from, k.to, k.relation, edge.properties)
                        .map_err(|e| corrupt(e.to_string()))?;
                }
            }
        }
        Ok(graph)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    pub(super) fn fixture() -> Vec<StudyRecord> {
        let interventions = [vec!["exercise"], vec!["diet"], vec!["exercise", "diet"], vec!["drug a"]];
        let outcomes = [vec!["mortality"], vec!["pain"], vec!["mortality", "pain"], vec!["quality of life"], vec![]];
        let venues = ["bmj", "lancet", "jama"];
        (0..20)
            .map(|i| {
                let mut r = StudyRecord::new(format!("s{i:02}"), format!("Study {i}"));
                let mut iv: Vec<String> = interventions[i % 4].iter().map(|s| s.to_string()).collect();
                if i >= 10 && i % 4 == 0 {
                    iv[0] = " Exercise ".into();
                }
                r.interventions = Some(iv);
                r.outcomes = Some(outcomes[i % 5].iter().map(|s| s.to_string()).collect());
                r.authors = vec![format!("author{}", i % 7)];
                if i < 5 {
                    r.authors.push("Shared Author".into());
                }
                r.venue = (i != 19).then(|| venues[i % 3].to_string());
                r
            })
            .collect()
    }

    #[test]
    fn upsert_is_idempotent() {
        let mut g = EvidenceGraph::new();
        let a = g.upsert_entity(EntityKind::Intervention, "exercise", Properties::new()).unwrap();
        let b = g.upsert_entity(EntityKind::Intervention, "  Exercise", Properties::new()).unwrap();
        assert_eq!(a, b);
        assert_eq!(g.entity_count(), 1);
        let s = g.upsert_entity(EntityKind::Study, "s1", Properties::new()).unwrap();
        g.upsert_edge(s, a, Relation::Evaluates).unwrap();
        g.upsert_edge(s, a, Relation::Evaluates).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn edge_to_missing_entity_fails() {
        let mut g = EvidenceGraph::new();
        let s = g.upsert_entity(EntityKind::Study, "s1", Properties::new()).unwrap();
        assert!(matches!(
            g.upsert_edge(s, EntityId(99), Relation::Evaluates),
            Err(GraphError::UnknownEndpoint(EntityId(99)))
        ));
    }

    #[test]
    fn relation_kinds_are_enforced() {
        let mut g = EvidenceGraph::new();
        let s = g.upsert_entity(EntityKind::Study, "s1", Properties::new()).unwrap();
        let o = g.upsert_entity(EntityKind::Outcome, "pain", Properties::new()).unwrap();
        assert!(matches!(g.upsert_edge(s, o, Relation::Evaluates), Err(GraphError::InvalidRelation { .. })));
        assert!(matches!(g.upsert_edge(o, s, Relation::Reports), Err(GraphError::InvalidRelation { .. })));
        assert!(matches!(g.upsert_entity(EntityKind::Author, "  ", Properties::new()), Err(GraphError::EmptyName)));
    }

    #[test]
    fn fixture_counts_match_hand_tally() {
        // Studies 20; interventions exercise, diet, drug a; outcomes mortality, pain, quality of life;
        // authors author0..author6 plus shared author; venues bmj, lancet, jama.
        // Edges: evaluates 5*(1+1+2+1)=25, reports 4*(1+1+2+1+0)=20, authored_by 20+5=25,
        // published_in 19.
        let mut g = EvidenceGraph::new();
        for r in fixture() {
            g.ingest_record(&r).unwrap();
        }
        assert_eq!(g.entity_count(), 37);
        assert_eq!(g.edge_count(), 89);
        let stats = g.stats();
        assert_eq!(stats.entities[&EntityKind::Study], 20);
        assert_eq!(stats.entities[&EntityKind::Author], 8);
        assert_eq!(stats.edges[&Relation::Evaluates], 25);
        assert_eq!(stats.edges[&Relation::PublishedIn], 19);

        // Set-based oracle over the raw fixture.
        let mut names: HashSet<(EntityKind, String)> = HashSet::new();
        let mut triples: HashSet<(String, Relation, String)> = HashSet::new();
        for r in fixture() {
            names.insert((EntityKind::Study, r.id.to_lowercase()));
            let mut add = |rel: Relation, n: &str| {
                let n = n.trim().to_lowercase();
                names.insert((rel.target_kind(), n.clone()));
                triples.insert((r.id.clone(), rel, n));
            };
            r.interventions.iter().flatten().for_each(|n| add(Relation::Evaluates, n));
            r.outcomes.iter().flatten().for_each(|n| add(Relation::Reports, n));
            r.authors.iter().for_each(|n| add(Relation::AuthoredBy, n));
            r.venue.iter().for_each(|n| add(Relation::PublishedIn, n));
        }
        assert_eq!(names.len(), g.entity_count());
        assert_eq!(triples.len(), g.edge_count());

        // Re-ingesting changes nothing.
        for r in fixture() {
            g.ingest_record(&r).unwrap();
        }
        assert_eq!((g.entity_count(), g.edge_count()), (37, 89));
    }

    #[test]
    fn removal_keeps_referential_integrity() {
        let mut g = EvidenceGraph::new();
        for r in fixture() {
            g.ingest_record(&r).unwrap();
        }
        let exercise = g.find(EntityKind::Intervention, "exercise").unwrap();
        g.remove_entity(exercise).unwrap();
        assert!(g.find(EntityKind::Intervention, "exercise").is_none());
        for (k, _) in g.edges() {
            assert!(g.entity(k.from).is_some() && g.entity(k.to).is_some());
        }
        // exercise appears in residues 0 and 2: 10 edges gone
        assert_eq!(g.edge_count(), 79);
        assert!(matches!(g.remove_entity(exercise), Err(GraphError::UnknownEntity(_))));
    }

    #[test]
    fn relink_replaces_topic() {
        let mut g = EvidenceGraph::new();
        let s = g.upsert_entity(EntityKind::Study, "s1", Properties::new()).unwrap();
        g.relink(s, Relation::AssignedTopic, "0_trial").unwrap();
        g.relink(s, Relation::AssignedTopic, "1_size").unwrap();
        g.relink(s, Relation::AssignedTopic, "1_size").unwrap();
        let topics: Vec<_> = g.edges().filter(|(k, _)| k.relation == Relation::AssignedTopic).collect();
        assert_eq!(topics.len(), 1);
        assert_eq!(g.entity(topics[0].0.to).unwrap().name, "1_size");
    }

    #[test]
    fn jsonl_round_trip() {
        let mut g = EvidenceGraph::new();
        for r in fixture() {
            g.ingest_record(&r).unwrap();
        }
        let mut buf = Vec::new();
        g.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 37 + 89);
        let back = EvidenceGraph::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.entities().collect::<Vec<_>>(), g.entities().collect::<Vec<_>>());
        assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        let mut again = back.clone();
        let fresh = again.upsert_entity(EntityKind::Venue, "nejm", Properties::new()).unwrap();
        assert_eq!(fresh, EntityId(37));

        let dangling = r#"{"type":"edge","from":0,"to":5,"relation":"evaluates"}"#;
        assert!(matches!(
            EvidenceGraph::read_jsonl(dangling.as_bytes()),
            Err(GraphError::Corrupt { line: 1, .. })
        ));
    }
}
