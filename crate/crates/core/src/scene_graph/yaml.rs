use serde::{Deserialize, Serialize};

use super::{GraphError, NothingNode, ObjectNode, RoomNode, SceneGraph, StructureNode};

#[derive(Serialize)]
struct DocOut<'a> {
    rooms: Vec<&'a RoomNode>,
    objects: Vec<&'a ObjectNode>,
    nothings: Vec<&'a NothingNode>,
    structures: Vec<&'a StructureNode>,
}

#[derive(Deserialize)]
struct DocIn {
    rooms: Vec<RoomNode>,
    objects: Vec<ObjectNode>,
    nothings: Vec<NothingNode>,
    structures: Vec<StructureNode>,
}

impl SceneGraph {
    /// Deterministic YAML document: four top-level lists, each sorted by id.
    pub fn to_yaml(&self) -> String {
        let doc = DocOut {
            rooms: self.rooms.values().collect(),
            objects: self.objects.values().collect(),
            nothings: self.nothings.values().collect(),
            structures: self.structures.values().collect(),
        };
        serde_yaml::to_string(&doc).expect("scene graph serialization is infallible")
    }

    /// Parse a document and check every invariant. Malformed YAML yields
    /// [`GraphError::Parse`]; well-formed YAML describing an invalid graph
    /// yields the first invariant violation found.
    pub fn from_yaml(text: &str) -> Result<Self, GraphError> {
        let doc: DocIn = serde_yaml::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        let mut g = SceneGraph::new();
        let mut seen = std::collections::BTreeSet::new();
        let ids = doc
            .rooms
            .iter()
            .map(|n| n.id)
            .chain(doc.objects.iter().map(|n| n.id))
            .chain(doc.nothings.iter().map(|n| n.id))
            .chain(doc.structures.iter().map(|n| n.id));
        for id in ids {
            if !seen.insert(id) {
                return Err(GraphError::InvariantViolation {
                    node: id,
                    field: "id",
                    reason: "duplicate id".into(),
                });
            }
        }
        // Rooms first so that parent references resolve.
        for r in doc.rooms {
            g.upsert(r)?;
        }
        for o in doc.objects {
            g.upsert(o)?;
        }
        for n in doc.nothings {
            g.upsert(n)?;
        }
        for s in doc.structures {
            g.upsert(s)?;
        }
        g.revision = 0;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{object, room};
    use super::super::*;

    #[test]
    fn empty_graph_has_four_empty_lists() {
        let text = SceneGraph::new().to_yaml();
        assert_eq!(text, "rooms: []\nobjects: []\nnothings: []\nstructures: []\n");
        assert_eq!(SceneGraph::from_yaml(&text).unwrap(), SceneGraph::new());
    }

    #[test]
    fn object_carries_parent() {
        let mut g = SceneGraph::new();
        let r = room(&mut g, "kitchen", 0.0, 0.0, 4.0, 4.0);
        object(&mut g, "fridge", 1.0, 1.0, Some(r));
        let text = g.to_yaml();
        assert!(text.contains(&format!("parent_room: {}", r.0)), "{text}");
        let back = SceneGraph::from_yaml(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_yaml(), text);
    }

    #[test]
    fn missing_parent_is_invariant_violation() {
        let text = "rooms: []\nobjects:\n- id: 3\n  label: chair\n  center: [0.0, 0.0, 0.4]\n  half_extents: [0.2, 0.2, 0.4]\n  yaw: 0.0\n  parent_room: 7\n  provenance: observed\nnothings: []\nstructures: []\n";
        assert!(matches!(
            SceneGraph::from_yaml(text),
            Err(GraphError::InvariantViolation { field: "parent_room", .. })
        ));
    }

    #[test]
    fn truncated_is_parse_error() {
        let mut g = SceneGraph::new();
        let r = room(&mut g, "kitchen", 0.0, 0.0, 4.0, 4.0);
        object(&mut g, "fridge", 1.0, 1.0, Some(r));
        let text = g.to_yaml();
        let cut = &text[..text.len() / 2];
        assert!(matches!(SceneGraph::from_yaml(cut), Err(GraphError::Parse(_))));
        assert!(matches!(SceneGraph::from_yaml("rooms: [\n"), Err(GraphError::Parse(_))));
    }

    #[test]
    fn next_id_after_load_skips_existing() {
        let mut g = SceneGraph::new();
        object(&mut g, "chair", 0.0, 0.0, None);
        let id = object(&mut g, "chair", 3.0, 0.0, None);
        let mut back = SceneGraph::from_yaml(&g.to_yaml()).unwrap();
        assert!(back.alloc_id() > id);
    }
}
