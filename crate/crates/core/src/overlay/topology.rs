use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::OverlayError;
use crate::simkernel::SimRng;

/// One physical edge node as read from a topology CSV
/// (`node_name,zone_id,capacity,x,y`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    #[serde(rename = "node_name")]
    pub name: String,
    #[serde(rename = "zone_id")]
    pub zone: u32,
    pub capacity: f64,
    pub x: f64,
    pub y: f64,
}

impl NodeSpec {
    pub fn distance(&self, other: &NodeSpec) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Underlay latency model: every pair of nodes is connected and the
/// round-trip time grows linearly with Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RttModel {
    pub base_ms: f64,
    pub ms_per_unit: f64,
}

impl Default for RttModel {
    fn default() -> Self {
        Self {
            base_ms: 1.0,
            ms_per_unit: 0.2,
        }
    }
}

impl RttModel {
    pub fn rtt(&self, a: &NodeSpec, b: &NodeSpec) -> f64 {
        if a.name == b.name {
            0.0
        } else {
            self.base_ms + self.ms_per_unit * a.distance(b)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeTopology {
    pub nodes: Vec<NodeSpec>,
    pub rtt: RttModel,
}

impl EdgeTopology {
    pub fn new(nodes: Vec<NodeSpec>) -> Self {
        Self {
            nodes,
            rtt: RttModel::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `nodes` nodes spread over `zones` square zones tiling a 100x100 area.
    /// Zone membership is round-robin; capacities are drawn from {1, 2, 4, 8}.
    pub fn generate(nodes: usize, zones: u32, rng: &mut SimRng) -> Self {
        let zones = zones.max(1);
        let cols = (zones as f64).sqrt().ceil() as u32;
        let rows = zones.div_ceil(cols);
        let (zw, zh) = (100.0 / cols as f64, 100.0 / rows as f64);
        let specs = (0..nodes)
            .map(|i| {
                let zone = i as u32 % zones;
                let (zx, zy) = ((zone % cols) as f64 * zw, (zone / cols) as f64 * zh);
                NodeSpec {
                    name: format!("node-{i:05}"),
                    zone,
                    capacity: [1.0, 2.0, 4.0, 8.0][rng.below(4)],
                    x: zx + rng.unit() * zw,
                    y: zy + rng.unit() * zh,
                }
            })
            .collect();
        Self::new(specs)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, OverlayError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut nodes = Vec::new();
        for row in rdr.deserialize() {
            let spec: NodeSpec = row.map_err(|e| OverlayError::Input(e.to_string()))?;
            if !spec.capacity.is_finite() || spec.capacity <= 0.0 {
                return Err(OverlayError::Input(format!(
                    "node {}: capacity must be positive",
                    spec.name
                )));
            }
            nodes.push(spec);
        }
        Ok(Self::new(nodes))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), OverlayError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for n in &self.nodes {
            w.serialize(n)
                .map_err(|e| OverlayError::Input(e.to_string()))?;
        }
        w.flush().map_err(|e| OverlayError::Input(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut rng = SimRng::seed_from(4);
        let topo = EdgeTopology::generate(30, 4, &mut rng);
        let mut buf = Vec::new();
        topo.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("node_name,zone_id,capacity,x,y\n"));
        let back = EdgeTopology::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.nodes, topo.nodes);
    }

    #[test]
    fn rejects_bad_capacity() {
        let csv = "node_name,zone_id,capacity,x,y\na,0,0,1,1\n";
        assert!(EdgeTopology::read_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn generated_nodes_stay_inside_their_zone() {
        let mut rng = SimRng::seed_from(5);
        let topo = EdgeTopology::generate(400, 20, &mut rng);
        for n in &topo.nodes {
            let col = (n.x / 20.0).floor() as u32;
            let row = (n.y / 25.0).floor() as u32;
            assert_eq!(row * 5 + col, n.zone, "{n:?}");
        }
    }
}
