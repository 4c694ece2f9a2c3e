//! Static deployment and unit-disk connectivity.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sensor node identifier. The sink is always node 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u16);

impl NodeId {
    pub const SINK: NodeId = NodeId(0);
    /// Link-layer broadcast address.
    pub const BROADCAST: NodeId = NodeId(0xFFFF);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Planar position in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub width: f64,
    pub height: f64,
}

impl Field {
    pub fn contains(&self, loc: &Location) -> bool {
        (0.0..=self.width).contains(&loc.x) && (0.0..=self.height).contains(&loc.y)
    }

    pub fn clamp(&self, loc: Location) -> Location {
        Location::new(loc.x.clamp(0.0, self.width), loc.y.clamp(0.0, self.height))
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {id} at ({x}, {y}) lies outside the {w} x {h} field")]
    OutOfField {
        id: NodeId,
        x: f64,
        y: f64,
        w: f64,
        h: f64,
    },
    #[error("field dimensions and radio range must be positive")]
    BadDimensions,
    #[error("topology needs at least one node")]
    Empty,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Node positions plus the symmetric neighbour relation they induce.
#[derive(Debug, Clone)]
pub struct Topology {
    positions: Vec<Location>,
    radio_range: f64,
    field: Field,
    adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    pub fn new(
        positions: Vec<Location>,
        radio_range: f64,
        field: Field,
    ) -> Result<Self, TopologyError> {
        if !(field.width > 0.0 && field.height > 0.0 && radio_range > 0.0) {
            return Err(TopologyError::BadDimensions);
        }
        if positions.is_empty() {
            return Err(TopologyError::Empty);
        }
        for (i, p) in positions.iter().enumerate() {
            if !field.contains(p) {
                return Err(TopologyError::OutOfField {
                    id: NodeId(i as u16),
                    x: p.x,
                    y: p.y,
                    w: field.width,
                    h: field.height,
                });
            }
        }
        let mut topo = Topology {
            adjacency: vec![Vec::new(); positions.len()],
            positions,
            radio_range,
            field,
        };
        topo.rebuild_adjacency();
        Ok(topo)
    }

    /// Places `n` nodes independently and uniformly over the field.
    pub fn place_uniform<R: Rng + ?Sized>(
        n: usize,
        field: Field,
        radio_range: f64,
        rng: &mut R,
    ) -> Result<Self, TopologyError> {
        if !(field.width > 0.0 && field.height > 0.0) {
            return Err(TopologyError::BadDimensions);
        }
        let positions = (0..n)
            .map(|_| {
                Location::new(
                    rng.random::<f64>() * field.width,
                    rng.random::<f64>() * field.height,
                )
            })
            .collect();
        Topology::new(positions, radio_range, field)
    }

    fn rebuild_adjacency(&mut self) {
        let n = self.positions.len();
        for list in &mut self.adjacency {
            list.clear();
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.in_range(i, j) {
                    self.adjacency[i].push(NodeId(j as u16));
                    self.adjacency[j].push(NodeId(i as u16));
                }
            }
        }
        for list in &mut self.adjacency {
            list.sort_unstable();
        }
    }

    fn in_range(&self, i: usize, j: usize) -> bool {
        // Closed boundary: exactly radio_range apart counts as connected.
        self.positions[i].distance(&self.positions[j]) <= self.radio_range
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn radio_range(&self) -> f64 {
        self.radio_range
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn position(&self, id: NodeId) -> Result<Location, TopologyError> {
        self.positions
            .get(id.index())
            .copied()
            .ok_or(TopologyError::UnknownNode(id))
    }

    pub fn positions(&self) -> &[Location] {
        &self.positions
    }

    /// Sorted neighbour list of `id`.
    pub fn neighbors(&self, id: NodeId) -> Result<&[NodeId], TopologyError> {
        self.adjacency
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or(TopologyError::UnknownNode(id))
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency
            .get(a.index())
            .is_some_and(|l| l.binary_search(&b).is_ok())
    }

    pub fn mean_degree(&self) -> f64 {
        let total: usize = self.adjacency.iter().map(Vec::len).sum();
        total as f64 / self.len() as f64
    }

    /// Physically moves a node (clamped to the field) and refreshes its links.
    pub fn relocate(&mut self, id: NodeId, to: Location) -> Result<(), TopologyError> {
        let idx = id.index();
        if idx >= self.positions.len() {
            return Err(TopologyError::UnknownNode(id));
        }
        self.positions[idx] = self.field.clamp(to);
        for list in &mut self.adjacency {
            list.retain(|&n| n != id);
        }
        self.adjacency[idx].clear();
        for j in 0..self.positions.len() {
            if j != idx && self.in_range(idx, j) {
                self.adjacency[idx].push(NodeId(j as u16));
                let list = &mut self.adjacency[j];
                let pos = list.binary_search(&id).unwrap_err();
                list.insert(pos, id);
            }
        }
        Ok(())
    }

    /// Text dump, one `node_id,x,y` line per node.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.positions.iter().enumerate() {
            out.push_str(&format!("{i},{},{}\n", p.x, p.y));
        }
        out
    }

    /// Parses the [`Topology::dump`] format. Node ids must be dense and in order.
    pub fn load(text: &str, radio_range: f64, field: Field) -> Result<Self, TopologyError> {
        let mut positions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: &str| TopologyError::Parse {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(parse_err("expected node_id,x,y"));
            }
            let id: usize = parts[0].parse().map_err(|_| parse_err("bad node id"))?;
            if id != positions.len() {
                return Err(parse_err("node ids must start at 0 and be consecutive"));
            }
            let x: f64 = parts[1].parse().map_err(|_| parse_err("bad x"))?;
            let y: f64 = parts[2].parse().map_err(|_| parse_err("bad y"))?;
            positions.push(Location::new(x, y));
        }
        Topology::new(positions, radio_range, field)
    }
}

/// Per-frame loss and collision parameters of the shared medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModel {
    /// Independent loss probability per frame per receiver.
    pub loss_prob: f64,
    /// Extra loss applied only to acknowledgment frames.
    pub ack_loss_prob: f64,
    /// Frames starting closer together than this at a receiver destroy each
    /// other. Zero disables collisions (ideal collision-avoidance MAC).
    pub collision_window: u64,
    pub bandwidth_bps: u64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            loss_prob: 0.0,
            ack_loss_prob: 0.0,
            collision_window: 24,
            bandwidth_bps: 10_000,
        }
    }
}

impl ChannelModel {
    pub fn lossless() -> Self {
        ChannelModel {
            collision_window: 0,
            ..ChannelModel::default()
        }
    }

    /// Airtime of a frame of `bytes` bytes, rounded up to whole ticks.
    pub fn airtime(&self, bytes: usize) -> u64 {
        let bits = bytes as u64 * 8 * 1000;
        bits.div_ceil(self.bandwidth_bps.max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{RandomStream, StreamId};

    fn field(w: f64, h: f64) -> Field {
        Field {
            width: w,
            height: h,
        }
    }

    fn line(xs: &[f64], range: f64) -> Topology {
        let pos = xs.iter().map(|&x| Location::new(x, 0.0)).collect();
        Topology::new(pos, range, field(1000.0, 10.0)).unwrap()
    }

    #[test]
    fn singleton_has_no_neighbors() {
        let mut rng = RandomStream::derive(1, StreamId::Subsystem("t"));
        let t = Topology::place_uniform(1, field(10.0, 10.0), 1e6, &mut rng).unwrap();
        assert!(t.neighbors(NodeId(0)).unwrap().is_empty());
    }

    #[test]
    fn boundary_distance_is_connected() {
        let t = line(&[0.0, 50.0], 50.0);
        assert_eq!(t.neighbors(NodeId(0)).unwrap(), &[NodeId(1)]);
        let t = line(&[0.0, 50.0 + 1e-9], 50.0);
        assert!(t.neighbors(NodeId(0)).unwrap().is_empty());
    }

    #[test]
    fn unknown_node_lookup_fails() {
        let t = line(&[0.0, 1.0], 5.0);
        assert_eq!(
            t.neighbors(NodeId(9)),
            Err(TopologyError::UnknownNode(NodeId(9)))
        );
    }

    #[test]
    fn placement_is_deterministic_per_stream() {
        let id = StreamId::Subsystem("placement");
        let a = Topology::place_uniform(
            20,
            field(100.0, 100.0),
            30.0,
            &mut RandomStream::derive(5, id),
        )
        .unwrap();
        let b = Topology::place_uniform(
            20,
            field(100.0, 100.0),
            30.0,
            &mut RandomStream::derive(5, id),
        )
        .unwrap();
        assert_eq!(a.positions(), b.positions());
    }

    #[test]
    fn random_topology_is_symmetric() {
        let mut rng = RandomStream::derive(3, StreamId::Subsystem("placement"));
        let t = Topology::place_uniform(100, field(200.0, 200.0), 40.0, &mut rng).unwrap();
        for i in 0..100u16 {
            for j in 0..100u16 {
                let ij = t.neighbors(NodeId(i)).unwrap().contains(&NodeId(j));
                let ji = t.neighbors(NodeId(j)).unwrap().contains(&NodeId(i));
                assert_eq!(ij, ji);
                let d = t
                    .position(NodeId(i))
                    .unwrap()
                    .distance(&t.position(NodeId(j)).unwrap());
                assert_eq!(ij, i != j && d <= 40.0);
            }
        }
    }

    #[test]
    fn mean_degree_matches_disk_expectation() {
        // Expected degree without edge effects is (n-1) * pi r^2 / A; the
        // border loses part of each disk, so the empirical mean sits below
        // it. Averaged over 20 seeds the shortfall stays under 15%.
        let (n, w, r) = (1000usize, 500.0, 50.0);
        let expected = (n - 1) as f64 * std::f64::consts::PI * r * r / (w * w);
        let mut total = 0.0;
        for seed in 0..20 {
            let mut rng = RandomStream::derive(seed, StreamId::Subsystem("placement"));
            total += Topology::place_uniform(n, field(w, w), r, &mut rng)
                .unwrap()
                .mean_degree();
        }
        let mean = total / 20.0;
        assert!(
            (mean - expected).abs() / expected < 0.15,
            "mean {mean} expected {expected}"
        );
    }

    #[test]
    fn relocation_refreshes_links_symmetrically() {
        let mut t = line(&[0.0, 30.0, 60.0], 30.0);
        t.relocate(NodeId(2), Location::new(100.0, 0.0)).unwrap();
        assert!(t.neighbors(NodeId(2)).unwrap().is_empty());
        assert_eq!(t.neighbors(NodeId(1)).unwrap(), &[NodeId(0)]);
        t.relocate(NodeId(2), Location::new(15.0, 0.0)).unwrap();
        assert_eq!(t.neighbors(NodeId(2)).unwrap(), &[NodeId(0), NodeId(1)]);
        assert!(t.are_neighbors(NodeId(0), NodeId(2)));
    }

    #[test]
    fn dump_and_load_agree() {
        let mut rng = RandomStream::derive(8, StreamId::Subsystem("placement"));
        let t = Topology::place_uniform(15, field(80.0, 60.0), 25.0, &mut rng).unwrap();
        let back = Topology::load(&t.dump(), 25.0, field(80.0, 60.0)).unwrap();
        assert_eq!(t.positions(), back.positions());
    }

    #[test]
    fn load_rejects_gaps_and_garbage() {
        let f = field(10.0, 10.0);
        assert!(matches!(
            Topology::load("0,1,1\n2,3,3\n", 5.0, f),
            Err(TopologyError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Topology::load("0,1\n", 5.0, f),
            Err(TopologyError::Parse { .. })
        ));
        assert!(matches!(
            Topology::load("0,11,1\n", 5.0, f),
            Err(TopologyError::OutOfField { .. })
        ));
    }

    #[test]
    fn full_packet_airtime_at_10kbps_is_24ms() {
        assert_eq!(ChannelModel::default().airtime(30), 24);
    }
}
