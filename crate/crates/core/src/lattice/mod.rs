//! Lattice data model: trivalent, three-colorable planar multigraphs hosting
//! one plaquette generator per face, plus the per-color shrunk-lattice view
//! used by the percolation and branching checks.
//!
//! A lattice is immutable once built. Families construct instances through
//! [`build::RawPatch`], which derives qubits, edges and edge colors from face
//! cycles alone; the family then designates border attachment sets and corner
//! fuse rules before sealing the result.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::color::{Color, COLORS};
use crate::gf2::BitMatrix;

pub mod build;
pub mod f488;
pub mod f666;
mod validate;

pub use build::RawPatch;

/// Dense qubit index.
pub type QubitId = usize;
/// Dense edge index.
pub type EdgeId = usize;
/// Dense plaquette index.
pub type PlaqId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    #[serde(rename = "4.8.8")]
    F488,
    #[serde(rename = "6.6.6")]
    F666,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Geometry::F488 => write!(f, "4.8.8"),
            Geometry::F666 => write!(f, "6.6.6"),
        }
    }
}

impl std::str::FromStr for Geometry {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "4.8.8" | "488" => Ok(Geometry::F488),
            "6.6.6" | "666" => Ok(Geometry::F666),
            other => Err(format!("unknown geometry '{other}' (expected 4.8.8 or 6.6.6)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Square,
    Triangular,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Square => write!(f, "square"),
            Variant::Triangular => write!(f, "triangular"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "square" | "sq" => Ok(Variant::Square),
            "triangular" | "tri" => Ok(Variant::Triangular),
            other => Err(format!("unknown variant '{other}' (expected square or triangular)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub q: [QubitId; 2],
    pub color: Color,
}

impl Edge {
    pub fn other(&self, q: QubitId) -> QubitId {
        if self.q[0] == q {
            self.q[1]
        } else {
            debug_assert_eq!(self.q[1], q);
            self.q[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaquette {
    pub color: Color,
    /// Sorted support.
    pub qubits: Vec<QubitId>,
}

/// Virtual fuse rule for the branching check: a branch of top color `color`
/// whose two complementary legs reach the named border nodes may terminate on
/// border `side` of `color` even though no physical close qubit exists there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerEvent {
    pub color: Color,
    pub side: usize,
    /// (complementary color, border side) the first leg must reach.
    pub leg_a: (Color, usize),
    /// Same for the second leg; `leg_a.0 != leg_b.0`, both differ from `color`.
    pub leg_b: (Color, usize),
}

/// An immutable color-code lattice instance.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub geometry: Geometry,
    pub variant: Variant,
    pub distance: usize,
    pub coords: Vec<(i32, i32)>,
    pub edges: Vec<Edge>,
    /// Faces incident to each edge, parallel to `edges`; boundary edges have one.
    pub edge_faces: Vec<[Option<PlaqId>; 2]>,
    pub plaquettes: Vec<Plaquette>,
    /// Per qubit, the incident edge of each color (index by `Color::index`).
    pub qubit_edges: Vec<[Option<EdgeId>; 3]>,
    /// Per qubit, the containing plaquette of each color.
    pub qubit_plaqs: Vec<[Option<PlaqId>; 3]>,
    /// Designated border attachment qubits: `borders[color][side]`, side 0 = A, 1 = B.
    pub borders: [[Vec<QubitId>; 2]; 3],
    /// Virtual corner fuse rules for the branching check.
    pub corner_events: Vec<CornerEvent>,
    /// Number of logical qubits, from the GF(2) rank of the generator matrix.
    pub k: usize,
    shrunk: [ShrunkLattice; 3],
}

/// Node of a shrunk lattice: one per plaquette of the color, plus the two
/// designated borders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrunkNode {
    Plaq(PlaqId),
    Border(usize),
}

/// Link of a shrunk lattice. Side links carry the two endpoint qubits of the
/// same-colored edge they correspond to; corner links carry the single qubit
/// through which a plaquette touches a designated border.
#[derive(Debug, Clone)]
pub struct ShrunkLink {
    pub ends: [usize; 2],
    /// One or two qubits; the link is usable only while all stay unmasked.
    pub qubits: Vec<QubitId>,
}

/// Per-color percolation view. Node ids: `0..plaq_nodes` map plaquettes of
/// this color (dense, in plaquette order), then `plaq_nodes + side` for the
/// two borders.
#[derive(Debug, Clone)]
pub struct ShrunkLattice {
    pub color: Color,
    pub plaq_nodes: Vec<PlaqId>,
    pub plaq_to_node: BTreeMap<PlaqId, usize>,
    pub links: Vec<ShrunkLink>,
    /// Count of same-colored edges whose dangling end had no designation;
    /// such links attach nothing and are omitted.
    pub dropped_dangles: usize,
}

impl ShrunkLattice {
    pub fn node_count(&self) -> usize {
        self.plaq_nodes.len() + 2
    }
    pub fn border_node(&self, side: usize) -> usize {
        self.plaq_nodes.len() + side
    }
}

impl Lattice {
    pub fn n_qubits(&self) -> usize {
        self.coords.len()
    }

    pub fn shrunk(&self, c: Color) -> &ShrunkLattice {
        &self.shrunk[c.index()]
    }

    /// V - E + F of the inner complex (the outer face is not counted).
    pub fn euler_characteristic(&self) -> i64 {
        self.n_qubits() as i64 - self.edges.len() as i64 + self.plaquettes.len() as i64
    }

    /// Generator supports as rows of a bit matrix.
    pub fn support_matrix(&self) -> BitMatrix {
        let mut m = BitMatrix::zeros(self.plaquettes.len(), self.n_qubits());
        for (r, p) in self.plaquettes.iter().enumerate() {
            for &q in &p.qubits {
                m.set(r, q, true);
            }
        }
        m
    }

    /// Minimum-weight border-to-border qubit set in the shrunk lattice of
    /// color `c`: BFS over links weighted by how many new qubits they carry.
    /// Used for the reference logical paths and the distance checks.
    pub fn reference_path(&self, c: Color) -> Option<Vec<QubitId>> {
        let s = self.shrunk(c);
        let n = s.node_count();
        // Dijkstra with link weight = carried qubit count. Weight-0 links do
        // not occur, so plain binary-heap Dijkstra is exact.
        let mut adj: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n];
        for (li, l) in s.links.iter().enumerate() {
            adj[l.ends[0]].push((l.ends[1], l.qubits.len(), li));
            adj[l.ends[1]].push((l.ends[0], l.qubits.len(), li));
        }
        let (src, dst) = (s.border_node(0), s.border_node(1));
        let mut dist = vec![usize::MAX; n];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut heap = std::collections::BinaryHeap::new();
        dist[src] = 0;
        heap.push(std::cmp::Reverse((0usize, src)));
        while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == dst {
                break;
            }
            for &(v, w, li) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = Some((u, li));
                    heap.push(std::cmp::Reverse((nd, v)));
                }
            }
        }
        if dist[dst] == usize::MAX {
            return None;
        }
        let mut qubits = std::collections::BTreeSet::new();
        let mut at = dst;
        while let Some((u, li)) = prev[at] {
            qubits.extend(s.links[li].qubits.iter().copied());
            at = u;
        }
        Some(qubits.into_iter().collect())
    }

    /// Full structural and algebraic self-check. See `validate.rs` for the
    /// individual invariants.
    pub fn validate(&self) -> Result<(), String> {
        validate::validate(self)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let borders: BTreeMap<String, Vec<Vec<QubitId>>> = COLORS
            .iter()
            .map(|c| {
                (
                    c.to_string(),
                    vec![
                        self.borders[c.index()][0].clone(),
                        self.borders[c.index()][1].clone(),
                    ],
                )
            })
            .collect();
        let logical_paths: BTreeMap<String, Vec<QubitId>> = COLORS
            .iter()
            .filter_map(|c| self.reference_path(*c).map(|p| (c.to_string(), p)))
            .collect();
        serde_json::json!({
            "geometry": self.geometry,
            "variant": self.variant,
            "distance": self.distance,
            "qubits": self.n_qubits(),
            "k": self.k,
            "coords": self.coords,
            "edges": self.edges.iter().map(|e| {
                serde_json::json!([e.q[0], e.q[1], e.color.letter()])
            }).collect::<Vec<_>>(),
            "plaquettes": self.plaquettes.iter().map(|p| serde_json::json!({
                "color": p.color,
                "qubits": p.qubits,
            })).collect::<Vec<_>>(),
            "borders": borders,
            "logical_paths": logical_paths,
            "corner_events": self.corner_events,
        })
    }
}

/// Parity and range rules for each family.
pub fn check_distance(geometry: Geometry, variant: Variant, d: usize) -> Result<(), String> {
    let (parity, min) = match variant {
        Variant::Square => (0, 4),
        Variant::Triangular => (1, 3),
    };
    let _ = geometry;
    if d < min {
        return Err(format!("distance {d} below minimum {min} for {variant} lattices"));
    }
    if d % 2 != parity {
        return Err(format!(
            "distance {d} has wrong parity for {variant} lattices (must be {})",
            if parity == 0 { "even" } else { "odd" }
        ));
    }
    Ok(())
}

/// Build any of the four supported families.
pub fn build_lattice(geometry: Geometry, variant: Variant, d: usize) -> Result<Lattice, String> {
    check_distance(geometry, variant, d)?;
    match (geometry, variant) {
        (Geometry::F488, Variant::Square) => f488::square(d),
        (Geometry::F488, Variant::Triangular) => f488::triangular(d),
        (Geometry::F666, Variant::Square) => f666::square(d),
        (Geometry::F666, Variant::Triangular) => f666::triangular(d),
    }
}
