//! Generic patch construction from face cycles.
//!
//! Families describe a patch purely as a list of colored face cycles over
//! integer coordinates. Everything else is derived here: the qubit set, the
//! edge set (consecutive cycle positions, including the wrap-around pair),
//! edge colors, and the incidence maps. Edge colors follow from two rules:
//! an edge shared by two faces takes the complement of their colors, and the
//! edges around any single face alternate between the two non-face colors.
//! Faces whose edges are all boundary edges need one explicit pin.

use std::collections::BTreeMap;

use crate::color::{Color, COLORS};

use super::{
    CornerEvent, Edge, EdgeId, Geometry, Lattice, Plaquette, PlaqId, QubitId, ShrunkLattice,
    ShrunkLink, Variant,
};

#[derive(Debug, Clone)]
pub struct FaceSpec {
    pub color: Color,
    pub cycle: Vec<(i32, i32)>,
}

#[derive(Debug, Clone)]
struct EdgeBuild {
    q: [QubitId; 2],
    color: Option<Color>,
    faces: [Option<PlaqId>; 2],
}

/// A structurally complete but not yet border-designated patch.
#[derive(Debug, Clone)]
pub struct RawPatch {
    coords: Vec<(i32, i32)>,
    index: BTreeMap<(i32, i32), QubitId>,
    faces: Vec<(Color, Vec<QubitId>)>,
    edges: Vec<EdgeBuild>,
    qubit_edges: Vec<[Option<EdgeId>; 3]>,
    qubit_plaqs: Vec<[Option<PlaqId>; 3]>,
}

impl RawPatch {
    pub fn from_faces(
        specs: &[FaceSpec],
        pins: &[((i32, i32), (i32, i32), Color)],
    ) -> Result<RawPatch, String> {
        // Qubit universe, in coordinate order for a stable indexing.
        let mut index = BTreeMap::new();
        for f in specs {
            for &c in &f.cycle {
                let next = index.len();
                index.entry(c).or_insert(next);
            }
        }
        // Re-number densely in sorted coordinate order.
        let coords: Vec<(i32, i32)> = index.keys().copied().collect();
        for (i, c) in coords.iter().enumerate() {
            *index.get_mut(c).unwrap() = i;
        }

        let mut faces = Vec::with_capacity(specs.len());
        for (fi, f) in specs.iter().enumerate() {
            let w = f.cycle.len();
            if w < 4 || w % 2 != 0 {
                return Err(format!("face {fi} has invalid weight {w}"));
            }
            let ids: Vec<QubitId> = f.cycle.iter().map(|c| index[c]).collect();
            let mut dedup = ids.clone();
            dedup.sort_unstable();
            dedup.dedup();
            if dedup.len() != w {
                return Err(format!("face {fi} repeats a qubit"));
            }
            faces.push((f.color, ids));
        }

        // Edge universe from consecutive cycle pairs.
        let mut edge_index: BTreeMap<(QubitId, QubitId), usize> = BTreeMap::new();
        let mut edge_faces: BTreeMap<(QubitId, QubitId), Vec<PlaqId>> = BTreeMap::new();
        for (fi, (_, cyc)) in faces.iter().enumerate() {
            for i in 0..cyc.len() {
                let (a, b) = (cyc[i], cyc[(i + 1) % cyc.len()]);
                let key = (a.min(b), a.max(b));
                edge_index.entry(key).or_insert(0);
                let owners = edge_faces.entry(key).or_default();
                if owners.len() == 2 {
                    return Err(format!("edge {key:?} belongs to more than two faces"));
                }
                owners.push(fi);
            }
        }
        for (i, v) in edge_index.values_mut().enumerate() {
            *v = i;
        }

        let mut edges: Vec<EdgeBuild> = edge_index
            .iter()
            .map(|(&(a, b), _)| {
                let owners = &edge_faces[&(a, b)];
                let color = match owners.as_slice() {
                    [f1, f2] => {
                        let (c1, c2) = (faces[*f1].0, faces[*f2].0);
                        if c1 == c2 {
                            return Err(format!(
                                "edge ({a},{b}) shared by two faces of equal color {c1}"
                            ));
                        }
                        Some(Color::complement(c1, c2))
                    }
                    _ => None,
                };
                Ok(EdgeBuild {
                    q: [a, b],
                    color,
                    faces: [Some(owners[0]), owners.get(1).copied()],
                })
            })
            .collect::<Result<_, String>>()?;

        for &(ca, cb, col) in pins {
            let (a, b) = (index[&ca], index[&cb]);
            let key = (a.min(b), a.max(b));
            let ei = *edge_index
                .get(&key)
                .ok_or_else(|| format!("pinned edge {ca:?}-{cb:?} does not exist"))?;
            match edges[ei].color {
                None => edges[ei].color = Some(col),
                Some(c) if c == col => {}
                Some(c) => return Err(format!("pin {ca:?}-{cb:?}={col} conflicts with {c}")),
            }
        }

        // Boundary edges: alternate around each face, seeded by any known edge.
        for (fi, (fcol, cyc)) in faces.iter().enumerate() {
            let w = cyc.len();
            let eids: Vec<EdgeId> = (0..w)
                .map(|i| {
                    let (a, b) = (cyc[i], cyc[(i + 1) % w]);
                    edge_index[&(a.min(b), a.max(b))]
                })
                .collect();
            let seed = eids.iter().position(|&e| edges[e].color.is_some());
            let Some(i0) = seed else {
                return Err(format!(
                    "face {fi} has no colorable edge; add an explicit pin"
                ));
            };
            let c0 = edges[eids[i0]].color.unwrap();
            if c0 == *fcol {
                return Err(format!("face {fi} contains an edge of its own color"));
            }
            let [x, y] = fcol.others();
            let c1 = if c0 == x { y } else { x };
            for (j, &e) in eids.iter().enumerate() {
                let expect = if (j + i0) % 2 == 0 { c0 } else { c1 };
                match edges[e].color {
                    None => edges[e].color = Some(expect),
                    Some(c) if c == expect => {}
                    Some(c) => {
                        return Err(format!(
                            "face {fi} edge {j} alternation conflict: {c} vs {expect}"
                        ))
                    }
                }
            }
        }

        // Incidence maps, with the trivalence and distinctness rules.
        let nq = coords.len();
        let mut qubit_edges = vec![[None; 3]; nq];
        let mut qubit_plaqs = vec![[None; 3]; nq];
        for (ei, e) in edges.iter().enumerate() {
            let c = e.color.unwrap().index();
            for &q in &e.q {
                if let Some(prev) = qubit_edges[q][c] {
                    return Err(format!(
                        "qubit {q} has two edges of one color ({prev}, {ei})"
                    ));
                }
                qubit_edges[q][c] = Some(ei);
            }
        }
        for (fi, (fcol, cyc)) in faces.iter().enumerate() {
            let c = fcol.index();
            for &q in cyc {
                if qubit_plaqs[q][c].is_some() {
                    return Err(format!("qubit {q} lies in two {fcol} faces"));
                }
                qubit_plaqs[q][c] = Some(fi);
            }
        }

        Ok(RawPatch {
            coords,
            index,
            faces,
            edges,
            qubit_edges,
            qubit_plaqs,
        })
    }

    pub fn id(&self, coord: (i32, i32)) -> Option<QubitId> {
        self.index.get(&coord).copied()
    }

    pub fn coord(&self, q: QubitId) -> (i32, i32) {
        self.coords[q]
    }

    pub fn n_qubits(&self) -> usize {
        self.coords.len()
    }

    pub fn degree(&self, q: QubitId) -> usize {
        self.qubit_edges[q].iter().flatten().count()
    }

    pub fn plaq(&self, q: QubitId, c: Color) -> Option<PlaqId> {
        self.qubit_plaqs[q][c.index()]
    }

    /// Qubits at which some edge of color `c` ends without a `c` plaquette.
    /// These are the attachment points for side-type borders.
    pub fn dangling_ends(&self, c: Color) -> Vec<QubitId> {
        let mut out: Vec<QubitId> = self
            .edges
            .iter()
            .filter(|e| e.color == Some(c))
            .flat_map(|e| e.q)
            .filter(|&q| self.qubit_plaqs[q][c.index()].is_none())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Qubits inside a `c` plaquette with no incident `c` edge: attachment
    /// points for single-qubit corner-type borders.
    pub fn corner_candidates(&self, c: Color) -> Vec<QubitId> {
        (0..self.n_qubits())
            .filter(|&q| {
                self.qubit_plaqs[q][c.index()].is_some() && self.qubit_edges[q][c.index()].is_none()
            })
            .collect()
    }

    /// Seal the patch: fix border designations and corner events, derive the
    /// shrunk lattices and the logical count.
    pub fn finish(
        self,
        geometry: Geometry,
        variant: Variant,
        distance: usize,
        borders: [[Vec<QubitId>; 2]; 3],
        corner_events: Vec<CornerEvent>,
    ) -> Result<Lattice, String> {
        for c in COLORS {
            let dangles = self.dangling_ends(c);
            let corners = self.corner_candidates(c);
            for side in 0..2 {
                let set = &borders[c.index()][side];
                if set.is_empty() {
                    return Err(format!("{c} border {side} is empty"));
                }
                for &q in set {
                    if !dangles.contains(&q) && !corners.contains(&q) {
                        return Err(format!(
                            "{c} border {side} designates qubit {q}, which neither dangles nor sits in a cornered {c} face"
                        ));
                    }
                }
            }
            let overlap: Vec<_> = borders[c.index()][0]
                .iter()
                .filter(|q| borders[c.index()][1].contains(q))
                .collect();
            if !overlap.is_empty() {
                return Err(format!("{c} border sides overlap at {overlap:?}"));
            }
        }

        let plaquettes: Vec<Plaquette> = self
            .faces
            .iter()
            .map(|(c, cyc)| {
                let mut qubits = cyc.clone();
                qubits.sort_unstable();
                Plaquette { color: *c, qubits }
            })
            .collect();

        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge {
                q: e.q,
                color: e.color.unwrap(),
            })
            .collect();
        let edge_faces: Vec<[Option<PlaqId>; 2]> = self.edges.iter().map(|e| e.faces).collect();

        let shrunk = COLORS.map(|c| {
            build_shrunk(
                c,
                &plaquettes,
                &edges,
                &self.qubit_plaqs,
                &self.qubit_edges,
                &borders[c.index()],
            )
        });

        let nq = self.coords.len();
        let mut support = crate::gf2::BitMatrix::zeros(plaquettes.len(), nq);
        for (r, p) in plaquettes.iter().enumerate() {
            for &q in &p.qubits {
                support.set(r, q, true);
            }
        }
        let rank = support.rank();
        if rank != plaquettes.len() {
            return Err(format!(
                "dependent generators: rank {rank} < {} faces",
                plaquettes.len()
            ));
        }
        let k = nq - 2 * rank;

        Ok(Lattice {
            geometry,
            variant,
            distance,
            coords: self.coords,
            edges,
            edge_faces,
            plaquettes,
            qubit_edges: self.qubit_edges,
            qubit_plaqs: self.qubit_plaqs,
            borders,
            corner_events,
            k,
            shrunk,
        })
    }
}

fn build_shrunk(
    c: Color,
    plaquettes: &[Plaquette],
    edges: &[Edge],
    qubit_plaqs: &[[Option<PlaqId>; 3]],
    qubit_edges: &[[Option<EdgeId>; 3]],
    borders: &[Vec<QubitId>; 2],
) -> ShrunkLattice {
    let plaq_nodes: Vec<PlaqId> = plaquettes
        .iter()
        .enumerate()
        .filter(|(_, p)| p.color == c)
        .map(|(i, _)| i)
        .collect();
    let plaq_to_node: BTreeMap<PlaqId, usize> =
        plaq_nodes.iter().enumerate().map(|(n, &p)| (p, n)).collect();
    let border_base = plaq_nodes.len();
    let side_of = |q: QubitId| -> Option<usize> {
        (0..2).find(|&s| borders[s].contains(&q))
    };

    let mut links = Vec::new();
    let mut dropped = 0usize;
    for e in edges.iter().filter(|e| e.color == c) {
        let node = |q: QubitId| -> Option<usize> {
            match qubit_plaqs[q][c.index()] {
                Some(p) => Some(plaq_to_node[&p]),
                None => side_of(q).map(|s| border_base + s),
            }
        };
        match (node(e.q[0]), node(e.q[1])) {
            (Some(a), Some(b)) => links.push(ShrunkLink {
                ends: [a, b],
                qubits: vec![e.q[0].min(e.q[1]), e.q[0].max(e.q[1])],
            }),
            _ => dropped += 1,
        }
    }
    // Corner-type attachments: designated qubits inside a c face with no c edge.
    for s in 0..2 {
        for &q in &borders[s] {
            if qubit_edges[q][c.index()].is_none() {
                if let Some(p) = qubit_plaqs[q][c.index()] {
                    links.push(ShrunkLink {
                        ends: [plaq_to_node[&p], border_base + s],
                        qubits: vec![q],
                    });
                }
            }
        }
    }

    ShrunkLattice {
        color: c,
        plaq_nodes,
        plaq_to_node,
        links,
        dropped_dangles: dropped,
    }
}
