//! Twin-qubit loss recovery: excise each lost qubit together with a twin
//! neighbor, reconnect the freed link ends, and merge or shrink the adjacent
//! plaquettes so the stabilizer group keeps zero support on removed qubits.
//!
//! The working state is a mutable multigraph copy of the lattice. Face merges
//! are tracked through a union-find plus an append-only event log; the log is
//! what later lets a correction chain recover, for any single excision, which
//! final plaquettes inherited that excision's undetermined dimer sign (merges
//! XOR the carry bit, deletions drop it).
//!
//! Euler convention: chi = present qubits - live links + live faces, outer
//! face excluded. A generic bulk excision removes 2 qubits, 5 links and 1
//! face and adds 2 links, so chi is unchanged; that is asserted per excision.
//! Non-generic cases (border merges, self-shrinks, weight-0 deletions,
//! isolated losses) each shift chi by a fixed amount instead and are counted
//! in the record.

use crate::color::{Color, COLORS};
use crate::gf2::{self, BitMatrix, BitVec};
use crate::lattice::{EdgeId, Geometry, Lattice, Plaquette, QubitId, Variant};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet, VecDeque};

/// A sampled (or hand-picked) set of lost qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSet {
    /// Sorted, deduplicated qubit indices.
    pub lost: Vec<QubitId>,
    /// Sampling rate that produced the set, when sampled.
    pub rate: Option<f64>,
}

impl LossSet {
    pub fn new(mut lost: Vec<QubitId>) -> Self {
        lost.sort_unstable();
        lost.dedup();
        LossSet { lost, rate: None }
    }
}

/// Each qubit is lost independently with probability `p`.
pub fn sample_losses<R: Rng>(lat: &Lattice, p: f64, rng: &mut R) -> LossSet {
    let uniforms: Vec<f64> = (0..lat.n_qubits()).map(|_| rng.gen::<f64>()).collect();
    sample_losses_from_uniforms(lat, p, &uniforms)
}

/// Loss set from pre-drawn per-qubit uniforms: qubit i is lost iff u[i] < p.
/// Sharing the uniforms across rates nests the loss sets monotonically.
pub fn sample_losses_from_uniforms(lat: &Lattice, p: f64, uniforms: &[f64]) -> LossSet {
    assert!((0.0..=1.0).contains(&p), "loss rate {p} outside [0,1]");
    assert_eq!(uniforms.len(), lat.n_qubits());
    let lost = uniforms
        .iter()
        .enumerate()
        .filter(|(_, &u)| u < p)
        .map(|(q, _)| q)
        .collect();
    LossSet { lost, rate: Some(p) }
}

/// A lost qubit, its chosen twin, and the color of the link removed with them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimer {
    pub q0: QubitId,
    pub q1: QubitId,
    pub color: Color,
}

/// How the two end plaquettes of a dimer link were resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExciseCase {
    /// Two distinct live end plaquettes merged into one (the generic case).
    Merge,
    /// Both ends were the same plaquette already; it shrank by two.
    SelfShrink,
    /// Only one end plaquette existed; it merged with the border and was
    /// deleted (the generator has no valid replacement avoiding the dimer).
    BorderMerge,
    /// Neither end plaquette existed.
    OpenEnds,
}

/// One executed excision, with the face slots it produced (post-excision ids)
/// and a watermark into the face event log for syndrome forwarding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimerRecord {
    pub dimer: Dimer,
    pub case: ExciseCase,
    /// Live faces redefined by this excision: merged end plaquette (when one
    /// survives) followed by the shrunk flanking plaquettes.
    pub result_faces: Vec<usize>,
    /// Index of the merged end plaquette inside `result_faces`, if present.
    pub merged: Option<usize>,
    /// Length of the event log right after this excision.
    pub event_watermark: usize,
}

/// Face bookkeeping events, in execution order. Face ids are stable slots.
/// Compose records a generator built as the product of two others, both of
/// which may feed several products; Merge is the two-ends-into-one special
/// case where the loser slot is consumed exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceEvent {
    Merge { winner: usize, loser: usize },
    Compose { face: usize, parts: [usize; 2] },
    Delete { face: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecFace {
    pub color: Color,
    pub support: BitVec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecEdge {
    pub q: [QubitId; 2],
    pub color: Color,
}

/// Counters for every non-generic path taken during a reconstruction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub merges: usize,
    pub self_shrinks: usize,
    pub border_merges: usize,
    pub open_ends: usize,
    pub weight_zero_deleted: usize,
    pub degenerate_reconnections: usize,
    pub opened_slots: usize,
    pub stray_support_cleared: usize,
    pub skipped_losses: usize,
}

impl CaseCounts {
    /// True when every excision followed the generic bulk path.
    pub fn generic_only(&self) -> bool {
        self.self_shrinks == 0
            && self.border_merges == 0
            && self.open_ends == 0
            && self.weight_zero_deleted == 0
            && self.degenerate_reconnections == 0
            && self.opened_slots == 0
            && self.stray_support_cleared == 0
    }
}

/// Outcome of a full reconstruction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRecord {
    pub geometry: Geometry,
    pub variant: Variant,
    pub distance: usize,
    pub n_qubits: usize,
    pub losses: Vec<QubitId>,
    pub dimers: Vec<DimerRecord>,
    /// Lost qubits excised alone because no present neighbor remained.
    pub isolated: Vec<QubitId>,
    /// 1 on every lost or twin qubit.
    pub mask: BitVec,
    pub remaining_fraction: f64,
    /// Final faces, slot-aligned with the event log (dead slots are None).
    pub faces: Vec<Option<RecFace>>,
    /// Final live links.
    pub edges: Vec<RecEdge>,
    pub events: Vec<FaceEvent>,
    /// Qubit/color slots left without a link by boundary or degenerate seals.
    pub opened: Vec<(QubitId, Color)>,
    pub counts: CaseCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwinError {
    AlreadyExcised,
    IsolatedLoss,
}

/// Twin choice among the present neighbors of a lost qubit. `candidates` is
/// sorted ascending and non-empty; the return value is an index into it.
pub trait TwinPolicy {
    fn choose(&mut self, q0: QubitId, candidates: &[QubitId]) -> usize;
}

/// The protocol's default: uniform over present neighbors.
pub struct UniformTwin<R: Rng>(pub R);

impl<R: Rng> TwinPolicy for UniformTwin<R> {
    fn choose(&mut self, _q0: QubitId, candidates: &[QubitId]) -> usize {
        self.0.gen_range(0..candidates.len())
    }
}

struct DynEdge {
    q: [QubitId; 2],
    color: Color,
}

struct DynFace {
    parent: usize,
    alive: bool,
    color: Color,
    support: BitVec,
}

/// Mutable protocol state: the partially reconstructed code.
pub struct CodeState<'a> {
    pub lat: &'a Lattice,
    present: Vec<bool>,
    n_present: usize,
    n_edges: usize,
    n_faces: usize,
    edges: Vec<Option<DynEdge>>,
    qubit_edges: Vec<[Option<EdgeId>; 3]>,
    faces: Vec<DynFace>,
    qubit_faces: Vec<[Option<usize>; 3]>,
    events: Vec<FaceEvent>,
    counts: CaseCounts,
    /// Qubit/color slots emptied without reconnection (now border-adjacent).
    opened: Vec<(QubitId, Color)>,
}

impl<'a> CodeState<'a> {
    pub fn new(lat: &'a Lattice) -> Self {
        let n = lat.n_qubits();
        let edges: Vec<Option<DynEdge>> = lat
            .edges
            .iter()
            .map(|e| Some(DynEdge { q: e.q, color: e.color }))
            .collect();
        let faces: Vec<DynFace> = lat
            .plaquettes
            .iter()
            .enumerate()
            .map(|(i, p)| DynFace {
                parent: i,
                alive: true,
                color: p.color,
                support: BitVec::from_indices(n, p.qubits.iter().copied()),
            })
            .collect();
        CodeState {
            lat,
            present: vec![true; n],
            n_present: n,
            n_edges: edges.len(),
            n_faces: faces.len(),
            edges,
            qubit_edges: lat.qubit_edges.clone(),
            faces,
            qubit_faces: lat.qubit_plaqs.clone(),
            events: Vec::new(),
            counts: CaseCounts::default(),
            opened: Vec::new(),
        }
    }

    pub fn is_present(&self, q: QubitId) -> bool {
        self.present[q]
    }

    pub fn chi(&self) -> i64 {
        self.n_present as i64 - self.n_edges as i64 + self.n_faces as i64
    }

    fn find(&self, mut f: usize) -> usize {
        while self.faces[f].parent != f {
            f = self.faces[f].parent;
        }
        f
    }

    fn live_face(&self, f: Option<usize>) -> Option<usize> {
        let root = self.find(f?);
        self.faces[root].alive.then_some(root)
    }

    /// Distinct present neighbors of `q0`, sorted ascending.
    pub fn twin_candidates(&self, q0: QubitId) -> Result<Vec<QubitId>, TwinError> {
        if !self.present[q0] {
            return Err(TwinError::AlreadyExcised);
        }
        let mut cands: Vec<QubitId> = self.qubit_edges[q0]
            .iter()
            .flatten()
            .map(|&e| self.other_end(e, q0))
            .collect();
        cands.sort_unstable();
        cands.dedup();
        if cands.is_empty() {
            Err(TwinError::IsolatedLoss)
        } else {
            Ok(cands)
        }
    }

    /// Uniformly random twin among the present neighbors of `q0`.
    pub fn select_twin<R: Rng>(&self, q0: QubitId, rng: &mut R) -> Result<QubitId, TwinError> {
        let cands = self.twin_candidates(q0)?;
        Ok(cands[rng.gen_range(0..cands.len())])
    }

    fn other_end(&self, e: EdgeId, q: QubitId) -> QubitId {
        let edge = self.edges[e].as_ref().expect("live edge");
        if edge.q[0] == q {
            edge.q[1]
        } else {
            edge.q[0]
        }
    }

    /// The dimer through the lowest-id live link between `q0` and `q1`.
    pub fn dimer(&self, q0: QubitId, q1: QubitId) -> Option<Dimer> {
        let mut best: Option<(EdgeId, Color)> = None;
        for &e in self.qubit_edges[q0].iter().flatten() {
            if self.other_end(e, q0) == q1 && best.map_or(true, |(b, _)| e < b) {
                best = Some((e, self.edges[e].as_ref().unwrap().color));
            }
        }
        best.map(|(_, color)| Dimer { q0, q1, color })
    }

    fn remove_edge(&mut self, e: EdgeId) {
        let edge = self.edges[e].take().expect("edge already removed");
        self.n_edges -= 1;
        for q in edge.q {
            if self.qubit_edges[q][edge.color.index()] == Some(e) {
                self.qubit_edges[q][edge.color.index()] = None;
            }
        }
    }

    fn delete_face(&mut self, f: usize) {
        assert!(self.faces[f].alive && self.faces[f].parent == f);
        self.faces[f].alive = false;
        self.n_faces -= 1;
        self.events.push(FaceEvent::Delete { face: f });
    }

    /// Clear the dimer qubits from a face's support; delete it at weight 0.
    fn shrink_face(&mut self, f: usize, q0: QubitId, q1: QubitId) {
        self.faces[f].support.set(q0, false);
        self.faces[f].support.set(q1, false);
        if self.faces[f].support.is_zero() {
            self.delete_face(f);
            self.counts.weight_zero_deleted += 1;
        }
    }

    /// Reconnect one freed pair with a link of the flanks' color, or record
    /// the open ends when a partner is missing or the seal would self-loop.
    fn seal(&mut self, pair: [Option<QubitId>; 2], color: Color) {
        match pair {
            [Some(x), Some(y)] if x == y => {
                self.counts.degenerate_reconnections += 1;
                self.opened.push((x, color));
                self.counts.opened_slots += 1;
            }
            [Some(x), Some(y)] => {
                let id = self.edges.len();
                self.edges.push(Some(DynEdge { q: [x.min(y), x.max(y)], color }));
                self.n_edges += 1;
                for q in [x, y] {
                    assert!(self.qubit_edges[q][color.index()].is_none());
                    self.qubit_edges[q][color.index()] = Some(id);
                }
            }
            [one, two] => {
                for q in [one, two].into_iter().flatten() {
                    self.opened.push((q, color));
                    self.counts.opened_slots += 1;
                }
            }
        }
    }

    /// Execute one excision. Removes the dimer qubits, the dimer link and its
    /// flanking links, reconnects the freed pairs, merges the end plaquettes
    /// and shrinks the flanking ones.
    pub fn excise_dimer(&mut self, dimer: Dimer) -> DimerRecord {
        let Dimer { q0, q1, color: c } = dimer;
        assert!(self.present[q0] && self.present[q1], "dimer qubits must be present");
        let link = self.qubit_edges[q0][c.index()].expect("dimer link absent");
        assert_eq!(self.other_end(link, q0), q1, "dimer link does not reach the twin");
        let chi_before = self.chi();
        let [a, b] = c.others();

        // Resolve the four incident faces before mutating anything. The
        // flanking plaquette of color a is sealed by the b-colored link and
        // vice versa.
        let fa = self.live_face(self.qubit_faces[q0][a.index()]);
        let fb = self.live_face(self.qubit_faces[q0][b.index()]);
        let p0 = self.live_face(self.qubit_faces[q0][c.index()]);
        let p1 = self.live_face(self.qubit_faces[q1][c.index()]);

        // Flanking links and their freed partners. A partner that is the
        // other dimer qubit (parallel links around a two-sided plaquette)
        // leaves nothing to reconnect, same as a missing link.
        let partner = |s: &Self, q: QubitId, col: Color| -> Option<QubitId> {
            s.qubit_edges[q][col.index()]
                .map(|e| s.other_end(e, q))
                .filter(|&x| x != q0 && x != q1)
        };
        let na = partner(self, q0, a);
        let nb = partner(self, q0, b);
        let ma = partner(self, q1, a);
        let mb = partner(self, q1, b);

        // Remove the two qubits and every link touching them.
        for q in [q0, q1] {
            for slot in 0..3 {
                if let Some(e) = self.qubit_edges[q][slot] {
                    self.remove_edge(e);
                }
            }
            self.present[q] = false;
            self.n_present -= 1;
        }

        // Merge or drop the end plaquettes.
        let (case, merged_face) = match (p0, p1) {
            (Some(x), Some(y)) if x != y => {
                let (winner, loser) = (x.min(y), x.max(y));
                let loser_support = self.faces[loser].support.clone();
                self.faces[winner].support.xor_assign(&loser_support);
                self.faces[loser].alive = false;
                self.faces[loser].parent = winner;
                self.n_faces -= 1;
                self.events.push(FaceEvent::Merge { winner, loser });
                self.counts.merges += 1;
                self.shrink_face(winner, q0, q1);
                (ExciseCase::Merge, self.faces[winner].alive.then_some(winner))
            }
            (Some(x), Some(_)) => {
                self.counts.self_shrinks += 1;
                self.shrink_face(x, q0, q1);
                (ExciseCase::SelfShrink, self.faces[x].alive.then_some(x))
            }
            (Some(x), None) | (None, Some(x)) => {
                self.delete_face(x);
                self.counts.border_merges += 1;
                (ExciseCase::BorderMerge, None)
            }
            (None, None) => {
                self.counts.open_ends += 1;
                (ExciseCase::OpenEnds, None)
            }
        };

        // Shrink the flanking plaquettes by the two dimer qubits. Re-resolve:
        // the merge above may have forwarded a flank onto the merged face.
        let mut shrunk = Vec::new();
        for f0 in [fa, fb].into_iter().flatten() {
            if let Some(f) = self.live_face(Some(f0)) {
                if Some(f) != merged_face && !shrunk.contains(&f) {
                    self.shrink_face(f, q0, q1);
                    if self.faces[f].alive {
                        shrunk.push(f);
                    }
                }
            }
        }

        // Reconnect: the a-colored seal closes the gap of the b-colored
        // flanking plaquette, and vice versa.
        self.seal([na, ma], a);
        self.seal([nb, mb], b);

        // Defensive sweep: no live face may keep support on the dimer.
        for f in 0..self.faces.len() {
            if self.faces[f].alive && self.faces[f].parent == f {
                if self.faces[f].support.get(q0) || self.faces[f].support.get(q1) {
                    self.counts.stray_support_cleared += 1;
                    self.shrink_face(f, q0, q1);
                }
            }
        }

        let generic = case == ExciseCase::Merge
            && [na, nb, ma, mb].iter().all(Option::is_some)
            && na != ma
            && nb != mb
            && self.counts.generic_only();
        if generic {
            assert_eq!(self.chi(), chi_before, "generic excision must preserve chi");
        }

        let mut result_faces: Vec<usize> = merged_face.into_iter().collect();
        let merged = merged_face.map(|_| 0);
        result_faces.extend(shrunk);
        DimerRecord {
            dimer,
            case,
            result_faces,
            merged,
            event_watermark: self.events.len(),
        }
    }

    /// Remove a lost qubit that has no present neighbor left: merge its
    /// live faces pairwise by color order so no generator keeps support on it.
    pub fn excise_isolated(&mut self, q0: QubitId) {
        assert!(self.present[q0]);
        // Every link of an isolated qubit was already removed when its other
        // end was excised; sweep defensively so no link outlives an endpoint.
        debug_assert!(self.qubit_edges[q0].iter().all(Option::is_none));
        for slot in 0..3 {
            if let Some(e) = self.qubit_edges[q0][slot] {
                self.remove_edge(e);
            }
        }
        self.present[q0] = false;
        self.n_present -= 1;
        let mut live: Vec<usize> = self.qubit_faces[q0]
            .iter()
            .filter_map(|&f| self.live_face(f))
            .filter(|&f| self.faces[f].support.get(q0))
            .collect();
        live.sort_unstable_by_key(|&f| (self.faces[f].color.index(), f));
        live.dedup();
        match live.len() {
            0 => {}
            1 => {
                // Lone face: clearing the bit leaves an odd-weight generator;
                // logged via the isolated flag on the record.
                self.faces[live[0]].support.set(q0, false);
                if self.faces[live[0]].support.is_zero() {
                    self.delete_face(live[0]);
                    self.counts.weight_zero_deleted += 1;
                }
            }
            _ => {
                // [f1,f2,f3] -> {S1^S2, S2^S3}: q0 cancels in each product.
                // A middle face feeds both products, so these are composes,
                // not merges: anything it carried is owed to each product.
                for w in live.windows(2) {
                    let id = self.faces.len();
                    let mut support = self.faces[w[0]].support.clone();
                    support.xor_assign(&self.faces[w[1]].support);
                    self.faces.push(DynFace {
                        parent: id,
                        alive: true,
                        color: self.faces[w[0]].color,
                        support,
                    });
                    self.n_faces += 1;
                    self.events.push(FaceEvent::Compose { face: id, parts: [w[0], w[1]] });
                }
                let first_product = self.faces.len() - live.len() + 1;
                for (i, &f) in live.iter().enumerate() {
                    self.faces[f].alive = false;
                    // Forward constituents to the nearest product so later
                    // lookups land on a live face.
                    self.faces[f].parent = first_product + i.min(live.len() - 2);
                    self.n_faces -= 1;
                    self.events.push(FaceEvent::Delete { face: f });
                }
            }
        }
        for f in 0..self.faces.len() {
            if self.faces[f].alive && self.faces[f].parent == f && self.faces[f].support.get(q0) {
                self.counts.stray_support_cleared += 1;
                self.faces[f].support.set(q0, false);
                if self.faces[f].support.is_zero() {
                    self.delete_face(f);
                    self.counts.weight_zero_deleted += 1;
                }
            }
        }
    }

    fn into_record(
        self,
        losses: &LossSet,
        dimers: Vec<DimerRecord>,
        isolated: Vec<QubitId>,
        mask: BitVec,
    ) -> ReconstructionRecord {
        let n = self.lat.n_qubits();
        // Losers of a merge are marked dead, so alive faces are exactly roots.
        let faces = self
            .faces
            .iter()
            .map(|f| {
                f.alive.then(|| RecFace {
                    color: f.color,
                    support: f.support.clone(),
                })
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .flatten()
            .map(|e| RecEdge { q: e.q, color: e.color })
            .collect();
        let remaining = n - mask.count_ones();
        ReconstructionRecord {
            geometry: self.lat.geometry,
            variant: self.lat.variant,
            distance: self.lat.distance,
            n_qubits: n,
            losses: losses.lost.clone(),
            dimers,
            isolated,
            mask,
            remaining_fraction: remaining as f64 / n as f64,
            faces,
            edges,
            events: self.events,
            opened: self.opened,
            counts: self.counts,
        }
    }
}

/// Run the full protocol: losses in ascending qubit order, each excised with
/// a twin drawn by `policy`; losses already removed as twins are skipped.
pub fn reconstruct_with<P: TwinPolicy>(
    lat: &Lattice,
    losses: &LossSet,
    policy: &mut P,
) -> ReconstructionRecord {
    let n = lat.n_qubits();
    let mut state = CodeState::new(lat);
    let mut mask = BitVec::zeros(n);
    let mut dimers = Vec::new();
    let mut isolated = Vec::new();
    for &q0 in &losses.lost {
        assert!(q0 < n, "loss index {q0} out of range");
        mask.set(q0, true);
        match state.twin_candidates(q0) {
            Err(TwinError::AlreadyExcised) => {
                state.counts.skipped_losses += 1;
            }
            Err(TwinError::IsolatedLoss) => {
                state.excise_isolated(q0);
                isolated.push(q0);
            }
            Ok(cands) => {
                let q1 = cands[policy.choose(q0, &cands)];
                mask.set(q1, true);
                let dimer = state.dimer(q0, q1).expect("twin is a live neighbor");
                dimers.push(state.excise_dimer(dimer));
            }
        }
    }
    state.into_record(losses, dimers, isolated, mask)
}

/// `reconstruct_with` under the default uniform twin policy.
pub fn reconstruct<R: Rng>(lat: &Lattice, losses: &LossSet, rng: R) -> ReconstructionRecord {
    reconstruct_with(lat, losses, &mut UniformTwin(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauliType {
    X,
    Z,
}

/// A Pauli string returning the code to the +1 eigenspace of the plaquettes
/// redefined by one excision, should its dimer sign turn out negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorrectionChain {
    /// Index into the record's dimer list.
    pub dimer: usize,
    pub pauli_type: PauliType,
    /// Qubits acted on, in chain order (or sorted when assembled algebraically).
    pub support: Vec<QubitId>,
}

impl ReconstructionRecord {
    /// Final face id that an original or intermediate face slot forwards to,
    /// replaying the event log from `from_event`.
    pub fn forward_face(&self, face: usize, from_event: usize) -> Option<usize> {
        let mut cur = face;
        for ev in &self.events[from_event..] {
            match *ev {
                FaceEvent::Merge { winner, loser } if cur == loser => cur = winner,
                FaceEvent::Compose { face, parts } if parts.contains(&cur) => cur = face,
                FaceEvent::Delete { face } if cur == face => return None,
                _ => {}
            }
        }
        self.faces[cur].is_some().then_some(cur)
    }

    /// Final faces that carry a given excision's dimer sign: its redefined
    /// plaquettes forwarded through later merges with XOR parity (a face
    /// absorbing the carry twice cancels it).
    pub fn carry_faces(&self, dimer_idx: usize) -> Vec<usize> {
        let d = &self.dimers[dimer_idx];
        let mut parity: HashMap<usize, bool> = HashMap::new();
        for &f in &d.result_faces {
            *parity.entry(f).or_insert(false) ^= true;
        }
        for ev in &self.events[d.event_watermark..] {
            match *ev {
                FaceEvent::Merge { winner, loser } => {
                    if let Some(p) = parity.remove(&loser) {
                        *parity.entry(winner).or_insert(false) ^= p;
                    }
                }
                FaceEvent::Compose { face, parts } => {
                    // Parts stay in the map: a later product reads them again.
                    let p = parts
                        .iter()
                        .fold(false, |acc, f| acc ^ parity.get(f).copied().unwrap_or(false));
                    *parity.entry(face).or_insert(false) ^= p;
                }
                FaceEvent::Delete { face } => {
                    parity.remove(&face);
                }
            }
        }
        let mut out: Vec<usize> = parity
            .into_iter()
            .filter(|&(f, p)| p && self.faces[f].is_some())
            .map(|(f, _)| f)
            .collect();
        out.sort_unstable();
        out
    }

    /// Generator supports of the reconstructed code. The code is self-dual
    /// CSS: the X-type and Z-type generator supports coincide, so one list
    /// serves both Pauli types.
    pub fn updated_generators(&self) -> Vec<Plaquette> {
        self.faces
            .iter()
            .flatten()
            .map(|f| Plaquette { color: f.color, qubits: f.support.iter_ones().collect() })
            .collect()
    }

    /// Deterministic correction chain for one recorded excision: odd overlap
    /// with each face carrying that dimer's sign, even with every other face.
    /// Breadth-first path search from the merged plaquette, falling back to a
    /// GF(2) solve when no short path closes the parity contract.
    pub fn correction_chain(&self, dimer_idx: usize, pauli_type: PauliType) -> CorrectionChain {
        let targets = self.carry_faces(dimer_idx);
        let support = if targets.is_empty() {
            Vec::new()
        } else {
            self.chain_bfs(dimer_idx, &targets)
                .unwrap_or_else(|| self.chain_solve(&targets))
        };
        debug_assert!(self.chain_contract_holds(&support, &targets));
        CorrectionChain { dimer: dimer_idx, pauli_type, support }
    }

    fn qubit_face_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.n_qubits];
        for (i, f) in self.faces.iter().enumerate() {
            if let Some(f) = f {
                for q in f.support.iter_ones() {
                    lists[q].push(i);
                }
            }
        }
        lists
    }

    fn chain_contract_holds(&self, support: &[QubitId], targets: &[usize]) -> bool {
        let s = BitVec::from_indices(self.n_qubits, support.iter().copied());
        self.faces.iter().enumerate().all(|(i, f)| {
            f.as_ref().map_or(true, |f| {
                let odd = f.support.dot(&s);
                odd == targets.contains(&i)
            })
        })
    }

    fn chain_bfs(&self, dimer_idx: usize, targets: &[usize]) -> Option<Vec<QubitId>> {
        let mut adj = vec![Vec::new(); self.n_qubits];
        for e in &self.edges {
            adj[e.q[0]].push(e.q[1]);
            adj[e.q[1]].push(e.q[0]);
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        let faces_of = self.qubit_face_lists();
        let d = &self.dimers[dimer_idx];
        let mut sources: Vec<QubitId> = match d.merged {
            Some(i) => self
                .forward_face(d.result_faces[i], d.event_watermark)
                .map(|f| self.faces[f].as_ref().unwrap().support.iter_ones().collect())
                .unwrap_or_default(),
            None => Vec::new(),
        };
        if sources.is_empty() {
            sources = self.faces[targets[0]].as_ref().unwrap().support.iter_ones().collect();
        }
        sources.sort_unstable();

        let target_set: HashSet<usize> = targets.iter().copied().collect();
        let diff_after = |diff: &Vec<usize>, q: QubitId| -> Vec<usize> {
            let mut next = diff.clone();
            for &f in &faces_of[q] {
                match next.binary_search(&f) {
                    Ok(i) => {
                        next.remove(i);
                    }
                    Err(i) => next.insert(i, f),
                }
            }
            next
        };
        let base_diff: Vec<usize> = {
            let mut v: Vec<usize> = target_set.iter().copied().collect();
            v.sort_unstable();
            v
        };

        let mut queue: VecDeque<(Vec<QubitId>, Vec<usize>)> = VecDeque::new();
        let mut seen: HashSet<(QubitId, Vec<usize>)> = HashSet::new();
        for &s in &sources {
            let diff = diff_after(&base_diff, s);
            if diff.is_empty() {
                return Some(vec![s]);
            }
            if seen.insert((s, diff.clone())) {
                queue.push_back((vec![s], diff));
            }
        }
        let mut expansions = 0usize;
        while let Some((path, diff)) = queue.pop_front() {
            expansions += 1;
            if expansions > 50_000 || path.len() > 16 {
                return None;
            }
            let last = *path.last().unwrap();
            for &r in &adj[last] {
                if path.contains(&r) {
                    continue;
                }
                let next_diff = diff_after(&diff, r);
                let mut next_path = path.clone();
                next_path.push(r);
                if next_diff.is_empty() {
                    return Some(next_path);
                }
                if seen.insert((r, next_diff.clone())) {
                    queue.push_back((next_path, next_diff));
                }
            }
        }
        None
    }

    fn chain_solve(&self, targets: &[usize]) -> Vec<QubitId> {
        let cols: Vec<QubitId> = (0..self.n_qubits).filter(|&q| !self.mask.get(q)).collect();
        let live: Vec<usize> = (0..self.faces.len()).filter(|&f| self.faces[f].is_some()).collect();
        let mut a = BitMatrix::zeros(live.len(), cols.len());
        let mut b = BitVec::zeros(live.len());
        for (r, &f) in live.iter().enumerate() {
            let support = &self.faces[f].as_ref().unwrap().support;
            for (c, &q) in cols.iter().enumerate() {
                if support.get(q) {
                    a.set(r, c, true);
                }
            }
            if targets.contains(&f) {
                b.set(r, true);
            }
        }
        let x = gf2::solve(&a, &b)
            .expect("correction chain must exist in a connected reconstructed lattice");
        x.iter_ones().map(|c| cols[c]).collect()
    }

    /// Structural audit of the record against its source lattice.
    pub fn validate(&self, lat: &Lattice) -> Result<(), String> {
        let n = lat.n_qubits();
        if n != self.n_qubits {
            return Err("qubit count mismatch".into());
        }
        // Mask is exactly losses plus twins.
        let mut expect = BitVec::zeros(n);
        for &q in &self.losses {
            expect.set(q, true);
        }
        for d in &self.dimers {
            expect.set(d.dimer.q0, true);
            expect.set(d.dimer.q1, true);
        }
        if expect != self.mask {
            return Err("mask differs from losses plus twins".into());
        }
        let masked = self.mask.count_ones();
        if masked > 2 * self.losses.len() {
            return Err("mask larger than twice the losses".into());
        }
        let frac = (n - masked) as f64 / n as f64;
        if (frac - self.remaining_fraction).abs() > 1e-12 {
            return Err("remaining_fraction inconsistent with mask".into());
        }

        // Faces: no support on masked qubits; even weight unless flagged;
        // pairwise commuting.
        let live: Vec<&RecFace> = self.faces.iter().flatten().collect();
        for f in &live {
            let mut overlap = f.support.clone();
            overlap.and_assign(&self.mask);
            if !overlap.is_zero() {
                return Err("face keeps support on a masked qubit".into());
            }
            if f.support.count_ones() % 2 != 0 && self.isolated.is_empty() {
                return Err("odd-weight face without isolated losses".into());
            }
        }
        for (i, f) in live.iter().enumerate() {
            for g in &live[i + 1..] {
                let mut o = f.support.clone();
                o.and_assign(&g.support);
                if o.count_ones() % 2 != 0 {
                    return Err("anticommuting face pair".into());
                }
            }
        }

        // Edges: endpoints present and distinct, one link per color per qubit.
        let mut slots: HashMap<(QubitId, Color), usize> = HashMap::new();
        for e in &self.edges {
            if e.q[0] == e.q[1] {
                return Err("self-loop link".into());
            }
            for q in e.q {
                if self.mask.get(q) {
                    return Err("link touches a masked qubit".into());
                }
                *slots.entry((q, e.color)).or_insert(0) += 1;
            }
        }
        if slots.values().any(|&c| c > 1) {
            return Err("qubit carries two links of one color".into());
        }
        // Trivalent in the bulk: an empty slot must be original or opened.
        let opened: HashSet<(QubitId, Color)> = self.opened.iter().copied().collect();
        for q in 0..n {
            if self.mask.get(q) {
                continue;
            }
            for &c in &COLORS {
                let originally_open = lat.qubit_edges[q][c.index()].is_none();
                if !slots.contains_key(&(q, c)) && !originally_open && !opened.contains(&(q, c)) {
                    // A neighbor excision without reseal also opens the slot;
                    // those are all in `opened`, so anything else is a bug.
                    return Err(format!("bulk qubit {q} lost its {c} link"));
                }
            }
        }
        Ok(())
    }

    /// Compact JSON export: losses, dimers, mask and remaining fraction.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "geometry": self.geometry.to_string(),
            "variant": self.variant.to_string(),
            "distance": self.distance,
            "n": self.n_qubits,
            "losses": self.losses,
            "dimers": self.dimers.iter().map(|d| {
                serde_json::json!([d.dimer.q0, d.dimer.q1, d.dimer.color.letter()])
            }).collect::<Vec<_>>(),
            "isolated": self.isolated,
            "mask": self.mask.iter_ones().collect::<Vec<_>>(),
            "remaining_fraction": self.remaining_fraction,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Geometry, Variant};

    /// Dropping all three links of a bulk qubit and excising it exercises the
    /// three-face path directly: two composed products in fresh slots, the
    /// constituents retired, events in compose-then-delete order.
    #[test]
    fn isolated_three_face_compose() {
        let lat = build_lattice(Geometry::F666, Variant::Triangular, 9).unwrap();
        let mut st = CodeState::new(&lat);
        let q = (0..lat.n_qubits())
            .find(|&q| {
                lat.qubit_edges[q].iter().all(Option::is_some)
                    && lat.qubit_plaqs[q].iter().all(Option::is_some)
            })
            .unwrap();
        for slot in 0..3 {
            let e = st.qubit_edges[q][slot].unwrap();
            st.remove_edge(e);
        }
        let f_before = st.faces.len();
        let n_faces_before = st.n_faces;
        let mut lives: Vec<usize> = st
            .qubit_faces[q]
            .iter()
            .filter_map(|&f| st.live_face(f))
            .collect();
        lives.sort_unstable_by_key(|&f| (st.faces[f].color.index(), f));
        assert_eq!(lives.len(), 3);
        let sup: Vec<BitVec> = lives.iter().map(|&f| st.faces[f].support.clone()).collect();

        st.excise_isolated(q);

        assert_eq!(st.faces.len(), f_before + 2);
        assert_eq!(st.n_faces, n_faces_before - 1);
        for (i, pair) in sup.windows(2).enumerate() {
            let product = &st.faces[f_before + i];
            assert!(product.alive);
            assert_eq!(product.color, st.faces[lives[i]].color);
            let mut want = pair[0].clone();
            want.xor_assign(&pair[1]);
            assert_eq!(product.support, want);
            assert!(!product.support.get(q));
        }
        for &f in &lives {
            assert!(!st.faces[f].alive);
        }
        let tail = &st.events[st.events.len() - 5..];
        assert_eq!(tail[0], FaceEvent::Compose { face: f_before, parts: [lives[0], lives[1]] });
        assert_eq!(tail[1], FaceEvent::Compose { face: f_before + 1, parts: [lives[1], lives[2]] });
        for (i, &f) in lives.iter().enumerate() {
            assert_eq!(tail[2 + i], FaceEvent::Delete { face: f });
        }
    }
}
