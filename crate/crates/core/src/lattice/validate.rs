//! Structural and algebraic self-checks for built lattices.

use crate::color::{Color, COLORS};
use crate::gf2::BitVec;

use super::Lattice;

pub fn validate(lat: &Lattice) -> Result<(), String> {
    faces(lat)?;
    overlaps(lat)?;
    edge_rules(lat)?;
    qubit_rules(lat)?;

    let chi = lat.euler_characteristic();
    if chi != 1 {
        return Err(format!("Euler characteristic {chi} != 1"));
    }

    let expect_k = match lat.variant {
        super::Variant::Square => 2,
        super::Variant::Triangular => 1,
    };
    if lat.k != expect_k {
        return Err(format!("k = {} but {} patches encode {expect_k}", lat.k, lat.variant));
    }

    paths(lat)?;
    Ok(())
}

fn faces(lat: &Lattice) -> Result<(), String> {
    for (pi, p) in lat.plaquettes.iter().enumerate() {
        let w = p.qubits.len();
        if w < 4 || w % 2 != 0 {
            return Err(format!("plaquette {pi} has weight {w}"));
        }
        if !p.qubits.windows(2).all(|w| w[0] < w[1]) {
            return Err(format!("plaquette {pi} support not sorted/distinct"));
        }
        // The edges of this face must induce a single closed cycle: every
        // support qubit sees exactly two face edges.
        let mut deg = vec![0usize; w];
        let mut nedges = 0usize;
        for (ei, owners) in lat.edge_faces.iter().enumerate() {
            if owners.contains(&Some(pi)) {
                nedges += 1;
                for q in lat.edges[ei].q {
                    let slot = p
                        .qubits
                        .binary_search(&q)
                        .map_err(|_| format!("edge {ei} of plaquette {pi} leaves its support"))?;
                    deg[slot] += 1;
                }
            }
        }
        if nedges != w || deg.iter().any(|&d| d != 2) {
            return Err(format!("plaquette {pi} edges do not form a cycle"));
        }
    }
    Ok(())
}

fn overlaps(lat: &Lattice) -> Result<(), String> {
    let n = lat.n_qubits();
    let rows: Vec<BitVec> = lat
        .plaquettes
        .iter()
        .map(|p| BitVec::from_indices(n, p.qubits.iter().copied()))
        .collect();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let mut t = rows[i].clone();
            t.and_assign(&rows[j]);
            let ov = t.count_ones();
            if ov != 0 && ov != 2 {
                return Err(format!("plaquettes {i},{j} share {ov} qubits"));
            }
            if ov == 2 && lat.plaquettes[i].color == lat.plaquettes[j].color {
                return Err(format!("adjacent plaquettes {i},{j} share a color"));
            }
        }
    }
    Ok(())
}

fn edge_rules(lat: &Lattice) -> Result<(), String> {
    for (ei, e) in lat.edges.iter().enumerate() {
        if e.q[0] == e.q[1] {
            return Err(format!("edge {ei} is a self-loop"));
        }
        match lat.edge_faces[ei] {
            [Some(a), Some(b)] => {
                let want = Color::complement(lat.plaquettes[a].color, lat.plaquettes[b].color);
                if e.color != want {
                    return Err(format!("edge {ei} color {} != complement {want}", e.color));
                }
            }
            [Some(a), None] => {
                if e.color == lat.plaquettes[a].color {
                    return Err(format!("boundary edge {ei} matches its face color"));
                }
            }
            _ => return Err(format!("edge {ei} has no face")),
        }
    }
    Ok(())
}

fn qubit_rules(lat: &Lattice) -> Result<(), String> {
    for q in 0..lat.n_qubits() {
        let deg = lat.qubit_edges[q].iter().flatten().count();
        if !(2..=3).contains(&deg) {
            return Err(format!("qubit {q} has degree {deg}"));
        }
        for c in COLORS {
            if let Some(ei) = lat.qubit_edges[q][c.index()] {
                let e = &lat.edges[ei];
                if e.color != c || !e.q.contains(&q) {
                    return Err(format!("qubit {q} edge map inconsistent at {c}"));
                }
            }
            if let Some(pi) = lat.qubit_plaqs[q][c.index()] {
                let p = &lat.plaquettes[pi];
                if p.color != c || p.qubits.binary_search(&q).is_err() {
                    return Err(format!("qubit {q} plaquette map inconsistent at {c}"));
                }
            }
        }
        if lat.qubit_plaqs[q].iter().flatten().count() == 0 {
            return Err(format!("qubit {q} lies in no plaquette"));
        }
    }
    Ok(())
}

fn paths(lat: &Lattice) -> Result<(), String> {
    let mut reps = Vec::new();
    for c in COLORS {
        let path = lat
            .reference_path(c)
            .ok_or_else(|| format!("{c} borders are not connected"))?;
        // Commutation with every generator.
        for (pi, p) in lat.plaquettes.iter().enumerate() {
            let ov = p.qubits.iter().filter(|q| path.binary_search(q).is_ok()).count();
            if ov % 2 != 0 {
                return Err(format!("{c} path shares {ov} qubits with plaquette {pi}"));
            }
        }
        reps.push((c, path));
    }
    let dmin = reps.iter().map(|(_, p)| p.len()).min().unwrap();
    if dmin != lat.distance {
        return Err(format!("minimum path weight {dmin} != distance {}", lat.distance));
    }
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            let (ca, pa) = &reps[i];
            let (cb, pb) = &reps[j];
            let ov = pa.iter().filter(|q| pb.binary_search(q).is_ok()).count();
            if ov % 2 == 0 {
                return Err(format!("{ca} and {cb} paths share {ov} qubits (want odd)"));
            }
        }
    }
    Ok(())
}
