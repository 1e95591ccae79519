//! 4.8.8 (square-octagon) patch families.
//!
//! Substrate: diamonds (weight-4 red faces) indexed by (i, j) with qubits
//! N/E/S/W around center (4i, 4j), connected by horizontal links E(i,j)-W(i+1,j)
//! and vertical links N(i,j)-S(i,j+1). Octagons sit between diamond quartets.
//! On the square patch a boundary octagon loses the slots of absent diamonds
//! and the cycle re-closes across the gap. The triangular patch instead keeps
//! its hypotenuse octagons whole, so each carries two stub qubits of the
//! absent diamond beyond the diagonal, and seals the boundary with quarter
//! octagons: four-qubit runs whose connector edges into the missing diamonds
//! stay red, which is what gives the diagonal a red side.

use crate::color::Color;

use super::build::{FaceSpec, RawPatch};
use super::{CornerEvent, Geometry, Lattice, QubitId, Variant};

type Coord = (i32, i32);

fn qn(i: i32, j: i32) -> Coord {
    (4 * i, 4 * j + 1)
}
fn qe(i: i32, j: i32) -> Coord {
    (4 * i + 1, 4 * j)
}
fn qs(i: i32, j: i32) -> Coord {
    (4 * i, 4 * j - 1)
}
fn qw(i: i32, j: i32) -> Coord {
    (4 * i - 1, 4 * j)
}

/// Octagon cycle slots at quad position (i, j), paired with the diamond each
/// qubit belongs to.
fn oct_slots(i: i32, j: i32) -> [(Coord, (i32, i32)); 8] {
    [
        (qe(i, j), (i, j)),
        (qw(i + 1, j), (i + 1, j)),
        (qn(i + 1, j), (i + 1, j)),
        (qs(i + 1, j + 1), (i + 1, j + 1)),
        (qw(i + 1, j + 1), (i + 1, j + 1)),
        (qe(i, j + 1), (i, j + 1)),
        (qs(i, j + 1), (i, j + 1)),
        (qn(i, j), (i, j)),
    ]
}

fn diamond_face(i: i32, j: i32) -> FaceSpec {
    FaceSpec {
        color: Color::Red,
        cycle: vec![qn(i, j), qe(i, j), qs(i, j), qw(i, j)],
    }
}

/// Quad face at position (i, j) keeping only slots whose diamond satisfies
/// `present`. Emitted by the caller only when the kept run is a valid face.
fn filtered_quad(i: i32, j: i32, color: Color, present: impl Fn(i32, i32) -> bool) -> FaceSpec {
    let cycle = oct_slots(i, j)
        .iter()
        .filter(|(_, d)| present(d.0, d.1))
        .map(|&(q, _)| q)
        .collect();
    FaceSpec { color, cycle }
}

/// Square patch: diamonds fill |i| + |j| <= m with m = (d-2)/2. All four
/// sides are diagonal, so every boundary quad is a hexagon and each side
/// exposes quads of a single parity. Red runs tip to tip.
pub fn square(d: usize) -> Result<Lattice, String> {
    let m = (d as i32 - 2) / 2;
    let dia = move |i: i32, j: i32| i.abs() + j.abs() <= m;
    let quad_color = |i: i32, j: i32| {
        if (i + j - m).rem_euclid(2) == 0 {
            Color::Blue
        } else {
            Color::Green
        }
    };

    let mut faces = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            if dia(i, j) {
                faces.push(diamond_face(i, j));
            }
        }
    }
    for j in -m - 1..=m {
        for i in -m - 1..=m {
            let owners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
            if owners.iter().filter(|d| dia(d.0, d.1)).count() >= 3 {
                faces.push(filtered_quad(i, j, quad_color(i, j), dia));
            }
        }
    }
    let patch = RawPatch::from_faces(&faces, &[])?;

    let mut blue = [Vec::new(), Vec::new()];
    for q in patch.dangling_ends(Color::Blue) {
        let (x, y) = patch.coord(q);
        if x + y == 0 {
            return Err(format!("blue dangle at ({x},{y}) on the tip diagonal"));
        }
        blue[usize::from(x + y > 0)].push(q);
    }
    let mut green = [Vec::new(), Vec::new()];
    for q in patch.dangling_ends(Color::Green) {
        let (x, y) = patch.coord(q);
        if x == y {
            return Err(format!("green dangle at ({x},{y}) on the tip diagonal"));
        }
        green[usize::from(y < x)].push(q);
    }
    if !patch.dangling_ends(Color::Red).is_empty() {
        return Err("red edges should never dangle on a square patch".into());
    }
    // Red attaches only at the south and north tips; the east and west tips
    // stay undesignated.
    let s_tip = patch
        .id(qs(0, -m))
        .ok_or_else(|| "missing south tip".to_string())?;
    let n_tip = patch
        .id(qn(0, m))
        .ok_or_else(|| "missing north tip".to_string())?;
    let [blue_a, blue_b] = blue;
    let [green_a, green_b] = green;
    let borders = [
        [vec![s_tip], vec![n_tip]],
        [green_a, green_b],
        [blue_a, blue_b],
    ];

    let ev = |color: Color, side, leg_a: (Color, usize), leg_b| CornerEvent { color, side, leg_a, leg_b };
    let (r, g, b) = (Color::Red, Color::Green, Color::Blue);
    let events = vec![
        // south tip: red A, blue A (south-west side), green B (south-east)
        ev(r, 0, (b, 0), (g, 1)),
        ev(b, 0, (r, 0), (g, 1)),
        ev(g, 1, (r, 0), (b, 0)),
        // north tip: red B, blue B (north-east side), green A (north-west)
        ev(r, 1, (b, 1), (g, 0)),
        ev(b, 1, (r, 1), (g, 0)),
        ev(g, 0, (r, 1), (b, 1)),
    ];
    patch.finish(Geometry::F488, Variant::Square, d, borders, events)
}

/// Triangular patch: diamonds fill the corner triangle i, j >= 0, i + j <= t
/// with t = (d-3)/2. Whole octagons run up to the hypotenuse row inclusive,
/// quarter octagons seal the diagonal above it and leave every connector into
/// the absent diamonds dangling, which makes the hypotenuse the red side. The
/// bottom and left sides are covered by half octagons on alternating
/// positions, with phases locked so each corner hosts the right attachment
/// color; each border's partner is the opposite corner.
pub fn triangular(d: usize) -> Result<Lattice, String> {
    let t = (d as i32 - 3) / 2;
    let pb = (t + 1).rem_euclid(2);
    let pv = t.rem_euclid(2);
    let cpar = |p: i32| {
        if p.rem_euclid(2) == 0 {
            Color::Green
        } else {
            Color::Blue
        }
    };
    let c_bottom = cpar(pb);
    let c_left = cpar(pv);
    let dia = move |i: i32, j: i32| i >= 0 && j >= 0 && i + j <= t;

    let mut faces = Vec::new();
    for j in 0..=t {
        for i in 0..=(t - j) {
            faces.push(diamond_face(i, j));
        }
    }
    // Octagons, kept whole up to and including the hypotenuse row, where the
    // two slots of the absent diagonal diamond become boundary stubs.
    for j in 0..t {
        for i in 0..(t - j) {
            faces.push(FaceSpec {
                color: cpar(i + j),
                cycle: oct_slots(i, j).iter().map(|&(q, _)| q).collect(),
            });
        }
    }
    // Bottom and left half octagons, every other position.
    for i in 0..t {
        if i.rem_euclid(2) == pb {
            faces.push(filtered_quad(i, -1, cpar(i - 1), dia));
        }
    }
    for j in 0..t {
        if j.rem_euclid(2) == pv {
            faces.push(filtered_quad(-1, j, cpar(j - 1), dia));
        }
    }
    // Hypotenuse quarter octagons: one above each hypotenuse diamond, the
    // seal running from the west stub back to the south stub.
    for i in 0..=t {
        let j = t - i;
        faces.push(FaceSpec {
            color: cpar(t),
            cycle: vec![qs(i, j + 1), qn(i, j), qe(i, j), qw(i + 1, j)],
        });
    }
    // North-west corner quarter: run of O(-1, t) ending the left column.
    faces.push(FaceSpec {
        color: cpar(t - 1),
        cycle: vec![qe(-1, t), qw(0, t), qn(0, t), qs(0, t + 1)],
    });
    let patch = RawPatch::from_faces(&faces, &[])?;

    // Red dangles exactly along the hypotenuse strip (connector stubs plus
    // the two end quarters).
    let red_a = patch.dangling_ends(Color::Red);
    for &q in &red_a {
        let (x, y) = patch.coord(q);
        if x + y < 4 * t - 3 {
            return Err(format!("red dangle at ({x},{y}) off the hypotenuse"));
        }
    }
    let sw = if pb == 1 { qs(0, 0) } else { qw(0, 0) };
    let red_b = patch
        .id(sw)
        .ok_or_else(|| "missing south-west red corner".to_string())?;

    // Side dangles of the two quad colors attach along the matching straight
    // side; the leftovers point into foreign borders and attach nothing.
    let split = |color: Color, f: &dyn Fn(i32, i32) -> bool| -> Vec<QubitId> {
        patch
            .dangling_ends(color)
            .into_iter()
            .filter(|&q| {
                let (x, y) = patch.coord(q);
                f(x, y)
            })
            .collect()
    };
    let bottom = split(c_bottom, &|_, y| y <= -1);
    let left = split(c_left, &|x, _| x <= 0);
    let nw = patch
        .id(qe(-1, t))
        .ok_or_else(|| "missing north-west corner stub".to_string())?;
    let se = patch
        .id(qw(t + 1, 0))
        .ok_or_else(|| "missing south-east corner stub".to_string())?;

    let mut borders: [[Vec<QubitId>; 2]; 3] = Default::default();
    borders[Color::Red.index()] = [red_a, vec![red_b]];
    borders[c_bottom.index()] = [bottom, vec![nw]];
    borders[c_left.index()] = [left, vec![se]];

    let ev = |color: Color, side, leg_a: (Color, usize), leg_b| CornerEvent { color, side, leg_a, leg_b };
    let events = vec![
        // south-west corner: red B, bottom side, left side
        ev(Color::Red, 1, (c_bottom, 0), (c_left, 0)),
        ev(c_bottom, 0, (c_left, 0), (Color::Red, 1)),
        ev(c_left, 0, (c_bottom, 0), (Color::Red, 1)),
        // north-west corner: bottom's partner, left side, red side
        ev(c_bottom, 1, (c_left, 0), (Color::Red, 0)),
        ev(c_left, 0, (c_bottom, 1), (Color::Red, 0)),
        ev(Color::Red, 0, (c_bottom, 1), (c_left, 0)),
        // south-east corner: left's partner, bottom side, red side
        ev(c_left, 1, (c_bottom, 0), (Color::Red, 0)),
        ev(c_bottom, 0, (c_left, 1), (Color::Red, 0)),
        ev(Color::Red, 0, (c_bottom, 0), (c_left, 1)),
    ];
    patch.finish(Geometry::F488, Variant::Triangular, d, borders, events)
}
