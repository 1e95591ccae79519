//! 6.6.6 (hexagonal) patch families.
//!
//! Substrate: the triangular lattice in skewed coordinates, where site (x, y)
//! neighbors (x±1, y), (x, y±1) and (x±1, y±1). Sites with (x+y) mod 3 == 2
//! host faces, every other site hosts a qubit, and a face's support is its
//! present qubit neighbors walked in hexagonal cyclic order (boundary gaps
//! close into seal edges). Face color is (x−y) mod 3.

use crate::color::Color;

use super::build::{FaceSpec, RawPatch};
use super::{CornerEvent, Geometry, Lattice, QubitId, Variant};

const HEX_ORDER: [(i32, i32); 6] = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)];

fn is_qubit_site(x: i32, y: i32) -> bool {
    (x + y).rem_euclid(3) != 2
}

fn face_color(x: i32, y: i32) -> Color {
    Color::from_index((x - y).rem_euclid(3) as usize)
}

fn collect_faces(region: impl Fn(i32, i32) -> bool, bounds: (i32, i32, i32, i32)) -> Vec<FaceSpec> {
    let (x0, x1, y0, y1) = bounds;
    let mut faces = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            if !region(x, y) || is_qubit_site(x, y) {
                continue;
            }
            let cycle: Vec<(i32, i32)> = HEX_ORDER
                .iter()
                .map(|&(dx, dy)| (x + dx, y + dy))
                .filter(|&(qx, qy)| region(qx, qy) && is_qubit_site(qx, qy))
                .collect();
            faces.push(FaceSpec {
                color: face_color(x, y),
                cycle,
            });
        }
    }
    faces
}

/// Triangular patch: region 0 <= y <= x <= X with X = 3(d-1)/2. The bottom
/// (y = 0), the diagonal (y = x) and the vertical (x = X) sides expose the
/// three border colors; the opposite corner of each side carries the paired
/// single-qubit border.
pub fn triangular(d: usize) -> Result<Lattice, String> {
    let x_max = 3 * (d as i32 - 1) / 2;
    let region = |x: i32, y: i32| 0 <= y && y <= x && x <= x_max;
    let faces = collect_faces(region, (0, x_max, 0, x_max));
    let patch = RawPatch::from_faces(&faces, &[])?;

    let corner = |x: i32, y: i32| -> Result<Vec<QubitId>, String> {
        patch
            .id((x, y))
            .map(|q| vec![q])
            .ok_or_else(|| format!("expected corner qubit at ({x},{y})"))
    };
    // Side dangles live on exactly one side each; the paired border is the
    // single corner qubit opposite that side.
    let borders = [
        [patch.dangling_ends(Color::Red), corner(0, 0)?],
        [patch.dangling_ends(Color::Green), corner(x_max, x_max)?],
        [patch.dangling_ends(Color::Blue), corner(x_max, 0)?],
    ];
    for (ci, sides) in borders.iter().enumerate() {
        for &q in &sides[0] {
            let (x, y) = patch.coord(q);
            let on_expected_side = match ci {
                0 => x == x_max || x == x_max - 1,
                1 => y == 0 || y == 1,
                _ => x == y || x == y + 1,
            };
            if !on_expected_side {
                return Err(format!(
                    "color-{ci} dangle at ({x},{y}) off its side"
                ));
            }
        }
    }

    // One event per (border, corner) pair at which both other-color borders
    // are present. Every corner of the triangle hosts three: the two sides
    // that meet there and the opposite side's single-qubit border.
    let ev = |color: Color, side, leg_a: (Color, usize), leg_b| CornerEvent { color, side, leg_a, leg_b };
    let (r, g, b) = (Color::Red, Color::Green, Color::Blue);
    let events = vec![
        // corner (0,0): red B, green A (bottom), blue A (left)
        ev(r, 1, (g, 0), (b, 0)),
        ev(g, 0, (r, 1), (b, 0)),
        ev(b, 0, (r, 1), (g, 0)),
        // corner (X,X): green B, red A (right), blue A (left)
        ev(g, 1, (r, 0), (b, 0)),
        ev(r, 0, (g, 1), (b, 0)),
        ev(b, 0, (r, 0), (g, 1)),
        // corner (X,0): blue B, red A (right), green A (bottom)
        ev(b, 1, (r, 0), (g, 0)),
        ev(r, 0, (g, 0), (b, 1)),
        ev(g, 0, (r, 0), (b, 1)),
    ];
    patch.finish(Geometry::F666, Variant::Triangular, d, borders, events)
}

/// Square patch: parallelogram 0 <= y <= L, y <= x <= y+L, plus one apex
/// qubit at (L, L+1) that closes the top-left corner face into a 4-cycle
/// (without it that face would be a triangle and the patch would encode one
/// qubit too many). Color 1 runs bottom to top, color 2 left to right, and
/// color 0 joins the two corners where unlike sides meet: (0,0) and (2L,L).
pub fn square(d: usize) -> Result<Lattice, String> {
    let ll = square_dim(d);
    let region = move |x: i32, y: i32| {
        (0 <= y && y <= ll && y <= x && x <= y + ll) || (x, y) == (ll, ll + 1)
    };
    let faces = collect_faces(region, (0, 2 * ll, 0, ll));
    let patch = RawPatch::from_faces(&faces, &[])?;

    let mut bottom = Vec::new();
    let mut top = Vec::new();
    for q in patch.dangling_ends(Color::Green) {
        let (x, y) = patch.coord(q);
        if y == 0 {
            bottom.push(q);
        } else if y >= ll {
            top.push(q);
        } else {
            return Err(format!("color-1 dangle at ({x},{y}) off both rows"));
        }
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    for q in patch.dangling_ends(Color::Blue) {
        let (x, y) = patch.coord(q);
        if x - y <= 0 {
            left.push(q);
        } else if x - y >= ll {
            right.push(q);
        } else {
            return Err(format!("color-2 dangle at ({x},{y}) off both columns"));
        }
    }
    if !patch.dangling_ends(Color::Red).is_empty() {
        return Err("color-0 edges should never dangle on a square patch".into());
    }
    let corner = |x: i32, y: i32| -> Result<Vec<QubitId>, String> {
        patch
            .id((x, y))
            .map(|q| vec![q])
            .ok_or_else(|| format!("expected corner qubit at ({x},{y})"))
    };
    let borders = [
        [corner(0, 0)?, corner(2 * ll, ll)?],
        [bottom, top],
        [left, right],
    ];

    // The color-0 corners are the two where unlike sides meet; the other two
    // corners join a side to its own opposite and host no events.
    let ev = |color: Color, side, leg_a: (Color, usize), leg_b| CornerEvent { color, side, leg_a, leg_b };
    let (r, g, b) = (Color::Red, Color::Green, Color::Blue);
    let events = vec![
        // corner (0,0): red A, green A (bottom), blue A (left)
        ev(r, 0, (g, 0), (b, 0)),
        ev(g, 0, (r, 0), (b, 0)),
        ev(b, 0, (r, 0), (g, 0)),
        // corner (2L,L): red B, green B (top), blue B (right)
        ev(r, 1, (g, 1), (b, 1)),
        ev(g, 1, (r, 1), (b, 1)),
        ev(b, 1, (r, 1), (g, 1)),
    ];
    patch.finish(Geometry::F666, Variant::Square, d, borders, events)
}

/// Side length of the parallelogram for a given distance. The congruence
/// 3d/2 - 2 == 1 (mod 3) keeps the top and bottom rows color-1 sides and the
/// left and right columns color-2 sides.
fn square_dim(d: usize) -> i32 {
    3 * d as i32 / 2 - 2
}
