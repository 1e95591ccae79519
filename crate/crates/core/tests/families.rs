//! Builds every supported family over a ladder of distances and runs the full
//! structural self-check, plus closed-form qubit and face counts.

use twinperc::lattice::{build_lattice, Geometry, Variant};

#[test]
fn square_488_ladder() {
    for d in (4..=20).step_by(2) {
        let lat = build_lattice(Geometry::F488, Variant::Square, d).unwrap();
        lat.validate()
            .unwrap_or_else(|e| panic!("4.8.8 square d={d}: {e}"));
        assert_eq!(lat.n_qubits(), 2 * d * d - 4 * d + 4, "qubits at d={d}");
        assert_eq!(lat.plaquettes.len(), (d - 1) * (d - 1), "faces at d={d}");
        assert_eq!(lat.k, 2);
    }
}

#[test]
fn square_488_large() {
    let lat = build_lattice(Geometry::F488, Variant::Square, 36).unwrap();
    lat.validate().unwrap();
    assert_eq!(lat.n_qubits(), 2452);
}

#[test]
fn triangular_488_ladder() {
    for d in (3..=19).step_by(2) {
        let lat = build_lattice(Geometry::F488, Variant::Triangular, d).unwrap();
        lat.validate()
            .unwrap_or_else(|e| panic!("4.8.8 triangular d={d}: {e}"));
        assert_eq!(lat.n_qubits(), (d * d + 2 * d - 1) / 2, "qubits at d={d}");
        assert_eq!(lat.k, 1);
    }
}

#[test]
fn triangular_666_ladder() {
    for d in (3..=19).step_by(2) {
        let lat = build_lattice(Geometry::F666, Variant::Triangular, d).unwrap();
        lat.validate()
            .unwrap_or_else(|e| panic!("6.6.6 triangular d={d}: {e}"));
        assert_eq!(lat.n_qubits(), (3 * d * d + 1) / 4, "qubits at d={d}");
        assert_eq!(lat.k, 1);
    }
}

#[test]
fn square_666_ladder() {
    for d in (4..=20).step_by(2) {
        let lat = build_lattice(Geometry::F666, Variant::Square, d).unwrap();
        lat.validate()
            .unwrap_or_else(|e| panic!("6.6.6 square d={d}: {e}"));
        assert_eq!(lat.n_qubits(), (3 * d * d - 4 * d + 4) / 2, "qubits at d={d}");
        assert_eq!(lat.k, 2);
    }
}

#[test]
fn smallest_triangular_666_is_steane() {
    let lat = build_lattice(Geometry::F666, Variant::Triangular, 3).unwrap();
    assert_eq!(lat.n_qubits(), 7);
    assert_eq!(lat.plaquettes.len(), 3);
    for p in &lat.plaquettes {
        assert_eq!(p.qubits.len(), 4);
    }
}

#[test]
fn distance_parity_rejected() {
    assert!(build_lattice(Geometry::F488, Variant::Square, 5).is_err());
    assert!(build_lattice(Geometry::F488, Variant::Triangular, 4).is_err());
    assert!(build_lattice(Geometry::F666, Variant::Square, 3).is_err());
    assert!(build_lattice(Geometry::F666, Variant::Triangular, 2).is_err());
}
