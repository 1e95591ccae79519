//! End-to-end drive of the library surface: build every patch family,
//! sample losses, reconstruct, validate the record and emit one JSON line
//! per run. Exits nonzero on any validation failure.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twinperc::lattice::{build_lattice, Geometry, Variant};
use twinperc::reconstruction::{reconstruct, sample_losses, PauliType};

fn main() {
    let cases = [
        (Geometry::F488, Variant::Square, 12),
        (Geometry::F488, Variant::Triangular, 13),
        (Geometry::F666, Variant::Square, 12),
        (Geometry::F666, Variant::Triangular, 13),
    ];
    for (geometry, variant, distance) in cases {
        let lat = build_lattice(geometry, variant, distance).expect("buildable patch");
        lat.validate().expect("valid patch");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let losses = sample_losses(&lat, 0.10, &mut rng);
        let record = reconstruct(&lat, &losses, rng);
        record.validate(&lat).expect("valid reconstruction");
        let chains: usize = (0..record.dimers.len())
            .map(|i| record.correction_chain(i, PauliType::X).support.len())
            .sum();
        let mut line = record.to_json();
        line["total_chain_weight"] = chains.into();
        println!("{line}");
    }
}
