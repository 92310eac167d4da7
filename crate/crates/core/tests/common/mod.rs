#![allow(dead_code)]

pub mod agent;

use atomflow_core::structure::{CrystalStructure, Lattice, Site};
use proptest::prelude::*;

pub const POOL: [&str; 10] = ["H", "C", "N", "O", "Al", "Si", "Ga", "Cu", "Sr", "Ti"];

pub fn silicon() -> CrystalStructure {
    let base = [[0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
    let mut sites = Vec::new();
    for b in base {
        sites.push(Site::new("Si", b).unwrap());
        sites.push(Site::new("Si", [b[0] + 0.25, b[1] + 0.25, b[2] + 0.25]).unwrap());
    }
    CrystalStructure::new(Lattice::cubic(5.43).unwrap(), sites, "Si").unwrap()
}

pub fn fcc(el: &str, a: f64) -> CrystalStructure {
    let sites = [[0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
        .iter()
        .map(|f| Site::new(el, *f).unwrap())
        .collect();
    CrystalStructure::new(Lattice::cubic(a).unwrap(), sites, "").unwrap()
}

/// Lower-triangular cells with mild shear, so the determinant is the
/// product of the diagonal and always positive.
pub fn lattice() -> impl Strategy<Value = Lattice> {
    ([2.5f64..7.0, 2.5f64..7.0, 2.5f64..7.0], [-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0]).prop_map(|(d, s)| {
        Lattice::new([[d[0], 0.0, 0.0], [s[0], d[1], 0.0], [s[1], s[2], d[2]]]).unwrap()
    })
}

pub fn structure(max_sites: usize) -> impl Strategy<Value = CrystalStructure> {
    (
        lattice(),
        prop::collection::vec((0..POOL.len(), [-1.0f64..2.0, -1.0f64..2.0, -1.0f64..2.0]), 1..=max_sites),
        "[a-zA-Z0-9 ]{0,20}",
    )
        .prop_filter_map("sites too close", |(l, sites, comment)| {
            let sites = sites.into_iter().map(|(e, f)| Site::new(POOL[e], f).unwrap()).collect();
            CrystalStructure::new(l, sites, comment).ok()
        })
}
