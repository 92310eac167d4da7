mod common;

use atomflow_core::structure::{parse_poscar, serialize_poscar, CrystalStructure, Lattice, StructureError};
use proptest::prelude::*;

fn assert_close(a: &CrystalStructure, b: &CrystalStructure, tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.num_sites(), b.num_sites());
    prop_assert_eq!(a.comment(), b.comment());
    for (ra, rb) in a.lattice().matrix().iter().zip(b.lattice().matrix()) {
        for (x, y) in ra.iter().zip(rb) {
            prop_assert!((x - y).abs() <= tol, "lattice {} vs {}", x, y);
        }
    }
    for (sa, sb) in a.sites().iter().zip(b.sites()) {
        prop_assert_eq!(sa.element(), sb.element());
        for (x, y) in sa.frac().iter().zip(sb.frac()) {
            prop_assert!((x - y).abs() <= tol, "frac {} vs {}", x, y);
        }
    }
    Ok(())
}

fn counts(s: &CrystalStructure) -> std::collections::BTreeMap<&'static str, usize> {
    s.composition().into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn poscar_round_trip(s in common::structure(12)) {
        let text = serialize_poscar(&s);
        let back = parse_poscar(&text).unwrap();
        assert_close(&back, &s.grouped(), 1e-12)?;
        // serialization is a fixed point after one pass
        prop_assert_eq!(serialize_poscar(&back), text);
    }

    #[test]
    fn supercell_scales_counts_and_volume(s in common::structure(6), n in [1u32..=4, 1u32..=4, 1u32..=4]) {
        let before = s.clone();
        let sc = s.make_supercell(n[0], n[1], n[2]).unwrap();
        let k = (n[0] * n[1] * n[2]) as usize;
        prop_assert_eq!(sc.num_sites(), k * s.num_sites());
        let expect: std::collections::BTreeMap<_, _> = counts(&s).into_iter().map(|(e, c)| (e, c * k)).collect();
        prop_assert_eq!(counts(&sc), expect);
        prop_assert!((sc.volume() / s.volume() - k as f64).abs() < 1e-12);
        prop_assert_eq!(s, before);
    }

    #[test]
    fn cubic_d_spacing_closed_form(a in 2.0f64..10.0, hkl in [-6i32..=6, -6i32..=6, -6i32..=6]) {
        prop_assume!(hkl != [0, 0, 0]);
        let l = Lattice::cubic(a).unwrap();
        let d = atomflow_core::structure::d_spacing(&l, hkl).unwrap();
        let closed = a / ((hkl[0] * hkl[0] + hkl[1] * hkl[1] + hkl[2] * hkl[2]) as f64).sqrt();
        prop_assert!((d - closed).abs() < 1e-10);
    }

    #[test]
    fn operations_are_pure(s in common::structure(8), idx in 0usize..8, el in 0usize..common::POOL.len()) {
        let before = s.clone();
        let _ = s.substitute_site(idx, common::POOL[el]);
        let _ = s.create_vacancy(idx);
        let _ = s.make_supercell(2, 1, 1);
        let _ = s.d_spacing([1, 0, 0]);
        let _ = serialize_poscar(&s);
        prop_assert_eq!(&s, &before);
        match s.create_vacancy(idx) {
            Ok(v) => {
                prop_assert_eq!(v.num_sites(), s.num_sites() - 1);
                // removal keeps a valid, re-parseable structure
                prop_assert!(parse_poscar(&serialize_poscar(&v)).is_ok());
            }
            Err(e) => {
                let expected = matches!(e, StructureError::IndexOutOfRange { .. } | StructureError::EmptyStructure);
                prop_assert!(expected, "unexpected error {:?}", e);
            }
        }
    }

    #[test]
    fn wrapped_coordinates_stay_in_unit_interval(s in common::structure(8)) {
        for site in s.sites() {
            for x in site.frac() {
                prop_assert!((0.0..1.0).contains(&x));
            }
        }
    }
}
