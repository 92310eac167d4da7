//! Basal-plane lattice matching and slab stacking.
//!
//! Only diagonal in-plane supercells are searched: A is repeated (i, j) times
//! along a1, a2 and B (k, l) times. The mismatch of a candidate is the mean of
//! |i·|a1_A| / (k·|a1_B|) − 1| and |j·|a2_A| / (l·|a2_B|) − 1|.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::structure::{add, cross, dot, norm, scale, sub, CrystalStructure, Lattice, Site, StructureError, Vec3};

pub const DEFAULT_MAX_AREA: f64 = 200.0;
pub const AREA_LIMIT: f64 = 400.0;
pub const DEFAULT_STRAIN_TOL: f64 = 0.05;
pub const GAP: f64 = 2.5;
pub const VACUUM: f64 = 15.0;

const STRAIN_EPS: f64 = 1e-12;
const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterfaceError {
    #[error("max_area must be positive and at most {AREA_LIMIT} Å², got {0}")]
    BadArea(f64),
    #[error("strain_tol must be non-negative, got {0}")]
    BadTolerance(f64),
    #[error("no supercell pair within {max_area} Å² matches to {strain_tol}; {}", describe_best(best))]
    NoMatchWithinTolerance { max_area: f64, strain_tol: f64, best: Option<InterfaceMatch> },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

fn describe_best(best: &Option<InterfaceMatch>) -> String {
    match best {
        Some(m) => format!("best strain {:.4} with cells {:?}", m.strain, m.cells),
        None => "no supercell fits under the area cap".to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterfaceMatch {
    /// (i, j, k, l): A repeated i×j, B repeated k×l.
    pub cells: [u32; 4],
    pub strain: f64,
    pub area_a: f64,
    pub area_b: f64,
}

impl InterfaceMatch {
    fn total_area(&self) -> f64 {
        self.area_a + self.area_b
    }

    /// Smaller strain, then smaller total area, then lexicographic cells.
    fn better_than(&self, other: &Self) -> bool {
        if (self.strain - other.strain).abs() > STRAIN_EPS {
            return self.strain < other.strain;
        }
        if (self.total_area() - other.total_area()).abs() > AREA_EPS {
            return self.total_area() < other.total_area();
        }
        self.cells.cmp(&other.cells) == Ordering::Less
    }
}

fn basal_area(l: &Lattice) -> f64 {
    norm(cross(l.vector(0), l.vector(1)))
}

/// Diagonal in-plane multipliers (n1, n2) whose area stays within `max_area`.
fn multipliers(l: &Lattice, max_area: f64) -> Vec<(u32, u32, f64)> {
    let unit = basal_area(l);
    let mut out = Vec::new();
    let mut n1 = 1u32;
    while n1 as f64 * unit <= max_area {
        let mut n2 = 1u32;
        while (n1 * n2) as f64 * unit <= max_area {
            out.push((n1, n2, (n1 * n2) as f64 * unit));
            n2 += 1;
        }
        n1 += 1;
    }
    out
}

/// Lowest-strain candidate under the area cap regardless of tolerance.
pub fn best_match(a: &Lattice, b: &Lattice, max_area: f64) -> Option<InterfaceMatch> {
    let [la1, la2, _] = a.lengths();
    let [lb1, lb2, _] = b.lengths();
    let mb = multipliers(b, max_area);
    let mut best: Option<InterfaceMatch> = None;
    for (i, j, area_a) in multipliers(a, max_area) {
        for &(k, l, area_b) in &mb {
            let s1 = (i as f64 * la1 / (k as f64 * lb1) - 1.0).abs();
            let s2 = (j as f64 * la2 / (l as f64 * lb2) - 1.0).abs();
            let cand = InterfaceMatch { cells: [i, j, k, l], strain: (s1 + s2) / 2.0, area_a, area_b };
            if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                best = Some(cand);
            }
        }
    }
    best
}

pub fn find_match(a: &Lattice, b: &Lattice, max_area: f64, strain_tol: f64) -> Result<InterfaceMatch, InterfaceError> {
    if !(max_area > 0.0 && max_area <= AREA_LIMIT) {
        return Err(InterfaceError::BadArea(max_area));
    }
    if !(strain_tol >= 0.0) {
        return Err(InterfaceError::BadTolerance(strain_tol));
    }
    match best_match(a, b, max_area) {
        Some(m) if m.strain <= strain_tol => Ok(m),
        best => Err(InterfaceError::NoMatchWithinTolerance { max_area, strain_tol, best }),
    }
}

/// Stacks B, strained onto A's in-plane supercell, above A along the plane
/// normal with a `GAP` Å spacing and `VACUUM` Å of vacuum above B.
pub fn build_interface(
    a: &CrystalStructure,
    b: &CrystalStructure,
    max_area: f64,
    strain_tol: f64,
) -> Result<(CrystalStructure, InterfaceMatch), InterfaceError> {
    let m = find_match(a.lattice(), b.lattice(), max_area, strain_tol)?;
    let [i, j, k, l] = m.cells;
    let sa = a.make_supercell(i, j, 1)?;
    let sb = b.make_supercell(k, l, 1)?;

    let v1 = sa.lattice().vector(0);
    let v2 = sa.lattice().vector(1);
    let normal = {
        let c = cross(v1, v2);
        scale(c, 1.0 / norm(c))
    };
    let nb = {
        let c = cross(sb.lattice().vector(0), sb.lattice().vector(1));
        scale(c, 1.0 / norm(c))
    };
    let height_b = dot(sb.lattice().vector(2), nb).abs();

    // (element, in-plane point, height along the normal)
    let mut atoms: Vec<(&'static str, Vec3, f64)> = Vec::new();
    for idx in 0..sa.num_sites() {
        let r = sa.cartesian(idx);
        let h = dot(r, normal);
        atoms.push((sa.sites()[idx].element(), sub(r, scale(normal, h)), h));
    }
    let a_min = atoms.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    let a_max = atoms.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max);
    let b_heights: Vec<f64> = sb.sites().iter().map(|s| s.frac()[2] * height_b).collect();
    let b_min = b_heights.iter().copied().fold(f64::INFINITY, f64::min);
    let b_base = a_max - a_min + GAP;
    for (site, h) in sb.sites().iter().zip(&b_heights) {
        let f = site.frac();
        let inplane = add(scale(v1, f[0]), scale(v2, f[1]));
        atoms.push((site.element(), inplane, a_min + b_base + (h - b_min)));
    }
    let top = atoms.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max) - a_min;
    let lattice = Lattice::new([v1, v2, scale(normal, top + VACUUM)])?;

    let mut sites = Vec::with_capacity(atoms.len());
    for (el, inplane, h) in atoms {
        let cart = add(inplane, scale(normal, h - a_min));
        sites.push(Site::new(el, lattice.to_fractional(cart))?);
    }
    let comment = format!("{}/{} interface {:?}", a.reduced_formula(), b.reduced_formula(), m.cells);
    Ok((CrystalStructure::new(lattice, sites, comment)?, m))
}
