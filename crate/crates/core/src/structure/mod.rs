//! Crystal structure model, POSCAR I/O and geometric construction.
//!
//! All types are immutable values; every operation returns a new structure.

pub mod elements;
mod lattice;
mod poscar;

use thiserror::Error;

pub use lattice::{Lattice, Mat3, Vec3};
pub(crate) use lattice::{add, cross, dot, norm, scale, sub};
pub use poscar::{parse_poscar, serialize_poscar};

/// Sites closer than this (Å, minimum image) are rejected as duplicates.
pub const MIN_SEPARATION: f64 = 0.25;

/// Largest n1·n2·n3 accepted by [`CrystalStructure::make_supercell`].
pub const SUPERCELL_CAP: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown element symbol '{0}'")]
    UnknownElement(String),
    #[error("element counts sum to {expected} but {found} coordinate rows were found")]
    CountMismatch { expected: usize, found: usize },
    #[error("line {line}: non-finite number '{token}'")]
    NonFiniteNumber { line: usize, token: String },
    #[error("lattice is degenerate or left-handed (det = {det})")]
    InvalidLattice { det: f64 },
    #[error("structure has no sites")]
    EmptyStructure,
    #[error("sites {first} and {second} are {distance:.4} Å apart (minimum {MIN_SEPARATION} Å)")]
    SitesTooClose { first: usize, second: usize, distance: f64 },
    #[error("supercell of {requested} cells exceeds the cap of {SUPERCELL_CAP}")]
    LimitExceeded { requested: u64 },
    #[error("supercell multipliers must be positive, got {0:?}")]
    InvalidMultiplier([u32; 3]),
    #[error("site index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("Miller index (0 0 0) has no d-spacing")]
    ZeroVector,
    #[error("fractional coordinate is not finite")]
    NonFiniteCoordinate,
}

/// An atomic site: element plus wrapped fractional coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    element: &'static str,
    frac: Vec3,
}

fn wrap(x: f64) -> f64 {
    let w = x - x.floor();
    // x.floor() of a tiny negative number gives -1 and w rounds to exactly 1
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl Site {
    pub fn new(element: &str, frac: Vec3) -> Result<Self, StructureError> {
        let element = elements::canonical_symbol(element)
            .ok_or_else(|| StructureError::UnknownElement(element.to_string()))?;
        if frac.iter().any(|v| !v.is_finite()) {
            return Err(StructureError::NonFiniteCoordinate);
        }
        Ok(Self {
            element,
            frac: [wrap(frac[0]), wrap(frac[1]), wrap(frac[2])],
        })
    }

    pub fn element(&self) -> &'static str {
        self.element
    }

    pub fn frac(&self) -> Vec3 {
        self.frac
    }

    pub fn z(&self) -> u8 {
        // element is always a table symbol
        elements::by_symbol(self.element).map(|e| e.z).unwrap_or(0)
    }
}

/// Lattice + ordered sites + POSCAR comment.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalStructure {
    lattice: Lattice,
    sites: Vec<Site>,
    comment: String,
}

impl CrystalStructure {
    /// Builds a structure, enforcing non-emptiness and the minimum-separation check.
    pub fn new(lattice: Lattice, sites: Vec<Site>, comment: impl Into<String>) -> Result<Self, StructureError> {
        let s = Self::from_parts(lattice, sites, comment)?;
        s.check_separation()?;
        Ok(s)
    }

    /// Like `new` but skips the separation check. Only used for structures
    /// derived from an already validated one (periodic images keep distances).
    fn from_parts(lattice: Lattice, sites: Vec<Site>, comment: impl Into<String>) -> Result<Self, StructureError> {
        if sites.is_empty() {
            return Err(StructureError::EmptyStructure);
        }
        let comment = comment.into().replace(['\r', '\n'], " ").trim().to_string();
        Ok(Self { lattice, sites, comment })
    }

    fn check_separation(&self) -> Result<(), StructureError> {
        let min_sq = MIN_SEPARATION * MIN_SEPARATION;
        for (i, a) in self.sites.iter().enumerate() {
            for (j, b) in self.sites.iter().enumerate().skip(i + 1) {
                let d = self.lattice.min_image_vector(a.frac, b.frac);
                let dsq = dot(d, d);
                if dsq < min_sq {
                    return Err(StructureError::SitesTooClose { first: i, second: j, distance: dsq.sqrt() });
                }
            }
        }
        // a site against its own periodic images
        let shortest = self.lattice.shortest_translation();
        if shortest < MIN_SEPARATION {
            return Err(StructureError::SitesTooClose { first: 0, second: 0, distance: shortest });
        }
        Ok(())
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn comment(&self) -> &str {
        &self.comment
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn volume(&self) -> f64 {
        self.lattice.volume()
    }

    pub fn cartesian(&self, index: usize) -> Vec3 {
        self.lattice.to_cartesian(self.sites[index].frac)
    }

    pub fn with_comment(&self, comment: impl Into<String>) -> Self {
        let mut s = self.clone();
        s.comment = comment.into().replace(['\r', '\n'], " ").trim().to_string();
        s
    }

    /// Element counts in first-appearance order.
    pub fn composition(&self) -> Vec<(&'static str, usize)> {
        let mut out: Vec<(&'static str, usize)> = Vec::new();
        for site in &self.sites {
            match out.iter_mut().find(|(e, _)| *e == site.element) {
                Some((_, n)) => *n += 1,
                None => out.push((site.element, 1)),
            }
        }
        out
    }

    /// Formula in first-appearance order, unit counts omitted ("Ga8N8", "AlGa7N8").
    pub fn formula(&self) -> String {
        format_formula(&self.composition())
    }

    /// Formula divided by the gcd of the counts ("GaN" for Ga8N8).
    pub fn reduced_formula(&self) -> String {
        let comp = self.composition();
        let g = comp.iter().fold(0, |g, (_, n)| gcd(g, *n));
        let reduced: Vec<_> = comp.into_iter().map(|(e, n)| (e, n / g.max(1))).collect();
        format_formula(&reduced)
    }

    /// Same structure with sites stably grouped by element in first-appearance
    /// order; this is the site order POSCAR serialization emits.
    pub fn grouped(&self) -> Self {
        let mut sites = Vec::with_capacity(self.sites.len());
        for (el, _) in self.composition() {
            sites.extend(self.sites.iter().filter(|s| s.element == el).copied());
        }
        Self { lattice: self.lattice, sites, comment: self.comment.clone() }
    }

    /// Replicates the cell n1×n2×n3. Sites are emitted site-major: all images
    /// of site 0 first, then site 1, and so on.
    pub fn make_supercell(&self, n1: u32, n2: u32, n3: u32) -> Result<Self, StructureError> {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(StructureError::InvalidMultiplier([n1, n2, n3]));
        }
        let requested = n1 as u64 * n2 as u64 * n3 as u64;
        if requested > SUPERCELL_CAP {
            return Err(StructureError::LimitExceeded { requested });
        }
        let n = [n1 as f64, n2 as f64, n3 as f64];
        let lattice = self.lattice.scaled_rows(n);
        let mut sites = Vec::with_capacity(self.sites.len() * requested as usize);
        for site in &self.sites {
            let f = site.frac;
            for i in 0..n1 {
                for j in 0..n2 {
                    for k in 0..n3 {
                        let frac = [(f[0] + i as f64) / n[0], (f[1] + j as f64) / n[1], (f[2] + k as f64) / n[2]];
                        sites.push(Site { element: site.element, frac: [wrap(frac[0]), wrap(frac[1]), wrap(frac[2])] });
                    }
                }
            }
        }
        Self::from_parts(lattice, sites, self.comment.clone())
    }

    pub fn substitute_site(&self, site_index: usize, new_element: &str) -> Result<Self, StructureError> {
        let element = elements::canonical_symbol(new_element)
            .ok_or_else(|| StructureError::UnknownElement(new_element.to_string()))?;
        self.check_index(site_index)?;
        let mut sites = self.sites.clone();
        sites[site_index].element = element;
        Self::from_parts(self.lattice, sites, self.comment.clone())
    }

    pub fn create_vacancy(&self, site_index: usize) -> Result<Self, StructureError> {
        self.check_index(site_index)?;
        let mut sites = self.sites.clone();
        sites.remove(site_index);
        Self::from_parts(self.lattice, sites, self.comment.clone())
    }

    fn check_index(&self, index: usize) -> Result<(), StructureError> {
        if index >= self.sites.len() {
            return Err(StructureError::IndexOutOfRange { index, len: self.sites.len() });
        }
        Ok(())
    }

    /// Interplanar spacing d = 1/|h·b1 + k·b2 + l·b3| in Å.
    pub fn d_spacing(&self, hkl: [i32; 3]) -> Result<f64, StructureError> {
        d_spacing(&self.lattice, hkl)
    }
}

pub fn d_spacing(lattice: &Lattice, hkl: [i32; 3]) -> Result<f64, StructureError> {
    if hkl == [0, 0, 0] {
        return Err(StructureError::ZeroVector);
    }
    let b = lattice.reciprocal();
    let g = add(add(scale(b[0], hkl[0] as f64), scale(b[1], hkl[1] as f64)), scale(b[2], hkl[2] as f64));
    Ok(1.0 / norm(g))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn format_formula(comp: &[(&str, usize)]) -> String {
    comp.iter()
        .map(|(e, n)| if *n == 1 { e.to_string() } else { format!("{e}{n}") })
        .collect()
}
