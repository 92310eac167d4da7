//! Fixed-cell steepest descent on a Lennard-Jones pair potential.
//!
//! σ_ij = 0.9·(r_i + r_j) from covalent radii, ε = 1, minimum-image pairs.
//! Each accepted step moves atom i by `step · F_i / max|F|`; a step that
//! raises the energy is halved and retried, so the energy trace never rises.

use thiserror::Error;

use crate::structure::{add, dot, elements, norm, scale, sub, CrystalStructure, Site, StructureError, Vec3};

pub const MIN_SITES: usize = 2;
pub const MAX_SITES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions {
    pub max_steps: usize,
    /// Largest displacement per step, Å.
    pub step: f64,
    pub force_tol: f64,
    pub max_halvings: u32,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self { max_steps: 200, step: 0.01, force_tol: 0.05, max_halvings: 10 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error("relaxation needs between {MIN_SITES} and {MAX_SITES} sites, got {0}")]
    SiteCountOutOfRange(usize),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxResult {
    pub structure: CrystalStructure,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub steps: usize,
    pub converged: bool,
    pub max_force: f64,
    /// Energy after each accepted step, starting with the initial energy.
    pub energy_trace: Vec<f64>,
}

struct Model<'a> {
    s: &'a CrystalStructure,
    sigma: Vec<Vec<f64>>,
}

impl<'a> Model<'a> {
    fn new(s: &'a CrystalStructure) -> Self {
        let radii: Vec<f64> = s
            .sites()
            .iter()
            .map(|x| elements::by_symbol(x.element()).map(|e| e.covalent_radius).unwrap_or(1.0))
            .collect();
        let sigma = radii.iter().map(|ri| radii.iter().map(|rj| 0.9 * (ri + rj)).collect()).collect();
        Self { s, sigma }
    }

    fn pair_vector(&self, pos: &[Vec3], i: usize, j: usize) -> Vec3 {
        let lat = self.s.lattice();
        let fi = lat.to_fractional(pos[i]);
        let fj = lat.to_fractional(pos[j]);
        lat.min_image_vector(fi, fj)
    }

    fn energy(&self, pos: &[Vec3]) -> f64 {
        let mut e = 0.0;
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                let r = norm(self.pair_vector(pos, i, j));
                let sr6 = (self.sigma[i][j] / r).powi(6);
                e += 4.0 * (sr6 * sr6 - sr6);
            }
        }
        e
    }

    fn forces(&self, pos: &[Vec3]) -> Vec<Vec3> {
        let mut f = vec![[0.0; 3]; pos.len()];
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                let d = self.pair_vector(pos, i, j);
                let r2 = dot(d, d);
                let sr6 = (self.sigma[i][j] * self.sigma[i][j] / r2).powi(3);
                // -dU/dr / r, applied along d = r_j - r_i
                let k = 24.0 * (2.0 * sr6 * sr6 - sr6) / r2;
                f[j] = add(f[j], scale(d, k));
                f[i] = sub(f[i], scale(d, k));
            }
        }
        f
    }
}

fn max_norm(f: &[Vec3]) -> f64 {
    f.iter().map(|v| norm(*v)).fold(0.0, f64::max)
}

pub fn relax(s: &CrystalStructure, opts: &RelaxOptions) -> Result<RelaxResult, RelaxError> {
    let n = s.num_sites();
    if !(MIN_SITES..=MAX_SITES).contains(&n) {
        return Err(RelaxError::SiteCountOutOfRange(n));
    }
    let model = Model::new(s);
    let mut pos: Vec<Vec3> = (0..n).map(|i| s.cartesian(i)).collect();
    let mut energy = model.energy(&pos);
    let mut forces = model.forces(&pos);
    let mut fmax = max_norm(&forces);
    let initial_energy = energy;
    let mut trace = vec![energy];
    let mut steps = 0;

    'outer: while steps < opts.max_steps && fmax >= opts.force_tol {
        let mut step = opts.step;
        let mut halvings = 0;
        loop {
            let trial: Vec<Vec3> = pos.iter().zip(&forces).map(|(p, f)| add(*p, scale(*f, step / fmax))).collect();
            let e = model.energy(&trial);
            if e <= energy {
                pos = trial;
                energy = e;
                forces = model.forces(&pos);
                fmax = max_norm(&forces);
                steps += 1;
                trace.push(energy);
                break;
            }
            if halvings == opts.max_halvings {
                break 'outer;
            }
            step /= 2.0;
            halvings += 1;
        }
    }

    let lat = s.lattice();
    let sites = s
        .sites()
        .iter()
        .zip(&pos)
        .map(|(site, p)| Site::new(site.element(), lat.to_fractional(*p)))
        .collect::<Result<Vec<_>, _>>()?;
    let structure = CrystalStructure::new(*lat, sites, s.comment())?;
    Ok(RelaxResult {
        structure,
        initial_energy,
        final_energy: energy,
        steps,
        converged: fmax < opts.force_tol,
        max_force: fmax,
        energy_trace: trace,
    })
}
