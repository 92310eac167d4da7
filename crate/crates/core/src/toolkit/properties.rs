//! Deterministic property and band-structure stand-ins. They react to
//! composition and density but carry no physical authority.

use serde::Serialize;
use thiserror::Error;

use crate::structure::{elements, CrystalStructure};

pub const HOPPING: f64 = 0.5;
pub const DEFAULT_KPOINTS: usize = 50;

pub const STUB_NOTE: &str = "Values come from a deterministic composition/density heuristic, \
not a trained model; treat them as placeholders that require validation.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("no electronegativity is tabulated for {0}")]
    MissingElectronegativity(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyPrediction {
    pub formation_energy: f64,
    pub bandgap_opt: f64,
    pub bandgap_mbj: f64,
    pub bulk_modulus: f64,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Mean absolute deviation of site electronegativities from their mean.
pub fn electronegativity_spread(s: &CrystalStructure) -> Result<f64, PredictError> {
    let chis: Vec<f64> = s
        .sites()
        .iter()
        .map(|site| {
            elements::by_symbol(site.element())
                .and_then(|e| e.electronegativity)
                .ok_or(PredictError::MissingElectronegativity(site.element()))
        })
        .collect::<Result<_, _>>()?;
    let n = chis.len() as f64;
    let mean = chis.iter().sum::<f64>() / n;
    Ok(chis.iter().map(|c| (c - mean).abs()).sum::<f64>() / n)
}

pub fn predict_properties(s: &CrystalStructure) -> Result<PropertyPrediction, PredictError> {
    let spread = electronegativity_spread(s)?;
    let vpa = s.volume() / s.num_sites() as f64;
    let opt = (2.0 * spread - 0.05 * (vpa - 10.0)).max(0.0);
    Ok(PropertyPrediction {
        formation_energy: round4(-spread),
        bandgap_opt: round4(opt),
        bandgap_mbj: round4(1.35 * opt),
        bulk_modulus: round4(2500.0 / vpa),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandStructure {
    pub kpath_labels: [&'static str; 2],
    pub kpoints: Vec<f64>,
    /// `[valence, conduction]`, each sampled at `kpoints`.
    pub energies: [Vec<f64>; 2],
    pub bandgap: f64,
}

/// Two cosine bands on Γ→X (k from 0 to π) whose direct gap at Γ equals `gap`.
pub fn two_band_model(gap: f64, npoints: usize) -> BandStructure {
    let n = npoints.max(2);
    let kpoints: Vec<f64> = (0..n).map(|i| std::f64::consts::PI * i as f64 / (n - 1) as f64).collect();
    let valence = kpoints.iter().map(|k| -gap / 2.0 + 2.0 * HOPPING * (k.cos() - 1.0)).collect();
    let conduction = kpoints.iter().map(|k| gap / 2.0 - 2.0 * HOPPING * (k.cos() - 1.0)).collect();
    BandStructure { kpath_labels: ["Γ", "X"], kpoints, energies: [valence, conduction], bandgap: gap }
}

pub fn bandstructure(s: &CrystalStructure, npoints: usize) -> Result<BandStructure, PredictError> {
    Ok(two_band_model(predict_properties(s)?.bandgap_opt, npoints))
}
