//! Powder X-ray diffraction: structure factors, Bragg positions, Lorentz-
//! polarization weighting and Gaussian broadening onto a uniform 2θ grid.
//!
//! Scattering factors are the constant-Z approximation, so peak positions are
//! exact while relative intensities are only indicative.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::structure::{d_spacing, CrystalStructure};

pub const CU_K_ALPHA: f64 = 1.5406;
pub const DEFAULT_RANGE: (f64, f64) = (10.0, 90.0);
pub const DEFAULT_STEP: f64 = 0.02;
pub const DEFAULT_FWHM: f64 = 0.1;
pub const DEFAULT_PEAK_THRESHOLD: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XrdError {
    #[error("wavelength {0} Å is outside (0.1, 5.0) Å")]
    InvalidWavelength(f64),
    #[error("invalid 2θ range/step/fwhm: {0}")]
    InvalidRange(String),
    #[error("Miller index (0 0 0) has no structure factor")]
    ZeroVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationSource {
    label: String,
    wavelength: f64,
}

impl RadiationSource {
    pub fn new(label: impl Into<String>, wavelength: f64) -> Result<Self, XrdError> {
        if !(wavelength > 0.1 && wavelength < 5.0) {
            return Err(XrdError::InvalidWavelength(wavelength));
        }
        Ok(Self { label: label.into(), wavelength })
    }

    pub fn cu_k_alpha() -> Self {
        Self { label: "Cu Kα".into(), wavelength: CU_K_ALPHA }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
}

/// Grid and broadening settings for [`simulate_pxrd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSettings {
    pub min_two_theta: f64,
    pub max_two_theta: f64,
    pub step: f64,
    pub fwhm: f64,
}

impl Default for PatternSettings {
    fn default() -> Self {
        Self { min_two_theta: DEFAULT_RANGE.0, max_two_theta: DEFAULT_RANGE.1, step: DEFAULT_STEP, fwhm: DEFAULT_FWHM }
    }
}

impl PatternSettings {
    fn validate(&self) -> Result<(), XrdError> {
        let Self { min_two_theta: lo, max_two_theta: hi, step, fwhm } = *self;
        if !(lo > 0.0 && lo < hi && hi <= 180.0) {
            return Err(XrdError::InvalidRange(format!("need 0 < min < max <= 180, got [{lo}, {hi}]")));
        }
        if !(step > 0.0 && step <= 1.0) {
            return Err(XrdError::InvalidRange(format!("step must be in (0, 1], got {step}")));
        }
        if !(fwhm > 0.0 && fwhm <= 5.0) {
            return Err(XrdError::InvalidRange(format!("fwhm must be in (0, 5], got {fwhm}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub two_theta: f64,
    pub intensity: f64,
    /// Reflection contributing most at the peak; absent when the pattern was
    /// deserialized without its reflection list.
    pub hkl: Option<[i32; 3]>,
}

/// A single Bragg reflection inside the simulated window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub hkl: [i32; 3],
    pub d: f64,
    pub two_theta: f64,
    /// |F|² × Lorentz-polarization factor.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffractionPattern {
    pub two_theta: Vec<f64>,
    pub intensity: Vec<f64>,
    pub peaks: Vec<Peak>,
    #[serde(skip)]
    reflections: Vec<Reflection>,
    #[serde(skip)]
    fwhm: f64,
}

impl DiffractionPattern {
    pub fn reflections(&self) -> &[Reflection] {
        &self.reflections
    }

    pub fn step(&self) -> f64 {
        match self.two_theta.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }
}

/// |F(hkl)|² with f_j = Z_j.
pub fn structure_factor_sq(s: &CrystalStructure, hkl: [i32; 3]) -> Result<f64, XrdError> {
    if hkl == [0, 0, 0] {
        return Err(XrdError::ZeroVector);
    }
    Ok(structure_factor_sq_unchecked(s, hkl))
}

fn structure_factor_sq_unchecked(s: &CrystalStructure, hkl: [i32; 3]) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for site in s.sites() {
        let f = site.frac();
        let phase = 2.0 * PI * (hkl[0] as f64 * f[0] + hkl[1] as f64 * f[1] + hkl[2] as f64 * f[2]);
        let z = site.z() as f64;
        re += z * phase.cos();
        im += z * phase.sin();
    }
    re * re + im * im
}

/// (1 + cos²2θ) / (sin²θ · cosθ)
pub fn lorentz_polarization(theta: f64) -> f64 {
    let c2 = (2.0 * theta).cos();
    (1.0 + c2 * c2) / (theta.sin().powi(2) * theta.cos())
}

/// All reflections with d ≥ λ/2 whose 2θ falls inside `[lo, hi]`, in
/// enumeration order (h, then k, then l ascending).
pub fn reflections(s: &CrystalStructure, wavelength: f64, lo: f64, hi: f64) -> Vec<Reflection> {
    let g_max = 2.0 / wavelength;
    let lengths = s.lattice().lengths();
    // h = G·a1, so |h| ≤ |G|max·|a1|
    let bound = lengths.map(|l| (g_max * l).floor() as i32);
    let mut out = Vec::new();
    for h in -bound[0]..=bound[0] {
        for k in -bound[1]..=bound[1] {
            for l in -bound[2]..=bound[2] {
                let hkl = [h, k, l];
                if hkl == [0, 0, 0] {
                    continue;
                }
                let Ok(d) = d_spacing(s.lattice(), hkl) else { continue };
                let sin_theta = wavelength / (2.0 * d);
                // sinθ = 1 is grazing back-scatter where LP diverges
                if sin_theta >= 1.0 {
                    continue;
                }
                let theta = sin_theta.asin();
                let two_theta = 2.0 * theta.to_degrees();
                if two_theta < lo || two_theta > hi {
                    continue;
                }
                let weight = structure_factor_sq_unchecked(s, hkl) * lorentz_polarization(theta);
                out.push(Reflection { hkl, d, two_theta, weight });
            }
        }
    }
    out
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp()
}

pub fn simulate_pxrd(
    s: &CrystalStructure,
    src: &RadiationSource,
    settings: PatternSettings,
) -> Result<DiffractionPattern, XrdError> {
    settings.validate()?;
    let PatternSettings { min_two_theta: lo, max_two_theta: hi, step, fwhm } = settings;
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let two_theta: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    let refl = reflections(s, src.wavelength(), lo, hi);

    let sigma = fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let reach = 6.0 * sigma;
    let mut raw = vec![0.0; n];
    for r in &refl {
        let first = (((r.two_theta - reach - lo) / step).floor().max(0.0)) as usize;
        let last = ((((r.two_theta + reach - lo) / step).ceil()) as usize).min(n - 1);
        for i in first..=last {
            raw[i] += r.weight * gaussian(two_theta[i] - r.two_theta, sigma);
        }
    }

    let max = raw.iter().copied().fold(0.0, f64::max);
    let intensity: Vec<f64> = if max > 0.0 { raw.iter().map(|v| v / max * 100.0).collect() } else { raw };

    let mut pattern = DiffractionPattern { two_theta, intensity, peaks: Vec::new(), reflections: refl, fwhm };
    pattern.peaks = peak_list(&pattern, DEFAULT_PEAK_THRESHOLD);
    Ok(pattern)
}

/// Local maxima of the broadened profile with intensity ≥ `threshold`,
/// ascending in 2θ. Centers are refined by a parabola through the three
/// points around each maximum.
pub fn peak_list(p: &DiffractionPattern, threshold: f64) -> Vec<Peak> {
    let y = &p.intensity;
    let x = &p.two_theta;
    let n = y.len();
    let step = p.step();
    let mut peaks = Vec::new();
    for i in 0..n {
        if y[i] <= 0.0 || y[i] < threshold {
            continue;
        }
        let left = if i > 0 { y[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < n { y[i + 1] } else { f64::NEG_INFINITY };
        // plateaus report their first point
        if !(y[i] > left && y[i] >= right) {
            continue;
        }
        let mut center = x[i];
        if i > 0 && i + 1 < n {
            let denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
            if denom < 0.0 {
                let shift = 0.5 * (y[i - 1] - y[i + 1]) / denom;
                center += shift.clamp(-0.5, 0.5) * step;
            }
        }
        peaks.push(Peak { two_theta: center, intensity: y[i], hkl: strongest_contributor(p, x[i]) });
    }
    peaks
}

fn strongest_contributor(p: &DiffractionPattern, at: f64) -> Option<[i32; 3]> {
    if p.reflections.is_empty() || p.fwhm <= 0.0 {
        return None;
    }
    let sigma = p.fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let mut best: Option<(f64, [i32; 3])> = None;
    for r in &p.reflections {
        let c = r.weight * gaussian(at - r.two_theta, sigma);
        if c <= 0.0 {
            continue;
        }
        let replace = match best {
            None => true,
            Some((bc, bh)) => {
                let tie = (c - bc).abs() <= 1e-9 * bc;
                // equivalent reflections tie; (1,1,1) wins over (-1,-1,-1)
                if tie { r.hkl > bh } else { c > bc }
            }
        };
        if replace {
            best = Some((c, r.hkl));
        }
    }
    best.map(|(_, h)| h)
}
