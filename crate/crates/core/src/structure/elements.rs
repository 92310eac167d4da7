//! Static periodic-table data for Z = 1..=103.
//!
//! Masses are standard atomic weights (u), electronegativities are on the
//! Pauling scale and covalent radii (Å) are single-bond radii. He, Ne and Ar
//! have no Pauling electronegativity. Covalent radii past Cm are not tabulated
//! in the usual references and repeat the Cm value.

/// One row of the periodic table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub symbol: &'static str,
    pub z: u8,
    pub mass: f64,
    pub electronegativity: Option<f64>,
    pub covalent_radius: f64,
}

macro_rules! table {
    ($( $sym:literal $mass:literal $en:expr, $rad:literal; )*) => {
        const RAW: &[(&str, f64, Option<f64>, f64)] = &[ $( ($sym, $mass, $en, $rad) ),* ];
    };
}

table! {
    "H" 1.008 Some(2.20), 0.31;
    "He" 4.0026 None, 0.28;
    "Li" 6.94 Some(0.98), 1.28;
    "Be" 9.0122 Some(1.57), 0.96;
    "B" 10.81 Some(2.04), 0.84;
    "C" 12.011 Some(2.55), 0.76;
    "N" 14.007 Some(3.04), 0.71;
    "O" 15.999 Some(3.44), 0.66;
    "F" 18.998 Some(3.98), 0.57;
    "Ne" 20.180 None, 0.58;
    "Na" 22.990 Some(0.93), 1.66;
    "Mg" 24.305 Some(1.31), 1.41;
    "Al" 26.982 Some(1.61), 1.21;
    "Si" 28.085 Some(1.90), 1.11;
    "P" 30.974 Some(2.19), 1.07;
    "S" 32.06 Some(2.58), 1.05;
    "Cl" 35.45 Some(3.16), 1.02;
    "Ar" 39.948 None, 1.06;
    "K" 39.098 Some(0.82), 2.03;
    "Ca" 40.078 Some(1.00), 1.76;
    "Sc" 44.956 Some(1.36), 1.70;
    "Ti" 47.867 Some(1.54), 1.60;
    "V" 50.942 Some(1.63), 1.53;
    "Cr" 51.996 Some(1.66), 1.39;
    "Mn" 54.938 Some(1.55), 1.39;
    "Fe" 55.845 Some(1.83), 1.32;
    "Co" 58.933 Some(1.88), 1.26;
    "Ni" 58.693 Some(1.91), 1.24;
    "Cu" 63.546 Some(1.90), 1.32;
    "Zn" 65.38 Some(1.65), 1.22;
    "Ga" 69.723 Some(1.81), 1.22;
    "Ge" 72.630 Some(2.01), 1.20;
    "As" 74.922 Some(2.18), 1.19;
    "Se" 78.971 Some(2.55), 1.20;
    "Br" 79.904 Some(2.96), 1.20;
    "Kr" 83.798 Some(3.00), 1.16;
    "Rb" 85.468 Some(0.82), 2.20;
    "Sr" 87.62 Some(0.95), 1.95;
    "Y" 88.906 Some(1.22), 1.90;
    "Zr" 91.224 Some(1.33), 1.75;
    "Nb" 92.906 Some(1.6), 1.64;
    "Mo" 95.95 Some(2.16), 1.54;
    "Tc" 98.0 Some(1.9), 1.47;
    "Ru" 101.07 Some(2.2), 1.46;
    "Rh" 102.91 Some(2.28), 1.42;
    "Pd" 106.42 Some(2.20), 1.39;
    "Ag" 107.87 Some(1.93), 1.45;
    "Cd" 112.41 Some(1.69), 1.44;
    "In" 114.82 Some(1.78), 1.42;
    "Sn" 118.71 Some(1.96), 1.39;
    "Sb" 121.76 Some(2.05), 1.39;
    "Te" 127.60 Some(2.1), 1.38;
    "I" 126.90 Some(2.66), 1.39;
    "Xe" 131.29 Some(2.6), 1.40;
    "Cs" 132.91 Some(0.79), 2.44;
    "Ba" 137.33 Some(0.89), 2.15;
    "La" 138.91 Some(1.10), 2.07;
    "Ce" 140.12 Some(1.12), 2.04;
    "Pr" 140.91 Some(1.13), 2.03;
    "Nd" 144.24 Some(1.14), 2.01;
    "Pm" 145.0 Some(1.13), 1.99;
    "Sm" 150.36 Some(1.17), 1.98;
    "Eu" 151.96 Some(1.2), 1.98;
    "Gd" 157.25 Some(1.2), 1.96;
    "Tb" 158.93 Some(1.1), 1.94;
    "Dy" 162.50 Some(1.22), 1.92;
    "Ho" 164.93 Some(1.23), 1.92;
    "Er" 167.26 Some(1.24), 1.89;
    "Tm" 168.93 Some(1.25), 1.90;
    "Yb" 173.05 Some(1.1), 1.87;
    "Lu" 174.97 Some(1.27), 1.87;
    "Hf" 178.49 Some(1.3), 1.75;
    "Ta" 180.95 Some(1.5), 1.70;
    "W" 183.84 Some(2.36), 1.62;
    "Re" 186.21 Some(1.9), 1.51;
    "Os" 190.23 Some(2.2), 1.44;
    "Ir" 192.22 Some(2.20), 1.41;
    "Pt" 195.08 Some(2.28), 1.36;
    "Au" 196.97 Some(2.54), 1.36;
    "Hg" 200.59 Some(2.00), 1.32;
    "Tl" 204.38 Some(1.62), 1.45;
    "Pb" 207.2 Some(2.33), 1.46;
    "Bi" 208.98 Some(2.02), 1.48;
    "Po" 209.0 Some(2.0), 1.40;
    "At" 210.0 Some(2.2), 1.50;
    "Rn" 222.0 Some(2.2), 1.50;
    "Fr" 223.0 Some(0.7), 2.60;
    "Ra" 226.0 Some(0.9), 2.21;
    "Ac" 227.0 Some(1.1), 2.15;
    "Th" 232.04 Some(1.3), 2.06;
    "Pa" 231.04 Some(1.5), 2.00;
    "U" 238.03 Some(1.38), 1.96;
    "Np" 237.0 Some(1.36), 1.90;
    "Pu" 244.0 Some(1.28), 1.87;
    "Am" 243.0 Some(1.13), 1.80;
    "Cm" 247.0 Some(1.28), 1.69;
    "Bk" 247.0 Some(1.3), 1.69;
    "Cf" 251.0 Some(1.3), 1.69;
    "Es" 252.0 Some(1.3), 1.69;
    "Fm" 257.0 Some(1.3), 1.69;
    "Md" 258.0 Some(1.3), 1.69;
    "No" 259.0 Some(1.3), 1.69;
    "Lr" 266.0 Some(1.3), 1.69;
}

pub const MAX_Z: u8 = 103;

/// Looks up an element by its atomic number.
pub fn by_z(z: u8) -> Option<Element> {
    if z == 0 || z > MAX_Z {
        return None;
    }
    let (symbol, mass, electronegativity, covalent_radius) = RAW[(z - 1) as usize];
    Some(Element {
        symbol,
        z,
        mass,
        electronegativity,
        covalent_radius,
    })
}

/// Looks up an element by symbol, case-insensitively ("GA", "ga" and "Ga"
/// all resolve to gallium).
pub fn by_symbol(symbol: &str) -> Option<Element> {
    let sym = symbol.trim();
    RAW.iter()
        .position(|(s, ..)| s.eq_ignore_ascii_case(sym))
        .and_then(|i| by_z(i as u8 + 1))
}

/// Returns the canonically capitalized symbol, if recognized.
pub fn canonical_symbol(symbol: &str) -> Option<&'static str> {
    by_symbol(symbol).map(|e| e.symbol)
}
