//! VASP-5 POSCAR reading and writing.
//!
//! Accepted layout: comment, scale, three lattice rows, element symbols,
//! counts, coordinate mode (`Direct` or `Cartesian`, first letter decides),
//! then one coordinate row per atom. VASP-4 files, selective dynamics and
//! trailing velocity/predictor blocks are rejected.

use super::{elements, CrystalStructure, Lattice, Site, StructureError, Vec3};

struct Lines<'a> {
    lines: Vec<&'a str>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect() }
    }

    /// 1-based line access; `None` past the end.
    fn get(&self, line: usize) -> Option<&'a str> {
        self.lines.get(line - 1).copied()
    }

    fn require(&self, line: usize, what: &str) -> Result<&'a str, StructureError> {
        self.get(line).ok_or_else(|| malformed(line, format!("unexpected end of input, expected {what}")))
    }
}

fn malformed(line: usize, message: impl Into<String>) -> StructureError {
    StructureError::Malformed { line, message: message.into() }
}

fn number(token: &str, line: usize) -> Result<f64, StructureError> {
    let v: f64 = token
        .parse()
        .map_err(|_| malformed(line, format!("expected a number, found '{token}'")))?;
    if !v.is_finite() {
        return Err(StructureError::NonFiniteNumber { line, token: token.to_string() });
    }
    Ok(v)
}

fn triple(text: &str, line: usize) -> Result<Vec3, StructureError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() < 3 {
        return Err(malformed(line, format!("expected three numbers, found {} field(s)", toks.len())));
    }
    Ok([number(toks[0], line)?, number(toks[1], line)?, number(toks[2], line)?])
}

fn looks_like_triple(text: &str) -> bool {
    let toks: Vec<&str> = text.split_whitespace().collect();
    toks.len() >= 3 && toks[..3].iter().all(|t| t.parse::<f64>().is_ok())
}

/// Strips POTCAR-style decorations such as `Ga_d` or `Ga/abc`.
fn bare_symbol(token: &str) -> &str {
    token.split(['_', '/']).next().unwrap_or(token)
}

pub fn parse_poscar(text: &str) -> Result<CrystalStructure, StructureError> {
    let lines = Lines::new(text);
    if text.trim().is_empty() {
        return Err(malformed(1, "empty input"));
    }
    let comment = lines.require(1, "comment line")?;

    let scale_line = lines.require(2, "scale factor")?;
    let scale_toks: Vec<&str> = scale_line.split_whitespace().collect();
    let scale = match scale_toks.as_slice() {
        [one] => number(one, 2)?,
        [] => return Err(malformed(2, "missing scale factor")),
        _ => return Err(malformed(2, "per-axis scale factors are not supported; give a single number")),
    };
    if scale == 0.0 {
        return Err(malformed(2, "scale factor must be non-zero"));
    }

    let mut rows = [[0.0; 3]; 3];
    for (i, row) in rows.iter_mut().enumerate() {
        let n = 3 + i;
        *row = triple(lines.require(n, "lattice vector")?, n)?;
    }

    let symbols_line = lines.require(6, "element symbols")?;
    let symbol_toks: Vec<&str> = symbols_line.split_whitespace().collect();
    if symbol_toks.is_empty() {
        return Err(malformed(6, "missing element symbols line"));
    }
    if symbol_toks[0].parse::<i64>().is_ok() {
        return Err(malformed(6, "element symbols line is required (VASP-4 files are not supported)"));
    }
    let mut symbols = Vec::with_capacity(symbol_toks.len());
    for tok in &symbol_toks {
        let sym = bare_symbol(tok);
        let canon = elements::canonical_symbol(sym).ok_or_else(|| StructureError::UnknownElement(sym.to_string()))?;
        symbols.push(canon);
    }

    let counts_line = lines.require(7, "element counts")?;
    let mut counts = Vec::new();
    for tok in counts_line.split_whitespace() {
        let c: usize = tok
            .parse()
            .map_err(|_| malformed(7, format!("expected a positive integer count, found '{tok}'")))?;
        if c == 0 {
            return Err(malformed(7, "element counts must be positive"));
        }
        counts.push(c);
    }
    if counts.len() != symbols.len() {
        return Err(malformed(
            7,
            format!("{} counts given for {} element symbols", counts.len(), symbols.len()),
        ));
    }
    let expected: usize = counts.iter().sum();

    let mode_line = lines.require(8, "coordinate mode")?.trim();
    let cartesian = match mode_line.chars().next() {
        Some('D' | 'd') => false,
        Some('C' | 'c' | 'K' | 'k') => true,
        Some('S' | 's') => return Err(malformed(8, "selective dynamics is not supported")),
        _ => return Err(malformed(8, format!("expected 'Direct' or 'Cartesian', found '{mode_line}'"))),
    };

    let raw = Lattice::new(rows)?;
    let factor = if scale > 0.0 { scale } else { (-scale / raw.volume()).cbrt() };
    let lattice = Lattice::new(rows.map(|r| r.map(|v| v * factor)))?;

    let first_coord = 9;
    let mut coords = Vec::with_capacity(expected);
    for i in 0..expected {
        let n = first_coord + i;
        match lines.get(n) {
            Some(l) if !l.trim().is_empty() => coords.push(triple(l, n)?),
            _ => return Err(StructureError::CountMismatch { expected, found: i }),
        }
    }

    let after = first_coord + expected;
    if let Some(next) = lines.get(after) {
        if looks_like_triple(next) {
            let extra = (after..)
                .map_while(|n| lines.get(n).filter(|l| looks_like_triple(l)))
                .count();
            return Err(StructureError::CountMismatch { expected, found: expected + extra });
        }
        if let Some(offset) = (after..=lines.lines.len()).find(|&n| lines.get(n).is_some_and(|l| !l.trim().is_empty())) {
            return Err(malformed(offset, "trailing velocity or predictor-corrector blocks are not supported"));
        }
    }

    let mut sites = Vec::with_capacity(expected);
    let mut idx = 0;
    for (sym, count) in symbols.iter().zip(&counts) {
        for _ in 0..*count {
            let c = coords[idx];
            let frac = if cartesian { lattice.to_fractional(c.map(|v| v * factor)) } else { c };
            sites.push(Site::new(sym, frac)?);
            idx += 1;
        }
    }
    CrystalStructure::new(lattice, sites, comment)
}

/// 16 significant digits, fixed-point where readable, scientific otherwise.
fn sig16(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..15).contains(&mag) {
        let decimals = (15 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.15E}")
    }
}

/// Direct-mode VASP-5 text with scale 1.0 and elements grouped in
/// first-appearance order.
pub fn serialize_poscar(s: &CrystalStructure) -> String {
    let grouped = s.grouped();
    let comp = grouped.composition();
    let mut out = String::new();
    out.push_str(if s.comment().is_empty() { " " } else { s.comment() });
    out.push('\n');
    out.push_str("1.0\n");
    for row in s.lattice().matrix() {
        out.push_str(&format!("  {}  {}  {}\n", sig16(row[0]), sig16(row[1]), sig16(row[2])));
    }
    out.push_str(&comp.iter().map(|(e, _)| *e).collect::<Vec<_>>().join(" "));
    out.push('\n');
    out.push_str(&comp.iter().map(|(_, n)| n.to_string()).collect::<Vec<_>>().join(" "));
    out.push('\n');
    out.push_str("Direct\n");
    for site in grouped.sites() {
        let f = site.frac();
        out.push_str(&format!("  {}  {}  {}\n", sig16(f[0]), sig16(f[1]), sig16(f[2])));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PO: &str = "Po simple cubic\n1.0\n3.34 0 0\n0 3.34 0\n0 0 3.34\nPo\n1\nDirect\n0 0 0\n";

    #[test]
    fn simple_cubic_po() {
        let s = parse_poscar(PO).unwrap();
        assert_eq!(s.num_sites(), 1);
        assert_eq!(s.comment(), "Po simple cubic");
        // 3.34^3 = 37.259704
        assert!((s.volume() - 37.259704).abs() < 1e-9);
        assert!((s.volume() - 37.26).abs() < 5e-3);
    }

    #[test]
    fn scale_factor_multiplies_rows() {
        let text = "x\n2.0\n1 0 0\n0 1 0\n0 0 1\nH\n1\nDirect\n0 0 0\n";
        let s = parse_poscar(text).unwrap();
        assert_eq!(s.lattice().matrix(), &[[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]);
        assert_eq!(s.volume(), 8.0);
    }

    #[test]
    fn negative_scale_is_target_volume() {
        let text = "x\n-64.0\n1 0 0\n0 1 0\n0 0 1\nH\n1\nDirect\n0 0 0\n";
        let s = parse_poscar(text).unwrap();
        assert!((s.volume() - 64.0).abs() < 1e-9);
        assert!((s.lattice().lengths()[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cartesian_is_converted_and_scaled() {
        let text = "x\n2.0\n2 0 0\n0 2 0\n0 0 2\nNa Cl\n1 1\nCartesian\n0 0 0\n1 1 1\n";
        let s = parse_poscar(text).unwrap();
        // Cartesian rows are scaled too: (1,1,1)*2 in a 4 Å cube
        let f = s.sites()[1].frac();
        assert!(f.iter().all(|v| (v - 0.5).abs() < 1e-14));
    }

    #[test]
    fn count_mismatch_fewer_rows() {
        let text = "x\n1.0\n5 0 0\n0 5 0\n0 0 5\nGa N\n1 2\nDirect\n0 0 0\n0.5 0.5 0.5\n";
        assert_eq!(parse_poscar(text), Err(StructureError::CountMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn count_mismatch_more_rows() {
        let text = "x\n1.0\n5 0 0\n0 5 0\n0 0 5\nGa\n1\nDirect\n0 0 0\n0.5 0.5 0.5\n";
        assert_eq!(parse_poscar(text), Err(StructureError::CountMismatch { expected: 1, found: 2 }));
    }

    #[test]
    fn rejects_unsupported_dialects() {
        let vasp4 = "x\n1.0\n5 0 0\n0 5 0\n0 0 5\n1\nDirect\n0 0 0\n";
        assert!(matches!(parse_poscar(vasp4), Err(StructureError::Malformed { line: 6, .. })));
        let sd = "x\n1.0\n5 0 0\n0 5 0\n0 0 5\nH\n1\nSelective dynamics\nDirect\n0 0 0 T T T\n";
        assert!(matches!(parse_poscar(sd), Err(StructureError::Malformed { line: 8, .. })));
        let vel = "x\n1.0\n5 0 0\n0 5 0\n0 0 5\nH\n1\nDirect\n0 0 0\n\n0.1 0.2 0.3\n";
        assert!(matches!(parse_poscar(vel), Err(StructureError::Malformed { line: 11, .. })));
        let per_axis = "x\n1.0 1.0 1.0\n5 0 0\n0 5 0\n0 0 5\nH\n1\nDirect\n0 0 0\n";
        assert!(matches!(parse_poscar(per_axis), Err(StructureError::Malformed { line: 2, .. })));
    }

    #[test]
    fn error_diagnostics() {
        assert_eq!(
            parse_poscar("x\n1.0\n5 0 0\n0 5 0\n0 0 5\nXx\n1\nDirect\n0 0 0\n"),
            Err(StructureError::UnknownElement("Xx".into()))
        );
        assert!(matches!(
            parse_poscar("x\n1.0\n5 0 0\n0 NaN 0\n0 0 5\nH\n1\nDirect\n0 0 0\n"),
            Err(StructureError::NonFiniteNumber { line: 4, .. })
        ));
        assert!(matches!(
            parse_poscar("x\n1.0\n5 0 0\n0 five 0\n0 0 5\nH\n1\nDirect\n0 0 0\n"),
            Err(StructureError::Malformed { line: 4, .. })
        ));
        assert!(matches!(parse_poscar(""), Err(StructureError::Malformed { line: 1, .. })));
        assert!(matches!(parse_poscar("x\n1.0\n5 0 0\n"), Err(StructureError::Malformed { line: 4, .. })));
    }

    #[test]
    fn crlf_and_potcar_suffixes_accepted() {
        let text = "x\r\n1.0\r\n5 0 0\r\n0 5 0\r\n0 0 5\r\nGa_d N\r\n1 1\r\ndirect\r\n0 0 0\r\n0.5 0.5 0.5\r\n";
        let s = parse_poscar(text).unwrap();
        assert_eq!(s.formula(), "GaN");
    }

    #[test]
    fn serialization_groups_elements() {
        let text = "mixed\n1.0\n6 0 0\n0 6 0\n0 0 6\nGa N Ga\n1 1 1\nDirect\n0 0 0\n0.5 0 0\n0 0.5 0\n";
        let s = parse_poscar(text).unwrap();
        let out = serialize_poscar(&s);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[5], "Ga N");
        assert_eq!(lines[6], "2 1");
        assert_eq!(lines[7], "Direct");
        assert!(lines[9].contains("0.5000000000000000") && lines[9].trim().starts_with("0.0"));
        assert!(lines[10].trim().starts_with("0.5"));
        assert_eq!(parse_poscar(&out).unwrap(), s.grouped());
    }

    #[test]
    fn empty_comment_is_a_single_space() {
        let s = parse_poscar(PO).unwrap().with_comment("");
        let out = serialize_poscar(&s);
        assert!(out.starts_with(" \n"));
        assert_eq!(parse_poscar(&out).unwrap(), s);
    }

    #[test]
    fn sig16_formatting() {
        assert_eq!(sig16(1.0 / 3.0), "0.3333333333333333");
        assert_eq!(sig16(5.43), "5.430000000000000");
        assert_eq!(sig16(0.0), "0.0000000000000000");
        assert_eq!(sig16(1e-17).parse::<f64>().unwrap(), 1e-17);
        assert_eq!(sig16(-2.5e20).parse::<f64>().unwrap(), -2.5e20);
    }
}
