//! Bundled materials records and the conjunctive query over them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::structure::{elements, parse_poscar, CrystalStructure, StructureError};

const BUNDLED: &str = include_str!("../../data/materials.json");

pub const DEFAULT_LIMIT: usize = 10;
pub const MAX_LIMIT: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("dataset JSON is invalid: {0}")]
    Json(String),
    #[error("record {jid}: {source}")]
    Structure { jid: String, source: StructureError },
    #[error("record {jid}: {message}")]
    Invalid { jid: String, message: String },
    #[error("duplicate jid {0}")]
    DuplicateJid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialRecord {
    pub jid: String,
    pub formula: String,
    pub spacegroup: String,
    pub formation_energy: f64,
    pub bandgap_opt: f64,
    pub bandgap_mbj: Option<f64>,
    pub bulk_modulus: Option<f64>,
    pub structure: CrystalStructure,
}

#[derive(Deserialize)]
struct RawRecord {
    jid: String,
    formula: String,
    spacegroup: String,
    formation_energy: f64,
    bandgap_opt: f64,
    bandgap_mbj: Option<f64>,
    bulk_modulus: Option<f64>,
    poscar: String,
}

impl MaterialRecord {
    /// Query-result view: every field except the structure. The MBJ gap is
    /// listed before the OptB88vdW gap.
    pub fn summary(&self) -> Value {
        json!({
            "jid": self.jid,
            "formula": self.formula,
            "spacegroup": self.spacegroup,
            "bandgap_mbj": self.bandgap_mbj,
            "bandgap_opt": self.bandgap_opt,
            "formation_energy": self.formation_energy,
            "bulk_modulus": self.bulk_modulus,
        })
    }

    fn elements(&self) -> HashSet<&'static str> {
        self.structure.sites().iter().map(|s| s.element()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    #[default]
    Jid,
    FormationEnergy,
}

/// All filters are optional; a query needs at least one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialQuery {
    pub elements: Option<Vec<String>>,
    pub formula: Option<String>,
    pub bandgap_min: Option<f64>,
    pub bandgap_max: Option<f64>,
    pub formation_energy_max: Option<f64>,
    pub spacegroup: Option<String>,
    pub sort_by: Option<SortKey>,
    pub limit: Option<usize>,
}

impl MaterialQuery {
    pub fn has_filter(&self) -> bool {
        self.elements.as_ref().is_some_and(|e| !e.is_empty())
            || self.formula.is_some()
            || self.bandgap_min.is_some()
            || self.bandgap_max.is_some()
            || self.formation_energy_max.is_some()
            || self.spacegroup.is_some()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("at least one filter is required")]
    EmptyFilter,
    #[error("limit must be between 1 and {MAX_LIMIT}, got {0}")]
    BadLimit(usize),
    #[error("unknown element '{0}'")]
    UnknownElement(String),
}

#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<MaterialRecord>,
}

/// Canonical reduced formula: element counts in order of first appearance,
/// divided by their gcd. "Ga2N2" and "GaN" both become "GaN".
pub fn normalize_formula(formula: &str) -> Option<String> {
    let mut counts: Vec<(&'static str, u64)> = Vec::new();
    let chars: Vec<char> = formula.trim().chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_uppercase() {
            return None;
        }
        let mut sym = chars[i].to_string();
        i += 1;
        while i < chars.len() && chars[i].is_ascii_lowercase() {
            sym.push(chars[i]);
            i += 1;
        }
        let mut digits = String::new();
        while i < chars.len() && chars[i].is_ascii_digit() {
            digits.push(chars[i]);
            i += 1;
        }
        let n: u64 = if digits.is_empty() { 1 } else { digits.parse().ok()? };
        let el = elements::canonical_symbol(&sym)?;
        match counts.iter_mut().find(|(e, _)| *e == el) {
            Some((_, c)) => *c += n,
            None => counts.push((el, n)),
        }
    }
    if counts.is_empty() || counts.iter().any(|(_, n)| *n == 0) {
        return None;
    }
    let g = counts.iter().fold(0, |g, (_, n)| gcd(g, *n));
    Some(
        counts
            .iter()
            .map(|(e, n)| if n / g == 1 { e.to_string() } else { format!("{e}{}", n / g) })
            .collect(),
    )
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Dataset {
    pub fn bundled() -> Self {
        // the bundled file is checked by the test suite
        Self::from_json(BUNDLED).expect("bundled dataset is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let raw: Vec<RawRecord> = serde_json::from_str(text).map_err(|e| DatasetError::Json(e.to_string()))?;
        let mut seen = HashSet::new();
        let mut records = Vec::with_capacity(raw.len());
        for r in raw {
            if !seen.insert(r.jid.clone()) {
                return Err(DatasetError::DuplicateJid(r.jid));
            }
            let invalid = |m: &str| DatasetError::Invalid { jid: r.jid.clone(), message: m.to_string() };
            if !r.formation_energy.is_finite() {
                return Err(invalid("formation_energy is not finite"));
            }
            if !(r.bandgap_opt >= 0.0) || r.bandgap_mbj.is_some_and(|g| !(g >= 0.0)) {
                return Err(invalid("bandgaps must be non-negative"));
            }
            let structure =
                parse_poscar(&r.poscar).map_err(|source| DatasetError::Structure { jid: r.jid.clone(), source })?;
            records.push(MaterialRecord {
                jid: r.jid,
                formula: r.formula,
                spacegroup: r.spacegroup,
                formation_energy: r.formation_energy,
                bandgap_opt: r.bandgap_opt,
                bandgap_mbj: r.bandgap_mbj,
                bulk_modulus: r.bulk_modulus,
                structure,
            });
        }
        records.sort_by(|a, b| a.jid.cmp(&b.jid));
        Ok(Self { records })
    }

    pub fn records(&self) -> &[MaterialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, jid: &str) -> Option<&MaterialRecord> {
        self.records.iter().find(|r| r.jid == jid)
    }

    /// Records satisfying every given filter, sorted by jid (or formation
    /// energy, ties by jid), truncated to the limit.
    pub fn query(&self, q: &MaterialQuery) -> Result<Vec<&MaterialRecord>, QueryError> {
        if !q.has_filter() {
            return Err(QueryError::EmptyFilter);
        }
        let limit = q.limit.unwrap_or(DEFAULT_LIMIT);
        if limit == 0 || limit > MAX_LIMIT {
            return Err(QueryError::BadLimit(limit));
        }
        let wanted: Vec<&'static str> = q
            .elements
            .iter()
            .flatten()
            .map(|e| elements::canonical_symbol(e).ok_or_else(|| QueryError::UnknownElement(e.clone())))
            .collect::<Result<_, _>>()?;
        let formula = q.formula.as_deref().map(|f| normalize_formula(f).unwrap_or_else(|| f.trim().to_string()));

        let mut hits: Vec<&MaterialRecord> = self
            .records
            .iter()
            .filter(|r| {
                let els = r.elements();
                wanted.iter().all(|e| els.contains(e))
                    && formula.as_ref().is_none_or(|f| normalize_formula(&r.formula).as_ref() == Some(f))
                    && q.bandgap_min.is_none_or(|m| r.bandgap_opt >= m)
                    && q.bandgap_max.is_none_or(|m| r.bandgap_opt <= m)
                    && q.formation_energy_max.is_none_or(|m| r.formation_energy <= m)
                    && q.spacegroup.as_ref().is_none_or(|sg| sg.trim() == r.spacegroup)
            })
            .collect();
        if q.sort_by == Some(SortKey::FormationEnergy) {
            hits.sort_by(|a, b| a.formation_energy.total_cmp(&b.formation_energy).then_with(|| a.jid.cmp(&b.jid)));
        }
        hits.truncate(limit);
        Ok(hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_loads_fifty_unique_records() {
        let d = Dataset::bundled();
        assert_eq!(d.len(), 50);
        let jids: Vec<&str> = d.records().iter().map(|r| r.jid.as_str()).collect();
        let mut sorted = jids.clone();
        sorted.sort();
        assert_eq!(jids, sorted);
    }

    #[test]
    fn formula_normalization() {
        assert_eq!(normalize_formula("Ga2N2").as_deref(), Some("GaN"));
        assert_eq!(normalize_formula("SrTiO3").as_deref(), Some("SrTiO3"));
        assert_eq!(normalize_formula("Si8").as_deref(), Some("Si"));
        assert_eq!(normalize_formula("gan"), None);
        assert_eq!(normalize_formula("Xx2"), None);
    }

    #[test]
    fn empty_and_bad_queries() {
        let d = Dataset::bundled();
        assert_eq!(d.query(&MaterialQuery::default()), Err(QueryError::EmptyFilter));
        let q = MaterialQuery { elements: Some(vec![]), ..Default::default() };
        assert_eq!(d.query(&q), Err(QueryError::EmptyFilter));
        let q = MaterialQuery { formula: Some("Si".into()), limit: Some(51), ..Default::default() };
        assert_eq!(d.query(&q), Err(QueryError::BadLimit(51)));
        let q = MaterialQuery { elements: Some(vec!["Zz".into()]), ..Default::default() };
        assert_eq!(d.query(&q), Err(QueryError::UnknownElement("Zz".into())));
    }

    #[test]
    fn contradictory_bounds_give_empty_list() {
        let d = Dataset::bundled();
        let q = MaterialQuery { bandgap_min: Some(1.0), bandgap_max: Some(0.0), ..Default::default() };
        assert!(d.query(&q).unwrap().is_empty());
        let q = MaterialQuery { bandgap_min: Some(100.0), ..Default::default() };
        assert!(d.query(&q).unwrap().is_empty());
    }

    #[test]
    fn sort_by_formation_energy() {
        let d = Dataset::bundled();
        let q = MaterialQuery {
            formula: Some("GaN".into()),
            sort_by: Some(SortKey::FormationEnergy),
            ..Default::default()
        };
        let hits = d.query(&q).unwrap();
        assert_eq!(hits.len(), 2);
        assert!(hits[0].formation_energy <= hits[1].formation_energy);
    }
}
