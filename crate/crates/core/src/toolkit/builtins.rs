//! The built-in tool set, registered in a fixed order.

use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::dataset::{Dataset, MaterialQuery, QueryError, MAX_LIMIT};
use super::interface::{self, InterfaceError, DEFAULT_MAX_AREA, DEFAULT_STRAIN_TOL};
use super::properties::{self, PredictError, DEFAULT_KPOINTS, STUB_NOTE};
use super::registry::{FailureKind, Registry, ToolDescriptor, ToolFailure};
use super::relax::{self, RelaxError, RelaxOptions};
use super::schema::{ObjectSchema, PropertySchema as P};
use crate::structure::{parse_poscar, serialize_poscar, CrystalStructure, Lattice, StructureError};
use crate::xrd::{self, PatternSettings, RadiationSource, XrdError};

pub const DEFAULT_MAX_SITES: usize = 500;

/// Names of the built-in tools in registration order.
pub const BUILTIN_TOOLS: [&str; 12] = [
    "jarvis_dft_query",
    "get_structure",
    "make_supercell",
    "substitute_site",
    "create_vacancy",
    "relax_structure",
    "simulate_pxrd",
    "predict_properties",
    "bandstructure_stub",
    "generate_interface",
    "compile_report",
    "literature_search",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolkitConfig {
    /// Largest structure any tool accepts or produces.
    pub max_sites: usize,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self { max_sites: DEFAULT_MAX_SITES }
    }
}

/// Registry over the bundled dataset with default limits.
pub fn default_registry() -> Registry {
    builtin_registry(Arc::new(Dataset::bundled()), ToolkitConfig::default())
}

fn structure_failure(e: StructureError) -> ToolFailure {
    let msg = e.to_string();
    match e {
        StructureError::LimitExceeded { .. } => ToolFailure::unphysical("supercell_cap", msg)
            .with_hint("use smaller multipliers; n1·n2·n3 may not exceed 10000"),
        StructureError::SitesTooClose { .. } => ToolFailure::unphysical("sites_too_close", msg),
        StructureError::EmptyStructure => ToolFailure::unphysical("empty_structure", msg),
        StructureError::IndexOutOfRange { len, .. } => ToolFailure::invalid("index_out_of_range", msg)
            .with_hint(format!("site_index must be between 0 and {}", len.saturating_sub(1))),
        StructureError::UnknownElement(_) => {
            ToolFailure::invalid("unknown_element", msg).with_hint("use a chemical symbol such as \"Al\"")
        }
        StructureError::InvalidMultiplier(_) => ToolFailure::invalid("bad_scaling", msg),
        _ => ToolFailure::invalid("parse_error", msg).with_hint("pass a VASP 5 POSCAR with an element-symbol line"),
    }
}

fn predict_failure(e: PredictError) -> ToolFailure {
    ToolFailure::unphysical("missing_electronegativity", e.to_string())
}

struct Ctx {
    data: Arc<Dataset>,
    config: ToolkitConfig,
}

impl Ctx {
    fn check_size(&self, s: &CrystalStructure) -> Result<(), ToolFailure> {
        if s.num_sites() > self.config.max_sites {
            return Err(ToolFailure::unphysical(
                "too_many_sites",
                format!("{} sites exceeds the limit of {}", s.num_sites(), self.config.max_sites),
            ));
        }
        Ok(())
    }

    /// Structure from `<poscar_key>` text or the record named by `<jid_key>`.
    fn structure(&self, args: &Value, poscar_key: &str, jid_key: &str) -> Result<CrystalStructure, ToolFailure> {
        let s = if let Some(text) = args.get(poscar_key).and_then(Value::as_str) {
            parse_poscar(text).map_err(structure_failure)?
        } else if let Some(jid) = args.get(jid_key).and_then(Value::as_str) {
            self.data
                .get(jid)
                .ok_or_else(|| ToolFailure::not_found(format!("no record with jid '{jid}'")))?
                .structure
                .clone()
        } else {
            return Err(ToolFailure::invalid("missing_structure", format!("provide '{poscar_key}' or '{jid_key}'")));
        };
        self.check_size(&s)?;
        Ok(s)
    }
}

fn get_u64(args: &Value, key: &str) -> Option<u64> {
    args.get(key).and_then(|v| v.as_u64().or_else(|| v.as_f64().filter(|f| *f >= 0.0).map(|f| f as u64)))
}

fn get_f64(args: &Value, key: &str) -> Option<f64> {
    args.get(key).and_then(Value::as_f64)
}

fn lattice_json(l: &Lattice) -> Value {
    let [a, b, c] = l.lengths();
    let [alpha, beta, gamma] = l.angles();
    json!({"a": a, "b": b, "c": c, "alpha": alpha, "beta": beta, "gamma": gamma, "volume": l.volume()})
}

fn structure_params(extra: ObjectSchema) -> ObjectSchema {
    let mut s = ObjectSchema::new()
        .prop("poscar", P::string("Structure as POSCAR text"))
        .prop("jid", P::string("Dataset identifier, used when poscar is absent"));
    for (name, p) in extra.properties() {
        s = if extra.required_names().contains(name) { s.required(name, p.clone()) } else { s.prop(name, p.clone()) };
    }
    s
}

fn record_schema() -> ObjectSchema {
    ObjectSchema::new()
        .required("jid", P::string(""))
        .required("formula", P::string(""))
        .required("spacegroup", P::string(""))
        .required("bandgap_mbj", P::number("TBmBJ bandgap, eV; preferred when present").nullable())
        .required("bandgap_opt", P::number("OptB88vdW bandgap, eV"))
        .required("formation_energy", P::number("eV/atom"))
        .required("bulk_modulus", P::number("GPa").nullable())
}

fn lattice_schema() -> ObjectSchema {
    ["a", "b", "c", "alpha", "beta", "gamma", "volume"]
        .iter()
        .fold(ObjectSchema::new(), |s, k| s.required(k, P::number("")))
}

fn edited_result(extra: &str) -> ObjectSchema {
    ObjectSchema::new()
        .required("poscar", P::string("Resulting structure"))
        .required("formula", P::string(""))
        .required("num_sites", P::integer(""))
        .required(extra, P::string("Element of the affected site"))
}

fn descriptor(name: &str, description: &str, params: ObjectSchema, result: ObjectSchema, example: Value) -> ToolDescriptor {
    ToolDescriptor {
        name: name.to_string(),
        description: description.to_string(),
        params,
        result,
        enabled: true,
        example: Some(example),
    }
}

pub fn builtin_registry(data: Arc<Dataset>, config: ToolkitConfig) -> Registry {
    let ctx = Arc::new(Ctx { data, config });
    let mut r = Registry::new();
    let mut add = |d: ToolDescriptor, f: fn(&Ctx, &Value) -> Result<Value, ToolFailure>| {
        let ctx = Arc::clone(&ctx);
        r.register(d, move |args| f(&ctx, args)).expect("built-in names are unique and valid");
    };

    add(
        descriptor(
            "jarvis_dft_query",
            "Search the materials database. All filters combine with AND; at least one is required. \
             Records are sorted by jid and omit structures (fetch them with get_structure).",
            ObjectSchema::new()
                .prop("elements", P::array_of(P::string(""), "Elements every record must contain"))
                .prop("formula", P::string("Reduced formula, e.g. GaN"))
                .prop("bandgap_min", P::number("Lower bound on bandgap_opt, eV"))
                .prop("bandgap_max", P::number("Upper bound on bandgap_opt, eV"))
                .prop("formation_energy_max", P::number("Upper bound, eV/atom"))
                .prop("spacegroup", P::string("Hermann-Mauguin symbol, e.g. P6_3mc"))
                .prop("sort_by", P::string("Sort key").one_of(&["jid", "formation_energy"]))
                .prop("limit", P::integer("Maximum records, 1 to 50, default 10")),
            ObjectSchema::new()
                .required("count", P::integer("Number of records returned"))
                .required("records", P::array_of(P::object(Some(record_schema()), ""), "")),
            json!({"formula": "GaN", "spacegroup": "P6_3mc"}),
        ),
        query_tool,
    );
    add(
        descriptor(
            "get_structure",
            "Fetch the crystal structure of a database record as POSCAR text.",
            ObjectSchema::new().required("jid", P::string("Dataset identifier")),
            ObjectSchema::new()
                .required("jid", P::string(""))
                .required("formula", P::string(""))
                .required("poscar", P::string("")),
            json!({"jid": "JVASP-1002"}),
        ),
        get_structure_tool,
    );
    add(
        descriptor(
            "make_supercell",
            "Replicate a structure n1 x n2 x n3 times along its lattice vectors.",
            structure_params(
                ObjectSchema::new().required("scaling", P::array_of(P::integer(""), "Three positive multipliers")),
            ),
            ObjectSchema::new()
                .required("poscar", P::string(""))
                .required("formula", P::string(""))
                .required("num_sites", P::integer("")),
            json!({"jid": "JVASP-30", "scaling": [2, 2, 1]}),
        ),
        supercell_tool,
    );
    add(
        descriptor(
            "substitute_site",
            "Replace the element on one site (0-based index) to model doping.",
            structure_params(
                ObjectSchema::new()
                    .required("site_index", P::integer("0-based site index"))
                    .required("element", P::string("New element symbol")),
            ),
            edited_result("replaced"),
            json!({"poscar": "$step3.poscar", "site_index": 0, "element": "Al"}),
        ),
        substitute_tool,
    );
    add(
        descriptor(
            "create_vacancy",
            "Remove one site (0-based index) from a structure.",
            structure_params(ObjectSchema::new().required("site_index", P::integer("0-based site index"))),
            edited_result("removed"),
            json!({"jid": "JVASP-1002", "site_index": 0}),
        ),
        vacancy_tool,
    );
    add(
        descriptor(
            "relax_structure",
            "Relax atomic positions in a fixed cell with a Lennard-Jones force field; reports energies, \
             convergence and the lattice parameters before and after.",
            structure_params(ObjectSchema::new().prop("max_steps", P::integer("Step budget, default 200"))),
            ObjectSchema::new()
                .required("final", P::string("Relaxed structure as POSCAR"))
                .required("initial_energy", P::number("Model units"))
                .required("final_energy", P::number("Model units"))
                .required("steps", P::integer(""))
                .required("converged", P::boolean(""))
                .required("max_force", P::number("Model units"))
                .required(
                    "lattice_parameters",
                    P::object(
                        Some(
                            ObjectSchema::new()
                                .required("initial", P::object(Some(lattice_schema()), ""))
                                .required("final", P::object(Some(lattice_schema()), "")),
                        ),
                        "",
                    ),
                ),
            json!({"poscar": "$step4.poscar"}),
        ),
        relax_tool,
    );
    add(
        descriptor(
            "simulate_pxrd",
            "Simulate a powder X-ray diffraction pattern (Cu K-alpha by default) and list its peaks.",
            structure_params(
                ObjectSchema::new()
                    .prop("wavelength", P::number("Wavelength in Å, default 1.5406"))
                    .prop("two_theta_min", P::number("Degrees, default 10"))
                    .prop("two_theta_max", P::number("Degrees, default 90"))
                    .prop("step", P::number("Grid step in degrees, default 0.02"))
                    .prop("fwhm", P::number("Gaussian FWHM in degrees, default 0.1"))
                    .prop("peak_threshold", P::number("Minimum relative peak intensity, 0 to 100, default 1")),
            ),
            ObjectSchema::new()
                .required("two_theta", P::array_of(P::number(""), "Degrees"))
                .required("intensity", P::array_of(P::number(""), "Scaled so the maximum is 100"))
                .required(
                    "peaks",
                    P::array_of(
                        P::object(
                            Some(
                                ObjectSchema::new()
                                    .required("two_theta", P::number(""))
                                    .required("intensity", P::number(""))
                                    .required("hkl", P::array_of(P::integer(""), "").nullable()),
                            ),
                            "",
                        ),
                        "",
                    ),
                ),
            json!({"jid": "JVASP-1002"}),
        ),
        pxrd_tool,
    );
    add(
        descriptor(
            "predict_properties",
            "Estimate formation energy, bandgaps (OptB88vdW and TBmBJ) and bulk modulus for a structure.",
            structure_params(ObjectSchema::new()),
            ObjectSchema::new()
                .required("formation_energy", P::number("eV/atom"))
                .required("bandgap_opt", P::number("eV"))
                .required("bandgap_mbj", P::number("eV"))
                .required("bulk_modulus", P::number("GPa"))
                .required("formula", P::string(""))
                .required("num_sites", P::integer(""))
                .required("note", P::string("Methodological caveat")),
            json!({"jid": "JVASP-1151"}),
        ),
        predict_tool,
    );
    add(
        descriptor(
            "bandstructure_stub",
            "Two-band electronic structure along Γ-X whose gap follows predict_properties.",
            structure_params(ObjectSchema::new().prop("npoints", P::integer("k-points, default 50"))),
            ObjectSchema::new()
                .required("kpath_labels", P::array_of(P::string(""), ""))
                .required("kpoints", P::array_of(P::number(""), "Path coordinate in radians"))
                .required("energies", P::array_of(P::array_of(P::number(""), ""), "Bands x k-points, eV"))
                .required("bandgap", P::number("eV")),
            json!({"poscar": "$step5.final"}),
        ),
        bands_tool,
    );
    add(
        descriptor(
            "generate_interface",
            "Build a heterostructure by lattice-matching the basal planes of two structures and \
             stacking B on A with a 2.5 Å gap and 15 Å vacuum.",
            ObjectSchema::new()
                .prop("poscar_a", P::string("Substrate POSCAR"))
                .prop("jid_a", P::string("Substrate jid, used when poscar_a is absent"))
                .prop("poscar_b", P::string("Film POSCAR"))
                .prop("jid_b", P::string("Film jid, used when poscar_b is absent"))
                .prop("max_area", P::number("Largest in-plane supercell area in Å², default 200, at most 400"))
                .prop("strain_tol", P::number("Largest accepted mean strain, default 0.05")),
            ObjectSchema::new()
                .required("interface", P::string("Combined structure as POSCAR"))
                .required("strain", P::number("Mean absolute strain on B"))
                .required("matched_cells", P::array_of(P::integer(""), "i, j for A then k, l for B"))
                .required("formula", P::string(""))
                .required("num_sites", P::integer("")),
            json!({"jid_a": "JVASP-30", "jid_b": "JVASP-39214"}),
        ),
        interface_tool,
    );
    add(
        descriptor(
            "compile_report",
            "Collect results into a report. style \"table\" returns rows, \"summary\" returns a markdown \
             table, \"structure\" returns lattice parameters and all atomic coordinates of inputs.poscar.",
            ObjectSchema::new()
                .required("style", P::string("Report style").one_of(&["table", "summary", "structure"]))
                .required("inputs", P::object(None, "Named results, usually $stepN references"))
                .prop("title", P::string("Optional heading")),
            ObjectSchema::new()
                .required("style", P::string(""))
                .prop("title", P::string(""))
                .prop("rows", P::array_of(P::object(None, "{source, property, value}"), ""))
                .prop("text", P::string("Markdown"))
                .prop("structure", P::object(None, "")),
            json!({"style": "table", "inputs": {"properties": "$step7"}}),
        ),
        report_tool,
    );

    let mut lit = descriptor(
        "literature_search",
        "Search published literature (requires an external service).",
        ObjectSchema::new().required("query", P::string("Search text")),
        ObjectSchema::new().required("results", P::array_of(P::object(None, ""), "")),
        json!({"query": "GaN doping"}),
    );
    lit.enabled = false;
    add(lit, |_, _| Err(ToolFailure::new(FailureKind::NotEnabled, "not_enabled", "literature search is not enabled")));

    r
}

fn query_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let q: MaterialQuery =
        serde_json::from_value(args.clone()).map_err(|e| ToolFailure::invalid("bad_query", e.to_string()))?;
    let hits = ctx.data.query(&q).map_err(|e| match e {
        QueryError::EmptyFilter => ToolFailure::invalid("empty_filter", e.to_string())
            .with_hint("add at least one of elements, formula, bandgap_min, bandgap_max, formation_energy_max, spacegroup"),
        QueryError::BadLimit(_) => {
            ToolFailure::invalid("bad_limit", e.to_string()).with_hint(format!("use a limit between 1 and {MAX_LIMIT}"))
        }
        QueryError::UnknownElement(_) => ToolFailure::invalid("unknown_element", e.to_string()),
    })?;
    let records: Vec<Value> = hits.iter().map(|r| r.summary()).collect();
    Ok(json!({"count": records.len(), "records": records}))
}

fn get_structure_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let jid = args["jid"].as_str().unwrap_or_default();
    let rec = ctx
        .data
        .get(jid)
        .ok_or_else(|| ToolFailure::not_found(format!("no record with jid '{jid}'")).with_hint("search with jarvis_dft_query first"))?;
    Ok(json!({"jid": rec.jid, "formula": rec.formula, "poscar": serialize_poscar(&rec.structure)}))
}

fn structure_out(ctx: &Ctx, s: &CrystalStructure) -> Result<Map<String, Value>, ToolFailure> {
    ctx.check_size(s)?;
    let mut m = Map::new();
    m.insert("poscar".into(), json!(serialize_poscar(s)));
    m.insert("formula".into(), json!(s.formula()));
    m.insert("num_sites".into(), json!(s.num_sites()));
    Ok(m)
}

fn supercell_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let s = ctx.structure(args, "poscar", "jid")?;
    let n: Vec<u64> = args["scaling"].as_array().into_iter().flatten().filter_map(Value::as_u64).collect();
    let bad = || ToolFailure::invalid("bad_scaling", "scaling must be three positive integers").with_hint("e.g. [2, 2, 1]");
    if n.len() != 3 || args["scaling"].as_array().map(Vec::len) != Some(3) {
        return Err(bad());
    }
    let cap = |x: u64| u32::try_from(x).unwrap_or(u32::MAX);
    let out = s.make_supercell(cap(n[0]), cap(n[1]), cap(n[2])).map_err(structure_failure)?;
    Ok(Value::Object(structure_out(ctx, &out)?))
}

fn site_index(args: &Value) -> Result<usize, ToolFailure> {
    args["site_index"]
        .as_u64()
        .map(|i| i as usize)
        .ok_or_else(|| ToolFailure::invalid("index_out_of_range", "site_index must be a non-negative integer"))
}

fn substitute_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let s = ctx.structure(args, "poscar", "jid")?;
    let idx = site_index(args)?;
    let el = args["element"].as_str().unwrap_or_default();
    let out = s.substitute_site(idx, el).map_err(structure_failure)?;
    let mut m = structure_out(ctx, &out)?;
    m.insert("replaced".into(), json!(s.sites()[idx].element()));
    Ok(Value::Object(m))
}

fn vacancy_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let s = ctx.structure(args, "poscar", "jid")?;
    let idx = site_index(args)?;
    let out = s.create_vacancy(idx).map_err(structure_failure)?;
    let mut m = structure_out(ctx, &out)?;
    m.insert("removed".into(), json!(s.sites()[idx].element()));
    Ok(Value::Object(m))
}

fn relax_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let s = ctx.structure(args, "poscar", "jid")?;
    let max_steps = match get_u64(args, "max_steps") {
        None => RelaxOptions::default().max_steps,
        Some(n @ 1..=10_000) => n as usize,
        Some(n) => return Err(ToolFailure::invalid("bad_max_steps", format!("max_steps must be 1 to 10000, got {n}"))),
    };
    let res = relax::relax(&s, &RelaxOptions { max_steps, ..Default::default() }).map_err(|e| match e {
        RelaxError::SiteCountOutOfRange(_) => ToolFailure::unphysical("site_count_out_of_range", e.to_string()),
        RelaxError::Structure(e) => structure_failure(e),
    })?;
    Ok(json!({
        "final": serialize_poscar(&res.structure),
        "initial_energy": res.initial_energy,
        "final_energy": res.final_energy,
        "steps": res.steps,
        "converged": res.converged,
        "max_force": res.max_force,
        "lattice_parameters": {
            "initial": lattice_json(s.lattice()),
            "final": lattice_json(res.structure.lattice()),
        },
    }))
}

fn pxrd_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let s = ctx.structure(args, "poscar", "jid")?;
    let xrd_failure = |e: XrdError| ToolFailure::invalid("bad_pattern_settings", e.to_string());
    let src = match get_f64(args, "wavelength") {
        Some(w) => RadiationSource::new("custom", w).map_err(xrd_failure)?,
        None => RadiationSource::cu_k_alpha(),
    };
    let d = PatternSettings::default();
    let settings = PatternSettings {
        min_two_theta: get_f64(args, "two_theta_min").unwrap_or(d.min_two_theta),
        max_two_theta: get_f64(args, "two_theta_max").unwrap_or(d.max_two_theta),
        step: get_f64(args, "step").unwrap_or(d.step),
        fwhm: get_f64(args, "fwhm").unwrap_or(d.fwhm),
    };
    let mut pattern = xrd::simulate_pxrd(&s, &src, settings).map_err(xrd_failure)?;
    if let Some(t) = get_f64(args, "peak_threshold") {
        if !(0.0..=100.0).contains(&t) {
            return Err(ToolFailure::invalid("bad_threshold", format!("peak_threshold must be in [0, 100], got {t}")));
        }
        pattern.peaks = xrd::peak_list(&pattern, t);
    }
    serde_json::to_value(&pattern).map_err(|e| ToolFailure::internal(e.to_string()))
}

fn predict_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let s = ctx.structure(args, "poscar", "jid")?;
    let p = properties::predict_properties(&s).map_err(predict_failure)?;
    Ok(json!({
        "formation_energy": p.formation_energy,
        "bandgap_opt": p.bandgap_opt,
        "bandgap_mbj": p.bandgap_mbj,
        "bulk_modulus": p.bulk_modulus,
        "formula": s.formula(),
        "num_sites": s.num_sites(),
        "note": STUB_NOTE,
    }))
}

fn bands_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let s = ctx.structure(args, "poscar", "jid")?;
    let npoints = match get_u64(args, "npoints") {
        None => DEFAULT_KPOINTS,
        Some(n @ 2..=2000) => n as usize,
        Some(n) => return Err(ToolFailure::invalid("bad_npoints", format!("npoints must be 2 to 2000, got {n}"))),
    };
    let b = properties::bandstructure(&s, npoints).map_err(predict_failure)?;
    serde_json::to_value(&b).map_err(|e| ToolFailure::internal(e.to_string()))
}

fn interface_tool(ctx: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let a = ctx.structure(args, "poscar_a", "jid_a")?;
    let b = ctx.structure(args, "poscar_b", "jid_b")?;
    let max_area = get_f64(args, "max_area").unwrap_or(DEFAULT_MAX_AREA);
    let tol = get_f64(args, "strain_tol").unwrap_or(DEFAULT_STRAIN_TOL);
    let (s, m) = interface::build_interface(&a, &b, max_area, tol).map_err(|e| match e {
        InterfaceError::NoMatchWithinTolerance { ref best, .. } => {
            let hint = match best {
                Some(b) => format!("closest candidate has strain {:.4}; raise strain_tol or max_area", b.strain),
                None => "raise max_area so at least one supercell fits".to_string(),
            };
            ToolFailure::unphysical("no_match_within_tolerance", e.to_string()).with_hint(hint)
        }
        InterfaceError::Structure(e) => structure_failure(e),
        other => ToolFailure::invalid("bad_interface_settings", other.to_string()),
    })?;
    ctx.check_size(&s)?;
    Ok(json!({
        "interface": serialize_poscar(&s),
        "strain": m.strain,
        "matched_cells": m.cells,
        "formula": s.formula(),
        "num_sites": s.num_sites(),
    }))
}

/// Flattens scalars (and short scalar arrays) into `(path, value)` pairs.
/// Multi-line or long strings, such as POSCAR text, are left out.
fn flatten(path: &str, v: &Value, depth: usize, out: &mut Vec<(String, Value)>) {
    let scalar = |v: &Value| !v.is_array() && !v.is_object();
    match v {
        Value::String(s) if s.contains('\n') || s.len() > 80 => {}
        Value::Object(m) if depth < 4 => {
            for (k, child) in m {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                flatten(&p, child, depth + 1, out);
            }
        }
        Value::Array(a) if a.len() <= 6 && a.iter().all(scalar) => out.push((path.to_string(), v.clone())),
        v if scalar(v) => out.push((path.to_string(), v.clone())),
        _ => {}
    }
}

fn report_rows(inputs: &Map<String, Value>) -> Vec<Value> {
    let mut rows = Vec::new();
    for (source, v) in inputs {
        // rows produced by an earlier table report pass through unchanged
        if let Some(existing) = v.as_array().filter(|a| {
            !a.is_empty() && a.iter().all(|r| r.get("source").is_some() && r.get("property").is_some())
        }) {
            rows.extend(existing.iter().cloned());
            continue;
        }
        let mut pairs = Vec::new();
        flatten("", v, 0, &mut pairs);
        for (property, value) in pairs {
            rows.push(json!({"source": source, "property": if property.is_empty() { "value".into() } else { property }, "value": value}));
        }
    }
    rows
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn report_tool(_: &Ctx, args: &Value) -> Result<Value, ToolFailure> {
    let style = args["style"].as_str().unwrap_or_default();
    let inputs = args["inputs"].as_object().cloned().unwrap_or_default();
    let mut out = Map::new();
    out.insert("style".into(), json!(style));
    if let Some(t) = args.get("title").and_then(Value::as_str) {
        out.insert("title".into(), json!(t));
    }
    match style {
        "table" => {
            out.insert("rows".into(), Value::Array(report_rows(&inputs)));
        }
        "summary" => {
            let mut text = String::new();
            if let Some(t) = args.get("title").and_then(Value::as_str) {
                text.push_str(&format!("## {t}\n\n"));
            }
            text.push_str("| source | property | value |\n|---|---|---|\n");
            for row in report_rows(&inputs) {
                text.push_str(&format!(
                    "| {} | {} | {} |\n",
                    cell_text(&row["source"]),
                    cell_text(&row["property"]),
                    cell_text(&row["value"])
                ));
            }
            out.insert("text".into(), json!(text));
        }
        "structure" => {
            let text = inputs.get("poscar").and_then(Value::as_str).ok_or_else(|| {
                ToolFailure::invalid("missing_structure", "inputs.poscar must hold POSCAR text")
                    .with_hint("e.g. {\"poscar\": \"$step3.interface\"}")
            })?;
            let s = parse_poscar(text).map_err(structure_failure)?;
            let sites: Vec<Value> = (0..s.num_sites())
                .map(|i| json!({"element": s.sites()[i].element(), "frac": s.sites()[i].frac(), "cart": s.cartesian(i)}))
                .collect();
            out.insert(
                "structure".into(),
                json!({
                    "formula": s.formula(),
                    "num_sites": s.num_sites(),
                    "lattice": lattice_json(s.lattice()),
                    "lattice_vectors": s.lattice().matrix(),
                    "sites": sites,
                }),
            );
        }
        other => return Err(ToolFailure::invalid("bad_style", format!("unknown style '{other}'"))),
    }
    Ok(Value::Object(out))
}
