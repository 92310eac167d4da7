//! The JSON-Schema subset tools declare for their parameters and results:
//! typed properties, a required list, array item types, enums, nullability
//! and nested objects. Unknown properties are rejected.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JsonType {
    String,
    Number,
    Integer,
    Boolean,
    Array,
    Object,
    /// No type constraint.
    Any,
}

impl JsonType {
    fn name(self) -> &'static str {
        match self {
            JsonType::String => "string",
            JsonType::Number => "number",
            JsonType::Integer => "integer",
            JsonType::Boolean => "boolean",
            JsonType::Array => "array",
            JsonType::Object => "object",
            JsonType::Any => "any",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match self {
            JsonType::String => v.is_string(),
            JsonType::Number => v.is_number(),
            JsonType::Integer => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|f| f.fract() == 0.0),
            JsonType::Boolean => v.is_boolean(),
            JsonType::Array => v.is_array(),
            JsonType::Object => v.is_object(),
            JsonType::Any => true,
        }
    }
}

fn type_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertySchema {
    pub ty: JsonType,
    pub description: String,
    pub items: Option<Box<PropertySchema>>,
    pub object: Option<Box<ObjectSchema>>,
    pub allowed: Option<Vec<Value>>,
    pub nullable: bool,
}

impl PropertySchema {
    pub fn new(ty: JsonType, description: impl Into<String>) -> Self {
        Self { ty, description: description.into(), items: None, object: None, allowed: None, nullable: false }
    }

    pub fn string(description: impl Into<String>) -> Self {
        Self::new(JsonType::String, description)
    }

    pub fn number(description: impl Into<String>) -> Self {
        Self::new(JsonType::Number, description)
    }

    pub fn integer(description: impl Into<String>) -> Self {
        Self::new(JsonType::Integer, description)
    }

    pub fn boolean(description: impl Into<String>) -> Self {
        Self::new(JsonType::Boolean, description)
    }

    pub fn any(description: impl Into<String>) -> Self {
        Self::new(JsonType::Any, description)
    }

    pub fn array_of(item: PropertySchema, description: impl Into<String>) -> Self {
        let mut s = Self::new(JsonType::Array, description);
        s.items = Some(Box::new(item));
        s
    }

    pub fn object(schema: Option<ObjectSchema>, description: impl Into<String>) -> Self {
        let mut s = Self::new(JsonType::Object, description);
        s.object = schema.map(Box::new);
        s
    }

    pub fn one_of(mut self, values: &[&str]) -> Self {
        self.allowed = Some(values.iter().map(|v| json!(v)).collect());
        self
    }

    pub fn nullable(mut self) -> Self {
        self.nullable = true;
        self
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        match (self.ty, self.nullable) {
            (JsonType::Any, _) => {}
            (t, true) => {
                m.insert("type".into(), json!([t.name(), "null"]));
            }
            (t, false) => {
                m.insert("type".into(), json!(t.name()));
            }
        }
        if !self.description.is_empty() {
            m.insert("description".into(), json!(self.description));
        }
        if let Some(items) = &self.items {
            m.insert("items".into(), items.to_json());
        }
        if let Some(obj) = &self.object {
            if let Value::Object(o) = obj.to_json() {
                m.extend(o.into_iter().filter(|(k, _)| k != "type"));
            }
        }
        if let Some(allowed) = &self.allowed {
            m.insert("enum".into(), Value::Array(allowed.clone()));
        }
        Value::Object(m)
    }

    /// Short type label used in prompt rendering, e.g. `array<string>`.
    pub fn type_label(&self) -> String {
        let base = match (&self.items, self.ty) {
            (Some(item), JsonType::Array) => format!("array<{}>", item.type_label()),
            _ => self.ty.name().to_string(),
        };
        if self.nullable {
            format!("{base}|null")
        } else {
            base
        }
    }

    fn check(&self, path: &str, v: &Value, placeholders: bool, out: &mut Vec<Violation>) {
        if v.is_null() && self.nullable {
            return;
        }
        if placeholders && v.as_str().is_some_and(is_placeholder) {
            return;
        }
        if !self.ty.accepts(v) {
            out.push(Violation::new(path, format!("expected {}, found {}", self.ty.name(), type_of(v))));
            return;
        }
        if let Some(allowed) = &self.allowed {
            if !allowed.contains(v) {
                let opts: Vec<String> = allowed.iter().map(|a| a.to_string()).collect();
                out.push(Violation::new(path, format!("must be one of {}", opts.join(", "))));
            }
        }
        if let (Some(item), Value::Array(arr)) = (&self.items, v) {
            for (i, elem) in arr.iter().enumerate() {
                item.check(&format!("{path}[{i}]"), elem, placeholders, out);
            }
        }
        if let Some(obj) = &self.object {
            obj.check_into(path, v, placeholders, out);
        }
    }
}

/// `$step<id>` or `$step<id>.<path>`.
pub fn is_placeholder(s: &str) -> bool {
    s.strip_prefix("$step")
        .and_then(|rest| rest.split('.').next())
        .is_some_and(|id| !id.is_empty() && id.chars().all(|c| c.is_ascii_digit()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: &str, message: impl Into<String>) -> Self {
        Self { path: path.to_string(), message: message.into() }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectSchema {
    properties: Vec<(String, PropertySchema)>,
    required: Vec<String>,
}

impl ObjectSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn prop(mut self, name: &str, schema: PropertySchema) -> Self {
        self.properties.push((name.to_string(), schema));
        self
    }

    pub fn required(mut self, name: &str, schema: PropertySchema) -> Self {
        self.required.push(name.to_string());
        self.prop(name, schema)
    }

    pub fn properties(&self) -> &[(String, PropertySchema)] {
        &self.properties
    }

    pub fn required_names(&self) -> &[String] {
        &self.required
    }

    pub fn property(&self, name: &str) -> Option<&PropertySchema> {
        self.properties.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    /// Every required name must be declared as a property.
    pub fn is_consistent(&self) -> bool {
        self.required.iter().all(|r| self.property(r).is_some())
    }

    pub fn to_json(&self) -> Value {
        let props: Map<String, Value> = self.properties.iter().map(|(n, s)| (n.clone(), s.to_json())).collect();
        json!({
            "type": "object",
            "properties": props,
            "required": self.required,
            "additionalProperties": false,
        })
    }

    pub fn validate(&self, v: &Value) -> Result<(), Vec<Violation>> {
        self.collect(v, false)
    }

    /// Like `validate`, but string values of the form `$stepN.path` are
    /// accepted for any property type (they are resolved at execution time).
    pub fn validate_template(&self, v: &Value) -> Result<(), Vec<Violation>> {
        self.collect(v, true)
    }

    fn collect(&self, v: &Value, placeholders: bool) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        self.check_into("", v, placeholders, &mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    fn check_into(&self, path: &str, v: &Value, placeholders: bool, out: &mut Vec<Violation>) {
        let Some(obj) = v.as_object() else {
            out.push(Violation::new(if path.is_empty() { "$" } else { path }, format!("expected object, found {}", type_of(v))));
            return;
        };
        let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
        for r in &self.required {
            let nullable = self.property(r).is_some_and(|p| p.nullable);
            if obj.get(r).is_none_or(|v| v.is_null() && !nullable) {
                out.push(Violation::new(&join(r), "required property is missing"));
            }
        }
        for (k, val) in obj {
            match self.property(k) {
                Some(schema) => schema.check(&join(k), val, placeholders, out),
                None => {
                    let known: Vec<&str> = self.properties.iter().map(|(n, _)| n.as_str()).collect();
                    out.push(Violation::new(
                        &join(k),
                        format!("unknown property (expected one of: {})", known.join(", ")),
                    ));
                }
            }
        }
    }
}
