//! OpenAPI 3.1 document built from the route table and tool schemas.

use serde_json::{json, Map, Value};

use atomflow_core::toolkit::Registry;

use crate::app::{CHAT_ROUTE, TOOL_ROUTES, VERSION};

fn error_responses(codes: &[&str]) -> Map<String, Value> {
    codes
        .iter()
        .map(|c| {
            let mut r = json!({
                "description": describe(c),
                "content": {"application/json": {"schema": {"$ref": "#/components/schemas/ErrorBody"}}}
            });
            if *c == "429" {
                r["headers"] = json!({"Retry-After": {"schema": {"type": "integer", "minimum": 1}}});
            }
            (c.to_string(), r)
        })
        .collect()
}

fn describe(code: &str) -> &'static str {
    match code {
        "400" => "invalid request body",
        "401" => "missing or unknown API key",
        "404" => "unknown resource",
        "422" => "physically invalid input",
        "429" => "rate limited",
        "501" => "tool not enabled",
        "502" => "language model failure",
        "503" => "language model unavailable",
        "504" => "language model timeout",
        _ => "internal failure",
    }
}

fn json_body(schema: Value) -> Value {
    json!({"required": true, "content": {"application/json": {"schema": schema}}})
}

fn mode_param() -> Value {
    json!({"name": "mode", "in": "query", "required": false, "schema": {"type": "string", "enum": ["sync", "async"]}})
}

fn tool_operation(registry: &Registry, tool: &str, path: &str) -> Option<Value> {
    let d = registry.get(tool)?;
    let mut responses = error_responses(&["400", "401", "404", "422", "429", "500", "501"]);
    responses.insert(
        "200".into(),
        json!({
            "description": "tool result",
            "headers": {"cache": {"schema": {"type": "string", "enum": ["hit", "miss"]}}},
            "content": {"application/json": {"schema": {"$ref": format!("#/components/schemas/{tool}_result")}}}
        }),
    );
    responses.insert("202".into(), json!({"description": "job accepted", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/JobAccepted"}}}}));
    Some(json!({"post": {
        "operationId": path.trim_start_matches('/').replace(['/', '{', '}'], "_"),
        "summary": d.description,
        "parameters": [mode_param()],
        "requestBody": json_body(json!({"$ref": format!("#/components/schemas/{tool}_params")})),
        "responses": responses,
    }}))
}

/// Every path served by the gateway, in document order.
pub fn route_paths() -> Vec<&'static str> {
    let mut out = vec!["/health", "/openapi.json"];
    out.extend(TOOL_ROUTES.iter().map(|(p, _)| *p));
    out.extend(["/tools/{name}", CHAT_ROUTE, "/jobs", "/jobs/{id}"]);
    out
}

pub fn document(registry: &Registry) -> Value {
    let mut paths = Map::new();
    let public = json!([]);
    paths.insert(
        "/health".into(),
        json!({"get": {"operationId": "health", "security": public, "responses": {"200": {
            "description": "service is up",
            "content": {"application/json": {"schema": {"type": "object", "required": ["status", "version"],
                "properties": {"status": {"type": "string"}, "version": {"type": "string"}}}}}
        }}}}),
    );
    paths.insert(
        "/openapi.json".into(),
        json!({"get": {"operationId": "openapi", "security": public, "responses": {"200": {
            "description": "this document", "content": {"application/json": {"schema": {"type": "object"}}}
        }}}}),
    );
    for (path, tool) in TOOL_ROUTES {
        if let Some(op) = tool_operation(registry, tool, path) {
            paths.insert(path.into(), op);
        }
    }

    let names: Vec<&str> = registry.descriptors().map(|d| d.name.as_str()).collect();
    let variants: Vec<Value> = names.iter().map(|n| json!({"$ref": format!("#/components/schemas/{n}_params")})).collect();
    let mut generic = error_responses(&["400", "401", "404", "422", "429", "500", "501"]);
    generic.insert("200".into(), json!({"description": "tool result", "content": {"application/json": {"schema": {"type": "object"}}}}));
    generic.insert("202".into(), json!({"description": "job accepted", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/JobAccepted"}}}}));
    paths.insert(
        "/tools/{name}".into(),
        json!({"post": {
            "operationId": "invoke_tool",
            "summary": "Invoke any registered tool by name",
            "parameters": [
                {"name": "name", "in": "path", "required": true, "schema": {"type": "string", "enum": names}},
                mode_param()
            ],
            "requestBody": json_body(json!({"oneOf": variants})),
            "responses": generic,
        }}),
    );

    let mut chat = error_responses(&["400", "401", "429", "500", "502", "503", "504"]);
    chat.insert(
        "200".into(),
        json!({"description": "agent answer, or an event stream of plan, step, token and final frames",
            "content": {
                "application/json": {"schema": {"$ref": "#/components/schemas/AgentResponse"}},
                "text/event-stream": {"schema": {"$ref": "#/components/schemas/ChatFrame"}}
            }}),
    );
    chat.insert("202".into(), json!({"description": "job accepted", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/JobAccepted"}}}}));
    paths.insert(
        CHAT_ROUTE.into(),
        json!({"post": {
            "operationId": "agent_chat",
            "summary": "Plan, execute and summarize a tool workflow for a question",
            "parameters": [mode_param()],
            "requestBody": json_body(json!({"$ref": "#/components/schemas/ChatRequest"})),
            "responses": chat,
        }}),
    );

    let mut submit = error_responses(&["400", "401", "404", "429"]);
    submit.insert("202".into(), json!({"description": "job accepted", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/JobAccepted"}}}}));
    paths.insert(
        "/jobs".into(),
        json!({"post": {
            "operationId": "submit_job",
            "requestBody": json_body(json!({"$ref": "#/components/schemas/JobRequest"})),
            "responses": submit,
        }}),
    );
    let mut poll = error_responses(&["401", "404", "429"]);
    poll.insert("200".into(), json!({"description": "job state", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/JobRecord"}}}}));
    paths.insert(
        "/jobs/{id}".into(),
        json!({"get": {
            "operationId": "poll_job",
            "parameters": [{"name": "id", "in": "path", "required": true, "schema": {"type": "string"}}],
            "responses": poll,
        }}),
    );

    let mut schemas = Map::new();
    for d in registry.descriptors() {
        let mut p = d.params.to_json();
        p["description"] = json!(d.description);
        if !d.enabled {
            p["x-enabled"] = json!(false);
        }
        schemas.insert(format!("{}_params", d.name), p);
        schemas.insert(format!("{}_result", d.name), d.result.to_json());
    }
    schemas.insert(
        "ErrorBody".into(),
        json!({"type": "object", "required": ["code", "message", "hint"], "additionalProperties": false, "properties": {
            "code": {"type": "string"}, "message": {"type": "string"}, "hint": {"type": ["string", "null"]}
        }}),
    );
    schemas.insert(
        "JobAccepted".into(),
        json!({"type": "object", "required": ["job_id"], "properties": {
            "job_id": {"type": "string"}, "state": {"type": "string"}, "poll": {"type": "string"}
        }}),
    );
    schemas.insert(
        "JobRequest".into(),
        json!({"type": "object", "required": ["endpoint"], "additionalProperties": false, "properties": {
            "endpoint": {"type": "string", "description": "a tool route, /tools/{name}, a tool name or /agent/chat"},
            "body": {"type": "object"}
        }}),
    );
    schemas.insert(
        "JobRecord".into(),
        json!({"type": "object", "required": ["job_id", "endpoint", "body", "state", "created_ms", "updated_ms"], "properties": {
            "job_id": {"type": "string"},
            "endpoint": {"type": "string"},
            "body": {"type": "object"},
            "state": {"type": "string", "enum": ["queued", "running", "done", "failed"]},
            "result": {},
            "error": {"type": "string"},
            "created_ms": {"type": "integer"},
            "updated_ms": {"type": "integer"}
        }}),
    );
    schemas.insert(
        "ChatRequest".into(),
        json!({"type": "object", "required": ["query"], "additionalProperties": false, "properties": {
            "query": {"type": "string", "minLength": 1},
            "model": {"type": "string"},
            "temperature": {"type": "number", "minimum": 0, "maximum": 2},
            "stream": {"type": "boolean"}
        }}),
    );
    schemas.insert(
        "AgentResponse".into(),
        json!({"type": "object", "required": ["answer", "plan", "trace", "warnings"], "properties": {
            "answer": {"type": "string"},
            "plan": {"type": "object", "properties": {"steps": {"type": "array", "items": {"type": "object"}}}},
            "trace": {"type": "array", "items": {"type": "object"}},
            "warnings": {"type": "array", "items": {"type": "string"}}
        }}),
    );
    schemas.insert(
        "ChatFrame".into(),
        json!({"type": "object", "required": ["type"], "properties": {
            "type": {"type": "string", "enum": ["plan", "step", "token", "final", "error"]}
        }}),
    );

    json!({
        "openapi": "3.1.0",
        "info": {
            "title": "atomflow gateway",
            "version": VERSION,
            "description": "Materials tools and a tool-using agent behind API keys and per-key rate limits."
        },
        "security": [{"bearer": []}, {"apiKey": []}],
        "paths": paths,
        "components": {
            "securitySchemes": {
                "bearer": {"type": "http", "scheme": "bearer"},
                "apiKey": {"type": "apiKey", "in": "header", "name": "X-API-Key"}
            },
            "schemas": schemas
        }
    })
}
