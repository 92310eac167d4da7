//! Tool registry, schemas and the built-in materials tools.

mod builtins;
pub mod dataset;
pub mod interface;
pub mod properties;
mod registry;
pub mod relax;
pub mod schema;

pub use builtins::{builtin_registry, default_registry, ToolkitConfig, BUILTIN_TOOLS, DEFAULT_MAX_SITES};
pub use dataset::{Dataset, MaterialQuery, MaterialRecord};
pub use registry::{FailureKind, Registry, RegistryError, ToolCall, ToolDescriptor, ToolError, ToolFailure, ToolHandler};
pub use schema::{is_placeholder, JsonType, ObjectSchema, PropertySchema, Violation};
