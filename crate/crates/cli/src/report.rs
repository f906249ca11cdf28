use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1.0";

/// JSON document emitted by every subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: &'static str,
    pub command: String,
    pub tool_version: &'static str,
    /// `ok`, or the failure class when the command ran but did not succeed.
    pub status: String,
    pub inputs: Value,
    pub outputs: Value,
    pub warnings: Vec<String>,
    pub timing_ms: f64,
}

impl RunReport {
    pub fn new(command: &str, inputs: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            status: "ok".into(),
            inputs,
            outputs: Value::Null,
            warnings: Vec::new(),
            timing_ms: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
