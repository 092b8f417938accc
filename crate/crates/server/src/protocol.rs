//! Messages. The same envelopes travel as lines on stdio and as HTTP bodies.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use logon_core::check::Diagnostic;
use logon_core::model::{SlotId, SourceRef};
use logon_core::render::Span;

pub const PROTOCOL_VERSION: u32 = 1;

pub const METHODS: &[&str] = &[
    "initialize",
    "didOpen",
    "didChange",
    "didClose",
    "diagnostics",
    "typeAt",
    "completionsAt",
    "definitionAt",
    "related",
    "search",
    "astOf",
    "subtermAt",
    "render",
    "stats",
    "shutdown",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(default)]
    pub id: Value,
    pub method: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    ParseError,
    MethodNotFound,
    InvalidParams,
    NotFound,
    StaleVersion,
    QueryParseError,
    ProtocolMismatch,
}

impl ErrorBody {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ErrorBody {
            code,
            message: message.into(),
        }
    }
}

/// Server to client, unsolicited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub method: String,
    pub params: Value,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InitializeParams {
    #[serde(default)]
    pub protocol_version: Option<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OpenParams {
    pub uri: String,
    pub text: String,
    #[serde(default)]
    pub version: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ChangeParams {
    pub uri: String,
    pub version: u64,
    pub text: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UriParams {
    pub uri: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PositionParams {
    pub uri: String,
    pub offset: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DefinitionParams {
    pub uri: String,
    pub offset: usize,
    /// Also ask the client to open the location.
    #[serde(default)]
    pub open: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RelatedParams {
    pub uri: String,
    pub offset: usize,
    pub relation: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SearchParams {
    pub query: String,
    #[serde(default)]
    pub theory: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RangeParams {
    pub uri: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RenderParams {
    pub uri: String,
    #[serde(default)]
    pub show_inferred: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DiagnosticsResult {
    pub uri: String,
    pub version: u64,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RenderedSlot {
    pub slot: SlotId,
    #[serde(rename = "ref")]
    pub src: SourceRef,
    pub text: String,
    pub spans: Vec<Span>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsResult {
    pub edits: usize,
    pub reparsed: usize,
    pub revalidated: usize,
    pub last_reparsed: Vec<SlotId>,
    pub last_revalidated: Vec<SlotId>,
}
