use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use logon_core::change::Workspace;
use logon_core::check::Diagnostic;
use logon_core::engine::RuleSet;
use logon_core::ide;
use logon_core::index::{RelExpr, RelationalIndex, TermIndex};
use logon_core::project::{build_project, BuildOptions, BuildReport, ProjectConfig, ProjectError};
use logon_core::render::{render_with_map, RenderOptions};

use crate::protocol::*;

type Reply = Result<Value, ErrorBody>;

/// Server state: the checked files, their versions and derived indexes.
///
/// Files of the project the server was started on are loaded at version 0
/// and behave like open documents that were never edited.
pub struct Session {
    ws: Workspace,
    versions: BTreeMap<String, u64>,
    indexes: Option<(RelationalIndex, TermIndex)>,
    last: StatsResult,
    outbox: Vec<Notification>,
    stopped: bool,
}

fn params<T: DeserializeOwned>(v: Value) -> Result<T, ErrorBody> {
    let v = if v.is_null() { json!({}) } else { v };
    serde_json::from_value(v).map_err(|e| ErrorBody::new(ErrorCode::InvalidParams, e.to_string()))
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("protocol values serialize")
}

fn not_found(what: impl Into<String>) -> ErrorBody {
    ErrorBody::new(ErrorCode::NotFound, what)
}

impl Session {
    pub fn new(rules: RuleSet) -> Self {
        Session {
            ws: Workspace::new(rules),
            versions: BTreeMap::new(),
            indexes: None,
            last: StatsResult::default(),
            outbox: Vec::new(),
            stopped: false,
        }
    }

    /// Builds the project (refreshing its cache) and loads its files.
    pub fn for_project(config: &ProjectConfig, rules: RuleSet) -> Result<(Self, BuildReport), ProjectError> {
        let (report, project) = build_project(config, &rules, BuildOptions::default())?;
        let ws = Workspace::open(project.sources.iter().map(|(n, t)| (n.as_str(), t.as_str())), rules);
        let versions = project.sources.keys().map(|n| (n.clone(), 0)).collect();
        let s = Session {
            ws,
            versions,
            indexes: Some((project.relations, project.terms)),
            last: StatsResult::default(),
            outbox: Vec::new(),
            stopped: false,
        };
        Ok((s, report))
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    /// Notifications produced since the last call.
    pub fn drain_notifications(&mut self) -> Vec<Notification> {
        std::mem::take(&mut self.outbox)
    }

    pub fn handle(&mut self, req: Request) -> Response {
        let outcome = self.dispatch(&req.method, req.params);
        match outcome {
            Ok(v) => Response {
                id: req.id,
                result: Some(v),
                error: None,
            },
            Err(e) => Response {
                id: req.id,
                result: None,
                error: Some(e),
            },
        }
    }

    /// Handles one line of the stdio transport.
    pub fn handle_line(&mut self, line: &str) -> Response {
        match serde_json::from_str::<Request>(line) {
            Ok(req) => self.handle(req),
            Err(e) => Response {
                id: Value::Null,
                result: None,
                error: Some(ErrorBody::new(ErrorCode::ParseError, e.to_string())),
            },
        }
    }

    fn dispatch(&mut self, method: &str, p: Value) -> Reply {
        match method {
            "initialize" => self.initialize(params(p)?),
            "didOpen" => self.did_open(params(p)?),
            "didChange" => self.did_change(params(p)?),
            "didClose" => self.did_close(params(p)?),
            "diagnostics" => {
                let p: UriParams = params(p)?;
                self.diagnostics(&p.uri)
            }
            "typeAt" => self.type_at(params(p)?),
            "completionsAt" => self.completions_at(params(p)?),
            "definitionAt" => self.definition_at(params(p)?),
            "related" => self.related(params(p)?),
            "search" => self.search(params(p)?),
            "astOf" => self.ast_of(params(p)?),
            "subtermAt" => self.subterm_at(params(p)?),
            "render" => self.render(params(p)?),
            "stats" => Ok(to_value(&self.last)),
            "shutdown" => {
                self.stopped = true;
                Ok(Value::Null)
            }
            _ => Err(ErrorBody::new(ErrorCode::MethodNotFound, format!("unknown method `{method}`"))),
        }
    }

    fn initialize(&mut self, p: InitializeParams) -> Reply {
        if let Some(v) = p.protocol_version {
            if v != PROTOCOL_VERSION {
                return Err(ErrorBody::new(
                    ErrorCode::ProtocolMismatch,
                    format!("client speaks version {v}, server {PROTOCOL_VERSION}"),
                ));
            }
        }
        Ok(json!({
            "protocolVersion": PROTOCOL_VERSION,
            "server": "logon",
            "methods": METHODS,
            "notifications": ["openLocation"],
        }))
    }

    fn version(&self, uri: &str) -> Result<u64, ErrorBody> {
        self.versions
            .get(uri)
            .copied()
            .ok_or_else(|| not_found(format!("unknown document `{uri}`")))
    }

    fn edit(&mut self, uri: &str, text: &str) {
        let delta = self.ws.edit(uri, text);
        let stats = self.ws.stats();
        self.last = StatsResult {
            edits: stats.edits,
            reparsed: stats.reparsed,
            revalidated: stats.revalidated,
            last_reparsed: delta.reparsed,
            last_revalidated: delta.revalidated.clone(),
        };
        // even a pure shift moves the positions the indexes report
        self.indexes = None;
    }

    fn did_open(&mut self, p: OpenParams) -> Reply {
        let version = p.version.unwrap_or(1);
        if let Some(&old) = self.versions.get(&p.uri) {
            if version <= old {
                return Err(ErrorBody::new(ErrorCode::StaleVersion, format!("version {version} ≤ {old}")));
            }
        }
        self.versions.insert(p.uri.clone(), version);
        self.edit(&p.uri, &p.text);
        self.diagnostics(&p.uri)
    }

    fn did_change(&mut self, p: ChangeParams) -> Reply {
        let old = self.version(&p.uri)?;
        if p.version <= old {
            return Err(ErrorBody::new(ErrorCode::StaleVersion, format!("version {} ≤ {old}", p.version)));
        }
        self.versions.insert(p.uri.clone(), p.version);
        self.edit(&p.uri, &p.text);
        self.diagnostics(&p.uri)
    }

    fn did_close(&mut self, p: UriParams) -> Reply {
        self.version(&p.uri)?;
        self.versions.remove(&p.uri);
        self.ws.close(&p.uri);
        self.indexes = None;
        Ok(json!({ "uri": p.uri }))
    }

    fn file_diagnostics(&self, uri: &str) -> Vec<Diagnostic> {
        let len = self.ws.text(uri).map_or(0, str::len);
        self.ws
            .world()
            .diagnostics()
            .into_iter()
            .filter(|d| d.src.as_ref().is_some_and(|r| r.file.as_str() == uri))
            .map(|mut d| {
                if let Some(r) = &mut d.src {
                    r.end = r.end.min(len);
                    r.start = r.start.min(r.end);
                }
                d
            })
            .collect()
    }

    fn diagnostics(&self, uri: &str) -> Reply {
        let version = self.version(uri)?;
        Ok(to_value(DiagnosticsResult {
            uri: uri.to_string(),
            version,
            diagnostics: self.file_diagnostics(uri),
        }))
    }

    fn at(&self, uri: &str, version: u64, key: &str, v: Value) -> Value {
        json!({ "uri": uri, "version": version, key: v })
    }

    fn type_at(&self, p: PositionParams) -> Reply {
        let version = self.version(&p.uri)?;
        let t = ide::type_at(self.ws.world(), self.ws.rules(), &p.uri, p.offset);
        Ok(self.at(&p.uri, version, "result", to_value(t)))
    }

    fn completions_at(&self, p: PositionParams) -> Reply {
        let version = self.version(&p.uri)?;
        let items = ide::completions_at(self.ws.world(), self.ws.rules(), &p.uri, p.offset);
        Ok(self.at(&p.uri, version, "items", to_value(items)))
    }

    fn definition_at(&mut self, p: DefinitionParams) -> Reply {
        let version = self.version(&p.uri)?;
        let loc = ide::definition_at(self.ws.world(), &p.uri, p.offset).ok_or_else(|| not_found("no constant at this position"))?;
        if p.open {
            self.outbox.push(Notification {
                method: "openLocation".into(),
                params: json!({ "ref": loc }),
            });
        }
        Ok(self.at(&p.uri, version, "location", to_value(loc)))
    }

    fn indexes(&mut self) -> &(RelationalIndex, TermIndex) {
        let w = self.ws.world();
        self.indexes.get_or_insert_with(|| (RelationalIndex::build(w), TermIndex::build(w)))
    }

    fn related(&mut self, p: RelatedParams) -> Reply {
        let version = self.version(&p.uri)?;
        let expr = RelExpr::parse(&p.relation).map_err(|e| ErrorBody::new(ErrorCode::QueryParseError, e.to_string()))?;
        self.indexes();
        let (rel, _) = self.indexes.as_ref().expect("built above");
        let locs = ide::related_at(self.ws.world(), rel, &p.uri, p.offset, &expr).ok_or_else(|| not_found("no name at this position"))?;
        Ok(self.at(&p.uri, version, "locations", to_value(locs)))
    }

    fn search(&mut self, p: SearchParams) -> Reply {
        let q =
            ide::parse_query(self.ws.world(), &p.query, p.theory.as_deref()).map_err(|e| ErrorBody::new(ErrorCode::QueryParseError, e))?;
        let (_, terms) = self.indexes();
        Ok(json!({ "hits": terms.search(&q) }))
    }

    fn ast_of(&self, p: UriParams) -> Reply {
        let version = self.version(&p.uri)?;
        let doc = self
            .ws
            .world()
            .docs
            .iter()
            .find(|d| d.file.as_str() == p.uri)
            .ok_or_else(|| not_found(format!("unknown document `{}`", p.uri)))?;
        Ok(self.at(&p.uri, version, "document", to_value(doc)))
    }

    fn subterm_at(&self, p: RangeParams) -> Reply {
        let version = self.version(&p.uri)?;
        let r = ide::subterm_range(self.ws.world(), &p.uri, p.start, p.end);
        Ok(self.at(&p.uri, version, "range", to_value(r)))
    }

    fn render(&self, p: RenderParams) -> Reply {
        let version = self.version(&p.uri)?;
        let w = self.ws.world();
        let opts = RenderOptions {
            show_inferred: p.show_inferred,
        };
        let mut out = Vec::new();
        if let Some(doc) = w.docs.iter().find(|d| d.file.as_str() == p.uri) {
            for u in doc.units() {
                let (Some(t), Some(table)) = (w.elaborated(&u.slot), w.table(u.slot.constant.theory())) else {
                    continue;
                };
                let r = render_with_map(t, table, opts);
                out.push(RenderedSlot {
                    slot: u.slot.clone(),
                    src: u.src.clone(),
                    text: r.text,
                    spans: r.spans,
                });
            }
        }
        Ok(self.at(&p.uri, version, "slots", to_value(out)))
    }
}
