//! Static HTML: one page per source file plus an index page.
//!
//! Declarations show their source-form rendering. Every subterm is a span
//! carrying its `data-path`, and the fully elaborated rendering sits in a
//! collapsed `<details>` next to it.

use std::fmt::Write as _;
use std::path::Path;

use crate::model::SlotId;
use crate::render::{render_with_map, RenderOptions, Rendered};
use crate::surface::Document;

use super::{write_atomic, Project, ProjectError};

const STYLE: &str = "body{font-family:sans-serif;max-width:60em;margin:auto}\
pre{margin:.2em 0}.decl{margin:.6em 0}.err{color:#b00}\
span[data-path]:hover{background:#eef}details>summary{cursor:pointer;color:#666}";

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// The rendering with one nested span per subterm.
pub fn spans_to_html(r: &Rendered) -> String {
    let mut spans: Vec<_> = r.spans.iter().filter(|s| s.start < s.end).collect();
    // outer spans first at equal starts
    spans.sort_by(|a, b| (a.start, std::cmp::Reverse(a.end), a.path.len()).cmp(&(b.start, std::cmp::Reverse(b.end), b.path.len())));
    let mut out = String::new();
    let mut open: Vec<usize> = Vec::new();
    let mut pos = 0;
    let mut next = spans.iter().peekable();
    let text = &r.text;
    loop {
        let close_at = open.last().copied();
        let open_at = next.peek().map(|s| s.start);
        let step = match (close_at, open_at) {
            (Some(c), Some(o)) => c.min(o),
            (Some(c), None) => c,
            (None, Some(o)) => o,
            (None, None) => text.len(),
        };
        out.push_str(&escape(&text[pos..step]));
        pos = step;
        if close_at == Some(step) {
            out.push_str("</span>");
            open.pop();
            continue;
        }
        match next.peek() {
            Some(s) if s.start == step => {
                let path: Vec<String> = s.path.iter().map(|i| i.to_string()).collect();
                let _ = write!(out, "<span data-path=\"{}\">", path.join("."));
                open.push(s.end);
                next.next();
            }
            _ => break,
        }
    }
    out
}

fn page_name(file: &str) -> String {
    format!("{}.html", file.replace('/', "__"))
}

fn rendered_slot(p: &Project, slot: &SlotId, opts: RenderOptions) -> Option<Rendered> {
    let t = p.world.elaborated(slot)?;
    let table = p.world.table(slot.constant.theory())?;
    Some(render_with_map(t, table, opts))
}

/// The page for one source file.
pub fn file_page(p: &Project, doc: &Document) -> String {
    let mut out = String::new();
    let title = escape(doc.file.as_str());
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{title}</title><style>{STYLE}</style></head><body>\n<p><a href=\"index.html\">index</a></p>\n<h1>{title}</h1>\n"
    );
    let diags = p.world.diagnostics();
    for th in &doc.theories {
        let _ = writeln!(
            out,
            "<details open class=\"theory\" id=\"{0}\"><summary>theory {0}</summary>",
            escape(&th.name)
        );
        for inc in &th.includes {
            let _ = writeln!(out, "<pre>include {}</pre>", escape(&inc.theory));
        }
        for d in &th.declarations {
            let _ = writeln!(out, "<div class=\"decl\" id=\"{}\">", escape(&format!("{}?{}", th.name, d.name)));
            for (sep, unit) in [(":", d.ty.as_ref()), ("=", d.def.as_ref())] {
                let Some(unit) = unit else { continue };
                let slot = &unit.slot;
                let lead = if sep == ":" {
                    format!("{} : ", escape(&d.name))
                } else {
                    format!("{} = ", " ".repeat(d.name.chars().count()))
                };
                match rendered_slot(p, slot, RenderOptions::source()) {
                    Some(r) => {
                        let _ = writeln!(
                            out,
                            "<pre data-slot=\"{}\">{lead}{}</pre>",
                            escape(&slot.to_string()),
                            spans_to_html(&r)
                        );
                        if let Some(full) = rendered_slot(p, slot, RenderOptions::full()) {
                            if full.text != r.text {
                                let _ = writeln!(
                                    out,
                                    "<details class=\"inferred\"><summary>elaborated</summary><pre>{lead}{}</pre></details>",
                                    spans_to_html(&full)
                                );
                            }
                        }
                    }
                    None => {
                        let _ = writeln!(out, "<pre>{lead}{}</pre>", escape(&unit.text));
                    }
                }
                for dg in diags.iter().filter(|x| x.slot.as_ref() == Some(slot)) {
                    let _ = writeln!(out, "<p class=\"err\">{}</p>", escape(&dg.message));
                }
            }
            out.push_str("</div>\n");
        }
        out.push_str("</details>\n");
    }
    out.push_str("</body></html>\n");
    out
}

/// The index page: one link per file, one line per theory.
pub fn index_page(p: &Project, docs: &[&Document]) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>index</title><style>{STYLE}</style></head><body>\n<h1>index</h1>\n<ul>\n"
    );
    for d in docs {
        let _ = write!(
            out,
            "<li><a href=\"{}\">{}</a>",
            page_name(d.file.as_str()),
            escape(d.file.as_str())
        );
        let names: Vec<String> = d.theories.iter().map(|t| escape(&t.name)).collect();
        if !names.is_empty() {
            let _ = write!(out, ": {}", names.join(", "));
        }
        out.push_str("</li>\n");
    }
    let _ = write!(out, "</ul>\n<p>{} errors</p>\n</body></html>\n", p.world.error_count());
    out
}

/// Writes every page into `dir`; returns the page file names.
pub fn write_site(p: &Project, dir: &Path) -> Result<Vec<String>, ProjectError> {
    let docs: Vec<&Document> = p.world.docs.iter().filter(|d| p.sources.contains_key(d.file.as_str())).collect();
    let mut written = Vec::new();
    for d in &docs {
        let name = page_name(d.file.as_str());
        write_atomic(&dir.join(&name), file_page(p, d).as_bytes())?;
        written.push(name);
    }
    write_atomic(&dir.join("index.html"), index_page(p, &docs).as_bytes())?;
    written.push("index.html".into());
    Ok(written)
}
