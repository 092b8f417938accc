use std::io::{Read, Write};

use serde_json::{json, Value};

use logon_core::lf::lf_rules;
use logon_server::transport::{http_reply, serve_http_on, serve_stdio};
use logon_server::{Request, Session};

const LF: &str = include_str!("../../../fixtures/lf.mmt");
const PL: &str = include_str!("../../../fixtures/pl.mmt");

fn call(s: &mut Session, method: &str, params: Value) -> Value {
    let r = s.handle(Request {
        id: json!(1),
        method: method.into(),
        params,
    });
    assert!(r.error.is_none(), "{method}: {:?}", r.error);
    r.result.unwrap()
}

fn fail(s: &mut Session, method: &str, params: Value) -> String {
    let r = s.handle(Request {
        id: json!(1),
        method: method.into(),
        params,
    });
    serde_json::to_value(r.error.expect("an error")).unwrap()["code"]
        .as_str()
        .unwrap()
        .to_string()
}

fn opened(pl: &str) -> Session {
    let mut s = Session::new(lf_rules());
    call(&mut s, "didOpen", json!({"uri": "lf.mmt", "text": LF}));
    call(&mut s, "didOpen", json!({"uri": "pl.mmt", "text": pl}));
    s
}

fn offset(text: &str, after: &str, needle: &str) -> usize {
    let b = text.find(after).unwrap();
    b + text[b..].find(needle).unwrap()
}

#[test]
fn handshake() {
    let mut s = Session::new(lf_rules());
    let r = call(&mut s, "initialize", json!({"protocolVersion": 1}));
    assert_eq!(r["protocolVersion"], 1);
    assert!(r["methods"].as_array().unwrap().iter().any(|m| m == "typeAt"));
    assert_eq!(fail(&mut s, "initialize", json!({"protocolVersion": 7})), "ProtocolMismatch");
    assert_eq!(fail(&mut s, "frobnicate", json!({})), "MethodNotFound");
    assert_eq!(fail(&mut s, "typeAt", json!({"uri": "x"})), "InvalidParams");
    assert_eq!(fail(&mut s, "typeAt", json!({"uri": "x", "offset": 0})), "NotFound");
}

#[test]
fn error_life_cycle() {
    let bad = PL.replace("❚", "  equiv : prop → prop → prop ❘ = [x,y] (x ⟹ y) ∧ ded ❙\n❚");
    let mut s = opened(PL);
    let r = call(&mut s, "didChange", json!({"uri": "pl.mmt", "version": 2, "text": bad}));
    assert_eq!(r["version"], 2);
    let ds = r["diagnostics"].as_array().unwrap();
    assert_eq!(ds.len(), 1);
    assert!(ds[0]["log"].as_array().unwrap().iter().any(|l| l == "ded : prop"));
    let range = &ds[0]["ref"];
    assert_eq!(
        &bad[range["start"].as_u64().unwrap() as usize..range["end"].as_u64().unwrap() as usize],
        "ded"
    );

    let same = call(&mut s, "didChange", json!({"uri": "pl.mmt", "version": 3, "text": bad}));
    assert_eq!(same["diagnostics"], r["diagnostics"]);
    let stats = call(&mut s, "stats", json!({}));
    assert_eq!(stats["lastRevalidated"], json!([]));
    assert_eq!(stats["lastReparsed"], json!([]));

    assert_eq!(
        fail(&mut s, "didChange", json!({"uri": "pl.mmt", "version": 3, "text": PL})),
        "StaleVersion"
    );
    let fixed = call(&mut s, "didChange", json!({"uri": "pl.mmt", "version": 4, "text": PL}));
    assert_eq!(fixed["diagnostics"], json!([]));
    let stats = call(&mut s, "stats", json!({}));
    assert!(stats["lastRevalidated"].as_array().unwrap().is_empty(), "{stats}");
}

#[test]
fn navigation() {
    let mut s = opened(PL);
    let p = offset(PL, "andI p p ❙", "p");
    let t = call(&mut s, "typeAt", json!({"uri": "pl.mmt", "offset": p}));
    assert_eq!(t["result"]["type"], "ded A");
    assert_eq!(t["version"], 1);
    let and = offset(PL, "and :", "and");
    let t = call(&mut s, "typeAt", json!({"uri": "pl.mmt", "offset": and}));
    assert_eq!(t["result"]["type"], "prop→prop→prop");
    let t = call(&mut s, "typeAt", json!({"uri": "pl.mmt", "offset": p - 1}));
    assert_eq!(t["result"], Value::Null);

    let andi = offset(PL, "[p] andI", "andI");
    let d = call(&mut s, "definitionAt", json!({"uri": "pl.mmt", "offset": andi, "open": true}));
    let loc = &d["location"];
    assert_eq!(loc["file"], "pl.mmt");
    assert!(PL[loc["start"].as_u64().unwrap() as usize..].starts_with("andI : {A}{B}"));
    let notes = s.drain_notifications();
    assert_eq!(notes.len(), 1);
    assert_eq!(notes[0].method, "openLocation");
    assert_eq!(notes[0].params["ref"], *loc);
    assert_eq!(fail(&mut s, "definitionAt", json!({"uri": "pl.mmt", "offset": 0})), "NotFound");

    let r = call(
        &mut s,
        "related",
        json!({"uri": "pl.mmt", "offset": and, "relation": "inverse(RefersTo)"}),
    );
    let names: Vec<&str> = r["locations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, vec!["PL?andI", "PL?example"]);
    assert_eq!(
        fail(&mut s, "related", json!({"uri": "pl.mmt", "offset": and, "relation": "occursIn"})),
        "QueryParseError"
    );

    let op = offset(PL, "(A ∧ A))", "∧");
    let r = call(&mut s, "subtermAt", json!({"uri": "pl.mmt", "start": op, "end": op + "∧".len()}));
    let (a, b) = (
        r["range"]["start"].as_u64().unwrap() as usize,
        r["range"]["end"].as_u64().unwrap() as usize,
    );
    assert_eq!(&PL[a..b], "(A ∧ A)");

    let ast = call(&mut s, "astOf", json!({"uri": "pl.mmt"}));
    assert_eq!(ast["document"]["theories"][0]["name"], "PL");
}

#[test]
fn search_and_render() {
    let mut s = opened(PL);
    let r = call(&mut s, "search", json!({"query": "$x: x∧x"}));
    let hits = r["hits"].as_array().unwrap();
    let found: Vec<(String, bool)> = hits
        .iter()
        .map(|h| {
            (
                h["slot"]["constant"].as_str().unwrap().to_string(),
                h["inferred"].as_bool().unwrap(),
            )
        })
        .collect();
    assert_eq!(found, vec![("PL?example".to_string(), false), ("PL?example".to_string(), true)]);
    assert_eq!(fail(&mut s, "search", json!({"query": "$x: x ∧"})), "QueryParseError");

    let r = call(&mut s, "render", json!({"uri": "pl.mmt", "showInferred": true}));
    let slots = r["slots"].as_array().unwrap();
    let ex = slots
        .iter()
        .find(|x| x["slot"]["constant"] == "PL?example" && x["slot"]["component"] == "definiens")
        .unwrap();
    assert_eq!(ex["text"], "[A:prop] impI A (A∧A) ([p:ded A] andI A A p p)");
}

#[test]
fn hints_in_holes() {
    let src = PL.replace("= [A] impI [p] andI p p", "= [A] ⟨ded (A ⟹ (A ∧ A))⟩");
    let mut s = opened(&src);
    let r = call(
        &mut s,
        "completionsAt",
        json!({"uri": "pl.mmt", "offset": offset(&src, "⟨ded", "ded")}),
    );
    let first = &r["items"][0];
    assert_eq!(first["kind"], "hint");
    assert_eq!(first["insertText"], "impI ⟨ded A → ded (A∧A)⟩");
    assert_eq!(first["remainingGoals"], 1);
    call(&mut s, "didOpen", json!({"uri": "empty.mmt", "text": ""}));
    let r = call(&mut s, "completionsAt", json!({"uri": "empty.mmt", "offset": 0}));
    assert_eq!(r["items"], json!([]));
}

/// Plays the client: each round asks for hints at every hole of the current
/// version, then puts the top hint into each hole.
#[test]
fn greedy_hint_session_over_the_protocol() {
    let mut text = PL.replace("= [A] impI [p] andI p p", "= [A] ⟨ded (A ⟹ (A ∧ A))⟩");
    let mut s = opened(&text);
    let mut version = 1;
    let mut rounds = 0;
    loop {
        let holes: Vec<usize> = text.match_indices('⟨').map(|(i, _)| i).collect();
        if holes.is_empty() {
            break;
        }
        rounds += 1;
        assert!(rounds <= 4, "{text}");
        let mut edits = Vec::new();
        for h in holes {
            let r = call(&mut s, "completionsAt", json!({"uri": "pl.mmt", "offset": h + '⟨'.len_utf8()}));
            let item = &r["items"][0];
            assert_eq!(item["kind"], "hint", "{text}");
            let range = (
                item["ref"]["start"].as_u64().unwrap() as usize,
                item["ref"]["end"].as_u64().unwrap() as usize,
            );
            edits.push((range, item["insertText"].as_str().unwrap().to_string()));
        }
        edits.sort();
        edits.dedup();
        for ((a, b), insert) in edits.into_iter().rev() {
            text.replace_range(a..b, &insert);
        }
        version += 1;
        let d = call(&mut s, "didChange", json!({"uri": "pl.mmt", "version": version, "text": text}));
        assert_eq!(d["diagnostics"], json!([]), "{text}");
    }
    assert_eq!(rounds, 4);
    assert!(text.contains("= [A] impI [p] andI p p ❙"), "{text}");
}

#[test]
fn replaying_a_log_reproduces_the_responses() {
    let log: Vec<String> = [
        json!({"id": 1, "method": "initialize", "params": {}}),
        json!({"id": 2, "method": "didOpen", "params": {"uri": "pl.mmt", "text": PL}}),
        json!({"id": 3, "method": "typeAt", "params": {"uri": "pl.mmt", "offset": offset(PL, "andI p p ❙", "p")}}),
        json!({"id": 4, "method": "search", "params": {"query": "$x,$y,$z: x⟹(y∧z)"}}),
        json!({"id": 5, "method": "didChange", "params": {"uri": "pl.mmt", "version": 2, "text": PL.replace("andI p p", "andI p q")}}),
        json!({"id": 6, "method": "stats"}),
        json!({"id": 7, "method": "definitionAt", "params": {"uri": "pl.mmt", "offset": offset(PL, "[p] andI", "andI"), "open": true}}),
        json!({"id": 8, "method": "render", "params": {"uri": "pl.mmt"}}),
    ]
    .iter()
    .map(|v| v.to_string())
    .collect();
    let input = format!("{}\nnot json\n", log.join("\n"));
    let run = || {
        let mut out = Vec::new();
        serve_stdio(&mut Session::new(lf_rules()), input.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    };
    let first = run();
    assert_eq!(first, run());
    let lines: Vec<&str> = first.lines().collect();
    // one response per request, plus the openLocation notification
    assert_eq!(lines.len(), log.len() + 2);
    assert!(lines[7].contains("openLocation"));
    assert!(lines.last().unwrap().contains("ParseError"));
    let changed: Value = serde_json::from_str(lines[4]).unwrap();
    assert_eq!(changed["result"]["diagnostics"].as_array().unwrap().len(), 1);
}

#[test]
fn http_routes() {
    let s = std::sync::Mutex::new(opened(PL));
    let (code, body) = http_reply(
        &s,
        "POST",
        "/typeAt",
        &json!({"uri": "pl.mmt", "offset": offset(PL, "andI p p ❙", "p")}).to_string(),
    );
    assert_eq!(code, 200);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["result"]["result"]["type"], "ded A");
    assert_eq!(http_reply(&s, "GET", "/typeAt", "").0, 405);
    assert_eq!(http_reply(&s, "POST", "/nope", "{}").0, 404);
    assert_eq!(
        http_reply(
            &s,
            "POST",
            "/didChange",
            &json!({"uri": "pl.mmt", "version": 1, "text": PL}).to_string()
        )
        .0,
        409
    );
    assert_eq!(http_reply(&s, "POST", "/stats", "").0, 200);
    assert_eq!(http_reply(&s, "POST", "/typeAt", "{").0, 400);
    http_reply(
        &s,
        "POST",
        "/definitionAt",
        &json!({"uri": "pl.mmt", "offset": offset(PL, "[p] andI", "andI"), "open": true}).to_string(),
    );
    let (_, notes) = http_reply(&s, "POST", "/notifications", "");
    assert!(notes.contains("openLocation"));
    assert_eq!(http_reply(&s, "POST", "/notifications", "").1, "[]");
}

#[test]
fn http_over_a_socket() {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    let session = opened(PL);
    let handle = std::thread::spawn(move || serve_http_on(session, server).unwrap());
    let post = |path: &str, body: &str| {
        let mut c = std::net::TcpStream::connect(("127.0.0.1", port)).unwrap();
        write!(
            c,
            "POST {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        let mut out = String::new();
        c.read_to_string(&mut out).unwrap();
        out
    };
    let r = post("/search", &json!({"query": "$x: x∧x"}).to_string());
    assert!(r.starts_with("HTTP/1.1 200"), "{r}");
    assert!(r.contains("\"hits\""));
    let r = post("/shutdown", "");
    assert!(r.starts_with("HTTP/1.1 200"), "{r}");
    handle.join().unwrap();
}
