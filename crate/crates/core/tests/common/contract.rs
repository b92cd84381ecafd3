//! Walks every endpoint on the lab fixture and compares each response with
//! the serialized result of the matching engine operation.

use axum::http::{Method, StatusCode};
use eln_core::catalog::{EntryFilter, LinkType};
use eln_core::engine::{Deleted, EntryQuery, IngestOptions, NoteCreated};
use eln_core::stamper;
use serde_json::{json, Value};

use super::{call, now, to_json, Fixture, MAIN_CSV, EXAMPLE_FILE, SUB_CSV};

/// One line per endpoint checked.
pub struct Checked(pub Vec<String>);

fn expect(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn same(endpoint: &str, status: StatusCode, want_status: StatusCode, got: &Value, want: &Value) -> Result<(), String> {
    expect(status == want_status, format!("{endpoint}: status {status}, expected {want_status}: {got}"))?;
    expect(got == want, format!("{endpoint}: body differs\n  got:  {got}\n  want: {want}"))
}

fn without_started_at(mut v: Value) -> Value {
    v.as_object_mut().map(|o| o.remove("started_at"));
    v
}

pub async fn run() -> Result<Checked, String> {
    let f = Fixture::lab();
    let e = f.engine.clone();
    let app = f.app();
    let mut done = Vec::new();
    let ok = StatusCode::OK;
    let created = StatusCode::CREATED;

    let (s, body) = call(&app, Method::GET, "/api/health", None).await;
    same("GET /api/health", s, ok, &body, &to_json(&e.health()))?;
    done.push("GET /api/health".to_string());

    let (s, body) = call(&app, Method::GET, "/api/samples", None).await;
    same("GET /api/samples", s, ok, &body, &to_json(&e.samples().unwrap()))?;
    done.push("GET /api/samples".into());

    let (s, body) = call(&app, Method::POST, "/api/samples", Some(json!({"name": "CC_03", "kind": "wafer"}))).await;
    let stored = e.samples().unwrap().into_iter().find(|x| x.name == "CC_03").ok_or("CC_03 not stored")?;
    same("POST /api/samples", s, created, &body, &to_json(&stored))?;
    done.push("POST /api/samples".into());

    let (s, body) = call(&app, Method::GET, "/api/rules", None).await;
    same("GET /api/rules", s, ok, &body, &to_json(&e.rules().unwrap()))?;
    done.push("GET /api/rules".into());

    let rule = json!({
        "device_code": "XRD", "tree_kind": "main", "root_subpath": "01_Main_Exp/02_XRD",
        "allowed_extensions": ["xy"], "instrument_variant": ""
    });
    let (s, body) = call(&app, Method::POST, "/api/rules", Some(rule)).await;
    same("POST /api/rules", s, created, &body, &to_json(&e.rules().unwrap()))?;
    done.push("POST /api/rules".into());

    // no body: wall clock, so every 2021 file is too old
    let (s, body) = call(&app, Method::POST, "/api/ingest", None).await;
    same("POST /api/ingest (no body)", s, ok, &body, &to_json(&e.latest_report().unwrap()))?;
    expect(body["created"] == 0, "wall-clock ingest should create nothing")?;

    let (s, body) = call(&app, Method::POST, "/api/ingest", Some(json!({"now": "2021-02-02T00:00:00"}))).await;
    same("POST /api/ingest", s, ok, &body, &to_json(&e.latest_report().unwrap()))?;
    // independent run of the same operation on an identical tree
    let twin = Fixture::lab();
    let direct = twin.engine.ingest(&IngestOptions { now: Some(now()), ..Default::default() }).unwrap();
    expect(
        without_started_at(body.clone()) == without_started_at(to_json(&direct)),
        format!("POST /api/ingest differs from a direct run: {body} vs {}", to_json(&direct)),
    )?;
    expect(body["created"] == 4, format!("expected 4 created: {body}"))?;
    done.push("POST /api/ingest".into());

    let (s, body) = call(&app, Method::GET, "/api/reports/latest", None).await;
    same("GET /api/reports/latest", s, ok, &body, &to_json(&e.latest_report().unwrap()))?;
    done.push("GET /api/reports/latest".into());

    let queries: [(&str, EntryQuery); 6] = [
        ("", EntryQuery::default()),
        ("?sample=BA_01", EntryQuery { sample: Some("BA_01".into()), ..Default::default() }),
        ("?device=TNS", EntryQuery { device: Some("TNS".into()), ..Default::default() }),
        ("?kind=main&sample=BA_01", EntryQuery { kind: Some(eln_core::convention::TreeKind::Main), sample: Some("BA_01".into()), ..Default::default() }),
        (
            "?from=2021-02-01T17:17:30&to=2021-02-01T18:00:00",
            EntryQuery {
                from: Some(super::ts("2021-02-01T17:17:30")),
                to: Some(super::ts("2021-02-01T18:00:00")),
                ..Default::default()
            },
        ),
        ("?q=TENSION", EntryQuery { q: Some("TENSION".into()), ..Default::default() }),
    ];
    for (qs, query) in queries {
        let uri = format!("/api/entries{qs}");
        let (s, body) = call(&app, Method::GET, &uri, None).await;
        same(&format!("GET {uri}"), s, ok, &body, &to_json(&e.query(&query).unwrap()))?;
    }
    // the sample filter also matches a brute-force scan of all entries
    let all = e.catalog().snapshot().unwrap().entries;
    let mut want: Vec<_> = all.iter().filter(|x| x.sample_name == "BA_01").cloned().collect();
    want.sort_by(|a, b| b.observed_at.cmp(&a.observed_at).then(b.id.cmp(&a.id)));
    let (_, body) = call(&app, Method::GET, "/api/entries?sample=BA_01", None).await;
    expect(body == to_json(&want), "GET /api/entries?sample=BA_01 differs from brute force")?;
    expect(
        e.catalog().query_entries(&EntryFilter { sample: Some("BA_01".into()), ..Default::default() }).unwrap() == want,
        "query_entries differs from brute force",
    )?;
    done.push("GET /api/entries".into());

    let by_path = |p: &str| all.iter().find(|x| x.file_path == p).cloned().ok_or(format!("{p} not ingested"));
    let png = by_path(EXAMPLE_FILE)?;
    let csv = by_path(MAIN_CSV)?;
    let sub = by_path(SUB_CSV)?;

    let (s, body) = call(&app, Method::GET, &format!("/api/entries/{}", png.id), None).await;
    same("GET /api/entries/{id}", s, ok, &body, &to_json(&e.entry(png.id).unwrap()))?;
    done.push("GET /api/entries/{id}".into());

    let (s, body) = call(&app, Method::GET, &format!("/api/entries/{}/plot", csv.id), None).await;
    same("GET /api/entries/{id}/plot", s, ok, &body, &to_json(&e.plot(csv.id).unwrap()))?;
    expect(body["subs"][0]["entry_id"] == sub.id && body["subs"][0]["offset_s"] == 120, format!("plot subs: {body}"))?;
    let (s, body) = call(&app, Method::GET, &format!("/api/entries/{}/plot", png.id), None).await;
    expect(s == StatusCode::UNPROCESSABLE_ENTITY && body["error"]["code"] == "not_tabular", format!("png plot: {s} {body}"))?;
    done.push("GET /api/entries/{id}/plot".into());

    let note = json!({"sample_name": "BA_01", "written_at": "2021-02-01T17:30:00", "body": "Drop spread fast"});
    let (s, body) = call(&app, Method::POST, "/api/notes", Some(note)).await;
    let note_id = body["note"]["id"].as_i64().ok_or(format!("POST /api/notes: {body}"))?;
    let stored_note = e.catalog().read(|r| r.get_note(note_id)).unwrap();
    let mut note_links: Vec<_> =
        e.catalog().read(|r| r.list_links()).unwrap().into_iter().filter(|l| l.to_id == note_id).collect();
    note_links.sort_by_key(|l| l.id);
    same("POST /api/notes", s, created, &body, &to_json(&NoteCreated { note: stored_note, links: note_links }))?;
    expect(body["links"].as_array().map(Vec::len) == Some(3), format!("note should link 3 entries: {body}"))?;
    done.push("POST /api/notes".into());

    let link = json!({"from_id": png.id, "to_id": csv.id, "link_type": "entry_entry"});
    let (s, body) = call(&app, Method::POST, "/api/links", Some(link.clone())).await;
    let stored_link = e
        .links(png.id)
        .unwrap()
        .into_iter()
        .find(|l| l.link_type == LinkType::EntryEntry)
        .ok_or("manual link not stored")?;
    same("POST /api/links", s, created, &body, &to_json(&stored_link))?;
    expect(body["created_by"] == "manual", "link should be manual")?;
    let (s, body) = call(&app, Method::POST, "/api/links", Some(link)).await;
    expect(s == StatusCode::CONFLICT && body["error"]["code"] == "duplicate_key", format!("duplicate link: {s} {body}"))?;
    done.push("POST /api/links".into());

    let (s, body) = call(&app, Method::GET, &format!("/api/entries/{}/links", csv.id), None).await;
    same("GET /api/entries/{id}/links", s, ok, &body, &to_json(&e.links(csv.id).unwrap()))?;
    done.push("GET /api/entries/{id}/links".into());

    let (s, body) = call(&app, Method::GET, "/api/samples/BA_01/history", None).await;
    same("GET /api/samples/{name}/history", s, ok, &body, &to_json(&e.history("BA_01").unwrap()))?;
    done.push("GET /api/samples/{name}/history".into());

    let (s, body) = call(&app, Method::POST, "/api/stamps/run", Some(json!({"now": "2021-02-02T23:00:00"}))).await;
    let batches = stamper::list_batches(e.catalog()).unwrap();
    same("POST /api/stamps/run", s, ok, &body, &to_json(batches.last().ok_or("no batch stored")?))?;
    expect(f.backend.submissions().len() == 1, "exactly one submission expected")?;
    done.push("POST /api/stamps/run".into());

    let digest = stamper::hash_path(&f.data().join(EXAMPLE_FILE)).unwrap().to_hex();
    let (s, body) = call(&app, Method::GET, &format!("/api/stamps/{digest}"), None).await;
    same("GET /api/stamps/{digest_hex}", s, ok, &body, &to_json(&e.stamp_proof(&digest).unwrap()))?;
    expect(stamper::verify_json(&body["proof"].to_string()) == Ok(true), "served proof does not verify")?;
    done.push("GET /api/stamps/{digest_hex}".into());

    let (s, body) = call(&app, Method::DELETE, &format!("/api/entries/{}", sub.id), None).await;
    same("DELETE /api/entries/{id}", s, ok, &body, &to_json(&Deleted { id: sub.id, deleted: true }))?;
    expect(e.entry(sub.id).is_err(), "entry still present after DELETE")?;
    done.push("DELETE /api/entries/{id}".into());

    let (s, body) = call(&app, Method::GET, "/api/entries/999", None).await;
    same(
        "GET /api/entries/999",
        s,
        StatusCode::NOT_FOUND,
        &json!(body["error"]["code"]),
        &json!("not_found"),
    )?;
    done.push("GET /api/entries/999 (404)".into());

    Ok(Checked(done))
}
