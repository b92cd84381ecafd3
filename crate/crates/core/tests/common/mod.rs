#![allow(dead_code)]

pub mod contract;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use chrono::NaiveDateTime;
use eln_core::catalog::{Catalog, PathRule};
use eln_core::config::Config;
use eln_core::convention::TreeKind;
use eln_core::stamper::MockBackend;
use eln_core::Engine;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const EXAMPLE_FILE: &str = "01_Main_Exp/01_OCA_35_XL/20210201/Probe_BA_01/171700_osz_wasser_laengest.png";
pub const MAIN_CSV: &str = "01_Main_Exp/01_OCA_35_XL/20210201/Probe_BA_01/171800_contact_angle.csv";
pub const SUB_CSV: &str = "02_Sub_Exp/01_TNS/20210201/Probe_BA_01/172000_tension.csv";
pub const OTHER_SAMPLE: &str = "01_Main_Exp/01_OCA_35_XL/20210201/Probe_BA_02/090000_baseline.png";

pub fn ts(s: &str) -> NaiveDateTime {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").unwrap()
}

pub fn write_file(root: &Path, rel: &str, body: &[u8]) -> PathBuf {
    let path = root.join(rel);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, body).unwrap();
    path
}

pub fn main_rule(exts: &[&str]) -> PathRule {
    PathRule {
        device_code: "OCA".into(),
        tree_kind: TreeKind::Main,
        root_subpath: "01_Main_Exp/01_OCA_35_XL".into(),
        allowed_extensions: exts.iter().map(|s| s.to_string()).collect(),
        instrument_variant: "35_XL".into(),
    }
}

pub fn sub_rule() -> PathRule {
    PathRule {
        device_code: "TNS".into(),
        tree_kind: TreeKind::Sub,
        root_subpath: "02_Sub_Exp/01_TNS".into(),
        allowed_extensions: ["csv".to_string()].into_iter().collect(),
        instrument_variant: String::new(),
    }
}

/// A data tree, an engine over an in-memory store and the mock backend.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub engine: Arc<Engine>,
    pub backend: Arc<MockBackend>,
}

impl Fixture {
    /// Empty store and empty data root.
    pub fn empty() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        std::fs::create_dir_all(&data).unwrap();
        let config = Config { data_root: data, store_path: dir.path().join("unused.db"), ..Config::default() };
        let backend = Arc::new(MockBackend::new());
        let engine = Engine::with_parts(config, Catalog::open_in_memory().unwrap(), backend.clone());
        Fixture { dir, engine: Arc::new(engine), backend }
    }

    /// Samples BA_01 and BA_02, a main and a sub rule, and four files: the
    /// example image, a main table, a sub table and an image of BA_02.
    pub fn lab() -> Self {
        let f = Self::empty();
        let c = f.engine.catalog();
        c.register_sample("BA_01", "substrate", Default::default()).unwrap();
        c.register_sample("BA_02", "substrate", Default::default()).unwrap();
        c.register_path_rule(main_rule(&["png", "csv"])).unwrap();
        c.register_path_rule(sub_rule()).unwrap();
        f.write(EXAMPLE_FILE, b"\x89PNG fake image");
        f.write(MAIN_CSV, b"time,angle\n0,80.5\n1,79.0\n2,77.25\n");
        f.write(SUB_CSV, b"time,tension\n0,72.1\n5,72.0\n");
        f.write(OTHER_SAMPLE, b"\x89PNG other");
        f
    }

    pub fn data(&self) -> PathBuf {
        self.engine.config().data_root.clone()
    }

    pub fn write(&self, rel: &str, body: &[u8]) -> PathBuf {
        write_file(&self.data(), rel, body)
    }

    pub fn app(&self) -> axum::Router {
        eln_core::api::router(self.engine.clone()).unwrap()
    }
}

pub fn now() -> NaiveDateTime {
    ts("2021-02-02T00:00:00")
}

/// Sends one request to the router and returns status and JSON body.
pub async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).unwrap()
}
