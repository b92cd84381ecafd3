//! Electronic lab notebook engine that builds itself from a structured data
//! tree.
//!
//! Files placed under `root/device/YYYYMMDD/sample/HHMMSS_desc.ext` become
//! catalog entries with persistent ids. Sub-experiments are linked to the
//! nearest main experiment, notes to nearby entries, tabular files are served
//! as plot-ready time series, and file hashes are anchored daily through a
//! Merkle root.
//!
//! ```
//! use eln_core::convention::{parse_path, PathGrammar, TreeKind};
//!
//! let grammar = PathGrammar::new("01_Main_Exp", TreeKind::Main);
//! let meta = parse_path(
//!     "01_Main_Exp/01_OCA_35_XL/20210201/BA_01/171700_drop.png",
//!     &grammar,
//! )
//! .unwrap();
//! assert_eq!(meta.device_code, "OCA");
//! assert_eq!(meta.sample_name, "BA_01");
//! ```

pub mod api;
pub mod catalog;
pub mod config;
pub mod convention;
pub mod engine;
pub mod error;
pub mod ingest;
pub mod linker;
pub mod stamper;
pub mod tabular;

pub use config::Config;
pub use engine::Engine;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/path-convention.md")]
    mod path_convention {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/catalog.md")]
    mod catalog {}
    #[doc = include_str!("../../../book/src/linking.md")]
    mod linking {}
    #[doc = include_str!("../../../book/src/tables.md")]
    mod tables {}
    #[doc = include_str!("../../../book/src/stamping.md")]
    mod stamping {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/http-api.md")]
    mod http_api {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
