//! Write-once storage of XML packages in XMLtapes and of their datastreams in
//! ARC files, with OAI-PMH access to tapes and OpenURL access to ARC records.

pub mod arc;
pub mod config;
pub mod datestamp;
pub mod error;
pub mod extent;
pub mod http;
pub mod ids;
pub mod index;
pub mod ingest;
pub mod io;
pub mod locator;
pub mod oai;
pub mod service;
pub mod store;
pub mod tape;
pub mod wrapper;
pub mod xml;

pub use config::{Config, Settings};
pub use datestamp::Datestamp;
pub use error::{Error, Result};
pub use extent::ByteExtent;
pub use ids::{ContentId, NamespaceClass, RepoUri};
pub use ingest::{ingest_batch, load_batch_dir, IngestConfig, IngestReport, SubmissionObject};
pub use locator::Locator;
pub use service::Service;
pub use store::Store;
