//! Python module `xmltape_py`: ingest, validation, reindexing and lookups
//! over an xmltape store.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use xmltape::config::Settings;
use xmltape::ingest::{Datastream, DatastreamData};
use xmltape::store::IndexWrite;
use xmltape::{ContentId, Error, IngestConfig, NamespaceClass, RepoUri, SubmissionObject};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NotFound(m) => PyKeyError::new_err(m),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn class_of(name: &str) -> PyResult<NamespaceClass> {
    match name {
        "pkg" => Ok(NamespaceClass::Package),
        "xmltape" => Ok(NamespaceClass::Tape),
        "arc" => Ok(NamespaceClass::Arc),
        "ds" => Ok(NamespaceClass::Datastream),
        _ => Err(PyValueError::new_err(format!("unknown identifier class {name:?}"))),
    }
}

/// Mint a fresh identifier of class `pkg`, `xmltape`, `arc` or `ds`.
#[pyfunction]
fn mint(class: &str) -> PyResult<String> {
    RepoUri::mint(class_of(class)?).map(|u| u.to_string()).map_err(py_err)
}

/// Parse an identifier into `(class, uuid)`.
#[pyfunction]
fn parse_identifier(uri: &str) -> PyResult<(String, String)> {
    let u = RepoUri::parse(uri).map_err(py_err)?;
    Ok((u.class().token().unwrap_or_default().to_owned(), u.uuid_str()))
}

/// Findings for a tape or ARC file as `(ordinal or None, message)`; empty
/// when the file is valid.
#[pyfunction]
fn validate(path: PathBuf) -> PyResult<Vec<(Option<u64>, String)>> {
    let report = xmltape::store::validate_file(&path).map_err(py_err)?;
    Ok(report.findings.into_iter().map(|f| (f.ordinal, f.message)).collect())
}

/// Rebuild the indexes of a sealed file; returns `(index path, written)`.
#[pyfunction]
fn reindex(path: PathBuf) -> PyResult<Vec<(String, bool)>> {
    let written = xmltape::store::reindex(&path).map_err(py_err)?;
    Ok(written.into_iter().map(|(p, w)| (p.display().to_string(), w == IndexWrite::Written)).collect())
}

/// `(content_id, metadata_xml, [(data, media_type), ...])`
type PyObjectSpec = (String, Vec<u8>, Vec<(Vec<u8>, String)>);

/// A store root with its service configuration.
#[pyclass(module = "xmltape_py")]
struct Store {
    service: xmltape::Service,
}

#[pymethods]
impl Store {
    #[new]
    #[pyo3(signature = (root, page_size=None, max_arc_bytes=None, oai_base_template=None, openurl_base_template=None))]
    fn new(
        root: PathBuf,
        page_size: Option<usize>,
        max_arc_bytes: Option<u64>,
        oai_base_template: Option<String>,
        openurl_base_template: Option<String>,
    ) -> PyResult<Store> {
        std::fs::create_dir_all(&root).map_err(|e| PyOSError::new_err(e.to_string()))?;
        let config = Settings { store: Some(root), page_size, max_arc_bytes, oai_base_template, openurl_base_template, ..Settings::default() }
            .resolve()
            .map_err(py_err)?;
        Ok(Store { service: xmltape::Service::open(config).map_err(py_err)? })
    }

    #[getter]
    fn root(&self) -> String {
        self.service.config().store.display().to_string()
    }

    /// Ingest one batch. `objects` holds `(content_id, metadata_xml,
    /// [(data, media_type), ...])` tuples. Returns a dict with `tape`,
    /// `arcs` and `objects` (`(content_id, package_id, [ds_id, ...])`).
    fn ingest<'py>(&self, py: Python<'py>, objects: Vec<PyObjectSpec>) -> PyResult<Bound<'py, PyDict>> {
        let objects = objects
            .into_iter()
            .map(|(content_id, metadata, streams)| {
                Ok(SubmissionObject {
                    content_id: ContentId::new(content_id).map_err(py_err)?,
                    metadata,
                    datastreams: streams.into_iter().map(|(data, media_type)| Datastream { data: DatastreamData::Bytes(data), media_type }).collect(),
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let config = self.service.config();
        let mut ingest = IngestConfig::new(&config.openurl_base_template, &config.oai_base_template);
        ingest.max_arc_bytes = config.max_arc_bytes;
        let report = py.detach(|| xmltape::ingest_batch(self.service.store(), &objects, &ingest)).map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("tape", report.tape_id.to_string())?;
        out.set_item("arcs", report.arc_ids.iter().map(|a| a.to_string()).collect::<Vec<_>>())?;
        let objs: Vec<(String, String, Vec<String>)> = report
            .objects
            .iter()
            .map(|o| (o.content_id.to_string(), o.package_id.to_string(), o.ds_ids.iter().map(|d| d.to_string()).collect()))
            .collect();
        out.set_item("objects", objs)?;
        Ok(out)
    }

    /// Ingest a batch directory laid out as for the command line.
    fn ingest_dir<'py>(&self, py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
        let objects = xmltape::load_batch_dir(&path).map_err(py_err)?;
        let objects = objects
            .into_iter()
            .map(|o| {
                let streams = o
                    .datastreams
                    .into_iter()
                    .map(|d| match d.data {
                        DatastreamData::File(p) => std::fs::read(p).map(|b| (b, d.media_type)),
                        _ => unreachable!("batch directories hold files"),
                    })
                    .collect::<std::io::Result<Vec<_>>>()?;
                Ok((o.content_id.to_string(), o.metadata, streams))
            })
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| PyOSError::new_err(e.to_string()))?;
        self.ingest(py, objects)
    }

    /// Wrapper document bytes of one record.
    fn get_record<'py>(&self, py: Python<'py>, tape: &str, package_id: &str) -> PyResult<Bound<'py, PyBytes>> {
        let payload = self.service.get_record(tape, package_id).map_err(py_err)?;
        Ok(PyBytes::new(py, &payload))
    }

    /// `(media_type, data)` of one datastream.
    fn get_datastream<'py>(&self, py: Python<'py>, arc: &str, ds_id: &str) -> PyResult<(String, Bound<'py, PyBytes>)> {
        let (header, data) = self.service.get_datastream(arc, ds_id).map_err(py_err)?;
        Ok((header.content_type, PyBytes::new(py, &data)))
    }

    /// Versions of a Digital Object, oldest first, as
    /// `(package_id, created, oai_base_url)`.
    fn locate(&self, content_id: &str) -> PyResult<Vec<(String, String, String)>> {
        let versions = self.service.resolve_versions(content_id).map_err(py_err)?;
        Ok(versions.into_iter().map(|v| (v.package_id, v.created, v.oai_base_url)).collect())
    }

    /// OAI-PMH request; returns `(status, content_type, body)`.
    fn oai<'py>(&self, py: Python<'py>, tape: &str, query: &str) -> (u16, String, Bound<'py, PyBytes>) {
        let r = self.service.oai(tape, query);
        (r.status, r.content_type, PyBytes::new(py, &r.body))
    }

    /// OpenURL request; returns `(status, content_type, body)`.
    fn openurl<'py>(&self, py: Python<'py>, arc: &str, query: &str) -> (u16, String, Bound<'py, PyBytes>) {
        let r = self.service.openurl(arc, query);
        (r.status, r.content_type, PyBytes::new(py, &r.body))
    }

    fn tape_path(&self, tape: &str) -> PyResult<String> {
        Ok(self.service.tape(tape).map_err(py_err)?.path.display().to_string())
    }

    fn arc_path(&self, arc: &str) -> PyResult<String> {
        Ok(self.service.arc(arc).map_err(py_err)?.path.display().to_string())
    }

    fn __repr__(&self) -> String {
        format!("Store({:?})", self.root())
    }
}

#[pymodule]
fn xmltape_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mint, m)?)?;
    m.add_function(wrap_pyfunction!(parse_identifier, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(reindex, m)?)?;
    m.add_class::<Store>()?;
    Ok(())
}
