//! `xmltape`: ingest, validate, reindex and serve a store.
//!
//! Exit codes: 0 success, 1 validation or lookup failure, 2 usage or
//! configuration error, 3 I/O error.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use xmltape::config::Settings;
use xmltape::ids::NamespaceClass;
use xmltape::store::{reindex, validate_file, IndexWrite};
use xmltape::{ingest_batch, load_batch_dir, Config, Error, IngestConfig, Locator, RepoUri, Service, Store};

#[derive(Parser)]
#[command(name = "xmltape", version, about = "Write-once XMLtape and ARC file store")]
struct Cli {
    /// Store root directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    max_arc_bytes: Option<u64>,
    #[arg(long, global = true)]
    page_size: Option<usize>,
    #[arg(long, global = true)]
    host: Option<String>,
    #[arg(long, global = true)]
    port: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a batch directory as one tape; prints the manifest.
    Ingest { batch: PathBuf },
    /// Check tapes or ARC files; prints one line per finding.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Rebuild the index files of sealed tapes or ARC files.
    Reindex {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Serve OAI-PMH, OpenURL and the locator over HTTP.
    Serve,
    /// Write a record's wrapper document to standard output.
    GetRecord { tape: String, package_id: String },
    /// Write a datastream to standard output.
    GetDatastream { arc: String, ds_id: String },
    /// List the versions of a Digital Object: package id, created, OAI-PMH base URL.
    Locate { content_id: String },
}

enum Failure {
    /// Validation findings, already written to standard output.
    Reported,
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Error(e.into())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn settings(cli: &Cli) -> Result<Config, Error> {
    let file = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let flags = Settings {
        store: cli.store.clone(),
        host: cli.host.clone(),
        port: cli.port,
        page_size: cli.page_size,
        max_arc_bytes: cli.max_arc_bytes,
        ..Settings::default()
    };
    let config = file.overlay(flags).overlay(Settings::from_env()?).resolve()?;
    if !config.store.is_dir() {
        return Err(Error::Config(format!("store root {} is not a directory", config.store.display())));
    }
    Ok(config)
}

fn write_stdout(bytes: &[u8]) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn cmd_ingest(config: &Config, batch: &Path) -> Result<(), Failure> {
    let objects = load_batch_dir(batch)?;
    let mut ingest = IngestConfig::new(&config.openurl_base_template, &config.oai_base_template);
    ingest.max_arc_bytes = config.max_arc_bytes;
    let report = ingest_batch(&Store::new(&config.store), &objects, &ingest)?;
    write_stdout(report.manifest().as_bytes())
}

fn cmd_validate(paths: &[PathBuf]) -> Result<(), Failure> {
    let mut out = String::new();
    let mut failed = false;
    for path in paths {
        let report = validate_file(path)?;
        if report.is_valid() {
            out.push_str(&format!("ok\t{}\t{}\n", path.display(), report.scanned.unwrap_or(0)));
            continue;
        }
        failed = true;
        for f in &report.findings {
            let ordinal = f.ordinal.map_or("-".to_owned(), |o| o.to_string());
            out.push_str(&format!("finding\t{}\t{ordinal}\t{}\n", path.display(), f.message));
        }
    }
    write_stdout(out.as_bytes())?;
    if failed {
        Err(Failure::Reported)
    } else {
        Ok(())
    }
}

fn cmd_reindex(paths: &[PathBuf]) -> Result<(), Failure> {
    let mut out = String::new();
    for path in paths {
        for (index, what) in reindex(path)? {
            let what = match what {
                IndexWrite::Written => "written",
                IndexWrite::Unchanged => "unchanged",
            };
            out.push_str(&format!("{what}\t{}\n", index.display()));
        }
    }
    write_stdout(out.as_bytes())
}

fn cmd_serve(config: Config) -> Result<(), Failure> {
    let ip: IpAddr = config.host.parse().map_err(|_| Error::Config(format!("host {:?} is not an IP address", config.host)))?;
    let addr = SocketAddr::new(ip, config.port);
    let service = Arc::new(Service::open(config)?);
    xmltape::http::serve_blocking(service, addr)?;
    Ok(())
}

fn cmd_get_record(config: &Config, tape: &str, package_id: &str) -> Result<(), Failure> {
    let store = Store::new(&config.store);
    let uuid = RepoUri::parse_lenient(tape, NamespaceClass::Tape).map_err(|_| Error::NotFound(tape.to_owned()))?.uuid();
    if !store.tape_path(uuid).is_file() {
        return Err(Error::NotFound(tape.to_owned()).into());
    }
    let record = store.mount_tape(uuid)?.get_record(package_id)?;
    write_stdout(&record.payload)
}

fn cmd_get_datastream(config: &Config, arc: &str, ds_id: &str) -> Result<(), Failure> {
    let store = Store::new(&config.store);
    let uuid = RepoUri::parse_lenient(arc, NamespaceClass::Arc).map_err(|_| Error::NotFound(arc.to_owned()))?.uuid();
    if !store.arc_path(uuid).is_file() {
        return Err(Error::NotFound(arc.to_owned()).into());
    }
    let (_, data) = store.mount_arc(uuid)?.get_datastream(ds_id)?;
    write_stdout(&data)
}

fn cmd_locate(config: &Config, content_id: &str) -> Result<(), Failure> {
    let locator = Locator::open(Store::new(&config.store).locator_path())?;
    let versions = locator.resolve_versions(content_id, &config.oai_base_template);
    if versions.is_empty() {
        return Err(Error::NotFound(content_id.to_owned()).into());
    }
    let out: String = versions.iter().map(|v| format!("{}\t{}\t{}\n", v.package_id, v.created, v.oai_base_url)).collect();
    write_stdout(out.as_bytes())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { paths } => cmd_validate(paths),
        Command::Reindex { paths } => cmd_reindex(paths),
        Command::Ingest { batch } => cmd_ingest(&settings(&cli)?, batch),
        Command::Serve => cmd_serve(settings(&cli)?),
        Command::GetRecord { tape, package_id } => cmd_get_record(&settings(&cli)?, tape, package_id),
        Command::GetDatastream { arc, ds_id } => cmd_get_datastream(&settings(&cli)?, arc, ds_id),
        Command::Locate { content_id } => cmd_locate(&settings(&cli)?, content_id),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Reported) => ExitCode::from(1),
        Err(Failure::Error(e)) => {
            eprintln!("xmltape: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
