//! Service and ingest settings.
//!
//! The configuration file is line oriented: `key = value`, one per line;
//! blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `store` | store root directory | none |
//! | `host` | listen address | `127.0.0.1` |
//! | `port` | listen port | `8080` |
//! | `page_size` | OAI-PMH list page size | `500` |
//! | `max_arc_bytes` | ARC rollover threshold | `524288000` (500 MiB) |
//! | `oai_base_template` | tape base URL, `{tape}` placeholder | `http://<host>:<port>/oai/{tape}` |
//! | `openurl_base_template` | ARC base URL, `{arc}` placeholder | `http://<host>:<port>/openurl/{arc}` |
//! | `strict_url_ver` | reject OpenURLs lacking `url_ver` | `false` |
//! | `metadata_prefix` | the single OAI-PMH metadata prefix | `didl` |
//! | `admin_email` | Identify adminEmail | `admin@localhost` |
//!
//! Layers combine with [`Settings::overlay`]; later layers win.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::{check_template, ARC_PLACEHOLDER, DEFAULT_MAX_ARC_BYTES, TAPE_PLACEHOLDER};

pub const ENV_HOST: &str = "XMLTAPE_HOST";
pub const ENV_PORT: &str = "XMLTAPE_PORT";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    pub store: Option<PathBuf>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub page_size: Option<usize>,
    pub max_arc_bytes: Option<u64>,
    pub oai_base_template: Option<String>,
    pub openurl_base_template: Option<String>,
    pub strict_url_ver: Option<bool>,
    pub metadata_prefix: Option<String>,
    pub admin_email: Option<String>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl Settings {
    pub fn parse(text: &str) -> Result<Settings> {
        let mut s = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "store" => s.store = Some(PathBuf::from(value)),
                "host" => s.host = Some(value.to_owned()),
                "port" => s.port = Some(parse_value(key, value)?),
                "page_size" => s.page_size = Some(parse_value(key, value)?),
                "max_arc_bytes" => s.max_arc_bytes = Some(parse_value(key, value)?),
                "oai_base_template" => s.oai_base_template = Some(value.to_owned()),
                "openurl_base_template" => s.openurl_base_template = Some(value.to_owned()),
                "strict_url_ver" => s.strict_url_ver = Some(parse_value(key, value)?),
                "metadata_prefix" => s.metadata_prefix = Some(value.to_owned()),
                "admin_email" => s.admin_email = Some(value.to_owned()),
                _ => return Err(Error::Config(format!("line {}: unknown key {key:?}", n + 1))),
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Settings::parse(&text)
    }

    /// Host and port overrides from the environment.
    pub fn from_env() -> Result<Settings> {
        Settings::from_vars(|k| std::env::var(k).ok())
    }

    pub fn from_vars(get: impl Fn(&str) -> Option<String>) -> Result<Settings> {
        Ok(Settings { host: get(ENV_HOST), port: get(ENV_PORT).map(|p| parse_value(ENV_PORT, &p)).transpose()?, ..Settings::default() })
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: Settings) -> Settings {
        Settings {
            store: top.store.or(self.store),
            host: top.host.or(self.host),
            port: top.port.or(self.port),
            page_size: top.page_size.or(self.page_size),
            max_arc_bytes: top.max_arc_bytes.or(self.max_arc_bytes),
            oai_base_template: top.oai_base_template.or(self.oai_base_template),
            openurl_base_template: top.openurl_base_template.or(self.openurl_base_template),
            strict_url_ver: top.strict_url_ver.or(self.strict_url_ver),
            metadata_prefix: top.metadata_prefix.or(self.metadata_prefix),
            admin_email: top.admin_email.or(self.admin_email),
        }
    }

    pub fn resolve(self) -> Result<Config> {
        let store = self.store.ok_or_else(|| Error::Config("no store root given".into()))?;
        let host = self.host.unwrap_or_else(|| "127.0.0.1".into());
        let port = self.port.unwrap_or(8080);
        let authority = if host.contains(':') { format!("[{host}]:{port}") } else { format!("{host}:{port}") };
        let config = Config {
            store,
            page_size: self.page_size.unwrap_or(500),
            max_arc_bytes: self.max_arc_bytes.unwrap_or(DEFAULT_MAX_ARC_BYTES),
            oai_base_template: self.oai_base_template.unwrap_or_else(|| format!("http://{authority}/oai/{TAPE_PLACEHOLDER}")),
            openurl_base_template: self.openurl_base_template.unwrap_or_else(|| format!("http://{authority}/openurl/{ARC_PLACEHOLDER}")),
            strict_url_ver: self.strict_url_ver.unwrap_or(false),
            metadata_prefix: self.metadata_prefix.unwrap_or_else(|| "didl".into()),
            admin_email: self.admin_email.unwrap_or_else(|| "admin@localhost".into()),
            host,
            port,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub store: PathBuf,
    pub host: String,
    pub port: u16,
    pub page_size: usize,
    pub max_arc_bytes: u64,
    pub oai_base_template: String,
    pub openurl_base_template: String,
    pub strict_url_ver: bool,
    pub metadata_prefix: String,
    pub admin_email: String,
}

impl Config {
    /// Defaults for a store root.
    pub fn for_store(store: impl Into<PathBuf>) -> Config {
        Settings { store: Some(store.into()), ..Settings::default() }.resolve().expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.page_size == 0 {
            return Err(Error::Config("page_size must be positive".into()));
        }
        if self.max_arc_bytes == 0 {
            return Err(Error::Config("max_arc_bytes must be positive".into()));
        }
        if self.metadata_prefix.is_empty() || !self.metadata_prefix.bytes().all(|b| b.is_ascii_alphanumeric() || b"_-.".contains(&b)) {
            return Err(Error::Config(format!("invalid metadata_prefix {:?}", self.metadata_prefix)));
        }
        check_template(&self.oai_base_template, TAPE_PLACEHOLDER)?;
        check_template(&self.openurl_base_template, ARC_PLACEHOLDER)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_layer() {
        let file = Settings::parse("# comment\nstore = /data\nport=9000\nhost = 0.0.0.0\n\npage_size = 50\nstrict_url_ver = true\n").unwrap();
        let flags = Settings { port: Some(9001), ..Settings::default() };
        let env = Settings::from_vars(|k| (k == ENV_PORT).then(|| "9002".to_owned())).unwrap();
        let c = file.clone().overlay(flags.clone()).resolve().unwrap();
        assert_eq!(c.port, 9001);
        let c = file.overlay(flags).overlay(env).resolve().unwrap();
        assert_eq!((c.host.as_str(), c.port, c.page_size, c.strict_url_ver), ("0.0.0.0", 9002, 50, true));
        assert_eq!(c.oai_base_template, "http://0.0.0.0:9002/oai/{tape}");
        assert_eq!(c.store, PathBuf::from("/data"));
    }

    #[test]
    fn rejections() {
        assert!(Settings::parse("bogus = 1").is_err());
        assert!(Settings::parse("port = x").is_err());
        assert!(Settings::parse("no equals sign").is_err());
        assert!(Settings::default().resolve().is_err());
        let s = Settings { store: Some("/s".into()), oai_base_template: Some("http://h/oai".into()), ..Settings::default() };
        assert!(s.resolve().is_err());
        let s = Settings { store: Some("/s".into()), page_size: Some(0), ..Settings::default() };
        assert!(s.resolve().is_err());
    }

    #[test]
    fn defaults() {
        let c = Config::for_store("/s");
        assert_eq!(c.page_size, 500);
        assert_eq!(c.metadata_prefix, "didl");
        assert_eq!(c.openurl_base_template, "http://127.0.0.1:8080/openurl/{arc}");
    }
}
