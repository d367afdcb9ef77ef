//! Byte-level plumbing shared by the file formats: hashing and counting
//! adapters, empty-sink checks, atomic file publication.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// A write destination that can report how many bytes it already holds.
pub trait ByteSink: Write {
    fn existing_len(&mut self) -> io::Result<u64>;

    /// Flush buffered bytes down to durable storage where that means something.
    fn sync(&mut self) -> io::Result<()> {
        self.flush()
    }
}

impl ByteSink for Vec<u8> {
    fn existing_len(&mut self) -> io::Result<u64> {
        Ok(self.len() as u64)
    }
}

impl ByteSink for &mut Vec<u8> {
    fn existing_len(&mut self) -> io::Result<u64> {
        Ok(self.len() as u64)
    }
}

impl ByteSink for File {
    fn existing_len(&mut self) -> io::Result<u64> {
        Ok(self.metadata()?.len())
    }

    fn sync(&mut self) -> io::Result<()> {
        self.flush()?;
        self.sync_all()
    }
}

impl<W: ByteSink> ByteSink for io::BufWriter<W> {
    fn existing_len(&mut self) -> io::Result<u64> {
        let buffered = self.buffer().len() as u64;
        Ok(self.get_mut().existing_len()? + buffered)
    }

    fn sync(&mut self) -> io::Result<()> {
        self.flush()?;
        self.get_mut().sync()
    }
}

/// Hex SHA-256 of everything passed through.
pub struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
    written: u64,
}

impl<W: Write> HashingWriter<W> {
    pub fn new(inner: W) -> Self {
        HashingWriter { inner, hasher: Sha256::new(), written: 0 }
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn get_mut(&mut self) -> &mut W {
        &mut self.inner
    }

    pub fn hex_digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
    read: u64,
}

impl<R: Read> HashingReader<R> {
    pub fn new(inner: R) -> Self {
        HashingReader { inner, hasher: Sha256::new(), read: 0 }
    }

    pub fn bytes_read(&self) -> u64 {
        self.read
    }

    /// Drain the rest of the input, then return (size, hex digest).
    pub fn finish(mut self) -> io::Result<(u64, String)> {
        io::copy(&mut self, &mut io::sink())?;
        Ok((self.read, hex::encode(self.hasher.finalize())))
    }
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        self.read += n as u64;
        Ok(n)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// (size, hex SHA-256) of a file.
pub fn file_digest(path: &Path) -> io::Result<(u64, String)> {
    HashingReader::new(io::BufReader::with_capacity(1 << 20, File::open(path)?)).finish()
}

pub fn source_len<S: Seek>(source: &mut S) -> io::Result<u64> {
    let len = source.seek(SeekFrom::End(0))?;
    Ok(len)
}

/// Temporary sibling name for `path`; temporaries always start with `.tmp-`
/// so directory listings can tell them apart from published files.
pub fn temp_path(path: &Path, tag: &str) -> PathBuf {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    path.with_file_name(format!(".tmp-{tag}-{name}"))
}

pub fn is_temp_name(name: &str) -> bool {
    name.starts_with(".tmp-")
}

/// Create a brand-new file; refuses to touch an existing path.
pub fn create_new(path: &Path) -> io::Result<File> {
    OpenOptions::new().write(true).create_new(true).open(path)
}

/// Write `bytes` to a temporary sibling and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = temp_path(path, &uuid::Uuid::new_v4().simple().to_string()[..8]);
    let result = (|| {
        let mut f = create_new(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        sync_dir(path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn sync_dir(path: &Path) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if let Ok(d) = File::open(dir) {
            d.sync_all()?;
        }
    }
    Ok(())
}
