//! JSON Lines helpers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use pcr_core::{types::parse_dataset, Sample};
use serde::Serialize;

/// Buffered JSONL writer; one value per line, `\n` terminated.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
    lines: usize,
}

impl JsonlWriter {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let out = BufWriter::new(File::create(&path)?);
        Ok(Self { path, out, lines: 0 })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn finish(mut self) -> io::Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

/// Writes pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Loads and validates a JSONL dataset.
pub fn load_dataset(path: impl AsRef<Path>) -> io::Result<Vec<Sample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_one_line_per_value() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = JsonlWriter::create(dir.path().join("x.jsonl")).unwrap();
        w.write(&serde_json::json!({"a": 1})).unwrap();
        w.write(&"s").unwrap();
        assert_eq!(w.lines(), 2);
        let p = w.finish().unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "{\"a\":1}\n\"s\"\n");
    }
}
