//! OBJ meshes, embedding files and atomic file output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

mod embfile;
mod obj;

pub use embfile::{
    parse_embeddings, read_embeddings, render_embeddings, write_embeddings, EmbeddingFile, FORMAT_VERSION,
};
pub use obj::{parse_obj, read_obj, render_obj, write_obj};

/// Writes through `fill` into a temporary file next to `path`, then renames
/// it over `path`. Readers never observe a partially written file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Atomic replacement of `path` with `bytes`.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(bytes)?))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::io::Read::read_to_string(&mut File::open(path)?, &mut s)?;
    Ok(s)
}
