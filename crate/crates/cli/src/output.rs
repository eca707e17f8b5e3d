use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use distelect_core::ingest::write_atomic;

/// Writes `text` atomically to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
