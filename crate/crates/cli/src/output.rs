use std::io::Write;
use std::path::Path;

use crate::scenario::Artifact;

/// Writes each artifact to a temporary file in `dir` and renames it into place.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&a.contents)?;
        tmp.as_file().sync_all()?;
        tmp.persist(dir.join(&a.name)).map_err(|e| e.error)?;
    }
    Ok(())
}
