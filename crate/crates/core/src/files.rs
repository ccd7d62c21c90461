//! All-or-nothing file output.

use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::Result;

/// Writes every `(file name, contents)` pair into `dir`. Nothing becomes
/// visible under its final name until all contents have been written.
pub fn write_all_atomic(dir: &Path, files: &[(&str, &[u8])]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| e.error)?;
    }
    Ok(())
}

/// Writes one file via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| crate::error::RcaError::InvalidConfig(format!("not a file path: {}", path.display())))?;
    write_all_atomic(dir, &[(name, bytes)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_directory_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let missing = root.path().join("nope");
        assert!(write_all_atomic(&missing, &[("a.txt", b"x")]).is_err());
        assert!(!missing.exists());
        write_all_atomic(root.path(), &[("a.txt", b"x"), ("b.txt", b"y")]).unwrap();
        assert_eq!(std::fs::read(root.path().join("b.txt")).unwrap(), b"y");
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 2);
    }
}
