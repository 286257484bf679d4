use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Environment variable prefixed to relative pool directories.
pub const ASSET_ROOT_ENV: &str = "GLASSFORGE_ASSET_ROOT";

const HDR_EXTENSIONS: &[&str] = &["hdr"];
const SRGB_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

/// Pool directories as written in a dataset config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolDirs {
    pub hdr_dir: Option<PathBuf>,
    pub srgb_dir: Option<PathBuf>,
}

/// Sorted asset lists. Paths are kept as configured (without the asset
/// root) so manifests do not depend on where assets live on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssetPools {
    pub hdr_pool: Vec<PathBuf>,
    pub srgb_pool: Vec<PathBuf>,
    pub root: Option<PathBuf>,
}

fn list(dir: &Path, root: Option<&Path>, exts: &[&str]) -> Result<Vec<PathBuf>, DatasetError> {
    let on_disk = resolve_with(root, dir);
    let io = |e: std::io::Error| DatasetError::Pool(format!("{}: {e}", on_disk.display()));
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&on_disk).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| exts.contains(&e.as_str())) {
            if let Some(name) = path.file_name() {
                out.push(dir.join(name));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn resolve_with(root: Option<&Path>, p: &Path) -> PathBuf {
    match root {
        Some(r) if p.is_relative() => r.join(p),
        _ => p.to_path_buf(),
    }
}

impl AssetPools {
    /// Lists both directories, prefixing relative ones with the asset root
    /// taken from the environment.
    pub fn from_dirs(dirs: &PoolDirs) -> Result<Self, DatasetError> {
        let root = std::env::var_os(ASSET_ROOT_ENV).map(PathBuf::from);
        Self::from_dirs_with_root(dirs, root)
    }

    pub fn from_dirs_with_root(dirs: &PoolDirs, root: Option<PathBuf>) -> Result<Self, DatasetError> {
        let r = root.as_deref();
        let hdr_pool = dirs.hdr_dir.as_deref().map(|d| list(d, r, HDR_EXTENSIONS)).transpose()?.unwrap_or_default();
        let srgb_pool = dirs.srgb_dir.as_deref().map(|d| list(d, r, SRGB_EXTENSIONS)).transpose()?.unwrap_or_default();
        Ok(Self { hdr_pool, srgb_pool, root })
    }

    /// Location on disk of a pool entry.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        resolve_with(self.root.as_deref(), p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_sorted_and_filtered() {
        let root = tempfile::tempdir().unwrap();
        let srgb = root.path().join("srgb");
        std::fs::create_dir(&srgb).unwrap();
        for n in ["b.png", "a.JPG", "c.txt", "d.hdr"] {
            std::fs::write(srgb.join(n), b"").unwrap();
        }
        let dirs = PoolDirs { hdr_dir: None, srgb_dir: Some("srgb".into()) };
        let pools = AssetPools::from_dirs_with_root(&dirs, Some(root.path().to_path_buf())).unwrap();
        assert_eq!(pools.srgb_pool, vec![PathBuf::from("srgb/a.JPG"), PathBuf::from("srgb/b.png")]);
        assert!(pools.hdr_pool.is_empty());
        assert_eq!(pools.resolve(&pools.srgb_pool[0]), srgb.join("a.JPG"));
    }

    #[test]
    fn missing_dir_is_error() {
        let dirs = PoolDirs { hdr_dir: Some("/nonexistent/glassforge".into()), srgb_dir: None };
        assert!(matches!(AssetPools::from_dirs_with_root(&dirs, None), Err(DatasetError::Pool(_))));
    }
}
