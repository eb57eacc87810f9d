use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use utalk_core::renderer::{UvidHeader, VideoFile};
use utalk_core::{Error, Result};

#[derive(Debug, Clone)]
pub struct StoredVideo {
    pub path: PathBuf,
    pub header: UvidHeader,
}

/// Rendered videos on disk, keyed by opaque id.
///
/// Files are written under a temporary name and renamed into place, so a
/// reader never sees a partial file.
#[derive(Debug)]
pub struct VideoStore {
    root: PathBuf,
    entries: RwLock<HashMap<String, StoredVideo>>,
}

impl VideoStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            entries: RwLock::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn put(&self, video: &VideoFile) -> Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let path = self.root.join(format!("{id}.uvid"));
        let tmp = self.root.join(format!(".{id}.uvid.tmp"));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(video.bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        if let Err(e) = write() {
            let _ = fs::remove_file(&tmp);
            return Err(Error::WriteFailure(e));
        }
        self.entries.write().insert(
            id.clone(),
            StoredVideo {
                path,
                header: *video.header(),
            },
        );
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<StoredVideo> {
        self.entries.read().get(id).cloned()
    }

    pub fn read_bytes(&self, id: &str) -> Option<Result<Vec<u8>>> {
        let entry = self.get(id)?;
        Some(fs::read(&entry.path).map_err(Error::from))
    }

    pub fn load(&self, id: &str) -> Option<Result<VideoFile>> {
        self.read_bytes(id).map(|r| r.and_then(VideoFile::from_bytes))
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
