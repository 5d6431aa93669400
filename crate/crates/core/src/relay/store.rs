//! One file per block under a chain directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::block::RelayBlock;
use super::RelayError;

#[derive(Clone, Debug)]
pub struct ChainStore {
    dir: PathBuf,
}

impl ChainStore {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self { dir: dir.as_ref().to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&self, block: &RelayBlock) -> io::Result<()> {
        let name = format!("block-{:010}.bin", block.height);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, block.encode())?;
        fs::rename(tmp, self.dir.join(name))
    }

    /// Loads every block in height order and checks the hash links.
    pub fn load(&self) -> Result<Vec<RelayBlock>, RelayError> {
        load_chain(&self.dir)
    }
}

pub fn load_chain(dir: &Path) -> Result<Vec<RelayBlock>, RelayError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| RelayError::Storage(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("block-") && n.ends_with(".bin"))
        })
        .collect();
    files.sort();
    let mut blocks: Vec<RelayBlock> = Vec::with_capacity(files.len());
    for path in files {
        let raw = fs::read(&path).map_err(|e| RelayError::Storage(e.to_string()))?;
        let block = RelayBlock::decode(&raw).map_err(|e| RelayError::Storage(format!("{}: {e}", path.display())))?;
        let (height, parent) = match blocks.last() {
            Some(prev) => (prev.height + 1, prev.hash()),
            None => (1, crate::crypto::Hash32::ZERO),
        };
        if block.height != height {
            return Err(RelayError::WrongHeight { expected: height, got: block.height });
        }
        if block.parent_hash != parent {
            return Err(RelayError::WrongParent { height: block.height });
        }
        blocks.push(block);
    }
    Ok(blocks)
}
