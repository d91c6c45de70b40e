//! Append-only, directory-backed case store keyed by content hash.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use gridshape_core::{CaseContext, NetworkCase};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Case(#[from] gridshape_core::Error),
    #[error("no case with id {0}")]
    NotFound(String),
    #[error("case store: {0}")]
    Io(#[from] io::Error),
}

pub struct CaseStore {
    dir: PathBuf,
    cache: RwLock<HashMap<String, Arc<CaseContext>>>,
}

/// Ids are lowercase sha-256 hex; anything else never names a file.
fn is_case_id(id: &str) -> bool {
    id.len() == 64
        && id
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl CaseStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Validates and stores a case. Returns the context and whether the case
    /// was new; re-uploading identical content yields the same id.
    pub fn put(&self, text: &str) -> Result<(Arc<CaseContext>, bool), StoreError> {
        let case = NetworkCase::from_json(text)?;
        let ctx = Arc::new(CaseContext::new(case)?);
        let path = self.path(&ctx.hash);
        let created = if path.exists() {
            false
        } else {
            let bytes = serde_json::to_vec_pretty(&ctx.case).expect("case serializes");
            let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
            tmp.write_all(&bytes)?;
            tmp.as_file().sync_all()?;
            match tmp.persist_noclobber(&path) {
                Ok(_) => true,
                // a concurrent upload of the same content won
                Err(e) if path.exists() => {
                    drop(e);
                    false
                }
                Err(e) => return Err(e.error.into()),
            }
        };
        self.cache
            .write()
            .expect("cache lock")
            .insert(ctx.hash.clone(), ctx.clone());
        Ok((ctx, created))
    }

    pub fn get(&self, id: &str) -> Result<Arc<CaseContext>, StoreError> {
        if !is_case_id(id) {
            return Err(StoreError::NotFound(id.into()));
        }
        if let Some(ctx) = self.cache.read().expect("cache lock").get(id) {
            return Ok(ctx.clone());
        }
        let text = match fs::read_to_string(self.path(id)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.into()))
            }
            Err(e) => return Err(e.into()),
        };
        let ctx = Arc::new(CaseContext::from_json(&text)?);
        if ctx.hash != id {
            return Err(StoreError::Io(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("stored case {id} hashes to {}", ctx.hash),
            )));
        }
        self.cache
            .write()
            .expect("cache lock")
            .insert(id.into(), ctx.clone());
        Ok(ctx)
    }

    /// Stored ids in lexical order.
    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".json")) {
                if is_case_id(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
