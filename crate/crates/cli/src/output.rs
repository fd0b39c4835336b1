use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Files produced by one command. Contents are staged in memory and written
/// together at the end; if any write fails, the files already written are
/// removed so a failed run leaves nothing behind.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, contents: String) {
        self.files.push((path, contents));
    }

    pub fn commit(self, dir: Option<&Path>) -> io::Result<Vec<PathBuf>> {
        if let Some(dir) = dir {
            fs::create_dir_all(dir)?;
        }
        let mut written = Vec::with_capacity(self.files.len());
        for (path, contents) in self.files {
            if let Err(e) = fs::write(&path, contents) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                let _ = fs::remove_file(&path);
                return Err(io::Error::new(e.kind(), format!("{}: {e}", path.display())));
            }
            written.push(path);
        }
        Ok(written)
    }
}
