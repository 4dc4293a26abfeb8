//! Output files are staged next to their destination and renamed into place
//! only once every file of a command has been written.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use wsfair_core::Error;

use crate::CliError;

pub struct Outputs {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_owned(),
            staged: Vec::new(),
            committed: false,
        })
    }

    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        let file = File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
        self.staged.push((tmp.clone(), target));
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| io_error(&tmp, e))?;
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(Error::from)?;
            w.write_all(b"\n").map_err(Error::from)?;
            Ok(())
        })
    }

    /// Moves every staged file into place. If a rename fails, files already
    /// moved are removed again.
    pub fn commit(mut self) -> Result<Vec<PathBuf>, CliError> {
        let staged = std::mem::take(&mut self.staged);
        let mut done: Vec<PathBuf> = Vec::new();
        for (i, (tmp, target)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, target) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                for (t, _) in &staged[i..] {
                    let _ = fs::remove_file(t);
                }
                self.committed = true;
                return Err(io_error(target, e));
            }
            done.push(target.clone());
        }
        self.committed = true;
        Ok(done)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, _) in &self.staged {
                let _ = fs::remove_file(tmp);
            }
        }
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    )))
}

pub fn open(path: &Path) -> Result<std::io::BufReader<File>, CliError> {
    File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_lands_without_commit() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut out = Outputs::new(dir.path()).unwrap();
            out.write("a.txt", |w| {
                w.write_all(b"x").map_err(Error::from)?;
                Ok(())
            })
            .unwrap();
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn failed_body_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.write("ok.txt", |_| Ok(())).unwrap();
        let r = out.write("bad.txt", |_| Err(CliError::Usage("boom".into())));
        assert!(r.is_err());
        drop(out);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_moves_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.write_json("r.json", &serde_json::json!({"a": 1})).unwrap();
        let files = out.commit().unwrap();
        assert_eq!(files, vec![dir.path().join("r.json")]);
        assert_eq!(fs::read_to_string(&files[0]).unwrap(), "{\n  \"a\": 1\n}\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
