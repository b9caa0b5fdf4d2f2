//! Netpbm graymaps (P2 ASCII, P5 binary) and directories of them.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::DataMatrix;
use crate::error::{Error, Result};
use crate::numkernel::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    /// Row-major pixels rescaled to [0, 1] by the file's maxval.
    pub pixels: Vec<f64>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| std::str::from_utf8(&self.bytes[start..self.pos]).ok())?
    }

    fn number(&mut self, path: &Path, what: &str) -> Result<usize> {
        let tok = self
            .token()
            .ok_or_else(|| Error::parse(path, format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| Error::parse(path, format!("{what} `{tok}` is not an integer")))
    }
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

pub(crate) fn parse_pgm(bytes: &[u8], path: &Path) -> Result<PgmImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match cur.token() {
        Some("P5") => true,
        Some("P2") => false,
        other => {
            return Err(Error::parse(
                path,
                format!(
                    "unsupported magic {:?} (expected P2 or P5)",
                    other.unwrap_or("")
                ),
            ))
        }
    };
    let width = cur.number(path, "width")?;
    let height = cur.number(path, "height")?;
    let maxval = cur.number(path, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(path, format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::parse(path, "empty image"));
    }
    let n = width * height;
    let scale = maxval as f64;
    let raw: Vec<usize> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = cur.pos + 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let need = n * bpp;
        let data = bytes
            .get(start..start + need)
            .ok_or_else(|| Error::parse(path, format!("raster truncated: need {need} bytes")))?;
        if bpp == 1 {
            data.iter().map(|&b| b as usize).collect()
        } else {
            data.chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize)
                .collect()
        }
    } else {
        (0..n)
            .map(|k| cur.number(path, &format!("pixel {k}")))
            .collect::<Result<_>>()?
    };
    if let Some((k, v)) = raw.iter().enumerate().find(|(_, &v)| v > maxval) {
        return Err(Error::parse(
            path,
            format!("pixel {k} value {v} exceeds maxval {maxval}"),
        ));
    }
    Ok(PgmImage {
        width,
        height,
        pixels: raw.into_iter().map(|v| v as f64 / scale).collect(),
    })
}

/// Text before the first `_` of the file stem, or of the parent directory's
/// name when the stem has none (`subject03/img7.pgm`, `subject_03/img7.pgm`).
fn label_key(path: &Path, root: &Path) -> Option<String> {
    let prefix = |name: &str| {
        let p = name.split_once('_').map_or(name, |(p, _)| p);
        (!p.is_empty()).then(|| p.to_string())
    };
    let stem = path.file_stem()?.to_str()?;
    if stem.contains('_') {
        return prefix(stem);
    }
    let parent = path.parent().filter(|p| *p != root)?;
    prefix(parent.file_name()?.to_str()?)
}

/// Vectorizes every `.pgm` file under `dir` (recursively, sorted by path)
/// into one column each. Labels come from name prefixes (see `label_key`):
/// used directly when every prefix is an integer, otherwise mapped to the
/// prefix's rank among the sorted distinct prefixes. Without a prefix for
/// every file the result is unlabeled.
pub fn read_pgm_dir(dir: &Path) -> Result<DataMatrix> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut files: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| x.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::parse(dir, "no .pgm files found"));
    }

    let mut columns = Vec::with_capacity(files.len());
    let mut shape = None;
    for f in &files {
        let img = read_pgm(f)?;
        let s = *shape.get_or_insert((img.width, img.height));
        if s != (img.width, img.height) {
            return Err(Error::parse(
                f,
                format!(
                    "image is {}x{}, expected {}x{}",
                    img.width, img.height, s.0, s.1
                ),
            ));
        }
        columns.push(img.pixels);
    }

    let keys: Option<Vec<String>> = files.iter().map(|f| label_key(f, dir)).collect();
    let labels = keys.map(|keys| {
        let numeric: Option<Vec<usize>> = keys.iter().map(|k| k.parse().ok()).collect();
        numeric.unwrap_or_else(|| {
            let distinct: Vec<&String> = keys.iter().collect::<BTreeSet<_>>().into_iter().collect();
            keys.iter()
                .map(|k| distinct.binary_search(&k).unwrap())
                .collect()
        })
    });

    let rows = columns[0].len();
    let data = DenseMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i])?;
    DataMatrix::new(data, labels, format!("pgm-dir:{}", dir.display()))
}
