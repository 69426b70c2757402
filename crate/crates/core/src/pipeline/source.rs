//! Random access to the frames of a sequence.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{frame_file_name, read_ppm, Frame};
use crate::synthgen::Scene;

pub trait FrameSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dims(&self) -> (usize, usize);

    fn frame(&self, index: usize) -> Result<Frame>;
}

/// `frame_000000.ppm`, `frame_000001.ppm`, ... in one directory.
#[derive(Debug, Clone)]
pub struct DirSource {
    dir: PathBuf,
    len: usize,
    dims: (usize, usize),
}

impl DirSource {
    pub fn open(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no frame directory"),
            ));
        }
        let mut len = 0;
        while dir.join(frame_file_name(len)).is_file() {
            len += 1;
        }
        let dims = if len > 0 {
            read_ppm(&dir.join(frame_file_name(0)))?.dims()
        } else {
            (0, 0)
        };
        Ok(DirSource {
            dir: dir.to_path_buf(),
            len,
            dims,
        })
    }
}

impl FrameSource for DirSource {
    fn len(&self) -> usize {
        self.len
    }

    fn dims(&self) -> (usize, usize) {
        self.dims
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        if index >= self.len {
            return Err(Error::InsufficientData(format!("frame {index} of {}", self.len)));
        }
        let f = read_ppm(&self.dir.join(frame_file_name(index)))?;
        if f.dims() != self.dims {
            return Err(Error::dims(self.dims, f.dims()));
        }
        Ok(f)
    }
}

/// Frames rendered on demand.
impl FrameSource for Scene {
    fn len(&self) -> usize {
        self.frame_count()
    }

    fn dims(&self) -> (usize, usize) {
        (self.config.width, self.config.height)
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        if index >= self.frame_count() {
            return Err(Error::InsufficientData(format!(
                "frame {index} of {}",
                self.frame_count()
            )));
        }
        Ok(self.render(index))
    }
}

/// In-memory frames.
impl FrameSource for Vec<Frame> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn dims(&self) -> (usize, usize) {
        self.first().map_or((0, 0), Frame::dims)
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::InsufficientData(format!("frame {index} of {}", self.as_slice().len())))
    }
}
