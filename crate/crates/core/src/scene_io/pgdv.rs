//! PGDV raster container: `PGDV1\n`, one ASCII header line
//! `<kind> <width> <height> <channels>\n`, then row-major little-endian
//! float32 with top-left origin. Bit-exact round trips.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster;

const MAGIC: &[u8] = b"PGDV1\n";

/// Payload kind recorded in the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterKind {
    Depth,
    Flow,
    Feat,
}

impl RasterKind {
    fn as_str(self) -> &'static str {
        match self {
            RasterKind::Depth => "depth",
            RasterKind::Flow => "flow",
            RasterKind::Feat => "feat",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "depth" => Some(RasterKind::Depth),
            "flow" => Some(RasterKind::Flow),
            "feat" => Some(RasterKind::Feat),
            _ => None,
        }
    }
}

impl fmt::Display for RasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn write_raster(path: &Path, kind: RasterKind, raster: &Raster) -> Result<()> {
    if raster.channels() > 3 {
        return Err(Error::InvalidArgument(
            "pgdv rasters support at most 3 channels".into(),
        ));
    }
    if raster.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "refusing to write non-finite samples to {}",
            path.display()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    writeln!(
        w,
        "{} {} {} {}",
        kind,
        raster.width(),
        raster.height(),
        raster.channels()
    )?;
    let mut buf = Vec::with_capacity(raster.data().len() * 4);
    for v in raster.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_raster(path: &Path) -> Result<(RasterKind, Raster)> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(|_| Error::BadHeader {
        path: path.to_path_buf(),
        detail: "file too short for magic".into(),
    })?;
    if magic != MAGIC {
        return Err(Error::BadHeader {
            path: path.to_path_buf(),
            detail: "bad magic".into(),
        });
    }

    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte).map_err(|_| Error::BadHeader {
            path: path.to_path_buf(),
            detail: "unterminated header line".into(),
        })?;
        if byte[0] == b'\n' {
            break;
        }
        if header.len() > 256 {
            return Err(Error::BadHeader {
                path: path.to_path_buf(),
                detail: "header line too long".into(),
            });
        }
        header.push(byte[0]);
    }
    let header = String::from_utf8(header).map_err(|_| Error::BadHeader {
        path: path.to_path_buf(),
        detail: "header is not ASCII".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::BadHeader {
            path: path.to_path_buf(),
            detail: format!("expected 4 header fields, got {}", fields.len()),
        });
    }
    let kind = RasterKind::parse(fields[0]).ok_or_else(|| Error::BadHeader {
        path: path.to_path_buf(),
        detail: format!("unknown kind '{}'", fields[0]),
    })?;
    let parse_dim = |s: &str, name: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|_| Error::BadHeader {
            path: path.to_path_buf(),
            detail: format!("bad {name} '{s}'"),
        })
    };
    let width = parse_dim(fields[1], "width")?;
    let height = parse_dim(fields[2], "height")?;
    let channels = parse_dim(fields[3], "channels")?;

    let expected = width * height * channels * 4;
    let mut payload = Vec::with_capacity(expected);
    r.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            actual: payload.len(),
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((kind, Raster::from_vec(width, height, channels, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.pgdv");
        let r = Raster::from_vec(1, 1, 1, vec![0.0]).unwrap();
        write_raster(&path, RasterKind::Depth, &r).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes, b"PGDV1\ndepth 1 1 1\n\x00\x00\x00\x00");
    }

    #[test]
    fn rejects_nan_at_write_time() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster::from_vec(1, 1, 2, vec![0.0, f32::NAN]).unwrap();
        assert!(write_raster(&dir.path().join("f.pgdv"), RasterKind::Flow, &r).is_err());
    }

    #[test]
    fn random_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.pgdv");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f32> = (0..17 * 9 * 2)
            .map(|_| rng.random_range(-100.0..100.0))
            .collect();
        let r = Raster::from_vec(17, 9, 2, data).unwrap();
        write_raster(&path, RasterKind::Flow, &r).unwrap();
        let (kind, back) = read_raster(&path).unwrap();
        assert_eq!(kind, RasterKind::Flow);
        assert_eq!(
            back.data()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>(),
            r.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.pgdv");
        std::fs::write(&bad, b"NOPE1\ndepth 1 1 1\n\x00\x00\x00\x00").unwrap();
        assert!(matches!(
            read_raster(&bad),
            Err(Error::BadHeader { .. })
        ));
        let short = dir.path().join("short.pgdv");
        std::fs::write(&short, b"PGDV1\ndepth 2 2 1\n\x00\x00\x00\x00").unwrap();
        assert!(matches!(
            read_raster(&short),
            Err(Error::TruncatedPayload { .. })
        ));
    }
}
