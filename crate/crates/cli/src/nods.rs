//! `NODS` dataset files.
//!
//! Layout: magic `NODS`, then little-endian `u32` version, n, nx, ny,
//! c_in, c_out, a `u8` dtype (1 = f64), then n records of
//! (input field, output field) as little-endian doubles in field layout.
//! Grid extents, task and prior live in a JSON sidecar next to the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nnolab_core::field::Field;
use nnolab_core::pde::{Dataset, DatasetMeta};

pub const MAGIC: &[u8; 4] = b"NODS";
pub const VERSION: u32 = 1;
pub const DTYPE_F64: u8 = 1;
const HEADER_LEN: usize = 4 + 6 * 4 + 1;

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode(ds: &Dataset) -> Vec<u8> {
    let g = ds.grid();
    let (ci, co) = (ds.in_channels(), ds.out_channels());
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * g.len() * (ci + co) * 8);
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        ds.len() as u32,
        g.nx() as u32,
        g.ny() as u32,
        ci as u32,
        co as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(DTYPE_F64);
    for (u, y) in ds.inputs.iter().zip(&ds.outputs) {
        for v in u.data().iter().chain(y.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Header fields of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub c_in: usize,
    pub c_out: usize,
}

pub fn decode_header(bytes: &[u8]) -> Result<Header> {
    ensure!(
        bytes.len() >= HEADER_LEN,
        "truncated header ({} bytes)",
        bytes.len()
    );
    ensure!(&bytes[..4] == MAGIC, "bad magic {:?}", &bytes[..4]);
    let word =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let version = word(0) as u32;
    ensure!(version == VERSION, "unsupported version {version}");
    let dtype = bytes[HEADER_LEN - 1];
    ensure!(dtype == DTYPE_F64, "unsupported dtype {dtype}");
    Ok(Header {
        n: word(1),
        nx: word(2),
        ny: word(3),
        c_in: word(4),
        c_out: word(5),
    })
}

/// Rebuilds a dataset; `meta` supplies the grid and provenance and must agree
/// with the header.
pub fn decode(bytes: &[u8], meta: DatasetMeta) -> Result<Dataset> {
    let h = decode_header(bytes)?;
    let g = meta.grid;
    ensure!(
        h.nx == g.nx() && h.ny == g.ny() && h.n == meta.groups.len(),
        "header ({} samples on {}x{}) disagrees with metadata ({} samples on {}x{})",
        h.n,
        h.nx,
        h.ny,
        meta.groups.len(),
        g.nx(),
        g.ny()
    );
    let points = h.nx * h.ny;
    let expected =
        h.n.checked_mul(points * (h.c_in + h.c_out) * 8)
            .and_then(|b| b.checked_add(HEADER_LEN))
            .context("header sizes overflow")?;
    if bytes.len() != expected {
        bail!("expected {expected} bytes, found {}", bytes.len());
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |c: usize| -> Result<Field> {
        let data: Vec<f64> = values.by_ref().take(points * c).collect();
        Ok(Field::new(g, c, data)?)
    };
    let mut inputs = Vec::with_capacity(h.n);
    let mut outputs = Vec::with_capacity(h.n);
    for _ in 0..h.n {
        inputs.push(take(h.c_in)?);
        outputs.push(take(h.c_out)?);
    }
    Ok(Dataset::new(inputs, outputs, meta)?)
}

pub fn save(ds: &Dataset, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, encode(ds)).with_context(|| format!("writing {}", path.display()))?;
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&ds.meta)?)
        .with_context(|| format!("writing {}", side.display()))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let side = sidecar_path(path);
    let meta: DatasetMeta = serde_json::from_str(
        &std::fs::read_to_string(&side).with_context(|| format!("reading {}", side.display()))?,
    )
    .with_context(|| format!("parsing {}", side.display()))?;
    decode(&bytes, meta).with_context(|| format!("decoding {}", path.display()))
}
