//! `NOCK` checkpoints: a model plus the normalizer it was trained with.
//!
//! Layout: magic `NOCK`, `u32` version, `u64` length of a JSON blob, the
//! blob, `u32` tensor count, then per tensor a `u32` rank, `u32` dims and
//! little-endian doubles. Model parameters come first in declaration order,
//! followed by the four normalizer fields as `[points, channels]`.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use nnolab_core::diff::Tensor;
use nnolab_core::field::{Field, Grid2D};
use nnolab_core::neuralop::{NnoConfig, NnoModel};
use nnolab_core::train::Normalizer;
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 4] = b"NOCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Blob {
    model: NnoConfig,
    normalizer_grid: Grid2D,
    normalizer_eps: f64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: NnoModel,
    pub normalizer: Normalizer,
}

fn field_tensor(f: &Field) -> Tensor {
    Tensor::matrix(f.grid().len(), f.channels(), f.data().to_vec()).expect("field data is finite")
}

fn push_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(ck: &Checkpoint) -> Result<Vec<u8>> {
    let nz = &ck.normalizer;
    let blob = serde_json::to_vec(&Blob {
        model: ck.model.config.clone(),
        normalizer_grid: *nz.in_mean.grid(),
        normalizer_eps: nz.eps,
    })?;
    let params = ck.model.params();
    let norm: Vec<Tensor> = [&nz.in_mean, &nz.in_std, &nz.out_mean, &nz.out_std]
        .map(field_tensor)
        .into();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    out.extend_from_slice(&blob);
    out.extend_from_slice(&((params.len() + norm.len()) as u32).to_le_bytes());
    for t in params.into_iter().chain(&norm) {
        push_tensor(&mut out, t);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            bail!("truncated checkpoint at byte {}", self.pos)
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()? as usize;
        ensure!((1..=4).contains(&rank), "bad tensor rank {rank}");
        let shape = (0..rank)
            .map(|_| Ok(self.u32()? as usize))
            .collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .context("tensor size overflows")?;
        let raw = self.take(len.checked_mul(8).context("tensor size overflows")?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor::new(shape, data)?)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    ensure!(r.take(4)? == MAGIC, "bad magic");
    let version = r.u32()?;
    ensure!(version == VERSION, "unsupported version {version}");
    let len = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
    let blob: Blob = serde_json::from_slice(r.take(usize::try_from(len)?)?)
        .context("parsing checkpoint config")?;
    let count = r.u32()? as usize;
    let mut model = NnoModel::init(&blob.model, 0)?;
    let n_params = model.params().len();
    ensure!(
        count == n_params + 4,
        "expected {} tensors, found {count}",
        n_params + 4
    );
    let params = (0..n_params)
        .map(|_| r.tensor())
        .collect::<Result<Vec<_>>>()?;
    model.set_params(params)?;
    let g = blob.normalizer_grid;
    let mut field = |c: usize| -> Result<Field> {
        let t = r.tensor()?;
        ensure!(
            t.shape() == [g.len(), c],
            "normalizer shape {:?}",
            t.shape()
        );
        Ok(Field::new(g, c, t.into_data())?)
    };
    let (ci, co) = (blob.model.in_channels, blob.model.out_channels);
    let normalizer = Normalizer {
        in_mean: field(ci)?,
        in_std: field(ci)?,
        out_mean: field(co)?,
        out_std: field(co)?,
        eps: blob.normalizer_eps,
    };
    ensure!(
        r.pos == bytes.len(),
        "{} trailing bytes",
        bytes.len() - r.pos
    );
    Ok(Checkpoint { model, normalizer })
}

pub fn save(ck: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, encode(ck)?).with_context(|| format!("writing {}", path.display()))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}
