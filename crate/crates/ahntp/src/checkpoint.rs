//! Binary checkpoint container.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic        8 bytes   "AHNTPCKP"
//! version      u32       1
//! header_len   u64
//! header       JSON      {"run": RunConfig, "n_users", "adam_steps", "n_tensors"}
//! n_tensors ×  record    u32 name_len, name (UTF-8), u64 rows, u64 cols,
//!                        rows·cols f64 in row-major order
//! checksum     u64       FNV-1a 64 of every preceding byte
//! ```
//!
//! Records hold the model parameters in [`ModelState`] order, then the Adam
//! first moments named `adam.m/<param>`, then the second moments named
//! `adam.v/<param>`. Floats are stored bit-exactly and the JSON header is
//! written and parsed losslessly, so load(save(x)) == x.

use std::fs;
use std::path::Path;

use ahntp_core::autodiff::{Adam, Tensor};
use ahntp_core::model::ModelState;
use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

const MAGIC: &[u8; 8] = b"AHNTPCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub run: RunConfig,
    pub state: ModelState,
    pub adam: Adam,
}

#[derive(Serialize, Deserialize)]
struct Header {
    run: RunConfig,
    n_users: usize,
    adam_steps: u64,
    n_tensors: usize,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Checkpoint {
    pub fn n_users(&self) -> usize {
        self.state.get("user_embeddings").map_or(0, Tensor::rows)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (m, v) = self.adam.moments();
        let names = self.state.names();
        let records: Vec<(String, &Tensor)> = names
            .iter()
            .cloned()
            .zip(self.state.tensors())
            .chain(names.iter().map(|n| format!("adam.m/{n}")).zip(m))
            .chain(names.iter().map(|n| format!("adam.v/{n}")).zip(v))
            .collect();
        let header = Header {
            run: self.run.clone(),
            n_users: self.n_users(),
            adam_steps: self.adam.steps_taken(),
            n_tensors: records.len(),
        };
        let header = serde_json::to_vec(&header).expect("config serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (name, t) in records {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let sum = fnv1a(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> anyhow::Result<Self> {
        ensure!(bytes.len() >= MAGIC.len() + 12 + 8, "file too short for a checkpoint");
        ensure!(&bytes[..8] == MAGIC, "not a checkpoint file (bad magic)");
        let (body, sum) = bytes.split_at(bytes.len() - 8);
        ensure!(fnv1a(body) == u64::from_le_bytes(sum.try_into().unwrap()), "checksum mismatch: file is corrupt");
        let mut r = Reader { bytes: body, pos: 8 };
        let version = r.u32()?;
        ensure!(version == VERSION, "unsupported checkpoint version {version}");
        let header_len = r.len()?;
        let header: Header = serde_json::from_slice(r.take(header_len)?).context("invalid checkpoint header")?;
        let mut named = Vec::with_capacity(header.n_tensors);
        for _ in 0..header.n_tensors {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec()).context("tensor name is not UTF-8")?;
            let rows = r.len()?;
            let cols = r.len()?;
            let n = rows.checked_mul(cols).context("tensor size overflows")?;
            ensure!(n.checked_mul(8).is_some_and(|b| b <= r.remaining()), "truncated tensor {name}");
            let data = r.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            named.push((name, Tensor::new(rows, cols, data)?));
        }
        ensure!(r.remaining() == 0, "{} trailing bytes after the last tensor", r.remaining());

        let n_params = header.n_tensors / 3;
        ensure!(n_params * 3 == header.n_tensors, "tensor count {} is not params + two moments", header.n_tensors);
        let second: Vec<_> = named.split_off(2 * n_params);
        let first: Vec<_> = named.split_off(n_params);
        for (prefix, moments) in [("adam.m/", &first), ("adam.v/", &second)] {
            for ((pn, p), (mn, t)) in named.iter().zip(moments) {
                if mn.strip_prefix(prefix) != Some(pn) || p.shape() != t.shape() {
                    bail!("optimizer record {mn} does not match parameter {pn}");
                }
            }
        }
        let train = header.run.train.effective();
        let state = ModelState::from_named(&train.model, header.n_users, named)?;
        let strip = |v: Vec<(String, Tensor)>| v.into_iter().map(|(_, t)| t).collect();
        let adam = Adam::from_moments(train.adam(), header.adam_steps, strip(first), strip(second));
        Ok(Self { run: header.run, state, adam })
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, self.to_bytes()).with_context(|| format!("cannot write checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("cannot read checkpoint {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("invalid checkpoint {}", path.display()))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> anyhow::Result<&'a [u8]> {
        ensure!(n <= self.remaining(), "checkpoint is truncated");
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> anyhow::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn len(&mut self) -> anyhow::Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).context("length does not fit in memory")
    }
}
