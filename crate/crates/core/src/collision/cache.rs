//! Binary cache files for [`KernelTable`].
//!
//! Layout (little endian): magic, format version, `d`, grid hash, config as
//! length-prefixed JSON, cutoff, rows, then a SHA-256 of everything before
//! it. Any mismatch or checksum failure makes the loader rebuild.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::grid::FrequencyGrid;
use super::table::{KernelRow, KernelTable, TableConfig};
use super::kstar_prefactor;
use crate::error::{KwrError, Result};
use crate::specfun::Dimension;

const MAGIC: &[u8; 8] = b"KWRTABLE";
const VERSION: u32 = 1;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "KWR_CACHE_DIR";

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|s| !s.is_empty()).map(PathBuf::from)
}

fn cache_key(d: Dimension, grid: &FrequencyGrid, config: &TableConfig) -> String {
    let mut h = Sha256::new();
    h.update(d.get().to_le_bytes());
    h.update(grid.hash());
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(VERSION.to_le_bytes());
    format!("kwr-table-d{}-{}.bin", d.get(), &hex::encode(h.finalize())[..20])
}

pub fn write_table(table: &KernelTable, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&table.d.get().to_le_bytes());
    buf.extend_from_slice(&table.grid.hash());
    let cfg = serde_json::to_vec(&table.config)?;
    buf.extend_from_slice(&(cfg.len() as u64).to_le_bytes());
    buf.extend_from_slice(&cfg);
    buf.extend_from_slice(&table.omega_cut.to_le_bytes());
    buf.extend_from_slice(&(table.rows.len() as u64).to_le_bytes());
    for row in &table.rows {
        match row {
            None => buf.push(0),
            Some(r) => {
                buf.push(1);
                buf.extend_from_slice(&r.omega.to_le_bytes());
                put_f64s(&mut buf, &r.outer);
                buf.extend_from_slice(&(r.starts.len() as u64).to_le_bytes());
                for s in &r.starts {
                    buf.extend_from_slice(&s.to_le_bytes());
                }
                put_f64s(&mut buf, &r.inner);
                put_f64s(&mut buf, &r.weights);
            }
        }
    }
    let sum = Sha256::digest(&buf);
    buf.extend_from_slice(&sum);
    // write-then-rename so a crash never leaves a truncated file in place
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn put_f64s(buf: &mut Vec<u8>, xs: &[f64]) {
    buf.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(KwrError::TableMismatch("truncated cache file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > self.data.len() {
            return Err(KwrError::TableMismatch("implausible length in cache file".into()));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Reads a table and checks it against the expected `(d, grid, config)`.
pub fn read_table(path: &Path, d: Dimension, grid: Arc<FrequencyGrid>, config: &TableConfig) -> Result<KernelTable> {
    let data = fs::read(path)?;
    if data.len() < 32 + MAGIC.len() {
        return Err(KwrError::TableMismatch("cache file too short".into()));
    }
    let (body, sum) = data.split_at(data.len() - 32);
    if Sha256::digest(body).as_slice() != sum {
        return Err(KwrError::TableMismatch("cache checksum mismatch".into()));
    }
    let mut r = Reader { data: body, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(KwrError::TableMismatch("bad magic".into()));
    }
    if r.u32()? != VERSION {
        return Err(KwrError::TableMismatch("unsupported cache version".into()));
    }
    if r.u32()? != d.get() {
        return Err(KwrError::TableMismatch("dimension differs".into()));
    }
    if r.take(32)? != grid.hash() {
        return Err(KwrError::TableMismatch("grid hash differs".into()));
    }
    let n = r.len()?;
    let stored: TableConfig = serde_json::from_slice(r.take(n)?)?;
    if &stored != config {
        return Err(KwrError::TableMismatch("table configuration differs".into()));
    }
    let omega_cut = r.f64()?;
    let nrows = r.len()?;
    if nrows != grid.len() {
        return Err(KwrError::TableMismatch("row count differs from grid".into()));
    }
    let mut rows = Vec::with_capacity(nrows);
    for _ in 0..nrows {
        match r.take(1)?[0] {
            0 => rows.push(None),
            1 => {
                let omega = r.f64()?;
                let outer = r.f64s()?;
                let ns = r.len()?;
                let starts = (0..ns).map(|_| r.u32()).collect::<Result<Vec<u32>>>()?;
                let inner = r.f64s()?;
                let weights = r.f64s()?;
                if starts.len() != outer.len() + 1 || inner.len() != weights.len() {
                    return Err(KwrError::TableMismatch("inconsistent row".into()));
                }
                rows.push(Some(KernelRow::new(omega, outer, starts, inner, weights, &grid)));
            }
            _ => return Err(KwrError::TableMismatch("bad row tag".into())),
        }
    }
    Ok(KernelTable {
        d,
        prefactor: kstar_prefactor(d),
        grid,
        config: config.clone(),
        omega_cut,
        rows,
    })
}

/// Loads the table from `dir` (default: `$KWR_CACHE_DIR`) when a valid file
/// exists; otherwise builds it and, when a directory is known, stores it.
pub fn load_or_build(
    d: Dimension,
    grid: Arc<FrequencyGrid>,
    config: TableConfig,
    dir: Option<&Path>,
) -> Result<KernelTable> {
    let dir = dir.map(Path::to_path_buf).or_else(cache_dir);
    let Some(dir) = dir else {
        return KernelTable::build(d, grid, config);
    };
    let path = dir.join(cache_key(d, &grid, &config));
    if path.exists() {
        if let Ok(t) = read_table(&path, d, grid.clone(), &config) {
            return Ok(t);
        }
    }
    let table = KernelTable::build(d, grid, config)?;
    fs::create_dir_all(&dir).map_err(|e| KwrError::Resource(format!("cache dir {}: {e}", dir.display())))?;
    write_table(&table, &path).map_err(|e| KwrError::Resource(format!("writing {}: {e}", path.display())))?;
    Ok(table)
}
