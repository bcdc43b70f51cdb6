use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_jsonl, read_text, to_jsonl, write_bytes, FormatError};
use crate::metric::{HeadParams, RepresentationProvider};

const FEATURE_MAGIC: &[u8; 4] = b"CLVR";
const CHECKPOINT_MAGIC: &[u8; 4] = b"CLVH";
const VERSION: u32 = 1;

/// Row-major feature matrix with the observation id of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dim: usize,
    pub obs_ids: Vec<u64>,
    pub data: Vec<f32>,
    index: HashMap<u64, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowId {
    row: usize,
    obs_id: u64,
}

impl FeatureTable {
    pub fn new(dim: usize, obs_ids: Vec<u64>, data: Vec<f32>) -> Result<Self, String> {
        if data.len() != dim * obs_ids.len() {
            return Err(format!("{} values for {} rows of dim {dim}", data.len(), obs_ids.len()));
        }
        let mut index = HashMap::with_capacity(obs_ids.len());
        for (row, id) in obs_ids.iter().enumerate() {
            if index.insert(*id, row).is_some() {
                return Err(format!("duplicate obs_id {id}"));
            }
        }
        Ok(Self { dim, obs_ids, data, index })
    }

    /// Build from `f64` rows; values are stored as `f32`.
    pub fn from_rows(dim: usize, rows: &[(u64, Vec<f64>)]) -> Result<Self, String> {
        let mut data = Vec::with_capacity(dim * rows.len());
        for (id, r) in rows {
            if r.len() != dim {
                return Err(format!("row for obs {id} has dim {}, expected {dim}", r.len()));
            }
            data.extend(r.iter().map(|v| *v as f32));
        }
        Self::new(dim, rows.iter().map(|r| r.0).collect(), data)
    }

    pub fn len(&self) -> usize {
        self.obs_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, obs_id: u64) -> Option<&[f32]> {
        self.index.get(&obs_id).map(|&r| self.row(r))
    }
}

impl RepresentationProvider for FeatureTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn representation(&self, obs_id: u64) -> Option<Vec<f64>> {
        self.get(obs_id).map(|r| r.iter().map(|v| *v as f64).collect())
    }
}

/// `<path>.jsonl`, mapping rows to observation ids.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".jsonl");
    PathBuf::from(s)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::invalid(self.path, "file is truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        if self.take(4)? != magic {
            return Err(FormatError::invalid(
                self.path,
                format!("bad magic, expected {}", String::from_utf8_lossy(magic)),
            ));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(FormatError::invalid(self.path, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(FormatError::invalid(self.path, "trailing bytes"));
        }
        Ok(())
    }
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<(), FormatError> {
    let too_big = |_| FormatError::invalid(path, "feature table too large");
    let mut buf = Vec::with_capacity(16 + 4 * table.data.len());
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&u32::try_from(table.len()).map_err(too_big)?.to_le_bytes());
    buf.extend_from_slice(&u32::try_from(table.dim).map_err(too_big)?.to_le_bytes());
    for v in &table.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &buf)?;
    let ids: Vec<RowId> = table.obs_ids.iter().enumerate().map(|(row, &obs_id)| RowId { row, obs_id }).collect();
    write_bytes(&sidecar_path(path), to_jsonl(&ids).as_bytes())
}

pub fn read_features(path: &Path) -> Result<FeatureTable, FormatError> {
    let buf = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    let mut r = Reader { buf: &buf, pos: 0, path };
    r.header(FEATURE_MAGIC)?;
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let bytes = r.take(count * dim * 4)?;
    r.finish()?;
    let data: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(FormatError::invalid(path, "non-finite feature value"));
    }
    let side = sidecar_path(path);
    let ids: Vec<RowId> = parse_jsonl(&read_text(&side)?, &side)?;
    if ids.len() != count || ids.iter().enumerate().any(|(i, r)| r.row != i) {
        return Err(FormatError::invalid(&side, format!("expected rows 0..{count} in order")));
    }
    FeatureTable::new(dim, ids.into_iter().map(|r| r.obs_id).collect(), data).map_err(|m| FormatError::invalid(path, m))
}

pub fn write_checkpoint(path: &Path, params: &HeadParams) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(20 + 8 * params.num_params());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for d in [params.in_dim, params.hidden, params.out_dim] {
        let d = u32::try_from(d).map_err(|_| FormatError::invalid(path, "dimension too large"))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in params.flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &buf)
}

pub fn read_checkpoint(path: &Path) -> Result<HeadParams, FormatError> {
    let buf = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    let mut r = Reader { buf: &buf, pos: 0, path };
    r.header(CHECKPOINT_MAGIC)?;
    let (i, h, o) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let mut p = HeadParams::zeros(i, h, o);
    let bytes = r.take(p.num_params() * 8)?;
    r.finish()?;
    let flat: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    p.set_flat(&flat);
    p.validate().map_err(|e| FormatError::invalid(path, e.to_string()))?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_round_trip_with_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.clvr");
        let t = FeatureTable::from_rows(3, &[(7, vec![1.0, 2.0, 3.0]), (2, vec![-0.5, 0.25, 0.0])]).unwrap();
        write_features(&p, &t).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"CLVR");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 16 + 6 * 4);
        let back = read_features(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.representation(2).unwrap(), vec![-0.5, 0.25, 0.0]);
        assert!(back.representation(3).is_none());
    }

    #[test]
    fn truncated_features_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.clvr");
        let t = FeatureTable::from_rows(2, &[(1, vec![1.0, 2.0])]).unwrap();
        write_features(&p, &t).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(read_features(&p).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("head.bin");
        let params = HeadParams::init(5, 4, 3, &mut crate::seed::rng(1));
        write_checkpoint(&p, &params).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), params);
    }
}
