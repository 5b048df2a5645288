//! Little-endian weight container.
//!
//! ```text
//! "FVTW"  u32 version=1  u32 count
//! count × { u16 name_len, name (UTF-8), u8 ndim, ndim × u32 dim, f32 × prod(dims) }
//! ```
//!
//! Writers emit tensors in [`TENSOR_NAMES`] order, so a save of a loaded
//! canonical file reproduces it byte for byte. Readers accept any order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::head::{HeadWeights, RegressionWeights};
use super::hilo::HiLoWeights;
use super::{FvitError, TensorF};

pub const MAGIC: &[u8; 4] = b"FVTW";
pub const CONTAINER_VERSION: u32 = 1;

pub const TENSOR_NAMES: [&str; 13] = [
    "hi.q",
    "hi.k",
    "hi.v",
    "lo.q",
    "lo.k",
    "lo.v",
    "attn.out",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
    "fc3.weight",
    "fc3.bias",
];

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FvitError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(FvitError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FvitError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FvitError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, FvitError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Decodes all tensors, in file order.
pub fn read_tensors(bytes: &[u8]) -> Result<Vec<(String, TensorF)>, FvitError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FvitError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != CONTAINER_VERSION {
        return Err(FvitError::VersionUnsupported(version));
    }
    let count = r.u32()?;
    let mut out: Vec<(String, TensorF)> = Vec::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name_bytes = r.take(name_len)?;
        let name = String::from_utf8(name_bytes.to_vec())
            .map_err(|_| FvitError::UnknownTensor(String::from_utf8_lossy(name_bytes).into()))?;
        if out.iter().any(|(n, _)| *n == name) {
            return Err(FvitError::DuplicateTensor(name));
        }
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(FvitError::Truncated(bytes.len()))?;
        let payload = r.take(n.checked_mul(4).ok_or(FvitError::Truncated(bytes.len()))?)?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FvitError::NonFinite(name));
        }
        out.push((name, TensorF { shape, data }));
    }
    if r.pos != bytes.len() {
        return Err(FvitError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(out)
}

pub fn write_tensors(tensors: &[(&str, &TensorF)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn ordered(w: &HeadWeights) -> [(&'static str, &TensorF); 13] {
    let (h, r) = (&w.hilo, &w.regression);
    [
        ("hi.q", &h.hi_q),
        ("hi.k", &h.hi_k),
        ("hi.v", &h.hi_v),
        ("lo.q", &h.lo_q),
        ("lo.k", &h.lo_k),
        ("lo.v", &h.lo_v),
        ("attn.out", &h.out),
        ("fc1.weight", &r.fc1_w),
        ("fc1.bias", &r.fc1_b),
        ("fc2.weight", &r.fc2_w),
        ("fc2.bias", &r.fc2_b),
        ("fc3.weight", &r.fc3_w),
        ("fc3.bias", &r.fc3_b),
    ]
}

pub fn weights_to_bytes(w: &HeadWeights) -> Vec<u8> {
    write_tensors(&ordered(w))
}

/// Attention projections must agree with each other; the regression head
/// must match its fixed layer sizes.
fn check_attention(h: &HiLoWeights) -> Result<(), FvitError> {
    let c = h.out.shape().first().copied().unwrap_or(0);
    h.out.expect_shape("attn.out", &[c, c])?;
    let a = match h.hi_q.shape() {
        [rows, a] if *rows == c => *a,
        s => {
            return Err(FvitError::ShapeMismatch {
                name: "hi.q".into(),
                expected: vec![c, 0],
                found: s.to_vec(),
            })
        }
    };
    let b = c.checked_sub(a).ok_or_else(|| FvitError::ShapeMismatch {
        name: "hi.q".into(),
        expected: vec![c, c],
        found: h.hi_q.shape().to_vec(),
    })?;
    h.hi_k.expect_shape("hi.k", &[c, a])?;
    h.hi_v.expect_shape("hi.v", &[c, a])?;
    h.lo_q.expect_shape("lo.q", &[c, b])?;
    h.lo_k.expect_shape("lo.k", &[c, b])?;
    h.lo_v.expect_shape("lo.v", &[c, b])
}

pub fn weights_from_bytes(bytes: &[u8]) -> Result<HeadWeights, FvitError> {
    let mut map: HashMap<String, TensorF> = HashMap::new();
    for (name, t) in read_tensors(bytes)? {
        if !TENSOR_NAMES.contains(&name.as_str()) {
            return Err(FvitError::UnknownTensor(name));
        }
        map.insert(name, t);
    }
    if let Some(missing) = TENSOR_NAMES.iter().find(|n| !map.contains_key(**n)) {
        return Err(FvitError::MissingTensor(missing.to_string()));
    }
    let mut take = |n: &str| map.remove(n).expect("presence checked");
    let w = HeadWeights {
        hilo: HiLoWeights {
            hi_q: take("hi.q"),
            hi_k: take("hi.k"),
            hi_v: take("hi.v"),
            lo_q: take("lo.q"),
            lo_k: take("lo.k"),
            lo_v: take("lo.v"),
            out: take("attn.out"),
        },
        regression: RegressionWeights {
            fc1_w: take("fc1.weight"),
            fc1_b: take("fc1.bias"),
            fc2_w: take("fc2.weight"),
            fc2_b: take("fc2.bias"),
            fc3_w: take("fc3.weight"),
            fc3_b: take("fc3.bias"),
        },
    };
    check_attention(&w.hilo)?;
    w.regression.check()?;
    Ok(w)
}

pub fn load_weights(path: &Path) -> Result<HeadWeights, FvitError> {
    let bytes = fs::read(path).map_err(|e| FvitError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    weights_from_bytes(&bytes)
}

pub fn save_weights(path: &Path, w: &HeadWeights) -> Result<(), FvitError> {
    fs::write(path, weights_to_bytes(w)).map_err(|e| FvitError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}
