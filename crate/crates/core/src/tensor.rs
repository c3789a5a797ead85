//! `AXIM` tensor files.
//!
//! Layout: the 4-byte magic `AXIM`, a little-endian `u32` header length, a
//! UTF-8 header of `key=value` lines, then `f64` little-endian values in
//! column-major order. Kernel stacks have dims `[m_t, m_k, n_k]` and store each
//! kernel contiguously (kernel rows fastest, then kernel columns, then `i_h`).

use std::collections::BTreeMap;
use std::path::Path;

use crate::axial::AxialKernelStack;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"AXIM";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorTag {
    Trf,
    Rf,
    KernelStack,
    Map,
}

impl TensorTag {
    pub fn name(self) -> &'static str {
        match self {
            TensorTag::Trf => "trf",
            TensorTag::Rf => "rf",
            TensorTag::KernelStack => "kernel-stack",
            TensorTag::Map => "map",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "trf" => TensorTag::Trf,
            "rf" => TensorTag::Rf,
            "kernel-stack" => TensorTag::KernelStack,
            "map" => TensorTag::Map,
            _ => return Err(Error::Format(format!("unknown tensor tag {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub tag: Option<TensorTag>,
    /// Additional header entries, written after the required ones.
    pub extra: BTreeMap<String, String>,
    pub data: Vec<f64>,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, tag: Option<TensorTag>, data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != data.len() {
            return Err(Error::Format(format!("dims {dims:?} do not match {} values", data.len())));
        }
        Ok(Self { dims, tag, extra: BTreeMap::new(), data })
    }

    pub fn from_image<T: Scalar>(img: &Image<T>, tag: TensorTag) -> Self {
        let data = img.as_slice().iter().map(|v| v.as_f64()).collect();
        Self { dims: vec![img.rows(), img.cols()], tag: Some(tag), extra: BTreeMap::new(), data }
    }

    pub fn to_image<T: Scalar>(&self) -> Result<Image<T>> {
        if self.dims.len() != 2 {
            return Err(Error::Format(format!("expected a 2-axis tensor, got dims {:?}", self.dims)));
        }
        Image::new(self.dims[0], self.dims[1], self.data.iter().map(|&v| T::lit(v)).collect())
    }

    /// Records `n_t` in the header so the stack can be rebuilt alone.
    pub fn from_stack<T: Scalar>(stack: &AxialKernelStack<T>) -> Self {
        let data = stack.to_kernel_major().iter().map(|v| v.as_f64()).collect();
        let mut extra = BTreeMap::new();
        extra.insert("n_t".to_string(), stack.n_t().to_string());
        Self {
            dims: vec![stack.m_t(), stack.m_k(), stack.n_k()],
            tag: Some(TensorTag::KernelStack),
            extra,
            data,
        }
    }

    /// Rebuilds a stack; `n_t` overrides the width stored in the header.
    pub fn to_stack<T: Scalar>(&self, n_t: Option<usize>) -> Result<AxialKernelStack<T>> {
        if self.dims.len() != 3 {
            return Err(Error::Format(format!("expected a 3-axis kernel stack, got dims {:?}", self.dims)));
        }
        let n_t = match n_t {
            Some(n) => n,
            None => self
                .extra
                .get("n_t")
                .ok_or_else(|| Error::Format("kernel stack header lacks n_t".into()))?
                .parse()
                .map_err(|e| Error::Format(format!("bad n_t: {e}")))?,
        };
        let data: Vec<T> = self.data.iter().map(|&v| T::lit(v)).collect();
        AxialKernelStack::from_kernel_major(self.dims[0], n_t, self.dims[1], self.dims[2], &data)
    }

    pub fn header_text(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut h = format!("ndim={}\ndims={}\norder=col-major\ndtype=f64\n", self.dims.len(), dims.join(","));
        if let Some(t) = self.tag {
            h.push_str(&format!("tag={}\n", t.name()));
        }
        for (k, v) in &self.extra {
            h.push_str(&format!("{k}={v}\n"));
        }
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = self.header_text();
        let mut out = Vec::with_capacity(8 + header.len() + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(fmt("missing AXIM magic"));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let header = bytes.get(8..8 + hlen).ok_or_else(|| fmt("truncated header"))?;
        let header = std::str::from_utf8(header).map_err(|_| fmt("header is not UTF-8"))?;

        let mut kv = BTreeMap::new();
        for line in header.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format(format!("bad header line {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |k: &str| kv.remove(k).ok_or_else(|| Error::Format(format!("header lacks {k}")));
        let ndim: usize = take("ndim")?.parse().map_err(|_| fmt("bad ndim"))?;
        let dims = take("dims")?
            .split(',')
            .map(|d| d.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| fmt("bad dims"))?;
        if dims.len() != ndim {
            return Err(fmt("ndim does not match dims"));
        }
        if take("order")? != "col-major" {
            return Err(fmt("only col-major order is supported"));
        }
        if take("dtype")? != "f64" {
            return Err(fmt("only f64 payloads are supported"));
        }
        let tag = kv.remove("tag").map(|t| TensorTag::parse(&t)).transpose()?;

        let n: usize = dims.iter().product();
        let payload = &bytes[8 + hlen..];
        if payload.len() != 8 * n {
            return Err(Error::Format(format!("payload has {} bytes, expected {}", payload.len(), 8 * n)));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mut t = Self::new(dims, tag, data)?;
        t.extra = kv;
        Ok(t)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_round_trip_is_bit_exact() {
        let vals = [0.1, -0.0, f64::MIN_POSITIVE, 1e300, -7.25, f64::EPSILON];
        let img = Image::new(2, 3, vals.to_vec()).unwrap();
        let t = TensorFile::from_image(&img, TensorTag::Rf);
        let back = TensorFile::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back, t);
        let out: Image<f64> = back.to_image().unwrap();
        for (a, b) in out.as_slice().iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn byte_layout() {
        let t = TensorFile::new(vec![1, 2], Some(TensorTag::Map), vec![1.0, 2.0]).unwrap();
        let b = t.to_bytes();
        let header = "ndim=2\ndims=1,2\norder=col-major\ndtype=f64\ntag=map\n";
        assert_eq!(&b[..4], b"AXIM");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()) as usize, header.len());
        assert_eq!(&b[8..8 + header.len()], header.as_bytes());
        assert_eq!(&b[8 + header.len()..8 + header.len() + 8], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 8 + header.len() + 16);
    }

    #[test]
    fn stack_round_trip() {
        let k1 = Image::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let k2 = Image::from_rows(&[[4.0, 5.0, 6.0]]).unwrap();
        let s = AxialKernelStack::from_kernels(7, &[k1, k2]).unwrap();
        let t = TensorFile::from_stack(&s);
        assert_eq!(t.dims, vec![2, 1, 3]);
        assert_eq!(t.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let back = TensorFile::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back.to_stack::<f64>(None).unwrap(), s);
        assert_eq!(back.to_stack::<f64>(Some(9)).unwrap().n_t(), 9);
    }

    #[test]
    fn malformed_inputs() {
        let good = TensorFile::new(vec![2, 2], None, vec![0.0; 4]).unwrap().to_bytes();
        assert!(TensorFile::from_bytes(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(TensorFile::from_bytes(&bad).is_err());
        let swapped = String::from_utf8_lossy(&good).replace("col-major", "row-major");
        assert!(TensorFile::from_bytes(swapped.as_bytes()).is_err());
        assert!(TensorFile::new(vec![2, 2], None, vec![0.0; 3]).is_err());
        assert!(TensorFile::new(vec![3], None, vec![0.0; 3]).unwrap().to_image::<f64>().is_err());
    }
}
